import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.cluster.hierarchy import fcluster, linkage
from sklearn.metrics import adjusted_rand_score

from parkipipe.clustering import (
    Dendrogram,
    Merge,
    adjusted_rand_index,
    agglomerate,
    compare_modal_runs,
    composition_table,
    cut_at_k,
    cut_by_largest_gap,
    dendrogram_svg,
    ClusterAssignment,
)
from parkipipe.datamodel import DiseaseClass, PdMotorType
from parkipipe.errors import DegenerateInput, InvalidParams, NonPdSubject
from parkipipe.features import FeatureMatrix, extract_features
from parkipipe.synthcohort import CohortSpec, generate, phenotype_spec

from blobs import planted_blobs


class TestAgglomerate:
    @pytest.mark.parametrize("method", ["ward", "complete", "average", "single"])
    def test_matches_scipy(self, method):
        for seed in range(10):
            X = np.random.default_rng(seed).standard_normal((25, 4))
            d = agglomerate(X, method, standardize=False)
            Z = linkage(X, method)
            np.testing.assert_allclose(d.heights, Z[:, 2], rtol=1e-10)
            for kk in (2, 3, 5):
                ours = [cut_at_k(d, kk).labels[i] for i in d.leaf_ids]
                assert adjusted_rand_score(ours, fcluster(Z, kk, "maxclust")) == pytest.approx(1.0)

    def test_two_points(self):
        d = agglomerate(np.array([[0.0, 0.0], [3.0, 4.0]]), standardize=False)
        assert len(d.merges) == 1 and d.merges[0].height == pytest.approx(5.0)
        ds = agglomerate(np.array([[0.0, 0.0], [3.0, 4.0]]))
        assert ds.merges[0].height == pytest.approx(np.sqrt(8.0))

    def test_collinear_average(self):
        d = agglomerate(np.array([0.0, 1.0, 10.0]), "average", standardize=False)
        assert (d.merges[0].left, d.merges[0].right) == (0, 1) and d.merges[0].height == 1.0
        assert d.merges[1].height == pytest.approx(9.5)

    def test_duplicates_merge_first(self, rng):
        X = rng.standard_normal((6, 3))
        X = np.vstack([X, X[2]])
        d = agglomerate(X)
        assert d.merges[0].height == 0.0 and {d.merges[0].left, d.merges[0].right} == {2, 6}

    def test_errors(self):
        with pytest.raises(DegenerateInput):
            agglomerate(np.zeros((1, 3)))
        with pytest.raises(DegenerateInput):
            agglomerate(np.array([[0.0, np.nan], [1.0, 2.0]]))
        with pytest.raises(InvalidParams):
            agglomerate(np.zeros((3, 2)), "median")

    def test_row_permutation_invariance(self, rng):
        X = rng.standard_normal((15, 4))
        ids = [f"p{i:02d}" for i in range(15)]
        a = cut_by_largest_gap(agglomerate(FeatureMatrix(tuple(ids), ("a", "b", "c", "d"), X, "x")))
        perm = rng.permutation(15)
        fm = FeatureMatrix(tuple(ids[i] for i in perm), ("a", "b", "c", "d"), X[perm], "x")
        b = cut_by_largest_gap(agglomerate(fm))
        assert a.labels == b.labels

    def test_constant_column_passes_through(self, rng):
        X = np.column_stack([rng.standard_normal(10), np.full(10, 4.0)])
        np.testing.assert_allclose(agglomerate(X).heights, agglomerate(X[:, :1]).heights)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.integers(3, 30))
    def test_ward_monotone(self, seed, n):
        X = np.random.default_rng(seed).standard_normal((n, 3))
        assert agglomerate(X).is_monotone()


def chain(heights):
    """Caterpillar dendrogram over n = len(heights) + 1 leaves with the given heights."""
    n = len(heights) + 1
    merges, size, node = [], 1, 0
    for step, h in enumerate(heights):
        merges.append(Merge(node, step + 1, h, size + 1))
        node, size = n + step, size + 1
    return Dendrogram(tuple(merges), tuple(f"l{i}" for i in range(n)), "ward")


class TestGapCut:
    def test_examples(self):
        a = cut_by_largest_gap(chain([0.1, 0.2, 5.0]))
        assert (a.cut_index, a.k) == (2, 2)
        b = cut_by_largest_gap(chain([1.0, 2.0, 3.0]))
        assert (b.cut_index, b.k) == (1, 3)

    def test_two_blobs_of_ten(self):
        X, lab = planted_blobs(2, 0, n=20)
        d = agglomerate(X, standardize=False)
        a = cut_by_largest_gap(d)
        assert a.k == 2 and adjusted_rand_index(lab, [a.labels[i] for i in d.leaf_ids]) == 1.0

    @pytest.mark.parametrize("k", [3, 4])
    def test_more_blobs_recover_k(self, k):
        aris = []
        for seed in range(20):
            X, lab = planted_blobs(k, seed)
            d = agglomerate(X, standardize=False)
            a = cut_by_largest_gap(d)
            assert a.k == k
            aris.append(adjusted_rand_index(lab, [a.labels[i] for i in d.leaf_ids]))
        assert np.mean(aris) >= 0.9

    def test_too_few(self):
        with pytest.raises(DegenerateInput):
            cut_by_largest_gap(chain([1.0]))

    def test_labels_by_first_leaf(self):
        a = cut_by_largest_gap(chain([0.1, 0.2, 5.0]))
        assert a.labels == {"l0": 1, "l1": 1, "l2": 1, "l3": 2}

    def test_gap_ratio(self):
        assert cut_by_largest_gap(chain([0.1, 0.2, 5.0])).gap_ratio == pytest.approx(4.8 / 0.1)
        assert cut_by_largest_gap(chain([1.0, 2.0, 3.0])).low_separation


class TestComposition:
    def test_examples(self):
        a = ClusterAssignment({"a": 1, "b": 1, "c": 1}, 1, 2)
        t = composition_table(a, {"a": "T", "b": "AR", "c": "ART"})
        assert t.percent[0].tolist() == [33.33, 33.33, 33.33, 0.0]
        a = ClusterAssignment({"a": 1, "b": 1, "c": 1, "d": 1}, 1, 3)
        t = composition_table(a, {"a": "AR", "b": "ART", "c": "ART", "d": "Unknown"})
        assert t.percent[0].tolist() == [0.0, 25.0, 50.0, 25.0]
        assert "33.33" in composition_table(ClusterAssignment({"a": 1, "b": 1, "c": 1}, 1, 2),
                                            {"a": "T", "b": "AR", "c": "ART"}).to_text()

    def test_non_pd(self):
        a = ClusterAssignment({"a": 1, "b": 1}, 1, 1)
        with pytest.raises(NonPdSubject):
            composition_table(a, {"a": "T", "b": None})
        with pytest.raises(NonPdSubject):
            composition_table(a, {"a": "T", "b": "T"}, {"a": DiseaseClass.PD, "b": DiseaseClass.HC})

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.tuples(st.integers(1, 4), st.sampled_from(list(PdMotorType))), min_size=1, max_size=40))
    def test_rows_sum_to_100(self, rows):
        labels = {f"s{i}": c for i, (c, _) in enumerate(rows)}
        types = {f"s{i}": t for i, (_, t) in enumerate(rows)}
        t = composition_table(ClusterAssignment(labels, len(set(labels.values())), 0), types)
        assert np.all(np.abs(t.percent.sum(axis=1) - 100) <= 0.01 * 4)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 4), min_size=2, max_size=40), st.integers(0, 2**31 - 1))
def test_ari_matches_sklearn(a, seed):
    b = np.random.default_rng(seed).integers(0, 3, len(a))
    assert adjusted_rand_index(a, b) == pytest.approx(adjusted_rand_score(a, b), abs=1e-12)


class TestModalComparison:
    def test_planted_phenotypes(self):
        fs = extract_features(generate(phenotype_spec(0)))
        cmp = compare_modal_runs(fs)
        assert (cmp.single.k, cmp.multi.k) == (2, 4)
        d = cmp.to_dict()
        assert d["k_single"] == 2 and sum(c["count"] for c in d["crosstab"]) == 20
        assert cmp.single.composition.prefix == "S" and cmp.multi.composition.prefix == "M"
        json.dumps(cmp.multi.to_dict())
        svg = dendrogram_svg(cmp.multi.dendrogram, cmp.multi.assignment)
        assert svg.startswith("<svg") and "stroke-dasharray" in svg

    def test_identical_views_identical_assignments(self, small_features):
        ids = sorted(i for i in small_features.complete_ids() if small_features.disease[i] is DiseaseClass.PD)
        fm = small_features.cluster_matrix(ids)
        mov = fm.columns([n for n in fm.names if n.startswith("mov_")])
        a = cut_by_largest_gap(agglomerate(mov))
        b = cut_by_largest_gap(agglomerate(mov.columns(mov.names)))
        assert a.labels == b.labels

    def test_single_phenotype_reports_separation(self):
        # The flag is a fixed threshold on the gap ratio. On a single planted
        # phenotype it fires on some seeds only, so this checks the contract
        # rather than a particular seed's outcome.
        planted = compare_modal_runs(extract_features(generate(phenotype_spec(0))))
        d = phenotype_spec(0, n_per_phenotype=20).to_dict()
        d["phenotypes"] = d["phenotypes"][:1]
        d["counts"]["complete"]["PD"] = 20
        control = compare_modal_runs(extract_features(generate(CohortSpec.from_dict(d))))
        for run in (planted.single, planted.multi, control.single, control.multi):
            a = run.assignment
            assert a.low_separation == (a.gap_ratio < 1.5)
            assert run.to_dict()["assignment"]["low_separation"] == a.low_separation
        assert not planted.single.assignment.low_separation
        assert planted.single.assignment.gap_ratio > control.single.assignment.gap_ratio

    def test_gap_ratio_flag_on_constructed_dendrograms(self):
        even = cut_by_largest_gap(chain([1.0, 2.0, 3.1, 4.0, 5.0]))
        assert even.low_separation and even.gap_ratio < 1.5
        clear = cut_by_largest_gap(chain([1.0, 1.2, 1.3, 1.5, 9.0]))
        assert not clear.low_separation and clear.gap_ratio > 1.5

    def test_needs_three_pd(self, small_features):
        from parkipipe.features import FeatureSet

        few = FeatureSet(small_features.matrices, {k: DiseaseClass.HC for k in small_features.disease},
                         small_features.motor_type)
        with pytest.raises(DegenerateInput):
            compare_modal_runs(few)
