import hashlib
import json
import shutil
from pathlib import Path

import pytest

from parkipipe.cli import canonical_hash, main
from parkipipe.cohortio import write_cohort
from parkipipe.synthcohort import generate, phenotype_spec

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def tree_digest(root: Path) -> str:
    h = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if p.is_file():
            h.update(str(p.relative_to(root)).encode())
            h.update(p.read_bytes())
    return h.hexdigest()


@pytest.fixture(scope="module")
def cohort_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "c1"
    assert main(["synth", "--spec", str(CONFIGS / "small.toml"), "--seed", "7", "--out", str(out)]) == 0
    return out


def test_synth_is_byte_identical(cohort_dir, tmp_path):
    again = tmp_path / "c2"
    assert main(["synth", "--spec", str(CONFIGS / "small.toml"), "--seed", "7", "--out", str(again)]) == 0
    assert tree_digest(cohort_dir) == tree_digest(again)
    manifest = json.loads((again / "cohort.json").read_text())
    assert manifest["seed"] == 7 and manifest["metadata"]["spec"]["seed"] == 7


def test_evaluate_report_and_determinism(cohort_dir, tmp_path, capsys):
    before = tree_digest(cohort_dir)
    args = ["evaluate", "--cohort", str(cohort_dir), "--task", "pd-vs-hc", "--seed", "3"]
    assert main(args + ["--out", str(tmp_path / "r1")]) == 0
    assert main(args + ["--out", str(tmp_path / "r2"), "--threads", "2"]) == 0
    assert tree_digest(cohort_dir) == before
    a = json.loads((tmp_path / "r1" / "report.json").read_text())
    b = json.loads((tmp_path / "r2" / "report.json").read_text())
    assert a["canonical_sha256"] == b["canonical_sha256"] == canonical_hash(a)
    strip = lambda d: {k: v for k, v in d.items() if k != "created"}  # noqa: E731
    assert json.dumps(strip(a), sort_keys=True) == json.dumps(strip(b), sort_keys=True)
    pipes = a["tasks"]["pd-vs-hc"]["pipelines"]
    assert len(pipes) == 5 and all(len(p["fold_scores"]) == 15 for p in pipes)
    assert a["provenance"]["seed"] == 3 and "stack" in a["provenance"]["config"]
    text = (tmp_path / "r1" / "report.txt").read_text()
    assert "Quest. + Mov. + Voice + Finger Tapping" in text
    capsys.readouterr()
    assert main(["report", "--report", str(tmp_path / "r1" / "report.json")]) == 0
    assert capsys.readouterr().out == text

    # a report holding both tasks keeps the PD vs. HC column first
    both = dict(a, tasks={"pd-vs-dd": a["tasks"]["pd-vs-hc"], "pd-vs-hc": a["tasks"]["pd-vs-hc"]})
    both["canonical_sha256"] = canonical_hash(both)
    path = tmp_path / "both.json"
    path.write_text(json.dumps(both, sort_keys=True))
    assert main(["report", "--report", str(path)]) == 0
    header = capsys.readouterr().out.splitlines()[0]
    assert header.index("PD vs. HC") < header.index("PD vs. DD")


def test_train_and_predict(cohort_dir, tmp_path):
    out = tmp_path / "m"
    assert main(["train", "--cohort", str(cohort_dir), "--task", "pd-vs-dd", "--config",
                 str(CONFIGS / "stack.toml"), "--learner", "Tap=logreg", "--out", str(out)]) == 0
    model = json.loads((out / "model_pd-vs-dd.json").read_text())
    assert model["spec"]["assignment"]["Tap"] == "logreg"
    subject = json.loads((cohort_dir / "cohort.json").read_text())["subjects"]
    full = next(s for s in subject if s["taps"] is not None)
    pred_dir = tmp_path / "p"
    assert main(["predict", "--model", str(out / "model_pd-vs-dd.json"), "--subject", str(cohort_dir / full["id"]),
                 "--out", str(pred_dir)]) == 0
    doc = json.loads((pred_dir / "prediction.json").read_text())
    assert doc["subject"] == full["id"] and set(doc["per_modality"]) == {"Quest", "Mov", "Voice", "Tap"}
    # the train output directory works when it holds one model
    assert main(["predict", "--model", str(out), "--subject", str(cohort_dir / full["id"]),
                 "--out", str(tmp_path / "p3")]) == 0
    again = json.loads((tmp_path / "p3" / "prediction.json").read_text())
    assert again["probability"] == doc["probability"]
    shutil.copy(out / "model_pd-vs-dd.json", out / "model_pd-vs-hc.json")
    assert main(["predict", "--model", str(out), "--subject", str(cohort_dir / full["id"])]) == 2
    tier1 = next(s for s in subject if s["taps"] is None)
    assert main(["predict", "--model", str(out / "model_pd-vs-dd.json"), "--subject", str(cohort_dir / tier1["id"]),
                 "--out", str(tmp_path / "p2")]) == 1
    assert json.loads((tmp_path / "p2" / "error.json").read_text())["error"] == "MissingModality"


def test_extract(cohort_dir, tmp_path):
    out = tmp_path / "f"
    assert main(["extract", "--cohort", str(cohort_dir), "--out", str(out)]) == 0
    names = sorted(p.name for p in out.glob("*.csv"))
    assert names == sorted(["features_Quest.csv", "features_Mov.csv", "features_Voice.csv", "features_Tap.csv",
                            "features_ClusterSubset.csv"])
    header = (out / "features_Mov.csv").read_text().splitlines()[0].split(",")
    assert len(header) == 265


def test_cluster_outputs(tmp_path):
    cohort = write_cohort(generate(phenotype_spec(0)), tmp_path / "ph")
    out = tmp_path / "k1"
    assert main(["cluster", "--cohort", str(cohort), "--out", str(out)]) == 0
    for view in ("single_modal", "multi_modal"):
        for f in ("clustering.json", "dendrogram.json", "dendrogram.svg", "composition.txt"):
            assert (out / view / f).exists()
    cmp = json.loads((out / "comparison.json").read_text())
    assert (cmp["k_single"], cmp["k_multi"]) == (2, 4)
    assert json.loads((out / "multi_modal" / "clustering.json").read_text())["k"] == 4


def test_usage_errors(tmp_path, cohort_dir):
    assert main([]) == 2
    assert main(["evaluate", "--cohort", str(tmp_path / "missing"), "--out", str(tmp_path / "x")]) == 2
    assert main(["evaluate", "--cohort", str(cohort_dir), "--task", "pd-vs-xx", "--out", str(tmp_path / "x")]) == 2
    assert main(["train", "--cohort", str(cohort_dir), "--learner", "Quest=forest", "--out", str(tmp_path / "x")]) == 2
    assert main(["synth", "--spec", str(tmp_path / "nope.toml"), "--out", str(tmp_path / "y")]) == 2


def test_domain_error_writes_error_json(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"counts": {"tier1": {"PD": -3}}}))
    out = tmp_path / "o"
    assert main(["synth", "--spec", str(bad), "--out", str(out)]) == 1
    err = json.loads((out / "error.json").read_text())
    assert err["error"] == "InvalidSpec" and err["command"] == "synth"


def test_insufficient_samples_is_domain_error(tmp_path):
    spec = tmp_path / "tiny.json"
    spec.write_text(json.dumps({"counts": {"tier1": {"PD": 2, "HC": 2}, "complete": {"PD": 3, "HC": 3}}}))
    c = tmp_path / "tiny"
    assert main(["synth", "--spec", str(spec), "--out", str(c)]) == 0
    assert main(["train", "--cohort", str(c), "--out", str(tmp_path / "t")]) == 1
    assert json.loads((tmp_path / "t" / "error.json").read_text())["error"] == "InsufficientCompleteSamples"
