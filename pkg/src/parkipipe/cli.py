"""Command-line entry point: synth, extract, train, evaluate, report, cluster, predict.

Exit codes: 0 on success, 1 on domain errors (message on stderr and an
``error.json`` in the output directory), 2 on usage errors.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .clustering import LINKAGES, compare_modal_runs, dendrogram_svg
from .cohortio import read_cohort, read_subject, write_cohort
from .datamodel import MODALITY_ORDER, Modality
from .errors import PipelineError
from .evaluation import EvalReport, cross_validate, default_pipelines, format_table, plan_for
from .features import assemble, extract_features
from .learners import LEARNER_KINDS
from .stacking import StackedModel, StackSpec, Task, fit_stack, predict_stack
from .synthcohort import CohortSpec, generate

log = logging.getLogger("parkipipe")

TASK_CHOICES = [t.value for t in Task] + ["all"]


class UsageError(Exception):
    pass


def load_config(path) -> dict:
    """JSON or TOML mapping, chosen by file suffix."""
    path = Path(path)
    if not path.exists():
        raise UsageError(f"config file not found: {path}")
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    return json.loads(path.read_text(encoding="utf-8"))


def _dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def canonical_hash(doc: dict) -> str:
    body = {k: v for k, v in doc.items() if k not in ("created", "canonical_sha256")}
    return hashlib.sha256(json.dumps(body, sort_keys=True).encode("utf-8")).hexdigest()


def _provenance(args, config: dict) -> dict:
    return {
        "tool": "parkipipe",
        "version": __version__,
        "command": args.command,
        "seed": args.seed,
        "config": config,
    }


def _cohort(path) -> "object":
    path = Path(path)
    if not (path / "cohort.json").exists():
        raise UsageError(f"not a cohort directory: {path}")
    return read_cohort(path)


def _stack_spec(args) -> StackSpec:
    d = {}
    if getattr(args, "config", None):
        cfg = load_config(args.config)
        d = cfg.get("stack", cfg)
    d = dict(d)
    assignment = {m.value: k for m, k in StackSpec().assignment.items()}
    assignment.update(d.get("assignment", {}))
    for item in getattr(args, "learner", None) or []:
        mod, _, kind = item.partition("=")
        if mod not in {m.value for m in Modality} or kind not in LEARNER_KINDS:
            raise UsageError(f"--learner expects <Modality>=<kind>, got {item!r}")
        assignment[mod] = kind
    d["assignment"] = assignment
    configs = d.get("learner_configs", {})
    # drop overrides whose learner kind changed
    d["learner_configs"] = {m: c for m, c in configs.items() if m in assignment and _fits(assignment[m], c)}
    d["seed"] = args.seed
    try:
        return StackSpec.from_dict(d)
    except (TypeError, ValueError, KeyError) as exc:
        if isinstance(exc, PipelineError):
            raise
        raise UsageError(f"invalid stack config: {exc}") from None


def _fits(kind: str, cfg: dict) -> bool:
    from .stacking import _CONFIG_TYPES

    try:
        _CONFIG_TYPES[kind](**cfg)
        return True
    except TypeError:
        return False


def _tasks(value: str) -> list[Task]:
    return list(Task) if value == "all" else [Task(value)]


# --- subcommands ------------------------------------------------------------


def cmd_synth(args) -> dict:
    d = load_config(args.spec) if args.spec else {}
    d = dict(d.get("cohort", d))
    if args.effect_scale is not None:
        d["effect_scale"] = args.effect_scale
    d["seed"] = args.seed
    spec = CohortSpec.from_dict(d)
    out = Path(args.out)
    write_cohort(generate(spec), out)
    return {"out": str(out), "subjects": sum(sum(c.values()) for c in spec.counts.values())}


def cmd_extract(args) -> dict:
    cohort = _cohort(args.cohort)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = {}
    for m in list(MODALITY_ORDER) + ["ClusterSubset"]:
        fm = assemble(cohort, m, tap_speed=args.tap_speed, mov_reduction=args.cluster_mov_reduction)
        name = m.value if isinstance(m, Modality) else m
        fm.to_csv(out / f"features_{name}.csv")
        written[name] = {"rows": len(fm.subject_ids), "columns": len(fm.names), "skipped": [list(s) for s in fm.skipped]}
    config = {"tap_speed": args.tap_speed, "cluster_mov_reduction": args.cluster_mov_reduction,
              "welch": {"segment_len": 128, "overlap": 0.5, "window": "hann"}}
    _dump({"provenance": _provenance(args, config), "cohort": str(args.cohort), "matrices": written},
          out / "provenance.json")
    return {"out": str(out)}


def cmd_train(args) -> dict:
    spec = _stack_spec(args)
    data = extract_features(_cohort(args.cohort))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}
    for task in _tasks(args.task):
        model = fit_stack(data, task, spec)
        doc = model.to_dict()
        doc["provenance"] = _provenance(args, spec.to_dict())
        path = out / f"model_{task.value}.json"
        _dump(doc, path)
        paths[task.value] = str(path)
    return {"models": paths}


def cmd_evaluate(args) -> dict:
    spec = _stack_spec(args)
    data = extract_features(_cohort(args.cohort))
    n_jobs = args.threads
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pipelines = default_pipelines(spec, single_use_aux=args.single_use_aux)
    results, tasks_doc = {}, {}
    for task in _tasks(args.task):
        plan = plan_for(data, task, args.repeats, args.folds, args.seed)
        reports = [cross_validate(data, task, p, plan, n_jobs=n_jobs) for p in pipelines]
        results[task.value] = reports
        tasks_doc[task.value] = {
            "fold_plan": plan.to_dict(),
            "pipelines": [r.to_dict() for r in reports],
        }
    config = {
        "stack": spec.to_dict(),
        "repeats": args.repeats,
        "folds": args.folds,
        "single_use_aux": args.single_use_aux,
        "std_convention": "population",
    }
    doc = {"provenance": _provenance(args, config), "tasks": tasks_doc}
    doc["canonical_sha256"] = canonical_hash(doc)
    doc["created"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    _dump(doc, out / "report.json")
    text = format_table(results)
    (out / "report.txt").write_text(text, encoding="utf-8")
    print(text, end="")
    return {"report": str(out / "report.json")}


def cmd_cluster(args) -> dict:
    data = extract_features(_cohort(args.cohort))
    cmp = compare_modal_runs(data, args.linkage, not args.no_standardize, args.cluster_mov_reduction)
    out = Path(args.out)
    config = {"linkage": args.linkage, "standardize": not args.no_standardize,
              "cluster_mov_reduction": args.cluster_mov_reduction}
    prov = _provenance(args, config)
    for run in (cmp.single, cmp.multi):
        d = out / run.name
        d.mkdir(parents=True, exist_ok=True)
        _dump({"provenance": prov, **run.to_dict()}, d / "clustering.json")
        _dump({"provenance": prov, **run.dendrogram.to_dict()}, d / "dendrogram.json")
        (d / "dendrogram.svg").write_text(dendrogram_svg(run.dendrogram, run.assignment), encoding="utf-8")
        (d / "composition.txt").write_text(run.composition.to_text(), encoding="utf-8")
    _dump({"provenance": prov, **cmp.to_dict()}, out / "comparison.json")
    (out / "crosstab.txt").write_text(cmp.crosstab_text(), encoding="utf-8")
    summary = f"k_single={cmp.single.k} k_multi={cmp.multi.k}"
    for run in (cmp.single, cmp.multi):
        if run.assignment.low_separation:
            summary += f"\nwarning: {run.name} cut has low separation (gap ratio {run.assignment.gap_ratio:.2f})"
    print(summary)
    return {"k_single": cmp.single.k, "k_multi": cmp.multi.k}


def cmd_predict(args) -> dict:
    path = Path(args.model)
    if path.is_dir():
        # a train output directory is accepted when it holds a single model
        found = sorted(path.glob("model_*.json"))
        if len(found) != 1:
            raise UsageError(f"{path} holds {len(found)} model files; pass one with --model")
        path = found[0]
    if not path.is_file():
        raise UsageError(f"model file not found: {path}")
    model = StackedModel.from_json(path.read_text(encoding="utf-8"))
    subject = read_subject(args.subject)
    pred = predict_stack(model, subject)
    doc = {
        "subject": subject.id,
        "task": model.task.value,
        **pred.to_dict(),
        "provenance": _provenance(args, {"model": str(path), "stack": model.spec.to_dict()}),
    }
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _dump(doc, out / "prediction.json")
    print(json.dumps(doc, indent=1, sort_keys=True))
    return doc


def cmd_report(args) -> dict:
    path = Path(args.report)
    if not path.exists():
        raise UsageError(f"report file not found: {path}")
    doc = json.loads(path.read_text(encoding="utf-8"))
    try:
        tasks = sorted(doc["tasks"], key=lambda t: list(Task).index(Task(t)))
        results = {t: [EvalReport.from_dict(r) for r in doc["tasks"][t]["pipelines"]] for t in tasks}
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"{path} is not an evaluate report: {exc}") from None
    text = format_table(results)
    if canonical_hash(doc) != doc.get("canonical_sha256"):
        print(f"warning: {path} does not match its canonical hash", file=sys.stderr)
    print(text, end="")
    return {"tasks": list(results)}


# --- argument parsing -------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="parkipipe", description="Multi-modal PD classification and clustering pipeline")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, cohort=True, out_required=True):
        if cohort:
            sp.add_argument("--cohort", required=True, help="cohort directory")
        sp.add_argument("--out", required=out_required, help="output directory")
        sp.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("synth", help="generate a synthetic cohort directory")
    common(s, cohort=False)
    s.add_argument("--spec", help="cohort spec (JSON or TOML)")
    s.add_argument("--effect-scale", type=float, default=None, help="override effect_scale (0 = null cohort)")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("extract", help="write per-modality feature CSVs")
    common(s)
    s.add_argument("--tap-speed", choices=("spatial", "rate"), default="spatial")
    s.add_argument("--cluster-mov-reduction", choices=("channel", "global"), default="channel")
    s.set_defaults(func=cmd_extract)

    for name, func, helptext in (
        ("train", cmd_train, "fit and serialise the stacked model"),
        ("evaluate", cmd_evaluate, "repeated stratified CV of single-modality and stacked pipelines"),
    ):
        s = sub.add_parser(name, help=helptext)
        common(s)
        s.add_argument("--task", choices=TASK_CHOICES, default="all" if name == "evaluate" else "pd-vs-hc")
        s.add_argument("--config", help="stack config (JSON or TOML)")
        s.add_argument("--learner", action="append", metavar="MODALITY=KIND",
                       help=f"override a base learner; kinds: {', '.join(LEARNER_KINDS)}")
        if name == "evaluate":
            s.add_argument("--repeats", type=int, default=3)
            s.add_argument("--folds", type=int, default=5)
            s.add_argument("--single-use-aux", action="store_true",
                           help="train single-modality rows on every subject with that modality")
            s.add_argument("--threads", type=int, default=None, help="worker processes (default: PARKIPIPE_THREADS or 1)")
        s.set_defaults(func=func)

    s = sub.add_parser("cluster", help="single- vs multi-modal clustering of PD subjects")
    common(s)
    s.add_argument("--linkage", choices=LINKAGES, default="ward")
    s.add_argument("--no-standardize", action="store_true")
    s.add_argument("--cluster-mov-reduction", choices=("channel", "global"), default="channel")
    s.set_defaults(func=cmd_cluster)

    s = sub.add_parser("report", help="re-render the text table of an evaluate report.json")
    s.add_argument("--report", required=True, help="report.json written by evaluate")
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("predict", help="classify one subject directory with a trained model")
    s.add_argument("--model", required=True)
    s.add_argument("--subject", required=True, help="subject directory containing subject.json")
    s.add_argument("--out")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_predict)
    return p


def _write_error(args, exc: Exception) -> None:
    out = getattr(args, "out", None)
    if not out:
        return
    try:
        Path(out).mkdir(parents=True, exist_ok=True)
        _dump(
            {"error": type(exc).__name__, "code": getattr(exc, "code", type(exc).__name__), "message": str(exc),
             "command": args.command, "seed": getattr(args, "seed", None)},
            Path(out) / "error.json",
        )
    except OSError:
        pass


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except UsageError as exc:
        print(f"parkipipe {args.command}: {exc}", file=sys.stderr)
        return 2
    except PipelineError as exc:
        print(f"parkipipe {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        _write_error(args, exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
