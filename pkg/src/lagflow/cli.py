"""Command line entry point: ``lagflow run | predict | verify | sweep``.

Exit codes: 0 success, 1 invalid input, 2 step failure (partial outputs
written), 3 verification failure.
"""

from __future__ import annotations

import argparse
import copy
import itertools
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import yaml

from lagflow import flow, functionals, outputs, scenario, singularity as sg, verify

log = logging.getLogger("lagflow")

EXIT_OK, EXIT_INPUT, EXIT_STEP, EXIT_VERIFY = 0, 1, 2, 3


def execute(scn: scenario.Scenario, out_dir: Path) -> tuple[int, dict]:
    """Run one scenario and write its outputs under ``out_dir``."""
    config = scenario.build(scn)
    centres = scenario.auto_centers(config) if scn.tracked_centers == "auto" else scn.tracked_centers
    trace = flow.run(config, scn.flow, scn.tracked_cycles, centres)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs.write_series(out_dir / "series.csv", trace.series)
    ckpt_dir = out_dir / "checkpoints"
    ckpt_dir.mkdir(exist_ok=True)
    for old in ckpt_dir.glob("ckpt_*.txt"):
        old.unlink()
    for k, state in enumerate(trace.checkpoints):
        outputs.write_checkpoint(ckpt_dir / f"ckpt_{k:05d}.txt", state)

    candidates = sg.predict_typeI_times(config, trace.tracked_cycles or None)
    report = {
        "schema_version": 1,
        "scenario": scn.name,
        "termination": trace.termination,
        "message": trace.message,
        "final_time": trace.checkpoints[-1].t,
        "tracked_centers": centres,
        "candidates": candidates,
        "singularity": None,
        "analysis_error": None,
    }
    if trace.termination == "blow-up":
        try:
            report["singularity"] = _report_dict(sg.analyze(trace))
        except functionals.DomainError as exc:
            report["analysis_error"] = str(exc)
    elif trace.termination == "stop_time":
        report["message"] = "no singularity before stop_time"
    outputs.write_json(out_dir / "report.json", report)
    code = EXIT_STEP if trace.termination == "step-failure" else EXIT_OK
    return code, report


def _report_dict(rep: sg.SingularityReport) -> dict:
    d = outputs.to_jsonable(rep)
    d["type"] = rep.classification.kind
    return d


def _load(source):
    try:
        return scenario.load_scenario(source)
    except scenario.ScenarioError as exc:
        log.error("invalid scenario: %s", exc)
        return None


def cmd_run(args) -> int:
    scn = _load(args.scenario)
    if scn is None:
        return EXIT_INPUT
    out = Path(args.out_dir) / scn.name
    code, report = execute(scn, out)
    sing = report["singularity"]
    summary = f"{scn.name}: {report['termination']}"
    if sing:
        summary += f", T_est={sing['T_est']:.6g}, type={sing['type']}"
        if sing["matched_candidate"]:
            summary += f", matched {sing['matched_candidate']}"
    print(summary)
    print(f"outputs in {out}")
    return code


def cmd_predict(args) -> int:
    scn = _load(args.scenario)
    if scn is None:
        return EXIT_INPUT
    config = scenario.build(scn)
    cands = sg.predict_typeI_times(config, scn.tracked_cycles)
    print(f"{'cycle':<12}{'lambda':>22}{'maslov':>22}  T_candidate")
    for e in cands.entries:
        T = "undefined" if not e.defined else repr(e.T_candidate)
        print(f"{e.cycle.name:<12}{e.lambda_pairing:>22.15g}{e.maslov_pairing:>22.15g}  {T}")
    return EXIT_OK


def cmd_verify(args) -> int:
    results = verify.run_all(only=args.suite or None)
    summary = {"passed": all(r.passed for r in results), "suites": [outputs.to_jsonable(r) for r in results]}
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<22} {r.detail}  ({r.seconds:.1f}s)")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "verify.json").write_text(json.dumps(summary, indent=2) + "\n")
    return EXIT_OK if summary["passed"] else EXIT_VERIFY


def _set_path(doc, dotted, value):
    keys = dotted.split(".")
    node = doc
    for k in keys[:-1]:
        if isinstance(node, list):
            node = node[int(k)]
        else:
            node = node.setdefault(k, {})
    if isinstance(node, list):
        node[int(keys[-1])] = value
    else:
        node[keys[-1]] = value


def _parse_range(text):
    path, _, values = text.partition("=")
    items = [yaml.safe_load(v) for v in values.split(",") if v.strip()]
    if not path or not items:
        raise scenario.ScenarioError(f"sweep range {text!r}: expected path=v1,v2,...")
    return path.strip(), items


def _sweep_cell(args):
    doc, out_dir = args
    scn = scenario.load_scenario(doc)
    code, report = execute(scn, Path(out_dir))
    sing = report["singularity"] or {}
    return code, report["termination"], sing.get("T_est"), sing.get("type")


def cmd_sweep(args) -> int:
    if args.scenario in scenario.BUILTINS:
        template = copy.deepcopy(scenario.BUILTINS[args.scenario])
    else:
        try:
            template = yaml.safe_load(Path(args.scenario).read_text())
        except (OSError, yaml.YAMLError) as exc:
            log.error("cannot read sweep template: %s", exc)
            return EXIT_INPUT
    try:
        ranges = [_parse_range(r) for r in args.param]
    except scenario.ScenarioError as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    if not ranges:
        log.error("sweep needs at least one --param range")
        return EXIT_INPUT
    root = Path(args.out_dir) / f"sweep-{template.get('name', 'scenario')}"
    cells = []
    for k, combo in enumerate(itertools.product(*[vals for _, vals in ranges])):
        doc = copy.deepcopy(template)
        for (path, _), value in zip(ranges, combo):
            _set_path(doc, path, value)
        doc["name"] = f"{template.get('name', 'scenario')}-{k:03d}"
        try:
            scenario.load_scenario(doc)
        except scenario.ScenarioError as exc:
            cells.append((k, combo, None, str(exc)))
            continue
        cells.append((k, combo, doc, None))
    jobs = [(doc, str(root / f"cell_{k:03d}")) for k, _, doc, err in cells if err is None]
    if args.threads > 1:
        with ProcessPoolExecutor(max_workers=args.threads) as pool:
            results = list(pool.map(_sweep_cell, jobs))
    else:
        results = [_sweep_cell(j) for j in jobs]
    it = iter(results)
    root.mkdir(parents=True, exist_ok=True)
    lines = [",".join(["cell"] + [p for p, _ in ranges] + ["path", "status", "termination", "T_est", "type"])]
    for k, combo, doc, err in cells:
        values = [json.dumps(v) for v in combo]
        if err is not None:
            row = [f"{k:03d}"] + values + ["", "invalid", "", "", ""]
            log.warning("cell %03d invalid: %s", k, err)
        else:
            code, term, T, kind = next(it)
            status = "ok" if code == EXIT_OK else "step-failure"
            T_text = outputs.FLOAT % T if T is not None else ""
            row = [f"{k:03d}"] + values + [f"cell_{k:03d}", status, term, T_text, kind or ""]
        lines.append(",".join(row))
    (root / "index.csv").write_text("\n".join(lines) + "\n")
    print(f"sweep of {len(cells)} cells written to {root / 'index.csv'}")
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="lagflow", description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", default="lagflow-out", help="root directory for outputs")
    ap.add_argument("--threads", type=int, default=1, help="parallel sweep cells")
    ap.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="integrate a scenario and analyse its singularity")
    p.add_argument("scenario", help="YAML file or builtin name (" + ", ".join(scenario.BUILTINS) + ")")
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("predict", help="print candidate singular times without running")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_predict)
    p = sub.add_parser("verify", help="run the self-check suites")
    p.add_argument("--suite", action="append", choices=list(verify.SUITES), help="run only this suite")
    p.set_defaults(func=cmd_verify)
    p = sub.add_parser("sweep", help="run a scenario over a Cartesian product of parameters")
    p.add_argument("scenario")
    p.add_argument("--param", action="append", default=[], help="dotted.path=v1,v2,... (repeatable)")
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        log.error("--threads must be at least 1")
        return EXIT_INPUT
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
