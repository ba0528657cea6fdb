"""Command-line front end.

Subcommands::

    fibernet cantilever --gf 0.05 --steps 200 --scheme staggered
    fibernet tensile --density 1000 --gf 0.1 --scheme hybrid --htol 0.01 --steps 500 --seed 42
    fibernet notched --density 200 --steps 100 --delta 9
    fibernet network path/to/network.json --steps 100
    fibernet generate --density 200 --seed 1 -o net.json
    fibernet compare notched --schemes staggered,hybrid:0.1,hybrid:0.01,monolithic --step-counts 20,100

Exit codes: 0 success, 1 solver failure or module error (an ``error.json``
is written), 2 usage error. Outputs go to ``--output``, by default
``$FIBERNET_OUTPUT_ROOT/<scenario>`` (``./fibernet-out/<scenario>`` when the
variable is unset).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import report as report_io
from .element import SchemeConfig
from .errors import FibernetError
from .netgen import generate
from .scenarios import SCENARIOS, ScenarioConfig, build_models
from .solver import SolveConfig, run

OUTPUT_ENV = "FIBERNET_OUTPUT_ROOT"
EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2

# argparse dest -> ScenarioConfig field
_FLAG_FIELDS = {
    "scheme": "scheme", "htol": "h_tol", "steps": "n_steps", "delta": "delta_0", "seed": "seed",
    "density": "density", "gf": "gf", "width": "width", "height": "height",
    "elements": "elements", "notch_angle": "notch_angle", "notch_depth": "notch_depth",
    "network": "network", "max_iters": "max_iters", "tol_rel": "tol_rel", "tol_abs": "tol_abs",
    "bisect": "bisect", "checkpoints": "checkpoints", "output": "output", "plot": "plot",
    "overwrite": "overwrite",
}


class UsageError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _scheme(text: str) -> str:
    try:
        SchemeConfig.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc
    return text


def _scheme_list(text: str) -> list[str]:
    items = [t.strip() for t in text.split(",") if t.strip()]
    if not items:
        raise argparse.ArgumentTypeError("scheme list is empty")
    return [_scheme(t) for t in items]


def _add_run_options(p: argparse.ArgumentParser, with_scheme: bool = True) -> None:
    if with_scheme:
        p.add_argument("--scheme", type=_scheme, help="staggered | monolithic | hybrid[:h_tol]")
        p.add_argument("--htol", type=float, help="hybrid stiffness floor h_tol (default 0.01)")
    p.add_argument("--steps", type=int, help="number of displacement increments")
    p.add_argument("--delta", type=float, help="total grip displacement [mm]")
    p.add_argument("--gf", type=float, help="fracture energy G_f [N·mm]")
    p.add_argument("--seed", type=int, help="network generator seed")
    p.add_argument("--density", type=float, help="sheet density [kg/m³]")
    p.add_argument("--width", type=float, help="specimen width W [mm]")
    p.add_argument("--height", type=float, help="specimen height [mm]")
    p.add_argument("--elements", type=_int_list, help="cantilever meshes, e.g. 1,10")
    p.add_argument("--notch-angle", type=float, help="notch opening angle [deg]")
    p.add_argument("--notch-depth", type=float, help="notch depth [mm] (default height/2)")
    p.add_argument("--max-iters", type=int, help="Newton iteration cap per step")
    p.add_argument("--tol-rel", type=float, help="relative residual tolerance")
    p.add_argument("--tol-abs", type=float, help="absolute residual floor [N]")
    p.add_argument("--bisect", action="store_true", default=None, help="halve failing steps")
    p.add_argument("--checkpoints", type=_int_list, help="steps at which to dump hinge states")
    p.add_argument("--config", type=Path, help="JSON file with the same keys as ScenarioConfig")
    p.add_argument("-o", "--output", help="output directory")
    p.add_argument("--plot", action="store_true", default=None, help="write SVG figures")
    p.add_argument("--overwrite", action="store_true", default=None,
                   help="replace existing output files")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fibernet",
                                     description="Fiber network failure with softening beam hinges.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("cantilever", "tensile", "notched"):
        _add_run_options(sub.add_parser(name, help=f"run the {name} scenario"))
    p = sub.add_parser("network", help="run a network stored in a JSON file")
    p.add_argument("network", help="network file written by 'fibernet generate'")
    _add_run_options(p)

    p = sub.add_parser("compare", help="cumulative iterations per scheme and step count")
    p.add_argument("scenario", choices=SCENARIOS)
    p.add_argument("--schemes", type=_scheme_list, default=None,
                   help="comma list, e.g. staggered,hybrid:0.1,hybrid:0.01,monolithic")
    p.add_argument("--step-counts", type=_int_list, default=None, help="comma list, e.g. 20,100,200,500")
    p.add_argument("--network", help="network file for the 'network' scenario")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    _add_run_options(p, with_scheme=False)

    p = sub.add_parser("generate", help="generate a random network and save it as JSON")
    p.add_argument("--density", type=float, default=1000.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gf", type=float, default=0.1)
    p.add_argument("--width", type=float, default=18.0)
    p.add_argument("--height", type=float, default=6.0)
    p.add_argument("--notch", action="store_true", help="cut the default V-notch")
    p.add_argument("--notch-angle", type=float, default=20.0)
    p.add_argument("--notch-depth", type=float, default=None)
    p.add_argument("-o", "--output", required=True, help="output JSON path")
    p.add_argument("--overwrite", action="store_true")
    return parser


def config_from_args(args: argparse.Namespace, scenario: str) -> ScenarioConfig:
    """Defaults, then the --config file, then explicit flags."""
    data: dict = {"scenario": scenario}
    if scenario in ("tensile", "notched", "network"):
        data["n_steps"] = 100
    if scenario == "notched":
        data["density"] = 200.0
    if getattr(args, "config", None):
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a JSON object")
        data.update(loaded)
    for dest, name in _FLAG_FIELDS.items():
        val = getattr(args, dest, None)
        if val is not None:
            data[name] = val
    if "output" not in data or data["output"] is None:
        root = os.environ.get(OUTPUT_ENV, "fibernet-out")
        data["output"] = str(Path(root) / scenario)
    if data.get("network") is not None and not Path(data["network"]).is_file():
        raise UsageError(f"network file not found: {data['network']}")
    try:
        return ScenarioConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def _write(path: Path, text: str) -> None:
    path.write_text(text)


def _config_echo(cfg: ScenarioConfig) -> dict:
    # --overwrite must not change the bytes of a rerun
    data = cfg.to_dict()
    data.pop("overwrite")
    return data


def _output_files(cfg: ScenarioConfig, names) -> list[Path]:
    out = Path(cfg.output)
    files = []
    for name in names:
        files += [out / f"{name}.csv", out / f"{name}.summary.json"]
    return files


def _load_models(cfg: ScenarioConfig) -> dict:
    """build_models, with an unreadable network file reported as a usage error."""
    if cfg.scenario != "network":
        return build_models(cfg)
    try:
        return build_models(cfg)
    except (OSError, KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, FibernetError):
            raise
        raise UsageError(f"cannot read network {cfg.network}: {exc}") from exc


def run_scenario(cfg: ScenarioConfig, log=print) -> int:
    """Build, solve and write outputs; returns the process exit status."""
    out = Path(cfg.output)
    # a bad input file must fail before anything is written
    models = _load_models(cfg) if cfg.scenario == "network" else None
    out.mkdir(parents=True, exist_ok=True)
    try:
        if models is None:
            models = build_models(cfg)
    except FibernetError as exc:
        _write(out / "error.json", json.dumps(exc.to_dict(), sort_keys=True, indent=2) + "\n")
        log(f"error: {exc}")
        return EXIT_FAILED
    existing = [p for p in _output_files(cfg, models) if p.exists()]
    if existing and not cfg.overwrite:
        raise UsageError(f"{existing[0]} exists; pass --overwrite to replace it")
    status = EXIT_OK
    solve_cfg = SolveConfig(scheme=cfg.scheme_config(), n_steps=cfg.n_steps,
                            delta_0=cfg.resolved_delta(), max_iters=cfg.max_iters,
                            tol_rel=cfg.tol_rel, tol_abs=cfg.tol_abs, bisect=cfg.bisect,
                            checkpoints=tuple(cfg.checkpoints))
    curves = {}
    for name, model in models.items():
        if cfg.scenario in ("tensile", "notched"):
            model.save(out / f"{name}.network.json")
        try:
            rep = run(model, solve_cfg)
        except FibernetError as exc:
            _write(out / "error.json", json.dumps(exc.to_dict(), sort_keys=True, indent=2) + "\n")
            log(f"{name}: error: {exc}")
            return EXIT_FAILED
        report_io.write_curve(rep, out / f"{name}.csv")
        extra = {"model": {"name": name, "n_nodes": model.n_nodes, "n_elements": model.n_elements,
                           "digest": model.digest(), "info": model.info}}
        _write(out / f"{name}.summary.json", report_io.summary_json(rep, _config_echo(cfg) | {
            "resolved_delta_0": solve_cfg.delta_0, "resolved_gf": cfg.resolved_gf()}, extra))
        for dump in rep.dumps:
            report_io.write_states(out / f"{name}.states.step{dump.step:05d}.csv", dump.step,
                                   dump.xi, dump.alpha, dump.ruptured)
        curves[name] = rep.curve()
        if cfg.plot:
            from . import plotting

            plotting.plot_curves({name: curves[name]}, out / f"{name}.curve.svg", title=rep.scheme)
            if rep.final_states is not None and model.n_elements > 1:
                plotting.plot_network(model, rep.final_states.xi, out / f"{name}.xi.svg")
        log(f"{name}: {rep.termination} after {len(rep.records)}/{cfg.n_steps} steps, "
            f"{rep.cumulative_iterations} iterations, peak {rep.summary()['peak_reaction']:.6g} N")
        if not rep.converged:
            log(f"{name}: step {rep.failed_step} failed: {rep.failure_reason}")
            status = EXIT_FAILED
    if cfg.plot and len(curves) > 1:
        from . import plotting

        plotting.plot_curves(curves, out / f"{cfg.scenario}.curves.svg")
    return status


def _compare_cell(args):
    cfg_dict, model_json, scheme, steps = args
    from .network import NetworkModel

    cfg = ScenarioConfig.from_dict(cfg_dict)
    model = NetworkModel.from_dict(json.loads(model_json))
    solve_cfg = SolveConfig(scheme=SchemeConfig.parse(scheme, cfg.h_tol), n_steps=steps,
                            delta_0=cfg.resolved_delta(), max_iters=cfg.max_iters,
                            tol_rel=cfg.tol_rel, tol_abs=cfg.tol_abs, bisect=cfg.bisect)
    t0 = time.perf_counter()
    try:
        rep = run(model, solve_cfg)
    except FibernetError as exc:
        return scheme, steps, None, time.perf_counter() - t0, str(exc), None
    cell = rep.cumulative_iterations if rep.converged else None
    return scheme, steps, cell, time.perf_counter() - t0, rep.failure_reason, report_io.curve_csv(rep)


def compare_schemes(cfg: ScenarioConfig, schemes: list[str], step_counts: list[int],
                    jobs: int = 1, log=print) -> dict:
    """Cumulative iterations ('f' on failure) for every scheme x step count.

    Writes comparison.csv (deterministic), comparison_times.csv (wall clock)
    and each cell's curve under cells/<scheme>_<steps>/.
    """
    if not schemes:
        raise UsageError("empty scheme list")
    if not step_counts:
        raise UsageError("empty step-count list")
    out = Path(cfg.output)
    table_path = out / "comparison.csv"
    if table_path.exists() and not cfg.overwrite:
        raise UsageError(f"{table_path} exists; pass --overwrite to replace it")
    out.mkdir(parents=True, exist_ok=True)
    models = _load_models(cfg)
    model = next(iter(models.values()))
    model_json = model.dumps()
    tasks = [(cfg.to_dict(), model_json, s, n) for s in schemes for n in step_counts]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_compare_cell, tasks))
    else:
        results = [_compare_cell(t) for t in tasks]

    cells, times, reasons = {}, {}, {}
    for scheme, steps, cell, wall, reason, curve in results:
        cells[(scheme, steps)] = cell
        times[(scheme, steps)] = wall
        reasons[(scheme, steps)] = reason
        cell_dir = out / "cells" / f"{scheme.replace(':', '-')}_{steps}"
        cell_dir.mkdir(parents=True, exist_ok=True)
        if curve is not None:
            (cell_dir / "curve.csv").write_text(curve)
        log(f"{scheme:>14s} {steps:>6d} steps: {cell if cell is not None else 'f'} ({wall:.1f} s)")

    def table(values, fmt):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["scheme"] + [str(n) for n in step_counts])
        for s in schemes:
            w.writerow([s] + [fmt(values[(s, n)]) for n in step_counts])
        return buf.getvalue()

    table_path.write_text(table(cells, lambda v: "f" if v is None else str(v)))
    (out / "comparison_times.csv").write_text(table(times, lambda v: f"{v:.3f}"))
    return {"cells": cells, "times": times, "reasons": reasons}


def _generate(args) -> int:
    from .beam import reference_fiber
    from .netgen import NetworkSpec, NotchSpec

    path = Path(args.output)
    if path.exists() and not args.overwrite:
        raise UsageError(f"{path} exists; pass --overwrite to replace it")
    notch = NotchSpec(args.notch_angle, args.notch_depth) if args.notch else None
    try:
        spec = NetworkSpec(width=args.width, height=args.height, density=args.density,
                           fiber=reference_fiber(args.gf), seed=args.seed, notch=notch)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    model = generate(spec)
    path.parent.mkdir(parents=True, exist_ok=True)
    model.save(path)
    print(f"{path}: {model.n_nodes} nodes, {model.n_elements} elements")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "generate":
            return _generate(args)
        if args.command == "compare":
            cfg = config_from_args(args, args.scenario)
            schemes = args.schemes or ["staggered", "hybrid:0.1", "hybrid:0.01", "monolithic"]
            counts = args.step_counts or [20, 100, 200, 500]
            compare_schemes(cfg, schemes, counts, jobs=max(1, args.jobs))
            return EXIT_OK
        cfg = config_from_args(args, args.command)
        return run_scenario(cfg)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"fibernet: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FibernetError as exc:
        out = getattr(args, "output", None)
        print(json.dumps(exc.to_dict(), sort_keys=True), file=sys.stderr)
        if out and Path(out).is_dir():
            (Path(out) / "error.json").write_text(json.dumps(exc.to_dict(), sort_keys=True, indent=2) + "\n")
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
