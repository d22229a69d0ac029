"""Command-line front end.

Every command accepts its options as flags or through ``--config FILE``
(a JSON object keyed by option name; file values win).  The resolved
configuration is echoed to stderr and, when ``--out`` is given, written next
to the output as ``<out>.config.json``.

Exit codes: 0 ok, 2 bad flags, 3 malformed or mismatched input documents,
4 enumeration bound exceeded, 5 invalid parameter values, 1 anything else.
Errors are reported on stderr as a single JSON object.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import casestudy as cs
from .faults import FaultMap, Seed, inject_bernoulli, inject_exact
from .lattice import ArrayLayout, DTMBVariant, LayoutError, RegionSpec, generate_layout, validate_layout
from .reconfig import ALL_PRIMARIES, SCOPES, plan_repair
from .yields import (
    DEFAULT_RUNS,
    EXACT,
    MONTE_CARLO,
    AnalyticModel,
    EnumerationBoundError,
    curve_to_csv,
    effective_yield,
    mc_yield,
    mfault_curve,
    yield_sweep,
)

SEED_ENV = "DTMB_SEED"

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_SCHEMA = 3
EXIT_BOUND = 4
EXIT_VALUE = 5


class UsageError(Exception):
    pass


def parse_grid(text: str, kind=float) -> list:
    """``start:stop:step`` (inclusive) or a comma-separated list."""
    text = str(text).strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"grid must be start:stop:step, got {text!r}")
        start, stop, step = (float(x) for x in parts)
        if step <= 0 or stop < start:
            raise UsageError(f"bad grid {text!r}")
        count = int((stop - start) / step + 1e-9) + 1
        values = [round(start + i * step, 12) for i in range(count)]
    else:
        values = [float(x) for x in text.split(",") if x.strip()]
    if kind is int:
        if any(v != int(v) for v in values):
            raise UsageError(f"grid {text!r} must contain integers")
        return [int(v) for v in values]
    return values


def _default_seed() -> int:
    return int(os.environ.get(SEED_ENV, "0"))


def _read_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise LayoutError(f"{path}: not valid JSON ({exc})") from exc


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _dump(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


def _load_layout(cfg) -> ArrayLayout:
    if cfg.get("layout"):
        return ArrayLayout.from_dict(_read_json(cfg["layout"]))
    if cfg.get("variant"):
        return _generate(cfg)
    raise UsageError("need --layout or --variant with --width/--height")


def _generate(cfg) -> ArrayLayout:
    if cfg.get("width") is None or cfg.get("height") is None:
        raise UsageError("--width and --height are required")
    region = RegionSpec(int(cfg["width"]), int(cfg["height"]), cfg.get("boundary") or "open")
    return generate_layout(DTMBVariant.parse(cfg["variant"]), region)


def _plot(curve, path, xlabel: str) -> None:
    import matplotlib

    matplotlib.use("svg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "dtmb"
    fig, ax = plt.subplots(figsize=(6, 4))
    xs = [x for x, _ in curve]
    ax.plot(xs, [e.value for _, e in curve], marker="o", ms=3)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("yield")
    ax.set_ylim(-0.02, 1.02)
    ax.grid(alpha=0.3)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


# -- commands --------------------------------------------------------------------


def cmd_generate(cfg) -> None:
    _emit(_dump(_generate(cfg).to_dict()), cfg.get("out"))


def cmd_validate(cfg) -> None:
    layout = _load_layout(cfg)
    variant = DTMBVariant.parse(cfg["check_variant"]) if cfg.get("check_variant") else None
    _emit(_dump(validate_layout(layout, variant).to_dict()), cfg.get("out"))


def cmd_inject(cfg) -> None:
    layout = _load_layout(cfg)
    seed = Seed(int(cfg["seed"]), int(cfg.get("trial") or 0))
    if (cfg.get("p") is None) == (cfg.get("m") is None):
        raise UsageError("give exactly one of --p and --m")
    if cfg.get("p") is not None:
        fm = inject_bernoulli(layout, float(cfg["p"]), seed)
    else:
        fm = inject_exact(layout, int(cfg["m"]), seed)
    _emit(_dump(fm.to_dict()), cfg.get("out"))


def cmd_repair(cfg) -> None:
    layout = _load_layout(cfg)
    if not cfg.get("faults"):
        raise UsageError("--faults is required")
    faults = FaultMap.from_dict(_read_json(cfg["faults"]))
    plan = plan_repair(layout, faults, cfg.get("scope") or ALL_PRIMARIES)
    _emit(_dump(plan.to_dict()), cfg.get("out"))


def cmd_yield_sweep(cfg) -> None:
    grid = parse_grid(cfg["grid"])
    if cfg.get("analytic"):
        if cfg.get("n") is None:
            raise UsageError("--analytic needs --n")
        model = AnalyticModel(cfg["analytic"], int(cfg["n"]))
    else:
        model = _load_layout(cfg)
    method = EXACT if cfg.get("method") == "exact" else MONTE_CARLO
    curve = yield_sweep(
        model, grid, int(cfg["runs"]), int(cfg["seed"]), cfg["scope"], int(cfg["jobs"]), method
    )
    _emit(curve_to_csv(curve), cfg.get("out"))
    if cfg.get("plot"):
        _plot(curve, cfg["plot"], "cell survival probability p")


def cmd_mfault_curve(cfg) -> None:
    layout = _load_layout(cfg)
    grid = parse_grid(cfg["grid"], int)
    curve = mfault_curve(layout, grid, int(cfg["runs"]), int(cfg["seed"]), cfg["scope"], int(cfg["jobs"]))
    _emit(curve_to_csv(curve), cfg.get("out"))
    if cfg.get("plot"):
        _plot(curve, cfg["plot"], "number of faulty cells m")


def cmd_effective_yield(cfg) -> None:
    layout = _load_layout(cfg)
    if cfg.get("yield_value") is not None:
        y = float(cfg["yield_value"])
    elif cfg.get("p") is not None:
        y = mc_yield(layout, float(cfg["p"]), int(cfg["runs"]), int(cfg["seed"]), cfg["scope"], int(cfg["jobs"]))
    else:
        raise UsageError("give --yield or --p")
    ey = effective_yield(y, layout)
    doc = {
        "effective_yield": ey.value,
        "effective_yield_from_rr": ey.value_from_rr,
        "yield": ey.yield_input,
        "rr": ey.rr_input,
        "n_primary": layout.n_primary,
        "n_cells": layout.n_cells,
    }
    if not isinstance(y, float):
        doc.update(runs=y.runs, successes=y.successes, std_error=y.std_error)
    _emit(_dump(doc), cfg.get("out"))


def cmd_casestudy(cfg) -> None:
    layout = cs.build_invitro_layout(used_pattern=cfg.get("used_pattern") or "ladder")
    if cfg.get("layout_out"):
        Path(cfg["layout_out"]).write_text(_dump(layout.to_dict()))
    if cfg.get("mfault"):
        grid = parse_grid(cfg["mfault"], int)
        curve = cs.casestudy_mfault_curve(
            grid, int(cfg["runs"]), int(cfg["seed"]), cfg["scope"], int(cfg["jobs"]), layout
        )
        _emit(curve_to_csv(curve), cfg.get("out"))
        if cfg.get("plot"):
            _plot(curve, cfg["plot"], "number of faulty cells m")
        return
    p = float(cfg.get("baseline_p") or 0.99)
    report = validate_layout(layout)
    doc = {
        "n_primary": layout.n_primary,
        "n_spare": layout.n_spare,
        "n_used": len(layout.used),
        "rr": report.to_dict()["rr"],
        "interior_violations": len(report.violations),
        "baseline_survival_prob": p,
        "baseline_yield": cs.casestudy_baseline(p).value,
    }
    _emit(_dump(doc), cfg.get("out"))


# -- argument handling -------------------------------------------------------------


def _common(sp, mc=False, layout=True):
    sp.add_argument("--config", help="JSON file of options; its values override flags")
    sp.add_argument("--out", help="output file (default: stdout)")
    if layout:
        sp.add_argument("--layout", help="layout JSON file")
        sp.add_argument("--variant", help='generate instead, e.g. "DTMB(2,6)"')
        sp.add_argument("--width", type=int)
        sp.add_argument("--height", type=int)
        sp.add_argument("--boundary", choices=("open", "periodic"), default="open")
    if mc:
        sp.add_argument("--runs", type=int, default=DEFAULT_RUNS)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--scope", choices=SCOPES, default=ALL_PRIMARIES)
        sp.add_argument("--jobs", type=int, default=1)
        sp.add_argument("--plot", help="also write an SVG plot to this path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dtmb", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("generate", help="generate a DTMB(s,p) layout")
    _common(sp)
    sp.set_defaults(func=cmd_generate)

    sp = sub.add_parser("validate", help="check spare/primary neighbour counts")
    _common(sp)
    sp.add_argument("--check-variant", dest="check_variant", help="variant to check against")
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("inject", help="draw one fault map")
    _common(sp)
    sp.add_argument("--p", type=float, help="cell survival probability")
    sp.add_argument("--m", type=int, help="exact number of faulty cells")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--trial", type=int, default=0)
    sp.set_defaults(func=cmd_inject)

    sp = sub.add_parser("repair", help="plan spare assignment for a fault map")
    _common(sp)
    sp.add_argument("--faults", help="fault map JSON file")
    sp.add_argument("--scope", choices=SCOPES, default=ALL_PRIMARIES)
    sp.set_defaults(func=cmd_repair)

    sp = sub.add_parser("yield-sweep", help="yield versus survival probability")
    _common(sp, mc=True)
    sp.add_argument("--grid", required=False, default="0.9:0.99:0.01")
    sp.add_argument("--analytic", choices=("dtmb16", "none"))
    sp.add_argument("--n", type=int, help="primary cells for --analytic")
    sp.add_argument("--method", choices=("mc", "exact"), default="mc")
    sp.set_defaults(func=cmd_yield_sweep)

    sp = sub.add_parser("mfault-curve", help="yield versus number of faulty cells")
    _common(sp, mc=True)
    sp.add_argument("--grid", default="0:50:5")
    sp.set_defaults(func=cmd_mfault_curve)

    sp = sub.add_parser("effective-yield", help="yield discounted by spare area")
    _common(sp, mc=True)
    sp.add_argument("--yield", dest="yield_value", type=float, help="known yield value")
    sp.add_argument("--p", type=float, help="estimate the yield by Monte Carlo at this p")
    sp.set_defaults(func=cmd_effective_yield)

    sp = sub.add_parser("casestudy", help="reconstructed in-vitro diagnostics chip")
    _common(sp, mc=True, layout=False)
    sp.add_argument("--mfault", help="m grid, e.g. 0:50:5; writes the m-fault curve CSV")
    sp.add_argument("--baseline-p", dest="baseline_p", type=float, default=0.99)
    sp.add_argument("--used-pattern", dest="used_pattern", choices=("ladder", "compact"), default="ladder")
    sp.add_argument("--layout-out", dest="layout_out", help="also write the layout JSON here")
    sp.set_defaults(func=cmd_casestudy)
    return parser


def resolve_config(args: argparse.Namespace) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    if args.config:
        doc = _read_json(args.config)
        if not isinstance(doc, dict):
            raise LayoutError("config file must hold a JSON object")
        for key, value in doc.items():
            key = key.replace("-", "_")
            if key not in cfg or key in ("command", "config"):
                raise UsageError(f"unknown config key {key!r} for {args.command}")
            cfg[key] = value
    if "seed" in cfg and cfg["seed"] is None:
        cfg["seed"] = _default_seed()
    if "jobs" in cfg and int(cfg["jobs"]) < 1:
        raise UsageError("--jobs must be at least 1")
    return cfg


def _fail(code: int, kind: str, message: str) -> int:
    sys.stderr.write(json.dumps({"error": kind, "exit_code": code, "message": message}) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        # jobs only affects speed, never output
        echo = {k: v for k, v in cfg.items() if k != "jobs"}
        sys.stderr.write(json.dumps({"config": echo}, sort_keys=True) + "\n")
        if cfg.get("out"):
            Path(f"{cfg['out']}.config.json").write_text(json.dumps(echo, indent=2, sort_keys=True) + "\n")
        args.func(cfg)
    except UsageError as exc:
        return _fail(EXIT_USAGE, "usage", str(exc))
    except EnumerationBoundError as exc:
        return _fail(EXIT_BOUND, "enumeration-bound", str(exc))
    except (LayoutError, FileNotFoundError) as exc:
        return _fail(EXIT_SCHEMA, "schema", str(exc))
    except (ValueError, KeyError, ZeroDivisionError) as exc:
        return _fail(EXIT_VALUE, "value", str(exc))
    except Exception as exc:  # pragma: no cover
        return _fail(EXIT_ERROR, type(exc).__name__, str(exc))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
