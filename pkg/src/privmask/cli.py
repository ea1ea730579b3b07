"""Command-line front end.

Every command reads a JSON model (``--model``) and writes
``<prefix>.report.json`` plus command-specific CSV files. Exit status is 0 on
success, 2 on bad input or an infeasible constraint, 1 on internal errors.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import finite_oracle, mask_design, mask_synth, spectrum, validation
from .errors import PrivmaskError
from .system_model import load_model


class UsageError(Exception):
    pass


def _atomic_write(path: Path, writer) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=path.name + ".", suffix=".tmp", dir=path.parent)
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _clean(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_clean(v) for v in obj]
    return obj


def _write_json(path: Path, obj) -> None:
    text = json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n"
    _atomic_write(path, lambda p: Path(p).write_text(text))


def _nonneg(name):
    def parse(s):
        v = float(s)
        if not math.isfinite(v) or v < 0:
            raise UsageError(f"{name} must be nonnegative")
        return v
    return parse


def _positive(name):
    def parse(s):
        v = float(s)
        if not math.isfinite(v) or v <= 0:
            raise UsageError(f"{name} must be positive")
        return v
    return parse


def _grid(s):
    n = int(s)
    if n < 64 or n & (n - 1):
        raise UsageError("grid size must be a power of two >= 64")
    return n


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="privmask", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", required=True, help="model file (JSON with A, C, W, sigma_v_sq)")
    common.add_argument("--grid", default="4096", help="frequency grid size, power of two >= 64")
    common.add_argument("--out-prefix", default="privmask", help="prefix for output files")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("design", parents=[common], help="minimum leakage under a distortion budget")
    s.add_argument("--distortion", required=True)
    s = sub.add_parser("dual", parents=[common], help="minimum distortion under a leakage cap")
    s.add_argument("--leakage", required=True)
    s = sub.add_parser("power", parents=[common], help="minimum leakage under a masked-output power budget")
    s.add_argument("--output-power", required=True)
    s = sub.add_parser("min-power", parents=[common], help="minimum masked-output power under a leakage cap")
    s.add_argument("--leakage", required=True)

    s = sub.add_parser("oracle", parents=[common], help="finite-horizon eigen-channel oracle")
    s.add_argument("--horizon", required=True, type=int)
    s.add_argument("--distortion", required=True)
    s.add_argument("--horizons", default=None, help="comma-separated horizons for a convergence table")

    s = sub.add_parser("synth", parents=[common], help="sample a designed mask and re-estimate its spectrum")
    s.add_argument("--distortion", required=True)
    s.add_argument("--length", required=True, type=int)
    s.add_argument("--seed", required=True, type=int)
    s.add_argument("--segment", default=256, type=int)

    s = sub.add_parser("sweep", parents=[common], help="tradeoff curve over a range of multipliers")
    s.add_argument("--eta-min", required=True)
    s.add_argument("--eta-max", required=True)
    s.add_argument("--points", required=True, type=int)
    s.add_argument("--log", action="store_true", help="geometric spacing (eta-min must be > 0)")

    s = sub.add_parser("validate", parents=[common], help="run the consistency checks")
    s.add_argument("--distortion", default="0.5")
    s.add_argument("--horizon", default=256, type=int)
    return p


def _design_outputs(prefix: Path, design, extra=None) -> dict:
    report = design.to_report()
    if extra:
        report.update(extra)
    _write_json(prefix.with_name(prefix.name + ".report.json"), report)
    _atomic_write(prefix.with_name(prefix.name + ".spectrum.csv"), design.write_mask_csv)
    return report


def _run(args) -> dict:
    grid = _grid(args.grid)
    model = load_model(args.model)
    prefix = Path(args.out_prefix)
    cmd = args.command

    if cmd == "design":
        d = mask_design.design_distortion_constrained(model, _nonneg("distortion")(args.distortion), grid)
        return _design_outputs(prefix, d)
    if cmd == "dual":
        d = mask_design.design_leakage_constrained(model, _positive("leakage")(args.leakage), grid)
        return _design_outputs(prefix, d)
    if cmd == "power":
        d = mask_design.design_output_power_constrained(model, _nonneg("output power")(args.output_power), grid)
        return _design_outputs(prefix, d)
    if cmd == "min-power":
        d, y_min = mask_design.design_min_output_power(model, _positive("leakage")(args.leakage), grid)
        return _design_outputs(prefix, d, {"min_output_power": y_min})

    if cmd == "oracle":
        D = _nonneg("distortion")(args.distortion)
        if args.horizon < 0:
            raise UsageError("horizon must be nonnegative")
        res = finite_oracle.finite_leakage(model, args.horizon, D)
        asym = mask_design.design_distortion_constrained(model, D, grid).leakage_rate_bits
        report = {
            "horizon_k": res.horizon_k,
            "distortion": D,
            "eta": res.eta,
            "leakage_per_step_bits": res.leakage_per_step_bits,
            "asymptotic_bits": asym,
            "gap_bits": abs(res.leakage_per_step_bits - asym),
            "grid_size": grid,
        }
        _write_json(prefix.with_name(prefix.name + ".report.json"), report)
        if args.horizons:
            hs = [int(h) for h in args.horizons.split(",")]
            rows = finite_oracle.convergence_report(model, D, hs, grid)
        else:
            rows = [finite_oracle.ConvergenceRow(res.horizon_k, res.leakage_per_step_bits, asym, report["gap_bits"])]
        _atomic_write(
            prefix.with_name(prefix.name + ".convergence.csv"),
            lambda p: finite_oracle.write_convergence_csv(p, rows),
        )
        return report

    if cmd == "synth":
        D = _nonneg("distortion")(args.distortion)
        if args.seed < 0 or args.seed >= 2**64:
            raise UsageError("seed must be a 64-bit unsigned integer")
        d = mask_design.design_distortion_constrained(model, D, grid)
        path = mask_synth.synthesize_mask(d.mask_spectrum, args.length, args.seed)
        est = mask_synth.estimate_periodogram(path, args.segment)
        extra = {
            "seed": args.seed,
            "length": args.length,
            "empirical_distortion": mask_synth.empirical_distortion(path),
            "periodogram_rel_l1_error": mask_synth.relative_l1_error(est, d.mask_spectrum),
        }
        report = _design_outputs(prefix, d, extra)
        _atomic_write(prefix.with_name(prefix.name + ".path.csv"), lambda p: mask_synth.write_path_csv(p, path))
        _atomic_write(prefix.with_name(prefix.name + ".estimate.csv"), lambda p: spectrum.write_spectrum_csv(p, est))
        return report

    if cmd == "sweep":
        lo, hi = _nonneg("eta-min")(args.eta_min), _nonneg("eta-max")(args.eta_max)
        if hi < lo or args.points < 1:
            raise UsageError("need eta-min <= eta-max and points >= 1")
        if args.log:
            if lo <= 0:
                raise UsageError("--log needs eta-min > 0")
            etas = np.geomspace(lo, hi, args.points)
        else:
            etas = np.linspace(lo, hi, args.points)
        pts = mask_design.tradeoff_curve(model, etas, grid)
        _atomic_write(prefix.with_name(prefix.name + ".tradeoff.csv"), lambda p: mask_design.write_tradeoff_csv(p, pts))
        report = {"points": len(pts), "eta_min": lo, "eta_max": hi, "grid_size": grid,
                  "curve": [[p.eta, p.distortion, p.leakage_bits] for p in pts]}
        _write_json(prefix.with_name(prefix.name + ".report.json"), report)
        return report

    if cmd == "validate":
        D = _nonneg("distortion")(args.distortion)
        rep = validation.run_all(model, D, grid, args.horizon)
        _write_json(prefix.with_name(prefix.name + ".report.json"), rep.to_list())
        return {"passed": rep.passed, "checks": rep.to_list()}

    raise UsageError(f"unknown command {cmd}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        result = _run(args)
    except (UsageError, PrivmaskError, ValueError) as exc:
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"{parser.prog} {args.command}: internal error: {exc!r}", file=sys.stderr)
        return 1
    json.dump(_clean(result), sys.stdout, indent=2, allow_nan=False)
    sys.stdout.write("\n")
    if args.command == "validate" and not result["passed"]:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
