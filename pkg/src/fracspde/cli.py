"""Command-line entry point.

Every subcommand that writes a CSV also writes ``<out>.manifest.json``
holding the resolved configuration, the derived report, the config hash,
the seed and the argument vector; ``fracspde replay <manifest>`` runs the
same command again.  CSV headers carry the hash but no timestamp, so
repeated runs are byte-identical.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .config import ConfigError, parse_config
from .lab import gamma_convergence_study, holder_study, strong_error_study
from .mittag_leffler import MLConvergenceError, ml_eval
from .model import ModelValidationError, TimeGrid, validate
from .noise import CovarianceFactorizationError, build_noise_model, sample_paths
from .operators import DegenerateFitError
from .solver import Control, NonFiniteStateError, mle_run, skeleton_run

__all__ = ["main", "build_parser", "read_control_csv"]

THREADS_ENV = "FSPDE_THREADS"

_CONFIG_HELP = """\
configuration file: flat 'key = value' lines, '#' starts a comment.
required: alpha, beta, gamma, K, T
defaults: L = 1, q_kind = white (or power_law with q_exponent), q_exponent = 0,
  f_kind = zero (linear_diagonal, sin_scaled, tanh_scaled, affine), f_scale = 1,
  f_offset = 0, x0_kind = smooth_decay (zero, mode), x0_p = 2 beta + 0.6,
  x0_mode = 1, x0_amplitude = 1, r_target = largest admissible value - 0.1,
  epsilon0 = 1e-3, N_x = 4 K
study keys (overridden by flags): grids, ref, paths, seed, lags
environment: FSPDE_THREADS sets the default of --threads
"""


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with status 1 instead of argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


class _VerdictFailure(Exception):
    pass


def _int_list(text):
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _default_threads():
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return 1
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(n, 1)


def build_parser():
    p = _Parser(prog="fracspde", description="Mittag-Leffler Euler integrator for "
                "stochastic space-time fractional diffusion.",
                epilog=_CONFIG_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", metavar="subcommand", parser_class=_Parser)
    sub.required = True

    def add(name, help_text, config=True):
        sp = sub.add_parser(name, help=help_text, description=help_text, epilog=_CONFIG_HELP,
                            formatter_class=argparse.RawDescriptionHelpFormatter)
        if config:
            sp.add_argument("--config", required=True, help="model configuration file")
        return sp

    def add_out(sp, required=True):
        sp.add_argument("--out", required=required, help="output CSV path ('-' for stdout)")
        sp.add_argument("--manifest", help="manifest path (default: <out>.manifest.json)")

    def add_threads(sp):
        sp.add_argument("--threads", type=int, default=_default_threads(),
                        help=f"worker threads (default from {THREADS_ENV}, else 1)")

    sp = add("ml-eval", "evaluate E_{a,b}(z) and its error estimate", config=False)
    sp.add_argument("a", type=float)
    sp.add_argument("b", type=float)
    sp.add_argument("z", type=float)

    add("validate", "print kappa, the admissible r range and predicted orders")

    sp = add("sample-noise", "sample the stochastic convolution on a uniform grid")
    sp.add_argument("--m", type=int, required=True, help="number of time steps")
    sp.add_argument("--paths", type=int, default=1)
    sp.add_argument("--seed", type=int, required=True)
    add_out(sp)
    add_threads(sp)

    sp = add("run-mle", "run the scheme on one noise path")
    sp.add_argument("--m", type=int, required=True)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--path", type=int, default=0, help="path index within the seed stream")
    add_out(sp)
    add_threads(sp)

    sp = add("skeleton", "run the skeleton equation for a piecewise-constant control")
    sp.add_argument("--m", type=int, required=True)
    sp.add_argument("--control", help="control CSV (interval_index, mode, value); "
                    "default zero control")
    add_out(sp)

    sp = add("converge", "strong error study against a reference grid")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--paths", type=int)
    sp.add_argument("--grids", type=_int_list)
    sp.add_argument("--ref", type=int)
    sp.add_argument("--assert", dest="assert_", action="store_true",
                    help="exit 2 when the verdict is 'fail'")
    add_out(sp)
    add_threads(sp)

    sp = add("holder", "mean squared increments against the time lag")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--paths", type=int)
    sp.add_argument("--ref", type=int)
    sp.add_argument("--lags", type=_int_list, help="lags in reference steps")
    sp.add_argument("--base", choices=("end", "mid"), default="end")
    sp.add_argument("--assert", dest="assert_", action="store_true")
    add_out(sp)
    add_threads(sp)

    sp = add("gamma-converge", "skeleton convergence for a fixed control")
    sp.add_argument("--grids", type=_int_list)
    sp.add_argument("--ref", type=int)
    sp.add_argument("--control", help="control CSV on a grid refined by every --grids "
                    "entry; default a unit sinusoid in mode 1 on the coarsest grid")
    sp.add_argument("--assert", dest="assert_", action="store_true")
    add_out(sp)

    sp = add("replay", "re-run the command recorded in a manifest", config=False)
    sp.add_argument("manifest")
    sp.add_argument("--out", help="write to this path instead of the recorded one")
    return p


# ---------------------------------------------------------------------------
# I/O helpers

def _csv_writer(buf):
    return csv.writer(buf, lineterminator="\n")


def _header(cfg, seed):
    lines = [f"fracspde {__version__}", f"config_hash = {cfg.content_hash()}"]
    if seed is not None:
        lines.append(f"seed = {seed}")
    return lines


def _with_header(header, body):
    return "".join(f"# {line}\n" for line in header) + body


def _write_out(path, text):
    if path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _write_manifest(args, argv, cfg, seed, out_path):
    report = validate(cfg.spec)
    manifest = {
        "tool_version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "command": args.command,
        "argv": list(argv),
        "seed": seed,
        "config_hash": cfg.content_hash(),
        "config": cfg.values,
        "config_text": cfg.canonical_text(),
        "report": report.lines(),
    }
    path = args.manifest
    if path is None:
        if out_path == "-":
            sys.stderr.write(json.dumps(manifest, indent=2) + "\n")
            return
        path = out_path + ".manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def _trajectory_csv(states):
    buf = io.StringIO()
    w = _csv_writer(buf)
    w.writerow(["time_index", "mode", "value"])
    for m, row in enumerate(states):
        for k, v in enumerate(row, start=1):
            w.writerow([m, k, repr(float(v))])
    return buf.getvalue()


def read_control_csv(path, grid: TimeGrid, K) -> Control:
    """Read a control CSV; unspecified entries are zero, ``mode`` is 1-based."""
    vals = np.zeros((grid.M, K))
    with open(path, newline="", encoding="utf-8") as fh:
        rows = csv.reader(line for line in fh if not line.startswith("#"))
        head = next(rows, None)
        if head is None or [h.strip() for h in head] != ["interval_index", "mode", "value"]:
            raise ValueError("control CSV needs the header: interval_index, mode, value")
        for n, row in enumerate(rows, start=2):
            if not row:
                continue
            try:
                j, k, v = int(row[0]), int(row[1]), float(row[2])
            except (ValueError, IndexError):
                raise ValueError(f"control CSV row {n}: malformed entry {row!r}") from None
            if not (0 <= j < grid.M and 1 <= k <= K):
                raise ValueError(f"control CSV row {n}: index out of range")
            vals[j, k - 1] = v
    return Control(grid, vals)


def _require(value, name):
    if value is None:
        raise ValueError(f"{name} must be given on the command line or in the config")
    return value


# ---------------------------------------------------------------------------
# subcommands

def _cmd_ml_eval(args, argv):
    res = ml_eval(args.a, args.b, args.z)
    print(f"{float(res.value)!r} {float(res.error):.3e} {res.method}")
    return 0


def _cmd_validate(args, argv):
    cfg = parse_config(args.config)
    for line in validate(cfg.spec).lines():
        print(line)
    return 0


def _cmd_sample_noise(args, argv):
    cfg = parse_config(args.config)
    grid = TimeGrid(cfg.spec.horizon, args.m)
    model = build_noise_model(cfg.spec, grid, workers=args.threads)
    ens = sample_paths(model, args.paths, args.seed, workers=args.threads)
    buf = io.StringIO()
    w = _csv_writer(buf)
    w.writerow(["path", "mode", "time_index", "value"])
    for p, path in enumerate(ens.paths):
        for k in range(cfg.spec.truncation):
            for m in range(grid.M):
                w.writerow([int(path), k + 1, m + 1, repr(float(ens.samples[p, k, m]))])
    _write_out(args.out, _with_header(_header(cfg, args.seed), buf.getvalue()))
    _write_manifest(args, argv, cfg, args.seed, args.out)
    return 0


def _cmd_run_mle(args, argv):
    cfg = parse_config(args.config)
    grid = TimeGrid(cfg.spec.horizon, args.m)
    model = build_noise_model(cfg.spec, grid, workers=args.threads)
    ens = sample_paths(model, 1, args.seed, first_path=args.path)
    traj = mle_run(cfg.spec, grid, ens.samples[0])
    _write_out(args.out, _with_header(_header(cfg, args.seed), _trajectory_csv(traj.states)))
    _write_manifest(args, argv, cfg, args.seed, args.out)
    return 0


def _cmd_skeleton(args, argv):
    cfg = parse_config(args.config)
    grid = TimeGrid(cfg.spec.horizon, args.m)
    K = cfg.spec.truncation
    v = read_control_csv(args.control, grid, K) if args.control else Control.zero(grid, K)
    traj = skeleton_run(cfg.spec, grid, v)
    _write_out(args.out, _with_header(_header(cfg, None), _trajectory_csv(traj.states)))
    _write_manifest(args, argv, cfg, None, args.out)
    return 0


def _finish_study(args, argv, cfg, seed, table):
    _write_out(args.out, table.csv_text(header=_header(cfg, seed)))
    _write_manifest(args, argv, cfg, seed, args.out)
    for note in table.notes:
        print(f"note: {note}", file=sys.stderr)
    if args.assert_ and table.verdict != "pass":
        raise _VerdictFailure(f"verdict {table.verdict}: fitted {table.fitted!r}, "
                              f"predicted {table.predicted!r}")
    return 0


def _cmd_converge(args, argv):
    cfg = parse_config(args.config)
    st = cfg.study
    seed = _require(args.seed if args.seed is not None else st.seed, "--seed")
    table = strong_error_study(
        cfg.spec, _require(args.grids or st.grids, "--grids"), _require(args.ref or st.ref, "--ref"),
        _require(args.paths or st.paths, "--paths"), seed, workers=args.threads)
    return _finish_study(args, argv, cfg, seed, table)


def _cmd_holder(args, argv):
    cfg = parse_config(args.config)
    st = cfg.study
    seed = _require(args.seed if args.seed is not None else st.seed, "--seed")
    table = holder_study(
        cfg.spec, _require(args.ref or st.ref, "--ref"), _require(args.paths or st.paths, "--paths"),
        _require(args.lags or st.lags, "--lags"), seed, base=args.base, workers=args.threads)
    return _finish_study(args, argv, cfg, seed, table)


def _cmd_gamma_converge(args, argv):
    cfg = parse_config(args.config)
    st = cfg.study
    grids = sorted(_require(args.grids or st.grids, "--grids"))
    ref = _require(args.ref or st.ref, "--ref")
    K = cfg.spec.truncation
    if args.control:
        grid = TimeGrid(cfg.spec.horizon, grids[0])
        control = read_control_csv(args.control, grid, K)
    else:
        control = Control.sinusoid(TimeGrid(cfg.spec.horizon, grids[0]), K)
    table = gamma_convergence_study(cfg.spec, control, grids, ref)
    return _finish_study(args, argv, cfg, None, table)


def _cmd_replay(args, argv):
    with open(args.manifest, encoding="utf-8") as fh:
        manifest = json.load(fh)
    old = list(manifest["argv"])
    if old and old[0] == "replay":
        raise ValueError("manifest records a replay")
    with tempfile.TemporaryDirectory() as tmp:
        cfg_path = os.path.join(tmp, "config.txt")
        with open(cfg_path, "w", encoding="utf-8") as fh:
            fh.write(manifest["config_text"])
        new = _swap_flag(old, "--config", cfg_path)
        if args.out is not None:
            new = _swap_flag(new, "--out", args.out)
            new = _drop_flag(new, "--manifest")
        return main(new)


def _swap_flag(argv, flag, value):
    out, i = [], 0
    while i < len(argv):
        a = argv[i]
        if a == flag:
            out += [flag, value]
            i += 2
            continue
        if a.startswith(flag + "="):
            out.append(f"{flag}={value}")
        else:
            out.append(a)
        i += 1
    return out


def _drop_flag(argv, flag):
    out, i = [], 0
    while i < len(argv):
        if argv[i] == flag:
            i += 2
            continue
        if not argv[i].startswith(flag + "="):
            out.append(argv[i])
        i += 1
    return out


_DISPATCH = {
    "ml-eval": _cmd_ml_eval,
    "validate": _cmd_validate,
    "sample-noise": _cmd_sample_noise,
    "run-mle": _cmd_run_mle,
    "skeleton": _cmd_skeleton,
    "converge": _cmd_converge,
    "holder": _cmd_holder,
    "gamma-converge": _cmd_gamma_converge,
    "replay": _cmd_replay,
}

_ERRORS = (ConfigError, ModelValidationError, ValueError, OSError, KeyError,
           MLConvergenceError, CovarianceFactorizationError, NonFiniteStateError,
           DegenerateFitError)


def main(argv=None) -> int:
    """Run one subcommand; returns 0 on success, 2 on a failed verdict, 1 on errors."""
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        print("fracspde: error: --threads must be positive", file=sys.stderr)
        return 1
    try:
        return _DISPATCH[args.command](args, argv)
    except _VerdictFailure as exc:
        print(f"fracspde: {exc}", file=sys.stderr)
        return 2
    except _ERRORS as exc:
        print(f"fracspde: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
