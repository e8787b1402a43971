"""Command-line driver.

Every subcommand writes its artifacts plus ``summary.json`` into
``--out-dir``.  Exit codes: 0 success, 2 invalid input, 3 recovery failure,
64 usage error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import io as sio
from .errors import PipelineError, RecoveryError, SignretError, ValidationError
from .experiments import (
    counterexample_pair,
    random_decaying_signal,
    redundancy_report,
    stability_probe,
    tensor_counterexample,
)
from .frames import overlap_graph, working_support
from .recovery import RecoveryConfig, measure, recover_band_oracle
from .sampling import axis_aligned_lattices, meyer_alpha_check, meyer_lattices
from .stitching import PipelineConfig, full_pipeline

EXIT_OK, EXIT_INVALID, EXIT_RECOVERY, EXIT_USAGE = 0, 2, 3, 64

CONFIG_HELP = """\
config file (INI); sections and defaults:
  [frame]     kind = meyer | curvelet (meyer), J = 4, jmax = 2, beta = quartic,
              cover_threshold = 1e-06
  [grid]      shape = 1024 (256 256 for curvelet), period = 24.0 (1.5 1.5)
  [sampling]  alpha = 0.1875, s = 1.0
  [recovery]  restarts = 32, max_iter = 200, tol = 1e-06, method = auto
  [stitching] tau = 0.0001, min_confidence = 0.9, measurement_tol = 1e-05
  [run]       seed = 0, jobs = 1
  [probe]     deltas = 0 0.0001 0.001, trials = 20, noise = uniform
"""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="INI config file (see top-level --help)")
    p.add_argument("--seed", type=int, help="64-bit seed for all randomness (0)")
    p.add_argument("--jobs", type=int, help="worker threads (1)")
    p.add_argument("--alpha", type=float, help="Meyer translation step (0.1875)")
    p.add_argument("--s", type=float, help="oversampling factor; < 1 for counterexamples (1.0; 0.5 there)")
    p.add_argument("--out-dir", default="out", help="artifact directory (out)")
    return p


def build_parser():
    common = _common()
    parser = _Parser(
        prog="signret",
        description="Sign retrieval from phaseless semi-discrete frame samples.",
        epilog=CONFIG_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.add_parser("frame-check", parents=[common], help="frame bounds and overlap graph")
    p = sub.add_parser("sample", parents=[common], help="simulate phaseless measurements of a signal")
    p.add_argument("--signal", help="SGNB input signal (default: random decaying signal from --seed)")
    p = sub.add_parser("recover", parents=[common], help="recover a signal from a measurement file")
    p.add_argument("--measurements", help="measurement JSON (default: OUT_DIR/measurements.json)")
    p.add_argument("--reference", help="SGNB reference signal for the error report")
    sub.add_parser("counterexample", parents=[common], help="equal-magnitude pair on an undersampled lattice")
    p = sub.add_parser("stability-probe", parents=[common], help="pipeline error against magnitude noise")
    p.add_argument("--signal", help="SGNB input signal (default: random decaying signal from --seed)")
    sub.add_parser("redundancy", parents=[common], help="oversampling factor of the sampling scheme")
    return parser


def _config(args):
    return sio.load_config(args.config, seed=args.seed, jobs=args.jobs, alpha=args.alpha, s=args.s)


def _lattices(cfg, frame):
    if cfg.kind == "meyer":
        if not meyer_alpha_check(cfg.alpha):
            raise ValidationError(f"alpha = {cfg.alpha} exceeds 3/16: sign retrieval not guaranteed")
        return meyer_lattices(frame, cfg.alpha, s=cfg.s)
    return axis_aligned_lattices(frame, s=cfg.s)


def _pipeline_config(cfg):
    rc = RecoveryConfig(cfg.restarts, cfg.max_iter, cfg.tol, cfg.seed, cfg.method)
    return PipelineConfig(rc, cfg.tau, cfg.min_confidence, cfg.measurement_tol, True, cfg.jobs)


def _signal(cfg, frame, path):
    if path:
        f = sio.read_signal(path)
        if f.grid != frame.grid:
            raise ValidationError("signal grid does not match the configured grid")
        return f
    return random_decaying_signal(working_support(frame), np.random.default_rng(cfg.seed))


def _write(out, name, text):
    p = out / name
    p.write_text(text)
    return str(p)


def cmd_frame_check(cfg, args, out):
    frame = sio.build_frame(cfg)
    graph = overlap_graph(frame, cover_threshold=cfg.cover_threshold)
    files = [_write(out, "frame.ini", sio.frame_descriptor(frame, cfg.cover_threshold))]
    files += [str(p) for p in sio.write_band_filters(out, frame)]
    return {
        "command": "frame-check",
        "kind": frame.kind,
        "bands": frame.labels,
        "A": frame.A,
        "B": frame.B,
        "tight": abs(frame.A - 1) <= 1e-8 and abs(frame.B - 1) <= 1e-8,
        "edges": [[e.a, e.b] for e in graph.edges],
        "connected": graph.is_connected(),
        "artifacts": files,
    }


def cmd_sample(cfg, args, out):
    frame = sio.build_frame(cfg)
    lats = _lattices(cfg, frame)
    f = _signal(cfg, frame, args.signal)
    ms = measure(f, frame, lats)
    sio.write_signal(out / "signal.sgnb", f)
    sio.write_measurements(out / "measurements.json", ms)
    return {
        "command": "sample",
        "kind": frame.kind,
        "samples": {b.label: b.lattice.size for b in ms.bands},
        "total_samples": int(sum(b.lattice.size for b in ms.bands)),
        "artifacts": [str(out / "signal.sgnb"), str(out / "measurements.json")],
    }


def cmd_recover(cfg, args, out):
    frame = sio.build_frame(cfg)
    path = Path(args.measurements) if args.measurements else out / "measurements.json"
    ms, grid = sio.read_measurements(path)
    if grid != frame.grid:
        raise ValidationError("measurement grid does not match the configured frame")
    ref = sio.read_signal(args.reference) if args.reference else None
    f, report = full_pipeline(ms, frame, _pipeline_config(cfg), reference=ref)
    sio.write_signal(out / "recovered.sgnb", f)
    sio.write_signal_csv(out / "recovered.csv", f)
    files = [str(out / "recovered.sgnb"), str(out / "recovered.csv")]
    files.append(_write(out, "report.json", sio.dump_json(report)))
    summary = {"command": "recover", "ok": report["ok"], "measurement_residual": report["measurement_residual"]}
    if "error" in report:
        summary["error"] = report["error"]
    summary["artifacts"] = files
    return summary


def cmd_counterexample(cfg, args, out):
    s = 0.5 if args.s is None else cfg.s
    ce = counterexample_pair(s)
    n = len(recover_band_oracle(np.abs(ce.h1.values[ce.lattice.sites]), ce.lattice, ce.support))
    tc = tensor_counterexample((1.0, s))
    for name, sig in (("h1", ce.h1), ("h2", ce.h2)):
        sio.write_signal(out / f"{name}.sgnb", sig)
        sio.write_signal_csv(out / f"{name}.csv", sig)
    passed = ce.passed and n >= 2 and tc.passed
    return {
        "command": "counterexample",
        "s": s,
        "discrepancy": ce.discrepancy,
        "separation": ce.separation,
        "oracle_candidates": n,
        "tensor_discrepancy": tc.discrepancy,
        "tensor_separation": tc.separation,
        "verification": "PASS" if passed else "FAIL",
        "artifacts": [str(out / f"{n_}.{e}") for n_ in ("h1", "h2") for e in ("sgnb", "csv")],
    }


def cmd_stability_probe(cfg, args, out):
    frame = sio.build_frame(cfg)
    lats = _lattices(cfg, frame)
    f = _signal(cfg, frame, args.signal)
    res = stability_probe(f, frame, lats, list(cfg.deltas), cfg.trials, cfg.seed, cfg.noise, jobs=cfg.jobs)
    files = [
        _write(out, "probe.csv", res.to_csv()),
        _write(out, "probe.json", sio.dump_json(res.summary)),
        _write(out, "probe.dat", res.plot_data()),
    ]
    return {"command": "stability-probe", **res.summary, "artifacts": files}


def cmd_redundancy(cfg, args, out):
    if cfg.kind == "meyer":
        if not meyer_alpha_check(cfg.alpha):
            raise ValidationError(f"alpha = {cfg.alpha} exceeds 3/16")
        r = redundancy_report(cfg.alpha, "meyer")
    else:
        r = redundancy_report(None, "curvelet")
    return {"command": "redundancy", **r.to_dict()}


COMMANDS = {
    "frame-check": cmd_frame_check,
    "sample": cmd_sample,
    "recover": cmd_recover,
    "counterexample": cmd_counterexample,
    "stability-probe": cmd_stability_probe,
    "redundancy": cmd_redundancy,
}


def run(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    out = Path(args.out_dir)
    try:
        cfg = _config(args)
        out.mkdir(parents=True, exist_ok=True)
        summary = COMMANDS[args.command](cfg, args, out)
        code = EXIT_OK
        if summary.get("verification") == "FAIL":
            code = EXIT_RECOVERY
    except (PipelineError, RecoveryError) as exc:
        summary, code = {"command": args.command, "failure": str(exc)}, EXIT_RECOVERY
    except (ValidationError, SignretError, OSError, ValueError, KeyError) as exc:
        summary, code = {"command": args.command, "invalid": str(exc)}, EXIT_INVALID
    if "artifacts" in summary:
        summary["artifacts"] = [Path(a).name for a in summary["artifacts"]]
    summary["exit_code"] = code
    text = sio.dump_json(summary)
    if out.is_dir():
        (out / "summary.json").write_text(text)
    print(text)
    return code


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
