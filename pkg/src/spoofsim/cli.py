"""Command line front end: run scenarios, verify captures, sweep parameters."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .scenario_runner import (
    bundled_scenarios,
    export,
    load_config,
    run,
    save_capture,
    set_by_path,
    verify_capture,
)

_DEFENSE_FLAGS = {
    "none": (False, False),
    "cr": (True, False),
    "fp": (False, True),
    "both": (True, True),
}


def _parse_value(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    return text


def _apply_overrides(cfg, args):
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "defense", None) is not None:
        cr, fp = _DEFENSE_FLAGS[args.defense]
        cfg = replace(cfg, defense=replace(
            cfg.defense, challenge_response=cr, fingerprint=fp))
    if getattr(args, "baseline", False):
        cfg = replace(cfg, attackers=[])
    return cfg


def _default_out(cfg, args) -> Path:
    tags = [cfg.name]
    if getattr(args, "baseline", False):
        tags.append("baseline")
    if cfg.defense.challenge_response:
        tags.append("cr")
    if cfg.defense.fingerprint:
        tags.append("fp")
    tags.append(f"seed{cfg.seed}")
    return Path("runs") / "-".join(tags)


def _cmd_run(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    log = run(cfg, capture_every=args.capture_every if args.capture else 0)
    out = Path(args.out) if args.out else _default_out(cfg, args)
    summary = export(log, out)
    if args.capture:
        save_capture(log, args.capture)
        print(f"capture: {len(log.captures)} frame(s) -> {args.capture}")
    ttc = summary["min_ttc_s"]
    print(f"{cfg.name}: outcome={log.outcome} frames={summary['n_frames']} "
          f"min_ttc={'inf' if ttc is None else f'{ttc:.2f}s'} "
          f"hard_brakes={summary['hard_brake_count']} -> {out}")
    return 0


def _cmd_verify(args) -> int:
    reports = verify_capture(args.capture, threshold=args.threshold,
                             model_path=args.model)
    n_spoofed = 0
    for r in reports:
        marks = []
        if r["spoofed"]:
            marks.append("concentration")
        if r.get("fingerprint_spoofed"):
            marks.append("fingerprint")
        verdict = "SPOOFED (" + ", ".join(marks) + ")" if marks else "clean"
        n_spoofed += bool(marks)
        print(f"frame {r['frame_id']:5d} t={r['timestamp']:.3f}s "
              f"detections={r['n_detections']} flagged={r['n_flagged']} {verdict}")
    print(f"{n_spoofed}/{len(reports)} frame(s) failed verification")
    return 1 if n_spoofed else 0


def _cmd_sweep(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    if "=" not in args.param:
        raise SystemExit("--param must look like path.to.field=v1,v2,v3")
    path, _, val_text = args.param.partition("=")
    values = [_parse_value(v) for v in val_text.split(",") if v]
    if not values:
        raise SystemExit("--param lists no values")
    print(f"{'value':>12}  {'outcome':<16} {'min_ttc':>8} {'hard_brakes':>11} {'frames':>7}")
    for v in values:
        log = run(set_by_path(cfg, path, v))
        s = log.summary()
        ttc = "inf" if s["min_ttc_s"] is None else f"{s['min_ttc_s']:.2f}"
        print(f"{v!s:>12}  {log.outcome:<16} {ttc:>8} "
              f"{s['hard_brake_count']:>11} {s['n_frames']:>7}")
        if args.out:
            export(log, Path(args.out) / f"{path.replace('.', '_')}_{v}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="spoofsim",
        description="Desk-scale FMCW radar spoofing laboratory. Bundled scenario "
                    "names (usable in place of a config path): "
                    + ", ".join(bundled_scenarios()),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate one scenario and export its artifacts")
    p_run.add_argument("config", help="scenario JSON path or bundled scenario name")
    p_run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p_run.add_argument("--out", default=None, help="output directory (default runs/<tags>)")
    p_run.add_argument("--defense", choices=sorted(_DEFENSE_FLAGS), default=None,
                       help="override the defense stack")
    p_run.add_argument("--baseline", action="store_true",
                       help="drop every attacker group (clean reference run)")
    p_run.add_argument("--capture", default=None, metavar="FILE.npz",
                       help="also record post-mix cubes for `spoofsim verify`")
    p_run.add_argument("--capture-every", type=int, default=50,
                       help="record every Nth frame (with --capture)")
    p_run.set_defaults(fn=_cmd_run)

    p_ver = sub.add_parser("verify", help="defense-only pass over a recorded capture")
    p_ver.add_argument("capture", help=".npz written by `spoofsim run --capture`")
    p_ver.add_argument("--threshold", type=float, default=None,
                       help="concentration threshold (default: shipped calibration)")
    p_ver.add_argument("--model", default=None,
                       help="fingerprint model JSON to apply as a second verifier")
    p_ver.set_defaults(fn=_cmd_verify)

    p_swp = sub.add_parser("sweep", help="re-run a scenario over a parameter grid")
    p_swp.add_argument("config")
    p_swp.add_argument("--param", required=True, metavar="PATH=V1,V2,...",
                       help="dotted config path and comma-separated values, "
                            "e.g. attackers.0.strategy.d_spoof_m=10,20,30")
    p_swp.add_argument("--seed", type=int, default=None)
    p_swp.add_argument("--out", default=None, help="export each run under this directory")
    p_swp.set_defaults(fn=_cmd_sweep)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
