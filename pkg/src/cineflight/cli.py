"""Command-line interface.

Subcommands:
  run        execute a scenario, writing the CSV log, plot data, figures and
             a metrics report into the output directory
  parse-psl  parse a shot sentence and print the structure as JSON
  gains      print the step-0 regulator gains of a scenario
  demo       write a canned square/helix scenario file
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .cinematography import parse_psl
from .harness import emit_log, emit_plot_data, plan_reference, run_closed_loop
from .regulation import RegulatorSession
from .scenario import (ScenarioError, demo_scenario, load_scenario,
                       scenario_to_dict)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cineflight",
        description="Closed-loop drone flight control and cinematography simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario in closed loop")
    run.add_argument("scenario", help="scenario JSON file")
    run.add_argument("--seed", type=int, default=None,
                     help="override the scenario seed")
    run.add_argument("--steps", type=int, default=None,
                     help="cap the number of control steps")
    run.add_argument("--out-dir", default="out", help="output directory")
    run.add_argument("--quiet", action="store_true", help="suppress the summary")
    run.add_argument("--realtime", action="store_true",
                     help="pace the loop at wall-clock dt")
    run.add_argument("--no-figures", action="store_true",
                     help="skip PNG rendering")
    _add_weight_flags(run)

    psl = sub.add_parser("parse-psl", help="parse a shot sentence")
    psl.add_argument("sentence", nargs="+", help="the sentence (quotes optional)")

    gains = sub.add_parser("gains", help="print step-0 gains for a scenario")
    gains.add_argument("scenario", help="scenario JSON file")
    _add_weight_flags(gains)

    demo = sub.add_parser("demo", help="write a canned scenario")
    demo.add_argument("kind", choices=("square", "helix"))
    demo.add_argument("--out", default=None,
                      help="output file (default <kind>.json)")
    return parser


def _add_weight_flags(parser):
    parser.add_argument("--q-scale", type=float, default=None,
                        help="override the state-weighting multiplier "
                             "(larger smooths the flight dynamics)")
    parser.add_argument("--r-scale", type=float, default=None,
                        help="override the command-weighting multiplier "
                             "(larger smooths the commands)")


def _apply_weight_flags(scenario, args):
    from .regulation import RegulatorWeights
    if args.q_scale is not None:
        scenario.q_scale = args.q_scale
    if args.r_scale is not None:
        scenario.r_scale = args.r_scale
    if args.q_scale is not None or args.r_scale is not None:
        scenario.weights = RegulatorWeights.identity(scenario.q_scale,
                                                     scenario.r_scale)


def _cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    _apply_weight_flags(scenario, args)
    if args.seed is not None:
        scenario.seed = args.seed
    report, log = run_closed_loop(scenario, steps=args.steps,
                                  realtime=args.realtime)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    emit_log(log, out_dir / "log.csv")
    emit_plot_data(log, out_dir)
    (out_dir / "report.json").write_text(json.dumps({
        "rms_pos_err": report.rms_pos_err,
        "max_pos_err": report.max_pos_err,
        "rms_heading_err": report.rms_heading_err,
        "saturation_fraction": report.saturation_fraction,
        "steps": report.steps,
        "wall_time": report.wall_time,
    }, indent=2) + "\n")
    if not args.no_figures:
        from .report import render_figures
        render_figures(log, out_dir)
    if not args.quiet:
        print(report.summary())
        print(f"outputs in {out_dir}")
    return 0


def _cmd_parse_psl(args) -> int:
    shot = parse_psl(" ".join(args.sentence))
    print(json.dumps({"size": shot.size, "subjects": list(shot.subjects),
                      "profile": shot.profile, "elevation": shot.elevation},
                     indent=2))
    return 0


def _cmd_gains(args) -> int:
    scenario = load_scenario(args.scenario)
    _apply_weight_flags(scenario, args)
    refs = plan_reference(scenario)
    course = (scenario.initial["heading"] if scenario.initial is not None
              else refs[0].course)
    session = RegulatorSession(scenario.drone, scenario.weights,
                               scenario.heading_cfg)
    gains = session.gains_for(course, scenario.dt)
    np.set_printoptions(precision=6, suppress=True)
    print(f"course: {course:.6f} rad   dt: {scenario.dt} s")
    print("K1 =")
    print(gains.k1)
    print("N1 =")
    print(gains.n1)
    print(f"k2 = n2 = {gains.k2:.6f}")
    return 0


def _cmd_demo(args) -> int:
    raw = demo_scenario(args.kind)
    out = Path(args.out) if args.out else Path(f"{args.kind}.json")
    out.write_text(json.dumps(raw, indent=2) + "\n")
    print(f"wrote {out}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {"run": _cmd_run, "parse-psl": _cmd_parse_psl,
                "gains": _cmd_gains, "demo": _cmd_demo}
    try:
        return handlers[args.command](args)
    except (ScenarioError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
