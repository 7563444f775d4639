"""Command-line entry point: ``swingsym {analyze,symmetry,deviations,simulate}``."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .analysis import Options, analyze_network, deviation_report, prepare, symmetry_report
from .errors import NetworkFormatError, SwingError
from .network import load_network, write_network
from .report import render, to_plain
from .simulate import (
    default_horizon,
    flow_series,
    integrate_linear,
    integrate_nonlinear,
    trajectory_csv,
)

FORMATS = ("text", "json", "csv")
FORMAT_ENV = "SWINGSYM_FORMAT"


def _positive(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def _default_format() -> str:
    fmt = os.environ.get(FORMAT_ENV, "text")
    return fmt if fmt in FORMATS else "text"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swingsym",
        description="Modal, peak-flow and symmetry analysis of swing-equation power grids.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("network", help="network file (JSON)")
    common.add_argument("--format", choices=FORMATS, default=_default_format(),
                        help=f"output format (default from ${FORMAT_ENV}, else text)")
    common.add_argument("--theta-star", choices=("solve", "zero"), default="solve",
                        help="linearize at the solved fixed point or at theta=0")
    common.add_argument("--gamma", type=_positive, help="override damping with one value for all nodes")
    common.add_argument("--validate", action="store_true",
                        help="add nonlinear-simulation maxima to the tables")
    common.add_argument("--horizon", type=_positive, help="simulation / scan horizon in seconds")
    common.add_argument("--step", type=_positive, default=1e-3, help="time step (default 1e-3)")
    common.add_argument("--out", type=Path,
                        help="write the output to this file (symmetry: the quotient network)")
    common.add_argument("--tol", type=_positive, default=1e-10, help="fixed-point / block tolerance")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("analyze", parents=[common], help="modes and per-line peak flows")
    sym = sub.add_parser("symmetry", parents=[common], help="orbits and quotient network")
    sym.add_argument("--max-expansions", type=int, default=None,
                     help="node-expansion cap for the orbit search")
    dev = sub.add_parser("deviations", parents=[common], help="within-cluster deviation peaks")
    dev.add_argument("--node", help="report only this node id")
    dev.add_argument("--max-expansions", type=int, default=None)
    simp = sub.add_parser("simulate", parents=[common], help="export a trajectory")
    simp.add_argument("--model", choices=("nonlinear", "linear"), default="nonlinear")
    simp.add_argument("--flows", action="store_true", help="export line flows instead of angles")
    simp.add_argument("--stride", type=int, default=1, help="keep every k-th sample")
    return parser


def _options(args) -> Options:
    return Options(theta_star=args.theta_star, gamma=args.gamma, validate=args.validate,
                   horizon=args.horizon, step=args.step, tol=args.tol)


def _simulate(net, args) -> str:
    opts = _options(args)
    net, lin, _, _ = prepare(net, opts)
    horizon = args.horizon or default_horizon(lin.gamma)
    if args.model == "nonlinear":
        traj = integrate_nonlinear(net, horizon=horizon, step=args.step, stride=args.stride)
        kind = "nonlinear"
    else:
        traj = integrate_linear(lin, horizon=horizon, step=args.step, stride=args.stride)
        kind = "linear"
    if not args.flows:
        if args.format == "json":
            return json.dumps(to_plain({"ids": net.ids, "times": traj.times, "theta": traj.theta,
                                      "thetadot": traj.thetadot})) + "\n"
        return trajectory_csv(traj, net.ids)
    lines = net.lines()
    labels = [net.line_label(i, j) for i, j in lines]
    flows = np.array([flow_series(traj, net, i, j, kind) for i, j in lines]).reshape(len(lines), -1)
    if args.format == "json":
        return json.dumps(to_plain({"lines": labels, "times": traj.times, "flows": flows})) + "\n"
    out = ["time," + ",".join(labels)]
    for k, t in enumerate(traj.times):
        out.append(",".join([repr(float(t))] + [repr(float(x)) for x in flows[:, k]]))
    return "\n".join(out) + "\n"


def run(args) -> str:
    net = load_network(args.network)
    if args.command == "analyze":
        return render(analyze_network(net, _options(args)), args.format)
    if args.command == "symmetry":
        report, quotient = symmetry_report(net, _options(args), args.max_expansions)
        if args.out is not None:
            write_network(quotient, args.out)
            args.out = None
        return render(report, args.format)
    if args.command == "deviations":
        return render(deviation_report(net, _options(args), args.node, args.max_expansions),
                      args.format)
    return _simulate(net, args)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        text = run(args)
    except KeyError as exc:
        print(f"error: {exc.args[0] if exc.args else exc}", file=sys.stderr)
        return NetworkFormatError.exit_code
    except SwingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    if args.out is not None:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
