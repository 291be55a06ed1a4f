"""Command-line driver: ``lwrdnl <command> [flags]``.

Failures print one JSON object on stderr (``{"error": ..., "message": ...}``)
and exit with status 2.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from .analysis import (RIEMANN_FIXTURES, convergence_study, gridlock_monitor, probe_continuity,
                       replicate_illposedness, verify_supply_bound)
from .fundamental_diagram import DomainError, FundamentalDiagram
from .io import (InputError, load_demand, load_network, write_convergence, write_delays,
                 write_densities, write_illposedness, write_probe_report, write_queues,
                 write_supply_report)
from .network import NetworkError, network_constants
from .simulator import ConfigurationError, NumericalFault, SimulationConfig, Simulator


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _fraction_list(text: str) -> list[Fraction]:
    return [Fraction(x.strip()) for x in text.split(",") if x.strip()]


def _simulation_args(p: argparse.ArgumentParser, demand: bool = True):
    p.add_argument("--network", required=True)
    if demand:
        p.add_argument("--demand", required=True)
    p.add_argument("--dt", type=float, required=True)
    p.add_argument("--horizon", type=float, required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--cells-per-link", type=int, default=None)
    p.add_argument("--cfl", type=float, default=1.0)
    p.add_argument("--record-densities", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lwrdnl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="load the network and write delay and queue tables")
    _simulation_args(p)
    p.add_argument("--sample-dt", type=float, default=None,
                   help="departure-time spacing of the delay table (default: dt)")

    p = sub.add_parser("verify-bounds", help="check the windowed minimum-supply bound")
    _simulation_args(p)
    p.add_argument("--tolerance", type=float, default=None)

    p = sub.add_parser("probe-continuity", help="delay response to shrinking demand bumps")
    _simulation_args(p)
    p.add_argument("--path", required=True)
    p.add_argument("--sizes", type=_float_list, default=[1e-1, 1e-2, 1e-3, 1e-4])
    p.add_argument("--bump-start", type=float, default=0.0)
    p.add_argument("--bump-width", type=float, default=None)
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("replicate-counterexample", help="diverge flux table over epsilon")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--free-flow-speed", type=Fraction, default=Fraction(1))
    p.add_argument("--backward-wave-speed", type=Fraction, default=Fraction(1, 2))
    p.add_argument("--jam-density", type=Fraction, default=Fraction(3))
    p.add_argument("--rho1", type=Fraction, default=Fraction(7, 5))
    p.add_argument("--epsilon-list", type=_fraction_list,
                   default=[Fraction(1, 4), Fraction(1, 10), Fraction(1, 100), Fraction(0)])

    p = sub.add_parser("oracle-compare", help="Godunov vs front tracking on a Riemann fixture")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--fixture", choices=sorted(RIEMANN_FIXTURES), default="fan")
    p.add_argument("--levels", type=int, default=4)
    p.add_argument("--base-cells", type=int, default=100)
    p.add_argument("--segments", type=int, default=1000)
    return parser


def _config(args) -> SimulationConfig:
    return SimulationConfig(dt=args.dt, horizon=args.horizon, cells_per_link=args.cells_per_link,
                            cfl=args.cfl, record_densities=args.record_densities)


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_run(args) -> int:
    net = load_network(args.network)
    profiles = load_demand(args.demand, net)
    result = Simulator(net, profiles, _config(args)).run()
    out = _out_dir(args)
    step = args.sample_dt or args.dt
    departures = np.arange(0.0, args.horizon + 1e-9 * step, step)
    write_delays(out / "delays.csv", result.delay_table(departures))
    write_queues(out / "queues.csv", result)
    if args.record_densities:
        write_densities(out / "densities.csv", result)
    print(f"run: {len(result.times) - 1} steps, {len(result.path_ids)} paths -> {out}")
    return 0


def cmd_verify(args) -> int:
    net = load_network(args.network)
    profiles = load_demand(args.demand, net)
    result = Simulator(net, profiles, _config(args)).run()
    report = verify_supply_bound(result, network_constants(net), args.tolerance)
    grid = gridlock_monitor(result)
    out = _out_dir(args)
    write_supply_report(out / "supply_bound.csv", report)
    print(f"supply bound: {'pass' if report.passed else 'FAIL'} "
          f"({len(report.windows)} windows, worst margin {report.worst_margin!r})")
    print(f"min supply {grid.min_supply!r} at t={grid.time!r} on {grid.link} cell {grid.cell}")
    return 0


def cmd_probe(args) -> int:
    net = load_network(args.network)
    profiles = load_demand(args.demand, net)
    cfg = _config(args)
    width = args.bump_width if args.bump_width is not None else 10 * args.dt
    report = probe_continuity(net, profiles, cfg, args.path, args.sizes, args.bump_start, width,
                              max_workers=args.workers)
    out = _out_dir(args)
    write_probe_report(out / "probe.csv", report)
    for row in report.rows:
        print(f"size {row.size!r}: deviation {row.deviation!r}")
    print(f"floor {report.floor!r}: {report.verdict}")
    return 0


def cmd_counterexample(args) -> int:
    fd = FundamentalDiagram.triangular(args.free_flow_speed, args.backward_wave_speed,
                                       args.jam_density)
    report = replicate_illposedness(fd, args.rho1, args.epsilon_list)
    out = _out_dir(args)
    write_illposedness(out / "counterexample.csv", report)
    for r in report.rows:
        print(f"eps={r.epsilon}: f1_out={r.f1_out} f2_in={r.f2_in} f3_in={r.f3_in}")
    if report.gap is not None:
        print(f"gap={report.gap}")
    return 0


def cmd_oracle(args) -> int:
    report = convergence_study(args.fixture, args.levels, args.base_cells, args.segments)
    out = _out_dir(args)
    write_convergence(out / f"convergence_{args.fixture}.csv", report)
    for n, e in zip(report.cells, report.errors):
        print(f"cells {n}: L1 error {float(e)!r}")
    print(f"convergence order: {report.order:.4f}")
    return 0


COMMANDS = {
    "run": cmd_run,
    "verify-bounds": cmd_verify,
    "probe-continuity": cmd_probe,
    "replicate-counterexample": cmd_counterexample,
    "oracle-compare": cmd_oracle,
}


def _fail(kind: str, message: str, **extra) -> int:
    print(json.dumps({"error": kind, "message": message, **extra}), file=sys.stderr)
    return 2


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        return _fail("usage", str(exc))
    except NetworkError as exc:
        return _fail("invalid_network", str(exc), violations=exc.violations)
    except InputError as exc:
        return _fail("invalid_input", str(exc))
    except ConfigurationError as exc:
        return _fail("configuration", str(exc))
    except NumericalFault as exc:
        return _fail("numerical_fault", str(exc))
    except (DomainError, ValueError) as exc:
        return _fail("invalid_value", str(exc))
    except OSError as exc:
        return _fail("io", str(exc))


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
