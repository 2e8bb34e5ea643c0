import argparse
import csv
import json
import logging
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any

from .analysis import AGREEMENT_TOL, ContestAnalysis
from .design import DesignResult, SweepRow, sweep
from .enums import ExitCode
from .exceptions import ConvergenceError, InfeasibleDesignError, InvalidInstanceError, SpecFileError
from .oracle import FIXED_POINT_MAX_ITER, FIXED_POINT_TOL, NASH_TOL
from .spec_file import ContestSpecFile

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"
SWEEP_HEADER = ("v2", "v3", "U_K", "alpha")
MISSING = "NA"


def _fmt(value: float) -> str:
    return f"{value:.6g}"


def _emit(payload: dict[str, Any]) -> None:
    print(json.dumps(payload))


def _csv_field(value: float | None) -> str:
    return MISSING if value is None else f"{value:.17g}"


def _row_fields(row: SweepRow) -> list[str]:
    return [_csv_field(row.v2), _csv_field(row.v3), _csv_field(row.coordinator_utility), _csv_field(row.alpha)]


def _row_dict(row: SweepRow | None) -> dict[str, float | None] | None:
    if row is None:
        return None
    return {"v2": row.v2, "v3": row.v3, "U_K": row.coordinator_utility, "alpha": row.alpha}


def _row_text(row: SweepRow) -> str:
    if not row.feasible:
        return f"v2={_fmt(row.v2)} (no feasible companion)"
    return f"v2={_fmt(row.v2)} v3={_fmt(row.v3)} U_K={_fmt(row.coordinator_utility)} alpha={_fmt(row.alpha)}"


def write_sweep_csv(rows: Sequence[SweepRow], path: str | Path) -> None:
    """Write sweep rows with a fixed header, 17 significant digits and ``NA`` for missing values."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(SWEEP_HEADER)
        for row in rows:
            writer.writerow(_row_fields(row))


def cmd_solve(analysis: ContestAnalysis, args: argparse.Namespace) -> ExitCode:
    eq = analysis.equilibrium
    if args.json:
        _emit(
            {
                "alpha": eq.alpha,
                "cutoff_index": eq.alpha_solution.cutoff_index,
                "sorted_order": [k + 1 for k in eq.alpha_solution.sorted_order],
                "bids": eq.bids.tolist(),
                "payoffs": eq.payoffs.tolist(),
                "net_payoffs": eq.net_payoffs.tolist(),
                "active": eq.active.tolist(),
            }
        )
        return ExitCode.SUCCESS

    print(f"alpha = {_fmt(eq.alpha)}")
    for i, (bid, payoff, net, active) in enumerate(zip(eq.bids, eq.payoffs, eq.net_payoffs, eq.active), start=1):
        print(f"player {i}: x* = {_fmt(bid)}  U* = {_fmt(payoff)}  net = {_fmt(net)}  {'active' if active else 'inactive'}")
    return ExitCode.SUCCESS


def cmd_verify(analysis: ContestAnalysis, args: argparse.Namespace) -> ExitCode:
    report = analysis.verify(
        tol=args.tol,
        fixed_point_tol=args.fixed_point_tol,
        max_iter=args.max_iter,
        agreement_tol=args.agreement_tol,
    )
    status = "PASS" if report.passed else "FAIL"
    if args.json:
        _emit(
            {
                "status": status,
                "max_deviation_gain": report.nash.max_deviation_gain,
                "per_player_gain": list(report.nash.per_player_gain),
                "tolerance": report.nash.tolerance,
                "fixed_point": report.fixed_point.tolist(),
                "fixed_point_distance": report.agreement,
            }
        )
    else:
        print(f"max deviation gain = {report.nash.max_deviation_gain:.3g} (tol {report.nash.tolerance:g})")
        print(f"fixed point distance = {report.agreement:.3g} (tol {report.agreement_tol:g})")
        print(status)
    return ExitCode.SUCCESS if report.passed else ExitCode.VERIFICATION_FAILED


def _design_payload(result: DesignResult, baseline: float, coalition: Sequence[int]) -> dict[str, Any]:
    return {
        "regime": result.regime.value,
        "beta": result.beta,
        "coalition": list(coalition),
        "valuations": list(result.valuations),
        "alpha": result.alpha,
        "U_K": result.coordinator_utility,
        "feasibility_residual": result.feasibility_residual,
        "baseline_U_K": baseline,
        "gain": result.coordinator_utility - baseline,
    }


def cmd_design(analysis: ContestAnalysis, args: argparse.Namespace) -> ExitCode:
    result = analysis.design(force_general=args.general)
    baseline = analysis.baseline_utility
    if args.json:
        _emit(_design_payload(result, baseline, args.coalition))
        return ExitCode.SUCCESS

    print(f"regime = {result.regime.value}")
    print(f"beta = {_fmt(result.beta)}")
    labelled = ", ".join(f"player {m} = {_fmt(v)}" for m, v in zip(args.coalition, result.valuations, strict=True))
    print(f"v* = ({labelled})")
    print(f"alpha = {_fmt(result.alpha)}")
    print(f"U_K* = {_fmt(result.coordinator_utility)}")
    print(f"feasibility residual = {result.feasibility_residual:.3g}")
    print(f"baseline U_K = {_fmt(baseline)} (gain {_fmt(result.coordinator_utility - baseline)})")
    return ExitCode.SUCCESS


def cmd_sweep(analysis: ContestAnalysis, args: argparse.Namespace) -> ExitCode:
    rows = analysis.sweep(args.v2_min, args.v2_max, args.points)
    write_sweep_csv(rows, args.out)

    feasible = [row for row in rows if row.feasible]
    argmax = max(feasible, key=lambda row: row.coordinator_utility, default=None)
    v_K = analysis.coordinator.v_K
    baseline = sweep(analysis.coordinator, [v_K])[0] if args.v2_min <= v_K <= args.v2_max else None

    if args.json:
        _emit({"out": str(args.out), "rows": len(rows), "argmax": _row_dict(argmax), "baseline": _row_dict(baseline)})
        return ExitCode.SUCCESS

    print(f"wrote {len(rows)} rows to {args.out}")
    print(f"argmax: {_row_text(argmax)}" if argmax else "argmax: no feasible row")
    if baseline is not None:
        print(f"baseline: {_row_text(baseline)}")
    return ExitCode.SUCCESS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tullock", description="Tullock contest equilibria and coordinator design.")
    parser.add_argument("--json", action="store_true", help="Emit one JSON object at full precision.")
    parser.add_argument("-v", "--verbose", action="store_true", help="Log solver progress to stderr.")
    commands = parser.add_subparsers(dest="command", required=True)

    solve = commands.add_parser("solve", help="Closed-form Nash equilibrium.")
    solve.add_argument("spec", type=Path, help="YAML contest spec.")
    solve.set_defaults(handler=cmd_solve)

    verify = commands.add_parser("verify", help="Check the equilibrium with best-response dynamics.")
    verify.add_argument("spec", type=Path, help="YAML contest spec.")
    verify.add_argument("--tol", type=float, default=NASH_TOL, help=f"Accepted deviation gain (default: {NASH_TOL:g}).")
    verify.add_argument(
        "--fixed-point-tol",
        type=float,
        default=FIXED_POINT_TOL,
        help=f"Stopping tolerance of best-response iteration (default: {FIXED_POINT_TOL:g}).",
    )
    verify.add_argument(
        "--max-iter", type=int, default=FIXED_POINT_MAX_ITER, help=f"Sweep budget (default: {FIXED_POINT_MAX_ITER})."
    )
    verify.add_argument(
        "--agreement-tol",
        type=float,
        default=AGREEMENT_TOL,
        help=f"Accepted distance between fixed point and closed form (default: {AGREEMENT_TOL:g}).",
    )
    verify.set_defaults(handler=cmd_verify)

    design = commands.add_parser("design", help="Optimal valuations to report to the coalition.")
    design.add_argument("spec", type=Path, help="YAML contest spec with coalition and v_K.")
    design.add_argument("--general", action="store_true", help="Use the general solver even for three players.")
    design.set_defaults(handler=cmd_design)

    sweep_parser = commands.add_parser("sweep", help="Coordinator utility along the feasible segment, as CSV.")
    sweep_parser.add_argument("spec", type=Path, help="YAML contest spec with a two-player coalition.")
    sweep_parser.add_argument("--v2-min", type=float, required=True, dest="v2_min")
    sweep_parser.add_argument("--v2-max", type=float, required=True, dest="v2_max")
    sweep_parser.add_argument("--points", type=int, default=201, help="Grid size (default: 201).")
    sweep_parser.add_argument("--out", type=Path, required=True, help="CSV output path.")
    sweep_parser.set_defaults(handler=cmd_sweep)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format=LOG_FORMAT, stream=sys.stderr)
    logger.debug("Running %s on %s", args.command, args.spec)

    try:
        spec = ContestSpecFile.from_yaml(args.spec)
        args.coalition = spec.coalition
        analysis = ContestAnalysis.from_spec(spec)
        return int(args.handler(analysis, args))
    except InvalidInstanceError as e:
        code, msg = ExitCode.INPUT_ERROR, str(e)
    except ConvergenceError as e:
        code, msg = ExitCode.NO_CONVERGENCE, f"{e} (last iterate {e.last_iterate.tolist()})"
    except InfeasibleDesignError as e:
        code, msg = ExitCode.INFEASIBLE_DESIGN, str(e)
    except SpecFileError as e:
        code, msg = ExitCode.INPUT_ERROR, str(e)
    print(f"error: {msg}", file=sys.stderr)
    return int(code)


if __name__ == "__main__":
    sys.exit(main())
