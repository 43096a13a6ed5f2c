import argparse
import json
import sys
from typing import Any, Dict, List, Optional

from .config import Config
from .errors import InputError, JointOrbitError
from .models import RunReport
from .observability import get_logger, observability
from .sampling import parse_box
from .workflow import AnalysisWorkflow

logger = get_logger(__name__)


def _count(minimum: int):
    def convert(text: str) -> int:
        try:
            value = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
        if value < minimum:
            raise argparse.ArgumentTypeError(f"must be at least {minimum}")
        return value
    return convert


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, help="base seed (default 42)")
    parser.add_argument("--trials", type=int, help="sampled tuples per order (default 32)")
    parser.add_argument("--tol", type=float, help="relative singular value threshold (default 1e-9)")
    backend = parser.add_mutually_exclusive_group()
    backend.add_argument("--exact", dest="exact", action="store_const", const=True, help="rational arithmetic")
    backend.add_argument("--float", dest="exact", action="store_const", const=False, help="floating point")
    parser.add_argument("--box", help='sampling box "lo,hi;lo,hi"')
    parser.add_argument("--out", help="write the JSON payload to this file")
    parser.add_argument("--porcelain", action="store_true", help="print only the JSON payload")
    parser.add_argument("--quiet", action="store_true", help="no human summary on stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jointorbit",
        description="Orbit dimensions, joint invariant counts and effectiveness of Cartesian Lie group actions",
    )
    parser.add_argument("--version", action="version", version=f"jointorbit {Config.VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stabilize", help="orbit dimension sequence and stabilization order")
    p.add_argument("spec")
    p.add_argument("--extra-orders", type=_count(0), default=0, help="measure this many orders past the confirmation")
    _common(p)

    p = sub.add_parser("rank", help="rank of the Lie matrix (or Wronskian) at given or sampled points")
    p.add_argument("spec")
    p.add_argument("--order", type=_count(1))
    where = p.add_mutually_exclusive_group()
    where.add_argument("--points", help='"x,y;x,y"')
    where.add_argument("--sample", action="store_true", help="sample the tuple (the default without --points)")
    p.add_argument("--dump-matrix", action="store_true")
    _common(p)

    p = sub.add_parser("effective", help="local effectiveness on a region")
    p.add_argument("spec")
    p.add_argument("--region", help='declared region name or "lo,hi;lo,hi"')
    _common(p)

    p = sub.add_parser("independent", help="linear independence of a function family on a region")
    p.add_argument("spec")
    p.add_argument("--region", help='declared region name or "lo,hi;..."')
    _common(p)

    p = sub.add_parser("invariants", help="number of joint invariants of an order")
    p.add_argument("spec")
    p.add_argument("--order", type=_count(1), required=True)
    _common(p)

    p = sub.add_parser("check-invariance", help="rank strata and Lie determinant under sampled flows")
    p.add_argument("spec")
    p.add_argument("--order", type=_count(1), default=2)
    p.add_argument("--flows", type=_count(1), default=10)
    _common(p)

    p = sub.add_parser("lie-det", help="determinant of a square Lie matrix")
    p.add_argument("spec")
    p.add_argument("--points")
    _common(p)

    p = sub.add_parser("complete-tuple", help="extend a point to a tuple of maximal orbit dimension")
    p.add_argument("spec")
    p.add_argument("--point", required=True, help='"x,y"')
    _common(p)

    p = sub.add_parser("freeness", help="infinitesimal local freeness at a tuple")
    p.add_argument("spec")
    p.add_argument("--points", required=True)
    _common(p)

    p = sub.add_parser("isotropy", help="isotropy dimension per order on a region")
    p.add_argument("spec")
    p.add_argument("--region")
    p.add_argument("--order", type=_count(1), help="largest order (default r + 1)")
    _common(p)

    p = sub.add_parser("examples", help="the fixture gallery")
    p.add_argument("action", choices=["list", "show"])
    p.add_argument("name", nargs="?")
    _common(p)

    return parser


def _cfg(args: argparse.Namespace):
    box = parse_box(args.box) if args.box else None
    return Config.default_sample_cfg(seed=args.seed, trials=args.trials, tol=args.tol, exact=args.exact, box=box)


def run(args: argparse.Namespace, workflow: Optional[AnalysisWorkflow] = None) -> RunReport:
    workflow = workflow or AnalysisWorkflow()
    cfg = _cfg(args)
    command = args.command
    if command == "stabilize":
        return workflow.stabilize(args.spec, cfg, args.extra_orders)
    if command == "rank":
        return workflow.rank(args.spec, cfg, args.order, args.points, args.dump_matrix)
    if command == "effective":
        return workflow.effective(args.spec, cfg, args.region)
    if command == "independent":
        return workflow.independent(args.spec, cfg, args.region)
    if command == "invariants":
        return workflow.invariants(args.spec, cfg, args.order)
    if command == "check-invariance":
        return workflow.check_invariance(args.spec, cfg, args.order, args.flows)
    if command == "lie-det":
        return workflow.lie_det(args.spec, cfg, args.points)
    if command == "complete-tuple":
        return workflow.complete_tuple(args.spec, cfg, args.point)
    if command == "freeness":
        return workflow.freeness(args.spec, cfg, args.points)
    if command == "isotropy":
        return workflow.isotropy(args.spec, cfg, args.region, args.order)
    if args.action == "show" and not args.name:
        raise InputError("examples show needs a fixture name")
    return workflow.examples(cfg, args.name if args.action == "show" else None)


def render_payload(report: RunReport) -> str:
    return json.dumps(report.payload(include_timing=False), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def summarize(report: RunReport) -> List[str]:
    result: Dict[str, Any] = report.result
    command = report.command
    lines: List[str] = []
    if command == "stabilize":
        lines.append(f"{result['spec_name']}: s = {result['s']}, n0 = {result['n0']}, s_stab = {result['s_stab']}")
        lines.append(f"invariant counts: {result['invariant_counts']}")
        lines.append(f"effective on subsets: {result['effective_on_subsets_verdict']}")
    elif command == "rank":
        lines.append(f"rank {result['rank']} at order {result['order']}")
        if "matrix" in result:
            lines.append(result["matrix"])
    elif command == "effective":
        lines.append(f"{result['verdict']}: max rank {result['max_rank_found']} of {result['required']}")
        for direction in result["trivial_directions"]:
            lines.append(f"trivial direction: {direction}")
    elif command == "independent":
        lines.append(f"{result['verdict']}: Wronskian rank {result['max_wronskian_rank']} of {result['r']}")
        if result.get("relation"):
            lines.append(f"relation: {result['relation']}")
    elif command == "invariants":
        lines.append(str(result["count"]))
    elif command == "check-invariance":
        lines.append(f"rank strata preserved: {result['rank']['passed']} ({result['rank']['skipped']} skipped)")
        det = result["det"]
        lines.append(f"Lie determinant: {'skipped (' + det['message'] + ')' if det['skipped'] else det['passed']}")
    elif command == "lie-det":
        lines.append(str(result["value"]))
    elif command == "complete-tuple":
        lines.append(f"rank {result['rank']} at {result['points']} after {result['attempts']} attempt(s)")
    elif command == "freeness":
        lines.append(f"{result['verdict']} (rank {result['rank']} of {result['r']})")
        lines.append(f"note: {result['caveat']}")
    elif command == "isotropy":
        lines.append(f"isotropy dimensions by order: {result['kernel_dims']}")
    elif "fixtures" in result:
        lines.extend(result["fixtures"])
    else:
        lines.append(json.dumps(result["document"], indent=2, ensure_ascii=False))
    for message in report.warnings:
        lines.append(f"warning: {message}")
    return lines


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        Config.validate_required_config()
        report = run(args)
    except JointOrbitError as e:
        observability.log_error(type(e).__name__, e.message, e.context)
        print(f"error: {e.message}", file=sys.stderr)
        return e.exit_code

    payload = render_payload(report)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as file:
            file.write(payload)
    if args.porcelain:
        sys.stdout.write(payload)
    elif not args.quiet:
        print("\n".join(summarize(report)))
    logger.debug("%s finished in %.1f ms", report.command, report.timing_ms)
    return report.exit_code
