import operator
from dataclasses import replace
from fractions import Fraction
from typing import Annotated, Any, List, Optional, Sequence

from langgraph.graph import END, StateGraph
from typing_extensions import TypedDict

from ..errors import BackendError, CompletionError, ConsistencyError, DimensionError, EvalDomainError
from ..jointmatrix import PointTuple, lie_matrix
from ..models import ActionSpec, CompletionReport, Region, SampleCfg, StabilizationReport, coordinate_payload
from ..observability import get_logger, trace_analysis, warn
from ..rankcore import (
    GenericRankResult,
    exact_nullspace,
    generic_rank,
    matrix_rank,
    primitive_integer_vector,
)
from ..sampling import CHECK_STREAM, COMPLETION_STREAM, resolve_exact, sample_points, sample_tuple

logger = get_logger(__name__)


class StabilizationState(TypedDict):
    spec: ActionSpec
    cfg: SampleCfg
    extra_orders: int
    measurements: Annotated[List[GenericRankResult], operator.add]
    report: Optional[StabilizationReport]


def first_equality(ranks: Sequence[int]) -> Optional[int]:
    """Smallest n (1-based) with s_n = s_{n+1}, or None"""
    for n, (a, b) in enumerate(zip(ranks, ranks[1:]), start=1):
        if a == b:
            return n
    return None


def order_cap(spec: ActionSpec, s1: int) -> int:
    return spec.r - s1 + 1


class StabilizationAnalyzer:
    def __init__(self):
        self.graph = self._build_graph()

    def _build_graph(self) -> StateGraph:
        workflow = StateGraph(StabilizationState)

        workflow.add_node("measure", self._measure_node)
        workflow.add_node("finalize", self._finalize_node)

        workflow.set_entry_point("measure")
        workflow.add_conditional_edges("measure", self._decide, {"measure": "measure", "finalize": "finalize"})
        workflow.add_edge("finalize", END)

        return workflow.compile()

    def _measure_node(self, state: StabilizationState) -> dict:
        spec, cfg = state["spec"], state["cfg"]
        previous = state["measurements"][-1] if state["measurements"] else None
        order = len(state["measurements"]) + 1
        result = generic_rank(spec, order, cfg)
        if previous is not None and result.rank < previous.rank:
            result = self._extend_witness(spec, cfg, previous, result)
        logger.debug("%s: s_%d = %d (%d trials)", spec.name, order, result.rank, result.trials_used)
        return {"measurements": [result]}

    def _extend_witness(
        self, spec: ActionSpec, cfg: SampleCfg, previous: GenericRankResult, current: GenericRankResult
    ) -> GenericRankResult:
        # ranks cannot drop with more points; reuse the previous witness plus one fresh point
        for t in range(cfg.trials):
            try:
                fresh = sample_tuple(spec, 1, cfg, t, previous.witness.exact, COMPLETION_STREAM)
                points = previous.witness.extended(fresh)
                rank = matrix_rank(lie_matrix(spec, points, points.exact), cfg.tol).rank
            except EvalDomainError:
                continue
            if rank >= previous.rank:
                warn(f"{spec.name}: sampled rank at order {current.order} fell below order "
                     f"{previous.order}; using an extended witness")
                return replace(current, rank=rank, witness=points, attained_by=1)
        raise ConsistencyError(
            f"{spec.name}: rank at order {current.order} is below order {previous.order}",
            {"order": current.order},
        )

    def _decide(self, state: StabilizationState) -> str:
        spec = state["spec"]
        ranks = [m.rank for m in state["measurements"]]
        n0 = first_equality(ranks)
        if n0 is not None:
            return "finalize" if len(ranks) >= n0 + 1 + state["extra_orders"] else "measure"
        if len(ranks) > order_cap(spec, ranks[0]):
            return "finalize"
        return "measure"

    def _finalize_node(self, state: StabilizationState) -> dict:
        spec = state["spec"]
        measurements = state["measurements"]
        ranks = [m.rank for m in measurements]
        cap = order_cap(spec, ranks[0])
        n0 = first_equality(ranks)
        if n0 is None:
            raise ConsistencyError(
                f"{spec.name}: no stabilization by order {len(ranks)} (cap {cap}); "
                "a rank was probably under-estimated",
                {"s": ranks, "cap": cap},
            )
        for m in measurements[:n0 + 1]:
            if not m.measurement().confident:
                warn(f"{spec.name}: stopping decision uses rank {m.rank} at order {m.order} "
                     "seen by a single trial")
        s = ranks[:n0]
        s_stab = s[-1]
        equals_dim = s_stab == spec.r
        if not spec.is_polynomial:
            verdict = "heuristic"
            warn(f"{spec.name}: non-polynomial generators, ranks are sampled estimates")
            if equals_dim and not spec.analytic_hint:
                warn(f"{spec.name}: not declared analytic; full orbit dimension does not rule out "
                     "a generator vanishing on an open subset")
        else:
            verdict = "yes" if equals_dim else "no"
        report = StabilizationReport(
            spec_name=spec.name,
            r=spec.r,
            m=spec.m,
            s=s,
            n0=n0,
            s_stab=s_stab,
            invariant_counts=[n * spec.m - s_n for n, s_n in enumerate(s, start=1)],
            order_cap=cap,
            bound_ok=n0 <= cap,
            effective_on_subsets_verdict=verdict,
            stabilization_equals_dim=equals_dim,
            backend=measurements[0].backend,
            confirmation_rank=ranks[n0],
            extended_s=ranks[n0 + 1:],
            witnesses=[m.witness.payload() for m in measurements],
            measurements=[m.measurement() for m in measurements],
        )
        return {"report": report}

    @trace_analysis("stabilization")
    def stabilize(self, spec: ActionSpec, cfg: SampleCfg, extra_orders: int = 0) -> StabilizationReport:
        """Orbit dimensions s_1, s_2, ... up to the first repeat.

        extra_orders=k additionally measures s_{n0+2} .. s_{n0+1+k} into extended_s.
        """
        resolve_exact(spec.is_polynomial, cfg)
        initial_state = StabilizationState(
            spec=spec, cfg=cfg, extra_orders=extra_orders, measurements=[], report=None
        )
        limit = 2 * (spec.r + 3 + extra_orders) + 10
        result = self.graph.invoke(initial_state, {"recursion_limit": limit})
        return result["report"]


_analyzer: Optional[StabilizationAnalyzer] = None


def _default() -> StabilizationAnalyzer:
    global _analyzer
    if _analyzer is None:
        _analyzer = StabilizationAnalyzer()
    return _analyzer


def stabilize(spec: ActionSpec, cfg: SampleCfg, extra_orders: int = 0) -> StabilizationReport:
    return _default().stabilize(spec, cfg, extra_orders)


def invariant_count(spec: ActionSpec, n: int, cfg: SampleCfg) -> int:
    """Number of functionally independent joint invariants of order n: n*m - s_n"""
    return n * spec.m - generic_rank(spec, n, cfg).rank


def tuple_rank(spec: ActionSpec, points: PointTuple, cfg: SampleCfg) -> int:
    return matrix_rank(lie_matrix(spec, points, cfg.exact), cfg.tol).rank


def is_max_orbit(spec: ActionSpec, points: PointTuple, cfg: SampleCfg, s_n: Optional[int] = None) -> bool:
    if s_n is None:
        s_n = generic_rank(spec, points.order, cfg).rank
    if s_n == 0:
        return True
    return tuple_rank(spec, points, cfg) == s_n


def _as_coordinate(value: Any, exact: bool):
    if not exact:
        return float(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(value)


@trace_analysis("completion")
def complete_tuple(
    spec: ActionSpec,
    z1: Sequence[Any],
    cfg: SampleCfg,
    report: Optional[StabilizationReport] = None,
) -> CompletionReport:
    """Extend z1 by n0 sampled points to a tuple of maximal orbit dimension s_{n0}"""
    if len(z1) != spec.m:
        raise DimensionError(f"base point has {len(z1)} coordinates, expected {spec.m}")
    report = report or stabilize(spec, cfg)
    exact = resolve_exact(spec.is_polynomial, cfg)
    base = PointTuple((tuple(_as_coordinate(v, exact) for v in z1),), exact)
    for attempt in range(cfg.trials):
        try:
            points = base.extended(sample_tuple(spec, report.n0, cfg, attempt, exact, COMPLETION_STREAM))
            rank = tuple_rank(spec, points, cfg)
        except EvalDomainError as e:
            logger.debug("completion attempt %d skipped: %s", attempt, e.message)
            continue
        if rank != report.s_stab:
            continue
        recheck = matrix_rank(lie_matrix(spec, points, points.exact), cfg.tol).rank
        if recheck != report.s_stab:
            raise ConsistencyError(f"completed tuple re-checks at rank {recheck}, expected {report.s_stab}")
        return CompletionReport(
            spec_name=spec.name,
            z1=[coordinate_payload(v) for v in base.points[0]],
            points=points.payload(),
            rank=recheck,
            s_stab=report.s_stab,
            n0=report.n0,
            attempts=attempt + 1,
        )
    raise CompletionError(
        f"{spec.name}: no completion of {list(z1)} reached rank {report.s_stab} in {cfg.trials} attempts "
        "(sampling budget exhausted; this is not a counterexample)",
        {"attempts": cfg.trials},
    )


def trivial_directions(
    spec: ActionSpec,
    cfg: SampleCfg,
    witness: Optional[PointTuple] = None,
    region: Optional[Region] = None,
) -> List[List[int]]:
    """Constant coefficient vectors a with sum a_k v_k vanishing on the sampled box.

    Read off the left null space of the Lie matrix at a maximal-rank witness, then
    re-verified at fresh points. Polynomial generators only.
    """
    if not resolve_exact(spec.is_polynomial, cfg):
        raise BackendError("trivial directions need the exact backend")
    box = region or cfg.box_for(spec.m)
    if witness is None:
        witness = generic_rank(spec, spec.r + 1, cfg, region=box).witness
    mat = lie_matrix(spec, witness, True)
    transposed = [list(column) for column in zip(*mat.as_fractions())]
    directions = [primitive_integer_vector(v) for v in exact_nullspace(transposed)]
    for t in range(cfg.trials):
        check = lie_matrix(spec, sample_points(box, 1, cfg, t, True, CHECK_STREAM), True).as_fractions()
        for a in directions:
            if any(sum(Fraction(c) * row[i] for c, row in zip(a, check)) != 0 for i in range(spec.m)):
                raise ConsistencyError(f"{spec.name}: direction {a} does not vanish at a fresh point")
    return directions
