"""
Effectiveness, local freeness, group flows and the invariance checks.

Group elements are realized as time-1 flows of Lie algebra elements sum a_k v_k
near the identity, integrated with fixed-step classical Runge-Kutta.
"""

import math
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..config import Config
from ..errors import DimensionError, EvalDomainError, FlowDomainError, NumericalError
from ..jointmatrix import PointTuple, lie_matrix
from ..models import (
    ActionSpec,
    DeterminantReport,
    DetInvarianceReport,
    EffectivenessReport,
    FlowSpec,
    FreenessReport,
    InvarianceCheck,
    InvarianceReport,
    IsotropyProfile,
    Region,
    SampleCfg,
    coordinate_payload,
)
from ..observability import get_logger, trace_analysis, warn
from ..rankcore import exact_determinant, float_determinant, generic_rank, matrix_rank, numeric_rank
from ..sampling import CHECK_STREAM, FLOW_STREAM, resolve_exact, rng_for, sample_points
from .stabilizer import trivial_directions

logger = get_logger(__name__)

FREENESS_CAVEAT = (
    "full rank shows zero-dimensional isotropy only; discrete isotropy, and with it "
    "global freeness, is not decided from infinitesimal data"
)
VARIETY_TOL = 1e-8
MAX_CHANGE_RATIO = 10.0
GENERIC_MIN_ABS_DET = 1e-3
GENERIC_REDRAWS = 10


def _check_region(spec: ActionSpec, region: Region) -> None:
    if region.dim != spec.m:
        raise DimensionError(f"region lives in R^{region.dim}, the chart is R^{spec.m}")


@trace_analysis("effectiveness")
def effectiveness_on_region(spec: ActionSpec, region: Region, cfg: SampleCfg) -> EffectivenessReport:
    """Local effectiveness on a box: some (r+1)-point tuple inside it reaches rank r"""
    _check_region(spec, region)
    result = generic_rank(spec, spec.r + 1, cfg, region=region)
    directions: List[List[int]] = []
    if result.rank == spec.r:
        verdict = "effective"
    elif result.backend == "exact":
        verdict = "not_effective"
        directions = trivial_directions(spec, cfg, witness=result.witness, region=region)
    else:
        verdict = "heuristic_not_effective"
        warn(f"{spec.name}: rank {result.rank} < {spec.r} on region {region.name or region.bounds} "
             "from sampling only; non-polynomial generators can hide rank")
    return EffectivenessReport(
        spec_name=spec.name,
        region=region,
        max_rank_found=result.rank,
        required=spec.r,
        verdict=verdict,
        witness=result.witness.payload(),
        trials_used=result.trials_used,
        backend=result.backend,
        kernel_dim=spec.r - result.rank,
        trivial_directions=directions,
    )


def _field(spec: ActionSpec, coeffs: np.ndarray, point: np.ndarray) -> np.ndarray:
    values = np.array([field.evaluate(tuple(point), exact=False) for field in spec.generators], dtype=float)
    return coeffs @ values


def flow(spec: ActionSpec, fs: FlowSpec, z: Sequence[float]) -> Tuple[float, ...]:
    """Integrate dz/dt = sum_k a_k v_k(z) over [0, fs.time] with fs.steps RK4 steps.

    Global error is O(steps^-4).
    """
    if len(fs.coeffs) != spec.r:
        raise DimensionError(f"{len(fs.coeffs)} flow coefficients for {spec.r} generators")
    if len(z) != spec.m:
        raise DimensionError(f"point has {len(z)} coordinates, expected {spec.m}")
    a = np.asarray(fs.coeffs, dtype=float)
    h = fs.time / fs.steps
    y = np.asarray([float(v) for v in z], dtype=float)
    for step in range(fs.steps):
        try:
            k1 = _field(spec, a, y)
            k2 = _field(spec, a, y + 0.5 * h * k1)
            k3 = _field(spec, a, y + 0.5 * h * k2)
            k4 = _field(spec, a, y + h * k3)
        except EvalDomainError as e:
            raise FlowDomainError(f"flow left the domain ({e.message})", step, spec=spec.name)
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise FlowDomainError("flow diverged", step, spec=spec.name)
    return tuple(float(v) for v in y)


def flow_error(spec: ActionSpec, fs: FlowSpec, z: Sequence[float]) -> float:
    """Step-doubling estimate: distance between the flows with steps and 2*steps"""
    coarse = np.array(flow(spec, fs, z))
    fine = np.array(flow(spec, fs.model_copy(update={"steps": 2 * fs.steps}), z))
    return float(np.linalg.norm(coarse - fine))


def flow_tuple(spec: ActionSpec, fs: FlowSpec, points: PointTuple) -> PointTuple:
    """The same group element applied to every point of the tuple"""
    return PointTuple(tuple(flow(spec, fs, p) for p in points.as_float().points), False)


def sample_flows(spec: ActionSpec, cfg: SampleCfg, count: int, steps: Optional[int] = None) -> List[FlowSpec]:
    """Random Lie algebra elements with coefficient norm at most FLOW_MAX_NORM, time 1"""
    steps = steps or Config.settings()["flow_steps"]
    flows = []
    for index in range(count):
        rng = rng_for(cfg.seed, index, FLOW_STREAM)
        direction = rng.standard_normal(spec.r)
        norm = np.linalg.norm(direction)
        if norm == 0:
            direction, norm = np.ones(spec.r), math.sqrt(spec.r)
        radius = Config.FLOW_MAX_NORM * (1.0 - rng.random())
        coeffs = direction / norm * radius
        flows.append(FlowSpec(coeffs=[float(c) for c in coeffs], time=1.0, steps=steps))
    return flows


@trace_analysis("rank_invariance")
def check_rank_invariance(
    spec: ActionSpec,
    n: int,
    cfg: SampleCfg,
    flows: int = 10,
    tuples: int = 5,
    extra_tuples: Iterable[PointTuple] = (),
    relaxed_tol: Optional[float] = None,
) -> InvarianceReport:
    """Ranks of Lie matrices are unchanged when one group element moves every point"""
    tol = relaxed_tol or Config.settings()["relaxed_tol"]
    box = cfg.box_for(spec.m)
    extra = [t.as_float() for t in extra_tuples]
    candidates = [sample_points(box, n, cfg, t, False, CHECK_STREAM) for t in range(tuples)] + extra
    group_elements = sample_flows(spec, cfg, flows)
    checks: List[InvarianceCheck] = []
    min_gap = math.inf
    for i, points in enumerate(candidates):
        if points.order != n:
            raise DimensionError(f"tuple {i} has {points.order} points, expected {n}")
        before = numeric_rank(lie_matrix(spec, points, False), tol).rank
        for j, fs in enumerate(group_elements):
            try:
                moved = flow_tuple(spec, fs, points)
                after = numeric_rank(lie_matrix(spec, moved, False), tol)
            except (FlowDomainError, EvalDomainError) as e:
                warn(f"{spec.name}: invariance trial (tuple {i}, flow {j}) skipped: {e.message}")
                checks.append(InvarianceCheck(tuple_index=i, flow_index=j, coeffs=fs.coeffs,
                                              rank_before=before, skipped=True, reason=e.message))
                continue
            min_gap = min(min_gap, after.gap_ratio)
            checks.append(InvarianceCheck(
                tuple_index=i, flow_index=j, coeffs=fs.coeffs,
                rank_before=before, rank_after=after.rank, gap_ratio_after=after.gap_ratio,
            ))
    return InvarianceReport(
        spec_name=spec.name,
        order=n,
        passed=all(c.agrees for c in checks),
        tuples=len(candidates),
        flows=len(group_elements),
        checks=checks,
        skipped=sum(1 for c in checks if c.skipped),
        min_gap_ratio=min_gap,
        extra_tuples=[t.payload() for t in extra],
    )


def _square_order(spec: ActionSpec) -> Optional[int]:
    return spec.r // spec.m if spec.r % spec.m == 0 else None


def _determinant(spec: ActionSpec, points: PointTuple, exact: Optional[bool] = None):
    n = _square_order(spec)
    if n != points.order:
        raise DimensionError(
            f"Lie matrix is not square: r = {spec.r} but n*m = {points.order * spec.m}",
            {"r": spec.r, "nm": points.order * spec.m},
        )
    mat = lie_matrix(spec, points, exact)
    if mat.backend == "exact":
        return exact_determinant(mat), mat
    return float_determinant(mat), mat


def lie_determinant(spec: ActionSpec, points: PointTuple, exact: Optional[bool] = None) -> DeterminantReport:
    value, mat = _determinant(spec, points, exact)
    return DeterminantReport(
        spec_name=spec.name,
        order=points.order,
        backend=mat.backend,
        value=coordinate_payload(value),
        value_float=float(value),
        points=mat.points.payload(),
    )


def _variety_tuple(box: Region, n: int, cfg: SampleCfg, trial: int, exact: bool) -> PointTuple:
    # last point repeats the first: two equal column blocks
    head = sample_points(box, n - 1, cfg, trial, exact, CHECK_STREAM)
    return PointTuple(head.points + head.points[:1], exact)


def _generic_tuple(
    spec: ActionSpec, box: Region, n: int, cfg: SampleCfg, t: int, tuples: int, exact: bool
) -> Tuple[PointTuple, float]:
    # redraw tuples that land next to the zero variety by chance
    for attempt in range(GENERIC_REDRAWS):
        generic = sample_points(box, n, cfg, t + tuples * (1 + attempt), exact, CHECK_STREAM)
        value = abs(float(_determinant(spec, generic, exact)[0]))
        if value >= GENERIC_MIN_ABS_DET * MAX_CHANGE_RATIO:
            break
    return generic, value


@trace_analysis("det_invariance")
def check_det_invariance(
    spec: ActionSpec, cfg: SampleCfg, flows: int = 10, tuples: int = 5
) -> DetInvarianceReport:
    """The zero set of the Lie determinant is preserved by the group.

    Variety tuples repeat a point. Generic tuples must keep |det| >= 1e-3 and change by
    less than 10x under every flow, which is a sanity check only.
    """
    n = _square_order(spec)
    if n is None:
        return DetInvarianceReport(
            spec_name=spec.name, skipped=True,
            message=f"r = {spec.r} is not a multiple of m = {spec.m}; no square Lie matrix exists",
        )
    if n < 2:
        return DetInvarianceReport(
            spec_name=spec.name, order=n, skipped=True,
            message="square order is 1; repeated-point tuples need at least two points",
        )
    exact = resolve_exact(spec.is_polynomial, cfg)
    box = cfg.box_for(spec.m)
    group_elements = sample_flows(spec, cfg, flows)

    variety_max, variety_checks, exact_zero = 0.0, 0, (True if exact else None)
    generic_checks, generic_min, worst_ratio = 0, math.inf, 1.0
    for t in range(tuples):
        on_variety = _variety_tuple(box, n, cfg, t, exact)
        value, _ = _determinant(spec, on_variety, exact)
        if exact and value != 0:
            exact_zero = False
        variety_max = max(variety_max, abs(float(value)))
        generic, base_value = _generic_tuple(spec, box, n, cfg, t, tuples, exact)
        generic_min = min(generic_min, base_value)
        for fs in group_elements:
            try:
                moved_variety = abs(float_determinant(lie_matrix(spec, flow_tuple(spec, fs, on_variety), False)))
                moved_generic = abs(float_determinant(lie_matrix(spec, flow_tuple(spec, fs, generic), False)))
            except (FlowDomainError, EvalDomainError) as e:
                warn(f"{spec.name}: determinant trial skipped: {e.message}")
                continue
            variety_max = max(variety_max, moved_variety)
            variety_checks += 1
            generic_min = min(generic_min, moved_generic)
            if base_value > 0 and moved_generic > 0:
                worst_ratio = max(worst_ratio, moved_generic / base_value, base_value / moved_generic)
            else:
                worst_ratio = math.inf
            generic_checks += 1
    passed = (
        variety_max <= VARIETY_TOL
        and exact_zero is not False
        and worst_ratio < MAX_CHANGE_RATIO
        and generic_min >= GENERIC_MIN_ABS_DET
    )
    return DetInvarianceReport(
        spec_name=spec.name,
        order=n,
        passed=passed,
        variety_max_abs_det=variety_max,
        variety_checks=variety_checks,
        generic_checks=generic_checks,
        generic_min_abs_det=generic_min,
        generic_max_change_ratio=worst_ratio,
        variety_exact_zero=exact_zero,
    )


def local_freeness_check(spec: ActionSpec, points: PointTuple, cfg: SampleCfg) -> FreenessReport:
    report = matrix_rank(lie_matrix(spec, points, cfg.exact), cfg.tol)
    return FreenessReport(
        spec_name=spec.name,
        order=points.order,
        rank=report.rank,
        r=spec.r,
        verdict="locally_free" if report.rank == spec.r else "not_locally_free_here",
        caveat=FREENESS_CAVEAT,
        rank_report=report,
    )


def isotropy_profile(
    spec: ActionSpec, region: Region, cfg: SampleCfg, max_order: Optional[int] = None
) -> IsotropyProfile:
    """Dimension r - rank of the isotropy algebra of region tuples, order by order"""
    _check_region(spec, region)
    orders = list(range(1, (max_order or spec.r + 1) + 1))
    ranks = [generic_rank(spec, n, cfg, region=region).rank for n in orders]
    if any(b < a for a, b in zip(ranks, ranks[1:])):
        raise NumericalError(f"{spec.name}: sampled ranks {ranks} decrease with the order")
    return IsotropyProfile(
        spec_name=spec.name,
        region=region,
        orders=orders,
        ranks=ranks,
        kernel_dims=[spec.r - rank for rank in ranks],
        r=spec.r,
    )
