"""
Rank of joint matrices.

Float path: singular values via numpy, rank = #{sigma > tol * sigma_max}.
Exact path: fraction-free (Bareiss) elimination on the integer-scaled rows.
The generic rank of an order is the maximum over deterministic sampled trials.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .errors import BackendError, ConsistencyError, DimensionError, EvalDomainError, SamplingError
from .jointmatrix import JointMatrix, PointTuple, lie_matrix, wronskian_matrix
from .models import ActionSpec, FunctionFamily, OrderMeasurement, RankReport, Region, SampleCfg
from .observability import get_logger, warn
from .sampling import RANK_STREAM, resolve_exact, sample_points

logger = get_logger(__name__)


def numeric_rank(mat: JointMatrix, tol: float) -> RankReport:
    if not 0 < tol < 1:
        raise BackendError(f"tolerance must lie in (0, 1), got {tol}")
    arr = mat.as_array()
    if not np.all(np.isfinite(arr)):
        raise EvalDomainError("non-finite matrix entries", "", source=mat.source)
    spectrum = np.linalg.svd(arr, compute_uv=False) if arr.size else np.zeros(0)
    sigma_max = float(spectrum[0]) if spectrum.size else 0.0
    if sigma_max == 0.0:
        return RankReport(rank=0, backend="float", rows=mat.rows, cols=mat.cols, tol=tol,
                          spectrum=[float(s) for s in spectrum])
    rank = int(np.sum(spectrum > tol * sigma_max))
    gap = math.inf
    if rank < spectrum.size and spectrum[rank] > 0:
        gap = float(spectrum[rank - 1] / spectrum[rank])
    return RankReport(
        rank=rank, backend="float", rows=mat.rows, cols=mat.cols, tol=tol,
        spectrum=[float(s) for s in spectrum], gap_ratio=gap,
    )


def _integer_rows(rows: Sequence[Sequence[Fraction]]) -> Tuple[List[List[int]], Fraction]:
    """Scale each row by the lcm of its denominators; returns rows and the total scaling"""
    scaled, scale = [], Fraction(1)
    for row in rows:
        lcm = 1
        for v in row:
            lcm = math.lcm(lcm, Fraction(v).denominator)
        scaled.append([int(Fraction(v) * lcm) for v in row])
        scale *= lcm
    return scaled, scale


def _bareiss(rows: List[List[int]]) -> Tuple[int, List[int], int, int]:
    """In-place fraction-free elimination with column skipping.

    Returns (rank, pivot columns, last pivot, sign of the row permutation).
    """
    nrows = len(rows)
    ncols = len(rows[0]) if rows else 0
    previous, sign, rank = 1, 1, 0
    pivots: List[int] = []
    for c in range(ncols):
        if rank == nrows:
            break
        p = next((i for i in range(rank, nrows) if rows[i][c] != 0), None)
        if p is None:
            continue
        if p != rank:
            rows[p], rows[rank] = rows[rank], rows[p]
            sign = -sign
        pivot = rows[rank][c]
        for i in range(rank + 1, nrows):
            lead = rows[i][c]
            for j in range(c + 1, ncols):
                value, remainder = divmod(rows[i][j] * pivot - lead * rows[rank][j], previous)
                if remainder:
                    raise ConsistencyError("non-exact division in fraction-free elimination")
                rows[i][j] = value
            rows[i][c] = 0
        previous = pivot
        pivots.append(c)
        rank += 1
    return rank, pivots, previous, sign


def exact_rank(mat: JointMatrix) -> RankReport:
    if mat.backend != "exact":
        raise BackendError("exact rank needs a matrix evaluated over the rationals")
    rows, _ = _integer_rows(mat.as_fractions())
    rank, pivots, _, _ = _bareiss(rows)
    return RankReport(rank=rank, backend="exact", rows=mat.rows, cols=mat.cols, pivots=len(pivots))


def matrix_rank(mat: JointMatrix, tol: Optional[float] = None) -> RankReport:
    if mat.backend == "exact":
        return exact_rank(mat)
    return numeric_rank(mat, 1e-9 if tol is None else tol)


def _require_square(mat: JointMatrix) -> None:
    if mat.rows != mat.cols:
        raise DimensionError(
            f"Lie determinant needs a square matrix: r = {mat.rows} but n*m = {mat.cols}",
            {"r": mat.rows, "cols": mat.cols},
        )


def exact_determinant(mat: JointMatrix) -> Fraction:
    _require_square(mat)
    rows, scale = _integer_rows(mat.as_fractions())
    rank, _, last, sign = _bareiss(rows)
    if rank < mat.rows:
        return Fraction(0)
    return Fraction(sign * last) / scale


def float_determinant(mat: JointMatrix) -> float:
    _require_square(mat)
    return float(np.linalg.det(mat.as_array()))


def exact_nullspace(rows: Sequence[Sequence[Fraction]]) -> List[List[Fraction]]:
    """Basis of {x : rows . x = 0} over Q via Gauss-Jordan"""
    matrix = [[Fraction(v) for v in row] for row in rows]
    ncols = len(matrix[0]) if matrix else 0
    pivot_cols: List[int] = []
    r = 0
    for c in range(ncols):
        p = next((i for i in range(r, len(matrix)) if matrix[i][c] != 0), None)
        if p is None:
            continue
        matrix[r], matrix[p] = matrix[p], matrix[r]
        pivot = matrix[r][c]
        matrix[r] = [v / pivot for v in matrix[r]]
        for i in range(len(matrix)):
            if i != r and matrix[i][c] != 0:
                factor = matrix[i][c]
                matrix[i] = [a - factor * b for a, b in zip(matrix[i], matrix[r])]
        pivot_cols.append(c)
        r += 1
        if r == len(matrix):
            break
    basis = []
    for free in (c for c in range(ncols) if c not in pivot_cols):
        vector = [Fraction(0)] * ncols
        vector[free] = Fraction(1)
        for row_index, c in enumerate(pivot_cols):
            vector[c] = -matrix[row_index][free]
        basis.append(vector)
    return basis


def primitive_integer_vector(vector: Sequence[Fraction]) -> List[int]:
    """Scale a rational vector to coprime integers with a positive first nonzero entry"""
    values = [Fraction(v) for v in vector]
    lcm = 1
    for v in values:
        lcm = math.lcm(lcm, v.denominator)
    ints = [int(v * lcm) for v in values]
    gcd = math.gcd(*ints) if any(ints) else 1
    ints = [v // gcd for v in ints]
    lead = next((v for v in ints if v != 0), 0)
    return [-v for v in ints] if lead < 0 else ints


def float_nullspace(arr: np.ndarray, tol: float) -> np.ndarray:
    """Orthonormal basis (as columns) of the numerical right null space"""
    if arr.size == 0:
        return np.eye(arr.shape[1])
    _, spectrum, vt = np.linalg.svd(arr)
    sigma_max = spectrum[0] if spectrum.size else 0.0
    rank = int(np.sum(spectrum > tol * sigma_max)) if sigma_max > 0 else 0
    return vt[rank:].T


@dataclass(frozen=True)
class GenericRankResult:
    order: int
    rank: int
    witness: PointTuple
    attained_by: int
    trials_used: int
    upper_bound: int
    backend: str
    heuristic: bool
    min_gap_ratio: float = math.inf

    def __iter__(self) -> Iterator:
        return iter((self.rank, self.witness))

    @property
    def saturated(self) -> bool:
        return self.rank == self.upper_bound

    def measurement(self) -> OrderMeasurement:
        return OrderMeasurement(
            order=self.order,
            rank=self.rank,
            upper_bound=self.upper_bound,
            witness=self.witness.payload(),
            attained_by=self.attained_by,
            trials_used=self.trials_used,
            backend=self.backend,
            heuristic=self.heuristic,
            min_gap_ratio=self.min_gap_ratio,
        )


def _scan(
    trial_indices: Sequence[int],
    draw: Callable[[int], PointTuple],
    build: Callable[[PointTuple], JointMatrix],
    tol: float,
    upper: int,
    state: dict,
) -> None:
    for t in trial_indices:
        try:
            mat = build(draw(t))
        except EvalDomainError as e:
            state["failures"] += 1
            state["last_error"] = e
            logger.debug("trial %d skipped: %s", t, e.message)
            continue
        report = matrix_rank(mat, tol)
        state["used"] += 1
        state["gap"] = min(state["gap"], report.gap_ratio)
        if report.rank > state["rank"]:
            state.update(rank=report.rank, witness=mat.points, attained=1)
        elif report.rank == state["rank"]:
            state["attained"] += 1
        if state["rank"] == upper:
            return


def _generic_rank(
    order: int,
    upper: int,
    polynomial: bool,
    cfg: SampleCfg,
    draw: Callable[[int], PointTuple],
    build: Callable[[PointTuple], JointMatrix],
    first_trial: int,
    label: str,
) -> GenericRankResult:
    state = {"rank": -1, "witness": None, "attained": 0, "used": 0, "failures": 0, "gap": math.inf, "last_error": None}
    _scan(range(first_trial, first_trial + cfg.trials), draw, build, cfg.tol, upper, state)
    if state["witness"] is not None and state["rank"] < upper and state["attained"] < 2:
        # the maximum was seen once: draw one more batch before trusting it
        extra = range(first_trial + cfg.trials, first_trial + 2 * cfg.trials)
        _scan(extra, draw, build, cfg.tol, upper, state)
        if state["rank"] < upper and state["attained"] < 2:
            warn(f"{label}: rank {state['rank']} at order {order} attained by a single trial")
    if state["witness"] is None:
        error = state["last_error"]
        raise SamplingError(
            f"{label}: every trial at order {order} left the evaluation domain"
            + (f" ({error.message})" if error else ""),
            {"order": order, "trials": state["failures"]},
        )
    return GenericRankResult(
        order=order,
        rank=state["rank"],
        witness=state["witness"],
        attained_by=state["attained"],
        trials_used=state["used"] + state["failures"],
        upper_bound=upper,
        backend="exact" if state["witness"].exact else "float",
        heuristic=not polynomial,
        min_gap_ratio=state["gap"],
    )


def generic_rank(
    spec: ActionSpec,
    n: int,
    cfg: SampleCfg,
    region: Optional[Region] = None,
    first_trial: int = 0,
    stream: int = RANK_STREAM,
) -> GenericRankResult:
    """Maximal rank of the Lie matrix of order n over sampled tuples"""
    exact = resolve_exact(spec.is_polynomial, cfg)
    box = region or cfg.box_for(spec.m)
    return _generic_rank(
        order=n,
        upper=min(spec.r, n * spec.m),
        polynomial=spec.is_polynomial,
        cfg=cfg,
        draw=lambda t: sample_points(box, n, cfg, t, exact, stream),
        build=lambda points: lie_matrix(spec, points, exact),
        first_trial=first_trial,
        label=spec.name,
    )


def generic_wronskian_rank(
    family: FunctionFamily,
    n: int,
    cfg: SampleCfg,
    region: Optional[Region] = None,
    first_trial: int = 0,
) -> GenericRankResult:
    exact = resolve_exact(family.is_polynomial, cfg)
    box = region or cfg.box_for(family.p)
    return _generic_rank(
        order=n,
        upper=min(family.r, n * family.q),
        polynomial=family.is_polynomial,
        cfg=cfg,
        draw=lambda t: sample_points(box, n, cfg, t, exact),
        build=lambda points: wronskian_matrix(family, points, exact),
        first_trial=first_trial,
        label=family.name,
    )
