import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, List, Literal, Optional, Sequence, Tuple

import numpy as np

from .errors import BackendError, DimensionError, EvalDomainError
from .exprlang import Expr, eval_exact, eval_float
from .models import ActionSpec, FunctionFamily, PointPayload, tuple_payload

Backend = Literal["float", "exact"]


@dataclass(frozen=True)
class PointTuple:
    """n points of a chart; Fraction coordinates in exact mode, floats otherwise"""

    points: Tuple[Tuple[Any, ...], ...]
    exact: bool = False

    def __post_init__(self):
        if not self.points:
            raise DimensionError("a point tuple needs at least one point")
        dims = {len(p) for p in self.points}
        if len(dims) != 1:
            raise DimensionError(f"points of different dimensions: {sorted(dims)}")
        if not self.exact and not all(math.isfinite(v) for p in self.points for v in p):
            raise DimensionError("point coordinates must be finite")

    @classmethod
    def of(cls, points: Sequence[Sequence[Any]]) -> "PointTuple":
        exact = all(isinstance(v, (Fraction, int)) for p in points for v in p)
        if exact:
            return cls(tuple(tuple(Fraction(v) for v in p) for p in points), True)
        return cls(tuple(tuple(float(v) for v in p) for p in points), False)

    @property
    def order(self) -> int:
        return len(self.points)

    @property
    def dim(self) -> int:
        return len(self.points[0])

    def as_float(self) -> "PointTuple":
        if not self.exact:
            return self
        return PointTuple(tuple(tuple(float(v) for v in p) for p in self.points), False)

    def prefix(self, k: int) -> "PointTuple":
        return PointTuple(self.points[:k], self.exact)

    def extended(self, other: "PointTuple") -> "PointTuple":
        if self.exact and other.exact:
            return PointTuple(self.points + other.points, True)
        return PointTuple(self.as_float().points + other.as_float().points, False)

    def permuted(self, perm: Sequence[int]) -> "PointTuple":
        return PointTuple(tuple(self.points[i] for i in perm), self.exact)

    def payload(self) -> PointPayload:
        return tuple_payload(self.points)


@dataclass(frozen=True)
class JointMatrix:
    """r x (n * block) matrix: row k, block j holds generator k evaluated at point j"""

    entries: Tuple[Tuple[Any, ...], ...]
    backend: Backend
    block: int
    source: str
    points: PointTuple

    @property
    def rows(self) -> int:
        return len(self.entries)

    @property
    def cols(self) -> int:
        return len(self.entries[0]) if self.entries else 0

    @property
    def order(self) -> int:
        return self.points.order

    def as_array(self) -> np.ndarray:
        return np.array([[float(v) for v in row] for row in self.entries], dtype=float).reshape(self.rows, self.cols)

    def as_fractions(self) -> List[List[Fraction]]:
        if self.backend != "exact":
            raise BackendError("matrix was evaluated in floating point")
        return [list(row) for row in self.entries]

    def columns(self, k: int) -> "JointMatrix":
        """The leading k column blocks, i.e. the matrix of the first k points"""
        width = k * self.block
        return JointMatrix(
            tuple(row[:width] for row in self.entries), self.backend, self.block, self.source, self.points.prefix(k)
        )

    def permute_blocks(self, perm: Sequence[int]) -> "JointMatrix":
        b = self.block
        entries = tuple(
            tuple(v for j in perm for v in row[j * b:(j + 1) * b]) for row in self.entries
        )
        return JointMatrix(entries, self.backend, b, self.source, self.points.permuted(perm))

    def dump(self) -> str:
        return "\n".join(" ".join(_entry_text(v) for v in row) for row in self.entries)


def _entry_text(value: Any) -> str:
    if isinstance(value, Fraction):
        return str(value)
    return repr(float(value))


def _backend(polynomial: bool, points: PointTuple, exact: Optional[bool]) -> Backend:
    if exact is True:
        if not polynomial:
            raise BackendError("exact backend requested for non-polynomial expressions")
        if not points.exact:
            raise BackendError("exact backend requested for floating point coordinates")
        return "exact"
    if exact is None and polynomial and points.exact:
        return "exact"
    return "float"


def _assemble(rows_of_fields, points: PointTuple, block: int, backend: Backend, source: str) -> JointMatrix:
    use_exact = backend == "exact"
    evaluated = points if use_exact else points.as_float()
    entries = []
    for k, components in enumerate(rows_of_fields):
        row: List[Any] = []
        for j, point in enumerate(evaluated.points):
            for expr_eval in components:
                try:
                    value = expr_eval(point, use_exact)
                except EvalDomainError as e:
                    raise e.located(generator=k + 1, point=j + 1)
                if not use_exact and not math.isfinite(value):
                    raise EvalDomainError("non-finite value", "", generator=k + 1, point=j + 1)
                row.append(value)
        entries.append(tuple(row))
    return JointMatrix(tuple(entries), backend, block, source, evaluated)


def lie_matrix(spec: ActionSpec, points: PointTuple, exact: Optional[bool] = None) -> JointMatrix:
    if points.dim != spec.m:
        raise DimensionError(f"points live in R^{points.dim}, the chart is R^{spec.m}")
    backend = _backend(spec.is_polynomial, points, exact)
    rows = [[_evaluator(c) for c in field.coefficients] for field in spec.generators]
    return _assemble(rows, points, spec.m, backend, spec.name)


def wronskian_matrix(family: FunctionFamily, points: PointTuple, exact: Optional[bool] = None) -> JointMatrix:
    if points.dim != family.p:
        raise DimensionError(f"points live in R^{points.dim}, the domain is R^{family.p}")
    backend = _backend(family.is_polynomial, points, exact)
    rows = [[_evaluator(c) for c in components] for components in family.functions]
    return _assemble(rows, points, family.q, backend, family.name)


def _evaluator(expr: Expr):
    def evaluate(point, use_exact: bool):
        return eval_exact(expr, point) if use_exact else eval_float(expr, point)
    return evaluate
