import math
from fractions import Fraction
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .errors import DimensionError
from .exprlang import Expr, eval_exact, eval_float, is_polynomial, to_text

# A coordinate in a report: exact values as "p/q" strings, floats as floats.
Coordinate = Union[str, float]
PointPayload = List[List[Coordinate]]


def coordinate_payload(value: Any) -> Coordinate:
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, int):
        return str(value)
    return float(value)


def tuple_payload(points: Sequence[Sequence[Any]]) -> PointPayload:
    return [[coordinate_payload(v) for v in point] for point in points]


def to_payload(value: Any) -> Any:
    """Turn models, fractions and non-finite floats into plain JSON values"""
    if isinstance(value, BaseModel):
        return to_payload(value.model_dump())
    if isinstance(value, dict):
        return {str(k): to_payload(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_payload(v) for v in value]
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, float) and not math.isfinite(value):
        return "inf" if value > 0 else ("-inf" if value < 0 else "nan")
    return value


class Region(BaseModel):
    bounds: List[Tuple[float, float]]
    name: Optional[str] = None

    @field_validator("bounds")
    @classmethod
    def _check_bounds(cls, bounds):
        if not bounds:
            raise ValueError("a region needs at least one interval")
        for lo, hi in bounds:
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise ValueError(f"interval ({lo}, {hi}) is not finite")
            if not lo < hi:
                raise ValueError(f"interval ({lo}, {hi}) is empty")
        return bounds

    @classmethod
    def unit(cls, m: int) -> "Region":
        return cls(bounds=[(-1.0, 1.0)] * m, name="unit")

    @property
    def dim(self) -> int:
        return len(self.bounds)

    def contains(self, point: Sequence[Any]) -> bool:
        return len(point) == self.dim and all(lo < float(v) < hi for v, (lo, hi) in zip(point, self.bounds))

    def product(self, other: "Region") -> "Region":
        return Region(bounds=list(self.bounds) + list(other.bounds), name=self.name)


class SampleCfg(BaseModel):
    trials: int = 32
    seed: int = 42
    box: Optional[Region] = None
    tol: float = 1e-9
    exact: Optional[bool] = None
    exact_grid: int = 10**6

    @field_validator("trials")
    @classmethod
    def _check_trials(cls, trials):
        if trials < 1:
            raise ValueError("trials must be at least 1")
        return trials

    @field_validator("seed")
    @classmethod
    def _check_seed(cls, seed):
        if not 0 <= seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        return seed

    @field_validator("tol")
    @classmethod
    def _check_tol(cls, tol):
        if not 0 < tol < 1:
            raise ValueError("tol must lie in (0, 1)")
        return tol

    @field_validator("exact_grid")
    @classmethod
    def _check_grid(cls, grid):
        if grid < 2:
            raise ValueError("exact_grid must be at least 2")
        return grid

    def box_for(self, m: int) -> Region:
        box = self.box or Region.unit(m)
        if box.dim != m:
            raise DimensionError(f"sampling box has dimension {box.dim}, expected {m}")
        return box

    def echo(self) -> Dict[str, Any]:
        backend = "auto" if self.exact is None else ("exact" if self.exact else "float")
        return {
            "seed": self.seed,
            "trials": self.trials,
            "tol": self.tol,
            "backend": backend,
            "box": self.box.bounds if self.box else None,
        }


class FlowSpec(BaseModel):
    coeffs: List[float]
    time: float = 1.0
    steps: int = 1024

    @field_validator("steps")
    @classmethod
    def _check_steps(cls, steps):
        if steps < 1:
            raise ValueError("steps must be at least 1")
        return steps

    @model_validator(mode="after")
    def _check_finite(self):
        if not all(math.isfinite(a) for a in self.coeffs) or not math.isfinite(self.time):
            raise ValueError("flow coefficients and time must be finite")
        return self


class RankReport(BaseModel):
    rank: int
    backend: Literal["float", "exact"]
    rows: int
    cols: int
    tol: Optional[float] = None
    spectrum: List[float] = Field(default_factory=list)
    pivots: Optional[int] = None
    gap_ratio: float = math.inf

    @model_validator(mode="after")
    def _check_rank(self):
        if not 0 <= self.rank <= min(self.rows, self.cols):
            raise ValueError(f"rank {self.rank} outside [0, {min(self.rows, self.cols)}]")
        if self.backend == "exact" and self.gap_ratio != math.inf:
            raise ValueError("exact rank reports an infinite gap ratio")
        return self


class OrderMeasurement(BaseModel):
    order: int
    rank: int
    upper_bound: int
    witness: PointPayload
    attained_by: int
    trials_used: int
    backend: Literal["float", "exact"]
    heuristic: bool = False
    min_gap_ratio: float = math.inf

    @property
    def saturated(self) -> bool:
        return self.rank == self.upper_bound

    @property
    def confident(self) -> bool:
        return self.saturated or self.attained_by >= 2


class StabilizationReport(BaseModel):
    spec_name: str
    r: int
    m: int
    s: List[int]
    n0: int
    s_stab: int
    invariant_counts: List[int]
    order_cap: int
    bound_ok: bool
    effective_on_subsets_verdict: Literal["yes", "no", "heuristic"]
    stabilization_equals_dim: bool
    backend: Literal["float", "exact"]
    confirmation_rank: int
    extended_s: List[int] = Field(default_factory=list)
    witnesses: List[PointPayload] = Field(default_factory=list)
    measurements: List[OrderMeasurement] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_sequence(self):
        if any(b <= a for a, b in zip(self.s, self.s[1:])):
            raise ValueError(f"orbit dimensions {self.s} are not strictly increasing")
        if self.s_stab > self.r:
            raise ValueError("stabilization dimension exceeds the group dimension")
        if any(c < 0 for c in self.invariant_counts):
            raise ValueError("negative invariant count")
        return self


class EffectivenessReport(BaseModel):
    spec_name: str
    region: Region
    max_rank_found: int
    required: int
    verdict: Literal["effective", "not_effective", "heuristic_not_effective"]
    witness: PointPayload
    trials_used: int
    backend: Literal["float", "exact"]
    kernel_dim: int
    trivial_directions: List[List[int]] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_verdict(self):
        if (self.verdict == "effective") != (self.max_rank_found == self.required):
            raise ValueError("verdict 'effective' must coincide with full rank")
        return self


class FreenessReport(BaseModel):
    spec_name: str
    order: int
    rank: int
    r: int
    verdict: Literal["locally_free", "not_locally_free_here"]
    caveat: str
    rank_report: RankReport


class InvarianceCheck(BaseModel):
    tuple_index: int
    flow_index: int
    coeffs: List[float]
    rank_before: Optional[int] = None
    rank_after: Optional[int] = None
    gap_ratio_after: Optional[float] = None
    skipped: bool = False
    reason: Optional[str] = None

    @property
    def agrees(self) -> bool:
        return self.skipped or self.rank_before == self.rank_after


class InvarianceReport(BaseModel):
    spec_name: str
    order: int
    passed: bool
    tuples: int
    flows: int
    checks: List[InvarianceCheck]
    skipped: int
    min_gap_ratio: float = math.inf
    extra_tuples: List[PointPayload] = Field(default_factory=list)


class DeterminantReport(BaseModel):
    spec_name: str
    order: int
    backend: Literal["float", "exact"]
    value: Coordinate
    value_float: float
    points: PointPayload


class DetInvarianceReport(BaseModel):
    spec_name: str
    order: Optional[int] = None
    skipped: bool = False
    message: str = ""
    passed: bool = True
    variety_max_abs_det: float = 0.0
    variety_checks: int = 0
    generic_checks: int = 0
    generic_min_abs_det: float = math.inf
    generic_max_change_ratio: float = 1.0
    variety_exact_zero: Optional[bool] = None
    sanity_note: str = (
        "the off-variety bound is a numerical sanity check; only the preservation "
        "of the zero set is a theorem"
    )


class CompletionReport(BaseModel):
    spec_name: str
    z1: List[Coordinate]
    points: PointPayload
    rank: int
    s_stab: int
    n0: int
    attempts: int


class IsotropyProfile(BaseModel):
    spec_name: str
    region: Region
    orders: List[int]
    ranks: List[int]
    kernel_dims: List[int]
    r: int

    @property
    def non_increasing(self) -> bool:
        return all(b <= a for a, b in zip(self.kernel_dims, self.kernel_dims[1:]))


class IndependenceReport(BaseModel):
    family_name: str
    region: Region
    r: int
    q: int
    p: int
    max_wronskian_rank: int
    verdict: Literal["independent", "dependent_on_region", "heuristic_dependent"]
    backend: Literal["float", "exact"]
    relation: Optional[List[Coordinate]] = None
    relation_residual: Optional[float] = None
    relations: List[List[Coordinate]] = Field(default_factory=list)
    witness: PointPayload
    trials_used: int

    @model_validator(mode="after")
    def _check_verdict(self):
        if (self.verdict == "independent") != (self.max_wronskian_rank == self.r):
            raise ValueError("verdict 'independent' must coincide with full rank")
        return self


class RunReport(BaseModel):
    version: str
    command: str
    input_digest: Optional[str] = None
    cfg: Dict[str, Any]
    result: Dict[str, Any]
    warnings: List[str] = Field(default_factory=list)
    timing_ms: float = 0.0
    exit_code: int = 0

    def payload(self, include_timing: bool = True) -> Dict[str, Any]:
        data = {
            "version": self.version,
            "command": self.command,
            "input_digest": self.input_digest,
            "cfg": self.cfg,
            "result": self.result,
            "warnings": self.warnings,
        }
        if include_timing:
            data["timing_ms"] = self.timing_ms
        return to_payload(data)


class VectorField(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    coefficients: Tuple[Expr, ...]

    @property
    def is_polynomial(self) -> bool:
        return all(is_polynomial(c) for c in self.coefficients)

    def evaluate(self, point: Sequence[Any], exact: bool = False) -> List[Any]:
        if exact:
            return [eval_exact(c, point) for c in self.coefficients]
        return [eval_float(c, point) for c in self.coefficients]

    def texts(self) -> List[str]:
        return [to_text(c) for c in self.coefficients]


class ActionSpec(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    name: str
    m: int
    coords: Tuple[str, ...]
    generators: Tuple[VectorField, ...]
    regions: Dict[str, Region] = Field(default_factory=dict)
    analytic_hint: bool = False
    notes: str = ""

    @model_validator(mode="after")
    def _check_shape(self):
        if self.m < 1 or len(self.coords) != self.m:
            raise ValueError(f"dimension {self.m} does not match coordinates {list(self.coords)}")
        if not self.generators:
            raise ValueError("at least one generator is required")
        for k, field in enumerate(self.generators):
            if len(field.coefficients) != self.m:
                raise ValueError(
                    f"generator {k + 1} has {len(field.coefficients)} coefficients, expected {self.m}"
                )
        for name, region in self.regions.items():
            if region.dim != self.m:
                raise ValueError(f"region {name!r} lives in R^{region.dim}, expected R^{self.m}")
        return self

    @property
    def r(self) -> int:
        return len(self.generators)

    @property
    def is_polynomial(self) -> bool:
        return all(field.is_polynomial for field in self.generators)

    def region(self, name: str) -> Region:
        if name not in self.regions:
            raise KeyError(name)
        return self.regions[name]


class FunctionFamily(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    name: str
    p: int
    xcoords: Tuple[str, ...]
    q: int
    functions: Tuple[Tuple[Expr, ...], ...]
    regions: Dict[str, Region] = Field(default_factory=dict)
    notes: str = ""

    @model_validator(mode="after")
    def _check_shape(self):
        if self.p < 1 or len(self.xcoords) != self.p:
            raise ValueError(f"dimension {self.p} does not match coordinates {list(self.xcoords)}")
        if self.q < 1:
            raise ValueError("target dimension must be positive")
        if not self.functions:
            raise ValueError("at least one function is required")
        for k, components in enumerate(self.functions):
            if len(components) != self.q:
                raise ValueError(f"function {k + 1} has {len(components)} components, expected {self.q}")
        for name, region in self.regions.items():
            if region.dim != self.p:
                raise ValueError(f"region {name!r} lives in R^{region.dim}, expected R^{self.p}")
        return self

    @property
    def r(self) -> int:
        return len(self.functions)

    @property
    def is_polynomial(self) -> bool:
        return all(is_polynomial(c) for components in self.functions for c in components)

    def region(self, name: str) -> Region:
        if name not in self.regions:
            raise KeyError(name)
        return self.regions[name]
