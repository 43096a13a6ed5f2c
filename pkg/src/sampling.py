"""
Deterministic sampling of point tuples.

Every trial draws from its own numpy stream seeded with (seed, trial_index);
points are drawn one after the other, so the first n points of an
(n + 1)-point draw coincide with the n-point draw of the same trial.

Exact mode draws coordinates on a rational grid: lo + (hi - lo) * k / G with
k uniform in 1..G-1 and G = cfg.exact_grid (default 10^6).
"""

from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import BackendError, DimensionError, InputError
from .exprlang import parse
from .jointmatrix import PointTuple
from .models import ActionSpec, FunctionFamily, Region, SampleCfg, VectorField

# stream tags keep auxiliary draws (flows, completions, checks) apart from rank trials
RANK_STREAM = 0
COMPLETION_STREAM = 1
FLOW_STREAM = 2
CHECK_STREAM = 3


def resolve_exact(polynomial: bool, cfg: SampleCfg) -> bool:
    if cfg.exact is True and not polynomial:
        raise BackendError("--exact needs polynomial coefficients")
    if cfg.exact is None:
        return polynomial
    return cfg.exact


def rng_for(seed: int, trial_index: int, stream: int = RANK_STREAM) -> np.random.Generator:
    entropy = [seed, trial_index] if stream == RANK_STREAM else [seed, trial_index, stream]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def _float_point(rng: np.random.Generator, box: Region) -> Tuple[float, ...]:
    while True:
        point = tuple(float(lo + (hi - lo) * rng.random()) for lo, hi in box.bounds)
        if box.contains(point):
            return point


def _exact_coordinate(rng: np.random.Generator, lo: float, hi: float, grid: int) -> Fraction:
    k = int(rng.integers(1, grid))
    flo, fhi = Fraction(repr(lo)), Fraction(repr(hi))
    return flo + (fhi - flo) * Fraction(k, grid)


def sample_points(
    box: Region,
    n: int,
    cfg: SampleCfg,
    trial_index: int,
    exact: bool,
    stream: int = RANK_STREAM,
) -> PointTuple:
    if n < 1:
        raise InputError("order must be at least 1")
    rng = rng_for(cfg.seed, trial_index, stream)
    points = []
    for _ in range(n):
        if exact:
            point = tuple(_exact_coordinate(rng, lo, hi, cfg.exact_grid) for lo, hi in box.bounds)
        else:
            point = _float_point(rng, box)
        points.append(point)
    return PointTuple(tuple(points), exact)


def sample_tuple(
    spec: ActionSpec,
    n: int,
    cfg: SampleCfg,
    trial_index: int,
    exact: Optional[bool] = None,
    stream: int = RANK_STREAM,
) -> PointTuple:
    if exact is None:
        exact = resolve_exact(spec.is_polynomial, cfg)
    return sample_points(cfg.box_for(spec.m), n, cfg, trial_index, exact, stream)


# ---------------------------------------------------------------------------
# CLI point grammar
# ---------------------------------------------------------------------------

def _number(text: str) -> Fraction:
    text = text.strip()
    exponent = text.lower().partition("e")[2].lstrip("+-")
    if len(text) > 100 or (exponent.isdigit() and int(exponent) > 400):
        raise InputError(f"number out of range: {text[:20]!r}")
    try:
        value = Fraction(text)
        float(value)
    except (ValueError, ZeroDivisionError):
        raise InputError(f"not a number: {text!r}")
    except OverflowError:
        raise InputError(f"number out of float range: {text[:20]!r}")
    return value


def parse_points(text: str, m: int, order: Optional[int] = None) -> PointTuple:
    """'x,y;x,y' -> exact point tuple; checks dimension and point count"""
    chunks = [chunk for chunk in text.split(";") if chunk.strip()]
    if not chunks:
        raise InputError("no points given")
    points = []
    for j, chunk in enumerate(chunks):
        values = [_number(v) for v in chunk.split(",")]
        if len(values) != m:
            raise DimensionError(f"point {j + 1} has {len(values)} coordinates, expected {m}")
        points.append(tuple(values))
    if order is not None and len(points) != order:
        raise DimensionError(f"wrong point count: {len(points)} points given for order {order}")
    return PointTuple(tuple(points), True)


def parse_box(text: str, m: Optional[int] = None) -> Region:
    chunks = [chunk for chunk in text.split(";") if chunk.strip()]
    if m is not None and len(chunks) != m:
        raise DimensionError(f"box has {len(chunks)} intervals, expected {m}")
    bounds = []
    for chunk in chunks:
        values = [float(_number(v)) for v in chunk.split(",")]
        if len(values) != 2:
            raise InputError(f"interval {chunk!r} must be 'lo,hi'")
        bounds.append((values[0], values[1]))
    try:
        return Region(bounds=bounds, name="box")
    except ValueError as e:
        raise InputError(str(e))


# ---------------------------------------------------------------------------
# Random polynomial data for property suites
# ---------------------------------------------------------------------------

def random_polynomial_text(rng: np.random.Generator, coords: Sequence[str], degree: int, max_terms: int = 3) -> str:
    terms: List[str] = []
    for _ in range(int(rng.integers(0, max_terms + 1))):
        coeff = int(rng.integers(-3, 4))
        if coeff == 0:
            continue
        powers = [0] * len(coords)
        for _ in range(int(rng.integers(0, degree + 1))):
            powers[int(rng.integers(0, len(coords)))] += 1
        factors = [str(coeff)] + [
            name if p == 1 else f"{name}^{p}" for name, p in zip(coords, powers) if p
        ]
        terms.append("*".join(factors))
    if not terms:
        return "0"
    return " + ".join(f"({t})" for t in terms)


def random_polynomial_action(
    rng: np.random.Generator, r: int, m: int, degree: int, name: str = "random-action"
) -> ActionSpec:
    coords = tuple(f"x{i + 1}" for i in range(m))
    generators = tuple(
        VectorField(coefficients=tuple(parse(random_polynomial_text(rng, coords, degree), coords) for _ in range(m)))
        for _ in range(r)
    )
    return ActionSpec(name=name, m=m, coords=coords, generators=generators)


def random_polynomial_family(
    rng: np.random.Generator, r: int, q: int, degree: int, p: int = 1, name: str = "random-family"
) -> FunctionFamily:
    xcoords = tuple(f"t{i + 1}" for i in range(p))
    functions = tuple(
        tuple(parse(random_polynomial_text(rng, xcoords, degree), xcoords) for _ in range(q))
        for _ in range(r)
    )
    return FunctionFamily(name=name, p=p, xcoords=xcoords, q=q, functions=functions)
