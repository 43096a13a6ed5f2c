from fractions import Fraction

import numpy as np
import pytest

import src.analyzers.stabilizer as stabilizer_module
from conftest import exact_tuple
from src.analyzers.stabilizer import (
    complete_tuple,
    first_equality,
    invariant_count,
    is_max_orbit,
    order_cap,
    stabilize,
    trivial_directions,
)
from src.errors import BackendError, ConsistencyError, DimensionError
from src.models import SampleCfg
from src.observability import collecting_warnings
from src.rankcore import GenericRankResult
from src.sampling import random_polynomial_action


def test_first_equality():
    assert first_equality([2, 3, 3]) == 2
    assert first_equality([1, 1]) == 1
    assert first_equality([2, 4, 6]) is None


def test_se2_stabilizes_at_order_two(se2, cfg):
    report = stabilize(se2, cfg)
    assert report.s == [2, 3]
    assert report.n0 == 2
    assert report.s_stab == 3
    assert report.invariant_counts == [0, 1]
    assert report.confirmation_rank == 3
    assert report.effective_on_subsets_verdict == "yes"
    assert report.backend == "exact"
    assert report.bound_ok


def test_gl3_stabilizes_below_group_dimension(gl3, cfg):
    report = stabilize(gl3, cfg)
    assert report.s == [2, 4, 6, 8]
    assert report.n0 == 4
    assert report.invariant_counts == [0, 0, 0, 0]
    assert report.effective_on_subsets_verdict == "no"
    assert not report.stabilization_equals_dim
    assert report.order_cap == 8


def test_translation_stabilizes_immediately(gallery, cfg):
    report = stabilize(gallery["translation1"], cfg)
    assert report.s == [1]
    assert report.n0 == 1
    assert report.effective_on_subsets_verdict == "yes"


def test_non_polynomial_verdict_is_heuristic(polar, cfg, warnings_log):
    report = stabilize(polar, cfg)
    assert report.s == [1]
    assert report.backend == "float"
    assert report.effective_on_subsets_verdict == "heuristic"
    assert any("non-polynomial" in message for message in warnings_log.messages)


def test_extra_orders_extend_past_confirmation(se2, cfg):
    report = stabilize(se2, cfg, extra_orders=2)
    assert report.s == [2, 3]
    assert report.extended_s == [3, 3]
    assert len(report.measurements) == 5


@pytest.mark.parametrize(
    "name, s",
    [
        ("se2", [2, 3]),
        ("gl3", [2, 4, 6, 8]),
        ("sim2", [2, 4]),
        ("translation1", [1]),
        ("polar", [1]),
        ("bump", [1, 2]),
    ],
)
def test_orbit_dimensions_grow_until_they_stay_put(gallery, cfg, name, s):
    report = stabilize(gallery[name], cfg, extra_orders=1)
    assert report.s == s
    assert all(later >= earlier + 1 for earlier, later in zip(report.s, report.s[1:]))
    assert report.n0 <= report.order_cap
    assert report.confirmation_rank == report.s_stab
    assert report.extended_s == [report.s_stab]


def test_sim2_fills_the_group_on_two_copies(sim2, cfg):
    report = stabilize(sim2, cfg)
    assert report.n0 == 2
    assert report.s_stab == 4
    assert report.invariant_counts == [0, 0]
    assert report.effective_on_subsets_verdict == "yes"


def test_non_analytic_actions_get_a_warning(gallery, polar, cfg):
    with collecting_warnings() as plain:
        stabilize(gallery["bump"], cfg)
    assert any("not declared analytic" in message for message in plain.messages)
    with collecting_warnings() as hinted:
        stabilize(polar.model_copy(update={"analytic_hint": True}), cfg)
    assert hinted.messages
    assert not any("not declared analytic" in message for message in hinted.messages)


def test_stabilization_is_deterministic(gl3):
    cfg = SampleCfg(seed=1234, trials=8)
    assert stabilize(gl3, cfg).model_dump() == stabilize(gl3, cfg).model_dump()


def test_invariant_count(se2, gl3, cfg):
    assert invariant_count(se2, 2, cfg) == 1
    assert invariant_count(se2, 3, cfg) == 3
    assert invariant_count(gl3, 4, cfg) == 0
    assert invariant_count(gl3, 5, cfg) == 2


def test_is_max_orbit(se2, cfg):
    assert not is_max_orbit(se2, exact_tuple((1, 2), (1, 2)), cfg)
    assert is_max_orbit(se2, exact_tuple((0, 0), (1, 0)), cfg)
    assert is_max_orbit(se2, exact_tuple((0, 0), (1, 0)), cfg, s_n=3)


@pytest.mark.parametrize("name, size, rank", [("se2", 3, 3), ("gl3", 5, 8), ("polar", 2, 1)])
def test_complete_tuple(gallery, cfg, name, size, rank):
    base = (1, 0) if name == "polar" else (0, 0)
    report = complete_tuple(gallery[name], base, cfg)
    assert len(report.points) == size
    assert report.rank == rank
    assert report.s_stab == rank
    assert report.attempts >= 1


def test_complete_tuple_checks_dimension(se2, cfg):
    with pytest.raises(DimensionError):
        complete_tuple(se2, (0, 0, 0), cfg)


def test_trivial_directions(se2, gl3, cfg):
    assert trivial_directions(gl3, cfg) == [[1, 0, 0, 0, 1, 0, 0, 0, 1]]
    assert trivial_directions(se2, cfg) == []


def test_trivial_directions_need_polynomial_generators(polar, cfg):
    with pytest.raises(BackendError):
        trivial_directions(polar, cfg)


def test_missing_stabilization_is_a_consistency_error(se2, cfg, monkeypatch):
    def strictly_increasing(spec, n, cfg, **kwargs):
        return GenericRankResult(
            order=n, rank=n, witness=exact_tuple(*[(k, 0) for k in range(n)]),
            attained_by=2, trials_used=1, upper_bound=2 * n, backend="exact", heuristic=False,
        )

    monkeypatch.setattr(stabilizer_module, "generic_rank", strictly_increasing)
    with pytest.raises(ConsistencyError, match="no stabilization"):
        stabilize(se2, cfg)


def _check_random_actions(count):
    rng = np.random.default_rng(2024)
    cfg = SampleCfg(seed=5, trials=8)
    for _ in range(count):
        r, m = int(rng.integers(1, 6)), int(rng.integers(1, 4))
        spec = random_polynomial_action(rng, r=r, m=m, degree=int(rng.integers(0, 3)))
        report = stabilize(spec, cfg, extra_orders=1)
        assert report.n0 <= order_cap(spec, report.s[0])
        assert report.s_stab <= r
        assert all(later >= earlier + 1 for earlier, later in zip(report.s, report.s[1:]))
        for n, s_n in enumerate(report.s, start=1):
            assert s_n <= min(r, n * m)
        assert report.confirmation_rank == report.s_stab
        assert report.extended_s == [report.s_stab]


def test_random_actions_respect_the_order_bound():
    _check_random_actions(20)


@pytest.mark.slow
def test_random_actions_respect_the_order_bound_wide():
    _check_random_actions(200)


def _complete_random_bases(spec, count, cfg):
    rng = np.random.default_rng(99)
    report = stabilize(spec, cfg)
    for _ in range(count):
        base = tuple(Fraction(int(v), 1000) for v in rng.integers(-999, 1000, size=spec.m))
        completion = complete_tuple(spec, base, cfg, report)
        assert completion.rank == report.s_stab
        assert completion.n0 == report.n0
        assert len(completion.points) == report.n0 + 1


@pytest.mark.parametrize("name", ["se2", "gl3"])
def test_completion_from_random_base_points(gallery, cfg, name):
    _complete_random_bases(gallery[name], 10, cfg)


@pytest.mark.slow
@pytest.mark.parametrize("name", ["se2", "gl3"])
def test_completion_from_random_base_points_wide(gallery, cfg, name):
    _complete_random_bases(gallery[name], 100, cfg)
