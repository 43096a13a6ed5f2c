import math
from fractions import Fraction

import numpy as np
import pytest

import src.analyzers.diagnostics as diagnostics_module
from conftest import exact_tuple
from src.analyzers.diagnostics import (
    FREENESS_CAVEAT,
    check_det_invariance,
    check_rank_invariance,
    effectiveness_on_region,
    flow,
    flow_error,
    isotropy_profile,
    lie_determinant,
    local_freeness_check,
    sample_flows,
)
from src.config import Config
from src.errors import DimensionError, FlowDomainError
from src.models import FlowSpec, Region, SampleCfg
from src.spec_store import load_spec


def test_bump_is_not_effective_on_the_half_plane(gallery, cfg, warnings_log):
    bump = gallery["bump"]
    report = effectiveness_on_region(bump, bump.region("pos"), cfg)
    assert report.max_rank_found == 1
    assert report.verdict == "heuristic_not_effective"
    assert report.kernel_dim == 1
    assert warnings_log.messages


def test_bump_is_effective_on_the_symmetric_box(gallery, cfg):
    bump = gallery["bump"]
    report = effectiveness_on_region(bump, bump.region("sym"), cfg)
    assert report.max_rank_found == 2
    assert report.verdict == "effective"
    assert report.backend == "float"


def test_se2_is_effective(se2, cfg):
    report = effectiveness_on_region(se2, Region.unit(2), cfg)
    assert report.verdict == "effective"
    assert report.trivial_directions == []


def test_gl3_is_not_effective(gl3, cfg):
    report = effectiveness_on_region(gl3, Region.unit(2), cfg)
    assert report.verdict == "not_effective"
    assert report.max_rank_found == 8
    assert report.trivial_directions == [[1, 0, 0, 0, 1, 0, 0, 0, 1]]


def test_effectiveness_region_dimension(se2, cfg):
    with pytest.raises(DimensionError):
        effectiveness_on_region(se2, Region.unit(3), cfg)


def test_translation_flow(se2):
    assert flow(se2, FlowSpec(coeffs=[1, 0, 0]), (0, 0)) == pytest.approx((1.0, 0.0), abs=1e-12)


def test_rotation_flow(se2):
    end = flow(se2, FlowSpec(coeffs=[0, 0, 1], time=math.pi / 2), (1.0, 0.0))
    assert end == pytest.approx((0.0, -1.0), abs=1e-10)


def test_polar_flow_keeps_the_radius(polar):
    end = flow(polar, FlowSpec(coeffs=[1], time=math.pi / 2), (1.0, 0.0))
    assert end == pytest.approx((0.0, 1.0), abs=1e-9)
    assert math.hypot(*end) == pytest.approx(1.0, abs=1e-10)


def test_rk4_converges_at_fourth_order(se2):
    errors = []
    for steps in (64, 128, 256, 512):
        end = flow(se2, FlowSpec(coeffs=[0, 0, 1], time=2 * math.pi, steps=steps), (1.0, 0.0))
        errors.append(math.hypot(end[0] - 1.0, end[1]))
    for coarse, fine in zip(errors, errors[1:]):
        assert 12 <= coarse / fine <= 20


def test_step_doubling_estimate_is_small(se2):
    assert flow_error(se2, FlowSpec(coeffs=[0.1, 0.2, 0.3], steps=256), (0.5, -0.5)) < 1e-10


def test_flow_leaving_the_domain():
    spec = load_spec('{"name": "sink", "dim": 1, "coordinates": ["x"], "generators": [["sqrt(x)"]]}')
    with pytest.raises(FlowDomainError) as info:
        flow(spec, FlowSpec(coeffs=[-1], time=2.0, steps=100), (0.25,))
    assert info.value.step >= 45
    assert info.value.context["step"] == info.value.step


def test_flow_coefficient_count(se2):
    with pytest.raises(DimensionError):
        flow(se2, FlowSpec(coeffs=[1, 0]), (0, 0))


def test_sampled_flows_are_small_and_reproducible(gl3, cfg):
    flows = sample_flows(gl3, cfg, 6)
    assert flows == sample_flows(gl3, cfg, 6)
    for fs in flows:
        assert len(fs.coeffs) == 9
        assert np.linalg.norm(fs.coeffs) <= Config.FLOW_MAX_NORM + 1e-12
        assert fs.time == 1.0


def test_rank_invariance_se2(se2):
    cfg = SampleCfg(seed=42, trials=4)
    diagonal = exact_tuple((Fraction(1, 2), Fraction(1, 4)), (Fraction(1, 2), Fraction(1, 4)))
    report = check_rank_invariance(se2, 2, cfg, flows=3, tuples=2, extra_tuples=[diagonal])
    assert report.passed
    assert report.tuples == 3
    assert report.skipped == 0
    diagonal_checks = [c for c in report.checks if c.tuple_index == 2]
    assert {c.rank_before for c in diagonal_checks} == {2}
    assert {c.rank_after for c in diagonal_checks} == {2}


@pytest.mark.slow
def test_rank_invariance_gl3(gl3):
    report = check_rank_invariance(gl3, 4, SampleCfg(seed=42, trials=4), flows=10, tuples=5)
    assert report.passed


def test_lie_determinant(sim2, se2):
    assert lie_determinant(sim2, exact_tuple((0, 0), (1, 0))).value == "1"
    assert lie_determinant(sim2, exact_tuple((1, 2), (1, 2))).value == "0"
    with pytest.raises(DimensionError):
        lie_determinant(se2, exact_tuple((0, 0), (1, 0)))


def test_det_invariance_sim2(sim2, cfg):
    report = check_det_invariance(sim2, cfg, flows=3, tuples=2)
    assert report.passed
    assert report.variety_exact_zero is True
    assert report.variety_max_abs_det <= 1e-8
    assert report.generic_checks == 6
    assert report.generic_max_change_ratio < 10


def test_det_invariance_keeps_generic_tuples_away_from_zero(sim2, cfg):
    report = check_det_invariance(sim2, cfg, flows=10, tuples=3)
    assert report.passed
    assert report.variety_exact_zero is True
    assert report.variety_checks == 30
    assert report.variety_max_abs_det <= 1e-8
    assert report.generic_min_abs_det >= 1e-3


def test_det_invariance_fails_below_the_generic_floor(sim2, cfg, monkeypatch):
    monkeypatch.setattr(diagnostics_module, "GENERIC_MIN_ABS_DET", 1e6)
    report = check_det_invariance(sim2, cfg, flows=2, tuples=1)
    assert not report.passed
    assert report.generic_min_abs_det < 1e6
    assert report.variety_max_abs_det <= 1e-8


@pytest.mark.parametrize("name", ["se2", "translation1"])
def test_det_invariance_skips_non_square_orders(gallery, cfg, name):
    report = check_det_invariance(gallery[name], cfg)
    assert report.skipped
    assert report.passed
    assert report.message


def test_local_freeness(se2, cfg):
    free = local_freeness_check(se2, exact_tuple((0, 0), (1, 0)), cfg)
    assert free.verdict == "locally_free"
    assert free.caveat == FREENESS_CAVEAT
    single = local_freeness_check(se2, exact_tuple((0, 0)), cfg)
    assert single.verdict == "not_locally_free_here"
    assert single.rank == 2


def test_isotropy_profile(se2, cfg):
    profile = isotropy_profile(se2, Region.unit(2), cfg)
    assert profile.orders == [1, 2, 3, 4]
    assert profile.ranks == [2, 3, 3, 3]
    assert profile.kernel_dims == [1, 0, 0, 0]
    assert profile.non_increasing
