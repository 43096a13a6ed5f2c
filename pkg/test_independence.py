from fractions import Fraction

import numpy as np
import pytest

from src.analyzers.diagnostics import effectiveness_on_region
from src.analyzers.independence import fiber_names, independence_on_region, induced_action_oracle
from src.errors import DimensionError
from src.jointmatrix import PointTuple, lie_matrix, wronskian_matrix
from src.models import Region, SampleCfg
from src.rankcore import matrix_rank
from src.sampling import CHECK_STREAM, random_polynomial_family, sample_points


def test_monomials_are_independent(gallery, cfg):
    family = gallery["monomials3"]
    report = independence_on_region(family, family.region("unit"), cfg)
    assert report.verdict == "independent"
    assert report.max_wronskian_rank == 3
    assert report.relation is None


def test_dependent_pair_has_an_integer_relation(gallery, cfg):
    family = gallery["dependent-pair"]
    report = independence_on_region(family, family.region("unit"), cfg)
    assert report.verdict == "dependent_on_region"
    assert report.backend == "exact"
    assert report.relation == ["2", "-1"]
    assert report.relations == [["2", "-1"]]
    assert report.relation_residual == 0.0


def test_bump_pair_depends_on_the_half_line(gallery, cfg, warnings_log):
    family = gallery["bump-pair"]
    report = independence_on_region(family, family.region("pos"), cfg)
    assert report.verdict == "heuristic_dependent"
    assert report.relation == [0.0, 1.0]
    assert report.relation_residual < 1e-10
    assert any("sampling only" in message for message in warnings_log.messages)


def test_bump_pair_is_independent_on_the_unit_interval(gallery, cfg):
    family = gallery["bump-pair"]
    assert independence_on_region(family, family.region("unit"), cfg).verdict == "independent"


def test_region_dimension(gallery, cfg):
    with pytest.raises(DimensionError):
        independence_on_region(gallery["monomials3"], Region.unit(2), cfg)


def test_oracle_generators(gallery):
    oracle = induced_action_oracle(gallery["monomials3"])
    assert oracle.name == "monomials3-translations"
    assert oracle.coords == ("x", "v1")
    assert [field.texts() for field in oracle.generators] == [["0", "1"], ["0", "x"], ["0", "x^2"]]
    assert oracle.region("unit").dim == 2
    pair = induced_action_oracle(gallery["dependent-pair"])
    assert pair.generators[1].texts() == ["0", "2*x"]


def test_fiber_names_avoid_base_coordinates(warnings_log):
    assert fiber_names(("x",), 2) == ("v1", "v2")
    assert fiber_names(("v1", "x"), 2) == ("v1_", "v2")
    assert warnings_log.messages


def _matched_ranks(family, n, cfg, trial, exact):
    oracle = induced_action_oracle(family)
    points = sample_points(Region.unit(oracle.m), n, cfg, trial, exact, CHECK_STREAM)
    base = PointTuple(tuple(p[:family.p] for p in points.points), exact)
    lifted = matrix_rank(lie_matrix(oracle, points, exact), cfg.tol).rank
    return lifted, matrix_rank(wronskian_matrix(family, base, exact), cfg.tol).rank


@pytest.mark.parametrize("name, exact", [("monomials3", True), ("dependent-pair", True), ("bump-pair", False)])
def test_oracle_rank_matches_the_wronskian_on_fixtures(gallery, name, exact):
    family = gallery[name]
    cfg = SampleCfg(seed=8, trials=1)
    for n in range(1, family.r + 2):
        for trial in range(3):
            lifted, wronskian = _matched_ranks(family, n, cfg, trial, exact)
            assert lifted == wronskian


def test_oracle_rank_matches_the_wronskian_on_random_families():
    rng = np.random.default_rng(77)
    cfg = SampleCfg(seed=8, trials=1)
    for k in range(20):
        r = int(rng.integers(1, 5))
        family = random_polynomial_family(rng, r=r, q=int(rng.integers(1, 3)), degree=int(rng.integers(0, 4)))
        for n in range(1, r + 2):
            lifted, wronskian = _matched_ranks(family, n, cfg, k, True)
            assert lifted == wronskian


@pytest.mark.parametrize("name, exact", [("monomials3", True), ("bump-pair", False)])
def test_oracle_ignores_fiber_coordinates(gallery, name, exact):
    family = gallery[name]
    oracle = induced_action_oracle(family)
    points = sample_points(Region.unit(oracle.m), 3, SampleCfg(seed=3), 0, exact, CHECK_STREAM)
    shift = Fraction(37, 100) if exact else 0.37
    moved = PointTuple(tuple(p[:family.p] + tuple(v + shift for v in p[family.p:]) for p in points.points), exact)
    assert moved != points
    assert lie_matrix(oracle, moved, exact).entries == lie_matrix(oracle, points, exact).entries


@pytest.mark.parametrize(
    "name, verdict, effective",
    [("monomials3", "independent", "effective"), ("dependent-pair", "dependent_on_region", "not_effective")],
)
def test_independence_matches_effectiveness_of_the_oracle(gallery, cfg, name, verdict, effective):
    family = gallery[name]
    oracle = induced_action_oracle(family)
    assert independence_on_region(family, family.region("unit"), cfg).verdict == verdict
    report = effectiveness_on_region(oracle, oracle.region("unit"), cfg)
    assert report.verdict == effective
    if effective == "not_effective":
        assert report.trivial_directions == [[2, -1]]
