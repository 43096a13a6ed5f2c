from fractions import Fraction
from typing import Any, List, Optional, Sequence, Tuple

import numpy as np
from langgraph.graph import END, StateGraph
from typing_extensions import TypedDict

from ..errors import ConsistencyError, DimensionError
from ..exprlang import Expr, Num
from ..jointmatrix import wronskian_matrix
from ..models import ActionSpec, FunctionFamily, IndependenceReport, Region, SampleCfg, VectorField
from ..observability import get_logger, trace_analysis, warn
from ..rankcore import (
    GenericRankResult,
    exact_nullspace,
    float_nullspace,
    generic_wronskian_rank,
    primitive_integer_vector,
)
from ..sampling import CHECK_STREAM, sample_points

logger = get_logger(__name__)

RELATION_CHECK_POINTS = 100
FLOAT_RESIDUAL_TOL = 1e-10
CLEAN_TOL = 1e-12


class IndependenceState(TypedDict):
    family: FunctionFamily
    region: Region
    cfg: SampleCfg
    scan: Optional[GenericRankResult]
    report: Optional[IndependenceReport]


def _float_relation(vector: np.ndarray) -> List[float]:
    scaled = vector / vector[np.argmax(np.abs(vector))]
    scaled[np.abs(scaled) < CLEAN_TOL] = 0.0
    lead = next((v for v in scaled if v != 0), 1.0)
    if lead < 0:
        scaled = -scaled
    return [float(v) + 0.0 for v in scaled]


def relation_residual(
    family: FunctionFamily, region: Region, cfg: SampleCfg, relation: Sequence[Any], exact: bool
) -> float:
    """max |sum_k c_k f_k| over fresh sample points of the region"""
    points = sample_points(region, RELATION_CHECK_POINTS, cfg, 0, exact, CHECK_STREAM)
    mat = wronskian_matrix(family, points, exact)
    if exact:
        rows = mat.as_fractions()
        combined = [sum(Fraction(c) * row[j] for c, row in zip(relation, rows)) for j in range(mat.cols)]
        return float(max(abs(v) for v in combined))
    combined = np.asarray(relation, dtype=float) @ mat.as_array()
    return float(np.max(np.abs(combined)))


class IndependenceTester:
    def __init__(self):
        self.graph = self._build_graph()

    def _build_graph(self) -> StateGraph:
        workflow = StateGraph(IndependenceState)

        workflow.add_node("scan", self._scan_node)
        workflow.add_node("extract_relation", self._relation_node)

        workflow.set_entry_point("scan")
        workflow.add_edge("scan", "extract_relation")
        workflow.add_edge("extract_relation", END)

        return workflow.compile()

    def _scan_node(self, state: IndependenceState) -> dict:
        family = state["family"]
        scan = generic_wronskian_rank(family, family.r + 1, state["cfg"], region=state["region"])
        logger.debug("%s: Wronskian rank %d of %d", family.name, scan.rank, family.r)
        return {"scan": scan}

    def _relation_node(self, state: IndependenceState) -> dict:
        family, region, cfg, scan = state["family"], state["region"], state["cfg"], state["scan"]
        fields = dict(
            family_name=family.name,
            region=region,
            r=family.r,
            q=family.q,
            p=family.p,
            max_wronskian_rank=scan.rank,
            backend=scan.backend,
            witness=scan.witness.payload(),
            trials_used=scan.trials_used,
        )
        if scan.rank == family.r:
            return {"report": IndependenceReport(verdict="independent", **fields)}

        mat = wronskian_matrix(family, scan.witness, scan.witness.exact)
        if scan.backend == "exact":
            transposed = [list(column) for column in zip(*mat.as_fractions())]
            relations = [primitive_integer_vector(v) for v in exact_nullspace(transposed)]
            residuals = [relation_residual(family, region, cfg, c, True) for c in relations]
            if any(residuals):
                raise ConsistencyError(
                    f"{family.name}: extracted relation does not vanish at fresh points",
                    {"relations": relations},
                )
            return {"report": IndependenceReport(
                verdict="dependent_on_region",
                relation=[str(c) for c in relations[0]],
                relations=[[str(c) for c in rel] for rel in relations],
                relation_residual=0.0,
                **fields,
            )}

        basis = float_nullspace(mat.as_array().T, cfg.tol)
        relations = [_float_relation(basis[:, i]) for i in range(basis.shape[1])]
        residual = relation_residual(family, region, cfg, relations[0], False)
        if residual >= FLOAT_RESIDUAL_TOL:
            warn(f"{family.name}: relation residual {residual:.3g} at fresh points exceeds {FLOAT_RESIDUAL_TOL}")
        warn(f"{family.name}: dependence on region found by sampling only")
        return {"report": IndependenceReport(
            verdict="heuristic_dependent",
            relation=relations[0],
            relations=relations,
            relation_residual=residual,
            **fields,
        )}

    @trace_analysis("independence")
    def test(self, family: FunctionFamily, region: Region, cfg: SampleCfg) -> IndependenceReport:
        if region.dim != family.p:
            raise DimensionError(f"region lives in R^{region.dim}, the domain is R^{family.p}")
        initial_state = IndependenceState(family=family, region=region, cfg=cfg, scan=None, report=None)
        return self.graph.invoke(initial_state)["report"]


_tester: Optional[IndependenceTester] = None


def independence_on_region(family: FunctionFamily, region: Region, cfg: SampleCfg) -> IndependenceReport:
    """Linear independence on a box: some (r+1)-point Wronskian reaches rank r"""
    global _tester
    if _tester is None:
        _tester = IndependenceTester()
    return _tester.test(family, region, cfg)


def fiber_names(xcoords: Sequence[str], q: int) -> Tuple[str, ...]:
    names = []
    taken = set(xcoords)
    for l in range(1, q + 1):
        name = f"v{l}"
        while name in taken:
            name += "_"
        if name != f"v{l}":
            warn(f"fiber coordinate v{l} collides with a base coordinate; renamed to {name}")
        taken.add(name)
        names.append(name)
    return tuple(names)


def induced_action_oracle(family: FunctionFamily) -> ActionSpec:
    """Translations (x, v) -> (x, v + sum_k t_k f_k(x)) on X x R^q.

    The Lie matrix of this action has the rank of the family's Wronskian.
    """
    coords = tuple(family.xcoords) + fiber_names(family.xcoords, family.q)
    zero = Expr(Num(Fraction(0)), coords, "0")
    generators = tuple(
        VectorField(coefficients=(zero,) * family.p + tuple(Expr(c.tree, coords, c.source) for c in components))
        for components in family.functions
    )
    fiber = Region.unit(family.q)
    return ActionSpec(
        name=f"{family.name}-translations",
        m=len(coords),
        coords=coords,
        generators=generators,
        regions={name: region.product(fiber) for name, region in family.regions.items()},
        notes=f"translation action induced by the function family {family.name}",
    )
