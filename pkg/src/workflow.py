import json
import time
from typing import Any, Callable, Dict, Optional

from pydantic import ValidationError

from .analyzers.diagnostics import (
    check_det_invariance,
    check_rank_invariance,
    effectiveness_on_region,
    isotropy_profile,
    lie_determinant,
    local_freeness_check,
)
from .analyzers.independence import independence_on_region
from .analyzers.stabilizer import complete_tuple, stabilize
from .config import Config
from .errors import ConsistencyError, InputError, SpecFormatError
from .jointmatrix import PointTuple, lie_matrix, wronskian_matrix
from .models import ActionSpec, FunctionFamily, Region, RunReport, SampleCfg, to_payload
from .observability import collecting_warnings, get_logger
from .rankcore import generic_rank, generic_wronskian_rank, matrix_rank
from .sampling import parse_box, parse_points
from .spec_store import Document, SpecStore

logger = get_logger(__name__)


class AnalysisWorkflow:
    """Runs one analysis per CLI command and wraps the result in a RunReport"""

    def __init__(self, store: Optional[SpecStore] = None):
        self.store = store or SpecStore()

    def _run(
        self,
        command: str,
        cfg: SampleCfg,
        source: Optional[str],
        action: Callable[[Optional[Document]], Dict[str, Any]],
    ) -> RunReport:
        start = time.perf_counter()
        digest, document = None, None
        with collecting_warnings() as collector:
            if source is not None:
                loaded = self.store.read(source)
                digest, document = loaded["digest"], loaded["document"]
            try:
                result = action(document)
            except ValidationError as e:
                message = e.errors()[0]["msg"]
                raise ConsistencyError(f"{command} produced an inconsistent result: {message}", {"command": command})
        exit_code = 0 if result.pop("_passed", True) else 3
        return RunReport(
            version=Config.VERSION,
            command=command,
            input_digest=digest,
            cfg=cfg.echo(),
            result=to_payload(result),
            warnings=collector.messages,
            timing_ms=round((time.perf_counter() - start) * 1000, 3),
            exit_code=exit_code,
        )

    # -- helpers ---------------------------------------------------------------

    @staticmethod
    def _action(document: Document) -> ActionSpec:
        if not isinstance(document, ActionSpec):
            raise SpecFormatError(f"'{document.name}' is a function family; this command needs an action")
        return document

    @staticmethod
    def _family(document: Document) -> FunctionFamily:
        if not isinstance(document, FunctionFamily):
            raise SpecFormatError(f"'{document.name}' is an action; this command needs a function family")
        return document

    @staticmethod
    def _dim(document: Document) -> int:
        return document.m if isinstance(document, ActionSpec) else document.p

    def _region(self, document: Document, cfg: SampleCfg, region: Optional[str]) -> Region:
        dim = self._dim(document)
        if region is None:
            return cfg.box_for(dim)
        if "," in region:
            return parse_box(region, dim)
        if region not in document.regions:
            known = ", ".join(sorted(document.regions)) or "none"
            raise InputError(f"Unknown region '{region}' (declared: {known})")
        return document.regions[region]

    @staticmethod
    def _points(document: Document, text: str, order: Optional[int] = None) -> PointTuple:
        return parse_points(text, AnalysisWorkflow._dim(document), order)

    # -- commands --------------------------------------------------------------

    def stabilize(self, source: str, cfg: SampleCfg, extra_orders: int = 0) -> RunReport:
        def action(document):
            return stabilize(self._action(document), cfg, extra_orders).model_dump()
        return self._run("stabilize", cfg, source, action)

    def rank(
        self,
        source: str,
        cfg: SampleCfg,
        order: Optional[int] = None,
        points: Optional[str] = None,
        dump_matrix: bool = False,
    ) -> RunReport:
        def action(document):
            if points is None:
                if order is None:
                    raise InputError("rank needs --order or --points")
                if isinstance(document, ActionSpec):
                    sampled = generic_rank(document, order, cfg)
                else:
                    sampled = generic_wronskian_rank(document, order, cfg)
                result = {"order": order, "rank": sampled.rank, "sampled": True,
                          "measurement": sampled.measurement()}
                tuple_ = sampled.witness
            else:
                tuple_ = self._points(document, points, order)
                result = {"order": tuple_.order, "sampled": False}
            build = lie_matrix if isinstance(document, ActionSpec) else wronskian_matrix
            mat = build(document, tuple_, cfg.exact)
            report = matrix_rank(mat, cfg.tol)
            result.update(rank=report.rank, rank_report=report, points=mat.points.payload())
            if dump_matrix:
                result["matrix"] = mat.dump()
            return result
        return self._run("rank", cfg, source, action)

    def effective(self, source: str, cfg: SampleCfg, region: Optional[str] = None) -> RunReport:
        def action(document):
            spec = self._action(document)
            return effectiveness_on_region(spec, self._region(spec, cfg, region), cfg).model_dump()
        return self._run("effective", cfg, source, action)

    def independent(self, source: str, cfg: SampleCfg, region: Optional[str] = None) -> RunReport:
        def action(document):
            family = self._family(document)
            return independence_on_region(family, self._region(family, cfg, region), cfg).model_dump()
        return self._run("independent", cfg, source, action)

    def invariants(self, source: str, cfg: SampleCfg, order: int) -> RunReport:
        def action(document):
            spec = self._action(document)
            sampled = generic_rank(spec, order, cfg)
            return {
                "order": order,
                "count": order * spec.m - sampled.rank,
                "s_n": sampled.rank,
                "nm": order * spec.m,
                "witness": sampled.witness.payload(),
            }
        return self._run("invariants", cfg, source, action)

    def check_invariance(self, source: str, cfg: SampleCfg, order: int = 2, flows: int = 10) -> RunReport:
        def action(document):
            spec = self._action(document)
            ranks = check_rank_invariance(spec, order, cfg, flows=flows)
            det = check_det_invariance(spec, cfg, flows=flows)
            return {"rank": ranks, "det": det, "_passed": ranks.passed and (det.skipped or det.passed)}
        return self._run("check-invariance", cfg, source, action)

    def lie_det(self, source: str, cfg: SampleCfg, points: Optional[str] = None) -> RunReport:
        def action(document):
            spec = self._action(document)
            if points is None:
                if spec.r % spec.m:
                    raise InputError(f"no square Lie matrix: r = {spec.r} is not a multiple of m = {spec.m}")
                tuple_ = generic_rank(spec, spec.r // spec.m, cfg).witness
            else:
                tuple_ = self._points(spec, points)
            return lie_determinant(spec, tuple_, cfg.exact).model_dump()
        return self._run("lie-det", cfg, source, action)

    def complete_tuple(self, source: str, cfg: SampleCfg, point: str) -> RunReport:
        def action(document):
            spec = self._action(document)
            z1 = self._points(spec, point, 1).points[0]
            return complete_tuple(spec, z1, cfg).model_dump()
        return self._run("complete-tuple", cfg, source, action)

    def freeness(self, source: str, cfg: SampleCfg, points: str) -> RunReport:
        def action(document):
            spec = self._action(document)
            return local_freeness_check(spec, self._points(spec, points), cfg).model_dump()
        return self._run("freeness", cfg, source, action)

    def isotropy(
        self, source: str, cfg: SampleCfg, region: Optional[str] = None, max_order: Optional[int] = None
    ) -> RunReport:
        def action(document):
            spec = self._action(document)
            profile = isotropy_profile(spec, self._region(spec, cfg, region), cfg, max_order)
            return {**profile.model_dump(), "non_increasing": profile.non_increasing}
        return self._run("isotropy", cfg, source, action)

    def examples(self, cfg: SampleCfg, name: Optional[str] = None) -> RunReport:
        def action(_):
            if name is None:
                return {"fixtures": self.store.list_fixtures()}
            text = self.store.fixture_text(name)
            self.store.builtin_fixture(name)
            return {"name": name, "path": self.store.fixture_path(name), "document": json.loads(text)}
        return self._run("examples", cfg, None, action)
