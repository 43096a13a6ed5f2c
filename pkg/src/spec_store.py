"""
Spec file I/O and the built-in fixture gallery.

Action file:   {"kind": "action", "name", "dim", "coordinates", "generators",
                "regions"?, "notes"?, "analytic"?}
Function file: {"kind": "functions", "name", "xdim", "xcoordinates", "qdim",
                "functions", "regions"?, "notes"?}
"""

import hashlib
import json
import os
from typing import Any, Dict, List, Optional, Union

from pydantic import ValidationError

from .config import Config
from .errors import (
    ArityError,
    ExprSyntaxError,
    FixtureNotFoundError,
    InputError,
    SpecFormatError,
)
from .exprlang import Expr, parse, to_text, validate_coords
from .models import ActionSpec, FunctionFamily, Region, VectorField

Document = Union[ActionSpec, FunctionFamily]

GALLERY = ("se2", "gl3", "sim2", "polar", "bump", "monomials3", "dependent-pair")
SUPPLEMENTARY = ("translation1", "bump-pair")

_ACTION_KEYS = {"kind", "name", "dim", "coordinates", "generators", "regions", "notes", "analytic"}
_FUNCTION_KEYS = {"kind", "name", "xdim", "xcoordinates", "qdim", "functions", "regions", "notes"}


class SpecStore:
    def __init__(self, fixtures_dir: Optional[str] = None):
        self.fixtures_dir = fixtures_dir or Config.FIXTURES_DIR

    def fixture_path(self, name: str) -> str:
        if name not in GALLERY + SUPPLEMENTARY:
            raise FixtureNotFoundError(f"Unknown fixture '{name}'", {"known": list(GALLERY)})
        return os.path.join(self.fixtures_dir, f"{name}.json")

    def list_fixtures(self) -> List[str]:
        return list(GALLERY)

    def fixture_text(self, name: str) -> str:
        path = self.fixture_path(name)
        with open(path, "r", encoding="utf-8") as file:
            return file.read()

    def builtin_fixture(self, name: str) -> Document:
        return load_document(self.fixture_text(name))

    def resolve_source(self, source: str) -> str:
        """Map a CLI argument to an existing file: path, path without .json, or fixture name"""
        candidates = [source, f"{source}.json"]
        base = os.path.basename(source)
        if base.endswith(".json"):
            base = base[:-5]
        if base in GALLERY + SUPPLEMENTARY:
            candidates.append(os.path.join(self.fixtures_dir, f"{base}.json"))
        for candidate in candidates:
            if os.path.isfile(candidate):
                return candidate
        raise SpecFormatError(f"Spec file not found: {source}", {"path": source})

    def read(self, source: str) -> Dict[str, Any]:
        """Return the parsed document together with its content digest"""
        path = self.resolve_source(source)
        with open(path, "rb") as file:
            raw = file.read()
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as e:
            raise SpecFormatError(f"{path} is not UTF-8: {e}", {"path": path})
        return {
            "path": path,
            "digest": hashlib.sha256(raw).hexdigest(),
            "document": load_document(text),
        }


def load_document(source: str) -> Document:
    """Parse a spec document from JSON text or a file path"""
    data = _read_json(source)
    kind = data.get("kind", "action")
    if kind == "action":
        return _build_action(data)
    if kind == "functions":
        return _build_family(data)
    raise SpecFormatError(f"Unknown document kind '{kind}'", {"kind": kind})


def load_spec(source: str) -> ActionSpec:
    document = load_document(source)
    if not isinstance(document, ActionSpec):
        raise SpecFormatError(f"'{document.name}' is a function family, not an action")
    return document


def load_family(source: str) -> FunctionFamily:
    document = load_document(source)
    if not isinstance(document, FunctionFamily):
        raise SpecFormatError(f"'{document.name}' is an action, not a function family")
    return document


def builtin_fixture(name: str) -> Document:
    return SpecStore().builtin_fixture(name)


def serialize_spec(spec: ActionSpec) -> str:
    data: Dict[str, Any] = {
        "kind": "action",
        "name": spec.name,
        "dim": spec.m,
        "coordinates": list(spec.coords),
        "generators": [field.texts() for field in spec.generators],
    }
    if spec.regions:
        data["regions"] = {name: [list(b) for b in region.bounds] for name, region in spec.regions.items()}
    if spec.notes:
        data["notes"] = spec.notes
    if spec.analytic_hint:
        data["analytic"] = True
    return json.dumps(data, indent=2, ensure_ascii=False) + "\n"


def serialize_family(family: FunctionFamily) -> str:
    data: Dict[str, Any] = {
        "kind": "functions",
        "name": family.name,
        "xdim": family.p,
        "xcoordinates": list(family.xcoords),
        "qdim": family.q,
        "functions": [[to_text(c) for c in components] for components in family.functions],
    }
    if family.regions:
        data["regions"] = {name: [list(b) for b in region.bounds] for name, region in family.regions.items()}
    if family.notes:
        data["notes"] = family.notes
    return json.dumps(data, indent=2, ensure_ascii=False) + "\n"


def _read_json(source: str) -> Dict[str, Any]:
    text = source
    if not source.lstrip().startswith("{"):
        if not os.path.isfile(source):
            raise SpecFormatError(f"Spec file not found: {source}", {"path": source})
        with open(source, "r", encoding="utf-8") as file:
            text = file.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise SpecFormatError(f"Malformed JSON at line {e.lineno}, column {e.colno}: {e.msg}",
                              {"line": e.lineno, "column": e.colno})
    if not isinstance(data, dict):
        raise SpecFormatError("A spec document must be a JSON object")
    return data


def _check_keys(data: Dict[str, Any], allowed: set, required: List[str]) -> None:
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise SpecFormatError(f"Unknown fields: {', '.join(unknown)}", {"fields": unknown})
    missing = [key for key in required if key not in data]
    if missing:
        raise SpecFormatError(f"Missing fields: {', '.join(missing)}", {"fields": missing})


def _coords(names: Any, dim: Any, label: str) -> tuple:
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
        raise SpecFormatError(f"'{label}' must be a positive integer")
    if not isinstance(names, list):
        raise SpecFormatError("coordinate names must be a list")
    try:
        coords = validate_coords(names)
    except InputError as e:
        raise SpecFormatError(e.message)
    if len(coords) != dim:
        raise ArityError(f"{len(coords)} coordinate names declared for {label} = {dim}")
    return coords


def _expressions(rows: Any, coords: tuple, width: int, label: str) -> List[List[Expr]]:
    if not isinstance(rows, list) or not rows:
        raise SpecFormatError(f"'{label}' must be a non-empty list")
    parsed = []
    for k, row in enumerate(rows):
        if not isinstance(row, list):
            raise SpecFormatError(f"{label}[{k}] must be a list of expression strings")
        if len(row) != width:
            raise ArityError(
                f"{label}[{k}] has {len(row)} entries, expected {width}",
                {"index": k, "entries": len(row), "expected": width},
            )
        exprs = []
        for i, text in enumerate(row):
            if not isinstance(text, str):
                raise SpecFormatError(f"{label}[{k}][{i}] must be a string")
            try:
                exprs.append(parse(text, coords))
            except ExprSyntaxError as e:
                where = f"{label}[{k}][{i}]"
                e.message = f"{where}: {e.message}"
                e.args = (e.message,)
                e.context["location"] = where
                raise
        parsed.append(exprs)
    return parsed


def _regions(data: Any, dim: int) -> Dict[str, Region]:
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise SpecFormatError("'regions' must be an object")
    regions = {}
    for name, bounds in data.items():
        if not isinstance(bounds, list) or len(bounds) != dim:
            raise ArityError(f"region '{name}' must have {dim} intervals")
        try:
            regions[name] = Region(bounds=[tuple(b) for b in bounds], name=name)
        except (ValidationError, TypeError) as e:
            raise SpecFormatError(f"region '{name}': {e}")
    return regions


def _build_action(data: Dict[str, Any]) -> ActionSpec:
    _check_keys(data, _ACTION_KEYS, ["name", "dim", "coordinates", "generators"])
    coords = _coords(data["coordinates"], data["dim"], "dim")
    rows = _expressions(data["generators"], coords, len(coords), "generators")
    try:
        return ActionSpec(
            name=str(data["name"]),
            m=len(coords),
            coords=coords,
            generators=tuple(VectorField(coefficients=tuple(row)) for row in rows),
            regions=_regions(data.get("regions"), len(coords)),
            analytic_hint=bool(data.get("analytic", False)),
            notes=str(data.get("notes", "")),
        )
    except ValidationError as e:
        raise SpecFormatError(str(e))


def _build_family(data: Dict[str, Any]) -> FunctionFamily:
    _check_keys(data, _FUNCTION_KEYS, ["name", "xdim", "xcoordinates", "qdim", "functions"])
    xcoords = _coords(data["xcoordinates"], data["xdim"], "xdim")
    q = data["qdim"]
    if not isinstance(q, int) or isinstance(q, bool) or q < 1:
        raise SpecFormatError("'qdim' must be a positive integer")
    rows = _expressions(data["functions"], xcoords, q, "functions")
    try:
        return FunctionFamily(
            name=str(data["name"]),
            p=len(xcoords),
            xcoords=xcoords,
            q=q,
            functions=tuple(tuple(row) for row in rows),
            regions=_regions(data.get("regions"), len(xcoords)),
            notes=str(data.get("notes", "")),
        )
    except ValidationError as e:
        raise SpecFormatError(str(e))
