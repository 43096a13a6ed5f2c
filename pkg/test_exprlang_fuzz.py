import pytest

hypothesis = pytest.importorskip("hypothesis")
from hypothesis import given, settings, strategies as st

from src.errors import JointOrbitError
from src.exprlang import eval_float, parse, to_poly, to_text

COORDS = ["x", "y"]

pieces = st.sampled_from(
    ["x", "y", "z", "1", "2.5", ".5", "1e3", "1e400", "+", "-", "*", "/", "^", "^2", "(", ")", " ",
     "sin(", "sqrt(", "hstep(", "abs", ",", "$", "((", "))", "--", "x^", "9" * 20]
)
fragments = st.lists(pieces, max_size=40).map("".join)
nested = st.tuples(st.integers(min_value=0, max_value=3000), st.sampled_from(["(", "-", "sin(", "abs("])).map(
    lambda pair: pair[1] * pair[0] + "x" + (")" * pair[0] if pair[1].endswith("(") else "")
)


def _total(text):
    try:
        e = parse(text, COORDS)
    except JointOrbitError:
        return None
    return e


@settings(max_examples=300, deadline=None)
@given(st.one_of(st.text(max_size=60), fragments))
def test_parse_either_succeeds_or_raises_a_located_error(text):
    e = _total(text)
    if e is None:
        return
    assert parse(to_text(e), COORDS) == e
    try:
        value = eval_float(e, (0.5, -1.5))
    except JointOrbitError:
        return
    assert isinstance(value, float)
    to_poly(e)


@settings(max_examples=50, deadline=None)
@given(nested)
def test_nesting_never_escapes_the_error_contract(text):
    e = _total(text)
    if e is not None:
        eval_float(e, (0.5, 0.5))
