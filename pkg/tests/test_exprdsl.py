import math

import pytest
from hypothesis import given, strategies as st

from impiss import exprdsl
from impiss.exprdsl import (DomainError, ExprSyntaxError, NonFiniteResult, UnknownIdentifier,
                            compile_expr, evaluate, free_vars, parse, substitute, to_text)


def test_flow_map_of_scalar_family_parses():
    node = parse("-2*abs(x)^lam*sign(x) + u^lam", ["x", "u", "lam"])
    assert free_vars(node) == {"x", "u", "lam"}
    assert evaluate(node, {"x": -1.5, "u": 2.0, "lam": 2.0}) == pytest.approx(2 * 2.25 + 4.0)


def test_precedence_and_right_associative_power():
    assert evaluate(parse("2^3^2", []), {}) == 2.0 ** 9
    assert evaluate(parse("-2^2", []), {}) == -4.0
    assert evaluate(parse("1 + 2*3 - 4/2", []), {}) == 5.0


def test_if_le_evaluates_selected_branch_only():
    node = parse("if_le(x, 0, 0, ln(x))", ["x"])
    assert evaluate(node, {"x": -1.0}) == 0.0
    assert evaluate(node, {"x": math.e}) == pytest.approx(1.0)


@pytest.mark.parametrize("text,exc", [("1 +", ExprSyntaxError), ("foo(1)", UnknownIdentifier),
                                      ("y + 1", UnknownIdentifier), ("min(1)", ExprSyntaxError),
                                      ("2 $ 3", ExprSyntaxError)])
def test_rejects_bad_input(text, exc):
    with pytest.raises(exc):
        parse(text, ["x"])


@pytest.mark.parametrize("text,env", [("1/x", {"x": 0.0}), ("ln(x)", {"x": 0.0}),
                                      ("sqrt(x)", {"x": -1.0}), ("x^0.5", {"x": -2.0})])
def test_domain_errors(text, env):
    with pytest.raises(DomainError):
        evaluate(parse(text, ["x"]), env)


def test_nan_is_reported():
    with pytest.raises(NonFiniteResult):
        evaluate(parse("exp(x) - exp(x)", ["x"]), {"x": 1000.0})


def test_substitute_replaces_variables():
    node = substitute(parse("r^2 + r", ["r"]), {"r": parse("abs(x1)", ["x1"])})
    assert evaluate(node, {"x1": -3.0}) == 12.0


_atoms = st.sampled_from(["x", "y", "2", "0.5", "3.25"])


@st.composite
def _texts(draw, depth=3):
    if depth == 0:
        return draw(_atoms)
    kind = draw(st.integers(0, 4))
    a = draw(_texts(depth=depth - 1))
    b = draw(_texts(depth=depth - 1))
    if kind == 0:
        return f"({a} {draw(st.sampled_from(['+', '-', '*']))} {b})"
    if kind == 1:
        return f"{draw(st.sampled_from(['abs', 'sign']))}({a})"
    if kind == 2:
        return f"{draw(st.sampled_from(['min', 'max']))}({a}, {b})"
    if kind == 3:
        return f"if_le({a}, {b}, {b}, {a})"
    return f"-{a}"


@given(_texts(), st.floats(-5, 5), st.floats(-5, 5))
def test_compiled_matches_tree_walker_and_printer_round_trips(text, x, y):
    node = parse(text, ["x", "y"])
    env = {"x": x, "y": y}
    want = evaluate(node, env)
    assert compile_expr(node, ["x", "y"])(x, y) == want
    again = parse(to_text(node), ["x", "y"])
    assert evaluate(again, env) == want


def test_function_table_is_exposed():
    assert exprdsl.FUNCTIONS["if_le"] == 4
