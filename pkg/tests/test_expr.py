import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ktune.errors import ConstraintSyntaxError, DivisionByZero, UnknownParameter
from ktune.expr import BinOp, Expression, evaluate, parse_constraint, evaluate_constraint, tokenize
from ktune.space import SearchSpace

from oracles import c_div, c_mod

NAMES = ("a", "b", "c")


def test_workgroup_product_limit():
    expr = parse_constraint("Xwg*Ywg <= 1024")
    assert evaluate_constraint(expr, {"Xwg": 128, "Ywg": 4})
    assert evaluate_constraint(expr, {"Xwg": 4, "Ywg": 128})
    assert not evaluate_constraint(expr, {"Xwg": 128, "Ywg": 128})


def test_single_comparison_ast():
    space = SearchSpace().add_parameter("Xwg", [8, 16]).add_parameter("Ywg", [8, 16])
    expr = parse_constraint("Xwg * Ywg <= 1024", space)
    assert isinstance(expr.ast, BinOp) and expr.ast.op == "<="
    assert expr.names == ("Xwg", "Ywg")


def test_modulo_example():
    assert evaluate_constraint(parse_constraint("Xwpt % VW == 0"), {"Xwpt": 4, "VW": 2})


def test_syntax_error_offset():
    with pytest.raises(ConstraintSyntaxError) as e:
        parse_constraint("Xwg &* 2")
    assert e.value.position == 4
    assert e.value.expected


@pytest.mark.parametrize(
    "text, pos",
    [("", 0), ("a +", 3), ("(a", 2), ("a b", 2), ("a $ 1", 2), ("a < b < c", 6), ("1 ==", 4)],
)
def test_syntax_errors(text, pos):
    with pytest.raises(ConstraintSyntaxError) as e:
        parse_constraint(text)
    assert e.value.position == pos


def test_unknown_parameter():
    space = SearchSpace().add_parameter("A", [1])
    with pytest.raises(UnknownParameter):
        parse_constraint("A + B > 0", space)


def test_division_by_zero_reports_subexpression():
    expr = parse_constraint("A % B == 0")
    with pytest.raises(DivisionByZero) as e:
        evaluate_constraint(expr, {"A": 3, "B": 0})
    assert "A % B" in e.value.subexpression
    with pytest.raises(DivisionByZero):
        Expression("A / B")({"A": 3, "B": 0})


@pytest.mark.parametrize(
    "text, value",
    [
        ("1 + 2 * 3", 7),
        ("(1 + 2) * 3", 9),
        ("7 / 2", 3),
        ("0 - 7 / 2", -3),
        ("(0 - 7) / 2", -3),
        ("(0 - 7) % 3", -1),
        ("7 % (0 - 3)", 1),
        ("!0 + 1", 2),
        ("!(1 == 1)", 0),
        ("1 || 0 && 0", 1),
        ("(2 > 1) == 1", 1),
        ("10 - 2 - 3", 5),
        ("64 / 4 / 2", 8),
    ],
)
def test_precedence_and_integer_semantics(text, value):
    assert Expression(text).value({}) == value


def test_whitespace_insignificant():
    a = Expression("a*b<=1024&&!(a%2)")
    b = Expression("  a * b <= 1024 &&  ! ( a % 2 ) ")
    env = {"a": 6, "b": 3}
    assert a.value(env) == b.value(env) == 1


def test_tokens_cover_text():
    toks = tokenize("Xwg<=64")
    assert [t.text for t in toks if t.text] == ["Xwg", "<=", "64"]


# --- property: compiled evaluation == tree walk == independent oracle ---------

_BIN = ["+", "-", "*", "/", "%", "==", "!=", "<", "<=", ">", ">=", "&&", "||"]


def _ast():
    leaf = st.one_of(
        st.integers(0, 20).map(lambda n: ("num", n)),
        st.sampled_from(NAMES).map(lambda n: ("name", n)),
    )
    return st.recursive(
        leaf,
        lambda kids: st.one_of(
            st.tuples(st.just("not"), kids),
            st.tuples(st.just("bin"), st.sampled_from(_BIN), kids, kids),
        ),
        max_leaves=12,
    )


def _render(node) -> str:
    kind = node[0]
    if kind == "num":
        return str(node[1])
    if kind == "name":
        return node[1]
    if kind == "not":
        return f"!({_render(node[1])})"
    return f"({_render(node[2])} {node[1]} {_render(node[3])})"


def _oracle(node, env):
    kind = node[0]
    if kind == "num":
        return node[1]
    if kind == "name":
        return env[node[1]]
    if kind == "not":
        return int(_oracle(node[1], env) == 0)
    op, a, b = node[1], _oracle(node[2], env), None
    if op == "&&":
        return int(a != 0 and _oracle(node[3], env) != 0)
    if op == "||":
        return int(a != 0 or _oracle(node[3], env) != 0)
    b = _oracle(node[3], env)
    if op in ("/", "%"):
        if b == 0:
            raise ZeroDivisionError
        return c_div(a, b) if op == "/" else c_mod(a, b)
    return {
        "+": lambda: a + b,
        "-": lambda: a - b,
        "*": lambda: a * b,
        "==": lambda: int(a == b),
        "!=": lambda: int(a != b),
        "<": lambda: int(a < b),
        "<=": lambda: int(a <= b),
        ">": lambda: int(a > b),
        ">=": lambda: int(a >= b),
    }[op]()


@settings(max_examples=400, deadline=None)
@given(_ast(), st.fixed_dictionaries({n: st.integers(0, 50) for n in NAMES}))
def test_compiled_matches_tree_and_oracle(node, env):
    text = _render(node)
    expr = Expression(text)
    try:
        want = _oracle(node, env)
    except ZeroDivisionError:
        with pytest.raises(DivisionByZero):
            expr.value(env)
        with pytest.raises(DivisionByZero):
            evaluate(expr.ast, env)
        return
    assert expr.value(env) == want
    assert evaluate(expr.ast, env) == want
    assert expr(env) == (want != 0)


@settings(max_examples=200, deadline=None)
@given(_ast())
def test_printed_tree_reparses_to_same_function(node):
    expr = Expression(_render(node))
    again = Expression(str(expr))
    env = {"a": 3, "b": 5, "c": 0}
    try:
        want = expr.value(env)
    except DivisionByZero:
        return
    assert again.value(env) == want
