import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oldroyd.errors import ExpressionError
from oldroyd.expr import compile_expr, evaluate, tokenize


@pytest.mark.parametrize("text,value", [
    ("1+2*3", 7.0), ("-2^2", -4.0), ("2^3^2", 512.0), ("2**-1", 0.5), ("(1+2)*3", 9.0),
    ("8/4/2", 1.0), ("1.5e2", 150.0), (".5", 0.5), ("pi", math.pi), ("e", math.e),
    ("sin(pi/2)", 1.0), ("cos(0) + exp(0)", 2.0), ("--3", 3.0), ("+4", 4.0),
])
def test_values(text, value):
    assert evaluate(text) == pytest.approx(value)


def test_variables_broadcast():
    fn = compile_expr("x * y + 1")
    x = np.linspace(0, 1, 5)
    assert np.allclose(fn(x, 2.0), 2 * x + 1)
    assert compile_expr("3")(x, x).shape == (5,)
    assert fn.source == "x * y + 1"


@pytest.mark.parametrize("bad", ["", "1 +", "(1", "1)", "foo", "sin 1", "2 $ 3", "sin()", "1 2"])
def test_rejects(bad):
    with pytest.raises(ExpressionError):
        compile_expr(bad)


@given(st.integers(-50, 50), st.integers(-50, 50), st.integers(1, 50))
def test_matches_python_arithmetic(a, b, c):
    assert evaluate(f"{a} - ({b}) * {c} / {c}") == pytest.approx(a - b)
    assert evaluate(f"({a}) + ({b}) * {c}") == a + b * c


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_trig_identity(x, y):
    fn = compile_expr("sin(x)^2 + cos(x)^2 - y + y")
    assert float(fn(x, y)) == pytest.approx(1.0)


def test_tokens():
    assert tokenize("2**x")[1] == ("op", "^")
