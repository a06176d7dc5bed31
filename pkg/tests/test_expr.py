import numpy as np
import pytest

from mixloc.expr import Expression, ExpressionError

NODES = np.array([[0.1], [0.5], [0.8]])
D = np.array([0.1, 0.5, 0.2])


@pytest.mark.parametrize(
    "text,expected",
    [
        ("1 + 2 * 3", 7.0),
        ("2 ^ 3 ^ 2", 2.0**9),
        ("-2 ^ 2", -4.0),
        ("(1 + 2) * 3", 9.0),
        ("8 / 4 / 2", 1.0),
        ("1e-3 * 2", 2e-3),
        (".5 + +1", 1.5),
        ("exp(0) + sin(0) + cos(0)", 2.0),
        ("2*pi", 2 * np.pi),
    ],
)
def test_constant_arithmetic(text, expected):
    np.testing.assert_allclose(Expression(text)(0.0, NODES, D), expected)


def test_variables():
    e = Expression("t * x + d^2 - exp(-t) * sin(pi * x)")
    t = 0.3
    x = NODES[:, 0]
    np.testing.assert_allclose(e(t, NODES, D), t * x + D**2 - np.exp(-t) * np.sin(np.pi * x))
    assert e.variables == {"t", "x", "d"}


def test_y_in_2d_only():
    e = Expression("x + y")
    np.testing.assert_allclose(e(0, np.array([[0.1, 0.2]]), np.array([0.1])), [0.3])
    with pytest.raises(ExpressionError):
        e(0, NODES, D)


@pytest.mark.parametrize("text", ["", "1 +", "foo(1)", "z", "1 $ 2", "(1", "1 2", "sin 1", "3)"])
def test_rejects_malformed(text):
    with pytest.raises(ExpressionError):
        Expression(text)


def test_non_finite_value_rejected():
    with pytest.raises(ExpressionError):
        Expression("1 / (x - 0.5)")(0.0, NODES, D)
