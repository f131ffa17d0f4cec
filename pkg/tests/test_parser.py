"""Tests for parser module."""

import math

import numpy as np
import pytest

from routh_dirac.autodiff import gradient
from routh_dirac.errors import ParseError, PotentialDomainError
from routh_dirac.parser import parse_key_value_pairs, parse_potential, univariate


def test_parse_key_value_pairs_empty():
    """Test parsing empty list returns empty dict."""
    result = parse_key_value_pairs([])
    assert result == {}


def test_parse_key_value_pairs_none():
    """Test parsing None returns empty dict."""
    result = parse_key_value_pairs(None)
    assert result == {}


def test_parse_key_value_pairs_string_values():
    """Test parsing string values."""
    result = parse_key_value_pairs(["potential=r^2/2", "label=run-1"])
    expected = {"potential": "r^2/2", "label": "run-1"}
    assert result == expected


def test_parse_key_value_pairs_boolean_values():
    """Test parsing boolean values."""
    result = parse_key_value_pairs(["constraints=true", "verify=false"])
    expected = {"constraints": True, "verify": False}
    assert result == expected


def test_parse_key_value_pairs_numeric_values():
    """Test parsing numeric values."""
    result = parse_key_value_pairs(["count=3", "m2=0.5"])
    expected = {"count": 3, "m2": 0.5}
    assert result == expected


def test_parse_key_value_pairs_list_values():
    """Test parsing comma-separated numbers as float lists."""
    result = parse_key_value_pairs(["mu=0,0,1", "gamma=1, -2.5"])
    expected = {"mu": [0.0, 0.0, 1.0], "gamma": [1.0, -2.5]}
    assert result == expected


def test_parse_key_value_pairs_quoted_values():
    """Test parsing quoted values."""
    result = parse_key_value_pairs(['"potential"="x^2 / 2"', "'label'='cyclic'"])
    expected = {"potential": "x^2 / 2", "label": "cyclic"}
    assert result == expected


def test_parse_key_value_pairs_malformed(caplog):
    """Test parsing malformed entries logs warnings."""
    result = parse_key_value_pairs(["malformed", "valid=value"])
    expected = {"valid": "value"}
    assert result == expected
    assert "Ignoring malformed parameter 'malformed'" in caplog.text


class TestPotentialParsing:
    """Tests for the expression grammar."""

    @pytest.mark.parametrize(
        "text,expected",
        [
            ("2+3*4", 14.0),
            ("(2+3)*4", 20.0),
            ("2^3^2", 512.0),
            ("-2^2", -4.0),
            ("2^-1", 0.5),
            ("1e-3*1000", 1.0),
            ("8/4/2", 1.0),
            ("exp(0) + cos(0) + sqrt(4)", 4.0),
        ],
    )
    def test_constant_expressions(self, text, expected):
        """Test precedence and associativity."""
        assert parse_potential(text).evaluate({}) == pytest.approx(expected)

    def test_variables(self):
        """Test evaluation with named variables."""
        expr = parse_potential("x^2/2 + y*sin(x)")
        assert expr.variables == ("x", "y")
        assert expr(x=3.0, y=0.0) == pytest.approx(4.5)

    def test_dual_evaluation(self):
        """Test that expressions accept dual numbers."""
        expr = parse_potential("x^3")
        _, grad = gradient(lambda z: expr.evaluate({"x": z[0]}), [2.0])
        assert grad[0] == pytest.approx(12.0)

    def test_missing_variable(self):
        """Test evaluation without a binding."""
        with pytest.raises(KeyError, match="No value for variable 'x'"):
            parse_potential("x + 1").evaluate({})

    def test_unexpected_token(self):
        """Test the offset and expected set of a syntax error."""
        with pytest.raises(ParseError) as excinfo:
            parse_potential("x + * 2")
        assert excinfo.value.offset == 4
        assert "number" in excinfo.value.expected

    def test_unbalanced_parenthesis(self):
        """Test a missing closing parenthesis."""
        with pytest.raises(ParseError) as excinfo:
            parse_potential("(x")
        assert excinfo.value.expected == frozenset({")"})
        assert excinfo.value.offset == 2

    def test_unknown_function(self):
        """Test that only the built-in functions may be called."""
        with pytest.raises(ParseError, match="Unknown function 'foo'"):
            parse_potential("foo(x)")

    def test_empty_expression(self):
        """Test that an empty expression is rejected."""
        with pytest.raises(ParseError, match="Empty expression"):
            parse_potential("   ")

    def test_trailing_input(self):
        """Test that trailing tokens are rejected."""
        with pytest.raises(ParseError, match="Unexpected"):
            parse_potential("x y")

    def test_univariate(self):
        """Test that potentials may only depend on their coordinate."""
        assert univariate(parse_potential("x^2"), "x").variables == ("x",)
        with pytest.raises(ValueError, match="must depend on 'x' only"):
            univariate(parse_potential("x*y"), "x")


class TestPotentialDomain:
    """Tests for domain errors during evaluation."""

    def test_log_of_negative(self):
        """Test ln outside its domain."""
        with pytest.raises(PotentialDomainError):
            parse_potential("ln(x)")(x=-1.0)

    def test_division_by_zero(self):
        """Test division by a zero denominator."""
        with pytest.raises(PotentialDomainError, match="Division by zero"):
            parse_potential("1/x")(x=0.0)

    def test_sqrt_of_negative(self):
        """Test sqrt outside its domain."""
        with pytest.raises(PotentialDomainError):
            parse_potential("sqrt(x - 2)")(x=1.0)


class TestSymbolicDerivative:
    """Tests for derivatives and printing."""

    def test_power_rule(self):
        """Test d/dx x^3 = 3 x^2."""
        derivative = parse_potential("x^3").derivative("x")
        assert str(derivative) == "3 * x^2"
        assert derivative(x=2.0) == pytest.approx(12.0)

    def test_product_with_function(self):
        """Test d/dy sin(x) y = sin(x)."""
        derivative = parse_potential("sin(x)*y").derivative("y")
        assert str(derivative) == "sin(x)"

    def test_chain_rule_matches_dual_numbers(self):
        """Test symbolic and dual derivatives of a composite expression."""
        expr = parse_potential("exp(-r^2/2) * ln(1 + r^2) + sqrt(r)")
        symbolic = expr.derivative("r")
        for r in np.linspace(0.5, 2.0, 7):
            _, grad = gradient(lambda z: expr.evaluate({"r": z[0]}), [r])
            assert symbolic(r=r) == pytest.approx(grad[0], rel=1e-10)

    def test_printing_round_trip(self):
        """Test that printed expressions parse back to the same tree."""
        for text in ("a - (b - c)", "(a + b)^2", "-(x + 1)", "2^(-1)", "x / (y * z)"):
            expr = parse_potential(text)
            assert parse_potential(str(expr)).tree == expr.tree
        assert str(parse_potential("a-(b-c)")) == "a - (b - c)"

    def test_constant_derivative(self):
        """Test that an expression without the variable has zero derivative."""
        assert parse_potential("y^2").derivative("x")(y=1.0) == 0.0
        assert math.isclose(parse_potential("2*x").derivative("x").evaluate({}), 2.0)
