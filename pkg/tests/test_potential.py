# Oracle: symbolic gradients against central finite differences and
# closed-form derivatives.

import numpy as np
import pytest

from ridk.potential import Potential, parse_potential


def fd_grad(pot, pts, h=1e-6):
    pts = np.asarray(pts, dtype=float)
    out = np.empty_like(pts)
    for k in range(pts.shape[-1]):
        up, dn = pts.copy(), pts.copy()
        up[..., k] += h
        dn[..., k] -= h
        out[..., k] = (pot.value(up) - pot.value(dn)) / (2 * h)
    return out


class TestValues:
    def test_cos_squared_half(self):
        pot = Potential("cos(x)^2 / 2", 1)
        x = np.linspace(0, 2 * np.pi, 17)[:, None]
        assert np.allclose(pot.value(x), 0.5 * np.cos(x[:, 0]) ** 2,
                           rtol=1e-15)

    def test_two_dimensional_reference(self):
        pot = Potential("(cos(y/2)^2 + 2*cos(1 + x/2)^2) / 8", 2)
        pts = np.array([[0.3, 1.1], [4.0, 5.2], [6.0, 0.1]])
        want = (np.cos(pts[:, 1] / 2) ** 2
                + 2 * np.cos(1 + pts[:, 0] / 2) ** 2) / 8
        assert np.allclose(pot.value(pts), want, rtol=1e-15)

    def test_literals_and_precedence(self):
        pot = Potential("1 + 2*x^2 - x/4", 1)
        x = np.array([[2.0]])
        assert np.isclose(pot.value(x)[0], 1 + 8 - 0.5, rtol=1e-15)

    def test_unary_minus_and_nesting(self):
        pot = Potential("-sin(-x + 1)^3", 1)
        x = np.array([[0.7]])
        assert np.isclose(pot.value(x)[0], -np.sin(0.3) ** 3, rtol=1e-14)

    def test_constant_expression_broadcasts(self):
        pot = Potential("2.5", 2)
        pts = np.zeros((4, 3, 2))
        assert pot.value(pts).shape == (4, 3)
        assert np.all(pot.value(pts) == 2.5)


class TestGradients:
    def test_cos_squared_closed_form(self):
        pot = Potential("cos(x)^2 / 2", 1)
        x = np.linspace(0, 2 * np.pi, 33)[:, None]
        assert np.allclose(pot.grad(x)[:, 0], -0.5 * np.sin(2 * x[:, 0]),
                           atol=1e-15)

    def test_two_dimensional_closed_form(self):
        pot = Potential("(cos(y/2)^2 + 2*cos(1 + x/2)^2) / 8", 2)
        pts = np.random.default_rng(1).uniform(0, 2 * np.pi, (40, 2))
        gx = -np.sin(2 + pts[:, 0]) / 8
        gy = -np.sin(pts[:, 1]) / 16
        g = pot.grad(pts)
        assert np.allclose(g[:, 0], gx, atol=1e-14)
        assert np.allclose(g[:, 1], gy, atol=1e-14)

    @pytest.mark.parametrize("expr,dim", [
        ("cos(x)^2 / 2", 1),
        ("sin(3*x) * cos(x/2) + x^2 / 10", 1),
        ("1 / (2 + sin(x))", 1),
        ("x^-2 + 4", 1),
        ("(cos(y/2)^2 + 2*cos(1 + x/2)^2) / 8", 2),
        ("sin(x)*cos(y) - y/3", 2),
    ])
    def test_matches_finite_differences(self, expr, dim):
        pot = Potential(expr, dim)
        pts = np.random.default_rng(7).uniform(0.5, 5.5, (25, dim))
        assert np.allclose(pot.grad(pts), fd_grad(pot, pts),
                           rtol=1e-6, atol=1e-7)

    def test_grad_shape_matches_input(self):
        pot = Potential("sin(x)*cos(y)", 2)
        pts = np.zeros((3, 4, 2))
        assert pot.grad(pts).shape == (3, 4, 2)


class TestErrors:
    def test_unknown_symbol(self):
        with pytest.raises(ValueError, match="unknown symbol"):
            Potential("z + 1", 1)

    def test_y_rejected_in_one_dimension(self):
        with pytest.raises(ValueError, match="unknown symbol"):
            Potential("sin(y)", 1)

    def test_unbalanced_parens(self):
        with pytest.raises(ValueError):
            Potential("sin(x", 1)
        with pytest.raises(ValueError):
            Potential("(x + 1))", 1)

    def test_bad_character_position(self):
        with pytest.raises(ValueError, match="position 4"):
            Potential("x + $", 1)

    def test_variable_exponent_rejected(self):
        with pytest.raises(ValueError, match="constant"):
            Potential("2^x", 1)
        with pytest.raises(ValueError, match="constant"):
            Potential("x^sin(x)", 1)

    def test_trailing_tokens(self):
        with pytest.raises(ValueError, match="trailing"):
            Potential("x 1", 1)

    def test_empty_expression(self):
        with pytest.raises(ValueError):
            Potential("", 1)
        assert parse_potential("", 1) is None
        assert parse_potential(None, 2) is None

    def test_point_shape_validation(self):
        pot = Potential("x", 2)
        with pytest.raises(ValueError):
            pot.value(np.zeros((5, 1)))
