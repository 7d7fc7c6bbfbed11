import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stommel_osc.analysis import (NoFold, ShapeError, SplittingLineError, classify_corner_bifurcation,
                                  classify_regime, corner_slopes, critical_manifold_mu,
                                  critical_manifold_slope, equilibria_of_2d, equilibrium, fold_point,
                                  jacobian, jacobian_fd_check)
from stommel_osc.core import ModelParams

P = ModelParams.reduced


class TestCriticalManifold:
    @pytest.mark.parametrize("A", [0.3, 1.0, 5.0])
    def test_corner_value(self, A):
        assert critical_manifold_mu(1.0, A) == 1.0

    def test_examples(self):
        assert critical_manifold_mu(0.8, 5) == pytest.approx(1.6)
        assert critical_manifold_mu(0.6, 5) == pytest.approx(1.8)

    def test_vectorized(self):
        out = critical_manifold_mu(np.array([0.6, 1.0, 1.2]), 5.0)
        np.testing.assert_allclose(out, [1.8, 1.0, 1.2 + 5 * 0.2 * 1.2])

    @pytest.mark.parametrize("A", [0.5, 1.5, 5.0])
    def test_one_sided_slopes(self, A):
        h = 1e-7
        left = (critical_manifold_mu(1.0, A) - critical_manifold_mu(1 - h, A)) / h
        right = (critical_manifold_mu(1 + h, A) - critical_manifold_mu(1.0, A)) / h
        assert left == pytest.approx(1 - A, abs=1e-5)
        assert right == pytest.approx(1 + A, abs=1e-5)
        assert critical_manifold_slope(1 - 1e-9, A) == pytest.approx(1 - A, abs=1e-6)

    def test_continuous_at_corner(self):
        for A in (0.5, 2.0, 5.0):
            assert abs(critical_manifold_mu(1 - 1e-12, A) - critical_manifold_mu(1 + 1e-12, A)) < 1e-10


class TestFold:
    def test_values(self):
        assert fold_point(5) == pytest.approx((0.6, 1.8))
        assert fold_point(1.5) == pytest.approx((5 / 6, 25 / 24))

    @pytest.mark.parametrize("A", [0.9, 1.0])
    def test_no_fold(self, A):
        with pytest.raises(NoFold):
            fold_point(A)

    def test_fold_is_maximum(self):
        yf, mf = fold_point(3.0)
        ys = np.linspace(0, 1, 1001)
        assert critical_manifold_mu(ys, 3.0).max() <= mf + 1e-12


class TestEquilibrium:
    def test_relax(self):
        r = equilibrium(P(5, 0.8, 0.1))
        assert (r.trace, r.det) == (pytest.approx(2.0), 0.1)
        assert r.discriminant == pytest.approx(3.6)
        assert r.eq_class == "unstable-node" and r.branch == "thermal"
        assert (r.y0, r.mu0) == (0.8, pytest.approx(1.6))

    def test_haline(self):
        r = equilibrium(P(5, 1.2, 0.1))
        assert r.trace == pytest.approx(-8) and r.discriminant == pytest.approx(63.6)
        assert r.eq_class == "stable-node" and r.branch == "haline"

    def test_canard_focus(self):
        r = equilibrium(P(1.1, 0.999, 0.01))
        assert r.trace == pytest.approx(0.0978, abs=1e-12)
        assert r.eq_class == "unstable-focus"

    def test_corner(self):
        r = equilibrium(P(5, 1.0, 0.1))
        assert r.eq_class == "nonsmooth-corner" and r.branch == "corner"
        assert r.trace is None and r.discriminant is None
        assert r.to_dict()["class"] == "nonsmooth-corner"

    def test_degenerate_hopf_marker(self):
        # lambda on the fold: trace vanishes exactly
        assert equilibrium(P(5, 0.6, 0.1)).eq_class == "degenerate-hopf"

    @settings(max_examples=300)
    @given(A=st.floats(0.1, 8), lam=st.floats(0.05, 1.95), d0=st.floats(1e-3, 1))
    def test_det_and_class(self, A, lam, d0):
        r = equilibrium(ModelParams(A=A, lambda_=lam, delta0=d0))
        assert r.det == d0
        if lam == 1.0:
            return
        assert np.linalg.det(jacobian(ModelParams(A=A, lambda_=lam, delta0=d0), lam)) == pytest.approx(d0)
        if r.trace != 0:
            side, shape = r.eq_class.split("-")
            assert side == ("stable" if r.trace < 0 else "unstable")
            assert shape == ("node" if r.discriminant >= 0 else "focus")


class TestRegime:
    @pytest.mark.parametrize("A, lam, d0, regime, corner", [
        (1.1, 0.995, 0.01, "oscillating", "canard-focus"),
        (1.5, 0.995, 0.01, "oscillating", "super-explosion-node"),
        (5, 0.8, 0.1, "oscillating", "super-explosion-node"),
        (5, 0.5, 0.1, "stable-thermal", "super-explosion-node"),
        (5, 1.2, 0.1, "stable-haline", "super-explosion-node"),
        (0.5, 0.9, 0.01, "equilibration-A<1", "not-applicable"),
        (1.0, 0.9, 0.01, "equilibration-A<1", "not-applicable"),
    ])
    def test_table(self, A, lam, d0, regime, corner):
        r = classify_regime(P(A, lam, d0))
        assert (r.regime, r.bifurcation_at_corner) == (regime, corner)
        assert (r.fold is not None) == (A > 1)

    def test_boundaries(self):
        assert classify_regime(P(5, 0.6, 0.1)).regime == "stable-thermal"
        assert classify_regime(P(5, 1.0, 0.1)).regime == "stable-haline"
        # A = 1 + 2 sqrt(delta0) belongs to the node branch
        assert classify_regime(P(1.2, 0.95, 0.01)).bifurcation_at_corner == "super-explosion-node"

    def test_to_dict(self):
        d = classify_regime(P(5, 0.8, 0.1)).to_dict()
        assert d["fold"] == pytest.approx([0.6, 1.8])


def _scan_roots(mu, A):
    ys = np.arange(0, 3 + 1e-4, 1e-4)
    g = mu - critical_manifold_mu(ys, A)
    return int(np.sum(np.sign(g[:-1]) * np.sign(g[1:]) < 0) + np.sum(g == 0))


class TestEquilibria2d:
    def test_three_roots(self):
        roots = equilibria_of_2d(1.5, 5.0)
        assert len(roots) == 3
        assert [s for _, s in roots] == ["stable", "unstable", "stable"]

    def test_one_root(self):
        roots = equilibria_of_2d(1.0, 0.5)
        assert len(roots) == 1 and roots[0] == (1.0, "stable")

    def test_fold_tangency(self):
        roots = equilibria_of_2d(1.8, 5.0)
        assert len(roots) == 2
        assert roots[0][0] == pytest.approx(0.6) and roots[0][1] == "degenerate"
        assert roots[1][0] > 1 and roots[1][1] == "stable"

    def test_corner_root(self):
        ys = [y for y, _ in equilibria_of_2d(1.0, 3.0)]
        assert 1.0 in ys

    def test_against_scan(self):
        rng = np.random.default_rng(7)
        for _ in range(60):
            A, mu = rng.uniform(0.2, 6), rng.uniform(0.05, 2.5)
            roots = equilibria_of_2d(mu, A)
            for y, _ in roots:
                assert abs(mu - critical_manifold_mu(y, A)) < 1e-10
            if abs(mu - 1) > 1e-3 and (A <= 1 or abs(mu - (1 + A) ** 2 / (4 * A)) > 1e-3):
                assert len(roots) == _scan_roots(mu, A)


class TestCornerBifurcation:
    def test_super_explosion_example(self):
        assert classify_corner_bifurcation(-2.0, 2.0, 0.01)[0] == "super-explosion"

    def test_canard_subcritical(self):
        assert classify_corner_bifurcation(-0.05, 0.1, 0.01) == ("canard-cycles", "subcritical")

    def test_canard_supercritical(self):
        assert classify_corner_bifurcation(-2.1, 0.1, 0.01) == ("canard-cycles", "supercritical")

    def test_super_explosion_criticality(self):
        assert classify_corner_bifurcation(-0.1, 2.0, 0.01) == ("super-explosion", "subcritical")
        assert classify_corner_bifurcation(-1.0, 2.0, 0.01) == ("super-explosion", "supercritical")

    @pytest.mark.parametrize("g, h", [(1.0, 1.0), (-1.0, -1.0), (0.0, 1.0)])
    def test_shape_error(self, g, h):
        with pytest.raises(ShapeError):
            classify_corner_bifurcation(g, h, 0.01)

    @pytest.mark.parametrize("A, kind", [(1.1, "canard-cycles"), (1.5, "super-explosion")])
    def test_stommel_mapping_agrees_with_regime(self, A, kind):
        g, h = corner_slopes(P(A, 0.995, 0.01))
        assert classify_corner_bifurcation(g, h, 0.01)[0] == kind
        expect = "canard-focus" if kind == "canard-cycles" else "super-explosion-node"
        assert classify_regime(P(A, 0.995, 0.01)).bifurcation_at_corner == expect


class TestJacobianCheck:
    def test_example(self):
        assert jacobian_fd_check(P(5, 0.8, 0.1), (0.8, 1.6), 1e-5) < 1e-6

    def test_linear_case(self):
        lin = SimpleNamespace(A=0.0, delta0=0.1, lambda_=0.8)
        assert jacobian_fd_check(lin, (0.3, 0.7)) < 1e-10

    def test_on_splitting_line(self):
        with pytest.raises(SplittingLineError):
            jacobian_fd_check(P(5, 0.8, 0.1), (1.0, 1.0))

    def test_det_everywhere(self):
        p = P(3.5, 0.8, 0.07)
        for y in np.linspace(0, 2, 41):
            if y != 1.0:
                J = jacobian(p, y)
                assert J[0, 1] * -J[1, 0] == p.delta0
                assert math.isclose(np.linalg.det(J), p.delta0, rel_tol=1e-12)
