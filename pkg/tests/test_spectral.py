"""Spectral calculus: algebra, Laplacian, derivatives, pairings."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from torusflow import CapExceeded, GeometryMismatch, RankMismatch
from torusflow.spectral import (CovariantTensor, OneForm, TrigPoly,
                                covariant_derivative, exterior_derivative,
                                form_inner, heat_semigroup_apply, l2_inner,
                                laplacian, mul_free, multiply,
                                pointwise_length_sq, sup_norm, tensor_inner)

TWO_PI = 2.0 * math.pi


def random_poly(rng, dim, cap, m, self_adjoint=False):
    coeffs = {}
    from itertools import product
    for k in product(range(-m, m + 1), repeat=dim):
        c = (rng.standard_normal() + 1j * rng.standard_normal()) / 2.0
        coeffs[k] = coeffs.get(k, 0.0) + c
        if self_adjoint:
            nk = tuple(-v for v in k)
            coeffs[nk] = coeffs.get(nk, 0.0) + np.conj(c)
    return TrigPoly(dim, cap, coeffs)


# ---------------------------------------------------------------- algebra

def test_multiply_inverse_modes():
    e = TrigPoly.mode((1,), 1, 2)
    einv = TrigPoly.mode((-1,), 1, 2)
    p = multiply(e, einv)
    assert (p - TrigPoly.one(1, 2)).is_zero()


def test_multiply_two_cos_squared():
    # (2cos x)^2 = 2 + 2cos 2x
    f = 2.0 * TrigPoly.cosine((1,), 1, 2)
    p = multiply(f, f)
    assert p.coeff((0,)) == pytest.approx(2.0)
    assert p.coeff((2,)) == pytest.approx(1.0)
    assert p.coeff((-2,)) == pytest.approx(1.0)


def test_multiply_cap_exceeded():
    e = TrigPoly.mode((1,), 1, 1)
    with pytest.raises(CapExceeded):
        multiply(e, e)


def test_mul_free_lifts_cap():
    e = TrigPoly.mode((1,), 1, 1)
    p = mul_free(e, e)
    assert p.coeff((2,)) == pytest.approx(1.0)
    assert p.cap >= 2


def test_constructor_rejects_out_of_cap_modes():
    with pytest.raises(CapExceeded):
        TrigPoly(1, 1, {(2,): 1.0})


def test_geometry_validation():
    with pytest.raises(GeometryMismatch):
        TrigPoly(0, 3)
    with pytest.raises(GeometryMismatch):
        multiply(TrigPoly.one(1, 2), TrigPoly.one(2, 2))


# -------------------------------------------------------------- laplacian

def test_laplacian_examples():
    assert laplacian(TrigPoly.one(1, 3)).is_zero()
    e3 = TrigPoly.mode((3,), 1, 3)
    assert (laplacian(e3) - 9.0 * e3).is_zero()
    e11 = TrigPoly.mode((1, 1), 2, 2)
    assert (laplacian(e11) - 2.0 * e11).is_zero()


@settings(max_examples=40, derandomize=True)
@given(st.integers(-5, 5), st.integers(-5, 5))
def test_eigenrelation_all_modes(k1, k2):
    e = TrigPoly.mode((k1, k2), 2, 5)
    lam = k1 * k1 + k2 * k2
    assert (laplacian(e) - float(lam) * e).is_zero()


def test_heat_semigroup():
    f = TrigPoly.cosine((1,), 1, 2) + TrigPoly.mode((2,), 1, 2)
    assert (f.heat(0.0) - f).is_zero()
    h = f.heat(1.0, halved=True)
    assert h.coeff((1,)) == pytest.approx(0.5 * math.exp(-0.5))
    assert h.coeff((2,)) == pytest.approx(math.exp(-2.0))
    # t=2 halved equals t=1 unhalved
    assert (f.heat(2.0, halved=True) - heat_semigroup_apply(1.0, f)).is_zero(1e-15)


def test_heat_rejects_negative_time():
    with pytest.raises(ValueError):
        TrigPoly.one(1, 1).heat(-0.1)


# ------------------------------------------------------------ derivatives

def test_covariant_derivative_examples():
    f = TrigPoly.cosine((1,), 1, 3)
    d0 = covariant_derivative(f, 0)
    assert (d0.component(()) - f).is_zero()
    d1 = covariant_derivative(f, 1)
    msin = -1.0 * TrigPoly.sine((1,), 1, 3)
    assert (d1.component((0,)) - msin).is_zero(1e-15)
    e = TrigPoly.mode((4,), 1, 4)
    d2 = covariant_derivative(e, 2)
    assert (d2.component((0, 0)) + 16.0 * e).is_zero(1e-12)


@settings(max_examples=25, derandomize=True)
@given(st.integers(0, 400))
def test_hessian_symmetry(seed):
    rng = np.random.default_rng(seed)
    f = random_poly(rng, 2, 3, 2)
    assert covariant_derivative(f, 2).is_symmetric(1e-12)


def test_tensor_inner_examples():
    dcos = covariant_derivative(TrigPoly.cosine((1,), 1, 2), 1)
    dsin = covariant_derivative(TrigPoly.sine((1,), 1, 2), 1)
    # (-sin)(cos) = -1/2 sin 2x
    p = tensor_inner(dcos, dsin)
    target = -0.5 * TrigPoly.sine((2,), 1, p.cap)
    assert (p - target).is_zero(1e-15)
    # l(grad e^{inx})^2 = n^2
    e = TrigPoly.mode((3,), 1, 3)
    ln = tensor_inner(covariant_derivative(e, 1), covariant_derivative(e, 1))
    assert (ln - TrigPoly.constant(9.0, 1, ln.cap)).is_zero(1e-12)


def test_tensor_inner_rank_mismatch():
    f = TrigPoly.cosine((1,), 1, 2)
    with pytest.raises(RankMismatch):
        tensor_inner(covariant_derivative(f, 1), covariant_derivative(f, 2))


def test_covariant_derivative_negative_rank():
    with pytest.raises(RankMismatch):
        covariant_derivative(TrigPoly.one(1, 1), -1)


# ----------------------------------------------------------------- forms

def test_exterior_derivative_examples():
    assert exterior_derivative(TrigPoly.one(1, 2)).is_zero()
    w = exterior_derivative(TrigPoly.cosine((1,), 1, 2))
    assert (w.comps[0] + TrigPoly.sine((1,), 1, 2)).is_zero(1e-15)
    e = TrigPoly.mode((1, 2), 2, 2)
    w2 = exterior_derivative(e)
    assert (w2.comps[0] - 1j * e).is_zero(1e-15)
    assert (w2.comps[1] - 2j * e).is_zero(1e-15)


def test_exactness_cross_derivatives():
    # for w = df the cross partials agree
    rng = np.random.default_rng(3)
    f = random_poly(rng, 2, 4, 2)
    w = exterior_derivative(f)
    diff = w.comps[0].partial(1) - w.comps[1].partial(0)
    assert diff.is_zero(1e-13)


def test_form_inner_examples():
    dcos = exterior_derivative(TrigPoly.cosine((1,), 1, 2))
    dsin = exterior_derivative(TrigPoly.sine((1,), 1, 2))
    p = form_inner(dcos, dsin)
    assert (p + 0.5 * TrigPoly.sine((2,), 1, p.cap)).is_zero(1e-15)
    zero = OneForm.zero(1, 2)
    assert form_inner(zero, dsin).is_zero()
    q = form_inner(dcos, dcos)
    # sin^2 = 1/2 - 1/2 cos 2x
    assert q.coeff((0,)) == pytest.approx(0.5)
    assert q.coeff((2,)) == pytest.approx(-0.25)
    assert q.coeff((-2,)) == pytest.approx(-0.25)


# --------------------------------------------------------------- pairings

def test_l2_inner_orthogonality():
    e1 = TrigPoly.mode((1,), 1, 2)
    e2 = TrigPoly.mode((2,), 1, 2)
    assert l2_inner(e1, e1) == pytest.approx(TWO_PI)
    assert l2_inner(e1, e2) == 0
    # first argument conjugated
    f = 1j * e1
    assert l2_inner(f, e1) == pytest.approx(-1j * TWO_PI)
    assert l2_inner(e1, f) == pytest.approx(1j * TWO_PI)


def test_l2_norm_cos():
    # ||cos||^2 = pi on the circle
    c = TrigPoly.cosine((1,), 1, 1)
    assert c.l2_norm() == pytest.approx(math.sqrt(math.pi))


def test_sup_norm_examples():
    assert sup_norm(TrigPoly.cosine((1,), 1, 1)) == pytest.approx(1.0, abs=1e-9)
    assert sup_norm(TrigPoly.one(1, 1)) == pytest.approx(1.0)


def test_values_on_grid_matches_direct_eval():
    f = TrigPoly.cosine((2,), 1, 2) + 0.5 * TrigPoly.sine((1,), 1, 2)
    n = 9
    vals = f.values_on_grid(n)
    xs = 2 * math.pi * np.arange(n) / n
    direct = np.cos(2 * xs) + 0.5 * np.sin(xs)
    np.testing.assert_allclose(vals.real, direct, atol=1e-12)
    np.testing.assert_allclose(vals.imag, 0.0, atol=1e-12)


def test_project_reports_dropped_mass():
    f = TrigPoly.cosine((1,), 1, 4) + TrigPoly.cosine((3,), 1, 4)
    low, dropped = f.project(2)
    assert low.coeff((3,)) == 0
    # ||cos 3x||_{L2} = sqrt(pi)
    assert dropped == pytest.approx(math.sqrt(math.pi))


def test_with_cap_strictness():
    f = TrigPoly.cosine((3,), 1, 4)
    with pytest.raises(CapExceeded):
        f.with_cap(2)
    assert f.with_cap(6).cap == 6


# ------------------------------------------------ product rules and bounds

@settings(max_examples=30, derandomize=True)
@given(st.integers(0, 500))
def test_laplacian_product_rule(seed):
    # Delta(fg) = f Delta(g) + g Delta(f) - 2 <grad f, grad g>
    # mixed term unconjugated: the identity is bilinear
    rng = np.random.default_rng(seed)
    f = random_poly(rng, 1, 8, 2)
    g = random_poly(rng, 1, 8, 2)
    lhs = laplacian(mul_free(f, g)).with_cap(8)
    cross = TrigPoly.zero(1, 8)
    for ax in range(1):
        cross = cross + mul_free(f.partial(ax), g.partial(ax)).with_cap(8)
    rhs = (mul_free(f, laplacian(g)).with_cap(8)
           + mul_free(g, laplacian(f)).with_cap(8)
           - 2.0 * cross)
    assert (lhs - rhs).is_zero(1e-12)


@settings(max_examples=15, derandomize=True)
@given(st.integers(0, 500), st.integers(1, 3))
def test_commutator_laplacian_covariant(seed, rank):
    rng = np.random.default_rng(seed)
    f = random_poly(rng, 2, 3, 1)
    a = covariant_derivative(laplacian(f), rank)
    b = covariant_derivative(f, rank)
    for idx, comp in b.comps.items():
        assert (a.component(idx) - laplacian(comp)).is_zero(1e-11)


def test_laplacian_pointwise_bound():
    rng = np.random.default_rng(11)
    for _ in range(10):
        f = random_poly(rng, 2, 4, 2)
        n = 4 * 2 + 3
        lap = np.abs(laplacian(f).values_on_grid(n))
        hess = pointwise_length_sq(covariant_derivative(f, 2))
        hv = np.sqrt(np.maximum(hess.values_on_grid(n).real, 0.0))
        assert np.all(lap <= math.sqrt(2) * hv + 1e-10)


def test_gradient_growth_per_mode():
    # l(grad^k phi) = |k|^k for pure modes, and sup ratios <= lambda^2
    for n in (1, 2, 3):
        e = TrigPoly.mode((n,), 1, n)
        prev = None
        for k in range(1, 4):
            lk = pointwise_length_sq(covariant_derivative(e, k))
            val = math.sqrt(max(lk.coeff((0,) * 1).real, 0.0))
            assert val == pytest.approx(float(n) ** k, rel=1e-12)
            assert val <= (1.0 + n * n) ** k
            if prev is not None:
                assert val / prev <= n * n + 1e-12
            prev = val


def test_iterated_laplacian_growth():
    # ||Delta^k f||_inf <= C K^k with C = sum |coeffs|, K = max eigenvalue
    rng = np.random.default_rng(5)
    f = random_poly(rng, 1, 6, 3)
    c_const = f.coeff_l1()
    k_const = float(f.max_abs_mode() ** 2)
    g = f
    for k in range(1, 9):
        g = laplacian(g)
        assert sup_norm(g) <= c_const * k_const ** k + 1e-9


def test_sobolev_sup_bound():
    # sup|f| <= sum |coeffs|, the crude but exact l1 bound used by growth
    rng = np.random.default_rng(8)
    for _ in range(10):
        f = random_poly(rng, 1, 5, 3)
        assert sup_norm(f) <= f.coeff_l1() + 1e-9
