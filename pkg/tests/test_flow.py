"""Time-ordered evolution, Picard expansion, and the Fock engine."""

import math

import numpy as np
import pytest

from torusflow import (CapExceeded, DepthExceeded, GeometryMismatch,
                       NotPositive)
from torusflow.flow import (FlowProblem, factorization_check,
                            factorization_residual, fock_picard_apply,
                            picard_terms, positivity_probe,
                            texp_matrix_element, vacuum_expectation)
from torusflow.fock import SimpleNoisePath, TimeMesh, noise_inner
from torusflow.sampling import noise_path, poly, rng_for
from torusflow.spectral import (OneForm, TrigPoly, exterior_derivative,
                                l2_inner, mul_free)
from torusflow.structure import psi_map

E_HALF_PI = 1.9054722647301798    # e^{-1/2} pi
E_TWO_2PI = 0.8503366631752727    # e^{-2} 2 pi


def cos1(cap=4):
    return TrigPoly.cosine((1,), 1, cap)


def dform(poly_):
    return exterior_derivative(poly_)


def zero_path(dim=1, t=1.0):
    return SimpleNoisePath.zero(dim, horizon=max(t, 1.0))


# ------------------------------------------------------------------- texp

def test_texp_zero_noise_cos():
    p = FlowProblem(cos1(), zero_path(), zero_path(), cos1(),
                    TrigPoly.one(1, 4), 1.0)
    val = texp_matrix_element(p)
    assert val.real == pytest.approx(E_HALF_PI, abs=1e-12)
    assert abs(val.imag) < 1e-14


def test_texp_unital():
    rng = rng_for(1)
    t = 0.75
    f = noise_path(rng, 1, 3, 2, horizon=t, max_mode=1, scale=0.4)
    g = noise_path(rng, 1, 3, 2, horizon=t, max_mode=1, scale=0.4)
    u = poly(rng, 1, 3, 1)
    v = poly(rng, 1, 3, 1)
    p = FlowProblem(TrigPoly.one(1, 3), f, g, u, v, t)
    want = np.exp(noise_inner(g, f)) * l2_inner(u, v)
    assert texp_matrix_element(p) == pytest.approx(want, rel=1e-12)


def test_texp_zero_horizon():
    u = cos1()
    v = TrigPoly.one(1, 4)
    x = TrigPoly.mode((2,), 1, 4)
    p = FlowProblem(x, zero_path(), zero_path(), u, v, 0.0)
    assert texp_matrix_element(p) == pytest.approx(l2_inner(u, mul_free(x, v)))


def test_texp_ordering_sensitivity():
    rng = rng_for(12)
    w1 = dform(cos1(3))
    w2 = dform(TrigPoly.sine((1,), 1, 3))
    mesh = TimeMesh([0.0, 0.5, 1.0])
    u = poly(rng, 1, 3, 1)
    v = poly(rng, 1, 3, 1)
    x = poly(rng, 1, 3, 1)
    fwd = SimpleNoisePath(mesh, (w1, w2))
    rev = SimpleNoisePath(mesh, (w2, w1))
    a = texp_matrix_element(FlowProblem(x, fwd, zero_path(), u, v, 1.0))
    b = texp_matrix_element(FlowProblem(x, rev, zero_path(), u, v, 1.0))
    assert abs(a - b) > 1e-6


def test_flow_problem_validation():
    with pytest.raises(GeometryMismatch):
        FlowProblem(cos1(), zero_path(), zero_path(), cos1(),
                    TrigPoly.one(1, 4), -0.5)
    with pytest.raises(GeometryMismatch):
        FlowProblem(cos1(), zero_path(), zero_path(), cos1(3),
                    TrigPoly.one(1, 4), 1.0)
    f = SimpleNoisePath.indicator(dform(cos1()), 0.0, 2.0)
    with pytest.raises(GeometryMismatch):
        FlowProblem(cos1(), f, zero_path(), cos1(), TrigPoly.one(1, 4), 1.0)


# ----------------------------------------------------------------- vacuum

def test_vacuum_expectation_examples():
    one = TrigPoly.one(1, 4)
    u = poly(rng_for(0), 1, 4, 2)
    v = poly(rng_for(1), 1, 4, 2)
    assert vacuum_expectation(one, u, v, 2.0) == pytest.approx(l2_inner(u, v))
    x = poly(rng_for(2), 1, 4, 2)
    got = vacuum_expectation(x, u, v, 0.0)
    assert got == pytest.approx(l2_inner(u, mul_free(x, v)))
    e2 = TrigPoly.mode((2,), 1, 4)
    val = vacuum_expectation(e2, e2, one, 1.0)
    assert val.real == pytest.approx(E_TWO_2PI, abs=1e-12)


def test_vacuum_identity_matches_heat_semigroup():
    rng = rng_for(17)
    one_t = (0.1, 0.5, 1.0, 2.0)
    for _ in range(8):
        x = poly(rng, 1, 6, 6)
        u = poly(rng, 1, 6, 6)
        v = poly(rng, 1, 6, 6)
        for t in one_t:
            got = vacuum_expectation(x, u, v, t)
            want = l2_inner(u, mul_free(x.heat(t, halved=True), v))
            assert abs(got - want) <= 1e-10 * max(1.0, abs(want))


# ----------------------------------------------------------------- picard

def test_picard_order_zero():
    rng = rng_for(4)
    t = 0.8
    f = noise_path(rng, 1, 3, 1, horizon=t, max_mode=1, scale=0.4)
    g = noise_path(rng, 1, 3, 1, horizon=t, max_mode=1, scale=0.4)
    x = poly(rng, 1, 3, 1)
    u = poly(rng, 1, 3, 1)
    v = poly(rng, 1, 3, 1)
    series = picard_terms(FlowProblem(x, f, g, u, v, t), 0)
    want = np.exp(noise_inner(g, f)) * l2_inner(u, mul_free(x, v))
    assert series.terms[0] == pytest.approx(want, rel=1e-12)


def test_picard_order_one_single_interval():
    t = 0.6
    wf = dform(cos1(4)).scale(0.5)
    wg = dform(TrigPoly.sine((1,), 1, 4)).scale(0.3)
    f = SimpleNoisePath.indicator(wf, 0.0, t)
    g = SimpleNoisePath.indicator(wg, 0.0, t)
    x, u, v = cos1(4), cos1(4), TrigPoly.one(1, 4)
    series = picard_terms(FlowProblem(x, f, g, u, v, t), 1)
    coh = np.exp(noise_inner(g, f))
    psi_x = psi_map(x, wf, wg)
    want = coh * t * l2_inner(u, mul_free(psi_x, v))
    assert series.terms[1] == pytest.approx(want, rel=1e-11)


def test_picard_partial_sums_approach_texp():
    rng = rng_for(23)
    for _ in range(4):
        t = 0.8
        f = noise_path(rng, 1, 3, 2, horizon=t, max_mode=1, scale=0.35)
        g = noise_path(rng, 1, 3, 2, horizon=t, max_mode=1, scale=0.35)
        x = poly(rng, 1, 3, 1)
        u = poly(rng, 1, 3, 1)
        v = poly(rng, 1, 3, 1)
        p = FlowProblem(x, f, g, u, v, t)
        series = picard_terms(p, 8)
        target = texp_matrix_element(p)
        assert abs(series.partial_sum() - target) <= series.tail_bound(8)
        # envelope dominates each measured term
        for n, term in enumerate(series.terms):
            assert abs(term) <= series.term_bound(n) * (1 + 1e-12) + 1e-15


def test_picard_block_norms_track_factorial_envelope():
    # order-n block of prod exp(dt Psi) is bounded by S^n / n!
    rng = rng_for(29)
    t = 0.8
    f = noise_path(rng, 1, 3, 2, horizon=t, max_mode=1, scale=0.35)
    g = noise_path(rng, 1, 3, 2, horizon=t, max_mode=1, scale=0.35)
    p = FlowProblem(poly(rng, 1, 3, 1), f, g, poly(rng, 1, 3, 1),
                    poly(rng, 1, 3, 1), t)
    series = picard_terms(p, 8)
    assert len(series.block_norms) == 9
    assert series.block_norms[0] == 1.0
    for n, bn in enumerate(series.block_norms):
        assert bn <= series.s_const ** n / math.factorial(n) * (1 + 1e-12)


def test_picard_zero_horizon_collapses_to_order_zero():
    x, u, v = cos1(), cos1(), TrigPoly.one(1, 4)
    zero = SimpleNoisePath(TimeMesh([0.0]), (), dim=1)
    series = picard_terms(FlowProblem(x, zero, zero, u, v, 0.0), 4)
    assert series.terms[0] == pytest.approx(l2_inner(u, mul_free(x, v)))
    assert all(term == 0 for term in series.terms[1:])
    assert series.s_const == 0.0


def test_picard_rejects_negative_order():
    p = FlowProblem(cos1(), zero_path(), zero_path(), cos1(),
                    TrigPoly.one(1, 4), 1.0)
    with pytest.raises(GeometryMismatch):
        picard_terms(p, -1)


# ------------------------------------------------------------ fock engine

def test_engine_unital_argument():
    rng = rng_for(6)
    t = 1.0
    f = noise_path(rng, 1, 3, 2, horizon=t, max_mode=1, scale=0.4)
    one = TrigPoly.one(1, 3)
    v = poly(rng, 1, 3, 1)
    u = poly(rng, 1, 3, 1)
    g = noise_path(rng, 1, 3, 2, horizon=t, max_mode=1, scale=0.4)
    vec = fock_picard_apply(FlowProblem(one, f, zero_path(1, t), v, v, t),
                            None, 3)
    got = vec.pair_coherent(u, g)
    want = np.exp(noise_inner(g, f)) * l2_inner(u, v)
    assert got == pytest.approx(want, rel=1e-11)
    nrm = vec.inner(vec)
    want_sq = np.exp(noise_inner(f, f).real) * v.l2_norm() ** 2
    assert nrm.real == pytest.approx(want_sq, rel=1e-11)


def test_engine_order_zero_is_plain_product():
    rng = rng_for(7)
    t = 0.9
    f = noise_path(rng, 1, 3, 2, horizon=t, max_mode=1, scale=0.4)
    g = noise_path(rng, 1, 3, 2, horizon=t, max_mode=1, scale=0.4)
    x = poly(rng, 1, 3, 1)
    u = poly(rng, 1, 3, 1)
    v = poly(rng, 1, 3, 1)
    vec = fock_picard_apply(FlowProblem(x, f, zero_path(1, t), v, v, t), 0, 3)
    got = vec.pair_coherent(u, g)
    want = np.exp(noise_inner(g, f)) * l2_inner(u, mul_free(x, v))
    assert got == pytest.approx(want, rel=1e-11)


def test_engine_zero_noise_reproduces_vacuum():
    rng = rng_for(8)
    t = 0.7
    x = poly(rng, 1, 3, 1)
    u = poly(rng, 1, 3, 1)
    v = poly(rng, 1, 3, 1)
    vec = fock_picard_apply(
        FlowProblem(x, zero_path(1, t), zero_path(1, t), v, v, t), None, 3)
    got = vec.pair_coherent(u, zero_path(1, t))
    want = vacuum_expectation(x, u, v, t)
    assert got == pytest.approx(want, rel=1e-11)


def test_engine_pairing_matches_texp_oracle():
    rng = rng_for(29)
    t = 0.8
    mesh = TimeMesh([0.0, 0.4, t])
    for _ in range(3):
        fvals = tuple(dform(poly(rng, 1, 3, 1, self_adjoint=True, scale=0.3))
                      for _ in range(2))
        gvals = tuple(dform(poly(rng, 1, 3, 1, self_adjoint=True, scale=0.3))
                      for _ in range(2))
        f = SimpleNoisePath(mesh, fvals)
        g = SimpleNoisePath(mesh, gvals)
        x = poly(rng, 1, 3, 1)
        u = poly(rng, 1, 3, 1)
        v = poly(rng, 1, 3, 1)
        vec = fock_picard_apply(FlowProblem(x, f, zero_path(1, t), v, v, t),
                                None, 3)
        got = vec.pair_coherent(u, g)
        want = texp_matrix_element(FlowProblem(x, f, g, u, v, t))
        assert got == pytest.approx(want, rel=1e-9)


def test_engine_gates():
    big_cap = TrigPoly.one(1, 5)
    with pytest.raises(CapExceeded):
        fock_picard_apply(
            FlowProblem(big_cap, zero_path(), zero_path(), big_cap,
                        big_cap, 1.0), None, 3)
    one = TrigPoly.one(1, 2)
    fine = SimpleNoisePath(
        TimeMesh([0.0, 0.2, 0.4, 0.6, 0.8, 1.0]),
        tuple(dform(cos1(2)) for _ in range(5)))
    with pytest.raises(GeometryMismatch):
        fock_picard_apply(FlowProblem(one, fine, zero_path(1, 1.0), one,
                                      one, 1.0), None, 3)
    with pytest.raises(DepthExceeded):
        fock_picard_apply(
            FlowProblem(one, zero_path(1, 1.0), zero_path(1, 1.0), one,
                        one, 1.0), None, 4)


def test_engine_depth_budget_loss():
    # order budget past the leg budget with real content must refuse
    x = cos1(2)
    one = TrigPoly.one(1, 2)
    f = SimpleNoisePath.indicator(dform(cos1(2)), 0.0, 1.0)
    with pytest.raises(DepthExceeded):
        fock_picard_apply(FlowProblem(x, f, zero_path(1, 1.0), one, one, 1.0),
                          3, 1)


# ---------------------------------------------------------- factorization

def test_factorization_constant_first_argument():
    one = TrigPoly.one(1, 2)
    f = SimpleNoisePath.indicator(dform(cos1(2)).scale(0.4), 0.0, 0.25)
    rep = factorization_check(one, cos1(2) + 2.0, f, f, one, one, 0.25)
    assert rep.residual <= rep.bound


def test_factorization_zero_horizon_exact():
    one = TrigPoly.one(1, 2)
    zf = SimpleNoisePath(TimeMesh([0.0]), (), dim=1)
    rep = factorization_check(cos1(2) + 1.5, cos1(2) + 1.5, zf, zf,
                              one, one, 0.0)
    assert rep.residual == 0.0


def test_factorization_cos_quarter():
    one = TrigPoly.one(1, 2)
    c = cos1(2)
    f = SimpleNoisePath.indicator(dform(c), 0.0, 0.25)
    rep = factorization_check(c, c, f, f, one, one, 0.25)
    assert rep.residual <= rep.bound
    assert rep.bound < 1.0  # the certificate is not vacuous
    assert rep.residual == pytest.approx(abs(rep.lhs - rep.rhs))
    assert factorization_residual(c, c, f, f, one, one, 0.25) == rep.residual


def test_factorization_requires_selfadjoint():
    e = TrigPoly.mode((1,), 1, 2)
    one = TrigPoly.one(1, 2)
    f = SimpleNoisePath.indicator(dform(cos1(2)), 0.0, 0.25)
    with pytest.raises(ValueError):
        factorization_check(e, e, f, f, one, one, 0.25)


# ------------------------------------------------------------- positivity

def test_positivity_identity_argument():
    rep = positivity_probe(TrigPoly.one(1, 2), 0.25, samples=3)
    assert rep.min_pairing > 0
    assert rep.max_ratio == pytest.approx(1.0, abs=1e-9)
    assert rep.sup_x == pytest.approx(1.0)


def test_positivity_shifted_cosine():
    x = cos1(2) + 2.0
    rep = positivity_probe(x, 0.25, samples=4)
    assert rep.min_pairing >= -1e-8
    assert rep.max_ratio <= rep.sup_x + 1e-6
    assert len(rep.rows) == 4


def test_positivity_rejects_negative_region():
    with pytest.raises(NotPositive):
        positivity_probe(cos1(2), 0.25, samples=2)
    with pytest.raises(NotPositive):
        positivity_probe(TrigPoly.mode((1,), 1, 2), 0.25, samples=2)
