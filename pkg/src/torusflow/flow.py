"""Quantum stochastic flow on the capped mode space.

Three mutually checking evaluation routes for the flow j_t driven by
piecewise constant one-form noise:

* ``texp_matrix_element``: coherent matrix elements via per-interval
  matrix exponentials of the compressed generator (earliest interval
  outermost).
* ``picard_terms``: the same quantity as an iterated-integral series;
  on constant intervals the simplex integrals are exact Taylor blocks,
  combined across intervals by graded convolution, with a factorial
  tail bound.
* ``fock_picard_apply`` / ``flow_inner``: the flow vector
  J_t(x (x) E(f)) v itself.  Creation increments entangle the function
  leg with the one-form leg, so the vector is represented through its
  pairing calculus: inner products of two flow vectors evolve a
  bilinear kernel by one superoperator exponential per interval.  The
  mechanisms are the two one-sided generators, the matched
  creation-creation channel (paired coordinate partials), and creation
  against the opposite coherent datum (multiplication by the conjugated
  component composed with the partial, inserted at the creation time).
  The coherent-coherent residue contributes the exact global factor
  exp(<f1, f2>).

Everything is Galerkin-compressed onto the modes |k|_inf <= cap; both
sides of every cross-check share that compression.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import expm

from .errors import (BasisMismatch, CapExceeded, DepthExceeded,
                     GeometryMismatch, NotPositive)
from .fock import SimpleNoisePath, TimeMesh, noise_inner
from .spectral import OneForm, TrigPoly, exterior_derivative, mul_free
from .structure import psi_map

__all__ = [
    "ModeSpace",
    "FlowProblem",
    "texp_matrix_element",
    "PicardSeries",
    "picard_terms",
    "vacuum_expectation",
    "FlowFockVector",
    "fock_picard_apply",
    "flow_inner",
    "FactorizationReport",
    "factorization_check",
    "factorization_residual",
    "PositivityReport",
    "positivity_probe",
]


class ModeSpace:
    """Lexicographically ordered lattice modes |k|_inf <= cap."""

    __slots__ = ("dim", "cap", "modes", "index", "_mult_cache")

    def __init__(self, dim: int, cap: int):
        if dim < 1 or cap < 0:
            raise GeometryMismatch("mode space needs dim >= 1 and cap >= 0")
        self.dim = dim
        self.cap = cap
        self.modes = list(itertools.product(range(-cap, cap + 1), repeat=dim))
        self.index = {k: i for i, k in enumerate(self.modes)}
        self._mult_cache: Dict[Tuple, np.ndarray] = {}

    @property
    def size(self) -> int:
        return len(self.modes)

    def to_vec(self, p: TrigPoly) -> np.ndarray:
        if p.dim != self.dim:
            raise GeometryMismatch("polynomial lives on a different torus")
        v = np.zeros(self.size, dtype=complex)
        for k, c in p.items():
            i = self.index.get(k)
            if i is None:
                raise CapExceeded(f"mode {k} exceeds the working cap {self.cap}")
            v[i] = c
        return v

    def from_vec(self, v: np.ndarray) -> TrigPoly:
        coeffs = {k: v[i] for i, k in enumerate(self.modes) if v[i] != 0}
        return TrigPoly(self.dim, self.cap, coeffs)

    def partial_matrix(self, axis: int) -> np.ndarray:
        return np.diag(np.array([1j * k[axis] for k in self.modes], dtype=complex))

    def generator_diag(self) -> np.ndarray:
        return np.diag(np.array([-0.5 * sum(v * v for v in k)
                                 for k in self.modes], dtype=complex))

    def mult_matrix(self, h: TrigPoly) -> np.ndarray:
        """Compression of multiplication by h; escaping modes are dropped."""
        key = tuple(sorted(h.items()))
        hit = self._mult_cache.get(key)
        if hit is not None:
            return hit
        m = np.zeros((self.size, self.size), dtype=complex)
        for k in self.modes:
            col = self.index[k]
            for mu, c in h.items():
                tgt = tuple(a + b for a, b in zip(k, mu))
                row = self.index.get(tgt)
                if row is not None:
                    m[row, col] += c
        self._mult_cache[key] = m
        return m

    def psi_matrix(self, xi: OneForm, eta: OneForm) -> np.ndarray:
        """Column-by-column compression of psi_map(., xi, eta)."""
        m = np.zeros((self.size, self.size), dtype=complex)
        eta_zero = OneForm.zero(self.dim, 0) if eta is None else eta
        for col, k in enumerate(self.modes):
            e_k = TrigPoly.mode(k, self.dim, self.cap)
            out = psi_map(e_k, xi, eta_zero)
            kept, _ = out.project(self.cap)
            for mu, c in kept.items():
                m[self.index[mu], col] += c
        return m

    def gram_matrix(self, v1: TrigPoly, v2: TrigPoly) -> np.ndarray:
        """G[k,l] = <e_k v1, e_l v2> in L2; products taken uncapped."""
        g = np.zeros((self.size, self.size), dtype=complex)
        for i, k in enumerate(self.modes):
            pk = mul_free(TrigPoly.mode(k, self.dim, self.cap), v1)
            for j, l in enumerate(self.modes):
                ql = mul_free(TrigPoly.mode(l, self.dim, self.cap), v2)
                g[i, j] = pk.l2_inner(ql)
        return g


@dataclass(frozen=True)
class FlowProblem:
    """One flow evaluation: argument x, noise paths f (ket) and g (bra),
    boundary functions u (bra) and v (ket), and the time horizon."""

    x: TrigPoly
    f: SimpleNoisePath
    g: SimpleNoisePath
    u: TrigPoly
    v: TrigPoly
    horizon: float

    def __post_init__(self):
        if self.horizon < 0:
            raise GeometryMismatch("horizon must be nonnegative")
        d = self.x.dim
        for name, p in (("u", self.u), ("v", self.v)):
            if p.dim != d:
                raise GeometryMismatch(f"{name} lives on a different torus")
            if p.cap != self.x.cap:
                raise GeometryMismatch(f"{name} does not share the cap of x")
        for name, path in (("f", self.f), ("g", self.g)):
            if path.dim != d:
                raise GeometryMismatch(f"path {name} lives on a different torus")
            if path.support_end() > self.horizon + 1e-12:
                raise GeometryMismatch(
                    f"path {name} is supported past the horizon {self.horizon}"
                )

    @property
    def dim(self) -> int:
        return self.x.dim

    @property
    def cap(self) -> int:
        return self.x.cap

    def mesh(self) -> TimeMesh:
        return self.f.mesh.merged(self.g.mesh).refined_to(self.horizon)

    def cells(self) -> List[Tuple[float, OneForm, OneForm]]:
        """(width, f value, g value) per cell, earliest first."""
        out = []
        for a, b in self.mesh().cells():
            out.append((b - a, self.f.value_at(a), self.g.value_at(a)))
        return out


def texp_matrix_element(p: FlowProblem) -> complex:
    """exp(<g,f>) <u, (E_1 ... E_m)(x) v> with E_j = exp(dt_j Psi_j).

    The earliest interval sits outermost, so the latest generator hits x
    first.  The final multiplication by v and the pairing against u are
    taken uncapped; only the evolution itself is compressed.
    """
    space = ModeSpace(p.dim, p.cap)
    acc = np.eye(space.size, dtype=complex)
    for dt, fc, gc in p.cells():
        acc = acc @ expm(dt * space.psi_matrix(fc, gc))
    y = space.from_vec(acc @ space.to_vec(p.x))
    return np.exp(noise_inner(p.g, p.f)) * p.u.l2_inner(mul_free(y, p.v))


@dataclass
class PicardSeries:
    """Iterated-integral contributions plus their factorial envelope.

    ``terms[n]`` is the order-n matrix element; |terms[n]| is bounded by
    prefactor * s_const**n / n!, and the tail past N by
    prefactor * s_const**(N+1) * e**s_const / (N+1)!.

    ``block_norms[n]`` is the operator norm of the order-n block before
    pairing.  Scalar terms can dip through zero by cancellation, so decay
    diagnostics should read the block norms instead.
    """

    terms: List[complex]
    s_const: float
    prefactor: float
    psi_norms: List[float]
    noise_coupling: float
    block_norms: List[float]

    def partial_sum(self, n_max: Optional[int] = None) -> complex:
        terms = self.terms if n_max is None else self.terms[: n_max + 1]
        return sum(terms)

    def term_bound(self, n: int) -> float:
        return self.prefactor * self.s_const ** n / math.factorial(n)

    def tail_bound(self, after: int) -> float:
        return (self.prefactor * self.s_const ** (after + 1)
                * math.exp(self.s_const) / math.factorial(after + 1))


def picard_terms(p: FlowProblem, n_max: int) -> PicardSeries:
    """Orders 0..n_max of the iterated-integral expansion.

    Per interval the simplex integrals of a constant generator collapse
    to Taylor blocks (dt Psi)^k / k!; blocks combine across intervals by
    graded convolution in the same outermost-earliest order as the
    exponential route.
    """
    if n_max < 0:
        raise GeometryMismatch("n_max must be nonnegative")
    space = ModeSpace(p.dim, p.cap)
    cells = p.cells()
    graded = [np.eye(space.size, dtype=complex)]
    graded += [np.zeros((space.size, space.size), dtype=complex)
               for _ in range(n_max)]
    psi_norms = []
    s_const = 0.0
    coupling = 0.0
    lmat = space.generator_diag()
    for dt, fc, gc in cells:
        psi = space.psi_matrix(fc, gc)
        nrm = float(np.linalg.norm(psi, 2))
        psi_norms.append(nrm)
        s_const += dt * nrm
        coupling = max(coupling, float(np.linalg.norm(psi - lmat, 2)))
        blocks = [np.eye(space.size, dtype=complex)]
        for k in range(1, n_max + 1):
            blocks.append(blocks[-1] @ (dt * psi) / k)
        nxt = [np.zeros_like(graded[0]) for _ in range(n_max + 1)]
        for n in range(n_max + 1):
            for k in range(n + 1):
                nxt[n] += graded[n - k] @ blocks[k]
        graded = nxt
    xv = space.to_vec(p.x)
    coh = np.exp(noise_inner(p.g, p.f))
    terms = [coh * p.u.l2_inner(mul_free(space.from_vec(a @ xv), p.v))
             for a in graded]
    prefactor = (abs(coh) * p.u.l2_norm() * p.v.l2_norm()
                 * math.sqrt(space.size) * float(np.linalg.norm(xv)))
    block_norms = [float(np.linalg.norm(a, 2)) for a in graded]
    return PicardSeries(terms, s_const, prefactor, psi_norms, coupling,
                        block_norms)


def vacuum_expectation(x: TrigPoly, u: TrigPoly, v: TrigPoly, t: float) -> complex:
    """<u Omega, j_t(x) v Omega>: the zero-noise matrix element."""
    zero = SimpleNoisePath.zero(x.dim, horizon=max(t, 1.0))
    return texp_matrix_element(FlowProblem(x, zero, zero, u, v, t))


# ----------------------------------------------------------------------
# explicit Fock engine


class _EngineCell:
    """Per-interval data shared by the pairing mechanisms."""

    __slots__ = ("dt", "form", "phi")

    def __init__(self, dt: float, form: OneForm, phi: np.ndarray):
        self.dt = dt
        self.form = form
        self.phi = phi


class FlowFockVector:
    """Truncated flow vector J_t^{(<= n_max)}(x (x) E(f)) v.

    The creation legs are module-entangled with the function slot, so
    amplitudes over any fixed one-form basis cannot carry them exactly;
    the vector is stored as its generating data (argument, noise path,
    per-cell compressed generators) and all inner products are evaluated
    through the pairing calculus in ``flow_inner``.  ``n_max`` = None
    means the full series (one exponential per interval).
    """

    def __init__(self, problem: FlowProblem, n_max: Optional[int], depth: int,
                 space: ModeSpace, cells: List[_EngineCell],
                 leg_loss_bound: float):
        self.problem = problem
        self.n_max = n_max
        self.depth = depth
        self.space = space
        self.cells = cells
        self.leg_loss_bound = leg_loss_bound

    @property
    def x_vec(self) -> np.ndarray:
        return self.space.to_vec(self.problem.x)

    def inner(self, other: "FlowFockVector") -> complex:
        return flow_inner(self, other)

    def norm(self) -> float:
        return math.sqrt(max(flow_inner(self, self).real, 0.0))

    def pair_coherent(self, u: TrigPoly, g: SimpleNoisePath) -> complex:
        """<u E(g), self>: pairing against a coherent vector.

        Creation legs are consumed by g cell by cell: each leg inserts
        multiplication by conj(g_i) composed with the i-th partial at
        the creation position inside the evolution.
        """
        space = self.space
        if u.dim != space.dim:
            raise GeometryMismatch("u lives on a different torus")
        g = g.on_mesh(self.problem.mesh())
        # graded state: (order, legs) -> vector; order None means full
        if self.n_max is None:
            y = space.to_vec(self.problem.x)
            for cell, (a, _) in zip(self.cells[::-1],
                                    self.problem.mesh().cells()[::-1]):
                gc = g.value_at(a)
                gen = cell.phi.copy()
                for i in range(space.dim):
                    if not gc.comps[i].is_zero():
                        gen += (space.mult_matrix(gc.comps[i].conjugate())
                                @ space.partial_matrix(i))
                y = expm(cell.dt * gen) @ y
            poly = space.from_vec(y)
        else:
            state: Dict[Tuple[int, int], np.ndarray] = {
                (0, 0): space.to_vec(self.problem.x)
            }
            mesh_cells = self.problem.mesh().cells()
            for cell, (a, _) in zip(self.cells[::-1], mesh_cells[::-1]):
                gc = g.value_at(a)
                inserts = []
                for i in range(space.dim):
                    if not gc.comps[i].is_zero():
                        inserts.append(space.mult_matrix(gc.comps[i].conjugate())
                                       @ space.partial_matrix(i))
                out = {k: v.copy() for k, v in state.items()}
                term = state
                for k in range(1, 2 * self.n_max + 2):
                    nxt: Dict[Tuple[int, int], np.ndarray] = {}
                    for (n, l), vec in term.items():
                        moved = cell.phi @ vec * (cell.dt / k)
                        if n + 1 <= self.n_max:
                            _acc(nxt, (n + 1, l), moved)
                        if n + 1 <= self.n_max and l + 1 <= self.depth:
                            for ins in inserts:
                                _acc(nxt, (n + 1, l + 1),
                                     ins @ vec * (cell.dt / k))
                    if not nxt:
                        break
                    for key, vec in nxt.items():
                        _acc(out, key, vec)
                    term = nxt
                state = out
            total = np.zeros(space.size, dtype=complex)
            for vec in state.values():
                total += vec
            poly = space.from_vec(total)
        coh = np.exp(noise_inner(g, self.problem.f))
        return coh * u.l2_inner(mul_free(poly, self.problem.v))


def _acc(table: Dict, key, value: np.ndarray) -> None:
    cur = table.get(key)
    if cur is None:
        table[key] = value
    else:
        table[key] = cur + value


def _build_vector(p: FlowProblem, n_max: Optional[int], depth: int,
                  loss_tol: float = 1e-6) -> FlowFockVector:
    space = ModeSpace(p.dim, p.cap)
    zero = OneForm.zero(p.dim, 0)
    cells = []
    for dt, fc, _ in p.cells():
        cells.append(_EngineCell(dt, fc, space.psi_matrix(fc, zero)))
    leg_loss = 0.0
    if n_max is not None and n_max > depth:
        # order budget allows more creation increments than the leg
        # budget keeps, so the vector genuinely drops content: bound
        # the clipped sectors by a factorial envelope
        d_norms = sum(float(np.linalg.norm(space.partial_matrix(i), 2)) ** 2
                      for i in range(space.dim))
        beta_legs = sum(c.dt * d_norms for c in cells)
        beta_all = sum(c.dt * 2 * float(np.linalg.norm(c.phi, 2))
                       for c in cells) + beta_legs
        pref = float(np.linalg.norm(space.to_vec(p.x))) ** 2 * \
            float(np.linalg.norm(space.gram_matrix(p.v, p.v), 2))
        tail = 0.0
        q = depth + 1
        fact = math.factorial(q)
        for _ in range(60):
            inc = beta_legs ** q / fact
            tail += inc
            if inc < 1e-18 * max(tail, 1.0):
                break
            q += 1
            fact *= q
        leg_loss = pref * math.exp(beta_all - beta_legs) * tail
        if leg_loss > loss_tol:
            raise DepthExceeded(
                f"creation content past {depth} legs bounded only by "
                f"{leg_loss:.3e} (> {loss_tol:.1e})"
            )
    return FlowFockVector(p, n_max, depth, space, cells, leg_loss)


def fock_picard_apply(p: FlowProblem, n_max: Optional[int], depth: int,
                      loss_tol: float = 1e-6) -> FlowFockVector:
    """Build the truncated flow vector for later pairings.

    Small scales only: mode cap <= 4 and at most 4 mesh intervals keep
    every pairing a handful of dense exponentials.  n_max = None keeps
    the full series (legs included, whatever the depth); DepthExceeded
    fires when a finite order budget clips creation content past
    ``depth`` legs by more than ``loss_tol``.
    """
    if p.cap > 4:
        raise CapExceeded("the explicit engine is limited to mode cap <= 4")
    if p.mesh().num_cells > 4:
        raise GeometryMismatch("the explicit engine is limited to 4 mesh cells")
    if depth > 3:
        raise DepthExceeded("the explicit engine is limited to depth <= 3")
    return _build_vector(p, n_max, depth, loss_tol)


def _superop(a_left: Optional[np.ndarray], b_right: Optional[np.ndarray],
             size: int) -> np.ndarray:
    """Row-major matrix for W -> A W B (A or B may be the identity)."""
    eye = np.eye(size, dtype=complex)
    a = eye if a_left is None else a_left
    b = eye if b_right is None else b_right
    return np.kron(a, b.T)


def flow_inner(v1: FlowFockVector, v2: FlowFockVector) -> complex:
    """<v1, v2>: joint pairing of two flow vectors on the same mesh.

    The bilinear kernel W with value x1^H W x2 evolves per interval by

        dW = Phi1^H W + W Phi2                (one-sided generators)
           + sum_i D_i^H W D_i                (matched creation legs)
           + sum_i (M_{conj f2,i} D_i)^H W    (side-1 legs eaten by f2)
           + sum_i W (M_{conj f1,i} D_i)      (side-2 legs eaten by f1)

    and the coherent residues contribute exp(<f1, f2>) globally.
    Finite n_max/depth truncations keep the graded pieces of the same
    expansion.
    """
    if v1.space.dim != v2.space.dim or v1.space.cap != v2.space.cap:
        raise BasisMismatch("flow vectors use different mode spaces")
    m1, m2 = v1.problem.mesh(), v2.problem.mesh()
    if m1 != m2:
        raise BasisMismatch("flow vectors use different time meshes")
    if v1.depth != v2.depth:
        raise BasisMismatch("flow vectors use different depths")
    space = v1.space
    size = space.size
    gram = space.gram_matrix(v1.problem.v, v2.problem.v)
    coh = np.exp(noise_inner(v1.problem.f, v2.problem.f))
    x1 = v1.x_vec
    x2 = v2.x_vec

    full = v1.n_max is None and v2.n_max is None
    if full:
        w = gram.reshape(-1)
        for c1, c2 in zip(v1.cells, v2.cells):
            t_op = _superop(c1.phi.conj().T, None, size)
            t_op += _superop(None, c2.phi, size)
            for i in range(space.dim):
                d_i = space.partial_matrix(i)
                t_op += _superop(d_i.conj().T, d_i, size)
                f2i = c2.form.comps[i]
                if not f2i.is_zero():
                    ins = space.mult_matrix(f2i.conjugate()) @ d_i
                    t_op += _superop(ins.conj().T, None, size)
                f1i = c1.form.comps[i]
                if not f1i.is_zero():
                    ins = space.mult_matrix(f1i.conjugate()) @ d_i
                    t_op += _superop(None, ins, size)
            w = expm(c1.dt * t_op) @ w
        wmat = w.reshape(size, size)
        return coh * complex(np.vdot(x1, wmat @ x2))

    n1_cap = v1.n_max if v1.n_max is not None else 2 * v1.depth + 8
    n2_cap = v2.n_max if v2.n_max is not None else 2 * v2.depth + 8
    depth = v1.depth
    state: Dict[Tuple[int, int, int, int], np.ndarray] = {(0, 0, 0, 0): gram}
    for c1, c2 in zip(v1.cells, v2.cells):
        mechs = []  # (dn1, dn2, dl1, dl2, left or None, right or None)
        mechs.append((1, 0, 0, 0, c1.phi.conj().T, None))
        mechs.append((0, 1, 0, 0, None, c2.phi))
        for i in range(space.dim):
            d_i = space.partial_matrix(i)
            mechs.append((1, 1, 1, 1, d_i.conj().T, d_i))
            f2i = c2.form.comps[i]
            if not f2i.is_zero():
                ins = space.mult_matrix(f2i.conjugate()) @ d_i
                mechs.append((1, 0, 1, 0, ins.conj().T, None))
            f1i = c1.form.comps[i]
            if not f1i.is_zero():
                ins = space.mult_matrix(f1i.conjugate()) @ d_i
                mechs.append((0, 1, 0, 1, None, ins))
        out = {k: w.copy() for k, w in state.items()}
        term = state
        for k in range(1, n1_cap + n2_cap + 2):
            nxt: Dict[Tuple[int, int, int, int], np.ndarray] = {}
            for (n1, n2, l1, l2), w in term.items():
                for dn1, dn2, dl1, dl2, left, right in mechs:
                    if (n1 + dn1 > n1_cap or n2 + dn2 > n2_cap
                            or l1 + dl1 > depth or l2 + dl2 > depth):
                        continue
                    moved = w
                    if left is not None:
                        moved = left @ moved
                    if right is not None:
                        moved = moved @ right
                    _acc(nxt, (n1 + dn1, n2 + dn2, l1 + dl1, l2 + dl2),
                         moved * (c1.dt / k))
            if not nxt:
                break
            for key, w in nxt.items():
                _acc(out, key, w)
            term = nxt
        state = out
    total = 0.0 + 0.0j
    for w in state.values():
        total += complex(np.vdot(x1, w @ x2))
    return coh * total


def _pairing_tail_apriori(v1: FlowFockVector, v2: FlowFockVector) -> float:
    """Factorial envelope on everything the graded pairing drops."""
    space = v1.space
    d_norms = sum(float(np.linalg.norm(space.partial_matrix(i), 2)) ** 2
                  for i in range(space.dim))
    beta = 0.0
    for c1, c2 in zip(v1.cells, v2.cells):
        rate = (2 * max(float(np.linalg.norm(c1.phi, 2)),
                        float(np.linalg.norm(c2.phi, 2)))
                + d_norms)
        for i in range(space.dim):
            for comp in (c1.form.comps[i], c2.form.comps[i]):
                if not comp.is_zero():
                    rate += float(np.linalg.norm(
                        space.mult_matrix(comp.conjugate())
                        @ space.partial_matrix(i), 2))
        beta += c1.dt * rate
    pref = (float(np.linalg.norm(v1.x_vec)) * float(np.linalg.norm(v2.x_vec))
            * float(np.linalg.norm(
                space.gram_matrix(v1.problem.v, v2.problem.v), 2))
            * abs(np.exp(noise_inner(v1.problem.f, v2.problem.f))))
    caps = [v.n_max for v in (v1, v2) if v.n_max is not None]
    caps.append(v1.depth)
    q_min = min(caps) + 1
    tail = 0.0
    fact = math.factorial(q_min)
    q = q_min
    for _ in range(120):
        inc = beta ** q / fact
        tail += inc
        if inc < 1e-18 * max(tail, 1.0):
            break
        q += 1
        fact *= q
    return pref * tail


@dataclass
class FactorizationReport:
    """Cross-check of the flow pairing against the transported product."""

    lhs: complex
    rhs: complex
    residual: float
    bound: float
    truncation_deficit: float
    cap_sensitivity: float
    tail_apriori: float


def factorization_check(a1: TrigPoly, a2: TrigPoly,
                        f1: SimpleNoisePath, f2: SimpleNoisePath,
                        v1: TrigPoly, v2: TrigPoly, t: float,
                        n_max: Optional[int] = 3, depth: int = 3,
                        safety: float = 4.0) -> FactorizationReport:
    """|<J(a1 (x) Ef1)v1, J(a2 (x) Ef2)v2> - <v1 Ef1, J(a1* a2 (x) Ef2)v2>|.

    The reported bound combines the measured distance of the truncated
    pairing from its full-series value, the measured sensitivity of both
    routes to raising the mode cap by two (scaled by ``safety``), and a
    float slop; the identity itself is exact for the uncompressed flow.
    """
    if not (a1.is_selfadjoint() and a2.is_selfadjoint()):
        raise ValueError("the factorization identity is checked for "
                         "self-adjoint arguments")
    if t < 0:
        raise GeometryMismatch("horizon must be nonnegative")

    def lhs_at(cap: int, n_max_, depth_) -> complex:
        xa = a1.with_cap(cap) if a1.cap != cap else a1
        xb = a2.with_cap(cap) if a2.cap != cap else a2
        va = v1.with_cap(cap) if v1.cap != cap else v1
        vb = v2.with_cap(cap) if v2.cap != cap else v2
        pa = FlowProblem(xa, f1, SimpleNoisePath.zero(a1.dim, max(t, 1.0)), va, va, t)
        pb = FlowProblem(xb, f2, SimpleNoisePath.zero(a1.dim, max(t, 1.0)), vb, vb, t)
        wa = _build_vector(pa, n_max_, depth_)
        wb = _build_vector(pb, n_max_, depth_)
        return flow_inner(wa, wb)

    def rhs_at(cap: int) -> complex:
        prod = mul_free(a1.conjugate(), a2).with_cap(cap)
        va = v1.with_cap(cap) if v1.cap != cap else v1
        vb = v2.with_cap(cap) if v2.cap != cap else v2
        return texp_matrix_element(FlowProblem(prod, f2, f1, va, vb, t))

    cap = a1.cap
    lhs = lhs_at(cap, n_max, depth)
    rhs = rhs_at(cap)
    lhs_full = lhs_at(cap, None, depth) if n_max is not None else lhs
    trunc = abs(lhs - lhs_full)
    lhs_hi = lhs_at(cap + 2, None, depth)
    rhs_hi = rhs_at(cap + 2)
    cap_sens = abs(lhs_hi - lhs_full) + abs(rhs_hi - rhs)
    scale = max(1.0, abs(lhs), abs(rhs))
    pa = FlowProblem(a1, f1, SimpleNoisePath.zero(a1.dim, max(t, 1.0)), v1, v1, t)
    pb = FlowProblem(a2, f2, SimpleNoisePath.zero(a1.dim, max(t, 1.0)), v2, v2, t)
    tail = _pairing_tail_apriori(fock_picard_apply(pa, n_max, depth),
                                 fock_picard_apply(pb, n_max, depth))
    residual = abs(lhs - rhs)
    bound = trunc + safety * cap_sens + 1e-9 * scale
    return FactorizationReport(lhs, rhs, residual, bound, trunc,
                               cap_sens, tail)


def factorization_residual(a1: TrigPoly, a2: TrigPoly,
                           f1: SimpleNoisePath, f2: SimpleNoisePath,
                           v1: TrigPoly, v2: TrigPoly, t: float,
                           n_max: Optional[int] = 3,
                           depth: int = 3) -> float:
    return factorization_check(a1, a2, f1, f2, v1, v2, t,
                               n_max=n_max, depth=depth).residual


@dataclass
class PositivityReport:
    min_pairing: float
    max_ratio: float
    sup_x: float
    rows: List[Tuple[float, float]] = field(default_factory=list)


def positivity_probe(x: TrigPoly, t: float, samples: int = 8,
                     seed: int = 0) -> PositivityReport:
    """min <theta, j_t(x) theta> and max ||j_t(x) theta|| / ||theta||.

    theta ranges over random coherent states v E(f) with exact one-form
    noise, evaluated through the full Fock engine pairing.  x must be
    pointwise nonnegative (NotPositive otherwise); the flow then keeps
    the pairings nonnegative and the norm ratio below sup|x|.
    """
    if not x.is_selfadjoint():
        raise NotPositive("argument is not self-adjoint")
    grid = x.values_on_grid(4 * max(x.max_abs_mode(), 1) + 1)
    if float(np.min(grid.real)) < -1e-12:
        raise NotPositive("argument has a strictly negative region")
    rng = np.random.default_rng(seed)
    d = x.dim
    sup_x = x.sup_norm()
    basis_modes = [tuple(int(i == j) for i in range(d)) for j in range(d)]
    min_pair = math.inf
    max_ratio = 0.0
    rows: List[Tuple[float, float]] = []
    for _ in range(samples):
        coeffs = {(0,) * d: 1.0 + 0.0j}
        for k in basis_modes:
            c = (rng.normal() + 1j * rng.normal()) * 0.3
            coeffs[k] = c
            coeffs[tuple(-v for v in k)] = c.conjugate()
        v = TrigPoly(d, x.cap, coeffs)
        h = TrigPoly.zero(d, x.cap)
        for k in basis_modes:
            h = h + TrigPoly.cosine(k, d, x.cap) * rng.normal() * 0.4 \
                + TrigPoly.sine(k, d, x.cap) * rng.normal() * 0.4
        f = SimpleNoisePath.indicator(exterior_derivative(h), 0.0, t)
        prob = FlowProblem(x, f, SimpleNoisePath.zero(d, t), v, v, t)
        vec = fock_picard_apply(prob, None, 3)
        pairing = vec.pair_coherent(v, f)
        norm_sq = flow_inner(vec, vec).real
        theta_sq = math.exp(noise_inner(f, f).real) * v.l2_norm() ** 2
        ratio = math.sqrt(max(norm_sq, 0.0) / theta_sq)
        min_pair = min(min_pair, pairing.real)
        max_ratio = max(max_ratio, ratio)
        rows.append((pairing.real, ratio))
    return PositivityReport(min_pair, max_ratio, sup_x, rows)
