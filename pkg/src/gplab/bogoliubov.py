"""Generalized Bogoliubov transformations on the truncated excitation space.

``B(eta) = 1/2 sum_q eta_q (b*_q b*_-q - b_q b_-q)`` for real, even ``eta``.
``B`` maps F_+^{<=N} into itself, so its matrix in the truncated basis is
exact and ``e^B`` is a real orthogonal matrix.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator

from .errors import AsymmetricEta, DimensionOverflow, NonConvergence, OrderTooLarge
from .fock import FockBasis, SparseOperator, b_operator, sum_words
from .lattice import MomentumLattice

logger = logging.getLogger(__name__)

DENSE_LIMIT = 2000
ETA_COMFORT = 0.5
SYMMETRY_TOL = 1e-14


def eta_array(lattice: MomentumLattice, eta) -> np.ndarray:
    """Normalize ``eta`` (array over lattice modes or ``{mode: value}``) to an array."""
    if isinstance(eta, dict):
        out = np.zeros(lattice.mode_count)
        for mode, val in eta.items():
            i = mode if isinstance(mode, (int, np.integer)) else lattice.index_of(mode)
            if i is None:
                continue
            out[i] = val
        return out
    out = np.array(eta, dtype=float)
    if out.shape != (lattice.mode_count,):
        raise ValueError("eta must have one entry per lattice mode")
    return out


@dataclass
class BogoliubovGenerator:
    """Anti-Hermitian generator ``B(eta)`` on one excitation basis.

    ``on(basis)`` rebuilds ``B`` for another sector or cap with the same
    ``eta`` and ``N`` (used for operators that shift the momentum sector).
    """

    B: SparseOperator
    eta: np.ndarray = field(repr=False)
    eta_norm: float
    n_scale: int
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def basis(self) -> FockBasis:
        return self.B.domain

    def on(self, basis: FockBasis) -> "BogoliubovGenerator":
        if basis.same_space(self.basis):
            return self
        key = (basis.n_max, basis.sector, basis.exact)
        if key not in self._cache:
            self._cache[key] = build_generator(basis, self.eta, self.n_scale)
        return self._cache[key]

    def dense_exp(self, t: float = 1.0, limit: int = DENSE_LIMIT) -> np.ndarray:
        if self.basis.dim > limit:
            raise DimensionOverflow(f"dense exponential beyond dimension {limit}")
        return sla.expm(t * self.B.toarray())


def build_generator(basis_exc: FockBasis, eta, n_scale: int | None = None) -> BogoliubovGenerator:
    """Sparse matrix of ``B(eta)`` on ``basis_exc``."""
    if basis_exc.include_zero_mode:
        raise ValueError("B(eta) acts on the excitation space")
    lat = basis_exc.lattice
    eta = eta_array(lat, eta)
    if abs(eta[lat.zero_index]) > 0:
        eta = eta.copy()
        eta[lat.zero_index] = 0.0
    asym = np.max(np.abs(eta - eta[lat.neg])) if len(eta) else 0.0
    if asym > SYMMETRY_TOL:
        raise AsymmetricEta(f"eta is not even under p -> -p (max deviation {asym:.3g})")
    norm = float(np.sqrt(np.sum(eta[lat.nonzero] ** 2)))
    if norm > ETA_COMFORT:
        warnings.warn(f"||eta||_2 = {norm:.3g} exceeds {ETA_COMFORT}; "
                      "the commutator series may converge slowly", RuntimeWarning, stacklevel=2)
    N = basis_exc.n_max if n_scale is None else n_scale
    terms = []
    for q in basis_exc.mode_ids:
        q = int(q)
        if eta[q] == 0:
            continue
        mq = int(lat.neg[q])
        terms.append((0.5 * eta[q], [("b", q, True), ("b", mq, True)]))
        terms.append((-0.5 * eta[q], [("b", q, False), ("b", mq, False)]))
    B = sum_words(basis_exc, terms, target=basis_exc, n_scale=N)
    return BogoliubovGenerator(B=B, eta=eta, eta_norm=norm, n_scale=N)


def _norm_bound(A: sp.spmatrix) -> float:
    if A.nnz == 0:
        return 0.0
    return float(abs(A).sum(axis=1).max())


def expmv(gen: BogoliubovGenerator, v: np.ndarray, t: float = 1.0, tol: float = 1e-10,
          m_max: int = 60, step_norm: float = 4.0) -> np.ndarray:
    """``exp(t B) v`` by Krylov projection.

    Arnoldi with full reorthogonalization; the projected matrix is
    skew-symmetric tridiagonal and is exponentiated densely. The time
    interval is split so that each step has ``|dt| * ||B||_inf <= step_norm``.
    """
    v = np.asarray(v)
    if t == 0:
        return v.copy()
    A = gen.B.matrix
    vnorm = float(np.linalg.norm(v))
    if vnorm == 0 or A.nnz == 0:
        return v.copy()
    nrm = _norm_bound(A)
    steps = max(1, int(math.ceil(abs(t) * nrm / step_norm)))
    dt = t / steps
    w = v.astype(np.result_type(v.dtype, A.dtype), copy=True)
    for _ in range(steps):
        w = _krylov_step(A, w, dt, tol / steps, m_max)
    return w


def _krylov_step(A, v, dt, tol, m_max):
    n = len(v)
    beta = float(np.linalg.norm(v))
    if beta == 0:
        return v
    m_cap = min(m_max, n)
    Q = np.zeros((n, m_cap + 1), dtype=v.dtype)
    H = np.zeros((m_cap + 1, m_cap), dtype=float)
    Q[:, 0] = v / beta
    last_err = np.inf
    for j in range(m_cap):
        w = dt * (A @ Q[:, j])
        for _ in range(2):  # full reorthogonalization, twice
            h = Q[:, : j + 1].conj().T @ w
            w = w - Q[:, : j + 1] @ h
            H[: j + 1, j] += np.real(h)
        hn = float(np.linalg.norm(w))
        H[j + 1, j] = hn
        m = j + 1
        if hn <= 1e-14 * max(1.0, np.abs(H[: m, : m]).max()):
            y = sla.expm(H[:m, :m])[:, 0]
            return beta * (Q[:, :m] @ y)
        y = sla.expm(H[:m, :m])[:, 0]
        err = hn * abs(y[-1])
        if err <= tol:
            return beta * (Q[:, :m] @ y)
        last_err = err
        Q[:, j + 1] = w / hn
    raise NonConvergence(f"Krylov exponential stalled at residual {last_err:.3g}",
                         best=beta * (Q[:, :m_cap] @ sla.expm(H[:m_cap, :m_cap])[:, 0]))


def conjugated_action(gen: BogoliubovGenerator, op: SparseOperator, tol: float = 1e-10) -> LinearOperator:
    """Matrix-free ``x -> e^{-B} op e^{B} x``."""
    if not op.domain.same_space(gen.basis) or not op.codomain.same_space(gen.basis):
        raise ValueError("operator and generator must share the basis")
    A = op.matrix

    def mv(x):
        x = np.asarray(x).ravel()
        return expmv(gen, A @ expmv(gen, x, 1.0, tol), -1.0, tol)

    return LinearOperator(A.shape, matvec=mv, dtype=A.dtype)


def conjugate_dense(gen: BogoliubovGenerator, op: SparseOperator,
                    limit: int = DENSE_LIMIT) -> np.ndarray:
    """Dense ``e^{-B} op e^{B}`` (operator may change sector or cap)."""
    e_dom = gen.on(op.domain).dense_exp(1.0, limit)
    e_cod = gen.on(op.codomain).dense_exp(1.0, limit)
    return e_cod.T @ (op.matrix @ e_dom)


def ad_sequence(gen: BogoliubovGenerator, op: SparseOperator, n: int) -> list[SparseOperator]:
    """``[op, ad_B(op), ..., ad_B^n(op)]`` by sparse matrix commutators."""
    b_dom = gen.on(op.domain).B.matrix
    b_cod = gen.on(op.codomain).B.matrix
    out = [op]
    cur = op.matrix
    for _ in range(n):
        cur = (b_cod @ cur - cur @ b_dom).tocsr()
        cur.eliminate_zeros()
        out.append(SparseOperator(cur, op.domain, op.codomain))
    return out


def ad_partial_sum(gen: BogoliubovGenerator, p, m: int, dagger: bool = False,
                   basis: FockBasis | None = None) -> SparseOperator:
    """``sum_{n<=m} (-1)^n ad_B^n(b^#_p) / n!``, approximating ``e^{-B} b^#_p e^{B}``."""
    if m > 8:
        raise OrderTooLarge("partial sums are limited to m <= 8")
    if m < 0:
        raise ValueError("m must be non-negative")
    basis = gen.basis if basis is None else basis
    b = b_operator(basis, p, dagger, n_scale=gen.n_scale)
    seq = ad_sequence(gen, b, m)
    total = seq[0].matrix.astype(float)
    for n in range(1, m + 1):
        total = total + ((-1) ** n / math.factorial(n)) * seq[n].matrix
    return SparseOperator(total.tocsr(), b.domain, b.codomain)
