"""Second-quantized Hamiltonian and its excitation-space decomposition.

On the torus the pair interaction ``kappa N^2 V(N x)`` has Fourier
coefficients ``(kappa/N) V_hat(r/N)``, so

    H_N = sum_p p^2 a*_p a_p
          + (kappa/2N) sum_{p,q,r} V_hat(r/N) a*_{p+r} a*_q a_p a_{q+r}.

Cutoff convention: a monomial is kept only if all of its modes lie in the
lattice cube; the transfer ``r`` itself is unrestricted.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np

from .errors import SectorMismatch
from .fock import FockBasis, SparseOperator, diagonal, sum_words
from .lattice import MomentumLattice
from .scattering import PotentialSpec

logger = logging.getLogger(__name__)

FOURIER_CONSTANT = 1.0  # V_hat(k) = FOURIER_CONSTANT * int V(x) exp(-i k.x) dx


def vhat_table(lattice: MomentumLattice, V: PotentialSpec, n_particles: int) -> np.ndarray:
    """``vt[i, j] = V_hat((p_i - p_j)/N)`` for all pairs of lattice modes."""
    d = lattice.modes[:, None, :] - lattice.modes[None, :, :]
    sq = np.sum(d * d, axis=2)
    uniq, inv = np.unique(sq, return_inverse=True)
    vals = FOURIER_CONSTANT * V.fourier(2 * np.pi * np.sqrt(uniq) / n_particles)
    return vals[inv].reshape(sq.shape)


def vhat_modes(lattice: MomentumLattice, V: PotentialSpec, n_particles: int) -> np.ndarray:
    """``V_hat(p/N)`` for every lattice mode ``p``."""
    vt = vhat_table(lattice, V, n_particles)
    return vt[:, lattice.zero_index]


def quartic_terms(lattice: MomentumLattice, mode_ids, vt: np.ndarray, scale: float):
    """Words of ``scale * sum V_hat((k1-k3)/N) a*_{k1} a*_{k2} a_{k3} a_{k4}``.

    The sum runs over ordered tuples with ``k1 + k2 = k3 + k4`` drawn from
    ``mode_ids``. Terms are grouped by unordered creation and annihilation
    pairs so that each distinct word is applied once.
    """
    mode_ids = [int(m) for m in mode_ids]
    pairs_by_total: dict = {}
    for i, j in combinations_with_replacement(mode_ids, 2):
        key = tuple(lattice.modes[i] + lattice.modes[j])
        pairs_by_total.setdefault(key, []).append((i, j))
    terms = []
    for key in sorted(pairs_by_total):
        plist = pairs_by_total[key]
        for c1, c2 in plist:
            cre = {(c1, c2), (c2, c1)}
            for d1, d2 in plist:
                ann = {(d1, d2), (d2, d1)}
                coeff = sum(vt[k1, k3] for k1, _ in cre for k3, _ in ann)
                if coeff == 0:
                    continue
                terms.append((scale * coeff,
                              [("a", c1, True), ("a", c2, True), ("a", d1, False), ("a", d2, False)]))
    return terms


def kinetic(basis: FockBasis) -> SparseOperator:
    """``K = sum_p p^2 a*_p a_p`` (the zero mode contributes nothing)."""
    p2 = basis.lattice.p2[basis.mode_ids]
    return diagonal(basis, basis.states.astype(float) @ p2)


def build_HN(basis_N: FockBasis, V: PotentialSpec, kappa: float,
             n_particles: int | None = None) -> SparseOperator:
    """``H_N`` on a canonical N-particle basis (zero mode included)."""
    if not basis_N.include_zero_mode:
        raise SectorMismatch("H_N acts on a basis that includes the zero mode")
    N = basis_N.n_max if n_particles is None else n_particles
    lat = basis_N.lattice
    K = kinetic(basis_N)
    if kappa == 0:
        return K
    vt = vhat_table(lat, V, N)
    terms = quartic_terms(lat, basis_N.mode_ids, vt, kappa / (2 * N))
    Q = sum_words(basis_N, terms, target=basis_N, hermitian=True)
    return SparseOperator((K.matrix + Q.matrix).tocsr(), basis_N, basis_N, True)


@dataclass
class HamiltonianSet:
    """``H_N`` (optional) and the pieces of ``L_N = U_N H_N U_N^*``."""

    L0: SparseOperator
    L2: SparseOperator
    L3: SparseOperator
    L4: SparseOperator
    K: SparseOperator
    VN: SparseOperator
    H_N: SparseOperator | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def LN(self) -> SparseOperator:
        m = self.L0.matrix + self.L2.matrix + self.L3.matrix + self.L4.matrix
        return SparseOperator(m.tocsr(), self.L0.domain, self.L0.codomain, True)

    @property
    def basis(self) -> FockBasis:
        return self.L0.domain

    def parts(self) -> dict:
        return {"L0": self.L0, "L2": self.L2, "L3": self.L3, "L4": self.L4,
                "K": self.K, "VN": self.VN}


def build_LN_parts(basis_exc: FockBasis, V: PotentialSpec, kappa: float,
                   n_particles: int | None = None, include_HN: bool = False) -> HamiltonianSet:
    """Assemble ``L^(0), L^(2), L^(3), L^(4)``, ``K`` and ``V_N`` on F_+^{<=N}."""
    if basis_exc.include_zero_mode:
        raise SectorMismatch("L_N acts on the excitation space")
    N = basis_exc.n_max if n_particles is None else n_particles
    lat = basis_exc.lattice
    z = lat.zero_index
    vt = vhat_table(lat, V, N)
    v0 = vt[z, z]
    vp = vt[:, z]
    nplus = basis_exc.nplus.astype(float)
    plus = [int(m) for m in basis_exc.mode_ids]

    L0 = diagonal(basis_exc, ((N - 1) / (2 * N)) * kappa * v0 * (N - nplus)
                  + (kappa * v0 / (2 * N)) * nplus * (N - nplus))
    K = kinetic(basis_exc)

    # quadratic: kappa V(p/N) [b*_p b_p - a*_p a_p / N] + (kappa/2) V(p/N) [b*_p b*_-p + b_p b_-p]
    terms2 = []
    for p in plus:
        terms2.append((kappa * vp[p], [("b", p, True), ("b", p, False)]))
        terms2.append((-kappa * vp[p] / N, [("a", p, True), ("a", p, False)]))
        mp = int(lat.neg[p])
        terms2.append((0.5 * kappa * vp[p], [("b", p, True), ("b", mp, True)]))
        terms2.append((0.5 * kappa * vp[p], [("b", p, False), ("b", mp, False)]))
    Q2 = sum_words(basis_exc, terms2, target=basis_exc, n_scale=N)
    L2 = SparseOperator((K.matrix + Q2.matrix).tocsr(), basis_exc, basis_exc, True)

    # cubic: (kappa/sqrt N) V(p/N) [b*_{p+q} a*_{-p} a_q + a*_q a_{-p} b_{p+q}]
    terms3 = []
    for p in plus:
        mp = int(lat.neg[p])
        for q in plus:
            s = int(lat.sum_table[p, q])
            if s < 0 or s == z:
                continue
            c = kappa * vp[p] / np.sqrt(N)
            terms3.append((c, [("b", s, True), ("a", mp, True), ("a", q, False)]))
            terms3.append((c, [("a", q, True), ("a", mp, False), ("b", s, False)]))
    L3 = sum_words(basis_exc, terms3, target=basis_exc, n_scale=N, hermitian=True)

    terms4 = quartic_terms(lat, plus, vt, kappa / (2 * N))
    L4 = sum_words(basis_exc, terms4, target=basis_exc, hermitian=True)

    hs = HamiltonianSet(L0=L0, L2=L2, L3=L3, L4=L4, K=K, VN=L4,
                        metadata={"kappa": kappa, "n_particles": N, "pmax": lat.pmax,
                                  "sector": basis_exc.sector, "potential": V.ident,
                                  "fourier_constant": FOURIER_CONSTANT})
    if include_HN:
        bN = FockBasis(lat, N, include_zero_mode=True, sector=basis_exc.sector)
        hs.H_N = build_HN(bN, V, kappa, N)
    return hs
