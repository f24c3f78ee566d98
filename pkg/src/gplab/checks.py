"""Exact operator identities as reusable numerical checks.

Every function returns a ``{name: max_abs_error}`` dictionary; callers
compare against their own tolerance. Truncation is handled by restricting
commutator identities to states where the cap cannot bite.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .bogoliubov import build_generator
from .fock import (FockBasis, b_operator, diagonal, excitation_map, ladder,
                   ladder_bilinear, sum_words)
from .hamiltonians import build_HN, build_LN_parts
from .lattice import MomentumLattice
from .scattering import PotentialSpec


def _maxabs(m) -> float:
    if sp.issparse(m):
        m = m.tocsr()
        return float(np.max(np.abs(m.data))) if m.nnz else 0.0
    return float(np.max(np.abs(m))) if np.size(m) else 0.0


def random_even_eta(lattice: MomentumLattice, norm: float, rng: np.random.Generator) -> np.ndarray:
    """Real ``eta`` with ``eta_-p = eta_p``, zero at ``p = 0`` and given 2-norm."""
    eta = rng.standard_normal(lattice.mode_count)
    eta = 0.5 * (eta + eta[lattice.neg])
    eta[lattice.zero_index] = 0.0
    n = np.linalg.norm(eta)
    return eta * (norm / n) if n > 0 else eta


def excitation_identities(lattice: MomentumLattice, N: int, sector=(0, 0, 0)) -> dict:
    """Unitarity of ``U_N`` and its four conjugation rules, over all modes."""
    bN = FockBasis(lattice, N, include_zero_mode=True, sector=sector)
    bx = FockBasis(lattice, N, sector=sector)
    U = excitation_map(bN, bx).matrix
    out = {
        "unitary_left": _maxabs(U @ U.T - sp.identity(bx.dim)),
        "unitary_right": _maxabs(U.T @ U - sp.identity(bN.dim)),
    }
    z = lattice.zero_index
    root = np.sqrt(N - bx.nplus.astype(float))

    def U_of(delta):
        return excitation_map(bN.shifted(delta), bx.shifted(delta)).matrix

    lhs = U @ ladder_bilinear(bN, z, z).matrix @ U.T
    out["a0*a0"] = _maxabs(lhs - sp.diags(N - bx.nplus.astype(float)))
    e_p0 = e_0p = e_pq = 0.0
    modes = [int(m) for m in lattice.nonzero]
    for p in modes:
        dp = tuple(lattice.modes[p])
        up = U_of(dp)
        lhs = up @ ladder_bilinear(bN, p, z).matrix @ U.T
        rhs = ladder(bx, p, True, target=bx.shifted(dp)).matrix @ sp.diags(root)
        e_p0 = max(e_p0, _maxabs(lhs - rhs))
        mdp = tuple(-c for c in dp)
        um = U_of(mdp)
        lhs = um @ ladder_bilinear(bN, z, p).matrix @ U.T
        tgt = bx.shifted(mdp)
        rhs = sp.diags(np.sqrt(N - tgt.nplus.astype(float))) @ ladder(bx, p, False, target=tgt).matrix
        e_0p = max(e_0p, _maxabs(lhs - rhs))
        for q in modes:
            d = tuple(lattice.modes[p] - lattice.modes[q])
            lhs = U_of(d) @ ladder_bilinear(bN, p, q).matrix @ U.T
            rhs = ladder_bilinear(bx, p, q).matrix
            e_pq = max(e_pq, _maxabs(lhs - rhs))
    out["ap*a0"] = e_p0
    out["a0*ap"] = e_0p
    out["ap*aq"] = e_pq
    return out


def master_identity(lattice: MomentumLattice, N: int, V: PotentialSpec, kappa: float,
                    sector=(0, 0, 0), corrupt: str | None = None) -> dict:
    """``U_N H_N U_N^* - L_N`` and Hermiticity of every piece.

    ``corrupt`` names a piece to perturb before comparing (negative test hook).
    """
    bN = FockBasis(lattice, N, include_zero_mode=True, sector=sector)
    bx = FockBasis(lattice, N, sector=sector)
    hs = build_LN_parts(bx, V, kappa, N)
    H = build_HN(bN, V, kappa, N)
    if corrupt is not None:
        parts = hs.parts()
        parts["H_N"] = H
        if corrupt not in parts:
            raise KeyError(f"unknown operator {corrupt!r}")
        target = parts[corrupt]
        bump = sp.csr_matrix(([1e-3], ([0], [min(1, target.cols - 1)])), shape=target.shape)
        target.matrix = (target.matrix + bump).tocsr()
    U = excitation_map(bN, bx).matrix
    out = {"UHU*-L": _maxabs(U @ H.matrix @ U.T - hs.LN.matrix)}
    for name, op in list(hs.parts().items()) + [("H_N", H)]:
        out[f"hermitian:{name}"] = op.hermiticity_error()
    return out


def _safe_rows(basis: FockBasis, margin: int) -> np.ndarray:
    return basis.totals <= basis.n_max - margin


def ccr_errors(basis: FockBasis) -> dict:
    """``[a_p, a*_q] = delta_pq`` and ``[a_p, a_q] = 0`` on the untruncated part."""
    if basis.sector is not None:
        raise ValueError("use an unsectored basis")
    safe = sp.diags(_safe_rows(basis, 1).astype(float))
    eye = sp.identity(basis.dim)
    e1 = e2 = 0.0
    modes = [int(m) for m in basis.mode_ids]
    lad = {(m, d): ladder(basis, m, d, target=basis).matrix for m in modes for d in (False, True)}
    for p in modes:
        for q in modes:
            c = lad[p, False] @ lad[q, True] - lad[q, True] @ lad[p, False]
            e1 = max(e1, _maxabs((c - (eye if p == q else 0 * eye)) @ safe))
            c2 = lad[p, False] @ lad[q, False] - lad[q, False] @ lad[p, False]
            e2 = max(e2, _maxabs(c2))
    return {"[a_p,a*_q]": e1, "[a_p,a_q]": e2}


def b_commutator_errors(basis: FockBasis, n_scale: int | None = None) -> dict:
    """Commutators of the modified fields on the whole truncated space."""
    if basis.sector is not None or basis.include_zero_mode:
        raise ValueError("use an unsectored excitation basis")
    N = basis.n_max if n_scale is None else n_scale
    modes = [int(m) for m in basis.mode_ids]
    b = {(m, d): b_operator(basis, m, d, n_scale=N).matrix for m in modes for d in (False, True)}
    frac = sp.diags(1.0 - basis.nplus / N)
    e_bb = e_bsbs = e_bbs = 0.0
    for p in modes:
        for q in modes:
            e_bb = max(e_bb, _maxabs(b[p, False] @ b[q, False] - b[q, False] @ b[p, False]))
            e_bsbs = max(e_bsbs, _maxabs(b[p, True] @ b[q, True] - b[q, True] @ b[p, True]))
            lhs = b[p, False] @ b[q, True] - b[q, True] @ b[p, False]
            rhs = -ladder_bilinear(basis, q, p).matrix / N
            if p == q:
                rhs = rhs + frac
            e_bbs = max(e_bbs, _maxabs(lhs - rhs))
    return {"[b_p,b_q]": e_bb, "[b*_p,b*_q]": e_bsbs, "[b_p,b*_q]": e_bbs}


def generator_commutator_errors(basis: FockBasis, eta: np.ndarray, n_scale: int | None = None,
                                modes=None) -> dict:
    """The four commutators of ``B(eta)`` with ``b_p``, ``b*_p``, ``a*_p a_q`` and ``N - N_+``."""
    if basis.sector is not None or basis.include_zero_mode:
        raise ValueError("use an unsectored excitation basis")
    lat = basis.lattice
    N = basis.n_max if n_scale is None else n_scale
    gen = build_generator(basis, eta, N)
    B = gen.B.matrix
    eta = gen.eta
    plus = [int(m) for m in basis.mode_ids]
    modes = plus if modes is None else [int(m) for m in modes]
    frac = sp.diags((N - basis.nplus) / N)
    e1 = e2 = e3 = 0.0
    for p in modes:
        mp = int(lat.neg[p])
        bp = b_operator(basis, p, False, N).matrix
        bps = b_operator(basis, p, True, N).matrix
        rhs1 = -eta[p] * frac @ b_operator(basis, mp, True, N).matrix
        rhs1 = rhs1 + sum_words(basis, [(eta[q] / N, [("b", q, True), ("a", int(lat.neg[q]), True),
                                                        ("a", p, False)]) for q in plus],
                                target=basis, n_scale=N).matrix
        e1 = max(e1, _maxabs(B @ bp - bp @ B - rhs1))
        rhs2 = -eta[p] * b_operator(basis, mp, False, N).matrix @ frac
        rhs2 = rhs2 + sum_words(basis, [(eta[q] / N, [("a", p, True), ("a", int(lat.neg[q]), False),
                                                        ("b", q, False)]) for q in plus],
                                target=basis, n_scale=N).matrix
        e2 = max(e2, _maxabs(B @ bps - bps @ B - rhs2))
        for q in modes:
            mq = int(lat.neg[q])
            A = ladder_bilinear(basis, p, q).matrix
            rhs3 = sum_words(basis, [(-eta[q], [("b", p, True), ("b", mq, True)]),
                                     (-eta[p], [("b", mp, False), ("b", q, False)])],
                             target=basis, n_scale=N).matrix
            e3 = max(e3, _maxabs(B @ A - A @ B - rhs3))
    D = diagonal(basis, N - basis.nplus.astype(float)).matrix
    rhs4 = sum_words(basis, [(eta[q], [("b", q, True), ("b", int(lat.neg[q]), True)]) for q in plus]
                     + [(eta[q], [("b", q, False), ("b", int(lat.neg[q]), False)]) for q in plus],
                     target=basis, n_scale=N).matrix
    e4 = _maxabs(B @ D - D @ B - rhs4)
    return {"[B,b_p]": e1, "[B,b*_p]": e2, "[B,a*_p a_q]": e3, "[B,N-N+]": e4}


def identity_suite(lattice: MomentumLattice, N: int, V: PotentialSpec, kappa: float,
                   corrupt: str | None = None, seed: int = 0) -> dict:
    """All exact identities at one ``(pmax, N)``; used by the ``verify`` command."""
    out = {}
    out.update(excitation_identities(lattice, N))
    out.update(master_identity(lattice, N, V, kappa, corrupt=corrupt))
    full = FockBasis(lattice, N)
    out.update(ccr_errors(full))
    out.update(b_commutator_errors(full))
    eta = random_even_eta(lattice, 0.3, np.random.default_rng(seed))
    out.update(generator_commutator_errors(full, eta))
    return out


IDENTITY_TOL = {"UHU*-L": 1e-10}
DEFAULT_IDENTITY_TOL = 1e-12


def failures(errors: dict, tol: float = DEFAULT_IDENTITY_TOL, overrides: dict | None = None) -> list:
    """Names whose error exceeds the tolerance (``UHU*-L`` uses 1e-10)."""
    table = dict(IDENTITY_TOL)
    table.update(overrides or {})
    return sorted(k for k, v in errors.items() if not v <= table.get(k, tol))


__all__ = [
    "random_even_eta", "excitation_identities", "master_identity", "ccr_errors",
    "b_commutator_errors", "generator_commutator_errors", "identity_suite", "failures",
]
