"""Truncated bosonic Fock spaces in the plane-wave occupation basis.

A :class:`FockBasis` enumerates occupation vectors over a subset of lattice
modes (all modes, or only the nonzero ones for the excitation space), with a
cap on the total particle number and an optional total-momentum sector.
Operators are assembled by acting with words of ladder operators on every
basis state at once; intermediate states are never truncated, only the final
state must lie in the target basis.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DimensionOverflow, SectorMismatch
from .lattice import MomentumLattice

logger = logging.getLogger(__name__)

DEFAULT_DIMENSION_LIMIT = 5_000_000

# fixed hashing weights; keys are only used to find candidates, every hit is
# verified against the stored occupation row
_KEY_RNG_SEED = 0x5EED


def _key_weights(m: int) -> np.ndarray:
    rng = np.random.default_rng(_KEY_RNG_SEED)
    return rng.integers(1, 2**63 - 1, size=m, dtype=np.int64).astype(np.uint64)


def _as_sector(sector) -> tuple[int, int, int] | None:
    if sector is None:
        return None
    s = tuple(int(c) for c in sector)
    if len(s) != 3:
        raise ValueError("sector must be an integer 3-vector")
    return s


class FockBasis:
    """Enumerated occupation-number basis of a truncated bosonic Fock space.

    Parameters
    ----------
    lattice : MomentumLattice
    n_max : int
        Particle cap ``N``.
    include_zero_mode : bool
        ``True`` for the canonical N-particle space (with ``exact=True``),
        ``False`` for the excitation space F_+^{<=N}.
    sector : 3-vector of int, optional
        Total momentum in units of 2*pi.
    exact : bool, optional
        Require exactly ``n_max`` particles. Defaults to ``include_zero_mode``.
    limit : int
        Raise :class:`DimensionOverflow` beyond this many states.
    """

    def __init__(
        self,
        lattice: MomentumLattice,
        n_max: int,
        include_zero_mode: bool = False,
        sector=None,
        exact: bool | None = None,
        limit: int = DEFAULT_DIMENSION_LIMIT,
    ):
        if n_max < 1:
            raise ValueError("n_max must be >= 1")
        self.lattice = lattice
        self.n_max = int(n_max)
        self.include_zero_mode = bool(include_zero_mode)
        self.sector = _as_sector(sector)
        self.exact = self.include_zero_mode if exact is None else bool(exact)
        self.limit = limit

        if self.include_zero_mode:
            self.mode_ids = np.arange(lattice.mode_count)
        else:
            self.mode_ids = lattice.nonzero.copy()
        self.col_of = np.full(lattice.mode_count, -1, dtype=np.int64)
        self.col_of[self.mode_ids] = np.arange(len(self.mode_ids))

        self.states = _enumerate_states(
            lattice.modes[self.mode_ids], lattice.pmax, self.n_max, self.exact,
            self.sector, limit,
        )
        self.states.setflags(write=False)
        self._weights = _key_weights(len(self.mode_ids))
        keys = self._keys(self.states)
        self._state_keys = keys
        self._order = np.argsort(keys, kind="stable")
        self._sorted_keys = keys[self._order]
        if np.any(np.diff(self._sorted_keys.astype(np.uint64)) == 0):
            raise RuntimeError("hash collision in basis keys")  # pragma: no cover
        self._shifted: dict = {}
        self._word_cache: dict = {}

    # ------------------------------------------------------------------ basics
    def __len__(self) -> int:
        return len(self.states)

    @property
    def dim(self) -> int:
        return len(self.states)

    def __repr__(self):
        return (f"FockBasis(pmax={self.lattice.pmax}, n_max={self.n_max}, "
                f"zero_mode={self.include_zero_mode}, exact={self.exact}, "
                f"sector={self.sector}, dim={self.dim})")

    @cached_property
    def zero_col(self) -> int:
        return int(self.col_of[self.lattice.zero_index])

    @cached_property
    def plus_cols(self) -> np.ndarray:
        """Columns of the nonzero modes."""
        cols = self.col_of[self.lattice.nonzero]
        return cols[cols >= 0]

    @cached_property
    def totals(self) -> np.ndarray:
        return self.states.sum(axis=1).astype(np.int64)

    @cached_property
    def nplus(self) -> np.ndarray:
        """Eigenvalues of N_+ (particles outside the zero mode) per state."""
        return self.states[:, self.plus_cols].sum(axis=1).astype(np.int64)

    @cached_property
    def momenta(self) -> np.ndarray:
        return self.states.astype(np.int64) @ self.lattice.modes[self.mode_ids]

    @cached_property
    def vacuum_index(self) -> int:
        """Index of the state with no excitations (Omega, or phi_0^{(x)N})."""
        hits = np.flatnonzero(self.nplus == 0)
        if len(hits) != 1:
            raise SectorMismatch("basis does not contain a unique vacuum state")
        return int(hits[0])

    def _keys(self, occ: np.ndarray) -> np.ndarray:
        return (occ.astype(np.uint64) * self._weights).sum(axis=1, dtype=np.uint64)

    def lookup(self, occ: np.ndarray, keys: np.ndarray | None = None) -> np.ndarray:
        """Positions of occupation rows in the basis; -1 where absent.

        ``keys`` may carry precomputed hash keys of the rows.
        """
        occ = np.asarray(occ)
        if occ.ndim == 1:
            occ = occ[None, :]
        out = np.full(len(occ), -1, dtype=np.int64)
        if len(occ) == 0 or self.dim == 0:
            return out
        ok = np.all(occ >= 0, axis=1)
        if not np.any(ok):
            return out
        sub = occ[ok]
        keys = self._keys(sub) if keys is None else keys[ok]
        pos = np.searchsorted(self._sorted_keys, keys)
        pos = np.minimum(pos, len(self._sorted_keys) - 1)
        cand = self._order[pos]
        match = self._sorted_keys[pos] == keys
        match[match] = np.all(self.states[cand[match]] == sub[match], axis=1)
        res = np.where(match, cand, -1)
        out[np.flatnonzero(ok)] = res
        return out

    def index_of_state(self, occ) -> int | None:
        i = int(self.lookup(np.asarray(occ, dtype=np.int64))[0])
        return None if i < 0 else i

    def state_of(self, occupations: dict) -> np.ndarray:
        """Occupation row from ``{mode (index or 3-vector): count}``."""
        row = np.zeros(len(self.mode_ids), dtype=np.int64)
        for mode, count in occupations.items():
            row[self.col(mode)] += count
        return row

    def col(self, mode) -> int:
        i = _mode_index(self.lattice, mode)
        c = int(self.col_of[i])
        if c < 0:
            raise KeyError(f"mode {self.lattice.mode_at(i)} not in this basis")
        return c

    def with_sector(self, sector) -> "FockBasis":
        sector = _as_sector(sector)
        if sector == self.sector:
            return self
        key = ("sector", sector)
        if key not in self._shifted:
            self._shifted[key] = FockBasis(
                self.lattice, self.n_max, self.include_zero_mode, sector,
                self.exact, self.limit)
        return self._shifted[key]

    def shifted(self, delta) -> "FockBasis":
        """Basis of the sector moved by ``delta`` (itself if unsectored)."""
        if self.sector is None:
            return self
        delta = tuple(int(c) for c in delta)
        if delta == (0, 0, 0):
            return self
        return self.with_sector(tuple(s + d for s, d in zip(self.sector, delta)))

    def with_cap(self, n_max: int, exact: bool | None = None) -> "FockBasis":
        exact = self.exact if exact is None else exact
        if n_max == self.n_max and exact == self.exact:
            return self
        key = ("cap", n_max, exact)
        if key not in self._shifted:
            self._shifted[key] = FockBasis(
                self.lattice, n_max, self.include_zero_mode, self.sector, exact, self.limit)
        return self._shifted[key]

    def same_space(self, other: "FockBasis") -> bool:
        return (other is self) or (
            other.lattice == self.lattice and other.n_max == self.n_max
            and other.include_zero_mode == self.include_zero_mode
            and other.sector == self.sector and other.exact == self.exact)


def _mode_index(lattice: MomentumLattice, mode) -> int:
    if isinstance(mode, (int, np.integer)):
        return int(mode)
    i = lattice.index_of(mode)
    if i is None:
        raise KeyError(f"mode {tuple(mode)} outside the lattice cube")
    return i


def _enumerate_states(mode_vecs, pmax, n_max, exact, sector, limit):
    """All occupation vectors with the particle cap and momentum constraint.

    A backward feasibility table over (particles used, momentum) guarantees
    that every partial assignment kept in the forward sweep completes, so the
    working set never exceeds the final dimension.
    """
    m = len(mode_vecs)
    if m == 0:
        if exact and n_max > 0:
            return np.zeros((0, 0), dtype=np.int16)
        return np.zeros((1, 0), dtype=np.int16)

    use_k = sector is not None
    kmax = n_max * pmax
    w = 2 * kmax + 1 if use_k else 1

    # feas[j][c, kx, ky, kz]: modes j..m-1 can hold exactly c particles with momentum k
    feas = [None] * (m + 1)
    last = np.zeros((n_max + 1, w, w, w), dtype=bool)
    last[0, kmax if use_k else 0, kmax if use_k else 0, kmax if use_k else 0] = True
    feas[m] = last
    for j in range(m - 1, -1, -1):
        nxt = feas[j + 1]
        cur = np.zeros_like(nxt)
        v = mode_vecs[j] if use_k else np.zeros(3, dtype=np.int64)
        for n in range(n_max + 1):
            shift = n * v
            src = nxt[: n_max + 1 - n]
            dst = cur[n:]
            dst |= _shift3(src, shift)
        feas[j] = cur
    if not exact:
        feas = [np.logical_or.accumulate(f, axis=0) for f in feas]

    target = np.array(sector if use_k else (0, 0, 0), dtype=np.int64)
    if use_k and np.any(np.abs(target) > kmax):
        return np.zeros((0, m), dtype=np.int16)

    occ = np.zeros((1, 0), dtype=np.int16)
    count = np.zeros(1, dtype=np.int64)
    mom = np.zeros((1, 3), dtype=np.int64)
    for j in range(m):
        v = mode_vecs[j] if use_k else np.zeros(3, dtype=np.int64)
        blocks_occ, blocks_count, blocks_mom = [], [], []
        for n in range(n_max + 1):
            c = count + n
            keep = c <= n_max
            if not np.any(keep):
                break
            k = mom[keep] + n * v
            rest = target - k
            if use_k:
                inside = np.all(np.abs(rest) <= kmax, axis=1)
            else:
                inside = np.ones(len(rest), dtype=bool)
            ok = np.zeros(len(rest), dtype=bool)
            ci = n_max - c[keep]
            r = rest[inside] + (kmax if use_k else 0)
            ok[inside] = feas[j + 1][ci[inside], r[:, 0], r[:, 1], r[:, 2]]
            sel = np.flatnonzero(keep)[ok]
            if len(sel) == 0:
                continue
            col = np.full((len(sel), 1), n, dtype=np.int16)
            blocks_occ.append(np.hstack([occ[sel], col]))
            blocks_count.append(c[sel])
            blocks_mom.append(k[ok])
        if not blocks_occ:
            return np.zeros((0, m), dtype=np.int16)
        occ = np.vstack(blocks_occ)
        count = np.concatenate(blocks_count)
        mom = np.vstack(blocks_mom)
        if len(occ) > limit:
            raise DimensionOverflow(f"basis dimension exceeds limit {limit}")
    order = np.lexsort(occ.T[::-1])
    return np.ascontiguousarray(occ[order])


def _shift3(a: np.ndarray, shift) -> np.ndarray:
    """Shift the last three axes of ``a`` by ``shift`` (zero fill)."""
    out = np.zeros_like(a)
    src = [slice(None)]
    dst = [slice(None)]
    for s, size in zip(shift, a.shape[1:]):
        s = int(s)
        if abs(s) >= size:
            return out
        if s >= 0:
            src.append(slice(0, size - s))
            dst.append(slice(s, size))
        else:
            src.append(slice(-s, size))
            dst.append(slice(0, size + s))
    out[tuple(dst)] = a[tuple(src)]
    return out


def enumerate_basis(lattice, n_max, include_zero_mode=False, sector=None,
                    exact=None, limit=DEFAULT_DIMENSION_LIMIT) -> FockBasis:
    return FockBasis(lattice, n_max, include_zero_mode, sector, exact, limit)


# ---------------------------------------------------------------------------
# operators


@dataclass
class SparseOperator:
    """Sparse matrix from ``domain`` to ``codomain`` with a Hermiticity flag."""

    matrix: sp.csr_matrix
    domain: FockBasis
    codomain: FockBasis
    hermitian: bool = False

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def rows(self):
        return self.matrix.shape[0]

    @property
    def cols(self):
        return self.matrix.shape[1]

    def entries(self):
        coo = self.matrix.tocoo()
        return list(zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()))

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    @property
    def H(self) -> "SparseOperator":
        return SparseOperator(self.matrix.conj().T.tocsr(), self.codomain, self.domain,
                              self.hermitian)

    def dot(self, v):
        return self.matrix @ v

    def __matmul__(self, other):
        if isinstance(other, SparseOperator):
            if not other.codomain.same_space(self.domain):
                raise SectorMismatch("operator composition across mismatched bases")
            return SparseOperator((self.matrix @ other.matrix).tocsr(), other.domain,
                                  self.codomain)
        return self.matrix @ other

    def _check_same(self, other):
        if not (self.domain.same_space(other.domain)
                and self.codomain.same_space(other.codomain)):
            raise SectorMismatch("operators act between different bases")

    def __add__(self, other):
        self._check_same(other)
        return SparseOperator((self.matrix + other.matrix).tocsr(), self.domain,
                              self.codomain, self.hermitian and other.hermitian)

    def __sub__(self, other):
        self._check_same(other)
        return SparseOperator((self.matrix - other.matrix).tocsr(), self.domain,
                              self.codomain, self.hermitian and other.hermitian)

    def __neg__(self):
        return SparseOperator(-self.matrix, self.domain, self.codomain, self.hermitian)

    def __mul__(self, c):
        herm = self.hermitian and np.isreal(c)
        return SparseOperator((self.matrix * c).tocsr(), self.domain, self.codomain, herm)

    __rmul__ = __mul__

    def max_abs(self) -> float:
        return float(abs(self.matrix).max()) if self.matrix.nnz else 0.0

    def hermiticity_error(self) -> float:
        d = self.matrix - self.matrix.conj().T
        return float(abs(d).max()) if d.nnz else 0.0

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return self.domain.same_space(self.codomain) and self.hermiticity_error() <= tol

    def restrict(self, rows: np.ndarray | None = None, cols: np.ndarray | None = None):
        m = self.matrix
        if rows is not None:
            m = m[rows]
        if cols is not None:
            m = m[:, cols]
        return m


def commutator(x: SparseOperator, y: SparseOperator) -> SparseOperator:
    return x @ y - y @ x


def identity(basis: FockBasis) -> SparseOperator:
    return SparseOperator(sp.identity(basis.dim, format="csr"), basis, basis, True)


def zero_operator(domain: FockBasis, codomain: FockBasis | None = None) -> SparseOperator:
    codomain = domain if codomain is None else codomain
    return SparseOperator(sp.csr_matrix((codomain.dim, domain.dim)), domain, codomain,
                          codomain is domain)


def diagonal(basis: FockBasis, values) -> SparseOperator:
    values = np.asarray(values)
    return SparseOperator(sp.diags(values, format="csr"), basis, basis,
                          bool(np.all(np.isreal(values))))


def word_shift(lattice: MomentumLattice, word) -> np.ndarray:
    """Total momentum change of a word ``[(kind, mode, dagger), ...]``."""
    d = np.zeros(3, dtype=np.int64)
    for _, mode, dagger in word:
        v = lattice.modes[mode]
        d += v if dagger else -v
    return d


def word_particle_change(word) -> int:
    return sum(1 if dag else -1 for _, _, dag in word)


def apply_word(basis: FockBasis, word: Sequence, target: FockBasis | None = None,
               n_scale: int | None = None, cols: np.ndarray | None = None):
    """Act with a product of ladder operators on (a subset of) basis states.

    ``word`` lists ``(kind, lattice_mode, dagger)`` factors left to right as
    written; the rightmost acts first. ``kind`` is ``"a"`` for plain ladder
    operators or ``"b"`` for ``b_p = sqrt((N - N_+)/N) a_p`` and
    ``b*_p = a*_p sqrt((N - N_+)/N)`` with ``N = n_scale``.

    Returns ``(rows, cols, values)`` in ``target`` x ``basis`` coordinates.
    """
    lat = basis.lattice
    if target is None:
        target = basis.shifted(word_shift(lat, word))
    n_scale = basis.n_max if n_scale is None else n_scale
    if cols is None:
        cols = np.arange(basis.dim)
    # prefilter on the trailing annihilators before copying any rows
    need: dict = {}
    for _, mode, dagger in reversed(list(word)):
        if dagger:
            break
        need[mode] = need.get(mode, 0) + 1
    for mode, k in need.items():
        c = basis.col_of[mode]
        if c >= 0:
            cols = cols[basis.states[cols, c] >= k]
    occ = basis.states[cols].astype(np.int64)
    # hash keys follow the occupation updates when both bases share the column layout
    track = len(target.mode_ids) == len(basis.mode_ids)
    keys = basis._state_keys[cols] if track else None
    weights = basis._weights
    amp = np.ones(len(cols))
    plus = basis.plus_cols
    nplus = occ[:, plus].sum(axis=1) if len(plus) else np.zeros(len(cols), dtype=np.int64)
    zero = lat.zero_index
    for kind, mode, dagger in reversed(list(word)):
        c = basis.col_of[mode]
        if c < 0:
            raise KeyError(f"mode {lat.mode_at(mode)} not in basis")
        is_plus = mode != zero
        if kind == "b" and dagger:
            amp = amp * np.sqrt(np.clip(n_scale - nplus, 0, None) / n_scale)
        if dagger:
            amp = amp * np.sqrt(occ[:, c] + 1.0)
            occ[:, c] += 1
            if track:
                keys = keys + weights[c]
            if is_plus:
                nplus = nplus + 1
        else:
            amp = amp * np.sqrt(np.clip(occ[:, c], 0, None).astype(float))
            occ[:, c] -= 1
            if track:
                keys = keys - weights[c]
            if is_plus:
                nplus = nplus - 1
        if kind == "b" and not dagger:
            amp = amp * np.sqrt(np.clip(n_scale - nplus, 0, None) / n_scale)
        alive = amp != 0.0
        if not np.all(alive):
            occ, amp, nplus, cols = occ[alive], amp[alive], nplus[alive], cols[alive]
            if track:
                keys = keys[alive]
        if len(amp) == 0:
            break
    rows = target.lookup(occ, keys) if len(amp) else np.zeros(0, dtype=np.int64)
    hit = rows >= 0
    return rows[hit], cols[hit], amp[hit], target


def word_operator(basis: FockBasis, word, coeff: complex = 1.0, target=None,
                  n_scale=None) -> SparseOperator:
    rows, cols, vals, target = apply_word(basis, word, target, n_scale)
    m = sp.csr_matrix((coeff * vals, (rows, cols)), shape=(target.dim, basis.dim))
    return SparseOperator(m, basis, target)


def sum_words(basis: FockBasis, terms: Iterable, target: FockBasis | None = None,
              n_scale: int | None = None, hermitian: bool = False,
              dtype=float) -> SparseOperator:
    """Assemble ``sum_k coeff_k * word_k``; all words must share the target."""
    rows_all, cols_all, vals_all = [], [], []
    tgt = target
    for coeff, word in terms:
        if coeff == 0:
            continue
        r, c, v, t = apply_word(basis, word, tgt, n_scale)
        if tgt is None:
            tgt = t
        rows_all.append(r)
        cols_all.append(c)
        vals_all.append(coeff * v)
    if tgt is None:
        tgt = basis if target is None else target
    if rows_all:
        rows = np.concatenate(rows_all)
        cols = np.concatenate(cols_all)
        vals = np.concatenate(vals_all).astype(dtype)
    else:
        rows = cols = np.zeros(0, dtype=np.int64)
        vals = np.zeros(0, dtype=dtype)
    m = _coo_to_csr(rows, cols, vals, (tgt.dim, basis.dim))
    return SparseOperator(m, basis, tgt, hermitian)


def _coo_to_csr(rows, cols, vals, shape):
    """Deterministic duplicate summation: sort by (row, col) then fsum-like reduce."""
    if len(vals) == 0:
        return sp.csr_matrix(shape, dtype=vals.dtype)
    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    start = np.flatnonzero(np.r_[True, (np.diff(rows) != 0) | (np.diff(cols) != 0)])
    summed = np.add.reduceat(vals, start)
    return sp.csr_matrix((summed, (rows[start], cols[start])), shape=shape)


def ladder(basis: FockBasis, p, dagger: bool, target: FockBasis | None = None) -> SparseOperator:
    """Single ladder operator ``a_p`` or ``a*_p``; changes the particle number.

    The default target is the same cap with ``exact`` spaces moved to
    ``N -/+ 1``; states pushed above the cap are dropped.
    """
    i = _mode_index(basis.lattice, p)
    if target is None:
        target = basis
        if basis.exact:
            target = basis.with_cap(basis.n_max + (1 if dagger else -1), exact=True)
        target = target.shifted(word_shift(basis.lattice, [("a", i, dagger)]))
    op = _cached_word(basis, [("a", i, dagger)], target)
    return SparseOperator(op.matrix.copy(), basis, target)


def ladder_bilinear(basis: FockBasis, p, q) -> SparseOperator:
    """``a*_p a_q``; the codomain is the sector shifted by ``p - q``."""
    i, j = _mode_index(basis.lattice, p), _mode_index(basis.lattice, q)
    op = word_operator(basis, [("a", i, True), ("a", j, False)])
    op.hermitian = i == j
    return op


def number_operator(basis: FockBasis, include_zero: bool = False) -> SparseOperator:
    """``N_+`` (or ``N`` with ``include_zero``) as a diagonal operator."""
    vals = basis.totals if include_zero else basis.nplus
    return diagonal(basis, vals.astype(float))


def condensate_factor(basis: FockBasis, shift: int = 0, n_scale: int | None = None,
                      power: float = 1.0) -> SparseOperator:
    """``((N + shift - N_+)/N)**power`` on the excitation space."""
    n = basis.n_max if n_scale is None else n_scale
    vals = (n + shift - basis.nplus) / n
    if power != 1.0:
        vals = np.clip(vals, 0, None) ** power
    return diagonal(basis, vals)


def b_operator(basis: FockBasis, p, dagger: bool, n_scale: int | None = None) -> SparseOperator:
    """Modified field ``b_p`` or ``b*_p`` on F_+^{<=N}."""
    if basis.include_zero_mode:
        raise ValueError("b-operators act on the excitation space")
    i = _mode_index(basis.lattice, p)
    if i == basis.lattice.zero_index:
        raise ValueError("b_p requires p != 0")
    return word_operator(basis, [("b", i, dagger)], n_scale=n_scale)


def a_of(basis: FockBasis, f: np.ndarray, dagger: bool, target: FockBasis | None = None):
    """Smeared field ``a(f) = sum_p conj(f_p) a_p`` or ``a*(f) = sum_p f_p a*_p``.

    ``f`` is indexed by the basis columns.
    """
    f = np.asarray(f)
    coeffs = f if dagger else np.conj(f)
    mat = None
    tgt = target
    for c, mode in enumerate(basis.mode_ids):
        if coeffs[c] == 0:
            continue
        op = ladder(basis, int(mode), dagger, target=tgt)
        tgt = op.codomain
        mat = coeffs[c] * op.matrix if mat is None else mat + coeffs[c] * op.matrix
    if mat is None:
        tgt = basis if tgt is None else tgt
        mat = sp.csr_matrix((tgt.dim, basis.dim))
    return SparseOperator(mat.tocsr(), basis, tgt)


def quadratic_A(basis: FockBasis, f: np.ndarray, sharp1: bool, sharp2: bool) -> SparseOperator:
    """``A_{#1,#2}(f) = sum_p f_p a^{#1}_{a1 p} a^{#2}_{a2 p}`` (True = creation).

    ``f`` is indexed by lattice mode; alpha_1 = +1 for a creation first factor,
    alpha_2 = +1 for an annihilation second factor.
    """
    lat = basis.lattice
    target = basis if basis.sector is None else None
    dtype = complex if np.iscomplexobj(f) else float
    mat = None
    for mode in basis.mode_ids:
        fp = f[mode]
        if fp == 0:
            continue
        m1 = mode if sharp1 else lat.neg[mode]
        m2 = mode if not sharp2 else lat.neg[mode]
        if basis.col_of[m1] < 0 or basis.col_of[m2] < 0:
            continue
        op = _cached_word(basis, [("a", int(m1), sharp1), ("a", int(m2), sharp2)], target)
        target = op.codomain
        mat = fp * op.matrix if mat is None else mat + fp * op.matrix
    if mat is None:
        target = basis if target is None else target
        return SparseOperator(sp.csr_matrix((target.dim, basis.dim), dtype=dtype), basis, target)
    return SparseOperator(mat.astype(dtype).tocsr(), basis, target)


def _cached_word(basis: FockBasis, word, target: FockBasis | None) -> SparseOperator:
    """Word operator memoized on ``basis`` (for the few short words reused by smeared fields)."""
    if target is None:
        target = basis.shifted(word_shift(basis.lattice, word))
    key = (tuple(word), target.n_max, target.sector, target.exact, target.include_zero_mode)
    hit = basis._word_cache.get(key)
    if hit is None:
        hit = word_operator(basis, word, target=target)
        basis._word_cache[key] = hit
    return SparseOperator(hit.matrix, basis, target)


def excitation_map(basis_n: FockBasis, basis_exc: FockBasis) -> SparseOperator:
    """``U_N``: drop the zero-mode occupation of an N-particle plane-wave state."""
    if not basis_n.include_zero_mode or not basis_n.exact:
        raise SectorMismatch("U_N acts on the canonical N-particle space")
    if basis_exc.include_zero_mode:
        raise SectorMismatch("U_N maps into the excitation space")
    if basis_n.lattice != basis_exc.lattice or basis_n.sector != basis_exc.sector \
            or basis_exc.n_max != basis_n.n_max:
        raise SectorMismatch("U_N needs matching lattice, N and momentum sector")
    occ = basis_n.states[:, basis_n.col_of[basis_exc.mode_ids]]
    rows = basis_exc.lookup(occ)
    if np.any(rows < 0):
        raise SectorMismatch("excitation basis is missing states")
    m = sp.csr_matrix((np.ones(basis_n.dim), (rows, np.arange(basis_n.dim))),
                      shape=(basis_exc.dim, basis_n.dim))
    return SparseOperator(m, basis_n, basis_exc)


def dump_operator(op: SparseOperator, path) -> None:
    """Write coordinate-format text: header line then ``row col re im``."""
    coo = op.matrix.tocoo()
    with open(path, "w") as fh:
        fh.write(f"%coordinate {op.rows} {op.cols} {coo.nnz}\n")
        for r, c, v in zip(coo.row, coo.col, coo.data):
            v = complex(v)
            fh.write(f"{r} {c} {v.real:.17g} {v.imag:.17g}\n")
