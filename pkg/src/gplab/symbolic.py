"""Normal-form expansion of nested commutators ``ad_B^n(b_p)``.

Every summand is a product ``Lambda_1 ... Lambda_i N^{-k} Pi1``: the Lambda
factors are ``(N - N_+)/N``, ``(N + 1 - N_+)/N`` or
``N^{-h} Pi2(eta^{z_1}, ..., eta^{z_h})``. Marks are ``'*'`` (creation) and
``'.'`` (annihilation). For a Pi2 of order h, ``sharps[l-1]`` is the mark of
the operator carrying momentum index ``l`` on the right of its pair and
``flats[l]`` the mark of the operator on the left of pair ``l+1``:

    b^{flats[0]} a^{sharps[0]} a^{flats[1]} ... a^{flats[h-1]} b^{sharps[h-1]}

with momenta ``alpha p_l`` (``alpha = +1`` for ``*``) on flats and ``beta p_l``
(``beta = +1`` for ``.``) on sharps. A Pi1 of order k has ``k+1`` flats and
ends with ``a^{sharps[k-1]} a^{flats[k]}(eta_p^s phi_{alpha p})``; at order 0
it is ``eta_p^s b_p`` (flats ``('.',)``) or ``eta_p^s b*_{-p}`` (``('*',)``).

Commuting ``B(eta)`` with any single factor yields exactly two terms, so
``ad^n`` has ``2^n n!`` summands; no terms are ever merged.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np
import scipy.sparse as sp

from .bogoliubov import eta_array
from .errors import OrderTooLarge, ValidationFailure
from .fock import FockBasis, SparseOperator, sum_words

CRE = "*"
ANN = "."
FLIP = {CRE: ANN, ANN: CRE}

N_MINUS = "N-minus-N+"
N_PLUS_ONE = "N-plus-1-minus-N+"
PI2 = "Pi2"
SCALARS = (N_MINUS, N_PLUS_ONE)

MAX_ORDER = 8


class LambdaFactor(NamedTuple):
    kind: str
    powers: tuple = ()
    sharps: tuple = ()
    flats: tuple = ()

    @property
    def order(self) -> int:
        return len(self.powers)

    @property
    def is_scalar(self) -> bool:
        return self.kind != PI2

    def describe(self) -> str:
        if self.kind == N_MINUS:
            return "(N-N+)/N"
        if self.kind == N_PLUS_ONE:
            return "(N+1-N+)/N"
        return (f"Pi2[z={','.join(map(str, self.powers))};"
                f"#={''.join(self.sharps)};b={''.join(self.flats)}]")


class Pi1Factor(NamedTuple):
    powers: tuple
    sharps: tuple
    flats: tuple
    s: int

    @property
    def order(self) -> int:
        return len(self.powers)

    @property
    def tail_kind(self) -> str:
        last = self.flats[-1]
        if self.order == 0:
            return "b_p" if last == ANN else "b*_-p"
        return "a_p" if last == ANN else "a*_-p"

    @property
    def alpha(self) -> int:
        return 1 if self.flats[-1] == ANN else -1

    def describe(self) -> str:
        return (f"Pi1[j={','.join(map(str, self.powers))};#={''.join(self.sharps)};"
                f"b={''.join(self.flats)};s={self.s};tail={self.tail_kind}]")


class SymbolicTerm(NamedTuple):
    sign: int
    lambdas: tuple
    pi1: Pi1Factor

    def describe(self) -> str:
        lam = " ".join(x.describe() for x in self.lambdas) or "1"
        return f"{'+' if self.sign > 0 else '-'} {lam} | {self.pi1.describe()}"

    @property
    def n_order(self) -> int:
        """Total N^{-1} power carried by the Pi operators."""
        return sum(x.order for x in self.lambdas) + self.pi1.order


def scalar_for(mark: str) -> LambdaFactor:
    return LambdaFactor(N_MINUS if mark == ANN else N_PLUS_ONE)


def seed_term() -> SymbolicTerm:
    """``ad^0(b_p) = b_p``."""
    return SymbolicTerm(1, (), Pi1Factor((), (), (ANN,), 0))


def _bump(t: tuple, i: int) -> tuple:
    return t[:i] + (t[i] + 1,) + t[i + 1:]


def _flip_at(t: tuple, i: int) -> tuple:
    return t[:i] + (FLIP[t[i]],) + t[i + 1:]


def _commute_pi2(f: LambdaFactor):
    """Replacements of one Pi2 factor: yields ``(sign_factor, [factors])``."""
    h = f.order
    f0 = f.flats[0]
    # head: b^{flat0}
    yield -1, [scalar_for(f0), LambdaFactor(PI2, _bump(f.powers, 0), f.sharps, _flip_at(f.flats, 0))]
    yield 1, [LambdaFactor(PI2, (1,) + f.powers, (FLIP[f0],) + f.sharps,
                           (FLIP[f0], f0) + f.flats[1:])]
    # internal pairs r = 1..h-1
    for r in range(1, h):
        yield from _split_pairs(f, r, None)
    # tail: b^{sharp_h}
    t = f.sharps[-1]
    yield -1, [LambdaFactor(PI2, _bump(f.powers, h - 1), _flip_at(f.sharps, h - 1), f.flats),
               LambdaFactor(N_PLUS_ONE if t == ANN else N_MINUS)]
    yield 1, [LambdaFactor(PI2, f.powers + (1,), f.sharps[:-1] + (t, FLIP[t]), f.flats + (FLIP[t],))]


def _split_pairs(f, r, s):
    """Commutator with the internal pair ``r``; ``s`` is None for Pi2 factors."""
    lp, ls, lf = f.powers[:r], f.sharps[:r], f.flats[:r]
    rp, rs, rf = f.powers[r:], f.sharps[r:], f.flats[r:]

    def right(powers, flats):
        if s is None:
            return LambdaFactor(PI2, powers, rs, flats)
        return Pi1Factor(powers, rs, flats, s)

    yield -1, [LambdaFactor(PI2, _bump(lp, r - 1), _flip_at(ls, r - 1), lf), right(rp, rf)]
    yield -1, [LambdaFactor(PI2, lp, ls, lf), right(_bump(rp, 0), _flip_at(rf, 0))]


def _commute_pi1(f: Pi1Factor):
    """Replacements of the Pi1 factor: yields ``(sign, [lambdas...], pi1)``."""
    k = f.order
    if k == 0:
        if f.flats[0] == ANN:  # eta^s b_p
            yield -1, [LambdaFactor(N_MINUS)], Pi1Factor((), (), (CRE,), f.s + 1)
            yield 1, [], Pi1Factor((1,), (CRE,), (CRE, ANN), f.s)
        else:  # eta^s b*_{-p}
            yield -1, [LambdaFactor(N_PLUS_ONE)], Pi1Factor((), (), (ANN,), f.s + 1)
            yield 1, [], Pi1Factor((1,), (ANN,), (ANN, CRE), f.s)
        return
    f0 = f.flats[0]
    yield -1, [scalar_for(f0)], Pi1Factor(_bump(f.powers, 0), f.sharps, _flip_at(f.flats, 0), f.s)
    yield 1, [], Pi1Factor((1,) + f.powers, (FLIP[f0],) + f.sharps, (FLIP[f0], f0) + f.flats[1:], f.s)
    for r in range(1, k):
        for sign, (left, rest) in _split_pairs(f, r, f.s):
            yield sign, [left], rest
    # last pair a^{sharp_k} a^{flat_k}(eta^s_p phi_{alpha p})
    same = LambdaFactor(PI2, f.powers, f.sharps, f.flats[:k])
    bumped = LambdaFactor(PI2, _bump(f.powers, k - 1), _flip_at(f.sharps, k - 1), f.flats[:k])
    if f.sharps[-1] == CRE:  # a*_{-p_k} a_p, s even
        yield -1, [same], Pi1Factor((), (), (CRE,), f.s + 1)
        yield -1, [bumped], Pi1Factor((), (), (ANN,), f.s)
    else:  # a_{p_k} a*_{-p}, s odd
        yield -1, [bumped], Pi1Factor((), (), (CRE,), f.s)
        yield -1, [same], Pi1Factor((), (), (ANN,), f.s + 1)


def commute_with_B(term: SymbolicTerm) -> Iterator[SymbolicTerm]:
    """The ``2 (n+1)`` summands of ``[B(eta), term]``, factor by factor."""
    lams = term.lambdas
    for i, f in enumerate(lams):
        pre, post = lams[:i], lams[i + 1:]
        if f.is_scalar:
            yield SymbolicTerm(term.sign, pre + (LambdaFactor(PI2, (1,), (CRE,), (CRE,)),) + post, term.pi1)
            yield SymbolicTerm(term.sign, pre + (LambdaFactor(PI2, (1,), (ANN,), (ANN,)),) + post, term.pi1)
        else:
            for sg, repl in _commute_pi2(f):
                yield SymbolicTerm(term.sign * sg, pre + tuple(repl) + post, term.pi1)
    for sg, extra, pi1 in _commute_pi1(term.pi1):
        yield SymbolicTerm(term.sign * sg, lams + tuple(extra), pi1)


def _check_order(n: int):
    if n < 0:
        raise ValueError("order must be non-negative")
    if n > MAX_ORDER:
        raise OrderTooLarge(f"order {n} exceeds the supported maximum {MAX_ORDER}")


def iter_expand(n: int) -> Iterator[SymbolicTerm]:
    """Stream the terms of ``ad^n_B(b_p)`` depth-first (same order as :func:`expand_ad`)."""
    _check_order(n)

    def rec(term, depth):
        if depth == n:
            yield term
            return
        for child in commute_with_B(term):
            yield from rec(child, depth + 1)

    yield from rec(seed_term(), 0)


def expand_ad(n: int) -> list[SymbolicTerm]:
    """All ``2^n n!`` terms of ``ad^n_B(b_p)``, level by level."""
    _check_order(n)
    terms = [seed_term()]
    for _ in range(n):
        terms = [c for t in terms for c in commute_with_B(t)]
    return terms


def count_terms(n: int) -> int:
    if n < 0:
        raise ValueError("order must be non-negative")
    return 2**n * math.factorial(n)


def count_generated(n: int) -> int:
    """Length of the streamed expansion (no term list is stored)."""
    return sum(1 for _ in iter_expand(n))


# ---------------------------------------------------------------------------
# validation


def is_distinguished(term: SymbolicTerm) -> bool:
    return term.pi1.order == 0 and all(x.is_scalar for x in term.lambdas)


def expected_distinguished(n: int) -> tuple:
    """``(sign, #(N-N+), #(N+1-N+), tail flats)`` of the unique pure-scalar term."""
    if n % 2 == 0:
        return 1, n // 2, n // 2, (ANN,)
    return -1, (n + 1) // 2, (n - 1) // 2, (CRE,)


def term_violations(term: SymbolicTerm, n: int) -> list[str]:
    """Violated structural properties (i), (ii), (iii), (v), (vi) of one term."""
    out = []
    m = 0
    total = term.pi1.order + 1
    eta_sum = term.pi1.s + sum(term.pi1.powers)
    pis = []
    for f in term.lambdas:
        if f.is_scalar:
            if f.kind not in SCALARS or f.powers or f.sharps or f.flats:
                out.append("i: malformed scalar factor")
            m += 1
        else:
            h = f.order
            if h < 1 or len(f.sharps) != h or len(f.flats) != h:
                out.append("i: malformed Pi2 factor")
                continue
            total += h + 1
            eta_sum += sum(f.powers)
            pis.append((f.powers, f.sharps, f.flats))
            for j in range(1, h):
                if f.sharps[j - 1] == f.flats[j]:
                    out.append("i: Pi2 internal pair does not conserve particle number")
    p1 = term.pi1
    k = p1.order
    if len(p1.sharps) != k or len(p1.flats) != k + 1 or p1.s < 0:
        out.append("i: malformed Pi1 factor")
        return out
    for j in range(1, k + 1):
        if p1.sharps[j - 1] == p1.flats[j]:
            out.append("i: Pi1 pair does not conserve particle number")
    pis.append((p1.powers, p1.sharps, p1.flats[:k]))
    if any(z < 1 for pw, _, _ in pis for z in pw):
        out.append("i: eta powers must be positive")
    if term.sign not in (1, -1):
        out.append("i: sign must be +-1")
    if m + total != n + 1:
        out.append(f"ii: factor count {m + total} != {n + 1}")
    if eta_sum != n:
        out.append(f"iii: eta powers sum to {eta_sum} != {n}")
    if k >= 1:
        pair = (p1.sharps[-1], p1.flats[-1])
        if pair == (CRE, ANN):
            if p1.s % 2:
                out.append("v: a*_{-p_k} a_p tail needs an even power of eta_p")
        elif pair == (ANN, CRE):
            if p1.s % 2 == 0:
                out.append("v: a_{p_k} a*_{-p} tail needs an odd power of eta_p")
        else:
            out.append("v: invalid Pi1 tail pair")
    elif (p1.flats[0] == CRE) != (p1.s % 2 == 1):
        out.append("v: order-zero tail parity mismatch")
    for powers, sharps, flats in pis:
        for l in range(len(powers)):
            if flats[l] == ANN and sharps[l] == CRE and powers[l] < 2:
                out.append("vi: non-normally ordered contraction with eta power < 2")
    return out


@dataclass
class ValidationReport:
    order: int
    count: int
    expected_count: int
    violations: list = field(default_factory=list)
    distinguished: SymbolicTerm | None = None

    @property
    def ok(self) -> bool:
        return not self.violations and self.count == self.expected_count

    def summary(self) -> dict:
        return {"order": self.order, "count": self.count, "expected_count": self.expected_count,
                "distinguished_term": self.distinguished.describe() if self.distinguished else None,
                "violations": list(self.violations)}


def validate_terms(terms, n: int, raise_on_failure: bool = True) -> ValidationReport:
    """Check the count, properties (i)-(vi) and uniqueness of the distinguished term."""
    rep = ValidationReport(n, 0, count_terms(n))
    first_bad = None
    dist = []
    for idx, t in enumerate(terms):  # streamed: iter_expand(n) works without a term list
        rep.count += 1
        for v in term_violations(t, n):
            rep.violations.append(f"term {idx}: {v}")
            if first_bad is None:
                first_bad = t
        if is_distinguished(t):
            dist.append(t)
    if rep.count != rep.expected_count:
        rep.violations.insert(0, f"count {rep.count} != {rep.expected_count}")
    if len(dist) != 1:
        rep.violations.append(f"iv: {len(dist)} pure-scalar terms, expected exactly one")
    else:
        t = dist[0]
        rep.distinguished = t
        sign, a, b, flats = expected_distinguished(n)
        kinds = Counter(x.kind for x in t.lambdas)
        if (t.sign, kinds[N_MINUS], kinds[N_PLUS_ONE], t.pi1.flats, t.pi1.s) != (sign, a, b, flats, n):
            rep.violations.append(f"iv: distinguished term has the wrong form: {t.describe()}")
            first_bad = first_bad or t
    if rep.violations and raise_on_failure:
        raise ValidationFailure(rep.violations[0], offender=first_bad)
    return rep


def parse_dump_line(line: str) -> str:
    """Inverse helper for tests: strip the index prefix of a dump line."""
    return line.split("\t", 1)[-1].rstrip("\n")


def dump_terms(terms, fh) -> None:
    """One term per line: ``index<TAB>sign lambdas | pi1``."""
    for i, t in enumerate(terms):
        fh.write(f"{i}\t{t.describe()}\n")


# ---------------------------------------------------------------------------
# numerical realization


def _alpha_mode(lattice, flat: str, mode: int) -> int:
    # alpha = +1 for creation, -1 for annihilation
    return int(mode) if flat == CRE else int(lattice.neg[mode])


def _beta_mode(lattice, sharp: str, mode: int) -> int:
    # beta = +1 for annihilation, -1 for creation
    return int(mode) if sharp == ANN else int(lattice.neg[mode])


def _space_key(basis: FockBasis) -> tuple:
    return (basis.n_max, basis.sector, basis.exact, basis.include_zero_mode)


class TermEvaluator:
    """Sparse realization of Pi-operators and symbolic terms.

    Products are formed on the basis with cap ``N+1`` so that intermediate
    states created inside a particle-conserving pair are never cut; rows are
    restricted to the target basis at the end.
    """

    def __init__(self, basis: FockBasis, n_scale: int | None = None):
        if basis.include_zero_mode:
            raise ValueError("terms act on the excitation space")
        self.basis = basis
        self.N = basis.n_max if n_scale is None else n_scale
        self.ext = basis.with_cap(basis.n_max + 1, exact=False)
        self._cache: dict = {}

    def _embed(self, basis: FockBasis, ext: FockBasis) -> sp.csr_matrix:
        rows = ext.lookup(basis.states)
        return sp.csr_matrix((np.ones(basis.dim), (rows, np.arange(basis.dim))),
                             shape=(ext.dim, basis.dim))

    def pair_sum(self, ext: FockBasis, flat: str, sharp: str, f: np.ndarray,
                 left_b: bool, right_b: bool) -> sp.csr_matrix:
        """``sum_q f_q c^{flat}_{alpha q} c^{sharp}_{beta q}`` (c = b or a)."""
        key = (_space_key(ext), flat, sharp, left_b, right_b)
        per_mode = self._cache.get(key)
        if per_mode is None:
            lat = ext.lattice
            per_mode = {}
            for q in lat.nonzero:
                word = [("b" if left_b else "a", _alpha_mode(lat, flat, q), flat == CRE),
                        ("b" if right_b else "a", _beta_mode(lat, sharp, q), sharp == CRE)]
                per_mode[int(q)] = sum_words(ext, [(1.0, word)], target=ext, n_scale=self.N).matrix
            self._cache[key] = per_mode
        m = sp.csr_matrix((ext.dim, ext.dim))
        for q, mq in per_mode.items():
            if f[q] != 0:
                m = m + f[q] * mq
        return m.tocsr()

    def scalar(self, ext: FockBasis, kind: str) -> sp.csr_matrix:
        shift = 0 if kind == N_MINUS else 1
        return sp.diags((self.N + shift - ext.nplus) / self.N, format="csr")

    def pi2_matrix(self, ext: FockBasis, sharps, flats, fs) -> sp.csr_matrix:
        """``Pi2_{sharps,flats}(f_1..f_h)`` on ``ext`` (no ``N^{-h}``)."""
        h = len(fs)
        m = None
        for l in range(h):
            q = self.pair_sum(ext, flats[l], sharps[l], fs[l], l == 0, l == h - 1)
            m = q if m is None else (m @ q)
        return m.tocsr()

    def pi1_chain(self, ext: FockBasis, sharps, flats, fs) -> sp.csr_matrix | None:
        """The momentum-conserving part of a Pi1 of order k >= 1 (before the tail)."""
        k = len(fs)
        m = None
        for l in range(k):
            q = self.pair_sum(ext, flats[l], sharps[l], fs[l], l == 0, False)
            m = q if m is None else (m @ q)
        return m

    def tail_matrix(self, ext_in: FockBasis, ext_out: FockBasis, kind: str, flat: str,
                    g: np.ndarray) -> sp.csr_matrix:
        """``c^{flat}(g) = sum_q g_q c^{flat}_q`` with ``c`` = a or b."""
        per_mode = self._cache.setdefault((_space_key(ext_in), _space_key(ext_out), kind, flat), {})
        m = sp.csr_matrix((ext_out.dim, ext_in.dim))
        for q in ext_in.lattice.nonzero:
            q = int(q)
            if g[q] == 0:
                continue
            if q not in per_mode:
                per_mode[q] = sum_words(ext_in, [(1.0, [(kind, q, flat == CRE)])], target=ext_out,
                                        n_scale=self.N).matrix
            m = m + g[q] * per_mode[q]
        return m.tocsr()

    def pi2_operator(self, sharps, flats, fs) -> SparseOperator:
        """``Pi2`` restricted to ``basis -> basis`` (sector preserving)."""
        b = self.basis
        ext = self.ext.with_sector(b.sector) if b.sector is not None else self.ext
        emb = self._embed(b, ext)
        m = self.pi2_matrix(ext, sharps, flats, [np.asarray(f, float) for f in fs]) @ emb
        rows = ext.lookup(b.states)
        return SparseOperator(m[rows].tocsr(), b, b)

    def pi1_operator(self, sharps, flats, fs, g) -> SparseOperator:
        """``Pi1_{sharps,flats}(f_1..f_k; g)`` on an unsectored basis."""
        b = self.basis
        if b.sector is not None:
            raise ValueError("general Pi1 operators need an unsectored basis")
        ext = self.ext
        emb = self._embed(b, ext)
        g = np.asarray(g, float)
        k = len(fs)
        kind = "b" if k == 0 else "a"
        m = self.tail_matrix(ext, ext, kind, flats[-1], g) @ emb
        if k:
            m = self.pi1_chain(ext, sharps, flats, [np.asarray(f, float) for f in fs]) @ m
        rows = ext.lookup(b.states)
        return SparseOperator(m[rows].tocsr(), b, b)

    def evaluate(self, term: SymbolicTerm, eta: np.ndarray, p: int) -> SparseOperator:
        """Matrix of ``term`` from ``basis`` to the sector shifted by ``-p``."""
        b = self.basis
        lat = b.lattice
        eta = np.asarray(eta, float)
        shift = -lat.modes[p]
        cod = b.shifted(shift)
        ext_in = self.ext.with_sector(b.sector) if b.sector is not None else self.ext
        ext_out = ext_in.shifted(shift)
        p1 = term.pi1
        g = np.zeros(lat.mode_count)
        mode = p if p1.alpha == 1 else int(lat.neg[p])
        g[mode] = eta[p] ** p1.s
        kind = "b" if p1.order == 0 else "a"
        m = self.tail_matrix(ext_in, ext_out, kind, p1.flats[-1], g) @ self._embed(b, ext_in)
        if p1.order:
            fs = [eta**z for z in p1.powers]
            m = self.pi1_chain(ext_out, p1.sharps, p1.flats, fs) @ m
        for lam in reversed(term.lambdas):
            if lam.is_scalar:
                m = self.scalar(ext_out, lam.kind) @ m
            else:
                m = self.pi2_matrix(ext_out, lam.sharps, lam.flats, [eta**z for z in lam.powers]) @ m
        m = (term.sign * float(self.N) ** (-term.n_order)) * m
        rows = ext_out.lookup(cod.states)
        return SparseOperator(sp.csr_matrix(m)[rows].tocsr(), b, cod)


def evaluate_term(term: SymbolicTerm, basis_exc: FockBasis, eta, p,
                  evaluator: TermEvaluator | None = None) -> SparseOperator:
    """Sparse matrix of one symbolic term for momentum ``p`` (mode index or 3-vector)."""
    ev = evaluator or TermEvaluator(basis_exc)
    lat = basis_exc.lattice
    i = p if isinstance(p, (int, np.integer)) else lat.index_of(p)
    return ev.evaluate(term, eta_array(lat, eta), int(i))


def evaluate_sum(terms, basis_exc: FockBasis, eta, p) -> SparseOperator:
    """Sum of the evaluated terms (shared caches across terms)."""
    ev = TermEvaluator(basis_exc)
    total = None
    for t in terms:
        op = evaluate_term(t, basis_exc, eta, p, ev)
        total = op.matrix if total is None else total + op.matrix
    return SparseOperator(total.tocsr(), op.domain, op.codomain)


def k_factor(f: np.ndarray, flat_prev: str, sharp: str) -> float:
    """``||f||_2 + ||f||_1`` for a non-normally ordered pair, else ``||f||_2``."""
    f = np.asarray(f, float)
    k = float(np.linalg.norm(f))
    if flat_prev == ANN and sharp == CRE:
        k += float(np.sum(np.abs(f)))
    return k
