import io
import math
from collections import Counter

import numpy as np
import pytest

from gplab.bogoliubov import ad_sequence, build_generator
from gplab.checks import random_even_eta
from gplab.errors import OrderTooLarge, ValidationFailure
from gplab.fock import FockBasis, b_operator, condensate_factor
from gplab.lattice import build_lattice
from gplab.symbolic import (ANN, CRE, N_MINUS, N_PLUS_ONE, PI2, LambdaFactor, Pi1Factor, SymbolicTerm,
                            TermEvaluator, commute_with_B, count_generated, count_terms, dump_terms,
                            evaluate_sum, evaluate_term, expand_ad, is_distinguished, iter_expand,
                            k_factor, parse_dump_line, seed_term, term_violations, validate_terms)


@pytest.mark.parametrize("n,count", [(0, 1), (1, 2), (2, 8), (3, 48), (4, 384), (5, 3840), (6, 46080)])
def test_term_counts(n, count):
    assert count_terms(n) == count
    terms = expand_ad(n)
    assert len(terms) == count
    rep = validate_terms(terms, n)
    assert rep.ok and rep.violations == []


def test_streamed_count_order_seven():
    assert count_generated(7) == 2**7 * math.factorial(7)


def test_order_limits():
    with pytest.raises(OrderTooLarge):
        expand_ad(9)
    with pytest.raises(ValueError):
        expand_ad(-1)


def test_seed_term():
    t = seed_term()
    assert t.sign == 1 and t.lambdas == () and t.pi1.tail_kind == "b_p" and t.pi1.s == 0


def test_first_order_terms():
    terms = expand_ad(1)
    d = [t for t in terms if is_distinguished(t)]
    assert len(d) == 1
    t = d[0]
    # [B, b_p] contains -eta_p (N - N_+)/N b*_{-p}
    assert t.sign == -1 and [x.kind for x in t.lambdas] == [N_MINUS]
    assert t.pi1.tail_kind == "b*_-p" and t.pi1.s == 1


def test_second_order_distinguished():
    d = [t for t in expand_ad(2) if is_distinguished(t)]
    assert len(d) == 1
    t = d[0]
    assert t.sign == 1 and t.pi1.tail_kind == "b_p" and t.pi1.s == 2
    assert Counter(x.kind for x in t.lambdas) == Counter({N_MINUS: 1, N_PLUS_ONE: 1})


def test_distinguished_term_by_hand(lat1):
    """eta_p^2 (N-N_+)/N (N+1-N_+)/N b_p, built from the basic operators."""
    basis = FockBasis(lat1, 3)
    N = 3
    eta = random_even_eta(lat1, 0.3, np.random.default_rng(2))
    p = lat1.index_of((1, 0, 0))
    t = next(t for t in expand_ad(2) if is_distinguished(t))
    got = evaluate_term(t, basis, eta, p).toarray()
    b = b_operator(basis, p, False, N)
    cod = b.codomain
    order = [x.kind for x in t.lambdas]
    mats = [condensate_factor(cod, 0 if k == N_MINUS else 1, N).toarray() for k in order]
    ref = eta[p] ** 2 * np.linalg.multi_dot(mats + [b.toarray()])
    assert np.max(np.abs(got - ref)) <= 1e-15


def test_children_count_and_reexpansion():
    level3 = expand_ad(3)
    for t in level3[:10]:
        assert len(list(commute_with_B(t))) == 2 * 4
    assert Counter(iter_expand(4)) == Counter(expand_ad(4))
    assert Counter(c for t in level3 for c in commute_with_B(t)) == Counter(expand_ad(4))


def test_structural_property_mutations():
    terms = expand_ad(3)
    t = next(x for x in terms if x.pi1.order >= 1)
    bad_power = t._replace(pi1=t.pi1._replace(s=t.pi1.s + 1))
    assert term_violations(bad_power, 3)
    with pytest.raises(ValidationFailure):
        validate_terms(terms[:-1] + [bad_power], 3)
    with pytest.raises(ValidationFailure):
        validate_terms(terms[:-1], 3)
    rep = validate_terms(terms[:-1], 3, raise_on_failure=False)
    assert rep.violations[0].startswith("count")


def test_property_vi_is_enforced():
    f = LambdaFactor(PI2, (1,), (CRE,), (ANN,))
    term = SymbolicTerm(1, (f,), Pi1Factor((), (), (ANN,), 1))
    assert any(v.startswith("vi") for v in term_violations(term, 1 + 0))


def test_pi2_internal_pairs():
    for t in expand_ad(4):
        for lam in t.lambdas:
            if not lam.is_scalar:
                for j in range(1, lam.order):
                    assert (lam.sharps[j - 1], lam.flats[j]) in {(ANN, CRE), (CRE, ANN)}


def test_zero_eta_kills_nonscalar_terms(lat1):
    basis = FockBasis(lat1, 3, sector=(0, 0, 0))
    p = lat1.index_of((1, 0, 0))
    S = evaluate_sum(expand_ad(2), basis, np.zeros(lat1.mode_count), p)
    assert S.matrix.count_nonzero() == 0


@pytest.mark.parametrize("n", [0, 1, 2, 3, 4])
@pytest.mark.parametrize("mode", [(1, 0, 0), (1, -1, 1)])
def test_symbolic_numeric_anchor(lat1, n, mode):
    basis = FockBasis(lat1, 3, sector=(0, 0, 0))
    eta = random_even_eta(lat1, 0.3, np.random.default_rng(7))
    p = lat1.index_of(mode)
    gen = build_generator(basis, eta, 3)
    S = evaluate_sum(expand_ad(n), basis, eta, p)
    A = ad_sequence(gen, b_operator(basis, p, False, 3), n)[n]
    assert S.codomain.same_space(A.codomain)
    assert abs(S.matrix - A.matrix).max() <= 1e-10


def test_anchor_other_sector(lat1):
    basis = FockBasis(lat1, 3, sector=(0, 1, 0))
    eta = random_even_eta(lat1, 0.25, np.random.default_rng(8))
    p = lat1.index_of((0, 1, 1))
    gen = build_generator(basis, eta, 3)
    S = evaluate_sum(expand_ad(3), basis, eta, p)
    A = ad_sequence(gen, b_operator(basis, p, False, 3), 3)[3]
    assert abs(S.matrix - A.matrix).max() <= 1e-10


def _rand_marks(rng, h):
    return tuple(rng.choice([CRE, ANN], size=h).tolist())


def test_pi_operator_bounds(lat1):
    basis = FockBasis(lat1, 3)
    N = 3
    ev = TermEvaluator(basis)
    rng = np.random.default_rng(2024)
    w2 = (basis.nplus + 1.0)
    frac = 1.0 - (basis.nplus - 2.0) / N
    for _ in range(100):
        h = int(rng.integers(1, 3))
        sharps, flats = _rand_marks(rng, h), _rand_marks(rng, h + 1)
        fs = [rng.standard_normal(lat1.mode_count) * 0.3 for _ in range(h)]
        for f in fs:
            f[lat1.zero_index] = 0.0
        K = np.prod([k_factor(fs[l], flats[l], sharps[l]) for l in range(h)])
        xi = rng.standard_normal(basis.dim)
        pi2 = ev.pi2_operator(sharps, flats[:h], fs).matrix
        lhs = np.linalg.norm(pi2 @ xi)
        assert lhs <= 6**h * K * np.linalg.norm(w2**h * frac * xi) + 1e-12
        g = rng.standard_normal(lat1.mode_count)
        g[lat1.zero_index] = 0.0
        pi1 = ev.pi1_operator(sharps, flats, fs, g).matrix
        lhs1 = np.linalg.norm(pi1 @ xi)
        rhs1 = 6**h * np.linalg.norm(g) * K * np.linalg.norm(w2 ** (h + 0.5) * np.sqrt(frac) * xi)
        assert lhs1 <= rhs1 + 1e-12


def test_k_factor():
    f = np.array([3.0, -4.0])
    assert k_factor(f, ANN, CRE) == 12.0
    assert k_factor(f, CRE, ANN) == 5.0


def test_dump_round_trip():
    terms = expand_ad(3)
    buf = io.StringIO()
    dump_terms(terms, buf)
    lines = buf.getvalue().splitlines()
    assert len(lines) == 48
    assert [parse_dump_line(x) for x in lines] == [t.describe() for t in terms]
    assert len(set(lines)) == 48
