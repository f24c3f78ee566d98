import itertools
import math

import numpy as np
import pytest
import scipy.sparse as sp
from scipy.sparse.linalg import svds
from hypothesis import given, strategies as st

from gplab.checks import b_commutator_errors, ccr_errors, excitation_identities
from gplab.errors import DimensionOverflow, SectorMismatch
from gplab.fock import (FockBasis, a_of, b_operator, dump_operator, enumerate_basis, excitation_map,
                        ladder, ladder_bilinear, number_operator, quadratic_A)
from gplab.lattice import MomentumLattice, build_lattice


def naive_states(lattice, n, include_zero, sector, exact):
    """Independent enumeration: multisets of modes, filtered by momentum."""
    modes = list(range(lattice.mode_count)) if include_zero else list(lattice.nonzero)
    sizes = [n] if exact else range(n + 1)
    out = set()
    for k in sizes:
        for combo in itertools.combinations_with_replacement(modes, k):
            mom = np.sum(lattice.modes[list(combo)], axis=0) if combo else np.zeros(3, int)
            if sector is not None and tuple(mom) != tuple(sector):
                continue
            occ = [0] * len(modes)
            for m in combo:
                occ[modes.index(m)] += 1
            out.add(tuple(occ))
    return out


def test_two_mode_dimension():
    lat = MomentumLattice(1, np.array([[-1, 0, 0], [0, 0, 0], [1, 0, 0]]), 1)
    assert FockBasis(lat, 2).dim == 6


def test_pair_sector_dimension(lat1):
    b = FockBasis(lat1, 2, sector=(0, 0, 0))
    assert b.dim == 14
    assert b.dim == len(naive_states(lat1, 2, False, (0, 0, 0), False))


@pytest.mark.parametrize("include_zero,exact,sector", [
    (True, True, (0, 0, 0)), (True, True, (1, 0, 0)), (False, False, (0, 0, 0)),
    (False, False, (1, 1, 0)), (False, False, None)])
def test_enumeration_matches_naive(lat1, include_zero, exact, sector):
    n = 3 if sector is not None else 2
    b = enumerate_basis(lat1, n, include_zero, sector, exact)
    ref = naive_states(lat1, n, include_zero, sector, exact)
    got = {tuple(int(x) for x in s) for s in b.states}
    assert got == ref and b.dim == len(ref)


def test_states_sorted_and_constraints(exc3):
    rows = [tuple(s) for s in exc3.states]
    assert rows == sorted(rows)
    assert np.all(exc3.totals <= 3)
    assert np.all(exc3.momenta == 0)


def test_dimension_overflow(lat1):
    with pytest.raises(DimensionOverflow):
        FockBasis(lat1, 4, limit=1000)


@given(st.data())
def test_lookup_round_trip(exc3, data):
    i = data.draw(st.integers(0, exc3.dim - 1))
    assert exc3.index_of_state(exc3.states[i]) == i


def test_bilinear_diagonal_is_occupation(exc3, lat1):
    p = lat1.index_of((1, 0, 0))
    op = ladder_bilinear(exc3, p, p)
    d = op.toarray()
    assert np.allclose(d, np.diag(exc3.states[:, exc3.col_of[p]]))


def test_single_mode_number():
    lat = MomentumLattice(1, np.array([[-1, 0, 0], [0, 0, 0], [1, 0, 0]]), 1)
    b = FockBasis(lat, 2)
    op = ladder_bilinear(b, 2, 2)
    i = b.index_of_state([0, 1])
    assert op.toarray()[i, i] == 1.0


def test_bilinear_shifts_sector(exc3, lat1):
    p, q = lat1.index_of((1, 0, 0)), lat1.index_of((0, 1, 0))
    op = ladder_bilinear(exc3, p, q)
    assert op.codomain.sector == (1, -1, 0)
    v = np.zeros(exc3.dim)
    v[exc3.index_of_state(exc3.state_of({q: 1, lat1.neg[q]: 1}))] = 1
    w = op.matrix @ v
    assert np.allclose(op.codomain.momenta[np.abs(w) > 0], [1, -1, 0])


def test_ccr_on_safe_subbasis(lat1):
    err = ccr_errors(FockBasis(lat1, 2))
    assert max(err.values()) <= 1e-12


def test_number_operator(exc3):
    n = number_operator(exc3)
    assert n.toarray()[exc3.vacuum_index, exc3.vacuum_index] == 0
    assert np.allclose(n.matrix.diagonal(), exc3.states.sum(axis=1))
    assert math.isclose(n.matrix.diagonal().sum(), float(exc3.states.sum()))


def test_b_commutators_exact(lat1):
    err = b_commutator_errors(FockBasis(lat1, 2))
    assert max(err.values()) <= 1e-12


def test_b_norm_bound(lat1):
    b = FockBasis(lat1, 3)
    p = lat1.index_of((1, 0, 0))
    for dag in (False, True):
        m = b_operator(b, p, dag).matrix
        top = svds(m, k=1, return_singular_vectors=False, random_state=0)[0]
        assert top <= math.sqrt(4) + 1e-12


def test_b_kills_top_and_vacuum(exc3, lat1):
    p = lat1.index_of((1, 0, 0))
    bs = b_operator(exc3, p, True)
    top = exc3.nplus == 3
    assert np.all(bs.matrix[:, np.flatnonzero(top)].toarray() == 0)
    b = b_operator(exc3, p, False)
    assert np.all(b.matrix[:, exc3.vacuum_index].toarray() == 0)


def test_excitation_map_condensate_to_vacuum(can3, exc3, lat1):
    U = excitation_map(can3, exc3)
    v = np.zeros(can3.dim)
    v[can3.index_of_state(can3.state_of({lat1.zero_index: 3}))] = 1
    w = U.matrix @ v
    assert w[exc3.vacuum_index] == 1 and np.count_nonzero(w) == 1


def test_excitation_map_identities(lat1):
    err = excitation_identities(lat1, 3)
    assert max(err.values()) <= 1e-12


def test_excitation_map_sector_mismatch(can3, lat1):
    with pytest.raises(SectorMismatch):
        excitation_map(can3, FockBasis(lat1, 3, sector=(1, 0, 0)))


def _vec_on(basis, rng, margin):
    v = rng.standard_normal(basis.dim)
    v[basis.totals > basis.n_max - margin] = 0
    return v


@given(st.integers(0, 2**31))
def test_abd_bounds(seed):
    rng = np.random.default_rng(seed)
    lat = build_lattice(1)
    b = FockBasis(lat, 3, include_zero_mode=True, exact=False)
    f = rng.standard_normal(b.dim and len(b.mode_ids))
    psi = _vec_on(b, rng, 1)
    N = b.totals.astype(float)
    nf = np.linalg.norm(f)
    assert np.linalg.norm(a_of(b, f, False, target=b).matrix @ psi) <= nf * np.linalg.norm(np.sqrt(N) * psi) + 1e-12
    assert np.linalg.norm(a_of(b, f, True, target=b).matrix @ psi) <= nf * np.linalg.norm(np.sqrt(N + 1) * psi) + 1e-12


@given(st.integers(0, 2**31), st.booleans(), st.booleans())
def test_quadratic_bounds(seed, s1, s2):
    rng = np.random.default_rng(seed)
    lat = build_lattice(1)
    b = FockBasis(lat, 4, include_zero_mode=True, exact=False)
    f = rng.standard_normal(lat.mode_count)
    psi = _vec_on(b, rng, 2)
    A = quadratic_A(b, f, s1, s2)
    k = np.linalg.norm(f) + (np.sum(np.abs(f)) if (not s1 and s2) else 0.0)
    rhs = math.sqrt(2) * np.linalg.norm((b.totals + 1.0) * psi) * k
    assert np.linalg.norm(A.matrix @ psi) <= rhs + 1e-12


def test_ladder_preserves_momentum_bookkeeping(lat1):
    b = FockBasis(lat1, 2, sector=(0, 0, 0))
    p = lat1.index_of((0, 0, 1))
    op = ladder(b, p, True)
    assert op.codomain.sector == (0, 0, 1)


def test_dump_operator(tmp_path, exc3, lat1):
    p = lat1.index_of((1, 0, 0))
    op = ladder_bilinear(exc3, p, p)
    path = tmp_path / "op.coo"
    dump_operator(op, path)
    lines = path.read_text().splitlines()
    assert lines[0] == f"%coordinate {exc3.dim} {exc3.dim} {op.matrix.nnz}"
    r, c, re, im = lines[1].split()
    assert op.matrix[int(r), int(c)] == float(re) and float(im) == 0.0


def test_sparse_operator_algebra(exc3):
    n = number_operator(exc3)
    two = n + n
    assert np.allclose(two.toarray(), 2 * n.toarray())
    assert np.allclose((n - n).toarray(), 0)
    assert n.is_hermitian()
    assert sp.issparse((n @ n).matrix)
