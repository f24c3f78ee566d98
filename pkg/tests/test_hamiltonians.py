import numpy as np
import pytest
import scipy.sparse as sp
from scipy import integrate
from scipy.sparse.linalg import eigsh

from gplab.checks import master_identity
from gplab.errors import SectorMismatch
from gplab.fock import FockBasis, ladder_bilinear, number_operator
from gplab.hamiltonians import build_HN, build_LN_parts, kinetic, vhat_modes, vhat_table
from gplab.lattice import build_lattice
from gplab.scattering import PotentialSpec


def quad_vhat(k, radius=1.0):
    """Independent radial transform of the unit-amplitude ball."""
    if k == 0:
        return 4 * np.pi * radius**3 / 3
    val, _ = integrate.quad(lambda r: 4 * np.pi * r * np.sin(k * r) / k, 0.0, radius,
                            epsabs=1e-14, epsrel=1e-13)
    return val


def two_body_matrix(lat, kappa, N):
    """First-quantized -Lap_1 - Lap_2 + W(x1 - x2) on plane-wave pairs, then symmetrized."""
    m = lat.mode_count
    modes = lat.modes
    p2 = lat.p2
    H = np.zeros((m * m, m * m))
    cache = {}
    for i1 in range(m):
        for i2 in range(m):
            row = i1 * m + i2
            for j1 in range(m):
                d = modes[i1] - modes[j1]
                target = modes[i1] + modes[i2] - modes[j1]
                j2 = lat.index_of(tuple(target))
                if j2 is None:
                    continue
                key = int(d @ d)
                if key not in cache:
                    cache[key] = (kappa / N) * quad_vhat(2 * np.pi * np.sqrt(key) / N)
                H[row, j1 * m + j2] += cache[key]
            H[row, row] += p2[i1] + p2[i2]
    return H


def symmetric_isometry(basis):
    m = basis.lattice.mode_count
    S = np.zeros((m * m, basis.dim))
    for col, occ in enumerate(basis.states):
        ids = [int(basis.mode_ids[k]) for k in np.flatnonzero(occ) for _ in range(occ[k])]
        i, j = ids
        if i == j:
            S[i * m + i, col] = 1.0
        else:
            S[i * m + j, col] = S[j * m + i, col] = 1 / np.sqrt(2)
    return S


def test_two_particle_oracle(ball):
    lat = build_lattice(1)
    kappa, N = 0.7, 2
    basis = FockBasis(lat, N, include_zero_mode=True)
    assert basis.dim == 378
    H2 = build_HN(basis, ball, kappa, N).toarray()
    S = symmetric_isometry(basis)
    ref = S.T @ two_body_matrix(lat, kappa, N) @ S
    assert np.max(np.abs(H2 - ref)) <= 1e-10


def test_vhat_table_symmetric(ball, lat1):
    vt = vhat_table(lat1, ball, 4)
    assert np.allclose(vt, vt.T, atol=0, rtol=0)
    z = lat1.zero_index
    assert vt[z, z] == pytest.approx(4 * np.pi / 3, rel=1e-15)
    vm = vhat_modes(lat1, ball, 4)
    assert vm[lat1.index_of((1, 0, 0))] == pytest.approx(quad_vhat(2 * np.pi / 4), rel=1e-11)


def test_kappa_zero_parts(ball, exc3):
    hs = build_LN_parts(exc3, ball, 0.0, 3)
    for name in ("L0", "L3", "L4"):
        assert hs.parts()[name].matrix.count_nonzero() == 0
    assert np.allclose(hs.L2.toarray(), kinetic(exc3).toarray())


def test_vacuum_expectation(ball, exc3):
    kappa, N = 0.05, 3
    hs = build_LN_parts(exc3, ball, kappa, N)
    v = exc3.vacuum_index
    assert hs.LN.toarray()[v, v] == pytest.approx((N - 1) * kappa * (4 * np.pi / 3) / 2, rel=1e-14)


def test_master_identity(lat1, ball):
    err = master_identity(lat1, 3, ball, 0.05)
    assert err["UHU*-L"] <= 1e-10
    assert all(v <= 1e-12 for k, v in err.items() if k.startswith("hermitian"))


def test_master_identity_other_sector(lat1, ball):
    err = master_identity(lat1, 3, ball, 0.2, sector=(1, 0, 0))
    assert err["UHU*-L"] <= 1e-10


def test_corruption_detected(lat1, ball):
    assert master_identity(lat1, 3, ball, 0.05, corrupt="L3")["UHU*-L"] >= 1e-4


def test_interaction_positive_semidefinite(ball, exc3):
    hs = build_LN_parts(exc3, ball, 0.05, 3)
    assert np.linalg.eigvalsh(hs.VN.toarray())[0] >= -1e-12


def test_kinetic_gap(exc3, ball):
    K = kinetic(exc3).matrix.diagonal()
    nz = K[exc3.nplus > 0]
    assert np.min(nz) >= 4 * np.pi**2 - 1e-12
    assert K[exc3.vacuum_index] == 0


def test_HN_hermitian_and_grading(lat1, ball):
    bN = FockBasis(lat1, 3, include_zero_mode=True, sector=(0, 0, 0))
    H = build_HN(bN, ball, 0.3, 3)
    assert H.hermiticity_error() <= 1e-14
    # H_N conserves total particle number, and L^(j) changes N_+ by the expected steps
    bx = FockBasis(lat1, 3, sector=(0, 0, 0))
    hs = build_LN_parts(bx, ball, 0.3, 3)
    for name, steps in (("L0", {0}), ("L2", {0, 2}), ("L3", {1}), ("L4", {0})):
        m = hs.parts()[name].matrix.tocoo()
        d = set(np.abs(bx.nplus[m.row] - bx.nplus[m.col]).tolist())
        assert d <= steps, name


def test_momentum_blocks_commute_with_total_momentum(lat1, ball):
    b = FockBasis(lat1, 2, include_zero_mode=True)
    H = build_HN(b, ball, 0.5, 2).matrix.tocoo()
    mom = b.momenta
    assert np.all(mom[H.row] == mom[H.col])


def test_number_conservation(lat1, ball):
    b = FockBasis(lat1, 2, include_zero_mode=True)
    H = build_HN(b, ball, 0.5, 2).matrix
    Nop = number_operator(b, include_zero=True).matrix
    assert abs(H @ Nop - Nop @ H).max() <= 1e-13
    assert abs(Nop - 2 * sp.identity(b.dim)).max() == 0


def test_sector_mismatch(ball, exc3, can3):
    with pytest.raises(SectorMismatch):
        build_HN(exc3, ball, 0.1)
    with pytest.raises(SectorMismatch):
        build_LN_parts(can3, ball, 0.1)


def test_ground_energy_below_mean_field(ball, exc3):
    hs = build_LN_parts(exc3, ball, 0.05, 3)
    e0 = eigsh(hs.LN.matrix, k=1, which="SA")[0][0]
    assert e0 <= hs.LN.toarray()[exc3.vacuum_index, exc3.vacuum_index]
    assert e0 >= 0


def test_gaussian_potential_identity(lat1):
    V = PotentialSpec(kind="gaussian-truncated", radius=1.0, amplitude=1.0)
    assert master_identity(lat1, 3, V, 0.1)["UHU*-L"] <= 1e-10


def test_bilinear_matches_kinetic_sum(exc3):
    lat = exc3.lattice
    total = sum(lat.p2[p] * ladder_bilinear(exc3, int(p), int(p)).toarray() for p in exc3.mode_ids)
    assert np.allclose(total, kinetic(exc3).toarray(), atol=1e-12)
