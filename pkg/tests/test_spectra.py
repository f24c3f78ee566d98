import math

import numpy as np
import pytest
import scipy.sparse as sp

from gplab.bogoliubov import build_generator
from gplab.errors import NonConvergence
from gplab.fock import FockBasis
from gplab.hamiltonians import build_HN, build_LN_parts, kinetic
from gplab.lattice import build_lattice
from gplab.scattering import PotentialSpec, eta_coefficients, scattering_length, solve_neumann
from gplab.spectra import (PipelineConfig, depletion_of, ground_cluster, lanczos_lowest,
                           materialize_GN, mode_occupations, one_body_density, density_distance_chain,
                           run_single, sandwich_check, ground_state_pipeline, trend_summary,
                           upper_violation)


def test_lanczos_diagonal():
    d = np.linspace(1.0, 50.0, 200)
    res = lanczos_lowest(sp.diags(d), 200, k=3)
    assert np.allclose(res.eigenvalues, d[:3], atol=1e-10)
    assert np.all(res.residual_norms <= 1e-10 * 50)


def test_lanczos_degenerate_cluster():
    d = np.concatenate([[0.5, 0.5, 0.5], np.linspace(2.0, 9.0, 97)])
    res = lanczos_lowest(sp.diags(d), 100, k=1)
    assert len(res.eigenvalues) == 3
    assert np.allclose(res.eigenvalues, 0.5, atol=1e-10)
    assert ground_cluster(res).shape == (100, 3)


def test_lanczos_matches_dense(exc3, ball):
    hs = build_LN_parts(exc3, ball, 0.3, 3)
    ref = np.linalg.eigvalsh(hs.LN.toarray())[:4]
    res = lanczos_lowest(hs.LN, exc3.dim, k=4, seed=3)
    assert np.allclose(res.eigenvalues[:4], ref, atol=1e-9)
    # seed reproducibility
    again = lanczos_lowest(hs.LN, exc3.dim, k=4, seed=3)
    assert np.array_equal(res.eigenvalues, again.eigenvalues)


def test_lanczos_nonconvergence(exc3, ball):
    hs = build_LN_parts(exc3, ball, 0.3, 3)
    with pytest.raises(NonConvergence):
        lanczos_lowest(hs.LN, exc3.dim, max_iter=3, tol=1e-14)


def test_free_spectrum(lat1, ball):
    b = FockBasis(lat1, 2, include_zero_mode=True)
    H = build_HN(b, ball, 0.0, 2)
    res = lanczos_lowest(H, b.dim, k=2)
    assert res.eigenvalues[0] == pytest.approx(0.0, abs=1e-10)
    assert res.eigenvalues[-1] == pytest.approx(4 * np.pi**2, rel=1e-10)


def test_depletion_of_simple_states(exc3, can3, lat1):
    v = np.zeros(exc3.dim)
    v[exc3.vacuum_index] = 1
    d = depletion_of(v, exc3, 3)
    assert d["depletion"] == 0 and d["condensate_fraction"] == 1
    assert d["gamma1_diag"][(0, 0, 0)] == 3
    c = np.zeros(can3.dim)
    c[can3.index_of_state(can3.state_of({lat1.zero_index: 3}))] = 1
    assert depletion_of(c, can3, 3)["depletion"] == 0
    s = can3.state_of({lat1.zero_index: 1, lat1.index_of((1, 0, 0)): 1, lat1.index_of((-1, 0, 0)): 1})
    c = np.zeros(can3.dim)
    c[can3.index_of_state(s)] = 2.0
    d = depletion_of(c, can3, 3)
    assert d["depletion"] == 2 and d["condensate_fraction"] == pytest.approx(1 / 3)
    occ = mode_occupations(c, can3)
    assert occ.sum() == pytest.approx(3.0)


def test_depletion_routes_agree(exc3, can3, ball, lat1):
    H = build_HN(can3, ball, 0.5, 3)
    psi = lanczos_lowest(H, can3.dim).ground_vector
    d = depletion_of(psi, can3, 3)
    n0 = mode_occupations(psi, can3)[lat1.zero_index]
    assert 3 - n0 == pytest.approx(d["depletion"], abs=1e-12)


def test_variational_consistency(ball):
    lat = build_lattice(1)
    N, kappa = 4, 0.05
    bx = FockBasis(lat, N, sector=(0, 0, 0))
    bN = FockBasis(lat, N, include_zero_mode=True, sector=(0, 0, 0))
    hs = build_LN_parts(bx, ball, kappa, N)
    gen = build_generator(bx, eta_coefficients(solve_neumann(ball, kappa, N), lat).eta, N)
    eH = lanczos_lowest(build_HN(bN, ball, kappa, N), bN.dim).eigenvalues[0]
    eL = lanczos_lowest(hs.LN, bx.dim).eigenvalues[0]
    eG = lanczos_lowest(materialize_GN(hs, gen), bx.dim).eigenvalues[0]
    assert eH == pytest.approx(eL, abs=1e-9) and eH == pytest.approx(eG, abs=1e-9)
    G = materialize_GN(hs, gen)
    assert G[bx.vacuum_index, bx.vacuum_index] >= eH - 1e-12


def test_one_body_density_and_density_distance_chain(lat1, ball):
    b = FockBasis(lat1, 2, include_zero_mode=True)
    psi = lanczos_lowest(build_HN(b, ball, 2.0, 2), b.dim).ground_vector
    gamma = one_body_density(psi, b)
    assert np.trace(gamma).real == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(gamma, gamma.conj().T, atol=1e-12)
    assert np.linalg.eigvalsh(gamma)[0] >= -1e-12
    chain = density_distance_chain(gamma, lat1.zero_index)
    assert chain["holds"]
    assert chain["trace_norm"] <= chain["bound"] + 1e-12


def test_density_distance_chain_pure_condensate(lat1):
    g = np.zeros((lat1.mode_count, lat1.mode_count))
    g[lat1.zero_index, lat1.zero_index] = 1
    ch = density_distance_chain(g, lat1.zero_index)
    assert ch["trace_norm"] == 0 and ch["bound"] == 0 and ch["holds"]


def test_pipeline_free_gas():
    out = ground_state_pipeline(PipelineConfig(kappa=0.0, n_values=(3, 4)))
    assert out["a0"] == 0.0
    for row in out["rows"]:
        assert row["E0"] == pytest.approx(0.0, abs=1e-10)
        assert row["depletion"] == pytest.approx(0.0, abs=1e-12)
        assert row["vac_GN_offset"] == pytest.approx(0.0, abs=1e-12)
        assert row["eta_norm"] == 0.0


def test_pipeline_small_N_has_no_eta():
    row = run_single(PipelineConfig(), 2)
    assert row.vac_GN_offset is None and row.eta_norm is None
    assert np.isfinite(row.E0)


def test_pipeline_row_consistency():
    cfg = PipelineConfig()
    row = run_single(cfg, 4)
    a0 = scattering_length(cfg.potential, cfg.kappa)
    assert row.E0_minus_4pi_a0_N == pytest.approx(row.E0 - 4 * math.pi * a0 * 4, abs=1e-12)
    assert row.N_times_depletion == pytest.approx(row.depletion, rel=1e-8)
    assert row.vac_GN_offset + 4 * math.pi * a0 * 4 >= row.E0 - 1e-10
    assert 0 < row.xi_depletion < 1


def test_trend_summary():
    t = trend_summary([1.0, 2.0, 3.1, 3.9], [1, 2, 3, 4])
    assert t["slope"] == pytest.approx(0.98, abs=1e-12)
    assert t["ratio"] == pytest.approx(3.9)
    assert t["t_stat"] > 10


def _sandwich_setup(kappa, N=3):
    lat = build_lattice(1)
    V = PotentialSpec()
    bx = FockBasis(lat, N, sector=(0, 0, 0))
    hs = build_LN_parts(bx, V, kappa, N)
    eta = eta_coefficients(solve_neumann(V, kappa, N), lat).eta
    return hs, build_generator(bx, eta, N), scattering_length(V, kappa)


def test_sandwich_free_gas():
    hs, gen, a0 = _sandwich_setup(0.0)
    rep = sandwich_check(hs, gen, a0)
    assert rep.C_lo == 0 and rep.C_mid == 0
    assert rep.raw["C_lo"] <= 1e-12 and abs(rep.raw["C_mid"]) <= 1e-12
    # K/(K+1) never vanishes on excited states, so the upper constant stays near 1
    assert 0.99 < rep.C_hi < 1


def test_sandwich_dense_matches_iterative():
    hs, gen, a0 = _sandwich_setup(0.05, 4)
    dense = sandwich_check(hs, gen, a0)
    it = sandwich_check(hs, gen, a0, dense_limit=10)
    assert dense.method == "dense" and it.method == "iterative"
    for k in ("C_lo", "C_mid", "C_hi"):
        assert it.raw[k] == pytest.approx(dense.raw[k], abs=1e-9)


def test_sandwich_upper_bound_is_tight():
    hs, gen, a0 = _sandwich_setup(0.05)
    rep = sandwich_check(hs, gen, a0)
    assert rep.C_mid == pytest.approx(0.102509, abs=1e-5)
    assert rep.C_hi == pytest.approx(0.995717, abs=1e-5)
    assert upper_violation(hs, gen, a0, rep.C_hi) <= 1e-9
    assert upper_violation(hs, gen, a0, rep.C_hi / 2) > 0
    assert rep.number_kinetic_gap <= 1e-12
    assert kinetic(hs.basis).matrix.diagonal().min() == 0
