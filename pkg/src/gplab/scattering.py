"""Radial scattering problems for the two-body potential.

Fourier convention everywhere: ``g_hat(k) = int g(x) exp(-i k.x) dx`` with no
factor of 2*pi; for radial functions ``g_hat(k) = 4 pi int r^2 g(r) sinc(kr) dr``.
With this convention the torus Fourier coefficients of ``N^2 V(N x)`` are
``V_hat(p/N)/N`` and the correlation coefficients are
``eta_p = -w_hat(p/N)/N^2``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate, optimize

from .errors import CutoffTooSmall, InvalidDomain, NonConvergence
from .lattice import MomentumLattice

logger = logging.getLogger(__name__)

KINDS = ("ball", "gaussian-truncated", "tabulated")
LAMBDA_RTOL = 1e-10


@dataclass(frozen=True)
class PotentialSpec:
    """Non-negative, radial, compactly supported potential.

    ``gaussian-truncated`` is ``amplitude * exp(-r^2 / (2 s^2))`` with
    ``s = radius / 3``, cut at ``radius``. ``tabulated`` interpolates
    ``table`` linearly and vanishes beyond ``radius``.
    """

    kind: str = "ball"
    radius: float = 1.0
    amplitude: float = 1.0
    table: tuple | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if self.amplitude < 0:
            raise ValueError("amplitude must be non-negative")
        if self.kind == "tabulated":
            if not self.table:
                raise ValueError("tabulated potential needs a table")
            t = np.asarray(self.table, dtype=float)
            if np.any(t[:, 1] < 0):
                raise ValueError("potential must be non-negative")

    @property
    def ident(self) -> str:
        return f"{self.kind}:R={self.radius:g}:A={self.amplitude:g}"

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        inside = r <= self.radius
        if self.kind == "ball":
            v = np.full(r.shape, self.amplitude)
        elif self.kind == "gaussian-truncated":
            s = self.radius / 3.0
            v = self.amplitude * np.exp(-(r**2) / (2 * s * s))
        else:
            t = np.asarray(self.table, dtype=float)
            v = self.amplitude * np.interp(r, t[:, 0], t[:, 1], right=0.0)
        return np.where(inside, v, 0.0)

    def fourier(self, k):
        """``V_hat(k)`` for ``|k|``-valued input (analytic for the ball)."""
        k = np.abs(np.asarray(k, dtype=float))
        if self.kind == "ball":
            return self.amplitude * ball_fourier(k, self.radius)
        flat = k.ravel()
        out = np.array([radial_fourier(self, kk, 0.0, self.radius) for kk in flat])
        return out.reshape(k.shape)

    def integral(self) -> float:
        return float(self.fourier(0.0))


def ball_fourier(k, radius):
    """Fourier transform of the indicator of the ball of given radius."""
    k = np.abs(np.asarray(k, dtype=float))
    s = k * radius
    small = s < 1e-3
    ss = np.where(small, 1.0, s)
    big = 4 * np.pi * (np.sin(ss) - ss * np.cos(ss)) / np.where(small, 1.0, k) ** 3
    # series 4 pi R^3 (1/3 - s^2/30 + s^4/840)
    series = 4 * np.pi * radius**3 * (1 / 3 - s**2 / 30 + s**4 / 840)
    return np.where(small, series, big)


def _sinc(x):
    return np.sinc(np.asarray(x) / np.pi)


def radial_fourier(g, k, a, b):
    """``4 pi int_a^b r^2 g(r) sinc(k r) dr`` by adaptive quadrature."""
    val, _ = integrate.quad(lambda r: 4 * np.pi * r * r * float(g(r)) * _sinc(k * r),
                            a, b, limit=400, epsabs=1e-13, epsrel=1e-12)
    return val


# ---------------------------------------------------------------------------
# ODE integration


def _rk4_piece(r, pot, lam, u0, du0):
    """Fixed-step RK4 for ``u'' = (pot(r) - lam) u`` on grid ``r``."""
    u = np.empty(len(r))
    du = np.empty(len(r))
    u[0], du[0] = u0, du0
    q = pot(r) - lam
    mids = 0.5 * (r[1:] + r[:-1])
    qm = pot(mids) - lam
    h = np.diff(r)
    y, z = u0, du0
    for i in range(len(r) - 1):
        hi = h[i]
        k1y, k1z = z, q[i] * y
        y2, z2 = y + 0.5 * hi * k1y, z + 0.5 * hi * k1z
        k2y, k2z = z2, qm[i] * y2
        y3, z3 = y + 0.5 * hi * k2y, z + 0.5 * hi * k2z
        k3y, k3z = z3, qm[i] * y3
        y4, z4 = y + hi * k3y, z + hi * k3z
        k4y, k4z = z4, q[i + 1] * y4
        y = y + hi * (k1y + 2 * k2y + 2 * k3y + k4y) / 6
        z = z + hi * (k1z + 2 * k2z + 2 * k3z + k4z) / 6
        u[i + 1], du[i + 1] = y, z
    return u, du


def _pieces(support, outer, n_points):
    """Two uniform pieces with a shared node at the support radius."""
    intervals = n_points - 1
    n_in = max(32, int(round(intervals * support / outer)))
    n_out = max(32, intervals - n_in)
    inner = np.linspace(0.0, support, n_in + 1)
    outer_grid = np.linspace(support, outer, n_out + 1)
    return inner, outer_grid


def _shoot(V, kappa, lam, inner, outer):
    inside = lambda r: 0.5 * kappa * V(np.minimum(r, V.radius))  # noqa: E731
    free = lambda r: np.zeros_like(r)  # noqa: E731
    u1, du1 = _rk4_piece(inner, inside, lam, 0.0, 1.0)
    u2, du2 = _rk4_piece(outer, free, lam, u1[-1], du1[-1])
    return u1, du1, u2, du2


def scattering_length(V: PotentialSpec, kappa: float, steps: int = 20000) -> float:
    """Scattering length of ``kappa V``: ``u(r) = c (r - a0)`` beyond the support."""
    if kappa < 0:
        raise ValueError("kappa must be non-negative")
    if kappa == 0:
        return 0.0
    r = np.linspace(0.0, V.radius, steps + 1)
    u, du = _rk4_piece(r, lambda x: 0.5 * kappa * V(x), 0.0, 0.0, 1.0)
    if not (np.isfinite(u[-1]) and np.isfinite(du[-1])) or du[-1] == 0:
        raise NonConvergence("zero-energy integration failed")
    return float(V.radius - u[-1] / du[-1])


def born_scattering_length(V: PotentialSpec, kappa: float, order: int = 3,
                           n_grid: int = 4000) -> list[float]:
    """Partial sums of the Born series for ``a0``.

    Iterates ``f = 1 - (kappa/8pi) int V(y) f(y) / |x-y| dy`` in radial form and
    returns ``[a0^(1), a0^(1)+a0^(2), ...]`` with
    ``a0 = (kappa/2) int_0^inf r^2 V f dr``.
    """
    r = np.linspace(0.0, V.radius, n_grid + 1)
    v = V(r)
    f = np.ones_like(r)
    sums = []
    for _ in range(order):
        sums.append(0.5 * kappa * integrate.simpson(r * r * v * f, x=r))
        g = v * f
        # int g(y)/|x-y| dy = 4 pi [ (1/r) int_0^r s^2 g + int_r^R s g ]
        inner = integrate.cumulative_trapezoid(r * r * g, r, initial=0.0)
        outer_c = integrate.cumulative_trapezoid(r * g, r, initial=0.0)
        outer = outer_c[-1] - outer_c
        with np.errstate(divide="ignore", invalid="ignore"):
            pot = np.where(r > 0, inner / np.where(r > 0, r, 1.0), 0.0) + outer
        f = 1.0 - 0.5 * kappa * pot
    return sums


@dataclass
class ScatteringSolution:
    """Neumann problem data and the derived lattice coefficients."""

    grid: np.ndarray = field(repr=False)
    f: np.ndarray = field(repr=False)
    w: np.ndarray = field(repr=False)
    lambda_ell: float
    a0: float
    kappa: float
    ell: float
    n_particles: int
    potential: PotentialSpec
    support_index: int = field(repr=False, default=0)
    eta: np.ndarray | None = field(repr=False, default=None)
    eta_tilde_zero: float | None = None
    lattice: MomentumLattice | None = field(repr=False, default=None)
    eta_constant: float | None = None

    @property
    def outer_radius(self) -> float:
        return self.n_particles * self.ell

    def eta_map(self) -> dict:
        """``{(nx, ny, nz): eta_p}`` over nonzero lattice modes."""
        if self.eta is None:
            raise ValueError("eta not computed; call eta_coefficients first")
        return {self.lattice.mode_at(i): float(self.eta[i]) for i in self.lattice.nonzero}

    @property
    def eta_norm(self) -> float:
        return float(np.sqrt(np.sum(self.eta**2)))

    def eta_tilde(self) -> np.ndarray:
        """eta over all lattice modes including ``p = 0``."""
        out = self.eta.copy()
        out[self.lattice.zero_index] = self.eta_tilde_zero
        return out

    def w_hat(self, k):
        """Radial Fourier transform of ``w_ell`` on the stored grid (Simpson)."""
        k = np.atleast_1d(np.abs(np.asarray(k, dtype=float)))
        r, w = self.grid, self.w
        j = self.support_index
        out = np.zeros(len(k))
        for a, b in ((0, j + 1), (j, len(r))):
            rr, ww = r[a:b], w[a:b]
            kern = 4 * np.pi * rr[None, :] ** 2 * ww[None, :] * _sinc(k[:, None] * rr[None, :])
            out += integrate.simpson(kern, x=rr, axis=1)
        return out


def solve_neumann(V: PotentialSpec, kappa: float, n_particles: int, ell: float = 0.4,
                  grid_points: int = 2048) -> ScatteringSolution:
    """Lowest Neumann eigenpair of ``-Delta + kappa V / 2`` on ``|x| <= N ell``.

    Shoots ``u = r f`` from ``u(0) = 0``, brackets the first sign change of
    ``R u'(R) - u(R)`` and refines with Brent's method; ``f`` is normalized to
    1 at ``R = N ell``.
    """
    if kappa < 0:
        raise ValueError("kappa must be non-negative")
    if not 0 < ell < 0.5:
        raise ValueError("ell must lie in (0, 1/2)")
    if grid_points < 256:
        raise ValueError("grid_points must be >= 256")
    R = n_particles * ell
    if R <= V.radius:
        raise InvalidDomain(f"N*ell = {R} does not exceed the potential radius {V.radius}")
    inner, outer = _pieces(V.radius, R, grid_points)
    grid = np.concatenate([inner, outer[1:]])
    j = len(inner) - 1
    a0 = scattering_length(V, kappa)

    if kappa == 0 or V.amplitude == 0:
        return ScatteringSolution(grid, np.ones_like(grid), np.zeros_like(grid), 0.0, 0.0,
                                  kappa, ell, n_particles, V, j)

    def mismatch(lam):
        _, _, u2, du2 = _shoot(V, kappa, lam, inner, outer)
        return R * du2[-1] - u2[-1]

    lo = 0.0
    g_lo = mismatch(lo)
    hi = max(3 * a0 / R**3, 1e-14) * 0.5
    g_hi = mismatch(hi)
    it = 0
    while np.sign(g_hi) == np.sign(g_lo):
        lo, g_lo = hi, g_hi
        hi *= 2.0
        g_hi = mismatch(hi)
        it += 1
        if it > 200 or not np.isfinite(g_hi):
            raise NonConvergence("could not bracket the Neumann eigenvalue")
    try:
        lam, info = optimize.brentq(mismatch, lo, hi, xtol=1e-300, rtol=1e-14,
                                    maxiter=500, full_output=True)
    except (RuntimeError, ValueError) as exc:
        raise NonConvergence(f"eigenvalue refinement failed: {exc}") from exc
    if not info.converged:
        raise NonConvergence("eigenvalue refinement did not converge")
    if abs(mismatch(lam * (1 + LAMBDA_RTOL))) == 0:  # pragma: no cover
        logger.debug("exact root hit")

    u1, du1, u2, du2 = _shoot(V, kappa, lam, inner, outer)
    u = np.concatenate([u1, u2[1:]])
    du = np.concatenate([du1, du2[1:]])
    with np.errstate(divide="ignore", invalid="ignore"):
        f = np.where(grid > 0, u / np.where(grid > 0, grid, 1.0), du[0])
    f = f / f[-1]
    w = 1.0 - f
    return ScatteringSolution(grid, f, w, float(lam), a0, kappa, ell, n_particles, V, j)


def eta_coefficients(sol: ScatteringSolution, lattice: MomentumLattice) -> ScatteringSolution:
    """Fill ``eta_p = -w_hat(p/N)/N^2`` on the lattice and ``eta~_0``."""
    N = sol.n_particles
    k = lattice.pnorm / N
    uniq, inv = np.unique(np.round(k, 12), return_inverse=True)
    what = sol.w_hat(uniq)[inv]
    eta_all = -what / N**2
    eta = eta_all.copy()
    eta[lattice.zero_index] = 0.0
    eta_zero = float(-sol.w_hat([0.0])[0] / N**2)
    nz = lattice.nonzero
    if sol.kappa > 0 and len(nz):
        const = float(np.max(np.abs(eta[nz]) * lattice.p2[nz]) / sol.kappa)
    else:
        const = 0.0
    return replace(sol, eta=eta, eta_tilde_zero=eta_zero, lattice=lattice, eta_constant=const)


def eta_direct_fourier(sol: ScatteringSolution, lattice: MomentumLattice,
                       points: int = 64) -> np.ndarray:
    """Independent check of eta: torus Fourier sum of ``-N w(N|x|)`` on a grid.

    Periodic trapezoid rule on ``points**3`` nodes of the unit box.
    """
    N = sol.n_particles
    x = -0.5 + np.arange(points) / points
    X, Y, Z = np.meshgrid(x, x, x, indexing="ij")
    rho = N * np.sqrt(X**2 + Y**2 + Z**2)
    wgrid = np.interp(rho, sol.grid, sol.w, right=0.0)
    g = -N * wgrid / points**3
    out = np.zeros(lattice.mode_count)
    for i, n in enumerate(lattice.modes):
        p = 2 * np.pi * n
        phase = np.exp(-1j * (p[0] * X + p[1] * Y + p[2] * Z))
        out[i] = float(np.real(np.sum(g * phase)))
    out[lattice.zero_index] = 0.0
    return out


@dataclass
class ResidualReport:
    residuals: np.ndarray
    residual_max: float
    scale: float
    boundary_ratio: float

    @property
    def relative(self) -> float:
        return self.residual_max / self.scale if self.scale else 0.0


def verify_scattering_relation(sol: ScatteringSolution, lattice: MomentumLattice,
                               V: PotentialSpec, boundary_tol: float = 0.1) -> ResidualReport:
    """Per-mode residual of the lattice relation satisfied by eta~.

    ``p^2 eta_p + (k/2) V(p/N) + (k/2N) sum_q V((p-q)/N) eta_q
      = N^3 lam chi(p) + N^2 lam sum_q chi(p-q) eta_q`` with both convolutions
    truncated to the cube. Raises :class:`CutoffTooSmall` when
    ``max_boundary |eta| > boundary_tol * max |eta|``.
    """
    if sol.eta is None or sol.lattice != lattice:
        sol = eta_coefficients(sol, lattice)
    N, kappa, lam, ell = sol.n_particles, sol.kappa, sol.lambda_ell, sol.ell
    et = sol.eta_tilde()
    m = lattice.mode_count
    if kappa == 0:
        return ResidualReport(np.zeros(m), 0.0, 0.0, 0.0)
    boundary = np.max(np.abs(lattice.modes), axis=1) == lattice.pmax
    peak = np.max(np.abs(sol.eta))
    ratio = float(np.max(np.abs(sol.eta[boundary])) / peak) if peak > 0 else 0.0
    if ratio > boundary_tol:
        raise CutoffTooSmall(f"boundary eta ratio {ratio:.3g} exceeds {boundary_tol:g}")

    diff = lattice.modes[:, None, :] - lattice.modes[None, :, :]
    dnorm = 2 * np.pi * np.sqrt(np.sum(diff.astype(float) ** 2, axis=2))
    vconv = V.fourier(dnorm / N)
    chiconv = ball_fourier(dnorm, ell)
    p = lattice.pnorm
    lhs = lattice.p2 * et + 0.5 * kappa * V.fourier(p / N) + (kappa / (2 * N)) * vconv @ et
    rhs = N**3 * lam * ball_fourier(p, ell) + N**2 * lam * chiconv @ et
    res = lhs - rhs
    scale = kappa * float(np.max(np.abs(V.fourier(p / N))))
    return ResidualReport(res, float(np.max(np.abs(res))), scale, ratio)
