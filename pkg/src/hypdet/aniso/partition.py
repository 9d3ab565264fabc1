"""Dyadic frequency partitions, band projections and the mixed foliation norm.

Functions live on a periodic box [-B, B)^2; frequencies are angular
(multiplier of e^{i xi.x}), on the lattice xi = (pi/B) j.  Band n carries
support in the annulus 2^{n-1} <= |xi| <= 2^{n+1} intersected with the
angular cutoff of its polarization half.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft
from scipy.ndimage import map_coordinates

from ..errors import GridTooCoarse, SupportMarginViolated
from ..maps import Polarization, _angdist, _mollifier_f


def mollifier_chi(s):
    """C-infinity cutoff: 1 for s <= 1, 0 for s >= 2, symmetric glue between.

    chi(s) = f(2-s) / (f(2-s) + f(s-1)) with f(t) = exp(-1/t) for t > 0;
    chi(1.5) = 0.5 exactly.
    """
    s = np.asarray(s, dtype=float)
    up = _mollifier_f(2.0 - s)
    down = _mollifier_f(s - 1.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        val = np.where(s <= 1.0, 1.0, np.where(s >= 2.0, 0.0, up / (up + down)))
    return val if val.ndim else float(val)


def chi_n(xi_norm, n: int):
    """chi(2^{-n} |xi|); chi_{-1} is identically zero."""
    if n < 0:
        return np.zeros_like(np.asarray(xi_norm, dtype=float))
    return mollifier_chi(np.asarray(xi_norm, dtype=float) * 2.0 ** (-n))


def _psi_radial(xi_norm, n: int):
    return chi_n(xi_norm, n) - chi_n(xi_norm, n - 1)


def dyadic_partition_eval(theta: Polarization, n: int, sigma: str, xi):
    """psi_{Theta,n,sigma}(xi): radial dyadic band times the angular cutoff.

    n = 0 is the isotropic core chi_0(xi)/2 for both sigma.
    """
    xi = np.asarray(xi, dtype=float)
    norm = np.sqrt(np.sum(xi**2, axis=-1))
    if n == 0:
        return chi_n(norm, 0) / 2.0
    rad = _psi_radial(norm, n)
    ang = np.where(norm > 0, _phi_sigma(theta, xi, norm, sigma), 0.0)
    return rad * ang


def _phi_sigma(theta, xi, norm, sigma):
    safe = np.maximum(norm, 1e-300)
    unit = xi / safe[..., None]
    if sigma == "+":
        return theta.phi_plus(unit)
    if sigma == "-":
        return theta.phi_minus(unit)
    raise ValueError("sigma must be '+' or '-'")


def _phi_tilde(theta: Polarization, xi, norm, tau: str):
    """Widened angular cutoffs: phi~_+ = 1 off C_-, phi~_- = 1 off C_+.

    The inner cones C~ use half the angular margin of the gap, so
    phi~_tau = 1 on supp(phi_tau).
    """
    safe = np.maximum(norm, 1e-300)
    unit = xi / safe[..., None]
    t_p = _angdist(np.arctan2(unit[..., 1], unit[..., 0]), theta.axis_plus)
    gap = _angdist(theta.axis_plus, theta.axis_minus) - theta.half_plus - theta.half_minus
    if tau == "+":
        # transition inside C_-: from its boundary to the half-margin inner cone
        lo = _angdist(theta.axis_plus, theta.axis_minus) - theta.half_minus
        hi = lo + 0.5 * theta.half_minus
        return 1.0 - _smooth01(t_p, lo, hi)
    if tau == "-":
        # zero on the shrunk C~_+, one outside C_+
        hi = theta.half_plus
        lo = 0.5 * theta.half_plus
        return _smooth01(t_p, lo, hi)
    raise ValueError("tau must be '+' or '-'")


def _smooth01(t, lo, hi):
    """Smooth 0 -> 1 ramp on [lo, hi]."""
    s = (np.clip(t, lo, hi) - lo) / (hi - lo)
    up = _mollifier_f(s)
    down = _mollifier_f(1.0 - s)
    with np.errstate(invalid="ignore"):
        v = np.where(s <= 0.0, 0.0, np.where(s >= 1.0, 1.0, up / (up + down)))
    return v


def psi_tilde_eval(theta: Polarization, ell: int, tau: str, xi):
    """Widened multiplier psi~_{Theta,ell,tau}; equals 1 on supp psi_{ell,tau}.

    Radial part chi(2^{-ell-1}|xi|) - chi(2^{-ell+2}|xi|) for ell >= 1, and
    chi(|xi|/2) for ell = 0.
    """
    xi = np.asarray(xi, dtype=float)
    norm = np.sqrt(np.sum(xi**2, axis=-1))
    if ell == 0:
        return mollifier_chi(0.5 * norm)
    rad = mollifier_chi(norm * 2.0 ** (-ell - 1)) - mollifier_chi(norm * 2.0 ** (-ell + 2))
    ang = np.where(norm > 0, _phi_tilde(theta, xi, norm, tau), 0.0)
    return rad * ang


def dyadic_partition_sum(theta: Polarization, xi, n_max: int):
    """sum over n <= n_max, sigma of psi_{Theta,n,sigma}(xi) (= chi_{n_max} there)."""
    total = dyadic_partition_eval(theta, 0, "+", xi) + dyadic_partition_eval(theta, 0, "-", xi)
    for n in range(1, n_max + 1):
        for sigma in "+-":
            total = total + dyadic_partition_eval(theta, n, sigma, xi)
    return total


def psi_hat_l1_bound(theta: Polarization, n: int, sigma: str, box_half: float = 40.0,
                     n_pix: int = 1024) -> float:
    """Numerical ||psi_hat_{Theta,n,sigma}||_{L^1}; bounded uniformly in n.

    With lattice quadrature of the inverse transform the L1 sum collapses to
    sum |ifft2| exactly (the h^2 dxi^2 n^2 / (2 pi)^2 factor is 1).
    """
    grid = BoxGrid(box_half, n_pix)
    grid.require_band(n)
    vals = dyadic_partition_eval(theta, n, sigma, grid.xi_points()).reshape(n_pix, n_pix)
    return float(np.sum(np.abs(sfft.ifft2(vals))))


# ---------------------------------------------------------------------------
# grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoxGrid:
    """Uniform periodic grid on [-B, B)^2 with FFT-ordered frequencies."""

    box_half: float
    n_pix: int

    @property
    def h(self) -> float:
        return 2.0 * self.box_half / self.n_pix

    @property
    def dxi(self) -> float:
        return math.pi / self.box_half

    def coords_1d(self) -> np.ndarray:
        return -self.box_half + self.h * np.arange(self.n_pix)

    def points(self) -> np.ndarray:
        c = self.coords_1d()
        X1, X2 = np.meshgrid(c, c, indexing="ij")
        return np.stack([X1.ravel(), X2.ravel()], axis=-1)

    def xi_1d(self) -> np.ndarray:
        return 2.0 * math.pi * sfft.fftfreq(self.n_pix, d=self.h)

    def xi_points(self) -> np.ndarray:
        f = self.xi_1d()
        XI1, XI2 = np.meshgrid(f, f, indexing="ij")
        return np.stack([XI1.ravel(), XI2.ravel()], axis=-1)

    @property
    def xi_max(self) -> float:
        return math.pi / self.h

    def max_band(self) -> int:
        # band n needs support radius 2^{n+1} inside the inscribed Nyquist disc
        return int(math.floor(math.log2(self.xi_max) - 1.0))

    def require_band(self, n: int):
        if 2.0 ** (n + 1) > self.xi_max:
            raise GridTooCoarse(
                f"band {n} needs |xi| up to {2.0 ** (n + 1):.0f}, Nyquist is {self.xi_max:.0f}"
            )

    def multiplier(self, fn) -> np.ndarray:
        """Evaluate a multiplier on the frequency lattice, shaped (n_pix, n_pix)."""
        return np.asarray(fn(self.xi_points())).reshape(self.n_pix, self.n_pix)

    def apply_multiplier(self, u: np.ndarray, mult: np.ndarray) -> np.ndarray:
        return sfft.ifft2(sfft.fft2(u) * mult)

    def interp(self, u: np.ndarray, pts: np.ndarray, order: int = 3) -> np.ndarray:
        """Periodic interpolation of grid values at arbitrary points."""
        ij = (pts + self.box_half) / self.h
        coords = np.stack([ij[:, 0], ij[:, 1]])
        if np.iscomplexobj(u):
            re = map_coordinates(u.real, coords, order=order, mode="grid-wrap")
            im = map_coordinates(u.imag, coords, order=order, mode="grid-wrap")
            return re + 1j * im
        return map_coordinates(u, coords, order=order, mode="grid-wrap")

    def integral(self, u: np.ndarray):
        return np.sum(u) * self.h**2


@dataclass(frozen=True)
class BandFunction:
    """Grid samples of a function declared to live in one dyadic band."""

    grid: BoxGrid
    values: np.ndarray
    n: int
    sigma: str

    def band_mass_outside(self) -> float:
        """Fourier mass outside supp chi_{n+3}, relative to the total."""
        hat = sfft.fft2(self.values)
        norm = np.sqrt(np.sum(self.grid.xi_points() ** 2, axis=-1)).reshape(hat.shape)
        outside = norm > 2.0 ** (self.n + 4)
        total = np.sum(np.abs(hat) ** 2)
        if total == 0:
            return 0.0
        return float(np.sum(np.abs(hat[outside]) ** 2) / total)


def check_support_margin(grid: BoxGrid, u: np.ndarray, margin_frac: float = 0.25,
                         tol: float = 1e-8):
    c = np.abs(grid.coords_1d())
    outer = c > grid.box_half * (1.0 - margin_frac)
    ring = np.zeros((grid.n_pix, grid.n_pix), dtype=bool)
    ring[outer, :] = True
    ring[:, outer] = True
    peak = np.max(np.abs(u))
    if peak > 0 and np.max(np.abs(u[ring])) > tol * peak:
        raise SupportMarginViolated(
            f"mass within {margin_frac:.0%} of the box boundary"
        )


def band_project(grid: BoxGrid, u: np.ndarray, theta: Polarization, n: int,
                 sigma: str, check_margin: bool = True) -> BandFunction:
    """psi_{Theta,n,sigma}(D) u by FFT multiplier.

    check_margin=False skips the support-margin precondition; the multiplier
    action is exact on lattice plane waves regardless of support.
    """
    grid.require_band(n)
    if check_margin:
        check_support_margin(grid, u)
    mult = grid.multiplier(lambda xi: dyadic_partition_eval(theta, n, sigma, xi))
    return BandFunction(grid=grid, values=grid.apply_multiplier(np.asarray(u, dtype=complex), mult),
                        n=n, sigma=sigma)


# ---------------------------------------------------------------------------
# mixed norm and Young inequality
# ---------------------------------------------------------------------------


def admissible_directions(theta: Polarization, n_dirs: int = 17,
                          shrink: float = 0.95) -> np.ndarray:
    """Unit line directions v whose conormal v-perp lies inside cone_plus."""
    center = theta.axis_plus + 0.5 * math.pi
    half = theta.half_plus * shrink
    ang = center + np.linspace(-half, half, n_dirs)
    return np.stack([np.cos(ang), np.sin(ang)], axis=-1)


def mixed_norm_L1F(grid: BoxGrid, u: np.ndarray, theta: Polarization,
                   n_dirs: int = 17, n_offsets: int = 129,
                   offset_extent: float | None = None,
                   line_samples: int | None = None) -> float:
    """sup over admissible straight lines of the line integral of |u|.

    Lines are sampled over n_dirs admissible directions and n_offsets
    perpendicular offsets (always including offset zero); trapezoid rule
    along each line with cubic grid interpolation.
    """
    if line_samples is None:
        line_samples = grid.n_pix
    if offset_extent is None:
        offset_extent = 0.75 * grid.box_half
    dirs = admissible_directions(theta, n_dirs)
    offsets = np.linspace(-offset_extent, offset_extent, n_offsets)
    half_len = 0.75 * grid.box_half
    t = np.linspace(-half_len, half_len, line_samples)
    dt = t[1] - t[0]
    best = 0.0
    u = np.asarray(u)
    for v in dirs:
        nrm = np.array([-v[1], v[0]])
        # all lines of one direction in a single interpolation call
        pts = (offsets[:, None, None] * nrm[None, None, :]
               + t[None, :, None] * v[None, None, :]).reshape(-1, 2)
        vals = np.abs(grid.interp(u, pts)).reshape(n_offsets, line_samples)
        integ = dt * (vals.sum(axis=1) - 0.5 * (vals[:, 0] + vals[:, -1]))
        best = max(best, float(integ.max()))
    return best


def convolve(grid: BoxGrid, a: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Continuous convolution a * u realized on the periodic grid.

    One factor is ifftshifted so that index arithmetic matches coordinates
    that start at -B rather than 0.
    """
    return sfft.ifft2(sfft.fft2(a) * sfft.fft2(sfft.ifftshift(u))) * grid.h**2


def young_check(grid: BoxGrid, a: np.ndarray, u: np.ndarray, theta: Polarization,
                rel_slack: float = 1e-6, quad_slack_rel: float = 2e-3,
                **norm_kwargs) -> tuple:
    """(lhs, rhs, pass) for ||a*u||_{L1(F)} <= ||a||_{L1} ||u||_{L1(F)}.

    Both sides share the same line sample set; the quadrature allowance
    covers interpolation and trapezoid error on the shared grid.
    """
    conv = convolve(grid, np.asarray(a, dtype=complex), np.asarray(u, dtype=complex))
    lhs = mixed_norm_L1F(grid, conv, theta, **norm_kwargs)
    a_l1 = float(np.sum(np.abs(a)) * grid.h**2)
    rhs = a_l1 * mixed_norm_L1F(grid, u, theta, **norm_kwargs)
    ok = lhs <= rhs * (1.0 + rel_slack) + quad_slack_rel * rhs
    return lhs, rhs, bool(ok)
