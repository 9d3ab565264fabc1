"""Hyperbolic map models: toral automorphisms, perturbations, chart models.

Points are numpy arrays of shape (2,) or batches of shape (n, 2).  Torus maps
act on [0,1)^2, chart models on R^2 with an isolating box V.  All builtin maps
carry analytic Jacobians; no finite differences anywhere in the core.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (
    ConeViolation,
    DegenerateDirection,
    OrbitLeftDomain,
    PerturbationTooLarge,
)

TWO_PI = 2.0 * math.pi

CAT_A = np.array([[2, 1], [1, 1]], dtype=float)
CAT_A_INT = np.array([[2, 1], [1, 1]], dtype=np.int64)
# eigenvalues of CAT_A
CAT_LAMBDA = (3.0 + math.sqrt(5.0)) / 2.0
CAT_MU = (3.0 - math.sqrt(5.0)) / 2.0

PERTURBATION_BOUND = 0.05


def _as_batch(x):
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    return np.atleast_2d(x), squeeze


@dataclass(frozen=True)
class MapSystem:
    """A hyperbolic diffeomorphism model with weight.

    forward/inverse/jacobian/weight accept single points (2,) or batches
    (n, 2); jacobian returns (2, 2) or (n, 2, 2).
    """

    name: str
    dim: int
    domain: str  # "torus" or "chart"
    forward: Callable
    inverse: Callable
    jacobian: Callable
    weight: Callable
    smoothness: float = math.inf
    stable_dim: int = 1
    unstable_dim: int = 1
    params: dict = field(default_factory=dict)
    # chart models: isolating box V (weight support lives inside), (lo, hi) per axis
    box: Optional[tuple] = None
    # region where the callables are defined; None means all of R^2
    valid_region: Optional[tuple] = None
    # torus maps: induced integer matrix on homology, and the periodic
    # remainder T(x) - A x as an exact callable (used by fast pipelines)
    linear_part: Optional[np.ndarray] = None
    periodic_part: Optional[Callable] = None

    def with_weight(self, weight: Callable, tag: str = "custom"):
        """Same dynamics, different weight."""
        return MapSystem(
            name=self.name,
            dim=self.dim,
            domain=self.domain,
            forward=self.forward,
            inverse=self.inverse,
            jacobian=self.jacobian,
            weight=weight,
            smoothness=self.smoothness,
            stable_dim=self.stable_dim,
            unstable_dim=self.unstable_dim,
            params={**self.params, "weight": tag},
            box=self.box,
            valid_region=self.valid_region,
            linear_part=self.linear_part,
            periodic_part=self.periodic_part,
        )


@dataclass(frozen=True)
class Polarization:
    """Pair of disjoint closed cones with angular cutoff functions (d=2).

    Cones are symmetric double sectors: axis angle plus half-angle, in
    radians.  phi_plus/phi_minus are evaluated on direction angles and
    satisfy phi_plus + phi_minus = 1 with plateaus on the cones.
    """

    axis_plus: float
    half_plus: float
    axis_minus: float
    half_minus: float

    def __post_init__(self):
        gap = _sector_gap(self.axis_plus, self.half_plus, self.axis_minus, self.half_minus)
        if gap <= 0.0:
            raise ConeViolation(
                "cone_plus and cone_minus overlap (gap %.4f rad)" % gap,
                witness=(self.axis_plus, self.axis_minus),
            )

    def in_cone_plus(self, v) -> np.ndarray:
        return _angdist(_angle_of(v), self.axis_plus) <= self.half_plus + 1e-15

    def in_cone_minus(self, v) -> np.ndarray:
        return _angdist(_angle_of(v), self.axis_minus) <= self.half_minus + 1e-15

    def phi_plus(self, v) -> np.ndarray:
        """Angular cutoff: 1 on cone_plus, 0 on cone_minus, smooth between."""
        t = _angdist(_angle_of(v), self.axis_plus)
        # distance from the cone_plus axis at which cone_minus starts
        lo = self.half_plus
        hi = _angdist(self.axis_minus, self.axis_plus) - self.half_minus
        return _plateau_step(t, lo, hi)

    def phi_minus(self, v) -> np.ndarray:
        return 1.0 - self.phi_plus(v)


@dataclass(frozen=True)
class SplittingField:
    """Approximate stable/unstable line fields, unit vectors per point."""

    stable: Callable
    unstable: Callable
    ref_iterations: int


def _angle_of(v):
    v = np.asarray(v, dtype=float)
    if v.ndim == 1:
        return math.atan2(v[1], v[0])
    return np.arctan2(v[..., 1], v[..., 0])


def _angdist(a, b):
    """Angular distance between directions modulo pi (cones are symmetric)."""
    d = np.mod(np.asarray(a) - b, math.pi)
    return np.minimum(d, math.pi - d)


def _sector_gap(ax_p, h_p, ax_m, h_m):
    return _angdist(ax_p, ax_m) - h_p - h_m


def _mollifier_f(t):
    """exp(-1/t) for t > 0, else 0; the standard C-infinity glue."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def _plateau_step(t, lo, hi):
    """Smooth transition: 1 for t <= lo, 0 for t >= hi."""
    t = np.asarray(t, dtype=float)
    if hi <= lo:
        raise ValueError("empty transition interval")
    s = (np.clip(t, lo, hi) - lo) / (hi - lo)
    up = _mollifier_f(1.0 - s)
    down = _mollifier_f(s)
    with np.errstate(invalid="ignore"):
        val = up / (up + down)
    val = np.where(s <= 0.0, 1.0, val)
    val = np.where(s >= 1.0, 0.0, val)
    return val if val.ndim else float(val)


def smooth_bump(t):
    """C-infinity bump on (-1,1), equal to 1 at 0: exp(1 - 1/(1-t^2))."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    ti = t[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - ti * ti))
    return out


def _smooth_bump_deriv(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    ti = t[inside]
    one = 1.0 - ti * ti
    out[inside] = np.exp(1.0 - 1.0 / one) * (-2.0 * ti / one**2)
    return out


# ---------------------------------------------------------------------------
# builtin torus maps
# ---------------------------------------------------------------------------


def builtin_cat_map() -> MapSystem:
    """Arnold cat map x -> Ax mod 1 with A = [[2,1],[1,1]], weight 1."""
    A = CAT_A
    Ainv = np.array([[1.0, -1.0], [-1.0, 2.0]])

    def forward(x):
        xb, sq = _as_batch(x)
        y = np.mod(xb @ A.T, 1.0)
        return y[0] if sq else y

    def inverse(x):
        xb, sq = _as_batch(x)
        y = np.mod(xb @ Ainv.T, 1.0)
        return y[0] if sq else y

    def jacobian(x):
        xb, sq = _as_batch(x)
        J = np.broadcast_to(A, (xb.shape[0], 2, 2)).copy()
        return J[0] if sq else J

    def weight(x):
        xb, sq = _as_batch(x)
        w = np.ones(xb.shape[0])
        return float(w[0]) if sq else w

    def periodic_part(x):
        xb, sq = _as_batch(x)
        z = np.zeros_like(xb)
        return z[0] if sq else z

    return MapSystem(
        name="cat",
        dim=2,
        domain="torus",
        forward=forward,
        inverse=inverse,
        jacobian=jacobian,
        weight=weight,
        params={"eps": 0.0, "seed": 0},
        linear_part=CAT_A_INT.copy(),
        periodic_part=periodic_part,
    )


def _perturbation_vectors(seed: int):
    """Integer frequency vectors of the two perturbation harmonics."""
    if seed == 0:
        return np.array([0, 1]), np.array([1, 1])
    rng = np.random.default_rng(seed)
    choices = [np.array(v) for v in ((0, 1), (1, 0), (1, 1), (1, -1))]
    k1 = choices[rng.integers(0, len(choices))]
    k2 = choices[rng.integers(0, len(choices))]
    return k1, k2


def builtin_perturbed_cat(eps: float, seed: int = 0) -> MapSystem:
    """Analytic perturbation x -> Ax + eps*(sin 2pi k1.x, sin 2pi k2.x) mod 1.

    Default seed gives k1 = (0,1), k2 = (1,1); other seeds pick a different
    pair of unit harmonics.  The origin stays fixed for every seed.
    """
    if abs(eps) > PERTURBATION_BOUND:
        raise PerturbationTooLarge(
            f"|eps| = {abs(eps)} exceeds documented bound {PERTURBATION_BOUND}"
        )
    A = CAT_A
    k1, k2 = _perturbation_vectors(seed)
    k1 = k1.astype(float)
    k2 = k2.astype(float)

    def pert(xb):
        s1 = np.sin(TWO_PI * (xb @ k1))
        s2 = np.sin(TWO_PI * (xb @ k2))
        return eps * np.stack([s1, s2], axis=-1)

    def forward(x):
        xb, sq = _as_batch(x)
        y = np.mod(xb @ A.T + pert(xb), 1.0)
        return y[0] if sq else y

    def jacobian(x):
        xb, sq = _as_batch(x)
        c1 = np.cos(TWO_PI * (xb @ k1)) * eps * TWO_PI
        c2 = np.cos(TWO_PI * (xb @ k2)) * eps * TWO_PI
        J = np.empty((xb.shape[0], 2, 2))
        J[:, 0, 0] = A[0, 0] + c1 * k1[0]
        J[:, 0, 1] = A[0, 1] + c1 * k1[1]
        J[:, 1, 0] = A[1, 0] + c2 * k2[0]
        J[:, 1, 1] = A[1, 1] + c2 * k2[1]
        return J[0] if sq else J

    def inverse(y):
        yb, sq = _as_batch(y)
        Ainv = np.linalg.inv(A)
        x = np.mod(yb @ Ainv.T, 1.0)
        for _ in range(60):
            r = forward(x) - yb
            r -= np.round(r)  # shortest torus displacement
            if np.max(np.abs(r)) < 1e-14:
                break
            J = jacobian(x)
            x = np.mod(x - np.linalg.solve(J, r[..., None])[..., 0], 1.0)
        return x[0] if sq else x

    def weight(x):
        xb, sq = _as_batch(x)
        w = np.ones(xb.shape[0])
        return float(w[0]) if sq else w

    def periodic_part(x):
        xb, sq = _as_batch(x)
        p = pert(xb)
        return p[0] if sq else p

    return MapSystem(
        name="perturbed_cat",
        dim=2,
        domain="torus",
        forward=forward,
        inverse=inverse,
        jacobian=jacobian,
        weight=weight,
        params={"eps": float(eps), "seed": int(seed)},
        linear_part=CAT_A_INT.copy(),
        periodic_part=periodic_part,
    )


# ---------------------------------------------------------------------------
# builtin chart model
# ---------------------------------------------------------------------------

CHART_SECTOR_HALF = math.radians(35.0)  # 45 degrees minus a 10 degree margin
CHART_WEIGHT_RADIUS = 0.25
CHART_BUMP_SCALE = 1.0


def chart_weight(x):
    """Compactly supported C-infinity weight bump, G(0) = 1."""
    xb, sq = _as_batch(x)
    r = np.hypot(xb[:, 0], xb[:, 1]) / CHART_WEIGHT_RADIUS
    w = smooth_bump(r)
    return float(w[0]) if sq else w


def builtin_chart_model(eps: float):
    """Cone-hyperbolic model T(x,y) = (x/2 + eps p, 2y + eps q) on R^2.

    p and q are compactly supported smooth bumps.  Returns the MapSystem and
    the two polarizations (Theta, Theta'): sectors of half-angle 35 degrees
    about the unstable-conormal axis (xi_1) for C_+ and about the
    stable-conormal axis (xi_2) for C_-.
    """
    if abs(eps) > PERTURBATION_BOUND:
        raise PerturbationTooLarge(
            f"|eps| = {abs(eps)} exceeds documented bound {PERTURBATION_BOUND}"
        )
    s = CHART_BUMP_SCALE

    def p_fun(xb):
        return smooth_bump(xb[:, 0] / s) * smooth_bump(xb[:, 1] / s)

    def q_fun(xb):
        # a second bump, offset so the two perturbations differ
        return smooth_bump(xb[:, 0] / s) * smooth_bump((xb[:, 1] - 0.2) / s)

    def forward(x):
        xb, sq = _as_batch(x)
        y = np.empty_like(xb)
        y[:, 0] = 0.5 * xb[:, 0] + eps * p_fun(xb)
        y[:, 1] = 2.0 * xb[:, 1] + eps * q_fun(xb)
        return y[0] if sq else y

    def jacobian(x):
        xb, sq = _as_batch(x)
        bx = smooth_bump(xb[:, 0] / s)
        by = smooth_bump(xb[:, 1] / s)
        by2 = smooth_bump((xb[:, 1] - 0.2) / s)
        dbx = _smooth_bump_deriv(xb[:, 0] / s) / s
        dby = _smooth_bump_deriv(xb[:, 1] / s) / s
        dby2 = _smooth_bump_deriv((xb[:, 1] - 0.2) / s) / s
        J = np.empty((xb.shape[0], 2, 2))
        J[:, 0, 0] = 0.5 + eps * dbx * by
        J[:, 0, 1] = eps * bx * dby
        J[:, 1, 0] = eps * dbx * by2
        J[:, 1, 1] = 2.0 + eps * bx * dby2
        return J[0] if sq else J

    def inverse(y):
        yb, sq = _as_batch(y)
        x = np.stack([2.0 * yb[:, 0], 0.5 * yb[:, 1]], axis=-1)
        for _ in range(60):
            r = forward(x) - yb
            if np.max(np.abs(r)) < 1e-14:
                break
            J = jacobian(x)
            x = x - np.linalg.solve(J, r[..., None])[..., 0]
        return x[0] if sq else x

    sys = MapSystem(
        name="chart",
        dim=2,
        domain="chart",
        forward=forward,
        inverse=inverse,
        jacobian=jacobian,
        weight=chart_weight,
        params={"eps": float(eps)},
        box=((-1.0, 1.0), (-1.0, 1.0)),
    )
    theta = Polarization(0.0, CHART_SECTOR_HALF, math.pi / 2.0, CHART_SECTOR_HALF)
    theta_prime = Polarization(0.0, CHART_SECTOR_HALF, math.pi / 2.0, CHART_SECTOR_HALF)
    return sys, theta, theta_prime


def iterate_map(sys: MapSystem, m: int) -> MapSystem:
    """The m-th iterate as a MapSystem (weight iterated as g^(m))."""
    if m < 1:
        raise ValueError("m >= 1 required")

    def forward(x):
        y = x
        for _ in range(m):
            y = sys.forward(y)
        return y

    def inverse(x):
        y = x
        for _ in range(m):
            y = sys.inverse(y)
        return y

    def jacobian(x):
        return jacobian_cocycle(sys, x, m)

    def weight(x):
        return weight_product(sys, x, m)

    return MapSystem(
        name=f"{sys.name}^{m}",
        dim=sys.dim,
        domain=sys.domain,
        forward=forward,
        inverse=inverse,
        jacobian=jacobian,
        weight=weight,
        params={**sys.params, "iterate": m},
        box=sys.box,
        valid_region=sys.valid_region,
    )


# ---------------------------------------------------------------------------
# cocycle and exponents
# ---------------------------------------------------------------------------


def _check_in_box(sys: MapSystem, xb):
    if sys.valid_region is None:
        return
    (x0, x1), (y0, y1) = sys.valid_region
    bad = (xb[:, 0] < x0) | (xb[:, 0] > x1) | (xb[:, 1] < y0) | (xb[:, 1] > y1)
    if np.any(bad):
        raise OrbitLeftDomain(f"point {xb[bad][0]} outside map domain")


def jacobian_cocycle(sys: MapSystem, x, m: int):
    """DT^m(x) by the chain rule; m = 0 gives the identity."""
    if m < 0:
        raise ValueError("m >= 0 required")
    xb, sq = _as_batch(x)
    J = np.broadcast_to(np.eye(2), (xb.shape[0], 2, 2)).copy()
    y = xb
    for _ in range(m):
        _check_in_box(sys, y)
        J = sys.jacobian(y) @ J
        y = sys.forward(y)
    return J[0] if sq else J


def weight_product(sys: MapSystem, x, m: int):
    """g^(m)(x) = prod_{k<m} g(T^k x); m = 0 gives 1."""
    xb, sq = _as_batch(x)
    w = np.ones(xb.shape[0])
    y = xb
    for _ in range(m):
        w = w * np.asarray(sys.weight(y))
        y = sys.forward(y)
    return float(w[0]) if sq else w


def splitting_power_iteration(sys: MapSystem, n_ref: int = 30, v0=(1.0, 0.0)) -> SplittingField:
    """Stable/unstable line fields by forward/backward power iteration.

    unstable(x) is the direction of DT^{n_ref}(T^{-n_ref} x) v0; stable(x)
    the direction of [DT^{n_ref}(x)]^{-1} v0 (expansion under T^{-1}).
    """
    if n_ref < 8:
        raise ValueError("n_ref >= 8 required")
    v0 = np.asarray(v0, dtype=float)
    angle_floor = 1e-6

    def unstable(x):
        # push v0 forward along the stored backward orbit, renormalizing each
        # step; re-iterating forward instead would drift off the orbit at
        # rate lambda^n and evaluate the cocycle at wrong points
        xb, sq = _as_batch(x)
        orbit = [xb]
        for _ in range(n_ref):
            orbit.append(sys.inverse(orbit[-1]))
        v = np.broadcast_to(v0, xb.shape).copy()
        for k in range(n_ref, 0, -1):
            v = (sys.jacobian(orbit[k]) @ v[..., None])[..., 0]
            norms = np.linalg.norm(v, axis=-1)
            if np.any(norms < angle_floor):
                raise DegenerateDirection("unstable iterate collapsed")
            v = v / norms[:, None]
        growth = np.linalg.norm((sys.jacobian(xb) @ v[..., None])[..., 0], axis=-1)
        if np.any(growth <= 1.0):
            raise DegenerateDirection("candidate unstable direction does not expand")
        return v[0] if sq else v

    def stable(x):
        # pull v0 back through the derivative along the forward orbit of x
        xb, sq = _as_batch(x)
        orbit = [xb]
        for _ in range(n_ref):
            orbit.append(sys.forward(orbit[-1]))
        v = np.broadcast_to(v0, xb.shape).copy()
        for k in range(n_ref - 1, -1, -1):
            v = np.linalg.solve(sys.jacobian(orbit[k]), v[..., None])[..., 0]
            norms = np.linalg.norm(v, axis=-1)
            if np.any(norms < angle_floor):
                raise DegenerateDirection("stable iterate collapsed")
            v = v / norms[:, None]
        shrink = np.linalg.norm((sys.jacobian(xb) @ v[..., None])[..., 0], axis=-1)
        if np.any(shrink >= 1.0):
            raise DegenerateDirection("candidate stable direction does not contract")
        return v[0] if sq else v

    return SplittingField(stable=stable, unstable=unstable, ref_iterations=n_ref)


def hyperbolicity_exponents(sys: MapSystem, split: SplittingField, x, m: int):
    """Local exponents (lambda_x(T^m), nu_x(T^m)) for d_s = d_u = 1.

    lambda is computed exactly in d_s = 1 by pulling the stable line at T^m x
    back through DT^m; nu is the expansion of the unstable direction at x.
    """
    if m < 1:
        raise ValueError("m >= 1 required")
    xb, sq = _as_batch(x)
    orbit = [xb]
    for _ in range(m):
        _check_in_box(sys, orbit[-1])
        orbit.append(sys.forward(orbit[-1]))
    # v with DT^m v in E^s(T^m x): pull the stable line back step by step,
    # renormalizing; lambda = 1 / prod |DT^{-1}-step growth|
    v = np.atleast_2d(split.stable(orbit[-1]))
    log_lam = np.zeros(xb.shape[0])
    for k in range(m - 1, -1, -1):
        v = np.linalg.solve(sys.jacobian(orbit[k]), v[..., None])[..., 0]
        norms = np.linalg.norm(v, axis=-1)
        log_lam -= np.log(norms)
        v = v / norms[:, None]
    lam = np.exp(log_lam)
    # nu: forward expansion of the unstable direction, renormalized stepwise
    u = np.atleast_2d(split.unstable(xb))
    log_nu = np.zeros(xb.shape[0])
    for k in range(m):
        u = (sys.jacobian(orbit[k]) @ u[..., None])[..., 0]
        norms = np.linalg.norm(u, axis=-1)
        log_nu += np.log(norms)
        u = u / norms[:, None]
    nu = np.exp(log_nu)
    if sq:
        return float(lam[0]), float(nu[0])
    return lam, nu


def lambda_pqm(sys: MapSystem, split: SplittingField, x, p: float, q: float, m: int):
    """max{ lambda_x(T^m)^p, nu_x(T^m)^q }."""
    lam, nu = hyperbolicity_exponents(sys, split, x, m)
    return np.maximum(lam**p, nu**q)


def unstable_jacobian(sys: MapSystem, split: SplittingField, x, m: int):
    """|det(DT^m|_{E^u})|(x); in d_u = 1 the norm of DT^m applied to u(x)."""
    if m < 1:
        raise ValueError("m >= 1 required")
    xb, sq = _as_batch(x)
    u = np.atleast_2d(split.unstable(xb))
    y = xb
    log_val = np.zeros(xb.shape[0])
    for _ in range(m):
        _check_in_box(sys, y)
        u = (sys.jacobian(y) @ u[..., None])[..., 0]
        norms = np.linalg.norm(u, axis=-1)
        log_val += np.log(norms)
        u = u / norms[:, None]
        y = sys.forward(y)
    val = np.exp(log_val)
    return float(val[0]) if sq else val


def weight_floor(g: Callable, n: int) -> Callable:
    """g_n(x) = sqrt(g(x)^2 + 1/n^2): positive floor, decreasing in n."""
    if n < 1:
        raise ValueError("n >= 1 required")

    def g_n(x):
        return np.sqrt(np.asarray(g(x)) ** 2 + 1.0 / n**2)

    return g_n


# ---------------------------------------------------------------------------
# cone-hyperbolicity check
# ---------------------------------------------------------------------------


def _sector_image_margin(M, theta: Polarization, theta_p: Polarization, n_dirs: int = 181):
    """Margin (radians) by which M^tr maps complement(C_+) inside C'_-.

    Uses the two boundary rays of the complement sector plus sampled interior
    directions; for a linear map the image sector is spanned by the boundary
    images, the samples guard against degenerate cases.
    """
    lo = theta.half_plus  # complement of C_+: directions with angdist > half_plus
    angles = theta.axis_plus + np.concatenate(
        [[lo + 1e-12, math.pi - lo - 1e-12], np.linspace(lo + 1e-9, math.pi - lo - 1e-9, n_dirs)]
    )
    dirs = np.stack([np.cos(angles), np.sin(angles)], axis=-1)
    imgs = dirs @ M  # rows: M^tr @ dir
    d = _angdist(_angle_of(imgs), theta_p.axis_minus)
    return float(theta_p.half_minus - np.max(d))


def secant_matrix(sys: MapSystem, x, y, nodes: int = 16):
    """Mean-value matrix L_xy = int_0^1 DT(y + t(x-y)) dt, L_xy (x-y) = T(x)-T(y).

    Fixed Gauss-Legendre quadrature; exact for the builtin trigonometric and
    polynomial-in-bump Jacobians to quadrature accuracy.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    t, w = np.polynomial.legendre.leggauss(nodes)
    t = 0.5 * (t + 1.0)
    w = 0.5 * w
    pts = y[None, :] + t[:, None] * (x - y)[None, :]
    J = sys.jacobian(pts)
    return np.einsum("k,kij->ij", w, J)


def check_cone_hyperbolic(
    sys: MapSystem,
    theta: Polarization,
    theta_prime: Polarization,
    n_samples: int = 50,
    seed: int = 0,
    sample_box: float = 2.0,
):
    """Verify DT^tr and all sampled secant matrices satisfy the cone condition.

    Returns a report dict with the worst margins; raises ConeViolation with
    the witnessing point or pair on failure.
    """
    if sys.domain != "chart":
        raise ValueError("cone check applies to chart models")
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-sample_box, sample_box, size=(n_samples, 2))
    margins = []
    for xp in pts:
        M = sys.jacobian(xp)
        mgn = _sector_image_margin(M, theta, theta_prime)
        if mgn <= 0.0:
            raise ConeViolation(f"derivative cone condition fails, margin {mgn:.4f}", witness=xp)
        margins.append(mgn)
    pair_margins = []
    pairs = rng.uniform(-sample_box, sample_box, size=(n_samples, 2, 2))
    for xp, yp in pairs:
        L = secant_matrix(sys, xp, yp)
        # consistency of the mean-value property
        resid = L @ (xp - yp) - (sys.forward(xp) - sys.forward(yp))
        mgn = _sector_image_margin(L, theta, theta_prime)
        if mgn <= 0.0:
            raise ConeViolation(
                f"secant cone condition fails, margin {mgn:.4f}", witness=(xp, yp)
            )
        pair_margins.append((mgn, float(np.linalg.norm(resid))))
    return {
        "derivative_margin": min(margins),
        "secant_margin": min(m for m, _ in pair_margins),
        "max_secant_residual": max(r for _, r in pair_margins),
        "n_samples": n_samples,
    }


def make_map(map_id: str, eps: float = 0.0, seed: int = 0):
    """Builtin map registry used by continuation and the CLI."""
    if map_id == "cat":
        return builtin_cat_map() if eps == 0.0 else builtin_perturbed_cat(eps, seed)
    if map_id == "perturbed_cat":
        return builtin_perturbed_cat(eps, seed)
    if map_id == "chart":
        return builtin_chart_model(eps)[0]
    raise ValueError(f"unknown map id {map_id!r}")
