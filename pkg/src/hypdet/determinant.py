"""Dynamical traces, the truncated Fredholm determinant, and zeta functions.

The determinant d(z) = exp(-sum_m z^m/m tr_m) is handled through the Newton
recursion between power sums and polynomial coefficients, so traces ->
coefficients -> traces round-trips to machine precision.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import IllConditionedRoot, OrientationNotTrivial
from .maps import MapSystem, SplittingField
from .orbits import PeriodicPointSet, periodic_points

BACKWARD_ERROR_THRESHOLD = 1e-6
CLUSTER_RTOL = 1e-6
NEAR_BOUNDARY_FRACTION = 0.9


@dataclass(frozen=True)
class TraceSeries:
    traces: np.ndarray  # tr_m for m = 1..N
    order: int
    provenance: str

    def __post_init__(self):
        if not np.all(np.isfinite(self.traces)):
            raise ValueError("trace series has non-finite entries")


@dataclass(frozen=True)
class DeterminantPoly:
    coeffs: np.ndarray  # c_0..c_N of the truncated determinant
    validity_radius: float
    coarse_radius: float
    zeros: list = field(default_factory=list)


def dynamical_trace(sys: MapSystem, pts: PeriodicPointSet) -> float:
    """sum over T^m x = x of g^(m)(x) / |det(Id - DT^m(x))|."""
    dets = np.abs(np.linalg.det(np.eye(2) - pts.derivatives))
    return math.fsum(pts.weights / dets)


def trace_series(sys: MapSystem, N: int) -> TraceSeries:
    """tr_m for m = 1..N via the periodic-orbits module."""
    if N < 1:
        raise ValueError("N >= 1 required")
    traces = np.array([dynamical_trace(sys, periodic_points(sys, m)) for m in range(1, N + 1)])
    prov = f"{sys.name}|eps={sys.params.get('eps', 0.0)}|weight={sys.params.get('weight', 'one')}"
    return TraceSeries(traces=traces, order=N, provenance=prov)


def coeffs_from_power_sums(sums, sign: float) -> np.ndarray:
    """Coefficients of exp(sign * sum_m s_m z^m / m), truncated.

    sign = -1 gives the determinant recursion c_k = -(1/k) sum tr_j c_{k-j};
    sign = +1 the zeta recursion.
    """
    sums = np.asarray(sums, dtype=float)
    N = len(sums)
    c = np.zeros(N + 1)
    c[0] = 1.0
    for k in range(1, N + 1):
        acc = math.fsum(sums[j - 1] * c[k - j] for j in range(1, k + 1))
        c[k] = sign * acc / k
    return c


def traces_from_coeffs(coeffs) -> np.ndarray:
    """Inverse of coeffs_from_power_sums with sign = -1 (log-derivative)."""
    c = np.asarray(coeffs, dtype=float)
    N = len(c) - 1
    t = np.zeros(N)
    for k in range(1, N + 1):
        acc = math.fsum(t[j - 1] * c[k - j] for j in range(1, k))
        t[k - 1] = -k * c[k] - acc
    return t


def det_coeffs_from_traces(ts: TraceSeries, sys=None, p: float = 1.0, q: float = -1.0,
                           radius_info=None) -> DeterminantPoly:
    """Truncated determinant from a trace series; c_0 = 1.

    radius_info, when given, is a (validity_radius, coarse_radius) pair;
    otherwise it is computed from the bounds module when sys is provided.
    """
    coeffs = coeffs_from_power_sums(ts.traces, sign=-1.0)
    if radius_info is None:
        if sys is not None:
            vr, cr = validity_radius(sys, p, q)
        else:
            vr, cr = math.nan, math.nan
    else:
        vr, cr = radius_info
    return DeterminantPoly(coeffs=coeffs, validity_radius=vr, coarse_radius=cr)


def _eval_poly(coeffs, z):
    powers = z ** np.arange(len(coeffs))
    return np.sum(coeffs * powers), np.sum(np.abs(coeffs) * np.abs(powers))


def _cluster_roots(roots, rtol=CLUSTER_RTOL):
    """Greedy clustering at relative radius rtol; returns (center, count) list."""
    roots = sorted(roots, key=lambda z: (abs(z), z.real, z.imag))
    clusters = []
    for z in roots:
        for cl in clusters:
            c = np.mean(cl)
            if abs(z - c) <= rtol * max(1.0, abs(c)):
                cl.append(z)
                break
        else:
            clusters.append([z])
    return [(complex(np.mean(cl)), len(cl)) for cl in clusters]


def det_zeros(dp: DeterminantPoly, radius: float):
    """Roots of the truncation inside |z| < radius, via companion matrix.

    Each root carries the backward error |d(z)| / sum |c_k z^k|; roots with
    backward error above 1e-6 are flagged, not dropped.  Roots within 10% of
    the validity radius are flagged near-boundary.
    """
    if np.isfinite(dp.validity_radius) and radius > dp.validity_radius:
        warnings.warn(
            f"radius {radius} exceeds validity radius {dp.validity_radius:.4g}",
            stacklevel=2,
        )
    c = dp.coeffs
    # drop numerically-zero leading (high-order) coefficients: they only add
    # spurious roots near infinity
    scale = np.max(np.abs(c))
    deg = len(c) - 1
    while deg > 0 and abs(c[deg]) < 1e-13 * scale:
        deg -= 1
    if deg == 0:
        return []
    roots = np.roots(c[: deg + 1][::-1])
    out = []
    for center, mult in _cluster_roots([complex(r) for r in roots]):
        if abs(center) >= radius:
            continue
        val, denom = _eval_poly(c, center)
        backward = abs(val) / denom if denom > 0 else math.inf
        if backward > BACKWARD_ERROR_THRESHOLD:
            warnings.warn(
                f"root {center:.6g} has backward error {backward:.2e}",
                IllConditionedRoot,
                stacklevel=2,
            )
        near = (
            np.isfinite(dp.validity_radius)
            and abs(center) > NEAR_BOUNDARY_FRACTION * dp.validity_radius
        )
        out.append(
            {
                "zero": center,
                "multiplicity": mult,
                "backward_error": float(backward),
                "near_boundary": bool(near),
            }
        )
    out.sort(key=lambda r: (abs(r["zero"]), r["zero"].real, r["zero"].imag))
    return out


def periodic_sums(sys: MapSystem, N: int) -> np.ndarray:
    """Plain weighted periodic sums S_m = sum over Fix(T^m) of g^(m)."""
    return np.array([math.fsum(periodic_points(sys, m).weights) for m in range(1, N + 1)])


def zeta_direct(sys: MapSystem, N: int) -> np.ndarray:
    """Coefficients of the zeta truncation exp(+ sum z^m/m S_m)."""
    return coeffs_from_power_sums(periodic_sums(sys, N), sign=+1.0)


def _series_mul(a, b, N):
    out = np.zeros(N + 1)
    for k in range(N + 1):
        out[k] = math.fsum(a[j] * b[k - j] for j in range(max(0, k - len(b) + 1), min(k, len(a) - 1) + 1))
    return out


def _series_inv(a, N):
    # reciprocal of a power series with a[0] = 1
    inv = np.zeros(N + 1)
    inv[0] = 1.0 / a[0]
    for k in range(1, N + 1):
        inv[k] = -math.fsum(a[j] * inv[k - j] for j in range(1, min(k, len(a) - 1) + 1)) / a[0]
    return inv


def _orientation_signs(sys: MapSystem, split: SplittingField, pts: PeriodicPointSet):
    u = np.atleast_2d(split.unstable(pts.points))
    v = (pts.derivatives @ u[..., None])[..., 0]
    return np.sign(np.einsum("ij,ij->i", v, u))


def _orientation_check_raise(sys: MapSystem, split: SplittingField, pts: PeriodicPointSet):
    """Raise unless sign det(DT^m|E^u) = +1 at every periodic point."""
    signs = _orientation_signs(sys, split, pts)
    if np.any(signs < 0):
        raise OrientationNotTrivial(
            f"sign det(DT^{pts.period}|E^u) = -1 at a periodic point"
        )


def zeta_product(sys: MapSystem, N: int, split: SplittingField) -> np.ndarray:
    """Zeta truncation from the product of exterior-power determinants (d=2).

    Builds, for k = 0, 1, 2, the trace series with Lambda^k weights, forms
    the three determinant truncations, and combines them with exponents
    (-1)^(k + d_u + 1); with d_u = 1 this is d_0 * d_2 / d_1.
    """
    tr_k = np.zeros((3, N))
    for m in range(1, N + 1):
        pts = periodic_points(sys, m)
        _orientation_check_raise(sys, split, pts)
        dets = np.abs(np.linalg.det(np.eye(2) - pts.derivatives))
        lam0 = np.ones(len(pts))
        lam1 = np.trace(pts.derivatives, axis1=1, axis2=2)
        lam2 = np.linalg.det(pts.derivatives)
        for k, lam in enumerate((lam0, lam1, lam2)):
            tr_k[k, m - 1] = math.fsum(pts.weights * lam / dets)
    d0 = coeffs_from_power_sums(tr_k[0], sign=-1.0)
    d1 = coeffs_from_power_sums(tr_k[1], sign=-1.0)
    d2 = coeffs_from_power_sums(tr_k[2], sign=-1.0)
    num = _series_mul(d0, d2, N)
    return _series_mul(num, _series_inv(d1, N), N)


def validity_radius(sys: MapSystem, p: float, q: float, m_range=None, split=None):
    """(1/Q^{p,q}, 1/Q^{0,0}) from the variational pressure route."""
    from . import bounds  # deferred: bounds depends on maps/orbits only

    from .maps import splitting_power_iteration

    if split is None:
        split = splitting_power_iteration(sys)
    if m_range is None:
        m_range = range(4, 11)
    qpq = bounds.q_variational(sys, split, p, q, m_range)["estimate"]
    q00 = bounds.q_variational(sys, split, 0.0, 0.0, m_range)["estimate"]
    return 1.0 / qpq, 1.0 / q00


def determinant_report(sys: MapSystem, N: int, radius: float, p: float = 1.0,
                       q: float = -1.0) -> dict:
    """Traces, coefficients, zeros and radii, as one JSON-ready dict."""
    ts = trace_series(sys, N)
    dp = det_coeffs_from_traces(ts, sys=sys, p=p, q=q)
    zeros = det_zeros(dp, radius)
    return {
        "provenance": ts.provenance,
        "order": N,
        "traces": ts.traces.tolist(),
        "coeffs": dp.coeffs.tolist(),
        "validity_radius": dp.validity_radius,
        "coarse_radius": dp.coarse_radius,
        "radius": radius,
        "zeros": [
            {
                "re": z["zero"].real,
                "im": z["zero"].imag,
                "multiplicity": z["multiplicity"],
                "backward_error": z["backward_error"],
                "near_boundary": z["near_boundary"],
            }
            for z in zeros
        ],
    }
