"""Spectral-radius bound estimators and their cross checks.

Two independent routes to the same growth rate are implemented: a Monte
Carlo integral route (rho) and a periodic-orbit pressure route (the
variational Q).  Cover and partition-of-unity routes give the starred
expressions; all m-th-root limits are extrapolated by log-linear least
squares over the largest four m values, with the residual always reported.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    BudgetExceeded,
    CrossCheckFailed,
    EmptyWitness,
    InequalityViolated,
)
from .maps import (
    MapSystem,
    SplittingField,
    hyperbolicity_exponents,
    smooth_bump,
    weight_product,
)
from .orbits import periodic_points

EXTRAPOLATION_POINTS = 4
POOR_FIT_RESIDUAL = 0.1
DEFAULT_CROSS_TOL = 0.05
PRUNE_SUP = 1e-14


def _sample_domain(sys: MapSystem, n: int, rng) -> np.ndarray:
    if sys.domain == "torus":
        return rng.uniform(0.0, 1.0, size=(n, 2))
    (x0, x1), (y0, y1) = sys.box
    out = np.empty((n, 2))
    out[:, 0] = rng.uniform(x0, x1, size=n)
    out[:, 1] = rng.uniform(y0, y1, size=n)
    return out


def _deterministic_grid(sys: MapSystem, n: int) -> np.ndarray:
    side = max(2, int(math.ceil(math.sqrt(n))))
    t = (np.arange(side) + 0.5) / side
    G = np.stack(np.meshgrid(t, t, indexing="ij"), axis=-1).reshape(-1, 2)
    if sys.domain == "torus":
        return G
    (x0, x1), (y0, y1) = sys.box
    G[:, 0] = x0 + (x1 - x0) * G[:, 0]
    G[:, 1] = y0 + (y1 - y0) * G[:, 1]
    return G


def _integrand(sys, split, p, q, m, X, det_unstable=False):
    """|g^(m)| * lambda^{(p,q,m)} at X, optionally over |det DT^m|_{E^u}|."""
    lam, nu = hyperbolicity_exponents(sys, split, X, m)
    lam_pq = np.maximum(lam**p, nu**q)
    g_m = np.abs(weight_product(sys, X, m))
    val = g_m * lam_pq
    if det_unstable:
        val = val / nu  # d_u = 1: |det DT^m|_{E^u}| = nu exactly
    return val


def rho_pq_m(sys: MapSystem, split: SplittingField, p: float, q: float, m: int,
             n_samples: int = 4096, seed: int = 0):
    """Monte Carlo estimate of int |g^(m)| lambda^{(p,q,m)} dx, with std error."""
    if not (q <= 0.0 <= p):
        raise ValueError("q <= 0 <= p required")
    rng = np.random.default_rng(seed)
    X = _sample_domain(sys, n_samples, rng)
    vals = _integrand(sys, split, p, q, m, X)
    mean = float(np.mean(vals))
    se = float(np.std(vals) / math.sqrt(n_samples))
    return mean, se


def rho_pq_estimate(per_m: dict) -> dict:
    """Growth rate from per-m values: exp of the log-linear slope.

    per_m maps m -> value.  Residual is the RMS misfit of the log-linear
    model; a residual above 0.1 sets the poor_fit flag.
    """
    if len(per_m) < 4:
        raise ValueError("need at least 4 values of m")
    ms = np.array(sorted(per_m), dtype=float)
    logs = np.log([per_m[int(m)] for m in ms])
    slope, intercept = np.polyfit(ms, logs, 1)
    resid = float(np.sqrt(np.mean((slope * ms + intercept - logs) ** 2)))
    poor = resid > POOR_FIT_RESIDUAL
    if poor:
        warnings.warn(f"poor log-linear fit, residual {resid:.3f}", stacklevel=2)
    return {
        "estimate": float(np.exp(slope)),
        "slope": float(slope),
        "residual": resid,
        "poor_fit": poor,
    }


def R_pqt_m(sys: MapSystem, split: SplittingField, p: float, q: float, t: float,
            m: int, n_samples: int = 2048, seed: int = 0) -> float:
    """Sampled sup of |det DT^m|^{-1/t} |g^(m)| lambda^{(p,q,m)} (t = inf drops it)."""
    rng = np.random.default_rng(seed)
    X = np.vstack([_deterministic_grid(sys, n_samples), _sample_domain(sys, n_samples, rng)])
    from .maps import jacobian_cocycle

    vals = _integrand(sys, split, p, q, m, X)
    if np.isfinite(t):
        if t < 1.0:
            raise ValueError("t in [1, inf] required")
        dets = np.abs(np.linalg.det(jacobian_cocycle(sys, X, m)))
        vals = vals * dets ** (-1.0 / t)
    return float(np.max(vals))


def appendixB_check(sys: MapSystem, split: SplittingField, p: float, q: float,
                    m_range=range(1, 7), t_grid=(1.0, 2.0, math.inf),
                    n_samples: int = 4096, seed: int = 0) -> dict:
    """rho^{p,q}(m) <= min_t R^{p,q,t}(m) + 3 sigma_MC for each m.

    Valid as a finite-m comparison on volume-one domains.  Raises
    InequalityViolated with the offending row on failure.
    """
    rows = []
    ok = True
    for m in m_range:
        rho, se = rho_pq_m(sys, split, p, q, m, n_samples=n_samples, seed=seed + m)
        Rmin = min(R_pqt_m(sys, split, p, q, t, m, seed=seed + m) for t in t_grid)
        passed = rho <= Rmin + 3.0 * se + 1e-12
        rows.append({"m": m, "rho": rho, "stderr": se, "R_min": Rmin, "pass": passed})
        ok = ok and passed
    report = {"p": p, "q": q, "t_grid": [float(t) for t in t_grid], "rows": rows, "pass": ok}
    if not ok:
        raise InequalityViolated("rho(m) > min_t R(m) + 3 sigma", data=report)
    return report


# ---------------------------------------------------------------------------
# cover route (Q_*)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CoverSpec:
    """Finite cover of the torus by boxes {center, half-width radius}."""

    centers: np.ndarray  # (k, 2)
    radius: float
    generating_depth: int = 0

    def __post_init__(self):
        grid = _deterministic_grid_torus(64)
        d = _torus_box_dist(grid, self.centers)
        if np.any(d.min(axis=1) > self.radius + 1e-12):
            raise ValueError("cover does not cover the torus (grid check)")

    def member_matrix(self, X) -> np.ndarray:
        """Boolean (n_elements, n_points) membership table."""
        return _torus_box_dist(X, self.centers).T <= self.radius + 1e-12


def _deterministic_grid_torus(side):
    t = (np.arange(side) + 0.5) / side
    return np.stack(np.meshgrid(t, t, indexing="ij"), axis=-1).reshape(-1, 2)


def _torus_box_dist(X, centers):
    """(n_points, n_elements) Chebyshev torus distance to each center."""
    d = X[:, None, :] - centers[None, :, :]
    d = np.abs(d - np.round(d))
    return d.max(axis=2)


def make_grid_cover(k: int, radius_factor: float = 1.0, generating_depth: int = 8) -> CoverSpec:
    """k x k box cover of the torus; radius_factor 1 tiles exactly."""
    t = (np.arange(k) + 0.5) / k
    centers = np.stack(np.meshgrid(t, t, indexing="ij"), axis=-1).reshape(-1, 2)
    return CoverSpec(centers=centers, radius=0.5 / k * radius_factor,
                     generating_depth=generating_depth)


def generating_diameter(sys: MapSystem, cover: CoverSpec, depth: int,
                        n_samples: int = 4096, seed: int = 0) -> float:
    """Max diameter of sampled two-sided itinerary cells at the given depth.

    A shrinking value as depth grows witnesses that the cover is generating.
    """
    rng = np.random.default_rng(seed)
    X = _sample_domain(sys, n_samples, rng)
    codes = np.zeros((X.shape[0], 2 * depth + 1), dtype=np.int32)
    Yf = X.copy()
    Yb = X.copy()
    codes[:, 0] = np.argmax(cover.member_matrix(X), axis=0)
    for k in range(1, depth + 1):
        Yf = sys.forward(Yf)
        Yb = sys.inverse(Yb)
        codes[:, 2 * k - 1] = np.argmax(cover.member_matrix(Yf), axis=0)
        codes[:, 2 * k] = np.argmax(cover.member_matrix(Yb), axis=0)
    _, inv = np.unique(codes, axis=0, return_inverse=True)
    diam = 0.0
    for c in range(inv.max() + 1):
        P = X[inv == c]
        if len(P) < 2:
            continue
        d = P[:, None, :] - P[None, :, :]
        d = np.abs(d - np.round(d))
        diam = max(diam, float(np.sqrt((d**2).sum(axis=2)).max()))
    return diam


def _element_witnesses(cover: CoverSpec, per_element: int) -> np.ndarray:
    """Deterministic low-discrepancy grid of witnesses inside each element."""
    side = max(2, int(math.ceil(math.sqrt(per_element))))
    t = (np.arange(side) + 0.5) / side * 2.0 - 1.0  # (-1, 1)
    local = np.stack(np.meshgrid(t, t, indexing="ij"), axis=-1).reshape(-1, 2)
    # golden-ratio shift decorrelates witness grids from the element lattice
    local = (local + np.array([0.6180339887498949, 0.2548776662466927])) % 2.0 - 1.0
    pts = (cover.centers[:, None, :] + local[None, :, :] * cover.radius) % 1.0
    return pts.reshape(-1, 2)


def q_star_cover(sys: MapSystem, split: SplittingField, p: float, q: float,
                 cover: CoverSpec, m: int, n_samples: int = 64, seed: int = 0,
                 budget: int = 200000) -> dict:
    """Subcover-minimized itinerary sum Q_*(T, g, W, m), greedy approximation.

    Enumerates itineraries with nonempty witnessed intersections, evaluates
    the sup of |g^(m)| lambda^{(p,q,m)} / |det DT^m|_{E^u}| on each, then
    greedily extracts an approximate minimal subcover of the witness cloud.
    Returns the greedy value (upper bound for the true min) and the full
    no-subcover sum as a bracket.
    """
    if not (q <= 0.0 <= p):
        raise ValueError("q <= 0 <= p required")
    W = _element_witnesses(cover, n_samples)
    n_pts = W.shape[0]
    # membership of the k-step images, k = 0..m-1
    members = []
    Y = W.copy()
    for _ in range(m):
        members.append(cover.member_matrix(Y))
        Y = sys.forward(Y)
    H = _integrand(sys, split, p, q, m, W, det_unstable=True)

    n_elem = cover.centers.shape[0]
    # tree expansion over itineraries, pruned by witness emptiness
    nodes = [((e,), np.flatnonzero(members[0][e])) for e in range(n_elem)]
    nodes = [nd for nd in nodes if nd[1].size]
    for k in range(1, m):
        nxt = []
        for code, idx in nodes:
            mk = members[k][:, idx]
            for e in range(n_elem):
                sub = idx[mk[e]]
                if sub.size:
                    nxt.append((code + (e,), sub))
            if len(nxt) > budget:
                raise BudgetExceeded(f"itinerary count exceeded {budget} at depth {k}")
        nodes = nxt
    thin = sum(1 for _, idx in nodes if idx.size < 3)
    if thin > 0:
        warnings.warn(
            f"{thin}/{len(nodes)} itineraries have fewer than 3 witnesses",
            EmptyWitness,
        )

    values = np.array([H[idx].max() for _, idx in nodes])
    full_sum = float(math.fsum(values))

    # greedy weighted set cover of the witness cloud
    order = sorted(range(len(nodes)), key=lambda i: nodes[i][0])
    covered = np.zeros(n_pts, dtype=bool)
    greedy_sum = 0.0
    chosen = 0
    remaining = set(order)
    while covered.sum() < n_pts and remaining:
        best, best_score, best_new = None, math.inf, 0
        for i in remaining:
            new = int(np.count_nonzero(~covered[nodes[i][1]]))
            if new == 0:
                continue
            score = values[i] / new
            if score < best_score - 1e-15:
                best, best_score, best_new = i, score, new
        if best is None:
            break
        covered[nodes[best][1]] = True
        greedy_sum += float(values[best])
        chosen += 1
        remaining.discard(best)
    return {
        "m": m,
        "greedy": greedy_sum,
        "full_sum": full_sum,
        "n_itineraries": len(nodes),
        "n_chosen": chosen,
        "n_witnesses": n_pts,
    }


# ---------------------------------------------------------------------------
# partition-of-unity route (rho_*)
# ---------------------------------------------------------------------------


def make_torus_partition(k: int, width_factor: float = 0.75):
    """k^2 smooth bumps on the torus summing to 1 exactly (normalized)."""
    centers = (np.arange(k) + 0.5) / k
    w = width_factor / k

    def bump_1d(t, c):
        d = t - c
        d = d - np.round(d)
        return smooth_bump(d / w)

    def total_1d(t):
        return sum(bump_1d(t, c) for c in centers)

    phis = []
    for ci in centers:
        for cj in centers:
            def phi(x, ci=ci, cj=cj):
                x = np.atleast_2d(np.asarray(x, dtype=float))
                num = bump_1d(x[:, 0], ci) * bump_1d(x[:, 1], cj)
                den = total_1d(x[:, 0]) * total_1d(x[:, 1])
                return num / den
            phis.append(phi)
    return phis


def rho_star_partition(sys: MapSystem, split: SplittingField, p: float, q: float,
                       phis, m: int, n_grid: int = 48, budget: int = 200000) -> dict:
    """Partition-of-unity sum rho_*(T, g, Phi, m) with sampled sup norms.

    Products along itineraries are pruned once their sampled sup drops below
    1e-14 (phi <= 1, so pruned branches cannot recover).
    """
    if not (q <= 0.0 <= p):
        raise ValueError("q <= 0 <= p required")
    X = _deterministic_grid_torus(n_grid)
    total = sum(np.asarray(phi(X)) for phi in phis)
    if np.max(np.abs(total - 1.0)) > 1e-10:
        raise ValueError("phis do not sum to 1 on the check grid")
    tables = []
    Y = X.copy()
    for _ in range(m):
        tables.append(np.stack([np.asarray(phi(Y)) for phi in phis]))
        Y = sys.forward(Y)
    F = _integrand(sys, split, p, q, m, X, det_unstable=True)

    n_phi = len(phis)
    nodes = []
    for e in range(n_phi):
        vals = tables[0][e]
        idx = np.flatnonzero(vals >= PRUNE_SUP)
        if idx.size:
            nodes.append((idx, vals[idx]))
    for k in range(1, m):
        nxt = []
        for idx, vals in nodes:
            tk = tables[k][:, idx]
            for e in range(n_phi):
                v = vals * tk[e]
                keep = v >= PRUNE_SUP
                if np.any(v[keep] >= PRUNE_SUP):
                    nxt.append((idx[keep], v[keep]))
            if len(nxt) > budget:
                raise BudgetExceeded(f"partition itineraries exceeded {budget}")
        nodes = nxt
    value = math.fsum(float(np.max(vals * F[idx])) for idx, vals in nodes)
    return {"m": m, "value": value, "n_terms": len(nodes)}


# ---------------------------------------------------------------------------
# pressure and variational routes
# ---------------------------------------------------------------------------


def pressure_periodic(sys: MapSystem, pts_by_m: dict, phi) -> dict:
    """P_m = (1/m) log sum_{T^m x = x} exp(S_m phi(x)); -inf marker if empty."""
    out = {}
    for m, pts in sorted(pts_by_m.items()):
        if len(pts) == 0:
            out[m] = -math.inf
            continue
        S = np.zeros(len(pts))
        Y = pts.points.copy()
        for _ in range(m):
            S += np.asarray(phi(Y))
            Y = sys.forward(Y)
        out[m] = float(np.log(math.fsum(np.exp(S))) / m)
    return out


def _tail_fit(ms, log_sums):
    """Log-linear slope over the largest EXTRAPOLATION_POINTS m values."""
    ms = np.asarray(ms, dtype=float)
    log_sums = np.asarray(log_sums, dtype=float)
    k = min(EXTRAPOLATION_POINTS, len(ms))
    slope, intercept = np.polyfit(ms[-k:], log_sums[-k:], 1)
    resid = float(np.sqrt(np.mean((slope * ms[-k:] + intercept - log_sums[-k:]) ** 2)))
    return float(slope), resid


def q_variational(sys: MapSystem, split: SplittingField, p: float, q: float,
                  m_range=range(4, 11), weight_floor_n: int = 100) -> dict:
    """Pressure-route estimate of Q^{p,q} from periodic sums of the
    potential |g^(m)| lambda^{(p,q,m)} / |det DT^m|_{E^u}|.

    If the weight vanishes somewhere on the sampled orbits the positive
    floor sqrt(g^2 + 1/n^2) is substituted and the floor level reported.
    """
    if not (q <= 0.0 <= p):
        raise ValueError("q <= 0 <= p required")
    ms, sums = [], []
    floor_used = None
    for m in m_range:
        pts = periodic_points(sys, m)
        lam, nu = hyperbolicity_exponents(sys, split, pts.points, m)
        lam_pq = np.maximum(lam**p, nu**q)
        g_m = np.abs(pts.weights)
        if np.min(g_m) < 1e-12:
            from .maps import weight_floor

            floor_used = weight_floor_n
            g_n = weight_floor(sys.weight, weight_floor_n)
            g_m = weight_product(sys.with_weight(g_n, tag=f"floor{weight_floor_n}"),
                                 pts.points, m)
        S = math.fsum(g_m * lam_pq / nu)
        ms.append(m)
        sums.append(math.log(S))
    slope, resid = _tail_fit(ms, sums)
    return {
        "per_m": [{"m": m, "log_sum": s, "pressure": s / m} for m, s in zip(ms, sums)],
        "estimate": float(np.exp(slope)),
        "slope": slope,
        "residual": resid,
        "weight_floor_n": floor_used,
    }


def compare_routes(rho_report: dict, q_report: dict, tol_cross: float = DEFAULT_CROSS_TOL) -> dict:
    gap = abs(math.log(rho_report["estimate"]) - math.log(q_report["estimate"]))
    report = {
        "rho_estimate": rho_report["estimate"],
        "q_estimate": q_report["estimate"],
        "log_gap": gap,
        "tol": tol_cross,
        "pass": gap <= tol_cross,
        "rho_route": rho_report,
        "q_route": q_report,
    }
    if gap > tol_cross:
        raise CrossCheckFailed(f"log gap {gap:.4f} exceeds {tol_cross}", data=report)
    return report


def kitaev_crosscheck(sys: MapSystem, split: SplittingField, p: float, q: float,
                      m_range=range(4, 11), n_samples: int = 4096, seed: int = 0,
                      tol_cross: float = DEFAULT_CROSS_TOL) -> dict:
    """Assert the integral route and the variational route agree in log scale."""
    per_m = {}
    errs = {}
    for m in m_range:
        val, se = rho_pq_m(sys, split, p, q, m, n_samples=n_samples, seed=seed + m)
        per_m[m] = val
        errs[m] = se
    rho_report = rho_pq_estimate(per_m)
    rho_report["per_m"] = {int(k): v for k, v in per_m.items()}
    rho_report["stderr"] = {int(k): v for k, v in errs.items()}
    q_report = q_variational(sys, split, p, q, m_range)
    return compare_routes(rho_report, q_report, tol_cross)
