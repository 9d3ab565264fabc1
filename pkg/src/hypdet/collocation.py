"""Fourier collocation of the transfer operator on torus maps.

The operator L u = g (u o T) is discretized on the modes k in [-N, N]^2 by
sampling g e_k(T x) on an oversampled grid and projecting back by FFT.  Two
equivalent build strategies exist: the direct per-column FFT of the sampled
symbol, and a factored path for maps given as (integer linear part) +
(smooth periodic part), which evaluates the same coefficients on a much
smaller grid.  Both are cross-checked against direct quadrature.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft
import scipy.sparse as sparse

from .errors import AliasingRisk, EigenSolverFailure
from .maps import MapSystem

TWO_PI = 2.0 * math.pi
DENSE_DIM_LIMIT = 4500
DENSE_EIG_LIMIT = 2600
SPARSE_DROP_TOL = 1e-13
MIN_GRID_FACTOR = 4


@dataclass(frozen=True)
class TransferMatrix:
    """Truncated collocation matrix over modes k in [-N, N]^2.

    matrix is dense (ndarray) for small truncations, scipy CSR above
    DENSE_DIM_LIMIT modes; entries below SPARSE_DROP_TOL of the global max
    are dropped in the sparse representation.
    """

    n_freq: int
    grid_factor: int
    matrix: object

    @property
    def dim(self) -> int:
        return (2 * self.n_freq + 1) ** 2

    def toarray(self) -> np.ndarray:
        if isinstance(self.matrix, np.ndarray):
            return self.matrix
        return self.matrix.toarray()

    def entry(self, kprime, k) -> complex:
        r = _mode_index(kprime, self.n_freq)
        c = _mode_index(k, self.n_freq)
        if isinstance(self.matrix, np.ndarray):
            return complex(self.matrix[r, c])
        return complex(self.matrix[r, c])


def _mode_index(k, N) -> int:
    k1, k2 = int(k[0]), int(k[1])
    if abs(k1) > N or abs(k2) > N:
        raise IndexError(f"mode {k} outside [-{N},{N}]^2")
    return (k1 + N) * (2 * N + 1) + (k2 + N)


def modes(N) -> np.ndarray:
    r = np.arange(-N, N + 1)
    return np.stack(np.meshgrid(r, r, indexing="ij"), axis=-1).reshape(-1, 2)


def _grid(G):
    t = np.arange(G) / G
    return np.meshgrid(t, t, indexing="ij")


def _fft_block_indices(N, G):
    # rows/cols of the [-N, N] block in fft2 output
    f = np.arange(-N, N + 1) % G
    return f


def build_transfer_matrix(sys: MapSystem, n_freq: int, grid_factor: int = 4,
                          method: str = "auto") -> TransferMatrix:
    """Collocation matrix of u -> g (u o T) on modes [-N, N]^2.

    method "fft" samples g e_k(Tx) on the (grid_factor (2N+1))^2 grid and
    FFT-projects each column; "factored" uses the homology decomposition
    T = A x + s(x) to evaluate the identical coefficients on a small grid
    sized by the Bessel tail of exp(2 pi i k.s); "auto" picks factored for
    large truncations when the map provides the decomposition.
    """
    if sys.domain != "torus":
        raise ValueError("collocation requires a torus map")
    if grid_factor < MIN_GRID_FACTOR:
        warnings.warn(
            f"grid_factor {grid_factor} below anti-aliasing minimum {MIN_GRID_FACTOR}",
            AliasingRisk,
        )
    dim = (2 * n_freq + 1) ** 2
    can_factor = sys.linear_part is not None and sys.periodic_part is not None
    if method == "auto":
        method = "factored" if (can_factor and dim > 2000) else "fft"
    if method == "factored" and not can_factor:
        raise ValueError("factored build needs linear_part and periodic_part")
    if method == "fft":
        M = _build_fft(sys, n_freq, grid_factor)
    elif method == "factored":
        M = _build_factored(sys, n_freq)
    else:
        raise ValueError(f"unknown method {method!r}")
    return TransferMatrix(n_freq=n_freq, grid_factor=grid_factor, matrix=M)


def _build_fft(sys, N, grid_factor):
    G = grid_factor * (2 * N + 1)
    X1, X2 = _grid(G)
    pts = np.stack([X1.ravel(), X2.ravel()], axis=-1)
    T = sys.forward(pts)
    W = np.asarray(sys.weight(pts)).reshape(G, G).astype(complex)
    E1 = np.exp(TWO_PI * 1j * T[:, 0]).reshape(G, G)
    E2 = np.exp(TWO_PI * 1j * T[:, 1]).reshape(G, G)
    dim = (2 * N + 1) ** 2
    idx = _fft_block_indices(N, G)
    dense = dim <= DENSE_DIM_LIMIT
    if dense:
        M = np.zeros((dim, dim), dtype=complex)
    else:
        rows, cols, vals = [], [], []
    E1_pow = W * E1 ** (-N)
    for k1 in range(-N, N + 1):
        cur = E1_pow * E2 ** (-N)
        for k2 in range(-N, N + 1):
            coeffs = sfft.fft2(cur)[np.ix_(idx, idx)].ravel() / (G * G)
            col = ( k1 + N) * (2 * N + 1) + (k2 + N)
            if dense:
                M[:, col] = coeffs
            else:
                keep = np.abs(coeffs) > SPARSE_DROP_TOL
                rows.append(np.flatnonzero(keep))
                cols.append(np.full(keep.sum(), col))
                vals.append(coeffs[keep])
            cur = cur * E2
        E1_pow = E1_pow * E1
    if dense:
        return M
    return sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(dim, dim), dtype=complex,
    )


def _bessel_cutoff(z: float) -> int:
    # J_n(z) < 1e-15 beyond roughly z + 8 z^{1/3} + 12
    return int(math.ceil(z + 8.0 * z ** (1.0 / 3.0) + 12.0))


def _build_factored(sys, N):
    A = np.asarray(sys.linear_part, dtype=np.int64)
    # bound the phase 2 pi |k . s(x)| to size the small grid
    probe = _grid(64)
    ppts = np.stack([probe[0].ravel(), probe[1].ravel()], axis=-1)
    s_vals = np.atleast_2d(sys.periodic_part(ppts))
    s_sup = float(np.max(np.abs(s_vals), axis=0).sum())
    z_max = TWO_PI * N * s_sup
    d_cut = _bessel_cutoff(z_max)
    Gs = sfft.next_fast_len(max(4 * d_cut + 4, 32), real=False)
    X1, X2 = _grid(Gs)
    pts = np.stack([X1.ravel(), X2.ravel()], axis=-1)
    S = np.atleast_2d(sys.periodic_part(pts))
    W = np.asarray(sys.weight(pts)).reshape(Gs, Gs).astype(complex)
    E1 = np.exp(TWO_PI * 1j * S[:, 0]).reshape(Gs, Gs)
    E2 = np.exp(TWO_PI * 1j * S[:, 1]).reshape(Gs, Gs)
    dvals = np.concatenate([np.arange(0, Gs // 2), np.arange(-Gs // 2, 0)])
    D1, D2 = np.meshgrid(dvals, dvals, indexing="ij")
    D1 = D1.ravel()
    D2 = D2.ravel()
    dim = (2 * N + 1) ** 2
    side = 2 * N + 1
    rows_all, cols_all, vals_all = [], [], []
    E1_pow = W * E1 ** (-N)
    for k1 in range(-N, N + 1):
        cur = E1_pow * E2 ** (-N)
        for k2 in range(-N, N + 1):
            coeffs = (sfft.fft2(cur) / (Gs * Gs)).ravel()
            keep = np.abs(coeffs) > SPARSE_DROP_TOL
            if np.any(keep):
                kp1 = A[0, 0] * k1 + A[1, 0] * k2 + D1[keep]
                kp2 = A[0, 1] * k1 + A[1, 1] * k2 + D2[keep]
                # k' = A^tr k + d, kept only inside the truncation
                inside = (np.abs(kp1) <= N) & (np.abs(kp2) <= N)
                if np.any(inside):
                    r = (kp1[inside] + N) * side + (kp2[inside] + N)
                    c = (k1 + N) * side + (k2 + N)
                    rows_all.append(r)
                    cols_all.append(np.full(r.size, c))
                    vals_all.append(coeffs[keep][inside])
            cur = cur * E2
        E1_pow = E1_pow * E1
    M = sparse.csr_matrix(
        (np.concatenate(vals_all), (np.concatenate(rows_all), np.concatenate(cols_all))),
        shape=(dim, dim), dtype=complex,
    )
    if dim <= DENSE_DIM_LIMIT:
        return M.toarray()
    return M


def direct_entry(sys: MapSystem, kprime, k, n_freq: int, grid_factor: int = 4,
                 refine: int = 2) -> complex:
    """Independent quadrature of the (k', k) entry on a refined grid.

    Used by the spot-check invariant: trapezoid sum of g e_k(Tx) e_{-k'}(x)
    on a refine-times finer grid than the build grid.
    """
    G = refine * grid_factor * (2 * n_freq + 1)
    X1, X2 = _grid(G)
    pts = np.stack([X1.ravel(), X2.ravel()], axis=-1)
    T = sys.forward(pts)
    w = np.asarray(sys.weight(pts))
    phase = TWO_PI * (k[0] * T[:, 0] + k[1] * T[:, 1]
                      - kprime[0] * pts[:, 0] - kprime[1] * pts[:, 1])
    return complex(np.sum(w * np.exp(1j * phase)) / (G * G))


def spot_check(sys: MapSystem, tm: TransferMatrix, n_entries: int = 10,
               seed: int = 0, tol: float = 1e-10) -> float:
    """Compare random matrix entries against direct quadrature; max |diff|."""
    rng = np.random.default_rng(seed)
    N = tm.n_freq
    worst = 0.0
    for _ in range(n_entries):
        k = rng.integers(-N, N + 1, size=2)
        kp = rng.integers(-N, N + 1, size=2)
        a = tm.entry(kp, k)
        b = direct_entry(sys, kp, k, N, tm.grid_factor)
        worst = max(worst, abs(a - b))
    if worst > tol:
        raise AssertionError(f"spot check failed: max entry error {worst:.3e}")
    return worst


# ---------------------------------------------------------------------------
# eigenvalues
# ---------------------------------------------------------------------------


def eigen_resonances(tm: TransferMatrix, top: int | None = None, seed: int = 0,
                     subspace_iters: int = 24):
    """Eigenvalues sorted by modulus, with residual estimates.

    top = None runs the dense nonsymmetric eigensolve and returns the whole
    spectrum (allowed up to DENSE_EIG_LIMIT modes).  For larger truncations
    pass top = K: a deterministic seeded subspace iteration returns the K
    largest-modulus Ritz values; accuracy is certified by the residuals and
    by doubled-resolution filtering downstream.
    """
    dim = tm.dim
    if top is None:
        if dim > DENSE_EIG_LIMIT:
            raise EigenSolverFailure(
                f"dense eigensolve refused at dim {dim}; pass top=K"
            )
        M = tm.toarray()
        try:
            w, V = np.linalg.eig(M)
        except np.linalg.LinAlgError as exc:  # pragma: no cover
            raise EigenSolverFailure(str(exc)) from exc
        R = M @ V - V * w[None, :]
        res = np.linalg.norm(R, axis=0) / np.maximum(np.linalg.norm(V, axis=0), 1e-300)
        order = np.argsort(-np.abs(w))
        return w[order], res[order]

    M = tm.matrix
    rng = np.random.default_rng(seed)
    b = min(dim, top + 16)
    Q = rng.standard_normal((dim, b)) + 1j * rng.standard_normal((dim, b))
    Q, _ = np.linalg.qr(Q)
    for _ in range(subspace_iters):
        Z = M @ Q
        Q, _ = np.linalg.qr(Z)
    H = Q.conj().T @ (M @ Q)
    w, S = np.linalg.eig(H)
    V = Q @ S
    R = M @ V - V * w[None, :]
    res = np.linalg.norm(R, axis=0) / np.maximum(np.linalg.norm(V, axis=0), 1e-300)
    order = np.argsort(-np.abs(w))[:top]
    return w[order], res[order]


def stability_filter(eigs_n, eigs_2n, tol: float = 1e-6):
    """Keep eigenvalues reproduced at doubled resolution within relative tol.

    Greedy nearest-neighbor matching; each doubled-resolution eigenvalue is
    used at most once.
    """
    eigs_n = np.asarray(eigs_n)
    pool = list(np.asarray(eigs_2n))
    stable = []
    for mu in sorted(eigs_n, key=lambda z: -abs(z)):
        if not pool:
            break
        dists = [abs(mu - nu) for nu in pool]
        j = int(np.argmin(dists))
        if dists[j] <= tol * max(abs(mu), abs(pool[j])) or dists[j] == 0.0:
            stable.append(mu)
            pool.pop(j)
    return np.array(stable)


def match_resonances_to_zeros(stable_eigs, zeros, radius: float, tol: float = 1e-4,
                              backward_tol: float = 1e-6) -> dict:
    """Bijective matching of determinant zeros to stable eigenvalues.

    Every zero z with |z| < radius (and backward error below backward_tol)
    needs a stable eigenvalue mu with |mu - 1/z| <= tol, and every stable
    eigenvalue with |1/mu| < radius needs a zero.  Multiplicities are
    compared through cluster sizes.
    """
    zs = [z for z in zeros
          if abs(z["zero"]) < radius and z["backward_error"] <= backward_tol]
    eig_clusters = _cluster_eigs(
        [mu for mu in stable_eigs if abs(mu) > 1e-300 and 1.0 / abs(mu) < radius], tol
    )
    pairs = []
    unmatched_zeros = []
    used = set()
    for z in zs:
        target = 1.0 / z["zero"]
        best, best_d = None, math.inf
        for i, (mu, count) in enumerate(eig_clusters):
            if i in used:
                continue
            d = abs(mu - target)
            if d < best_d:
                best, best_d = i, d
        if best is not None and best_d <= tol:
            mu, count = eig_clusters[best]
            used.add(best)
            pairs.append({
                "zero": z["zero"],
                "inverse": target,
                "eigenvalue": mu,
                "gap": best_d,
                "multiplicity_zero": z["multiplicity"],
                "multiplicity_eig": count,
            })
        else:
            unmatched_zeros.append(z)
    unmatched_eigs = [eig_clusters[i][0] for i in range(len(eig_clusters)) if i not in used]
    return {
        "pairs": pairs,
        "unmatched_zeros": unmatched_zeros,
        "unmatched_eigenvalues": unmatched_eigs,
        "pass": not unmatched_zeros and not unmatched_eigs,
        "radius": radius,
        "tol": tol,
    }


def _cluster_eigs(eigs, tol):
    clusters = []
    for mu in sorted(eigs, key=lambda z: (-abs(z), z.real, z.imag)):
        for cl in clusters:
            if abs(mu - np.mean(cl)) <= tol:
                cl.append(mu)
                break
        else:
            clusters.append([mu])
    return [(complex(np.mean(cl)), len(cl)) for cl in clusters]
