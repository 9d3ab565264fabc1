"""Band-to-band blocks of the transfer operator, their masks and traces.

The block S^{l,tau}_{n,sigma} u = psi'_{n,sigma}(D) [G (u o T)] psi~_{l,tau}(D)
is realized two ways: as an FFT-multiplier/compose/FFT-multiplier action on
grid functions, and as a dense matrix compressed to a decimated set of
frequency-lattice modes per band (plane waves are multiplier eigenfunctions,
so those entries are direct quadratures of the operator).  Flat traces use a
separate shared frequency-lattice quadrature so partial sums telescope
exactly against the chi_{n0} kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft
from scipy.ndimage import map_coordinates

from ..errors import EmptyConstraintSet, SingularResolvent
from ..maps import MapSystem, Polarization
from .partition import (
    BoxGrid,
    chi_n,
    dyadic_partition_eval,
    psi_tilde_eval,
)

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# h exponents and the hook relation
# ---------------------------------------------------------------------------


def _weight_support_points(sys: MapSystem, weight, n_side: int = 24):
    (x0, x1), (y0, y1) = sys.box
    t1 = np.linspace(x0, x1, n_side)
    t2 = np.linspace(y0, y1, n_side)
    X = np.stack(np.meshgrid(t1, t2, indexing="ij"), axis=-1).reshape(-1, 2)
    w = np.asarray(weight(X))
    return X[w > 1e-12]


def h_exponents(sys: MapSystem, weight, theta: Polarization, theta_prime: Polarization,
                sphere_samples: int = 720) -> tuple:
    """(h_max_plus, h_min_minus) from the constrained sup/inf over covectors.

    h_max_plus = [log2 sup {|DT^tr xi| : x in supp G, |xi| = 1,
    DT^tr xi not in C'_-}] + 6, and h_min_minus the matching inf over
    xi not in C_+, with offset -6.
    """
    pts = _weight_support_points(sys, weight)
    if pts.shape[0] == 0:
        raise EmptyConstraintSet("weight support contains no sample points")
    ang = np.linspace(0.0, math.pi, sphere_samples, endpoint=False)
    xi = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    J = sys.jacobian(pts)  # (k,2,2)
    img = np.einsum("kji,mj->kmi", J, xi)  # DT^tr xi
    norms = np.linalg.norm(img, axis=-1)

    out_minus = ~theta_prime.in_cone_minus(img.reshape(-1, 2)).reshape(norms.shape)
    if not np.any(out_minus):
        raise EmptyConstraintSet("no covector image escapes C'_-")
    h_plus = int(math.floor(math.log2(np.max(norms[out_minus])))) + 6

    out_plus = ~theta.in_cone_plus(xi)
    if not np.any(out_plus):
        raise EmptyConstraintSet("no covector escapes C_+")
    h_minus = int(math.floor(math.log2(np.min(norms[:, out_plus])))) - 6
    return h_plus, h_minus


def hook(lt: tuple, ns: tuple, h_plus: int, h_minus: int) -> bool:
    """The linkage relation (l,tau) -> (n,sigma); three cases, else false."""
    ell, tau = lt
    n, sigma = ns
    if tau == "+" and sigma == "+":
        return n <= ell + h_plus
    if tau == "-" and sigma == "-":
        return ell + h_minus <= n
    if tau == "+" and sigma == "-":
        return n >= h_minus or ell >= -h_plus
    return False


def band_indices(n_max: int):
    return [(n, s) for n in range(n_max + 1) for s in "+-"]


def hook_mask(n_max: int, h_plus: int, h_minus: int) -> np.ndarray:
    """Boolean (out, in) table of the hook relation over bands n <= n_max."""
    idx = band_indices(n_max)
    mask = np.zeros((len(idx), len(idx)), dtype=bool)
    for j, lt in enumerate(idx):
        for i, ns in enumerate(idx):
            mask[i, j] = hook(lt, ns, h_plus, h_minus)
    return mask


def triangularity_product_check(masks, n_max: int) -> bool:
    """Diagonal of the product of linked-block masks is empty (mask algebra).

    masks: one boolean (out, in) block mask per factor, e.g. from hook_mask
    of iterates with h_plus < 0 < h_minus.  No floating point involved.
    """
    prod = None
    for m in masks:
        prod = m.copy() if prod is None else (prod.astype(int) @ m.astype(int)) > 0
    return not bool(np.any(np.diag(prod)))


# ---------------------------------------------------------------------------
# block operator
# ---------------------------------------------------------------------------


@dataclass
class BlockOperator:
    """Truncated band-block realization of L u = G (u o T) on a chart."""

    sys: MapSystem
    weight: object
    theta: Polarization
    theta_prime: Polarization
    grid: BoxGrid
    n_max: int
    h_plus: int
    h_minus: int
    _mult_cache: dict = field(default_factory=dict, repr=False)
    _support: tuple = field(default=None, repr=False)

    def __post_init__(self):
        self.grid.require_band(self.n_max)
        pts = self.grid.points()
        w = np.asarray(self.weight(pts))
        mask = w > 1e-15
        self._support = (mask, pts[mask], w[mask])

    # -- multipliers --------------------------------------------------------

    def mult_out(self, n: int, sigma: str) -> np.ndarray:
        key = ("out", n, sigma)
        if key not in self._mult_cache:
            self._mult_cache[key] = self.grid.multiplier(
                lambda xi: dyadic_partition_eval(self.theta_prime, n, sigma, xi)
            )
        return self._mult_cache[key]

    def mult_in(self, ell: int, tau: str) -> np.ndarray:
        key = ("in", ell, tau)
        if key not in self._mult_cache:
            self._mult_cache[key] = self.grid.multiplier(
                lambda xi: psi_tilde_eval(self.theta, ell, tau, xi)
            )
        return self._mult_cache[key]

    # -- grid action ---------------------------------------------------------

    def compose_weight(self, u: np.ndarray) -> np.ndarray:
        """G (u o T) on the grid; u interpolated at T(x) over supp G only."""
        mask, pts, w = self._support
        out = np.zeros_like(u, dtype=complex)
        vals = self.grid.interp(u, self.sys.forward(pts))
        out[mask.reshape(u.shape)] = w * vals
        return out

    def apply_block(self, u: np.ndarray, lt: tuple, ns: tuple) -> np.ndarray:
        """S^{l,tau}_{n,sigma} u on grid values."""
        ell, tau = lt
        n, sigma = ns
        band_in = sfft.ifft2(sfft.fft2(np.asarray(u, dtype=complex)) * self.mult_in(ell, tau))
        mid = self.compose_weight(band_in)
        return sfft.ifft2(sfft.fft2(mid) * self.mult_out(n, sigma))

    def apply_capped(self, u: np.ndarray, lt: tuple, n_cap: int) -> np.ndarray:
        """chi_{n_cap}(D) L psi~_{l,tau}(D) u: the all-blocks column sum."""
        ell, tau = lt
        band_in = sfft.ifft2(sfft.fft2(np.asarray(u, dtype=complex)) * self.mult_in(ell, tau))
        mid = self.compose_weight(band_in)
        cap = self.grid.multiplier(
            lambda xi: chi_n(np.sqrt(np.sum(xi**2, axis=-1)), n_cap)
        )
        return sfft.ifft2(sfft.fft2(mid) * cap)

    # -- compressed dense matrices -------------------------------------------

    def band_modes(self, n: int, sigma: str, per_band: int, which: str) -> np.ndarray:
        """Decimated frequency-lattice modes carrying one band, (k, 2)."""
        xi = self.grid.xi_points()
        theta = self.theta_prime if which == "out" else self.theta
        vals = np.asarray(dyadic_partition_eval(theta, n, sigma, xi))
        good = vals >= 0.5 * vals.max()
        cand = xi[good]
        order = np.lexsort((cand[:, 1], cand[:, 0]))
        cand = cand[order]
        if cand.shape[0] > per_band:
            stride = cand.shape[0] / per_band
            cand = cand[(np.arange(per_band) * stride).astype(int)]
        return cand

    def compressed_matrices(self, n_max_mat: int, per_band: int = 24,
                            quad_n: int = 160, pad: float = 1.3):
        """(M, M_b, M_c, index) dense matrices on decimated band modes.

        Entries are direct quadratures psi'(eta) psi~(xi) (1/|box|) int G
        e^{i (xi.T(x) - eta.x)} dx over supp G; the b/c split applies the
        hook mask blockwise.  index lists (band, mode) per matrix row.
        """
        self.grid.require_band(n_max_mat)
        bands = band_indices(n_max_mat)
        modes_in, modes_out, idx = [], [], []
        for bi, (n, s) in enumerate(bands):
            mo = self.band_modes(n, s, per_band, "out")
            mi = self.band_modes(n, s, per_band, "in")
            modes_out.append(mo)
            modes_in.append(mi)
            idx.extend([(bi, k) for k in range(mo.shape[0])])
        eta = np.vstack(modes_out)
        xi = np.vstack(modes_in)

        # local quadrature grid over supp G, resolving the largest phase rate;
        # the raw coefficient is (1/|box|) int G(x) e^{i xi.T(x)} e^{-i eta.x} dx
        X, w = self._quad_grid(n_max_mat, quad_n, pad)
        phase_in_T = np.exp(1j * (self.sys.forward(X) @ xi.T))
        phase_out_x = np.exp(-1j * (X @ eta.T))
        area = (2.0 * self.grid.box_half) ** 2
        C = (phase_out_x * w[:, None]).T @ phase_in_T / area

        # multiplier scalings and block masks
        n_b = len(bands)
        sizes_out = [m.shape[0] for m in modes_out]
        sizes_in = [m.shape[0] for m in modes_in]
        off_out = np.cumsum([0] + sizes_out)
        off_in = np.cumsum([0] + sizes_in)
        dim_out, dim_in = off_out[-1], off_in[-1]
        M = np.zeros((dim_out, dim_in), dtype=complex)
        linked = np.zeros((dim_out, dim_in), dtype=bool)
        for i, (n, s) in enumerate(bands):
            po = np.asarray(dyadic_partition_eval(self.theta_prime, n, s, modes_out[i]))
            for j, (l, t) in enumerate(bands):
                pi = np.asarray(psi_tilde_eval(self.theta, l, t, modes_in[j]))
                blk = C[off_out[i]:off_out[i + 1], off_in[j]:off_in[j + 1]]
                M[off_out[i]:off_out[i + 1], off_in[j]:off_in[j + 1]] = (
                    po[:, None] * blk * pi[None, :]
                )
                linked[off_out[i]:off_out[i + 1], off_in[j]:off_in[j + 1]] = hook(
                    (l, t), (n, s), self.h_plus, self.h_minus
                )
        Mb = np.where(linked, M, 0.0)
        Mc = np.where(~linked, M, 0.0)
        return M, Mb, Mc, idx

    def _quad_grid(self, n_max_mat: int, quad_n: int, pad: float):
        mask, pts, w = self._support
        lo = pts.min(axis=0) - 0.05
        hi = pts.max(axis=0) + 0.05
        rate = 2.0 ** (n_max_mat + 1) * pad * 2.0
        n_need = int(np.ceil(max(hi - lo) * rate / math.pi))
        n_side = max(quad_n, n_need)
        t1 = lo[0] + (hi[0] - lo[0]) * (np.arange(n_side) + 0.5) / n_side
        t2 = lo[1] + (hi[1] - lo[1]) * (np.arange(n_side) + 0.5) / n_side
        X = np.stack(np.meshgrid(t1, t2, indexing="ij"), axis=-1).reshape(-1, 2)
        wq = np.asarray(self.weight(X))
        keep = wq > 1e-15
        cell = (hi[0] - lo[0]) * (hi[1] - lo[1]) / n_side**2
        return X[keep], wq[keep] * cell


def assemble_blocks(sys: MapSystem, weight, theta: Polarization,
                    theta_prime: Polarization, n_max: int,
                    grid: BoxGrid | None = None) -> BlockOperator:
    """BlockOperator with h exponents computed from (sys, weight, cones)."""
    if grid is None:
        grid = BoxGrid(8.0, 1024)
    hp, hm = h_exponents(sys, weight, theta, theta_prime)
    return BlockOperator(sys=sys, weight=weight, theta=theta, theta_prime=theta_prime,
                         grid=grid, n_max=n_max, h_plus=hp, h_minus=hm)


def split_bc(block: BlockOperator):
    """(M_b mask, M_c mask): complementary boolean block masks by hook."""
    mb = hook_mask(block.n_max, block.h_plus, block.h_minus)
    return mb, ~mb


# ---------------------------------------------------------------------------
# flat traces
# ---------------------------------------------------------------------------


@dataclass
class FlatTraceQuadrature:
    """Shared frequency-lattice quadrature for the diagonal-block traces.

    tr_flat(M_zeta_zeta) = int psi_zeta(T(x) - x) -hat kernel- G(x) dx is
    evaluated as (dxi^2 / (2 pi)^2) sum_j psi_zeta(xi_j) W(xi_j) with
    W(xi) = int e^{i (T(x)-x) . xi} G(x) dx computed once; partial sums over
    bands then telescope exactly against the chi_{n0} version.
    """

    sys: MapSystem
    weight: object
    theta: Polarization
    n0_max: int
    y_safe: float = 6.0
    quad_n: int = 192

    def __post_init__(self):
        pts = _weight_support_points(self.sys, self.weight, n_side=48)
        lo = pts.min(axis=0) - 0.03
        hi = pts.max(axis=0) + 0.03
        disp = self.sys.forward(pts) - pts
        y_max = float(np.max(np.linalg.norm(disp, axis=1))) * 1.1
        self.dxi = TWO_PI / (y_max + self.y_safe)
        r = 2.0 ** (self.n0_max + 1)
        n_half = int(math.ceil(r / self.dxi))
        j = np.arange(-n_half, n_half + 1)
        # x-grid resolving the phase rate sup |D(T - I)^tr xi| plus bump tails
        rate = r * self._lip_t_minus_i(pts) + 12.0 / max(1e-9, min(hi - lo))
        n_side = int(math.ceil(max(hi - lo) * rate / math.pi * 1.25))
        n_side = max(n_side, 64)
        t1 = lo[0] + (hi[0] - lo[0]) * (np.arange(n_side) + 0.5) / n_side
        t2 = lo[1] + (hi[1] - lo[1]) * (np.arange(n_side) + 0.5) / n_side
        X = np.stack(np.meshgrid(t1, t2, indexing="ij"), axis=-1).reshape(-1, 2)
        wq = np.asarray(self.weight(X))
        keep = wq > 1e-16
        X, wq = X[keep], wq[keep]
        cell = (hi[0] - lo[0]) * (hi[1] - lo[1]) / n_side**2
        disp = self.sys.forward(X) - X
        E1 = np.exp(1j * self.dxi * disp[:, 0])
        E2 = np.exp(1j * self.dxi * disp[:, 1])
        # W[j1, j2] = sum_x w E1^{j1} E2^{j2}: cumulative powers, chunked gemm
        P2 = E2[:, None] ** j[None, :]
        W = np.empty((j.size, j.size), dtype=complex)
        base = wq * cell * E1 ** float(j[0])
        chunk = 64
        for a0 in range(0, j.size, chunk):
            cols = []
            for _ in range(min(chunk, j.size - a0)):
                cols.append(base)
                base = base * E1
            P1 = np.stack(cols, axis=0)  # (chunk, n_x)
            W[a0:a0 + P1.shape[0]] = P1 @ P2
        self._j = j
        self._W = W
        XI1, XI2 = np.meshgrid(j * self.dxi, j * self.dxi, indexing="ij")
        self._xi = np.stack([XI1.ravel(), XI2.ravel()], axis=-1)

    def _lip_t_minus_i(self, pts):
        J = self.sys.jacobian(pts) - np.eye(2)
        return float(np.max(np.linalg.norm(J, axis=(1, 2)))) * 1.1

    def band_trace(self, n: int, sigma: str) -> float:
        vals = np.asarray(dyadic_partition_eval(self.theta, n, sigma, self._xi))
        s = np.sum(vals * self._W.ravel()) * self.dxi**2 / TWO_PI**2
        return float(s.real)

    def partial_sum(self, n0: int) -> float:
        """sum of band traces over n <= n0, both sigma."""
        return math.fsum(self.band_trace(n, s) for n in range(n0 + 1) for s in "+-")

    def chi_trace(self, n0: int) -> float:
        """int chi_hat_{n0}(T(x)-x) G(x) dx on the same lattice (telescoped form)."""
        norm = np.linalg.norm(self._xi, axis=1)
        vals = chi_n(norm, n0)
        s = np.sum(vals * self._W.ravel()) * self.dxi**2 / TWO_PI**2
        return float(s.real)

    def fixed_point_value(self) -> float:
        """Oracle limit: sum over fixed points in supp G of G/|det(Id-DT)|."""
        from scipy.optimize import fsolve

        pts = _weight_support_points(self.sys, self.weight, n_side=16)
        cands = []
        for x0 in pts[:: max(1, len(pts) // 25)]:
            r = fsolve(lambda x: self.sys.forward(x) - x, x0, full_output=True)
            if r[2] == 1:
                x = r[0]
                if np.asarray(self.weight(x[None, :]))[0] > 1e-15:
                    if not any(np.linalg.norm(x - c) < 1e-8 for c in cands):
                        cands.append(x)
        total = 0.0
        for x in cands:
            J = self.sys.jacobian(x)
            total += float(np.asarray(self.weight(x[None, :]))[0]
                           / abs(np.linalg.det(np.eye(2) - J)))
        return total


def block_flat_trace(block: BlockOperator, zeta: tuple,
                     quad: FlatTraceQuadrature | None = None) -> float:
    """Flat trace of the diagonal block at zeta = (n, sigma)."""
    n, sigma = zeta
    if quad is None:
        quad = FlatTraceQuadrature(block.sys, block.weight, block.theta_prime, n0_max=n)
    return quad.band_trace(n, sigma)


# ---------------------------------------------------------------------------
# kneading identity
# ---------------------------------------------------------------------------


def kneading_check(M: np.ndarray, Mb: np.ndarray, Mc: np.ndarray, z_samples,
                   cond_limit: float = 1e12) -> dict:
    """det(Id - zM) = det(Id - z Mc (Id - z Mb)^{-1}) det(Id - z Mb) at samples.

    Pure finite-matrix identity; fails only through conditioning, which is
    guarded by cond_limit on Id - z Mb.
    """
    dim = M.shape[0]
    eye = np.eye(dim)
    rows = []
    worst = 0.0
    for z in z_samples:
        A = eye - z * Mb
        cond = np.linalg.cond(A)
        if cond > cond_limit:
            raise SingularResolvent(f"cond(Id - z Mb) = {cond:.2e} at z = {z}")
        lhs = np.linalg.det(eye - z * M)
        rhs = np.linalg.det(eye - z * Mc @ np.linalg.inv(A)) * np.linalg.det(A)
        rel = abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300)
        worst = max(worst, rel)
        rows.append({"z": complex(z), "lhs": complex(lhs), "rhs": complex(rhs),
                     "rel_err": float(rel), "cond": float(cond)})
    return {"rows": rows, "max_rel_err": worst, "pass": worst <= 1e-8}


def dump_dense_matrix(path: str, M: np.ndarray, index) -> None:
    """Binary dump of a dense block matrix for offline inspection.

    Layout: UTF-8 header lines ('hypdet-block-dump 1', 'rows cols', one
    'band mode' pair per row index), a blank line, then the matrix as
    row-major little-endian complex128 (re, im) pairs.
    """
    M = np.ascontiguousarray(M, dtype=np.complex128)
    lines = ["hypdet-block-dump 1", f"{M.shape[0]} {M.shape[1]}"]
    lines += [f"{bi} {k}" for bi, k in index]
    header = ("\n".join(lines) + "\n\n").encode()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(M.astype("<c16").tobytes(order="C"))


def load_dense_matrix(path: str):
    """Inverse of dump_dense_matrix; returns (matrix, index)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    head, _, body = raw.partition(b"\n\n")
    lines = head.decode().splitlines()
    if lines[0] != "hypdet-block-dump 1":
        raise ValueError("not a block dump file")
    rows, cols = (int(v) for v in lines[1].split())
    index = [tuple(int(v) for v in ln.split()) for ln in lines[2:]]
    M = np.frombuffer(body, dtype="<c16", count=rows * cols).reshape(rows, cols)
    return M.copy(), index


# ---------------------------------------------------------------------------
# kernel decay and approximation numbers
# ---------------------------------------------------------------------------


class PsiHatTable:
    """Tabulated inverse transforms of the band multipliers.

    Levels 0 and 1 are tabulated directly; higher bands use the exact
    scaling law psi_hat_n(x) = 2^{2(n-1)} psi_hat_1(2^{n-1} x).
    """

    def __init__(self, theta: Polarization, kind: str, sigma: str,
                 box_half: float = 48.0, n_pix: int = 1024):
        self.grid = BoxGrid(box_half, n_pix)
        self.tables = {}
        for level in (0, 1):
            self.tables[level] = self._make(theta, kind, sigma, level)

    def _make(self, theta, kind, sigma, level):
        xi = self.grid.xi_points()
        if kind == "psi":
            vals = dyadic_partition_eval(theta, level, sigma, xi)
        else:
            vals = psi_tilde_eval(theta, level, sigma, xi)
        vals = np.asarray(vals).reshape(self.grid.n_pix, self.grid.n_pix)
        scale = self.grid.dxi**2 / TWO_PI**2 * self.grid.n_pix**2
        hat = sfft.ifft2(vals) * scale
        # ifft lattice starts at x = 0; roll to center the box at -B
        return sfft.fftshift(hat)

    def eval(self, n: int, pts: np.ndarray) -> np.ndarray:
        if n <= 1:
            table, fac, arg = self.tables[n], 1.0, pts
        else:
            table, fac = self.tables[1], 2.0 ** (2 * (n - 1))
            arg = pts * 2.0 ** (n - 1)
        B, h = self.grid.box_half, self.grid.h
        ij = (arg + B) / h
        inside = np.all((ij >= 1) & (ij <= self.grid.n_pix - 2), axis=1)
        out = np.zeros(pts.shape[0], dtype=complex)
        if np.any(inside):
            c = ij[inside].T
            out[inside] = (map_coordinates(table.real, c, order=3)
                           + 1j * map_coordinates(table.imag, c, order=3))
        return fac * out


def kernel_decay_fit(block: BlockOperator, pairs, n_eval: int = 12,
                     table_n_pix: int = 1024) -> dict:
    """Empirical decay of unlinked block kernels against max{n, l}.

    Materializes V(x,y) = int psi_hat'(x-w) G(w) psi_tilde_hat(T(w)-T(y)) dw
    on coarse (x, y) grids with a w-quadrature resolving the 2^{max{n,l}+1}
    oscillation, and fits log2 max|V| linearly in max{n, l}.
    """
    for lt, ns in pairs:
        if hook(lt, ns, block.h_plus, block.h_minus):
            raise ValueError(f"pair {lt} -> {ns} is linked; decay bound applies "
                             "to unlinked pairs")
    mask, pts, wv = block._support
    if pts.shape[0] == 0:  # zero weight: every kernel vanishes identically
        rows = [{"pair": [[lt[0], lt[1]], [ns[0], ns[1]]], "max_abs": 0.0,
                 "max_nl": int(max(ns[0], lt[0])), "min_nl": int(min(ns[0], lt[0]))}
                for lt, ns in pairs]
        return {"rows": rows, "slope_log2": math.nan}
    lo, hi = pts.min(axis=0) - 0.02, pts.max(axis=0) + 0.02
    ext = np.linspace(-0.8, 0.8, n_eval)
    XY = np.stack(np.meshgrid(ext, ext, indexing="ij"), axis=-1).reshape(-1, 2)
    TY = block.sys.forward(XY)

    tables: dict = {}
    rows = []
    for (ell, tau), (n, sigma) in pairs:
        kp = ("psi", sigma)
        kt = ("tilde", tau)
        if kp not in tables:
            tables[kp] = PsiHatTable(block.theta_prime, "psi", sigma, n_pix=table_n_pix)
        if kt not in tables:
            tables[kt] = PsiHatTable(block.theta, "tilde", tau, n_pix=table_n_pix)
        # w-grid cells below a third of the finest kernel oscillation scale
        w_side = int(math.ceil(float(max(hi - lo)) * 3.0 * 2.0 ** (max(n, ell) + 1) / math.pi))
        w_side = min(max(w_side, 48), 512)
        t1 = lo[0] + (hi[0] - lo[0]) * (np.arange(w_side) + 0.5) / w_side
        t2 = lo[1] + (hi[1] - lo[1]) * (np.arange(w_side) + 0.5) / w_side
        Wg = np.stack(np.meshgrid(t1, t2, indexing="ij"), axis=-1).reshape(-1, 2)
        gw = np.asarray(block.weight(Wg))
        keep = gw > 1e-16
        Wg, gw = Wg[keep], gw[keep]
        cell = (t1[1] - t1[0]) * (t2[1] - t2[0])
        TW = block.sys.forward(Wg)
        dx = (XY[:, None, :] - Wg[None, :, :]).reshape(-1, 2)
        P_out = tables[kp].eval(n, dx).reshape(XY.shape[0], Wg.shape[0])
        dyv = (TW[:, None, :] - TY[None, :, :]).reshape(-1, 2)
        P_in = tables[kt].eval(ell, dyv).reshape(Wg.shape[0], XY.shape[0])
        V = P_out @ (gw[:, None] * cell * P_in)
        rows.append({
            "pair": [[ell, tau], [n, sigma]],
            "max_abs": float(np.max(np.abs(V))),
            "max_nl": int(max(n, ell)),
            "min_nl": int(min(n, ell)),
        })
    xs = np.array([r["max_nl"] for r in rows], dtype=float)
    ys = np.log2(np.maximum([r["max_abs"] for r in rows], 1e-300))
    slope = float(np.polyfit(xs, ys, 1)[0]) if len(rows) > 1 else math.nan
    return {"rows": rows, "slope_log2": slope}


def approx_number_proxy(Mc: np.ndarray, index, n_max: int, p: float, q: float,
                        k_range=None) -> dict:
    """Singular values of the (p, q)-weighted M_c truncation, log-log fitted.

    index maps matrix rows/cols to (band position, mode); rows and columns
    are scaled by 2^{c(sigma) n} with c(+) = p, c(-) = q.
    """
    bands = band_indices(n_max)
    wvec = np.empty(Mc.shape[0])
    for r, (bi, _) in enumerate(index):
        n, sigma = bands[bi]
        c = p if sigma == "+" else q
        wvec[r] = 2.0 ** (c * n)
    weighted = wvec[:, None] * Mc / wvec[None, :]
    s = np.linalg.svd(weighted, compute_uv=False)
    if k_range is None:
        k_range = range(1, min(len(s), 64) + 1)
    ks = np.array([k for k in k_range if s[k - 1] > 1e-14])
    if len(ks) > 3:
        slope = float(np.polyfit(np.log(ks), np.log(s[ks - 1]), 1)[0])
    else:
        slope = math.nan
    return {"singular_values": s.tolist(), "fit_exponent": slope}
