import math

import numpy as np
import pytest

from hypdet import maps
from hypdet.errors import (
    ConeViolation,
    DegenerateDirection,
    OrbitLeftDomain,
    PerturbationTooLarge,
)

LAM = maps.CAT_LAMBDA
MU = maps.CAT_MU


def torus_dist(a, b):
    d = a - b
    d = d - np.round(d)
    return np.max(np.abs(d))


def test_cat_basics(cat):
    assert np.allclose(cat.forward(np.zeros(2)), 0.0)
    assert np.allclose(cat.jacobian(np.array([0.3, 0.7])), maps.CAT_A)
    lead = np.max(np.abs(np.linalg.eigvals(cat.jacobian(np.zeros(2)))))
    assert abs(lead - 2.6180339887) < 1e-9


@pytest.mark.parametrize("build", ["cat", "pcat", "chart"])
def test_forward_inverse_identity(build, rng):
    if build == "cat":
        sys_ = maps.builtin_cat_map()
        pts = rng.uniform(0, 1, (1000, 2))
        wrap = True
    elif build == "pcat":
        sys_ = maps.builtin_perturbed_cat(0.02, seed=3)
        pts = rng.uniform(0, 1, (1000, 2))
        wrap = True
    else:
        sys_ = maps.builtin_chart_model(0.02)[0]
        pts = rng.uniform(-0.9, 0.9, (1000, 2))
        wrap = False
    back = sys_.inverse(sys_.forward(pts))
    if wrap:
        assert torus_dist(back, pts) < 1e-10
    else:
        assert np.max(np.abs(back - pts)) < 1e-10


@pytest.mark.parametrize("eps", [0.0, 0.01, 0.05])
def test_jacobian_nonsingular(eps, rng):
    sys_ = maps.builtin_perturbed_cat(eps)
    pts = rng.uniform(0, 1, (500, 2))
    dets = np.abs(np.linalg.det(sys_.jacobian(pts)))
    assert np.all(dets > 1e-12)


def test_chart_weight_support_and_continuity(rng):
    sys_ = maps.builtin_chart_model(0.0)[0]
    outside = rng.uniform(0.3, 1.0, (200, 2)) + 0.25  # radius > 0.25
    assert np.all(np.asarray(sys_.weight(outside)) == 0.0)
    # sampled modulus of continuity
    x = rng.uniform(-0.3, 0.3, (500, 2))
    h = 1e-5 * rng.standard_normal((500, 2))
    dw = np.abs(np.asarray(sys_.weight(x + h)) - np.asarray(sys_.weight(x)))
    assert np.max(dw) < 1e-3


def test_perturbed_cat_examples():
    pc0 = maps.builtin_perturbed_cat(0.0)
    cat = maps.builtin_cat_map()
    x = np.array([0.123, 0.456])
    for _ in range(5):
        assert torus_dist(pc0.forward(x), cat.forward(x)) < 1e-15
        x = cat.forward(x)
    pc = maps.builtin_perturbed_cat(0.01)
    assert np.allclose(pc.forward(np.zeros(2)), 0.0)
    expected = maps.CAT_A + 0.01 * 2 * math.pi * np.array([[0.0, 1.0], [1.0, 1.0]])
    assert np.allclose(pc.jacobian(np.zeros(2)), expected, atol=1e-14)
    with pytest.raises(PerturbationTooLarge):
        maps.builtin_perturbed_cat(0.06)


def test_chart_model_examples():
    sys_, theta, theta_p = maps.builtin_chart_model(0.0)
    far = np.array([5.0, 5.0])  # outside the bumps: exactly linear
    assert np.allclose(sys_.jacobian(far), np.diag([0.5, 2.0]))
    L = maps.secant_matrix(sys_, np.array([3.0, 4.0]), np.array([5.0, -2.0]))
    assert np.allclose(L, np.diag([0.5, 2.0]), atol=1e-12)
    with pytest.raises(PerturbationTooLarge):
        maps.builtin_chart_model(0.06)
    with pytest.raises(ConeViolation):
        maps.Polarization(0.0, 0.3, 0.0, 0.3)  # cone_plus = cone_minus


def test_polarization_cutoffs(chart):
    _, theta, _ = chart
    ang = np.linspace(0, 2 * math.pi, 721)
    dirs = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    total = theta.phi_plus(dirs) + theta.phi_minus(dirs)
    assert np.max(np.abs(total - 1.0)) < 1e-12
    in_plus = theta.in_cone_plus(dirs)
    in_minus = theta.in_cone_minus(dirs)
    assert np.all(theta.phi_plus(dirs[in_plus]) == 1.0)
    assert np.all(theta.phi_plus(dirs[in_minus]) == 0.0)


def test_jacobian_cocycle(cat, rng):
    x = rng.uniform(0, 1, 2)
    assert np.allclose(maps.jacobian_cocycle(cat, x, 3), [[13, 8], [8, 5]])
    assert np.allclose(maps.jacobian_cocycle(cat, x, 0), np.eye(2))


def test_cocycle_against_finite_differences():
    # oracle: central finite differences of the composed map T^2
    pc = maps.builtin_perturbed_cat(0.01)
    x = np.zeros(2)
    J = maps.jacobian_cocycle(pc, x, 2)
    h = 1e-6
    fd = np.zeros((2, 2))
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        fp = pc.forward(pc.forward(x + e))
        fm = pc.forward(pc.forward(x - e))
        d = fp - fm
        d -= np.round(d)
        fd[:, j] = d / (2 * h)
    assert np.max(np.abs(J - fd)) < 1e-6


def test_cocycle_identity(rng):
    pc = maps.builtin_perturbed_cat(0.02)
    for _ in range(50):
        x = rng.uniform(0, 1, 2)
        m, k = rng.integers(1, 7), rng.integers(1, 7)
        lhs = maps.jacobian_cocycle(pc, x, m + k)
        y = x.copy()
        for _ in range(m):
            y = pc.forward(y)
        rhs = maps.jacobian_cocycle(pc, y, k) @ maps.jacobian_cocycle(pc, x, m)
        assert np.max(np.abs(lhs - rhs)) < 1e-9


def test_splitting_cat(cat, cat_split, rng):
    evec_u = np.array([0.85065080835204, 0.5257311121191336])
    evec_s = np.array([0.5257311121191336, -0.85065080835204])
    pts = rng.uniform(0, 1, (20, 2))
    u = cat_split.unstable(pts)
    s = cat_split.stable(pts)
    assert np.max(np.abs(np.abs(u @ evec_u) - 1.0)) < 1e-8
    assert np.max(np.abs(np.abs(s @ evec_s) - 1.0)) < 1e-8


def test_splitting_invariance_residual(pcat, pcat_split, rng):
    xs = rng.uniform(0, 1, (50, 2))
    u = pcat_split.unstable(xs)
    Ju = (pcat.jacobian(xs) @ u[..., None])[..., 0]
    Tu = pcat_split.unstable(pcat.forward(xs))
    mu = np.linalg.norm(Ju, axis=1)
    sign = np.sign(np.einsum("ij,ij->i", Ju, Tu))
    resid = np.linalg.norm(Ju - mu[:, None] * sign[:, None] * Tu, axis=1)
    assert resid.max() < 1e-4


def test_splitting_degenerate_direction(chart):
    sys_, _, _ = chart
    # (1,0) is exactly the contracting eigendirection of the linear chart map
    split = maps.splitting_power_iteration(sys_, 10, v0=(1.0, 0.0))
    with pytest.raises(DegenerateDirection):
        split.unstable(np.array([0.0, 0.0]))


def test_hyperbolicity_exponents(cat, cat_split):
    x = np.array([0.1, 0.2])
    lam, nu = maps.hyperbolicity_exponents(cat, cat_split, x, 1)
    assert abs(lam - 0.3819660113) < 1e-9
    assert abs(nu - 2.6180339887) < 1e-9
    lam3, nu3 = maps.hyperbolicity_exponents(cat, cat_split, x, 3)
    assert abs(lam3 - MU**3) < 1e-9
    assert abs(nu3 - LAM**3) < 1e-9


def test_exponents_x_independent_on_linear(cat, cat_split, rng):
    pts = rng.uniform(0, 1, (100, 2))
    lam, nu = maps.hyperbolicity_exponents(cat, cat_split, pts, 2)
    assert lam.max() - lam.min() <= 1e-10
    assert nu.max() - nu.min() <= 1e-10


def test_exponent_multiplicativity_linear(cat, cat_split):
    x = np.array([0.3, 0.9])
    lam2, _ = maps.hyperbolicity_exponents(cat, cat_split, x, 2)
    lam3, _ = maps.hyperbolicity_exponents(cat, cat_split, x, 3)
    lam5, _ = maps.hyperbolicity_exponents(cat, cat_split, x, 5)
    assert lam5 <= lam2 * lam3 + 1e-8


def test_exponent_submultiplicativity(pcat, pcat_split, rng):
    p, q = 1.0, -1.0
    for _ in range(10):
        x = rng.uniform(0, 1, 2)
        m, k = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        y = x.copy()
        for _ in range(m):
            y = pcat.forward(y)
        whole = maps.lambda_pqm(pcat, pcat_split, x, p, q, m + k)
        parts = (maps.lambda_pqm(pcat, pcat_split, x, p, q, m)
                 * maps.lambda_pqm(pcat, pcat_split, y, p, q, k))
        assert whole <= parts + 1e-9


def test_lambda_pqm(cat, cat_split):
    x = np.array([0.4, 0.9])
    assert abs(maps.lambda_pqm(cat, cat_split, x, 1, -1, 3) - LAM**-3) < 1e-9
    assert abs(maps.lambda_pqm(cat, cat_split, x, 2, -1, 1) - 0.3819660113) < 1e-9
    assert abs(maps.lambda_pqm(cat, cat_split, x, 0, 0, 4) - 1.0) < 1e-12


def test_unstable_jacobian(cat, cat_split, pcat, pcat_split, rng):
    x = np.array([0.4, 0.9])
    assert abs(maps.unstable_jacobian(cat, cat_split, x, 1) - 2.6180339887) < 1e-9
    assert abs(maps.unstable_jacobian(cat, cat_split, x, 4) - 46.97871376) < 1e-7
    # cocycle identity on the perturbed map
    for _ in range(5):
        x = rng.uniform(0, 1, 2)
        m, k = 3, 2
        y = x.copy()
        for _ in range(m):
            y = pcat.forward(y)
        lhs = maps.unstable_jacobian(pcat, pcat_split, x, m + k)
        rhs = (maps.unstable_jacobian(pcat, pcat_split, x, m)
               * maps.unstable_jacobian(pcat, pcat_split, y, k))
        assert abs(lhs - rhs) < 1e-9 * max(1.0, abs(lhs))


def test_weight_floor():
    zero = lambda x: np.zeros(np.atleast_2d(x).shape[0])  # noqa: E731
    g4 = maps.weight_floor(zero, 4)
    x = np.array([[0.2, 0.3]])
    assert np.allclose(g4(x), 0.25)
    one = lambda x: np.ones(np.atleast_2d(x).shape[0])  # noqa: E731
    for n in (10, 100, 1000):
        gn = maps.weight_floor(one, n)
        assert np.all(gn(x) - 1.0 <= 1.0 / (2 * n**2) + 1e-15)
        assert np.all(gn(x) >= 1.0)
    rng = np.random.default_rng(0)
    pts = rng.uniform(0, 1, (100, 2))
    g = lambda x: np.cos(2 * np.pi * np.atleast_2d(x)[:, 0])  # noqa: E731
    g4, g5 = maps.weight_floor(g, 4), maps.weight_floor(g, 5)
    assert np.all(g4(pts) >= g5(pts))
    assert np.all(g5(pts) >= np.abs(g(pts)))


def test_cone_check_linear_margin(chart):
    sys_, theta, theta_p = chart
    report = maps.check_cone_hyperbolic(sys_, theta, theta_p, n_samples=20, seed=0)
    # closed-form margin: image of the complement boundary ray under diag(1/2,2)
    th = math.radians(35.0)
    t_bd = math.atan(1.0 / (2.0 * math.tan(th)) / 2.0)
    # boundary ray of complement(C_+) at angle 35 deg: image angle from xi2 axis
    img = np.array([math.cos(th) / 2.0, 2.0 * math.sin(th)])
    dist = abs(math.atan2(img[0], img[1]))
    expected = th - dist
    assert abs(report["derivative_margin"] - expected) < 1e-3
    assert report["max_secant_residual"] < 1e-10
    del t_bd


def test_cone_check_perturbed():
    sys_, theta, theta_p = maps.builtin_chart_model(0.01)
    report = maps.check_cone_hyperbolic(sys_, theta, theta_p, n_samples=40, seed=1)
    assert report["derivative_margin"] > 0
    assert report["secant_margin"] > 0
    lin = maps.check_cone_hyperbolic(maps.builtin_chart_model(0.0)[0], theta,
                                     theta_p, n_samples=40, seed=1)
    assert report["derivative_margin"] <= lin["derivative_margin"] + 1e-9


def test_orbit_left_domain():
    base = maps.builtin_chart_model(0.0)[0]
    restricted = maps.MapSystem(
        name="restricted", dim=2, domain="chart",
        forward=base.forward, inverse=base.inverse, jacobian=base.jacobian,
        weight=base.weight, box=base.box, valid_region=((-1.0, 1.0), (-1.0, 1.0)),
    )
    with pytest.raises(OrbitLeftDomain):
        maps.jacobian_cocycle(restricted, np.array([0.0, 0.6]), 3)


def test_splitting_transversality_floor(cat, cat_split, pcat, pcat_split, rng):
    pts = rng.uniform(0, 1, (60, 2))
    for split in (cat_split, pcat_split):
        u = split.unstable(pts)
        s = split.stable(pts)
        angle = np.arccos(np.clip(np.abs(np.einsum("ij,ij->i", u, s)), 0, 1))
        assert np.min(angle) > 0.5  # radians, far above any reasonable floor
