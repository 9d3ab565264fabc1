import math
import warnings

import numpy as np
import pytest

from hypdet import bounds as bd
from hypdet import maps, orbits
from hypdet.errors import BudgetExceeded, CrossCheckFailed, InequalityViolated

LAM = maps.CAT_LAMBDA
MU = maps.CAT_MU


def zero_weight(sys_):
    return sys_.with_weight(lambda x: np.zeros(np.atleast_2d(x).shape[0]), tag="zero")


def test_rho_pq_m_cat(cat, cat_split):
    val, se = bd.rho_pq_m(cat, cat_split, 1, -1, 3, n_samples=512, seed=1)
    assert abs(val - LAM**-3) < 1e-10  # constant integrand: MC is exact
    assert se < 1e-12
    val0, _ = bd.rho_pq_m(cat, cat_split, 0, 0, 2, n_samples=256, seed=1)
    assert val0 == pytest.approx(1.0, abs=1e-14)
    valz, _ = bd.rho_pq_m(zero_weight(cat), cat_split, 1, -1, 2, n_samples=256)
    assert valz == 0.0


def test_rho_pq_estimate_fits():
    geo = {m: LAM**-m for m in range(1, 8)}
    rep = bd.rho_pq_estimate(geo)
    assert abs(rep["estimate"] - MU) < 1e-3
    const = {m: 0.37 for m in range(1, 6)}
    assert abs(bd.rho_pq_estimate(const)["estimate"] - 1.0) < 1e-12
    pows = {m: 2.0**m for m in range(1, 6)}
    assert abs(bd.rho_pq_estimate(pows)["estimate"] - 2.0) < 1e-12
    with pytest.raises(ValueError):
        bd.rho_pq_estimate({1: 1.0, 2: 1.0})


def test_rho_pq_estimate_poor_fit_flag(rng):
    rows = {m: math.exp(rng.uniform(-2, 2)) for m in range(1, 8)}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = bd.rho_pq_estimate(rows)
    assert rep["poor_fit"]


def test_R_pqt_cat(cat, cat_split):
    for t in (1.0, 2.0, math.inf):
        val = bd.R_pqt_m(cat, cat_split, 1, -1, t, 3, n_samples=128)
        assert abs(val - LAM**-3) < 1e-10  # area preserving: det factor is 1
    assert abs(bd.R_pqt_m(cat, cat_split, 0, 0, math.inf, 2, n_samples=128) - 1.0) < 1e-12


def test_R_monotone_in_t_reported(pcat, pcat_split):
    vals = {t: bd.R_pqt_m(pcat, pcat_split, 1, -1, t, 3, n_samples=512)
            for t in (1.0, 2.0, math.inf)}
    assert all(v > 0 for v in vals.values())  # reported, not asserted


def test_appendixB_cat_and_perturbed(cat, cat_split):
    rep = bd.appendixB_check(cat, cat_split, 1, -1, m_range=range(1, 5),
                             n_samples=512, seed=3)
    assert rep["pass"]
    pc = maps.builtin_perturbed_cat(0.02)
    sp = maps.splitting_power_iteration(pc)
    rep2 = bd.appendixB_check(pc, sp, 1, -1, m_range=range(1, 4),
                              n_samples=1024, seed=3)
    assert rep2["pass"]


def test_appendixB_zero_weight(cat, cat_split):
    rep = bd.appendixB_check(zero_weight(cat), cat_split, 1, -1,
                             m_range=range(1, 3), n_samples=128)
    assert rep["pass"]  # 0 <= 0


def test_appendixB_violation_raises(cat, cat_split, monkeypatch):
    monkeypatch.setattr(bd, "R_pqt_m", lambda *a, **k: 0.0)
    with pytest.raises(InequalityViolated):
        bd.appendixB_check(cat, cat_split, 1, -1, m_range=range(1, 3), n_samples=64)


def test_cover_spec_validation():
    with pytest.raises(ValueError):
        bd.CoverSpec(centers=np.array([[0.5, 0.5]]), radius=0.1)
    cover = bd.make_grid_cover(4)
    assert cover.centers.shape == (16, 2)


def test_generating_diameter_shrinks(cat):
    cover = bd.make_grid_cover(4)
    d2 = bd.generating_diameter(cat, cover, 2, n_samples=2048, seed=0)
    d5 = bd.generating_diameter(cat, cover, 5, n_samples=2048, seed=0)
    assert d5 < d2


def test_q_star_m1_exact(cat, cat_split):
    cover = bd.make_grid_cover(4)
    rep = bd.q_star_cover(cat, cat_split, 0, 0, cover, 1, n_samples=64)
    assert abs(rep["greedy"] - 16.0 * MU) < 1e-9
    assert rep["n_itineraries"] == 16


def test_q_star_trend_to_pressure(cat, cat_split):
    cover = bd.make_grid_cover(4)
    roots = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for m in range(2, 9):
            rep = bd.q_star_cover(cat, cat_split, 0, 0, cover, m, n_samples=128)
            roots.append(rep["greedy"] ** (1.0 / m))
    assert all(a >= b for a, b in zip(roots, roots[1:]))
    assert abs(roots[-1] - 1.0) <= 0.10  # Q^{0,0} = exp(P_top) = 1


def test_q_star_weight_floor_scaling(cat, cat_split):
    cover = bd.make_grid_cover(4)
    m = 2
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        vals = {}
        for n in (4, 8):
            gn = maps.weight_floor(lambda x: np.zeros(np.atleast_2d(x).shape[0]), n)
            sys_n = cat.with_weight(gn, tag=f"floor{n}")
            vals[n] = bd.q_star_cover(sys_n, cat_split, 0, 0, cover, m,
                                      n_samples=64)["full_sum"]
    # constant weight (1/n)^m factors out of the itinerary sums exactly
    assert vals[4] / vals[8] == pytest.approx((8.0 / 4.0) ** m, rel=1e-9)


def test_q_star_floor_monotone_in_n(cat, cat_split):
    cover = bd.make_grid_cover(4)
    g = lambda x: 0.2 * np.abs(np.sin(2 * np.pi * np.atleast_2d(x)[:, 0]))  # noqa: E731
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        vals = []
        for n in (3, 4, 6):
            sys_n = cat.with_weight(maps.weight_floor(g, n), tag=f"floor{n}")
            vals.append(bd.q_star_cover(sys_n, cat_split, 0, 0, cover, 2,
                                        n_samples=64)["full_sum"])
    assert vals[0] >= vals[1] >= vals[2]


def test_q_star_full_sum_submultiplicative(cat, cat_split):
    cover = bd.make_grid_cover(4)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        f = {m: bd.q_star_cover(cat, cat_split, 1, -1, cover, m,
                                n_samples=64)["full_sum"] for m in (2, 3, 5)}
    assert f[5] <= f[2] * f[3] * 1.05


def test_q_star_budget():
    cat = maps.builtin_cat_map()
    split = maps.splitting_power_iteration(cat)
    cover = bd.make_grid_cover(4)
    with pytest.raises(BudgetExceeded):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            bd.q_star_cover(cat, split, 0, 0, cover, 8, n_samples=64, budget=100)


def test_rho_leq_qstar_rate(cat, cat_split):
    # Lemma-level comparison at the level of extrapolated m-th roots.  The
    # window stops before the greedy subcover saturates its witness cloud
    # (which biases the cover route down, as documented).
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        per_m = {m: bd.rho_pq_m(cat, cat_split, 1, -1, m, n_samples=512,
                                seed=m)[0] for m in range(2, 6)}
        rho_rate = bd.rho_pq_estimate(per_m)["estimate"]
        cover = bd.make_grid_cover(4)
        q_roots = {m: bd.q_star_cover(cat, cat_split, 1, -1, cover, m,
                                      n_samples=256)["greedy"] for m in range(2, 6)}
        q_rate = bd.rho_pq_estimate(q_roots)["estimate"]
    assert rho_rate <= q_rate * 1.05


def test_rho_star_single_element(cat, cat_split):
    one = [lambda x: np.ones(np.atleast_2d(x).shape[0])]
    rep = bd.rho_star_partition(cat, cat_split, 1, -1, one, 3)
    assert rep["value"] == pytest.approx(MU**6, rel=1e-10)
    assert rep["n_terms"] == 1


def test_rho_star_trend(cat, cat_split):
    phis = bd.make_torus_partition(4, width_factor=0.55)
    rep = bd.rho_star_partition(cat, cat_split, 1, -1, phis, 8, n_grid=64)
    root = rep["value"] ** (1.0 / 8.0)
    assert abs(root - MU) / MU <= 0.15


def test_partition_sums_to_one():
    phis = bd.make_torus_partition(3)
    X = np.random.default_rng(0).uniform(0, 1, (500, 2))
    total = sum(np.asarray(phi(X)) for phi in phis)
    assert np.max(np.abs(total - 1.0)) < 1e-12


def test_pressure_periodic(cat, cat_split):
    pts = {m: orbits.periodic_points(cat, m) for m in (8, 10)}
    zero_phi = lambda x: np.zeros(np.atleast_2d(x).shape[0])  # noqa: E731
    P = bd.pressure_periodic(cat, pts, zero_phi)
    assert abs(P[10] - math.log(LAM)) / math.log(LAM) < 0.02
    neg = lambda x: np.full(np.atleast_2d(x).shape[0], -math.log(LAM))  # noqa: E731
    Pn = bd.pressure_periodic(cat, pts, neg)
    assert abs(Pn[10]) <= 0.02
    c = 0.3
    shifted = lambda x: np.full(np.atleast_2d(x).shape[0], -math.log(LAM) + c)  # noqa: E731
    Ps = bd.pressure_periodic(cat, pts, shifted)
    assert Ps[10] == pytest.approx(Pn[10] + c, abs=1e-12)
    empty = orbits.PeriodicPointSet(period=2, points=np.zeros((0, 2)),
                                    derivatives=np.zeros((0, 2, 2)),
                                    weights=np.zeros(0), method="lattice-exact")
    assert bd.pressure_periodic(cat, {2: empty}, zero_phi)[2] == -math.inf


def test_q_variational_examples(cat, cat_split):
    rep = bd.q_variational(cat, cat_split, 1, -1, range(4, 11))
    assert abs(rep["estimate"] - MU) / MU < 0.02
    rep0 = bd.q_variational(cat, cat_split, 0, 0, range(4, 11))
    assert abs(rep0["estimate"] - 1.0) < 0.02
    inv = cat.with_weight(
        lambda x: np.full(np.atleast_2d(x).shape[0], 1.0 / LAM), tag="invlam")
    rep2 = bd.q_variational(inv, cat_split, 1, -1, range(4, 11))
    assert rep2["estimate"] == pytest.approx(rep["estimate"] / LAM, rel=1e-9)


def test_q_pq_bounded_by_scaled_q00(cat, cat_split):
    # closed-form remark: Q^{p,q} <= lambda^{min(p,-q)} Q^{0,0} on linear maps
    q_pq = bd.q_variational(cat, cat_split, 2, -1, range(4, 11))["estimate"]
    q_00 = bd.q_variational(cat, cat_split, 0, 0, range(4, 11))["estimate"]
    assert q_pq <= LAM ** -min(2.0, 1.0) * q_00 * 1.01


def test_kitaev_crosscheck(cat, cat_split, pcat, pcat_split):
    rep = bd.kitaev_crosscheck(cat, cat_split, 1, -1, range(4, 11),
                               n_samples=1024, seed=2)
    assert rep["pass"] and rep["log_gap"] <= 0.05
    assert abs(rep["rho_estimate"] - 0.381966) < 0.02 * 0.381966
    rep2 = bd.kitaev_crosscheck(pcat, pcat_split, 1, -1, range(4, 9),
                                n_samples=2048, seed=2)
    assert rep2["pass"]


def test_crosscheck_negative_control(cat, cat_split):
    # q = 0 on the integral route only: the rates genuinely differ
    per_m = {m: bd.rho_pq_m(cat, cat_split, 1, 0, m, n_samples=256, seed=m)[0]
             for m in range(4, 9)}
    rho_mismatched = bd.rho_pq_estimate(per_m)
    q1 = bd.q_variational(cat, cat_split, 1, -1, range(4, 9))
    with pytest.raises(CrossCheckFailed):
        bd.compare_routes(rho_mismatched, q1)
