import numpy as np
import pytest

from lossy_diffusion.combiners import CombiningRule
from lossy_diffusion.errors import ErrorModel, uniform_error_model
from lossy_diffusion.montecarlo import regressor_factor, run_diffusion, sample_regressors, steady_state_estimate
from lossy_diffusion.results import LearningCurve, to_db
from lossy_diffusion.theory import (
    SpatialCorrelation,
    TrueParameter,
    build_moment_system,
    make_profiles,
    scalar_coefficients,
    standalone_msd,
    theory_msd,
    transient_theory_curve,
    weight_moments,
)
from lossy_diffusion.topology import build_from_adjacency, random_geometric

from oracles import naive_diffusion

SINGLE = build_from_adjacency([[0]])


def _draws(prof, corr, m, count, seed):
    rng = np.random.default_rng(seed)
    return np.stack([sample_regressors(prof, corr, m, rng) for _ in range(count)])  # (count, N, M)


def test_regressors_independent_case():
    prof = make_profiles(0.01, [0.5, 2.0], 1e-3)
    u = _draws(prof, SpatialCorrelation.index(0.0, 2), 3, 100_000, 0)
    assert u.shape == (100_000, 2, 3)
    cross = (u[:, 0, :] * u[:, 1, :]).mean(axis=0)
    se = np.sqrt(0.5 * 2.0 / 100_000)
    assert np.all(np.abs(cross) < 3 * se * 1.5)
    for k, s in enumerate([0.5, 2.0]):
        cov = u[:, k, :].T @ u[:, k, :] / 100_000
        assert np.allclose(np.diag(cov), s, rtol=0.03)
        off = cov[~np.eye(3, dtype=bool)]
        assert np.all(np.abs(off) < 4 * s / np.sqrt(100_000) * 1.5)


def test_regressors_spatial_index():
    prof = make_profiles(0.01, 1.0, 1e-3) * 3
    u = _draws(prof, SpatialCorrelation.index(0.9, 3), 2, 100_000, 1)
    x, y = u[:, 0, :].ravel(), u[:, 2, :].ravel()
    r = np.corrcoef(x, y)[0, 1]
    se = (1 - 0.81**2) / np.sqrt(x.size)
    assert abs(r - 0.81) < 3 * se


def test_regressors_single_node():
    u = _draws(make_profiles(0.01, 0.7, 1e-3), SpatialCorrelation.independent(1), 4, 50_000, 2)
    assert u.var() == pytest.approx(0.7, rel=0.02)
    assert abs(u.mean()) < 0.02


def test_non_psd_correlation_rejected():
    bad = SpatialCorrelation(np.array([[1.0, 0.9, -0.9], [0.9, 1.0, 0.9], [-0.9, 0.9, 1.0]]))
    with pytest.raises(ValueError, match="eigenvalue"):
        regressor_factor(np.ones(3), bad)


def test_single_node_against_closed_form():
    curve = run_diffusion(SINGLE, make_profiles(0.1, 1.0, 0.01), SpatialCorrelation.independent(1),
                          TrueParameter.normalized_ones(2), CombiningRule("uniform"), ErrorModel(np.zeros((1, 1))),
                          5000, 50, seed=1)
    assert curve.local[0, 0] == pytest.approx(1.0, abs=1e-15)
    local, glob = steady_state_estimate(curve, 500)
    assert abs(to_db(glob) - to_db(1.25e-3)) < 0.5


def test_determinism_and_seed_sensitivity(five_node):
    f = five_node
    args = (f["topo"], f["profiles"], f["corr"], f["w_o"], f["rule"], uniform_error_model(f["topo"], 0.3), 300, 4)
    a = run_diffusion(*args, seed=5)
    b = run_diffusion(*args, seed=5)
    c = run_diffusion(*args, seed=6)
    assert np.array_equal(a.local, b.local)
    assert not np.array_equal(a.local, c.local)
    assert np.allclose(a.global_msd, a.local.mean(axis=1))
    assert np.all(a.local >= 0)
    with pytest.raises(ValueError):
        run_diffusion(*args[:-2], 0, 4)


def test_p1_node_unaffected_by_other_nodes():
    topo = build_from_adjacency([[0, 1, 1], [1, 0, 1], [1, 1, 0]])
    corr = SpatialCorrelation.index(0.0, 3)
    w = TrueParameter.normalized_ones(3)
    err = uniform_error_model(topo, 1.0)
    a = run_diffusion(topo, make_profiles([0.05, 0.02, 0.03], 1.0, [1e-3, 1e-2, 1e-4]), corr, w,
                      CombiningRule("metropolis"), err, 400, 8, seed=11)
    b = run_diffusion(topo, make_profiles([0.05, 0.07, 0.01], 1.0, [1e-3, 5e-3, 1e-2]), corr, w,
                      CombiningRule("uniform"), err, 400, 8, seed=11)
    assert np.array_equal(a.local[:, 0], b.local[:, 0])


def test_p1_matches_standalone():
    topo = build_from_adjacency([[0, 1, 1], [1, 0, 1], [1, 1, 0]])
    prof = make_profiles([0.05, 0.02, 0.03], [1.0, 0.6, 1.4], [1e-3, 1e-2, 1e-4])
    curve = run_diffusion(topo, prof, SpatialCorrelation.index(0.5, 3), TrueParameter.normalized_ones(2),
                          CombiningRule("relative_degree"), uniform_error_model(topo, 1.0), 3000, 60, seed=2)
    local, _ = steady_state_estimate(curve, 1000)
    assert np.all(np.abs(to_db(local) - to_db(standalone_msd(prof, 2))) < 0.5)


def test_against_plain_loop_simulator():
    topo = build_from_adjacency([[0, 1, 0], [1, 0, 1], [0, 1, 0]])
    mu, su2, sv2 = [0.05, 0.04, 0.06], [1.0, 0.8, 1.2], [1e-3, 3e-3, 1e-2]
    w_o = TrueParameter.normalized_ones(2)
    fast = run_diffusion(topo, make_profiles(mu, su2, sv2), SpatialCorrelation.index(0.3, 3), w_o,
                         CombiningRule("relative_variance"), uniform_error_model(topo, 0.5), 1500, 40, seed=3)
    slow = naive_diffusion(topo, mu, su2, sv2, 0.3, w_o.w_o, "relative_variance", 0.5, 1500, 40, seed=4)
    a = fast.local[-800:].mean(axis=0)
    b = slow[-800:].mean(axis=0)
    assert np.all(np.abs(to_db(a) - to_db(b)) < 0.5)



def test_transient_against_plain_loop_simulator_and_theory():
    topo = build_from_adjacency([[0, 1, 0], [1, 0, 1], [0, 1, 0]])
    mu, su2, sv2 = [0.05, 0.04, 0.06], [1.0, 0.8, 1.2], [1e-3, 3e-3, 1e-2]
    w_o = TrueParameter.normalized_ones(2)
    prof, corr = make_profiles(mu, su2, sv2), SpatialCorrelation.index(0.3, 3)
    rule, err = CombiningRule("relative_variance"), uniform_error_model(topo, 0.5)
    fast = run_diffusion(topo, prof, corr, w_o, rule, err, 20, 400, seed=3)
    slow = naive_diffusion(topo, mu, su2, sv2, 0.3, w_o.w_o, "relative_variance", 0.5, 20, 400, seed=4)
    s = build_moment_system(scalar_coefficients(prof, corr, 2), weight_moments(rule, topo, err, np.array(sv2)))
    th = transient_theory_curve(s, w_o, 20).local
    for i in (1, 5, 10, 20):
        assert np.all(np.abs(to_db(fast.local[i]) - to_db(th[i])) < 0.3)
        assert np.all(np.abs(to_db(slow[i]) - to_db(th[i])) < 0.3)


def test_simulation_close_to_theory(five_node):
    f = five_node
    err = uniform_error_model(f["topo"], 0.3)
    curve = run_diffusion(f["topo"], f["profiles"], f["corr"], f["w_o"], f["rule"], err, 6000, 30, seed=8)
    local, _ = steady_state_estimate(curve, 2000)
    th = theory_msd(f["topo"], f["profiles"], f["corr"], f["w_o"], f["rule"], err).local
    assert np.all(np.abs(to_db(local) - to_db(th)) < 0.5)


def test_noise_free_single_node_decays():
    curve = run_diffusion(SINGLE, make_profiles(0.1, 1.0, 0.0), SpatialCorrelation.independent(1),
                          TrueParameter.normalized_ones(4), CombiningRule("uniform"), ErrorModel(np.zeros((1, 1))),
                          600, 20, seed=0)
    checkpoints = curve.local[:400:50, 0]  # before the float64 floor
    assert np.all(np.diff(checkpoints) < 0)
    assert checkpoints[-1] < 1e-10


def test_mean_weights_approach_true_vector(five_node):
    f = five_node
    curve = run_diffusion(f["topo"], f["profiles"], f["corr"], f["w_o"], f["rule"], uniform_error_model(f["topo"], 0.3),
                          3000, 30, seed=2, track_mean=True)
    d = curve.mean_dev.mean(axis=1)
    assert d[0] == pytest.approx(1.0)
    assert d[500] < d[100] < d[0]
    assert d[-1] < 0.05


def test_steady_state_estimate_contract():
    c = LearningCurve(local=np.full((11, 2), 0.25), runs=1)
    local, glob = steady_state_estimate(c, 7)
    assert np.all(local == 0.25) and glob == 0.25
    ramp = LearningCurve(local=np.arange(11.0)[:, None] * np.ones((1, 2)), runs=1)
    assert np.all(steady_state_estimate(ramp, 1)[0] == 10.0)
    steady_state_estimate(c, 10)
    with pytest.raises(ValueError):
        steady_state_estimate(c, 11)
    with pytest.raises(ValueError):
        steady_state_estimate(c, 0)


def test_window_doubling_is_stable(five_node):
    f = five_node
    curve = run_diffusion(f["topo"], f["profiles"], f["corr"], f["w_o"], f["rule"], uniform_error_model(f["topo"], 0.3),
                          8000, 40, seed=4)
    _, g1 = steady_state_estimate(curve, 1000)
    _, g2 = steady_state_estimate(curve, 2000)
    assert abs(to_db(g1) - to_db(g2)) < 0.1
