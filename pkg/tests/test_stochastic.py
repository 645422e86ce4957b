import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from qdesign.algebra import expm
from qdesign.liouville import build_liouvillean, haar_projector
from qdesign.model import SystemSpec, chain_system
from qdesign.spectral import spectral_gap
from qdesign.stochastic import (PulseBatch, PulseProcess, StepExponential, angle_compose,
                                angle_decompose, empirical_correlation, ensemble_from_unitaries,
                                expander_distance_mc, haar_sample, markov_check, propagate,
                                qq_tensor, read_channel_blob, run_unitaries, sample_pulse,
                                sigma_from_correlation, step_bound, trajectory_rng,
                                uniformity_histogram, write_channel_blob)

from conftest import random_hermitian


def _random_system(rng, d=3):
    return SystemSpec(random_hermitian(rng, d), random_hermitian(rng, d), 0.0)


# pulses ---------------------------------------------------------------------

def test_constant_pulse():
    p = PulseProcess(K=1, amplitude=(1, 1), frequency=(0, 0), phase=(0, 0))
    g = sample_pulse(p)
    np.testing.assert_allclose(g(np.linspace(0, 10, 7)), 1.0)


def test_pulse_deterministic_in_seed_and_index():
    p = PulseProcess(K=10, seed=42)
    t = np.linspace(0, 3, 11)
    np.testing.assert_array_equal(sample_pulse(p, 5)(t), sample_pulse(p, 5)(t))
    batch = PulseBatch.draw(p, [3, 4, 5])
    np.testing.assert_array_equal(batch(t)[2], sample_pulse(p, 5)(t))
    assert not np.array_equal(sample_pulse(p, 4)(t), sample_pulse(p, 5)(t))
    a = trajectory_rng(1, 2).uniform(size=4)
    np.testing.assert_array_equal(a, trajectory_rng(1, 2).uniform(size=4))


def test_pulse_mean_zero():
    n = 10_000
    p = PulseProcess(K=20, phase=(0, 2 * math.pi), seed=1)
    g = PulseBatch.draw(p, np.arange(n))(np.array([0.3, 1.7]))
    se = g.std(axis=0) / math.sqrt(n)
    assert np.all(np.abs(g.mean(axis=0)) < 3 * se)


def test_pulse_stationary_correlation():
    n, s = 10_000, 0.2
    p = PulseProcess(K=20, frequency=(-3, 3), phase=(0, 2 * math.pi), seed=2)
    b = PulseBatch.draw(p, np.arange(n))
    vals = []
    for t in (0.0, 2.5):
        prod = b(np.array([t + s]))[:, 0] * b(np.array([t]))[:, 0]
        vals.append((prod.mean(), prod.std() / math.sqrt(n)))
    (m0, e0), (m1, e1) = vals
    assert abs(m0 - m1) < 3 * math.hypot(e0, e1)
    assert abs(m0 - p.correlation(s)) < 3 * e0


def test_midpoints_match_direct_evaluation():
    p = PulseProcess(K=7, seed=3)
    b = PulseBatch.draw(p, [0, 1])
    dt = 0.013
    got = np.array(list(b.midpoints(dt, 600, chunk=256)))
    ref = b((np.arange(600) + 0.5) * dt).T
    np.testing.assert_allclose(got, ref, atol=1e-11)


def test_piecewise_values_hold():
    p = PulseProcess.white(1.0, 0.1, seed=4)
    g = sample_pulse(p)
    assert g(np.array([0.01]))[0] == g(np.array([0.09]))[0]
    assert abs(g(np.array([0.05]))[0]) <= p.max_abs()


def test_invalid_process():
    with pytest.raises(ValueError):
        PulseProcess(K=0)
    with pytest.raises(ValueError):
        PulseProcess(kind="other")


# propagation --------------------------------------------------------------------

def test_step_exponential_matches_expm(rng):
    s = _random_system(rng, 4)
    se = StepExponential(s.H, s.V, 0.01, 3.0)
    g = np.array([-3.0, -1.2, 0.0, 0.7, 3.0])
    for gi, E in zip(g, se(g)):
        np.testing.assert_allclose(E, expm(-1j * 0.01 * (s.H + gi * s.V)), atol=1e-12)


def test_zero_pulse_free_evolution(rng):
    s = _random_system(rng)
    tr = propagate(s, lambda t: np.zeros_like(t), 2.0, 0.01)
    np.testing.assert_allclose(tr.U, expm(-2j * s.H), atol=1e-10)
    assert tr.unitarity_drift <= 1e-8


def test_second_order_convergence(rng):
    s = _random_system(rng)
    g = sample_pulse(PulseProcess(K=3, amplitude=(-1, 1), frequency=(-2, 2), seed=9))
    T = 1.0
    Us = [propagate(s, g, T, dt).U for dt in (0.01, 0.005, 0.0025)]
    e1 = np.linalg.norm(Us[0] - Us[1])
    e2 = np.linalg.norm(Us[1] - Us[2])
    assert 3.0 < e1 / e2 < 5.0


def test_commuting_case():
    V = np.diag([0.3, -1.0, 2.0])
    s = SystemSpec(np.zeros((3, 3)), V, 0.0)
    T, dt = 3.0, 0.001
    tr = propagate(s, np.cos, T, dt)
    np.testing.assert_allclose(tr.U, np.diag(np.exp(-1j * np.diag(V) * math.sin(T))), atol=1e-6)


def test_propagate_rejects_large_step(rng):
    s = _random_system(rng)
    with pytest.raises(ValueError):
        propagate(s, lambda t: np.ones_like(t), 1.0, 10 * step_bound(s, 1.0))
    with pytest.raises(ValueError):
        propagate(s, lambda t: np.ones_like(t), 1.0, 0.3)


def test_batch_matches_single_trajectory():
    s = chain_system(3, 0.0)
    p = PulseProcess.chain_default(3, seed=5, K=10)
    dt = 0.01
    Us, _ = run_unitaries(s, p, [1.0], dt, 8)
    single = propagate(s, sample_pulse(p, 6), 1.0, dt).U
    np.testing.assert_allclose(Us[0][6], single, atol=1e-12)
    sub, _ = run_unitaries(s, p, [1.0], dt, 2, first_index=6)
    np.testing.assert_allclose(sub[0][0], Us[0][6], atol=1e-12)
    again, _ = run_unitaries(s, p, [1.0], dt, 8)
    np.testing.assert_array_equal(again[0], Us[0])


# ensembles ---------------------------------------------------------------------

def test_qq_tensor_shape_and_unitarity(rng):
    U = haar_sample(3, rng)
    T = qq_tensor(U, 2)
    assert T.shape == (81, 81)
    np.testing.assert_allclose(T @ T.conj().T, np.eye(81), atol=1e-12)
    np.testing.assert_allclose(qq_tensor(U, 1), np.kron(U, U.conj()), atol=1e-15)


def test_single_unitary_channel(rng):
    U = haar_sample(3, rng, 1)
    ens = ensemble_from_unitaries(U, 1)
    np.testing.assert_allclose(ens.channel_estimate, qq_tensor(U[0], 1), atol=1e-15)


def test_zero_time_is_identity_channel():
    s = chain_system(3, 0.0)
    Us, _ = run_unitaries(s, PulseProcess.chain_default(3, seed=1, K=5), [0.0], 0.01, 50)
    ens = ensemble_from_unitaries(Us[0], 2)
    np.testing.assert_allclose(ens.channel_estimate, np.eye(81), atol=1e-15)
    dist, _ = expander_distance_mc(ensemble_from_unitaries(Us[0], 1), 3)
    assert dist == pytest.approx(1.0, abs=1e-12)


def test_channel_trace_preserving_on_average():
    s = chain_system(3, 0.0)
    Us, _ = run_unitaries(s, PulseProcess.white(1.0, 0.05, seed=2), [3.0], 0.01, 500)
    ens = ensemble_from_unitaries(Us[0], 1)
    I = np.eye(3).reshape(-1)
    # vec(I)^T E = vec(I)^T for every unitary channel in this layout
    np.testing.assert_allclose(I @ ens.channel_estimate, I, atol=1e-10)
    assert ens.standard_error >= 0 and ens.noise_norm > 0


def test_copies_do_not_factorize():
    s = chain_system(3, 0.0)
    Us, _ = run_unitaries(s, PulseProcess.white(1.0, 0.05, seed=3), [4.0], 0.01, 400)
    U = Us[0]
    e2 = ensemble_from_unitaries(U, 2).channel_estimate
    e1 = ensemble_from_unitaries(U, 1).channel_estimate
    d = 3
    # e1 ⊗ e1 reordered to the (U, U, U*, U*) layout of the q=2 tensor
    f = np.kron(e1, e1).reshape([d] * 8).transpose(0, 2, 1, 3, 4, 6, 5, 7).reshape(81, 81)
    single = np.kron(qq_tensor(U[0], 1), qq_tensor(U[0], 1))
    single = single.reshape([d] * 8).transpose(0, 2, 1, 3, 4, 6, 5, 7).reshape(81, 81)
    np.testing.assert_allclose(single, qq_tensor(U[0], 2), atol=1e-12)
    assert np.linalg.norm(e2 - f, 2) > 5 * ensemble_from_unitaries(U, 2).noise_norm


def test_semigroup_oracle_L3():
    s = chain_system(3, 0.0)
    p = PulseProcess.white(1.0, 0.05, seed=6)
    Us, _ = run_unitaries(s, p, [30.0], 0.01, 2000)
    ens = ensemble_from_unitaries(Us[0], 1)
    ref = expm(30.0 * build_liouvillean(chain_system(3, p.sigma_eff()), 1).matrix)
    assert abs(np.linalg.norm(ens.channel_estimate, 2) - np.linalg.norm(ref, 2)) < 3 * ens.standard_error + 1e-12
    assert np.linalg.norm(ens.channel_estimate - ref, 2) < 5 * ens.noise_norm


def test_channel_blob_roundtrip(tmp_path, rng):
    M = rng.standard_normal((5, 7)) + 1j * rng.standard_normal((5, 7))
    path = tmp_path / "c.bin"
    write_channel_blob(path, M)
    assert path.stat().st_size == 16 + 16 * 35
    np.testing.assert_array_equal(read_channel_blob(path), M)


# Markov limit --------------------------------------------------------------------

def test_sigma_recovery_piecewise():
    n, dt = 400, 0.01
    p = PulseProcess.white(0.5, 0.05, seed=7)
    b = PulseBatch.draw(p, np.arange(n))
    path = np.array(list(b.midpoints(dt, 4000)))
    lags, c = empirical_correlation(path, dt, max_lag=50)
    assert sigma_from_correlation(lags, c) == pytest.approx(0.5, rel=0.1)


def test_empirical_correlation_lag_zero():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((1000, 3))
    lags, c = empirical_correlation(x, 0.1, max_lag=5)
    assert c[0] == pytest.approx(np.mean(x**2))
    np.testing.assert_allclose(lags, 0.1 * np.arange(6))


def test_markov_white_noise():
    r = markov_check(chain_system(3, 0.0), PulseProcess.white(1.0, 0.05, seed=8), 1,
                     [5.0, 15.0], 2000, dt=0.01)
    assert r.sigma_eff == pytest.approx(1.0, rel=0.1)
    for T, disc, noise, ratio in r.rows:
        assert ratio < 5


def test_markov_single_tone_fails():
    p = PulseProcess(K=1, amplitude=(1, 1), frequency=(0.5, 0.5), phase=(0, 2 * math.pi), seed=3)
    r = markov_check(chain_system(3, 0.0), p, 1, [30.0], 1000)
    assert r.rows[0][3] > 10


def test_markov_improves_with_bandwidth():
    ratios = []
    for w, K in ((1, 5), (4, 20), (16, 80)):
        p = PulseProcess(K=K, frequency=(-w, w), phase=(0, 2 * math.pi), seed=4)
        ratios.append(markov_check(chain_system(3, 0.0), p, 1, [10.0], 1000).rows[0][1])
    assert ratios[0] >= ratios[1] >= ratios[2]


def test_expander_decay_rate():
    p = PulseProcess.white(1.0, 0.05, seed=5)
    lam = spectral_gap(build_liouvillean(chain_system(3, 1.0), 1)).lambda_star
    Us, _ = run_unitaries(chain_system(3, 0.0), p, [4.0, 8.0], 0.01, 4000)
    d4, d8 = (expander_distance_mc(ensemble_from_unitaries(U, 1), 3)[0] for U in Us)
    assert math.log(d4 / d8) / 4.0 == pytest.approx(lam, rel=0.2)


# Haar reference and angles -------------------------------------------------------

def test_haar_unitary(rng):
    U = haar_sample(4, rng, 50)
    err = np.abs(np.conj(np.swapaxes(U, -1, -2)) @ U - np.eye(4)).max()
    assert err < 1e-10


def test_haar_trace_moment():
    U = haar_sample(3, 11, 100_000)
    x = np.abs(np.trace(U, axis1=1, axis2=2)) ** 2
    assert abs(x.mean() - 1) < 3 * x.std() / math.sqrt(x.size)


def test_haar_first_twirl():
    n, d = 20_000, 3
    U = haar_sample(d, 12, n)
    T = qq_tensor(U, 1)
    mean = T.mean(axis=0)
    se = T.std(axis=0) / math.sqrt(n)
    P = haar_projector(d, 1).projector
    assert np.all(np.abs(mean - P) <= 3 * se + 1e-12)


def test_haar_expander_distance_rate():
    d1 = expander_distance_mc(ensemble_from_unitaries(haar_sample(3, 1, 1000), 1), 3)[0]
    d2 = expander_distance_mc(ensemble_from_unitaries(haar_sample(3, 2, 16000), 1), 3)[0]
    assert 2.0 < d1 / d2 < 8.0


def test_angle_identity_is_zero():
    np.testing.assert_allclose(angle_decompose(np.eye(4)), 0.0, atol=1e-12)
    assert angle_decompose(np.eye(4)).size == 16


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_angle_roundtrip(d, seed):
    U = haar_sample(d, seed)
    th = angle_decompose(U)
    assert th.shape == (d * d,)
    assert np.all((th >= 0) & (th < 2 * np.pi))
    np.testing.assert_allclose(angle_compose(th, d), U, atol=1e-8)


def test_angle_batched_roundtrip():
    U = haar_sample(3, 5, 20)
    np.testing.assert_allclose(angle_compose(angle_decompose(U), 3), U, atol=1e-8)


def test_angle_rejects_non_unitary():
    with pytest.raises(ValueError):
        angle_decompose(2 * np.eye(3))


def test_angles_uniform_under_haar():
    th = angle_decompose(haar_sample(3, 21, 10_000))
    for i in range(th.shape[1]):
        assert stats.kstest(th[:, i] / (2 * np.pi), "uniform").pvalue > 0.01


def test_histogram_uniform_input():
    x = np.random.default_rng(3).uniform(0, 2 * np.pi, (5000, 9))
    counts, chi2, pval = uniformity_histogram(x, 25)
    assert counts.shape == (9, 25) and counts.sum() == 5000 * 9
    assert chi2 < stats.chi2.ppf(0.99, 9 * 24)
    assert pval > 0.01


def test_histogram_needs_samples():
    with pytest.raises(ValueError):
        uniformity_histogram(np.zeros((50, 4)))
