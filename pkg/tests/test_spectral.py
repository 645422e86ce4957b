import math

import numpy as np
import pytest

from qdesign.liouville import build_liouvillean
from qdesign.model import PAULI, ChainSpec, SystemSpec, chain_system, counterexample_system
from qdesign.spectral import (chain_gap, expander_distance_semigroup, gap_scaling_fit,
                              gap_vs_q_scan, measured_mixing_time, mixing_bounds, sigma_s,
                              singular_gap, spectral_gap, strong_gap_formula)


def test_counterexample_gaps():
    s = counterexample_system(0.1, 1.0)
    assert abs(spectral_gap(build_liouvillean(s, 1)).lambda_star - 0.45) < 0.02
    assert abs(spectral_gap(build_liouvillean(s, 2), with_kappa=False).lambda_star - 0.05) < 0.02


def test_strong_chain_gap_L10():
    lam = chain_gap(10, 100.0)
    assert abs(strong_gap_formula(10, 100.0) - 7.639e-4) < 1e-6
    assert abs(lam - strong_gap_formula(10, 100.0)) / lam < 0.02


def test_report_fields():
    rep = spectral_gap(build_liouvillean(chain_system(3, 1.0), 1))
    assert rep.steady_dim == 1 and not rep.flags
    assert rep.kappa >= 1
    w = rep.eigenvalues
    nz = np.abs(w.real)[np.abs(w.real) > rep.zero_tol]
    assert rep.lambda_star == pytest.approx(nz.min())
    assert np.all(np.diff(w.real) <= 1e-12)


def test_steady_mismatch_flag():
    # uncontrollable chain has a larger steady space than the permutation span
    rep = spectral_gap(build_liouvillean(chain_system(ChainSpec(3, 2), 1.0), 1))
    assert rep.steady_dim > 1
    assert any("gram rank" in f for f in rep.flags)


def test_singular_gap_hermitian_generator():
    s = SystemSpec(np.zeros((2, 2)), PAULI["Z"], 1.0)  # pure dephasing, normal generator
    Lq = build_liouvillean(s, 1)
    rep = spectral_gap(Lq, with_kappa=False)
    for t in (0.1, 1.0, 5.0):
        s_star, delta = singular_gap(Lq, t, rep)
        assert delta < 1e-10


def test_singular_gap_strong_L10():
    Lq = build_liouvillean(chain_system(10, 100.0), 1)
    rep = spectral_gap(Lq, with_kappa=False)
    for f in (0.5, 1.0, 2.0):
        assert singular_gap(Lq, f / rep.lambda_star, rep)[1] < 0.05


def test_singular_gap_long_time():
    Lq = build_liouvillean(chain_system(4, 1.0), 1)
    rep = spectral_gap(Lq, with_kappa=False)
    t = 10 / rep.lambda_star
    s_star, _ = singular_gap(Lq, t, rep)
    assert abs(s_star * math.exp(t * rep.lambda_star) - 1) < 0.01 or \
        abs(math.log(s_star) / t + rep.lambda_star) / rep.lambda_star < 0.05


def test_singular_gap_matrix_free():
    from qdesign.algebra import NumericPolicy
    s = chain_system(3, 1.0)
    dense = build_liouvillean(s, 1)
    rep = spectral_gap(dense, with_kappa=False)
    pol = NumericPolicy(dense_cap=4)
    free = build_liouvillean(s, 1, pol)
    a = singular_gap(dense, 2.0, rep)
    b = singular_gap(free, 2.0, rep, pol)
    assert abs(a[0] - b[0]) < 1e-6


def test_singular_gap_rejects_nonpositive_t():
    Lq = build_liouvillean(chain_system(3, 1.0), 1)
    with pytest.raises(ValueError):
        singular_gap(Lq, 0.0)


def test_mixing_bounds_examples():
    rep = spectral_gap(build_liouvillean(chain_system(2, 1.0), 1))
    rep.kappa = 1.0
    m = mixing_bounds(rep, 1, 2)
    assert m.t_upper == pytest.approx(4 * math.log(2) / rep.lambda_star)
    assert mixing_bounds(rep, 2, 2).t_lower == pytest.approx(2 * m.t_lower)
    rep.kappa = 1 + 1e-6
    m2 = mixing_bounds(rep, 1, 2)
    assert abs(m2.t_upper - m.t_upper) / m.t_upper < 1e-5
    assert m.t_lower <= m.t_upper


@pytest.mark.parametrize("sys", [chain_system(3, 1.0), chain_system(3, 20.0),
                                 counterexample_system(0.1, 1.0)])
def test_measured_mixing_within_bounds(sys):
    Lq = build_liouvillean(sys, 1)
    rep = spectral_gap(Lq)
    m = mixing_bounds(rep, 1, sys.dim)
    t = measured_mixing_time(Lq, report=rep)
    assert m.t_lower <= t <= m.t_upper


def test_gap_vs_q():
    rows, flags = gap_vs_q_scan(chain_system(4, 100.0), 2)
    assert abs(rows[0][1] - rows[1][1]) <= 1e-8 * rows[0][1]
    rows, _ = gap_vs_q_scan(chain_system(3, 0.5), 2)
    assert abs(rows[0][1] - rows[1][1]) <= 1e-6 * rows[0][1]
    rows, _ = gap_vs_q_scan(counterexample_system(0.1, 1.0), 2)
    assert rows[1][1] < rows[0][1] / 4
    rows, flags = gap_vs_q_scan(chain_system(5, 1.0), 3)
    assert len(rows) == 2 and flags


@pytest.mark.parametrize("sigma", [0.01, 2.0, 100.0])
@pytest.mark.parametrize("L", [3, 4])
def test_q_invariance(L, sigma):
    g1 = chain_gap(L, sigma, 1)
    g2 = chain_gap(L, sigma, 2)
    assert abs(g1 - g2) <= 1e-6 * g1


def test_scaling_fit_strong():
    slope, pref = gap_scaling_fit(list(range(6, 15)), 100.0)
    assert abs(slope + 3) <= 0.1


def test_scaling_fit_needs_four_lengths():
    with pytest.raises(ValueError):
        gap_scaling_fit([4, 5, 6], 1.0)


def test_expander_distance_semigroup():
    Lq = build_liouvillean(chain_system(3, 1.0), 1)
    lam = spectral_gap(Lq, with_kappa=False).lambda_star
    assert expander_distance_semigroup(Lq, 0.0) == pytest.approx(1.0)
    assert expander_distance_semigroup(Lq, 20 / lam) < 1e-6
    ts = np.linspace(0, 10 / lam, 15)
    e = [expander_distance_semigroup(Lq, t) for t in ts]
    assert np.all(np.diff(e) <= 1e-12)


def test_sigma_s_threshold():
    sig = np.geomspace(1, 1e3, 13)
    s = sigma_s(4, sig)
    assert np.isfinite(s)
    assert abs(chain_gap(4, s) - strong_gap_formula(4, s)) / strong_gap_formula(4, s) < 0.01
