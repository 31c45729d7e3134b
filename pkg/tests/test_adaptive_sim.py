"""Adaptation schedules, minorized families, and the simulation harness."""
import math
import os

import numpy as np
import pytest

from mixbound import (
    AdaptationSchedule,
    Distribution,
    DomainError,
    FiniteSpace,
    MarkovKernel,
    MinorizedFamily,
    NonConvergence,
    PreconditionFailed,
    SpaceMismatch,
    build_minorized_family,
    check_assumptions,
    empirical_measure,
    estimate_n0,
    simulate,
    simulate_spec,
    simulate_spec_batch,
    stationary_distribution,
    verify_certificate,
)

STATES = FiniteSpace(("a", "b"))
INDICES = FiniteSpace(("g0", "g1"))
HALF = Distribution(STATES, [0.5, 0.5])


def small_family(m0: float = 0.5) -> MinorizedFamily:
    res = {
        "g0": [[0.9, 0.1], [0.2, 0.8]],
        "g1": [[0.5, 0.5], [0.4, 0.6]],
    }
    return build_minorized_family(STATES, INDICES, m0, HALF, res)


# --- schedules -------------------------------------------------------------------

def test_freeze_time_values():
    assert AdaptationSchedule(0.5, 2.0, "g0", "g1").freeze_time() == 0
    assert AdaptationSchedule(8.0, 1.5, "g0", "g1").freeze_time() == 4
    assert AdaptationSchedule(27.0, 3.0, "g0", "g1").freeze_time() == 3


def test_gamma_indices_path():
    sched = AdaptationSchedule(4.0, 2.0, "g0", "g1")
    # moves allowed while c * t^-alpha >= 1, so t = 1, 2 only
    assert sched.freeze_time() == 2
    path = sched.gamma_indices(6, INDICES)
    assert path[0] == INDICES.index("g0")
    assert all(g == INDICES.index("g1") for g in path[1:])
    assert sched.limit_label(INDICES) == "g1"


def test_gamma_indices_frozen_before_target():
    wide = FiniteSpace(("g0", "g1", "g2", "g3"))
    sched = AdaptationSchedule(1.0, 2.0, "g0", "g3")  # one move only
    path = sched.gamma_indices(5, wide)
    assert list(path) == [0, 1, 1, 1, 1]
    assert sched.limit_label(wide) == "g1"


def test_kappa_tail_oracle():
    # c = 1, alpha = 2, t = 1: sum over s >= 1 of s^-2 = pi^2 / 6
    sched = AdaptationSchedule(1.0, 2.0, "g0", "g1")
    assert sched.kappa_tail(1) == pytest.approx(math.pi**2 / 6.0, abs=1e-6)
    assert math.isinf(AdaptationSchedule(1.0, 1.0, "g0", "g1").kappa_tail(1))
    assert math.isinf(AdaptationSchedule(1.0, 0.5, "g0", "g1").kappa_tail(1))


def test_to_rules_are_point_masses():
    sched = AdaptationSchedule(4.0, 2.0, "g0", "g1")
    rules = sched.to_rules(STATES, INDICES, 5)
    assert len(rules) == 4
    path = sched.gamma_indices(5, INDICES)
    for step, rule in enumerate(rules):
        want = path[step + 1]
        for x in range(len(STATES)):
            for g in range(len(INDICES)):
                expect = np.zeros(len(INDICES))
                expect[want] = 1.0
                assert np.allclose(rule.probs[x, g], expect)


def test_schedule_validation():
    with pytest.raises(DomainError):
        AdaptationSchedule(-1.0, 2.0, "g0", "g1")
    with pytest.raises(DomainError):
        AdaptationSchedule(1.0, 0.0, "g0", "g1")


# --- minorized families ------------------------------------------------------------

def test_family_kernel_formula():
    fam = small_family(0.5)
    k = fam.kernel("g0")
    want = 0.5 * np.array([0.5, 0.5]) + 0.5 * np.array([[0.9, 0.1], [0.2, 0.8]])
    assert np.allclose(k.matrix, want)


def test_family_kappa_respects_minorization():
    for m0 in (0.2, 0.5, 1.0):
        fam = small_family(m0)
        assert fam.kappa() <= 1.0 - m0 + 1e-12
    assert small_family(1.0).kappa() == pytest.approx(0.0, abs=1e-12)


def test_family_validation():
    eye = [[1, 0], [0, 1]]
    with pytest.raises(DomainError):
        build_minorized_family(STATES, INDICES, 1.5, HALF, {"g0": eye, "g1": eye})
    with pytest.raises(SpaceMismatch):
        build_minorized_family(STATES, INDICES, 0.5, HALF, {"g0": eye})


def test_stationary_distribution():
    kern = MarkovKernel(STATES, STATES, [[0.9, 0.1], [0.2, 0.8]])
    pi = stationary_distribution(kern)
    assert np.allclose(pi.weights, [2.0 / 3.0, 1.0 / 3.0])


def test_stationary_distribution_periodic_failure():
    # bipartite chain: mass on "a" oscillates between 1/3 and 2/3 forever
    space = FiniteSpace(("a", "b", "c"))
    kern = MarkovKernel(
        space, space, [[0.0, 0.3, 0.7], [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]
    )
    with pytest.raises(NonConvergence):
        stationary_distribution(kern, max_iter=2000)


# --- simulation -------------------------------------------------------------------

def test_simulate_is_deterministic_per_seed():
    fam = small_family()
    sched = AdaptationSchedule(4.0, 2.0, "g0", "g1")
    a = simulate(fam, sched, 50, seed=11)
    b = simulate(fam, sched, 50, seed=11)
    assert a == b
    c = simulate(fam, sched, 50, seed=12)
    assert a != c


def test_simulate_replicates_are_independent_streams():
    fam = small_family()
    sched = AdaptationSchedule(4.0, 2.0, "g0", "g1")
    spec = fam.spec(sched, 40, HALF)
    states, gammas = simulate_spec_batch(spec, seed=5, replicates=6)
    for r in range(6):
        st, ga = simulate_spec(spec, seed=5, replicate=r)
        assert np.array_equal(states[r], [STATES.index(s) for s in st])
        assert np.array_equal(gammas[r], [INDICES.index(g) for g in ga])


def test_iid_family_marginal_frequency():
    # m0 = 1 collapses every kernel to xi: the chain is iid xi
    fam = build_minorized_family(
        STATES, INDICES, 1.0, Distribution(STATES, [0.7, 0.3]),
        {"g0": [[1, 0], [0, 1]], "g1": [[1, 0], [0, 1]]},
    )
    sched = AdaptationSchedule(0.0, 2.0, "g0", "g1")
    n, reps = 200, 50
    hits = 0
    total = 0
    for r in range(reps):
        states, _ = simulate(fam, sched, n, seed=77, replicate=r)
        hits += sum(1 for s in states if s == "a")
        total += n
    freq = hits / total
    sigma = math.sqrt(0.7 * 0.3 / total)
    assert abs(freq - 0.7) <= 4.0 * sigma


def test_empirical_measure_counts():
    fam = small_family()
    sched = AdaptationSchedule(0.0, 2.0, "g0", "g1")
    states, _ = simulate(fam, sched, 30, seed=3)
    freq = empirical_measure(states, {"a"})
    assert freq == pytest.approx(sum(1 for s in states if s == "a") / 30)
    with pytest.raises(DomainError):
        empirical_measure([], {"a"})


# --- verification ------------------------------------------------------------------

def test_estimate_n0_reports_decay():
    fam = small_family()
    sched = AdaptationSchedule(4.0, 2.0, "g0", "g1")
    n0, info = estimate_n0(fam, sched, {"a"}, 0.02, replicates=400, seed=1,
                           max_n=64)
    assert 1 <= n0 <= 64
    assert info["grid"][0] == 1 and info["grid"][-1] == 64
    assert len(info["means"]) == len(info["grid"])
    assert 0.0 <= info["pi_value"] <= 1.0


def test_verify_certificate_runs_and_reports():
    fam = small_family()
    sched = AdaptationSchedule(4.0, 2.0, "g0", "g1")
    report, deviations = verify_certificate(
        fam, sched, {"a"}, t=0.15, epsilon=0.02, n=400, replicates=500, seed=3,
    )
    assert report.verdict in ("pass", "fail")
    assert len(deviations) == 500
    assert report.horizon == 400
    assert report.theta == pytest.approx(0.5)
    assert report.bound > 0.0
    d = report.to_json_dict()
    assert d["kind"] == "simulation_report"
    assert d["n"] == 400
    assert d["replicates"] == 500


def test_verify_certificate_profile_route():
    fam = small_family()
    sched = AdaptationSchedule(0.0, 2.0, "g0", "g1")
    r_min, _ = verify_certificate(
        fam, sched, {"a"}, t=0.2, epsilon=0.02, n=300, replicates=300, seed=4,
        theta_source="minorization",
    )
    r_prof, _ = verify_certificate(
        fam, sched, {"a"}, t=0.2, epsilon=0.02, n=300, replicates=300, seed=4,
        theta_source="profile",
    )
    # exact kernel contraction is never looser than 1 - m0
    assert r_prof.theta <= r_min.theta + 1e-12
    assert r_prof.frequency == r_min.frequency
    with pytest.raises(DomainError):
        verify_certificate(
            fam, sched, {"a"}, t=0.2, epsilon=0.02, n=300, replicates=300,
            seed=4, theta_source="oracle",
        )


def test_verify_certificate_precondition():
    fam = small_family()
    sched = AdaptationSchedule(4.0, 2.0, "g0", "g1")
    with pytest.raises(PreconditionFailed):
        verify_certificate(
            fam, sched, {"a"}, t=0.15, epsilon=0.02, n=50, replicates=100,
            seed=3, n0=50,
        )
    with pytest.raises(PreconditionFailed):
        # horizon too small for any bias estimate to settle
        verify_certificate(
            fam, sched, {"a"}, t=0.15, epsilon=0.02, n=2, replicates=100, seed=3,
        )


def test_check_assumptions_summability():
    fam = small_family()
    fast = check_assumptions(fam, AdaptationSchedule(1.0, 1.5, "g0", "g1"))
    slow = check_assumptions(fam, AdaptationSchedule(1.0, 1.0, "g0", "g1"))
    bare = check_assumptions(fam, None)
    assert fast.decay_summable is True
    assert slow.decay_summable is False
    assert bare.decay_summable is None
    assert fast.minorization_ok is True
    assert fast.m0_declared == pytest.approx(0.5)
    assert fast.m0_common >= 0.5 - 1e-12
    assert fast.lambda_sup == 0.0
    assert bare.lambda_sup is None
    assert fast.feller_ok is True
    assert fast.to_json_dict()["kind"] == "assumption_report"


def test_check_assumptions_plain_dict():
    fam = small_family()
    report = check_assumptions(fam.kernels())
    assert report.m0_declared is None
    assert report.minorization_ok is True
    assert report.kappa <= 0.5 + 1e-12


def test_thread_env_does_not_change_results():
    fam = small_family()
    sched = AdaptationSchedule(4.0, 2.0, "g0", "g1")
    spec = fam.spec(sched, 64, HALF)
    old = os.environ.get("MIXBOUND_THREADS")
    try:
        os.environ["MIXBOUND_THREADS"] = "1"
        s1, g1 = simulate_spec_batch(spec, seed=9, replicates=8)
        os.environ["MIXBOUND_THREADS"] = "2"
        s2, g2 = simulate_spec_batch(spec, seed=9, replicates=8)
    finally:
        if old is None:
            os.environ.pop("MIXBOUND_THREADS", None)
        else:
            os.environ["MIXBOUND_THREADS"] = old
    assert np.array_equal(s1, s2)
    assert np.array_equal(g1, g2)
