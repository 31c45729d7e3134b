"""Martingale profiles, tail certificates, and sample-size inversion."""
import itertools
import math
from collections import defaultdict

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixbound import (
    ChainSpec,
    ConcentrationCertificate,
    Distribution,
    DomainError,
    FiniteSpace,
    MarkovKernel,
    MartingaleProfile,
    PathFunction,
    azuma_bound,
    azuma_certificate,
    check_mgale_bound,
    delta_exact,
    delta_norm,
    geometric_delta_norm,
    martingale_profile,
    materialize_chain,
    sample_size,
    slln_tail_bound,
)
from mixbound.concentration import (
    SOURCE_AZUMA,
    SOURCE_DELTA_CONTRACTION,
    SOURCE_DELTA_EXACT,
)
from mixbound.mixing import ContractionProfile, mmc_delta_bound
from mixbound.random_specs import random_chain_spec, random_values, rng_from


def martingale_sups_by_dicts(pm, f) -> tuple[list[float], list[float]]:
    """||V_i|| and ||Vhat_i|| from the raw path dictionary."""
    paths = dict(pm.paths())
    labels = pm.space.labels
    n = pm.horizon

    def cond_exp(prefix) -> float:
        mass = sum(p for path, p in paths.items() if path[: len(prefix)] == prefix)
        if mass <= 0.0:
            return None
        total = sum(
            p * f.value(path)
            for path, p in paths.items()
            if path[: len(prefix)] == prefix
        )
        return total / mass

    sups, hats = [], []
    for i in range(1, n + 1):
        sup = 0.0
        hat = 0.0
        for prefix in itertools.product(labels, repeat=i - 1):
            base = cond_exp(prefix)
            if base is None:
                continue
            values = []
            for w in labels:
                e = cond_exp(prefix + (w,))
                if e is not None:
                    values.append(e)
                    sup = max(sup, abs(e - base))
            if len(values) >= 2:
                hat = max(hat, max(values) - min(values))
        sups.append(sup)
        hats.append(hat)
    return sups, hats


# --- martingale profiles ------------------------------------------------------

def test_martingale_profile_iid_coin_count():
    space = FiniteSpace(("a", "b"))
    kern = MarkovKernel(space, space, [[0.5, 0.5], [0.5, 0.5]])
    spec = ChainSpec(space, 2, Distribution(space, [0.5, 0.5]), (kern,))
    pm = materialize_chain(spec)
    f = PathFunction(space, 2, [0.0, 1.0, 1.0, 2.0])  # counts of "b"
    profile = martingale_profile(pm, f)
    assert np.allclose(profile.sup_norms, [0.5, 0.5])
    assert np.allclose(profile.hat_sup_norms, [1.0, 1.0])


@settings(max_examples=20, deadline=None)
@given(
    seed=st.integers(0, 10_000),
    n=st.integers(1, 3),
    zeros=st.integers(0, 1),
)
def test_martingale_profile_matches_dict_oracle(seed, n, zeros):
    spec = random_chain_spec(rng_from(seed), 2, n, zeros=zeros)
    pm = materialize_chain(spec)
    f = PathFunction(spec.space, n, random_values(rng_from(seed, 1), 2**n, 2.0))
    profile = martingale_profile(pm, f)
    sups, hats = martingale_sups_by_dicts(pm, f)
    assert np.allclose(profile.sup_norms, sups, atol=1e-10)
    assert np.allclose(profile.hat_sup_norms, hats, atol=1e-10)


def test_martingale_profile_invariant():
    with pytest.raises(DomainError):
        MartingaleProfile(2, np.array([1.0, 1.0]), np.array([0.5, 1.0]))


def test_check_mgale_bound_on_random_chains():
    for seed in range(10):
        spec = random_chain_spec(rng_from(seed + 500), 2, 3)
        pm = materialize_chain(spec)
        f = PathFunction(spec.space, 3, random_values(rng_from(seed, 2), 8, 2.0))
        check = check_mgale_bound(pm, f, delta_exact(pm))
        assert check.ok
        assert check.min_slack >= -1e-9
        assert check.lipschitz == pytest.approx(f.lipschitz)


# --- Azuma ---------------------------------------------------------------------

def test_azuma_bound_closed_form():
    profile = MartingaleProfile(2, np.array([0.5, 0.5]), np.array([1.0, 1.0]))
    assert azuma_bound(profile, 1.0) == pytest.approx(2.0 * math.exp(-1.0))
    one = MartingaleProfile(1, np.array([1.0]), np.array([1.0]))
    assert azuma_bound(one, 1.0) == pytest.approx(2.0 * math.exp(-0.5))


def test_azuma_bound_edge_conventions():
    zero = MartingaleProfile(2, np.zeros(2), np.zeros(2))
    assert azuma_bound(zero, 0.0) == 2.0
    assert azuma_bound(zero, 0.5) == 0.0
    profile = MartingaleProfile(1, np.array([1.0]), np.array([1.0]))
    assert azuma_bound(profile, 0.0) == 2.0
    with pytest.raises(DomainError):
        azuma_bound(profile, -0.1)


def test_azuma_certificate_wraps_bound():
    profile = MartingaleProfile(1, np.array([1.0]), np.array([1.0]))
    cert = azuma_certificate(profile, 1.0)
    assert cert.source == SOURCE_AZUMA
    assert cert.delta_norm is None
    assert cert.bound == pytest.approx(2.0 * math.exp(-0.5))
    assert cert.to_json_dict()["clipped"] is True


# --- geometric norms -------------------------------------------------------------

def test_geometric_delta_norm_values():
    assert geometric_delta_norm(0.5, 4) == pytest.approx(1.875)
    assert geometric_delta_norm(0.0, 10) == 1.0
    assert geometric_delta_norm(1.0, 7) == 7.0
    assert geometric_delta_norm(0.5, None) == pytest.approx(2.0)
    with pytest.raises(DomainError):
        geometric_delta_norm(1.0, None)
    with pytest.raises(DomainError):
        geometric_delta_norm(-0.1, 5)


def test_geometric_norm_matches_uniform_profile_matrix():
    for theta in (0.0, 0.3, 0.7, 1.0):
        for n in (1, 2, 5):
            matrix = mmc_delta_bound(ContractionProfile((theta,) * (n - 1)))
            assert geometric_delta_norm(theta, n) == pytest.approx(
                delta_norm(matrix), abs=1e-12
            )


# --- certificates -----------------------------------------------------------------

def test_certificate_formula_is_enforced():
    with pytest.raises(DomainError):
        ConcentrationCertificate(
            source=SOURCE_DELTA_EXACT, n=10, t=0.1, epsilon=0.0,
            delta_norm=2.0, bound=0.5,
        )
    cert = slln_tail_bound(4000, 0.2, 0.02, 10.0 / 3.0)
    assert cert.bound == pytest.approx(2.0 * math.exp(-7.2))
    assert not cert.clipped
    assert cert.probability == cert.bound


def test_slln_tail_bound_edges():
    vacuous = slln_tail_bound(10, 0.0, 0.0, 1.0)
    assert vacuous.bound == 2.0
    assert vacuous.clipped
    assert vacuous.probability == 1.0
    with pytest.raises(DomainError):
        slln_tail_bound(10, 0.1, 0.0, 0.5)
    with pytest.raises(DomainError):
        slln_tail_bound(0, 0.1, 0.0, 1.0)


def test_delta_source_certificates_accept_contraction_norms():
    cert = slln_tail_bound(100, 0.1, 0.0, geometric_delta_norm(0.5, 100),
                           SOURCE_DELTA_CONTRACTION)
    assert cert.source == SOURCE_DELTA_CONTRACTION
    assert 0.0 < cert.bound < 2.0


# --- sample size -------------------------------------------------------------------

def test_sample_size_worked_values():
    assert sample_size(0.1, 0.0, 0.05, 0.0) == 738
    assert sample_size(0.1, 0.0, 0.05, 0.4) == 2050
    assert sample_size(0.1, 0.0, 2.0, 0.0) == 1
    assert sample_size(0.1, 0.0, 5.0, 0.9) == 1


def test_sample_size_domain():
    with pytest.raises(DomainError):
        sample_size(0.0, 0.0, 0.05, 0.0)
    with pytest.raises(DomainError):
        sample_size(0.1, 0.0, 0.0, 0.0)
    with pytest.raises(DomainError):
        sample_size(0.1, 0.0, 0.05, 1.0)


@settings(max_examples=60, deadline=None)
@given(
    t=st.floats(0.01, 0.9),
    delta=st.floats(1e-6, 1.99),
    theta=st.floats(0.0, 0.95),
)
def test_sample_size_round_trip(t, delta, theta):
    n = sample_size(t, 0.0, delta, theta)
    m_cap = 1.0 / (1.0 - theta)

    def tail(m: int) -> float:
        return 2.0 * math.exp(-(m * t * t) / (2.0 * m_cap * m_cap))

    assert tail(n) <= delta + 1e-12
    if n > 1:
        assert tail(n - 1) > delta - 1e-12
