"""Path-function norms: recursion, LP, and enumeration cross-checks."""
import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixbound import (
    Distribution,
    DomainError,
    LengthMismatch,
    OptimizationLimitExceeded,
    PathFunction,
    SpaceMismatch,
    check_psi_domination,
    empirical_frequency_function,
    hamming,
    lipschitz_constant,
    norm_report,
    phi_norm,
    project,
    psi_functional,
    psi_norm,
)
from mixbound.norms import path_function_from_csv, path_function_to_json_dict
from mixbound.norms import path_function_from_json_dict
from mixbound.random_specs import random_values, rng_from, state_space


def random_table(seed: int, k: int, n: int, scale: float = 2.0) -> PathFunction:
    return PathFunction(
        state_space(k), n, random_values(rng_from(seed), k**n, scale=scale)
    )


def lipschitz_all_pairs(f: PathFunction) -> float:
    """max |f(x) - f(y)| / d_H(x, y) over every pair of paths."""
    paths = list(itertools.product(f.space.labels, repeat=f.horizon))
    best = 0.0
    for a, b in itertools.combinations(paths, 2):
        d = hamming(a, b)
        best = max(best, abs(f.value(a) - f.value(b)) / d)
    return best


def psi_without_recursion(f: PathFunction) -> float:
    """Sum of positive parts of every repeated first-coordinate projection."""
    total = 0.0
    g = f
    while g.horizon > 0:
        total += float(np.clip(g.values, 0.0, None).sum())
        g = project(g)
    return total


# --- basics -----------------------------------------------------------------

def test_hamming_counts_disagreements():
    assert hamming(("a", "b", "a"), ("a", "a", "b")) == 2
    assert hamming((), ()) == 0
    with pytest.raises(LengthMismatch):
        hamming(("a",), ("a", "b"))


def test_path_function_table_shape_check():
    space = state_space(2)
    with pytest.raises(SpaceMismatch):
        PathFunction(space, 2, np.zeros(3))
    with pytest.raises(DomainError):
        PathFunction(space, 1, np.array([np.nan, 0.0]))


def test_value_and_negation():
    f = PathFunction(state_space(2), 2, [1.0, -2.0, 3.0, 0.0])
    assert f.value(("s0", "s1")) == -2.0
    assert (-f).value(("s0", "s1")) == 2.0
    assert f.l1() == pytest.approx(6.0)


def test_lipschitz_indicator_by_hand():
    f = PathFunction(state_space(2), 2, [1.0, 0.0, 0.0, 0.0])
    assert f.lipschitz == pytest.approx(1.0)
    flat = PathFunction(state_space(2), 2, [2.0, 2.0, 2.0, 2.0])
    assert flat.lipschitz == 0.0


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), k=st.integers(2, 3), n=st.integers(1, 3))
def test_lipschitz_adjacent_equals_all_pairs(seed, k, n):
    f = random_table(seed, k, n)
    assert f.lipschitz == pytest.approx(lipschitz_all_pairs(f), abs=1e-12)


# --- projection and the recursive functional ---------------------------------

def test_project_counting_measure_by_hand():
    f = PathFunction(state_space(2), 2, [1.0, 2.0, 3.0, 4.0])
    g = project(f)
    assert g.horizon == 1
    assert np.allclose(g.values, [4.0, 6.0])


def test_project_with_weights():
    f = PathFunction(state_space(2), 2, [1.0, 2.0, 3.0, 4.0])
    mu = Distribution(state_space(2), [0.25, 0.75])
    g = project(f, mu)
    assert np.allclose(g.values, [0.25 * 1 + 0.75 * 3, 0.25 * 2 + 0.75 * 4])
    with pytest.raises(SpaceMismatch):
        project(f, [0.5, 0.25, 0.25])


def test_psi_functional_product_table_by_hand():
    # f(x, y) = (-1)^(x+y) on two states: positives are the diagonal.
    f = PathFunction(state_space(2), 2, [1.0, -1.0, -1.0, 1.0])
    # First level: positive part 2; projection collapses to the zero table.
    assert psi_functional(f) == pytest.approx(2.0)
    assert psi_norm(f) == pytest.approx(2.0)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), k=st.integers(2, 3), n=st.integers(0, 3))
def test_psi_recursion_equals_rolled_out_sum(seed, k, n):
    f = random_table(seed, k, n)
    assert psi_functional(f) == pytest.approx(psi_without_recursion(f), abs=1e-9)


def test_psi_norm_is_two_sided():
    f = PathFunction(state_space(2), 1, [3.0, -1.0])
    # Psi(f) = 3 plus nothing further; Psi(-f) = 1.
    assert psi_functional(f) == pytest.approx(3.0)
    assert psi_norm(f) == pytest.approx(3.0)
    assert psi_norm(-f) == pytest.approx(3.0)


# --- the pairing norm ---------------------------------------------------------

def integer_pairing_max(f: PathFunction) -> float:
    paths = list(itertools.product(range(len(f.space)), repeat=f.horizon))
    adjacent = [
        (a, b)
        for a in range(len(paths))
        for b in range(a + 1, len(paths))
        if sum(x != y for x, y in zip(paths[a], paths[b])) == 1
    ]
    best = 0.0
    for g in itertools.product(range(f.horizon + 1), repeat=len(paths)):
        if any(abs(g[a] - g[b]) > 1 for a, b in adjacent):
            continue
        best = max(best, abs(float(np.dot(f.values, g))))
    return best


def test_phi_norm_product_table_by_hand():
    f = PathFunction(state_space(2), 2, [1.0, -1.0, -1.0, 1.0])
    assert phi_norm(f) == pytest.approx(2.0)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_phi_norm_equals_integer_enumeration(seed):
    f = random_table(seed, 2, 2)
    assert phi_norm(f) == pytest.approx(integer_pairing_max(f), abs=1e-8)


def test_phi_norm_trivial_cases():
    single = PathFunction(state_space(1), 3, [5.0])
    assert phi_norm(single) == 0.0
    empty = PathFunction(state_space(2), 0, [4.0])
    assert phi_norm(empty) == 0.0


def test_phi_norm_respects_size_limit():
    f = random_table(0, 2, 3)
    with pytest.raises(OptimizationLimitExceeded):
        phi_norm(f, limit=10)


def test_psi_domination_maximizer_is_feasible():
    for seed in range(10):
        f = random_table(seed + 300, 2, 2)
        slack, g = check_psi_domination(f)
        assert slack >= -1e-9
        assert g.values.min() >= -1e-9
        assert g.values.max() <= f.horizon + 1e-9
        assert g.lipschitz <= 1.0 + 1e-9
        paired = float(np.dot(f.values, g.values))
        assert paired <= psi_functional(f) + 1e-9


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(1, 3))
def test_norm_report_invariants(seed, n):
    f = random_table(seed, 2, n)
    report = norm_report(f)
    assert report.phi <= report.psi + 1e-9
    assert 0.5 * report.l1 - 1e-9 <= report.phi
    assert report.psi <= n * report.l1 + 1e-9
    body = report.to_json_dict()
    assert body["kind"] == "norm_report"
    assert body["phi"] == pytest.approx(report.phi)


# --- empirical frequency functions ------------------------------------------

def test_empirical_frequency_values_and_lipschitz():
    space = state_space(3)
    f = empirical_frequency_function(space, 4, ("s0", "s2"))
    assert f.value(("s0", "s1", "s2", "s1")) == pytest.approx(0.5)
    assert f.value(("s1", "s1", "s1", "s1")) == 0.0
    assert f.lipschitz == pytest.approx(0.25)


# --- serialization -------------------------------------------------------------

def test_path_function_json_round_trip():
    f = random_table(7, 2, 2)
    doc = path_function_to_json_dict(f)
    g = path_function_from_json_dict(doc)
    assert g.space == f.space
    assert np.allclose(g.values, f.values)


def test_path_function_csv_round_trip():
    text = "path,value\na-a,1.0\na-b,2.0\nb-a,3.0\nb-b,-1.5\n"
    f = path_function_from_csv(text)
    assert f.horizon == 2
    assert f.value(("b", "b")) == -1.5


def test_path_function_csv_requires_full_table():
    from mixbound import SpecFormatError

    with pytest.raises(SpecFormatError):
        path_function_from_csv("path,value\na-a,1.0\na-b,2.0\n")
