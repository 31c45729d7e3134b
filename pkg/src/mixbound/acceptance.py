"""Built-in verification suite behind `mixbound selftest`.

Ten numbered checks, each with a fixed seed and a runtime budget.  Every
check returns (ok, detail); run_all wraps them with timing and prints one
PASS/FAIL line per criterion.  The same registry drives the acceptance
tests, so a green selftest and a green test suite are the same statement.
"""
from __future__ import annotations

import itertools
import json
import math
import os
import tempfile
import time
from dataclasses import dataclass

import numpy as np

from .adaptive_sim import (
    AdaptationSchedule,
    build_minorized_family,
    simulate_spec_batch,
    verify_certificate,
)
from .concentration import martingale_profile, sample_size
from .discretize import (
    PartitionSpec,
    coefficient_trace,
    gaussian_ar_kernel,
    mixture_minorized_kernel,
)
from .mixing import (
    adaptive_profile,
    chain_contraction_profile,
    delta_exact,
    delta_norm,
    mmc_delta_bound,
)
from .norms import PathFunction, phi_norm, psi_norm
from .process_model import Distribution, materialize_adaptive, materialize_chain
from .random_specs import (
    random_adaptive_spec,
    random_chain_spec,
    random_kernel,
    random_product_measure,
    random_values,
    rng_from,
    state_space,
)


@dataclass(frozen=True)
class CriterionResult:
    number: int
    name: str
    passed: bool
    seconds: float
    budget: float
    detail: str

    @property
    def line(self) -> str:
        word = "PASS" if self.passed else "FAIL"
        return (
            f"{word} {self.number:2d} {self.name}: {self.detail} "
            f"[{self.seconds:.2f}s / {self.budget:.0f}s]"
        )

    def to_json_dict(self) -> dict:
        return {
            "criterion": self.number,
            "name": self.name,
            "passed": self.passed,
            "seconds": self.seconds,
            "budget": self.budget,
            "detail": self.detail,
        }


# --- 1: product measures have trivial mixing matrices ----------------------

def _product_measure_identity() -> tuple[bool, str]:
    worst_off = 0.0
    worst_norm = 0.0
    for i in range(50):
        rng = rng_from(101, i)
        k = int(rng.integers(2, 4))
        n = int(rng.integers(3, 6))
        matrix = delta_exact(random_product_measure(rng, k, n))
        off = matrix.entries[np.triu_indices(n, 1)]
        if off.size:
            worst_off = max(worst_off, float(off.max()))
        worst_norm = max(worst_norm, abs(delta_norm(matrix) - 1.0))
    ok = worst_off < 1e-9 and worst_norm <= 1e-9
    return ok, (
        f"50 product measures: max off-diagonal {worst_off:.2e}, "
        f"max |norm - 1| {worst_norm:.2e}"
    )


# --- 2: contraction products dominate exact coefficients -------------------

def _contraction_domination() -> tuple[bool, str]:
    worst_violation = -math.inf
    max_slack = 0.0
    for i in range(100):
        rng = rng_from(102, i)
        k = int(rng.integers(2, 4))
        n = int(rng.integers(2, 6))
        spec = random_chain_spec(rng, k, n, zeros=1 if i % 3 == 0 else 0)
        exact = delta_exact(materialize_chain(spec)).entries
        bound = mmc_delta_bound(chain_contraction_profile(spec.kernels)).entries
        gap = bound - exact
        worst_violation = max(worst_violation, float(-gap.min()))
        off = gap[np.triu_indices(n, 1)]
        if off.size:
            max_slack = max(max_slack, float(off.max()))
    for i in range(100):
        rng = rng_from(103, i)
        k = int(rng.integers(2, 4))
        n = int(rng.integers(2, 6))
        spec = random_adaptive_spec(rng, k, 2, n, zeros=1 if i % 4 == 0 else 0)
        exact = delta_exact(materialize_adaptive(spec)).entries
        bound = mmc_delta_bound(adaptive_profile(spec)).entries
        gap = bound - exact
        worst_violation = max(worst_violation, float(-gap.min()))
        off = gap[np.triu_indices(n, 1)]
        if off.size:
            max_slack = max(max_slack, float(off.max()))
    ok = worst_violation <= 1e-9
    return ok, (
        f"200 specs: worst violation {worst_violation:.2e}, "
        f"max slack of the product bound {max_slack:.4f}"
    )


# --- 3 and 4 share one batch of random tables -------------------------------

def _norm_tables() -> list[PathFunction]:
    space = state_space(2)
    tables = []
    for i in range(200):
        rng = rng_from(104, i)
        n = 2 if i % 2 == 0 else 3
        tables.append(PathFunction(space, n, random_values(rng, 2**n, scale=2.0)))
    return tables


def _integer_pairing_max(f: PathFunction) -> float:
    """Brute-force sup of |<f, g>| over integer g in [0, n] with unit steps.

    The feasible polytope has integral vertices, so this equals the LP
    value; only usable at tiny sizes.
    """
    k, n = len(f.space), f.horizon
    paths = list(itertools.product(range(k), repeat=n))
    adjacent = [
        (a, b)
        for a in range(len(paths))
        for b in range(a + 1, len(paths))
        if sum(x != y for x, y in zip(paths[a], paths[b])) == 1
    ]
    best = 0.0
    for g in itertools.product(range(n + 1), repeat=len(paths)):
        if any(abs(g[a] - g[b]) > 1 for a, b in adjacent):
            continue
        best = max(best, abs(float(np.dot(f.values, g))))
    return best


def _psi_domination() -> tuple[bool, str]:
    worst = -math.inf
    lp_gap = 0.0
    checked = 0
    for f in _norm_tables():
        phi = phi_norm(f)
        psi = psi_norm(f)
        worst = max(worst, phi - psi)
        if f.horizon == 2:
            lp_gap = max(lp_gap, abs(phi - _integer_pairing_max(f)))
            checked += 1
    ok = worst <= 1e-9 and lp_gap <= 1e-6
    return ok, (
        f"200 tables: max phi - psi = {worst:.2e}; LP vs integer "
        f"enumeration gap {lp_gap:.2e} on {checked} two-step tables"
    )


def _norm_sandwich() -> tuple[bool, str]:
    worst_low = math.inf
    worst_high = -math.inf
    for f in _norm_tables():
        l1 = f.l1()
        lower, upper = 0.5 * l1 - 1e-9, f.horizon * l1 + 1e-9
        for value in (phi_norm(f), psi_norm(f)):
            worst_low = min(worst_low, value - lower)
            worst_high = max(worst_high, value - upper)
    ok = worst_low >= 0.0 and worst_high <= 0.0
    return ok, (
        f"200 tables: min slack above 0.5*l1 = {worst_low:.2e}, "
        f"max excess over n*l1 = {worst_high:.2e}"
    )


# --- 5: martingale differences obey the norm bound --------------------------

def _martingale_domination() -> tuple[bool, str]:
    worst_norm_gap = -math.inf
    worst_hat_gap = -math.inf
    for i in range(100):
        rng = rng_from(105, i)
        n = int(rng.integers(2, 5))
        spec = random_chain_spec(rng, 2, n, zeros=1 if i % 4 == 0 else 0)
        pm = materialize_chain(spec)
        f = PathFunction(spec.space, n, random_values(rng, 2**n, scale=2.0))
        profile = martingale_profile(pm, f)
        cap = f.lipschitz * delta_norm(delta_exact(pm))
        worst_norm_gap = max(worst_norm_gap, float(profile.sup_norms.max()) - cap)
        worst_hat_gap = max(
            worst_hat_gap, float((profile.sup_norms - profile.hat_sup_norms).max())
        )
    ok = worst_norm_gap <= 1e-9 and worst_hat_gap <= 1e-9
    return ok, (
        f"100 pairs: max ||V_i|| - Lip*norm = {worst_norm_gap:.2e}, "
        f"max ||V_i|| - ||Vhat_i|| = {worst_hat_gap:.2e}"
    )


# --- 6: simulated tail frequencies stay under the certificates --------------

def _sweep_configs():
    m0s = (0.3, 0.5, 1.0)
    horizons = (500, 1000, 2000, 4000, 8000)
    ts = (0.1, 0.15, 0.2)
    schedules = ((0.0, 1.5), (8.0, 1.5), (27.0, 3.0))
    for i in range(50):
        yield (
            i,
            m0s[i % 3],
            horizons[(i // 3) % 5],
            ts[(i // 2) % 3],
            2 + (i % 2),
            2 + ((i // 2) % 2),
            schedules[i % 3],
        )


def _adaptive_sweep() -> tuple[bool, str]:
    failures = []
    worst_margin = -math.inf
    worst_freq = 0.0
    for i, m0, n, t, k, n_idx, (c, alpha) in _sweep_configs():
        rng = rng_from(600, i)
        states = state_space(k)
        indices = state_space(n_idx, prefix="g")
        common = random_kernel(rng, states).matrix
        residuals = {
            g: 0.6 * common + 0.4 * random_kernel(rng, states).matrix
            for g in indices.labels
        }
        xi = Distribution(states, np.full(k, 1.0 / k))
        family = build_minorized_family(states, indices, m0, xi, residuals)
        schedule = AdaptationSchedule(c, alpha, indices.labels[0], indices.labels[-1])
        subset = list(states.labels[: 1 + (i % 2 if k == 3 else 0)])
        report, _ = verify_certificate(
            family,
            schedule,
            subset,
            t,
            0.02,
            n,
            10_000,
            seed=9000 + i,
        )
        worst_margin = max(worst_margin, report.frequency - report.bound)
        worst_freq = max(worst_freq, report.frequency)
        if report.verdict != "pass":
            failures.append(i)
    ok = not failures
    return ok, (
        f"50 configurations, {len(failures)} verdict failures; "
        f"max tail frequency {worst_freq:.4f}, "
        f"max frequency - bound = {worst_margin:.4f}"
    )


# --- 7: sample-size round trip ----------------------------------------------

def _sample_size_round_trip() -> tuple[bool, str]:
    grid = [(0.1, 0.05, 0.0)]
    ts = (0.05, 0.1, 0.2, 0.3, 0.5)
    deltas = (0.01, 0.05, 0.5, 1.9)
    thetas = (0.0, 0.3, 0.6, 0.9)
    for idx, (t, delta) in enumerate(itertools.product(ts, deltas)):
        point = (t, delta, thetas[idx % 4])
        if point != grid[0] and len(grid) < 20:
            grid.append(point)
    bad = []
    worked = None
    for t, delta, theta in grid:
        n = sample_size(t, 0.0, delta, theta)
        m_cap = 1.0 / (1.0 - theta)
        tail = lambda m: 2.0 * math.exp(-(m * t * t) / (2.0 * m_cap * m_cap))
        if tail(n) > delta or (n > 1 and tail(n - 1) <= delta):
            bad.append((t, delta, theta, n))
        if (t, delta, theta) == (0.1, 0.05, 0.0):
            worked = n
    ok = not bad and worked == 738 and len(grid) == 20
    return ok, (
        f"{len(grid)} grid points, {len(bad)} round-trip failures; "
        f"n(t=0.1, delta=0.05, theta=0) = {worked}"
    )


# --- 8: discretization traces converge ---------------------------------------

def _discretization_convergence() -> tuple[bool, str]:
    parts = [PartitionSpec.uniform(-3.0, 3.0, m) for m in (8, 16, 32, 64)]
    ar = gaussian_ar_kernel(-3.0, 3.0, rho=0.5, sigma=1.0)
    rows = coefficient_trace(ar, parts, steps=6)
    diffs = [row.theta_diff for row in rows[1:]]
    decreasing = all(b < a for a, b in zip(diffs, diffs[1:]))
    ar_ok = decreasing and diffs[-1] < 0.02
    mixed = mixture_minorized_kernel(-3.0, 3.0, m0=0.3, rho=0.5, sigma=1.0)
    mixed_rows = coefficient_trace(mixed, parts, steps=6)
    cap = max(row.theta for row in mixed_rows)
    mixed_ok = cap <= 0.71
    ok = ar_ok and mixed_ok
    return ok, (
        f"AR trace diffs {', '.join(f'{d:.4f}' for d in diffs)} "
        f"(final < 0.02: {diffs[-1] < 0.02}); minorized mixture max theta "
        f"{cap:.4f} <= 0.71"
    )


# --- 9: the simulator reproduces the exact path law -------------------------

def _simulator_exactness() -> tuple[bool, str]:
    replicates = 100_000
    worst_z = 0.0
    checked = 0
    zero_hits = 0
    for case, zeros in enumerate((0, 1)):
        rng = rng_from(900, case)
        spec = random_adaptive_spec(rng, 2, 2, 3, zeros=zeros)
        states, gammas = simulate_spec_batch(spec, 901 + case, replicates)
        n_idx = len(spec.indices)
        pair_paths = states * n_idx + gammas
        kg = len(spec.space) * n_idx
        idx = np.zeros(replicates, dtype=np.int64)
        for step in range(spec.horizon):
            idx = idx * kg + pair_paths[:, step]
        joint_freq = np.bincount(idx, minlength=kg**spec.horizon) / replicates
        joint_exact = materialize_chain(spec.pair_chain()).table()
        k = len(spec.space)
        sidx = np.zeros(replicates, dtype=np.int64)
        for step in range(spec.horizon):
            sidx = sidx * k + states[:, step]
        marg_freq = np.bincount(sidx, minlength=k**spec.horizon) / replicates
        marg_exact = materialize_adaptive(spec).table()
        for exact, freq in ((joint_exact, joint_freq), (marg_exact, marg_freq)):
            for p, fhat in zip(exact.reshape(-1), freq):
                if p <= 0.0:
                    zero_hits += int(fhat > 0.0)
                    continue
                sigma = math.sqrt(p * (1.0 - p) / replicates)
                worst_z = max(worst_z, abs(fhat - p) / sigma)
                checked += 1
    ok = worst_z <= 4.0 and zero_hits == 0
    return ok, (
        f"{checked} positive-probability paths over 2 specs x {replicates} "
        f"replicates: worst |z| = {worst_z:.2f} (cap 4), "
        f"{zero_hits} hits on zero-probability paths"
    )


# --- 10: the command line is deterministic -----------------------------------

def _run_cli(argv: list[str]) -> int:
    from . import cli

    return cli.main(argv)


def _cli_determinism() -> tuple[bool, str]:
    problems = []
    with tempfile.TemporaryDirectory() as td:
        chain_path = os.path.join(td, "chain.json")
        with open(chain_path, "w", encoding="utf-8") as fh:
            json.dump(
                {
                    "v": 1,
                    "kind": "chain",
                    "states": ["a", "b"],
                    "n": 4,
                    "initial": [0.5, 0.5],
                    "kernels": [[0.9, 0.1], [0.2, 0.8]],
                },
                fh,
            )
        family_path = os.path.join(td, "family.json")
        with open(family_path, "w", encoding="utf-8") as fh:
            json.dump(
                {
                    "v": 1,
                    "kind": "family",
                    "states": ["a", "b"],
                    "indices": ["g0", "g1"],
                    "m0": 0.5,
                    "xi": [0.5, 0.5],
                    "residuals": {
                        "g0": [[0.8, 0.2], [0.3, 0.7]],
                        "g1": [[0.6, 0.4], [0.5, 0.5]],
                    },
                    "schedule": {
                        "c": 4.0,
                        "alpha": 2.0,
                        "initial_gamma": "g0",
                        "target_gamma": "g1",
                    },
                },
                fh,
            )

        def pair(tag: str, argv_tail: list[str]) -> tuple[bytes, bytes]:
            outs = []
            for run in ("x", "y"):
                out = os.path.join(td, f"{tag}-{run}.out")
                code = _run_cli(argv_tail + ["--out", out])
                if code != 0:
                    problems.append(f"{tag}: exit {code}")
                    return b"", b"!"
                with open(out, "rb") as fh:
                    outs.append(fh.read())
            return outs[0], outs[1]

        a, b = pair("mixing-json", ["mixing", "--in", chain_path])
        if a != b:
            problems.append("mixing json output differs between runs")
        a, b = pair(
            "mixing-csv", ["mixing", "--in", chain_path, "--format", "csv"]
        )
        if a != b:
            problems.append("mixing csv output differs between runs")
        bound_args = [
            "bound",
            "--n",
            "4000",
            "--t",
            "0.2",
            "--epsilon",
            "0.02",
            "--m0",
            "0.3",
        ]
        a, b = pair("bound-json", bound_args)
        if a != b:
            problems.append("bound output differs between runs")
        elif a:
            bound = json.loads(a)["bound"]
            if abs(bound - 2.0 * math.exp(-7.2)) > 1e-9:
                problems.append(f"bound value {bound} off the worked value")
            if abs(bound - 0.00149) > 5e-6:
                problems.append(f"bound value {bound} not ~0.00149")
        a, b = pair(
            "sample-size",
            ["sample-size", "--t", "0.1", "--delta", "0.05", "--theta-cap", "0.0"],
        )
        if a != b:
            problems.append("sample-size output differs between runs")
        elif a and json.loads(a)["n"] != 738:
            problems.append(f"sample size {json.loads(a)['n']} != 738")
        a, b = pair(
            "simulate",
            ["simulate", "--in", family_path, "--n", "64", "--seed", "7"],
        )
        if a != b:
            problems.append("simulate output differs between runs")
    ok = not problems
    return ok, (
        "5 repeated invocations byte-identical; worked values reproduced"
        if ok
        else "; ".join(problems)
    )


CRITERIA = (
    (1, "product measures mix trivially", 10.0, _product_measure_identity),
    (2, "contraction products dominate exact coefficients", 120.0, _contraction_domination),
    (3, "pairing norm below recursive norm", 60.0, _psi_domination),
    (4, "norm sandwich around the l1 norm", 60.0, _norm_sandwich),
    (5, "martingale differences under Lipschitz times norm", 60.0, _martingale_domination),
    (6, "simulated tails stay under certificates", 600.0, _adaptive_sweep),
    (7, "sample-size round trip", 1.0, _sample_size_round_trip),
    (8, "discretization trace converges", 60.0, _discretization_convergence),
    (9, "simulator matches the exact path law", 60.0, _simulator_exactness),
    (10, "command-line determinism", 60.0, _cli_determinism),
)


def run_criterion(number: int) -> CriterionResult:
    for num, name, budget, func in CRITERIA:
        if num == number:
            start = time.perf_counter()
            ok, detail = func()
            elapsed = time.perf_counter() - start
            if ok and elapsed > budget:
                detail += " (over time budget)"
            return CriterionResult(
                number=num,
                name=name,
                passed=ok and elapsed <= budget,
                seconds=elapsed,
                budget=budget,
                detail=detail,
            )
    raise ValueError(f"no criterion numbered {number}")


def run_all(numbers=None, stream=None) -> list[CriterionResult]:
    results = []
    for num, _, _, _ in CRITERIA:
        if numbers is not None and num not in numbers:
            continue
        result = run_criterion(num)
        if stream is not None:
            stream.write(result.line + "\n")
            stream.flush()
        results.append(result)
    return results
