"""Simulation harness for adaptive chains built from minorized families.

A MinorizedFamily shares one minorization component: every kernel is
m0 * xi + (1 - m0) * R_gamma, so each kernel contracts by at most 1 - m0.
An AdaptationSchedule moves the kernel index deterministically in time,
one neighbouring index per step, and only while c * t^(-alpha) >= 1, which
makes the pathwise move size obey the declared decay envelope and gives the
schedule a deterministic limiting index (so a stationary target pi is well
defined).  Because the induced per-step index update is constant in the
current (state, index) pair, its spread lambda_i is 0 and the per-step
contraction is just the family spread kappa <= 1 - m0.

Replicates draw from counter-based Philox streams keyed by
(seed, replicate): results are reproducible and independent of chunking or
thread count.  MIXBOUND_THREADS caps the worker threads used for replicate
chunks.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .concentration import (
    SOURCE_DELTA_CONTRACTION,
    SOURCE_DELTA_MINORIZATION,
    ConcentrationCertificate,
    geometric_delta_norm,
    slln_tail_bound,
)
from .errors import (
    DomainError,
    NonConvergence,
    PreconditionFailed,
    SpaceMismatch,
)
from .mixing import (
    contraction_coefficient,
    family_minorization,
    minorization_theta,
    tensorize,
)
from .process_model import (
    AdaptationRule,
    AdaptiveChainSpec,
    Distribution,
    FiniteSpace,
    MarkovKernel,
    product_space,
)
from .random_specs import rng_from

# target number of table entries per simulation chunk
_CHUNK_ENTRIES = 8_000_000


def _thread_count() -> int:
    raw = os.environ.get("MIXBOUND_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@dataclass(frozen=True)
class AdaptationSchedule:
    """Deterministic index path with a declared decay envelope.

    At step t (1-based) the index moves one position toward target_gamma,
    but only while c * t^(-alpha) >= 1; afterwards it is frozen.  A unit
    index move is therefore never larger than the envelope allows, and the
    limiting index is deterministic.
    """

    c: float
    alpha: float
    initial_gamma: str
    target_gamma: str

    def __post_init__(self):
        if self.c < 0:
            raise DomainError("c must be >= 0")
        if self.alpha <= 0:
            raise DomainError("alpha must be > 0")

    def freeze_time(self) -> int:
        """Last 1-based step at which a move is allowed (0 if none)."""
        if self.c < 1.0:
            return 0
        return int(math.floor(self.c ** (1.0 / self.alpha) + 1e-12))

    def gamma_indices(self, n: int, indices: FiniteSpace) -> np.ndarray:
        """Index positions at times 1..n."""
        start = indices.index(self.initial_gamma)
        target = indices.index(self.target_gamma)
        allowed = self.freeze_time()
        out = np.empty(n, dtype=np.int64)
        pos = start
        for t in range(1, n + 1):
            out[t - 1] = pos
            if t <= allowed and pos != target:
                pos += 1 if target > pos else -1
        return out

    def limit_label(self, indices: FiniteSpace) -> str:
        start = indices.index(self.initial_gamma)
        target = indices.index(self.target_gamma)
        moved = min(abs(target - start), self.freeze_time())
        pos = start + moved * (1 if target >= start else -1)
        return indices.labels[pos]

    def kappa_tail(self, t: int = 1, partial_terms: int = 100_000) -> float:
        """c * sum_{s >= t} s^(-alpha); infinite when alpha <= 1."""
        if t < 1:
            raise DomainError("t must be >= 1")
        if self.alpha <= 1.0:
            return math.inf
        top = t + partial_terms
        s = np.arange(t, top, dtype=float)
        partial = float((s**-self.alpha).sum())
        tail = top ** (1.0 - self.alpha) / (self.alpha - 1.0)
        return self.c * (partial + tail)

    def to_rules(
        self, space: FiniteSpace, indices: FiniteSpace, horizon: int
    ) -> tuple[AdaptationRule, ...]:
        """The per-step update tables g_i this schedule induces.

        Each g_i is a point mass at the scheduled index, independent of the
        current (state, index) pair, so its spread lambda_i is 0.
        """
        path = self.gamma_indices(horizon, indices)
        k, n_idx = len(space), len(indices)
        rules = []
        for step in range(1, horizon):
            probs = np.zeros((k, n_idx, n_idx))
            probs[:, :, path[step]] = 1.0
            rules.append(AdaptationRule(space, indices, probs))
        return tuple(rules)


@dataclass(frozen=True, eq=False)
class MinorizedFamily:
    """Kernels m0 * xi + (1 - m0) * R_gamma sharing one minorization."""

    space: FiniteSpace
    indices: FiniteSpace
    m0: float
    xi: Distribution
    residuals: dict[str, MarkovKernel]

    def __post_init__(self):
        if not (0.0 < self.m0 <= 1.0):
            raise DomainError("m0 must lie in (0, 1]")
        if self.xi.space != self.space:
            raise SpaceMismatch("xi must live on the state space")
        missing = [g for g in self.indices if g not in self.residuals]
        if missing:
            raise SpaceMismatch(f"residuals missing indices {missing}")
        for g, r in self.residuals.items():
            if r.source != self.space or r.target != self.space:
                raise SpaceMismatch(f"residual for {g!r} is not an endomorphism")

    def kernel(self, gamma: str) -> MarkovKernel:
        r = self.residuals[gamma]
        mat = self.m0 * self.xi.weights[None, :] + (1.0 - self.m0) * r.matrix
        return MarkovKernel(self.space, self.space, mat)

    def kernels(self) -> dict[str, MarkovKernel]:
        return {g: self.kernel(g) for g in self.indices.labels}

    def stacked(self) -> np.ndarray:
        """All kernels as one array indexed [gamma, x, x']."""
        return np.stack([self.kernel(g).matrix for g in self.indices.labels])

    def kappa(self) -> float:
        """Worst-case TV spread over all rows of all kernels."""
        fam = self.stacked()
        from .mixing import _max_pairwise_tv

        return _max_pairwise_tv(fam.reshape(-1, fam.shape[-1]))

    def spec(
        self,
        schedule: AdaptationSchedule,
        horizon: int,
        initial: Distribution,
    ) -> AdaptiveChainSpec:
        """Finite-horizon adaptive spec: this family driven by the schedule.

        initial is a law on the states; the index starts at the schedule's
        initial_gamma with probability 1.
        """
        if initial.space != self.space:
            raise SpaceMismatch("initial must live on the state space")
        n_idx = len(self.indices)
        g0 = self.indices.index(schedule.initial_gamma)
        joint = np.zeros((len(self.space), n_idx))
        joint[:, g0] = initial.weights
        return AdaptiveChainSpec(
            self.space,
            self.indices,
            horizon,
            Distribution(product_space(self.space, self.indices), joint.reshape(-1)),
            self.kernels(),
            schedule.to_rules(self.space, self.indices, horizon),
        )


def build_minorized_family(
    space: FiniteSpace,
    indices: FiniteSpace,
    m0: float,
    xi: Distribution,
    residuals: dict,
) -> MinorizedFamily:
    """Assemble a family from a shared component and residual kernels.

    residuals maps each index label to a MarkovKernel or a row-stochastic
    matrix over the state space.
    """
    resolved = {}
    for g in indices.labels:
        if g not in residuals:
            raise SpaceMismatch(f"no residual for index {g!r}")
        r = residuals[g]
        if not isinstance(r, MarkovKernel):
            r = MarkovKernel(space, space, np.array(r, dtype=float))
        resolved[g] = r
    return MinorizedFamily(space, indices, float(m0), xi, resolved)


def stationary_distribution(
    kernel: MarkovKernel, tol: float = 1e-13, max_iter: int = 200_000
) -> Distribution:
    """Stationary law by power iteration (needs some actual contraction)."""
    if kernel.source != kernel.target:
        raise SpaceMismatch("stationary law needs an endomorphism")
    k = len(kernel.source)
    nu = np.full(k, 1.0 / k)
    for _ in range(max_iter):
        nxt = nu @ kernel.matrix
        if 0.5 * float(np.abs(nxt - nu).sum()) < tol:
            return Distribution(kernel.source, nxt / nxt.sum())
        nu = nxt
    raise NonConvergence("power iteration did not stabilize")


def _uniform_block(seed: int, rep_start: int, count: int, draws: int) -> np.ndarray:
    """Per-replicate Philox uniforms, one stream per (seed, replicate)."""
    out = np.empty((count, draws))
    for b in range(count):
        out[b] = rng_from(seed, rep_start + b).random(draws)
    return out


def _sample_rows(cum_rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Categorical draws from per-row inclusive cumulative tables."""
    return (cum_rows <= u[:, None]).sum(axis=1)


def _family_batch(
    family: MinorizedFamily,
    schedule: AdaptationSchedule,
    n: int,
    seed: int,
    rep_start: int,
    count: int,
    initial: Distribution,
) -> np.ndarray:
    """States (count, n) for replicates rep_start .. rep_start+count-1."""
    gpath = schedule.gamma_indices(n, family.indices)
    fam = family.stacked()
    cum = np.cumsum(fam, axis=-1)
    cum[..., -1] = 1.0
    cum_init = np.cumsum(initial.weights)
    cum_init[-1] = 1.0
    u = _uniform_block(seed, rep_start, count, n)
    states = np.empty((count, n), dtype=np.int64)
    states[:, 0] = np.searchsorted(cum_init, u[:, 0], side="right")
    for t in range(1, n):
        rows = cum[gpath[t - 1], states[:, t - 1], :]
        states[:, t] = _sample_rows(rows, u[:, t])
    return states


def _spec_batch(
    spec: AdaptiveChainSpec, seed: int, rep_start: int, count: int
) -> tuple[np.ndarray, np.ndarray]:
    """(states, gammas), each (count, n), for a finite adaptive spec."""
    n = spec.horizon
    n_idx = len(spec.indices)
    fam = spec.stacked_family()
    cum_fam = np.cumsum(fam, axis=-1)
    cum_fam[..., -1] = 1.0
    cum_init = np.cumsum(spec.initial.weights)
    cum_init[-1] = 1.0
    draws = 1 + 2 * (n - 1)
    u = _uniform_block(seed, rep_start, count, draws)
    states = np.empty((count, n), dtype=np.int64)
    gammas = np.empty((count, n), dtype=np.int64)
    pair = np.searchsorted(cum_init, u[:, 0], side="right")
    states[:, 0] = pair // n_idx
    gammas[:, 0] = pair % n_idx
    for t in range(1, n):
        rule = spec.adaptation[t - 1].probs  # (k, G, G)
        cum_rule = np.cumsum(rule, axis=-1)
        cum_rule[..., -1] = 1.0
        g_rows = cum_rule[states[:, t - 1], gammas[:, t - 1], :]
        gammas[:, t] = _sample_rows(g_rows, u[:, 2 * t - 1])
        x_rows = cum_fam[gammas[:, t - 1], states[:, t - 1], :]
        states[:, t] = _sample_rows(x_rows, u[:, 2 * t])
    return states, gammas


def simulate(
    family: MinorizedFamily,
    schedule: AdaptationSchedule,
    n: int,
    seed: int,
    replicate: int = 0,
    initial: Distribution | None = None,
) -> tuple[list[str], list[str]]:
    """One sampled path of length n: (state labels, index labels)."""
    if n < 1:
        raise DomainError("n must be >= 1")
    if initial is None:
        initial = family.xi
    states = _family_batch(family, schedule, n, seed, replicate, 1, initial)[0]
    gpath = schedule.gamma_indices(n, family.indices)
    return (
        [family.space.labels[s] for s in states],
        [family.indices.labels[g] for g in gpath],
    )


def simulate_spec(
    spec: AdaptiveChainSpec, seed: int, replicate: int = 0
) -> tuple[list[str], list[str]]:
    """One sampled path of a finite-horizon adaptive spec."""
    states, gammas = _spec_batch(spec, seed, replicate, 1)
    return (
        [spec.space.labels[s] for s in states[0]],
        [spec.indices.labels[g] for g in gammas[0]],
    )


def simulate_spec_batch(
    spec: AdaptiveChainSpec, seed: int, replicates: int
) -> tuple[np.ndarray, np.ndarray]:
    """(states, gammas) index arrays of shape (replicates, n)."""
    if replicates < 1:
        raise DomainError("replicates must be >= 1")
    chunk = max(1, _CHUNK_ENTRIES // max(spec.horizon, 1))
    parts = []
    for start in range(0, replicates, chunk):
        parts.append(_spec_batch(spec, seed, start, min(chunk, replicates - start)))
    states = np.concatenate([p[0] for p in parts], axis=0)
    gammas = np.concatenate([p[1] for p in parts], axis=0)
    return states, gammas


def empirical_measure(path, subset) -> float:
    """Fraction of path coordinates lying in the given state subset."""
    if len(path) == 0:
        raise DomainError("path must be non-empty")
    members = set(subset)
    return sum(1 for s in path if s in members) / len(path)


def _occupancy_batches(
    family: MinorizedFamily,
    schedule: AdaptationSchedule,
    subset,
    n: int,
    seed: int,
    replicates: int,
    initial: Distribution,
    snapshots: np.ndarray,
) -> np.ndarray:
    """Per-replicate occupation frequencies at the snapshot horizons.

    Returns an array (replicates, len(snapshots)) whose column s holds
    (1/snapshots[s]) * #{t <= snapshots[s] : X_t in subset}.
    """
    member = np.array(
        [1.0 if s in set(subset) else 0.0 for s in family.space.labels]
    )
    chunk = max(1, _CHUNK_ENTRIES // max(n, 1))
    out = np.empty((replicates, snapshots.size))
    tasks = [
        (start, min(chunk, replicates - start))
        for start in range(0, replicates, chunk)
    ]

    def run(task):
        start, count = task
        states = _family_batch(family, schedule, n, seed, start, count, initial)
        hits = member[states]
        cum = np.cumsum(hits, axis=1)
        out[start : start + count, :] = cum[:, snapshots - 1] / snapshots

    workers = _thread_count()
    if workers > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, tasks))
    else:
        for task in tasks:
            run(task)
    return out


def estimate_n0(
    family: MinorizedFamily,
    schedule: AdaptationSchedule,
    subset,
    epsilon: float,
    replicates: int = 1000,
    seed: int = 0,
    initial: Distribution | None = None,
    pi: Distribution | None = None,
    max_n: int = 4096,
) -> tuple[int, dict]:
    """Smallest geometric-grid horizon where the occupation bias is < epsilon.

    Scans n = 1, 2, 4, ..., max_n and returns the smallest grid point from
    which onward |mean P-hat_n(A) - pi(A)| + 2 * stderr < epsilon.  Raises
    NonConvergence when the grid is exhausted.
    """
    if epsilon <= 0:
        raise DomainError("epsilon must be > 0")
    if pi is None:
        pi = stationary_distribution(
            family.kernel(schedule.limit_label(family.indices))
        )
    if initial is None:
        initial = pi
    pi_value = sum(pi.prob(s) for s in set(subset))
    grid = []
    g = 1
    while g <= max_n:
        grid.append(g)
        g *= 2
    grid = np.array(grid, dtype=np.int64)
    freqs = _occupancy_batches(
        family, schedule, subset, int(grid[-1]), seed, replicates, initial, grid
    )
    means = freqs.mean(axis=0)
    ses = freqs.std(axis=0, ddof=1) / math.sqrt(replicates)
    ok = np.abs(means - pi_value) + 2.0 * ses < epsilon
    info = {
        "grid": [int(x) for x in grid],
        "means": [float(x) for x in means],
        "stderrs": [float(x) for x in ses],
        "pi_value": float(pi_value),
    }
    for i in range(len(grid)):
        if ok[i:].all():
            return int(grid[i]), info
    raise NonConvergence(
        f"bias stayed >= {epsilon} up to n = {int(grid[-1])}"
    )


@dataclass(frozen=True)
class SimulationReport:
    """Monte Carlo check of one tail certificate."""

    replicates: int
    horizon: int
    target_set: tuple[str, ...]
    t: float
    epsilon: float
    theta: float
    delta_norm_value: float
    pi_value: float
    frequency: float
    mc_stderr: float
    bound: float
    clipped: bool
    verdict: str
    n0: int
    seed: int
    source: str

    def to_json_dict(self) -> dict:
        return {
            "v": 1,
            "kind": "simulation_report",
            "replicates": self.replicates,
            "n": self.horizon,
            "target_set": list(self.target_set),
            "t": self.t,
            "epsilon": self.epsilon,
            "theta": self.theta,
            "delta_norm": self.delta_norm_value,
            "pi_value": self.pi_value,
            "frequency": self.frequency,
            "mc_stderr": self.mc_stderr,
            "bound": self.bound,
            "clipped": self.clipped,
            "verdict": self.verdict,
            "n0": self.n0,
            "seed": self.seed,
            "source": self.source,
        }


def _verdict(frequency: float, bound: float, replicates: int) -> str:
    slack = 3.0 * math.sqrt(
        bound * (1.0 - min(bound, 1.0)) / replicates
    ) + 3.0 / math.sqrt(replicates)
    return "pass" if frequency <= bound + slack else "fail"


def verify_certificate(
    family: MinorizedFamily,
    schedule: AdaptationSchedule,
    subset,
    t: float,
    epsilon: float,
    n: int,
    replicates: int,
    seed: int = 0,
    initial: Distribution | None = None,
    pi: Distribution | None = None,
    n0: int | None = None,
    theta_source: str = "minorization",
    n0_replicates: int = 800,
    n0_grid_max: int = 512,
) -> tuple[SimulationReport, np.ndarray]:
    """Simulate the tail frequency and compare it to the certified bound.

    The certificate uses theta = 1 - m0 (theta_source="minorization") or the
    exact worst kernel contraction (theta_source="profile"), the finite-n
    geometric norm, and the two-sided occupation tail bound.  The report's
    verdict allows three sigmas of Monte Carlo slack on top of the bound.
    Returns the report and the per-replicate absolute deviations.
    """
    if n < 1 or replicates < 2:
        raise DomainError("need n >= 1 and replicates >= 2")
    if t < 0 or epsilon < 0:
        raise DomainError("t and epsilon must be >= 0")
    if pi is None:
        pi = stationary_distribution(
            family.kernel(schedule.limit_label(family.indices))
        )
    if initial is None:
        initial = pi
    if n0 is None:
        try:
            n0, _ = estimate_n0(
                family,
                schedule,
                subset,
                epsilon if epsilon > 0 else 0.01,
                replicates=min(n0_replicates, replicates),
                seed=seed + 1,
                initial=initial,
                pi=pi,
                max_n=max(1, min(n0_grid_max, n - 1)),
            )
        except NonConvergence as e:
            raise PreconditionFailed(
                f"could not establish the bias precondition n > n0: {e}"
            ) from None
    if n <= n0:
        raise PreconditionFailed(f"n = {n} must exceed the bias horizon n0 = {n0}")
    if theta_source == "minorization":
        theta = minorization_theta(family.m0)
        source = SOURCE_DELTA_MINORIZATION
    elif theta_source == "profile":
        theta = tensorize(
            max(
                contraction_coefficient(k) for k in family.kernels().values()
            ),
            0.0,
        )
        source = SOURCE_DELTA_CONTRACTION
    else:
        raise DomainError("theta_source must be 'minorization' or 'profile'")
    dnorm = geometric_delta_norm(theta, n)
    cert: ConcentrationCertificate = slln_tail_bound(n, t, epsilon, dnorm, source)
    pi_value = sum(pi.prob(s) for s in set(subset))
    freqs = _occupancy_batches(
        family,
        schedule,
        subset,
        n,
        seed,
        replicates,
        initial,
        np.array([n], dtype=np.int64),
    )[:, 0]
    deviations = np.abs(freqs - pi_value)
    frequency = float((deviations > t + epsilon).mean())
    stderr = math.sqrt(max(frequency * (1.0 - frequency), 0.0) / replicates)
    report = SimulationReport(
        replicates=replicates,
        horizon=n,
        target_set=tuple(sorted(set(subset))),
        t=float(t),
        epsilon=float(epsilon),
        theta=float(theta),
        delta_norm_value=float(dnorm),
        pi_value=float(pi_value),
        frequency=frequency,
        mc_stderr=stderr,
        bound=cert.bound,
        clipped=cert.clipped,
        verdict=_verdict(frequency, cert.bound, replicates),
        n0=int(n0),
        seed=int(seed),
        source=source,
    )
    return report, deviations


@dataclass(frozen=True)
class AssumptionReport:
    """Diagnostics for the three standing assumptions of adaptive runs."""

    m0_declared: float | None
    m0_common: float
    kappa: float
    lambda_sup: float | None
    c: float | None
    alpha: float | None
    kappa_tail_1: float | None
    decay_summable: bool | None
    minorization_ok: bool
    feller_ok: bool
    feller_note: str

    def to_json_dict(self) -> dict:
        tail = self.kappa_tail_1
        return {
            "v": 1,
            "kind": "assumption_report",
            "m0_declared": self.m0_declared,
            "m0_common": self.m0_common,
            "kappa": self.kappa,
            "lambda_sup": self.lambda_sup,
            "c": self.c,
            "alpha": self.alpha,
            "kappa_tail_1": None if tail is None or math.isinf(tail) else tail,
            "decay_summable": self.decay_summable,
            "minorization_ok": self.minorization_ok,
            "feller_ok": self.feller_ok,
            "feller_note": self.feller_note,
        }


def check_assumptions(
    family, schedule: AdaptationSchedule | None = None
) -> AssumptionReport:
    """Report decay, minorization/ergodicity, and continuity diagnostics.

    family may be a MinorizedFamily or a plain dict of label -> MarkovKernel.
    Decay diagnostics need a schedule; without one they are reported as not
    applicable (None).  Continuity holds automatically on finite spaces.
    """
    if isinstance(family, MinorizedFamily):
        kernels = family.kernels()
        declared = family.m0
        kappa = family.kappa()
    elif isinstance(family, dict):
        kernels = dict(family)
        declared = None
        stacked = np.vstack([k.matrix for k in kernels.values()])
        from .mixing import _max_pairwise_tv

        kappa = _max_pairwise_tv(stacked)
    else:
        raise DomainError("family must be a MinorizedFamily or a kernel dict")
    m0_common, _ = family_minorization(list(kernels.values()))
    if schedule is None:
        c = alpha = tail = None
        summable = None
    else:
        c, alpha = schedule.c, schedule.alpha
        summable = alpha > 1.0
        tail = schedule.kappa_tail(1) if summable else math.inf
    return AssumptionReport(
        m0_declared=declared,
        m0_common=float(m0_common),
        kappa=float(kappa),
        lambda_sup=0.0 if schedule is not None else None,
        c=c,
        alpha=alpha,
        kappa_tail_1=tail,
        decay_summable=summable,
        minorization_ok=m0_common > 0.0,
        feller_ok=True,
        feller_note="finite state space: kernel continuity is automatic",
    )
