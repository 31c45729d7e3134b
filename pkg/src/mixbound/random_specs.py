"""Seeded generators for random chain specifications.

All sweeps (tests, the acceptance suite, the CLI selftest) draw their random
instances here so a fixed seed pins down the exact same instances
everywhere.  Streams come from the counter-based Philox generator keyed by
(seed, stream) so independent sweeps never share randomness.
"""

from __future__ import annotations

import numpy as np

from .process_model import (
    AdaptationRule,
    AdaptiveChainSpec,
    ChainSpec,
    Distribution,
    FiniteSpace,
    MarkovKernel,
    MMCSpec,
    PathMeasure,
    product_space,
)


def rng_from(seed: int, stream: int = 0) -> np.random.Generator:
    """A Philox generator keyed by (seed, stream)."""
    key = np.array([seed, stream], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def state_space(k: int, prefix: str = "s") -> FiniteSpace:
    return FiniteSpace(tuple(f"{prefix}{i}" for i in range(k)))


def _positive_vector(rng: np.random.Generator, k: int, zeros: int) -> np.ndarray:
    w = rng.gamma(1.0, 1.0, size=k) + 1e-3
    zeros = min(zeros, k - 1)
    if zeros > 0:
        dead = rng.choice(k, size=zeros, replace=False)
        w[dead] = 0.0
    return w / w.sum()

def random_distribution(
    rng: np.random.Generator, space: FiniteSpace, zeros: int = 0
) -> Distribution:
    """A random law on the space, optionally with forced zero entries."""
    return Distribution(space, _positive_vector(rng, len(space), zeros))


def random_kernel(
    rng: np.random.Generator, space: FiniteSpace, zeros: int = 0
) -> MarkovKernel:
    k = len(space)
    rows = np.vstack([_positive_vector(rng, k, zeros) for _ in range(k)])
    return MarkovKernel(space, space, rows)


def random_chain_spec(
    rng: np.random.Generator, k: int, n: int, zeros: int = 0
) -> ChainSpec:
    space = state_space(k)
    kernels = tuple(random_kernel(rng, space, zeros) for _ in range(n - 1))
    return ChainSpec(space, n, random_distribution(rng, space, zeros), kernels)


def random_mmc_spec(
    rng: np.random.Generator, k_obs: int, k_hid: int, n: int, zeros: int = 0
) -> MMCSpec:
    observed = state_space(k_obs)
    hidden = state_space(k_hid, prefix="h")
    pair = product_space(observed, hidden)
    kernels = tuple(random_kernel(rng, pair, zeros) for _ in range(n - 1))
    return MMCSpec(
        observed, hidden, n, random_distribution(rng, pair, zeros), kernels
    )


def random_adaptive_spec(
    rng: np.random.Generator, k: int, n_idx: int, n: int, zeros: int = 0
) -> AdaptiveChainSpec:
    space = state_space(k)
    indices = state_space(n_idx, prefix="g")
    pair = product_space(space, indices)
    family = {g: random_kernel(rng, space, zeros) for g in indices.labels}
    rules = []
    for _ in range(n - 1):
        probs = np.stack(
            [
                np.vstack(
                    [_positive_vector(rng, n_idx, 0) for _ in range(n_idx)]
                )
                for _ in range(k)
            ]
        )
        rules.append(AdaptationRule(space, indices, probs))
    return AdaptiveChainSpec(
        space, indices, n, random_distribution(rng, pair, zeros), family, tuple(rules)
    )


def random_product_measure(rng: np.random.Generator, k: int, n: int) -> PathMeasure:
    """An exact product law: independent coordinates, no mixing at all."""
    space = state_space(k)
    table = np.ones(())
    for _ in range(n):
        table = table[..., None] * _positive_vector(rng, k, 0)
    return PathMeasure(space, n, table.reshape(-1))


def random_values(rng: np.random.Generator, size: int, scale: float = 1.0) -> np.ndarray:
    return rng.normal(0.0, scale, size=size)
