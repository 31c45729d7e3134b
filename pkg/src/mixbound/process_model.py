"""Finite state spaces, kernels, chain specifications, and exact path measures.

Joint path measures are stored as dense tables over Omega^n in lexicographic
order: the flat index of a path (x_1, ..., x_n) is sum_i idx(x_i) * k^(n-i)
with k = |Omega|.  Everything downstream (mixing coefficients, martingale
profiles, norms) shares this convention.

Materialization is exact and therefore exponential in the horizon; the
EnumerationLimits guard keeps it at desk scale.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DomainError,
    EnumerationLimitExceeded,
    IndexOutOfRange,
    NormalizationError,
    SpaceMismatch,
    ZeroProbabilityPrefix,
)

# Inputs whose mass deviates from 1 by less than this are renormalized
# silently; larger deviations raise NormalizationError.
MASS_TOLERANCE = 1e-10

PAIR_SEPARATOR = "|"
PATH_SEPARATOR = ","


@dataclass(frozen=True)
class EnumerationLimits:
    """Caps for exact enumeration: state count and total table entries."""

    max_states: int = 6
    max_entries: int = 2_000_000


DEFAULT_LIMITS = EnumerationLimits()


@dataclass(frozen=True)
class FiniteSpace:
    """An ordered finite set of distinct string labels."""

    labels: tuple[str, ...]

    def __post_init__(self):
        if len(self.labels) == 0:
            raise DomainError("state space must be non-empty")
        if len(set(self.labels)) != len(self.labels):
            raise DomainError("state labels must be distinct")
        object.__setattr__(self, "labels", tuple(str(s) for s in self.labels))

    def __len__(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise DomainError(f"label {label!r} not in space") from None

    def __iter__(self):
        return iter(self.labels)


def product_space(a: FiniteSpace, b: FiniteSpace) -> FiniteSpace:
    """Pair space with labels "a|b"; pair index is idx(a)*|b| + idx(b)."""
    labels = tuple(
        f"{x}{PAIR_SEPARATOR}{y}" for x in a.labels for y in b.labels
    )
    return FiniteSpace(labels)


def _as_prob_vector(weights, count: int, what: str) -> np.ndarray:
    w = np.array(weights, dtype=float).reshape(-1)
    if w.size != count:
        raise SpaceMismatch(f"{what}: expected {count} weights, got {w.size}")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise NormalizationError(f"{what}: weights must be finite and >= 0")
    total = w.sum()
    if abs(total - 1.0) >= MASS_TOLERANCE:
        raise NormalizationError(
            f"{what}: total mass {float(total)!r} deviates from 1 by >= {MASS_TOLERANCE}"
        )
    return w / total


@dataclass(frozen=True, eq=False)
class Distribution:
    """A probability vector over a FiniteSpace.

    Inputs off by less than 1e-10 in total mass are renormalized silently;
    anything worse raises NormalizationError.
    """

    space: FiniteSpace
    weights: np.ndarray

    def __post_init__(self):
        w = _as_prob_vector(self.weights, len(self.space), "Distribution")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    def prob(self, label: str) -> float:
        return float(self.weights[self.space.index(label)])


@dataclass(frozen=True, eq=False)
class MarkovKernel:
    """A row-stochastic matrix from a source space to a target space."""

    source: FiniteSpace
    target: FiniteSpace
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.shape != (len(self.source), len(self.target)):
            raise SpaceMismatch(
                f"kernel shape {m.shape} does not match "
                f"({len(self.source)}, {len(self.target)})"
            )
        rows = [
            _as_prob_vector(m[r], len(self.target), f"kernel row {r}")
            for r in range(m.shape[0])
        ]
        m = np.vstack(rows) if rows else m
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    def row(self, label: str) -> np.ndarray:
        return self.matrix[self.source.index(label)]


def _check_limits(n_states: int, horizon: int, limits: EnumerationLimits):
    if n_states > limits.max_states:
        raise EnumerationLimitExceeded(
            f"{n_states} states exceeds the exact-enumeration cap "
            f"of {limits.max_states}"
        )
    if n_states**horizon > limits.max_entries:
        raise EnumerationLimitExceeded(
            f"table would hold {n_states}^{horizon} entries, cap is "
            f"{limits.max_entries}"
        )


@dataclass(frozen=True, eq=False)
class ChainSpec:
    """An inhomogeneous Markov chain: initial law plus one kernel per step."""

    space: FiniteSpace
    horizon: int
    initial: Distribution
    kernels: tuple[MarkovKernel, ...]

    def __post_init__(self):
        if self.horizon < 1:
            raise DomainError("horizon must be >= 1")
        if self.initial.space != self.space:
            raise SpaceMismatch("initial law lives on a different space")
        kernels = tuple(self.kernels)
        if len(kernels) != self.horizon - 1:
            raise SpaceMismatch(
                f"need {self.horizon - 1} kernels, got {len(kernels)}"
            )
        for k in kernels:
            if k.source != self.space or k.target != self.space:
                raise SpaceMismatch("every kernel must map the space to itself")
        object.__setattr__(self, "kernels", kernels)


@dataclass(frozen=True, eq=False)
class MMCSpec:
    """A hidden-layer chain: the pair process (observed, hidden) is Markov.

    The initial law and the step kernels live on the observed x hidden pair
    space with the observed-major index convention from product_space.
    """

    observed: FiniteSpace
    hidden: FiniteSpace
    horizon: int
    initial: Distribution
    kernels: tuple[MarkovKernel, ...]

    def __post_init__(self):
        pair = product_space(self.observed, self.hidden)
        if self.horizon < 1:
            raise DomainError("horizon must be >= 1")
        if self.initial.space != pair:
            raise SpaceMismatch("initial law must live on the pair space")
        kernels = tuple(self.kernels)
        if len(kernels) != self.horizon - 1:
            raise SpaceMismatch(
                f"need {self.horizon - 1} kernels, got {len(kernels)}"
            )
        for k in kernels:
            if k.source != pair or k.target != pair:
                raise SpaceMismatch("kernels must map the pair space to itself")
        object.__setattr__(self, "kernels", kernels)

    @property
    def pair_space(self) -> FiniteSpace:
        return product_space(self.observed, self.hidden)

    def pair_chain(self) -> ChainSpec:
        return ChainSpec(self.pair_space, self.horizon, self.initial, self.kernels)


@dataclass(frozen=True, eq=False)
class AdaptationRule:
    """One step of index adaptation: g(gamma' | x, gamma).

    probs has shape (|space|, |indices|, |indices|); probs[x, g, :] is the law
    of the next index given current state x and current index g.
    """

    space: FiniteSpace
    indices: FiniteSpace
    probs: np.ndarray

    def __post_init__(self):
        k, g = len(self.space), len(self.indices)
        p = np.array(self.probs, dtype=float)
        if p.shape != (k, g, g):
            raise SpaceMismatch(
                f"adaptation table shape {p.shape} != ({k}, {g}, {g})"
            )
        flat = p.reshape(k * g, g)
        rows = [
            _as_prob_vector(flat[r], g, f"adaptation row {r}")
            for r in range(flat.shape[0])
        ]
        p = np.vstack(rows).reshape(k, g, g)
        p.flags.writeable = False
        object.__setattr__(self, "probs", p)


@dataclass(frozen=True, eq=False)
class AdaptiveChainSpec:
    """A chain whose step kernel is selected by an adapting index.

    At step i the next state is drawn from kernel_family[gamma_i] at the
    current state while the next index is drawn from adaptation[i-1] at the
    current (state, index) pair; the two draws are independent.
    """

    space: FiniteSpace
    indices: FiniteSpace
    horizon: int
    initial: Distribution
    kernel_family: dict[str, MarkovKernel] = field(compare=False)
    adaptation: tuple[AdaptationRule, ...] = ()

    def __post_init__(self):
        pair = product_space(self.space, self.indices)
        if self.horizon < 1:
            raise DomainError("horizon must be >= 1")
        if self.initial.space != pair:
            raise SpaceMismatch(
                "initial law must live on the state x index pair space"
            )
        missing = [g for g in self.indices if g not in self.kernel_family]
        if missing:
            raise SpaceMismatch(f"kernel_family missing indices {missing}")
        for g, kern in self.kernel_family.items():
            if kern.source != self.space or kern.target != self.space:
                raise SpaceMismatch(f"kernel for index {g!r} is not an endomorphism")
        rules = tuple(self.adaptation)
        if len(rules) != self.horizon - 1:
            raise SpaceMismatch(
                f"need {self.horizon - 1} adaptation rules, got {len(rules)}"
            )
        for r in rules:
            if r.space != self.space or r.indices != self.indices:
                raise SpaceMismatch("adaptation rule on a different space")
        object.__setattr__(self, "adaptation", rules)

    def stacked_family(self) -> np.ndarray:
        """Kernels as one array indexed [gamma, x, x']."""
        return np.stack(
            [self.kernel_family[g].matrix for g in self.indices.labels]
        )

    def pair_kernel(self, step: int) -> MarkovKernel:
        """The Markov kernel of the (state, index) pair at 1-based step."""
        if not 1 <= step <= self.horizon - 1:
            raise IndexOutOfRange(f"step {step} not in 1..{self.horizon - 1}")
        k, g = len(self.space), len(self.indices)
        fam = self.stacked_family()  # (g, k, k)
        rule = self.adaptation[step - 1].probs  # (k, g, g)
        # P[(x,a) -> (x',a')] = rule[x, a, a'] * fam[a, x, x']
        mat = rule[:, :, None, :] * fam.transpose(1, 0, 2)[:, :, :, None]
        mat = mat.reshape(k * g, k * g)
        pair = product_space(self.space, self.indices)
        return MarkovKernel(pair, pair, mat)

    def pair_chain(self) -> ChainSpec:
        kernels = tuple(self.pair_kernel(i) for i in range(1, self.horizon))
        return ChainSpec(
            product_space(self.space, self.indices),
            self.horizon,
            self.initial,
            kernels,
        )


@dataclass(frozen=True, eq=False)
class PathMeasure:
    """A joint law on Omega^n stored as a dense lexicographic table."""

    space: FiniteSpace
    horizon: int
    probs: np.ndarray

    def __post_init__(self):
        k = len(self.space)
        if self.horizon < 1:
            raise DomainError("horizon must be >= 1")
        p = np.array(self.probs, dtype=float).reshape(-1)
        if p.size != k**self.horizon:
            raise SpaceMismatch(
                f"expected {k}**{self.horizon} entries, got {p.size}"
            )
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise NormalizationError("path probabilities must be finite and >= 0")
        total = p.sum()
        if abs(total - 1.0) >= MASS_TOLERANCE:
            raise NormalizationError(
                f"path measure mass {float(total)!r} deviates from 1 by >= {MASS_TOLERANCE}"
            )
        p = p / total
        p.flags.writeable = False
        object.__setattr__(self, "probs", p)

    def table(self) -> np.ndarray:
        """The measure reshaped to one axis per coordinate."""
        k = len(self.space)
        return self.probs.reshape((k,) * self.horizon)

    def path_index(self, path) -> int:
        k = len(self.space)
        if len(path) != self.horizon:
            raise IndexOutOfRange(
                f"path length {len(path)} != horizon {self.horizon}"
            )
        idx = 0
        for label in path:
            idx = idx * k + self.space.index(label)
        return idx

    def prob(self, path) -> float:
        return float(self.probs[self.path_index(path)])

    def paths(self):
        """Iterate (path tuple, probability) in lexicographic order."""
        for i, tup in enumerate(itertools.product(self.space.labels, repeat=self.horizon)):
            yield tup, float(self.probs[i])


def materialize_chain(
    spec: ChainSpec, limits: EnumerationLimits = DEFAULT_LIMITS
) -> PathMeasure:
    """Exact joint law of an inhomogeneous chain as a dense table."""
    k = len(spec.space)
    _check_limits(k, spec.horizon, limits)
    table = spec.initial.weights.copy()
    for kern in spec.kernels:
        # new axis for the next coordinate: T[..., x] * K[x, x']
        table = table[..., :, None] * kern.matrix
    return PathMeasure(spec.space, spec.horizon, table.reshape(-1))


def _marginalize_second_factor(
    joint: PathMeasure, first: FiniteSpace, second: FiniteSpace
) -> PathMeasure:
    """Sum a pair-space path measure over the second factor of every coordinate."""
    ko, kh = len(first), len(second)
    n = joint.horizon
    shaped = joint.probs.reshape((ko, kh) * n)
    marg = shaped.sum(axis=tuple(range(1, 2 * n, 2)))
    return PathMeasure(first, n, marg.reshape(-1))


def materialize_mmc(
    spec: MMCSpec, limits: EnumerationLimits = DEFAULT_LIMITS
) -> PathMeasure:
    """Exact law of the observed marginal of a hidden-layer chain."""
    joint = materialize_chain(spec.pair_chain(), limits)
    return _marginalize_second_factor(joint, spec.observed, spec.hidden)


def materialize_adaptive(
    spec: AdaptiveChainSpec, limits: EnumerationLimits = DEFAULT_LIMITS
) -> PathMeasure:
    """Exact state-marginal law of an adaptive chain.

    Equivalent to summing, over all index paths, the product of the initial
    pair weight, the per-step adaptation probabilities, and the per-step
    kernel transitions; computed here by materializing the (state, index)
    pair chain and marginalizing out the index coordinates.
    """
    joint = materialize_chain(spec.pair_chain(), limits)
    return _marginalize_second_factor(joint, spec.space, spec.indices)


def suffix_path_space(
    space: FiniteSpace, length: int, limits: EnumerationLimits = DEFAULT_LIMITS
) -> FiniteSpace:
    """Space of paths of the given length, labels joined with commas."""
    if length < 1:
        raise DomainError("suffix length must be >= 1")
    if len(space) ** length > limits.max_entries:
        raise EnumerationLimitExceeded(
            f"suffix space of size {len(space)}^{length} exceeds cap"
        )
    labels = tuple(
        PATH_SEPARATOR.join(tup)
        for tup in itertools.product(space.labels, repeat=length)
    )
    return FiniteSpace(labels)


def conditional_law(
    pm: PathMeasure,
    prefix,
    j: int,
    limits: EnumerationLimits = DEFAULT_LIMITS,
) -> Distribution:
    """Law of the suffix X_{j:n} given X_{1:i} = prefix.

    prefix is a sequence of i state labels, 0 <= i < j <= n.  Raises
    ZeroProbabilityPrefix when the prefix has probability zero.
    """
    n, k = pm.horizon, len(pm.space)
    i = len(prefix)
    if not (0 <= i < j <= n):
        raise IndexOutOfRange(f"need 0 <= len(prefix)={i} < j={j} <= n={n}")
    shaped = pm.table()
    sel = tuple(pm.space.index(label) for label in prefix)
    sub = shaped[sel]  # axes: coordinates i+1 .. n
    total = float(sub.sum()) if i > 0 else 1.0
    if total <= 0.0:
        raise ZeroProbabilityPrefix(f"prefix {tuple(prefix)!r} has probability 0")
    # integrate out the coordinates strictly between the prefix and j
    mid_axes = tuple(range(0, j - i - 1))
    suffix = sub.sum(axis=mid_axes) if mid_axes else sub
    weights = suffix.reshape(-1) / total
    return Distribution(suffix_path_space(pm.space, n - j + 1, limits), weights)
