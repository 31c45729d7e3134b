"""Mixing coefficients and contraction-coefficient bounds.

The central object is the upper-triangular mixing matrix with unit diagonal
whose (i, j) entry, for i < j, measures how much the law of the suffix
X_{j:n} can move when the history x_{1:i} is perturbed in its last
coordinate: the maximum, over histories y and states w, w' of positive
prefix probability, of the total-variation distance between the two
conditional suffix laws.  Its l-infinity operator norm

    max_{1 <= i < n} (1 + sum_{j > i} eta_bar_ij)

sits in [1, n], equals 1 exactly for product measures, and feeds the
martingale and tail bounds in the concentration module.

Exact entries come from dense path measures; cheaper upper bounds come from
products of per-step contraction coefficients (plain, hidden-layer, or
adaptive via the kappa/lambda combination), or from a minorization constant.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, IndexOutOfRange, SpaceMismatch
from .process_model import (
    AdaptiveChainSpec,
    Distribution,
    FiniteSpace,
    MarkovKernel,
    PathMeasure,
)

PROVENANCE_EXACT = "Exact"
PROVENANCE_CONTRACTION = "ContractionBound"
PROVENANCE_ADAPTIVE = "AdaptiveBound"
PROVENANCE_MINORIZATION = "MinorizationBound"
PROVENANCES = (
    PROVENANCE_EXACT,
    PROVENANCE_CONTRACTION,
    PROVENANCE_ADAPTIVE,
    PROVENANCE_MINORIZATION,
)


def tv_distance(p: Distribution, q: Distribution) -> float:
    """Total variation distance, half the l1 distance of the weight vectors."""
    if p.space != q.space:
        raise SpaceMismatch("tv_distance needs two laws on the same space")
    return 0.5 * float(np.abs(p.weights - q.weights).sum())


def _max_pairwise_tv(rows: np.ndarray) -> float:
    """Max TV distance over all pairs of rows of a stochastic array."""
    m = rows.shape[0]
    if m < 2:
        return 0.0
    best = 0.0
    for a in range(m - 1):
        d = 0.5 * np.abs(rows[a + 1 :] - rows[a]).sum(axis=1)
        best = max(best, float(d.max()))
    return min(best, 1.0)


@dataclass(frozen=True, eq=False)
class MixingMatrix:
    """Upper-triangular matrix of eta-bar entries with unit diagonal."""

    horizon: int
    entries: np.ndarray
    provenance: str

    def __post_init__(self):
        n = self.horizon
        if n < 1:
            raise DomainError("horizon must be >= 1")
        if self.provenance not in PROVENANCES:
            raise DomainError(f"unknown provenance {self.provenance!r}")
        m = np.array(self.entries, dtype=float)
        if m.shape != (n, n):
            raise DomainError(f"entries shape {m.shape} != ({n}, {n})")
        if np.any(np.abs(np.diag(m) - 1.0) > 1e-12):
            raise DomainError("diagonal must be 1")
        if np.any(np.tril(m, -1) != 0.0):
            raise DomainError("entries below the diagonal must be 0")
        if np.any(m < -1e-12) or np.any(m > 1.0 + 1e-9):
            raise DomainError("entries must lie in [0, 1]")
        m = np.clip(m, 0.0, 1.0)
        np.fill_diagonal(m, 1.0)
        m.flags.writeable = False
        object.__setattr__(self, "entries", m)

    def entry(self, i: int, j: int) -> float:
        """eta-bar for 1-based coordinates i <= j."""
        n = self.horizon
        if not (1 <= i <= j <= n):
            raise IndexOutOfRange(f"need 1 <= i <= j <= {n}")
        return float(self.entries[i - 1, j - 1])

    def to_json_dict(self) -> dict:
        return {
            "v": 1,
            "kind": "mixing_matrix",
            "n": self.horizon,
            "provenance": self.provenance,
            "matrix": [[float(x) for x in row] for row in self.entries],
            "norm": delta_norm(self),
        }

    def to_csv(self) -> str:
        """Upper-triangle entries as i,j,eta_bar,provenance rows (1-based)."""
        buf = io.StringIO()
        buf.write("i,j,eta_bar,provenance\n")
        for i in range(self.horizon):
            for j in range(i, self.horizon):
                buf.write(
                    f"{i + 1},{j + 1},{float(self.entries[i, j])!r},{self.provenance}\n"
                )
        return buf.getvalue()


def delta_norm(m: MixingMatrix) -> float:
    """l-infinity operator norm: max row sum of the upper triangle."""
    return float(m.entries.sum(axis=1).max())


def eta_exact(pm: PathMeasure, i: int, j: int) -> float:
    """Exact eta-bar_{ij}: worst-case suffix perturbation at coordinate i.

    Maximizes, over histories y in Omega^{i-1} and states w, w' with
    P(y, w) > 0 and P(y, w') > 0, the TV distance between the conditional
    laws of X_{j:n} given (y, w) and (y, w').  Histories of probability
    zero are skipped: conditional laws are only defined where they exist.
    """
    n, k = pm.horizon, len(pm.space)
    if not (1 <= i < j <= n):
        raise IndexOutOfRange(f"need 1 <= i < j <= n, got i={i}, j={j}, n={n}")
    shaped = pm.table()
    # integrate out coordinates i+1 .. j-1 (0-based axes i .. j-2)
    mid_axes = tuple(range(i, j - 1))
    joint = shaped.sum(axis=mid_axes) if mid_axes else shaped
    suffix_size = k ** (n - j + 1)
    joint = joint.reshape(k ** (i - 1), k, suffix_size)
    prefix = joint.sum(axis=2)  # (k^{i-1}, k)
    best = 0.0
    for y in range(joint.shape[0]):
        live = np.nonzero(prefix[y] > 0.0)[0]
        if live.size < 2:
            continue
        conds = joint[y, live, :] / prefix[y, live, None]
        best = max(best, _max_pairwise_tv(conds))
    return min(best, 1.0)


def delta_exact(pm: PathMeasure) -> MixingMatrix:
    """Exact mixing matrix of a path measure, entry by entry."""
    n = pm.horizon
    m = np.eye(n)
    for i in range(1, n):
        for j in range(i + 1, n + 1):
            m[i - 1, j - 1] = eta_exact(pm, i, j)
    return MixingMatrix(n, m, PROVENANCE_EXACT)


def contraction_coefficient(k: MarkovKernel) -> float:
    """Worst-case TV distance between two rows of the kernel."""
    return _max_pairwise_tv(k.matrix)


@dataclass(frozen=True, eq=False)
class ContractionProfile:
    """Per-step contraction coefficients theta_1 .. theta_{n-1}.

    For adaptive chains the optional kappa (kernel-family spread) and
    per-step lambdas (adaptation-rule spread) record how each theta_i was
    assembled; an optional minorization mass m0 certifies theta_i <= 1 - m0.
    """

    thetas: tuple[float, ...]
    kappa: float | None = None
    lambdas: tuple[float, ...] | None = None
    m0: float | None = None

    def __post_init__(self):
        thetas = tuple(float(t) for t in self.thetas)
        for t in thetas:
            if not (0.0 <= t <= 1.0):
                raise DomainError(f"theta {t!r} outside [0, 1]")
        if self.m0 is not None:
            if not (0.0 <= self.m0 <= 1.0):
                raise DomainError("m0 must lie in [0, 1]")
            for t in thetas:
                if t > 1.0 - self.m0 + 1e-12:
                    raise DomainError(
                        f"theta {t!r} exceeds 1 - m0 = {1.0 - self.m0!r}"
                    )
        if self.lambdas is not None:
            lams = tuple(float(x) for x in self.lambdas)
            if len(lams) != len(thetas):
                raise DomainError("lambdas must match thetas in length")
            object.__setattr__(self, "lambdas", lams)
        object.__setattr__(self, "thetas", thetas)

    @property
    def horizon(self) -> int:
        return len(self.thetas) + 1


def mmc_delta_bound(
    profile: ContractionProfile, provenance: str = PROVENANCE_CONTRACTION
) -> MixingMatrix:
    """Mixing matrix bound eta-bar_ij <= theta_i * ... * theta_{j-1}.

    Valid for any chain whose step-i kernel (on the full state, pair, or
    state-index space) contracts by theta_i; the exact coefficient can be
    strictly smaller, so this is an upper bound, not an identity.
    """
    n = profile.horizon
    m = np.eye(n)
    for i in range(1, n):
        acc = 1.0
        for j in range(i + 1, n + 1):
            acc *= profile.thetas[j - 2]
            m[i - 1, j - 1] = acc
    return MixingMatrix(n, m, provenance)


def tensorize(alpha: float, beta: float) -> float:
    """Combine two row-spread coefficients: alpha + beta - alpha*beta."""
    if not (0.0 <= alpha <= 1.0 and 0.0 <= beta <= 1.0):
        raise DomainError("tensorize arguments must lie in [0, 1]")
    return alpha + beta - alpha * beta


def adaptive_profile(spec: AdaptiveChainSpec) -> ContractionProfile:
    """Contraction profile of an adaptive chain from kappa and lambda_i.

    kappa is the worst-case TV distance between any two rows drawn from any
    two kernels of the family; lambda_i is the analogous spread of the step-i
    adaptation rule.  Each step then contracts by at most
    kappa + lambda_i - kappa*lambda_i.
    """
    fam = spec.stacked_family()  # (G, k, k)
    kappa = _max_pairwise_tv(fam.reshape(-1, fam.shape[-1]))
    lambdas = []
    for rule in spec.adaptation:
        g = rule.probs
        lambdas.append(_max_pairwise_tv(g.reshape(-1, g.shape[-1])))
    thetas = tuple(tensorize(kappa, lam) for lam in lambdas)
    return ContractionProfile(thetas, kappa=kappa, lambdas=tuple(lambdas))


def minorization_theta(m0: float) -> float:
    """Contraction bound 1 - m0 implied by a uniform minorization mass."""
    if not (0.0 < m0 <= 1.0):
        raise DomainError("m0 must lie in (0, 1]")
    return 1.0 - m0


def check_minorization(k: MarkovKernel, xi: Distribution) -> float:
    """Largest m0 with K(x, .) >= m0 * xi pointwise, clipped to [0, 1]."""
    if xi.space != k.target:
        raise SpaceMismatch("xi must live on the kernel's target space")
    support = xi.weights > 0.0
    if not np.any(support):
        return 0.0
    ratios = k.matrix[:, support] / xi.weights[support]
    return float(np.clip(ratios.min(), 0.0, 1.0))


def best_minorization(k: MarkovKernel) -> tuple[float, Distribution]:
    """The minorization measure attaining the largest uniform mass.

    Column minima, normalized: any feasible m0*xi must sit below every
    column minimum, so the sum of the minima is the best possible mass.
    Returns (0, uniform) when some column minimum is zero in every column.
    """
    col_min = k.matrix.min(axis=0)
    total = float(col_min.sum())
    if total <= 0.0:
        uniform = Distribution(
            k.target, np.full(len(k.target), 1.0 / len(k.target))
        )
        return 0.0, uniform
    xi = Distribution(k.target, col_min / total)
    return min(total, 1.0), xi


def family_minorization(
    kernels: list[MarkovKernel] | tuple[MarkovKernel, ...],
) -> tuple[float, Distribution]:
    """Best common minorization (m0, xi) across every row of every kernel."""
    if not kernels:
        raise DomainError("need at least one kernel")
    target = kernels[0].target
    for k in kernels:
        if k.target != target:
            raise SpaceMismatch("kernels must share a target space")
    stacked = np.vstack([k.matrix for k in kernels])
    merged = MarkovKernel(
        FiniteSpace(tuple(f"r{i}" for i in range(stacked.shape[0]))),
        target,
        stacked,
    )
    return best_minorization(merged)


def chain_contraction_profile(kernels) -> ContractionProfile:
    """Per-step contraction coefficients of a kernel sequence."""
    return ContractionProfile(
        tuple(contraction_coefficient(k) for k in kernels)
    )
