"""Martingale difference profiles and finite-sample tail certificates.

For a path measure P and a path function f, the Doob increments

    V_i = E[f | X_{1:i}] - E[f | X_{1:i-1}]

are computed exactly over positive-probability prefixes, together with the
one-coordinate perturbation spreads

    Vhat_i(y, w, w') = E[f | y, w] - E[f | y, w'],

whose sup norm always dominates the corresponding ||V_i||_inf.  The Azuma
bound turns a profile into a two-sided tail bound; the mixing-matrix route
bounds every ||V_i||_inf by Lip(f) * ||Delta_n||_inf, which for occupation
frequencies (Lipschitz constant 1/n) yields

    P(|f - E f| > t) <= 2 exp(-n t^2 / (2 ||Delta_n||^2)).

All probability bounds keep the raw value of the formula (which can reach
2); the `clipped` flag marks values above 1 and `probability` is the usable
min(bound, 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, LengthMismatch, SpaceMismatch
from .mixing import MixingMatrix, delta_norm
from .norms import PathFunction
from .process_model import PathMeasure

SOURCE_AZUMA = "AzumaExact"
SOURCE_DELTA_EXACT = "DeltaExact"
SOURCE_DELTA_CONTRACTION = "DeltaContraction"
SOURCE_DELTA_MINORIZATION = "DeltaMinorization"
SOURCES = (
    SOURCE_AZUMA,
    SOURCE_DELTA_EXACT,
    SOURCE_DELTA_CONTRACTION,
    SOURCE_DELTA_MINORIZATION,
)


@dataclass(frozen=True, eq=False)
class MartingaleProfile:
    """Per-coordinate sup norms of V_i and of the perturbation spread Vhat_i."""

    horizon: int
    sup_norms: np.ndarray
    hat_sup_norms: np.ndarray

    def __post_init__(self):
        sup = np.array(self.sup_norms, dtype=float).reshape(-1)
        hat = np.array(self.hat_sup_norms, dtype=float).reshape(-1)
        if sup.size != self.horizon or hat.size != self.horizon:
            raise LengthMismatch("profile arrays must have length n")
        if np.any(sup < 0) or np.any(hat < 0):
            raise DomainError("sup norms must be >= 0")
        if np.any(sup > hat + 1e-9):
            raise DomainError("||V_i|| must not exceed ||Vhat_i|| + 1e-9")
        sup.flags.writeable = False
        hat.flags.writeable = False
        object.__setattr__(self, "sup_norms", sup)
        object.__setattr__(self, "hat_sup_norms", hat)

    def uniform(self) -> "MartingaleProfile":
        """The profile flattened to its largest entry everywhere."""
        top = float(self.sup_norms.max()) if self.horizon else 0.0
        hat_top = float(self.hat_sup_norms.max()) if self.horizon else 0.0
        return MartingaleProfile(
            self.horizon,
            np.full(self.horizon, top),
            np.full(self.horizon, max(top, hat_top)),
        )


def martingale_profile(pm: PathMeasure, f: PathFunction) -> MartingaleProfile:
    """Exact Doob-increment profile of f under pm.

    Conditional expectations exist only along prefixes of positive
    probability; zero-probability branches are skipped throughout.
    """
    if f.space != pm.space:
        raise SpaceMismatch("function and measure live on different spaces")
    if f.horizon != pm.horizon:
        raise LengthMismatch(
            f"function horizon {f.horizon} != measure horizon {pm.horizon}"
        )
    n, k = pm.horizon, len(pm.space)
    table = pm.table()
    numer = table * f.table()
    prev_cond = np.array(float(numer.sum()))  # E[f], shape ()
    sup, hat = [], []
    for i in range(1, n + 1):
        tail_axes = tuple(range(i, n))
        p_i = table.sum(axis=tail_axes) if tail_axes else table
        m_i = numer.sum(axis=tail_axes) if tail_axes else numer
        live = p_i > 0.0
        cond = np.divide(m_i, p_i, out=np.zeros_like(m_i), where=live)
        v = cond - prev_cond[..., None]
        sup.append(float(np.abs(v[live]).max()) if np.any(live) else 0.0)
        cond2 = cond.reshape(-1, k)
        live2 = live.reshape(-1, k)
        rows = live2.sum(axis=1) >= 2
        if np.any(rows):
            hi = np.where(live2, cond2, -np.inf).max(axis=1)
            lo = np.where(live2, cond2, np.inf).min(axis=1)
            hat.append(float((hi[rows] - lo[rows]).max()))
        else:
            hat.append(0.0)
        prev_cond = cond
    return MartingaleProfile(n, np.array(sup), np.array(hat))


def azuma_bound(profile: MartingaleProfile, t: float) -> float:
    """Two-sided tail bound 2 exp(-t^2 / (2 sum_i ||V_i||^2)).

    Conventions: with an all-zero profile the function is almost surely
    constant, so the bound is 0 for t > 0 and the vacuous 2 at t = 0.
    """
    if t < 0:
        raise DomainError("t must be >= 0")
    s = float((profile.sup_norms**2).sum())
    if s == 0.0:
        return 2.0 if t == 0.0 else 0.0
    return 2.0 * math.exp(-(t * t) / (2.0 * s))


@dataclass(frozen=True)
class MgaleCheck:
    """Per-coordinate slacks of ||V_i||_inf <= Lip(f) * ||Delta_n||_inf."""

    ok: bool
    lipschitz: float
    norm: float
    slacks: tuple[float, ...]

    @property
    def min_slack(self) -> float:
        return min(self.slacks)


def check_mgale_bound(
    pm: PathMeasure, f: PathFunction, m: MixingMatrix
) -> MgaleCheck:
    """Verify the martingale bound of a mixing matrix against exact V_i."""
    if m.horizon != pm.horizon:
        raise LengthMismatch("mixing matrix horizon != measure horizon")
    profile = martingale_profile(pm, f)
    ceiling = f.lipschitz * delta_norm(m)
    slacks = tuple(float(ceiling - s) for s in profile.sup_norms)
    return MgaleCheck(
        ok=all(s >= -1e-9 for s in slacks),
        lipschitz=f.lipschitz,
        norm=delta_norm(m),
        slacks=slacks,
    )


def geometric_delta_norm(theta: float, n: int | None) -> float:
    """(1 - theta^n) / (1 - theta); n = None gives the cap 1 / (1 - theta).

    theta = 1 returns n by convention (the geometric sum degenerates to n
    terms of 1); the cap is undefined there.
    """
    if not (0.0 <= theta <= 1.0):
        raise DomainError("theta must lie in [0, 1]")
    if n is None:
        if theta >= 1.0:
            raise DomainError("the horizon-free cap needs theta < 1")
        return 1.0 / (1.0 - theta)
    if n < 1:
        raise DomainError("n must be >= 1")
    if theta == 1.0:
        return float(n)
    return (1.0 - theta**n) / (1.0 - theta)


@dataclass(frozen=True)
class ConcentrationCertificate:
    """A finite-sample tail bound with its provenance.

    bound keeps the raw value of the exponential formula, which lies in
    (0, 2]; clipped marks bounds above 1, and probability is min(bound, 1).
    """

    source: str
    n: int
    t: float
    epsilon: float
    delta_norm: float | None
    bound: float

    def __post_init__(self):
        if self.source not in SOURCES:
            raise DomainError(f"unknown source {self.source!r}")
        if not (0.0 <= self.bound <= 2.0 + 1e-12):
            raise DomainError("bound must lie in [0, 2]")
        if self.source != SOURCE_AZUMA:
            if self.delta_norm is None:
                raise DomainError("delta-based certificates need delta_norm")
            expected = 2.0 * math.exp(
                -(self.n * self.t * self.t) / (2.0 * self.delta_norm**2)
            )
            if abs(self.bound - expected) > 1e-9:
                raise DomainError("bound inconsistent with its formula")

    @property
    def clipped(self) -> bool:
        return self.bound > 1.0

    @property
    def probability(self) -> float:
        return min(self.bound, 1.0)

    def to_json_dict(self) -> dict:
        return {
            "v": 1,
            "kind": "concentration_certificate",
            "source": self.source,
            "n": self.n,
            "t": self.t,
            "epsilon": self.epsilon,
            "delta_norm": self.delta_norm,
            "bound": self.bound,
            "clipped": self.clipped,
            "probability": self.probability,
        }


def slln_tail_bound(
    n: int,
    t: float,
    epsilon: float,
    dnorm: float,
    source: str = SOURCE_DELTA_EXACT,
) -> ConcentrationCertificate:
    """Certificate for P(|empirical frequency - target| > t + epsilon).

    Valid once n exceeds the bias horizon n0(epsilon) chosen by the caller;
    epsilon is recorded, not used in the formula.  t = 0 is allowed and
    yields the vacuous bound 2.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    if t < 0:
        raise DomainError("t must be >= 0")
    if epsilon < 0:
        raise DomainError("epsilon must be >= 0")
    if dnorm < 1.0 - 1e-12:
        raise DomainError("delta_norm is always >= 1")
    bound = 2.0 * math.exp(-(n * t * t) / (2.0 * dnorm * dnorm))
    return ConcentrationCertificate(
        source=source, n=n, t=t, epsilon=epsilon, delta_norm=float(dnorm), bound=bound
    )


def azuma_certificate(
    profile: MartingaleProfile, t: float, epsilon: float = 0.0
) -> ConcentrationCertificate:
    """Wrap azuma_bound(profile, t) as a certificate."""
    return ConcentrationCertificate(
        source=SOURCE_AZUMA,
        n=profile.horizon,
        t=t,
        epsilon=epsilon,
        delta_norm=None,
        bound=azuma_bound(profile, t),
    )


def sample_size(t: float, epsilon: float, delta: float, theta_cap: float) -> int:
    """Smallest n with 2 exp(-n t^2 / (2 M^2)) <= delta, M = 1/(1 - theta_cap).

    Inverts the tail bound at the horizon-independent norm cap M, so the
    returned n satisfies bound(n) <= delta < bound(n - 1) whenever n > 1.
    delta >= 2 needs no samples at all: the vacuous bound already suffices.
    """
    if t <= 0:
        raise DomainError("t must be > 0")
    if epsilon < 0:
        raise DomainError("epsilon must be >= 0")
    if delta <= 0:
        raise DomainError("delta must be > 0")
    if not (0.0 <= theta_cap < 1.0):
        raise DomainError("theta_cap must lie in [0, 1)")
    if delta >= 2.0:
        return 1
    m_cap = 1.0 / (1.0 - theta_cap)
    raw = 2.0 * m_cap * m_cap * math.log(2.0 / delta) / (t * t)
    return max(1, math.ceil(raw))
