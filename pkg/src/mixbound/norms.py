"""Path-function norms built on the Hamming metric.

A path function is a dense real table over Omega^n (same lexicographic
layout as PathMeasure).  Two norms are computed against the counting
measure on Omega^n:

* psi_norm: the larger of Psi(f) and Psi(-f), where Psi is defined by
  integrating out the first coordinate step by step,
      Psi_0 = 0,   Psi_n(f) = Psi_{n-1}(pi f) + sum_x max(f(x), 0),
  with (pi f)(x_2..x_n) = sum_{x_1} f(x_1, x_2..x_n).

* phi_norm: sup over test functions g: Omega^n -> [0, n] that are
  1-Lipschitz in the Hamming metric of |<f, g>|, an LP over the box with
  difference constraints on Hamming-adjacent pairs.

Psi dominates the one-sided supremum sup_g <f, g>, and both norms sit
between half the l1 norm and n times the l1 norm (for |Omega| >= 2; with a
single state the Lipschitz class collapses to {0} and phi_norm is 0).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .errors import (
    DomainError,
    LengthMismatch,
    NonConvergence,
    OptimizationLimitExceeded,
    SpaceMismatch,
)
from .process_model import Distribution, FiniteSpace

# phi_norm solves an LP with |Omega|^n variables; refuse instances where
# n * |Omega|^n exceeds this.
DEFAULT_OPT_LIMIT = 20_000


def hamming(x, y) -> int:
    """Number of coordinates where two equal-length paths differ."""
    if len(x) != len(y):
        raise LengthMismatch(f"paths of length {len(x)} and {len(y)}")
    return sum(1 for a, b in zip(x, y) if a != b)


@dataclass(frozen=True, eq=False)
class PathFunction:
    """A real-valued function on Omega^n as a dense lexicographic table."""

    space: FiniteSpace
    horizon: int
    values: np.ndarray

    def __post_init__(self):
        k = len(self.space)
        if self.horizon < 0:
            raise DomainError("horizon must be >= 0")
        v = np.array(self.values, dtype=float).reshape(-1)
        if v.size != k**self.horizon:
            raise SpaceMismatch(
                f"expected {k}**{self.horizon} values, got {v.size}"
            )
        if not np.all(np.isfinite(v)):
            raise DomainError("values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def table(self) -> np.ndarray:
        return self.values.reshape((len(self.space),) * self.horizon)

    def path_index(self, path) -> int:
        k = len(self.space)
        if len(path) != self.horizon:
            raise LengthMismatch(
                f"path length {len(path)} != horizon {self.horizon}"
            )
        idx = 0
        for label in path:
            idx = idx * k + self.space.index(label)
        return idx

    def value(self, path) -> float:
        return float(self.values[self.path_index(path)])

    @property
    def lipschitz(self) -> float:
        """Hamming-Lipschitz constant, computed once and cached."""
        cached = self.__dict__.get("_lip")
        if cached is None:
            cached = lipschitz_constant(self)
            object.__setattr__(self, "_lip", cached)
        return cached

    def l1(self) -> float:
        """l1 norm against the counting measure."""
        return float(np.abs(self.values).sum())

    def __neg__(self) -> "PathFunction":
        return PathFunction(self.space, self.horizon, -self.values)


def lipschitz_constant(f: PathFunction) -> float:
    """Largest |f(x) - f(y)| over Hamming-adjacent pairs.

    Pairs at distance 1 suffice: any two paths are joined by a chain of
    single-coordinate edits, so the distance-1 maximum already bounds
    |f(x) - f(y)| / hamming(x, y) for every pair.
    """
    n, k = f.horizon, len(f.space)
    if n == 0 or k == 1:
        return 0.0
    shaped = f.table()
    best = 0.0
    for axis in range(n):
        rows = np.moveaxis(shaped, axis, 0).reshape(k, -1)
        for a in range(k - 1):
            best = max(best, float(np.abs(rows[a + 1 :] - rows[a]).max()))
    return best


def project(f: PathFunction, mu=None) -> PathFunction:
    """Integrate out the first coordinate against mu (default: counting).

    mu may be a Distribution on f's space or a weight vector; the result is
    a path function on Omega^(n-1).
    """
    if f.horizon == 0:
        raise DomainError("cannot project a 0-coordinate function")
    k = len(f.space)
    if mu is None:
        weights = np.ones(k)
    elif isinstance(mu, Distribution):
        if mu.space != f.space:
            raise SpaceMismatch("mu must live on the function's space")
        weights = mu.weights
    else:
        weights = np.array(mu, dtype=float).reshape(-1)
        if weights.size != k:
            raise SpaceMismatch(f"expected {k} weights, got {weights.size}")
    out = weights @ f.values.reshape(k, -1)
    return PathFunction(f.space, f.horizon - 1, out)


def psi_functional(f: PathFunction) -> float:
    """One-sided Psi functional via the first-coordinate recursion."""
    if f.horizon == 0:
        return 0.0
    positive_part = float(np.clip(f.values, 0.0, None).sum())
    return psi_functional(project(f)) + positive_part


def psi_norm(f: PathFunction) -> float:
    """max(Psi(f), Psi(-f))."""
    return max(psi_functional(f), psi_functional(-f))


def _adjacency_pairs(n: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Flat-index pairs of Hamming-adjacent paths, each unordered pair once."""
    size = k**n
    idx = np.arange(size)
    left, right = [], []
    for axis in range(n):
        stride = k ** (n - 1 - axis)
        coord = (idx // stride) % k
        for a in range(k - 1):
            base = idx[coord == a]
            for b in range(a + 1, k):
                left.append(base)
                right.append(base + (b - a) * stride)
    if not left:
        return np.empty(0, dtype=int), np.empty(0, dtype=int)
    return np.concatenate(left), np.concatenate(right)


def _lipschitz_box_lp(
    objective: np.ndarray, n: int, k: int
) -> tuple[float, np.ndarray]:
    """Maximize <objective, g> over 0 <= g <= n, |g(x)-g(y)| <= 1 on edges."""
    size = k**n
    if n == 0 or k == 1:
        return 0.0, np.zeros(size)
    left, right = _adjacency_pairs(n, k)
    m = left.size
    rows = np.repeat(np.arange(2 * m), 2)
    cols = np.concatenate(
        [np.stack([left, right], axis=1).ravel(),
         np.stack([right, left], axis=1).ravel()]
    )
    data = np.tile([1.0, -1.0], 2 * m)
    a_ub = sparse.coo_matrix((data, (rows, cols)), shape=(2 * m, size))
    res = linprog(
        c=-objective,
        A_ub=a_ub.tocsr(),
        b_ub=np.ones(2 * m),
        bounds=(0.0, float(n)),
        method="highs",
    )
    if res.status != 0:
        raise NonConvergence(f"norm LP failed with status {res.status}")
    return float(-res.fun), np.asarray(res.x)


def _check_opt_limit(f: PathFunction, limit: int):
    cost = max(f.horizon, 1) * len(f.space) ** f.horizon
    if cost > limit:
        raise OptimizationLimitExceeded(
            f"norm LP size n*|Omega|^n = {cost} exceeds limit {limit}"
        )


def phi_norm(f: PathFunction, limit: int = DEFAULT_OPT_LIMIT) -> float:
    """sup |<f, g>| over Hamming-1-Lipschitz g with values in [0, n].

    The feasible set is symmetric enough that the supremum is the larger of
    the two one-sided LP values for f and -f (g = 0 is feasible, so both
    are nonnegative).
    """
    _check_opt_limit(f, limit)
    n, k = f.horizon, len(f.space)
    val_plus, _ = _lipschitz_box_lp(f.values, n, k)
    val_minus, _ = _lipschitz_box_lp(-f.values, n, k)
    return max(val_plus, val_minus)


def check_psi_domination(
    f: PathFunction, limit: int = DEFAULT_OPT_LIMIT
) -> tuple[float, PathFunction]:
    """Slack of sup_g <f, g> <= Psi(f), with the maximizing g.

    The returned slack is Psi(f) minus the LP value; it must be >= -1e-9
    for every table (the domination is an inequality, not an identity).
    """
    _check_opt_limit(f, limit)
    n, k = f.horizon, len(f.space)
    value, g = _lipschitz_box_lp(f.values, n, k)
    slack = psi_functional(f) - value
    return slack, PathFunction(f.space, n, g)


@dataclass(frozen=True)
class NormReport:
    """Norms of one path function, with the sandwich bounds as invariants."""

    states: int
    horizon: int
    l1: float
    phi: float
    psi: float
    psi_plus: float
    psi_minus: float

    def __post_init__(self):
        if abs(self.psi - max(self.psi_plus, self.psi_minus)) > 1e-12:
            raise DomainError("psi must equal max(psi_plus, psi_minus)")
        upper = self.horizon * self.l1 + 1e-9
        if self.phi > upper or self.psi > upper:
            raise DomainError("norm exceeds n * l1 sandwich bound")
        if self.states >= 2:
            lower = 0.5 * self.l1 - 1e-9
            if self.phi < lower or self.psi < lower:
                raise DomainError("norm below l1/2 sandwich bound")

    def to_json_dict(self) -> dict:
        return {
            "v": 1,
            "kind": "norm_report",
            "states": self.states,
            "n": self.horizon,
            "l1": self.l1,
            "phi": self.phi,
            "psi": self.psi,
            "psi_plus": self.psi_plus,
            "psi_minus": self.psi_minus,
        }


def norm_report(f: PathFunction, limit: int = DEFAULT_OPT_LIMIT) -> NormReport:
    """Compute l1, phi, and psi norms of one table."""
    plus = psi_functional(f)
    minus = psi_functional(-f)
    return NormReport(
        states=len(f.space),
        horizon=f.horizon,
        l1=f.l1(),
        phi=phi_norm(f, limit),
        psi=max(plus, minus),
        psi_plus=plus,
        psi_minus=minus,
    )


def empirical_frequency_function(
    space: FiniteSpace, n: int, subset
) -> PathFunction:
    """f(x) = fraction of coordinates of x lying in the given state subset.

    The workhorse test function for occupation-frequency tail bounds; its
    Hamming-Lipschitz constant is 1/n whenever the subset is proper and
    non-empty.
    """
    if n < 1:
        raise DomainError("horizon must be >= 1")
    k = len(space)
    member = np.array([1.0 if s in set(subset) else 0.0 for s in space.labels])
    acc = np.zeros((k,) * n)
    for axis in range(n):
        shape = [1] * n
        shape[axis] = k
        acc = acc + member.reshape(shape)
    return PathFunction(space, n, acc.reshape(-1) / n)


def path_function_to_json_dict(f: PathFunction) -> dict:
    return {
        "v": 1,
        "kind": "path_function",
        "space": list(f.space.labels),
        "n": f.horizon,
        "values": [float(v) for v in f.values],
    }


def path_function_from_json_dict(doc: dict) -> PathFunction:
    from .errors import SpecFormatError

    for key in ("space", "n", "values"):
        if key not in doc:
            raise SpecFormatError(f"path function document missing {key!r}")
    space = FiniteSpace(tuple(str(s) for s in doc["space"]))
    return PathFunction(space, int(doc["n"]), np.array(doc["values"], dtype=float))


def path_function_from_csv(text: str) -> PathFunction:
    """Parse "path,value" rows; the path is a dash-joined label tuple.

    All |Omega|^n paths must be present exactly once.  The state order is
    the sorted set of labels seen in the paths.
    """
    from .errors import SpecFormatError

    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if lineno == 1 and line.lower().replace(" ", "") == "path,value":
            continue
        parts = line.rsplit(",", 1)
        if len(parts) != 2:
            raise SpecFormatError(f"line {lineno}: expected 'path,value'")
        try:
            value = float(parts[1])
        except ValueError:
            raise SpecFormatError(f"line {lineno}: bad value {parts[1]!r}") from None
        rows.append((tuple(parts[0].split("-")), value))
    if not rows:
        raise SpecFormatError("no data rows")
    n = len(rows[0][0])
    labels = sorted({lab for path, _ in rows for lab in path})
    space = FiniteSpace(tuple(labels))
    k = len(space)
    if len(rows) != k**n:
        raise SpecFormatError(
            f"expected {k}**{n} = {k**n} rows, got {len(rows)}"
        )
    values = np.full(k**n, np.nan)
    for path, value in rows:
        if len(path) != n:
            raise SpecFormatError("inconsistent path lengths")
        idx = 0
        for lab in path:
            idx = idx * k + space.index(lab)
        if not np.isnan(values[idx]):
            raise SpecFormatError(f"duplicate path {'-'.join(path)!r}")
        values[idx] = value
    return PathFunction(space, n, values)
