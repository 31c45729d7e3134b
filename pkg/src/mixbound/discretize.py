"""Discretization of one-dimensional continuous kernels to finite chains.

A continuous kernel density k(x, y) on a compact interval is reduced to a
finite Markov kernel over the cells of an interval partition:

    K[c', c] = P(next in cell c | current uniform on cell c'),

computed by composite midpoint quadrature (a configurable number of
sub-points per cell on each axis; the source cell is averaged, the target
cell integrated).  Rows whose quadrature mass misses 1 by more than 1e-3
raise QuadratureFailure; smaller defects are renormalized.

Refining the partition tightens the induced contraction coefficient toward
the continuous one, so traces over a refinement sequence show stabilizing
theta estimates; a declared minorization component m0 * xi survives
discretization up to quadrature error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError, QuadratureFailure, SupportMismatch
from .mixing import (
    ContractionProfile,
    MixingMatrix,
    contraction_coefficient,
    mmc_delta_bound,
    tensorize,
)
from .process_model import ChainSpec, Distribution, FiniteSpace, MarkovKernel

# quadrature sub-points per cell per axis
DEFAULT_SUBPOINTS = 64
# tolerated defect of a row's quadrature mass before renormalization
ROW_MASS_TOLERANCE = 1e-3


@dataclass(frozen=True)
class PartitionSpec:
    """An interval [lo, hi] split at strictly increasing breakpoints."""

    lo: float
    hi: float
    breakpoints: tuple[float, ...] = ()

    def __post_init__(self):
        if not (self.lo < self.hi):
            raise DomainError("need lo < hi")
        pts = tuple(float(b) for b in self.breakpoints)
        prev = self.lo
        for b in pts:
            if not (prev < b < self.hi):
                raise DomainError(
                    "breakpoints must be strictly increasing inside (lo, hi)"
                )
            prev = b
        object.__setattr__(self, "breakpoints", pts)

    @property
    def cells(self) -> int:
        return len(self.breakpoints) + 1

    def edges(self) -> np.ndarray:
        return np.array([self.lo, *self.breakpoints, self.hi])

    def space(self) -> FiniteSpace:
        return FiniteSpace(tuple(f"c{i}" for i in range(self.cells)))

    @staticmethod
    def uniform(lo: float, hi: float, cells: int) -> "PartitionSpec":
        if cells < 1:
            raise DomainError("cells must be >= 1")
        inner = lo + (hi - lo) * np.arange(1, cells) / cells
        return PartitionSpec(lo, hi, tuple(float(b) for b in inner))

    def refines(self, other: "PartitionSpec", tol: float = 1e-9) -> bool:
        """True when every breakpoint of other appears here."""
        if (self.lo, self.hi) != (other.lo, other.hi):
            return False
        mine = np.array(self.breakpoints)
        for b in other.breakpoints:
            if mine.size == 0 or np.abs(mine - b).min() > tol:
                return False
        return True


def refine(a: PartitionSpec, b: PartitionSpec) -> PartitionSpec:
    """Coarsest partition refining both: the union of their breakpoints."""
    if (a.lo, a.hi) != (b.lo, b.hi):
        raise SupportMismatch(
            f"supports [{a.lo}, {a.hi}] and [{b.lo}, {b.hi}] differ"
        )
    merged = sorted(set(a.breakpoints) | set(b.breakpoints))
    return PartitionSpec(a.lo, a.hi, tuple(merged))


@dataclass(frozen=True, eq=False)
class ContinuousKernel1D:
    """A transition density k(x, y) on [lo, hi] x [lo, hi].

    density must accept numpy broadcasting on both arguments.  An optional
    minorization declaration (m0, xi_density) asserts
    k(x, y) >= m0 * xi(y) for all x; it is carried, not verified here, and
    checked against induced kernels by the trace diagnostics.
    """

    lo: float
    hi: float
    density: Callable = field(compare=False)
    m0: float | None = None
    xi_density: Callable | None = field(default=None, compare=False)
    name: str = "custom"

    def __post_init__(self):
        if not (self.lo < self.hi):
            raise DomainError("need lo < hi")
        if (self.m0 is None) != (self.xi_density is None):
            raise DomainError("declare m0 and xi_density together")
        if self.m0 is not None and not (0.0 < self.m0 <= 1.0):
            raise DomainError("declared m0 must lie in (0, 1]")

    def validate_rows(self, samples: int = 7, subpoints: int = 512) -> float:
        """Worst |row mass - 1| over a few source points (midpoint rule)."""
        xs = self.lo + (self.hi - self.lo) * (np.arange(samples) + 0.5) / samples
        y, w = _midpoint_grid(self.lo, self.hi, subpoints)
        mass = (self.density(xs[:, None], y[None, :]) * w).sum(axis=1)
        return float(np.abs(mass - 1.0).max())


def _midpoint_grid(lo: float, hi: float, count: int) -> tuple[np.ndarray, float]:
    width = (hi - lo) / count
    return lo + width * (np.arange(count) + 0.5), width


def _cell_subgrid(
    edges: np.ndarray, subpoints: int
) -> tuple[np.ndarray, np.ndarray]:
    """Midpoint sub-grids of every cell, flattened, with per-point weights."""
    points, weights = [], []
    for c in range(edges.size - 1):
        pts, w = _midpoint_grid(edges[c], edges[c + 1], subpoints)
        points.append(pts)
        weights.append(np.full(subpoints, w))
    return np.concatenate(points), np.concatenate(weights)


def induce_chain(
    kernel: ContinuousKernel1D,
    partition: PartitionSpec,
    steps: int,
    initial_density: Callable | None = None,
    subpoints: int = DEFAULT_SUBPOINTS,
) -> ChainSpec:
    """Finite chain over the partition cells induced by the kernel.

    Source cells use the cell-uniform convention (average over the cell);
    target cells are integrated.  The same induced kernel is used at every
    one of the `steps - 1` transitions.  initial_density defaults to the
    uniform density on [lo, hi].
    """
    if steps < 1:
        raise DomainError("steps must be >= 1")
    if not (
        math.isclose(kernel.lo, partition.lo) and math.isclose(kernel.hi, partition.hi)
    ):
        raise SupportMismatch("partition and kernel cover different intervals")
    edges = partition.edges()
    m = partition.cells
    pts, wts = _cell_subgrid(edges, subpoints)
    dens = kernel.density(pts[:, None], pts[None, :]) * wts[None, :]
    # integrate target cells, average source sub-points
    block = dens.reshape(m, subpoints, m, subpoints).sum(axis=3).mean(axis=1)
    mass = block.sum(axis=1)
    defect = np.abs(mass - 1.0)
    if defect.max() > ROW_MASS_TOLERANCE:
        worst = int(defect.argmax())
        raise QuadratureFailure(
            f"row {worst} quadrature mass {float(mass[worst])!r} misses 1 by "
            f"{defect.max():.2e} (> {ROW_MASS_TOLERANCE})"
        )
    matrix = block / mass[:, None]
    space = partition.space()
    if initial_density is None:
        init_weights = np.diff(edges)
    else:
        vals = initial_density(pts) * wts
        init_weights = vals.reshape(m, subpoints).sum(axis=1)
        if abs(init_weights.sum() - 1.0) > ROW_MASS_TOLERANCE:
            raise QuadratureFailure(
                f"initial density mass {float(init_weights.sum())!r} misses 1"
            )
    init = Distribution(space, init_weights / init_weights.sum())
    step_kernel = MarkovKernel(space, space, matrix)
    return ChainSpec(space, steps, init, (step_kernel,) * (steps - 1))


def induced_xi(
    kernel: ContinuousKernel1D,
    partition: PartitionSpec,
    subpoints: int = DEFAULT_SUBPOINTS,
) -> Distribution:
    """Cell masses of the declared minorization density."""
    if kernel.xi_density is None:
        raise DomainError("kernel declares no minorization component")
    edges = partition.edges()
    pts, wts = _cell_subgrid(edges, subpoints)
    vals = kernel.xi_density(pts) * wts
    w = vals.reshape(partition.cells, subpoints).sum(axis=1)
    return Distribution(partition.space(), w / w.sum())


@dataclass(frozen=True)
class TraceRow:
    """One refinement level of a coefficient trace."""

    cells: int
    theta: float
    delta_norm_value: float
    theta_diff: float | None
    induced_m0: float | None

    def to_json_dict(self) -> dict:
        return {
            "cells": self.cells,
            "theta": self.theta,
            "delta_norm": self.delta_norm_value,
            "theta_diff": self.theta_diff,
            "induced_m0": self.induced_m0,
        }


def coefficient_trace(
    kernel: ContinuousKernel1D,
    partitions: list[PartitionSpec] | tuple[PartitionSpec, ...],
    steps: int,
    subpoints: int = DEFAULT_SUBPOINTS,
) -> list[TraceRow]:
    """Contraction estimates along a refinement sequence of partitions.

    Partitions must be ordered so each refines its predecessor.  Each level
    reports the induced theta, the geometric mixing-matrix norm at the given
    horizon, the absolute change from the previous level, and (when the
    kernel declares a minorization component) the induced minorization mass
    against the cell-integrated xi.
    """
    if not partitions:
        raise DomainError("need at least one partition")
    for prev, cur in zip(partitions, partitions[1:]):
        if not cur.refines(prev):
            raise DomainError(
                "partitions must be ordered by refinement (each contains "
                "its predecessor's breakpoints)"
            )
    from .mixing import check_minorization

    rows: list[TraceRow] = []
    prev_theta: float | None = None
    for part in partitions:
        chain = induce_chain(kernel, part, steps, subpoints=subpoints)
        theta = contraction_coefficient(chain.kernels[0]) if steps > 1 else 0.0
        profile = ContractionProfile((theta,) * (steps - 1))
        norm = _profile_norm(profile)
        induced_m0 = None
        if kernel.xi_density is not None:
            xi = induced_xi(kernel, part, subpoints)
            induced_m0 = check_minorization(chain.kernels[0], xi)
        rows.append(
            TraceRow(
                cells=part.cells,
                theta=theta,
                delta_norm_value=norm,
                theta_diff=None if prev_theta is None else abs(theta - prev_theta),
                induced_m0=induced_m0,
            )
        )
        prev_theta = theta
    return rows


def _profile_norm(profile: ContractionProfile) -> float:
    from .mixing import delta_norm

    return delta_norm(mmc_delta_bound(profile))


def continuous_tensor_bound(alpha: float, beta: float) -> float:
    """Contraction bound for a two-factor product step: alpha + beta - alpha*beta."""
    return tensorize(alpha, beta)


def trace_mixing_matrix(
    kernel: ContinuousKernel1D,
    partition: PartitionSpec,
    steps: int,
    subpoints: int = DEFAULT_SUBPOINTS,
) -> MixingMatrix:
    """Geometric mixing-matrix bound of the induced chain at one level."""
    chain = induce_chain(kernel, partition, steps, subpoints=subpoints)
    theta = contraction_coefficient(chain.kernels[0]) if steps > 1 else 0.0
    return mmc_delta_bound(ContractionProfile((theta,) * (steps - 1)))


# --- built-in kernel registry -------------------------------------------

def _phi(z: np.ndarray) -> np.ndarray:
    return np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)


def _ncdf(z: np.ndarray) -> np.ndarray:
    from scipy.special import ndtr

    return ndtr(z)


def gaussian_ar_kernel(
    lo: float, hi: float, rho: float, sigma: float
) -> ContinuousKernel1D:
    """Autoregression y ~ Normal(rho * x, sigma^2) truncated to [lo, hi]."""
    if sigma <= 0:
        raise DomainError("sigma must be > 0")

    def density(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        z = (y - rho * x) / sigma
        mass = _ncdf((hi - rho * x) / sigma) - _ncdf((lo - rho * x) / sigma)
        return _phi(z) / (sigma * mass)

    return ContinuousKernel1D(lo, hi, density, name="gaussian_ar")


def uniform_jitter_kernel(lo: float, hi: float, width: float) -> ContinuousKernel1D:
    """y uniform on [x - width, x + width] clipped to [lo, hi]."""
    if width <= 0:
        raise DomainError("width must be > 0")

    def density(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        a = np.maximum(x - width, lo)
        b = np.minimum(x + width, hi)
        inside = (y >= a) & (y <= b)
        return inside / (b - a)

    return ContinuousKernel1D(lo, hi, density, name="uniform_jitter")


def mixture_minorized_kernel(
    lo: float, hi: float, m0: float, rho: float, sigma: float
) -> ContinuousKernel1D:
    """m0 * uniform + (1 - m0) * truncated Gaussian autoregression.

    The uniform component is the declared minorization measure, so every
    induced kernel keeps contraction <= 1 - m0 up to quadrature error.
    """
    if not (0.0 < m0 <= 1.0):
        raise DomainError("m0 must lie in (0, 1]")
    ar = gaussian_ar_kernel(lo, hi, rho, sigma)
    flat = 1.0 / (hi - lo)

    def density(x, y):
        return m0 * flat * np.ones_like(np.asarray(x) + np.asarray(y)) + (
            1.0 - m0
        ) * ar.density(x, y)

    def xi_density(y):
        return flat * np.ones_like(np.asarray(y, dtype=float))

    return ContinuousKernel1D(
        lo, hi, density, m0=m0, xi_density=xi_density, name="mixture_minorized"
    )


def tabulated_kernel(
    lo: float, hi: float, xs: np.ndarray, ys: np.ndarray, table: np.ndarray
) -> ContinuousKernel1D:
    """Bilinear interpolation of a density sampled on a rectangular grid."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    table = np.asarray(table, dtype=float)
    if xs.ndim != 1 or ys.ndim != 1 or table.shape != (xs.size, ys.size):
        raise DomainError("need table of shape (len(xs), len(ys))")
    if np.any(np.diff(xs) <= 0) or np.any(np.diff(ys) <= 0):
        raise DomainError("grid coordinates must be strictly increasing")
    if np.any(table < 0):
        raise DomainError("density values must be >= 0")

    def density(x, y):
        x = np.clip(np.asarray(x, dtype=float), xs[0], xs[-1])
        y = np.clip(np.asarray(y, dtype=float), ys[0], ys[-1])
        ix = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, xs.size - 2)
        iy = np.clip(np.searchsorted(ys, y, side="right") - 1, 0, ys.size - 2)
        fx = (x - xs[ix]) / (xs[ix + 1] - xs[ix])
        fy = (y - ys[iy]) / (ys[iy + 1] - ys[iy])
        v00 = table[ix, iy]
        v01 = table[ix, iy + 1]
        v10 = table[ix + 1, iy]
        v11 = table[ix + 1, iy + 1]
        return (
            v00 * (1 - fx) * (1 - fy)
            + v01 * (1 - fx) * fy
            + v10 * fx * (1 - fy)
            + v11 * fx * fy
        )

    return ContinuousKernel1D(lo, hi, density, name="tabulated")


def tabulated_kernel_from_csv(lo: float, hi: float, text: str) -> ContinuousKernel1D:
    """Parse "x,y,density" rows sampled on a full rectangular grid."""
    from .errors import SpecFormatError

    xs_set, ys_set, entries = set(), set(), {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if lineno == 1 and line.lower().replace(" ", "") in ("x,y,k", "x,y,density"):
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise SpecFormatError(f"line {lineno}: expected 'x,y,density'")
        try:
            x, y, v = (float(p) for p in parts)
        except ValueError:
            raise SpecFormatError(f"line {lineno}: bad number") from None
        xs_set.add(x)
        ys_set.add(y)
        entries[(x, y)] = v
    if not entries:
        raise SpecFormatError("no grid rows")
    xs = np.array(sorted(xs_set))
    ys = np.array(sorted(ys_set))
    if len(entries) != xs.size * ys.size:
        raise SpecFormatError("grid is not rectangular (missing points)")
    table = np.array([[entries[(x, y)] for y in ys] for x in xs])
    return tabulated_kernel(lo, hi, xs, ys, table)


KERNEL_BUILDERS = {
    "gaussian_ar": gaussian_ar_kernel,
    "uniform_jitter": uniform_jitter_kernel,
    "mixture_minorized": mixture_minorized_kernel,
}


def build_kernel(name: str, lo: float, hi: float, params: dict) -> ContinuousKernel1D:
    """Instantiate a registry kernel by name."""
    if name not in KERNEL_BUILDERS:
        raise DomainError(
            f"unknown kernel {name!r}; known: {sorted(KERNEL_BUILDERS)}"
        )
    return KERNEL_BUILDERS[name](lo, hi, **params)
