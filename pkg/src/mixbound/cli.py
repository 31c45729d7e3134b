"""Command-line front end.

Commands
--------
mixbound mixing      --in SPEC [--method exact|bound|minorization] [--n N]
mixbound bound       --n N --t T [--epsilon E] (--delta-norm D | --theta TH | --m0 M | --in SPEC)
mixbound sample-size --t T [--epsilon E] --delta D (--theta-cap TH | --m0 M)
mixbound simulate    --in SPEC [--n N] [--seed S] [--replicate R]
mixbound verify      --in SPEC --set A,B --t T --n N [--epsilon E] [--replicates R]
                     [--seed S] [--theta-source minorization|profile] [--n0 K]
                     [--deviations FILE]
mixbound discretize  --in SPEC [--subpoints K] [--emit-chain FILE]
mixbound selftest    [--criteria 1,2,...] [--out FILE]

All commands accept --out FILE (default: stdout) and --format json|csv
(default json).  Identical invocations produce byte-identical output;
files are written atomically (temp file, then rename), so a failed run
never leaves a partial output behind.

Exit codes: 0 success, 2 spec/argument parse failure, 3 enumeration or
optimization limit, 4 domain error (invalid probabilities, bad numeric
ranges), 5 unmet precondition, 1 internal error.

Spec files are JSON objects with a "v": 1 version field and a "kind"
discriminator:

kind "chain"
    {"v": 1, "kind": "chain", "states": ["a", "b"], "n": 4,
     "initial": [0.5, 0.5],
     "kernels": [[0.9, 0.1], [0.2, 0.8]]}
    "kernels" is either one row-stochastic matrix (reused every step) or a
    list of n-1 matrices.

kind "mmc"
    {"v": 1, "kind": "mmc", "observed": [...], "hidden": [...], "n": ...,
     "initial": [...], "kernels": ...}
    The initial law and kernels live on the observed x hidden pair space,
    observed-major: pair index = observed_index * |hidden| + hidden_index.

kind "adaptive"
    {"v": 1, "kind": "adaptive", "states": [...], "indices": ["g0", "g1"],
     "n": ..., "initial": [...],
     "kernel_family": {"g0": [[...]], "g1": [[...]]},
     "adaptation": ...}
    "initial" lives on the state x index pair space (state-major).
    "adaptation" is one table of shape (|states|, |indices|, |indices|)
    (reused every step) or a list of n-1 such tables; table[x][g] is the
    law of the next index given the current pair (x, g).

kind "profile"
    {"v": 1, "kind": "profile", "thetas": [0.7, 0.5, 0.2]}
    or {"v": 1, "kind": "profile", "m0": 0.3, "n": 4}
    Per-step contraction coefficients, or a shared minorization mass m0
    standing in for theta = 1 - m0 at every one of n-1 steps.

kind "family"
    {"v": 1, "kind": "family", "states": [...], "indices": [...],
     "m0": 0.3, "xi": [...], "residuals": {"g0": [[...]], ...},
     "schedule": {"c": 8.0, "alpha": 1.5,
                  "initial_gamma": "g0", "target_gamma": "g1"}}
    A minorized kernel family m0*xi + (1-m0)*R_gamma driven by a
    deterministic adaptation schedule.  Commands that need a horizon
    (mixing, simulate, verify) take it from --n.

kind "continuous"
    {"v": 1, "kind": "continuous", "support": [-3.0, 3.0],
     "kernel": {"name": "gaussian_ar", "params": {"rho": 0.5, "sigma": 1.0}},
     "partitions": {"cells": [8, 16, 32, 64]}, "n": 6}
    "kernel" is a registry name plus parameters, an inline table
    {"table": {"x": [...], "y": [...], "density": [[...]]}} interpolated
    bilinearly, or {"csv": "path"} pointing at x,y,density rows (the path
    is resolved relative to the spec file).  "partitions" gives uniform
    cell counts or explicit interior breakpoints (lists of increasing
    numbers), ordered so each partition refines the previous one.
"""
from __future__ import annotations

import argparse
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from .adaptive_sim import (
    AdaptationSchedule,
    MinorizedFamily,
    build_minorized_family,
    simulate,
    simulate_spec,
    verify_certificate,
)
from .concentration import (
    SOURCE_DELTA_CONTRACTION,
    SOURCE_DELTA_EXACT,
    SOURCE_DELTA_MINORIZATION,
    geometric_delta_norm,
    sample_size,
    slln_tail_bound,
)
from .discretize import (
    DEFAULT_SUBPOINTS,
    ContinuousKernel1D,
    PartitionSpec,
    build_kernel,
    coefficient_trace,
    induce_chain,
    tabulated_kernel,
    tabulated_kernel_from_csv,
)
from .errors import (
    DomainError,
    EnumerationLimitExceeded,
    MixboundError,
    NonConvergence,
    NormalizationError,
    OptimizationLimitExceeded,
    PreconditionFailed,
    QuadratureFailure,
    SpecFormatError,
    SupportMismatch,
    SpaceMismatch,
    LengthMismatch,
    IndexOutOfRange,
    ZeroProbabilityPrefix,
)
from .mixing import (
    ContractionProfile,
    PROVENANCE_ADAPTIVE,
    PROVENANCE_CONTRACTION,
    PROVENANCE_MINORIZATION,
    adaptive_profile,
    chain_contraction_profile,
    delta_exact,
    delta_norm,
    mmc_delta_bound,
)
from .process_model import (
    AdaptationRule,
    AdaptiveChainSpec,
    ChainSpec,
    Distribution,
    FiniteSpace,
    MarkovKernel,
    MMCSpec,
    materialize_adaptive,
    materialize_chain,
    materialize_mmc,
    product_space,
)

DEFAULT_SEED = 0

VACUOUS_THETA_WARNING = (
    "theta = 1 gives the horizon-bound norm delta_norm = n; "
    "the certificate carries no information"
)


# --- output plumbing ------------------------------------------------------

def _json_text(obj) -> str:
    def norm(x):
        if isinstance(x, np.floating):
            return float(x)
        if isinstance(x, np.integer):
            return int(x)
        if isinstance(x, np.ndarray):
            return x.tolist()
        raise TypeError(f"not JSON serializable: {type(x)!r}")

    return json.dumps(obj, indent=2, sort_keys=True, default=norm) + "\n"


def _atomic_write(path: str, text: str):
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _emit(out_path: str | None, text: str):
    if out_path:
        _atomic_write(out_path, text)
    else:
        sys.stdout.write(text)


# --- spec loading ---------------------------------------------------------

def load_doc(path: str) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise SpecFormatError(f"cannot read {path}: {e}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SpecFormatError(
            f"{path}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}"
        ) from None
    if not isinstance(doc, dict):
        raise SpecFormatError(f"{path}: top level must be a JSON object")
    version = doc.get("v", 1)
    if version != 1:
        raise SpecFormatError(f"{path}: unsupported schema version {version!r}")
    if "kind" not in doc:
        raise SpecFormatError(f"{path}: missing 'kind' discriminator")
    return doc


def _need(doc: dict, key: str, kind: str):
    if key not in doc:
        raise SpecFormatError(f"{kind} spec is missing {key!r}")
    return doc[key]


def _space(labels, what: str) -> FiniteSpace:
    if not isinstance(labels, list) or not labels:
        raise SpecFormatError(f"{what} must be a non-empty list of labels")
    return FiniteSpace(tuple(str(s) for s in labels))


def _float_array(obj, what: str, ndim: int) -> np.ndarray:
    try:
        arr = np.array(obj, dtype=float)
    except (TypeError, ValueError):
        raise SpecFormatError(f"{what} must be numeric") from None
    if arr.ndim != ndim:
        raise SpecFormatError(f"{what} must be {ndim}-dimensional")
    return arr


def _positive_int(doc: dict, key: str, kind: str) -> int:
    val = _need(doc, key, kind)
    if not isinstance(val, int) or isinstance(val, bool) or val < 1:
        raise SpecFormatError(f"{kind} spec field {key!r} must be a positive integer")
    return val


def _kernel_seq(obj, space: FiniteSpace, count: int, what: str) -> tuple[MarkovKernel, ...]:
    """One matrix (reused) or a list of count matrices over space."""
    if not isinstance(obj, list) or not obj:
        raise SpecFormatError(f"{what} must be a matrix or list of matrices")
    nested = isinstance(obj[0], list) and obj[0] and isinstance(obj[0][0], list)
    if nested:
        mats = [_float_array(m, f"{what}[{i}]", 2) for i, m in enumerate(obj)]
        if len(mats) != count:
            raise SpecFormatError(f"{what}: need {count} matrices, got {len(mats)}")
    else:
        mats = [_float_array(obj, what, 2)] * count
    return tuple(MarkovKernel(space, space, m) for m in mats)


def parse_chain(doc: dict) -> ChainSpec:
    space = _space(_need(doc, "states", "chain"), "states")
    n = _positive_int(doc, "n", "chain")
    initial = Distribution(space, _float_array(_need(doc, "initial", "chain"), "initial", 1))
    kernels = _kernel_seq(_need(doc, "kernels", "chain"), space, n - 1, "kernels")
    return ChainSpec(space, n, initial, kernels)


def parse_mmc(doc: dict) -> MMCSpec:
    observed = _space(_need(doc, "observed", "mmc"), "observed")
    hidden = _space(_need(doc, "hidden", "mmc"), "hidden")
    n = _positive_int(doc, "n", "mmc")
    pair = product_space(observed, hidden)
    initial = Distribution(pair, _float_array(_need(doc, "initial", "mmc"), "initial", 1))
    kernels = _kernel_seq(_need(doc, "kernels", "mmc"), pair, n - 1, "kernels")
    return MMCSpec(observed, hidden, n, initial, kernels)


def parse_adaptive(doc: dict) -> AdaptiveChainSpec:
    space = _space(_need(doc, "states", "adaptive"), "states")
    indices = _space(_need(doc, "indices", "adaptive"), "indices")
    n = _positive_int(doc, "n", "adaptive")
    pair = product_space(space, indices)
    initial = Distribution(
        pair, _float_array(_need(doc, "initial", "adaptive"), "initial", 1)
    )
    fam_doc = _need(doc, "kernel_family", "adaptive")
    if not isinstance(fam_doc, dict):
        raise SpecFormatError("kernel_family must map index labels to matrices")
    family = {
        str(g): MarkovKernel(space, space, _float_array(m, f"kernel_family[{g}]", 2))
        for g, m in fam_doc.items()
    }
    ad_doc = _need(doc, "adaptation", "adaptive")
    arr = _float_array(ad_doc, "adaptation", 3) if _table_depth(ad_doc) == 3 else None
    if arr is not None:
        tables = [arr] * (n - 1)
    else:
        if not isinstance(ad_doc, list):
            raise SpecFormatError("adaptation must be a table or list of tables")
        tables = [_float_array(t, f"adaptation[{i}]", 3) for i, t in enumerate(ad_doc)]
        if len(tables) != n - 1:
            raise SpecFormatError(f"adaptation: need {n - 1} tables, got {len(tables)}")
    rules = tuple(AdaptationRule(space, indices, t) for t in tables)
    return AdaptiveChainSpec(space, indices, n, initial, family, rules)


def _table_depth(obj) -> int:
    depth = 0
    while isinstance(obj, list) and obj:
        depth += 1
        obj = obj[0]
    return depth


def parse_profile(doc: dict) -> tuple[ContractionProfile, str]:
    has_thetas = "thetas" in doc
    has_m0 = "m0" in doc
    if has_thetas == has_m0:
        raise SpecFormatError("profile spec needs exactly one of 'thetas' or 'm0'")
    if has_thetas:
        thetas = _float_array(doc["thetas"], "thetas", 1)
        return ContractionProfile(tuple(float(t) for t in thetas)), PROVENANCE_CONTRACTION
    m0 = doc["m0"]
    if not isinstance(m0, (int, float)) or isinstance(m0, bool):
        raise SpecFormatError("profile field 'm0' must be a number")
    n = _positive_int(doc, "n", "profile")
    profile = ContractionProfile(
        tuple(1.0 - float(m0) for _ in range(n - 1)), m0=float(m0)
    )
    return profile, PROVENANCE_MINORIZATION


def parse_family(doc: dict) -> tuple[MinorizedFamily, AdaptationSchedule]:
    space = _space(_need(doc, "states", "family"), "states")
    indices = _space(_need(doc, "indices", "family"), "indices")
    m0 = _need(doc, "m0", "family")
    if not isinstance(m0, (int, float)) or isinstance(m0, bool):
        raise SpecFormatError("family field 'm0' must be a number")
    xi = Distribution(space, _float_array(_need(doc, "xi", "family"), "xi", 1))
    res_doc = _need(doc, "residuals", "family")
    if not isinstance(res_doc, dict):
        raise SpecFormatError("residuals must map index labels to matrices")
    residuals = {
        str(g): _float_array(m, f"residuals[{g}]", 2) for g, m in res_doc.items()
    }
    family = build_minorized_family(space, indices, float(m0), xi, residuals)
    sched_doc = _need(doc, "schedule", "family")
    if not isinstance(sched_doc, dict):
        raise SpecFormatError("schedule must be an object")
    for key in ("c", "alpha", "initial_gamma", "target_gamma"):
        if key not in sched_doc:
            raise SpecFormatError(f"schedule is missing {key!r}")
    schedule = AdaptationSchedule(
        float(sched_doc["c"]),
        float(sched_doc["alpha"]),
        str(sched_doc["initial_gamma"]),
        str(sched_doc["target_gamma"]),
    )
    if schedule.initial_gamma not in indices or schedule.target_gamma not in indices:
        raise SpecFormatError("schedule gammas must be index labels")
    return family, schedule


def parse_continuous(
    doc: dict, spec_path: str
) -> tuple[ContinuousKernel1D, list[PartitionSpec], int, int]:
    support = _need(doc, "support", "continuous")
    if not isinstance(support, list) or len(support) != 2:
        raise SpecFormatError("support must be [lo, hi]")
    lo, hi = float(support[0]), float(support[1])
    kern_doc = _need(doc, "kernel", "continuous")
    if not isinstance(kern_doc, dict):
        raise SpecFormatError("kernel must be an object")
    if "name" in kern_doc:
        params = kern_doc.get("params", {})
        if not isinstance(params, dict):
            raise SpecFormatError("kernel params must be an object")
        try:
            kernel = build_kernel(str(kern_doc["name"]), lo, hi, params)
        except TypeError as e:
            raise SpecFormatError(f"bad kernel params: {e}") from None
    elif "table" in kern_doc:
        tab = kern_doc["table"]
        if not isinstance(tab, dict):
            raise SpecFormatError("kernel table must be an object")
        kernel = tabulated_kernel(
            lo,
            hi,
            _float_array(_need(tab, "x", "kernel table"), "table x", 1),
            _float_array(_need(tab, "y", "kernel table"), "table y", 1),
            _float_array(_need(tab, "density", "kernel table"), "table density", 2),
        )
    elif "csv" in kern_doc:
        csv_path = Path(spec_path).parent / str(kern_doc["csv"])
        try:
            text = csv_path.read_text(encoding="utf-8")
        except OSError as e:
            raise SpecFormatError(f"cannot read kernel csv {csv_path}: {e}") from None
        kernel = tabulated_kernel_from_csv(lo, hi, text)
    else:
        raise SpecFormatError("kernel needs 'name', 'table', or 'csv'")
    parts_doc = _need(doc, "partitions", "continuous")
    if not isinstance(parts_doc, dict):
        raise SpecFormatError("partitions must be an object")
    if "cells" in parts_doc:
        cells = parts_doc["cells"]
        if not isinstance(cells, list) or not cells:
            raise SpecFormatError("partitions.cells must be a non-empty list")
        partitions = [PartitionSpec.uniform(lo, hi, int(m)) for m in cells]
    elif "breakpoints" in parts_doc:
        bps = parts_doc["breakpoints"]
        if not isinstance(bps, list) or not bps:
            raise SpecFormatError("partitions.breakpoints must be a non-empty list")
        partitions = [
            PartitionSpec(lo, hi, tuple(_float_array(b, "breakpoints", 1)))
            for b in bps
        ]
    else:
        raise SpecFormatError("partitions needs 'cells' or 'breakpoints'")
    steps = _positive_int(doc, "n", "continuous")
    subpoints = doc.get("subpoints", DEFAULT_SUBPOINTS)
    if not isinstance(subpoints, int) or isinstance(subpoints, bool) or subpoints < 1:
        raise SpecFormatError("subpoints must be a positive integer")
    return kernel, partitions, steps, subpoints


# --- commands -------------------------------------------------------------

def cmd_mixing(args) -> int:
    doc = load_doc(args.input)
    kind = doc["kind"]
    method = args.method
    if kind == "chain":
        spec = parse_chain(doc)
        if method == "exact":
            matrix = delta_exact(materialize_chain(spec))
        elif method == "bound":
            matrix = mmc_delta_bound(chain_contraction_profile(spec.kernels))
        else:
            raise DomainError("minorization method needs a 'family' or m0 profile spec")
    elif kind == "mmc":
        spec = parse_mmc(doc)
        if method == "exact":
            matrix = delta_exact(materialize_mmc(spec))
        elif method == "bound":
            matrix = mmc_delta_bound(chain_contraction_profile(spec.kernels))
        else:
            raise DomainError("minorization method needs a 'family' or m0 profile spec")
    elif kind == "adaptive":
        spec = parse_adaptive(doc)
        if method == "exact":
            matrix = delta_exact(materialize_adaptive(spec))
        elif method == "bound":
            matrix = mmc_delta_bound(adaptive_profile(spec), PROVENANCE_ADAPTIVE)
        else:
            raise DomainError("minorization method needs a 'family' or m0 profile spec")
    elif kind == "profile":
        profile, provenance = parse_profile(doc)
        matrix = mmc_delta_bound(profile, provenance)
    elif kind == "family":
        if args.n is None:
            raise SpecFormatError("family spec needs --n for a mixing horizon")
        if args.n < 1:
            raise DomainError("--n must be >= 1")
        family, schedule = parse_family(doc)
        if method == "minorization":
            profile = ContractionProfile(
                (1.0 - family.m0,) * (args.n - 1), m0=family.m0
            )
            matrix = mmc_delta_bound(profile, PROVENANCE_MINORIZATION)
        else:
            spec = family.spec(schedule, args.n, family.xi)
            if method == "exact":
                matrix = delta_exact(materialize_adaptive(spec))
            else:
                matrix = mmc_delta_bound(adaptive_profile(spec), PROVENANCE_ADAPTIVE)
    else:
        raise SpecFormatError(f"mixing cannot use spec kind {kind!r}")
    if args.format == "csv":
        _emit(args.out, matrix.to_csv())
    else:
        _emit(args.out, _json_text(matrix.to_json_dict()))
    return 0


def cmd_bound(args) -> int:
    routes = [
        args.delta_norm is not None,
        args.theta is not None,
        args.m0 is not None,
        args.input is not None,
    ]
    if sum(routes) != 1:
        raise SpecFormatError(
            "bound needs exactly one of --delta-norm, --theta, --m0, --in"
        )
    n = args.n
    warning = None
    if args.delta_norm is not None:
        if n is None:
            raise SpecFormatError("bound needs --n")
        dnorm, source = args.delta_norm, SOURCE_DELTA_EXACT
    elif args.theta is not None:
        if n is None:
            raise SpecFormatError("bound needs --n")
        theta = args.theta
        if not (0.0 <= theta <= 1.0):
            raise DomainError("theta must lie in [0, 1]")
        dnorm, source = geometric_delta_norm(theta, n), SOURCE_DELTA_CONTRACTION
        if theta == 1.0:
            warning = VACUOUS_THETA_WARNING
    elif args.m0 is not None:
        if n is None:
            raise SpecFormatError("bound needs --n")
        m0 = args.m0
        if not (0.0 <= m0 <= 1.0):
            raise DomainError("m0 must lie in [0, 1]")
        dnorm = geometric_delta_norm(1.0 - m0, n)
        source = SOURCE_DELTA_MINORIZATION
        if m0 == 0.0:
            warning = VACUOUS_THETA_WARNING
    else:
        doc = load_doc(args.input)
        kind = doc["kind"]
        if kind == "chain":
            matrix = delta_exact(materialize_chain(parse_chain(doc)))
            source = SOURCE_DELTA_EXACT
        elif kind == "mmc":
            matrix = delta_exact(materialize_mmc(parse_mmc(doc)))
            source = SOURCE_DELTA_EXACT
        elif kind == "adaptive":
            matrix = delta_exact(materialize_adaptive(parse_adaptive(doc)))
            source = SOURCE_DELTA_EXACT
        elif kind == "profile":
            profile, _ = parse_profile(doc)
            matrix = mmc_delta_bound(profile)
            source = SOURCE_DELTA_CONTRACTION
        else:
            raise SpecFormatError(f"bound cannot use spec kind {kind!r}")
        if n is None:
            n = matrix.horizon
        elif n != matrix.horizon:
            raise DomainError(
                f"--n {n} does not match the spec horizon {matrix.horizon}"
            )
        dnorm = delta_norm(matrix)
    cert = slln_tail_bound(n, args.t, args.epsilon, dnorm, source)
    if args.format == "csv":
        out = io.StringIO()
        out.write("source,n,t,epsilon,delta_norm,bound,clipped,probability\n")
        out.write(
            f"{cert.source},{cert.n},{cert.t!r},{cert.epsilon!r},"
            f"{cert.delta_norm!r},{cert.bound!r},{cert.clipped},"
            f"{cert.probability!r}\n"
        )
        _emit(args.out, out.getvalue())
    else:
        body = cert.to_json_dict()
        if warning:
            body["warning"] = warning
        _emit(args.out, _json_text(body))
    return 0


def cmd_sample_size(args) -> int:
    if (args.theta_cap is None) == (args.m0 is None):
        raise SpecFormatError("sample-size needs exactly one of --theta-cap, --m0")
    if args.theta_cap is not None:
        cap = args.theta_cap
    else:
        if not (0.0 <= args.m0 <= 1.0):
            raise DomainError("m0 must lie in [0, 1]")
        cap = 1.0 - args.m0
    n = sample_size(args.t, args.epsilon, args.delta, cap)
    if args.format == "csv":
        _emit(
            args.out,
            "t,epsilon,delta,theta_cap,n\n"
            f"{args.t!r},{args.epsilon!r},{args.delta!r},{cap!r},{n}\n",
        )
    else:
        _emit(
            args.out,
            _json_text(
                {
                    "v": 1,
                    "kind": "sample_size",
                    "t": args.t,
                    "epsilon": args.epsilon,
                    "delta": args.delta,
                    "theta_cap": cap,
                    "n": n,
                }
            ),
        )
    return 0


def cmd_simulate(args) -> int:
    doc = load_doc(args.input)
    kind = doc["kind"]
    if kind == "adaptive":
        spec = parse_adaptive(doc)
        states, indices = simulate_spec(spec, args.seed, args.replicate)
    elif kind == "family":
        if args.n is None:
            raise SpecFormatError("family spec needs --n for a path length")
        family, schedule = parse_family(doc)
        states, indices = simulate(
            family, schedule, args.n, args.seed, args.replicate
        )
    else:
        raise SpecFormatError(f"simulate cannot use spec kind {kind!r}")
    if args.format == "csv":
        out = io.StringIO()
        out.write("t,state,index\n")
        for t, (s, g) in enumerate(zip(states, indices), start=1):
            out.write(f"{t},{s},{g}\n")
        _emit(args.out, out.getvalue())
    else:
        _emit(
            args.out,
            _json_text(
                {
                    "v": 1,
                    "kind": "simulated_path",
                    "seed": args.seed,
                    "replicate": args.replicate,
                    "states": states,
                    "indices": indices,
                }
            ),
        )
    return 0


def cmd_verify(args) -> int:
    doc = load_doc(args.input)
    if doc["kind"] != "family":
        raise SpecFormatError("verify needs a 'family' spec")
    family, schedule = parse_family(doc)
    subset = [s.strip() for s in args.target_set.split(",") if s.strip()]
    if not subset:
        raise SpecFormatError("--set must name at least one state")
    unknown = [s for s in subset if s not in family.space]
    if unknown:
        raise DomainError(f"target set labels not in the state space: {unknown}")
    report, deviations = verify_certificate(
        family,
        schedule,
        subset,
        args.t,
        args.epsilon,
        args.n,
        args.replicates,
        seed=args.seed,
        n0=args.n0,
        theta_source=args.theta_source,
    )
    if args.format == "csv":
        d = report.to_json_dict()
        keys = sorted(k for k in d if k not in ("v", "kind", "target_set"))
        out = io.StringIO()
        out.write(",".join(["target_set"] + keys) + "\n")
        row = ["|".join(report.target_set)] + [
            repr(d[k]) if isinstance(d[k], float) else str(d[k]) for k in keys
        ]
        out.write(",".join(row) + "\n")
        _emit(args.out, out.getvalue())
    else:
        _emit(args.out, _json_text(report.to_json_dict()))
    if args.deviations:
        out = io.StringIO()
        out.write("replicate,deviation\n")
        for r, d in enumerate(deviations):
            out.write(f"{r},{float(d)!r}\n")
        _atomic_write(args.deviations, out.getvalue())
    return 0


def cmd_discretize(args) -> int:
    doc = load_doc(args.input)
    if doc["kind"] != "continuous":
        raise SpecFormatError("discretize needs a 'continuous' spec")
    kernel, partitions, steps, subpoints = parse_continuous(doc, args.input)
    if args.subpoints is not None:
        subpoints = args.subpoints
    rows = coefficient_trace(kernel, partitions, steps, subpoints=subpoints)
    if args.format == "csv":
        out = io.StringIO()
        out.write("cells,theta,delta_norm,theta_diff,induced_m0\n")
        for row in rows:
            diff = "" if row.theta_diff is None else repr(row.theta_diff)
            m0 = "" if row.induced_m0 is None else repr(row.induced_m0)
            out.write(
                f"{row.cells},{row.theta!r},{row.delta_norm_value!r},{diff},{m0}\n"
            )
        _emit(args.out, out.getvalue())
    else:
        _emit(
            args.out,
            _json_text(
                {
                    "v": 1,
                    "kind": "discretize_trace",
                    "support": [kernel.lo, kernel.hi],
                    "n": steps,
                    "subpoints": subpoints,
                    "rows": [row.to_json_dict() for row in rows],
                }
            ),
        )
    if args.emit_chain:
        chain = induce_chain(kernel, partitions[-1], steps, subpoints=subpoints)
        chain_doc = {
            "v": 1,
            "kind": "chain",
            "states": list(chain.space.labels),
            "n": chain.horizon,
            "initial": [float(w) for w in chain.initial.weights],
            "kernels": [[float(x) for x in row] for row in chain.kernels[0].matrix],
        }
        _atomic_write(args.emit_chain, _json_text(chain_doc))
    return 0


def cmd_selftest(args) -> int:
    from . import acceptance

    if args.criteria:
        try:
            numbers = sorted({int(x) for x in args.criteria.split(",") if x.strip()})
        except ValueError:
            raise SpecFormatError("--criteria must be a comma-separated list of integers")
        known = {num for num, _, _, _ in acceptance.CRITERIA}
        bad = [x for x in numbers if x not in known]
        if bad:
            raise SpecFormatError(f"unknown criteria {bad}; known: {sorted(known)}")
    else:
        numbers = None
    results = acceptance.run_all(numbers, stream=sys.stdout)
    if args.out:
        _atomic_write(
            args.out,
            _json_text(
                {
                    "v": 1,
                    "kind": "selftest_report",
                    "results": [r.to_json_dict() for r in results],
                }
            ),
        )
    failures = [r for r in results if not r.passed]
    if failures:
        sys.stdout.write(
            _json_text(
                {
                    "v": 1,
                    "kind": "selftest_failures",
                    "failures": [r.to_json_dict() for r in failures],
                }
            )
        )
        return 1
    return 0


# --- argument parsing -----------------------------------------------------

def _add_io(sub, input_required: bool = True, with_input: bool = True):
    if with_input:
        sub.add_argument("--in", dest="input", required=input_required, metavar="FILE")
    sub.add_argument("--out", dest="out", default=None, metavar="FILE")
    sub.add_argument("--format", choices=("json", "csv"), default="json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mixbound",
        description=(
            "Mixing coefficients, contraction bounds, and concentration "
            "certificates for finite-state dependent processes."
        ),
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("mixing", help="mixing matrix of a process spec")
    _add_io(p)
    p.add_argument(
        "--method", choices=("exact", "bound", "minorization"), default="exact"
    )
    p.add_argument("--n", type=int, default=None, help="horizon for family specs")
    p.set_defaults(func=cmd_mixing)

    p = subs.add_parser("bound", help="tail probability certificate")
    _add_io(p, input_required=False)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--delta-norm", dest="delta_norm", type=float, default=None)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--m0", type=float, default=None)
    p.set_defaults(func=cmd_bound)

    p = subs.add_parser("sample-size", help="horizon needed for a target tail level")
    _add_io(p, with_input=False)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--theta-cap", dest="theta_cap", type=float, default=None)
    p.add_argument("--m0", type=float, default=None)
    p.set_defaults(func=cmd_sample_size)

    p = subs.add_parser("simulate", help="sample one path of an adaptive process")
    _add_io(p)
    p.add_argument("--n", type=int, default=None, help="path length for family specs")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--replicate", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    p = subs.add_parser("verify", help="Monte Carlo check of a tail certificate")
    _add_io(p)
    p.add_argument("--set", dest="target_set", required=True, metavar="A,B")
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--replicates", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument(
        "--theta-source",
        dest="theta_source",
        choices=("minorization", "profile"),
        default="minorization",
    )
    p.add_argument("--n0", type=int, default=None)
    p.add_argument("--deviations", default=None, metavar="FILE")
    p.set_defaults(func=cmd_verify)

    p = subs.add_parser("discretize", help="finite-state reduction of a density kernel")
    _add_io(p)
    p.add_argument("--subpoints", type=int, default=None)
    p.add_argument("--emit-chain", dest="emit_chain", default=None, metavar="FILE")
    p.set_defaults(func=cmd_discretize)

    p = subs.add_parser("selftest", help="run the built-in verification suite")
    _add_io(p, with_input=False)
    p.add_argument("--criteria", default=None, metavar="1,2,...")
    p.set_defaults(func=cmd_selftest)

    return parser


_PARSE_ERRORS = (SpecFormatError,)
_LIMIT_ERRORS = (EnumerationLimitExceeded, OptimizationLimitExceeded)
_DOMAIN_ERRORS = (
    DomainError,
    SpaceMismatch,
    LengthMismatch,
    IndexOutOfRange,
    NormalizationError,
    ZeroProbabilityPrefix,
    SupportMismatch,
    QuadratureFailure,
    NonConvergence,
)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0
    try:
        return args.func(args)
    except _PARSE_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except _LIMIT_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except _DOMAIN_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return 4
    except PreconditionFailed as e:
        print(f"error: {e}", file=sys.stderr)
        return 5
    except MixboundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception:
        import traceback

        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
