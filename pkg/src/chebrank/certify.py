"""Criticality certificates, nuclear-norm bounds, and the dimension lift.

A nonzero tensor is critical for the spectral/Frobenius ratio exactly when
its rescaling by |A|_2 / |A|_F^2 lies in the convex hull of its unit-norm
best rank-one directions.  The certificate solves that membership problem
with simplex-constrained least squares over the maximizers found by
multistart (or over explicitly supplied candidates) and reports the
residual either way.  A feasible certificate doubles as a nuclear
decomposition, which pins the nuclear norm at |A|_F^2 / |A|_2 and hence
certifies equality in the duality bound |A|_F^2 <= |A|_2 |A|_*.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import nnls

from .orthorank import OrthoDecomposition
from .spectral import SpectralConfig, all_best_rank_ones, spectral_norm
from .tensors import RankOneTerm, frobenius_norm, is_symmetric

__all__ = [
    "CriticalityCertificate",
    "NuclearBounds",
    "CriteriaEquality",
    "criticality_certificate",
    "nuclear_bounds",
    "check_criteria_equality",
    "dimension_lift",
    "critical_epsilon",
    "count_distinct_best",
]

FEASIBILITY_REL_TOL = 1e-6   # on the residual, relative to |A|_F
SUM_ROW_WEIGHT = 1e3


@dataclass
class CriticalityCertificate:
    feasible: bool
    terms: list[RankOneTerm]        # unit Frobenius norm directions
    weights: np.ndarray             # on the simplex
    residual: float
    threshold: float
    mu: float                       # |A|_2 / |A|_F^2
    spectral_value: float
    symmetric: bool


@dataclass
class NuclearBounds:
    lower: float
    upper: float
    gap: float
    source: str                     # "supplied", "certificate", or "infeasible"


@dataclass
class CriteriaEquality:
    critical_detected: bool
    lhs: float                      # |A|_2 * nuclear upper bound
    rhs: float                      # |A|_F^2
    gap: float                      # relative
    nuclear_upper: float
    spectral_value: float


def _simplex_least_squares(columns: np.ndarray, target: np.ndarray):
    """min |columns @ a - target| over a >= 0 with sum(a) = 1 (soft, then renormalized)."""
    aug = np.vstack([columns, SUM_ROW_WEIGHT * np.ones((1, columns.shape[1]))])
    rhs = np.concatenate([target, [SUM_ROW_WEIGHT]])
    alpha, _ = nnls(aug, rhs)
    total = alpha.sum()
    if total > 0:
        alpha = alpha / total
    return alpha


def criticality_certificate(A, cfg: SpectralConfig | None = None,
                            symmetric: bool = False,
                            candidates: list[RankOneTerm] | None = None,
                            ) -> CriticalityCertificate:
    """Convex-combination certificate over best rank-one directions.

    The directions default to the clustered multistart maximizers (the
    symmetric ones when ``symmetric=True``); an explicit candidate list can
    be supplied instead, e.g. a known closed-form family.  The certificate
    is feasible when the achieved residual is below 1e-6 * |A|_F.
    """
    A = np.ascontiguousarray(A, dtype=float)
    fro = frobenius_norm(A)
    if fro == 0.0:
        raise ValueError("zero tensor cannot be certified")
    if symmetric and not is_symmetric(A):
        raise ValueError("symmetric certificate requires a symmetric tensor")
    cfg = cfg or SpectralConfig()
    if candidates is None:
        candidates = all_best_rank_ones(A, cfg, symmetric=symmetric)
    if not candidates:
        raise ValueError("no best rank-one candidates available")

    # re-evaluate each candidate against A and orient it to positive value
    directions, values = [], []
    for t in candidates:
        inner = float(np.sum(A * t.expand())) / abs(t.scale) if t.scale else 0.0
        # inner is <A, (x) factors>; orient the unit direction along +|A|_2
        sign = 1.0 if inner >= 0 else -1.0
        directions.append(RankOneTerm(sign, t.factors))
        values.append(abs(inner))
    value = max(values)
    tol = max(cfg.value_tol, cfg.tie_rel_tol * value)
    keep = [i for i, v in enumerate(values) if value - v <= tol]
    directions = [directions[i] for i in keep]

    mu = value / (fro * fro)
    M = np.column_stack([x.expand().ravel() for x in directions])
    target = mu * A.ravel()
    alpha = _simplex_least_squares(M, target)
    active = alpha > 1e-12
    if active.any():
        alpha = np.where(active, alpha, 0.0)
        alpha = alpha / alpha.sum()
    residual = float(np.linalg.norm(M @ alpha - target))
    threshold = FEASIBILITY_REL_TOL * fro
    terms = [d for d, a in zip(directions, alpha) if a > 0.0]
    weights = alpha[alpha > 0.0]
    return CriticalityCertificate(residual < threshold, terms, weights, residual,
                                  threshold, mu, value, symmetric)


def _upper_from_terms(A, terms, fro):
    recon = np.zeros_like(A)
    total = 0.0
    for t in terms:
        recon += t.expand()
        total += abs(t.scale)
    if frobenius_norm(A - recon) > 1e-8 * max(1.0, fro):
        raise ValueError("supplied decomposition does not reconstruct the tensor")
    return total


def nuclear_bounds(A, decomposition=None, cfg: SpectralConfig | None = None) -> NuclearBounds:
    """Bracket the nuclear norm.

    Lower bound |A|_F^2 / |A|_2 always holds; the upper bound is the total
    scale of a verified rank-one decomposition: the supplied one, or the one
    a feasible criticality certificate induces.  Infinite when neither exists.
    """
    A = np.ascontiguousarray(A, dtype=float)
    fro = frobenius_norm(A)
    if fro == 0.0:
        raise ValueError("zero tensor")
    cfg = cfg or SpectralConfig()
    value = spectral_norm(A, cfg).value
    lower = fro * fro / value
    if decomposition is not None:
        terms = decomposition.terms if isinstance(decomposition, OrthoDecomposition) \
            else list(decomposition)
        upper = _upper_from_terms(A, terms, fro)
        source = "supplied"
    else:
        cert = criticality_certificate(A, cfg)
        if cert.feasible:
            # A = sum (alpha_l / mu) X_l with unit-norm X_l
            upper = float(np.sum(cert.weights)) / cert.mu
            source = "certificate"
        else:
            upper = math.inf
            source = "infeasible"
    return NuclearBounds(lower, upper, upper - lower, source)


def check_criteria_equality(A, cfg: SpectralConfig | None = None,
                            decomposition=None) -> CriteriaEquality:
    """Test |A|_2 * |A|_* = |A|_F^2 through the certificate-derived upper bound.

    Equality within 1e-6 relative detects criticality; a supplied
    decomposition gives a finite upper bound (hence a finite gap) when the
    certificate is infeasible.
    """
    A = np.ascontiguousarray(A, dtype=float)
    fro = frobenius_norm(A)
    if fro == 0.0:
        raise ValueError("zero tensor")
    cfg = cfg or SpectralConfig()
    value = spectral_norm(A, cfg).value
    upper = math.inf
    cert = criticality_certificate(A, cfg)
    if cert.feasible:
        upper = float(np.sum(cert.weights)) / cert.mu
    if decomposition is not None:
        terms = decomposition.terms if isinstance(decomposition, OrthoDecomposition) \
            else list(decomposition)
        upper = min(upper, _upper_from_terms(A, terms, fro))
    rhs = fro * fro
    lhs = value * upper
    gap = (lhs - rhs) / rhs if math.isfinite(lhs) else math.inf
    return CriteriaEquality(abs(gap) < FEASIBILITY_REL_TOL if math.isfinite(gap) else False,
                            lhs, rhs, gap, upper, value)


def critical_epsilon(spectral_value: float) -> float:
    """Mixing weight that minimizes the lifted spectral bound."""
    return 1.0 / math.sqrt(1.0 + spectral_value ** 2)


def dimension_lift(A, epsilon: float | None = None,
                   cfg: SpectralConfig | None = None) -> np.ndarray:
    """Embed a unit-norm n^d tensor into (n+1)^d with a corner entry.

    The lifted tensor keeps unit Frobenius norm and stays symmetric for
    symmetric input.  At the critical epsilon the lifted spectral norm is
    at most |A|_2 / sqrt(1 + |A|_2^2), which strictly decreases the ratio.
    """
    A = np.ascontiguousarray(A, dtype=float)
    if len(set(A.shape)) > 1:
        raise ValueError("lift requires a cubical tensor")
    if abs(frobenius_norm(A) - 1.0) > 1e-10:
        raise ValueError("lift requires unit Frobenius norm")
    n, d = A.shape[0], A.ndim
    value = spectral_norm(A, cfg or SpectralConfig()).value
    if epsilon is None:
        epsilon = critical_epsilon(value)
    if not 0.0 <= epsilon <= 1.0 / value + 1e-12:
        raise ValueError(f"epsilon must lie in [0, {1.0 / value!r}]")
    B = np.zeros((n + 1,) * d)
    B[(slice(0, n),) * d] = math.sqrt(max(1.0 - epsilon ** 2 * value ** 2, 0.0)) * A
    B[(n,) * d] = epsilon * value
    return B


def count_distinct_best(A, cfg: SpectralConfig | None = None,
                        symmetric: bool | None = None) -> int:
    """Number of clustered best rank-one approximations the search resolves.

    Any tensor attaining the minimal spectral/Frobenius ratio of its space
    must have at least n of them, so a smaller count flags either
    non-extremality or insufficient multistart coverage.
    """
    return len(all_best_rank_ones(A, cfg, symmetric=symmetric))
