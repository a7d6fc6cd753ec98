"""Spectral norm and best rank-one approximations by deterministic multistart.

Two batched engines drive the estimation:

* general tensors: alternating contraction power iteration (each mode update
  exactly maximizes the multilinear value over that factor, so the objective
  is monotone without any shift);
* symmetric tensors: shifted power iteration on the sphere.  The shift
  starts at the Frobenius norm and doubles for any start whose objective
  decreases, which restores monotonicity without a global worst-case shift.

Start points are deterministic: an additive low-discrepancy sequence mapped
to the sphere through the normal quantile, plus every (signed) coordinate
direction.  The estimate is a certified lower bound on the spectral norm:
every iterate evaluates the objective at a feasible point, so the reported
value is the maximum over all iterates whether or not they converged.
Maximizer lists keep only stationary, deduplicated representatives.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .tensors import RankOneTerm, is_symmetric

__all__ = [
    "SpectralConfig",
    "SpectralResult",
    "SpectralAgreementError",
    "spectral_norm",
    "best_rank_one",
    "all_best_rank_ones",
    "stationarity_residual",
    "rank_one_error",
    "ratio",
]

_LETTERS = "abcdefgh"


class SpectralAgreementError(RuntimeError):
    """Symmetric and general estimates disagree beyond the allowed tolerance."""


@dataclass(frozen=True)
class SpectralConfig:
    starts: int | None = None          # None -> 64 * largest dimension
    max_iters: int = 500
    step_tol: float = 1e-12
    value_tol: float = 1e-10
    cluster_tol: float = 1e-6          # radians between factor directions
    tie_rel_tol: float = 1e-7
    stationarity_tol: float = 1e-8
    banach_tol: float = 1e-6
    polish_steps: int = 5
    seed: int = 1729

    def __post_init__(self):
        if self.starts is not None and self.starts < 1:
            raise ValueError("starts must be positive")
        for name in ("step_tol", "value_tol", "cluster_tol", "tie_rel_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def start_count(self, dims) -> int:
        return self.starts if self.starts is not None else 64 * max(dims)


@dataclass
class StartLog:
    engine: str
    values: np.ndarray
    converged: np.ndarray
    sweeps: int


@dataclass
class SpectralResult:
    value: float
    maximizers: list[RankOneTerm]
    general_value: float
    symmetric_value: float | None
    banach_gap: float | None
    logs: list[StartLog] = field(default_factory=list)


def _low_discrepancy_sphere(count: int, dim: int, seed: int) -> np.ndarray:
    """Additive-recurrence sequence pushed to the unit sphere."""
    phi = 2.0
    for _ in range(64):
        phi = (1.0 + phi) ** (1.0 / (dim + 1))
    alpha = (1.0 / phi) ** np.arange(1, dim + 1) % 1.0
    offset = 0.5 + (seed % 2**32) / 2.0**32
    k = np.arange(1, count + 1)[:, None]
    u = (offset + k * alpha[None, :]) % 1.0
    z = ndtri(np.clip(u, 1e-12, 1.0 - 1e-12))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def _validate(A) -> np.ndarray:
    A = np.ascontiguousarray(A, dtype=float)
    if A.ndim < 1:
        raise ValueError("need a tensor of order at least one")
    if not np.any(A):
        raise ValueError("zero tensor has no rank-one approximation direction")
    return A


def _als_general(A: np.ndarray, cfg: SpectralConfig):
    """Batched alternating contraction ascent.

    Returns per-start (factors, values, stationarity residuals, converged).
    """
    dims, d = A.shape, A.ndim
    letters = _LETTERS[:d]
    Z = _low_discrepancy_sphere(cfg.start_count(dims), sum(dims), cfg.seed)
    factors = []
    ofs = 0
    for nj in dims:
        F = Z[:, ofs:ofs + nj]
        ofs += nj
        factors.append(F / np.linalg.norm(F, axis=1, keepdims=True))
    # every coordinate tuple: finds maximizers supported on coordinate axes exactly
    coords = list(itertools.product(*[range(nj) for nj in dims]))
    for j, nj in enumerate(dims):
        E = np.zeros((len(coords), nj))
        E[np.arange(len(coords)), [c[j] for c in coords]] = 1.0
        factors[j] = np.vstack([factors[j], E])

    specs = [
        letters + "," + ",".join("s" + letters[m] for m in range(d) if m != j)
        + "->s" + letters[j]
        for j in range(d)
    ]

    def sweep(fac, iters):
        values = np.zeros(fac[0].shape[0])
        done = 0
        for it in range(iters):
            maxstep = 0.0
            for j in range(d):
                G = np.einsum(specs[j], A, *[fac[m] for m in range(d) if m != j])
                nrm = np.linalg.norm(G, axis=1)
                safe = np.maximum(nrm, 1e-300)
                new = np.where(nrm[:, None] > 1e-300, G / safe[:, None], fac[j])
                maxstep = max(maxstep, float(np.max(np.linalg.norm(new - fac[j], axis=1))))
                fac[j] = new
                values = nrm
            done = it + 1
            if maxstep < cfg.step_tol:
                break
        return values, done

    values, sweeps = sweep(factors, cfg.max_iters)
    if cfg.polish_steps:
        values2, _ = sweep(factors, cfg.polish_steps)
        values = np.maximum(values, values2)

    res = np.zeros(factors[0].shape[0])
    for j in range(d):
        G = np.einsum(specs[j], A, *[factors[m] for m in range(d) if m != j])
        lam = np.sum(G * factors[j], axis=1)
        res = np.maximum(res, np.linalg.norm(G - lam[:, None] * factors[j], axis=1))
    return factors, values, res, sweeps


def _power_symmetric(A: np.ndarray, cfg: SpectralConfig, sign: float):
    """Batched shifted power ascent on f(x) = <sign*A, x (x) ... (x) x>."""
    n, d = A.shape[0], A.ndim
    B = sign * A
    letters = _LETTERS[:d]
    spec = letters + "," + ",".join("s" + c for c in letters[1:]) + "->s" + letters[0]
    X = np.vstack([
        np.eye(n),
        -np.eye(n),
        _low_discrepancy_sphere(cfg.start_count(A.shape), n, cfg.seed),
    ])
    gamma = np.full(X.shape[0], max(np.linalg.norm(B), 1e-300))

    def contract(Xc):
        return np.einsum(spec, B, *([Xc] * (d - 1)))

    G = contract(X)
    f = np.sum(G * X, axis=1)
    sweeps = 0
    for it in range(cfg.max_iters):
        sweeps = it + 1
        W = G + gamma[:, None] * X
        nw = np.linalg.norm(W, axis=1)
        Xn = np.where(nw[:, None] > 1e-300, W / np.maximum(nw, 1e-300)[:, None], X)
        Gn = contract(Xn)
        fn = np.sum(Gn * Xn, axis=1)
        bad = fn < f - 1e-12
        step = np.linalg.norm(Xn - X, axis=1)
        if bad.any():
            gamma[bad] *= 2.0
            Xn[bad], Gn[bad], fn[bad] = X[bad], G[bad], f[bad]
            step[bad] = 1.0  # keep iterating those starts
        X, G, f = Xn, Gn, fn
        if np.max(step) < cfg.step_tol:
            break
    for _ in range(cfg.polish_steps):
        R = G - f[:, None] * X  # sphere gradient direction (up to a degree factor)
        Xn = X + (0.25 / gamma[:, None]) * R
        Xn /= np.linalg.norm(Xn, axis=1, keepdims=True)
        Gn = contract(Xn)
        fn = np.sum(Gn * Xn, axis=1)
        keep = fn >= f
        X = np.where(keep[:, None], Xn, X)
        G = np.where(keep[:, None], Gn, G)
        f = np.where(keep, fn, f)
    res = np.linalg.norm(G - f[:, None] * X, axis=1)
    return X, sign * f, res, sweeps


def _canonical_sign(v: np.ndarray) -> float:
    for x in v:
        if abs(x) > 1e-9:
            return 1.0 if x > 0 else -1.0
    return 1.0


def _canonicalize_general(lam: float, vs: list[np.ndarray]):
    s_total = 1.0
    out = []
    for v in vs:
        s = _canonical_sign(v)
        out.append(s * v)
        s_total *= s
    return lam * s_total, out


def _cluster(cands, cfg: SpectralConfig):
    """Greedy angular dedup after sorting by value then factor order."""
    if not cands:
        return []
    cos_tol = math.cos(cfg.cluster_tol)

    def sort_key(c):
        lam, vs = c
        return (-abs(lam), tuple(np.round(np.concatenate(vs), 9)))

    cands = sorted(cands, key=sort_key)
    reps = []
    for lam, vs in cands:
        dup = False
        for lam2, vs2 in reps:
            if lam * lam2 < 0:
                continue
            if abs(lam - lam2) > max(cfg.value_tol, cfg.tie_rel_tol * abs(lam2)):
                continue
            if all(abs(float(a @ b)) >= cos_tol for a, b in zip(vs, vs2)):
                dup = True
                break
        if not dup:
            reps.append((lam, vs))
    return reps


def _gather_general(A, cfg):
    factors, values, res, sweeps = _als_general(A, cfg)
    d = A.ndim
    best = float(np.max(values))
    log = StartLog("general", values.copy(), res < cfg.stationarity_tol, sweeps)
    stationary = res < cfg.stationarity_tol
    # candidate lists are anchored to the best *stationary* start; the value
    # itself is the maximum over every iterate (always a valid lower bound)
    anchor = float(np.max(values[stationary])) if stationary.any() else best
    keep = stationary & (values >= anchor * (1.0 - cfg.tie_rel_tol))
    cands = []
    for s in np.nonzero(keep)[0]:
        vs = [factors[j][s] for j in range(d)]
        lam = float(values[s])
        lam, vs = _canonicalize_general(lam, vs)
        cands.append((lam, vs))
    return best, _cluster(cands, cfg), log


def _gather_symmetric(A, cfg):
    d = A.ndim
    passes = [1.0] if d % 2 == 1 else [1.0, -1.0]
    best = 0.0
    cands = []
    logs = []
    for sign in passes:
        X, f, res, sweeps = _power_symmetric(A, cfg, sign)
        best = max(best, float(np.max(np.abs(f))))
        logs.append(StartLog("symmetric", f.copy(), res < cfg.stationarity_tol, sweeps))
        keep = res < cfg.stationarity_tol
        for s in np.nonzero(keep)[0]:
            v = X[s]
            sg = _canonical_sign(v)
            lam = float(f[s]) * sg ** d
            cands.append((lam, [sg * v] * d))
    anchor = max((abs(lam) for lam, _ in cands), default=best)
    cands = [(lam, vs) for lam, vs in cands if abs(lam) >= anchor * (1.0 - cfg.tie_rel_tol)]
    return best, _cluster(cands, cfg), logs


def _terms(cands) -> list[RankOneTerm]:
    return [RankOneTerm(lam, tuple(vs)) for lam, vs in cands]


def spectral_norm(A, cfg: SpectralConfig | None = None) -> SpectralResult:
    """Multistart lower-bound estimate of the spectral norm with maximizers.

    For symmetric input the symmetric engine runs as well and the two
    estimates must agree within ``cfg.banach_tol`` (they target the same
    value: the maximum of the multilinear form is attained on the diagonal).
    """
    A = _validate(A)
    cfg = cfg or SpectralConfig()
    if A.ndim == 1:
        v = float(np.linalg.norm(A))
        term = RankOneTerm(v, (A / v,))
        return SpectralResult(v, [term], v, None, None, [])

    general_value, gen_cands, glog = _gather_general(A, cfg)
    logs = [glog]
    symmetric_value = None
    banach_gap = None
    cands = gen_cands
    value = general_value
    if is_symmetric(A):
        symmetric_value, sym_cands, slogs = _gather_symmetric(A, cfg)
        logs.extend(slogs)
        banach_gap = abs(general_value - symmetric_value)
        scale = max(1.0, float(np.linalg.norm(A.ravel())))
        if banach_gap > cfg.banach_tol * scale:
            raise SpectralAgreementError(
                f"general estimate {general_value!r} and symmetric estimate "
                f"{symmetric_value!r} differ by {banach_gap:.3e}"
            )
        value = max(general_value, symmetric_value)
        cands = _cluster(sym_cands + gen_cands, cfg)
    anchor = max((abs(lam) for lam, _ in cands), default=value)
    cands = [(lam, vs) for lam, vs in cands if abs(lam) >= anchor * (1.0 - cfg.tie_rel_tol)]
    return SpectralResult(value, _terms(cands), general_value, symmetric_value,
                          banach_gap, logs)


def all_best_rank_ones(A, cfg: SpectralConfig | None = None,
                       symmetric: bool | None = None) -> list[RankOneTerm]:
    """Clustered global maximizers within tie tolerance of the best value.

    ``symmetric=True`` restricts the search to symmetric rank-one terms
    (input must be symmetric), ``symmetric=False`` forces the general
    search, ``None`` picks the symmetric search for symmetric input.
    """
    A = _validate(A)
    cfg = cfg or SpectralConfig()
    if symmetric is None:
        symmetric = A.ndim >= 2 and is_symmetric(A)
    if symmetric:
        if A.ndim < 2 or not is_symmetric(A):
            raise ValueError("symmetric search requires a symmetric tensor")
        value, cands, _ = _gather_symmetric(A, cfg)
    else:
        if A.ndim == 1:
            return spectral_norm(A, cfg).maximizers
        value, cands, _ = _gather_general(A, cfg)
    return _terms(cands)


def best_rank_one(A, cfg: SpectralConfig | None = None) -> RankOneTerm:
    """Highest-value maximizer; its scale has absolute value equal to the estimate."""
    result = spectral_norm(A, cfg)
    if not result.maximizers:
        raise RuntimeError("multistart produced no stationary maximizer")
    return result.maximizers[0]


def stationarity_residual(A, term: RankOneTerm) -> float:
    """Max over modes of the contraction gradient projected off the factor."""
    A = np.ascontiguousarray(A, dtype=float)
    d = A.ndim
    if term.dims != A.shape:
        raise ValueError("term shape does not match the tensor")
    worst = 0.0
    for j in range(d):
        G = A
        # contract every mode except j, highest mode first to keep indices stable
        for m in sorted((m for m in range(d) if m != j), reverse=True):
            G = np.tensordot(G, term.factors[m], axes=([m], [0]))
        lam = float(G @ term.factors[j])
        worst = max(worst, float(np.linalg.norm(G - lam * term.factors[j])))
    return worst


def rank_one_error(A, cfg: SpectralConfig | None = None) -> float:
    """Frobenius distance to the best rank-one tensor: sqrt(|A|_F^2 - |A|_2^2)."""
    A = _validate(A)
    v = spectral_norm(A, cfg).value
    return math.sqrt(max(float(np.sum(A * A)) - v * v, 0.0))


def ratio(A, cfg: SpectralConfig | None = None) -> float:
    """Spectral over Frobenius norm; scale and orthogonally invariant."""
    A = _validate(A)
    return spectral_norm(A, cfg).value / float(np.linalg.norm(A.ravel()))
