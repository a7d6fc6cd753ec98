"""Constructive decompositions into pairwise Frobenius-orthogonal rank-one terms.

The (3,3,2) bound of five terms and the (3,3,3) bound of seven terms both
rest on one matrix fact: for odd n, two n x n matrices with at least one of
them invertible can be brought to a common block-triangular shape (zero last
row except the corner) by one orthogonal transformation on each side.  The
(3,3,3) routine zeroes the bottom rows of two slices, decomposes the top
part as an essentially (2,3,3) tensor, and splits the remaining bottom-row
matrix (rank at most two) by SVD.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .tensors import RankOneTerm, frobenius_norm, group_action, rank_one_inner

__all__ = [
    "OrthoDecomposition",
    "OrthoVerification",
    "matrix_ortho_split",
    "simultaneous_block_triangularize",
    "ortho_decompose_332",
    "ortho_decompose_333",
    "entrywise_decomposition",
    "verify_ortho",
]

SINGULAR_REL_TOL = 1e-8     # below this relative sigma_min a slice counts as singular
SPLIT_REL_TOL = 1e-12       # SVD terms kept above this relative singular value
RESIDUAL_TARGET = 1e-9


@dataclass
class OrthoDecomposition:
    terms: list[RankOneTerm]
    orthogonality_residual: float
    reconstruction_residual: float
    mode_permutation: tuple[int, ...] = ()

    @property
    def count(self) -> int:
        return len(self.terms)

    def reconstruct(self) -> np.ndarray:
        out = None
        for t in self.terms:
            out = t.expand() if out is None else out + t.expand()
        return out


def _residuals(A, terms):
    if not terms:
        return 0.0, frobenius_norm(A)
    recon = np.zeros_like(A)
    for t in terms:
        recon += t.expand()
    orth = 0.0
    for i in range(len(terms)):
        for j in range(i + 1, len(terms)):
            orth = max(orth, abs(rank_one_inner(terms[i], terms[j])))
    return orth, frobenius_norm(A - recon)


def _finalize(A, terms, mode_permutation=()):
    terms = _merge_compatible(terms)
    orth, recon = _residuals(A, terms)
    return OrthoDecomposition(terms, orth, recon, mode_permutation)


def _merge_compatible(terms):
    """Combine terms whose factors agree (up to sign) in all but one mode.

    The combined term equals the sum of the two exactly, so orthogonality
    against the remaining terms is preserved.
    """
    terms = list(terms)
    changed = True
    while changed:
        changed = False
        for i in range(len(terms)):
            for j in range(i + 1, len(terms)):
                merged = _try_merge(terms[i], terms[j])
                if merged is None:
                    continue
                rest = [t for k, t in enumerate(terms) if k not in (i, j)]
                terms = rest + merged
                changed = True
                break
            if changed:
                break
    return terms


def _try_merge(t: RankOneTerm, s: RankOneTerm):
    diff_mode = None
    signs = 1.0
    for m, (a, b) in enumerate(zip(t.factors, s.factors)):
        inner = float(a @ b)
        if abs(inner) >= 1.0 - 1e-12:
            signs *= 1.0 if inner > 0 else -1.0
        elif diff_mode is None:
            diff_mode = m
        else:
            return None
    if diff_mode is None:
        lam = t.scale + signs * s.scale
        if abs(lam) < 1e-14 * (abs(t.scale) + abs(s.scale)):
            return []
        return [RankOneTerm(lam, t.factors)]
    u = t.scale * t.factors[diff_mode] + signs * s.scale * s.factors[diff_mode]
    norm = float(np.linalg.norm(u))
    if norm < 1e-14 * (abs(t.scale) + abs(s.scale)):
        return []
    factors = list(t.factors)
    factors[diff_mode] = u / norm
    return [RankOneTerm(norm, tuple(factors))]


def matrix_ortho_split(M, rel_tol: float = SPLIT_REL_TOL) -> OrthoDecomposition:
    """SVD split of a matrix into its numerical-rank many orthogonal rank-one terms."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ValueError("expected a matrix")
    terms = [RankOneTerm(s, (u, v)) for s, u, v in _svd_terms(M, rel_tol)]
    return _finalize_matrix(M, terms)


def _finalize_matrix(M, terms):
    orth, recon = _residuals(M, terms)
    return OrthoDecomposition(terms, orth, recon)


def _svd_terms(M, rel_tol=SPLIT_REL_TOL, max_terms=None):
    U, S, Vt = np.linalg.svd(M)
    out = []
    for k in range(len(S)):
        if S[k] <= rel_tol * S[0]:
            break
        if max_terms is not None and len(out) >= max_terms:
            break
        out.append((float(S[k]), U[:, k], Vt[k]))
    return out


def simultaneous_block_triangularize(A1, A2):
    """Orthogonal rho, rho_prime zeroing the last row (except the corner) of both matrices.

    Requires odd size and at least one invertible input.  Works through a
    real eigenvector: for odd n the product inv(A1) @ A2 always has a real
    eigenvalue, whose left eigenvector spans the invariant complement.
    """
    A1 = np.asarray(A1, dtype=float)
    A2 = np.asarray(A2, dtype=float)
    n = A1.shape[0]
    if A1.shape != (n, n) or A2.shape != (n, n):
        raise ValueError("expected two square matrices of equal size")
    if n % 2 == 0:
        raise ValueError("size must be odd (a real eigenvalue is required)")

    def rel_sigma_min(M):
        s = np.linalg.svd(M, compute_uv=False)
        return s[-1] / max(s[0], 1e-300)

    if rel_sigma_min(A1) < 1e-12:
        if rel_sigma_min(A2) < 1e-12:
            raise ValueError("both matrices are numerically singular")
        A1, A2 = A2, A1
    C = np.linalg.solve(A1, A2)
    ev = np.linalg.eigvals(C)
    lam = float(ev[np.argmin(np.abs(ev.imag))].real)
    # left eigenvector via the smallest singular direction of (C^T - lam I)
    _, _, Vt = np.linalg.svd(C.T - lam * np.eye(n))
    w = Vt[-1]
    Q, _ = np.linalg.qr(np.column_stack([w, np.eye(n)]))
    P = np.column_stack([Q[:, 1:], Q[:, 0]])  # last column spans w

    def qr_positive(M):
        Qm, Rm = np.linalg.qr(M)
        s = np.sign(np.diag(Rm))
        s[s == 0] = 1.0
        return Qm * s, (Rm.T * s).T

    Q1, _ = qr_positive(A1 @ P)
    Q2, _ = qr_positive(P)
    return Q1.T, Q2


def _rel_sigma_mins(slices):
    out = []
    for S in slices:
        sv = np.linalg.svd(S, compute_uv=False)
        out.append(sv[-1] / max(sv[0], 1e-300))
    return np.array(out)


def _decompose_332_core(A, singular_branch: bool):
    """A has dims (3,3,2); returns raw terms."""
    S1, S2 = A[:, :, 0], A[:, :, 1]
    if singular_branch:
        terms = []
        for k, Sk in enumerate((S1, S2)):
            e = np.zeros(2)
            e[k] = 1.0
            for s, u, v in _svd_terms(Sk, max_terms=2):
                terms.append(RankOneTerm(s, (u, v, e.copy())))
        return terms
    rho, rhop = simultaneous_block_triangularize(S1, S2)
    T = group_action(A, (rho, rhop.T, np.eye(2)))
    terms = []
    for i in range(2):  # top part, mode-1 slice by slice
        e = np.zeros(3)
        e[i] = 1.0
        for s, u, v in _svd_terms(T[i], max_terms=2):
            terms.append(RankOneTerm(s, (e.copy(), u, v)))
    dvec = T[2, 2, :].copy()  # bottom row is e3 (x) e3 (x) (corner entries)
    dnorm = float(np.linalg.norm(dvec))
    if dnorm > 0.0:
        e3 = np.zeros(3)
        e3[2] = 1.0
        terms.append(RankOneTerm(dnorm, (e3, e3.copy(), dvec / dnorm)))
    # pull the transform back
    return [RankOneTerm(t.scale, (rho.T @ t.factors[0], rhop @ t.factors[1], t.factors[2]))
            for t in terms]


def ortho_decompose_332(A) -> OrthoDecomposition:
    """At most five pairwise-orthogonal rank-one terms for a (3,3,2)-shaped tensor.

    Any mode order is accepted; the permutation actually used is recorded.
    """
    A = np.ascontiguousarray(A, dtype=float)
    if sorted(A.shape) != [2, 3, 3]:
        raise ValueError(f"expected dims (3,3,2) in some order, got {A.shape}")
    # move the 2-mode last, keeping the 3-modes in their original order
    perm = tuple(i for i, dim in enumerate(A.shape) if dim == 3) + tuple(
        i for i, dim in enumerate(A.shape) if dim == 2)
    B = np.transpose(A, perm)
    sing = _rel_sigma_mins([B[:, :, 0], B[:, :, 1]]) < SINGULAR_REL_TOL

    attempts = [bool(sing.all())]
    if not sing.all():
        attempts.append(True)  # fallback: rank-2-truncate each slice
    best = None
    for singular_branch in attempts:
        try:
            terms = _decompose_332_core(B, singular_branch)
        except ValueError:
            continue
        terms = [_unpermute(t, perm) for t in terms]
        dec = _finalize(A, terms, mode_permutation=perm)
        if best is None or dec.reconstruction_residual < best.reconstruction_residual:
            best = dec
        if best.reconstruction_residual < RESIDUAL_TARGET * max(1.0, frobenius_norm(A)):
            break
    if best is None:
        raise RuntimeError("decomposition failed on every branch")
    return best


def _unpermute(term: RankOneTerm, perm):
    factors = [None] * len(perm)
    for pos, orig in enumerate(perm):
        factors[orig] = term.factors[pos]
    return RankOneTerm(term.scale, tuple(factors))


def _decompose_333_core(A, free_slice: int):
    """A is (3,3,3); zero the bottom rows of the two non-free slices."""
    pair = [k for k in range(3) if k != free_slice]
    order = pair + [free_slice]
    P = np.zeros((3, 3))
    for new, old in enumerate(order):
        P[new, old] = 1.0
    B = group_action(A, (np.eye(3), np.eye(3), P))
    rho, rhop = simultaneous_block_triangularize(B[:, :, 0], B[:, :, 1])
    T = group_action(B, (rho, rhop.T, np.eye(3)))
    terms = []
    # top rows form an essentially (2,3,3) tensor; decompose it slice-wise
    top = np.transpose(T[:2, :, :], (1, 2, 0))  # to dims (3,3,2)
    sing = _rel_sigma_mins([top[:, :, 0], top[:, :, 1]]) < SINGULAR_REL_TOL
    sub_terms = _decompose_332_core(top, singular_branch=bool(sing.all()))
    for t in sub_terms:
        x = np.zeros(3)
        x[:2] = t.factors[2]
        terms.append(RankOneTerm(t.scale, (x, t.factors[0], t.factors[1])))
    # bottom-row matrix has rank at most two
    e3 = np.zeros(3)
    e3[2] = 1.0
    for s, u, v in _svd_terms(T[2], max_terms=2):
        terms.append(RankOneTerm(s, (e3.copy(), u, v)))
    out = []
    for t in terms:
        out.append(RankOneTerm(t.scale, (rho.T @ t.factors[0], rhop @ t.factors[1],
                                         P.T @ t.factors[2])))
    return out


def ortho_decompose_333(A) -> OrthoDecomposition:
    """At most seven pairwise-orthogonal rank-one terms for a (3,3,3) tensor."""
    A = np.ascontiguousarray(A, dtype=float)
    if A.shape != (3, 3, 3):
        raise ValueError(f"expected dims (3,3,3), got {A.shape}")
    sig = _rel_sigma_mins([A[:, :, k] for k in range(3)])
    attempts: list[tuple[str, int]] = []
    if (sig < SINGULAR_REL_TOL).all():
        attempts.append(("singular", -1))
    else:
        # pair the two best-conditioned slices, keep the worst one free
        for free in np.argsort(sig):
            rest = sig[[k for k in range(3) if k != free]]
            if rest.max() >= SINGULAR_REL_TOL:
                attempts.append(("lemma", int(free)))
        attempts.append(("singular", -1))
    best = None
    for kind, free in attempts:
        try:
            if kind == "singular":
                terms = []
                for k in range(3):
                    e = np.zeros(3)
                    e[k] = 1.0
                    for s, u, v in _svd_terms(A[:, :, k], max_terms=2):
                        terms.append(RankOneTerm(s, (u, v, e.copy())))
            else:
                terms = _decompose_333_core(A, free)
        except ValueError:
            continue
        dec = _finalize(A, terms)
        if best is None or dec.reconstruction_residual < best.reconstruction_residual:
            best = dec
        if best.reconstruction_residual < RESIDUAL_TARGET * max(1.0, frobenius_norm(A)):
            break
    if best is None:
        raise RuntimeError("decomposition failed on every branch")
    return best


def entrywise_decomposition(n: int) -> OrthoDecomposition:
    """The 3n-2 coordinate terms of the ternary-style Chebyshev cubic tensor.

    e1^(x3) minus, for each k >= 2, the three tensors placing e1 in one mode
    and ek in the other two.  Exactly orthogonal; each term has unit norm and
    pairs with the reconstructed tensor at value +-1.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    e = np.eye(n)
    terms = [RankOneTerm(1.0, (e[0], e[0], e[0]))]
    for k in range(1, n):
        terms.append(RankOneTerm(-1.0, (e[0], e[k], e[k])))
        terms.append(RankOneTerm(-1.0, (e[k], e[0], e[k])))
        terms.append(RankOneTerm(-1.0, (e[k], e[k], e[0])))
    A = np.zeros((n, n, n))
    for t in terms:
        A += t.expand()
    orth, recon = _residuals(A, terms)
    return OrthoDecomposition(terms, orth, recon)


@dataclass
class OrthoVerification:
    passed: bool
    count: int
    orthogonality_residual: float
    reconstruction_residual: float
    pythagoras_gap: float
    pigeonhole_ok: bool
    ratio_bound_ok: bool | None
    measured_ratio: float | None
    ratio_floor: float


def verify_ortho(A, dec: OrthoDecomposition, tol: float = RESIDUAL_TARGET,
                 cfg=None, check_ratio: bool = True) -> OrthoVerification:
    """Independent re-check of a decomposition from its raw terms.

    Also checks the pigeonhole consequence (some term captures at least
    |A|_F^2 / r of the mass) and, optionally, that the measured spectral
    ratio is at least 1/sqrt(r).
    """
    A = np.ascontiguousarray(A, dtype=float)
    orth, recon = _residuals(A, dec.terms)
    r = len(dec.terms)
    fro_sq = float(np.sum(A * A))
    pyth = abs(sum(t.scale ** 2 for t in dec.terms) - fro_sq)
    pigeonhole_ok = True
    if r:
        best_inner = max(abs(float(np.sum(A * t.expand()))) for t in dec.terms)
        pigeonhole_ok = best_inner >= fro_sq / r - 1e-8 * max(1.0, fro_sq)
    floor = 1.0 / math.sqrt(r) if r else math.inf
    measured = None
    ratio_ok: bool | None = None
    if check_ratio and r:
        from .spectral import ratio as spectral_ratio
        measured = spectral_ratio(A, cfg)
        ratio_ok = measured >= floor - 1e-6
    passed = (orth <= tol and recon <= tol and pigeonhole_ok
              and (ratio_ok is not False))
    return OrthoVerification(passed, r, orth, recon, pyth, pigeonhole_ok,
                             ratio_ok, measured, floor)
