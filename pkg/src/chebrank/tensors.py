"""Dense small tensors with Frobenius geometry.

Tensors are plain numpy ``float64`` arrays in C (row-major) order; the JSON
wire format carries the shape and the flat row-major data.  Symmetric
tensors correspond to homogeneous forms through coefficient rescaling by
multinomial counts, an isometry between the Frobenius and Bombieri inner
products.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .forms import Form, monomial_exponents, multinomial

__all__ = [
    "RankOneTerm",
    "frobenius_inner",
    "frobenius_norm",
    "expand_rank_one",
    "contract_mode",
    "tensor_from_form",
    "form_from_tensor",
    "symmetrize",
    "is_symmetric",
    "group_action",
    "haar_orthogonal",
    "is_orthogonal_tensor",
    "OrthogonalityReport",
    "tensor_to_json_dict",
    "tensor_from_json_dict",
]

MAX_DIM = 32
MAX_ORDER = 8


def _check_tensor(A) -> np.ndarray:
    A = np.ascontiguousarray(A, dtype=float)
    if A.ndim > MAX_ORDER:
        raise ValueError(f"order {A.ndim} exceeds the supported maximum {MAX_ORDER}")
    if A.ndim and max(A.shape) > MAX_DIM:
        raise ValueError(f"dimension {max(A.shape)} exceeds the supported maximum {MAX_DIM}")
    return A


@dataclass(frozen=True)
class RankOneTerm:
    """scale * y1 (x) y2 (x) ... (x) yd with unit factor vectors."""

    scale: float
    factors: tuple[np.ndarray, ...]

    def __post_init__(self):
        fixed = []
        for y in self.factors:
            y = np.asarray(y, dtype=float).copy()
            if abs(np.linalg.norm(y) - 1.0) > 1e-12:
                raise ValueError("factors must be unit vectors")
            y.flags.writeable = False
            fixed.append(y)
        object.__setattr__(self, "factors", tuple(fixed))
        object.__setattr__(self, "scale", float(self.scale))

    @property
    def order(self) -> int:
        return len(self.factors)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(len(y) for y in self.factors)

    def expand(self) -> np.ndarray:
        out = np.array(self.scale)
        for y in self.factors:
            out = np.multiply.outer(out, y)
        return out

    @staticmethod
    def symmetric(scale: float, y: np.ndarray, order: int) -> "RankOneTerm":
        return RankOneTerm(scale, tuple(np.asarray(y, dtype=float) for _ in range(order)))


def rank_one_inner(s: RankOneTerm, t: RankOneTerm) -> float:
    """Frobenius inner product of two rank-one terms without expansion."""
    if s.dims != t.dims:
        raise ValueError("rank-one terms have different shapes")
    out = s.scale * t.scale
    for a, b in zip(s.factors, t.factors):
        out *= float(a @ b)
    return out


def frobenius_inner(A, B) -> float:
    A, B = _check_tensor(A), _check_tensor(B)
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch: {A.shape} vs {B.shape}")
    return float(np.vdot(A, B))


def frobenius_norm(A) -> float:
    return float(np.linalg.norm(_check_tensor(A).ravel()))


def expand_rank_one(term: RankOneTerm, dims: Sequence[int] | None = None) -> np.ndarray:
    if dims is not None and tuple(dims) != term.dims:
        raise ValueError(f"term has dims {term.dims}, expected {tuple(dims)}")
    return term.expand()


def contract_mode(A, u, mode: int) -> np.ndarray:
    """Contract A with the vector u along the given mode (0-based)."""
    A = _check_tensor(A)
    if not 0 <= mode < A.ndim:
        raise ValueError(f"mode {mode} out of range for order-{A.ndim} tensor")
    u = np.asarray(u, dtype=float)
    if u.shape != (A.shape[mode],):
        raise ValueError("vector length does not match the mode dimension")
    return np.tensordot(A, u, axes=([mode], [0]))


def _index_to_exponents(idx: Sequence[int], n: int) -> tuple[int, ...]:
    alpha = [0] * n
    for i in idx:
        alpha[i] += 1
    return tuple(alpha)


def tensor_from_form(p: Form) -> np.ndarray:
    """Symmetric coefficient tensor: entry = coefficient / multinomial count."""
    n, d = p.n, p.d
    A = np.zeros((n,) * d)
    table = {alpha: c / multinomial(d, alpha)
             for alpha, c in zip(monomial_exponents(n, d), p.coeffs)}
    for idx in itertools.product(range(n), repeat=d):
        A[idx] = table[_index_to_exponents(idx, n)]
    return A


def form_from_tensor(A, symmetrize_first: bool = False) -> Form:
    """Inverse of tensor_from_form; input must be symmetric unless told otherwise."""
    A = _check_tensor(A)
    if len(set(A.shape)) > 1:
        raise ValueError("tensor is not cubical")
    if symmetrize_first:
        A = symmetrize(A)
    elif not is_symmetric(A):
        raise ValueError("tensor is not symmetric; pass symmetrize_first=True to average")
    n, d = (A.shape[0], A.ndim) if A.ndim else (1, 0)
    exps = monomial_exponents(n, d)
    c = np.empty(len(exps))
    for i, alpha in enumerate(exps):
        idx = tuple(j for j, a in enumerate(alpha) for _ in range(a))
        c[i] = multinomial(d, alpha) * A[idx]
    return Form(n, d, c)


def symmetrize(A) -> np.ndarray:
    A = _check_tensor(A)
    if len(set(A.shape)) > 1:
        raise ValueError("tensor is not cubical")
    perms = list(itertools.permutations(range(A.ndim)))
    out = np.zeros_like(A)
    for p in perms:
        out += np.transpose(A, p)
    return out / len(perms)


def is_symmetric(A, tol: float = 1e-10) -> bool:
    A = _check_tensor(A)
    if len(set(A.shape)) > 1:
        return False
    for p in itertools.permutations(range(A.ndim)):
        if np.max(np.abs(A - np.transpose(A, p))) > tol:
            return False
    return True


def group_action(A, rhos: Sequence[np.ndarray]) -> np.ndarray:
    """Multilinear orthogonal change of basis, one matrix per mode."""
    A = _check_tensor(A)
    if len(rhos) != A.ndim:
        raise ValueError(f"need {A.ndim} matrices, got {len(rhos)}")
    out = A
    for j, rho in enumerate(rhos):
        rho = np.asarray(rho, dtype=float)
        nj = A.shape[j]
        if rho.shape != (nj, nj):
            raise ValueError(f"matrix for mode {j} has shape {rho.shape}, expected {(nj, nj)}")
        if np.linalg.norm(rho.T @ rho - np.eye(nj)) > 1e-10:
            raise ValueError(f"matrix for mode {j} is not orthogonal")
        out = np.moveaxis(np.tensordot(rho, out, axes=(1, j)), 0, j)
    return out


def haar_orthogonal(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix (QR with positive R diagonal)."""
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    s = np.sign(np.diag(R))
    s[s == 0] = 1.0
    return Q * s


@dataclass
class OrthogonalityReport:
    is_orthogonal: bool
    spectral_value: float
    spectral_gap: float
    frobenius_sq: float
    frobenius_gap: float
    contraction_failures: int
    contraction_checks: int
    worst_contraction_defect: float


def is_orthogonal_tensor(A, tol: float = 1e-8, checks: int = 32,
                         cfg=None, seed: int = 1729) -> OrthogonalityReport:
    """Norm characterization of orthogonal cubical tensors.

    A cubical n^d tensor is orthogonal exactly when its spectral norm is 1
    and its squared Frobenius norm is n^(d-1); equivalently every chain of
    unit-vector contractions down to a matrix yields an orthogonal matrix.
    The norm test is primary; `checks` random contraction chains corroborate.
    """
    from .spectral import SpectralConfig, spectral_norm  # deferred: avoids import cycle

    A = _check_tensor(A)
    if len(set(A.shape)) > 1:
        raise ValueError("tensor is not cubical")
    n, d = A.shape[0], A.ndim
    if cfg is None:
        cfg = SpectralConfig(seed=seed)
    value = spectral_norm(A, cfg).value
    fro_sq = float(np.sum(A * A))
    spectral_gap = abs(value - 1.0)
    frobenius_gap = abs(fro_sq - float(n) ** (d - 1))

    rng = np.random.default_rng(seed)
    failures, worst = 0, 0.0
    for _ in range(checks):
        M = A
        while M.ndim > 2:
            u = rng.standard_normal(M.shape[-1])
            u /= np.linalg.norm(u)
            M = contract_mode(M, u, M.ndim - 1)
        defect = float(np.linalg.norm(M @ M.T - np.eye(M.shape[0])))
        worst = max(worst, defect)
        if defect > tol:
            failures += 1
    ok = spectral_gap < tol and frobenius_gap < tol and failures == 0
    return OrthogonalityReport(ok, value, spectral_gap, fro_sq, frobenius_gap,
                               failures, checks, worst)


def tensor_to_json_dict(A) -> dict:
    A = _check_tensor(A)
    return {"dims": list(A.shape), "data": [float(x) for x in A.ravel()]}


def tensor_from_json_dict(obj: Mapping) -> np.ndarray:
    try:
        dims = tuple(int(k) for k in obj["dims"])
        data = np.array([float(x) for x in obj["data"]], dtype=float)
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed tensor object: {exc}") from exc
    if data.size != math.prod(dims):
        raise ValueError(f"data length {data.size} does not match dims {dims}")
    return _check_tensor(data.reshape(dims))
