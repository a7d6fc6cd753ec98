"""Homogeneous forms over R^n with the Bombieri inner product.

A form of degree d in n variables is stored densely over all monomials
x^alpha with |alpha| = d, ordered graded-lexicographically (within a fixed
degree this is plain descending lex on the exponent tuples).  The Bombieri
inner product weights each coefficient pair by the inverse multinomial
coefficient, which makes it match the Frobenius inner product of the
associated symmetric coefficient tensors and makes it invariant under
orthogonal changes of variables.

Chebyshev forms are the homogeneous extensions of the classical Chebyshev
polynomials of the first kind: the binary one restricts to cos(d*theta) on
the unit circle, and the n-ary one is its rotationally symmetric extension
about the x1 axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "Form",
    "LinearPower",
    "monomial_exponents",
    "multinomial",
    "make_form",
    "bombieri_inner",
    "bombieri_norm",
    "bombieri_norm_squared_exact",
    "apply_orthogonal",
    "chebyshev_binary",
    "chebyshev_nary",
    "form_to_json_dict",
    "form_from_json_dict",
]


@lru_cache(maxsize=None)
def monomial_exponents(n: int, d: int) -> tuple[tuple[int, ...], ...]:
    """All exponent tuples alpha with len(alpha) = n and sum d, descending lex."""
    if n < 1:
        raise ValueError("need at least one variable")
    if d < 0:
        raise ValueError("degree must be nonnegative")

    def rec(nvars, deg):
        if nvars == 1:
            yield (deg,)
            return
        for a in range(deg, -1, -1):
            for rest in rec(nvars - 1, deg - a):
                yield (a,) + rest

    return tuple(rec(n, d))


@lru_cache(maxsize=None)
def _position_table(n: int, d: int) -> dict[tuple[int, ...], int]:
    return {alpha: i for i, alpha in enumerate(monomial_exponents(n, d))}


def multinomial(d: int, alpha: Sequence[int]) -> int:
    """d! / (alpha_1! ... alpha_n!) for |alpha| = d."""
    out, rem = 1, d
    for a in alpha:
        out *= math.comb(rem, a)
        rem -= a
    if rem != 0:
        raise ValueError(f"exponents {tuple(alpha)} do not sum to degree {d}")
    return out


@lru_cache(maxsize=None)
def _weights(n: int, d: int) -> np.ndarray:
    w = np.array([multinomial(d, a) for a in monomial_exponents(n, d)], dtype=float)
    w.flags.writeable = False
    return w


@dataclass(frozen=True)
class Form:
    """Dense homogeneous polynomial; immutable after construction.

    ``coeffs[i]`` is the coefficient of the monomial with exponents
    ``monomial_exponents(n, d)[i]``.
    """

    n: int
    d: int
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.shape != (len(monomial_exponents(self.n, self.d)),):
            raise ValueError("coefficient table has the wrong length")
        c = c.copy()
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    def coefficient(self, alpha: Sequence[int]) -> float:
        alpha = tuple(int(a) for a in alpha)
        pos = _position_table(self.n, self.d).get(alpha)
        if pos is None:
            raise KeyError(f"{alpha} is not a degree-{self.d} monomial in {self.n} variables")
        return float(self.coeffs[pos])

    def __call__(self, x: Sequence[float]) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise ValueError(f"point has {x.shape} entries, form has {self.n} variables")
        exps = np.array(monomial_exponents(self.n, self.d))
        with np.errstate(divide="ignore", invalid="ignore"):
            powers = np.where(exps == 0, 1.0, x[None, :] ** exps)
        return float(self.coeffs @ np.prod(powers, axis=1))

    def scaled(self, s: float) -> "Form":
        return Form(self.n, self.d, s * self.coeffs)

    def plus(self, other: "Form") -> "Form":
        if (self.n, self.d) != (other.n, other.d):
            raise ValueError("forms live in different spaces")
        return Form(self.n, self.d, self.coeffs + other.coeffs)

    def __repr__(self):
        nz = int(np.count_nonzero(self.coeffs))
        return f"Form(n={self.n}, d={self.d}, {nz} nonzero coefficients)"


@dataclass(frozen=True)
class LinearPower:
    """The form lam * <y, x>^d for a unit vector y."""

    y: np.ndarray
    lam: float
    d: int

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).copy()
        if abs(np.linalg.norm(y) - 1.0) > 1e-12:
            raise ValueError("direction must be a unit vector")
        y.flags.writeable = False
        object.__setattr__(self, "y", y)

    def to_form(self) -> Form:
        n = len(self.y)
        exps = monomial_exponents(n, self.d)
        c = np.empty(len(exps))
        for i, alpha in enumerate(exps):
            v = self.lam * multinomial(self.d, alpha)
            for yj, a in zip(self.y, alpha):
                if a:
                    v *= yj ** a
            c[i] = v
        return Form(n, self.d, c)


def make_form(n: int, d: int, coeffs) -> Form:
    """Build a dense form from sparse (alpha, value) data; missing monomials are zero."""
    if isinstance(coeffs, Mapping):
        items: Iterable = coeffs.items()
    else:
        items = coeffs
    table = _position_table(n, d)
    c = np.zeros(len(table))
    for alpha, value in items:
        alpha = tuple(int(a) for a in alpha)
        if len(alpha) != n:
            raise ValueError(f"exponent tuple {alpha} has {len(alpha)} entries, expected {n}")
        if any(a < 0 for a in alpha):
            raise ValueError(f"negative exponent in {alpha}")
        if sum(alpha) != d:
            raise ValueError(f"monomial {alpha} has degree {sum(alpha)}, expected {d}")
        c[table[alpha]] += float(value)
    return Form(n, d, c)


def bombieri_inner(p: Form, q: Form) -> float:
    """Sum over |alpha|=d of coeff_p * coeff_q / multinomial(d, alpha)."""
    if (p.n, p.d) != (q.n, q.d):
        raise ValueError("forms live in different spaces")
    return float(np.sum(p.coeffs * q.coeffs / _weights(p.n, p.d)))


def bombieri_norm(p: Form) -> float:
    return math.sqrt(max(bombieri_inner(p, p), 0.0))


def bombieri_norm_squared_exact(p: Form) -> Fraction:
    """Exact squared Bombieri norm for a form with integer coefficients."""
    total = Fraction(0)
    for alpha, c in zip(monomial_exponents(p.n, p.d), p.coeffs):
        ci = round(c)
        if ci != c:
            raise ValueError("exact norm requires integer coefficients")
        total += Fraction(int(ci) ** 2, multinomial(p.d, alpha))
    return total


def _multiply_by_linear(n, deg, coeffs, linear):
    """Multiply a degree-`deg` coefficient table by sum_j linear[j] x_j."""
    src = monomial_exponents(n, deg)
    dst = _position_table(n, deg + 1)
    out = np.zeros(len(dst))
    for i, alpha in enumerate(src):
        c = coeffs[i]
        if c == 0.0:
            continue
        for j in range(n):
            lj = linear[j]
            if lj == 0.0:
                continue
            beta = list(alpha)
            beta[j] += 1
            out[dst[tuple(beta)]] += c * lj
    return out


def apply_orthogonal(p: Form, rho: np.ndarray) -> Form:
    """Orthogonal change of variables: returns the form x -> p(rho^-1 x).

    Preserves the Bombieri inner product.
    """
    rho = np.asarray(rho, dtype=float)
    n = p.n
    if rho.shape != (n, n):
        raise ValueError("matrix size does not match the variable count")
    if np.linalg.norm(rho.T @ rho - np.eye(n)) > 1e-10:
        raise ValueError("matrix is not orthogonal")
    # rho^-1 = rho^T, so x_i is substituted by sum_j rho[j, i] x_j
    out = np.zeros(len(monomial_exponents(n, p.d)))
    for alpha, c in zip(monomial_exponents(n, p.d), p.coeffs):
        if c == 0.0:
            continue
        acc = np.array([1.0])  # degree-0 table
        deg = 0
        for i, a in enumerate(alpha):
            for _ in range(a):
                acc = _multiply_by_linear(n, deg, acc, rho[:, i])
                deg += 1
        out += c * acc
    return Form(n, p.d, out)


def chebyshev_binary(d: int) -> Form:
    """Binary Chebyshev form: sum_k C(d,2k) (-1)^k x1^(d-2k) x2^(2k)."""
    if d < 0:
        raise ValueError("degree must be nonnegative")
    coeffs = {}
    for k in range(d // 2 + 1):
        coeffs[(d - 2 * k, 2 * k)] = math.comb(d, 2 * k) * (-1.0) ** k
    return make_form(2, d, coeffs)


def chebyshev_nary(d: int, n: int) -> Form:
    """n-ary Chebyshev form: sum_k C(d,2k) (-1)^k x1^(d-2k) (x2^2+...+xn^2)^k."""
    if n < 2:
        raise ValueError("need at least two variables")
    if d < 0:
        raise ValueError("degree must be nonnegative")
    coeffs: dict[tuple[int, ...], float] = {}
    for k in range(d // 2 + 1):
        outer = math.comb(d, 2 * k) * (-1.0) ** k
        # (x2^2 + ... + xn^2)^k expands over |beta| = k with multinomial weights
        for beta in monomial_exponents(n - 1, k):
            alpha = (d - 2 * k,) + tuple(2 * b for b in beta)
            coeffs[alpha] = coeffs.get(alpha, 0.0) + outer * multinomial(k, beta)
    return make_form(n, d, coeffs)


def form_to_json_dict(p: Form) -> dict:
    terms = []
    for alpha, c in zip(monomial_exponents(p.n, p.d), p.coeffs):
        if c != 0.0:
            terms.append({"alpha": list(alpha), "coeff": float(c)})
    return {"n": p.n, "d": p.d, "terms": terms}


def form_from_json_dict(obj: Mapping) -> Form:
    try:
        n, d = int(obj["n"]), int(obj["d"])
        pairs = [(tuple(t["alpha"]), float(t["coeff"])) for t in obj.get("terms", [])]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed form object: {exc}") from exc
    return make_form(n, d, pairs)
