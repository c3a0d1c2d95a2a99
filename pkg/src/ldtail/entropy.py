"""Bernoulli relative entropy, Shannon negative entropy and the cross-entropy pairing.

All functions use the convention ``0 * log 0 = 0`` and return exact boundary
values (for instance ``I_p(1) = log(1/p)``) rather than limits.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import xlogy

from .errors import DomainError

# vectors longer than this are summed with math.fsum
_FSUM_THRESHOLD = 10_000


def bernoulli_parameter(p) -> float:
    """Validate a Bernoulli parameter; ``p`` must lie strictly inside (0, 1)."""
    p = float(p)
    if not (0.0 < p < 1.0):
        raise DomainError(f"Bernoulli parameter must lie in the open interval (0,1), got {p!r}")
    return p


def check_point(x, n: int | None = None) -> np.ndarray:
    """Return ``x`` as a float array after checking every coordinate is in [0, 1]."""
    x = np.asarray(x, dtype=float)
    if n is not None and x.shape[-1] != n:
        raise DomainError(f"expected {n} coordinates, got {x.shape[-1]}")
    if x.size and (np.isnan(x).any() or x.min() < 0.0 or x.max() > 1.0):
        raise DomainError("hypercube coordinates must lie in [0, 1]")
    return x


def _sum(v: np.ndarray) -> float:
    v = np.ravel(v)
    if v.size > _FSUM_THRESHOLD:
        return math.fsum(v.tolist())
    return float(np.sum(v))


def _relative_entropy_terms(u: np.ndarray, p: float) -> np.ndarray:
    # xlogy gives 0*log(0) = 0; the ratio form is exactly 0 at u = p
    return xlogy(u, u / p) + xlogy(1.0 - u, (1.0 - u) / (1.0 - p))


def relative_entropy_scalar(u, p) -> float:
    """``I_p(u) = u log(u/p) + (1-u) log((1-u)/(1-p))``."""
    p = bernoulli_parameter(p)
    u = float(u)
    if not (0.0 <= u <= 1.0):
        raise DomainError(f"u must lie in [0,1], got {u!r}")
    if u == p:
        return 0.0
    return max(float(_relative_entropy_terms(np.float64(u), p)), 0.0)


def relative_entropy_vector(x, p) -> float:
    """Sum of ``I_p(x_i)`` over the coordinates of ``x``."""
    p = bernoulli_parameter(p)
    x = check_point(x)
    terms = np.maximum(_relative_entropy_terms(x, p), 0.0)
    return _sum(terms)


def relative_entropy_terms(x, p) -> np.ndarray:
    """Coordinatewise ``I_p(x_i)`` as an array (no summation)."""
    p = bernoulli_parameter(p)
    x = check_point(x)
    return np.maximum(_relative_entropy_terms(x, p), 0.0)


def relative_entropy_derivative(u, p):
    """``d/du I_p(u) = log(u (1-p) / ((1-u) p))``; returns -inf / +inf at u = 0 / 1."""
    p = bernoulli_parameter(p)
    u_arr = np.asarray(u, dtype=float)
    if u_arr.size and (u_arr.min() < 0.0 or u_arr.max() > 1.0):
        raise DomainError("u must lie in [0,1]")
    with np.errstate(divide="ignore"):
        out = np.log(u_arr) - np.log1p(-u_arr) + (math.log1p(-p) - math.log(p))
    return float(out) if out.ndim == 0 else out


def shannon_neg_entropy(x) -> float:
    """``I(u) = u log u + (1-u) log(1-u)``, summed over coordinates for vectors."""
    x = check_point(x)
    return _sum(xlogy(x, x) + xlogy(1.0 - x, 1.0 - x))


def cross_entropy_pair(x, y) -> float:
    """``g(x, y) = sum_i x_i log y_i + (1 - x_i) log(1 - y_i)``.

    Returns ``-inf`` when some ``x_i`` puts weight on an outcome that ``y_i``
    gives probability zero.
    """
    x = check_point(x)
    y = check_point(y, x.shape[-1])
    with np.errstate(divide="ignore"):
        terms = xlogy(x, y) + xlogy(1.0 - x, 1.0 - y)
    if np.isneginf(terms).any():
        return -math.inf
    return _sum(terms)


def cross_entropy_batch(X, y) -> np.ndarray:
    """``g(x, y)`` for every row ``x`` of ``X``; rows may be -inf."""
    X = np.asarray(X, dtype=float)
    y = check_point(y, X.shape[-1])
    with np.errstate(divide="ignore"):
        logy = np.log(y)
        log1my = np.log1p(-y)
    # mask the 0 * (-inf) products explicitly
    a = np.where(X > 0, X * logy, 0.0)
    b = np.where(X < 1, (1.0 - X) * log1my, 0.0)
    return (a + b).sum(axis=-1)


def sigmoid(z):
    """Logistic function ``1 / (1 + e^{-z})``, evaluated without overflow."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return float(out) if out.ndim == 0 else out


def logit(u):
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.log(u) - np.log1p(-u)
    return float(out) if out.ndim == 0 else out
