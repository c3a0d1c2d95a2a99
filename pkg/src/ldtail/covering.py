"""Gradient-covering nets and their certificates.

The nets themselves are astronomically large and never materialized.  What is
implemented is the *rounding map* sending a point to its net representative,
a measured fidelity for that representative, and a closed-form bound on the
log-size of the net.  Euclidean delta-nets of the unit ball are replaced by
coordinate grids, so every certificate is checked by direct measurement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .entropy import check_point
from .errors import BudgetExceeded, CertificateError, DomainError
from .functionals.ap3 import AP3
from .functionals.base import SmoothFunctional, all_binary_states
from .functionals.graphs import Ergm, ErgmSpec, GraphSpec, HomDensity, edge_matrix

# constant in the Fourier gradient bound, from the six-term bilinear expansion:
# each difference splits into 6 bilinear pieces of squared norm <= 2 M^2
FOURIER_CONSTANT = 72.0
DEFAULT_C_QUANT = 0.05


@dataclass
class NetCertificate:
    kind: str
    representative: object = field(repr=False)
    fidelity: float
    claimed_bound: float
    size_log_bound: float
    retries: int = 0
    params: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.fidelity <= self.claimed_bound)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "fidelity": float(self.fidelity),
            "claimed_bound": float(self.claimed_bound),
            "size_log_bound": float(self.size_log_bound),
            "retries": self.retries,
            "passed": self.passed,
            "params": {
                k: (float(v) if isinstance(v, (np.floating, float)) else v)
                for k, v in self.params.items()
                if not isinstance(v, (FourierVector, np.ndarray))
            },
        }


def operator_norm(M) -> float:
    """Largest singular value."""
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 0.0
    return float(np.linalg.norm(M, 2))


def operator_norm_power(M, iters: int = 5000, tol: float = 1e-13, seed: int = 0) -> float:
    """Largest singular value by power iteration on ``M^T M`` (independent of the SVD)."""
    M = np.asarray(M, dtype=float)
    v = np.random.default_rng(seed).standard_normal(M.shape[1])
    v /= np.linalg.norm(v)
    prev = 0.0
    for _ in range(iters):
        w = M.T @ (M @ v)
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        v = w / nw
        if abs(nw - prev) <= tol * nw:
            break
        prev = nw
    return float(np.linalg.norm(M @ v))


@dataclass(frozen=True)
class SpectralNetParams:
    tau: float
    N: int

    def __post_init__(self):
        if not (0 < self.tau < 1):
            raise DomainError("tau must lie in (0, 1)")

    @property
    def l(self) -> int:
        return int(17.0 / self.tau**2)

    @property
    def delta(self) -> float:
        return 1.0 / self.l


def spectral_net_size_log(tau: float, N: int) -> float:
    """``34 (N / tau^2) log(51 / tau^2)``."""
    if not (0 < tau < 1):
        raise DomainError("tau must lie in (0, 1)")
    return 34.0 * (N / tau**2) * math.log(51.0 / tau**2)


def _quantize(v, step):
    return step * np.round(np.asarray(v) / step)


def spectral_round(M, tau: float, max_retries: int = 2) -> NetCertificate:
    """Round ``M`` to a quantized rank-``(l-1)`` matrix ``W`` with ``||M - W||_op <= N tau``.

    Singular values (scaled by 1/N) are quantized with spacing
    ``2 delta / sqrt(l-1)`` and singular vectors with spacing ``2 delta / sqrt(N)``,
    so each quantized vector is within ``delta`` of the original in Euclidean
    norm.  On failure delta is halved, at most ``max_retries`` times.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DomainError("expected a square matrix")
    if M.size and (M.min() < 0 or M.max() > 1):
        raise DomainError("entries must lie in [0, 1]")
    N = M.shape[0]
    params = SpectralNetParams(tau, N)
    rank = min(params.l - 1, N)
    U, S, Vt = np.linalg.svd(M)
    U, S, Vt = U[:, :rank], S[:rank], Vt[:rank]
    bound = N * tau
    delta = params.delta
    for attempt in range(max_retries + 1):
        y = _quantize(S / N, 2 * delta / math.sqrt(max(rank, 1)))
        Z = _quantize(U, 2 * delta / math.sqrt(N))
        Wt = _quantize(Vt, 2 * delta / math.sqrt(N))
        W = (Z * (N * y)) @ Wt
        fid = operator_norm(M - W)
        if fid <= bound or attempt == max_retries:
            break
        delta /= 2.0
    cert = NetCertificate(
        "spectral",
        W,
        fid,
        bound,
        spectral_net_size_log(tau, N),
        retries=attempt,
        params={"tau": tau, "N": N, "l": params.l, "delta": delta, "rank": rank},
    )
    if not cert.passed:
        raise CertificateError(f"spectral rounding failed after {max_retries} retries (fidelity {fid:.4g} > {bound:.4g})")
    return cert


def subgraph_net_size_log(H: GraphSpec, N: int, eps: float) -> float:
    """Log-size of the gradient net at ``tau = eps^2 / (64 m^2 k^2)``.

    Explicitly ``C1 m^4 k^4 N / eps^4 * log(C2 m^4 k^4 / eps^4)`` with
    ``C1 = 34 * 4096`` and ``C2 = 51 * 4096``.
    """
    tau = eps**2 / (64.0 * H.m**2 * H.k**2)
    return spectral_net_size_log(tau, N)


def representative_point(W, N: int) -> np.ndarray:
    """Map a net matrix to a point of the cube: symmetrize, clip to [0, 1], read the upper triangle."""
    S = np.clip(0.5 * (W + W.T), 0.0, 1.0)
    return S[np.triu_indices(N, 1)]


def subgraph_gradient_net(H: GraphSpec, N: int, eps: float, x, max_retries: int = 4) -> NetCertificate:
    """Net representative for ``grad T`` at ``x``; certifies ``sum (g(x) - g(y))^2 <= n eps^2``."""
    T = HomDensity(H, N)
    x = check_point(x, T.n)
    tau = eps**2 / (64.0 * H.m**2 * H.k**2)
    if tau >= 1:
        tau = 1 - 1e-12
    Mx = edge_matrix(x, N)
    gx = T.grad(x)
    claimed = T.n * eps**2
    last = None
    for attempt in range(max_retries + 1):
        # shrinking tau only refines the net; the declared size stays the nominal one
        t_eff = tau / 2**attempt
        try:
            W = spectral_round(Mx, t_eff, max_retries=2).representative
        except CertificateError:
            continue
        y = representative_point(W, N)
        gap = operator_norm(Mx - edge_matrix(y, N))
        dist = float(((gx - T.grad(y)) ** 2).sum())
        last = (y, dist, gap)
        if dist <= claimed and gap <= 2 * N * tau:
            break
    if last is None:
        raise CertificateError("spectral rounding failed at every refinement")
    y, dist, gap = last
    cert = NetCertificate(
        "subgraph-gradient",
        y,
        dist,
        claimed,
        subgraph_net_size_log(H, N, eps),
        retries=attempt,
        params={"tau": tau, "eps": eps, "N": N, "m": H.m, "k": H.k, "op_gap": gap, "op_gap_bound": 2 * N * tau},
    )
    if not cert.passed or gap > 2 * N * tau:
        raise CertificateError(f"gradient net certificate failed (distance {dist:.4g} vs {claimed:.4g})")
    return cert


def op_norm_lipschitz_check(H: GraphSpec, x, y, N: int | None = None) -> float:
    """``8 m^2 k^2 N ||x - y||_op - sum (g(x) - g(y))^2``; nonnegative whenever gradients are operator-norm Lipschitz."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if N is None:
        N = int(round((1 + math.sqrt(1 + 8 * x.size)) / 2))
    T = HomDensity(H, N)
    lhs = float(((T.grad(x) - T.grad(y)) ** 2).sum())
    rhs = 8.0 * H.m**2 * H.k**2 * N * operator_norm(edge_matrix(x - y, N))
    return rhs - lhs


@dataclass(frozen=True)
class FourierVector:
    """Coefficients under the unitary kernel ``e_j(k) = n^{-1/2} exp(2 pi i j k / n)``."""

    coeffs: np.ndarray

    @property
    def n(self) -> int:
        return self.coeffs.size

    def __sub__(self, other: "FourierVector") -> np.ndarray:
        return self.coeffs - other.coeffs


def dft(x) -> FourierVector:
    """``xhat_j = sum_k x_k e_j(k)``."""
    return FourierVector(np.fft.ifft(np.asarray(x, dtype=complex), norm="ortho"))


def idft(xhat: FourierVector, real: bool = True) -> np.ndarray:
    """``x_k = sum_j xhat_j conj(e_k(j))``."""
    out = np.fft.fft(xhat.coeffs, norm="ortho")
    return out.real if real else out


def fourier_gradient_bound_check(x, y, constant: float = FOURIER_CONSTANT) -> float:
    """``C sqrt(n) max_j |xhat_j - yhat_j| - sum_i (f_i(x) - f_i(y))^2`` for the 3-AP count."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    f = AP3(n)
    lhs = float(((f.grad(x) - f.grad(y)) ** 2).sum())
    rhs = constant * math.sqrt(n) * float(np.abs(dft(x) - dft(y)).max())
    return rhs - lhs


def fourier_net_size_log(n: int, gamma: float) -> float:
    """Log of the number of rounded coefficient vectors.

    At most ``s = min(n, 4n/gamma^2)`` coefficients survive; a support is one of
    fewer than ``n^s`` choices and each value is a point of the lattice
    ``gamma (Z + iZ)`` inside the disk of radius ``sqrt(n)``.
    """
    s = min(float(n), 4.0 * n / gamma**2)
    per = math.pi * (math.sqrt(n) + gamma / math.sqrt(2)) ** 2 / gamma**2
    return s * math.log(n) + s * math.log(max(per, 1.0))


def _round_coeffs(c, gamma):
    r = gamma * (np.round(c.real / gamma) + 1j * np.round(c.imag / gamma))
    r[np.abs(c) < gamma / 2] = 0
    return r


def fourier_round(x, eps: float, c_quant: float = DEFAULT_C_QUANT, max_retries: int = 6) -> NetCertificate:
    """Round the Fourier coefficients of x on the lattice of spacing ``gamma = c eps^2 sqrt(n)``.

    The representative is the clipped inverse transform of the rounded
    coefficients; its 3-AP gradient must lie within ``n eps^2`` of x's.
    On failure ``c_quant`` is halved.
    """
    x = check_point(x)
    n = x.size
    f = AP3(n)
    gx = f.grad(x)
    xhat = dft(x)
    claimed = n * eps**2
    c = c_quant
    for attempt in range(max_retries + 1):
        gamma = c * eps**2 * math.sqrt(n)
        rounded = _round_coeffs(xhat.coeffs, gamma)
        y = np.clip(idft(FourierVector(rounded)), 0.0, 1.0)
        dist = float(((gx - f.grad(y)) ** 2).sum())
        if dist <= claimed:
            break
        c *= 0.5
    support = int(np.count_nonzero(rounded))
    cert = NetCertificate(
        "fourier",
        y,
        dist,
        claimed,
        fourier_net_size_log(n, gamma),
        retries=attempt,
        params={
            "gamma": gamma,
            "c_quant": c,
            "eps": eps,
            "support": support,
            "support_bound": 4.0 * n / gamma**2,
            "coefficients": FourierVector(rounded),
        },
    )
    if not cert.passed:
        raise CertificateError(f"Fourier rounding failed (distance {dist:.4g} > {claimed:.4g})")
    return cert


def ergm_product_net(spec: ErgmSpec, N: int, eps: float, x) -> NetCertificate:
    """Combine per-graph gradient nets at radii ``eps / (|beta_r| l)``; size logs add up."""
    f = Ergm(spec, N)
    x = check_point(x, f.n)
    parts = [(b, H) for b, H in zip(spec.betas, spec.graphs) if b != 0]
    if not parts:
        raise DomainError("all betas are zero")
    l = len(parts)
    d = np.zeros(f.n)
    size = 0.0
    sub = []
    for b, H in parts:
        cert = subgraph_gradient_net(H, N, eps / (abs(b) * l), x)
        d += b * HomDensity(H, N).grad(cert.representative)
        size += cert.size_log_bound
        sub.append(cert.to_dict())
    dist = float(((f.grad(x) - d) ** 2).sum())
    cert = NetCertificate("ergm-product", d, dist, f.n * eps**2, size, params={"eps": eps, "N": N, "parts": sub})
    if not cert.passed:
        raise CertificateError(f"ERGM product net failed (distance {dist:.4g})")
    return cert


@dataclass
class EmpiricalNet:
    """A net for the gradients at all binary points, built by grid quantization."""

    radius: float
    size: int
    size_log: float
    worst_sq_error: float
    n_states: int


def empirical_gradient_net(f: SmoothFunctional, radius: float, budget_states: int = 1 << 25, chunk: int = 1 << 14) -> EmpiricalNet:
    """Cover ``{grad f(x) : x in {0,1}^n}`` so that ``sum_i (f_i(x) - d_i)^2 <= n radius^2``.

    Gradients are snapped to a grid of spacing ``2 radius``; the distinct grid
    points form the net.  The set of all binary gradients is itself a net, so
    the size is capped at ``2^n``.
    """
    n = f.n
    total = 1 << n
    if total > budget_states:
        raise BudgetExceeded(f"2^{n} states exceed the budget of {budget_states}")
    if not math.isfinite(radius):
        return EmpiricalNet(radius, 1, 0.0, 0.0, total)
    if radius <= 0:
        raise DomainError("radius must be positive")
    step = 2.0 * radius
    keys = set()
    worst = 0.0
    for start in range(0, total, chunk):
        X = all_binary_states(n, start, min(start + chunk, total))
        G = f.grad_batch(X)
        K = np.round(G / step)
        worst = max(worst, float(((G - step * K) ** 2).sum(axis=1).max()))
        keys.update(map(bytes, K.astype(np.int64)))
    size = min(len(keys), total)
    return EmpiricalNet(radius, size, min(math.log(len(keys)), n * math.log(2.0)), worst, total)
