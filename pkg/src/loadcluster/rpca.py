"""Principal Component Pursuit by the inexact augmented Lagrangian method.

Solves::

    minimize ||L||_* + mu * ||S||_1   subject to  L + S = M

with the default weight ``mu = 1 / sqrt(max(T, N))``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from loadcluster.errors import ConvergenceError

logger = logging.getLogger(__name__)

RANK_RTOL = 1e-8
SPARSE_ATOL = 1e-8


SCHEDULES = ("geometric", "balanced")


@dataclass(frozen=True)
class SolverOptions:
    """Inexact ALM settings.

    ``schedule="geometric"`` multiplies rho by ``rho_growth`` every iteration
    and stops on the primal residual alone. It is fast, but the penalty can
    grow large enough to freeze the iterates short of the optimum.
    ``schedule="balanced"`` grows rho only while the primal residual
    dominates the dual residual ``rho * ||S_k - S_{k-1}||_F / ||M||_F`` (and
    shrinks it in the opposite case), and stops only when both are below
    ``tol``. It reaches the true optimum at the price of more iterations.
    """

    tol: float = 1e-7
    max_iter: int = 1000
    rho_scale: float = 1.25  # rho_0 = rho_scale / ||M||_2
    rho_growth: float = 1.5
    rho_cap: float = 1e7  # rho never exceeds rho_0 * rho_cap
    schedule: str = "geometric"
    balance_ratio: float = 10.0

    def __post_init__(self):
        if self.schedule not in SCHEDULES:
            raise ValueError(f"schedule must be one of {SCHEDULES}, got {self.schedule!r}")
        if self.balance_ratio <= 1:
            raise ValueError("balance_ratio must exceed 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.rho_scale <= 0 or self.rho_growth < 1 or self.rho_cap < 1:
            raise ValueError("invalid penalty schedule")


@dataclass(frozen=True, eq=False)
class Decomposition:
    low_rank: np.ndarray
    sparse: np.ndarray
    mu: float
    iterations: int
    residual: float
    converged: bool = True
    history: list = field(default_factory=list, repr=False)

    @property
    def rank(self) -> int:
        return effective_rank(self.low_rank)

    @property
    def sparse_fraction(self) -> float:
        return float(np.mean(np.abs(self.sparse) > SPARSE_ATOL))

    def objective(self) -> float:
        return nuclear_norm(self.low_rank) + self.mu * float(np.abs(self.sparse).sum())

    def diagnostics(self) -> dict:
        return {
            "iterations": self.iterations,
            "residual": self.residual,
            "rank": self.rank,
            "sparse_fraction": self.sparse_fraction,
            "mu": self.mu,
            "converged": self.converged,
        }


def compute_mu(t: int, n: int) -> float:
    """Default sparse-term weight ``1 / sqrt(max(t, n))``."""
    if int(t) != t or int(n) != n or t < 1 or n < 1:
        raise ValueError(f"dimensions must be positive integers, got ({t}, {n})")
    return 1.0 / float(np.sqrt(max(int(t), int(n))))


def _check_finite(a):
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def singular_value_threshold(a, tau: float) -> np.ndarray:
    """Proximal operator of ``tau * ||.||_*``: soft-threshold the singular values."""
    a = _check_finite(a)
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    if a.ndim != 2:
        raise ValueError("expected a 2-d matrix")
    if tau == 0:
        return a.copy()
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    s = np.maximum(s - tau, 0.0)
    r = int(np.count_nonzero(s))
    return (u[:, :r] * s[:r]) @ vt[:r]


def shrink(a, tau: float) -> np.ndarray:
    """Elementwise soft thresholding, the proximal operator of ``tau * ||.||_1``."""
    a = _check_finite(a)
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    return np.sign(a) * np.maximum(np.abs(a) - tau, 0.0)


def nuclear_norm(a) -> float:
    return float(np.linalg.svd(np.asarray(a, dtype=float), compute_uv=False).sum())


def effective_rank(a, rtol: float = RANK_RTOL) -> int:
    s = np.linalg.svd(np.asarray(a, dtype=float), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.count_nonzero(s > rtol * s[0]))


def rpca_decompose(m, mu: float | None = None, opts: SolverOptions | None = None) -> Decomposition:
    """Split ``m`` into low-rank plus sparse parts.

    Alternates an SVT step on L, a shrinkage step on S and a dual ascent
    step on Y, adapting the penalty ``rho`` per ``opts.schedule``. Stops when
    ``||M - L - S||_F / ||M||_F <= opts.tol`` (and, for the balanced
    schedule, the dual residual is below ``opts.tol`` too).

    Raises
    ------
    ConvergenceError
        If ``opts.max_iter`` iterations pass without reaching ``opts.tol``.
        The exception carries the last iterate.
    """
    m = _check_finite(m)
    if m.ndim != 2 or m.size == 0:
        raise ValueError("expected a nonempty 2-d matrix")
    opts = opts or SolverOptions()
    if mu is None:
        mu = compute_mu(*m.shape)
    if not mu > 0:
        raise ValueError("mu must be positive")

    m_fro = np.linalg.norm(m, "fro")
    if m_fro == 0:
        z = np.zeros_like(m)
        return Decomposition(z, z.copy(), mu, iterations=1, residual=0.0)

    spectral = np.linalg.norm(m, 2)
    rho = opts.rho_scale / spectral
    rho_max = rho * opts.rho_cap
    y = m / max(spectral, np.abs(m).max() / mu)
    s = np.zeros_like(m)
    low = np.zeros_like(m)
    history = []
    residual = np.inf

    balanced = opts.schedule == "balanced"

    for it in range(1, opts.max_iter + 1):
        s_prev = s
        low = singular_value_threshold(m - s + y / rho, 1.0 / rho)
        s = shrink(m - low + y / rho, mu / rho)
        gap = m - low - s
        residual = np.linalg.norm(gap, "fro") / m_fro
        history.append(residual)
        dual = rho * np.linalg.norm(s - s_prev, "fro") / m_fro if balanced else 0.0
        if residual <= opts.tol and dual <= opts.tol:
            logger.debug("R-PCA converged in %d iterations (residual %.3g)", it, residual)
            return Decomposition(low, s, mu, it, float(residual), history=history)
        y = y + rho * gap
        if not balanced or residual > opts.balance_ratio * dual:
            rho = min(rho * opts.rho_growth, rho_max)
        elif dual > opts.balance_ratio * residual:
            rho = rho / opts.rho_growth

    partial = Decomposition(low, s, mu, opts.max_iter, float(residual), converged=False,
                            history=history)
    raise ConvergenceError(
        f"R-PCA did not converge in {opts.max_iter} iterations "
        f"(residual {residual:.3g} > tol {opts.tol:.3g})",
        residual=float(residual),
        partial=partial,
    )
