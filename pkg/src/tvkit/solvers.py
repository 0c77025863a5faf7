"""Iterative machinery: matrix-free CG and the lagged-diffusivity outer loop.

The restoration fixed point solves

    [H^T H + lam * L(f_k)] f_{k+1} = H^T g

where ``L(f_k)`` is the TV operator with diffusivity weights frozen at the
previous iterate.  Freezing the weights makes each outer step a linear SPD
solve (done by CG), and because the TV potential is concave in the squared
gradient the step minimizes a majorizer of the true objective, so the
objective decreases monotonically up to solver tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import functionals
from .grid import Kernel, VectorField, convolve, convolve_adjoint, divergence, gradient
from .functionals import TVVariant

DESCENT_SLACK = 1e-9


class SolverDivergenceError(RuntimeError):
    """Raised when an iteration produces non-finite values.

    Carries the partial `SolveReport` (if any) in ``report``.
    """

    def __init__(self, message: str, report: "SolveReport | None" = None):
        super().__init__(message)
        self.report = report


@dataclass
class SolverConfig:
    """Tolerances and iteration caps shared by the outer and CG loops.

    ``tol_outer`` is the L2 step-norm threshold for the outer fixed-point
    loop; ``None`` resolves to ``1e-4 * sqrt(#unknowns)`` at solve time.
    """

    tol_outer: Optional[float] = None
    max_outer: int = 50
    tol_cg: float = 1e-8
    max_cg: int = 500

    def __post_init__(self):
        if self.tol_outer is not None and not self.tol_outer > 0:
            raise ValueError("tol_outer must be positive")
        if self.max_outer < 1:
            raise ValueError("max_outer must be >= 1")
        if not self.tol_cg > 0 or self.max_cg < 1:
            raise ValueError("tol_cg must be positive and max_cg >= 1")

    def resolved_tol_outer(self, n_unknowns: int) -> float:
        if self.tol_outer is not None:
            return self.tol_outer
        return 1e-4 * math.sqrt(n_unknowns)


@dataclass
class SolveReport:
    """Per-iteration record of an outer solve."""

    outer_iterations: int = 0
    converged: bool = False
    objective_history: list[float] = field(default_factory=list)
    step_norm_history: list[float] = field(default_factory=list)
    cg_iterations_total: int = 0
    cg_iters_history: list[int] = field(default_factory=list)
    # descent / contraction are monitored, not enforced
    objective_monotone: bool = True
    step_norms_monotone: bool = True


def _finalize_report(report: SolveReport) -> SolveReport:
    obj = report.objective_history
    report.objective_monotone = all(
        b <= a + DESCENT_SLACK for a, b in zip(obj, obj[1:])
    )
    steps = report.step_norm_history
    report.step_norms_monotone = all(
        b <= a + DESCENT_SLACK for a, b in zip(steps, steps[1:])
    )
    return report


def conjugate_gradient(
    apply_A: Callable[[np.ndarray], np.ndarray],
    b: np.ndarray,
    x0: Optional[np.ndarray] = None,
    cfg: Optional[SolverConfig] = None,
) -> tuple[np.ndarray, int, bool]:
    """Solve ``A x = b`` for a symmetric positive (semi-)definite operator.

    Standard CG recurrences on arrays of any shape; stops when
    ``||A x - b|| <= tol_cg * ||b||`` or after ``max_cg`` iterations.
    Returns ``(x, iterations, converged)``.  Raises `SolverDivergenceError`
    if the residual turns non-finite (indefinite or ill-posed operator).
    """
    cfg = cfg or SolverConfig()
    b = np.asarray(b, dtype=np.float64)
    bnorm = float(np.sqrt(np.vdot(b, b).real))
    if bnorm == 0.0:
        return np.zeros_like(b), 0, True
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=np.float64)
    threshold = cfg.tol_cg * bnorm

    r = b - apply_A(x)
    rs = float(np.vdot(r, r).real)
    if not np.isfinite(rs):
        raise SolverDivergenceError("non-finite residual entering CG")
    if math.sqrt(rs) <= threshold:
        return x, 0, True
    p = r.copy()
    for k in range(1, cfg.max_cg + 1):
        Ap = apply_A(p)
        pAp = float(np.vdot(p, Ap).real)
        if not np.isfinite(pAp):
            raise SolverDivergenceError(f"non-finite curvature at CG iteration {k}")
        if pAp <= 0.0:
            # null-space direction of a semi-definite operator: nothing left to do
            return x, k - 1, math.sqrt(rs) <= threshold
        alpha = rs / pAp
        x = x + alpha * p
        r = r - alpha * Ap
        rs_new = float(np.vdot(r, r).real)
        if not np.isfinite(rs_new):
            raise SolverDivergenceError(f"non-finite residual at CG iteration {k}")
        if math.sqrt(rs_new) <= threshold:
            return x, k, True
        p = r + (rs_new / rs) * p
        rs = rs_new
    return x, cfg.max_cg, False


def _normal_equations(
    f_lin: np.ndarray,
    g: np.ndarray,
    kernel: Kernel,
    lam: float,
    alpha: float,
    variant: TVVariant,
):
    """Operator and right-hand side of one lagged-diffusivity linear system."""
    if lam > 0.0:
        wx, wy = functionals.diffusion_weights(f_lin, alpha, variant)

        def apply_A(x):
            return convolve_adjoint(convolve(x, kernel), kernel) + lam * (
                functionals.apply_weighted_laplacian(wx, wy, x)
            )

    else:

        def apply_A(x):
            return convolve_adjoint(convolve(x, kernel), kernel)

    return apply_A, convolve_adjoint(g, kernel)


def lagged_diffusivity_step(
    f_k: np.ndarray,
    g: np.ndarray,
    kernel: Kernel,
    lam: float,
    alpha: float = functionals.DEFAULT_ALPHA,
    cfg: Optional[SolverConfig] = None,
    variant: TVVariant = TVVariant.ISOTROPIC,
) -> np.ndarray:
    """One outer step: solve ``[H^T H + lam L(f_k)] f = H^T g``, warm-started
    at ``f_k``."""
    f_next, _, _ = _lagged_step(f_k, g, kernel, lam, alpha, cfg or SolverConfig(), variant)
    return f_next


def _lagged_step(f_k, g, kernel, lam, alpha, cfg, variant):
    f_k = np.asarray(f_k, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if f_k.shape != g.shape:
        raise ValueError("iterate and observation must have the same shape")
    apply_A, b = _normal_equations(f_k, g, kernel, lam, alpha, variant)
    return conjugate_gradient(apply_A, b, x0=f_k, cfg=cfg)


def tv_restore_fixed_point(
    g: np.ndarray,
    kernel: Kernel,
    lam: float,
    alpha: float = functionals.DEFAULT_ALPHA,
    cfg: Optional[SolverConfig] = None,
    variant: TVVariant = TVVariant.ISOTROPIC,
    init="observed",
) -> tuple[np.ndarray, SolveReport]:
    """Iterate `lagged_diffusivity_step` until the step norm drops below the
    outer tolerance or the iteration cap is reached.

    ``init`` selects the starting image: ``"observed"`` (the data, default),
    ``"mean"`` (a flat image at the observation's mean intensity), or an
    explicit starting array for warm starts.
    """
    if lam < 0:
        raise ValueError(f"lam must be nonnegative, got {lam}")
    g = np.asarray(g, dtype=np.float64)
    cfg = cfg or SolverConfig()
    if isinstance(init, np.ndarray):
        if init.shape != g.shape:
            raise ValueError("init array must match the observation shape")
        f = init.astype(np.float64, copy=True)
    elif init == "observed":
        f = g.copy()
    elif init == "mean":
        f = np.full_like(g, g.mean())
    else:
        raise ValueError(f"unknown init {init!r}")
    tol = cfg.resolved_tol_outer(g.size)

    report = SolveReport()
    for _ in range(cfg.max_outer):
        try:
            f_next, cg_iters, _ = _lagged_step(f, g, kernel, lam, alpha, cfg, variant)
        except SolverDivergenceError as err:
            err.report = _finalize_report(report)
            raise SolverDivergenceError(
                f"{err} (outer iteration {report.outer_iterations + 1})",
                report=err.report,
            ) from err
        step = float(np.linalg.norm(f_next - f))
        report.outer_iterations += 1
        report.cg_iterations_total += cg_iters
        report.cg_iters_history.append(cg_iters)
        report.objective_history.append(
            functionals.tv_objective(f_next, g, kernel, lam, alpha, variant)
        )
        report.step_norm_history.append(step)
        f = f_next
        if step < tol:
            report.converged = True
            break
    return f, _finalize_report(report)


def dual_projection_denoise(
    g: np.ndarray,
    lam: float,
    steps: int = 200,
    tau: float = 0.25,
) -> np.ndarray:
    """Projected dual iteration for the identity-operator denoising problem
    ``min 0.5*||f - g||^2 + lam * TV(f)``.

    Independent of the fixed-point path: works on the exact (unsmoothed) TV
    through its dual, iterating ``p <- (p + tau*grad(div p - g/lam)) /
    (1 + tau*|grad(div p - g/lam)|)`` and returning ``g - lam * div p``.
    """
    if lam <= 0:
        raise ValueError(f"lam must be positive, got {lam}")
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    g = np.asarray(g, dtype=np.float64)
    px = np.zeros_like(g)
    py = np.zeros_like(g)
    scaled = g / lam
    for _ in range(steps):
        gx, gy = gradient(divergence(VectorField(px, py)) - scaled)
        denom = 1.0 + tau * np.hypot(gx, gy)
        px = (px + tau * gx) / denom
        py = (py + tau * gy) / denom
    return g - lam * divergence(VectorField(px, py))
