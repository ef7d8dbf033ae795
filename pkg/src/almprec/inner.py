"""
inner.py

Sub-problem solvers: a Truncated Newton step built on the Krylov solvers,
and the (preconditioned) spectral projected gradient method for
box-constrained sub-problems.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .krylov import IndefiniteOperatorError, pcg, pminres


@dataclass
class InnerConfig:
    grad_tol: float = 1e-7
    max_iterations: int = 500
    krylov_tol: float = 1e-8
    krylov_maxit: Optional[int] = None
    memory: int = 10
    alpha_min: float = 1e-10
    alpha_max: float = 1e10
    sufficient_decrease: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 50

    def __post_init__(self):
        if not 0 < self.alpha_min < self.alpha_max:
            raise ValueError("require 0 < alpha_min < alpha_max")
        if self.memory < 1:
            raise ValueError("memory must be >= 1")


@dataclass
class TnStep:
    direction: np.ndarray
    krylov_iterations: int
    solver: str  # "pcg" | "pminres"
    converged: bool
    preconditioned: bool
    fallback_gradient: bool = False


@dataclass
class SpgResult:
    x: np.ndarray
    iterations: int
    status: str  # "converged" | "max-iterations" | "line-search-failure"
    f_value: float = np.nan


def project_box(x, lower, upper):
    """Componentwise Euclidean projection onto [lower, upper]."""
    return np.minimum(np.maximum(x, lower), upper)


def active_bound_mask(x, g, lower, upper, tol=1e-10):
    """Components pinned at a bound with the gradient pushing outward.
    Scaled directions must not couple these into the free variables."""
    return (((x <= lower + tol) & (g > 0.0))
            | ((x >= upper - tol) & (g < 0.0)))


def spectral_steplength(s, y, bounds):
    """Barzilai-Borwein step s's / s'y clamped to bounds; upper bound on
    nonpositive curvature."""
    alpha_min, alpha_max = bounds
    sy = float(np.asarray(s) @ np.asarray(y))
    if sy <= 0.0:
        return alpha_max
    return float(np.clip(float(np.asarray(s) @ np.asarray(s)) / sy,
                         alpha_min, alpha_max))


def truncated_newton_step(model, grad, precond, cfg):
    """
    Solve the quadratic model H d = -grad inexactly: PCG first, MINRES
    when CG detects an indefinite operator.  A non-descent result is
    replaced by the steepest-descent direction.
    """
    apply_model = model.apply if hasattr(model, "apply") else model
    rhs = -np.asarray(grad, dtype=np.float64)
    used_precond = precond is not None

    def _run(solver, with_precond):
        return solver(apply_model, precond if with_precond else None, rhs,
                      tol=cfg.krylov_tol, maxit=cfg.krylov_maxit)

    try:
        report = _run(pcg, used_precond)
        solver = "pcg"
    except IndefiniteOperatorError:
        try:
            report = _run(pminres, used_precond)
        except ValueError:
            # Preconditioner unsuitable for MINRES; drop it.
            used_precond = False
            report = _run(pminres, False)
        solver = "pminres"

    d = report.solution
    fallback = False
    if float(d @ grad) >= 0.0:
        d = rhs.copy()
        fallback = True
    return TnStep(d, report.iterations, solver, report.converged,
                  used_precond, fallback)


def _resolve_precond(precond, z, s, y):
    """A provider exposes .get(z, s, y); anything else is a static
    operator (object with .apply, or a bare callable)."""
    if precond is None:
        return None
    if hasattr(precond, "get"):
        op = precond.get(z, s, y)
    else:
        op = precond
    if op is None:
        return None
    return op.apply if hasattr(op, "apply") else op


def _backtrack(f_eval, x, d, slope, f_ref, cfg):
    t = 1.0
    for _bt in range(cfg.max_backtracks + 1):
        trial = x + t * d
        f_trial = f_eval(trial)
        if f_trial <= f_ref + cfg.sufficient_decrease * t * slope:
            return t, True, trial, f_trial
        t *= cfg.backtrack
    return t, False, trial, f_trial


def spg_solve(f_eval, grad_eval, lower, upper, x0, cfg, precond=None):
    """
    Spectral projected gradient with nonmonotone line search along
    d = P_box(x - alpha D grad) - x, D = identity or the preconditioner.
    Terminates when ||P_box(x - grad) - x||_inf <= cfg.grad_tol.
    """
    x = project_box(np.asarray(x0, dtype=np.float64), lower, upper)
    fx = f_eval(x)
    g = grad_eval(x)
    f_memory = [fx]
    s_prev = y_prev = None
    alpha_bb = None      # plain spectral coefficient
    alpha_p = 1.0        # coefficient in the preconditioned metric
    status = "max-iterations"
    iterations = 0

    for _ in range(cfg.max_iterations):
        pg = project_box(x - g, lower, upper) - x
        if np.max(np.abs(pg), initial=0.0) <= cfg.grad_tol:
            status = "converged"
            break
        iterations += 1
        if alpha_bb is None:
            alpha_bb = min(cfg.alpha_max,
                           max(cfg.alpha_min, 1.0 / np.max(np.abs(pg))))

        apply_p = _resolve_precond(precond, x, s_prev, y_prev)
        d = None
        if apply_p is not None:
            # Two-metric safeguard: precondition only the free variables;
            # bound-pinned components keep their raw gradient (clipped by
            # the projection anyway).
            act = active_bound_mask(x, g, lower, upper)
            pgrad = apply_p(np.where(act, 0.0, g))
            pgrad = np.where(act, g, pgrad)
            d = project_box(x - alpha_p * pgrad, lower, upper) - x
            if float(d @ g) >= 0.0:
                d = None
        if d is None:
            d = project_box(x - alpha_bb * g, lower, upper) - x
        slope = float(d @ g)
        if slope >= 0.0:
            d = pg
            slope = float(d @ g)

        f_ref = max(f_memory)
        t, accepted, trial, f_trial = _backtrack(f_eval, x, d, slope,
                                                 f_ref, cfg)
        if not accepted and d is not pg:
            # Retry along the projected gradient with a fresh line search.
            d = pg
            slope = float(d @ g)
            t, accepted, trial, f_trial = _backtrack(f_eval, x, d, slope,
                                                     f_ref, cfg)
        if not accepted:
            status = "line-search-failure"
            break

        g_trial = grad_eval(trial)
        s_prev = trial - x
        y_prev = g_trial - g
        sy = float(s_prev @ y_prev)
        ss = float(s_prev @ s_prev)
        if sy > 1e-14 * max(ss, 1e-300):
            alpha_bb = float(np.clip(ss / sy, cfg.alpha_min, cfg.alpha_max))
            if apply_p is not None:
                # Spectral coefficient in the preconditioned metric:
                # equals 1 when D inverts the local Hessian exactly, so it
                # is trusted only within a moderate band around 1.
                ypy = float(y_prev @ apply_p(y_prev))
                if ypy > 0.0:
                    alpha_p = float(np.clip(sy / ypy, 1e-2, 1e2))
        elif sy <= 0.0 and ss > 0.0:
            alpha_bb = cfg.alpha_max
        # On degenerate (near-zero) steps both coefficients are kept.
        x = trial
        fx = f_trial
        g = g_trial
        f_memory.append(fx)
        if len(f_memory) > cfg.memory:
            f_memory.pop(0)

    return SpgResult(x, iterations, status, fx)
