"""
bench.py

Experiment harness: spectral quality of the structured preconditioner,
iteration counts for preconditioned linear solves, and full solver runs
over the built-in problem library.  Emits CSV (17 significant digits) or
an aligned text table derived from the CSV.
"""

import io
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .alm import AlmConfig, alm_solve
from .auxprecond import build_aux
from .krylov import pcg
from .problems import get_problem
from .sparse import SparseSymmetricMatrix, read_matrix_market
from .structured import ColumnSet, StructuredPrecond

DENSE_LIMIT = 2000


@dataclass
class ExperimentConfig:
    kind: str = "spectral"  # spectral | linsys | solve
    matrix: str = ""        # Matrix Market path; empty -> random instance
    n: int = 100
    density: float = 0.05
    m: int = 10
    seed: int = 0
    rho_list: tuple = (1.5, 15.5, 154.8, 1548.3, 15483.0)
    drop_tol_list: tuple = (0.1,)
    aux_kind: str = "incomplete-cholesky"
    tol: float = 1e-8
    problems: tuple = ("EQ-QP",)
    solvers: tuple = ("truncated-newton",)
    hessian_modes: tuple = ("NW",)
    policies: tuple = ("auto",)
    alm: AlmConfig = field(default_factory=AlmConfig)


def random_spd_matrix(n, density, seed):
    """
    Seeded random sparse SPD matrix: symmetric N(0,1) off-diagonals at the
    requested density, then a uniform diagonal shift placing the smallest
    eigenvalue at 1e-3.
    """
    rng = np.random.default_rng(seed)
    dense = np.zeros((n, n))
    rows, cols = np.tril_indices(n, k=-1)
    mask = rng.random(rows.size) < density
    vals = rng.standard_normal(int(mask.sum()))
    dense[rows[mask], cols[mask]] = vals
    dense = dense + dense.T
    dense[np.diag_indices(n)] = rng.random(n)
    lam_min = float(np.linalg.eigvalsh(dense).min())
    dense += (1e-3 - lam_min) * np.eye(n)
    return SparseSymmetricMatrix.from_dense(dense, tol=0.0)


def random_constraints(n, m, seed):
    """Standard-normal constraint columns."""
    rng = np.random.default_rng(seed + 1)
    return rng.standard_normal((n, m))


def materialize(apply_op, n):
    out = np.empty((n, n))
    eye = np.eye(n)
    for j in range(n):
        out[:, j] = apply_op(eye[:, j])
    return out


def condition_estimate(apply_op, n):
    """kappa_1 = ||A||_1 ||A^-1||_1 via dense materialization; +inf when
    singular to working precision."""
    if n > DENSE_LIMIT:
        raise ValueError("operator too large for dense estimation")
    dense = materialize(apply_op, n)
    norm = float(np.abs(dense).sum(axis=0).max())
    try:
        inv = np.linalg.inv(dense)
    except np.linalg.LinAlgError:
        return float("inf")
    inv_norm = float(np.abs(inv).sum(axis=0).max())
    kappa = norm * inv_norm
    return kappa if np.isfinite(kappa) else float("inf")


def _load_matrix(cfg):
    if cfg.matrix:
        return read_matrix_market(cfg.matrix), cfg.matrix
    return random_spd_matrix(cfg.n, cfg.density, cfg.seed), "random"


def _force_spd(m):
    """Diagonal shift making the matrix SPD; returns (matrix, shift)."""
    lam_min = float(np.linalg.eigvalsh(m.to_dense()).min())
    if lam_min > 0.0:
        return m, 0.0
    shift = abs(lam_min) + 1e-6
    dense = m.to_dense() + shift * np.eye(m.n)
    return SparseSymmetricMatrix.from_dense(dense, tol=0.0), shift


def _h_apply(m, v_cols, rho):
    def apply_h(x):
        y = m.matvec(x)
        if v_cols.shape[1]:
            y = y + rho * v_cols @ (v_cols.T @ x)
        return y
    return apply_h


def _structured(aux, v_cols, rho):
    n, m_count = v_cols.shape
    cols = ColumnSet(n, np.sqrt(rho) * v_cols, np.ones(m_count),
                     list(range(m_count)))
    return StructuredPrecond(aux, cols)


def spectrum_identity_residual(m, aux, v, rho):
    """
    Maximum per-eigenvalue gap between the preconditioned operator and
    the advertised rank-1 form
    I + (1 - upsilon) P_M^-1 v v' (P_M^-1 M - I).
    """
    n = m.n
    q = materialize(aux.apply, n)
    dense_m = m.to_dense()
    e_m = q @ dense_m - np.eye(n)
    qv = q @ v
    upsilon = rho / (1.0 + rho * float(v @ qv))
    rhs = np.eye(n) + (1.0 - upsilon) * np.outer(qv, v) @ e_m

    sp = _structured(aux, v.reshape(-1, 1), rho)
    h = dense_m + rho * np.outer(v, v)
    lhs = materialize(sp.apply, n) @ h

    lam_lhs = np.sort(np.linalg.eigvals(lhs).real)
    lam_rhs = np.sort(np.linalg.eigvals(rhs).real)
    return float(np.max(np.abs(lam_lhs - lam_rhs)))


def run_spectral_experiment(cfg):
    m, name = _load_matrix(cfg)
    m, shift = _force_spd(m)
    v_cols = random_constraints(m.n, cfg.m, cfg.seed)
    rows = []
    for drop_tol in cfg.drop_tol_list:
        aux = build_aux(m, cfg.aux_kind,
                        drop_tol if cfg.aux_kind == "incomplete-cholesky"
                        else None)
        for rho in cfg.rho_list:
            h_apply = _h_apply(m, v_cols, rho)
            sp = _structured(aux, v_cols, rho)
            kappa_h = condition_estimate(h_apply, m.n)
            pinv_h = materialize(
                lambda x: sp.apply(h_apply(x)), m.n)
            norm = float(np.abs(pinv_h).sum(axis=0).max())
            try:
                inv_norm = float(
                    np.abs(np.linalg.inv(pinv_h)).sum(axis=0).max())
                kappa_ph = norm * inv_norm
            except np.linalg.LinAlgError:
                kappa_ph = float("inf")
            eig_h = np.sort(np.linalg.eigvalsh(
                materialize(h_apply, m.n)))
            eig_ph = np.sort(np.linalg.eigvals(pinv_h).real)
            row = {
                "name": name, "n": m.n, "m": cfg.m, "seed": cfg.seed,
                "drop_tol": drop_tol, "rho": rho, "spd_shift": shift,
                "kappa_H": kappa_h, "kappa_PH": kappa_ph,
                "eig_H": _pack(eig_h), "eig_PH": _pack(eig_ph),
            }
            if cfg.m == 1:
                row["spectrum_identity_residual"] = \
                    spectrum_identity_residual(m, aux, v_cols[:, 0], rho)
            rows.append(row)
    return rows


def run_linsys_experiment(cfg):
    m, name = _load_matrix(cfg)
    m, shift = _force_spd(m)
    v_cols = random_constraints(m.n, cfg.m, cfg.seed)
    maxit = 10 * m.n
    rows = []
    for drop_tol in cfg.drop_tol_list:
        aux = build_aux(m, cfg.aux_kind,
                        drop_tol if cfg.aux_kind == "incomplete-cholesky"
                        else None)
        for rho in cfg.rho_list:
            h_apply = _h_apply(m, v_cols, rho)
            sp = _structured(aux, v_cols, rho)
            y = h_apply(np.ones(m.n))
            plain = pcg(h_apply, None, y, tol=cfg.tol, maxit=maxit)
            prec = pcg(h_apply, sp.apply, y, tol=cfg.tol, maxit=maxit)
            kappa_h = condition_estimate(h_apply, m.n)
            kappa_ph = condition_estimate(
                lambda x: sp.apply(h_apply(x)), m.n)
            rows.append({
                "name": name, "n": m.n, "m": cfg.m, "seed": cfg.seed,
                "drop_tol": drop_tol, "rho": rho, "spd_shift": shift,
                "nnz_Z": aux.nnz,
                "nnz_Z/n^2": aux.nnz / m.n ** 2,
                "nnz_Z/nnz_M": aux.nnz / max(m.nnz, 1),
                "kappa_H": kappa_h, "kappa_PH": kappa_ph,
                "CG": plain.iterations if plain.converged else "n/c",
                "PCG": prec.iterations if prec.converged else "n/c",
            })
    return rows


def run_alm_experiment(cfg):
    rows = []
    for problem_name in cfg.problems:
        for solver in cfg.solvers:
            for mode in cfg.hessian_modes:
                for policy in cfg.policies:
                    p = get_problem(problem_name)
                    alm_cfg = replace(
                        cfg.alm, inner_solver=solver, hessian_mode=mode,
                        precond_policy=policy, aux_kind=cfg.aux_kind)
                    start = time.perf_counter()
                    try:
                        rep = alm_solve(p, alm_cfg)
                        row = {
                            "problem": problem_name, "n": p.n, "m": p.m,
                            "solver": solver, "mode": mode,
                            "policy": policy,
                            "status": ("n/c" if rep.status
                                       == "no convergence"
                                       else rep.status),
                            "ItL": rep.outer_iterations,
                            "Itin": rep.inner_iterations,
                            "Itpd": rep.krylov_precond,
                            "Itd": rep.krylov_plain,
                            "AcM": rep.ac_m, "AcV": rep.ac_v,
                            "f": rep.f_value,
                            "kkt_opt": rep.kkt_opt,
                            "kkt_feas": rep.kkt_feas,
                        }
                    except Exception as exc:  # per-run failures stay in-row
                        row = {
                            "problem": problem_name, "n": p.n, "m": p.m,
                            "solver": solver, "mode": mode,
                            "policy": policy,
                            "status": "error: %s" % exc,
                            "ItL": "", "Itin": "", "Itpd": "", "Itd": "",
                            "AcM": "", "AcV": "", "f": "",
                            "kkt_opt": "", "kkt_feas": "",
                        }
                    row["time_s"] = time.perf_counter() - start
                    rows.append(row)
    return rows


def run_experiment(cfg):
    if cfg.kind == "spectral":
        return run_spectral_experiment(cfg)
    if cfg.kind == "linsys":
        return run_linsys_experiment(cfg)
    if cfg.kind == "solve":
        return run_alm_experiment(cfg)
    raise ValueError("unknown experiment kind %r" % cfg.kind)


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

def _fmt(value):
    if isinstance(value, float):
        return "%.17g" % value
    return str(value)


def _pack(values):
    return ";".join("%.17g" % v for v in values)


def rows_to_csv(rows, time_column_stable=False):
    """CSV text with a header row.  With time_column_stable, wall-clock
    columns are zeroed so repeated runs are byte-identical."""
    if not rows:
        return "\n"
    columns = list(rows[0].keys())
    out = io.StringIO()
    out.write(",".join(columns) + "\n")
    for row in rows:
        vals = []
        for col in columns:
            v = row.get(col, "")
            if time_column_stable and col == "time_s":
                v = 0.0
            vals.append(_fmt(v))
        out.write(",".join(vals) + "\n")
    return out.getvalue()


def csv_to_table(csv_text):
    """Aligned text rendering derived from the CSV, never recomputed."""
    lines = [l for l in csv_text.splitlines() if l]
    if not lines:
        return ""
    cells = [line.split(",") for line in lines]
    ncol = len(cells[0])
    widths = [max(len(row[i]) if i < len(row) else 0 for row in cells)
              for i in range(ncol)]
    out = []
    for row in cells:
        out.append("  ".join(
            (row[i] if i < len(row) else "").ljust(widths[i])
            for i in range(ncol)).rstrip())
    return "\n".join(out) + "\n"
