"""Iterative constrained solver: augmented-Lagrangian outer loop around
damped Gauss-Newton steps with a backtracking line search.

Inequalities use the standard shifted-penalty (PHR) form, so the inner
problem is a nonlinear least squares over the cost residuals plus penalty
residuals. The step is Levenberg-damped in a variable-scaled metric, clipped
to the variable bounds; frozen variables never move. A hook is invoked at
the top of every iteration after the first so callers can refresh the
initial-state target mid-solve.

Primal infeasibility inf_pr is the max-norm of the scaled constraint
violations. A solve is classified against two thresholds: preferred 1e-4
and acceptable 1e-3; a receding-horizon caller must fall back when the
result is worse than acceptable.
"""

import csv
import time
from dataclasses import dataclass, field

import numpy as np

PREFERRED_THRESHOLD = 1e-4
ACCEPTABLE_THRESHOLD = 1e-3

CONVERGED = "Converged"
ITER_LIMIT = "IterLimit"
FAILED = "Failed"


def thresholds():
    """(preferred, acceptable) primal-infeasibility thresholds."""
    return PREFERRED_THRESHOLD, ACCEPTABLE_THRESHOLD


def classify(inf_pr: float) -> str:
    if inf_pr <= PREFERRED_THRESHOLD:
        return "preferred"
    if inf_pr <= ACCEPTABLE_THRESHOLD:
        return "acceptable"
    return "infeasible"


@dataclass
class IterationRecord:
    iteration: int
    cost: float
    inf_pr: float
    step_norm: float
    accepted: bool


@dataclass
class SolveReport:
    records: list = field(default_factory=list)
    status: str = ITER_LIMIT
    v: np.ndarray = None
    final_cost: float = np.inf
    final_inf_pr: float = np.inf
    wall_time: float = 0.0

    @property
    def iterations(self) -> int:
        return len(self.records)

    def best_inf_pr_trace(self) -> np.ndarray:
        """Running best inf_pr over accepted iterates."""
        best = np.inf
        out = []
        for rec in self.records:
            if rec.accepted:
                best = min(best, rec.inf_pr)
            out.append(best)
        return np.asarray(out)

    def iterations_to(self, threshold: float):
        """First iteration whose iterate met the threshold, or None."""
        for rec in self.records:
            if rec.inf_pr <= threshold:
                return rec.iteration
        return None

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iter", "cost", "inf_pr"])
            for rec in self.records:
                writer.writerow([rec.iteration, repr(rec.cost),
                                 repr(rec.inf_pr)])


@dataclass(frozen=True)
class SolverOptions:
    rho_init: float = 100.0
    rho_growth: float = 5.0
    rho_max: float = 1e8
    nu_init: float = 1e-4
    nu_shrink: float = 0.33
    nu_grow: float = 10.0
    nu_max: float = 1e10
    max_damping_retries: int = 8
    armijo: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 12
    multiplier_every: int = 3
    inner_grad_tol: float = 1e-7
    step_tol: float = 1e-7
    kkt_tol: float = 2e-2
    plateau_step: float = 1e-5
    plateau_count: int = 3
    viol_shrink: float = 0.5
    max_consecutive_fails: int = 3


def _phr_residuals(eq, ineq, lam_eq, lam_in, rho):
    """Penalty residuals whose squared norm is the augmented Lagrangian
    (up to a constant in the multipliers)."""
    r_eq = np.sqrt(rho / 2.0) * (eq - lam_eq / rho)
    r_in = np.maximum(0.0, lam_in - rho * ineq) / np.sqrt(2.0 * rho)
    return r_eq, r_in


def _merit(problem, v, lam_eq, lam_in, rho):
    eq, ineq, cres = problem.eval_all(v)
    r_eq, r_in = _phr_residuals(eq, ineq, lam_eq, lam_in, rho)
    phi = float(cres @ cres + r_eq @ r_eq + r_in @ r_in)
    inf_pr = _inf_pr(eq, ineq)
    return phi, inf_pr, float(cres @ cres)

def _inf_pr(eq, ineq) -> float:
    worst_eq = float(np.max(np.abs(eq))) if eq.size else 0.0
    worst_in = float(np.max(np.maximum(0.0, -ineq))) if ineq.size else 0.0
    return max(worst_eq, worst_in)


def _kkt_residual(problem, v, jac, eq, ineq, cres) -> float:
    """Stationarity residual with least-squares multiplier estimates,
    projected onto inactive bounds and free variables."""
    n_eq = problem.n_eq
    j_cost = jac[n_eq + problem.n_ineq:]
    grad = 2.0 * j_cost.T @ cres
    active_in = np.flatnonzero(ineq < 1e-6)
    rows = [jac[:n_eq]]
    if active_in.size:
        rows.append(jac[n_eq + active_in])
    a_mat = np.vstack(rows)
    free = problem.free_idx
    at_lb = (v <= problem.lb + 1e-9)
    at_ub = (v >= problem.ub - 1e-9)
    a_f = a_mat[:, free]
    g_f = grad[free]
    lam, *_ = np.linalg.lstsq(a_f.T, g_f, rcond=None)
    stat = g_f - a_f.T @ lam
    # a bound may legitimately carry the remaining gradient
    stat[at_lb[free] & (stat > 0)] = 0.0
    stat[at_ub[free] & (stat < 0)] = 0.0
    scale = 1.0 + float(np.max(np.abs(g_f))) if g_f.size else 1.0
    return float(np.max(np.abs(stat))) / scale if stat.size else 0.0


def solve(problem, v0, budget: int, callback=None,
          opts: SolverOptions = SolverOptions()) -> SolveReport:
    """Run up to `budget` Gauss-Newton iterations on the problem from v0.

    callback(iteration, problem, v), when given, runs before every iteration
    after the first; it may mutate the problem's initial-state target.
    Deterministic: no randomness anywhere in the loop.
    """
    if budget < 1:
        raise ValueError("iteration budget must be >= 1")
    t_start = time.perf_counter()
    report = SolveReport()

    v = np.clip(np.asarray(v0, dtype=float), problem.lb, problem.ub)
    v[problem.frozen] = np.asarray(v0, dtype=float)[problem.frozen]
    free = problem.free_idx
    scale_f = problem.var_scale[free]

    lam_eq = np.zeros(problem.n_eq)
    lam_in = np.zeros(problem.n_ineq)
    rho = opts.rho_init
    nu = opts.nu_init

    best_key = (np.inf, np.inf)
    best_v = v.copy()
    accepted_since_update = 0
    viol_ref = np.inf
    consecutive_fails = 0
    last_step = np.inf

    def outer_update(v_now):
        nonlocal lam_eq, lam_in, rho, viol_ref, accepted_since_update, nu
        eq_u, ineq_u, _ = problem.eval_all(v_now)
        lam_eq = lam_eq - rho * eq_u
        lam_in = np.maximum(0.0, lam_in - rho * ineq_u)
        viol = _inf_pr(eq_u, ineq_u)
        if viol > opts.viol_shrink * viol_ref and rho < opts.rho_max:
            rho *= opts.rho_growth
        viol_ref = viol if not np.isfinite(viol_ref) else min(viol_ref, viol)
        accepted_since_update = 0
        nu = max(nu, opts.nu_init)

    for it in range(1, budget + 1):
        if callback is not None and it > 1:
            callback(it, problem, v)

        eq, ineq, cres = problem.eval_all(v)
        inf_pr = _inf_pr(eq, ineq)
        cost = float(cres @ cres)

        key = (0 if inf_pr <= ACCEPTABLE_THRESHOLD else 1,
               cost if inf_pr <= ACCEPTABLE_THRESHOLD else inf_pr)
        if key < best_key:
            best_key = key
            best_v = v.copy()

        jac = problem.jacobian(v)

        # early exit when feasible and stationary (supports warm restarts),
        # or when feasible and the steps have plateaued
        converged = False
        if inf_pr <= ACCEPTABLE_THRESHOLD:
            if last_step <= 10 * opts.step_tol or it == 1 \
                    or consecutive_fails > 0:
                kkt = _kkt_residual(problem, v, jac, eq, ineq, cres)
                if kkt <= opts.kkt_tol:
                    converged = True
            recent = [r.step_norm for r in report.records[-opts.plateau_count:]
                      if r.accepted]
            if len(recent) >= opts.plateau_count and \
                    max(recent) < opts.plateau_step:
                converged = True
        if converged:
            report.records.append(IterationRecord(it, cost, inf_pr, 0.0, True))
            report.status = CONVERGED
            break

        r_eq, r_in = _phr_residuals(eq, ineq, lam_eq, lam_in, rho)
        phi0 = float(cres @ cres + r_eq @ r_eq + r_in @ r_in)
        n_eq = problem.n_eq
        active = (lam_in - rho * ineq) > 0.0
        j_eq = jac[:n_eq]
        j_in = jac[n_eq:n_eq + problem.n_ineq]
        j_cost = jac[n_eq + problem.n_ineq:]
        rows = [j_cost,
                np.sqrt(rho / 2.0) * j_eq,
                (-np.sqrt(rho / 2.0)) * (active[:, None] * j_in)]
        r_stack = np.concatenate([cres, r_eq, r_in])
        j_stack = np.vstack(rows)

        # variables pressing against an active bound are excluded from the
        # step (a clipped Newton direction is not necessarily descent)
        grad_full = 2.0 * (j_stack.T @ r_stack)
        pinned = ((v <= problem.lb + 1e-9) & (grad_full > 0.0)) | \
                 ((v >= problem.ub - 1e-9) & (grad_full < 0.0))
        work = problem.free_idx[~pinned[problem.free_idx]]
        if work.size == 0:
            work = free
        scale_w = problem.var_scale[work]

        # scaled normal equations over the working set
        j_f = j_stack[:, work] * scale_w[None, :]
        g_f = j_f.T @ r_stack
        h_f = j_f.T @ j_f
        diag = np.diag(h_f).copy()
        diag[diag < 1e-10] = 1e-10

        # inner subproblem locally solved: advance the outer loop instead
        if float(np.max(np.abs(g_f))) <= \
                opts.inner_grad_tol * (1.0 + phi0):
            report.records.append(
                IterationRecord(it, cost, inf_pr, 0.0, False))
            outer_update(v)
            last_step = np.inf  # force a fresh attempt next iteration
            continue

        accepted = False
        step_norm = 0.0
        nu_try = nu
        for _ in range(opts.max_damping_retries):
            try:
                delta_s = np.linalg.solve(
                    h_f + nu_try * np.diag(diag), -g_f)
            except np.linalg.LinAlgError:
                nu_try *= opts.nu_grow
                continue
            delta = np.zeros_like(v)
            delta[work] = delta_s * scale_w
            slope = 2.0 * float(g_f @ delta_s)
            alpha = 1.0
            for _ in range(opts.max_backtracks):
                v_try = np.clip(v + alpha * delta, problem.lb, problem.ub)
                v_try[problem.frozen] = v[problem.frozen]
                phi_try, _, _ = _merit(problem, v_try, lam_eq, lam_in, rho)
                if phi_try <= phi0 + opts.armijo * alpha * slope or \
                        phi_try < phi0 * (1 - 1e-12):
                    accepted = True
                    break
                alpha *= opts.backtrack
            if accepted:
                step_norm = float(
                    np.linalg.norm((v_try - v) / problem.var_scale))
                v = v_try
                nu = max(nu_try * opts.nu_shrink, 1e-12)
                break
            nu_try *= opts.nu_grow
            if nu_try > opts.nu_max:
                break

        report.records.append(
            IterationRecord(it, cost, inf_pr, step_norm, accepted))
        last_step = step_norm if accepted else 0.0

        if not accepted:
            consecutive_fails += 1
            # the merit cannot improve here: move the outer problem along
            outer_update(v)
            if consecutive_fails >= opts.max_consecutive_fails:
                report.status = FAILED if inf_pr > ACCEPTABLE_THRESHOLD \
                    else CONVERGED
                break
            continue

        consecutive_fails = 0
        accepted_since_update += 1
        if accepted_since_update >= opts.multiplier_every or \
                step_norm < opts.step_tol:
            outer_update(v)

    # final bookkeeping: return the best iterate seen
    eq, ineq, cres = problem.eval_all(v)
    key = (0 if _inf_pr(eq, ineq) <= ACCEPTABLE_THRESHOLD else 1,
           float(cres @ cres) if _inf_pr(eq, ineq) <= ACCEPTABLE_THRESHOLD
           else _inf_pr(eq, ineq))
    if key < best_key:
        best_key = key
        best_v = v.copy()
    report.v = best_v
    eq, ineq, cres = problem.eval_all(best_v)
    report.final_inf_pr = _inf_pr(eq, ineq)
    report.final_cost = float(cres @ cres)
    if report.status == ITER_LIMIT and report.records and \
            report.final_inf_pr <= ACCEPTABLE_THRESHOLD:
        pass  # iteration limit with an acceptable iterate is still usable
    if report.status == CONVERGED and \
            report.final_inf_pr > ACCEPTABLE_THRESHOLD:
        report.status = FAILED
    report.wall_time = time.perf_counter() - t_start
    return report
