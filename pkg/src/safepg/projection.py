"""Constrained-solution step: projecting shared knowledge into the safety set.

The safety set couples per-task linear constraints A_t (L s_t) <= b_t (written
as equalities with ball-bounded nonnegative slack) with a spectral box
p*I <= L^T L <= q*I. Projection of an unconstrained point minimizes the
quadratic Bregman divergence mu2*||L - L~||_F^2 + mu1*||S - S~||_F^2 by block
alternation: an L-step (ADMM between an equality-constrained least squares and
the spectral box) followed by decoupled per-task (s_t, c_t) cone programs.

`solve_sdp_L` and `solve_socp_S` additionally expose the two relaxed
subproblems in their published objective forms (note the sign of their linear
anchor terms; see the per-function docstrings).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, InfeasibleConstraint, NumericalFailure

_PINV_CUTOFF = 1e-10


@dataclass
class SafetyConstraint:
    """Per-task polytope A alpha <= b with cached pseudo-inverse data."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        if self.A.ndim != 2 or self.A.shape[0] != self.A.shape[1]:
            raise ContractViolation("A must be square (d x d)")
        if self.b.shape != (self.A.shape[0],):
            raise ContractViolation("b must have shape (d,)")
        u, s, vt = np.linalg.svd(self.A)
        cutoff = _PINV_CUTOFF * (s[0] if s.size and s[0] > 0 else 1.0)
        kept = s > cutoff
        inv = np.zeros_like(s)
        inv[kept] = 1.0 / s[kept]
        self.rank: int = int(np.count_nonzero(kept))
        self.pinv: np.ndarray = (vt.T * inv) @ u.T
        self.pinv_norm: float = float(inv.max()) if s.size else 0.0
        self.b_norm: float = float(np.linalg.norm(self.b))

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    @property
    def full_rank(self) -> bool:
        return self.rank == self.dim


@dataclass
class SlackVars:
    """Nonnegative per-task slack vectors, each inside the c_max ball."""

    c: dict[int, np.ndarray]
    c_max: float

    def __post_init__(self):
        self.c = {int(t): np.asarray(v, dtype=float) for t, v in self.c.items()}
        for t, v in self.c.items():
            if v.min(initial=0.0) < -1e-8:
                raise ContractViolation(f"negative slack for task {t}")
            if np.linalg.norm(v) > self.c_max + 1e-8:
                raise ContractViolation(f"slack for task {t} exceeds c_max ball")


@dataclass
class SpectralBox:
    """Symmetric k x k matrix constrained to p*I <= X <= q*I."""

    X: np.ndarray
    p: float
    q: float

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        if not np.allclose(self.X, self.X.T, atol=1e-9):
            raise ContractViolation("X must be symmetric")
        self.X = 0.5 * (self.X + self.X.T)


@dataclass
class FeasibilityReport:
    task_violation: dict[int, float]
    lambda_min: float
    lambda_max: float
    tol: float
    feasible: bool = field(init=False)
    violating_tasks: list[int] = field(init=False)

    def __post_init__(self):
        self.violating_tasks = [t for t, v in self.task_violation.items() if v > self.tol]
        spectral_ok = (self.lambda_min >= -self.tol) and (self.lambda_max >= -self.tol)
        self.feasible = spectral_ok and not self.violating_tasks


def slack_ball_project(x: np.ndarray, c_max: float) -> np.ndarray:
    """Exact projection onto {c >= 0, ||c||_2 <= c_max} (cone then ball)."""
    c = np.maximum(x, 0.0)
    nrm = np.linalg.norm(c)
    if nrm > c_max:
        c = c * (c_max / nrm)
    return c


def omega0_value(mu1: float, mu2: float, theta: np.ndarray, dk: int) -> float:
    """Quadratic regularizer: mu2 on the basis block, mu1 on the coefficients."""
    theta = np.asarray(theta, dtype=float)
    return float(mu2 * theta[:dk] @ theta[:dk] + mu1 * theta[dk:] @ theta[dk:])


def omega0_grad(mu1: float, mu2: float, theta: np.ndarray, dk: int) -> np.ndarray:
    g = np.empty_like(theta)
    g[:dk] = 2.0 * mu2 * theta[:dk]
    g[dk:] = 2.0 * mu1 * theta[dk:]
    return g


def bregman_divergence(omega0_params: tuple[float, float], theta, anchor) -> float:
    """Divergence of the quadratic regularizer between two stacked vectors.

    Computed from the definition Omega0(t) - Omega0(a) - <grad Omega0(a), t-a>;
    for this regularizer it equals mu2*||dL||_F^2 + mu1*||dS||_F^2.
    """
    mu1, mu2 = omega0_params
    tv = theta.vec if hasattr(theta, "vec") else np.asarray(theta, dtype=float)
    av = anchor.vec if hasattr(anchor, "vec") else np.asarray(anchor, dtype=float)
    if tv.shape != av.shape:
        raise ContractViolation("theta and anchor dimensions differ")
    if hasattr(theta, "dk"):
        dk = theta.dk
    elif hasattr(anchor, "dk"):
        dk = anchor.dk
    else:
        dk = tv.size  # pure-L interpretation when no split is known
    return (omega0_value(mu1, mu2, tv, dk) - omega0_value(mu1, mu2, av, dk)
            - float(omega0_grad(mu1, mu2, av, dk) @ (tv - av)))


def check_feasible(theta, constraints: dict[int, SafetyConstraint],
                   p: float, q: float, tol: float = 1e-6) -> FeasibilityReport:
    """Report per-task inequality violations and the spectral-box margins."""
    L, S = theta.to_LS()
    gram = L.T @ L
    eigs = np.linalg.eigvalsh(gram)
    report = {}
    for t, con in constraints.items():
        alpha = L @ S[:, t]
        report[int(t)] = float(np.max(con.A @ alpha - con.b))
    return FeasibilityReport(
        task_violation=report,
        lambda_min=float(eigs[0] - p),
        lambda_max=float(q - eigs[-1]),
        tol=tol,
    )


# --- spectral box -----------------------------------------------------------

def project_spectral(L: np.ndarray, p: float, q: float) -> np.ndarray:
    """Frobenius projection of L onto {sqrt(p) <= singular values <= sqrt(q)}."""
    if L.shape[1] == 1:
        nrm = float(np.linalg.norm(L))
        if nrm <= 1e-300:
            out = np.zeros_like(L)
            out[0, 0] = np.sqrt(p)
            return out
        return L * (min(max(nrm, np.sqrt(p)), np.sqrt(q)) / nrm)
    u, s, vt = np.linalg.svd(L, full_matrices=False)
    s = np.clip(s, np.sqrt(p), np.sqrt(q))
    return (u * s) @ vt


# --- per-task cone program core ---------------------------------------------

def _socp_admm(B: np.ndarray, b: np.ndarray, c_max: float, s_ref: np.ndarray,
               c_init: np.ndarray | None = None, max_iter: int = 50000,
               tol: float = 1e-11):
    """min 0.5*||s - s_ref||^2  s.t.  B s + c = b, c >= 0, ||c|| <= c_max.

    Returns (s, c, nu) where nu is the equality multiplier. Raises
    InfeasibleConstraint(None) when the constraint set is empty.
    """
    d, k = B.shape
    rho = 1.0
    c = slack_ball_project(c_init if c_init is not None else b, c_max)
    u = np.zeros(d)
    s = s_ref.copy()
    gram = B.T @ B
    eye = np.eye(k)
    chol = np.linalg.cholesky(eye + rho * gram)
    for it in range(max_iter):
        rhs = s_ref + rho * (B.T @ (b - c - u))
        s = np.linalg.solve(chol.T, np.linalg.solve(chol, rhs))
        c_old = c
        c = slack_ball_project(b - B @ s - u, c_max)
        r = B @ s + c - b
        u = u + r
        r_dual = rho * np.linalg.norm(B.T @ (c - c_old))
        r_primal = np.linalg.norm(r)
        if r_primal <= tol and r_dual <= tol:
            return s, c, rho * u
        if it % 100 == 99:
            if r_primal > 10.0 * max(r_dual, tol):
                rho *= 2.0
                u /= 2.0
                chol = np.linalg.cholesky(eye + rho * gram)
            elif r_dual > 10.0 * max(r_primal, tol):
                rho /= 2.0
                u *= 2.0
                chol = np.linalg.cholesky(eye + rho * gram)
    # distinguish slow convergence from infeasibility
    if _min_equality_gap(B, b, c_max) > 1e-8:
        raise InfeasibleConstraint(None)
    if np.linalg.norm(B @ s + c - b) > 1e-8:
        raise NumericalFailure("slack cone program failed to converge")
    return s, c, rho * u


def _min_equality_gap(B: np.ndarray, b: np.ndarray, c_max: float,
                      iters: int = 2000) -> float:
    """min over (s, c in ball-cone) of ||B s + c - b|| by alternating projection."""
    d, k = B.shape
    c = slack_ball_project(b, c_max)
    s = np.zeros(k)
    pinvB = np.linalg.pinv(B)
    for _ in range(iters):
        s = pinvB @ (b - c)
        c = slack_ball_project(b - B @ s, c_max)
    return float(np.linalg.norm(B @ s + c - b))


def socp_kkt_residuals(B, b, c_max, s_ref, s, c, nu) -> dict[str, float]:
    """Primal/stationarity/cone-optimality residuals of the per-task program."""
    prim = float(np.linalg.norm(B @ s + c - b))
    stat = float(np.linalg.norm(s - s_ref + B.T @ nu))
    cone = float(np.linalg.norm(c - slack_ball_project(c - nu, c_max)))
    return {"primal": prim, "stationarity": stat, "cone": cone}


def solve_socp_S(L: np.ndarray, constraints: dict[int, SafetyConstraint],
                 mu1: float, c_max: float, S_tilde: np.ndarray,
                 interior_init: bool = True):
    """Published per-task cone program: for each constrained task minimize
    mu1*||s_t||^2 + 2*mu1*<s~_t, s_t> subject to A_t L s_t = b_t - c_t,
    c_t >= 0, ||c_t|| <= c_max.

    The objective equals mu1*||s_t + s~_t||^2 up to a constant, so the target
    point is -s~_t. Tasks without constraints keep their S_tilde column.
    Degenerate rows (A_t L = 0) return the unconstrained minimum with the
    slack clipped into the ball.
    """
    S = np.array(S_tilde, dtype=float, copy=True)
    slacks: dict[int, np.ndarray] = {}
    d = L.shape[0]
    for t in sorted(constraints):
        con = constraints[t]
        B = con.A @ L
        target = -S_tilde[:, t]
        c0 = np.minimum(np.maximum(con.b, 0.0), c_max / np.sqrt(d)) / 2.0 \
            if interior_init else None
        if np.linalg.norm(B) <= 1e-12 * max(1.0, np.linalg.norm(con.A) * np.linalg.norm(L)):
            S[:, t] = target
            slacks[t] = slack_ball_project(con.b, c_max)
            continue
        try:
            s, c, _ = _socp_admm(B, con.b, c_max, target, c_init=c0)
        except InfeasibleConstraint:
            raise InfeasibleConstraint(t) from None
        S[:, t] = s
        slacks[t] = c
    return S, SlackVars(c=slacks, c_max=c_max)


# --- semidefinite subproblem for the basis ----------------------------------

def sdp_objective(X: np.ndarray, mu2: float, L_tilde: np.ndarray) -> float:
    """Published objective mu2*tr(X) + 2*mu2*||L~||_F*sqrt(tr(X))."""
    tr = float(np.trace(X))
    return mu2 * tr + 2.0 * mu2 * float(np.linalg.norm(L_tilde)) * np.sqrt(max(tr, 0.0))


def _sym_basis(k: int) -> list[np.ndarray]:
    basis = []
    for i in range(k):
        E = np.zeros((k, k))
        E[i, i] = 1.0
        basis.append(E)
    for i in range(k):
        for j in range(i + 1, k):
            E = np.zeros((k, k))
            E[i, j] = E[j, i] = 1.0
            basis.append(E)
    return basis


def _min_trace_box_sdp(svecs: list[np.ndarray], targets: list[float],
                       p: float, q: float, k: int) -> np.ndarray:
    """min tr(X) s.t. s_i^T X s_i = e_i, p*I <= X <= q*I.

    Damped-Newton log-barrier on the box with augmented-Lagrangian equalities.
    """
    basis = _sym_basis(k)
    nb = len(basis)
    X = 0.5 * (p + q) * np.eye(k)
    lam = np.zeros(len(svecs))
    rho = 10.0
    Ss = [np.outer(s, s) for s in svecs]
    e = np.asarray(targets, dtype=float)

    def cvals(Xm):
        return np.array([float(s @ Xm @ s) - ei for s, ei in zip(svecs, e)])

    def fval(Xm, tau):
        ev_lo = np.linalg.eigvalsh(Xm - p * np.eye(k))
        ev_hi = np.linalg.eigvalsh(q * np.eye(k) - Xm)
        if ev_lo.min() <= 0 or ev_hi.min() <= 0:
            return np.inf
        c = cvals(Xm)
        return (float(np.trace(Xm)) + float(lam @ c) + 0.5 * rho * float(c @ c)
                - tau * (np.log(ev_lo).sum() + np.log(ev_hi).sum()))

    tau = 0.1 * max(1.0, q)
    prev_cnorm = np.inf
    for _outer in range(200):
        for _newton in range(80):
            P = np.linalg.inv(X - p * np.eye(k))
            Q = np.linalg.inv(q * np.eye(k) - X)
            c = cvals(X)
            G = np.eye(k) - tau * (P - Q)
            for Sm, li, ci in zip(Ss, lam, c):
                G = G + (li + rho * ci) * Sm
            g = np.array([np.sum(G * E) for E in basis])
            H = np.empty((nb, nb))
            for j, Ej in enumerate(basis):
                HE = tau * (P @ Ej @ P + Q @ Ej @ Q)
                for Sm, s in zip(Ss, svecs):
                    HE = HE + rho * float(s @ Ej @ s) * Sm
                H[:, j] = [np.sum(Ei * HE) for Ei in basis]
            H = 0.5 * (H + H.T) + 1e-12 * np.eye(nb)
            try:
                delta = np.linalg.solve(H, -g)
            except np.linalg.LinAlgError:
                delta = -g
            if np.linalg.norm(g) <= max(1e-13, 1e-8 * tau):
                break
            D = sum(di * Ei for di, Ei in zip(delta, basis))
            f0 = fval(X, tau)
            slope = float(g @ delta)
            step = 1.0
            accepted = False
            while step > 1e-14:
                fn = fval(X + step * D, tau)
                if np.isfinite(fn) and fn <= f0 + 1e-4 * step * slope:
                    accepted = True
                    break
                step *= 0.5
            if not accepted:
                break
            X = X + step * D
        cn = float(np.max(np.abs(cvals(X)))) if len(svecs) else 0.0
        lam = lam + rho * cvals(X)
        if cn > 0.25 * prev_cnorm and cn > 1e-11:
            rho = min(rho * 5.0, 1e10)
        prev_cnorm = cn
        if tau < 1e-11 and cn < 1e-9:
            break
        tau = max(tau * 0.2, 1e-12)
    if len(svecs) and float(np.max(np.abs(cvals(X)))) > 1e-7:
        raise InfeasibleConstraint(None, "spectral-box equalities unsatisfiable")
    return 0.5 * (X + X.T)


def solve_sdp_L(S_fixed: np.ndarray, slacks: SlackVars,
                constraints: dict[int, SafetyConstraint],
                p: float, q: float, mu2: float, L_tilde: np.ndarray) -> SpectralBox:
    """Published relaxation for the basis: min mu2*tr(X) + 2*mu2*||L~||_F*sqrt(tr X)
    over p*I <= X <= q*I with norm-matching equalities s_t^T X s_t = a_t^T a_t,
    a_t = A_t^+ (b_t - c_t).

    The objective is strictly increasing in tr(X), so the solve reduces to
    trace minimization over the feasible set.
    """
    if p > q:
        raise ContractViolation("spectral box requires p <= q")
    k = S_fixed.shape[0]
    svecs, targets = [], []
    for t in sorted(slacks.c):
        con = constraints[t]
        s_t = S_fixed[:, t]
        a_t = con.pinv @ (con.b - slacks.c[t])
        e_t = float(a_t @ a_t)
        if np.linalg.norm(s_t) <= 1e-12:
            if e_t > 1e-10:
                raise InfeasibleConstraint(t, "zero coefficients cannot match norm")
            continue
        ns2 = float(s_t @ s_t)
        if e_t < p * ns2 - 1e-9 or e_t > q * ns2 + 1e-9:
            raise InfeasibleConstraint(
                t, f"required quadratic value {e_t:.6g} outside [{p * ns2:.6g}, {q * ns2:.6g}]")
        svecs.append(s_t.astype(float))
        targets.append(e_t)
    if not svecs:
        return SpectralBox(X=p * np.eye(k), p=p, q=q)
    if k == 1:
        vals = [e / (s[0] ** 2) for s, e in zip(svecs, targets)]
        x = vals[0]
        if max(vals) - min(vals) > 1e-8:
            raise InfeasibleConstraint(None, "conflicting scalar equalities")
        return SpectralBox(X=np.array([[x]]), p=p, q=q)
    X = _min_trace_box_sdp(svecs, targets, p, q, k)
    return SpectralBox(X=X, p=p, q=q)


def recover_L_from_X(box: SpectralBox, L_prev: np.ndarray) -> np.ndarray:
    """Factor X back to a basis: L = Q * X^{1/2}, Q the polar factor of L_prev.

    Among all factors with L^T L = X this minimizes ||L - L_prev||_F over the
    rotation ambiguity.
    """
    X = box.X
    w, V = np.linalg.eigh(X)
    if w.min() < -1e-8:
        raise ContractViolation("X is not PSD within tolerance")
    w = np.maximum(w, 0.0)
    root = (V * np.sqrt(w)) @ V.T
    u, _, vt = np.linalg.svd(L_prev, full_matrices=False)
    Q = u @ vt
    return Q @ root


# --- basis step of the projection -------------------------------------------

def _lstep(L_ref: np.ndarray, eqs: list[tuple[np.ndarray, np.ndarray, np.ndarray]],
           p: float, q: float, L_warm: np.ndarray | None = None,
           max_iter: int = 4000, tol: float = 1e-10) -> np.ndarray:
    """min ||L - L_ref||_F^2 s.t. A_t L s_t = d_t for active tasks and
    the singular values of L inside [sqrt(p), sqrt(q)].

    ADMM between the equality-constrained quadratic (exact KKT solve) and the
    spectral set (exact SVD clip). Zero rows of A_t with |d_i| ~ 0 are dropped;
    a zero row with d_i != 0 is infeasible.
    """
    d, k = L_ref.shape
    rows = []
    rhs = []
    for A, s, dvec in eqs:
        for i in range(A.shape[0]):
            a = A[i]
            if np.linalg.norm(a) <= 1e-14:
                if abs(dvec[i]) > 1e-10:
                    raise InfeasibleConstraint(None, "zero constraint row with nonzero target")
                continue
            rows.append(np.kron(s, a))  # column-major vec(L)
            rhs.append(dvec[i])
    if not rows:
        return project_spectral(L_ref, p, q)
    E = np.asarray(rows)
    dvec = np.asarray(rhs)
    # consistency of the linear system itself
    sol, residuals, rankE, _ = np.linalg.lstsq(E, dvec, rcond=None)
    if np.linalg.norm(E @ sol - dvec) > 1e-8 * max(1.0, np.linalg.norm(dvec)):
        raise InfeasibleConstraint(None, "inconsistent equality constraints on the basis")

    # The spectral set's lower bound is nonconvex; ADMM needs a penalty large
    # relative to the set's curvature or it limit-cycles, so start at 10 and
    # escalate whenever the primal residual stalls.
    rho = 10.0
    Z = L_warm.copy() if L_warm is not None else project_spectral(L_ref, p, q)
    U = np.zeros_like(Z)
    vec_ref = L_ref.ravel(order="F")
    EET_pinv = np.linalg.pinv(E @ E.T, rcond=1e-13)

    def solve_L(zu_vec):
        # KKT of min ||x - r||^2 + (rho/2)||x - zu||^2 s.t. E x = dvec
        g = (2.0 * vec_ref + rho * zu_vec) / (2.0 + rho)
        mu = EET_pinv @ (E @ g - dvec)
        return g - E.T @ mu

    L = Z.copy()
    best_primal = np.inf
    stall = 0
    for it in range(max_iter):
        vec_zu = (Z - U).ravel(order="F")
        vecL = solve_L(vec_zu)
        L = vecL.reshape((d, k), order="F")
        Z_old = Z
        Z = project_spectral(L + U, p, q)
        U = U + L - Z
        scale = max(1.0, np.linalg.norm(Z))
        r_primal = np.linalg.norm(L - Z)
        z_change = np.linalg.norm(Z - Z_old)
        if r_primal <= tol * scale and z_change <= tol * scale:
            break
        if r_primal < 0.8 * best_primal:
            best_primal = r_primal
            stall = 0
        else:
            stall += 1
        if stall >= 80:
            # plateau at solver noise: accept, the closing coefficient step
            # re-solves the equalities at the returned basis
            if r_primal <= 1e-8 * scale and z_change <= 1e-8 * scale:
                break
            if rho < 1e9:
                rho *= 8.0
                U /= 8.0
            best_primal = np.inf
            stall = 0
    if np.linalg.norm(L - Z) > 1e-7 * max(1.0, np.linalg.norm(Z)):
        raise InfeasibleConstraint(
            None, "equalities incompatible with the spectral box")
    return Z


# --- full projection ---------------------------------------------------------

def _assemble_theta(theta_like, L, S):
    from .lifelong import ThetaVector  # local import to avoid a cycle

    return ThetaVector.from_LS(L, S, flag="constrained")


def _collar_feasible(L, S, constraints, p, q, c_max, tol=1e-9):
    eigs = np.linalg.eigvalsh(L.T @ L)
    if eigs[0] < p - tol or eigs[-1] > q + tol:
        return None
    slacks = {}
    for t, con in constraints.items():
        c = con.b - con.A @ (L @ S[:, t])
        if c.min(initial=0.0) < -tol or np.linalg.norm(c) > c_max + tol:
            return None
        slacks[t] = np.maximum(c, 0.0)
    return slacks


def project_constrained(theta_tilde, constraints: dict[int, SafetyConstraint],
                        mu1: float, mu2: float, p: float, q: float, c_max: float,
                        anchor_prev=None, max_alternations: int = 60,
                        effort: str = "thorough"):
    """Bregman projection of an unconstrained point onto the safety set.

    Each start runs the block alternation (basis step first, then the
    decoupled per-task cone programs), a soft-coupling augmented-Lagrangian
    refinement that lets the basis and coefficients rotate jointly, and a
    final hard alternation that restores exact per-task feasibility. The best
    start by divergence wins; starts are the point itself, its negation (the
    spectral set is a double cone, so the opposite basin can hold the
    optimum), and the previous round's solution.

    Projecting an already-feasible point (slack inside the ball) returns it
    unchanged. effort="fast" trims the refinement budget for use inside the
    round loop. Raises InfeasibleConstraint naming the unsatisfiable task.
    """
    L_tilde, S_tilde = theta_tilde.to_LS()

    fast = _collar_feasible(L_tilde, S_tilde, constraints, p, q, c_max)
    if fast is not None:
        theta = _assemble_theta(theta_tilde, L_tilde.copy(), S_tilde.copy())
        return theta, SlackVars(c=fast, c_max=c_max)

    starts = [(L_tilde, S_tilde)]
    if anchor_prev is not None:
        starts.append(anchor_prev.to_LS())
    starts.append((-L_tilde, -S_tilde))
    anchored = _anchored_start(L_tilde, S_tilde, constraints, p, q, c_max)
    if anchored is not None:
        starts.append(anchored)
    if effort == "fast":
        refine_budget = (8, 15)
        if anchor_prev is not None:
            starts = starts[:2]
    else:
        refine_budget = (40, 40)

    best = None
    last_err: InfeasibleConstraint | None = None
    for L0, S0 in starts:
        try:
            L, S, slacks, obj = _project_from(L0, S0, L_tilde, S_tilde, constraints,
                                              mu1, mu2, p, q, c_max, max_alternations)
            Lr, Sr = _joint_refine(L, S, L_tilde, S_tilde, constraints, mu1, mu2,
                                   p, q, c_max, outer=refine_budget[0],
                                   inner=refine_budget[1])
            L, S, slacks, obj = _project_from(Lr, Sr, L_tilde, S_tilde, constraints,
                                              mu1, mu2, p, q, c_max, max_alternations)
        except InfeasibleConstraint as err:
            last_err = err
            continue
        if best is None or obj < best[3] - 1e-12:
            best = (L, S, slacks, obj)
    if best is None:
        raise last_err if last_err is not None else InfeasibleConstraint(None)
    L, S, slacks, _ = best
    theta = _assemble_theta(theta_tilde, L, S)
    return theta, SlackVars(c=slacks, c_max=c_max)


def _anchored_start(L_tilde, S_tilde, constraints, p, q, c_max):
    """Start whose basis spans the tasks' pseudo-inverse anchor points
    alpha_t = A_t^+ (b_t - c_interior); covers basins the point's own
    direction misses."""
    d, k = L_tilde.shape
    anchors = []
    for t in sorted(constraints):
        con = constraints[t]
        c_int = np.minimum(np.maximum(con.b, 0.0), c_max / np.sqrt(d)) / 2.0
        a = con.pinv @ (con.b - c_int)
        if np.linalg.norm(a) > 1e-12:
            anchors.append(a)
    if not anchors:
        return None
    stacked = np.concatenate([np.stack(anchors, axis=1), L_tilde], axis=1)
    qmat, _ = np.linalg.qr(stacked)
    if qmat.shape[1] < k:
        return None
    L0 = qmat[:, :k] * np.sqrt(0.5 * (p + q))
    S0 = np.zeros_like(S_tilde)
    for t in sorted(constraints):
        con = constraints[t]
        c_int = np.minimum(np.maximum(con.b, 0.0), c_max / np.sqrt(d)) / 2.0
        a = con.pinv @ (con.b - c_int)
        S0[:, t] = np.linalg.lstsq(L0, a, rcond=None)[0]
    return L0, S0


def _joint_refine(L, S, L_tilde, S_tilde, constraints, mu1, mu2, p, q, c_max,
                  outer: int = 40, inner: int = 40):
    """Soft-equality descent: cyclic exact block steps on the augmented
    Lagrangian of the divergence, letting basis and coefficients move
    together. Returns an approximately feasible point for the hard polish."""
    d, k = L.shape
    lam = {t: np.zeros(d) for t in constraints}
    rho = 5.0
    L = L.copy()
    S = S.copy()
    slacks = {t: slack_ball_project(con.b - con.A @ (L @ S[:, t]), c_max)
              for t, con in constraints.items()}
    prev_obj = np.inf
    for _ in range(outer):
        for _ in range(inner):
            for t, con in constraints.items():
                slacks[t] = slack_ball_project(
                    con.b - con.A @ (L @ S[:, t]) - lam[t] / rho, c_max)
            for t, con in constraints.items():
                B = con.A @ L
                rhs = con.b - slacks[t] - lam[t] / rho
                M = 2.0 * mu1 * np.eye(k) + rho * B.T @ B
                S[:, t] = np.linalg.solve(M, 2.0 * mu1 * S_tilde[:, t] + rho * B.T @ rhs)
            Z = 2.0 * mu2 * np.eye(d * k)
            v = 2.0 * mu2 * L_tilde.ravel(order="F")
            for t, con in constraints.items():
                E_t = np.kron(S[:, t][None, :], con.A)
                rhs = con.b - slacks[t] - lam[t] / rho
                Z += rho * E_t.T @ E_t
                v += rho * E_t.T @ rhs
            vecL = np.linalg.solve(Z, v)
            L = project_spectral(vecL.reshape((d, k), order="F"), p, q)
        maxres = 0.0
        for t, con in constraints.items():
            r = con.A @ (L @ S[:, t]) + slacks[t] - con.b
            lam[t] += rho * r
            maxres = max(maxres, float(np.linalg.norm(r)))
        obj = (mu2 * float(np.sum((L - L_tilde) ** 2))
               + mu1 * float(np.sum((S - S_tilde) ** 2)))
        if maxres < 1e-10 and abs(prev_obj - obj) < 1e-11 * max(1.0, abs(obj)):
            break
        prev_obj = obj
        rho = min(rho * 1.6, 1e7)
    return L, S


def _project_from(L0, S0, L_tilde, S_tilde, constraints, mu1, mu2, p, q, c_max,
                  max_alternations):
    d, k = L_tilde.shape
    L = project_spectral(np.array(L0, dtype=float), p, q)
    S = np.array(S0, dtype=float)
    slacks = {t: np.minimum(np.maximum(con.b, 0.0), c_max / np.sqrt(d)) / 2.0
              for t, con in constraints.items()}

    def sc_step():
        for t in sorted(constraints):
            con = constraints[t]
            B = con.A @ L
            if np.linalg.norm(B) <= 1e-12 * max(1.0, np.linalg.norm(con.A) * np.linalg.norm(L)):
                S[:, t] = S_tilde[:, t]
                slacks[t] = slack_ball_project(con.b, c_max)
                continue
            try:
                s, c, _ = _socp_admm(B, con.b, c_max, S_tilde[:, t], c_init=slacks[t])
            except InfeasibleConstraint:
                raise InfeasibleConstraint(t) from None
            S[:, t] = s
            slacks[t] = c

    # bootstrap: make (S, C) consistent with the clipped basis so every later
    # L-step's equality set contains the current point
    sc_step()
    obj = np.inf
    prev_obj = np.inf
    for _ in range(max_alternations):
        eqs = []
        for t, con in constraints.items():
            if np.linalg.norm(S[:, t]) > 1e-12:
                eqs.append((con.A, S[:, t], con.b - slacks[t]))
        L = _lstep(L_tilde, eqs, p, q, L_warm=L)
        sc_step()
        obj = (mu2 * float(np.sum((L - L_tilde) ** 2))
               + mu1 * float(np.sum((S - S_tilde) ** 2)))
        if abs(prev_obj - obj) <= 1e-10 * max(1.0, abs(obj)):
            break
        prev_obj = obj
    return L, S, slacks, obj
