"""Regret accounting against a hindsight comparator and numeric bound constants."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation
from .lifelong import (KnowledgeBase, RoundHistory, ThetaVector,
                       alternating_optimize, init_knowledge)
from .policy import FeatureMap, stats_loss
from .projection import SafetyConstraint, check_feasible, project_constrained


@dataclass
class RegretRecord:
    round: int
    task_id: int
    realized: float
    cum_realized: float
    comparator: float
    cum_regret: float


@dataclass
class BoundConstants:
    """Per-round constants of the linearized-loss norm bound."""

    gamma1: float
    gamma2: float
    gamma3: float
    gamma5: float
    delta_l: float
    ingredients: dict = field(default_factory=dict)

    def fhat_bound(self) -> float:
        return self.gamma1 * (1.0 + self.gamma2) + self.delta_l


def empirical_regret(realized: list[float], comparator: ThetaVector,
                     history: RoundHistory, constraints: dict[int, SafetyConstraint],
                     p: float, q: float, fmap: FeatureMap) -> list[RegretRecord]:
    """Per-round records of realized loss minus the comparator's loss.

    The comparator must pass the feasibility check on the observed tasks.
    """
    if len(realized) != len(history):
        raise ContractViolation("one realized loss per round required")
    observed = {t: constraints[t] for t in history.index_set() if t in constraints}
    report = check_feasible(comparator, observed, p, q)
    if not report.feasible:
        raise ContractViolation(
            f"comparator infeasible (tasks {report.violating_tasks}, "
            f"spectral margins {report.lambda_min:.3g}/{report.lambda_max:.3g})")
    Lc, Sc = comparator.to_LS()
    records = []
    cum_real = 0.0
    cum_comp = 0.0
    for j, (rec, rl) in enumerate(zip(history, realized), start=1):
        alpha = Lc @ Sc[:, rec.task_id]
        comp = stats_loss(rec.stats(fmap, weighted=False), alpha, rec.sigma)
        cum_real += rl
        cum_comp += comp
        records.append(RegretRecord(
            round=j, task_id=rec.task_id, realized=float(rl),
            cum_realized=cum_real, comparator=float(comp),
            cum_regret=cum_real - cum_comp))
    return records


@dataclass
class ComparatorResult:
    theta: ThetaVector
    total_loss: float
    converged: bool


def hindsight_comparator(history: RoundHistory, constraints: dict[int, SafetyConstraint],
                         mu1: float, mu2: float, p: float, q: float, c_max: float,
                         d: int, k: int, num_tasks: int, zeta: float,
                         fmap: FeatureMap, inner_iters: int = 25,
                         max_outer: int = 20, rel_tol: float = 1e-6) -> ComparatorResult:
    """Approximate best fixed feasible point in hindsight.

    Alternating optimization over the whole history followed by the
    constrained projection, iterated until the projected (unweighted) total
    loss stops improving. The result upper-bounds the infimum, so regret
    computed against it lower-bounds the true regret.
    """
    if len(history) == 0:
        raise ContractViolation("comparator needs a nonempty history")
    observed = {t: constraints[t] for t in history.index_set() if t in constraints}
    kb = init_knowledge(d, k, zeta, p, q, num_tasks, mu1=mu1, mu2=mu2)

    def total_loss(theta: ThetaVector) -> float:
        L, S = theta.to_LS()
        total = 0.0
        for rec in history:
            total += stats_loss(rec.stats(fmap, weighted=False),
                                L @ S[:, rec.task_id], rec.sigma)
        return total

    best: tuple[float, ThetaVector] | None = None
    converged = False
    anchor = None
    for _ in range(max_outer):
        kb = alternating_optimize(kb, history, inner_iters, "closed_form", fmap)
        theta_hat, _slacks = project_constrained(
            kb.theta(), observed, mu1, mu2, p, q, c_max, anchor_prev=anchor)
        loss = total_loss(theta_hat)
        if best is not None and (best[0] - loss) <= rel_tol * max(1.0, abs(best[0])):
            if loss < best[0]:
                best = (loss, theta_hat)
            converged = True
            break
        if best is None or loss < best[0]:
            best = (loss, theta_hat)
        anchor = theta_hat
        kb = kb.with_theta(theta_hat)
    assert best is not None
    return ComparatorResult(theta=best[1], total_loss=best[0], converged=converged)


def bound_constants(round_index: int, history: RoundHistory,
                    constraints: dict[int, SafetyConstraint], p: float, q: float,
                    c_max: float, u_max: float, phi_max: float, d: int,
                    delta_l: float) -> BoundConstants:
    """Numeric evaluation of the printed per-round constants.

    The max terms run over tasks observed strictly before `round_index`
    (1-based); n and sigma come from the current round's record.
    """
    if not (1 <= round_index <= len(history)):
        raise ContractViolation("round_index out of range")
    current = history.records[round_index - 1]
    prior_ids = sorted({r.task_id for r in history.records[: round_index - 1]})
    max_plus = 0.0      # ||A+|| (||b|| + c_max)
    max_dag_sq = 0.0    # ||A+||^2 (||b||^2 + c_max^2)
    max_dag_sq2 = 0.0   # ||A+||^2 (||b|| + c_max)^2
    for t in prior_ids:
        con = constraints[t]
        max_plus = max(max_plus, con.pinv_norm * (con.b_norm + c_max))
        max_dag_sq = max(max_dag_sq, con.pinv_norm ** 2 * (con.b_norm ** 2 + c_max ** 2))
        max_dag_sq2 = max(max_dag_sq2, con.pinv_norm ** 2 * (con.b_norm + c_max) ** 2)
    n_cur = current.n
    sig2 = current.sigma ** 2
    gamma1 = (1.0 / (n_cur * sig2)) * ((u_max + max_plus * phi_max) * phi_max) * (
        (d / p) * math.sqrt(2.0 * q) * math.sqrt(max_dag_sq) + math.sqrt(q * d))
    n_prior = float(len(prior_ids))
    gamma2 = math.sqrt(q * d) + math.sqrt(n_prior) * math.sqrt(
        1.0 + max_dag_sq2 / (p * p))
    gamma3 = 4.0 * gamma1 ** 2 + 2.0 * delta_l ** 2
    gamma5 = 8.0 * (d / (p * p)) * q * gamma1 ** 2 * max_dag_sq2
    return BoundConstants(
        gamma1=gamma1, gamma2=gamma2, gamma3=gamma3, gamma5=gamma5,
        delta_l=delta_l,
        ingredients={
            "u_max": u_max, "phi_max": phi_max, "p": p, "q": q, "d": d,
            "c_max": c_max, "n": n_cur, "sigma": current.sigma,
            "n_prior_tasks": len(prior_ids),
            "max_pinv_b_plus_cmax": max_plus,
            "max_pinv_sq_b_sq": max_dag_sq,
            "max_pinv_sq_b_plus_cmax_sq": max_dag_sq2,
        })


@dataclass
class SublinearReport:
    verdict: str
    exponent: float
    ratios: list[float]
    clamped: bool
    ratio_ok: bool
    decreasing_ok: bool


def check_sublinear(regret_curve: list[tuple[int, float]],
                    tolerance_factor: float) -> SublinearReport:
    """PASS iff regret(R)/sqrt(R) stays within tolerance_factor across the
    sweep and regret(R)/R strictly decreases; also fits the log-log exponent.

    Negative regrets (approximate comparator) are clamped to zero for the
    ratio test and flagged.
    """
    if len(regret_curve) < 3:
        raise ContractViolation("need at least 3 sweep points")
    Rs = [int(r) for r, _ in regret_curve]
    if any(b <= a for a, b in zip(Rs, Rs[1:])):
        raise ContractViolation("sweep points must have strictly increasing R")
    raw = [float(v) for _, v in regret_curve]
    clamped = [max(v, 0.0) for v in raw]
    was_clamped = any(v < 0.0 for v in raw)
    ratios = [v / math.sqrt(r) for r, v in zip(Rs, clamped)]
    if max(ratios) <= 0.0:
        ratio_ok = True
    elif min(ratios) <= 0.0:
        ratio_ok = False
    else:
        ratio_ok = max(ratios) <= tolerance_factor * min(ratios)
    per_round = [v / r for r, v in zip(Rs, raw)]
    decreasing_ok = all(b < a for a, b in zip(per_round, per_round[1:]))
    pos = [(math.log(r), math.log(v)) for r, v in zip(Rs, raw) if v > 0.0]
    if len(pos) >= 2:
        xs = np.array([x for x, _ in pos])
        ys = np.array([y for _, y in pos])
        exponent = float(np.polyfit(xs, ys, 1)[0])
    else:
        exponent = float("nan")
    verdict = "PASS" if (ratio_ok and decreasing_ok) else "FAIL"
    return SublinearReport(verdict=verdict, exponent=exponent, ratios=ratios,
                           clamped=was_clamped, ratio_ok=ratio_ok,
                           decreasing_ok=decreasing_ok)
