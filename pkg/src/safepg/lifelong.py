"""Shared knowledge base over consecutive tasks and its per-round updates.

Task policy parameters factor as alpha_t = L s_t through a shared basis
L (d x k) with per-task coefficients s_t. Each round solves the accumulated
regularized objective

    sum_j eta_j * loss_j(L s_{t_j}) + mu1 ||S||_F^2 + mu2 ||L||_F^2

by alternating exact closed-form block solves (the objective is separably
convex), or by plain/natural gradient steps with decaying rates. The
current-round loss can also be linearized around an anchor for the
projection and regret machinery.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .errors import ContractViolation, ConfigError, InvariantViolation, NumericalFailure
from .policy import BatchStats, FeatureMap, batch_stats, stats_grad, stats_loss

INNER_RATE_C = 0.9  # decaying inner learning rate c * j^-1, 0 < c < 1


@dataclass
class KnowledgeBase:
    L: np.ndarray  # (d, k)
    S: np.ndarray  # (k, num_tasks); unobserved columns exactly zero
    mu1: float
    mu2: float
    p: float
    q: float

    def __post_init__(self):
        self.L = np.asarray(self.L, dtype=float)
        self.S = np.asarray(self.S, dtype=float)
        if self.L.ndim != 2 or self.S.ndim != 2 or self.L.shape[1] != self.S.shape[0]:
            raise ContractViolation("L (d x k) and S (k x T) shapes inconsistent")
        if self.mu1 <= 0.0 or self.mu2 <= 0.0:
            raise ContractViolation("regularizers mu1, mu2 must be positive")
        if self.p <= 0.0 or self.q < self.p:
            raise ContractViolation("spectral bounds need 0 < p <= q")

    @property
    def d(self) -> int:
        return self.L.shape[0]

    @property
    def k(self) -> int:
        return self.L.shape[1]

    @property
    def num_tasks(self) -> int:
        return self.S.shape[1]

    def alpha(self, task_id: int) -> np.ndarray:
        return self.L @ self.S[:, task_id]

    def theta(self, flag: str = "unconstrained") -> "ThetaVector":
        return ThetaVector.from_LS(self.L, self.S, flag=flag)

    def with_theta(self, theta: "ThetaVector") -> "KnowledgeBase":
        L, S = theta.to_LS()
        return replace(self, L=L, S=S)


def init_knowledge(d: int, k: int, zeta: float, p: float, q: float,
                   num_tasks: int, mu1: float = 1.0, mu2: float = 1.0) -> KnowledgeBase:
    """Diagonal start: zeta on the k leading diagonal entries of L, S = 0."""
    if not (d >= k >= 1):
        raise ContractViolation("need d >= k >= 1")
    if not (p <= zeta * zeta <= q):
        raise ConfigError(f"zeta^2 = {zeta * zeta:.6g} outside [p, q] = [{p}, {q}]")
    L = np.zeros((d, k))
    L[np.arange(k), np.arange(k)] = zeta
    return KnowledgeBase(L=L, S=np.zeros((k, num_tasks)), mu1=mu1, mu2=mu2, p=p, q=q)


@dataclass
class ThetaVector:
    """Flat [vec(L); vec(S)] decision point (column-major vec)."""

    vec: np.ndarray
    d: int
    k: int
    num_tasks: int
    flag: str = "unconstrained"

    def __post_init__(self):
        self.vec = np.asarray(self.vec, dtype=float)
        if self.vec.shape != (self.d * self.k + self.k * self.num_tasks,):
            raise ContractViolation("theta length does not match (d, k, num_tasks)")
        if self.flag not in ("unconstrained", "constrained"):
            raise ContractViolation("flag must be unconstrained|constrained")

    @property
    def dk(self) -> int:
        return self.d * self.k

    @classmethod
    def from_LS(cls, L: np.ndarray, S: np.ndarray, flag: str = "unconstrained"):
        L = np.asarray(L, dtype=float)
        S = np.asarray(S, dtype=float)
        vec = np.concatenate([L.ravel(order="F"), S.ravel(order="F")])
        return cls(vec=vec, d=L.shape[0], k=L.shape[1], num_tasks=S.shape[1], flag=flag)

    def to_LS(self) -> tuple[np.ndarray, np.ndarray]:
        L = self.vec[: self.dk].reshape((self.d, self.k), order="F")
        S = self.vec[self.dk:].reshape((self.k, self.num_tasks), order="F")
        return L.copy(), S.copy()


@dataclass
class RoundRecord:
    """One observed round: a task, its trajectory batch, and its weight."""

    task_id: int
    trajectories: list
    eta: float
    sigma: float
    weights: np.ndarray | None = None
    _stats: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.eta <= 0.0:
            raise ContractViolation("eta must be positive")
        if self.sigma <= 0.0:
            raise ContractViolation("sigma must be positive")
        if len(self.trajectories) == 0:
            raise ContractViolation("round requires a nonempty batch")

    def stats(self, fmap: FeatureMap, weighted: bool = False) -> BatchStats:
        key = bool(weighted)
        if key not in self._stats:
            w = self.weights if weighted else None
            self._stats[key] = batch_stats(self.trajectories, fmap, weights=w)
        return self._stats[key]

    @property
    def n(self) -> int:
        return len(self.trajectories)


@dataclass
class HistoryArrays:
    """Stacked per-round statistics for vectorized history-wide assembly."""

    task_ids: np.ndarray   # (r,)
    weight: np.ndarray     # (r,) eta / (n sigma^2)
    eta: np.ndarray
    n: np.ndarray
    sigma: np.ndarray
    M: np.ndarray
    wsum: np.ndarray
    u2: np.ndarray
    G: np.ndarray          # (r, d, d) block-diagonal feature Grams
    H: np.ndarray          # (r, d)


@dataclass
class RoundHistory:
    records: list[RoundRecord] = field(default_factory=list)
    _arrays: dict = field(default_factory=dict, repr=False)

    def append(self, record: RoundRecord) -> None:
        self.records.append(record)

    def index_set(self) -> list[int]:
        return sorted({rec.task_id for rec in self.records})

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def arrays(self, fmap: FeatureMap, weighted: bool = False) -> HistoryArrays:
        key = (id(fmap), bool(weighted), len(self.records))
        cached = self._arrays.get((id(fmap), bool(weighted)))
        if cached is not None and cached[0] == len(self.records):
            return cached[1]
        stats = [rec.stats(fmap, weighted) for rec in self.records]
        arrays = HistoryArrays(
            task_ids=np.array([rec.task_id for rec in self.records], dtype=int),
            weight=np.array([_round_weight(rec) for rec in self.records]),
            eta=np.array([rec.eta for rec in self.records]),
            n=np.array([rec.n for rec in self.records], dtype=float),
            sigma=np.array([rec.sigma for rec in self.records]),
            M=np.array([st.M for st in stats], dtype=float),
            wsum=np.array([st.wsum for st in stats]),
            u2=np.array([st.u2 for st in stats]),
            G=np.stack([st.gram_full() for st in stats]),
            H=np.stack([st.h_full() for st in stats]),
        )
        self._arrays[(id(fmap), bool(weighted))] = (len(self.records), arrays)
        return arrays


def _round_weight(rec: RoundRecord) -> float:
    return rec.eta / (rec.n * rec.sigma * rec.sigma)


def objective_e_r(kb: KnowledgeBase, history: RoundHistory, fmap: FeatureMap,
                  weighted: bool = False) -> float:
    """Accumulated weighted losses plus the Frobenius regularizers."""
    total = kb.mu1 * float(np.sum(kb.S * kb.S)) + kb.mu2 * float(np.sum(kb.L * kb.L))
    if len(history) == 0:
        return total
    arr = history.arrays(fmap, weighted)
    A = kb.L @ kb.S[:, arr.task_ids]              # (d, r) played parameters
    quad = arr.u2 - 2.0 * np.einsum("jd,dj->j", arr.H, A) \
        + np.einsum("dj,jde,ej->j", A, arr.G, A)
    const = 0.5 * (np.log(2.0 * np.pi) + 2.0 * np.log(arr.sigma)) \
        * arr.M * _action_dims(history, fmap, weighted) * arr.wsum / arr.n
    losses = const + quad / (2.0 * arr.sigma ** 2 * arr.n)
    return total + float(np.sum(arr.eta * losses))


def _action_dims(history: RoundHistory, fmap: FeatureMap, weighted: bool) -> int:
    return history.records[0].stats(fmap, weighted).d_a


def _assemble_L_system(history: RoundHistory, S: np.ndarray, mu2: float,
                       fmap: FeatureMap, weighted: bool, d: int):
    k = S.shape[0]
    Z = 2.0 * mu2 * np.eye(d * k)
    v = np.zeros(d * k)
    if len(history):
        arr = history.arrays(fmap, weighted)
        Ssel = S[:, arr.task_ids]                  # (k, r)
        Z = Z + np.einsum("j,aj,bj,jmn->ambn", arr.weight, Ssel, Ssel,
                          arr.G).reshape(d * k, d * k)
        v = v + np.einsum("j,aj,jm->am", arr.weight, Ssel, arr.H).reshape(d * k)
    return Z, v


def update_L_closed_form(history: RoundHistory, S: np.ndarray, mu2: float,
                         fmap: FeatureMap, weighted: bool = False,
                         d: int | None = None) -> np.ndarray:
    """Exact minimizer of the accumulated objective in L for fixed S.

    Assembled in vec(L) space: Z_L = 2*mu2*I + sum w * (s s^T (x) Gram),
    v_L = sum w * (s (x) h); column-major vec throughout.
    """
    k = S.shape[0]
    if d is None:
        if len(history) == 0:
            raise ContractViolation("need explicit d for an empty history")
        d = history.records[0].stats(fmap, weighted).d
    Z, v = _assemble_L_system(history, S, mu2, fmap, weighted, d)
    try:
        vecL = np.linalg.solve(Z, v)
    except np.linalg.LinAlgError as err:
        raise NumericalFailure("singular normal matrix in the L update") from err
    if not np.all(np.isfinite(vecL)):
        raise NumericalFailure("non-finite L update")
    return vecL.reshape((d, k), order="F")


def _assemble_S_systems(history: RoundHistory, L: np.ndarray, mu1: float,
                        fmap: FeatureMap, weighted: bool):
    """Per-task (Z_s, v_s) systems; tasks keyed by id."""
    d, k = L.shape
    out: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    if len(history) == 0:
        return out
    arr = history.arrays(fmap, weighted)
    for t in np.unique(arr.task_ids):
        mask = arr.task_ids == t
        Gsum = np.einsum("j,jmn->mn", arr.weight[mask], arr.G[mask])
        hsum = arr.weight[mask] @ arr.H[mask]
        Z = 2.0 * mu1 * np.eye(k) + L.T @ Gsum @ L
        v = L.T @ hsum
        out[int(t)] = (Z, v)
    return out


def update_S_closed_form(history: RoundHistory, L: np.ndarray, mu1: float,
                         fmap: FeatureMap, num_tasks: int,
                         weighted: bool = False) -> np.ndarray:
    """Column-wise exact minimizer in S for fixed L; unobserved columns zero."""
    k = L.shape[1]
    S = np.zeros((k, num_tasks))
    for t, (Z, v) in sorted(_assemble_S_systems(history, L, mu1, fmap, weighted).items()):
        try:
            S[:, t] = np.linalg.solve(Z, v)
        except np.linalg.LinAlgError as err:
            raise NumericalFailure("singular normal matrix in the S update") from err
    if not np.all(np.isfinite(S)):
        raise NumericalFailure("non-finite S update")
    return S


def alternating_optimize(kb: KnowledgeBase, history: RoundHistory, inner_iters: int,
                         mode: str, fmap: FeatureMap, weighted: bool = False,
                         trace: list | None = None) -> KnowledgeBase:
    """Alternate the L and S block updates (basis first).

    closed_form jumps to each block's exact minimizer and must not increase
    the objective (asserted, tol 1e-9). Gradient modes take plain or
    Fisher-preconditioned steps with rates c/j.
    """
    if inner_iters < 1:
        raise ContractViolation("inner_iters must be >= 1")
    if mode not in ("closed_form", "eREINFORCE", "eNAC"):
        raise ConfigError(f"unknown optimization mode {mode!r}")
    L = kb.L.copy()
    S = kb.S.copy()
    obj = objective_e_r(replace(kb, L=L, S=S), history, fmap, weighted)
    if trace is not None:
        trace.append(obj)
    for j in range(1, inner_iters + 1):
        if mode == "closed_form":
            L = update_L_closed_form(history, S, kb.mu2, fmap, weighted, d=kb.d)
            S = update_S_closed_form(history, L, kb.mu1, fmap, kb.num_tasks, weighted)
        else:
            rate = INNER_RATE_C / j
            L = _gradient_L_step(history, L, S, kb.mu2, fmap, weighted, mode, rate)
            S = _gradient_S_step(history, L, S, kb.mu1, fmap, weighted, mode, rate)
        new_obj = objective_e_r(replace(kb, L=L, S=S), history, fmap, weighted)
        if mode == "closed_form" and new_obj > obj + 1e-9:
            raise InvariantViolation(
                f"objective increased {obj:.12g} -> {new_obj:.12g} in closed-form alternation")
        obj = new_obj
        if trace is not None:
            trace.append(obj)
    return replace(kb, L=L, S=S)


def _gradient_L_step(history, L, S, mu2, fmap, weighted, mode, rate):
    d, k = L.shape
    vecL = L.ravel(order="F")
    Z, v = _assemble_L_system(history, S, mu2, fmap, weighted, d)
    grad = Z @ vecL - v
    if mode == "eNAC":
        F = Z - 2.0 * mu2 * np.eye(d * k)
        eps = max(1e-6 * float(np.trace(F)) / (d * k), 1e-12)
        grad = np.linalg.solve(F + eps * np.eye(d * k), grad)
    vecL = vecL - rate * grad
    return vecL.reshape((d, k), order="F")


def _gradient_S_step(history, L, S, mu1, fmap, weighted, mode, rate):
    k = L.shape[1]
    S = S.copy()
    for t, (Z, v) in sorted(_assemble_S_systems(history, L, mu1, fmap, weighted).items()):
        grad = Z @ S[:, t] - v
        if mode == "eNAC":
            F = Z - 2.0 * mu1 * np.eye(k)
            eps = max(1e-6 * float(np.trace(F)) / k, 1e-12)
            grad = np.linalg.solve(F + eps * np.eye(k), grad)
        S[:, t] = S[:, t] - rate * grad
    return S


# --- linearization -------------------------------------------------------------

@dataclass
class LinearizedLoss:
    """Affine model f^T [u; 1] of a round loss around an anchor point."""

    fhat: np.ndarray
    anchor: ThetaVector

    def value_at(self, u: np.ndarray) -> float:
        u = np.asarray(u, dtype=float)
        return float(self.fhat[:-1] @ u + self.fhat[-1])

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.fhat))


def linearize_loss(evaluator: Callable[[np.ndarray], tuple[float, np.ndarray]],
                   theta_hat: ThetaVector) -> LinearizedLoss:
    """First-order model from a (value, gradient) evaluator at the anchor."""
    value, grad = evaluator(theta_hat.vec)
    grad = np.asarray(grad, dtype=float)
    if not (np.isfinite(value) and np.all(np.isfinite(grad))):
        raise NumericalFailure("non-finite loss or gradient at the anchor")
    offset = value - float(grad @ theta_hat.vec)
    return LinearizedLoss(fhat=np.concatenate([grad, [offset]]), anchor=theta_hat)


def round_loss_evaluator(rec: RoundRecord, dims: tuple[int, int, int],
                         fmap: FeatureMap) -> Callable[[np.ndarray], tuple[float, np.ndarray]]:
    """Unweighted round loss l_t(theta) and its gradient in theta coordinates."""
    d, k, num_tasks = dims
    st = rec.stats(fmap, weighted=False)

    def evaluate(vec: np.ndarray) -> tuple[float, np.ndarray]:
        theta = ThetaVector(vec=np.asarray(vec, dtype=float), d=d, k=k,
                            num_tasks=num_tasks)
        L, S = theta.to_LS()
        s = S[:, rec.task_id]
        alpha = L @ s
        value = stats_loss(st, alpha, rec.sigma)
        galpha = stats_grad(st, alpha, rec.sigma)
        grad = np.zeros_like(theta.vec)
        grad[: d * k] = np.kron(s, galpha)
        col = d * k + rec.task_id * k
        grad[col: col + k] = L.T @ galpha
        return value, grad

    return evaluate
