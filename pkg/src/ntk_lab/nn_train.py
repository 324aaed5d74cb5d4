"""Finite-width two-layer ReLU network trained by explicit-Euler gradient descent.

Parameterisation (2m hidden units)::

    f(x) = m^(-1/2) * sum_{r < 2m} a_r * relu(<w_r, x> + b_r) + b_out

Initialisation draws a_r, w_r, b_r ~ N(0, 1) for r < m and mirrors them with
a_{r+m} = -a_r, w_{r+m} = w_r, b_{r+m} = b_r; b_out starts at 0, so f = 0 at
t = 0.  The loss is (1/2n) ||f(X) - y||^2 and one Euler step of size eta
advances flow time by eta.

b_out is trained by default.  Its gradient contributes the constant 1 in the
network kernel 1 + H + G, so the training dynamics follow that kernel and, in
the wide limit, the NTK.  With ``train_b_out=False`` the bias stays at 0 and the
dynamics follow the kernel minus 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from time import perf_counter
from typing import Callable

import numpy as np

from .errors import DimensionMismatch, DivergenceDetected, DomainError, MissingSnapshot
from .kernels import KernelSpec, as_points
from .ntk_flow import Dataset, NtkFlowModel, predict
from .numerics import Rng


@dataclass
class TwoLayerNet:
    m: int
    d: int
    a: np.ndarray  # (2m,)
    w: np.ndarray  # (2m, d)
    b: np.ndarray  # (2m,)
    b_out: float = 0.0
    train_b_out: bool = True

    @property
    def scale(self) -> float:
        return 1.0 / math.sqrt(self.m)

    def copy(self) -> "TwoLayerNet":
        return TwoLayerNet(self.m, self.d, self.a.copy(), self.w.copy(), self.b.copy(), self.b_out, self.train_b_out)

    def preactivations(self, x) -> np.ndarray:
        x = as_points(x, self.d)
        return x @ self.w.T + self.b

    def __call__(self, x) -> np.ndarray:
        """Vectorised forward pass over a point set."""
        h = self.preactivations(x)
        return np.maximum(h, 0.0) @ self.a * self.scale + self.b_out


@dataclass
class Gradient:
    a: np.ndarray
    w: np.ndarray
    b: np.ndarray
    b_out: float = 0.0

    def norm(self) -> float:
        return math.sqrt(float(self.a @ self.a + np.sum(self.w * self.w) + self.b @ self.b) + self.b_out**2)


def init_net(m: int, d: int, rng: Rng, *, train_b_out: bool = True) -> TwoLayerNet:
    if m < 1 or d < 1:
        raise DomainError("need m >= 1 and d >= 1")
    a0 = rng.normal(m)
    w0 = rng.normal(m * d).reshape(m, d)
    b0 = rng.normal(m)
    return TwoLayerNet(
        m=m,
        d=d,
        a=np.concatenate([a0, -a0]),
        w=np.vstack([w0, w0]),
        b=np.concatenate([b0, b0]),
        train_b_out=train_b_out,
    )


def forward(net: TwoLayerNet, x) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1 or x.size != net.d:
        raise DimensionMismatch(f"expected a point of dimension {net.d}")
    return float(net(x[None, :])[0])


def _grad_from_residual(net: TwoLayerNet, x: np.ndarray, h: np.ndarray, u: np.ndarray) -> Gradient:
    n = x.shape[0]
    c = net.scale / n
    gated = (h >= 0.0) * u[:, None]  # (n, 2m); ReLU subgradient 1 at 0
    return Gradient(
        a=c * (np.maximum(h, 0.0).T @ u),
        w=c * net.a[:, None] * (gated.T @ x),
        b=c * net.a * gated.sum(axis=0),
        b_out=float(u.mean()) if net.train_b_out else 0.0,
    )


def param_grad(net: TwoLayerNet, data: Dataset) -> Gradient:
    """Gradient of (1/2n) ||f(X) - y||^2 w.r.t. (a, w, b, b_out); zero b_out part when frozen."""
    if data.d != net.d:
        raise DimensionMismatch(f"data dimension {data.d}, network dimension {net.d}")
    h = net.preactivations(data.x)
    u = np.maximum(h, 0.0) @ net.a * net.scale + net.b_out - data.y
    return _grad_from_residual(net, data.x, h, u)


def loss(net: TwoLayerNet, data: Dataset) -> float:
    u = net(data.x) - data.y
    return 0.5 * float(u @ u) / data.n


def train_step(net: TwoLayerNet, data: Dataset, eta: float) -> TwoLayerNet:
    if eta <= 0:
        raise DomainError("eta must be positive")
    g = param_grad(net, data)
    return TwoLayerNet(
        net.m, net.d, net.a - eta * g.a, net.w - eta * g.w, net.b - eta * g.b, net.b_out - eta * g.b_out, net.train_b_out
    )


def nnk_matrix(net: TwoLayerNet, x, y) -> np.ndarray:
    """1 + H + G: the gradient inner product, whose constant 1 comes from b_out."""
    x = as_points(x, net.d)
    y = as_points(y, net.d)
    hx, hy = net.preactivations(x), net.preactivations(y)
    a2 = net.a * net.a
    first = ((hx >= 0) * a2) @ (hy >= 0).T.astype(float)
    second = np.maximum(hx, 0.0) @ np.maximum(hy, 0.0).T
    return 1.0 + ((x @ y.T + 1.0) * first + second) / net.m


def nnk_eval(net: TwoLayerNet, x, y) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.size != net.d or y.size != net.d:
        raise DimensionMismatch(f"expected points of dimension {net.d}")
    return float(nnk_matrix(net, x[None, :], y[None, :])[0, 0])


def nnk_kernel(net: TwoLayerNet) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    return lambda x, y: nnk_matrix(net, x, y)


def kernel_deviation(net: TwoLayerNet, spec, grid) -> float:
    """max over grid pairs of |NNK - k|; ``spec`` is a KernelSpec or a matrix callable."""
    g = as_points(grid, net.d)
    if g.shape[0] == 0:
        raise DomainError("grid must be nonempty")
    target = spec.matrix(g, g) if isinstance(spec, KernelSpec) else np.asarray(spec(g, g))
    return float(np.max(np.abs(nnk_matrix(net, g, g) - target)))


def stable_eta(net: TwoLayerNet, data: Dataset, factor: float = 0.5) -> float:
    """factor * n / lambda_max(NNK Gram at current parameters).

    The linearised loss is a quadratic with curvature lambda_max / n, so Euler
    steps are stable for factor < 2.
    """
    if factor <= 0:
        raise DomainError("factor must be positive")
    k = nnk_matrix(net, data.x, data.x)
    lam_max = float(np.linalg.eigvalsh(k)[-1])
    return factor * data.n / lam_max


def default_eta(net: TwoLayerNet, data: Dataset, cap: float = 0.1) -> float:
    """min(0.5 n / lambda_max(NNK Gram at current parameters), cap)."""
    return min(stable_eta(net, data, 0.5), cap)


# ---------------------------------------------------------------------------
# training loop


@dataclass(frozen=True)
class LossTol:
    tau: float


@dataclass(frozen=True)
class LabelZero:
    pass


@dataclass(frozen=True)
class FixedTime:
    t: float


StoppingRule = LossTol | LabelZero | FixedTime


@dataclass(frozen=True)
class StepRecord:
    step: int
    time: float
    loss: float
    label_error: float


@dataclass
class Snapshot:
    requested: float
    time: float
    step: int
    net: TwoLayerNet


@dataclass
class TrainTrajectory:
    steps: list[StepRecord]
    eta: float
    stop_reason: str  # "MaxSteps" | "LossTol" | "LabelZero" | "FixedTime" | "Deadline"
    snapshots: dict[float, Snapshot] = field(default_factory=dict)
    net: TwoLayerNet | None = None

    @property
    def final(self) -> StepRecord:
        return self.steps[-1]

    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.steps])

    def losses(self) -> np.ndarray:
        return np.array([s.loss for s in self.steps])

    def first_time(self, predicate: Callable[[StepRecord], bool]) -> StepRecord | None:
        return next((s for s in self.steps if predicate(s)), None)


def label_error_rate(pred: np.ndarray, y: np.ndarray) -> float:
    """Share of points whose round-and-clamp label differs from the integer target."""
    lo, hi = float(np.min(y)), float(np.max(y))
    labels = np.clip(np.round(pred), lo, hi)
    return float(np.mean(labels != np.round(y)))


def train_until(
    net: TwoLayerNet,
    data: Dataset,
    rule: StoppingRule,
    eta: float | None = None,
    max_steps: int = 100_000,
    snapshot_times=(),
    *,
    max_halvings: int = 20,
    rise_tol: float = 1e-3,
    callback: Callable[[int, float, TwoLayerNet], None] | None = None,
    callback_every: int = 1,
    record_every: int = 1,
    deadline: float | None = None,
) -> TrainTrajectory:
    """Run Euler steps from ``net`` (modified in place) until ``rule`` fires.

    ``eta=None`` picks :func:`default_eta`.  If a step raises the loss by more
    than the relative ``rise_tol``, it is rejected and eta halved, at most
    ``max_halvings`` times in total.  The tolerance matters: the loss is only
    piecewise smooth, and steps that cross ReLU kinks can raise it by 1e-7 or
    so at any step size, which a zero tolerance would answer with a cascade
    of halvings.  A genuinely unstable step grows geometrically and is still
    caught within a few steps.
    ``callback(step, time, net)`` runs on accepted steps every
    ``callback_every`` steps and at the final step.  ``deadline`` is a
    :func:`time.perf_counter` value; training stops with reason ``"Deadline"``
    once it has passed.
    """
    if max_steps < 1:
        raise DomainError("max_steps must be >= 1")
    if data.d != net.d:
        raise DimensionMismatch(f"data dimension {data.d}, network dimension {net.d}")
    if eta is None:
        eta = default_eta(net, data)
    if eta <= 0:
        raise DomainError("eta must be positive")
    if rise_tol < 0:
        raise DomainError("rise_tol must be >= 0")

    y, n, d = data.y, data.n, data.d
    # work in the (2m, n) layout with the bias folded into the weights; for
    # n x 2m in the hundreds by thousands this is the memory-friendly order
    xa = np.hstack([data.x, np.ones((n, 1))])
    xa_t = np.ascontiguousarray(xa.T)
    pending = sorted(float(t) for t in snapshot_times)
    snapshots: dict[float, Snapshot] = {}
    scale = net.scale

    def evaluate(a, wb, bo):
        h = wb @ xa_t  # (2m, n)
        r = np.maximum(h, 0.0)
        f = a @ r * scale + bo
        u = f - y
        return h, r, f, u, 0.5 * float(u @ u) / n

    a, wb, bo = net.a.copy(), np.hstack([net.w, net.b[:, None]]), net.b_out
    h, r, f, u, cur_loss = evaluate(a, wb, bo)
    blowup = 1e3 * max(cur_loss, np.finfo(float).tiny)
    label_err = label_error_rate(f, y) if isinstance(rule, LabelZero) else float("nan")
    steps = [StepRecord(0, 0.0, cur_loss, label_err)]
    t_base, k_since, step, halvings = 0.0, 0, 0, 0
    time = 0.0

    def sync():
        net.a, net.w, net.b, net.b_out = a, wb[:, :d].copy(), wb[:, d].copy(), bo

    def take_snapshots():
        if pending and time >= pending[0] - 1e-9 * max(1.0, pending[0]):
            sync()
        while pending and time >= pending[0] - 1e-9 * max(1.0, pending[0]):
            req = pending.pop(0)
            snapshots[req] = Snapshot(requested=req, time=time, step=step, net=net.copy())

    def done() -> str | None:
        if isinstance(rule, FixedTime) and time >= rule.t - 1e-12 * max(1.0, rule.t):
            return "FixedTime"
        if isinstance(rule, LossTol) and cur_loss <= rule.tau:
            return "LossTol"
        if isinstance(rule, LabelZero) and label_err == 0.0:
            return "LabelZero"
        return None

    take_snapshots()
    reason = done()
    c = scale / n
    while reason is None and step < max_steps:
        if deadline is not None and perf_counter() >= deadline:
            reason = "Deadline"
            break
        g_a = c * (r @ u)
        g_wb = (c * a)[:, None] * ((h >= 0.0) @ (u[:, None] * xa))
        t_a, t_wb = a - eta * g_a, wb - eta * g_wb
        t_bo = bo - eta * float(u.mean()) if net.train_b_out else bo
        th, tr, tf, tu, t_loss = evaluate(t_a, t_wb, t_bo)
        if t_loss > cur_loss * (1.0 + rise_tol) and halvings < max_halvings:
            t_base, k_since = time, 0
            eta *= 0.5
            halvings += 1
            continue
        a, wb, bo = t_a, t_wb, t_bo
        h, r, f, u, cur_loss = th, tr, tf, tu, t_loss
        if not math.isfinite(cur_loss) or cur_loss > blowup:
            sync()
            raise DivergenceDetected(f"loss {cur_loss:.3e} at step {step + 1} exceeds 1e3 x initial")
        step += 1
        k_since += 1
        time = t_base + k_since * eta
        if isinstance(rule, LabelZero):
            label_err = label_error_rate(f, y)
        reason = done()
        if reason is not None or step % record_every == 0 or step == max_steps:
            steps.append(StepRecord(step, time, cur_loss, label_err))
        take_snapshots()
        if callback is not None and (step % callback_every == 0 or reason is not None or step == max_steps):
            sync()
            callback(step, time, net)
    sync()
    return TrainTrajectory(steps=steps, eta=eta, stop_reason=reason or "MaxSteps", snapshots=snapshots, net=net)


def function_deviation(trajectory: TrainTrajectory, flow: NtkFlowModel, grid, times) -> np.ndarray:
    """sup over ``grid`` of |f_net(t) - f_t^NTK| at each requested time.

    The NTK side is evaluated at the snapshot's actual flow time.
    """
    g = as_points(grid)
    out = []
    for t in times:
        snap = trajectory.snapshots.get(float(t))
        if snap is None:
            raise MissingSnapshot(f"no snapshot at t={t}")
        out.append(float(np.max(np.abs(snap.net(g) - predict(flow, snap.time, g)))))
    return np.array(out)
