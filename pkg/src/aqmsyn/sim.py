"""Fixed-step simulation of the delayed TCP/AQM fluid loop.

The certificates say the linearization is stable; this module checks
what the actual nonlinear loop does.  The window/queue fluid equations
are integrated with their delay intact,

    dW/dt = 1/R(t) - (W(t) W(t-R) / 2) * p(t-R) / R(t-R)
    dq/dt = N(t) W(t) / R(t) - C + cross(t)
    R(t)  = q(t)/C + Tp + delay_step(t)

under a pluggable marking controller, physical clamps (queue between 0
and the buffer, window at least one packet, probability in [0, 1]), and
the disturbance scenarios used for evaluation: a propagation-delay step,
a cross-traffic burst, and a load change.

Integration is classical fourth order with a fixed step.  Delayed terms
are read from the committed trajectory by linear interpolation, which is
safe because the delay never falls below the propagation delay, itself
hundreds of steps long at the default dt.  The controller acts once per
committed step; only the delayed probability enters the dynamics, so
intra-step controller evaluation would change nothing.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .model import Equilibrium, LinearModel, NetworkParams, equilibrium

__all__ = [
    "Controller",
    "StateFeedback",
    "PiController",
    "ConstantDrop",
    "DelayStep",
    "CrossTraffic",
    "LoadStep",
    "Scenario",
    "SimTrace",
    "Metrics",
    "simulate_nonlinear",
    "simulate_linear",
    "compute_metrics",
]

W_MIN = 1.0


def _clamp01(p: float) -> float:
    return min(max(p, 0.0), 1.0)


class Controller:
    """Marking-probability law p = f(t, W, q); emitted p is in [0, 1]."""

    label = "controller"

    def reset(self) -> None:
        """Return internal state to its initial value (fresh run)."""

    def emit(self, t: float, W: float, q: float) -> float:
        raise NotImplementedError


class StateFeedback(Controller):
    """p = p0 + k1 (W - W0) + k2 (q - q0), clamped to a probability."""

    label = "state-feedback"

    def __init__(self, K: np.ndarray, W0: float, q0: float, p0: float):
        K = np.atleast_2d(np.asarray(K, dtype=float))
        self.k1 = float(K[0, 0])
        self.k2 = float(K[0, 1])
        self.W0, self.q0, self.p0 = float(W0), float(q0), float(p0)

    def emit(self, t, W, q):
        return _clamp01(self.p0 + self.k1 * (W - self.W0) + self.k2 * (q - self.q0))


class PiController(Controller):
    """Sampled proportional-integral drop controller with zero-order hold.

    Velocity form p(k) = p(k-1) + a dq(k) - b dq(k-1) on the queue error
    dq = q - q0, updated at the sampling frequency fs and held constant
    in between.
    """

    label = "pi"

    def __init__(self, a: float, b: float, fs: float, q0: float, p_init: float = 0.0):
        self.a, self.b, self.fs = float(a), float(b), float(fs)
        self.q0 = float(q0)
        self.p_init = _clamp01(p_init)
        self.reset()

    def reset(self):
        self.p = self.p_init
        self.prev_dq = 0.0
        self.next_t = 0.0

    def emit(self, t, W, q):
        if t >= self.next_t:
            dq = q - self.q0
            self.p = _clamp01(self.p + self.a * dq - self.b * self.prev_dq)
            self.prev_dq = dq
            self.next_t += 1.0 / self.fs
        return self.p


class ConstantDrop(Controller):
    """Fixed marking probability; the open-loop baseline."""

    label = "constant"

    def __init__(self, p0: float):
        self.p0 = _clamp01(p0)

    def emit(self, t, W, q):
        return self.p0


@dataclass(frozen=True)
class DelayStep:
    """Propagation delay increases by delta at t_on and stays there."""

    delta: float
    t_on: float


@dataclass(frozen=True)
class CrossTraffic:
    """Unresponsive arrivals at `rate` packets/s during [t_on, t_off]."""

    rate: float
    t_on: float
    t_off: float


@dataclass(frozen=True)
class LoadStep:
    """Number of long-lived flows changes by delta_N at t_on."""

    delta_N: float
    t_on: float


@dataclass(frozen=True)
class Scenario:
    horizon: float
    disturbances: tuple = ()
    note: str = ""

    def __post_init__(self):
        if self.horizon <= 0.0:
            raise ValueError("horizon must be positive")
        for d in self.disturbances:
            t_on = d.t_on
            t_off = getattr(d, "t_off", t_on)
            if not (0.0 <= t_on <= t_off <= self.horizon):
                raise ValueError(f"disturbance window outside [0, horizon]: {d}")

    def last_event_end(self) -> float | None:
        """End of the latest disturbance (its t_off, or t_on if permanent)."""
        if not self.disturbances:
            return None
        return max(getattr(d, "t_off", d.t_on) for d in self.disturbances)


@dataclass(frozen=True)
class SimTrace:
    """Uniform-grid trajectory of the loop plus run metadata."""

    t: np.ndarray
    W: np.ndarray
    q: np.ndarray
    p: np.ndarray
    R: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.t)
        if any(len(a) != n for a in (self.W, self.q, self.p, self.R)):
            raise ValueError("trace arrays must share one grid")
        if n >= 2 and not np.all(np.diff(self.t) > 0):
            raise ValueError("time grid must be strictly increasing")

    def to_csv(self, target) -> None:
        """Write the trace as delimited text, 9 significant digits."""
        own = isinstance(target, (str, bytes))
        fh = open(target, "w") if own else target
        try:
            fh.write("t_s,W_pkts,q_pkts,p_prob,R_s\n")
            for row in zip(self.t, self.W, self.q, self.p, self.R):
                fh.write(",".join(f"{v:.9g}" for v in row) + "\n")
        finally:
            if own:
                fh.close()

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()


@dataclass(frozen=True)
class Metrics:
    """Queue-regulation quality relative to the reference level."""

    overshoot: float
    settling: float | None
    sse: float
    recovery: float | None


def simulate_nonlinear(
    params: NetworkParams,
    controller: Controller,
    scenario: Scenario,
    dt: float = 1e-3,
    initial: tuple[float, float, float | None] | None = None,
) -> SimTrace:
    """Integrate the nonlinear delayed fluid loop under a controller.

    initial is (W, q, p); p may be None to let the controller set it,
    and initial=None starts pinned at the operating point.  History
    before t=0 is constant at the initial state.  dt must resolve the
    smallest round-trip time in the scenario with at least 20 steps.
    """
    dmin = min((d.delta for d in scenario.disturbances if isinstance(d, DelayStep)), default=0.0)
    R_floor = params.Tp + min(dmin, 0.0)
    if R_floor <= 0.0:
        raise ValueError("delay step drives the round-trip time nonpositive")
    if dt > R_floor / 20.0:
        raise ValueError(f"dt={dt} too large for minimum delay {R_floor}")
    if initial is None:
        eq = equilibrium(params)
        initial = (eq.W0, float(params.q0), eq.p0)
    W_init, q_init, p_init = initial

    N, C, Tp, buffer = params.N, params.C, params.Tp, params.buffer
    controller.reset()
    nsteps = int(round(scenario.horizon / dt))
    W = np.empty(nsteps + 1)
    q = np.empty(nsteps + 1)
    p = np.empty(nsteps + 1)
    W[0] = max(W_init, W_MIN)
    q[0] = min(max(q_init, 0.0), buffer)
    p[0] = controller.emit(0.0, W[0], q[0]) if p_init is None else _clamp01(p_init)

    steps = [d for d in scenario.disturbances if isinstance(d, DelayStep)]
    bursts = [d for d in scenario.disturbances if isinstance(d, CrossTraffic)]
    loads = [d for d in scenario.disturbances if isinstance(d, LoadStep)]

    def delay_shift(t):
        return sum(d.delta for d in steps if t >= d.t_on)

    def cross(t):
        return sum(d.rate for d in bursts if d.t_on <= t <= d.t_off)

    def nflows(t):
        return N + sum(d.delta_N for d in loads if t >= d.t_on)

    def hist(arr, tau):
        if tau <= 0.0:
            return arr[0]
        x = tau / dt
        i = int(x)
        if i >= nsteps:
            return arr[nsteps]
        fr = x - i
        return arr[i] * (1.0 - fr) + arr[i + 1] * fr

    def deriv(t, Wv, qv):
        R = qv / C + Tp + delay_shift(t)
        tau = t - R
        Wd = hist(W, tau)
        pd = hist(p, tau)
        Rd = hist(q, tau) / C + Tp + delay_shift(tau)
        dW = 1.0 / R - (Wv * Wd / 2.0) * (pd / Rd)
        dq = nflows(t) * Wv / R - C + cross(t)
        if qv <= 0.0 and dq < 0.0:
            dq = 0.0
        if qv >= buffer and dq > 0.0:
            dq = 0.0
        if Wv <= W_MIN and dW < 0.0:
            dW = 0.0
        return dW, dq

    for i in range(nsteps):
        t = i * dt
        Wv, qv = W[i], q[i]
        k1 = deriv(t, Wv, qv)
        k2 = deriv(t + dt / 2.0, Wv + dt / 2.0 * k1[0], qv + dt / 2.0 * k1[1])
        k3 = deriv(t + dt / 2.0, Wv + dt / 2.0 * k2[0], qv + dt / 2.0 * k2[1])
        k4 = deriv(t + dt, Wv + dt * k3[0], qv + dt * k3[1])
        Wn = Wv + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        qn = qv + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
        W[i + 1] = max(Wn, W_MIN)
        q[i + 1] = min(max(qn, 0.0), buffer)
        p[i + 1] = controller.emit((i + 1) * dt, W[i + 1], q[i + 1])

    t_grid = np.arange(nsteps + 1) * dt
    R_grid = q / C + Tp + np.array([delay_shift(t) for t in t_grid])
    return SimTrace(
        t=t_grid,
        W=W,
        q=q,
        p=p,
        R=R_grid,
        metadata={
            "model": "nonlinear",
            "controller": controller.label,
            "dt": dt,
            "params": (params.N, params.C, params.Tp, params.q0, params.buffer),
            "scenario": scenario,
        },
    )


def simulate_linear(
    model: LinearModel,
    K,
    h: float,
    scenario: Scenario,
    dt: float = 1e-3,
    initial: tuple[float, float] = (0.0, 0.0),
    params: NetworkParams | None = None,
    eq: Equilibrium | None = None,
) -> SimTrace:
    """Integrate the closed linear delay loop in deviation coordinates.

    dx/dt = A x + (A_d + B K) x(t - h), no clamps.  When params and eq
    are supplied the reported trace carries the physical offsets; the
    deviation itself is recoverable by subtracting them back out.
    Disturbances are not meaningful in deviation coordinates, so only
    undisturbed scenarios are accepted.
    """
    if scenario.disturbances:
        raise ValueError("linear simulation supports undisturbed scenarios only")
    if h <= 0.0:
        raise ValueError("delay must be positive")
    if dt > h / 20.0:
        raise ValueError(f"dt={dt} too large for delay {h}")
    from .synthesis import Gain  # local import to avoid a cycle at module load

    if K is None:
        Km = np.zeros((model.m, model.n))
    elif isinstance(K, Gain):
        Km = K.K
    else:
        Km = np.atleast_2d(np.asarray(K, dtype=float))
    Adt = model.Ad + model.B @ Km
    A = model.A
    nsteps = int(round(scenario.horizon / dt))
    x = np.empty((nsteps + 1, model.n))
    x[0] = np.asarray(initial, dtype=float)

    def hist(tau):
        if tau <= 0.0:
            return x[0]
        s = tau / dt
        i = int(s)
        if i >= nsteps:
            return x[nsteps]
        fr = s - i
        return x[i] * (1.0 - fr) + x[i + 1] * fr

    def deriv(t, xv):
        return A @ xv + Adt @ hist(t - h)

    for i in range(nsteps):
        t = i * dt
        xv = x[i]
        k1 = deriv(t, xv)
        k2 = deriv(t + dt / 2.0, xv + dt / 2.0 * k1)
        k3 = deriv(t + dt / 2.0, xv + dt / 2.0 * k2)
        k4 = deriv(t + dt, xv + dt * k3)
        x[i + 1] = xv + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    t_grid = np.arange(nsteps + 1) * dt
    dW, dq = x[:, 0], x[:, 1]
    u = (Km @ x.T).ravel()
    if params is not None and eq is not None:
        Wt = eq.W0 + dW
        qt = params.q0 + dq
        pt = eq.p0 + u
        Rt = qt / params.C + params.Tp
    else:
        Wt, qt, pt = dW, dq, u
        Rt = np.full_like(t_grid, h)
    return SimTrace(
        t=t_grid,
        W=Wt,
        q=qt,
        p=pt,
        R=Rt,
        metadata={
            "model": "linear",
            "controller": "state-feedback",
            "dt": dt,
            "h": h,
            "offsets": params is not None and eq is not None,
            "scenario": scenario,
        },
    )


def compute_metrics(trace: SimTrace, q0: float, band: float = 0.05) -> Metrics:
    """Regulation metrics of a queue trace against the reference q0.

    settling is the first time after which the queue never leaves the
    +-band*q0 tube (None if it never happens on the trace); recovery is
    the same measurement restarted at the end of the last disturbance.
    """
    if len(trace.t) == 0:
        raise ValueError("empty trace")
    overshoot = max(float(trace.q.max() - q0), 0.0)
    sse_n = max(1, int(0.1 * len(trace.q)))
    sse = float(np.abs(trace.q[-sse_n:] - q0).mean())
    settling = _settling_time(trace.t, trace.q, q0, band, 0.0)
    scenario = trace.metadata.get("scenario")
    t_event = scenario.last_event_end() if isinstance(scenario, Scenario) else None
    recovery = None
    if t_event is not None:
        recovery = _settling_time(trace.t, trace.q, q0, band, t_event)
    return Metrics(overshoot=overshoot, settling=settling, sse=sse, recovery=recovery)


def _settling_time(t, q, q0, band, t_from) -> float | None:
    sel = t >= t_from
    tt, qq = t[sel], q[sel]
    if len(tt) == 0:
        return None
    inside = np.abs(qq - q0) <= band * q0
    if not inside[-1]:
        return None
    outside = np.flatnonzero(~inside)
    if len(outside) == 0:
        return 0.0
    first_ok = outside[-1] + 1
    if first_ok >= len(tt):
        return None
    return float(tt[first_ok] - t_from)
