"""Two-layer conductance-based LIF network with STDP and lateral inhibition.

Input neurons (one per pixel) project all-to-all onto ``n_exc`` excitatory
neurons through plastic weights ``W`` (shape ``n_input x n_exc``). Each
excitatory neuron drives its own inhibitory partner, which in turn inhibits
every *other* excitatory neuron. Excitatory neurons carry an adaptive
threshold ``theta`` (homeostasis).

Time is in ms and voltages in mV throughout. Voltages use forward Euler;
conductances, traces and thresholds use exact exponential decay factors.

Within one step the order is fixed:

1. decay conductances, presynaptic traces and (when learning) ``theta``;
2. deliver input spikes and last step's inhibitory spikes;
3. integrate excitatory voltages (Euler, clamped to the reversal potentials), fire, apply STDP to the winners;
4. deliver this step's excitatory spikes to the inhibitory partners,
   integrate and fire the inhibitory population.

Inhibition emitted in step ``n`` therefore reaches the excitatory layer in
step ``n + 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np
from numba import njit

from .errors import ConfigError

__all__ = [
    "NeuronParams",
    "SynapseParams",
    "NetworkState",
    "SpikeRecord",
    "build_network",
    "step",
    "stdp_on_post_spike",
    "normalize_weights",
    "present",
    "integrate_voltage",
]


@dataclass(frozen=True)
class NeuronParams:
    """LIF parameters for one population.

    ``theta_plus`` and ``tau_theta`` only matter for the excitatory layer.
    """

    tau_mem: float = 100.0
    E_rest: float = -65.0
    E_exc: float = 0.0
    E_inh: float = -100.0
    V_reset: float = -65.0
    V_thresh: float = -52.0
    t_refrac: float = 5.0
    theta_plus: float = 0.05
    tau_theta: float = 1e7

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not math.isfinite(v):
                raise ConfigError(f.name, f"must be finite, got {v!r}")
        if self.tau_mem <= 0:
            raise ConfigError("tau_mem", f"must be > 0, got {self.tau_mem}")
        if self.t_refrac < 0:
            raise ConfigError("t_refrac", f"must be >= 0, got {self.t_refrac}")
        if not self.E_inh < self.E_rest:
            raise ConfigError("E_inh", f"must be below E_rest ({self.E_inh} >= {self.E_rest})")
        if not self.E_rest < self.V_thresh:
            raise ConfigError("V_thresh", f"must be above E_rest ({self.V_thresh} <= {self.E_rest})")
        if not self.V_thresh < self.E_exc:
            raise ConfigError("E_exc", f"must be above V_thresh ({self.E_exc} <= {self.V_thresh})")
        if self.theta_plus < 0:
            raise ConfigError("theta_plus", f"must be >= 0, got {self.theta_plus}")
        if self.tau_theta <= 0:
            raise ConfigError("tau_theta", f"must be > 0, got {self.tau_theta}")

    @classmethod
    def excitatory(cls, **overrides) -> "NeuronParams":
        return cls(**overrides)

    @classmethod
    def inhibitory(cls, **overrides) -> "NeuronParams":
        base = dict(
            tau_mem=10.0,
            E_rest=-60.0,
            E_exc=0.0,
            E_inh=-85.0,
            V_reset=-45.0,
            V_thresh=-40.0,
            t_refrac=2.0,
            theta_plus=0.0,
            tau_theta=1e7,
        )
        base.update(overrides)
        return cls(**base)


@dataclass(frozen=True)
class SynapseParams:
    """Conductance decay, STDP and fixed lateral-wiring parameters."""

    tau_ge: float = 1.0
    tau_gi: float = 2.0
    eta: float = 0.01
    x_tar: float = 0.4
    tau_xpre: float = 20.0
    w_max: float = 1.0
    mu: float = 1.0
    w_norm_target: float = 78.0
    w_exc_inh: float = 10.4
    w_inh_exc: float = 17.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not math.isfinite(v):
                raise ConfigError(f.name, f"must be finite, got {v!r}")
        for name in ("tau_ge", "tau_gi", "tau_xpre"):
            if getattr(self, name) <= 0:
                raise ConfigError(name, f"time constant must be > 0, got {getattr(self, name)}")
        if self.x_tar < 0:
            raise ConfigError("x_tar", f"must be >= 0, got {self.x_tar}")
        if self.w_max <= 0:
            raise ConfigError("w_max", f"must be > 0, got {self.w_max}")
        if self.mu < 0:
            raise ConfigError("mu", f"must be >= 0, got {self.mu}")
        if self.w_norm_target <= 0:
            raise ConfigError("w_norm_target", f"must be > 0, got {self.w_norm_target}")
        if self.w_exc_inh < 0:
            raise ConfigError("w_exc_inh", f"must be >= 0, got {self.w_exc_inh}")
        if self.w_inh_exc < 0:
            raise ConfigError("w_inh_exc", f"must be >= 0, got {self.w_inh_exc}")


@dataclass
class SpikeRecord:
    """Excitatory spike counts for one presentation."""

    counts_exc: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts_exc.sum())


@dataclass
class NetworkState:
    """All mutable simulator state plus the parameters it was built with.

    ``W`` and ``theta`` are the slow (learned) state; everything else is fast
    state that :meth:`reset_fast_state` returns to its resting values.
    """

    W: np.ndarray
    theta: np.ndarray
    v_exc: np.ndarray
    v_inh: np.ndarray
    ge_exc: np.ndarray
    gi_exc: np.ndarray
    ge_inh: np.ndarray
    gi_inh: np.ndarray
    x_pre: np.ndarray
    refrac_exc: np.ndarray
    refrac_inh: np.ndarray
    inh_spiked: np.ndarray
    exc_params: NeuronParams
    inh_params: NeuronParams
    syn_params: SynapseParams
    t_now: float = 0.0
    learning_enabled: bool = True
    _scratch: np.ndarray = field(default=None, repr=False)

    @property
    def n_input(self) -> int:
        return self.W.shape[0]

    @property
    def n_exc(self) -> int:
        return self.W.shape[1]

    @property
    def refrac_until(self) -> tuple[np.ndarray, np.ndarray]:
        return self.refrac_exc, self.refrac_inh

    def reset_fast_state(self) -> None:
        self.v_exc[:] = self.exc_params.E_rest
        self.v_inh[:] = self.inh_params.E_rest
        for arr in (self.ge_exc, self.gi_exc, self.ge_inh, self.gi_inh, self.x_pre):
            arr[:] = 0.0
        self.refrac_exc[:] = -np.inf
        self.refrac_inh[:] = -np.inf
        self.inh_spiked[:] = False

    def copy(self) -> "NetworkState":
        arrays = {
            f.name: getattr(self, f.name).copy()
            for f in fields(self)
            if f.name != "_scratch" and isinstance(getattr(self, f.name), np.ndarray)
        }
        return replace(self, **arrays, _scratch=None)

    def lateral_inhibition_in_degree(self) -> np.ndarray:
        """Number of inhibitory neurons projecting onto each excitatory neuron."""
        return np.full(self.n_exc, self.n_exc - 1, dtype=np.int64)


def build_network(
    n_input: int,
    n_exc: int,
    exc_params: NeuronParams | None = None,
    inh_params: NeuronParams | None = None,
    syn_params: SynapseParams | None = None,
    seed: int = 0,
) -> NetworkState:
    """Create a network at rest with seeded uniform weights in ``[0, 0.3 w_max]``."""
    if n_input < 1:
        raise ConfigError("n_input", f"must be >= 1, got {n_input}")
    if n_exc < 1:
        raise ConfigError("n_exc", f"must be >= 1, got {n_exc}")
    exc_params = exc_params or NeuronParams.excitatory()
    inh_params = inh_params or NeuronParams.inhibitory()
    syn_params = syn_params or SynapseParams()

    rng = np.random.default_rng(seed)
    W = rng.uniform(0.0, 0.3 * syn_params.w_max, size=(n_input, n_exc))
    state = NetworkState(
        W=W,
        theta=np.zeros(n_exc),
        v_exc=np.empty(n_exc),
        v_inh=np.empty(n_exc),
        ge_exc=np.empty(n_exc),
        gi_exc=np.empty(n_exc),
        ge_inh=np.empty(n_exc),
        gi_inh=np.empty(n_exc),
        x_pre=np.empty(n_input),
        refrac_exc=np.empty(n_exc),
        refrac_inh=np.empty(n_exc),
        inh_spiked=np.empty(n_exc, dtype=np.bool_),
        exc_params=exc_params,
        inh_params=inh_params,
        syn_params=syn_params,
    )
    state.reset_fast_state()
    return state


def stdp_on_post_spike(w: float, x_pre: float, params: SynapseParams) -> float:
    """Weight after one postsynaptic spike: ``w + eta (x_pre - x_tar) (w_max - w)^mu``, clamped."""
    dw = params.eta * (x_pre - params.x_tar) * (params.w_max - w) ** params.mu
    return min(max(w + dw, 0.0), params.w_max)


def normalize_weights(state: NetworkState) -> NetworkState:
    """Rescale every nonzero incoming column of ``W`` to sum to ``w_norm_target``.

    Entries that the scaling would push above ``w_max`` are pinned at
    ``w_max`` and the remaining mass is spread over the rest of the column,
    so the bound holds and a second call is a no-op. If a column cannot
    reach the target even with all its nonzero entries at ``w_max``, those
    entries end at ``w_max``. All-zero columns are left alone.
    """
    _normalize_kernel(state.W, state.syn_params.w_norm_target, state.syn_params.w_max)
    return state


@njit(cache=True, nogil=True)
def _normalize_kernel(W, target, w_max):
    n_in, n_exc = W.shape
    pinned = np.zeros(n_in, dtype=np.bool_)
    for k in range(n_exc):
        peak = 0.0
        for i in range(n_in):
            peak = max(peak, W[i, k])
        if peak <= 0.0:
            continue
        pinned[:] = False
        n_pinned = 0
        scale = 1.0
        # each pass pins at least one more entry or stops
        for _ in range(n_in + 1):
            # rescale the free entries by their peak so tiny values cannot overflow the scale
            peak = 0.0
            for i in range(n_in):
                if not pinned[i]:
                    peak = max(peak, W[i, k])
            free_sum = 0.0
            if peak > 0.0:
                for i in range(n_in):
                    if not pinned[i]:
                        W[i, k] /= peak
                        free_sum += W[i, k]
            room = target - n_pinned * w_max
            scale = room / free_sum if free_sum > 0.0 else 1.0
            grew = False
            for i in range(n_in):
                if not pinned[i] and W[i, k] * scale > w_max:
                    pinned[i] = True
                    n_pinned += 1
                    grew = True
            if not grew:
                break
        for i in range(n_in):
            W[i, k] = w_max if pinned[i] else W[i, k] * scale


# Indices into the packed constant vector handed to the kernels.
_DT, _TAU_E, _EREST_E, _EEXC_E, _EINH_E, _VRESET_E, _VTH_E, _TREF_E = range(8)
_THETA_PLUS, _DTHETA = 8, 9
_TAU_I, _EREST_I, _EEXC_I, _EINH_I, _VRESET_I, _VTH_I, _TREF_I = range(10, 17)
_DGE, _DGI, _DX, _ETA, _XTAR, _WMAX, _MU, _W_EI, _W_IE = range(17, 26)
_N_CONST = 26

# Refractory comparisons tolerate accumulated clock rounding.
_T_EPS = 1e-9

# Decaying quantities below this are set to zero.
_TINY = 1e-300


def _constants(state: NetworkState, dt: float) -> np.ndarray:
    e, i, s = state.exc_params, state.inh_params, state.syn_params
    c = np.empty(_N_CONST)
    c[_DT] = dt
    c[_TAU_E], c[_EREST_E], c[_EEXC_E], c[_EINH_E] = e.tau_mem, e.E_rest, e.E_exc, e.E_inh
    c[_VRESET_E], c[_VTH_E], c[_TREF_E] = e.V_reset, e.V_thresh, e.t_refrac
    c[_THETA_PLUS], c[_DTHETA] = e.theta_plus, math.exp(-dt / e.tau_theta)
    c[_TAU_I], c[_EREST_I], c[_EEXC_I], c[_EINH_I] = i.tau_mem, i.E_rest, i.E_exc, i.E_inh
    c[_VRESET_I], c[_VTH_I], c[_TREF_I] = i.V_reset, i.V_thresh, i.t_refrac
    c[_DGE], c[_DGI] = math.exp(-dt / s.tau_ge), math.exp(-dt / s.tau_gi)
    c[_DX] = math.exp(-dt / s.tau_xpre)
    c[_ETA], c[_XTAR], c[_WMAX], c[_MU] = s.eta, s.x_tar, s.w_max, s.mu
    c[_W_EI], c[_W_IE] = s.w_exc_inh, s.w_inh_exc
    return c


def _check_dt(state: NetworkState, dt: float) -> None:
    e, i, s = state.exc_params, state.inh_params, state.syn_params
    tau_min = min(e.tau_mem, i.tau_mem, s.tau_ge, s.tau_gi, s.tau_xpre)
    if not dt > 0:
        raise ConfigError("dt", f"must be > 0, got {dt}")
    if dt > tau_min / 2:
        raise ConfigError("dt", f"must be <= half the smallest time constant ({tau_min / 2} ms), got {dt}")


@njit(cache=True, nogil=True, inline="always")
def _decay(x, factor):
    # flush before reaching subnormals, which are very slow to multiply
    x *= factor
    return x if x >= _TINY else 0.0


@njit(cache=True, nogil=True)
def integrate_voltage(v, g_e, g_i, tau, E_rest, E_exc, E_inh, dt):
    """One forward-Euler step of ``tau dV/dt = (E_rest-V) + g_e(E_exc-V) + g_i(E_inh-V)``.

    The result is clamped to ``[E_inh, E_exc]``. The exact solution never
    leaves that interval, but an Euler step does once
    ``dt (1 + g_e + g_i) / tau > 1``, which happens whenever a few dozen
    neurons fire together and their summed inhibition lands at once.
    """
    v = v + dt * ((E_rest - v) + g_e * (E_exc - v) + g_i * (E_inh - v)) / tau
    if v < E_inh:
        return E_inh
    if v > E_exc:
        return E_exc
    return v


@njit(cache=True, nogil=True)
def _step_kernel(
    W, theta, v_exc, v_inh, ge_exc, gi_exc, ge_inh, gi_inh, x_pre,
    refrac_exc, refrac_inh, inh_spiked, exc_spiked,
    spikes_in, has_input, t_now, c, learning,
):
    n_in, n_exc = W.shape
    dt = c[_DT]
    t_new = t_now + dt

    dge, dgi, dx = c[_DGE], c[_DGI], c[_DX]
    for k in range(n_exc):
        ge_exc[k] = _decay(ge_exc[k], dge)
        gi_exc[k] = _decay(gi_exc[k], dgi)
        ge_inh[k] = _decay(ge_inh[k], dge)
        gi_inh[k] = _decay(gi_inh[k], dgi)
    if learning:
        dtheta = c[_DTHETA]
        for k in range(n_exc):
            theta[k] = _decay(theta[k], dtheta)
    for i in range(n_in):
        x_pre[i] = _decay(x_pre[i], dx)

    if has_input:
        for i in range(n_in):
            if spikes_in[i]:
                x_pre[i] += 1.0
                for k in range(n_exc):
                    ge_exc[k] += W[i, k]

    n_inh = 0
    for k in range(n_exc):
        if inh_spiked[k]:
            n_inh += 1
    if n_inh > 0:
        w_ie = c[_W_IE]
        for k in range(n_exc):
            others = n_inh - 1 if inh_spiked[k] else n_inh
            gi_exc[k] += w_ie * others

    n_fired = 0
    for k in range(n_exc):
        exc_spiked[k] = False
        if t_new - refrac_exc[k] < -_T_EPS:
            continue
        v = integrate_voltage(v_exc[k], ge_exc[k], gi_exc[k], c[_TAU_E],
                              c[_EREST_E], c[_EEXC_E], c[_EINH_E], dt)
        if v >= c[_VTH_E] + theta[k]:
            exc_spiked[k] = True
            n_fired += 1
            v = c[_VRESET_E]
            refrac_exc[k] = t_new + c[_TREF_E]
            if learning:
                theta[k] += c[_THETA_PLUS]
        v_exc[k] = v

    if learning and n_fired > 0:
        eta, x_tar, w_max, mu = c[_ETA], c[_XTAR], c[_WMAX], c[_MU]
        linear = mu == 1.0
        for k in range(n_exc):
            if exc_spiked[k]:
                for i in range(n_in):
                    w = W[i, k]
                    room = w_max - w
                    if not linear:
                        room = room ** mu
                    w = w + eta * (x_pre[i] - x_tar) * room
                    if w < 0.0:
                        w = 0.0
                    elif w > w_max:
                        w = w_max
                    W[i, k] = w

    w_ei = c[_W_EI]
    for k in range(n_exc):
        if exc_spiked[k]:
            ge_inh[k] += w_ei
        inh_spiked[k] = False
        if t_new - refrac_inh[k] < -_T_EPS:
            continue
        v = integrate_voltage(v_inh[k], ge_inh[k], gi_inh[k], c[_TAU_I],
                              c[_EREST_I], c[_EEXC_I], c[_EINH_I], dt)
        if v >= c[_VTH_I]:
            inh_spiked[k] = True
            v = c[_VRESET_I]
            refrac_inh[k] = t_new + c[_TREF_I]
        v_inh[k] = v

    return t_new


@njit(cache=True, nogil=True)
def _present_kernel(
    W, theta, v_exc, v_inh, ge_exc, gi_exc, ge_inh, gi_inh, x_pre,
    refrac_exc, refrac_inh, inh_spiked, exc_spiked,
    train, n_rest, idle, t_now, c, learning, counts,
):
    n_exc = W.shape[1]
    for n in range(train.shape[0]):
        t_now = _step_kernel(W, theta, v_exc, v_inh, ge_exc, gi_exc, ge_inh, gi_inh, x_pre,
                             refrac_exc, refrac_inh, inh_spiked, exc_spiked,
                             train[n], True, t_now, c, learning)
        for k in range(n_exc):
            if exc_spiked[k]:
                counts[k] += 1
    for n in range(n_rest):
        t_now = _step_kernel(W, theta, v_exc, v_inh, ge_exc, gi_exc, ge_inh, gi_inh, x_pre,
                             refrac_exc, refrac_inh, inh_spiked, exc_spiked,
                             idle, False, t_now, c, learning)
        for k in range(n_exc):
            if exc_spiked[k]:
                counts[k] += 1
    return t_now


def _kernel_args(state: NetworkState):
    if state._scratch is None or state._scratch.shape[0] != state.n_exc:
        state._scratch = np.zeros(state.n_exc, dtype=np.bool_)
    return (
        state.W, state.theta, state.v_exc, state.v_inh, state.ge_exc, state.gi_exc,
        state.ge_inh, state.gi_inh, state.x_pre, state.refrac_exc, state.refrac_inh,
        state.inh_spiked, state._scratch,
    )


def step(state: NetworkState, input_spikes: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Advance the network by one time step.

    Returns the indices of the excitatory and inhibitory neurons that fired.
    STDP and threshold adaptation follow ``state.learning_enabled``.
    """
    _check_dt(state, dt)
    spikes = np.ascontiguousarray(input_spikes, dtype=np.bool_)
    if spikes.shape != (state.n_input,):
        raise ValueError(f"input_spikes must have shape ({state.n_input},), got {spikes.shape}")
    args = _kernel_args(state)
    state.t_now = _step_kernel(*args, spikes, True, state.t_now,
                               _constants(state, dt), state.learning_enabled)
    return np.flatnonzero(state._scratch), np.flatnonzero(state.inh_spiked)


def present(
    state: NetworkState,
    spike_train: np.ndarray,
    t_present: float,
    t_rest: float,
    learning: bool,
    dt: float = 0.5,
) -> SpikeRecord:
    """Show one input for ``t_present`` ms, then let the network rest for ``t_rest`` ms.

    ``spike_train`` is a boolean ``(steps, n_input)`` matrix; only its first
    ``ceil(t_present / dt)`` rows are used. When ``learning`` is set, STDP
    and homeostasis run during the presentation and the weights are
    normalized once afterwards. The adaptive threshold is never reset.
    """
    _check_dt(state, dt)
    n_present = math.ceil(t_present / dt - _T_EPS)
    n_rest = math.ceil(t_rest / dt - _T_EPS) if t_rest > 0 else 0
    train = np.ascontiguousarray(spike_train, dtype=np.bool_)
    if train.ndim != 2 or train.shape[1] != state.n_input:
        raise ValueError(f"spike_train must be (steps, {state.n_input}), got {train.shape}")
    if train.shape[0] < n_present:
        raise ValueError(f"spike_train has {train.shape[0]} steps, presentation needs {n_present}")
    train = train[:n_present]

    state.learning_enabled = bool(learning)
    counts = np.zeros(state.n_exc, dtype=np.int64)
    args = _kernel_args(state)
    idle = np.zeros(state.n_input, dtype=np.bool_)
    state.t_now = _present_kernel(*args, train, n_rest, idle, state.t_now,
                                  _constants(state, dt), state.learning_enabled, counts)
    if learning:
        normalize_weights(state)
    return SpikeRecord(counts)
