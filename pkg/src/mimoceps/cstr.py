"""Non-isothermal CSTR simulator with PID + decoupler control and linear fouling.

A single first-order exothermic reaction A -> B in a stirred tank: the states
are reactant concentration CA (mol/L) and temperature T (K); the manipulated
variables are feed flow q (L/min) and jacket temperature Tj (K).  Fouling
enters as a linear decrease of the heat-transfer coefficient UA after an
onset time.  The module generates the four case-study datasets
(normal/faulty x open-loop/closed-loop) used for cepstral fault
fingerprinting.
"""

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .exceptions import NumericalError, ValidationError
from .lti import SignalRecord


@dataclass(frozen=True)
class CstrConfig:
    """Physical parameters, operating point, noise levels and run settings.

    Defaults reproduce the case study: reactor volume 100 L, Arrhenius
    kinetics with k0 = e^13.4 1/min and E/R = 5360 K, exothermic heat
    (-dH) = 17835.821 J/mol, and the operating point CA* = 0.2 mol/L,
    T* = 446 K, q* = 100 L/min, Tj* = 419 K.
    """

    volume: float = 100.0             # L
    k0: float = math.exp(13.4)        # 1/min
    e_over_r: float = 5360.0          # K
    heat_of_reaction: float = 17835.821  # (-dH), J/mol
    rho: float = 1000.0               # g/L
    cp: float = 0.239                 # J/g/K
    ua0: float = 11950.0              # J/min/K

    ca_star: float = 0.2              # mol/L
    t_star: float = 446.0             # K
    q_star: float = 100.0             # L/min
    tj_star: float = 419.0            # K
    tf_star: float = 400.0            # K
    caf_star: float = 1.0             # mol/L

    var_v1: float = 0.01              # system noise on dCA/dt
    var_v2: float = 0.01              # system noise on dT/dt
    var_ca: float = 1e-5              # measurement noise variances
    var_t: float = 0.005
    var_q: float = 1e-6
    var_tj: float = 1e-6

    fouling_start: float = 5000.0     # min
    fouling_slope: float = 0.8365     # (J/min/K) per min

    controller_on: bool = True
    kp: float = 1.0
    kd: float = 0.1
    ki: float = 10.0
    decoupler: tuple = ((5.0, 1.0), (1.0, 2.0))
    integral_clamp: tuple = (1000.0, 4190.0)  # |Ki * integral| cap, 10x actuator nominals

    sample_time: float = 1.0          # min
    n_samples: int = 10000
    internal_step: float = 0.05       # min, RK4 step
    seed: int = 0

    def __post_init__(self):
        positive = ("volume", "k0", "e_over_r", "heat_of_reaction", "rho", "cp",
                    "ua0", "sample_time", "internal_step")
        for name in positive:
            if getattr(self, name) <= 0:
                raise ValidationError(f"CstrConfig.{name} must be positive")
        if self.n_samples < 1:
            raise ValidationError("CstrConfig.n_samples must be at least 1")
        dec = tuple(tuple(float(v) for v in row) for row in self.decoupler)
        if len(dec) != 2 or any(len(r) != 2 for r in dec):
            raise ValidationError("decoupler must be a 2x2 matrix")
        object.__setattr__(self, "decoupler", dec)
        object.__setattr__(self, "integral_clamp",
                           tuple(float(v) for v in self.integral_clamp))

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValidationError(
                f"unknown CstrConfig field(s): {', '.join(sorted(unknown))}"
            )
        return cls(**data)


def ua_schedule(t, cfg):
    """Heat-transfer coefficient UA(t): constant, then linear fouling decline."""
    if t < 0:
        raise ValidationError("time must be non-negative")
    ua = cfg.ua0
    if t > cfg.fouling_start:
        ua = cfg.ua0 - cfg.fouling_slope * (t - cfg.fouling_start)
    if ua <= 0:
        raise ValidationError(
            f"fouling schedule gives non-physical UA <= 0 at t = {t} min"
        )
    return ua


def cstr_rhs(state, inputs, ua, noise, cfg):
    """Reactor balance equations: (dCA/dt, dT/dt).

    ``state`` is (CA, T) with T in Kelvin (> 0), ``inputs`` is
    (q, Tj, Tf, CAf), ``noise`` the held system-noise pair (v1, v2).
    """
    ca, temp = state
    q, tj, tf, caf = inputs
    v1, v2 = noise
    if temp <= 0:
        raise ValidationError("temperature must be positive (Kelvin)")
    arrhenius_arg = -cfg.e_over_r / temp
    if arrhenius_arg > 50.0:
        raise NumericalError("Arrhenius term overflow")
    rate = cfg.k0 * math.exp(arrhenius_arg)
    dca = q / cfg.volume * (caf - ca) - ca * rate + v1
    dtemp = (q / cfg.volume * (tf - temp)
             + cfg.heat_of_reaction / (cfg.rho * cfg.cp) * ca * rate
             + ua / (cfg.volume * cfg.rho * cfg.cp) * (tj - temp)
             + v2)
    if not (math.isfinite(dca) and math.isfinite(dtemp)):
        raise NumericalError("non-finite derivative in reactor equations")
    return dca, dtemp


@dataclass
class PidState:
    """Integrator and previous-error memory of the two PID channels."""

    integral_c: float = 0.0
    integral_t: float = 0.0
    prev_c: float = 0.0
    prev_t: float = 0.0


def pid_decoupler_step(err_c, err_t, state, cfg, dt=None):
    """One discrete PID + decoupler update; returns ((q, Tj), new_state).

    Each channel applies Kp + Kd s + Ki/s discretized with a
    backward-difference derivative and trapezoidal integral over ``dt``
    (defaulting to the sample time); the constant decoupler mixes the two
    channel outputs into deviations added to the nominal actuators
    (q*, Tj*).  The integral contribution is clamped to +-10x the nominal
    actuator values (anti-windup).
    """
    dt = cfg.sample_time if dt is None else dt
    integral_c = state.integral_c + 0.5 * dt * (err_c + state.prev_c)
    integral_t = state.integral_t + 0.5 * dt * (err_t + state.prev_t)
    if cfg.ki > 0:
        lim_c = cfg.integral_clamp[0] / cfg.ki
        lim_t = cfg.integral_clamp[1] / cfg.ki
        integral_c = min(max(integral_c, -lim_c), lim_c)
        integral_t = min(max(integral_t, -lim_t), lim_t)
    out_c = (cfg.kp * err_c
             + cfg.kd * (err_c - state.prev_c) / dt
             + cfg.ki * integral_c)
    out_t = (cfg.kp * err_t
             + cfg.kd * (err_t - state.prev_t) / dt
             + cfg.ki * integral_t)
    dec = cfg.decoupler
    q = cfg.q_star + dec[0][0] * out_c + dec[0][1] * out_t
    tj = cfg.tj_star + dec[1][0] * out_c + dec[1][1] * out_t
    new_state = PidState(integral_c, integral_t, err_c, err_t)
    return (q, tj), new_state


def _rk4_step(state, inputs, t, h, noise, cfg):
    """One fixed-step RK4 update of the reactor state."""
    ca, temp = state
    ua1 = ua_schedule(t, cfg)
    ua2 = ua_schedule(t + 0.5 * h, cfg)
    ua4 = ua_schedule(t + h, cfg)
    k1 = cstr_rhs((ca, temp), inputs, ua1, noise, cfg)
    k2 = cstr_rhs((ca + 0.5 * h * k1[0], temp + 0.5 * h * k1[1]),
                  inputs, ua2, noise, cfg)
    k3 = cstr_rhs((ca + 0.5 * h * k2[0], temp + 0.5 * h * k2[1]),
                  inputs, ua2, noise, cfg)
    k4 = cstr_rhs((ca + h * k3[0], temp + h * k3[1]),
                  inputs, ua4, noise, cfg)
    return (ca + h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
            temp + h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]))


def generate_dataset(cfg):
    """Simulate one run and return the measured (u, y) records.

    The control law is continuous-time; its discrete realization runs at the
    internal integration step (a 1-minute update rate is unstable against
    the reactor's sub-minute time constants).  The controller acts on the
    measured outputs with errors setpoint-minus-measurement.  System noise
    is redrawn each sample and held constant across the interval (zero-order
    hold), as is the measurement noise entering the controller.  u holds
    (q, Tj) and y holds (CA, T), recorded every ``cfg.sample_time`` minutes.
    """
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_samples
    v = rng.normal(0.0, [[math.sqrt(cfg.var_v1)], [math.sqrt(cfg.var_v2)]],
                   size=(2, n))
    eta_ca = rng.normal(0.0, math.sqrt(cfg.var_ca), size=n)
    eta_t = rng.normal(0.0, math.sqrt(cfg.var_t), size=n)
    eta_q = rng.normal(0.0, math.sqrt(cfg.var_q), size=n)
    eta_tj = rng.normal(0.0, math.sqrt(cfg.var_tj), size=n)

    n_sub = max(1, int(round(cfg.sample_time / cfg.internal_step)))
    h = cfg.sample_time / n_sub
    u = np.empty((2, n))
    y = np.empty((2, n))
    ca, temp = cfg.ca_star, cfg.t_star
    pid = PidState()
    q, tj = cfg.q_star, cfg.tj_star
    for k in range(n):
        t = k * cfg.sample_time
        noise = (v[0, k], v[1, k])
        recorded = False
        for s in range(n_sub):
            if cfg.controller_on:
                (q, tj), pid = pid_decoupler_step(
                    cfg.ca_star - (ca + eta_ca[k]),
                    cfg.t_star - (temp + eta_t[k]),
                    pid, cfg, dt=h,
                )
            else:
                q, tj = cfg.q_star, cfg.tj_star
            if not recorded:
                u[0, k] = q + eta_q[k]
                u[1, k] = tj + eta_tj[k]
                y[0, k] = ca + eta_ca[k]
                y[1, k] = temp + eta_t[k]
                recorded = True
            ca, temp = _rk4_step((ca, temp), (q, tj, cfg.tf_star, cfg.caf_star),
                                 t + s * h, h, noise, cfg)
        if not (math.isfinite(ca) and math.isfinite(temp)):
            raise NumericalError(f"reactor state diverged at sample {k}")
    u_rec = SignalRecord(u, cfg.sample_time, ("q", "Tj"))
    y_rec = SignalRecord(y, cfg.sample_time, ("CA", "T"))
    return u_rec, y_rec


def normal_faulty_split(u, y, cfg, guard=100):
    """Split one run into the pre-fault and post-fault analysis windows.

    Drops ``2 * guard`` samples around the fouling onset: the normal window
    is [0, onset - guard) and the faulty window [onset + guard, end).
    """
    onset = int(round(cfg.fouling_start / cfg.sample_time))
    if not guard < onset < u.n_samples - guard:
        raise ValidationError("fouling onset must lie inside the run")
    normal = (u.window(0, onset - guard), y.window(0, onset - guard))
    faulty = (u.window(onset + guard, u.n_samples),
              y.window(onset + guard, y.n_samples))
    return normal, faulty


def case_study_datasets(cfg=None):
    """Generate the four scenario datasets: {normal, faulty} x {CL, OL}.

    Two 10000-sample runs are simulated (controller on and off, with
    scenario-derived seeds) and each is split around the fault onset.
    Returns a dict mapping scenario names ('normal_cl', 'faulty_cl',
    'normal_ol', 'faulty_ol') to (u, y) record pairs.
    """
    import dataclasses

    cfg = cfg or CstrConfig()
    cl_cfg = dataclasses.replace(cfg, controller_on=True, seed=cfg.seed)
    ol_cfg = dataclasses.replace(cfg, controller_on=False, seed=cfg.seed + 1)
    out = {}
    for tag, c in (("cl", cl_cfg), ("ol", ol_cfg)):
        u, y = generate_dataset(c)
        (un, yn), (uf, yf) = normal_faulty_split(u, y, c)
        out[f"normal_{tag}"] = (un, yn)
        out[f"faulty_{tag}"] = (uf, yf)
    return out
