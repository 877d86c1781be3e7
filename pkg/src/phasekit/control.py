"""Cycle-to-cycle combustion-phasing controllers.

Two strategies act on the same model structure

    y = u + alpha*x1 + beta*x2

with y the measured CA50, u the commanded injection angle, x1 the
exponential ignition-delay state (per RPM and per unit alpha), x2 the
dilution offset state, alpha = N*phi^(-c3) and beta = phi^c8.

* Adaptive feedback: a deadbeat inversion at observed states, with the
  states corrected every cycle by a gradient-descent observer whose
  learning rate 1/(alpha^2 + beta^2) zeroes the model-output error in a
  single update.
* Feedforward inversion: solve the closed-form model directly for u,
  approximating the injection-time cylinder volume by the TDC volume and
  the residual fraction by a flat average, so no CA50 feedback is needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .engine import (
    DEFAULT_GEOMETRY,
    DEFAULT_RESIDUAL_FRACTION,
    EngineGeometry,
    polytropic_state,
)
from .model import DEFAULT_PARAMS, ModelParams, OperatingCondition

SOI_BOUNDS_DEFAULT = (-20.0, 20.0)  # actuator authority [deg aTDC]


@dataclass(frozen=True)
class ControllerState:
    """Observer state of the adaptive loop for one cycle."""

    x1_hat: float  # ignition-delay state [deg/(RPM * unit alpha)]
    x2_hat: float  # dilution offset state [deg]
    alpha: float  # [RPM]
    beta: float  # [-]

    @property
    def eta(self) -> float:
        """Observer learning rate 1/(alpha^2 + beta^2)."""
        return 1.0 / (self.alpha**2 + self.beta**2)


@dataclass(frozen=True)
class ControlCommand:
    soi: float  # commanded injection angle [deg aTDC]
    ca50_ref: float  # reference the command was computed for [deg aTDC]
    saturated: bool = False  # True when the raw command was clamped


def alpha_beta(n: float, phi: float,
               params: ModelParams = DEFAULT_PARAMS) -> tuple[float, float]:
    """Output-map gains from the measured speed and equivalence ratio:
    alpha = N*phi^(-c3), beta = phi^c8."""
    if n <= 0.0 or phi <= 0.0:
        raise ValueError(f"need n > 0 and phi > 0, got n={n}, phi={phi}")
    return n * phi ** (-params.c3), phi**params.c8


def _clamp(value: float, bounds: tuple[float, float]) -> tuple[float, bool]:
    lo, hi = bounds
    if value < lo:
        return lo, True
    if value > hi:
        return hi, True
    return value, False


def adaptive_soi(state: ControllerState, ca50_ref: float,
                 bounds: tuple[float, float] = SOI_BOUNDS_DEFAULT) -> ControlCommand:
    """Deadbeat input u = y_d - alpha*x1_hat - beta*x2_hat, clamped to the
    actuator bounds with the saturation flagged."""
    raw = ca50_ref - state.alpha * state.x1_hat - state.beta * state.x2_hat
    soi, saturated = _clamp(raw, bounds)
    return ControlCommand(soi=soi, ca50_ref=ca50_ref, saturated=saturated)


def observer_update(state: ControllerState, y_measured: float,
                    y_desired: float) -> ControllerState:
    """One gradient-descent correction of the observed states.

    x1 += alpha/(alpha^2+beta^2) * (y - y_d), likewise for x2 with beta.
    After the update the model-output error alpha*x1~ + beta*x2~ against
    constant true states is exactly zero.
    """
    innovation = y_measured - y_desired
    eta = state.eta
    return replace(
        state,
        x1_hat=state.x1_hat + eta * state.alpha * innovation,
        x2_hat=state.x2_hat + eta * state.beta * innovation,
    )


def observer_init(cond: OperatingCondition, params: ModelParams = DEFAULT_PARAMS,
                  geom: EngineGeometry = DEFAULT_GEOMETRY,
                  x_r_bar: float = DEFAULT_RESIDUAL_FRACTION) -> ControllerState:
    """Seed the observer from the model at a nominal condition.

    x1 from the delay-state formula with the compression state evaluated at
    TDC, x2 from the dilution formula with X_d = EGR + x_r_bar.  Seeding
    from the model instead of zeros keeps the first commanded cycles close
    and makes settling counts meaningful.
    """
    p0, t0 = polytropic_state(0.0, cond.ivc, params.kc, geom)
    x1 = (params.c1 * cond.egr + params.c2) * math.exp(params.c4 * p0**params.c5 / t0)
    x2 = params.c9 * (1.0 + cond.egr + x_r_bar) ** params.c7
    alpha, beta = alpha_beta(cond.n, cond.phi, params)
    return ControllerState(x1_hat=x1, x2_hat=x2, alpha=alpha, beta=beta)


def lyapunov_value(y_desired: float, y_measured: float) -> float:
    """Tracking-error Lyapunov function (y_d - y)^2."""
    return (y_desired - y_measured) ** 2


def ff_soi(ca50_ref: float, cond: OperatingCondition,
           params: ModelParams = DEFAULT_PARAMS,
           geom: EngineGeometry = DEFAULT_GEOMETRY,
           x_r_bar: float = DEFAULT_RESIDUAL_FRACTION,
           bounds: tuple[float, float] = SOI_BOUNDS_DEFAULT) -> ControlCommand:
    """Feedforward injection angle by inverting the closed-form CA50 model.

    The injection-time compression state is approximated by the TDC state
    (injection lands near TDC, where the volume barely changes) and the
    residual fraction by the flat average ``x_r_bar``, so the inverse
    needs no iteration:

    SOI = CA50_ref - (c1*EGR + c2)*N*phi^(-c3)*exp(c4*p0^c5/t0)
                   - c9*(1 + EGR + x_r_bar)^c7*phi^c8
    """
    p0, t0 = polytropic_state(0.0, cond.ivc, params.kc, geom)
    delay = (params.c1 * cond.egr + params.c2) * cond.n * cond.phi ** (-params.c3) \
        * math.exp(params.c4 * p0**params.c5 / t0)
    offset = params.c9 * (1.0 + cond.egr + x_r_bar) ** params.c7 * cond.phi**params.c8
    soi, saturated = _clamp(ca50_ref - delay - offset, bounds)
    return ControlCommand(soi=soi, ca50_ref=ca50_ref, saturated=saturated)


class AdaptiveController:
    """Closed-loop CA50 controller: deadbeat inversion plus state observer.

    Protocol per engine cycle: call :meth:`command` with the latched
    reference and the conditions measured on the previous cycle, actuate,
    then call :meth:`observe` with the measured CA50 once the cycle has
    burned.  The observer correction uses the same (alpha, beta, reference)
    the command was computed with.  Single-owner object; not thread-safe.
    """

    def __init__(self, nominal: OperatingCondition,
                 params: ModelParams = DEFAULT_PARAMS,
                 geom: EngineGeometry = DEFAULT_GEOMETRY,
                 x_r_bar: float = DEFAULT_RESIDUAL_FRACTION,
                 bounds: tuple[float, float] = SOI_BOUNDS_DEFAULT,
                 innovation_deadband: float = 0.0):
        self.params = params
        self.geom = geom
        self.bounds = bounds
        # Innovations no larger than the deadband are indistinguishable
        # from actuation rounding; chasing them only dithers the command
        # by a full quantum.  Half the SOI quantum is the natural setting;
        # zero (the default) recovers the pure adaptation law.
        self.innovation_deadband = innovation_deadband
        self.state = observer_init(nominal, params, geom, x_r_bar)
        self._pending_ref: float | None = None

    def command(self, ca50_ref: float,
                measured: OperatingCondition | None = None) -> ControlCommand:
        if measured is not None:
            alpha, beta = alpha_beta(measured.n, measured.phi, self.params)
            self.state = replace(self.state, alpha=alpha, beta=beta)
        cmd = adaptive_soi(self.state, ca50_ref, self.bounds)
        self._pending_ref = ca50_ref
        return cmd

    def observe(self, ca50_measured: float | None) -> None:
        """Feed back the measured CA50 of the cycle just completed.

        ``None`` (no combustion: fuel cut or misfire) leaves the state
        untouched; the observer still updates on saturated cycles so the
        commanded/actuated gap cannot wind the states up.
        """
        if ca50_measured is None or self._pending_ref is None:
            return
        if abs(ca50_measured - self._pending_ref) <= self.innovation_deadband:
            return
        self.state = observer_update(self.state, ca50_measured, self._pending_ref)

    def state_snapshot(self) -> ControllerState:
        return self.state


class FeedforwardController:
    """Open-loop CA50 controller: pure model inversion, no feedback."""

    def __init__(self, params: ModelParams = DEFAULT_PARAMS,
                 geom: EngineGeometry = DEFAULT_GEOMETRY,
                 x_r_bar: float = DEFAULT_RESIDUAL_FRACTION,
                 bounds: tuple[float, float] = SOI_BOUNDS_DEFAULT):
        self.params = params
        self.geom = geom
        self.x_r_bar = x_r_bar
        self.bounds = bounds
        self._last_cond: OperatingCondition | None = None

    def command(self, ca50_ref: float,
                measured: OperatingCondition | None = None) -> ControlCommand:
        if measured is not None:
            self._last_cond = measured
        if self._last_cond is None:
            raise ValueError("feedforward controller needs an operating condition")
        return ff_soi(ca50_ref, self._last_cond, self.params, self.geom,
                      self.x_r_bar, self.bounds)

    def observe(self, ca50_measured: float | None) -> None:
        return None

    def state_snapshot(self) -> None:
        return None
