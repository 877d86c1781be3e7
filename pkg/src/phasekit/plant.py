"""Cycle-discrete surrogate engine plant.

Stands in for a high-fidelity engine model when exercising the phasing
controllers: each call to :meth:`EnginePlant.step_cycle` realizes one
four-stroke cycle.  Combustion truth is the full ignition-delay integral
with the dynamic compression trace plus the Wiebe burn curve (optionally
with perturbed plant-side constants, reproducing the structural mismatch
between a controller model and the engine it drives).  The plant also
applies the actuation quantum, the no-fuel startup cycles, and first-order
lag of the in-cylinder intake state behind the manifold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .engine import (
    DEFAULT_GEOMETRY,
    DEFAULT_RESIDUAL_FRACTION,
    EngineGeometry,
    IvcState,
    ManifoldMap,
    polytropic_state,
)
from .model import (
    DEFAULT_PARAMS,
    DEFAULT_WIEBE,
    MisfireError,
    ModelParams,
    OperatingCondition,
    WiebeParams,
    burn_duration,
    ca50_from_wiebe,
    soc_full_integral,
    soc_simplified,
)
from .control import ControlCommand


@dataclass(frozen=True)
class Ramp:
    """Piecewise channel schedule: constant, then a half-cosine ramp of
    ``duration`` seconds starting at ``start``, then constant.

    ``duration = 0`` degenerates to a step that switches strictly after
    ``start`` (a value generator sampled exactly at the switch time still
    reports the initial value).
    """

    initial: float
    final: float = None  # type: ignore[assignment]
    start: float = 0.0
    duration: float = 0.0

    def __post_init__(self) -> None:
        if self.final is None:
            object.__setattr__(self, "final", self.initial)
        if self.duration < 0.0:
            raise ValueError(f"ramp duration must be >= 0, got {self.duration}")

    def value(self, t: float) -> float:
        if t <= self.start:
            return self.initial
        if self.duration == 0.0 or t >= self.start + self.duration:
            return self.final
        s = (t - self.start) / self.duration
        # half-cosine: C1 blend, exact midpoint mean of the endpoints
        return self.initial + (self.final - self.initial) * 0.5 * (1.0 - math.cos(math.pi * s))


@dataclass(frozen=True)
class ProfileValues:
    n: float
    egr: float
    phi: float
    p_man: float  # [bar]
    t_man: float  # [K]
    ca50_ref: float


@dataclass(frozen=True)
class TransientProfile:
    """Per-channel schedules for a transient test."""

    n: Ramp
    egr: Ramp
    phi: Ramp
    p_man: Ramp
    t_man: Ramp
    ca50_ref: Ramp

    def eval(self, t: float) -> ProfileValues:
        return ProfileValues(
            n=self.n.value(t), egr=self.egr.value(t), phi=self.phi.value(t),
            p_man=self.p_man.value(t), t_man=self.t_man.value(t),
            ca50_ref=self.ca50_ref.value(t))


def profile_eval(profile: TransientProfile, t: float) -> ProfileValues:
    """Functional alias for :meth:`TransientProfile.eval`."""
    return profile.eval(t)


@dataclass(frozen=True)
class NoiseConfig:
    """Per-channel Gaussian noise standard deviations (all default 0)."""

    ca50: float = 0.0  # measurement noise on CA50 [deg]
    p_ivc: float = 0.0  # process noise on the IVC pressure [bar]
    t_ivc: float = 0.0  # process noise on the IVC temperature [K]

    @property
    def any(self) -> bool:
        return self.ca50 > 0.0 or self.p_ivc > 0.0 or self.t_ivc > 0.0


@dataclass(frozen=True)
class PlantConfig:
    geom: EngineGeometry = DEFAULT_GEOMETRY
    true_params: ModelParams = DEFAULT_PARAMS  # plant-side constants
    wiebe: WiebeParams = DEFAULT_WIEBE
    soi_quantum: float = 0.1  # actuation precision [deg]; 0 disables
    fuel_delay_cycles: int = 2  # no-combustion startup cycles
    lag_tau: float = 0.2  # IVC-state lag time constant [s]; 0 disables
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    x_r: float = DEFAULT_RESIDUAL_FRACTION  # plant residual fraction
    combustion: str = "integral"  # "integral" | "closed-form"
    integral_step: float = 0.1  # quadrature step of the plant truth [deg]
    manifold_map: ManifoldMap = field(default_factory=ManifoldMap)

    def __post_init__(self) -> None:
        if self.soi_quantum < 0.0:
            raise ValueError("soi_quantum must be >= 0")
        if self.fuel_delay_cycles < 0:
            raise ValueError("fuel_delay_cycles must be >= 0")
        if self.lag_tau < 0.0:
            raise ValueError("lag_tau must be >= 0")
        if self.combustion not in ("integral", "closed-form"):
            raise ValueError(f"unknown combustion model {self.combustion!r}")


@dataclass(frozen=True)
class CycleRecord:
    """Everything recorded about one engine cycle."""

    cycle_index: int
    time_s: float  # cycle start time
    soi_cmd: float
    soi_actuated: float
    soc: float | None
    ca50: float | None
    ca50_ref: float
    cond: OperatingCondition  # as realized by the plant
    x1_hat: float | None = None  # controller snapshot, filled by the harness
    x2_hat: float | None = None
    lyapunov: float | None = None
    fault: str = "none"  # none | misfire | saturation


def quantize_soi(soi: float, quantum: float) -> float:
    """Round to the nearest actuation quantum, ties away from zero."""
    if quantum <= 0.0:
        return soi
    return math.copysign(math.floor(abs(soi) / quantum + 0.5) * quantum, soi)


def ivc_lag_update(current: float, target: float, dt: float, tau: float) -> float:
    """First-order relaxation of one scalar channel over a step of ``dt``
    seconds; ``tau = 0`` snaps to the target."""
    if dt < 0.0:
        raise ValueError(f"dt must be >= 0, got {dt}")
    if tau <= 0.0:
        return target
    return current + (target - current) * -math.expm1(-dt / tau)


class EnginePlant:
    """Cycle-stepped surrogate engine driven by a transient profile.

    Deterministic for a given (config, profile, seed, command sequence).
    One instance per simulation loop; not safe for concurrent stepping.
    """

    def __init__(self, config: PlantConfig, profile: TransientProfile, seed: int = 0):
        self.config = config
        self.profile = profile
        self.rng = np.random.default_rng(seed)
        self.time = 0.0
        self.cycle_index = 0
        self._last_cond: OperatingCondition | None = None
        # lag states start at the t=0 targets (steady pre-history)
        first = profile.eval(0.0)
        p0, t0 = config.manifold_map.apply(first.p_man, first.t_man)
        self._p_ivc = p0
        self._t_ivc = t0
        self._egr = first.egr
        self._last_update = 0.0

    @property
    def last_condition(self) -> OperatingCondition | None:
        """Condition realized on the most recent cycle (the controller's
        one-cycle-delayed measurement)."""
        return self._last_cond

    def initial_condition(self) -> OperatingCondition:
        """Nominal condition at t = 0, for controller initialization."""
        first = self.profile.eval(0.0)
        p0, t0 = self.config.manifold_map.apply(first.p_man, first.t_man)
        return OperatingCondition(
            n=first.n, egr=first.egr, phi=first.phi,
            ivc=IvcState(p_ivc=p0, t_ivc=t0, v_ivc=self.config.geom.v_ivc),
            x_r=self.config.x_r, soi=0.0)

    def _realize_condition(self, soi_actuated: float) -> OperatingCondition:
        targets = self.profile.eval(self.time)
        p_target, t_target = self.config.manifold_map.apply(targets.p_man, targets.t_man)
        dt = self.time - self._last_update
        tau = self.config.lag_tau
        self._p_ivc = ivc_lag_update(self._p_ivc, p_target, dt, tau)
        self._t_ivc = ivc_lag_update(self._t_ivc, t_target, dt, tau)
        self._egr = ivc_lag_update(self._egr, targets.egr, dt, tau)
        self._last_update = self.time

        p_ivc, t_ivc = self._p_ivc, self._t_ivc
        if self.config.noise.p_ivc > 0.0:
            p_ivc += self.rng.normal(0.0, self.config.noise.p_ivc)
        if self.config.noise.t_ivc > 0.0:
            t_ivc += self.rng.normal(0.0, self.config.noise.t_ivc)
        return OperatingCondition(
            n=targets.n, egr=self._egr, phi=targets.phi,
            ivc=IvcState(p_ivc=p_ivc, t_ivc=t_ivc, v_ivc=self.config.geom.v_ivc),
            x_r=self.config.x_r, soi=soi_actuated)

    def _combust(self, cond: OperatingCondition) -> tuple[float, float]:
        """Plant-truth (SOC, CA50) for the realized condition."""
        cfg = self.config
        if cfg.combustion == "integral":
            soc = soc_full_integral(cond, cfg.true_params, cfg.geom, cfg.integral_step)
        else:
            # closed-form truth with the compression state frozen at TDC;
            # exactly invertible by the feedforward law
            p0, t0 = polytropic_state(0.0, cond.ivc, cfg.true_params.kc, cfg.geom)
            soc = soc_simplified(cond, p0, t0, cfg.true_params)
        bd = burn_duration(cond.x_d, cond.phi, cfg.wiebe, cfg.true_params)
        return soc, ca50_from_wiebe(soc, bd, cfg.wiebe)

    def step_cycle(self, cmd: ControlCommand) -> CycleRecord:
        """Run one cycle under the commanded injection angle.

        Quantizes the command, realizes the operating condition (profile
        plus lag plus noise), burns unless within the startup fuel cut,
        and advances time by the four-stroke period 120/N seconds.
        Misfire is recorded as a fault, never raised.
        """
        if not math.isfinite(cmd.soi):
            raise ValueError(f"non-finite SOI command {cmd.soi}")
        soi_actuated = quantize_soi(cmd.soi, self.config.soi_quantum)
        cond = self._realize_condition(soi_actuated)

        soc: float | None
        ca50: float | None
        fault = "saturation" if cmd.saturated else "none"
        if self.cycle_index < self.config.fuel_delay_cycles:
            soc = ca50 = None
        else:
            try:
                soc, ca50 = self._combust(cond)
                if self.config.noise.ca50 > 0.0:
                    ca50 += self.rng.normal(0.0, self.config.noise.ca50)
            except MisfireError:
                soc = ca50 = None
                fault = "misfire"

        record = CycleRecord(
            cycle_index=self.cycle_index,
            time_s=self.time,
            soi_cmd=cmd.soi,
            soi_actuated=soi_actuated,
            soc=soc,
            ca50=ca50,
            ca50_ref=cmd.ca50_ref,
            cond=cond,
            fault=fault,
        )
        self._last_cond = cond
        self.time += 120.0 / cond.n  # four-stroke cycle period
        self.cycle_index += 1
        return record
