"""Combustion-phasing model for a direct-injection CI engine.

Start of combustion comes from an ignition-delay integral: combustion
begins once the accumulated Arrhenius reaction rate between injection and
the current crank angle reaches unity.  A closed-form variant freezes the
in-cylinder state at its start-of-injection value, which removes the
integral and makes the model invertible for control.  The 50%-burned angle
adds a burn-duration term through the Wiebe mass-fraction-burned curve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .engine import DEFAULT_GEOMETRY, EngineGeometry, IvcState, cylinder_volume, polytropic_state


class MisfireError(RuntimeError):
    """Ignition-delay integral failed to reach 1 before exhaust valve opening."""

    def __init__(self, soi: float, accumulated: float, evo_angle: float):
        self.soi = soi
        self.accumulated = accumulated
        self.evo_angle = evo_angle
        super().__init__(
            f"no ignition: integral reached {accumulated:.3g} (<1) between "
            f"SOI={soi:g} and EVO={evo_angle:g} deg aTDC")


@dataclass(frozen=True)
class ModelParams:
    """Calibrated constants of the phasing model.

    c1, c2 scale the EGR dependence of the delay kernel [1/(RPM*deg)];
    c3 is the equivalence-ratio exponent of the kernel; c4 [K*bar^-c5] and
    c5 form the pressure/temperature term; c7 and c8 are the dilution and
    equivalence-ratio exponents of the burn-duration law; c9 [deg] is the
    composite 50%-burn offset scale; kc is the polytropic exponent used to
    evolve the IVC state.
    """

    c1: float = 2.000e-6
    c2: float = 2.705e-6
    c3: float = -0.128
    c4: float = 10643.118
    c5: float = -0.312
    c7: float = 0.371
    c8: float = 0.0165
    c9: float = 4.784
    kc: float = 1.176

    def __post_init__(self) -> None:
        if self.c2 <= 0.0:
            raise ValueError(f"c2 must be > 0, got {self.c2}")
        # keep the delay kernel positive over the whole admissible EGR range
        if self.c1 * (1.0 - 1e-12) + self.c2 <= 0.0:
            raise ValueError("c1*EGR + c2 must stay > 0 for EGR in [0, 1)")
        if self.c9 <= 0.0:
            raise ValueError(f"c9 must be > 0, got {self.c9}")
        if not 1.0 < self.kc < 1.4:
            raise ValueError(f"kc must lie in (1, 1.4), got {self.kc}")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f.name) for f in fields(self)])

    @classmethod
    def from_array(cls, values) -> "ModelParams":
        names = [f.name for f in fields(cls)]
        if len(values) != len(names):
            raise ValueError(f"expected {len(names)} values, got {len(values)}")
        return cls(**{n: float(v) for n, v in zip(names, values)})


DEFAULT_PARAMS = ModelParams()

PARAM_NAMES = tuple(f.name for f in fields(ModelParams))


def save_params(params: ModelParams, path: str | Path) -> None:
    """Write params as ``key=value`` lines, one per constant.

    Values are written with ``repr`` so a load round-trips every decimal
    exactly.
    """
    lines = [f"{name}={getattr(params, name)!r}" for name in PARAM_NAMES]
    Path(path).write_text("\n".join(lines) + "\n")


def load_params(path: str | Path) -> ModelParams:
    values: dict[str, float] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or key not in PARAM_NAMES:
            raise ValueError(f"{path}:{lineno}: expected '<name>=<value>' with "
                             f"name in {PARAM_NAMES}, got {line!r}")
        try:
            values[key] = float(value)
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: bad float {value!r}") from exc
    missing = set(PARAM_NAMES) - set(values)
    if missing:
        raise ValueError(f"{path}: missing parameters {sorted(missing)}")
    return ModelParams(**values)


@dataclass(frozen=True)
class WiebeParams:
    """Wiebe burn-curve shape (a, b) and burn-duration scale c6 [deg].

    Only the composite c9 = (ln2/a)^(1/b) * c6 is observable from 50%-burn
    data, so (a, b) are a modeling choice; ``from_composite`` picks c6 to
    match a given c9.
    """

    a: float = 5.0
    b: float = 2.0
    c6: float = 12.848825843969488  # matches c9=4.784 for a=5, b=2

    def __post_init__(self) -> None:
        if min(self.a, self.b, self.c6) <= 0.0:
            raise ValueError("a, b and c6 must all be > 0")

    @property
    def half_burn_factor(self) -> float:
        """(ln2/a)^(1/b): fraction of the burn duration from SOC to 50% burned."""
        return (math.log(2.0) / self.a) ** (1.0 / self.b)

    @property
    def ca50_scale(self) -> float:
        """Composite 50%-burn offset scale, the c9 this shape implies."""
        return self.half_burn_factor * self.c6

    @classmethod
    def from_composite(cls, a: float, b: float, c9: float) -> "WiebeParams":
        factor = (math.log(2.0) / a) ** (1.0 / b)
        return cls(a=a, b=b, c6=c9 / factor)


DEFAULT_WIEBE = WiebeParams()


@dataclass(frozen=True)
class OperatingCondition:
    """Per-cycle boundary conditions seen by the phasing model."""

    n: float  # engine speed [RPM]
    egr: float  # EGR mass fraction
    phi: float  # equivalence ratio
    ivc: IvcState
    x_r: float = 0.0  # residual-gas fraction
    soi: float = 0.0  # start of injection [deg aTDC]

    def __post_init__(self) -> None:
        if self.n <= 0.0:
            raise ValueError(f"engine speed must be > 0, got {self.n}")
        if not 0.0 <= self.egr <= 0.6:
            raise ValueError(f"egr must lie in [0, 0.6], got {self.egr}")
        if not 0.0 < self.phi <= 1.0:
            raise ValueError(f"phi must lie in (0, 1], got {self.phi}")
        if not 0.0 <= self.x_r < 1.0:
            raise ValueError(f"x_r must lie in [0, 1), got {self.x_r}")
        if not -20.0 <= self.soi <= 20.0:
            raise ValueError(f"soi must lie in [-20, 20] deg aTDC, got {self.soi}")

    @property
    def x_d(self) -> float:
        return self.egr + self.x_r


def arrhenius_tau(phi: float, p: float, t: float, egr: float,
                  params: ModelParams = DEFAULT_PARAMS) -> float:
    """Reaction-rate kernel of the ignition-delay integral.

    tau = phi^c3 * exp(-c4 * p^c5 / t) / (c1*egr + c2), with p in bar and
    t in K.  Larger tau means faster ignition chemistry.
    """
    if p <= 0.0 or t <= 0.0:
        raise ValueError(f"pressure and temperature must be > 0, got p={p}, t={t}")
    return phi**params.c3 * math.exp(-params.c4 * p**params.c5 / t) / (
        params.c1 * egr + params.c2)


def soc_simplified(cond: OperatingCondition, p_soi: float, t_soi: float,
                   params: ModelParams = DEFAULT_PARAMS) -> float:
    """Closed-form start of combustion [deg aTDC] with the in-cylinder state
    frozen at its injection-time value.

    SOC = SOI + (c1*EGR + c2) * N * phi^(-c3) * exp(c4 * p^c5 / t); the
    second term is the ignition delay in crank degrees.
    """
    if p_soi <= 0.0 or t_soi <= 0.0:
        raise ValueError(f"pressure and temperature must be > 0, got p={p_soi}, t={t_soi}")
    delay = (params.c1 * cond.egr + params.c2) * cond.n * cond.phi ** (-params.c3) \
        * math.exp(params.c4 * p_soi**params.c5 / t_soi)
    return cond.soi + delay


_CHUNK = 512  # integration steps evaluated per vectorized block


def soc_full_integral(cond: OperatingCondition, params: ModelParams = DEFAULT_PARAMS,
                      geom: EngineGeometry = DEFAULT_GEOMETRY, step: float = 0.1) -> float:
    """Start of combustion [deg aTDC] from the full ignition-delay integral
    with the dynamic polytropic pressure/temperature trace.

    Trapezoidal accumulation on a uniform ``step`` grid from SOI, with
    linear interpolation of the unity crossing inside the final step.
    Raises :class:`MisfireError` if the integral has not reached 1 by
    exhaust valve opening.
    """
    if step <= 0.0:
        raise ValueError(f"step must be > 0, got {step}")
    if cond.soi < geom.ivc_angle:
        raise ValueError(f"SOI={cond.soi} precedes IVC at {geom.ivc_angle}")

    v_ivc = cond.ivc.v_ivc
    scale = cond.phi**params.c3 / ((params.c1 * cond.egr + params.c2) * cond.n)

    def rate(theta: np.ndarray) -> np.ndarray:
        ratio = v_ivc / cylinder_volume(theta, geom)
        p = cond.ivc.p_ivc * ratio**params.kc
        t = cond.ivc.t_ivc * ratio ** (params.kc - 1.0)
        return scale * np.exp(-params.c4 * p**params.c5 / t)

    acc = 0.0
    start = cond.soi
    f_start = float(rate(np.asarray(start)))
    while start < geom.evo_angle:
        stop = min(start + _CHUNK * step, geom.evo_angle)
        n_steps = max(1, int(round((stop - start) / step)))
        theta = start + step * np.arange(1, n_steps + 1)
        theta[-1] = min(theta[-1], geom.evo_angle)
        f = rate(theta)
        widths = np.diff(theta, prepend=start)
        increments = 0.5 * widths * (np.concatenate(([f_start], f[:-1])) + f)
        cum = acc + np.cumsum(increments)
        crossed = np.nonzero(cum >= 1.0)[0]
        if crossed.size:
            i = int(crossed[0])
            below = acc if i == 0 else cum[i - 1]
            frac = (1.0 - below) / increments[i]
            left = start if i == 0 else theta[i - 1]
            return float(left + frac * (theta[i] - left))
        acc = float(cum[-1])
        start = float(theta[-1])
        f_start = float(f[-1])
    raise MisfireError(cond.soi, acc, geom.evo_angle)


def burn_duration(x_d: float, phi: float, wiebe: WiebeParams = DEFAULT_WIEBE,
                  params: ModelParams = DEFAULT_PARAMS) -> float:
    """10%-to-90% burn duration [deg]: c6 * (1 + x_d)^c7 * phi^c8."""
    if not 0.0 <= x_d < 1.0:
        raise ValueError(f"x_d must lie in [0, 1), got {x_d}")
    if phi <= 0.0:
        raise ValueError(f"phi must be > 0, got {phi}")
    return wiebe.c6 * (1.0 + x_d) ** params.c7 * phi**params.c8


def wiebe_mfb(theta: float, soc: float, bd: float,
              wiebe: WiebeParams = DEFAULT_WIEBE) -> float:
    """Mass fraction burned at ``theta``: 1 - exp(-a*((theta-soc)/bd)^b).

    Defined for theta >= soc; monotone non-decreasing, approaching 1.
    """
    if bd <= 0.0:
        raise ValueError(f"burn duration must be > 0, got {bd}")
    if theta < soc:
        raise ValueError(f"theta={theta} precedes SOC={soc}")
    return -math.expm1(-wiebe.a * ((theta - soc) / bd) ** wiebe.b)


def ca50_from_wiebe(soc: float, bd: float, wiebe: WiebeParams = DEFAULT_WIEBE) -> float:
    """50%-burned angle implied by the Wiebe curve: SOC + (ln2/a)^(1/b) * BD."""
    return soc + wiebe.half_burn_factor * bd


def ca50_offset(x_d: float, phi: float, params: ModelParams = DEFAULT_PARAMS) -> float:
    """SOC-to-CA50 offset [deg]: c9 * (1 + x_d)^c7 * phi^c8.

    Only the composite c9 enters; any Wiebe shape consistent with it gives
    the same offset.
    """
    if not 0.0 <= x_d < 1.0:
        raise ValueError(f"x_d must lie in [0, 1), got {x_d}")
    return params.c9 * (1.0 + x_d) ** params.c7 * phi**params.c8


def ca50_predict(cond: OperatingCondition, p_soi: float, t_soi: float,
                 params: ModelParams = DEFAULT_PARAMS) -> float:
    """Closed-form CA50 [deg aTDC]: simplified SOC plus the 50%-burn offset."""
    return soc_simplified(cond, p_soi, t_soi, params) + ca50_offset(
        cond.x_d, cond.phi, params)


def predict_phasing(cond: OperatingCondition, params: ModelParams = DEFAULT_PARAMS,
                    geom: EngineGeometry = DEFAULT_GEOMETRY) -> tuple[float, float]:
    """Convenience wrapper: (SOC, CA50) from the closed-form model with the
    injection-time state taken from the polytropic compression trace."""
    p_soi, t_soi = polytropic_state(cond.soi, cond.ivc, params.kc, geom)
    soc = soc_simplified(cond, p_soi, t_soi, params)
    return soc, soc + ca50_offset(cond.x_d, cond.phi, params)


def perturbed_params(params: ModelParams, **relative) -> ModelParams:
    """Return a copy with selected constants scaled by (1 + fraction).

    ``perturbed_params(p, c4=0.01, c9=0.04)`` scales c4 by 1.01 and c9 by
    1.04; used to build mismatched plant-side truth models.
    """
    unknown = set(relative) - set(PARAM_NAMES)
    if unknown:
        raise ValueError(f"unknown parameters {sorted(unknown)}")
    changes = {name: getattr(params, name) * (1.0 + frac)
               for name, frac in relative.items()}
    return replace(params, **changes)
