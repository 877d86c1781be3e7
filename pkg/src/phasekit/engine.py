"""Engine geometry, slider-crank kinematics, polytropic in-cylinder state
and mixture accounting.

Conventions used throughout the package: crank angle in degrees aTDC
(0 = firing TDC), pressure in bar, temperature in K, engine speed in RPM,
volumes in m^3, masses in kg per cycle per cylinder.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

# Stoichiometric air/fuel mass ratio for diesel; configurable per mixture.
AFR_STOICH_DIESEL = 14.47

# Typical trapped residual-gas fraction for a fixed-cam heavy-duty diesel;
# used as the flat estimate in the feedforward controller and as the plant
# default when no residual model is configured.
DEFAULT_RESIDUAL_FRACTION = 0.0384


@dataclass(frozen=True)
class EngineGeometry:
    """Cylinder and crank-train geometry of a four-stroke CI engine.

    Attributes
    ----------
    bore, stroke, rod_length : float
        Cylinder bore, piston stroke and connecting-rod length [m].
    compression_ratio : float
        Geometric compression ratio (> 1).
    n_cylinders : int
        Cylinder count (bookkeeping only; all volumes are per cylinder).
    ivc_angle, evo_angle : float
        Intake valve closing / exhaust valve opening [deg aTDC]. They bound
        the closed part of the cycle on which compression-state relations
        are valid.
    """

    bore: float
    stroke: float
    rod_length: float
    compression_ratio: float
    n_cylinders: int = 6
    ivc_angle: float = -148.5
    evo_angle: float = 137.0

    def __post_init__(self) -> None:
        if min(self.bore, self.stroke, self.rod_length) <= 0.0:
            raise ValueError("bore, stroke and rod_length must be > 0")
        if self.compression_ratio <= 1.0:
            raise ValueError(f"compression_ratio must be > 1, got {self.compression_ratio}")
        # slider-crank validity: rod longer than crank radius
        if self.rod_length <= self.stroke / 2.0:
            raise ValueError("rod_length must exceed stroke/2")
        if not self.ivc_angle < self.evo_angle:
            raise ValueError("ivc_angle must precede evo_angle")

    @property
    def crank_radius(self) -> float:
        return self.stroke / 2.0

    @property
    def piston_area(self) -> float:
        return math.pi / 4.0 * self.bore**2

    @property
    def displaced_volume(self) -> float:
        """Swept volume per cylinder [m^3]."""
        return self.piston_area * self.stroke

    @property
    def clearance_volume(self) -> float:
        """Volume at TDC [m^3], fixed by the compression ratio."""
        return self.displaced_volume / (self.compression_ratio - 1.0)

    @property
    def v_ivc(self) -> float:
        """Cylinder volume at intake valve closing [m^3]."""
        return float(cylinder_volume(self.ivc_angle, self))


# 12.4 L six-cylinder heavy-duty diesel (2.07 L/cyl, CR 17:1).
DEFAULT_GEOMETRY = EngineGeometry(
    bore=0.126,
    stroke=0.166,
    rod_length=0.251,
    compression_ratio=17.0,
    n_cylinders=6,
    ivc_angle=-148.5,
    evo_angle=137.0,
)

_GEOMETRY_KEYS = (
    "bore", "stroke", "rod_length", "compression_ratio",
    "n_cylinders", "ivc_angle", "evo_angle",
)


def load_geometry(path: str | Path) -> EngineGeometry:
    """Load geometry from a JSON config file.

    Recognised keys (SI units, angles in deg aTDC): ``bore``, ``stroke``,
    ``rod_length``, ``compression_ratio``, ``n_cylinders``, ``ivc_angle``,
    ``evo_angle``.  Missing optional keys fall back to the dataclass
    defaults; unknown keys are rejected so typos do not pass silently.
    """
    raw = json.loads(Path(path).read_text())
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: geometry config must be a JSON object")
    unknown = set(raw) - set(_GEOMETRY_KEYS)
    if unknown:
        raise ValueError(f"{path}: unknown geometry keys {sorted(unknown)}")
    for key in ("bore", "stroke", "rod_length", "compression_ratio"):
        if key not in raw:
            raise ValueError(f"{path}: missing required geometry key '{key}'")
    return EngineGeometry(**raw)


def save_geometry(geom: EngineGeometry, path: str | Path) -> None:
    data = {k: getattr(geom, k) for k in _GEOMETRY_KEYS}
    Path(path).write_text(json.dumps(data, indent=2) + "\n")


def cylinder_volume(theta, geom: EngineGeometry = DEFAULT_GEOMETRY):
    """Instantaneous cylinder volume [m^3] at crank angle ``theta`` [deg aTDC].

    Standard slider-crank relation with crank radius ``stroke/2``.  Accepts
    scalars or numpy arrays; periodic with 720 deg, minimum (clearance
    volume) at TDC, maximum at +-180 deg.
    """
    th = np.deg2rad(theta)
    a = geom.crank_radius
    l = geom.rod_length
    # piston pin distance from crank axis; a + l at TDC
    x = a * np.cos(th) + np.sqrt(l**2 - (a * np.sin(th)) ** 2)
    v = geom.clearance_volume + geom.piston_area * (a + l - x)
    if np.ndim(theta) == 0:
        return float(v)
    return v


@dataclass(frozen=True)
class IvcState:
    """Cylinder charge state at intake valve closing."""

    p_ivc: float  # [bar]
    t_ivc: float  # [K]
    v_ivc: float  # [m^3]

    def __post_init__(self) -> None:
        if self.p_ivc <= 0.0 or self.t_ivc <= 0.0 or self.v_ivc <= 0.0:
            raise ValueError("IVC pressure, temperature and volume must all be > 0")


def ivc_state(p_ivc: float, t_ivc: float, geom: EngineGeometry = DEFAULT_GEOMETRY) -> IvcState:
    """Build an :class:`IvcState` with the volume implied by the geometry."""
    return IvcState(p_ivc=p_ivc, t_ivc=t_ivc, v_ivc=geom.v_ivc)


@dataclass(frozen=True)
class ManifoldMap:
    """Affine map from average intake-manifold conditions to IVC conditions.

    Defaults to the identity (p_ivc = p_manifold, t_ivc = t_manifold).  The
    gains/offsets are knobs for charge heating or ram effects when a better
    estimate of the trapped state is available.
    """

    p_gain: float = 1.0
    p_offset: float = 0.0  # [bar]
    t_gain: float = 1.0
    t_offset: float = 0.0  # [K]

    def apply(self, p_manifold: float, t_manifold: float) -> tuple[float, float]:
        return (self.p_gain * p_manifold + self.p_offset,
                self.t_gain * t_manifold + self.t_offset)


def polytropic_state(theta: float, ivc: IvcState, k_c: float,
                     geom: EngineGeometry = DEFAULT_GEOMETRY) -> tuple[float, float]:
    """Pressure [bar] and temperature [K] at crank angle ``theta`` on the
    closed compression span, from the IVC state via P*V^k = const.

    ``theta`` must lie within [ivc_angle, evo_angle]; the relation is an
    identity at IVC.
    """
    if not geom.ivc_angle <= theta <= geom.evo_angle:
        raise ValueError(
            f"theta={theta} deg outside the closed-valve span "
            f"[{geom.ivc_angle}, {geom.evo_angle}]")
    ratio = ivc.v_ivc / cylinder_volume(theta, geom)
    return ivc.p_ivc * ratio**k_c, ivc.t_ivc * ratio ** (k_c - 1.0)


@dataclass(frozen=True)
class MixtureState:
    """Per-cycle, per-cylinder trapped-mass bookkeeping."""

    m_fuel: float  # injected fuel [kg]
    m_air: float  # fresh air [kg]
    m_egr: float = 0.0  # recirculated exhaust [kg]
    m_r: float = 0.0  # residual gas from the previous cycle [kg]
    afr_stoich: float = AFR_STOICH_DIESEL

    def __post_init__(self) -> None:
        if min(self.m_fuel, self.m_air, self.m_egr, self.m_r) < 0.0:
            raise ValueError("masses must be non-negative")
        if self.afr_stoich <= 0.0:
            raise ValueError("afr_stoich must be > 0")


def equivalence_ratio(mix: MixtureState) -> float:
    """Fuel/air equivalence ratio: (m_fuel/m_air) over the stoichiometric
    fuel/air ratio.  Requires m_air > 0."""
    if mix.m_air <= 0.0:
        raise ValueError("equivalence ratio undefined for zero air mass")
    return (mix.m_fuel / mix.m_air) * mix.afr_stoich


def residual_fraction(mix: MixtureState) -> float:
    """Residual-gas mass fraction m_r / (m_air + m_fuel + m_egr)."""
    m_fresh = mix.m_air + mix.m_fuel + mix.m_egr
    if m_fresh <= 0.0:
        raise ValueError("residual fraction undefined for zero trapped charge")
    return mix.m_r / m_fresh


def dilution_fraction(egr: float, x_r: float) -> float:
    """Total dilution fraction: EGR fraction plus residual fraction.

    Both inputs are mass fractions in [0, 1); their sum must stay below 1.
    """
    if not 0.0 <= egr < 1.0:
        raise ValueError(f"egr fraction must be in [0, 1), got {egr}")
    if not 0.0 <= x_r < 1.0:
        raise ValueError(f"residual fraction must be in [0, 1), got {x_r}")
    x_d = egr + x_r
    if x_d >= 1.0:
        raise ValueError(f"dilution fraction {x_d} >= 1 is nonphysical")
    return x_d
