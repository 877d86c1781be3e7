"""Named transient scenarios and scenario-file loading.

Five stock transients exercise the controllers, each 10 s long with the
operating point changed at the 5 s mark: a reference step, a speed ramp,
an intake-temperature ramp, a load (equivalence-ratio) ramp and an EGR
ramp.  Physical channels ramp smoothly over 0.5 s; the reference changes
as a step, which the cycle-start latching turns into the one-cycle
reference delay seen on the engine.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .engine import DEFAULT_GEOMETRY, DEFAULT_RESIDUAL_FRACTION, EngineGeometry
from .control import SOI_BOUNDS_DEFAULT
from .model import DEFAULT_PARAMS, ModelParams, perturbed_params
from .plant import NoiseConfig, PlantConfig, Ramp, TransientProfile

STEP_TIME = 5.0  # operating-point change [s]
RAMP_DURATION = 0.5  # smooth transition of physical channels [s]
DEFAULT_DURATION = 10.0  # [s]

# Plant-side constant perturbations (relative) used as the stock
# plant/controller mismatch: the plant ignites a little slower and burns a
# little longer than the controller model believes.
DEFAULT_MISMATCH = {"c4": 0.01, "c9": 0.04}

# Verbatim operating-point settings of the five stock cases
# (first operating point, second operating point).
CASE_SETTINGS: dict[str, dict[str, tuple[float, float]]] = {
    "case1": {"n": (1200.0, 1200.0), "t_man": (300.0, 300.0), "p_man": (2.0, 2.0),
              "phi": (0.7, 0.7), "egr": (0.25, 0.25), "ca50_ref": (8.0, 10.0)},
    "case2": {"n": (1200.0, 1500.0), "t_man": (300.0, 300.0), "p_man": (2.0, 2.0),
              "phi": (0.7, 0.7), "egr": (0.25, 0.25), "ca50_ref": (8.0, 8.0)},
    "case3": {"n": (1200.0, 1200.0), "t_man": (300.0, 330.0), "p_man": (2.0, 2.0),
              "phi": (0.7, 0.7), "egr": (0.25, 0.25), "ca50_ref": (8.0, 8.0)},
    "case4": {"n": (1200.0, 1200.0), "t_man": (300.0, 300.0), "p_man": (2.0, 2.0),
              "phi": (0.5, 0.9), "egr": (0.25, 0.25), "ca50_ref": (8.0, 8.0)},
    "case5": {"n": (1200.0, 1200.0), "t_man": (300.0, 300.0), "p_man": (2.0, 2.0),
              "phi": (0.7, 0.7), "egr": (0.0, 0.5), "ca50_ref": (8.0, 8.0)},
}


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    plant: PlantConfig
    profile: TransientProfile
    controller: str = "adaptive"  # "adaptive" | "feedforward"
    duration: float = DEFAULT_DURATION  # [s]
    step_time: float = STEP_TIME  # segment boundary for metrics [s]
    controller_params: ModelParams = DEFAULT_PARAMS
    x_r_bar: float = DEFAULT_RESIDUAL_FRACTION
    soi_bounds: tuple[float, float] = SOI_BOUNDS_DEFAULT
    seed: int = 0

    def __post_init__(self) -> None:
        if self.duration <= 0.0:
            raise ValueError(f"duration must be > 0, got {self.duration}")
        if self.controller not in ("adaptive", "feedforward"):
            raise ValueError(f"unknown controller {self.controller!r}")


def _channel_ramp(values: tuple[float, float], duration: float) -> Ramp:
    return Ramp(initial=values[0], final=values[1], start=STEP_TIME, duration=duration)


def case_profile(name: str) -> TransientProfile:
    settings = CASE_SETTINGS[name]
    return TransientProfile(
        n=_channel_ramp(settings["n"], RAMP_DURATION),
        egr=_channel_ramp(settings["egr"], RAMP_DURATION),
        phi=_channel_ramp(settings["phi"], RAMP_DURATION),
        p_man=_channel_ramp(settings["p_man"], RAMP_DURATION),
        t_man=_channel_ramp(settings["t_man"], RAMP_DURATION),
        ca50_ref=_channel_ramp(settings["ca50_ref"], 0.0),
    )


def case_scenario(name: str, controller: str = "adaptive", *,
                  mismatch: bool = True, quantize: bool = True,
                  lag: bool = True, noise: NoiseConfig | None = None,
                  combustion: str = "integral",
                  params: ModelParams = DEFAULT_PARAMS,
                  geom: EngineGeometry = DEFAULT_GEOMETRY,
                  duration: float = DEFAULT_DURATION,
                  seed: int = 0) -> ScenarioConfig:
    """Build one of the stock transient scenarios.

    ``mismatch=False`` gives the controller a perfect plant model;
    ``quantize=False`` removes the actuation quantum; ``lag=False`` makes
    the in-cylinder state follow the manifold instantly;
    ``combustion="closed-form"`` switches the plant truth to the exactly
    invertible closed-form model.
    """
    if name not in CASE_SETTINGS:
        raise ValueError(f"unknown case {name!r}, expected one of {sorted(CASE_SETTINGS)}")
    true_params = perturbed_params(params, **DEFAULT_MISMATCH) if mismatch else params
    plant = PlantConfig(
        geom=geom,
        true_params=true_params,
        soi_quantum=0.1 if quantize else 0.0,
        lag_tau=0.2 if lag else 0.0,
        noise=noise or NoiseConfig(),
        combustion=combustion,
    )
    return ScenarioConfig(name=name, plant=plant, profile=case_profile(name),
                          controller=controller, duration=duration, seed=seed)


# -- scenario files ---------------------------------------------------------

_RAMP_KEYS = ("initial", "final", "start", "duration")
_PROFILE_CHANNELS = ("n", "egr", "phi", "p_man", "t_man", "ca50_ref")


def _ramp_from_dict(name: str, raw: dict) -> Ramp:
    unknown = set(raw) - set(_RAMP_KEYS)
    if unknown:
        raise ValueError(f"profile.{name}: unknown keys {sorted(unknown)}")
    if "initial" not in raw:
        raise ValueError(f"profile.{name}: missing 'initial'")
    return Ramp(**raw)


def scenario_from_json(path: str | Path) -> ScenarioConfig:
    """Load a scenario from a JSON file.

    Schema (all plant keys optional, defaults shown)::

        {
          "name": "custom",
          "controller": "adaptive",          // or "feedforward"
          "duration": 10.0,
          "seed": 0,
          "x_r_bar": 0.0384,
          "soi_bounds": [-20.0, 20.0],
          "plant": {
            "soi_quantum": 0.1,
            "fuel_delay_cycles": 2,
            "lag_tau": 0.2,
            "x_r": 0.0384,
            "combustion": "integral",        // or "closed-form"
            "integral_step": 0.1,
            "mismatch": {"c4": 0.01, "c9": 0.04},   // relative plant-side tweaks
            "noise": {"ca50": 0.0, "p_ivc": 0.0, "t_ivc": 0.0}
          },
          "profile": {
            "n":        {"initial": 1200, "final": 1200, "start": 5.0, "duration": 0.5},
            "egr":      {...}, "phi": {...}, "p_man": {...}, "t_man": {...},
            "ca50_ref": {"initial": 8, "final": 10, "start": 5.0, "duration": 0.0}
          }
        }

    Channel values are RPM, mass fractions, equivalence ratio, bar, K and
    deg aTDC respectively.
    """
    path = Path(path)
    raw = json.loads(path.read_text())
    if "profile" not in raw:
        raise ValueError(f"{path}: missing 'profile' section")
    missing = set(_PROFILE_CHANNELS) - set(raw["profile"])
    if missing:
        raise ValueError(f"{path}: profile missing channels {sorted(missing)}")
    profile = TransientProfile(**{
        ch: _ramp_from_dict(ch, raw["profile"][ch]) for ch in _PROFILE_CHANNELS})

    plant_raw = dict(raw.get("plant", {}))
    mismatch = plant_raw.pop("mismatch", None)
    noise_raw = plant_raw.pop("noise", None)
    true_params = DEFAULT_PARAMS if mismatch is None else perturbed_params(
        DEFAULT_PARAMS, **mismatch)
    allowed = {"soi_quantum", "fuel_delay_cycles", "lag_tau", "x_r",
               "combustion", "integral_step"}
    unknown = set(plant_raw) - allowed
    if unknown:
        raise ValueError(f"{path}: unknown plant keys {sorted(unknown)}")
    plant = PlantConfig(
        true_params=true_params,
        noise=NoiseConfig(**noise_raw) if noise_raw else NoiseConfig(),
        **plant_raw)

    return ScenarioConfig(
        name=raw.get("name", path.stem),
        plant=plant,
        profile=profile,
        controller=raw.get("controller", "adaptive"),
        duration=raw.get("duration", DEFAULT_DURATION),
        seed=raw.get("seed", 0),
        x_r_bar=raw.get("x_r_bar", DEFAULT_RESIDUAL_FRACTION),
        soi_bounds=tuple(raw.get("soi_bounds", SOI_BOUNDS_DEFAULT)),
    )
