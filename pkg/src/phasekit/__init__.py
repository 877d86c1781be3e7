"""Combustion-phasing modeling, calibration and control toolkit."""

from .engine import (
    AFR_STOICH_DIESEL,
    DEFAULT_GEOMETRY,
    DEFAULT_RESIDUAL_FRACTION,
    EngineGeometry,
    IvcState,
    ManifoldMap,
    MixtureState,
    cylinder_volume,
    dilution_fraction,
    equivalence_ratio,
    ivc_state,
    load_geometry,
    polytropic_state,
    residual_fraction,
    save_geometry,
)
from .model import (
    DEFAULT_PARAMS,
    DEFAULT_WIEBE,
    MisfireError,
    ModelParams,
    OperatingCondition,
    WiebeParams,
    arrhenius_tau,
    burn_duration,
    ca50_from_wiebe,
    ca50_offset,
    ca50_predict,
    load_params,
    perturbed_params,
    predict_phasing,
    save_params,
    soc_full_integral,
    soc_simplified,
    wiebe_mfb,
)

__version__ = "0.1.0"
