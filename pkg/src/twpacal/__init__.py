"""Calibrated S-parameter measurement toolkit for cryogenic amplifier
characterisation: Touchstone I/O, two-port network algebra, TRL solution
of the 8-term error model, de-embedding, a Fabry-Perot reflection model
of amplifier port mismatch and a synthetic measurement-chain simulator.
"""

from .chain import ChainScenario, TrlStandardsSpec, TwpaSpec, embed, generate_trl_dataset, run_configuration, synth_twpa
from .network import (
    Band,
    ComponentSpec,
    NetworkData,
    band_average,
    cascade,
    flip,
    interpolate,
    make_component,
    moving_average,
    renormalize,
    s_to_t,
    t_to_s,
)
from .touchstone import export_table, parse_touchstone, read_touchstone, save_touchstone, write_touchstone
from .trl import CalibratedResult, ErrorModel, TrlStandardSet, deembed, line_phase_validity, solve_trl, verify_calibration
from .twpa import (
    GainMap,
    ReflectionModel,
    build_gain_map,
    compression_curve,
    eval_reflection,
    extract_gain,
    fit_reflection_from_pump_off,
    predict_reflection_vs_gain,
)

__version__ = "0.1.0"

__all__ = [
    "Band",
    "CalibratedResult",
    "ChainScenario",
    "ComponentSpec",
    "ErrorModel",
    "GainMap",
    "NetworkData",
    "ReflectionModel",
    "TrlStandardSet",
    "TrlStandardsSpec",
    "TwpaSpec",
    "band_average",
    "build_gain_map",
    "cascade",
    "compression_curve",
    "deembed",
    "embed",
    "eval_reflection",
    "export_table",
    "extract_gain",
    "fit_reflection_from_pump_off",
    "flip",
    "generate_trl_dataset",
    "interpolate",
    "line_phase_validity",
    "make_component",
    "moving_average",
    "parse_touchstone",
    "predict_reflection_vs_gain",
    "read_touchstone",
    "renormalize",
    "run_configuration",
    "s_to_t",
    "save_touchstone",
    "solve_trl",
    "synth_twpa",
    "t_to_s",
    "verify_calibration",
    "write_touchstone",
]
