"""Synthetic raw-measurement generator: the end-to-end oracle for the
calibration and amplifier-analysis pipelines.

A scenario embeds ideal standards and DUTs between two configurable error
chains (the networks between each VNA port and the device planes), adds
reproducible complex Gaussian noise, and produces the same artefacts a
real cooldown would: raw Thru/Reflect/Line standards, raw DUT sweeps,
pump on/off amplifier states and the composite device networks of the
four published measurement configurations A-D.

Randomness is counter-based (Philox keyed by (seed, stream)) so every
product of a scenario is reproducible bit-for-bit and independent of
generation order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .errors import GridMismatch, InvalidSpec, ValidationError
from .network import (
    Band,
    ComponentSpec,
    NetworkData,
    cascade,
    make_component,
    s_to_t,
    thru,
)
from .trl import TrlStandardSet

# noise sub-stream indices, fixed so datasets are order-independent
_STREAM_THRU = 0
_STREAM_LINE = 1
_STREAM_REFLECT_P1 = 2
_STREAM_REFLECT_P2 = 3
_STREAM_DUT = 4
_STREAM_SWEEP_BASE = 16


def _rng(seed: int, stream: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class TwpaSpec:
    """Phenomenological amplifier model used by the simulator.

    The pump-off state has a piecewise-linear insertion loss between the
    band edges, a smooth stop-band notch and port reflections generated
    by the round-trip reflection model from the intrinsic port mismatch
    ``match_r`` (so the simulated data closes against the pump-off fit).
    The pump-on state multiplies the forward transmission by a smooth
    gain profile (Gaussian in pump power/frequency around the optimum,
    vanishing in the stop band) compressed by a single-pole saturation
    law; reverse transmission tracks the off state.
    """

    il_at_f_lo_db: float = 3.0
    il_at_f_hi_db: float = 6.0
    f_lo_hz: float = 4.0e9
    f_hi_hz: float = 8.0e9
    stop_band_hz: tuple = (5.5e9, 6.5e9)
    stop_band_depth_db: float = 20.0
    match_r: float = 0.14
    peak_pump_freq_hz: float = 5.8659e9
    peak_pump_power_dbm: float = -0.7
    avg_gain_at_peak_db: float = 11.0
    pump_freq_width_hz: float = 0.35e9
    pump_power_width_db: float = 2.0
    reverse_extra_loss_db: float = 0.0
    p_sat_dbm: float = -15.0
    group_delay_s: float = 1.2e-9
    reflect_ripple_rad: float = 0.7
    reflect_ripple_delay_s: float = 0.9e-9

    def __post_init__(self):
        lo, hi = self.stop_band_hz
        if not (self.f_lo_hz < lo < hi < self.f_hi_hz):
            raise InvalidSpec("stop band must lie inside the amplifier band")
        if not 0.0 <= self.match_r < 1.0:
            raise InvalidSpec(f"match_r must be in [0, 1), got {self.match_r}")
        if self.avg_gain_at_peak_db < 0:
            raise InvalidSpec("peak gain must be >= 0 dB")
        if min(self.il_at_f_lo_db, self.il_at_f_hi_db) < 0:
            raise InvalidSpec("insertion loss must be >= 0 dB")
        object.__setattr__(self, "stop_band_hz", (float(lo), float(hi)))

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["stop_band_hz"] = list(self.stop_band_hz)
        d["kind"] = "twpa"
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TwpaSpec":
        d = {k: v for k, v in d.items() if k != "kind"}
        if "stop_band_hz" in d:
            d["stop_band_hz"] = tuple(d["stop_band_hz"])
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidSpec(f"unknown TwpaSpec fields: {sorted(unknown)}")
        return cls(**d)

    def band(self) -> Band:
        return Band(self.f_lo_hz, self.f_hi_hz, (self.stop_band_hz,))

    def insertion_loss_db(self, f: np.ndarray) -> np.ndarray:
        """Pump-off insertion loss (dB), linear between the band edges."""
        return np.interp(f, [self.f_lo_hz, self.f_hi_hz], [self.il_at_f_lo_db, self.il_at_f_hi_db])


def _smoothstep(x: np.ndarray) -> np.ndarray:
    t = np.clip(x, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def _window(f: np.ndarray, lo: float, hi: float, edge: float) -> np.ndarray:
    """Smooth indicator: 0 outside [lo-edge, hi+edge], 1 on [lo+edge, hi-edge]."""
    return _smoothstep((f - lo) / edge + 0.5) * _smoothstep((hi - f) / edge + 0.5)


def _band_profile(spec: TwpaSpec, f: np.ndarray) -> np.ndarray:
    """Smooth gain-band shape: tapers at the band edges, zero in the stop band."""
    lo, hi = spec.stop_band_hz
    return _window(f, spec.f_lo_hz, spec.f_hi_hz, 0.25e9) * (1.0 - _window(f, lo, hi, 0.12e9))


def gain_profile_db(
    spec: TwpaSpec,
    f: np.ndarray,
    pump_freq_hz: float,
    pump_power_dbm: float,
    signal_power_dbm: float,
) -> np.ndarray:
    """Injected pump-on gain (dB) versus signal frequency.

    Calibrated so that the band average (stop band excluded, on this
    grid) equals ``avg_gain_at_peak_db`` when the pump sits at the
    configured optimum and the signal is far below saturation.
    """
    f = np.asarray(f, dtype=float)
    shape = _band_profile(spec, f)
    mask = spec.band().mask(f)
    if not mask.any():
        raise InvalidSpec("grid does not overlap the amplifier band")
    mean_shape = float(np.mean(shape[mask]))
    if mean_shape <= 0:
        raise InvalidSpec("gain-band profile vanishes on this grid")
    df = (pump_freq_hz - spec.peak_pump_freq_hz) / spec.pump_freq_width_hz
    dp = (pump_power_dbm - spec.peak_pump_power_dbm) / spec.pump_power_width_db
    pump_factor = np.exp(-0.5 * (df * df + dp * dp))
    gain_db = (spec.avg_gain_at_peak_db / mean_shape) * shape * pump_factor
    # single-pole compression of the linear power gain
    compression_db = 10.0 * np.log10(1.0 + 10.0 ** ((signal_power_dbm - spec.p_sat_dbm) / 10.0))
    return gain_db - compression_db


def synth_twpa(
    spec: TwpaSpec,
    frequencies: np.ndarray,
    pump_freq_hz: float | None = None,
    pump_power_dbm: float | None = None,
    signal_power_dbm: float = -40.0,
    pump_on: bool = False,
    z_ref: complex = 50.0,
) -> NetworkData:
    """Synthesize the amplifier's two-port S-parameters on a grid."""
    f = np.asarray(frequencies, dtype=float)
    il_db = spec.insertion_loss_db(f) + spec.stop_band_depth_db * _window(
        f, spec.stop_band_hz[0], spec.stop_band_hz[1], 0.12e9
    )
    g_off = 10.0 ** (-il_db / 20.0)
    phase_fwd = np.exp(-2j * np.pi * f * spec.group_delay_s)

    if pump_on:
        if pump_freq_hz is None or pump_power_dbm is None:
            raise InvalidSpec("pump_on requires pump_freq_hz and pump_power_dbm")
        gain_db = gain_profile_db(spec, f, pump_freq_hz, pump_power_dbm, signal_power_dbm)
    else:
        gain_db = np.zeros_like(f)

    s21 = g_off * 10.0 ** (gain_db / 20.0) * phase_fwd
    s12 = g_off * 10.0 ** (-spec.reverse_extra_loss_db / 20.0) * phase_fwd

    # port reflections follow the round-trip model with match_r as the
    # intrinsic per-port mismatch and the device's absolute voltage
    # transmission as the model gain; the pump-off state is the g -> g_off
    # limit of the same expression, so a pump-off fit recovers match_r
    r_int = spec.match_r
    g_abs = g_off * 10.0 ** (gain_db / 20.0)
    loop = g_abs * r_int * r_int
    if np.any(loop >= 1.0):
        raise InvalidSpec("round-trip gain |g*r^2| >= 1; reflections diverge at this setting")
    t2 = 1.0 - r_int * r_int
    refl_mag = r_int + t2 * g_abs * r_int / (1.0 - loop)
    ripple = 2 * np.pi * f * spec.reflect_ripple_delay_s
    s11 = refl_mag * np.exp(1j * (spec.reflect_ripple_rad * np.sin(ripple)))
    s22 = refl_mag * np.exp(1j * (spec.reflect_ripple_rad * np.sin(ripple + 1.1)))

    s = np.empty((f.size, 2, 2), dtype=complex)
    s[:, 0, 0] = s11
    s[:, 0, 1] = s12
    s[:, 1, 0] = s21
    s[:, 1, 1] = s22
    return NetworkData(f, s, z_ref)


# --- scenario and embedding -------------------------------------------------

@dataclass(frozen=True)
class TrlStandardsSpec:
    """Ideal TRL standard definitions plus the operator's nominal knowledge."""

    line_delay_s: float = 41.666e-12
    line_loss_db: float = 0.0
    reflect_offset_delay_s: float = 0.0
    line_delay_nominal_s: float | None = None
    reflect_offset_nominal_s: float | None = None
    line_z_ohm: float = 50.0

    @property
    def delay_nominal(self) -> float:
        return self.line_delay_s if self.line_delay_nominal_s is None else self.line_delay_nominal_s

    @property
    def offset_nominal(self) -> float:
        return (
            self.reflect_offset_delay_s
            if self.reflect_offset_nominal_s is None
            else self.reflect_offset_nominal_s
        )

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "TrlStandardsSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidSpec(f"unknown standards fields: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class ChainScenario:
    """A complete synthetic measurement setup."""

    grid: np.ndarray
    x_chain: tuple = ()          # ComponentSpec list, VNA port 1 -> DUT
    y_chain: tuple = ()          # ComponentSpec list, DUT -> VNA port 2
    dut: object = None           # ComponentSpec | TwpaSpec | None
    noise_sigma: float = 0.0
    seed: int = 0
    standards: TrlStandardsSpec = field(default_factory=TrlStandardsSpec)
    label: str = "sim"
    z_ref: float = 50.0

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float).reshape(-1)
        if g.size < 1 or np.any(~np.isfinite(g)) or np.any(g <= 0) or np.any(np.diff(g) <= 0):
            raise ValidationError("scenario grid must be strictly increasing and positive")
        if self.noise_sigma < 0:
            raise ValidationError("noise_sigma must be >= 0")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "x_chain", tuple(self.x_chain))
        object.__setattr__(self, "y_chain", tuple(self.y_chain))

    def to_dict(self) -> dict:
        def comp(c: ComponentSpec) -> dict:
            return c.to_dict()

        dut: dict | None
        if self.dut is None:
            dut = None
        elif isinstance(self.dut, TwpaSpec):
            dut = self.dut.to_dict()
        else:
            dut = self.dut.to_dict()
        return {
            "grid": {
                "f_start_hz": float(self.grid[0]),
                "f_stop_hz": float(self.grid[-1]),
                "points": int(self.grid.size),
            },
            "x_chain": [comp(c) for c in self.x_chain],
            "y_chain": [comp(c) for c in self.y_chain],
            "dut": dut,
            "noise_sigma": self.noise_sigma,
            "seed": self.seed,
            "standards": self.standards.to_dict(),
            "label": self.label,
            "z_ref": self.z_ref,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ChainScenario":
        g = d.get("grid")
        if isinstance(g, dict):
            grid = np.linspace(g["f_start_hz"], g["f_stop_hz"], int(g["points"]))
        else:
            grid = np.asarray(g, dtype=float)
        dut_d = d.get("dut")
        dut: object = None
        if dut_d is not None:
            if dut_d.get("kind") == "twpa":
                dut = TwpaSpec.from_dict(dut_d)
            else:
                dut = ComponentSpec.from_dict(dut_d)
        return cls(
            grid=grid,
            x_chain=tuple(ComponentSpec.from_dict(c) for c in d.get("x_chain", [])),
            y_chain=tuple(ComponentSpec.from_dict(c) for c in d.get("y_chain", [])),
            dut=dut,
            noise_sigma=float(d.get("noise_sigma", 0.0)),
            seed=int(d.get("seed", 0)),
            standards=TrlStandardsSpec.from_dict(d.get("standards", {})),
            label=str(d.get("label", "sim")),
            z_ref=float(d.get("z_ref", 50.0)),
        )

    @classmethod
    def from_json(cls, text: str) -> "ChainScenario":
        return cls.from_dict(json.loads(text))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def chain_network(specs, grid: np.ndarray, z_ref: complex = 50.0) -> NetworkData:
    """Cascade a list of component specs into one network (thru if empty)."""
    nets = [make_component(c, grid, z_ref) for c in specs]
    if not nets:
        return thru(grid, z_ref)
    if len(nets) == 1:
        return nets[0]
    return cascade(*nets)


def error_boxes(scenario: ChainScenario):
    """The true (noiseless) chain networks on the scenario grid."""
    x = chain_network(scenario.x_chain, scenario.grid, scenario.z_ref)
    y = chain_network(scenario.y_chain, scenario.grid, scenario.z_ref)
    return x, y


def _add_noise(s: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    if sigma == 0.0:
        return s
    noise = rng.normal(0.0, sigma, s.shape) + 1j * rng.normal(0.0, sigma, s.shape)
    return s + noise


def embed(scenario: ChainScenario, inner: NetworkData, stream: int = _STREAM_DUT) -> NetworkData:
    """Embed a device between the scenario chains and add measurement noise."""
    if not np.array_equal(inner.frequencies, scenario.grid):
        raise GridMismatch("inner network is not on the scenario grid")
    net = inner
    if scenario.x_chain or scenario.y_chain:
        x, y = error_boxes(scenario)
        net = cascade(x, inner, y)
    s = _add_noise(net.s, scenario.noise_sigma, _rng(scenario.seed, stream))
    return NetworkData(scenario.grid, s, scenario.z_ref)


def _reflect_through_x(t_chain: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    # reflection seen from the VNA side of the port-1 chain
    return (t_chain[:, 0, 0] * gamma + t_chain[:, 0, 1]) / (
        t_chain[:, 1, 0] * gamma + t_chain[:, 1, 1]
    )


def _reflect_through_y(t_chain: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    # reflection seen from the VNA side of the port-2 chain
    return (t_chain[:, 0, 0] * gamma - t_chain[:, 1, 0]) / (
        t_chain[:, 1, 1] - t_chain[:, 0, 1] * gamma
    )


def generate_trl_dataset(scenario: ChainScenario) -> TrlStandardSet:
    """Embed ideal Thru/Reflect/Line standards through the scenario chains."""
    f = scenario.grid
    std = scenario.standards
    ideal_thru = thru(f, scenario.z_ref)
    ideal_line = make_component(
        ComponentSpec("delay_line", {"delay_s": std.line_delay_s, "loss_db": std.line_loss_db}),
        f,
        scenario.z_ref,
    )
    raw_thru = embed(scenario, ideal_thru, _STREAM_THRU)
    raw_line = embed(scenario, ideal_line, _STREAM_LINE)

    gamma = -np.exp(-2j * 2 * np.pi * f * std.reflect_offset_delay_s)
    x, y = error_boxes(scenario)
    w1 = _reflect_through_x(s_to_t(x.s), gamma)
    w2 = _reflect_through_y(s_to_t(y.s), gamma)
    rng1 = _rng(scenario.seed, _STREAM_REFLECT_P1)
    rng2 = _rng(scenario.seed, _STREAM_REFLECT_P2)
    w1 = _add_noise(w1, scenario.noise_sigma, rng1)
    w2 = _add_noise(w2, scenario.noise_sigma, rng2)

    reflect_nominal = -np.exp(-2j * 2 * np.pi * f * std.offset_nominal)
    return TrlStandardSet(
        raw_thru=raw_thru,
        raw_line=raw_line,
        raw_reflect_p1=w1,
        raw_reflect_p2=w2,
        reflect_nominal=reflect_nominal,
        line_delay_nominal=std.delay_nominal,
        line_z_ohm=std.line_z_ohm,
    )


def dut_network(
    scenario: ChainScenario,
    pump_on: bool = False,
    pump_freq_hz: float | None = None,
    pump_power_dbm: float | None = None,
    signal_power_dbm: float = -40.0,
) -> NetworkData:
    """The scenario's ideal DUT at the reference planes."""
    if scenario.dut is None:
        raise InvalidSpec("scenario has no DUT")
    if isinstance(scenario.dut, TwpaSpec):
        return synth_twpa(
            scenario.dut,
            scenario.grid,
            pump_freq_hz=pump_freq_hz,
            pump_power_dbm=pump_power_dbm,
            signal_power_dbm=signal_power_dbm,
            pump_on=pump_on,
            z_ref=scenario.z_ref,
        )
    return make_component(scenario.dut, scenario.grid, scenario.z_ref)


# --- published measurement configurations ---------------------------------

_DEFAULT_ISOLATOR = ComponentSpec("isolator", {"insertion_loss_db": 0.8, "isolation_db": 36.0})
_DEFAULT_COUPLER = ComponentSpec("coupler", {"insertion_loss_db": 0.3, "return_loss_db": 23.0})
_DEFAULT_CABLE = ComponentSpec("delay_line", {"delay_s": 0.3e-9, "loss_db": 0.25})


def run_configuration(
    config: str,
    grid: np.ndarray,
    twpa: TwpaSpec | None = None,
    pump_on: bool = False,
    pump_freq_hz: float | None = None,
    pump_power_dbm: float | None = None,
    signal_power_dbm: float = -40.0,
    isolator_spec: ComponentSpec = _DEFAULT_ISOLATOR,
    coupler_spec: ComponentSpec = _DEFAULT_COUPLER,
    cable_spec: ComponentSpec = _DEFAULT_CABLE,
    z_ref: complex = 50.0,
) -> NetworkData:
    """Composite DUT network of measurement configuration A, B, C or D.

    A: isolator + coupler + cables + amplifier
    B: coupler + cables + amplifier
    C: isolator + coupler + cables
    D: coupler + cables
    """
    config = config.upper()
    if config not in ("A", "B", "C", "D"):
        raise InvalidSpec(f"configuration must be one of A-D, got {config!r}")
    grid = np.asarray(grid, dtype=float)
    parts = []
    if config in ("A", "C"):
        parts.append(make_component(isolator_spec, grid, z_ref))
    parts.append(make_component(coupler_spec, grid, z_ref))
    parts.append(make_component(cable_spec, grid, z_ref))
    if config in ("A", "B"):
        spec = twpa if twpa is not None else TwpaSpec()
        parts.append(
            synth_twpa(
                spec,
                grid,
                pump_freq_hz=pump_freq_hz,
                pump_power_dbm=pump_power_dbm,
                signal_power_dbm=signal_power_dbm,
                pump_on=pump_on,
                z_ref=z_ref,
            )
        )
    if len(parts) == 1:
        return parts[0]
    return cascade(*parts)


def sweep_stream(index: int) -> int:
    """Noise sub-stream for the index-th sweep product of a scenario."""
    return _STREAM_SWEEP_BASE + int(index)
