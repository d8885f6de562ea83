"""Fabry-Perot reflection model of an amplifier with mismatched ports.

A two-port with linear port reflections r1, r2, transmissions t1, t2 and
forward voltage gain g develops the port-1 reflection

    V_out / V_in = r1 + t1^2 * g * r2 / (1 - g * r2 * r1)

from the geometric series of internal round trips (port 2 by swapping the
subscripts).  The series converges only while |g*r1*r2| < 1.

Gain conventions: measured amplifier gain is the on/off difference of
20*log10|S21|.  `predict_reflection_vs_gain` maps a measured gain G (dB)
to the model's voltage gain as ``g = reference_gain * 10**(G/20)``; the
default ``reference_gain = 1`` treats the model g as the measured gain
directly, while passing ``reference_gain = 10**(-IL/20)`` makes g the
absolute voltage transmission of a device with insertion loss IL (so that
G = 0 dB reproduces the pump-off state).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect

from .errors import (
    DivergentSeries,
    EmptyBand,
    GridMismatch,
    NoRootInUnitInterval,
    ValidationError,
)
from .network import Band, NetworkData, same_grid

_BISECT_TOL = 1e-12


@dataclass(frozen=True)
class ReflectionModel:
    """Scalar parameters of the reflection-amplification model."""

    r1: complex
    r2: complex
    t1: complex
    t2: complex
    g: complex

    @classmethod
    def lossless(cls, r: float, g: float) -> "ReflectionModel":
        """Symmetric lossless model: r1 = r2 = r and t_i^2 + r_i^2 = 1."""
        if not 0.0 <= r < 1.0:
            raise ValidationError(f"lossless model needs 0 <= r < 1, got {r}")
        t = np.sqrt(1.0 - r * r)
        return cls(r1=r, r2=r, t1=t, t2=t, g=g)

    @property
    def loop_gain(self) -> complex:
        return self.g * self.r1 * self.r2


def eval_reflection(model: ReflectionModel, at_port: int = 1):
    """Closed-form sum of the round-trip series at the chosen port."""
    if at_port == 1:
        r_near, r_far, t_near = model.r1, model.r2, model.t1
    elif at_port == 2:
        r_near, r_far, t_near = model.r2, model.r1, model.t2
    else:
        raise ValidationError(f"at_port must be 1 or 2, got {at_port}")
    loop = model.g * model.r1 * model.r2
    if np.any(np.abs(loop) >= 1.0):
        raise DivergentSeries(f"|g*r1*r2| = {np.max(np.abs(loop)):g} >= 1; series diverges")
    return r_near + t_near**2 * model.g * r_far / (1.0 - loop)


def fit_roots(target: float, insertion_loss_db: float, n_scan: int = 4096) -> list[float]:
    """All r in [0, 1) with eval_reflection(lossless(r, g_off)) == target.

    g_off = 10**(-insertion_loss_db/20) is the pump-off voltage
    transmission.  Roots are found by a bracketing scan plus bisection to
    1e-12.
    """
    g = 10.0 ** (-insertion_loss_db / 20.0)

    def resid(r: float) -> float:
        t2 = 1.0 - r * r
        return r + t2 * g * r / (1.0 - g * r * r) - target

    rs = np.linspace(0.0, 1.0 - 1e-9, n_scan)
    vals = np.array([resid(r) for r in rs])
    roots = []
    exact = np.flatnonzero(vals == 0.0)
    roots.extend(float(rs[k]) for k in exact)
    sign_change = np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)
    for k in sign_change:
        roots.append(float(bisect(resid, rs[k], rs[k + 1], xtol=_BISECT_TOL)))
    return sorted(set(roots))


@dataclass(frozen=True)
class ReflectionFit:
    """Result of the pump-off reflection fit: chosen model plus all roots."""

    model: ReflectionModel
    roots: tuple
    target: float
    insertion_loss_db: float


def fit_reflection_from_pump_off(
    s11_avg: float, s22_avg: float, insertion_loss_db: float
) -> ReflectionFit:
    """Invert the model on band-averaged pump-off reflection magnitudes.

    Enforces the symmetric lossless constraint (r1 = r2 = r,
    t^2 = 1 - r^2) with g fixed to the pump-off insertion loss, and
    solves for r so the modelled reflection matches the mean of the two
    measured averages.  If several roots exist in [0, 1) the smallest
    (small-mismatch branch) is selected; all roots are reported.
    """
    for name, v in (("s11_avg", s11_avg), ("s22_avg", s22_avg)):
        if not 0.0 <= v < 1.0:
            raise ValidationError(f"{name} must lie in [0, 1), got {v}")
    if insertion_loss_db < 0:
        raise ValidationError(f"insertion_loss_db must be >= 0, got {insertion_loss_db}")
    target = 0.5 * (s11_avg + s22_avg)
    roots = fit_roots(target, insertion_loss_db)
    if not roots:
        raise NoRootInUnitInterval(
            f"no reflection coefficient in [0, 1) reproduces average reflection {target:g}"
        )
    r = roots[0]
    g = 10.0 ** (-insertion_loss_db / 20.0)
    return ReflectionFit(
        model=ReflectionModel.lossless(r, g),
        roots=tuple(roots),
        target=target,
        insertion_loss_db=insertion_loss_db,
    )


def predict_reflection_vs_gain(
    model: ReflectionModel, gains_db: np.ndarray, reference_gain: float = 1.0
) -> np.ndarray:
    """Predicted port reflections (dB) over a measured-gain sweep.

    Returns a structured float array with fields gain_db, s11_db, s22_db.
    Raises DivergentSeries naming the first unstable gain value.
    """
    gains_db = np.asarray(gains_db, dtype=float).reshape(-1)
    g = reference_gain * 10.0 ** (gains_db / 20.0)
    loop = np.abs(g * model.r1 * model.r2)
    if np.any(loop >= 1.0):
        bad = gains_db[np.argmax(loop >= 1.0)]
        raise DivergentSeries(
            f"model diverges at gain {bad:g} dB (|g*r1*r2| >= 1); "
            f"critical gain {critical_gain_db(model, reference_gain):.4f} dB"
        )
    out = np.zeros(gains_db.size, dtype=[("gain_db", float), ("s11_db", float), ("s22_db", float)])
    out["gain_db"] = gains_db
    with np.errstate(divide="ignore"):
        for k, gk in enumerate(g):
            mk = ReflectionModel(model.r1, model.r2, model.t1, model.t2, gk)
            out["s11_db"][k] = 20.0 * np.log10(np.abs(eval_reflection(mk, 1)))
            out["s22_db"][k] = 20.0 * np.log10(np.abs(eval_reflection(mk, 2)))
    return out


def critical_gain_db(model: ReflectionModel, reference_gain: float = 1.0) -> float:
    """Measured gain (dB) at which |g*r1*r2| reaches 1 (series divergence)."""
    denom = np.abs(model.r1 * model.r2) * reference_gain
    if denom == 0:
        return np.inf
    return float(20.0 * np.log10(1.0 / denom))


# --- gain extraction and maps ----------------------------------------------

def extract_gain(pump_on: NetworkData, pump_off: NetworkData) -> np.ndarray:
    """Per-frequency gain in dB: the on/off difference of 20*log10|S21|.

    Points where |S21_off| = 0 yield +/-inf (flagged by being non-finite).
    """
    if not same_grid(pump_on, pump_off):
        raise GridMismatch("pump-on and pump-off grids differ")
    with np.errstate(divide="ignore", invalid="ignore"):
        return 20.0 * np.log10(np.abs(pump_on.s21)) - 20.0 * np.log10(np.abs(pump_off.s21))


@dataclass(frozen=True)
class GainMap:
    """Band-averaged gain over a (pump frequency x pump power) sweep grid."""

    pump_frequencies: np.ndarray  # (F,) Hz
    pump_powers: np.ndarray       # (P,) dBm
    avg_gain_db: np.ndarray       # (F, P)

    def __post_init__(self):
        f = np.asarray(self.pump_frequencies, dtype=float)
        p = np.asarray(self.pump_powers, dtype=float)
        g = np.asarray(self.avg_gain_db, dtype=float)
        if g.shape != (f.size, p.size):
            raise ValidationError(f"gain grid shape {g.shape} != ({f.size}, {p.size})")
        object.__setattr__(self, "pump_frequencies", f)
        object.__setattr__(self, "pump_powers", p)
        object.__setattr__(self, "avg_gain_db", g)

    def argmax_cell(self):
        """(pump_freq, pump_power, gain_db) of the strongest cell."""
        k = np.nanargmax(self.avg_gain_db)
        i, j = np.unravel_index(k, self.avg_gain_db.shape)
        return (
            float(self.pump_frequencies[i]),
            float(self.pump_powers[j]),
            float(self.avg_gain_db[i, j]),
        )

    def records(self) -> list[dict]:
        out = []
        for i, fp in enumerate(self.pump_frequencies):
            for j, pp in enumerate(self.pump_powers):
                out.append(
                    {
                        "pump_freq_hz": float(fp),
                        "pump_power_dbm": float(pp),
                        "gain_db": float(self.avg_gain_db[i, j]),
                    }
                )
        return out


def build_gain_map(sweeps, pump_off: NetworkData, band: Band) -> GainMap:
    """Assemble a GainMap from (pump_freq, pump_power, pump_on network) sweeps."""
    cells = {}
    freqs = set()
    powers = set()
    for fp, pp, net in sweeps:
        if not same_grid(net, pump_off):
            raise GridMismatch(f"sweep at ({fp:g} Hz, {pp:g} dBm) is not on the pump-off grid")
        gain = extract_gain(net, pump_off)
        mask = band.mask(pump_off.frequencies)
        if not mask.any():
            raise EmptyBand("gain-map band contains no grid points")
        cells[(float(fp), float(pp))] = float(np.mean(gain[mask]))
        freqs.add(float(fp))
        powers.add(float(pp))
    if not cells:
        raise ValidationError("no sweeps provided")
    f_axis = np.array(sorted(freqs))
    p_axis = np.array(sorted(powers))
    grid = np.full((f_axis.size, p_axis.size), np.nan)
    for (fp, pp), gavg in cells.items():
        grid[np.searchsorted(f_axis, fp), np.searchsorted(p_axis, pp)] = gavg
    return GainMap(f_axis, p_axis, grid)


def compression_curve(sweeps, band: Band) -> np.ndarray:
    """Band-averaged gain and S-parameter levels versus signal power.

    ``sweeps`` yields (signal_power_dbm, pump_on, pump_off) triples; the
    output is a structured array sorted by signal power with the pump-on
    S-parameter band averages in dB.
    """
    rows = []
    for p_sig, on, off in sweeps:
        if not same_grid(on, off):
            raise GridMismatch(f"sweep at {p_sig:g} dBm has mismatched grids")
        mask = band.mask(on.frequencies)
        if not mask.any():
            raise EmptyBand("compression band contains no grid points")
        gain = extract_gain(on, off)
        with np.errstate(divide="ignore"):
            rows.append(
                (
                    float(p_sig),
                    float(np.mean(gain[mask])),
                    float(np.mean(20 * np.log10(np.abs(on.s11))[mask])),
                    float(np.mean(20 * np.log10(np.abs(on.s22))[mask])),
                    float(np.mean(20 * np.log10(np.abs(on.s12))[mask])),
                )
            )
    if not rows:
        raise ValidationError("no sweeps provided")
    rows.sort(key=lambda r: r[0])
    return np.array(
        rows,
        dtype=[
            ("signal_power_dbm", float),
            ("avg_gain_db", float),
            ("avg_s11_db", float),
            ("avg_s22_db", float),
            ("avg_s12_db", float),
        ],
    )
