"""Two-port network algebra on frequency-gridded S-parameter data.

Conventions
-----------
S-matrices are stored as complex arrays of shape ``(N, 2, 2)`` indexed
``s[:, i, j] = S_(i+1)(j+1)``, i.e. ``s[:, 0, 0]`` is S11 and
``s[:, 1, 0]`` is S21.  Transfer (T) matrices use the convention

    T = (1/S21) * [[S12*S21 - S11*S22, S11],
                   [-S22,              1  ]]

so that cascading two-ports with the signal flowing port 1 -> port 2
corresponds to the ordinary matrix product ``T_total = T_a @ T_b``.  The
inverse mapping requires ``t22 != 0`` (t22 = 1/S21 by construction).

dB values are field quantities throughout: ``20*log10|S|``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadWindow,
    EmptyBand,
    ExtrapolationRequested,
    GridMismatch,
    InvalidImpedance,
    InvalidSpec,
    NonMonotonicFrequency,
    SingularConversion,
    ValidationError,
    ZRefMismatch,
)

_S_KEYS = {"s11": (0, 0), "s12": (0, 1), "s21": (1, 0), "s22": (1, 1)}


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class NetworkData:
    """Frequency-gridded complex 2x2 S-matrices with a reference impedance.

    frequencies : (N,) float array, Hz, strictly increasing, all > 0.
    s           : (N, 2, 2) complex array, all entries finite.
    z_ref       : scalar reference impedance (ohm), Re(z_ref) > 0.
    """

    frequencies: np.ndarray
    s: np.ndarray
    z_ref: complex = 50.0

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float).reshape(-1)
        s = np.asarray(self.s, dtype=complex)
        if s.shape != (f.size, 2, 2):
            raise ValidationError(f"s must have shape ({f.size}, 2, 2), got {s.shape}")
        if f.size < 1:
            raise ValidationError("need at least one frequency point")
        if not np.all(np.isfinite(f)) or np.any(f <= 0):
            raise ValidationError("frequencies must be finite and > 0")
        if np.any(np.diff(f) <= 0):
            raise NonMonotonicFrequency("frequency grid must be strictly increasing")
        if not np.all(np.isfinite(s)):
            raise ValidationError("S-parameters must be finite (no NaN/Inf)")
        z = complex(self.z_ref)
        if not (np.isfinite(z.real) and np.isfinite(z.imag)) or z.real <= 0:
            raise InvalidImpedance(f"z_ref must have positive real part, got {z}")
        object.__setattr__(self, "frequencies", _freeze(f.copy()))
        object.__setattr__(self, "s", _freeze(s.copy()))
        object.__setattr__(self, "z_ref", z)

    def __len__(self) -> int:
        return self.frequencies.size

    def param(self, key: str) -> np.ndarray:
        """Return one S-parameter trace, e.g. ``net.param('s21')``."""
        try:
            i, j = _S_KEYS[key.lower()]
        except KeyError:
            raise ValidationError(f"unknown S-parameter {key!r}") from None
        return self.s[:, i, j]

    @property
    def s11(self) -> np.ndarray:
        return self.s[:, 0, 0]

    @property
    def s12(self) -> np.ndarray:
        return self.s[:, 0, 1]

    @property
    def s21(self) -> np.ndarray:
        return self.s[:, 1, 0]

    @property
    def s22(self) -> np.ndarray:
        return self.s[:, 1, 1]

    def with_s(self, s: np.ndarray) -> "NetworkData":
        return NetworkData(self.frequencies, s, self.z_ref)


def same_grid(a: NetworkData, b: NetworkData, rtol: float = 0.0) -> bool:
    if len(a) != len(b):
        return False
    return np.allclose(a.frequencies, b.frequencies, rtol=rtol, atol=0.0)


@dataclass(frozen=True)
class Band:
    """Frequency band [f_lo, f_hi] with optional disjoint exclusion windows."""

    f_lo: float
    f_hi: float
    exclusions: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if not self.f_lo < self.f_hi:
            raise ValidationError(f"band requires f_lo < f_hi, got [{self.f_lo}, {self.f_hi}]")
        ex = tuple((float(lo), float(hi)) for lo, hi in self.exclusions)
        prev_hi = None
        for lo, hi in sorted(ex):
            if not (self.f_lo <= lo < hi <= self.f_hi):
                raise ValidationError(f"exclusion [{lo}, {hi}] not inside band")
            if prev_hi is not None and lo < prev_hi:
                raise ValidationError("exclusion intervals must be disjoint")
            prev_hi = hi
        object.__setattr__(self, "exclusions", ex)

    def mask(self, frequencies: np.ndarray) -> np.ndarray:
        """Boolean mask of grid points inside the band and outside exclusions."""
        f = np.asarray(frequencies, dtype=float)
        m = (f >= self.f_lo) & (f <= self.f_hi)
        for lo, hi in self.exclusions:
            m &= ~((f >= lo) & (f <= hi))
        return m


# --- S <-> T conversion and cascading ------------------------------------

def s_to_t(s: np.ndarray) -> np.ndarray:
    """Convert S to transfer parameters; works on any (..., 2, 2) stack."""
    s = np.asarray(s, dtype=complex)
    s21 = s[..., 1, 0]
    if np.any(np.abs(s21) < 1e-300):
        raise SingularConversion("s21 magnitude below 1e-300, no T representation")
    t = np.empty_like(s)
    t[..., 0, 0] = s[..., 0, 1] * s21 - s[..., 0, 0] * s[..., 1, 1]
    t[..., 0, 1] = s[..., 0, 0]
    t[..., 1, 0] = -s[..., 1, 1]
    t[..., 1, 1] = 1.0
    return t / s21[..., None, None]


def t_to_s(t: np.ndarray) -> np.ndarray:
    """Inverse of :func:`s_to_t`; requires t22 != 0."""
    t = np.asarray(t, dtype=complex)
    t22 = t[..., 1, 1]
    if np.any(np.abs(t22) < 1e-300):
        raise SingularConversion("t22 magnitude below 1e-300, no S representation")
    s = np.empty_like(t)
    s[..., 0, 0] = t[..., 0, 1]
    s[..., 0, 1] = t[..., 0, 0] * t22 - t[..., 0, 1] * t[..., 1, 0]
    s[..., 1, 0] = 1.0
    s[..., 1, 1] = -t[..., 1, 0]
    return s / t22[..., None, None]


def inv2x2(m: np.ndarray) -> np.ndarray:
    """Batched closed-form 2x2 inverse (adjugate over determinant)."""
    m = np.asarray(m, dtype=complex)
    det = m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
    if np.any(np.abs(det) < 1e-300):
        raise SingularConversion("singular 2x2 matrix")
    out = np.empty_like(m)
    out[..., 0, 0] = m[..., 1, 1]
    out[..., 0, 1] = -m[..., 0, 1]
    out[..., 1, 0] = -m[..., 1, 0]
    out[..., 1, 1] = m[..., 0, 0]
    return out / det[..., None, None]


def cascade(a: NetworkData, b: NetworkData, *rest: NetworkData) -> NetworkData:
    """Cascade two or more networks (port 2 of each into port 1 of the next)."""
    nets = (a, b) + rest
    for n in nets[1:]:
        if not same_grid(a, n):
            raise GridMismatch("cascade requires identical frequency grids")
        if n.z_ref != a.z_ref:
            raise ZRefMismatch(f"cascade requires equal z_ref, got {a.z_ref} and {n.z_ref}")
    t = s_to_t(a.s)
    for n in nets[1:]:
        t = t @ s_to_t(n.s)
    return a.with_s(t_to_s(t))


def flip(net: NetworkData) -> NetworkData:
    """Swap port numbering: s11 <-> s22 and s12 <-> s21.  Involution."""
    s = net.s[:, ::-1, ::-1]
    return net.with_s(s)


def renormalize(net: NetworkData, z_new: complex) -> NetworkData:
    """Re-reference the S-matrix to a new (scalar) port impedance.

    Uses the travelling-wave bilinear form S' = (S - G*I) @ inv(I - G*S)
    with G = (z_new - z_old)/(z_new + z_old); exact roundtrip by
    composition of bilinear maps.
    """
    z_new = complex(z_new)
    if not np.isfinite(z_new.real) or z_new.real <= 0:
        raise InvalidImpedance(f"new reference impedance must have positive real part, got {z_new}")
    g = (z_new - net.z_ref) / (z_new + net.z_ref)
    if g == 0:
        return NetworkData(net.frequencies, net.s, z_new)
    eye = np.eye(2)
    s_new = (net.s - g * eye) @ inv2x2(eye - g * net.s)
    return NetworkData(net.frequencies, s_new, z_new)


def interpolate(net: NetworkData, grid: np.ndarray) -> NetworkData:
    """Linear interpolation of real/imag parts onto a new grid (no extrapolation)."""
    grid = np.asarray(grid, dtype=float).reshape(-1)
    f = net.frequencies
    if grid.min() < f[0] or grid.max() > f[-1]:
        raise ExtrapolationRequested(
            f"grid [{grid.min():g}, {grid.max():g}] exceeds data range [{f[0]:g}, {f[-1]:g}]"
        )
    s_new = np.empty((grid.size, 2, 2), dtype=complex)
    for i in range(2):
        for j in range(2):
            s_new[:, i, j] = np.interp(grid, f, net.s[:, i, j].real) + 1j * np.interp(
                grid, f, net.s[:, i, j].imag
            )
    return NetworkData(grid, s_new, net.z_ref)


# --- ideal component synthesis -------------------------------------------

@dataclass(frozen=True)
class ComponentSpec:
    """Declarative description of an ideal chain component.

    Kinds and parameters:
      thru
      attenuator    : db
      delay_line    : delay_s, loss_db (flat) or loss_db_per_sqrt_hz
      isolator      : insertion_loss_db, isolation_db
      offset_short  : offset_delay_s
      coupler       : insertion_loss_db, return_loss_db
    """

    kind: str
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params}

    @classmethod
    def from_dict(cls, d: dict) -> "ComponentSpec":
        d = dict(d)
        try:
            kind = d.pop("kind")
        except KeyError:
            raise InvalidSpec(f"component spec missing 'kind': {d}") from None
        return cls(kind, d)


def _db_to_lin(db: float) -> float:
    return 10.0 ** (-db / 20.0)


def thru(frequencies: np.ndarray, z_ref: complex = 50.0) -> NetworkData:
    f = np.asarray(frequencies, dtype=float)
    s = np.zeros((f.size, 2, 2), dtype=complex)
    s[:, 0, 1] = 1.0
    s[:, 1, 0] = 1.0
    return NetworkData(f, s, z_ref)


def attenuator(frequencies: np.ndarray, db: float, z_ref: complex = 50.0) -> NetworkData:
    if db < 0:
        raise InvalidSpec(f"attenuation must be >= 0 dB, got {db}")
    net = thru(frequencies, z_ref)
    s = net.s.copy()
    s[:, 0, 1] = s[:, 1, 0] = _db_to_lin(db)
    return net.with_s(s)


def delay_line(
    frequencies: np.ndarray,
    delay_s: float,
    loss_db: float = 0.0,
    loss_db_per_sqrt_hz: float = 0.0,
    z_ref: complex = 50.0,
) -> NetworkData:
    if delay_s < 0 or loss_db < 0 or loss_db_per_sqrt_hz < 0:
        raise InvalidSpec("delay and loss must be >= 0")
    f = np.asarray(frequencies, dtype=float)
    total_db = loss_db + loss_db_per_sqrt_hz * np.sqrt(f)
    trans = 10.0 ** (-total_db / 20.0) * np.exp(-2j * np.pi * f * delay_s)
    s = np.zeros((f.size, 2, 2), dtype=complex)
    s[:, 0, 1] = s[:, 1, 0] = trans
    return NetworkData(f, s, z_ref)


def isolator(
    frequencies: np.ndarray,
    insertion_loss_db: float = 1.0,
    isolation_db: float = 20.0,
    z_ref: complex = 50.0,
) -> NetworkData:
    if insertion_loss_db < 0 or isolation_db < 0:
        raise InvalidSpec("isolator losses must be >= 0 dB")
    f = np.asarray(frequencies, dtype=float)
    s = np.zeros((f.size, 2, 2), dtype=complex)
    s[:, 1, 0] = _db_to_lin(insertion_loss_db)
    s[:, 0, 1] = _db_to_lin(isolation_db)
    return NetworkData(f, s, z_ref)


def offset_short(frequencies: np.ndarray, offset_delay_s: float = 0.0, z_ref: complex = 50.0) -> NetworkData:
    """Offset-short reflect standard: |s11| = 1 with phase pi - 2*w*tau.

    Modelled as a two-port with both ports shorted behind the offset and
    no transmission, so the same object serves either calibration port.
    """
    if offset_delay_s < 0:
        raise InvalidSpec("offset delay must be >= 0")
    f = np.asarray(frequencies, dtype=float)
    gamma = -np.exp(-2j * 2 * np.pi * f * offset_delay_s)
    s = np.zeros((f.size, 2, 2), dtype=complex)
    s[:, 0, 0] = gamma
    s[:, 1, 1] = gamma
    return NetworkData(f, s, z_ref)


def coupler(
    frequencies: np.ndarray,
    insertion_loss_db: float = 0.3,
    return_loss_db: float = 23.0,
    z_ref: complex = 50.0,
) -> NetworkData:
    """Through-path model of a directional coupler (coupled port not modelled)."""
    if insertion_loss_db < 0 or return_loss_db <= 0:
        raise InvalidSpec("coupler losses must be positive dB")
    f = np.asarray(frequencies, dtype=float)
    s = np.zeros((f.size, 2, 2), dtype=complex)
    s[:, 0, 1] = s[:, 1, 0] = _db_to_lin(insertion_loss_db)
    s[:, 0, 0] = s[:, 1, 1] = _db_to_lin(return_loss_db)
    return NetworkData(f, s, z_ref)


_BUILDERS = {
    "thru": thru,
    "attenuator": attenuator,
    "delay_line": delay_line,
    "isolator": isolator,
    "offset_short": offset_short,
    "coupler": coupler,
}


def make_component(spec: ComponentSpec, frequencies: np.ndarray, z_ref: complex = 50.0) -> NetworkData:
    """Synthesize an ideal component network on the requested grid."""
    try:
        builder = _BUILDERS[spec.kind]
    except KeyError:
        raise InvalidSpec(f"unknown component kind {spec.kind!r}") from None
    try:
        return builder(frequencies, z_ref=z_ref, **spec.params)
    except TypeError as exc:
        raise InvalidSpec(f"bad parameters for {spec.kind!r}: {exc}") from None


# --- scalar metrics -------------------------------------------------------

def band_average(net: NetworkData, which: str, band: Band, scale: str = "db") -> float:
    """Arithmetic mean of |Sij| over band-included grid points, in the chosen scale.

    Averaging happens in the requested scale: 'db' averages 20*log10|S|
    values, 'linear' averages magnitudes.
    """
    mask = band.mask(net.frequencies)
    if not mask.any():
        raise EmptyBand(f"no grid points inside band [{band.f_lo:g}, {band.f_hi:g}]")
    mag = np.abs(net.param(which))[mask]
    if scale == "linear":
        return float(np.mean(mag))
    if scale == "db":
        with np.errstate(divide="ignore"):
            return float(np.mean(20.0 * np.log10(mag)))
    raise ValidationError(f"scale must be 'db' or 'linear', got {scale!r}")


def average_in_band(values: np.ndarray, frequencies: np.ndarray, band: Band) -> float:
    """Mean of an arbitrary per-frequency trace over a band."""
    mask = band.mask(np.asarray(frequencies, dtype=float))
    if not mask.any():
        raise EmptyBand("no grid points inside band")
    return float(np.mean(np.asarray(values)[mask]))


def moving_average(trace: np.ndarray, window: int) -> np.ndarray:
    """Centered boxcar average; edges use shrunken symmetric windows."""
    x = np.asarray(trace, dtype=float).reshape(-1)
    n = x.size
    if window < 1 or window % 2 == 0 or window > n:
        raise BadWindow(f"window must be odd, >= 1 and <= {n}, got {window}")
    half = window // 2
    idx = np.arange(n)
    k = np.minimum(half, np.minimum(idx, n - 1 - idx))
    cs = np.concatenate(([0.0], np.cumsum(x)))
    return (cs[idx + k + 1] - cs[idx - k]) / (2 * k + 1)


def max_singular_value(net: NetworkData) -> np.ndarray:
    """Per-frequency largest singular value of S (passivity check: <= 1)."""
    return np.linalg.svd(net.s, compute_uv=False)[:, 0]
