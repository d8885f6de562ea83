"""Thru-Reflect-Line solution of the 8-term error model and de-embedding.

The raw measurement of a device with transfer matrix T is modelled as
``T_raw = X @ T @ Y`` with X the error network between VNA port 1 and the
device's port 1 plane and Y the network from the device's port 2 plane to
VNA port 2.  Directivity, source match and tracking live implicitly inside
X and Y.

Per frequency point the solver:

1. forms ``M = T(line) @ inv(T(thru)) = X @ L @ inv(X)`` whose eigenvalues
   are the line's propagation factors ``exp(-g*l)`` and ``exp(+g*l)``;
2. assigns the two roots using magnitude (a passive line has
   ``|exp(-g*l)| <= 1``) and phase continuity across the sweep, seeded by
   the nominal line delay;
3. extracts the eigenvector ratios that pin X (and, through
   ``N = inv(T(thru)) @ T(line)``, Y) up to one diagonal scaling;
4. fixes the remaining unknown from the reflect measured at both ports
   plus the thru, choosing the square-root sign whose implied reflect
   falls in the same complex half-plane as the nominal reflect.

The unobservable split of transmission between the two boxes is fixed by
giving each box equal square-root magnitude; any split produces identical
de-embedded results.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    GridMismatch,
    RootAmbiguity,
    SingularErrorBox,
    SingularThru,
    ValidationError,
)
from .network import NetworkData, inv2x2, s_to_t, same_grid, t_to_s

FLAG_DEGENERATE_LINE = 1  # thru-line phase too close to 0/180 deg
FLAG_ROOT_FORCED = 2      # continuity overrode the |root| <= 1 rule

DEFAULT_GUARD_DEG = 20.0


@dataclass(frozen=True)
class TrlStandardSet:
    """Raw TRL standard measurements plus nominal standard definitions.

    raw_reflect_p1/p2 are the per-frequency complex reflections seen at
    each VNA port with the reflect standard attached; reflect_nominal is
    an approximate model of the standard (for an offset short,
    ``-exp(-2j*w*tau)``) that only needs the correct half-plane.
    """

    raw_thru: NetworkData
    raw_line: NetworkData
    raw_reflect_p1: np.ndarray
    raw_reflect_p2: np.ndarray
    reflect_nominal: np.ndarray | complex = -1.0 + 0.0j
    line_delay_nominal: float = 0.0
    line_z_ohm: complex = 50.0

    def __post_init__(self):
        n = len(self.raw_thru)
        if not same_grid(self.raw_thru, self.raw_line):
            raise GridMismatch("thru and line must share one frequency grid")
        for name in ("raw_reflect_p1", "raw_reflect_p2"):
            arr = np.asarray(getattr(self, name), dtype=complex).reshape(-1)
            if arr.size != n:
                raise GridMismatch(f"{name} length {arr.size} != grid length {n}")
            object.__setattr__(self, name, arr)
        nom = np.asarray(self.reflect_nominal, dtype=complex)
        if nom.ndim == 0:
            nom = np.full(n, complex(nom))
        else:
            nom = nom.reshape(-1).copy()
            if nom.size != n:
                raise GridMismatch(f"reflect_nominal length {nom.size} != grid length {n}")
        mag = np.abs(nom)
        if np.any(mag <= 0.5) or np.any(mag >= 1.5):
            raise ValidationError("|reflect_nominal| must lie in (0.5, 1.5)")
        object.__setattr__(self, "reflect_nominal", nom)

    @property
    def frequencies(self) -> np.ndarray:
        return self.raw_thru.frequencies


@dataclass(frozen=True)
class ErrorModel:
    """Per-frequency error boxes (T-parameters) and line propagation factor."""

    frequencies: np.ndarray
    x_box: np.ndarray       # (N, 2, 2) T-matrix of the port-1 error network
    y_box: np.ndarray       # (N, 2, 2) T-matrix of the port-2 error network
    gamma_line: np.ndarray  # (N,) exp(-gamma*l) recovered from the Line
    residuals: np.ndarray   # (N,) normalized thru-reconstruction residual
    flags: np.ndarray       # (N,) bitset of FLAG_* values
    z_ref: complex = 50.0

    def to_dict(self) -> dict:
        def c(arr):
            a = np.asarray(arr)
            return {"re": a.real.tolist(), "im": a.imag.tolist()}

        return {
            "frequencies_hz": np.asarray(self.frequencies).tolist(),
            "x_box": c(self.x_box.reshape(len(self.frequencies), 4)),
            "y_box": c(self.y_box.reshape(len(self.frequencies), 4)),
            "gamma_line": c(self.gamma_line),
            "residuals": np.asarray(self.residuals).tolist(),
            "flags": np.asarray(self.flags).astype(int).tolist(),
            "z_ref": [self.z_ref.real, self.z_ref.imag],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ErrorModel":
        def c(entry):
            return np.asarray(entry["re"], dtype=float) + 1j * np.asarray(entry["im"], dtype=float)

        f = np.asarray(d["frequencies_hz"], dtype=float)
        n = f.size
        return cls(
            frequencies=f,
            x_box=c(d["x_box"]).reshape(n, 2, 2),
            y_box=c(d["y_box"]).reshape(n, 2, 2),
            gamma_line=c(d["gamma_line"]),
            residuals=np.asarray(d["residuals"], dtype=float),
            flags=np.asarray(d["flags"], dtype=np.uint8),
            z_ref=complex(d["z_ref"][0], d["z_ref"][1]),
        )


@dataclass(frozen=True)
class CalibratedResult:
    """De-embedded DUT plus per-frequency solver diagnostics."""

    dut: NetworkData
    residuals: np.ndarray
    flags: np.ndarray


def _eig2_trace_det(m: np.ndarray):
    """Eigenvalues of a batch of 2x2 matrices via the characteristic polynomial."""
    tr = m[:, 0, 0] + m[:, 1, 1]
    det = m[:, 0, 0] * m[:, 1, 1] - m[:, 0, 1] * m[:, 1, 0]
    disc = np.sqrt(tr * tr - 4.0 * det)
    return (tr + disc) / 2.0, (tr - disc) / 2.0


def _pick_ratio(num_a, den_a, num_b, den_b):
    """Choose per point between two equivalent eigenvector-ratio formulas.

    Both express the same ratio; take the one whose denominator is larger
    in magnitude (handles diagonal/triangular error boxes where one form
    is 0/0).
    """
    use_a = np.abs(den_a) >= np.abs(den_b)
    den_a = np.where(use_a, den_a, 1.0)
    den_b = np.where(use_a, 1.0, den_b)
    return np.where(use_a, num_a / den_a, num_b / den_b)


def _assign_line_roots(lam_a, lam_b, frequencies, line_delay_nominal):
    """Split each eigenvalue pair into (exp(-g*l), exp(+g*l), flags).

    Sequential continuity pass over the sweep: the prediction at each
    point is the previous choice advanced by the nominal delay phase (the
    nominal alone seeds the first point).  Flags where continuity forces
    a root with magnitude above 1 (an overridden passivity rule).
    """
    n = frequencies.size
    take_a = np.empty(n, dtype=bool)
    flags = np.zeros(n, dtype=np.uint8)
    tau = line_delay_nominal
    prev = np.exp(-2j * np.pi * frequencies[0] * tau)
    prev_f = frequencies[0]
    for k in range(n):
        pred = prev * np.exp(-2j * np.pi * (frequencies[k] - prev_f) * tau)
        a, b = lam_a[k], lam_b[k]
        take_a[k] = abs(a - pred) <= abs(b - pred)
        pick = a if take_a[k] else b
        if abs(pick) > 1.0 + 1e-6:
            flags[k] |= FLAG_ROOT_FORCED
        prev, prev_f = pick, frequencies[k]
    return np.where(take_a, lam_a, lam_b), np.where(take_a, lam_b, lam_a), flags


def line_phase_mask(gamma_line: np.ndarray, guard_deg: float) -> np.ndarray:
    """True where the line's differential phase clears 0/180 deg by guard_deg."""
    if not 0.0 < guard_deg < 90.0:
        raise ValidationError(f"guard_deg must be in (0, 90), got {guard_deg}")
    phase = np.degrees(np.angle(gamma_line)) % 180.0
    dist = np.minimum(phase, 180.0 - phase)
    return dist >= guard_deg


def line_phase_validity(em: ErrorModel, guard_deg: float = DEFAULT_GUARD_DEG) -> np.ndarray:
    """Per-frequency validity of the thru-line phase separation."""
    return line_phase_mask(em.gamma_line, guard_deg)


def solve_trl(std: TrlStandardSet, guard_deg: float = DEFAULT_GUARD_DEG) -> ErrorModel:
    """Solve the 8-term error model from raw Thru/Reflect/Line measurements."""
    f = std.frequencies
    n = f.size
    if np.any(np.abs(std.raw_thru.s21) < 1e-12) or np.any(np.abs(std.raw_line.s21) < 1e-12):
        raise SingularThru("thru/line transmission vanishes at some frequency")

    t_thru = s_to_t(std.raw_thru.s)
    t_line = s_to_t(std.raw_line.s)
    t_thru_inv = inv2x2(t_thru)

    m = t_line @ t_thru_inv      # X L X^-1
    nn = t_thru_inv @ t_line     # Y^-1 L Y

    lam_a, lam_b = _eig2_trace_det(m)
    lam1, lam2, flags = _assign_line_roots(lam_a, lam_b, f, std.line_delay_nominal)
    gamma_line = lam1

    valid = line_phase_mask(gamma_line, guard_deg)
    flags = flags | np.where(valid, 0, FLAG_DEGENERATE_LINE).astype(np.uint8)

    # eigenvector ratios of M fix X's columns: p1 = x21/x11, p2 = x12/x22
    p1 = _pick_ratio(lam1 - m[:, 0, 0], m[:, 0, 1], m[:, 1, 0], lam1 - m[:, 1, 1])
    p2 = _pick_ratio(m[:, 0, 1], lam2 - m[:, 0, 0], lam2 - m[:, 1, 1], m[:, 1, 0])

    # left eigenvectors of N fix Y's rows: q1 = y12/y11, q2 = y21/y22
    nl_a, nl_b = _eig2_trace_det(nn)
    swap = np.abs(nl_a - lam1) > np.abs(nl_b - lam1)
    nl1 = np.where(swap, nl_b, nl_a)
    nl2 = np.where(swap, nl_a, nl_b)
    q1 = _pick_ratio(nl1 - nn[:, 0, 0], nn[:, 1, 0], nn[:, 0, 1], nl1 - nn[:, 1, 1])
    q2 = _pick_ratio(nn[:, 1, 0], nl2 - nn[:, 0, 0], nl2 - nn[:, 1, 1], nn[:, 0, 1])

    # thru fixes the diagonal scalings up to one ratio:
    # T_thru = C_x diag(f1, f2) C_y with C_x = [[1, p2], [p1, 1]], C_y = [[1, q1], [q2, 1]]
    cx = np.empty((n, 2, 2), dtype=complex)
    cx[:, 0, 0] = 1.0
    cx[:, 0, 1] = p2
    cx[:, 1, 0] = p1
    cx[:, 1, 1] = 1.0
    cy = np.empty((n, 2, 2), dtype=complex)
    cy[:, 0, 0] = 1.0
    cy[:, 0, 1] = q1
    cy[:, 1, 0] = q2
    cy[:, 1, 1] = 1.0
    ff = inv2x2(cx) @ t_thru @ inv2x2(cy)
    f1 = ff[:, 0, 0]
    f2 = ff[:, 1, 1]
    if np.any(np.abs(f1) < 1e-300) or np.any(np.abs(f2) < 1e-300):
        raise SingularThru("thru decomposition produced a vanishing diagonal")
    # off-diagonal leakage of the thru decomposition is the solver residual
    residuals = np.maximum(np.abs(ff[:, 0, 1]), np.abs(ff[:, 1, 0])) / np.maximum(
        np.abs(f1), np.abs(f2)
    )

    # reflect on both ports resolves the remaining diagonal ratio rho = dx1/dx2
    u1 = (std.raw_reflect_p1 - p2) / (1.0 - p1 * std.raw_reflect_p1)   # = rho * Gamma
    u2 = (std.raw_reflect_p2 + q2) / (1.0 + q1 * std.raw_reflect_p2)   # = (ey1/ey2) * Gamma
    if np.any(np.abs(u2) < 1e-300):
        raise RootAmbiguity("reflect measurement vanishes at port 2")
    rho = np.sqrt((u1 / u2) * (f1 / f2))
    if np.any(np.abs(rho) < 1e-300):
        raise RootAmbiguity("reflect measurement vanishes at port 1")
    gamma_implied = u1 / rho
    proj = np.real(gamma_implied * np.conj(std.reflect_nominal))
    norm = np.abs(gamma_implied) * np.abs(std.reflect_nominal)
    boundary = np.abs(proj) <= 1e-9 * np.maximum(norm, 1e-300)
    if np.any(boundary):
        k = int(np.argmax(boundary))
        raise RootAmbiguity(
            f"implied reflect is orthogonal to reflect_nominal at {f[k]:g} Hz; "
            "cannot resolve the square-root sign"
        )
    rho = np.where(proj < 0, -rho, rho)

    # equal square-root magnitude split of the thru transmission
    sx = np.sqrt(f2)
    x_box = np.empty((n, 2, 2), dtype=complex)
    x_box[:, 0, 0] = rho * sx
    x_box[:, 0, 1] = p2 * sx
    x_box[:, 1, 0] = p1 * rho * sx
    x_box[:, 1, 1] = sx
    ey1 = f1 / (rho * sx)
    ey2 = f2 / sx
    y_box = np.empty((n, 2, 2), dtype=complex)
    y_box[:, 0, 0] = ey1
    y_box[:, 0, 1] = q1 * ey1
    y_box[:, 1, 0] = q2 * ey2
    y_box[:, 1, 1] = ey2

    return ErrorModel(
        frequencies=f,
        x_box=x_box,
        y_box=y_box,
        gamma_line=gamma_line,
        residuals=residuals,
        flags=flags,
        z_ref=std.line_z_ohm,
    )


def deembed(em: ErrorModel, raw_dut: NetworkData) -> CalibratedResult:
    """Shift the DUT measurement to the calibration reference planes."""
    if len(raw_dut) != em.frequencies.size or not np.allclose(
        raw_dut.frequencies, em.frequencies, rtol=0.0, atol=0.0
    ):
        raise GridMismatch("DUT grid does not match the error model grid")
    det_x = em.x_box[:, 0, 0] * em.x_box[:, 1, 1] - em.x_box[:, 0, 1] * em.x_box[:, 1, 0]
    det_y = em.y_box[:, 0, 0] * em.y_box[:, 1, 1] - em.y_box[:, 0, 1] * em.y_box[:, 1, 0]
    if np.any(np.abs(det_x) < 1e-300) or np.any(np.abs(det_y) < 1e-300):
        raise SingularErrorBox("error box is singular; cannot de-embed")
    t_dut = inv2x2(em.x_box) @ s_to_t(raw_dut.s) @ inv2x2(em.y_box)
    dut = NetworkData(em.frequencies, t_to_s(t_dut), em.z_ref)
    return CalibratedResult(dut=dut, residuals=em.residuals.copy(), flags=em.flags.copy())


def reflect_at_planes(em: ErrorModel, raw_reflect_p1: np.ndarray, raw_reflect_p2: np.ndarray):
    """Invert the error boxes on one-port reflect data; returns (G1, G2)."""
    x = em.x_box
    y = em.y_box
    w1 = np.asarray(raw_reflect_p1, dtype=complex)
    w2 = np.asarray(raw_reflect_p2, dtype=complex)
    g1 = (x[:, 0, 1] - x[:, 1, 1] * w1) / (x[:, 1, 0] * w1 - x[:, 0, 0])
    g2 = (w2 * y[:, 1, 1] + y[:, 1, 0]) / (y[:, 0, 0] + w2 * y[:, 0, 1])
    return g1, g2


@dataclass(frozen=True)
class ResidualReport:
    """Deviations of the re-de-embedded standards from their ideal models."""

    frequencies: np.ndarray
    thru_dev: np.ndarray     # max |S_deembedded - S_ideal| per frequency
    line_dev: np.ndarray     # same for the line (model: s21=s12=gamma, s11=s22=0)
    reflect_dev: np.ndarray  # |Gamma_port1 - Gamma_port2| per frequency

    def summary(self) -> dict:
        return {
            "thru": {"max": float(self.thru_dev.max()), "rms": _rms(self.thru_dev)},
            "line": {"max": float(self.line_dev.max()), "rms": _rms(self.line_dev)},
            "reflect": {"max": float(self.reflect_dev.max()), "rms": _rms(self.reflect_dev)},
        }


def _rms(x: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.abs(x) ** 2)))


def verify_calibration(em: ErrorModel, std: TrlStandardSet) -> ResidualReport:
    """Re-de-embed the standards and report deviations from their ideals."""
    n = em.frequencies.size
    ideal_thru = np.zeros((n, 2, 2), dtype=complex)
    ideal_thru[:, 0, 1] = ideal_thru[:, 1, 0] = 1.0
    thru_cal = deembed(em, std.raw_thru).dut
    thru_dev = np.abs(thru_cal.s - ideal_thru).max(axis=(1, 2))

    ideal_line = np.zeros((n, 2, 2), dtype=complex)
    ideal_line[:, 0, 1] = ideal_line[:, 1, 0] = em.gamma_line
    line_cal = deembed(em, std.raw_line).dut
    line_dev = np.abs(line_cal.s - ideal_line).max(axis=(1, 2))

    g1, g2 = reflect_at_planes(em, std.raw_reflect_p1, std.raw_reflect_p2)
    reflect_dev = np.abs(g1 - g2)

    return ResidualReport(
        frequencies=em.frequencies,
        thru_dev=thru_dev,
        line_dev=line_dev,
        reflect_dev=reflect_dev,
    )
