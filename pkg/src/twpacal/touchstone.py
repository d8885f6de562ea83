"""Touchstone v1 two-port (.s2p) reader/writer and table export.

Supported grammar (v1, two-port S-parameters only):

    ! comment line (also allowed inline after data)
    # <freq-unit> S <RI|MA|DB> R <resistance>
    f  a11 b11  a21 b21  a12 b12  a22 b22

Column order follows the v1 two-port convention S11, S21, S12, S22.
Frequencies are converted to Hz on parse regardless of the file unit;
values are converted to complex regardless of RI/MA/DB.  Noise-parameter
sections, N != 2 ports and Touchstone v2 are out of scope and rejected.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    MalformedOptionLine,
    NonMonotonicFrequency,
    UnsupportedParameterKind,
    ValidationError,
    WrongColumnCount,
)
from .network import NetworkData

_FREQ_UNITS = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}
_FORMATS = ("RI", "MA", "DB")


@dataclass(frozen=True)
class TouchstoneHeader:
    """Parsed '#' option line."""

    freq_unit: str = "ghz"
    parameter_kind: str = "S"
    value_format: str = "MA"
    reference_resistance: float = 50.0


def _parse_option_line(line: str, lineno: int) -> TouchstoneHeader:
    tokens = line[1:].split()
    if len(tokens) not in (3, 5):
        raise MalformedOptionLine(
            f"line {lineno}: option line must read '# <unit> S <RI|MA|DB> [R <ohms>]', got {line!r}"
        )
    unit, kind, fmt = tokens[0].lower(), tokens[1].upper(), tokens[2].upper()
    if unit not in _FREQ_UNITS:
        raise MalformedOptionLine(f"line {lineno}: unknown frequency unit {tokens[0]!r}")
    if kind != "S":
        raise UnsupportedParameterKind(
            f"line {lineno}: only S-parameters are supported, got {kind!r}"
        )
    if fmt not in _FORMATS:
        raise MalformedOptionLine(f"line {lineno}: unknown value format {tokens[2]!r}")
    resistance = 50.0
    if len(tokens) == 5:
        if tokens[3].upper() != "R":
            raise MalformedOptionLine(f"line {lineno}: expected 'R <ohms>', got {tokens[3:]!r}")
        try:
            resistance = float(tokens[4])
        except ValueError:
            raise MalformedOptionLine(
                f"line {lineno}: reference resistance {tokens[4]!r} is not a number"
            ) from None
        if not math.isfinite(resistance) or resistance <= 0:
            raise MalformedOptionLine(f"line {lineno}: reference resistance must be > 0")
    return TouchstoneHeader(unit, kind, fmt, resistance)


def _pairs_to_complex(a: np.ndarray, b: np.ndarray, fmt: str) -> np.ndarray:
    if fmt == "RI":
        return a + 1j * b
    if fmt == "MA":
        return a * np.exp(1j * np.radians(b))
    # DB: a is 20*log10 magnitude, b phase in degrees
    return 10.0 ** (a / 20.0) * np.exp(1j * np.radians(b))


def parse_touchstone(source) -> NetworkData:
    """Parse two-port Touchstone v1 text into a :class:`NetworkData`.

    ``source`` may be a string or any iterable of lines (e.g. an open
    file).  Returns frequencies in Hz and complex S-parameters.
    """
    if isinstance(source, str):
        lines = io.StringIO(source)
    else:
        lines = source
    header: TouchstoneHeader | None = None
    rows: list[list[float]] = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("!", 1)[0].strip()
        if not line:
            continue
        if line.startswith("#"):
            if header is not None:
                raise MalformedOptionLine(f"line {lineno}: duplicate option line")
            header = _parse_option_line(line, lineno)
            continue
        if header is None:
            raise MalformedOptionLine(f"line {lineno}: data before '#' option line")
        tokens = line.split()
        if len(tokens) != 9:
            hint = " (noise-parameter sections are not supported)" if len(tokens) == 5 else ""
            raise WrongColumnCount(
                f"line {lineno}: expected 9 columns for two-port data, got {len(tokens)}{hint}"
            )
        try:
            rows.append([float(tok) for tok in tokens])
        except ValueError as exc:
            raise WrongColumnCount(f"line {lineno}: non-numeric data: {exc}") from None
    if header is None:
        raise MalformedOptionLine("missing '#' option line")
    if not rows:
        raise ValidationError("no data rows found")
    data = np.asarray(rows, dtype=float)
    freq = data[:, 0] * _FREQ_UNITS[header.freq_unit]
    if np.any(np.diff(freq) <= 0):
        raise NonMonotonicFrequency("frequency column must be strictly increasing")
    s = np.empty((freq.size, 2, 2), dtype=complex)
    s[:, 0, 0] = _pairs_to_complex(data[:, 1], data[:, 2], header.value_format)
    s[:, 1, 0] = _pairs_to_complex(data[:, 3], data[:, 4], header.value_format)
    s[:, 0, 1] = _pairs_to_complex(data[:, 5], data[:, 6], header.value_format)
    s[:, 1, 1] = _pairs_to_complex(data[:, 7], data[:, 8], header.value_format)
    if not np.all(np.isfinite(s)):
        raise ValidationError("parsed S-parameters contain non-finite values")
    return NetworkData(freq, s, header.reference_resistance)


def read_touchstone(path) -> NetworkData:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_touchstone(fh)


def _complex_to_pair(z: np.ndarray, fmt: str):
    if fmt == "RI":
        return z.real, z.imag
    mag = np.abs(z)
    ang = np.degrees(np.angle(z))
    if fmt == "MA":
        return mag, ang
    with np.errstate(divide="ignore"):
        return 20.0 * np.log10(mag), ang


def write_touchstone(net: NetworkData, value_format: str = "RI", freq_unit: str = "GHz") -> str:
    """Emit a v1-conformant .s2p text that :func:`parse_touchstone` inverts.

    Values carry 15 significant digits; comments are not preserved.
    """
    fmt = value_format.upper()
    if fmt not in _FORMATS:
        raise ValidationError(f"value format must be one of {_FORMATS}, got {value_format!r}")
    unit = freq_unit.lower()
    if unit not in _FREQ_UNITS:
        raise ValidationError(f"unknown frequency unit {freq_unit!r}")
    if net.z_ref.imag != 0:
        raise ValidationError("Touchstone v1 reference resistance must be real")
    out = [f"# {freq_unit} S {fmt} R {net.z_ref.real:.15g}"]
    scale = _FREQ_UNITS[unit]
    # column order S11, S21, S12, S22 per the v1 two-port convention
    columns = [net.s11, net.s21, net.s12, net.s22]
    pairs = [_complex_to_pair(c, fmt) for c in columns]
    for k, f in enumerate(net.frequencies):
        fields = [f"{f / scale:.15g}"]
        for a, b in pairs:
            fields.append(f"{a[k]:.15g}")
            fields.append(f"{b[k]:.15g}")
        out.append(" ".join(fields))
    return "\n".join(out) + "\n"


def save_touchstone(net: NetworkData, path, value_format: str = "RI", freq_unit: str = "GHz") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(write_touchstone(net, value_format, freq_unit))


# --- table export ---------------------------------------------------------

_QUANTITY_KINDS = ("db", "linear", "phase")


def _quantity_column(net: NetworkData, sij: str, kind: str):
    z = net.param(sij)
    if kind == "db":
        with np.errstate(divide="ignore"):
            return f"{sij}_db", 20.0 * np.log10(np.abs(z))
    if kind == "linear":
        return f"{sij}_mag", np.abs(z)
    if kind == "phase":
        return f"{sij}_deg", np.degrees(np.angle(z))
    raise ValidationError(f"quantity kind must be one of {_QUANTITY_KINDS}, got {kind!r}")


def export_table(net: NetworkData, quantities, fmt: str = "csv") -> str:
    """Export selected |Sij| quantities per frequency as CSV or JSON text.

    ``quantities`` is a sequence of ``(sij, kind)`` pairs with kind one of
    'db', 'linear', 'phase'.  dB of a zero magnitude is emitted as the
    text sentinel ``-inf`` (a quoted string in JSON, which has no Inf).
    """
    cols = [("freq_hz", net.frequencies)]
    for sij, kind in quantities:
        cols.append(_quantity_column(net, sij, kind))
    if fmt == "csv":
        lines = [",".join(name for name, _ in cols)]
        for k in range(len(net)):
            lines.append(",".join(_format_cell(vals[k]) for _, vals in cols))
        return "\n".join(lines) + "\n"
    if fmt == "json":
        records = []
        for k in range(len(net)):
            rec = {}
            for name, vals in cols:
                v = float(vals[k])
                rec[name] = v if math.isfinite(v) else _format_cell(v)
            records.append(rec)
        return json.dumps(records, indent=2, sort_keys=True) + "\n"
    raise ValidationError(f"table format must be 'csv' or 'json', got {fmt!r}")


def _format_cell(v: float) -> str:
    if math.isinf(v):
        return "-inf" if v < 0 else "inf"
    if math.isnan(v):
        return "nan"
    return f"{v:.12g}"
