"""Command-line pipeline: convert, calibrate, deembed, gain, gainmap,
fit-reflection, predict-reflection, compression, simulate, verify.

Every subcommand is a thin wrapper over one library operation.  Primary
outputs are Touchstone/CSV files; each run can also emit a
machine-readable JSON record carrying the results and SHA-256 digests of
all inputs, so identical reruns produce byte-identical artefacts.

Exit codes: 0 success, 1 validation error, 2 numerical failure,
64 usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import chain, network, touchstone, trl, twpa
from .errors import NumericalError, TwpacalError, ValidationError

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_USAGE = 64

_UNITS = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def parse_frequency(text: str) -> float:
    """Parse '4e9' (Hz) or unit-suffixed '4GHz' into Hz."""
    t = text.strip().lower()
    for suffix, mult in sorted(_UNITS.items(), key=lambda kv: -len(kv[0])):
        if t.endswith(suffix):
            return float(t[: -len(suffix)]) * mult
    return float(t)


def parse_band(spec: str, exclusions) -> network.Band:
    lo_hi = spec.split(":")
    if len(lo_hi) != 2:
        raise ValidationError(f"band must read LO:HI, got {spec!r}")
    ex = []
    for e in exclusions or []:
        pair = e.split(":")
        if len(pair) != 2:
            raise ValidationError(f"exclusion must read LO:HI, got {e!r}")
        ex.append((parse_frequency(pair[0]), parse_frequency(pair[1])))
    return network.Band(parse_frequency(lo_hi[0]), parse_frequency(lo_hi[1]), tuple(ex))


def parse_range(spec: str) -> np.ndarray:
    """START:STOP:STEP, endpoints inclusive (frequency suffixes allowed)."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise ValidationError(f"range must read START:STOP:STEP, got {spec!r}")
    start, stop, step = (parse_frequency(p) for p in parts)
    if step <= 0 or stop < start:
        raise ValidationError(f"bad range {spec!r}")
    n = int(round((stop - start) / step))
    values = start + step * np.arange(n + 1)
    return values[values <= stop + 1e-9 * max(abs(stop), 1.0)]


def _digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            h.update(block)
    return "sha256:" + h.hexdigest()


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _write(path, text: str):
    Path(path).write_text(text, encoding="utf-8")


def _record(command: str, inputs: dict, result: dict) -> dict:
    return {
        "command": command,
        "inputs": {str(k): _digest(v) for k, v in inputs.items()},
        "result": result,
    }


def _emit_record(args, command: str, inputs: dict, result: dict, default_anchor=None):
    json_path = getattr(args, "json", None)
    if json_path is None and default_anchor is not None:
        json_path = str(Path(default_anchor).with_suffix("")) + ".json"
    if json_path:
        _write(json_path, _json_text(_record(command, inputs, result)))


def _read_net(path) -> network.NetworkData:
    if path == "-":
        return touchstone.parse_touchstone(sys.stdin.read())
    return touchstone.read_touchstone(path)


def _inputs_of(*paths) -> dict:
    return {p: p for p in paths if p and p != "-"}


# --- subcommand implementations -------------------------------------------

def cmd_convert(args) -> int:
    net = _read_net(args.input)
    if args.table:
        quantities = []
        for q in args.quantities.split(","):
            try:
                sij, kind = q.strip().split(":")
            except ValueError:
                raise ValidationError(f"quantity must read SIJ:KIND, got {q!r}") from None
            quantities.append((sij, kind))
        text = touchstone.export_table(net, quantities, fmt=args.table)
    else:
        text = touchstone.write_touchstone(net, args.format, args.unit)
    if args.out == "-":
        sys.stdout.write(text)
    else:
        _write(args.out, text)
        _emit_record(
            args,
            "convert",
            _inputs_of(args.input),
            {"points": len(net), "out": args.out},
            default_anchor=None,
        )
    return EXIT_OK


def _standards_from_args(args) -> trl.TrlStandardSet:
    raw_thru = _read_net(args.thru)
    raw_line = _read_net(args.line)
    refl1 = _read_net(args.reflect1)
    refl2 = _read_net(args.reflect2)
    for name, net in (("line", raw_line), ("reflect1", refl1), ("reflect2", refl2)):
        if not network.same_grid(raw_thru, net):
            raise ValidationError(f"{name} grid differs from the thru grid")
    f = raw_thru.frequencies
    tau = args.reflect_offset_delay
    nominal = -np.exp(-2j * 2 * np.pi * f * tau)
    return trl.TrlStandardSet(
        raw_thru=raw_thru,
        raw_line=raw_line,
        raw_reflect_p1=refl1.s11,
        raw_reflect_p2=refl2.s22,
        reflect_nominal=nominal,
        line_delay_nominal=args.line_delay,
        line_z_ohm=args.line_z,
    )


def cmd_calibrate(args) -> int:
    std = _standards_from_args(args)
    em = trl.solve_trl(std, guard_deg=args.guard_deg)
    _write(args.out_errormodel, _json_text(em.to_dict()))
    result = {
        "out_errormodel": args.out_errormodel,
        "residual_max": float(np.max(em.residuals)),
        "flagged_points": int(np.count_nonzero(em.flags)),
    }
    inputs = _inputs_of(args.thru, args.line, args.reflect1, args.reflect2)
    if args.dut:
        raw_dut = _read_net(args.dut)
        cal = trl.deembed(em, raw_dut)
        dut = cal.dut
        if args.renormalize is not None:
            dut = network.renormalize(dut, args.renormalize)
        _write(args.out_dut, touchstone.write_touchstone(dut, args.format))
        _write(
            str(Path(args.out_dut).with_suffix("")) + ".diag.json",
            _json_text(
                {
                    "residuals": cal.residuals.tolist(),
                    "flags": cal.flags.astype(int).tolist(),
                }
            ),
        )
        inputs.update(_inputs_of(args.dut))
        result["out_dut"] = args.out_dut
    _emit_record(args, "calibrate", inputs, result, default_anchor=args.out_errormodel)
    print(f"calibrated {len(std.raw_thru)} points, max thru residual {result['residual_max']:.3e}")
    return EXIT_OK


def cmd_deembed(args) -> int:
    em = trl.ErrorModel.from_dict(json.loads(Path(args.errormodel).read_text()))
    raw_dut = _read_net(args.dut)
    cal = trl.deembed(em, raw_dut)
    dut = cal.dut
    if args.renormalize is not None:
        dut = network.renormalize(dut, args.renormalize)
    _write(args.out, touchstone.write_touchstone(dut, args.format))
    _emit_record(
        args,
        "deembed",
        _inputs_of(args.errormodel, args.dut),
        {"out": args.out, "flagged_points": int(np.count_nonzero(cal.flags))},
        default_anchor=args.out,
    )
    return EXIT_OK


def cmd_verify(args) -> int:
    em = trl.ErrorModel.from_dict(json.loads(Path(args.errormodel).read_text()))
    std = _standards_from_args(args)
    report = trl.verify_calibration(em, std)
    summary = report.summary()
    result = {
        "summary": summary,
        "thru_dev": report.thru_dev.tolist(),
        "line_dev": report.line_dev.tolist(),
        "reflect_dev": report.reflect_dev.tolist(),
    }
    if args.out:
        _write(args.out, _json_text(result))
    _emit_record(
        args,
        "verify",
        _inputs_of(args.errormodel, args.thru, args.line, args.reflect1, args.reflect2),
        {"summary": summary},
        default_anchor=args.out,
    )
    for std_name, stats in summary.items():
        print(f"{std_name:8s} max {stats['max']:.3e}  rms {stats['rms']:.3e}")
    return EXIT_OK


def _band_from_args(args, net: network.NetworkData) -> network.Band:
    if args.band:
        return parse_band(args.band, args.exclude)
    if args.exclude:
        raise ValidationError("--exclude requires --band")
    f = net.frequencies
    return network.Band(f[0], f[-1] if f.size > 1 else f[0] * (1 + 1e-9))


def cmd_gain(args) -> int:
    on = _read_net(args.on)
    off = _read_net(args.off)
    gain = twpa.extract_gain(on, off)
    band = _band_from_args(args, off)
    avg = network.average_in_band(gain, off.frequencies, band)
    if args.out:
        lines = ["freq_hz,gain_db"]
        lines += [f"{f:.12g},{g:.12g}" for f, g in zip(off.frequencies, gain)]
        _write(args.out, "\n".join(lines) + "\n")
    _emit_record(
        args,
        "gain",
        _inputs_of(args.on, args.off),
        {"avg_gain_db": avg, "band": [band.f_lo, band.f_hi], "exclusions": list(band.exclusions)},
        default_anchor=args.out,
    )
    print(f"average gain {avg:.4f} dB")
    return EXIT_OK


def cmd_gainmap(args) -> int:
    manifest = json.loads(Path(args.manifest).read_text())
    base = Path(args.manifest).parent
    off = _read_net(args.off)
    band = _band_from_args(args, off)
    sweeps = []
    paths = [args.manifest, args.off]
    for entry in manifest:
        path = base / entry["file"]
        paths.append(str(path))
        sweeps.append(
            (entry["pump_freq_hz"], entry["pump_power_dbm"], touchstone.read_touchstone(path))
        )
    gmap = twpa.build_gain_map(sweeps, off, band)
    fp, pp, peak = gmap.argmax_cell()
    if args.out:
        lines = ["pump_freq_hz,pump_power_dbm,gain_db"]
        lines += [
            f"{r['pump_freq_hz']:.12g},{r['pump_power_dbm']:.12g},{r['gain_db']:.12g}"
            for r in gmap.records()
        ]
        _write(args.out, "\n".join(lines) + "\n")
    _emit_record(
        args,
        "gainmap",
        _inputs_of(*paths),
        {
            "records": gmap.records(),
            "peak": {"pump_freq_hz": fp, "pump_power_dbm": pp, "gain_db": peak},
        },
        default_anchor=args.out,
    )
    print(f"peak {peak:.2f} dB at pump {fp / 1e9:.4f} GHz, {pp:.2f} dBm")
    return EXIT_OK


def cmd_fit_reflection(args) -> int:
    fit = twpa.fit_reflection_from_pump_off(args.s11, args.s22, args.il)
    result = {
        "r": float(np.real(fit.model.r1)),
        "roots": [float(r) for r in fit.roots],
        "g_off": float(np.real(fit.model.g)),
        "target": fit.target,
        "insertion_loss_db": fit.insertion_loss_db,
    }
    if args.out:
        _write(args.out, _json_text(result))
    _emit_record(args, "fit-reflection", {}, result, default_anchor=args.out)
    print(f"r = {result['r']:.6f} (roots: {result['roots']})")
    return EXIT_OK


def cmd_predict_reflection(args) -> int:
    reference_gain = 1.0 if args.il is None else 10.0 ** (-args.il / 20.0)
    model = twpa.ReflectionModel.lossless(args.r, reference_gain)
    gains = parse_range(args.gains)
    table = twpa.predict_reflection_vs_gain(model, gains, reference_gain=reference_gain)
    lines = ["gain_db,s11_db,s22_db"]
    lines += [
        f"{row['gain_db']:.12g},{row['s11_db']:.12g},{row['s22_db']:.12g}" for row in table
    ]
    text = "\n".join(lines) + "\n"
    if args.out == "-":
        sys.stdout.write(text)
    else:
        _write(args.out, text)
        _emit_record(
            args,
            "predict-reflection",
            {},
            {
                "r": args.r,
                "critical_gain_db": twpa.critical_gain_db(model, reference_gain),
                "out": args.out,
            },
            default_anchor=args.out,
        )
    return EXIT_OK


def cmd_compression(args) -> int:
    manifest = json.loads(Path(args.manifest).read_text())
    base = Path(args.manifest).parent
    paths = [args.manifest]
    sweeps = []
    for entry in manifest:
        on_path = base / entry["on"]
        off_path = base / entry["off"]
        paths += [str(on_path), str(off_path)]
        sweeps.append(
            (
                entry["signal_power_dbm"],
                touchstone.read_touchstone(on_path),
                touchstone.read_touchstone(off_path),
            )
        )
    first = sweeps[0][1] if sweeps else None
    if first is None:
        raise ValidationError("compression manifest is empty")
    band = _band_from_args(args, first)
    curve = twpa.compression_curve(sweeps, band)
    header = ",".join(curve.dtype.names)
    lines = [header]
    lines += [",".join(f"{row[name]:.12g}" for name in curve.dtype.names) for row in curve]
    _write(args.out, "\n".join(lines) + "\n")
    _emit_record(
        args,
        "compression",
        _inputs_of(*paths),
        {"rows": [{name: float(row[name]) for name in curve.dtype.names} for row in curve]},
        default_anchor=args.out,
    )
    return EXIT_OK


def _save_net(net, path):
    touchstone.save_touchstone(net, path, "RI")
    return str(path)


def cmd_simulate(args) -> int:
    scenario = chain.ChainScenario.from_json(Path(args.config).read_text())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    label = scenario.label
    written = {}

    if args.task == "trl":
        std = chain.generate_trl_dataset(scenario)
        written["thru"] = _save_net(std.raw_thru, out / f"{label}_thru_off.s2p")
        written["line"] = _save_net(std.raw_line, out / f"{label}_line_off.s2p")
        refl = np.zeros((len(std.raw_thru), 2, 2), dtype=complex)
        refl[:, 0, 0] = std.raw_reflect_p1
        refl[:, 1, 1] = std.raw_reflect_p2
        refl_net = network.NetworkData(scenario.grid, refl, scenario.z_ref)
        written["reflect"] = _save_net(refl_net, out / f"{label}_reflect_off.s2p")
        if scenario.dut is not None:
            truth = chain.dut_network(scenario)
            written["dut_truth"] = _save_net(truth, out / f"{label}_dut_truth.s2p")
            raw = chain.embed(scenario, truth)
            written["dut"] = _save_net(raw, out / f"{label}_dut_off.s2p")
    elif args.task == "gainmap":
        if not isinstance(scenario.dut, chain.TwpaSpec):
            raise ValidationError("gainmap task requires a twpa DUT in the scenario")
        off = chain.dut_network(scenario, pump_on=False)
        raw_off = chain.embed(scenario, off)
        written["dut_off"] = _save_net(raw_off, out / f"{label}_dut_off.s2p")
        entries = []
        k = 0
        for fp in parse_range(args.pump_freqs):
            for pp in parse_range(args.pump_powers):
                on = chain.dut_network(
                    scenario, pump_on=True, pump_freq_hz=fp, pump_power_dbm=pp
                )
                raw_on = chain.embed(scenario, on, chain.sweep_stream(k))
                name = f"{label}_dut_on_{k:03d}.s2p"
                _save_net(raw_on, out / name)
                entries.append({"pump_freq_hz": fp, "pump_power_dbm": pp, "file": name})
                k += 1
        _write(out / "sweeps.json", _json_text(entries))
        written["sweeps"] = str(out / "sweeps.json")
    elif args.task == "compression":
        if not isinstance(scenario.dut, chain.TwpaSpec):
            raise ValidationError("compression task requires a twpa DUT in the scenario")
        spec = scenario.dut
        off = chain.dut_network(scenario, pump_on=False)
        raw_off = chain.embed(scenario, off)
        off_name = f"{label}_dut_off.s2p"
        written["dut_off"] = _save_net(raw_off, out / off_name)
        entries = []
        for k, ps in enumerate(parse_range(args.signal_powers)):
            on = chain.dut_network(
                scenario,
                pump_on=True,
                pump_freq_hz=spec.peak_pump_freq_hz,
                pump_power_dbm=spec.peak_pump_power_dbm,
                signal_power_dbm=ps,
            )
            raw_on = chain.embed(scenario, on, chain.sweep_stream(k))
            name = f"{label}_dut_on_ps{k:03d}.s2p"
            _save_net(raw_on, out / name)
            entries.append({"signal_power_dbm": ps, "on": name, "off": off_name})
        _write(out / "sweeps.json", _json_text(entries))
        written["sweeps"] = str(out / "sweeps.json")
    else:  # configs
        spec = scenario.dut if isinstance(scenario.dut, chain.TwpaSpec) else chain.TwpaSpec()
        for cfg in "ABCD":
            net = chain.run_configuration(cfg, scenario.grid, twpa=spec, z_ref=scenario.z_ref)
            written[cfg] = _save_net(net, out / f"{cfg}_composite_off.s2p")

    record = _record("simulate", _inputs_of(args.config), {"task": args.task, "written": written})
    _write(out / "manifest.json", _json_text(record))
    print(f"wrote {len(written)} artefacts to {out}")
    return EXIT_OK


# --- argument wiring --------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="twpacal", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("convert", help="re-emit a Touchstone file or export a CSV/JSON table")
    c.add_argument("input", help="input .s2p path or '-' for stdin")
    c.add_argument("--out", default="-", help="output path or '-' for stdout")
    c.add_argument("--format", default="RI", choices=["RI", "MA", "DB"])
    c.add_argument("--unit", default="GHz", choices=["Hz", "kHz", "MHz", "GHz"])
    c.add_argument("--table", choices=["csv", "json"], help="export a quantity table instead")
    c.add_argument(
        "--quantities",
        default="s21:db",
        help="comma list of SIJ:KIND with KIND one of db, linear, phase",
    )
    c.add_argument("--json", help="provenance/result JSON path")
    c.set_defaults(func=cmd_convert)

    def add_stand23(sp):
        sp.add_argument("--thru", required=True)
        sp.add_argument("--line", required=True)
        sp.add_argument("--reflect1", required=True, help=".s2p whose S11 is the port-1 reflect")
        sp.add_argument("--reflect2", required=True, help=".s2p whose S22 is the port-2 reflect")
        sp.add_argument(
            "--line-delay", type=float, required=True, help="nominal line delay in seconds"
        )
        sp.add_argument(
            "--reflect-offset-delay",
            type=float,
            default=0.0,
            help="nominal offset-short delay in seconds",
        )
        sp.add_argument("--line-z", type=float, default=50.0)

    c = sub.add_parser("calibrate", help="solve the TRL error model (and de-embed a DUT)")
    add_stand23(c)
    c.add_argument("--guard-deg", type=float, default=trl.DEFAULT_GUARD_DEG)
    c.add_argument("--out-errormodel", required=True)
    c.add_argument("--dut")
    c.add_argument("--out-dut")
    c.add_argument("--renormalize", type=float)
    c.add_argument("--format", default="RI", choices=["RI", "MA", "DB"])
    c.add_argument("--json")
    c.set_defaults(func=cmd_calibrate)

    c = sub.add_parser("deembed", help="apply a saved error model to a raw DUT measurement")
    c.add_argument("--errormodel", required=True)
    c.add_argument("--dut", required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--renormalize", type=float)
    c.add_argument("--format", default="RI", choices=["RI", "MA", "DB"])
    c.add_argument("--json")
    c.set_defaults(func=cmd_deembed)

    c = sub.add_parser("verify", help="re-de-embed the standards and report residuals")
    c.add_argument("--errormodel", required=True)
    add_stand23(c)
    c.add_argument("--out")
    c.add_argument("--json")
    c.set_defaults(func=cmd_verify)

    c = sub.add_parser("gain", help="pump on/off gain and its band average")
    c.add_argument("--on", required=True)
    c.add_argument("--off", required=True)
    c.add_argument("--band", help="LO:HI, e.g. 4GHz:8GHz")
    c.add_argument("--exclude", action="append", help="LO:HI, repeatable")
    c.add_argument("--out", help="per-frequency CSV path")
    c.add_argument("--json")
    c.set_defaults(func=cmd_gain)

    c = sub.add_parser("gainmap", help="band-averaged gain over a pump sweep manifest")
    c.add_argument("--manifest", required=True)
    c.add_argument("--off", required=True)
    c.add_argument("--band")
    c.add_argument("--exclude", action="append")
    c.add_argument("--out")
    c.add_argument("--json")
    c.set_defaults(func=cmd_gainmap)

    c = sub.add_parser("fit-reflection", help="fit the port mismatch from pump-off reflections")
    c.add_argument("--s11", type=float, required=True, help="band-averaged |S11|, linear")
    c.add_argument("--s22", type=float, required=True, help="band-averaged |S22|, linear")
    c.add_argument("--il", type=float, required=True, help="pump-off insertion loss, dB")
    c.add_argument("--out")
    c.add_argument("--json")
    c.set_defaults(func=cmd_fit_reflection)

    c = sub.add_parser(
        "predict-reflection", help="reflection-vs-gain table from the fitted model"
    )
    c.add_argument("--r", type=float, required=True)
    c.add_argument(
        "--il",
        type=float,
        help="reference the model gain to this insertion loss instead of measured gain",
    )
    c.add_argument("--gains", default="0:15:0.5", help="START:STOP:STEP in dB")
    c.add_argument("--out", default="-")
    c.add_argument("--json")
    c.set_defaults(func=cmd_predict_reflection)

    c = sub.add_parser("compression", help="band-averaged metrics vs signal power")
    c.add_argument("--manifest", required=True)
    c.add_argument("--band")
    c.add_argument("--exclude", action="append")
    c.add_argument("--out", required=True)
    c.add_argument("--json")
    c.set_defaults(func=cmd_compression)

    c = sub.add_parser("simulate", help="generate synthetic raw datasets from a scenario file")
    c.add_argument("--config", required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--task", default="trl", choices=["trl", "gainmap", "compression", "configs"])
    c.add_argument("--pump-freqs", default="5.6159GHz:6.1159GHz:50MHz")
    c.add_argument("--pump-powers", default="-3.7:2.3:0.5")
    c.add_argument("--signal-powers", default="-40:-5:2.5")
    c.set_defaults(func=cmd_simulate)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else EXIT_USAGE
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValidationError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except TwpacalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as exc:
        print(f"missing file: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except json.JSONDecodeError as exc:
        print(f"bad JSON input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
