"""Command-line front end.

Verbs: ``gen`` writes toy model/sequence files, ``run`` produces a JSON
report over one or more modes, ``trace`` exports one element's per-step
history as CSV, ``sweep`` re-runs an experiment across parameter values.

Exit codes: 0 success, 1 usage error, 2 input-format error, 3 capacity
error.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .accel import AccelConfig, CapacityError, EnergyModel
from .harness import (
    ConfigError,
    ExperimentResult,
    FormatError,
    TOY_KINDS,
    export_trace,
    gen_toy,
    load_model,
    load_sequence,
    render_report,
    run_experiment,
    write_model,
    write_sequence,
)
from .lstm_quant import Mode
from .pdu import PduConfig
from .sip import SipConfig

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FORMAT = 2
EXIT_CAPACITY = 3

_PDU_INT_KEYS = ("t_profile", "m_max_peak", "n_max_stable")
_PDU_FLOAT_KEYS = ("beta", "epsilon_range")
_SIP_KEYS = ("lanes", "lane_width", "reduction_latency")
_ACCEL_INT_KEYS = (
    "mu_add_cycles",
    "mu_mul_cycles",
    "mu_exp_cycles",
    "mu_comm_cycles",
    "pdu_update_cycles",
    "weight_buffer_bytes",
    "input_buffer_bytes",
    "intermediate_bytes",
    "pdu_buffer_bytes",
)
_ACCEL_FLOAT_KEYS = ("frequency_hz", "peak_bandwidth")
_ENERGY_KEYS = tuple(f.name for f in dataclasses.fields(EnergyModel))
_EXTRA_FLOAT_KEYS = ("random_p",)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # noqa: D401 - argparse hook
        raise UsageError(message)


def load_config_file(path: str | Path) -> dict[str, float | int]:
    """Flat ``key = value`` file; ints and floats only, '#' starts a comment."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    known = set(
        _PDU_INT_KEYS + _PDU_FLOAT_KEYS + _SIP_KEYS + _ACCEL_INT_KEYS + _ACCEL_FLOAT_KEYS
    ) | set(_ENERGY_KEYS) | set(_EXTRA_FLOAT_KEYS)
    values: dict[str, float | int] = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, raw = stripped.partition("=")
        key, raw = key.strip(), raw.strip()
        if key not in known:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            value = int(raw) if key in _PDU_INT_KEYS + _SIP_KEYS + _ACCEL_INT_KEYS else float(raw)
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: bad numeric value {raw!r} for {key!r}") from None
        values[key] = value
    return values


def build_configs(
    values: dict[str, float | int], n_steps: int
) -> tuple[PduConfig, AccelConfig, EnergyModel, float]:
    try:
        pdu = PduConfig.for_sequence(
            n_steps,
            **{k: values[k] for k in _PDU_INT_KEYS + _PDU_FLOAT_KEYS if k in values},
        )
        sip = SipConfig(**{k: values[k] for k in _SIP_KEYS if k in values})
        accel = AccelConfig(
            sip=sip,
            **{k: values[k] for k in _ACCEL_INT_KEYS + _ACCEL_FLOAT_KEYS if k in values},
        )
        energy = EnergyModel(**{k: values[k] for k in _ENERGY_KEYS if k in values})
    except ValueError as exc:
        raise ConfigError(f"invalid configuration: {exc}") from None
    return pdu, accel, energy, float(values.get("random_p", 0.33))


def _parse_modes(raw: str) -> list[Mode]:
    modes = []
    for name in raw.split(","):
        name = name.strip()
        try:
            modes.append(Mode(name))
        except ValueError:
            raise UsageError(
                f"unknown mode {name!r}; choose from {', '.join(m.value for m in Mode)}"
            ) from None
    return modes


def _parse_dims(raw: str) -> tuple[int, int, int, int]:
    parts = raw.split(",")
    if len(parts) != 4:
        raise UsageError("--dims must be 'layers,input_size,cell_size,steps'")
    try:
        dims = tuple(int(p) for p in parts)
    except ValueError:
        raise UsageError(f"--dims must be four integers, got {raw!r}") from None
    if min(dims) < 1:
        raise UsageError("--dims values must all be >= 1")
    return dims  # type: ignore[return-value]


def _experiment_from_args(args: argparse.Namespace, modes: list[Mode]) -> ExperimentResult:
    model = load_model(args.model)
    seq = load_sequence(args.input)
    values = load_config_file(args.config) if args.config else {}
    pdu, accel, energy, random_p = build_configs(values, len(seq))
    return run_experiment(
        model,
        seq,
        modes,
        accel_config=accel,
        energy_model=energy,
        pdu_config=pdu,
        random_p=random_p,
        seed=args.seed,
    )


def _cmd_gen(args: argparse.Namespace) -> int:
    dims = _parse_dims(args.dims)
    try:
        model, seq = gen_toy(args.kind, dims, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    model_path = out.with_name(out.name + ".model")
    seq_path = out.with_name(out.name + ".seq")
    write_model(model, model_path)
    write_sequence(seq, seq_path)
    print(f"wrote {model_path}")
    print(f"wrote {model_path}.bin")
    print(f"wrote {seq_path}")
    return EXIT_OK


def _cmd_run(args: argparse.Namespace) -> int:
    modes = _parse_modes(args.mode)
    result = _experiment_from_args(args, modes)
    if args.report:
        Path(args.report).write_text(result.report_text)
        print(f"wrote {args.report}")
    else:
        sys.stdout.write(result.report_text)
    return EXIT_OK


def _cmd_trace(args: argparse.Namespace) -> int:
    modes = _parse_modes(args.mode)
    if len(modes) != 1:
        raise UsageError("trace takes exactly one mode")
    result = _experiment_from_args(args, modes)
    try:
        export_trace(result, modes[0], args.element, args.out, layer=args.layer)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_sweep(args: argparse.Namespace) -> int:
    modes = _parse_modes(args.mode)
    sweepable = set(_PDU_INT_KEYS + _PDU_FLOAT_KEYS + _EXTRA_FLOAT_KEYS)
    if args.param not in sweepable:
        raise UsageError(f"--param must be one of {sorted(sweepable)}")
    try:
        raw_values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"--values must be comma-separated numbers, got {args.values!r}") from None
    if not raw_values:
        raise UsageError("--values is empty")

    model = load_model(args.model)
    seq = load_sequence(args.input)
    base = load_config_file(args.config) if args.config else {}
    points = []
    for value in raw_values:
        values = dict(base)
        values[args.param] = int(value) if args.param in _PDU_INT_KEYS else value
        pdu, accel, energy, random_p = build_configs(values, len(seq))
        result = run_experiment(
            model,
            seq,
            modes,
            accel_config=accel,
            energy_model=energy,
            pdu_config=pdu,
            random_p=random_p,
            seed=args.seed,
        )
        points.append({"value": value, "report": result.report})
    sweep_report = {
        "schema_version": 1,
        "sweep": {"param": args.param, "points": points},
    }
    text = render_report(sweep_report)
    if args.report:
        Path(args.report).write_text(text)
        print(f"wrote {args.report}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="dynprec", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a toy model and input sequence")
    gen.add_argument("--kind", required=True, choices=TOY_KINDS)
    gen.add_argument("--dims", required=True, help="layers,input_size,cell_size,steps")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="output path prefix")
    gen.set_defaults(func=_cmd_gen)

    run = sub.add_parser("run", help="simulate one or more modes and report")
    run.add_argument("--model", required=True)
    run.add_argument("--input", required=True)
    run.add_argument("--mode", default="static8,static4,dynamic", help="comma-separated modes")
    run.add_argument("--config", default=None)
    run.add_argument("--report", default=None, help="report path (stdout when omitted)")
    run.add_argument("--seed", type=int, default=0)
    run.set_defaults(func=_cmd_run)

    trace = sub.add_parser("trace", help="export one element's per-step trace as CSV")
    trace.add_argument("--model", required=True)
    trace.add_argument("--input", required=True)
    trace.add_argument("--mode", default="dynamic")
    trace.add_argument("--config", default=None)
    trace.add_argument("--element", type=int, required=True)
    trace.add_argument("--layer", type=int, default=0)
    trace.add_argument("--out", required=True)
    trace.add_argument("--seed", type=int, default=0)
    trace.set_defaults(func=_cmd_trace)

    sweep = sub.add_parser("sweep", help="re-run an experiment across parameter values")
    sweep.add_argument("--model", required=True)
    sweep.add_argument("--input", required=True)
    sweep.add_argument("--param", required=True)
    sweep.add_argument("--values", required=True, help="comma-separated values")
    sweep.add_argument("--mode", default="static8,dynamic")
    sweep.add_argument("--config", default=None)
    sweep.add_argument("--report", default=None)
    sweep.add_argument("--seed", type=int, default=0)
    sweep.set_defaults(func=_cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except SystemExit as exc:  # argparse --help
        return int(exc.code or 0)


def console_entry() -> None:
    sys.exit(main())
