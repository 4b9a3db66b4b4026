"""Experiment orchestration: file formats, toy generators, reports, traces.

Model files are a text manifest next to a raw little-endian float32 blob,
so the tensor layout stays diff-auditable. Tensors appear in layer order;
within a layer in gate order input, forget, updater, output; within a
gate as w_x, w_h, b, all row-major. The manifest declares every tensor's
byte offset and size and the loader checks that they tile the blob
exactly. Sequence files are a small binary header (magic, step count,
vector width) followed by step-major float32 data.

Reports are versioned JSON rendered with sorted keys, so a run with fixed
seeds is byte-reproducible.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .accel import AccelConfig, EnergyModel, RunStats, SimResult, compare, simulate
from .lstm_quant import (
    Mode,
    QuantizedModel,
    peak_flags_from_phases,
    quantize_model,
    relative_error_stats,
    sequence_fingerprint,
)
from .lstm_ref import GateWeights, InputSequence, LstmLayer, LstmModel, StateTrace, run_fp32
from .pdu import PduConfig, Phase, classify_trace

REPORT_SCHEMA_VERSION = 1
SEQUENCE_MAGIC = b"LSTMSEQ1"
MODEL_FORMAT = "lstm-model"
MODEL_VERSION = 1
TENSOR_PARTS = ("w_x", "w_h", "b")
GATE_KEYS = ("input", "forget", "updater", "output")
_F32 = np.dtype("<f4")


class FormatError(Exception):
    """An input file does not match its declared format."""


class ModelFormatError(FormatError):
    pass


class SequenceFormatError(FormatError):
    pass


class ConfigError(FormatError):
    pass


# ---------------------------------------------------------------------------
# model files


def _gate_tensors(layer: LstmLayer) -> list[tuple[str, np.ndarray]]:
    out = []
    for key, gate in zip(GATE_KEYS, layer.gates()):
        out.append((f"{key}.w_x", gate.w_x))
        out.append((f"{key}.w_h", gate.w_h))
        out.append((f"{key}.b", gate.b))
    return out


def write_model(model: LstmModel, path: str | Path) -> None:
    path = Path(path)
    blob_path = path.with_name(path.name + ".bin")
    lines = [
        f"format = {MODEL_FORMAT}",
        f"version = {MODEL_VERSION}",
        f"blob = {blob_path.name}",
        f"layers = {len(model.layers)}",
    ]
    chunks: list[bytes] = []
    offset = 0
    for L, layer in enumerate(model.layers):
        lines.append(f"layer{L}.input_size = {layer.input_size}")
        lines.append(f"layer{L}.cell_size = {layer.cell_size}")
        for name, tensor in _gate_tensors(layer):
            raw = np.ascontiguousarray(tensor, dtype=_F32).tobytes()
            lines.append(f"tensor.layer{L}.{name} = {offset}:{len(raw)}")
            chunks.append(raw)
            offset += len(raw)
    lines.append(f"blob_bytes = {offset}")
    path.write_text("\n".join(lines) + "\n")
    blob_path.write_bytes(b"".join(chunks))


def _parse_manifest(path: Path) -> dict[str, str]:
    entries: dict[str, str] = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ModelFormatError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        entries[key.strip()] = value.strip()
    return entries


def _manifest_int(entries: dict[str, str], key: str, path: Path) -> int:
    if key not in entries:
        raise ModelFormatError(f"{path}: missing manifest key {key!r}")
    try:
        return int(entries[key])
    except ValueError:
        raise ModelFormatError(f"{path}: key {key!r} is not an integer: {entries[key]!r}") from None


def load_model(path: str | Path) -> LstmModel:
    path = Path(path)
    if not path.exists():
        raise ModelFormatError(f"model manifest not found: {path}")
    entries = _parse_manifest(path)
    if entries.get("format") != MODEL_FORMAT:
        raise ModelFormatError(f"{path}: not a {MODEL_FORMAT} manifest")
    if _manifest_int(entries, "version", path) != MODEL_VERSION:
        raise ModelFormatError(f"{path}: unsupported version {entries['version']}")
    n_layers = _manifest_int(entries, "layers", path)
    if n_layers < 1:
        raise ModelFormatError(f"{path}: layer count must be >= 1")
    declared_bytes = _manifest_int(entries, "blob_bytes", path)

    blob_path = path.with_name(entries.get("blob", path.name + ".bin"))
    if not blob_path.exists():
        raise ModelFormatError(f"tensor blob not found: {blob_path}")
    blob = blob_path.read_bytes()
    if len(blob) != declared_bytes:
        raise ModelFormatError(
            f"{blob_path}: blob is {len(blob)} bytes but the manifest declares {declared_bytes}"
        )

    spans: list[tuple[int, int, str]] = []

    def tensor(L: int, name: str, shape: tuple[int, ...]) -> np.ndarray:
        key = f"tensor.layer{L}.{name}"
        if key not in entries:
            raise ModelFormatError(f"{path}: missing manifest key {key!r}")
        try:
            offset_s, _, size_s = entries[key].partition(":")
            offset, size = int(offset_s), int(size_s)
        except ValueError:
            raise ModelFormatError(f"{path}: key {key!r} must be 'offset:size'") from None
        expected = int(np.prod(shape)) * 4
        if size != expected:
            raise ModelFormatError(
                f"{path}: {key} declares {size} bytes but shape {shape} needs {expected}"
            )
        if offset < 0 or offset + size > len(blob):
            raise ModelFormatError(
                f"{blob_path}: {key} spans bytes [{offset}, {offset + size}) outside the blob"
            )
        spans.append((offset, size, key))
        flat = np.frombuffer(blob, dtype=_F32, count=expected // 4, offset=offset)
        return flat.astype(np.float64).reshape(shape)

    layers = []
    prev_cell = None
    for L in range(n_layers):
        input_size = _manifest_int(entries, f"layer{L}.input_size", path)
        cell_size = _manifest_int(entries, f"layer{L}.cell_size", path)
        if input_size < 1 or cell_size < 1:
            raise ModelFormatError(f"{path}: layer {L} sizes must be >= 1")
        if prev_cell is not None and input_size != prev_cell:
            raise ModelFormatError(
                f"{path}: layer {L} input size {input_size} != layer {L - 1} cell size {prev_cell}"
            )
        prev_cell = cell_size
        gates = []
        for key in GATE_KEYS:
            gates.append(
                GateWeights(
                    tensor(L, f"{key}.w_x", (cell_size, input_size)),
                    tensor(L, f"{key}.w_h", (cell_size, cell_size)),
                    tensor(L, f"{key}.b", (cell_size,)),
                )
            )
        layers.append(LstmLayer(*gates))

    spans.sort()
    cursor = 0
    for offset, size, key in spans:
        if offset != cursor:
            raise ModelFormatError(
                f"{blob_path}: tensors must tile the blob; {key} starts at byte {offset}, expected {cursor}"
            )
        cursor = offset + size
    if cursor != len(blob):
        raise ModelFormatError(
            f"{blob_path}: declared tensors cover {cursor} bytes of a {len(blob)}-byte blob"
        )
    return LstmModel(tuple(layers))


# ---------------------------------------------------------------------------
# sequence files


def write_sequence(seq: InputSequence, path: str | Path) -> None:
    path = Path(path)
    header = SEQUENCE_MAGIC + struct.pack("<II", len(seq), seq.width)
    payload = np.ascontiguousarray(seq.steps, dtype=_F32).tobytes()
    path.write_bytes(header + payload)


def load_sequence(path: str | Path) -> InputSequence:
    path = Path(path)
    if not path.exists():
        raise SequenceFormatError(f"sequence file not found: {path}")
    raw = path.read_bytes()
    header_len = len(SEQUENCE_MAGIC) + 8
    if len(raw) < header_len:
        raise SequenceFormatError(f"{path}: header needs {header_len} bytes, file has {len(raw)}")
    if raw[: len(SEQUENCE_MAGIC)] != SEQUENCE_MAGIC:
        raise SequenceFormatError(f"{path}: bad magic {raw[:len(SEQUENCE_MAGIC)]!r}")
    steps, width = struct.unpack("<II", raw[len(SEQUENCE_MAGIC) : header_len])
    if steps < 1 or width < 1:
        raise SequenceFormatError(f"{path}: header declares {steps} steps of width {width}")
    expected = header_len + steps * width * 4
    if len(raw) != expected:
        raise SequenceFormatError(f"{path}: expected {expected} bytes, found {len(raw)}")
    data = np.frombuffer(raw, dtype=_F32, count=steps * width, offset=header_len)
    return InputSequence(data.astype(np.float64).reshape(steps, width))


# ---------------------------------------------------------------------------
# toy generators

TOY_KINDS = ("flat", "peaky", "random")


SPIKE_HOLD_STEPS = 3


def peaky_spike_steps(n_steps: int) -> tuple[int, ...]:
    """Deterministic spike onsets; spaced so trackers settle between spikes."""
    t_profile = min(max(round(0.05 * n_steps), 4), 64)
    start = t_profile + 8
    spacing = max(2 * SPIKE_HOLD_STEPS + 8, round(0.07 * n_steps))
    steps = []
    t = start
    while t + SPIKE_HOLD_STEPS < n_steps and len(steps) < 10:
        steps.append(t)
        t += spacing
    return tuple(steps)


def _flat_layer(rng: np.random.Generator, input_size: int, cell_size: int) -> LstmLayer:
    def gate(bias: np.ndarray) -> GateWeights:
        return GateWeights(
            rng.uniform(-0.05, 0.05, (cell_size, input_size)),
            np.zeros((cell_size, cell_size)),
            bias,
        )

    return LstmLayer(
        input_gate=gate(rng.uniform(-0.2, 0.2, cell_size)),
        # strong forget-gate decay pins the cell state to its fixed point quickly
        forget_gate=gate(np.full(cell_size, -2.0)),
        updater_gate=gate(rng.uniform(-0.5, 0.5, cell_size)),
        output_gate=gate(rng.uniform(-0.2, 0.2, cell_size)),
    )


def _peaky_layer(rng: np.random.Generator, input_size: int, cell_size: int) -> LstmLayer:
    def noise() -> np.ndarray:
        return rng.uniform(-0.02, 0.02, (cell_size, input_size))

    w_i, w_f, w_g, w_o = noise(), noise(), noise(), noise()
    # element 0 listens to input channel 0: a sustained spike drives its input
    # and updater gates high, so its cell state climbs over the spike steps and
    # then decays back into the profiled band within a few steps; all other
    # elements keep a strong forget-gate decay and stay stable
    w_i[0, 0] = 1.0
    w_g[0, 0] = 1.0
    w_f[0, 0] = 0.0
    b_i = np.zeros(cell_size)
    b_f = np.full(cell_size, -2.0)
    b_f[0] = -1.1
    b_g = np.full(cell_size, 0.55)
    b_o = np.zeros(cell_size)
    zeros = np.zeros((cell_size, cell_size))
    return LstmLayer(
        input_gate=GateWeights(w_i, zeros, b_i),
        forget_gate=GateWeights(w_f, zeros, b_f),
        updater_gate=GateWeights(w_g, zeros, b_g),
        output_gate=GateWeights(w_o, zeros, b_o),
    )


def _random_layer(rng: np.random.Generator, input_size: int, cell_size: int) -> LstmLayer:
    def gate() -> GateWeights:
        return GateWeights(
            rng.uniform(-0.5, 0.5, (cell_size, input_size)),
            rng.uniform(-0.5, 0.5, (cell_size, cell_size)),
            rng.uniform(-0.5, 0.5, cell_size),
        )

    return LstmLayer(gate(), gate(), gate(), gate())


def gen_toy(
    kind: str, dims: tuple[int, int, int, int], seed: int
) -> tuple[LstmModel, InputSequence]:
    """Deterministic desk-scale model/input pairs with known cell-state behavior.

    ``dims`` is (layers, input_size, cell_size, steps). ``flat`` settles to a
    near-constant cell state, ``peaky`` injects spikes on element 0 of layer 0,
    ``random`` draws uniform weights in [-0.5, 0.5].
    """
    if kind not in TOY_KINDS:
        raise ValueError(f"kind must be one of {TOY_KINDS}, got {kind!r}")
    n_layers, input_size, cell_size, n_steps = dims
    if min(dims) < 1:
        raise ValueError(f"all dims must be >= 1, got {dims}")
    rng = np.random.default_rng(seed)

    layers = []
    for L in range(n_layers):
        layer_in = input_size if L == 0 else cell_size
        if kind == "random":
            layers.append(_random_layer(rng, layer_in, cell_size))
        elif kind == "peaky" and L == 0:
            layers.append(_peaky_layer(rng, layer_in, cell_size))
        else:
            layers.append(_flat_layer(rng, layer_in, cell_size))
    model = LstmModel(tuple(layers))

    if kind == "flat":
        x0 = rng.uniform(-1.0, 1.0, input_size)
        steps = np.tile(x0, (n_steps, 1))
    elif kind == "peaky":
        steps = rng.uniform(-0.03, 0.03, (n_steps, input_size))
        for onset in peaky_spike_steps(n_steps):
            steps[onset : onset + SPIKE_HOLD_STEPS, 0] = 4.0
    else:
        steps = rng.uniform(-1.0, 1.0, (n_steps, input_size))
    return model, InputSequence(steps)


# ---------------------------------------------------------------------------
# experiments

BASELINE_MODE = Mode.STATIC8

_PHASE_NAMES = {Phase.PROFILING: "profiling", Phase.STABLE: "stable", Phase.IN_PEAK: "in_peak"}


@dataclass(frozen=True, eq=False)
class ExperimentResult:
    model_hash: str
    sequence_hash: str
    fp_trace: StateTrace
    fp_phases: tuple[np.ndarray, ...]
    sims: dict[str, SimResult]
    report: dict
    report_text: str


def _mean_abs_cell_error(fp: StateTrace, q: StateTrace) -> float:
    diffs = [np.abs(qc - fc) for qc, fc in zip(q.c, fp.c)]
    return float(np.concatenate([d.ravel() for d in diffs]).mean())


def _run_entry(stats: RunStats, fp: StateTrace, sim: SimResult, flags) -> dict:
    peak_err, stable_err = relative_error_stats(fp, sim.run.trace, flags)
    return {
        "total_cycles": int(stats.total_cycles),
        "wall_time_s": float(stats.wall_time_s),
        "energy_total": float(stats.energy_total),
        "energy_breakdown": {k: float(v) for k, v in stats.energy_breakdown.items()},
        "low_precision_usage": float(stats.low_precision_usage),
        "mean_abs_cell_error": _mean_abs_cell_error(fp, sim.run.trace),
        "peak_relative_error": peak_err,
        "stable_relative_error": stable_err,
        "speedup_vs_static8": stats.speedup_vs.get("static8"),
        "energy_savings_vs_static8": stats.energy_savings_vs.get("static8"),
    }


def run_experiment(
    model: LstmModel,
    seq: InputSequence,
    modes: list[Mode],
    *,
    accel_config: AccelConfig | None = None,
    energy_model: EnergyModel | None = None,
    pdu_config: PduConfig | None = None,
    random_p: float = 0.33,
    seed: int = 0,
) -> ExperimentResult:
    """Run the full-precision reference plus each requested mode and report.

    The 8-bit static run is always simulated as the comparison baseline, even
    when not requested. Peak/stable error partitions come from running the
    trackers over the reference cell-state trace, so every mode is measured
    against the same peak structure.
    """
    accel_config = accel_config if accel_config is not None else AccelConfig()
    energy_model = energy_model if energy_model is not None else EnergyModel()
    if pdu_config is None:
        pdu_config = PduConfig.for_sequence(len(seq))

    qmodel = quantize_model(model)
    fp_trace = run_fp32(model, seq)
    fp_phases = tuple(classify_trace(layer_c, pdu_config)[0] for layer_c in fp_trace.c)
    fp_flags = peak_flags_from_phases(fp_phases)

    ordered: list[Mode] = []
    for mode in [BASELINE_MODE, *modes]:
        if mode not in ordered:
            ordered.append(mode)

    sims: dict[str, SimResult] = {}
    for mode in ordered:
        sims[mode.value] = simulate(
            qmodel,
            seq,
            mode,
            accel_config,
            energy_model,
            pdu_config,
            random_p=random_p,
            random_seed=seed,
        )
    baseline = sims[BASELINE_MODE.value].stats
    for sim in sims.values():
        speedup, savings = compare(sim.stats, baseline)
        sim.stats.speedup_vs["static8"] = speedup
        sim.stats.energy_savings_vs["static8"] = savings

    runs = {
        name: _run_entry(sim.stats, fp_trace, sim, fp_flags) for name, sim in sims.items()
    }
    histogram = {
        name: [
            [int(n) for n in (bits == 4).sum(axis=0)] for bits in sim.run.precision_bits
        ]
        for name, sim in sims.items()
    }
    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "model": {
            "hash": qmodel.fingerprint,
            "layers": [
                {"input_size": layer.input_size, "cell_size": layer.cell_size}
                for layer in model.layers
            ],
        },
        "sequence": {
            "hash": sequence_fingerprint(seq),
            "steps": len(seq),
            "width": seq.width,
        },
        "pdu_config": asdict(pdu_config),
        "accel_config": asdict(accel_config),
        "energy_model": asdict(energy_model),
        "random_p": random_p,
        "seed": seed,
        "runs": runs,
        "precision_histogram": histogram,
    }
    return ExperimentResult(
        model_hash=qmodel.fingerprint,
        sequence_hash=sequence_fingerprint(seq),
        fp_trace=fp_trace,
        fp_phases=fp_phases,
        sims=sims,
        report=report,
        report_text=render_report(report),
    )


def render_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def export_trace(
    result: ExperimentResult,
    mode: Mode | str,
    element: int,
    path: str | Path,
    layer: int = 0,
) -> None:
    """One CSV row per time step for one cell-state element.

    Columns: step, reference cell state, quantized cell state, precision bits
    used that step, and the tracker phase (the run's own phases in dynamic
    mode, otherwise phases derived from the reference trace).
    """
    mode_name = mode.value if isinstance(mode, Mode) else str(mode)
    if mode_name not in result.sims:
        raise ValueError(f"mode {mode_name!r} was not part of this experiment")
    sim = result.sims[mode_name]
    if not 0 <= layer < result.fp_trace.n_layers:
        raise ValueError(f"layer {layer} out of range")
    cell_size = result.fp_trace.c[layer].shape[1]
    if not 0 <= element < cell_size:
        raise ValueError(f"element {element} out of range for cell size {cell_size}")

    c_fp = result.fp_trace.c[layer][:, element]
    c_q = sim.run.trace.c[layer][:, element]
    bits = sim.run.precision_bits[layer][:, element]
    phases = (sim.run.phases or result.fp_phases)[layer][:, element]

    lines = ["step,c_fp32,c_quantized,precision_bits,phase"]
    for t in range(len(c_fp)):
        phase = _PHASE_NAMES[Phase(int(phases[t]))]
        lines.append(f"{t},{float(c_fp[t])!r},{float(c_q[t])!r},{int(bits[t])},{phase}")
    Path(path).write_text("\n".join(lines) + "\n")
