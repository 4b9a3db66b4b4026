"""Cycle and energy model of the bit-serial LSTM accelerator.

Timing assumptions:

1. The four gates of a layer run on four parallel compute units, so one
   cell element costs one serial pass over the forward fan-in plus one
   over the recurrent fan-in, at that element's precision.
2. The scalar unit (activations, rescaling, requantization) and the peak
   detector are pipelined behind the dot-product units; per step they
   only contribute a fixed drain tail, charged when it exceeds the
   dot-product time, plus a one-off pipeline fill at sequence start.
   The model is therefore faithful in the dot-product-bound regime and
   floors at the drain constant for very small layers.
3. Weights stay resident in the weight buffer; off-chip traffic is the
   streamed input and final output, checked against a flat peak
   bandwidth. Steps that would exceed it are stretched proportionally.

Energy is activity counts times per-event coefficients plus leakage per
cycle. The shipped coefficients are normalized units, not measurements;
the one deliberately fixed ratio is nibble reads costing half of byte
reads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .lstm_ref import InputSequence
from .lstm_quant import (
    MU_ADDS_PER_ELEMENT,
    MU_EXPS_PER_ELEMENT,
    MU_MULS_PER_ELEMENT,
    Mode,
    QuantRunResult,
    QuantizedModel,
    run_quantized,
    sequence_fingerprint,
)
from .pdu import ElementTracker, PduConfig
from .sip import SipConfig, sip_cycles

KIB = 1024
MIB = 1024 * 1024

# Capacity model working-set sizes, in bytes.
WEIGHT_ENTRY_BYTES = 1  # packed dual-precision code
INPUT_ENTRY_BYTES = 2  # high-precision byte plus cached adjusted low byte
STATE_ENTRY_BYTES = 4  # one 32-bit real
PDU_ENTRY_BYTES = 8  # packed tracker record


class CapacityError(RuntimeError):
    """A configured on-chip buffer cannot hold the model's working set."""

    def __init__(self, buffer: str, required: int, available: int) -> None:
        self.buffer = buffer
        super().__init__(
            f"{buffer} needs {required} bytes but only {available} are configured"
        )


@dataclass(frozen=True)
class AccelConfig:
    frequency_hz: float = 500e6
    sip: SipConfig = SipConfig()
    mu_add_cycles: int = 2
    mu_mul_cycles: int = 4
    mu_exp_cycles: int = 5
    mu_comm_cycles: int = 2
    pdu_update_cycles: int = 1
    weight_buffer_bytes: int = 2 * MIB
    input_buffer_bytes: int = 8 * KIB
    intermediate_bytes: int = 6 * MIB
    pdu_buffer_bytes: int = 8 * KIB
    peak_bandwidth: float = 30e9

    def __post_init__(self) -> None:
        if self.frequency_hz <= 0 or self.peak_bandwidth <= 0:
            raise ValueError("frequency and peak bandwidth must be positive")
        for name in (
            "mu_add_cycles",
            "mu_mul_cycles",
            "mu_exp_cycles",
            "mu_comm_cycles",
            "pdu_update_cycles",
        ):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in (
            "weight_buffer_bytes",
            "input_buffer_bytes",
            "intermediate_bytes",
            "pdu_buffer_bytes",
        ):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    def mu_drain_cycles(self) -> int:
        """Latency chain of one element through the scalar unit, plus hand-off."""
        return (
            self.mu_comm_cycles
            + MU_ADDS_PER_ELEMENT * self.mu_add_cycles
            + MU_MULS_PER_ELEMENT * self.mu_mul_cycles
            + MU_EXPS_PER_ELEMENT * self.mu_exp_cycles
        )

    def without_overheads(self) -> "AccelConfig":
        """Dot-product-only timing: no scalar-unit or tracker latency."""
        return replace(
            self,
            mu_add_cycles=0,
            mu_mul_cycles=0,
            mu_exp_cycles=0,
            mu_comm_cycles=0,
            pdu_update_cycles=0,
        )


@dataclass(frozen=True)
class EnergyModel:
    """Per-event energy coefficients in normalized units."""

    weight_byte_read: float = 1.0
    weight_nibble_read: float = 0.5
    input_elem_read: float = 1.0
    sip_bit_op: float = 0.02
    mu_add: float = 0.2
    mu_mul: float = 0.4
    mu_exp: float = 1.0
    pdu_update: float = 0.3
    offset_adjust: float = 0.1
    static_power: float = 5.0

    def __post_init__(self) -> None:
        for name in self.__dataclass_fields__:
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.weight_nibble_read > self.weight_byte_read:
            raise ValueError("a nibble read cannot cost more than a byte read")

    @classmethod
    def zero_dynamic(cls, static_power: float = 5.0) -> "EnergyModel":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, static_power)


@dataclass
class RunStats:
    mode: str
    total_cycles: int
    wall_time_s: float
    energy_total: float
    energy_breakdown: dict[str, float]
    low_precision_usage: float
    model_hash: str
    sequence_hash: str
    speedup_vs: dict[str, float] = field(default_factory=dict)
    energy_savings_vs: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class SimResult:
    stats: RunStats
    run: QuantRunResult


def check_capacity(
    qmodel: QuantizedModel, seq: InputSequence, config: AccelConfig, dynamic: bool
) -> None:
    """Working-set checks; each buffer holds one layer's data at a time."""
    max_gate_weights = max(
        layer.cell_size * (layer.input_size + layer.cell_size) for layer in qmodel.layers
    )
    if max_gate_weights * WEIGHT_ENTRY_BYTES > config.weight_buffer_bytes:
        raise CapacityError("weight buffer", max_gate_weights * WEIGHT_ENTRY_BYTES, config.weight_buffer_bytes)

    max_fan = max(layer.input_size + layer.cell_size for layer in qmodel.layers)
    if max_fan * INPUT_ENTRY_BYTES > config.input_buffer_bytes:
        raise CapacityError("input buffer", max_fan * INPUT_ENTRY_BYTES, config.input_buffer_bytes)

    max_cell = max(layer.cell_size for layer in qmodel.layers)
    needed = len(seq) * max_cell * STATE_ENTRY_BYTES
    if needed > config.intermediate_bytes:
        raise CapacityError("intermediate memory", needed, config.intermediate_bytes)

    if dynamic and max_cell * PDU_ENTRY_BYTES > config.pdu_buffer_bytes:
        raise CapacityError("peak detector buffer", max_cell * PDU_ENTRY_BYTES, config.pdu_buffer_bytes)


def _step_cycles(
    qmodel: QuantizedModel,
    run: QuantRunResult,
    config: AccelConfig,
    dynamic: bool,
) -> tuple[int, list[int]]:
    per_layer_cost = []
    for layer in qmodel.layers:
        c8 = sip_cycles(layer.input_size, 8, config.sip) + sip_cycles(layer.cell_size, 8, config.sip)
        c4 = sip_cycles(layer.input_size, 4, config.sip) + sip_cycles(layer.cell_size, 4, config.sip)
        per_layer_cost.append((c8, c4))

    mu_drain = config.mu_drain_cycles()
    pdu_drain = config.pdu_update_cycles if dynamic else 0

    in0 = qmodel.layers[0].input_size
    out_cell = qmodel.layers[-1].cell_size
    dram_bytes = (in0 + out_cell) * STATE_ENTRY_BYTES
    min_step_cycles = math.ceil(dram_bytes * config.frequency_hz / config.peak_bandwidth)

    n_steps = run.trace.n_steps
    step_cycles: list[int] = []
    for t in range(n_steps):
        cycles = 0
        for L, (c8, c4) in enumerate(per_layer_cost):
            bits = run.precision_bits[L][t]
            n_high = int((bits == 8).sum())
            n_low = bits.shape[0] - n_high
            dpu = n_high * c8 + n_low * c4
            cycles += max(dpu, mu_drain, pdu_drain)
        step_cycles.append(max(cycles, min_step_cycles))

    fill = mu_drain + pdu_drain
    return fill + sum(step_cycles), step_cycles


def _energy(
    run: QuantRunResult, total_cycles: int, em: EnergyModel
) -> tuple[float, dict[str, float]]:
    bytes_read = sum(a.weight_bytes for a in run.activity)
    nibbles_read = sum(a.weight_nibbles for a in run.activity)
    input_elems = sum(a.input_elems for a in run.activity)
    adjusted = sum(a.input_adjusted for a in run.activity)
    bit_ops = sum(a.sip_bit_ops for a in run.activity)
    adds = sum(a.mu_adds for a in run.activity)
    muls = sum(a.mu_muls for a in run.activity)
    exps = sum(a.mu_exps for a in run.activity)
    pdu_updates = sum(a.pdu_updates for a in run.activity)

    breakdown = {
        "weight_fetch": bytes_read * em.weight_byte_read + nibbles_read * em.weight_nibble_read,
        "input_fetch": input_elems * em.input_elem_read + adjusted * em.offset_adjust,
        "dot_product": bit_ops * em.sip_bit_op,
        "mu": adds * em.mu_add + muls * em.mu_mul + exps * em.mu_exp,
        "pdu": pdu_updates * em.pdu_update,
        "static": total_cycles * em.static_power,
    }
    return sum(breakdown.values()), breakdown


def simulate(
    qmodel: QuantizedModel,
    seq: InputSequence,
    mode: Mode,
    accel_config: AccelConfig | None = None,
    energy_model: EnergyModel | None = None,
    pdu_config: PduConfig | None = None,
    *,
    random_p: float = 0.33,
    random_seed: int = 0,
    trackers: list[list[ElementTracker]] | None = None,
) -> SimResult:
    """Run the quantized network and account its cycles and energy."""
    config = accel_config if accel_config is not None else AccelConfig()
    em = energy_model if energy_model is not None else EnergyModel()
    dynamic = mode is Mode.DYNAMIC
    check_capacity(qmodel, seq, config, dynamic)

    run = run_quantized(
        qmodel,
        seq,
        mode,
        pdu_config,
        random_p=random_p,
        random_seed=random_seed,
        trackers=trackers,
    )
    total_cycles, _ = _step_cycles(qmodel, run, config, dynamic)
    energy_total, breakdown = _energy(run, total_cycles, em)

    stats = RunStats(
        mode=mode.value,
        total_cycles=total_cycles,
        wall_time_s=total_cycles / config.frequency_hz,
        energy_total=energy_total,
        energy_breakdown=breakdown,
        low_precision_usage=run.low_precision_usage,
        model_hash=qmodel.fingerprint,
        sequence_hash=sequence_fingerprint(seq),
    )
    return SimResult(stats=stats, run=run)


def compare(stats_a: RunStats, stats_b: RunStats) -> tuple[float, float]:
    """Speedup and energy savings of run ``a`` measured against baseline ``b``."""
    if stats_a.model_hash != stats_b.model_hash or stats_a.sequence_hash != stats_b.sequence_hash:
        raise ValueError("runs cover different models or sequences and cannot be compared")
    speedup = stats_b.total_cycles / stats_a.total_cycles
    energy_savings = 1.0 - stats_a.energy_total / stats_b.energy_total
    return speedup, energy_savings
