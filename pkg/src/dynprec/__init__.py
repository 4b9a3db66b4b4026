"""Quantized LSTM inference with per-element dynamic precision selection."""

from .accel import AccelConfig, CapacityError, EnergyModel, RunStats, SimResult, compare, simulate
from .harness import (
    ExperimentResult,
    export_trace,
    gen_toy,
    load_model,
    load_sequence,
    run_experiment,
    write_model,
    write_sequence,
)
from .lstm_quant import (
    Mode,
    QuantizedModel,
    StepActivity,
    neuron_eval,
    quantize_model,
    relative_error_stats,
    run_quantized,
)
from .lstm_ref import (
    GateWeights,
    InputSequence,
    LstmLayer,
    LstmModel,
    LstmState,
    StateTrace,
    cell_step,
    gate_eval,
    run_fp32,
)
from .pdu import ElementTracker, PduConfig, Phase, Precision, pdu_batch_observe, pdu_observe, thresholds
from .quant import (
    DualIndex,
    QIndex,
    QuantParams,
    QuantizedVector,
    dequantize,
    dot_int,
    encode_dual,
    extract_high,
    extract_low,
    quant_step,
    quantize,
    rescale,
)
from .sip import SipConfig, SipResult, sip_cycles, sip_dot

__all__ = [
    "AccelConfig",
    "CapacityError",
    "DualIndex",
    "ElementTracker",
    "EnergyModel",
    "ExperimentResult",
    "GateWeights",
    "InputSequence",
    "LstmLayer",
    "LstmModel",
    "LstmState",
    "Mode",
    "PduConfig",
    "Phase",
    "Precision",
    "QIndex",
    "QuantParams",
    "QuantizedModel",
    "QuantizedVector",
    "RunStats",
    "SimResult",
    "SipConfig",
    "SipResult",
    "StateTrace",
    "StepActivity",
    "cell_step",
    "compare",
    "dequantize",
    "dot_int",
    "encode_dual",
    "export_trace",
    "extract_high",
    "extract_low",
    "gate_eval",
    "gen_toy",
    "load_model",
    "load_sequence",
    "neuron_eval",
    "pdu_batch_observe",
    "pdu_observe",
    "quant_step",
    "quantize",
    "quantize_model",
    "relative_error_stats",
    "rescale",
    "run_experiment",
    "run_fp32",
    "run_quantized",
    "simulate",
    "sip_cycles",
    "sip_dot",
    "thresholds",
    "write_model",
    "write_sequence",
]
