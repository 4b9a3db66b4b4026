import dataclasses
import math

import numpy as np
import pytest

from dynprec.accel import (
    AccelConfig,
    CapacityError,
    EnergyModel,
    check_capacity,
    compare,
    simulate,
)
from dynprec.lstm_ref import GateWeights, InputSequence, LstmLayer, LstmModel
from dynprec.lstm_quant import Mode, quantize_model
from dynprec.pdu import PduConfig


def _random_model(rng, layer_dims, scale=0.5):
    layers = []
    for input_size, cell_size in layer_dims:
        gates = [
            GateWeights(
                rng.uniform(-scale, scale, (cell_size, input_size)),
                rng.uniform(-scale, scale, (cell_size, cell_size)),
                rng.uniform(-scale, scale, cell_size),
            )
            for _ in range(4)
        ]
        layers.append(LstmLayer(*gates))
    return LstmModel(tuple(layers))


@pytest.fixture(scope="module")
def toy():
    rng = np.random.default_rng(1001)
    model = _random_model(rng, [(16, 16)])
    seq = InputSequence(rng.uniform(-1, 1, (60, 16)))
    return quantize_model(model), seq


def test_cycle_ratio_exactly_two_without_overheads(toy):
    qmodel, seq = toy
    cfg = AccelConfig().without_overheads()
    low = simulate(qmodel, seq, Mode.STATIC4, cfg)
    high = simulate(qmodel, seq, Mode.STATIC8, cfg)
    assert high.stats.total_cycles == 2 * low.stats.total_cycles
    speedup, savings = compare(low.stats, high.stats)
    assert speedup == 2.0
    assert savings > 0.0


def test_cycle_ratio_near_two_with_default_overheads(toy):
    qmodel, seq = toy
    low = simulate(qmodel, seq, Mode.STATIC4)
    high = simulate(qmodel, seq, Mode.STATIC8)
    speedup, _ = compare(low.stats, high.stats)
    assert speedup == pytest.approx(2.0, abs=0.05)


def test_mixed_run_matches_closed_form(toy):
    qmodel, seq = toy
    cfg = AccelConfig()
    total8 = simulate(qmodel, seq, Mode.STATIC8, cfg).stats.total_cycles
    for seed in (1, 2, 3):
        mixed = simulate(qmodel, seq, Mode.RANDOM, cfg, random_p=0.4, random_seed=seed)
        u = mixed.stats.low_precision_usage
        predicted = total8 * (1 - u / 2)
        assert mixed.stats.total_cycles == pytest.approx(predicted, rel=0.02)


def test_energy_breakdown_sums_to_total(toy):
    qmodel, seq = toy
    for mode in (Mode.STATIC8, Mode.STATIC4, Mode.DYNAMIC):
        out = simulate(qmodel, seq, mode)
        assert out.stats.energy_total == sum(out.stats.energy_breakdown.values())


def test_weight_fetch_energy_ratio_half(toy):
    qmodel, seq = toy
    low = simulate(qmodel, seq, Mode.STATIC4)
    high = simulate(qmodel, seq, Mode.STATIC8)
    assert low.stats.energy_breakdown["weight_fetch"] == 0.5 * high.stats.energy_breakdown["weight_fetch"]


def test_zero_coefficients_leave_only_static_energy(toy):
    qmodel, seq = toy
    em = EnergyModel.zero_dynamic(static_power=2.5)
    out = simulate(qmodel, seq, Mode.STATIC8, energy_model=em)
    assert out.stats.energy_total == 2.5 * out.stats.total_cycles


def test_cycles_monotone_in_low_precision_usage(toy):
    qmodel, seq = toy
    cfg = AccelConfig().without_overheads()
    prev = None
    for p in (0.0, 0.25, 0.5, 0.75, 1.0):
        out = simulate(qmodel, seq, Mode.RANDOM, cfg, random_p=p, random_seed=11)
        if prev is not None:
            assert out.stats.total_cycles <= prev
        prev = out.stats.total_cycles


def test_compare_identity(toy):
    qmodel, seq = toy
    a = simulate(qmodel, seq, Mode.STATIC8)
    b = simulate(qmodel, seq, Mode.STATIC8)
    assert compare(a.stats, b.stats) == (1.0, 0.0)


def test_compare_rejects_different_inputs(toy):
    qmodel, seq = toy
    other_seq = InputSequence(np.asarray(seq.steps) * 0.5)
    a = simulate(qmodel, seq, Mode.STATIC8)
    b = simulate(qmodel, other_seq, Mode.STATIC8)
    with pytest.raises(ValueError):
        compare(a.stats, b.stats)


def test_mu_drain_floors_small_layers():
    rng = np.random.default_rng(4)
    model = _random_model(rng, [(2, 2)])
    qmodel = quantize_model(model)
    seq = InputSequence(rng.uniform(-1, 1, (10, 2)))
    cfg = AccelConfig()
    out = simulate(qmodel, seq, Mode.STATIC4, cfg)
    # dot products cost 2*(4) = 8 cycles per element * 2 elements = 16 per step,
    # below the scalar-unit drain, so the drain dominates every step
    drain = cfg.mu_drain_cycles()
    assert out.stats.total_cycles == drain + 10 * drain


def test_bandwidth_ceiling_stretches_steps(toy):
    qmodel, seq = toy
    fast = simulate(qmodel, seq, Mode.STATIC4)
    slow_cfg = dataclasses.replace(AccelConfig(), peak_bandwidth=1e3)
    slow = simulate(qmodel, seq, Mode.STATIC4, slow_cfg)
    assert slow.stats.total_cycles > fast.stats.total_cycles
    dram_bytes = (16 + 16) * 4
    min_step = math.ceil(dram_bytes * slow_cfg.frequency_hz / slow_cfg.peak_bandwidth)
    assert slow.stats.total_cycles >= 60 * min_step


def test_capacity_errors_name_the_buffer(toy):
    qmodel, seq = toy
    with pytest.raises(CapacityError, match="weight buffer"):
        check_capacity(qmodel, seq, dataclasses.replace(AccelConfig(), weight_buffer_bytes=16), False)
    with pytest.raises(CapacityError, match="input buffer"):
        check_capacity(qmodel, seq, dataclasses.replace(AccelConfig(), input_buffer_bytes=4), False)
    with pytest.raises(CapacityError, match="intermediate memory"):
        check_capacity(qmodel, seq, dataclasses.replace(AccelConfig(), intermediate_bytes=64), False)
    with pytest.raises(CapacityError, match="peak detector buffer"):
        check_capacity(qmodel, seq, dataclasses.replace(AccelConfig(), pdu_buffer_bytes=8), True)
    check_capacity(qmodel, seq, AccelConfig(), True)


def test_simulate_propagates_capacity_error(toy):
    qmodel, seq = toy
    cfg = dataclasses.replace(AccelConfig(), weight_buffer_bytes=16)
    with pytest.raises(CapacityError):
        simulate(qmodel, seq, Mode.STATIC8, cfg)


def test_wall_time_follows_frequency(toy):
    qmodel, seq = toy
    out = simulate(qmodel, seq, Mode.STATIC8)
    assert out.stats.wall_time_s == out.stats.total_cycles / 500e6


def test_dynamic_run_charges_pdu_energy(toy):
    qmodel, seq = toy
    dyn = simulate(qmodel, seq, Mode.DYNAMIC, pdu_config=PduConfig.for_sequence(len(seq)))
    st = simulate(qmodel, seq, Mode.STATIC4)
    assert dyn.stats.energy_breakdown["pdu"] > 0.0
    assert st.stats.energy_breakdown["pdu"] == 0.0


def test_energy_model_validation():
    with pytest.raises(ValueError):
        EnergyModel(weight_byte_read=0.4, weight_nibble_read=0.5)
    with pytest.raises(ValueError):
        EnergyModel(mu_add=-1.0)


def test_accel_config_validation():
    with pytest.raises(ValueError):
        AccelConfig(frequency_hz=0)
    with pytest.raises(ValueError):
        AccelConfig(mu_add_cycles=-1)
    with pytest.raises(ValueError):
        AccelConfig(weight_buffer_bytes=0)
