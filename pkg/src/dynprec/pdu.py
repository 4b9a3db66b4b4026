"""Per-element precision selection driven by cell-state stability.

Every cell-state element owns a small state machine with three phases.
A profiling window of ``t_profile`` observations records the element's
recent range; the range plus a ``beta`` margin defines a band. While
the value stays inside the band the element is *stable* and the next
step is evaluated at 4 bits. A value outside the band is a *peak* and
switches the element to 8 bits until it re-enters the band. Staying in
a peak for more than ``m_max_peak`` steps, or stable for more than
``n_max_stable`` steps, forces a fresh profiling window so the band
tracks slow drift of the signal.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class Phase(enum.IntEnum):
    PROFILING = 0
    STABLE = 1
    IN_PEAK = 2


class Precision(enum.IntEnum):
    """Selector values double as the bit width of the serial operand."""

    LOW4 = 4
    HIGH8 = 8

    @property
    def bits(self) -> int:
        return int(self)


# Profiling window used when the sequence length is not known up front.
STREAMING_WINDOW = 16


@dataclass(frozen=True)
class PduConfig:
    t_profile: int
    m_max_peak: int
    n_max_stable: int
    beta: float = 0.1
    epsilon_range: float = 1e-6

    def __post_init__(self) -> None:
        for name in ("t_profile", "m_max_peak", "n_max_stable"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ValueError(f"{name} must be an integer >= 1, got {v!r}")
        if math.isnan(self.beta) or self.beta < 0:
            raise ValueError(f"beta must be >= 0, got {self.beta!r}")
        if not (self.epsilon_range > 0 and math.isfinite(self.epsilon_range)):
            raise ValueError(f"epsilon_range must be positive, got {self.epsilon_range!r}")

    @classmethod
    def for_sequence(
        cls,
        n_steps: int,
        *,
        beta: float = 0.1,
        epsilon_range: float = 1e-6,
        t_profile: int | None = None,
        m_max_peak: int | None = None,
        n_max_stable: int | None = None,
    ) -> "PduConfig":
        """Resolve the 5%-of-steps counter convention for a known-length sequence."""
        if n_steps < 1:
            raise ValueError("sequence length must be >= 1")
        five_pct = max(1, round(0.05 * n_steps))
        return cls(
            t_profile=t_profile if t_profile is not None else min(max(five_pct, 4), 64),
            m_max_peak=m_max_peak if m_max_peak is not None else five_pct,
            n_max_stable=n_max_stable if n_max_stable is not None else five_pct,
            beta=beta,
            epsilon_range=epsilon_range,
        )

    @classmethod
    def streaming(cls, *, beta: float = 0.1, epsilon_range: float = 1e-6) -> "PduConfig":
        return cls(STREAMING_WINDOW, STREAMING_WINDOW, STREAMING_WINDOW, beta, epsilon_range)


def thresholds(min_c: float, max_c: float, beta: float, epsilon_range: float) -> tuple[float, float]:
    """Band limits around the profiled range, guarded against a degenerate range."""
    if max_c < min_c:
        raise ValueError(f"max_c {max_c} < min_c {min_c}")
    r = max(max_c - min_c, epsilon_range)
    return min_c - r * beta, max_c + r * beta


@dataclass
class ElementTracker:
    phase: Phase = Phase.PROFILING
    min_c: float = math.inf
    max_c: float = -math.inf
    lower: float = math.nan
    upper: float = math.nan
    steps_in_phase: int = 0
    next_precision: Precision = Precision.LOW4


def _restart_profiling(tracker: ElementTracker) -> None:
    tracker.phase = Phase.PROFILING
    tracker.min_c = math.inf
    tracker.max_c = -math.inf
    tracker.steps_in_phase = 0


def pdu_observe(tracker: ElementTracker, config: PduConfig, c_value: float) -> Precision:
    """Fold one cell-state observation and return the precision for the next step."""
    c_value = float(c_value)
    if not math.isfinite(c_value):
        raise ValueError(f"cell-state value must be finite, got {c_value!r}")

    if tracker.phase is Phase.PROFILING:
        tracker.min_c = min(tracker.min_c, c_value)
        tracker.max_c = max(tracker.max_c, c_value)
        tracker.steps_in_phase += 1
        if tracker.steps_in_phase >= config.t_profile:
            tracker.lower, tracker.upper = thresholds(
                tracker.min_c, tracker.max_c, config.beta, config.epsilon_range
            )
            tracker.phase = Phase.STABLE
            tracker.steps_in_phase = 0
        precision = Precision.LOW4
    elif tracker.phase is Phase.STABLE:
        if c_value < tracker.lower or c_value > tracker.upper:
            tracker.phase = Phase.IN_PEAK
            tracker.steps_in_phase = 0
            precision = Precision.HIGH8
        else:
            tracker.steps_in_phase += 1
            if tracker.steps_in_phase > config.n_max_stable:
                _restart_profiling(tracker)
            precision = Precision.LOW4
    else:  # IN_PEAK
        if tracker.lower <= c_value <= tracker.upper:
            tracker.phase = Phase.STABLE
            tracker.steps_in_phase = 0
            precision = Precision.LOW4
        else:
            tracker.steps_in_phase += 1
            if tracker.steps_in_phase > config.m_max_peak:
                _restart_profiling(tracker)
                precision = Precision.LOW4
            else:
                precision = Precision.HIGH8

    tracker.next_precision = precision
    return precision


def pdu_batch_observe(
    trackers: Sequence[ElementTracker], config: PduConfig, c_vector: Sequence[float] | np.ndarray
) -> list[Precision]:
    """Element-wise observe; trackers are fully independent."""
    if len(trackers) != len(c_vector):
        raise ValueError(f"{len(trackers)} trackers but {len(c_vector)} values")
    return [pdu_observe(tracker, config, value) for tracker, value in zip(trackers, c_vector)]


def classify_trace(c_trace: np.ndarray, config: PduConfig) -> tuple[np.ndarray, np.ndarray]:
    """Run fresh trackers over a [steps, elements] trace.

    Returns (phases, next_precision_bits), both [steps, elements]; row t holds the
    tracker state right after observing step t, so ``phases == IN_PEAK`` flags the
    steps whose value sits outside the profiled band.
    """
    trace = np.asarray(c_trace, dtype=np.float64)
    if trace.ndim != 2:
        raise ValueError(f"trace must be [steps, elements], got shape {trace.shape}")
    n_steps, n_elems = trace.shape
    trackers = [ElementTracker() for _ in range(n_elems)]
    phases = np.empty((n_steps, n_elems), dtype=np.int8)
    precisions = np.empty((n_steps, n_elems), dtype=np.uint8)
    for t in range(n_steps):
        for k in range(n_elems):
            precisions[t, k] = pdu_observe(trackers[k], config, trace[t, k]).bits
            phases[t, k] = trackers[k].phase
    return phases, precisions
