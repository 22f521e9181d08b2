"""The runtime-configurable processing element.

Dispatches sigmoid / tanh / ReLU / softmax / exp and MAC over packed SIMD
lanes.  Exponential-flavoured values live in the wide accumulator format
(sign + 3 integer bits) because a sigmoid denominator 1 + e^z reaches 4.06 and
would clip in the activation format; tanh divides sinh by cosh directly in the
activation format.  Inputs beyond the hyperbolic convergence rail saturate to
it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cordic import (
    CONSTANTS,
    StagePlan,
    default_stage_plan,
    hr_sinh_cosh_raw,
    lv_divide_raw,
    lr_mac_raw,
)
from .fixedpoint import (
    FxpValue,
    QFormat,
    accumulator_format,
    activation_format,
    convert_raw,
    mac_format,
    quantize_raw,
    sat_add_raw,
    sat_sub_raw,
    shift_right_round_even_raw,
)
from .simd import LaneConfig, SimdWord, pack_lanes, unpack_lanes


class ConfigurationError(ValueError):
    """Illegal precision / activation / execution-mode combination."""


class CapacityError(ValueError):
    """Softmax FIFO received more entries than it can hold."""


AF_NAMES = ("sigmoid", "tanh", "relu", "softmax", "exp")

# lane layout of one 32-bit word per precision mode
PRECISION_LAYOUTS = {
    "fxp4": "8x4",
    "fxp8": "4x8",
    "fxp16": "2x16",
    "fxp32": "1x32",
    "h12": "2x12+2x4",
    "h24": "1x24+2x4",
}

PRECISION_BITS = {"fxp4": 4, "fxp8": 8, "fxp16": 16, "fxp32": 32, "h12": 12, "h24": 24}

# values consumed per issue slot: one 32-bit word per cycle, two cycles per
# slot, so sub-32-bit modes take two words per slot while a 32-bit operand
# needs both cycles.  This is where the 16/8/4/1 throughput ratio comes from.
ISSUE_LANES = {"fxp4": 16, "fxp8": 8, "fxp16": 4, "fxp32": 1}

SOFTMAX_FIFO_CAPACITY = 64
SOFTMAX_GUARD_BITS = 6  # log2(capacity)


def _plan_for(precision_sel: str) -> StagePlan:
    bits = PRECISION_BITS[precision_sel]
    if precision_sel == "h12":
        return default_stage_plan(16)
    if precision_sel == "h24":
        return default_stage_plan(32)
    return default_stage_plan(bits)


@dataclass(frozen=True)
class PeConfig:
    """Runtime control bundle for one PE."""

    precision_sel: str
    sel_af: str = "relu"
    ctrl_op: str = "af"  # "af" | "mac"
    exec_mode: str = "pipelined"  # "iterative" | "pipelined"
    stage_plan: StagePlan | None = None

    def __post_init__(self):
        if self.precision_sel not in PRECISION_LAYOUTS:
            raise ConfigurationError(f"unknown precision {self.precision_sel!r}")
        if self.sel_af not in AF_NAMES:
            raise ConfigurationError(f"unknown activation {self.sel_af!r}")
        if self.ctrl_op not in ("af", "mac"):
            raise ConfigurationError(f"unknown ctrl_op {self.ctrl_op!r}")
        if self.exec_mode not in ("iterative", "pipelined"):
            raise ConfigurationError(f"unknown exec_mode {self.exec_mode!r}")
        if self.sel_af == "softmax" and self.ctrl_op == "af":
            if self.exec_mode != "pipelined":
                raise ConfigurationError("softmax requires the pipelined datapath")
            if self.precision_sel not in ("fxp8", "fxp16", "fxp32"):
                raise ConfigurationError(f"softmax not available at {self.precision_sel}")
        if self.stage_plan is None:
            object.__setattr__(self, "stage_plan", _plan_for(self.precision_sel))

    @property
    def lane_config(self) -> LaneConfig:
        return LaneConfig.named(PRECISION_LAYOUTS[self.precision_sel])


def _hr_rail_raw(fmt: QFormat) -> int:
    return int(quantize_raw(CONSTANTS.hr_range, fmt))


def _clamp_af_input(raw, fmt: QFormat):
    rail = _hr_rail_raw(fmt)
    return np.clip(np.asarray(raw, dtype=np.int64), -rail, rail)


# ---------------------------------------------------------------------------
# Vectorized activation pipelines on raw arrays
# ---------------------------------------------------------------------------

def sinh_cosh_batch_raw(z_raw, bits: int, plan: StagePlan):
    fmt = activation_format(bits)
    z = _clamp_af_input(z_raw, fmt)
    x, y = hr_sinh_cosh_raw(z, fmt, plan.hyperbolic_stages)
    return x, y


def exp_format(bits: int) -> QFormat:
    """Exponentials and sigmoid division run in the wide accumulator format,
    whose rails (+/-8) hold the sigmoid denominator 1 + e^z <= 4.06.  The
    4-bit datapath has no room for one (Q4.0 cannot even store the division
    table), so it stays in its activation format and saturates instead."""
    return accumulator_format(bits) if bits >= 8 else activation_format(bits)


def exp_batch_raw(z_raw, bits: int, plan: StagePlan):
    """e^z as cosh + sinh, summed in the wide accumulator format."""
    af = activation_format(bits)
    acc = exp_format(bits)
    c, s = sinh_cosh_batch_raw(z_raw, bits, plan)
    return sat_add_raw(convert_raw(c, af, acc), convert_raw(s, af, acc), acc)


def sigmoid_batch_raw(z_raw, bits: int, plan: StagePlan):
    """e^z / (1 + e^z), divided in the wide format; output in the activation format."""
    af = activation_format(bits)
    acc = exp_format(bits)
    e = exp_batch_raw(z_raw, bits, plan)
    one = int(quantize_raw(1.0, acc))
    den = sat_add_raw(e, np.full_like(np.asarray(e), one), acc)
    quot = lv_divide_raw(np.maximum(e, 0), np.maximum(den, 1), acc, plan.linear_stages)
    return convert_raw(quot, acc, af)


def tanh_batch_raw(z_raw, bits: int, plan: StagePlan):
    """sinh / cosh in the activation format (cosh stays below the rails).

    The division runs on |sinh| with the sign re-applied afterwards, keeping
    tanh exactly odd (the vectoring ladder itself is not symmetric when its
    residual passes through 0).
    """
    af = activation_format(bits)
    c, s = sinh_cosh_batch_raw(z_raw, bits, plan)
    c = np.maximum(c, 1)
    num = np.minimum(np.abs(s), c)
    q = lv_divide_raw(num, c, af, plan.linear_stages)
    return np.where(s < 0, -q, q)


def relu_raw(raw):
    return np.maximum(np.asarray(raw, dtype=np.int64), 0)


def softmax_guard_format(bits: int) -> QFormat:
    """Running-sum register: 6 integer guard bits beyond the accumulator format.

    A 32-bit register already gives the sub-32 formats that headroom; the
    32-bit format trades 6 fraction bits for it.
    """
    acc = exp_format(bits)
    drop = SOFTMAX_GUARD_BITS if bits == 32 else 0
    return QFormat(32, acc.frac_bits - drop)


def softmax_batch_raw(x_raw, bits: int, plan: StagePlan):
    """Streaming softmax over the last axis of a raw matrix.

    Phase 1 shifts by the row maximum (exact in fixed point), saturates
    anything below the convergence rail, exponentiates, and accumulates the
    running sum in the guard-extended register.  Phase 2 renormalizes sum and
    entries together so the divider runs at datapath width, then divides every
    stored exponential by the sum.  Mirrors SoftmaxFifo arithmetic.
    """
    af = activation_format(bits)
    acc = exp_format(bits)
    guard = softmax_guard_format(bits)
    x = np.asarray(x_raw, dtype=np.int64)
    shifted = x - x.max(axis=-1, keepdims=True)  # <= 0, exact
    shifted = np.maximum(shifted, -_hr_rail_raw(af))
    e = exp_batch_raw(shifted, bits, plan)
    # sequential saturating accumulation in arrival order
    total = np.zeros(x.shape[:-1], dtype=np.int64)
    e_guard = convert_raw(e, acc, guard)
    for i in range(x.shape[-1]):
        total = sat_add_raw(total, e_guard[..., i], guard)
    # express the sum in accumulator fraction units, then find the smallest
    # right shift that brings it inside the datapath rails
    virtual = total << (acc.frac_bits - guard.frac_bits)
    shift = np.zeros_like(virtual)
    while np.any((virtual >> shift) > acc.max_raw):
        shift = shift + ((virtual >> shift) > acc.max_raw)
    den = np.maximum(np.minimum(shift_right_round_even_raw(virtual, shift), acc.max_raw), 1)
    num = shift_right_round_even_raw(e, shift[..., None])
    num = np.clip(num, 0, den[..., None])
    quot = lv_divide_raw(num, np.broadcast_to(den[..., None], num.shape), acc, plan.linear_stages)
    return convert_raw(quot, acc, af)


# ---------------------------------------------------------------------------
# Scalar API
# ---------------------------------------------------------------------------

def _scalar_af(fn, z: FxpValue, plan: StagePlan) -> FxpValue:
    bits = z.format.total_bits
    raw = convert_raw(z.raw, z.format, activation_format(bits))
    out = fn(np.asarray([raw], dtype=np.int64), bits, plan)
    return FxpValue(int(out[0]), activation_format(bits))


def af_sigmoid(z: FxpValue, plan: StagePlan) -> FxpValue:
    return _scalar_af(sigmoid_batch_raw, z, plan)


def af_tanh(z: FxpValue, plan: StagePlan) -> FxpValue:
    return _scalar_af(tanh_batch_raw, z, plan)


def af_exp(z: FxpValue, plan: StagePlan) -> FxpValue:
    bits = z.format.total_bits
    out = exp_batch_raw(np.asarray([z.raw], dtype=np.int64), bits, plan)
    return FxpValue(int(out[0]), exp_format(bits))


def af_relu(w: SimdWord) -> SimdWord:
    """Per-lane ReLU; single mux per lane, one cycle in either exec mode."""
    vals = [FxpValue(max(v.raw, 0), v.format) for v in unpack_lanes(w)]
    return pack_lanes(vals, w.lanes)


@dataclass
class SoftmaxFifo:
    """Stores streamed exponentials and their saturating running sum."""

    capacity: int = SOFTMAX_FIFO_CAPACITY
    sum_format: QFormat | None = None
    entries: list = field(default_factory=list)
    running_sum: FxpValue | None = None

    def push(self, e: FxpValue):
        if len(self.entries) >= self.capacity:
            raise CapacityError(f"FIFO holds at most {self.capacity} exponentials")
        if e.raw < 0:
            raise ValueError("softmax exponentials are non-negative")
        if self.sum_format is None:
            self.sum_format = softmax_guard_format(e.format.total_bits)
        if self.running_sum is None:
            self.running_sum = FxpValue(0, self.sum_format)
        self.entries.append(e)
        lifted = convert_raw(e.raw, e.format, self.sum_format)
        self.running_sum = FxpValue(sat_add_raw(self.running_sum.raw, lifted, self.sum_format), self.sum_format)


def softmax_run(xs, plan: StagePlan, capacity: int = SOFTMAX_FIFO_CAPACITY):
    """Two-phase softmax: exponentials stream through the FIFO, then a shared
    divider drains them against the accumulated sum, in arrival order."""
    if len(xs) > capacity:
        raise CapacityError(f"{len(xs)} entries exceed FIFO capacity {capacity}")
    bits = xs[0].format.total_bits
    raws = np.asarray([x.raw for x in xs], dtype=np.int64)
    out = softmax_batch_raw(raws[None, :], bits, _plan_or(plan, bits))
    af = activation_format(bits)
    return [FxpValue(int(r), af) for r in out[0]]


def _plan_or(plan, bits):
    return plan if plan is not None else default_stage_plan(bits)


# ---------------------------------------------------------------------------
# SIMD dispatch
# ---------------------------------------------------------------------------

def _check_word(w: SimdWord, cfg: PeConfig):
    if w.lanes != cfg.lane_config:
        raise ConfigurationError(
            f"word layout {w.lanes.name} does not match precision {cfg.precision_sel}"
        )


def pe_execute(w, cfg: PeConfig, operand: SimdWord | None = None, acc: SimdWord | None = None):
    """Run the configured op across every lane of a word (or word list for softmax).

    MAC mode multiplies each lane of ``w`` by the matching lane of ``operand``
    and adds the ``acc`` lane.  Softmax treats the flattened lanes of a word
    list as one normalization group and returns the matching list.
    """
    if cfg.ctrl_op == "mac":
        if operand is None or acc is None:
            raise ConfigurationError("mac needs an operand word and an accumulator word")
        _check_word(w, cfg)
        _check_word(operand, cfg)
        _check_word(acc, cfg)
        outs = []
        for a, z, c in zip(unpack_lanes(w), unpack_lanes(operand), unpack_lanes(acc)):
            fmt = mac_format(a.format.total_bits)
            raw = lr_mac_raw(
                np.int64(a.raw), np.int64(z.raw), np.int64(c.raw), fmt, cfg.stage_plan.linear_stages
            )
            outs.append(FxpValue(int(raw), fmt))
        return pack_lanes(outs, cfg.lane_config)

    if cfg.sel_af == "softmax":
        if cfg.precision_sel not in ("fxp8", "fxp16", "fxp32") or cfg.exec_mode != "pipelined":
            raise ConfigurationError("softmax needs pipelined mode at 8/16/32-bit precision")
        words = w if isinstance(w, (list, tuple)) else [w]
        for word in words:
            _check_word(word, cfg)
        flat = [v for word in words for v in unpack_lanes(word)]
        outs = softmax_run(flat, cfg.stage_plan)
        n = cfg.lane_config.lane_count
        return [pack_lanes(outs[i : i + n], cfg.lane_config) for i in range(0, len(outs), n)]

    _check_word(w, cfg)
    if cfg.sel_af == "relu":
        return af_relu(w)
    fn = {"sigmoid": af_sigmoid, "tanh": af_tanh, "exp": af_exp}[cfg.sel_af]
    outs = [fn(v, cfg.stage_plan) for v in unpack_lanes(w)]
    return pack_lanes(outs, cfg.lane_config)


# ---------------------------------------------------------------------------
# Timing model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PipelineTiming:
    cycles_elapsed: int
    in_flight: tuple
    results_ready: int  # input words completed
    values_ready: int  # scalar results across lanes
    words_per_slot: int
    values_per_slot: int


def _stages_for_op(cfg: PeConfig) -> int:
    plan = cfg.stage_plan
    if cfg.ctrl_op == "mac":
        return plan.linear_stages
    return {
        "relu": 1,
        "exp": plan.hyperbolic_stages + 1,
        "sigmoid": plan.hyperbolic_stages + plan.linear_stages,
        "tanh": plan.hyperbolic_stages + plan.linear_stages,
        "softmax": plan.hyperbolic_stages + plan.linear_stages,
    }[cfg.sel_af]


def pipeline_timing(cfg: PeConfig, n_inputs: int) -> PipelineTiming:
    """Cycle accounting for n input words.

    Pipelined mode: operands load over two cycles, so an issue slot is two
    cycles wide and delivers one result set after a fill of
    hyperbolic + linear + 2 stages.  Sub-32-bit words ride the 32-bit load
    path one word per cycle (two per slot); running 8/16-bit data on the
    32-bit pipeline folds two independent streams into the idle stages for
    another 2x.  Iterative mode reports stages x 1 cycle per input, no
    overlap.
    """
    lanes_per_word = cfg.lane_config.lane_count
    if cfg.exec_mode == "iterative":
        per = _stages_for_op(cfg)
        return PipelineTiming(
            cycles_elapsed=per * n_inputs,
            in_flight=(),
            results_ready=n_inputs,
            values_ready=n_inputs * lanes_per_word,
            words_per_slot=1,
            values_per_slot=lanes_per_word,
        )
    plan = cfg.stage_plan
    depth = plan.hyperbolic_stages + plan.linear_stages + 2
    folded = cfg.precision_sel in ("fxp8", "fxp16") and plan.precision == 32
    words_per_slot = 1 if cfg.precision_sel == "fxp32" else 2
    streams = 2 if folded else 1
    words_per_slot *= streams
    slots = -(-n_inputs // words_per_slot) if n_inputs else 0
    return PipelineTiming(
        cycles_elapsed=depth + 2 * slots,
        in_flight=tuple([streams] * depth),
        results_ready=n_inputs,
        values_ready=n_inputs * lanes_per_word,
        words_per_slot=words_per_slot,
        values_per_slot=words_per_slot * lanes_per_word,
    )


# ---------------------------------------------------------------------------
# Curve export
# ---------------------------------------------------------------------------

def af_curve(fn_name: str, bits: int, plan: StagePlan | None = None, lo: float = -1.1182, hi: float = 1.1182, points: int = 256):
    """Evaluate one activation over a grid; rows of (input real, output real, output raw)."""
    plan = _plan_or(plan, bits)
    af = activation_format(bits)
    xs = np.linspace(lo, hi, points)
    raws = quantize_raw(xs, af)
    fn = {"sigmoid": sigmoid_batch_raw, "tanh": tanh_batch_raw, "exp": exp_batch_raw}[fn_name]
    out = fn(raws, bits, plan)
    out_fmt = exp_format(bits) if fn_name == "exp" else af
    return [(float(x), float(r) * out_fmt.lsb, int(r)) for x, r in zip(xs, out)]
