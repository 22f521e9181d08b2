"""Two's-complement fixed-point formats and saturating shift-add arithmetic.

Everything on the emulated datapath is a signed raw integer plus a Q-format
(total bits, fraction bits).  The kernels at the bottom operate on plain ints
or numpy int64 arrays so the same code serves both the scalar value API and
the vectorized batch pipelines.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ALLOWED_WIDTHS = (4, 8, 12, 16, 24, 32)

GUARD_BITS = 3  # guard bits carried through the barrel shifter, plus 1 sticky
BARREL_STAGES = (16, 8, 4, 2, 1)  # 5-stage logarithmic shifter, max shift 31


class FormatError(ValueError):
    """Invalid Q-format or raw value outside its format."""


class FormatMismatchError(FormatError):
    """Operands of a two-input op do not share a Q-format."""


@dataclass(frozen=True)
class QFormat:
    """Signed fixed-point format: ``total_bits`` wide, ``frac_bits`` after the point."""

    total_bits: int
    frac_bits: int
    signed: bool = True

    def __post_init__(self):
        if self.total_bits not in ALLOWED_WIDTHS:
            raise FormatError(f"unsupported width {self.total_bits}")
        if not 0 <= self.frac_bits <= self.total_bits - 1:
            raise FormatError(f"frac_bits {self.frac_bits} out of range for {self.total_bits}-bit format")
        if not self.signed:
            raise FormatError("only signed two's-complement formats are supported")

    @property
    def lsb(self) -> float:
        return 2.0 ** -self.frac_bits

    @property
    def min_raw(self) -> int:
        return -(1 << (self.total_bits - 1))

    @property
    def max_raw(self) -> int:
        return (1 << (self.total_bits - 1)) - 1

    @property
    def min_value(self) -> float:
        return self.min_raw * self.lsb

    @property
    def max_value(self) -> float:
        return self.max_raw * self.lsb

    def contains_raw(self, raw: int) -> bool:
        return self.min_raw <= raw <= self.max_raw

    def __str__(self):
        return f"Q{self.total_bits}.{self.frac_bits}"


def q(total_bits: int, frac_bits: int) -> QFormat:
    return QFormat(total_bits, frac_bits)


def activation_format(width: int) -> QFormat:
    """Datapath format for activation-function values.

    Sign + 2 integer bits covers cosh up to ~1.71 and e^x up to ~3.06 over the
    hyperbolic convergence range; 4-bit lanes keep only one integer bit since
    their outputs stay inside [-1, 1].
    """
    if width == 4:
        return QFormat(4, 2)
    return QFormat(width, width - 3)


def accumulator_format(width: int) -> QFormat:
    """Wide format for MAC accumulation and exponential sums: sign + 3 integer bits."""
    return QFormat(width, width - 4)


def operand_format(width: int) -> QFormat:
    """Storage format for quantized tensors, rails at roughly +/-1."""
    return QFormat(width, width - 1)


def mac_format(width: int) -> QFormat:
    """MAC register format.  The wide accumulator would leave a 4-bit lane
    with no fraction bits at all (Q4.0 cannot store a single angle constant),
    so the 4-bit MAC runs in its activation format instead."""
    return accumulator_format(width) if width >= 8 else activation_format(width)


# ---------------------------------------------------------------------------
# Raw kernels.  Accept python ints or int64 arrays; return the same flavour.
# ---------------------------------------------------------------------------

def _lift(x):
    return np.asarray(x, dtype=np.int64)


def _unlift(res, *inputs):
    if any(isinstance(v, np.ndarray) for v in inputs):
        return res
    return int(res)


def saturate_raw(v, fmt: QFormat):
    res = np.clip(_lift(v), fmt.min_raw, fmt.max_raw)
    return _unlift(res, v)


def quantize_raw(x, fmt: QFormat):
    """Round-half-to-even quantization of real values, saturating at the rails."""
    scaled = np.rint(np.asarray(x, dtype=np.float64) * (1 << fmt.frac_bits))
    res = np.clip(scaled, fmt.min_raw, fmt.max_raw).astype(np.int64)
    return _unlift(res, x)


def dequantize_raw(raw, fmt: QFormat):
    return np.asarray(raw, dtype=np.float64) * fmt.lsb if isinstance(raw, np.ndarray) else raw * fmt.lsb


def sat_add_raw(a, b, fmt: QFormat):
    res = np.clip(_lift(a) + _lift(b), fmt.min_raw, fmt.max_raw)
    return _unlift(res, a, b)


def sat_sub_raw(a, b, fmt: QFormat):
    res = np.clip(_lift(a) - _lift(b), fmt.min_raw, fmt.max_raw)
    return _unlift(res, a, b)


def shift_right_round_even_raw(v, k):
    """Arithmetic right shift with a single round-half-to-even at the end.

    Modeled as the five conditional barrel stages (1, 2, 4, 8, 16); the stages
    truncate into 3 guard bits plus a sticky bit, and rounding happens once on
    the final guard content.  The shifter field is 5 bits wide, so amounts of
    32 and above flush the whole register: any 32-bit value over 2^32 rounds
    to zero (a -0.5 tie lands on the even side, 0).
    """
    varr = _lift(v)
    karr = _lift(k)
    flush = karr >= 32
    acc = varr << GUARD_BITS
    sticky = np.zeros(np.broadcast(acc, karr).shape, dtype=bool)
    acc = np.broadcast_to(acc, sticky.shape).copy()
    for stage in BARREL_STAGES:
        take = (karr & stage) != 0
        dropped = (acc & ((1 << stage) - 1)) != 0
        sticky = sticky | (take & dropped)
        acc = np.where(take, acc >> stage, acc)
    floor = acc >> GUARD_BITS
    guard = acc & ((1 << GUARD_BITS) - 1)
    half = 1 << (GUARD_BITS - 1)
    round_up = (guard > half) | ((guard == half) & (sticky | ((floor & 1) == 1)))
    res = np.where(flush, 0, floor + round_up)
    return _unlift(res, v, k)


def shift_left_sat_raw(v, k, fmt: QFormat):
    """Left shift with saturation at the format rails; k must stay small (<= 16)."""
    res = np.clip(_lift(v) << _lift(k), fmt.min_raw, fmt.max_raw)
    return _unlift(res, v, k)


def convert_raw(raw, src: QFormat, dst: QFormat):
    """Exact re-interpretation between formats: shift the binary point, then saturate."""
    diff = dst.frac_bits - src.frac_bits
    if diff >= 0:
        res = np.clip(_lift(raw) << diff, dst.min_raw, dst.max_raw)
    else:
        res = np.clip(_lift(shift_right_round_even_raw(raw, -diff)), dst.min_raw, dst.max_raw)
    return _unlift(res, raw)


# ---------------------------------------------------------------------------
# Scalar value API
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FxpValue:
    """A raw two's-complement integer interpreted through a QFormat."""

    raw: int
    format: QFormat

    def __post_init__(self):
        if not self.format.contains_raw(self.raw):
            raise FormatError(f"raw {self.raw} does not fit {self.format}")

    @property
    def real(self) -> float:
        return self.raw * self.format.lsb

    def to_format(self, fmt: QFormat) -> "FxpValue":
        return FxpValue(convert_raw(self.raw, self.format, fmt), fmt)

    def __repr__(self):
        return f"FxpValue({self.real:g} raw={self.raw} {self.format})"


def quantize(x: float, fmt: QFormat) -> FxpValue:
    """Nearest representable value under round-half-to-even; saturates at the rails."""
    return FxpValue(quantize_raw(x, fmt), fmt)


def dequantize(v: FxpValue) -> float:
    return v.real


def sat_add_sub(a: FxpValue, b: FxpValue, op: str = "add") -> FxpValue:
    """Two's-complement add/sub saturated to the shared format's rails."""
    if a.format != b.format:
        raise FormatMismatchError(f"{a.format} vs {b.format}")
    if op == "add":
        raw = sat_add_raw(a.raw, b.raw, a.format)
    elif op == "sub":
        raw = sat_sub_raw(a.raw, b.raw, a.format)
    else:
        raise ValueError(f"op must be 'add' or 'sub', got {op!r}")
    return FxpValue(raw, a.format)


def barrel_shift_right(v: FxpValue, k: int) -> FxpValue:
    """Arithmetic right shift by k via the 5-stage barrel model, round-half-to-even."""
    if k < 0:
        raise ValueError("shift amount must be non-negative")
    return FxpValue(saturate_raw(shift_right_round_even_raw(v.raw, k), v.format), v.format)
