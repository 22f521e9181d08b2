"""Packed sub-word SIMD on one 32-bit datapath word.

Lanes are carved LSB-first out of the word; carries are killed at lane
boundaries, so every lane behaves like an independent saturating fixed-point
unit.  The add/sub and shift here work directly on the packed raw fields; the
scalar ops in :mod:`cordicpe.fixedpoint` serve as their oracle in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass

from .fixedpoint import (
    FormatError,
    FxpValue,
    QFormat,
    shift_right_round_even_raw,
)

WORD_BITS = 32


class LaneError(ValueError):
    """Lane layout mismatch or malformed packed word."""


_LAYOUTS = {
    "1x32": (32,),
    "2x16": (16, 16),
    "4x8": (8, 8, 8, 8),
    "8x4": (4, 4, 4, 4, 4, 4, 4, 4),
    "2x12+2x4": (12, 12, 4, 4),
    "1x24+2x4": (24, 4, 4),
}


@dataclass(frozen=True)
class LaneConfig:
    """Lane widths of one 32-bit word, LSB-first."""

    name: str
    widths: tuple

    def __post_init__(self):
        if sum(self.widths) != WORD_BITS:
            raise LaneError(f"lane widths {self.widths} do not fill {WORD_BITS} bits")

    @property
    def offsets(self) -> tuple:
        offs, pos = [], 0
        for w in self.widths:
            offs.append(pos)
            pos += w
        return tuple(offs)

    @property
    def lane_count(self) -> int:
        return len(self.widths)

    @classmethod
    def named(cls, name: str) -> "LaneConfig":
        try:
            return cls(name, _LAYOUTS[name])
        except KeyError:
            raise LaneError(f"unknown lane layout {name!r}") from None


LAYOUT_NAMES = tuple(_LAYOUTS)


def _field(raw: int, offset: int, width: int) -> int:
    """Extract a signed lane field from the packed unsigned word."""
    u = (raw >> offset) & ((1 << width) - 1)
    if u & (1 << (width - 1)):
        u -= 1 << width
    return u


def _deposit(word: int, value: int, offset: int, width: int) -> int:
    return word | ((value & ((1 << width) - 1)) << offset)


@dataclass(frozen=True)
class SimdWord:
    """A packed 32-bit pattern plus its lane layout and per-lane Q-formats."""

    raw: int
    lanes: LaneConfig
    formats: tuple

    def __post_init__(self):
        if not 0 <= self.raw < (1 << WORD_BITS):
            raise LaneError(f"word pattern {self.raw:#x} is not 32-bit")
        if len(self.formats) != self.lanes.lane_count:
            raise LaneError("one QFormat required per lane")
        for fmt, width in zip(self.formats, self.lanes.widths):
            if fmt.total_bits != width:
                raise FormatError(f"format {fmt} does not match {width}-bit lane")

    def lane_raw(self, i: int) -> int:
        return _field(self.raw, self.lanes.offsets[i], self.lanes.widths[i])


def pack_lanes(values, cfg: LaneConfig) -> SimdWord:
    """Pack per-lane FxpValues into one word; lossless together with unpack_lanes."""
    if len(values) != cfg.lane_count:
        raise LaneError(f"expected {cfg.lane_count} values, got {len(values)}")
    word = 0
    for v, off, width in zip(values, cfg.offsets, cfg.widths):
        if v.format.total_bits != width:
            raise FormatError(f"value format {v.format} does not fit {width}-bit lane")
        word = _deposit(word, v.raw, off, width)
    return SimdWord(word, cfg, tuple(v.format for v in values))


def unpack_lanes(w: SimdWord):
    return [FxpValue(w.lane_raw(i), w.formats[i]) for i in range(w.lanes.lane_count)]


def _check_same_layout(a: SimdWord, b: SimdWord):
    if a.lanes != b.lanes or a.formats != b.formats:
        raise LaneError("SIMD operands must share lane layout and formats")


def simd_add_sub(a: SimdWord, b: SimdWord, op_per_lane) -> SimdWord:
    """Per-lane saturating add/sub on the packed fields; carries never cross lanes."""
    _check_same_layout(a, b)
    if len(op_per_lane) != a.lanes.lane_count:
        raise LaneError("one op required per lane")
    word = 0
    for i, (off, width) in enumerate(zip(a.lanes.offsets, a.lanes.widths)):
        av = _field(a.raw, off, width)
        bv = _field(b.raw, off, width)
        op = op_per_lane[i]
        if op == "add":
            s = av + bv
        elif op == "sub":
            s = av - bv
        else:
            raise ValueError(f"lane op must be 'add' or 'sub', got {op!r}")
        hi = (1 << (width - 1)) - 1
        lo = -(1 << (width - 1))
        s = hi if s > hi else lo if s < lo else s
        word = _deposit(word, s, off, width)
    return SimdWord(word, a.lanes, a.formats)


def simd_barrel_shift(w: SimdWord, k_per_lane) -> SimdWord:
    """Lane-isolated arithmetic right shifts with round-half-to-even per lane."""
    if len(k_per_lane) != w.lanes.lane_count:
        raise LaneError("one shift amount required per lane")
    word = 0
    for i, (off, width) in enumerate(zip(w.lanes.offsets, w.lanes.widths)):
        v = _field(w.raw, off, width)
        s = shift_right_round_even_raw(v, k_per_lane[i])
        hi = (1 << (width - 1)) - 1
        lo = -(1 << (width - 1))
        s = hi if s > hi else lo if s < lo else s
        word = _deposit(word, s, off, width)
    return SimdWord(word, w.lanes, w.formats)
