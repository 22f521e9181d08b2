"""Unified CORDIC engine in hyperbolic-rotational and linear modes.

One recurrence drives everything::

    X[i+1] = X[i] - m * d[i] * Y[i] * 2^-e[i]
    Y[i+1] = Y[i] + d[i] * X[i] * 2^-e[i]
    Z[i+1] = Z[i] - d[i] * E[i]

with m = -1 for hyperbolic coordinates (E = atanh(2^-e)) and m = 0 for linear
ones (E = 2^-e).  Rotation picks d from sign(Z), vectoring from the sign
parity of X and Y; sign(0) counts as +1, matching the MSB of a two's
complement register.  Shifts go through the barrel-shifter model and adds
saturate, so the scalar API is bit-accurate to the datapath.  The *_raw
functions are the same pipelines vectorized over numpy int64 arrays.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .fixedpoint import (
    FxpValue,
    QFormat,
    quantize,
    quantize_raw,
    sat_add_raw,
    sat_sub_raw,
    shift_left_sat_raw,
    shift_right_round_even_raw,
)


class ConvergenceError(ValueError):
    """Input outside the selected mode's convergence range."""


@dataclass(frozen=True)
class CordicConstants:
    kh: float = 0.8281
    inv_kh: float = 1.2074  # hyperbolic gain compensation, applied as X0
    kc: float = 1.6467  # circular-mode gain; stored for completeness, unused
    hr_range: float = 1.1182
    lv_range: float = 1.0  # linear-mode input range (quotients and multipliers)
    lr_range: float = 7.968  # accumulator envelope of the sign + 3-integer-bit format
    max_norm: float = 5.5


CONSTANTS = CordicConstants()


@dataclass(frozen=True)
class StagePlan:
    hyperbolic_stages: int
    linear_stages: int
    precision: int

    def __post_init__(self):
        for n in (self.hyperbolic_stages, self.linear_stages):
            if not 1 <= n <= self.precision:
                raise ValueError(f"stage count {n} outside 1..{self.precision}")


_DEFAULT_PLANS = {4: (4, 4), 8: (4, 5), 16: (4, 5), 32: (8, 10)}


def default_stage_plan(precision: int) -> StagePlan:
    """Stage counts at the error/cost knee for each precision."""
    try:
        h, l = _DEFAULT_PLANS[precision]
    except KeyError:
        raise ValueError(f"unsupported precision {precision}") from None
    return StagePlan(h, l, precision)


@dataclass(frozen=True)
class CordicMode:
    m: int  # 0 linear, -1 hyperbolic
    direction: str  # "rotation" | "vectoring"

    def __post_init__(self):
        if self.m not in (0, -1):
            raise ValueError("m must be 0 (linear) or -1 (hyperbolic)")
        if self.direction not in ("rotation", "vectoring"):
            raise ValueError(f"bad direction {self.direction!r}")
        if self.m == -1 and self.direction != "rotation":
            raise ValueError("hyperbolic coordinates are only used in rotation here")


HYPERBOLIC_ROTATION = CordicMode(-1, "rotation")
LINEAR_VECTORING = CordicMode(0, "vectoring")
LINEAR_ROTATION = CordicMode(0, "rotation")


@dataclass(frozen=True)
class AngleTable:
    """Per-stage shift exponents and quantized angle residues E."""

    kind: str  # "hyperbolic" | "linear"
    exponents: tuple
    raws: tuple
    fmt: QFormat

    @classmethod
    def _build(cls, kind, fmt, exps, entries):
        raws = [int(quantize_raw(v, fmt)) for v in entries]
        # a stage whose angle constant quantizes to zero can no longer steer
        # the recurrence (it would only rotate X/Y in a direction-correlated
        # way), so tables end at the format's angular resolution; this also
        # keeps the entries strictly decreasing
        depth = len(raws)
        for i, r in enumerate(raws):
            if r <= 0:
                depth = i
                break
        return cls(kind, tuple(exps[:depth]), tuple(raws[:depth]), fmt)

    @classmethod
    def hyperbolic(cls, fmt: QFormat, stages: int) -> "AngleTable":
        exps = tuple(range(1, stages + 1))
        return cls._build("hyperbolic", fmt, exps, [math.atanh(2.0**-e) for e in exps])

    @classmethod
    def linear(cls, fmt: QFormat, stages: int, first_exponent: int = 1) -> "AngleTable":
        exps = tuple(range(first_exponent, first_exponent + stages))
        return cls._build("linear", fmt, exps, [2.0**-e for e in exps])

    @classmethod
    def linear_rotation(cls, fmt: QFormat, stages: int) -> "AngleTable":
        """Multiplier table: the final entry repeats once.

        A plain 1..n signed-digit ladder only reaches odd multiples of 2^-n,
        so even-raw multipliers (zero included) would all be off by exactly
        one raw unit, a bias that correlates across a dot product.  Repeating
        the last entry closes the lattice: every representable multiplier
        magnitude becomes reachable.
        """
        base = cls._build("linear", fmt, tuple(range(1, max(stages, 1))),
                          [2.0**-e for e in range(1, max(stages, 1))])
        if stages >= 2 and len(base):
            exps = base.exponents + (base.exponents[-1],)
            raws = base.raws + (base.raws[-1],)
            return cls("linear", exps, raws, fmt)
        return cls._build("linear", fmt, (1,), [0.5])

    def __len__(self):
        return len(self.exponents)

    def entry_real(self, i: int) -> float:
        base = 2.0 ** -self.exponents[i]
        return math.atanh(base) if self.kind == "hyperbolic" else base


@dataclass(frozen=True)
class CordicState:
    x: FxpValue
    y: FxpValue
    z: FxpValue
    stage_index: int = 1

    def __post_init__(self):
        if not (self.x.format == self.y.format == self.z.format):
            raise ValueError("x, y, z must share one QFormat")
        if self.stage_index < 1:
            raise ValueError("stage_index starts at 1")

    @property
    def format(self) -> QFormat:
        return self.x.format


def _shift_raw(value_raw: int, exponent: int, fmt: QFormat) -> int:
    if exponent >= 0:
        return shift_right_round_even_raw(value_raw, exponent)
    return shift_left_sat_raw(value_raw, -exponent, fmt)


def _sign(raw) -> int:
    return 1 if raw >= 0 else -1


def cordic_step(state: CordicState, mode: CordicMode, table: AngleTable) -> CordicState:
    """One micro-rotation; d = sign(Z) when rotating, sign-parity of X,Y when vectoring."""
    idx = state.stage_index - 1
    if idx >= len(table):
        raise IndexError(f"stage {state.stage_index} beyond table of {len(table)}")
    fmt = state.format
    e = table.exponents[idx]
    if mode.direction == "rotation":
        d = _sign(state.z.raw)
    else:
        d = 1 if (state.x.raw >= 0) != (state.y.raw >= 0) else -1

    xs = _shift_raw(state.x.raw, e, fmt)
    ys = _shift_raw(state.y.raw, e, fmt)

    if mode.m == -1:
        # X - m*d*Y*2^-e with m = -1 collapses to X + d*Y*2^-e
        x_new = sat_add_raw(state.x.raw, d * ys, fmt)
    else:
        x_new = state.x.raw
    y_new = sat_add_raw(state.y.raw, d * xs, fmt)
    z_new = sat_sub_raw(state.z.raw, d * table.raws[idx], fmt)
    return CordicState(
        FxpValue(x_new, fmt), FxpValue(y_new, fmt), FxpValue(z_new, fmt), state.stage_index + 1
    )


def _check_rotation_range(z: FxpValue, bound: float):
    limit = quantize_raw(bound, z.format)
    if abs(z.raw) > limit:
        raise ConvergenceError(f"|z|={abs(z.real)} exceeds convergence bound {bound}")


def run_iterative(init: CordicState, mode: CordicMode, n_stages: int, table: AngleTable | None = None) -> CordicState:
    """Apply n_stages micro-rotations starting at stage 1.  Inputs must already converge."""
    fmt = init.format
    if mode.m == -1:
        _check_rotation_range(init.z, CONSTANTS.hr_range)
        table = table or AngleTable.hyperbolic(fmt, n_stages)
    elif mode.direction == "vectoring":
        if init.x.raw <= 0:
            raise ConvergenceError("vectoring requires X > 0")
        if abs(init.y.raw) > init.x.raw:
            raise ConvergenceError("|Y/X| must not exceed 1")
        table = table or AngleTable.linear(fmt, n_stages)
    else:
        # linear rotation multiplies by a normalized angle; the +/-7.968
        # figure is the accumulator envelope, not the multiplier range
        _check_rotation_range(init.z, CONSTANTS.lv_range)
        table = table or AngleTable.linear_rotation(fmt, n_stages)
    state = init
    for _ in range(min(n_stages, len(table))):
        state = cordic_step(state, mode, table)
    return state


# ---------------------------------------------------------------------------
# Function-level wrappers (scalar) and vectorized raws
# ---------------------------------------------------------------------------

def hr_sinh_cosh(z: FxpValue, stages: int) -> tuple:
    """cosh and sinh of z via hyperbolic rotation from X0 = 1.2074 (gain pre-scaled).

    The ladder runs on |z| and the sign is re-applied to the sinh output (an
    XOR on the rotation directions in hardware), which keeps sinh exactly odd
    and cosh exactly even even when the angle accumulator passes through 0.
    """
    fmt = z.format
    _check_rotation_range(z, CONSTANTS.hr_range)
    neg = z.raw < 0
    mag = FxpValue(-z.raw if neg else z.raw, fmt)
    init = CordicState(quantize(CONSTANTS.inv_kh, fmt), FxpValue(0, fmt), mag)
    out = run_iterative(init, HYPERBOLIC_ROTATION, stages)
    y = FxpValue(-out.y.raw if neg else out.y.raw, fmt)
    return out.x, y


def lv_divide(num: FxpValue, denom: FxpValue, stages: int) -> FxpValue:
    """num/denom via linear vectoring; requires denom > 0 and |num| <= denom."""
    fmt = num.format
    init = CordicState(denom, num, FxpValue(0, fmt))
    return run_iterative(init, LINEAR_VECTORING, stages).z


def lr_mac(a: FxpValue, z: FxpValue, acc: FxpValue, stages: int) -> FxpValue:
    """acc + a*z via linear rotation; the multiplier z must be normalized to
    [-1, 1] (the schedule reaches 1 - 2^-stages), the accumulator rides the
    wide format's +/-7.968 rails."""
    init = CordicState(a, acc, z)
    return run_iterative(init, LINEAR_ROTATION, stages).y


def hr_sinh_cosh_raw(z_raw, fmt: QFormat, stages: int):
    """Vectorized hyperbolic rotation; caller guarantees |z| within range.

    Same sign-magnitude convention as hr_sinh_cosh: rotate by |z|, negate the
    sinh output for negative inputs.
    """
    z0 = np.asarray(z_raw, dtype=np.int64)
    neg = z0 < 0
    z = np.abs(z0)
    x = np.full(z.shape, int(quantize_raw(CONSTANTS.inv_kh, fmt)), dtype=np.int64)
    y = np.zeros(z.shape, dtype=np.int64)
    table = AngleTable.hyperbolic(fmt, stages)
    for idx in range(len(table)):
        e = table.exponents[idx]
        d = np.where(z >= 0, 1, -1).astype(np.int64)
        xs = shift_right_round_even_raw(x, e)
        ys = shift_right_round_even_raw(y, e)
        x, y = sat_add_raw(x, d * ys, fmt), sat_add_raw(y, d * xs, fmt)
        z = sat_sub_raw(z, d * table.raws[idx], fmt)
    return x, np.where(neg, -y, y)


def lv_divide_raw(num_raw, denom_raw, fmt: QFormat, stages: int):
    """Vectorized linear vectoring; caller guarantees denom > 0, |num| <= denom."""
    x = np.asarray(denom_raw, dtype=np.int64)
    y = np.asarray(num_raw, dtype=np.int64).copy()
    y = np.broadcast_to(y, np.broadcast(x, y).shape).copy()
    x = np.broadcast_to(x, y.shape)
    z = np.zeros(y.shape, dtype=np.int64)
    table = AngleTable.linear(fmt, stages)
    for idx in range(len(table)):
        e = table.exponents[idx]
        d = np.where((x >= 0) != (y >= 0), 1, -1).astype(np.int64)
        y = sat_add_raw(y, d * shift_right_round_even_raw(x, e), fmt)
        z = sat_sub_raw(z, d * table.raws[idx], fmt)
    return z


def lr_mac_raw(a_raw, z_raw, acc_raw, fmt: QFormat, stages: int):
    """Vectorized linear rotation MAC; caller guarantees |z| <= 1."""
    shape = np.broadcast(np.asarray(a_raw), np.asarray(z_raw), np.asarray(acc_raw)).shape
    a = np.broadcast_to(np.asarray(a_raw, dtype=np.int64), shape)
    z = np.broadcast_to(np.asarray(z_raw, dtype=np.int64), shape).copy()
    y = np.broadcast_to(np.asarray(acc_raw, dtype=np.int64), shape).copy()
    table = AngleTable.linear_rotation(fmt, stages)
    for idx in range(len(table)):
        e = table.exponents[idx]
        d = np.where(z >= 0, 1, -1).astype(np.int64)
        y = sat_add_raw(y, d * shift_right_round_even_raw(a, e), fmt)
        z = sat_sub_raw(z, d * table.raws[idx], fmt)
    return y


# ---------------------------------------------------------------------------
# Golden iteration traces
# ---------------------------------------------------------------------------
# Nine-stage reference vectors for the two worked examples that every build of
# this engine is checked against: hyperbolic rotation of z = 0.5 and the
# division 0.521 / 2.51.  The z targets of hyperbolic stages 7-9 are
# regenerated from the defining atanh series: the original tabulation prints
# E7 = 0.0068, which is not atanh(2^-7) = 0.0078 and corrupts only its z
# column from stage 7 on (x, y and d are unaffected).

GOLDEN_HYPERBOLIC = {
    "x0": 1.2074,
    "y0": 0.0,
    "z0": 0.5,
    "rows": [
        # (x, y, z, d)
        (1.2075, 0.6037, -0.0493, 1),
        (1.0566, 0.3019, 0.2061, -1),
        (1.0943, 0.4339, 0.0804, 1),
        (1.1214, 0.5023, 0.0179, 1),
        (1.1371, 0.5374, -0.0134, 1),
        (1.1287, 0.5196, 0.0022, -1),
        (1.1328, 0.5284, -0.0055785, 1),
        (1.1307, 0.5240, -0.0016722, -1),
        (1.1297, 0.5218, 0.0002809, -1),
    ],
}

GOLDEN_DIVISION = {
    "x0": 2.51,
    "y0": 0.521,
    "z0": 0.0,
    "rows": [
        (2.51, -0.734, 0.5, -1),
        (2.51, -0.1065, 0.25, 1),
        (2.51, 0.20725, 0.125, 1),
        (2.51, 0.050375, 0.1875, -1),
        (2.51, -0.02806, 0.21875, -1),
        (2.51, 0.011156, 0.203125, 1),
        (2.51, -0.00845, 0.2109375, -1),
        (2.51, 0.001351, 0.20703125, 1),
        (2.51, -0.00355, 0.208984375, -1),
    ],
}


def golden_trace_rows(kind: str, fmt: QFormat):
    """Run the 9-stage golden trace at fmt and report per-row raw deltas.

    Each row dict carries the engine raws, the reference values quantized onto
    the same raw lattice, the per-column distances in raw LSBs and the stage's
    rotation direction from both sides.
    """
    if kind == "hyperbolic":
        golden, mode = GOLDEN_HYPERBOLIC, HYPERBOLIC_ROTATION
        table = AngleTable.hyperbolic(fmt, 9)
    elif kind == "division":
        golden, mode = GOLDEN_DIVISION, LINEAR_VECTORING
        table = AngleTable.linear(fmt, 9)
    else:
        raise ValueError(f"unknown trace kind {kind!r}")
    state = CordicState(
        quantize(golden["x0"], fmt), quantize(golden["y0"], fmt), quantize(golden["z0"], fmt)
    )
    rows = []
    for i, (rx, ry, rz, rd) in enumerate(golden["rows"], start=1):
        if mode.direction == "rotation":
            d = _sign(state.z.raw)
        else:
            d = 1 if (state.x.raw >= 0) != (state.y.raw >= 0) else -1
        state = cordic_step(state, mode, table)
        ref_raws = tuple(int(quantize_raw(v, fmt)) for v in (rx, ry, rz))
        got_raws = (state.x.raw, state.y.raw, state.z.raw)
        deltas = tuple(abs(g - r) for g, r in zip(got_raws, ref_raws))
        rows.append(
            {
                "stage": i,
                "x": state.x.real,
                "y": state.y.real,
                "z": state.z.real,
                "d": d,
                "ref_x": rx,
                "ref_y": ry,
                "ref_z": rz,
                "ref_d": rd,
                "delta_x": deltas[0],
                "delta_y": deltas[1],
                "delta_z": deltas[2],
                "max_delta": max(deltas),
                "d_match": d == rd,
            }
        )
    return rows


def export_angle_tables(path, precisions=(4, 8, 16, 32)):
    """CSV dump of the hyperbolic and linear tables per datapath format."""
    from .fixedpoint import activation_format

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kind", "precision", "stage", "exponent", "entry_real", "entry_raw"])
        for bits in precisions:
            fmt = activation_format(bits)
            for kind, table in (
                ("hyperbolic", AngleTable.hyperbolic(fmt, min(bits, 16))),
                ("linear", AngleTable.linear(fmt, min(bits, 16))),
            ):
                for i in range(len(table)):
                    writer.writerow(
                        [kind, bits, i + 1, table.exponents[i], repr(table.entry_real(i)), table.raws[i]]
                    )
    return path
