#!/usr/bin/env python3
"""Tour of the fixed-point layer: Q-formats, round-to-even, packed lanes."""

from cordicpe import (
    FxpValue,
    LaneConfig,
    barrel_shift_right,
    pack_lanes,
    q,
    quantize,
    sat_add_sub,
    simd_add_sub,
    unpack_lanes,
)

fmt = q(8, 5)
print(f"format {fmt}: lsb={fmt.lsb}, range [{fmt.min_value}, {fmt.max_value}]")

# quantization rounds half to even and saturates at the rails
for x in (0.5, 0.046875, 10.0, -10.0):
    v = quantize(x, fmt)
    print(f"  quantize({x:>9}) -> raw {v.raw:>4}  ({v.real})")

# the barrel shifter rounds ties to the even raw value
print("\nshift-right with round-to-even:")
for raw, k in ((6, 1), (5, 1), (7, 1), (-1, 1)):
    out = barrel_shift_right(FxpValue(raw, fmt), k)
    print(f"  {raw:>3} >> {k} = {out.raw}")

# saturation instead of wraparound
top = FxpValue(0x7F, fmt)
one_lsb = FxpValue(1, fmt)
print("\n0x7F + 0x01 saturates to:", hex(sat_add_sub(top, one_lsb, 'add').raw))

# four 8-bit lanes in one 32-bit word; carries never cross lane boundaries
cfg = LaneConfig.named("4x8")
a = pack_lanes([FxpValue(0x7F, fmt), quantize(0.25, fmt), quantize(-1.0, fmt), quantize(0.5, fmt)], cfg)
b = pack_lanes([FxpValue(0x01, fmt), quantize(0.25, fmt), quantize(0.5, fmt), quantize(-0.5, fmt)], cfg)
out = simd_add_sub(a, b, ["add"] * 4)
print("\npacked add, lane 0 saturates while its neighbours are untouched:")
for i, v in enumerate(unpack_lanes(out)):
    print(f"  lane {i}: {v.real:+.5f} (raw {v.raw})")
