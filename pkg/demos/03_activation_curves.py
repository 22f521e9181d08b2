#!/usr/bin/env python3
"""Evaluate the activation pipelines across precisions and dump CSV curves."""

import math

from cordicpe import af_exp, af_sigmoid, af_tanh, default_stage_plan, quantize, softmax_run
from cordicpe.fixedpoint import activation_format
from cordicpe.pe import af_curve

print("sigmoid at selected points, every precision (default stage plans):")
for bits in (4, 8, 16, 32):
    fmt = activation_format(bits)
    plan = default_stage_plan(bits)
    row = []
    for z in (-1.0, -0.5, 0.0, 0.5, 1.0):
        v = af_sigmoid(quantize(z, fmt), plan)
        row.append(f"{v.real:6.4f}")
    print(f"  FxP{bits:>2} (h={plan.hyperbolic_stages}, l={plan.linear_stages}):", "  ".join(row))
print("  true      :", "  ".join(f"{1/(1+math.exp(-z)):6.4f}" for z in (-1.0, -0.5, 0.0, 0.5, 1.0)))

fmt16 = activation_format(16)
plan16 = default_stage_plan(16)
print("\ntanh(0.5) =", af_tanh(quantize(0.5, fmt16), plan16).real, " true", math.tanh(0.5))
print("exp(-1.0) =", af_exp(quantize(-1.0, fmt16), plan16).real, " true", math.exp(-1))

xs = [quantize(v, fmt16) for v in (0.0, 0.2, -0.3, 0.5)]
probs = softmax_run(xs, plan16)
print("softmax([0, 0.2, -0.3, 0.5]) =", [round(p.real, 4) for p in probs],
      " sum =", round(sum(p.real for p in probs), 4))

rows = af_curve("sigmoid", 16, points=16)
print("\n16-point sigmoid curve (input, output, raw):")
for r in rows:
    print(f"  {r[0]:+.4f}  {r[1]:.5f}  {r[2]}")
print("\n(the `cordicpe af` subcommand writes the same curves as CSV)")
