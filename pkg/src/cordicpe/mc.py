"""Monte-Carlo error measurement against float64 references, and stage sweeps.

Sample counts follow the 2^(N/2 + 1) rule per precision N.  Draws come from a
seeded PCG64 generator so every report is reproducible bit for bit.  The
reference for each cell is the real-arithmetic function evaluated on the
dequantized operands, which isolates the datapath error from input
quantization.
"""

from __future__ import annotations

import io
import json
from dataclasses import asdict, dataclass

import numpy as np

from .cordic import CONSTANTS, StagePlan, default_stage_plan, lr_mac_raw, lv_divide_raw
from .fixedpoint import accumulator_format, activation_format, mac_format, quantize_raw
from .pe import exp_batch_raw, exp_format, sigmoid_batch_raw, softmax_batch_raw, tanh_batch_raw

RNG_ALGORITHM = "pcg64"

FUNCTIONS = ("sigmoid", "tanh", "exp", "divide", "mac", "softmax")

CSV_HEADER = "function,precision,hyp_stages,lin_stages,samples,mae,mse,max_abs_err,seed"

SOFTMAX_MC_WIDTH = 8  # elements per sampled softmax vector


@dataclass(frozen=True)
class ErrorReport:
    function: str
    precision: int
    hyp_stages: int
    lin_stages: int
    samples: int
    mae: float
    mse: float
    max_abs_err: float
    seed: int


def sample_count(precision: int) -> int:
    return 2 ** (precision // 2 + 1)


def _report(function, precision, plan, seed, err):
    err = np.abs(np.asarray(err, dtype=np.float64)).ravel()
    return ErrorReport(
        function=function,
        precision=precision,
        hyp_stages=plan.hyperbolic_stages,
        lin_stages=plan.linear_stages,
        samples=-1,  # filled by caller
        mae=float(err.mean()),
        mse=float(np.mean(err * err)),
        max_abs_err=float(err.max()),
        seed=seed,
    )


def mc_error(function: str, precision: int, plan: StagePlan | None = None, seed: int = 0,
             samples: int | None = None) -> ErrorReport:
    """One Monte-Carlo cell: uniform draws over the function's convergence
    domain, fixed-point pipeline vs float64 reference."""
    if function not in FUNCTIONS:
        raise ValueError(f"unknown function {function!r}")
    plan = plan or default_stage_plan(precision)
    n = samples if samples is not None else sample_count(precision)
    rng = np.random.Generator(np.random.PCG64(seed))
    af = activation_format(precision)

    if function in ("sigmoid", "tanh", "exp"):
        zr = quantize_raw(rng.uniform(-CONSTANTS.hr_range, CONSTANTS.hr_range, n), af)
        zde = zr * af.lsb
        if function == "sigmoid":
            got = sigmoid_batch_raw(zr, precision, plan) * af.lsb
            ref = 1.0 / (1.0 + np.exp(-zde))
        elif function == "tanh":
            got = tanh_batch_raw(zr, precision, plan) * af.lsb
            ref = np.tanh(zde)
        else:
            got = exp_batch_raw(zr, precision, plan) * exp_format(precision).lsb
            ref = np.exp(zde)
        err = got - ref
    elif function == "divide":
        # quotients uniform in [-1, 1], denominators uniform in (0, 1]
        quot = rng.uniform(-1.0, 1.0, n)
        den = rng.uniform(0.0, 1.0, n)
        draw = np.maximum(quantize_raw(den, af), 1)
        nraw = np.clip(quantize_raw(quot * (draw * af.lsb), af), -draw, draw)
        got = lv_divide_raw(nraw, draw, af, plan.linear_stages) * af.lsb
        err = got - nraw / draw
    elif function == "mac":
        # normalized multiplier in [-1, 1]; multiplicand inside the envelope
        # that keeps intermediate sums off the rails (|acc| + 1.5|a| <= 8)
        fmt = mac_format(precision)
        a = quantize_raw(rng.uniform(-4.0, 4.0, n) if precision >= 8 else rng.uniform(-1.5, 1.5, n), fmt)
        z = quantize_raw(rng.uniform(-CONSTANTS.lv_range, CONSTANTS.lv_range, n), fmt)
        acc = quantize_raw(rng.uniform(-1.0, 1.0, n), fmt)
        got = lr_mac_raw(a, z, acc, fmt, plan.linear_stages) * fmt.lsb
        ref = np.clip((a * fmt.lsb) * (z * fmt.lsb) + acc * fmt.lsb, fmt.min_value, fmt.max_value)
        err = got - ref
    else:  # softmax
        # vectors drawn from half the convergence range so the max-shifted
        # arguments stay inside it
        half = CONSTANTS.hr_range / 2
        xr = quantize_raw(rng.uniform(-half, half, (n, SOFTMAX_MC_WIDTH)), af)
        got = softmax_batch_raw(xr, precision, plan) * af.lsb
        xde = xr * af.lsb
        es = np.exp(xde - xde.max(axis=-1, keepdims=True))
        ref = es / es.sum(axis=-1, keepdims=True)
        err = got - ref

    rep = _report(function, precision, plan, seed, err)
    return ErrorReport(**{**asdict(rep), "samples": n})


def pareto_sweep(function: str, precision: int, stage_range, axis: str = "hyperbolic",
                 seed: int = 0, samples: int | None = None):
    """One mc_error per stage count along one axis, constant seed."""
    if axis not in ("hyperbolic", "linear"):
        raise ValueError(f"axis must be hyperbolic or linear, got {axis!r}")
    base = default_stage_plan(precision)
    reports = []
    for k in stage_range:
        if axis == "hyperbolic":
            plan = StagePlan(k, base.linear_stages, precision)
        else:
            plan = StagePlan(base.hyperbolic_stages, k, precision)
        reports.append(mc_error(function, precision, plan, seed=seed, samples=samples))
    return reports


def knee_select(reports, lsb_floor: float) -> StagePlan:
    """Smallest stage count whose MAE is within lsb_floor of the deepest MAE."""
    if not reports:
        raise ValueError("knee_select needs at least one report")
    final_mae = reports[-1].mae
    for rep in reports:
        if rep.mae - final_mae <= lsb_floor:
            return StagePlan(rep.hyp_stages, rep.lin_stages, rep.precision)
    return StagePlan(reports[-1].hyp_stages, reports[-1].lin_stages, reports[-1].precision)


def reports_to_csv(reports) -> str:
    out = io.StringIO()
    out.write(CSV_HEADER + "\n")
    for r in reports:
        out.write(
            f"{r.function},{r.precision},{r.hyp_stages},{r.lin_stages},{r.samples},"
            f"{r.mae!r},{r.mse!r},{r.max_abs_err!r},{r.seed}\n"
        )
    return out.getvalue()


def reports_to_json(reports) -> str:
    return json.dumps({"rng": RNG_ALGORITHM, "reports": [asdict(r) for r in reports]},
                      indent=2, sort_keys=True)
