"""Bit-accurate emulator and analysis toolkit for a CORDIC-based SIMD
multi-precision processing element."""

__version__ = "0.1.0"

from .fixedpoint import (  # noqa: F401
    FxpValue,
    QFormat,
    accumulator_format,
    activation_format,
    barrel_shift_right,
    dequantize,
    mac_format,
    operand_format,
    q,
    quantize,
    sat_add_sub,
)
from .simd import LaneConfig, SimdWord, pack_lanes, simd_add_sub, simd_barrel_shift, unpack_lanes  # noqa: F401
from .cordic import (  # noqa: F401
    CONSTANTS,
    AngleTable,
    CordicMode,
    CordicState,
    StagePlan,
    cordic_step,
    default_stage_plan,
    hr_sinh_cosh,
    lr_mac,
    lv_divide,
    run_iterative,
)
from .pe import (  # noqa: F401
    PeConfig,
    SoftmaxFifo,
    af_exp,
    af_relu,
    af_sigmoid,
    af_tanh,
    pe_execute,
    pipeline_timing,
    softmax_run,
)
from .mc import ErrorReport, knee_select, mc_error, pareto_sweep  # noqa: F401
from .systolic import (  # noqa: F401
    ArrayConfig,
    ConvShape,
    DmaCounter,
    TileSchedule,
    dma_report,
    run_conv2d,
    run_gemm,
    throughput_report,
)
from .nn import AccuracyReport, load_model, quantize_tensor, run_inference  # noqa: F401
