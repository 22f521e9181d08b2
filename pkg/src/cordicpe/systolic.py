"""Cycle-approximate R x C systolic array of CORDIC PEs with DMA accounting.

Arithmetic is exact: every output element is a k-ascending chain of the same
saturating MAC the scalar API exposes, so the array result is bit-identical to
a direct triple loop no matter how the work is tiled.  The schedule only
affects the cycle count and the external-memory traffic counters.

Traffic model (element granularity):

* weight-stationary loops (n-tile, k-tile, m-tile); a weight tile is loaded
  once when entered and pinned while activations stream.  Partial sums for a
  whole output column block stay on chip when the psum buffer holds them,
  otherwise they spill and are re-read once per reduction tile.
* output-stationary loops (m-tile, n-tile, k-tile); partial sums never leave
  the array, operand tiles live in per-tensor LRU caches sized by the buffer
  capacities.
* the naive baseline fetches both operands from external memory for every
  MAC, which is what the reduction factors are measured against.

Convolutions map to GEMM through im2col with the reduction dimension untiled;
their ifmap traffic is counted on the physical input tensor (unique elements
per output-row strip), not on the duplicated im2col matrix.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from .cordic import CONSTANTS, lr_mac_raw
from .fixedpoint import QFormat, convert_raw, quantize_raw, activation_format
from .pe import ISSUE_LANES, PeConfig, relu_raw, sigmoid_batch_raw, tanh_batch_raw

DATAFLOWS = ("weight_stationary", "output_stationary")


class ShapeError(ValueError):
    """Inconsistent matrix/tensor dimensions."""


class ScheduleError(ValueError):
    """Tile does not fit its buffer or the array."""


@dataclass
class DmaCounter:
    ifmap_reads: int = 0
    weight_reads: int = 0
    psum_writes: int = 0
    psum_reads: int = 0

    def merged(self, other: "DmaCounter") -> "DmaCounter":
        return DmaCounter(
            self.ifmap_reads + other.ifmap_reads,
            self.weight_reads + other.weight_reads,
            self.psum_writes + other.psum_writes,
            self.psum_reads + other.psum_reads,
        )


@dataclass(frozen=True)
class ArrayConfig:
    rows: int = 8
    cols: int = 8
    pe_config: PeConfig = field(default_factory=lambda: PeConfig("fxp16", ctrl_op="mac"))
    dataflow: str = "weight_stationary"

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ShapeError("array must be at least 1x1")
        if self.dataflow not in DATAFLOWS:
            raise ShapeError(f"unknown dataflow {self.dataflow!r}")


@dataclass(frozen=True)
class ConvShape:
    h: int
    w: int
    c_in: int
    c_out: int
    k: int
    stride: int = 1
    padding: int = 0

    def __post_init__(self):
        if min(self.h, self.w, self.c_in, self.c_out, self.k, self.stride) < 1 or self.padding < 0:
            raise ShapeError("conv dimensions must be positive")
        for span in (self.h, self.w):
            if (span + 2 * self.padding - self.k) % self.stride != 0:
                raise ShapeError("output dims must be integral")
            if (span + 2 * self.padding - self.k) // self.stride + 1 < 1:
                raise ShapeError("kernel does not fit the padded input")

    @property
    def out_h(self) -> int:
        return (self.h + 2 * self.padding - self.k) // self.stride + 1

    @property
    def out_w(self) -> int:
        return (self.w + 2 * self.padding - self.k) // self.stride + 1

    @property
    def macs(self) -> int:
        return self.out_h * self.out_w * self.c_out * self.c_in * self.k * self.k

    @property
    def gemm_dims(self) -> tuple:
        return (self.out_h * self.out_w, self.c_in * self.k * self.k, self.c_out)


@dataclass(frozen=True)
class TileSchedule:
    tile_m: int
    tile_n: int
    tile_k: int
    ifmap_buffer: int  # elements
    weight_buffer: int
    psum_buffer: int

    def __post_init__(self):
        if min(self.tile_m, self.tile_n, self.tile_k) < 1:
            raise ScheduleError("tile sizes must be positive")
        if self.tile_k * self.tile_n > self.weight_buffer:
            raise ScheduleError("weight tile exceeds its buffer")
        if self.tile_m * self.tile_n > self.psum_buffer:
            raise ScheduleError("psum tile exceeds its buffer")

    def validate_gemm(self):
        """GEMM tiles are dense blocks; conv paths validate the physical strip
        footprint instead."""
        if self.tile_m * self.tile_k > self.ifmap_buffer:
            raise ScheduleError("ifmap tile exceeds its buffer")


def _tiles(total, size):
    return [(s, min(size, total - s)) for s in range(0, total, size)]


class _LruTileCache:
    def __init__(self, capacity_elements: int, tile_elements: int):
        self.slots = max(1, capacity_elements // max(1, tile_elements))
        self.cache = OrderedDict()

    def touch(self, key, elements: int) -> int:
        """Returns elements read from external memory (0 on a hit)."""
        if key in self.cache:
            self.cache.move_to_end(key)
            return 0
        self.cache[key] = True
        if len(self.cache) > self.slots:
            self.cache.popitem(last=False)
        return elements


def _gemm_traffic(m, k, n, sched: TileSchedule, dataflow: str,
                  ifmap_tile_elements=None):
    """Simulate the tile loops and count external reads/writes.

    ifmap_tile_elements(m0, mt, k0, kt) overrides the element count of one
    ifmap tile (used by conv counting, where a tile maps to unique input
    pixels rather than an im2col block).
    """
    counters = DmaCounter()
    m_tiles = _tiles(m, sched.tile_m)
    k_tiles = _tiles(k, sched.tile_k)
    n_tiles = _tiles(n, sched.tile_n)
    if ifmap_tile_elements is None:
        ifmap_tile_elements = lambda m0, mt, k0, kt: mt * kt
    ifmap_slot = max(
        ifmap_tile_elements(m0, mt, k0, kt) for m0, mt in m_tiles for k0, kt in k_tiles
    )
    icache = _LruTileCache(sched.ifmap_buffer, ifmap_slot)
    wcache = _LruTileCache(sched.weight_buffer, sched.tile_k * sched.tile_n)
    if dataflow == "weight_stationary":
        psum_resident = sched.psum_buffer >= m * sched.tile_n
        for n0, nt in n_tiles:
            for ki, (k0, kt) in enumerate(k_tiles):
                counters.weight_reads += wcache.touch((k0, n0), kt * nt)
                for m0, mt in m_tiles:
                    counters.ifmap_reads += icache.touch(
                        (m0, k0), ifmap_tile_elements(m0, mt, k0, kt)
                    )
                    if not psum_resident:
                        if ki > 0:
                            counters.psum_reads += mt * nt
                        counters.psum_writes += mt * nt
            if psum_resident:
                counters.psum_writes += m * nt
    else:  # output_stationary: psums pinned in the PEs per output tile
        for m0, mt in m_tiles:
            for n0, nt in n_tiles:
                for k0, kt in k_tiles:
                    counters.ifmap_reads += icache.touch(
                        (m0, k0), ifmap_tile_elements(m0, mt, k0, kt)
                    )
                    counters.weight_reads += wcache.touch((k0, n0), kt * nt)
                counters.psum_writes += mt * nt
    return counters


def _gemm_analytic(m, k, n, sched: TileSchedule, dataflow: str):
    """Closed-form reads for the same loop nests (cross-check for the counters)."""
    nm = math.ceil(m / sched.tile_m)
    nk = math.ceil(k / sched.tile_k)
    nn = math.ceil(n / sched.tile_n)
    i_slots = max(1, sched.ifmap_buffer // (sched.tile_m * sched.tile_k))
    w_slots = max(1, sched.weight_buffer // (sched.tile_k * sched.tile_n))
    if dataflow == "weight_stationary":
        weight = k * n
        ifmap = m * k * (1 if i_slots >= nm * nk else nn)
    else:
        ifmap = m * k * (1 if i_slots >= nk else nn)
        if i_slots >= nm * nk:
            ifmap = m * k
        weight = k * n * (1 if w_slots >= nk * nn else nm)
    return ifmap, weight


def _cycle_model(m, k, n, sched: TileSchedule, cfg: ArrayConfig) -> int:
    """Transfer-level cycles: weight load + skew fill + II-paced streaming."""
    pe = cfg.pe_config
    ii = 2 if pe.exec_mode == "pipelined" else pe.stage_plan.linear_stages
    lanes = ISSUE_LANES.get(pe.precision_sel, 1)
    cycles = 0
    for n0, nt in _tiles(n, sched.tile_n):
        for k0, kt in _tiles(k, sched.tile_k):
            cycles += kt  # weight rows shift in
            for m0, mt in _tiles(m, sched.tile_m):
                cycles += ii * math.ceil(mt / lanes) + kt + nt - 2
    return cycles


def _validate_against_array(sched: TileSchedule, cfg: ArrayConfig):
    if sched.tile_k > cfg.rows:
        raise ScheduleError(f"tile_k {sched.tile_k} exceeds {cfg.rows} array rows")
    if sched.tile_n > cfg.cols:
        raise ScheduleError(f"tile_n {sched.tile_n} exceeds {cfg.cols} array cols")


def default_schedule(m, k, n, cfg: ArrayConfig) -> TileSchedule:
    tm = min(m, 64)
    tk = min(k, cfg.rows)
    tn = min(n, cfg.cols)
    return TileSchedule(
        tile_m=tm, tile_n=tn, tile_k=tk,
        ifmap_buffer=max(tm * tk, 4096),
        weight_buffer=max(tk * tn, 4096),
        psum_buffer=max(m * tn, tm * tn),
    )


# ---------------------------------------------------------------------------
# GEMM
# ---------------------------------------------------------------------------

def _mac_chain(a_raw, b_raw, fmt: QFormat, stages: int):
    """C[m, n] = saturating MAC chain over k ascending, identical order for
    every schedule.  Activations sit on the multiplicand port so a zero
    activation contributes exactly zero; weights stream through the angle
    port, which approximates them as a signed-digit sum of the schedule."""
    mdim, k = a_raw.shape
    _, n = b_raw.shape
    acc = np.zeros((mdim, n), dtype=np.int64)
    for kk in range(k):
        acc = lr_mac_raw(a_raw[:, kk][:, None], b_raw[kk, :][None, :], acc, fmt, stages)
    return acc


def run_gemm(a_raw, b_raw, fmt: QFormat, cfg: ArrayConfig, sched: TileSchedule | None = None):
    """A (M x K) times B (K x N) through the array; returns (C, counters, cycles)."""
    a_raw = np.asarray(a_raw, dtype=np.int64)
    b_raw = np.asarray(b_raw, dtype=np.int64)
    if a_raw.ndim != 2 or b_raw.ndim != 2 or a_raw.shape[1] != b_raw.shape[0]:
        raise ShapeError(f"cannot multiply {a_raw.shape} by {b_raw.shape}")
    zbound = quantize_raw(CONSTANTS.lv_range, fmt)
    if np.any(np.abs(b_raw) > zbound):
        raise ShapeError("weight magnitudes exceed the normalized multiplier range")
    m, k = a_raw.shape
    n = b_raw.shape[1]
    sched = sched or default_schedule(m, k, n, cfg)
    sched.validate_gemm()
    _validate_against_array(sched, cfg)
    out = _mac_chain(a_raw, b_raw, fmt, cfg.pe_config.stage_plan.linear_stages)
    counters = _gemm_traffic(m, k, n, sched, cfg.dataflow)
    cycles = _cycle_model(m, k, n, sched, cfg)
    return out, counters, cycles


# ---------------------------------------------------------------------------
# Convolution via im2col
# ---------------------------------------------------------------------------

def im2col(ifmap_raw, shape: ConvShape):
    """(H, W, Cin) raw tensor to (out_h*out_w, Cin*K*K) patch matrix; zero padding."""
    h, w, c = ifmap_raw.shape
    if (h, w, c) != (shape.h, shape.w, shape.c_in):
        raise ShapeError(f"ifmap {ifmap_raw.shape} does not match {shape}")
    p = shape.padding
    padded = np.zeros((h + 2 * p, w + 2 * p, c), dtype=np.int64)
    padded[p : p + h, p : p + w, :] = ifmap_raw
    rows = []
    for oy in range(shape.out_h):
        for ox in range(shape.out_w):
            patch = padded[
                oy * shape.stride : oy * shape.stride + shape.k,
                ox * shape.stride : ox * shape.stride + shape.k,
                :,
            ]
            rows.append(patch.transpose(2, 0, 1).ravel())  # cin, ky, kx order
    return np.asarray(rows, dtype=np.int64)


def _conv_ifmap_tile_elements(shape: ConvShape):
    """Unique physical ifmap elements for an output-row strip (conv tiles are
    whole output rows; the reduction dimension is untiled)."""
    def count(m0, mt, k0, kt):
        r0 = m0 // shape.out_w
        r1 = (m0 + mt - 1) // shape.out_w
        top = max(0, r0 * shape.stride - shape.padding)
        bottom = min(shape.h - 1, r1 * shape.stride - shape.padding + shape.k - 1)
        nrows = max(0, bottom - top + 1)
        left = max(0, -shape.padding)
        right = min(shape.w - 1, (shape.out_w - 1) * shape.stride - shape.padding + shape.k - 1)
        ncols = max(0, right - left + 1)
        return nrows * ncols * shape.c_in
    return count


def conv_schedule(shape: ConvShape, cfg: ArrayConfig, row_strips: int = 1,
                  ifmap_buffer=None, weight_buffer=None, psum_buffer=None) -> TileSchedule:
    """Conv tiling: `row_strips` output rows per m-tile, reduction untiled."""
    m, k, n = shape.gemm_dims
    tm = min(m, row_strips * shape.out_w)
    tn = min(n, cfg.cols)
    strip = _conv_ifmap_tile_elements(shape)(0, tm, 0, k)
    return TileSchedule(
        tile_m=tm, tile_n=tn, tile_k=k,
        ifmap_buffer=ifmap_buffer if ifmap_buffer is not None else strip,
        weight_buffer=weight_buffer if weight_buffer is not None else max(k * tn, 1),
        psum_buffer=psum_buffer if psum_buffer is not None else max(m * tn, tm * tn),
    )


def run_conv2d(ifmap_raw, weights_raw, shape: ConvShape, fmt: QFormat, cfg: ArrayConfig,
               sched: TileSchedule | None = None, fused_af: str | None = None):
    """Convolution through the array; weights are (Cout, Cin, K, K) raws.

    Returns (ofmap (out_h, out_w, Cout), counters, cycles).  fused_af applies
    the PE activation path to the output block as it drains.
    """
    weights_raw = np.asarray(weights_raw, dtype=np.int64)
    if weights_raw.shape != (shape.c_out, shape.c_in, shape.k, shape.k):
        raise ShapeError(f"weights {weights_raw.shape} do not match {shape}")
    m, k, n = shape.gemm_dims
    sched = sched or conv_schedule(shape, cfg)
    if sched.tile_k != k:
        raise ScheduleError("conv scheduling keeps the reduction dimension untiled")
    cols = im2col(np.asarray(ifmap_raw, dtype=np.int64), shape)
    zbound = quantize_raw(CONSTANTS.lv_range, fmt)
    if np.any(np.abs(weights_raw) > zbound):
        raise ShapeError("weight magnitudes exceed the normalized multiplier range")
    b = weights_raw.reshape(shape.c_out, -1).T  # (Cin*K*K, Cout)
    out = _mac_chain(cols, b, fmt, cfg.pe_config.stage_plan.linear_stages)
    if fused_af is not None:
        out = _apply_fused_af(out, fused_af, fmt)
    counters = _gemm_traffic(m, k, n, sched, cfg.dataflow,
                             ifmap_tile_elements=_conv_ifmap_tile_elements(shape))
    cycles = _cycle_model(m, k, n, sched, cfg)
    return out.reshape(shape.out_h, shape.out_w, shape.c_out), counters, cycles


def _apply_fused_af(out_raw, name: str, fmt: QFormat):
    if name == "relu":
        return relu_raw(out_raw)
    bits = fmt.total_bits
    af = activation_format(bits)
    fns = {"sigmoid": sigmoid_batch_raw, "tanh": tanh_batch_raw}
    if name not in fns:
        raise ShapeError(f"activation {name!r} cannot be fused at the array edge")
    from .cordic import default_stage_plan

    z = convert_raw(out_raw, fmt, af)
    res = fns[name](z, bits, default_stage_plan(bits))
    return convert_raw(res, af, fmt)


# ---------------------------------------------------------------------------
# DMA reporting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DmaReport:
    counters: DmaCounter
    naive_ifmap_reads: int
    naive_weight_reads: int
    ifmap_factor: float
    weight_factor: float
    analytic_ifmap_reads: int
    analytic_weight_reads: int
    dataflow: str
    cycles: int


def dma_report(shape: ConvShape, sched: TileSchedule, dataflow: str = "weight_stationary",
               cfg: ArrayConfig | None = None) -> DmaReport:
    """Reuse factors for one conv layer: naive per-MAC fetches over scheduled
    fetches, plus the loop-nest closed form as a cross-check."""
    cfg = cfg or ArrayConfig(dataflow=dataflow)
    m, k, n = shape.gemm_dims
    if sched.tile_k != k:
        raise ScheduleError("conv scheduling keeps the reduction dimension untiled")
    strip = _conv_ifmap_tile_elements(shape)(0, min(m, sched.tile_m), 0, k)
    if strip > sched.ifmap_buffer:
        raise ScheduleError("ifmap buffer cannot hold one row strip")
    counters = _gemm_traffic(m, k, n, sched, dataflow,
                             ifmap_tile_elements=_conv_ifmap_tile_elements(shape))
    naive = shape.macs
    analytic_i, analytic_w = _conv_analytic(shape, sched, dataflow)
    return DmaReport(
        counters=counters,
        naive_ifmap_reads=naive,
        naive_weight_reads=naive,
        ifmap_factor=naive / counters.ifmap_reads,
        weight_factor=naive / counters.weight_reads,
        analytic_ifmap_reads=analytic_i,
        analytic_weight_reads=analytic_w,
        dataflow=dataflow,
        cycles=_cycle_model(m, k, n, sched, cfg),
    )


def _conv_analytic(shape: ConvShape, sched: TileSchedule, dataflow: str):
    m, k, n = shape.gemm_dims
    strip_elems = _conv_ifmap_tile_elements(shape)
    m_tiles = _tiles(m, sched.tile_m)
    nn = math.ceil(n / sched.tile_n)
    nm = len(m_tiles)
    per_pass = sum(strip_elems(m0, mt, 0, k) for m0, mt in m_tiles)
    slot = max(strip_elems(m0, mt, 0, k) for m0, mt in m_tiles)
    i_slots = max(1, sched.ifmap_buffer // slot)
    w_slots = max(1, sched.weight_buffer // (sched.tile_k * sched.tile_n))
    if dataflow == "weight_stationary":
        weight = k * n
        ifmap = per_pass * (1 if i_slots >= nm else nn)
    else:
        ifmap = per_pass  # k untiled: the strip is reused in place across n
        weight = k * n * (1 if w_slots >= nn else nm)
    return ifmap, weight


# ---------------------------------------------------------------------------
# Throughput
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ThroughputReport:
    ops_per_cycle: float
    gops: float
    lanes: int
    issue_rate: float


def throughput_report(cfg: ArrayConfig, clock_hz: float = 100e6) -> ThroughputReport:
    """Peak MAC throughput: 2 ops per MAC x PEs x lanes x issue rate."""
    pe = cfg.pe_config
    lanes = ISSUE_LANES.get(pe.precision_sel)
    if lanes is None:
        raise ShapeError(f"no throughput model for {pe.precision_sel}")
    if pe.exec_mode == "pipelined":
        rate = 0.5
    else:
        rate = 1.0 / pe.stage_plan.linear_stages
    ops = 2.0 * cfg.rows * cfg.cols * lanes * rate
    return ThroughputReport(ops, ops * clock_hz / 1e9, lanes, rate)


# ---------------------------------------------------------------------------
# Workload descriptor files
# ---------------------------------------------------------------------------

@dataclass
class Workload:
    precision: int = 8
    dataflow: str = "weight_stationary"
    rows: int = 8
    cols: int = 8
    ifmap_buffer: int = 65536
    weight_buffer: int = 65536
    psum_buffer: int = 65536
    row_strips: int = 4
    layers: list = field(default_factory=list)  # (name, ConvShape)


def load_workload(path) -> Workload:
    """Parse the key-value workload descriptor (see data/vgg16_workload.txt)."""
    wl = Workload()
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            fieldsv = line.split()
            key = fieldsv[0]
            try:
                if key == "precision":
                    wl.precision = int(fieldsv[1])
                elif key == "dataflow":
                    wl.dataflow = fieldsv[1]
                elif key == "array":
                    wl.rows, wl.cols = int(fieldsv[1]), int(fieldsv[2])
                elif key == "row_strips":
                    wl.row_strips = int(fieldsv[1])
                elif key == "buffers":
                    kv = dict(p.split("=") for p in fieldsv[1:])
                    wl.ifmap_buffer = int(kv.get("ifmap", wl.ifmap_buffer))
                    wl.weight_buffer = int(kv.get("weight", wl.weight_buffer))
                    wl.psum_buffer = int(kv.get("psum", wl.psum_buffer))
                elif key == "layer":
                    name = fieldsv[1]
                    kv = dict(p.split("=") for p in fieldsv[2:])
                    shape = ConvShape(
                        h=int(kv["h"]), w=int(kv["w"]), c_in=int(kv["cin"]),
                        c_out=int(kv["cout"]), k=int(kv["k"]),
                        stride=int(kv.get("stride", 1)), padding=int(kv.get("pad", 0)),
                    )
                    wl.layers.append((name, shape))
                else:
                    raise ValueError(f"unknown key {key!r}")
            except (IndexError, KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: cannot parse {line!r}: {exc}") from exc
    if not wl.layers:
        raise ValueError(f"{path}: workload has no layers")
    return wl


def layer_schedule(shape: ConvShape, wl: Workload) -> TileSchedule:
    """Fit a layer's tiling inside the workload's buffer capacities: the
    column tile shrinks to what the weight buffer holds, the row strip to what
    the ifmap buffer holds (the reduction stays untiled)."""
    m, k, n = shape.gemm_dims
    tn = min(n, wl.cols, wl.weight_buffer // k)
    if tn < 1:
        raise ScheduleError(
            f"weight buffer {wl.weight_buffer} cannot hold one {k}-element filter column"
        )
    strips = wl.row_strips
    counter = _conv_ifmap_tile_elements(shape)
    while strips > 1 and counter(0, min(m, strips * shape.out_w), 0, k) > wl.ifmap_buffer:
        strips -= 1
    tm = min(m, strips * shape.out_w)
    if counter(0, tm, 0, k) > wl.ifmap_buffer:
        raise ScheduleError(f"ifmap buffer {wl.ifmap_buffer} cannot hold one row strip")
    if tm * tn > wl.psum_buffer:
        raise ScheduleError(f"psum buffer {wl.psum_buffer} cannot hold a {tm}x{tn} block")
    return TileSchedule(
        tile_m=tm, tile_n=tn, tile_k=k,
        ifmap_buffer=wl.ifmap_buffer,
        weight_buffer=wl.weight_buffer,
        psum_buffer=wl.psum_buffer,
    )


def workload_dma_report(wl: Workload):
    """Per-layer DMA report rows plus the workload aggregate."""
    cfg = ArrayConfig(rows=wl.rows, cols=wl.cols,
                      pe_config=PeConfig(f"fxp{wl.precision}", ctrl_op="mac"),
                      dataflow=wl.dataflow)
    rows = []
    total = DmaCounter()
    total_macs = 0
    for name, shape in wl.layers:
        sched = layer_schedule(shape, wl)
        rep = dma_report(shape, sched, wl.dataflow, cfg)
        rows.append({
            "layer": name,
            "macs": shape.macs,
            "ifmap_reads": rep.counters.ifmap_reads,
            "weight_reads": rep.counters.weight_reads,
            "psum_writes": rep.counters.psum_writes,
            "psum_reads": rep.counters.psum_reads,
            "ifmap_factor": rep.ifmap_factor,
            "weight_factor": rep.weight_factor,
            "cycles": rep.cycles,
        })
        total = total.merged(rep.counters)
        total_macs += shape.macs
    aggregate = {
        "layer": "TOTAL",
        "macs": total_macs,
        "ifmap_reads": total.ifmap_reads,
        "weight_reads": total.weight_reads,
        "psum_writes": total.psum_writes,
        "psum_reads": total.psum_reads,
        "ifmap_factor": total_macs / total.ifmap_reads,
        "weight_factor": total_macs / total.weight_reads,
        "cycles": sum(r["cycles"] for r in rows),
    }
    return rows, aggregate
