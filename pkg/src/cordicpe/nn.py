"""Desk-scale quantized inference through the PE datapath.

Models and datasets live in one container format: a line-oriented text header
(tensor offset table, layer list, optional scales) terminated by
``end-header``, followed by a little-endian binary blob.  A sha256 digest of
the blob guards integrity.

The fixed-point path runs every MAC through the linear-rotation CORDIC chain
and every activation through the PE pipelines.  Pre-activations are scaled by
1/5.5 before each activation (and clamped at the convergence rail); the
real-arithmetic reference applies the same scaled-activation definition, so
the accuracy delta isolates quantization and datapath effects.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from importlib.resources import files as _pkg_files

import numpy as np

from .cordic import CONSTANTS, StagePlan, default_stage_plan
from .fixedpoint import (
    accumulator_format,
    activation_format,
    convert_raw,
    operand_format,
    quantize_raw,
    sat_add_raw,
    shift_right_round_even_raw,
)
from .pe import ConfigurationError, PeConfig, sigmoid_batch_raw, softmax_batch_raw, tanh_batch_raw
from .systolic import ArrayConfig, run_gemm

MAGIC = "container"
FORMAT_VERSION = "1"

_DTYPES = {"f32": np.float32, "i64": np.int64}
_DTYPE_NAMES = {np.dtype(np.float32): "f32", np.dtype(np.int64): "i64"}

AF_LAYERS = ("relu", "sigmoid", "tanh", "softmax")


class ModelError(ValueError):
    """Malformed container, shape mismatch, or missing tensor."""


class IntegrityError(ModelError):
    """Blob digest does not match the recorded one."""


@dataclass(frozen=True)
class LayerSpec:
    kind: str  # dense | conv | relu | sigmoid | tanh | softmax
    weights: str | None = None
    bias: str | None = None
    stride: int = 1
    padding: int = 0


@dataclass
class ModelSpec:
    layers: list
    tensors: dict
    scales: dict = field(default_factory=dict)
    input_shape: tuple = ()


@dataclass(frozen=True)
class AccuracyReport:
    precision: int
    top1_fixed: float
    top1_reference: float
    delta_points: float
    samples: int
    calibration: str = "minmax"


# ---------------------------------------------------------------------------
# Container I/O
# ---------------------------------------------------------------------------

def save_container(path, kind: str, tensors: dict, layers=(), scales=None, input_shape=()):
    blob = bytearray()
    tensor_lines = []
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(arr)
        dt = _DTYPE_NAMES.get(arr.dtype)
        if dt is None:
            raise ModelError(f"tensor {name!r}: unsupported dtype {arr.dtype}")
        data = arr.astype("<" + arr.dtype.str[1:]).tobytes()
        dims = "x".join(str(d) for d in arr.shape)
        tensor_lines.append(f"tensor {name} {dt} {len(blob)} {arr.size} {dims}")
        blob.extend(data)
    digest = hashlib.sha256(bytes(blob)).hexdigest()
    header = [f"{MAGIC} {kind} {FORMAT_VERSION}", f"digest sha256 {digest}"]
    if input_shape:
        header.append("input " + " ".join(str(d) for d in input_shape))
    header.extend(tensor_lines)
    for line in layers:
        header.append(f"layer {line}")
    for name, s in (scales or {}).items():
        header.append(f"scale {name} {s!r}")
    header.append("end-header")
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        fh.write(bytes(blob))
    return digest


def load_container(path):
    with open(path, "rb") as fh:
        data = fh.read()
    marker = b"end-header\n"
    split = data.find(marker)
    if split < 0:
        raise ModelError(f"{path}: no end-header marker")
    header_lines = data[:split].decode("ascii").splitlines()
    blob = data[split + len(marker):]
    if not header_lines or not header_lines[0].startswith(MAGIC):
        raise ModelError(f"{path}: not a container file")
    _, kind, version = header_lines[0].split()
    if version != FORMAT_VERSION:
        raise ModelError(f"{path}: unsupported container version {version}")
    tensors, layers, scales = {}, [], {}
    input_shape = ()
    recorded_digest = None
    for line in header_lines[1:]:
        fieldsv = line.split()
        key = fieldsv[0]
        if key == "digest":
            recorded_digest = fieldsv[2]
        elif key == "input":
            input_shape = tuple(int(d) for d in fieldsv[1:])
        elif key == "tensor":
            name, dt, off, count = fieldsv[1], fieldsv[2], int(fieldsv[3]), int(fieldsv[4])
            shape = tuple(int(d) for d in fieldsv[5].split("x"))
            dtype = np.dtype("<" + np.dtype(_DTYPES[dt]).str[1:])
            nbytes = count * dtype.itemsize
            if off + nbytes > len(blob):
                raise ModelError(f"{path}: tensor {name} overruns the blob")
            arr = np.frombuffer(blob[off : off + nbytes], dtype=dtype).reshape(shape)
            tensors[name] = arr.astype(_DTYPES[dt])
        elif key == "layer":
            layers.append(fieldsv[1:])
        elif key == "scale":
            scales[fieldsv[1]] = float(fieldsv[2])
        else:
            raise ModelError(f"{path}: unknown header key {key!r}")
    if recorded_digest is None:
        raise ModelError(f"{path}: missing digest")
    actual = hashlib.sha256(blob).hexdigest()
    if actual != recorded_digest:
        raise IntegrityError(f"{path}: blob digest {actual} != recorded {recorded_digest}")
    return kind, layers, tensors, scales, input_shape, recorded_digest


def _parse_layers(raw_layers, tensors, path):
    layers = []
    for fieldsv in raw_layers:
        kind = fieldsv[0]
        kv = dict(p.split("=", 1) for p in fieldsv[1:])
        if kind in ("dense", "conv"):
            for ref in ("w", "b"):
                if kv.get(ref) not in tensors:
                    raise ModelError(f"{path}: layer {kind} references missing tensor {kv.get(ref)!r}")
            layers.append(
                LayerSpec(kind, weights=kv["w"], bias=kv["b"],
                          stride=int(kv.get("stride", 1)), padding=int(kv.get("pad", 0)))
            )
        elif kind in AF_LAYERS:
            layers.append(LayerSpec(kind))
        else:
            raise ModelError(f"{path}: unknown layer kind {kind!r}")
    return layers


def _validate_shapes(model: ModelSpec, path):
    """Walk the layer list and check that consecutive shapes compose."""
    shape = tuple(model.input_shape)
    prev_name = "input"
    for i, layer in enumerate(model.layers):
        name = f"{layer.kind}[{i}]"
        if layer.kind == "dense":
            w = model.tensors[layer.weights]
            b = model.tensors[layer.bias]
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ModelError(f"{path}: {name} weight/bias shapes {w.shape}/{b.shape} invalid")
            flat = int(np.prod(shape)) if shape else w.shape[0]
            if flat != w.shape[0]:
                raise ModelError(
                    f"{path}: {prev_name} output of {flat} does not feed {name} expecting {w.shape[0]}"
                )
            shape = (w.shape[1],)
        elif layer.kind == "conv":
            w = model.tensors[layer.weights]
            if w.ndim != 4:
                raise ModelError(f"{path}: {name} weights must be (cout, cin, k, k)")
            if len(shape) != 3:
                raise ModelError(f"{path}: {prev_name} does not produce an image for {name}")
            h, wdt, c = shape
            cout, cin, k, _ = w.shape
            if cin != c:
                raise ModelError(
                    f"{path}: {prev_name} provides {c} channels but {name} expects {cin}"
                )
            oh = (h + 2 * layer.padding - k) // layer.stride + 1
            ow = (wdt + 2 * layer.padding - k) // layer.stride + 1
            if oh < 1 or ow < 1:
                raise ModelError(f"{path}: {name} kernel does not fit its input")
            shape = (oh, ow, cout)
        prev_name = name
    return model


def load_model(path) -> ModelSpec:
    kind, raw_layers, tensors, scales, input_shape, _ = load_container(path)
    if kind != "model":
        raise ModelError(f"{path}: container holds {kind!r}, not a model")
    model = ModelSpec(
        layers=_parse_layers(raw_layers, tensors, path),
        tensors=tensors,
        scales=scales,
        input_shape=input_shape,
    )
    return _validate_shapes(model, path)


def load_dataset(path):
    kind, _, tensors, _, _, _ = load_container(path)
    if kind != "dataset":
        raise ModelError(f"{path}: container holds {kind!r}, not a dataset")
    if "inputs" not in tensors or "labels" not in tensors:
        raise ModelError(f"{path}: dataset needs 'inputs' and 'labels' tensors")
    return tensors["inputs"].astype(np.float64), tensors["labels"].astype(np.int64)


def fixture_path(name: str) -> str:
    return str(_pkg_files("cordicpe.data") / name)


# ---------------------------------------------------------------------------
# Quantization
# ---------------------------------------------------------------------------

def quantize_tensor(t, precision: int):
    """Symmetric per-tensor min-max quantization into the operand format.

    scale = max_abs / rail, so the largest magnitude lands on the format rail;
    an all-zero tensor gets scale 1 by convention.  Returns (raws, scale).
    """
    t = np.asarray(t, dtype=np.float64)
    if not np.all(np.isfinite(t)):
        raise ModelError("tensor entries must be finite")
    fmt = operand_format(precision)
    max_abs = float(np.max(np.abs(t))) if t.size else 0.0
    scale = max_abs / fmt.max_value if max_abs > 0 else 1.0
    return quantize_raw(t / scale, fmt), scale


# ---------------------------------------------------------------------------
# Inference
# ---------------------------------------------------------------------------

def _rescale_to_af(raw, value_scale: float, engine_fmt, af_fmt):
    """Exact integer rescale of engine raws into activation-format inputs,
    dividing by the 5.5 normalization bound and clamping at the rail."""
    factor = engine_fmt.lsb * value_scale / (CONSTANTS.max_norm * af_fmt.lsb)
    t = np.rint(np.asarray(raw, dtype=np.float64) * factor).astype(np.int64)
    rail = int(quantize_raw(CONSTANTS.hr_range, af_fmt))
    return np.clip(t, -rail, rail)


def _batched_im2col(x, k, stride, padding):
    """(B, H, W, C) -> (B, oh*ow, C*k*k) in cin, ky, kx order."""
    b, h, w, c = x.shape
    oh = (h + 2 * padding - k) // stride + 1
    ow = (w + 2 * padding - k) // stride + 1
    padded = np.zeros((b, h + 2 * padding, w + 2 * padding, c), dtype=x.dtype)
    padded[:, padding : padding + h, padding : padding + w, :] = x
    cols = np.empty((b, oh * ow, c * k * k), dtype=x.dtype)
    idx = 0
    for oy in range(oh):
        for ox in range(ow):
            patch = padded[:, oy * stride : oy * stride + k, ox * stride : ox * stride + k, :]
            cols[:, idx, :] = patch.transpose(0, 3, 1, 2).reshape(b, -1)
            idx += 1
    return cols, oh, ow


class _FixedRunner:
    """Runs the layer stack on raws in the wide engine format.

    Values carry their real magnitude directly (absolute calibration):
    filling the format rails with per-tensor scales would shrink the shared
    accumulator's headroom below the 5.5-rail pre-activation envelope, since
    this datapath accumulates in the same N-bit format it multiplies in.
    Activations are renormalized by a power-of-two barrel shift before each
    MAC layer so they respect the multiplicand envelope (|4a| inside the
    rails); the shift is folded into the activation pre-scale afterwards.
    """

    def __init__(self, model: ModelSpec, precision: int, plan: StagePlan, array: ArrayConfig):
        self.model = model
        self.bits = precision
        self.plan = plan
        self.engine = accumulator_format(precision)
        self.af = activation_format(precision)
        self.array = array

    def _weights(self, name):
        """Weights feed the multiplier port, which needs |z| <= 1: tensors with
        larger entries are scaled down by a power of two, folded back in via
        the layer scale."""
        w = self.model.tensors[name].astype(np.float64)
        peak = float(np.max(np.abs(w))) if w.size else 0.0
        wscale = 1.0
        while peak / wscale > CONSTANTS.lv_range:
            wscale *= 2.0
        return quantize_raw(w / wscale, self.engine), wscale

    def _normalize_activations(self, raw, scale):
        """Shift right until activations sit within +/-2, trading no more
        resolution than the accumulator headroom requires (the normalized
        schedule only ever shifts the multiplicand right)."""
        peak = float(np.max(np.abs(raw))) * self.engine.lsb if raw.size else 0.0
        shift = 0
        while peak > 2.0:
            peak /= 2.0
            shift += 1
        if shift:
            raw = shift_right_round_even_raw(raw, shift)
            scale = scale * (1 << shift)
        return raw, scale

    def _bias(self, raw, b_name, value_scale, extra_axis=False):
        b = self.model.tensors[b_name].astype(np.float64)
        b_raw = quantize_raw(b / value_scale, self.engine)
        return sat_add_raw(raw, b_raw[None, None, :] if extra_axis else b_raw[None, :], self.engine)

    def run(self, inputs):
        raw = quantize_raw(np.asarray(inputs, dtype=np.float64), self.engine)
        scale = 1.0  # real value = raw * lsb * scale; scale stays a power of two
        shape = self.model.input_shape
        logits_raw, logits_scale = None, 1.0
        probs_raw = None
        for layer in self.model.layers:
            if layer.kind == "dense":
                raw = raw.reshape(raw.shape[0], -1)
                raw, scale = self._normalize_activations(raw, scale)
                w_eng, wscale = self._weights(layer.weights)
                scale = scale * wscale
                raw, _, _ = run_gemm(raw, w_eng, self.engine, self.array)
                raw = self._bias(raw, layer.bias, scale)
                shape = (raw.shape[1],)
                logits_raw, logits_scale = raw, scale
            elif layer.kind == "conv":
                w = self.model.tensors[layer.weights]
                cout, cin, k, _ = w.shape
                raw, scale = self._normalize_activations(raw, scale)
                imgs = raw.reshape((raw.shape[0],) + tuple(shape))
                cols, oh, ow = _batched_im2col(imgs, k, layer.stride, layer.padding)
                w_eng, wscale = self._weights(layer.weights)
                scale = scale * wscale
                w_eng = w_eng.reshape(cout, -1).T
                flat = cols.reshape(-1, cols.shape[-1])
                out, _, _ = run_gemm(flat, w_eng, self.engine, self.array)
                raw = out.reshape(imgs.shape[0], oh * ow, cout)
                raw = self._bias(raw, layer.bias, scale, extra_axis=True)
                raw = raw.reshape(raw.shape[0], -1)
                shape = (oh, ow, cout)
                logits_raw, logits_scale = raw, scale
            elif layer.kind == "relu":
                raw = np.maximum(raw, 0)
            elif layer.kind in ("sigmoid", "tanh"):
                t = _rescale_to_af(raw, scale, self.engine, self.af)
                fn = sigmoid_batch_raw if layer.kind == "sigmoid" else tanh_batch_raw
                out_af = fn(t, self.bits, self.plan)
                raw = convert_raw(out_af, self.af, self.engine)
                scale = 1.0
            elif layer.kind == "softmax":
                if self.bits == 4:
                    raise ConfigurationError("softmax is not available at 4-bit precision")
                t = _rescale_to_af(raw, scale, self.engine, self.af)
                probs_raw = softmax_batch_raw(t, self.bits, self.plan)
                raw = convert_raw(probs_raw, self.af, self.engine)
                scale = 1.0
        return raw, probs_raw, logits_raw, logits_scale


def _reference_forward(model: ModelSpec, inputs):
    """Float64 reference with the same scaled-activation definition."""
    x = np.asarray(inputs, dtype=np.float64)
    shape = model.input_shape
    logits = None
    for layer in model.layers:
        if layer.kind == "dense":
            w = model.tensors[layer.weights].astype(np.float64)
            b = model.tensors[layer.bias].astype(np.float64)
            x = x.reshape(x.shape[0], -1) @ w + b
            shape = (w.shape[1],)
            logits = x
        elif layer.kind == "conv":
            w = model.tensors[layer.weights].astype(np.float64)
            b = model.tensors[layer.bias].astype(np.float64)
            cout, cin, k, _ = w.shape
            imgs = x.reshape((x.shape[0],) + tuple(shape))
            cols, oh, ow = _batched_im2col(imgs, k, layer.stride, layer.padding)
            x = cols @ w.reshape(cout, -1).T + b
            x = x.reshape(x.shape[0], -1)
            shape = (oh, ow, cout)
            logits = x
        elif layer.kind == "relu":
            x = np.maximum(x, 0)
        elif layer.kind in ("sigmoid", "tanh"):
            t = np.clip(x / CONSTANTS.max_norm, -CONSTANTS.hr_range, CONSTANTS.hr_range)
            x = 1 / (1 + np.exp(-t)) if layer.kind == "sigmoid" else np.tanh(t)
        elif layer.kind == "softmax":
            t = x / CONSTANTS.max_norm
            t = t - t.max(axis=-1, keepdims=True)
            t = np.maximum(t, -CONSTANTS.hr_range)
            e = np.exp(t)
            x = e / e.sum(axis=-1, keepdims=True)
    return x, logits


def fixed_logits(model: ModelSpec, inputs, precision: int, plan: StagePlan | None = None):
    """Pre-softmax logits of the fixed path, dequantized to real units."""
    plan = plan or default_stage_plan(precision)
    array = ArrayConfig(pe_config=PeConfig(f"fxp{precision}", ctrl_op="mac", stage_plan=plan))
    runner = _FixedRunner(model, precision, plan, array)
    _, _, logits_raw, logits_scale = runner.run(inputs)
    return logits_raw * runner.engine.lsb * logits_scale


def run_inference(model: ModelSpec, dataset, precision: int,
                  plan: StagePlan | None = None) -> AccuracyReport:
    """Fixed-point inference vs the real-arithmetic reference; top-1 delta."""
    inputs, labels = dataset
    plan = plan or default_stage_plan(precision)
    array = ArrayConfig(pe_config=PeConfig(f"fxp{precision}", ctrl_op="mac", stage_plan=plan))
    runner = _FixedRunner(model, precision, plan, array)
    out_raw, _, logits_raw, _ = runner.run(inputs)
    # top-1 reads the pre-softmax logits: softmax is order-preserving, and
    # the coarse low-precision probability grid would otherwise tie winners
    pred_fixed = np.argmax(logits_raw if logits_raw is not None else out_raw, axis=-1)
    ref_out, ref_logits = _reference_forward(model, inputs)
    pred_ref = np.argmax(ref_logits if ref_logits is not None else ref_out, axis=-1)
    top1_fixed = float(np.mean(pred_fixed == labels))
    top1_ref = float(np.mean(pred_ref == labels))
    return AccuracyReport(
        precision=precision,
        top1_fixed=top1_fixed,
        top1_reference=top1_ref,
        delta_points=(top1_ref - top1_fixed) * 100.0,
        samples=len(labels),
    )
