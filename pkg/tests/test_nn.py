import numpy as np
import pytest

from cordicpe.fixedpoint import operand_format
from cordicpe.nn import (
    AccuracyReport,
    IntegrityError,
    ModelError,
    fixed_logits,
    fixture_path,
    load_container,
    load_dataset,
    load_model,
    quantize_tensor,
    run_inference,
    save_container,
)
from cordicpe.pe import ConfigurationError

MLP_DIGEST = "818b0609c29c883cb671fca175fdc8a881e09ed281545ae9edc9777320d71617"
CONV_DIGEST = "0a58acabe253954201b67d98dccc9b12db8e72c8bf0e39d86aba2cce012365e4"
DATASET_DIGEST = "5f4966a193736a9fa0235a4e8daa416c821d3accded706f54393cd0632b400f8"


@pytest.fixture(scope="module")
def mlp():
    return load_model(fixture_path("mlp_digits.fxm"))


@pytest.fixture(scope="module")
def dataset():
    return load_dataset(fixture_path("digits_test.fxd"))


# ---------------------------------------------------------------------------
# Container format
# ---------------------------------------------------------------------------

def test_container_round_trip(tmp_path):
    path = tmp_path / "m.fxm"
    w1 = np.arange(12, dtype=np.float32).reshape(4, 3) / 16
    b1 = np.zeros(3, dtype=np.float32)
    save_container(path, "model", {"l.w": w1, "l.b": b1},
                   ["dense w=l.w b=l.b", "sigmoid"], input_shape=(4,))
    model = load_model(path)
    assert [l.kind for l in model.layers] == ["dense", "sigmoid"]
    assert np.array_equal(model.tensors["l.w"], w1)
    assert model.input_shape == (4,)


def test_container_digest_guards_integrity(tmp_path):
    path = tmp_path / "m.fxm"
    save_container(path, "model", {"l.w": np.ones((2, 2), np.float32), "l.b": np.zeros(2, np.float32)},
                   ["dense w=l.w b=l.b"], input_shape=(2,))
    blob = bytearray(path.read_bytes())
    blob[-1] ^= 0xFF
    path.write_bytes(bytes(blob))
    with pytest.raises(IntegrityError):
        load_model(path)


def test_shape_mismatch_names_both_layers(tmp_path):
    path = tmp_path / "bad.fxm"
    save_container(
        path,
        "model",
        {
            "a.w": np.zeros((4, 3), np.float32), "a.b": np.zeros(3, np.float32),
            "b.w": np.zeros((5, 2), np.float32), "b.b": np.zeros(2, np.float32),
        },
        ["dense w=a.w b=a.b", "dense w=b.w b=b.b"],
        input_shape=(4,),
    )
    with pytest.raises(ModelError) as err:
        load_model(path)
    assert "dense[0]" in str(err.value) and "dense[1]" in str(err.value)


def test_missing_tensor_reference(tmp_path):
    path = tmp_path / "bad.fxm"
    save_container(path, "model", {"a.w": np.zeros((4, 3), np.float32)},
                   ["dense w=a.w b=nope"], input_shape=(4,))
    with pytest.raises(ModelError):
        load_model(path)


def test_fixture_digests_frozen():
    for name, want in (
        ("mlp_digits.fxm", MLP_DIGEST),
        ("conv_digits.fxm", CONV_DIGEST),
        ("digits_test.fxd", DATASET_DIGEST),
    ):
        *_, digest = load_container(fixture_path(name))
        assert digest == want, name


def test_dataset_fixture_shape(dataset):
    inputs, labels = dataset
    assert inputs.shape == (360, 64)
    assert labels.shape == (360,)
    assert inputs.min() >= 0.0 and inputs.max() <= 1.0
    assert set(np.unique(labels)) <= set(range(10))


# ---------------------------------------------------------------------------
# quantize_tensor
# ---------------------------------------------------------------------------

def test_quantize_tensor_maps_max_to_rail():
    raws, scale = quantize_tensor(np.array([-1.0, 0.5]), 8)
    fmt = operand_format(8)
    assert raws[0] == fmt.min_raw + 1  # -max_value, the negative rail region
    assert scale == pytest.approx(1.0 / fmt.max_value)
    back = raws * fmt.lsb * scale
    assert np.max(np.abs(back - [-1.0, 0.5])) <= 0.5 * fmt.lsb * scale


def test_quantize_tensor_all_zero():
    raws, scale = quantize_tensor(np.zeros(5), 8)
    assert scale == 1.0
    assert np.all(raws == 0)


def test_quantize_tensor_round_trip_bound():
    rng = np.random.default_rng(3)
    for bits in (8, 16):
        fmt = operand_format(bits)
        t = rng.normal(0, 2, 500)
        raws, scale = quantize_tensor(t, bits)
        back = raws * fmt.lsb * scale
        assert np.max(np.abs(back - t)) <= 0.5 * fmt.lsb * scale + 1e-12


def test_quantize_tensor_rejects_nonfinite():
    with pytest.raises(ModelError):
        quantize_tensor(np.array([1.0, np.inf]), 8)


# ---------------------------------------------------------------------------
# Inference
# ---------------------------------------------------------------------------

def test_accuracy_deltas_per_precision(mlp, dataset):
    r32 = run_inference(mlp, dataset, 32)
    assert abs(r32.delta_points) <= 0.5
    r16 = run_inference(mlp, dataset, 16)
    r8 = run_inference(mlp, dataset, 8)
    assert abs(r16.delta_points) <= 2.0
    assert abs(r8.delta_points) <= 2.0
    assert r32.samples == 360
    assert 0 <= r32.top1_fixed <= 1 and 0 <= r32.top1_reference <= 1


def test_conv_variant_deltas(dataset):
    model = load_model(fixture_path("conv_digits.fxm"))
    for precision, bound in ((32, 0.5), (16, 2.0), (8, 2.0)):
        r = run_inference(model, dataset, precision)
        assert abs(r.delta_points) <= bound, (precision, r)


def test_precision_ordering_of_top1(mlp, dataset):
    top1 = {p: run_inference(mlp, dataset, p).top1_fixed for p in (8, 16, 32)}
    assert top1[32] >= top1[16] - 0.01
    assert top1[16] >= top1[8] - 0.01


def test_logit_fidelity_improves_with_precision(mlp, dataset):
    inputs, _ = dataset
    from cordicpe.nn import _reference_forward

    _, ref_logits = _reference_forward(mlp, inputs)
    errs = []
    for p in (8, 16, 32):
        fl = fixed_logits(mlp, inputs, p)
        errs.append(np.mean(np.abs(fl - ref_logits)))
    assert errs[0] > errs[1] > errs[2]


def test_inference_deterministic(mlp, dataset):
    inputs, _ = dataset
    a = fixed_logits(mlp, inputs[:50], 8)
    b = fixed_logits(mlp, inputs[:50], 8)
    assert np.array_equal(a, b)
    ra = run_inference(mlp, dataset, 16)
    rb = run_inference(mlp, dataset, 16)
    assert ra == rb


def test_single_sample_dataset(mlp, dataset):
    inputs, labels = dataset
    r = run_inference(mlp, (inputs[:1], labels[:1]), 16)
    assert r.top1_fixed in (0.0, 1.0)
    assert r.samples == 1


def test_softmax_rejected_at_fxp4(mlp, dataset):
    with pytest.raises(ConfigurationError):
        run_inference(mlp, dataset, 4)
