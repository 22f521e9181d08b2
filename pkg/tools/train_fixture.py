#!/usr/bin/env python3
"""Train the desk-scale fixture models and write the shipped containers.

Uses the bundled 8x8 digits task (10 classes, 1797 samples).  The forward
pass applies the same scaled activations the emulator implements: every
pre-activation is divided by 5.5 and clamped at +/-1.1182 before the
nonlinearity, so the shipped weights are matched to the datapath semantics.

The containers under src/cordicpe/data/ are the source of truth; rerunning
this script on a different torch build may produce slightly different bytes.
"""

import pathlib
import sys

import numpy as np
import torch
from sklearn.datasets import load_digits

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))
from cordicpe.nn import save_container  # noqa: E402

DATA_DIR = pathlib.Path(__file__).resolve().parents[1] / "src" / "cordicpe" / "data"
MAX_NORM = 5.5
RAIL = 1.1182
SEED = 1234
TEST_SIZE = 360


def scaled_sigmoid(x):
    return torch.sigmoid(torch.clamp(x / MAX_NORM, -RAIL, RAIL))


def snap(x, grid):
    """Straight-through fake quantization onto a 1/grid lattice."""
    return x + (torch.round(x * grid) / grid - x).detach()


def scaled_log_softmax(logits):
    t = logits / MAX_NORM
    t = t - t.max(dim=-1, keepdim=True).values
    t = torch.clamp(t, min=-RAIL)
    return t - torch.logsumexp(t, dim=-1, keepdim=True)


def split_digits():
    digits = load_digits()
    x = (digits.data / 16.0).astype(np.float32)
    y = digits.target.astype(np.int64)
    rng = np.random.default_rng(SEED)
    order = rng.permutation(len(y))
    test, train = order[:TEST_SIZE], order[TEST_SIZE:]
    return x[train], y[train], x[test], y[test]


_PREACTS = []


def envelope(x):
    """Record a pre-activation for the range penalty and pass it through."""
    _PREACTS.append(x)
    return x


def envelope_penalty():
    # every pre-activation must stay inside the MaxNorm envelope (+/-5.5 rail)
    # or the fixed-point accumulator clips it
    total = sum(torch.relu(p.abs() - 5.8).pow(2).mean() for p in _PREACTS)
    _PREACTS.clear()
    return total


def train(model, forward, xtr, ytr, xte, yte, epochs=3000, lr=5e-2):
    # weights stay inside the normalized multiplier range of the datapath
    opt = torch.optim.Adam(model.parameters(), lr=lr, weight_decay=1e-4)
    sched = torch.optim.lr_scheduler.CosineAnnealingLR(opt, T_max=epochs)
    xtr_t, ytr_t = torch.tensor(xtr), torch.tensor(ytr)
    xte_t = torch.tensor(xte)
    for epoch in range(epochs):
        opt.zero_grad()
        logits = envelope(forward(xtr_t))
        loss = torch.nn.functional.nll_loss(scaled_log_softmax(logits), ytr_t)
        loss = loss + 4.0 * envelope_penalty()
        loss.backward()
        opt.step()
        sched.step()
        with torch.no_grad():
            for prm in model.parameters():
                if prm.ndim > 1:
                    prm.clamp_(-1.0, 1.0)
    with torch.no_grad():
        acc_tr = (forward(xtr_t).argmax(-1) == ytr_t).float().mean().item()
        acc_te = (forward(xte_t).argmax(-1) == torch.tensor(yte)).float().mean().item()
        _PREACTS.clear()
    return acc_tr, acc_te


def make_mlp(xtr, ytr, xte, yte):
    torch.manual_seed(SEED)
    fc1 = torch.nn.Linear(64, 32)
    fc2 = torch.nn.Linear(32, 10)
    model = torch.nn.ModuleList([fc1, fc2])

    def forward(x):
        pre = envelope(torch.nn.functional.linear(snap(x, 16), snap(fc1.weight, 16), fc1.bias))
        h = scaled_sigmoid(pre)
        return torch.nn.functional.linear(snap(h, 16), snap(fc2.weight, 16), fc2.bias)

    acc_tr, acc_te = train(model, forward, xtr, ytr, xte, yte, epochs=8000, lr=1e-1)
    print(f"mlp: train {acc_tr:.4f} test {acc_te:.4f}")
    tensors = {
        "fc1.w": fc1.weight.detach().numpy().T.astype(np.float32),
        "fc1.b": fc1.bias.detach().numpy().astype(np.float32),
        "fc2.w": fc2.weight.detach().numpy().T.astype(np.float32),
        "fc2.b": fc2.bias.detach().numpy().astype(np.float32),
    }
    layers = ["dense w=fc1.w b=fc1.b", "sigmoid", "dense w=fc2.w b=fc2.b", "softmax"]
    digest = save_container(DATA_DIR / "mlp_digits.fxm", "model", tensors, layers, input_shape=(64,))
    print("mlp digest:", digest)


def make_conv(xtr, ytr, xte, yte):
    torch.manual_seed(SEED + 1)
    conv = torch.nn.Conv2d(1, 8, 3, stride=2, padding=1)
    fc1 = torch.nn.Linear(8 * 16, 32)
    fc2 = torch.nn.Linear(32, 10)
    model = torch.nn.ModuleList([conv, fc1, fc2])

    def forward(x):
        # quantization-aware forward on the 8-bit engine grids: weights and
        # activations snap to 1/16 (1/8 after the x2 activation shift); the
        # sigmoid bottleneck squashes the long-chain accumulation noise
        img = snap(x, 16).reshape(-1, 1, 8, 8)
        wq = snap(conv.weight, 16)
        pre = envelope(torch.nn.functional.conv2d(img, wq, conv.bias, stride=2, padding=1))
        h = snap(torch.relu(pre), 16)
        flat = h.permute(0, 2, 3, 1).reshape(-1, 8 * 16)
        pre = envelope(torch.nn.functional.linear(flat, snap(fc1.weight, 16), fc1.bias))
        g = scaled_sigmoid(pre)
        return torch.nn.functional.linear(snap(g, 16), snap(fc2.weight, 16), fc2.bias)

    acc_tr, acc_te = train(model, forward, xtr, ytr, xte, yte, epochs=2500, lr=2e-2)
    print(f"conv: train {acc_tr:.4f} test {acc_te:.4f}")
    tensors = {
        "conv.w": conv.weight.detach().numpy().astype(np.float32),
        "conv.b": conv.bias.detach().numpy().astype(np.float32),
        "fc1.w": fc1.weight.detach().numpy().T.astype(np.float32),
        "fc1.b": fc1.bias.detach().numpy().astype(np.float32),
        "fc2.w": fc2.weight.detach().numpy().T.astype(np.float32),
        "fc2.b": fc2.bias.detach().numpy().astype(np.float32),
    }
    layers = [
        "conv w=conv.w b=conv.b stride=2 pad=1",
        "relu",
        "dense w=fc1.w b=fc1.b",
        "sigmoid",
        "dense w=fc2.w b=fc2.b",
        "softmax",
    ]
    digest = save_container(
        DATA_DIR / "conv_digits.fxm", "model", tensors, layers, input_shape=(8, 8, 1)
    )
    print("conv digest:", digest)


def make_dataset(xte, yte):
    digest = save_container(
        DATA_DIR / "digits_test.fxd",
        "dataset",
        {"inputs": xte.astype(np.float32), "labels": yte.astype(np.int64)},
    )
    print("dataset digest:", digest)


if __name__ == "__main__":
    xtr, ytr, xte, yte = split_digits()
    make_dataset(xte, yte)
    make_mlp(xtr, ytr, xte, yte)
    make_conv(xtr, ytr, xte, yte)
