"""Digit classifiers with fixed weights after training.

Two variants share one small convolutional trunk:

* ``softmax``: standard cross-entropy head.  Confident off-distribution,
  which is exactly the failure mode the prediction weighting upstream needs
  to see.
* ``edl_gen``: evidential head producing Dirichlet evidence; its predictive
  probabilities flatten on inputs unlike the training data, so the argmax
  confidence collapses under rotation.

Training is seeded and CPU-deterministic; weights land in
``<model_dir>/<variant>.pt`` and are never updated by the exporter.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

VARIANTS = ("softmax", "edl_gen")


class DigitNet(nn.Module):
    def __init__(self):
        super().__init__()
        self.conv1 = nn.Conv2d(1, 16, 5, padding=2)
        self.conv2 = nn.Conv2d(16, 32, 5, padding=2)
        self.fc1 = nn.Linear(32 * 7 * 7, 128)
        self.fc2 = nn.Linear(128, 10)

    def forward(self, x):
        x = F.max_pool2d(F.relu(self.conv1(x)), 2)
        x = F.max_pool2d(F.relu(self.conv2(x)), 2)
        x = x.flatten(1)
        x = F.relu(self.fc1(x))
        return self.fc2(x)


def _to_tensor(images: np.ndarray) -> torch.Tensor:
    x = torch.from_numpy(images.astype(np.float32) / 255.0)
    return x.unsqueeze(1)


def _edl_loss(logits: torch.Tensor, targets: torch.Tensor,
              epoch: int, total_epochs: int) -> torch.Tensor:
    """Expected-MSE evidential loss with annealed KL toward a flat Dirichlet."""
    evidence = F.softplus(logits)
    alpha = evidence + 1.0
    strength = alpha.sum(dim=1, keepdim=True)
    y = F.one_hot(targets, 10).float()
    p = alpha / strength
    err = ((y - p) ** 2).sum(dim=1)
    var = (p * (1 - p) / (strength + 1.0)).sum(dim=1)
    # KL(Dir(alpha_tilde) || Dir(1)) on the non-target mass
    alpha_tilde = y + (1 - y) * alpha
    s_tilde = alpha_tilde.sum(dim=1, keepdim=True)
    kl = (torch.lgamma(s_tilde).squeeze(1)
          - torch.lgamma(alpha_tilde).sum(dim=1)
          + torch.lgamma(torch.tensor(10.0))
          + ((alpha_tilde - 1.0)
             * (torch.digamma(alpha_tilde) - torch.digamma(s_tilde))).sum(dim=1))
    anneal = min(1.0, epoch / max(1, total_epochs // 2))
    return (err + var + anneal * kl).mean()


def train_model(variant: str, train_images: np.ndarray, train_labels: np.ndarray,
                seed: int = 0, epochs: int = 16, batch_size: int = 64,
                lr: float = 1e-3) -> DigitNet:
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    torch.manual_seed(seed)
    np.random.seed(seed)
    model = DigitNet()
    opt = torch.optim.Adam(model.parameters(), lr=lr)
    x = _to_tensor(train_images)
    y = torch.from_numpy(train_labels.astype(np.int64))
    n = len(x)
    rng = np.random.default_rng(seed)
    model.train()
    for epoch in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            batch = order[start:start + batch_size]
            xb, yb = x[batch], y[batch]
            opt.zero_grad()
            logits = model(xb)
            if variant == "softmax":
                loss = F.cross_entropy(logits, yb)
            else:
                loss = _edl_loss(logits, yb, epoch, epochs)
            loss.backward()
            opt.step()
    model.eval()
    return model


def predict_probs(model: DigitNet, variant: str, images: np.ndarray,
                  batch_size: int = 256) -> np.ndarray:
    """(n, 10) probability vectors; rows sum to 1."""
    x = _to_tensor(images)
    out = []
    with torch.no_grad():
        for start in range(0, len(x), batch_size):
            logits = model(x[start:start + batch_size])
            if variant == "softmax":
                probs = F.softmax(logits, dim=1)
            else:
                alpha = F.softplus(logits) + 1.0
                probs = alpha / alpha.sum(dim=1, keepdim=True)
            out.append(probs.numpy())
    probs = np.concatenate(out).astype(np.float64)
    return probs / probs.sum(axis=1, keepdims=True)


def model_path(model_dir: str | Path, variant: str) -> Path:
    return Path(model_dir) / f"{variant}.pt"


def save_model(model: DigitNet, model_dir: str | Path, variant: str) -> Path:
    path = model_path(model_dir, variant)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(model.state_dict(), path)
    return path


def load_model(model_dir: str | Path, variant: str) -> DigitNet:
    path = model_path(model_dir, variant)
    if not path.exists():
        raise FileNotFoundError(
            f"missing weights {path}; run 'mnist-export train' first")
    model = DigitNet()
    model.load_state_dict(torch.load(path, weights_only=True))
    model.eval()
    return model
