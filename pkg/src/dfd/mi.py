"""Mutual-information estimation between the two streams.

A small statistics network is trained to maximize the Donsker-Varadhan
bound between H_c and H_b; the main model then minimizes the resulting bound
value, decorrelating the streams. Negative pairs come from batch elements
with a different label (the marginal-shuffle variant exists for calibration
against the analytic Gaussian case, where labels do not exist).
"""

from __future__ import annotations

from typing import Optional

import numpy as np
import torch
import torch.nn as nn

from .graph import resolve_activation

STATS_CLAMP = 30.0  # psi outputs clamped before exp for overflow safety


class MiEstimationError(RuntimeError):
    pass


class SingleClassBatchError(ValueError):
    """Raised when a batch holds one label only, so different-label negative
    pairs cannot be formed. Callers skip the MI term and count the skip."""


class StatsNet(nn.Module):
    """2-layer MLP mapping a concatenated (H_c, H_b) pair to a scalar score."""

    def __init__(self, dim_c: int, dim_b: Optional[int] = None, hidden_dim: int = 128,
                 activation: str = "softplus", dtype: torch.dtype = torch.float64):
        super().__init__()
        dim_b = dim_c if dim_b is None else dim_b
        self.fc1 = nn.Linear(dim_c + dim_b, hidden_dim, dtype=dtype)
        self.fc2 = nn.Linear(hidden_dim, 1, dtype=dtype)
        self._act = resolve_activation(activation)

    def forward(self, h_c: torch.Tensor, h_b: torch.Tensor) -> torch.Tensor:
        score = self.fc2(self._act(self.fc1(torch.cat([h_c, h_b], dim=-1))))
        return torch.clamp(score.squeeze(-1), -STATS_CLAMP, STATS_CLAMP)


def sample_negatives(labels: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """(n, k) partner indices per anchor, all with a different label.

    Draws without replacement when an anchor has >= k candidates, with
    replacement otherwise. Deterministic given the rng state.
    """
    labels = np.asarray(labels)
    n = labels.shape[0]
    if np.unique(labels).size < 2:
        raise SingleClassBatchError("batch holds a single class; no negative pairs")
    out = np.empty((n, k), dtype=np.int64)
    for i in range(n):
        candidates = np.flatnonzero(labels != labels[i])
        out[i] = rng.choice(candidates, size=k, replace=candidates.size < k)
    return out


def sample_negatives_shuffle(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """Marginal-shuffle negatives: k random partners per anchor, self excluded.
    Used for the Gaussian calibration oracle where no labels exist."""
    if n < 2:
        raise ValueError("need at least 2 rows to shuffle")
    out = np.empty((n, k), dtype=np.int64)
    for i in range(n):
        draws = rng.integers(0, n - 1, size=k)
        draws[draws >= i] += 1  # uniform over everything except i
        out[i] = draws
    return out


def dv_bound(net: StatsNet, h_c: torch.Tensor, h_b: torch.Tensor,
             negatives: np.ndarray) -> torch.Tensor:
    """Donsker-Varadhan bound:
    mean_i psi(H_c^i, H_b^i) - log mean_{i,j'} exp psi(H_c^i, H_b^j').

    The log-mean-exp is computed with a max shift. Non-finite statistics are
    an error, never silently propagated.
    """
    n = h_c.shape[0]
    if n < 2:
        raise MiEstimationError("DV bound needs at least 2 anchors")
    neg = torch.from_numpy(np.ascontiguousarray(negatives))
    if neg.shape[0] != n:
        raise MiEstimationError(f"negatives rows {neg.shape[0]} != anchors {n}")
    k = neg.shape[1]

    t_joint = net(h_c, h_b)
    anchors = h_c.unsqueeze(1).expand(n, k, h_c.shape[-1]).reshape(n * k, -1)
    partners = h_b[neg.reshape(-1)]
    t_neg = net(anchors, partners)
    if not bool(torch.isfinite(t_joint).all()) or not bool(torch.isfinite(t_neg).all()):
        raise MiEstimationError("non-finite statistics network output")

    shift = t_neg.max().detach()
    log_mean_exp = torch.log(torch.exp(t_neg - shift).mean()) + shift
    return t_joint.mean() - log_mean_exp


def mi_adversarial_step(net: StatsNet, net_opt: torch.optim.Optimizer,
                        h_c: torch.Tensor, h_b: torch.Tensor,
                        negatives: np.ndarray, inner_steps: int = 1,
                        ascent_batches=None) -> torch.Tensor:
    """Alternating update resolving the sup over the statistics network.

    Runs inner_steps ascent steps on the bound w.r.t. the net's parameters
    (detached representations; optionally a replay of recent batches passed
    as ascent_batches, which resolves the sup far better than the current
    batch alone), then freezes the net and returns a fresh bound evaluation
    for the main model to minimize. The net stays frozen so the model's
    backward pass cannot touch it; the next call unfreezes it.
    """
    for p in net.parameters():
        p.requires_grad_(True)
    if ascent_batches is None:
        ascent_batches = [(h_c.detach(), h_b.detach(), negatives)]
    n_asc = len(ascent_batches)
    for step in range(inner_steps):
        hc_a, hb_a, neg_a = ascent_batches[step % n_asc]
        net_opt.zero_grad()
        loss = -dv_bound(net, hc_a, hb_a, neg_a)
        loss.backward()
        net_opt.step()
    for p in net.parameters():
        p.requires_grad_(False)
    return dv_bound(net, h_c, h_b, negatives)


def gaussian_mi(rho: float) -> float:
    """Analytic MI of a correlated bivariate Gaussian pair."""
    return -0.5 * float(np.log(1.0 - rho * rho))


def train_dv_estimator(x: np.ndarray, y: np.ndarray, *, k: int = 10,
                       hidden_dim: int = 128, steps: int = 1200,
                       batch_size: int = 512, lr: float = 1e-3,
                       seed: int = 0, rng: Optional[np.random.Generator] = None,
                       return_trace: bool = False):
    """Fit a StatsNet on paired samples with marginal-shuffle negatives and
    return the final full-sample bound (and optionally the per-step trace).

    This is the calibration path used by the analytic Gaussian oracle and the
    embedding-level MI report; training on the model's representations goes
    through mi_adversarial_step instead.
    """
    from .model import init_module_
    from .seeding import numpy_rng, torch_generator

    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    if x.shape[0] == 1:
        x, y = x.T, y.T
    n = x.shape[0]
    if rng is None:
        rng = numpy_rng(seed, "mi/calibration")
    net = StatsNet(x.shape[1], y.shape[1], hidden_dim)
    init_module_(net, torch_generator(seed, "mi/calibration-init"))

    xt = torch.from_numpy(x)
    yt = torch.from_numpy(y)
    opt = torch.optim.Adam(net.parameters(), lr=lr)
    trace = []
    for _ in range(steps):
        idx = rng.choice(n, size=min(batch_size, n), replace=False)
        xb, yb = xt[idx], yt[idx]
        neg = sample_negatives_shuffle(xb.shape[0], k, rng)
        opt.zero_grad()
        loss = -dv_bound(net, xb, yb, neg)
        loss.backward()
        opt.step()
        if return_trace:
            trace.append(-loss.item())
    with torch.no_grad():
        neg = sample_negatives_shuffle(n, k, rng)
        final = float(dv_bound(net, xt, yt, neg))
    return (final, trace) if return_trace else final
