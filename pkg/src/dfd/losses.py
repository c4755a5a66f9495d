"""Classifier heads and the disentanglement objective.

The causal head trains with standard cross-entropy; the bias head trains
with generalized cross-entropy, which amplifies gradients on confidently fit
samples and so soaks up shortcut patterns. Gradient routing stops each head's
loss from training the opposite stream while leaving forward values intact.
"""

from __future__ import annotations

from typing import Optional, Tuple

import numpy as np
import torch
import torch.nn.functional as F

from .model import PatientRepresentations

PROB_FLOOR = 1e-12  # p**(g-1) diverges at 0, so probabilities are clamped

ROUTING_MODES = ("stop_grad", "off")


def cross_entropy(logits: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    """Mean of -log softmax(logits)[y] over the batch."""
    return F.cross_entropy(logits, targets)


def clamped_probs(logits: torch.Tensor) -> torch.Tensor:
    return torch.clamp(F.softmax(logits, dim=-1), min=PROB_FLOOR, max=1.0)


def gce(probs: torch.Tensor, targets: torch.Tensor, g: float) -> torch.Tensor:
    """Generalized cross-entropy (1 - p_y**g) / g, mean over the batch.

    g in (0, 1]; g -> 0 recovers cross-entropy and g = 1 gives 1 - p_y
    exactly (special-cased so no power rounding creeps in).
    """
    if not (0.0 < g <= 1.0):
        raise ValueError(f"g must lie in (0, 1], got {g}")
    p_y = torch.clamp(
        probs.gather(-1, targets.unsqueeze(-1)).squeeze(-1), min=PROB_FLOOR, max=1.0
    )
    if g == 1.0:
        per_sample = 1.0 - p_y
    else:
        per_sample = (1.0 - p_y**g) / g
    return per_sample.mean()


def routed_inputs(reps: PatientRepresentations, routing: str
                  ) -> Tuple[torch.Tensor, torch.Tensor]:
    """E_concat as seen by each head. Under stop_grad routing the causal head
    cannot push gradients into H_b and vice versa; forward values are
    unchanged."""
    if routing not in ROUTING_MODES:
        raise ValueError(f"routing must be one of {ROUTING_MODES}, got {routing!r}")
    if reps.h_b is None:
        raise ValueError("disentanglement loss needs both streams")
    if routing == "off":
        e = torch.cat([reps.h_c, reps.h_b], dim=-1)
        return e, e
    in_c = torch.cat([reps.h_c, reps.h_b.detach()], dim=-1)
    in_b = torch.cat([reps.h_c.detach(), reps.h_b], dim=-1)
    return in_c, in_b


def disentangle_loss(reps: PatientRepresentations, targets: torch.Tensor,
                     head_c: torch.nn.Module, head_b: torch.nn.Module,
                     g: float, routing: str = "stop_grad",
                     disable_gce: bool = False):
    """L_d = CE(f_c(E_concat), y) + GCE(f_b(E_concat), y).

    disable_gce swaps the bias head's loss for plain cross-entropy (ablation).
    Returns (L_d, {"l_ce":..., "l_gce":...}).
    """
    in_c, in_b = routed_inputs(reps, routing)
    l_ce = cross_entropy(head_c(in_c), targets)
    logits_b = head_b(in_b)
    if disable_gce:
        l_gce = cross_entropy(logits_b, targets)
    else:
        l_gce = gce(clamped_probs(logits_b), targets, g)
    total = l_ce + l_gce
    return total, {"l_ce": l_ce, "l_gce": l_gce}


def predict(e_concat: torch.Tensor, head_c: torch.nn.Module
            ) -> Tuple[np.ndarray, np.ndarray]:
    """Class predictions and probabilities from the causal classifier.

    Ties resolve to the lowest class index.
    """
    with torch.no_grad():
        probs = clamped_probs(head_c(e_concat)).numpy()
    preds = np.argmax(probs, axis=1)  # np.argmax returns the first maximum
    return preds, probs
