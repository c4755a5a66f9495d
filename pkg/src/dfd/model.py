"""Gated dual-stream message passing over the bipartite graph.

A gate MLP looks at each edge's endpoint inits and splits the edge's message
mass between a causal stream (weight tau) and a bias stream (weight
omega = 1 - tau). Gating applies in the first layer only; higher layers run
with unit weights. Both streams share the topology but keep separate
parameters, and the readout stacks patient-node embeddings into H_c / H_b.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import torch
import torch.nn as nn

from .graph import BipartiteGraph, ModalityEncoderBank, build_graph, resolve_activation
from .synthdata import MultimodalDataset


@dataclass
class ModelConfig:
    num_modalities: int
    modality_dims: tuple
    num_classes: int
    edge_dim: int = 64
    hidden_dim: int = 64
    num_layers: int = 3
    activation: str = "softplus"
    message_includes_neighbor: bool = False
    gate_clamp: float = 38.0

    def validate(self) -> None:
        if self.num_layers < 1:
            raise ValueError("num_layers must be >= 1")
        if min(self.edge_dim, self.hidden_dim) < 1:
            raise ValueError("dims must be >= 1")
        if len(self.modality_dims) != self.num_modalities:
            raise ValueError("modality_dims length must equal num_modalities")
        resolve_activation(self.activation)


def init_linear_(layer: nn.Linear, gen: torch.Generator) -> None:
    """Torch's default Linear init (uniform +-1/sqrt(fan_in)) from an explicit generator."""
    bound = 1.0 / np.sqrt(layer.in_features)
    with torch.no_grad():
        layer.weight.uniform_(-bound, bound, generator=gen)
        if layer.bias is not None:
            layer.bias.uniform_(-bound, bound, generator=gen)


def init_module_(module: nn.Module, gen: torch.Generator) -> None:
    for m in module.modules():
        if isinstance(m, nn.Linear):
            init_linear_(m, gen)


@dataclass
class GateWeights:
    """Per-edge stream assignment: tau = sigmoid(beta), omega = 1 - tau."""

    beta: torch.Tensor  # clamped pre-activation
    tau: torch.Tensor
    omega: torch.Tensor


@dataclass
class PatientRepresentations:
    """Readout matrices; E_concat columns are [H_c | H_b]."""

    h_c: torch.Tensor  # (N, d_h)
    h_b: Optional[torch.Tensor]  # (N, d_h), absent for the single-stream net
    e_concat: torch.Tensor  # (N, 2 d_h) or (N, d_h) when h_b is absent


class GraphBatch:
    """A dataset slice prepared for message passing: the induced subgraph on
    the selected patients plus all modality nodes."""

    def __init__(self, ds: MultimodalDataset, dtype: torch.dtype = torch.float64):
        self.ds = ds
        self.dtype = dtype
        self.graph: BipartiteGraph = build_graph(ds)
        g = self.graph
        self.num_patients = g.num_patients
        self.num_nodes = g.num_patients + g.num_modalities
        self.node_init = torch.cat(
            [
                torch.as_tensor(g.patient_node_init, dtype=dtype),
                torch.as_tensor(g.modality_node_init, dtype=dtype),
            ]
        )
        self.edge_pat_node = torch.from_numpy(g.edge_patient)
        self.edge_mod_node = torch.from_numpy(g.edge_modality + g.num_patients)
        self.labels = torch.from_numpy(ds.labels.astype(np.int64))
        deg = np.zeros(self.num_nodes, dtype=np.float64)
        np.add.at(deg, g.edge_patient, 1.0)
        np.add.at(deg, g.edge_modality + g.num_patients, 1.0)
        # every patient has >= 1 observed modality by dataset invariant
        assert deg[: self.num_patients].min() >= 1.0, "isolated patient node"
        self.degrees = torch.from_numpy(deg).to(dtype)
        self.isolated = self.degrees == 0  # only modality nodes can be isolated

    @classmethod
    def from_indices(cls, ds: MultimodalDataset, indices, dtype=torch.float64):
        return cls(ds.take(indices), dtype=dtype)


class GateMLP(nn.Module):
    """Two-layer MLP mapping concatenated endpoint inits to a scalar, with the
    pre-activation clamped so the sigmoid never saturates to exact 0/1."""

    def __init__(self, node_dim: int, hidden_dim: int, activation: str,
                 clamp: float, dtype: torch.dtype):
        super().__init__()
        self.fc1 = nn.Linear(2 * node_dim, hidden_dim, dtype=dtype)
        self.fc2 = nn.Linear(hidden_dim, 1, dtype=dtype)
        self._act = resolve_activation(activation)
        self.clamp = clamp

    def forward(self, h_u: torch.Tensor, h_v: torch.Tensor) -> GateWeights:
        raw = self.fc2(self._act(self.fc1(torch.cat([h_u, h_v], dim=-1)))).squeeze(-1)
        beta = torch.clamp(raw, -self.clamp, self.clamp)
        tau = torch.sigmoid(beta)
        return GateWeights(beta=beta, tau=tau, omega=1.0 - tau)


class StreamBank(nn.Module):
    """Per-layer message (W), node-update (U) and edge-update parameters of
    one stream. Structure follows the missing-data GNN it extends: messages
    come from edge embeddings, aggregation is a mean over neighbors, and edge
    embeddings are refreshed from their endpoints after every non-final layer.
    """

    def __init__(self, cfg: ModelConfig, dtype: torch.dtype):
        super().__init__()
        self.cfg = cfg
        self._act = resolve_activation(cfg.activation)
        d_e, d_h = cfg.edge_dim, cfg.hidden_dim
        self.w = nn.ModuleList()
        self.u = nn.ModuleList()
        self.edge_mlps = nn.ModuleList()
        prev = cfg.num_modalities  # layer-0 node embeddings are the M-dim inits
        for layer in range(1, cfg.num_layers + 1):
            msg_in = d_e + (prev if cfg.message_includes_neighbor else 0)
            self.w.append(nn.Linear(msg_in, d_h, dtype=dtype))
            self.u.append(nn.Linear(prev + d_h, d_h, dtype=dtype))
            if layer < cfg.num_layers:
                self.edge_mlps.append(nn.Linear(2 * d_h + d_e, d_e, dtype=dtype))
            prev = d_h

    def node_update(self, layer: int, batch: GraphBatch, h: torch.Tensor,
                    he: torch.Tensor, gate: Optional[torch.Tensor]) -> torch.Tensor:
        """One propagation step. The gate weight applies in layer 1 only; any
        weights supplied for higher layers are ignored (effective weight 1)."""
        act = self._act
        w_lin = self.w[layer - 1]
        if self.cfg.message_includes_neighbor:
            m_to_pat = act(w_lin(torch.cat([h[batch.edge_mod_node], he], dim=-1)))
            m_to_mod = act(w_lin(torch.cat([h[batch.edge_pat_node], he], dim=-1)))
        else:
            m_to_pat = m_to_mod = act(w_lin(he))
        if layer == 1 and gate is not None:
            gw = gate.unsqueeze(-1)
            m_to_pat = gw * m_to_pat
            m_to_mod = gw * m_to_mod

        zeros = torch.zeros(batch.num_nodes, m_to_pat.shape[-1], dtype=h.dtype)
        agg = zeros.index_add(0, batch.edge_pat_node, m_to_pat)
        agg = agg.index_add(0, batch.edge_mod_node, m_to_mod)
        mean = agg / batch.degrees.clamp(min=1.0).unsqueeze(-1)

        h_new = act(self.u[layer - 1](torch.cat([h, mean], dim=-1)))
        if bool(batch.isolated.any()):
            # a modality absent from the batch keeps its previous embedding;
            # if the dimension changed it becomes inert (zeros, never consumed)
            iso = batch.isolated.unsqueeze(-1)
            carry = h if h.shape[-1] == h_new.shape[-1] else torch.zeros_like(h_new)
            h_new = torch.where(iso, carry, h_new)
        return h_new

    def edge_update(self, layer: int, batch: GraphBatch, h: torch.Tensor,
                    he: torch.Tensor) -> torch.Tensor:
        mlp = self.edge_mlps[layer - 1]
        inp = torch.cat([h[batch.edge_pat_node], h[batch.edge_mod_node], he], dim=-1)
        return self._act(mlp(inp))


def readout(h_nodes_c: torch.Tensor, h_nodes_b: Optional[torch.Tensor],
            num_patients: int) -> PatientRepresentations:
    """Stack patient-node rows only; modality nodes never enter H_c / H_b."""
    h_c = h_nodes_c[:num_patients]
    if h_nodes_b is None:
        return PatientRepresentations(h_c=h_c, h_b=None, e_concat=h_c)
    h_b = h_nodes_b[:num_patients]
    return PatientRepresentations(h_c=h_c, h_b=h_b, e_concat=torch.cat([h_c, h_b], dim=-1))


@dataclass
class ForwardResult:
    reps: PatientRepresentations
    gate: Optional[GateWeights]


class DualStreamNet(nn.Module):
    """Two gated streams plus the two classifier heads on E_concat."""

    def __init__(self, cfg: ModelConfig, gen: Optional[torch.Generator] = None,
                 dtype: torch.dtype = torch.float64):
        super().__init__()
        cfg.validate()
        self.cfg = cfg
        self.dtype = dtype
        self.encoder_bank = ModalityEncoderBank(
            cfg.modality_dims, cfg.edge_dim, cfg.activation, dtype
        )
        self.gate_mlp = GateMLP(
            cfg.num_modalities, cfg.edge_dim, cfg.activation, cfg.gate_clamp, dtype
        )
        self.stream_c = StreamBank(cfg, dtype)
        self.stream_b = StreamBank(cfg, dtype)
        self.head_c = nn.Linear(2 * cfg.hidden_dim, cfg.num_classes, dtype=dtype)
        self.head_b = nn.Linear(2 * cfg.hidden_dim, cfg.num_classes, dtype=dtype)
        if gen is not None:
            init_module_(self, gen)
            # each head starts reading its own stream only; the opposite-half
            # weights stay learnable but have to earn their way in, which keeps
            # a head from free-riding on the other stream's features
            with torch.no_grad():
                self.head_c.weight[:, cfg.hidden_dim:] = 0.0
                self.head_b.weight[:, : cfg.hidden_dim] = 0.0

    def gate(self, h_u0: torch.Tensor, h_v0: torch.Tensor) -> GateWeights:
        return self.gate_mlp(h_u0, h_v0)

    def gate_weights(self, batch: GraphBatch) -> GateWeights:
        h0 = batch.node_init
        return self.gate(h0[batch.edge_pat_node], h0[batch.edge_mod_node])

    def forward(self, batch: GraphBatch,
                gate_override: Optional[GateWeights] = None) -> ForwardResult:
        gw = gate_override if gate_override is not None else self.gate_weights(batch)
        e0 = self.encoder_bank.encode(batch.graph, batch.ds.features, self.dtype)
        h_c = h_b = batch.node_init
        he_c = he_b = e0
        for layer in range(1, self.cfg.num_layers + 1):
            new_c = self.stream_c.node_update(layer, batch, h_c, he_c, gw.tau)
            new_b = self.stream_b.node_update(layer, batch, h_b, he_b, gw.omega)
            if layer < self.cfg.num_layers:
                he_c = self.stream_c.edge_update(layer, batch, new_c, he_c)
                he_b = self.stream_b.edge_update(layer, batch, new_b, he_b)
            h_c, h_b = new_c, new_b
        return ForwardResult(reps=readout(h_c, h_b, batch.num_patients), gate=gw)


class SingleStreamNet(nn.Module):
    """Ungated one-stream ablation: identical propagation with unit edge
    weights and a single parameter bank; the classifier sees H alone."""

    def __init__(self, cfg: ModelConfig, gen: Optional[torch.Generator] = None,
                 dtype: torch.dtype = torch.float64):
        super().__init__()
        cfg.validate()
        self.cfg = cfg
        self.dtype = dtype
        self.encoder_bank = ModalityEncoderBank(
            cfg.modality_dims, cfg.edge_dim, cfg.activation, dtype
        )
        self.stream = StreamBank(cfg, dtype)
        self.head_c = nn.Linear(cfg.hidden_dim, cfg.num_classes, dtype=dtype)
        if gen is not None:
            init_module_(self, gen)

    def forward(self, batch: GraphBatch) -> ForwardResult:
        e0 = self.encoder_bank.encode(batch.graph, batch.ds.features, self.dtype)
        h = batch.node_init
        he = e0
        for layer in range(1, self.cfg.num_layers + 1):
            h_new = self.stream.node_update(layer, batch, h, he, None)
            if layer < self.cfg.num_layers:
                he = self.stream.edge_update(layer, batch, h_new, he)
            h = h_new
        return ForwardResult(reps=readout(h, None, batch.num_patients), gate=None)
