"""Bipartite patient-modality graph and modality-specific edge encoders.

Patients and modalities are the two node sets. An edge (i, j) exists iff
modality j is observed for patient i; its feature is the encoded raw feature
vector of that pair. Modality nodes start as one-hot vectors, patient nodes
as a constant ones vector of the same length.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import torch
import torch.nn as nn

from .synthdata import MultimodalDataset

ACTIVATIONS = {
    "softplus": torch.nn.functional.softplus,
    "tanh": torch.tanh,
    "identity": lambda x: x,
}


class GraphError(ValueError):
    pass


def resolve_activation(name: str):
    try:
        return ACTIVATIONS[name]
    except KeyError:
        raise GraphError(f"unknown activation {name!r}, expected one of {sorted(ACTIVATIONS)}")


@dataclass
class BipartiteGraph:
    """Topology plus node inits; edge features are attached by encode_edges."""

    num_patients: int
    num_modalities: int
    edge_patient: np.ndarray  # (E,) patient index per edge
    edge_modality: np.ndarray  # (E,) modality index per edge
    patient_node_init: np.ndarray  # (N, M) constant ones
    modality_node_init: np.ndarray  # (M, M) identity rows
    edge_features: Optional[torch.Tensor] = None  # (E, d_e) once encoded
    _edge_lookup: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self._edge_lookup:
            self._edge_lookup = {
                (int(i), int(j)): e
                for e, (i, j) in enumerate(zip(self.edge_patient, self.edge_modality))
            }

    @property
    def num_edges(self) -> int:
        return int(self.edge_patient.shape[0])

    def has_edge(self, patient: int, modality: int) -> bool:
        return (patient, modality) in self._edge_lookup

    def edge_feature(self, patient: int, modality: int) -> torch.Tensor:
        """Feature of an existing edge; asking for a masked pair is an error."""
        if self.edge_features is None:
            raise GraphError("edge features not encoded yet; call encode_edges first")
        key = (patient, modality)
        if key not in self._edge_lookup:
            raise GraphError(f"no edge between patient {patient} and modality {modality}")
        return self.edge_features[self._edge_lookup[key]]

    def patient_degrees(self) -> np.ndarray:
        return np.bincount(self.edge_patient, minlength=self.num_patients)

    def modality_degrees(self) -> np.ndarray:
        return np.bincount(self.edge_modality, minlength=self.num_modalities)


def build_graph(ds: MultimodalDataset) -> BipartiteGraph:
    """Topology-only graph from the observation mask (edges in row-major order)."""
    ds.validate()
    rows, cols = np.nonzero(ds.mask)
    n, m = ds.mask.shape
    return BipartiteGraph(
        num_patients=n,
        num_modalities=m,
        edge_patient=rows.astype(np.int64),
        edge_modality=cols.astype(np.int64),
        patient_node_init=np.ones((n, m)),
        modality_node_init=np.eye(m),
    )


class ModalityEncoder(nn.Module):
    """Affine map d_j -> d_e followed by an elementwise nonlinearity."""

    def __init__(self, in_dim: int, out_dim: int, activation: str = "softplus",
                 dtype: torch.dtype = torch.float64):
        super().__init__()
        self.linear = nn.Linear(in_dim, out_dim, dtype=dtype)
        self.activation = activation
        self._act = resolve_activation(activation)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[-1] != self.linear.in_features:
            raise GraphError(
                f"encoder expects inputs of dim {self.linear.in_features}, got {x.shape[-1]}"
            )
        return self._act(self.linear(x))


class ModalityEncoderBank(nn.Module):
    """One encoder per modality; encoder j only ever sees modality-j features."""

    def __init__(self, modality_dims, edge_dim: int, activation: str = "softplus",
                 dtype: torch.dtype = torch.float64):
        super().__init__()
        self.edge_dim = edge_dim
        self.encoders = nn.ModuleList(
            ModalityEncoder(d, edge_dim, activation, dtype) for d in modality_dims
        )

    def __len__(self) -> int:
        return len(self.encoders)

    def encode(self, graph: BipartiteGraph, features, dtype: torch.dtype) -> torch.Tensor:
        """Edge feature matrix (E, d_e) in the graph's edge order."""
        out = torch.empty((graph.num_edges, self.edge_dim), dtype=dtype)
        edge_mod = graph.edge_modality
        for j, enc in enumerate(self.encoders):
            sel = np.flatnonzero(edge_mod == j)
            if sel.size == 0:
                continue
            x = torch.as_tensor(features[j][graph.edge_patient[sel]], dtype=dtype)
            out[torch.from_numpy(sel)] = enc(x)
        return out


def encode_edges(bank: ModalityEncoderBank, graph: BipartiteGraph,
                 ds: MultimodalDataset, dtype: torch.dtype = torch.float64) -> BipartiteGraph:
    """Populate graph.edge_features with Encoder_j(x_j^(i)) per present edge."""
    if len(bank) != graph.num_modalities:
        raise GraphError(
            f"bank has {len(bank)} encoders, graph has {graph.num_modalities} modalities"
        )
    for j, enc in enumerate(bank.encoders):
        if enc.linear.in_features != ds.modality_dims[j]:
            raise GraphError(
                f"encoder {j} expects dim {enc.linear.in_features}, "
                f"dataset modality {j} has dim {ds.modality_dims[j]}"
            )
    graph.edge_features = bank.encode(graph, ds.features, dtype)
    return graph
