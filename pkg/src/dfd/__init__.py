"""Dual-stream feature decorrelation over bipartite patient-modality graphs.

Submodules: synthdata (bias-injected data generator), graph (bipartite graph
and modality encoders), model (gated dual-stream message passing), losses
(CE / GCE disentanglement objective), mi (Donsker-Varadhan estimator),
training (two-stage trainer), metrics (evaluation and probes), experiments
(ablation grid), cli (command line).
"""

__version__ = "0.1.0"
