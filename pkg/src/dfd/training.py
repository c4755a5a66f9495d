"""Two-stage training: the disentanglement loss alone first, then the full
objective with alternating statistics-network ascent. Artifacts (checkpoint,
loss log, metrics report) are written atomically and are byte-reproducible
for a fixed seed and config.
"""

from __future__ import annotations

import dataclasses
import json
import os
import shutil
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import torch

from . import losses, metrics
from .mi import (SingleClassBatchError, StatsNet, dv_bound,
                 mi_adversarial_step, sample_negatives,
                 sample_negatives_shuffle)
from .model import (DualStreamNet, GraphBatch, ModelConfig, SingleStreamNet,
                    init_module_)
from .seeding import numpy_rng, torch_generator
from .synthdata import MultimodalDataset, read_split

METRICS_SCHEMA = "dfd/1"
CHECKPOINT_SCHEMA = "dfd-checkpoint/1"
LOSS_LOG_COLUMNS = (
    "epoch", "stage", "L_ce", "L_gce", "L_MI", "L_Total", "mi_skips", "val_auc_roc"
)

OPTIMIZERS = ("adam",)
PRECISIONS = {"float64": torch.float64, "float32": torch.float32}
NEGATIVE_MODES = ("different_label", "shuffle")


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    epochs_total: int = 100
    epochs_stage1: int = 15
    batch_size: int = 128
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    gce_g: float = 0.7
    mi_negatives: int = 10
    mi_inner_steps: int = 1
    mi_warmup_steps: int = 200  # statistics-net ascent at stage-2 entry
    mi_ramp_epochs: int = 0  # optional fade-in of the MI term (0 = full strength)
    mi_buffer_batches: int = 16  # replay depth for statistics-net ascent
    mi_ascent_batch: int = 256  # rows per statistics-net ascent step
    mi_refresh_epochs: int = 0  # re-init + re-warm the statistics net every R stage-2 epochs
    stats_learning_rate: Optional[float] = None  # defaults to learning_rate
    num_layers: int = 3
    edge_dim: int = 64
    hidden_dim: int = 64
    stats_hidden_dim: int = 128
    activation: str = "softplus"
    message_includes_neighbor: bool = False
    routing: str = "stop_grad"
    disable_gce: bool = False
    disable_mi: bool = False
    single_stream: bool = False
    mi_negative_mode: str = "different_label"
    precision: str = "float64"
    seed: int = 0
    batch_seed: Optional[int] = None  # defaults to seed; only reorders batches
    data_dir: str = ""
    out_dir: str = ""

    def validate(self) -> None:
        if self.epochs_total < 1 or self.epochs_stage1 < 0:
            raise ValueError("epoch counts must be positive")
        if self.epochs_stage1 > self.epochs_total:
            raise ValueError("epochs_stage1 must not exceed epochs_total")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")
        if not (0.0 < self.gce_g <= 1.0):
            raise ValueError("gce_g must lie in (0, 1]")
        if self.mi_negatives < 1 or self.mi_inner_steps < 1:
            raise ValueError("mi_negatives and mi_inner_steps must be >= 1")
        if self.mi_warmup_steps < 0 or self.mi_ramp_epochs < 0:
            raise ValueError("mi_warmup_steps and mi_ramp_epochs must be non-negative")
        if self.mi_buffer_batches < 1 or self.mi_ascent_batch < 2:
            raise ValueError("mi_buffer_batches must be >= 1 and mi_ascent_batch >= 2")
        if self.mi_refresh_epochs < 0:
            raise ValueError("mi_refresh_epochs must be non-negative")
        if min(self.num_layers, self.edge_dim, self.hidden_dim, self.stats_hidden_dim) < 1:
            raise ValueError("layer count and dims must be >= 1")
        if self.routing not in losses.ROUTING_MODES:
            raise ValueError(f"routing must be one of {losses.ROUTING_MODES}")
        if self.mi_negative_mode not in NEGATIVE_MODES:
            raise ValueError(f"mi_negative_mode must be one of {NEGATIVE_MODES}")
        if self.precision not in PRECISIONS:
            raise ValueError(f"precision must be one of {tuple(PRECISIONS)}")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    @property
    def dtype(self) -> torch.dtype:
        return PRECISIONS[self.precision]

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def model_config(self, ds: MultimodalDataset) -> ModelConfig:
        return ModelConfig(
            num_modalities=ds.num_modalities,
            modality_dims=ds.modality_dims,
            num_classes=ds.num_classes,
            edge_dim=self.edge_dim,
            hidden_dim=self.hidden_dim,
            num_layers=self.num_layers,
            activation=self.activation,
            message_includes_neighbor=self.message_includes_neighbor,
        )


@dataclass
class RunArtifacts:
    checkpoint_path: str
    loss_log_path: str
    metrics_path: str
    run_info_path: str
    config: TrainConfig
    best_epoch: int
    best_val_score: float
    wall_clock_sec: float


def total_loss(l_d, l_mi, stage: int, disable_mi: bool = False):
    """Stage 1 trains on L_d alone; stage 2 on L_d + L_MI (Table-style
    ablation drops the MI term)."""
    if stage not in (1, 2):
        raise ValueError(f"stage must be 1 or 2, got {stage}")
    if stage == 1 or disable_mi:
        return l_d
    return l_d + l_mi


# ---------------------------------------------------------------------------
# Deterministic serialization helpers
# ---------------------------------------------------------------------------

def _round_floats(obj):
    if isinstance(obj, float):
        return float(f"{obj:.10g}")
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


def canonical_json(obj) -> str:
    """Sorted keys, floats fixed at 10 significant digits: byte-reproducible."""
    return json.dumps(_round_floats(obj), sort_keys=True, indent=2) + "\n"


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _param_layer(name: str) -> Optional[int]:
    for part in name.split("."):
        if part.isdigit():
            return int(part)
    return None


def save_checkpoint(path, state_dict: dict, cfg: TrainConfig, model_cfg: ModelConfig,
                    model_kind: str) -> None:
    """Manifest (names, shapes, layer indices, config echo, data dims) plus
    flat float64 arrays per parameter tensor; built in a temp dir, renamed."""
    final = Path(path)
    tmp = Path(str(final) + ".tmp")
    try:
        if tmp.exists():
            shutil.rmtree(tmp)
        tmp.mkdir(parents=True)
        manifest = {
            "schema": CHECKPOINT_SCHEMA,
            "model_kind": model_kind,
            "config": cfg.to_dict(),
            "data_dims": {
                "num_modalities": model_cfg.num_modalities,
                "modality_dims": list(model_cfg.modality_dims),
                "num_classes": model_cfg.num_classes,
            },
            "params": [
                {"name": name, "shape": list(t.shape), "layer": _param_layer(name)}
                for name, t in state_dict.items()
            ],
        }
        (tmp / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        arrays = {name: t.detach().cpu().numpy().astype(np.float64).ravel()
                  for name, t in state_dict.items()}
        np.savez(tmp / "params.npz", **arrays)
        if final.exists():
            shutil.rmtree(final)
        os.replace(tmp, final)
    except OSError as e:
        raise TrainingError(f"failed writing checkpoint at {final}: {e}") from e


def load_checkpoint(path):
    """Rebuild the network from a checkpoint directory.

    Shapes are validated against the configuration before any parameter is
    copied. Returns (net, TrainConfig, model_kind).
    """
    root = Path(path)
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise FileNotFoundError(f"missing checkpoint manifest: {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("schema") != CHECKPOINT_SCHEMA:
        raise TrainingError(f"unsupported checkpoint schema {manifest.get('schema')!r}")
    cfg = TrainConfig.from_dict(manifest["config"])
    model_kind = manifest["model_kind"]

    with np.load(root / "params.npz") as blob:
        arrays = {k: blob[k] for k in blob.files}

    dims = manifest["data_dims"]
    model_cfg = ModelConfig(
        num_modalities=int(dims["num_modalities"]),
        modality_dims=tuple(int(d) for d in dims["modality_dims"]),
        num_classes=int(dims["num_classes"]),
        edge_dim=cfg.edge_dim,
        hidden_dim=cfg.hidden_dim,
        num_layers=cfg.num_layers,
        activation=cfg.activation,
        message_includes_neighbor=cfg.message_includes_neighbor,
    )
    net_cls = SingleStreamNet if model_kind == "single_stream" else DualStreamNet
    net = net_cls(model_cfg, gen=None, dtype=cfg.dtype)

    state = net.state_dict()
    manifest_names = [p["name"] for p in manifest["params"]]
    if set(manifest_names) != set(state.keys()):
        missing = set(state.keys()) - set(manifest_names)
        extra = set(manifest_names) - set(state.keys())
        raise TrainingError(
            f"checkpoint/config parameter mismatch (missing {sorted(missing)}, "
            f"unexpected {sorted(extra)})"
        )
    for entry in manifest["params"]:
        name, shape = entry["name"], tuple(entry["shape"])
        if tuple(state[name].shape) != shape:
            raise TrainingError(
                f"shape mismatch for {name}: checkpoint {shape}, config {tuple(state[name].shape)}"
            )
        state[name] = torch.from_numpy(arrays[name].reshape(shape)).to(cfg.dtype)
    net.load_state_dict(state)
    return net, cfg, model_kind


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------

def _chunks(perm: np.ndarray, size: int):
    for start in range(0, perm.size, size):
        yield perm[start : start + size]


class Trainer:
    """Owns the model, optimizers and RNG streams for one training run."""

    def __init__(self, cfg: TrainConfig, data_dir=None):
        cfg.validate()
        torch.use_deterministic_algorithms(True)
        if data_dir is not None:
            cfg = dataclasses.replace(cfg, data_dir=str(data_dir))
        self.cfg = cfg
        data_dir = Path(cfg.data_dir)
        self.train_ds = read_split(data_dir, "train")
        self.val_ds = read_split(data_dir, "val")
        self.model_cfg = cfg.model_config(self.train_ds)
        self.model_kind = "single_stream" if cfg.single_stream else "dual_stream"

        net_cls = SingleStreamNet if cfg.single_stream else DualStreamNet
        self.net = net_cls(self.model_cfg, gen=torch_generator(cfg.seed, "params"),
                           dtype=cfg.dtype)
        self.opt = torch.optim.Adam(self.net.parameters(), lr=cfg.learning_rate)
        self.stats_net: Optional[StatsNet] = None
        self.stats_opt: Optional[torch.optim.Optimizer] = None

        batch_seed = cfg.seed if cfg.batch_seed is None else cfg.batch_seed
        self.rng_batch = numpy_rng(batch_seed, "batching")
        self.rng_neg = numpy_rng(cfg.seed, "negatives")
        self.rng_buffer = numpy_rng(cfg.seed, "statsnet-buffer")
        self.val_batch = GraphBatch(self.val_ds, dtype=cfg.dtype)
        self._mi_buffer: list = []  # recent detached (h_c, h_b, labels)

        self.log_rows: list = []
        self.mi_skips_total = 0
        self.best_epoch = 0
        self.best_val_score = -np.inf
        self.best_state: Optional[dict] = None

    # -- stage-2 entry: the statistics net has no gradient signal earlier --
    def _ensure_stats_net(self) -> None:
        if self.stats_net is None:
            self._init_stats_net("entry")

    def _init_stats_net(self, tag: str) -> None:
        self.stats_net = StatsNet(self.cfg.hidden_dim,
                                  hidden_dim=self.cfg.stats_hidden_dim,
                                  activation=self.cfg.activation,
                                  dtype=self.cfg.dtype)
        init_module_(self.stats_net,
                     torch_generator(self.cfg.seed, f"statsnet-init/{tag}"))
        stats_lr = (self.cfg.learning_rate if self.cfg.stats_learning_rate is None
                    else self.cfg.stats_learning_rate)
        self.stats_opt = torch.optim.Adam(self.stats_net.parameters(), lr=stats_lr)
        model_params = {id(p) for p in self.net.parameters()}
        stats_params = {id(p) for p in self.stats_net.parameters()}
        assert not (model_params & stats_params), "stats net must not share parameters"
        self._warmup_stats_net(tag)

    def _maybe_refresh_stats_net(self, epoch: int) -> None:
        """A fresh statistics net periodically re-audits the representations;
        a single persistent net gets outrun by the adversarially drifting
        model and its bound goes silent while dependence remains."""
        cfg = self.cfg
        if cfg.mi_refresh_epochs == 0 or self.stats_net is None:
            return
        t = epoch - cfg.epochs_stage1  # stage-2 epoch index, 1-based
        if t > 1 and (t - 1) % cfg.mi_refresh_epochs == 0:
            self._init_stats_net(f"refresh-{epoch}")

    def _warmup_stats_net(self, tag: str) -> None:
        """Pre-train the statistics net on the current (frozen) representations
        so the bound is informative before the model starts minimizing it;
        an untrained net lets the model game the bound instead of
        decorrelating."""
        cfg = self.cfg
        if cfg.mi_warmup_steps == 0:
            return
        with torch.no_grad():
            reps = self.net(GraphBatch(self.train_ds, dtype=cfg.dtype)).reps
        h_c, h_b = reps.h_c, reps.h_b
        labels = self.train_ds.labels
        rng = numpy_rng(cfg.seed, f"statsnet-warmup/{tag}")
        n = h_c.shape[0]
        size = min(256, n)
        for _ in range(cfg.mi_warmup_steps):
            idx = rng.choice(n, size=size, replace=False)
            try:
                if cfg.mi_negative_mode == "shuffle":
                    neg = sample_negatives_shuffle(size, cfg.mi_negatives, rng)
                else:
                    neg = sample_negatives(labels[idx], cfg.mi_negatives, rng)
            except SingleClassBatchError:
                continue
            self.stats_opt.zero_grad()
            loss = -dv_bound(self.stats_net, h_c[idx], h_b[idx], neg)
            loss.backward()
            self.stats_opt.step()

    def stage_of(self, epoch: int) -> int:
        return 1 if epoch <= self.cfg.epochs_stage1 else 2

    def _mi_negatives(self, labels: np.ndarray,
                      rng: Optional[np.random.Generator] = None) -> np.ndarray:
        rng = self.rng_neg if rng is None else rng
        if self.cfg.mi_negative_mode == "shuffle":
            return sample_negatives_shuffle(labels.shape[0], self.cfg.mi_negatives, rng)
        return sample_negatives(labels, self.cfg.mi_negatives, rng)

    def _push_mi_buffer(self, h_c: torch.Tensor, h_b: torch.Tensor,
                        labels: np.ndarray) -> None:
        self._mi_buffer.append((h_c.detach(), h_b.detach(), labels))
        if len(self._mi_buffer) > self.cfg.mi_buffer_batches:
            self._mi_buffer.pop(0)

    def _ascent_batches(self) -> Optional[list]:
        """Minibatches of replayed representations for statistics-net ascent."""
        cfg = self.cfg
        h_c = torch.cat([b[0] for b in self._mi_buffer])
        h_b = torch.cat([b[1] for b in self._mi_buffer])
        labels = np.concatenate([b[2] for b in self._mi_buffer])
        n = h_c.shape[0]
        size = min(cfg.mi_ascent_batch, n)
        out = []
        for _ in range(cfg.mi_inner_steps):
            idx = self.rng_buffer.choice(n, size=size, replace=False)
            try:
                neg = self._mi_negatives(labels[idx], rng=self.rng_buffer)
            except SingleClassBatchError:
                continue
            out.append((h_c[idx], h_b[idx], neg))
        return out or None

    def _mi_ramp(self, epoch: int) -> float:
        """Fade the MI term in over the first stage-2 epochs; switching the
        adversarial term on at full strength visibly shocks the classifier."""
        if self.cfg.mi_ramp_epochs == 0:
            return 1.0
        t = epoch - self.cfg.epochs_stage1
        return min(1.0, t / (self.cfg.mi_ramp_epochs + 1.0))

    def _train_batch(self, batch: GraphBatch, stage: int, epoch: int, b_idx: int) -> dict:
        cfg = self.cfg
        out = self.net(batch)
        reps = out.reps
        if cfg.single_stream:
            l_ce = losses.cross_entropy(self.net.head_c(reps.e_concat), batch.labels)
            l_d = l_ce
            l_gce = torch.zeros((), dtype=cfg.dtype)
        else:
            l_d, parts = losses.disentangle_loss(
                reps, batch.labels, self.net.head_c, self.net.head_b,
                cfg.gce_g, cfg.routing, cfg.disable_gce,
            )
            l_ce, l_gce = parts["l_ce"], parts["l_gce"]

        l_mi = torch.zeros((), dtype=cfg.dtype)
        mi_skipped = 0
        if stage == 2 and not cfg.disable_mi and not cfg.single_stream:
            self._ensure_stats_net()
            try:
                neg = self._mi_negatives(batch.ds.labels)
                self._push_mi_buffer(reps.h_c, reps.h_b, batch.ds.labels)
                bound = mi_adversarial_step(self.stats_net, self.stats_opt,
                                            reps.h_c, reps.h_b, neg,
                                            cfg.mi_inner_steps,
                                            ascent_batches=self._ascent_batches())
                # the DV supremum is non-negative; a negative bound only means
                # the statistics net lags, so the model minimizes the
                # non-negative part rather than chasing an artifact
                l_mi = self._mi_ramp(epoch) * bound.clamp(min=0.0)
            except SingleClassBatchError:
                mi_skipped = 1

        l_total = total_loss(l_d, l_mi, stage, cfg.disable_mi)
        if not bool(torch.isfinite(l_total)):
            raise TrainingError(
                f"non-finite loss at epoch {epoch}, batch {b_idx}: "
                f"L_ce={l_ce.item()}, L_gce={l_gce.item()}, L_MI={l_mi.item()}"
            )
        self.opt.zero_grad()
        l_total.backward()
        self.opt.step()
        return {
            "L_ce": l_ce.item(),
            "L_gce": l_gce.item(),
            "L_MI": l_mi.item(),
            "L_Total": l_total.item(),
            "mi_skips": mi_skipped,
        }

    def validation_score(self) -> float:
        """AUC-ROC on the validation split (accuracy when not binary)."""
        with torch.no_grad():
            reps = self.net(self.val_batch).reps
            preds, probs = losses.predict(reps.e_concat, self.net.head_c)
        if self.val_ds.num_classes == 2:
            return metrics.auc_roc(metrics.prediction_scores(probs), self.val_ds.labels)
        return metrics.accuracy(preds, self.val_ds.labels)

    def run_epoch(self, epoch: int) -> dict:
        stage = self.stage_of(epoch)
        if stage == 2:
            self._maybe_refresh_stats_net(epoch)
        perm = self.rng_batch.permutation(self.train_ds.num_patients)
        sums = {"L_ce": 0.0, "L_gce": 0.0, "L_MI": 0.0, "L_Total": 0.0}
        skips = 0
        n_batches = 0
        for b_idx, chunk in enumerate(_chunks(perm, self.cfg.batch_size)):
            batch = GraphBatch.from_indices(self.train_ds, chunk, dtype=self.cfg.dtype)
            stats = self._train_batch(batch, stage, epoch, b_idx)
            for key in sums:
                sums[key] += stats[key]
            skips += stats["mi_skips"]
            n_batches += 1
        self.mi_skips_total += skips
        val_score = self.validation_score()
        row = {
            "epoch": epoch,
            "stage": stage,
            **{k: sums[k] / n_batches for k in sums},
            "mi_skips": skips,
            "val_auc_roc": val_score,
        }
        self.log_rows.append(row)
        if val_score > self.best_val_score:
            self.best_val_score = val_score
            self.best_epoch = epoch
            self.best_state = {k: v.detach().clone()
                               for k, v in self.net.state_dict().items()}
        return row

    def run(self, epoch_callback: Optional[Callable] = None) -> RunArtifacts:
        cfg = self.cfg
        if not cfg.out_dir:
            raise TrainingError("cfg.out_dir must be set")
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        t0 = time.perf_counter()
        for epoch in range(1, cfg.epochs_total + 1):
            row = self.run_epoch(epoch)
            if epoch_callback is not None:
                epoch_callback(self, epoch, row)
        wall = time.perf_counter() - t0

        ckpt_path = out / "checkpoint_best"
        save_checkpoint(ckpt_path, self.best_state, cfg, self.model_cfg, self.model_kind)
        log_path = out / "loss_log.csv"
        atomic_write_text(log_path, render_loss_log(self.log_rows))

        report = build_metrics_report(ckpt_path, Path(cfg.data_dir))
        metrics_path = out / "metrics.json"
        atomic_write_text(metrics_path, canonical_json(report))

        info = {
            "best_epoch": self.best_epoch,
            "best_val_score": self.best_val_score,
            "mi_skips_total": self.mi_skips_total,
            "wall_clock_sec": wall,
        }
        info_path = out / "run_info.json"
        atomic_write_text(info_path, json.dumps(info, indent=2, sort_keys=True) + "\n")
        return RunArtifacts(
            checkpoint_path=str(ckpt_path),
            loss_log_path=str(log_path),
            metrics_path=str(metrics_path),
            run_info_path=str(info_path),
            config=cfg,
            best_epoch=self.best_epoch,
            best_val_score=self.best_val_score,
            wall_clock_sec=wall,
        )


def render_loss_log(rows) -> str:
    lines = [",".join(LOSS_LOG_COLUMNS)]
    for row in rows:
        cells = []
        for col in LOSS_LOG_COLUMNS:
            v = row[col]
            cells.append(format(v, ".17g") if isinstance(v, float) else str(v))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def train(cfg: TrainConfig, data_dir=None, epoch_callback=None) -> RunArtifacts:
    if data_dir is not None:
        cfg = dataclasses.replace(cfg, data_dir=str(data_dir))
    return Trainer(cfg).run(epoch_callback=epoch_callback)


# ---------------------------------------------------------------------------
# Evaluation of saved checkpoints
# ---------------------------------------------------------------------------

def evaluate_checkpoint(checkpoint_path, data_dir, split: str):
    """Forward the stored model over one split.

    Returns (report dict, embeddings dict with h_c / h_b arrays or None).
    """
    net, cfg, model_kind = load_checkpoint(checkpoint_path)
    ds = read_split(Path(data_dir), split)
    batch = GraphBatch(ds, dtype=cfg.dtype)
    with torch.no_grad():
        reps = net(batch).reps
        preds, probs = losses.predict(reps.e_concat, net.head_c)
    report = metrics.split_metrics(probs, ds.labels, ds.num_classes)
    h_c = reps.h_c.numpy()
    h_b = None if reps.h_b is None else reps.h_b.numpy()
    if ds.bias_attr is not None:
        report["probe_acc_Hc"] = metrics.bias_probe(h_c, ds.bias_attr, cfg.seed)
        report["probe_acc_Hb"] = (
            None if h_b is None else metrics.bias_probe(h_b, ds.bias_attr, cfg.seed)
        )
    else:
        report["probe_acc_Hc"] = None
        report["probe_acc_Hb"] = None
    report["split"] = split
    report["model_kind"] = model_kind
    return report, {"h_c": h_c, "h_b": h_b}


def build_metrics_report(checkpoint_path, data_dir) -> dict:
    """Full metrics record over all three splits (probes on test only)."""
    _, cfg, model_kind = load_checkpoint(checkpoint_path)
    splits = {}
    probe = None
    for split in ("train", "val", "test"):
        report, _ = evaluate_checkpoint(checkpoint_path, data_dir, split)
        if split == "test":
            probe = {
                "split": "test",
                "probe_acc_Hc": report["probe_acc_Hc"],
                "probe_acc_Hb": report["probe_acc_Hb"],
            }
        splits[split] = {
            "auc_roc": report["auc_roc"],
            "auc_prc": report["auc_prc"],
            "accuracy": report["accuracy"],
            "per_class_counts": report["per_class_counts"],
        }
    return {
        "schema_version": METRICS_SCHEMA,
        "seed": cfg.seed,
        "model_kind": model_kind,
        "config": cfg.to_dict(),
        "splits": splits,
        "probe": probe,
    }

