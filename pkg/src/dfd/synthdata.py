"""Synthetic multimodal datasets with a planted causal latent and a planted
bias latent that is spuriously aligned with the label at a controllable rate.

Each patient has a label y, a causal latent c ~ N(mu_y, I) and a bias
attribute a that equals y with probability rho (otherwise uniform over the
other classes), driving a bias latent b ~ N(nu_a, I). Modality features are
random linear mixes of (c, w_j * b) plus Gaussian noise, and a Bernoulli
observation mask decides which patient-modality pairs exist. Because the
latents are constructed, downstream debiasing claims can be checked against
ground truth instead of guessed.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .seeding import numpy_rng

# Class means for the two latents: orthonormal directions scaled by a fixed
# separation. The bias separation is deliberately larger than the causal one
# so the shortcut is the easier signal to fit.
CAUSAL_SEPARATION = 2.0
BIAS_SEPARATION = 3.0

SPLITS = ("train", "val", "test")


class DatasetError(ValueError):
    """Raised for invalid dataset specs, malformed files, or broken invariants."""


@dataclass
class SyntheticSpec:
    """Configuration of the synthetic generator.

    Defaults are the stock configuration used by the acceptance experiments:
    strong train-time alignment between bias attribute and label (0.95) that
    collapses to chance (0.5) at test time.
    """

    num_train: int = 4000
    num_val: int = 1000
    num_test: int = 2000
    num_modalities: int = 4
    modality_dims: tuple = (16, 16, 16, 16)
    num_classes: int = 2
    causal_dim: int = 8
    bias_dim: int = 8
    bias_align_train: float = 0.95
    bias_align_test: float = 0.5
    bias_weight_per_modality: tuple = (1.0, 1.0, 1.0, 1.0)
    observe_prob: float = 0.7
    noise_std: float = 0.5
    seed: int = 0

    def __post_init__(self):
        self.modality_dims = tuple(int(d) for d in self.modality_dims)
        self.bias_weight_per_modality = tuple(float(w) for w in self.bias_weight_per_modality)
        self.validate()

    def validate(self) -> None:
        if self.num_classes < 2:
            raise DatasetError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.num_modalities < 1:
            raise DatasetError("num_modalities must be >= 1")
        if len(self.modality_dims) != self.num_modalities:
            raise DatasetError(
                f"modality_dims has {len(self.modality_dims)} entries, "
                f"expected {self.num_modalities}"
            )
        if any(d < 1 for d in self.modality_dims):
            raise DatasetError(f"all modality dims must be >= 1, got {self.modality_dims}")
        if len(self.bias_weight_per_modality) != self.num_modalities:
            raise DatasetError(
                f"bias_weight_per_modality has {len(self.bias_weight_per_modality)} entries, "
                f"expected {self.num_modalities}"
            )
        if any(not (0.0 <= w <= 1.0) for w in self.bias_weight_per_modality):
            raise DatasetError("bias weights must lie in [0, 1]")
        for name in ("bias_align_train", "bias_align_test"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise DatasetError(f"{name} must lie in [0, 1], got {v}")
        if not (0.0 < self.observe_prob <= 1.0):
            raise DatasetError(f"observe_prob must lie in (0, 1], got {self.observe_prob}")
        if self.noise_std < 0.0:
            raise DatasetError(f"noise_std must be non-negative, got {self.noise_std}")
        if self.causal_dim < self.num_classes:
            raise DatasetError("causal_dim must be >= num_classes (one mean direction per class)")
        if self.bias_dim < self.num_classes:
            raise DatasetError("bias_dim must be >= num_classes (one mean direction per class)")
        if min(self.num_train, self.num_val, self.num_test) < 0:
            raise DatasetError("split sizes must be non-negative")
        if self.seed < 0:
            raise DatasetError(f"seed must be non-negative, got {self.seed}")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["modality_dims"] = list(self.modality_dims)
        d["bias_weight_per_modality"] = list(self.bias_weight_per_modality)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSpec":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise DatasetError(f"unknown spec fields: {sorted(unknown)}")
        return cls(**d)


@dataclass
class MultimodalDataset:
    """Per-patient feature vectors for M modalities plus mask, labels and
    (synthetic data only) the ground-truth bias attribute."""

    features: list  # M arrays of shape (N, d_j), float64
    mask: np.ndarray  # (N, M), {0, 1}
    labels: np.ndarray  # (N,), int
    bias_attr: Optional[np.ndarray]  # (N,) or None
    num_classes: int
    split: str = "train"

    @property
    def num_patients(self) -> int:
        return self.mask.shape[0]

    @property
    def num_modalities(self) -> int:
        return self.mask.shape[1]

    @property
    def modality_dims(self) -> tuple:
        return tuple(f.shape[1] for f in self.features)

    def validate(self) -> None:
        n, m = self.mask.shape
        if len(self.features) != m:
            raise DatasetError(f"{len(self.features)} feature blocks for {m} mask columns")
        for j, f in enumerate(self.features):
            if f.shape[0] != n:
                raise DatasetError(
                    f"features_{j} has {f.shape[0]} rows, mask has {n}"
                )
        if self.labels.shape != (n,):
            raise DatasetError(f"labels shape {self.labels.shape}, expected ({n},)")
        if not np.isin(self.mask, (0, 1)).all():
            raise DatasetError("mask entries must be 0 or 1")
        row_sums = self.mask.sum(axis=1)
        if n and row_sums.min() < 1:
            bad = int(np.argmin(row_sums))
            raise DatasetError(f"patient {bad} has no observed modality")
        if n and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            bad = int(np.argmax((self.labels < 0) | (self.labels >= self.num_classes)))
            raise DatasetError(
                f"label {self.labels[bad]} of patient {bad} outside [0, {self.num_classes})"
            )
        if self.bias_attr is not None:
            if self.bias_attr.shape != (n,):
                raise DatasetError(f"bias_attr shape {self.bias_attr.shape}, expected ({n},)")
            if n and (self.bias_attr.min() < 0 or self.bias_attr.max() >= self.num_classes):
                raise DatasetError("bias_attr values outside class range")

    def take(self, indices: Sequence[int]) -> "MultimodalDataset":
        """Row-subset view (copies) used for mini-batching."""
        idx = np.asarray(indices, dtype=np.int64)
        return MultimodalDataset(
            features=[f[idx] for f in self.features],
            mask=self.mask[idx],
            labels=self.labels[idx],
            bias_attr=None if self.bias_attr is None else self.bias_attr[idx],
            num_classes=self.num_classes,
            split=self.split,
        )


def class_means(num_classes: int, dim: int, separation: float) -> np.ndarray:
    """One scaled standard-basis direction per class: mu_y = separation * e_y."""
    means = np.zeros((num_classes, dim))
    means[np.arange(num_classes), np.arange(num_classes)] = separation
    return means


def mixing_matrices(spec: SyntheticSpec) -> list:
    """Fixed random per-modality mixing maps from latent space to features."""
    rng = numpy_rng(spec.seed, "synthdata/mixing")
    latent_dim = spec.causal_dim + spec.bias_dim
    scale = 1.0 / np.sqrt(latent_dim)
    return [rng.standard_normal((d, latent_dim)) * scale for d in spec.modality_dims]


def _sample_mask(rng: np.random.Generator, n: int, m: int, p_obs: float) -> np.ndarray:
    mask = (rng.random((n, m)) < p_obs).astype(np.int8)
    # all-zero rows are resampled rather than rejected so N stays exact
    for i in np.flatnonzero(mask.sum(axis=1) == 0):
        row = mask[i]
        while row.sum() == 0:
            row = (rng.random(m) < p_obs).astype(np.int8)
        mask[i] = row
    return mask


def _generate_split(spec: SyntheticSpec, split: str, n: int, rho: float,
                    mixers: list) -> MultimodalDataset:
    k = spec.num_classes
    mu = class_means(k, spec.causal_dim, CAUSAL_SEPARATION)
    nu = class_means(k, spec.bias_dim, BIAS_SEPARATION)

    rng_labels = numpy_rng(spec.seed, f"synthdata/{split}/labels")
    rng_attr = numpy_rng(spec.seed, f"synthdata/{split}/bias_attr")
    rng_causal = numpy_rng(spec.seed, f"synthdata/{split}/causal")
    rng_bias = numpy_rng(spec.seed, f"synthdata/{split}/bias")
    rng_noise = numpy_rng(spec.seed, f"synthdata/{split}/noise")
    rng_mask = numpy_rng(spec.seed, f"synthdata/{split}/mask")

    y = rng_labels.integers(0, k, size=n)
    aligned = rng_attr.random(n) < rho
    off = rng_attr.integers(0, k - 1, size=n)  # uniform over the other classes
    a = np.where(aligned, y, (y + 1 + off) % k)

    c = mu[y] + rng_causal.standard_normal((n, spec.causal_dim))
    b = nu[a] + rng_bias.standard_normal((n, spec.bias_dim))

    features = []
    for j, mixer in enumerate(mixers):
        latent = np.concatenate([c, spec.bias_weight_per_modality[j] * b], axis=1)
        x = latent @ mixer.T
        if spec.noise_std > 0:
            x = x + spec.noise_std * rng_noise.standard_normal(x.shape)
        else:
            rng_noise.standard_normal(x.shape)  # keep stream alignment
        features.append(x)

    mask = _sample_mask(rng_mask, n, spec.num_modalities, spec.observe_prob)
    ds = MultimodalDataset(
        features=features,
        mask=mask,
        labels=y.astype(np.int64),
        bias_attr=a.astype(np.int64),
        num_classes=k,
        split=split,
    )
    ds.validate()
    return ds


def generate(spec: SyntheticSpec):
    """Generate (train, val, test) datasets. Deterministic given spec.seed.

    Train and val share the alignment rate bias_align_train; test uses
    bias_align_test, so a shortcut learned on train stops paying off at test.
    """
    spec.validate()
    mixers = mixing_matrices(spec)
    sizes = {"train": spec.num_train, "val": spec.num_val, "test": spec.num_test}
    rhos = {
        "train": spec.bias_align_train,
        "val": spec.bias_align_train,
        "test": spec.bias_align_test,
    }
    return tuple(_generate_split(spec, s, sizes[s], rhos[s], mixers) for s in SPLITS)


# ---------------------------------------------------------------------------
# On-disk format: one directory per split with meta.json, features_<j>.csv,
# mask.csv, labels.csv and (if present) bias_attr.csv. Floats are written
# with 17 significant digits so the round trip is bit-exact.
# ---------------------------------------------------------------------------

_FLOAT_FMT = "%.17g"


def write_dataset(ds: MultimodalDataset, out_dir) -> None:
    if ds.num_patients == 0:
        raise DatasetError("refusing to write an empty dataset (N = 0)")
    ds.validate()
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        meta = {
            "schema": "dfd-dataset/1",
            "split": ds.split,
            "num_patients": int(ds.num_patients),
            "num_modalities": int(ds.num_modalities),
            "modality_dims": [int(d) for d in ds.modality_dims],
            "num_classes": int(ds.num_classes),
            "has_bias_attr": ds.bias_attr is not None,
        }
        (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        for j, f in enumerate(ds.features):
            np.savetxt(out / f"features_{j}.csv", f, fmt=_FLOAT_FMT, delimiter=",")
        np.savetxt(out / "mask.csv", ds.mask, fmt="%d", delimiter=",")
        np.savetxt(out / "labels.csv", ds.labels[:, None], fmt="%d", delimiter=",")
        if ds.bias_attr is not None:
            np.savetxt(out / "bias_attr.csv", ds.bias_attr[:, None], fmt="%d", delimiter=",")
    except OSError as e:
        raise DatasetError(f"failed writing dataset under {out}: {e}") from e


def _load_csv(path: Path, dtype) -> np.ndarray:
    if not path.is_file():
        raise DatasetError(f"missing dataset file: {path}")
    return np.loadtxt(path, delimiter=",", dtype=dtype, ndmin=2)


def read_dataset(in_dir) -> MultimodalDataset:
    """Load one split directory, validating every dataset invariant."""
    src = Path(in_dir)
    meta_path = src / "meta.json"
    if not meta_path.is_file():
        raise DatasetError(f"missing dataset file: {meta_path}")
    meta = json.loads(meta_path.read_text())
    n = int(meta["num_patients"])
    m = int(meta["num_modalities"])
    dims = [int(d) for d in meta["modality_dims"]]
    if len(dims) != m:
        raise DatasetError(f"{meta_path}: modality_dims has {len(dims)} entries for M={m}")

    features = []
    for j, d in enumerate(dims):
        f = _load_csv(src / f"features_{j}.csv", np.float64)
        if f.shape != (n, d):
            raise DatasetError(
                f"features_{j}.csv has shape {f.shape}, meta says ({n}, {d})"
            )
        features.append(f)
    mask = _load_csv(src / "mask.csv", np.int64)
    if mask.shape != (n, m):
        raise DatasetError(f"mask.csv has shape {mask.shape}, meta says ({n}, {m})")
    labels = _load_csv(src / "labels.csv", np.int64)
    if labels.shape != (n, 1):
        raise DatasetError(f"labels.csv has shape {labels.shape}, meta says ({n}, 1)")
    bias_attr = None
    if meta.get("has_bias_attr", False):
        ba = _load_csv(src / "bias_attr.csv", np.int64)
        if ba.shape != (n, 1):
            raise DatasetError(f"bias_attr.csv has shape {ba.shape}, meta says ({n}, 1)")
        bias_attr = ba[:, 0]
    elif (src / "bias_attr.csv").exists():
        raise DatasetError(f"{src}: bias_attr.csv present but meta says has_bias_attr=false")

    ds = MultimodalDataset(
        features=features,
        mask=mask.astype(np.int8),
        labels=labels[:, 0],
        bias_attr=bias_attr,
        num_classes=int(meta["num_classes"]),
        split=str(meta.get("split", "train")),
    )
    ds.validate()
    return ds


def write_splits(splits, out_dir) -> None:
    """Write (train, val, test) under out_dir/<split>/."""
    for ds in splits:
        write_dataset(ds, Path(out_dir) / ds.split)


def read_split(data_dir, split: str) -> MultimodalDataset:
    if split not in SPLITS:
        raise DatasetError(f"unknown split {split!r}, expected one of {SPLITS}")
    return read_dataset(Path(data_dir) / split)
