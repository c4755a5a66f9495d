"""Multi-seed ablation grid: full model, no-GCE, no-MI, single-stream.

Each seed regenerates the synthetic data with that seed and trains every
variant on it, so a seed covers data sampling and training randomness
end to end.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

import numpy as np

from .synthdata import SyntheticSpec, generate, write_splits
from .training import TrainConfig, atomic_write_text, train

VARIANTS = (
    ("full", {}),
    ("no_gce", {"disable_gce": True}),
    ("no_mi", {"disable_mi": True}),
    ("single_stream", {"single_stream": True}),
)


def run_ablation(spec: SyntheticSpec, base_cfg: TrainConfig, seeds, out_dir,
                 variants=VARIANTS, progress=None) -> dict:
    """Train every (seed, variant) pair; returns per-run records and summary.

    Writes ablation_runs.csv, ablation_summary.csv and ablation_summary.txt
    under out_dir.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = []
    for seed in seeds:
        seed_dir = out / f"seed_{seed}"
        data_dir = seed_dir / "data"
        if not (data_dir / "train" / "meta.json").exists():
            write_splits(generate(dataclasses.replace(spec, seed=seed)), data_dir)
        for name, overrides in variants:
            cfg = dataclasses.replace(
                base_cfg, seed=seed, data_dir=str(data_dir),
                out_dir=str(seed_dir / name), **overrides,
            )
            if progress is not None:
                progress(f"seed {seed} variant {name}")
            artifacts = train(cfg)
            import json

            report = json.loads(Path(artifacts.metrics_path).read_text())
            test = report["splits"]["test"]
            probe = report["probe"] or {}
            records.append({
                "variant": name,
                "seed": seed,
                "test_auc_roc": test["auc_roc"],
                "test_auc_prc": test["auc_prc"],
                "test_accuracy": test["accuracy"],
                "probe_acc_Hc": probe.get("probe_acc_Hc"),
                "probe_acc_Hb": probe.get("probe_acc_Hb"),
            })

    summary = summarize(records, [name for name, _ in variants])
    write_tables(records, summary, out)
    return {"records": records, "summary": summary}


def summarize(records, variant_order) -> list:
    rows = []
    for name in variant_order:
        aucs = [r["test_auc_roc"] for r in records if r["variant"] == name]
        rows.append({
            "variant": name,
            "seeds": len(aucs),
            "auc_roc_mean": float(np.mean(aucs)),
            "auc_roc_std": float(np.std(aucs)),
        })
    return rows


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return format(v, ".6f")
    return str(v)


def write_tables(records, summary, out_dir) -> None:
    out = Path(out_dir)
    run_cols = ["variant", "seed", "test_auc_roc", "test_auc_prc", "test_accuracy",
                "probe_acc_Hc", "probe_acc_Hb"]
    lines = [",".join(run_cols)]
    lines += [",".join(_fmt(r[c]) for c in run_cols) for r in records]
    atomic_write_text(out / "ablation_runs.csv", "\n".join(lines) + "\n")

    sum_cols = ["variant", "seeds", "auc_roc_mean", "auc_roc_std"]
    lines = [",".join(sum_cols)]
    lines += [",".join(_fmt(r[c]) for c in sum_cols) for r in summary]
    atomic_write_text(out / "ablation_summary.csv", "\n".join(lines) + "\n")

    width = max(len(r["variant"]) for r in summary) + 2
    text = [f"{'variant':<{width}}{'seeds':>6}  {'test AUC-ROC (mean +- std)':>28}"]
    for r in summary:
        text.append(
            f"{r['variant']:<{width}}{r['seeds']:>6}  "
            f"{r['auc_roc_mean']:.4f} +- {r['auc_roc_std']:.4f}".rjust(0)
        )
    atomic_write_text(out / "ablation_summary.txt", "\n".join(text) + "\n")
