"""5x2 cross-validated paired t-test for comparing two trainers.

The construction: five replications of a stratified 50/50 split; per
replication both methods are trained on one half and scored on the other,
then the halves swap.  With p_i^(j) the method-A-minus-method-B score
difference of replication i, fold j, and s_i^2 the two-fold variance of
replication i, the statistic is

    t = p_1^(1) / sqrt(mean_i s_i^2)

with 5 degrees of freedom.  The numerator uses the first fold of the first
replication by construction, so fold order is fixed: fold 1 trains on the
first half, fold 2 on the second.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import t as student_t

from .data import EmbeddingDataset, stratified_split
from .errors import DegenerateVarianceError
from .metrics import confusion, report
from .model import MTLNetwork, predict
from .numerics import Rng
from .train import TrainConfig

REPLICATIONS = 5


@dataclass(frozen=True)
class FoldScore:
    rep: int
    fold: int
    score_a: float
    score_b: float

    @property
    def diff(self) -> float:
        return self.score_a - self.score_b


@dataclass(frozen=True)
class CvComparison:
    """All 10 fold scores plus the resulting statistic and decision."""

    task: str
    metric: str
    folds: tuple[FoldScore, ...]
    t: float
    p_value: float
    alpha: float
    significant: bool
    provenance: tuple[str, ...] = ()

    def to_json(self) -> str:
        doc = {
            "task": self.task,
            "metric": self.metric,
            "folds": [
                {
                    "rep": f.rep,
                    "fold": f.fold,
                    "score_A": f.score_a,
                    "score_B": f.score_b,
                    "diff": f.diff,
                }
                for f in self.folds
            ],
            "t": self.t,
            "p_value": self.p_value,
            "alpha": self.alpha,
            "significant": self.significant,
            "provenance": list(self.provenance),
        }
        return json.dumps(doc, indent=2) + "\n"


def student_t_two_sided_p(t_value: float, df: float) -> float:
    """Two-sided tail probability 2 * P(T_df > |t|)."""
    if df < 1:
        raise ValueError(f"degrees of freedom must be >= 1, got {df}")
    return min(1.0, 2.0 * float(student_t.sf(abs(t_value), df)))


def paired_t_5x2(differences) -> tuple[float, float]:
    """Statistic and two-sided p-value from the 5x2 difference table.

    ``differences`` is indexable as [replication][fold], exactly 5 x 2.
    All-zero variance is only legal when the numerator difference is zero
    too (identical methods), which yields t = 0, p = 1.
    """
    d = np.asarray(differences, dtype=np.float64)
    if d.shape != (REPLICATIONS, 2):
        raise ValueError(f"need a {REPLICATIONS}x2 difference table, got shape {d.shape}")
    means = d.mean(axis=1)
    s2 = ((d[:, 0] - means) ** 2) + ((d[:, 1] - means) ** 2)
    total = float(s2.sum())
    if total == 0.0:
        if d[0, 0] == 0.0:
            return 0.0, 1.0
        raise DegenerateVarianceError(
            f"all fold variances are zero but p_1^(1) = {d[0, 0]}"
        )
    t_value = float(d[0, 0] / np.sqrt(total / REPLICATIONS))
    return t_value, student_t_two_sided_p(t_value, REPLICATIONS)


METRICS = ("macro_f1", "weighted_f1")


def _f1_on(net: MTLNetwork, ds: EmbeddingDataset, task: str, metric: str) -> float:
    preds = predict(net, ds.x)
    schema = ds.schema(task)
    rep = report(confusion(ds.labels[task], preds[task], schema.classes))
    return rep.macro.f1 if metric == "macro_f1" else rep.weighted.f1


def default_workers() -> int:
    """Parallelism cap for the comparison runs (MEMEBG_THREADS, default 5)."""
    raw = os.environ.get("MEMEBG_THREADS", "")
    try:
        value = int(raw)
    except ValueError:
        return REPLICATIONS
    return max(1, min(value, REPLICATIONS))


def run_5x2(
    ds: EmbeddingDataset,
    trainer_a,
    trainer_b,
    metric_task: str,
    config: TrainConfig,
    base_seed: int,
    alpha: float = 0.05,
    max_workers: int | None = None,
    metric: str = "macro_f1",
) -> CvComparison:
    """Run the full 5x2 comparison of two trainer callables.

    A trainer is ``f(train_ds, config, seed) -> network``; both trainers
    receive the same per-run seed, so handing the same callable to both
    sides yields identical scores and a guaranteed non-significant result.
    Replication i splits with seed base_seed + i and trains with seeds
    base_seed + 10*i + fold.  Replications may run on parallel threads;
    scores are deterministic either way.  ``metric`` selects the F1
    averaging fed to the test (macro by default, weighted for sensitivity
    analysis).
    """
    if metric_task not in ds.labels:
        raise ValueError(
            f"unknown metric task {metric_task!r}; dataset tasks are "
            f"{sorted(ds.labels)}"
        )
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}, got {metric!r}")
    provenance = []
    singletons = sum(1 for v in _tuple_counts(ds).values() if v == 1)
    if singletons:
        provenance.append(
            f"{singletons} singleton joint-label tuple(s) forced into the "
            f"training half of every split"
        )

    def run_replication(i: int) -> list[FoldScore]:
        half1, half2 = stratified_split(ds, 0.5, Rng(base_seed + i))
        out = []
        for fold, (tr, te) in enumerate(((half1, half2), (half2, half1)), start=1):
            seed = base_seed + 10 * i + fold
            net_a = trainer_a(tr, config, seed)
            net_b = trainer_b(tr, config, seed)
            out.append(
                FoldScore(
                    rep=i,
                    fold=fold,
                    score_a=_f1_on(net_a, te, metric_task, metric),
                    score_b=_f1_on(net_b, te, metric_task, metric),
                )
            )
        return out

    workers = default_workers() if max_workers is None else max(1, max_workers)
    reps = range(1, REPLICATIONS + 1)
    if workers == 1:
        results = [run_replication(i) for i in reps]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_replication, reps))

    folds = tuple(f for rep in results for f in rep)
    diffs = [[f.diff for f in rep] for rep in results]
    t_value, p_value = paired_t_5x2(diffs)
    return CvComparison(
        task=metric_task,
        metric=metric,
        folds=folds,
        t=t_value,
        p_value=p_value,
        alpha=alpha,
        significant=bool(p_value < alpha),
        provenance=tuple(provenance),
    )


def _tuple_counts(ds: EmbeddingDataset) -> dict:
    counts: dict = {}
    for key in ds.joint_tuples():
        counts[key] = counts.get(key, 0) + 1
    return counts
