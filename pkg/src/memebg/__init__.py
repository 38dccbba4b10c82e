"""Multi-task embedding classification toolkit for embryo blastocyst grading.

Trains a shared-trunk, multi-head network on precomputed image embeddings to
jointly predict trophectoderm (TE), inner-cell-mass (ICM), and expansion
(EXP) grades, and compares multi-task against single-task training with a
5x2 cross-validated paired t-test.
"""

__version__ = "0.1.0"

from .data import (
    DEFAULT_SCHEMAS,
    EmbeddingDataset,
    SyntheticSpec,
    TaskSchema,
    generate_synthetic,
    load_dataset,
    save_dataset,
    stratified_split,
)
from .metrics import ClassificationReport, ConfusionMatrix, confusion, render_report, report
from .model import ArchConfig, MTLNetwork, forward, init_network, load_network, predict, save_network
from .numerics import Rng, gauss_sample, matmul
from .stats import CvComparison, paired_t_5x2, run_5x2, student_t_two_sided_p
from .train import TrainConfig, TrainHistory, train_mtl, train_stl

__all__ = [
    "ArchConfig",
    "ClassificationReport",
    "ConfusionMatrix",
    "CvComparison",
    "DEFAULT_SCHEMAS",
    "EmbeddingDataset",
    "MTLNetwork",
    "Rng",
    "SyntheticSpec",
    "TaskSchema",
    "TrainConfig",
    "TrainHistory",
    "confusion",
    "forward",
    "gauss_sample",
    "generate_synthetic",
    "init_network",
    "load_dataset",
    "load_network",
    "matmul",
    "paired_t_5x2",
    "predict",
    "render_report",
    "report",
    "run_5x2",
    "save_dataset",
    "save_network",
    "stratified_split",
    "student_t_two_sided_p",
    "train_mtl",
    "train_stl",
]
