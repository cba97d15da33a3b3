"""Synthetic datasets shared across tests.

``separable_categorical`` mimics a one-hot-encoded categorical table whose
label is a deterministic rule of two feature groups, with the remaining
groups only weakly correlated with the label.  It is noiselessly separable,
and its dense rule regions are big enough that a 40% uniform label flip
leaves every region's majority class intact with high probability -- the
regime where conservative criteria shine and entropy overfits.
"""

from __future__ import annotations

import csv

import numpy as np

POISON_ODORS = (3, 4, 5, 6, 7)
AMBIGUOUS_ODOR = 0
POISON_SPORES = (4, 5)


def separable_categorical(n: int = 8124, seed: int = 12345):
    """Binary labels from a deterministic rule over categorical features.

    Feature group 0 ("odor", 9 categories) decides the label outright except
    for one ambiguous category, which defers to group 1 ("spore", 6
    categories).  Twenty more groups are sampled from label-tilted
    categorical distributions.  Returns (one-hot features, labels) with
    d = 112 columns.
    """
    rng = np.random.default_rng(seed)
    odor = rng.integers(0, 9, n)
    spore = rng.integers(0, 6, n)
    y = np.where(
        np.isin(odor, POISON_ODORS), 1,
        np.where(odor == AMBIGUOUS_ODOR, np.isin(spore, POISON_SPORES).astype(int), 0),
    )
    cols = [np.eye(9)[odor], np.eye(6)[spore]]
    for arity in [5] * 17 + [4, 4, 4]:
        base = rng.dirichlet(np.ones(arity))
        tilt = rng.dirichlet(np.ones(arity))
        probs = np.where(y[:, None] == 1, 0.65 * base + 0.35 * tilt, base)
        u = rng.random(n)
        value = (u[:, None] >= probs.cumsum(axis=1)).sum(axis=1).clip(0, arity - 1)
        cols.append(np.eye(arity)[value])
    return np.hstack(cols), y.astype(np.int64)


def gaussian_blobs(n_per_class: int, centers, scale: float = 1.0, seed: int = 0):
    """Isotropic Gaussian blobs; returns (features, labels)."""
    rng = np.random.default_rng(seed)
    centers = np.asarray(centers, dtype=np.float64)
    X = np.vstack([rng.normal(c, scale, (n_per_class, centers.shape[1])) for c in centers])
    y = np.repeat(np.arange(len(centers)), n_per_class)
    return X, y


def write_csv(path, features, labels, class_names=None) -> None:
    """Dump (features, labels) as a CSV with a `label` column."""
    names = class_names or [str(c) for c in sorted(set(int(v) for v in labels))]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"f{j}" for j in range(features.shape[1])] + ["label"])
        for row, lab in zip(features, labels):
            writer.writerow([repr(float(v)) for v in row] + [names[int(lab)]])


def write_libsvm(path, features, labels) -> None:
    """Dump (features, labels) in sparse LIBSVM text format."""
    with open(path, "w", encoding="utf-8") as fh:
        for row, lab in zip(features, labels):
            toks = [str(int(lab) + 1)]
            for j, v in enumerate(row):
                if v != 0.0:
                    toks.append(f"{j + 1}:{float(v):g}")
            fh.write(" ".join(toks) + "\n")
