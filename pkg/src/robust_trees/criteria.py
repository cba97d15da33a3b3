"""Split criteria: loss-derived node impurities and risk reduction.

Every supported criterion is the minimum per-sample risk a constant
prediction can achieve on a node, expressed in closed form as a function of
the node's class-probability vector p:

    gini                1 - ||p||_2^2
    entropy             -sum_k p_k ln p_k          (0 ln 0 := 0)
    misclassification   1 - ||p||_inf
    mae                 2 (1 - ||p||_inf)
    gce(q)              entropy at q=0; (1 - ||p||_{1/(1-q)}) / q for q in (0,1);
                        (1 - ||p||_inf) / q for q >= 1
    ne(lambda)          min{1 - ||p||_inf, lambda * sqrt((1 - ||p||_2^2) (K-1)/K)}

The negative-exponential (NE) criterion comes from the margin loss
min{1, exp(-y*yhat - mu)} with lambda = 2 exp(-mu); lambda in (0, 1] tunes it
between the misclassification impurity (lambda = 1) and a scaled square root
of the Gini impurity (lambda -> 0).  lambda = 0 is accepted and means the
limiting criterion: splits are ranked by the sqrt-Gini term alone, since the
raw formula would collapse to zero everywhere.

``twoing`` is also accepted as a criterion kind.  It is not loss-derived and
has no node impurity; the tree learner scores splits with
:func:`twoing_score` instead of risk reduction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyHistogramError, PartitionError

KINDS = ("gini", "entropy", "misclassification", "mae", "gce", "ne", "twoing")

# Criteria whose impurity is C * (1 - ||p||_inf); risk reductions for these
# reduce to integer arithmetic on class counts and are computed exactly.
_CONSERVATIVE = ("misclassification", "mae")


@dataclass(frozen=True)
class CriterionSpec:
    """A split criterion plus its parameter, if it has one.

    ``q`` is required for ``gce`` (q >= 0), ``lam`` for ``ne``
    (0 <= lambda <= 1).  Other kinds take no parameter.
    """

    kind: str
    q: float | None = None
    lam: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown criterion kind: {self.kind!r}")
        if self.kind == "gce":
            if self.q is None:
                raise ValueError("gce criterion requires q")
            if not (math.isfinite(self.q) and self.q >= 0.0):
                raise ValueError(f"gce exponent q must be >= 0, got {self.q}")
        elif self.q is not None:
            raise ValueError(f"criterion {self.kind!r} takes no q parameter")
        if self.kind == "ne":
            if self.lam is None:
                raise ValueError("ne criterion requires lambda")
            if not (math.isfinite(self.lam) and 0.0 <= self.lam <= 1.0):
                raise ValueError(f"ne lambda must be in [0, 1], got {self.lam}")
        elif self.lam is not None:
            raise ValueError(f"criterion {self.kind!r} takes no lambda parameter")

    @property
    def is_conservative(self) -> bool:
        """Whether the impurity is an exact multiple of 1 - ||p||_inf."""
        if self.kind in _CONSERVATIVE:
            return True
        return self.kind == "gce" and self.q >= 1.0

    def conservative_constant(self) -> float:
        """The C in C * (1 - ||p||_inf) for conservative criteria."""
        if self.kind == "misclassification":
            return 1.0
        if self.kind == "mae":
            return 2.0
        if self.kind == "gce" and self.q >= 1.0:
            return 1.0 / self.q
        raise ValueError(f"{self.label()} is not a conservative criterion")

    def label(self) -> str:
        if self.kind == "gce":
            return f"gce(q={self.q:g})"
        if self.kind == "ne":
            return f"ne(lambda={self.lam:g})"
        return self.kind

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.q is not None:
            d["q"] = self.q
        if self.lam is not None:
            d["lambda"] = self.lam
        return d

    @staticmethod
    def from_dict(d: dict) -> "CriterionSpec":
        return CriterionSpec(kind=d["kind"], q=d.get("q"), lam=d.get("lambda"))


@dataclass(frozen=True)
class ClassHistogram:
    """Per-class sample counts at a node."""

    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 1 or counts.shape[0] < 2:
            raise ValueError("histogram needs a 1-D count vector with K >= 2 classes")
        if np.any(counts < 0):
            raise ValueError("class counts must be nonnegative")
        object.__setattr__(self, "counts", counts)

    @staticmethod
    def from_labels(labels, n_classes: int) -> "ClassHistogram":
        labels = np.asarray(labels, dtype=np.int64)
        return ClassHistogram(np.bincount(labels, minlength=n_classes))

    @property
    def n_classes(self) -> int:
        return int(self.counts.shape[0])

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def probabilities(self) -> np.ndarray:
        """Empirical class-probability vector; requires a nonempty node."""
        if self.total == 0:
            raise EmptyHistogramError("empty histogram has no probability vector")
        return self.counts / self.total


@dataclass(frozen=True)
class WeightedImpurity:
    """Node impurity scaled by the node's share of the full dataset."""

    value: float
    weight: float


def counts_impurity(spec: CriterionSpec, counts: np.ndarray) -> np.ndarray:
    """Unweighted impurity I(p) for each count vector in ``counts``.

    ``counts`` has class counts along the last axis; every row must have a
    positive total.  Vectorized so the split search can score all candidate
    thresholds of a feature in one call.
    """
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum(axis=-1)
    p = counts / total[..., None]
    kind = spec.kind
    if kind == "gini":
        return 1.0 - np.square(p).sum(axis=-1)
    if kind == "entropy" or (kind == "gce" and spec.q == 0.0):
        plogp = np.where(p > 0.0, p * np.log(np.where(p > 0.0, p, 1.0)), 0.0)
        return -plogp.sum(axis=-1)
    if kind == "misclassification":
        return 1.0 - p.max(axis=-1)
    if kind == "mae":
        return 2.0 * (1.0 - p.max(axis=-1))
    if kind == "gce":
        if spec.q >= 1.0:
            return (1.0 - p.max(axis=-1)) / spec.q
        r = 1.0 / (1.0 - spec.q)
        norm = np.power(np.power(p, r).sum(axis=-1), 1.0 / r)
        return (1.0 - norm) / spec.q
    if kind == "ne":
        k = counts.shape[-1]
        gini = np.maximum(1.0 - np.square(p).sum(axis=-1), 0.0)
        root = np.sqrt(gini * (k - 1) / k)
        if spec.lam == 0.0:
            return root
        return np.minimum(1.0 - p.max(axis=-1), spec.lam * root)
    raise ValueError(f"criterion {spec.label()} does not define a node impurity")


def impurity(spec: CriterionSpec, hist: ClassHistogram, dataset_size: int) -> WeightedImpurity:
    """Weighted node impurity W_S * I(p), with W_S = |S| / dataset_size."""
    total = hist.total
    if total == 0:
        raise EmptyHistogramError("cannot compute the impurity of an empty node")
    if dataset_size < total or dataset_size <= 0:
        raise ValueError("dataset_size must be >= the node's sample count")
    weight = total / dataset_size
    value = weight * float(counts_impurity(spec, hist.counts)) + 0.0  # normalize -0.0
    return WeightedImpurity(value=value, weight=weight)


def risk_reduction(
    spec: CriterionSpec,
    parent: ClassHistogram,
    left: ClassHistogram,
    right: ClassHistogram,
    dataset_size: int,
) -> float:
    """Drop in minimum (weighted) risk achieved by splitting parent into left/right.

    Nonnegative for every supported criterion because each impurity is
    concave in p.  For conservative criteria the value is computed from
    integer count maxima, so the zero of the stopping rule is exact.
    """
    if not np.array_equal(left.counts + right.counts, parent.counts):
        raise PartitionError("left + right counts must equal parent counts")
    if left.total == 0 or right.total == 0:
        raise EmptyHistogramError("risk reduction needs nonempty children")
    if spec.is_conservative:
        gain = int(left.counts.max()) + int(right.counts.max()) - int(parent.counts.max())
        return spec.conservative_constant() * gain / dataset_size
    return (
        impurity(spec, parent, dataset_size).value
        - impurity(spec, left, dataset_size).value
        - impurity(spec, right, dataset_size).value
    )


def twoing_score(
    left: ClassHistogram | np.ndarray,
    right: ClassHistogram | np.ndarray,
    dataset_size: int,
) -> float | np.ndarray:
    """Twoing split score (W_L W_R / 4) * (sum_k |p_L(k) - p_R(k)|)^2.

    Maximized in place of risk reduction when the criterion kind is
    ``twoing``; zero exactly when both children carry the same class
    distribution.  Accepts stacked count matrices for vectorized use.
    """
    lc = left.counts if isinstance(left, ClassHistogram) else np.asarray(left, dtype=np.float64)
    rc = right.counts if isinstance(right, ClassHistogram) else np.asarray(right, dtype=np.float64)
    lc = np.asarray(lc, dtype=np.float64)
    rc = np.asarray(rc, dtype=np.float64)
    lt = lc.sum(axis=-1)
    rt = rc.sum(axis=-1)
    gap = np.abs(lc / lt[..., None] - rc / rt[..., None]).sum(axis=-1)
    score = (lt / dataset_size) * (rt / dataset_size) / 4.0 * np.square(gap)
    return float(score) if np.ndim(score) == 0 else score


def optimal_constant_prediction(spec: CriterionSpec, hist: ClassHistogram) -> np.ndarray:
    """Probability vector minimizing the node's constant-prediction risk.

    Conservative criteria and NE concentrate on the majority class
    (lowest index wins ties); gini and entropy return p itself; gce with
    q in (0, 1) returns the power-normalized vector
    p_j^{1/(1-q)} / sum_k p_k^{1/(1-q)}.
    """
    p = hist.probabilities()
    kind = spec.kind
    if spec.is_conservative or kind == "ne":
        out = np.zeros_like(p)
        out[int(np.argmax(p))] = 1.0
        return out
    if kind in ("gini", "entropy") or (kind == "gce" and spec.q == 0.0):
        return p
    if kind == "gce":
        w = np.power(p, 1.0 / (1.0 - spec.q))
        return w / w.sum()
    raise ValueError(f"criterion {spec.label()} has no optimal constant prediction")


# ---------------------------------------------------------------------------
# Margin losses built from an assumed margin CDF, and the lambda <-> mu map.
# ---------------------------------------------------------------------------

CDF_KINDS = ("bernoulli", "logistic", "uniform", "shifted_negexp")


@dataclass(frozen=True)
class CdfSpec:
    """Margin distribution whose CDF induces the loss F(-z).

    ``bernoulli`` is the point mass at zero (01 loss, with the half-point
    convention at z = 0), ``logistic`` the standard logistic (sigmoid loss),
    ``uniform`` the U(-1, 1) ramp loss, and ``shifted_negexp`` the shifted
    negative of a unit exponential variable, giving min{1, exp(-z - mu)}.
    """

    kind: str
    mu: float | None = None

    def __post_init__(self):
        if self.kind not in CDF_KINDS:
            raise ValueError(f"unknown cdf kind: {self.kind!r}")
        if self.kind == "shifted_negexp":
            if self.mu is None or self.mu < 0.0:
                raise ValueError("shifted_negexp requires mu >= 0")
        elif self.mu is not None:
            raise ValueError(f"cdf {self.kind!r} takes no mu parameter")


def distribution_loss(cdf: CdfSpec, margin: float) -> float:
    """Loss F(-z) for margin z = y * yhat; non-increasing, valued in [0, 1]."""
    z = float(margin)
    if cdf.kind == "bernoulli":
        return 0.5 * (1.0 - float(np.sign(z)))
    if cdf.kind == "logistic":
        # 1 / (1 + e^z), computed stably for large |z|
        if z >= 0:
            return math.exp(-z) / (1.0 + math.exp(-z))
        return 1.0 / (1.0 + math.exp(z))
    if cdf.kind == "uniform":
        return min(1.0, max(0.0, (1.0 - z) / 2.0))
    if cdf.kind == "shifted_negexp":
        exponent = -z - cdf.mu
        return 1.0 if exponent >= 0.0 else math.exp(exponent)
    raise ValueError(f"unknown cdf kind: {cdf.kind!r}")


def lambda_from_mu(mu: float) -> float:
    """Robustness parameter lambda = 2 e^{-mu}; mu >= ln 2 gives lambda <= 1."""
    if mu < 0.0:
        raise ValueError(f"mu must be >= 0, got {mu}")
    return 2.0 * math.exp(-mu)


def mu_from_lambda(lam: float) -> float:
    """Inverse map mu = ln(2 / lambda) for lambda in (0, 1]."""
    if lam <= 0.0:
        raise ValueError(f"lambda must be > 0, got {lam}")
    if lam > 1.0:
        raise ValueError(f"lambda must be <= 1, got {lam}")
    return math.log(2.0 / lam)
