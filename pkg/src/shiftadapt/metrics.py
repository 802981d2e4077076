"""Pure metric kernels: confusion-matrix rates, rank-based ROC-AUC, and 1-D
earth mover's distance.

Conventions used throughout the toolkit:

- The demented class is the positive class, everywhere.
- Metrics whose denominator vanishes are reported as ``None`` ("undefined
  marker"), never NaN, so serialized reports stay machine-checkable.
- All operations are pure and order-independent where the mathematics is.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

#: Metric keys recognized in a MetricsReport, in emission order.
METRIC_KEYS = (
    "auc",
    "accuracy",
    "sensitivity",
    "specificity",
    "precision",
    "f1",
    "emd_generated",
    "emd_reconstructed",
)


@dataclass(frozen=True)
class ConfusionCounts:
    """Binary confusion counts with demented = positive."""

    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def confusion(labels, predictions) -> ConfusionCounts:
    """Count the binary confusion matrix.

    Both arguments must be equal-length sequences of {0, 1} where 1 marks the
    positive (demented) class.
    """
    y = np.asarray(labels)
    p = np.asarray(predictions)
    if y.size == 0:
        raise DataError("confusion requires at least one labeled sample")
    if y.shape != p.shape:
        raise DataError(
            f"labels and predictions differ in length: {y.shape} vs {p.shape}"
        )
    for name, arr in (("labels", y), ("predictions", p)):
        if not np.isin(arr, (0, 1)).all():
            raise DataError(f"{name} must be binary (0/1)")
    tp = int(np.sum((y == 1) & (p == 1)))
    fp = int(np.sum((y == 0) & (p == 1)))
    tn = int(np.sum((y == 0) & (p == 0)))
    fn = int(np.sum((y == 1) & (p == 0)))
    return ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)


def rates(c: ConfusionCounts) -> dict:
    """Derive the standard rate suite from confusion counts.

    Returns a dict with keys accuracy, sensitivity, specificity, precision,
    f1. Rates whose denominator is zero come back as ``None``.
    """
    def ratio(num, den):
        return num / den if den > 0 else None

    sens = ratio(c.tp, c.tp + c.fn)
    spec = ratio(c.tn, c.tn + c.fp)
    prec = ratio(c.tp, c.tp + c.fp)
    if prec is None or sens is None or prec + sens == 0:
        f1 = None
    else:
        f1 = 2.0 * prec * sens / (prec + sens)
    return {
        "accuracy": ratio(c.tp + c.tn, c.total),
        "sensitivity": sens,
        "specificity": spec,
        "precision": prec,
        "f1": f1,
    }


def roc_auc(scores, labels) -> float | None:
    """ROC-AUC as the normalized Mann-Whitney pair statistic.

    Over all (positive, negative) pairs, a pair contributes 1 when the
    positive scores strictly higher, 0.5 on a tie. Computed via sort + rank
    with midranks for ties, O(n log n). Returns ``None`` when only one class
    is present.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise DataError("scores and labels must be equal-length 1-D sequences")
    if s.size == 0:
        raise DataError("roc_auc requires at least one sample")
    if not np.isfinite(s).all():
        raise DataError("scores must be finite")
    n_pos = int(np.sum(y == 1))
    n_neg = int(np.sum(y == 0))
    if n_pos == 0 or n_neg == 0:
        return None

    # Midranks: average the ordinal ranks within each tie group.
    order = np.argsort(s, kind="mergesort")
    sorted_s = s[order]
    ranks = np.empty(s.size, dtype=np.float64)
    i = 0
    while i < s.size:
        j = i
        while j + 1 < s.size and sorted_s[j + 1] == sorted_s[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1

    rank_sum_pos = float(ranks[np.asarray(y) == 1].sum())
    u = rank_sum_pos - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def emd_1d(p, q) -> float:
    """Wasserstein-1 distance between two 1-D empirical distributions.

    Equals the integral of |CDF_p - CDF_q| over the real line; for
    equal-size samples this reduces to the mean absolute difference of the
    sorted values. Weights are uniform within each sample.
    """
    a = np.sort(np.asarray(p, dtype=np.float64).ravel())
    b = np.sort(np.asarray(q, dtype=np.float64).ravel())
    if a.size == 0 or b.size == 0:
        raise DataError("emd_1d requires nonempty samples on both sides")
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        raise DataError("emd_1d requires finite values")
    if a.size == b.size:
        return float(np.abs(a - b).mean())

    # General case: piecewise-constant CDF difference integrated between
    # consecutive pooled support points.
    support = np.concatenate([a, b])
    support.sort(kind="mergesort")
    deltas = np.diff(support)
    cdf_a = np.searchsorted(a, support[:-1], side="right") / a.size
    cdf_b = np.searchsorted(b, support[:-1], side="right") / b.size
    return float(np.sum(np.abs(cdf_a - cdf_b) * deltas))


#: Pixel pool larger than this is subsampled (without replacement, fixed
#: seed) before computing the distance, to bound memory and runtime.
EMD_POOL_LIMIT = 1_000_000
EMD_POOL_SEED = 0x5AD5


def pooled_intensities(stacks, limit: int = EMD_POOL_LIMIT) -> np.ndarray:
    """Pool every pixel of every stack into one flat sample.

    Stacks may be SliceStack objects (with a ``slices`` array) or bare
    arrays. Pools above `limit` values are subsampled deterministically.
    """
    arrays = []
    for st in stacks:
        arr = getattr(st, "slices", st)
        arrays.append(np.asarray(arr, dtype=np.float64).ravel())
    if not arrays:
        raise DataError("cannot pool an empty stack set")
    pool = np.concatenate(arrays)
    if pool.size > limit:
        rng = np.random.default_rng(EMD_POOL_SEED)
        pool = rng.choice(pool, size=limit, replace=False)
    return pool


def emd_report(real_set, model_set, *, generated_set=None, window=None) -> dict:
    """Earth mover's distances between pooled pixel-intensity distributions.

    ``model_set`` holds reconstructions of ``real_set``; ``generated_set``
    optionally holds free samples (decoded from prior draws). When `window`
    is given as ``(lo, hi)``, all sets are mapped back from the [-1, 1]
    model range to intensity units before pooling, so reported values live
    on the data's own scale.
    """
    if not real_set or not model_set:
        raise DataError("emd_report requires nonempty stack sets")

    def shape_of(st):
        return np.asarray(getattr(st, "slices", st)).shape

    ref_shape = shape_of(real_set[0])
    for group in (real_set, model_set, generated_set or []):
        for st in group:
            if shape_of(st) != ref_shape:
                raise DataError(
                    f"slice geometry mismatch: {shape_of(st)} vs {ref_shape}"
                )

    def unmap(pool):
        if window is None:
            return pool
        lo, hi = window
        return (pool + 1.0) * 0.5 * (hi - lo) + lo

    real_pool = unmap(pooled_intensities(real_set))
    recon_pool = unmap(pooled_intensities(model_set))
    out = {"reconstructed": emd_1d(real_pool, recon_pool)}
    if generated_set is not None:
        gen_pool = unmap(pooled_intensities(generated_set))
        out["generated"] = emd_1d(real_pool, gen_pool)
    return out


@dataclass
class MetricsReport:
    """Serializable bundle of evaluation metrics for one experiment.

    ``metrics`` holds only defined values; names of undefined metrics are
    listed in ``undefined``. Serialization is canonical (sorted keys) so
    equal reports serialize to identical bytes.
    """

    experiment_id: str = ""
    dataset: str = ""
    model: str = ""
    metrics: dict = field(default_factory=dict)
    undefined: list = field(default_factory=list)

    def set_metric(self, name: str, value) -> None:
        if name not in METRIC_KEYS:
            raise DataError(f"unknown metric name: {name}")
        if value is None:
            if name not in self.undefined:
                self.undefined.append(name)
            self.metrics.pop(name, None)
        else:
            self.metrics[name] = float(value)
            if name in self.undefined:
                self.undefined.remove(name)

    def to_dict(self) -> dict:
        return {
            "experiment_id": self.experiment_id,
            "dataset": self.dataset,
            "model": self.model,
            "metrics": {k: self.metrics[k] for k in METRIC_KEYS if k in self.metrics},
            "undefined": sorted(self.undefined),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        return cls(
            experiment_id=d.get("experiment_id", ""),
            dataset=d.get("dataset", ""),
            model=d.get("model", ""),
            metrics=dict(d.get("metrics", {})),
            undefined=list(d.get("undefined", [])),
        )


def classification_report(labels, scores, predictions, *, dataset="", model="") -> MetricsReport:
    """Full classifier metric suite from labels, positive-class scores, and
    hard predictions."""
    rep = MetricsReport(dataset=dataset, model=model)
    c = confusion(labels, predictions)
    for name, value in rates(c).items():
        rep.set_metric(name, value)
    rep.set_metric("auc", roc_auc(scores, labels))
    return rep
