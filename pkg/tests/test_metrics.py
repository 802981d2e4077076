import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shiftadapt.errors import DataError
from shiftadapt.metrics import (
    ConfusionCounts,
    MetricsReport,
    confusion,
    emd_1d,
    emd_report,
    pooled_intensities,
    rates,
    roc_auc,
)

# ---------------------------------------------------------------------------
# Independent oracles


def auc_pair_oracle(scores, labels):
    """Brute-force Mann-Whitney pair enumeration."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    if len(pos) == 0 or len(neg) == 0:
        return None
    credit = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                credit += 1.0
            elif p == n:
                credit += 0.5
    return credit / (len(pos) * len(neg))


def emd_lp_oracle(a, b):
    """Optimal transport on the line via linear programming."""
    from scipy.optimize import linprog

    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = len(a), len(b)
    cost = np.abs(a[:, None] - b[None, :]).ravel()
    # Row sums = 1/na, column sums = 1/nb.
    a_eq = []
    b_eq = []
    for i in range(na):
        row = np.zeros(na * nb)
        row[i * nb : (i + 1) * nb] = 1.0
        a_eq.append(row)
        b_eq.append(1.0 / na)
    for j in range(nb):
        col = np.zeros(na * nb)
        col[j::nb] = 1.0
        a_eq.append(col)
        b_eq.append(1.0 / nb)
    res = linprog(cost, A_eq=np.array(a_eq), b_eq=np.array(b_eq),
                  bounds=(0, None), method="highs")
    assert res.success
    return res.fun


def rates_formula_oracle(tp, fp, tn, fn):
    out = {}
    total = tp + fp + tn + fn
    out["accuracy"] = (tp + tn) / total if total else None
    out["sensitivity"] = tp / (tp + fn) if tp + fn else None
    out["specificity"] = tn / (tn + fp) if tn + fp else None
    out["precision"] = tp / (tp + fp) if tp + fp else None
    if out["precision"] and out["sensitivity"]:
        p, s = out["precision"], out["sensitivity"]
        out["f1"] = 2 * p * s / (p + s)
    elif out["precision"] is None or out["sensitivity"] is None:
        out["f1"] = None
    else:
        out["f1"] = None
    return out


# ---------------------------------------------------------------------------
# confusion / rates


def test_confusion_direct_count():
    c = confusion([1, 1, 0], [1, 0, 0])
    assert (c.tp, c.fn, c.tn, c.fp) == (1, 1, 1, 0)


def test_confusion_empty_errors():
    with pytest.raises(DataError):
        confusion([], [])


def test_confusion_all_positive_predictions():
    c = confusion([1, 0, 1, 0], [1, 1, 1, 1])
    assert c.fn == 0 and c.tn == 0


def test_confusion_length_mismatch():
    with pytest.raises(DataError):
        confusion([1, 0], [1])


def test_confusion_requires_binary():
    with pytest.raises(DataError):
        confusion([1, 2], [1, 0])


def test_rates_arithmetic():
    r = rates(ConfusionCounts(tp=2, fp=1, tn=3, fn=0))
    assert r["precision"] == pytest.approx(2 / 3)
    assert r["sensitivity"] == 1.0
    assert r["f1"] == pytest.approx(0.8)
    assert r["specificity"] == 0.75
    assert r["accuracy"] == pytest.approx(5 / 6)


def test_rates_undefined_marker():
    r = rates(ConfusionCounts(tp=0, fp=0, tn=3, fn=2))
    assert r["precision"] is None
    assert r["f1"] is None
    assert r["specificity"] == 1.0


def test_rates_perfect_predictor():
    r = rates(ConfusionCounts(tp=5, fp=0, tn=5, fn=0))
    assert all(v == 1.0 for v in r.values())


def test_rates_consistency_fixture():
    # Confusion counts chosen to reproduce the recorded source-domain
    # evaluation rates of the selected classifier (truncated to 5 digits).
    r = rates(ConfusionCounts(tp=123, fn=16, tn=85, fp=21))
    assert r["accuracy"] == pytest.approx(0.84898, abs=5e-6)
    assert r["sensitivity"] == pytest.approx(0.88489, abs=5e-6)
    assert r["specificity"] == pytest.approx(0.80188, abs=1e-5)
    assert r["precision"] == pytest.approx(0.85416, abs=1e-5)
    assert r["f1"] == pytest.approx(0.86926, abs=1e-5)


@given(st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=200))
def test_rates_match_formula_oracle(pairs):
    y = [int(a) for a, _ in pairs]
    p = [int(b) for _, b in pairs]
    c = confusion(y, p)
    expected = rates_formula_oracle(c.tp, c.fp, c.tn, c.fn)
    got = rates(c)
    for key, val in expected.items():
        if val is None:
            assert got[key] is None
        else:
            assert got[key] == pytest.approx(val, abs=1e-12)


# ---------------------------------------------------------------------------
# roc_auc


def test_auc_perfect_separation():
    assert roc_auc([0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0]) == 1.0


def test_auc_all_ties():
    assert roc_auc([0.5, 0.5, 0.5, 0.5], [1, 0, 1, 0]) == 0.5


def test_auc_half_credit_ties():
    # pairs: (0.8,0.4)=1, (0.8,0.1)=1, (0.4,0.4)=0.5, (0.4,0.1)=1 -> 3.5/4
    assert roc_auc([0.8, 0.4, 0.4, 0.1], [1, 1, 0, 0]) == pytest.approx(0.875)


def test_auc_single_class_undefined():
    assert roc_auc([0.2, 0.4], [1, 1]) is None


def test_auc_matches_pair_oracle_randomized():
    rng = np.random.default_rng(123)
    for _ in range(300):
        n = rng.integers(2, 64)
        scores = rng.choice([0.0, 0.25, 0.5, 0.75, 1.0], size=n)  # force ties
        labels = rng.integers(0, 2, size=n)
        expected = auc_pair_oracle(scores, labels)
        got = roc_auc(scores, labels)
        if expected is None:
            assert got is None
        else:
            assert got == pytest.approx(expected, abs=1e-12)


@given(
    # Coarse grid so the float image of exp() cannot merge distinct scores.
    st.lists(
        st.floats(-10, 10, allow_nan=False).map(lambda x: round(x, 3)),
        min_size=2, max_size=50,
    ),
    st.data(),
)
@settings(max_examples=60)
def test_auc_invariant_under_monotone_transform(scores, data):
    labels = data.draw(
        st.lists(st.integers(0, 1), min_size=len(scores), max_size=len(scores))
    )
    base = roc_auc(scores, labels)
    transformed = roc_auc([3.0 * s + 1.0 for s in scores], labels)
    exped = roc_auc(list(np.exp(np.asarray(scores) / 10.0)), labels)
    if base is None:
        assert transformed is None and exped is None
    else:
        assert transformed == pytest.approx(base, abs=1e-12)
        assert exped == pytest.approx(base, abs=1e-12)


def test_auc_negation_complement():
    rng = np.random.default_rng(5)
    scores = rng.normal(size=40)
    labels = rng.integers(0, 2, size=40)
    if labels.sum() in (0, len(labels)):
        labels[0] = 1 - labels[0]
    a = roc_auc(scores, labels)
    b = roc_auc(-scores, labels)
    assert a + b == pytest.approx(1.0, abs=1e-12)


# ---------------------------------------------------------------------------
# emd_1d


def test_emd_identity():
    assert emd_1d([0.5, 1.5, -2.0], [0.5, 1.5, -2.0]) == 0.0


def test_emd_point_masses():
    assert emd_1d([0.0], [1.0]) == pytest.approx(1.0)


def test_emd_unequal_sizes():
    assert emd_1d([0.0, 0.0], [1.0, 3.0]) == pytest.approx(2.0)


def test_emd_empty_errors():
    with pytest.raises(DataError):
        emd_1d([], [1.0])


def test_emd_matches_lp_oracle_randomized():
    rng = np.random.default_rng(77)
    for _ in range(40):
        a = rng.normal(size=rng.integers(1, 9))
        b = rng.normal(size=rng.integers(1, 9))
        assert emd_1d(a, b) == pytest.approx(emd_lp_oracle(a, b), abs=1e-9)


def test_emd_translation_identity():
    rng = np.random.default_rng(3)
    a = rng.normal(size=20)
    for c in (-2.5, 0.1, 4.0):
        assert emd_1d(a, a + c) == pytest.approx(abs(c), abs=1e-12)


def test_emd_symmetry_and_triangle():
    rng = np.random.default_rng(11)
    for _ in range(25):
        a = rng.normal(size=rng.integers(1, 8))
        b = rng.normal(size=rng.integers(1, 8))
        c = rng.normal(size=rng.integers(1, 8))
        assert emd_1d(a, b) == pytest.approx(emd_1d(b, a), abs=0)
        assert emd_1d(a, c) <= emd_1d(a, b) + emd_1d(b, c) + 1e-12


# ---------------------------------------------------------------------------
# emd_report / pooling


def test_emd_report_identity(tiny_stacks):
    out = emd_report(tiny_stacks, tiny_stacks)
    assert out["reconstructed"] == 0.0


def test_emd_report_constant_shift(tiny_stacks):
    shifted = [np.asarray(st.slices) + 1.5 for st in tiny_stacks]
    out = emd_report(tiny_stacks, shifted)
    assert out["reconstructed"] == pytest.approx(1.5, abs=1e-6)


def test_emd_report_geometry_mismatch(tiny_stacks):
    bad = [np.zeros((2, 8, 8), dtype=np.float32)]
    with pytest.raises(DataError):
        emd_report(tiny_stacks, bad)


def test_emd_report_window_unmaps(tiny_stacks):
    arrays = [np.clip(np.asarray(st.slices), -1, 1) for st in tiny_stacks]
    out_a = emd_report(arrays, arrays, window=(-4.0, 4.0))
    assert out_a["reconstructed"] == 0.0


def test_pooled_subsample_deterministic():
    rng = np.random.default_rng(0)
    stacks = [rng.normal(size=(4, 16, 16)) for _ in range(3)]
    a = pooled_intensities(stacks, limit=100)
    b = pooled_intensities(stacks, limit=100)
    assert np.array_equal(a, b)
    assert len(a) == 100


# ---------------------------------------------------------------------------
# MetricsReport


def test_report_serialization_canonical():
    rep = MetricsReport(experiment_id="e", dataset="d", model="m")
    rep.set_metric("accuracy", 0.5)
    rep.set_metric("auc", None)
    d = rep.to_dict()
    assert d["metrics"] == {"accuracy": 0.5}
    assert d["undefined"] == ["auc"]
    again = MetricsReport.from_dict(d)
    assert again.to_json() == rep.to_json()


def test_report_rejects_unknown_metric():
    with pytest.raises(DataError):
        MetricsReport().set_metric("banana", 1.0)
