import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shiftadapt.dataio import (
    SubjectRecord,
    VolumeSample,
    admitted,
    anomaly_benchmark_config,
    assign_subjects,
    build_dataset,
    classification_benchmark_config,
    from_model_range,
    intensity_window,
    load_manifest,
    materialize_synth,
    normalize_volume,
    quarantine_count,
    read_volume,
    slice_indices,
    slice_sagittal,
    synth_generate,
    to_model_range,
    write_manifest,
    write_volume,
)
from shiftadapt.dataio.synth import SynthConfig
from shiftadapt.errors import DataError

# ---------------------------------------------------------------------------
# Manifest


def write_text_manifest(path, rows, header="subject_id,domain,cdr,age"):
    path.write_text(header + "\n" + "\n".join(rows) + "\n", encoding="utf-8")


def test_manifest_field_mapping(tmp_path):
    p = tmp_path / "m.csv"
    write_text_manifest(p, ["s001,source,0.0,74"])
    (rec,) = load_manifest(p)
    assert rec.subject_id == "s001"
    assert rec.domain == "source"
    assert rec.cdr == 0.0
    assert rec.age == 74.0
    assert not rec.quarantined
    assert rec.label == 0


def test_manifest_positive_cdr_labels_demented(tmp_path):
    p = tmp_path / "m.csv"
    write_text_manifest(p, ["s002,source,0.5,80"])
    (rec,) = load_manifest(p)
    assert rec.label == 1


def test_manifest_missing_cdr_quarantined(tmp_path):
    p = tmp_path / "m.csv"
    write_text_manifest(p, ["s003,source,,71", "s004,source,1,70"])
    records = load_manifest(p)
    assert quarantine_count(records) == 1
    assert records[0].quarantined and records[0].cdr is None
    assert [r.subject_id for r in admitted(records)] == ["s004"]
    with pytest.raises(DataError):
        _ = records[0].label


def test_manifest_invalid_cdr_value_quarantined(tmp_path):
    p = tmp_path / "m.csv"
    write_text_manifest(p, ["s001,source,0.7,71", "s002,source,abc,70"])
    records = load_manifest(p)
    assert all(r.quarantined for r in records)


def test_manifest_missing_file():
    with pytest.raises(DataError):
        load_manifest("/nonexistent/m.csv")


def test_manifest_duplicate_subject(tmp_path):
    p = tmp_path / "m.csv"
    write_text_manifest(p, ["s001,source,0,70", "s001,source,1,71"])
    with pytest.raises(DataError, match="duplicate"):
        load_manifest(p)


def test_manifest_malformed_header(tmp_path):
    p = tmp_path / "m.csv"
    write_text_manifest(p, ["s001,source,0,70"], header="id,domain,cdr,age")
    with pytest.raises(DataError, match="header"):
        load_manifest(p)


def test_manifest_roundtrip(tmp_path):
    records = [
        SubjectRecord("a", "source", 0.0, 70.0),
        SubjectRecord("b", "target", None, None, quarantined=True),
        SubjectRecord("c", "target", 2.0, None),
    ]
    p = tmp_path / "m.csv"
    write_manifest(p, records)
    again = load_manifest(p)
    assert [(r.subject_id, r.cdr, r.quarantined) for r in again] == [
        ("a", 0.0, False), ("b", None, True), ("c", 2.0, False),
    ]


@pytest.mark.parametrize("cdr,label", [(0.0, 0), (0.5, 1), (1.0, 1), (2.0, 1), (3.0, 1)])
def test_label_rule_total(cdr, label):
    assert SubjectRecord("s", "source", cdr).label == label


# ---------------------------------------------------------------------------
# Volumes


def test_volume_roundtrip(tmp_path):
    v = np.arange(2 * 3 * 4, dtype=np.float32).reshape(2, 3, 4)
    sample = VolumeSample("s1", v)
    path = tmp_path / "s1.vol"
    write_volume(path, sample)
    again = read_volume(path)
    assert again.subject_id == "s1"
    assert np.array_equal(again.voxels, v)


def test_volume_bad_magic(tmp_path):
    p = tmp_path / "x.vol"
    p.write_bytes(b"NOTAVOLUME" + b"\x00" * 40)
    with pytest.raises(DataError, match="magic"):
        read_volume(p)


def test_volume_truncated(tmp_path):
    v = np.zeros((4, 4, 4), dtype=np.float32)
    p = tmp_path / "t.vol"
    write_volume(p, VolumeSample("t", v))
    p.write_bytes(p.read_bytes()[:-8])
    with pytest.raises(DataError, match="payload"):
        read_volume(p)


def test_volume_rejects_nonfinite():
    v = np.zeros((2, 2, 2), dtype=np.float32)
    v[0, 0, 0] = np.nan
    with pytest.raises(DataError, match="non-finite"):
        VolumeSample("bad", v)


def test_normalize_simple():
    v = VolumeSample("s", np.array([1.0, 2.0, 3.0], dtype=np.float32).reshape(3, 1, 1))
    out = normalize_volume(v)
    assert abs(float(out.voxels.mean())) < 1e-7
    assert abs(float(out.voxels.std()) - 1.0) < 1e-6
    assert out.intensity_units == "zscore"


def test_normalize_constant_volume_errors():
    v = VolumeSample("s", np.full((2, 2, 2), 5.0, dtype=np.float32))
    with pytest.raises(DataError, match="zero variance"):
        normalize_volume(v)


@pytest.mark.parametrize("shape", [(4, 5, 6), (16, 8, 8), (3, 3, 3)])
def test_normalize_postconditions_random(shape):
    rng = np.random.default_rng(hash(shape) % 2**32)
    v = VolumeSample("s", (rng.normal(50, 7, size=shape)).astype(np.float32))
    out = normalize_volume(v).voxels.astype(np.float64)
    assert abs(out.mean()) < 1e-5
    assert abs(out.std() - 1.0) < 1e-5


def test_normalize_idempotent():
    rng = np.random.default_rng(9)
    v = VolumeSample("s", rng.normal(10, 3, size=(6, 7, 8)).astype(np.float32))
    once = normalize_volume(v)
    twice = normalize_volume(once)
    assert np.abs(twice.voxels - once.voxels).max() < 1e-5


# ---------------------------------------------------------------------------
# Slicing


def test_slice_indices_extent176():
    # idx_k = floor(176 * (1/4 + k/18) + 1/2), evaluated in exact arithmetic
    expected = [
        math.floor(Fraction(176) * (Fraction(1, 4) + Fraction(k, 18)) + Fraction(1, 2))
        for k in range(10)
    ]
    assert expected == [44, 54, 64, 73, 83, 93, 103, 112, 122, 132]
    assert slice_indices(176, 10) == expected


def test_slice_indices_full_coverage_identity():
    assert slice_indices(12, 12) == list(range(12))


def test_slice_indices_single_center():
    assert slice_indices(176, 1) == [88]
    assert slice_indices(7, 1) == [4]  # floor(3.5 + 0.5)


def test_slice_indices_too_many():
    with pytest.raises(DataError):
        slice_indices(8, 9)


@pytest.mark.parametrize("extent", list(range(32, 257, 16)))
def test_slice_indices_distinct_increasing(extent):
    for s in (1, 2, 10, extent // 2, extent):
        idx = slice_indices(extent, s)
        assert len(idx) == s
        assert all(b > a for a, b in zip(idx, idx[1:]))
        assert 0 <= idx[0] and idx[-1] < extent


@given(st.integers(2, 256), st.data())
@settings(max_examples=100)
def test_slice_indices_property(extent, data):
    s = data.draw(st.integers(1, extent))
    idx = slice_indices(extent, s)
    assert len(set(idx)) == s
    assert idx == sorted(idx)
    assert all(0 <= i < extent for i in idx)


def test_slice_sagittal_standardizes():
    rng = np.random.default_rng(2)
    v = normalize_volume(VolumeSample("s", rng.normal(100, 9, (20, 16, 16)).astype(np.float32)))
    st_ = slice_sagittal(v, 5)
    arr = st_.slices.astype(np.float64)
    assert st_.shape == (5, 16, 16)
    assert abs(arr.mean()) < 1e-5
    assert abs(arr.std() - 1.0) < 1e-5
    mean, std = st_.normalization_stats
    assert std > 0


# ---------------------------------------------------------------------------
# Splits


def test_assign_subjects_pure_function():
    ids = [f"s{i}" for i in range(20)]
    a = assign_subjects(ids, seed=4)
    b = assign_subjects(list(reversed(ids)), seed=4)
    assert a == b
    c = assign_subjects(ids, seed=5)
    assert a != c


def test_assign_subjects_bad_fractions():
    with pytest.raises(DataError):
        assign_subjects(["a"], 0, fractions=(0.5, 0.2, 0.2))


@given(st.sets(st.text(alphabet="abcdefgh", min_size=1, max_size=6), min_size=1, max_size=40),
       st.integers(0, 2**31))
@settings(max_examples=100)
def test_assign_subjects_disjoint_complete(ids, seed):
    parts = assign_subjects(ids, seed)
    train, val, test = set(parts["train"]), set(parts["val"]), set(parts["test"])
    assert train | val | test == set(ids)
    assert not (train & val or train & test or val & test)


def _write_subject_volume(tmp_path, subject_id, seed, shape=(12, 16, 16)):
    rng = np.random.default_rng(seed)
    v = rng.normal(100, 10, size=shape).astype(np.float32)
    write_volume(tmp_path / f"{subject_id}.vol", VolumeSample(subject_id, v))


def test_build_dataset_small(tmp_path):
    rows = []
    for i, cdr in enumerate([0.0, 0.0, 1.0, 2.0]):
        sid = f"s{i}"
        rows.append(SubjectRecord(sid, "source", cdr))
        _write_subject_volume(tmp_path, sid, seed=i)
    split = build_dataset(rows, tmp_path, slice_count=4, split_seed=0,
                          fractions=(0.5, 0.0, 0.5))
    assert len(split.train) == 2 and len(split.test) == 2
    counts = split.class_counts()
    assert counts["train"]["normal"] + counts["train"]["demented"] == 2
    # subject-level disjointness
    assert not (split.subjects("train") & split.subjects("test"))


def test_build_dataset_deterministic(tmp_path):
    rows = []
    for i, cdr in enumerate([0.0, 0.0, 1.0, 2.0, 0.5, 0.0]):
        sid = f"s{i}"
        rows.append(SubjectRecord(sid, "source", cdr))
        _write_subject_volume(tmp_path, sid, seed=10 + i)
    a = build_dataset(rows, tmp_path, slice_count=4, split_seed=3)
    b = build_dataset(rows, tmp_path, slice_count=4, split_seed=3)
    for pa, pb in zip(a.partitions().values(), b.partitions().values()):
        assert [s.subject_id for s in pa] == [s.subject_id for s in pb]
        assert all(np.array_equal(x.slices, y.slices) for x, y in zip(pa, pb))


def test_build_dataset_duplicate_subject(tmp_path):
    rows = [SubjectRecord("dup", "source", 0.0), SubjectRecord("dup", "source", 1.0)]
    with pytest.raises(DataError, match="duplicate"):
        build_dataset(rows, tmp_path, slice_count=4)


def test_build_dataset_missing_volume(tmp_path):
    rows = [SubjectRecord("a", "source", 0.0), SubjectRecord("b", "source", 1.0)]
    _write_subject_volume(tmp_path, "a", seed=0)
    with pytest.raises(DataError, match="missing volume"):
        build_dataset(rows, tmp_path, slice_count=4)


def test_build_dataset_single_class(tmp_path):
    rows = [SubjectRecord("a", "source", 0.0), SubjectRecord("b", "source", 0.0)]
    for sid, seed in (("a", 1), ("b", 2)):
        _write_subject_volume(tmp_path, sid, seed=seed)
    with pytest.raises(DataError, match="both classes"):
        build_dataset(rows, tmp_path, slice_count=4)


# ---------------------------------------------------------------------------
# Intensity window


def test_model_range_roundtrip():
    rng = np.random.default_rng(6)
    x = rng.normal(size=(3, 4, 4)).astype(np.float32)
    window = (-3.0, 3.0)
    mapped = to_model_range(x, window)
    assert mapped.min() >= -1.0 and mapped.max() <= 1.0
    back = from_model_range(mapped, window)
    inside = (x > -3) & (x < 3)
    assert np.abs(back[inside] - x[inside]).max() < 1e-5


def test_intensity_window_orders(tiny_stacks):
    lo, hi = intensity_window(tiny_stacks)
    assert lo < hi


# ---------------------------------------------------------------------------
# Synthetic benchmark


def small_synth(seed=7, **kw):
    base = classification_benchmark_config(seed=seed, subjects_per_class=6)
    return SynthConfig(**{**base.__dict__, "image_size": 32, "slice_count": 4, **kw})


def test_synth_deterministic():
    a_src, a_tgt = synth_generate(small_synth())
    b_src, b_tgt = synth_generate(small_synth())
    for a, b in ((a_src, b_src), (a_tgt, b_tgt)):
        xa = np.stack([s.slices for s in a.all_stacks()])
        xb = np.stack([s.slices for s in b.all_stacks()])
        assert np.array_equal(xa, xb)


def test_synth_nonpositive_counts():
    with pytest.raises(DataError):
        synth_generate(small_synth().__class__(**{**small_synth().__dict__, "subjects_per_class": 0}))


def test_synth_label_independent_without_patterns():
    cfg = small_synth(normal_pattern=None, demented_pattern=None)
    src, _ = synth_generate(cfg)
    # Same generator for both classes: a mean-difference image between the
    # classes should be indistinguishable from noise.
    x0 = np.stack([s.slices for s in src.all_stacks() if s.label == 0])
    x1 = np.stack([s.slices for s in src.all_stacks() if s.label == 1])
    gap = abs(x0.mean() - x1.mean())
    spread = x0.std() / np.sqrt(x0.size)
    assert gap < 20 * spread


def test_synth_linear_probe_separates_source():
    from sklearn.linear_model import LogisticRegression

    src, _ = synth_generate(classification_benchmark_config(seed=0, subjects_per_class=20))
    xtr = np.stack([s.slices.ravel() for s in src.train])
    ytr = np.array([s.label for s in src.train])
    xte = np.stack([s.slices.ravel() for s in src.test])
    yte = np.array([s.label for s in src.test])
    probe = LogisticRegression(max_iter=200).fit(xtr, ytr)
    assert probe.score(xte, yte) >= 0.9


def test_materialize_matches_inmemory(tmp_path):
    cfg = small_synth(seed=3)
    src_mem, tgt_mem = synth_generate(cfg)
    paths = materialize_synth(cfg, tmp_path)
    for domain, mem in (("source", src_mem), ("target", tgt_mem)):
        records = load_manifest(paths[domain]["manifest"])
        split = build_dataset(
            records, paths[domain]["volume_dir"],
            slice_count=cfg.slice_count, split_seed=cfg.seed + 1,
        )
        for part in ("train", "val", "test"):
            a = mem.partitions()[part]
            b = split.partitions()[part]
            assert [s.subject_id for s in a] == [s.subject_id for s in b]
            assert all(np.array_equal(x.slices, y.slices) for x, y in zip(a, b))
            assert [s.label for s in a] == [s.label for s in b]


def test_synth_presets_differ():
    c = classification_benchmark_config(0)
    a = anomaly_benchmark_config(0)
    assert c.normal_pattern is not None and a.normal_pattern is None
    assert a.shift.pattern_scale > 1.0 > c.shift.pattern_scale
