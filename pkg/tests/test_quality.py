import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gazesynth.quality import (EventsConfig, MetricsConfig, MissingTargetError, QualityReport,
                               build_report, cell_name, similarity_report, spatial_accuracy,
                               spatial_precision, ue_percentile, validate_report)

from conftest import make_recording
from oracles import percentile_oracle, s2s_oracle, ue_oracle

error_maps = st.dictionaries(
    st.text("abcdefgh", min_size=1, max_size=3),
    st.lists(st.floats(0, 10, allow_nan=False), min_size=1, max_size=20),
    min_size=1, max_size=10)
pct = st.floats(0, 100)


def bin_of(x, y, tx=None, ty=None):
    gaze = np.vstack([x, y]).astype(float)
    target = None if tx is None else np.vstack([tx, ty]).astype(float)
    return gaze, target


def test_accuracy_examples():
    z = np.zeros(8)
    assert spatial_accuracy(bin_of(z, z, z, z)) == 0.0
    assert spatial_accuracy(bin_of(z + 1, z, z, z)) == 1.0
    assert spatial_accuracy(bin_of(z + 3, z + 4, z, z)) == 5.0
    with pytest.raises(MissingTargetError, match="task has no target signal"):
        spatial_accuracy(bin_of(z, z))


def test_precision_examples():
    assert spatial_precision(bin_of(np.full(5, 2.0), np.ones(5))) == 0.0
    x = np.array([0, 0.1, 0, 0.1, 0, 0.1])
    assert spatial_precision(bin_of(x, np.zeros(6))) == pytest.approx(0.1, abs=1e-15)
    with pytest.raises(ValueError):
        spatial_precision(bin_of([1.0], [1.0]))
    with pytest.raises(ValueError):
        spatial_precision(bin_of(x, x), method="median")


@given(seed=st.integers(0, 10_000), c=st.floats(0.01, 100), shift=st.floats(-50, 50))
@settings(max_examples=50)
def test_metric_oracles_and_invariances(seed, c, shift):
    rng = np.random.default_rng(seed)
    x, y, tx, ty = rng.normal(0, 1, (4, 20))
    b = bin_of(x, y, tx, ty)
    assert spatial_precision(b) == pytest.approx(s2s_oracle(list(x), list(y)), rel=1e-12)
    moved = bin_of(x + shift, y - shift, tx + shift, ty - shift)
    assert spatial_accuracy(moved) == pytest.approx(spatial_accuracy(b), abs=1e-9)
    assert spatial_precision(moved) == pytest.approx(spatial_precision(b), abs=1e-9)
    for method in ("s2s", "centroid"):
        assert spatial_precision(bin_of(c * x, c * y), method) == pytest.approx(
            c * spatial_precision(b, method), rel=1e-9)


def test_ue_examples():
    assert ue_percentile({"a": [1, 2, 3]}, 50, 50) == 2.0
    assert ue_percentile({"a": [1.5] * 4, "b": [1.5]}, 95, 5) == 1.5
    assert ue_percentile({"a": [1], "b": [2], "c": [9]}, 50, 50) == 2.0
    with pytest.raises(ValueError):
        ue_percentile({}, 50, 50)
    with pytest.raises(ValueError):
        ue_percentile({"a": []}, 50, 50)
    assert cell_name(95, 50) == "U95|E50"


@given(errors=error_maps, U=pct, E=pct)
@settings(max_examples=200)
def test_ue_matches_two_stage_oracle(errors, U, E):
    assert ue_percentile(errors, U, E) == pytest.approx(ue_oracle(errors, U, E), abs=1e-12)


@given(errors=error_maps, a=pct, b=pct, fixed=pct)
@settings(max_examples=100)
def test_ue_monotone(errors, a, b, fixed):
    lo, hi = min(a, b), max(a, b)
    assert ue_percentile(errors, fixed, lo) <= ue_percentile(errors, fixed, hi) + 1e-12
    assert ue_percentile(errors, lo, fixed) <= ue_percentile(errors, hi, fixed) + 1e-12


def test_percentile_oracle_sanity():
    assert percentile_oracle([3, 1, 2], 50) == 2
    assert percentile_oracle([0, 10], 25) == 2.5


def two_fixation_recording(subject="S000", task="FXS", offset=0.0, jitter=0.0, seed=0):
    rng = np.random.default_rng(seed)
    tx = np.concatenate([np.zeros(400), np.full(400, 5.0)])
    ty = np.zeros(800)
    x = tx + offset + rng.uniform(-jitter, jitter, 800)
    y = ty + rng.uniform(-jitter, jitter, 800)
    return make_recording(x, y, subject=subject, task=task, tx=tx, ty=ty)


def test_report_gaze_equals_target_gives_zero_accuracy():
    recs = [two_fixation_recording(s) for s in ("S000", "S001")]
    rep = build_report(recs, model_label="truth")
    assert rep.n_bins["FXS"] == 2 * 2 * 5
    for v in rep.tables["FXS"]["accuracy_dva"].values():
        assert v == 0.0


def test_report_offset_and_precision():
    recs = [two_fixation_recording("S000", offset=0.5, jitter=0.05, seed=1),
            two_fixation_recording("S001", offset=1.0, jitter=0.05, seed=2)]
    rep = build_report(recs)
    acc = rep.tables["FXS"]["accuracy_dva"]
    assert acc["U50|E50"] == pytest.approx(0.75, abs=0.02)
    assert acc["U95|E95"] == pytest.approx(0.975, abs=0.02)
    assert 0 < rep.tables["FXS"]["precision_rms_dva"]["U50|E50"] < 0.1
    d = json.loads(rep.to_json())
    validate_report(d)
    back = QualityReport.from_dict(d)
    assert back.to_json() == rep.to_json()


def test_report_is_order_free_and_skips_targetless_accuracy():
    recs = [two_fixation_recording(s, jitter=0.05, seed=i) for i, s in enumerate("ABC")]
    a = build_report(recs).to_json()
    b = build_report(recs[::-1]).to_json()
    assert a == b
    free = make_recording(np.zeros(300), np.zeros(300), task="FRE")
    rep = build_report([free])
    assert "accuracy_dva" not in rep.tables["FRE"]
    assert rep.tables["FRE"]["precision_rms_dva"]["U50|E50"] == 0.0


def test_centroid_method_and_custom_cells():
    recs = [two_fixation_recording(jitter=0.05)]
    rep = build_report(recs, EventsConfig(bin_ms=40.0), MetricsConfig(((50, 50), (50, 95)), "centroid"))
    assert set(rep.tables["FXS"]["precision_rms_dva"]) == {"U50|E50", "U50|E95"}
    assert rep.precision_method == "centroid"
    assert rep.n_bins["FXS"] == 20


def test_validate_report_rejects_non_monotone():
    d = build_report([two_fixation_recording(jitter=0.05)]).to_dict()
    d["tables"]["FXS"]["precision_rms_dva"] = {"U50|E50": 0.2, "U50|E95": 0.1}
    with pytest.raises(ValueError):
        validate_report(d)
    d["tables"]["FXS"]["precision_rms_dva"] = {"U50|E50": -1.0}
    with pytest.raises(Exception):
        validate_report(d)


def test_csv_and_svg_outputs():
    rep = build_report([two_fixation_recording(jitter=0.05)], model_label="m",
                       similarity={"FXS": 0.5})
    csv_text = rep.to_csv()
    assert csv_text.splitlines()[0] == "model,task,metric,cell,value"
    assert "m,FXS,cosine_similarity,mean,0.5" in csv_text
    svg = rep.to_svg()
    assert svg.startswith("<?xml") and svg == rep.to_svg()


@pytest.fixture(scope="module")
def hss_pair():
    from gazesynth.data import TaskSettings, default_profiles, simulate_recording
    p = default_profiles(2, seed=0)[0]
    return [simulate_recording(p, TaskSettings(task="HSS", duration_s=4.0), session=s) for s in (0, 1)]


def test_similarity_identical_is_one(hss_pair):
    per_task, pairs = similarity_report([hss_pair[0]], [hss_pair[0]])
    assert per_task["HSS"] == pytest.approx(1.0, abs=1e-12)
    assert pairs == [("S000", "HSS", per_task["HSS"])]


def test_similarity_noise_scores_lower(hss_pair):
    real = hss_pair[0]
    rng = np.random.default_rng(0)
    noise = make_recording(np.cumsum(rng.normal(0, 0.5, real.n_samples)),
                           np.cumsum(rng.normal(0, 0.5, real.n_samples)), task="HSS")
    matched, _ = similarity_report([real], [hss_pair[1]])
    noisy, _ = similarity_report([real], [noise])
    back, _ = similarity_report([noise], [real])
    assert noisy["HSS"] < matched["HSS"]
    assert back["HSS"] == pytest.approx(noisy["HSS"], abs=1e-12)


def test_similarity_requires_pairs(hss_pair):
    other = make_recording(np.zeros(3000), np.zeros(3000), subject="S009", task="HSS")
    with pytest.raises(ValueError, match="S009/HSS"):
        similarity_report([hss_pair[0]], [other])
    with pytest.raises(ValueError, match="duplicate"):
        similarity_report(hss_pair, hss_pair)
