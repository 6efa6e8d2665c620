import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gazesynth.events import (EventKind, assemble_scanpath, extract_stable_bins, idt_labels,
                              idt_segment, samples_for_ms)
from gazesynth.signal import VelocitySequence

from conftest import make_recording


def two_fixations(rng, n1, m, n2, amplitude, angle, jitter=0.1):
    """Fixation at the origin, linear saccade, fixation at the landing point."""
    d = amplitude * np.array([np.cos(angle), np.sin(angle)])
    ramp = np.outer(d, np.arange(1, m + 1) / m)
    pos = np.concatenate([np.zeros((2, n1)), ramp, np.tile(d[:, None], (1, n2))], axis=1)
    pos += rng.uniform(-jitter, jitter, pos.shape)
    return make_recording(pos[0], pos[1])


def brute_force_bins(fixations, size):
    count = 0
    for seg in fixations:
        n = seg.end_index - seg.start_index
        while n >= size:
            count += 1
            n -= size
    return count


def test_idt_single_fixation_covers_everything():
    rec = make_recording(np.zeros(300), np.zeros(300))
    segs = idt_segment(rec)
    assert len(segs) == 1 and segs[0].kind is EventKind.FIXATION
    assert (segs[0].start_index, segs[0].end_index) == (0, 300)


def test_idt_no_fixation_for_fast_ramp():
    x = np.linspace(0, 30, 300)
    segs = idt_segment(make_recording(x, np.zeros(300)))
    assert [s.kind for s in segs] == [EventKind.SACCADE]


@given(seed=st.integers(0, 10_000))
@settings(max_examples=30, deadline=None)
def test_idt_recovers_constructed_boundaries(seed):
    rng = np.random.default_rng(seed)
    n1, m, n2 = rng.integers(150, 400), rng.integers(10, 40), rng.integers(150, 400)
    rec = two_fixations(rng, n1, m, n2, rng.uniform(5, 20), rng.uniform(0, 2 * np.pi))
    segs = idt_segment(rec)
    kinds = [s.kind for s in segs]
    assert kinds == [EventKind.FIXATION, EventKind.SACCADE, EventKind.FIXATION]
    assert abs(segs[0].end_index - n1) <= 5
    assert abs(segs[2].start_index - (n1 + m)) <= 5


def test_segments_tile_the_recording(hss_recording):
    segs = idt_segment(hss_recording)
    assert segs[0].start_index == 0 and segs[-1].end_index == hss_recording.n_samples
    for a, b in zip(segs, segs[1:]):
        assert a.end_index == b.start_index
    for s in segs:
        assert len(s.velocity) == s.n_samples
        if s.kind is EventKind.FIXATION:
            assert s.n_samples >= 100


def test_idt_ignores_windows_with_nan():
    x = np.zeros(300)
    x[140:160] = np.nan
    spans = idt_labels(x, np.zeros(300), 1.0, 100)
    assert spans == [(0, 140), (160, 300)]


def test_idt_rejects_bad_thresholds():
    rec = make_recording(np.zeros(50), np.zeros(50))
    with pytest.raises(ValueError):
        idt_segment(rec, dispersion_threshold_deg=0.0)


@given(lengths=st.lists(st.integers(1, 500), min_size=1, max_size=8),
       rate=st.sampled_from([250.0, 500.0, 1000.0]))
@settings(max_examples=60, deadline=None)
def test_bin_counts_match_counting_oracle(lengths, rate):
    # lay fixations out back to back; binning only looks at fixation spans
    total = sum(lengths)
    rec = make_recording(np.zeros(total), np.zeros(total), rate=rate, tx=np.zeros(total), ty=np.zeros(total))
    from gazesynth.events import EventSegment
    segs, start = [], 0
    v = VelocitySequence(rate, np.zeros(total), np.zeros(total))
    for n in lengths:
        segs.append(EventSegment(EventKind.FIXATION, start, start + n, v.slice(start, start + n),
                                 (0.0, 0.0), (0.0, 0.0)))
        start += n
    size = samples_for_ms(80.0, rate)
    bins = extract_stable_bins(segs, rec, 80.0)
    assert len(bins) == brute_force_bins(segs, size)
    for b in bins:
        assert b.gaze.shape == (2, size) and b.target.shape == (2, size)
        assert b.fixation.start_index <= b.start_index
        assert b.start_index + size <= b.fixation.end_index


def test_bins_reject_saccades(hss_recording):
    segs = idt_segment(hss_recording)
    sac = [s for s in segs if s.kind is EventKind.SACCADE]
    with pytest.raises(ValueError):
        extract_stable_bins(sac, hss_recording)


def test_assemble_scanpath_lengths_and_differences(rng):
    fix = [VelocitySequence(1000.0, *rng.normal(0, 5, (2, 100))) for _ in range(3)]
    sac = [VelocitySequence(1000.0, *rng.normal(0, 300, (2, 30))) for _ in range(2)]
    rec = assemble_scanpath(fix, sac, 3, start_pos=(1.0, -2.0))
    assert rec.n_samples == 3 * 100 + 2 * 30
    v = np.concatenate([fix[0].data, sac[0].data, fix[1].data, sac[1].data, fix[2].data], axis=1)
    np.testing.assert_allclose(np.diff(rec.positions, axis=1), v[:, :-1] / 1000.0, atol=1e-12)
    assert (rec.x_deg[0], rec.y_deg[0]) == (1.0, -2.0)
    one = assemble_scanpath(fix, [], 1)
    assert one.n_samples == 100
    with pytest.raises(ValueError):
        assemble_scanpath(fix, sac, 0)
    with pytest.raises(ValueError):
        assemble_scanpath(fix[:1], sac, 2)
