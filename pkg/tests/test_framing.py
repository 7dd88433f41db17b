import numpy as np
import pytest
import torch
from hypothesis import given, settings, strategies as st

from tparn.framing import (
    chunk_frames,
    frame_signal,
    num_frames,
    overlap_add_chunks,
    overlap_add_frames,
)


def test_frame_exact_fit():
    f = frame_signal(np.arange(32.0)[None], 16, 8)
    assert f.data.shape == (1, 3, 16)
    assert f.pad_len == 0


def test_frame_padding_hand_enumerated():
    w = np.arange(1.0, 21.0)[None]  # samples 0..19 hold 1..20
    f = frame_signal(w, 16, 8)
    assert f.data.shape == (1, 2, 16)
    assert f.pad_len == 4
    # frame 1 covers samples 8..23; 20..23 are padding
    expected = np.concatenate([np.arange(9.0, 21.0), np.zeros(4)])
    np.testing.assert_array_equal(f.data[0, 1], expected)
    np.testing.assert_array_equal(f.data[0, 0], np.arange(1.0, 17.0))


def test_single_frame_is_identity():
    w = np.random.default_rng(0).standard_normal((2, 16))
    f = frame_signal(w, 16, 8)
    assert f.data.shape == (2, 1, 16)
    np.testing.assert_array_equal(f.data[:, 0], w)


def test_short_signal_padded_up_to_one_frame():
    f = frame_signal(np.ones((1, 5)), 16, 8)
    assert f.data.shape == (1, 1, 16)
    assert f.pad_len == 11
    np.testing.assert_array_equal(overlap_add_frames(f, 5), np.ones((1, 5)))


def test_empty_input_rejected():
    with pytest.raises(ValueError, match="empty input"):
        frame_signal(np.zeros((1, 0)), 16, 8)


def test_bad_window_rejected():
    with pytest.raises(ValueError):
        frame_signal(np.zeros((1, 10)), 8, 9)
    with pytest.raises(ValueError):
        chunk_frames(np.zeros((1, 10, 4)), 4, 0)


def test_round_trip_integers_exact():
    w = np.random.default_rng(1).integers(-1000, 1000, size=(3, 101)).astype(float)
    f = frame_signal(w, 16, 8)
    np.testing.assert_array_equal(overlap_add_frames(f, 101), w)


def test_all_ones_coverage_at_edges():
    # interior samples are covered twice, the first and last K once
    out = overlap_add_frames(frame_signal(np.ones((1, 32)), 16, 8), 32)
    np.testing.assert_array_equal(out, np.ones((1, 32)))


def test_inconsistent_length_rejected():
    f = frame_signal(np.ones((1, 32)), 16, 8)
    with pytest.raises(ValueError):
        overlap_add_frames(f, 31)


@pytest.mark.parametrize("t, c, pad", [(126, 1, 0), (189, 2, 0), (100, 1, 26)])
def test_chunk_counts(t, c, pad):
    ch = chunk_frames(np.zeros((1, t, 16)), 126, 63)
    assert ch.data.shape == (1, c, 126, 16)
    assert ch.frame_pad == pad


def test_single_chunk_is_slicing():
    x = np.random.default_rng(2).standard_normal((2, 100, 4))
    ch = chunk_frames(x, 126, 63)
    np.testing.assert_array_equal(ch.data[:, 0, :100], x)
    np.testing.assert_array_equal(overlap_add_chunks(ch, 100), x)


def test_constant_frames_stay_constant():
    x = np.full((1, 300, 3), 2.5)
    np.testing.assert_allclose(overlap_add_chunks(chunk_frames(x, 126, 63), 300), x, atol=1e-15)


def test_chunk_layout_matches_frames():
    x = np.random.default_rng(3).standard_normal((2, 10, 3))
    ch = chunk_frames(x, 4, 2)
    for c in range(ch.num_chunks):
        for r in range(4):
            t = 2 * c + r
            want = x[:, t] if t < 10 else 0.0
            np.testing.assert_array_equal(ch.data[:, c, r], want)


@settings(max_examples=60, deadline=None)
@given(
    p=st.integers(1, 4),
    n=st.integers(1, 400),
    size=st.integers(1, 20),
    data=st.data(),
)
def test_frame_round_trip_property(p, n, size, data):
    shift = data.draw(st.integers(1, size))
    w = np.random.default_rng(n * 31 + size).standard_normal((p, n))
    f = frame_signal(w, size, shift)
    assert f.pad_len < shift or n < size
    assert np.max(np.abs(overlap_add_frames(f, n) - w)) < 1e-12


@settings(max_examples=60, deadline=None)
@given(
    t=st.integers(1, 300),
    size=st.integers(1, 40),
    data=st.data(),
)
def test_chunk_round_trip_property(t, size, data):
    shift = data.draw(st.integers(1, size))
    x = np.random.default_rng(t * 7 + size).standard_normal((2, t, 3))
    ch = chunk_frames(x, size, shift)
    assert ch.frame_pad < shift or t < size
    assert np.max(np.abs(overlap_add_chunks(ch, t) - x)) < 1e-12


def test_channel_permutation_commutes_with_framing():
    w = np.random.default_rng(4).standard_normal((3, 77))
    perm = [2, 0, 1]
    np.testing.assert_array_equal(frame_signal(w[perm]).data, frame_signal(w).data[perm])


def test_torch_matches_numpy_and_keeps_grad():
    w = np.random.default_rng(5).standard_normal((2, 3, 150))
    wt = torch.tensor(w, requires_grad=True)
    f_np, f_t = frame_signal(w), frame_signal(wt)
    np.testing.assert_array_equal(f_t.data.detach().numpy(), f_np.data)
    ch_np, ch_t = chunk_frames(f_np, 6, 3), chunk_frames(f_t, 6, 3)
    np.testing.assert_array_equal(ch_t.data.detach().numpy(), ch_np.data)
    frames = overlap_add_chunks(ch_t, f_t.num_frames)
    f_t.data = frames
    out = overlap_add_frames(f_t, 150)
    assert torch.max(torch.abs(out - wt)) < 1e-12
    out.sum().backward()
    # the round trip is the identity, so d(sum)/dw is all ones
    np.testing.assert_allclose(wt.grad.numpy(), 1.0, atol=1e-12)


def test_num_frames_helper():
    assert num_frames(32) == 3
    assert num_frames(20) == 2
    assert num_frames(1) == 1
