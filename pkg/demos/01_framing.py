# # Framing and chunking a multichannel waveform
#
# The network never sees raw samples. A [P, N] waveform is cut into short
# overlapping frames, the frames are grouped into overlapping chunks, and
# after processing both steps are undone by overlap-add. This script walks
# through the shapes and checks the round trip is exact.

import numpy as np

from tparn.framing import chunk_frames, frame_signal, overlap_add_chunks, overlap_add_frames

rng = np.random.default_rng(0)
wave = rng.standard_normal((4, 16000))  # four microphones, one second at 16 kHz

# Frames of 16 samples with a hop of 8. The signal is zero-padded on the
# right just enough for the last frame to fit.

frames = frame_signal(wave, frame_size=16, frame_shift=8)
print("frames:", frames.data.shape, "padding:", frames.pad_len)

# Chunks of 126 frames with a hop of 63 give the 4-d layout [P, C, R, L].

chunks = chunk_frames(frames, chunk_size=126, chunk_shift=63)
print("chunks:", chunks.data.shape, "frame padding:", chunks.frame_pad)

# Undo both steps. Each sample is covered by up to two frames and each frame
# by up to two chunks; overlap-add divides by the coverage count.

frame_data = overlap_add_chunks(chunks, frames.num_frames)
restored = overlap_add_frames(type(frames)(frame_data, 16, 8, frames.pad_len), wave.shape[1])
print("max round-trip error:", np.abs(restored - wave).max())

# Very short inputs still work: one frame and one chunk, padded with zeros.

tiny = frame_signal(np.ones((1, 5)), 16, 8)
print("5 samples ->", tiny.data.shape, "with", tiny.pad_len, "zeros appended")
