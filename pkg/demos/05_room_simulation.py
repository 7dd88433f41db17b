# # Simulating a room
#
# Training mixtures come from a shoebox room simulator. A scene draws a
# room, a 4-mic circular array, a speech source and several noise sources.
# Image sources model the reflections; only the line-of-sight path of the
# speech counts as the target.

import numpy as np

from tparn.spatializer import beta_to_t60, image_source_rir, propagate_and_mix, sample_scene, t60_to_beta
from tparn.synth import noise_like, speech_like

rng = np.random.default_rng(3)
scene = sample_scene(rng)
print("room:", np.round(scene.room_dims, 2), "T60:", round(scene.t60, 2), "SNR:", round(scene.snr, 2))
print("noise sources:", len(scene.noise_positions))

# The reflection coefficient follows from the T60 through Sabine's formula.

beta = t60_to_beta(scene.t60, scene.room_dims)
print("wall reflection coefficient:", round(beta, 3), "-> T60", round(beta_to_t60(beta, scene.room_dims), 3))

# The first tap of an impulse response sits at the propagation delay with
# 1/(4 pi d) spherical spreading.

rir = image_source_rir(scene.room_dims, scene.speech_pos, scene.mic_positions[0], max_order=6, beta=beta)
dist = np.linalg.norm(np.subtract(scene.speech_pos, scene.mic_positions[0]))
print("direct tap at", np.argmax(rir.taps > 0), "samples; expected", round(16000 * dist / 343.0))

# Mixing scales the noise so the array-wide SNR hits the target.

speech = 0.1 * speech_like(2.0, rng)
noises = [0.1 * noise_like(2.0, rng) for _ in scene.noise_positions]
ex = propagate_and_mix(scene, speech, noises)
print("mixture:", ex.X.shape, "realized SNR:", round(ex.manifest["realized_snr"], 4))
