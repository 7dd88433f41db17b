# # Losses and the SI-SDR metric
#
# Training uses a spectral loss computed on |Re| + |Im| of a Hann STFT. It
# has a speech term and an interference term, where the interference
# estimate is whatever the speech estimate leaves of the mixture.

import numpy as np

from tparn.losses import mse_loss, pcm_loss, si_sdr, sm_loss

rng = np.random.default_rng(1)
speech = rng.standard_normal((2, 8000))
noise = 0.5 * rng.standard_normal((2, 8000))
mix = speech + noise

for name, estimate in [("perfect", speech), ("unprocessed", mix), ("silence", 0 * mix), ("half scale", 0.5 * speech)]:
    rep = pcm_loss(mix, speech, estimate)
    print(f"{name:>12}: pcm {rep.total.item():.4f} (speech {rep.speech_term.item():.4f}, "
          f"interference {rep.interference_term.item():.4f}), mse {mse_loss(speech, estimate).item():.4f}")

# SI-SDR ignores scale, so the half-scale estimate scores the cap while the
# spectral loss still penalizes it.

print("SI-SDR of the half-scale estimate:", si_sdr(0.5 * speech[0], speech[0]))
print("SI-SDR of the mixture:", round(si_sdr(mix[0], speech[0]), 3))
print("spectral magnitude error of the mixture:", round(sm_loss(speech, mix).item(), 4))
