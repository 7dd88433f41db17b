# # The triple-path model
#
# Each block runs its attentive recurrent stages along three axes of the
# [B, P, C, R, D] feature tensor: within a chunk, across chunks, and across
# microphones. This script builds a small model, lists its parameters per
# block, and runs it as MIMO and as MISO.

import torch

from tparn.model import TPARN, TparnConfig, param_report, reshape_for_path

cfg = TparnConfig(dim=32, num_blocks=4)
model = TPARN(cfg).eval()
print("spatial stages in blocks:", cfg.spatial_blocks)
for name, count in param_report(model).items():
    print(f"  {name:>8}: {count}")

# The three reshapes. For one 4-mic second of audio with the default
# framing there are 5 chunks of 126 frames.

feats = torch.zeros(1, 4, 5, 126, 32)
for path in ("intra", "inter", "spatial"):
    seq, _ = reshape_for_path(feats, path)
    print(f"{path:>8} path sequences:", tuple(seq.shape))

# MIMO enhances every microphone. MISO averages the final features over
# microphones and decodes a single channel.

wave = 0.05 * torch.randn(4, 16000)
with torch.no_grad():
    print("MIMO output:", tuple(model(wave).shape))
    print("MISO output:", tuple(model(wave, output_mode="MISO").shape))

# Inputs are normalized to unit RMS inside the model, so scaling the input
# scales the output by the same factor.

with torch.no_grad():
    ratio = (model(3 * wave) / model(wave)).mean().item()
print("output ratio for a 3x louder input:", round(ratio, 6))
