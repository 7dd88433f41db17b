# # The attentive recurrent block
#
# Each path inside the model is processed by the same three-stage block: a
# bidirectional LSTM stage, a gated self-attention stage and a feedforward
# stage, all residual. Here we poke at each stage on a small batch of
# sequences.

import torch

from tparn.arn import ARN, attention

torch.manual_seed(0)
x = torch.randn(3, 10, 8)  # 3 sequences, 10 steps, 8 features

block = ARN(8, dropout=0.0)
print("output shape:", block(x).shape)
print("parameters:", sum(p.numel() for p in block.parameters()))

# Attention on its own is scaled dot-product attention. With a single step
# the softmax has one entry, so the values pass straight through.

v = torch.randn(2, 1, 4)
print("single-step attention returns values:", torch.equal(attention(torch.randn(2, 1, 4), torch.randn(2, 1, 4), v), v))

# The learned gate parameters start at zero: the key gate then scales keys
# by sigmoid(0) = 0.5. In eval mode the value gate is computed once and
# cached, which makes eval outputs identical across calls.

att = block.attention
print("initial qp/kp/vp:", att.qp.abs().sum().item(), att.kp.abs().sum().item(), att.vp.abs().sum().item())
block.eval()
print("eval deterministic:", torch.equal(block(x), block(x)))

# Dropping a stage gives the spatial variants used across microphones.

print("attention-only block has rnn:", ARN(8, use_rnn=False).rnn is not None)
print("rnn-only block has attention:", ARN(8, use_attention=False).attention is not None)
