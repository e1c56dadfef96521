"""Model-building helpers shared between test modules. Kept out of
conftest.py so they can be imported by name without colliding with other
test directories' conftest modules."""

import numpy as np

from srave import pqmf
from srave.model import Model, ModelConfig


def build_identity_model() -> tuple[Model, "pqmf.PqmfBank"]:
    """Degenerate single-band model whose conversion path is the exact
    identity: every conv is a 1-tap passthrough, the activation slope is 1,
    the batch norm scale cancels to exactly 1, and the amplitude envelope
    saturates to exactly 1."""
    config = ModelConfig(
        num_bands=1,
        content_bands=1,
        latent_dim=1,
        num_classes=2,
        speaker_dim=4,
        encoder_channels=(1,),
        encoder_strides=(),
        residual_units=0,
        input_kernel=1,
        latent_kernel=1,
        head_kernel=1,
        lrelu_slope=1.0,
    )
    model = Model.build(config, expected_hop=None, init_weights=False)
    for layer in (model.enc_in, model.enc_out, model.dec_in, model.wave_head):
        layer.weight[0, 0, 0] = 1.0
    # gain equal to the forward pass's own sqrt(var + eps) makes the scale
    # exactly 1.0 in float32
    bn = model.enc_in_bn
    bn.gain = np.sqrt(bn.var + np.float32(bn.eps))
    model.env_head.bias[:] = 50.0  # sigmoid saturates to exactly 1.0
    return model, pqmf.design_bank(1, 100.0, 1)
