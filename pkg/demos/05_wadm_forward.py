"""
Wavelet attention downsampling
==============================

The module halves the resolution through the Haar transform, pools the
subband stack to two channels, predicts sampling offsets for a deformable
convolution and uses its sigmoid as an attention gate.
"""

import numpy as np

from shadowfreq.wadm import conv2d, deformable_conv, init_wadm_params, wadm_trace

params = init_wadm_params(c_in=3, c_out=8, seed=7)
x = np.random.default_rng(0).random((1, 3, 64, 64))

trace = wadm_trace(x, params)
for name, t in trace.items():
    print(f"{name:>12}: {t.shape}")

# the gate only ever shrinks features
print("gate contracts:", bool(np.all(np.abs(trace["gated"]) <= np.abs(trace["wavelet"]))))

# without offsets the deformable layer is an ordinary convolution
z = trace["pooled"]
diff = deformable_conv(z, np.zeros_like(trace["offsets"]), params.deform) - conv2d(z, params.deform)
print("zero-offset difference:", np.abs(diff).max())
print("mean |offset|:", np.abs(trace["offsets"]).mean())
