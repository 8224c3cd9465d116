"""
Haar subbands of a shadowed image
=================================

A smooth shadow is mostly a low-frequency event. Comparing the four Haar
subbands of a textured image and a shadowed copy shows which components the
shadow leaves alone.
"""

import numpy as np

from shadowfreq.synthetic import smooth_shadow_pair
from shadowfreq.wavelet import haar_dwt2, haar_idwt2, subband_similarity

x, y = smooth_shadow_pair(seed=0)

# one level of the orthonormal transform: four half-size components
sb = haar_dwt2(x)
print("subband shape:", sb.shape)
print("energy kept:", sum(float(np.sum(c ** 2)) for c in sb), "vs", float(np.sum(x ** 2)))
print("round trip error:", np.max(np.abs(haar_idwt2(sb) - x)))

# per-subband PSNR between the lit image and its shadowed copy
for seed in range(5):
    x, y = smooth_shadow_pair(seed)
    s = subband_similarity(x, y)
    print(f"seed {seed}: A {s.psnr_a:5.1f}  H {s.psnr_h:5.1f}  V {s.psnr_v:5.1f}  D {s.psnr_d:5.1f} dB")

# the detail bands (V and D) stay much closer than the approximation band A
