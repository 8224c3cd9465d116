"""
Spectral and subband losses
===========================

The frequency loss mixes a squared error on the V and D Haar subbands with a
focal frequency term that reweights every DFT bin by its own error.
"""

import numpy as np

from shadowfreq.losses import loss_ff, loss_frequency
from shadowfreq.spectrum import dft2, spectral_weight
from shadowfreq.synthetic import planckian_pair

# two-sample worked case: spectra [2, 0] and [1, 1]
real, fake = np.array([[1.0, 1.0]]), np.array([[1.0, 0.0]])
print("F_r =", dft2(real).ravel(), " F_f =", dft2(fake).ravel())
print("weights:", spectral_weight(dft2(real), dft2(fake)).ravel())
print("L_FF =", loss_ff(real, fake).value)

# alpha = 0 switches the focusing off and leaves a plain spectral MSE
print("L_FF(alpha=0) =", loss_ff(real, fake, alpha=0.0).value)

# on a shadow pair: the shadow image plays the generated side
pair = planckian_pair(seed=1)
rep = loss_frequency(pair.shadow, pair.free)
print(rep.name, rep.value, rep.components)

# lambda1 and lambda2 weight the two branches
print(loss_frequency(pair.shadow, pair.free, lambda1=1.0, lambda2=0.0).value)
