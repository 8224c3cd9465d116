"""
Shadow-free chromaticity by entropy minimisation
================================================

Pixels of one material under varying light lie on a line in log-chromaticity
space. Projecting across that line collapses each material to a point, which
is the projection with the least entropy.
"""

import math
import tempfile
from pathlib import Path

import numpy as np

from shadowfreq.chromaticity import (illumination_compensate, minimize_entropy,
                                     shadowfree_chromaticity)
from shadowfreq.imagecore import save_image
from shadowfreq.synthetic import planckian_pair, planted_points

# a point cloud with the illumination smear planted along 30 degrees
theta, curve = minimize_entropy(planted_points(seed=0, theta_deg=30.0))
print(f"minimum entropy at {math.degrees(theta):.0f} deg (expected 120), "
      f"entropy {curve.min():.3f} vs max {curve.max():.3f} nats")

# an image crossed by a bluish, dimmer shadow band
pair = planckian_pair(seed=2)
em = shadowfree_chromaticity(pair.shadow)
phy = shadowfree_chromaticity(pair.shadow, normalize_brightness=False)
print(f"theta* {em.theta_star_degrees:.0f} deg; {em.excluded_pixels} pixels too dark to use")
print(f"baseline direction {phy.theta_plane_degrees:.1f} deg, planted {pair.invariant_angle:.1f} deg")

# colour match against the lit part of the input
ic = illumination_compensate(em, pair.shadow, reference="input")
lit = ~pair.mask
print("lit mean input:", np.round(pair.shadow.data[lit].mean(axis=0), 3))
print("lit mean sigma:", np.round(ic.image.data[lit].mean(axis=0), 3))

out = Path(tempfile.mkdtemp())
for name, img in (("input", pair.shadow), ("sigma_em", em.image), ("sigma_ic", ic.image)):
    save_image(img, out / f"{name}.png")
print("maps written to", out)
