"""Shared fixtures-as-functions for the test suite."""

import math
import warnings

from learnquad.levy import (
    Lattice,
    LatticeField,
    LevyLaw,
    SmoothingParams,
    continuum_point_variance,
    noise_density,
    sample_noise,
    smooth_field,
)

ROUGH_LATTICE = Lattice(65)
ROUGH_PARAMS = SmoothingParams(alpha=3.0, m2=25.0)


def lognormal_field(seed, variance=0.5, law=None):
    """Gaussian log-conductivity with visible spatial variation, scaled to ``variance``."""
    law = law or LevyLaw.gaussian(0.5)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        field = smooth_field(noise_density(sample_noise(ROUGH_LATTICE, law, seed)), ROUGH_PARAMS, "continuum")
    scale = math.sqrt(variance / continuum_point_variance(law, ROUGH_PARAMS, ROUGH_LATTICE))
    return LatticeField(ROUGH_LATTICE, scale * field.values)
