"""Random band-limited data shared by the test modules."""

import numpy as np

from mrcf.sphere_harmonics import HarmonicSpectrum


def random_spectrum(rng, l_max, lo=0, hi=None, amp=1.0, real=True, width=None):
    """Gaussian coefficients on degrees ``lo..hi`` scaled by ``amp/(1+l)``.

    ``width`` pads the coefficient array to a larger band limit.
    """
    hi = l_max if hi is None else hi
    L = l_max if width is None else width
    c = np.zeros((L + 1, 2 * L + 1), complex)
    for l in range(lo, hi + 1):
        s = amp / (1.0 + l)
        c[l, L] = rng.normal() * s if real else complex(rng.normal(), rng.normal()) * s
        for m in range(1, l + 1):
            v = complex(rng.normal(), rng.normal()) * s / np.sqrt(2.0)
            c[l, L + m] = v
            c[l, L - m] = (-1) ** m * np.conj(v) if real else complex(rng.normal(), rng.normal()) * s
    return HarmonicSpectrum(c, 0, real)


def y20(theta):
    """Unnormalised zonal degree-2 profile ``(3cos^2 - 1)/2``."""
    return 0.5 * (3.0 * np.cos(theta) ** 2 - 1.0)
