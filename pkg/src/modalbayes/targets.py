"""Closed-form sampling targets for validating the chain machinery
without any structural model in the loop."""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GaussianBump1D:
    """exp(-(x - mean)^2 / (2 std^2)) on [0, 1]; peak value 1."""

    mean: float = 0.5
    std: float = 0.1

    name = "gauss1d"
    n = 1

    @property
    def box(self):
        return np.array([[0.0, 1.0]])

    def posterior(self, alpha):
        x = float(np.asarray(alpha).ravel()[0])
        if not 0.0 <= x <= 1.0:
            return 0.0
        return float(np.exp(-0.5 * ((x - self.mean) / self.std) ** 2))


# Bump centers sit at the centers of 1/20-wide bins so the peak occupancy
# bin of a well-mixed chain is unambiguous.
MIXTURE_CENTERS = (
    (0.225, 0.225),
    (0.225, 0.775),
    (0.775, 0.225),
    (0.775, 0.775),
)


@dataclass(frozen=True)
class IsotropicMixture2D:
    """Sum of four isotropic Gaussian bumps on [0, 1]^2; each peak is
    approximately 1 and the centers are far apart compared to the std."""

    std: float = 0.03
    centers: tuple = MIXTURE_CENTERS

    name = "mixture2d-4"
    n = 2

    @property
    def box(self):
        return np.array([[0.0, 1.0], [0.0, 1.0]])

    def posterior(self, alpha):
        x = np.asarray(alpha, dtype=float).ravel()
        if np.any(x < 0.0) or np.any(x > 1.0):
            return 0.0
        c = np.asarray(self.centers, dtype=float)
        d2 = ((c - x) ** 2).sum(axis=1)
        return float(np.sum(np.exp(-0.5 * d2 / self.std**2)))


@dataclass(frozen=True)
class Plateau:
    """Constant target on [0, 1]^n: every in-box candidate is accepted."""

    n: int = 2

    name = "plateau"

    @property
    def box(self):
        return np.array([[0.0, 1.0]] * self.n)

    def posterior(self, alpha):
        x = np.asarray(alpha, dtype=float).ravel()
        if np.any(x < 0.0) or np.any(x > 1.0):
            return 0.0
        return 1.0


def registry():
    """Named benchmark targets."""
    return {
        "gauss1d": GaussianBump1D(),
        "mixture2d-4": IsotropicMixture2D(),
        "plateau": Plateau(),
    }
