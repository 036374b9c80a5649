"""Unnormalized Bayesian posterior of a coefficient sample.

Two likelihood variants are supported:

* ``freq_mac``: per-mode Gaussian factors on the relative frequency error
  and on (1 - MAC), multiplied over the q compared modes.
* ``pointwise``: per-entry Gaussian factors on signed sensor-amplitude
  differences, multiplied over all s x q entries.

The prior is uniform on a box, so inside the box the posterior equals the
likelihood (which peaks at exactly 1 for a perfect match) and outside it is
zero.  Exponents are accumulated in log space and exponentiated once.
"""

from dataclasses import dataclass, field

import numpy as np

from . import fe_core
from .errors import (
    DegenerateShape,
    EvaluationFailure,
    InvalidMeasurement,
    InvalidModel,
    ModalBayesError,
)

VARIANT_FREQ_MAC = "freq_mac"
VARIANT_POINTWISE = "pointwise"

PAIRING_INDEX = "index"
PAIRING_MAC = "mac"


@dataclass(frozen=True)
class NoiseModel:
    """Variability coefficients scaling the measured quantities.

    ``per_mode`` is a length-q vector used by the freq_mac variant (the
    same value weights the frequency and the MAC factor of mode i).
    ``per_entry`` is an s x q matrix used by the pointwise variant.
    """

    per_mode: np.ndarray | None = None
    per_entry: np.ndarray | None = None

    def __post_init__(self):
        if (self.per_mode is None) == (self.per_entry is None):
            raise InvalidMeasurement("noise model needs per_mode or per_entry, not both")
        arr = self.per_mode if self.per_mode is not None else self.per_entry
        arr = np.asarray(arr, dtype=float)
        if np.any(arr <= 0.0):
            raise InvalidMeasurement("noise coefficients must be strictly positive")
        if self.per_mode is not None:
            object.__setattr__(self, "per_mode", arr)
        else:
            object.__setattr__(self, "per_entry", arr)

    @classmethod
    def for_modes(cls, eta, q):
        """Per-mode coefficients; a scalar eta is shared by all q modes."""
        eta = np.broadcast_to(np.asarray(eta, dtype=float), (q,)).copy()
        return cls(per_mode=eta)

    @classmethod
    def for_entries(cls, eta, s, q):
        """Per-entry coefficients; a scalar eta is shared by all s x q entries."""
        eta = np.broadcast_to(np.asarray(eta, dtype=float), (s, q)).copy()
        return cls(per_entry=eta)


def mac(a, b):
    """Modal assurance criterion |a.b|^2 / (|a|^2 |b|^2), in [0, 1]."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise InvalidMeasurement(f"shape vectors differ in length: {a.size} vs {b.size}")
    aa = float(a @ a)
    bb = float(b @ b)
    if aa == 0.0 or bb == 0.0:
        raise DegenerateShape("MAC of a zero vector is undefined")
    return float((a @ b) ** 2 / (aa * bb))


def freq_error(pred, meas):
    """Sum of relative absolute frequency errors."""
    pred = np.asarray(pred, dtype=float)
    meas = np.asarray(meas, dtype=float)
    if pred.shape != meas.shape:
        raise InvalidMeasurement("frequency vectors differ in length")
    if np.any(meas <= 0.0):
        raise InvalidMeasurement("measured frequencies must be positive")
    return float(np.sum(np.abs(pred - meas) / meas))


def shape_delta(pred, meas):
    """Entrywise sensor-amplitude differences (prediction minus measurement)."""
    pred = np.asarray(pred, dtype=float)
    meas = np.asarray(meas, dtype=float)
    if pred.shape != meas.shape:
        raise InvalidMeasurement(
            f"shape matrices differ: {pred.shape} vs {meas.shape}"
        )
    return pred - meas


def align_shape_signs(pred, meas):
    """Flip predicted mode columns whose inner product with the measured
    column is negative.  Eigenvector sign is arbitrary; signed pointwise
    comparison is not."""
    pred = np.array(pred, dtype=float, copy=True)
    meas = np.asarray(meas, dtype=float)
    if pred.shape != meas.shape:
        raise InvalidMeasurement(
            f"shape matrices differ: {pred.shape} vs {meas.shape}"
        )
    for k in range(pred.shape[1]):
        if float(pred[:, k] @ meas[:, k]) < 0.0:
            pred[:, k] = -pred[:, k]
    return pred


def pair_modes(pred, meas, method=PAIRING_INDEX):
    """Map measured mode k to a predicted mode index.

    The default identity pairing matches modes by ascending frequency
    order.  ``method='mac'`` greedily assigns each measured mode to the
    unused predicted mode with the highest MAC, exposing mode crossings.
    """
    q = meas.q
    if pred.frequencies.size < q:
        raise InvalidMeasurement(
            f"prediction has {pred.frequencies.size} modes, measurement needs {q}"
        )
    if method == PAIRING_INDEX:
        return np.arange(q)
    if method != PAIRING_MAC:
        raise InvalidMeasurement(f"unknown pairing method {method!r}")
    available = list(range(pred.frequencies.size))
    pairing = np.empty(q, dtype=int)
    for k in range(q):
        scores = [mac(pred.shapes[:, j], meas.shapes[:, k]) for j in available]
        choice = available[int(np.argmax(scores))]
        pairing[k] = choice
        available.remove(choice)
    return pairing


@dataclass
class ObjectiveSpec:
    """Everything needed to score one coefficient vector.

    Attributes:
        model: structural model to evaluate.
        sensors: measured DOFs (post-constraint numbering).
        q: number of compared modes.
        measurement: the evidence.
        noise: variability coefficients matching the variant.
        prior_box: (n, 2) array of per-dimension [lo, hi] bounds.
        variant: 'freq_mac' or 'pointwise'.
        pairing: 'index' (default) or 'mac'.
    """

    model: fe_core.StructuralModel
    sensors: fe_core.SensorSelection
    q: int
    measurement: fe_core.ModalMeasurement
    noise: NoiseModel
    prior_box: np.ndarray
    variant: str = VARIANT_FREQ_MAC
    pairing: str = PAIRING_INDEX

    def __post_init__(self):
        self.prior_box = np.asarray(self.prior_box, dtype=float)
        n = self.model.n_segments
        if self.prior_box.shape != (n, 2):
            raise InvalidModel(f"prior box must have shape ({n}, 2)")
        if np.any(self.prior_box[:, 1] <= self.prior_box[:, 0]):
            raise InvalidModel("prior box is degenerate")
        self.sensors.validate_for(self.model.n_dof)
        if self.measurement.q != self.q:
            raise InvalidMeasurement(
                f"measurement has {self.measurement.q} modes, expected {self.q}"
            )
        if self.measurement.n_sensors != self.sensors.count:
            raise InvalidMeasurement(
                f"measurement has {self.measurement.n_sensors} sensor rows, "
                f"selection has {self.sensors.count}"
            )
        if self.variant == VARIANT_FREQ_MAC:
            if self.noise.per_mode is None or self.noise.per_mode.shape != (self.q,):
                raise InvalidMeasurement("freq_mac variant needs per-mode noise of length q")
        elif self.variant == VARIANT_POINTWISE:
            expect = (self.sensors.count, self.q)
            if self.noise.per_entry is None or self.noise.per_entry.shape != expect:
                raise InvalidMeasurement(f"pointwise variant needs {expect} per-entry noise")
            if np.any(self.measurement.shapes == 0.0):
                raise InvalidMeasurement(
                    "pointwise variant cannot scale by a zero measured amplitude"
                )
        else:
            raise InvalidModel(f"unknown likelihood variant {self.variant!r}")

    @property
    def n(self):
        return self.model.n_segments

    @property
    def box(self):
        return self.prior_box

    def in_box(self, alpha):
        alpha = np.asarray(alpha, dtype=float)
        return bool(
            np.all(alpha >= self.prior_box[:, 0]) and np.all(alpha <= self.prior_box[:, 1])
        )

    def predict(self, alpha):
        """Modal prediction at alpha; failures surface as EvaluationFailure."""
        try:
            return fe_core.solve_modes(self.model, alpha, self.q, sensors=self.sensors)
        except ModalBayesError as exc:
            raise EvaluationFailure(f"model evaluation failed at {alpha}: {exc}") from exc

    def posterior(self, alpha):
        return posterior(alpha, self)


def likelihood_freq_mac(pred, spec):
    """Product of per-mode frequency-error and MAC Gaussian factors."""
    meas = spec.measurement
    eta = spec.noise.per_mode
    idx = pair_modes(pred, meas, spec.pairing)
    freqs = pred.frequencies[idx]
    if np.any(meas.frequencies <= 0.0):
        raise InvalidMeasurement("measured frequencies must be positive")
    log_l = 0.0
    for k in range(spec.q):
        gamma = mac(pred.shapes[:, idx[k]], meas.shapes[:, k])
        rel = (freqs[k] - meas.frequencies[k]) / (eta[k] * meas.frequencies[k])
        log_l -= 0.5 * rel**2 + 0.5 * ((1.0 - gamma) / eta[k]) ** 2
    return float(np.exp(log_l))


def likelihood_pointwise(pred, spec):
    """Product of per-entry Gaussian factors on signed shape differences."""
    meas = spec.measurement
    if np.any(meas.shapes == 0.0):
        raise InvalidMeasurement(
            "pointwise likelihood cannot scale by a zero measured amplitude"
        )
    idx = pair_modes(pred, meas, spec.pairing)
    aligned = align_shape_signs(pred.shapes[:, idx], meas.shapes)
    delta = shape_delta(aligned, meas.shapes)
    scaled = delta / (spec.noise.per_entry * meas.shapes)
    return float(np.exp(-0.5 * np.sum(scaled**2)))


def posterior(alpha, spec):
    """Unnormalized posterior: 0 outside the prior box, else the selected
    likelihood.  FE failures are raised as EvaluationFailure so campaign
    code can score the sample as zero and keep going."""
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (spec.n,):
        raise InvalidModel(
            f"sample has shape {alpha.shape}, objective expects ({spec.n},)"
        )
    if not spec.in_box(alpha):
        return 0.0
    pred = spec.predict(alpha)
    if spec.variant == VARIANT_FREQ_MAC:
        return likelihood_freq_mac(pred, spec)
    return likelihood_pointwise(pred, spec)
