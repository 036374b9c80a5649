"""Small parametrized structural models and their modal solutions.

A model carries a mass matrix, an invariant base stiffness and a stack of
per-segment stiffness matrices.  The global stiffness for a coefficient
vector ``alpha`` is

    K(alpha) = K_base + sum_i K_i * (1 - alpha_i)

with every ``alpha_i`` in [0, 1]: 0 leaves segment i at its nominal
stiffness, 1 removes its contribution entirely.  Modal quantities come from
the undamped generalized eigenproblem ``K(alpha) psi = (2 pi f)^2 M psi``.

Constrained degrees of freedom are eliminated by row/column deletion when a
model is built, so all stored matrices and all DOF indices (sensors
included) refer to the free, post-constraint numbering.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (
    EigenFailure,
    InvalidModel,
    InvalidSensor,
    SingularMass,
)

# Relative residual bound every returned eigenpair must satisfy.
EIGEN_RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class SensorSelection:
    """Measured degrees of freedom, in post-constraint numbering."""

    dof_indices: tuple
    description: str = ""

    def __post_init__(self):
        idx = tuple(int(i) for i in self.dof_indices)
        if len(idx) < 1:
            raise InvalidSensor("sensor selection must contain at least one DOF")
        if len(set(idx)) != len(idx):
            raise InvalidSensor(f"sensor DOFs must be unique, got {idx}")
        if any(i < 0 for i in idx):
            raise InvalidSensor(f"sensor DOFs must be non-negative, got {idx}")
        object.__setattr__(self, "dof_indices", idx)

    def validate_for(self, n_dof):
        if any(i >= n_dof for i in self.dof_indices):
            raise InvalidSensor(
                f"sensor DOFs {self.dof_indices} exceed model size {n_dof}"
            )

    @property
    def count(self):
        return len(self.dof_indices)


@dataclass
class StructuralModel:
    """Mass plus segmented stiffness of a reduced (constraint-free) system.

    Attributes:
        mass: (N, N) symmetric positive definite mass matrix.
        base_stiffness: (N, N) stiffness that no coefficient scales.  Zero
            for models whose every member belongs to a segment.
        segments: (n, N, N) stack of per-segment nominal stiffness matrices.
        fixed_dofs: original DOF indices eliminated at build time (record
            keeping only; matrices are already reduced).
        sensors: default sensor selection, optional.
        label: free-form description.
    """

    mass: np.ndarray
    base_stiffness: np.ndarray
    segments: np.ndarray
    fixed_dofs: tuple = ()
    sensors: SensorSelection | None = None
    label: str = ""

    def __post_init__(self):
        self.mass = np.asarray(self.mass, dtype=float)
        self.base_stiffness = np.asarray(self.base_stiffness, dtype=float)
        self.segments = np.asarray(self.segments, dtype=float)
        n = self.mass.shape[0]
        if self.mass.shape != (n, n):
            raise InvalidModel("mass matrix must be square")
        if self.base_stiffness.shape != (n, n):
            raise InvalidModel("base stiffness shape does not match mass")
        if self.segments.ndim != 3 or self.segments.shape[1:] != (n, n):
            raise InvalidModel("segment stack must have shape (n_segments, N, N)")
        if self.segments.shape[0] < 1:
            raise InvalidModel("model needs at least one stiffness segment")
        if not np.allclose(self.mass, self.mass.T, atol=1e-12):
            raise InvalidModel("mass matrix must be symmetric")
        if self.sensors is not None:
            self.sensors.validate_for(n)

    @property
    def n_dof(self):
        return self.mass.shape[0]

    @property
    def n_segments(self):
        return self.segments.shape[0]

    @property
    def nominal_stiffness(self):
        """Global stiffness with every coefficient at zero."""
        return self.base_stiffness + self.segments.sum(axis=0)


@dataclass
class ModalResult:
    """Lowest q modes of a model at one coefficient vector.

    ``frequencies`` are in Hz, ascending.  ``shapes`` holds the mode shape
    amplitudes at the sensor DOFs (s x q); ``full_shapes`` the complete
    mass-normalized eigenvectors (N x q).
    """

    frequencies: np.ndarray
    shapes: np.ndarray
    full_shapes: np.ndarray
    eigenvalues: np.ndarray


@dataclass
class ModalMeasurement:
    """Measured (or simulated) frequencies and sensor-sampled mode shapes."""

    frequencies: np.ndarray
    shapes: np.ndarray
    provenance: dict | None = None

    def __post_init__(self):
        self.frequencies = np.asarray(self.frequencies, dtype=float)
        self.shapes = np.asarray(self.shapes, dtype=float)
        if self.frequencies.ndim != 1:
            raise InvalidModel("measurement frequencies must be a vector")
        if self.shapes.ndim != 2 or self.shapes.shape[1] != self.frequencies.size:
            raise InvalidModel(
                "measurement shapes must be an s x q matrix matching q frequencies"
            )

    @property
    def q(self):
        return self.frequencies.size

    @property
    def n_sensors(self):
        return self.shapes.shape[0]


def _eliminate(matrix, fixed):
    for axis in (0, 1):
        matrix = np.delete(matrix, fixed, axis=axis)
    return matrix


def _check_fixed_dofs(fixed, n_total):
    fixed = sorted(int(i) for i in fixed)
    if len(set(fixed)) != len(fixed):
        raise InvalidModel(f"fixed DOFs must be unique, got {fixed}")
    if any(i < 0 or i >= n_total for i in fixed):
        raise InvalidModel(f"fixed DOFs {fixed} out of range for {n_total} DOFs")
    if len(fixed) >= n_total:
        raise InvalidModel("cannot fix every DOF of the model")
    return tuple(fixed)


def _check_segment_map(segment_ids, n_members, kind):
    ids = [int(s) for s in segment_ids]
    if len(ids) != n_members:
        raise InvalidModel(
            f"need one segment id per {kind}, got {len(ids)} for {n_members}"
        )
    n_seg = max(ids, default=0)
    if min(ids, default=1) < 1:
        raise InvalidModel("segment ids are 1-based and must be >= 1")
    missing = set(range(1, n_seg + 1)) - set(ids)
    if missing:
        raise InvalidModel(f"segments {sorted(missing)} own no {kind}")
    return ids, n_seg


def build_spring_chain(
    n_dof,
    masses,
    springs,
    segment_of_spring,
    fixed_dofs=(),
    sensors=None,
    label="spring chain",
):
    """Build a fixed-free lumped mass-spring chain.

    ``springs[0]`` connects mass 0 to ground and ``springs[j]`` connects
    mass j-1 to mass j, giving the classic tridiagonal stiffness.  Each
    spring is assigned to a 1-based segment id via ``segment_of_spring``.
    """
    n_dof = int(n_dof)
    if n_dof < 2:
        raise InvalidModel("chain needs at least two DOFs")
    masses = np.asarray(masses, dtype=float)
    springs = np.asarray(springs, dtype=float)
    if masses.shape != (n_dof,):
        raise InvalidModel(f"need {n_dof} masses, got shape {masses.shape}")
    if springs.shape != (n_dof,):
        raise InvalidModel(f"need {n_dof} springs, got shape {springs.shape}")
    if np.any(masses <= 0.0):
        raise InvalidModel("all masses must be positive")
    if np.any(springs <= 0.0):
        raise InvalidModel("all spring stiffnesses must be positive")
    seg_ids, n_seg = _check_segment_map(segment_of_spring, n_dof, "spring")

    segments = np.zeros((n_seg, n_dof, n_dof))
    for j, (k, seg) in enumerate(zip(springs, seg_ids)):
        target = segments[seg - 1]
        if j == 0:
            target[0, 0] += k
        else:
            target[j - 1, j - 1] += k
            target[j, j] += k
            target[j - 1, j] -= k
            target[j, j - 1] -= k

    mass = np.diag(masses)
    fixed = _check_fixed_dofs(fixed_dofs, n_dof)
    if fixed:
        mass = _eliminate(mass, list(fixed))
        segments = np.stack([_eliminate(s, list(fixed)) for s in segments])
    return StructuralModel(
        mass=mass,
        base_stiffness=np.zeros_like(mass),
        segments=segments,
        fixed_dofs=fixed,
        sensors=sensors,
        label=label,
    )


def build_boundary_spring_frame(
    core_model,
    boundary_nodes,
    nominal_spring_stiffness,
    sensors=None,
    label="boundary spring frame",
):
    """Attach one grounded spring per boundary node of an existing model.

    The core model's own stiffness (at its nominal state) becomes the
    invariant base; the new model's segments are exactly the boundary
    springs, so coefficient i scales boundary node i's ground stiffness as
    ``(1 - alpha_i) * nominal``.
    """
    k = float(nominal_spring_stiffness)
    if k <= 0.0:
        raise InvalidModel("nominal boundary spring stiffness must be positive")
    nodes = [int(b) for b in boundary_nodes]
    if len(nodes) < 1:
        raise InvalidModel("need at least one boundary node")
    if len(set(nodes)) != len(nodes):
        raise InvalidModel(f"boundary nodes must be unique, got {nodes}")
    n = core_model.n_dof
    if any(b < 0 or b >= n for b in nodes):
        raise InvalidModel(f"boundary nodes {nodes} not in the core model's DOF set")

    segments = np.zeros((len(nodes), n, n))
    for i, b in enumerate(nodes):
        segments[i, b, b] = k
    return StructuralModel(
        mass=core_model.mass.copy(),
        base_stiffness=core_model.nominal_stiffness,
        segments=segments,
        fixed_dofs=core_model.fixed_dofs,
        sensors=sensors if sensors is not None else core_model.sensors,
        label=label,
    )


def build_segmented_cantilever(
    n_elements,
    n_segments,
    section_props,
    fixed_dofs=(),
    sensors=None,
    label="segmented cantilever",
):
    """Build a clamped-free Euler-Bernoulli beam with axial segment groups.

    ``section_props`` is ``[E, I, rho, A, length]``.  Elements are grouped
    into ``n_segments`` equal runs along the axis; each group forms one
    stiffness segment.  DOFs are (deflection, rotation) per free node; the
    clamped node is eliminated.
    """
    n_elements = int(n_elements)
    n_segments = int(n_segments)
    if n_elements < 1 or n_segments < 1:
        raise InvalidModel("element and segment counts must be positive")
    if n_elements % n_segments != 0:
        raise InvalidModel(
            f"{n_elements} elements cannot be grouped into {n_segments} equal segments"
        )
    props = np.asarray(section_props, dtype=float)
    if props.shape != (5,):
        raise InvalidModel("section_props must be [E, I, rho, A, length]")
    if np.any(props <= 0.0):
        raise InvalidModel("section properties must all be positive")
    e_mod, inertia, rho, area, length = props
    le = length / n_elements

    ei = e_mod * inertia / le**3
    k_el = ei * np.array(
        [
            [12.0, 6.0 * le, -12.0, 6.0 * le],
            [6.0 * le, 4.0 * le**2, -6.0 * le, 2.0 * le**2],
            [-12.0, -6.0 * le, 12.0, -6.0 * le],
            [6.0 * le, 2.0 * le**2, -6.0 * le, 4.0 * le**2],
        ]
    )
    ma = rho * area * le / 420.0
    m_el = ma * np.array(
        [
            [156.0, 22.0 * le, 54.0, -13.0 * le],
            [22.0 * le, 4.0 * le**2, 13.0 * le, -3.0 * le**2],
            [54.0, 13.0 * le, 156.0, -22.0 * le],
            [-13.0 * le, -3.0 * le**2, -22.0 * le, 4.0 * le**2],
        ]
    )

    n_nodes = n_elements + 1
    n_total = 2 * n_nodes
    mass = np.zeros((n_total, n_total))
    segments = np.zeros((n_segments, n_total, n_total))
    per_seg = n_elements // n_segments
    for el in range(n_elements):
        sl = slice(2 * el, 2 * el + 4)
        mass[sl, sl] += m_el
        segments[el // per_seg][sl, sl] += k_el

    # Clamp node 0, then any extra user-fixed DOFs (unconstrained numbering).
    fixed = _check_fixed_dofs(set(fixed_dofs) | {0, 1}, n_total)
    mass = _eliminate(mass, list(fixed))
    segments = np.stack([_eliminate(s, list(fixed)) for s in segments])
    return StructuralModel(
        mass=mass,
        base_stiffness=np.zeros_like(mass),
        segments=segments,
        fixed_dofs=fixed,
        sensors=sensors,
        label=label,
    )


def _check_alpha(model, alpha):
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (model.n_segments,):
        raise InvalidModel(
            f"coefficient vector has shape {alpha.shape}, "
            f"model has {model.n_segments} segments"
        )
    if np.any(alpha < 0.0) or np.any(alpha > 1.0):
        raise InvalidModel(f"coefficients must lie in [0, 1], got {alpha}")
    return alpha


def assemble_stiffness(model, alpha):
    """Global stiffness ``K_base + sum_i K_i (1 - alpha_i)``."""
    alpha = _check_alpha(model, alpha)
    return model.base_stiffness + np.tensordot(1.0 - alpha, model.segments, axes=1)


def _order_degenerate(eigenvalues, vectors):
    """Stable mode order: ascending eigenvalue, near-ties by the index of
    the first largest-magnitude shape entry."""
    order = list(range(eigenvalues.size))
    i = 0
    while i < len(order):
        j = i + 1
        scale = max(abs(eigenvalues[order[i]]), 1.0)
        while j < len(order) and abs(eigenvalues[order[j]] - eigenvalues[order[i]]) <= 1e-10 * scale:
            j += 1
        if j - i > 1:
            order[i:j] = sorted(
                order[i:j], key=lambda m: int(np.argmax(np.abs(vectors[:, m])))
            )
        i = j
    return order


def solve_modes(model, alpha, q, sensors=None):
    """Solve the generalized eigenproblem and return the lowest q modes.

    Shapes are mass-normalized and sign-fixed so the largest-magnitude
    sensor amplitude of each mode is positive.
    """
    q = int(q)
    if q < 1 or q > model.n_dof:
        raise InvalidModel(f"q={q} modes requested from a {model.n_dof}-DOF model")
    if sensors is None:
        sensors = model.sensors
    if sensors is None:
        sensors = SensorSelection(tuple(range(model.n_dof)), "all DOFs")
    sensors.validate_for(model.n_dof)

    stiffness = assemble_stiffness(model, alpha)
    try:
        scipy.linalg.cholesky(model.mass, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise SingularMass("mass matrix is not positive definite") from exc
    try:
        eigenvalues, vectors = scipy.linalg.eigh(stiffness, model.mass)
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise EigenFailure(f"generalized eigensolve failed: {exc}") from exc

    order = _order_degenerate(eigenvalues, vectors)[:q]
    eigenvalues = eigenvalues[order].copy()
    vectors = vectors[:, order].copy()

    sensor_rows = np.asarray(sensors.dof_indices, dtype=int)
    for m in range(q):
        col = vectors[sensor_rows, m]
        anchor = col if np.any(col != 0.0) else vectors[:, m]
        if anchor[np.argmax(np.abs(anchor))] < 0.0:
            vectors[:, m] = -vectors[:, m]

    # Residual guard on each returned pair.
    k_psi = stiffness @ vectors
    m_psi = model.mass @ vectors
    for m in range(q):
        res = np.linalg.norm(k_psi[:, m] - eigenvalues[m] * m_psi[:, m])
        denom = max(np.linalg.norm(k_psi[:, m]), 1e-300)
        if res / denom > EIGEN_RESIDUAL_TOL:
            raise EigenFailure(
                f"mode {m} residual {res / denom:.3e} exceeds {EIGEN_RESIDUAL_TOL}"
            )

    frequencies = np.sqrt(np.maximum(eigenvalues, 0.0)) / (2.0 * math.pi)
    return ModalResult(
        frequencies=frequencies,
        shapes=vectors[sensor_rows, :],
        full_shapes=vectors,
        eigenvalues=eigenvalues,
    )


def extract_at_sensors(result, sensors):
    """Gather rows of the full mode shapes at the selected sensor DOFs."""
    full = result.full_shapes
    if full is None:
        raise InvalidSensor("modal result carries no full shapes to sample")
    sensors.validate_for(full.shape[0])
    return full[np.asarray(sensors.dof_indices, dtype=int), :]


def simulate_measurement(model, truth, sensors, q, noise_level, seed):
    """Create a synthetic measurement from the model at a truth vector.

    With positive ``noise_level`` every frequency and every sensor shape
    amplitude is perturbed independently by a multiplicative
    ``1 + noise_level * xi`` with standard normal ``xi`` drawn from ``seed``
    (frequencies first, then shapes row-major).  Zero noise returns the
    exact prediction.
    """
    noise_level = float(noise_level)
    if noise_level < 0.0:
        raise InvalidModel("noise level must be non-negative")
    result = solve_modes(model, truth, q, sensors=sensors)
    freqs = result.frequencies.copy()
    shapes = result.shapes.copy()
    if noise_level > 0.0:
        rng = np.random.default_rng(seed)
        freqs *= 1.0 + noise_level * rng.standard_normal(freqs.shape)
        shapes *= 1.0 + noise_level * rng.standard_normal(shapes.shape)
    return ModalMeasurement(
        frequencies=freqs,
        shapes=shapes,
        provenance={
            "truth": np.asarray(truth, dtype=float).tolist(),
            "noise_seed": int(seed),
            "noise_level": noise_level,
        },
    )


def model_from_dict(spec):
    """Build a model from its JSON-style descriptor.

    Supported ``type`` values: ``chain``, ``frame`` (a chain core plus
    grounded boundary springs) and ``cantilever``.  Sensor DOFs use the
    post-constraint numbering.
    """
    if not isinstance(spec, dict) or "type" not in spec:
        raise InvalidModel("model descriptor must be a mapping with a 'type' key")
    kind = spec["type"]
    sensors = None
    if spec.get("sensors"):
        sensors = SensorSelection(tuple(spec["sensors"]))

    if kind == "chain":
        return build_spring_chain(
            len(spec["masses"]),
            spec["masses"],
            spec["springs"],
            spec["spring_segments"],
            fixed_dofs=spec.get("fixed_dofs", ()),
            sensors=sensors,
            label=spec.get("label", "spring chain"),
        )
    if kind == "frame":
        core_spec = dict(spec["core"])
        core_spec.setdefault("type", "chain")
        if core_spec["type"] != "chain":
            raise InvalidModel("frame core must be a chain descriptor")
        core = model_from_dict(core_spec)
        return build_boundary_spring_frame(
            core,
            spec["boundary_nodes"],
            spec["boundary_stiffness"],
            sensors=sensors,
            label=spec.get("label", "boundary spring frame"),
        )
    if kind == "cantilever":
        section = spec["section"]
        props = [
            section["youngs_modulus"],
            section["second_moment"],
            section["density"],
            section["area"],
            section["length"],
        ]
        return build_segmented_cantilever(
            spec["elements"],
            spec["segments"],
            props,
            fixed_dofs=spec.get("fixed_dofs", ()),
            sensors=sensors,
            label=spec.get("label", "segmented cantilever"),
        )
    raise InvalidModel(f"unknown model type {kind!r}")
