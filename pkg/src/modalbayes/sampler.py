"""Single-chain Metropolis-Hastings kernel with adaptive proposal width.

Proposals are isotropic Gaussian steps whose per-dimension standard
deviation is ``width`` times the box span, so ``width`` is box-relative.
The width is reset to its small default on every acceptance and doubled
(up to a cap) after each run of ``widen_after`` consecutive rejections,
which lets a stuck chain enlarge its search neighbourhood.

Out-of-box candidates are legal: the uniform prior gives them posterior
zero and the Metropolis test rejects them, which preserves proposal
symmetry without any reflection logic.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import EvaluationFailure

ACTIVE = "active"
SUSPENDED = "suspended"
TERMINATED = "terminated"


@dataclass(frozen=True)
class AdaptationPolicy:
    """Proposal-width schedule.

    ``base_width`` is the default (and minimum) box-relative proposal std;
    after every ``widen_after`` consecutive rejections the width is
    multiplied by ``widen_factor``, clamped at ``max_width``.
    """

    base_width: float = 0.01
    widen_after: int = 20
    widen_factor: float = 2.0
    max_width: float = 0.25

    def __post_init__(self):
        if self.base_width <= 0.0:
            raise ValueError("base width must be positive")
        if self.widen_after < 1:
            raise ValueError("widen_after must be at least 1")
        if self.widen_factor <= 1.0:
            raise ValueError("widen_factor must exceed 1")
        if self.max_width < self.base_width:
            raise ValueError("max_width must be at least the base width")


@dataclass
class ChainState:
    """One Markov chain: current point, archive of accepted samples, width
    dynamics and its own RNG stream.

    ``total_steps`` counts posterior evaluations consumed by the chain,
    including the one that scored its starting point.  The archive is
    preallocated to ``capacity`` rows; ``n_archived`` rows are valid.
    """

    chain_id: int
    position: np.ndarray
    posterior: float
    box: np.ndarray
    rng: np.random.Generator
    width: float
    archive_samples: np.ndarray
    archive_posteriors: np.ndarray
    n_archived: int = 0
    reject_streak: int = 0
    total_steps: int = 0
    failed_evaluations: int = 0
    status: str = ACTIVE
    trace: list | None = None

    @classmethod
    def start(cls, chain_id, position, posterior_value, box, rng, policy,
              capacity, count_start_evaluation=True, record_trace=False):
        """Create a chain at an already-scored starting point.

        The start counts as one consumed evaluation (it had to be scored)
        and, when its posterior is positive, as the first archive entry.
        """
        position = np.asarray(position, dtype=float)
        box = np.asarray(box, dtype=float)
        state = cls(
            chain_id=int(chain_id),
            position=position.copy(),
            posterior=float(posterior_value),
            box=box,
            rng=rng,
            width=policy.base_width,
            archive_samples=np.empty((capacity, position.size)),
            archive_posteriors=np.empty(capacity),
            trace=[] if record_trace else None,
        )
        if count_start_evaluation:
            state.total_steps = 1
        if state.posterior > 0.0:
            state._archive(position, state.posterior)
        if state.trace is not None:
            state._trace_row(accepted=1 if state.posterior > 0.0 else 0)
        return state

    def _archive(self, sample, value):
        if self.n_archived >= self.archive_samples.shape[0]:
            grow = max(64, self.archive_samples.shape[0])
            self.archive_samples = np.vstack(
                [self.archive_samples, np.empty((grow, sample.size))]
            )
            self.archive_posteriors = np.concatenate(
                [self.archive_posteriors, np.empty(grow)]
            )
        self.archive_samples[self.n_archived] = sample
        self.archive_posteriors[self.n_archived] = value
        self.n_archived += 1

    def _trace_row(self, accepted):
        self.trace.append(
            (self.total_steps, accepted, *self.position.tolist(), self.posterior, self.width)
        )

    @property
    def samples(self):
        """View of the archived accepted samples, oldest first."""
        return self.archive_samples[: self.n_archived]

    @property
    def posteriors(self):
        return self.archive_posteriors[: self.n_archived]

    @property
    def latest(self):
        """Most recently archived sample, or the start point if none."""
        if self.n_archived == 0:
            return self.position
        return self.archive_samples[self.n_archived - 1]

    @property
    def best_posterior(self):
        """Best archived posterior; falls back to the current value."""
        if self.n_archived == 0:
            return self.posterior
        return float(np.max(self.archive_posteriors[: self.n_archived]))


def propose(state):
    """Symmetric Gaussian candidate around the current point."""
    span = state.box[:, 1] - state.box[:, 0]
    step = state.width * span * state.rng.standard_normal(state.position.size)
    return state.position + step


def adapt_width(state, policy, accepted):
    """Reset the width on acceptance; widen it after each full run of
    ``widen_after`` consecutive rejections, clamped at ``max_width``."""
    if accepted:
        state.width = policy.base_width
        state.reject_streak = 0
    else:
        state.reject_streak += 1
        if state.reject_streak % policy.widen_after == 0:
            state.width = min(state.width * policy.widen_factor, policy.max_width)


def apply_step(state, candidate, candidate_posterior, policy, failed=False):
    """Metropolis accept/reject of an already-scored candidate.

    The acceptance probability is ``min(1, p(candidate) / p(current))``
    for the symmetric proposal; the draw ``mu ~ U(0, 1)`` happens on every
    step so the chain's random stream does not depend on posterior values.
    Returns True when the candidate was accepted.
    """
    candidate = np.asarray(candidate, dtype=float)
    value = float(candidate_posterior)
    if failed:
        state.failed_evaluations += 1
        value = 0.0

    if value <= 0.0:
        beta = 0.0
    elif state.posterior <= 0.0 or value >= state.posterior:
        beta = 1.0
    else:
        beta = value / state.posterior

    mu = state.rng.uniform()
    accepted = beta > mu
    if accepted:
        state.position = candidate.copy()
        state.posterior = value
        state._archive(state.position, value)
    adapt_width(state, policy, accepted)
    state.total_steps += 1
    if state.trace is not None:
        state._trace_row(accepted=int(accepted))
    return accepted


def mh_step(state, posterior_fn, policy):
    """One full Metropolis-Hastings transition.

    Evaluation failures score the candidate as posterior zero (automatic
    rejection) and are counted on the chain.
    """
    candidate = propose(state)
    failed = False
    try:
        value = posterior_fn(candidate)
    except EvaluationFailure:
        value = 0.0
        failed = True
    return apply_step(state, candidate, value, policy, failed=failed)


TRACE_HEADER_PREFIX = ("step", "accepted")
TRACE_HEADER_SUFFIX = ("posterior", "width")


def write_trace_csv(path, state, comment=None):
    """Dump the chain's per-step trace: step, accepted flag, the current
    sample after the step, its posterior and the adapted width."""
    if state.trace is None:
        raise ValueError(f"chain {state.chain_id} was run without trace recording")
    n_dim = state.position.size
    header = (
        list(TRACE_HEADER_PREFIX)
        + [f"alpha_{i + 1}" for i in range(n_dim)]
        + list(TRACE_HEADER_SUFFIX)
    )
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in state.trace:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
