"""Full updating campaign: pre-screen, seed, evolve, merge, trim.

The campaign follows a fixed sequence.  A Latin hypercube batch over the
prior box is scored and the best ``n_keep`` samples are clustered with a
separation-constrained K-means; the cluster centers seed one Markov chain
each.  All active chains then advance in lockstep rounds of one
Metropolis-Hastings step.  After every round, each newly accepted sample
is compared against the archives of the other chains and, on any distance
violation, exactly one chain of the offending pair is suspended.  A chain
terminates when it exhausts its evaluation budget or accumulates too many
consecutive rejections; suspended chains are "merged" and never reported.

Determinism: every random stream is derived from ``master_seed`` (the
pre-screen and clustering use it directly, chain i uses
``master_seed + i``), candidate generation and acceptance stay in the
calling process, and worker pools only evaluate pure posterior functions,
so results are independent of the worker count.
"""

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import sampler
from .errors import EmptyScreen, EvaluationFailure
from .sampler import ACTIVE, SUSPENDED, TERMINATED, AdaptationPolicy, ChainState

TERMINATED_MAX_STEPS = "max_steps"
TERMINATED_REJECT_STREAK = "reject_streak"


@dataclass(frozen=True)
class CampaignConfig:
    """Campaign operating parameters (defaults follow the standard recipe)."""

    n_prescreen: int = 1000
    n_keep: int = 50
    max_steps: int = 2000
    seed_separation: float = 0.23
    merge_distance: float = 0.15
    base_width: float = 0.01
    max_rejects: int = 250
    burn_in_ratio: float = 0.1
    bins: int = 20
    master_seed: int = 0
    widen_after: int = 20
    widen_factor: float = 2.0
    max_width: float = 0.25

    def __post_init__(self):
        if self.n_keep > self.n_prescreen:
            raise ValueError("cannot keep more samples than were screened")
        if self.n_keep < 1 or self.n_prescreen < 1:
            raise ValueError("screen sizes must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")
        if self.max_rejects < 1:
            raise ValueError("max_rejects must be at least 1")
        if self.seed_separation <= 0.0 or self.merge_distance <= 0.0:
            raise ValueError("distance thresholds must be positive")
        if not 0.0 <= self.burn_in_ratio < 1.0:
            raise ValueError("burn-in ratio must lie in [0, 1)")
        if self.bins < 2:
            raise ValueError("need at least two bins per dimension")

    def adaptation(self):
        return AdaptationPolicy(
            base_width=self.base_width,
            widen_after=self.widen_after,
            widen_factor=self.widen_factor,
            max_width=self.max_width,
        )


@dataclass
class SurvivedChain:
    """Burn-in-trimmed archive of a chain that finished without merging."""

    chain_id: int
    samples: np.ndarray
    posteriors: np.ndarray
    total_steps: int
    raw_length: int
    termination: str


@dataclass(frozen=True)
class MergeEvent:
    chain_id: int
    absorbed_into: int
    step: int


@dataclass
class CampaignResult:
    """Outcome of one campaign run.

    ``timings`` is wall-clock bookkeeping and is deliberately kept out of
    the deterministic serialized form.
    """

    survived: list
    merged: list
    chains_started: int
    evaluation_count: int
    rounds: int
    timings: dict = field(default_factory=dict)
    traces: dict = field(default_factory=dict)


def latin_hypercube(n_samples, n_dims, box, seed):
    """Latin hypercube batch: per dimension, each of the ``n_samples``
    equal-width strata receives exactly one coordinate."""
    n_samples = int(n_samples)
    if n_samples < 1:
        raise ValueError("need at least one sample")
    box = np.asarray(box, dtype=float)
    rng = np.random.default_rng(seed)
    out = np.empty((n_samples, n_dims))
    for j in range(n_dims):
        strata = rng.permutation(n_samples)
        offsets = rng.uniform(size=n_samples)
        unit = (strata + offsets) / n_samples
        out[:, j] = box[j, 0] + unit * (box[j, 1] - box[j, 0])
    return out


def rank_prescreened(samples, values, n_keep):
    """Keep the n_keep best positive-posterior samples, ties broken by
    generation index.  Raises EmptyScreen when nothing scored above zero."""
    values = np.asarray(values, dtype=float)
    if not np.any(values > 0.0):
        raise EmptyScreen(
            "every pre-screen sample scored posterior zero; widen the noise "
            "coefficients or check the measurement"
        )
    order = np.argsort(-values, kind="stable")
    order = order[values[order] > 0.0][:n_keep]
    return samples[order], values[order]


def prescreen(samples, posterior_fn, n_keep):
    """Score a sample batch and return the ranked best (sample, value) set."""
    values = np.empty(len(samples))
    for i, s in enumerate(samples):
        try:
            values[i] = posterior_fn(s)
        except EvaluationFailure:
            values[i] = 0.0
    return rank_prescreened(np.asarray(samples, dtype=float), values, n_keep)


def _lloyd_kmeans(points, k, seed):
    """Deterministic K-means: farthest-point init from ``seed``, then at
    most 100 Lloyd iterations with a 1e-9 motion tolerance."""
    n = len(points)
    rng = np.random.default_rng(seed)
    first = int(rng.integers(n))
    chosen = [first]
    dist = np.linalg.norm(points - points[first], axis=1)
    while len(chosen) < k:
        nxt = int(np.argmax(dist))
        chosen.append(nxt)
        dist = np.minimum(dist, np.linalg.norm(points - points[nxt], axis=1))
    centers = points[chosen].copy()

    for _ in range(100):
        d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        assign = np.argmin(d2, axis=1)
        new_centers = centers.copy()
        for c in range(k):
            members = points[assign == c]
            if len(members):
                new_centers[c] = members.mean(axis=0)
        motion = np.max(np.linalg.norm(new_centers - centers, axis=1))
        centers = new_centers
        if motion < 1e-9:
            break
    return centers


def constrained_kmeans(points, min_separation, seed):
    """Largest-k K-means whose centers are pairwise farther apart than
    ``min_separation``; k = 1 always qualifies."""
    points = np.asarray(points, dtype=float)
    if len(points) < 1:
        raise ValueError("cannot cluster an empty sample set")
    for k in range(len(points), 1, -1):
        centers = _lloyd_kmeans(points, k, seed)
        diffs = centers[:, None, :] - centers[None, :, :]
        dist = np.linalg.norm(diffs, axis=2)
        iu = np.triu_indices(k, 1)
        if np.all(dist[iu] > min_separation):
            return centers
    return points.mean(axis=0, keepdims=True)


def merge_check(chains, accepted_ids, merge_distance, merge_log):
    """Suspend one chain of every proximity-violating pair.

    Each chain that accepted a sample this round is compared against the
    archives of every other not-yet-suspended chain.  On a violation the
    chain with the lower best archived posterior is suspended (a tie
    suspends the higher chain id); a terminated chain can lose this
    comparison and be reclassified as merged.
    """
    by_id = {c.chain_id: c for c in chains}
    for cid in sorted(accepted_ids):
        chain = by_id[cid]
        if chain.status != ACTIVE:
            continue
        sample = chain.latest
        for other in chains:
            if other.chain_id == chain.chain_id or other.status == SUSPENDED:
                continue
            if other.n_archived == 0:
                continue
            gaps = np.linalg.norm(other.samples - sample, axis=1)
            if not np.any(gaps < merge_distance):
                continue
            if chain.best_posterior < other.best_posterior:
                loser, winner = chain, other
            elif chain.best_posterior > other.best_posterior:
                loser, winner = other, chain
            else:
                loser, winner = (
                    (chain, other) if chain.chain_id > other.chain_id else (other, chain)
                )
            loser.status = SUSPENDED
            merge_log.append(
                MergeEvent(
                    chain_id=loser.chain_id,
                    absorbed_into=winner.chain_id,
                    step=loser.total_steps,
                )
            )
            if chain.status != ACTIVE:
                break


def assert_merge_separation(chains, merge_distance):
    """Debug invariant: the latest accepted sample of every active chain
    keeps the merge distance to all other active chains' archives."""
    active = [c for c in chains if c.status == ACTIVE and c.n_archived > 0]
    for chain in active:
        for other in active:
            if other.chain_id == chain.chain_id:
                continue
            gaps = np.linalg.norm(other.samples - chain.latest, axis=1)
            if np.any(gaps < merge_distance):
                raise AssertionError(
                    f"merge invariant violated: chain {chain.chain_id} is within "
                    f"{merge_distance} of chain {other.chain_id}'s archive"
                )


def burnin_trim(samples, posteriors, burn_in_ratio):
    """Drop the first floor(ratio * length) archived samples."""
    if not 0.0 <= burn_in_ratio < 1.0:
        raise ValueError("burn-in ratio must lie in [0, 1)")
    drop = int(np.floor(burn_in_ratio * len(samples)))
    return samples[drop:], posteriors[drop:]


# Worker-side state for pooled posterior evaluation.  Objectives are pure,
# so shipping one copy per worker at pool start is enough.
_WORKER_OBJECTIVE = None


def _pool_init(objective):
    global _WORKER_OBJECTIVE
    _WORKER_OBJECTIVE = objective


def _pool_eval(alpha):
    try:
        return float(_WORKER_OBJECTIVE.posterior(alpha)), False
    except EvaluationFailure:
        return 0.0, True


class _EvalPool:
    """Order-preserving posterior evaluation, inline or via processes."""

    def __init__(self, objective, workers):
        self.objective = objective
        self.workers = max(1, int(workers))
        self._executor = None
        if self.workers > 1:
            self._executor = ProcessPoolExecutor(
                max_workers=self.workers,
                initializer=_pool_init,
                initargs=(objective,),
            )

    def evaluate(self, batch):
        if self._executor is None:
            out = []
            for alpha in batch:
                try:
                    out.append((float(self.objective.posterior(alpha)), False))
                except EvaluationFailure:
                    out.append((0.0, True))
            return out
        chunk = max(1, len(batch) // self.workers)
        return list(self._executor.map(_pool_eval, batch, chunksize=chunk))

    def close(self):
        if self._executor is not None:
            self._executor.shutdown()
            self._executor = None


def _nearest_positive(center, samples, values):
    """Fallback seed when a cluster center itself scores zero: the closest
    already-screened sample, whose posterior is known to be positive."""
    gaps = np.linalg.norm(samples - center, axis=1)
    idx = int(np.argmin(gaps))
    return samples[idx], float(values[idx])


def run_campaign(config, objective, workers=1, progress=None, record_trace=False):
    """Run the full campaign against an objective.

    ``objective`` must expose ``box`` (an (n, 2) array), ``n`` and a pure
    ``posterior(alpha)`` method; it must be picklable when ``workers > 1``.
    ``progress``, when given, receives one text line per round.
    """
    timings = {}
    t0 = time.perf_counter()
    box = np.asarray(objective.box, dtype=float)
    n_dims = box.shape[0]
    policy = config.adaptation()
    pool = _EvalPool(objective, workers)
    try:
        samples = latin_hypercube(config.n_prescreen, n_dims, box, config.master_seed)
        scored = pool.evaluate(list(samples))
        values = np.array([v for v, _ in scored])
        top_samples, top_values = rank_prescreened(samples, values, config.n_keep)
        timings["prescreen_s"] = time.perf_counter() - t0

        t1 = time.perf_counter()
        centers = constrained_kmeans(
            top_samples, config.seed_separation, config.master_seed
        )
        center_scores = pool.evaluate(list(centers))
        chains = []
        for i, (center, (value, _failed)) in enumerate(zip(centers, center_scores)):
            chain_id = i + 1
            start, start_value = center, value
            if value <= 0.0:
                start, start_value = _nearest_positive(center, top_samples, top_values)
            chains.append(
                ChainState.start(
                    chain_id=chain_id,
                    position=start,
                    posterior_value=start_value,
                    box=box,
                    rng=np.random.default_rng(config.master_seed + chain_id),
                    policy=policy,
                    capacity=config.max_steps + 1,
                    record_trace=record_trace,
                )
            )
        timings["seeding_s"] = time.perf_counter() - t1

        t2 = time.perf_counter()
        merge_log = []
        termination_reason = {}
        rounds = 0
        # Seeds are archived samples too; resolve any pair already closer
        # than the merge distance before evolution begins.
        merge_check(chains, [c.chain_id for c in chains], config.merge_distance, merge_log)
        while True:
            active = [c for c in chains if c.status == ACTIVE]
            if not active:
                break
            rounds += 1
            candidates = [sampler.propose(c) for c in active]
            results = pool.evaluate(candidates)
            accepted_ids = []
            for chain, cand, (value, failed) in zip(active, candidates, results):
                if sampler.apply_step(chain, cand, value, policy, failed=failed):
                    accepted_ids.append(chain.chain_id)
            merge_check(chains, accepted_ids, config.merge_distance, merge_log)
            for chain in active:
                if chain.status != ACTIVE:
                    continue
                if chain.total_steps >= config.max_steps:
                    chain.status = TERMINATED
                    termination_reason[chain.chain_id] = TERMINATED_MAX_STEPS
                elif chain.reject_streak >= config.max_rejects:
                    chain.status = TERMINATED
                    termination_reason[chain.chain_id] = TERMINATED_REJECT_STREAK
            if __debug__:
                assert_merge_separation(chains, config.merge_distance)
            if progress is not None:
                counts = {ACTIVE: 0, SUSPENDED: 0, TERMINATED: 0}
                for c in chains:
                    counts[c.status] += 1
                best = max(c.best_posterior for c in chains)
                progress(
                    f"round {rounds}: active={counts[ACTIVE]} "
                    f"suspended={counts[SUSPENDED]} terminated={counts[TERMINATED]} "
                    f"best_posterior={best:.6g}"
                )
        timings["evolution_s"] = time.perf_counter() - t2
    finally:
        pool.close()

    survived = []
    for chain in chains:
        if chain.status != TERMINATED:
            continue
        kept_samples, kept_values = burnin_trim(
            chain.samples.copy(), chain.posteriors.copy(), config.burn_in_ratio
        )
        survived.append(
            SurvivedChain(
                chain_id=chain.chain_id,
                samples=kept_samples,
                posteriors=kept_values,
                total_steps=chain.total_steps,
                raw_length=chain.n_archived,
                termination=termination_reason.get(chain.chain_id, TERMINATED_MAX_STEPS),
            )
        )

    evaluation_count = config.n_prescreen + sum(c.total_steps for c in chains)
    timings["total_s"] = time.perf_counter() - t0
    traces = {c.chain_id: c.trace for c in chains} if record_trace else {}
    return CampaignResult(
        survived=survived,
        merged=merge_log,
        chains_started=len(chains),
        evaluation_count=evaluation_count,
        rounds=rounds,
        timings=timings,
        traces=traces,
    )


def result_to_dict(result):
    """JSON-ready form of a campaign result (timings excluded: they are
    wall-clock noise and would break byte-identical reruns)."""
    return {
        "chains_started": result.chains_started,
        "evaluation_count": result.evaluation_count,
        "rounds": result.rounds,
        "survived": [
            {
                "chain_id": s.chain_id,
                "total_steps": s.total_steps,
                "raw_length": s.raw_length,
                "termination": s.termination,
                "samples": [[float(v) for v in row] for row in s.samples],
                "posteriors": [float(v) for v in s.posteriors],
            }
            for s in result.survived
        ],
        "merged": [
            {
                "chain_id": m.chain_id,
                "absorbed_into": m.absorbed_into,
                "step": m.step,
            }
            for m in result.merged
        ],
    }


def result_from_dict(data):
    survived = [
        SurvivedChain(
            chain_id=s["chain_id"],
            samples=np.asarray(s["samples"], dtype=float),
            posteriors=np.asarray(s["posteriors"], dtype=float),
            total_steps=s["total_steps"],
            raw_length=s["raw_length"],
            termination=s["termination"],
        )
        for s in data["survived"]
    ]
    merged = [
        MergeEvent(
            chain_id=m["chain_id"],
            absorbed_into=m["absorbed_into"],
            step=m["step"],
        )
        for m in data["merged"]
    ]
    return CampaignResult(
        survived=survived,
        merged=merged,
        chains_started=data["chains_started"],
        evaluation_count=data["evaluation_count"],
        rounds=data["rounds"],
    )
