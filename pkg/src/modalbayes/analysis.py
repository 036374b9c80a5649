"""Histogram-based characterization of survived-chain archives.

A chain's archive is converted into a sparse joint occupancy histogram
with Q bins per dimension; only occupied bins are stored, so the cost is
linear in the archive length no matter how large Q^n gets.  The peak bin
of the joint histogram is the reported parameter estimate (an interval
per dimension), alongside the best archived point sample, the per-
dimension marginals and a diagnostic flagging dimensions where the
marginal peak disagrees with the joint peak.
"""

from dataclasses import dataclass

import numpy as np

from .errors import EmptyHistogram, OutOfBox


@dataclass
class JointHistogram:
    """Sparse occupancy counts over a regular grid on a box.

    ``counts`` maps an n-tuple of bin indices (each in [0, Q-1]) to the
    number of archived samples that fell in that bin.
    """

    bins: int
    box: np.ndarray
    counts: dict
    total: int

    @property
    def n(self):
        return self.box.shape[0]

    def bin_intervals(self, bin_tuple):
        """Per-dimension [lo, hi] edges of one bin."""
        lo = self.box[:, 0]
        width = (self.box[:, 1] - self.box[:, 0]) / self.bins
        idx = np.asarray(bin_tuple, dtype=int)
        return np.stack([lo + idx * width, lo + (idx + 1) * width], axis=1)


def bin_indices(samples, bins, box):
    """Map samples to bin index tuples with the floor rule; samples on the
    upper box edge clamp into the last bin."""
    samples = np.asarray(samples, dtype=float)
    box = np.asarray(box, dtype=float)
    lo = box[:, 0]
    hi = box[:, 1]
    if np.any(samples < lo) or np.any(samples > hi):
        raise OutOfBox("sample outside the histogram box")
    unit = (samples - lo) / (hi - lo)
    idx = np.floor(bins * unit).astype(int)
    return np.minimum(idx, bins - 1)


def build_joint_histogram(samples, bins, box):
    """Sparse joint histogram of an archive."""
    bins = int(bins)
    if bins < 2:
        raise ValueError("need at least two bins per dimension")
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.shape[0] < 1:
        raise ValueError("archive must contain at least one sample")
    box = np.asarray(box, dtype=float)
    idx = bin_indices(samples, bins, box)
    counts = {}
    for row in idx:
        key = tuple(int(v) for v in row)
        counts[key] = counts.get(key, 0) + 1
    return JointHistogram(bins=bins, box=box, counts=counts, total=samples.shape[0])


def best_bin(hist):
    """Occupied bin with the highest count; ties take the lexicographically
    smallest index tuple."""
    if hist.total < 1 or not hist.counts:
        raise EmptyHistogram("histogram has no occupied bins")
    top = max(hist.counts.values())
    winner = min(key for key, cnt in hist.counts.items() if cnt == top)
    return winner, top


def marginal(hist, dim):
    """Normalized per-dimension occupancy (sums counts over all other
    dimensions, divided by the total)."""
    if not 0 <= dim < hist.n:
        raise ValueError(f"dimension {dim} out of range for n={hist.n}")
    out = np.zeros(hist.bins)
    for key, cnt in hist.counts.items():
        out[key[dim]] += cnt
    return out / hist.total


def project(hist, dims):
    """Histogram over a subset of dimensions; counts are summed over the
    complementary dimensions and the total is preserved."""
    dims = [int(d) for d in dims]
    if len(dims) < 1:
        raise ValueError("projection needs at least one dimension")
    if len(set(dims)) != len(dims):
        raise ValueError(f"projection dimensions must be unique, got {dims}")
    if any(d < 0 or d >= hist.n for d in dims):
        raise ValueError(f"projection dimensions {dims} out of range")
    counts = {}
    for key, cnt in hist.counts.items():
        sub = tuple(key[d] for d in dims)
        counts[sub] = counts.get(sub, 0) + cnt
    return JointHistogram(
        bins=hist.bins, box=hist.box[dims, :], counts=counts, total=hist.total
    )


@dataclass
class SolutionReport:
    """Histogram summary of one survived chain."""

    chain_id: int
    best_bin: tuple
    best_bin_intervals: np.ndarray
    best_bin_frequency: float
    best_sample: np.ndarray
    highest_posterior: float
    marginals: np.ndarray
    marginal_peak_bins: tuple
    inconsistent_dims: tuple
    archive_length: int


def solution_report(chain, bins, box):
    """Build the report for one survived chain's trimmed archive."""
    hist = build_joint_histogram(chain.samples, bins, box)
    winner, count = best_bin(hist)
    marginals = np.stack([marginal(hist, j) for j in range(hist.n)])
    # Marginal peaks, lowest bin index on ties, mirroring the joint rule.
    peaks = tuple(int(np.argmax(marginals[j])) for j in range(hist.n))
    inconsistent = tuple(j for j in range(hist.n) if peaks[j] != winner[j])
    best_idx = int(np.argmax(chain.posteriors))
    return SolutionReport(
        chain_id=chain.chain_id,
        best_bin=winner,
        best_bin_intervals=hist.bin_intervals(winner),
        best_bin_frequency=count / hist.total,
        best_sample=np.asarray(chain.samples[best_idx], dtype=float),
        highest_posterior=float(chain.posteriors[best_idx]),
        marginals=marginals,
        marginal_peak_bins=peaks,
        inconsistent_dims=inconsistent,
        archive_length=len(chain.samples),
    )


def report(result, bins, box):
    """One report per survived chain, best posterior first."""
    if not result.survived:
        raise EmptyHistogram("campaign result has no survived chains to report")
    reports = [solution_report(chain, bins, box) for chain in result.survived]
    reports.sort(key=lambda r: (-r.highest_posterior, r.chain_id))
    return reports


def report_to_dict(rep):
    return {
        "chain_id": rep.chain_id,
        "best_bin": list(rep.best_bin),
        "best_bin_intervals": [[float(a), float(b)] for a, b in rep.best_bin_intervals],
        "best_bin_frequency": rep.best_bin_frequency,
        "best_sample": [float(v) for v in rep.best_sample],
        "highest_posterior": rep.highest_posterior,
        "marginals": [[float(v) for v in row] for row in rep.marginals],
        "marginal_peak_bins": list(rep.marginal_peak_bins),
        "inconsistent_dims": list(rep.inconsistent_dims),
        "archive_length": rep.archive_length,
    }


def format_report_table(reports, solution_names=None):
    """Aligned-text solution table: one row of identified coefficient bins
    per solution plus its highest archived posterior."""
    if not reports:
        return "no survived solutions\n"
    n = reports[0].marginals.shape[0]
    names = solution_names or [f"Solu. {i + 1}" for i in range(len(reports))]
    header = ["Solution", "Chain"] + [f"Para. {j + 1}" for j in range(n)] + ["Highest PDF"]
    rows = [header]
    for name, rep in zip(names, reports):
        cells = [name, str(rep.chain_id)]
        for lo, hi in rep.best_bin_intervals:
            cells.append(f"[{lo:.3g}, {hi:.3g}]")
        cells.append(f"{rep.highest_posterior:.4f}")
        rows.append(cells)
    widths = [max(len(r[c]) for r in rows) for c in range(len(header))]
    lines = []
    for r, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(widths[c]) for c, cell in enumerate(row)))
        if r == 0:
            lines.append("  ".join("-" * widths[c] for c in range(len(header))))
    lines.append("")
    for name, rep in zip(names, reports):
        point = ", ".join(f"{v:.4f}" for v in rep.best_sample)
        lines.append(
            f"{name}: best sample [{point}] "
            f"(posterior {rep.highest_posterior:.4f}, "
            f"peak bin frequency {rep.best_bin_frequency:.4f})"
        )
        if rep.inconsistent_dims:
            dims = ", ".join(str(d + 1) for d in rep.inconsistent_dims)
            lines.append(
                f"{name}: marginal peak disagrees with the joint peak "
                f"for parameter(s) {dims}"
            )
    return "\n".join(lines) + "\n"


def marginals_csv_rows(rep, box):
    """Rows (parameter, bin_lo, bin_hi, frequency) for one solution."""
    n, bins = rep.marginals.shape
    box = np.asarray(box, dtype=float)
    rows = []
    for j in range(n):
        width = (box[j, 1] - box[j, 0]) / bins
        for b in range(bins):
            rows.append(
                (
                    j + 1,
                    box[j, 0] + b * width,
                    box[j, 0] + (b + 1) * width,
                    rep.marginals[j, b],
                )
            )
    return rows


def projection_csv_rows(hist):
    """Rows (bin indices..., bin edges..., count) for an occupied-bin dump
    of a (possibly projected) histogram, lexicographic bin order."""
    rows = []
    for key in sorted(hist.counts):
        intervals = hist.bin_intervals(key)
        flat_edges = [float(v) for pair in intervals for v in pair]
        rows.append((*key, *flat_edges, hist.counts[key]))
    return rows
