from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

NOT_REACHED = "not reached"


def moving_average(values, window):
    """Trailing mean over ``window`` epochs, ignoring NaN; NaN until a full window exists."""
    values = np.asarray(values, dtype=np.float64)
    out = np.full(len(values), np.nan)
    for i in range(window - 1, len(values)):
        chunk = values[i - window + 1:i + 1]
        chunk = chunk[np.isfinite(chunk)]
        if chunk.size:
            out[i] = chunk.mean()
    return out


def threshold_target(reference, threshold):
    """Return level that counts as solved.

    For a positive reference this is ``threshold * reference``; written as
    ``reference - (1 - threshold) * |reference|`` so that lowering the
    threshold always lowers the bar, whatever the reference's sign.
    """
    return reference - (1.0 - threshold) * abs(reference)


def epochs_to_threshold(returns, reference, threshold=0.8, window=50):
    """First epoch index whose moving average reaches the target, or None."""
    if not 0.0 < threshold <= 1.0:
        raise ValueError("threshold must lie in (0, 1]")
    ma = moving_average(returns, window)
    hit = np.flatnonzero(ma >= threshold_target(reference, threshold))
    return int(hit[0]) if hit.size else None


@dataclass
class ReportRow:
    name: str
    representation: str
    seed: int
    final_mean_return: float
    epochs_to_threshold: int | None
    greedy_mean: float
    greedy_std: float
    diverged_at: int | None = None


REPORT_FIELDS = ("name", "representation", "seed", "final_mean_return", "epochs_to_threshold",
                 "greedy_mean", "greedy_std", "diverged_at")


@dataclass
class ComparisonReport:
    threshold: float
    window: int
    rows: list = field(default_factory=list)

    def reached(self, name):
        return sum(1 for r in self.rows if r.name == name and r.epochs_to_threshold is not None)

    def names(self):
        return list(dict.fromkeys(r.name for r in self.rows))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(REPORT_FIELDS)
            for r in self.rows:
                writer.writerow([
                    r.name, r.representation, r.seed, repr(float(r.final_mean_return)),
                    NOT_REACHED if r.epochs_to_threshold is None else r.epochs_to_threshold,
                    repr(float(r.greedy_mean)), repr(float(r.greedy_std)),
                    "" if r.diverged_at is None else r.diverged_at,
                ])

    def summary(self) -> str:
        lines = [f"threshold {self.threshold:g} x greedy, {self.window}-epoch moving average"]
        for name in self.names():
            rows = [r for r in self.rows if r.name == name]
            ref = rows[0]
            finals = np.array([r.final_mean_return for r in rows])
            lines.append(
                f"{name} [{ref.representation}]: reached {self.reached(name)}/{len(rows)} seeds; "
                f"final return {np.nanmean(finals) if np.isfinite(finals).any() else math.nan:.3f}; "
                f"greedy {ref.greedy_mean:.3f} +/- {ref.greedy_std:.3f}"
            )
            for r in rows:
                ett = NOT_REACHED if r.epochs_to_threshold is None else f"epoch {r.epochs_to_threshold}"
                extra = f" (diverged at epoch {r.diverged_at})" if r.diverged_at is not None else ""
                lines.append(f"  seed {r.seed}: final {r.final_mean_return:.3f}, threshold {ett}{extra}")
        return "\n".join(lines) + "\n"
