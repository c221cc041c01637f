"""Metric smoothing and the CSV sinks written during training."""

from __future__ import annotations

import csv
import math

METRICS_COLUMNS = (
    "global_step", "update", "episodes", "team", "learning", "cumulative_reward_mean",
    "cumulative_reward_smoothed", "episode_length_mean", "curriculum_level", "hidden_fraction_mean",
    "policy_loss", "value_loss", "entropy", "mean_ratio", "clip_fraction", "approx_kl", "grad_norm",
)
CURRICULUM_COLUMNS = ("global_step", "old_level", "new_level")
EPISODE_COLUMNS = (
    "update", "global_step", "instance", "episode", "level", "length", "done_reason",
    "reward_hiders", "reward_seekers", "reward_single_agent", "hidden_fraction", "blocked", "tagged",
)
LEDGER_COLUMNS = ("update", "instance", "episode", "tick", "agent", "amount", "cause")


def smooth(series, factor: float) -> list[float]:
    """Exponential moving average: y0 = x0, y_t = f*y_{t-1} + (1-f)*x_t.

    NaN inputs leave the average unchanged (and a leading NaN run stays NaN
    until the first finite value, which then seeds the average).
    """
    if not 0.0 <= factor < 1.0:
        raise ValueError("factor must lie in [0, 1)")
    out: list[float] = []
    y = math.nan
    for x in series:
        x = float(x)
        if math.isnan(x):
            pass
        elif math.isnan(y):
            y = x
        else:
            y = factor * y + (1.0 - factor) * x
        out.append(y)
    return out


def fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    return str(v)


class CsvSink:
    """Append-only CSV file with a fixed header; values formatted exactly."""

    def __init__(self, path, columns):
        self.columns = tuple(columns)
        self._fh = open(path, "w", newline="", encoding="utf-8")
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(self.columns)

    def write(self, row: dict) -> None:
        self._w.writerow([fmt(row.get(c)) for c in self.columns])

    def flush(self) -> None:
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()


def read_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def column(rows: list[dict], name: str, team: str | None = None) -> list[float]:
    vals = []
    for r in rows:
        if team is not None and r.get("team") != team:
            continue
        raw = r.get(name, "")
        vals.append(float(raw) if raw not in ("", None) else math.nan)
    return vals
