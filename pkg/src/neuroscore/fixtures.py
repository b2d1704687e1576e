"""Bundled reference tables from the original study, as CSV fixtures.

``behavioral``: per-participant accuracy in the real/fake judgement task.
``neuroscore``: per-participant Neuroscore.
``retained``: trials left after artifact rejection (participant x category).
``scores``: per-metric scores for the three GANs, lower is better.
"""

from __future__ import annotations

import csv
from importlib import resources

from .core import ScoreTable
from .metrics import read_metric_table

_FILES = {
    "behavioral": "table2_behavioral.csv",
    "neuroscore": "table3_neuroscore.csv",
    "retained": "table1_retained.csv",
    "scores": "table4_scores.csv",
}


def path(name):
    """Filesystem path of a bundled fixture."""
    try:
        fname = _FILES[name]
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; choose from {sorted(_FILES)}") from None
    return resources.files("neuroscore") / "data" / fname


def behavioral_table():
    return ScoreTable.from_csv(path("behavioral"))


def neuroscore_table():
    return ScoreTable.from_csv(path("neuroscore"))


def metric_scores():
    return read_metric_table(path("scores"))


def retained_trials():
    """``{participant: {category: count}}`` with the STANDARD column included."""
    with open(path("retained"), newline="") as fh:
        return {row.pop("participant"): {k: int(v) for k, v in row.items()}
                for row in csv.DictReader(fh)}
