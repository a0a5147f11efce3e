"""Conditional vectors and training-by-sampling.

A condition picks one mode or class of one column: the conditional
vector is zero everywhere except a single 1 at that slot, laid out as
the concatenation of all mode/class segments (alpha slots excluded).
During training the column is drawn uniformly and the slot within it
from the normalized log(1 + count) masses of the training data, which
flattens imbalanced categories enough that rare ones still get picked.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Condition:
    column: str
    segment_index: int   # into layout.condition_segments
    local: int           # slot within the segment
    vec: np.ndarray      # (cond_width,) one-hot


class FrequencyTable:
    """Per-segment slot counts and their log-damped sampling masses."""

    def __init__(self, layout, counts):
        self.layout = layout
        self.segments = layout.condition_segments
        self.counts = [np.asarray(c, dtype=np.float64) for c in counts]
        if len(self.counts) != len(self.segments):
            raise ValueError("one count vector per conditionable segment")
        self.masses = []
        for c in self.counts:
            m = np.log1p(c)
            tot = m.sum()
            # zero-count slots keep zero mass; an all-zero segment keeps
            # a zero vector and is skipped by sample_condition
            self.masses.append(m / tot if tot > 0 else m)

    @classmethod
    def from_encoded(cls, X, layout):
        counts = [X[:, s.offset:s.offset + s.width].sum(axis=0)
                  for s in layout.condition_segments]
        return cls(layout, counts)

    def to_dict(self):
        return {"counts": [c.tolist() for c in self.counts]}


def make_condition(layout, segment_index, local):
    seg = layout.condition_segments[segment_index]
    if not 0 <= local < seg.width:
        raise ValueError("slot %d out of range for segment of %r"
                         % (local, seg.column))
    vec = np.zeros(layout.cond_width)
    vec[seg.cond_offset + local] = 1.0
    return Condition(seg.column, segment_index, local, vec)


def sample_condition(freq, rng):
    """Uniform over columns, log-frequency masses within the column."""
    live = [j for j, m in enumerate(freq.masses) if m.sum() > 0]
    if not live:
        raise ValueError("no conditionable segment carries mass")
    j = live[int(rng.integers(len(live)))]
    local = int(rng.choice(freq.segments[j].width, p=freq.masses[j]))
    return make_condition(freq.layout, j, local)


def condition_of_row(row, layout, segment_index):
    """The condition a given encoded row satisfies on one segment."""
    seg = layout.condition_segments[segment_index]
    block = np.asarray(row)[seg.offset:seg.offset + seg.width]
    local = int(np.argmax(block))
    return make_condition(layout, segment_index, local)


def matching_rows(X, layout, condition):
    seg = layout.condition_segments[condition.segment_index]
    return np.nonzero(X[:, seg.offset + condition.local] == 1.0)[0]


def draw_real_batch(X, layout, condition, rng, batch_size):
    """Uniform with replacement over the rows satisfying the condition.

    The sampled slot always has a positive training count, so the
    matching set is never empty.
    """
    idx = matching_rows(X, layout, condition)
    if idx.size == 0:
        raise ValueError("no rows satisfy the condition on %r"
                         % (condition.column,))
    return idx[rng.integers(idx.size, size=batch_size)]
