"""Per-user content-class involvement and highly-aligned user classification.

A user's involvement in a class counts the retweets they give or receive
in that class's network (weighted in-strength plus out-strength). A user is
highly aligned with a class when its share of their total involvement
strictly exceeds the threshold theta; with theta >= 0.5 at most one class
can qualify.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .events import CONTENT_CLASSES
from .graph import WeightedDigraph

UNALIGNED = "unaligned"


@dataclass(frozen=True)
class InvolvementProfile:
    user: str
    counts: dict[str, int]  # content class -> retweets given + received
    total: int

    def proportion(self, content_class: str) -> float:
        return self.counts.get(content_class, 0) / self.total


@dataclass(frozen=True)
class AlignmentLabel:
    user: str
    label: str  # a content class, or "unaligned"
    theta: float


def involvement_profiles(graphs_by_class: Mapping[str, WeightedDigraph]) -> dict[str, InvolvementProfile]:
    """Involvement per user across the per-class graphs.

    counts[c] = in-strength + out-strength of the user in the class-c
    graph. Users absent from every graph are absent from the result.
    """
    unknown = set(graphs_by_class) - set(CONTENT_CLASSES)
    if unknown:
        raise ValueError(f"unknown content classes: {sorted(unknown)}")
    acc: dict[str, dict[str, int]] = {}
    for cls, g in graphs_by_class.items():
        strength = g.s_in + g.s_out
        for i, label in enumerate(g.labels):
            s = int(strength[i])
            if s > 0:
                acc.setdefault(label, {})[cls] = acc.get(label, {}).get(cls, 0) + s
    return {
        user: InvolvementProfile(user, counts, sum(counts.values()))
        for user, counts in acc.items()
    }


def classify_alignment(profile: InvolvementProfile, theta: float) -> AlignmentLabel:
    """Label the profile with the class holding > theta of its involvement."""
    if not (0.5 <= theta < 1.0):
        raise ValueError(f"theta must be in [0.5, 1), got {theta}")
    if profile.total <= 0:
        raise ValueError(f"profile for {profile.user!r} has no involvement")
    for cls in CONTENT_CLASSES:
        if profile.counts.get(cls, 0) / profile.total > theta:
            return AlignmentLabel(profile.user, cls, theta)
    return AlignmentLabel(profile.user, UNALIGNED, theta)


def classify_all(
    profiles: Mapping[str, InvolvementProfile],
    theta: float,
    min_involvement: int = 0,
) -> dict[str, AlignmentLabel]:
    """Classify every profile; profiles below min_involvement are unaligned.

    The involvement floor is off by default (0).
    """
    labels: dict[str, AlignmentLabel] = {}
    for user, profile in profiles.items():
        if profile.total < min_involvement:
            labels[user] = AlignmentLabel(user, UNALIGNED, theta)
        else:
            labels[user] = classify_alignment(profile, theta)
    return labels


def aligned_users(labels: Mapping[str, AlignmentLabel], content_class: str) -> set[str]:
    return {u for u, lab in labels.items() if lab.label == content_class}


def coverage_curve(
    profiles: Mapping[str, InvolvementProfile],
    class_graph: WeightedDigraph,
    content_class: str,
    theta_grid: Sequence[float],
) -> list[tuple[float, float]]:
    """Fraction of class retweets involving users aligned to that class.

    A retweet involves an aligned user when either endpoint is aligned to
    the retweet's class at the given threshold. Non-increasing in theta.
    """
    grid = list(theta_grid)
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("theta_grid must be sorted ascending")
    total = class_graph.total_weight
    if total == 0:
        raise ValueError(f"no retweets of class {content_class!r}")
    # Highest qualifying threshold per node: aligned at theta iff prop > theta.
    props = np.zeros(class_graph.n_nodes, dtype=np.float64)
    for i, label in enumerate(class_graph.labels):
        profile = profiles.get(label)
        if profile is not None and profile.total > 0:
            props[i] = profile.proportion(content_class)
    curve = []
    for theta in grid:
        if not (0.5 <= theta < 1.0):
            raise ValueError(f"theta must be in [0.5, 1), got {theta}")
        aligned = props > theta
        covered = aligned[class_graph.edge_src] | aligned[class_graph.edge_dst]
        curve.append((float(theta), float(class_graph.edge_weight[covered].sum() / total)))
    return curve


def ternary_histogram(
    profiles: Iterable[InvolvementProfile],
    bins_per_side: int,
) -> dict[tuple[int, int], int]:
    """Bin profiles on the (factual, misleading, uncertain) proportion simplex.

    Cell (i, j) covers factual share in [i/B, (i+1)/B) and misleading share
    in [j/B, (j+1)/B); boundary profiles on the far edge are assigned to the
    adjacent interior cell, so counts always sum to the number of profiles.
    """
    if bins_per_side < 1:
        raise ValueError(f"bins_per_side must be >= 1, got {bins_per_side}")
    b = bins_per_side
    hist: dict[tuple[int, int], int] = {}
    factual, misleading = CONTENT_CLASSES[0], CONTENT_CLASSES[1]
    for profile in profiles:
        i = min(int(profile.proportion(factual) * b), b - 1)
        j = min(int(profile.proportion(misleading) * b), b - 1)
        while i + j > b - 1:
            if j > 0:
                j -= 1
            else:
                i -= 1
        hist[(i, j)] = hist.get((i, j), 0) + 1
    return hist
