"""Shared oracles and generators, all independent of the code paths they check."""

import math
from fractions import Fraction

import numpy as np


from radarnet.cop import CopInstance, pair_utility
from radarnet.geometry import Cov2, CovEllipse, Vec2, mahalanobis_sq


def mc_intersection_area(a: CovEllipse, b: CovEllipse, n: int = 10**6, seed: int = 0) -> float:
    """Rejection-sampling estimate over the overlap of the two bounding boxes."""
    lo = np.maximum(
        [a.center.x - a.k * math.sqrt(a.cov.m00), a.center.y - a.k * math.sqrt(a.cov.m11)],
        [b.center.x - b.k * math.sqrt(b.cov.m00), b.center.y - b.k * math.sqrt(b.cov.m11)],
    )
    hi = np.minimum(
        [a.center.x + a.k * math.sqrt(a.cov.m00), a.center.y + a.k * math.sqrt(a.cov.m11)],
        [b.center.x + b.k * math.sqrt(b.cov.m00), b.center.y + b.k * math.sqrt(b.cov.m11)],
    )
    if np.any(hi <= lo):
        return 0.0
    rng = np.random.default_rng(seed)
    pts = rng.uniform(lo, hi, (n, 2))
    inside = (mahalanobis_sq(a, pts) <= a.k * a.k) & (mahalanobis_sq(b, pts) <= b.k * b.k)
    return float(np.prod(hi - lo) * inside.mean())


def circle_lens_oracle(d: float, r1: float, r2: float) -> float:
    """Independent closed-form circle overlap for cross-checking."""
    if d >= r1 + r2:
        return 0.0
    if d <= abs(r1 - r2):
        return math.pi * min(r1, r2) ** 2
    part1 = r1 * r1 * math.acos((d * d + r1 * r1 - r2 * r2) / (2 * d * r1))
    part2 = r2 * r2 * math.acos((d * d + r2 * r2 - r1 * r1) / (2 * d * r2))
    part3 = 0.5 * math.sqrt(
        (-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2)
    )
    return part1 + part2 - part3


def rotated_cov(angle: float, s_major: float, s_minor: float) -> Cov2:
    c, s = math.cos(angle), math.sin(angle)
    a = s_major * s_major
    b = s_minor * s_minor
    return Cov2(
        a * c * c + b * s * s,
        (a - b) * s * c,
        (a - b) * s * c,
        a * s * s + b * c * c,
    )


def random_ellipse(rng: np.random.Generator, center_scale: float = 50.0) -> CovEllipse:
    angle = float(rng.uniform(0, math.pi))
    s1, s2 = np.exp(rng.uniform(np.log(20), np.log(400), 2))
    cx, cy = rng.normal(0.0, center_scale, 2)
    return CovEllipse(Vec2(float(cx), float(cy)), rotated_cov(angle, float(s1), float(s2)))


def brute_force_objective(inst: CopInstance) -> float:
    """Exhaustive enumeration over all per-target choices within budgets."""
    targets = sorted(inst.target_ids)
    radars = sorted(inst.radar_ids)
    best = 0.0

    def rec(idx: int, value: float, budgets: dict) -> None:
        nonlocal best
        if idx == len(targets):
            best = max(best, value)
            return
        j = targets[idx]
        rec(idx + 1, value, budgets)
        for i in radars:
            for k in radars:
                v = inst.utility(i, k, j)
                if v <= 0.0:
                    continue
                nxt = dict(budgets)
                nxt[i] -= inst.gamma[(i, j)]
                if k != i:
                    nxt[k] -= inst.gamma[(k, j)]
                if nxt[i] < 0 or nxt[k] < 0:
                    continue
                rec(idx + 1, value + v, nxt)

    rec(0, 0.0, {i: inst.budget[i] for i in radars})
    return best


def random_table_instance(rng: np.random.Generator, n_radars: int, n_targets: int) -> CopInstance:
    """Arbitrary utility tensor (no geometric structure)."""
    radar_ids = tuple(range(n_radars))
    target_ids = tuple(range(n_targets))
    c = {}
    for j in target_ids:
        for i in radar_ids:
            for k in radar_ids:
                c[(i, k, j)] = (
                    0.0 if rng.random() < 0.15 else float(np.round(rng.uniform(0, 1), 6))
                )
    gamma = {
        (i, j): Fraction(int(rng.integers(1, 4)), 10) for i in radar_ids for j in target_ids
    }
    budget = {i: Fraction(int(rng.integers(2, 11)), 10) for i in radar_ids}
    return CopInstance(radar_ids, target_ids, c, gamma, budget)


def random_geometric_instance(
    rng: np.random.Generator, n_radars: int, n_targets: int, a_ref: float = 19_000.0
) -> CopInstance:
    """Utilities realized from random uncertainty ellipses, like the simulator's."""
    radar_ids = tuple(range(n_radars))
    target_ids = tuple(range(n_targets))
    ellipses = {}
    for i in radar_ids:
        row = {}
        for j in target_ids:
            if rng.random() < 0.15:
                row[j] = None
                continue
            e = random_ellipse(rng, center_scale=60.0)
            row[j] = CovEllipse(Vec2(e.center.x + 1000.0 * j, e.center.y), e.cov)
        ellipses[i] = row
    c = {}
    for j in target_ids:
        for ai, i in enumerate(radar_ids):
            ei = ellipses[i][j]
            c[(i, i, j)] = pair_utility(ei, None, a_ref) if ei is not None else 0.0
            for k in radar_ids[ai + 1 :]:
                ek = ellipses[k][j]
                u = (
                    pair_utility(ei, ek, a_ref)
                    if (ei is not None and ek is not None)
                    else 0.0
                )
                c[(i, k, j)] = u
                c[(k, i, j)] = u
    gamma = {(i, j): Fraction(1, 5) for i in radar_ids for j in target_ids}
    budget = {i: Fraction(int(rng.choice([2, 3, 5])), 5) for i in radar_ids}
    return CopInstance(radar_ids, target_ids, c, gamma, budget)


def random_connected_graph(rng: np.random.Generator, ids) -> dict:
    """Random spanning tree plus a few extra edges."""
    ids = sorted(ids)
    adj = {i: set() for i in ids}
    shuffled = list(ids)
    rng.shuffle(shuffled)
    for n in range(1, len(shuffled)):
        other = shuffled[int(rng.integers(0, n))]
        adj[shuffled[n]].add(other)
        adj[other].add(shuffled[n])
    for a in ids:
        for b in ids:
            if a < b and rng.random() < 0.2:
                adj[a].add(b)
                adj[b].add(a)
    return {i: tuple(sorted(adj[i])) for i in ids}


