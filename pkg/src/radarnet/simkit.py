"""Scenario generation, world dynamics, and the per-tick experiment loop.

Five scenario families set radar/target counts and budgets so that the
non-saturated through heavily-saturated regimes are all realizable.
Within an episode both allocation methods consume identical measurement
noise: every (tick, radar, target) event derives its own generator from
the seed, so runs differ only by who measures what.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from typing import Callable, Iterable, Mapping

import numpy as np

from . import cbba, cop, tracking
from .geometry import CovEllipse, Vec2, ellipse_area, polar_cov_to_cartesian
from .tracking import NotVisible, RadarConfig, TrackState, as_load


class ScenarioKind(str, Enum):
    NON_SATURATED = "non_saturated"
    FEW_SATURATED = "few_saturated"
    SEVERAL_SATURATED = "several_saturated"
    MANY_SATURATED = "many_saturated"
    ILL_POSITIONED = "ill_positioned"


class Placement(str, Enum):
    GRID = "grid"
    CLUSTERED = "clustered"


# kind -> (n_radars, n_targets, per-radar budget, placement)
SCENARIO_PRESETS = {
    ScenarioKind.NON_SATURATED: (5, 10, Fraction(1), Placement.GRID),
    ScenarioKind.FEW_SATURATED: (3, 12, Fraction(3, 5), Placement.GRID),
    ScenarioKind.SEVERAL_SATURATED: (5, 20, Fraction(3, 5), Placement.GRID),
    ScenarioKind.MANY_SATURATED: (8, 30, Fraction(3, 5), Placement.GRID),
    ScenarioKind.ILL_POSITIONED: (4, 20, Fraction(4, 5), Placement.CLUSTERED),
}

# Sub-stream salts for per-event generators.
_STREAM_SCENARIO = 1
_STREAM_MANEUVER = 2
_STREAM_MEASURE = 3

NOMINAL_RANGE = 30_000.0


class EmptyScenario(ValueError):
    """Scenario with zero radars or targets."""


@dataclass(frozen=True)
class ScenarioSpec:
    kind: ScenarioKind | None = None
    seed: int = 0
    n_radars: int | None = None
    n_targets: int | None = None
    field_size: tuple[float, float] = (100_000.0, 100_000.0)
    placement: Placement | None = None
    budget: Fraction | None = None
    gamma: Fraction = Fraction(1, 5)
    speed_range: tuple[float, float] = (150.0, 300.0)
    maneuver_prob: float = 0.0
    max_turn: float = math.pi / 6
    tick_seconds: float = tracking.DEFAULT_TICK_SECONDS
    process_noise: float = tracking.DEFAULT_PROCESS_NOISE
    range_resolution: float = tracking.DEFAULT_RANGE_RESOLUTION
    azimuth_resolution: float = tracking.DEFAULT_AZIMUTH_RESOLUTION
    snr: float = tracking.DEFAULT_SNR
    max_range: float = tracking.DEFAULT_MAX_RANGE
    max_coast_ticks: int = 20
    a_ref: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "gamma", as_load(self.gamma))
        if self.budget is not None:
            object.__setattr__(self, "budget", as_load(self.budget))
        if self.kind is not None and not isinstance(self.kind, ScenarioKind):
            object.__setattr__(self, "kind", ScenarioKind(self.kind))
        if self.placement is not None and not isinstance(self.placement, Placement):
            object.__setattr__(self, "placement", Placement(self.placement))

    def resolved(self) -> "ScenarioSpec":
        """Fill unset fields from the kind's preset."""
        if self.kind is not None:
            nr, nt, budget, placement = SCENARIO_PRESETS[self.kind]
        else:
            nr, nt, budget, placement = None, None, Fraction(1), Placement.GRID
        return replace(
            self,
            n_radars=self.n_radars if self.n_radars is not None else nr,
            n_targets=self.n_targets if self.n_targets is not None else nt,
            budget=self.budget if self.budget is not None else budget,
            placement=self.placement if self.placement is not None else placement,
        )

    def reference_area(self) -> float:
        if self.a_ref is not None:
            return self.a_ref
        denom = math.sqrt(2.0 * self.snr)
        sigma_r = self.range_resolution / denom
        sigma_theta = self.azimuth_resolution / denom
        return math.pi * sigma_r * (NOMINAL_RANGE * sigma_theta)

    def to_jsonable(self) -> dict:
        return {
            "kind": self.kind.value if self.kind else None,
            "seed": self.seed,
            "n_radars": self.n_radars,
            "n_targets": self.n_targets,
            "field_size": list(self.field_size),
            "placement": self.placement.value if self.placement else None,
            "budget": str(self.budget) if self.budget is not None else None,
            "gamma": str(self.gamma),
            "speed_range": list(self.speed_range),
            "maneuver_prob": self.maneuver_prob,
            "max_turn": self.max_turn,
            "tick_seconds": self.tick_seconds,
            "process_noise": self.process_noise,
            "range_resolution": self.range_resolution,
            "azimuth_resolution": self.azimuth_resolution,
            "snr": self.snr,
            "max_range": self.max_range,
            "max_coast_ticks": self.max_coast_ticks,
            "a_ref": self.a_ref,
        }

    @classmethod
    def from_jsonable(cls, obj: dict) -> "ScenarioSpec":
        kwargs = dict(obj)
        if kwargs.get("kind"):
            kwargs["kind"] = ScenarioKind(kwargs["kind"])
        if kwargs.get("placement"):
            kwargs["placement"] = Placement(kwargs["placement"])
        if kwargs.get("field_size"):
            kwargs["field_size"] = tuple(kwargs["field_size"])
        if kwargs.get("speed_range"):
            kwargs["speed_range"] = tuple(kwargs["speed_range"])
        if kwargs.get("budget") is not None:
            kwargs["budget"] = as_load(kwargs["budget"])
        if kwargs.get("gamma") is not None:
            kwargs["gamma"] = as_load(kwargs["gamma"])
        return cls(**kwargs)


@dataclass(frozen=True)
class TargetTruth:
    id: int
    position: Vec2
    velocity: Vec2


@dataclass(frozen=True)
class World:
    spec: ScenarioSpec
    radars: tuple[RadarConfig, ...]
    targets: tuple[TargetTruth, ...]
    tick: int = 0


def _stream(seed: int, salt: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, salt, *key]))


def generate_scenario(spec: ScenarioSpec) -> World:
    """Deterministic world from the spec's seed.

    GRID places radars at the cell centers of the smallest near-square
    grid covering the field; CLUSTERED draws them uniformly inside one
    corner quadrant of 1/16 field area. Targets spawn on the field edges
    heading inward.
    """
    spec = spec.resolved()
    if not spec.n_radars or not spec.n_targets:
        raise EmptyScenario(f"need radars and targets, got {spec.n_radars}, {spec.n_targets}")
    rng = _stream(spec.seed, _STREAM_SCENARIO)
    w, h = spec.field_size
    radars = []
    if spec.placement is Placement.GRID:
        cols = math.ceil(math.sqrt(spec.n_radars))
        rows = math.ceil(spec.n_radars / cols)
        for n in range(spec.n_radars):
            r, c = divmod(n, cols)
            radars.append(
                RadarConfig(
                    id=n,
                    position=Vec2((c + 0.5) * w / cols, (r + 0.5) * h / rows),
                    budget=spec.budget,
                    range_resolution=spec.range_resolution,
                    azimuth_resolution=spec.azimuth_resolution,
                    snr=spec.snr,
                    max_range=spec.max_range,
                )
            )
    else:
        for n in range(spec.n_radars):
            radars.append(
                RadarConfig(
                    id=n,
                    position=Vec2(float(rng.uniform(0, w / 4)), float(rng.uniform(0, h / 4))),
                    budget=spec.budget,
                    range_resolution=spec.range_resolution,
                    azimuth_resolution=spec.azimuth_resolution,
                    snr=spec.snr,
                    max_range=spec.max_range,
                )
            )
    targets = []
    for j in range(spec.n_targets):
        edge = int(rng.integers(4))
        u = float(rng.uniform(0.0, 1.0))
        if edge == 0:
            pos, inward = Vec2(u * w, 0.0), math.pi / 2
        elif edge == 1:
            pos, inward = Vec2(u * w, h), -math.pi / 2
        elif edge == 2:
            pos, inward = Vec2(0.0, u * h), 0.0
        else:
            pos, inward = Vec2(w, u * h), math.pi
        heading = inward + float(rng.uniform(-math.pi / 3, math.pi / 3))
        speed = float(rng.uniform(*spec.speed_range))
        targets.append(
            TargetTruth(j, pos, Vec2(speed * math.cos(heading), speed * math.sin(heading)))
        )
    return World(spec, tuple(radars), tuple(targets), tick=0)


def step_world(world: World, dt: float | None = None) -> World:
    """Advance every target one step; leaving the field mirrors the heading."""
    spec = world.spec
    if dt is None:
        dt = spec.tick_seconds
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    w, h = spec.field_size
    rng = (
        _stream(spec.seed, _STREAM_MANEUVER, world.tick)
        if spec.maneuver_prob > 0.0
        else None
    )
    moved = []
    for t in world.targets:
        vx, vy = t.velocity.x, t.velocity.y
        if rng is not None and float(rng.uniform()) < spec.maneuver_prob:
            turn = float(rng.uniform(-spec.max_turn, spec.max_turn))
            c, s = math.cos(turn), math.sin(turn)
            vx, vy = c * vx - s * vy, s * vx + c * vy
        x = t.position.x + vx * dt
        y = t.position.y + vy * dt
        if x < 0.0:
            x, vx = -x, -vx
        elif x > w:
            x, vx = 2.0 * w - x, -vx
        if y < 0.0:
            y, vy = -y, -vy
        elif y > h:
            y, vy = 2.0 * h - y, -vy
        moved.append(TargetTruth(t.id, Vec2(x, y), Vec2(vx, vy)))
    return World(spec, world.radars, tuple(moved), world.tick + 1)


@dataclass(frozen=True)
class MetricsRecord:
    tick: int
    method: str
    seed: int
    scenario: str
    utility: float
    load_mean: float
    loads: dict = field(compare=False)
    coverage: float = 0.0
    conflicts: int = 0
    solver_optimal: bool = True


def pickup_ellipse(cfg: RadarConfig, truth_position: Vec2) -> CovEllipse:
    """Acquisition-sized uncertainty at the detection cue.

    Stands in for a track when a visible target is not tracked yet: the
    radars can pick targets up with an uncertainty that matches their
    distance (the covariance of one measurement at the target's range).
    """
    rel = truth_position - cfg.position
    r = rel.norm()
    sigma_r, sigma_theta = tracking.measurement_noise(r, cfg)
    theta = math.atan2(rel.y, rel.x)
    return CovEllipse(truth_position, polar_cov_to_cartesian(r, theta, sigma_r, sigma_theta))


def _tick_ellipses(world: World, tracks: Mapping[int, Mapping[int, TrackState]]) -> dict:
    """Per radar and target: the uncertainty the radar would bid with.

    The better (smaller-area) of the coasted track's position ellipse and
    a fresh acquisition at the target's current range: a radar can always
    drop a degraded track and re-acquire, so a maintained track never
    prices worse than a pickup. Without this floor, newborn tracks (whose
    predictions carry the unknown-velocity inflation) would price worse
    than the promise that created them and every method would churn its
    assignments. Out-of-range targets map to None.
    """
    out: dict = {}
    for cfg in world.radars:
        row: dict = {}
        for t in world.targets:
            try:
                pickup = pickup_ellipse(cfg, t.position)
            except NotVisible:
                pickup = None
            track = tracks[cfg.id].get(t.id)
            if track is not None:
                ell = CovEllipse(track.position(), track.position_cov())
                if pickup is not None and ellipse_area(pickup) < ellipse_area(ell):
                    ell = pickup
                row[t.id] = ell
            else:
                row[t.id] = pickup
        out[cfg.id] = row
    return out


def _realized_utility(alloc: cop.Allocation, ellipses: Mapping, a_ref: float) -> float:
    total = 0.0
    for i, k, j in alloc.w:
        ei = ellipses[i][j]
        if ei is None:
            continue
        if i == k:
            total += cop.pair_utility(ei, None, a_ref)
        else:
            ek = ellipses[k][j]
            if ek is None:
                continue
            total += cop.pair_utility(ei, ek, a_ref)
    return total


def _realized_loads(alloc: cop.Allocation, world: World, gamma: Fraction) -> dict:
    loads = {cfg.id: Fraction(0) for cfg in world.radars}
    diag = {(i, j) for (i, k, j) in alloc.w if i == k}
    for i, j in alloc.x_main:
        loads[i] += gamma
    for k, j in alloc.x_optional:
        if (k, j) not in diag:
            loads[k] += gamma
    return loads


def _measure_and_update(
    world: World,
    tracks: dict,
    assignments: Iterable[tuple[int, int]],
    radar_by_id: Mapping[int, RadarConfig],
    truth_by_id: Mapping[int, TargetTruth],
) -> None:
    spec = world.spec
    for i, j in sorted(set(assignments)):
        cfg = radar_by_id[i]
        rng = _stream(spec.seed, _STREAM_MEASURE, world.tick, i, j)
        try:
            m = tracking.synthesize_measurement(cfg, j, truth_by_id[j].position, world.tick, rng)
        except NotVisible:
            continue
        track = tracks[i].get(j)
        if track is None:
            tracks[i][j] = tracking.init_track(m, cfg.position)
        else:
            tracks[i][j] = tracking.kf_update(track, m, cfg.position)


def _drop_stale(tracks: dict, now: int, max_coast: int) -> None:
    for per_radar in tracks.values():
        stale = [j for j, t in per_radar.items() if now - t.last_update_tick > max_coast]
        for j in stale:
            del per_radar[j]


def complete_graph(ids: Iterable[int]) -> dict:
    ids = tuple(sorted(ids))
    return {i: tuple(x for x in ids if x != i) for i in ids}


def graph_from_edges(ids: Iterable[int], edges: Iterable[tuple[int, int]]) -> dict:
    adj: dict = {i: set() for i in sorted(ids)}
    for a, b in edges:
        if a not in adj or b not in adj:
            raise ValueError(f"edge ({a}, {b}) references unknown radar id")
        if a != b:
            adj[a].add(b)
            adj[b].add(a)
    return {i: tuple(sorted(n)) for i, n in adj.items()}


def is_path_connected(adj: Mapping[int, Iterable[int]]) -> bool:
    ids = sorted(adj)
    if not ids:
        return True
    seen = {ids[0]}
    frontier = [ids[0]]
    while frontier:
        nxt = []
        for i in frontier:
            for n in adj[i]:
                if n not in seen:
                    seen.add(n)
                    nxt.append(n)
        frontier = nxt
    return len(seen) == len(ids)


def graph_diameter(adj: Mapping[int, Iterable[int]]) -> int:
    ids = sorted(adj)
    diameter = 0
    for src in ids:
        dist = {src: 0}
        frontier = [src]
        while frontier:
            nxt = []
            for i in frontier:
                for n in adj[i]:
                    if n not in dist:
                        dist[n] = dist[i] + 1
                        nxt.append(n)
            frontier = nxt
        if len(dist) != len(ids):
            raise ValueError("graph is not connected")
        diameter = max(diameter, max(dist.values()))
    return diameter


def run_episode(
    spec: ScenarioSpec,
    method: str,
    n_ticks: int,
    time_limit: float = 0.1,
    comm_graph: Mapping[int, Iterable[int]] | Callable[[int], Mapping] | None = None,
    recorder: cbba.TranscriptRecorder | None = None,
) -> list[MetricsRecord]:
    """Simulate one seeded episode under one allocation method.

    method "central" rebuilds and solves the full instance every tick
    from a global view of all radars' tracks; "cbba" runs the
    decentralized auction loop. Both apply their allocation by measuring
    the assigned targets and updating the owning radar's Kalman tracks,
    then every realized allocation is validated against that tick's
    instance (a violation is a bug, not a metric).
    """
    if method not in ("cbba", "central"):
        raise ValueError(f"unknown method {method!r}")
    if not n_ticks > 0:
        raise ValueError(f"n_ticks must be positive, got {n_ticks}")
    spec = spec.resolved()
    world = generate_scenario(spec)
    radar_by_id = {cfg.id: cfg for cfg in world.radars}
    radar_ids = tuple(sorted(radar_by_id))
    target_ids = tuple(t.id for t in world.targets)
    a_ref = spec.reference_area()
    gamma = spec.gamma
    tracks: dict = {i: {} for i in radar_ids}
    if comm_graph is None:
        graph_at = lambda t: complete_graph(radar_ids)
    elif callable(comm_graph):
        graph_at = comm_graph
    else:
        graph_at = lambda t: comm_graph

    agents: dict[int, cbba.AgentState] = {}
    if method == "cbba":
        for i in radar_ids:
            agents[i] = cbba.AgentState(radar_by_id[i], target_ids, radar_ids)

    records: list[MetricsRecord] = []
    for t in range(n_ticks):
        # Coast every existing track to the current tick.
        for i in radar_ids:
            for j, track in list(tracks[i].items()):
                tracks[i][j] = tracking.kf_predict(track, spec.tick_seconds, spec.process_noise)
        ellipses = _tick_ellipses(world, tracks)
        truth_by_id = {tt.id: tt for tt in world.targets}
        solver_optimal = True
        conflicts = 0

        if method == "central":
            inst = cop.build_instance(list(world.radars), ellipses, a_ref, gamma)
            result = cop.solve_exact(inst, time_limit)
            alloc = result.allocation
            solver_optimal = result.optimal
            assigned = set(alloc.x_main) | set(alloc.x_optional)
        else:
            table = cbba.UtilityTable(
                main={
                    (i, j): cop.pair_utility(ellipses[i][j], None, a_ref)
                    for i in radar_ids
                    for j in target_ids
                    if ellipses[i][j] is not None
                },
                payload={
                    (i, j): ellipses[i][j]
                    for i in radar_ids
                    for j in target_ids
                    if ellipses[i][j] is not None
                },
                pair=lambda winner, payload, bidder, j: (
                    cop.pair_utility(payload, ellipses[bidder][j], a_ref)
                    - cop.pair_utility(payload, None, a_ref)
                    if payload is not None and ellipses[bidder][j] is not None
                    else 0.0
                ),
                gamma={(i, j): gamma for i in radar_ids for j in target_ids},
                target_ids=target_ids,
                agent_ids=radar_ids,
            )
            result = cbba.tick(agents, graph_at(t), table, t, recorder=recorder)
            alloc = result.allocation
            conflicts = result.conflicts
            # Radars act on their own beliefs, not the deduplicated view.
            assigned = set()
            for i in radar_ids:
                for j in agents[i].main.bundle:
                    assigned.add((i, j))
                for j in agents[i].optional.bundle:
                    assigned.add((i, j))

        check = cop.CopInstance(
            radar_ids,
            target_ids,
            {},
            {(i, j): gamma for i in radar_ids for j in target_ids},
            {i: radar_by_id[i].budget for i in radar_ids},
        )
        violations = cop.validate(check, alloc)
        if violations:
            raise RuntimeError(f"infeasible realized allocation at tick {t}: {violations[0]}")

        utility = _realized_utility(alloc, ellipses, a_ref)
        loads = _realized_loads(alloc, world, gamma)
        covered = {j for (_, _, j) in alloc.w}
        records.append(
            MetricsRecord(
                tick=t,
                method=method,
                seed=spec.seed,
                scenario=spec.kind.value if spec.kind else "custom",
                utility=utility,
                load_mean=float(np.mean([float(v) for v in loads.values()])),
                loads={i: float(v) for i, v in loads.items()},
                coverage=len(covered) / len(target_ids),
                conflicts=conflicts,
                solver_optimal=solver_optimal,
            )
        )

        _measure_and_update(world, tracks, assigned, radar_by_id, truth_by_id)
        _drop_stale(tracks, t, spec.max_coast_ticks)
        world = step_world(world)
    return records


@dataclass(frozen=True)
class AggregateRow:
    tick: int
    utility_mean: float
    utility_std: float
    load_mean: float
    load_std: float
    coverage_mean: float
    coverage_std: float
    conflicts_mean: float
    conflicts_std: float


def aggregate(records: Iterable[MetricsRecord]) -> dict[str, list[AggregateRow]]:
    """Per-tick mean and unbiased std of every metric, grouped by method."""
    grouped: dict[tuple[str, int], list[MetricsRecord]] = {}
    for rec in records:
        grouped.setdefault((rec.method, rec.tick), []).append(rec)
    if not grouped:
        raise ValueError("no records to aggregate")

    def stats(values: list[float]) -> tuple[float, float]:
        mean = float(np.mean(values))
        std = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
        return mean, std

    out: dict[str, list[AggregateRow]] = {}
    for (method, t) in sorted(grouped):
        rows = grouped[(method, t)]
        um, us = stats([r.utility for r in rows])
        lm, ls = stats([r.load_mean for r in rows])
        cm, cs = stats([r.coverage for r in rows])
        fm, fs = stats([float(r.conflicts) for r in rows])
        out.setdefault(method, []).append(AggregateRow(t, um, us, lm, ls, cm, cs, fm, fs))
    return out
