"""The per-tick allocation problem and its exact centralized solver.

An instance prices every (main radar, optional radar, target) triple by
the overlap of the two uncertainty ellipses; an allocation picks at most
one such triple per target (single-radar tracking is the diagonal triple
w_iij) subject to per-radar load budgets. The solver does depth-first
branch and bound over per-target choices with a fractional-knapsack
bound on an aggregated budget.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np
from numba import njit

from .geometry import CovEllipse, ellipse_area, ellipse_intersection_area
from .tracking import RadarConfig, as_load

DEFAULT_GAMMA = Fraction(1, 5)
_TIE_EPS = 1e-12


class EmptyInstance(ValueError):
    """Instance has no radars or no targets."""


class ContractError(ValueError):
    """Caller violated an operation contract (unknown ids, infeasible input)."""


def pair_utility(main: CovEllipse, optional: CovEllipse | None, a_ref: float) -> float:
    """Utility in (0, 1] of tracking one target with one or two radars.

    Single radar: 1 / (1 + area(main)/a_ref). Pair: same with the overlap
    area of the two ellipses, which is contained in each ellipse, so a
    pair is never worth less than its main radar alone.
    """
    if not a_ref > 0.0:
        raise ContractError(f"a_ref must be positive, got {a_ref}")
    if optional is None:
        v = ellipse_area(main)
    else:
        v = ellipse_intersection_area(main, optional)
    return 1.0 / (1.0 + v / a_ref)


@dataclass(frozen=True)
class CopInstance:
    radar_ids: tuple[int, ...]
    target_ids: tuple[int, ...]
    c: dict
    gamma: dict
    budget: dict

    def __post_init__(self):
        if not self.radar_ids or not self.target_ids:
            raise EmptyInstance("instance needs at least one radar and one target")
        if len(set(self.radar_ids)) != len(self.radar_ids):
            raise ContractError("duplicate radar ids")
        if len(set(self.target_ids)) != len(self.target_ids):
            raise ContractError("duplicate target ids")
        radars = set(self.radar_ids)
        targets = set(self.target_ids)
        for (i, k, j), v in self.c.items():
            if i not in radars or k not in radars or j not in targets:
                raise ContractError(f"utility key ({i}, {k}, {j}) outside instance ids")
            if v < 0.0 or not math.isfinite(v):
                raise ContractError(f"utility c[{i},{k},{j}] = {v} must be finite and >= 0")
        for i in self.radar_ids:
            if self.budget.get(i, Fraction(0)) <= 0:
                raise ContractError(f"radar {i} needs a positive budget")
            for j in self.target_ids:
                if self.gamma.get((i, j), Fraction(0)) <= 0:
                    raise ContractError(f"gamma[{i},{j}] must be positive")

    def utility(self, i: int, k: int, j: int) -> float:
        return self.c.get((i, k, j), 0.0)


@dataclass(frozen=True)
class Allocation:
    """Values of the decision variables: main pairs, optional pairs, triples."""

    x_main: frozenset
    x_optional: frozenset
    w: frozenset

    @classmethod
    def empty(cls) -> "Allocation":
        return cls(frozenset(), frozenset(), frozenset())

    @classmethod
    def from_triples(cls, triples: Iterable[tuple[int, int, int]]) -> "Allocation":
        """Consistent allocation from chosen (main, optional, target) triples.

        The diagonal triple (i, i, j) is single-radar tracking and sets
        both x_main and x_optional so constraint (L) counts its load once.
        """
        x_main = set()
        x_optional = set()
        w = set()
        for i, k, j in triples:
            x_main.add((i, j))
            x_optional.add((k, j))
            w.add((i, k, j))
        return cls(frozenset(x_main), frozenset(x_optional), frozenset(w))


@dataclass(frozen=True)
class Violation:
    kind: str  # "A", "C2" or "L"
    subject: tuple
    detail: str
    excess: Fraction | None = None

    def __str__(self) -> str:
        return f"({self.kind}) {self.detail}"


def validate(inst: CopInstance, a: Allocation) -> list[Violation]:
    """All constraint violations of the allocation; empty means feasible."""
    radars = set(inst.radar_ids)
    targets = set(inst.target_ids)
    for i, j in a.x_main | a.x_optional:
        if i not in radars or j not in targets:
            raise ContractError(f"allocation references unknown pair ({i}, {j})")
    for i, k, j in a.w:
        if i not in radars or k not in radars or j not in targets:
            raise ContractError(f"allocation references unknown triple ({i}, {k}, {j})")

    out: list[Violation] = []
    # (A): w must equal the conjunction of the x variables, triple by triple.
    implied = {
        (i, k, j)
        for (i, j) in a.x_main
        for (k, j2) in a.x_optional
        if j2 == j
    }
    for t in sorted(implied - a.w):
        out.append(Violation("A", t, f"x_main and x_optional set but w{t} missing"))
    for t in sorted(a.w - implied):
        out.append(Violation("A", t, f"w{t} set without matching x_main/x_optional"))
    # (C2): at most one sensor combination per target.
    per_target: dict[int, int] = {}
    for _, _, j in a.w:
        per_target[j] = per_target.get(j, 0) + 1
    for j in sorted(per_target):
        if per_target[j] > 1:
            out.append(
                Violation("C2", (j,), f"target {j} has {per_target[j]} sensor combinations")
            )
    # (L): per-radar load within budget; single-radar triples count once.
    main_by_radar: dict[int, set[int]] = {i: set() for i in inst.radar_ids}
    opt_by_radar: dict[int, set[int]] = {i: set() for i in inst.radar_ids}
    for i, j in a.x_main:
        main_by_radar[i].add(j)
    for k, j in a.x_optional:
        opt_by_radar[k].add(j)
    diag = {(i, j) for (i, k, j) in a.w if i == k}
    for i in inst.radar_ids:
        load = Fraction(0)
        for j in inst.target_ids:
            terms = int(j in main_by_radar[i]) + int(j in opt_by_radar[i]) - int((i, j) in diag)
            if terms:
                load += inst.gamma[(i, j)] * terms
        if load > inst.budget[i]:
            out.append(
                Violation(
                    "L",
                    (i,),
                    f"radar {i} load {load} exceeds budget {inst.budget[i]}",
                    excess=load - inst.budget[i],
                )
            )
    return out


def objective(inst: CopInstance, a: Allocation) -> float:
    """Sum of utilities over the chosen triples; the allocation must be feasible."""
    violations = validate(inst, a)
    if violations:
        raise ContractError(f"infeasible allocation: {violations[0]}")
    return sum(inst.utility(i, k, j) for (i, k, j) in a.w)


def build_instance(
    radars: Sequence[RadarConfig],
    ellipses: Mapping[int, Mapping[int, CovEllipse | None]],
    a_ref: float,
    gamma=DEFAULT_GAMMA,
) -> CopInstance:
    """Instance from each radar's predicted ellipse (None marks not visible).

    Utilities involving a radar that cannot see the target are zero. The
    pair overlap is symmetric, so c[i,k,j] == c[k,i,j] by construction.
    """
    if not radars:
        raise EmptyInstance("no radars")
    radar_ids = tuple(cfg.id for cfg in radars)
    if set(ellipses.keys()) != set(radar_ids):
        raise ContractError("ellipse map must cover exactly the given radars")
    target_sets = {frozenset(ellipses[i].keys()) for i in radar_ids}
    if len(target_sets) != 1:
        raise ContractError("all radars must report the same target set")
    target_ids = tuple(sorted(target_sets.pop()))
    if not target_ids:
        raise EmptyInstance("no targets")

    if isinstance(gamma, Mapping):
        gamma_map = {
            (i, j): as_load(gamma[(i, j)]) for i in radar_ids for j in target_ids
        }
    else:
        g = as_load(gamma)
        gamma_map = {(i, j): g for i in radar_ids for j in target_ids}

    c: dict = {}
    for j in target_ids:
        for ai, i in enumerate(radar_ids):
            ei = ellipses[i][j]
            c[(i, i, j)] = pair_utility(ei, None, a_ref) if ei is not None else 0.0
            for k in radar_ids[ai + 1 :]:
                ek = ellipses[k][j]
                if ei is not None and ek is not None:
                    u = pair_utility(ei, ek, a_ref)
                else:
                    u = 0.0
                c[(i, k, j)] = u
                c[(k, i, j)] = u
    budget = {cfg.id: cfg.budget for cfg in radars}
    return CopInstance(radar_ids, target_ids, c, gamma_map, budget)


@dataclass(frozen=True)
class SolveResult:
    allocation: Allocation
    objective: float
    optimal: bool


def _hull_increments(weighted: list[tuple[int, float]]) -> list[tuple[int, float]]:
    """Concave-envelope increments (dweight, dvalue) of (weight, value) points.

    The LP relaxation of a multiple-choice knapsack takes these greedily
    by efficiency, so treating them as independent fractional items gives
    a valid upper bound.
    """
    best_by_weight: dict[int, float] = {}
    for w, v in weighted:
        if v > best_by_weight.get(w, 0.0):
            best_by_weight[w] = v
    env: list[tuple[int, float]] = [(0, 0.0)]
    for w, v in sorted(best_by_weight.items()):
        if v <= env[-1][1]:
            continue
        while len(env) >= 2:
            w1, v1 = env[-1]
            w0, v0 = env[-2]
            if (v - v0) * (w1 - w0) >= (v1 - v0) * (w - w0):
                env.pop()
            else:
                break
        env.append((w, v))
    return [
        (env[n][0] - env[n - 1][0], env[n][1] - env[n - 1][1])
        for n in range(1, len(env))
    ]


@njit(cache=True)
def _bound(
    idx, total_residual, threshold,
    inc_t, inc_w, inc_v,
    rinc_off, rinc_t, rinc_w, rinc_v,
    budgets,
):  # pragma: no cover
    """Upper bound on remaining value over targets >= idx.

    First bound: one aggregated budget over per-target hull increments
    (the LP relaxation of the multiple-choice knapsack). If that does not
    already prune (<= threshold), tighten with a per-radar decomposition:
    every option's value is split across its radars proportional to the
    load it puts there, and each radar fractionally fills its own residual
    budget. Any feasible completion takes at most one option per target,
    so its per-radar value shares are feasible for those knapsacks.
    """
    bound = 0.0
    cap = total_residual
    for n in range(inc_t.shape[0]):
        if inc_t[n] < idx:
            continue
        dw = inc_w[n]
        if dw <= cap:
            bound += inc_v[n]
            cap -= dw
            if cap == 0:
                break
        else:
            bound += inc_v[n] * (cap / dw)
            break
    if bound <= threshold:
        return bound
    split = 0.0
    for r in range(rinc_off.shape[0] - 1):
        cap = budgets[r]
        if cap <= 0:
            continue
        for n in range(rinc_off[r], rinc_off[r + 1]):
            if rinc_t[n] < idx:
                continue
            dw = rinc_w[n]
            if dw <= cap:
                split += rinc_v[n]
                cap -= dw
                if cap == 0:
                    break
            else:
                split += rinc_v[n] * (cap / dw)
                break
        if split > bound:
            return bound
    return min(bound, split)


_SEARCH_DONE = 0
_SEARCH_PAUSED = 1


@njit(cache=True)
def _search_chunk(
    opt_off, opt_i, opt_k, opt_v, opt_ci, opt_ck,
    inc_t, inc_w, inc_v,
    rinc_off, rinc_t, rinc_w, rinc_v,
    budgets,
    cursor, applied, best_choice, state_f, state_i,
    max_nodes, tie_eps,
):  # pragma: no cover
    """Run up to max_nodes steps of the depth-first search, resumably.

    Mutable state between calls: cursor/applied per level, residual
    budgets, state_f = (value, best_value), state_i = (idx, entering,
    total_residual). Options at a level are tried in stored (ascending
    i, k) order with "skip" last, so the first optimum found carries the
    lexicographically smallest triple list and ties are pruned after it.
    """
    nt = opt_off.shape[0] - 1
    value = state_f[0]
    best_value = state_f[1]
    idx = state_i[0]
    entering = state_i[1] == 1
    total_residual = state_i[2]
    nodes = 0
    while idx >= 0:
        if entering:
            nodes += 1
            if nodes >= max_nodes:
                state_f[0] = value
                state_f[1] = best_value
                state_i[0] = idx
                state_i[1] = 1
                state_i[2] = total_residual
                return _SEARCH_PAUSED
            if idx == nt:
                if value > best_value:
                    best_value = value
                    for lv in range(nt):
                        best_choice[lv] = applied[lv]
                idx -= 1
                entering = False
                if idx >= 0:
                    a = applied[idx]
                    if a >= 0:
                        value -= opt_v[a]
                        ci = opt_ci[a]
                        budgets[opt_i[a]] += ci
                        total_residual += ci
                        ck = opt_ck[a]
                        if ck > 0:
                            budgets[opt_k[a]] += ck
                            total_residual += ck
                continue
            threshold = best_value + tie_eps - value
            b = _bound(
                idx, total_residual, threshold,
                inc_t, inc_w, inc_v, rinc_off, rinc_t, rinc_w, rinc_v, budgets,
            )
            if b <= threshold:
                idx -= 1
                entering = False
                if idx >= 0:
                    a = applied[idx]
                    if a >= 0:
                        value -= opt_v[a]
                        ci = opt_ci[a]
                        budgets[opt_i[a]] += ci
                        total_residual += ci
                        ck = opt_ck[a]
                        if ck > 0:
                            budgets[opt_k[a]] += ck
                            total_residual += ck
                continue
            cursor[idx] = opt_off[idx]
            entering = False
            continue
        c = cursor[idx]
        end = opt_off[idx + 1]
        if c < end:
            cursor[idx] = c + 1
            ci = opt_ci[c]
            bi = opt_i[c]
            if budgets[bi] < ci:
                continue
            ck = opt_ck[c]
            bk = opt_k[c]
            if ck > 0 and budgets[bk] < ck:
                continue
            budgets[bi] -= ci
            total_residual -= ci
            if ck > 0:
                budgets[bk] -= ck
                total_residual -= ck
            value += opt_v[c]
            applied[idx] = c
            idx += 1
            entering = True
            continue
        if c == end:
            # Skipping the target is always explored last.
            cursor[idx] = c + 1
            applied[idx] = -1
            idx += 1
            entering = True
            continue
        # Options exhausted at this level: backtrack.
        idx -= 1
        if idx >= 0:
            a = applied[idx]
            if a >= 0:
                value -= opt_v[a]
                ci = opt_ci[a]
                budgets[opt_i[a]] += ci
                total_residual += ci
                ck = opt_ck[a]
                if ck > 0:
                    budgets[opt_k[a]] += ck
                    total_residual += ck
    state_f[0] = value
    state_f[1] = best_value
    state_i[0] = idx
    state_i[1] = 0
    state_i[2] = total_residual
    return _SEARCH_DONE


def _greedy_choices(options: list, budgets: list) -> tuple[float, list]:
    """Best of two feasible incumbents.

    Pass one covers targets in descending best-value order with whatever
    fits; pass two covers with best singles first, then spends leftover
    budget on the most improving pair upgrades, which matches how tight
    budgets want to be used.
    """
    n_targets = len(options)

    def by_value() -> tuple[float, list]:
        res = list(budgets)
        value = 0.0
        choice = []
        order = sorted(
            range(n_targets),
            key=lambda n: -max((o[2] for o in options[n]), default=0.0),
        )
        for j in order:
            for i, k, v, ci, ck in sorted(options[j], key=lambda o: (-o[2], o[0], o[1])):
                if res[i] < ci or (ck > 0 and res[k] < ck):
                    continue
                res[i] -= ci
                if ck > 0:
                    res[k] -= ck
                value += v
                choice.append((j, i, k, v))
                break
        return value, choice

    def singles_first() -> tuple[float, list]:
        res = list(budgets)
        value = 0.0
        chosen: dict[int, tuple] = {}
        singles = {}
        for j in range(n_targets):
            cands = [(v, i, ci) for (i, k, v, ci, ck) in options[j] if ck == 0]
            if cands:
                singles[j] = max(cands)
        for j in sorted(singles, key=lambda j: -singles[j][0]):
            for v, i, ci in sorted(
                ((v, i, ci) for (i, k, v, ci, ck) in options[j] if ck == 0), reverse=True
            ):
                if res[i] >= ci:
                    res[i] -= ci
                    value += v
                    chosen[j] = (i, i, v, ci, 0)
                    break
        upgraded = True
        while upgraded:
            upgraded = False
            best_gain = 0.0
            best = None
            for j in range(n_targets):
                cur = chosen.get(j)
                cur_v = cur[2] if cur else 0.0
                for i, k, v, ci, ck in options[j]:
                    if v - cur_v <= best_gain:
                        continue
                    free_i = res[i] + (cur[3] if cur and cur[0] == i else 0) + (
                        cur[4] if cur and cur[1] == i else 0
                    )
                    free_k = res[k] + (cur[3] if cur and cur[0] == k else 0) + (
                        cur[4] if cur and cur[1] == k else 0
                    )
                    if i == k:
                        if free_i < ci:
                            continue
                    elif free_i < ci or free_k < ck:
                        continue
                    best_gain = v - cur_v
                    best = (j, i, k, v, ci, ck)
            if best is not None:
                j, i, k, v, ci, ck = best
                cur = chosen.get(j)
                if cur:
                    res[cur[0]] += cur[3]
                    if cur[4] > 0:
                        res[cur[1]] += cur[4]
                    value -= cur[2]
                res[i] -= ci
                if ck > 0:
                    res[k] -= ck
                value += v
                chosen[j] = (i, k, v, ci, ck)
                upgraded = True
        return value, [(j, i, k, v) for j, (i, k, v, ci, ck) in sorted(chosen.items())]

    v1, c1 = by_value()
    v2, c2 = singles_first()
    return (v2, c2) if v2 > v1 else (v1, c1)


_CHUNK_NODES = 100_000


def solve_exact(inst: CopInstance, time_limit: float | None = None) -> SolveResult:
    """Optimal allocation by branch and bound over per-target choices.

    Options per target are explored in ascending (i, k) order with "skip"
    last and zero-utility options never branched, so the first optimum
    found has the lexicographically smallest (j, i, k) triple list; ties
    are then pruned, which keeps that one. Hitting the time limit returns
    the best incumbent with optimal=False.
    """
    targets = sorted(inst.target_ids)
    radars = sorted(inst.radar_ids)
    n_radars = len(radars)

    # Common-denominator integer loads make feasibility checks exact and fast.
    den = 1
    for f in list(inst.gamma.values()) + list(inst.budget.values()):
        den = den * f.denominator // math.gcd(den, f.denominator)
    loads = [[int(inst.gamma[(i, j)] * den) for j in targets] for i in radars]
    start_budgets = [int(inst.budget[i] * den) for i in radars]

    # Options hold radar indices; (k, i) with k > i is interchangeable with
    # (i, k) whenever the utilities match (same load profile, same
    # objective), so only the lex-smaller one is branched.
    options: list = []
    for tidx, j in enumerate(targets):
        opts = []
        for a, i in enumerate(radars):
            for b, k in enumerate(radars):
                v = inst.utility(i, k, j)
                if v <= 0.0:
                    continue
                if b < a and v == inst.utility(k, i, j):
                    continue
                ci = loads[a][tidx]
                ck = loads[b][tidx] if b != a else 0
                opts.append((a, b, v, ci, ck))
        options.append(opts)

    def _flatten(per_target: dict) -> list:
        incs = []
        for tidx, pts in per_target.items():
            for dw, dv in _hull_increments(pts):
                incs.append((dv / dw, tidx, dw, dv))
        incs.sort(key=lambda item: (-item[0], item[1]))
        return [(tidx, dw, dv) for (_, tidx, dw, dv) in incs]

    flat = _flatten(
        {tidx: [(ci + ck, v) for (_, _, v, ci, ck) in opts] for tidx, opts in enumerate(options)}
    )
    radar_incs = []
    rinc_off = [0]
    for r in range(n_radars):
        shares: dict[int, list] = {}
        for tidx, opts in enumerate(options):
            pts = []
            for oi, ok, v, ci, ck in opts:
                if oi == r:
                    w = ci
                elif ok == r and ck > 0:
                    w = ck
                else:
                    continue
                pts.append((w, v * (w / (ci + ck))))
            if pts:
                shares[tidx] = pts
        radar_incs.extend(_flatten(shares))
        rinc_off.append(len(radar_incs))

    greedy_value, greedy_choice = _greedy_choices(options, start_budgets)

    n_targets = len(targets)
    opt_off = np.zeros(n_targets + 1, dtype=np.int64)
    for tidx, opts in enumerate(options):
        opt_off[tidx + 1] = opt_off[tidx] + len(opts)
    n_opts = int(opt_off[-1])
    opt_i = np.zeros(n_opts, dtype=np.int64)
    opt_k = np.zeros(n_opts, dtype=np.int64)
    opt_v = np.zeros(n_opts, dtype=np.float64)
    opt_ci = np.zeros(n_opts, dtype=np.int64)
    opt_ck = np.zeros(n_opts, dtype=np.int64)
    n = 0
    for opts in options:
        for a, b, v, ci, ck in opts:
            opt_i[n] = a
            opt_k[n] = b
            opt_v[n] = v
            opt_ci[n] = ci
            opt_ck[n] = ck
            n += 1

    def _inc_arrays(incs):
        t = np.array([x[0] for x in incs], dtype=np.int64)
        w = np.array([x[1] for x in incs], dtype=np.int64)
        v = np.array([x[2] for x in incs], dtype=np.float64)
        return t, w, v

    inc_t, inc_w, inc_v = _inc_arrays(flat)
    rinc_t, rinc_w, rinc_v = _inc_arrays(radar_incs)
    rinc_off_arr = np.array(rinc_off, dtype=np.int64)

    budgets = np.array(start_budgets, dtype=np.int64)
    cursor = np.zeros(n_targets, dtype=np.int64)
    applied = np.full(n_targets, -1, dtype=np.int64)
    best_choice = np.full(n_targets, -2, dtype=np.int64)
    # Seed just below the greedy value: the DFS re-finds an optimum in its
    # own (lexicographic) order while clearly worse subtrees are pruned.
    state_f = np.array([0.0, greedy_value - 1e-9], dtype=np.float64)
    state_i = np.array([0, 1, int(budgets.sum())], dtype=np.int64)

    deadline = time.monotonic() + time_limit if time_limit is not None else None
    timed_out = False
    while True:
        if deadline is not None and time.monotonic() > deadline:
            timed_out = True
            break
        status = _search_chunk(
            opt_off, opt_i, opt_k, opt_v, opt_ci, opt_ck,
            inc_t, inc_w, inc_v,
            rinc_off_arr, rinc_t, rinc_w, rinc_v,
            budgets,
            cursor, applied, best_choice, state_f, state_i,
            _CHUNK_NODES, _TIE_EPS,
        )
        if status == _SEARCH_DONE:
            break
        if deadline is not None and time.monotonic() > deadline:
            timed_out = True
            break

    if best_choice[0] == -2:  # search never completed a leaf before timeout
        choice = greedy_choice
    else:
        choice = []
        for tidx in range(n_targets):
            sel = int(best_choice[tidx])
            if sel >= 0:
                choice.append((tidx, int(opt_i[sel]), int(opt_k[sel]), float(opt_v[sel])))
    triples = [(radars[a], radars[b], targets[tidx]) for (tidx, a, b, v) in choice]
    value = sum(v for (_, _, _, v) in choice)
    return SolveResult(Allocation.from_triples(triples), value, not timed_out)


def instance_to_jsonable(inst: CopInstance) -> dict:
    """JSON form: {"radars": [{"id", "budget"}], "targets": [...],
    "gamma": [[per radar, per target]], "c": [[[per i, per k, per j]]]}."""
    radars = list(inst.radar_ids)
    targets = list(inst.target_ids)
    return {
        "radars": [{"id": i, "budget": str(inst.budget[i])} for i in radars],
        "targets": targets,
        "gamma": [[str(inst.gamma[(i, j)]) for j in targets] for i in radars],
        "c": [
            [[inst.utility(i, k, j) for j in targets] for k in radars]
            for i in radars
        ],
    }


def instance_from_jsonable(obj) -> CopInstance:
    if not isinstance(obj, dict):
        raise ContractError("instance document must be a JSON object")
    try:
        radars = [(int(r["id"]), as_load(r["budget"])) for r in obj["radars"]]
        targets = [int(j) for j in obj["targets"]]
        gamma_rows = obj["gamma"]
        c_rows = obj["c"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ContractError(f"malformed instance document: {exc}") from exc
    radar_ids = tuple(i for i, _ in radars)
    if len(gamma_rows) != len(radar_ids) or any(
        len(row) != len(targets) for row in gamma_rows
    ):
        raise ContractError("gamma must be a |radars| x |targets| matrix")
    if len(c_rows) != len(radar_ids):
        raise ContractError("c must be a |radars| x |radars| x |targets| array")
    gamma = {}
    for row, i in zip(gamma_rows, radar_ids):
        for g, j in zip(row, targets):
            gamma[(i, j)] = as_load(g)
    c = {}
    for plane, i in zip(c_rows, radar_ids):
        if len(plane) != len(radar_ids) or any(len(row) != len(targets) for row in plane):
            raise ContractError("c must be a |radars| x |radars| x |targets| array")
        for row, k in zip(plane, radar_ids):
            for v, j in zip(row, targets):
                c[(i, k, j)] = float(v)
    return CopInstance(radar_ids, tuple(targets), c, gamma, dict(radars))


def load_instance(path) -> CopInstance:
    with open(path, "r", encoding="utf-8") as fh:
        return instance_from_jsonable(json.load(fh))


def save_instance(inst: CopInstance, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(instance_to_jsonable(inst), fh, indent=2)
        fh.write("\n")
