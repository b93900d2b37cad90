"""NSGA-II search over PTC genes with a two-stage mutation schedule."""

from __future__ import annotations

import hashlib
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .cost import Constraints, CostReport, check_constraints, cost_report, default_constraints
from .errors import InfeasibleConstraints, InvalidArgument
from .evolution import ALL_OPS, CrossoverConfig, MutationConfig, make_offspring, random_init
from .pdk import Pdk
from .proxy import ProxyConfig, ScoreBundle, accuracy_score
from .topology import (
    BASELINE_STYLES,
    Gene,
    SearchSpace,
    canonical_key,
    decode,
    default_space,
    gene_to_dict,
    make_baseline,
)

log = logging.getLogger(__name__)

OBJECTIVES = ("score", "cd", "ee")
SCHEDULERS = ("two-stage", "constant")


@dataclass
class Individual:
    gene: Gene
    objectives: np.ndarray
    cost: CostReport
    scores: ScoreBundle
    rank: int = -1
    crowding: float = 0.0

    def to_dict(self) -> dict:
        return {
            "gene": gene_to_dict(self.gene),
            "objectives": dict(zip(OBJECTIVES, (float(v) for v in self.objectives))),
            "cost": self.cost.to_dict(),
        }


def gene_seed(gene: Gene) -> int:
    digest = hashlib.blake2b(canonical_key(gene).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def _score_gene(gene: Gene, proxy_cfg: ProxyConfig) -> ScoreBundle:
    return accuracy_score(decode(gene), rng=gene_seed(gene), config=proxy_cfg)


class Evaluator:
    """Cost and proxy evaluation with caches keyed on the active gene content."""

    def __init__(self, pdk: Pdk, constraints: Constraints, proxy_cfg: ProxyConfig | None = None, jobs: int = 1):
        self.pdk = pdk
        self.constraints = constraints
        self.proxy_cfg = proxy_cfg or ProxyConfig()
        self.jobs = max(1, int(jobs))
        self._costs: dict[str, CostReport] = {}
        self._scores: dict[str, ScoreBundle] = {}
        self.n_scored = 0

    def cost(self, gene: Gene) -> CostReport:
        key = canonical_key(gene)
        rep = self._costs.get(key)
        if rep is None:
            rep = self._costs[key] = cost_report(decode(gene), self.pdk)
        return rep

    def feasibility(self, gene: Gene) -> tuple[bool, tuple[str, ...]]:
        v = check_constraints(self.cost(gene), self.constraints)
        return v.feasible, v.violations

    def is_feasible(self, gene: Gene) -> bool:
        return self.feasibility(gene)[0]

    def _individual(self, gene: Gene, scores: ScoreBundle) -> Individual:
        rep = self.cost(gene)
        obj = np.array([scores.combined, rep.cd, rep.ee])
        return Individual(gene, obj, rep, scores)

    def evaluate(self, gene: Gene) -> Individual:
        return self.evaluate_many([gene])[0]

    def evaluate_many(self, genes: Sequence[Gene]) -> list[Individual]:
        for g in genes:
            ok, violated = self.feasibility(g)
            if not ok:
                raise InfeasibleConstraints(violated[0], "gene rejected before evaluation")
        todo: dict[str, Gene] = {}
        for g in genes:
            key = canonical_key(g)
            if key not in self._scores and key not in todo:
                todo[key] = g
        if todo:
            keys, pending = list(todo), list(todo.values())
            if self.jobs > 1 and len(pending) > 1:
                with ProcessPoolExecutor(self.jobs) as pool:
                    results = list(pool.map(_score_gene, pending, [self.proxy_cfg] * len(pending)))
            else:
                results = [_score_gene(g, self.proxy_cfg) for g in pending]
            for key, res in zip(keys, results):
                self._scores[key] = res
            self.n_scored += len(pending)
        return [self._individual(g, self._scores[canonical_key(g)]) for g in genes]


def evaluate(gene: Gene, pdk: Pdk, constraints: Constraints, proxy_cfg: ProxyConfig | None = None) -> Individual:
    return Evaluator(pdk, constraints, proxy_cfg).evaluate(gene)


# -- NSGA-II ----------------------------------------------------------------

def _objective_array(objectives) -> np.ndarray:
    obj = np.asarray(objectives, dtype=float)
    if obj.ndim == 1:
        obj = obj[:, None]
    if obj.ndim != 2:
        raise InvalidArgument("objectives must be an (n, m) array")
    if not np.isfinite(obj).all():
        raise InvalidArgument("objectives must be finite")
    return obj


def dominance_matrix(obj: np.ndarray) -> np.ndarray:
    """dom[i, j] is True when i dominates j (maximization)."""
    ge = (obj[:, None, :] >= obj[None, :, :]).all(axis=2)
    gt = (obj[:, None, :] > obj[None, :, :]).any(axis=2)
    return ge & gt


def nondominated_sort(objectives) -> list[list[int]]:
    """Fast non-dominated sorting; indices within a front are ascending."""
    obj = _objective_array(objectives)
    n = len(obj)
    if n == 0:
        return []
    dom = dominance_matrix(obj)
    counts = dom.sum(axis=0)
    fronts = []
    current = np.flatnonzero(counts == 0)
    while current.size:
        fronts.append(current.tolist())
        counts = counts - dom[current].sum(axis=0)
        counts[current] = -1
        current = np.flatnonzero(counts == 0)
    return fronts


def crowding_distance(objectives) -> np.ndarray:
    obj = _objective_array(objectives)
    n, m = obj.shape
    if n == 0:
        raise InvalidArgument("empty front")
    dist = np.zeros(n)
    if n <= 2:
        return np.full(n, np.inf)
    for j in range(m):
        order = np.argsort(obj[:, j], kind="stable")
        vals = obj[order, j]
        span = vals[-1] - vals[0]
        dist[order[0]] = dist[order[-1]] = np.inf
        if span == 0:
            continue
        dist[order[1:-1]] += (vals[2:] - vals[:-2]) / span
    return dist


def select_survivors(objectives, size: int) -> list[int]:
    """Indices (ascending) of the ``size`` survivors by rank, then crowding."""
    obj = _objective_array(objectives)
    if size > len(obj):
        raise InvalidArgument(f"cannot select {size} from {len(obj)}")
    chosen: list[int] = []
    for front in nondominated_sort(obj):
        if len(chosen) + len(front) <= size:
            chosen += front
            continue
        d = crowding_distance(obj[front])
        order = sorted(range(len(front)), key=lambda i: (-d[i], front[i]))
        chosen += [front[i] for i in order[: size - len(chosen)]]
        break
    return sorted(chosen)


def hypervolume(points, reference) -> float:
    """Exact dominated volume above ``reference`` (maximization), any dimension ≤ 3."""
    pts = np.asarray(points, dtype=float)
    ref = np.asarray(reference, dtype=float)
    if pts.size == 0:
        return 0.0
    pts = pts[(pts > ref).all(axis=1)]
    if len(pts) == 0:
        return 0.0
    m = pts.shape[1]
    if m == 1:
        return float(pts[:, 0].max() - ref[0])
    if m == 2:
        order = np.argsort(-pts[:, 0], kind="stable")
        vol, best_y = 0.0, ref[1]
        for x, y in pts[order]:
            if y > best_y:
                vol += (x - ref[0]) * (y - best_y)
                best_y = y
        return float(vol)
    if m != 3:
        raise InvalidArgument("hypervolume supports up to three objectives")
    levels = np.unique(pts[:, 2])[::-1]
    vol = 0.0
    for i, z in enumerate(levels):
        below = levels[i + 1] if i + 1 < len(levels) else ref[2]
        slab = pts[pts[:, 2] >= z][:, :2]
        vol += hypervolume(slab, ref[:2]) * (z - below)
    return float(vol)


# -- schedule and loop -------------------------------------------------------

@dataclass(frozen=True)
class SearchConfig:
    k: int = 16
    pop_size: int = 40
    max_iters: int = 80
    phase2_iters: int | None = None
    p_mu0: float = 0.1
    p_mu_final: float = 0.02
    p_co: float = 0.5
    b_range: tuple[int, int] | None = None
    ports: tuple[int, ...] | None = None
    constraints: Constraints | None = None
    seed: int = 0
    scheduler: str = "two-stage"
    disabled_ops: tuple[str, ...] = ()
    baselines: tuple[str, ...] = BASELINE_STYLES
    jobs: int = 1
    proxy: ProxyConfig = field(default_factory=ProxyConfig)

    def __post_init__(self):
        if self.pop_size < 1:
            raise InvalidArgument("pop_size must be positive")
        if self.max_iters < 0:
            raise InvalidArgument("max_iters must be non-negative")
        if self.phase2_iters is None:
            object.__setattr__(self, "phase2_iters", self.max_iters // 4)
        if self.max_iters and not 0 <= self.phase2_iters < self.max_iters:
            raise InvalidArgument(f"phase2_iters must be in [0, {self.max_iters}), got {self.phase2_iters}")
        for name in ("p_mu0", "p_mu_final", "p_co"):
            if not 0 <= getattr(self, name) <= 1:
                raise InvalidArgument(f"{name} must be in [0, 1]")
        if self.scheduler not in SCHEDULERS:
            raise InvalidArgument(f"scheduler must be one of {SCHEDULERS}")
        unknown = set(self.disabled_ops) - set(ALL_OPS)
        if unknown:
            raise InvalidArgument(f"unknown operators {sorted(unknown)}")
        unknown = set(self.baselines) - set(BASELINE_STYLES)
        if unknown:
            raise InvalidArgument(f"unknown baseline styles {sorted(unknown)}")
        if self.b_range is not None:
            object.__setattr__(self, "b_range", tuple(int(b) for b in self.b_range))
        if self.ports is not None:
            object.__setattr__(self, "ports", tuple(int(p) for p in self.ports))
        object.__setattr__(self, "disabled_ops", tuple(self.disabled_ops))
        object.__setattr__(self, "baselines", tuple(self.baselines))

    def space(self) -> SearchSpace:
        return default_space(self.k, self.b_range, self.ports)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["constraints"] = self.constraints.to_dict() if self.constraints else None
        d["proxy"] = self.proxy.to_dict()
        d["b_range"] = list(self.b_range) if self.b_range else None
        d["ports"] = list(self.ports) if self.ports else None
        d["disabled_ops"] = list(self.disabled_ops)
        d["baselines"] = list(self.baselines)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "SearchConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise InvalidArgument(f"unknown search config fields {sorted(unknown)}")
        d = dict(data)
        if d.get("constraints") is not None:
            d["constraints"] = Constraints.from_dict(d["constraints"])
        if "proxy" in d:
            d["proxy"] = ProxyConfig.from_dict(d["proxy"])
        for name in ("b_range", "ports", "disabled_ops", "baselines"):
            if d.get(name) is not None:
                d[name] = tuple(d[name])
        return cls(**d)


def mutation_rate(iteration: int, cfg: SearchConfig) -> float:
    if not 1 <= iteration <= cfg.max_iters:
        raise InvalidArgument(f"iteration {iteration} outside [1, {cfg.max_iters}]")
    if cfg.scheduler == "constant":
        return cfg.p_mu0
    phase1 = cfg.max_iters - cfg.phase2_iters
    if iteration > phase1:
        return cfg.p_mu_final
    if phase1 == 1:
        return cfg.p_mu0
    t = (iteration - 1) / (phase1 - 1)
    return cfg.p_mu_final + 0.5 * (cfg.p_mu0 - cfg.p_mu_final) * (1 + math.cos(math.pi * t))


def in_phase2(iteration: int, cfg: SearchConfig) -> bool:
    return cfg.scheduler == "two-stage" and iteration > cfg.max_iters - cfg.phase2_iters


@dataclass
class SearchResult:
    front: list[Individual]
    population: list[Individual]
    history: list[dict]
    n_evaluations: int
    constraints: Constraints


def _history_row(iteration: int, p_mu: float, pop: list[Individual]) -> dict:
    obj = np.array([ind.objectives for ind in pop])
    front0 = nondominated_sort(obj)[0]
    best = obj.max(axis=0)
    return {
        "iter": iteration,
        "p_mu": round(float(p_mu), 12),
        "front0_size": len(front0),
        "best": dict(zip(OBJECTIVES, (float(v) for v in best))),
        "p_avg": float(np.prod(obj, axis=1).mean()),
    }


def _annotate(pop: list[Individual]) -> None:
    obj = np.array([ind.objectives for ind in pop])
    for r, front in enumerate(nondominated_sort(obj)):
        d = crowding_distance(obj[front])
        for i, idx in enumerate(front):
            pop[idx].rank = r
            pop[idx].crowding = float(d[i])


def _front0(pop: list[Individual]) -> list[Individual]:
    """Mutually non-dominated members, one per distinct gene content."""
    obj = np.array([ind.objectives for ind in pop])
    seen, out = set(), []
    for i in nondominated_sort(obj)[0]:
        key = canonical_key(pop[i].gene)
        if key not in seen:
            seen.add(key)
            out.append(pop[i])
    return out


def resolve_constraints(cfg: SearchConfig, pdk: Pdk) -> Constraints:
    return cfg.constraints if cfg.constraints is not None else default_constraints(cfg.k, pdk)


def run_search(cfg: SearchConfig, pdk: Pdk, baselines: Sequence[Gene] | None = None,
               progress: Callable[[dict], None] | None = None, trace: list | None = None) -> SearchResult:
    constraints = resolve_constraints(cfg, pdk)
    space = cfg.space()
    ev = Evaluator(pdk, constraints, cfg.proxy, cfg.jobs)
    if baselines is None:
        baselines = [make_baseline(s, cfg.k) for s in cfg.baselines if _baseline_ok(s, cfg.k)]
    rng = np.random.default_rng([cfg.seed, 0])
    genes = random_init(cfg.pop_size, space, ev.feasibility, rng, baselines)
    pop = ev.evaluate_many(genes)
    history = [_history_row(0, cfg.p_mu0, pop)]
    if progress:
        progress(history[-1])
    enabled = frozenset(ALL_OPS) - set(cfg.disabled_ops)
    co_cfg = CrossoverConfig(p_co=cfg.p_co, rng_seed=cfg.seed)
    for it in range(1, cfg.max_iters + 1):
        p_mu = mutation_rate(it, cfg)
        mut_cfg = MutationConfig(p_mu=p_mu, enabled_ops=enabled, rng_seed=cfg.seed)
        if in_phase2(it, cfg):
            mut_cfg = mut_cfg.phase2(p_mu)
        gen_rng = np.random.default_rng([cfg.seed, it])
        kids = make_offspring([ind.gene for ind in pop], mut_cfg, co_cfg, gen_rng, space,
                              accept=ev.is_feasible, generation=it, trace=trace)
        union = pop + ev.evaluate_many(kids)
        keep = select_survivors(np.array([ind.objectives for ind in union]), cfg.pop_size)
        pop = [union[i] for i in keep]
        history.append(_history_row(it, p_mu, pop))
        if progress:
            progress(history[-1])
    _annotate(pop)
    return SearchResult(_front0(pop), pop, history, ev.n_scored, constraints)


def _baseline_ok(style: str, k: int) -> bool:
    return style != "butterfly" or (k >= 2 and k & (k - 1) == 0)


def random_search(cfg: SearchConfig, pdk: Pdk, budget: int | None = None,
                  baselines: Sequence[Gene] | None = None) -> SearchResult:
    """Uniform feasible sampling with the same budget as the evolutionary run."""
    constraints = resolve_constraints(cfg, pdk)
    space = cfg.space()
    ev = Evaluator(pdk, constraints, cfg.proxy, cfg.jobs)
    budget = cfg.pop_size * (cfg.max_iters + 1) if budget is None else budget
    if baselines is None:
        baselines = [make_baseline(s, cfg.k) for s in cfg.baselines if _baseline_ok(s, cfg.k)]
    rng = np.random.default_rng([cfg.seed, 0])
    genes = random_init(budget, space, ev.feasibility, rng, baselines)
    pop = ev.evaluate_many(genes)
    _annotate(pop)
    return SearchResult(_front0(pop), pop, [], ev.n_scored, constraints)


def union_reference(*fronts: Sequence[Individual]) -> np.ndarray:
    pts = np.array([ind.objectives for f in fronts for ind in f])
    return pts.min(axis=0)


def front_hypervolume(front: Sequence[Individual], reference) -> float:
    return hypervolume(np.array([ind.objectives for ind in front]), reference)
