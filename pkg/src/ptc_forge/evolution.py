"""Variation operators on PTC genes and population initialization.

Mutation operators (by target):

* coupler layer: R2A1, A2R1, Move, RS
* crossing layer: AddCR, ReduceCR
* block count: AddBlock, ReduceBlock

Every operator maps a gene that is legal in a :class:`SearchSpace` to another
legal gene, or raises :class:`NotApplicable` when its precondition fails.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import InfeasibleConstraints, NotApplicable
from .topology import (
    BlockGene,
    Gene,
    SearchSpace,
    count_crossings,
    is_legal,
    pad_gene,
)

log = logging.getLogger(__name__)

DC_OPS = ("R2A1", "A2R1", "Move", "RS")
CR_OPS = ("AddCR", "ReduceCR")
BLOCK_OPS = ("AddBlock", "ReduceBlock")
ALL_OPS = DC_OPS + CR_OPS + BLOCK_OPS
PHASE2_DISABLED = frozenset({"AddBlock", "ReduceBlock", "RS"})


@dataclass(frozen=True)
class MutationConfig:
    p_mu: float = 0.1
    enabled_ops: frozenset = field(default_factory=lambda: frozenset(ALL_OPS))
    rng_seed: int = 0

    def __post_init__(self):
        if not 0 <= self.p_mu <= 1:
            raise ValueError(f"p_mu must be in [0, 1], got {self.p_mu}")
        unknown = set(self.enabled_ops) - set(ALL_OPS)
        if unknown:
            raise ValueError(f"unknown mutation operators {sorted(unknown)}")
        object.__setattr__(self, "enabled_ops", frozenset(self.enabled_ops))

    def phase2(self, p_mu: float = 0.02) -> "MutationConfig":
        return replace(self, p_mu=p_mu, enabled_ops=self.enabled_ops - PHASE2_DISABLED)


@dataclass(frozen=True)
class CrossoverConfig:
    p_co: float = 0.5
    segment_swap_prob: float = 0.5
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("p_co", "segment_swap_prob"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must be in [0, 1]")


# -- coupler layers ---------------------------------------------------------
# A layer is handled as {start wire: port count} for its multi-port couplers;
# every other wire is a bare waveguide.

def _to_dcs(partition: Sequence[int]) -> dict[int, int]:
    dcs, pos = {}, 0
    for p in partition:
        if p > 1:
            dcs[pos] = p
        pos += p
    return dcs


def _from_dcs(dcs: dict[int, int], k: int) -> tuple[int, ...]:
    out, w = [], 0
    while w < k:
        if w in dcs:
            out.append(dcs[w])
            w += dcs[w]
        else:
            out.append(1)
            w += 1
    return tuple(out)


def _free_mask(dcs: dict[int, int], k: int) -> np.ndarray:
    free = np.ones(k, dtype=bool)
    for s, n in dcs.items():
        free[s:s + n] = False
    return free


def _placements(dcs: dict[int, int], k: int, n: int) -> list[int]:
    free = _free_mask(dcs, k)
    return [o for o in range(k - n + 1) if free[o:o + n].all()]


def _all_placements(dcs, k, ports) -> list[tuple[int, int]]:
    return [(n, o) for n in ports for o in _placements(dcs, k, n)]


def _place_random(dcs, k, ports, rng) -> dict[int, int]:
    fits = [n for n in ports if _placements(dcs, k, n)]
    if not fits:
        raise NotApplicable("no room for a coupler")
    n = fits[rng.integers(len(fits))]
    slots = _placements(dcs, k, n)
    out = dict(dcs)
    out[slots[rng.integers(len(slots))]] = n
    return out


def _a2r1_first_moves(dcs, k, ports) -> list[tuple[int, int]]:
    firsts = []
    for n, o in _all_placements(dcs, k, ports):
        trial = dict(dcs)
        trial[o] = n
        if _all_placements(trial, k, ports):
            firsts.append((n, o))
    return firsts


def _move_candidates(dcs, k) -> list[tuple[int, int]]:
    moves = []
    for s, n in dcs.items():
        rest = {a: b for a, b in dcs.items() if a != s}
        moves += [(s, o) for o in _placements(rest, k, n) if o != s]
    return moves


def _free_runs(partition: Sequence[int]) -> list[int]:
    """Lengths of bare-wire runs before, between and after the couplers."""
    runs, cur = [], 0
    for p in partition:
        if p == 1:
            cur += 1
        else:
            runs.append(cur)
            cur = 0
    runs.append(cur)
    return runs


def applicable_dc_ops(partition: Sequence[int], ports: Sequence[int]) -> list[str]:
    ops = []
    n_multi = sum(1 for p in partition if p > 1)
    if n_multi >= 2:
        ops.append("R2A1")
    runs = _free_runs(partition)
    # two couplers fit iff two of the smallest size fit
    if sum(r // min(ports) for r in runs) >= 2:
        ops.append("A2R1")
    # a coupler can shift iff a bare wire touches it
    if any(runs[i] or runs[i + 1] for i in range(n_multi)):
        ops.append("Move")
    ops.append("RS")
    return ops


def resample_partition(k: int, ports: Sequence[int], rng) -> tuple[int, ...]:
    """Draw port counts uniformly from {1} + ports until k wires are filled."""
    allowed = (1,) + tuple(ports)
    out, left = [], k
    while left:
        p = allowed[rng.integers(len(allowed))]
        if p <= left:
            out.append(p)
            left -= p
    return tuple(out)


def mutate_dc(partition: Sequence[int], op: str, rng, ports: Sequence[int]) -> tuple[int, ...]:
    k = sum(partition)
    ports = tuple(sorted(ports))
    dcs = _to_dcs(partition)
    if op == "R2A1":
        if len(dcs) < 2:
            raise NotApplicable("R2A1 needs two multi-port couplers")
        starts = sorted(dcs)
        drop = rng.choice(len(starts), size=2, replace=False)
        kept = {s: n for i, (s, n) in enumerate(sorted(dcs.items())) if i not in set(drop.tolist())}
        return _from_dcs(_place_random(kept, k, ports, rng), k)
    if op == "A2R1":
        firsts = _a2r1_first_moves(dcs, k, ports)
        if not firsts:
            raise NotApplicable("A2R1 needs room for two couplers")
        n, o = firsts[rng.integers(len(firsts))]
        grown = dict(dcs)
        grown[o] = n
        grown = _place_random(grown, k, ports, rng)
        starts = sorted(grown)
        del grown[starts[rng.integers(len(starts))]]
        return _from_dcs(grown, k)
    if op == "Move":
        moves = _move_candidates(dcs, k)
        if not moves:
            raise NotApplicable("no coupler can move")
        s, o = moves[rng.integers(len(moves))]
        moved = {a: b for a, b in dcs.items() if a != s}
        moved[o] = dcs[s]
        return _from_dcs(moved, k)
    if op == "RS":
        return resample_partition(k, ports, rng)
    raise ValueError(f"unknown coupler operator {op!r}")


def crossover_dc(parent_a: Sequence[int], parent_b: Sequence[int], rng,
                 swap_prob: float = 0.5) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Swap border-aligned segments of two coupler layers."""
    a, b = tuple(parent_a), tuple(parent_b)
    if sum(a) != sum(b):
        raise ValueError("parents cover different wire counts")
    cuts_a = set(np.cumsum(a)[:-1].tolist())
    cuts_b = set(np.cumsum(b)[:-1].tolist())
    cuts = [0] + sorted(cuts_a & cuts_b) + [sum(a)]

    def split(part):
        segs, cur, pos, i = [], [], 0, 1
        for p in part:
            cur.append(p)
            pos += p
            if pos == cuts[i]:
                segs.append(cur)
                cur, i = [], i + 1
        return segs

    seg_a, seg_b = split(a), split(b)
    child_a, child_b = [], []
    for sa, sb in zip(seg_a, seg_b):
        if rng.random() < swap_prob:
            sa, sb = sb, sa
        child_a += sa
        child_b += sb
    return tuple(child_a), tuple(child_b)


# -- crossing layers --------------------------------------------------------

def _adjacent_swaps(cr: list[int], inverted: bool) -> list[int]:
    return [j for j in range(len(cr) - 1) if (cr[j] > cr[j + 1]) == inverted]


def mutate_cr(cr_indices: Sequence[int], op: str, rng, cap: int, steps: int | None = None) -> tuple[int, ...]:
    """Add or remove crossings by adjacent swaps, one inversion per swap."""
    cr = list(cr_indices)
    n = count_crossings(cr)
    if op == "AddCR":
        room = cap - n
        if room <= 0:
            raise NotApplicable("crossing cap reached")
        steps = int(rng.integers(1, room + 1)) if steps is None else steps
        if not 1 <= steps <= room:
            raise NotApplicable(f"cannot add {steps} crossings (room {room})")
        inverted = False
    elif op == "ReduceCR":
        if n == 0:
            raise NotApplicable("no crossings to remove")
        steps = int(rng.integers(1, n + 1)) if steps is None else steps
        if not 1 <= steps <= n:
            raise NotApplicable(f"cannot remove {steps} crossings (have {n})")
        inverted = True
    else:
        raise ValueError(f"unknown crossing operator {op!r}")
    for u in rng.random(steps):
        options = _adjacent_swaps(cr, inverted)
        j = options[int(u * len(options))]
        cr[j], cr[j + 1] = cr[j + 1], cr[j]
    return tuple(cr)


def repair_cr(cr_indices: Sequence[int], cap: int, rng) -> tuple[int, ...]:
    excess = count_crossings(cr_indices) - cap
    if excess <= 0:
        return tuple(cr_indices)
    return mutate_cr(cr_indices, "ReduceCR", rng, cap, steps=excess)


def random_cr(k: int, cap: int, rng) -> tuple[int, ...]:
    """Routing with a crossing count drawn uniformly from [0, cap]."""
    target = int(rng.integers(0, cap + 1))
    ident = tuple(range(k))
    return mutate_cr(ident, "AddCR", rng, cap, steps=target) if target else ident


def crossover_cr(parent_a: Sequence[int], parent_b: Sequence[int], rng,
                 subset: Iterable[int] | None = None) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Order-preserving exchange of an even-sized value subset.

    In each child the slots holding the chosen values are refilled with those
    values in the order they appear in the other parent; every other value
    keeps its slot.
    """
    a, b = list(parent_a), list(parent_b)
    if sorted(a) != sorted(b):
        raise ValueError("parents are not permutations of the same values")
    k = len(a)
    if subset is None:
        sizes = list(range(2, k + 1, 2))
        size = sizes[rng.integers(len(sizes))] if sizes else 0
        subset = rng.choice(k, size=size, replace=False).tolist() if size else []
    chosen = set(int(v) for v in subset)

    def fill(own, other):
        order = iter([v for v in other if v in chosen])
        return tuple(next(order) if v in chosen else v for v in own)

    return fill(a, b), fill(b, a)


# -- blocks -----------------------------------------------------------------

def mutate_blocks(gene: Gene, op: str, rng, space: SearchSpace, m: int | None = None) -> Gene:
    b = gene.active_blocks
    if op == "AddBlock":
        room = space.b_max - b
        if room < 2:
            raise NotApplicable("block count at upper bound")
        m = 2 * int(rng.integers(1, room // 2 + 1)) if m is None else m
        if m % 2 or not 2 <= m <= room:
            raise NotApplicable(f"cannot add {m} blocks")
        old = gene.blocks
        blocks = list(old)
        for i in range(m):
            blocks[b + i] = old[i]
        return Gene(gene.k, b + m, tuple(blocks))
    if op == "ReduceBlock":
        room = b - space.b_min
        if room < 2:
            raise NotApplicable("block count at lower bound")
        m = 2 * int(rng.integers(1, room // 2 + 1)) if m is None else m
        if m % 2 or not 2 <= m <= room:
            raise NotApplicable(f"cannot remove {m} blocks")
        return Gene(gene.k, b - m, gene.blocks)
    raise ValueError(f"unknown block operator {op!r}")


def crossover_blocks(parent_a: Gene, parent_b: Gene, rng, swap_prob: float = 0.5) -> tuple[Gene, Gene]:
    """Swap whole blocks at shared active positions."""
    if parent_a.k != parent_b.k:
        raise ValueError("parents have different k")
    a, b = list(parent_a.blocks), list(parent_b.blocks)
    for i in range(min(parent_a.active_blocks, parent_b.active_blocks)):
        if rng.random() < swap_prob:
            a[i], b[i] = b[i], a[i]
    return parent_a.with_blocks(a), parent_b.with_blocks(b)


# -- gene level -------------------------------------------------------------

def _block_ops(gene: Gene, space: SearchSpace) -> list[str]:
    ops = []
    if space.b_max - gene.active_blocks >= 2:
        ops.append("AddBlock")
    if gene.active_blocks - space.b_min >= 2:
        ops.append("ReduceBlock")
    return ops


def _cr_ops(cr, cap) -> list[str]:
    n = count_crossings(cr)
    ops = []
    if n < cap:
        ops.append("AddCR")
    if n > 0:
        ops.append("ReduceCR")
    return ops


@lru_cache(maxsize=1 << 16)
def _block_applicable(block: BlockGene, ports: tuple[int, ...], cap: int) -> tuple[str, ...]:
    return tuple(applicable_dc_ops(block.dc, ports) + _cr_ops(block.cr, cap))


def applicable_ops(gene: Gene, space: SearchSpace, enabled: Iterable[str] = ALL_OPS) -> dict[str, list[int]]:
    """Map each enabled, applicable operator to the active blocks it can act on.

    Block-count operators map to an empty list (they act on the whole gene).
    """
    enabled = set(enabled)
    out: dict[str, list[int]] = {}
    for op in _block_ops(gene, space):
        if op in enabled:
            out[op] = []
    for i, blk in enumerate(gene.active):
        for op in _block_applicable(blk, space.ports, space.cap):
            if op in enabled:
                out.setdefault(op, []).append(i)
    return out


def apply_op(gene: Gene, op: str, rng, space: SearchSpace, block: int | None = None) -> Gene:
    if op in BLOCK_OPS:
        return mutate_blocks(gene, op, rng, space)
    if block is None:
        block = int(rng.integers(gene.active_blocks))
    blocks = list(gene.blocks)
    blk = blocks[block]
    if op in DC_OPS:
        blocks[block] = BlockGene(mutate_dc(blk.dc, op, rng, space.ports), blk.cr)
    elif op in CR_OPS:
        blocks[block] = BlockGene(blk.dc, mutate_cr(blk.cr, op, rng, space.cap))
    else:
        raise ValueError(f"unknown operator {op!r}")
    return gene.with_blocks(blocks)


def mutate(gene: Gene, rng, space: SearchSpace, enabled: Iterable[str] = ALL_OPS) -> tuple[Gene, str | None]:
    """Apply one operator drawn uniformly from the applicable enabled set."""
    options = applicable_ops(gene, space, enabled)
    if not options:
        return gene, None
    names = sorted(options)
    op = names[rng.integers(len(names))]
    targets = options[op]
    block = targets[rng.integers(len(targets))] if targets else None
    return apply_op(gene, op, rng, space, block), op


CROSSOVER_KINDS = ("dc", "cr", "block")


def crossover(parent_a: Gene, parent_b: Gene, rng, space: SearchSpace,
              swap_prob: float = 0.5) -> tuple[Gene, Gene, str]:
    """One crossover kind, chosen uniformly, applied over the shared active blocks."""
    kind = CROSSOVER_KINDS[rng.integers(len(CROSSOVER_KINDS))]
    if kind == "block":
        a, b = crossover_blocks(parent_a, parent_b, rng, swap_prob)
        return a, b, kind
    a, b = list(parent_a.blocks), list(parent_b.blocks)
    for i in range(min(parent_a.active_blocks, parent_b.active_blocks)):
        ba, bb = a[i], b[i]
        if kind == "dc":
            da, db = crossover_dc(ba.dc, bb.dc, rng, swap_prob)
            a[i], b[i] = BlockGene(da, ba.cr), BlockGene(db, bb.cr)
        else:
            ca, cb = crossover_cr(ba.cr, bb.cr, rng)
            a[i] = BlockGene(ba.dc, repair_cr(ca, space.cap, rng))
            b[i] = BlockGene(bb.dc, repair_cr(cb, space.cap, rng))
    return parent_a.with_blocks(a), parent_b.with_blocks(b), kind


# -- population -------------------------------------------------------------

def random_block(space: SearchSpace, rng) -> BlockGene:
    return BlockGene(resample_partition(space.k, space.ports, rng), random_cr(space.k, space.cap, rng))


def random_gene(space: SearchSpace, rng) -> Gene:
    """Uniform even block count; inactive slots repeat the active ones."""
    b = 2 * int(rng.integers(space.b_min // 2, space.b_max // 2 + 1))
    active = [random_block(space, rng) for _ in range(max(b, 1))]
    blocks = tuple(active[i % len(active)] for i in range(space.b_max))
    return Gene(space.k, b, blocks)


Feasibility = Callable[[Gene], "tuple[bool, Sequence[str]]"]


def random_init(pop_size: int, space: SearchSpace, feasible: Feasibility, rng,
                baselines: Sequence[Gene] = (), retries: int = 1000) -> list[Gene]:
    """Baselines that fit the space and constraints, followed by ``pop_size`` random feasible genes.

    ``feasible(gene)`` returns ``(ok, violated_axes)``.
    """
    population = []
    for base in baselines:
        if base.k != space.k or base.active_blocks > space.b_max:
            log.info("skipping baseline with k=%d B=%d", base.k, base.active_blocks)
            continue
        padded = pad_gene(base, space.b_max)
        if not is_legal(padded, space):
            log.info("baseline does not fit the search space, skipped")
            continue
        ok, _ = feasible(padded)
        if ok:
            population.append(padded)
        else:
            log.info("baseline violates constraints, skipped")
    for _ in range(pop_size):
        misses: Counter = Counter()
        for _ in range(retries):
            gene = random_gene(space, rng)
            ok, violated = feasible(gene)
            if ok:
                population.append(gene)
                break
            misses.update(violated)
        else:
            binding = misses.most_common(1)[0][0] if misses else "unknown"
            raise InfeasibleConstraints(binding, f"after {retries} samples")
    return population


@dataclass
class TraceEntry:
    generation: int
    individual: int
    operator: str
    accepted: bool

    def line(self) -> str:
        return f"{self.generation} {self.individual} {self.operator} {'accepted' if self.accepted else 'rejected'}"


def make_offspring(population: Sequence[Gene], mut_cfg: MutationConfig, co_cfg: CrossoverConfig,
                   rng, space: SearchSpace, accept: Callable[[Gene], bool] | None = None,
                   max_attempts: int = 50, generation: int = 0,
                   trace: list | None = None) -> list[Gene]:
    """One child per parent: shuffled pairing, crossover, then mutation.

    Children rejected by ``accept`` are regenerated from the same pair up to
    ``max_attempts`` times, after which the parent is cloned.
    """
    n = len(population)
    if n == 0:
        raise ValueError("empty population")
    order = rng.permutation(n).tolist()
    pairs = [(order[i], order[i + 1]) for i in range(0, n - 1, 2)]
    if n % 2:
        partner = order[int(rng.integers(n - 1))] if n > 1 else order[-1]
        pairs.append((order[-1], partner))
    seeds = rng.integers(0, 2**63 - 1, size=len(pairs))
    offspring: list[Gene] = []
    for p, ((ia, ib), seed) in enumerate(zip(pairs, seeds)):
        pair_rng = np.random.default_rng(int(seed))
        wanted = 1 if (n % 2 and p == len(pairs) - 1) else 2
        parents = (population[ia], population[ib])
        got: list[Gene | None] = [None] * wanted
        for _ in range(max_attempts):
            kids, names = list(parents), ["copy", "copy"]
            if pair_rng.random() < co_cfg.p_co:
                a, b, kind = crossover(parents[0], parents[1], pair_rng, space, co_cfg.segment_swap_prob)
                kids, names = [a, b], [f"X{kind}", f"X{kind}"]
            for c in range(2):
                if pair_rng.random() < mut_cfg.p_mu:
                    kids[c], op = mutate(kids[c], pair_rng, space, mut_cfg.enabled_ops)
                    if op:
                        names[c] = f"{names[c]}+{op}" if names[c] != "copy" else op
            for c in range(wanted):
                if got[c] is not None:
                    continue
                ok = accept is None or accept(kids[c])
                if trace is not None:
                    trace.append(TraceEntry(generation, len(offspring) + c, names[c], ok))
                if ok:
                    got[c] = kids[c]
            if all(g is not None for g in got):
                break
        for c in range(wanted):
            offspring.append(got[c] if got[c] is not None else parents[c])
    return offspring
