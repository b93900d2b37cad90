"""Gene encoding of PTC topologies and assembly of their transfer matrices.

A gene holds ``B`` active blocks out of a fixed-length block list. Each
block is a phase-shifter column followed by a coupler layer (``dc``, a
partition of K wires into coupler port counts) and a crossing layer (``cr``,
``cr[i]`` is the output position of input wire ``i``). The first ``B/2``
active blocks form U and the rest form V; the weight is ``U diag(sigma) V``.

Block order is light-flow order: block 0 of a unitary is the first stage the
light meets, so ``U = X[n-1] @ ... @ X[0]`` with ``X[b] = P_b T_b R_b``.
Physically V comes first, then the sigma column, then U.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .devices import (
    check_partition,
    check_permutation,
    coupler_layer_matrix,
    permutation_matrix,
)
from .errors import IllegalGene, InvalidArgument, InvalidPartition, InvalidPermutation

BASELINE_STYLES = ("mzi-clements", "butterfly", "mmi-interlaced")

# Reference multi-port coupler sizes per matrix size.
REFERENCE_PORTS = {8: (2, 4), 16: (2, 8), 32: (4, 16)}


@dataclass(frozen=True)
class BlockGene:
    dc: tuple[int, ...]
    cr: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "dc", tuple(int(x) for x in self.dc))
        object.__setattr__(self, "cr", tuple(int(x) for x in self.cr))
        # blocks key many caches, so hash once
        object.__setattr__(self, "_hash", hash((self.dc, self.cr)))

    def __hash__(self) -> int:
        return self._hash


@dataclass(frozen=True)
class Gene:
    k: int
    active_blocks: int
    blocks: tuple[BlockGene, ...]

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))

    @property
    def b_max(self) -> int:
        return len(self.blocks)

    @property
    def active(self) -> tuple[BlockGene, ...]:
        return self.blocks[: self.active_blocks]

    def with_blocks(self, blocks: Sequence[BlockGene], active_blocks: int | None = None) -> "Gene":
        return Gene(self.k, self.active_blocks if active_blocks is None else active_blocks, tuple(blocks))


@dataclass(frozen=True)
class Topology:
    k: int
    u_blocks: tuple[BlockGene, ...]
    v_blocks: tuple[BlockGene, ...]
    # retained only so that encode(decode(g)) == g
    inactive: tuple[BlockGene, ...] = field(default=())

    @property
    def blocks(self) -> tuple[BlockGene, ...]:
        """Active blocks in gene order (U first, then V)."""
        return self.u_blocks + self.v_blocks

    @property
    def n_blocks(self) -> int:
        return len(self.u_blocks) + len(self.v_blocks)

    @property
    def phase_counts(self) -> tuple[int, ...]:
        return (self.k,) * self.n_blocks


@dataclass(frozen=True)
class SearchSpace:
    """Bounds of the searchable gene set for one PTC size."""

    k: int
    b_min: int = 2
    b_max: int = 32
    ports: tuple[int, ...] = (2,)

    def __post_init__(self):
        object.__setattr__(self, "ports", tuple(sorted({int(p) for p in self.ports})))
        if self.k < 2:
            raise InvalidArgument("k must be >= 2")
        if self.b_min % 2 or self.b_max % 2 or not 0 <= self.b_min <= self.b_max:
            raise InvalidArgument(f"block range [{self.b_min}, {self.b_max}] must be even and ordered")
        if not self.ports or any(p < 2 or p > self.k for p in self.ports):
            raise InvalidArgument(f"ports {self.ports} must lie in [2, {self.k}]")

    @property
    def cap(self) -> int:
        return crossing_cap(self.k)

    @property
    def allowed(self) -> tuple[int, ...]:
        return (1,) + self.ports


def default_space(k: int, b_range: tuple[int, int] | None = None,
                  ports: Sequence[int] | None = None) -> SearchSpace:
    if ports is None:
        ports = REFERENCE_PORTS.get(k) or tuple(p for p in (2, 4) if p <= k)
    if b_range is None:
        b_range = (2, 2 * k)
    return SearchSpace(k=k, b_min=b_range[0], b_max=b_range[1], ports=tuple(ports))


@lru_cache(maxsize=None)
def crossing_cap(k: int) -> int:
    """Crossings of the widest butterfly stage, K(K/2-1)/4."""
    return max(0, math.floor(k * (k / 2 - 1) / 4))


def count_crossings(cr_indices: Sequence[int]) -> int:
    """Number of inversions of the routing, i.e. waveguide crossings."""
    return _inversions(tuple(cr_indices))


@lru_cache(maxsize=1 << 17)
def _inversions(cr: tuple[int, ...]) -> int:
    p = np.asarray(check_permutation(cr))
    return int(np.triu(p[:, None] > p[None, :], 1).sum())


def dc_layer_space_size(k: int, ports: Iterable[int]) -> int:
    """Number of distinct coupler layers (compositions of k into allowed parts)."""
    parts = sorted({1, *ports})
    ways = [1] + [0] * k
    for n in range(1, k + 1):
        ways[n] = sum(ways[n - p] for p in parts if p <= n)
    return ways[k]


def validate_block(block: BlockGene, k: int, space: SearchSpace | None = None) -> None:
    allowed, cap = (space.allowed, space.cap) if space is not None else (None, None)
    broken = _block_violation(block.dc, block.cr, k, allowed, cap)
    if broken is not None:
        raise IllegalGene(*broken)


@lru_cache(maxsize=1 << 17)
def _block_violation(dc, cr, k, allowed, cap) -> tuple[str, str] | None:
    # blocks are immutable and heavily shared between genes, so verdicts are memoised
    try:
        check_partition(dc, k)
    except InvalidPartition as exc:
        return "partition-sum", str(exc)
    if len(cr) != k:
        return "permutation", f"cr has {len(cr)} entries, expected {k}"
    try:
        check_permutation(cr)
    except InvalidPermutation as exc:
        return "permutation", str(exc)
    if allowed is not None:
        bad = [p for p in dc if p not in allowed]
        if bad:
            return "port-count", f"ports {bad} not in {allowed}"
        n = count_crossings(cr)
        if n > cap:
            return "crossing-cap", f"{n} crossings exceed cap {cap}"
    return None


def validate_gene(gene: Gene, space: SearchSpace | None = None) -> None:
    """Raise :class:`IllegalGene` naming the first broken rule."""
    if gene.k < 1:
        raise IllegalGene("k", f"k must be >= 1, got {gene.k}")
    if space is not None and gene.k != space.k:
        raise IllegalGene("k", f"gene k={gene.k} but space k={space.k}")
    b = gene.active_blocks
    if b % 2:
        raise IllegalGene("block-count-even", f"B={b} is odd")
    if not 0 <= b <= gene.b_max:
        raise IllegalGene("block-count-range", f"B={b} outside [0, {gene.b_max}]")
    if space is not None:
        if not space.b_min <= b <= space.b_max:
            raise IllegalGene("block-count-range", f"B={b} outside [{space.b_min}, {space.b_max}]")
        if gene.b_max != space.b_max:
            raise IllegalGene("block-count-range", f"gene holds {gene.b_max} blocks, space expects {space.b_max}")
    seen = set()
    for i, block in enumerate(gene.blocks):
        if block in seen:
            continue
        seen.add(block)
        try:
            validate_block(block, gene.k, space)
        except IllegalGene as exc:
            raise IllegalGene(exc.rule, f"block {i}: {exc.detail}") from None


def is_legal(gene: Gene, space: SearchSpace | None = None) -> bool:
    try:
        validate_gene(gene, space)
    except IllegalGene:
        return False
    return True


def decode(gene: Gene, space: SearchSpace | None = None) -> Topology:
    validate_gene(gene, space)
    half = gene.active_blocks // 2
    active = gene.active
    return Topology(gene.k, active[:half], active[half:], gene.blocks[gene.active_blocks:])


def encode(topology: Topology) -> Gene:
    if len(topology.u_blocks) != len(topology.v_blocks):
        raise IllegalGene("block-count-even", "U and V must have equal block counts")
    return Gene(topology.k, topology.n_blocks, topology.blocks + topology.inactive)


# -- serialization ----------------------------------------------------------

def gene_to_dict(gene: Gene) -> dict:
    return {
        "k": gene.k,
        "B": gene.active_blocks,
        "blocks": [{"dc": list(b.dc), "cr": list(b.cr)} for b in gene.blocks],
    }


def gene_from_dict(data: dict) -> Gene:
    try:
        blocks = tuple(BlockGene(tuple(b["dc"]), tuple(b["cr"])) for b in data["blocks"])
        gene = Gene(int(data["k"]), int(data["B"]), blocks)
    except (KeyError, TypeError, ValueError) as exc:
        raise IllegalGene("format", f"malformed gene object: {exc!r}") from None
    validate_gene(gene)
    return gene


def gene_to_json(gene: Gene) -> str:
    return json.dumps(gene_to_dict(gene), separators=(",", ":"))


def gene_from_json(text: str) -> Gene:
    try:
        data = json.loads(text)
    except ValueError as exc:
        raise IllegalGene("format", f"invalid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise IllegalGene("format", "gene JSON must be an object")
    return gene_from_dict(data)


def gene_to_text(gene: Gene) -> str:
    """Single-line form ``B | dc;cr | dc;cr | ...`` for logs."""
    parts = [str(gene.active_blocks)]
    for b in gene.blocks:
        parts.append(",".join(map(str, b.dc)) + ";" + ",".join(map(str, b.cr)))
    return " | ".join(parts)


def gene_from_text(text: str) -> Gene:
    fields = [f.strip() for f in text.strip().split("|")]
    try:
        b = int(fields[0])
        blocks = []
        for f in fields[1:]:
            dc, cr = f.split(";")
            blocks.append(BlockGene(tuple(int(x) for x in dc.split(",")),
                                    tuple(int(x) for x in cr.split(","))))
    except (ValueError, IndexError) as exc:
        raise IllegalGene("format", f"malformed gene text: {exc}") from None
    if not blocks:
        raise IllegalGene("format", "gene text carries no blocks; k is undefined")
    gene = Gene(sum(blocks[0].dc), b, tuple(blocks))
    validate_gene(gene)
    return gene


def canonical_key(gene: Gene) -> str:
    """Key of the active structure only; inactive tail does not affect objectives."""
    body = " | ".join(
        ",".join(map(str, b.dc)) + ";" + ",".join(map(str, b.cr)) for b in gene.active
    )
    return f"{gene.k}/{gene.active_blocks} | {body}"


# -- matrix assembly --------------------------------------------------------

@lru_cache(maxsize=65536)
def block_fixed_matrix(block: BlockGene) -> np.ndarray:
    """``P_b @ T_b`` of one block (everything except its phase column)."""
    k = len(block.cr)
    mat = permutation_matrix(block.cr) @ coupler_layer_matrix(block.dc, k)
    mat.setflags(write=False)
    return mat


def _check_phases(blocks: Sequence[BlockGene], phases, k: int) -> np.ndarray:
    phases = np.asarray(phases, dtype=float)
    if len(blocks) == 0 and phases.size == 0:
        return np.zeros((0, k))
    if phases.shape != (len(blocks), k):
        raise InvalidArgument(f"phases shape {phases.shape} != ({len(blocks)}, {k})")
    for blk in blocks:
        if len(blk.cr) != k or sum(blk.dc) != k:
            raise InvalidArgument("block size does not match k")
    return phases


def assemble_unitary(blocks: Sequence[BlockGene], phases, k: int) -> np.ndarray:
    """Transfer matrix of a chain of blocks, block 0 first in the light path."""
    phases = _check_phases(blocks, phases, k)
    out = np.eye(k, dtype=complex)
    for blk, phi in zip(blocks, phases):
        # X_b = F_b diag(e^{-j phi}) as a column scaling
        out = (block_fixed_matrix(blk) * np.exp(-1j * phi)[None, :]) @ out
    return out


def assemble_weight(topology: Topology, phases, sigma) -> np.ndarray:
    """``W = U diag(sigma) V`` with ``phases`` given per active block in gene order."""
    k = topology.k
    sigma = np.asarray(sigma, dtype=complex)
    if sigma.shape != (k,) or not np.all(np.isfinite(sigma)):
        raise InvalidArgument(f"sigma must be {k} finite values")
    phases = _check_phases(topology.blocks, phases, k)
    nu = len(topology.u_blocks)
    u = assemble_unitary(topology.u_blocks, phases[:nu], k)
    v = assemble_unitary(topology.v_blocks, phases[nu:], k)
    return u @ (sigma[:, None] * v)


# -- manual designs ---------------------------------------------------------

def _local_shuffle(k: int, group: int) -> tuple[int, ...]:
    """Interleave the two halves of every contiguous ``group`` of wires."""
    bits = group.bit_length() - 1
    out = []
    for x in range(k):
        base, r = divmod(x, group)
        out.append(base * group + (((r << 1) | (r >> (bits - 1))) % group))
    return tuple(out)


def _mzi_partition(k: int, parity: int) -> tuple[int, ...]:
    if parity == 0:
        return (2,) * (k // 2) + (1,) * (k % 2)
    inner = (k - 1) // 2
    return (1,) + (2,) * inner + (1,) * ((k - 1) % 2)


def baseline_blocks(style: str, k: int) -> tuple[BlockGene, ...]:
    """Blocks of one unitary of a manual design."""
    ident = tuple(range(k))
    if style == "mzi-clements":
        if k < 2:
            raise InvalidArgument("mzi-clements needs k >= 2")
        blocks = []
        for col in range(k):
            part = _mzi_partition(k, col % 2)
            blocks += [BlockGene(part, ident), BlockGene(part, ident)]
        return tuple(blocks)
    if style == "butterfly":
        if k < 2 or k & (k - 1):
            raise InvalidArgument(f"butterfly needs k a power of two >= 2, got {k}")
        n = k.bit_length() - 1
        dc = (2,) * (k // 2)
        crs = [_local_shuffle(k, 2 ** (s + 2)) for s in range(n - 1)] + [ident]
        return tuple(BlockGene(dc, cr) for cr in crs)
    if style == "mmi-interlaced":
        if k < 2:
            raise InvalidArgument("mmi-interlaced needs k >= 2")
        n = max(1, math.ceil(math.log2(k)))
        return tuple(BlockGene((k,), ident) for _ in range(n))
    raise InvalidArgument(f"unknown baseline style {style!r}; choose from {BASELINE_STYLES}")


def make_baseline(style: str, k: int) -> Gene:
    half = baseline_blocks(style, k)
    gene = Gene(k, 2 * len(half), half + half)
    validate_gene(gene)
    return gene


def pad_gene(gene: Gene, b_max: int) -> Gene:
    """Resize the block list to ``b_max`` by cycling the front blocks into the tail."""
    if gene.active_blocks > b_max:
        raise IllegalGene("block-count-range", f"B={gene.active_blocks} exceeds b_max={b_max}")
    blocks = list(gene.blocks[:b_max])
    src = gene.blocks or (BlockGene((1,) * gene.k, tuple(range(gene.k))),)
    i = 0
    while len(blocks) < b_max:
        blocks.append(src[i % len(src)])
        i += 1
    return Gene(gene.k, gene.active_blocks, tuple(blocks))
