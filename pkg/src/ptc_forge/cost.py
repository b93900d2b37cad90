"""Layout-aware area, power and latency of a PTC, and the derived CD/EE."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .devices import check_permutation
from .errors import InvalidArgument, InvalidPdk
from .pdk import Pdk
from .topology import BlockGene, Topology, decode, make_baseline

UM2_PER_MM2 = 1e6


@dataclass(frozen=True)
class CrossingLayout:
    n_cols: int
    n_rows: int
    worst_wire_crossings: int
    n_swaps: int


@lru_cache(maxsize=65536)
def _layout(cr: tuple[int, ...]) -> CrossingLayout:
    cr = check_permutation(cr)
    k = len(cr)
    dest = list(cr)
    swaps: list[int] = []
    # odd-even transposition sort records each physical crossing in order
    for stage in range(k):
        moved = False
        for j in range(stage % 2, k - 1, 2):
            if dest[j] > dest[j + 1]:
                dest[j], dest[j + 1] = dest[j + 1], dest[j]
                swaps.append(j)
                moved = True
        if not moved and stage > 0 and dest == sorted(dest):
            break
    # greedy left-packing: each crossing goes to the first column after the
    # last crossing touching either of its two slots
    last = [0] * k
    per_col: dict[int, int] = {}
    for j in swaps:
        col = max(last[j], last[j + 1]) + 1
        last[j] = last[j + 1] = col
        per_col[col] = per_col.get(col, 0) + 1
    a = np.asarray(cr)
    inv = np.triu(a[:, None] > a[None, :], 1)
    worst = int((inv.sum(axis=0) + inv.sum(axis=1)).max()) if k else 0
    return CrossingLayout(
        n_cols=len(per_col),
        n_rows=max(per_col.values(), default=0),
        worst_wire_crossings=worst,
        n_swaps=len(swaps),
    )


def layout_crossing_array(cr_indices: Sequence[int], pdk: Pdk | None = None) -> CrossingLayout:
    """Compact crossing-array layout of one routing layer.

    Returns column and row counts of the packed array and the largest number
    of crossings any single wire passes through. ``pdk`` is accepted for
    interface symmetry; the layout depends on the routing only.
    """
    return _layout(tuple(cr_indices))


def crossing_extent(layout: CrossingLayout, pdk: Pdk) -> tuple[float, float]:
    """(longitudinal, lateral) size of a crossing array in um."""
    if layout.n_cols == 0:
        return 0.0, 0.0
    cr, sp = pdk.cr, pdk.spacing
    length = layout.n_cols * cr.length + (layout.n_cols - 1) * sp.dl_cr
    width = layout.n_rows * cr.width + (layout.n_rows - 1) * sp.dw_cr
    return length, width


def _max_dc(block: BlockGene, pdk: Pdk, attr: str) -> float:
    return max(getattr(pdk.coupler(p), attr) for p in set(block.dc))


def block_area_um2(block: BlockGene, k: int, pdk: Pdk) -> float:
    ps, sp = pdk.ps, pdk.spacing
    l_dc = _max_dc(block, pdk, "length")
    cr_len, cr_wid = crossing_extent(layout_crossing_array(block.cr), pdk)
    return (
        ps.length * (ps.width + (k - 1) * sp.dw)
        + l_dc * (k - 1) * sp.dw
        + cr_len * cr_wid
        + 3 * (k - 1) * sp.dw * sp.dl
        + ps.width * sp.dl
    )


def sigma_area_um2(k: int, pdk: Pdk) -> float:
    ps, sp, y = pdk.ps, pdk.spacing, pdk.ybranch
    return ((2 * k - 1) * sp.dw + ps.width) * (ps.length + 2 * sp.dl) + (
        (k - 1) * sp.dw + y.length
    ) * (2 * y.length + sp.dw)


def sigma_path_um(pdk: Pdk) -> float:
    """Longitudinal extent of the sigma column, matching its area footprint."""
    return pdk.ps.length + 2 * pdk.spacing.dl + 2 * pdk.ybranch.length + pdk.spacing.dw


def area(topology: Topology, pdk: Pdk) -> tuple[float, float]:
    """(optical, electrical) area in mm^2."""
    k = topology.k
    optical = sum(block_area_um2(b, k, pdk) for b in topology.blocks) + sigma_area_um2(k, pdk)
    electrical = k * pdk.electrical.area_per_channel
    return optical / UM2_PER_MM2, electrical


def insertion_loss(topology: Topology, pdk: Pdk) -> float:
    """Worst-case path insertion loss in dB."""
    total = 0.0
    for b in topology.blocks:
        layout = layout_crossing_array(b.cr)
        total += (
            pdk.ps.insertion_loss
            + _max_dc(b, pdk, "insertion_loss")
            + layout.worst_wire_crossings * pdk.cr.insertion_loss
        )
    return total + pdk.ps.insertion_loss + 2 * pdk.ybranch.insertion_loss


@dataclass(frozen=True)
class PowerBreakdown:
    total: float
    laser: float
    dac: float
    adc: float
    static: float


def power(topology: Topology, pdk: Pdk, il: float | None = None) -> PowerBreakdown:
    """Total power in mW with the laser and per-channel converter terms."""
    el, op, sysp = pdk.electrical, pdk.optics, pdk.system
    if op.eta <= 0 or el.f_s <= 0:
        raise InvalidPdk("eta and f_s must be positive")
    if il is None:
        il = insertion_loss(topology, pdk)
    b, b0, f = sysp.b, el.b0, sysp.f
    laser = 2**b * 10 ** ((op.s_pd + il) / 10) / op.eta
    dac = (b0 * 2**b * f) / (b * 2**b0 * el.f_s) * el.p_dac0
    adc = (b0 * f) / (b * el.f_s) * el.p_adc0
    k = topology.k
    static = pdk.ps.static_power * k * (topology.n_blocks + 1)
    total = laser + k * (el.p_mzm + dac + adc + el.p_tia + el.p_pd) + static
    return PowerBreakdown(total=total, laser=laser, dac=dac, adc=adc, static=static)


def longest_path(topology: Topology, pdk: Pdk) -> float:
    """Worst-case optical path length in um."""
    sp = pdk.spacing
    total = 0.0
    for b in topology.blocks:
        cr_len, _ = crossing_extent(layout_crossing_array(b.cr), pdk)
        total += pdk.ps.length + _max_dc(b, pdk, "length") + cr_len + 3 * sp.dl
    return total + sigma_path_um(pdk)


def latency(topology: Topology, pdk: Pdk, path_um: float | None = None) -> float:
    """Latency in ps; the clock stretches when the optical delay exceeds a cycle."""
    if pdk.system.f <= 0:
        raise InvalidPdk("clock frequency must be positive")
    if path_um is None:
        path_um = longest_path(topology, pdk)
    cycle = 1000.0 / pdk.system.f
    optical = pdk.optics.n_g * path_um / pdk.optics.c0
    return max(cycle, optical + pdk.electrical.tau_dac + pdk.electrical.tau_pd)


def cd_ee(area_total: float, power_mw: float, latency_ps: float, k: int) -> tuple[float, float, float]:
    """Compute density (TOPS/mm^2), energy efficiency (TOPS/W) and AEE (TOPS/W/mm^2).

    ``2K^2`` operations per pass; with latency in ps, ops/ps is already TOPS.
    """
    if area_total <= 0 or power_mw <= 0 or latency_ps <= 0:
        raise InvalidArgument("area, power and latency must be positive")
    ops = 2.0 * k * k
    cd = ops / (area_total * latency_ps)
    ee = ops / (power_mw / 1000.0 * latency_ps)
    return cd, ee, ee / area_total


@dataclass(frozen=True)
class CostReport:
    k: int
    area_optical: float
    area_electrical: float
    power: float
    latency: float
    insertion_loss: float
    longest_path: float
    cd: float
    ee: float
    aee: float
    laser_power: float = 0.0

    @property
    def area_total(self) -> float:
        return self.area_optical + self.area_electrical

    def to_dict(self) -> dict:
        d = asdict(self)
        d["area_total"] = self.area_total
        return d

    def table_row(self, label: str = "") -> str:
        return (
            f"{label}K={self.k} Area(O+E) {self.area_optical:.2f}+{self.area_electrical:.2f} "
            f"Power {self.power:.2f} Latency {self.latency:.2f} "
            f"CD {self.cd:.3f} EE {self.ee:.3f} AEE {self.aee:.3f}"
        )


def cost_report(topology: Topology, pdk: Pdk) -> CostReport:
    optical, electrical = area(topology, pdk)
    il = insertion_loss(topology, pdk)
    pw = power(topology, pdk, il)
    path = longest_path(topology, pdk)
    tau = latency(topology, pdk, path)
    cd, ee, aee = cd_ee(optical + electrical, pw.total, tau, topology.k)
    return CostReport(
        k=topology.k,
        area_optical=optical,
        area_electrical=electrical,
        power=pw.total,
        latency=tau,
        insertion_loss=il,
        longest_path=path,
        cd=cd,
        ee=ee,
        aee=aee,
        laser_power=pw.laser,
    )


# -- constraints ------------------------------------------------------------

AXES = ("area", "power", "latency")


@dataclass(frozen=True)
class Constraints:
    area: tuple[float, float] = (0.0, float("inf"))
    power: tuple[float, float] = (0.0, float("inf"))
    latency: tuple[float, float] = (0.0, float("inf"))

    def __post_init__(self):
        for axis in AXES:
            lo, hi = (float(x) for x in getattr(self, axis))
            if lo > hi:
                raise InvalidArgument(f"{axis} constraint has min {lo} > max {hi}")
            object.__setattr__(self, axis, (lo, hi))

    def to_dict(self) -> dict:
        return {axis: list(getattr(self, axis)) for axis in AXES}

    @classmethod
    def from_dict(cls, data: dict) -> "Constraints":
        unknown = set(data) - set(AXES)
        if unknown:
            raise InvalidArgument(f"unknown constraint axes {sorted(unknown)}")
        return cls(**{k: tuple(v) for k, v in data.items()})


@dataclass(frozen=True)
class Verdict:
    feasible: bool
    violations: tuple[str, ...]
    slack: dict

    def __bool__(self) -> bool:
        return self.feasible


def check_constraints(report: CostReport, c: Constraints) -> Verdict:
    """Closed-interval check; slack is the signed distance to the nearer bound."""
    values = {"area": report.area_total, "power": report.power, "latency": report.latency}
    slack = {}
    for axis in AXES:
        lo, hi = getattr(c, axis)
        slack[axis] = min(values[axis] - lo, hi - values[axis])
    violations = tuple(a for a in AXES if slack[a] < 0)
    return Verdict(not violations, violations, slack)


# Reference bounds for a 16x16 search.
REFERENCE_CONSTRAINTS_K16 = Constraints(area=(18.31, 24.02), power=(50.0, 1000.0), latency=(100.0, 1000.0))


def derived_constraints(k: int, pdk: Pdk) -> Constraints:
    """Area window from 80% of butterfly to 50% of MZI optical area, plus electrical.

    Power and latency use the fixed [50, 1000] mW and [100, 1000] ps windows.
    """
    bf = decode(make_baseline("butterfly", k)) if k & (k - 1) == 0 else None
    mzi = decode(make_baseline("mzi-clements", k))
    mzi_opt, electrical = area(mzi, pdk)
    lo = 0.8 * area(bf, pdk)[0] if bf is not None else 0.0
    return Constraints(
        area=(lo + electrical, 0.5 * mzi_opt + electrical),
        power=(50.0, 1000.0),
        latency=(100.0, 1000.0),
    )


def default_constraints(k: int, pdk: Pdk) -> Constraints:
    return REFERENCE_CONSTRAINTS_K16 if k == 16 else derived_constraints(k, pdk)
