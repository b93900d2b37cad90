"""Training-free accuracy proxy of a PTC topology.

The accuracy score is a fixed linear blend of three sub-scores:

* param: effective phase shifters after merging, over K^2;
* sparsity: fraction of structurally non-zero entries of ``U @ V``;
* zico: gradient signal-to-noise of the phases on synthetic batches.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import InvalidArgument
from .topology import Topology, assemble_weight, block_fixed_matrix


@dataclass(frozen=True)
class ProxyWeights:
    c_zico: float = 0.015
    c_param: float = 0.561
    c_sparsity: float = 0.175

    def __post_init__(self):
        if not all(np.isfinite([self.c_zico, self.c_param, self.c_sparsity])):
            raise InvalidArgument("proxy weights must be finite")


@dataclass(frozen=True)
class ProxyConfig:
    weights: ProxyWeights = field(default_factory=ProxyWeights)
    sparsity_samples: int = 8
    sparsity_threshold: float = 1e-8
    zico_batches: int = 4
    zico_batch_size: int = 16
    readout: str = "linear"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ProxyConfig":
        data = dict(data)
        if "weights" in data:
            data["weights"] = ProxyWeights(**data["weights"])
        return cls(**data)


@dataclass(frozen=True)
class ScoreBundle:
    s_zico: float
    s_param: float
    s_sparsity: float
    combined: float

    def to_dict(self) -> dict:
        return asdict(self)


def _rng(rng) -> np.random.Generator:
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def _merged_in_chain(blocks) -> int:
    # a phase shifter merges into the next one when only a bare waveguide
    # (1-port slot) separates them
    merges = 0
    for blk in blocks[:-1]:
        merges += sum(1 for p in blk.dc if p == 1)
    return merges


def effective_phase_shifters(topology: Topology) -> int:
    k = topology.k
    total = 0
    for chain in (topology.u_blocks, topology.v_blocks):
        if chain:
            total += k * len(chain) - _merged_in_chain(chain)
    return total


def param_score(topology: Topology) -> float:
    return effective_phase_shifters(topology) / topology.k**2


def _stacked_unitary(blocks, phases: np.ndarray, k: int) -> np.ndarray:
    """Unitaries for a stack of phase settings; ``phases`` is (S, n_blocks, K)."""
    out = np.broadcast_to(np.eye(k, dtype=complex), (phases.shape[0], k, k)).copy()
    for b, blk in enumerate(blocks):
        out = block_fixed_matrix(blk) @ (np.exp(-1j * phases[:, b, :])[:, :, None] * out)
    return out


def sparsity_score(topology: Topology, rng=None, samples: int = 8, threshold: float = 1e-8) -> float:
    """Mean density of ``|U @ V|`` over random phase settings (sigma = 1)."""
    if samples < 1:
        raise InvalidArgument("samples must be >= 1")
    rng = _rng(rng)
    k, nu = topology.k, len(topology.u_blocks)
    phases = rng.uniform(0, 2 * np.pi, size=(samples, topology.n_blocks, k))
    u = _stacked_unitary(topology.u_blocks, phases[:, :nu], k)
    v = _stacked_unitary(topology.v_blocks, phases[:, nu:], k)
    w = u @ v
    return float(np.mean(np.abs(w) > threshold))


def _physical_order(topology: Topology):
    """(gene index, block) pairs in light-flow order: V, then U."""
    nu = len(topology.u_blocks)
    v = [(nu + i, b) for i, b in enumerate(topology.v_blocks)]
    u = [(i, b) for i, b in enumerate(topology.u_blocks)]
    return v, u


def _forward_backward(topology, phases, sigma, x, y, readout):
    """Loss and phase gradients for stacked batches ``x``: (S, K, N)."""
    v_chain, u_chain = _physical_order(topology)
    n = x.shape[-1]
    h = x
    saved = []
    for stage in (v_chain, None, u_chain):
        if stage is None:
            h = sigma[None, :, None] * h
            continue
        for gi, blk in stage:
            z = np.exp(-1j * phases[gi])[None, :, None] * h
            saved.append((gi, blk, z))
            h = block_fixed_matrix(blk) @ z
    if readout == "linear":
        r = h - y
        loss = np.sum(np.abs(r) ** 2, axis=(-2, -1)) / n
        adj = r / n
    elif readout == "intensity":
        r = np.abs(h) ** 2 - y
        loss = np.sum(r**2, axis=(-2, -1)) / n
        adj = 2 * r * h / n
    else:
        raise InvalidArgument(f"unknown readout {readout!r}")
    grads = np.zeros((x.shape[0],) + phases.shape)
    n_v = len(v_chain)
    for idx in range(len(saved) - 1, -1, -1):
        gi, blk, z = saved[idx]
        az = block_fixed_matrix(blk).conj().T @ adj
        grads[:, gi, :] = 2 * np.real(np.conj(az) * (-1j) * z).sum(axis=-1)
        adj = np.exp(1j * phases[gi])[None, :, None] * az
        if idx == n_v:
            adj = np.conj(sigma)[None, :, None] * adj
    return loss, grads


def _prepare(topology, phases, sigma, inputs, targets):
    k = topology.k
    phases = np.asarray(phases, dtype=float).reshape(topology.n_blocks, k) if topology.n_blocks else np.zeros((0, k))
    sigma = np.asarray(sigma, dtype=complex)
    x = np.asarray(inputs, dtype=complex)
    y = np.asarray(targets)
    if sigma.shape != (k,):
        raise InvalidArgument(f"sigma must have {k} entries")
    if x.ndim != 2 or x.shape[0] != k or x.shape[1] < 1:
        raise InvalidArgument(f"inputs must be ({k}, N>=1), got {x.shape}")
    if y.shape != x.shape:
        raise InvalidArgument(f"targets shape {y.shape} != inputs shape {x.shape}")
    return phases, sigma, x[None], y[None]


def batch_loss(topology: Topology, phases, sigma, inputs, targets, readout: str = "linear") -> float:
    """Mean squared error of ``W @ inputs`` against ``targets`` (columns are samples)."""
    phases, sigma, x, y = _prepare(topology, phases, sigma, inputs, targets)
    w = assemble_weight(topology, phases, sigma)
    out = w @ x[0]
    if readout == "intensity":
        out = np.abs(out) ** 2
    elif readout != "linear":
        raise InvalidArgument(f"unknown readout {readout!r}")
    return float(np.sum(np.abs(out - y[0]) ** 2) / x.shape[-1])


def phase_gradients(topology: Topology, phases, sigma, inputs, targets, readout: str = "linear") -> np.ndarray:
    """Exact gradient of :func:`batch_loss` for every phase, shape (n_blocks, K).

    Each phase enters through one diagonal factor, so a single forward sweep
    and one adjoint sweep give all derivatives.
    """
    phases, sigma, x, y = _prepare(topology, phases, sigma, inputs, targets)
    _, grads = _forward_backward(topology, phases, sigma, x, y, readout)
    return grads[0]


def zico_score(topology: Topology, rng=None, n_batches: int = 4, batch_size: int = 16,
               readout: str = "linear") -> float:
    """Sum over phase-shifter columns of log(sum(mean|g| / std(g))) across batches."""
    if n_batches < 2:
        raise InvalidArgument("zico needs at least two batches")
    if topology.n_blocks == 0:
        return 0.0
    rng = _rng(rng)
    k = topology.k
    phases = rng.uniform(0, 2 * np.pi, size=(topology.n_blocks, k))
    sigma = np.ones(k, dtype=complex)
    shape = (n_batches, k, batch_size)
    x = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
    if readout == "intensity":
        y = rng.uniform(0, 1, size=shape)
    else:
        y = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
    _, grads = _forward_backward(topology, phases, sigma, x, y, readout)
    return zico_from_gradients(grads)


def zico_from_gradients(grads) -> float:
    """Zico statistic of stacked gradients shaped (batches, columns, K).

    Entries whose gradient never varies across batches are skipped.
    """
    grads = np.asarray(grads, dtype=float)
    if grads.ndim != 3 or grads.shape[0] < 2:
        raise InvalidArgument("gradients must be (batches >= 2, columns, K)")
    mean_abs = np.abs(grads).mean(axis=0)
    std = grads.std(axis=0)
    floor = 1e-12 * max(1.0, float(std.max(initial=0.0)))
    score = 0.0
    for b in range(grads.shape[1]):
        ok = std[b] > floor
        total = float(np.sum(mean_abs[b][ok] / std[b][ok]))
        if total > 0:
            score += np.log(total)
    return float(score)


def accuracy_score(topology: Topology, weights: ProxyWeights | None = None, rng=None,
                   config: ProxyConfig | None = None) -> ScoreBundle:
    config = config or ProxyConfig()
    weights = weights or config.weights
    rng = _rng(rng)
    s_sparsity = sparsity_score(topology, rng, config.sparsity_samples, config.sparsity_threshold)
    s_zico = zico_score(topology, rng, config.zico_batches, config.zico_batch_size, config.readout)
    s_param = param_score(topology)
    return combine(s_zico, s_param, s_sparsity, weights)


def combine(s_zico: float, s_param: float, s_sparsity: float, weights: ProxyWeights | None = None) -> ScoreBundle:
    w = weights or ProxyWeights()
    combined = w.c_zico * s_zico + w.c_param * s_param + w.c_sparsity * s_sparsity
    return ScoreBundle(s_zico=s_zico, s_param=s_param, s_sparsity=s_sparsity, combined=combined)


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Spearman rank correlation with average ranks for ties."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise InvalidArgument("spearman needs two 1-D sequences of equal length")
    if xs.size < 2:
        raise InvalidArgument("spearman needs at least two points")
    rx = rankdata(xs) - (xs.size + 1) / 2
    ry = rankdata(ys) - (ys.size + 1) / 2
    denom = np.sqrt(np.sum(rx**2) * np.sum(ry**2))
    if denom == 0:
        raise InvalidArgument("spearman is undefined for constant input")
    return float(np.clip(np.sum(rx * ry) / denom, -1.0, 1.0))


def calibrate_weights(sub_scores, accuracies, steps: int = 21) -> tuple[ProxyWeights, float]:
    """Grid-search non-negative blend weights maximising Spearman vs accuracy.

    ``sub_scores`` rows are (zico, param, sparsity). Rank correlation is
    invariant to positive scaling, so the grid lives on the unit simplex.
    """
    s = np.asarray(sub_scores, dtype=float)
    acc = np.asarray(accuracies, dtype=float)
    if s.ndim != 2 or s.shape[1] != 3 or s.shape[0] != acc.size:
        raise InvalidArgument("sub_scores must be (n, 3) aligned with accuracies")
    best, best_rho = None, -np.inf
    grid = np.linspace(0.0, 1.0, steps)
    for a in grid:
        for b in grid:
            c = 1.0 - a - b
            if c < -1e-12:
                continue
            c = max(c, 0.0)
            combined = s @ np.array([a, b, c])
            if np.ptp(combined) == 0:
                continue
            rho = spearman(combined, acc)
            if rho > best_rho + 1e-15:
                best, best_rho = (a, b, c), rho
    if best is None:
        raise InvalidArgument("every weight combination gives a constant score")
    return ProxyWeights(c_zico=float(best[0]), c_param=float(best[1]), c_sparsity=float(best[2])), float(best_rho)
