import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ptc_forge.errors import InvalidArgument
from ptc_forge.proxy import (
    ProxyConfig,
    ProxyWeights,
    accuracy_score,
    batch_loss,
    calibrate_weights,
    combine,
    param_score,
    phase_gradients,
    sparsity_score,
    spearman,
    zico_from_gradients,
    zico_score,
)
from ptc_forge.topology import BlockGene, Topology, assemble_weight, decode, make_baseline

from strategies import sample_gene


def ident(k):
    return tuple(range(k))


def bare(k):
    return BlockGene((1,) * k, ident(k))


# -- param ------------------------------------------------------------------

def test_param_one_block():
    assert param_score(Topology(8, (bare(8),), ())) == pytest.approx(1 / 8)


def test_param_bare_blocks_merge():
    assert param_score(Topology(8, (bare(8), bare(8)), ())) == pytest.approx(1 / 8)


def test_param_couplers_block_merging():
    blk = BlockGene((2,) * 4, ident(8))
    assert param_score(Topology(8, (blk, blk), ())) == pytest.approx(2 / 8)


def test_param_partial_merge():
    # two bare wires in the first block merge into the next column
    first = BlockGene((2, 2, 1, 1, 2), ident(8))
    assert param_score(Topology(8, (first, first), ())) == pytest.approx((16 - 2) / 64)


# -- sparsity ---------------------------------------------------------------

def test_sparsity_empty_is_diagonal():
    assert sparsity_score(Topology(8, (), ()), rng=0) == pytest.approx(1 / 8)


def test_sparsity_single_full_coupler_is_dense():
    assert sparsity_score(Topology(8, (BlockGene((8,), ident(8)),), ()), rng=0) == 1.0


@pytest.mark.parametrize("k", [4, 8, 16, 32])
def test_sparsity_butterfly_dense(k):
    assert sparsity_score(decode(make_baseline("butterfly", k)), rng=0) == 1.0


def test_sparsity_block_diagonal_by_hand():
    blk = BlockGene((2, 2, 2, 2), ident(8))
    # a pair coupler repeated on the same pairs stays 2x2 block diagonal
    assert sparsity_score(Topology(8, (blk,), (blk,)), rng=0) == pytest.approx(16 / 64)


def test_sparsity_in_range():
    rng = np.random.default_rng(3)
    for _ in range(30):
        k = int(rng.choice([4, 8, 16]))
        s = sparsity_score(decode(sample_gene(k, rng)), rng=rng)
        assert 1 / k <= s <= 1


# -- gradients --------------------------------------------------------------

def random_case(rng, k, readout):
    t = decode(sample_gene(k, rng, b_range=(2, 8)))
    phases = rng.uniform(0, 2 * np.pi, (t.n_blocks, k))
    sigma = rng.uniform(0.5, 1.5, k) * np.exp(1j * rng.uniform(0, 6, k))
    n = int(rng.integers(1, 6))
    x = rng.standard_normal((k, n)) + 1j * rng.standard_normal((k, n))
    if readout == "linear":
        y = rng.standard_normal((k, n)) + 1j * rng.standard_normal((k, n))
    else:
        y = rng.uniform(0, 2, (k, n))
    return t, phases, sigma, x, y


def finite_difference(t, phases, sigma, x, y, readout, h=1e-5):
    grad = np.zeros_like(phases)
    for idx in np.ndindex(phases.shape):
        up, down = phases.copy(), phases.copy()
        up[idx] += h
        down[idx] -= h
        grad[idx] = (batch_loss(t, up, sigma, x, y, readout) - batch_loss(t, down, sigma, x, y, readout)) / (2 * h)
    return grad


@pytest.mark.parametrize("readout", ["linear", "intensity"])
def test_gradients_match_finite_differences(readout):
    rng = np.random.default_rng(11)
    for _ in range(5):
        k = int(rng.choice([4, 8]))
        case = random_case(rng, k, readout)
        g = phase_gradients(*case, readout=readout)
        fd = finite_difference(*case, readout=readout)
        assert np.max(np.abs(g - fd)) / max(np.max(np.abs(fd)), 1e-12) <= 1e-5


def test_gradient_zero_at_stationary_point(rng):
    t, phases, sigma, x, _ = random_case(rng, 8, "linear")
    y = assemble_weight(t, phases, sigma) @ x
    assert np.allclose(phase_gradients(t, phases, sigma, x, y), 0, atol=1e-12)


def test_duplicated_batch_gives_same_gradient(rng):
    t, phases, sigma, x, y = random_case(rng, 8, "linear")
    g1 = phase_gradients(t, phases, sigma, x, y)
    g2 = phase_gradients(t, phases, sigma, np.hstack([x, x]), np.hstack([y, y]))
    assert np.allclose(g1, g2, atol=1e-12)


def test_gradient_input_validation(rng):
    t, phases, sigma, x, y = random_case(rng, 4, "linear")
    with pytest.raises(InvalidArgument):
        phase_gradients(t, phases, sigma, x[:3], y[:3])
    with pytest.raises(InvalidArgument):
        phase_gradients(t, phases, sigma, x, y, readout="cubic")


# -- zico -------------------------------------------------------------------

def test_zico_empty_topology():
    assert zico_score(Topology(8, (), ()), rng=0) == 0.0


def test_zico_statistic_by_hand():
    g = np.array([[[1.0, 2.0]], [[3.0, 2.0]]])
    # column 0: mean|g| = 2, std = 1; column 1 has zero spread and is skipped
    assert zico_from_gradients(g) == pytest.approx(np.log(2.0))


@given(st.integers(0, 2**31))
def test_zico_invariant_to_batch_order(seed):
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((5, 3, 4))
    assert zico_from_gradients(g[rng.permutation(5)]) == pytest.approx(zico_from_gradients(g), rel=1e-12)


def test_zico_needs_two_batches():
    with pytest.raises(InvalidArgument):
        zico_score(decode(make_baseline("butterfly", 8)), rng=0, n_batches=1)


def test_zico_depth_trend_recorded():
    shallow = decode(make_baseline("butterfly", 16))
    deep = Topology(16, shallow.u_blocks * 2, shallow.v_blocks * 2)
    a = [zico_score(shallow, rng=s) for s in range(20)]
    b = [zico_score(deep, rng=s) for s in range(20)]
    assert np.all(np.isfinite(a)) and np.all(np.isfinite(b))
    print(f"median zico shallow {np.median(a):.3f} deep {np.median(b):.3f}")


# -- combination ------------------------------------------------------------

def test_default_weighted_sum():
    assert combine(10, 0.5, 0.9).combined == pytest.approx(0.15 + 0.2805 + 0.1575, abs=1e-12)


@pytest.mark.parametrize("i", range(3))
def test_unit_weights_recover_sub_scores(i):
    t = decode(make_baseline("butterfly", 8))
    w = ProxyWeights(*np.eye(3)[i])
    b = accuracy_score(t, weights=w, rng=5)
    assert b.combined == pytest.approx((b.s_zico, b.s_param, b.s_sparsity)[i], abs=1e-15)


def test_accuracy_score_deterministic_and_finite():
    for style in ("butterfly", "mzi-clements", "mmi-interlaced"):
        t = decode(make_baseline(style, 16))
        a, b = accuracy_score(t, rng=7), accuracy_score(t, rng=7)
        assert a == b
        assert np.isfinite([a.s_zico, a.s_param, a.s_sparsity, a.combined]).all()


def test_proxy_config_round_trip():
    cfg = ProxyConfig(zico_batches=3, readout="intensity")
    assert ProxyConfig.from_dict(cfg.to_dict()) == cfg


# -- spearman ---------------------------------------------------------------

def rank_oracle(values):
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        for m in range(i, j + 1):
            ranks[order[m]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def spearman_oracle(xs, ys):
    rx, ry = rank_oracle(list(xs)), rank_oracle(list(ys))
    mx, my = sum(rx) / len(rx), sum(ry) / len(ry)
    num = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    den = (sum((a - mx) ** 2 for a in rx) * sum((b - my) ** 2 for b in ry)) ** 0.5
    return num / den


def test_spearman_examples():
    xs = [1, 2, 3, 4, 5]
    assert spearman(xs, xs) == pytest.approx(1.0)
    assert spearman(xs, xs[::-1]) == pytest.approx(-1.0)
    assert spearman(xs, [2, 1, 4, 3, 5]) == pytest.approx(0.8, abs=1e-12)


def test_spearman_matches_oracle_with_ties():
    rng = np.random.default_rng(0)
    for _ in range(100):
        xs = rng.integers(0, 5, 10).astype(float)
        ys = rng.standard_normal(10)
        if np.ptp(xs) == 0:
            continue
        assert spearman(xs, ys) == pytest.approx(spearman_oracle(xs, ys), abs=1e-12)


@pytest.mark.parametrize("xs,ys", [([1, 2], [1, 2, 3]), ([1], [1]), ([1, 1, 1], [1, 2, 3])])
def test_spearman_errors(xs, ys):
    with pytest.raises(InvalidArgument):
        spearman(xs, ys)


def test_calibrate_recovers_ranking():
    rng = np.random.default_rng(2)
    subs = rng.uniform(0, 1, (40, 3))
    acc = subs @ np.array([0.2, 0.5, 0.3])
    w, rho = calibrate_weights(subs, acc, steps=11)
    assert rho == pytest.approx(1.0)
    assert (w.c_zico, w.c_param, w.c_sparsity) == pytest.approx((0.2, 0.5, 0.3))
