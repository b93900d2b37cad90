"""Hypothesis strategies and plain samplers for genes."""

import numpy as np
from hypothesis import strategies as st

from ptc_forge.evolution import random_gene
from ptc_forge.topology import default_space


def sample_gene(k, rng, b_range=None, ports=None):
    return random_gene(default_space(k, b_range, ports), rng)


@st.composite
def genes(draw, ks=(4, 8, 16)):
    k = draw(st.sampled_from(ks))
    seed = draw(st.integers(0, 2**32 - 1))
    space = default_space(k)
    return random_gene(space, np.random.default_rng(seed)), space


@st.composite
def permutations(draw, min_k=1, max_k=8):
    k = draw(st.integers(min_k, max_k))
    return tuple(draw(st.permutations(range(k))))


@st.composite
def partitions(draw, k, ports):
    allowed = (1,) + tuple(ports)
    out, left = [], k
    while left:
        p = draw(st.sampled_from([a for a in allowed if a <= left]))
        out.append(p)
        left -= p
    return tuple(out)
