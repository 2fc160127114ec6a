"""Weight initialization schemes and dropout masks.

Balanced initialization draws each incoming weight of a unit from a centered
Gaussian with standard deviation 1/sqrt(fan-in).  The unbalanced variant
starts from the same draw and then applies random rescalings, so the two are
always rescaling equivalent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .graph import NetworkGraph
from .rescaling import unbalance


@dataclass(frozen=True)
class DropoutMask:
    """Which hidden units stay active this step (ordered as g.hidden_nodes)."""

    retained: np.ndarray
    retain_prob: float


def init_balanced(g: NetworkGraph, seed: int) -> np.ndarray:
    """Gaussian weights with per-unit std 1/sqrt(fan-in of the target node)."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    std = 1.0 / np.sqrt(g.fan_in[g.edge_dst])
    return rng.standard_normal(g.n_edges) * std


def init_unbalanced(g: NetworkGraph, seed: int, k: int | None = None,
                    unbalance_seed: int | None = None,
                    scale_factor: float = 10.0,
                    lognormal_sigma: float = 1.0) -> np.ndarray:
    """Balanced draw followed by k random unit rescalings.

    k defaults to half the hidden-unit count.  The result is rescaling
    equivalent to init_balanced(g, seed) by construction.
    """
    w = init_balanced(g, seed)
    if k is None:
        k = len(g.hidden_nodes) // 2
    if unbalance_seed is None:
        # Distinct stream from the weight draw, still a pure function of seed.
        unbalance_seed = int(np.random.SeedSequence([seed, 1]).generate_state(1)[0])
    return unbalance(g, w, k, unbalance_seed,
                     scale_factor=scale_factor, lognormal_sigma=lognormal_sigma)


def draw_dropout_mask(g: NetworkGraph, retain_prob: float, seed: int,
                      step: int) -> DropoutMask:
    """Bernoulli(retain_prob) mask over hidden units for one update step.

    Uses a counter-based generator keyed by (seed, step) so any shard can
    reproduce the mask for a given step without sharing generator state.
    """
    if not 0.0 < retain_prob <= 1.0:
        raise ConfigError(f"retain_prob must be in (0, 1], got {retain_prob}")
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, 0], dtype=np.uint64)
    counter = np.array([0, 0, 0, step], dtype=np.uint64)
    rng = np.random.Generator(np.random.Philox(counter=counter, key=key))
    u = rng.random(len(g.hidden_nodes))
    return DropoutMask(retained=u < retain_prob, retain_prob=retain_prob)
