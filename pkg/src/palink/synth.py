"""Synthetic planted-partition datasets with controllable subgroup degree
disparity, written in the package's on-disk formats.

Groups are contiguous index blocks.  Within each group a chosen fraction
of nodes forms subgroup "a" and receives extra intra-group edges, planting
the degree gap the fairness machinery is meant to detect.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SynthConfig:
    sizes: tuple[int, ...] = (200, 200, 200)
    p_in: float = 0.15
    p_out: float = 0.005
    t1_fraction: float | tuple[float, ...] = 0.3
    disparity_boost: float | tuple[float, ...] = 0.0
    feature_dim: int = 16
    feature_separation: float = 1.0
    feature_noise: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not self.sizes or any(s < 2 for s in self.sizes):
            raise ValueError("every group size must be >= 2")
        if not 0.0 <= self.p_out <= self.p_in <= 1.0:
            raise ValueError("need 0 <= p_out <= p_in <= 1")
        for f in self._fractions():
            if not 0.0 < f < 1.0:
                raise ValueError("subgroup fractions must lie in (0, 1)")
        for b in self._boosts():
            if b < 0:
                raise ValueError("disparity boost must be >= 0")
        if self.feature_dim < 1:
            raise ValueError("feature_dim must be >= 1")

    def _per_group(self, value) -> tuple[float, ...]:
        if np.isscalar(value):
            return tuple(float(value) for _ in self.sizes)
        value = tuple(float(v) for v in value)
        if len(value) != len(self.sizes):
            raise ValueError("per-group value length must match sizes")
        return value

    def _fractions(self) -> tuple[float, ...]:
        return self._per_group(self.t1_fraction)

    def _boosts(self) -> tuple[float, ...]:
        return self._per_group(self.disparity_boost)

    @property
    def n(self) -> int:
        return int(sum(self.sizes))

    def to_dict(self) -> dict:
        return {
            "sizes": list(self.sizes),
            "p_in": self.p_in,
            "p_out": self.p_out,
            "t1_fraction": list(self._fractions()),
            "disparity_boost": list(self._boosts()),
            "feature_dim": self.feature_dim,
            "feature_separation": self.feature_separation,
            "feature_noise": self.feature_noise,
            "seed": self.seed,
        }


def synth_generate(config: SynthConfig, out_dir: str) -> dict[str, str]:
    """Generate a dataset and write edges.txt, features.csv, labels.tsv,
    and meta.json into ``out_dir``.  Same config, same bytes.

    Returns the mapping of file roles to paths.
    """
    rng = np.random.default_rng(config.seed)
    n = config.n
    sizes = np.array(config.sizes, dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    group_of = np.repeat(np.arange(sizes.size), sizes)

    # Planted-partition edges: one Bernoulli draw per unordered pair.
    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(group_of[iu] == group_of[ju], config.p_in, config.p_out)
    hit = rng.random(iu.size) < prob
    edge_list = [np.stack([iu[hit], ju[hit]], axis=1)]

    # Subgroup assignment: per group, round(fraction * size) nodes (at
    # least one) join subgroup "a".
    t_is_a = np.zeros(n, dtype=bool)
    fractions = config._fractions()
    boosts = config._boosts()
    for g, size in enumerate(sizes):
        nodes = np.arange(offsets[g], offsets[g + 1])
        k = max(1, int(round(fractions[g] * size)))
        k = min(k, size - 1)  # keep both subgroups non-empty
        chosen = rng.choice(nodes, size=k, replace=False)
        t_is_a[chosen] = True
        # Degree disparity: extra intra-group partners for each "a" node.
        extra = int(round(boosts[g]))
        if extra > 0:
            for node in np.sort(chosen):
                others = nodes[nodes != node]
                partners = rng.choice(others, size=min(extra, others.size),
                                      replace=False)
                lo = np.minimum(node, partners)
                hi = np.maximum(node, partners)
                edge_list.append(np.stack([lo, hi], axis=1))

    edges = np.concatenate(edge_list, axis=0)
    keys = edges[:, 0] * n + edges[:, 1]
    _, first = np.unique(keys, return_index=True)
    edges = edges[np.sort(first)]
    order = np.lexsort((edges[:, 1], edges[:, 0]))
    edges = edges[order]

    # Gaussian features with group-dependent means.
    means = np.zeros((sizes.size, config.feature_dim))
    for g in range(sizes.size):
        means[g, g % config.feature_dim] = config.feature_separation
    features = rng.normal(loc=means[group_of], scale=config.feature_noise,
                          size=(n, config.feature_dim))

    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "edges": os.path.join(out_dir, "edges.txt"),
        "features": os.path.join(out_dir, "features.csv"),
        "labels": os.path.join(out_dir, "labels.tsv"),
        "meta": os.path.join(out_dir, "meta.json"),
    }
    with open(paths["edges"], "w") as fh:
        fh.write("# u v\n")
        for u, v in edges:
            fh.write(f"{u} {v}\n")
    np.savetxt(paths["features"], features, delimiter=",", fmt="%.10g")
    with open(paths["labels"], "w") as fh:
        for i in range(n):
            fh.write(f"{i}\tg{group_of[i]}\t{'a' if t_is_a[i] else 'b'}\n")
    with open(paths["meta"], "w") as fh:
        json.dump({"config": config.to_dict(), "n": n,
                   "m": int(edges.shape[0])}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return paths
