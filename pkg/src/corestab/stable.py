"""Core-stable embedding training.

Train a base embedding objective plus a penalty that pins the first-order
proximities among degenerate-core nodes to those of the core embedded in
isolation.  Missing core pairs are materialized as zero-weight edges so the
penalty gradient flows through ordinary edge sampling; a drawn edge applies
the base update only when its weight is positive and the penalty update only
when both endpoints sit in the degenerate core.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from ._util import derive_seed
from .embed import (LAPLACIAN_EIGENMAPS, LINE1, AliasTable, EmbedSpec,
                    embed_graph, line_base_loss, line_negative_gradient,
                    line_positive_gradient)
from .graph import Graph, core_decomposition

log = logging.getLogger(__name__)

_DOT_CLIP = 35.0
_CHUNK = 4096


class TrainingDivergence(RuntimeError):
    """A loss or the embedding matrix went non-finite."""

    def __init__(self, batch, message):
        super().__init__(f"diverged at batch {batch}: {message}")
        self.batch = batch


@dataclass
class StableConfig:
    """Hyperparameters for a stabilized training run.

    ``alpha`` scales the stability penalty; ``gamma`` and ``beta`` balance
    the spectral base's edge-attraction and anchor terms and are ignored by
    the SGD base.  Gradient expressions drop constant factors of 2, which
    are absorbed into ``lr`` and ``alpha``.
    """
    base: str
    dim: int = 10
    alpha: float = 10.0
    gamma: float = 0.1
    beta: float = 0.1
    lr: float = 0.025
    batches: int = 200
    negatives: int = 5
    seed: int = 0

    # paper-reported operating points per base algorithm
    DEFAULT_ALPHA = {LINE1: 10.0, LAPLACIAN_EIGENMAPS: 1e5}

    def __post_init__(self):
        if self.base not in (LINE1, LAPLACIAN_EIGENMAPS):
            raise ValueError(f"unknown base {self.base!r}")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.batches < 1:
            raise ValueError("batches must be >= 1")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.base == LAPLACIAN_EIGENMAPS:
            if self.gamma <= 0:
                raise ValueError("gamma must be positive for the spectral base")
            if self.beta < 0:
                raise ValueError("beta must be >= 0")

    @classmethod
    def for_base(cls, base, **overrides):
        overrides.setdefault("alpha", cls.DEFAULT_ALPHA.get(base, 10.0))
        return cls(base=base, **overrides)

    def to_dict(self):
        return {
            "base": self.base, "dim": self.dim, "alpha": self.alpha,
            "gamma": self.gamma, "beta": self.beta, "lr": self.lr,
            "batches": self.batches, "negatives": self.negatives,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        base = d.pop("base", None)
        if base is None:
            raise ValueError("config is missing 'base'")
        known = ("dim", "alpha", "gamma", "beta", "lr", "batches",
                 "negatives", "seed")
        extra = set(d) - set(known)
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        return cls.for_base(base, **d)


@dataclass
class StableResult:
    embeddings: np.ndarray        # trained matrix, one row per node
    isolated_core: np.ndarray     # reference embedding of the core alone
    core_nodes: np.ndarray        # dense ids of the degenerate core
    base_loss: np.ndarray         # per-batch base objective
    stability_loss: np.ndarray    # per-batch penalty value
    initial: np.ndarray           # embedding before stabilized training
    config: StableConfig


def _clipped_sigmoid_rows(a, b):
    # overflow to inf is fine: the clip lands it on the saturation bound
    with np.errstate(over="ignore"):
        dots = np.einsum("...d,...d->...", a, b)
    return expit(np.clip(dots, -_DOT_CLIP, _DOT_CLIP))


def isolated_core_embedding(g, cm, spec):
    """Embed the induced subgraph on the degenerate core with the base engine.

    Rows follow core-local ids; the mapping back is ``cm.degenerate_core``
    (sorted dense ids).
    """
    core = cm.degenerate_core
    if len(core) < 2:
        raise ValueError("degenerate core has fewer than 2 nodes")
    return embed_graph(g.induced_subgraph(core), spec)


def stability_gradient(u_i, u_j, u_hat_i, u_hat_j):
    """Penalty gradient direction for u_i, constants dropped:
    sigma(u_i.u_j) [1 - sigma(u_i.u_j)] [sigma(u_i.u_j) - sigma(u_hat_i.u_hat_j)] u_j
    """
    u_i = np.asarray(u_i, dtype=np.float64)
    u_j = np.asarray(u_j, dtype=np.float64)
    u_hat_i = np.asarray(u_hat_i, dtype=np.float64)
    u_hat_j = np.asarray(u_hat_j, dtype=np.float64)
    if not (u_i.shape == u_j.shape == u_hat_i.shape == u_hat_j.shape):
        raise ValueError("dimension mismatch")
    s = _clipped_sigmoid_rows(u_i, u_j)
    s_hat = _clipped_sigmoid_rows(u_hat_i, u_hat_j)
    return (s * (1.0 - s) * (s - s_hat))[..., None] * u_j


def le_base_gradient(u_i, u_j, u_i0, w_ij, gamma, beta):
    """Spectral-base gradient for u_i, constants dropped:
    gamma w (u_i - u_j) + beta (u_i - u_i0), where u_i0 is the row's
    spectral initialization (the anchor replacing the orthogonality
    constraint of the eigenproblem).
    """
    u_i = np.asarray(u_i, dtype=np.float64)
    u_j = np.asarray(u_j, dtype=np.float64)
    u_i0 = np.asarray(u_i0, dtype=np.float64)
    if not (u_i.shape == u_j.shape == u_i0.shape):
        raise ValueError("dimension mismatch")
    w = np.asarray(w_ij, dtype=np.float64)
    return gamma * w[..., None] * (u_i - u_j) + beta * (u_i - u_i0)


def degenerate_clique_augment(g, core):
    """Add every missing core pair as a zero-weight edge.

    The zero weight is the flag: the trainer's positive-weight guard keeps
    the base update off these edges, so drawing one applies only the
    stability update.
    """
    core = np.asarray(sorted(int(v) for v in np.asarray(core).ravel()),
                      dtype=np.int64)
    if len(core) < 2:
        raise ValueError("need at least 2 core nodes")
    ii, jj = np.triu_indices(len(core), 1)
    pair_codes = core[ii] * g.n + core[jj]
    edge_codes = g.edges[:, 0] * g.n + g.edges[:, 1]
    missing = ~np.isin(pair_codes, edge_codes)
    if not missing.any():
        return Graph(g.n, g.edges, g.weights, g.orig_ids)
    added = np.column_stack([core[ii[missing]], core[jj[missing]]])
    edges = np.vstack([g.edges, added])
    weights = np.concatenate([g.weights, np.zeros(len(added))])
    return Graph(g.n, edges, weights, g.orig_ids)


def proximity_gaps_squared(core_emb, core_ref, block=512):
    """Squared first-order proximity gaps for all unordered core pairs.

    Returns the per-pair values in upper-triangular row order; their sum is
    the stability penalty.
    """
    core_emb = np.asarray(core_emb, dtype=np.float64)
    core_ref = np.asarray(core_ref, dtype=np.float64)
    if core_emb.shape[0] != core_ref.shape[0]:
        raise ValueError("core embedding and reference row counts differ")
    k = core_emb.shape[0]
    out = np.empty(k * (k - 1) // 2)
    pos = 0
    for lo in range(0, k, block):
        hi = min(k, lo + block)
        with np.errstate(over="ignore"):
            dots = core_emb[lo:hi] @ core_emb.T
            dots_ref = core_ref[lo:hi] @ core_ref.T
        p = expit(np.clip(dots, -_DOT_CLIP, _DOT_CLIP))
        p_ref = expit(np.clip(dots_ref, -_DOT_CLIP, _DOT_CLIP))
        gaps = (p - p_ref) ** 2
        for r in range(lo, hi):
            seg = gaps[r - lo, r + 1:]
            out[pos:pos + seg.size] = seg
            pos += seg.size
    return out


def instability_penalty(emb, isolated_core, core):
    """Sum of squared proximity gaps over all unordered core pairs."""
    core = np.asarray(core, dtype=np.int64)
    if isolated_core.shape[0] != len(core):
        raise ValueError("isolated-core rows do not match the core mapping")
    if len(core) and (core.min() < 0 or core.max() >= emb.shape[0]):
        raise ValueError("core ids outside embedding rows")
    return float(proximity_gaps_squared(emb[core], isolated_core).sum())


def _le_base_loss(g, emb, init, gamma, beta):
    # overflow to inf is acceptable: it trips the divergence guard
    with np.errstate(over="ignore"):
        diffs = emb[g.edges[:, 0]] - emb[g.edges[:, 1]]
        edge_term = float((g.weights * np.einsum("ed,ed->e", diffs, diffs)).sum())
        return gamma * edge_term + beta * float(((emb - init) ** 2).sum())


def stable_train(g, cfg, batches=None):
    """Stabilized SGD over the clique-augmented graph.

    Follows the generic recipe: embed the isolated core and the full graph
    with the base engine, augment with zero-weight core pairs, then run
    ``cfg.batches`` sampling passes where drawn positive-weight edges take a
    base gradient step and drawn core pairs take a stability step scaled by
    ``lr * alpha``.  The learning rate decays linearly to zero.  ``batches``
    may supply precomputed per-batch edge-index arrays (reproducibility
    experiments); by default each batch draws uniformly over the augmented
    edge list.
    """
    if cfg.alpha == 0:
        log.warning("alpha=0: the stability penalty is disabled")
    cm = core_decomposition(g)
    core = cm.degenerate_core
    if len(core) < 2:
        raise ValueError("degenerate core has fewer than 2 nodes")
    # the isolated-core reference is the training target: embed it fully;
    # the full-graph embedding only initializes, so the SGD base gets a
    # short schedule and keeps improving during the stabilized pass
    ref_spec = EmbedSpec(cfg.base, cfg.dim, batches=cfg.batches,
                         negatives=cfg.negatives, lr=cfg.lr)
    init_spec = EmbedSpec(cfg.base, cfg.dim,
                          batches=max(1, cfg.batches // 5),
                          negatives=cfg.negatives, lr=cfg.lr)
    ref = isolated_core_embedding(
        g, cm, ref_spec.with_seed(derive_seed(cfg.seed, "isolated-core")))
    emb = np.array(embed_graph(
        g, init_spec.with_seed(derive_seed(cfg.seed, "full-init"))))
    init = emb.copy()

    aug = degenerate_clique_augment(g, core)
    edges, weights = aug.edges, aug.weights
    m_aug = aug.m
    n, dim = g.n, cfg.dim

    in_core = np.zeros(n, dtype=bool)
    in_core[core] = True
    core_pos = np.full(n, -1, dtype=np.int64)
    core_pos[core] = np.arange(len(core))
    core_edge = in_core[edges[:, 0]] & in_core[edges[:, 1]]
    # reference proximities are fixed; precompute them per augmented edge
    ref_prox = np.zeros(m_aug)
    ref_prox[core_edge] = _clipped_sigmoid_rows(
        ref[core_pos[edges[core_edge, 0]]], ref[core_pos[edges[core_edge, 1]]])

    is_line = cfg.base == LINE1
    noise = AliasTable(np.power(g.weighted_degrees, 0.75)) if is_line else None
    rng_edges = np.random.default_rng(derive_seed(cfg.seed, "edge-stream"))
    rng_negs = np.random.default_rng(derive_seed(cfg.seed, "noise-stream"))

    base_loss = np.empty(cfg.batches)
    stab_loss = np.empty(cfg.batches)
    for t in range(cfg.batches):
        lr_t = cfg.lr * (1.0 - t / cfg.batches)
        if batches is not None:
            idx = np.asarray(batches[t], dtype=np.int64)
        else:
            idx = rng_edges.integers(0, m_aug, size=m_aug)
        real = weights[idx] > 0
        # draw all per-batch randomness up front so the noise stream depends
        # only on the sequence of positive-weight draws, not on chunking
        if is_line:
            n_real = int(real.sum())
            flip = rng_negs.random(n_real) < 0.5
            negs = noise.draw(rng_negs, (n_real, cfg.negatives))
        real_cursor = 0
        for lo in range(0, len(idx), _CHUNK):
            chunk = idx[lo:lo + _CHUNK]
            i0, j0 = edges[chunk, 0], edges[chunk, 1]
            real_c = real[lo:lo + _CHUNK]
            if real_c.any():
                i_r, j_r = i0[real_c], j0[real_c]
                if is_line:
                    take = slice(real_cursor, real_cursor + i_r.size)
                    real_cursor += i_r.size
                    fl = flip[take]
                    neg_c = negs[take]
                    src = np.where(fl, j_r, i_r)
                    ctx = np.where(fl, i_r, j_r)
                    mask = (neg_c != src[:, None]) & (neg_c != ctx[:, None])
                    u_i, u_j, u_n = emb[src], emb[ctx], emb[neg_c]
                    g_i_pos, g_j = line_positive_gradient(u_i, u_j)
                    g_i_neg, g_negs = line_negative_gradient(u_i, u_n, mask)
                    np.add.at(emb, src, -lr_t * (g_i_pos + g_i_neg))
                    np.add.at(emb, ctx, -lr_t * g_j)
                    np.add.at(emb, neg_c.reshape(-1),
                              -lr_t * g_negs.reshape(-1, dim))
                else:
                    w_r = weights[chunk][real_c]
                    u_i, u_j = emb[i_r], emb[j_r]
                    a_i, a_j = init[i_r], init[j_r]
                    g_i = le_base_gradient(u_i, u_j, a_i, w_r, cfg.gamma, cfg.beta)
                    g_j = le_base_gradient(u_j, u_i, a_j, w_r, cfg.gamma, cfg.beta)
                    np.add.at(emb, i_r, -lr_t * g_i)
                    np.add.at(emb, j_r, -lr_t * g_j)
            core_c = core_edge[chunk]
            if cfg.alpha > 0 and core_c.any():
                c_i, c_j = i0[core_c], j0[core_c]
                u_i, u_j = emb[c_i], emb[c_j]
                s = _clipped_sigmoid_rows(u_i, u_j)
                coef = s * (1.0 - s) * (s - ref_prox[chunk][core_c])
                step = lr_t * cfg.alpha
                np.add.at(emb, c_i, -step * coef[:, None] * u_j)
                np.add.at(emb, c_j, -step * coef[:, None] * u_i)
        if is_line:
            base_loss[t] = line_base_loss(g, emb)
        else:
            base_loss[t] = _le_base_loss(g, emb, init, cfg.gamma, cfg.beta)
        stab_loss[t] = instability_penalty(emb, ref, core)
        if not (np.isfinite(base_loss[t]) and np.isfinite(stab_loss[t])
                and np.isfinite(emb).all()):
            raise TrainingDivergence(t, "non-finite loss or embedding")
    return StableResult(embeddings=emb, isolated_core=ref, core_nodes=core,
                        base_loss=base_loss, stability_loss=stab_loss,
                        initial=init, config=cfg)
