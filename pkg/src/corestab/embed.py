"""Embedding engines behind one interface: spectral maps from the random-walk
normalized Laplacian, and first-order edge-sampling SGD with negative sampling.
"""

import struct
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, eigsh
from scipy.special import expit

from .graph import complete_graph

LAPLACIAN_EIGENMAPS = "laplacian_eigenmaps"
LINE1 = "line1"
ALGORITHMS = (LAPLACIAN_EIGENMAPS, LINE1)

# dense eigensolver below this size; sparse shift-invert Lanczos above
_DENSE_EIG_LIMIT = 1500
_ZERO_EIG_TOL = 1e-8
_CHUNK = 4096

EMBEDDING_MAGIC = b"CRSTEMB1"


class EigensolverError(RuntimeError):
    """Eigensolver failed to converge or returned an inconsistent spectrum."""


@dataclass
class EmbedSpec:
    """Configuration for one embedding run.

    ``batches``, ``negatives`` and ``lr`` only apply to the SGD engine; one
    batch is one sampling pass over the edge list and the learning rate
    decays linearly to zero across batches.
    """
    algorithm: str
    dim: int
    seed: int = 0
    batches: int = 50
    negatives: int = 5
    lr: float = 0.025

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.negatives < 1:
            raise ValueError("negatives must be >= 1")
        if self.batches < 1:
            raise ValueError("batches must be >= 1")

    def to_dict(self):
        return {
            "algorithm": self.algorithm,
            "dim": self.dim,
            "seed": self.seed,
            "batches": self.batches,
            "negatives": self.negatives,
            "lr": self.lr,
        }

    @classmethod
    def from_dict(cls, d):
        known = {k: d[k] for k in
                 ("algorithm", "dim", "seed", "batches", "negatives", "lr")
                 if k in d}
        extra = set(d) - set(known)
        if extra:
            raise ValueError(f"unknown embedder config keys: {sorted(extra)}")
        return cls(**known)

    def with_seed(self, seed):
        return replace(self, seed=int(seed))


def sigmoid_proximity(u, v):
    """sigma(u . v); saturates instead of overflowing for huge dot products."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    return float(expit(u @ v))


def rw_normalized_laplacian(g):
    """Dense random-walk normalized Laplacian D^-1 (D - A); rows sum to 0.

    Degrees are weighted.  Intended for analysis and verification on small
    graphs; the spectral embedder uses sparse matrices internally.
    """
    wdeg = g.weighted_degrees
    if g.n and (wdeg <= 0).any():
        raise ValueError("graph has isolated (zero-degree) nodes")
    a = np.zeros((g.n, g.n))
    if g.m:
        a[g.edges[:, 0], g.edges[:, 1]] = g.weights
        a[g.edges[:, 1], g.edges[:, 0]] = g.weights
    lap = np.eye(g.n) - a / wdeg[:, None] if g.n else np.zeros((0, 0))
    return lap


def _sign_canonical(vecs):
    # flip each column so its largest-magnitude entry is positive
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def laplacian_eigenmaps(g, dim, seed=0, return_eigenvalues=False):
    """Spectral embedding from the random-walk normalized Laplacian.

    Solves the generalized problem (D - A) x = lambda D x (same eigenpairs
    as D^-1 L), sorts eigenvalues ascending, skips one zero eigenvalue per
    connected component (each must be below 1e-8), and returns eigenvectors
    for the next ``dim`` eigenvalues.  Deterministic for a fixed seed: the
    Lanczos start vector is seeded and column signs are canonicalized.
    """
    n = g.n
    wdeg = g.weighted_degrees
    if n == 0:
        raise ValueError("cannot embed the empty graph")
    if (wdeg <= 0).any():
        raise ValueError("graph has isolated (zero-degree) nodes")
    comps = g.component_count()
    usable = n - comps
    if dim < 1 or dim > usable:
        raise ValueError(
            f"dim={dim} not in [1, {usable}] (n={n} minus {comps} component(s))")
    k = dim + comps
    rows = np.concatenate([g.edges[:, 0], g.edges[:, 1]])
    cols = np.concatenate([g.edges[:, 1], g.edges[:, 0]])
    vals = np.concatenate([g.weights, g.weights])
    adj = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    lap = sp.diags(wdeg) - adj
    if n <= _DENSE_EIG_LIMIT or k >= n - 1:
        vals, vecs = scipy.linalg.eigh(lap.toarray(), np.diag(wdeg))
        vals, vecs = vals[:k], vecs[:, :k]
    else:
        rng = np.random.default_rng(seed)
        v0 = rng.standard_normal(n)
        try:
            vals, vecs = eigsh(lap.tocsc(), k=k, M=sp.diags(wdeg).tocsc(),
                               sigma=-0.1, which="LM", v0=v0)
        except ArpackNoConvergence as exc:
            raise EigensolverError(
                f"Lanczos did not converge for k={k} on n={n} graph") from exc
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
    if np.max(np.abs(vals[:comps])) > _ZERO_EIG_TOL:
        raise EigensolverError(
            "expected one ~0 eigenvalue per component, got "
            f"{vals[:comps]!r} for {comps} component(s)")
    emb = _sign_canonical(np.ascontiguousarray(vecs[:, comps:k]))
    if return_eigenvalues:
        return emb, vals[comps:k].copy()
    return emb


def clique_rw_spectrum(n):
    """Eigenvalues of the clique's random-walk Laplacian with multiplicities.

    A clique of n nodes has exactly two: 0 (multiplicity 1) and 1 + 1/(n-1)
    (multiplicity n-1), which is why spectral embeddings of near-complete
    cores are an arbitrary basis choice.
    """
    if n < 2:
        raise ValueError("clique spectrum needs n >= 2")
    return [(0.0, 1), (1.0 + 1.0 / (n - 1), n - 1)]


def cluster_eigenvalues(vals, tol=1e-6):
    """Group sorted eigenvalues into (value, multiplicity) pairs within tol."""
    vals = np.sort(np.asarray(vals, dtype=np.float64))
    out = []
    start = 0
    for i in range(1, len(vals) + 1):
        if i == len(vals) or vals[i] - vals[start] > tol:
            out.append((float(vals[start:i].mean()), i - start))
            start = i
    return out


def clique_spectrum_numeric(n, cluster_tol=1e-6):
    """Directly diagonalize the clique Laplacian (symmetric for cliques)."""
    lap = rw_normalized_laplacian(complete_graph(n))
    return cluster_eigenvalues(np.linalg.eigvalsh(lap), cluster_tol)


def clique_spectrum_shift_oracle(n, cluster_tol=1e-6):
    """Independent spectrum via the all-ones decomposition.

    The clique Laplacian is an affine map of the all-ones matrix:
    scale its numerically computed eigenvalues by -1/(n-1) and shift by
    1 + 1/(n-1).  Serves as the oracle path for the direct diagonalization.
    """
    ones_eigs = np.linalg.eigvalsh(np.ones((n, n)))
    mapped = (-1.0 / (n - 1)) * ones_eigs + (1.0 + 1.0 / (n - 1))
    return cluster_eigenvalues(mapped, cluster_tol)


class AliasTable:
    """O(1) draws from a fixed discrete distribution (alias method)."""

    def __init__(self, weights):
        w = np.asarray(weights, dtype=np.float64)
        if len(w) == 0 or (w < 0).any() or w.sum() <= 0:
            raise ValueError("alias table needs nonnegative weights with positive sum")
        k = len(w)
        prob = w * (k / w.sum())
        alias = np.zeros(k, dtype=np.int64)
        small = [i for i in range(k) if prob[i] < 1.0]
        large = [i for i in range(k) if prob[i] >= 1.0]
        while small and large:
            s, l = small.pop(), large.pop()
            alias[s] = l
            prob[l] = prob[l] - (1.0 - prob[s])
            (small if prob[l] < 1.0 else large).append(l)
        for i in small + large:
            prob[i] = 1.0
        self.prob = prob
        self.alias = alias

    def draw(self, rng, size):
        k = rng.integers(0, len(self.prob), size=size)
        accept = rng.random(size) < self.prob[k]
        return np.where(accept, k, self.alias[k])


def line_positive_gradient(u_i, u_j):
    """Gradients of -log sigma(u_i . u_j) w.r.t. u_i and u_j (row batches)."""
    s = expit(np.einsum("...d,...d->...", u_i, u_j))
    c = s - 1.0
    return c[..., None] * u_j, c[..., None] * u_i


def line_negative_gradient(u_i, u_negs, mask=None):
    """Gradients of -sum_k log sigma(-u_i . u_k) w.r.t. u_i and each u_k.

    ``mask`` (same leading shape as the negative axis) zeroes out draws that
    collided with an endpoint of the positive edge, which would otherwise
    repel the very pair being attracted.
    """
    s = expit(np.einsum("...d,...kd->...k", u_i, u_negs))
    if mask is not None:
        s = s * mask
    g_i = np.einsum("...k,...kd->...d", s, u_negs)
    g_negs = s[..., None] * u_i[..., None, :]
    return g_i, g_negs


def line_gradients(u_i, u_j, negatives):
    """Per-edge gradient triple (du_i, du_j, du_negs) of the sampled objective.

    The objective for one drawn edge is
    -log sigma(u_i . u_j) - sum_k log sigma(-u_i . u_k).
    """
    u_i = np.asarray(u_i, dtype=np.float64)
    u_j = np.asarray(u_j, dtype=np.float64)
    negs = np.atleast_2d(np.asarray(negatives, dtype=np.float64))
    if u_i.shape != u_j.shape or negs.shape[-1] != u_i.shape[-1]:
        raise ValueError("dimension mismatch")
    g_i_pos, g_j = line_positive_gradient(u_i, u_j)
    g_i_neg, g_negs = line_negative_gradient(u_i, negs)
    return g_i_pos + g_i_neg, g_j, g_negs


def line1_embed(g, spec):
    """First-order proximity embedding by edge-sampling SGD.

    Edges are drawn proportionally to weight (alias method); per positive
    edge, ``spec.negatives`` noise nodes are drawn from the weighted-degree
    distribution raised to 3/4.  Rows start uniform in [-0.5/dim, 0.5/dim].
    Isolated nodes are never sampled and keep their initialization.
    """
    if spec.algorithm != LINE1:
        raise ValueError(f"spec.algorithm is {spec.algorithm!r}, expected {LINE1!r}")
    if g.m == 0:
        raise ValueError("cannot train on a graph with zero edges")
    rng = np.random.default_rng(spec.seed)
    n, dim = g.n, spec.dim
    emb = (rng.random((n, dim)) - 0.5) / dim
    edge_sampler = AliasTable(g.weights)
    noise = AliasTable(np.power(g.weighted_degrees, 0.75))
    m = g.m
    for t in range(spec.batches):
        lr_t = spec.lr * (1.0 - t / spec.batches)
        eidx = edge_sampler.draw(rng, m)
        flip = rng.random(m) < 0.5
        negs = noise.draw(rng, (m, spec.negatives))
        src = np.where(flip, g.edges[eidx, 1], g.edges[eidx, 0])
        ctx = np.where(flip, g.edges[eidx, 0], g.edges[eidx, 1])
        for lo in range(0, m, _CHUNK):
            sl = slice(lo, min(lo + _CHUNK, m))
            i_c, j_c, neg_c = src[sl], ctx[sl], negs[sl]
            mask = (neg_c != i_c[:, None]) & (neg_c != j_c[:, None])
            u_i, u_j, u_n = emb[i_c], emb[j_c], emb[neg_c]
            g_i_pos, g_j = line_positive_gradient(u_i, u_j)
            g_i_neg, g_negs = line_negative_gradient(u_i, u_n, mask)
            np.add.at(emb, i_c, -lr_t * (g_i_pos + g_i_neg))
            np.add.at(emb, j_c, -lr_t * g_j)
            np.add.at(emb, neg_c.reshape(-1), -lr_t * g_negs.reshape(-1, dim))
    return emb


def line_base_loss(g, emb):
    """Full first-order objective: -sum over edges of w * log sigma(u_i . u_j)."""
    if g.m == 0:
        return 0.0
    dots = np.einsum("ed,ed->e", emb[g.edges[:, 0]], emb[g.edges[:, 1]])
    logp = np.log(np.maximum(expit(dots), 1e-300))
    return float(-(g.weights * logp).sum())


def embed_graph(g, spec):
    """Run the engine selected by ``spec.algorithm``."""
    if spec.algorithm == LAPLACIAN_EIGENMAPS:
        return laplacian_eigenmaps(g, spec.dim, seed=spec.seed)
    return line1_embed(g, spec)


def save_embedding_csv(path, emb, orig_ids):
    from ._util import fmt_float, write_text_atomic
    emb = np.asarray(emb, dtype=np.float64)
    lines = ["node_id," + ",".join(f"e{k}" for k in range(emb.shape[1]))]
    for oid, row in zip(orig_ids, emb):
        lines.append(str(int(oid)) + "," + ",".join(fmt_float(x) for x in row))
    write_text_atomic(path, "\n".join(lines) + "\n")


def load_embedding_csv(path):
    ids = []
    rows = []
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if not header or header[0] != "node_id":
            raise ValueError(f"{path}: missing node_id header")
        dim = len(header) - 1
        for ln, line in enumerate(fh, start=2):
            s = line.strip()
            if not s:
                continue
            parts = s.split(",")
            if len(parts) != dim + 1:
                raise ValueError(f"{path}:{ln}: expected {dim + 1} columns")
            ids.append(int(parts[0]))
            rows.append([float(x) for x in parts[1:]])
    return np.array(ids, dtype=np.int64), np.array(rows, dtype=np.float64)


def save_embedding_binary(path, emb):
    from ._util import write_bytes_atomic
    emb = np.ascontiguousarray(emb, dtype=np.float64)
    header = EMBEDDING_MAGIC + struct.pack("<QQ", emb.shape[0], emb.shape[1])
    write_bytes_atomic(path, header + emb.tobytes(order="C"))


def load_embedding_binary(path):
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != EMBEDDING_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        n, dim = struct.unpack("<QQ", fh.read(16))
        data = np.frombuffer(fh.read(), dtype=np.float64)
    if data.size != n * dim:
        raise ValueError(f"{path}: truncated payload")
    return data.reshape(n, dim).copy()
