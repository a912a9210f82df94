"""Shave-and-re-embed stability measurement.

Peel k-shells from the periphery inward, re-embed each surviving k-core with
a fresh seeded run, and track how far the distribution of pairwise distances
among degenerate-core nodes drifts from the full-graph baseline (earth
mover's distance), plus the per-shell instability increments.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial.distance import pdist

from ._util import derive_seed, fmt_float
from .embed import EmbedSpec, embed_graph
from .graph import SubgraphFeatures, core_decomposition, subgraph_features

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ShareRecord:
    k: int
    emd: float
    delta: Optional[float]  # None on the baseline record
    features: SubgraphFeatures


@dataclass
class ShareReport:
    dataset: str
    seed: int
    metric: str
    embedder: dict
    records: list
    distributions: Optional[dict] = None  # k -> sorted distances, if kept

    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "dataset": self.dataset,
            "seed": self.seed,
            "metric": self.metric,
            "embedder": self.embedder,
            "records": [
                {"k": r.k, "emd": r.emd, "delta": r.delta, **r.features.as_dict()}
                for r in self.records
            ],
        }

    @classmethod
    def from_dict(cls, d):
        records = [
            ShareRecord(
                k=int(r["k"]), emd=float(r["emd"]),
                delta=None if r["delta"] is None else float(r["delta"]),
                features=SubgraphFeatures(
                    size=int(r["size"]),
                    edge_density=float(r["edge_density"]),
                    avg_clustering_coefficient=float(r["avg_clustering_coefficient"]),
                    transitivity=float(r["transitivity"]),
                ))
            for r in d["records"]
        ]
        return cls(dataset=d["dataset"], seed=int(d["seed"]), metric=d["metric"],
                   embedder=dict(d["embedder"]), records=records)

    def to_csv_text(self):
        lines = ["k,emd,delta,size,edge_density,avg_clustering_coefficient,transitivity"]
        for r in self.records:
            f = r.features
            lines.append(",".join([
                str(r.k), fmt_float(r.emd),
                "" if r.delta is None else fmt_float(r.delta),
                str(f.size), fmt_float(f.edge_density),
                fmt_float(f.avg_clustering_coefficient), fmt_float(f.transitivity),
            ]))
        return "\n".join(lines) + "\n"


class ShareEmbedderError(RuntimeError):
    """Embedding failed at some shell; carries the shell and the partial report."""

    def __init__(self, k, partial, cause):
        super().__init__(f"embedder failed at k={k}: {cause}")
        self.k = k
        self.partial = partial


def pairwise_distribution(emb, core, metric="euclidean"):
    """Sorted distances between all unordered pairs of core rows."""
    core = np.asarray(core, dtype=np.int64)
    if len(core) < 2:
        raise ValueError("need at least 2 core nodes")
    if core.min() < 0 or core.max() >= emb.shape[0]:
        raise ValueError("core ids outside embedding rows")
    d = pdist(np.asarray(emb, dtype=np.float64)[core], metric=metric)
    d.sort()
    return d


def emd_1d(a, b):
    """Exact 1-d earth mover's distance between two empirical distributions.

    Integrates |F_a - F_b| over the merged breakpoints of the two sorted
    samples; symmetric and nonnegative, zero iff the multisets are equal.
    """
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    if len(a) == 0 or len(b) == 0:
        raise ValueError("empty distribution")
    grid = np.sort(np.concatenate([a, b]))
    widths = np.diff(grid)
    cdf_a = np.searchsorted(a, grid[:-1], side="right") / len(a)
    cdf_b = np.searchsorted(b, grid[:-1], side="right") / len(b)
    return float(np.sum(np.abs(cdf_a - cdf_b) * widths))


def spec_embedder(spec):
    """Adapt an EmbedSpec to the generic per-shell embedder interface."""

    def run(subgraph, seed, k):
        return embed_graph(subgraph, spec.with_seed(seed))

    return run


def run_share(g, embedder, seed=0, dataset="", metric="euclidean", threads=1,
              keep_distributions=False):
    """Full shave-and-re-embed pass over every populated shell value.

    ``embedder`` is an EmbedSpec or a callable ``(subgraph, seed, k) -> matrix``
    whose rows align with the subgraph's dense ids (this is how externally
    produced embeddings are measured).  Shell values iterate over the distinct
    coreness values present, after a k=0 baseline on the full graph; when the
    degenerate core already spans the whole graph there is nothing to shave
    and the report holds the baseline record alone.  Each shell re-embeds with
    a seed derived from (seed, k), so runs are independent but reproducible.

    With ``keep_distributions`` the report also carries the raw sorted
    distance multiset per shell.
    """
    embedder_meta = {}
    if isinstance(embedder, EmbedSpec):
        embedder_meta = embedder.to_dict()
        embedder = spec_embedder(EmbedSpec.from_dict(embedder_meta))
    cm = core_decomposition(g)
    core = cm.degenerate_core
    if len(core) < 2:
        raise ValueError("degenerate core has fewer than 2 nodes")
    if len(core) == g.n:
        ks = [0]
    else:
        ks = [0] + sorted(int(k) for k in np.unique(cm.coreness) if k > 0)

    def shell_result(k):
        kept = np.flatnonzero(cm.coreness >= k)
        sub = g.induced_subgraph(kept)
        rows = np.searchsorted(kept, core)
        emb = embedder(sub, derive_seed(seed, "shell", k), k)
        if emb.shape[0] != sub.n:
            raise ValueError(f"embedder returned {emb.shape[0]} rows for "
                             f"{sub.n}-node subgraph at k={k}")
        return pairwise_distribution(emb, rows, metric), subgraph_features(sub)

    results = {}
    failure = None
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {k: pool.submit(shell_result, k) for k in ks}
        for k in ks:
            try:
                results[k] = futures[k].result()
            except Exception as exc:  # keep earlier shells for the partial report
                failure = (k, exc)
                break
    else:
        for k in ks:
            try:
                results[k] = shell_result(k)
            except Exception as exc:
                failure = (k, exc)
                break

    records = []
    baseline = None
    prev_emd = 0.0
    for k in ks:
        if k not in results:
            break
        dist, feats = results[k]
        if baseline is None:
            baseline = dist
            records.append(ShareRecord(k, 0.0, None, feats))
            continue
        emd = emd_1d(dist, baseline)
        records.append(ShareRecord(k, emd, emd - prev_emd, feats))
        prev_emd = emd
    distributions = ({k: results[k][0] for k in results}
                     if keep_distributions else None)
    report = ShareReport(dataset=dataset, seed=seed, metric=metric,
                         embedder=embedder_meta, records=records,
                         distributions=distributions)
    if failure is not None:
        raise ShareEmbedderError(failure[0], report, failure[1])
    return report


def max_instability_shell(report):
    """Shell value with the largest instability increment (ties: smallest k)."""
    if len(report.records) < 2:
        raise ValueError("report needs at least 2 records")
    best_k, best = None, -np.inf
    for r in report.records[1:]:
        if r.delta > best:
            best_k, best = r.k, r.delta
    return best_k
