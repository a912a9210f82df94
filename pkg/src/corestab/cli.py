"""Command-line driver for reproducible experiments.

Every command takes a single --seed, derives sub-seeds for its internal
streams, writes its primary outputs atomically, and drops a manifest
(config echo, input hashes, wall time) into the output directory.  Primary
outputs are byte-identical across reruns with the same inputs and seed.

Exit codes: 0 success, 2 input/parse error, 3 numerical failure, 4 partial
result.
"""

import argparse
import json
import logging
import os
import sys
import time

import numpy as np

from . import __version__
from ._util import (fmt_float, json_dumps_stable, sha256_file,
                    write_text_atomic)
from .embed import (EigensolverError, EmbedSpec, load_embedding_csv,
                    save_embedding_binary, save_embedding_csv)
from .evaluation import evaluate, make_split, stability_error_distribution
from .graph import (GraphParseError, core_completeness, core_decomposition,
                    k_core_subgraph, load_edge_list, subgraph_features)
from .regress import collect_samples, ols_fit
from .share import ShareEmbedderError, ShareReport, run_share
from .stable import StableConfig, TrainingDivergence, stable_train
from .synth import GenSpec, generate

log = logging.getLogger("corestab")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3
EXIT_PARTIAL = 4


def _threads():
    raw = os.environ.get("COREstab_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _load_json(path):
    with open(path) as fh:
        return json.load(fh)


def _write_manifest(out_dir, command, config, seed, inputs, started):
    manifest = {
        "schema_version": 1,
        "command": command,
        "config": config,
        "seed": seed,
        "input_hashes": {os.path.basename(p): sha256_file(p) for p in inputs},
        "tool_version": __version__,
        "wall_time_s": time.time() - started,
    }
    write_text_atomic(os.path.join(out_dir, "manifest.json"),
                      json_dumps_stable(manifest))


def cmd_kcore(args):
    started = time.time()
    g = load_edge_list(args.graph)
    cm = core_decomposition(g)
    os.makedirs(args.out, exist_ok=True)

    lines = ["node_id,coreness"]
    for v in range(g.n):
        lines.append(f"{int(g.orig_ids[v])},{int(cm.coreness[v])}")
    write_text_atomic(os.path.join(args.out, "coreness.csv"),
                      "\n".join(lines) + "\n")

    completeness = None
    if len(cm.degenerate_core) >= 2:
        completeness = core_completeness(g, cm)
    summary = {
        "schema_version": 1,
        "n": g.n,
        "m": g.m,
        "degeneracy": cm.k_max,
        "degenerate_core": [int(g.orig_ids[v]) for v in cm.degenerate_core],
        "core_completeness": completeness,
    }
    write_text_atomic(os.path.join(args.out, "kcore_summary.json"),
                      json_dumps_stable(summary))

    rows = ["k,size,edge_density,avg_clustering_coefficient,transitivity"]
    ks = sorted(set([0] + [int(k) for k in np.unique(cm.coreness) if k > 0]))
    for k in ks:
        f = subgraph_features(k_core_subgraph(g, cm, k))
        rows.append(",".join([str(k), str(f.size), fmt_float(f.edge_density),
                              fmt_float(f.avg_clustering_coefficient),
                              fmt_float(f.transitivity)]))
    write_text_atomic(os.path.join(args.out, "core_features.csv"),
                      "\n".join(rows) + "\n")
    _write_manifest(args.out, "kcore", {"graph": args.graph}, None,
                    [args.graph], started)
    return EXIT_OK


def _external_embedder(directory):
    def run(subgraph, seed, k):
        path = os.path.join(directory, f"embeddings_k{k}.csv")
        if not os.path.exists(path):
            raise FileNotFoundError(f"no external embedding file {path}")
        ids, emb = load_embedding_csv(path)
        lookup = {int(i): r for r, i in enumerate(ids)}
        try:
            rows = [lookup[int(o)] for o in subgraph.orig_ids]
        except KeyError as exc:
            raise ValueError(f"{path}: missing node id {exc}") from exc
        return emb[rows]

    return run


def _write_share_outputs(out_dir, report):
    write_text_atomic(os.path.join(out_dir, "share_report.json"),
                      json_dumps_stable(report.to_dict()))
    write_text_atomic(os.path.join(out_dir, "share_report.csv"),
                      report.to_csv_text())


def cmd_share(args):
    started = time.time()
    if bool(args.embedder) == bool(args.external_embeddings):
        log.error("exactly one of --embedder or --external-embeddings is required")
        return EXIT_INPUT
    g = load_edge_list(args.graph)
    inputs = [args.graph]
    dataset = os.path.basename(args.graph)
    if args.embedder:
        spec_dict = _load_json(args.embedder)
        if args.dim is not None:
            spec_dict["dim"] = args.dim
        embedder = EmbedSpec.from_dict(spec_dict)
        inputs.append(args.embedder)
    else:
        embedder = _external_embedder(args.external_embeddings)
    os.makedirs(args.out, exist_ok=True)
    dist_dir = os.path.join(args.out, "distributions")
    os.makedirs(dist_dir, exist_ok=True)

    partial = False
    try:
        report = run_share(g, embedder, seed=args.seed, dataset=dataset,
                           metric=args.metric, threads=_threads(),
                           keep_distributions=True)
    except ShareEmbedderError as exc:
        log.error("embedder failed at k=%d: %s", exc.k, exc.__cause__)
        report = exc.partial
        report_dict = report.to_dict()
        report_dict["partial"] = True
        report_dict["failed_k"] = exc.k
        write_text_atomic(os.path.join(args.out, "share_report.json"),
                          json_dumps_stable(report_dict))
        write_text_atomic(os.path.join(args.out, "share_report.csv"),
                          report.to_csv_text())
        partial = True
    else:
        _write_share_outputs(args.out, report)

    for k, dist in (report.distributions or {}).items():
        text = "distance\n" + "\n".join(fmt_float(x) for x in dist) + "\n"
        write_text_atomic(os.path.join(dist_dir, f"k{k}.csv"), text)

    config = {"graph": args.graph,
              "embedder": embedder.to_dict() if isinstance(embedder, EmbedSpec)
              else {"external": args.external_embeddings}}
    _write_manifest(args.out, "share", config, args.seed, inputs, started)
    return EXIT_PARTIAL if partial else EXIT_OK


def cmd_stable(args):
    started = time.time()
    g = load_edge_list(args.graph)
    cfg_dict = _load_json(args.config)
    cfg_dict.setdefault("seed", args.seed)
    cfg = StableConfig.from_dict(cfg_dict)
    os.makedirs(args.out, exist_ok=True)
    try:
        result = stable_train(g, cfg)
    except TrainingDivergence as exc:
        log.error("%s", exc)
        return EXIT_NUMERIC
    except EigensolverError as exc:
        log.error("%s", exc)
        return EXIT_NUMERIC

    save_embedding_csv(os.path.join(args.out, "embeddings.csv"),
                       result.embeddings, g.orig_ids)
    save_embedding_binary(os.path.join(args.out, "embeddings.bin"),
                          result.embeddings)
    save_embedding_csv(os.path.join(args.out, "isolated_core.csv"),
                       result.isolated_core,
                       g.orig_ids[result.core_nodes])
    rows = ["batch,base_loss,stability_loss"]
    for t in range(cfg.batches):
        rows.append(f"{t},{fmt_float(result.base_loss[t])},"
                    f"{fmt_float(result.stability_loss[t])}")
    write_text_atomic(os.path.join(args.out, "loss_trace.csv"),
                      "\n".join(rows) + "\n")
    errors = stability_error_distribution(
        result.embeddings, result.isolated_core, result.core_nodes)
    write_text_atomic(os.path.join(args.out, "stability_errors.csv"),
                      "error\n" + "\n".join(fmt_float(x) for x in errors) + "\n")
    write_text_atomic(os.path.join(args.out, "config.json"),
                      json_dumps_stable(cfg.to_dict()))
    _write_manifest(args.out, "stable",
                    {"graph": args.graph, "config": cfg.to_dict()},
                    cfg.seed, [args.graph, args.config], started)
    return EXIT_OK


def cmd_linkpred(args):
    started = time.time()
    g = load_edge_list(args.graph)
    ids, emb = load_embedding_csv(args.embeddings)
    lookup = {int(i): r for r, i in enumerate(ids)}
    try:
        rows = [lookup[int(o)] for o in g.orig_ids]
    except KeyError as exc:
        log.error("embeddings are missing node id %s", exc)
        return EXIT_INPUT
    emb = emb[rows]
    split = make_split(g, args.fraction, args.seed)
    scores = evaluate(emb, split)
    os.makedirs(args.out, exist_ok=True)
    payload = {
        "schema_version": 1,
        "graph": os.path.basename(args.graph),
        "algorithm": args.algorithm,
        "variant": args.variant,
        "fraction": args.fraction,
        "seed": args.seed,
        "positives": int(len(split.positives)),
        "f1": scores.f1,
        "auc": scores.auc,
        "threshold": scores.threshold,
    }
    write_text_atomic(os.path.join(args.out, "scores.json"),
                      json_dumps_stable(payload))
    row = ",".join([os.path.basename(args.graph), args.algorithm, args.variant,
                    fmt_float(scores.f1), fmt_float(scores.auc)])
    write_text_atomic(os.path.join(args.out, "results.csv"),
                      "graph,algorithm,variant,f1,auc\n" + row + "\n")
    _write_manifest(args.out, "linkpred",
                    {"graph": args.graph, "embeddings": args.embeddings,
                     "fraction": args.fraction},
                    args.seed, [args.graph, args.embeddings], started)
    return EXIT_OK


def cmd_regress(args):
    started = time.time()
    import glob as globmod
    paths = sorted(globmod.glob(args.reports))
    if not paths:
        log.error("no report files match %r", args.reports)
        return EXIT_INPUT
    reports = []
    for p in paths:
        d = _load_json(p)
        rep = ShareReport.from_dict(d)
        if len(rep.records) < 2:
            log.warning("%s: fewer than 2 records, skipped", p)
            continue
        reports.append(rep)
    if not reports:
        log.error("no usable reports (each needs >= 2 records)")
        return EXIT_INPUT
    samples = collect_samples(reports)
    os.makedirs(args.out, exist_ok=True)

    rows = ["dataset,algorithm,dim,k,d_emd,d_size,d_edge_density,"
            "d_clustering_coefficient,d_transitivity"]
    for s in samples:
        rows.append(",".join([
            str(s.source.get("dataset", "")),
            str(s.source.get("algorithm", "")),
            str(s.source.get("dim", "")),
            str(s.source.get("k", "")),
            fmt_float(s.d_emd), fmt_float(s.d_size),
            fmt_float(s.d_edge_density), fmt_float(s.d_clustering),
            fmt_float(s.d_transitivity)]))
    write_text_atomic(os.path.join(args.out, "samples.csv"),
                      "\n".join(rows) + "\n")

    combos = {}
    for s in samples:
        key = (str(s.source.get("algorithm")), str(s.source.get("dim")))
        combos.setdefault(key, []).append(s)
    fits = []
    failures = 0
    fit_rows = ["algorithm,dim,samples,feature,coefficient,std_error,"
                "ci_lower,ci_upper,r_squared"]
    for (algo, dim), combo_samples in sorted(combos.items()):
        entry = {"algorithm": algo, "dim": dim,
                 "samples": len(combo_samples)}
        try:
            fit = ols_fit(combo_samples)
            entry["fit"] = fit.to_dict()
            from .regress import FEATURE_NAMES
            for j, feature in enumerate(FEATURE_NAMES):
                fit_rows.append(",".join([
                    algo, str(dim), str(fit.samples), feature,
                    fmt_float(fit.coefficients[j]),
                    fmt_float(fit.std_errors[j]),
                    fmt_float(fit.ci_lower[j]), fmt_float(fit.ci_upper[j]),
                    fmt_float(fit.r_squared)]))
        except ValueError as exc:
            entry["error"] = str(exc)
            failures += 1
        fits.append(entry)
    write_text_atomic(os.path.join(args.out, "fits.json"),
                      json_dumps_stable({"schema_version": 1, "fits": fits}))
    write_text_atomic(os.path.join(args.out, "fits.csv"),
                      "\n".join(fit_rows) + "\n")
    _write_manifest(args.out, "regress", {"reports": args.reports}, None,
                    paths, started)
    if failures == len(fits):
        return EXIT_NUMERIC
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_generate(args):
    started = time.time()
    spec_dict = _load_json(args.spec)
    spec_dict.setdefault("seed", args.seed)
    spec = GenSpec.from_dict(spec_dict)
    g = generate(spec)
    os.makedirs(args.out, exist_ok=True)
    lines = [f"{int(i)} {int(j)}" for i, j in g.edges]
    write_text_atomic(os.path.join(args.out, "edges.txt"),
                      "\n".join(lines) + ("\n" if lines else ""))
    provenance = {"schema_version": 1, "spec": spec.to_dict(),
                  "n": g.n, "m": g.m}
    write_text_atomic(os.path.join(args.out, "provenance.json"),
                      json_dumps_stable(provenance))
    _write_manifest(args.out, "generate", spec.to_dict(), spec.seed,
                    [args.spec], started)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="corestab",
        description="Degenerate-core embedding stability: measurement, "
                    "stabilized training, and evaluation harnesses.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("kcore", help="coreness, degeneracy, per-core features")
    p.add_argument("--graph", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_kcore)

    p = sub.add_parser("share", help="shave-and-re-embed stability report")
    p.add_argument("--graph", required=True)
    p.add_argument("--embedder", help="embedder config JSON")
    p.add_argument("--external-embeddings",
                   help="directory of embeddings_k{k}.csv files keyed by "
                   "original node id")
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--metric", default="euclidean",
                   choices=("euclidean", "cosine"),
                   help="pairwise distance used for the distributions")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_share)

    p = sub.add_parser("stable", help="train a core-stable embedding")
    p.add_argument("--graph", required=True)
    p.add_argument("--config", required=True, help="training config JSON")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_stable)

    p = sub.add_parser("linkpred", help="link-prediction scores for embeddings")
    p.add_argument("--graph", required=True)
    p.add_argument("--embeddings", required=True, help="embedding CSV")
    p.add_argument("--fraction", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--algorithm", default="unknown")
    p.add_argument("--variant", default="original",
                   choices=("original", "stable"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_linkpred)

    p = sub.add_parser("regress", help="drift-vs-feature-delta regression")
    p.add_argument("--reports", required=True,
                   help="glob of share_report.json files")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_regress)

    p = sub.add_parser("generate", help="seeded synthetic graph")
    p.add_argument("--spec", required=True, help="generator spec JSON")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (GraphParseError, FileNotFoundError, json.JSONDecodeError,
            ValueError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    except (TrainingDivergence, EigensolverError, np.linalg.LinAlgError) as exc:
        log.error("%s", exc)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
