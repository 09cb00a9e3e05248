"""Batch command-line interface: validate, synth, run, report.

All state flows through files and flags; a mandatory seed makes every run
reproducible byte for byte. Exit codes: 0 ok, 2 invalid config, 3
data/schema mismatch, 10+stage for a pipeline stage failure (stages are
ingest=0, assoc=1, graph=2, reduce/cluster=3, evaluate=4, profile=5).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from dataclasses import asdict

import numpy as np

from . import __version__
from . import assoc as _assoc
from . import evaluate as _evaluate
from . import graph as _graph
from . import ingest as _ingest
from .errors import MissingRun, SurveySegError

STAGES = ["ingest", "assoc", "graph", "cluster", "evaluate", "profile"]


# --------------------------------------------------------------------------
# config handling


DEFAULT_CONFIG = {
    "seed": 42,
    "filter": None,                      # {"column": ..., "accepted": [...]}
    "screening": {"alpha": 0.05, "rho_min": 0.50, "v_min": 0.30,
                  "t_min": 0.30, "u_min": 0.20},
    "graph": {"mode": "percentile", "q": 75.0, "strong_core": 0.30,
              "metric": "cramers_v"},
    "grid": {"preset": "paper", "k_min": 2, "k_max": 8},
    "stability": {"replicates": 100},
    "probe": {"folds": 5, "l2": 1.0},
}


def load_config(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        user = json.load(fh)
    config = json.loads(json.dumps(DEFAULT_CONFIG))
    for key, val in user.items():
        if isinstance(val, dict) and isinstance(config.get(key), dict):
            config[key].update(val)
        else:
            config[key] = val
    for required in ("input", "schema", "features", "seed", "output"):
        if required not in config or config[required] is None:
            raise SurveySegError(f"config missing required key {required!r}")
    return config


def _feature_config(config: dict, schema) -> _ingest.FeatureConfig:
    feats = config["features"]
    family_maps = {}
    for col, mapping in feats.get("family_maps", {}).items():
        genres = sorted(mapping)
        families = sorted({fam for fams in mapping.values() for fam in
                           (fams if isinstance(fams, list) else [fams])})
        mat = np.zeros((len(genres), len(families)))
        for j, g in enumerate(genres):
            fams = mapping[g] if isinstance(mapping[g], list) else [mapping[g]]
            for fam in fams:
                mat[j, families.index(fam)] = 1.0
        family_maps[col] = _ingest.GenreFamilyMap(
            matrix=mat, family_labels=families, genre_labels=genres)
    lexicon = _ingest.DEFAULT_MOOD_LEXICON
    if "lexicon" in feats:
        lx = feats["lexicon"]
        lexicon = _ingest.MoodLexicon(
            valence_positive=frozenset(lx["valence_positive"]),
            valence_neutral=frozenset(lx["valence_neutral"]),
            valence_negative=frozenset(lx["valence_negative"]),
            arousal_positive=frozenset(lx["arousal_positive"]),
            arousal_neutral=frozenset(lx["arousal_neutral"]),
            arousal_negative=frozenset(lx["arousal_negative"]),
        )
    return _ingest.FeatureConfig(
        columns=list(feats["columns"]),
        richness_for=list(feats.get("richness_for", [])),
        family_maps=family_maps,
        affect_from=list(feats.get("affect_from", [])),
        lexicon=lexicon,
        onehot_categories={k: list(v) for k, v in
                           feats.get("onehot_categories", {}).items()},
    )


def _grid_jobs(config: dict, p: int) -> list[tuple[dict, list[dict]]]:
    grid = config["grid"]
    preset = grid.get("preset", "paper")
    svd_d = min(30, p)
    if "jobs" in grid:
        return [(job["reducer"], job["clusterers"]) for job in grid["jobs"]]
    if preset == "paper":
        return [
            ({"method": "pca", "d": 2}, [{"method": "kmeans"}]),
            ({"method": "tsne", "d": 2}, [{"method": "kmeans"}]),
            ({"method": "svd", "d": svd_d}, [{"method": "ward"},
                                             {"method": "spectral"}]),
        ]
    if preset == "full":
        reducers = [{"method": "pca", "d": 2}, {"method": "tsne", "d": 2},
                    {"method": "svd", "d": svd_d}]
        clusterers = [{"method": "kmeans"}, {"method": "ward"},
                      {"method": "spectral"}, {"method": "dbscan"}]
        return [(r, clusterers) for r in reducers]
    raise SurveySegError(f"unknown grid preset {preset!r}")


# --------------------------------------------------------------------------
# helpers


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(doc, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def _json_safe(value):
    if isinstance(value, dict):
        return {str(k): _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_json_safe(v) for v in value.tolist()]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return None if not math.isfinite(v) else v
    return value


def _write_matrix_csv(names, matrix, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature"] + names)
        for name, row in zip(names, matrix):
            writer.writerow([name] + [f"{v:.10g}" for v in row])


# --------------------------------------------------------------------------
# subcommands


def cmd_synth(args) -> int:
    try:
        result = _ingest.synth_survey(args.personas, args.rows, args.seed,
                                      separation=args.separation)
    except SurveySegError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    os.makedirs(args.out, exist_ok=True)
    _ingest.save_table(result.table, os.path.join(args.out, "survey.csv"))
    _ingest.save_schema(result.schema, os.path.join(args.out, "schema.json"))
    with open(os.path.join(args.out, "personas.csv"), "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row", "persona"])
        for i, lab in enumerate(result.persona_labels):
            writer.writerow([i, lab])
    feats = _ingest.synth_feature_config()
    config = {
        "input": os.path.join(args.out, "survey.csv"),
        "schema": os.path.join(args.out, "schema.json"),
        "output": os.path.join(args.out, "run"),
        "seed": args.seed,
        "filter": {"column": "gamer", "accepted": ["yes"]},
        "features": {
            "columns": feats.columns,
            "richness_for": feats.richness_for,
            "family_maps": {"genres": {g: _ingest._SYNTH_FAMILY_OF[g]
                                       for g in _ingest._SYNTH_GENRES}},
            "affect_from": feats.affect_from,
            "onehot_categories": feats.onehot_categories,
        },
    }
    _write_json(config, os.path.join(args.out, "config.json"))
    print(f"wrote survey.csv ({result.table.n_rows} rows), schema.json, "
          f"personas.csv, config.json to {args.out}")
    return 0


def cmd_validate(args) -> int:
    try:
        config = load_config(args.config)
    except (SurveySegError, OSError, json.JSONDecodeError) as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return 2
    try:
        schema = _ingest.load_schema(config["schema"])
        table = _ingest.load_table(config["input"], schema)
        fc = _feature_config(config, schema)
        names = {c.name for c in schema}
        for col in fc.columns + fc.affect_from:
            if col not in names:
                raise SurveySegError(f"feature column {col!r} not in schema")
        if config.get("filter"):
            table.column_index(config["filter"]["column"])
    except (SurveySegError, OSError, json.JSONDecodeError) as exc:
        print(f"data/schema mismatch: {exc}", file=sys.stderr)
        return 3
    print(f"ok: {table.n_rows} rows, {table.n_cols} columns")
    return 0


def _run_pipeline(config: dict) -> dict:
    """Execute the full pipeline; returns the report dict. Artifacts are
    written into config['output']."""
    out = config["output"]
    os.makedirs(out, exist_ok=True)
    lock = os.path.join(out, "run.lock")
    fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    os.close(fd)
    try:
        return _run_pipeline_locked(config, out)
    finally:
        os.remove(lock)


def _run_pipeline_locked(config: dict, out: str) -> dict:
    seed = int(config["seed"])
    report: dict = {"config": config, "version": __version__}
    written: list[str] = []

    # stage 0: ingest
    stage = 0
    try:
        schema = _ingest.load_schema(config["schema"])
        table = _ingest.load_table(config["input"], schema)
        rows_in = table.n_rows
        if config.get("filter"):
            table = _ingest.filter_rows(table, config["filter"]["column"],
                                        config["filter"]["accepted"])
        if table.n_rows == 0:
            raise SurveySegError("no rows remain after filtering")
        fc = _feature_config(config, schema)
        fm = _ingest.assemble_features(table, fc)
        kept_table = _ingest.DataTable(columns=table.columns,
                                       rows=[table.rows[i] for i in fm.row_ids])
        report["dataset"] = {
            "rows_in": rows_in, "rows_after_filter": table.n_rows,
            "rows_dropped_missing": fm.dropped_rows,
            "rows_analyzed": len(fm.row_ids), "n_features": fm.values.shape[1],
            "feature_names": fm.feature_names,
        }
    except Exception as exc:
        raise StageFailure(stage, exc) from exc

    # stage 1: associations
    stage = 1
    try:
        sc = _assoc.ScreeningConfig(**{k: config["screening"][a] for k, a in
                                       [("alpha", "alpha"), ("rho_min", "rho_min"),
                                        ("v_min", "v_min"), ("t_min", "t_min"),
                                        ("u_min", "u_min")]})
        results, mats = _assoc.association_matrix(fm, sc)
        long_path = os.path.join(out, "associations_long.csv")
        with open(long_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["feature_a", "feature_b", "metric", "value", "verdict"])
            for res in results:
                rows = [
                    ("cramers_v", res.cramers_v_corrected, res.verdicts["cramers_v"]),
                    ("tschuprow_t", res.tschuprow_t, res.verdicts["tschuprow_t"]),
                    ("theil_u_ab", res.theil_u_ab, res.verdicts["theil_u"]),
                    ("theil_u_ba", res.theil_u_ba, res.verdicts["theil_u"]),
                    ("chi2_p_adjusted", res.p_adjusted, res.verdicts["chi2_bh"]),
                    ("neg_log10_p", res.neg_log10_p, res.verdicts["chi2_bh"]),
                ]
                if res.spearman_rho is not None:
                    rows.append(("spearman_rho", res.spearman_rho,
                                 res.verdicts["spearman_rho"]))
                for metric, value, verdict in rows:
                    writer.writerow([res.feature_a, res.feature_b, metric,
                                     f"{value:.10g}", "pass" if verdict else "fail"])
        written.append(long_path)
        for metric in ("cramers_v", "tschuprow_t", "theil_u", "spearman_rho",
                       "neg_log10_p"):
            path = os.path.join(out, f"matrix_{metric}.csv")
            _write_matrix_csv(mats["names"], mats[metric], path)
            written.append(path)
        n_screened = sum(1 for r in results if any(r.verdicts.values()))
        report["associations"] = {
            "n_pairs": len(results), "n_passing_any": n_screened,
            "n_rejected_bh": sum(1 for r in results if r.verdicts["chi2_bh"]),
        }
    except Exception as exc:
        raise StageFailure(stage, exc) from exc

    # stage 2: knowledge graph
    stage = 2
    try:
        gconf = config["graph"]
        g = _graph.build_graph(mats[gconf["metric"]], mats["names"],
                               mode=gconf["mode"], q=gconf.get("q", 75.0),
                               tau=gconf.get("tau"), metric=gconf["metric"])
        cent = _graph.centralities(g)
        partition = (_graph.detect_communities(g, seed=seed)
                     if g.edges else None)
        core = _graph.strong_core(g, gconf.get("strong_core", 0.30))
        for fmt, fname in (("graphml", "graph.graphml"), ("dot", "graph.dot")):
            path = os.path.join(out, fname)
            _graph.export_graph(g, path, fmt=fmt, partition=partition, cent=cent)
            written.append(path)
        report["graph"] = {
            "cutoff": g.metadata["cutoff"], "n_nodes": len(g.nodes),
            "n_edges": len(g.edges), "strong_core_edges": len(core.edges),
            "modularity": partition.modularity if partition else None,
            "n_communities": (len(set(partition.communities.values()))
                              if partition else 0),
            "top_betweenness": sorted(cent.betweenness,
                                      key=lambda v: (-cent.betweenness[v], v))[:5],
        }
    except Exception as exc:
        raise StageFailure(stage, exc) from exc

    # stage 3: reduce + cluster grid
    stage = 3
    try:
        jobs = _grid_jobs(config, fm.values.shape[1])
        k_range = range(config["grid"].get("k_min", 2),
                        config["grid"].get("k_max", 8) + 1)
        all_cells: list[_evaluate.GridCell] = []
        embeddings = {}
        label_store = {}
        for reducer, clusterers in jobs:
            rep, artifacts = _evaluate.grid_search(
                fm.values, [reducer], clusterers, k_range, seed=seed)
            all_cells.extend(rep.cells)
            embeddings.update(artifacts["embeddings"])
            label_store.update(artifacts["labels"])
        scored = [i for i, c in enumerate(all_cells) if c.error is None]
        ranking = sorted(scored, key=lambda i: (-all_cells[i].silhouette,
                                                all_cells[i].davies_bouldin))
        chosen = all_cells[ranking[0]]
        for rname, emb in sorted(embeddings.items()):
            path = os.path.join(out, f"embedding_{rname}.csv")
            with open(path, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(["row_id"] + [f"x{i + 1}" for i in range(emb.coords.shape[1])])
                for rid, coords in zip(fm.row_ids, emb.coords):
                    writer.writerow([rid] + [f"{v:.10g}" for v in coords])
            written.append(path)
        sel_path = os.path.join(out, "model_selection.csv")
        with open(sel_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["method", "k", "silhouette", "calinski_harabasz",
                             "davies_bouldin"])
            for cell in all_cells:
                if cell.error is not None:
                    continue
                ch = cell.calinski_harabasz
                writer.writerow([
                    f"{cell.reducer}+{cell.clusterer}", cell.k,
                    f"{cell.silhouette:.6f}",
                    "inf" if math.isinf(ch) else f"{ch:.6f}",
                    f"{cell.davies_bouldin:.6f}",
                ])
        written.append(sel_path)
        chosen_labels = label_store[(chosen.reducer, chosen.clusterer, chosen.k)]
        lab_path = os.path.join(out, "assignments.csv")
        with open(lab_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["row_id", "label"])
            for rid, lab in zip(fm.row_ids, chosen_labels):
                writer.writerow([rid, int(lab)])
        written.append(lab_path)
        report["model_selection"] = {
            "cells": [_json_safe(asdict(c)) for c in all_cells],
            "chosen": _json_safe(asdict(chosen)),
            "failures": [asdict(all_cells[i]) for i in range(len(all_cells))
                         if all_cells[i].error is not None],
        }
    except Exception as exc:
        raise StageFailure(stage, exc) from exc

    # stage 4: stability + probe
    stage = 4
    try:
        chosen_emb = embeddings[chosen.reducer].coords
        sil_mean, sil_samples, _ = _evaluate.silhouette(chosen_emb, chosen_labels)
        sil_path = os.path.join(out, "silhouette_samples.csv")
        with open(sil_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["row_id", "silhouette"])
            for rid, sv in zip(fm.row_ids, sil_samples):
                writer.writerow([rid, f"{sv:.10g}"])
        written.append(sil_path)
        boot_x = chosen_emb
        # t-SNE cannot be refit on a resample; bootstrap in that case runs on
        # the standardized feature matrix instead
        if chosen.reducer.startswith("tsne"):
            from .reduce import standardize
            boot_x = standardize(fm.values)
        cconf = _evaluate.ClustererConfig(method=chosen.clusterer, k=chosen.k)
        if chosen.clusterer == "dbscan":
            stab = None
        else:
            stab = _evaluate.bootstrap_stability(
                boot_x, cconf, chosen_labels,
                n_replicates=config["stability"]["replicates"], seed=seed)
        probe = _evaluate.logistic_probe(
            _evaluate_probe_matrix(fm), chosen_labels,
            n_folds=config["probe"]["folds"], l2=config["probe"]["l2"],
            seed=seed)
        report["stability"] = None if stab is None else {
            "ari_mean": stab.ari_mean, "ari_sd": stab.ari_sd,
            "per_cluster_jaccard": _json_safe(stab.per_cluster_jaccard),
            "n_replicates": stab.n_replicates, "n_skipped": stab.n_skipped,
        }
        report["probe"] = {
            "cv_accuracy": probe.cv_accuracy,
            "fold_accuracies": probe.fold_accuracies,
            "l2": probe.l2,
        }
    except Exception as exc:
        raise StageFailure(stage, exc) from exc

    # stage 5: persona profiles
    stage = 5
    try:
        profiles = _evaluate.profile_clusters(kept_table, chosen_labels.tolist())
        report["profiles"] = _json_safe(profiles)
    except Exception as exc:
        raise StageFailure(stage, exc) from exc

    manifest = {os.path.basename(p): _sha256(p) for p in written}
    report["manifest"] = manifest
    report_path = os.path.join(out, "report.json")
    _write_json(_json_safe(report), report_path)
    _render_markdown(report, os.path.join(out, "report.md"))
    return report


def _evaluate_probe_matrix(fm) -> np.ndarray:
    from .reduce import standardize
    return standardize(fm.values)


class StageFailure(Exception):
    def __init__(self, stage: int, cause: Exception):
        super().__init__(f"stage {STAGES[stage]}: {cause}")
        self.stage = stage
        self.cause = cause


def cmd_run(args) -> int:
    try:
        config = load_config(args.config)
    except (SurveySegError, OSError, json.JSONDecodeError) as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        config["seed"] = args.seed
    if args.out is not None:
        config["output"] = args.out
    if args.grid_preset is not None:
        config["grid"]["preset"] = args.grid_preset
    try:
        report = _run_pipeline(config)
    except StageFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 10 + exc.stage
    chosen = report["model_selection"]["chosen"]
    print(f"chosen model: {chosen['reducer']}+{chosen['clusterer']} "
          f"k={chosen['k']} silhouette={chosen['silhouette']:.4f}")
    print(f"report written to {config['output']}/report.json")
    return 0


def _render_markdown(report: dict, path) -> None:
    lines = ["# Segmentation run report", ""]
    ds = report["dataset"]
    lines += [
        "## Dataset",
        f"- rows in: {ds['rows_in']}, after filter: {ds['rows_after_filter']}, "
        f"analyzed: {ds['rows_analyzed']} (dropped missing: {ds['rows_dropped_missing']})",
        f"- encoded features: {ds['n_features']}",
        "",
        "## Associations",
        f"- pairs tested: {report['associations']['n_pairs']}, "
        f"passing any screen: {report['associations']['n_passing_any']}, "
        f"BH-significant: {report['associations']['n_rejected_bh']}",
        "",
        "## Knowledge graph",
        f"- cutoff {report['graph']['cutoff']:.4f}, {report['graph']['n_nodes']} nodes, "
        f"{report['graph']['n_edges']} edges "
        f"(strong core: {report['graph']['strong_core_edges']})",
        f"- communities: {report['graph']['n_communities']} "
        f"(modularity {report['graph']['modularity']})",
        f"- top betweenness: {', '.join(report['graph']['top_betweenness'])}",
        "",
        "## Model selection",
        "",
        "| method | k | silhouette | CH | DB |",
        "|---|---|---|---|---|",
    ]
    for cell in report["model_selection"]["cells"]:
        if cell.get("error"):
            continue
        ch = cell["calinski_harabasz"]
        ch_text = "inf" if ch is None else f"{ch:.3f}"
        lines.append(
            f"| {cell['reducer']}+{cell['clusterer']} | {cell['k']} "
            f"| {cell['silhouette']:.6f} | {ch_text} "
            f"| {cell['davies_bouldin']:.6f} |")
    chosen = report["model_selection"]["chosen"]
    lines += [
        "",
        f"**Chosen**: {chosen['reducer']}+{chosen['clusterer']} k={chosen['k']}",
        "",
    ]
    if report.get("stability"):
        st = report["stability"]
        lines += [
            "## Stability",
            f"- bootstrap ARI {st['ari_mean']:.4f} +/- {st['ari_sd']:.4f} "
            f"({st['n_replicates']} replicates, {st['n_skipped']} skipped)",
            f"- per-cluster Jaccard: "
            + ", ".join(f"{c}: {v:.3f}" for c, v in sorted(st['per_cluster_jaccard'].items())),
            "",
        ]
    lines += [
        "## Probe",
        f"- cross-validated accuracy {report['probe']['cv_accuracy']:.4f}",
        "",
        "## Segments",
        "",
    ]
    for cid, prof in sorted(report["profiles"].items(), key=lambda kv: str(kv[0])):
        lines.append(f"### Segment {cid} (n={prof['size']})")
        for col, mode in sorted(prof["modes"].items()):
            lines.append(f"- {col}: {mode['value']} ({mode['frequency']:.0%})")
        for col, med in sorted(prof["medians"].items()):
            lines.append(f"- {col} (median): {med}")
        lines.append("")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines))


def cmd_report(args) -> int:
    report_path = os.path.join(args.run_dir, "report.json")
    if not os.path.exists(report_path):
        print(f"error: no report.json in {args.run_dir}", file=sys.stderr)
        return 1
    with open(report_path, encoding="utf-8") as fh:
        report = json.load(fh)
    if args.format == "json":
        json.dump(report, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    elif args.format == "markdown":
        target = os.path.join(args.run_dir, "report.md")
        _render_markdown(report, target)
        with open(target, encoding="utf-8") as fh:
            sys.stdout.write(fh.read())
    elif args.format == "csv":
        writer = csv.writer(sys.stdout)
        writer.writerow(["method", "k", "silhouette", "calinski_harabasz",
                         "davies_bouldin"])
        for cell in report["model_selection"]["cells"]:
            if cell.get("error"):
                continue
            ch = cell["calinski_harabasz"]
            writer.writerow([
                f"{cell['reducer']}+{cell['clusterer']}", cell["k"],
                f"{cell['silhouette']:.6f}",
                "inf" if ch is None else f"{ch:.6f}",
                f"{cell['davies_bouldin']:.6f}",
            ])
    return 0


def report_from_dir(run_dir: str) -> dict:
    """Load a run report, raising MissingRun when absent (library surface)."""
    path = os.path.join(run_dir, "report.json")
    if not os.path.exists(path):
        raise MissingRun(f"no report.json in {run_dir}")
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="surveyseg",
        description="Mixed-type survey segmentation pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p_val = sub.add_parser("validate", help="check a config against its data")
    p_val.add_argument("--config", required=True)
    p_val.set_defaults(func=cmd_validate)

    p_synth = sub.add_parser("synth", help="generate a synthetic survey")
    p_synth.add_argument("--personas", type=int, default=4)
    p_synth.add_argument("--rows", type=int, default=250)
    p_synth.add_argument("--seed", type=int, default=42)
    p_synth.add_argument("--separation", type=float, default=0.9)
    p_synth.add_argument("--out", required=True)
    p_synth.set_defaults(func=cmd_synth)

    p_run = sub.add_parser("run", help="execute the full pipeline")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
    p_run.add_argument("--out", default=None, help="override output directory")
    p_run.add_argument("--grid-preset", choices=["paper", "full"], default=None)
    p_run.set_defaults(func=cmd_run)

    p_rep = sub.add_parser("report", help="render a finished run")
    p_rep.add_argument("run_dir")
    p_rep.add_argument("--format", choices=["markdown", "json", "csv"],
                       default="markdown")
    p_rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
