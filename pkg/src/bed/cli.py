"""Command line entry points: bench, eval-scores, synth."""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .datasets import OOD_LABEL, write_normalized
from .embstore import EmbeddingManifest, write_embeddings, store_basename
from .harness import (ALL_DETECTORS, ExperimentConfig, TEXT_DETECTORS,
                      load_split_embeddings, resolve_dataset, rows_to_csv,
                      run_grid, write_rows)
from .metrics import evaluate
from .synth import SYNTH_EXTRACTOR, OOD_MODES, SyntheticSpec, generate


def _parse_bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {raw!r}")


def _load_grid(path, dataset_name: str) -> list[ExperimentConfig]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    cells = doc.get("cells") if isinstance(doc, dict) else doc
    if not isinstance(cells, list):
        raise ValueError(f"{path}: grid file needs a JSON list of cells, "
                         "either top-level or under a 'cells' key")
    configs = []
    for i, cell in enumerate(cells):
        if not isinstance(cell, dict):
            raise ValueError(f"{path}: cells[{i}] must be an object")
        try:
            configs.append(ExperimentConfig(
                dataset=dataset_name,
                extractor=cell["extractor"],
                detector=cell["detector"],
                use_best_ckpt=bool(cell.get("use_best_ckpt", False)),
                is_ood_label_in_train=bool(
                    cell.get("is_ood_label_in_train", False)),
                seed=int(cell.get("seed", 0)),
            ))
        except KeyError as exc:
            raise ValueError(
                f"{path}: cells[{i}] missing field {exc.args[0]!r}") from None
    return configs


def _cmd_bench(args) -> int:
    dataset = resolve_dataset(args.dataset, args.data_dir)
    if args.grid:
        configs = _load_grid(args.grid, args.dataset)
    else:
        if not args.detector or not args.extractor:
            print("bench needs --grid or both --detector and --extractor",
                  file=sys.stderr)
            return 2
        configs = [ExperimentConfig(
            dataset=args.dataset, extractor=args.extractor,
            detector=args.detector, use_best_ckpt=args.best_ckpt,
            is_ood_label_in_train=args.ood_in_train, seed=args.seed)]

    embeddings = {}
    for config in configs:
        if config.detector in TEXT_DETECTORS:
            continue
        if config.extractor in embeddings:
            continue
        try:
            embeddings[config.extractor] = load_split_embeddings(
                args.emb_dir, config.extractor, dataset)
        except Exception as exc:
            # recorded per cell by run_grid as "no embeddings loaded"
            print(f"warning: {exc}", file=sys.stderr)

    rows = run_grid(configs, dataset, embeddings)
    if args.out:
        fmt = args.format or ("md" if str(args.out).endswith(".md") else "csv")
        write_rows(rows, args.out, fmt)
    else:
        sys.stdout.write(rows_to_csv(rows))

    failed = [r for r in rows if r.error]
    for r in failed:
        print(f"error: {r.feature_extractor}/{r.detector}: {r.error}",
              file=sys.stderr)
    return 1 if failed else 0


def _read_scores(path) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        values = [line.strip() for line in fh if line.strip()]
    return np.array([float(v) for v in values])


def _read_labels(path) -> np.ndarray:
    truthy = {"1", "true", OOD_LABEL}
    falsy = {"0", "false", "id"}
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            token = line.strip().lower()
            if not token:
                continue
            if token in truthy:
                out.append(True)
            elif token in falsy:
                out.append(False)
            else:
                raise ValueError(
                    f"{path}:{lineno}: expected 1/0/true/false/{OOD_LABEL}/id, "
                    f"got {token!r}")
    return np.array(out, dtype=bool)


def _cmd_eval_scores(args) -> int:
    scores = _read_scores(args.scores)
    labels = _read_labels(args.labels)
    # without a separate validation file, calibrate on the scored data
    val_scores = _read_scores(args.val_scores) if args.val_scores else scores
    val_labels = _read_labels(args.val_labels) if args.val_labels else labels
    report = evaluate(scores, labels, val_scores=val_scores,
                      val_labels=val_labels)
    print(json.dumps({
        "threshold": report.threshold,
        "f1": report.f1,
        "mcc": report.mcc,
        "fpr_at_90": report.fpr_at_90,
        "fpr_at_95": report.fpr_at_95,
        "aupr": report.aupr,
        "auroc": report.auroc,
    }, indent=2))
    return 0


def _cmd_synth(args) -> int:
    if args.spec:
        with open(args.spec, encoding="utf-8") as fh:
            fields = json.load(fh)
        spec = SyntheticSpec(**fields)
    else:
        spec = SyntheticSpec()
    dataset, embeddings = generate(spec)
    os.makedirs(args.out_dir, exist_ok=True)
    write_normalized(dataset, os.path.join(args.out_dir,
                                           f"{dataset.name}.tsv"))
    for split_name, matrix in embeddings.items():
        manifest = EmbeddingManifest(
            extractor=SYNTH_EXTRACTOR, dataset=dataset.name, split=split_name,
            dim=matrix.dim, count=matrix.n_rows)
        path = os.path.join(args.out_dir, store_basename(
            SYNTH_EXTRACTOR, dataset.name, split_name))
        write_embeddings(manifest, matrix, path)
    print(f"wrote {dataset.name}.tsv and {len(embeddings)} embedding files "
          f"to {args.out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bed",
        description="Embedding-based out-of-distribution detection bench")
    sub = parser.add_subparsers(dest="command", required=True)

    bench = sub.add_parser("bench", help="run detector grid cells")
    bench.add_argument("--dataset", required=True,
                       help="clinc150 | rostd | snips | <normalized name>")
    bench.add_argument("--data-dir", required=True)
    bench.add_argument("--emb-dir", default=".",
                       help="directory of .emb/.manifest pairs")
    bench.add_argument("--grid", help="JSON grid file with a 'cells' list")
    bench.add_argument("--detector", choices=sorted(ALL_DETECTORS))
    bench.add_argument("--extractor")
    bench.add_argument("--best-ckpt", type=_parse_bool, default=False)
    bench.add_argument("--ood-in-train", type=_parse_bool, default=False)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--out", help="result table path (default: stdout CSV)")
    bench.add_argument("--format", choices=("csv", "md"))
    bench.set_defaults(func=_cmd_bench)

    ev = sub.add_parser("eval-scores",
                        help="metrics for a standalone score/label file pair")
    ev.add_argument("--scores", required=True,
                    help="text file, one score per line (higher = more OOD)")
    ev.add_argument("--labels", required=True,
                    help="text file, one label per line (1/0/true/false/oos/id)")
    ev.add_argument("--val-scores", help="calibration scores (default: --scores)")
    ev.add_argument("--val-labels", help="calibration labels (default: --labels)")
    ev.set_defaults(func=_cmd_eval_scores)

    synth = sub.add_parser("synth",
                           help="generate a synthetic dataset + embeddings")
    synth.add_argument("--spec", help=f"JSON file of SyntheticSpec fields "
                       f"(ood_mode: {', '.join(OOD_MODES)})")
    synth.add_argument("--out-dir", required=True)
    synth.set_defaults(func=_cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
