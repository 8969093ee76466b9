"""bed-embed: write embedding stores for a normalized dataset.

    bed-embed export --extractor mpnet --dataset-dir data/ --out emb/
    bed-embed finetune --dataset-dir data/ --out emb/ --seed 0

``export`` runs a frozen encoder; ``finetune`` first trains the bi-encoder
on intent pairs from the train split (OOD rows excluded) and exports under
the extractor id ``bi-encoder-<base>``.
"""

import argparse
import glob
import os
import sys

from .encoders import ProjectedHashEncoder, load_encoder
from .export import export_embeddings
from .finetune import FinetuneConfig, finetune
from .formats import OOD_INTENT, read_dataset
from .pairs import make_pairs


def _find_dataset(dataset_dir):
    candidates = sorted(glob.glob(os.path.join(str(dataset_dir), "*.tsv")))
    if len(candidates) != 1:
        raise ValueError(f"expected exactly one .tsv in {dataset_dir}, "
                         f"found {len(candidates)}")
    return read_dataset(candidates[0])


def _cmd_export(args) -> int:
    dataset = _find_dataset(args.dataset_dir)
    encoder = load_encoder(args.extractor)
    for stem in export_embeddings(encoder, args.extractor, dataset,
                                  args.out):
        print(f"wrote {stem}.emb")
    return 0


def _cmd_finetune(args) -> int:
    dataset = _find_dataset(args.dataset_dir)
    id_rows = [(text, intent) for text, intent in dataset.splits["train"]
               if intent != OOD_INTENT]
    pairs = make_pairs(id_rows, positives=args.positives,
                       negatives=args.negatives, seed=args.seed)
    encoder = (ProjectedHashEncoder() if args.base == "hash"
               else load_encoder(args.base))
    losses = finetune(encoder, pairs,
                      FinetuneConfig(epochs=args.epochs,
                                     batch_size=args.batch_size,
                                     learning_rate=args.learning_rate,
                                     seed=args.seed))
    print(f"fine-tuned on {len(pairs)} pairs; "
          f"loss {losses[0]:.4f} -> {losses[-1]:.4f}")
    for stem in export_embeddings(encoder, f"bi-encoder-{args.base}",
                                  dataset, args.out):
        print(f"wrote {stem}.emb")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bed-embed",
        description="Export sentence embeddings for a normalized dataset")
    sub = parser.add_subparsers(required=True)

    export = sub.add_parser("export", help="run a frozen encoder")
    export.add_argument("--extractor", required=True,
                        choices=("use", "bert", "mpnet", "hash"))
    export.add_argument("--dataset-dir", required=True)
    export.add_argument("--out", required=True)
    export.set_defaults(func=_cmd_export)

    tune = sub.add_parser("finetune",
                          help="fine-tune the bi-encoder, then export")
    tune.add_argument("--dataset-dir", required=True)
    tune.add_argument("--out", required=True)
    tune.add_argument("--seed", type=int, default=0)
    tune.add_argument("--base", default="mpnet", choices=("mpnet", "hash"))
    tune.add_argument("--epochs", type=int, default=1)
    tune.add_argument("--batch-size", type=int, default=16)
    tune.add_argument("--learning-rate", type=float, default=2e-5)
    tune.add_argument("--positives", type=int, default=1)
    tune.add_argument("--negatives", type=int, default=1)
    tune.set_defaults(func=_cmd_finetune)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
