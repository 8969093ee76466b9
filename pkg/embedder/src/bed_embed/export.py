"""Export per-split embedding stores in dataset row order."""

import os

from .formats import SPLITS, DatasetFile, write_store


def export_embeddings(encoder, extractor: str, dataset: DatasetFile,
                      out_dir) -> list:
    """Encode every split and write its store; returns the path stems.

    Row i of each payload is the encoding of utterance i of that split in
    the normalized file, which is what lets the detection side align
    embeddings with labels by position alone.
    """
    os.makedirs(str(out_dir), exist_ok=True)
    stems = []
    for split in SPLITS:
        texts = dataset.texts(split)
        if not texts:
            raise ValueError(f"dataset {dataset.name!r} has an empty "
                             f"{split} split")
        matrix = encoder.encode(texts)
        stems.append(write_store(out_dir, extractor, dataset.name, split,
                                 matrix))
    return stems
