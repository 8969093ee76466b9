"""Sentence-embedding exporter and bi-encoder fine-tuner.

Produces the embedding-store files (``.emb`` + ``.manifest``) that the
detection harness consumes, from frozen pretrained encoders or from a
bi-encoder fine-tuned on intent-pair cosine targets.
"""
