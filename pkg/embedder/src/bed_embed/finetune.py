"""Bi-encoder fine-tuning: squared error between pair cosine and target.

Both sides of every pair go through the same encoder (shared weights), so
minimizing mean (cos(enc(a), enc(b)) - target)^2 pulls same-intent
utterances together and pushes different-intent ones apart.
"""

import math
from dataclasses import dataclass

import torch


@dataclass(frozen=True)
class FinetuneConfig:
    epochs: int = 1
    batch_size: int = 16
    learning_rate: float = 2e-5
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


def finetune(encoder, pairs, config: FinetuneConfig) -> list:
    """Train the encoder in place; returns the per-batch loss trace.

    The encoder must expose ``tokenize(texts) -> features`` and a forward
    pass producing ``{"sentence_embedding": ...}`` — pretrained sentence
    encoders and ProjectedHashEncoder both do.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("no training pairs")

    torch.manual_seed(config.seed)
    shuffler = torch.Generator().manual_seed(config.seed)
    device = next(encoder.parameters()).device
    optimizer = torch.optim.AdamW(encoder.parameters(),
                                  lr=config.learning_rate)

    losses = []
    encoder.train()
    try:
        for _ in range(config.epochs):
            order = torch.randperm(len(pairs), generator=shuffler).tolist()
            for start in range(0, len(order), config.batch_size):
                batch = [pairs[i] for i in order[start:start
                                                 + config.batch_size]]
                targets = torch.tensor([p.target for p in batch],
                                       device=device)
                sides = []
                for texts in ([p.text_a for p in batch],
                              [p.text_b for p in batch]):
                    features = {key: value.to(device) for key, value
                                in encoder.tokenize(texts).items()}
                    sides.append(encoder(features)["sentence_embedding"])
                cos = torch.nn.functional.cosine_similarity(*sides, dim=1)
                loss = torch.mean((cos - targets) ** 2)
                value = loss.item()
                if not math.isfinite(value):
                    raise ValueError(f"non-finite training loss {value}")
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
                losses.append(value)
    finally:
        encoder.eval()
    return losses
