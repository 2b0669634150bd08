"""Batched sentence encoding with masked mean pooling over subword states.

The pooling mean runs over real token positions only: padding is always
masked out (so batch composition cannot change a row beyond float noise),
and sequence-boundary/special positions are excluded unless
``include_boundary_tokens`` is set. Identical texts are encoded once and
share one row, which makes them bitwise equal in the output.
"""

from __future__ import annotations

import numpy as np
import torch

# transformers reports this sentinel when a tokenizer has no real limit
_NO_LIMIT = int(1e30)


class EncodingError(RuntimeError):
    pass


class HFTextEncoder:
    """A pretrained encoder plus its tokenizer, loaded from a local
    directory or a hub id."""

    def __init__(self, model_path: str, device: str = "cpu"):
        from transformers import AutoModel, AutoTokenizer

        self.model_id = model_path
        self.device = device
        self.tokenizer = AutoTokenizer.from_pretrained(model_path)
        self.model = AutoModel.from_pretrained(model_path).to(device).eval()


def resolve_max_length(tokenizer, requested: int | None = None) -> int | None:
    limit = getattr(tokenizer, "model_max_length", None)
    if limit is None or limit >= _NO_LIMIT:
        limit = None
    if requested is None:
        return limit
    return min(requested, limit) if limit is not None else requested


def _layer_count(hidden_states) -> int:
    return len(hidden_states)


def encode_texts(
    tokenizer,
    model,
    texts,
    *,
    layer: int = -1,
    include_boundary_tokens: bool = False,
    batch_size: int = 32,
    max_length: int | None = None,
    device: str = "cpu",
) -> tuple[np.ndarray, list[int]]:
    """Encode texts to one pooled float32 row each.

    Returns the (N, D) matrix in input order plus the indices of texts that
    exceeded the encoder's maximum length and were truncated.
    """
    texts = list(texts)
    if not texts:
        raise EncodingError("no texts to encode")
    if batch_size < 1:
        raise EncodingError("batch_size must be >= 1")
    limit = resolve_max_length(tokenizer, max_length)

    truncated: list[int] = []
    if limit is not None:
        lengths = [len(ids) for ids in tokenizer(texts, truncation=False)["input_ids"]]
        truncated = [i for i, n in enumerate(lengths) if n > limit]

    unique: dict[str, list[int]] = {}
    for i, text in enumerate(texts):
        unique.setdefault(text, []).append(i)
    ordered = list(unique)

    rows: list[np.ndarray | None] = [None] * len(texts)
    model.eval()
    with torch.no_grad():
        for start in range(0, len(ordered), batch_size):
            batch = ordered[start:start + batch_size]
            encoded = tokenizer(
                batch,
                return_tensors="pt",
                padding=True,
                truncation=limit is not None,
                max_length=limit,
                return_special_tokens_mask=True,
            )
            input_ids = encoded["input_ids"].to(device)
            attention = encoded["attention_mask"].to(device)
            special = encoded["special_tokens_mask"].to(device)
            output = model(input_ids=input_ids, attention_mask=attention, output_hidden_states=True)
            hidden_states = output.hidden_states
            n_states = _layer_count(hidden_states)
            if not -n_states <= layer < n_states:
                raise EncodingError(
                    f"layer {layer} out of range for {n_states} hidden states"
                )
            hidden = hidden_states[layer]
            mask = attention
            if not include_boundary_tokens:
                mask = mask * (1 - special)
            mask = mask.to(hidden.dtype)
            counts = mask.sum(dim=1)
            if bool((counts == 0).any()):
                empty = [batch[i] for i in (counts == 0).nonzero(as_tuple=True)[0].tolist()]
                raise EncodingError(f"no poolable positions for texts: {empty[:3]!r}")
            pooled = (hidden * mask.unsqueeze(-1)).sum(dim=1) / counts.unsqueeze(-1)
            arr = pooled.cpu().numpy().astype(np.float32)
            for text, row in zip(batch, arr):
                for idx in unique[text]:
                    rows[idx] = row
    return np.stack(rows), truncated
