from __future__ import annotations

import pytest
import torch

WORDS = (
    "find fine show list what movie times schedule the a on is continent "
    "argentina bolivia alarm change my from to tonight timer stop pause "
    "weather play music book restaurant rate this very long text token"
).split()


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory) -> str:
    """A small randomly initialized encoder saved to disk, so the full
    load-tokenize-infer-export path runs offline."""
    from tokenizers import Tokenizer
    from tokenizers.models import WordPiece
    from tokenizers.pre_tokenizers import Whitespace
    from tokenizers.processors import TemplateProcessing
    from transformers import BertConfig, BertModel, PreTrainedTokenizerFast

    vocab = {w: i for i, w in enumerate(["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", *WORDS])}
    core = Tokenizer(WordPiece(vocab=vocab, unk_token="[UNK]"))
    core.pre_tokenizer = Whitespace()
    core.post_processor = TemplateProcessing(
        single="[CLS] $A [SEP]",
        pair="[CLS] $A [SEP] $B [SEP]",
        special_tokens=[("[CLS]", vocab["[CLS]"]), ("[SEP]", vocab["[SEP]"])],
    )
    tokenizer = PreTrainedTokenizerFast(
        tokenizer_object=core, unk_token="[UNK]", pad_token="[PAD]",
        cls_token="[CLS]", sep_token="[SEP]", mask_token="[MASK]",
    )
    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=512,
    )
    torch.manual_seed(1234)
    model = BertModel(config)
    model.eval()
    directory = tmp_path_factory.mktemp("tiny_encoder")
    model.save_pretrained(directory)
    tokenizer.save_pretrained(directory)
    return str(directory)


@pytest.fixture(scope="session")
def tiny_encoder(tiny_model_dir):
    from slem_embedder.encoder import HFTextEncoder

    return HFTextEncoder(tiny_model_dir)
