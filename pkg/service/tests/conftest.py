from __future__ import annotations

import json
from pathlib import Path

import pytest
import torch
from fastapi.testclient import TestClient
from tokenizers import ByteLevelBPETokenizer
from tokenizers.processors import RobertaProcessing
from transformers import (
    BartConfig,
    BartForConditionalGeneration,
    PreTrainedTokenizerFast,
    RobertaConfig,
    RobertaModel,
)

from embed_service.app import create_app
from embed_service.manifest import load_manifest

ENCODER_DIM = 32
SAMPLE_TEXT = """\
i call the meeting to order. welcome everyone to the committee.
the budget was capped at twelve euros per unit by finance.
petitions were presented about health funding and transit support.
summarize the discussion about the prototype schedule and the foam model.
members argued about which government matters deserved priority.
firmware will demo a working button matrix in that week too.
"""


def _train_tokenizer(tmp: Path) -> PreTrainedTokenizerFast:
    corpus = tmp / "corpus.txt"
    corpus.write_text(SAMPLE_TEXT, encoding="utf-8")
    bpe = ByteLevelBPETokenizer()
    bpe.train(
        [str(corpus)],
        vocab_size=500,
        min_frequency=1,
        special_tokens=["<s>", "<pad>", "</s>", "<unk>", "<mask>"],
    )
    inner = bpe._tokenizer
    inner.post_processor = RobertaProcessing(
        ("</s>", bpe.token_to_id("</s>")), ("<s>", bpe.token_to_id("<s>"))
    )
    return PreTrainedTokenizerFast(
        tokenizer_object=inner,
        bos_token="<s>",
        eos_token="</s>",
        unk_token="<unk>",
        pad_token="<pad>",
        mask_token="<mask>",
        cls_token="<s>",
        sep_token="</s>",
    )


@pytest.fixture(scope="session")
def checkpoints(tmp_path_factory) -> dict[str, Path]:
    """Random-weight miniature checkpoints so everything runs offline."""
    tmp = tmp_path_factory.mktemp("checkpoints")
    tokenizer = _train_tokenizer(tmp)
    vocab_size = len(tokenizer)

    encoder_dir = tmp / "tiny-roberta"
    tokenizer.save_pretrained(encoder_dir)
    torch.manual_seed(0)
    RobertaModel(
        RobertaConfig(
            vocab_size=vocab_size,
            hidden_size=ENCODER_DIM,
            num_hidden_layers=2,
            num_attention_heads=2,
            intermediate_size=64,
            max_position_embeddings=514,
            type_vocab_size=1,
        )
    ).save_pretrained(encoder_dir)

    summarizer_dir = tmp / "tiny-bart"
    tokenizer.save_pretrained(summarizer_dir)
    torch.manual_seed(1)
    BartForConditionalGeneration(
        BartConfig(
            vocab_size=vocab_size,
            d_model=ENCODER_DIM,
            encoder_layers=2,
            decoder_layers=2,
            encoder_attention_heads=2,
            decoder_attention_heads=2,
            encoder_ffn_dim=64,
            decoder_ffn_dim=64,
            max_position_embeddings=1024,
            bos_token_id=tokenizer.bos_token_id,
            pad_token_id=tokenizer.pad_token_id,
            eos_token_id=tokenizer.eos_token_id,
            decoder_start_token_id=tokenizer.eos_token_id,
            forced_eos_token_id=tokenizer.eos_token_id,
        )
    ).save_pretrained(summarizer_dir)
    return {"roberta": encoder_dir, "bart": summarizer_dir}


@pytest.fixture(scope="session")
def manifest_path(checkpoints, tmp_path_factory) -> Path:
    path = tmp_path_factory.mktemp("manifest") / "manifest.json"
    path.write_text(
        json.dumps(
            {
                "models": [
                    {
                        "name": "roberta",
                        "kind": "encoder",
                        "checkpoint": str(checkpoints["roberta"]),
                    },
                    {
                        "name": "bart",
                        "kind": "summarizer",
                        "checkpoint": str(checkpoints["bart"]),
                    },
                ]
            }
        )
    )
    return path


@pytest.fixture(scope="session")
def client(manifest_path):
    app = create_app(load_manifest(manifest_path))
    with TestClient(app) as test_client:
        assert app.state.registry.wait_ready(timeout=120), app.state.registry.error
        yield test_client
