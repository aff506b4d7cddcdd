import string

import pytest
import torch


def _write_vocab(path):
    words = [
        "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
        "chest", "pain", "fever", "liver", "scan", "left", "lung",
        "patient", "reports", "severe", "headache", "nausea", "normal",
        "the", "and", "no", "with", ".", ",", ":",
    ]
    pieces = list(string.ascii_lowercase) + [f"##{c}" for c in string.ascii_lowercase]
    digits = list(string.digits) + [f"##{c}" for c in string.digits]
    path.write_text("\n".join(words + pieces + digits) + "\n", encoding="utf-8")


@pytest.fixture(scope="session")
def tiny_models(tmp_path_factory):
    """Small randomly initialized local models (no network access)."""
    from transformers import (
        BertConfig,
        BertForTokenClassification,
        BertModel,
        BertTokenizerFast,
    )

    root = tmp_path_factory.mktemp("models")
    vocab = root / "vocab.txt"
    _write_vocab(vocab)
    tokenizer = BertTokenizerFast(vocab_file=str(vocab), do_lower_case=True)

    labels = [
        "O", "B-Finding", "I-Finding", "B-Procedure", "I-Procedure", "B-Body", "I-Body",
    ]
    config = BertConfig(
        vocab_size=tokenizer.vocab_size,
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=512,
    )

    torch.manual_seed(1234)
    encoder_dir = root / "encoder"
    BertModel(config).save_pretrained(encoder_dir)
    tokenizer.save_pretrained(encoder_dir)

    torch.manual_seed(1234)
    tagger_config = BertConfig(
        **config.to_dict(),
    )
    tagger_config.num_labels = len(labels)
    tagger_config.id2label = dict(enumerate(labels))
    tagger_config.label2id = {lab: i for i, lab in enumerate(labels)}
    tagger_dir = root / "tagger"
    BertForTokenClassification(tagger_config).save_pretrained(tagger_dir)
    tokenizer.save_pretrained(tagger_dir)

    return {"encoder": str(encoder_dir), "tagger": str(tagger_dir)}
