"""Knowledge infusion for multiple-choice question answering.

Thin wrapper over the compiled ``_kinfuse`` extension. Settings are passed as
``{"section.key": "value"}`` dicts using the same keys as the CLI config file.
"""

from ._kinfuse import (
    EmptyQueryError,
    EncoderModel,
    FusionModel,
    InvertedIndex,
    IoError,
    KnowledgeCorpus,
    KnowledgeSentence,
    McqDataset,
    McqItem,
    RetrievalHit,
    ValidationError,
    Vocabulary,
    attach_premises,
    edit_distance,
    evaluate,
    generate_pfqa,
    grad_check,
    load_corpus,
    load_mcq,
    masked_lm_loss,
    normalized_overlap,
    parse_mcq_jsonl,
    rerank_order,
    revise,
    select_distractors,
    split_sentences,
    sweep_m,
    token_jaccard,
    tokenize,
    train,
    weight_report,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
