"""Locate-then-summarize toolkit for query-based meeting summarization."""

from .embedding import (
    HashEmbeddingBackend,
    RemoteEmbeddingBackend,
    TokenMatrix,
    average_word_embedding,
    embed_query,
    embed_tokens,
    embed_transcript,
)
from .ingest import (
    Corpus,
    GoldSpan,
    Meeting,
    QueryRecord,
    Turn,
    load_split_dir,
    parse_meeting,
    preprocess_text,
    validate_corpus,
)
from .locator import (
    LocatorConfig,
    LocatorParams,
    SpanPrediction,
    assemble_features,
    conv_maxpool,
    cosine_similarity,
    forward_trace,
    locator_forward,
    locator_gradients,
    loss,
    mlp_forward,
    project,
)
from .pipeline import (
    ResultRow,
    improvement_percent,
    render_report,
    run_gold_eval,
    run_located_eval,
)
from .rouge import RougeReport, RougeScore, aggregate, metric_tokenize, rouge_l, rouge_n
from .spans import DiscreteSpan, SummarizerInput, build_summarizer_input, discretize, extract_text
from .summarize import LeadKSummarizer, RemoteSummarizer, SummaryResult
from .training import train

__version__ = "0.1.0"
