"""Two-stage clinical entity linking engine.

Pipeline: word-level BIO span decoding (stage one labels ingested from
files), surface-dictionary override, dense top-k cosine retrieval over a
concept embedding store, optional embedding-space reranking, and
character-level span evaluation.
"""

__version__ = "0.1.0"
