"""Phrase-based statistical MT toolkit for closely related dialect pairs.

Covers D3 clitic segmentation, IBM Model 1 alignment with grow-diag-final
symmetrization, phrase extraction and scoring, Kneser-Ney n-gram language
models, phrase-table triangulation through a pivot language, morpho-syntactic
constraint features, a stack decoder, BLEU/OOV evaluation and an end-to-end
experiment pipeline.
"""

__version__ = "0.1.0"


class DataError(Exception):
    """Raised for malformed or inconsistent input data (CLI exit code 2)."""
