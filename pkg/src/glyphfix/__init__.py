"""glyphfix: misspelled composite-glyph detection and correction.

The pipeline decomposes a rendered character into its description sequence
with a counting-aware attention decoder, flags sequences absent from the
dictionary as misspellings, and predicts the intended character with an
attention head trained on well-formed characters only.
"""

from .estimator import GlyphCorrector
from .grammar import (
    IDSDictionary,
    Internal,
    Leaf,
    MalformedSequenceError,
    SymbolVocabulary,
    derive_count_vector,
    derive_existence,
    parse_ids,
    serialize_tree,
    validate,
)
from .inference import Verdict

__version__ = "0.1.0"

__all__ = [
    "GlyphCorrector",
    "IDSDictionary",
    "Verdict",
    "Internal",
    "Leaf",
    "MalformedSequenceError",
    "SymbolVocabulary",
    "derive_count_vector",
    "derive_existence",
    "parse_ids",
    "serialize_tree",
    "validate",
    "__version__",
]
