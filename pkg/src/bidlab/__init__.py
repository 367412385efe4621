"""bidlab: similarity, clustering, term and co-authorship analysis of referee bids."""

from .bid_core import (
    BidMatrix,
    RawBidMatrix,
    SimilarityMatrix,
    filter_bids,
    hamming_similarity,
    referee_similarity,
    submission_similarity,
    transform_bids,
)

__version__ = "0.1.0"

__all__ = [
    "BidMatrix",
    "RawBidMatrix",
    "SimilarityMatrix",
    "filter_bids",
    "hamming_similarity",
    "referee_similarity",
    "submission_similarity",
    "transform_bids",
    "__version__",
]
