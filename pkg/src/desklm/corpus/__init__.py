from .filters import (ModelScorer, PerplexityCut, Scorer, UnigramScorer, external_verdict, length_filter,
                      nearest_rank, perplexity, perplexity_filter)
from .minhash import (HashFamily, MinHashSignature, candidate_pairs, estimated_jaccard, exact_jaccard,
                      minhash_signature, near_dup_clusters, shingle_hashes, signature_from_hashes, signatures)
from .pipeline import (Document, FilterConfig, FilterReport, StageReport, filter_documents, read_documents_dir,
                       write_documents_dir)

__all__ = [
    "ModelScorer", "PerplexityCut", "Scorer", "UnigramScorer", "external_verdict", "length_filter",
    "nearest_rank", "perplexity", "perplexity_filter",
    "HashFamily", "MinHashSignature", "candidate_pairs", "estimated_jaccard", "exact_jaccard",
    "minhash_signature", "near_dup_clusters", "shingle_hashes", "signature_from_hashes", "signatures",
    "Document", "FilterConfig", "FilterReport", "StageReport", "filter_documents", "read_documents_dir",
    "write_documents_dir",
]
