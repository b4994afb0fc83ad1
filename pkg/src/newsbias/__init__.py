"""Unsupervised characterization of cable-news program bias.

Programs are compared by *what* they discuss (named-entity keywords) and
*how* they discuss it (per-sentence stance), combined into a monthly
program-similarity network and clustered spectrally.
"""

from .clustering import (ClusterTimeline, Embedding, adjusted_rand_index, align_labels, cluster,
                         matrix_stddev, pca_assignments, sankey_flows, spectral_cluster, spectral_embed)
from .entities import (EntityMention, HeuristicRecognizer, KeywordAssignment, canonicalize, recognize_entities,
                       select_keywords)
from .ingest import Statement, Transcript, TranscriptHeader, bucket_by_month, parse_transcript, serialize_transcript
from .linalg import jacobi_eigh
from .networks import (ProgramTopicMatrix, SimilarityMatrix, build_frequency_matrix, build_stance_matrix, combine,
                       stance_similarity, tfidf_transform, topic_similarity)
from .pipeline import PipelineConfig, run_all, run_stage
from .stance import (MockClassifier, RemoteClassifier, SentenceVerdict, StanceCache, StanceEngine, StanceRecord,
                     Verdict, classify_sentence, lexicon_sentiment, score_transcript)
from .synthetic import SyntheticSpec, generate_synthetic

__version__ = "0.1.0"
