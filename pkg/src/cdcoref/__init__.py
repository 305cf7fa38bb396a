"""Cross-document coreference resolution over frozen token embeddings.

The engine scores candidate mention spans and mention pairs with small
feed-forward networks over fixed per-token vectors, prunes spans per
document, and forms coreference clusters by average-linkage agglomerative
clustering, evaluated with the standard MUC / B-cubed / CEAF-e suite.
"""

__version__ = "0.1.0"

from .clustering import agglomerative_cluster, brute_force_cluster, cluster_documents
from .corpus import Corpus, GoldMention, load_corpus, save_corpus, select_mentions
from .embeddings import EmbeddingStore, load_embeddings, save_embeddings, synthetic_embeddings
from .metrics import b_cubed, ceaf_e, conll_f1, evaluate, muc
from .model import load_checkpoint, save_checkpoint
from .synthetic import SynthConfig, make_workspace
from .training import TrainConfig, ablation_suite, evaluate_split, predict_clusters, train

__all__ = [
    "Corpus", "EmbeddingStore", "GoldMention", "SynthConfig", "TrainConfig",
    "ablation_suite", "agglomerative_cluster", "b_cubed",
    "brute_force_cluster", "ceaf_e", "cluster_documents", "conll_f1",
    "evaluate", "evaluate_split", "load_checkpoint", "load_corpus",
    "load_embeddings", "make_workspace", "muc", "predict_clusters",
    "save_checkpoint", "save_corpus", "save_embeddings", "select_mentions",
    "synthetic_embeddings", "train", "__version__",
]
