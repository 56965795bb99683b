"""Learnt quasi-transitive similarity for descriptor-set retrieval."""

from .corpus import FaceSet, Gallery, ProxyTable, load_gallery, save_gallery
from .evaluation import AnrRecord, anr, anr_cdf, evaluate_all, independence_prediction, rank_k_stats
from .metafeat import (
    TransitivityFeature,
    build_training_corpus,
    feature_exemplar,
    feature_subspace,
    train_extract_exemplar,
    train_extract_subspace,
)
from .retrieval import (
    RankedResult,
    RetrievalConfig,
    rank_gallery,
    score_lqts,
    score_simple,
    select_proxies,
)
from .sampling import KpcaModel, energy_report, fit_kpca, pre_image, robust_select
from .similarity import (
    MatchResult,
    SubspaceModel,
    cosine_sim,
    fit_subspace,
    max_corr,
    max_max_sim,
    vector_subspace_sim,
)
from .svr import SvrConfig, SvrModel, predict, train
from .synth import SynthConfig, generate

__version__ = "0.1.0"
