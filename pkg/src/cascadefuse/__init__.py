"""cascadefuse: multi-modal social-cascade classification with
point-process temporal features."""

from .cascade import NewsStory, Post, UserProfile, truncate_story, validate_story
from .pointprocess import (
    InfectiousnessSeries,
    KernelParams,
    estimate_infectiousness,
    infectiousness_series,
    intensity,
    kernel_integral,
    memory_kernel,
    post_count_series,
    simulate_hawkes,
    triangular_kernel,
)
from .features import (
    BundleConfig,
    FeatureBundle,
    Vocabulary,
    build_bundle,
    build_vocabulary,
    tokenize,
    user_vector,
    vectorize_post,
)
from .model import EvalReport, ModelConfig, evaluate, forward, grid_search, train

__version__ = "0.1.0"
