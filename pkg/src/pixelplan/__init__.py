"""Width-based planning over pixel screens with pluggable boolean features."""

from .sim import (
    Screen,
    SimState,
    StepResult,
    FrameSkipConfig,
    GridCollect,
    AvoidGame,
    Chain,
    make_env,
    sim_reset,
    sim_step,
    sim_clone,
)
from .features import FeatureSpace, FeatureSet, Extractor, RawExtractor
from .novelty import NoveltyTable, iw_novel, iw_register
from .bprost import (
    BprostConfig,
    atari_config,
    bprost_count,
    extract_bprost,
    BprostExtractor,
)
from .weights import EncoderWeights, WeightFormatError, load_weights, save_weights
from .neural import (
    encode_probs,
    threshold_features,
    quantize_features,
    NeuralExtractor,
    QuantizedNeuralExtractor,
)
from .planner import (
    PlannerConfig,
    SearchNode,
    EpisodeRecord,
    plan_iw,
    rollout_iw_plan,
    backup,
    partial_cache_advance,
    run_episode,
)

__version__ = "0.1.0"
