"""Seeded RIS downlink twin: geometry, channels, rate oracle, CNN surrogate.

The pipeline in one breath: a Scenario fixes the layout and RF constants, a
seeded ScattererField makes channels a smooth deterministic function of
position, the exhaustive oracle labels every receiver location with
per-codeword achievable rates, and a small convolutional network learns to
recommend codewords from location features alone.
"""

from .channel import (
    ChannelParams,
    RayCluster,
    ScattererField,
    array_response,
    clusters_for_link,
    delay_channel,
    freq_channel,
    link_channel,
    pulse,
)
from .codebook import Codebook, dft_codebook, quantize_phases
from .dataset import Dataset, LocationRecord, SampleSet, build, flatten, split
from .evaluation import (
    EvalReport,
    SweepResult,
    evaluate,
    random_baseline,
    recovered_rate,
    stability_curve,
    sweep,
    top1,
    top3,
)
from .geometry import (
    Point3,
    RisPanel,
    RxGrid,
    Scenario,
    element_positions,
    location_features,
    rx_grid_points,
)
from .network import ModelConfig, RateNet, TrainReport, fit, gradient_check
from .rates import (
    RateTable,
    achievable_rate,
    effective_channel,
    exhaustive_search,
)
from .surrogate import (
    FeatureStats,
    SurrogateModel,
    compute_stats,
    config_hash,
    featurize,
    featurize_batch,
    load_model,
    predict_rates,
    recommend,
    recommend_batch,
    save_model,
    train,
)

__version__ = "0.1.0"
