"""trfocus: time-reversal spatiotemporal focusing, simulated at desk scale.

Synthetic rich-scattering channels over a linear receiver grid, chirp
sounding with Wiener deconvolution, multi-antenna time-reversal
precoding, multi-user links, and the focusing figures of merit.
"""

from .channel import (
    CavityParams,
    ChannelEnsemble,
    Path,
    PathSet,
    RxGrid,
    SPEED_OF_LIGHT_M_S,
    build_ensemble,
    draw_paths,
    load_ensemble,
    save_ensemble,
    spatial_correlation_theory,
    synthesize_cir,
)
from .errors import (
    AliasingError,
    ConfigError,
    DegenerateBackgroundError,
    DegenerateChannelError,
    DegenerateProbeError,
    DimensionMismatchError,
    EdgePeakError,
    IllConditionedError,
    InvalidTargetError,
    ParameterError,
    RateMismatchError,
    TrfocusError,
)
from .experiment import (
    PRESETS,
    ScenarioConfig,
    config_from_preset,
    reproduce,
    run_experiment,
    sound_cirs,
)
from .link import SpaceTimeField, TrdmaResult, focus_field, ook_link, trdma_link
from .metrics import (
    FocusingReport,
    SpatialProfile,
    focusing_gain,
    isi_ratio,
    sir,
    spatial_profile,
    temporal_fwhm,
)
from .precoding import (
    MrtWeights,
    TrFilterBank,
    equivalence_residual,
    mrt_weights,
    tr_filters,
)
from .signalops import (
    Cir,
    Waveform,
    convolve,
    gen_chirp,
    inband_nmse_db,
    resample_rational,
    time_reverse_conjugate,
    wiener_deconvolve,
)

__version__ = "0.1.0"
