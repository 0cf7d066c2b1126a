"""Streaming keystroke decoding from two-band wrist sEMG."""

from .frontend import (
    BandMap,
    RawEmgWindow,
    Spectrogram,
    StreamingSpectrogram,
    aggregate_rsg,
    build_band_map,
    extract_features,
    stft_logpower,
)
from .normalize import RtnConfig, RtnState, rtn_batch, rtn_finish, rtn_init, rtn_step
from .augment import (
    AcmConfig,
    JitterConfig,
    MaskRealization,
    acm_apply,
    acm_monte_carlo,
    acm_sample_masks,
    rotation_augment,
    temporal_jitter,
)
from .encoder import (
    EncoderOutput,
    EncoderStream,
    ModelConfig,
    PRESETS,
    WeightStore,
    count_flops,
    count_macs,
    count_params,
    encode,
    init_weights,
    rimlp_forward,
    tds_conv_block,
    tds_fc_block,
)
from .decode import (
    BACKSPACE,
    BeamHypothesis,
    CharLm,
    DEFAULT_BLANK_INDEX,
    DEFAULT_CHARSET,
    DecodeConfig,
    beam_search,
    beam_search_detailed,
    greedy_decode,
    lm_score,
    load_charlm,
    save_charlm,
)
from .metrics import CerBreakdown, cer, ctc_loglik
from .io import (
    NumericError,
    SessionRecord,
    SimulatorSpec,
    load_checkpoint,
    read_session,
    save_checkpoint,
    simulate_session,
    write_session,
)
from .pipeline import StreamingPipeline, compute_logits, run_pipeline, stream_session_logits
from .estimators import (
    ChannelMasker,
    CtcDecoder,
    EmgEncoder,
    RollingTimeNormalizer,
    SpectrogramFrontend,
)

__version__ = "0.1.0"
