//! Stereo-aware speech enhancement toolkit.
//!
//! The crate bundles everything needed to train and evaluate a stereo
//! speech enhancer with a loss that preserves the spatial image:
//!
//! * [`signal`]: the stereo waveform / spectrogram model, STFT and its inverse.
//! * [`compressor`]: frequency-axis band compression used at the network boundary.
//! * [`params`]: per-band IID, IPD, IC and OPD extraction.
//! * [`loss`] and [`gradient`]: the training objective and its analytic gradient.
//! * [`room`]: image-method stereo room impulse responses and SNR mixing.
//! * [`eval`]: SDR, preservation errors and the batch evaluation harness.
//! * [`wav`]: minimal RIFF/WAVE reader and writer.

pub mod compressor;
pub mod error;
pub mod eval;
pub mod gradient;
pub mod loss;
pub mod params;
pub mod room;
pub mod signal;
pub mod wav;

pub use compressor::{compress, decompress, BandCompressorSpec};
pub use error::{Error, Result};
pub use eval::{
    batch_evaluate, oracle_wiener_enhance, preservation_errors, sdr, BucketSummary, EvalFailure,
    EvalReport, EvalRow, EvalTable, ManifestEntry, Method, PreservationErrors, SdrReport,
};
pub use gradient::{loss_gradient, LossGradient};
pub use loss::{
    image_pres_loss, lsd, time_loss, total_loss, EnabledTerms, GenLogParams, LossBreakdown,
    LossConfig, LossWeights, StereoLoss,
};
pub use params::{
    image_params, opd, partition_bands, wrap_angle, BandPartition, OpdParams, StereoImageParams,
};
pub use room::{
    mix, render_scene, sample_scene, sample_scene_with, simulate_rir, ImpulseResponsePair,
    Mixture, RenderedScene, RoomSpec, SceneOptions, ScenePreset, SceneSpec, SourceKind,
};
pub use signal::{
    istft, scale_input, stft, unscale_output, ComplexSpectrogram, StereoSignal, StftConfig,
    StftPlan, WindowKind, DEFAULT_SAMPLE_RATE,
};
