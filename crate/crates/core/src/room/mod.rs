//! Desk-scale synthesis of reverberant stereo scenes.
//!
//! A [`SceneSpec`] fixes a shoebox room, a two-microphone pair, speaker and
//! noise positions, the reverberation time and the mixing levels. It is a
//! pure function of its seed. [`simulate_rir`] renders image-method impulse
//! responses for the scene and [`mix`] convolves mono sources with them and
//! combines them at the scene's SNR and level.

mod decay;
mod image;
mod mixing;
pub mod sources;

pub use decay::{absorption_for_t60, model_t60};
pub use image::{first_arrival, image_method, schroeder_t60, simulate_rir, ImpulseResponsePair, RIR_LEN};
pub use mixing::{fft_convolve, mix, mix_with_rirs, snr_db, Mixture};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 3];

pub const SPEED_OF_SOUND: f64 = 340.0;
pub const MIC_SPACING: f64 = 0.20;
pub const MIN_SOURCE_ANGLE_DEG: f64 = 20.0;
pub const SNR_RANGE_DB: (f64, f64) = (-10.0, 30.0);
pub const SNR_BUCKETS_DB: [f64; 5] = [0.0, 5.0, 10.0, 15.0, 20.0];
pub const TEST_T60_S: [f64; 4] = [0.0, 0.27, 0.53, 0.8];
const MAX_ATTEMPTS: usize = 10_000;
/// Share of anechoic rooms in the training mix (12,000 of 46,400 RIRs).
const ANECHOIC_SHARE: f64 = 12_000.0 / 46_400.0;

/// Shoebox room with uniform wall absorption.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    /// Length, width and height in meters.
    pub dims: Point,
    /// Energy absorption coefficient shared by all six surfaces, in `[0, 1]`.
    pub absorption: f64,
    pub speed_of_sound: f64,
}

impl RoomSpec {
    /// Room whose uniform absorption yields reverberation time `t60`
    /// (seconds, 0 for anechoic).
    pub fn with_t60(dims: Point, t60: f64) -> Result<Self> {
        if dims.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::InvalidConfig(format!("invalid room dimensions {dims:?}")));
        }
        if !(t60.is_finite() && t60 >= 0.0) {
            return Err(Error::InvalidConfig(format!("invalid T60 {t60}")));
        }
        Ok(Self {
            dims,
            absorption: absorption_for_t60(dims, t60, SPEED_OF_SOUND, RIR_LEN as f64 / crate::DEFAULT_SAMPLE_RATE as f64),
            speed_of_sound: SPEED_OF_SOUND,
        })
    }

    pub fn volume(&self) -> f64 {
        self.dims.iter().product()
    }

    pub fn surface(&self) -> f64 {
        let [l, w, h] = self.dims;
        2.0 * (l * w + l * h + w * h)
    }

    /// Pressure reflection coefficient `sqrt(1 - absorption)`.
    pub fn reflection(&self) -> f64 {
        (1.0 - self.absorption).max(0.0).sqrt()
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.iter().zip(&self.dims).all(|(x, d)| *x > 0.0 && x < d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ScenePreset {
    /// Random SNR and T60 as in the training corpus; 8 m ceilings.
    #[default]
    Train,
    /// SNR from the five test buckets and T60 from the four test classes.
    Test1,
    /// As `Test1` with a 3 m ceiling.
    Test2,
}

impl std::str::FromStr for ScenePreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Self::Train),
            "test1" | "test-i" => Ok(Self::Test1),
            "test2" | "test-ii" => Ok(Self::Test2),
            other => Err(Error::InvalidConfig(format!("unknown scene preset `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SceneOptions {
    pub preset: ScenePreset,
    /// Overrides the sampled SNR.
    pub snr_db: Option<f64>,
    /// Overrides the sampled T60.
    pub t60: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Speech,
    Noise,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub room: RoomSpec,
    pub mics: [Point; 2],
    pub speaker: Point,
    pub noise: Point,
    pub t60: f64,
    pub snr_db: f64,
    pub level_db: f64,
    pub seed: u64,
}

fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm(a: &Point) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn distance(a: &Point, b: &Point) -> f64 {
    norm(&sub(a, b))
}

impl SceneSpec {
    pub fn mic_center(&self) -> Point {
        let [a, b] = &self.mics;
        [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0, (a[2] + b[2]) / 2.0]
    }

    pub fn source(&self, kind: SourceKind) -> Point {
        match kind {
            SourceKind::Speech => self.speaker,
            SourceKind::Noise => self.noise,
        }
    }

    /// Angle in degrees between speaker and noise as seen from the mic-pair center.
    pub fn source_angle_deg(&self) -> f64 {
        let center = self.mic_center();
        let a = sub(&self.speaker, &center);
        let b = sub(&self.noise, &center);
        let cos = (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]) / (norm(&a) * norm(&b));
        cos.clamp(-1.0, 1.0).acos().to_degrees()
    }

    /// Every geometric and level constraint a sampled scene must satisfy.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        let center = self.mic_center();
        let spacing = distance(&self.mics[0], &self.mics[1]);
        if (spacing - MIC_SPACING).abs() > 1e-9 {
            return fail(format!("mic spacing {spacing} m"));
        }
        for m in &self.mics {
            if !(1.0..=1.5).contains(&m[2]) {
                return fail(format!("mic height {} m", m[2]));
            }
            if !self.room.contains(m) {
                return fail(format!("mic {m:?} outside room"));
            }
        }
        for (name, p, range) in [
            ("speaker", self.speaker, (0.5, 2.0)),
            ("noise", self.noise, (1.5, 2.0)),
        ] {
            if !self.room.contains(&p) {
                return fail(format!("{name} {p:?} outside room"));
            }
            if !(1.2..=1.9).contains(&p[2]) {
                return fail(format!("{name} height {} m", p[2]));
            }
            let d = distance(&p, &center);
            if !(range.0..=range.1).contains(&d) {
                return fail(format!("{name} distance {d} m"));
            }
        }
        if self.source_angle_deg() < MIN_SOURCE_ANGLE_DEG {
            return fail(format!("source angle {}°", self.source_angle_deg()));
        }
        if !(SNR_RANGE_DB.0..=SNR_RANGE_DB.1).contains(&self.snr_db) {
            return fail(format!("snr {} dB", self.snr_db));
        }
        if !(self.t60 == 0.0 || (0.2..=0.8).contains(&self.t60)) {
            return fail(format!("t60 {} s", self.t60));
        }
        Ok(())
    }
}

/// Training-preset scene for `seed`.
pub fn sample_scene(seed: u64) -> Result<SceneSpec> {
    sample_scene_with(seed, &SceneOptions::default())
}

fn place_source(
    rng: &mut ChaCha8Rng,
    room: &RoomSpec,
    center: &Point,
    dist_range: (f64, f64),
) -> Option<Point> {
    let d = rng.random_range(dist_range.0..=dist_range.1);
    let h = rng.random_range(1.2..=1.9);
    let dz = h - center[2];
    if dz.abs() > d {
        return None;
    }
    let r = (d * d - dz * dz).sqrt();
    let az = rng.random_range(0.0..std::f64::consts::TAU);
    let p = [center[0] + r * az.cos(), center[1] + r * az.sin(), h];
    room.contains(&p).then_some(p)
}

pub fn sample_scene_with(seed: u64, opts: &SceneOptions) -> Result<SceneSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let height = match opts.preset {
        ScenePreset::Train | ScenePreset::Test1 => 8.0,
        ScenePreset::Test2 => 3.0,
    };
    let t60 = match (opts.t60, opts.preset) {
        (Some(t), _) => t,
        (None, ScenePreset::Train) => {
            if rng.random_bool(ANECHOIC_SHARE) {
                0.0
            } else {
                rng.random_range(0.2..=0.8)
            }
        }
        (None, _) => TEST_T60_S[rng.random_range(0..TEST_T60_S.len())],
    };
    let snr_db = match (opts.snr_db, opts.preset) {
        (Some(s), _) => s,
        (None, ScenePreset::Train) => {
            let dist = Normal::new(5.0, 10.0).expect("valid normal");
            loop {
                let v: f64 = dist.sample(&mut rng);
                if (SNR_RANGE_DB.0..=SNR_RANGE_DB.1).contains(&v) {
                    break v;
                }
            }
        }
        (None, _) => SNR_BUCKETS_DB[rng.random_range(0..SNR_BUCKETS_DB.len())],
    };
    let level_db = Normal::new(-26.0, 10.0).expect("valid normal").sample(&mut rng);

    for _ in 0..MAX_ATTEMPTS {
        let dims = [rng.random_range(3.0..=8.0), rng.random_range(3.0..=8.0), height];
        let room = RoomSpec::with_t60(dims, t60)?;
        let center = [
            rng.random_range(dims[0] / 4.0..=3.0 * dims[0] / 4.0),
            rng.random_range(dims[1] / 4.0..=3.0 * dims[1] / 4.0),
            rng.random_range(1.0..=1.5),
        ];
        let theta = rng.random_range(0.0..std::f64::consts::PI);
        let half = [MIC_SPACING / 2.0 * theta.cos(), MIC_SPACING / 2.0 * theta.sin()];
        let mics = [
            [center[0] - half[0], center[1] - half[1], center[2]],
            [center[0] + half[0], center[1] + half[1], center[2]],
        ];
        let Some(speaker) = place_source(&mut rng, &room, &center, (0.5, 2.0)) else {
            continue;
        };
        let Some(noise) = place_source(&mut rng, &room, &center, (1.5, 2.0)) else {
            continue;
        };
        let scene = SceneSpec {
            room,
            mics,
            speaker,
            noise,
            t60,
            snr_db,
            level_db,
            seed,
        };
        if scene.validate().is_ok() {
            return Ok(scene);
        }
    }
    Err(Error::InfeasibleRoom {
        attempts: MAX_ATTEMPTS,
    })
}

/// Nearest test SNR bucket.
pub fn snr_bucket(snr_db: f64) -> f64 {
    SNR_BUCKETS_DB
        .iter()
        .copied()
        .min_by(|a, b| (a - snr_db).abs().total_cmp(&(b - snr_db).abs()))
        .expect("non-empty bucket list")
}

/// Reverberation class used when reporting: none, short, medium or long.
pub fn t60_class(t60: f64) -> &'static str {
    if t60 <= 0.0 {
        "none"
    } else if t60 < 0.4 {
        "short"
    } else if t60 < 0.665 {
        "medium"
    } else {
        "long"
    }
}

/// RIRs and mixture of a scene rendered with seeded synthetic sources.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedScene {
    pub mixture: Mixture,
    pub rir_speech: ImpulseResponsePair,
    pub rir_noise: ImpulseResponsePair,
}

/// Mono speech-like and noise-like sources of `len` samples drawn from a
/// stream of the scene's seed distinct from the geometry stream.
pub fn scene_sources(scene: &SceneSpec, len: usize) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(scene.seed);
    rng.set_stream(1);
    let fs = crate::DEFAULT_SAMPLE_RATE as f64;
    let speech = sources::speech_like(len, fs, &mut rng);
    let noise = sources::noise_like(len, fs, &mut rng);
    (speech, noise)
}

pub fn render_scene(scene: &SceneSpec, len: usize) -> Result<RenderedScene> {
    let (speech, noise) = scene_sources(scene, len);
    let rir_speech = simulate_rir(scene, SourceKind::Speech)?;
    let rir_noise = simulate_rir(scene, SourceKind::Noise)?;
    let mixture = mix_with_rirs(&speech, &noise, &rir_speech, &rir_noise, scene.snr_db, scene.level_db)?;
    Ok(RenderedScene {
        mixture,
        rir_speech,
        rir_noise,
    })
}
