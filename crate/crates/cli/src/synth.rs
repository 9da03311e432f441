use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use stereo_aware::eval::write_manifest;
use stereo_aware::wav::{self, SampleFormat};
use stereo_aware::{render_scene, sample_scene_with, ManifestEntry, SceneOptions, ScenePreset, SceneSpec};

use crate::failure::{emit, Failure, WithPath};
use crate::SynthArgs;

const FILES: [&str; 5] = ["clean", "noise", "mix", "rir_speech", "rir_noise"];

fn write_scene(dir: &Path, id: &str, scene: &SceneSpec, len: usize) -> Result<ManifestEntry, Failure> {
    let rendered = render_scene(scene, len)?;
    let scene_dir = dir.join(id);
    fs::create_dir_all(&scene_dir).at(&scene_dir)?;
    let m = &rendered.mixture;
    for (name, x) in [("clean", &m.s), ("noise", &m.n), ("mix", &m.y)] {
        let path = scene_dir.join(format!("{name}.wav"));
        wav::write_stereo(&path, x, SampleFormat::Float32).map_err(|e| Failure::io(&path, e))?;
    }
    for (name, rir) in [("rir_speech", &rendered.rir_speech), ("rir_noise", &rendered.rir_noise)] {
        let path = scene_dir.join(format!("{name}.wav"));
        let ch = [rir.channels[0].as_slice(), rir.channels[1].as_slice()];
        wav::write(&path, &ch, rir.sample_rate, SampleFormat::Float32).map_err(|e| Failure::io(&path, e))?;
    }
    let path = scene_dir.join("scene.json");
    let text = serde_json::to_string_pretty(scene).expect("scene serializes");
    fs::write(&path, text + "\n").at(&path)?;

    let rel = |name: &str| format!("{id}/{name}.wav");
    Ok(ManifestEntry {
        id: id.to_string(),
        scene: format!("{id}/scene.json"),
        clean: rel(FILES[0]),
        noise: rel(FILES[1]),
        mix: rel(FILES[2]),
        rir_speech: rel(FILES[3]),
        rir_noise: rel(FILES[4]),
        snr_db: scene.snr_db,
        t60: scene.t60,
    })
}

pub fn run(args: SynthArgs) -> Result<(), Failure> {
    let preset: ScenePreset = args.preset.parse()?;
    if !(args.duration.is_finite() && args.duration > 0.0 && args.duration <= 600.0) {
        return Err(Failure::validation(format!("--duration {} must be in (0, 600] seconds", args.duration)));
    }
    let len = (args.duration * stereo_aware::DEFAULT_SAMPLE_RATE as f64).round() as usize;
    if len == 0 {
        return Err(Failure::validation("--duration is shorter than one sample"));
    }
    let opts = SceneOptions {
        preset,
        ..SceneOptions::default()
    };

    let mut seeds = ChaCha8Rng::seed_from_u64(args.seed);
    let scenes: Vec<(String, SceneSpec)> = (0..args.scenes)
        .map(|i| Ok((format!("scene{i:05}"), sample_scene_with(seeds.next_u64(), &opts)?)))
        .collect::<Result<_, Failure>>()?;

    fs::create_dir_all(&args.out).at(&args.out)?;
    let entries: Vec<ManifestEntry> = scenes
        .par_iter()
        .map(|(id, scene)| write_scene(&args.out, id, scene, len))
        .collect::<Result<_, Failure>>()?;

    let path = args.out.join("manifest.jsonl");
    let f = File::create(&path).at(&path)?;
    write_manifest(BufWriter::new(f), &entries).at(&path)?;
    emit(&format!("wrote {} scenes to {}", entries.len(), args.out.display()))
}
