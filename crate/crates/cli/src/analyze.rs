use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use stereo_aware::{image_params, opd, partition_bands, wav, StereoSignal, StftConfig, StftPlan};

use crate::failure::{emit, Failure, WithPath};
use crate::loss::align;
use crate::AnalyzeArgs;

pub fn read_input(path: &Path, upmix: bool) -> Result<StereoSignal, Failure> {
    let x = wav::read_stereo(path, upmix).at(path)?;
    if x.sample_rate() != stereo_aware::DEFAULT_SAMPLE_RATE {
        return Err(Failure::validation(format!(
            "{}: sample rate {} Hz, expected {} Hz",
            path.display(),
            x.sample_rate(),
            stereo_aware::DEFAULT_SAMPLE_RATE
        )));
    }
    Ok(x)
}

pub fn run(args: AnalyzeArgs) -> Result<(), Failure> {
    let cfg = StftConfig::default().with_crop(None);
    let bins = cfg.bins();
    if args.bands == 0 || bins % args.bands != 0 {
        return Err(Failure::validation(format!("--bands {} must divide {bins}", args.bands)));
    }
    let p = partition_bands(bins, bins / args.bands)?;
    let plan = StftPlan::new(cfg)?;

    let mut x = read_input(&args.input, args.upmix)?;
    let reference = match &args.reference {
        Some(path) => {
            let r = read_input(path, args.upmix)?;
            let (r, xx) = align(r, x, cfg.hop)?;
            x = xx;
            Some(plan.forward(&r)?)
        }
        None => None,
    };
    let spec = plan.forward(&x)?;
    let params = image_params(&spec, &p)?;
    let phase = match &reference {
        Some(r) => Some(opd(r, &spec, &p)?),
        None => None,
    };

    let doc = params.to_json(phase.as_ref());
    if let Some(path) = &args.csv {
        let f = File::create(path).at(path)?;
        params.write_csv(BufWriter::new(f), phase.as_ref()).at(path)?;
    }
    match &args.json {
        Some(path) => {
            let f = File::create(path).at(path)?;
            serde_json::to_writer(BufWriter::new(f), &doc).map_err(|e| Failure::io(path, e))?;
        }
        None if args.csv.is_none() => emit(&doc.to_string())?,
        None => {}
    }
    Ok(())
}
