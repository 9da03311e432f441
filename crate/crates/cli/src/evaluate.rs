use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use stereo_aware::eval::read_manifest;
use stereo_aware::{batch_evaluate, partition_bands, EvalTable, Method, StftConfig};

use crate::failure::{emit, Failure, WithPath, BATCH};
use crate::EvalArgs;

fn print_summary(table: &EvalTable) -> Result<(), Failure> {
    let mut text = format!(
        "{:<10} {:>6} {:>5} {:>9} {:>8} {:>8} {:>8} {:>8}",
        "method", "snr", "n", "sdr", "iid", "ipd", "ic", "opd"
    );
    for b in &table.buckets {
        text += &format!(
            "\n{:<10} {:>6.0} {:>5} {:>9.2} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            b.method, b.snr_bucket, b.count, b.sdr_mean, b.iid, b.ipd, b.ic, b.opd
        );
    }
    for f in &table.failures {
        eprintln!("failed {} / {}: {}", f.item, f.method, f.error);
    }
    emit(&text)
}

pub fn run(args: EvalArgs) -> Result<(), Failure> {
    let cfg = StftConfig::default().with_crop(None);
    let bins = cfg.bins();
    if args.bands == 0 || bins % args.bands != 0 {
        return Err(Failure::validation(format!("--bands {} must divide {bins}", args.bands)));
    }
    let p = partition_bands(bins, bins / args.bands)?;
    let entries = read_manifest(&args.manifest).at(&args.manifest)?;
    let base = args.manifest.parent().unwrap_or(Path::new("."));

    let mut methods = vec![Method::Noisy];
    if args.oracle {
        methods.push(Method::Oracle);
    }
    if let Some(dir) = &args.est {
        methods.push(Method::Directory {
            label: args.label.clone(),
            dir: dir.clone(),
        });
    }
    let table = batch_evaluate(&entries, base, &methods, &cfg, &p)?;

    if let Some(path) = &args.out {
        let f = File::create(path).at(path)?;
        serde_json::to_writer_pretty(BufWriter::new(f), &table.to_json()).map_err(|e| Failure::io(path, e))?;
    }
    if let Some(path) = &args.csv {
        let f = File::create(path).at(path)?;
        table.write_csv(BufWriter::new(f)).at(path)?;
    }
    print_summary(&table)?;
    if table.all_failed() {
        return Err(Failure::new(BATCH, format!("all {} rows failed", table.failures.len())));
    }
    for m in &methods[1..] {
        if !entries.is_empty() && table.rows_for(m.label()).next().is_none() {
            return Err(Failure::new(BATCH, format!("every `{}` row failed", m.label())));
        }
    }
    Ok(())
}
