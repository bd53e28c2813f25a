//! `bench <spec.toml>`.

use std::path::PathBuf;

use qrf_core::bench::{run_experiment, ExperimentSpec};

use crate::config::{decode, load_table};
use crate::error::CliResult;
use crate::manifest::RunManifest;
use crate::BenchArgs;

pub fn bench(args: &BenchArgs, threads: usize) -> CliResult<()> {
    let table = load_table(Some(&args.spec), &args.overrides)?;
    let spec: ExperimentSpec = decode(&table)?;
    spec.validate()?;
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from("results").join(&spec.name));
    let mut manifest = RunManifest::new("bench", threads).with_config(&table);
    manifest.input(&args.spec)?;
    manifest.seeds = spec.seeds.clone();

    std::fs::create_dir_all(&out)?;
    let work = out.join("work");
    std::fs::create_dir_all(&work)?;
    let report = run_experiment(&spec, &work)?;
    std::fs::remove_dir_all(&work).ok();
    report.write(&out)?;
    for entry in std::fs::read_dir(&out)? {
        let p = entry?.path();
        if p.is_file() {
            manifest.output(p);
        }
    }
    manifest.outputs.sort();
    for metric in report.metrics() {
        for (method, curve) in report.curves(&metric) {
            let pts: Vec<String> = curve.iter().map(|(x, y)| format!("{x}:{y:.4}")).collect();
            println!("{method:>14} {metric:<8} {}", pts.join("  "));
        }
    }
    println!("results in {}", out.display());
    manifest.write_dir(&out)?;
    Ok(())
}
