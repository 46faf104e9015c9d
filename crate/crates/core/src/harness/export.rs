use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::{ExperimentSummary, Manifest, Method};
use crate::error::{Error, Result};
use crate::optimize::RunTrace;
use crate::rng::RngSeed;

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>) -> Result<()> {
    let mut w = create(path)?;
    f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

/// `traces/{method}_seed{seed}.csv` under `dir`.
pub fn write_trace(dir: &Path, method: Method, seed: RngSeed, trace: &RunTrace) -> Result<()> {
    let path = dir.join("traces").join(format!("{}_seed{}.csv", method.name(), seed.0));
    write_with(&path, |w| trace.write_csv(w))
}

#[derive(Serialize)]
struct ChosenSubset<'a> {
    method: &'a str,
    seed: RngSeed,
    value: f64,
    subset: &'a [usize],
}

/// Writes the manifest, and for every method its traces, the aggregate
/// curves, per-seed final values, the chosen subsets and the populations.
pub fn export_summary(summary: &ExperimentSummary, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest_path = dir.join("manifest.json");
    let manifest = serde_json::to_string_pretty(&Manifest::new(&summary.config))
        .map_err(|source| Error::Json { path: manifest_path.clone(), source })?;
    write_with(&manifest_path, |w| writeln!(w, "{manifest}"))?;
    if summary.methods.is_empty() {
        return Ok(());
    }

    for ms in &summary.methods {
        for run in &ms.runs {
            write_trace(dir, ms.method, run.seed, &run.trace)?;
        }
    }

    write_with(&dir.join("aggregate.csv"), |w| {
        writeln!(w, "eval_index,method,median,q25,q75")?;
        for ms in &summary.methods {
            for i in 0..ms.band.median.len() {
                writeln!(w, "{},{},{},{},{}", i + 1, ms.method, ms.band.median[i], ms.band.q25[i], ms.band.q75[i])?;
            }
        }
        Ok(())
    })?;

    write_with(&dir.join("final_best.csv"), |w| {
        writeln!(w, "method,seed,final_best")?;
        for ms in &summary.methods {
            for (run, v) in ms.runs.iter().zip(ms.final_best()) {
                writeln!(w, "{},{},{}", ms.method, run.seed.0, v)?;
            }
        }
        Ok(())
    })?;

    let chosen: Vec<ChosenSubset> = summary
        .methods
        .iter()
        .flat_map(|ms| {
            ms.runs.iter().filter_map(move |run| {
                run.best_subset().map(|(s, value)| ChosenSubset {
                    method: ms.method.name(),
                    seed: run.seed,
                    value,
                    subset: s.indices(),
                })
            })
        })
        .collect();
    let subsets_path = dir.join("subsets.json");
    let text = serde_json::to_string_pretty(&chosen)
        .map_err(|source| Error::Json { path: subsets_path.clone(), source })?;
    write_with(&subsets_path, |w| writeln!(w, "{text}"))?;

    for (seed, pop) in &summary.populations {
        pop.write_csv(dir.join(format!("population_seed{}.csv", seed.0)), true)?;
    }
    Ok(())
}
