//! The three subcommands: cluster, generate, bench.

use std::path::Path;
use std::time::Instant;

use serde_json::json;

use rpeclu_core::seeding::derive_seed;
use rpeclu_core::{
    adjusted_rand_index, kmeans_baseline, pipeline, scenario_table, simgen, HardPartition,
    RpecluConfig, RunOutput,
};

use crate::io::{
    read_matrix_csv, write_bench_tsv, write_dataset_csv, write_partition_csv, write_ranking_tsv,
    BenchRow,
};
use crate::{CliError, InputSource, RunManifest};

const DATASET_SEED_TAG: u64 = 0x4441_5441;
const RUN_SEED_TAG: u64 = 0x52_554e;
const KMEANS_BENCH_SEED_TAG: u64 = 0x4b4d;
const SCENARIO_SEED_TAG: u64 = 0x5343_454e;

fn with_thread_cap<T>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError>
where
    T: Send,
{
    match threads {
        None => Ok(f()),
        Some(t) => {
            if t == 0 {
                return Err(CliError::Config("--threads must be at least 1".into()));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| CliError::Runtime(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

struct PreparedInput {
    x: rpeclu_core::nalgebra::DMatrix<f64>,
    truth: Option<HardPartition>,
    description: serde_json::Value,
}

fn load_input(manifest: &RunManifest) -> Result<PreparedInput, CliError> {
    match &manifest.input {
        InputSource::CsvPath(path) => {
            let loaded = read_matrix_csv(path, manifest.truth_column.as_deref())?;
            let description = json!({
                "path": path.display().to_string(),
                "n": loaded.x.nrows(),
                "p": loaded.x.ncols(),
                "truth_column": manifest.truth_column,
            });
            Ok(PreparedInput { x: loaded.x, truth: loaded.truth, description })
        }
        InputSource::Scenario(id) => {
            let mut scenario = scenario_table(*id)?;
            scenario.seed = derive_seed(manifest.config.seed, SCENARIO_SEED_TAG, *id as u64);
            let data = simgen::generate(&scenario)?;
            let description = json!({
                "scenario": id,
                "n": data.x.nrows(),
                "p": data.x.ncols(),
                "dataset_seed": scenario.seed,
            });
            Ok(PreparedInput { x: data.x, truth: Some(data.truth), description })
        }
    }
}

fn diagnostics_json(
    manifest: &RunManifest,
    input: &serde_json::Value,
    output: &RunOutput,
    ari: Option<f64>,
    load_seconds: f64,
    run_seconds: f64,
) -> serde_json::Value {
    let cfg = &manifest.config;
    let resolved = &output.diagnostics.resolved;
    let skipped: Vec<serde_json::Value> = output
        .diagnostics
        .skipped
        .iter()
        .map(|s| json!({"projection_index": s.projection_index, "reason": s.reason}))
        .collect();
    json!({
        "input": input,
        "config": {
            "g": cfg.g,
            "d": resolved.d,
            "b": cfg.b,
            "b_star": cfg.b_star,
            "seed": cfg.seed,
            "gmm_cov": cfg.gmm_cov.to_string(),
            "reg_structure": cfg.reg_structure.to_string(),
            "reg_structure_used": resolved.regression.to_string(),
            "em": {"tol": cfg.em.tol, "max_iter": cfg.em.max_iter, "n_starts": cfg.em.n_starts},
            "threads": manifest.threads,
        },
        "ari": ari,
        "selected_diversity": output.diagnostics.selected_diversity.map(|d| {
            json!({"min": d.min, "mean": d.mean, "max": d.max})
        }),
        "n_scored": output.ranking.len(),
        "n_skipped": output.diagnostics.skipped.len(),
        "skipped": skipped,
        "timings": {
            "load_seconds": load_seconds,
            "run_seconds": run_seconds,
            "total_seconds": load_seconds + run_seconds,
        },
    })
}

/// Clusters the manifest's input and writes `partition.csv`, `ranking.tsv`
/// and `diagnostics.json` into the output directory.
pub fn cmd_cluster(manifest: &RunManifest) -> Result<(), CliError> {
    let load_start = Instant::now();
    let input = load_input(manifest)?;
    let load_seconds = load_start.elapsed().as_secs_f64();

    let run_start = Instant::now();
    let output = with_thread_cap(manifest.threads, || pipeline::run(&input.x, &manifest.config))??;
    let run_seconds = run_start.elapsed().as_secs_f64();

    let ari = match &input.truth {
        Some(truth) => Some(adjusted_rand_index(&output.partition, truth)?.ari),
        None => None,
    };

    std::fs::create_dir_all(&manifest.out_dir)?;
    write_partition_csv(&manifest.out_dir.join("partition.csv"), &output.partition)?;
    write_ranking_tsv(
        &manifest.out_dir.join("ranking.tsv"),
        &output.ranking,
        manifest.config.b_star,
    )?;
    let diag = diagnostics_json(manifest, &input.description, &output, ari, load_seconds, run_seconds);
    std::fs::write(
        manifest.out_dir.join("diagnostics.json"),
        serde_json::to_string_pretty(&diag).expect("diagnostics serialize") + "\n",
    )?;
    Ok(())
}

/// Generates a scenario dataset and writes it as CSV with a truth column.
pub fn cmd_generate(scenario: usize, seed: u64, out: &Path) -> Result<(), CliError> {
    let mut config = scenario_table(scenario)?;
    config.seed = seed;
    let data = simgen::generate(&config)?;
    write_dataset_csv(out, &data)?;
    Ok(())
}

/// Benchmark settings: which scenarios, how many replicates, and the
/// ensemble configuration applied to every run.
#[derive(Debug, Clone)]
pub struct BenchSpec {
    pub scenarios: Vec<usize>,
    pub replicates: usize,
    pub b: usize,
    pub b_star: usize,
    /// Projection dimension override; `None` derives from each scenario's g.
    pub d: Option<usize>,
    pub seed: u64,
    pub threads: Option<usize>,
    /// Restarts for the k-means baseline.
    pub kmeans_starts: usize,
}

/// Runs the ensemble and the k-means baseline over scenario replicates and
/// writes `bench.tsv` into `out_dir`.
pub fn cmd_bench(spec: &BenchSpec, out_dir: &Path) -> Result<(), CliError> {
    if spec.replicates == 0 {
        return Err(CliError::Config("--replicates must be at least 1".into()));
    }
    for &id in &spec.scenarios {
        scenario_table(id)?;
    }
    if spec.scenarios.is_empty() {
        return Err(CliError::Config("no scenarios given".into()));
    }

    let mut rows = Vec::with_capacity(spec.scenarios.len() * spec.replicates * 2);
    for &id in &spec.scenarios {
        for rep in 0..spec.replicates {
            let tagged = derive_seed(spec.seed, DATASET_SEED_TAG, id as u64);
            let mut scenario = scenario_table(id)?;
            scenario.seed = derive_seed(tagged, DATASET_SEED_TAG, rep as u64);
            let data = simgen::generate(&scenario)?;

            let mut config = RpecluConfig::new(scenario.g);
            config.b = spec.b;
            config.b_star = spec.b_star;
            config.d = spec.d;
            config.seed = derive_seed(derive_seed(spec.seed, RUN_SEED_TAG, id as u64), RUN_SEED_TAG, rep as u64);

            let start = Instant::now();
            let output = with_thread_cap(spec.threads, || pipeline::run(&data.x, &config))??;
            let seconds = start.elapsed().as_secs_f64();
            let ari = adjusted_rand_index(&output.partition, &data.truth)?.ari;
            rows.push(BenchRow { scenario: id, replicate: rep, method: "rpeclu", ari, seconds });

            let km_seed =
                derive_seed(derive_seed(spec.seed, KMEANS_BENCH_SEED_TAG, id as u64), KMEANS_BENCH_SEED_TAG, rep as u64);
            let start = Instant::now();
            let km = kmeans_baseline(&data.x, scenario.g, km_seed, spec.kmeans_starts)?;
            let seconds = start.elapsed().as_secs_f64();
            let ari = adjusted_rand_index(&km, &data.truth)?.ari;
            rows.push(BenchRow { scenario: id, replicate: rep, method: "kmeans", ari, seconds });
        }
    }

    std::fs::create_dir_all(out_dir)?;
    write_bench_tsv(&out_dir.join("bench.tsv"), &rows)?;
    Ok(())
}
