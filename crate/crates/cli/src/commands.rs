use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde_json::json;

use dpm_ergm::assess::{
    gof_distance, posterior_predictive, summarize_trace, write_distance_csv, write_ppc_csv, CoClusterMatrix, PpcConfig,
    TraceSummary,
};
use dpm_ergm::dpm::{Context, Likelihood, Sampler, TrueLikelihood};
use dpm_ergm::graph::{load_ensemble, save_json_bundle, CovariateSet, Covariates, Ensemble, Graph};
use dpm_ergm::pseudo::PseudoLikelihood;
use dpm_ergm::ratio::{sweep_estimator, write_sweep_csv, SweepPlan};
use dpm_ergm::rng::{domain, Stream};
use dpm_ergm::simulate::simulate_ergm;
use dpm_ergm::stats::TermKind;
use dpm_ergm::synth::generate;
use dpm_ergm::trace::{fmt_f64, read_trace_csv, TraceRecord, TraceWriter};
use dpm_ergm::ModelSpec;

use crate::config::{AssessConfig, DataRef, FitConfig, RatioSweepConfig, RunConfig, SimulateConfig, SynthConfig};
use crate::manifest::Recorder;
use crate::CliError;

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Run(dpm_ergm::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    let path = dir.join(name);
    File::create(&path).map(BufWriter::new).map_err(|e| io_err(&path, e))
}

fn write_json<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let mut out = create(dir, name)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| CliError::Run(e.into()))?;
    writeln!(out)
        .and_then(|_| out.flush())
        .map_err(|e| io_err(&dir.join(name), e))
}

/// Runs `body` and records the outcome in `manifest.json`.
fn recorded<C: RunConfig>(
    command: &str,
    cfg: &C,
    workers: usize,
    body: impl FnOnce(&mut Recorder) -> Result<(), CliError>,
) -> Result<(), CliError> {
    let dir = cfg.output_dir();
    prepare_dir(dir)?;
    let mut rec = Recorder::start(command, cfg, cfg.seed(), workers)?;
    let result = body(&mut rec);
    rec.finish(dir, result)
}

fn load(data: &DataRef) -> Result<Ensemble, CliError> {
    Ok(load_ensemble(&data.path, data.format)?)
}

/// Template graph and covariates: graph `index` of the data, or an empty graph.
fn template(
    data: &Option<DataRef>,
    index: usize,
    n: Option<usize>,
    directed: bool,
) -> Result<(Graph, Covariates), CliError> {
    match data {
        Some(d) => {
            let ens = load(d)?;
            if index >= ens.len() {
                return Err(CliError::Config(format!(
                    "template_index {index} out of range for {} graphs",
                    ens.len()
                )));
            }
            Ok((ens.graph(index).clone(), ens.covariates(index).clone()))
        }
        None => Ok((Graph::empty(n.unwrap_or(0), directed)?, Covariates::new())),
    }
}

pub fn synth(command: &str, cfg: SynthConfig, workers: usize) -> Result<(), CliError> {
    recorded(command, &cfg, workers, |rec| {
        let ens = generate(&cfg.mixture, &cfg.chain)?;
        save_json_bundle(&cfg.output_dir.join("ensemble.json"), &ens)?;
        rec.output("ensemble.json");
        let mut sizes = BTreeMap::new();
        for &z in ens.truth().unwrap_or(&[]) {
            *sizes.entry(z).or_insert(0usize) += 1;
        }
        rec.notes(json!({ "component_sizes": sizes }));
        Ok(())
    })
}

fn stats_header(spec: &ModelSpec, first: &str) -> Vec<String> {
    std::iter::once(first.to_owned()).chain(spec.names()).collect()
}

pub fn simulate(command: &str, cfg: SimulateConfig, workers: usize) -> Result<(), CliError> {
    recorded(command, &cfg, workers, |rec| {
        let (start, cov) = template(&cfg.data, cfg.template_index, cfg.n, cfg.directed)?;
        let sim = cfg.chain.resolve(start.n(), start.is_directed(), cfg.seed)?;
        let graphs = simulate_ergm(&cfg.model, &cfg.theta, &start, &cov, cfg.count, &sim)?;
        let bound = cfg.model.bind(&cov, start.n(), start.is_directed())?;
        let mut w = csv::Writer::from_writer(create(&cfg.output_dir, "stats.csv")?);
        w.write_record(stats_header(&cfg.model, "draw"))
            .map_err(dpm_ergm::Error::from)?;
        for (k, g) in graphs.iter().enumerate() {
            let s = bound.stats(g)?;
            let row: Vec<String> = std::iter::once(k.to_string())
                .chain(s.iter().map(|&x| fmt_f64(x)))
                .collect();
            w.write_record(&row).map_err(dpm_ergm::Error::from)?;
        }
        w.flush().map_err(|e| io_err(&cfg.output_dir.join("stats.csv"), e))?;
        rec.output("stats.csv");
        if cfg.save_graphs && !graphs.is_empty() {
            let ens = Ensemble::new(graphs, CovariateSet::Shared(cov))?;
            save_json_bundle(&cfg.output_dir.join("graphs.json"), &ens)?;
            rec.output("graphs.json");
        }
        Ok(())
    })
}

pub fn ratio_sweep(command: &str, cfg: RatioSweepConfig, workers: usize) -> Result<(), CliError> {
    recorded(command, &cfg, workers, |rec| {
        let (start, cov) = template(&cfg.data, cfg.template_index, cfg.n, cfg.directed)?;
        let plan = SweepPlan {
            theta: cfg.theta.clone(),
            theta_prime: cfg.theta_prime.clone(),
            m1_grid: cfg.m1_grid.clone(),
            m2_grid: cfg.m2_grid.clone(),
            replications: cfg.replications,
            chain: cfg.chain,
            seed: cfg.seed,
        };
        let rows = sweep_estimator(&cfg.model, &start, &cov, &plan)?;
        write_sweep_csv(create(&cfg.output_dir, "sweep.csv")?, &rows)?;
        rec.output("sweep.csv");
        rec.notes(
            json!({ "rows": rows.len(), "exact_available": rows.first().is_some_and(|r| r.log_exact.is_some()) }),
        );
        Ok(())
    })
}

/// Per-label acceptance rates over the whole run.
fn label_acceptance(trace: &[TraceRecord]) -> serde_json::Value {
    let mut counts: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for rec in trace {
        for c in &rec.components {
            if let Some(a) = c.accepted {
                let e = counts.entry(c.label).or_default();
                e.0 += a as usize;
                e.1 += 1;
            }
        }
    }
    counts
        .into_iter()
        .map(|(l, (a, t))| (l.to_string(), json!({ "attempts": t, "rate": a as f64 / t as f64 })))
        .collect::<serde_json::Map<_, _>>()
        .into()
}

fn block_acceptance(summary: &TraceSummary) -> serde_json::Value {
    summary
        .blocks
        .iter()
        .map(|b| (b.block.to_string(), json!(b.acceptance_rate)))
        .collect::<serde_json::Map<_, _>>()
        .into()
}

fn write_summaries(
    dir: &Path,
    rec: &mut Recorder,
    summary: &TraceSummary,
    kept: &[TraceRecord],
) -> Result<(), CliError> {
    write_json(dir, "summary.json", summary)?;
    rec.output("summary.json");
    CoClusterMatrix::from_trace(kept)?.write_csv(create(dir, "cocluster.csv")?)?;
    rec.output("cocluster.csv");
    Ok(())
}

fn sample<L: Likelihood>(
    ctx: &Context<'_>,
    lik: L,
    cfg: &FitConfig,
    out: &mut TraceWriter<BufWriter<File>>,
    trace: &mut Vec<TraceRecord>,
) -> Result<(), CliError> {
    let mut sampler = Sampler::new(ctx, lik, &cfg.dpm)?;
    sampler.run(|r| {
        out.write(r)?;
        trace.push(r.clone());
        Ok(())
    })?;
    Ok(())
}

pub fn fit(command: &str, cfg: FitConfig, workers: usize, pseudo: bool) -> Result<(), CliError> {
    recorded(command, &cfg, workers, |rec| {
        let ens = load(&cfg.data)?;
        let ctx = Context::new(&ens, &cfg.model)?;
        let mut out = TraceWriter::new(create(&cfg.output_dir, "trace.csv")?)?;
        rec.output("trace.csv");
        let mut trace = Vec::with_capacity(cfg.dpm.iterations);
        let result = if pseudo {
            sample(&ctx, PseudoLikelihood::new(&ctx)?, &cfg, &mut out, &mut trace)
        } else {
            sample(&ctx, TrueLikelihood::from_config(&cfg.dpm), &cfg, &mut out, &mut trace)
        };
        // keep whatever was sampled, even after a failure
        out.finish()?;
        let mut acceptance = json!({ "by_label": label_acceptance(&trace), "iterations_completed": trace.len() });
        result?;
        let summary = summarize_trace(&trace, cfg.dpm.burn_in, Some(&cfg.model.names()))?;
        acceptance["by_block"] = block_acceptance(&summary);
        rec.acceptance(acceptance);
        write_summaries(&cfg.output_dir, rec, &summary, &trace[cfg.dpm.burn_in..])
    })
}

/// Index of the `edges` term, if the model has one.
fn edges_index(spec: &ModelSpec) -> Option<usize> {
    spec.terms().iter().position(|t| t.kind == TermKind::Edges)
}

pub fn assess(command: &str, cfg: AssessConfig, workers: usize) -> Result<(), CliError> {
    recorded(command, &cfg, workers, |rec| {
        let ens = load(&cfg.data)?;
        let trace_file = File::open(&cfg.trace).map_err(|e| io_err(&cfg.trace, e))?;
        let trace = read_trace_csv(trace_file)?;
        if trace.first().is_some_and(|r| r.z.len() != ens.len()) {
            return Err(CliError::Config(
                "trace and data disagree on the number of networks".into(),
            ));
        }
        let summary = summarize_trace(&trace, cfg.burn_in, Some(&cfg.model.names()))?;
        rec.acceptance(
            json!({ "by_label": label_acceptance(&trace[cfg.burn_in..]), "by_block": block_acceptance(&summary) }),
        );
        write_summaries(&cfg.output_dir, rec, &summary, &trace[cfg.burn_in..])?;

        let root = Stream::new(cfg.ppc.seed).child(domain::ASSESS);
        let mut draws = BTreeMap::new();
        for b in &summary.blocks {
            let first = b.members[0];
            let ppc = PpcConfig {
                seed: root.child(b.block as u64).seed(),
                ..cfg.ppc
            };
            let stats = posterior_predictive(&cfg.model, &b.samples, ens.graph(first), ens.covariates(first), &ppc)?;
            draws.insert(b.block, stats);
        }
        write_ppc_csv(create(&cfg.output_dir, "ppc_stats.csv")?, &cfg.model.names(), &draws)?;
        rec.output("ppc_stats.csv");

        let observed: Vec<Vec<f64>> = (0..ens.len())
            .map(|i| {
                cfg.model
                    .bind(ens.covariates(i), ens.n(), ens.is_directed())?
                    .stats(ens.graph(i))
            })
            .collect::<dpm_ergm::Result<_>>()?;
        let distances = gof_distance(&observed, &summary.modal_assignment, &draws)?;
        write_distance_csv(create(&cfg.output_dir, "distance.csv")?, &distances)?;
        rec.output("distance.csv");

        if let Some(k) = edges_index(&cfg.model) {
            let full = ens.graph(0).dyad_count() as f64;
            let counts: BTreeMap<String, usize> = draws
                .iter()
                .map(|(b, rows)| (b.to_string(), rows.iter().filter(|s| s[k] == full).count()))
                .collect();
            rec.notes(json!({ "complete_graph_draws": counts }));
        }
        Ok(())
    })
}
