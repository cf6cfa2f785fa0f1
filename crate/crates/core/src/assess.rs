//! Posterior summaries, posterior predictive draws and the
//! observed-versus-simulated distance.
//!
//! Component labels are not identifiable across iterations, so summaries
//! are organised around the modal partition: networks `i` and `j` share a
//! block when they were co-assigned in more than half of the retained
//! iterations (blocks are the connected components of that relation). In
//! each iteration every occupied component is mapped to the block holding
//! most of its members; its parameter counts as a draw for that block.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Covariates, Graph};
use crate::rng::{domain, Stream};
use crate::simulate::{simulate_ergm, simulate_stats, ChainLength};
use crate::stats::ModelSpec;
use crate::trace::{fmt_f64, TraceRecord};
use crate::Theta;

/// Posterior co-assignment frequencies `P(z_i = z_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoClusterMatrix {
    n: usize,
    values: Vec<f64>,
}

impl CoClusterMatrix {
    pub fn from_trace(trace: &[TraceRecord]) -> Result<Self> {
        let first = trace
            .first()
            .ok_or_else(|| Error::Domain("co-clustering needs at least one iteration".into()))?;
        let n = first.z.len();
        let mut counts = vec![0u64; n * n];
        for rec in trace {
            if rec.z.len() != n {
                return Err(Error::Domain("trace rows disagree on the number of networks".into()));
            }
            for i in 0..n {
                for j in 0..n {
                    if rec.z[i] == rec.z[j] {
                        counts[i * n + j] += 1;
                    }
                }
            }
        }
        let t = trace.len() as f64;
        Ok(CoClusterMatrix {
            n,
            values: counts.into_iter().map(|c| c as f64 / t).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.n.max(1))
    }

    /// Blocks of the relation `P(z_i = z_j) > threshold`, closed
    /// transitively. Labels are 1-based, numbered by first member.
    pub fn partition(&self, threshold: f64) -> Vec<usize> {
        let mut block = vec![0usize; self.n];
        let mut next = 0;
        for start in 0..self.n {
            if block[start] != 0 {
                continue;
            }
            next += 1;
            block[start] = next;
            let mut stack = vec![start];
            while let Some(i) = stack.pop() {
                for j in 0..self.n {
                    if block[j] == 0 && self.get(i, j) > threshold {
                        block[j] = next;
                        stack.push(j);
                    }
                }
            }
        }
        block
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in self.rows() {
            w.write_record(row.iter().map(|&x| fmt_f64(x)))?;
        }
        w.flush().map_err(|e| Error::io("<cocluster csv>", e))?;
        Ok(())
    }
}

/// Adjusted Rand index between two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut table: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut rows: BTreeMap<usize, u64> = BTreeMap::new();
    let mut cols: BTreeMap<usize, u64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let c2 = |k: u64| (k * k.saturating_sub(1) / 2) as f64;
    let index: f64 = table.values().map(|&k| c2(k)).sum();
    let sa: f64 = rows.values().map(|&k| c2(k)).sum();
    let sb: f64 = cols.values().map(|&k| c2(k)).sum();
    let total = c2(a.len() as u64);
    let expected = if total > 0.0 { sa * sb / total } else { 0.0 };
    let max = 0.5 * (sa + sb);
    if (max - expected).abs() < f64::EPSILON {
        // both labelings trivial (all singletons or one block)
        return if sa == sb { 1.0 } else { 0.0 };
    }
    (index - expected) / (max - expected)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub q025: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q975: f64,
}

/// Gaussian kernel density on an equally spaced grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Density {
    pub bandwidth: f64,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub quantiles: Quantiles,
    pub density: Density,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSummary {
    pub block: usize,
    pub members: Vec<usize>,
    /// Retained iterations contributing a parameter draw.
    pub draws: usize,
    pub coordinates: Vec<CoordinateSummary>,
    pub theta_mean: Theta,
    /// Fraction of accepted moves among attempted ones (`None` if none).
    pub acceptance_rate: Option<f64>,
    pub samples: Vec<Theta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub retained: usize,
    pub burn_in: usize,
    pub k_star_histogram: BTreeMap<usize, usize>,
    pub modal_k_star: usize,
    pub occupied_histogram: BTreeMap<usize, usize>,
    /// Block of each network in the modal partition (1-based).
    pub modal_assignment: Vec<usize>,
    /// `assignment_frequencies[i][b - 1]`: fraction of retained iterations in
    /// which network `i` sat in a component mapped to block `b`.
    pub assignment_frequencies: Vec<Vec<f64>>,
    pub blocks: Vec<BlockSummary>,
}

fn mode(hist: &BTreeMap<usize, usize>) -> usize {
    hist.iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(&k, _)| k)
        .unwrap_or(0)
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Silverman's rule: `0.9 min(sd, IQR/1.34) n^(-1/5)`.
pub fn silverman_bandwidth(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * n.powf(-0.2)
}

pub fn kernel_density(xs: &[f64], points: usize) -> Density {
    let bw = silverman_bandwidth(xs);
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min) - 3.0 * bw;
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0 * bw;
    let grid: Vec<f64> = (0..points)
        .map(|k| {
            if points > 1 {
                lo + (hi - lo) * k as f64 / (points - 1) as f64
            } else {
                lo
            }
        })
        .collect();
    let norm = 1.0 / (xs.len() as f64 * bw * (2.0 * std::f64::consts::PI).sqrt());
    let density = grid
        .iter()
        .map(|&g| {
            if bw > 0.0 {
                norm * xs.iter().map(|x| (-0.5 * ((g - x) / bw).powi(2)).exp()).sum::<f64>()
            } else {
                f64::NAN
            }
        })
        .collect();
    Density {
        bandwidth: bw,
        grid,
        density,
    }
}

fn summarize_coordinate(name: String, xs: &[f64]) -> CoordinateSummary {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    CoordinateSummary {
        name,
        mean,
        sd,
        quantiles: Quantiles {
            q025: quantile(&sorted, 0.025),
            q25: quantile(&sorted, 0.25),
            q50: quantile(&sorted, 0.5),
            q75: quantile(&sorted, 0.75),
            q975: quantile(&sorted, 0.975),
        },
        density: kernel_density(xs, 128),
    }
}

/// Summarises the iterations after the first `burn_in`. `names` labels the
/// parameter coordinates (defaults to `theta1, theta2, ...`).
pub fn summarize_trace(trace: &[TraceRecord], burn_in: usize, names: Option<&[String]>) -> Result<TraceSummary> {
    if burn_in >= trace.len() {
        return Err(Error::Domain(format!(
            "burn-in of {burn_in} leaves nothing of a {}-iteration trace",
            trace.len()
        )));
    }
    let kept = &trace[burn_in..];
    let cc = CoClusterMatrix::from_trace(kept)?;
    let blocks = cc.partition(0.5);
    let n_blocks = blocks.iter().copied().max().unwrap_or(0);
    let n = cc.len();

    let mut k_hist = BTreeMap::new();
    let mut occ_hist = BTreeMap::new();
    let mut freq = vec![vec![0.0; n_blocks]; n];
    let mut samples: Vec<Vec<Theta>> = vec![Vec::new(); n_blocks];
    let mut accepts = vec![(0usize, 0usize); n_blocks];
    for rec in kept {
        *k_hist.entry(rec.k_star).or_insert(0) += 1;
        *occ_hist.entry(rec.occupied()).or_insert(0) += 1;
        // best component per block this iteration: (members in block, label)
        let mut best: Vec<Option<(usize, usize)>> = vec![None; n_blocks];
        for comp in &rec.components {
            let mut per_block = vec![0usize; n_blocks];
            for i in (0..n).filter(|&i| rec.z[i] == comp.label) {
                per_block[blocks[i] - 1] += 1;
            }
            let b = (0..n_blocks)
                .max_by(|&x, &y| per_block[x].cmp(&per_block[y]).then(y.cmp(&x)))
                .unwrap_or(0);
            for i in (0..n).filter(|&i| rec.z[i] == comp.label) {
                freq[i][b] += 1.0;
            }
            if best[b].is_none_or(|(m, _)| per_block[b] > m) {
                best[b] = Some((per_block[b], comp.label));
            }
        }
        for (b, choice) in best.into_iter().enumerate() {
            if let Some((_, label)) = choice {
                let comp = rec.component(label).expect("label taken from this record");
                samples[b].push(comp.theta.clone());
                if let Some(a) = comp.accepted {
                    accepts[b].1 += 1;
                    accepts[b].0 += a as usize;
                }
            }
        }
    }
    let t = kept.len() as f64;
    freq.iter_mut().flatten().for_each(|f| *f /= t);

    let block_summaries = samples
        .into_iter()
        .enumerate()
        .filter(|(_, draws)| !draws.is_empty())
        .map(|(b, draws)| {
            let d = draws[0].len();
            let coordinates: Vec<CoordinateSummary> = (0..d)
                .map(|k| {
                    let xs: Vec<f64> = draws.iter().map(|s| s[k]).collect();
                    let name = names
                        .and_then(|ns| ns.get(k).cloned())
                        .unwrap_or_else(|| format!("theta{}", k + 1));
                    summarize_coordinate(name, &xs)
                })
                .collect();
            BlockSummary {
                block: b + 1,
                members: (0..n).filter(|&i| blocks[i] == b + 1).collect(),
                draws: draws.len(),
                theta_mean: coordinates.iter().map(|c| c.mean).collect(),
                coordinates,
                acceptance_rate: (accepts[b].1 > 0).then(|| accepts[b].0 as f64 / accepts[b].1 as f64),
                samples: draws,
            }
        })
        .collect();
    Ok(TraceSummary {
        retained: kept.len(),
        burn_in,
        modal_k_star: mode(&k_hist),
        k_star_histogram: k_hist,
        occupied_histogram: occ_hist,
        modal_assignment: blocks,
        assignment_frequencies: freq,
        blocks: block_summaries,
    })
}

/// Where posterior predictive parameters come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PpcMode {
    /// One network per posterior draw, taking every `stride`-th draw.
    FromSamples,
    /// All networks from one chain at the posterior mean.
    FromMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PpcConfig {
    pub mode: PpcMode,
    pub count: usize,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default)]
    pub chain: ChainLength,
    pub seed: u64,
}

fn default_stride() -> usize {
    50
}

/// Statistic vectors of `cfg.count` simulated networks. Chains start at
/// `template`. In from-samples mode `samples` must hold at least
/// `(count - 1) * stride + 1` draws; in from-mean mode their mean is used.
pub fn posterior_predictive(
    spec: &ModelSpec,
    samples: &[Theta],
    template: &Graph,
    cov: &Covariates,
    cfg: &PpcConfig,
) -> Result<Vec<Vec<f64>>> {
    if cfg.count == 0 {
        return Ok(Vec::new());
    }
    if samples.is_empty() {
        return Err(Error::Domain("no posterior draws".into()));
    }
    let root = Stream::new(cfg.seed).child(domain::ASSESS);
    let bound = spec.bind(cov, template.n(), template.is_directed())?;
    match cfg.mode {
        PpcMode::FromMean => {
            let d = samples[0].len();
            let mean: Theta = (0..d)
                .map(|k| samples.iter().map(|s| s[k]).sum::<f64>() / samples.len() as f64)
                .collect();
            spec.check_theta(&mean)?;
            let sim = cfg
                .chain
                .resolve(template.n(), template.is_directed(), root.child(1).seed())?;
            simulate_stats(&bound, &mean, template, cfg.count, &sim)
        }
        PpcMode::FromSamples => {
            let stride = cfg.stride.max(1);
            let needed = (cfg.count - 1) * stride + 1;
            if samples.len() < needed {
                return Err(Error::Domain(format!(
                    "{} draws at stride {stride} need {needed} posterior samples, have {}",
                    cfg.count,
                    samples.len()
                )));
            }
            (0..cfg.count)
                .into_par_iter()
                .map(|k| {
                    let theta = &samples[k * stride];
                    let sim = cfg.chain.resolve(
                        template.n(),
                        template.is_directed(),
                        root.child(2).child(k as u64).seed(),
                    )?;
                    let g = simulate_ergm(spec, theta, template, cov, 1, &sim)?;
                    bound.stats(&g[0])
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupDistance {
    pub group: usize,
    pub members: usize,
    pub distance: f64,
}

/// For each group `k`: `sum_{i : z_i = k} |S(y_i) - mean simulated S|^2`.
/// Groups without members or without simulated draws are skipped.
pub fn gof_distance(
    observed: &[Vec<f64>],
    groups: &[usize],
    simulated: &BTreeMap<usize, Vec<Vec<f64>>>,
) -> Result<Vec<GroupDistance>> {
    if observed.len() != groups.len() {
        return Err(Error::Domain("one group label per network required".into()));
    }
    let mut out = Vec::new();
    for (&k, sims) in simulated {
        let members: Vec<usize> = (0..groups.len()).filter(|&i| groups[i] == k).collect();
        if members.is_empty() || sims.is_empty() {
            log::warn!("group {k} has no members or no simulated networks; skipped");
            continue;
        }
        let d = sims[0].len();
        let mean: Vec<f64> = (0..d)
            .map(|c| sims.iter().map(|s| s[c]).sum::<f64>() / sims.len() as f64)
            .collect();
        let distance = members
            .iter()
            .map(|&i| observed[i].iter().zip(&mean).map(|(o, m)| (o - m).powi(2)).sum::<f64>())
            .sum();
        out.push(GroupDistance {
            group: k,
            members: members.len(),
            distance,
        });
    }
    Ok(out)
}

pub fn write_distance_csv<W: Write>(out: W, rows: &[GroupDistance]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["group", "members", "distance"])?;
    for r in rows {
        w.write_record([r.group.to_string(), r.members.to_string(), fmt_f64(r.distance)])?;
    }
    w.flush().map_err(|e| Error::io("<distance csv>", e))?;
    Ok(())
}

/// Rows `group,draw,<stat names...>`.
pub fn write_ppc_csv<W: Write>(out: W, names: &[String], draws: &BTreeMap<usize, Vec<Vec<f64>>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["group".to_owned(), "draw".to_owned()];
    header.extend(names.iter().cloned());
    w.write_record(&header)?;
    for (g, rows) in draws {
        for (k, s) in rows.iter().enumerate() {
            let mut rec = vec![g.to_string(), k.to_string()];
            rec.extend(s.iter().map(|&x| fmt_f64(x)));
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| Error::io("<ppc csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::ComponentRecord;

    fn record(iteration: usize, z: Vec<usize>, thetas: &[(usize, Theta)]) -> TraceRecord {
        let components = thetas
            .iter()
            .map(|(l, t)| ComponentRecord {
                label: *l,
                theta: t.clone(),
                occupancy: z.iter().filter(|&&x| x == *l).count(),
                accepted: Some(iteration % 2 == 0),
            })
            .collect();
        TraceRecord {
            iteration,
            k_star: z.iter().copied().max().unwrap(),
            z,
            components,
        }
    }

    #[test]
    fn constant_trace() {
        let trace: Vec<_> = (0..10)
            .map(|t| record(t, vec![1, 1, 1], &[(1, vec![-1.0, 0.5])]))
            .collect();
        let s = summarize_trace(&trace, 2, None).unwrap();
        assert_eq!(s.retained, 8);
        assert_eq!(s.blocks.len(), 1);
        assert_eq!(s.blocks[0].theta_mean, vec![-1.0, 0.5]);
        assert!(s.blocks[0].coordinates.iter().all(|c| c.sd == 0.0));
        assert_eq!(s.blocks[0].acceptance_rate, Some(0.5));
        assert!(summarize_trace(&trace, 10, None).is_err());
    }

    #[test]
    fn two_block_cocluster_pattern() {
        let trace: Vec<_> = (0..6)
            .map(|t| {
                // label switching between iterations
                let (a, b) = if t % 2 == 0 { (1, 2) } else { (2, 1) };
                record(t, vec![a, a, b, b], &[(1, vec![0.0]), (2, vec![1.0])])
            })
            .collect();
        let cc = CoClusterMatrix::from_trace(&trace).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expected = if (i < 2) == (j < 2) { 1.0 } else { 0.0 };
                assert_eq!(cc.get(i, j), expected);
            }
        }
        assert_eq!(cc.partition(0.5), vec![1, 1, 2, 2]);
        let s = summarize_trace(&trace, 0, None).unwrap();
        assert_eq!(s.modal_assignment, vec![1, 1, 2, 2]);
        assert_eq!(s.blocks[0].draws, 6);
        assert!((s.blocks[0].theta_mean[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ari_values() {
        assert_eq!(adjusted_rand_index(&[1, 1, 2, 2], &[2, 2, 1, 1]), 1.0);
        assert!(adjusted_rand_index(&[1, 1, 2, 2], &[1, 2, 1, 2]) < 0.0);
        assert_eq!(adjusted_rand_index(&[1, 1, 1], &[3, 3, 3]), 1.0);
    }

    #[test]
    fn distance_examples() {
        let mut sims = BTreeMap::new();
        sims.insert(1, vec![vec![8.0, 4.0]]);
        let d = gof_distance(&[vec![10.0, 5.0]], &[1], &sims).unwrap();
        assert_eq!(d[0].distance, 5.0);
        sims.insert(1, vec![vec![10.0, 5.0], vec![10.0, 5.0]]);
        assert_eq!(gof_distance(&[vec![10.0, 5.0]], &[1], &sims).unwrap()[0].distance, 0.0);
        sims.insert(2, vec![vec![0.0, 0.0]]);
        assert_eq!(gof_distance(&[vec![10.0, 5.0]], &[1], &sims).unwrap().len(), 1);
    }

    #[test]
    fn silverman_matches_hand_value() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        // sd = 1.5811, IQR/1.34 = 2/1.34 = 1.4925
        let expected = 0.9 * (2.0f64 / 1.34) * 5f64.powf(-0.2);
        assert!((silverman_bandwidth(&xs) - expected).abs() < 1e-12);
        let d = kernel_density(&xs, 400);
        let step = d.grid[1] - d.grid[0];
        let mass: f64 = d.density.iter().sum::<f64>() * step;
        assert!((mass - 1.0).abs() < 0.01);
    }

    #[test]
    fn zero_count_is_empty() {
        let spec = ModelSpec::new(vec![crate::stats::StatTerm::edges()]).unwrap();
        let g = Graph::empty(4, false).unwrap();
        let cfg = PpcConfig {
            mode: PpcMode::FromMean,
            count: 0,
            stride: 1,
            chain: ChainLength::default(),
            seed: 0,
        };
        assert!(posterior_predictive(&spec, &[vec![0.0]], &g, &Covariates::new(), &cfg)
            .unwrap()
            .is_empty());
    }
}
