//! Population metrics, the connection-threshold sweep and its tabular export.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Network, SimConfig};
use crate::social::{DecayParams, MachineId};

pub const CSV_HEADER: &str = "c_th,mean_connections,std_connections,seeds,baseline_connections";

/// Live directed links per machine.
pub fn average_connections(net: &Network) -> f64 {
    net.link_count() as f64 / net.machines().len() as f64
}

/// Weakly connected components, treating links as undirected.
pub fn component_count(net: &Network) -> usize {
    let mut parent: Vec<usize> = (0..net.machines().len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut components = parent.len();
    for link in net.links() {
        let a = find(&mut parent, link.follower as usize);
        let b = find(&mut parent, link.followee as usize);
        if a != b {
            parent[a] = b;
            components -= 1;
        }
    }
    components
}

/// Non-social reference network: each machine holds `degree` immutable
/// outbound links to distinct, uniformly chosen targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedBaseline {
    pub degree: usize,
}

impl Default for FixedBaseline {
    fn default() -> Self {
        Self { degree: 50 }
    }
}

impl FixedBaseline {
    pub fn links(&self, machine_count: usize, seed: u64) -> Result<Vec<(MachineId, MachineId)>> {
        if machine_count == 0 || self.degree > machine_count - 1 {
            return Err(Error::InvalidSweep(format!(
                "baseline degree {} needs at least {} machines, got {machine_count}",
                self.degree,
                self.degree + 1
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(machine_count * self.degree);
        for i in 0..machine_count {
            // sample among the other machines, then skip over i
            for t in index::sample(&mut rng, machine_count - 1, self.degree) {
                let target = if t >= i { t + 1 } else { t };
                out.push((i as MachineId, target as MachineId));
            }
        }
        out.sort_unstable();
        Ok(out)
    }

    pub fn average_connections(&self, machine_count: usize, seed: u64) -> Result<f64> {
        Ok(self.links(machine_count, seed)?.len() as f64 / machine_count as f64)
    }
}

/// How a replica's run is reduced to one number.
///
/// Links formed in the same step expire together, so the live-link count
/// oscillates with period `link_expiry_step`. A single end-of-horizon sample
/// lands on a different phase of that cycle for every threshold; the time
/// average does not.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepStatistic {
    /// Average connections after the final step.
    HorizonEnd,
    /// Mean of average connections over the final half of the horizon.
    #[default]
    TimeAverage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub c_th: f64,
    pub mean_connections: f64,
    pub std_connections: f64,
    pub seeds: usize,
    pub baseline_connections: f64,
}

fn replica(config: &SimConfig, statistic: SweepStatistic) -> Result<f64> {
    let mut net = Network::new(config.clone())?;
    let trace = net.run(config.steps)?;
    Ok(match statistic {
        SweepStatistic::HorizonEnd => average_connections(&net),
        SweepStatistic::TimeAverage => {
            let n = trace.reports.len();
            let tail = &trace.reports[n / 2..];
            let m = trace.machine_count as f64;
            tail.iter().map(|r| r.live as f64 / m).sum::<f64>() / tail.len() as f64
        }
    })
}

/// Runs every `(threshold, seed)` replica of `base` and aggregates per
/// threshold. Results come back sorted by threshold.
pub fn threshold_sweep(
    base: &SimConfig,
    thresholds: &[f64],
    seeds: &[u64],
    baseline: FixedBaseline,
    statistic: SweepStatistic,
) -> Result<Vec<SweepResult>> {
    if thresholds.is_empty() {
        return Err(Error::InvalidSweep("no thresholds given".into()));
    }
    if seeds.is_empty() {
        return Err(Error::InvalidSweep("no seeds given".into()));
    }
    let mut thresholds = thresholds.to_vec();
    for &t in &thresholds {
        DecayParams::new(base.decay.a, t)?;
    }
    thresholds.sort_by(f64::total_cmp);
    base.validate()?;
    let baseline_connections = baseline.average_connections(base.machine_count, base.seed)?;

    let cells: Vec<(usize, u64)> = (0..thresholds.len())
        .flat_map(|t| seeds.iter().map(move |&s| (t, s)))
        .collect();
    let values = cells
        .par_iter()
        .map(|&(t, seed)| {
            let config = SimConfig {
                decay: DecayParams {
                    c_th: thresholds[t],
                    ..base.decay
                },
                seed,
                ..base.clone()
            };
            replica(&config, statistic)
        })
        .collect::<Result<Vec<f64>>>()?;

    Ok(thresholds
        .iter()
        .zip(values.chunks(seeds.len()))
        .map(|(&c_th, vals)| {
            let (mean, std) = mean_std(vals);
            SweepResult {
                c_th,
                mean_connections: mean,
                std_connections: std,
                seeds: vals.len(),
                baseline_connections,
            }
        })
        .collect())
}

/// Mean and sample standard deviation (0 for a single value).
fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Threshold at which the social curve first drops strictly below the
/// baseline, linearly interpolated between the bracketing sweep points.
pub fn crossover_threshold(sweep: &[SweepResult]) -> Result<Option<f64>> {
    if sweep.windows(2).any(|w| w[0].c_th > w[1].c_th) {
        return Err(Error::UnsortedSweep);
    }
    let gap = |r: &SweepResult| r.mean_connections - r.baseline_connections;
    let Some(k) = sweep.iter().position(|r| gap(r) < 0.0) else {
        return Ok(None);
    };
    if k == 0 {
        return Ok(Some(sweep[0].c_th));
    }
    let (lo, hi) = (&sweep[k - 1], &sweep[k]);
    let (g0, g1) = (gap(lo), gap(hi));
    Ok(Some(lo.c_th + g0 / (g0 - g1) * (hi.c_th - lo.c_th)))
}

/// Formats a real with 6 significant digits and a `.` decimal point,
/// trailing zeros trimmed.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_finite() {
            "0".into()
        } else {
            x.to_string()
        };
    }
    // round first so the exponent reflects carries like 9.999995 -> 10
    let sci = format!("{:.5e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    let decimals = (5 - exp).max(0) as usize;
    let rounded: f64 = format!("{mantissa}e{exp}").parse().expect("valid float");
    let mut s = format!("{rounded:.decimals$}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

pub fn to_csv(results: &[SweepResult]) -> String {
    let mut sorted = results.to_vec();
    sorted.sort_by(|a, b| a.c_th.total_cmp(&b.c_th));
    let mut out = String::with_capacity(64 * (sorted.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &sorted {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            format_sig6(r.c_th),
            format_sig6(r.mean_connections),
            format_sig6(r.std_connections),
            r.seeds,
            format_sig6(r.baseline_connections)
        );
    }
    out
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::Io {
        path: path.display().to_string(),
        cause: e.to_string(),
    })
}

/// Writes the sweep as CSV, overwriting `path`.
pub fn export_table(results: &[SweepResult], path: &Path) -> Result<()> {
    write_file(path, &to_csv(results))
}

pub fn export_json(results: &[SweepResult], path: &Path) -> Result<()> {
    let mut sorted = results.to_vec();
    sorted.sort_by(|a, b| a.c_th.total_cmp(&b.c_th));
    let mut text = serde_json::to_string_pretty(&sorted).expect("plain data serializes");
    text.push('\n');
    write_file(path, &text)
}
