//! Synthetic data generator: an overlapping-community graph with per-group
//! periodic node signals, amplitude-scaled and noised to a target SNR.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::graph::Graph;

/// How the target signal-to-noise power ratio is expressed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnrScale {
    Linear,
    Db,
}

/// Base waveform family for the per-group signals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Waveform {
    /// Random-phase sinusoid mixture at the planted period.
    Sinusoid,
    /// Random mixture of Ramanujan atoms of the planted period.
    Ramanujan,
}

/// Generator parameters. Defaults: 7 groups of 25 nodes (n = 175), t = 200,
/// 10% of nodes joining a second group, edge probabilities 0.5 within and
/// 0.05 across groups, periods cycling {3, 5, 7}, amplitudes uniform in
/// [1, 10], linear SNR 10.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSpec {
    pub n_groups: usize,
    pub nodes_per_group: usize,
    pub overlap_fraction: f64,
    pub p_in: f64,
    pub p_out: f64,
    /// Planted period per group, cycled when shorter than `n_groups`.
    pub periods: Vec<usize>,
    pub t: usize,
    pub amplitude_range: (f64, f64),
    /// Signal-to-noise power ratio; `f64::INFINITY` disables noise.
    pub snr: f64,
    pub snr_scale: SnrScale,
    pub waveform: Waveform,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_groups: 7,
            nodes_per_group: 25,
            overlap_fraction: 0.10,
            p_in: 0.5,
            p_out: 0.05,
            periods: vec![3, 5, 7],
            t: 200,
            amplitude_range: (1.0, 10.0),
            snr: 10.0,
            snr_scale: SnrScale::Linear,
            waveform: Waveform::Sinusoid,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn node_count(&self) -> usize {
        self.n_groups * self.nodes_per_group
    }

    /// Planted period of group `g`.
    pub fn group_period(&self, g: usize) -> usize {
        self.periods[g % self.periods.len()]
    }

    /// SNR as a linear power ratio.
    pub fn linear_snr(&self) -> f64 {
        match self.snr_scale {
            SnrScale::Linear => self.snr,
            SnrScale::Db => 10.0_f64.powf(self.snr / 10.0),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.n_groups == 0 || self.nodes_per_group == 0 {
            return Err("n_groups and nodes_per_group must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.overlap_fraction) {
            return Err(format!("overlap_fraction {} outside [0,1]", self.overlap_fraction));
        }
        for (name, p) in [("p_in", self.p_in), ("p_out", self.p_out)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name} {p} outside [0,1]"));
            }
        }
        if self.periods.is_empty() || self.periods.contains(&0) {
            return Err("periods must be nonempty and >= 1".into());
        }
        if self.t == 0 {
            return Err("t must be positive".into());
        }
        if self.amplitude_range.0 >= self.amplitude_range.1 {
            return Err(format!(
                "amplitude range ({}, {}) must have low < high",
                self.amplitude_range.0, self.amplitude_range.1
            ));
        }
        if !(self.snr > 0.0) {
            return Err(format!("snr {} must be positive", self.snr));
        }
        Ok(())
    }
}

fn rng_for(spec: &SynthSpec, stream: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(spec.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(stream))
}

/// Planted-partition graph with overlapping groups.
///
/// Every node gets a primary group (its truth label); an `overlap_fraction`
/// share of nodes additionally joins one other group. Edges appear with
/// probability `p_in` between nodes sharing any group and `p_out` otherwise.
pub fn gen_graph(spec: &SynthSpec) -> (Graph, Vec<usize>) {
    spec.validate().expect("invalid synth spec");
    let n = spec.node_count();
    let labels: Vec<usize> = (0..n).map(|i| i / spec.nodes_per_group).collect();

    let mut memberships: Vec<Vec<usize>> = labels.iter().map(|&g| vec![g]).collect();
    let mut rng = rng_for(spec, 1);
    let n_overlap = (spec.overlap_fraction * n as f64).floor() as usize;
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(&mut rng);
    for &node in ids.iter().take(n_overlap) {
        if spec.n_groups < 2 {
            break;
        }
        let extra = loop {
            let g = rng.random_range(0..spec.n_groups);
            if g != labels[node] {
                break g;
            }
        };
        memberships[node].push(extra);
    }

    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let shared = memberships[u].iter().any(|g| memberships[v].contains(g));
            let p = if shared { spec.p_in } else { spec.p_out };
            if rng.random::<f64>() < p {
                edges.push((u, v, 1.0));
            }
        }
    }
    let graph = Graph::new(n, &edges).expect("generated edges are valid");
    (graph, labels)
}

/// Per-group periodic time series, shared by group members up to an
/// independent uniform amplitude per node, plus Gaussian noise scaled so the
/// empirical signal power over noise power matches the requested SNR.
pub fn gen_signal(_graph: &Graph, labels: &[usize], spec: &SynthSpec) -> DMatrix<f64> {
    spec.validate().expect("invalid synth spec");
    let n = labels.len();
    let t = spec.t;
    let mut rng = rng_for(spec, 2);

    let bases: Vec<Vec<f64>> = (0..spec.n_groups)
        .map(|g| group_waveform(spec, spec.group_period(g), &mut rng))
        .collect();

    let amp = Uniform::new(spec.amplitude_range.0, spec.amplitude_range.1).unwrap();
    let mut x = DMatrix::zeros(n, t);
    for (i, &g) in labels.iter().enumerate() {
        let scale = amp.sample(&mut rng);
        for j in 0..t {
            x[(i, j)] = scale * bases[g][j];
        }
    }

    let snr = spec.linear_snr();
    if snr.is_finite() {
        let power = x.iter().map(|v| v * v).sum::<f64>() / (n * t) as f64;
        let sigma = (power / snr).sqrt();
        if sigma > 0.0 {
            let noise = Normal::new(0.0, sigma).unwrap();
            for j in 0..t {
                for i in 0..n {
                    x[(i, j)] += noise.sample(&mut rng);
                }
            }
        }
    }
    x
}

/// One group's base series: 1–3 components at the planted period, always
/// including the fundamental so the overall period stays exactly `period`.
fn group_waveform(spec: &SynthSpec, period: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let t = spec.t;
    match spec.waveform {
        Waveform::Sinusoid => {
            let n_extra = rng.random_range(0..=2usize);
            let mut components = vec![(1usize, 1.0, rng.random_range(0.0..std::f64::consts::TAU))];
            // Skip harmonics that are multiples of the period: those
            // degenerate to constants and would plant a spurious offset.
            let extras: Vec<usize> = (2..).filter(|h| h % period != 0).take(n_extra).collect();
            for h in extras {
                components.push((h, rng.random_range(0.2..0.8), rng.random_range(0.0..std::f64::consts::TAU)));
            }
            (0..t)
                .map(|j| {
                    components
                        .iter()
                        .map(|&(h, a, phase)| {
                            a * (std::f64::consts::TAU * (h * j) as f64 / period as f64 + phase)
                                .sin()
                        })
                        .sum()
                })
                .collect()
        }
        Waveform::Ramanujan => {
            // Mix of circulant rows of the planted period's Ramanujan block.
            let dict = crate::dict::build_ramanujan(t, period).expect("period <= t");
            let rows: Vec<usize> = (0..dict.atom_count())
                .filter(|&i| dict.atom_period(i) == Some(period))
                .collect();
            let n_mix = rng.random_range(1..=rows.len().min(3));
            let mut chosen = rows;
            chosen.shuffle(rng);
            chosen.truncate(n_mix);
            let weights: Vec<f64> = chosen.iter().map(|_| rng.random_range(0.3..1.0)).collect();
            let mut base = vec![0.0; t];
            for (&row, &wgt) in chosen.iter().zip(&weights) {
                let norm = dict.phi.row(row).norm();
                for (j, b) in base.iter_mut().enumerate() {
                    *b += wgt * dict.phi[(row, j)] / norm;
                }
            }
            base
        }
    }
}
