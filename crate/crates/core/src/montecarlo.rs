//! End-to-end channel simulator for all four selection protocols.
//!
//! Draws are split into fixed-size batches; batch `i` uses the random stream
//! `(seed, i)` and covers draw indices `i·batch_size ..`. Batches run on a
//! pool of `workers` threads and are merged in batch order, so the result
//! depends on the seed and sample count only.

use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{ap_choice, Protocol, Scenario};
use crate::error::{Error, Result};
use crate::fading::{EgkSampler, RngStream};
use crate::perfkernel::{conditional_perf, PerfSpec};

pub const MIN_SAMPLES: u64 = 1_000;
pub const DEFAULT_SAMPLES: u64 = 10_000_000;
pub const DEFAULT_BATCH: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct McConfig {
    pub samples: u64,
    pub seed: u64,
    pub batch_size: u64,
    pub workers: usize,
}

impl McConfig {
    pub fn new(samples: u64, seed: u64) -> Self {
        Self {
            samples,
            seed,
            ..Self::default()
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples < MIN_SAMPLES {
            return Err(Error::InvalidParameter(format!(
                "samples must be at least {MIN_SAMPLES}, got {}",
                self.samples
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter(
                "batch_size must be positive".into(),
            ));
        }
        if self.workers == 0 {
            return Err(Error::InvalidParameter("workers must be at least 1".into()));
        }
        Ok(())
    }

    fn batches(&self) -> Vec<(u64, u64)> {
        let n = self.samples.div_ceil(self.batch_size);
        (0..n)
            .map(|i| {
                let start = i * self.batch_size;
                (start, (start + self.batch_size).min(self.samples))
            })
            .collect()
    }

    /// Runs `f` over every batch on a pool of `workers` threads; results come
    /// back in batch order.
    fn run<T: Send>(&self, f: impl Fn(u64, u64, &mut RngStream) -> T + Sync) -> Result<Vec<T>> {
        self.validate()?;
        let batches = self.batches();
        let job = |(i, &(start, end)): (usize, &(u64, u64))| {
            let mut rng = RngStream::new(self.seed, i as u64);
            f(start, end, &mut rng)
        };
        if self.workers == 1 {
            return Ok(batches.iter().enumerate().map(job).collect());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
        Ok(pool.install(|| batches.par_iter().enumerate().map(job).collect()))
    }
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            samples: DEFAULT_SAMPLES,
            seed: 0,
            batch_size: DEFAULT_BATCH,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples_used: u64,
}

/// Streaming mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default)]
struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(&mut self, o: &Welford) {
        if o.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *o;
            return;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        self.mean += d * o.n as f64 / n as f64;
        self.m2 += o.m2 + d * d * (self.n as f64 * o.n as f64 / n as f64);
        self.n = n;
    }

    fn estimate(&self) -> McEstimate {
        let var = if self.n > 1 {
            self.m2.max(0.0) / (self.n - 1) as f64
        } else {
            0.0
        };
        McEstimate {
            mean: self.mean,
            std_error: (var / self.n as f64).sqrt(),
            samples_used: self.n,
        }
    }
}

/// Per-draw sampling of the selected relay and both hop SNRs.
struct Channel {
    protocol: Protocol,
    hop1: Vec<EgkSampler>,
    hop2: Vec<EgkSampler>,
    ap: usize,
    shadow: Vec<f64>,
}

impl Channel {
    fn new(scn: &Scenario) -> Result<Self> {
        let links = scn.scaled_links()?;
        let hop1: Vec<_> = links.iter().map(|l| EgkSampler::new(&l.hop1)).collect();
        let hop2: Vec<_> = links.iter().map(|l| EgkSampler::new(&l.hop2)).collect();
        let ap = ap_choice(&links.iter().map(|l| l.hop1).collect::<Vec<_>>());
        Ok(Self {
            protocol: scn.protocol(),
            shadow: vec![0.0; hop1.len()],
            hop1,
            hop2,
            ap,
        })
    }

    /// Selected relay and its first-hop SNR for draw `index`.
    fn select(&mut self, index: u64, rng: &mut RngStream) -> (usize, f64) {
        let l = self.hop1.len();
        match self.protocol {
            Protocol::Ssi => {
                for (s, h) in self.shadow.iter_mut().zip(&self.hop1) {
                    *s = h.shadow(rng);
                }
                let best = argmax(&self.shadow);
                (best, self.shadow[best] * self.hop1[best].fast(rng))
            }
            Protocol::CsiSimOnly => {
                for (s, h) in self.shadow.iter_mut().zip(&self.hop1) {
                    *s = h.snr(rng);
                }
                let best = argmax(&self.shadow);
                (best, self.shadow[best])
            }
            Protocol::Rr => {
                let i = (index % l as u64) as usize;
                (i, self.hop1[i].snr(rng))
            }
            Protocol::Ap => (self.ap, self.hop1[self.ap].snr(rng)),
        }
    }

    /// End-to-end SNR γ₁γ₂/(γ₁ + γ₂) for draw `index`.
    fn draw(&mut self, index: u64, rng: &mut RngStream) -> f64 {
        let (i, g1) = self.select(index, rng);
        let g2 = self.hop2[i].snr(rng);
        harmonic(g1, g2)
    }
}

fn harmonic(g1: f64, g2: f64) -> f64 {
    if g1 + g2 == 0.0 {
        0.0
    } else {
        g1 * g2 / (g1 + g2)
    }
}

/// Lowest index of the largest value.
fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Monte Carlo estimate of E[P(γ_end)] for one performance measure.
pub fn simulate(scn: &Scenario, spec: &PerfSpec, mc: &McConfig) -> Result<McEstimate> {
    Ok(simulate_multi(scn, std::slice::from_ref(spec), &[0.0], mc)?[0][0])
}

/// Several measures at several SNR offsets (dB, relative to the scenario's
/// scale) from one shared set of draws. Selection does not depend on a
/// common SNR scale, so every offset sees the same relays. Indexed
/// `[offset][spec]`.
pub fn simulate_multi(
    scn: &Scenario,
    specs: &[PerfSpec],
    offsets_db: &[f64],
    mc: &McConfig,
) -> Result<Vec<Vec<McEstimate>>> {
    if specs.is_empty() || offsets_db.is_empty() {
        return Err(Error::InvalidParameter(
            "need at least one measure and one SNR offset".into(),
        ));
    }
    if let Some(o) = offsets_db.iter().find(|o| !o.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "SNR offset must be finite, got {o}"
        )));
    }
    Channel::new(scn)?;
    let factors: Vec<f64> = offsets_db.iter().map(|o| 10f64.powf(o / 10.0)).collect();
    let dim = specs.len() * factors.len();
    let parts = mc.run(|start, end, rng| {
        let mut ch = Channel::new(scn).expect("scenario validated");
        let mut acc = vec![Welford::default(); dim];
        for index in start..end {
            let g = ch.draw(index, rng);
            for (fi, f) in factors.iter().enumerate() {
                for (si, spec) in specs.iter().enumerate() {
                    acc[fi * specs.len() + si].push(conditional_perf(spec, g * f));
                }
            }
        }
        acc
    });
    let mut total = vec![Welford::default(); dim];
    for part in parts? {
        for (t, p) in total.iter_mut().zip(&part) {
            t.merge(p);
        }
    }
    Ok(total
        .chunks(specs.len())
        .map(|row| row.iter().map(Welford::estimate).collect())
        .collect())
}

/// Empirical frequency with which each relay is selected (SSI or CSI).
pub fn selection_frequencies(scn: &Scenario, mc: &McConfig) -> Result<Vec<f64>> {
    if !matches!(scn.protocol(), Protocol::Ssi | Protocol::CsiSimOnly) {
        return Err(Error::Unsupported(format!(
            "selection frequencies are random only under ssi or csi, not {}",
            scn.protocol()
        )));
    }
    Channel::new(scn)?;
    let l = scn.len();
    let parts = mc.run(|start, end, rng| {
        let mut ch = Channel::new(scn).expect("scenario validated");
        let mut counts = vec![0u64; l];
        for index in start..end {
            counts[ch.select(index, rng).0] += 1;
        }
        counts
    })?;
    let mut counts = vec![0u64; l];
    for part in parts {
        for (c, p) in counts.iter_mut().zip(&part) {
            *c += p;
        }
    }
    Ok(counts
        .iter()
        .map(|c| *c as f64 / mc.samples as f64)
        .collect())
}
