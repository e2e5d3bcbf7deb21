//! Analytic quantities checked against plain Monte Carlo. The samplers here
//! are written against `rand_distr` directly so the comparison does not go
//! through the crate's own simulator, except where noted.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma};
use ssi_relay_core::fading::{egk_recip_mgf, sample_gg, sample_shadow, RngStream};
use ssi_relay_core::selection::{
    cond_first_hop_recip_mgf, gcq_eta, gcq_grid, max_shadow_pdf, FirstHopEnsemble,
};
use ssi_relay_core::{
    aup, end_mgf, moments, simulate, table1_links, EgkParams, EngineConfig, McConfig, Modulation,
    PerfSpec, Protocol, QuadTolerance, RelayLink, Scenario,
};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::erf::erfc;

const N: usize = 10_000_000;

/// Running mean and standard error.
#[derive(Default)]
struct Mean {
    n: f64,
    sum: f64,
    sq: f64,
}

impl Mean {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        self.sum += x;
        self.sq += x * x;
    }
    fn mean(&self) -> f64 {
        self.sum / self.n
    }
    fn se(&self) -> f64 {
        let m = self.mean();
        ((self.sq / self.n - m * m).max(0.0) / (self.n - 1.0)).sqrt()
    }
    fn assert_near(&self, expected: f64, what: &str) {
        let (m, se) = (self.mean(), self.se());
        assert!(
            (m - expected).abs() <= 3.0 * se,
            "{what}: simulated {m:.6e} ± {se:.1e}, expected {expected:.6e}"
        );
    }
}

struct Draw {
    shadow: Option<Gamma<f64>>,
    fast: Gamma<f64>,
    p: EgkParams,
}

impl Draw {
    fn new(p: EgkParams) -> Self {
        Self {
            shadow: p.has_shadowing().then(|| Gamma::new(p.n(), 1.0).unwrap()),
            fast: Gamma::new(p.m(), 1.0).unwrap(),
            p,
        }
    }

    fn shadow<R: Rng>(&self, rng: &mut R) -> f64 {
        match &self.shadow {
            Some(d) => self.p.omega() / self.p.phi_hat() * d.sample(rng).powf(1.0 / self.p.zeta()),
            None => self.p.omega(),
        }
    }

    fn fast<R: Rng>(&self, rng: &mut R) -> f64 {
        self.fast.sample(rng).powf(1.0 / self.p.xi()) / self.p.phi()
    }
}

fn harmonic(a: f64, b: f64) -> f64 {
    a * b / (a + b)
}

fn first_hops() -> Vec<EgkParams> {
    table1_links().iter().map(|l| l.hop1).collect()
}

#[test]
fn first_hop_reciprocal_mgf() {
    let p = first_hops()[0];
    let d = Draw::new(p);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut acc = Mean::default();
    for _ in 0..N {
        let g = d.shadow(&mut rng) * d.fast(&mut rng);
        acc.push((-1.0 / g).exp());
    }
    acc.assert_near(egk_recip_mgf(&p, 1.0).unwrap(), "E[exp(-1/gamma)]");
}

#[test]
fn sampler_means() {
    let p = first_hops()[0];
    let mut rng = RngStream::new(2, 0);
    let (mut g, mut s) = (Mean::default(), Mean::default());
    for _ in 0..N {
        g.push(sample_gg(&p, &mut rng));
        s.push(sample_shadow(&p, &mut rng));
    }
    g.assert_near(1.0, "E[G]");
    s.assert_near(p.omega(), "E[S]");
}

#[test]
fn largest_shadowing_histogram() {
    let ens = FirstHopEnsemble::new(first_hops()).unwrap();
    let bins = 50;
    let edges: Vec<f64> = (1..bins)
        .map(|k| ens.max_quantile(k as f64 / bins as f64))
        .collect();
    // the quantile edges must carry equal mass under the density itself
    let tol = QuadTolerance::new(1e-10, 1e-300, 400).unwrap();
    let mass = ssi_relay_core::quad::integrate(
        |s| max_shadow_pdf(&ens, s).unwrap(),
        edges[10],
        edges[20],
        &tol,
    )
    .value;
    assert!((mass - 0.2).abs() < 1e-8, "{mass}");

    let draws = 1_000_000;
    let mut rng = RngStream::new(3, 0);
    let mut counts = vec![0u64; bins];
    for _ in 0..draws {
        let s = ens
            .hops()
            .iter()
            .map(|h| sample_shadow(h, &mut rng))
            .fold(0.0, f64::max);
        counts[edges.partition_point(|e| *e < s)] += 1;
    }
    let expected = draws as f64 / bins as f64;
    let chi2: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let p_value = 1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(chi2);
    assert!(p_value > 0.01, "chi2 {chi2}, p {p_value}");
}

#[test]
fn conditional_mgf_given_selection() {
    let hops = first_hops();
    let ens = FirstHopEnsemble::new(hops.clone()).unwrap();
    let grid = gcq_grid(&ens, 64).unwrap();
    let analytic =
        cond_first_hop_recip_mgf(&hops[0], &gcq_eta(&ens, &grid).column(0), &grid, 1.0).unwrap();
    let draws: Vec<Draw> = hops.iter().map(|h| Draw::new(*h)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut acc = Mean::default();
    for _ in 0..N {
        let s: Vec<f64> = draws.iter().map(|d| d.shadow(&mut rng)).collect();
        let best = (1..s.len()).fold(0, |b, i| if s[i] > s[b] { i } else { b });
        if best == 0 {
            acc.push((-1.0 / (s[0] * draws[0].fast(&mut rng))).exp());
        }
    }
    assert!(acc.n > 1e6);
    acc.assert_near(analytic, "E[exp(-1/gamma) | relay 1]");
}

fn rayleigh_link(o1: f64, o2: f64) -> Vec<RelayLink> {
    vec![RelayLink::new(
        EgkParams::rayleigh(o1).unwrap(),
        EgkParams::rayleigh(o2).unwrap(),
    )]
}

#[test]
fn rayleigh_dual_hop() {
    let (o1, o2) = (10.0, 6.0);
    // one relay without shadowing: every protocol picks it
    let scn = Scenario::new(rayleigh_link(o1, o2), Protocol::Rr, 0.0).unwrap();
    let cfg = EngineConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut bep, mut mgf, mut mean) = (Mean::default(), Mean::default(), Mean::default());
    for _ in 0..N {
        let g1 = o1 * Distribution::<f64>::sample(&Exp1, &mut rng);
        let g2 = o2 * Distribution::<f64>::sample(&Exp1, &mut rng);
        let g = harmonic(g1, g2);
        bep.push(0.5 * erfc(g.sqrt()));
        mgf.push((-g).exp());
        mean.push(g);
    }
    let a = aup(&scn, &Modulation::Bpsk.spec(), &cfg).unwrap();
    bep.assert_near(a.analytic_value, "BPSK");
    mgf.assert_near(end_mgf(&scn, 1.0, &cfg).unwrap().analytic_value, "MGF");
    mean.assert_near(moments(&scn, 1, &cfg).unwrap().analytic_value, "mean");
}

#[test]
fn table1_end_to_end_mgf() {
    let cfg = EngineConfig::default();
    let spec = PerfSpec::mgf(1.0).unwrap();
    for (seed, p) in [Protocol::Ssi, Protocol::Rr, Protocol::Ap]
        .into_iter()
        .enumerate()
    {
        let scn = Scenario::new(table1_links(), p, 10.0).unwrap();
        // simulated by the crate's simulator
        let est = simulate(&scn, &spec, &McConfig::new(N as u64, 60 + seed as u64)).unwrap();
        let a = end_mgf(&scn, 1.0, &cfg).unwrap().analytic_value;
        assert!(
            (est.mean - a).abs() <= 3.0 * est.std_error,
            "{p}: {} ± {} vs {a}",
            est.mean,
            est.std_error
        );
    }
}

#[test]
fn ssi_bpsk_at_13_db() {
    let scn = Scenario::new(table1_links(), Protocol::Ssi, 13.0).unwrap();
    let spec = Modulation::Bpsk.spec();
    let a = aup(&scn, &spec, &EngineConfig::default()).unwrap();
    let est = simulate(&scn, &spec, &McConfig::new(N as u64, 13)).unwrap();
    assert!((est.mean - a.analytic_value).abs() <= 3.0 * est.std_error + a.error_estimate);
    assert!(
        (a.analytic_value / 2e-2 - 1.0).abs() < 0.02,
        "{}",
        a.analytic_value
    );
}
