//! Shadowing-based selection statistics: selection probabilities, the law of
//! the largest first-hop shadowing power, and its Gauss–Chebyshev collapse.

use std::f64::consts::PI;

use crate::error::{domain, Error, Result};
use crate::fading::{shadow_argument, shadow_pdf_unchecked, EgkParams, GgRecipMgf};
use crate::quad::{integrate_vec_with_breaks, integrate_with_breaks, QuadTolerance};
use crate::specfun::{lower_inc_gamma_regularized, upper_inc_gamma_regularized};

/// Default Gauss–Chebyshev node count.
pub const DEFAULT_GCQ_NODES: usize = 64;

// Node-map power relative to the log inter-decile range of the max shadowing.
const GCQ_SPREAD_FACTOR: f64 = 1.5;
const GCQ_SPREAD_NORM: f64 = 2.56;
// Tail mass left out of the selection-probability integrals.
const TAIL_MASS: f64 = 1e-20;

/// First-hop shadowing laws of the L candidate relays.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstHopEnsemble {
    hops: Vec<EgkParams>,
}

impl FirstHopEnsemble {
    /// Builds the ensemble from each relay's first-hop parameters. Only the
    /// shadowing part (n, ζ, Ω) matters here; n must be finite.
    pub fn new(hops: Vec<EgkParams>) -> Result<Self> {
        if hops.is_empty() {
            return Err(Error::InvalidParameter(
                "ensemble needs at least one relay".into(),
            ));
        }
        if let Some(i) = hops.iter().position(|h| !h.has_shadowing()) {
            return Err(Error::InvalidParameter(format!(
                "relay {i}: shadowing-based selection needs a finite first-hop shadowing figure"
            )));
        }
        Ok(Self { hops })
    }

    pub fn len(&self) -> usize {
        self.hops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hops.is_empty()
    }

    pub fn hops(&self) -> &[EgkParams] {
        &self.hops
    }

    fn cdf(&self, k: usize, s: f64) -> f64 {
        let h = &self.hops[k];
        lower_inc_gamma_regularized(h.n(), shadow_argument(h, s)).unwrap_or(1.0)
    }

    /// P(max_k S_k ≤ s).
    pub fn max_cdf(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        (0..self.len()).map(|k| self.cdf(k, s)).product()
    }

    /// P(max_k S_k > s), computed from the upper tails to avoid cancellation.
    fn max_survival(&self, s: f64) -> f64 {
        // 1 − Π(1 − Q_k) = Σ_k Q_k Π_{j<k}(1 − Q_j)
        let mut below = 1.0;
        let mut surv = 0.0;
        for h in &self.hops {
            let q = upper_inc_gamma_regularized(h.n(), shadow_argument(h, s)).unwrap_or(0.0);
            surv += q * below;
            below *= 1.0 - q;
        }
        surv
    }

    /// Density of relay ℓ being the largest at level s: p_ℓ(s) Π_{k≠ℓ} P_k(s).
    pub fn component_density(&self, l: usize, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        let mut v = shadow_pdf_unchecked(&self.hops[l], s);
        for k in 0..self.len() {
            if k != l {
                v *= self.cdf(k, s);
            }
        }
        v
    }

    /// Quantile of the largest shadowing power, by bisection in ln s.
    pub fn max_quantile(&self, q: f64) -> f64 {
        let q = q.clamp(1e-300, 1.0 - 1e-16);
        let (mut lo, mut hi) = (-1.0_f64, 1.0_f64);
        while self.max_cdf(lo.exp()) > q {
            lo = 2.0 * lo - 1.0;
        }
        while self.max_cdf(hi.exp()) < q {
            hi = 2.0 * hi + 1.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.max_cdf(mid.exp()) < q {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-14 * (1.0 + mid.abs()) {
                break;
            }
        }
        (0.5 * (lo + hi)).exp()
    }

    /// Range of ln s outside of which every relay carries less than `mass`.
    fn log_support(&self, mass: f64) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for h in &self.hops {
            let scale = (h.omega() / h.phi_hat()).ln();
            let v_lo = gamma_quantile_lower(h.n(), mass);
            let v_hi = gamma_quantile_upper(h.n(), mass);
            lo = lo.min(scale + v_lo.ln() / h.zeta());
            hi = hi.max(scale + v_hi.ln() / h.zeta());
        }
        (lo, hi)
    }
}

/// v with P(n, v) = q, by bisection in ln v.
fn gamma_quantile_lower(n: f64, q: f64) -> f64 {
    bisect_log(|v| lower_inc_gamma_regularized(n, v).unwrap_or(1.0) - q)
}

/// v with Q(n, v) = q, by bisection in ln v.
fn gamma_quantile_upper(n: f64, q: f64) -> f64 {
    bisect_log(|v| q - upper_inc_gamma_regularized(n, v).unwrap_or(0.0))
}

/// Root of an increasing function of v > 0.
fn bisect_log(f: impl Fn(f64) -> f64) -> f64 {
    let (mut lo, mut hi) = (-1.0_f64, 1.0_f64);
    while f(lo.exp()) > 0.0 && lo > -1e4 {
        lo = 2.0 * lo - 1.0;
    }
    while f(hi.exp()) < 0.0 && hi < 700.0 {
        hi = 2.0 * hi + 1.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid.exp()) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    (0.5 * (lo + hi)).exp()
}

/// Probability μ_ℓ that each relay has the largest first-hop shadowing power.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionProbabilities {
    pub mu: Vec<f64>,
    /// Σμ before renormalization.
    pub raw_sum: f64,
}

/// μ_ℓ = ∫ p_ℓ(s) Π_{k≠ℓ} P_k(s) ds by adaptive quadrature in ln s.
///
/// The raw vector is renormalized to sum to one only if it is already within
/// 1e−6 of doing so.
pub fn selection_probabilities(
    ens: &FirstHopEnsemble,
    tol: &QuadTolerance,
) -> Result<SelectionProbabilities> {
    tol.validate()?;
    let l = ens.len();
    if l == 1 {
        return Ok(SelectionProbabilities {
            mu: vec![1.0],
            raw_sum: 1.0,
        });
    }
    let (lo, hi) = ens.log_support(TAIL_MASS);
    let mut breaks: Vec<f64> = ens
        .hops()
        .iter()
        .map(|h| (h.omega() / h.phi_hat()).ln() + h.n().ln() / h.zeta())
        .chain(std::iter::once(ens.max_quantile(0.5).ln()))
        .filter(|b| *b > lo && *b < hi)
        .collect();
    breaks.sort_by(f64::total_cmp);
    let r = integrate_vec_with_breaks(
        |t, out| {
            let s = t.exp();
            for (k, o) in out.iter_mut().enumerate() {
                *o = s * ens.component_density(k, s);
            }
        },
        l,
        lo,
        hi,
        &breaks,
        tol,
    );
    let total: f64 = r.values.iter().sum();
    let deviation = (total - 1.0).abs();
    if !r.converged || deviation >= 1e-6 {
        return Err(Error::NoConvergence {
            what: format!("selection probabilities (raw sum deviates from 1 by {deviation:e})"),
            error: r.errors.iter().copied().fold(0.0, f64::max),
        });
    }
    let mu = r
        .values
        .iter()
        .map(|v| (v / total).clamp(0.0, 1.0))
        .collect();
    Ok(SelectionProbabilities { mu, raw_sum: total })
}

/// Density of the largest first-hop shadowing power.
pub fn max_shadow_pdf(ens: &FirstHopEnsemble, s: f64) -> Result<f64> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(domain(
            "max_shadow_pdf",
            format!("s must be positive, got {s}"),
        ));
    }
    Ok((0..ens.len()).map(|l| ens.component_density(l, s)).sum())
}

/// Gauss–Chebyshev nodes and weights mapped onto (0, ∞).
#[derive(Debug, Clone, PartialEq)]
pub struct GcqGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GcqGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Chebyshev nodes x_i = cos((2i−1)π/2N) mapped by s = σ((1+x)/(1−x))^q,
/// with σ the median of the largest shadowing power and q set from its
/// inter-decile spread.
pub fn gcq_grid(ens: &FirstHopEnsemble, n: usize) -> Result<GcqGrid> {
    if n < 8 {
        return Err(Error::InvalidParameter(format!(
            "gcq node count must be >= 8, got {n}"
        )));
    }
    let sigma = ens.max_quantile(0.5);
    let spread = (ens.max_quantile(0.9) / ens.max_quantile(0.1)).ln();
    let q = GCQ_SPREAD_FACTOR * spread / GCQ_SPREAD_NORM;
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in (1..=n).rev() {
        let x = ((2 * i - 1) as f64 * PI / (2 * n) as f64).cos();
        let t = (1.0 + x) / (1.0 - x);
        let s = sigma * t.powf(q);
        let jac = sigma * q * t.powf(q - 1.0) * 2.0 / ((1.0 - x) * (1.0 - x));
        nodes.push(s);
        weights.push(PI / n as f64 * (1.0 - x * x).sqrt() * jac);
    }
    Ok(GcqGrid { nodes, weights })
}

/// η_{n,ℓ} = w_n p_ℓ(s_n) Π_{k≠ℓ} P_k(s_n), stored row-major (node, relay).
#[derive(Debug, Clone, PartialEq)]
pub struct EtaMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl EtaMatrix {
    pub fn get(&self, node: usize, relay: usize) -> f64 {
        self.data[node * self.cols + relay]
    }

    pub fn nodes(&self) -> usize {
        self.rows
    }

    pub fn relays(&self) -> usize {
        self.cols
    }

    /// Weights of one relay across the nodes.
    pub fn column(&self, relay: usize) -> Vec<f64> {
        (0..self.rows).map(|n| self.get(n, relay)).collect()
    }

    /// Σ_{n,ℓ} η_{n,ℓ}; tends to 1 as the node count grows.
    pub fn total(&self) -> f64 {
        self.data.iter().sum()
    }
}

pub fn gcq_eta(ens: &FirstHopEnsemble, grid: &GcqGrid) -> EtaMatrix {
    let cols = ens.len();
    let mut data = Vec::with_capacity(grid.len() * cols);
    for (s, w) in grid.nodes.iter().zip(&grid.weights) {
        for l in 0..cols {
            data.push(w * ens.component_density(l, *s));
        }
    }
    EtaMatrix {
        rows: grid.len(),
        cols,
        data,
    }
}

/// E[e^{−p/(Ŝ G_ℓ)} | relay ℓ selected], the η column normalized to unit mass.
pub fn cond_first_hop_recip_mgf(
    relay: &EgkParams,
    eta_col: &[f64],
    grid: &GcqGrid,
    p: f64,
) -> Result<f64> {
    Ok(cond_pair(relay, eta_col, grid, p, "cond_first_hop_recip_mgf")?.0)
}

/// d/dp of [`cond_first_hop_recip_mgf`].
pub fn cond_first_hop_recip_mgf_deriv(
    relay: &EgkParams,
    eta_col: &[f64],
    grid: &GcqGrid,
    p: f64,
) -> Result<f64> {
    if p == 0.0 {
        return Err(domain(
            "cond_first_hop_recip_mgf_deriv",
            "p must be positive",
        ));
    }
    Ok(cond_pair(relay, eta_col, grid, p, "cond_first_hop_recip_mgf_deriv")?.1)
}

fn cond_pair(
    relay: &EgkParams,
    eta_col: &[f64],
    grid: &GcqGrid,
    p: f64,
    func: &'static str,
) -> Result<(f64, f64)> {
    if !(p >= 0.0) || !p.is_finite() {
        return Err(domain(func, format!("p must be finite and >= 0, got {p}")));
    }
    if eta_col.len() != grid.len() {
        return Err(domain(func, "eta column and grid lengths differ"));
    }
    let mass: f64 = eta_col.iter().sum();
    if !(mass > 0.0) {
        return Err(domain(func, "relay has zero selection mass"));
    }
    let gg = GgRecipMgf::new(relay, true);
    let (mut v, mut d) = (0.0, 0.0);
    for (eta, s) in eta_col.iter().zip(&grid.nodes) {
        let (m, dm) = gg.eval(p / s);
        v += eta * m;
        d += eta * dm / s;
    }
    Ok((v / mass, d / mass))
}

/// Mean of the largest shadowing power by adaptive quadrature, for checks.
pub fn max_shadow_mean(ens: &FirstHopEnsemble, tol: &QuadTolerance) -> Result<f64> {
    let (lo, hi) = ens.log_support(TAIL_MASS);
    let r = integrate_with_breaks(
        |t| {
            let s = t.exp();
            s * s * max_shadow_pdf(ens, s).unwrap_or(0.0)
        },
        lo,
        hi,
        &[ens.max_quantile(0.5).ln()],
        tol,
    );
    Ok(r.require("max_shadow_mean")?.value)
}

/// Survival function of the largest shadowing power.
pub fn max_shadow_survival(ens: &FirstHopEnsemble, s: f64) -> f64 {
    if s <= 0.0 {
        1.0
    } else {
        ens.max_survival(s)
    }
}
