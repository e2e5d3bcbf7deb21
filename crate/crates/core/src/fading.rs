//! Extended generalized-K (EGK) composite fading: densities, reciprocal MGFs
//! and exact samplers.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{domain, Error, Result};
use crate::quad::{integrate_with_breaks, QuadTolerance};
use crate::specfun::{
    ext_gamma_pair, gamma_ratio, ln_ext_inc_gamma_origin, ln_gamma, lower_inc_gamma_regularized,
};

/// Shadowing figure meaning "no shadowing": the shadow power is the constant Ω.
pub const INFINITE_SHADOWING_FIGURE: f64 = f64::INFINITY;

/// Five-parameter EGK description of one hop, with cached normalizers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EgkParams {
    m: f64,
    xi: f64,
    n: f64,
    zeta: f64,
    omega: f64,
    phi: f64,
    phi_hat: f64,
    ln_gamma_m: f64,
    ln_gamma_n: f64,
}

impl EgkParams {
    pub fn new(m: f64, xi: f64, n: f64, zeta: f64, omega: f64) -> Result<Self> {
        let bad = |what: &str, v: f64| Err(Error::InvalidParameter(format!("{what} = {v}")));
        if !(m >= 0.5) || !m.is_finite() {
            return bad("m must be finite and >= 0.5, got m", m);
        }
        if !(xi > 0.0) || !xi.is_finite() {
            return bad("xi must be finite and > 0, got xi", xi);
        }
        if !(n >= 0.5) {
            return bad("n must be >= 0.5 or infinite, got n", n);
        }
        if !(zeta > 0.0) || !zeta.is_finite() {
            return bad("zeta must be finite and > 0, got zeta", zeta);
        }
        if !(omega > 0.0) || !omega.is_finite() {
            return bad("omega must be finite and > 0, got omega", omega);
        }
        let ln_gamma_m = ln_gamma(m)?;
        let phi = gamma_ratio(m, 1.0 / xi);
        let (phi_hat, ln_gamma_n) = if n.is_infinite() {
            (1.0, 0.0)
        } else {
            (gamma_ratio(n, 1.0 / zeta), ln_gamma(n)?)
        };
        Ok(Self {
            m,
            xi,
            n,
            zeta,
            omega,
            phi,
            phi_hat,
            ln_gamma_m,
            ln_gamma_n,
        })
    }

    /// Rayleigh multipath without shadowing.
    pub fn rayleigh(omega: f64) -> Result<Self> {
        Self::new(1.0, 1.0, INFINITE_SHADOWING_FIGURE, 1.0, omega)
    }

    pub fn m(&self) -> f64 {
        self.m
    }
    pub fn xi(&self) -> f64 {
        self.xi
    }
    pub fn n(&self) -> f64 {
        self.n
    }
    pub fn zeta(&self) -> f64 {
        self.zeta
    }
    pub fn omega(&self) -> f64 {
        self.omega
    }
    /// φ = Γ(m + 1/ξ)/Γ(m).
    pub fn phi(&self) -> f64 {
        self.phi
    }
    /// Shadowing normalizer Γ(n + 1/ζ)/Γ(n); 1 without shadowing.
    pub fn phi_hat(&self) -> f64 {
        self.phi_hat
    }

    pub fn has_shadowing(&self) -> bool {
        self.n.is_finite()
    }

    /// Both shaping factors equal one (generalized-K).
    pub fn is_gk(&self) -> bool {
        self.xi == 1.0 && (self.zeta == 1.0 || !self.has_shadowing())
    }

    /// Same statistics with Ω multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.m, self.xi, self.n, self.zeta, self.omega * factor)
    }

    /// Same parameters with a different shadowing figure.
    pub fn with_shadowing_figure(&self, n: f64) -> Result<Self> {
        Self::new(self.m, self.xi, n, self.zeta, self.omega)
    }

    fn require_shadowing(&self, func: &'static str) -> Result<()> {
        if self.has_shadowing() {
            Ok(())
        } else {
            Err(Error::Unsupported(format!(
                "{func}: shadowing with infinite n is a point mass at omega = {}",
                self.omega
            )))
        }
    }
}

/// Unit-mean generalized-gamma density of the multipath power G.
pub fn gg_pdf(params: &EgkParams, g: f64) -> Result<f64> {
    if !(g > 0.0) {
        return Err(domain("gg_pdf", format!("g must be positive, got {g}")));
    }
    let (m, xi, phi) = (params.m, params.xi, params.phi);
    let y = phi * g;
    let ln = xi.ln() + phi.ln() - params.ln_gamma_m + (m * xi - 1.0) * y.ln() - y.powf(xi);
    Ok(ln.exp())
}

/// Density of the shadowing power S.
pub fn shadow_pdf(params: &EgkParams, s: f64) -> Result<f64> {
    params.require_shadowing("shadow_pdf")?;
    if !(s > 0.0) {
        return Err(domain("shadow_pdf", format!("s must be positive, got {s}")));
    }
    Ok(shadow_pdf_unchecked(params, s))
}

pub(crate) fn shadow_pdf_unchecked(params: &EgkParams, s: f64) -> f64 {
    let (n, zeta) = (params.n, params.zeta);
    let y = s * params.phi_hat / params.omega;
    let ln = zeta.ln() - s.ln() - params.ln_gamma_n + n * zeta * y.ln() - y.powf(zeta);
    ln.exp()
}

/// CDF of the shadowing power S; the unit step at Ω without shadowing.
pub fn shadow_cdf(params: &EgkParams, s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(domain(
            "shadow_cdf",
            format!("s must be non-negative, got {s}"),
        ));
    }
    if !params.has_shadowing() {
        return Ok(if s >= params.omega { 1.0 } else { 0.0 });
    }
    lower_inc_gamma_regularized(params.n, shadow_argument(params, s))
}

/// (s φ̂/Ω)^ζ, the gamma(n) variate matching shadow power s.
pub(crate) fn shadow_argument(params: &EgkParams, s: f64) -> f64 {
    (s * params.phi_hat / params.omega).powf(params.zeta)
}

/// Composite SNR density of γ = S·G.
pub fn egk_snr_pdf(params: &EgkParams, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(domain(
            "egk_snr_pdf",
            format!("gamma must be positive, got {gamma}"),
        ));
    }
    if !params.has_shadowing() {
        return Ok(gg_pdf(params, gamma / params.omega)? / params.omega);
    }
    let (m, xi, n, zeta) = (params.m, params.xi, params.n, params.zeta);
    let c = params.phi * params.phi_hat / params.omega;
    let ln_ext = ln_ext_inc_gamma_origin(n - m * xi / zeta, (c * gamma).powf(xi), xi / zeta)?;
    let ln = xi.ln() + m * xi * c.ln() - params.ln_gamma_m - params.ln_gamma_n
        + (m * xi - 1.0) * gamma.ln()
        + ln_ext;
    Ok(ln.exp())
}

/// Reciprocal MGF E[e^{−p/G}] of the multipath power.
pub fn gg_recip_mgf(params: &EgkParams, p: f64) -> Result<f64> {
    if !(p >= 0.0) || !p.is_finite() {
        return Err(domain(
            "gg_recip_mgf",
            format!("p must be finite and >= 0, got {p}"),
        ));
    }
    Ok(GgRecipMgf::new(params, true).eval(p).0)
}

/// d/dp E[e^{−p/G}].
pub fn gg_recip_mgf_deriv(params: &EgkParams, p: f64) -> Result<f64> {
    if !(p >= 0.0) || !p.is_finite() {
        return Err(domain(
            "gg_recip_mgf_deriv",
            format!("p must be finite and >= 0, got {p}"),
        ));
    }
    if p == 0.0 {
        let order = params.m - 1.0 / params.xi;
        if order <= 0.0 {
            return Err(Error::Divergent(format!(
                "reciprocal MGF slope at p = 0 needs m*xi > 1, got {}",
                params.m * params.xi
            )));
        }
        return Ok(-params.phi * gamma_ratio(params.m, -1.0 / params.xi));
    }
    Ok(GgRecipMgf::new(params, true).eval(p).1)
}

/// Evaluator for the multipath reciprocal MGF and its slope.
#[derive(Debug, Clone, Copy)]
pub(crate) struct GgRecipMgf {
    m: f64,
    beta: f64,
    phi: f64,
    ln_gamma_m: f64,
    bessel: bool,
}

impl GgRecipMgf {
    pub(crate) fn new(params: &EgkParams, bessel: bool) -> Self {
        Self {
            m: params.m,
            beta: 1.0 / params.xi,
            phi: params.phi,
            ln_gamma_m: params.ln_gamma_m,
            bessel,
        }
    }

    /// (M(p), M'(p)) for p > 0; (1, −∞) at p = 0.
    pub(crate) fn eval(&self, p: f64) -> (f64, f64) {
        if p == 0.0 {
            return (1.0, f64::NEG_INFINITY);
        }
        let b = self.phi * p;
        let (g0, g1) = ext_gamma_pair(self.m, b, self.beta, self.bessel);
        let norm = (-self.ln_gamma_m).exp();
        let mut v = (g0 * norm).min(1.0);
        if v > 0.9 {
            // 1 − M is lost to rounding in the full integral
            v = 1.0 - self.complement(b);
        }
        (v, -self.phi * g1 * norm)
    }

    /// 1 − M = E[1 − e^{−b r^{−β}}] with r ~ gamma(m, 1), in t = ln r.
    pub(crate) fn complement(&self, b: f64) -> f64 {
        let (m, beta, lg) = (self.m, self.beta, self.ln_gamma_m);
        let f = |t: f64| (m * t - t.exp() - lg).exp() * -(-b * (-beta * t).exp()).exp_m1();
        let knee = b.ln() / beta;
        let top = m.ln().max(0.0);
        let lo = knee.min(top) - 40.0 / m.min(1.0);
        let hi = (m + 60.0).ln();
        let mut breaks: Vec<f64> = [knee, top]
            .into_iter()
            .filter(|t| *t > lo && *t < hi)
            .collect();
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let tol = QuadTolerance {
            rel_tol: 1e-13,
            abs_tol: 1e-300,
            max_subdivisions: 200,
        };
        integrate_with_breaks(f, lo, hi, &breaks, &tol).value
    }
}

/// Reciprocal MGF E[e^{−p/γ}] of the composite SNR, by integrating the
/// multipath reciprocal MGF over the shadowing law.
pub fn egk_recip_mgf(params: &EgkParams, p: f64) -> Result<f64> {
    egk_recip_mgf_with_tol(params, p, &QuadTolerance::default())
}

pub fn egk_recip_mgf_with_tol(params: &EgkParams, p: f64, tol: &QuadTolerance) -> Result<f64> {
    if !(p >= 0.0) || !p.is_finite() {
        return Err(domain(
            "egk_recip_mgf",
            format!("p must be finite and >= 0, got {p}"),
        ));
    }
    if p == 0.0 {
        return Ok(1.0);
    }
    let gg = GgRecipMgf::new(params, true);
    if !params.has_shadowing() {
        return Ok(gg.eval(p / params.omega).0);
    }
    // v = (sφ̂/Ω)^ζ ~ gamma(n); integrate over τ = ln v
    let (n, zeta) = (params.n, params.zeta);
    let ln_gn = params.ln_gamma_n;
    let weight = |tau: f64| (n * tau - tau.exp() - ln_gn).exp();
    let scale = p * params.phi_hat / params.omega;
    let (lo, hi) = gamma_log_support(n);
    let r = integrate_with_breaks(
        |tau| weight(tau) * gg.eval(scale * (-tau / zeta).exp()).0,
        lo,
        hi,
        &[n.ln()],
        tol,
    );
    Ok(r.require("egk_recip_mgf")?.value)
}

/// Interval in τ = ln v outside of which the gamma(n) law in τ carries
/// negligible mass.
pub(crate) fn gamma_log_support(n: f64) -> (f64, f64) {
    let mode = n.ln();
    let peak = n * mode - n;
    let f = |t: f64| n * t - t.exp();
    let mut lo = mode - 1.0;
    while f(lo) - peak > -50.0 {
        lo -= 1.0 + (mode - lo);
    }
    let mut hi = mode + 1.0;
    while f(hi) - peak > -50.0 {
        hi += 0.5;
    }
    (lo, hi)
}

/// A deterministic random stream identified by (seed, stream id).
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Reusable sampler for the multipath, shadowing and composite powers of one hop.
#[derive(Debug, Clone)]
pub struct EgkSampler {
    params: EgkParams,
    fast: Gamma<f64>,
    shadow: Option<Gamma<f64>>,
    inv_xi: f64,
    inv_zeta: f64,
}

impl EgkSampler {
    pub fn new(params: &EgkParams) -> Self {
        let fast = Gamma::new(params.m, 1.0).expect("validated shape");
        let shadow = params
            .has_shadowing()
            .then(|| Gamma::new(params.n, 1.0).expect("validated shape"));
        Self {
            params: *params,
            fast,
            shadow,
            inv_xi: 1.0 / params.xi,
            inv_zeta: 1.0 / params.zeta,
        }
    }

    pub fn params(&self) -> &EgkParams {
        &self.params
    }

    /// G = W^{1/ξ}/φ with W ~ gamma(m).
    pub fn fast<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        let w: f64 = self.fast.sample(rng);
        pow_or_identity(w, self.inv_xi) / self.params.phi
    }

    /// S = (Ω/φ̂)·V^{1/ζ} with V ~ gamma(n); Ω without shadowing.
    pub fn shadow<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.shadow {
            Some(d) => {
                let v: f64 = d.sample(rng);
                self.params.omega / self.params.phi_hat * pow_or_identity(v, self.inv_zeta)
            }
            None => self.params.omega,
        }
    }

    /// Composite SNR S·G.
    pub fn snr<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        let s = self.shadow(rng);
        s * self.fast(rng)
    }
}

fn pow_or_identity(x: f64, e: f64) -> f64 {
    if e == 1.0 {
        x
    } else {
        x.powf(e)
    }
}

pub fn sample_gg(params: &EgkParams, rng: &mut RngStream) -> f64 {
    EgkSampler::new(params).fast(rng)
}

pub fn sample_shadow(params: &EgkParams, rng: &mut RngStream) -> f64 {
    EgkSampler::new(params).shadow(rng)
}

pub fn sample_egk_snr(params: &EgkParams, rng: &mut RngStream) -> f64 {
    EgkSampler::new(params).snr(rng)
}
