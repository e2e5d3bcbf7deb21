//! Average unified performance of partial relay selection, the end-to-end
//! MGF, moments and amount of fading.

mod law;
mod outer;
mod table;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fading::EgkParams;
use crate::perfkernel::{z_kernel_unchecked, PerfKind, PerfSpec};
use crate::quad::QuadTolerance;
use crate::selection::DEFAULT_GCQ_NODES;

pub use law::{ap_choice, EndIntegrand};
use outer::Kernel;

/// Source→relay and relay→destination statistics of one candidate relay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelayLink {
    pub hop1: EgkParams,
    pub hop2: EgkParams,
}

impl RelayLink {
    pub fn new(hop1: EgkParams, hop2: EgkParams) -> Self {
        Self { hop1, hop2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Protocol {
    /// Largest first-hop shadowing power.
    #[serde(rename = "ssi")]
    Ssi,
    /// Cyclic selection.
    #[serde(rename = "rr")]
    Rr,
    /// Fixed relay with the largest first-hop Ω.
    #[serde(rename = "ap")]
    Ap,
    /// Largest instantaneous first-hop SNR; simulation only.
    #[serde(rename = "csi")]
    CsiSimOnly,
}

impl Protocol {
    pub const ALL: [Protocol; 4] = [Self::Ssi, Self::Rr, Self::Ap, Self::CsiSimOnly];

    pub fn name(self) -> &'static str {
        match self {
            Self::Ssi => "ssi",
            Self::Rr => "rr",
            Self::Ap => "ap",
            Self::CsiSimOnly => "csi",
        }
    }

    pub fn has_analytic(self) -> bool {
        self != Self::CsiSimOnly
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ssi" => Ok(Self::Ssi),
            "rr" => Ok(Self::Rr),
            "ap" => Ok(Self::Ap),
            "csi" | "csi_sim_only" => Ok(Self::CsiSimOnly),
            other => Err(Error::InvalidParameter(format!(
                "unknown protocol '{other}'"
            ))),
        }
    }
}

/// Candidate relays, the selection protocol and a common SNR offset.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    links: Vec<RelayLink>,
    protocol: Protocol,
    snr_scale_db: f64,
}

impl Scenario {
    pub fn new(links: Vec<RelayLink>, protocol: Protocol, snr_scale_db: f64) -> Result<Self> {
        if links.is_empty() {
            return Err(Error::InvalidParameter(
                "scenario needs at least one relay".into(),
            ));
        }
        if !snr_scale_db.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "snr_scale_db must be finite, got {snr_scale_db}"
            )));
        }
        Ok(Self {
            links,
            protocol,
            snr_scale_db,
        })
    }

    pub fn links(&self) -> &[RelayLink] {
        &self.links
    }
    pub fn protocol(&self) -> Protocol {
        self.protocol
    }
    pub fn snr_scale_db(&self) -> f64 {
        self.snr_scale_db
    }
    pub fn len(&self) -> usize {
        self.links.len()
    }
    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn with_protocol(&self, protocol: Protocol) -> Self {
        Self {
            protocol,
            ..self.clone()
        }
    }

    pub fn with_snr_db(&self, snr_scale_db: f64) -> Result<Self> {
        Self::new(self.links.clone(), self.protocol, snr_scale_db)
    }

    /// The first `l` relays.
    pub fn truncated(&self, l: usize) -> Result<Self> {
        Self::new(
            self.links[..l.min(self.len())].to_vec(),
            self.protocol,
            self.snr_scale_db,
        )
    }

    /// Linear factor applied to every Ω.
    pub fn snr_factor(&self) -> f64 {
        10f64.powf(self.snr_scale_db / 10.0)
    }

    /// Links with every Ω multiplied by the SNR factor.
    pub fn scaled_links(&self) -> Result<Vec<RelayLink>> {
        let f = self.snr_factor();
        self.links
            .iter()
            .map(|l| Ok(RelayLink::new(l.hop1.scaled(f)?, l.hop2.scaled(f)?)))
            .collect()
    }

    pub(crate) fn require_analytic(&self) -> Result<()> {
        if self.protocol.has_analytic() {
            Ok(())
        } else {
            Err(Error::Unsupported(
                "CSI-based selection has no analytic form; use montecarlo::simulate".into(),
            ))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UStrategy {
    Decaying,
    Oscillatory,
}

/// Numerical settings of the engine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub gcq_n: usize,
    pub u_tol: QuadTolerance,
    pub u_strategy: UStrategy,
    pub max_u: f64,
    /// Evaluate gamma-like multipath MGFs through Bessel K when the exponent
    /// allows it.
    pub bessel_shortcut: bool,
    /// Interpolate multipath MGFs from cached tables instead of evaluating
    /// each incomplete gamma integral.
    pub mgf_table: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            gcq_n: DEFAULT_GCQ_NODES,
            u_tol: QuadTolerance {
                rel_tol: 1e-10,
                abs_tol: 1e-15,
                max_subdivisions: 400,
            },
            u_strategy: UStrategy::Decaying,
            max_u: 1e30,
            bessel_shortcut: true,
            mgf_table: true,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gcq_n < 8 {
            return Err(Error::InvalidParameter(format!(
                "gcq_n must be >= 8, got {}",
                self.gcq_n
            )));
        }
        if !(self.max_u > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "max_u must be > 0, got {}",
                self.max_u
            )));
        }
        self.u_tol.validate()
    }
}

/// Outcome of an analytic evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerfResult {
    pub analytic_value: f64,
    pub error_estimate: f64,
    /// |∫ h(u) du − 1|.
    pub normalization_residual: f64,
    pub diagnostics: BTreeMap<String, f64>,
    /// Monte Carlo cross-check, when one was run.
    pub mc: Option<crate::montecarlo::McEstimate>,
}

fn diagnostics(law: &EndIntegrand, o: &outer::Outer) -> BTreeMap<String, f64> {
    let mut d = BTreeMap::new();
    d.insert("u_lo".into(), o.u_lo);
    d.insert("u_hi".into(), o.u_hi);
    d.insert("evaluations".into(), o.evaluations as f64);
    d.insert("intervals".into(), o.intervals as f64);
    d.insert("gcq_mass_error".into(), law.gcq_mass_error());
    for (i, w) in law.selection().iter().enumerate() {
        d.insert(format!("selection_{i}"), *w);
    }
    d
}

/// The density-like integrand h(u) of the scenario under SSI selection.
pub fn integrand_ssi(scn: &Scenario, cfg: &EngineConfig, u: f64) -> Result<f64> {
    if !(u > 0.0) {
        return Err(crate::error::domain(
            "integrand_ssi",
            format!("u must be positive, got {u}"),
        ));
    }
    Ok(EndIntegrand::new(&scn.with_protocol(Protocol::Ssi), cfg)?.density(u))
}

fn kernel_bound(spec: &PerfSpec) -> impl Fn(f64) -> f64 + '_ {
    move |u: f64| match spec.kind() {
        PerfKind::Capacity => spec.c() * (u.max(1.0).ln() + 1.0),
        PerfKind::Moment => z_kernel_unchecked(spec, u).max(1.0),
        _ => 1.0,
    }
}

fn zero_scale(spec: &PerfSpec) -> Option<f64> {
    match spec.kind() {
        PerfKind::Mgf => Some(spec.a()),
        _ => None,
    }
}

fn aup_with(law: &EndIntegrand, spec: &PerfSpec, cfg: &EngineConfig) -> Result<PerfResult> {
    let f = |u: f64| z_kernel_unchecked(spec, u);
    let bound = kernel_bound(spec);
    let k = Kernel {
        f: &f,
        at_zero: z_kernel_unchecked(spec, 0.0),
        bound: &bound,
        zero_scale: zero_scale(spec),
    };
    let o = match cfg.u_strategy {
        UStrategy::Oscillatory if k.zero_scale.is_some() => {
            outer::oscillatory(law, &k, &cfg.u_tol, cfg.max_u)?
        }
        _ => outer::decaying(law, std::slice::from_ref(&k), &cfg.u_tol, cfg.max_u)?,
    };
    Ok(PerfResult {
        analytic_value: o.values[0],
        error_estimate: o.errors[0],
        normalization_residual: o.residual,
        diagnostics: diagnostics(law, &o),
        mc: None,
    })
}

/// Average unified performance ∫₀^∞ 𝒵(u) h(u) du for the scenario's protocol.
pub fn aup(scn: &Scenario, spec: &PerfSpec, cfg: &EngineConfig) -> Result<PerfResult> {
    if spec.kind() == PerfKind::Moment {
        return Err(Error::Unsupported(
            "use engine::moments for moment specs".into(),
        ));
    }
    aup_with(&EndIntegrand::new(scn, cfg)?, spec, cfg)
}

/// [`aup`] with each hop's multipath MGF in closed Bessel-K form; every hop
/// must have ξ = ζ = 1.
pub fn aup_gk_fastpath(scn: &Scenario, spec: &PerfSpec, cfg: &EngineConfig) -> Result<PerfResult> {
    if let Some(i) = scn
        .links()
        .iter()
        .position(|l| !l.hop1.is_gk() || !l.hop2.is_gk())
    {
        return Err(Error::InvalidParameter(format!(
            "relay {i}: the GK fast path needs xi = zeta = 1 on both hops"
        )));
    }
    if spec.kind() == PerfKind::Moment {
        return Err(Error::Unsupported(
            "use engine::moments for moment specs".into(),
        ));
    }
    aup_with(&EndIntegrand::new_gk(scn, cfg)?, spec, cfg)
}

/// E[e^{−pγ_end}] by integration between the zeros of J₀(2√(pu)).
pub fn end_mgf(scn: &Scenario, p: f64, cfg: &EngineConfig) -> Result<PerfResult> {
    let spec = PerfSpec::mgf(p)?;
    let cfg = EngineConfig {
        u_strategy: UStrategy::Oscillatory,
        ..*cfg
    };
    aup_with(&EndIntegrand::new(scn, &cfg)?, &spec, &cfg)
}

fn moment_set(law: &EndIntegrand, ks: &[u32], cfg: &EngineConfig) -> Result<Vec<PerfResult>> {
    let specs: Vec<PerfSpec> = ks.iter().map(|k| PerfSpec::moment(*k)).collect();
    let fs: Vec<Box<dyn Fn(f64) -> f64 + '_>> = specs
        .iter()
        .map(|s| Box::new(move |u| z_kernel_unchecked(s, u)) as Box<dyn Fn(f64) -> f64>)
        .collect();
    let bounds: Vec<Box<dyn Fn(f64) -> f64 + '_>> = specs
        .iter()
        .map(|s| Box::new(kernel_bound(s)) as Box<dyn Fn(f64) -> f64>)
        .collect();
    let kernels: Vec<Kernel<'_>> = specs
        .iter()
        .enumerate()
        .map(|(i, s)| Kernel {
            f: fs[i].as_ref(),
            at_zero: z_kernel_unchecked(s, 0.0),
            bound: bounds[i].as_ref(),
            zero_scale: None,
        })
        .collect();
    let o = outer::decaying(law, &kernels, &cfg.u_tol, cfg.max_u)?;
    let diag = diagnostics(law, &o);
    Ok(ks
        .iter()
        .enumerate()
        .map(|(i, _)| PerfResult {
            analytic_value: o.values[i],
            error_estimate: o.errors[i],
            normalization_residual: o.residual,
            diagnostics: diag.clone(),
            mc: None,
        })
        .collect())
}

/// E[γ_endᵏ] = ∫₀^∞ (uᵏ/k!) h(u) du.
pub fn moments(scn: &Scenario, k: u32, cfg: &EngineConfig) -> Result<PerfResult> {
    let law = EndIntegrand::new(scn, cfg)?;
    Ok(moment_set(&law, &[k], cfg)?.remove(0))
}

/// AF⁽ᵏ⁾ = E[γᵏ]/E[γ]ᵏ − 1.
pub fn amount_of_fading(scn: &Scenario, k: u32, cfg: &EngineConfig) -> Result<PerfResult> {
    if k < 1 {
        return Err(Error::InvalidParameter(
            "amount of fading needs k >= 1".into(),
        ));
    }
    let law = EndIntegrand::new(scn, cfg)?;
    let r = moment_set(&law, &[1, k], cfg)?;
    let (m1, mk) = (&r[0], &r[1]);
    let kf = f64::from(k);
    let ratio = mk.analytic_value / m1.analytic_value.powf(kf);
    let rel = mk.error_estimate / mk.analytic_value + kf * m1.error_estimate / m1.analytic_value;
    Ok(PerfResult {
        analytic_value: if k == 1 { 0.0 } else { ratio - 1.0 },
        error_estimate: if k == 1 { 0.0 } else { ratio * rel },
        normalization_residual: m1.normalization_residual,
        diagnostics: m1.diagnostics.clone(),
        mc: None,
    })
}

/// The four-relay parameter set used throughout the examples and tests:
/// first hops with increasingly mild shadowing and decreasing Ω, second
/// hops Nakagami-m without shadowing.
pub fn table1_links() -> Vec<RelayLink> {
    let rows = [
        (1.0, 0.8, 0.5, 0.5, 0.8, 1.0, 1.0),
        (1.2, 0.9, 0.75, 0.75, 0.7, 1.25, 1.0),
        (1.3, 1.0, 1.0, 1.0, 0.6, 1.5, 1.0),
        (1.4, 1.1, 1.25, 1.25, 0.5, 1.75, 1.0),
    ];
    rows.iter()
        .map(|&(m, xi, n, zeta, omega, m2, xi2)| {
            RelayLink::new(
                EgkParams::new(m, xi, n, zeta, omega).expect("valid row"),
                EgkParams::new(m2, xi2, f64::INFINITY, 1.0, 0.9).expect("valid row"),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests;
