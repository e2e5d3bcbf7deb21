//! Auxiliary kernels 𝒵(u) of the unified performance integral and the
//! per-sample performance maps averaged by the simulator.

use std::f64::consts::{LN_2, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::{ein, j01, ln_gamma, si, upper_inc_gamma_regularized};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerfKind {
    BepCoherent,
    BepNoncoherent,
    BepWojnar,
    Capacity,
    Mgf,
    Moment,
}

impl PerfKind {
    pub fn is_bep(self) -> bool {
        matches!(
            self,
            Self::BepCoherent | Self::BepNoncoherent | Self::BepWojnar
        )
    }
}

/// Binary modulations covered by the closed-form BEP kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modulation {
    Bpsk,
    Bfsk,
    Ncfsk,
    Bdpsk,
}

impl Modulation {
    pub const ALL: [Modulation; 4] = [Self::Bpsk, Self::Bfsk, Self::Ncfsk, Self::Bdpsk];

    /// (a, b) constants of the conditional BEP Γ(b, aγ)/2Γ(b).
    pub fn constants(self) -> (f64, f64) {
        match self {
            Self::Bpsk => (1.0, 0.5),
            Self::Bfsk => (0.5, 0.5),
            Self::Ncfsk => (0.5, 1.0),
            Self::Bdpsk => (1.0, 1.0),
        }
    }

    pub fn spec(self) -> PerfSpec {
        let (a, b) = self.constants();
        PerfSpec::bep_wojnar(a, b).expect("modulation constants are valid")
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Bpsk => "bpsk",
            Self::Bfsk => "bfsk",
            Self::Ncfsk => "ncfsk",
            Self::Bdpsk => "bdpsk",
        }
    }
}

impl fmt::Display for Modulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Modulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bpsk" => Ok(Self::Bpsk),
            "bfsk" => Ok(Self::Bfsk),
            "ncfsk" => Ok(Self::Ncfsk),
            "bdpsk" => Ok(Self::Bdpsk),
            other => Err(Error::InvalidParameter(format!(
                "unknown modulation '{other}'"
            ))),
        }
    }
}

/// A performance metric. Built only through the constructors, which pin the
/// (a, b, c, n) constants each kind requires.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerfSpec {
    kind: PerfKind,
    a: f64,
    b: f64,
    c: f64,
    n_param: u8,
    bandwidth: f64,
    moment_k: u32,
}

fn half_or_one(name: &str, v: f64) -> Result<()> {
    if v == 0.5 || v == 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be 1/2 or 1, got {v}"
        )))
    }
}

impl PerfSpec {
    fn bep(kind: PerfKind, a: f64, b: f64) -> Result<Self> {
        half_or_one("a", a)?;
        half_or_one("b", b)?;
        Ok(Self {
            kind,
            a,
            b,
            c: 1.0,
            n_param: 1,
            bandwidth: 0.0,
            moment_k: 0,
        })
    }

    /// Coherent detection, P = Q(√(2aγ)).
    pub fn bep_coherent(a: f64) -> Result<Self> {
        Self::bep(PerfKind::BepCoherent, a, 0.5)
    }

    /// Non-coherent detection, P = ½e^{−aγ}.
    pub fn bep_noncoherent(a: f64) -> Result<Self> {
        Self::bep(PerfKind::BepNoncoherent, a, 1.0)
    }

    /// Unified binary BEP Γ(b, aγ)/2Γ(b).
    pub fn bep_wojnar(a: f64, b: f64) -> Result<Self> {
        Self::bep(PerfKind::BepWojnar, a, b)
    }

    /// Ergodic capacity W·log₂(1 + γ).
    pub fn capacity(bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "bandwidth must be positive, got {bandwidth}"
            )));
        }
        Ok(Self {
            kind: PerfKind::Capacity,
            a: 1.0,
            b: 1.0,
            c: bandwidth / LN_2,
            n_param: 2,
            bandwidth,
            moment_k: 0,
        })
    }

    /// MGF E[e^{−pγ}].
    pub fn mgf(p: f64) -> Result<Self> {
        if !(p > 0.0) || !p.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "MGF argument must be positive, got {p}"
            )));
        }
        Ok(Self {
            kind: PerfKind::Mgf,
            a: p,
            b: 1.0,
            c: 2.0,
            n_param: 1,
            bandwidth: 0.0,
            moment_k: 0,
        })
    }

    /// Raw moment E[γᵏ].
    pub fn moment(k: u32) -> Self {
        Self {
            kind: PerfKind::Moment,
            a: 1.0,
            b: 1.0,
            c: 1.0,
            n_param: 1,
            bandwidth: 0.0,
            moment_k: k,
        }
    }

    pub fn kind(&self) -> PerfKind {
        self.kind
    }
    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn c(&self) -> f64 {
        self.c
    }
    pub fn n_param(&self) -> u8 {
        self.n_param
    }
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }
    pub fn moment_k(&self) -> u32 {
        self.moment_k
    }

    /// Short label used in reports.
    pub fn label(&self) -> String {
        match self.kind {
            PerfKind::Capacity => format!("capacity(W={})", self.bandwidth),
            PerfKind::Mgf => format!("mgf(p={})", self.a),
            PerfKind::Moment => format!("moment(k={})", self.moment_k),
            _ => format!("bep(a={},b={})", self.a, self.b),
        }
    }
}

/// 𝒵(u), the kernel that turns the end-to-end density-like integrand into
/// the requested metric.
pub fn z_kernel(spec: &PerfSpec, u: f64) -> Result<f64> {
    if !(u >= 0.0) || u.is_nan() {
        return Err(crate::error::domain(
            "z_kernel",
            format!("u must be >= 0, got {u}"),
        ));
    }
    Ok(z_kernel_unchecked(spec, u))
}

pub(crate) fn z_kernel_unchecked(spec: &PerfSpec, u: f64) -> f64 {
    match spec.kind {
        PerfKind::BepCoherent => coherent(spec.a, u),
        PerfKind::BepNoncoherent => noncoherent(spec.a, u),
        PerfKind::BepWojnar => {
            if spec.b == 0.5 {
                coherent(spec.a, u)
            } else {
                noncoherent(spec.a, u)
            }
        }
        PerfKind::Capacity => spec.c * ein(u),
        PerfKind::Mgf => j01(2.0 * (spec.a * u).sqrt()).0,
        PerfKind::Moment => moment_kernel(spec.moment_k, u),
    }
}

fn coherent(a: f64, u: f64) -> f64 {
    0.5 - si(2.0 * (a * u).sqrt()) / PI
}

fn noncoherent(a: f64, u: f64) -> f64 {
    0.5 * j01(2.0 * (a * u).sqrt()).0
}

fn moment_kernel(k: u32, u: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if u == 0.0 {
        return 0.0;
    }
    let k = f64::from(k);
    (k * u.ln() - ln_gamma(k + 1.0).expect("k + 1 > 0")).exp()
}

/// (−1)ᵏ ∂ᵏ/∂pᵏ J₀(2√(pu)) at p = 0, i.e. uᵏ/k!.
pub fn z_mgf_derivative_at_zero(k: u32, u: f64) -> Result<f64> {
    if !(u >= 0.0) {
        return Err(crate::error::domain(
            "z_mgf_derivative_at_zero",
            format!("u must be >= 0, got {u}"),
        ));
    }
    Ok(moment_kernel(k, u))
}

/// Performance conditioned on the instantaneous SNR γ.
pub fn conditional_perf(spec: &PerfSpec, gamma: f64) -> f64 {
    let gamma = gamma.max(0.0);
    match spec.kind {
        PerfKind::BepCoherent | PerfKind::BepNoncoherent | PerfKind::BepWojnar => {
            if spec.b == 1.0 {
                0.5 * (-spec.a * gamma).exp()
            } else {
                0.5 * upper_inc_gamma_regularized(spec.b, spec.a * gamma).unwrap_or(0.0)
            }
        }
        PerfKind::Capacity => spec.bandwidth * gamma.ln_1p() / LN_2,
        PerfKind::Mgf => (-spec.a * gamma).exp(),
        PerfKind::Moment => gamma.powi(spec.moment_k as i32),
    }
}
