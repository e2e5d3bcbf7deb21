//! The reciprocal MGF of the end-to-end SNR, M(u) = E[e^{−u/γ_end}], as a
//! weighted sum over selected relays and shadowing nodes.

use std::sync::Arc;

use crate::error::Result;
use crate::fading::{EgkParams, GgRecipMgf};
use crate::selection::{gcq_eta, gcq_grid, selection_probabilities, FirstHopEnsemble};
use crate::specfun::{bessel_k_scaled, ln_gamma};
use crate::QuadTolerance;

use super::table::MgfTable;
use super::{EngineConfig, Protocol, Scenario};

#[derive(Debug, Clone)]
enum HopKernel {
    General(GgRecipMgf),
    Table(Arc<MgfTable>),
    /// Gamma multipath (ξ = 1) in closed Bessel-K form.
    Gamma {
        m: f64,
        ln_gamma_m: f64,
    },
}

impl HopKernel {
    fn new(params: &EgkParams, gk_closed_form: bool, bessel: bool, table: bool) -> Self {
        if gk_closed_form {
            Self::Gamma {
                m: params.m(),
                ln_gamma_m: ln_gamma(params.m()).expect("m >= 1/2"),
            }
        } else if table {
            Self::Table(MgfTable::shared(params, bessel))
        } else {
            Self::General(GgRecipMgf::new(params, bessel))
        }
    }

    /// (M(p), M'(p)) of the unit-mean multipath power.
    fn eval(&self, p: f64) -> (f64, f64) {
        match *self {
            Self::General(g) => g.eval(p),
            Self::Table(ref t) => t.eval(p),
            Self::Gamma { m, ln_gamma_m } => {
                if p == 0.0 {
                    let slope = if m > 1.0 {
                        -m / (m - 1.0)
                    } else {
                        f64::NEG_INFINITY
                    };
                    return (1.0, slope);
                }
                // M = 2 (x/2)^m K_m(x)/Γ(m), M' = −2m (x/2)^{m−1} K_{m−1}(x)/Γ(m), x = 2√(mp)
                let x = 2.0 * (m * p).sqrt();
                let lh = (0.5 * x).ln();
                let base = std::f64::consts::LN_2 - x - ln_gamma_m;
                let k0 = bessel_k_scaled(m, x).expect("x > 0");
                let k1 = bessel_k_scaled(m - 1.0, x).expect("x > 0");
                let v = (base + m * lh + k0.ln()).exp();
                let d = -(base + m.ln() + (m - 1.0) * lh + k1.ln()).exp();
                (v.min(1.0), d)
            }
        }
    }
}

/// One hop's reciprocal MGF E[e^{−u/(S G)}] with S on a finite set of nodes.
#[derive(Debug, Clone)]
struct Component {
    kernel: HopKernel,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Component {
    fn eval(&self, u: f64) -> (f64, f64) {
        let (mut v, mut d) = (0.0, 0.0);
        for (s, w) in self.nodes.iter().zip(&self.weights) {
            let (m, dm) = self.kernel.eval(u / s);
            v += w * m;
            d += w * dm / s;
        }
        (v, d)
    }
}

#[derive(Debug, Clone)]
struct Branch {
    weight: f64,
    hop1: Component,
    hop2: Component,
}

/// M(u) and its slope for a scenario; the density-like integrand of the
/// performance integral is h(u) = −M'(u).
#[derive(Debug, Clone)]
pub struct EndIntegrand {
    branches: Vec<Branch>,
    selection: Vec<f64>,
    gcq_mass_error: f64,
}

struct Builder {
    gcq_n: usize,
    gk: bool,
    bessel: bool,
    table: bool,
    mass_error: f64,
}

impl Builder {
    fn kernel(&self, p: &EgkParams) -> HopKernel {
        HopKernel::new(p, self.gk, self.bessel, self.table)
    }

    /// Marginal hop law: a point mass at Ω, or the GCQ collapse of the
    /// shadowing density.
    fn marginal(&mut self, p: &EgkParams) -> Result<Component> {
        let kernel = self.kernel(p);
        if !p.has_shadowing() {
            return Ok(Component {
                kernel,
                nodes: vec![p.omega()],
                weights: vec![1.0],
            });
        }
        let ens = FirstHopEnsemble::new(vec![*p])?;
        let grid = gcq_grid(&ens, self.gcq_n)?;
        let col = gcq_eta(&ens, &grid).column(0);
        let mass: f64 = col.iter().sum();
        self.mass_error = self.mass_error.max((mass - 1.0).abs());
        Ok(Component {
            kernel,
            nodes: grid.nodes,
            weights: col.iter().map(|w| w / mass).collect(),
        })
    }
}

impl EndIntegrand {
    pub fn new(scn: &Scenario, cfg: &EngineConfig) -> Result<Self> {
        Self::build(scn, cfg, false)
    }

    /// Same law with every hop's multipath MGF in closed Bessel-K form;
    /// needs ξ = ζ = 1 on every hop.
    pub fn new_gk(scn: &Scenario, cfg: &EngineConfig) -> Result<Self> {
        Self::build(scn, cfg, true)
    }

    fn build(scn: &Scenario, cfg: &EngineConfig, gk: bool) -> Result<Self> {
        cfg.validate()?;
        scn.require_analytic()?;
        let links = scn.scaled_links()?;
        let l = links.len();
        let mut b = Builder {
            gcq_n: cfg.gcq_n,
            gk,
            bessel: cfg.bessel_shortcut,
            table: cfg.mgf_table,
            mass_error: 0.0,
        };
        let mut branches = Vec::with_capacity(l);
        let mut selection = vec![0.0; l];
        match scn.protocol() {
            Protocol::Ssi => {
                let ens = FirstHopEnsemble::new(links.iter().map(|k| k.hop1).collect())?;
                let tol = QuadTolerance::new(1e-12, 1e-16, 400)?;
                let mu = selection_probabilities(&ens, &tol)?.mu;
                let grid = gcq_grid(&ens, cfg.gcq_n)?;
                let eta = gcq_eta(&ens, &grid);
                b.mass_error = (eta.total() - 1.0).abs();
                for (i, link) in links.iter().enumerate() {
                    let col = eta.column(i);
                    let mass: f64 = col.iter().sum();
                    // relays that are (numerically) never selected
                    if mu[i] == 0.0 || mass <= 0.0 {
                        b.mass_error = b.mass_error.max(mu[i]);
                        continue;
                    }
                    let hop1 = Component {
                        kernel: b.kernel(&link.hop1),
                        nodes: grid.nodes.clone(),
                        weights: col.iter().map(|w| w / mass).collect(),
                    };
                    branches.push(Branch {
                        weight: mu[i],
                        hop1,
                        hop2: b.marginal(&link.hop2)?,
                    });
                }
                selection = mu;
            }
            Protocol::Rr => {
                for (i, link) in links.iter().enumerate() {
                    branches.push(Branch {
                        weight: 1.0 / l as f64,
                        hop1: b.marginal(&link.hop1)?,
                        hop2: b.marginal(&link.hop2)?,
                    });
                    selection[i] = 1.0 / l as f64;
                }
            }
            Protocol::Ap => {
                let best = ap_choice(&links.iter().map(|k| k.hop1).collect::<Vec<_>>());
                branches.push(Branch {
                    weight: 1.0,
                    hop1: b.marginal(&links[best].hop1)?,
                    hop2: b.marginal(&links[best].hop2)?,
                });
                selection[best] = 1.0;
            }
            Protocol::CsiSimOnly => unreachable!("rejected by require_analytic"),
        }
        Ok(Self {
            branches,
            selection,
            gcq_mass_error: b.mass_error,
        })
    }

    /// (M(u), h(u)) with h = −dM/du ≥ 0.
    pub fn eval(&self, u: f64) -> (f64, f64) {
        let (mut m, mut h) = (0.0, 0.0);
        for br in &self.branches {
            let (b, db) = br.hop2.eval(u);
            if b == 0.0 && db == 0.0 {
                continue;
            }
            let (a, da) = br.hop1.eval(u);
            m += br.weight * a * b;
            h -= br.weight * (da * b + a * db);
        }
        (m.min(1.0), h)
    }

    /// E[e^{−u/γ_end}].
    pub fn recip_mgf(&self, u: f64) -> f64 {
        self.eval(u).0
    }

    /// The density-like integrand h(u) = −dM/du.
    pub fn density(&self, u: f64) -> f64 {
        self.eval(u).1
    }

    /// Probability with which each relay is used.
    pub fn selection(&self) -> &[f64] {
        &self.selection
    }

    /// Largest deviation from one of the raw GCQ weight sums.
    pub fn gcq_mass_error(&self) -> f64 {
        self.gcq_mass_error
    }
}

/// Index of the largest first-hop Ω, lowest index on ties.
pub fn ap_choice(hop1: &[EgkParams]) -> usize {
    let mut best = 0;
    for (i, h) in hop1.iter().enumerate() {
        if h.omega() > hop1[best].omega() {
            best = i;
        }
    }
    best
}
