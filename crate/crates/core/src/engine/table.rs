//! Tabulated multipath reciprocal MGFs. The engine evaluates M_G(u/s) for
//! every shadowing node at every quadrature point; the table replaces those
//! incomplete-gamma integrals by cubic Hermite interpolation of ln M and
//! ln(−M′) in ln p, with exact slopes at the grid points.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::fading::{EgkParams, GgRecipMgf};
use crate::specfun::{ext_gamma_pair, ln_gamma};

const STEP: f64 = 1.0 / 128.0;
const X_MIN: f64 = -36.0;
// Far left, ln M and ln(−M′) are nearly linear in x and a coarse grid
// suffices; below X_FAR the third incomplete gamma value can overflow.
const STEP_FAR: f64 = 1.0 / 8.0;
const X_FAR: f64 = -300.0;
// Grid ends once ln M or ln(−M′) falls below this.
const LN_FLOOR: f64 = -700.0;

#[derive(Debug)]
pub(crate) struct MgfTable {
    m: f64,
    beta: f64,
    phi: f64,
    ln_gamma_m: f64,
    bessel: bool,
    direct: GgRecipMgf,
    x_max: f64,
    // per node: ln M, d ln M/dx, ln(−M′), d ln(−M′)/dx
    rows: Vec<[f64; 4]>,
    far: Vec<[f64; 4]>,
}

type Key = (u64, u64, bool);

fn cache() -> &'static Mutex<HashMap<Key, Arc<MgfTable>>> {
    static CACHE: OnceLock<Mutex<HashMap<Key, Arc<MgfTable>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

impl MgfTable {
    /// Shared table for the multipath law of `params`; built on first use.
    pub(crate) fn shared(params: &EgkParams, bessel: bool) -> Arc<Self> {
        let key = (params.m().to_bits(), params.xi().to_bits(), bessel);
        if let Some(t) = cache().lock().expect("table cache").get(&key) {
            return Arc::clone(t);
        }
        let t = Arc::new(Self::build(params, bessel));
        cache()
            .lock()
            .expect("table cache")
            .entry(key)
            .or_insert(t)
            .clone()
    }

    fn build(params: &EgkParams, bessel: bool) -> Self {
        let mut t = Self {
            m: params.m(),
            beta: 1.0 / params.xi(),
            phi: params.phi(),
            ln_gamma_m: ln_gamma(params.m()).expect("m >= 1/2"),
            bessel,
            direct: GgRecipMgf::new(params, bessel),
            x_max: X_MIN,
            rows: Vec::new(),
            far: Vec::new(),
        };
        let far_len = ((X_MIN - X_FAR) / STEP_FAR).round() as usize;
        t.far = (0..=far_len)
            .map(|i| {
                t.exact_row(X_FAR + i as f64 * STEP_FAR)
                    .expect("small arguments are representable")
            })
            .collect();
        let mut i = 0;
        loop {
            let x = X_MIN + i as f64 * STEP;
            match t.exact_row(x) {
                Some(row) => t.rows.push(row),
                None => break,
            }
            i += 1;
        }
        t.x_max = X_MIN + (t.rows.len().max(1) - 1) as f64 * STEP;
        t
    }

    /// ln M, its slope in x = ln p, ln(−M′) and its slope, from three
    /// consecutive extended incomplete gamma values.
    fn exact_row(&self, x: f64) -> Option<[f64; 4]> {
        let p = x.exp();
        let b = self.phi * p;
        let (g0, g1) = ext_gamma_pair(self.m, b, self.beta, self.bessel);
        let (_, g2) = ext_gamma_pair(self.m - self.beta, b, self.beta, self.bessel);
        if !(g0 > 0.0 && g1 > 0.0 && g2 > 0.0) {
            return None;
        }
        let mut lm = g0.ln() - self.ln_gamma_m;
        if lm > -0.1 {
            lm = (-self.direct.complement(b)).ln_1p();
        }
        let ld = self.phi.ln() + g1.ln() - self.ln_gamma_m;
        if lm < LN_FLOOR || ld < LN_FLOOR {
            return None;
        }
        // M′ = −φ Γ₁/Γ(m), M″ = φ² Γ₂/Γ(m)
        let dm = -b * g1 / g0;
        let dd = -b * g2 / g1;
        Some([lm.min(0.0), dm, ld, dd])
    }

    /// (M(p), M′(p)).
    pub(crate) fn eval(&self, p: f64) -> (f64, f64) {
        let x = p.ln();
        if x < X_FAR {
            return self.direct.eval(p);
        }
        if x > self.x_max {
            return (0.0, 0.0);
        }
        if x < X_MIN {
            return hermite(&self.far, (x - X_FAR) / STEP_FAR, STEP_FAR);
        }
        hermite(&self.rows, (x - X_MIN) / STEP, STEP)
    }
}

fn hermite(rows: &[[f64; 4]], pos: f64, step: f64) -> (f64, f64) {
    {
        let i = (pos.floor() as usize).min(rows.len().saturating_sub(2));
        let t = pos - i as f64;
        let (a, b) = (&rows[i], &rows[i + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let lm = h00 * a[0] + h10 * step * a[1] + h01 * b[0] + h11 * step * b[1];
        let ld = h00 * a[2] + h10 * step * a[3] + h01 * b[2] + h11 * step * b[3];
        (lm.min(0.0).exp(), -ld.exp())
    }
}
