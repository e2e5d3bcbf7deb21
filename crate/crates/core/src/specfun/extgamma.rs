use crate::error::{domain, Error, Result};
use crate::quad::{integrate_with_breaks, QuadResult, QuadTolerance};

use super::bessel::k_pair_scaled;
use super::gamma::{gamma_fn, upper_inc_gamma};

// Trapezoid step in t = ln r: a fraction of the peak width, capped by the
// half-width of the strip of analyticity that the b·e^{−βt} term allows.
const STEP_SIGMA: f64 = 0.5;
const STEP_CAP: f64 = 0.3;
// Integrand is negligible once its log drops this far below the peak.
const LOG_DROP: f64 = 45.0;
// Peaks below this log value cannot contribute a representable result.
const UNDERFLOW: f64 = -760.0;

/// Extended incomplete gamma Γ(α, x, b, β) = ∫ₓ^∞ r^{α−1} exp(−r − b r^{−β}) dr.
pub fn ext_inc_gamma(alpha: f64, x: f64, b: f64, beta: f64) -> Result<f64> {
    check(alpha, x, b, beta)?;
    if b == 0.0 {
        if x == 0.0 {
            if alpha <= 0.0 {
                return Err(Error::Divergent(format!(
                    "ext_inc_gamma with b = 0, x = 0 needs alpha > 0, got {alpha}"
                )));
            }
            return gamma_fn(alpha);
        }
        if alpha > 0.0 {
            return upper_inc_gamma(alpha, x);
        }
    }
    if x == 0.0 {
        return Ok(ln_ext_inc_gamma_origin(alpha, b, beta)?.exp());
    }
    let r = ext_inc_gamma_quadrature(alpha, x, b, beta, &QuadTolerance::default())?;
    Ok(r.require("ext_inc_gamma")?.value)
}

fn check(alpha: f64, x: f64, b: f64, beta: f64) -> Result<()> {
    if !alpha.is_finite() {
        return Err(domain(
            "ext_inc_gamma",
            format!("alpha must be finite, got {alpha}"),
        ));
    }
    if !(x >= 0.0) || !x.is_finite() {
        return Err(domain(
            "ext_inc_gamma",
            format!("x must be finite and non-negative, got {x}"),
        ));
    }
    if !(b >= 0.0) || !b.is_finite() {
        return Err(domain(
            "ext_inc_gamma",
            format!("b must be finite and non-negative, got {b}"),
        ));
    }
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(domain(
            "ext_inc_gamma",
            format!("beta must be positive, got {beta}"),
        ));
    }
    Ok(())
}

/// ln Γ(α, 0, b, β) for b > 0.
pub(crate) fn ln_ext_inc_gamma_origin(alpha: f64, b: f64, beta: f64) -> Result<f64> {
    // upward recurrence in K overflows for large orders
    if beta == 1.0 && alpha.abs() < 100.0 {
        return Ok(ln_bessel_form(alpha, b));
    }
    trapezoid_controlled(alpha, b, beta)
}

/// 2 b^{α/2} K_α(2√b), evaluated through the scaled Bessel function.
fn bessel_form(alpha: f64, b: f64) -> f64 {
    ln_bessel_form(alpha, b).exp()
}

fn ln_bessel_form(alpha: f64, b: f64) -> f64 {
    let z = 2.0 * b.sqrt();
    let (k, _) = k_pair_scaled(alpha.abs(), z);
    std::f64::consts::LN_2 + 0.5 * alpha * b.ln() + k.ln() - z
}

/// Adaptive Gauss–Kronrod evaluation of the defining integral in t = ln r,
/// split at the mode of the log-integrand. Never takes the Bessel shortcut.
pub fn ext_inc_gamma_quadrature(
    alpha: f64,
    x: f64,
    b: f64,
    beta: f64,
    tol: &QuadTolerance,
) -> Result<QuadResult> {
    check(alpha, x, b, beta)?;
    tol.validate()?;
    if b == 0.0 && x == 0.0 && alpha <= 0.0 {
        return Err(Error::Divergent(format!(
            "ext_inc_gamma with b = 0, x = 0 needs alpha > 0, got {alpha}"
        )));
    }
    let f = |t: f64| alpha * t - t.exp() - b * (-beta * t).exp();
    let t_min = if x > 0.0 { x.ln() } else { f64::NEG_INFINITY };
    let mode = if b > 0.0 {
        Exponent::new(alpha, b, beta).mode().max(t_min)
    } else if alpha > 0.0 {
        alpha.ln().max(t_min)
    } else {
        t_min
    };
    let fmax = f(mode);
    let walk = |dir: f64| {
        let mut step = 1.0;
        loop {
            let t = mode + dir * step;
            if f(t) - fmax < -LOG_DROP - 5.0 || step > 1e4 {
                return t;
            }
            step *= 1.5;
        }
    };
    let lo = if x > 0.0 { t_min } else { walk(-1.0) };
    let hi = walk(1.0);
    let breaks: Vec<f64> = if mode > lo { vec![mode] } else { vec![] };
    let scale = fmax.exp();
    let inner_tol = QuadTolerance {
        rel_tol: tol.rel_tol,
        abs_tol: tol.abs_tol / scale.max(f64::MIN_POSITIVE),
        max_subdivisions: tol.max_subdivisions,
    };
    let r = integrate_with_breaks(|t| (f(t) - fmax).exp(), lo, hi, &breaks, &inner_tol);
    Ok(QuadResult {
        value: r.value * scale,
        error: r.error * scale,
        evaluations: r.evaluations,
        converged: r.converged,
    })
}

fn trapezoid_controlled(alpha: f64, b: f64, beta: f64) -> Result<f64> {
    let e = Exponent::new(alpha, b, beta);
    let mode = e.mode();
    let mut h = e.step(mode);
    let mut prev = e.trapezoid_log(mode, h);
    for _ in 0..6 {
        h *= 0.5;
        let next = e.trapezoid_log(mode, h);
        if (next - prev).abs() < 1e-13 {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::NoConvergence {
        what: "ext_inc_gamma trapezoid".into(),
        error: 0.0,
    })
}

/// The pair (Γ(α, 0, b, β), Γ(α − β, 0, b, β)) for b > 0, on one shared grid.
///
/// When `bessel` is set and β = 1 the closed form in K is used instead.
pub(crate) fn ext_gamma_pair(alpha: f64, b: f64, beta: f64, bessel: bool) -> (f64, f64) {
    debug_assert!(b > 0.0 && beta > 0.0);
    if bessel && beta == 1.0 && alpha.abs() < 100.0 {
        return (bessel_form(alpha, b), bessel_form(alpha - 1.0, b));
    }
    let e1 = Exponent::new(alpha, b, beta);
    let e2 = Exponent::new(alpha - beta, b, beta);
    let m1 = e1.mode();
    let m2 = e2.mode();
    let f1 = e1.value(m1);
    let f2 = e2.value(m2);
    if f1 < UNDERFLOW && f2 < UNDERFLOW {
        return (0.0, 0.0);
    }
    // offset of the second exponent at m1 below its own peak
    let lift = e2.drop(m2, m1 - m2);
    let h = e1.step(m1).min(e2.step(m2));
    // grid anchored at m1; walk right until both integrands are negligible,
    // left until both are and the second peak has been passed.
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    for dir in [1.0, -1.0] {
        let mut k: u32 = if dir > 0.0 { 0 } else { 1 };
        loop {
            let d = dir * k as f64 * h;
            let g1 = e1.drop(m1, d);
            let g2 = g1 - beta * d + lift;
            s1 += g1.exp();
            s2 += g2.exp();
            let done = g1 < -LOG_DROP && g2 < -LOG_DROP && (dir > 0.0 || m1 + d < m2);
            if done || k > 1_000_000 {
                break;
            }
            k += 1;
        }
    }
    ((f1 + (h * s1).ln()).exp(), (f2 + (h * s2).ln()).exp())
}

/// e^{ln_a}·(e^x − 1 − x) without forming 0·∞ when the weight underflows.
fn scaled_expm1_minus_x(ln_a: f64, x: f64) -> f64 {
    let a = ln_a.exp();
    let f = expm1_minus_x(x);
    if a > 0.0 && f.is_finite() {
        a * f
    } else {
        (ln_a + x).exp() - a * (1.0 + x)
    }
}

/// e^x − 1 − x, accurate near zero.
fn expm1_minus_x(x: f64) -> f64 {
    if x.abs() < 0.1 {
        let mut term = 0.5 * x * x;
        let mut sum = term;
        let mut k = 3.0;
        while term.abs() > 1e-17 * sum.abs() {
            term *= x / k;
            sum += term;
            k += 1.0;
        }
        sum
    } else {
        x.exp_m1() - x
    }
}

/// f(t) = αt − e^t − b e^{−βt}, strictly concave for b > 0.
struct Exponent {
    alpha: f64,
    b: f64,
    beta: f64,
}

impl Exponent {
    fn new(alpha: f64, b: f64, beta: f64) -> Self {
        Self { alpha, b, beta }
    }

    fn value(&self, t: f64) -> f64 {
        self.alpha * t - t.exp() - self.b * (-self.beta * t).exp()
    }

    /// f(mode + d) − f(mode). With f'(mode) = 0, α = e^mode − βb e^{−β·mode},
    /// which leaves two non-positive terms and nothing to cancel.
    fn drop(&self, mode: f64, d: f64) -> f64 {
        let ln_bm = self.b.ln() - self.beta * mode;
        -scaled_expm1_minus_x(mode, d) - scaled_expm1_minus_x(ln_bm, -self.beta * d)
    }

    fn slope(&self, t: f64) -> f64 {
        self.alpha - t.exp() + self.b * self.beta * (-self.beta * t).exp()
    }

    fn curvature(&self, t: f64) -> f64 {
        -t.exp() - self.b * self.beta * self.beta * (-self.beta * t).exp()
    }

    /// Root of the slope by Newton's method safeguarded with a bracket.
    fn mode(&self) -> f64 {
        if self.b == 0.0 {
            return self.alpha.max(f64::MIN_POSITIVE).ln();
        }
        // the slope is decreasing; grow a bracket from a cheap guess
        let guess = if self.alpha > 1.0 {
            self.alpha.ln()
        } else {
            ((self.b * self.beta).ln() / (1.0 + self.beta)).clamp(-700.0, 700.0)
        };
        let mut lo = guess - 1.0;
        let mut hi = guess + 1.0;
        let mut width = 1.0;
        while self.slope(lo) < 0.0 {
            width *= 2.0;
            lo = guess - width;
        }
        width = 1.0;
        while self.slope(hi) > 0.0 {
            width *= 2.0;
            hi = guess + width;
        }
        let mut t = 0.5 * (lo + hi);
        for _ in 0..200 {
            let s = self.slope(t);
            if s > 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            let mut next = t - s / self.curvature(t);
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - t).abs() <= 1e-14 * (1.0 + t.abs()) {
                return next;
            }
            t = next;
        }
        t
    }

    fn step(&self, mode: f64) -> f64 {
        let sigma = 1.0 / (-self.curvature(mode)).sqrt();
        (STEP_SIGMA * sigma).min(STEP_CAP / self.beta.max(1.0))
    }

    /// ln of the trapezoid sum with step h anchored at the mode.
    fn trapezoid_log(&self, mode: f64, h: f64) -> f64 {
        let fmax = self.value(mode);
        let mut sum = 1.0;
        for dir in [1.0, -1.0] {
            let mut k = 1.0;
            loop {
                let g = self.drop(mode, dir * k * h);
                sum += g.exp();
                if g < -LOG_DROP || k > 1e6 {
                    break;
                }
                k += 1.0;
            }
        }
        fmax + (h * sum).ln()
    }
}
