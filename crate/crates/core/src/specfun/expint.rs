use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;

use crate::error::{domain, Result};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const EPS: f64 = 1e-16;
const SERIES_LIMIT: f64 = 2.0;
const EIN_SERIES_LIMIT: f64 = 1.0;

/// Sine integral Si(x) = ∫₀ˣ sin(t)/t dt for x ≥ 0.
pub fn sine_integral(x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(domain(
            "sine_integral",
            format!("x must be non-negative, got {x}"),
        ));
    }
    if x.is_infinite() {
        return Ok(FRAC_PI_2);
    }
    Ok(si(x))
}

pub(crate) fn si(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    if x <= SERIES_LIMIT {
        let x2 = x * x;
        let mut term = x;
        let mut sum = x;
        let mut k = 1.0;
        loop {
            term *= -x2 / ((2.0 * k) * (2.0 * k + 1.0));
            let add = term / (2.0 * k + 1.0);
            sum += add;
            if add.abs() < EPS * sum.abs() {
                return sum;
            }
            k += 1.0;
        }
    }
    // E1(ix) by Lentz's continued fraction; Si = π/2 + Im(e^{−ix}·h)
    let tiny = 1e-300;
    let mut b = Complex64::new(1.0, x);
    let mut c = Complex64::new(1.0 / tiny, 0.0);
    let mut d = Complex64::new(1.0, 0.0) / b;
    let mut h = d;
    for i in 2..100_000 {
        let a = -((i - 1) as f64).powi(2);
        b += 2.0;
        d = Complex64::new(1.0, 0.0) / (d * a + b);
        c = b + Complex64::new(a, 0.0) / c;
        let del = c * d;
        h *= del;
        if (del.re - 1.0).abs() + del.im.abs() < EPS {
            break;
        }
    }
    let h = Complex64::new(x.cos(), -x.sin()) * h;
    FRAC_PI_2 + h.im
}

/// Exponential integral Ei(x) for x < 0.
pub fn exp_integral_ei(x: f64) -> Result<f64> {
    if !(x < 0.0) {
        return Err(domain(
            "exp_integral_ei",
            format!("x must be negative, got {x}"),
        ));
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    Ok(-e1(-x))
}

/// E1(z) for z > 0.
pub(crate) fn e1(z: f64) -> f64 {
    if z <= 1.0 {
        -EULER_GAMMA - z.ln() + ein(z)
    } else {
        let mut b = z + 1.0;
        let mut c = 1.0 / 1e-300;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (an * d + b);
            c = b + an / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < EPS {
                break;
            }
        }
        h * (-z).exp()
    }
}

/// Entire exponential integral Ein(u) = ∫₀ᵘ (1 − e^{−t})/t dt = ln u − Ei(−u) + C.
pub fn ein(u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    if u <= EIN_SERIES_LIMIT {
        let mut term = 1.0;
        let mut sum = 0.0;
        let mut k = 1.0;
        loop {
            term *= -u / k;
            let add = -term / k;
            sum += add;
            if add.abs() < EPS * sum.abs() {
                return sum;
            }
            k += 1.0;
        }
    }
    u.ln() + e1(u) + EULER_GAMMA
}
