use std::f64::consts::PI;

use crate::error::{domain, Result};

const EPS: f64 = 1e-16;
const ASYMPTOTIC_START: f64 = 25.0;

/// Bessel function of the first kind, order zero.
pub fn bessel_j0(x: f64) -> Result<f64> {
    check_nonneg("bessel_j0", x)?;
    Ok(j01(x).0)
}

/// Bessel function of the first kind, order one.
pub fn bessel_j1(x: f64) -> Result<f64> {
    check_nonneg("bessel_j1", x)?;
    Ok(j01(x).1)
}

fn check_nonneg(func: &'static str, x: f64) -> Result<()> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(domain(
            func,
            format!("x must be finite and non-negative, got {x}"),
        ));
    }
    Ok(())
}

/// (J0(x), J1(x)) for finite x ≥ 0.
pub(crate) fn j01(x: f64) -> (f64, f64) {
    if x.abs() < 1e-4 {
        let q = 0.25 * x * x;
        (1.0 - q * (1.0 - 0.25 * q), 0.5 * x * (1.0 - 0.5 * q))
    } else if x < ASYMPTOTIC_START {
        j01_miller(x)
    } else {
        (hankel(0.0, x), hankel(1.0, x))
    }
}

/// Backward recurrence normalized by J0 + 2ΣJ_{2k} = 1.
fn j01_miller(x: f64) -> (f64, f64) {
    let mut start = (x + 40.0 + 6.0 * x.cbrt()) as usize;
    if start % 2 == 1 {
        start += 1;
    }
    let two_over_x = 2.0 / x;
    let mut jp1 = 0.0;
    let mut j = 1e-300;
    let mut norm = 0.0;
    for k in (1..=start).rev() {
        let jm1 = k as f64 * two_over_x * j - jp1;
        jp1 = j;
        j = jm1;
        if j.abs() > 1e250 {
            j *= 1e-250;
            jp1 *= 1e-250;
            norm *= 1e-250;
        }
        if k > 1 && (k - 1) % 2 == 0 {
            norm += 2.0 * j;
        }
    }
    let (j0, j1) = (j, jp1);
    norm += j0;
    (j0 / norm, j1 / norm)
}

/// Hankel asymptotic expansion for large x, summed until the terms stop shrinking.
fn hankel(nu: f64, x: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let z8 = 8.0 * x;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut prev = f64::INFINITY;
    let mut k = 1;
    loop {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) / (k as f64 * z8);
        if term.abs() >= prev || term.abs() < EPS * 1e-3 {
            break;
        }
        prev = term.abs();
        // terms alternate between Q (odd k) and P (even k) with sign pattern +,−,−,+
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
        k += 1;
        if k > 200 {
            break;
        }
    }
    let chi = x - (0.5 * nu + 0.25) * PI;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// Modified Bessel function of the second kind K_ν(x).
pub fn bessel_k(nu: f64, x: f64) -> Result<f64> {
    let (scaled, _) = bessel_k_scaled_checked(nu, x)?;
    Ok(scaled * (-x).exp())
}

/// Exponentially scaled K: e^{x} K_ν(x).
pub fn bessel_k_scaled(nu: f64, x: f64) -> Result<f64> {
    Ok(bessel_k_scaled_checked(nu, x)?.0)
}

fn bessel_k_scaled_checked(nu: f64, x: f64) -> Result<(f64, f64)> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(domain(
            "bessel_k",
            format!("x must be positive and finite, got {x}"),
        ));
    }
    if !nu.is_finite() {
        return Err(domain(
            "bessel_k",
            format!("order must be finite, got {nu}"),
        ));
    }
    Ok(k_pair_scaled(nu.abs(), x))
}

/// (e^x K_ν(x), e^x K_{ν+1}(x)) for ν ≥ 0, x > 0.
pub(crate) fn k_pair_scaled(nu: f64, x: f64) -> (f64, f64) {
    let nl = (nu + 0.5).floor();
    let mu = nu - nl;
    let mu2 = mu * mu;
    let xi = 1.0 / x;
    let xi2 = 2.0 * xi;
    let (mut rkmu, mut rk1);
    if x <= 2.0 {
        let x2 = 0.5 * x;
        let pimu = PI * mu;
        let fact = if pimu.abs() < EPS {
            1.0
        } else {
            pimu / pimu.sin()
        };
        let d = -x2.ln();
        let e = mu * d;
        let fact2 = if e.abs() < EPS { 1.0 } else { e.sinh() / e };
        let (g1, g2, gampl, gammi) = temme_gammas(mu);
        let mut ff = fact * (g1 * e.cosh() + g2 * fact2 * d);
        let mut sum = ff;
        let ee = e.exp();
        let mut p = 0.5 * ee / gampl;
        let mut q = 0.5 / (ee * gammi);
        let mut c = 1.0;
        let dd = x2 * x2;
        let mut sum1 = p;
        let mut i = 1.0;
        loop {
            ff = (i * ff + p + q) / (i * i - mu2);
            c *= dd / i;
            p /= i - mu;
            q /= i + mu;
            let del = c * ff;
            sum += del;
            sum1 += c * (p - i * ff);
            if del.abs() < sum.abs() * EPS || i > 500.0 {
                break;
            }
            i += 1.0;
        }
        let scale = x.exp();
        rkmu = sum * scale;
        rk1 = sum1 * xi2 * scale;
    } else {
        // Steed's continued fraction CF2 with Temme's normalization
        let mut b = 2.0 * (1.0 + x);
        let mut d = 1.0 / b;
        let mut h = d;
        let mut delh = d;
        let mut q1 = 0.0;
        let mut q2 = 1.0;
        let a1 = 0.25 - mu2;
        let mut q = a1;
        let mut c = a1;
        let mut a = -a1;
        let mut s = 1.0 + q * delh;
        let mut i = 1.0;
        loop {
            a -= 2.0 * i;
            c = -a * c / (i + 1.0);
            let qnew = (q1 - b * q2) / a;
            q1 = q2;
            q2 = qnew;
            q += c * qnew;
            b += 2.0;
            d = 1.0 / (b + a * d);
            delh *= b * d - 1.0;
            h += delh;
            let dels = q * delh;
            s += dels;
            if (dels / s).abs() < EPS || i > 10_000.0 {
                break;
            }
            i += 1.0;
        }
        rkmu = (PI / (2.0 * x)).sqrt() / s;
        rk1 = rkmu * (mu + x + 0.5 - a1 * h) * xi;
    }
    let mut order = mu;
    for _ in 0..nl as usize {
        let next = (order + 1.0) * xi2 * rk1 + rkmu;
        rkmu = rk1;
        rk1 = next;
        order += 1.0;
    }
    (rkmu, rk1)
}

// Taylor coefficients of 1/Γ(z) = Σ_{k≥1} c_k z^k.
const RGAM: [f64; 26] = [
    1.0,
    0.577_215_664_901_532_860_6,
    -0.655_878_071_520_253_881_1,
    -0.042_002_635_034_095_235_53,
    0.166_538_611_382_291_489_5,
    -0.042_197_734_555_544_336_75,
    -0.009_621_971_527_876_973_562,
    0.007_218_943_246_663_099_542,
    -0.001_165_167_591_859_065_112,
    -0.000_215_241_674_114_950_972_8,
    0.000_128_050_282_388_116_186_2,
    -0.000_020_134_854_780_788_238_66,
    -1.250_493_482_142_670_657e-6,
    1.133_027_231_981_695_882e-6,
    -2.056_338_416_977_607_104e-7,
    6.116_095_104_481_415_818e-9,
    5.002_007_644_469_222_930e-9,
    -1.181_274_570_487_020_145e-9,
    1.043_426_711_691_100_511e-10,
    7.782_263_439_905_071_254e-12,
    -3.696_805_618_642_205_708e-12,
    5.100_370_287_454_475_979e-13,
    -2.058_326_053_566_506_783e-14,
    -5.348_122_539_423_017_982e-15,
    1.226_778_628_238_260_790e-15,
    -1.181_259_301_697_458_770e-16,
];

/// Γ1, Γ2 of Temme's series plus 1/Γ(1+μ) and 1/Γ(1−μ), for |μ| ≤ 1/2.
fn temme_gammas(mu: f64) -> (f64, f64, f64, f64) {
    let m2 = mu * mu;
    let mut g1 = 0.0;
    let mut g2 = 0.0;
    let mut pw = 1.0;
    for k in 0..13 {
        g2 += RGAM[2 * k] * pw;
        g1 -= RGAM[2 * k + 1] * pw;
        pw *= m2;
    }
    (g1, g2, g2 - mu * g1, g2 + mu * g1)
}
