//! The outer u-integral ∫₀^∞ 𝒵(u) h(u) du.

use crate::error::{Error, Result};
use crate::quad::{integrate_vec_with_breaks, QuadTolerance, VecQuadResult};
use crate::specfun::j01;

use super::law::EndIntegrand;

// Mass of h(u) left out below u_lo and above u_hi.
const HEAD_MASS: f64 = 1e-14;
const TAIL_MASS: f64 = 1e-17;
// Width in ln u of the initial panels.
const PANEL_WIDTH: f64 = 3.0;
const MAX_OSC_INTERVALS: usize = 2000;
const STALL_FACTOR: f64 = 1e3;

/// One kernel of a batched outer integral.
pub(crate) struct Kernel<'a> {
    pub f: &'a dyn Fn(f64) -> f64,
    /// Value at u = 0.
    pub at_zero: f64,
    /// Bound on |𝒵(u)| for u ≥ u0, used for the tail.
    pub bound: &'a dyn Fn(f64) -> f64,
    /// Zeros used by the oscillatory strategy, if any.
    pub zero_scale: Option<f64>,
}

pub(crate) struct Outer {
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
    pub residual: f64,
    pub u_lo: f64,
    pub u_hi: f64,
    pub evaluations: usize,
    pub intervals: usize,
}

fn range(law: &EndIntegrand, kernels: &[Kernel<'_>], max_u: f64) -> Result<(f64, f64, f64, f64)> {
    let mut u_lo = 1.0;
    let mut head = 1.0 - law.recip_mgf(u_lo);
    while head > HEAD_MASS && u_lo > 1e-290 {
        u_lo *= 1e-2;
        head = 1.0 - law.recip_mgf(u_lo);
    }
    let tail_of = |u: f64, m: f64| {
        kernels
            .iter()
            .map(|k| m * (k.bound)(u).max(1.0))
            .fold(m, f64::max)
    };
    let mut u_hi = 1.0;
    let mut tail = law.recip_mgf(u_hi);
    while tail_of(u_hi, tail) > TAIL_MASS {
        if u_hi >= max_u {
            if kernels.iter().any(|k| (k.bound)(max_u) > 1.0) {
                return Err(Error::Divergent(format!(
                    "kernel-weighted tail still {:e} at max_u = {max_u:e}",
                    tail_of(u_hi, tail)
                )));
            }
            break;
        }
        u_hi = (u_hi * 4.0).min(max_u);
        tail = law.recip_mgf(u_hi);
    }
    Ok((u_lo, head.max(0.0), u_hi, tail))
}

fn log_breaks(a: f64, b: f64) -> Vec<f64> {
    let n = ((b - a) / PANEL_WIDTH).ceil().max(1.0) as usize;
    (1..n).map(|i| a + (b - a) * i as f64 / n as f64).collect()
}

/// Integrand vector in t = ln u: [u h, u h 𝒵₁, u h 𝒵₂, …].
fn log_integrand<'a>(
    law: &'a EndIntegrand,
    kernels: &'a [Kernel<'a>],
) -> impl FnMut(f64, &mut [f64]) + 'a {
    move |t, out| {
        let u = t.exp();
        let w = u * law.density(u);
        out[0] = w;
        for (o, k) in out[1..].iter_mut().zip(kernels) {
            *o = if w == 0.0 { 0.0 } else { w * (k.f)(u) };
        }
    }
}

fn linear_integrand<'a>(
    law: &'a EndIntegrand,
    kernels: &'a [Kernel<'a>],
) -> impl FnMut(f64, &mut [f64]) + 'a {
    move |u, out| {
        let w = law.density(u);
        out[0] = w;
        for (o, k) in out[1..].iter_mut().zip(kernels) {
            *o = if w == 0.0 { 0.0 } else { w * (k.f)(u) };
        }
    }
}

/// Adaptive quadrature in ln u over the whole effective support.
pub(crate) fn decaying(
    law: &EndIntegrand,
    kernels: &[Kernel<'_>],
    tol: &QuadTolerance,
    max_u: f64,
) -> Result<Outer> {
    let (u_lo, head, u_hi, tail) = range(law, kernels, max_u)?;
    let (a, b) = (u_lo.ln(), u_hi.ln());
    let dim = kernels.len() + 1;
    let r = integrate_vec_with_breaks(
        log_integrand(law, kernels),
        dim,
        a,
        b,
        &log_breaks(a, b),
        tol,
    );
    accept(&r, tol, "outer u-integral")?;
    let mut values = Vec::with_capacity(kernels.len());
    let mut errors = Vec::with_capacity(kernels.len());
    for (i, k) in kernels.iter().enumerate() {
        values.push(r.values[i + 1] + k.at_zero * head);
        errors.push(r.errors[i + 1] + ((k.bound)(u_hi) * tail) + head * 1e-3);
    }
    Ok(Outer {
        values,
        errors,
        residual: (head + r.values[0] + tail - 1.0).abs(),
        u_lo,
        u_hi,
        evaluations: r.evaluations,
        intervals: 1,
    })
}

/// Accepts a converged result, or one that stalled within a small factor of
/// the target (evaluation noise); its error estimate is reported either way.
fn accept(r: &VecQuadResult, tol: &QuadTolerance, what: &str) -> Result<()> {
    let close = r
        .values
        .iter()
        .zip(&r.errors)
        .all(|(v, e)| *e <= STALL_FACTOR * tol.target(*v));
    if r.converged || close {
        Ok(())
    } else {
        Err(Error::NoConvergence {
            what: what.into(),
            error: r.errors.iter().copied().fold(0.0, f64::max),
        })
    }
}

/// j-th positive zero of J₀ (j ≥ 1).
pub(crate) fn j0_zero(j: usize) -> f64 {
    let b = (j as f64 - 0.25) * std::f64::consts::PI;
    let b2 = 1.0 / (b * b);
    let mut x = b + (1.0 / (8.0 * b)) * (1.0 - b2 * (31.0 / 48.0 - b2 * 3779.0 / 1920.0));
    for _ in 0..4 {
        let (j0, j1) = j01(x);
        let dx = j0 / j1;
        x += dx;
        if dx.abs() < 1e-16 * x {
            break;
        }
    }
    x
}

/// Wynn's epsilon algorithm on a sequence of partial sums; returns the last
/// two even-column estimates.
pub(crate) fn wynn_epsilon(s: &[f64]) -> (f64, f64) {
    let n = s.len();
    if n < 3 {
        let last = *s.last().unwrap_or(&0.0);
        let prev = if n >= 2 { s[n - 2] } else { last };
        return (last, prev);
    }
    let mut table: Vec<Vec<f64>> = vec![s.to_vec()];
    let mut prev_col = vec![0.0; n + 1];
    let mut best = (s[n - 1], s[n - 2]);
    let mut k = 0;
    loop {
        let cur = &table[k];
        if cur.len() < 2 {
            break;
        }
        let mut next = Vec::with_capacity(cur.len() - 1);
        for i in 0..cur.len() - 1 {
            let diff = cur[i + 1] - cur[i];
            if diff == 0.0 {
                return best;
            }
            next.push(prev_col[i + 1] + 1.0 / diff);
        }
        prev_col = cur.clone();
        k += 1;
        if k % 2 == 0 && next.len() >= 2 {
            let m = next.len();
            best = (next[m - 1], next[m - 2]);
        }
        table.push(next);
        if k > 20 {
            break;
        }
    }
    best
}

/// Integration between consecutive zeros of an oscillating kernel J₀(2√(au))
/// with epsilon acceleration of the partial sums.
pub(crate) fn oscillatory(
    law: &EndIntegrand,
    kernel: &Kernel<'_>,
    tol: &QuadTolerance,
    max_u: f64,
) -> Result<Outer> {
    let a = kernel
        .zero_scale
        .ok_or_else(|| Error::Unsupported("kernel has no oscillation zeros".into()))?;
    let kernels = std::slice::from_ref(kernel);
    let (u_lo, head, u_hi, tail) = range(law, kernels, max_u)?;
    let zero = |j: usize| {
        let z = j0_zero(j);
        z * z / (4.0 * a)
    };
    let mut j = 1;
    while zero(j) <= u_lo {
        j += 1;
    }
    let mut evaluations = 0;
    let mut err_sum = 0.0;
    let first = zero(j).min(u_hi);
    let (la, lb) = (u_lo.ln(), first.ln());
    let r = integrate_vec_with_breaks(
        log_integrand(law, kernels),
        2,
        la,
        lb,
        &log_breaks(la, lb),
        tol,
    );
    evaluations += r.evaluations;
    let mut converged = accept(&r, tol, "").is_ok();
    err_sum += r.errors[1];
    let mut mass = r.values[0];
    let mut partial = vec![r.values[1] + kernel.at_zero * head];
    let mut lo = first;
    let mut intervals = 1;
    let mut accelerated = None;
    while lo < u_hi && intervals < MAX_OSC_INTERVALS {
        j += 1;
        let hi = zero(j).min(u_hi);
        let r = integrate_vec_with_breaks(linear_integrand(law, kernels), 2, lo, hi, &[], tol);
        evaluations += r.evaluations;
        converged &= accept(&r, tol, "").is_ok();
        err_sum += r.errors[1];
        mass += r.values[0];
        partial.push(partial.last().unwrap() + r.values[1]);
        lo = hi;
        intervals += 1;
        if partial.len() >= 5 {
            let (acc, prev) = wynn_epsilon(&partial);
            if (acc - prev).abs() < 0.1 * tol.target(acc) {
                accelerated = Some((acc, (acc - prev).abs()));
                break;
            }
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            what: "oscillatory outer integral".into(),
            error: err_sum,
        });
    }
    // stopping early leaves the remaining mass of h to the acceleration
    let (value, accel_err) = accelerated.unwrap_or((*partial.last().unwrap(), 0.0));
    let rest = if lo < u_hi { law.recip_mgf(lo) } else { tail };
    Ok(Outer {
        values: vec![value],
        errors: vec![
            err_sum + accel_err + if accelerated.is_some() { 0.0 } else { tail } + head * 1e-3,
        ],
        residual: (head + mass + rest - 1.0).abs(),
        u_lo,
        u_hi: lo,
        evaluations,
        intervals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn j0_zeros() {
        let known = [
            2.404_825_557_695_773,
            5.520_078_110_286_311,
            8.653_727_912_911_013,
        ];
        for (i, z) in known.iter().enumerate() {
            assert!((j0_zero(i + 1) - z).abs() < 1e-13);
        }
        for j in 1..200 {
            assert!(j01(j0_zero(j)).0.abs() < 1e-14);
        }
    }

    #[test]
    fn wynn_accelerates_alternating_series() {
        // ln 2 = 1 − 1/2 + 1/3 − …
        let mut s = Vec::new();
        let mut acc = 0.0;
        for k in 1..=20 {
            acc += if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64;
            s.push(acc);
        }
        let (v, _) = wynn_epsilon(&s);
        assert!((v - std::f64::consts::LN_2).abs() < 1e-11);
        assert!((s[19] - std::f64::consts::LN_2).abs() > 1e-2);
    }
}
