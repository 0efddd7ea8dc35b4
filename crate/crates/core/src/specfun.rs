//! Marcum Q-function of order one and the two-degree-of-freedom non-central
//! chi-square CDF built on it.
//!
//! Two evaluation routes are used:
//!
//! * an ascending series `Q1 = e^{-(b-a)²/2} Σ (a/b)^k Ĩ_k(ab)` in exponentially
//!   scaled Bessel functions `Ĩ_k(x) = e^{-x} I_k(x)`, with the ratios
//!   `I_k / I_{k-1}` obtained by backward recurrence;
//! * for large `ξ = ab`, an erfc-based expansion of the exact representation
//!
//!   ```text
//!   Q1(a, b) = ξ ∫_{u0}^∞ e^{-ξu²/2} [ Ĩ1/√(u²+4) + Ĩ0 (u²+2)/(2√(u²+4)) + Ĩ0 u/2 ] du,
//!   u0 = (b - a)/√ξ
//!   ```
//!
//!   where the bracket is expanded in powers of `u²` and each moment
//!   `∫ u^{2m} e^{-ξu²/2}` is an incomplete-gamma integral generated from
//!   `erfc` by recurrence.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecFunError {
    #[error("{name} must be finite and non-negative, got {value}")]
    Domain { name: &'static str, value: f64 },
}

/// Above this product `ab` the erfc expansion replaces the Bessel series.
pub(crate) const ASYMPTOTIC_CROSSOVER: f64 = 30.0;
/// The `u²` expansion has radius 2; stay well inside it.
const ASYMPTOTIC_MAX_U0: f64 = 1.0;

const UNDERFLOW: f64 = 1e-300;
const ONE_MINUS: f64 = 1.0 - 1e-16;
/// `ln(1e300)`: beyond this `e^{-(b-a)²/2}` bounds Q1 below the underflow floor.
const LOWER_TAIL_CUTOFF: f64 = 690.8;
/// `1 - Q1(a, b) <= e^{-(a-b)²/2} / 2` for `a > b`; past this it is below 1e-16.
const UPPER_TAIL_CUTOFF: f64 = 37.5;

fn check(name: &'static str, value: f64) -> Result<(), SpecFunError> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(SpecFunError::Domain { name, value })
    }
}

/// Marcum Q-function `Q1(a, b)`: the probability that a Rician envelope with
/// unit per-component variance and LoS amplitude `a` exceeds `b`.
pub fn marcum_q1(a: f64, b: f64) -> Result<f64, SpecFunError> {
    check("a", a)?;
    check("b", b)?;
    Ok(clamp_probability(marcum_q1_unclamped(a, b)))
}

/// CDF at `x` of the non-central chi-square law with two degrees of freedom.
pub fn noncentral_chi2_cdf(x: f64, noncentrality: f64) -> Result<f64, SpecFunError> {
    check("x", x)?;
    check("noncentrality", noncentrality)?;
    Ok(1.0 - marcum_q1(noncentrality.sqrt(), x.sqrt())?)
}

/// `marcum_q1` for arguments the caller already knows are valid.
pub(crate) fn q1_clamped(a: f64, b: f64) -> f64 {
    debug_assert!(a >= 0.0 && b >= 0.0 && a.is_finite() && b.is_finite());
    clamp_probability(marcum_q1_unclamped(a, b))
}

fn clamp_probability(p: f64) -> f64 {
    if p < UNDERFLOW {
        0.0
    } else if p > ONE_MINUS {
        1.0
    } else {
        p
    }
}

fn marcum_q1_unclamped(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        return 1.0;
    }
    if a == 0.0 {
        return (-0.5 * b * b).exp();
    }
    let d = b - a;
    let half_d2 = 0.5 * d * d;
    if d > 0.0 && half_d2 > LOWER_TAIL_CUTOFF {
        return 0.0;
    }
    if d < 0.0 && half_d2 > UPPER_TAIL_CUTOFF {
        return 1.0;
    }
    let xi = a * b;
    if xi >= ASYMPTOTIC_CROSSOVER && (d / xi.sqrt()).abs() <= ASYMPTOTIC_MAX_U0 {
        q1_asymptotic(a, b)
    } else {
        q1_series(a, b)
    }
}

/// Series route. Valid for every `a, b > 0`; cost grows like `sqrt(ab)`.
pub(crate) fn q1_series(a: f64, b: f64) -> f64 {
    let x = a * b;
    let d = b - a;
    let prefactor = (-0.5 * d * d).exp();
    let (q, first) = if b >= a { (a / b, 0) } else { (b / a, 1) };

    // Index past which q^k I_k(x) / I_0(x) < 1e-18, using the upper bound
    // I_k / I_{k-1} < x / (k - 1/2 + sqrt((k + 1/2)^2 + x^2)).
    let mut log_bound = 0.0;
    let mut k_max = 0usize;
    while log_bound > -41.5 {
        k_max += 1;
        let k = k_max as f64;
        log_bound += (q * x / (k - 0.5 + ((k + 0.5) * (k + 0.5) + x * x).sqrt())).ln();
    }
    let k_max = k_max.max(4);
    let k_start = k_max + 10 + (40.0 * x).sqrt().ceil() as usize;

    // Backward recurrence for r_k = I_k / I_{k-1}: 1/r_k = 2k/x + r_{k+1}.
    let mut ratios = vec![0.0; k_max + 1];
    let kk = (k_start + 1) as f64;
    let mut r = x / (kk + (kk * kk + x * x).sqrt());
    for k in (1..=k_start).rev() {
        r = 1.0 / (2.0 * k as f64 / x + r);
        if k <= k_max {
            ratios[k] = r;
        }
    }

    let mut bessel = bessel_i0_scaled(x);
    let mut power = 1.0;
    let mut sum = if first == 0 { bessel } else { 0.0 };
    for ratio in ratios.iter().skip(1) {
        bessel *= ratio;
        power *= q;
        let term = power * bessel;
        sum += term;
        if term <= 1e-18 * sum || term == 0.0 {
            break;
        }
    }
    if first == 0 {
        prefactor * sum
    } else {
        1.0 - prefactor * sum
    }
}

/// erfc-based route for large `ab` with `|b - a| <= sqrt(ab)`.
pub(crate) fn q1_asymptotic(a: f64, b: f64) -> f64 {
    let xi = a * b;
    let d = b - a;
    let u0 = d / xi.sqrt();
    let gauss = (-0.5 * d * d).exp();
    let i0 = bessel_i0_scaled(xi);
    let i1 = bessel_i1_scaled(xi);

    // Moments M_n = ∫_{u0}^∞ u^n e^{-ξu²/2} du, even n only.
    let mut moment = (PI / (2.0 * xi)).sqrt() * libm::erfc(d * FRAC_1_SQRT_2);
    // Taylor coefficients of 1/√(u²+4) and (u²+2)/(2√(u²+4)) in u².
    let mut g = 0.5;
    let mut g_prev = 0.0;
    let mut u_pow = 1.0 / u0; // u0^{2m-1}, starting at m = 0
    let mut sum = 0.0;
    let mut last = f64::INFINITY;
    for m in 0..60 {
        if m > 0 {
            let mf = m as f64;
            g_prev = g;
            g *= -(2.0 * mf - 1.0) / (8.0 * mf);
            u_pow *= u0 * u0;
            let tail = if u0 == 0.0 { 0.0 } else { u_pow * gauss };
            moment = (tail + (2.0 * mf - 1.0) * moment) / xi;
        }
        let h = g + 0.5 * g_prev;
        let term = (i1 * g + i0 * h) * moment;
        if term.abs() > last && m > 1 {
            break;
        }
        sum += term;
        last = term.abs();
        if term.abs() <= 1e-18 * sum.abs() {
            break;
        }
    }
    xi * sum + 0.5 * i0 * gauss
}

/// `e^{-x} I_0(x)` for `x >= 0`.
pub(crate) fn bessel_i0_scaled(x: f64) -> f64 {
    if x < 25.0 {
        power_series_scaled(0, x)
    } else {
        hankel_scaled(0.0, x)
    }
}

/// `e^{-x} I_1(x)` for `x >= 0`.
pub(crate) fn bessel_i1_scaled(x: f64) -> f64 {
    if x < 25.0 {
        power_series_scaled(1, x)
    } else {
        hankel_scaled(1.0, x)
    }
}

/// `e^{-x} I_ν(x)` for ν ∈ {0, 1} from the ascending power series.
fn power_series_scaled(nu: u32, x: f64) -> f64 {
    let q = 0.25 * x * x;
    let nu_f = nu as f64;
    let mut term = if nu == 0 { 1.0 } else { 0.5 * x };
    let mut sum = term;
    let mut k = 1.0;
    while term > 1e-18 * sum {
        term *= q / (k * (k + nu_f));
        sum += term;
        k += 1.0;
    }
    sum * (-x).exp()
}

/// Large-argument expansion of `e^{-x} I_ν(x)`, truncated at its smallest term.
fn hankel_scaled(nu: f64, x: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        let next = -term * (mu - odd * odd) / (kf * 8.0 * x);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            break;
        }
    }
    sum / (2.0 * PI * x).sqrt()
}
