//! Reference implementations used only as test oracles. They share no code
//! with the library: Q1 comes from direct quadrature of the Rician density.

#![allow(dead_code)]

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// `e^{-z} I0(z)` as `(1/π) ∫_0^π e^{z(cos θ - 1)} dθ` by the trapezoid rule,
/// which converges geometrically for this periodic integrand.
pub fn i0_scaled_trapezoid(z: f64) -> f64 {
    let n = 10 + (5.0 * z.sqrt()).ceil() as usize;
    let h = PI / n as f64;
    let f = |t: f64| (z * (t.cos() - 1.0)).exp();
    let mut s = 0.5 * (f(0.0) + f(PI));
    for k in 1..n {
        s += f(k as f64 * h);
    }
    s / n as f64
}

pub struct MarcumOracle {
    nodes: Vec<(f64, f64)>,
}

impl Default for MarcumOracle {
    fn default() -> Self {
        MarcumOracle {
            nodes: gauss_legendre(20),
        }
    }
}

impl MarcumOracle {
    /// `Q1(a, b) = 1 - ∫_0^b r e^{-(r-a)²/2} e^{-ar} I0(ar) dr`, composite
    /// 20-point Gauss-Legendre on panels of width 0.5. The density is below
    /// 1e-30 outside `[a - 12, a + 13]`.
    pub fn q1(&self, a: f64, b: f64) -> f64 {
        let lo = (a - 12.0).max(0.0);
        let hi = b.min(a + 13.0);
        if hi <= lo {
            return if b <= lo { 1.0 } else { 0.0 };
        }
        let panels = ((hi - lo) / 0.5).ceil() as usize;
        let width = (hi - lo) / panels as f64;
        let mut integral = 0.0;
        for p in 0..panels {
            let mid = lo + (p as f64 + 0.5) * width;
            let half = 0.5 * width;
            for &(x, w) in &self.nodes {
                let r = mid + half * x;
                let d = r - a;
                integral += half * w * r * (-0.5 * d * d).exp() * i0_scaled_trapezoid(a * r);
            }
        }
        1.0 - integral
    }

    pub fn ncx2_cdf(&self, x: f64, lambda: f64) -> f64 {
        1.0 - self.q1(lambda.sqrt(), x.sqrt())
    }
}
