//! Special functions, compensated summation and Gauss–Legendre rules.

use std::f64::consts::PI;

use crate::error::{invalid, Result};

/// Largest Hermite degree accepted by [`hermite`].
pub const MAX_HERMITE_DEGREE: usize = 5000;

const STIRLING_CUTOFF: f64 = 20.0;

/// `ln Γ(z)` for `z = twice / 2`, i.e. integer and half-integer arguments.
pub fn log_gamma_half(twice: u32) -> Result<f64> {
    if twice == 0 {
        return Err(invalid("log_gamma_half: argument must be positive"));
    }
    let z = twice as f64 / 2.0;
    if z < STIRLING_CUTOFF {
        // Exact product for small arguments.
        let value = if twice.is_multiple_of(2) {
            (1..(twice / 2)).fold(1.0_f64, |acc, k| acc * k as f64)
        } else {
            let mut acc = PI.sqrt();
            let mut t = 0.5;
            while t < z - 0.25 {
                acc *= t;
                t += 1.0;
            }
            acc
        };
        return Ok(value.ln());
    }
    Ok(stirling_log_gamma(z))
}

fn stirling_log_gamma(z: f64) -> f64 {
    const COEFFS: [f64; 7] = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
        -691.0 / 360360.0,
        1.0 / 156.0,
    ];
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    let mut series = 0.0;
    let mut pow = inv;
    for c in COEFFS {
        series += c * pow;
        pow *= inv2;
    }
    (z - 0.5) * z.ln() - z + 0.5 * (2.0 * PI).ln() + series
}

/// `ln n!`.
pub fn ln_factorial(n: usize) -> f64 {
    log_gamma_half(2 * (n as u32 + 1)).expect("positive argument")
}

/// Physicists' Hermite polynomial `H_n(z)` by forward recurrence.
///
/// Overflow shows up as a non-finite result; degrees above
/// [`MAX_HERMITE_DEGREE`] return NaN.
pub fn hermite(n: usize, z: f64) -> f64 {
    if n > MAX_HERMITE_DEGREE {
        return f64::NAN;
    }
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 2.0 * z;
    for k in 1..n {
        let next = 2.0 * z * cur - 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Normalized Hermite functions `ψ_0(x), …, ψ_{n_max}(x)`.
///
/// The recurrence runs on rescaled values so that large `|x|` does not
/// underflow the Gaussian factor before the polynomial growth kicks in.
pub fn hermite_functions(n_max: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; n_max + 1];
    hermite_functions_into(x, &mut out);
    out
}

/// In-place variant of [`hermite_functions`]; fills the whole slice.
pub fn hermite_functions_into(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    const BIG: f64 = 1e150;
    // True value is cur * exp(log_scale).
    let mut log_scale = -0.25 * PI.ln() - 0.5 * x * x;
    let mut factor = log_scale.exp();
    let mut prev = 0.0;
    let mut cur = 1.0;
    out[0] = store(cur, log_scale, factor);
    for n in 0..out.len() - 1 {
        let nf = n as f64;
        let next = (2.0 / (nf + 1.0)).sqrt() * x * cur - (nf / (nf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
        if cur.abs() > BIG {
            prev /= BIG;
            cur /= BIG;
            log_scale += BIG.ln();
            factor = log_scale.exp();
        }
        out[n + 1] = store(cur, log_scale, factor);
    }
}

fn store(value: f64, log_scale: f64, factor: f64) -> f64 {
    if log_scale > -700.0 {
        return value * factor;
    }
    if value == 0.0 {
        return 0.0;
    }
    let l = value.abs().ln() + log_scale;
    if l < -745.0 {
        0.0
    } else {
        value.signum() * l.exp()
    }
}

/// Legendre polynomial `P_n(z)`.
pub fn legendre(n: usize, z: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = z;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * z * cur - kf * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Legendre polynomial mapped onto `[-sqrt_alpha, 0]`.
pub fn legendre_shifted(n: usize, x: f64, sqrt_alpha: f64) -> f64 {
    legendre(n, 2.0 * x / sqrt_alpha + 1.0)
}

/// `sin(x)/x` with the removable singularity filled in.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 * (1.0 - x2 / 20.0)
    } else {
        x.sin() / x
    }
}

/// Result of a Neumaier-compensated sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompensatedSum {
    pub value: f64,
    /// Largest partial-sum magnitude divided by the final magnitude.
    pub cancellation: f64,
}

/// Neumaier summation with a cancellation ratio.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(terms: I) -> CompensatedSum {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    let mut max_partial = 0.0_f64;
    for t in terms {
        let s = sum + t;
        if sum.abs() >= t.abs() {
            comp += (sum - s) + t;
        } else {
            comp += (t - s) + sum;
        }
        sum = s;
        max_partial = max_partial.max(sum.abs()).max(t.abs());
    }
    let value = sum + comp;
    let cancellation = if max_partial == 0.0 {
        1.0
    } else if value == 0.0 {
        f64::INFINITY
    } else {
        (max_partial / value.abs()).max(1.0)
    };
    CompensatedSum { value, cancellation }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let p = legendre(n, z);
    let pm1 = if n == 0 { 0.0 } else { legendre(n - 1, z) };
    let d = n as f64 * (z * p - pm1) / (z * z - 1.0);
    (p, d)
}
