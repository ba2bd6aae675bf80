//! The advantage curve `φ(α)`: largest eigenvalue of the sinc kernel on
//! `[-√α, 0]` in a shifted-Legendre basis, after Taylor truncation with an
//! explicit remainder bound.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::specfun::{gauss_legendre, legendre, ln_factorial, sinc};

/// Default target precision.
pub const DEFAULT_DELTA: f64 = 1e-4;
/// Conjectured value of `φ(∞)`, used as a reference line.
pub const CONJECTURE: f64 = 0.0384517;
/// Bound on the `Ĝ^{-1/2}` amplification before a basis is rejected.
pub const MAX_AMPLIFICATION: f64 = 1e8;
/// Largest truncation order accepted.
pub const MAX_ORDER: usize = 2000;

/// `(x + y)/(4π) · sinc((y² − x²)/4)`.
pub fn kernel_value(x: f64, y: f64) -> f64 {
    (x + y) / (4.0 * PI) * sinc(0.25 * (y * y - x * x))
}

/// `φ(α) ≤ (2√3 − 3)/(24π) · α`.
pub fn linear_upper_bound(alpha: f64) -> f64 {
    (2.0 * 3f64.sqrt() - 3.0) / (24.0 * PI) * alpha
}

/// Largest `λ` with `det(F − λG) = 0` for the 2×2 pencil built from
/// `ψ₀ = 1`, `ψ₁ = x`.
///
/// `gram[j][k] = ⟨ψ_j|ψ_k⟩` on `[-√α, 0]`; the kernel `(x + y)/(4π)` gives
/// `F = (g₁g₀ᵀ + g₀g₁ᵀ)/(4π)` with `g_i` the columns of `gram`.
pub fn linear_bound_from_gram(gram: [[f64; 2]; 2]) -> f64 {
    let g0 = [gram[0][0], gram[1][0]];
    let g1 = [gram[0][1], gram[1][1]];
    let f = |j: usize, k: usize| (g1[j] * g0[k] + g0[j] * g1[k]) / (4.0 * PI);
    // det(F − λG) = a λ² + b λ + c
    let a = gram[0][0] * gram[1][1] - gram[0][1] * gram[1][0];
    let b = -(f(0, 0) * gram[1][1] + f(1, 1) * gram[0][0] - f(0, 1) * gram[1][0] - f(1, 0) * gram[0][1]);
    let c = f(0, 0) * f(1, 1) - f(0, 1) * f(1, 0);
    let disc = (b * b - 4.0 * a * c).max(0.0).sqrt();
    (-b + disc) / (2.0 * a)
}

/// Closed-form Gram matrix of `{1, x}` on `[-√α, 0]`.
pub fn linear_gram(alpha: f64) -> [[f64; 2]; 2] {
    let s = alpha.sqrt();
    [[s, -0.5 * alpha], [-0.5 * alpha, alpha * s / 3.0]]
}

/// Taylor truncation of the kernel at sine-series order `N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelTruncation {
    pub alpha: f64,
    pub order: usize,
    /// Pointwise remainder bound `ε`.
    pub error_bound: f64,
    /// Spectral error `ε√α`.
    pub spectral_error: f64,
}

impl KernelTruncation {
    pub fn new(alpha: f64, order: usize) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(invalid(format!("alpha must be positive and finite, got {alpha}")));
        }
        let log_eps = log_remainder(alpha, order);
        let error_bound = log_eps.exp();
        Ok(Self {
            alpha,
            order,
            error_bound,
            spectral_error: error_bound * alpha.sqrt(),
        })
    }

    /// Polynomial degree in each variable.
    pub fn degree(&self) -> usize {
        4 * self.order + 1
    }

    /// Coefficients `f_jk` of `x^j y^k`, a `(degree+1)²` matrix.
    pub fn taylor_coeffs(&self) -> DMatrix<f64> {
        let d = self.degree();
        let mut sine = DMatrix::<f64>::zeros(d, d);
        // Σ_k (−1)^k u^{2k}/(2k+1)!, u = (y² − x²)/4, expanded binomially.
        for k in 0..=self.order {
            let log_c = -ln_factorial(2 * k + 1) - (4 * k) as f64 * 2f64.ln();
            for j in 0..=2 * k {
                // (y²)^j (−x²)^{2k−j}
                let sign = if (k + (2 * k - j)) % 2 == 0 { 1.0 } else { -1.0 };
                let binom = ln_factorial(2 * k) - ln_factorial(j) - ln_factorial(2 * k - j);
                sine[(2 * (2 * k - j), 2 * j)] += sign * (log_c + binom).exp();
            }
        }
        let mut out = DMatrix::zeros(d + 1, d + 1);
        for j in 0..d {
            for k in 0..d {
                let c = sine[(j, k)] / (4.0 * PI);
                if c != 0.0 {
                    out[(j + 1, k)] += c;
                    out[(j, k + 1)] += c;
                }
            }
        }
        out
    }

    /// Truncated kernel `f_N(x, y)`.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        (x + y) / (4.0 * PI) * truncated_sinc(0.25 * (y * y - x * x), self.order)
    }
}

fn log_remainder(alpha: f64, order: usize) -> f64 {
    let m = 2 * order + 2;
    (alpha.sqrt() / (2.0 * PI)).ln() + m as f64 * (alpha / 4.0).ln() - ln_factorial(m)
}

/// `Σ_{k ≤ N} (−1)^k u^{2k}/(2k+1)!`.
pub fn truncated_sinc(u: f64, order: usize) -> f64 {
    let u2 = u * u;
    if (2 * order + 3) as f64 > u.abs() + 1.0 {
        // Subtract the rapidly decaying tail from the exact sinc.
        let mut term = 1.0;
        for k in 1..=order + 1 {
            term *= -u2 / ((2 * k) as f64 * (2 * k + 1) as f64);
        }
        let mut tail = 0.0_f64;
        let mut k = order + 1;
        while term.abs() > 1e-18 * tail.abs().max(1e-300) && k < order + 200 {
            tail += term;
            k += 1;
            term *= -u2 / ((2 * k) as f64 * (2 * k + 1) as f64);
        }
        sinc(u) - tail
    } else {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..=order {
            term *= -u2 / ((2 * k) as f64 * (2 * k + 1) as f64);
            sum += term;
        }
        sum
    }
}

/// Smallest order whose remainder gives spectral error `≤ delta`.
pub fn choose_order(alpha: f64, delta: f64) -> Result<usize> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(invalid(format!("alpha must be positive and finite, got {alpha}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    let target = delta.ln() - 0.5 * alpha.ln();
    (0..=MAX_ORDER)
        .find(|&n| log_remainder(alpha, n) <= target)
        .ok_or_else(|| {
            invalid(format!(
                "no order up to {MAX_ORDER} reaches delta={delta} at alpha={alpha}"
            ))
        })
}

/// Shifted-Legendre basis on `[-√α, 0]`.
#[derive(Debug, Clone)]
pub struct LegendreBasis {
    pub alpha: f64,
    pub dim: usize,
    /// Diagonal of `Ĝ`: `√α/(2n+1)`.
    pub gram: Vec<f64>,
    /// Multiplication by `x` in coefficient space.
    pub x_hat: DMatrix<f64>,
}

impl LegendreBasis {
    pub fn new(alpha: f64, dim: usize) -> Self {
        let s = alpha.sqrt();
        let gram = (0..dim).map(|n| s / (2 * n + 1) as f64).collect();
        let mut x_hat = DMatrix::zeros(dim, dim);
        for n in 0..dim {
            let nf = n as f64;
            x_hat[(n, n)] = -0.5 * s;
            if n + 1 < dim {
                x_hat[(n + 1, n)] = s * (nf + 1.0) / (2.0 * (2.0 * nf + 1.0));
            }
            if n >= 1 {
                x_hat[(n - 1, n)] = s * nf / (2.0 * (2.0 * nf + 1.0));
            }
        }
        Self {
            alpha,
            dim,
            gram,
            x_hat,
        }
    }

    /// Legendre coefficients of `x^k` (exact while `k < dim`).
    pub fn monomial(&self, k: usize) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim);
        v[0] = 1.0;
        for _ in 0..k {
            v = &self.x_hat * v;
        }
        v
    }

    /// Largest entry of `Ĝ^{-1/2}` divided by the smallest.
    pub fn amplification(&self) -> f64 {
        let max = self.gram.iter().cloned().fold(0.0, f64::max);
        let min = self.gram.iter().cloned().fold(f64::INFINITY, f64::min);
        (max / min).sqrt()
    }

    fn whitened_max_eigenvalue(&self, f_hat: &DMatrix<f64>) -> f64 {
        let inv_sqrt: Vec<f64> = self.gram.iter().map(|g| 1.0 / g.sqrt()).collect();
        let h = DMatrix::from_fn(self.dim, self.dim, |i, j| inv_sqrt[i] * f_hat[(i, j)] * inv_sqrt[j]);
        h.symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// How `F̂ = (⟨P_m|f_N|P_n⟩)` is assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assembly {
    /// Gauss–Legendre on the truncated kernel, exact for its degree.
    Quadrature,
    /// `Ĝ (Σ f_jk X̂^j|0⟩⟨0|(X̂^k)ᵀ) Ĝ` from Taylor coefficients.
    ///
    /// Coefficients grow like `(α/4)^{2N}` while the result is `O(1)`, so
    /// this route is only usable for small `α`.
    Monomial,
}

/// `F̂` in the Legendre basis.
pub fn assemble(trunc: &KernelTruncation, basis: &LegendreBasis, how: Assembly) -> DMatrix<f64> {
    let dim = basis.dim;
    match how {
        Assembly::Quadrature => {
            let s = trunc.alpha.sqrt();
            let (z, w) = gauss_legendre(dim);
            let nodes: Vec<f64> = z.iter().map(|z| 0.5 * s * (z - 1.0)).collect();
            let weights: Vec<f64> = w.iter().map(|w| 0.5 * s * w).collect();
            let p = DMatrix::from_fn(dim, dim, |n, i| legendre(n, z[i]) * weights[i]);
            let k = DMatrix::from_fn(dim, dim, |i, j| trunc.eval(nodes[i], nodes[j]));
            &p * k * p.transpose()
        }
        Assembly::Monomial => {
            let coeffs = trunc.taylor_coeffs();
            let deg = coeffs.nrows();
            let mut v = DMatrix::zeros(dim, deg);
            let mut col = DVector::zeros(dim);
            col[0] = 1.0;
            for j in 0..deg {
                v.set_column(j, &col);
                col = &basis.x_hat * col;
            }
            let inner = &v * coeffs * v.transpose();
            DMatrix::from_fn(dim, dim, |m, n| basis.gram[m] * inner[(m, n)] * basis.gram[n])
        }
    }
}

/// One point of the curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhiValue {
    pub alpha: f64,
    pub phi: f64,
    pub delta: f64,
    pub order: usize,
    /// Basis size `4N + 2`.
    pub basis_dim: usize,
}

/// `φ(α)` with error at most `delta` from the kernel truncation.
pub fn phi(alpha: f64, delta: f64) -> Result<PhiValue> {
    let order = choose_order(alpha, delta)?;
    phi_with(alpha, order, Assembly::Quadrature, delta)
}

/// `φ(α)` at a fixed truncation order and assembly route.
pub fn phi_with(alpha: f64, order: usize, how: Assembly, delta: f64) -> Result<PhiValue> {
    let trunc = KernelTruncation::new(alpha, order)?;
    let basis = LegendreBasis::new(alpha, trunc.degree() + 1);
    let amp = basis.amplification();
    if amp > MAX_AMPLIFICATION {
        return Err(Error::IllConditioned(format!(
            "Gram amplification {amp:.3e} at alpha={alpha}"
        )));
    }
    let f_hat = assemble(&trunc, &basis, how);
    let phi = basis.whitened_max_eigenvalue(&f_hat);
    if !phi.is_finite() {
        return Err(Error::PrecisionLoss(format!("non-finite eigenvalue at alpha={alpha}")));
    }
    Ok(PhiValue {
        alpha,
        phi,
        delta: delta.max(trunc.spectral_error),
        order,
        basis_dim: basis.dim,
    })
}

/// Failure at one grid point.
#[derive(Debug, Clone, Serialize)]
pub struct PointFailure {
    pub alpha: f64,
    pub message: String,
    pub numerical: bool,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct PhiCurve {
    pub points: Vec<PhiValue>,
    pub failures: Vec<PointFailure>,
}

/// [`phi`] over a grid, in parallel, sorted by `α`; failures are collected.
pub fn phi_curve(alphas: &[f64], delta: f64) -> PhiCurve {
    let results: Vec<(f64, Result<PhiValue>)> = alphas.par_iter().map(|&a| (a, phi(a, delta))).collect();
    let mut curve = PhiCurve::default();
    for (alpha, r) in results {
        match r {
            Ok(v) => curve.points.push(v),
            Err(e) => curve.failures.push(PointFailure {
                alpha,
                numerical: e.is_numerical(),
                message: e.to_string(),
            }),
        }
    }
    curve.points.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    curve.failures.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    curve
}

/// Evenly spaced grid on `(0, alpha_max]` excluding zero.
pub fn alpha_grid(alpha_max: f64, points: usize) -> Result<Vec<f64>> {
    if !(alpha_max > 0.0) || !alpha_max.is_finite() {
        return Err(invalid(format!("alpha range (0, {alpha_max}] is empty")));
    }
    if points == 0 {
        return Err(invalid("alpha grid needs at least one point"));
    }
    Ok((1..=points).map(|i| alpha_max * i as f64 / points as f64).collect())
}

/// Least-squares fit `φ ≈ r + s/√α` over points with `α ∈ [lo, hi]`.
pub fn fit_inverse_sqrt(points: &[PhiValue], lo: f64, hi: f64) -> Result<(f64, f64)> {
    let sel: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.alpha >= lo && p.alpha <= hi)
        .map(|p| (1.0 / p.alpha.sqrt(), p.phi))
        .collect();
    if sel.len() < 2 {
        return Err(invalid("fit needs at least two points in range"));
    }
    let n = sel.len() as f64;
    let sx: f64 = sel.iter().map(|p| p.0).sum();
    let sy: f64 = sel.iter().map(|p| p.1).sum();
    let sxx: f64 = sel.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = sel.iter().map(|p| p.0 * p.1).sum();
    let den = n * sxx - sx * sx;
    if den.abs() < 1e-300 {
        return Err(invalid("fit abscissae are degenerate"));
    }
    let s = (n * sxy - sx * sy) / den;
    let r = (sy - s * sx) / n;
    Ok((r, s))
}
