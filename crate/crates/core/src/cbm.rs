//! Lower and upper bounds on the Bracken–Melloy constant.
//!
//! The lower bound diagonalizes a penalized backflow operator in the
//! truncated number basis. The upper bound scans 2×2 dilation blocks of
//! the quadrant operator plus a weighted sum of hyperbolic-region
//! operators.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::number_basis::{half_line_overlaps, theta_halfplane, HermitianOperator};
use crate::quadrature::{integrate_panels, uniform_panels, Tolerance};
use crate::Precision;

pub const DEFAULT_N: usize = 1000;
pub const DEFAULT_LAMBDA: f64 = 2500.0;
pub const DEFAULT_EPS_REG: f64 = 1e-3;
/// Weights `(k, w)` of the hyperbolic-region operators in the best known combination.
pub const REFERENCE_WEIGHTS: [(f64, f64); 3] = [(0.0, 0.7673), (0.1, -0.8767), (0.5, 0.09895)];
/// Spectrum of the quadrant operator.
pub const QUADRANT_SPECTRUM: (f64, f64) = (-0.155940, 1.007678);

const I: Complex64 = Complex64::new(0.0, 1.0);
/// Beyond this point `1/cosh x` is below `5e-16`.
const X_CUT: f64 = 36.0;
/// Split point between the direct and the contour parts of `K₋₊`.
const X_SPLIT: f64 = 1.0;

/// `Θ(X+P) − Θ(P)` on levels `0..=n_max`.
pub fn omega_operator(n_max: usize, precision: Precision) -> HermitianOperator {
    theta_halfplane(FRAC_PI_4, n_max, precision).sub(&theta_halfplane(FRAC_PI_2, n_max, precision))
}

/// Converts the value of an almost-supported state into a certified bound.
pub fn corrected_bound(raw: f64, epsilon: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(invalid(format!("leakage {epsilon} outside [0, 1)")));
    }
    let r = epsilon / (1.0 - epsilon);
    Ok(raw / (1.0 - epsilon) - 2.0 * r.sqrt() - r)
}

#[derive(Debug, Clone, Serialize)]
pub struct VariationalResult {
    pub n_max: usize,
    pub lambda_penalty: f64,
    /// Weight of the optimizer on `x > 0`.
    pub epsilon: f64,
    /// `⟨ψ|Ω|ψ⟩` for the optimizer.
    pub raw_value: f64,
    pub corrected_lower_bound: f64,
    /// `⟨ψ̂|Ω|ψ̂⟩` for `ψ̂ ∝ Θ(−X)ψ` in the truncated basis; not certified.
    pub projected_estimate: f64,
}

/// Maximizes `⟨ψ|Ω + λΘ(−X)|ψ⟩` over levels `0..=n_max` and corrects for leakage.
pub fn lower_bound(n_max: usize, lambda: f64, precision: Precision) -> Result<VariationalResult> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid("penalty weight must be positive"));
    }
    let o = half_line_overlaps(n_max, precision);
    let dim = n_max + 1;
    let omega = DMatrix::from_fn(dim, dim, |n, m| {
        let d = n as f64 - m as f64;
        let e = o[(n, m)];
        Complex64::from_polar(e, FRAC_PI_4 * d) - Complex64::from_polar(e, FRAC_PI_2 * d)
    });
    let penalized = DMatrix::from_fn(dim, dim, |n, m| {
        let id = if n == m { 1.0 } else { 0.0 };
        omega[(n, m)] + Complex64::new(lambda * (id - o[(n, m)]), 0.0)
    });
    let (_, psi) = HermitianOperator::new(penalized, 1e-9)?.max_eigenpair();
    let omega = HermitianOperator::new(omega, 1e-12)?;
    let raw = omega.quadratic_form(&psi);
    let oc = o.map(|v| Complex64::new(v, 0.0));
    let epsilon = psi.dotc(&(&oc * &psi)).re.max(0.0);
    let corrected = corrected_bound(raw, epsilon)?;
    let projected = &psi - &oc * &psi;
    let norm = projected.norm();
    let projected_estimate = if norm > 0.0 {
        omega.quadratic_form(&(projected / Complex64::new(norm, 0.0)))
    } else {
        0.0
    };
    Ok(VariationalResult {
        n_max,
        lambda_penalty: lambda,
        epsilon,
        raw_value: raw,
        corrected_lower_bound: corrected,
        projected_estimate,
    })
}

/// Quadrature settings for the dilation kernels.
#[derive(Debug, Clone, Copy)]
pub struct KernelOptions {
    /// Regularization of `K₋₋`; `None` evaluates the `ε → 0` limit form.
    pub eps_reg: Option<f64>,
    pub tol: Tolerance,
}

impl Default for KernelOptions {
    fn default() -> Self {
        Self {
            eps_reg: Some(DEFAULT_EPS_REG),
            tol: Tolerance {
                abs: 1e-11,
                rel: 1e-10,
                max_intervals: 50_000,
            },
        }
    }
}

/// 2×2 Hermitian block over the `(+, −)` sector basis at one dilation eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DilationBlock {
    pub eta: f64,
    pub block: Matrix2<Complex64>,
    /// Summed quadrature error estimate of the entries.
    pub error: f64,
}

impl DilationBlock {
    fn zero(eta: f64) -> Self {
        Self {
            eta,
            block: Matrix2::zeros(),
            error: 0.0,
        }
    }

    fn add_scaled(&mut self, other: &DilationBlock, w: f64) {
        self.block += other.block * Complex64::new(w, 0.0);
        self.error += w.abs() * other.error;
    }

    /// Eigenvalues `(min, max)`.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let a = self.block[(0, 0)].re;
        let d = self.block[(1, 1)].re;
        let b = self.block[(0, 1)].norm();
        let mid = 0.5 * (a + d);
        let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        (mid - rad, mid + rad)
    }
}

fn oscillation_panels(a: f64, b: f64, eta: f64) -> Vec<f64> {
    let per_unit = (2.0 * eta.abs() / PI).max(2.0);
    uniform_panels(a, b, per_unit)
}

/// `∫₀^∞ e^{iηx}/cosh x dx`.
fn sech_transform(eta: f64, tol: Tolerance) -> Result<(Complex64, f64)> {
    let f = |x: f64| Complex64::from_polar(1.0 / x.cosh(), eta * x);
    let est = integrate_panels(&f, &oscillation_panels(0.0, X_CUT, eta), tol)?;
    Ok((est.value, est.error))
}

/// `∫₀^∞ e^{iηx} e^{−2ik coth x}/cosh x dx` for `k > 0`.
///
/// On `(0, 1)` the substitution `t = coth x` is followed by a rotation of
/// the `t` path into the lower half-plane, where `e^{−2ikt}` decays.
fn hyperbolic_transform(k: f64, eta: f64, tol: Tolerance) -> Result<(Complex64, f64)> {
    let outer = |x: f64| Complex64::from_polar(1.0 / x.cosh(), eta * x - 2.0 * k / x.tanh());
    let direct = integrate_panels(&outer, &oscillation_panels(X_SPLIT, X_CUT, eta), tol)?;

    let t0 = 1.0 / X_SPLIT.tanh();
    let inner = |s: f64| {
        let t = Complex64::new(t0, -s);
        let x = 0.5 * ((t + 1.0) / (t - 1.0)).ln();
        let g = (I * eta * x - 2.0 * I * k * t).exp() / (t * (t * t - 1.0).sqrt());
        -I * g
    };
    let mut s_max = 1.0;
    while (-2.0 * k * s_max).exp() / (s_max * s_max) > 1e-16 {
        s_max *= 1.25;
    }
    let per_unit = (2.0 * k / PI).max(1.0);
    let contour = integrate_panels(&inner, &uniform_panels(0.0, s_max, per_unit), tol)?;
    Ok((direct.value + contour.value, direct.error + contour.error))
}

/// `K₋₋` at regularization `eps`, or its limit when `eps` is `None`.
fn minus_minus(k: f64, eta: f64, eps: Option<f64>, tol: Tolerance) -> Result<(f64, f64)> {
    match eps {
        None => {
            let f = |x: f64| {
                if x < 1e-6 {
                    eta - 2.0 * k
                } else {
                    (eta * x - 2.0 * k * x.tanh()).sin() / x.sinh()
                }
            };
            let est = integrate_panels(&f, &oscillation_panels(0.0, X_CUT, eta), tol)?;
            Ok((0.5 + est.value / PI, est.error / PI))
        }
        Some(eps) => {
            if !(eps > 0.0) {
                return Err(invalid("regularization must be positive"));
            }
            let f = |x: f64| {
                let (s, c) = (x.sinh(), x.cosh());
                let phi = eta * x - 2.0 * k * x.tanh();
                (2.0 * eps * c * phi.cos() + 4.0 * s * phi.sin()) / (eps * eps * c * c + 4.0 * s * s)
            };
            // Geometric breakpoints resolve the Lorentzian peak of width ε/2 at the origin.
            let mut points = vec![0.0];
            let mut p = eps / 16.0;
            while p < 1.0 {
                points.push(p);
                p *= 2.0;
            }
            points.extend(oscillation_panels(1.0, X_CUT, eta));
            let est = integrate_panels(&f, &points, tol)?;
            Ok((est.value / PI, est.error / PI))
        }
    }
}

/// Dilation block of the operator for the quadrant `x, p ≥ 0`.
pub fn quadrant_block(eta: f64, opts: &KernelOptions) -> Result<DilationBlock> {
    let (z, err) = sech_transform(eta, opts.tol)?;
    let plus_minus = z / (2.0 * PI * I);
    let block = Matrix2::new(
        Complex64::new(0.5 * (1.0 + (FRAC_PI_2 * eta).tanh()), 0.0),
        plus_minus,
        plus_minus.conj(),
        Complex64::new(0.0, 0.0),
    );
    Ok(DilationBlock {
        eta,
        block,
        error: 2.0 * err / (2.0 * PI),
    })
}

/// Dilation block of the hyperbolic-region operator `B_k`.
pub fn bk_kernel(k: f64, eta: f64, opts: &KernelOptions) -> Result<DilationBlock> {
    if !(k >= 0.0 && k.is_finite()) {
        return Err(invalid("hyperbola parameter must be non-negative"));
    }
    let (z, err_mp) = if k == 0.0 {
        sech_transform(eta, opts.tol)?
    } else {
        hyperbolic_transform(k, eta, opts.tol)?
    };
    let minus_plus = z / (2.0 * PI * I);
    let (mm, err_mm) = minus_minus(k, eta, opts.eps_reg, opts.tol)?;
    let block = Matrix2::new(
        Complex64::new(0.0, 0.0),
        minus_plus.conj(),
        minus_plus,
        Complex64::new(mm, 0.0),
    );
    Ok(DilationBlock {
        eta,
        block,
        error: 2.0 * err_mp / (2.0 * PI) + err_mm,
    })
}

/// Combination `c·A + Σ w_k B_k` at one dilation eigenvalue.
#[derive(Debug, Clone, Default)]
pub struct Combination {
    pub quadrant_weight: f64,
    pub weights: Vec<(f64, f64)>,
}

impl Combination {
    /// `A + Σ w_k B_k`.
    pub fn tilde_a(weights: &[(f64, f64)]) -> Self {
        Self {
            quadrant_weight: 1.0,
            weights: weights.to_vec(),
        }
    }

    pub fn reference() -> Self {
        Self::tilde_a(&REFERENCE_WEIGHTS)
    }

    pub fn block(&self, eta: f64, opts: &KernelOptions) -> Result<DilationBlock> {
        let mut acc = DilationBlock::zero(eta);
        if self.quadrant_weight != 0.0 {
            acc.add_scaled(&quadrant_block(eta, opts)?, self.quadrant_weight);
        }
        for &(k, w) in &self.weights {
            if w != 0.0 {
                acc.add_scaled(&bk_kernel(k, eta, opts)?, w);
            }
        }
        Ok(acc)
    }
}

/// Parses `k:w,k:w,…`; an empty string yields no weights.
pub fn parse_weights(s: &str) -> Result<Vec<(f64, f64)>> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|pair| {
            let (k, w) = pair
                .split_once(':')
                .ok_or_else(|| invalid(format!("weight `{pair}` is not of the form k:w")))?;
            let k: f64 = k.trim().parse().map_err(|_| invalid(format!("bad k in `{pair}`")))?;
            let w: f64 = w
                .trim()
                .parse()
                .map_err(|_| invalid(format!("bad weight in `{pair}`")))?;
            if !(k >= 0.0 && k.is_finite() && w.is_finite()) {
                return Err(invalid(format!("weight `{pair}` out of range")));
            }
            Ok((k, w))
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct ScanConfig {
    pub eta_min: f64,
    pub eta_max: f64,
    pub eta_step: f64,
    /// Subdivision factor for the refinement around extrema; 1 disables it.
    pub refine: usize,
    pub kernel: KernelOptions,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            eta_min: -20.0,
            eta_max: 20.0,
            eta_step: 0.01,
            refine: 10,
            kernel: KernelOptions::default(),
        }
    }
}

impl ScanConfig {
    fn validate(&self) -> Result<()> {
        if !(self.eta_min.is_finite() && self.eta_max.is_finite() && self.eta_min <= self.eta_max) {
            return Err(invalid("empty dilation range"));
        }
        if !(self.eta_step > 0.0) {
            return Err(invalid("dilation step must be positive"));
        }
        Ok(())
    }

    fn grid(&self) -> Vec<f64> {
        let n = ((self.eta_max - self.eta_min) / self.eta_step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.eta_min + i as f64 * self.eta_step).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRecord {
    pub eta: f64,
    pub block: Matrix2<Complex64>,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub quadrature_error: f64,
}

#[derive(Debug, Clone)]
pub struct SpectralScanResult {
    /// Records sorted by `η`.
    pub records: Vec<ScanRecord>,
    /// `(η, message)` for points whose quadrature failed.
    pub failures: Vec<(f64, String)>,
}

impl SpectralScanResult {
    /// Record with the smallest `λ_min`.
    pub fn infimum(&self) -> Option<&ScanRecord> {
        self.records.iter().min_by(|a, b| a.lambda_min.total_cmp(&b.lambda_min))
    }

    /// Record with the largest `λ_max`.
    pub fn supremum(&self) -> Option<&ScanRecord> {
        self.records.iter().max_by(|a, b| a.lambda_max.total_cmp(&b.lambda_max))
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["eta", "lambda_min", "lambda_max", "quadrature_error"])?;
        for r in &self.records {
            w.write_record(&[
                r.eta.to_string(),
                r.lambda_min.to_string(),
                r.lambda_max.to_string(),
                r.quadrature_error.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn evaluate(comb: &Combination, etas: &[f64], opts: &KernelOptions) -> (Vec<ScanRecord>, Vec<(f64, String)>) {
    let results: Vec<_> = etas.par_iter().map(|&eta| (eta, comb.block(eta, opts))).collect();
    let mut records = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (eta, r) in results {
        match r {
            Ok(b) => {
                let (lo, hi) = b.eigenvalues();
                records.push(ScanRecord {
                    eta,
                    block: b.block,
                    lambda_min: lo,
                    lambda_max: hi,
                    quadrature_error: b.error,
                });
            }
            Err(e) => failures.push((eta, e.to_string())),
        }
    }
    (records, failures)
}

/// Indices of the smallest local minima of `key` (at most `count`).
fn extrema(records: &[ScanRecord], key: impl Fn(&ScanRecord) -> f64, count: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..records.len())
        .filter(|&i| {
            let v = key(&records[i]);
            (i == 0 || v <= key(&records[i - 1])) && (i + 1 == records.len() || v <= key(&records[i + 1]))
        })
        .collect();
    idx.sort_by(|&a, &b| key(&records[a]).total_cmp(&key(&records[b])));
    idx.truncate(count);
    idx
}

/// Scans `λ_min` and `λ_max` of a block combination over a grid of `η`.
pub fn tilde_a_scan(comb: &Combination, cfg: &ScanConfig) -> Result<SpectralScanResult> {
    cfg.validate()?;
    let (mut records, mut failures) = evaluate(comb, &cfg.grid(), &cfg.kernel);
    if cfg.refine > 1 && !records.is_empty() {
        let mut centers: Vec<f64> = extrema(&records, |r| r.lambda_min, 4)
            .into_iter()
            .chain(extrema(&records, |r| -r.lambda_max, 2))
            .map(|i| records[i].eta)
            .collect();
        centers.sort_by(f64::total_cmp);
        centers.dedup();
        let fine = cfg.eta_step / cfg.refine as f64;
        let step = cfg.eta_step;
        let refine = cfg.refine;
        let extra: Vec<f64> = centers
            .iter()
            .flat_map(|&c| {
                (1..2 * refine)
                    .map(move |j| c - step + j as f64 * fine)
                    .filter(move |&e| e != c)
            })
            .filter(|&e| e >= cfg.eta_min && e <= cfg.eta_max)
            .collect();
        let (more, more_fail) = evaluate(comb, &extra, &cfg.kernel);
        records.extend(more);
        failures.extend(more_fail);
        records.sort_by(|a, b| a.eta.total_cmp(&b.eta));
        records.dedup_by(|a, b| a.eta == b.eta);
    }
    if records.is_empty() {
        return Err(Error::Quadrature("every point of the dilation scan failed".into()));
    }
    Ok(SpectralScanResult { records, failures })
}

#[derive(Debug, Clone, Serialize)]
pub struct UpperBound {
    pub value: f64,
    pub eta_at_infimum: f64,
    pub quadrature_error: f64,
    pub failed_points: usize,
}

/// `−inf_η λ_min` of the combination.
pub fn upper_bound(comb: &Combination, cfg: &ScanConfig) -> Result<UpperBound> {
    let scan = tilde_a_scan(comb, cfg)?;
    let inf = scan.infimum().expect("non-empty scan");
    Ok(UpperBound {
        value: -inf.lambda_min,
        eta_at_infimum: inf.eta,
        quadrature_error: inf.quadrature_error,
        failed_points: scan.failures.len(),
    })
}

/// Richardson estimate `2λ(ε/2) − λ(ε)` of the `ε → 0` limit of `λ_min` at one `η`.
pub fn richardson_min_eigenvalue(comb: &Combination, eta: f64, opts: &KernelOptions) -> Result<f64> {
    let eps = opts
        .eps_reg
        .ok_or_else(|| invalid("Richardson step needs a finite regularization"))?;
    let coarse = comb.block(eta, opts)?.eigenvalues().0;
    let half = KernelOptions {
        eps_reg: Some(0.5 * eps),
        ..*opts
    };
    let fine = comb.block(eta, &half)?.eigenvalues().0;
    Ok(2.0 * fine - coarse)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> KernelOptions {
        KernelOptions::default()
    }

    #[test]
    fn omega_diagonal_and_trace_vanish() {
        let om = omega_operator(50, Precision::Double);
        for n in 0..=50 {
            assert!(om.entry(n, n).norm() < 1e-15);
        }
        assert!(om.trace().abs() < 1e-12);
        let top = *om.eigenvalues().last().unwrap();
        assert!(top > 0.0 && top < 1.0);
    }

    #[test]
    fn correction_formula() {
        assert_eq!(corrected_bound(0.1, 0.0).unwrap(), 0.1);
        let c = corrected_bound(0.04, 1e-6).unwrap();
        let r: f64 = 1e-6 / (1.0 - 1e-6);
        assert!((c - (0.04 / (1.0 - 1e-6) - 2.0 * r.sqrt() - r)).abs() < 1e-15);
        assert!(corrected_bound(0.1, 1.0).is_err());
    }

    #[test]
    fn ground_state_has_no_advantage() {
        let r = lower_bound(0, 2500.0, Precision::Double).unwrap();
        assert_eq!(r.raw_value, 0.0);
        assert!(r.corrected_lower_bound <= 0.0);
    }

    #[test]
    fn small_truncation_gives_weak_bound() {
        let r = lower_bound(120, 2500.0, Precision::Double).unwrap();
        assert!(r.corrected_lower_bound > 0.0 && r.corrected_lower_bound < 0.0385);
        assert!(r.corrected_lower_bound <= r.raw_value / (1.0 - r.epsilon));
    }

    #[test]
    fn k_zero_matches_sech_transform() {
        // ∫₀^∞ cos(ηx)/cosh x dx = (π/2) sech(πη/2).
        for &eta in &[0.0, 0.7, -3.0] {
            let b = bk_kernel(0.0, eta, &opts()).unwrap();
            let want = 0.5 * PI / (FRAC_PI_2 * eta).cosh();
            // K₋₊ = z/(2πi), so Re z = −2π Im K₋₊.
            assert!((-2.0 * PI * b.block[(1, 0)].im - want).abs() < 1e-10);
            assert_eq!(b.block[(0, 0)], Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn blocks_are_hermitian() {
        for &k in &[0.0, 0.1, 0.5] {
            let b = bk_kernel(k, 1.3, &opts()).unwrap();
            assert!((b.block - b.block.adjoint()).norm() < 1e-15);
        }
        let a = quadrant_block(-2.0, &opts()).unwrap();
        assert!((a.block - a.block.adjoint()).norm() < 1e-15);
    }

    #[test]
    fn regularized_block_approaches_limit() {
        let limit = KernelOptions {
            eps_reg: None,
            ..opts()
        };
        for &k in &[0.0, 0.5] {
            let l = bk_kernel(k, -1.5, &limit).unwrap().block[(1, 1)].re;
            let r = bk_kernel(k, -1.5, &opts()).unwrap().block[(1, 1)].re;
            assert!((l - r).abs() < 2e-3, "k={k} {l} {r}");
        }
    }

    #[test]
    fn parity_relates_b0_to_quadrant() {
        let b0 = Combination {
            quadrant_weight: 0.0,
            weights: vec![(0.0, 1.0)],
        };
        let a = Combination {
            quadrant_weight: 1.0,
            weights: vec![],
        };
        let o = KernelOptions {
            eps_reg: None,
            ..opts()
        };
        for &eta in &[-2.0, 0.0, 0.7] {
            let (l1, h1) = b0.block(eta, &o).unwrap().eigenvalues();
            let (l2, h2) = a.block(-eta, &o).unwrap().eigenvalues();
            let (l3, h3) = a.block(eta, &o).unwrap().eigenvalues();
            assert!(
                ((l1 - l2).abs() < 1e-8 && (h1 - h2).abs() < 1e-8)
                    || ((l1 - l3).abs() < 1e-8 && (h1 - h3).abs() < 1e-8)
            );
        }
    }

    #[test]
    fn weights_parse() {
        assert_eq!(parse_weights("").unwrap(), vec![]);
        assert_eq!(parse_weights("0:0.5, 0.1:-1").unwrap(), vec![(0.0, 0.5), (0.1, -1.0)]);
        assert!(parse_weights("0.1").is_err());
        assert!(parse_weights("-1:2").is_err());
    }

    #[test]
    fn scan_rejects_empty_range() {
        let cfg = ScanConfig {
            eta_min: 1.0,
            eta_max: 0.0,
            ..ScanConfig::default()
        };
        assert!(tilde_a_scan(&Combination::reference(), &cfg).is_err());
    }
}
