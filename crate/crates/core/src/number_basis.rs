//! Harmonic-oscillator number basis: half-plane indicators, density
//! matrices, Wigner functions and position/momentum densities.
//!
//! Matrix elements of `Θ(X)` are computed from the values and slopes of
//! the Hermite functions at the origin (a Wronskian identity), which has
//! no cancellation and stays accurate in `f64` for thousands of levels.
//! The alternating coefficient sum is available as an independent route
//! for small indices.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use qd::Quad as Dd;

use crate::classical::Density;
use crate::error::{invalid, Error, Result};
use crate::grid::UniformGrid;
use crate::specfun::{compensated_sum, hermite_functions_into, ln_factorial, log_gamma_half};
use crate::Precision;

/// Cancellation ratio above which the coefficient sum switches to double-double.
pub const EXTENDED_THRESHOLD: f64 = 1e12;
/// Cancellation ratio above which even double-double is not trusted.
pub const EXTENDED_LIMIT: f64 = 1e26;

/// Values `ψ_n(0)` and slopes `ψ_n'(0)` for `n = 0..=n_max`.
pub fn hermite_at_origin(n_max: usize) -> (Vec<f64>, Vec<f64>) {
    let mut val = vec![0.0; n_max + 2];
    val[0] = PI.powf(-0.25);
    for n in 1..n_max + 1 {
        val[n + 1] = -((n as f64) / (n as f64 + 1.0)).sqrt() * val[n - 1];
    }
    let slope = (0..=n_max)
        .map(|n| {
            let nf = n as f64;
            let lower = if n == 0 { 0.0 } else { (nf / 2.0).sqrt() * val[n - 1] };
            lower - ((nf + 1.0) / 2.0).sqrt() * val[n + 1]
        })
        .collect();
    val.truncate(n_max + 1);
    (val, slope)
}

fn dd(x: f64) -> Dd {
    Dd::from(x)
}

fn hermite_at_origin_dd(n_max: usize) -> (Vec<Dd>, Vec<Dd>) {
    let zero = dd(0.0);
    let mut val = vec![zero; n_max + 2];
    val[0] = dd(PI).sqrt().sqrt().recip();
    for n in 1..n_max + 1 {
        let ratio = (dd(n as f64) / dd(n as f64 + 1.0)).sqrt();
        val[n + 1] = -(ratio * val[n - 1]);
    }
    let slope = (0..=n_max)
        .map(|n| {
            let lower = if n == 0 {
                zero
            } else {
                (dd(n as f64) / dd(2.0)).sqrt() * val[n - 1]
            };
            lower - (dd(n as f64 + 1.0) / dd(2.0)).sqrt() * val[n + 1]
        })
        .collect();
    val.truncate(n_max + 1);
    (val, slope)
}

/// Real symmetric matrix `O_nm = ⟨n|Θ(X)|m⟩` on levels `0..=n_max`.
pub fn half_line_overlaps(n_max: usize, precision: Precision) -> DMatrix<f64> {
    let dim = n_max + 1;
    let mut out = DMatrix::zeros(dim, dim);
    match precision {
        Precision::Double => {
            let (v, s) = hermite_at_origin(n_max);
            for n in 0..dim {
                out[(n, n)] = 0.5;
                for m in (n + 1..dim).step_by(2) {
                    let e = (s[m] * v[n] - v[m] * s[n]) / (2.0 * (m as f64 - n as f64));
                    out[(n, m)] = e;
                    out[(m, n)] = e;
                }
            }
        }
        Precision::Extended => {
            let (v, s) = hermite_at_origin_dd(n_max);
            for n in 0..dim {
                out[(n, n)] = 0.5;
                for m in (n + 1..dim).step_by(2) {
                    let num = s[m] * v[n] - v[m] * s[n];
                    let e = (num / dd(2.0 * (m as f64 - n as f64))).0;
                    out[(n, m)] = e;
                    out[(m, n)] = e;
                }
            }
        }
    }
    out
}

/// Alternating coefficient `w_nm` together with `√(m! n!) w_nm`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WCoefficient {
    pub value: f64,
    pub scaled: f64,
    pub cancellation: f64,
    pub extended: bool,
}

/// `w_nm = Σ_k (-1)^k 2^{(m+n)/2-k-1} Γ((m+n)/2-k+1) / (k!(m-k)!(n-k)!)`.
///
/// Summed in log space with compensation; switches to double-double when
/// the cancellation ratio exceeds [`EXTENDED_THRESHOLD`].
pub fn w_coefficient(m: usize, n: usize) -> Result<WCoefficient> {
    let kmax = m.min(n);
    let half_sum = 0.5 * (m + n) as f64;
    let log_norm = 0.5 * (ln_factorial(m) + ln_factorial(n));
    let mut logs = Vec::with_capacity(kmax + 1);
    for k in 0..=kmax {
        let twice = (m + n + 2 - 2 * k) as u32;
        let l = (half_sum - k as f64 - 1.0) * std::f64::consts::LN_2 + log_gamma_half(twice)?
            - ln_factorial(k)
            - ln_factorial(m - k)
            - ln_factorial(n - k);
        logs.push(l + log_norm);
    }
    let shift = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum = compensated_sum(logs.iter().enumerate().map(|(k, l)| {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sign * (l - shift).exp()
    }));
    let (scaled_sum, cancellation, extended) = if sum.cancellation <= EXTENDED_THRESHOLD {
        (sum.value, sum.cancellation, false)
    } else {
        let (value, ratio) = w_ratio_sum_dd(m, n);
        if ratio > EXTENDED_LIMIT {
            return Err(Error::PrecisionLoss(format!(
                "w_{m}{n}: cancellation ratio {ratio:.2e} exceeds double-double range"
            )));
        }
        // The ratio sum is normalized to its k = 0 term.
        (value * (logs[0] - shift).exp(), ratio, true)
    };
    let scaled = scaled_sum * shift.exp();
    let value = scaled_sum * (shift - log_norm).exp();
    Ok(WCoefficient {
        value,
        scaled,
        cancellation,
        extended,
    })
}

/// Sum of `term_k / term_0` built from exact term ratios in double-double.
fn w_ratio_sum_dd(m: usize, n: usize) -> (f64, f64) {
    let g = 0.5 * (m + n) as f64 + 1.0;
    let mut term = dd(1.0);
    let mut sum = term;
    let mut max_partial = 1.0_f64;
    for k in 0..m.min(n) {
        let kf = k as f64;
        // All factors are small integers or half-integers, exact in f64.
        let num = dd(((m - k) * (n - k)) as f64);
        let den = dd(2.0 * (kf + 1.0) * (g - kf - 1.0));
        term = -(term * num / den);
        sum += term;
        max_partial = max_partial.max(sum.0.abs()).max(term.0.abs());
    }
    let value = sum.0 + sum.1;
    let ratio = if value == 0.0 {
        f64::INFINITY
    } else {
        (max_partial / value.abs()).max(1.0)
    };
    (value, ratio)
}

/// `⟨n|Θ(X)|m⟩` through the coefficient sum.
pub fn half_line_overlap_by_coefficients(n: usize, m: usize) -> Result<f64> {
    if n == m {
        return Ok(0.5);
    }
    let d = n as f64 - m as f64;
    if (n + m).is_multiple_of(2) {
        return Ok(0.0);
    }
    let w = w_coefficient(m, n)?;
    Ok(w.scaled / PI * 2.0 * (FRAC_PI_2 * d).sin() / d)
}

/// Dense Hermitian operator on the truncated number basis.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    matrix: DMatrix<Complex64>,
}

impl HermitianOperator {
    /// Wraps a matrix after checking Hermiticity to `tol`.
    pub fn new(matrix: DMatrix<Complex64>, tol: f64) -> Result<Self> {
        if !matrix.is_square() {
            return Err(invalid("operator matrix must be square"));
        }
        let dev = hermiticity_defect(&matrix);
        if dev > tol {
            return Err(invalid(format!("matrix is not Hermitian (deviation {dev:.3e})")));
        }
        Ok(Self::from_matrix_unchecked(matrix))
    }

    fn from_matrix_unchecked(mut matrix: DMatrix<Complex64>) -> Self {
        let adj = matrix.adjoint();
        matrix = (matrix + adj) * Complex64::new(0.5, 0.0);
        Self { matrix }
    }

    pub fn from_real(matrix: &DMatrix<f64>) -> Self {
        Self::from_matrix_unchecked(matrix.map(|v| Complex64::new(v, 0.0)))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Highest number-state index represented.
    pub fn n_max(&self) -> usize {
        self.dim() - 1
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.matrix
    }

    pub fn entry(&self, n: usize, m: usize) -> Complex64 {
        self.matrix[(n, m)]
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            matrix: &self.matrix + &other.matrix,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            matrix: &self.matrix - &other.matrix,
        }
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            matrix: &self.matrix * Complex64::new(factor, 0.0),
        }
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.matrix.clone().symmetric_eigenvalues().iter().cloned().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Largest eigenvalue and a unit eigenvector.
    pub fn max_eigenpair(&self) -> (f64, DVector<Complex64>) {
        let eig = self.matrix.clone().symmetric_eigen();
        let (idx, &val) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty operator");
        (val, eig.eigenvectors.column(idx).into_owned())
    }

    /// Amount by which the spectrum leaves `[0, 1]`.
    pub fn spectral_slack(&self) -> f64 {
        let ev = self.eigenvalues();
        let lo = ev.first().copied().unwrap_or(0.0);
        let hi = ev.last().copied().unwrap_or(0.0);
        (-lo).max(hi - 1.0).max(0.0)
    }

    /// `⟨v|A|v⟩` for a vector of matching length.
    pub fn quadratic_form(&self, v: &DVector<Complex64>) -> f64 {
        v.dotc(&(&self.matrix * v)).re
    }

    /// `tr(ρ A)`.
    pub fn expectation(&self, rho: &DensityMatrix) -> f64 {
        trace_product(rho.matrix(), &self.matrix)
    }

    /// Writes `row,col,re,im` lines for every entry.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["row", "col", "re", "im"])?;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                let z = self.matrix[(i, j)];
                w.write_record(&[i.to_string(), j.to_string(), z.re.to_string(), z.im.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// `max |A − A†|` entrywise.
pub fn hermiticity_defect(a: &DMatrix<Complex64>) -> f64 {
    (a - a.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `Re tr(A B)` for square matrices of equal size.
pub fn trace_product(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    acc
}

fn rotate_overlaps(o: &DMatrix<f64>, phi: f64) -> DMatrix<Complex64> {
    let dim = o.nrows();
    DMatrix::from_fn(dim, dim, |n, m| {
        let d = n as f64 - m as f64;
        Complex64::from_polar(o[(n, m)], phi * d)
    })
}

/// `Θ(cos φ X + sin φ P)` on levels `0..=n_max`.
pub fn theta_halfplane(phi: f64, n_max: usize, precision: Precision) -> HermitianOperator {
    let o = half_line_overlaps(n_max, precision);
    HermitianOperator::from_matrix_unchecked(rotate_overlaps(&o, phi))
}

/// `Θ(X+P) − Θ(X) − Θ(P)` on levels `0..=n_max`.
pub fn triple_theta(n_max: usize, precision: Precision) -> HermitianOperator {
    let o = half_line_overlaps(n_max, precision);
    let dim = n_max + 1;
    let m = DMatrix::from_fn(dim, dim, |n, m| {
        let d = n as f64 - m as f64;
        let e = o[(n, m)];
        Complex64::from_polar(e, FRAC_PI_4 * d) - e - Complex64::from_polar(e, FRAC_PI_2 * d)
    });
    HermitianOperator::from_matrix_unchecked(m)
}

/// Real symmetric form `D† T D` of [`triple_theta`], `D = diag(e^{iπn/4})`.
pub fn triple_theta_real(n_max: usize, precision: Precision) -> DMatrix<f64> {
    let o = half_line_overlaps(n_max, precision);
    let dim = n_max + 1;
    DMatrix::from_fn(dim, dim, |n, m| {
        let d = n as f64 - m as f64;
        o[(n, m)] * (1.0 - 2.0 * (FRAC_PI_4 * d).cos())
    })
}

/// Largest eigenvalue of [`triple_theta`] and its unit eigenvector.
pub fn triple_theta_top(n_max: usize, precision: Precision) -> (f64, DVector<Complex64>) {
    let r = triple_theta_real(n_max, precision);
    let eig = r.symmetric_eigen();
    let (idx, &val) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty matrix");
    let col = eig.eigenvectors.column(idx);
    let v = DVector::from_fn(n_max + 1, |n, _| Complex64::from_polar(col[n], FRAC_PI_4 * n as f64));
    (val, v)
}

/// Density matrix on levels `0..=n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity, each to `tol`.
    pub fn new(matrix: DMatrix<Complex64>, tol: f64) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::NotDensityMatrix("matrix must be square and non-empty".into()));
        }
        let herm = hermiticity_defect(&matrix);
        if herm > tol {
            return Err(Error::NotDensityMatrix(format!("not Hermitian (deviation {herm:.3e})")));
        }
        let tr: f64 = matrix.diagonal().iter().map(|z| z.re).sum();
        if (tr - 1.0).abs() > tol {
            return Err(Error::NotDensityMatrix(format!("trace is {tr}")));
        }
        let min_ev = matrix
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min_ev < -tol {
            return Err(Error::NotDensityMatrix(format!("negative eigenvalue {min_ev:.3e}")));
        }
        let adj = matrix.adjoint();
        Ok(Self {
            matrix: (matrix + adj) * Complex64::new(0.5, 0.0),
        })
    }

    /// `|v⟩⟨v| / ⟨v|v⟩`.
    pub fn pure(v: &DVector<Complex64>) -> Result<Self> {
        let norm2 = v.norm_squared();
        if !(norm2 > 0.0) || !norm2.is_finite() {
            return Err(Error::NotDensityMatrix(
                "state vector has zero or non-finite norm".into(),
            ));
        }
        Ok(Self {
            matrix: v * v.adjoint() / Complex64::new(norm2, 0.0),
        })
    }

    pub(crate) fn from_trusted(matrix: DMatrix<Complex64>) -> Self {
        Self { matrix }
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_max(&self) -> usize {
        self.dim() - 1
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diagonal().iter().map(|z| z.re).sum()
    }
}

/// Wigner function of `|m⟩⟨n|` at `(x, p)` from the explicit finite sum.
pub fn wigner_element(m: usize, n: usize, x: f64, p: f64) -> Complex64 {
    let r2 = x * x + p * p;
    let theta = p.atan2(x);
    let phase = Complex64::from_polar(1.0, theta * (n as f64 - m as f64));
    let log_r = 0.5 * (2.0 * r2).ln();
    let norm = 0.5 * (ln_factorial(m) + ln_factorial(n));
    let mut terms = Vec::with_capacity(m.min(n) + 1);
    for k in 0..=m.min(n) {
        let power = (m + n - 2 * k) as f64;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let t = if power == 0.0 {
            (norm - ln_factorial(k) - ln_factorial(m - k) - ln_factorial(n - k) - r2).exp()
        } else if r2 == 0.0 {
            0.0
        } else {
            (norm + power * log_r - ln_factorial(k) - ln_factorial(m - k) - ln_factorial(n - k) - r2).exp()
        };
        terms.push(sign * t);
    }
    phase * (compensated_sum(terms).value / PI)
}

/// Rectangular phase-space grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WignerGrid {
    pub x: UniformGrid,
    pub p: UniformGrid,
}

impl WignerGrid {
    /// Square grid `[-L, L]²` with `L = √(2 n_max) + 5` and 401 points per axis.
    pub fn default_for(n_max: usize) -> Self {
        let l = (2.0 * n_max as f64).sqrt() + 5.0;
        let axis = UniformGrid::spanning(-l, l, 401).expect("valid default grid");
        Self { x: axis, p: axis }
    }
}

/// Wigner function sampled on a grid, stored with `p` varying fastest.
#[derive(Debug, Clone)]
pub struct WignerField {
    pub grid: WignerGrid,
    pub values: Vec<f64>,
}

impl WignerField {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.p.len + j]
    }

    pub fn integral(&self) -> f64 {
        self.grid.x.trapezoid(&self.position_marginal())
    }

    /// `∫ W(x, p) dp` on the x grid.
    pub fn position_marginal(&self) -> Vec<f64> {
        (0..self.grid.x.len)
            .map(|i| {
                self.grid
                    .p
                    .trapezoid(&self.values[i * self.grid.p.len..(i + 1) * self.grid.p.len])
            })
            .collect()
    }

    /// `∫ W(x, p) dx` on the p grid.
    pub fn momentum_marginal(&self) -> Vec<f64> {
        let mut col = vec![0.0; self.grid.x.len];
        (0..self.grid.p.len)
            .map(|j| {
                for (i, c) in col.iter_mut().enumerate() {
                    *c = self.at(i, j);
                }
                self.grid.x.trapezoid(&col)
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "p", "w"])?;
        for i in 0..self.grid.x.len {
            for j in 0..self.grid.p.len {
                w.write_record(&[
                    self.grid.x.point(i).to_string(),
                    self.grid.p.point(j).to_string(),
                    self.at(i, j).to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Wigner function of `ρ` on `grid`.
///
/// Uses normalized associated-Laguerre functions along each off-diagonal,
/// which is equivalent to the finite sum in [`wigner_element`].
pub fn wigner_state(rho: &DensityMatrix, grid: &WignerGrid) -> WignerField {
    use rayon::prelude::*;
    let dim = rho.dim();
    let nx = grid.x.len;
    let np = grid.p.len;
    let mut values = vec![0.0; nx * np];
    values.par_chunks_mut(np).enumerate().for_each(|(i, row)| {
        let x = grid.x.point(i);
        let mut lag = vec![0.0; dim];
        for (j, out) in row.iter_mut().enumerate() {
            let p = grid.p.point(j);
            let t = 2.0 * (x * x + p * p);
            let theta = p.atan2(x);
            let mut acc = 0.0;
            for d in 0..dim {
                laguerre_functions(d, t, &mut lag[..dim - d]);
                // W_{n+d, n} = (-1)^n g_n e^{-iθd} / π, and W_{n, n+d} is its conjugate.
                let rot = Complex64::from_polar(1.0, -theta * d as f64);
                for (n, g) in lag[..dim - d].iter().enumerate() {
                    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                    let w = rot * (sign * g);
                    let rho_mn = rho.matrix[(n + d, n)];
                    if d == 0 {
                        acc += rho_mn.re * w.re;
                    } else {
                        // ρ_{m n} W_{m n} + ρ_{n m} W_{n m} = 2 Re(ρ_{m n} W_{m n})
                        acc += 2.0 * (rho_mn * w).re;
                    }
                }
            }
            *out = acc / PI;
        }
    });
    WignerField { grid: *grid, values }
}

/// `g_n = √(n!/(n+d)!) t^{d/2} e^{-t/2} L_n^{(d)}(t)` for `n = 0..out.len()`.
fn laguerre_functions(d: usize, t: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    let df = d as f64;
    let log0 = if d == 0 {
        -0.5 * t
    } else if t == 0.0 {
        f64::NEG_INFINITY
    } else {
        0.5 * df * t.ln() - 0.5 * t - 0.5 * ln_factorial(d)
    };
    out[0] = log0.exp();
    if out.len() == 1 {
        return;
    }
    out[1] = (1.0 + df - t) * out[0] / (1.0 + df).sqrt();
    for n in 1..out.len() - 1 {
        let nf = n as f64;
        out[n + 1] = ((2.0 * nf + df + 1.0 - t) * out[n] - (nf * (nf + df)).sqrt() * out[n - 1])
            / ((nf + 1.0) * (nf + 1.0 + df)).sqrt();
    }
}

/// Position and momentum densities of `ρ` on the given grids.
pub fn state_densities(rho: &DensityMatrix, x_grid: &UniformGrid, p_grid: &UniformGrid) -> (Density, Density) {
    let dim = rho.dim();
    let mut psi = vec![0.0; dim];
    let mut mu = Vec::with_capacity(x_grid.len);
    for x in x_grid.points() {
        hermite_functions_into(x, &mut psi);
        mu.push(position_density_at(rho, &psi));
    }
    let mut nu = Vec::with_capacity(p_grid.len);
    for p in p_grid.points() {
        hermite_functions_into(p, &mut psi);
        nu.push(momentum_density_at(rho, &psi));
    }
    (Density::from_parts(*x_grid, mu), Density::from_parts(*p_grid, nu))
}

/// `Σ ρ_mn ψ_m ψ_n` given Hermite function values `psi`.
pub fn position_density_at(rho: &DensityMatrix, psi: &[f64]) -> f64 {
    let m = &rho.matrix;
    let mut acc = 0.0;
    for a in 0..psi.len() {
        acc += m[(a, a)].re * psi[a] * psi[a];
        for b in a + 1..psi.len() {
            acc += 2.0 * m[(a, b)].re * psi[a] * psi[b];
        }
    }
    acc
}

/// `Σ i^{n-m} ρ_mn ψ_m ψ_n` given Hermite function values `psi`.
pub fn momentum_density_at(rho: &DensityMatrix, psi: &[f64]) -> f64 {
    let m = &rho.matrix;
    let mut acc = 0.0;
    for a in 0..psi.len() {
        acc += m[(a, a)].re * psi[a] * psi[a];
        for b in a + 1..psi.len() {
            // i^{b-a} ρ_ab + i^{a-b} ρ_ba = 2 Re(i^{b-a} ρ_ab)
            let z = m[(a, b)];
            let re = match (b - a) % 4 {
                0 => z.re,
                1 => -z.im,
                2 => -z.re,
                _ => z.im,
            };
            acc += 2.0 * re * psi[a] * psi[b];
        }
    }
    acc
}
