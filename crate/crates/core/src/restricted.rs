//! Restricted-projectile advantage `𝕎(ρ) = ⟨Θ(X+P)⟩_ρ − p*_c(ρ)` over
//! number-basis density matrices.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::classical::{sweep, MarginalSource, SweepConfig, SweepResult};
use crate::error::{invalid, Result};
use crate::number_basis::{half_line_overlaps, triple_theta_top, DensityMatrix};
use crate::specfun::hermite_functions_into;
use crate::Precision;

/// Sweep step used while ascending.
pub const ASCENT_DX: f64 = 1e-3;
/// Sweep step used for reported values.
pub const REPORT_DX: f64 = 1e-4;
/// Gradient norms above this are recorded as blow-ups.
pub const BLOWUP_NORM: f64 = 1e6;

/// Rank-one density matrix of the top eigenvector of `Θ(X+P) − Θ(X) − Θ(P)`,
/// together with its eigenvalue.
pub fn spectral_seed(n_max: usize, precision: Precision) -> Result<(DensityMatrix, f64)> {
    let (value, v) = triple_theta_top(n_max, precision);
    Ok((DensityMatrix::pure(&v)?, value))
}

/// Euclidean projection of `v` onto the probability simplex.
pub fn simplex_projection(v: &[f64]) -> Vec<f64> {
    if v.is_empty() {
        return Vec::new();
    }
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Nearest density matrix in Frobenius norm to the Hermitian part of `m`.
pub fn project_to_density(m: &DMatrix<Complex64>) -> Result<DensityMatrix> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(invalid("projection needs a non-empty square matrix"));
    }
    if m.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(invalid("projection input has non-finite entries"));
    }
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let w = simplex_projection(eig.eigenvalues.as_slice());
    let v = &eig.eigenvectors;
    let d = DMatrix::from_diagonal(&DVector::from_iterator(
        w.len(),
        w.iter().map(|&x| Complex64::new(x, 0.0)),
    ));
    let out = v * d * v.adjoint();
    let out = (&out + out.adjoint()) * Complex64::new(0.5, 0.0);
    Ok(DensityMatrix::from_trusted(out))
}

/// Real coordinates of a Hermitian matrix: the diagonal, then `(Re, Im)`
/// of each upper-triangle entry in row-major order.
pub fn n_params(dim: usize) -> usize {
    dim * dim
}

/// Builds the ascent direction `G` from coordinate derivatives:
/// `G_aa = ∂_aa`, `G_ab = ½(∂_Re + i ∂_Im)` for `a < b`, `G_ba = conj(G_ab)`.
pub fn gradient_matrix(dim: usize, grad: &[f64]) -> DMatrix<Complex64> {
    let mut g = DMatrix::zeros(dim, dim);
    for a in 0..dim {
        g[(a, a)] = Complex64::new(grad[a], 0.0);
    }
    let mut k = dim;
    for a in 0..dim {
        for b in a + 1..dim {
            let z = Complex64::new(0.5 * grad[k], 0.5 * grad[k + 1]);
            g[(a, b)] = z;
            g[(b, a)] = z.conj();
            k += 2;
        }
    }
    g
}

/// `Re(i^d z)` for `d ≥ 0`.
fn rotate_re(z: Complex64, d: usize) -> f64 {
    match d % 4 {
        0 => z.re,
        1 => -z.im,
        2 => -z.re,
        _ => z.im,
    }
}

/// Marginals of a number-basis state for the arrival sweep, with
/// derivatives in the coordinates of [`n_params`].
pub struct StateMarginals<'a> {
    rho: &'a DensityMatrix,
    /// `M/ΔT`.
    scale: f64,
    target: f64,
    with_gradient: bool,
    psi_x: Vec<f64>,
    psi_p: Vec<f64>,
}

impl<'a> StateMarginals<'a> {
    pub fn new(rho: &'a DensityMatrix, mass: f64, flight_time: f64, target: f64, with_gradient: bool) -> Result<Self> {
        if !(mass > 0.0 && flight_time > 0.0 && target.is_finite()) {
            return Err(invalid("mass and flight time must be positive"));
        }
        let dim = rho.dim();
        Ok(Self {
            rho,
            scale: mass / flight_time,
            target,
            with_gradient,
            psi_x: vec![0.0; dim],
            psi_p: vec![0.0; dim],
        })
    }

    /// Unit scenario `M = ΔT = 1`, `a = 0`.
    pub fn unit(rho: &'a DensityMatrix, with_gradient: bool) -> Self {
        Self::new(rho, 1.0, 1.0, 0.0, with_gradient).expect("unit scenario is valid")
    }
}

impl MarginalSource for StateMarginals<'_> {
    fn n_params(&self) -> usize {
        if self.with_gradient {
            n_params(self.rho.dim())
        } else {
            0
        }
    }

    fn eval(&mut self, x: f64, dmu: &mut [f64], dnu: &mut [f64]) -> (f64, f64) {
        let p = self.scale * (self.target - x);
        hermite_functions_into(x, &mut self.psi_x);
        hermite_functions_into(p, &mut self.psi_p);
        let m = self.rho.matrix();
        let dim = self.psi_x.len();
        let (px, pp) = (&self.psi_x, &self.psi_p);
        let c = self.scale;
        let mut mu = 0.0;
        let mut nu = 0.0;
        for a in 0..dim {
            let r = m[(a, a)].re;
            mu += r * px[a] * px[a];
            nu += r * pp[a] * pp[a];
            for b in a + 1..dim {
                let z = m[(a, b)];
                mu += 2.0 * z.re * px[a] * px[b];
                nu += 2.0 * rotate_re(z, b - a) * pp[a] * pp[b];
            }
        }
        if self.with_gradient {
            for a in 0..dim {
                dmu[a] = px[a] * px[a];
                dnu[a] = c * pp[a] * pp[a];
            }
            let mut k = dim;
            for a in 0..dim {
                for b in a + 1..dim {
                    let d = b - a;
                    let xx = 2.0 * px[a] * px[b];
                    let pq = 2.0 * c * pp[a] * pp[b];
                    dmu[k] = xx;
                    dmu[k + 1] = 0.0;
                    dnu[k] = rotate_re(Complex64::new(1.0, 0.0), d) * pq;
                    dnu[k + 1] = rotate_re(Complex64::new(0.0, 1.0), d) * pq;
                    k += 2;
                }
            }
        }
        (mu, c * nu)
    }
}

/// Half-plane operators shared by every evaluation at one truncation.
#[derive(Debug, Clone)]
pub struct RestrictedProblem {
    dim: usize,
    /// `Θ(X+P)`.
    arrival: DMatrix<Complex64>,
    /// `Θ(X) + Θ(P)`.
    dual: DMatrix<Complex64>,
}

/// One evaluation of `𝕎`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Objective {
    pub value: f64,
    pub quantum: f64,
    pub classical: f64,
    /// `tr ρ(Θ(X) + Θ(P))`, an upper bound on the classical term.
    pub dual_bound: f64,
}

impl RestrictedProblem {
    pub fn new(n_max: usize, precision: Precision) -> Self {
        let o = half_line_overlaps(n_max, precision);
        let dim = n_max + 1;
        let arrival = DMatrix::from_fn(dim, dim, |n, m| {
            Complex64::from_polar(o[(n, m)], FRAC_PI_4 * (n as f64 - m as f64))
        });
        let dual = DMatrix::from_fn(dim, dim, |n, m| {
            let e = o[(n, m)];
            Complex64::new(e, 0.0) + Complex64::from_polar(e, FRAC_PI_2 * (n as f64 - m as f64))
        });
        Self { dim, arrival, dual }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn check(&self, rho: &DensityMatrix) -> Result<()> {
        if rho.dim() != self.dim {
            return Err(invalid(format!(
                "state has dimension {}, problem has {}",
                rho.dim(),
                self.dim
            )));
        }
        Ok(())
    }

    /// `tr ρ Θ(X+P)`.
    pub fn quantum_arrival(&self, rho: &DensityMatrix) -> f64 {
        crate::number_basis::trace_product(rho.matrix(), &self.arrival)
    }

    pub fn dual_bound(&self, rho: &DensityMatrix) -> f64 {
        crate::number_basis::trace_product(rho.matrix(), &self.dual)
    }

    /// Derivatives of `tr ρ Θ(X+P)` in the coordinates of [`n_params`].
    fn quantum_gradient(&self) -> Vec<f64> {
        let dim = self.dim;
        let mut g = vec![0.0; n_params(dim)];
        for (a, ga) in g.iter_mut().take(dim).enumerate() {
            *ga = self.arrival[(a, a)].re;
        }
        let mut k = dim;
        for a in 0..dim {
            for b in a + 1..dim {
                let t = self.arrival[(b, a)];
                g[k] = 2.0 * t.re;
                g[k + 1] = -2.0 * t.im;
                k += 2;
            }
        }
        g
    }

    fn classical(&self, rho: &DensityMatrix, dx: f64, with_gradient: bool) -> Result<SweepResult> {
        let mut src = StateMarginals::unit(rho, with_gradient);
        sweep(&mut src, &SweepConfig::with_dx(dx))
    }

    pub fn objective(&self, rho: &DensityMatrix, dx: f64) -> Result<Objective> {
        self.check(rho)?;
        let quantum = self.quantum_arrival(rho);
        let classical = self.classical(rho, dx, false)?.p_star;
        Ok(Objective {
            value: quantum - classical,
            quantum,
            classical,
            dual_bound: self.dual_bound(rho),
        })
    }

    /// Objective and its coordinate gradient.
    pub fn objective_with_gradient(&self, rho: &DensityMatrix, dx: f64) -> Result<(Objective, Vec<f64>, SweepResult)> {
        self.check(rho)?;
        let quantum = self.quantum_arrival(rho);
        let sw = self.classical(rho, dx, true)?;
        let mut grad = self.quantum_gradient();
        for (g, c) in grad.iter_mut().zip(&sw.gradient) {
            *g -= c;
        }
        let obj = Objective {
            value: quantum - sw.p_star,
            quantum,
            classical: sw.p_star,
            dual_bound: self.dual_bound(rho),
        };
        Ok((obj, grad, sw))
    }
}

/// `tr ρ Θ(X+P)`.
pub fn quantum_arrival(rho: &DensityMatrix, precision: Precision) -> f64 {
    RestrictedProblem::new(rho.n_max(), precision).quantum_arrival(rho)
}

/// `𝕎(ρ)` in the unit scenario.
pub fn objective_w(rho: &DensityMatrix, dx: f64, precision: Precision) -> Result<Objective> {
    RestrictedProblem::new(rho.n_max(), precision).objective(rho, dx)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct AscentConfig {
    pub step: f64,
    pub iters: usize,
    pub ode_dx: f64,
    pub report_dx: f64,
    pub max_backtracks: usize,
}

impl Default for AscentConfig {
    fn default() -> Self {
        Self {
            step: 1e-3,
            iters: 100,
            ode_dx: ASCENT_DX,
            report_dx: REPORT_DX,
            max_backtracks: 12,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct AscentRecord {
    pub iteration: usize,
    pub objective: f64,
    pub quantum: f64,
    pub classical: f64,
    pub step: f64,
    pub projection_distance: f64,
    pub gradient_norm: f64,
    pub gradient_blowup: bool,
}

#[derive(Debug, Clone)]
pub struct AscentTrace {
    pub records: Vec<AscentRecord>,
    pub best: DensityMatrix,
    /// Objective of `best` re-evaluated at the report step.
    pub best_objective: Objective,
    /// Why the loop ended early, if it did.
    pub stopped: Option<String>,
}

impl AscentTrace {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "iteration",
            "objective",
            "quantum",
            "classical",
            "step",
            "projection_distance",
            "gradient_norm",
            "gradient_blowup",
        ])?;
        for r in &self.records {
            w.write_record(&[
                r.iteration.to_string(),
                r.objective.to_string(),
                r.quantum.to_string(),
                r.classical.to_string(),
                r.step.to_string(),
                r.projection_distance.to_string(),
                r.gradient_norm.to_string(),
                r.gradient_blowup.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Projected gradient ascent `ρ ← P(ρ + ε G)` with step halving whenever
/// the objective would decrease.
pub fn gradient_ascent(problem: &RestrictedProblem, seed: &DensityMatrix, cfg: &AscentConfig) -> Result<AscentTrace> {
    if !(cfg.step > 0.0 && cfg.ode_dx > 0.0 && cfg.report_dx > 0.0) {
        return Err(invalid("step sizes must be positive"));
    }
    let dim = problem.dim();
    let mut rho = seed.clone();
    let (mut obj, mut grad, _) = problem.objective_with_gradient(&rho, cfg.ode_dx)?;
    let mut records = vec![AscentRecord {
        iteration: 0,
        objective: obj.value,
        quantum: obj.quantum,
        classical: obj.classical,
        step: 0.0,
        projection_distance: 0.0,
        gradient_norm: norm(&grad),
        gradient_blowup: !blowup_free(&grad),
    }];
    let mut best = rho.clone();
    let mut best_value = obj.value;
    let mut stopped = None;
    let mut step = cfg.step;
    for iteration in 1..=cfg.iters {
        if !norm(&grad).is_finite() {
            stopped = Some(format!("non-finite gradient at iteration {iteration}"));
            break;
        }
        let g = gradient_matrix(dim, &grad);
        let mut accepted = None;
        let mut trial = step;
        for _ in 0..=cfg.max_backtracks {
            let raw = rho.matrix() + &g * Complex64::new(trial, 0.0);
            let cand = project_to_density(&raw)?;
            let c_obj = problem.objective(&cand, cfg.ode_dx)?;
            if c_obj.value >= obj.value {
                let dist = (&raw - cand.matrix()).norm();
                accepted = Some((cand, dist));
                break;
            }
            trial *= 0.5;
        }
        let Some((cand, dist)) = accepted else {
            stopped = Some(format!("no ascent step found at iteration {iteration}"));
            break;
        };
        rho = cand;
        let (o, gr, _) = problem.objective_with_gradient(&rho, cfg.ode_dx)?;
        obj = o;
        grad = gr;
        records.push(AscentRecord {
            iteration,
            objective: obj.value,
            quantum: obj.quantum,
            classical: obj.classical,
            step: trial,
            projection_distance: dist,
            gradient_norm: norm(&grad),
            gradient_blowup: !blowup_free(&grad),
        });
        if obj.value > best_value {
            best_value = obj.value;
            best = rho.clone();
        }
        step = (2.0 * trial).min(cfg.step);
    }
    let best_objective = problem.objective(&best, cfg.report_dx)?;
    Ok(AscentTrace {
        records,
        best,
        best_objective,
        stopped,
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn blowup_free(v: &[f64]) -> bool {
    let n = norm(v);
    n.is_finite() && n < BLOWUP_NORM
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(values: &[f64]) -> DMatrix<Complex64> {
        DMatrix::from_diagonal(&DVector::from_iterator(
            values.len(),
            values.iter().map(|&v| Complex64::new(v, 0.0)),
        ))
    }

    #[test]
    fn simplex_cases() {
        assert_eq!(simplex_projection(&[2.0, 0.0]), vec![1.0, 0.0]);
        let z = simplex_projection(&[0.0; 4]);
        assert!(z.iter().all(|&v| (v - 0.25).abs() < 1e-15));
        let p = simplex_projection(&[0.3, 0.7]);
        assert!((p[0] - 0.3).abs() < 1e-15 && (p[1] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn projection_examples() {
        let p = project_to_density(&diag(&[2.0, 0.0])).unwrap();
        assert!((p.matrix() - diag(&[1.0, 0.0])).norm() < 1e-12);
        let z = project_to_density(&DMatrix::zeros(3, 3)).unwrap();
        assert!((z.matrix() - diag(&[1.0 / 3.0; 3])).norm() < 1e-12);
    }

    #[test]
    fn seed_values() {
        let (_, b0) = spectral_seed(0, Precision::Double).unwrap();
        assert!((b0 + 0.5).abs() < 1e-15);
        let (rho, b) = spectral_seed(30, Precision::Double).unwrap();
        assert!((b - 0.0874).abs() < 1e-4);
        let q = quantum_arrival(&rho, Precision::Double);
        assert!(q > 0.5 && q < 1.0);
    }

    #[test]
    fn quantum_term_of_simple_states() {
        let g = DensityMatrix::pure(&DVector::from_element(1, Complex64::new(1.0, 0.0))).unwrap();
        assert!((quantum_arrival(&g, Precision::Double) - 0.5).abs() < 1e-15);
        let mixed = DensityMatrix::new(diag(&[0.25; 4]), 1e-12).unwrap();
        assert!((quantum_arrival(&mixed, Precision::Double) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ground_state_has_no_advantage() {
        let mut m = DMatrix::zeros(3, 3);
        m[(0, 0)] = Complex64::new(1.0, 0.0);
        let g = DensityMatrix::new(m, 1e-12).unwrap();
        let o = objective_w(&g, 1e-3, Precision::Double).unwrap();
        assert!(o.value <= 1e-9);
        assert!(o.classical <= o.dual_bound + 1e-3);
    }

    #[test]
    fn gradient_matrix_is_hermitian_ascent_direction() {
        let grad: Vec<f64> = (0..9).map(|i| (i as f64 * 0.37).sin()).collect();
        let g = gradient_matrix(3, &grad);
        assert!((&g - g.adjoint()).norm() < 1e-15);
        // First-order change along G equals Σ ∂_aa² + ½ Σ (∂_Re² + ∂_Im²).
        let mut want = 0.0;
        for (i, v) in grad.iter().enumerate() {
            want += if i < 3 { v * v } else { 0.5 * v * v };
        }
        let mut got = 0.0;
        for a in 0..3 {
            got += grad[a] * g[(a, a)].re;
        }
        let mut k = 3;
        for a in 0..3 {
            for b in a + 1..3 {
                got += grad[k] * g[(a, b)].re + grad[k + 1] * g[(a, b)].im;
                k += 2;
            }
        }
        assert!((got - want).abs() < 1e-14);
    }

    #[test]
    fn zero_iterations_keeps_seed() {
        let (rho, _) = spectral_seed(6, Precision::Double).unwrap();
        let prob = RestrictedProblem::new(6, Precision::Double);
        let cfg = AscentConfig {
            iters: 0,
            ode_dx: 1e-2,
            report_dx: 1e-2,
            ..AscentConfig::default()
        };
        let t = gradient_ascent(&prob, &rho, &cfg).unwrap();
        assert_eq!(t.records.len(), 1);
        assert_eq!(t.best, rho);
    }
}
