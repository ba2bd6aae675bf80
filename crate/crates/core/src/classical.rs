//! Classical maximum arrival probability for fixed position and momentum
//! marginals.
//!
//! The coupling problem is solved by a sweep in `x`: mass of `ν̃` that has
//! become reachable (`y ≥ a − x`) but is not yet matched waits in a
//! reservoir `q`, and each slice of `μ` takes what it can from it.  The
//! same sweep carries forward-mode parameter derivatives.

use std::io::Read;

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::grid::UniformGrid;

/// Mass tolerance for marginal normalization.
pub const NORMALIZATION_TOL: f64 = 1e-6;
/// Density level at the grid boundary that triggers a truncation warning.
pub const BOUNDARY_WARN: f64 = 1e-8;
/// Landings with `|μ − ν̃|` below this are reported as degenerate.
pub const DEGENERATE_GAP: f64 = 1e-10;

/// Probability density sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    pub grid: UniformGrid,
    pub values: Vec<f64>,
}

impl Density {
    /// Checks sizes, finiteness and non-negativity (no normalization check).
    pub fn new(grid: UniformGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len {
            return Err(invalid(format!(
                "density has {} values for a grid of {} points",
                values.len(),
                grid.len
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(invalid(format!(
                "density values must be finite and non-negative, found {v}"
            )));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_parts(grid: UniformGrid, values: Vec<f64>) -> Self {
        Self { grid, values }
    }

    /// Samples `f` on `grid`.
    pub fn from_fn(grid: UniformGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.points().map(f).collect())
    }

    /// Reads a two-column CSV (coordinate, density) with a header row.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut xs = Vec::new();
        let mut vs = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() < 2 {
                return Err(invalid("density CSV rows need two columns"));
            }
            let parse = |s: &str| s.parse::<f64>().map_err(|e| invalid(format!("bad number `{s}`: {e}")));
            xs.push(parse(&rec[0])?);
            vs.push(parse(&rec[1])?);
        }
        if xs.len() < 2 {
            return Err(invalid("density CSV needs at least two rows"));
        }
        let grid = UniformGrid::spanning(xs[0], xs[xs.len() - 1], xs.len())?;
        for (i, x) in xs.iter().enumerate() {
            if (x - grid.point(i)).abs() > 1e-6 * grid.step {
                return Err(invalid(format!(
                    "density CSV coordinates are not uniform at row {}",
                    i + 1
                )));
            }
        }
        Self::new(grid, vs)
    }

    pub fn mass(&self) -> f64 {
        self.grid.trapezoid(&self.values)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.grid.interpolate(&self.values, x)
    }

    /// Largest density value at either end of the grid.
    pub fn boundary_level(&self) -> f64 {
        self.values[0].max(self.values[self.values.len() - 1])
    }

    /// Density of `c·P` when `P` has this density (`c > 0`).
    pub fn scaled_variable(&self, c: f64) -> Self {
        let grid = UniformGrid {
            start: self.grid.start * c,
            step: self.grid.step * c,
            len: self.grid.len,
        };
        Self {
            grid,
            values: self.values.iter().map(|v| v / c).collect(),
        }
    }

    /// Cumulative trapezoid integral at each grid point.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.values.len());
        let mut acc = 0.0;
        out.push(0.0);
        for w in self.values.windows(2) {
            acc += 0.5 * self.grid.step * (w[0] + w[1]);
            out.push(acc);
        }
        out
    }

    /// `P(X ≥ t)` under the piecewise-linear cumulative.
    pub fn upper_tail(&self, t: f64) -> f64 {
        let cdf = self.cumulative();
        let total = cdf[cdf.len() - 1];
        total - interpolate_clamped(&self.grid, &cdf, t)
    }

    /// Deterministic samples at the mid-quantiles `(k + 1/2)/n`.
    pub fn quantile_samples(&self, n: usize) -> Vec<f64> {
        let cdf = self.cumulative();
        let total = cdf[cdf.len() - 1];
        let mut out = Vec::with_capacity(n);
        let mut j = 0;
        for k in 0..n {
            let target = (k as f64 + 0.5) / n as f64 * total;
            while j + 1 < cdf.len() - 1 && cdf[j + 1] < target {
                j += 1;
            }
            let (c0, c1) = (cdf[j], cdf[j + 1]);
            let frac = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.5 };
            out.push(self.grid.point(j) + frac * self.grid.step);
        }
        out
    }
}

fn interpolate_clamped(grid: &UniformGrid, values: &[f64], x: f64) -> f64 {
    if x <= grid.start {
        values[0]
    } else if x >= grid.end() {
        values[values.len() - 1]
    } else {
        grid.interpolate(values, x)
    }
}

/// `ν̃(y) = (M/ΔT) ν(yM/ΔT)`, the momentum density expressed in flight distance.
pub fn rescale_momentum(nu: &Density, mass: f64, flight_time: f64) -> Result<Density> {
    if !(mass > 0.0) || !(flight_time > 0.0) {
        return Err(invalid("mass and flight time must be positive"));
    }
    Ok(nu.scaled_variable(flight_time / mass))
}

/// Position and momentum marginals plus scenario constants.
#[derive(Debug, Clone)]
pub struct MarginalPair {
    pub mu: Density,
    pub nu: Density,
    pub mass: f64,
    pub flight_time: f64,
    pub target: f64,
}

impl MarginalPair {
    /// Rejects marginals whose trapezoid mass differs from 1 by more than `1e-6`.
    pub fn new(mu: Density, nu: Density, mass: f64, flight_time: f64, target: f64) -> Result<Self> {
        for (name, d) in [("position", &mu), ("momentum", &nu)] {
            let m = d.mass();
            if (m - 1.0).abs() > NORMALIZATION_TOL {
                return Err(invalid(format!("{name} density integrates to {m}, expected 1")));
            }
        }
        if !(mass > 0.0) || !(flight_time > 0.0) || !target.is_finite() {
            return Err(invalid("mass and flight time must be positive and the target finite"));
        }
        Ok(Self {
            mu,
            nu,
            mass,
            flight_time,
            target,
        })
    }

    /// Flight-distance density `ν̃`.
    pub fn nu_tilde(&self) -> Density {
        self.nu.scaled_variable(self.flight_time / self.mass)
    }
}

/// Sweep step and range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepConfig {
    pub dx: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            dx: 1e-4,
            lo: -40.0,
            hi: 40.0,
        }
    }
}

impl SweepConfig {
    pub fn with_dx(dx: f64) -> Self {
        Self { dx, ..Self::default() }
    }

    fn steps(&self) -> Result<usize> {
        if !(self.dx > 0.0) || !(self.hi > self.lo) {
            return Err(invalid(format!(
                "sweep needs dx > 0 and a non-empty range, got dx={} range=[{}, {}]",
                self.dx, self.lo, self.hi
            )));
        }
        Ok(((self.hi - self.lo) / self.dx).round() as usize)
    }
}

/// Supplies `μ(x)` and `ν̃(a − x)` along the sweep, with optional
/// derivatives with respect to `n_params()` parameters.
pub trait MarginalSource {
    fn n_params(&self) -> usize {
        0
    }

    /// Returns `(μ(x), ν̃(a − x))`; fills `dmu`, `dnu` when they are non-empty.
    fn eval(&mut self, x: f64, dmu: &mut [f64], dnu: &mut [f64]) -> (f64, f64);
}

/// Linear interpolation of tabulated marginals.
pub struct TabulatedMarginals {
    mu: Density,
    nu_tilde: Density,
    target: f64,
}

impl TabulatedMarginals {
    pub fn new(pair: &MarginalPair) -> Self {
        Self {
            mu: pair.mu.clone(),
            nu_tilde: pair.nu_tilde(),
            target: pair.target,
        }
    }
}

impl MarginalSource for TabulatedMarginals {
    fn eval(&mut self, x: f64, _: &mut [f64], _: &mut [f64]) -> (f64, f64) {
        (self.mu.eval(x), self.nu_tilde.eval(self.target - x))
    }
}

/// Outcome of one sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub p_star: f64,
    /// `∂p*/∂λ` for each parameter of the source (empty without parameters).
    pub gradient: Vec<f64>,
    /// Positions where `q` landed on zero with `|μ − ν̃| < 1e-10`.
    pub degenerate_landings: Vec<f64>,
    /// Reservoir mass left unmatched at the right end.
    pub final_reservoir: f64,
    /// Largest `μ` or `ν̃` seen at either sweep end.
    pub boundary_level: f64,
}

/// Runs the sweep.
///
/// Per cell: `matched = min(μ dx, q + ν̃ dx)`, `s += matched`,
/// `q ← q + ν̃ dx − matched`.  This is the Euler step of the sweep ODE with
/// the clamp at `q = 0` folded in, so no mass is created or lost when `q`
/// lands.  Derivatives follow the active branch of the `min`, ties going to
/// the `μ` branch.  On the `ν̃` branch the reservoir is emptied, so its
/// derivative jumps into `s_λ` and `q_λ` resets to zero.
pub fn sweep<S: MarginalSource>(source: &mut S, cfg: &SweepConfig) -> Result<SweepResult> {
    let steps = cfg.steps()?;
    let np = source.n_params();
    let mut dmu = vec![0.0; np];
    let mut dnu = vec![0.0; np];
    let mut s_grad = vec![0.0; np];
    let mut q_grad = vec![0.0; np];
    let mut s = 0.0_f64;
    let mut q = 0.0_f64;
    let mut degenerate = Vec::new();
    let dx = cfg.dx;
    let mut boundary = 0.0_f64;
    for i in 0..steps {
        let x = cfg.lo + (i as f64 + 0.5) * dx;
        let (mu, nu) = source.eval(x, &mut dmu, &mut dnu);
        if i == 0 || i + 1 == steps {
            boundary = boundary.max(mu).max(nu);
        }
        let take_mu = mu * dx;
        let available = q + nu * dx;
        if take_mu <= available {
            s += take_mu;
            q = available - take_mu;
            for k in 0..np {
                let m = dmu[k] * dx;
                s_grad[k] += m;
                q_grad[k] += dnu[k] * dx - m;
            }
        } else {
            if q > 0.0 && (mu - nu).abs() < DEGENERATE_GAP {
                degenerate.push(x);
            }
            s += available;
            q = 0.0;
            for k in 0..np {
                s_grad[k] += q_grad[k] + dnu[k] * dx;
                q_grad[k] = 0.0;
            }
        }
    }
    Ok(SweepResult {
        p_star: s,
        gradient: s_grad,
        degenerate_landings: degenerate,
        final_reservoir: q,
        boundary_level: boundary,
    })
}

/// Result of [`classical_max`].
#[derive(Debug, Clone, Serialize)]
pub struct ClassicalResult {
    pub p_star: f64,
    pub dx: f64,
    pub range: [f64; 2],
    pub warnings: Vec<String>,
}

/// Maximum classical arrival probability for tabulated marginals.
pub fn classical_max(pair: &MarginalPair, cfg: &SweepConfig) -> Result<ClassicalResult> {
    let mut src = TabulatedMarginals::new(pair);
    let out = sweep(&mut src, cfg)?;
    let mut warnings = Vec::new();
    let nt = pair.nu_tilde();
    if pair.mu.boundary_level() > BOUNDARY_WARN || nt.boundary_level() > BOUNDARY_WARN {
        warnings.push("density exceeds 1e-8 at the edge of its grid; support may be truncated".to_string());
    }
    if out.boundary_level > BOUNDARY_WARN {
        warnings.push("density exceeds 1e-8 at the edge of the sweep range".to_string());
    }
    Ok(ClassicalResult {
        p_star: out.p_star,
        dx: cfg.dx,
        range: [cfg.lo, cfg.hi],
        warnings,
    })
}

/// Fraction of pairs with `x + y ≥ a` in a maximum matching.
///
/// The compatibility graph is nested (a larger `x` is compatible with every
/// `y` a smaller one is), so scanning `x` upward and matching whenever some
/// compatible `y` is still free is optimal.  Two cursors over sorted copies.
pub fn greedy_matching_oracle(x_samples: &[f64], y_samples: &[f64], a: f64) -> Result<f64> {
    if x_samples.len() != y_samples.len() {
        return Err(invalid("sample vectors must have equal length"));
    }
    if x_samples.is_empty() {
        return Ok(0.0);
    }
    let mut xs = x_samples.to_vec();
    let mut ys = y_samples.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(|a, b| b.total_cmp(a));
    let mut next_y = 0;
    let mut free = 0usize;
    let mut matched = 0usize;
    for x in xs {
        while next_y < ys.len() && x + ys[next_y] >= a {
            free += 1;
            next_y += 1;
        }
        if free > 0 {
            free -= 1;
            matched += 1;
        }
    }
    Ok(matched as f64 / x_samples.len() as f64)
}

/// `∫∫ μ(x) ν̃(y) Θ(x + y − a)`, the value of the independent coupling.
pub fn independent_coupling(pair: &MarginalPair) -> f64 {
    let nt = pair.nu_tilde();
    let integrand: Vec<f64> = pair
        .mu
        .grid
        .points()
        .zip(&pair.mu.values)
        .map(|(x, m)| m * nt.upper_tail(pair.target - x))
        .collect();
    pair.mu.grid.trapezoid(&integrand)
}

/// `min_t P_μ(X ≥ t) + P_ν̃(Y ≥ a − t)` over `t` on the position grid.
pub fn threshold_dual_bound(pair: &MarginalPair) -> f64 {
    let nt = pair.nu_tilde();
    pair.mu
        .grid
        .points()
        .map(|t| pair.mu.upper_tail(t) + nt.upper_tail(pair.target - t))
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(center: f64, sigma: f64) -> impl Fn(f64) -> f64 {
        move |x| {
            let z = (x - center) / sigma;
            (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
        }
    }

    fn uniform_pair(a: f64) -> MarginalPair {
        // Plateaus with a steep but resolved edge keep the trapezoid mass at 1.
        let grid = UniformGrid::spanning(-1.0, 2.0, 30001).unwrap();
        let box01 = |x: f64| if (0.0..=1.0).contains(&x) { 1.0 } else { 0.0 };
        let mut d = Density::from_fn(grid, box01).unwrap();
        let m = d.mass();
        d.values.iter_mut().for_each(|v| *v /= m);
        MarginalPair::new(d.clone(), d, 1.0, 1.0, a).unwrap()
    }

    #[test]
    fn uniform_cases() {
        let cfg = SweepConfig {
            dx: 1e-4,
            lo: -2.0,
            hi: 3.0,
        };
        let full = classical_max(&uniform_pair(1.0), &cfg).unwrap();
        assert!((full.p_star - 1.0).abs() < 5e-3, "{}", full.p_star);
        let half = classical_max(&uniform_pair(1.5), &cfg).unwrap();
        assert!((half.p_star - 0.5).abs() < 5e-3, "{}", half.p_star);
    }

    #[test]
    fn point_masses() {
        let grid = UniformGrid::spanning(-1.0, 3.0, 40001).unwrap();
        let mu = Density::from_fn(grid, gaussian(1.0, 0.01)).unwrap();
        let pair = MarginalPair::new(mu.clone(), mu, 1.0, 1.0, 0.0).unwrap();
        let r = classical_max(
            &pair,
            &SweepConfig {
                dx: 1e-4,
                lo: -5.0,
                hi: 5.0,
            },
        )
        .unwrap();
        assert!((r.p_star - 1.0).abs() < 1e-9);
        let pair = MarginalPair::new(pair.mu.clone(), pair.nu.clone(), 1.0, 1.0, 2.5).unwrap();
        let r = classical_max(
            &pair,
            &SweepConfig {
                dx: 1e-4,
                lo: -5.0,
                hi: 5.0,
            },
        )
        .unwrap();
        assert!(r.p_star < 1e-9);
    }

    #[test]
    fn rescaling_narrows_gaussian() {
        let grid = UniformGrid::spanning(-10.0, 10.0, 2001).unwrap();
        let nu = Density::from_fn(grid, gaussian(0.0, 1.0)).unwrap();
        let same = rescale_momentum(&nu, 1.0, 1.0).unwrap();
        assert_eq!(same, nu);
        let y = rescale_momentum(&nu, 2.0, 1.0).unwrap();
        let g = gaussian(0.0, 0.5);
        for (p, v) in y.grid.points().zip(&y.values) {
            assert!((v - g(p)).abs() < 1e-12);
        }
        assert!((y.mass() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn greedy_trivial_cases() {
        assert_eq!(greedy_matching_oracle(&[0.0], &[0.7], 0.7).unwrap(), 1.0);
        assert_eq!(greedy_matching_oracle(&[0.0, 0.0], &[-1.0, -1.0], 0.0).unwrap(), 0.0);
        assert!(greedy_matching_oracle(&[0.0], &[], 0.0).is_err());
    }

    #[test]
    fn sandwich_and_translation() {
        let grid = UniformGrid::spanning(-12.0, 12.0, 4801).unwrap();
        let mu = Density::from_fn(grid, |x| 0.6 * gaussian(-1.0, 0.7)(x) + 0.4 * gaussian(1.5, 0.4)(x)).unwrap();
        let nu = Density::from_fn(grid, |x| 0.5 * gaussian(0.5, 1.2)(x) + 0.5 * gaussian(-2.0, 0.5)(x)).unwrap();
        let cfg = SweepConfig {
            dx: 1e-4,
            lo: -15.0,
            hi: 15.0,
        };
        let pair = MarginalPair::new(mu.clone(), nu.clone(), 1.0, 1.0, 0.3).unwrap();
        let p = classical_max(&pair, &cfg).unwrap().p_star;
        let lo = independent_coupling(&pair);
        let hi = threshold_dual_bound(&pair);
        assert!(lo <= p + 1e-4 && p <= hi + 1e-4, "{lo} {p} {hi}");

        let shift = 0.75;
        let moved = Density::new(
            UniformGrid {
                start: grid.start + shift,
                ..grid
            },
            mu.values.clone(),
        )
        .unwrap();
        let pair2 = MarginalPair::new(moved, nu, 1.0, 1.0, 0.3 + shift).unwrap();
        let p2 = classical_max(&pair2, &cfg).unwrap().p_star;
        assert!((p - p2).abs() < 2e-4);
    }

    #[test]
    fn csv_roundtrip_and_rejections() {
        let text = "x,density\n0,0\n0.5,1\n1,2\n1.5,1\n2,0\n";
        let d = Density::from_csv(text.as_bytes()).unwrap();
        assert_eq!(d.values, vec![0.0, 1.0, 2.0, 1.0, 0.0]);
        assert!((d.mass() - 2.0).abs() < 1e-15);
        assert!(Density::from_csv("x,d\n0,1\n0.3,1\n1,1\n".as_bytes()).is_err());
        assert!(Density::from_csv("x,d\n0,1\n1,-1\n".as_bytes()).is_err());
        assert!(MarginalPair::new(d.clone(), d, 1.0, 1.0, 0.0).is_err());
    }

    struct Shifted {
        shift: f64,
    }

    impl MarginalSource for Shifted {
        fn n_params(&self) -> usize {
            1
        }
        fn eval(&mut self, x: f64, dmu: &mut [f64], dnu: &mut [f64]) -> (f64, f64) {
            let g = gaussian(self.shift, 0.8);
            let z = x - self.shift;
            dmu[0] = g(x) * z / 0.64;
            dnu[0] = 0.0;
            (g(x), gaussian(0.2, 1.1)(-x))
        }
    }

    #[test]
    fn translating_mu_right_helps() {
        let cfg = SweepConfig {
            dx: 1e-4,
            lo: -12.0,
            hi: 12.0,
        };
        let r = sweep(&mut Shifted { shift: -0.3 }, &cfg).unwrap();
        assert!(r.gradient[0] >= 0.0);
        let h = 1e-5;
        let up = sweep(&mut Shifted { shift: -0.3 + h }, &cfg).unwrap().p_star;
        let down = sweep(&mut Shifted { shift: -0.3 - h }, &cfg).unwrap().p_star;
        let fd = (up - down) / (2.0 * h);
        assert!(
            (fd - r.gradient[0]).abs() < 1e-3 * fd.abs().max(1e-6),
            "{fd} vs {}",
            r.gradient[0]
        );
    }

    #[test]
    fn no_landing_means_plain_integral() {
        // ν̃ mass arrives before μ does and the sweep stops at the centre of μ, so q stays positive.
        struct Early;
        impl MarginalSource for Early {
            fn n_params(&self) -> usize {
                1
            }
            fn eval(&mut self, x: f64, dmu: &mut [f64], dnu: &mut [f64]) -> (f64, f64) {
                let m = gaussian(5.0, 0.3)(x);
                dmu[0] = 2.0 * m;
                dnu[0] = 0.0;
                (m, gaussian(5.0, 0.3)(-x))
            }
        }
        let cfg = SweepConfig {
            dx: 1e-4,
            lo: -10.0,
            hi: 5.0,
        };
        let r = sweep(&mut Early, &cfg).unwrap();
        assert!((r.p_star - 0.5).abs() < 1e-9);
        assert!((r.gradient[0] - 1.0).abs() < 1e-9);
    }
}
