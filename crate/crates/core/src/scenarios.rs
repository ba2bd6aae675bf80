//! Reductions of physical arrival scenarios to the standard problem via
//! affine symplectic maps of phase space.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::phi_alpha::{linear_upper_bound, phi, DEFAULT_DELTA};

/// Tolerance on `|det| = 1`.
pub const DET_TOL: f64 = 1e-12;
/// Upper bound on the Bracken–Melloy constant used to cap reductions.
pub const CBM_UPPER: f64 = 0.0725;
/// Largest `α` for which the rocket bound evaluates `φ(α)` directly.
pub const ROCKET_PHI_MAX_ALPHA: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapKind {
    /// `det = +1`, implemented by a unitary.
    Metaplectic,
    /// `det = −1`, implemented by an anti-unitary.
    AntiMetaplectic,
}

/// Affine form `x·X + p·P + c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AffineForm {
    pub x: f64,
    pub p: f64,
    pub c: f64,
}

impl AffineForm {
    pub const fn new(x: f64, p: f64, c: f64) -> Self {
        Self { x, p, c }
    }

    pub fn eval(&self, x: f64, p: f64) -> f64 {
        self.x * x + self.p * p + self.c
    }

    /// `κ` with `self = κ·other`, if one exists within `tol`.
    pub fn ratio_to(&self, other: &AffineForm, tol: f64) -> Option<f64> {
        let a = [self.x, self.p, self.c];
        let b = [other.x, other.p, other.c];
        let (i, &pivot) = b.iter().enumerate().max_by(|u, v| u.1.abs().total_cmp(&v.1.abs()))?;
        if pivot == 0.0 {
            return None;
        }
        let k = a[i] / pivot;
        let scale = a.iter().chain(&b).fold(1.0_f64, |m, v| m.max(v.abs()));
        a.iter()
            .zip(&b)
            .all(|(u, v)| (u - k * v).abs() <= tol * scale)
            .then_some(k)
    }
}

/// `(x, p) ↦ L·(x, p) + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AffineSymplecticMap {
    pub linear: [[f64; 2]; 2],
    pub offset: [f64; 2],
}

impl AffineSymplecticMap {
    /// Checks `|det L| = 1` to [`DET_TOL`].
    pub fn new(linear: [[f64; 2]; 2], offset: [f64; 2]) -> Result<Self> {
        let m = Self { linear, offset };
        classify(&m)?;
        Ok(m)
    }

    pub fn identity() -> Self {
        Self {
            linear: [[1.0, 0.0], [0.0, 1.0]],
            offset: [0.0, 0.0],
        }
    }

    /// Builds the map from its two component forms `σ(x)` and `σ(p)`.
    pub fn from_components(sx: AffineForm, sp: AffineForm) -> Result<Self> {
        Self::new([[sx.x, sx.p], [sp.x, sp.p]], [sx.c, sp.c])
    }

    pub fn det(&self) -> f64 {
        self.linear[0][0] * self.linear[1][1] - self.linear[0][1] * self.linear[1][0]
    }

    pub fn kind(&self) -> MapKind {
        if self.det() > 0.0 {
            MapKind::Metaplectic
        } else {
            MapKind::AntiMetaplectic
        }
    }

    pub fn apply(&self, x: f64, p: f64) -> (f64, f64) {
        let l = &self.linear;
        (
            l[0][0] * x + l[0][1] * p + self.offset[0],
            l[1][0] * x + l[1][1] * p + self.offset[1],
        )
    }

    /// Component `σ(x)` as a form in the original coordinates.
    pub fn x_component(&self) -> AffineForm {
        AffineForm::new(self.linear[0][0], self.linear[0][1], self.offset[0])
    }

    /// Component `σ(p)` as a form in the original coordinates.
    pub fn p_component(&self) -> AffineForm {
        AffineForm::new(self.linear[1][0], self.linear[1][1], self.offset[1])
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Self) -> Self {
        let a = &self.linear;
        let b = &other.linear;
        let mut linear = [[0.0; 2]; 2];
        for (i, row) in linear.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        let (ox, op) = self.apply(other.offset[0], other.offset[1]);
        Self {
            linear,
            offset: [ox, op],
        }
    }

    pub fn inverse(&self) -> Self {
        let d = self.det();
        let l = &self.linear;
        let linear = [[l[1][1] / d, -l[0][1] / d], [-l[1][0] / d, l[0][0] / d]];
        let inv = Self {
            linear,
            offset: [0.0, 0.0],
        };
        let (ox, op) = inv.apply(self.offset[0], self.offset[1]);
        Self {
            linear,
            offset: [-ox, -op],
        }
    }

    /// `f ∘ σ`.
    pub fn pull_back(&self, f: &AffineForm) -> AffineForm {
        let sx = self.x_component();
        let sp = self.p_component();
        AffineForm::new(
            f.x * sx.x + f.p * sp.x,
            f.x * sx.p + f.p * sp.p,
            f.x * sx.c + f.p * sp.c + f.c,
        )
    }
}

/// Kind of a map, rejecting `|det| ≠ 1`.
pub fn classify(map: &AffineSymplecticMap) -> Result<MapKind> {
    let d = map.det();
    if !d.is_finite() || (d.abs() - 1.0).abs() > DET_TOL {
        return Err(invalid(format!("map is not (anti-)symplectic: det = {d}")));
    }
    Ok(map.kind())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variable {
    Position,
    Momentum,
}

/// States supported in `[lo, hi]` (infinite ends allowed) in one variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Support {
    pub variable: Variable,
    pub lo: f64,
    pub hi: f64,
}

/// Problem `sup tr ρ(Θ(plus) − Θ(minus))` over states with the given support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProblemDescriptor {
    pub plus: AffineForm,
    pub minus: AffineForm,
    pub support: Support,
}

impl ProblemDescriptor {
    /// `Θ(X+P) − Θ(P+β)` over `S[−√α, 0]`.
    pub fn standard(alpha: f64, beta: f64) -> Self {
        Self {
            plus: AffineForm::new(1.0, 1.0, 0.0),
            minus: AffineForm::new(0.0, 1.0, beta),
            support: Support {
                variable: Variable::Position,
                lo: -alpha.sqrt(),
                hi: 0.0,
            },
        }
    }

    /// `Θ(X+P) − Θ(P)` over `S(−∞, β]`.
    pub fn semi_infinite(beta: f64) -> Self {
        Self {
            plus: AffineForm::new(1.0, 1.0, 0.0),
            minus: AffineForm::new(0.0, 1.0, 0.0),
            support: Support {
                variable: Variable::Position,
                lo: f64::NEG_INFINITY,
                hi: beta,
            },
        }
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    if a.is_infinite() || b.is_infinite() {
        return a == b;
    }
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Checks that `σ` carries `scenario` onto `standard`: each indicator
/// argument of the standard problem pulls back to a positive multiple of the
/// scenario's, and `σ(x)` maps the scenario support onto the standard one.
pub fn verify_reduction(
    map: &AffineSymplecticMap,
    standard: &ProblemDescriptor,
    scenario: &ProblemDescriptor,
    tol: f64,
) -> Result<()> {
    classify(map)?;
    for (name, s, t) in [
        ("plus", &standard.plus, &scenario.plus),
        ("minus", &standard.minus, &scenario.minus),
    ] {
        match map.pull_back(s).ratio_to(t, tol) {
            Some(k) if k > 0.0 => {}
            _ => {
                return Err(invalid(format!(
                    "{name} indicator does not pull back to a positive multiple"
                )))
            }
        }
    }
    if standard.support.variable != Variable::Position {
        return Err(invalid("standard problems constrain position"));
    }
    let sx = map.x_component();
    let (slope, other) = match scenario.support.variable {
        Variable::Position => (sx.x, sx.p),
        Variable::Momentum => (sx.p, sx.x),
    };
    if other.abs() > tol * slope.abs().max(1.0) || slope == 0.0 {
        return Err(invalid("σ(x) depends on a variable the support does not constrain"));
    }
    let image = |v: f64| {
        if v.is_infinite() {
            v * slope.signum()
        } else {
            slope * v + sx.c
        }
    };
    let (mut lo, mut hi) = (image(scenario.support.lo), image(scenario.support.hi));
    if lo > hi {
        std::mem::swap(&mut lo, &mut hi);
    }
    if !(close(lo, standard.support.lo, tol) && close(hi, standard.support.hi, tol)) {
        return Err(invalid(format!(
            "support maps to [{lo}, {hi}], expected [{}, {}]",
            standard.support.lo, standard.support.hi
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Variant {
    /// Quantum projectile should arrive more often.
    Ultrafast,
    /// Quantum projectile should arrive less often.
    Ultraslow,
    /// Classical projectile may land anywhere in `[a − b, ∞)`.
    Handicapped { b: f64 },
}

/// Projectile prepared in `[0, L]` and detected in `[a, ∞)` after `ΔT`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectileScenario {
    pub mass: f64,
    pub length: f64,
    pub target: f64,
    pub flight_time: f64,
    pub variant: Variant,
}

impl ProjectileScenario {
    fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0 && self.length > 0.0 && self.flight_time > 0.0 && self.target.is_finite()) {
            return Err(invalid("mass, preparation length and flight time must be positive"));
        }
        if let Variant::Handicapped { b } = self.variant {
            if !(b >= 0.0 && b.is_finite()) {
                return Err(invalid("handicap must be non-negative"));
            }
        }
        Ok(())
    }

    /// The scenario's own operator and support.
    pub fn descriptor(&self) -> ProblemDescriptor {
        let v = self.flight_time / self.mass;
        let a = self.target;
        let support = Support {
            variable: Variable::Position,
            lo: 0.0,
            hi: self.length,
        };
        let (plus, minus) = match self.variant {
            Variant::Ultrafast => (AffineForm::new(1.0, v, -a), AffineForm::new(0.0, v, -(a - self.length))),
            Variant::Ultraslow => (AffineForm::new(0.0, v, -a), AffineForm::new(1.0, v, -a)),
            Variant::Handicapped { b } => (
                AffineForm::new(1.0, v, -a),
                AffineForm::new(0.0, v, -(a - b - self.length)),
            ),
        };
        ProblemDescriptor { plus, minus, support }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Reduction {
    pub alpha: f64,
    pub beta: f64,
    pub map: AffineSymplecticMap,
    pub kind: MapKind,
}

/// `α = ML²/ΔT`, `β = b√(M/ΔT)` and the map onto the (extended) standard problem.
pub fn reduce_projectile(s: &ProjectileScenario) -> Result<Reduction> {
    s.validate()?;
    let r = (s.mass / s.flight_time).sqrt();
    let alpha = s.mass * s.length * s.length / s.flight_time;
    let (map, beta) = match s.variant {
        Variant::Ultrafast | Variant::Handicapped { .. } => {
            let beta = match s.variant {
                Variant::Handicapped { b } => b * r,
                _ => 0.0,
            };
            let m = AffineSymplecticMap::from_components(
                AffineForm::new(r, 0.0, -r * s.length),
                AffineForm::new(0.0, 1.0 / r, -r * (s.target - s.length)),
            )?;
            (m, beta)
        }
        Variant::Ultraslow => {
            let m = AffineSymplecticMap::from_components(
                AffineForm::new(-r, 0.0, 0.0),
                AffineForm::new(r, 1.0 / r, -r * s.target),
            )?;
            (m, 0.0)
        }
    };
    Ok(Reduction {
        alpha,
        beta,
        kind: map.kind(),
        map,
    })
}

/// Physical constants used to instantiate the catalog rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CatalogParams {
    pub mass: f64,
    pub flight_time: f64,
    pub length: f64,
    pub target: f64,
    pub force: f64,
    pub gamma: f64,
    pub reentry_point: f64,
    pub t1: f64,
    pub t2: f64,
}

impl Default for CatalogParams {
    /// Values for which every coefficient is a dyadic rational, so the
    /// verification is exact in floating point.
    fn default() -> Self {
        Self {
            mass: 8.0,
            flight_time: 2.0,
            length: 1.0,
            target: 2.0,
            force: 3.0,
            gamma: 0.5,
            reentry_point: 1.5,
            t1: 1.0,
            t2: 2.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CatalogRow {
    pub name: &'static str,
    /// `"finite"` for rows equivalent to the standard problem on
    /// `[−√α, 0]`, `"semi-infinite"` for rows equivalent to its extension.
    pub family: &'static str,
    pub operator: &'static str,
    pub states: &'static str,
    pub scenario: ProblemDescriptor,
    pub standard: ProblemDescriptor,
    pub map: AffineSymplecticMap,
    pub kind: MapKind,
    /// `"alpha"` or `"beta"`.
    pub parameter: &'static str,
    pub value: f64,
    /// Closed form of the parameter.
    pub formula: &'static str,
}

impl CatalogRow {
    pub fn verify(&self, tol: f64) -> Result<()> {
        verify_reduction(&self.map, &self.standard, &self.scenario, tol)
    }
}

/// The eight scenario rows with their reducing maps.
pub fn table_catalog(p: &CatalogParams) -> Result<Vec<CatalogRow>> {
    if !(p.mass > 0.0 && p.flight_time > 0.0 && p.length > 0.0 && p.t1 > 0.0 && p.t2 > p.t1) {
        return Err(invalid("catalog needs positive mass, times and length with t2 > t1"));
    }
    let r = (p.mass / p.flight_time).sqrt();
    let v = p.flight_time / p.mass;
    let alpha = p.mass * p.length * p.length / p.flight_time;
    let pos = |lo: f64, hi: f64| Support {
        variable: Variable::Position,
        lo,
        hi,
    };
    let mom = |lo: f64, hi: f64| Support {
        variable: Variable::Momentum,
        lo,
        hi,
    };
    let f = AffineForm::new;
    let inf = f64::INFINITY;
    let mut rows = Vec::with_capacity(8);
    let mut push = |name,
                    family,
                    operator,
                    states,
                    scenario,
                    standard,
                    sx: AffineForm,
                    sp: AffineForm,
                    parameter,
                    value,
                    formula|
     -> Result<()> {
        let map = AffineSymplecticMap::from_components(sx, sp)?;
        rows.push(CatalogRow {
            name,
            family,
            operator,
            states,
            scenario,
            standard,
            kind: map.kind(),
            map,
            parameter,
            value,
            formula,
        });
        Ok(())
    };

    let standard = ProblemDescriptor::standard(alpha, 0.0);
    push(
        "standard problem",
        "finite",
        "Θ(P+X) − Θ(P)",
        "S[−√α, 0]",
        standard,
        standard,
        f(1.0, 0.0, 0.0),
        f(0.0, 1.0, 0.0),
        "alpha",
        alpha,
        "α",
    )?;
    let fast = ProjectileScenario {
        mass: p.mass,
        length: p.length,
        target: p.target,
        flight_time: p.flight_time,
        variant: Variant::Ultrafast,
    };
    push(
        "ultrafast projectile",
        "finite",
        "Θ(X + (ΔT/M)P − a) − Θ((ΔT/M)P − (a − L))",
        "S[0, L]",
        fast.descriptor(),
        standard,
        f(r, 0.0, -r * p.length),
        f(0.0, 1.0 / r, -r * (p.target - p.length)),
        "alpha",
        alpha,
        "ML²/ΔT",
    )?;
    let slow = ProjectileScenario {
        variant: Variant::Ultraslow,
        ..fast
    };
    push(
        "ultraslow projectile",
        "finite",
        "Θ((ΔT/M)P − a) − Θ(X + (ΔT/M)P − a)",
        "S[0, L]",
        slow.descriptor(),
        standard,
        f(-r, 0.0, 0.0),
        f(r, 1.0 / r, -r * p.target),
        "alpha",
        alpha,
        "ML²/ΔT",
    )?;
    let backflow = ProblemDescriptor {
        plus: f(-1.0, -v, 0.0),
        minus: f(-1.0, 0.0, 0.0),
        support: mom(0.0, inf),
    };
    push(
        "quantum backflow",
        "finite",
        "Θ(−X − (ΔT/M)P) − Θ(−X)",
        "P[0, ∞)",
        backflow,
        ProblemDescriptor::semi_infinite(0.0),
        f(0.0, -1.0 / r, 0.0),
        f(-r, 0.0, 0.0),
        "alpha",
        inf,
        "∞",
    )?;

    push(
        "extended standard problem at α = ∞",
        "semi-infinite",
        "Θ(P+X) − Θ(P)",
        "S(−∞, β]",
        ProblemDescriptor::semi_infinite(p.gamma),
        ProblemDescriptor::semi_infinite(p.gamma),
        f(1.0, 0.0, 0.0),
        f(0.0, 1.0, 0.0),
        "beta",
        p.gamma,
        "β",
    )?;
    let beta_g = p.gamma / r;
    push(
        "generalized quantum backflow",
        "semi-infinite",
        "Θ(−X − (ΔT/M)P) − Θ(−X)",
        "P[−γ, ∞)",
        ProblemDescriptor {
            support: mom(-p.gamma, inf),
            ..backflow
        },
        ProblemDescriptor::semi_infinite(beta_g),
        f(0.0, -1.0 / r, 0.0),
        f(-r, 0.0, 0.0),
        "beta",
        beta_g,
        "√(ΔT/M)·γ",
    )?;
    let beta_f = p.force * p.flight_time / (2.0 * r);
    push(
        "constant-force quantum backflow",
        "semi-infinite",
        "Θ(−X − (ΔT/M)P + FΔT²/2M) − Θ(−X)",
        "P[0, ∞)",
        ProblemDescriptor {
            plus: f(-1.0, -v, p.force * p.flight_time * p.flight_time / (2.0 * p.mass)),
            minus: f(-1.0, 0.0, 0.0),
            support: mom(0.0, inf),
        },
        ProblemDescriptor::semi_infinite(beta_f),
        f(0.0, -1.0 / r, p.force * p.flight_time / (2.0 * r)),
        f(-r, 0.0, 0.0),
        "beta",
        beta_f,
        "√(ΔT/M)·FΔT/2",
    )?;
    let c = (p.t2 - p.t1) / p.t2;
    let u = (p.mass * c / p.t1).sqrt();
    let w = (p.mass / (p.t1 * c)).sqrt();
    let l = p.reentry_point;
    let beta_r = -u * l;
    push(
        "quantum reentry",
        "semi-infinite",
        "Θ(l − X − (t₂/M)P) − Θ(l − X − (t₁/M)P)",
        "S(−∞, 0]",
        ProblemDescriptor {
            plus: f(-1.0, -p.t2 / p.mass, l),
            minus: f(-1.0, -p.t1 / p.mass, l),
            support: pos(f64::NEG_INFINITY, 0.0),
        },
        ProblemDescriptor::semi_infinite(beta_r),
        f(u, 0.0, -u * l),
        f(-w, -w * p.t1 / p.mass, w * l),
        "beta",
        beta_r,
        "−l·√(MC/t₁), C = (t₂ − t₁)/t₂",
    )?;
    Ok(rows)
}

/// One instantaneous fuel burn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Burn {
    pub t: f64,
    pub m: f64,
}

/// Rocket that starts in `[0, l]` with mass `M` and ejects fuel prepared in
/// `[−λ/2, λ/2]` relative to itself at each burn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocketSchedule {
    #[serde(rename = "M")]
    pub mass: f64,
    pub l: f64,
    pub lambda: f64,
    pub burns: Vec<Burn>,
    pub t_final: f64,
}

impl RocketSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0 && self.l > 0.0 && self.lambda >= 0.0 && self.t_final.is_finite()) {
            return Err(invalid(
                "rocket needs positive mass and support length and non-negative chamber length",
            ));
        }
        let mut prev = 0.0_f64;
        let mut mass = self.mass;
        for (j, b) in self.burns.iter().enumerate() {
            if !(b.t.is_finite() && b.m > 0.0) || b.t < 0.0 || (j > 0 && b.t <= prev) {
                return Err(invalid(format!(
                    "burn {j} must have positive fuel and a strictly later time"
                )));
            }
            mass -= b.m;
            if !(mass > 0.0) {
                return Err(invalid(format!("burn {j} empties the rocket")));
            }
            prev = b.t;
        }
        if self.t_final < prev {
            return Err(invalid("final time precedes the last burn"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RocketReduction {
    /// Coefficients of `(X_R⁽⁰⁾, X_REL⁽¹⁾, …)` in the final position.
    pub c: Vec<f64>,
    /// Coefficients of `(P_R⁽⁰⁾, P_REL⁽¹⁾, …)` in the final position.
    pub d: Vec<f64>,
    pub beta: f64,
    pub l_plus: f64,
    pub l_minus: f64,
    pub alpha_eff: f64,
    /// Upper bound on the quantum advantage of the rocket.
    pub bound: f64,
    /// Which estimate produced `bound`.
    pub bound_source: &'static str,
}

/// Final rocket position as `c·X + d·P`, iterating burns and free flights.
pub fn rocket_coefficients(s: &RocketSchedule) -> Result<(Vec<f64>, Vec<f64>)> {
    s.validate()?;
    let n = s.burns.len() + 1;
    let mut cx = vec![0.0; n];
    let mut cp = vec![0.0; n];
    let mut px = vec![0.0; n];
    let mut pp = vec![0.0; n];
    cx[0] = 1.0;
    pp[0] = 1.0;
    let mut mass = s.mass;
    let mut time = 0.0;
    let fly = |dt: f64, mass: f64, cx: &mut [f64], cp: &mut [f64], px: &[f64], pp: &[f64]| {
        for i in 0..cx.len() {
            cx[i] += dt / mass * px[i];
            cp[i] += dt / mass * pp[i];
        }
    };
    for (j, b) in s.burns.iter().enumerate() {
        fly(b.t - time, mass, &mut cx, &mut cp, &px, &pp);
        time = b.t;
        cx[j + 1] -= b.m / mass;
        let keep = (mass - b.m) / mass;
        for i in 0..n {
            px[i] *= keep;
            pp[i] *= keep;
        }
        pp[j + 1] -= 1.0;
        mass -= b.m;
    }
    fly(s.t_final - time, mass, &mut cx, &mut cp, &px, &pp);
    // Position operators commute with momenta and never enter P_R, so the
    // final position carries X coefficients in `cx` and P coefficients in `cp`.
    debug_assert!(px.iter().all(|&v| v == 0.0));
    Ok((cx, cp))
}

/// Reduces a rocket schedule to an effective projectile and bounds its advantage.
pub fn rocket_reduce(s: &RocketSchedule) -> Result<RocketReduction> {
    let (c, d) = rocket_coefficients(s)?;
    reduce_coefficients(c, d, s.l, s.lambda)
}

/// Bound for a final position `c·X + d·P` with the rocket prepared in
/// `[0, l]` and every fuel parcel in `[−λ/2, λ/2]`.
pub fn reduce_coefficients(c: Vec<f64>, d: Vec<f64>, l: f64, lambda: f64) -> Result<RocketReduction> {
    if c.is_empty() || c.len() != d.len() {
        return Err(invalid("coefficient vectors must be non-empty and of equal length"));
    }
    if !(l > 0.0 && lambda >= 0.0) {
        return Err(invalid("support lengths must be positive"));
    }
    let beta: f64 = c.iter().zip(&d).map(|(a, b)| a * b).sum();
    let tail: f64 = c[1..].iter().map(|v| v.abs()).sum();
    let l_plus = l * c[0].max(0.0) + 0.5 * lambda * tail;
    let l_minus = l * c[0].min(0.0) - 0.5 * lambda * tail;
    let width = l_plus - l_minus;
    let scale = c.iter().chain(&d).fold(0.0_f64, |m, v| m.max(v.abs()));
    if beta.abs() <= 1e-14 * scale * scale {
        return Ok(RocketReduction {
            c,
            d,
            beta: 0.0,
            l_plus,
            l_minus,
            alpha_eff: 0.0,
            bound: 0.0,
            bound_source: "commuting",
        });
    }
    let alpha_eff = width * width / beta.abs();
    let mut bound = CBM_UPPER;
    let mut source = "cbm-upper";
    let lin = linear_upper_bound(alpha_eff);
    if lin < bound {
        bound = lin;
        source = "linear";
    }
    if alpha_eff <= ROCKET_PHI_MAX_ALPHA {
        let v = phi(alpha_eff, DEFAULT_DELTA)?;
        let certified = v.phi + v.delta;
        if certified < bound {
            bound = certified;
            source = "phi";
        }
    }
    Ok(RocketReduction {
        c,
        d,
        beta,
        l_plus,
        l_minus,
        alpha_eff,
        bound,
        bound_source: source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classify_examples() {
        assert_eq!(
            classify(&AffineSymplecticMap::identity()).unwrap(),
            MapKind::Metaplectic
        );
        let (m, t) = (2.0_f64, 0.5_f64);
        let back = AffineSymplecticMap::new([[0.0, -(t / m).sqrt()], [-(m / t).sqrt(), 0.0]], [0.0, 0.0]).unwrap();
        assert_eq!(classify(&back).unwrap(), MapKind::AntiMetaplectic);
        assert!(AffineSymplecticMap::new([[2.0, 0.0], [0.0, 1.0]], [0.0, 0.0]).is_err());
    }

    #[test]
    fn reduce_examples() {
        let s = ProjectileScenario {
            mass: 1.0,
            length: 1.0,
            target: 2.0,
            flight_time: 1.0,
            variant: Variant::Ultrafast,
        };
        let r = reduce_projectile(&s).unwrap();
        assert_eq!((r.alpha, r.beta, r.kind), (1.0, 0.0, MapKind::Metaplectic));
        let s2 = ProjectileScenario {
            mass: 2.0,
            length: 3.0,
            flight_time: 0.5,
            ..s
        };
        assert_eq!(reduce_projectile(&s2).unwrap().alpha, 36.0);
        let slow = reduce_projectile(&ProjectileScenario {
            variant: Variant::Ultraslow,
            ..s2
        })
        .unwrap();
        assert_eq!(slow.alpha, 36.0);
        assert_eq!(slow.kind, MapKind::AntiMetaplectic);
    }

    #[test]
    fn projectile_maps_verify() {
        for variant in [Variant::Ultrafast, Variant::Ultraslow, Variant::Handicapped { b: 0.25 }] {
            let s = ProjectileScenario {
                mass: 8.0,
                length: 1.0,
                target: 2.0,
                flight_time: 2.0,
                variant,
            };
            let r = reduce_projectile(&s).unwrap();
            let std = ProblemDescriptor::standard(r.alpha, r.beta);
            verify_reduction(&r.map, &std, &s.descriptor(), 0.0).unwrap();
        }
    }

    #[test]
    fn compose_and_inverse() {
        let a = AffineSymplecticMap::new([[0.0, -0.5], [-2.0, 0.0]], [1.0, 0.25]).unwrap();
        let b = AffineSymplecticMap::new([[1.0, 3.0], [0.0, 1.0]], [-2.0, 0.5]).unwrap();
        let ab = a.compose(&b);
        assert_eq!(classify(&ab).unwrap(), MapKind::AntiMetaplectic);
        let (x, p) = ab.apply(0.75, -1.25);
        let (bx, bp) = b.apply(0.75, -1.25);
        assert_eq!((x, p), a.apply(bx, bp));
        let id = a.compose(&a.inverse());
        assert_eq!(id, AffineSymplecticMap::identity());
    }

    #[test]
    fn rocket_without_burns_is_a_projectile() {
        let s = RocketSchedule {
            mass: 2.0,
            l: 1.5,
            lambda: 0.3,
            burns: vec![],
            t_final: 0.5,
        };
        let r = rocket_reduce(&s).unwrap();
        assert_eq!(r.c, vec![1.0]);
        assert_eq!(r.d, vec![0.25]);
        assert_eq!(r.beta, 0.25);
        assert!((r.alpha_eff - 2.0 * 1.5 * 1.5 / 0.5).abs() < 1e-12);
    }

    #[test]
    fn rocket_validation() {
        let empty = RocketSchedule {
            mass: 1.0,
            l: 1.0,
            lambda: 0.1,
            burns: vec![Burn { t: 0.0, m: 1.0 }],
            t_final: 1.0,
        };
        assert!(rocket_reduce(&empty).is_err());
        let unordered = RocketSchedule {
            burns: vec![Burn { t: 0.5, m: 0.1 }, Burn { t: 0.5, m: 0.1 }],
            ..empty.clone()
        };
        assert!(rocket_reduce(&unordered).is_err());
    }
}
