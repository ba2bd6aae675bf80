//! Command-line front end: reproduces the curves and constants and writes
//! CSV, JSON and SVG files.

mod svg;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use num_complex::Complex64;
use serde_json::{json, Value};

use qtransport::cbm::{self, Combination, KernelOptions, ScanConfig};
use qtransport::classical::{classical_max, greedy_matching_oracle, Density, MarginalPair, SweepConfig};
use qtransport::grid::UniformGrid;
use qtransport::number_basis::{wigner_state, DensityMatrix, WignerGrid};
use qtransport::phi_alpha::{self, alpha_grid, fit_inverse_sqrt, linear_upper_bound, phi_curve, CONJECTURE};
use qtransport::restricted::{gradient_ascent, spectral_seed, AscentConfig, RestrictedProblem};
use qtransport::scenarios::{rocket_reduce, RocketSchedule};
use qtransport::{Error, Precision};

use svg::{Plot, Series};

const SCHEMA: u32 = 1;
/// Truncation above which double precision loses digits in the overlaps.
const EXTENDED_ADVISED: usize = 400;

#[derive(Parser)]
#[command(
    name = "qtransport",
    version,
    about = "Quantum arrival-probability bounds and classical comparisons"
)]
struct Cli {
    /// Directory for output files.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Arithmetic for number-basis matrix elements: double or extended.
    #[arg(long, global = true, default_value = "double")]
    precision: Precision,
    /// Worker threads (0 uses all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Seed for randomized cross-checks; every subcommand is deterministic and ignores it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// φ(α) on a grid with the linear bound and the conjectured limit.
    PhiCurve(PhiArgs),
    /// Lower and upper bounds on the Bracken–Melloy constant.
    Cbm(CbmArgs),
    /// Spectral seed and optional gradient ascent for the restricted projectile.
    Restricted(RestrictedArgs),
    /// Maximal classical arrival probability for tabulated marginals.
    Classical(ClassicalArgs),
    /// Reduction of a rocket burn schedule and its advantage bound.
    Rocket(RocketArgs),
    /// Wigner function of a number-basis state on a grid.
    Wigner(WignerArgs),
}

#[derive(Args)]
struct PhiArgs {
    #[arg(long, default_value_t = 100.0)]
    alpha_max: f64,
    #[arg(long, default_value_t = 1000)]
    points: usize,
    #[arg(long, default_value_t = phi_alpha::DEFAULT_DELTA)]
    delta: f64,
    /// Also write phi_curve.svg.
    #[arg(long)]
    svg: bool,
}

#[derive(Args)]
struct CbmArgs {
    /// Number-basis truncation of the variational lower bound.
    #[arg(long = "n-max", visible_alias = "N", default_value_t = cbm::DEFAULT_N)]
    n_max: usize,
    #[arg(long, default_value_t = cbm::DEFAULT_LAMBDA)]
    lambda: f64,
    /// Weights `k:w,…` on B_k added to the quadrant operator; empty for A alone.
    #[arg(long, default_value = "0:0.7673,0.1:-0.8767,0.5:0.09895")]
    weights: String,
    /// Regularization of the dilation kernels; 0 uses the limit form.
    #[arg(long, default_value_t = cbm::DEFAULT_EPS_REG)]
    eps_reg: f64,
    #[arg(long, default_value_t = -20.0, allow_hyphen_values = true)]
    eta_min: f64,
    #[arg(long, default_value_t = 20.0)]
    eta_max: f64,
    #[arg(long, default_value_t = 0.01)]
    eta_step: f64,
    #[arg(long)]
    svg: bool,
}

#[derive(Args)]
struct RestrictedArgs {
    #[arg(long = "n-max", visible_alias = "N", default_value_t = 170)]
    n_max: usize,
    /// Gradient-ascent iterations after the seed (0 skips the ascent).
    #[arg(long, default_value_t = 0)]
    iters: usize,
    #[arg(long, default_value_t = 1e-3)]
    step: f64,
    /// Sweep step during the ascent.
    #[arg(long, default_value_t = qtransport::restricted::ASCENT_DX)]
    ode_dx: f64,
    /// Sweep step for reported objective values.
    #[arg(long, default_value_t = qtransport::restricted::REPORT_DX)]
    report_dx: f64,
    /// Evaluate the classical term at the seed even without an ascent.
    #[arg(long)]
    objective: bool,
    #[arg(long)]
    svg: bool,
}

#[derive(Args)]
struct ClassicalArgs {
    /// Position density CSV (x, density) with a header row.
    #[arg(long)]
    mu: PathBuf,
    /// Momentum density CSV (p, density) with a header row.
    #[arg(long)]
    nu: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    mass: f64,
    #[arg(long, default_value_t = 1.0)]
    flight_time: f64,
    /// Detector edge a.
    #[arg(long, allow_hyphen_values = true)]
    target: f64,
    #[arg(long, default_value_t = 1e-4)]
    dx: f64,
    #[arg(long, default_value_t = -40.0, allow_hyphen_values = true)]
    lo: f64,
    #[arg(long, default_value_t = 40.0, allow_hyphen_values = true)]
    hi: f64,
    /// Cross-check against the greedy matching oracle with this many samples.
    #[arg(long)]
    oracle: Option<usize>,
}

#[derive(Args)]
struct RocketArgs {
    /// Schedule JSON {M, l, lambda, burns: [{t, m}], t_final}.
    #[arg(long)]
    schedule: PathBuf,
}

#[derive(Args)]
struct WignerArgs {
    #[arg(long = "n-max", visible_alias = "N", default_value_t = 30)]
    n_max: usize,
    /// Number state |k⟩ instead of the spectral seed.
    #[arg(long)]
    fock: Option<usize>,
    /// Half-width of the square grid (default √(2N) + 5).
    #[arg(long)]
    extent: Option<f64>,
    #[arg(long, default_value_t = 401)]
    points: usize,
}

enum Failure {
    Numerical(String),
    Input(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type CmdResult = Result<Value, Failure>;

struct Ctx {
    out_dir: PathBuf,
    precision: Precision,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>, Failure> {
        Ok(BufWriter::new(File::create(self.path(name))?))
    }

    fn write_json(&self, name: &str, value: &Value) -> Result<(), Failure> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        fs::write(self.path(name), s)?;
        Ok(())
    }

    fn write_svg(&self, name: &str, plot: &Plot) -> Result<(), Failure> {
        fs::write(self.path(name), plot.render())?;
        Ok(())
    }
}

fn csv_line(fields: &[String]) -> String {
    let mut s = fields.join(",");
    s.push('\n');
    s
}

fn cmd_phi_curve(ctx: &Ctx, a: &PhiArgs) -> CmdResult {
    if !(a.delta > 0.0 && a.delta < 1.0) {
        return Err(Failure::Input(format!("delta must lie in (0, 1), got {}", a.delta)));
    }
    let alphas = alpha_grid(a.alpha_max, a.points)?;
    let curve = phi_curve(&alphas, a.delta);
    let mut body = csv_line(&["alpha", "phi", "delta", "N_used", "linear_bound", "conjecture"].map(String::from));
    for p in &curve.points {
        body.push_str(&csv_line(&[
            p.alpha.to_string(),
            p.phi.to_string(),
            p.delta.to_string(),
            p.order.to_string(),
            linear_upper_bound(p.alpha).to_string(),
            CONJECTURE.to_string(),
        ]));
    }
    fs::write(ctx.path("phi_curve.csv"), body)?;
    let max_decrease = curve.points.windows(2).map(|w| w[0].phi - w[1].phi).fold(0.0, f64::max);
    let fit = fit_inverse_sqrt(&curve.points, 25.0, a.alpha_max.min(100.0)).ok();
    if a.svg {
        ctx.write_svg(
            "phi_curve.svg",
            &Plot {
                title: "φ(α)",
                x_label: "α",
                y_label: "φ",
                series: vec![
                    Series {
                        label: "φ(α)",
                        points: curve.points.iter().map(|p| (p.alpha, p.phi)).collect(),
                    },
                    Series {
                        label: "linear bound",
                        points: curve
                            .points
                            .iter()
                            .map(|p| (p.alpha, linear_upper_bound(p.alpha).min(0.05)))
                            .collect(),
                    },
                ],
                references: vec![("0.0384517", CONJECTURE)],
            },
        )?;
    }
    let summary = json!({
        "schema": SCHEMA,
        "points": curve.points.len(),
        "delta": a.delta,
        "max_decrease": max_decrease,
        "monotone_within_2delta": max_decrease <= 2.0 * a.delta,
        "fit": fit.map(|(r, s)| json!({"r": r, "s": s, "range": [25.0, a.alpha_max.min(100.0)]})),
        "failures": curve.failures,
    });
    ctx.write_json("phi_curve.json", &summary)?;
    if curve.failures.iter().any(|f| f.numerical) {
        return Err(Failure::Numerical(format!(
            "{} grid points failed to reach precision; see phi_curve.json",
            curve.failures.len()
        )));
    }
    if let Some(f) = curve.failures.first() {
        return Err(Failure::Input(f.message.clone()));
    }
    Ok(summary)
}

fn cmd_cbm(ctx: &Ctx, a: &CbmArgs) -> CmdResult {
    if !(a.eps_reg >= 0.0 && a.eps_reg.is_finite()) {
        return Err(Failure::Input("eps-reg must be non-negative".into()));
    }
    let weights = cbm::parse_weights(&a.weights)?;
    let kernel = KernelOptions {
        eps_reg: (a.eps_reg > 0.0).then_some(a.eps_reg),
        ..KernelOptions::default()
    };
    let cfg = ScanConfig {
        eta_min: a.eta_min,
        eta_max: a.eta_max,
        eta_step: a.eta_step,
        kernel,
        ..ScanConfig::default()
    };
    let comb = Combination::tilde_a(&weights);
    let scan = cbm::tilde_a_scan(&comb, &cfg)?;
    scan.write_csv(ctx.create("cbm_scan.csv")?)?;
    let inf = scan
        .infimum()
        .ok_or_else(|| Failure::Input("empty dilation scan".into()))?;
    let upper = -inf.lambda_min;
    let lower = cbm::lower_bound(a.n_max, a.lambda, ctx.precision)?;
    if a.svg {
        ctx.write_svg(
            "cbm_scan.svg",
            &Plot {
                title: "smallest eigenvalue of the block combination",
                x_label: "η",
                y_label: "λ_min",
                series: vec![Series {
                    label: "λ_min(η)",
                    points: scan.records.iter().map(|r| (r.eta, r.lambda_min)).collect(),
                }],
                references: vec![("−upper", -upper)],
            },
        )?;
    }
    let summary = json!({
        "schema": SCHEMA,
        "lower": lower.corrected_lower_bound,
        "upper": upper,
        "conjecture": CONJECTURE,
        "variational": lower,
        "dilation_scan": {
            "weights": weights,
            "eps_reg": kernel.eps_reg,
            "eta_range": [a.eta_min, a.eta_max],
            "eta_step": a.eta_step,
            "eta_at_infimum": inf.eta,
            "quadrature_error": inf.quadrature_error,
            "failed_points": scan.failures.len(),
        },
    });
    ctx.write_json("cbm.json", &summary)?;
    if !scan.failures.is_empty() {
        return Err(Failure::Numerical(format!(
            "{} dilation points failed quadrature",
            scan.failures.len()
        )));
    }
    if lower.corrected_lower_bound > upper {
        return Err(Failure::Numerical(format!(
            "lower bound {} exceeds upper bound {upper}",
            lower.corrected_lower_bound
        )));
    }
    Ok(summary)
}

fn cmd_restricted(ctx: &Ctx, a: &RestrictedArgs) -> CmdResult {
    if a.n_max > EXTENDED_ADVISED && ctx.precision == Precision::Double {
        eprintln!(
            "note: N = {} exceeds {EXTENDED_ADVISED}; rerun with --precision extended for full accuracy",
            a.n_max
        );
    }
    if !(a.step > 0.0 && a.ode_dx > 0.0 && a.report_dx > 0.0) {
        return Err(Failure::Input("step sizes must be positive".into()));
    }
    let (seed, top) = spectral_seed(a.n_max, ctx.precision)?;
    let mut summary = json!({
        "schema": SCHEMA,
        "n_max": a.n_max,
        "precision": ctx.precision,
        "seed_eigenvalue": top,
    });
    if a.objective || a.iters > 0 {
        let problem = RestrictedProblem::new(a.n_max, ctx.precision);
        summary["seed_objective"] = serde_json::to_value(problem.objective(&seed, a.report_dx)?)?;
        if a.iters > 0 {
            let cfg = AscentConfig {
                step: a.step,
                iters: a.iters,
                ode_dx: a.ode_dx,
                report_dx: a.report_dx,
                ..AscentConfig::default()
            };
            let trace = gradient_ascent(&problem, &seed, &cfg)?;
            trace.write_csv(ctx.create("restricted_trace.csv")?)?;
            if a.svg {
                ctx.write_svg(
                    "restricted_trace.svg",
                    &Plot {
                        title: "restricted-projectile ascent",
                        x_label: "iteration",
                        y_label: "objective",
                        series: vec![Series {
                            label: "objective",
                            points: trace
                                .records
                                .iter()
                                .map(|r| (r.iteration as f64, r.objective))
                                .collect(),
                        }],
                        references: vec![],
                    },
                )?;
            }
            summary["ascent"] = json!({
                "iterations": trace.records.len(),
                "best_objective": trace.best_objective,
                "stopped": trace.stopped,
                "gradient_blowups": trace.records.iter().filter(|r| r.gradient_blowup).count(),
            });
        }
    }
    ctx.write_json("restricted.json", &summary)?;
    Ok(summary)
}

fn read_density(path: &Path) -> Result<Density, Failure> {
    let file = File::open(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    Ok(Density::from_csv(BufReader::new(file))?)
}

fn cmd_classical(ctx: &Ctx, a: &ClassicalArgs) -> CmdResult {
    let pair = MarginalPair::new(
        read_density(&a.mu)?,
        read_density(&a.nu)?,
        a.mass,
        a.flight_time,
        a.target,
    )?;
    let cfg = SweepConfig {
        dx: a.dx,
        lo: a.lo,
        hi: a.hi,
    };
    let r = classical_max(&pair, &cfg)?;
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
    let mut summary = json!({
        "schema": SCHEMA,
        "p_star": r.p_star,
        "dx": r.dx,
        "range": r.range,
        "target": a.target,
        "warnings": r.warnings,
    });
    if let Some(n) = a.oracle {
        if n == 0 {
            return Err(Failure::Input("oracle needs at least one sample".into()));
        }
        let g = greedy_matching_oracle(
            &pair.mu.quantile_samples(n),
            &pair.nu_tilde().quantile_samples(n),
            a.target,
        )?;
        summary["oracle"] = json!({"samples": n, "value": g, "difference": r.p_star - g});
    }
    ctx.write_json("classical.json", &summary)?;
    Ok(summary)
}

fn cmd_rocket(ctx: &Ctx, a: &RocketArgs) -> CmdResult {
    let text = fs::read_to_string(&a.schedule).map_err(|e| Failure::Input(format!("{}: {e}", a.schedule.display())))?;
    let schedule: RocketSchedule = serde_json::from_str(&text)?;
    let r = rocket_reduce(&schedule)?;
    let summary = json!({ "schema": SCHEMA, "schedule": schedule, "reduction": r });
    ctx.write_json("rocket.json", &summary)?;
    Ok(summary)
}

fn cmd_wigner(ctx: &Ctx, a: &WignerArgs) -> CmdResult {
    if a.points < 2 {
        return Err(Failure::Input("grid needs at least two points per axis".into()));
    }
    let (rho, label) = match a.fock {
        Some(k) if k > a.n_max => return Err(Failure::Input(format!("level {k} exceeds N = {}", a.n_max))),
        Some(k) => {
            let mut v = DVector::zeros(a.n_max + 1);
            v[k] = Complex64::new(1.0, 0.0);
            (DensityMatrix::pure(&v)?, format!("fock {k}"))
        }
        None => (spectral_seed(a.n_max, ctx.precision)?.0, "spectral seed".to_string()),
    };
    let grid = match a.extent {
        Some(l) if !(l > 0.0 && l.is_finite()) => return Err(Failure::Input("extent must be positive".into())),
        Some(l) => {
            let axis = UniformGrid::spanning(-l, l, a.points)?;
            WignerGrid { x: axis, p: axis }
        }
        None => {
            let d = WignerGrid::default_for(a.n_max);
            let axis = UniformGrid::spanning(d.x.start, d.x.end(), a.points)?;
            WignerGrid { x: axis, p: axis }
        }
    };
    let field = wigner_state(&rho, &grid);
    field.write_csv(ctx.create("wigner.csv")?)?;
    let min = field.values.iter().cloned().fold(f64::INFINITY, f64::min);
    let summary = json!({
        "schema": SCHEMA,
        "state": label,
        "n_max": a.n_max,
        "grid": {"lo": grid.x.start, "hi": grid.x.end(), "points": a.points},
        "integral": field.integral(),
        "min_value": min,
    });
    ctx.write_json("wigner.json", &summary)?;
    Ok(summary)
}

fn run(cli: Cli) -> CmdResult {
    fs::create_dir_all(&cli.out_dir)?;
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| Failure::Input(e.to_string()))?;
    }
    let ctx = Ctx {
        out_dir: cli.out_dir,
        precision: cli.precision,
    };
    match &cli.command {
        Command::PhiCurve(a) => cmd_phi_curve(&ctx, a),
        Command::Cbm(a) => cmd_cbm(&ctx, a),
        Command::Restricted(a) => cmd_restricted(&ctx, a),
        Command::Classical(a) => cmd_classical(&ctx, a),
        Command::Rocket(a) => cmd_rocket(&ctx, a),
        Command::Wigner(a) => cmd_wigner(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(v) => {
            println!("{}", serde_json::to_string_pretty(&v).expect("JSON values serialize"));
            ExitCode::SUCCESS
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
