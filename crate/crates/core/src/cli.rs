//! Command-line experiments: configuration, dispatch and CSV output.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::char_roots::{solve_quartic, Quartic};
use crate::error::{LabError, Result};
use crate::model_params::ModelParams;
use crate::quadrature::{i_of_t, kernel_l2_norm, DataProfile, QuadOptions, RadialWindow, WindowPreset, MU6_LIMIT};
use crate::rate_lab::{
    blowup_probe, fit_rate, log_grid, log_linear_fit, pointwise_ratio_scan, profile_error_experiment, table1, trend_check, BoundTemplate,
    ErrorWindow, LogFlag, RateFit, ScanGrid, ScanReport,
};
use crate::spectral_solution::{longitudinal_values, Model, Target};
use crate::wave_kernels::{kernel_radial, DoubleKernelSpec, KernelId};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Flat experiment configuration; every field may come from a JSON file
/// and be overridden by a flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub b: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub delta: f64,
    pub dims: Vec<usize>,
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
    pub log_spaced: bool,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub panel_cap: usize,
    pub eps0: f64,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let q = QuadOptions::default();
        Self {
            b: 1.0,
            kappa: 1.0,
            gamma: 1.0,
            delta: 1.0,
            dims: vec![1, 2, 3],
            t_min: 1e2,
            t_max: 1e6,
            points: 12,
            log_spaced: true,
            rel_tol: q.rel_tol,
            abs_tol: q.abs_tol,
            panel_cap: q.panel_cap,
            eps0: 1.0,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.b, self.kappa, self.gamma, self.delta)
    }

    pub fn quad(&self) -> QuadOptions {
        QuadOptions { rel_tol: self.rel_tol, abs_tol: self.abs_tol, panel_cap: self.panel_cap }
    }

    pub fn validate(&self) -> Result<()> {
        self.params()?;
        if !(self.t_min >= 0.0 && self.t_max > self.t_min && self.t_max.is_finite()) {
            return Err(LabError::InvalidWindow { lo: self.t_min, hi: self.t_max, reason: "need 0 <= t_min < t_max".into() });
        }
        if self.log_spaced && self.t_min <= 0.0 {
            return Err(LabError::InvalidWindow { lo: self.t_min, hi: self.t_max, reason: "log-spaced grids need t_min > 0".into() });
        }
        if self.points < 2 {
            return Err(LabError::InvalidParameter { name: "points", reason: format!("need >= 2, got {}", self.points) });
        }
        if self.dims.is_empty() || self.dims.contains(&0) {
            return Err(LabError::InvalidParameter { name: "dims", reason: format!("need a non-empty list of positive dimensions, got {:?}", self.dims) });
        }
        if !(self.rel_tol > 0.0 && self.abs_tol >= 0.0 && self.panel_cap > 0) {
            return Err(LabError::InvalidParameter { name: "rel_tol", reason: "tolerances must be positive".into() });
        }
        if !(self.eps0 > 0.0 && self.eps0.is_finite()) {
            return Err(LabError::InvalidParameter { name: "eps0", reason: format!("must be > 0, got {}", self.eps0) });
        }
        Ok(())
    }

    pub fn time_grid(&self) -> Result<Vec<f64>> {
        if self.log_spaced {
            return log_grid(self.t_min, self.t_max, self.points);
        }
        let h = (self.t_max - self.t_min) / (self.points - 1) as f64;
        Ok((0..self.points).map(|i| if i == self.points - 1 { self.t_max } else { self.t_min + h * i as f64 }).collect())
    }

    /// Rate fits need at least 8 points.
    fn require_fit_points(&self) -> Result<()> {
        if self.points < crate::rate_lab::MIN_FIT_POINTS {
            return Err(LabError::InvalidParameter { name: "points", reason: format!("rate fits need >= {} points", crate::rate_lab::MIN_FIT_POINTS) });
        }
        Ok(())
    }
}

#[derive(Debug, Parser)]
#[command(name = "thermolab", version, about = "Frequency-space experiments for type II/III thermoelasticity")]
pub struct Cli {
    #[command(flatten)]
    pub shared: SharedArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct SharedArgs {
    /// JSON configuration file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// CSV output path (standard output when absent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub rel_tol: Option<f64>,
    #[arg(long, global = true)]
    pub abs_tol: Option<f64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub b: Option<f64>,
    #[arg(long, global = true)]
    pub kappa: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub gamma: Option<f64>,
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    /// Comma-separated dimensions.
    #[arg(long, global = true, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    #[arg(long, global = true)]
    pub t_min: Option<f64>,
    #[arg(long, global = true)]
    pub t_max: Option<f64>,
    #[arg(long, global = true)]
    pub points: Option<usize>,
    /// Uniform instead of log-spaced time grid.
    #[arg(long, global = true)]
    pub linear: bool,
    #[arg(long, global = true)]
    pub eps0: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Ii,
    Iii,
}

impl From<ModelArg> for Model {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Ii => Model::TypeII,
            ModelArg::Iii => Model::TypeIII,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TargetArg {
    U,
    Theta,
}

impl From<TargetArg> for Target {
    fn from(t: TargetArg) -> Self {
        match t {
            TargetArg::U => Target::U,
            TargetArg::Theta => Target::Theta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TemplateArg {
    Small,
    Large,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WindowArg {
    Small,
    Preset,
}

/// Double-kernel parameters; unset values follow the displacement kernel
/// of the configured model.
#[derive(Debug, Args)]
pub struct SpecArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub l1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub l2: Option<f64>,
    #[arg(long)]
    pub beta1: Option<f64>,
    #[arg(long)]
    pub beta2: Option<f64>,
    #[arg(long)]
    pub c1: Option<f64>,
    #[arg(long)]
    pub c2: Option<f64>,
    #[arg(long)]
    pub sigma: Option<u32>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Characteristic roots at the given radii, or a seeded random sweep.
    Roots {
        #[arg(long, value_delimiter = ',', required_unless_present = "random")]
        r: Vec<f64>,
        /// Number of random (parameters, r) samples instead of fixed radii.
        #[arg(long)]
        random: Option<usize>,
    },
    /// Per-frequency solution over the time grid.
    Simulate {
        #[arg(long, value_delimiter = ',', required = true)]
        r: Vec<f64>,
        #[arg(long, value_enum, default_value = "iii")]
        model: ModelArg,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        u0: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        u1: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        th0: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        th1: f64,
    },
    /// Radial kernel values over the time grid.
    Kernel {
        #[arg(long, required = true)]
        kernel: String,
        #[arg(long, value_delimiter = ',', required = true)]
        r: Vec<f64>,
    },
    /// Kernel L2 norms over `[0, eps0]`.
    KernelNorm {
        #[arg(long, required = true)]
        kernel: String,
    },
    /// Radial double-kernel integral over `[0, eps0]` with power fits.
    IOfT {
        #[command(flatten)]
        spec: SpecArgs,
    },
    /// Fits a rate to a two-column CSV `t,value`.
    RateFit {
        #[arg(long, required = true)]
        input: PathBuf,
        #[arg(long, default_value = "power_sqrt_log")]
        model: String,
        /// Expected exponent; checked to within 0.05.
        #[arg(long, allow_hyphen_values = true)]
        expect: Option<f64>,
    },
    /// Partial integrals over `[eps1, eps0]` for unequal amplitudes.
    BlowupProbe {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 1e-8)]
        eps1_min: f64,
        #[arg(long, default_value_t = 1e-4)]
        eps1_max: f64,
        #[arg(long, default_value_t = 9)]
        eps1_points: usize,
    },
    /// Sup of solution over pointwise bound templates on a (t, r) grid.
    PointwiseScan {
        #[arg(long, value_enum, default_value = "u")]
        target: TargetArg,
        #[arg(long, value_enum, default_value = "small")]
        template: TemplateArg,
        #[arg(long, default_value_t = 1e-3)]
        r_min: f64,
        #[arg(long, default_value_t = 0.1)]
        r_max: f64,
        #[arg(long, default_value_t = 25)]
        r_points: usize,
        /// JSON baseline of fitted constants: compared within 10% when present, written otherwise.
        #[arg(long)]
        baseline: Option<PathBuf>,
    },
    /// Profile-error ratios against the reference rates.
    ProfileError {
        #[arg(long, value_enum, default_value = "iii")]
        model: ModelArg,
        #[arg(long, value_enum, default_value = "u")]
        target: TargetArg,
        #[arg(long, value_enum, default_value = "small")]
        window: WindowArg,
        /// Window constant of the shrinking windows (default: limit / nu1).
        #[arg(long)]
        mu6: Option<f64>,
        #[arg(long, default_value_t = 2.0)]
        rho1: f64,
        /// Ratios must decrease at grid times beyond this value.
        #[arg(long, default_value_t = 1e3)]
        t_star: f64,
    },
    /// Large-time table of kernel-norm rates.
    Table1 {
        #[arg(long, default_value_t = 6)]
        max_n: usize,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Roots { .. } => "roots",
            Command::Simulate { .. } => "simulate",
            Command::Kernel { .. } => "kernel",
            Command::KernelNorm { .. } => "kernel-norm",
            Command::IOfT { .. } => "i-of-t",
            Command::RateFit { .. } => "rate-fit",
            Command::BlowupProbe { .. } => "blowup-probe",
            Command::PointwiseScan { .. } => "pointwise-scan",
            Command::ProfileError { .. } => "profile-error",
            Command::Table1 { .. } => "table1",
        }
    }
}

/// Configuration from the file (if any) with flag overrides applied.
pub fn resolve_config(shared: &SharedArgs) -> std::result::Result<ExperimentConfig, String> {
    let mut cfg = match &shared.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("--config {}: {e}", path.display()))?;
            serde_json::from_str(&text).map_err(|e| format!("--config {}: {e}", path.display()))?
        }
        None => ExperimentConfig::default(),
    };
    macro_rules! apply {
        ($($field:ident),*) => { $(if let Some(v) = shared.$field.clone() { cfg.$field = v; })* };
    }
    apply!(rel_tol, abs_tol, b, kappa, gamma, delta, dims, t_min, t_max, points, eps0, seed);
    if shared.linear {
        cfg.log_spaced = false;
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

/// CSV table with the metadata line.
struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&'static str]) -> Self {
        Self { header: header.to_vec(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn render(&self, command: &str, cfg: &ExperimentConfig, extra: &serde_json::Value) -> Result<Vec<u8>> {
        let meta = serde_json::json!({ "command": command, "config": cfg, "options": extra });
        let mut out = format!("# {meta}\n").into_bytes();
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| LabError::Unsupported(format!("csv: {e}"));
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        out.extend(w.into_inner().map_err(|e| LabError::Unsupported(format!("csv: {e}")))?);
        Ok(out)
    }
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

/// Result of one command: table, extra metadata, summary lines and verdict.
struct Report {
    table: Table,
    options: serde_json::Value,
    summary: Vec<String>,
    pass: bool,
}

fn check_line(label: &str, ok: bool, detail: String) -> String {
    format!("{} {label}: {detail}", if ok { "PASS" } else { "FAIL" })
}

fn spec_from(args: &SpecArgs, cfg: &ExperimentConfig) -> Result<DoubleKernelSpec> {
    let dp = cfg.params()?.derive()?;
    let s = DoubleKernelSpec {
        l1: args.l1.unwrap_or(1.0),
        l2: args.l2.unwrap_or(1.0),
        beta1: args.beta1.unwrap_or(dp.nu1),
        beta2: args.beta2.unwrap_or(dp.nu2),
        c1: args.c1.unwrap_or(dp.c1),
        c2: args.c2.unwrap_or(dp.c2),
        sigma: args.sigma.unwrap_or(1),
    };
    s.validate()?;
    Ok(s)
}

fn fit_columns(fit: &RateFit) -> Vec<String> {
    vec![num(fit.exponent), fit.log_flag.label().to_string(), num(fit.r_squared)]
}

fn roots_report(cfg: &ExperimentConfig, r: &[f64], random: Option<usize>) -> Result<Report> {
    let mut table = Table::new(&[
        "b", "kappa", "gamma", "delta", "r", "zone", "re1", "im1", "re2", "im2", "re3", "im3", "re4", "im4", "vieta_sum", "vieta_product", "max_residual",
    ]);
    let mut cases = Vec::new();
    match random {
        Some(count) => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            for _ in 0..count {
                let p = ModelParams {
                    b: rng.gen_range(0.2..3.0),
                    kappa: rng.gen_range(0.2..3.0),
                    gamma: rng.gen_range(-2.0..2.0),
                    delta: if rng.gen_bool(0.1) { 0.0 } else { rng.gen_range(0.05..3.0) },
                };
                cases.push((p, 10f64.powf(rng.gen_range(-6.0..4.0))));
            }
        }
        None => {
            let p = cfg.params()?;
            cases.extend(r.iter().map(|&r| (p, r)));
        }
    }
    let mut worst: f64 = 0.0;
    for (p, r) in cases {
        let dp = p.derive()?;
        let set = solve_quartic(&p, &dp, r)?;
        let q = Quartic::at(&p, r);
        let scale = set.max_modulus().max(1e-300);
        let sum_res = (set.sum().re + q.c3).abs() / q.c3.abs().max(scale);
        let prod_res = (set.product() - Complex64::new(q.c0, 0.0)).norm() / q.c0.abs().max(scale.powi(4));
        let res = set.roots.iter().map(|z| q.eval(*z).norm() / q.residual_scale(*z)).fold(0.0, f64::max);
        worst = worst.max(sum_res).max(prod_res).max(res);
        let mut row = vec![num(p.b), num(p.kappa), num(p.gamma), num(p.delta), num(r), set.zone.label().to_string()];
        for z in set.roots {
            row.push(num(z.re));
            row.push(num(z.im));
        }
        row.extend([num(sum_res), num(prod_res), num(res)]);
        table.push(row);
    }
    let ok = worst <= 1e-9;
    Ok(Report {
        table,
        options: serde_json::json!({ "r": r, "random": random }),
        summary: vec![check_line("roots", ok, format!("largest relative residual {worst:.3e} (limit 1e-9)"))],
        pass: ok,
    })
}

fn run_command(command: &Command, cfg: &ExperimentConfig) -> Result<Report> {
    let opts = cfg.quad();
    let p = cfg.params()?;
    let dp = p.derive()?;
    match command {
        Command::Roots { r, random } => roots_report(cfg, r, *random),
        Command::Simulate { r, model, u0, u1, th0, th1 } => {
            let model = Model::from(*model);
            let ts = cfg.time_grid()?;
            let mut table = Table::new(&["t", "r", "re_u", "im_u", "re_th", "im_th", "model"]);
            let amp = [*u0, *u1, *th0, *th1].map(|x| Complex64::new(x, 0.0));
            for &rr in r {
                for &t in &ts {
                    let (u, th) = longitudinal_values(&p, &dp, model, rr, t, amp)?;
                    table.push(vec![num(t), num(rr), num(u.re), num(u.im), num(th.re), num(th.im), model.label().to_string()]);
                }
            }
            Ok(Report {
                table,
                options: serde_json::json!({ "r": r, "model": model.label(), "data": [u0, u1, th0, th1] }),
                summary: vec![format!("simulate: {} rows", r.len() * ts.len())],
                pass: true,
            })
        }
        Command::Kernel { kernel, r } => {
            let id = KernelId::parse(kernel)?;
            let ts = cfg.time_grid()?;
            let mut table = Table::new(&["t", "r", "value", "kernel_id"]);
            for &rr in r {
                if !(rr >= 0.0 && rr.is_finite()) {
                    return Err(LabError::InvalidParameter { name: "r", reason: format!("need finite r >= 0, got {rr}") });
                }
                for &t in &ts {
                    table.push(vec![num(t), num(rr), num(kernel_radial(&id, &dp, p.gamma, t, rr)), id.label().to_string()]);
                }
            }
            Ok(Report { table, options: serde_json::json!({ "kernel": id.label(), "r": r }), summary: vec![format!("kernel {}", id.label())], pass: true })
        }
        Command::KernelNorm { kernel } => {
            let id = KernelId::parse(kernel)?;
            let ts = cfg.time_grid()?;
            let window = RadialWindow::small(cfg.eps0)?;
            let mut table = Table::new(&["t", "n", "sigma", "value", "est_error", "panels", "kernel_id"]);
            let sigma = id.double_form(&dp, p.gamma).map_or(0, |(_, s)| s.sigma);
            for &n in &cfg.dims {
                for &t in &ts {
                    let q = kernel_l2_norm(&id, &dp, p.gamma, n, t, &window, &opts)?;
                    table.push(vec![num(t), n.to_string(), sigma.to_string(), num(q.value), num(q.est_error), q.panels.to_string(), id.label().to_string()]);
                }
            }
            Ok(Report { table, options: serde_json::json!({ "kernel": id.label() }), summary: vec![format!("kernel-norm {}", id.label())], pass: true })
        }
        Command::IOfT { spec } => {
            let s = spec_from(spec, cfg)?;
            let ts = cfg.time_grid()?;
            let mut table = Table::new(&["t", "n", "sigma", "value", "est_error", "panels"]);
            let mut summary = Vec::new();
            for &n in &cfg.dims {
                let mut series = Vec::new();
                for &t in &ts {
                    let q = i_of_t(&s, n, t, cfg.eps0, &opts)?;
                    table.push(vec![num(t), n.to_string(), s.sigma.to_string(), num(q.value), num(q.est_error), q.panels.to_string()]);
                    series.push((t, q.value));
                }
                if let Ok(f) = fit_rate(&series, "power_sqrt_log") {
                    let ll = log_linear_fit(&series).map(|l| l.r_squared).unwrap_or(f64::NAN);
                    summary.push(format!("n = {n}: exponent {:.4}, flag {}, log-linear r^2 {ll:.6}", f.exponent, f.log_flag.label()));
                }
            }
            Ok(Report { table, options: serde_json::json!({ "spec": s }), summary, pass: true })
        }
        Command::RateFit { input, model, expect } => {
            let series = read_series(input)?;
            let fit = fit_rate(&series, model)?;
            let mut table = Table::new(&["model", "exponent", "log_flag", "r_squared", "t_min", "t_max"]);
            let mut row = vec![model.clone()];
            row.extend(fit_columns(&fit));
            row.extend([num(fit.window[0]), num(fit.window[1])]);
            table.push(row);
            let (pass, summary) = match expect {
                Some(e) => {
                    let ok = (fit.exponent - e).abs() <= crate::rate_lab::EXPONENT_TOL;
                    (ok, vec![check_line("exponent", ok, format!("{:.4} vs expected {e}", fit.exponent))])
                }
                None => (true, vec![format!("exponent {:.4}, flag {}, r^2 {:.6}", fit.exponent, fit.log_flag.label(), fit.r_squared)]),
            };
            Ok(Report { table, options: serde_json::json!({ "input": input, "model": model, "expect": expect }), summary, pass })
        }
        Command::BlowupProbe { spec, n, t, eps1_min, eps1_max, eps1_points } => {
            let mut s = spec_from(spec, cfg)?;
            if spec.l2.is_none() {
                s.l2 = 2.0;
            }
            let eps = log_grid(*eps1_min, *eps1_max, *eps1_points)?;
            let rep = blowup_probe(&s, *n, *t, &eps, cfg.eps0, &opts)?;
            let mut table = Table::new(&["n", "eps1", "value"]);
            for (e, v) in &rep.points {
                table.push(vec![n.to_string(), num(*e), num(*v)]);
            }
            let (ok, detail) = if *n == 1 {
                let ok = (rep.fit.exponent + 1.0).abs() <= crate::rate_lab::EXPONENT_TOL;
                (ok, format!("slope {:.4} in eps1 (expected -1 +- 0.05)", rep.fit.exponent))
            } else {
                let ok = rep.fit.r_squared > 0.99 && rep.fit.log_flag == LogFlag::Log;
                (ok, format!("linear in ln(1/eps1): slope {:.4}, r^2 {:.6}", rep.fit.exponent, rep.fit.r_squared))
            };
            Ok(Report { table, options: serde_json::json!({ "spec": s, "n": n, "t": t }), summary: vec![check_line("blowup", ok, detail)], pass: ok })
        }
        Command::PointwiseScan { target, template, r_min, r_max, r_points, baseline } => {
            let grid = ScanGrid { t_min: cfg.t_min, t_max: cfg.t_max, t_points: cfg.points, r_min: *r_min, r_max: *r_max, r_points: *r_points };
            let data = DataProfile::from_amplitudes("theta1-one", |_| {
                let z = Complex64::new(0.0, 0.0);
                [z, z, z, Complex64::new(1.0, 0.0)]
            });
            let template = match template {
                TemplateArg::Small => BoundTemplate::SmallZone,
                TemplateArg::Large => BoundTemplate::LargeZone,
            };
            let rep = pointwise_ratio_scan(&p, &dp, &data, Target::from(*target), template, &grid)?;
            let mut table = Table::new(&["c", "c_tilde", "sup", "selected"]);
            for c in &rep.candidates {
                table.push(vec![num(c.c), num(c.c_tilde), num(c.sup), (*c == rep.selected).to_string()]);
            }
            let change = rep.refinement_change();
            let mut ok = rep.selected.sup.is_finite() && change < 0.1 && rep.rhs_zeros == 0;
            let mut summary = vec![check_line(
                "scan",
                ok,
                format!("sup {:.4e}, refined {:.4e} (change {:.3}), template zeros {}", rep.selected.sup, rep.refined_sup, change, rep.rhs_zeros),
            )];
            if let Some(path) = baseline {
                let (b_ok, line) = compare_baseline(path, &rep)?;
                ok &= b_ok;
                summary.push(line);
            }
            Ok(Report { table, options: serde_json::json!({ "grid": grid, "template": format!("{template:?}") }), summary, pass: ok })
        }
        Command::ProfileError { model, target, window, mu6, rho1, t_star } => {
            let model = Model::from(*model);
            let target = Target::from(*target);
            let p = if model == Model::TypeII { p.with_delta(0.0) } else { p };
            let dp = p.derive()?;
            let w = match window {
                WindowArg::Small => ErrorWindow::Small { eps0: cfg.eps0 },
                WindowArg::Preset => ErrorWindow::Preset {
                    kind: if target == Target::U { WindowPreset::ChiC1 } else { WindowPreset::ChiC2 },
                    mu6: mu6.unwrap_or(MU6_LIMIT / dp.nu1.max(dp.nu2)),
                    rho1: *rho1,
                },
            };
            let ts = cfg.time_grid()?;
            let data = DataProfile::gaussian_theta1(1.0);
            let mut table = Table::new(&["n", "t", "error", "rate", "ratio"]);
            let mut summary = Vec::new();
            let mut pass = true;
            for &n in &cfg.dims {
                let series = profile_error_experiment(&p, &dp, &data, model, target, n, &ts, w, &opts)?;
                for q in &series {
                    table.push(vec![n.to_string(), num(q.t), num(q.error), num(q.rate), num(q.ratio)]);
                }
                let tc = trend_check(&series, *t_star)?;
                pass &= tc.passes();
                summary.push(check_line(&format!("n = {n}"), tc.passes(), format!("drop {:.3e}, decreasing beyond {t_star}: {}", tc.drop, tc.eventually_decreasing)));
            }
            Ok(Report {
                table,
                options: serde_json::json!({ "model": model.label(), "target": format!("{target:?}"), "window": w, "t_star": t_star }),
                summary,
                pass,
            })
        }
        Command::Table1 { max_n } => {
            cfg.require_fit_points()?;
            let ts = cfg.time_grid()?;
            let cells = table1(&p, &dp, &ts, cfg.eps0, *max_n, &opts)?;
            let mut table = Table::new(&["row", "n", "predicted", "exponent", "log_flag", "r_squared", "pass"]);
            let mut summary = Vec::new();
            for c in &cells {
                let mut row = vec![c.row.clone(), c.n.to_string(), c.predicted.label()];
                row.extend(fit_columns(&c.fit));
                row.push(c.pass.to_string());
                table.push(row);
                if !c.pass {
                    summary.push(check_line(
                        &format!("{} n = {}", c.row, c.n),
                        false,
                        format!("predicted {}, fitted {:.4} {}", c.predicted.label(), c.fit.exponent, c.fit.log_flag.label()),
                    ));
                }
            }
            let matched = cells.iter().filter(|c| c.pass).count();
            summary.push(format!("table1: {matched}/{} cells match", cells.len()));
            Ok(Report { table, options: serde_json::json!({ "max_n": max_n }), summary, pass: matched == cells.len() })
        }
    }
}

fn read_series(path: &PathBuf) -> Result<Vec<(f64, f64)>> {
    let bad = |m: String| LabError::InvalidSeries(format!("{}: {m}", path.display()));
    let text = std::fs::read_to_string(path).map_err(|e| bad(e.to_string()))?;
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).has_headers(true).from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() < 2 {
            return Err(bad("need two columns t,value".into()));
        }
        let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| bad(format!("{s:?}: {e}")));
        out.push((parse(&rec[0])?, parse(&rec[1])?));
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
struct Baseline {
    c: f64,
    c_tilde: f64,
    sup: f64,
}

fn compare_baseline(path: &PathBuf, rep: &ScanReport) -> Result<(bool, String)> {
    let now = Baseline { c: rep.selected.c, c_tilde: rep.selected.c_tilde, sup: rep.selected.sup };
    let io = |e: String| LabError::Unsupported(format!("baseline {}: {e}", path.display()));
    if !path.exists() {
        let text = serde_json::to_string_pretty(&now).map_err(|e| io(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| io(e.to_string()))?;
        return Ok((true, format!("baseline written to {}", path.display())));
    }
    let text = std::fs::read_to_string(path).map_err(|e| io(e.to_string()))?;
    let old: Baseline = serde_json::from_str(&text).map_err(|e| io(e.to_string()))?;
    let rel = |a: f64, b: f64| if b == 0.0 { a.abs() } else { (a - b).abs() / b.abs() };
    let worst = rel(now.c, old.c).max(rel(now.c_tilde, old.c_tilde)).max(rel(now.sup, old.sup));
    let ok = worst <= 0.1;
    Ok((ok, check_line("baseline", ok, format!("largest relative change {worst:.3e} (limit 0.1)"))))
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match resolve_config(&cli.shared) {
        Ok(c) => c,
        Err(m) => {
            eprintln!("usage error: {m}");
            return EXIT_USAGE;
        }
    };
    if let Some(n) = cli.shared.threads {
        if n == 0 || rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            eprintln!("usage error: --threads {n}: cannot configure worker pool");
            return EXIT_USAGE;
        }
    }
    let name = cli.command.name();
    let report = match run_command(&cli.command, &cfg) {
        Ok(r) => r,
        Err(e) => {
            let code = match e {
                LabError::InvalidParameter { .. } | LabError::InvalidWindow { .. } | LabError::UnknownName { .. } => EXIT_USAGE,
                _ => EXIT_NUMERICAL,
            };
            eprintln!("{name}: {e}");
            return code;
        }
    };
    let bytes = match report.table.render(name, &cfg, &report.options) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("{name}: {e}");
            return EXIT_NUMERICAL;
        }
    };
    let written = match &cli.shared.out {
        Some(path) => std::fs::write(path, &bytes).map_err(|e| format!("--out {}: {e}", path.display())),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&bytes).map_err(|e| e.to_string())
        }
    };
    if let Err(m) = written {
        eprintln!("{name}: {m}");
        return EXIT_NUMERICAL;
    }
    for line in &report.summary {
        eprintln!("{line}");
    }
    if report.pass {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}
