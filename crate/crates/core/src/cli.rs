//! Config-driven command line: `hopflab <command> --config path.json --out dir [--jobs N]`.
//!
//! Every command writes `<out>/<command>.csv` (first line `# config_sha256=…`)
//! and `<out>/<command>.json` (a `metadata` block with the hash and a
//! timestamp, then the summary). CSV bodies depend only on the config.
//!
//! Exit codes: 0 success, 1 usage or unreadable/malformed config, 2 invalid
//! descriptor (the message names the violated invariant), 3 numerical failure
//! (reports of completed rows are still written).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::drift::{check_sufficiency, DriftDescriptor, DEFAULT_GAMMA};
use crate::error::HopfError;
use crate::experiments::{
    default_elliptic_mesh, default_parabolic_mesh, hopf_constant_scan, parabolic_hopf_scan, t1_inverse_check,
    t1_norm_scan, CoefficientFamily,
};
use crate::geometry::{DomainModel, ProblemKind};
use crate::modulus::ModulusDescriptor;
use crate::solver::{
    normal_derivative_origin, solve_annulus, solve_cylinder, AnnulusProblem, CoefficientField, CylinderProblem,
    MeshSize, TimeScheme,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Modulus,
    Conditions,
    Solve,
    HopfScan,
    ParabolicScan,
    T1Norm,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Modulus => "modulus",
            Self::Conditions => "conditions",
            Self::Solve => "solve",
            Self::HopfScan => "hopf-scan",
            Self::ParabolicScan => "parabolic-scan",
            Self::T1Norm => "t1-norm",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "hopflab", version, about = "Boundary point estimates for divergence-form operators")]
pub struct Cli {
    pub command: Command,
    /// JSON experiment config.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads for scan rows.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: u16,
}

/// Experiment description. Fields a command does not use are ignored after
/// validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Optional; must match the command line when present.
    #[serde(default)]
    pub command: Option<Command>,
    #[serde(default)]
    pub label: Option<String>,
    /// Spatial dimension.
    #[serde(default = "default_n")]
    pub n: usize,
    /// `elliptic` (annulus) or `parabolic` (cylinder) for `solve`.
    #[serde(default = "default_kind")]
    pub kind: ProblemKind,
    #[serde(default)]
    pub domain: Option<DomainModel>,
    #[serde(default)]
    pub modulus: Option<ModulusDescriptor>,
    #[serde(default)]
    pub drift: Option<DriftDescriptor>,
    #[serde(default)]
    pub coefficients: Option<CoefficientField>,
    #[serde(default)]
    pub rho: Vec<f64>,
    #[serde(default)]
    pub r: Vec<f64>,
    #[serde(default)]
    pub mesh: Option<MeshSize>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub scheme: TimeScheme,
}

fn default_n() -> usize {
    2
}

fn default_kind() -> ProblemKind {
    ProblemKind::Elliptic
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Validation(HopfError),
    #[error("{0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) | Self::Io(_) => 1,
            Self::Validation(_) => 2,
            Self::Numerical(_) => 3,
        }
    }
}

impl From<HopfError> for CliError {
    fn from(e: HopfError) -> Self {
        if e.is_validation() {
            Self::Validation(e)
        } else {
            Self::Numerical(e.to_string())
        }
    }
}

fn dyadic(k0: i32, k1: i32) -> Vec<f64> {
    (k0..=k1).map(|k| 2f64.powi(-k)).collect()
}

fn require<T: Clone>(v: &Option<T>, what: &str, cmd: Command) -> Result<T, CliError> {
    v.clone().ok_or_else(|| {
        CliError::Validation(HopfError::InvariantViolation(format!(
            "command {} needs a `{what}` descriptor",
            cmd.name()
        )))
    })
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Usage(format!("malformed config: {e}")))
    }

    fn coefficients_or_identity(&self) -> CoefficientField {
        self.coefficients.clone().unwrap_or_else(CoefficientField::identity)
    }

    fn family(&self) -> CoefficientFamily {
        let c = self.coefficients_or_identity();
        let label = self
            .label
            .clone()
            .unwrap_or_else(|| format!("{:?} + {}", c.a, c.b.label()));
        CoefficientFamily::new(label, c)
    }

    fn domain_or_default(&self) -> DomainModel {
        self.domain
            .clone()
            .unwrap_or_else(|| DomainModel::elliptic(self.n, 1.0))
    }

    /// Fail-fast validation of every descriptor the command touches.
    pub fn validate(&self, cmd: Command) -> Result<(), CliError> {
        if let Some(c) = self.command {
            if c != cmd {
                return Err(CliError::Usage(format!(
                    "config is for command {} but {} was requested",
                    c.name(),
                    cmd.name()
                )));
            }
        }
        if let Some(m) = &self.modulus {
            m.validate()?;
        }
        if let Some(d) = &self.domain {
            d.validate()?;
        }
        if let Some(g) = self.gamma {
            if !(g.is_finite() && g > 0.0) {
                return Err(HopfError::InvariantViolation(format!("gamma must be positive, got {g}")).into());
            }
        }
        for &r in self.rho.iter().chain(&self.r) {
            if !(r.is_finite() && r > 0.0 && r <= 1.0) {
                return Err(HopfError::Domain(format!("grid value {r} outside (0, 1]")).into());
            }
        }
        match cmd {
            Command::Modulus => {
                let m = require(&self.modulus, "modulus", cmd)?;
                // the report tabulates the Dini integral
                m.dini_integral(1.0).map(|_| ())?;
            }
            Command::Conditions => {
                let m = require(&self.modulus, "modulus", cmd)?;
                let b = require(&self.drift, "drift", cmd)?;
                let d = self.domain_or_default();
                d.validate()?;
                b.validate(d.n)?;
                m.dini_integral(1.0).map(|_| ())?;
            }
            Command::Solve => {
                if self.rho.len() != 1 {
                    return Err(HopfError::InvariantViolation(format!(
                        "solve needs exactly one rho, got {}",
                        self.rho.len()
                    ))
                    .into());
                }
                self.coefficients_or_identity().validate(self.n)?;
            }
            Command::HopfScan | Command::ParabolicScan | Command::T1Norm => {
                let n = if cmd == Command::T1Norm { 2 } else { self.n };
                if cmd == Command::T1Norm && self.n != 2 {
                    return Err(HopfError::InvariantViolation("t1-norm is implemented for n = 2 only".into()).into());
                }
                self.coefficients_or_identity().validate(n)?;
            }
        }
        Ok(())
    }
}

/// SHA-256 of the raw config bytes, hex encoded.
pub fn config_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct Outputs {
    dir: PathBuf,
    hash: String,
    command: Command,
}

impl Outputs {
    fn csv(&self, body: &str) -> Result<(), CliError> {
        let text = format!("# config_sha256={}\n{body}", self.hash);
        std::fs::write(self.dir.join(format!("{}.csv", self.command.name())), text)?;
        Ok(())
    }

    fn json(&self, summary: serde_json::Value) -> Result<(), CliError> {
        let ts = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let doc = json!({
            "metadata": {
                "command": self.command.name(),
                "config_sha256": self.hash,
                "timestamp_unix": ts,
                "version": env!("CARGO_PKG_VERSION"),
            },
            "summary": summary,
        });
        let text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Numerical(e.to_string()))?;
        std::fs::write(self.dir.join(format!("{}.json", self.command.name())), text + "\n")?;
        Ok(())
    }
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).unwrap_or(serde_json::Value::Null)
}

fn run_modulus(cfg: &ExperimentConfig, out: &Outputs) -> Result<(), CliError> {
    let m = require(&cfg.modulus, "modulus", Command::Modulus)?;
    let grid = if cfg.r.is_empty() { dyadic(0, 10) } else { cfg.r.clone() };
    let mut body = String::from("r,sigma,sigma_hat,dini_integral\n");
    let mut sandwich = true;
    for &r in &grid {
        let s = m.value(r);
        let hat = m.smooth_hat(r)?;
        let j = m.dini_integral(r)?;
        sandwich &= s <= hat && hat <= 2.0 * m.value(0.5 * r);
        let _ = writeln!(body, "{r},{s},{hat},{j}");
    }
    out.csv(&body)?;
    out.json(json!({
        "modulus": m.label(),
        "is_dini": m.is_dini(),
        "decay_threshold": m.decay_threshold(),
        "sandwich_holds": sandwich,
    }))
}

fn run_conditions(cfg: &ExperimentConfig, out: &Outputs) -> Result<(), CliError> {
    let m = require(&cfg.modulus, "modulus", Command::Conditions)?;
    let b = require(&cfg.drift, "drift", Command::Conditions)?;
    let domain = cfg.domain_or_default();
    let grid = if cfg.r.is_empty() { dyadic(2, 8) } else { cfg.r.clone() };
    let rep = check_sufficiency(&b, &m, &domain, &grid, cfg.gamma.unwrap_or(DEFAULT_GAMMA))?;
    let mut body = String::from("r,omega,bound_rhs,ratio\n");
    for row in &rep.rows {
        let _ = writeln!(body, "{},{},{},{}", row.r, row.omega, row.bound_rhs, row.ratio);
    }
    out.csv(&body)?;
    out.json(json!({
        "drift": b.label(),
        "modulus": m.label(),
        "functional": rep.functional,
        "rhs": rep.rhs,
        "c_fit": rep.c_fit,
        "median_ratio": rep.median_ratio,
        "within_factor_3_of_median": rep.verdict,
    }))
}

fn run_solve(cfg: &ExperimentConfig, out: &Outputs) -> Result<(), CliError> {
    let rho = cfg.rho[0];
    let coefficients = cfg.coefficients_or_identity();
    match cfg.kind {
        ProblemKind::Elliptic => {
            let mesh = cfg.mesh.unwrap_or_else(default_elliptic_mesh);
            let p = AnnulusProblem::new(rho, cfg.n, coefficients, mesh.n_r, mesh.n_theta);
            let f = solve_annulus(&p)?;
            out.csv(&f.to_csv())?;
            let (lo, hi) = f.min_max();
            out.json(json!({
                "kind": "elliptic",
                "rho": rho,
                "mesh": to_value(&mesh),
                "dn_origin": normal_derivative_origin(&f)?,
                "residual": f.residual,
                "min": lo,
                "max": hi,
            }))
        }
        ProblemKind::Parabolic => {
            let mesh = cfg.mesh.unwrap_or_else(|| default_parabolic_mesh(cfg.n));
            let p = CylinderProblem::new(rho, cfg.n, coefficients, mesh.n_r, mesh.n_theta, mesh.n_t.unwrap_or(0))
                .with_scheme(cfg.scheme);
            let f = solve_cylinder(&p)?;
            out.csv(&f.to_csv())?;
            let (lo, hi) = f.min_max();
            out.json(json!({
                "kind": "parabolic",
                "rho": rho,
                "mesh": to_value(&mesh),
                "scheme": to_value(&cfg.scheme),
                "dn_origin_final": normal_derivative_origin(&f.final_slice())?,
                "residual": f.residual,
                "min": lo,
                "max": hi,
            }))
        }
    }
}

fn scan_grid(cfg: &ExperimentConfig) -> Vec<f64> {
    if cfg.rho.is_empty() {
        vec![0.5, 0.25, 0.125]
    } else {
        cfg.rho.clone()
    }
}

fn run_scan(cfg: &ExperimentConfig, out: &Outputs, jobs: usize) -> Result<(), CliError> {
    let family = cfg.family();
    let grid = scan_grid(cfg);
    let rep = if out.command == Command::HopfScan {
        let mesh = cfg.mesh.unwrap_or_else(default_elliptic_mesh);
        hopf_constant_scan(&family, cfg.n, &grid, mesh, jobs)?
    } else {
        let mesh = cfg.mesh.unwrap_or_else(|| default_parabolic_mesh(cfg.n));
        parabolic_hopf_scan(&family, cfg.n, &grid, mesh, cfg.scheme, jobs)?
    };
    out.csv(&rep.to_csv())?;
    out.json(json!({
        "family": rep.family,
        "kind": to_value(&rep.kind),
        "n": rep.n,
        "mesh": to_value(&rep.mesh),
        "rows": to_value(&rep.rows),
        "fits": to_value(&rep.summary),
    }))?;
    if rep.has_failures() {
        return Err(CliError::Numerical(format!(
            "{} scan row(s) failed: rho = {:?}",
            rep.summary.failed_rho.len(),
            rep.summary.failed_rho
        )));
    }
    Ok(())
}

fn run_t1(cfg: &ExperimentConfig, out: &Outputs, jobs: usize) -> Result<(), CliError> {
    let coefficients = cfg.coefficients_or_identity();
    let grid = scan_grid(cfg);
    let mesh = cfg.mesh.unwrap_or(MeshSize {
        n_r: 32,
        n_theta: 48,
        n_t: None,
    });
    let rep = t1_norm_scan(&coefficients, &grid, mesh, jobs)?;
    out.csv(&rep.to_csv())?;
    let small = MeshSize {
        n_r: 16,
        n_theta: 24,
        n_t: None,
    };
    let mut checks = Vec::new();
    for &rho in &grid {
        let c = t1_inverse_check(rho, &coefficients, small)?;
        checks.push(json!({
            "rho": rho,
            "norm": c.norm,
            "inverse_norm": c.inverse_norm,
            "neumann_bound_holds": c.neumann_bound_holds(),
        }));
    }
    out.json(json!({
        "drift": rep.drift,
        "mesh": to_value(&rep.mesh),
        "rows": to_value(&rep.rows),
        "norm_over_omega_spread": rep.ratio_spread,
        "inverse_checks": checks,
        "inverse_check_mesh": to_value(&small),
    }))?;
    if rep.has_failures() {
        return Err(CliError::Numerical(format!("t1-norm failed at rho = {:?}", rep.failed_rho)));
    }
    Ok(())
}

/// Runs one command; reports go to `out_dir`.
pub fn execute(cmd: Command, config_path: &Path, out_dir: &Path, jobs: usize) -> Result<(), CliError> {
    let bytes = std::fs::read(config_path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", config_path.display())))?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| CliError::Usage("config is not UTF-8".into()))?;
    let cfg = ExperimentConfig::parse(&text)?;
    cfg.validate(cmd)?;
    std::fs::create_dir_all(out_dir)?;
    let out = Outputs {
        dir: out_dir.to_path_buf(),
        hash: config_hash(&bytes),
        command: cmd,
    };
    match cmd {
        Command::Modulus => run_modulus(&cfg, &out),
        Command::Conditions => run_conditions(&cfg, &out),
        Command::Solve => run_solve(&cfg, &out),
        Command::HopfScan | Command::ParabolicScan => run_scan(&cfg, &out, jobs),
        Command::T1Norm => run_t1(&cfg, &out, jobs),
    }
}

/// Parses arguments, runs, prints errors to stderr and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command, &cli.config, &cli.out, cli.jobs as usize) {
        Ok(()) => 0,
        Err(e) => {
            let kind = match e.exit_code() {
                1 => "usage error",
                2 => "validation error",
                _ => "numerical failure",
            };
            eprintln!("hopflab: {kind}: {e}");
            e.exit_code()
        }
    }
}
