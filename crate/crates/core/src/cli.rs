//! Command-line frontend.
//!
//! Exit codes: 0 success, 1 a verification failed, 2 invalid configuration,
//! 3 runtime failure (singular seed, integration breakdown).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::algebra::{anticommutator, chiral, ComplexMatrix3};
use crate::cases::{build, oracle_crosscheck, probe_solutions, CaseModel, CaseParams, CaseTag, SeedVariant};
use crate::darboux::{hermiticity_report, intertwining_residual, regularity_scan};
use crate::free_model::chiral_partner;
use crate::grid::Grid;
use crate::lattice::{band_scan, bloch_hamiltonian, TBParams};
use crate::scattering::case_scatter;
use crate::spectral::{case_spectrum, eigen_residual};
use crate::Error;

pub const SCHEMA: u32 = 1;

#[derive(Parser, Debug)]
#[command(name = "lieb-darboux", version, about = "Darboux-transformed pseudospin-1 Dirac models and Lieb-lattice bands")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Tight-binding band surface over [-pi/2a, pi/2a]^2.
    ///
    /// CSV columns: kx, ky, e0 (middle band), e_plus, e_minus.
    /// JSON: {schema, command, params, grid: {nk, kx, ky}, bands[3][nk][nk], flat_band}.
    Bands(Args),
    /// Sampled transformed potential of a case.
    ///
    /// CSV columns: x, V{ij}_re, V{ij}_im (i, j = 1..3), the named profiles of
    /// the case, psi{k}_{a,b,c}_{re,im} for the three missing states. The
    /// regularity and hermiticity report goes to <out>.report.json (stderr
    /// when writing to stdout). JSON carries the columns and report together.
    Case(Args),
    /// Hermiticity, intertwining, eigen-residual, regularity and chiral checks.
    ///
    /// CSV columns: check, value, threshold, pass. Exits 1 if any check fails.
    Verify(Args),
    /// Reflection and transmission at the given energies.
    ///
    /// CSV columns: energy, reflection, transmission, status.
    Scatter(Args),
    /// Bound-state energies against the expected factorization spectrum.
    ///
    /// CSV columns: expected, found, residual, pass. Exits 1 on mismatch.
    Spectrum(Args),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(clap::Args, Debug, Default, Clone)]
#[command(allow_negative_numbers = true)]
pub struct Args {
    /// TOML or JSON configuration file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output path (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// I, II, III or IV.
    #[arg(long = "case")]
    pub case: Option<String>,
    #[arg(long)]
    pub m: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub hv: Option<f64>,
    #[arg(long)]
    pub ell: Option<f64>,
    /// Case II with factorization energies (-m, 0, eps), 0 < eps < m.
    #[arg(long)]
    pub mirror: bool,
    /// Case I zero-energy seed: flat-band, non-flat or sinh.
    #[arg(long)]
    pub seed_variant: Option<String>,
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    pub domain: Option<Vec<f64>>,
    /// Spatial grid points.
    #[arg(long)]
    pub n: Option<usize>,
    /// k-points per axis.
    #[arg(long)]
    pub nk: Option<usize>,
    /// Energies in the bound-state scan.
    #[arg(long)]
    pub n_scan: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub energies: Option<Vec<f64>>,
    #[arg(long)]
    pub tau1: Option<f64>,
    #[arg(long)]
    pub tau2: Option<f64>,
    #[arg(long)]
    pub tau3: Option<f64>,
    #[arg(long)]
    pub tau4: Option<f64>,
    #[arg(long)]
    pub t3: Option<f64>,
    #[arg(long)]
    pub mu_a: Option<f64>,
    #[arg(long)]
    pub mu_b: Option<f64>,
    #[arg(long)]
    pub mu_c: Option<f64>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub lambda_phase: Option<f64>,
}

/// Contents of a `--config` file. Every field is optional.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
    pub case: Option<String>,
    pub m: Option<f64>,
    pub eps: Option<f64>,
    pub hv: Option<f64>,
    pub ell: Option<f64>,
    pub mirror: Option<bool>,
    pub seed_variant: Option<String>,
    pub domain: Option<[f64; 2]>,
    pub n: Option<usize>,
    pub nk: Option<usize>,
    pub n_scan: Option<usize>,
    pub energies: Option<Vec<f64>>,
    pub lattice: Option<TBParams>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
        } else {
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    Bands,
    Case,
    Verify,
    Scatter,
    Spectrum,
}

/// Fully resolved and validated run settings.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub case: CaseParams,
    pub lattice: TBParams,
    pub grid: Grid,
    pub nk: usize,
    pub n_scan: usize,
    pub energies: Vec<f64>,
    pub out: Option<PathBuf>,
    pub format: Format,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Verification(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "invalid configuration: {m}"),
            CliError::Verification(m) => write!(f, "verification failed: {m}"),
            CliError::Runtime(m) => write!(f, "{m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameters(_)
            | Error::EnergyOutOfRange { .. }
            | Error::DegenerateSeed
            | Error::InconsistentLabels { .. }
            | Error::RegimeViolation(_)
            | Error::Unsupported(_) => CliError::Config(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl RunConfig {
    pub fn resolve(command: CommandKind, args: &Args) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };

        let tag: CaseTag = args
            .case
            .as_deref()
            .or(file.case.as_deref())
            .unwrap_or("I")
            .parse()
            .map_err(CliError::from)?;
        let mut case = CaseParams::reference(tag);
        if let Some(m) = args.m.or(file.m) {
            case.m = m;
        }
        if let Some(hv) = args.hv.or(file.hv) {
            case.hv = hv;
        }
        if let Some(ell) = args.ell.or(file.ell) {
            case.ell = ell;
        }
        case.mirror = args.mirror || file.mirror.unwrap_or(false);
        match args.eps.or(file.eps) {
            Some(eps) => case.eps = eps,
            None if case.mirror => case.eps = -case.eps,
            None => {}
        }
        if let Some(v) = args.seed_variant.as_deref().or(file.seed_variant.as_deref()) {
            case.variant = v.parse::<SeedVariant>().map_err(CliError::from)?;
        }

        let mut lattice = file.lattice.unwrap_or_default();
        let overrides = [
            (args.tau1, &mut lattice.tau1),
            (args.tau2, &mut lattice.tau2),
            (args.tau3, &mut lattice.tau3),
            (args.tau4, &mut lattice.tau4),
            (args.t3, &mut lattice.t3),
            (args.mu_a, &mut lattice.mu_a),
            (args.mu_b, &mut lattice.mu_b),
            (args.mu_c, &mut lattice.mu_c),
            (args.a, &mut lattice.a),
            (args.lambda_phase, &mut lattice.lambda_phase),
        ];
        for (flag, field) in overrides {
            if let Some(v) = flag {
                *field = v;
            }
        }

        let domain = match (&args.domain, file.domain) {
            (Some(d), _) => (d[0], d[1]),
            (None, Some(d)) => (d[0], d[1]),
            (None, None) => (-10.0, 10.0),
        };
        let grid = Grid::new(domain.0, domain.1, args.n.or(file.n).unwrap_or(2001))?;
        let nk = args.nk.or(file.nk).unwrap_or(100);
        let n_scan = args.n_scan.or(file.n_scan).unwrap_or(400);
        let energies = args
            .energies
            .clone()
            .or(file.energies)
            .unwrap_or_else(|| [1.1, 1.5, 2.0, 3.0, 5.0].iter().map(|f| f * case.m.abs()).collect());

        let cfg = RunConfig {
            command,
            case,
            lattice,
            grid,
            nk,
            n_scan,
            energies,
            out: args.out.clone().or(file.out),
            format: args.format.or(file.format).unwrap_or_default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        match self.command {
            CommandKind::Bands => {
                self.lattice.validate()?;
                bloch_hamiltonian((0.0, 0.0), &self.lattice)?;
                if self.nk < 2 {
                    return Err(CliError::Config(format!("nk must be at least 2 (got {})", self.nk)));
                }
            }
            _ => {
                self.case.validate()?;
                if self.n_scan < 2 {
                    return Err(CliError::Config(format!(
                        "n-scan must be at least 2 (got {})",
                        self.n_scan
                    )));
                }
                if self.energies.iter().any(|e| !e.is_finite()) {
                    return Err(CliError::Config("energies must be finite".into()));
                }
            }
        }
        Ok(())
    }
}

/// Result of a command: the main document, an optional sidecar report and
/// the exit status.
pub struct Output {
    pub body: String,
    pub report: Option<String>,
    pub status: Result<(), CliError>,
}

fn fmt_f(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x:.16e}")
    }
}

fn to_json(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

fn matrix_json(m: &ComplexMatrix3) -> Value {
    Value::Array(
        (0..3)
            .map(|i| {
                Value::Array((0..3).map(|j| json!([m[(i, j)].re, m[(i, j)].im])).collect())
            })
            .collect(),
    )
}

pub fn cmd_bands(cfg: &RunConfig) -> Result<Output, CliError> {
    let p = &cfg.lattice;
    let s = band_scan(p, cfg.nk)?;
    let (lo, hi) = s.band_range(1);
    let flat = s.has_zero_flat_band(1e-12);
    eprintln!(
        "middle band range [{lo:e}, {hi:e}] over {0}x{0} k-points: {1}",
        cfg.nk,
        if flat { "flat band at E = 0" } else { "no flat band" }
    );
    let body = match cfg.format {
        Format::Csv => {
            let mut out = String::from("kx,ky,e0,e_plus,e_minus\n");
            for i in 0..s.nk {
                for j in 0..s.nk {
                    let (kx, ky) = s.k_point(i, j);
                    let e = s.at(i, j);
                    writeln!(out, "{},{},{},{},{}", fmt_f(kx), fmt_f(ky), fmt_f(e[1]), fmt_f(e[2]), fmt_f(e[0]))
                        .expect("write to String");
                }
            }
            out
        }
        Format::Json => {
            let band = |b: usize| -> Vec<Vec<f64>> {
                (0..s.nk).map(|i| (0..s.nk).map(|j| s.at(i, j)[b]).collect()).collect()
            };
            to_json(&json!({
                "schema": SCHEMA,
                "command": "bands",
                "params": p,
                "grid": {"nk": s.nk, "kx": s.kx, "ky": s.ky},
                "bands": [band(0), band(1), band(2)],
                "flat_band": {"min": lo, "max": hi, "tolerance": 1e-12, "flat": flat},
            }))
        }
    };
    Ok(Output {
        body,
        report: None,
        status: Ok(()),
    })
}

fn build_case(cfg: &RunConfig) -> Result<CaseModel, CliError> {
    let case = build(&cfg.case)?;
    let reg = regularity_scan(case.seed(), &cfg.grid);
    if !reg.pass {
        return Err(CliError::Runtime(format!(
            "seed matrix is singular near x = {} (|det| ratio {:e} below {:e})",
            reg.ratio_argmin, reg.min_ratio, reg.threshold
        )));
    }
    Ok(case)
}

pub fn cmd_case(cfg: &RunConfig) -> Result<Output, CliError> {
    let case = build_case(cfg)?;
    let reg = regularity_scan(case.seed(), &cfg.grid);
    let herm = hermiticity_report(case.seed(), &case.base, &cfg.grid, 1e-12)?;
    let xs = cfg.grid.points();

    let mut names = vec!["x".to_string()];
    for i in 1..=3 {
        for j in 1..=3 {
            names.push(format!("V{i}{j}_re"));
            names.push(format!("V{i}{j}_im"));
        }
    }
    for (name, _) in case.profiles(0.0) {
        names.push(name.to_string());
    }
    for k in 1..=3 {
        for c in ["a", "b", "c"] {
            names.push(format!("psi{k}_{c}_re"));
            names.push(format!("psi{k}_{c}_im"));
        }
    }
    let rows: Vec<Vec<f64>> = xs
        .iter()
        .map(|&x| {
            let mut row = vec![x];
            let v = case.potential(x);
            for i in 0..3 {
                for j in 0..3 {
                    row.push(v[(i, j)].re);
                    row.push(v[(i, j)].im);
                }
            }
            row.extend(case.profiles(x).into_iter().map(|(_, f)| f));
            for psi in case.missing_states() {
                let s = psi.value(x);
                for c in 0..3 {
                    row.push(s[c].re);
                    row.push(s[c].im);
                }
            }
            row
        })
        .collect();

    let report = json!({
        "schema": SCHEMA,
        "command": "case",
        "params": cfg.case,
        "regularity": reg,
        "hermiticity": herm,
    });
    let (body, sidecar) = match cfg.format {
        Format::Csv => {
            let mut out = names.join(",");
            out.push('\n');
            for row in &rows {
                let cells: Vec<String> = row.iter().map(|v| fmt_f(*v)).collect();
                out.push_str(&cells.join(","));
                out.push('\n');
            }
            (out, Some(to_json(&report)))
        }
        Format::Json => {
            let columns: Vec<Value> = names
                .iter()
                .enumerate()
                .map(|(c, name)| {
                    json!({"name": name, "values": rows.iter().map(|r| r[c]).collect::<Vec<_>>()})
                })
                .collect();
            let doc = json!({
                "schema": SCHEMA,
                "command": "case",
                "params": cfg.case,
                "grid": cfg.grid,
                "columns": columns,
                "report": report,
            });
            (to_json(&doc), None)
        }
    };
    Ok(Output {
        body,
        report: sidecar,
        status: Ok(()),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub check: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    fn below(name: &str, value: crate::Result<f64>, threshold: f64) -> Self {
        let value = value.unwrap_or(f64::NAN);
        Check {
            check: name.into(),
            value,
            threshold,
            pass: value < threshold,
        }
    }

    fn above(name: &str, value: f64, threshold: f64) -> Self {
        Check {
            check: name.into(),
            value,
            threshold,
            pass: value > threshold,
        }
    }
}

fn sup_over(grid: &Grid, f: impl Fn(f64) -> f64) -> f64 {
    grid.points().into_iter().map(f).fold(0.0, |a: f64, b| if b.is_nan() { f64::NAN } else { a.max(b) })
}

/// All checks for the configured case.
pub fn verify_checks(cfg: &RunConfig) -> Result<Vec<Check>, CliError> {
    let case = build(&cfg.case)?;
    let p = case.params;
    let grid = cfg.grid;
    let mut checks = Vec::new();

    let reg = regularity_scan(case.seed(), &grid);
    checks.push(Check::above("regularity", reg.min_ratio, reg.threshold));

    if case.has_closed_form() {
        checks.push(Check::below("closed_form_oracle", oracle_crosscheck(&p, &grid), 1e-10));
    }

    let herm = hermiticity_report(case.seed(), &case.base, &grid, 1e-12).map(|h| h.max_defect);
    checks.push(Check::below("hermiticity", herm, 1e-12));

    let probes = probe_solutions(p.m, p.hv)?;
    let inter = probes.iter().try_fold(0.0f64, |acc, psi| {
        Ok::<f64, Error>(acc.max(intertwining_residual(&case.base, case.seed(), psi, &grid)?))
    });
    checks.push(Check::below("intertwining", inter, 1e-9));

    let lambda = p.lambda();
    let eig = p
        .bound_columns()
        .into_iter()
        .map(|j| eigen_residual(case.model(), &case.missing_states()[j], lambda[j], &grid))
        .fold(0.0, f64::max);
    checks.push(Check::below("eigen_residual", Ok(eig), 1e-10));

    let partner = probes
        .iter()
        .map(|psi| eigen_residual(&case.base, &chiral_partner(psi), -psi.label().energy(), &grid))
        .fold(0.0, f64::max);
    checks.push(Check::below("chiral_partner", Ok(partner), 1e-10));

    if p.tag == CaseTag::I {
        let s = chiral();
        let anti = sup_over(&grid, |x| anticommutator(&s, &case.potential(x)).max_abs());
        checks.push(Check::below("chiral_symmetry", Ok(anti), 1e-12));
    }

    if p.tag == CaseTag::IV {
        let block = sup_over(&grid, |x| {
            let v = case.potential(x);
            (0..3).map(|j| v[(2, j)].norm().max(v[(j, 2)].norm())).fold(0.0, f64::max)
        });
        checks.push(Check::below("block_structure", Ok(block), 1e-12));
    }
    Ok(checks)
}

pub fn cmd_verify(cfg: &RunConfig) -> Result<Output, CliError> {
    let checks = verify_checks(cfg)?;
    let pass = checks.iter().all(|c| c.pass);
    let body = match cfg.format {
        Format::Csv => {
            let mut out = String::from("check,value,threshold,pass\n");
            for c in &checks {
                writeln!(out, "{},{},{},{}", c.check, fmt_f(c.value), fmt_f(c.threshold), c.pass)
                    .expect("write to String");
            }
            out
        }
        Format::Json => to_json(&json!({
            "schema": SCHEMA,
            "command": "verify",
            "params": cfg.case,
            "grid": cfg.grid,
            "checks": checks,
            "pass": pass,
        })),
    };
    let failing: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.check.as_str()).collect();
    let status = if pass {
        Ok(())
    } else {
        Err(CliError::Verification(failing.join(", ")))
    };
    Ok(Output {
        body,
        report: None,
        status,
    })
}

pub fn cmd_scatter(cfg: &RunConfig) -> Result<Output, CliError> {
    let case = build_case(cfg)?;
    let results = case_scatter(&case, &cfg.energies);
    let mut errors = Vec::new();
    let body = match cfg.format {
        Format::Csv => {
            let mut out = String::from("energy,reflection,transmission,status\n");
            for (e, r) in cfg.energies.iter().zip(&results) {
                match r {
                    Ok(r) => writeln!(out, "{},{},{},ok", fmt_f(*e), fmt_f(r.reflection), fmt_f(r.transmission)),
                    Err(err) => {
                        errors.push(format!("E = {e}: {err}"));
                        writeln!(out, "{},NaN,NaN,\"{}\"", fmt_f(*e), err.to_string().replace('"', "'"))
                    }
                }
                .expect("write to String");
            }
            out
        }
        Format::Json => {
            let rows: Vec<Value> = cfg
                .energies
                .iter()
                .zip(&results)
                .map(|(e, r)| match r {
                    Ok(r) => json!({
                        "energy": e,
                        "reflection": r.reflection,
                        "transmission": r.transmission,
                        "k_left": r.k_left,
                        "k_right": r.k_right,
                        "length": r.length,
                        "w_minus": r.w_minus.as_ref().map(matrix_json),
                        "w_plus": r.w_plus.as_ref().map(matrix_json),
                    }),
                    Err(err) => {
                        errors.push(format!("E = {e}: {err}"));
                        json!({"energy": e, "error": err.to_string()})
                    }
                })
                .collect();
            to_json(&json!({
                "schema": SCHEMA,
                "command": "scatter",
                "params": cfg.case,
                "results": rows,
            }))
        }
    };
    let status = if errors.is_empty() {
        Ok(())
    } else {
        Err(CliError::Runtime(errors.join("; ")))
    };
    Ok(Output {
        body,
        report: None,
        status,
    })
}

pub fn cmd_spectrum(cfg: &RunConfig) -> Result<Output, CliError> {
    let case = build_case(cfg)?;
    let report = case_spectrum(&case, cfg.n_scan)?;
    let pass = report.matches(1e-8);
    let body = match cfg.format {
        Format::Csv => {
            let mut out = String::from("expected,found,residual,pass\n");
            let rows = report.expected.len().max(report.found_energies.len());
            for i in 0..rows {
                let exp = report.expected.get(i).copied();
                let found = report.found_energies.get(i).copied();
                let res = report.residuals.get(i).copied().flatten();
                let ok = matches!((exp, found), (Some(a), Some(b)) if (a - b).abs() <= 1e-8);
                writeln!(
                    out,
                    "{},{},{},{}",
                    fmt_f(exp.unwrap_or(f64::NAN)),
                    fmt_f(found.unwrap_or(f64::NAN)),
                    fmt_f(res.unwrap_or(f64::NAN)),
                    ok && pass
                )
                .expect("write to String");
            }
            out
        }
        Format::Json => to_json(&json!({
            "schema": SCHEMA,
            "command": "spectrum",
            "params": cfg.case,
            "found": report.found_energies,
            "expected": report.expected,
            "residuals": report.residuals,
            "matching": report.matching,
            "degenerate": report.degenerate,
            "length": report.length,
            "pass": pass,
        })),
    };
    let status = if pass {
        Ok(())
    } else {
        Err(CliError::Verification(format!(
            "found {:?}, expected {:?}",
            report.found_energies, report.expected
        )))
    };
    Ok(Output {
        body,
        report: None,
        status,
    })
}

/// Writes `data` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, data: &[u8]) -> io::Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or_else(|| Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "output path has no file name"))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(data)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_os_string();
    s.push(".report.json");
    PathBuf::from(s)
}

fn emit(cfg: &RunConfig, output: &Output) -> Result<(), CliError> {
    let io_err = |p: &Path, e: io::Error| CliError::Config(format!("cannot write {}: {e}", p.display()));
    match &cfg.out {
        Some(path) => {
            write_atomic(path, output.body.as_bytes()).map_err(|e| io_err(path, e))?;
            if let Some(report) = &output.report {
                let side = sidecar_path(path);
                write_atomic(&side, report.as_bytes()).map_err(|e| io_err(&side, e))?;
            }
        }
        None => {
            io::stdout()
                .write_all(output.body.as_bytes())
                .map_err(|e| CliError::Runtime(format!("cannot write to stdout: {e}")))?;
            if let Some(report) = &output.report {
                eprint!("{report}");
            }
        }
    }
    Ok(())
}

fn configure_threads() {
    if let Some(n) = std::env::var("DARBOUX_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let (kind, args) = match &cli.command {
        Command::Bands(a) => (CommandKind::Bands, a),
        Command::Case(a) => (CommandKind::Case, a),
        Command::Verify(a) => (CommandKind::Verify, a),
        Command::Scatter(a) => (CommandKind::Scatter, a),
        Command::Spectrum(a) => (CommandKind::Spectrum, a),
    };
    let cfg = RunConfig::resolve(kind, args)?;
    let output = match kind {
        CommandKind::Bands => cmd_bands(&cfg)?,
        CommandKind::Case => cmd_case(&cfg)?,
        CommandKind::Verify => cmd_verify(&cfg)?,
        CommandKind::Scatter => cmd_scatter(&cfg)?,
        CommandKind::Spectrum => cmd_spectrum(&cfg)?,
    };
    emit(&cfg, &output)?;
    output.status
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    configure_threads();
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve(kind: CommandKind, argv: &[&str]) -> Result<RunConfig, CliError> {
        let mut full = vec!["lieb-darboux", "case"];
        full.extend_from_slice(argv);
        let cli = Cli::try_parse_from(full).unwrap();
        let Command::Case(args) = cli.command else { unreachable!() };
        RunConfig::resolve(kind, &args)
    }

    #[test]
    fn defaults_and_overrides() {
        let cfg = resolve(CommandKind::Case, &["--case", "II", "--domain", "-5", "5", "--n", "11"]).unwrap();
        assert_eq!(cfg.case.eps, -0.25);
        assert_eq!(cfg.grid, Grid::new(-5.0, 5.0, 11).unwrap());
        let cfg = resolve(CommandKind::Case, &["--case", "II", "--mirror"]).unwrap();
        assert!(cfg.case.mirror && cfg.case.eps == 0.25);
        let cfg = resolve(CommandKind::Bands, &["--tau1", "0.5", "--energies", "1,2"]).unwrap();
        assert_eq!(cfg.lattice.tau1, 0.5);
        assert_eq!(cfg.energies, vec![1.0, 2.0]);
    }

    #[test]
    fn config_errors_map_to_exit_two() {
        let e = resolve(CommandKind::Case, &["--eps", "1.5"]).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let e = resolve(CommandKind::Bands, &["--a", "0"]).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let e = resolve(CommandKind::Case, &["--case", "V"]).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn file_then_flags() {
        let dir = std::env::temp_dir().join(format!("ld-cli-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.toml");
        fs::write(&path, "case = \"IV\"\neps = 0.3\nn = 101\n[lattice]\nt3 = 0.2\n").unwrap();
        let p = path.to_str().unwrap();
        let cfg = resolve(CommandKind::Case, &["--config", p, "--eps", "0.4"]).unwrap();
        assert_eq!(cfg.case.tag, CaseTag::IV);
        assert_eq!(cfg.case.eps, 0.4);
        assert_eq!(cfg.grid.n, 101);
        assert_eq!(cfg.lattice.t3, 0.2);
        fs::write(&path, "bogus = 1\n").unwrap();
        assert_eq!(resolve(CommandKind::Case, &["--config", p]).unwrap_err().exit_code(), 2);
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn csv_float_format() {
        assert_eq!(fmt_f(1.2), "1.2000000000000000e0");
        assert_eq!(fmt_f(-0.0), "-0.0000000000000000e0");
        assert_eq!(fmt_f(f64::NAN), "NaN");
    }
}
