//! Experiment runner behind the `so3sr` binary.
//!
//! Every subcommand takes its numeric flags either on the command line or
//! from a flat JSON object passed with `--config` (keys are the flag names;
//! an optional `"subcommand"` key must match). Flags win over the file.
//! Artifacts go to `--out` through a temp file and rename, or to stdout.
//!
//! Exit codes: 0 all hard checks pass, 1 a hard check failed, 2 usage error,
//! 3 runtime error.

use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::certificate::{check_schur_bounds, enumerate_sign_patterns, InterpolationSystem, PatternSummary, SchurReport, VerifyOptions, DEFAULT_B};
use crate::error::{Error, Result};
use crate::filter::FilterSpec;
use crate::kernel::{verify_localization, verify_offdiag_sums, LocalizationOptions, ZonalKernel};
use crate::recovery::{default_coeffs, plant_and_recover, seeded_plant, L1Options, RecoveryOptions, RecoveryResult, MIN_RESOLUTION};
use crate::rng::stream;
use crate::so3::{haar_sample, well_separated_support, Rotation, SupportSet};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Recovery tolerances checked by `recover`.
pub const RECOVERY_CENTER_TOL: f64 = 1e-3;
pub const RECOVERY_COEFF_TOL: f64 = 1e-2;

const SUPPORT_TRIES: usize = 1_000_000;

#[derive(Parser, Debug)]
#[command(name = "so3sr", version, about = "Localized kernels, dual certificates and l1 recovery on SO(3)")]
pub struct Cli {
    /// flat JSON object of flag values; flags given on the command line win
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// filter constants as CSV: s,N,name,value
    Constants(ConstantsArgs),
    /// localization bounds as CSV: bound_name,s,N,worst_ratio,arg_at_worst,samples,applicable
    VerifyLocalization(LocalizationArgs),
    /// off-diagonal sums near a support point as CSV
    VerifyOffdiag(OffdiagArgs),
    /// Schur bounds and sign-pattern certificates on a random support, as JSON
    Certificate(CertificateArgs),
    /// plant a measure, recover it from its moments and score, as JSON
    Recover(RecoverArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Constants(_) => "constants",
            Command::VerifyLocalization(_) => "verify-localization",
            Command::VerifyOffdiag(_) => "verify-offdiag",
            Command::Certificate(_) => "certificate",
            Command::Recover(_) => "recover",
        }
    }
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstantsArgs {
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalizationArgs {
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OffdiagArgs {
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: Option<usize>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long = "M")]
    #[serde(rename = "M")]
    pub m: Option<usize>,
    /// distance to the nearest support point, in units of nu/(N+1)
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertificateArgs {
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: Option<usize>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long = "M")]
    #[serde(rename = "M")]
    pub m: Option<usize>,
    /// `all` or a number of distinct random sign patterns
    #[arg(long)]
    pub patterns: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// near-region mesh spacing; defaults to pi/(8(N+1))
    #[arg(long)]
    pub near_mesh: Option<f64>,
    #[arg(long)]
    pub far_samples: Option<usize>,
    #[arg(long)]
    pub margin: Option<f64>,
    /// coefficient bound multiplier
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecoverArgs {
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: Option<usize>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long = "M")]
    #[serde(rename = "M")]
    pub m: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub resolution: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Field-wise `self.or(file)`.
macro_rules! merge {
    ($t:ident { $($f:ident),* }) => {
        impl $t {
            fn merge(self, file: $t) -> $t {
                $t { $($f: self.$f.or(file.$f)),* }
            }
        }
    };
}
merge!(ConstantsArgs { s, n, out });
merge!(LocalizationArgs { s, n, samples, seed, out });
merge!(OffdiagArgs { s, n, nu, m, eps, seed, out });
merge!(CertificateArgs { s, n, nu, m, patterns, seed, near_mesh, far_samples, margin, b, out });
merge!(RecoverArgs { s, n, nu, m, seed, resolution, lambda, iters, out });

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}

fn read_config(path: &Path, command: &str) -> Result<serde_json::Map<String, serde_json::Value>> {
    let text = std::fs::read_to_string(path)?;
    let serde_json::Value::Object(mut map) = serde_json::from_str(&text)? else {
        return usage(format!("config {} is not a JSON object", path.display()));
    };
    if let Some(sub) = map.remove("subcommand") {
        if sub.as_str() != Some(command) {
            return usage(format!("config {} is for subcommand {sub}, not {command}", path.display()));
        }
    }
    if let Some(p) = map.get_mut("patterns") {
        if let Some(k) = p.as_u64() {
            *p = serde_json::Value::String(k.to_string());
        }
    }
    Ok(map)
}

fn from_config<T: for<'de> Deserialize<'de> + Default>(path: Option<&Path>, command: &str) -> Result<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let map = read_config(path, command)?;
    serde_json::from_value(serde_json::Value::Object(map))
        .map_err(|e| Error::Usage(format!("config {}: {e}", path.display())))
}

fn check_s_n(s: usize, n: usize) -> Result<()> {
    if s % 2 != 0 || !(6..=16).contains(&s) {
        return usage(format!("hypothesis violated: s must be even with 6 <= s <= 16, got s = {s}"));
    }
    if n < 2 * s {
        return usage(format!("hypothesis violated: N >= 2s, got N = {n}, s = {s}"));
    }
    Ok(())
}

fn check_nu(nu: f64) -> Result<()> {
    if !nu.is_finite() || nu < PI {
        return usage(format!("hypothesis violated: nu >= pi, got nu = {nu}"));
    }
    Ok(())
}

fn check_m(m: usize) -> Result<()> {
    if m == 0 {
        return usage("hypothesis violated: M >= 1, got M = 0");
    }
    Ok(())
}

/// Rayon pool size from `SO3SR_THREADS`, if set.
pub fn thread_cap() -> Result<Option<usize>> {
    match std::env::var("SO3SR_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(k) if k >= 1 => Ok(Some(k)),
            _ => usage(format!("SO3SR_THREADS must be a positive integer, got {v:?}")),
        },
    }
}

/// Writes `bytes` to `path` via a temp file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Artifact bytes and whether every hard check passed.
#[derive(Debug)]
pub struct Outcome {
    pub artifact: Vec<u8>,
    pub out: Option<PathBuf>,
    pub pass: bool,
}

fn csv_bytes<F: FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<()>>(f: F) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    f(&mut w)?;
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn json_bytes<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut b = serde_json::to_vec_pretty(v)?;
    b.push(b'\n');
    Ok(b)
}

pub fn run(cli: Cli) -> Result<Outcome> {
    let name = cli.command.name();
    let cfg = cli.config.as_deref();
    match cli.command {
        Command::Constants(a) => constants(a.merge(from_config(cfg, name)?)),
        Command::VerifyLocalization(a) => localization(a.merge(from_config(cfg, name)?)),
        Command::VerifyOffdiag(a) => offdiag(a.merge(from_config(cfg, name)?)),
        Command::Certificate(a) => certificate(a.merge(from_config(cfg, name)?)),
        Command::Recover(a) => recover(a.merge(from_config(cfg, name)?)),
    }
}

fn constants(a: ConstantsArgs) -> Result<Outcome> {
    let (s, n) = (a.s.unwrap_or(8), a.n.unwrap_or(20));
    check_s_n(s, n)?;
    let spec = FilterSpec::new(s, n)?;
    let artifact = csv_bytes(|w| {
        w.write_record(["s", "N", "name", "value"]).map_err(csv_err)?;
        for (k, v) in spec.constant_table() {
            w.write_record([s.to_string(), n.to_string(), k, v.to_string()]).map_err(csv_err)?;
        }
        Ok(())
    })?;
    Ok(Outcome { artifact, out: a.out, pass: true })
}

fn csv_err(e: csv::Error) -> Error {
    Error::Csv(e)
}

fn localization(a: LocalizationArgs) -> Result<Outcome> {
    let (s, n) = (a.s.unwrap_or(8), a.n.unwrap_or(64));
    check_s_n(s, n)?;
    let samples = a.samples.unwrap_or(10_000);
    if samples == 0 {
        return usage("--samples must be at least 1");
    }
    let kernel = ZonalKernel::new(FilterSpec::new(s, n)?);
    let rows = verify_localization(&kernel, &LocalizationOptions { samples, seed: a.seed.unwrap_or(0) })?;
    let pass = rows.iter().filter(|r| r.applicable).all(|r| r.worst_ratio <= 1.0);
    let artifact = csv_bytes(|w| {
        w.write_record(["bound_name", "s", "N", "worst_ratio", "arg_at_worst", "samples", "applicable"])
            .map_err(csv_err)?;
        for r in &rows {
            w.write_record([
                r.name.clone(),
                r.s.to_string(),
                r.n.to_string(),
                r.worst_ratio.to_string(),
                r.arg_at_worst.to_string(),
                r.samples.to_string(),
                r.applicable.to_string(),
            ])
            .map_err(csv_err)?;
        }
        Ok(())
    })?;
    Ok(Outcome { artifact, out: a.out, pass })
}

fn random_support(seed: u64, label: &str, m: usize, rho: f64) -> Result<SupportSet> {
    well_separated_support(&mut stream(seed, label), m, rho, SUPPORT_TRIES)
}

fn offdiag(a: OffdiagArgs) -> Result<Outcome> {
    let (s, n) = (a.s.unwrap_or(8), a.n.unwrap_or(40));
    check_s_n(s, n)?;
    let nu = a.nu.unwrap_or(36.0);
    check_nu(nu)?;
    let m = a.m.unwrap_or(10);
    check_m(m)?;
    let eps = a.eps.unwrap_or(0.5);
    if !(0.0..=0.5).contains(&eps) {
        return usage(format!("hypothesis violated: 0 <= eps <= 1/2, got eps = {eps}"));
    }
    let seed = a.seed.unwrap_or(0);
    let rho = nu / (n + 1) as f64;
    let support = random_support(seed, "offdiag/support", m, rho)?;
    let mut rng = stream(seed, "offdiag/point");
    let dir = haar_sample(&mut rng).matrix().column(0).into_owned();
    let x = support.points[0] * Rotation::exp(&(eps * rho * dir));
    let kernel = ZonalKernel::new(FilterSpec::new(s, n)?);
    let rows = verify_offdiag_sums(&kernel, &support, &x, eps, nu)?;
    let pass = rows.iter().all(|r| r.ratio <= 1.0);
    let artifact = csv_bytes(|w| {
        w.write_record(["name", "s", "N", "nu", "M", "eps", "sum", "bound", "ratio"]).map_err(csv_err)?;
        for r in &rows {
            w.write_record([
                r.name.clone(),
                s.to_string(),
                n.to_string(),
                nu.to_string(),
                m.to_string(),
                eps.to_string(),
                r.sum.to_string(),
                r.bound.to_string(),
                r.ratio.to_string(),
            ])
            .map_err(csv_err)?;
        }
        Ok(())
    })?;
    Ok(Outcome { artifact, out: a.out, pass })
}

#[derive(Clone, Debug, Serialize)]
pub struct CertificateConfig {
    pub subcommand: &'static str,
    pub s: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub nu: f64,
    #[serde(rename = "M")]
    pub m: usize,
    pub patterns: String,
    pub seed: u64,
    pub near_mesh: Option<f64>,
    pub far_samples: usize,
    pub margin: f64,
    pub b: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CertificatePass {
    pub schur: bool,
    pub patterns: bool,
    pub all: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CertificateOutput {
    pub config: CertificateConfig,
    pub support: SupportSet,
    pub schur: SchurReport,
    pub patterns: PatternSummary,
    pub pass: CertificatePass,
}

/// Random support with separation `ν/(N+1)` from the seed's
/// `certificate/support` stream, and its interpolation system.
pub fn certificate_system(cfg: &CertificateConfig) -> Result<InterpolationSystem> {
    let np1 = (cfg.n + 1) as f64;
    let support = random_support(cfg.seed, "certificate/support", cfg.m, cfg.nu / np1)?;
    let kernel = Arc::new(ZonalKernel::new(FilterSpec::new(cfg.s, cfg.n)?));
    InterpolationSystem::assemble(&support, &kernel)
}

/// Builds the full certificate report without writing it.
pub fn certificate_report(cfg: CertificateConfig) -> Result<CertificateOutput> {
    let limit = match cfg.patterns.as_str() {
        "all" => {
            if cfg.m > crate::certificate::verify::MAX_PATTERN_M {
                return usage(format!(
                    "--patterns all needs M <= {}, got M = {}",
                    crate::certificate::verify::MAX_PATTERN_M,
                    cfg.m
                ));
            }
            1usize << cfg.m
        }
        k => match k.parse::<usize>() {
            Ok(v) if v >= 1 => v,
            _ => return usage(format!("--patterns must be 'all' or a positive integer, got {k:?}")),
        },
    };
    let system = certificate_system(&cfg)?;
    let support = system.centers.clone();
    let schur = check_schur_bounds(&system, cfg.nu, cfg.b)?;
    let factored = system.factor()?;
    let opts = VerifyOptions {
        near_mesh: cfg.near_mesh,
        far_samples: cfg.far_samples,
        margin: cfg.margin,
        seed: cfg.seed,
    };
    let patterns = enumerate_sign_patterns(&factored, limit, &opts)?;
    let pass_patterns = patterns.all_checks_passed == patterns.tested;
    let pass = CertificatePass {
        schur: schur.all_hold,
        patterns: pass_patterns,
        all: schur.all_hold && pass_patterns,
    };
    Ok(CertificateOutput { config: cfg, support, schur, patterns, pass })
}

fn certificate(a: CertificateArgs) -> Result<Outcome> {
    let (s, n) = (a.s.unwrap_or(8), a.n.unwrap_or(40));
    check_s_n(s, n)?;
    if n < 20 {
        return usage(format!("hypothesis violated: N >= 20 for certificates, got N = {n}"));
    }
    let nu = a.nu.unwrap_or(crate::certificate::DEFAULT_NU);
    check_nu(nu)?;
    let m = a.m.unwrap_or(3);
    check_m(m)?;
    let near_mesh = a.near_mesh;
    if let Some(h) = near_mesh {
        if !(h > 0.0) {
            return usage(format!("--near-mesh must be positive, got {h}"));
        }
    }
    let margin = a.margin.unwrap_or(1e-3);
    if !(0.0..1.0).contains(&margin) {
        return usage(format!("--margin must lie in [0, 1), got {margin}"));
    }
    let cfg = CertificateConfig {
        subcommand: "certificate",
        s,
        n,
        nu,
        m,
        patterns: a.patterns.unwrap_or_else(|| "all".into()),
        seed: a.seed.unwrap_or(0),
        near_mesh,
        far_samples: a.far_samples.unwrap_or(2000),
        margin,
        b: a.b.unwrap_or(DEFAULT_B),
    };
    let report = certificate_report(cfg)?;
    Ok(Outcome {
        artifact: json_bytes(&report)?,
        out: a.out,
        pass: report.pass.all,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RecoverConfig {
    pub subcommand: &'static str,
    pub s: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub nu: f64,
    #[serde(rename = "M")]
    pub m: usize,
    pub coeffs: Vec<f64>,
    pub seed: u64,
    pub resolution: f64,
    pub lambda: f64,
    pub iters: usize,
    pub match_radius: f64,
    pub center_tol: f64,
    pub coeff_tol: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RecoverOutput {
    pub config: RecoverConfig,
    pub result: RecoveryResult,
    pub pass: bool,
}

/// Plants, recovers and scores without writing anything.
pub fn recover_report(cfg: RecoverConfig) -> Result<RecoverOutput> {
    let truth = seeded_plant(cfg.seed, cfg.n, cfg.nu, &cfg.coeffs)?;
    let opts = RecoveryOptions {
        s: cfg.s,
        resolution: cfg.resolution,
        l1: L1Options {
            lambda: cfg.lambda,
            iters: cfg.iters,
            ..Default::default()
        },
        ..RecoveryOptions::for_degree(cfg.n)
    };
    let result = plant_and_recover(&truth, cfg.n, &opts, cfg.match_radius)?;
    let sc = &result.score;
    let pass = sc.unmatched_truth.is_empty()
        && sc.unmatched_estimate.is_empty()
        && sc.max_geodesic_error <= cfg.center_tol
        && sc.max_coefficient_error <= cfg.coeff_tol;
    Ok(RecoverOutput { config: cfg, result, pass })
}

fn recover(a: RecoverArgs) -> Result<Outcome> {
    let n = a.n.unwrap_or(24);
    let s = a.s.unwrap_or(RecoveryOptions::for_degree(n).s);
    check_s_n(s, n)?;
    let nu = a.nu.unwrap_or(crate::certificate::DEFAULT_NU);
    check_nu(nu)?;
    let m = a.m.unwrap_or(3);
    check_m(m)?;
    let resolution = a.resolution.unwrap_or(0.3);
    if !(MIN_RESOLUTION..=PI).contains(&resolution) {
        return usage(format!("--resolution must lie in [pi/256, pi], got {resolution}"));
    }
    let lambda = a.lambda.unwrap_or(L1Options::default().lambda);
    if !(lambda > 0.0) {
        return usage(format!("--lambda must be positive, got {lambda}"));
    }
    let iters = a.iters.unwrap_or(L1Options::default().iters);
    if iters == 0 {
        return usage("--iters must be at least 1");
    }
    let cfg = RecoverConfig {
        subcommand: "recover",
        s,
        n,
        nu,
        m,
        coeffs: default_coeffs(m),
        seed: a.seed.unwrap_or(0),
        resolution,
        lambda,
        iters,
        match_radius: resolution,
        center_tol: RECOVERY_CENTER_TOL,
        coeff_tol: RECOVERY_COEFF_TOL,
    };
    let report = recover_report(cfg)?;
    Ok(Outcome {
        artifact: json_bytes(&report)?,
        out: a.out,
        pass: report.pass,
    })
}

/// Parses, runs and writes; returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
        }
    };
    let threads = match thread_cap() {
        Ok(t) => t,
        Err(e) => return report_error(&e),
    };
    if let Some(k) = threads {
        // a second build in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
    }
    let outcome = match run(cli) {
        Ok(o) => o,
        Err(e) => return report_error(&e),
    };
    let written = match &outcome.out {
        Some(p) => write_atomic(p, &outcome.artifact),
        None => std::io::stdout().write_all(&outcome.artifact).map_err(Error::Io),
    };
    if let Err(e) = written {
        return report_error(&e);
    }
    if outcome.pass {
        EXIT_PASS
    } else {
        eprintln!("so3sr: hard checks failed");
        EXIT_FAIL
    }
}

fn report_error(e: &Error) -> i32 {
    eprintln!("so3sr: {e}");
    match e {
        Error::Usage(_) | Error::Domain(_) => EXIT_USAGE,
        _ => EXIT_RUNTIME,
    }
}
