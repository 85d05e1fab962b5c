//! Command-line driver. Every subcommand builds an [`ExperimentReport`],
//! embeds the run manifest and writes it as JSON (to `--report` or stdout).

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;

use clap::{CommandFactory, Parser, Subcommand};
use serde_json::json;

use crate::axioms::{check_bicombing_properties, check_retraction_lipschitz};
use crate::axis::{axis_pipeline, check_phi_properties, check_sqrt_bound, AxisSolverConfig};
use crate::barycenter::{barycenter_trials, Backend};
use crate::error::LabError;
use crate::flats::{check_halfplane_monotone, cone_formula_report, sigma_family, verify_flat_strip};
use crate::hyperbolicity::{delta_report, four_point_delta, parse_matrix, slim_relation_report, tight_span_quadruple, DeltaConfig};
use crate::isometry::{translation_length, IsometryDescriptor};
use crate::metric::{check_metric_axioms, Bicombing, Interval, MetricSpace, ToleranceConfig};
use crate::report::{to_value, ExperimentReport, RunManifest, Violation};
use crate::spaces::{
    make_ex22_space, make_ex63_space, make_normed_space, make_shift_space, parse_directions, NormSpec, NormedSpace,
    ShiftPoint, ShiftSpace, StripSpace, WedgeSpace,
};
use crate::toruslab::{torus_report, LatticeAction, TorusConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_VIOLATIONS: i32 = 2;
pub const EXIT_USAGE: i32 = 64;
pub const THREADS_ENV: &str = "BICOMBING_LAB_THREADS";

#[derive(Debug, Parser)]
#[command(name = "bicombing-lab", version, about = "Numerical checks for bicombings on example metric spaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// l1-plane | linf-plane | l2-plane | l2-3d | poly:<file> | ex22 | ex63 | shift
    #[arg(long, global = true, default_value = "l1-plane")]
    pub space: String,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, default_value_t = 1000)]
    pub samples: usize,
    /// Equality tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Output path for the JSON report (stdout if absent).
    #[arg(long, global = true)]
    pub report: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Metric axioms and bicombing properties on random samples.
    Axioms,
    /// Lipschitz bound of the barycenter on random pairs of tuples.
    Barycenter {
        #[arg(long, default_value = "exact")]
        backend: Backend,
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
    /// Translation length by repeated application.
    TranslationLength {
        #[arg(long)]
        iso: Option<String>,
        #[arg(long, default_value_t = 4096)]
        nmax: u64,
        #[arg(long)]
        start: Option<String>,
    },
    /// Fixed point of the midpoint map and the axis through it.
    Axis {
        #[arg(long)]
        iso: Option<String>,
        #[arg(long)]
        start: Option<String>,
        #[arg(long, default_value_t = 0.9)]
        lambda: f64,
        #[arg(long, default_value_t = 10.0)]
        window: f64,
        #[arg(long, default_value_t = 4096)]
        nmax: usize,
    },
    /// Flat strip between two parallel lines and its norm.
    Strip {
        /// Offset of the second line.
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        a: f64,
        /// CSV path for the unit-ball polygon.
        #[arg(long)]
        csv: Option<String>,
    },
    /// Half-plane monotonicity and the cone metric between rays.
    Halfplane {
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        #[arg(long, default_value_t = 2.0)]
        b: f64,
        #[arg(long, default_value_t = 20)]
        trials: usize,
    },
    /// Four-point delta estimate on a box, optionally with the slim relation.
    Hyperbolicity {
        #[arg(long = "box", default_value_t = 8.0)]
        box_length: f64,
        #[arg(long)]
        slim: bool,
        #[arg(long, default_value_t = 200)]
        triples: usize,
        #[arg(long, default_value_t = 33)]
        grid: usize,
    },
    /// Tight span of a 4-point metric read from a file.
    Tightspan {
        #[arg(long)]
        matrix: String,
    },
    /// Averaged maps over a lattice action and their residual bound.
    Torus {
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        k: Vec<i64>,
        #[arg(long, value_delimiter = ',', default_value = "0.25,0.25", allow_negative_numbers = true)]
        p: Vec<f64>,
        #[arg(long, default_value_t = 256)]
        nmax: u64,
        #[arg(long)]
        start: Option<String>,
        /// CSV path for the residual table.
        #[arg(long)]
        csv: Option<String>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Axioms => "axioms",
            Command::Barycenter { .. } => "barycenter",
            Command::TranslationLength { .. } => "translation-length",
            Command::Axis { .. } => "axis",
            Command::Strip { .. } => "strip",
            Command::Halfplane { .. } => "halfplane",
            Command::Hyperbolicity { .. } => "hyperbolicity",
            Command::Tightspan { .. } => "tightspan",
            Command::Torus { .. } => "torus",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Lab(LabError),
    #[error("{0}")]
    Io(String),
}

impl From<LabError> for CliError {
    fn from(e: LabError) -> Self {
        match e {
            LabError::UnsupportedSpace(_)
            | LabError::DegenerateNorm { .. }
            | LabError::InvalidNorm(_)
            | LabError::InvalidPoint(_)
            | LabError::SizeMismatch(..)
            | LabError::TupleSize { .. }
            | LabError::NotAMetric(_)
            | LabError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            other => CliError::Lab(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            _ => EXIT_FAILURE,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Output of one run: the report plus any CSV artifact.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: ExperimentReport,
    pub csv: Option<(String, String)>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.report.is_clean() {
            EXIT_OK
        } else {
            EXIT_VIOLATIONS
        }
    }
}

/// Per-space hooks the driver needs beyond the bicombing itself.
trait CliSpace: Bicombing + Clone + Sync + 'static {
    fn parse_point(&self, text: &str) -> CliResult<Self::Point>;
    fn basepoint(&self) -> Self::Point;
    fn isometry(&self, _name: Option<&str>) -> CliResult<IsometryDescriptor<Self::Point>> {
        Err(CliError::Usage(format!("space {} has no named isometries", self.space_id())))
    }
    fn extra_axioms(&self, _cfg: &ToleranceConfig) -> CliResult<Option<ExperimentReport>> {
        Ok(None)
    }
}

fn parse_floats(text: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("`{t}` is not a number"))))
        .collect()
}

fn parse_ints(text: &str) -> CliResult<Vec<i64>> {
    text.split(',')
        .map(|t| t.trim().parse::<i64>().map_err(|_| CliError::Usage(format!("`{t}` is not an integer"))))
        .collect()
}

fn point3(space: &impl MetricSpace<Point = [f64; 3]>, text: &str) -> CliResult<[f64; 3]> {
    let v = parse_floats(text)?;
    let p: [f64; 3] = v
        .try_into()
        .map_err(|_| CliError::Usage(format!("expected 3 coordinates in `{text}`")))?;
    if !space.contains(&p) {
        return Err(CliError::Usage(format!("{p:?} is not a point of {}", space.space_id())));
    }
    Ok(p)
}

impl CliSpace for NormedSpace {
    fn parse_point(&self, text: &str) -> CliResult<Vec<f64>> {
        let v = parse_floats(text)?;
        if v.len() != self.dim() {
            return Err(CliError::Usage(format!("expected {} coordinates in `{text}`", self.dim())));
        }
        Ok(v)
    }

    fn basepoint(&self) -> Vec<f64> {
        vec![0.0; self.dim()]
    }

    /// `translate:v1,..,vn`, default the first unit vector.
    fn isometry(&self, name: Option<&str>) -> CliResult<IsometryDescriptor<Vec<f64>>> {
        let v = match name {
            None => {
                let mut e = vec![0.0; self.dim()];
                e[0] = 1.0;
                e
            }
            Some(n) => {
                let body = n
                    .strip_prefix("translate:")
                    .ok_or_else(|| CliError::Usage(format!("unknown isometry `{n}` (use translate:v1,..,vn)")))?;
                self.parse_point(body)?
            }
        };
        Ok(self.translation(v))
    }
}

impl CliSpace for StripSpace {
    fn parse_point(&self, text: &str) -> CliResult<[f64; 3]> {
        point3(self, text)
    }

    fn basepoint(&self) -> [f64; 3] {
        [0.0, 0.0, 0.0]
    }

    fn extra_axioms(&self, cfg: &ToleranceConfig) -> CliResult<Option<ExperimentReport>> {
        Ok(Some(check_retraction_lipschitz(self, cfg)?))
    }
}

impl CliSpace for WedgeSpace {
    fn parse_point(&self, text: &str) -> CliResult<[f64; 3]> {
        point3(self, text)
    }

    fn basepoint(&self) -> [f64; 3] {
        [0.0, 0.0, 0.0]
    }

    /// `lattice:z,z'`, default `lattice:1,0`.
    fn isometry(&self, name: Option<&str>) -> CliResult<IsometryDescriptor<[f64; 3]>> {
        let (z, z2) = match name {
            None => (1, 0),
            Some(n) => {
                let body = n
                    .strip_prefix("lattice:")
                    .ok_or_else(|| CliError::Usage(format!("unknown isometry `{n}` (use lattice:z,z')")))?;
                match parse_ints(body)?.as_slice() {
                    &[z, z2] => (z, z2),
                    _ => return Err(CliError::Usage(format!("expected two integers in `{body}`"))),
                }
            }
        };
        Ok(self.lattice(z, z2))
    }

    fn extra_axioms(&self, cfg: &ToleranceConfig) -> CliResult<Option<ExperimentReport>> {
        Ok(Some(check_retraction_lipschitz(self, cfg)?))
    }
}

impl CliSpace for ShiftSpace {
    /// Comma-separated values at positions `0, 1, ..`, zero elsewhere.
    fn parse_point(&self, text: &str) -> CliResult<ShiftPoint> {
        let p = ShiftPoint::new(0, parse_floats(text)?, 0.0, 0.0);
        if !self.contains(&p) {
            return Err(CliError::Usage(format!("`{text}` is not a point of shift")));
        }
        Ok(p)
    }

    fn basepoint(&self) -> ShiftPoint {
        ShiftPoint::zero()
    }

    fn isometry(&self, name: Option<&str>) -> CliResult<IsometryDescriptor<ShiftPoint>> {
        match name {
            None | Some("gamma") => Ok(make_shift_space().1),
            Some(n) => Err(CliError::Usage(format!("unknown isometry `{n}` (use gamma)"))),
        }
    }
}

enum SpaceChoice {
    Normed(NormedSpace),
    Strip(StripSpace),
    Wedge(WedgeSpace),
    Shift(ShiftSpace),
}

fn load_space(id: &str) -> CliResult<SpaceChoice> {
    let normed = |spec| Ok(SpaceChoice::Normed(make_normed_space(spec)?));
    match id {
        "l1-plane" => normed(NormSpec::l1(2)),
        "linf-plane" => normed(NormSpec::linf(2)),
        "l2-plane" => normed(NormSpec::l2(2)),
        "l2-3d" => normed(NormSpec::l2(3)),
        "ex22" => Ok(SpaceChoice::Strip(make_ex22_space())),
        "ex63" => Ok(SpaceChoice::Wedge(make_ex63_space())),
        "shift" => Ok(SpaceChoice::Shift(make_shift_space().0)),
        other => match other.strip_prefix("poly:") {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{path}: {e}")))?;
                normed(NormSpec::polyhedral(parse_directions(&text)?))
            }
            None => Err(CliError::Usage(format!("unknown space `{other}`"))),
        },
    }
}

macro_rules! on_space {
    ($choice:expr, $s:ident => $body:expr) => {
        match $choice {
            SpaceChoice::Normed($s) => $body,
            SpaceChoice::Strip($s) => $body,
            SpaceChoice::Wedge($s) => $body,
            SpaceChoice::Shift($s) => $body,
        }
    };
}

fn tolerance(cli: &Cli) -> CliResult<ToleranceConfig> {
    let mut cfg = ToleranceConfig::default().with_samples(cli.samples).with_seed(cli.seed);
    if let Some(t) = cli.tol {
        cfg.eq_tol = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn start_point<S: CliSpace>(space: &S, start: &Option<String>) -> CliResult<S::Point> {
    start.as_deref().map_or_else(|| Ok(space.basepoint()), |t| space.parse_point(t))
}

fn axioms<S: CliSpace>(space: &S, cfg: &ToleranceConfig) -> CliResult<ExperimentReport> {
    let mut report = ExperimentReport::new("axioms", &space.space_id(), cfg.seed).param("samples", cfg.sample_count);
    report.absorb("metric", check_metric_axioms(space, cfg)?);
    report.absorb("bicombing", check_bicombing_properties(space, cfg)?);
    if let Some(extra) = space.extra_axioms(cfg)? {
        report.absorb("retraction", extra);
    }
    Ok(report)
}

fn translation<S: CliSpace>(space: &S, iso: Option<&str>, nmax: u64, start: &Option<String>, cfg: &ToleranceConfig) -> CliResult<ExperimentReport> {
    let iso = space.isometry(iso)?;
    let x = start_point(space, start)?;
    let est = translation_length(space, &iso, &x, nmax, None);
    let mut report = ExperimentReport::new("translation-length", &space.space_id(), cfg.seed)
        .param("iso", &iso.name)
        .param("nmax", nmax)
        .param("start", to_value(&x));
    report.set_summary("translation_length", est.translation_length_estimate);
    report.set_summary("bracket", est.bracket);
    report.set_summary("trace", &est.trace);
    report.set_summary("bracket_residual", est.bracket_residual);
    report.set_summary("monotone_residual", est.monotone_residual);
    if !est.bracket_holds(cfg.eq_tol) {
        report.push(Violation::new("bracket", json!({}), 0.0, est.bracket_residual, est.bracket_residual));
    }
    Ok(report)
}

fn axis<S: CliSpace>(
    space: &S,
    iso: Option<&str>,
    start: &Option<String>,
    lambda: f64,
    window: f64,
    nmax: usize,
    cfg: &ToleranceConfig,
) -> CliResult<ExperimentReport> {
    let iso = space.isometry(iso)?;
    let x = start_point(space, start)?;
    let solver = AxisSolverConfig {
        lambda,
        ..AxisSolverConfig::default()
    };
    solver.validate()?;
    let mut report = ExperimentReport::new("axis", &space.space_id(), cfg.seed)
        .param("iso", &iso.name)
        .param("start", to_value(&x))
        .param("lambda", lambda)
        .param("window", window);
    let result = axis_pipeline(space, &iso, &x, &solver, window, cfg.sample_count, cfg.seed)?;
    result.record(&mut report, &solver, cfg.eq_tol);
    report.absorb("sqrt", check_sqrt_bound(space, &iso, &x, nmax, cfg.eq_tol));
    report.absorb("phi", check_phi_properties(space, &iso, cfg)?);
    Ok(report)
}

fn strip(choice: &SpaceChoice, a: f64, cfg: &ToleranceConfig) -> CliResult<(ExperimentReport, String)> {
    let (mut report, norm) = match choice {
        SpaceChoice::Strip(s) => {
            let (xi, xi2) = (s.xi(), s.xi_prime().shifted(a));
            verify_flat_strip(s, &xi, &xi2, sigma_family(s, &xi, &xi2), cfg, 5.0)?
        }
        SpaceChoice::Normed(s) if s.dim() == 2 => {
            let xi = s.affine_track("xi", vec![0.0, 0.0], vec![1.0, 0.0], Interval::LINE);
            let xi2 = s.affine_track("xi'", vec![-a, 1.0], vec![1.0, 0.0], Interval::LINE);
            verify_flat_strip(s, &xi, &xi2, sigma_family(s, &xi, &xi2), cfg, 5.0)?
        }
        _ => return Err(CliError::Usage("strip needs ex22 or a normed plane".into())),
    };
    report.params.insert("a".into(), json!(a));
    report.set_summary("unit_ball", norm.unit_ball_polygon(16));
    Ok((report, norm.polygon_csv(256)))
}

fn halfplane(choice: &SpaceChoice, a: f64, b: f64, trials: usize, cfg: &ToleranceConfig) -> CliResult<ExperimentReport> {
    let SpaceChoice::Normed(s) = choice else {
        return Err(CliError::Usage("halfplane needs a normed plane".into()));
    };
    if s.dim() != 2 {
        return Err(CliError::Usage("halfplane needs a normed plane".into()));
    }
    let xi = s.affine_track("xi", vec![0.0, 0.0], vec![1.0, 0.0], Interval::LINE);
    let eta = |x: f64| s.affine_track("eta", vec![x, 0.0], vec![0.0, 1.0], Interval::HALF_LINE);
    let s_grid: Vec<f64> = (0..=20).map(|i| -5.0 + 0.5 * i as f64).collect();
    let mut report = check_halfplane_monotone(s, &xi, eta, a, b, &s_grid, cfg)?;
    report.absorb("cone", cone_formula_report(s, trials, cfg)?);
    Ok(report)
}

fn hyperbolicity<S: CliSpace>(space: &S, box_length: f64, slim: Option<(usize, usize)>, cfg: &ToleranceConfig) -> CliResult<ExperimentReport> {
    let dc = DeltaConfig::new(box_length, cfg.sample_count, cfg.seed);
    let mut report = delta_report(space, &dc)?;
    if let Some((triples, grid)) = slim {
        report.absorb("slim", slim_relation_report(space, &dc, triples, grid)?);
    }
    Ok(report)
}

fn tightspan(path: &str, cfg: &ToleranceConfig) -> CliResult<ExperimentReport> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{path}: {e}")))?;
    let d = parse_matrix(&text).map_err(|e| CliError::Usage(format!("{path}: {e}")))?;
    let delta = four_point_delta(&d, cfg.eq_tol)?;
    let span = tight_span_quadruple(&d, cfg.eq_tol)?;
    let mut report = ExperimentReport::new("tightspan", "matrix", cfg.seed).param("matrix", path);
    report.set_summary("delta", delta);
    report.set_summary("width", span.width);
    report.set_summary("span", to_value(&span));
    if span.realization_residual > cfg.eq_tol {
        report.push(Violation::new("realization", json!({}), 0.0, span.realization_residual, span.realization_residual));
    }
    if (span.width - delta).abs() > 1e-12 {
        report.push(Violation::new("width", json!({}), delta, span.width, (span.width - delta).abs()));
    }
    Ok(report)
}

fn torus<S: CliSpace>(
    action: &LatticeAction<S>,
    start: &Option<String>,
    k: &[i64],
    p: &[f64],
    nmax: u64,
    cfg: &ToleranceConfig,
) -> CliResult<(ExperimentReport, String)> {
    let x = start_point(&action.space, start)?;
    let mut tc = TorusConfig::new(k.to_vec(), p.to_vec());
    tc.n_max = nmax;
    tc.eq_tol = cfg.eq_tol;
    let (report, exp) = torus_report(action, &x, &tc, cfg.seed)?;
    Ok((report, exp.csv()))
}

fn execute(cli: &Cli) -> CliResult<Outcome> {
    let cfg = tolerance(cli)?;
    let space = load_space(&cli.space)?;
    let mut csv = None;
    let report = match &cli.command {
        Command::Axioms => on_space!(&space, s => axioms(s, &cfg)?),
        Command::Barycenter { backend, n, trials } => {
            on_space!(&space, s => barycenter_trials(s, *n, *backend, *trials, &cfg)?)
        }
        Command::TranslationLength { iso, nmax, start } => {
            on_space!(&space, s => translation(s, iso.as_deref(), *nmax, start, &cfg)?)
        }
        Command::Axis { iso, start, lambda, window, nmax } => {
            on_space!(&space, s => axis(s, iso.as_deref(), start, *lambda, *window, *nmax, &cfg)?)
        }
        Command::Strip { a, csv: path } => {
            let (r, text) = strip(&space, *a, &cfg)?;
            csv = path.clone().map(|p| (p, text));
            r
        }
        Command::Halfplane { a, b, trials } => halfplane(&space, *a, *b, *trials, &cfg)?,
        Command::Hyperbolicity { box_length, slim, triples, grid } => {
            let slim = slim.then_some((*triples, *grid));
            on_space!(&space, s => hyperbolicity(s, *box_length, slim, &cfg)?)
        }
        Command::Tightspan { matrix } => tightspan(matrix, &cfg)?,
        Command::Torus { k, p, nmax, start, csv: path } => {
            let (r, text) = match space {
                SpaceChoice::Wedge(s) => torus(&LatticeAction::ex63(s), start, k, p, *nmax, &cfg)?,
                SpaceChoice::Normed(s) if s.dim() == 2 => torus(&LatticeAction::translations(s), start, k, p, *nmax, &cfg)?,
                _ => return Err(CliError::Usage("torus needs ex63 or a normed plane".into())),
            };
            csv = path.clone().map(|p| (p, text));
            r
        }
    };
    let mut report = report;
    report.manifest = Some(manifest(cli));
    Ok(Outcome { report, csv })
}

fn manifest(cli: &Cli) -> RunManifest {
    let mut overrides = BTreeMap::new();
    if let Some(t) = cli.tol {
        overrides.insert("eq_tol".to_string(), t);
    }
    RunManifest {
        subcommand: cli.command.name().to_string(),
        space_id: cli.space.clone(),
        seed: cli.seed,
        tolerance_overrides: overrides,
        output_path: cli.report.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    }
}

fn pool(threads: Option<usize>) -> CliResult<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| CliError::Io(e.to_string()))
}

fn threads_from_env() -> CliResult<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        },
    }
}

fn parse<I, T>(argv: I) -> std::result::Result<Cli, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    Cli::try_parse_from(argv)
}

/// Parses `argv` and runs it on a pool of `threads` workers, returning the
/// report bytes without writing any file.
pub fn run_with_threads<I, T>(argv: I, threads: usize) -> CliResult<Vec<u8>>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = parse(argv).map_err(|e| CliError::Usage(e.to_string()))?;
    let outcome = pool(Some(threads))?.install(|| execute(&cli))?;
    Ok(outcome.report.to_json_bytes())
}

fn write_outputs(cli: &Cli, outcome: &Outcome) -> CliResult<()> {
    let bytes = outcome.report.to_json_bytes();
    match &cli.report {
        Some(path) => fs::write(path, &bytes).map_err(|e| CliError::Io(format!("{path}: {e}")))?,
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(&bytes)
                .map_err(|e| CliError::Io(e.to_string()))?;
        }
    }
    if let Some((path, text)) = &outcome.csv {
        fs::write(path, text).map_err(|e| CliError::Io(format!("{path}: {e}")))?;
    }
    Ok(())
}

/// Full driver: returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match parse(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = threads_from_env()
        .and_then(pool)
        .and_then(|p| p.install(|| execute(&cli)))
        .and_then(|outcome| write_outputs(&cli, &outcome).map(|_| outcome));
    match result {
        Ok(outcome) => {
            for v in &outcome.report.violations {
                eprintln!("violation: {} (residual {:e})", v.property, v.residual);
            }
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Usage(_) = e {
                eprintln!("{}", Cli::command().render_usage());
            }
            e.exit_code()
        }
    }
}
