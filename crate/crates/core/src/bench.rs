//! Sweeps over the iteration budget, rate fitting, bound checks and reports.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use crate::clock::Instant;

use crate::error::{Error, Result};
use crate::framework::{fit_rate, floor_gap, fmt_num, run, Algorithm, Cadence, EtaSpec, RateFit, RunConfig};
use crate::game::{make_random_game, make_two_layer_example, MarkovGame, MarkovPolicy};

/// Gaps at or below this are treated as exact when deciding whether to fit.
pub const EXACT_TOL: f64 = 1e-12;

pub const DEFAULT_GRID: [usize; 7] = [100, 300, 1_000, 3_000, 10_000, 30_000, 100_000];

#[derive(Debug, Clone, PartialEq)]
pub enum GameSource {
    TwoLayer,
    File(PathBuf),
    Random { seed: u64, horizon: usize, states: usize, actions: (usize, usize) },
}

impl GameSource {
    /// The game and, for the two-layer example, its prescribed starting policies.
    pub fn load(&self) -> Result<(MarkovGame, Option<(MarkovPolicy, MarkovPolicy)>)> {
        match self {
            GameSource::TwoLayer => {
                let (g, mu, nu) = make_two_layer_example();
                Ok((g, Some((mu, nu))))
            }
            GameSource::File(path) => Ok((MarkovGame::load(path)?, None)),
            GameSource::Random { seed, horizon, states, actions } => {
                Ok((make_random_game(*seed, *horizon, *states, &[actions.0, actions.1], true)?, None))
            }
        }
    }
}

/// One algorithm row of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub algorithm: Algorithm,
    pub eta: EtaSpec,
}

impl SweepEntry {
    pub fn new(algorithm: Algorithm, eta: EtaSpec) -> Self {
        Self { algorithm, eta }
    }

    pub fn with_default_eta(algorithm: Algorithm) -> Self {
        Self { algorithm, eta: algorithm.default_eta() }
    }

    /// `algorithm` or `algorithm[eta]`, unique within a plan.
    pub fn label(&self) -> String {
        if self.eta == self.algorithm.default_eta() {
            self.algorithm.to_string()
        } else {
            format!("{}[{}]", self.algorithm, self.eta)
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepPlan {
    pub game: GameSource,
    pub entries: Vec<SweepEntry>,
    pub grid: Vec<usize>,
    pub out_dir: Option<PathBuf>,
    /// Worker count; 0 uses every core.
    pub threads: usize,
    /// Start from (and regularize toward) the game's prescribed policies when it has them.
    pub use_init: bool,
    /// Write wall-clock seconds; off gives byte-identical reruns.
    pub record_timing: bool,
}

impl SweepPlan {
    pub fn new(game: GameSource, entries: Vec<SweepEntry>, grid: Vec<usize>) -> Self {
        Self { game, entries, grid, out_dir: None, threads: 0, use_init: true, record_timing: true }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() || self.grid[0] == 0 {
            return Err(Error::Config("the T grid must be non-empty and positive".into()));
        }
        if self.grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("the T grid must be strictly increasing".into()));
        }
        let mut labels: Vec<String> = self.entries.iter().map(SweepEntry::label).collect();
        labels.sort();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("duplicate algorithm entry in sweep".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub label: String,
    pub algorithm: Algorithm,
    pub iters: usize,
    pub eta: f64,
    /// Final gap, or the error message of a failed run.
    pub gap: std::result::Result<f64, String>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FitOutcome {
    Fitted(RateFit),
    Skipped(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitRow {
    pub label: String,
    pub algorithm: Algorithm,
    pub outcome: FitOutcome,
}

impl FitRow {
    pub fn exponent(&self) -> Option<f64> {
        match &self.outcome {
            FitOutcome::Fitted(f) => Some(f.exponent),
            FitOutcome::Skipped(_) => None,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(&self.outcome, FitOutcome::Skipped(r) if r == "exact")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub horizon: usize,
    pub actions: (usize, usize),
    pub cells: Vec<SweepCell>,
    pub fits: Vec<FitRow>,
    pub record_timing: bool,
}

impl SweepReport {
    pub fn empty() -> Self {
        Self { horizon: 0, actions: (0, 0), cells: Vec::new(), fits: Vec::new(), record_timing: false }
    }

    pub fn cells_for<'a>(&'a self, label: &'a str) -> impl Iterator<Item = &'a SweepCell> + 'a {
        self.cells.iter().filter(move |c| c.label == label)
    }

    pub fn fit_for(&self, label: &str) -> Option<&FitRow> {
        self.fits.iter().find(|f| f.label == label)
    }
}

fn run_cell(game: &MarkovGame, init: &Option<(MarkovPolicy, MarkovPolicy)>, entry: &SweepEntry, iters: usize) -> SweepCell {
    let start = Instant::now();
    let mut config = RunConfig::new(entry.algorithm, game.horizon(), iters);
    config.eta = entry.eta;
    config.cadence = Cadence::FinalOnly;
    if let Some(pair) = init {
        config.init = Some(pair.clone());
        config.kl_base_point = true;
    }
    let outcome = run(game, &config);
    SweepCell {
        label: entry.label(),
        algorithm: entry.algorithm,
        iters,
        eta: config.eta_value(game),
        gap: outcome.map(|o| o.final_gap()).map_err(|e| e.to_string()),
        seconds: start.elapsed().as_secs_f64(),
    }
}

#[cfg(feature = "parallel")]
fn run_cells(
    game: &MarkovGame,
    init: &Option<(MarkovPolicy, MarkovPolicy)>,
    jobs: &[(&SweepEntry, usize)],
    threads: usize,
) -> Result<Vec<SweepCell>> {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| jobs.par_iter().map(|(e, t)| run_cell(game, init, e, *t)).collect()))
}

#[cfg(not(feature = "parallel"))]
fn run_cells(
    game: &MarkovGame,
    init: &Option<(MarkovPolicy, MarkovPolicy)>,
    jobs: &[(&SweepEntry, usize)],
    _threads: usize,
) -> Result<Vec<SweepCell>> {
    Ok(jobs.iter().map(|(e, t)| run_cell(game, init, e, *t)).collect())
}

/// Fits `log gap ~ log T` over the successful cells of one row.
pub fn fit_cells<'a>(cells: impl IntoIterator<Item = &'a SweepCell>) -> FitOutcome {
    let ok: Vec<(f64, f64)> = cells.into_iter().filter_map(|c| c.gap.as_ref().ok().map(|g| (c.iters as f64, *g))).collect();
    if ok.len() < 3 {
        return FitOutcome::Skipped(format!("{} successful points", ok.len()));
    }
    if ok.iter().all(|(_, g)| *g <= EXACT_TOL) {
        return FitOutcome::Skipped("exact".into());
    }
    let pts: Vec<(f64, f64)> = ok.into_iter().map(|(t, g)| (t, floor_gap(g))).collect();
    match fit_rate(&pts) {
        Ok(f) => FitOutcome::Fitted(f),
        Err(e) => FitOutcome::Skipped(e.to_string()),
    }
}

/// Runs one independent run per `(entry, T)`; failures are kept per cell.
pub fn run_sweep(plan: &SweepPlan) -> Result<SweepReport> {
    plan.validate()?;
    let (game, init) = plan.game.load()?;
    let (a, b) = (game.action_counts()[0], game.action_counts()[1]);
    let init = if plan.use_init { init } else { None };
    let jobs: Vec<(&SweepEntry, usize)> =
        plan.entries.iter().flat_map(|e| plan.grid.iter().map(move |&t| (e, t))).collect();
    let threads = if plan.threads == 0 { std::thread::available_parallelism().map_or(1, |n| n.get()) } else { plan.threads };
    let cells = run_cells(&game, &init, &jobs, threads)?;
    let fits = plan
        .entries
        .iter()
        .map(|e| {
            let label = e.label();
            let outcome = fit_cells(cells.iter().filter(|c| c.label == label));
            FitRow { label, algorithm: e.algorithm, outcome }
        })
        .collect();
    let report = SweepReport { horizon: game.horizon(), actions: (a, b), cells, fits, record_timing: plan.record_timing };
    if let Some(dir) = &plan.out_dir {
        emit_report(&report, &check_bounds(&report, &BoundSpec::standard()), dir)?;
    }
    Ok(report)
}

/// Closed-form gap guarantee for one algorithm.
#[derive(Debug, Clone, Copy)]
pub struct BoundSpec {
    pub algorithm: Algorithm,
    pub name: &'static str,
    /// The step size the guarantee is stated for.
    pub eta: EtaSpec,
    bound: fn(f64, f64, f64, f64) -> f64,
}

impl BoundSpec {
    /// The four guarantees with explicit constants.
    pub fn standard() -> Vec<BoundSpec> {
        vec![
            BoundSpec {
                algorithm: Algorithm::Ftrl,
                name: "82*log(A v B)*log(T)^2*H^3.5/sqrt(T)",
                eta: EtaSpec::NashV,
                bound: |t, h, a, b| 82.0 * a.max(b).ln() * t.ln().powi(2) * h.powf(3.5) / t.sqrt(),
            },
            BoundSpec {
                algorithm: Algorithm::Gda,
                name: "108*log(T)^2*sqrt(A v B)*H^3.5/sqrt(T)",
                eta: EtaSpec::Gda,
                bound: |t, h, a, b| 108.0 * t.ln().powi(2) * a.max(b).sqrt() * h.powf(3.5) / t.sqrt(),
            },
            BoundSpec {
                algorithm: Algorithm::NashQ,
                name: "112*log(T)^2*H^4/T",
                eta: EtaSpec::Const(0.0),
                bound: |t, h, _, _| 112.0 * t.ln().powi(2) * h.powi(4) / t,
            },
            BoundSpec {
                algorithm: Algorithm::ModOftrl,
                name: "468*H^4*log(AB)*(log(T)+1)^2/T",
                eta: EtaSpec::ModOftrl,
                bound: |t, h, a, b| 468.0 * h.powi(4) * (a * b).ln() * (t.ln() + 1.0).powi(2) / t,
            },
        ]
    }

    pub fn value(&self, iters: usize, horizon: usize, a: usize, b: usize) -> f64 {
        (self.bound)(iters as f64, horizon as f64, a as f64, b as f64)
    }

    /// Whether a sweep row runs under the conditions of this guarantee.
    pub fn applies_to(&self, entry_algorithm: Algorithm, eta: EtaSpec) -> bool {
        entry_algorithm == self.algorithm && (self.algorithm == Algorithm::NashQ || eta == self.eta)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundRow {
    pub label: String,
    pub bound_name: &'static str,
    pub iters: usize,
    pub gap: Option<f64>,
    pub bound: f64,
    pub pass: bool,
}

/// Compares every matching cell with its guarantee; failed runs fail the check.
pub fn check_bounds(report: &SweepReport, specs: &[BoundSpec]) -> Vec<BoundRow> {
    let mut rows = Vec::new();
    for fit in &report.fits {
        let eta = parse_label_eta(&fit.label, fit.algorithm);
        for spec in specs.iter().filter(|s| s.applies_to(fit.algorithm, eta)) {
            for cell in report.cells_for(&fit.label) {
                let bound = spec.value(cell.iters, report.horizon, report.actions.0, report.actions.1);
                let gap = cell.gap.as_ref().ok().copied();
                rows.push(BoundRow {
                    label: fit.label.clone(),
                    bound_name: spec.name,
                    iters: cell.iters,
                    gap,
                    bound,
                    pass: gap.is_some_and(|g| g <= bound),
                });
            }
        }
    }
    rows
}

fn parse_label_eta(label: &str, algorithm: Algorithm) -> EtaSpec {
    label
        .strip_prefix(algorithm.name())
        .and_then(|rest| rest.strip_prefix('['))
        .and_then(|rest| rest.strip_suffix(']'))
        .and_then(|eta| eta.parse().ok())
        .unwrap_or_else(|| algorithm.default_eta())
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

pub fn summary_csv(report: &SweepReport) -> String {
    let mut out = String::from("algorithm,T,eta,gap,seconds\n");
    for c in &report.cells {
        let gap = match &c.gap {
            Ok(g) => fmt_num(Some(*g)),
            Err(_) => "error".into(),
        };
        let secs = if report.record_timing { fmt_num(Some(c.seconds)) } else { String::new() };
        let _ = writeln!(out, "{},{},{},{},{}", csv_field(&c.label), c.iters, fmt_num(Some(c.eta)), gap, secs);
    }
    out
}

pub fn fits_csv(report: &SweepReport) -> String {
    let mut out = String::from("algorithm,exponent,intercept,r2\n");
    for f in &report.fits {
        let line = match &f.outcome {
            FitOutcome::Fitted(r) => format!(
                "{},{},{},{}",
                csv_field(&f.label),
                fmt_num(Some(r.exponent)),
                fmt_num(Some(r.intercept)),
                fmt_num(Some(r.r_squared))
            ),
            FitOutcome::Skipped(reason) => format!("{},{},,", csv_field(&f.label), csv_field(reason)),
        };
        out.push_str(&line);
        out.push('\n');
    }
    out
}

pub fn bounds_csv(rows: &[BoundRow]) -> String {
    let mut out = String::from("algorithm,bound,T,gap,value,pass\n");
    for r in rows {
        let gap = r.gap.map_or_else(|| "error".to_string(), |g| fmt_num(Some(g)));
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            csv_field(&r.label),
            csv_field(r.bound_name),
            r.iters,
            gap,
            fmt_num(Some(r.bound)),
            if r.pass { "pass" } else { "fail" }
        );
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// Log-log scatter of the final gaps with one fitted line per row.
/// Returns `None` when there is nothing to plot.
pub fn gap_svg(report: &SweepReport) -> Option<String> {
    let pts: Vec<(usize, f64, f64)> = report
        .fits
        .iter()
        .enumerate()
        .flat_map(|(k, f)| {
            report
                .cells_for(&f.label)
                .filter_map(move |c| c.gap.as_ref().ok().map(|g| (k, (c.iters as f64).log10(), floor_gap(*g).log10())))
        })
        .collect();
    if pts.is_empty() {
        return None;
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(_, x, y) in &pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let span_x = if x1 > x0 { x1 - x0 } else { 1.0 };
    let span_y = if y1 > y0 { y1 - y0 } else { 1.0 };
    let (vx, vw) = (x0 - 0.1 * span_x, 1.2 * span_x);
    let (vy, vh) = (-(y1 + 0.1 * span_y), 1.2 * span_y);
    let stroke = vw.max(vh) / 400.0;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="640" height="480" viewBox="{vx} {vy} {vw} {vh}" preserveAspectRatio="none">"#
    );
    let _ = writeln!(svg, "<title>final gap vs T (log10-log10)</title>");
    // axes with decade ticks; y is negated so larger gaps plot higher
    let _ = writeln!(
        svg,
        r##"<g stroke="#444" stroke-width="{stroke}" fill="none"><line x1="{vx}" y1="{}" x2="{}" y2="{}"/><line x1="{vx}" y1="{vy}" x2="{vx}" y2="{}"/>"##,
        vy + vh,
        vx + vw,
        vy + vh,
        vy + vh
    );
    for d in (x0.floor() as i64)..=(x1.ceil() as i64) {
        let x = d as f64;
        if x >= vx && x <= vx + vw {
            let _ = writeln!(svg, r#"<line x1="{x}" y1="{}" x2="{x}" y2="{}"/>"#, vy + vh, vy + vh - 0.02 * vh);
        }
    }
    for d in (y0.floor() as i64)..=(y1.ceil() as i64) {
        let y = -(d as f64);
        if y >= vy && y <= vy + vh {
            let _ = writeln!(svg, r#"<line x1="{vx}" y1="{y}" x2="{}" y2="{y}"/>"#, vx + 0.02 * vw);
        }
    }
    svg.push_str("</g>\n");
    for (k, f) in report.fits.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let _ = writeln!(svg, r#"<g fill="{color}" stroke="{color}"><title>{}</title>"#, xml_escape(&f.label));
        for &(_, x, y) in pts.iter().filter(|p| p.0 == k) {
            let _ = writeln!(svg, r#"<circle cx="{x}" cy="{}" r="{}"/>"#, -y, 3.0 * stroke);
        }
        if let FitOutcome::Fitted(r) = &f.outcome {
            let line = |x: f64| -(r.exponent * x + r.intercept / std::f64::consts::LN_10);
            let _ = writeln!(
                svg,
                r#"<line x1="{x0}" y1="{}" x2="{x1}" y2="{}" stroke-width="{stroke}"/>"#,
                line(x0),
                line(x1)
            );
        }
        svg.push_str("</g>\n");
    }
    svg.push_str("</svg>\n");
    Some(svg)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes `summary.csv`, `fits.csv`, `bounds.csv` and, when there is data, `gaps.svg`.
pub fn emit_report(report: &SweepReport, bounds: &[BoundRow], dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_file(dir, "summary.csv", &summary_csv(report))?;
    write_file(dir, "fits.csv", &fits_csv(report))?;
    write_file(dir, "bounds.csv", &bounds_csv(bounds))?;
    if let Some(svg) = gap_svg(report) {
        write_file(dir, "gaps.svg", &svg)?;
    }
    Ok(())
}
