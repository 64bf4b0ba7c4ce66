//! Experiment orchestration behind the `gen`, `run`, `audit` and `report`
//! subcommands.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::audit::{audit_suite, AuditReport};
use crate::dataset::{format_f64, GroupDataset};
use crate::error::{CgdError, Result};
use crate::metrics::{evaluate, solution_variance, EvalReport};
use crate::model::ModelParams;
use crate::reweight::{Rule, TrainerConfig};
use crate::synth::Setting;
use crate::train::{sweep, RunTrace, TRACE_CSV_HEADER};

pub const RESULTS_FILE: &str = "results.json";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const AUDIT_FILE: &str = "audit.json";
pub const SUMMARY_HEADER: &str = "setting,rule,worst_loss_mean,worst_loss_std,variance";

/// Step-size grid searched for the weight update.
pub const DEFAULT_ETA_ALPHA_GRID: [f64; 4] = [1.0, 0.1, 0.01, 0.001];

/// Process exit code for an error: 2 for usage and config problems, 1 otherwise.
pub fn exit_code(err: &CgdError) -> i32 {
    match err {
        CgdError::InvalidConfig(_) | CgdError::Parse { .. } | CgdError::InvalidRatio(_) => 2,
        _ => 1,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperGrid {
    pub eta_alpha: Vec<f64>,
    pub adjustment_c: Vec<f64>,
    pub p_exponent: Vec<f64>,
}

impl Default for HyperGrid {
    fn default() -> Self {
        Self {
            eta_alpha: DEFAULT_ETA_ALPHA_GRID.to_vec(),
            adjustment_c: vec![0.0],
            p_exponent: vec![0.5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerDefaults {
    pub eta: f64,
    pub epochs: usize,
    pub weight_decay: f64,
}

impl Default for TrainerDefaults {
    fn default() -> Self {
        let d = TrainerConfig::default();
        Self {
            eta: d.eta,
            epochs: d.epochs,
            weight_decay: d.weight_decay,
        }
    }
}

/// One point of the hyper-grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub eta_alpha: f64,
    pub adjustment_c: f64,
    pub p_exponent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Single setting; merged with `settings`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub setting: Option<Setting>,
    #[serde(default)]
    pub settings: Vec<Setting>,
    #[serde(default)]
    pub minority_ratio: Option<f64>,
    pub rules: Vec<Rule>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub grid: HyperGrid,
    #[serde(default)]
    pub trainer: TrainerDefaults,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Parses and validates; errors name the offending field.
    pub fn from_json_str(text: &str, origin: &Path) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CgdError::parse(origin, format!("{path}: {}", e.into_inner()))
        })?;
        config.validate().map_err(|e| match e {
            CgdError::InvalidConfig(m) => CgdError::parse(origin, m),
            other => other,
        })?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CgdError::io(path, e))?;
        Self::from_json_str(&text, path)
    }

    pub fn all_settings(&self) -> Vec<Setting> {
        let mut out: Vec<Setting> = self.setting.into_iter().collect();
        for s in &self.settings {
            if !out.contains(s) {
                out.push(*s);
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(CgdError::InvalidConfig(m.to_string()));
        if self.all_settings().is_empty() {
            return bad("settings: at least one setting is required");
        }
        if self.rules.is_empty() {
            return bad("rules: must be non-empty");
        }
        if self.seeds.is_empty() {
            return bad("seeds: must be non-empty");
        }
        for (name, axis) in [
            ("grid.eta_alpha", &self.grid.eta_alpha),
            ("grid.adjustment_c", &self.grid.adjustment_c),
            ("grid.p_exponent", &self.grid.p_exponent),
        ] {
            if axis.is_empty() {
                return bad(&format!("{name}: must be non-empty"));
            }
            if let Some(i) = axis.iter().position(|v| !v.is_finite()) {
                return bad(&format!("{name}[{i}]: must be finite"));
            }
        }
        if let Some(r) = self.minority_ratio {
            if !(r >= 1.0 && r.is_finite()) {
                return bad("minority_ratio: must be a finite value >= 1");
            }
        }
        for point in self.grid_points() {
            self.trainer_config(Rule::Cgd, point, 0)
                .validate()
                .map_err(|e| CgdError::InvalidConfig(format!("trainer/grid: {e}")))?;
        }
        Ok(())
    }

    /// Full cartesian grid in `eta_alpha`, `adjustment_c`, `p_exponent` order.
    pub fn grid_points(&self) -> Vec<GridPoint> {
        let g = &self.grid;
        let mut out = Vec::new();
        for &eta_alpha in &g.eta_alpha {
            for &adjustment_c in &g.adjustment_c {
                for &p_exponent in &g.p_exponent {
                    out.push(GridPoint {
                        eta_alpha,
                        adjustment_c,
                        p_exponent,
                    });
                }
            }
        }
        out
    }

    /// Grid restricted to the axes `rule` reads; unused axes are pinned to
    /// their first value.
    pub fn rule_grid(&self, rule: Rule) -> Vec<GridPoint> {
        let g = &self.grid;
        let axis = |used: bool, values: &[f64]| {
            if used {
                values.to_vec()
            } else {
                values[..1].to_vec()
            }
        };
        let eta_alpha = axis(rule.is_exponentiated(), &g.eta_alpha);
        let adjustment_c = axis(rule != Rule::Erm, &g.adjustment_c);
        let p_exponent = axis(rule == Rule::Cgd, &g.p_exponent);
        let mut out = Vec::new();
        for &eta_alpha in &eta_alpha {
            for &adjustment_c in &adjustment_c {
                for &p_exponent in &p_exponent {
                    out.push(GridPoint {
                        eta_alpha,
                        adjustment_c,
                        p_exponent,
                    });
                }
            }
        }
        out
    }

    pub fn trainer_config(&self, rule: Rule, point: GridPoint, seed: u64) -> TrainerConfig {
        TrainerConfig {
            eta: self.trainer.eta,
            eta_alpha: point.eta_alpha,
            p_exponent: point.p_exponent,
            adjustment_c: point.adjustment_c,
            epochs: self.trainer.epochs,
            weight_decay: self.trainer.weight_decay,
            rule,
            seed,
            ..TrainerConfig::default()
        }
    }
}

/// Test-set evaluation of one selected run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub setting: Setting,
    pub rule: Rule,
    pub seed: u64,
    pub grid_index: usize,
    pub config: TrainerConfig,
    pub selected_epoch: usize,
    pub final_alpha: Vec<f64>,
    pub selected_params: ModelParams,
    pub final_params: ModelParams,
    pub test: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridScore {
    pub point: GridPoint,
    /// Mean over successful seeds of the best validation worst-group accuracy.
    pub mean_val_worst_accuracy: Option<f64>,
    pub completed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub setting: Setting,
    pub rule: Rule,
    pub points: Vec<GridScore>,
    pub selected: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub setting: Setting,
    pub rule: Rule,
    pub runs: usize,
    pub worst_loss_mean: f64,
    pub worst_loss_std: Option<f64>,
    pub worst_accuracy_mean: f64,
    pub worst_accuracy_std: Option<f64>,
    pub average_accuracy_mean: f64,
    pub solution_variance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub setting: Setting,
    pub rule: Rule,
    pub seed: u64,
    pub grid_index: Option<usize>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsFile {
    pub config: ExperimentConfig,
    pub runs: Vec<RunRecord>,
    pub grid: Vec<GridSummary>,
    pub aggregates: Vec<Aggregate>,
    pub failures: Vec<Failure>,
}

impl ResultsFile {
    pub fn aggregate(&self, setting: Setting, rule: Rule) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.setting == setting && a.rule == rule)
    }

    pub fn runs_for(&self, setting: Setting, rule: Rule) -> impl Iterator<Item = &RunRecord> {
        self.runs
            .iter()
            .filter(move |r| r.setting == setting && r.rule == rule)
    }
}

/// Everything produced by one `run`: the results plus trace CSV bodies keyed
/// by file name.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub results: ResultsFile,
    pub traces: BTreeMap<String, String>,
}

impl RunOutput {
    pub fn results_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.results).expect("results serialize");
        s.push('\n');
        s
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| CgdError::io(dir, e))?;
        for (name, body) in &self.traces {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| CgdError::io(&path, e))?;
        }
        let path = dir.join(RESULTS_FILE);
        fs::write(&path, self.results_json()).map_err(|e| CgdError::io(&path, e))
    }
}

pub fn trace_file_name(setting: Setting, rule: Rule) -> String {
    format!("trace_{setting}_{rule}.csv")
}

fn mean_std(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.len() > 1)
        .then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    (mean, std)
}

/// Index of the best score; ties go to the earliest point.
fn select_point(points: &[GridScore]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, p) in points.iter().enumerate() {
        if let Some(score) = p.mean_val_worst_accuracy {
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((i, score));
            }
        }
    }
    best.map(|(i, _)| i)
}

/// Runs every (setting, rule, grid point, seed), keeps the grid point with
/// the best mean validation worst-group accuracy per (setting, rule), and
/// evaluates those runs on test.
pub fn run_experiment(config: &ExperimentConfig, jobs: Option<usize>) -> Result<RunOutput> {
    config.validate()?;
    let mut results = ResultsFile {
        config: config.clone(),
        runs: Vec::new(),
        grid: Vec::new(),
        aggregates: Vec::new(),
        failures: Vec::new(),
    };
    let mut traces = BTreeMap::new();

    for setting in config.all_settings() {
        let generate = |seed| setting.generate(seed, config.minority_ratio);
        for &rule in &config.rules {
            let points = config.rule_grid(rule);
            let configs: Vec<TrainerConfig> = points
                .iter()
                .map(|&p| config.trainer_config(rule, p, 0))
                .collect();
            let cells = sweep(generate, &configs, &config.seeds, jobs)?;

            let mut by_point: Vec<Vec<RunTrace>> = vec![Vec::new(); points.len()];
            for cell in cells {
                match cell.outcome {
                    Ok(trace) => by_point[cell.config_index].push(trace),
                    Err(error) => results.failures.push(Failure {
                        setting,
                        rule,
                        seed: cell.seed,
                        grid_index: Some(cell.config_index),
                        error,
                    }),
                }
            }
            let scores: Vec<GridScore> = points
                .iter()
                .zip(&by_point)
                .map(|(&point, runs)| GridScore {
                    point,
                    mean_val_worst_accuracy: (!runs.is_empty()).then(|| {
                        runs.iter()
                            .map(|t| t.selected_record().val_worst_accuracy)
                            .sum::<f64>()
                            / runs.len() as f64
                    }),
                    completed: runs.len(),
                })
                .collect();
            let selected = select_point(&scores);
            results.grid.push(GridSummary {
                setting,
                rule,
                points: scores,
                selected,
            });
            let Some(index) = selected else { continue };

            let mut body = String::from(TRACE_CSV_HEADER);
            body.push('\n');
            let mut records = Vec::new();
            for trace in &by_point[index] {
                let dataset = generate(trace.seed)?;
                trace.write_csv_rows(&format!("{setting}/{rule}/{}", trace.seed), &mut body);
                records.push(RunRecord {
                    setting,
                    rule,
                    seed: trace.seed,
                    grid_index: index,
                    config: trace.config.clone(),
                    selected_epoch: trace.selected_epoch,
                    final_alpha: trace.final_alpha().as_slice().to_vec(),
                    selected_params: trace.selected_params.clone(),
                    final_params: trace.final_params.clone(),
                    test: evaluate(&trace.selected_params, &dataset.test)?,
                });
            }
            traces.insert(trace_file_name(setting, rule), body);
            results.aggregates.push(aggregate(setting, rule, &records));
            results.runs.extend(records);
        }
    }
    Ok(RunOutput { results, traces })
}

fn aggregate(setting: Setting, rule: Rule, records: &[RunRecord]) -> Aggregate {
    let worst_loss: Vec<f64> = records.iter().map(|r| r.test.worst_group_loss).collect();
    let worst_acc: Vec<f64> = records
        .iter()
        .map(|r| r.test.worst_group_accuracy)
        .collect();
    let avg_acc: Vec<f64> = records.iter().map(|r| r.test.average_accuracy).collect();
    let (worst_loss_mean, worst_loss_std) = mean_std(&worst_loss);
    let (worst_accuracy_mean, worst_accuracy_std) = mean_std(&worst_acc);
    let params: Vec<ModelParams> = records.iter().map(|r| r.selected_params.clone()).collect();
    Aggregate {
        setting,
        rule,
        runs: records.len(),
        worst_loss_mean,
        worst_loss_std,
        worst_accuracy_mean,
        worst_accuracy_std,
        average_accuracy_mean: mean_std(&avg_acc).0,
        solution_variance: solution_variance(&params).ok(),
    }
}

/// `run` subcommand: loads the config, runs it, writes traces and results
/// under `out` (or the config's `out_dir`).
pub fn cmd_run(config_path: &Path, out: Option<&Path>, jobs: Option<usize>) -> Result<RunOutput> {
    let config = ExperimentConfig::load(config_path)?;
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| config.out_dir.clone())
        .ok_or_else(|| {
            CgdError::InvalidConfig("no output directory: pass --out or set out_dir".into())
        })?;
    let output = run_experiment(&config, jobs)?;
    output.write(&dir)?;
    Ok(output)
}

/// `gen` subcommand.
pub fn cmd_gen(
    setting: Setting,
    seed: u64,
    minority_ratio: Option<f64>,
    out_path: &Path,
) -> Result<GroupDataset> {
    let dataset = setting.generate(seed, minority_ratio)?;
    if let Some(parent) = out_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CgdError::io(parent, e))?;
    }
    dataset.write_csv(out_path)?;
    Ok(dataset)
}

/// `audit` subcommand: the full proof audit, written to `out/audit.json`.
pub fn cmd_audit(
    horizons: &[usize],
    seeds: &[u64],
    out: &Path,
    jobs: Option<usize>,
) -> Result<AuditReport> {
    if horizons.is_empty() || seeds.is_empty() {
        return Err(CgdError::InvalidConfig(
            "audit needs at least one horizon and one seed".into(),
        ));
    }
    let body = || audit_suite(horizons, seeds, &[2, 3, 5], &[2, 4]);
    let report = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| CgdError::InvalidConfig(format!("thread pool: {e}")))?
            .install(body)?,
        None => body()?,
    };
    fs::create_dir_all(out).map_err(|e| CgdError::io(out, e))?;
    let path = out.join(AUDIT_FILE);
    let mut text = serde_json::to_string_pretty(&report).expect("audit report serializes");
    text.push('\n');
    fs::write(&path, text).map_err(|e| CgdError::io(&path, e))?;
    Ok(report)
}

/// Per-group alpha curves of one (setting, rule), averaged over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaCurves {
    pub setting: String,
    pub rule: String,
    /// `curves[group][epoch - 1]`.
    pub curves: Vec<Vec<f64>>,
}

/// Per group, per epoch: running (sum, count) of alpha.
type GroupSums = Vec<Vec<(f64, usize)>>;

/// Parses a trace CSV into per-(setting, rule) mean alpha curves.
pub fn parse_trace(text: &str, origin: &Path) -> Result<Vec<AlphaCurves>> {
    let mut lines = text.lines();
    if lines.next() != Some(TRACE_CSV_HEADER) {
        return Err(CgdError::parse(origin, "unexpected trace header"));
    }
    let mut acc: BTreeMap<(String, String), GroupSums> = BTreeMap::new();
    for (n, line) in lines.enumerate() {
        let bad = |m: &str| CgdError::parse(origin, format!("line {}: {m}", n + 2));
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 10 {
            return Err(bad("expected 10 columns"));
        }
        let setting = cols[0].split('/').next().unwrap_or_default().to_string();
        let epoch: usize = cols[3].parse().map_err(|_| bad("bad epoch"))?;
        let group: usize = cols[4].parse().map_err(|_| bad("bad group"))?;
        let alpha: f64 = cols[5].parse().map_err(|_| bad("bad alpha"))?;
        if epoch == 0 || !alpha.is_finite() {
            return Err(bad("epoch must be >= 1 and alpha finite"));
        }
        let groups = acc.entry((setting, cols[2].to_string())).or_default();
        if groups.len() <= group {
            groups.resize(group + 1, Vec::new());
        }
        let series = &mut groups[group];
        if series.len() < epoch {
            series.resize(epoch, (0.0, 0));
        }
        series[epoch - 1].0 += alpha;
        series[epoch - 1].1 += 1;
    }
    Ok(acc
        .into_iter()
        .map(|((setting, rule), groups)| AlphaCurves {
            setting,
            rule,
            curves: groups
                .into_iter()
                .map(|s| {
                    s.into_iter()
                        .map(|(sum, c)| if c == 0 { f64::NAN } else { sum / c as f64 })
                        .collect()
                })
                .collect(),
        })
        .collect())
}

const SVG_WIDTH: f64 = 800.0;
const SVG_HEIGHT: f64 = 500.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// Line chart of alpha against epoch, one polyline per group.
pub fn render_alpha_svg(curves: &AlphaCurves) -> String {
    let (left, right, top, bottom) = (60.0, 130.0, 40.0, 50.0);
    let w = SVG_WIDTH - left - right;
    let h = SVG_HEIGHT - top - bottom;
    let epochs = curves.curves.iter().map(Vec::len).max().unwrap_or(0);
    let x_of = |e: usize| {
        left + if epochs > 1 {
            w * e as f64 / (epochs - 1) as f64
        } else {
            0.0
        }
    };
    let y_of = |a: f64| top + h * (1.0 - a.clamp(0.0, 1.0));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 800 500" width="800" height="500">"#
    );
    let _ = writeln!(s, r#"<rect width="800" height="500" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{} / {}: group weight by epoch</text>"#,
        left + w / 2.0,
        curves.setting,
        curves.rule
    );
    let _ = writeln!(
        s,
        r#"<path d="M{left} {top} V{} H{}" fill="none" stroke="black"/>"#,
        top + h,
        left + w
    );
    for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let y = y_of(tick);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="end">{tick}</text>"#,
            left - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">epoch (1 to {epochs})</text>"#,
        left + w / 2.0,
        SVG_HEIGHT - 15.0
    );
    for (g, series) in curves.curves.iter().enumerate() {
        let color = PALETTE[g % PALETTE.len()];
        let points: Vec<String> = series
            .iter()
            .enumerate()
            .filter(|(_, a)| a.is_finite())
            .map(|(e, &a)| format!("{:.2},{:.2}", x_of(e), y_of(a)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            points.join(" ")
        );
        let ly = top + 20.0 * g as f64 + 10.0;
        let lx = left + w + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            lx + 20.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12">group {g}</text>"#,
            lx + 26.0,
            ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReportOutcome {
    pub summary_rows: usize,
    pub charts: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

fn opt(v: Option<f64>) -> String {
    v.map(format_f64).unwrap_or_default()
}

/// `report` subcommand: `summary.csv` from every results JSON in `dir` and
/// one SVG per (setting, rule) found in trace CSVs. Unreadable inputs become
/// warnings.
pub fn cmd_report(dir: &Path) -> Result<ReportOutcome> {
    let mut outcome = ReportOutcome::default();
    let mut entries: Vec<PathBuf> = match fs::read_dir(dir) {
        Ok(rd) => rd.filter_map(|e| e.ok().map(|e| e.path())).collect(),
        Err(e) => return Err(CgdError::io(dir, e)),
    };
    entries.sort();

    let mut summary = format!("{SUMMARY_HEADER}\n");
    let mut curves = Vec::new();
    for path in &entries {
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default();
        let ext = path.extension().and_then(|e| e.to_str());
        if ext == Some("json") && name != AUDIT_FILE {
            let parsed = fs::read_to_string(path)
                .map_err(|e| e.to_string())
                .and_then(|t| serde_json::from_str::<ResultsFile>(&t).map_err(|e| e.to_string()));
            match parsed {
                Ok(results) => {
                    for a in &results.aggregates {
                        let _ = writeln!(
                            summary,
                            "{},{},{},{},{}",
                            a.setting,
                            a.rule,
                            format_f64(a.worst_loss_mean),
                            opt(a.worst_loss_std),
                            opt(a.solution_variance)
                        );
                        outcome.summary_rows += 1;
                    }
                }
                Err(e) => outcome.warnings.push(format!("{}: {e}", path.display())),
            }
        } else if ext == Some("csv") && name.starts_with("trace_") {
            match fs::read_to_string(path)
                .map_err(|e| CgdError::io(path, e))
                .and_then(|t| parse_trace(&t, path))
            {
                Ok(c) => curves.extend(c),
                Err(e) => outcome.warnings.push(e.to_string()),
            }
        }
    }
    if outcome.summary_rows == 0 {
        outcome
            .warnings
            .push(format!("{}: no results JSON found", dir.display()));
    }
    let path = dir.join(SUMMARY_FILE);
    fs::write(&path, summary).map_err(|e| CgdError::io(&path, e))?;
    for c in &curves {
        let path = dir.join(format!("alpha_{}_{}.svg", c.setting, c.rule));
        fs::write(&path, render_alpha_svg(c)).map_err(|e| CgdError::io(&path, e))?;
        outcome.charts.push(path);
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::from_json_str(text, Path::new("cfg.json"))
    }

    #[test]
    fn config_defaults_and_merge() {
        let c = parse(r#"{"setting": "noise_simple", "settings": ["noise_simple", "rotation_simple"], "rules": ["CGD"], "seeds": [0, 1]}"#).unwrap();
        assert_eq!(
            c.all_settings(),
            vec![Setting::NoiseSimple, Setting::RotationSimple]
        );
        assert_eq!(c.grid.eta_alpha, DEFAULT_ETA_ALPHA_GRID.to_vec());
        assert_eq!(c.trainer.epochs, 400);
        assert_eq!(c.grid_points().len(), 4);
    }

    #[test]
    fn config_errors_name_fields() {
        let e = parse(r#"{"settings": ["noise_simple"], "rules": [], "seeds": [0]}"#).unwrap_err();
        assert!(e.to_string().contains("rules"), "{e}");
        let e = parse(r#"{"settings": ["noise_simple"], "rules": ["CGD"], "seeds": [0], "grid": {"eta_alpha": [0.1, "x"]}}"#).unwrap_err();
        assert!(e.to_string().contains("grid.eta_alpha[1]"), "{e}");
        let e = parse(r#"{"settings": ["nope"], "rules": ["CGD"], "seeds": [0]}"#).unwrap_err();
        assert!(e.to_string().contains("settings[0]"), "{e}");
        let e =
            parse(r#"{"settings": ["noise_simple"], "rules": ["CGD"], "seeds": [0], "extra": 1}"#)
                .unwrap_err();
        assert!(e.to_string().contains("extra"), "{e}");
        assert_eq!(exit_code(&e), 2);
    }

    #[test]
    fn rule_grid_collapses_unused_axes() {
        let c = parse(r#"{"settings": ["noise_simple"], "rules": ["CGD"], "seeds": [0], "grid": {"eta_alpha": [1, 0.1], "adjustment_c": [0, 1], "p_exponent": [0.5, 1]}}"#).unwrap();
        assert_eq!(c.rule_grid(Rule::Cgd).len(), 8);
        assert_eq!(c.rule_grid(Rule::GroupDroEg).len(), 4);
        assert_eq!(c.rule_grid(Rule::ErmUw).len(), 2);
        assert_eq!(c.rule_grid(Rule::Erm).len(), 1);
    }

    #[test]
    fn selection_prefers_earliest_tie() {
        let p = GridPoint {
            eta_alpha: 1.0,
            adjustment_c: 0.0,
            p_exponent: 0.5,
        };
        let s = |v: Option<f64>| GridScore {
            point: p,
            mean_val_worst_accuracy: v,
            completed: 1,
        };
        assert_eq!(
            select_point(&[s(None), s(Some(0.7)), s(Some(0.9)), s(Some(0.9))]),
            Some(2)
        );
        assert_eq!(select_point(&[s(None)]), None);
    }

    #[test]
    fn mean_std_sample() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s.unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(mean_std(&[4.0]).1, None);
    }

    #[test]
    fn svg_has_one_polyline_per_group() {
        let c = AlphaCurves {
            setting: "noise_simple".into(),
            rule: "CGD".into(),
            curves: vec![vec![0.3, 0.2], vec![0.3, 0.3], vec![0.4, 0.5]],
        };
        let svg = render_alpha_svg(&c);
        assert_eq!(svg.matches("<polyline").count(), 3);
        assert!(svg.contains(r#"viewBox="0 0 800 500""#));
    }

    #[test]
    fn trace_parse_averages_seeds() {
        let text = format!(
            "{TRACE_CSV_HEADER}\nnoise_simple/CGD/0,0,CGD,1,0,0.2,1,1,0,1\nnoise_simple/CGD/0,0,CGD,1,1,0.8,1,1,0,1\nnoise_simple/CGD/1,1,CGD,1,0,0.4,1,1,0,1\nnoise_simple/CGD/1,1,CGD,1,1,0.6,1,1,0,1\n"
        );
        let c = parse_trace(&text, Path::new("t.csv")).unwrap();
        assert_eq!(c.len(), 1);
        assert!((c[0].curves[0][0] - 0.3).abs() < 1e-15);
        assert!(parse_trace("bad\n", Path::new("t.csv")).is_err());
    }
}
