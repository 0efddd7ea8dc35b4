//! Experiment runner: sweeps one parameter over a list of values for each
//! scheme and series level, and writes long-format CSV plus a JSON summary.
//! Also the analytic-versus-Monte-Carlo audit.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{coverage_probability, transmission_rate};
use crate::error::{Error, Result};
use crate::geometry::slot_geometry;
use crate::montecarlo::{estimate_coverage, rate_samples};
use crate::optimizer::{episode, scheme_phases, travel_distance, EpisodeState, SchemeId};
use crate::rng::{stream, StreamKind};
use crate::scenario::{RateMode, ScenarioConfig};

pub const SCHEMA_VERSION: u32 = 1;

pub const CSV_COLUMNS: [&str; 12] = [
    "figure_family",
    "scheme",
    "series_param",
    "series_level",
    "swept_param",
    "swept_value",
    "slot",
    "metric_name",
    "value",
    "stderr",
    "seed",
    "config_hash",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FigureFamily {
    CoverageVsSlot,
    CoverageVsPower,
    CoverageVsSnrThreshold,
    CoverageVsPlacement,
    CoverageVsSpeed,
    DistanceVsPower,
    DistanceVsSnrThreshold,
    DistanceVsPlacement,
    DistanceVsSpeed,
    RateVsPower,
    RateVsSnrThreshold,
    RateVsPlacement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Metric {
    Coverage,
    Distance,
    Rate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Axis {
    Slot,
    Power,
    SnrThreshold,
    Placement,
    Speed,
}

impl Axis {
    fn name(self) -> &'static str {
        match self {
            Axis::Slot => "slot",
            Axis::Power => "tx_power_dbm",
            Axis::SnrThreshold => "snr_threshold_db",
            Axis::Placement => "d_ris_l_m",
            Axis::Speed => "v_mps",
        }
    }
}

impl FigureFamily {
    pub fn as_str(self) -> &'static str {
        use FigureFamily::*;
        match self {
            CoverageVsSlot => "coverage_vs_slot",
            CoverageVsPower => "coverage_vs_power",
            CoverageVsSnrThreshold => "coverage_vs_snr_threshold",
            CoverageVsPlacement => "coverage_vs_placement",
            CoverageVsSpeed => "coverage_vs_speed",
            DistanceVsPower => "distance_vs_power",
            DistanceVsSnrThreshold => "distance_vs_snr_threshold",
            DistanceVsPlacement => "distance_vs_placement",
            DistanceVsSpeed => "distance_vs_speed",
            RateVsPower => "rate_vs_power",
            RateVsSnrThreshold => "rate_vs_snr_threshold",
            RateVsPlacement => "rate_vs_placement",
        }
    }

    fn parts(self) -> (Metric, Axis) {
        use FigureFamily::*;
        match self {
            CoverageVsSlot => (Metric::Coverage, Axis::Slot),
            CoverageVsPower => (Metric::Coverage, Axis::Power),
            CoverageVsSnrThreshold => (Metric::Coverage, Axis::SnrThreshold),
            CoverageVsPlacement => (Metric::Coverage, Axis::Placement),
            CoverageVsSpeed => (Metric::Coverage, Axis::Speed),
            DistanceVsPower => (Metric::Distance, Axis::Power),
            DistanceVsSnrThreshold => (Metric::Distance, Axis::SnrThreshold),
            DistanceVsPlacement => (Metric::Distance, Axis::Placement),
            DistanceVsSpeed => (Metric::Distance, Axis::Speed),
            RateVsPower => (Metric::Rate, Axis::Power),
            RateVsSnrThreshold => (Metric::Rate, Axis::SnrThreshold),
            RateVsPlacement => (Metric::Rate, Axis::Placement),
        }
    }

    pub fn swept_param(self) -> &'static str {
        self.parts().1.name()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeriesParam {
    N,
    #[serde(rename = "b")]
    B,
}

impl SeriesParam {
    fn as_str(self) -> &'static str {
        match self {
            SeriesParam::N => "N",
            SeriesParam::B => "b",
        }
    }
}

/// One experiment, usually read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub figure_family: FigureFamily,
    /// Values of the swept parameter. For `coverage_vs_slot` these are slot
    /// indices and may be left empty to mean every `slot_stride`-th slot.
    #[serde(default)]
    pub swept_values: Vec<f64>,
    pub schemes: Vec<SchemeId>,
    #[serde(default)]
    pub series_param: Option<SeriesParam>,
    #[serde(default)]
    pub series_levels: Vec<u32>,
    /// Falls back to the scenario seed.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Monte Carlo trials per slot for the `coverage_vs_slot` overlay; 0 disables it.
    #[serde(default)]
    pub mc_trials: u32,
    /// Slot subsampling for slot lists and for rate averages.
    #[serde(default = "one")]
    pub slot_stride: u32,
}

fn one() -> u32 {
    1
}

pub fn load_sweep_spec(source: &str) -> Result<SweepSpec> {
    toml::from_str(source).map_err(|e| Error::ConfigParse {
        line: e
            .span()
            .map(|s| source[..s.start.min(source.len())].matches('\n').count() + 1),
        key: None,
        message: e.message().trim().to_string(),
    })
}

impl SweepSpec {
    pub fn validate(&self, cfg: &ScenarioConfig) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if self.schemes.is_empty() {
            return bad("schemes must not be empty".into());
        }
        for (i, s) in self.schemes.iter().enumerate() {
            if self.schemes[..i].contains(s) {
                return bad(format!("scheme `{s}` listed twice"));
            }
        }
        let slots = self.figure_family == FigureFamily::CoverageVsSlot;
        if self.swept_values.is_empty() && !slots {
            return bad("swept_values must not be empty".into());
        }
        if self.swept_values.iter().any(|v| !v.is_finite()) {
            return bad("swept_values must be finite".into());
        }
        if self.swept_values.windows(2).any(|w| w[0] >= w[1]) {
            return bad("swept_values must be strictly increasing".into());
        }
        if slots {
            let t_max = cfg.total_slots() as f64;
            if let Some(v) = self.swept_values.iter().find(|&&v| v.fract() != 0.0 || v < 1.0 || v > t_max) {
                return bad(format!("slot {v} is not an integer in 1..={t_max}"));
            }
        }
        if self.slot_stride == 0 {
            return bad("slot_stride must be >= 1".into());
        }
        if self.mc_trials > 0 && self.mc_trials < crate::montecarlo::MIN_TRIALS {
            return bad(format!("mc_trials must be 0 or >= {}", crate::montecarlo::MIN_TRIALS));
        }
        match self.series_param {
            None if !self.series_levels.is_empty() => bad("series_levels given without series_param".into()),
            Some(_) if self.series_levels.is_empty() => bad("series_param given without series_levels".into()),
            Some(SeriesParam::N) if self.schemes.contains(&SchemeId::WithoutRis) => {
                bad("without_ris has no elements, so it cannot be swept over N".into())
            }
            Some(SeriesParam::B) if self.series_levels.iter().any(|&b| b == 0) => bad("b levels must be >= 1".into()),
            _ => Ok(()),
        }
    }

    fn levels(&self) -> Vec<Option<u32>> {
        if self.series_param.is_some() {
            self.series_levels.iter().map(|&l| Some(l)).collect()
        } else {
            vec![None]
        }
    }
}

/// One CSV data row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub scheme: SchemeId,
    pub series_level: Option<u32>,
    pub swept_value: f64,
    pub slot: Option<u32>,
    pub metric_name: &'static str,
    pub value: f64,
    pub stderr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestPoint {
    pub scheme: SchemeId,
    pub series_level: Option<u32>,
    pub swept_value: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub schema_version: u32,
    pub figure_family: FigureFamily,
    pub swept_param: &'static str,
    pub rows: usize,
    pub seed: u64,
    pub config_hash: String,
    pub csv: String,
    /// Largest value of the primary metric per scheme and series level.
    pub best: Vec<BestPoint>,
}

fn series_config(cfg: &ScenarioConfig, param: Option<SeriesParam>, level: Option<u32>) -> Result<ScenarioConfig> {
    match (param, level) {
        (Some(SeriesParam::N), Some(n)) => cfg.modified(|p| p.n_elements = n),
        (Some(SeriesParam::B), Some(b)) => cfg.modified(|p| p.quant_bits = b),
        _ => Ok(cfg.clone()),
    }
}

fn point_config(cfg: &ScenarioConfig, axis: Axis, value: f64) -> Result<ScenarioConfig> {
    match axis {
        Axis::Slot | Axis::Placement => Ok(cfg.clone()),
        Axis::Power => cfg.modified(|p| p.tx_power_dbm = value),
        Axis::SnrThreshold => cfg.modified(|p| p.snr_threshold_db = value),
        Axis::Speed => cfg.modified(|p| p.v_mps = value),
    }
}

fn stride_slots(total: u32, stride: u32) -> Vec<u32> {
    (1..=total).step_by(stride as usize).collect()
}

/// Mean rate over the strided slots, with a combined Monte Carlo stderr when
/// the rate is an average over draws.
fn mean_rate(
    cfg: &ScenarioConfig,
    d_ris_l: f64,
    scheme: SchemeId,
    seed: u64,
    stride: u32,
) -> Result<(f64, Option<f64>)> {
    let cfg = scheme.scenario(cfg);
    let cfg = cfg.as_ref();
    let state = EpisodeState::new(cfg, scheme, seed);
    let slots = stride_slots(cfg.total_slots(), stride);
    let per_slot: Vec<(f64, f64)> = slots
        .par_iter()
        .map(|&t| {
            let geom = slot_geometry(cfg, t, d_ris_l);
            let phases = scheme_phases(cfg, &geom, scheme, seed, &state)?;
            if cfg.params().rate_mode == RateMode::McAverage {
                let est = rate_samples(cfg, &geom, &phases, cfg.params().rate_trials, seed)?;
                Ok((est.mean, est.stderr))
            } else {
                Ok((transmission_rate(cfg, &geom, &phases, seed)?, 0.0))
            }
        })
        .collect::<Result<_>>()?;
    let n = per_slot.len() as f64;
    let mean = per_slot.iter().map(|r| r.0).sum::<f64>() / n;
    let stderr = (cfg.params().rate_mode == RateMode::McAverage)
        .then(|| per_slot.iter().map(|r| r.1 * r.1).sum::<f64>().sqrt() / n);
    Ok((mean, stderr))
}

fn slot_rows(cfg: &ScenarioConfig, spec: &SweepSpec, scheme: SchemeId, level: Option<u32>, seed: u64) -> Result<Vec<CsvRow>> {
    let d = cfg.params().d_ris_l_m;
    let ep = episode(cfg, d, scheme, seed, false)?;
    let slots: Vec<u32> = if spec.swept_values.is_empty() {
        stride_slots(cfg.total_slots(), spec.slot_stride)
    } else {
        spec.swept_values.iter().map(|&v| v as u32).collect()
    };
    let eff = scheme.scenario(cfg);
    let per_slot: Vec<Vec<CsvRow>> = slots
        .par_iter()
        .map(|&t| {
            let rec = &ep.records[t as usize - 1];
            let mut rows = vec![CsvRow {
                scheme,
                series_level: level,
                swept_value: t as f64,
                slot: Some(t),
                metric_name: "coverage",
                value: rec.coverage,
                stderr: None,
            }];
            if spec.mc_trials > 0 {
                let geom = slot_geometry(&eff, t, d);
                let est = estimate_coverage(&eff, &geom, &rec.phases, spec.mc_trials, seed)?;
                rows.push(CsvRow {
                    metric_name: "coverage_mc",
                    value: est.mean,
                    stderr: Some(est.stderr),
                    ..rows[0].clone()
                });
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    Ok(per_slot.into_iter().flatten().collect())
}

fn point_row(
    base: &ScenarioConfig,
    spec: &SweepSpec,
    scheme: SchemeId,
    level: Option<u32>,
    swept_value: f64,
    seed: u64,
) -> Result<CsvRow> {
    let (metric, axis) = spec.figure_family.parts();
    let cfg = point_config(base, axis, swept_value)?;
    let d = if axis == Axis::Placement { swept_value } else { cfg.params().d_ris_l_m };
    let (metric_name, value, stderr) = match metric {
        Metric::Coverage => ("mean_coverage", episode(&cfg, d, scheme, seed, false)?.mean_coverage(), None),
        Metric::Distance => ("travel_distance_m", travel_distance(&cfg, d, scheme, seed)?, None),
        Metric::Rate => {
            let (mean, stderr) = mean_rate(&cfg, d, scheme, seed, spec.slot_stride)?;
            ("mean_rate_bps", mean, stderr)
        }
    };
    Ok(CsvRow {
        scheme,
        series_level: level,
        swept_value,
        slot: None,
        metric_name,
        value,
        stderr,
    })
}

/// Computes all rows of a sweep in spec order: scheme, then series level,
/// then swept value (or slot).
pub fn sweep_rows(cfg: &ScenarioConfig, spec: &SweepSpec) -> Result<Vec<CsvRow>> {
    spec.validate(cfg)?;
    let seed = spec.seed.unwrap_or(cfg.params().seed);
    let mut cells = Vec::new();
    for &scheme in &spec.schemes {
        for level in spec.levels() {
            cells.push((scheme, level));
        }
    }
    let slots = spec.figure_family == FigureFamily::CoverageVsSlot;
    let blocks: Vec<Vec<CsvRow>> = cells
        .par_iter()
        .map(|&(scheme, level)| {
            let cfg = series_config(cfg, spec.series_param, level)?;
            if slots {
                slot_rows(&cfg, spec, scheme, level, seed)
            } else {
                spec.swept_values
                    .par_iter()
                    .map(|&v| point_row(&cfg, spec, scheme, level, v, seed))
                    .collect()
            }
        })
        .collect::<Result<_>>()?;
    Ok(blocks.into_iter().flatten().collect())
}

/// `printf("%.9g")`.
pub fn format_g9(x: f64) -> String {
    const P: i32 = 9;
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..P).contains(&exp) {
        let fixed = format!("{:.*}", (P - 1 - exp) as usize, x);
        trim_zeros(&fixed).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim_zeros(mantissa), sign, exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn render_csv(family: FigureFamily, series: Option<SeriesParam>, rows: &[CsvRow], seed: u64, config_hash: &str) -> String {
    let mut out = CSV_COLUMNS.join(",");
    out.push('\n');
    let series_name = series.map(SeriesParam::as_str).unwrap_or("");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            family.as_str(),
            r.scheme,
            series_name,
            r.series_level.map(|l| l.to_string()).unwrap_or_default(),
            family.swept_param(),
            format_g9(r.swept_value),
            r.slot.map(|t| t.to_string()).unwrap_or_default(),
            r.metric_name,
            format_g9(r.value),
            r.stderr.map(format_g9).unwrap_or_default(),
            seed,
            config_hash,
        );
    }
    out
}

fn best_points(rows: &[CsvRow]) -> Vec<BestPoint> {
    let mut best: Vec<BestPoint> = Vec::new();
    let primary = rows.first().map(|r| r.metric_name);
    for r in rows.iter().filter(|r| Some(r.metric_name) == primary) {
        match best.iter_mut().find(|b| b.scheme == r.scheme && b.series_level == r.series_level) {
            Some(b) if r.value > b.value => {
                b.swept_value = r.swept_value;
                b.value = r.value;
            }
            Some(_) => {}
            None => best.push(BestPoint {
                scheme: r.scheme,
                series_level: r.series_level,
                swept_value: r.swept_value,
                value: r.value,
            }),
        }
    }
    best
}

/// Runs the sweep and writes `<family>.csv` and `<family>.summary.json` into `out_dir`.
pub fn run_sweep(cfg: &ScenarioConfig, spec: &SweepSpec, out_dir: &Path) -> Result<SweepSummary> {
    let rows = sweep_rows(cfg, spec)?;
    let seed = spec.seed.unwrap_or(cfg.params().seed);
    let config_hash = cfg.config_hash()?;
    let family = spec.figure_family;
    let csv_name = format!("{}.csv", family.as_str());
    let summary = SweepSummary {
        schema_version: SCHEMA_VERSION,
        figure_family: family,
        swept_param: family.swept_param(),
        rows: rows.len(),
        seed,
        config_hash: config_hash.clone(),
        csv: csv_name.clone(),
        best: best_points(&rows),
    };
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write(&out_dir.join(&csv_name), &render_csv(family, spec.series_param, &rows, seed, &config_hash))?;
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::Serialize(e.to_string()))?;
    write(&out_dir.join(format!("{}.summary.json", family.as_str())), &(json + "\n"))?;
    Ok(summary)
}

fn write(path: &PathBuf, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path.clone(), e))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditRow {
    pub t: u32,
    pub analytic: f64,
    pub monte_carlo: f64,
    pub stderr: f64,
    pub delta: f64,
    /// `3·sqrt(p(1-p)/trials)` at the analytic `p`.
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub trials: u32,
    pub seed: u64,
    pub rows: Vec<AuditRow>,
    pub max_abs_delta: f64,
    pub all_pass: bool,
}

pub const MIN_AUDIT_TRIALS: u32 = 10_000;

/// Compares analytic and simulated coverage of the optimized scheme on
/// `slots_sample` slots drawn uniformly without replacement.
pub fn validate_run(cfg: &ScenarioConfig, slots_sample: u32, trials: u32, seed: u64) -> Result<AuditReport> {
    if trials < MIN_AUDIT_TRIALS {
        return Err(Error::field("trials", format!("need at least {MIN_AUDIT_TRIALS}, got {trials}")));
    }
    if slots_sample == 0 || slots_sample > cfg.total_slots() {
        return Err(Error::field("slots", format!("must be in 1..={}", cfg.total_slots())));
    }
    let mut rng = stream(seed, StreamKind::SlotSample, 0, 0);
    let mut slots: Vec<u32> = index::sample(&mut rng, cfg.total_slots() as usize, slots_sample as usize)
        .into_iter()
        .map(|i| i as u32 + 1)
        .collect();
    slots.sort_unstable();

    let scheme = SchemeId::OptimizedDiscrete;
    let state = EpisodeState::new(cfg, scheme, seed);
    let d = cfg.params().d_ris_l_m;
    let rows: Vec<AuditRow> = slots
        .iter()
        .map(|&t| {
            let geom = slot_geometry(cfg, t, d);
            let phases = scheme_phases(cfg, &geom, scheme, seed, &state)?;
            let analytic = coverage_probability(cfg, &geom, &phases)?;
            let mc = estimate_coverage(cfg, &geom, &phases, trials, seed)?;
            let delta = mc.mean - analytic;
            let bound = 3.0 * (analytic * (1.0 - analytic) / trials as f64).sqrt();
            Ok(AuditRow {
                t,
                analytic,
                monte_carlo: mc.mean,
                stderr: mc.stderr,
                delta,
                bound,
                pass: delta.abs() <= bound,
            })
        })
        .collect::<Result<_>>()?;
    Ok(AuditReport {
        trials,
        seed,
        max_abs_delta: rows.iter().map(|r| r.delta.abs()).fold(0.0, f64::max),
        all_pass: rows.iter().all(|r| r.pass),
        rows,
    })
}
