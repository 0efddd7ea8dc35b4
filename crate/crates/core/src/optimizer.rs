//! Phase selection schemes, the element-wise local search, episodes over all
//! slots, and the placement search that maximizes travel distance.

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{channel_variance, transmission_rate, CoverageEvaluator};
use crate::channel::{level_phasors, link_phases, los_components, weighted_level_sum, wrap_angle, PhaseVector};
use crate::error::{Error, Result};
use crate::geometry::{slot_geometry, SlotGeometry};
use crate::rng::{stream, StreamKind};
use crate::scenario::ScenarioConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeId {
    IdealPhase,
    OptimizedDiscrete,
    RandomPhase,
    WithoutRis,
}

impl SchemeId {
    pub const ALL: [SchemeId; 4] = [
        SchemeId::IdealPhase,
        SchemeId::OptimizedDiscrete,
        SchemeId::RandomPhase,
        SchemeId::WithoutRis,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SchemeId::IdealPhase => "ideal_phase",
            SchemeId::OptimizedDiscrete => "optimized_discrete",
            SchemeId::RandomPhase => "random_phase",
            SchemeId::WithoutRis => "without_ris",
        }
    }

    /// The scenario this scheme actually runs on; `WithoutRis` drops the surface.
    pub fn scenario<'a>(self, cfg: &'a ScenarioConfig) -> Cow<'a, ScenarioConfig> {
        match self {
            SchemeId::WithoutRis => Cow::Owned(cfg.without_ris()),
            _ => Cow::Borrowed(cfg),
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::Scheme(format!("unknown scheme `{s}`")))
    }
}

/// Continuous phases that line every cascade term up with the direct path.
pub fn ideal_phases(cfg: &ScenarioConfig, geom: &SlotGeometry) -> Result<PhaseVector> {
    if cfg.n_elements() == 0 {
        return Err(Error::Scheme("ideal phases need at least one RIS element".into()));
    }
    let ph = link_phases(cfg, geom);
    Ok(PhaseVector::Continuous(vec![wrap_angle(ph.rm + ph.br - ph.bm); cfg.n_elements()]))
}

/// Independent uniform levels for every element.
pub fn random_discrete<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> PhaseVector {
    let m = cfg.levels() as u16;
    PhaseVector::discrete(cfg.quant_bits(), (0..cfg.n_elements()).map(|_| rng.random_range(0..m)).collect())
}

/// Element-by-element search: each element takes the level that maximizes
/// coverage with the others held fixed, and keeps it before moving on. Ties
/// go to the lowest level. Stops early once a full pass changes nothing.
pub fn local_search_phases(
    cfg: &ScenarioConfig,
    geom: &SlotGeometry,
    init: &PhaseVector,
    passes: u32,
) -> Result<PhaseVector> {
    let PhaseVector::Discrete { bits, levels } = init else {
        return Err(Error::Scheme("local search needs a discrete starting point".into()));
    };
    if *bits != cfg.quant_bits() {
        return Err(Error::Scheme(format!(
            "starting point uses {bits} bits but the scenario uses {}",
            cfg.quant_bits()
        )));
    }
    crate::channel::check_len(cfg, init)?;
    let los = los_components(cfg, geom);
    let eval = CoverageEvaluator::new(cfg, channel_variance(cfg, geom));
    let table = level_phasors(*bits);
    let m = table.len();
    let mut levels = levels.clone();

    match los.uniform_cascade() {
        Some(c) => {
            let mut counts = init.level_counts().expect("discrete");
            let cov_of = |counts: &[u32]| eval.coverage((los.los_bm + c * weighted_level_sum(counts, &table)).norm_sqr());
            let mut current = cov_of(&counts);
            for _ in 0..passes {
                let mut changed = false;
                for slot in levels.iter_mut() {
                    let was = *slot as usize;
                    counts[was] -= 1;
                    let (mut best_l, mut best) = (0, f64::NEG_INFINITY);
                    for l in 0..m {
                        counts[l] += 1;
                        let cov = cov_of(&counts);
                        counts[l] -= 1;
                        if cov > best {
                            best = cov;
                            best_l = l;
                        }
                    }
                    debug_assert!(best >= current - 1e-12, "coverage fell from {current} to {best}");
                    counts[best_l] += 1;
                    changed |= best_l != was;
                    *slot = best_l as u16;
                    current = best;
                }
                if !changed {
                    break;
                }
            }
        }
        None => {
            // Distinct per-element cascades: re-evaluate the full sum.
            let mut current = eval.coverage(los.mean(init).norm_sqr());
            for _ in 0..passes {
                let mut changed = false;
                for n in 0..levels.len() {
                    let was = levels[n];
                    let (mut best_l, mut best) = (0u16, f64::NEG_INFINITY);
                    for l in 0..m as u16 {
                        levels[n] = l;
                        let trial = PhaseVector::discrete(*bits, levels.clone());
                        let cov = eval.coverage(los.mean(&trial).norm_sqr());
                        if cov > best {
                            best = cov;
                            best_l = l;
                        }
                    }
                    debug_assert!(best >= current - 1e-12);
                    levels[n] = best_l;
                    changed |= best_l != was;
                    current = best;
                }
                if !changed {
                    break;
                }
            }
        }
    }
    Ok(PhaseVector::discrete(*bits, levels))
}

/// Per-episode state shared by all slots.
#[derive(Debug, Clone, Default)]
pub struct EpisodeState {
    /// The random-phase scheme draws once and keeps the vector for every slot.
    pub random_phase: Option<PhaseVector>,
    /// Last optimized vector, used as the next start when warm starting.
    pub previous: Option<PhaseVector>,
}

impl EpisodeState {
    pub fn new(cfg: &ScenarioConfig, scheme: SchemeId, seed: u64) -> Self {
        let random_phase = (scheme == SchemeId::RandomPhase)
            .then(|| random_discrete(cfg, &mut stream(seed, StreamKind::RandomPhase, 0, 0)));
        EpisodeState {
            random_phase,
            previous: None,
        }
    }
}

/// Starting point of the optimized scheme's search at this slot.
pub fn initial_phases(cfg: &ScenarioConfig, geom: &SlotGeometry, seed: u64, state: &EpisodeState) -> PhaseVector {
    if cfg.params().warm_start {
        if let Some(prev) = &state.previous {
            return prev.clone();
        }
    }
    random_discrete(cfg, &mut stream(seed, StreamKind::PhaseInit, geom.t as u64, 0))
}

/// Phases chosen by `scheme` at this slot. `cfg` must already be the
/// scheme's scenario (see [`SchemeId::scenario`]).
pub fn scheme_phases(
    cfg: &ScenarioConfig,
    geom: &SlotGeometry,
    scheme: SchemeId,
    seed: u64,
    state: &EpisodeState,
) -> Result<PhaseVector> {
    match scheme {
        SchemeId::IdealPhase => ideal_phases(cfg, geom),
        SchemeId::OptimizedDiscrete => {
            let init = initial_phases(cfg, geom, seed, state);
            local_search_phases(cfg, geom, &init, cfg.params().local_search_passes)
        }
        SchemeId::RandomPhase => state
            .random_phase
            .clone()
            .ok_or_else(|| Error::Scheme("episode state has no random-phase vector".into())),
        SchemeId::WithoutRis => Ok(PhaseVector::discrete(cfg.quant_bits(), Vec::new())),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub t: u32,
    pub coverage: f64,
    /// Whether the slot meets the coverage threshold.
    pub beta: bool,
    pub rate: Option<f64>,
    pub phases: PhaseVector,
    pub d_ris_l: f64,
}

/// One pass of the train past the BS with a fixed RIS placement.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub scheme: SchemeId,
    pub d_ris_l: f64,
    pub records: Vec<SlotRecord>,
    pub travel_distance_m: f64,
}

impl Episode {
    pub fn mean_coverage(&self) -> f64 {
        self.records.iter().map(|r| r.coverage).sum::<f64>() / self.records.len() as f64
    }

    /// Mean of the per-slot rates, if they were computed.
    pub fn mean_rate(&self) -> Option<f64> {
        let mut sum = 0.0;
        for r in &self.records {
            sum += r.rate?;
        }
        Some(sum / self.records.len() as f64)
    }
}

fn slot_record(
    cfg: &ScenarioConfig,
    t: u32,
    d_ris_l: f64,
    scheme: SchemeId,
    seed: u64,
    state: &EpisodeState,
    with_rate: bool,
) -> Result<SlotRecord> {
    let geom = slot_geometry(cfg, t, d_ris_l);
    let phases = scheme_phases(cfg, &geom, scheme, seed, state)?;
    let coverage = crate::analytics::coverage_probability(cfg, &geom, &phases)?;
    let rate = if with_rate {
        Some(transmission_rate(cfg, &geom, &phases, seed)?)
    } else {
        None
    };
    Ok(SlotRecord {
        t,
        coverage,
        beta: coverage >= cfg.coverage_threshold(),
        rate,
        phases,
        d_ris_l,
    })
}

fn sequential(cfg: &ScenarioConfig, scheme: SchemeId) -> bool {
    scheme == SchemeId::OptimizedDiscrete && cfg.params().warm_start
}

/// Runs every slot `1..=T` with the RIS at `d_ris_l`.
pub fn episode(cfg: &ScenarioConfig, d_ris_l: f64, scheme: SchemeId, seed: u64, with_rate: bool) -> Result<Episode> {
    let cfg = scheme.scenario(cfg);
    let cfg = cfg.as_ref();
    let mut state = EpisodeState::new(cfg, scheme, seed);
    let slots = 1..=cfg.total_slots();
    let records: Vec<SlotRecord> = if sequential(cfg, scheme) {
        let mut out = Vec::with_capacity(cfg.total_slots() as usize);
        for t in slots {
            let r = slot_record(cfg, t, d_ris_l, scheme, seed, &state, with_rate)?;
            state.previous = Some(r.phases.clone());
            out.push(r);
        }
        out
    } else {
        slots
            .into_par_iter()
            .map(|t| slot_record(cfg, t, d_ris_l, scheme, seed, &state, with_rate))
            .collect::<Result<_>>()?
    };
    let covered = records.iter().filter(|r| r.beta).count();
    Ok(Episode {
        scheme,
        d_ris_l,
        travel_distance_m: covered as f64 * cfg.slot_advance_m(),
        records,
    })
}

/// Slack below the threshold within which the ideal-phase bound is not
/// trusted to rule a slot out.
const PRUNE_MARGIN: f64 = 1e-9;

/// Travel distance of an episode without keeping its records. For the
/// optimized scheme, slots whose ideal-phase coverage (an upper bound) is
/// already below the threshold skip the phase search; the result equals
/// `episode(..).travel_distance_m`.
pub fn travel_distance(cfg: &ScenarioConfig, d_ris_l: f64, scheme: SchemeId, seed: u64) -> Result<f64> {
    let prune = scheme == SchemeId::OptimizedDiscrete && !cfg.params().warm_start && cfg.n_elements() > 0;
    if !prune {
        return Ok(episode(cfg, d_ris_l, scheme, seed, false)?.travel_distance_m);
    }
    let state = EpisodeState::new(cfg, scheme, seed);
    let p_th = cfg.coverage_threshold();
    let covered: usize = (1..=cfg.total_slots())
        .into_par_iter()
        .map(|t| -> Result<usize> {
            let geom = slot_geometry(cfg, t, d_ris_l);
            let bound = crate::analytics::coverage_probability(cfg, &geom, &ideal_phases(cfg, &geom)?)?;
            if bound < p_th - PRUNE_MARGIN {
                return Ok(0);
            }
            let r = slot_record(cfg, t, d_ris_l, scheme, seed, &state, false)?;
            Ok(r.beta as usize)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(covered as f64 * cfg.slot_advance_m())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacementPoint {
    pub d_ris_l: f64,
    pub travel_distance_m: f64,
}

/// Result of the placement search: the best placement's full episode and the
/// distance achieved at every candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub scheme: SchemeId,
    pub records: Vec<SlotRecord>,
    pub travel_distance_m: f64,
    pub d_ris_l_star: f64,
    pub d_max_m: f64,
    pub placements: Vec<PlacementPoint>,
}

/// Best of `points` by distance; ties go to the placement nearest 0, then the smaller one.
pub fn best_placement(points: &[PlacementPoint]) -> Option<PlacementPoint> {
    points.iter().copied().reduce(|best, p| {
        let better = p.travel_distance_m > best.travel_distance_m
            || (p.travel_distance_m == best.travel_distance_m
                && (p.d_ris_l.abs() < best.d_ris_l.abs()
                    || (p.d_ris_l.abs() == best.d_ris_l.abs() && p.d_ris_l < best.d_ris_l)));
        if better {
            p
        } else {
            best
        }
    })
}

/// Evaluates every candidate placement and returns the argmax of travel distance.
pub fn placement_search(cfg: &ScenarioConfig, scheme: SchemeId, seed: u64) -> Result<SweepResult> {
    let grid = cfg.placement_grid();
    if grid.is_empty() {
        return Err(Error::field("placement_min_m", "placement grid is empty"));
    }
    let placements: Vec<PlacementPoint> = grid
        .par_iter()
        .map(|&d| {
            Ok(PlacementPoint {
                d_ris_l: d,
                travel_distance_m: travel_distance(cfg, d, scheme, seed)?,
            })
        })
        .collect::<Result<_>>()?;
    let best = best_placement(&placements).expect("grid is non-empty");
    let ep = episode(cfg, best.d_ris_l, scheme, seed, false)?;
    debug_assert_eq!(ep.travel_distance_m, best.travel_distance_m);
    Ok(SweepResult {
        scheme,
        records: ep.records,
        travel_distance_m: ep.travel_distance_m,
        d_ris_l_star: best.d_ris_l,
        d_max_m: best.travel_distance_m,
        placements,
    })
}
