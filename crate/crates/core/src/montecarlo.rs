//! Direct simulation of the slot SNR. Trial `i` of slot `t` always draws from
//! its own stream, and chunk statistics are merged in chunk order, so the
//! estimates do not depend on the number of worker threads.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analytics::rate_of_snr;
use crate::channel::{ChannelSampler, PhaseVector};
use crate::error::{Error, Result};
use crate::geometry::SlotGeometry;
use crate::rng::{stream, StreamKind};
use crate::scenario::ScenarioConfig;

pub const MIN_TRIALS: u32 = 100;
const CHUNK: u32 = 1024;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(trials)`.
    pub stderr: f64,
    pub trials: u32,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy)]
struct Running {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Running {
    const EMPTY: Running = Running {
        n: 0.0,
        mean: 0.0,
        m2: 0.0,
    };

    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, other: Running) -> Running {
        if self.n == 0.0 {
            return other;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        Running {
            n,
            mean: self.mean + d * other.n / n,
            m2: self.m2 + other.m2 + d * d * self.n * other.n / n,
        }
    }
}

fn simulate<F>(trials: u32, seed: u64, kind: StreamKind, slot: u64, sample: F) -> McEstimate
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    let chunks = trials.div_ceil(CHUNK);
    let partial: Vec<Running> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = Running::EMPTY;
            for i in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                let mut rng = stream(seed, kind, slot, i as u64);
                acc.push(sample(&mut rng));
            }
            acc
        })
        .collect();
    let total = partial.into_iter().fold(Running::EMPTY, Running::merge);
    let stderr = if total.n > 1.0 {
        (total.m2.max(0.0) / (total.n - 1.0) / total.n).sqrt()
    } else {
        0.0
    };
    McEstimate {
        mean: total.mean,
        stderr,
        trials,
        seed,
    }
}

fn check_trials(trials: u32) -> Result<()> {
    if trials < MIN_TRIALS {
        return Err(Error::field("trials", format!("need at least {MIN_TRIALS}, got {trials}")));
    }
    Ok(())
}

/// Fraction of draws whose SNR reaches `γ_th`.
pub fn estimate_coverage(
    cfg: &ScenarioConfig,
    geom: &SlotGeometry,
    phases: &PhaseVector,
    trials: u32,
    seed: u64,
) -> Result<McEstimate> {
    check_trials(trials)?;
    let sampler = ChannelSampler::new(cfg, geom, phases)?;
    let mean_snr = cfg.mean_snr();
    let threshold = cfg.snr_threshold();
    Ok(simulate(trials, seed, StreamKind::ChannelTrial, geom.t as u64, |rng| {
        let snr = mean_snr * sampler.draw(rng).norm_sqr();
        if snr >= threshold {
            1.0
        } else {
            0.0
        }
    }))
}

/// Mean rate over draws.
pub fn estimate_rate(
    cfg: &ScenarioConfig,
    geom: &SlotGeometry,
    phases: &PhaseVector,
    trials: u32,
    seed: u64,
) -> Result<McEstimate> {
    check_trials(trials)?;
    rate_samples(cfg, geom, phases, trials, seed)
}

pub(crate) fn rate_samples(
    cfg: &ScenarioConfig,
    geom: &SlotGeometry,
    phases: &PhaseVector,
    trials: u32,
    seed: u64,
) -> Result<McEstimate> {
    let sampler = ChannelSampler::new(cfg, geom, phases)?;
    let mean_snr = cfg.mean_snr();
    Ok(simulate(trials, seed, StreamKind::RateTrial, geom.t as u64, |rng| {
        rate_of_snr(cfg, mean_snr * sampler.draw(rng).norm_sqr())
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::coverage_probability;
    use crate::channel::{link_phases, wrap_angle};
    use crate::geometry::slot_geometry;
    use crate::scenario::load_scenario;

    #[test]
    fn running_merge_matches_single_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.5).collect();
        let mut one = Running::EMPTY;
        xs.iter().for_each(|&x| one.push(x));
        let mut a = Running::EMPTY;
        let mut b = Running::EMPTY;
        xs[..313].iter().for_each(|&x| a.push(x));
        xs[313..].iter().for_each(|&x| b.push(x));
        let m = a.merge(b);
        assert!((m.mean - one.mean).abs() < 1e-12);
        assert!((m.m2 - one.m2).abs() < 1e-9 * one.m2);
    }

    #[test]
    fn zero_threshold_is_certain() {
        let cfg = load_scenario("snr_threshold_db = -inf").unwrap();
        let g = slot_geometry(&cfg, 3000, 0.0);
        let est = estimate_coverage(&cfg, &g, &PhaseVector::discrete(2, vec![0; 60]), 500, 1).unwrap();
        assert_eq!((est.mean, est.stderr), (1.0, 0.0));
    }

    #[test]
    fn deterministic_channel_gives_indicator() {
        let cfg = load_scenario("n_elements = 0\nk_factor_db_bm = inf").unwrap();
        let empty = PhaseVector::discrete(2, vec![]);
        for t in [10, 6900, 7000] {
            let g = slot_geometry(&cfg, t, 0.0);
            let est = estimate_coverage(&cfg, &g, &empty, 200, 4).unwrap();
            assert!(est.mean == 0.0 || est.mean == 1.0);
            assert_eq!(est.stderr, 0.0);
            assert_eq!(est.mean, coverage_probability(&cfg, &g, &empty).unwrap());
            let rate = estimate_rate(&cfg, &g, &empty, 200, 4).unwrap();
            assert_eq!(rate.stderr, 0.0);
        }
    }

    #[test]
    fn too_few_trials_rejected() {
        let cfg = ScenarioConfig::default();
        let g = slot_geometry(&cfg, 1, 0.0);
        let p = PhaseVector::discrete(2, vec![0; 60]);
        assert!(estimate_coverage(&cfg, &g, &p, 99, 1).is_err());
        assert!(estimate_rate(&cfg, &g, &p, 10, 1).is_err());
    }

    #[test]
    fn zero_power_rate_is_zero() {
        let cfg = ScenarioConfig::default().modified(|p| p.tx_power_dbm = f64::NEG_INFINITY).unwrap();
        let g = slot_geometry(&cfg, 7000, 0.0);
        let est = estimate_rate(&cfg, &g, &PhaseVector::discrete(2, vec![1; 60]), 100, 2).unwrap();
        assert_eq!(est.mean, 0.0);
    }

    #[test]
    fn coverage_estimate_tracks_analytic() {
        let cfg = ScenarioConfig::default();
        let g = slot_geometry(&cfg, 6990, 0.0);
        let ph = link_phases(&cfg, &g);
        let ideal = PhaseVector::Continuous(vec![wrap_angle(ph.rm + ph.br - ph.bm); 60]);
        let est = estimate_coverage(&cfg, &g, &ideal, 20_000, 8).unwrap();
        let exact = coverage_probability(&cfg, &g, &ideal).unwrap();
        let sigma = (exact * (1.0 - exact) / 20_000.0).sqrt();
        assert!((est.mean - exact).abs() <= 4.0 * sigma + 1e-12, "{} vs {}", est.mean, exact);
    }
}
