//! Closed-form channel moments, coverage probability and rate.

use num_complex::Complex64;
use rand::Rng;

use crate::channel::{check_len, gain_amplitude, los_components, ChannelSampler, PhaseVector};
use crate::error::Result;
use crate::geometry::SlotGeometry;
use crate::montecarlo;
use crate::rng::{stream, StreamKind};
use crate::scenario::{Link, OutageScaling, RateLog, RateMode, ScenarioConfig, VarianceModel};
use crate::specfun::q1_clamped;

/// Mean and variance of the equivalent channel, which is complex Gaussian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelMoments {
    pub mean: Complex64,
    pub variance: f64,
}

impl ChannelMoments {
    /// No NLoS power anywhere: `h` equals its mean.
    pub fn is_deterministic(&self) -> bool {
        self.variance == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageInputs {
    /// `ζ = |μ_h|²/σ_h²`.
    pub noncentrality: f64,
    /// `γ0 = γ_th/(γ̄ σ_h²)`.
    pub threshold_arg: f64,
    /// `γ̄ = P/σ²`.
    pub mean_snr: f64,
}

pub fn channel_mean(cfg: &ScenarioConfig, geom: &SlotGeometry, phases: &PhaseVector) -> Result<Complex64> {
    check_len(cfg, phases)?;
    Ok(los_components(cfg, geom).mean(phases))
}

/// Phase-independent variance of `h`.
pub fn channel_variance(cfg: &ScenarioConfig, geom: &SlotGeometry) -> f64 {
    let bm = cfg.link(Link::Bm);
    let br = cfg.link(Link::Br);
    let rm = cfg.link(Link::Rm);
    let pl = |d: f64, e: f64| {
        let a = gain_amplitude(d, e);
        a * a
    };
    let direct = bm.varrho.powi(2) * pl(geom.d_bm_m, bm.nlos_exponent);
    let n = cfg.n_elements() as f64;
    if n == 0.0 {
        return direct;
    }
    let rm_los = pl(geom.d_rm_m, rm.los_exponent);
    let rm_nlos = pl(geom.d_rm_m, rm.nlos_exponent);
    let br_los = pl(geom.d_br_m, br.los_exponent);
    let br_nlos = pl(geom.d_br_m, br.nlos_exponent);
    let mut per_element = rm.varrho.powi(2) * br.varrho.powi(2) * rm_nlos * br_nlos;
    if cfg.params().variance_model == VarianceModel::Full {
        per_element += rm.rho.powi(2) * br.varrho.powi(2) * rm_los * br_nlos;
        per_element += rm.varrho.powi(2) * br.rho.powi(2) * rm_nlos * br_los;
    }
    direct + n * per_element
}

pub fn channel_moments(cfg: &ScenarioConfig, geom: &SlotGeometry, phases: &PhaseVector) -> Result<ChannelMoments> {
    Ok(ChannelMoments {
        mean: channel_mean(cfg, geom, phases)?,
        variance: channel_variance(cfg, geom),
    })
}

pub fn coverage_inputs(cfg: &ScenarioConfig, moments: &ChannelMoments) -> CoverageInputs {
    let mean_snr = cfg.mean_snr();
    CoverageInputs {
        noncentrality: moments.mean.norm_sqr() / moments.variance,
        threshold_arg: cfg.snr_threshold() / (mean_snr * moments.variance),
        mean_snr,
    }
}

/// Coverage as a function of `|μ_h|²` for a fixed slot variance. The
/// optimizer evaluates many phase candidates against the same variance.
#[derive(Debug, Clone, Copy)]
pub struct CoverageEvaluator {
    variance: f64,
    mean_snr: f64,
    threshold: f64,
    /// Marcum argument scale: 2 for `Complex`, 1 for `Literal`.
    scale: f64,
    b: f64,
}

impl CoverageEvaluator {
    pub fn new(cfg: &ScenarioConfig, variance: f64) -> Self {
        let scale = match cfg.params().outage_scaling {
            OutageScaling::Complex => 2.0,
            OutageScaling::Literal => 1.0,
        };
        let mean_snr = cfg.mean_snr();
        let threshold = cfg.snr_threshold();
        let b = (scale * threshold / (mean_snr * variance)).sqrt();
        CoverageEvaluator {
            variance,
            mean_snr,
            threshold,
            scale,
            b,
        }
    }

    pub fn coverage(&self, mean_norm_sqr: f64) -> f64 {
        if self.threshold == 0.0 {
            return 1.0;
        }
        if self.mean_snr == 0.0 || self.threshold == f64::INFINITY {
            return 0.0;
        }
        if self.variance == 0.0 {
            // Deterministic channel: the SNR either clears the threshold or not.
            return if self.mean_snr * mean_norm_sqr >= self.threshold { 1.0 } else { 0.0 };
        }
        let a = (self.scale * mean_norm_sqr / self.variance).sqrt();
        q1_clamped(a, self.b)
    }
}

/// Probability that the slot SNR reaches `γ_th`.
pub fn coverage_probability(cfg: &ScenarioConfig, geom: &SlotGeometry, phases: &PhaseVector) -> Result<f64> {
    let m = channel_moments(cfg, geom, phases)?;
    Ok(coverage_from_moments(cfg, &m))
}

pub fn coverage_from_moments(cfg: &ScenarioConfig, moments: &ChannelMoments) -> f64 {
    CoverageEvaluator::new(cfg, moments.variance).coverage(moments.mean.norm_sqr())
}

pub(crate) fn rate_of_snr(cfg: &ScenarioConfig, snr: f64) -> f64 {
    let p = cfg.params();
    match p.rate_log {
        RateLog::Log2 => p.bandwidth_hz * snr.ln_1p() / std::f64::consts::LN_2,
        RateLog::Log10 => p.bandwidth_hz * snr.ln_1p() / std::f64::consts::LN_10,
    }
}

/// Rate of one channel draw.
pub fn rate_instantaneous<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    geom: &SlotGeometry,
    phases: &PhaseVector,
    rng: &mut R,
) -> Result<f64> {
    let h = ChannelSampler::new(cfg, geom, phases)?.draw(rng);
    Ok(rate_of_snr(cfg, cfg.mean_snr() * h.norm_sqr()))
}

/// Rate at the average channel power `|μ_h|² + σ_h²`.
pub fn rate_mean_channel(cfg: &ScenarioConfig, geom: &SlotGeometry, phases: &PhaseVector) -> Result<f64> {
    let m = channel_moments(cfg, geom, phases)?;
    Ok(rate_of_snr(cfg, cfg.mean_snr() * (m.mean.norm_sqr() + m.variance)))
}

/// Sample mean of the rate over `trials` draws.
pub fn rate_mc_average(
    cfg: &ScenarioConfig,
    geom: &SlotGeometry,
    phases: &PhaseVector,
    trials: u32,
    seed: u64,
) -> Result<f64> {
    Ok(montecarlo::rate_samples(cfg, geom, phases, trials, seed)?.mean)
}

/// Rate under the configured mode; random modes draw from `seed`'s rate
/// streams for this slot.
pub fn transmission_rate(cfg: &ScenarioConfig, geom: &SlotGeometry, phases: &PhaseVector, seed: u64) -> Result<f64> {
    match cfg.params().rate_mode {
        RateMode::Instantaneous => {
            let mut rng = stream(seed, StreamKind::RateTrial, geom.t as u64, 0);
            rate_instantaneous(cfg, geom, phases, &mut rng)
        }
        RateMode::McAverage => rate_mc_average(cfg, geom, phases, cfg.params().rate_trials, seed),
        RateMode::MeanChannel => rate_mean_channel(cfg, geom, phases),
    }
}
