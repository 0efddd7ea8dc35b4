//! Link components and random channel realizations.

use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geometry::SlotGeometry;
use crate::scenario::{Link, ScenarioConfig};

/// RIS phase configuration for one slot.
#[derive(Debug, Clone, PartialEq)]
pub enum PhaseVector {
    /// Element `n` has phase `levels[n]·2π/2^bits`.
    Discrete { bits: u32, levels: Vec<u16> },
    /// Unrestricted phases in `[0, 2π)`.
    Continuous(Vec<f64>),
}

impl PhaseVector {
    pub fn discrete(bits: u32, levels: Vec<u16>) -> Self {
        debug_assert!(levels.iter().all(|&l| (l as usize) < 1 << bits));
        PhaseVector::Discrete { bits, levels }
    }

    pub fn len(&self) -> usize {
        match self {
            PhaseVector::Discrete { levels, .. } => levels.len(),
            PhaseVector::Continuous(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn angle(&self, n: usize) -> f64 {
        match self {
            PhaseVector::Discrete { bits, levels } => levels[n] as f64 * TAU / (1u32 << bits) as f64,
            PhaseVector::Continuous(v) => v[n],
        }
    }

    pub fn angles(&self) -> Vec<f64> {
        (0..self.len()).map(|n| self.angle(n)).collect()
    }

    /// `e^{jθ_n}` for every element.
    pub fn phasors(&self) -> Vec<Complex64> {
        match self {
            PhaseVector::Discrete { bits, levels } => {
                let table = level_phasors(*bits);
                levels.iter().map(|&l| table[l as usize]).collect()
            }
            PhaseVector::Continuous(v) => v.iter().map(|&a| Complex64::cis(a)).collect(),
        }
    }

    /// Number of elements at each level, for discrete vectors.
    pub fn level_counts(&self) -> Option<Vec<u32>> {
        match self {
            PhaseVector::Discrete { bits, levels } => {
                let mut counts = vec![0u32; 1 << bits];
                for &l in levels {
                    counts[l as usize] += 1;
                }
                Some(counts)
            }
            PhaseVector::Continuous(_) => None,
        }
    }

    /// Continuous copy with `phi` added to every phase.
    pub fn rotated(&self, phi: f64) -> PhaseVector {
        PhaseVector::Continuous(self.angles().into_iter().map(|a| wrap_angle(a + phi)).collect())
    }
}

/// `e^{j l Δθ}` for `l = 0..2^bits`.
pub fn level_phasors(bits: u32) -> Vec<Complex64> {
    let m = 1usize << bits;
    (0..m).map(|l| Complex64::cis(l as f64 * TAU / m as f64)).collect()
}

pub(crate) fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Bare power-law gain `d^{-ε}`.
pub fn path_loss(d: f64, exponent: f64) -> Result<f64> {
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::Domain { what: "distance", value: d });
    }
    Ok(d.powf(-exponent))
}

/// Carrier phase `2πd/λ` reduced to `[0, 2π)`.
pub fn phase_of_distance(d: f64, wavelength: f64) -> f64 {
    let r = TAU * (d / wavelength).fract();
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Deterministic LoS parts of the direct path and of each RIS cascade.
#[derive(Debug, Clone, PartialEq)]
pub struct LosComponents {
    pub los_bm: Complex64,
    /// `ρ_RM ρ_BR sqrt(PL_RM PL_BR) e^{-j(θ_RM+θ_BR)}` per element, before `θ_n`.
    pub los_cascade: Vec<Complex64>,
}

impl LosComponents {
    /// The common cascade value when every element sees the same one.
    pub fn uniform_cascade(&self) -> Option<Complex64> {
        let first = *self.los_cascade.first()?;
        self.los_cascade.iter().all(|&c| c == first).then_some(first)
    }

    /// `Σ_n cascade_n e^{jθ_n}`. Discrete phases over a uniform cascade are
    /// summed by level counts so the value depends only on the multiset of
    /// levels, not on element order.
    pub fn cascade_sum(&self, phases: &PhaseVector) -> Complex64 {
        debug_assert_eq!(phases.len(), self.los_cascade.len());
        if let (Some(c), PhaseVector::Discrete { bits, .. }) = (self.uniform_cascade(), phases) {
            let counts = phases.level_counts().expect("discrete");
            return c * weighted_level_sum(&counts, &level_phasors(*bits));
        }
        self.los_cascade
            .iter()
            .zip(phases.phasors())
            .map(|(c, e)| c * e)
            .sum()
    }

    /// Mean channel `μ_h` for these phases.
    pub fn mean(&self, phases: &PhaseVector) -> Complex64 {
        self.los_bm + self.cascade_sum(phases)
    }
}

/// `Σ_l counts[l]·table[l]`, always summed in level order.
pub(crate) fn weighted_level_sum(counts: &[u32], table: &[Complex64]) -> Complex64 {
    let mut s = Complex64::new(0.0, 0.0);
    for (&k, &u) in counts.iter().zip(table) {
        if k != 0 {
            s += u * k as f64;
        }
    }
    s
}

/// Carrier phases of the three links at one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkPhases {
    pub bm: f64,
    pub br: f64,
    pub rm: f64,
}

pub fn link_phases(cfg: &ScenarioConfig, geom: &SlotGeometry) -> LinkPhases {
    let lambda = cfg.wavelength_m();
    LinkPhases {
        bm: phase_of_distance(geom.d_bm_m, lambda),
        br: phase_of_distance(geom.d_br_m, lambda),
        rm: phase_of_distance(geom.d_rm_m, lambda),
    }
}

pub fn los_components(cfg: &ScenarioConfig, geom: &SlotGeometry) -> LosComponents {
    let ph = link_phases(cfg, geom);
    let bm = cfg.link(Link::Bm);
    let br = cfg.link(Link::Br);
    let rm = cfg.link(Link::Rm);
    let amp_bm = bm.rho * gain_amplitude(geom.d_bm_m, bm.los_exponent);
    let amp_cascade = rm.rho
        * br.rho
        * gain_amplitude(geom.d_rm_m, rm.los_exponent)
        * gain_amplitude(geom.d_br_m, br.los_exponent);
    let cascade = Complex64::from_polar(amp_cascade, -(ph.rm + ph.br));
    LosComponents {
        los_bm: Complex64::from_polar(amp_bm, -ph.bm),
        los_cascade: vec![cascade; cfg.n_elements()],
    }
}

/// `sqrt(d^{-ε})`; distances from `SlotGeometry` are always positive.
pub(crate) fn gain_amplitude(d: f64, exponent: f64) -> f64 {
    d.powf(-0.5 * exponent)
}

/// Equivalent channel `h` with optional six-term breakdown
/// (direct LoS, direct NLoS, cascade LoS·LoS, LoS·NLoS, NLoS·LoS, NLoS·NLoS).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h: Complex64,
    pub components: Option<[Complex64; 6]>,
}

#[derive(Debug, Clone, Copy)]
struct LinkTerms {
    los: Complex64,
    nlos_scale: f64,
}

impl LinkTerms {
    fn new(cfg: &ScenarioConfig, link: Link, d: f64, phase: f64) -> Self {
        let f = cfg.link(link);
        LinkTerms {
            los: Complex64::from_polar(f.rho * gain_amplitude(d, f.los_exponent), -phase),
            nlos_scale: f.varrho * gain_amplitude(d, f.nlos_exponent),
        }
    }
}

/// Precomputed per-slot state for repeated channel draws.
///
/// Draw order per realization: the BM variate, then for each element its BR
/// variate followed by its RM variate. Each variate is `CN(0, 1)`.
#[derive(Debug, Clone)]
pub struct ChannelSampler {
    bm: LinkTerms,
    br: LinkTerms,
    rm: LinkTerms,
    phasors: Vec<Complex64>,
}

impl ChannelSampler {
    pub fn new(cfg: &ScenarioConfig, geom: &SlotGeometry, phases: &PhaseVector) -> Result<Self> {
        check_len(cfg, phases)?;
        let ph = link_phases(cfg, geom);
        Ok(ChannelSampler {
            bm: LinkTerms::new(cfg, Link::Bm, geom.d_bm_m, ph.bm),
            br: LinkTerms::new(cfg, Link::Br, geom.d_br_m, ph.br),
            rm: LinkTerms::new(cfg, Link::Rm, geom.d_rm_m, ph.rm),
            phasors: phases.phasors(),
        })
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        let mut h = self.bm.los + self.bm.nlos_scale * standard_complex(rng);
        for e in &self.phasors {
            let h_br = self.br.los + self.br.nlos_scale * standard_complex(rng);
            let h_rm = self.rm.los + self.rm.nlos_scale * standard_complex(rng);
            h += h_rm * e * h_br;
        }
        h
    }

    pub fn draw_with_breakdown<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelRealization {
        let zero = Complex64::new(0.0, 0.0);
        let mut parts = [zero; 6];
        let g_bm = self.bm.nlos_scale * standard_complex(rng);
        parts[0] = self.bm.los;
        parts[1] = g_bm;
        let mut h = self.bm.los + g_bm;
        for e in &self.phasors {
            let n_br = self.br.nlos_scale * standard_complex(rng);
            let n_rm = self.rm.nlos_scale * standard_complex(rng);
            parts[2] += self.rm.los * e * self.br.los;
            parts[3] += self.rm.los * e * n_br;
            parts[4] += n_rm * e * self.br.los;
            parts[5] += n_rm * e * n_br;
            h += (self.rm.los + n_rm) * e * (self.br.los + n_br);
        }
        ChannelRealization {
            h,
            components: Some(parts),
        }
    }
}

/// One realization of the equivalent channel.
pub fn draw_channel<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    geom: &SlotGeometry,
    phases: &PhaseVector,
    rng: &mut R,
    breakdown: bool,
) -> Result<ChannelRealization> {
    let sampler = ChannelSampler::new(cfg, geom, phases)?;
    Ok(if breakdown {
        sampler.draw_with_breakdown(rng)
    } else {
        ChannelRealization {
            h: sampler.draw(rng),
            components: None,
        }
    })
}

/// `CN(0, 1)`: independent `N(0, 1/2)` real and imaginary parts.
pub fn standard_complex<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
}

pub(crate) fn check_len(cfg: &ScenarioConfig, phases: &PhaseVector) -> Result<()> {
    if phases.len() != cfg.n_elements() {
        return Err(Error::Scheme(format!(
            "phase vector has {} entries but the scenario has {} elements",
            phases.len(),
            cfg.n_elements()
        )));
    }
    Ok(())
}
