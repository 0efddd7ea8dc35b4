//! Scenario configuration: radio, geometry, fading and RIS parameters plus the
//! run controls, loaded from flat TOML and validated once.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Thermal noise density at room temperature, dBm/Hz.
pub const THERMAL_NOISE_DBM_PER_HZ: f64 = -174.0;

/// How `transmission_rate` turns a slot into bits/s.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateMode {
    Instantaneous,
    McAverage,
    MeanChannel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateLog {
    Log2,
    Log10,
}

/// Which terms enter the equivalent-channel variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceModel {
    /// Every zero-mean term, including the LoS x NLoS cascade products.
    Full,
    /// Direct NLoS plus the NLoS x NLoS cascade only.
    NlosOnly,
}

/// Scaling of the Marcum arguments in the coverage expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutageScaling {
    /// `Q1(sqrt(2ζ), sqrt(2γ0))`, matching circularly-symmetric NLoS with
    /// unit total variance.
    Complex,
    /// `Q1(sqrt(ζ), sqrt(γ0))`.
    Literal,
}

/// Raw configuration fields as they appear in the file. Units are in the names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioParams {
    pub carrier_frequency_hz: f64,
    pub bandwidth_hz: f64,
    pub noise_figure_db: f64,
    pub tx_power_dbm: f64,
    pub snr_threshold_db: f64,
    pub coverage_threshold: f64,

    pub h_bs_m: f64,
    pub h_ris_m: f64,
    pub h_mr_m: f64,
    pub d_bs_v_m: f64,
    pub d_ris_v_m: f64,
    pub k_m: f64,
    pub v_mps: f64,
    pub slot_s: f64,
    pub total_slots: u32,

    pub k_factor_db_bm: f64,
    pub k_factor_db_br: f64,
    pub k_factor_db_rm: f64,
    pub los_exponent_bm: f64,
    pub los_exponent_br: f64,
    pub los_exponent_rm: f64,
    pub nlos_exponent_bm: f64,
    pub nlos_exponent_br: f64,
    pub nlos_exponent_rm: f64,

    pub n_elements: u32,
    pub quant_bits: u32,
    pub placement_min_m: f64,
    pub placement_max_m: f64,
    pub placement_step_m: f64,
    pub d_ris_l_m: f64,

    pub seed: u64,
    pub mc_trials: u32,
    pub rate_mode: RateMode,
    pub rate_trials: u32,
    pub rate_log: RateLog,
    pub local_search_passes: u32,
    pub warm_start: bool,
    pub variance_model: VarianceModel,
    pub outage_scaling: OutageScaling,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        ScenarioParams {
            carrier_frequency_hz: 2.35e9,
            bandwidth_hz: 20e6,
            noise_figure_db: 10.0,
            tx_power_dbm: 30.0,
            snr_threshold_db: 10.0,
            coverage_threshold: 0.95,
            h_bs_m: 10.0,
            h_ris_m: 2.0,
            h_mr_m: 2.5,
            d_bs_v_m: 50.0,
            d_ris_v_m: 20.0,
            k_m: 7000.0,
            v_mps: 100.0,
            slot_s: 0.01,
            total_slots: 14_000,
            k_factor_db_bm: 10.0,
            k_factor_db_br: 10.0,
            k_factor_db_rm: 10.0,
            los_exponent_bm: 3.0,
            los_exponent_br: 3.0,
            los_exponent_rm: 3.0,
            nlos_exponent_bm: 3.6,
            nlos_exponent_br: 3.6,
            nlos_exponent_rm: 3.6,
            n_elements: 60,
            quant_bits: 2,
            placement_min_m: -1000.0,
            placement_max_m: 1000.0,
            placement_step_m: 50.0,
            d_ris_l_m: 0.0,
            seed: 1,
            mc_trials: 100_000,
            rate_mode: RateMode::McAverage,
            rate_trials: 1000,
            rate_log: RateLog::Log2,
            local_search_passes: 1,
            warm_start: false,
            variance_model: VarianceModel::Full,
            outage_scaling: OutageScaling::Complex,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Link {
    /// BS to mobile relay.
    Bm,
    /// BS to RIS.
    Br,
    /// RIS to mobile relay.
    Rm,
}

/// Per-link fading constants in linear scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkFading {
    pub k_factor: f64,
    /// LoS amplitude weight `sqrt(κ/(κ+1))`.
    pub rho: f64,
    /// NLoS amplitude weight `sqrt(1/(κ+1))`.
    pub varrho: f64,
    pub los_exponent: f64,
    pub nlos_exponent: f64,
}

impl LinkFading {
    fn new(k_factor_db: f64, los_exponent: f64, nlos_exponent: f64) -> Self {
        let k_factor = db_to_linear(k_factor_db);
        let (rho, varrho) = if k_factor.is_infinite() {
            (1.0, 0.0)
        } else {
            ((k_factor / (k_factor + 1.0)).sqrt(), (1.0 / (k_factor + 1.0)).sqrt())
        };
        LinkFading {
            k_factor,
            rho,
            varrho,
            los_exponent,
            nlos_exponent,
        }
    }
}

/// Validated, immutable scenario with derived quantities precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    params: ScenarioParams,
    wavelength_m: f64,
    noise_power_dbm: f64,
    noise_power_mw: f64,
    tx_power_mw: f64,
    snr_threshold: f64,
    bm: LinkFading,
    br: LinkFading,
    rm: LinkFading,
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Parses a configuration document. Missing keys take their defaults.
pub fn load_scenario(source: &str) -> Result<ScenarioConfig> {
    let params: ScenarioParams = toml::from_str(source).map_err(|e| parse_error(source, &e))?;
    ScenarioConfig::new(params)
}

/// Parses a document, then applies `key=value` overrides in order.
pub fn load_scenario_with_overrides(source: &str, overrides: &[String]) -> Result<ScenarioConfig> {
    let mut table: toml::Table = toml::from_str(source).map_err(|e| parse_error(source, &e))?;
    for item in overrides {
        let (key, value) = split_override(item)?;
        table.insert(key.to_string(), parse_override_value(key, value)?);
    }
    if overrides.is_empty() {
        return load_scenario(source);
    }
    let params = ScenarioParams::deserialize(table.clone()).map_err(|e| Error::ConfigParse {
        line: None,
        key: unknown_key(e.message()).or_else(|| offending_key(&table)),
        message: e.message().to_string(),
    })?;
    ScenarioConfig::new(params)
}

/// First key whose value does not deserialize on its own.
fn offending_key(table: &toml::Table) -> Option<String> {
    table.iter().find_map(|(k, v)| {
        let mut one = toml::Table::new();
        one.insert(k.clone(), v.clone());
        ScenarioParams::deserialize(one).is_err().then(|| k.clone())
    })
}

fn split_override(item: &str) -> Result<(&str, &str)> {
    match item.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim(), v.trim())),
        _ => Err(Error::ConfigParse {
            line: None,
            key: None,
            message: format!("override `{item}` is not of the form key=value"),
        }),
    }
}

/// TOML literal if it parses as one, otherwise a bare string.
fn parse_override_value(key: &str, value: &str) -> Result<toml::Value> {
    let doc = format!("v = {value}");
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => Ok(t.remove("v").expect("key present")),
        Err(_) if !value.is_empty() => Ok(toml::Value::String(value.to_string())),
        Err(e) => Err(Error::ConfigParse {
            line: None,
            key: Some(key.to_string()),
            message: e.message().to_string(),
        }),
    }
}

fn parse_error(source: &str, e: &toml::de::Error) -> Error {
    let line = e
        .span()
        .map(|span| source[..span.start.min(source.len())].matches('\n').count() + 1);
    let key = unknown_key(e.message()).or_else(|| {
        let text = source.lines().nth(line? - 1)?;
        let (k, _) = text.split_once('=')?;
        Some(k.trim().to_string())
    });
    Error::ConfigParse {
        line,
        key,
        message: e.message().trim().to_string(),
    }
}

fn unknown_key(message: &str) -> Option<String> {
    let rest = message.split("unknown field `").nth(1)?;
    Some(rest.split('`').next()?.to_string())
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig::new(ScenarioParams::default()).expect("defaults are valid")
    }
}

impl ScenarioConfig {
    pub fn new(params: ScenarioParams) -> Result<Self> {
        validate(&params)?;
        let p = &params;
        let noise_power_dbm = THERMAL_NOISE_DBM_PER_HZ + 10.0 * p.bandwidth_hz.log10() + p.noise_figure_db;
        Ok(ScenarioConfig {
            wavelength_m: SPEED_OF_LIGHT / p.carrier_frequency_hz,
            noise_power_dbm,
            noise_power_mw: db_to_linear(noise_power_dbm),
            tx_power_mw: db_to_linear(p.tx_power_dbm),
            snr_threshold: db_to_linear(p.snr_threshold_db),
            bm: LinkFading::new(p.k_factor_db_bm, p.los_exponent_bm, p.nlos_exponent_bm),
            br: LinkFading::new(p.k_factor_db_br, p.los_exponent_br, p.nlos_exponent_br),
            rm: LinkFading::new(p.k_factor_db_rm, p.los_exponent_rm, p.nlos_exponent_rm),
            params,
        })
    }

    pub fn params(&self) -> &ScenarioParams {
        &self.params
    }

    /// Copy with some raw fields changed, re-validated.
    pub fn modified(&self, edit: impl FnOnce(&mut ScenarioParams)) -> Result<Self> {
        let mut params = self.params.clone();
        edit(&mut params);
        ScenarioConfig::new(params)
    }

    /// Applies one `key=value` override using the same syntax as the file.
    pub fn with_set(&self, key: &str, value: &str) -> Result<Self> {
        let mut table = toml::Table::try_from(&self.params).map_err(|e| Error::Serialize(e.to_string()))?;
        table.insert(key.to_string(), parse_override_value(key, value)?);
        let params = ScenarioParams::deserialize(table).map_err(|e| Error::ConfigParse {
            line: None,
            key: Some(key.to_string()),
            message: e.message().to_string(),
        })?;
        ScenarioConfig::new(params)
    }

    /// The same scenario with the RIS removed.
    pub fn without_ris(&self) -> Self {
        let mut out = self.clone();
        out.params.n_elements = 0;
        out
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(&self.params).map_err(|e| Error::Serialize(e.to_string()))
    }

    /// Hex SHA-256 of the canonical TOML form.
    pub fn config_hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_toml()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn wavelength_m(&self) -> f64 {
        self.wavelength_m
    }

    pub fn noise_power_dbm(&self) -> f64 {
        self.noise_power_dbm
    }

    pub fn noise_power_mw(&self) -> f64 {
        self.noise_power_mw
    }

    pub fn tx_power_mw(&self) -> f64 {
        self.tx_power_mw
    }

    /// `γ̄ = P/σ²`.
    pub fn mean_snr(&self) -> f64 {
        self.tx_power_mw / self.noise_power_mw
    }

    /// `γ_th` in linear scale.
    pub fn snr_threshold(&self) -> f64 {
        self.snr_threshold
    }

    pub fn link(&self, link: Link) -> &LinkFading {
        match link {
            Link::Bm => &self.bm,
            Link::Br => &self.br,
            Link::Rm => &self.rm,
        }
    }

    pub fn n_elements(&self) -> usize {
        self.params.n_elements as usize
    }

    pub fn quant_bits(&self) -> u32 {
        self.params.quant_bits
    }

    /// `M = 2^b`.
    pub fn levels(&self) -> usize {
        1 << self.params.quant_bits
    }

    /// `Δθ = 2π/M`.
    pub fn delta_theta(&self) -> f64 {
        TAU / self.levels() as f64
    }

    pub fn phase_set(&self) -> Vec<f64> {
        (0..self.levels()).map(|l| l as f64 * self.delta_theta()).collect()
    }

    /// Track covered in one slot, `v·τ`.
    pub fn slot_advance_m(&self) -> f64 {
        self.params.v_mps * self.params.slot_s
    }

    pub fn total_slots(&self) -> u32 {
        self.params.total_slots
    }

    pub fn coverage_threshold(&self) -> f64 {
        self.params.coverage_threshold
    }

    /// Candidate RIS placements, ascending.
    pub fn placement_grid(&self) -> Vec<f64> {
        let p = &self.params;
        let count = ((p.placement_max_m - p.placement_min_m) / p.placement_step_m + 1e-9).floor() as usize + 1;
        (0..count).map(|i| p.placement_min_m + i as f64 * p.placement_step_m).collect()
    }
}

/// Largest `quant_bits` whose levels still fit the `u16` level indices.
pub const MAX_QUANT_BITS: u32 = 15;

fn validate(p: &ScenarioParams) -> Result<()> {
    fn positive(field: &str, v: f64) -> Result<()> {
        if v.is_finite() && v > 0.0 {
            Ok(())
        } else {
            Err(Error::field(field, format!("must be finite and > 0, got {v}")))
        }
    }
    fn finite(field: &str, v: f64) -> Result<()> {
        if v.is_finite() {
            Ok(())
        } else {
            Err(Error::field(field, format!("must be finite, got {v}")))
        }
    }

    positive("carrier_frequency_hz", p.carrier_frequency_hz)?;
    positive("bandwidth_hz", p.bandwidth_hz)?;
    finite("noise_figure_db", p.noise_figure_db)?;
    // -inf dBm is allowed and means zero power.
    if p.tx_power_dbm.is_nan() || p.tx_power_dbm == f64::INFINITY {
        return Err(Error::field("tx_power_dbm", format!("must be < +inf, got {}", p.tx_power_dbm)));
    }
    if p.snr_threshold_db.is_nan() {
        return Err(Error::field("snr_threshold_db", "must not be NaN"));
    }
    if !(p.coverage_threshold.is_finite() && p.coverage_threshold >= 0.0) {
        return Err(Error::field(
            "coverage_threshold",
            format!("must be finite and >= 0, got {}", p.coverage_threshold),
        ));
    }

    for (field, v) in [
        ("h_bs_m", p.h_bs_m),
        ("h_ris_m", p.h_ris_m),
        ("h_mr_m", p.h_mr_m),
        ("d_bs_v_m", p.d_bs_v_m),
        ("d_ris_v_m", p.d_ris_v_m),
        ("k_m", p.k_m),
        ("v_mps", p.v_mps),
        ("slot_s", p.slot_s),
        ("placement_step_m", p.placement_step_m),
    ] {
        positive(field, v)?;
    }
    if p.total_slots < 1 {
        return Err(Error::field("total_slots", "must be >= 1"));
    }

    for (field, v) in [
        ("k_factor_db_bm", p.k_factor_db_bm),
        ("k_factor_db_br", p.k_factor_db_br),
        ("k_factor_db_rm", p.k_factor_db_rm),
    ] {
        if v.is_nan() {
            return Err(Error::field(field, "must not be NaN"));
        }
    }
    for (field, v) in [
        ("los_exponent_bm", p.los_exponent_bm),
        ("los_exponent_br", p.los_exponent_br),
        ("los_exponent_rm", p.los_exponent_rm),
        ("nlos_exponent_bm", p.nlos_exponent_bm),
        ("nlos_exponent_br", p.nlos_exponent_br),
        ("nlos_exponent_rm", p.nlos_exponent_rm),
    ] {
        finite(field, v)?;
    }

    if p.quant_bits < 1 || p.quant_bits > MAX_QUANT_BITS {
        return Err(Error::field(
            "quant_bits",
            format!("must be in 1..={MAX_QUANT_BITS}, got {}", p.quant_bits),
        ));
    }
    finite("placement_min_m", p.placement_min_m)?;
    finite("placement_max_m", p.placement_max_m)?;
    finite("d_ris_l_m", p.d_ris_l_m)?;
    if p.placement_min_m > p.placement_max_m {
        return Err(Error::field("placement_min_m", "must not exceed placement_max_m"));
    }
    if p.local_search_passes < 1 {
        return Err(Error::field("local_search_passes", "must be >= 1"));
    }
    if p.rate_trials < 1 {
        return Err(Error::field("rate_trials", "must be >= 1"));
    }
    Ok(())
}

impl fmt::Display for RateMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RateMode::Instantaneous => "instantaneous",
            RateMode::McAverage => "mc_average",
            RateMode::MeanChannel => "mean_channel",
        })
    }
}

impl FromStr for ScenarioConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        load_scenario(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_reference_table() {
        let cfg = load_scenario("").unwrap();
        let p = cfg.params();
        assert_eq!(p.carrier_frequency_hz, 2.35e9);
        assert_eq!(p.bandwidth_hz, 20e6);
        assert_eq!(p.noise_figure_db, 10.0);
        assert_eq!(p.v_mps, 360.0 / 3.6);
        assert_eq!((p.h_bs_m, p.h_ris_m, p.h_mr_m), (10.0, 2.0, 2.5));
        assert_eq!((p.d_bs_v_m, p.d_ris_v_m), (50.0, 20.0));
        for link in [Link::Bm, Link::Br, Link::Rm] {
            let l = cfg.link(link);
            assert!((l.k_factor - 10.0).abs() < 1e-12);
            assert_eq!((l.los_exponent, l.nlos_exponent), (3.0, 3.6));
        }
        assert_eq!(p.coverage_threshold, 0.95);
        assert_eq!(cfg.slot_advance_m(), 1.0);
    }

    #[test]
    fn noise_power() {
        let cfg = ScenarioConfig::default();
        let expected = -174.0 + 10.0 * 2e7f64.log10() + 10.0;
        assert!((cfg.noise_power_dbm() - expected).abs() < 1e-12);
        assert!((cfg.noise_power_dbm() + 90.99).abs() < 5e-3);
    }

    #[test]
    fn two_bit_phase_set() {
        let cfg = load_scenario("quant_bits = 2").unwrap();
        let set = cfg.phase_set();
        let want = [0.0, TAU / 4.0, TAU / 2.0, 3.0 * TAU / 4.0];
        assert_eq!(set.len(), 4);
        for (a, b) in set.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(set.iter().all(|&x| (0.0..TAU).contains(&x)));
    }

    #[test]
    fn mixing_weights() {
        let cfg = load_scenario("k_factor_db_bm = 10").unwrap();
        let l = cfg.link(Link::Bm);
        assert!((l.rho - (10.0f64 / 11.0).sqrt()).abs() < 1e-15);
        assert!((l.rho - 0.95346).abs() < 1e-5);
        assert!((l.rho * l.rho + l.varrho * l.varrho - 1.0).abs() < 1e-15);

        let pure = load_scenario("k_factor_db_bm = inf\nk_factor_db_rm = -inf").unwrap();
        assert_eq!((pure.link(Link::Bm).rho, pure.link(Link::Bm).varrho), (1.0, 0.0));
        assert_eq!((pure.link(Link::Rm).rho, pure.link(Link::Rm).varrho), (0.0, 1.0));
    }

    #[test]
    fn round_trip() {
        let cfg = load_scenario("tx_power_dbm = 27.5\nn_elements = 7\nk_factor_db_br = inf\nseed = 99").unwrap();
        let text = cfg.to_toml().unwrap();
        let again = load_scenario(&text).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.config_hash().unwrap(), again.config_hash().unwrap());
        // derived values are a pure function of the raw ones
        assert_eq!(ScenarioConfig::new(cfg.params().clone()).unwrap(), cfg);
    }

    #[test]
    fn unknown_key_is_reported_with_line() {
        let err = load_scenario("n_elements = 4\nbogus_key = 3\n").unwrap_err();
        match err {
            Error::ConfigParse { line, key, .. } => {
                assert_eq!(key.as_deref(), Some("bogus_key"));
                assert_eq!(line, Some(2));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn type_error_names_key() {
        let err = load_scenario("\n\nquant_bits = \"two\"\n").unwrap_err();
        match err {
            Error::ConfigParse { line, key, .. } => {
                assert_eq!(line, Some(3));
                assert_eq!(key.as_deref(), Some("quant_bits"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invariant_violations_name_the_field() {
        for (src, field) in [
            ("carrier_frequency_hz = 0", "carrier_frequency_hz"),
            ("bandwidth_hz = -1", "bandwidth_hz"),
            ("quant_bits = 0", "quant_bits"),
            ("total_slots = 0", "total_slots"),
            ("k_m = -5", "k_m"),
            ("placement_min_m = 10\nplacement_max_m = 0", "placement_min_m"),
            ("placement_step_m = 0", "placement_step_m"),
        ] {
            match load_scenario(src) {
                Err(Error::InvalidField { field: f, .. }) => assert_eq!(f, field, "{src}"),
                other => panic!("{src}: {other:?}"),
            }
        }
    }

    #[test]
    fn overrides_apply_after_file() {
        let cfg = load_scenario_with_overrides(
            "n_elements = 10\nrate_mode = \"mean_channel\"",
            &["n_elements=3".into(), "rate_mode=instantaneous".into(), "tx_power_dbm = 20".into()],
        )
        .unwrap();
        assert_eq!(cfg.n_elements(), 3);
        assert_eq!(cfg.params().rate_mode, RateMode::Instantaneous);
        assert_eq!(cfg.params().tx_power_dbm, 20.0);

        let err = load_scenario_with_overrides("", &["nope=1".into()]).unwrap_err();
        assert!(matches!(err, Error::ConfigParse { key: Some(ref k), .. } if k == "nope"));
        assert!(load_scenario_with_overrides("", &["missing_equals".into()]).is_err());
        let err = load_scenario_with_overrides("seed = 2", &["n_elements=many".into()]).unwrap_err();
        assert!(matches!(err, Error::ConfigParse { key: Some(ref k), .. } if k == "n_elements"));

        let set = ScenarioConfig::default().with_set("quant_bits", "3").unwrap();
        assert_eq!(set.levels(), 8);
    }

    #[test]
    fn placement_grid_default() {
        let grid = ScenarioConfig::default().placement_grid();
        assert_eq!(grid.len(), 41);
        assert_eq!(grid[0], -1000.0);
        assert_eq!(grid[20], 0.0);
        assert_eq!(grid[40], 1000.0);
        let one = load_scenario("placement_min_m = 5\nplacement_max_m = 5").unwrap();
        assert_eq!(one.placement_grid(), vec![5.0]);
    }
}
