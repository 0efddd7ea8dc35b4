//! Train kinematics and the three link distances.

use crate::scenario::ScenarioConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotGeometry {
    pub t: u32,
    /// Signed horizontal offset of the train from the BS foot, `k - v·t·τ`.
    pub x_offset_m: f64,
    pub d_bm_m: f64,
    pub d_br_m: f64,
    pub d_rm_m: f64,
}

/// Distances at slot `t` with the RIS `d_ris_l` meters along the track from
/// the BS. All RIS elements share one distance on each side (far field).
pub fn slot_geometry(cfg: &ScenarioConfig, t: u32, d_ris_l: f64) -> SlotGeometry {
    let x = cfg.params().k_m - cfg.slot_advance_m() * t as f64;
    geometry_at_offset(cfg, t, x, d_ris_l)
}

pub(crate) fn geometry_at_offset(cfg: &ScenarioConfig, t: u32, x: f64, d_ris_l: f64) -> SlotGeometry {
    let p = cfg.params();
    let d_bm_m = norm3(p.d_bs_v_m, p.h_bs_m - p.h_mr_m, x);
    let d_br_m = norm3(d_ris_l, p.h_bs_m - p.h_ris_m, p.d_bs_v_m - p.d_ris_v_m);
    let d_rm_m = norm3(p.d_ris_v_m, p.h_ris_m - p.h_mr_m, x - d_ris_l);
    SlotGeometry {
        t,
        x_offset_m: x,
        d_bm_m,
        d_br_m,
        d_rm_m,
    }
}

fn norm3(a: f64, b: f64, c: f64) -> f64 {
    (a * a + b * b + c * c).sqrt()
}
