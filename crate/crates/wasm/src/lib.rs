//! Browser bindings for the closed-form and semi-analytic parts of evapsim.
//! Monte Carlo runs are left to the CLI; everything here returns in well
//! under a second.

use evapsim_core::mc_engine::size_for_rate;
use evapsim_core::multiband::band_fractions;
use evapsim_core::scattering::{kappa_3d, kappa_two_term_2d, KRB_TABLE};
use evapsim_core::tb_kinetics::{run_tb_trajectory, TbConfig, TbState};
use evapsim_core::units::{hz_to_omega, KRB_MASS, K_B, NANOKELVIN};
use evapsim_core::{AngularLaw, Dim, TrapPotential};
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Relaxation time in collision times for a single `cos^{2α}` law, in
/// `dim` = 2 or 3 dimensions.
#[wasm_bindgen]
pub fn kappa(alpha: f64, dim: u32) -> Result<f64, JsError> {
    let law = AngularLaw::single(alpha).map_err(|e| JsError::new(&e.to_string()))?;
    match dim {
        2 => kappa_two_term_2d(&law).map_err(|e| JsError::new(&e.to_string())),
        3 => Ok(kappa_3d(alpha)),
        _ => Err(JsError::new("dim must be 2 or 3")),
    }
}

/// 2D κ of the tabulated KRb laws, as `[[E_nK, κ], ...]` JSON.
#[wasm_bindgen]
pub fn krb_kappas() -> String {
    let rows: Vec<[f64; 2]> = KRB_TABLE
        .iter()
        .map(|(e, _, law)| [*e, kappa_two_term_2d(law).unwrap_or(f64::NAN)])
        .collect();
    serde_json::to_string(&rows).expect("plain numbers serialize")
}

/// Thermal axial band populations at `temp_nk` in a lattice of axial
/// frequency `nu_z_khz`. With `n_max > 0` everything above band `n_max − 1`
/// is folded into the top kept band.
#[wasm_bindgen]
pub fn bands(temp_nk: f64, nu_z_khz: f64, n_max: u32) -> Result<Vec<f64>, JsError> {
    let cut = (n_max > 0).then_some(n_max as usize);
    band_fractions(temp_nk * NANOKELVIN, hz_to_omega(nu_z_khz * 1e3), cut).map_err(|e| JsError::new(&e.to_string()))
}

/// Constant-η truncated-Boltzmann evaporation in a harmonic trap of radial
/// frequency `nu_hz` (3D traps get a third axis at the same frequency).
/// The elastic cross section is set by the initial collision rate
/// `rate_per_omega·ω`. Returns JSON with the log phase-space-density gain
/// and the `(t, N, T_nK)` trajectory.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn evaporate(
    dim: u32,
    eta: f64,
    n0: f64,
    temp_nk: f64,
    nu_hz: f64,
    rate_per_omega: f64,
    zeta: f64,
    stop_fraction: f64,
) -> Result<String, JsError> {
    let err = |e: &dyn std::fmt::Display| JsError::new(&e.to_string());
    let w = hz_to_omega(nu_hz);
    let trap = match dim {
        2 => TrapPotential::harmonic2d(w, w),
        3 => TrapPotential::harmonic3d(w, w, w),
        _ => return Err(JsError::new("dim must be 2 or 3")),
    };
    let temp = temp_nk * NANOKELVIN;
    let size = size_for_rate(&trap, temp, rate_per_omega * w, n0, KRB_MASS).map_err(|e| err(&e))?;
    let mut cfg = TbConfig::new(trap, KRB_MASS, size, zeta, eta, 1.0);
    // coarser than the CLI defaults; plenty for a plot
    cfg.max_loss_per_step = 1e-2;
    cfg.tol = 1e-6;
    let d = if dim == 2 { Dim::Two } else { Dim::Three };
    let init = TbState::at_self_consistent_cut(d, n0, temp, eta).map_err(|e| err(&e))?;
    let traj = run_tb_trajectory(init, &cfg, stop_fraction).map_err(|e| err(&e))?;
    // thin to a few hundred points for plotting
    let stride = (traj.states.len() / 300).max(1);
    let last = traj.states.len() - 1;
    let points: Vec<[f64; 3]> = traj
        .states
        .iter()
        .enumerate()
        .filter(|(i, _)| i % stride == 0 || *i == last)
        .map(|(_, s)| [s.t, s.n, s.t_eff(d) / NANOKELVIN])
        .collect();
    Ok(json!({
        "log_psd_gain": traj.log_psd_gain,
        "cut_kT": init.eps_t / (K_B * temp),
        "points": points,
    })
    .to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isotropic_kappa_matches_core() {
        assert!((kappa(0.0, 2).unwrap() - kappa_two_term_2d(&AngularLaw::isotropic()).unwrap()).abs() < 1e-12);
        assert!(kappa(1.0, 2).unwrap() > kappa(0.0, 2).unwrap());
        assert!((kappa(0.0, 3).unwrap() - kappa_3d(0.0)).abs() < 1e-12);
    }

    #[test]
    fn band_fractions_sum_to_one() {
        let f = bands(800.0, 23.0, 3).unwrap();
        assert_eq!(f.len(), 3);
        assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(serde_json::from_str::<Vec<[f64; 2]>>(&krb_kappas()).unwrap().len(), 4);
    }

    #[test]
    fn evaporation_returns_a_trajectory() {
        let text = evaporate(2, 2.5, 2e4, 500.0, 20.0, 2.0, 0.005, 0.1).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(v["log_psd_gain"].as_f64().unwrap().is_finite());
        let pts = v["points"].as_array().unwrap();
        assert!(pts.len() > 10);
        assert!(pts.last().unwrap()[1].as_f64().unwrap() <= 0.1 * 2e4 + 1e-6);
    }
}
