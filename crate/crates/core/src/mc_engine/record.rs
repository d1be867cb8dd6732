use std::io::Write;

use serde::{Deserialize, Serialize};

use super::Counters;
use crate::ensemble::{Dim, MacroState};
use crate::units::{K_B, NANOKELVIN};

/// One sample of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    /// Surviving particles (real-valued for the rate-equation solver).
    pub n: f64,
    /// `E/(d N k_B)`, K.
    pub temp: f64,
    /// Per-axis temperatures, K.
    pub temp_axis: Vec<f64>,
    /// Total energy, J.
    pub energy: f64,
    pub omega_psd: Option<f64>,
    pub n_elastic: f64,
    /// Reactive events (each removes two particles).
    pub n_reactive: f64,
    pub n_evap: f64,
}

impl TrajectoryPoint {
    pub fn from_state(t: f64, ms: &MacroState, c: &Counters) -> Self {
        Self {
            t,
            n: ms.n as f64,
            temp: ms.t_eff,
            temp_axis: ms.t_axis.clone(),
            energy: ms.energy,
            omega_psd: ms.omega_psd,
            n_elastic: c.elastic as f64,
            n_reactive: c.reactive_pairs as f64,
            n_evap: c.evaporated as f64,
        }
    }
}

/// Time series of macroscopic quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub dim: Dim,
    pub points: Vec<TrajectoryPoint>,
}

impl TrajectoryRecord {
    pub fn new(dim: Dim) -> Self {
        Self {
            dim,
            points: Vec::new(),
        }
    }

    pub fn push(&mut self, p: TrajectoryPoint) {
        self.points.push(p);
    }

    pub fn first(&self) -> &TrajectoryPoint {
        &self.points[0]
    }

    pub fn last(&self) -> &TrajectoryPoint {
        self.points.last().expect("record is never empty")
    }

    /// `ln(Ω/Ω₀)` where the surviving fraction first reaches `frac`,
    /// interpolated linearly in `ln N`. `None` if the run never got there.
    pub fn log_psd_gain_at(&self, frac: f64) -> Option<f64> {
        let p0 = self.first();
        let o0 = p0.omega_psd?;
        let target = frac * p0.n;
        for w in self.points.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            if a.n >= target && b.n <= target {
                let (la, lb) = (a.omega_psd?.ln(), b.omega_psd?.ln());
                if a.n == b.n {
                    return Some(lb - o0.ln());
                }
                let s = (a.n.ln() - target.ln()) / (a.n.ln() - b.n.ln());
                return Some(la + s * (lb - la) - o0.ln());
            }
        }
        None
    }

    /// Energy removed per particle lost, in units of `k_B T̄` with `T̄` the
    /// mean temperature over the window, between the first sample and the
    /// first sample at or below `frac·N₀` survivors.
    pub fn energy_per_loss(&self, frac: f64) -> Option<f64> {
        let p0 = self.first();
        let end = self.points.iter().position(|p| p.n <= frac * p0.n)?;
        if end == 0 {
            return None;
        }
        let p1 = &self.points[end];
        let mean_t = self.points[..=end].iter().map(|p| p.temp).sum::<f64>() / (end + 1) as f64;
        Some((p0.energy - p1.energy) / (p0.n - p1.n) / (K_B * mean_t))
    }

    /// CSV with columns `t_s, N, T_nK, Tx_nK, Ty_nK[, Tz_nK], Omega,
    /// n_elastic, n_reactive, n_evap`.
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["t_s", "N", "T_nK", "Tx_nK", "Ty_nK"];
        if self.dim == Dim::Three {
            header.push("Tz_nK");
        }
        header.extend(["Omega", "n_elastic", "n_reactive", "n_evap"]);
        wtr.write_record(&header).map_err(std::io::Error::other)?;
        for p in &self.points {
            let mut rec = vec![p.t.to_string(), p.n.to_string(), (p.temp / NANOKELVIN).to_string()];
            for k in 0..self.dim.n() {
                rec.push(p.temp_axis.get(k).map_or(f64::NAN, |t| t / NANOKELVIN).to_string());
            }
            rec.push(p.omega_psd.unwrap_or(f64::NAN).to_string());
            rec.push(p.n_elastic.to_string());
            rec.push(p.n_reactive.to_string());
            rec.push(p.n_evap.to_string());
            wtr.write_record(&rec).map_err(std::io::Error::other)?;
        }
        wtr.flush()
    }
}
