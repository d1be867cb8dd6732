//! Empirical cross-section models for dipolar molecule collisions.
//!
//! The angular law is treated as a probability density in the scattering
//! angle; all magnitude lives in the energy-dependent total cross section
//! (a length in 2D).

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::special::{gauss_legendre, ln_gamma};
use crate::units::{nk_to_joule, CM};

#[derive(Debug, Error)]
pub enum ScatteringError {
    #[error("parameter `{name}` must be non-negative and finite, got {value}")]
    NegativeParameter { name: &'static str, value: f64 },
    #[error("angular law has no weight (a + a' = 0)")]
    ZeroWeight,
    #[error("cross-section table is empty")]
    EmptyTable,
    #[error("cross-section table energies must be strictly increasing (row {row})")]
    NotIncreasing { row: usize },
    #[error("cross-section values must be positive (row {row})")]
    NonPositive { row: usize },
    #[error("collision energy must be positive, got {0}")]
    BadEnergy(f64),
    #[error("no reactive model configured")]
    ReactiveUnconfigured,
    #[error("reading cross-section table: {0}")]
    Csv(#[from] csv::Error),
    #[error("reading cross-section table: {0}")]
    Io(#[from] std::io::Error),
}

/// `I(x) = ∫₀^{2π} cos^{2x}φ dφ = 2√π Γ(x+½)/Γ(x+1)`.
pub fn cos_power_integral(x: f64) -> f64 {
    2.0 * PI.sqrt() * (ln_gamma(x + 0.5) - ln_gamma(x + 1.0)).exp()
}

/// Two-term angular law `a·cos^{2α}φ + a'·cos^{2α'}φ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngularLaw {
    pub a: f64,
    pub a_prime: f64,
    pub alpha: f64,
    pub alpha_prime: f64,
}

impl AngularLaw {
    pub fn new(a: f64, a_prime: f64, alpha: f64, alpha_prime: f64) -> Result<Self, ScatteringError> {
        let law = Self {
            a,
            a_prime,
            alpha,
            alpha_prime,
        };
        law.validate()?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<(), ScatteringError> {
        for (name, value) in [
            ("a", self.a),
            ("a_prime", self.a_prime),
            ("alpha", self.alpha),
            ("alpha_prime", self.alpha_prime),
        ] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(ScatteringError::NegativeParameter { name, value });
            }
        }
        if self.a + self.a_prime <= 0.0 {
            return Err(ScatteringError::ZeroWeight);
        }
        Ok(())
    }

    /// Normalized single-term law `cos^{2α}φ / I(α)`.
    pub fn single(alpha: f64) -> Result<Self, ScatteringError> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(ScatteringError::NegativeParameter { name: "alpha", value: alpha });
        }
        Self::new(1.0 / cos_power_integral(alpha), 0.0, alpha, 0.0)
    }

    pub fn isotropic() -> Self {
        Self {
            a: 1.0 / (2.0 * PI),
            a_prime: 0.0,
            alpha: 0.0,
            alpha_prime: 0.0,
        }
    }

    /// Density per radian at angle `phi`.
    pub fn eval(&self, phi: f64) -> f64 {
        let c2 = phi.cos().powi(2);
        let mut v = self.a * c2.powf(self.alpha);
        if self.a_prime != 0.0 {
            v += self.a_prime * c2.powf(self.alpha_prime);
        }
        v
    }

    /// `∫₀^{2π}` of the law.
    pub fn norm(&self) -> f64 {
        self.a * cos_power_integral(self.alpha) + self.a_prime * cos_power_integral(self.alpha_prime)
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm() - 1.0).abs() <= 0.05
    }

    /// Fractions of the total weight carried by each term.
    pub fn weights(&self) -> (f64, f64) {
        let w = self.a * cos_power_integral(self.alpha);
        let wp = self.a_prime * cos_power_integral(self.alpha_prime);
        (w / (w + wp), wp / (w + wp))
    }
}

/// Evaluate `law` at `phi`, rejecting invalid parameters.
pub fn eval_angular_law(law: &AngularLaw, phi: f64) -> Result<f64, ScatteringError> {
    law.validate()?;
    Ok(law.eval(phi))
}

/// Rows of the fitted KRb table: (E_c in nK, λ in cm, law).
pub const KRB_TABLE: [(f64, f64, AngularLaw); 4] = [
    (1.0, 0.38e-6, AngularLaw { a: 0.31, a_prime: 0.0005, alpha: 1.00, alpha_prime: 2.19 }),
    (10.0, 3.67e-6, AngularLaw { a: 0.27, a_prime: 0.06, alpha: 1.00, alpha_prime: 2.09 }),
    (100.0, 5.99e-6, AngularLaw { a: 0.24, a_prime: 0.21, alpha: 1.19, alpha_prime: 7.03 }),
    (1000.0, 3.42e-6, AngularLaw { a: 0.34, a_prime: 0.40, alpha: 2.47, alpha_prime: 26.40 }),
];

/// Angular law from the built-in table closest to `e_nk` (nK) on a log scale.
pub fn krb_law_nearest(e_nk: f64) -> AngularLaw {
    KRB_TABLE
        .iter()
        .min_by(|a, b| {
            let da = (a.0.ln() - e_nk.ln()).abs();
            let db = (b.0.ln() - e_nk.ln()).abs();
            da.total_cmp(&db)
        })
        .map(|row| row.2)
        .expect("table is non-empty")
}

/// `(16/15)(2α+2)`: collisions per particle to thermalize a 2D harmonic gas.
pub fn kappa_single_2d(alpha: f64) -> f64 {
    16.0 / 15.0 * (2.0 * alpha + 2.0)
}

/// Two-term generalisation of [`kappa_single_2d`] with weights normalized
/// by the integrated strength of each term.
pub fn kappa_two_term_2d(law: &AngularLaw) -> Result<f64, ScatteringError> {
    law.validate()?;
    let (w, wp) = law.weights();
    Ok(16.0 / 15.0 / (w / (2.0 * law.alpha + 2.0) + wp / (2.0 * law.alpha_prime + 2.0)))
}

/// `(5/6)(2α+3)`: the 3D harmonic counterpart.
pub fn kappa_3d(alpha: f64) -> f64 {
    5.0 / 6.0 * (2.0 * alpha + 3.0)
}

const SAMPLER_NODES: usize = 4096;

/// Inverse-CDF sampler for the in-plane scattering angle.
///
/// The law is invariant under `φ → π−φ` and `φ → 2π−φ`, so the CDF is
/// tabulated on the first quadrant only and the draw is unfolded into the
/// quadrant selected by `4u`.
#[derive(Debug, Clone)]
pub struct AngleSampler {
    law: AngularLaw,
    cdf: Vec<f64>,
}

impl AngleSampler {
    pub fn new(law: &AngularLaw) -> Result<Self, ScatteringError> {
        law.validate()?;
        let h = FRAC_PI_2 / SAMPLER_NODES as f64;
        let (gx, gw) = gauss_legendre(8);
        let mut cdf = Vec::with_capacity(SAMPLER_NODES + 1);
        cdf.push(0.0);
        let mut acc = 0.0;
        for i in 0..SAMPLER_NODES {
            let lo = i as f64 * h;
            let cell: f64 = gx
                .iter()
                .zip(&gw)
                .map(|(x, w)| w * law.eval(lo + 0.5 * h * (x + 1.0)))
                .sum::<f64>()
                * 0.5
                * h;
            acc += cell;
            cdf.push(acc);
        }
        for v in cdf.iter_mut() {
            *v /= acc;
        }
        Ok(Self { law: *law, cdf })
    }

    pub fn law(&self) -> &AngularLaw {
        &self.law
    }

    /// Invert the quadrant CDF at `r ∈ [0, 1]`.
    fn quadrant(&self, r: f64) -> f64 {
        let h = FRAC_PI_2 / SAMPLER_NODES as f64;
        if r <= 0.0 {
            return 0.0;
        }
        if r >= 1.0 {
            return FRAC_PI_2;
        }
        let i = self.cdf.partition_point(|&c| c <= r).clamp(1, SAMPLER_NODES) - 1;
        let (c0, c1) = (self.cdf[i], self.cdf[i + 1]);
        let frac = if c1 > c0 { (r - c0) / (c1 - c0) } else { 0.0 };
        (i as f64 + frac) * h
    }

    /// Scattering angle in `[0, 2π)` for a uniform draw `u ∈ [0, 1)`.
    pub fn sample(&self, u: f64) -> f64 {
        let q = 4.0 * u.clamp(0.0, 1.0);
        let k = (q.floor() as usize).min(3);
        let r = q - k as f64;
        match k {
            0 => self.quadrant(r),
            1 => PI - self.quadrant(1.0 - r),
            2 => PI + self.quadrant(r),
            _ => 2.0 * PI - self.quadrant(1.0 - r),
        }
    }
}

/// Cosine of the 3D polar deflection for density `∝ |cos θ|^{2α}` in solid
/// angle, from two uniform draws.
pub fn sample_cos_polar_3d(alpha: f64, u_mag: f64, u_sign: f64) -> f64 {
    let c = u_mag.powf(1.0 / (2.0 * alpha + 1.0));
    if u_sign < 0.5 {
        c
    } else {
        -c
    }
}

/// How the reactive cross section is tied to the elastic one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ReactiveModel {
    /// `λ_re = ζ·λ_el(E)`.
    Ratio { zeta: f64 },
    /// `λ_re = c·E^{1/2}` with `c` in m/J^{1/2}.
    PowerLaw { coeff: f64 },
}

/// Energy-dependent total cross sections plus fitted angular laws.
#[derive(Debug, Clone)]
pub struct CrossSectionTable {
    /// (E in J, λ in m), strictly increasing in E.
    elastic: Vec<(f64, f64)>,
    reactive: Option<ReactiveModel>,
    angular: Vec<(f64, AngularLaw)>,
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    #[serde(rename = "E_c_nK")]
    e_c_nk: f64,
    lambda_el_cm: f64,
    a: f64,
    a_prime: f64,
    alpha: f64,
    alpha_prime: f64,
}

impl CrossSectionTable {
    /// Build from rows of (E in nK, λ in cm, angular law).
    pub fn from_rows(rows: &[(f64, f64, AngularLaw)]) -> Result<Self, ScatteringError> {
        if rows.is_empty() {
            return Err(ScatteringError::EmptyTable);
        }
        let mut elastic = Vec::with_capacity(rows.len());
        let mut angular = Vec::with_capacity(rows.len());
        for (row, &(e, lam, law)) in rows.iter().enumerate() {
            if !(e > 0.0 && lam > 0.0) {
                return Err(ScatteringError::NonPositive { row });
            }
            if row > 0 && e <= rows[row - 1].0 {
                return Err(ScatteringError::NotIncreasing { row });
            }
            law.validate()?;
            elastic.push((nk_to_joule(e), lam * CM));
            angular.push((nk_to_joule(e), law));
        }
        Ok(Self {
            elastic,
            reactive: None,
            angular,
        })
    }

    /// The built-in KRb table.
    pub fn krb() -> Self {
        Self::from_rows(&KRB_TABLE).expect("built-in table is valid")
    }

    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self, ScatteringError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut rows = Vec::new();
        for rec in rdr.deserialize() {
            let r: CsvRow = rec?;
            rows.push((
                r.e_c_nk,
                r.lambda_el_cm,
                AngularLaw {
                    a: r.a,
                    a_prime: r.a_prime,
                    alpha: r.alpha,
                    alpha_prime: r.alpha_prime,
                },
            ));
        }
        Self::from_rows(&rows)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self, ScatteringError> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn with_reactive(mut self, model: ReactiveModel) -> Self {
        self.reactive = Some(model);
        self
    }

    /// Power-law reactive mode anchored so `λ_re/λ_el = zeta_ref` at `e_ref` (J).
    pub fn with_reactive_power_law(self, zeta_ref: f64, e_ref: f64) -> Result<Self, ScatteringError> {
        let coeff = zeta_ref * self.total_elastic(e_ref)? / e_ref.sqrt();
        Ok(self.with_reactive(ReactiveModel::PowerLaw { coeff }))
    }

    pub fn reactive_model(&self) -> Option<ReactiveModel> {
        self.reactive
    }

    /// Total elastic cross section (m) at collision energy `e` (J).
    pub fn total_elastic(&self, e: f64) -> Result<f64, ScatteringError> {
        if !(e > 0.0) {
            return Err(ScatteringError::BadEnergy(e));
        }
        let pts = &self.elastic;
        let (e0, l0) = pts[0];
        if e == e0 {
            return Ok(l0);
        }
        // With a single point only the threshold law is known.
        if e < e0 || pts.len() == 1 {
            return Ok(l0 * (e / e0).powf(1.5));
        }
        let i = match pts.iter().position(|&(ei, _)| ei >= e) {
            Some(i) => i,
            None => pts.len() - 1,
        };
        let (ea, la) = pts[i - 1];
        let (eb, lb) = pts[i];
        if e == eb {
            return Ok(lb);
        }
        let slope = (lb / la).ln() / (eb / ea).ln();
        Ok(la * (e / ea).powf(slope))
    }

    /// Total reactive cross section (m) at collision energy `e` (J).
    pub fn total_reactive(&self, e: f64) -> Result<f64, ScatteringError> {
        match self.reactive {
            None => Err(ScatteringError::ReactiveUnconfigured),
            Some(ReactiveModel::Ratio { zeta }) => Ok(zeta * self.total_elastic(e)?),
            Some(ReactiveModel::PowerLaw { coeff }) => {
                if !(e > 0.0) {
                    return Err(ScatteringError::BadEnergy(e));
                }
                Ok(coeff * e.sqrt())
            }
        }
    }

    /// Angular law of the tabulated energy nearest to `e` on a log scale.
    pub fn angular_law_at(&self, e: f64) -> AngularLaw {
        self.angular
            .iter()
            .min_by(|a, b| (a.0 / e).ln().abs().total_cmp(&(b.0 / e).ln().abs()))
            .map(|r| r.1)
            .expect("table is non-empty")
    }

    pub fn elastic_points(&self) -> &[(f64, f64)] {
        &self.elastic
    }
}
