//! Rational power spectral densities of the environmental noises.
//!
//! A [`RationalSpectrum`] is `amplitude · P(Ω)/Q(Ω)` with `P` and `Q` stored as
//! polynomials in `Ω²`, so every spectrum is even in `Ω` by construction.
//! Spectra are double-sided and symmetrized.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::poly;

/// Highest supported polynomial degree in `Ω²` (degree 16 in `Ω`).
pub const MAX_DEGREE: usize = 8;

/// Tolerance used when deciding whether a companion-matrix root is real.
const ROOT_TOL: f64 = 1e-10;

/// A real, even, nonnegative rational function of frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalSpectrum {
    numerator: Vec<f64>,
    denominator: Vec<f64>,
    amplitude: f64,
}

impl RationalSpectrum {
    /// Build and validate a spectrum. Coefficients are ascending in `Ω²`.
    pub fn new(numerator: &[f64], denominator: &[f64], amplitude: f64) -> Result<Self> {
        if !(amplitude.is_finite() && amplitude >= 0.0) {
            return Err(Error::InvalidSpectrum(format!(
                "amplitude must be finite and nonnegative, got {amplitude}"
            )));
        }
        if numerator.is_empty() || denominator.is_empty() {
            return Err(Error::InvalidSpectrum("empty coefficient list".into()));
        }
        if numerator.iter().chain(denominator).any(|c| !c.is_finite()) {
            return Err(Error::InvalidSpectrum("non-finite coefficient".into()));
        }
        let mut num = poly::trim(numerator);
        let mut den = poly::trim(denominator);
        if den.iter().all(|&c| c == 0.0) {
            return Err(Error::InvalidSpectrum("zero denominator".into()));
        }
        let num_zero = num.iter().all(|&c| c == 0.0);
        if num_zero {
            num = vec![0.0];
        }
        if poly::degree(&den) > MAX_DEGREE || poly::degree(&num) > MAX_DEGREE {
            return Err(Error::InvalidSpectrum(format!(
                "degree in Ω² exceeds the cap of {MAX_DEGREE}"
            )));
        }
        if !num_zero && poly::degree(&num) > poly::degree(&den) {
            return Err(Error::InvalidSpectrum(
                "deg(Q) must be at least deg(P)".into(),
            ));
        }
        for r in poly::roots(&den) {
            if is_nonnegative_real(r) {
                return Err(Error::InvalidSpectrum(format!(
                    "denominator vanishes at real frequency Ω = ±{}",
                    r.re.max(0.0).sqrt()
                )));
            }
        }
        // Q has constant sign on the real line; make it positive.
        if den[0] < 0.0 || (den[0] == 0.0 && den.iter().rev().find(|c| **c != 0.0).unwrap() < &0.0) {
            den.iter_mut().for_each(|c| *c = -*c);
            num.iter_mut().for_each(|c| *c = -*c);
        }
        let s = RationalSpectrum {
            numerator: num,
            denominator: den,
            amplitude,
        };
        if !num_zero {
            s.check_nonnegative()?;
        }
        Ok(s)
    }

    /// Constant spectrum of the given value.
    pub fn constant(value: f64) -> Result<Self> {
        Self::new(&[value], &[1.0], 1.0)
    }

    /// The zero spectrum.
    pub fn zero() -> Self {
        RationalSpectrum {
            numerator: vec![0.0],
            denominator: vec![1.0],
            amplitude: 0.0,
        }
    }

    /// Numerator coefficients, ascending in `Ω²`.
    pub fn numerator(&self) -> &[f64] {
        &self.numerator
    }

    /// Denominator coefficients, ascending in `Ω²`.
    pub fn denominator(&self) -> &[f64] {
        &self.denominator
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn is_zero(&self) -> bool {
        self.amplitude == 0.0 || self.numerator.iter().all(|&c| c == 0.0)
    }

    /// `amplitude · P(Ω)/Q(Ω)`.
    pub fn evaluate(&self, omega: f64) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let x = omega * omega;
        self.amplitude * poly::eval(&self.numerator, x) / poly::eval(&self.denominator, x)
    }

    /// Limit of the spectrum as `|Ω| → ∞` (nonzero only when `deg P = deg Q`).
    pub fn high_frequency_limit(&self) -> f64 {
        if self.is_zero() || self.numerator.len() < self.denominator.len() {
            return 0.0;
        }
        self.amplitude * self.numerator.last().unwrap() / self.denominator.last().unwrap()
    }

    /// Multiply the global amplitude by a nonnegative factor.
    pub fn scale(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor >= 0.0) {
            return Err(Error::InvalidSpectrum(format!(
                "scale factor must be finite and nonnegative, got {factor}"
            )));
        }
        Ok(RationalSpectrum {
            amplitude: self.amplitude * factor,
            ..self.clone()
        })
    }

    /// Whether the spectrum is a (possibly zero) constant.
    pub fn is_white(&self) -> bool {
        self.is_zero() || (self.numerator.len() == 1 && self.denominator.len() == 1)
    }

    fn check_nonnegative(&self) -> Result<()> {
        // P/Q can only change sign at nonnegative real roots of P (in Ω²),
        // so probing one point per gap between them is exhaustive.
        let mut pts: Vec<f64> = poly::roots(&self.numerator)
            .into_iter()
            .filter(|r| is_nonnegative_real(*r))
            .map(|r| r.re.max(0.0))
            .collect();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut probes = vec![0.0];
        for w in pts.windows(2) {
            probes.push(0.5 * (w[0] + w[1]));
        }
        if let Some(&last) = pts.last() {
            probes.push(2.0 * last + 1.0);
        }
        probes.extend((-12..=12).map(|k| 10f64.powi(k)));
        let vals: Vec<f64> = probes
            .iter()
            .map(|&x| poly::eval(&self.numerator, x) / poly::eval(&self.denominator, x))
            .collect();
        let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if let Some(v) = vals.iter().find(|&&v| v < -1e-12 * scale) {
            return Err(Error::InvalidSpectrum(format!(
                "spectrum takes negative value {v}"
            )));
        }
        Ok(())
    }
}

fn is_nonnegative_real(r: Complex64) -> bool {
    let scale = r.norm().max(1.0);
    r.im.abs() <= ROOT_TOL * scale && r.re >= -ROOT_TOL * scale
}

/// White force noise `2Ω_F²/ω_m`.
pub fn white_force(omega_f: f64, omega_m: f64) -> Result<RationalSpectrum> {
    if !(omega_f.is_finite() && omega_f > 0.0) {
        return Err(Error::InvalidSpectrum(format!(
            "force corner frequency must be positive and finite, got {omega_f}"
        )));
    }
    if !(omega_m.is_finite() && omega_m > 0.0) {
        return Err(Error::param(format!("omega_m must be positive, got {omega_m}")));
    }
    RationalSpectrum::constant(2.0 * omega_f * omega_f / omega_m)
}

/// White sensing noise `2ω_m/Ω_S²`; `Ω_S = +∞` yields the zero spectrum.
pub fn white_sensing(omega_s: f64, omega_m: f64) -> Result<RationalSpectrum> {
    if !(omega_m.is_finite() && omega_m > 0.0) {
        return Err(Error::param(format!("omega_m must be positive, got {omega_m}")));
    }
    if omega_s == f64::INFINITY {
        return Ok(RationalSpectrum::zero());
    }
    if !(omega_s.is_finite() && omega_s > 0.0) {
        return Err(Error::InvalidSpectrum(format!(
            "sensing corner frequency must be positive or +inf, got {omega_s}"
        )));
    }
    RationalSpectrum::constant(2.0 * omega_m / (omega_s * omega_s))
}

/// Force and sensing noise spectra, with corner frequencies when white.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    pub force: RationalSpectrum,
    pub sensing: RationalSpectrum,
    pub omega_f: Option<f64>,
    pub omega_s: Option<f64>,
}

impl NoiseModel {
    /// Arbitrary rational force and sensing spectra.
    pub fn new(force: RationalSpectrum, sensing: RationalSpectrum) -> Result<Self> {
        if force.is_zero() {
            return Err(Error::InvalidSpectrum(
                "force noise cannot vanish (alpha_F > 0)".into(),
            ));
        }
        Ok(NoiseModel {
            force,
            sensing,
            omega_f: None,
            omega_s: None,
        })
    }

    /// White force and sensing noise parameterized by their SQL-touching frequencies.
    pub fn white(omega_f: f64, omega_s: f64, omega_m: f64) -> Result<Self> {
        Ok(NoiseModel {
            force: white_force(omega_f, omega_m)?,
            sensing: white_sensing(omega_s, omega_m)?,
            omega_f: Some(omega_f),
            omega_s: Some(omega_s),
        })
    }

    /// Scale the sensing noise by `beta_s ≥ 0`. A recorded `Ω_S` becomes `Ω_S/√β_S`.
    pub fn with_sensing_scale(&self, beta_s: f64) -> Result<Self> {
        Ok(NoiseModel {
            force: self.force.clone(),
            sensing: self.sensing.scale(beta_s)?,
            omega_f: self.omega_f,
            omega_s: self.omega_s.map(|w| {
                if beta_s == 0.0 {
                    f64::INFINITY
                } else {
                    w / beta_s.sqrt()
                }
            }),
        })
    }

    /// Scale the force noise by `alpha_f > 0`. A recorded `Ω_F` becomes `Ω_F·√α_F`.
    pub fn with_force_scale(&self, alpha_f: f64) -> Result<Self> {
        if !(alpha_f > 0.0) {
            return Err(Error::InvalidSpectrum(format!(
                "alpha_F must be positive, got {alpha_f}"
            )));
        }
        Ok(NoiseModel {
            force: self.force.scale(alpha_f)?,
            sensing: self.sensing.clone(),
            omega_f: self.omega_f.map(|w| w * alpha_f.sqrt()),
            omega_s: self.omega_s,
        })
    }
}

/// Free-mass standard quantum limit `S_SQL(Ω) = 2ħ/(MΩ²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqlReference {
    pub mass: f64,
    pub hbar: f64,
    pub omega_m: f64,
}

impl Default for SqlReference {
    fn default() -> Self {
        SqlReference {
            mass: 1.0,
            hbar: 1.0,
            omega_m: 1.0,
        }
    }
}

impl SqlReference {
    pub fn new(mass: f64, hbar: f64, omega_m: f64) -> Result<Self> {
        if !(mass > 0.0 && hbar > 0.0 && omega_m > 0.0) {
            return Err(Error::param("mass, hbar and omega_m must be positive"));
        }
        Ok(SqlReference { mass, hbar, omega_m })
    }

    pub fn sql(&self, omega: f64) -> f64 {
        2.0 * self.hbar / (self.mass * omega * omega)
    }

    /// Squared displacement per unit dimensionless position quadrature.
    pub fn displacement_scale(&self) -> f64 {
        self.hbar / (self.mass * self.omega_m)
    }

    /// Force noise referred to displacement through the free-mass response.
    pub fn force_displacement(&self, force: &RationalSpectrum, omega: f64) -> f64 {
        let response = self.omega_m / (omega * omega);
        force.evaluate(omega) * response * response * self.displacement_scale()
    }

    /// Sensing noise referred to displacement.
    pub fn sensing_displacement(&self, sensing: &RationalSpectrum, omega: f64) -> f64 {
        sensing.evaluate(omega) * self.displacement_scale()
    }
}

/// Force- and sensing-noise displacement spectra as ratios to the SQL.
pub fn displacement_referred_terms(
    noise: &NoiseModel,
    sql: &SqlReference,
    omega: f64,
) -> Result<(f64, f64)> {
    if noise.omega_f.is_none() || noise.omega_s.is_none() {
        return Err(Error::InvalidSpectrum(
            "displacement referral needs a white noise model with corner frequencies".into(),
        ));
    }
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::param(format!("frequency must be positive, got {omega}")));
    }
    let s = sql.sql(omega);
    Ok((
        sql.force_displacement(&noise.force, omega) / s,
        sql.sensing_displacement(&noise.sensing, omega) / s,
    ))
}

/// Total environmental displacement noise over the SQL; `Ω_F²/Ω² + Ω²/Ω_S²` for white noise.
pub fn displacement_referred_sum(noise: &NoiseModel, sql: &SqlReference, omega: f64) -> Result<f64> {
    let (f, s) = displacement_referred_terms(noise, sql, omega)?;
    Ok(f + s)
}

/// Closed-form minimum of the white-noise displacement ratio: `(Ω*, 2Ω_F/Ω_S)` with `Ω* = √(Ω_FΩ_S)`.
pub fn minimum_displacement_ratio(noise: &NoiseModel) -> Result<(f64, f64)> {
    match (noise.omega_f, noise.omega_s) {
        (Some(f), Some(s)) if s.is_finite() => Ok(((f * s).sqrt(), 2.0 * f / s)),
        (Some(_), Some(_)) => Ok((f64::INFINITY, 0.0)),
        _ => Err(Error::InvalidSpectrum(
            "minimum ratio needs recorded corner frequencies".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimize::golden_section;
    use proptest::prelude::*;

    #[test]
    fn evaluate_examples() {
        assert_eq!(white_force(10.0, 1.0).unwrap().evaluate(3.7), 200.0);
        let zero = RationalSpectrum::new(&[0.0], &[1.0, 1.0], 1.0).unwrap();
        assert_eq!(zero.evaluate(3.0), 0.0);
        let lorentz = RationalSpectrum::new(&[1.0], &[1.0, 1.0], 1.0).unwrap();
        assert!((lorentz.evaluate(1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn white_constructors() {
        assert_eq!(white_force(1.0, 1.0).unwrap().evaluate(0.0), 2.0);
        assert!((white_force(100.0, 1.0).unwrap().evaluate(5.0) - 2e4).abs() < 1e-9);
        assert!(white_force(0.0, 1.0).is_err());
        assert!(white_force(-1.0, 1.0).is_err());
        assert_eq!(white_sensing(1.0, 1.0).unwrap().evaluate(9.0), 2.0);
        assert!(white_sensing(f64::INFINITY, 1.0).unwrap().is_zero());
        assert!((white_sensing(100.0, 1.0).unwrap().evaluate(1.0) - 2e-4).abs() < 1e-18);
        assert!(white_sensing(-1.0, 1.0).is_err());
    }

    #[test]
    fn scaling() {
        let s = RationalSpectrum::new(&[1.0, 2.0], &[3.0, 1.0, 1.0], 1.5).unwrap();
        let same = s.scale(1.0).unwrap();
        for w in [0.0, 0.3, 4.0, 100.0] {
            assert_eq!(same.evaluate(w), s.evaluate(w));
        }
        assert!(s.scale(0.0).unwrap().is_zero());
        assert_eq!(white_force(1.0, 1.0).unwrap().scale(4.0).unwrap().evaluate(2.0), 8.0);
        assert!(s.scale(-1.0).is_err());
    }

    #[test]
    fn rejects_invalid_spectra() {
        // Q = 1 - Ω² vanishes at Ω = 1.
        assert!(RationalSpectrum::new(&[1.0], &[1.0, -1.0], 1.0).is_err());
        // Q = Ω² vanishes at the origin.
        assert!(RationalSpectrum::new(&[1.0], &[0.0, 1.0], 1.0).is_err());
        // deg P > deg Q.
        assert!(RationalSpectrum::new(&[1.0, 0.0, 1.0], &[1.0, 1.0], 1.0).is_err());
        // P = 1 - Ω² changes sign.
        assert!(RationalSpectrum::new(&[1.0, -1.0], &[1.0, 0.0, 1.0], 1.0).is_err());
        // Degree cap.
        assert!(RationalSpectrum::new(&[1.0], &[1.0; 10], 1.0).is_err());
        assert!(RationalSpectrum::new(&[1.0], &[1.0], -1.0).is_err());
    }

    #[test]
    fn accepts_double_real_zero_and_negative_pair() {
        // P = (Ω² - 4)², Q = (1 + Ω²)³: nonnegative with a double zero at Ω = 2.
        let s = RationalSpectrum::new(&[16.0, -8.0, 1.0], &[1.0, 3.0, 3.0, 1.0], 1.0).unwrap();
        assert!(s.evaluate(2.0).abs() < 1e-12);
        // -P/-Q is normalized to P/Q.
        let t = RationalSpectrum::new(&[-1.0], &[-1.0, -1.0], 1.0).unwrap();
        assert!((t.evaluate(1.0) - 0.5).abs() < 1e-15);
        assert!(t.denominator()[0] > 0.0);
    }

    #[test]
    fn high_frequency_limit() {
        let s = RationalSpectrum::new(&[1.0, 3.0], &[1.0, 1.0], 2.0).unwrap();
        assert_eq!(s.high_frequency_limit(), 6.0);
        let t = RationalSpectrum::new(&[1.0], &[1.0, 1.0], 2.0).unwrap();
        assert_eq!(t.high_frequency_limit(), 0.0);
    }

    #[test]
    fn displacement_ratio_examples() {
        let sql = SqlReference::default();
        let n = NoiseModel::white(100.0, 100.0, 1.0).unwrap();
        let r = displacement_referred_sum(&n, &sql, 100.0).unwrap();
        assert!((r - 2.0).abs() < 1e-12);

        let n = NoiseModel::white(100.0, 400.0, 1.0).unwrap();
        let (w, m) = minimum_displacement_ratio(&n).unwrap();
        assert!((w - 200.0).abs() < 1e-12 && (m - 0.5).abs() < 1e-15);
        let at = displacement_referred_sum(&n, &sql, 200.0).unwrap();
        assert!((at - 0.5).abs() < 1e-12);

        // Force term alone touches the SQL at Ω_F.
        let (f, _) = displacement_referred_terms(&n, &sql, 100.0).unwrap();
        assert!((f - 1.0).abs() < 1e-12);

        let bare = NoiseModel::new(n.force.clone(), n.sensing.clone()).unwrap();
        assert!(displacement_referred_sum(&bare, &sql, 1.0).is_err());
    }

    #[test]
    fn sql_tangency_independent_of_units() {
        let sql = SqlReference::new(3.0, 0.2, 2.0).unwrap();
        let n = NoiseModel::white(50.0, 70.0, 2.0).unwrap();
        let (f, _) = displacement_referred_terms(&n, &sql, 50.0).unwrap();
        let (_, s) = displacement_referred_terms(&n, &sql, 70.0).unwrap();
        assert!((f - 1.0).abs() < 1e-12);
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn minimum_ratio_matches_golden_section() {
        let sql = SqlReference::default();
        for (f, s) in [(100.0, 100.0), (100.0, 400.0), (30.0, 10.0)] {
            let n = NoiseModel::white(f, s, 1.0).unwrap();
            let (_, analytic) = minimum_displacement_ratio(&n).unwrap();
            let (_, numeric) = golden_section(
                |lw| displacement_referred_sum(&n, &sql, lw.exp()).unwrap(),
                (f.min(s) / 10.0).ln(),
                (f.max(s) * 10.0).ln(),
                1e-12,
            );
            assert!((analytic - numeric).abs() < 1e-6 * analytic);
        }
    }

    #[test]
    fn nonnegative_on_dense_grid() {
        let s = RationalSpectrum::new(&[0.5, 0.0, 2.0], &[1.0, 0.1, 3.0, 1.0], 0.7).unwrap();
        for k in 0..=600 {
            let w = 10f64.powf(-3.0 + k as f64 * 0.01);
            assert!(s.evaluate(w) >= 0.0);
        }
    }

    proptest! {
        #[test]
        fn evenness(w in -1e4f64..1e4, a in 0.1f64..10.0, b in 0.0f64..5.0) {
            let s = RationalSpectrum::new(&[a, b], &[1.0, 2.0, 1.0], 1.3).unwrap();
            prop_assert_eq!(s.evaluate(w), s.evaluate(-w));
        }
    }
}
