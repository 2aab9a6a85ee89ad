//! Input-field spectra: vacuum, frequency-independent and frequency-dependent squeezing.
//!
//! Frequency-dependent squeezing reflects squeezed light off a lossless
//! detuned single-pole filter cavity.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::optimize::golden_section;
use crate::plant::{susceptibility, PlantParams};

/// State of the probe light entering the interaction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InputFieldState {
    Vacuum,
    /// Frequency-independent squeezing by `e^r` at angle `θ`.
    Fis { r: f64, theta: f64 },
    /// Squeezing followed by a filter cavity of half-bandwidth `γ_f` and detuning `Δ`.
    Fds {
        r: f64,
        theta: f64,
        gamma_f: f64,
        delta: f64,
    },
}

impl InputFieldState {
    pub fn fis(r: f64, theta: f64) -> Result<Self> {
        check_squeeze(r, theta)?;
        Ok(InputFieldState::Fis { r, theta })
    }

    pub fn fds(r: f64, theta: f64, gamma_f: f64, delta: f64) -> Result<Self> {
        check_squeeze(r, theta)?;
        if !(gamma_f.is_finite() && gamma_f > 0.0) {
            return Err(Error::param(format!("gamma_f must be positive, got {gamma_f}")));
        }
        if !delta.is_finite() {
            return Err(Error::param("filter detuning must be finite"));
        }
        Ok(InputFieldState::Fds {
            r,
            theta,
            gamma_f,
            delta,
        })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            InputFieldState::Vacuum => "vacuum",
            InputFieldState::Fis { .. } => "fis",
            InputFieldState::Fds { .. } => "fds",
        }
    }

    pub fn r(&self) -> f64 {
        match *self {
            InputFieldState::Vacuum => 0.0,
            InputFieldState::Fis { r, .. } | InputFieldState::Fds { r, .. } => r,
        }
    }

    pub fn theta(&self) -> f64 {
        match *self {
            InputFieldState::Vacuum => 0.0,
            InputFieldState::Fis { theta, .. } | InputFieldState::Fds { theta, .. } => theta,
        }
    }

    /// Filter half-bandwidth, zero when there is no filter.
    pub fn gamma_f(&self) -> f64 {
        match *self {
            InputFieldState::Fds { gamma_f, .. } => gamma_f,
            _ => 0.0,
        }
    }

    /// Filter detuning, zero when there is no filter.
    pub fn delta(&self) -> f64 {
        match *self {
            InputFieldState::Fds { delta, .. } => delta,
            _ => 0.0,
        }
    }

    /// Spectrum of the squeezer output before any filter.
    pub fn squeezer_matrix(&self) -> Matrix2<f64> {
        squeeze_matrix(self.r(), self.theta())
    }
}

fn check_squeeze(r: f64, theta: f64) -> Result<()> {
    if !(r.is_finite() && r >= 0.0) {
        return Err(Error::param(format!("squeeze factor must be nonnegative, got {r}")));
    }
    if !theta.is_finite() {
        return Err(Error::param("squeeze angle must be finite"));
    }
    Ok(())
}

/// `R(θ) diag(e^{−2r}, e^{2r}) R(θ)ᵀ`.
pub fn squeeze_matrix(r: f64, theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    let rot = Matrix2::new(c, -s, s, c);
    rot * Matrix2::from_diagonal(&Vector2::new((-2.0 * r).exp(), (2.0 * r).exp())) * rot.transpose()
}

/// Upper-sideband reflection coefficient of the filter cavity.
pub fn reflection(omega: f64, gamma_f: f64, delta: f64) -> Complex64 {
    let x = Complex64::new(0.0, omega - delta);
    let h = Complex64::new(0.5 * gamma_f, 0.0);
    (h + x) / (h - x)
}

/// Two-photon transfer matrix of the filter cavity in the quadrature basis.
///
/// Normalized so that out-of-band light is transmitted unchanged (`A → I`).
pub fn filter_transfer(omega: f64, gamma_f: f64, delta: f64) -> Matrix2<Complex64> {
    let rp = reflection(omega, gamma_f, delta);
    let rm = reflection(-omega, gamma_f, delta).conj();
    // T diag(ρ₊, ρ₋) T⁻¹ with T = [[1, 1], [−i, i]]/√2.
    let sum = (rp + rm) * 0.5;
    let dif = (rp - rm) * 0.5;
    let i = Complex64::new(0.0, 1.0);
    -Matrix2::new(sum, i * dif, -i * dif, sum)
}

/// Symmetrized spectrum `S_uu(Ω)` of the input field quadratures.
pub fn input_spectrum(omega: f64, s: &InputFieldState) -> Matrix2<f64> {
    match *s {
        InputFieldState::Vacuum => Matrix2::identity(),
        InputFieldState::Fis { r, theta } => squeeze_matrix(r, theta),
        InputFieldState::Fds {
            r,
            theta,
            gamma_f,
            delta,
        } => {
            if r == 0.0 {
                return Matrix2::identity();
            }
            let a = filter_transfer(omega, gamma_f, delta);
            let sq = squeeze_matrix(r, theta).map(|x| Complex64::new(x, 0.0));
            let out = a * sq * a.adjoint();
            let re = out.map(|z| z.re);
            (re + re.transpose()) * 0.5
        }
    }
}

/// Quantum-noise-only spectrum of the detected phase quadrature; shot noise is 1.
pub fn squeezed_quantum_noise_spectrum(p: &PlantParams, s: &InputFieldState, omega: f64) -> Result<f64> {
    let chi = susceptibility(omega, p)?;
    let g = p.coupling();
    let c = chi * (g * g);
    let suu = input_spectrum(omega, s).map(|x| Complex64::new(x, 0.0));
    let row = nalgebra::RowVector2::new(c, Complex64::new(1.0, 0.0));
    let val = (row * suu * row.adjoint())[(0, 0)].re;
    Ok(p.eta * val + (1.0 - p.eta))
}

/// Squeezed quantum noise relative to the vacuum-input quantum noise.
pub fn quantum_noise_ratio(p: &PlantParams, s: &InputFieldState, omega: f64) -> Result<f64> {
    Ok(squeezed_quantum_noise_spectrum(p, s, omega)?
        / squeezed_quantum_noise_spectrum(p, &InputFieldState::Vacuum, omega)?)
}

const TUNE_GRID: usize = 48;
const TUNE_SCAN: usize = 24;

/// Mean of `ln(S_sq/S_vac)` on a log-spaced grid across `band`.
pub fn band_objective(p: &PlantParams, s: &InputFieldState, band: (f64, f64)) -> Result<f64> {
    let (lo, hi) = (band.0.ln(), band.1.ln());
    let mut acc = 0.0;
    for i in 0..TUNE_GRID {
        let w = (lo + (hi - lo) * (i as f64 + 0.5) / TUNE_GRID as f64).exp();
        acc += quantum_noise_ratio(p, s, w)?.ln();
    }
    Ok(acc / TUNE_GRID as f64)
}

/// Default tuning band `[Ω_q/10, 10Ω_q]`.
pub fn default_band(p: &PlantParams) -> (f64, f64) {
    let centre = if p.omega_q > 0.0 { p.omega_q } else { p.omega_m };
    (centre / 10.0, centre * 10.0)
}

/// Choose filter parameters so that squeezing suppresses quantum noise across `band`.
///
/// The squeeze angle is fixed at π/2 (phase quadrature squeezed where shot
/// noise dominates) and the bandwidth is tied to the detuning as `γ_f = 2|Δ|`.
/// `ln|Δ|` is scanned coarsely for both signs and refined by golden section.
pub fn autotune(p: &PlantParams, r: f64, band: (f64, f64)) -> Result<InputFieldState> {
    if !(band.0 > 0.0 && band.1 > band.0 && band.1.is_finite()) {
        return Err(Error::param(format!(
            "tuning band must satisfy 0 < lo < hi, got {:?}",
            band
        )));
    }
    check_squeeze(r, FRAC_PI_2)?;
    if r == 0.0 {
        return Ok(InputFieldState::Vacuum);
    }
    let make = |ld: f64, sign: f64| {
        let d = ld.exp();
        InputFieldState::fds(r, FRAC_PI_2, 2.0 * d, sign * d)
    };
    let lo = (band.0 / 10.0).ln();
    let hi = (band.1 * 10.0).ln();
    let step = (hi - lo) / (TUNE_SCAN - 1) as f64;
    let mut best: Option<(f64, f64, f64)> = None;
    for sign in [1.0, -1.0] {
        let mut scan = Vec::with_capacity(TUNE_SCAN);
        for i in 0..TUNE_SCAN {
            let ld = lo + step * i as f64;
            scan.push((ld, band_objective(p, &make(ld, sign)?, band)?));
        }
        let (i_min, _) = scan
            .iter()
            .enumerate()
            .min_by(|a, b| a.1 .1.partial_cmp(&b.1 .1).unwrap())
            .unwrap();
        let a = scan[i_min].0 - step;
        let b = scan[i_min].0 + step;
        let (ld, val) = golden_section(
            |ld| {
                make(ld, sign)
                    .and_then(|s| band_objective(p, &s, band))
                    .unwrap_or(f64::INFINITY)
            },
            a,
            b,
            1e-6,
        );
        if best.map_or(true, |(_, _, v)| val < v) {
            best = Some((ld, sign, val));
        }
    }
    let (ld, sign, _) = best.unwrap();
    make(ld, sign)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn max_abs(m: Matrix2<f64>) -> f64 {
        m.iter().fold(0.0f64, |a, x| a.max(x.abs()))
    }

    #[test]
    fn vacuum_and_fis() {
        assert_eq!(input_spectrum(3.0, &InputFieldState::Vacuum), Matrix2::identity());
        let s = input_spectrum(9.0, &InputFieldState::fis(1.0, 0.0).unwrap());
        let want = Matrix2::new((-2.0f64).exp(), 0.0, 0.0, 2.0f64.exp());
        assert!(max_abs(s - want) < 1e-15);
    }

    #[test]
    fn zero_squeezing_is_vacuum() {
        let fis = InputFieldState::fis(0.0, 0.7).unwrap();
        let fds = InputFieldState::fds(0.0, 0.7, 3.0, 1.0).unwrap();
        for w in [0.0, 1.0, 50.0] {
            assert_eq!(input_spectrum(w, &fis), Matrix2::identity());
            assert_eq!(input_spectrum(w, &fds), Matrix2::identity());
        }
    }

    #[test]
    fn broadband_filter_matches_fis() {
        // The residual sideband rotation is at most 4|Δ|/γ_f radians, which
        // moves S_uu entries by at most that times 2 sinh 2r.
        let (r, th, d) = (1.0, 0.4, 2.0);
        let fis = InputFieldState::fis(r, th).unwrap();
        for ratio in [1e6, 1e9] {
            let gf = ratio * d;
            let fds = InputFieldState::fds(r, th, gf, d).unwrap();
            let bound = 4.0 * d / gf * 2.0 * (2.0 * r).sinh() * 1.01;
            for w in [0.0, 0.5, 2.0, 30.0, 100.0, 1e4] {
                let diff = max_abs(input_spectrum(w, &fis) - input_spectrum(w, &fds));
                assert!(diff <= bound, "ratio={ratio} Ω={w} diff={diff}");
            }
        }
        let fds = InputFieldState::fds(r, th, 1e9 * d, d).unwrap();
        assert!(max_abs(input_spectrum(3.0, &fis) - input_spectrum(3.0, &fds)) < 1e-6);
    }

    #[test]
    fn filter_limits() {
        // Zero detuning: a phase times the identity.
        let a = filter_transfer(0.7, 2.0, 0.0);
        assert!(a[(0, 1)].norm() < 1e-15 && a[(1, 0)].norm() < 1e-15);
        assert!((a[(0, 0)] - a[(1, 1)]).norm() < 1e-15);
        // Out of band.
        let a = filter_transfer(1e9, 2.0, 3.0);
        assert!((a - Matrix2::identity().map(|x| Complex64::new(x, 0.0))).norm() < 1e-8);
        let a = filter_transfer(-1e9, 2.0, 3.0);
        assert!((a - Matrix2::identity().map(|x| Complex64::new(x, 0.0))).norm() < 1e-8);
    }

    #[test]
    fn filter_poles_are_causal() {
        // Continue both sideband factors to complex Ω: their poles are
        // Δ − iγ_f/2 and −Δ − iγ_f/2.
        let (gf, d) = (2.0, 0.3);
        let i = Complex64::new(0.0, 1.0);
        let h = Complex64::new(0.5 * gf, 0.0);
        let up = |z: Complex64| (h + i * (z - d)) / (h - i * (z - d));
        let down = |z: Complex64| (h + i * (z + d)) / (h - i * (z + d));
        for w in [-3.0, -0.3, 0.0, 0.7, 5.0] {
            let z = Complex64::new(w, 0.0);
            assert!((up(z) - reflection(w, gf, d)).norm() < 1e-14);
            assert!((down(z) - reflection(-w, gf, d).conj()).norm() < 1e-14);
        }
        for pole in [Complex64::new(d, -0.5 * gf), Complex64::new(-d, -0.5 * gf)] {
            assert!(pole.im < 0.0);
        }
        assert!((h - i * (Complex64::new(d, -0.5 * gf) - d)).norm() < 1e-15);
        assert!((h - i * (Complex64::new(-d, -0.5 * gf) + d)).norm() < 1e-15);
        // Bounded throughout the upper half-plane.
        for re in [-10.0, -1.0, 0.0, 0.3, 2.0] {
            for im in [1e-6, 0.1, 1.0, 10.0] {
                let z = Complex64::new(re, im);
                assert!(up(z).norm() <= 1.0 && down(z).norm() <= 1.0);
            }
        }
    }

    #[test]
    fn quantum_noise_shot_floor() {
        let p = PlantParams::lossless(1.0, 1e-3, 10.0).unwrap();
        let v = squeezed_quantum_noise_spectrum(&p, &InputFieldState::Vacuum, 1e5).unwrap();
        assert!((v - 1.0).abs() < 1e-6);
        let chi = susceptibility(3.0, &p).unwrap();
        let v = squeezed_quantum_noise_spectrum(&p, &InputFieldState::Vacuum, 3.0).unwrap();
        assert!((v - (1.0 + 1e4 * chi.norm_sqr())).abs() < 1e-10);
    }

    #[test]
    fn autotuned_filter_suppresses_quantum_noise() {
        let r = 1.0;
        for oq in [30.0, 100.0, 300.0] {
            let p = PlantParams::lossless(1.0, 1e-3, oq).unwrap();
            let s = autotune(&p, r, default_band(&p)).unwrap();
            for f in [0.1, 0.3, 1.0, 3.0, 10.0] {
                let ratio = quantum_noise_ratio(&p, &s, f * oq).unwrap();
                assert!((ratio.ln() + 2.0 * r).abs() < 0.05, "oq={oq} f={f} ratio={ratio}");
            }
        }
    }

    #[test]
    fn mistuned_filter_amplifies() {
        let p = PlantParams::lossless(1.0, 1e-3, 100.0).unwrap();
        let good = autotune(&p, 1.0, default_band(&p)).unwrap();
        let bad = InputFieldState::fds(1.0, good.theta() - FRAC_PI_2, good.gamma_f(), good.delta()).unwrap();
        let mut hi = 0.0f64;
        let mut lo = f64::INFINITY;
        for i in 0..200 {
            let w = 10f64.powf(0.5 + 3.0 * i as f64 / 199.0);
            let q = quantum_noise_ratio(&p, &bad, w).unwrap();
            hi = hi.max(q);
            lo = lo.min(q);
        }
        let e2r = 2.0f64.exp();
        assert!(hi > 0.9 * e2r && hi <= e2r * (1.0 + 1e-9), "hi={hi}");
        assert!(lo >= (-2.0f64).exp() * (1.0 - 1e-9));
    }

    proptest! {
        #[test]
        fn pure_and_bounded(
            w in -1e3f64..1e3, r in 0.0f64..2.0, th in -3.2f64..3.2,
            gf in 0.01f64..100.0, d in -100.0f64..100.0,
        ) {
            let s = InputFieldState::fds(r, th, gf, d).unwrap();
            let m = input_spectrum(w, &s);
            prop_assert!((m.determinant() - 1.0).abs() < 1e-8 * (4.0 * r).exp());
            let ev = m.symmetric_eigenvalues();
            for e in ev.iter() {
                prop_assert!(*e >= (-2.0 * r).exp() * (1.0 - 1e-9) - 1e-12);
                prop_assert!(*e <= (2.0 * r).exp() * (1.0 + 1e-9) + 1e-12);
            }
            let a = filter_transfer(w, gf, d);
            prop_assert!((a.determinant().norm() - 1.0).abs() < 1e-12);
            // Reality: A(−Ω) = A(Ω)*.
            let am = filter_transfer(-w, gf, d);
            prop_assert!((am - a.map(|z| z.conj())).norm() < 1e-12);
            // Unitary, so the filtered spectrum is real.
            let sq = squeeze_matrix(r, th).map(|x| Complex64::new(x, 0.0));
            let out = a * sq * a.adjoint();
            prop_assert!(out.iter().all(|z| z.im.abs() < 1e-9 * (2.0 * r).exp()));
        }
    }
}
