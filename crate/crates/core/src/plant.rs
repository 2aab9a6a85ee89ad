//! Linearized oscillator and probe-light dynamics in the frequency domain.
//!
//! Fourier convention: `x(Ω) = ∫ x(t) e^{iΩt} dt`. Stable poles sit in the
//! lower half-plane.
//!
//! Inputs are ordered `(u1, u2, n_F, n_S, l1, l2)`, where `l1, l2` are the
//! quadratures of the vacuum admixed by the detection loss.

use nalgebra::{Matrix2, Matrix4, SMatrix};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectra::NoiseModel;
use crate::squeeze::{input_spectrum, InputFieldState};

/// Number of input channels of the transfer matrices.
pub const N_INPUTS: usize = 6;

pub const U1: usize = 0;
pub const U2: usize = 1;
pub const NF: usize = 2;
pub const NS: usize = 3;
pub const L1: usize = 4;
pub const L2: usize = 5;

/// Oscillator and coupling constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantParams {
    pub omega_m: f64,
    pub gamma_m: f64,
    pub omega_q: f64,
    pub eta: f64,
}

impl PlantParams {
    pub fn new(omega_m: f64, gamma_m: f64, omega_q: f64, eta: f64) -> Result<Self> {
        if !(omega_m.is_finite() && omega_m > 0.0) {
            return Err(Error::param(format!("omega_m must be positive, got {omega_m}")));
        }
        if !(gamma_m.is_finite() && gamma_m >= 0.0) {
            return Err(Error::param(format!("gamma_m must be nonnegative, got {gamma_m}")));
        }
        if !(omega_q.is_finite() && omega_q >= 0.0) {
            return Err(Error::param(format!("omega_q must be nonnegative, got {omega_q}")));
        }
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::param(format!("eta must lie in (0, 1], got {eta}")));
        }
        Ok(PlantParams {
            omega_m,
            gamma_m,
            omega_q,
            eta,
        })
    }

    /// Lossless plant.
    pub fn lossless(omega_m: f64, gamma_m: f64, omega_q: f64) -> Result<Self> {
        Self::new(omega_m, gamma_m, omega_q, 1.0)
    }

    pub fn with_omega_q(&self, omega_q: f64) -> Result<Self> {
        Self::new(self.omega_m, self.gamma_m, omega_q, self.eta)
    }

    pub fn with_eta(&self, eta: f64) -> Result<Self> {
        Self::new(self.omega_m, self.gamma_m, self.omega_q, eta)
    }

    /// Coupling `g = Ω_q/√ω_m` between the amplitude quadrature and the momentum.
    pub fn coupling(&self) -> f64 {
        self.omega_q / self.omega_m.sqrt()
    }
}

/// `χ(Ω) = ω_m/(ω_m² − Ω² − iγ_mΩ)`.
pub fn susceptibility(omega: f64, p: &PlantParams) -> Result<Complex64> {
    let den = Complex64::new(p.omega_m * p.omega_m - omega * omega, -p.gamma_m * omega);
    if den.norm() == 0.0 {
        return Err(Error::Pole { omega });
    }
    Ok(Complex64::new(p.omega_m, 0.0) / den)
}

/// Responses of `(b1, b2)` and `(v1, v2)` to the six inputs at one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMatrices {
    pub oscillator: SMatrix<Complex64, 2, N_INPUTS>,
    pub output: SMatrix<Complex64, 2, N_INPUTS>,
}

impl TransferMatrices {
    /// Rows `(b1, b2, v1, v2)` stacked into one matrix.
    pub fn stacked(&self) -> SMatrix<Complex64, 4, N_INPUTS> {
        let mut t = SMatrix::<Complex64, 4, N_INPUTS>::zeros();
        t.fixed_view_mut::<2, N_INPUTS>(0, 0).copy_from(&self.oscillator);
        t.fixed_view_mut::<2, N_INPUTS>(2, 0).copy_from(&self.output);
        t
    }
}

pub fn transfer(omega: f64, p: &PlantParams) -> Result<TransferMatrices> {
    let chi = susceptibility(omega, p)?;
    let g = p.coupling();
    let se = p.eta.sqrt();
    let sl = (1.0 - p.eta).sqrt();
    let c = |x: f64| Complex64::new(x, 0.0);

    let mut osc = SMatrix::<Complex64, 2, N_INPUTS>::zeros();
    osc[(0, U1)] = chi * g;
    osc[(0, NF)] = chi;
    let d = Complex64::new(0.0, -omega / p.omega_m);
    osc[(1, U1)] = d * osc[(0, U1)];
    osc[(1, NF)] = d * osc[(0, NF)];

    let mut out = SMatrix::<Complex64, 2, N_INPUTS>::zeros();
    out[(0, U1)] = c(se);
    out[(0, L1)] = c(sl);
    out[(1, U1)] = osc[(0, U1)] * (se * g);
    out[(1, U2)] = c(se);
    out[(1, NF)] = osc[(0, NF)] * (se * g);
    out[(1, NS)] = c(se * g);
    out[(1, L2)] = c(sl);
    Ok(TransferMatrices {
        oscillator: osc,
        output: out,
    })
}

/// Input spectral matrix `D(Ω) = diag(S_uu, S_F, S_S, I_loss)`.
pub fn input_density(
    omega: f64,
    noise: &NoiseModel,
    input: &InputFieldState,
) -> SMatrix<f64, N_INPUTS, N_INPUTS> {
    let mut d = SMatrix::<f64, N_INPUTS, N_INPUTS>::zeros();
    let suu: Matrix2<f64> = input_spectrum(omega, input);
    d.fixed_view_mut::<2, 2>(0, 0).copy_from(&suu);
    d[(NF, NF)] = noise.force.evaluate(omega);
    d[(NS, NS)] = noise.sensing.evaluate(omega);
    d[(L1, L1)] = 1.0;
    d[(L2, L2)] = 1.0;
    d
}

/// Symmetrized spectral density of `(b1, b2, v1, v2)`: `T D T†`.
///
/// The matrix is Hermitian; its off-diagonal imaginary parts carry the
/// phase information needed when it is weighted by window transforms.
pub fn spectral_density(
    omega: f64,
    p: &PlantParams,
    noise: &NoiseModel,
    input: &InputFieldState,
) -> Result<Matrix4<Complex64>> {
    let t = transfer(omega, p)?.stacked();
    let d = input_density(omega, noise, input).map(|x| Complex64::new(x, 0.0));
    let s = t * d * t.adjoint();
    Ok((s + s.adjoint()) * Complex64::new(0.5, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::NoiseModel;
    use proptest::prelude::*;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol * b.norm().max(1.0)
    }

    #[test]
    fn susceptibility_examples() {
        let p = PlantParams::lossless(2.0, 0.1, 1.0).unwrap();
        assert!(close(susceptibility(0.0, &p).unwrap(), Complex64::new(0.5, 0.0), 1e-15));
        let p = PlantParams::lossless(1.0, 0.1, 1.0).unwrap();
        assert!(close(susceptibility(1.0, &p).unwrap(), Complex64::new(0.0, 10.0), 1e-14));
        let far = susceptibility(1e4, &p).unwrap();
        assert!((far.norm() - 1e-8).abs() < 1e-12);
        let undamped = PlantParams::lossless(1.0, 0.0, 1.0).unwrap();
        assert!(matches!(susceptibility(1.0, &undamped), Err(Error::Pole { .. })));
    }

    #[test]
    fn params_validation() {
        assert!(PlantParams::new(0.0, 0.1, 1.0, 1.0).is_err());
        assert!(PlantParams::new(1.0, -0.1, 1.0, 1.0).is_err());
        assert!(PlantParams::new(1.0, 0.1, -1.0, 1.0).is_err());
        assert!(PlantParams::new(1.0, 0.1, 1.0, 0.0).is_err());
        assert!(PlantParams::new(1.0, 0.1, 1.0, 1.1).is_err());
    }

    #[test]
    fn decoupled_light_passes_untouched() {
        let p = PlantParams::lossless(1.0, 1e-3, 0.0).unwrap();
        let t = transfer(3.3, &p).unwrap();
        for i in 0..2 {
            for j in 0..N_INPUTS {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!(close(t.output[(i, j)], Complex64::new(want, 0.0), 0.0));
            }
        }
    }

    #[test]
    fn sensing_and_backaction_entries() {
        let p = PlantParams::lossless(1.0, 1e-3, 7.0).unwrap();
        for w in [0.1, 0.9, 13.0, 400.0] {
            let t = transfer(w, &p).unwrap();
            assert!(close(t.output[(1, NS)], Complex64::new(7.0, 0.0), 1e-15));
            let chi = susceptibility(w, &p).unwrap();
            assert!(close(t.output[(1, U1)], chi * 49.0, 1e-14));
        }
    }

    #[test]
    fn vacuum_decoupled_density() {
        let p = PlantParams::lossless(1.0, 1e-2, 0.0).unwrap();
        let noise = NoiseModel::white(3.0, 5.0, 1.0).unwrap();
        let s = spectral_density(0.7, &p, &noise, &InputFieldState::Vacuum).unwrap();
        for i in 2..4 {
            for j in 2..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((s[(i, j)] - Complex64::new(want, 0.0)).norm() < 1e-15);
            }
        }
        let chi = susceptibility(0.7, &p).unwrap();
        assert!((s[(0, 0)].re - chi.norm_sqr() * 18.0).abs() < 1e-12);
        assert!(s[(0, 2)].norm() == 0.0 && s[(1, 3)].norm() == 0.0);
    }

    #[test]
    fn amplitude_output_is_input_quadrature() {
        let p = PlantParams::lossless(1.0, 1e-3, 30.0).unwrap();
        let noise = NoiseModel::white(30.0, 50.0, 1.0).unwrap();
        let sq = InputFieldState::fis(0.8, 0.4).unwrap();
        let suu = input_spectrum(0.0, &sq);
        for w in [0.3, 1.0, 40.0] {
            let s = spectral_density(w, &p, &noise, &sq).unwrap();
            assert!((s[(2, 2)].re - suu[(0, 0)]).abs() < 1e-12);
        }
    }

    #[test]
    fn phase_output_high_frequency_limit() {
        let p = PlantParams::lossless(1.0, 1e-3, 5.0).unwrap();
        let noise = NoiseModel::white(2.0, 3.0, 1.0).unwrap();
        let w = 1e3;
        let s = spectral_density(w, &p, &noise, &InputFieldState::Vacuum).unwrap();
        let g2 = 25.0;
        let limit = 1.0 + g2 * noise.sensing.evaluate(w);
        // The remainder is the back-action and force terms, of order Ω⁻⁴.
        let chi = susceptibility(w, &p).unwrap();
        let direct = limit + g2 * chi.norm_sqr() * (g2 + noise.force.evaluate(w));
        assert!((s[(3, 3)].re - direct).abs() < 1e-12);
        assert!((s[(3, 3)].re - limit).abs() < 1e3 / w.powi(4));
    }

    #[test]
    fn oscillator_rows_ignore_phase_and_sensing() {
        let p = PlantParams::new(1.0, 0.2, 3.0, 0.7).unwrap();
        for w in [0.0, 0.5, 2.0, 90.0] {
            let t = transfer(w, &p).unwrap();
            for r in 0..2 {
                assert_eq!(t.oscillator[(r, U2)], Complex64::new(0.0, 0.0));
                assert_eq!(t.oscillator[(r, NS)], Complex64::new(0.0, 0.0));
            }
            assert!(close(t.output[(0, U1)], Complex64::new(0.7f64.sqrt(), 0.0), 1e-15));
            for j in [U2, NF, NS, L2] {
                assert_eq!(t.output[(0, j)], Complex64::new(0.0, 0.0));
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn density_is_hermitian_psd(
            w in 0.0f64..1e3,
            gm in 1e-4f64..1.0,
            oq in 0.0f64..100.0,
            eta in 0.05f64..1.0,
            of in 0.1f64..100.0,
            os in 0.1f64..100.0,
            r in 0.0f64..1.5,
            th in 0.0f64..3.2,
        ) {
            let p = PlantParams::new(1.0, gm, oq, eta).unwrap();
            let noise = NoiseModel::white(of, os, 1.0).unwrap();
            let sq = InputFieldState::fis(r, th).unwrap();
            let s = spectral_density(w, &p, &noise, &sq).unwrap();
            prop_assert!((s - s.adjoint()).norm() == 0.0);
            let ev = s.symmetric_eigenvalues();
            let norm = s.norm();
            prop_assert!(ev.iter().all(|&e| e >= -1e-10 * norm));
        }
    }
}
