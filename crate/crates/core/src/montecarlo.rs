//! Stochastic time-domain simulation of the probed oscillator.
//!
//! Trajectories of
//!
//! ```text
//! ḃ₁ = ω_m b₂
//! ḃ₂ = −ω_m b₁ − γ_m b₂ + g u₁ + n_F
//! v₁ = u₁,  v₂ = u₂ + g (b₁ + n_S)
//! ```
//!
//! are integrated with white inputs, the box-window modes are accumulated, and
//! the sample covariance is returned with its standard errors. Each step uses
//! the exact transition of the linear SDE over `dt`, so the only errors are
//! statistical. Loss is applied as a beamsplitter on the integrated output.

use nalgebra::{DMatrix, Matrix2, Matrix4, Vector4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::covariance::TemporalModeBasis;
use crate::error::{Error, Result};
use crate::plant::PlantParams;
use crate::spectra::NoiseModel;
use crate::squeeze::InputFieldState;

/// Settings of a simulation run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationSettings {
    pub trajectories: usize,
    pub steps_per_window: usize,
    /// Burn-in length in units of `1/γ_m`.
    pub burn_in: f64,
    pub seed: u64,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        SimulationSettings {
            trajectories: 10_000,
            steps_per_window: 200,
            burn_in: 12.0,
            seed: 20261017,
        }
    }
}

/// Sample covariance of `(b1, b2, modes…)` and the standard error of each entry.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleCovariance {
    pub mean: DMatrix<f64>,
    pub standard_error: DMatrix<f64>,
    pub trajectories: usize,
}

impl SampleCovariance {
    /// Largest `|V_ij − C_ij| / SE_ij` against a reference matrix.
    pub fn max_z(&self, v: &DMatrix<f64>) -> f64 {
        self.mean
            .iter()
            .zip(v.iter())
            .zip(self.standard_error.iter())
            .map(|((c, v), se)| (c - v).abs() / se)
            .fold(0.0, f64::max)
    }
}

/// Exact one-step transition `(Φ, Q)` of `dx = Ax dt + dW`, `E[dW dWᵀ] = D dt`.
///
/// `Q` is built by repeated doubling from a third-order Taylor step.
fn transition(a: &Matrix4<f64>, d: &Matrix4<f64>, h: f64) -> (Matrix4<f64>, Matrix4<f64>) {
    let mut k = 0;
    while a.norm() * h / 2f64.powi(k) > 1e-4 {
        k += 1;
    }
    let hs = h / 2f64.powi(k);
    let ad = a * d + d * a.transpose();
    let add = a * ad + ad * a.transpose();
    let mut q = d * hs + ad * (hs * hs / 2.0) + add * (hs * hs * hs / 6.0);
    let mut phi = (a * hs).exp();
    for _ in 0..k {
        q = q + phi * q * phi.transpose();
        phi = phi * phi;
    }
    ((a * h).exp(), (q + q.transpose()) * 0.5)
}

/// Cholesky factor of a positive-semidefinite noise covariance; zero rows are allowed.
fn noise_factor(q: &Matrix4<f64>) -> Result<Matrix4<f64>> {
    let eig = q.symmetric_eigen();
    if eig.eigenvalues.iter().any(|&e| e < -1e-12 * eig.eigenvalues.amax()) {
        return Err(Error::Linalg("noise covariance is not positive semidefinite".into()));
    }
    let root = eig.eigenvalues.map(|e| e.max(0.0).sqrt());
    Ok(eig.eigenvectors * Matrix4::from_diagonal(&root))
}

/// Monte Carlo estimate of the covariance matrix built by [`crate::covariance::build_covariance`].
///
/// Supports white noise and vacuum or frequency-independent squeezed input.
pub fn simulate_covariance(
    p: &PlantParams,
    noise: &NoiseModel,
    s: &InputFieldState,
    basis: &TemporalModeBasis,
    settings: &SimulationSettings,
) -> Result<SampleCovariance> {
    if !(noise.force.is_white() && noise.sensing.is_white()) {
        return Err(Error::param("time-domain simulation needs white noise spectra"));
    }
    if matches!(s, InputFieldState::Fds { .. }) {
        return Err(Error::param("time-domain simulation supports vacuum and fis input only"));
    }
    if p.gamma_m <= 0.0 {
        return Err(Error::param("simulation needs gamma_m > 0 to reach the stationary state"));
    }
    if settings.trajectories < 2 || settings.steps_per_window == 0 {
        return Err(Error::param("need at least two trajectories and one step per window"));
    }
    let g = p.coupling();
    let wm = p.omega_m;
    let sf = noise.force.evaluate(0.0);
    let ss = noise.sensing.evaluate(0.0);
    let su = s.squeezer_matrix();

    // State (b1, b2, J1, J2) with J the running output integral before loss.
    #[rustfmt::skip]
    let a = Matrix4::new(
        0.0, wm, 0.0, 0.0,
        -wm, -p.gamma_m, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.0,
        g, 0.0, 0.0, 0.0,
    );
    // Inputs (u1, u2, n_F, n_S) enter as b2: g u1 + n_F, J1: u1, J2: u2 + g n_S.
    let mut d = Matrix4::zeros();
    d[(1, 1)] = g * g * su[(0, 0)] + sf;
    d[(1, 2)] = g * su[(0, 0)];
    d[(1, 3)] = g * su[(0, 1)];
    d[(2, 2)] = su[(0, 0)];
    d[(2, 3)] = su[(0, 1)];
    d[(3, 3)] = su[(1, 1)] + g * g * ss;
    d[(2, 1)] = d[(1, 2)];
    d[(3, 1)] = d[(1, 3)];
    d[(3, 2)] = d[(2, 3)];

    let dt = basis.tau / settings.steps_per_window as f64;
    let (phi, q) = transition(&a, &d, dt);
    let lq = noise_factor(&q)?;

    let burn_total = settings.burn_in / p.gamma_m;
    let burn_steps = 64usize;
    let (phi_b, q_b) = transition(&a, &d, burn_total / burn_steps as f64);
    let phi_b2: Matrix2<f64> = phi_b.fixed_view::<2, 2>(0, 0).into_owned();
    let lq_b = noise_factor(&q_b)?;

    let nm = basis.n;
    let dim = 2 + 2 * nm;
    let (te, tl) = (p.eta.sqrt(), (1.0 - p.eta).sqrt());
    let scale = 1.0 / basis.tau.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let normal = |rng: &mut ChaCha8Rng| -> Vector4<f64> {
        Vector4::from_fn(|_, _| StandardNormal.sample(rng))
    };

    let mut sum = DMatrix::<f64>::zeros(dim, dim);
    let mut sample = nalgebra::DVector::<f64>::zeros(dim);
    for _ in 0..settings.trajectories {
        let mut b = nalgebra::Vector2::zeros();
        for _ in 0..burn_steps {
            let w = lq_b * normal(&mut rng);
            b = phi_b2 * b + w.fixed_rows::<2>(0);
        }
        let mut x = Vector4::new(b[0], b[1], 0.0, 0.0);
        // Earliest window first: mode N, …, mode 1.
        for k in (1..=nm).rev() {
            x[2] = 0.0;
            x[3] = 0.0;
            for _ in 0..settings.steps_per_window {
                x = phi * x + lq * normal(&mut rng);
            }
            let loss = normal(&mut rng);
            let j = 2 + 2 * (k - 1);
            sample[j] = (te * x[2] * scale) + tl * loss[0];
            sample[j + 1] = (te * x[3] * scale) + tl * loss[1];
        }
        sample[0] = x[0];
        sample[1] = x[1];
        let outer = &sample * sample.transpose();
        sum += outer;
    }
    let n = settings.trajectories as f64;
    let mean = &sum / n;
    // Gaussian standard error of a second moment.
    let se = DMatrix::from_fn(dim, dim, |i, j| {
        ((mean[(i, i)] * mean[(j, j)] + mean[(i, j)].powi(2)) / n).sqrt()
    });
    Ok(SampleCovariance {
        mean,
        standard_error: se,
        trajectories: settings.trajectories,
    })
}
