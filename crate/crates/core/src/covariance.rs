//! Covariance matrix of the oscillator and N box-window modes of the output light.
//!
//! Mode `k` integrates the output over `[−kτ, −(k−1)τ)`, so mode 1 is the most
//! recent. Ordering is `(b1, b2, mode-1 amplitude, mode-1 phase, …)`.
//!
//! Two engines are provided. [`Engine::Exact`] propagates the state-space
//! realization window by window and is exact up to rounding. [`Engine::Quadrature`]
//! integrates the spectral density against the window transforms on a graded
//! Gauss–Legendre grid.

use std::fmt::Write as _;
use std::sync::OnceLock;

use nalgebra::{DMatrix, Matrix2, Matrix4};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::entanglement::{check_physical, symplectic_form};
use crate::error::{Error, Result};
use crate::plant::{spectral_density, PlantParams};
use crate::spectra::NoiseModel;
use crate::squeeze::InputFieldState;
use crate::statespace::{lyapunov, plant_model, van_loan};

/// Box windows of duration `tau` covering the last `n * tau` of output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemporalModeBasis {
    pub n: usize,
    pub tau: f64,
}

impl TemporalModeBasis {
    pub fn new(n: usize, tau: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("basis needs at least one mode"));
        }
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::param(format!("window duration must be positive, got {tau}")));
        }
        Ok(TemporalModeBasis { n, tau })
    }

    /// Windows fast enough to resolve the noise corners: `1/τ = 4·max(Ω_F, Ω_S)`.
    ///
    /// Without a finite sensing corner the readout bandwidth `Ω_q` also counts,
    /// and without any corner `1/τ = 4·max(Ω_q, ω_m)`.
    pub fn auto(n: usize, p: &PlantParams, noise: &NoiseModel) -> Result<Self> {
        let finite = |w: Option<f64>| w.filter(|w| w.is_finite());
        let rate = match (finite(noise.omega_f), finite(noise.omega_s)) {
            (None, None) => p.omega_q.max(p.omega_m),
            (f, Some(s)) => f.unwrap_or(0.0).max(s),
            (Some(f), None) => f.max(p.omega_q),
        };
        Self::new(n, 1.0 / (4.0 * rate))
    }

    /// Same window duration with twice the modes.
    pub fn doubled(&self) -> Self {
        TemporalModeBasis {
            n: 2 * self.n,
            tau: self.tau,
        }
    }
}

/// Fourier transform of window `k` under the `e^{iΩt}` convention.
pub fn window_fourier(k: usize, omega: f64, basis: &TemporalModeBasis) -> Result<Complex64> {
    if k == 0 || k > basis.n {
        return Err(Error::param(format!("mode index {k} outside 1..={}", basis.n)));
    }
    Ok(window_fourier_unchecked(k, omega, basis.tau))
}

fn window_fourier_unchecked(k: usize, omega: f64, tau: f64) -> Complex64 {
    let shift = Complex64::from_polar(1.0, -omega * (k as f64 - 1.0) * tau);
    shift * first_window(omega, tau)
}

/// `(1 − e^{−iΩτ})/(iΩ√τ)`, the transform of the most recent window.
fn first_window(omega: f64, tau: f64) -> Complex64 {
    let x = omega * tau;
    if x.abs() < 1e-4 {
        // Series to avoid cancellation.
        let i = Complex64::new(0.0, 1.0);
        let s = Complex64::new(1.0, 0.0) - i * x / 2.0 - x * x / 6.0 + i * x * x * x / 24.0;
        return s * tau.sqrt();
    }
    let e = Complex64::from_polar(1.0, -x);
    (Complex64::new(1.0, 0.0) - e) / Complex64::new(0.0, omega * tau.sqrt())
}

/// Symmetric covariance matrix with its symplectic form.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    pub v: DMatrix<f64>,
}

impl CovarianceMatrix {
    /// Wrap a symmetric even-dimensional matrix.
    pub fn from_matrix(v: DMatrix<f64>) -> Result<Self> {
        let n = v.nrows();
        if n != v.ncols() || n < 2 || n % 2 != 0 {
            return Err(Error::Linalg(format!("bad covariance shape {}×{}", n, v.ncols())));
        }
        Ok(CovarianceMatrix { v })
    }

    /// Number of light modes.
    pub fn modes(&self) -> usize {
        self.v.nrows() / 2 - 1
    }

    pub fn k(&self) -> DMatrix<f64> {
        symplectic_form(self.v.nrows() / 2)
    }

    pub fn bb(&self) -> Matrix2<f64> {
        self.v.fixed_view::<2, 2>(0, 0).into_owned()
    }

    /// Covariance block between light modes `k` and `l` (1-based).
    pub fn mode_block(&self, k: usize, l: usize) -> Matrix2<f64> {
        self.v.fixed_view::<2, 2>(2 * k, 2 * l).into_owned()
    }

    /// Plain-text export: a header naming the ordering, then one row per line.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# order: b1 b2");
        for k in 1..=self.modes() {
            let _ = write!(out, " m{k}a m{k}p");
        }
        out.push('\n');
        for row in self.v.row_iter() {
            let cells: Vec<String> = row.iter().map(|x| format!("{x:.17e}")).collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
        out
    }

    /// Inverse of [`CovarianceMatrix::to_text`].
    pub fn from_text(text: &str) -> Result<Self> {
        let rows: Vec<Vec<f64>> = text
            .lines()
            .filter(|l| !l.trim_start().starts_with('#') && !l.trim().is_empty())
            .map(|l| {
                l.split_whitespace()
                    .map(|t| t.parse::<f64>().map_err(|e| Error::Linalg(e.to_string())))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Linalg("covariance text is not square".into()));
        }
        Self::from_matrix(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }
}

/// Frequency-grid settings of the quadrature engine.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureSettings {
    /// Upper integration limit; `None` picks 100× the largest rate in the problem.
    pub omega_max: Option<f64>,
    /// Grid density. Sixteen-point panels; doubling halves every panel width.
    pub points_per_decade: usize,
    /// Extra `(center, width)` windows to resolve; resonance and filter poles are always added.
    pub refinements: Vec<(f64, f64)>,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        QuadratureSettings {
            omega_max: None,
            points_per_decade: 64,
            refinements: Vec::new(),
        }
    }
}

impl QuadratureSettings {
    pub fn doubled_density(&self) -> Self {
        QuadratureSettings {
            points_per_decade: 2 * self.points_per_decade,
            ..self.clone()
        }
    }

    pub fn doubled_cutoff(&self, p: &PlantParams, noise: &NoiseModel, basis: &TemporalModeBasis) -> Self {
        QuadratureSettings {
            omega_max: Some(2.0 * self.cutoff(p, noise, basis)),
            ..self.clone()
        }
    }

    fn cutoff(&self, p: &PlantParams, noise: &NoiseModel, basis: &TemporalModeBasis) -> f64 {
        self.omega_max.unwrap_or_else(|| {
            let mut rate = (1.0 / basis.tau).max(p.omega_m).max(p.omega_q * p.omega_q / p.omega_m);
            for w in [noise.omega_f, noise.omega_s].iter().flatten() {
                if w.is_finite() {
                    rate = rate.max(*w);
                }
            }
            100.0 * rate
        })
    }
}

/// How the covariance matrix is computed.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Engine {
    #[default]
    Exact,
    Quadrature(QuadratureSettings),
}

/// Build and validate the covariance matrix.
pub fn build_covariance(
    p: &PlantParams,
    noise: &NoiseModel,
    s: &InputFieldState,
    basis: &TemporalModeBasis,
    engine: &Engine,
) -> Result<CovarianceMatrix> {
    let cov = build_unchecked(p, noise, s, basis, engine)?;
    check_physical(&cov.v, 1e-6)?;
    Ok(cov)
}

/// Build the covariance matrix without the physicality assertion.
pub fn build_unchecked(
    p: &PlantParams,
    noise: &NoiseModel,
    s: &InputFieldState,
    basis: &TemporalModeBasis,
    engine: &Engine,
) -> Result<CovarianceMatrix> {
    if p.gamma_m <= 0.0 {
        return Err(Error::param("stationary state needs gamma_m > 0"));
    }
    let v = match engine {
        Engine::Exact => exact(p, noise, s, basis)?,
        Engine::Quadrature(q) => quadrature(p, noise, s, basis, q)?,
    };
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonConvergent("covariance has non-finite entries".into()));
    }
    let v = (&v + v.transpose()) * 0.5;
    CovarianceMatrix::from_matrix(v)
}

fn exact(
    p: &PlantParams,
    noise: &NoiseModel,
    s: &InputFieldState,
    basis: &TemporalModeBasis,
) -> Result<DMatrix<f64>> {
    let m = plant_model(p, noise, s)?;
    let n = m.states();
    let gw = &m.g * &m.w;
    let stationary = lyapunov(&m.a, &(&gw * m.g.transpose()))?;

    // Augment with the running output integral J, dJ = (Cx + Hξ) dt.
    let mut aa = DMatrix::zeros(n + 2, n + 2);
    aa.view_mut((0, 0), (n, n)).copy_from(&m.a);
    aa.view_mut((n, 0), (2, n)).copy_from(&m.c);
    let mut ga = DMatrix::zeros(n + 2, m.g.ncols());
    ga.view_mut((0, 0), (n, m.g.ncols())).copy_from(&m.g);
    ga.view_mut((n, 0), (2, m.g.ncols())).copy_from(&m.h);
    let qc = &ga * &m.w * ga.transpose();
    let (phi, qd) = van_loan(&aa, &qc, basis.tau);

    // Map (x_old) -> (x_new, mode) and the added noise covariance.
    let scale = 1.0 / basis.tau.sqrt();
    let mut l = phi.view((0, 0), (n + 2, n)).into_owned();
    l.rows_mut(n, 2).scale_mut(scale);
    let mut qn = qd;
    qn.rows_mut(n, 2).scale_mut(scale);
    qn.columns_mut(n, 2).scale_mut(scale);

    let nm = basis.n;
    let dim = n + 2 * nm;
    let mut c = DMatrix::zeros(dim, dim);
    c.view_mut((0, 0), (n, n)).copy_from(&stationary);
    for k in (1..=nm).rev() {
        let idx = n + 2 * (k - 1);
        let old = n + 2 * k;
        let n_old = dim - old;
        let pb = c.view((0, 0), (n, n)).into_owned();
        let new = &l * pb * l.transpose() + &qn;
        let cross = &l * c.view((0, old), (n, n_old));
        c.view_mut((0, 0), (n, n)).copy_from(&new.view((0, 0), (n, n)));
        c.view_mut((idx, idx), (2, 2)).copy_from(&new.view((n, n), (2, 2)));
        c.view_mut((0, idx), (n, 2)).copy_from(&new.view((0, n), (n, 2)));
        c.view_mut((idx, 0), (2, n)).copy_from(&new.view((n, 0), (2, n)));
        if n_old > 0 {
            c.view_mut((0, old), (n, n_old)).copy_from(&cross.rows(0, n));
            c.view_mut((old, 0), (n_old, n)).copy_from(&cross.rows(0, n).transpose());
            c.view_mut((idx, old), (2, n_old)).copy_from(&cross.rows(n, 2));
            c.view_mut((old, idx), (n_old, 2)).copy_from(&cross.rows(n, 2).transpose());
        }
    }
    let keep: Vec<usize> = [0, 1].into_iter().chain(n..dim).collect();
    Ok(c.select_rows(&keep).select_columns(&keep))
}

fn gauss_legendre_16() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(16))
}

/// Gauss–Legendre nodes and weights on `[−1, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Graded panel breakpoints on `[0, omega_max]`, returned as nodes and weights.
fn frequency_grid(features: &[(f64, f64)], omega_max: f64, hmax: f64, ratio: f64) -> (Vec<f64>, Vec<f64>) {
    let mut bps = vec![0.0, omega_max];
    for &(c, w) in features {
        if !(w > 0.0) {
            continue;
        }
        let mut d = w * ratio.powi(-4);
        while d < omega_max {
            for x in [c - d, c + d] {
                if x > 0.0 && x < omega_max {
                    bps.push(x);
                }
            }
            d *= ratio;
        }
        if c > 0.0 && c < omega_max {
            bps.push(c);
        }
    }
    bps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    bps.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs().max(1e-300));
    let (gx, gw) = gauss_legendre_16();
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for win in bps.windows(2) {
        let (a, b) = (win[0], win[1]);
        let panels = ((b - a) / hmax).ceil().max(1.0) as usize;
        let h = (b - a) / panels as f64;
        for j in 0..panels {
            let lo = a + h * j as f64;
            let mid = lo + 0.5 * h;
            for (x, w) in gx.iter().zip(gw) {
                nodes.push(mid + 0.5 * h * x);
                weights.push(0.5 * h * w);
            }
        }
    }
    (nodes, weights)
}

/// Pairwise summation of complex terms.
fn pairwise(xs: &[Complex64]) -> Complex64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise(&xs[..mid]) + pairwise(&xs[mid..])
}

fn quadrature(
    p: &PlantParams,
    noise: &NoiseModel,
    s: &InputFieldState,
    basis: &TemporalModeBasis,
    q: &QuadratureSettings,
) -> Result<DMatrix<f64>> {
    if q.points_per_decade < 16 {
        return Err(Error::param("points_per_decade must be at least 16"));
    }
    let omega_max = q.cutoff(p, noise, basis);
    let density = q.points_per_decade as f64;
    let (nm, tau) = (basis.n, basis.tau);
    let hmax = 640.0 / density / ((nm as f64 + 1.0) * tau);
    let ratio = 10f64.powf(16.0 / density);

    let mut features = q.refinements.clone();
    let wr = (p.omega_m * p.omega_m - 0.25 * p.gamma_m * p.gamma_m).max(0.0).sqrt();
    features.push((wr, 0.5 * p.gamma_m.max(1e-12 * p.omega_m)));
    features.push((0.0, 1.0 / tau));
    if let InputFieldState::Fds { gamma_f, delta, .. } = *s {
        features.push((delta.abs(), 0.5 * gamma_f));
    }
    for spec in [&noise.force, &noise.sensing] {
        if !spec.is_white() {
            for r in crate::poly::roots(spec.denominator()) {
                let z = -(-r).sqrt();
                features.push((z.im.abs(), -z.re));
            }
        }
    }
    let (x, w) = frequency_grid(&features, omega_max, hmax, ratio);

    let g = p.coupling();
    let sq = s.squeezer_matrix();
    let mut sinf = sq * p.eta;
    sinf[(1, 1)] += p.eta * g * g * noise.sensing.high_frequency_limit();
    sinf[(0, 0)] += 1.0 - p.eta;
    sinf[(1, 1)] += 1.0 - p.eta;

    let dens: Vec<Matrix4<Complex64>> = x
        .par_iter()
        .map(|&om| spectral_density(om, p, noise, s))
        .collect::<Result<_>>()?;
    let f1: Vec<Complex64> = x.iter().map(|&om| first_window(om, tau)).collect();

    let dim = 2 + 2 * nm;
    let mut v = DMatrix::zeros(dim, dim);
    let inv_pi = 1.0 / std::f64::consts::PI;

    // Beyond omega_max: a mapped tail for the non-oscillating parts, integration by parts otherwise.
    let tail = Tail::new(p, noise, s, omega_max)?;
    for (r, c) in [(0, 0), (0, 1), (1, 1)] {
        let terms: Vec<Complex64> = dens.iter().zip(&w).map(|(d, wt)| d[(r, c)] * *wt).collect();
        let extra = tail.integral(|_, d| d[(r, c)], 0.0);
        let val = (pairwise(&terms) + extra).re * inv_pi;
        v[(r, c)] = val;
        v[(c, r)] = val;
    }

    // Oscillator-to-mode blocks.
    let root_tau = tau.sqrt();
    let bv: Vec<[f64; 4]> = (1..=nm)
        .into_par_iter()
        .map(|k| {
            let mut out = [0.0; 4];
            for (slot, (r, c)) in [(0, 2), (0, 3), (1, 2), (1, 3)].into_iter().enumerate() {
                let terms: Vec<Complex64> = x
                    .iter()
                    .zip(&w)
                    .zip(&dens)
                    .zip(&f1)
                    .map(|(((&om, wt), d), f)| {
                        let shift = Complex64::from_polar(1.0, -om * (k as f64 - 1.0) * tau);
                        d[(r, c)] * f * shift * *wt
                    })
                    .collect();
                // f̃_k = (e^{−iΩ(k−1)τ} − e^{−iΩkτ})/(iΩ√τ).
                let h = |om: f64, d: &Matrix4<Complex64>| d[(r, c)] / Complex64::new(0.0, om * root_tau);
                let extra = tail.integral(h, -(k as f64 - 1.0) * tau) - tail.integral(h, -(k as f64) * tau);
                out[slot] = (pairwise(&terms) + extra).re * inv_pi;
            }
            out
        })
        .collect();
    for (k, blk) in bv.iter().enumerate() {
        let j = 2 + 2 * k;
        v[(0, j)] = blk[0];
        v[(0, j + 1)] = blk[1];
        v[(1, j)] = blk[2];
        v[(1, j + 1)] = blk[3];
        for (r, c) in [(0, j), (0, j + 1), (1, j), (1, j + 1)] {
            v[(c, r)] = v[(r, c)];
        }
    }

    // Mode-mode blocks depend only on the lag k − l.
    let rem: Vec<Matrix2<Complex64>> = dens
        .iter()
        .map(|d| {
            let mut m = Matrix2::zeros();
            for r in 0..2 {
                for c in 0..2 {
                    m[(r, c)] = d[(r + 2, c + 2)] - Complex64::new(sinf[(r, c)], 0.0);
                }
            }
            m
        })
        .collect();
    let lags: Vec<Matrix2<f64>> = (0..nm)
        .into_par_iter()
        .map(|lag| {
            let mut out = Matrix2::zeros();
            for r in 0..2 {
                for c in 0..2 {
                    let terms: Vec<Complex64> = x
                        .iter()
                        .zip(&w)
                        .zip(&rem)
                        .zip(&f1)
                        .map(|(((&om, wt), m), f)| {
                            let phase = Complex64::from_polar(1.0, om * lag as f64 * tau);
                            m[(r, c)] * f.norm_sqr() * phase * *wt
                        })
                        .collect();
                    // |f̃_1|² = (2 − e^{iΩτ} − e^{−iΩτ})/(Ω²τ).
                    let h = |om: f64, d: &Matrix4<Complex64>| {
                        (d[(r + 2, c + 2)] - sinf[(r, c)]) / (om * om * tau)
                    };
                    let m = lag as f64;
                    let extra = tail.integral(h, m * tau) * 2.0
                        - tail.integral(h, (m + 1.0) * tau)
                        - tail.integral(h, (m - 1.0) * tau);
                    out[(r, c)] = (pairwise(&terms) + extra).re * inv_pi;
                }
            }
            out
        })
        .collect();
    for k in 1..=nm {
        for l in 1..=nm {
            // Block (k, l) with k ≥ l uses lag k − l; the other triangle is its transpose.
            let blk = if k >= l {
                lags[k - l]
            } else {
                lags[l - k].transpose()
            };
            let blk = if k == l { blk + sinf } else { blk };
            v.view_mut((2 * k, 2 * l), (2, 2)).copy_from(&blk);
        }
    }
    Ok(v)
}

/// Spectral density sampled beyond `omega_max` for tail corrections.
struct Tail {
    a: f64,
    step: f64,
    /// `(Ω, weight, S(Ω))` for the substitution `Ω = a/s` on `s ∈ (0, 1]`.
    mapped: Vec<(f64, f64, Matrix4<Complex64>)>,
    /// `S` at `a − step`, `a`, `a + step`.
    edge: [Matrix4<Complex64>; 3],
}

impl Tail {
    fn new(p: &PlantParams, noise: &NoiseModel, s: &InputFieldState, a: f64) -> Result<Self> {
        let (gx, gw) = gauss_legendre_16();
        let panels = 8;
        let mut mapped = Vec::with_capacity(16 * panels);
        for j in 0..panels {
            let (lo, hi) = (j as f64 / panels as f64, (j + 1) as f64 / panels as f64);
            for (x, wt) in gx.iter().zip(gw) {
                let sv = 0.5 * (lo + hi) + 0.5 * (hi - lo) * x;
                let om = a / sv;
                let jac = a / (sv * sv) * 0.5 * (hi - lo) * wt;
                mapped.push((om, jac, spectral_density(om, p, noise, s)?));
            }
        }
        let step = 1e-3 * a;
        let edge = [
            spectral_density(a - step, p, noise, s)?,
            spectral_density(a, p, noise, s)?,
            spectral_density(a + step, p, noise, s)?,
        ];
        Ok(Tail { a, step, mapped, edge })
    }

    /// `∫_a^∞ h(Ω) e^{iΩt} dΩ` for `h` built from the density.
    ///
    /// `h` must decay at least as `1/Ω²` when `t = 0`.
    fn integral(&self, h: impl Fn(f64, &Matrix4<Complex64>) -> Complex64, t: f64) -> Complex64 {
        if t == 0.0 {
            return self.mapped.iter().map(|(om, wt, d)| h(*om, d) * *wt).sum();
        }
        let (a, dx) = (self.a, self.step);
        let h0 = h(a, &self.edge[1]);
        let dh = (h(a + dx, &self.edge[2]) - h(a - dx, &self.edge[0])) / (2.0 * dx);
        let it = Complex64::new(0.0, t);
        -Complex64::from_polar(1.0, a * t) * (h0 / it - dh / (it * it))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad_default() -> Engine {
        Engine::Quadrature(QuadratureSettings::default())
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(16);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        let m: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(30)).sum();
        assert!((m - 2.0 / 31.0).abs() < 1e-14);
    }

    #[test]
    fn window_transform_at_zero() {
        let b = TemporalModeBasis::new(4, 0.3).unwrap();
        for k in 1..=4 {
            let f = window_fourier(k, 0.0, &b).unwrap();
            assert!((f - Complex64::new(0.3f64.sqrt(), 0.0)).norm() < 1e-15);
        }
        assert!(window_fourier(0, 1.0, &b).is_err());
        assert!(window_fourier(5, 1.0, &b).is_err());
    }

    #[test]
    fn window_transform_matches_direct_integral() {
        let b = TemporalModeBasis::new(3, 0.5).unwrap();
        let (gx, gw) = gauss_legendre(16);
        for k in 1..=3 {
            for om in [0.3, 2.0, 11.0] {
                let (lo, hi) = (-(k as f64) * 0.5, -(k as f64 - 1.0) * 0.5);
                let mut acc = Complex64::new(0.0, 0.0);
                for (x, w) in gx.iter().zip(&gw) {
                    let t = 0.5 * (lo + hi) + 0.5 * (hi - lo) * x;
                    acc += Complex64::from_polar(1.0, om * t) * (0.5 * (hi - lo) * w);
                }
                acc /= 0.5f64.sqrt();
                assert!((acc - window_fourier(k, om, &b).unwrap()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn window_orthonormality() {
        // (1/π) Re ∫₀^∞ f̃_k* f̃_l dΩ, using |f̃_1|² = 4 sin²(Ωτ/2)/(Ω²τ).
        let tau = 1.0;
        let (gx, gw) = gauss_legendre(16);
        let lag_integral = |m: i32| {
            let mut acc = 0.0;
            let panels = 40_000;
            let top = 2.0 * std::f64::consts::PI * 318.0;
            let h = top / panels as f64;
            for j in 0..panels {
                let mid = h * (j as f64 + 0.5);
                for (x, w) in gx.iter().zip(&gw) {
                    let om = mid + 0.5 * h * x;
                    acc += first_window(om, tau).norm_sqr() * (om * m as f64 * tau).cos() * 0.5 * h * w;
                }
            }
            // Non-oscillating tail terms of (2 − e^{iΩ} − e^{−iΩ}) e^{imΩ}/Ω².
            let c = match m.abs() {
                0 => 2.0,
                1 => -1.0,
                _ => 0.0,
            };
            acc += c / top;
            acc / std::f64::consts::PI
        };
        assert!((lag_integral(0) - 1.0).abs() < 1e-8);
        assert!(lag_integral(1).abs() < 1e-6);
        assert!(lag_integral(3).abs() < 1e-6);
    }

    fn vacuum_case(oq: f64, gm: f64) -> (PlantParams, NoiseModel) {
        (
            PlantParams::lossless(1.0, gm, oq).unwrap(),
            NoiseModel::white(3.0, 4.0, 1.0).unwrap(),
        )
    }

    #[test]
    fn decoupled_state_is_product() {
        let (p, noise) = vacuum_case(0.0, 0.1);
        let basis = TemporalModeBasis::new(6, 0.2).unwrap();
        let cov = build_covariance(&p, &noise, &InputFieldState::Vacuum, &basis, &Engine::Exact).unwrap();
        let v = &cov.v;
        for i in 2..v.nrows() {
            for j in 2..v.nrows() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((v[(i, j)] - want).abs() < 1e-12);
            }
            assert!(v[(0, i)].abs() < 1e-12 && v[(1, i)].abs() < 1e-12);
        }
        // Lorentzian integral of |χ|² S_F: exactly S_F/(2γ) for both quadratures.
        let sf = noise.force.evaluate(0.0);
        assert!((v[(0, 0)] - sf / (2.0 * 0.1)).abs() < 1e-9 * v[(0, 0)]);
        assert!((v[(1, 1)] - sf / (2.0 * 0.1)).abs() < 1e-9 * v[(1, 1)]);
        assert!(v[(0, 1)].abs() < 1e-9 * v[(0, 0)]);
    }

    #[test]
    fn amplitude_modes_are_vacuum() {
        let (p, noise) = vacuum_case(5.0, 0.05);
        let basis = TemporalModeBasis::new(8, 0.1).unwrap();
        let cov = build_covariance(&p, &noise, &InputFieldState::Vacuum, &basis, &Engine::Exact).unwrap();
        for k in 1..=8 {
            for l in 1..=8 {
                let want = if k == l { 1.0 } else { 0.0 };
                assert!((cov.mode_block(k, l)[(0, 0)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn toeplitz_structure() {
        let (p, noise) = vacuum_case(5.0, 0.05);
        let basis = TemporalModeBasis::new(10, 0.1).unwrap();
        let cov = build_covariance(&p, &noise, &InputFieldState::fis(0.5, 0.3).unwrap(), &basis, &Engine::Exact).unwrap();
        for lag in 0..5 {
            let first = cov.mode_block(1 + lag, 1);
            for k in 2..=(10 - lag) {
                let b = cov.mode_block(k + lag, k);
                assert!((b - first).amax() < 1e-6 * first.amax().max(1.0));
            }
        }
    }

    #[test]
    fn engines_agree() {
        let p = PlantParams::new(1.0, 0.05, 2.0, 0.9).unwrap();
        let noise = NoiseModel::white(1.5, 2.0, 1.0).unwrap();
        let basis = TemporalModeBasis::new(6, 0.25).unwrap();
        for s in [
            InputFieldState::Vacuum,
            InputFieldState::fis(0.6, 0.4).unwrap(),
            InputFieldState::fds(0.6, 1.2, 3.0, -1.0).unwrap(),
        ] {
            let a = build_covariance(&p, &noise, &s, &basis, &Engine::Exact).unwrap();
            let b = build_covariance(&p, &noise, &s, &basis, &quad_default()).unwrap();
            let scale = a.v.amax();
            let d = &a.v - &b.v;
            let diff = d.amax();
            assert!(diff < 1e-6 * scale, "{s:?}: diff {diff:e} scale {scale:e}");
        }
    }

    #[test]
    fn engines_agree_on_colored_noise() {
        use crate::spectra::RationalSpectrum;
        let p = PlantParams::lossless(1.0, 0.05, 2.0).unwrap();
        let force = RationalSpectrum::new(&[4.0, 1.0], &[1.0, 0.5, 1.0], 3.0).unwrap();
        let sensing = RationalSpectrum::new(&[1.0], &[25.0, 1.0], 2.0).unwrap();
        let noise = NoiseModel::new(force, sensing).unwrap();
        let basis = TemporalModeBasis::new(6, 0.25).unwrap();
        let s = InputFieldState::Vacuum;
        let a = build_covariance(&p, &noise, &s, &basis, &Engine::Exact).unwrap();
        let b = build_covariance(&p, &noise, &s, &basis, &quad_default()).unwrap();
        let diff = (&a.v - &b.v).amax();
        assert!(diff < 1e-6 * a.v.amax(), "diff {diff:e}");
    }

    #[test]
    fn text_round_trip() {
        let (p, noise) = vacuum_case(2.0, 0.1);
        let basis = TemporalModeBasis::new(3, 0.2).unwrap();
        let cov = build_covariance(&p, &noise, &InputFieldState::Vacuum, &basis, &Engine::Exact).unwrap();
        let text = cov.to_text();
        assert!(text.starts_with("# order: b1 b2 m1a m1p m2a m2p m3a m3p\n"));
        assert_eq!(CovarianceMatrix::from_text(&text).unwrap(), cov);
    }

    #[test]
    fn auto_basis_rule() {
        let p = PlantParams::lossless(1.0, 1e-3, 30.0).unwrap();
        let noise = NoiseModel::white(100.0, 50.0, 1.0).unwrap();
        let b = TemporalModeBasis::auto(128, &p, &noise).unwrap();
        assert!((b.tau - 1.0 / 400.0).abs() < 1e-15);
        let noise = NoiseModel::white(100.0, f64::INFINITY, 1.0).unwrap();
        assert!((TemporalModeBasis::auto(8, &p, &noise).unwrap().tau - 1.0 / 400.0).abs() < 1e-15);
        let noise = NoiseModel::white(10.0, f64::INFINITY, 1.0).unwrap();
        assert!((TemporalModeBasis::auto(8, &p, &noise).unwrap().tau - 1.0 / 120.0).abs() < 1e-15);
    }
}
