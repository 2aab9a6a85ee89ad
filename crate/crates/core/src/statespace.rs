//! Time-domain state-space realization of the plant and its noise inputs.
//!
//! Every rational spectrum is factored into a causal, stable shaping filter
//! driven by unit white noise. The plant, filter cavity and shaping filters
//! are assembled into one linear system `dx = A x dt + G dξ` with outputs
//! `v = C x + H ξ`, where `ξ` has the constant intensity matrix `W`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::plant::{PlantParams, L1, L2, NF, NS, N_INPUTS, U1, U2};
use crate::poly;
use crate::spectra::{NoiseModel, RationalSpectrum};
use crate::squeeze::InputFieldState;

/// Relative tolerance for classifying computed roots as real or on an axis.
const CLASSIFY_TOL: f64 = 1e-6;

/// A linear time-invariant system `ẋ = Ax + Bu`, `y = Cx + Du`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lti {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

impl Lti {
    /// Static gain with no states.
    pub fn gain(k: f64) -> Self {
        Lti {
            a: DMatrix::zeros(0, 0),
            b: DMatrix::zeros(0, 1),
            c: DMatrix::zeros(1, 0),
            d: DMatrix::from_element(1, 1, k),
        }
    }

    pub fn states(&self) -> usize {
        self.a.nrows()
    }

    /// Feed the output of `self` into `next`.
    pub fn then(&self, next: &Lti) -> Lti {
        let (n1, n2) = (self.states(), next.states());
        let ni = self.b.ncols();
        let no = next.c.nrows();
        let mut a = DMatrix::zeros(n1 + n2, n1 + n2);
        a.view_mut((0, 0), (n1, n1)).copy_from(&self.a);
        a.view_mut((n1, n1), (n2, n2)).copy_from(&next.a);
        a.view_mut((n1, 0), (n2, n1)).copy_from(&(&next.b * &self.c));
        let mut b = DMatrix::zeros(n1 + n2, ni);
        b.view_mut((0, 0), (n1, ni)).copy_from(&self.b);
        b.view_mut((n1, 0), (n2, ni)).copy_from(&(&next.b * &self.d));
        let mut c = DMatrix::zeros(no, n1 + n2);
        c.view_mut((0, 0), (no, n1)).copy_from(&(&next.d * &self.c));
        c.view_mut((0, n1), (no, n2)).copy_from(&next.c);
        Lti {
            a,
            b,
            c,
            d: &next.d * &self.d,
        }
    }

    /// `H(Ω) = C(−iΩ − A)⁻¹B + D` under the `e^{iΩt}` Fourier convention.
    pub fn response(&self, omega: f64) -> Result<DMatrix<Complex64>> {
        let n = self.states();
        let d = self.d.map(|x| Complex64::new(x, 0.0));
        if n == 0 {
            return Ok(d);
        }
        let mut m = self.a.map(|x| Complex64::new(-x, 0.0));
        for i in 0..n {
            m[(i, i)] += Complex64::new(0.0, -omega);
        }
        let rhs = self.b.map(|x| Complex64::new(x, 0.0));
        let x = m
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Linalg(format!("singular resolvent at Ω = {omega}")))?;
        Ok(self.c.map(|x| Complex64::new(x, 0.0)) * x + d)
    }
}

/// Real monic quadratic `s² + d1 s + d0`.
#[derive(Debug, Clone, Copy)]
struct Quad {
    d0: f64,
    d1: f64,
}

/// Split a conjugation-closed set of left-half-plane roots into real quadratics
/// and at most one leftover real root.
fn group_roots(roots: &[Complex64]) -> (Vec<Quad>, Option<f64>) {
    let mut quads = Vec::new();
    let mut reals = Vec::new();
    for &z in roots {
        if z.im.abs() <= CLASSIFY_TOL * z.norm() {
            reals.push(z.re);
        } else if z.im > 0.0 {
            quads.push(Quad {
                d0: z.norm_sqr(),
                d1: -2.0 * z.re,
            });
        }
    }
    reals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut it = reals.chunks(2);
    let mut single = None;
    for pair in &mut it {
        if pair.len() == 2 {
            quads.push(Quad {
                d0: pair[0] * pair[1],
                d1: -(pair[0] + pair[1]),
            });
        } else {
            single = Some(pair[0]);
        }
    }
    (quads, single)
}

/// Map an `x = Ω²` root to the stable `s`-plane root of `s² + r`.
fn stable_root(r: Complex64) -> Complex64 {
    -(-r).sqrt()
}

fn is_axis_root(r: Complex64) -> bool {
    let scale = r.norm();
    r.im.abs() <= CLASSIFY_TOL * scale && r.re >= -CLASSIFY_TOL * scale
}

/// Second-order section `N(s)/(s² + d1 s + d0)` with `N = n2 s² + n1 s + n0`.
fn quad_section(den: Quad, num: [f64; 3]) -> Lti {
    let w0 = den.d0.sqrt();
    let [n0, n1, n2] = num;
    Lti {
        a: DMatrix::from_row_slice(2, 2, &[0.0, w0, -w0, -den.d1]),
        b: DMatrix::from_row_slice(2, 1, &[0.0, w0]),
        c: DMatrix::from_row_slice(
            1,
            2,
            &[(n0 - n2 * den.d0) / (w0 * w0), (n1 - n2 * den.d1) / w0],
        ),
        d: DMatrix::from_element(1, 1, n2),
    }
}

/// First-order section `(s − z)/(s − p)` or `|p|/(s − p)`.
fn linear_section(p: f64, zero: Option<f64>) -> Lti {
    let (c, d) = match zero {
        Some(z) => (p - z, 1.0),
        None => (p.abs(), 0.0),
    };
    Lti {
        a: DMatrix::from_element(1, 1, p),
        b: DMatrix::from_element(1, 1, 1.0),
        c: DMatrix::from_element(1, 1, c),
        d: DMatrix::from_element(1, 1, d),
    }
}

/// Causal stable minimum-phase filter `H` with `|H(Ω)|² = S(Ω)`, driven by unit white noise.
pub fn shaping_filter(spec: &RationalSpectrum) -> Result<Lti> {
    if spec.is_zero() {
        return Ok(Lti::gain(0.0));
    }
    if spec.is_white() {
        return Ok(Lti::gain(spec.evaluate(0.0).sqrt()));
    }
    let poles: Vec<Complex64> = poly::roots(spec.denominator())
        .into_iter()
        .map(stable_root)
        .collect();
    let mut axis = Vec::new();
    let mut zeros = Vec::new();
    for r in poly::roots(spec.numerator()) {
        if r.norm() == 0.0 {
            zeros.push(r);
        } else if is_axis_root(r) {
            axis.push(r.re.max(0.0));
        } else {
            zeros.push(stable_root(r));
        }
    }
    if axis.len() % 2 == 1 {
        return Err(Error::InvalidSpectrum(
            "numerator has a real zero of odd multiplicity".into(),
        ));
    }
    axis.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (pole_quads, pole_single) = group_roots(&poles);
    let (mut zero_quads, zero_single) = group_roots(&zeros);
    zero_quads.extend(axis.chunks(2).map(|pr| Quad {
        d0: 0.5 * (pr[0] + pr[1]),
        d1: 0.0,
    }));
    if zero_quads.len() > pole_quads.len() {
        return Err(Error::InvalidSpectrum(
            "numerator degree exceeds denominator degree".into(),
        ));
    }

    let mut numerators: Vec<Option<[f64; 3]>> = zero_quads
        .iter()
        .map(|q| Some([q.d0, q.d1, 1.0]))
        .collect();
    numerators.resize(pole_quads.len(), None);
    let mut linear_zero = zero_single;
    if linear_zero.is_some() && pole_single.is_none() {
        let z = linear_zero.take().unwrap();
        let slot = numerators
            .iter_mut()
            .find(|n| n.is_none())
            .ok_or_else(|| Error::InvalidSpectrum("cannot place a real zero".into()))?;
        *slot = Some([-z, 1.0, 0.0]);
    }

    let mut sys: Option<Lti> = None;
    let mut push = |s: Lti| {
        sys = Some(match sys.take() {
            None => s,
            Some(prev) => prev.then(&s),
        });
    };
    for (den, num) in pole_quads.iter().zip(numerators) {
        let num = num.unwrap_or([den.d0, 0.0, 0.0]);
        let mut section = quad_section(*den, num);
        // Unit gain at the section's natural frequency keeps states well scaled.
        let g = section.response(den.d0.sqrt())?[(0, 0)].norm();
        if g > 0.0 {
            section.c /= g;
            section.d /= g;
        }
        push(section);
    }
    if let Some(p) = pole_single {
        push(linear_section(p, linear_zero));
    }
    let mut sys = sys.unwrap_or_else(|| Lti::gain(1.0));

    // Match the overall gain where the spectrum is largest among probe points.
    let scale = poles.iter().map(|p| p.norm()).fold(0.0f64, f64::max).max(1e-300);
    let mut best = (0.0, 0.0);
    for k in -8..=8 {
        let w = scale * 2f64.powf(k as f64 * 0.5);
        let s = spec.evaluate(w);
        if s > best.1 {
            best = (w, s);
        }
    }
    if best.1 <= 0.0 {
        return Err(Error::InvalidSpectrum("could not normalize shaping filter".into()));
    }
    let h = sys.response(best.0)?[(0, 0)].norm();
    let k = best.1.sqrt() / h;
    sys.c *= k;
    sys.d *= k;
    Ok(sys)
}

/// The full linear model of oscillator, input light and noise shaping.
#[derive(Debug, Clone)]
pub struct PlantModel {
    /// Drift matrix; states are `(b1, b2, filter…, force shaping…, sensing shaping…)`.
    pub a: DMatrix<f64>,
    /// Noise input matrix, `n × 6`.
    pub g: DMatrix<f64>,
    /// Output rows `(v1, v2)`, `2 × n`.
    pub c: DMatrix<f64>,
    /// Output feedthrough, `2 × 6`.
    pub h: DMatrix<f64>,
    /// Intensity of the white noise vector `(w1, w2, ξ_F, ξ_S, l1, l2)`.
    pub w: DMatrix<f64>,
}

impl PlantModel {
    pub fn states(&self) -> usize {
        self.a.nrows()
    }

    /// Transfer from the white noises to `(b1, b2, v1, v2)`.
    pub fn response(&self, omega: f64) -> Result<DMatrix<Complex64>> {
        let n = self.states();
        let mut c = DMatrix::zeros(4, n);
        c[(0, 0)] = 1.0;
        c[(1, 1)] = 1.0;
        c.view_mut((2, 0), (2, n)).copy_from(&self.c);
        let mut d = DMatrix::zeros(4, N_INPUTS);
        d.view_mut((2, 0), (2, N_INPUTS)).copy_from(&self.h);
        Lti {
            a: self.a.clone(),
            b: self.g.clone(),
            c,
            d,
        }
        .response(omega)
    }

    /// Spectral density of `(b1, b2, v1, v2)` implied by the model.
    pub fn spectral_density(&self, omega: f64) -> Result<DMatrix<Complex64>> {
        let t = self.response(omega)?;
        let w = self.w.map(|x| Complex64::new(x, 0.0));
        Ok(&t * w * t.adjoint())
    }
}

/// Assemble the state-space model of the plant driven by the given noises and input light.
pub fn plant_model(p: &PlantParams, noise: &NoiseModel, input: &InputFieldState) -> Result<PlantModel> {
    let force = shaping_filter(&noise.force)?;
    let sensing = shaping_filter(&noise.sensing)?;
    let nfil = if matches!(input, InputFieldState::Fds { .. }) { 2 } else { 0 };
    let (nf, ns) = (force.states(), sensing.states());
    let n = 2 + nfil + nf + ns;
    let (of, off, os) = (2, 2 + nfil, 2 + nfil + nf);

    let mut a = DMatrix::zeros(n, n);
    let mut g = DMatrix::zeros(n, N_INPUTS);
    // u = cu x + hu ξ
    let mut cu = DMatrix::zeros(2, n);
    let mut hu = DMatrix::zeros(2, N_INPUTS);
    hu[(0, U1)] = 1.0;
    hu[(1, U2)] = 1.0;
    if let InputFieldState::Fds { gamma_f, delta, .. } = *input {
        let sg = gamma_f.sqrt();
        a[(of, of)] = -0.5 * gamma_f;
        a[(of + 1, of + 1)] = -0.5 * gamma_f;
        a[(of, of + 1)] = delta;
        a[(of + 1, of)] = -delta;
        g[(of, U1)] = sg;
        g[(of + 1, U2)] = sg;
        cu[(0, of)] = -sg;
        cu[(1, of + 1)] = -sg;
    }

    a.view_mut((off, off), (nf, nf)).copy_from(&force.a);
    for i in 0..nf {
        g[(off + i, NF)] = force.b[(i, 0)];
    }
    a.view_mut((os, os), (ns, ns)).copy_from(&sensing.a);
    for i in 0..ns {
        g[(os + i, NS)] = sensing.b[(i, 0)];
    }

    let gc = p.coupling();
    a[(0, 1)] = p.omega_m;
    a[(1, 0)] = -p.omega_m;
    a[(1, 1)] = -p.gamma_m;
    for j in 0..n {
        a[(1, j)] += gc * cu[(0, j)];
    }
    for j in 0..N_INPUTS {
        g[(1, j)] += gc * hu[(0, j)];
    }
    for i in 0..nf {
        a[(1, off + i)] += force.c[(0, i)];
    }
    g[(1, NF)] += force.d[(0, 0)];

    let se = p.eta.sqrt();
    let sl = (1.0 - p.eta).sqrt();
    let mut c = DMatrix::zeros(2, n);
    let mut h = DMatrix::zeros(2, N_INPUTS);
    for j in 0..n {
        c[(0, j)] = se * cu[(0, j)];
        c[(1, j)] = se * cu[(1, j)];
    }
    for j in 0..N_INPUTS {
        h[(0, j)] = se * hu[(0, j)];
        h[(1, j)] = se * hu[(1, j)];
    }
    h[(0, L1)] += sl;
    h[(1, L2)] += sl;
    c[(1, 0)] += se * gc;
    for i in 0..ns {
        c[(1, os + i)] += se * gc * sensing.c[(0, i)];
    }
    h[(1, NS)] += se * gc * sensing.d[(0, 0)];

    let mut w = DMatrix::identity(N_INPUTS, N_INPUTS);
    w.view_mut((0, 0), (2, 2)).copy_from(&input.squeezer_matrix());
    Ok(PlantModel { a, g, c, h, w })
}

/// Solve `A P + P Aᵀ + Q = 0` for stable `A` via a complex Schur decomposition.
pub fn lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let ac = a.map(|x| Complex64::new(x, 0.0));
    let schur = ac
        .try_schur(1e-14 * a.norm().max(1.0), 10_000)
        .ok_or_else(|| Error::Linalg("Schur decomposition did not converge".into()))?;
    let (u, t) = schur.unpack();
    let qh = u.adjoint() * q.map(|x| Complex64::new(x, 0.0)) * &u;
    let mut y = DMatrix::<Complex64>::zeros(n, n);
    for j in (0..n).rev() {
        for i in (0..n).rev() {
            let mut acc = qh[(i, j)];
            for k in i + 1..n {
                acc += t[(i, k)] * y[(k, j)];
            }
            for k in j + 1..n {
                acc += y[(i, k)] * t[(j, k)].conj();
            }
            let den = t[(i, i)] + t[(j, j)].conj();
            if den.norm() == 0.0 {
                return Err(Error::Linalg("Lyapunov operator is singular (unstable drift)".into()));
            }
            y[(i, j)] = -acc / den;
        }
    }
    let p = (&u * y * u.adjoint()).map(|z| z.re);
    Ok((&p + p.transpose()) * 0.5)
}

/// Exact discretization of `dx = A x dt + dw` with `E[dw dwᵀ] = Q dt` over a step `tau`.
///
/// Returns `(Φ, Q_d)` with `Φ = e^{Aτ}` and `Q_d = ∫₀^τ e^{As} Q e^{Aᵀs} ds`.
pub fn van_loan(a: &DMatrix<f64>, q: &DMatrix<f64>, tau: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let norm = a.iter().map(|x| x.abs()).fold(0.0f64, f64::max) * n as f64;
    let mut halvings = 0;
    let mut h = tau;
    while norm * h > 0.5 && halvings < 60 {
        h *= 0.5;
        halvings += 1;
    }
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(&(-a * h));
    m.view_mut((0, n), (n, n)).copy_from(&(q * h));
    m.view_mut((n, n), (n, n)).copy_from(&(a.transpose() * h));
    let e = m.exp();
    let mut phi = e.view((n, n), (n, n)).transpose();
    let mut qd = &phi * e.view((0, n), (n, n));
    qd = (&qd + qd.transpose()) * 0.5;
    for _ in 0..halvings {
        qd = &phi * &qd * phi.transpose() + &qd;
        qd = (&qd + qd.transpose()) * 0.5;
        phi = &phi * &phi;
    }
    (phi, qd)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::spectral_density;
    use crate::spectra::{white_force, white_sensing};

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    fn check_filter(spec: &RationalSpectrum) {
        let f = shaping_filter(spec).unwrap();
        for k in 0..200 {
            let w = 10f64.powf(-3.0 + 7.0 * k as f64 / 199.0);
            let h = f.response(w).unwrap()[(0, 0)].norm_sqr();
            let s = spec.evaluate(w);
            assert!(
                (h - s).abs() <= 1e-8 * s.max(spec.evaluate(1.0) * 1e-12) + 1e-300,
                "Ω={w} |H|²={h} S={s}"
            );
        }
        // Stability.
        let ev = f.a.map(|x| Complex64::new(x, 0.0)).eigenvalues();
        if let Some(ev) = ev {
            assert!(ev.iter().all(|z| z.re < 0.0));
        }
    }

    #[test]
    fn shaping_filters_reproduce_spectra() {
        check_filter(&RationalSpectrum::new(&[1.0], &[1.0, 1.0], 2.0).unwrap());
        check_filter(&RationalSpectrum::new(&[1.0, 2.0], &[4.0, 0.1, 1.0], 1.0).unwrap());
        // Resonant, with a double real zero at Ω = 3.
        check_filter(&RationalSpectrum::new(&[81.0, -18.0, 1.0], &[16.0, 8.5, -6.5, 1.0], 1.0).unwrap());
        // High order with a zero at the origin and a constant tail.
        check_filter(&RationalSpectrum::new(&[0.0, 1.0, 3.0], &[1.0, 3.0, 3.0], 1e4).unwrap());
        check_filter(&RationalSpectrum::new(&[1.0, 1.0], &[1e6, 3e4, 300.0, 1.0], 1.0).unwrap());
    }

    #[test]
    fn white_filters_are_static() {
        let f = shaping_filter(&white_force(10.0, 1.0).unwrap()).unwrap();
        assert_eq!(f.states(), 0);
        assert!(rel(f.d[(0, 0)].powi(2), 200.0) < 1e-15);
        let z = shaping_filter(&white_sensing(f64::INFINITY, 1.0).unwrap()).unwrap();
        assert_eq!(z.d[(0, 0)], 0.0);
    }

    #[test]
    fn model_spectrum_matches_frequency_domain() {
        let p = PlantParams::new(1.0, 0.05, 3.0, 0.8).unwrap();
        let force = RationalSpectrum::new(&[4.0, 1.0], &[1.0, 0.5, 1.0], 3.0).unwrap();
        let sensing = RationalSpectrum::new(&[1.0], &[25.0, 1.0], 2.0).unwrap();
        let noise = NoiseModel::new(force, sensing).unwrap();
        for input in [
            InputFieldState::Vacuum,
            InputFieldState::fis(0.7, 0.3).unwrap(),
            InputFieldState::fds(0.7, 0.3, 4.0, -1.5).unwrap(),
        ] {
            let m = plant_model(&p, &noise, &input).unwrap();
            for w in [0.01, 0.4, 1.0, 2.5, 30.0] {
                let s1 = m.spectral_density(w).unwrap();
                let s2 = spectral_density(w, &p, &noise, &input).unwrap();
                let scale = s2.norm();
                for i in 0..4 {
                    for j in 0..4 {
                        assert!(
                            (s1[(i, j)] - s2[(i, j)]).norm() < 1e-10 * scale,
                            "{input:?} Ω={w} ({i},{j}) {} vs {}",
                            s1[(i, j)],
                            s2[(i, j)]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn lyapunov_matches_kronecker_solve() {
        let a = DMatrix::from_row_slice(3, 3, &[-0.1, 2.0, 0.0, -2.0, -0.3, 1.0, 0.0, 0.5, -4.0]);
        let q = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.2, 2.0, 0.1, 0.0, 0.1, 0.5]);
        let p = lyapunov(&a, &q).unwrap();
        let res = &a * &p + &p * a.transpose() + &q;
        assert!(res.norm() < 1e-12);
        // Kronecker form: (I⊗A + A⊗I) vec(P) = −vec(Q).
        let n = 3;
        let mut k = DMatrix::zeros(n * n, n * n);
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    k[(i * n + j, l * n + j)] += a[(i, l)];
                    k[(i * n + j, i * n + l)] += a[(j, l)];
                }
            }
        }
        let rhs = DMatrix::from_iterator(n * n, 1, (0..n * n).map(|idx| -q[(idx / n, idx % n)]));
        let x = k.lu().solve(&rhs).unwrap();
        for idx in 0..n * n {
            assert!((x[(idx, 0)] - p[(idx / n, idx % n)]).abs() < 1e-12);
        }
    }

    #[test]
    fn lyapunov_oscillator_variance() {
        // Damped oscillator with white force of intensity S: variance S/(2γ) per quadrature.
        let (w, g, s) = (1.0, 1e-3, 2e4);
        let a = DMatrix::from_row_slice(2, 2, &[0.0, w, -w, -g]);
        let q = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, s]);
        let p = lyapunov(&a, &q).unwrap();
        assert!(rel(p[(0, 0)], s / (2.0 * g)) < 1e-9);
        assert!(rel(p[(1, 1)], s / (2.0 * g)) < 1e-9);
        assert!(p[(0, 1)].abs() < 1e-9 * p[(0, 0)]);
    }

    #[test]
    fn van_loan_scalar() {
        let a = DMatrix::from_element(1, 1, -3.0);
        let q = DMatrix::from_element(1, 1, 2.0);
        let (phi, qd) = van_loan(&a, &q, 1.7);
        assert!(rel(phi[(0, 0)], (-5.1f64).exp()) < 1e-12);
        let want = 2.0 * (1.0 - (-10.2f64).exp()) / 6.0;
        assert!(rel(qd[(0, 0)], want) < 1e-12);
    }

    #[test]
    fn van_loan_integrator() {
        // x' = 0, J' = x: a random walk integrated once.
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]);
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let t = 2.0;
        let (phi, qd) = van_loan(&a, &q, t);
        assert!((phi[(1, 0)] - t).abs() < 1e-14);
        assert!(rel(qd[(1, 1)], t * t * t / 3.0) < 1e-12);
        assert!(rel(qd[(0, 1)], t * t / 2.0) < 1e-12);
    }
}
