//! Separability of the oscillator versus the output-light modes.
//!
//! Two routes decide entanglement on the same covariance matrix: the minimum
//! symplectic eigenvalue of the partial transpose, and the sign of the
//! determinant of the 2×2 Schur complement of the light block in `V_pt + iK`.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;

use crate::covariance::CovarianceMatrix;
use crate::error::{Error, Result};

/// Tolerances for the verdict.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PptTolerances {
    /// Half-width of the indeterminate band around `ν̃ = 1`.
    pub eps_ppt: f64,
    /// Physicality tolerance on `V + iK` and the symplectic eigenvalues of `V`.
    pub eps_phys: f64,
    /// Relative half-width of the indeterminate band of the Schur determinant.
    pub eps_det: f64,
    /// Largest allowed imaginary part of the Schur determinant, relative to its cancelled terms.
    pub eps_imag: f64,
}

impl Default for PptTolerances {
    fn default() -> Self {
        PptTolerances {
            eps_ppt: 1e-4,
            eps_phys: 1e-6,
            eps_det: 1e-6,
            eps_imag: 1e-8,
        }
    }
}

/// Block-diagonal symplectic form with `modes` blocks `[[0, 1], [−1, 0]]`.
pub fn symplectic_form(modes: usize) -> DMatrix<f64> {
    let mut k = DMatrix::zeros(2 * modes, 2 * modes);
    for i in 0..modes {
        k[(2 * i, 2 * i + 1)] = 1.0;
        k[(2 * i + 1, 2 * i)] = -1.0;
    }
    k
}

/// Negate the row and column of the oscillator momentum `b2` (index 1).
pub fn partial_transpose(v: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = v.clone();
    let n = v.nrows();
    for j in 0..n {
        if j != 1 {
            out[(1, j)] = -out[(1, j)];
            out[(j, 1)] = -out[(j, 1)];
        }
    }
    out
}

fn check_square_even(v: &DMatrix<f64>) -> Result<usize> {
    let n = v.nrows();
    if n != v.ncols() || n % 2 != 0 || n == 0 {
        return Err(Error::Linalg(format!(
            "expected a nonempty even square matrix, got {}×{}",
            v.nrows(),
            v.ncols()
        )));
    }
    let scale = v.amax();
    let asym = (v - v.transpose()).amax();
    if asym > 1e-12 * scale {
        return Err(Error::Linalg(format!(
            "matrix is not symmetric (max asymmetry {asym:e})"
        )));
    }
    Ok(n / 2)
}

/// Symplectic eigenvalues of a positive-definite `V`, ascending, one per mode.
///
/// With `V = L Lᵀ`, the eigenvalues of the Hermitian matrix `i Lᵀ K L` are
/// `±ν_j`. When the Cholesky factor does not exist the symmetric square root
/// of `V` is used instead.
pub fn symplectic_spectrum(v: &DMatrix<f64>) -> Result<Vec<f64>> {
    let modes = check_square_even(v)?;
    let k = symplectic_form(modes);
    let sym = (v + v.transpose()) * 0.5;
    let root = match sym.clone().cholesky() {
        Some(c) => c.l(),
        None => {
            let eig = sym.symmetric_eigen();
            let floor = -1e-12 * eig.eigenvalues.amax();
            if eig.eigenvalues.iter().any(|&e| e < floor) {
                return Err(Error::Unphysical(
                    "covariance matrix is not positive semidefinite".into(),
                ));
            }
            let sq = eig.eigenvalues.map(|e| e.max(0.0).sqrt());
            &eig.eigenvectors * DMatrix::from_diagonal(&sq) * eig.eigenvectors.transpose()
        }
    };
    let m = root.transpose() * &k * &root;
    let h = m.map(|x| Complex64::new(0.0, x));
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(ev.split_off(modes))
}

/// Outcome of the physicality checks on a covariance matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalityReport {
    pub min_symplectic: f64,
}

/// Assert `V + iK ⪰ −ε‖V‖`.
///
/// The symplectic spectrum is reported but not tested against an absolute
/// floor: a nearly pure state with a large `‖V‖` sits within the relative
/// tolerance while its smallest `ν` dips a few `ε` below 1.
pub fn check_physical(v: &DMatrix<f64>, eps_phys: f64) -> Result<PhysicalityReport> {
    let modes = check_square_even(v)?;
    let k = symplectic_form(modes);
    let m = DMatrix::<Complex64>::from_fn(2 * modes, 2 * modes, |i, j| {
        Complex64::new(v[(i, j)], k[(i, j)])
    });
    let lowest = m.symmetric_eigenvalues().min();
    if lowest < -eps_phys * v.norm() {
        return Err(Error::Unphysical(format!(
            "V + iK has eigenvalue {lowest:e} below −ε‖V‖"
        )));
    }
    let min = symplectic_spectrum(v)?[0];
    Ok(PhysicalityReport {
        min_symplectic: min,
    })
}

/// Value of the Schur-complement determinant with its diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchurIndicator {
    /// Real part of the determinant.
    pub value: f64,
    pub imag: f64,
    /// `|S₁₁S₂₂| + |S₁₂S₂₁|` for the Schur complement `S`.
    pub scale: f64,
    /// Estimated condition number of `V^vv + iK^v` (from its Cholesky diagonal).
    pub vv_condition: f64,
}

impl SchurIndicator {
    /// Half-width of the band within which the sign is not trusted.
    pub fn band(&self, tol: &PptTolerances) -> f64 {
        (tol.eps_det * self.scale).max(10.0 * self.imag.abs())
    }
}

fn det2(m: &Matrix2<Complex64>) -> Complex64 {
    m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
}

/// `det[(V_pt^bb + iK^b) − V_pt^bv (V^vv + iK^v)⁻¹ V_pt^vb]`.
pub fn schur_indicator(cov: &CovarianceMatrix, tol: &PptTolerances) -> Result<SchurIndicator> {
    let v = partial_transpose(&cov.v);
    let n = v.nrows();
    let i = Complex64::new(0.0, 1.0);
    let mut bbb = Matrix2::<Complex64>::zeros();
    for r in 0..2 {
        for c in 0..2 {
            bbb[(r, c)] = Complex64::new(v[(r, c)], 0.0);
        }
    }
    bbb[(0, 1)] += i;
    bbb[(1, 0)] -= i;
    let bv = v.view((0, 2), (2, n - 2)).into_owned();
    if bv.iter().all(|&x| x == 0.0) {
        let d = det2(&bbb);
        return Ok(SchurIndicator {
            value: d.re,
            imag: d.im,
            scale: (bbb[(0, 0)] * bbb[(1, 1)]).norm() + (bbb[(0, 1)] * bbb[(1, 0)]).norm(),
            vv_condition: 1.0,
        });
    }
    let kv = symplectic_form((n - 2) / 2);
    let avv = DMatrix::<Complex64>::from_fn(n - 2, n - 2, |r, c| {
        Complex64::new(v[(r + 2, c + 2)], kv[(r, c)])
    });
    let chol = avv.clone().cholesky().ok_or_else(|| {
        Error::Unphysical("V^vv + iK^v is not positive definite on the basis".into())
    })?;
    let diag: Vec<f64> = chol.l_dirty().diagonal().iter().map(|z| z.re).collect();
    let dmax = diag.iter().cloned().fold(0.0f64, f64::max);
    let dmin = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    let vv_condition = (dmax / dmin).powi(2);

    let bvc = bv.map(|x| Complex64::new(x, 0.0));
    let rhs = bvc.transpose();
    let x = avv
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Linalg("singular light block in Schur complement".into()))?;
    let t = &bvc * x;
    let mut s = bbb;
    for r in 0..2 {
        for c in 0..2 {
            s[(r, c)] -= t[(r, c)];
        }
    }
    let d = det2(&s);
    // Rounding in the imaginary part is relative to the cancelled magnitudes;
    // the sign band is relative to the terms of the final determinant.
    let piece = |r: usize, c: usize| bbb[(r, c)].norm() + t[(r, c)].norm();
    let cancelled = piece(0, 0) * piece(1, 1) + piece(0, 1) * piece(1, 0);
    if d.im.abs() > tol.eps_imag * cancelled {
        return Err(Error::Linalg(format!(
            "Schur determinant is not real: {d} (cancelled magnitude {cancelled:e})"
        )));
    }
    let scale = (s[(0, 0)] * s[(1, 1)]).norm() + (s[(0, 1)] * s[(1, 0)]).norm();
    Ok(SchurIndicator {
        value: d.re,
        imag: d.im,
        scale,
        vv_condition,
    })
}

/// `max(0, −ln ν̃_min)`.
pub fn log_negativity(nu_min: f64) -> f64 {
    (-nu_min.ln()).max(0.0)
}

/// Result of the PPT test alone.
#[derive(Debug, Clone, PartialEq)]
pub struct PptResult {
    pub nu_min: f64,
    pub spectrum: Vec<f64>,
    pub below_threshold: usize,
}

/// Minimum symplectic eigenvalue of the partial transpose, enforcing the 1×N structure.
pub fn ppt(cov: &CovarianceMatrix, tol: &PptTolerances) -> Result<PptResult> {
    let spectrum = symplectic_spectrum(&partial_transpose(&cov.v))?;
    let below = spectrum.iter().filter(|&&x| x < 1.0 - tol.eps_ppt).count();
    if below > 1 {
        return Err(Error::MultipleNegativeModes { count: below });
    }
    Ok(PptResult {
        nu_min: spectrum[0],
        spectrum,
        below_threshold: below,
    })
}

/// Side of the boundary reported by one route.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Entangled,
    Separable,
    Indeterminate,
}

/// Diagnostics attached to a verdict.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerdictDiagnostics {
    pub modes: usize,
    pub eps_ppt: f64,
    pub schur_band: f64,
    pub schur_imag: f64,
    pub vv_condition: f64,
    pub min_symplectic: f64,
    pub ppt_side: Side,
    pub schur_side: Side,
}

/// Combined decision of both routes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntanglementVerdict {
    pub nu_min: f64,
    pub log_negativity: f64,
    pub schur_indicator: f64,
    /// `ν̃_min < 1 − ε_ppt`.
    pub entangled: bool,
    /// Either route lies inside its tolerance band.
    pub indeterminate: bool,
    pub diagnostics: VerdictDiagnostics,
}

impl EntanglementVerdict {
    pub fn status(&self) -> &'static str {
        if self.indeterminate {
            "indeterminate"
        } else {
            "ok"
        }
    }
}

/// Run both routes on a physical covariance matrix and require them to agree.
pub fn ppt_verdict(cov: &CovarianceMatrix, tol: &PptTolerances) -> Result<EntanglementVerdict> {
    let phys = check_physical(&cov.v, tol.eps_phys)?;
    let p = ppt(cov, tol)?;
    let s = schur_indicator(cov, tol)?;
    let band = s.band(tol);
    let ppt_side = if p.nu_min < 1.0 - tol.eps_ppt {
        Side::Entangled
    } else if p.nu_min > 1.0 + tol.eps_ppt {
        Side::Separable
    } else {
        Side::Indeterminate
    };
    let schur_side = if s.value < -band {
        Side::Entangled
    } else if s.value > band {
        Side::Separable
    } else {
        Side::Indeterminate
    };
    if ppt_side != Side::Indeterminate && schur_side != Side::Indeterminate && ppt_side != schur_side {
        return Err(Error::RouteDisagreement {
            nu_min: p.nu_min,
            indicator: s.value,
        });
    }
    Ok(EntanglementVerdict {
        nu_min: p.nu_min,
        log_negativity: log_negativity(p.nu_min),
        schur_indicator: s.value,
        entangled: ppt_side == Side::Entangled,
        indeterminate: ppt_side == Side::Indeterminate || schur_side == Side::Indeterminate,
        diagnostics: VerdictDiagnostics {
            modes: cov.modes(),
            eps_ppt: tol.eps_ppt,
            schur_band: band,
            schur_imag: s.imag,
            vv_condition: s.vv_condition,
            min_symplectic: phys.min_symplectic,
            ppt_side,
            schur_side,
        },
    })
}
