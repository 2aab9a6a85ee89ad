//! Locating the entangling–disentangling transition along a sensing-noise ray.
//!
//! A ray varies one sensing-noise parameter with everything else fixed. The
//! continuous surrogate `ν̃_min − 1` is negative on the entangled side; its sign
//! change is located by a coarse log scan followed by log-bisection.

use std::sync::Mutex;

use rayon::prelude::*;

use crate::covariance::{build_covariance, Engine, TemporalModeBasis};
use crate::entanglement::{ppt_verdict, EntanglementVerdict, PptTolerances};
use crate::error::{Error, Result};
use crate::plant::PlantParams;
use crate::spectra::NoiseModel;
use crate::squeeze::{autotune, default_band, InputFieldState};

/// Points in the coarse uniqueness scan.
pub const SCAN_POINTS: usize = 16;
/// Relative bracket width at which bisection stops.
pub const BISECTION_WIDTH: f64 = 1e-3;
/// Relative offset of the two verification points around the boundary.
pub const REPORT_OFFSET: f64 = 1e-2;

/// Input light for a study; autotuned filters are re-tuned for every `Ω_q`.
#[derive(Debug, Clone, PartialEq)]
pub enum InputSpec {
    Fixed(InputFieldState),
    Autotuned { r: f64, band: Option<(f64, f64)> },
}

impl InputSpec {
    pub fn resolve(&self, p: &PlantParams) -> Result<InputFieldState> {
        match self {
            InputSpec::Fixed(s) => Ok(*s),
            InputSpec::Autotuned { r, band } => autotune(p, *r, band.unwrap_or_else(|| default_band(p))),
        }
    }
}

/// Which sensing-noise parameter varies.
#[derive(Debug, Clone, PartialEq)]
pub enum Ray {
    /// White noises; `Ω_S` varies at fixed `Ω_F`. Larger `Ω_S` means less sensing noise.
    SensingCorner { omega_f: f64 },
    /// The sensing spectrum of `noise` is scaled by `β_S`.
    SensingScale { noise: NoiseModel },
}

impl Ray {
    pub fn noise_at(&self, x: f64, omega_m: f64) -> Result<NoiseModel> {
        match self {
            Ray::SensingCorner { omega_f } => NoiseModel::white(*omega_f, x, omega_m),
            Ray::SensingScale { noise } => noise.with_sensing_scale(x),
        }
    }

    /// Basis shared by every point of the ray, fixed by the force-noise corner.
    pub fn basis(&self, n: usize, p: &PlantParams) -> Result<TemporalModeBasis> {
        match self {
            Ray::SensingCorner { omega_f } => TemporalModeBasis::new(n, 1.0 / (4.0 * omega_f)),
            Ray::SensingScale { noise } => TemporalModeBasis::auto(n, p, noise),
        }
    }
}

/// One transition search.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub plant: PlantParams,
    pub input: InputSpec,
    pub ray: Ray,
    pub bracket: (f64, f64),
    pub modes: usize,
    /// Window duration; `None` uses the ray's automatic basis.
    pub tau: Option<f64>,
    pub engine: Engine,
    pub tol: PptTolerances,
    /// Repeat the search with twice the modes around the reported point.
    pub check_doubled: bool,
}

impl SweepSpec {
    /// `Ω_S` ray at fixed `Ω_F`, bracketed by `[Ω_F/10, 10·Ω_F]`, 128 modes.
    pub fn corner_ray(plant: PlantParams, input: InputSpec, omega_f: f64) -> Self {
        SweepSpec {
            plant,
            input,
            ray: Ray::SensingCorner { omega_f },
            bracket: (omega_f / 10.0, omega_f * 10.0),
            modes: 128,
            tau: None,
            engine: Engine::Exact,
            tol: PptTolerances::default(),
            check_doubled: false,
        }
    }

    pub fn basis(&self) -> Result<TemporalModeBasis> {
        match self.tau {
            Some(t) => TemporalModeBasis::new(self.modes, t),
            None => self.ray.basis(self.modes, &self.plant),
        }
    }

    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.bracket;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::param(format!("bracket must satisfy 0 < lo < hi < ∞, got [{lo}, {hi}]")));
        }
        Ok(())
    }
}

/// Counters over every covariance matrix built through this module.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalStats {
    pub evaluations: usize,
    pub min_symplectic: f64,
    pub max_below_threshold: usize,
}

static STATS: Mutex<EvalStats> = Mutex::new(EvalStats {
    evaluations: 0,
    min_symplectic: f64::INFINITY,
    max_below_threshold: 0,
});

pub fn evaluation_stats() -> EvalStats {
    *STATS.lock().unwrap()
}

/// Build the covariance matrix and decide.
pub fn verdict_at(
    p: &PlantParams,
    noise: &NoiseModel,
    s: &InputFieldState,
    basis: &TemporalModeBasis,
    engine: &Engine,
    tol: &PptTolerances,
) -> Result<EntanglementVerdict> {
    let cov = build_covariance(p, noise, s, basis, engine)?;
    let v = ppt_verdict(&cov, tol)?;
    let mut st = STATS.lock().unwrap();
    st.evaluations += 1;
    st.min_symplectic = st.min_symplectic.min(v.diagnostics.min_symplectic);
    st.max_below_threshold = st.max_below_threshold.max(usize::from(v.nu_min < 1.0 - tol.eps_ppt));
    Ok(v)
}

/// Surrogate evaluation along one ray with a fixed basis.
struct RayEval<'a> {
    spec: &'a SweepSpec,
    input: InputFieldState,
    basis: TemporalModeBasis,
}

impl RayEval<'_> {
    fn verdict(&self, x: f64) -> Result<EntanglementVerdict> {
        let noise = self.spec.ray.noise_at(x, self.spec.plant.omega_m)?;
        verdict_at(&self.spec.plant, &noise, &self.input, &self.basis, &self.spec.engine, &self.spec.tol)
    }

    fn surrogate(&self, x: f64) -> Result<f64> {
        Ok(self.verdict(x)?.nu_min - 1.0)
    }

    fn sign(&self, value: f64) -> i8 {
        if value > self.spec.tol.eps_ppt {
            1
        } else if value < -self.spec.tol.eps_ppt {
            -1
        } else {
            0
        }
    }

    /// Log-bisection between points of opposite surrogate sign.
    fn bisect(&self, mut lo: (f64, f64), mut hi: (f64, f64)) -> Result<(f64, usize)> {
        let mut iterations = 0;
        while hi.0 / lo.0 - 1.0 > BISECTION_WIDTH {
            let mid = (lo.0 * hi.0).sqrt();
            let f = self.surrogate(mid)?;
            iterations += 1;
            match self.sign(f) {
                // Inside the indeterminate band: treat as the root.
                0 => return Ok((mid, iterations)),
                s if s == self.sign(lo.1) => lo = (mid, f),
                _ => hi = (mid, f),
            }
        }
        Ok(((lo.0 * hi.0).sqrt(), iterations))
    }
}

/// A located transition.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPoint {
    /// Boundary value of the ray parameter (`Ω_S*` or `β_S*`).
    pub value: f64,
    pub omega_f: Option<f64>,
    /// Sensing corner at the boundary, when one is recorded.
    pub omega_s: Option<f64>,
    pub omega_q: f64,
    pub input: InputFieldState,
    /// `ν̃_min` at the bracket ends.
    pub nu_at_bracket: (f64, f64),
    pub iterations: usize,
    pub basis: TemporalModeBasis,
    /// Coarse scan `(x, ν̃_min − 1)`.
    pub scan: Vec<(f64, f64)>,
    /// Verdicts at `value·(1 ± 10⁻²)` differ.
    pub verified: bool,
    /// Boundary found again with twice the modes.
    pub doubled: Option<f64>,
}

impl BoundaryPoint {
    /// Relative change of the boundary under mode doubling.
    pub fn doubling_shift(&self) -> Option<f64> {
        self.doubled.map(|d| (d - self.value).abs() / self.value)
    }
}

/// Log-spaced points spanning `[lo, hi]` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i == 0 {
                lo
            } else if i + 1 == n {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// Sign changes of the scan, ignoring points inside the indeterminate band.
fn sign_changes(signs: &[i8]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut last: Option<usize> = None;
    for (i, &s) in signs.iter().enumerate() {
        if s == 0 {
            continue;
        }
        if let Some(j) = last {
            if signs[j] != s {
                out.push((j, i));
            }
        }
        last = Some(i);
    }
    out
}

/// Coarse scan of the surrogate across the bracket.
pub fn coarse_scan(spec: &SweepSpec) -> Result<Vec<(f64, f64)>> {
    spec.validate()?;
    let p = &spec.plant;
    let ev = RayEval {
        spec,
        input: spec.input.resolve(p)?,
        basis: spec.basis()?,
    };
    log_grid(spec.bracket.0, spec.bracket.1, SCAN_POINTS)
        .into_iter()
        .map(|x| Ok((x, ev.surrogate(x)?)))
        .collect()
}

/// Number of sign changes in a coarse scan.
pub fn count_sign_changes(scan: &[(f64, f64)], tol: &PptTolerances) -> usize {
    let signs: Vec<i8> = scan.iter().map(|&(_, f)| sign_of(f, tol.eps_ppt)).collect();
    sign_changes(&signs).len()
}

fn sign_of(f: f64, eps: f64) -> i8 {
    if f > eps {
        1
    } else if f < -eps {
        -1
    } else {
        0
    }
}

/// Scan, check uniqueness, bisect, verify.
pub fn find_transition(spec: &SweepSpec) -> Result<BoundaryPoint> {
    spec.validate()?;
    let p = &spec.plant;
    let input = spec.input.resolve(p)?;
    let basis = spec.basis()?;
    let ev = RayEval { spec, input, basis };

    let scan: Vec<(f64, f64)> = log_grid(spec.bracket.0, spec.bracket.1, SCAN_POINTS)
        .into_iter()
        .map(|x| Ok((x, ev.surrogate(x)?)))
        .collect::<Result<_>>()?;
    let signs: Vec<i8> = scan.iter().map(|&(_, f)| ev.sign(f)).collect();
    let changes = sign_changes(&signs);
    match changes.len() {
        0 => {
            return Err(Error::NoTransition {
                lo: spec.bracket.0,
                hi: spec.bracket.1,
            })
        }
        1 => {}
        count => return Err(Error::MultipleTransitions { count, scan }),
    }
    let (i, j) = changes[0];
    let (value, iterations) = if j > i + 1 {
        // A run of indeterminate points separates the two signs: the band is the root.
        let mid = (i + j) / 2;
        (scan[mid].0, 0)
    } else {
        ev.bisect(scan[i], scan[j])?
    };

    let below = ev.verdict(value * (1.0 - REPORT_OFFSET))?;
    let above = ev.verdict(value * (1.0 + REPORT_OFFSET))?;
    let verified = !below.indeterminate && !above.indeterminate && below.entangled != above.entangled;

    let doubled = if spec.check_doubled {
        Some(refine_doubled(spec, input, basis.doubled(), value)?)
    } else {
        None
    };

    let omega_s = match &spec.ray {
        Ray::SensingCorner { .. } => Some(value),
        Ray::SensingScale { noise } => noise.with_sensing_scale(value)?.omega_s,
    };
    let omega_f = match &spec.ray {
        Ray::SensingCorner { omega_f } => Some(*omega_f),
        Ray::SensingScale { noise } => noise.omega_f,
    };
    Ok(BoundaryPoint {
        value,
        omega_f,
        omega_s,
        omega_q: p.omega_q,
        input,
        nu_at_bracket: (scan[0].1 + 1.0, scan[SCAN_POINTS - 1].1 + 1.0),
        iterations,
        basis,
        scan,
        verified,
        doubled,
    })
}

/// Bisect again on a doubled basis, starting from a small bracket around `guess`.
fn refine_doubled(spec: &SweepSpec, input: InputFieldState, basis: TemporalModeBasis, guess: f64) -> Result<f64> {
    let ev = RayEval { spec, input, basis };
    let mut q = 1.02;
    for _ in 0..8 {
        let lo = (guess / q).max(spec.bracket.0);
        let hi = (guess * q).min(spec.bracket.1);
        let a = (lo, ev.surrogate(lo)?);
        let b = (hi, ev.surrogate(hi)?);
        let (sa, sb) = (ev.sign(a.1), ev.sign(b.1));
        if sa == 0 {
            return Ok(lo);
        }
        if sb == 0 {
            return Ok(hi);
        }
        if sa != sb {
            return Ok(ev.bisect(a, b)?.0);
        }
        q = q * q;
    }
    Err(Error::NoTransition {
        lo: spec.bracket.0,
        hi: spec.bracket.1,
    })
}

/// Boundaries across interaction strengths and their relative spread.
#[derive(Debug, Clone, PartialEq)]
pub struct UniversalityResult {
    pub points: Vec<BoundaryPoint>,
    /// `max |x_i − x_j| / mean`.
    pub spread: f64,
}

/// Relative spread `max |x_i − x_j| / mean`.
pub fn relative_spread(values: &[f64]) -> f64 {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    (max - min) / mean
}

/// Run [`find_transition`] once per `Ω_q`, concurrently.
pub fn universality_study(omega_qs: &[f64], spec: &SweepSpec) -> Result<UniversalityResult> {
    if omega_qs.is_empty() {
        return Err(Error::param("universality study needs at least one omega_q"));
    }
    let points: Vec<BoundaryPoint> = omega_qs
        .par_iter()
        .map(|&oq| {
            let mut s = spec.clone();
            s.plant = spec.plant.with_omega_q(oq)?;
            find_transition(&s)
        })
        .collect::<Result<_>>()?;
    let values: Vec<f64> = points.iter().map(|b| b.value).collect();
    Ok(UniversalityResult {
        spread: relative_spread(&values),
        points,
    })
}

/// Universality study repeated at each detection efficiency.
pub fn loss_study(etas: &[f64], omega_qs: &[f64], spec: &SweepSpec) -> Result<Vec<(f64, UniversalityResult)>> {
    etas.iter()
        .map(|&eta| {
            let mut s = spec.clone();
            s.plant = spec.plant.with_eta(eta)?;
            Ok((eta, universality_study(omega_qs, &s)?))
        })
        .collect()
}

/// One grid point of a sweep.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    /// Row and column in the grid.
    pub index: (usize, usize),
    pub omega_f: f64,
    pub omega_s: f64,
    pub basis: Option<TemporalModeBasis>,
    pub outcome: std::result::Result<EntanglementVerdict, String>,
    /// Exit-code class of a failure, 0 on success.
    pub error_code: i32,
}

/// Settings shared by every sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub plant: PlantParams,
    pub input: InputSpec,
    pub modes: usize,
    pub tau: Option<f64>,
    pub engine: Engine,
    pub tol: PptTolerances,
}

/// Verdicts on the white-noise grid `omega_fs × omega_ss`, row-major.
///
/// Failures are recorded per point and do not stop the sweep.
pub fn sweep(omega_fs: &[f64], omega_ss: &[f64], settings: &SweepSettings) -> Vec<SweepPoint> {
    let input = settings.input.resolve(&settings.plant);
    let cells: Vec<(usize, usize)> = (0..omega_fs.len())
        .flat_map(|i| (0..omega_ss.len()).map(move |j| (i, j)))
        .collect();
    let mut points: Vec<SweepPoint> = cells
        .par_iter()
        .map(|&(i, j)| {
            let (of, os) = (omega_fs[i], omega_ss[j]);
            let mut basis = None;
            let outcome = input.as_ref().map_err(clone_error).and_then(|s| {
                let noise = NoiseModel::white(of, os, settings.plant.omega_m)?;
                let b = match settings.tau {
                    Some(t) => TemporalModeBasis::new(settings.modes, t)?,
                    None => TemporalModeBasis::auto(settings.modes, &settings.plant, &noise)?,
                };
                basis = Some(b);
                verdict_at(&settings.plant, &noise, s, &b, &settings.engine, &settings.tol)
            });
            SweepPoint {
                index: (i, j),
                omega_f: of,
                omega_s: os,
                basis,
                error_code: outcome.as_ref().err().map_or(0, Error::exit_code),
                outcome: outcome.map_err(|e| e.to_string()),
            }
        })
        .collect();
    points.sort_by_key(|p| p.index);
    points
}

fn clone_error(e: &Error) -> Error {
    match e {
        Error::InvalidParameter(m) => Error::InvalidParameter(m.clone()),
        other => Error::NonConvergent(other.to_string()),
    }
}
