//! Line-oriented `key = value` configuration.
//!
//! ```text
//! # comment
//! plant.omega_m = 1
//! [noise]
//! omega_F = 100
//! omega_S = inf
//! ```
//!
//! A `[section]` line prefixes the following keys. Lists are comma separated,
//! optionally wrapped in brackets. `inf` is accepted wherever a corner
//! frequency may be infinite. Unknown keys are rejected.
//!
//! | key | meaning |
//! |-----|---------|
//! | `plant.omega_m`, `plant.gamma_m`, `plant.omega_q`, `plant.eta` | oscillator and coupling |
//! | `noise.omega_F`, `noise.omega_S` | white-noise corners |
//! | `noise.force.numerator`, `noise.force.denominator`, `noise.force.amplitude` | rational force spectrum in powers of Ω² |
//! | `noise.sensing.numerator`, `noise.sensing.denominator`, `noise.sensing.amplitude` | rational sensing spectrum |
//! | `squeeze.kind` | `vacuum`, `fis`, `fds` or `fds-auto` |
//! | `squeeze.r`, `squeeze.theta`, `squeeze.gamma_f`, `squeeze.delta` | squeezing and filter |
//! | `squeeze.band` | tuning band `lo, hi` for `fds-auto` |
//! | `basis.N`, `basis.tau` | mode count and window duration (`auto`) |
//! | `quad.engine` | `exact` or `quadrature` |
//! | `quad.omega_max`, `quad.points_per_decade` | quadrature grid |
//! | `sweep.omega_F`, `sweep.omega_S`, `sweep.omega_q`, `sweep.eta` | lists for sweeps and studies |
//! | `sweep.bracket` | `lo, hi` for transition searches |
//! | `sweep.check_doubled` | repeat each search with twice the modes |
//! | `sweep.omega_min`, `sweep.omega_max`, `sweep.points` | frequency grid for `spectra` |

use std::collections::BTreeMap;

use crate::boundary::{InputSpec, Ray, SweepSettings, SweepSpec};
use crate::covariance::{Engine, QuadratureSettings};
use crate::entanglement::PptTolerances;
use crate::error::{Error, Result};
use crate::plant::PlantParams;
use crate::spectra::{NoiseModel, RationalSpectrum};
use crate::squeeze::InputFieldState;

const KEYS: &[&str] = &[
    "plant.omega_m",
    "plant.gamma_m",
    "plant.omega_q",
    "plant.eta",
    "noise.omega_F",
    "noise.omega_S",
    "noise.force.numerator",
    "noise.force.denominator",
    "noise.force.amplitude",
    "noise.sensing.numerator",
    "noise.sensing.denominator",
    "noise.sensing.amplitude",
    "squeeze.kind",
    "squeeze.r",
    "squeeze.theta",
    "squeeze.gamma_f",
    "squeeze.delta",
    "squeeze.band",
    "basis.N",
    "basis.tau",
    "quad.engine",
    "quad.omega_max",
    "quad.points_per_decade",
    "sweep.omega_F",
    "sweep.omega_S",
    "sweep.omega_q",
    "sweep.eta",
    "sweep.bracket",
    "sweep.check_doubled",
    "sweep.omega_min",
    "sweep.omega_max",
    "sweep.points",
];

/// Parsed configuration: raw values with the line each came from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    values: BTreeMap<String, (usize, String)>,
}

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

fn parse_number(line: usize, key: &str, raw: &str) -> Result<f64> {
    let t = raw.trim();
    match t {
        "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
        _ => t
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| err(line, format!("{key}: expected a number, got '{t}'"))),
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| err(line, "unterminated section header"))?
                    .trim();
                section = if name.is_empty() { String::new() } else { format!("{name}.") };
                continue;
            }
            let (k, v) = content
                .split_once('=')
                .ok_or_else(|| err(line, format!("expected 'key = value', got '{content}'")))?;
            let key = format!("{section}{}", k.trim());
            if !KEYS.contains(&key.as_str()) {
                return Err(err(line, format!("unknown key '{key}'")));
            }
            if values.contains_key(&key) {
                return Err(err(line, format!("duplicate key '{key}'")));
            }
            values.insert(key, (line, v.trim().to_string()));
        }
        Ok(Config { values })
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    fn raw(&self, key: &str) -> Option<(usize, &str)> {
        self.values.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    pub fn number(&self, key: &str) -> Result<Option<f64>> {
        self.raw(key).map(|(l, v)| parse_number(l, key, v)).transpose()
    }

    fn number_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.number(key)?.unwrap_or(default))
    }

    pub fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.raw(key)
            .map(|(l, v)| {
                let inner = v.trim().trim_start_matches('[').trim_end_matches(']');
                inner
                    .split(',')
                    .filter(|t| !t.trim().is_empty())
                    .map(|t| parse_number(l, key, t))
                    .collect()
            })
            .transpose()
    }

    fn pair(&self, key: &str) -> Result<Option<(f64, f64)>> {
        match self.list(key)? {
            None => Ok(None),
            Some(v) if v.len() == 2 => Ok(Some((v[0], v[1]))),
            Some(_) => Err(err(self.raw(key).unwrap().0, format!("{key}: expected two values"))),
        }
    }

    fn flag(&self, key: &str) -> Result<bool> {
        match self.raw(key) {
            None => Ok(false),
            Some((_, "true")) => Ok(true),
            Some((_, "false")) => Ok(false),
            Some((l, v)) => Err(err(l, format!("{key}: expected true or false, got '{v}'"))),
        }
    }

    fn count(&self, key: &str) -> Result<Option<usize>> {
        self.raw(key)
            .map(|(l, v)| {
                v.parse::<usize>()
                    .map_err(|_| err(l, format!("{key}: expected a positive integer, got '{v}'")))
            })
            .transpose()
    }

    /// Attach a line to parameter errors: the key the message names, else `key`.
    fn at<T>(&self, key: &str, r: Result<T>) -> Result<T> {
        r.map_err(|e| match e {
            Error::InvalidParameter(m) | Error::InvalidSpectrum(m) => {
                let section = key.rsplit_once('.').map_or("", |(s, _)| s);
                let named = self
                    .values
                    .iter()
                    .filter(|(k, _)| k.starts_with(section))
                    .find(|(k, _)| m.starts_with(k.rsplit('.').next().unwrap_or(k)))
                    .map(|(_, (l, _))| *l);
                err(named.or(self.raw(key).map(|(l, _)| l)).unwrap_or(0), m)
            }
            other => other,
        })
    }

    pub fn plant(&self) -> Result<PlantParams> {
        let p = PlantParams::new(
            self.number_or("plant.omega_m", 1.0)?,
            self.number_or("plant.gamma_m", 1e-3)?,
            self.number_or("plant.omega_q", 1.0)?,
            self.number_or("plant.eta", 1.0)?,
        );
        self.at("plant.omega_m", p)
    }

    fn rational(&self, which: &str) -> Result<Option<RationalSpectrum>> {
        let num = format!("noise.{which}.numerator");
        let den = format!("noise.{which}.denominator");
        let amp = format!("noise.{which}.amplitude");
        match (self.list(&num)?, self.list(&den)?) {
            (None, None) => {
                if self.contains(&amp) {
                    return Err(err(self.raw(&amp).unwrap().0, format!("{amp} needs {num} and {den}")));
                }
                Ok(None)
            }
            (Some(p), Some(q)) => {
                let a = self.number_or(&amp, 1.0)?;
                self.at(&num, RationalSpectrum::new(&p, &q, a)).map(Some)
            }
            _ => Err(err(
                self.raw(&num).or(self.raw(&den)).unwrap().0,
                format!("{num} and {den} must be given together"),
            )),
        }
    }

    /// Noise model from corners or coefficient lists; `omega` overrides the corners.
    pub fn noise_with(&self, omega_f: Option<f64>, omega_s: Option<f64>) -> Result<NoiseModel> {
        let wm = self.plant()?.omega_m;
        let force = self.rational("force")?;
        let sensing = self.rational("sensing")?;
        if force.is_some() && self.contains("noise.omega_F") {
            return Err(err(self.raw("noise.omega_F").unwrap().0, "give either noise.omega_F or force coefficients"));
        }
        if sensing.is_some() && self.contains("noise.omega_S") {
            return Err(err(self.raw("noise.omega_S").unwrap().0, "give either noise.omega_S or sensing coefficients"));
        }
        match (force, sensing) {
            (None, None) => {
                let of = match omega_f {
                    Some(v) => v,
                    None => self.number("noise.omega_F")?.ok_or_else(|| err(0, "missing noise.omega_F"))?,
                };
                let os = match omega_s {
                    Some(v) => v,
                    None => self.number("noise.omega_S")?.ok_or_else(|| err(0, "missing noise.omega_S"))?,
                };
                self.at("noise.omega_F", NoiseModel::white(of, os, wm))
            }
            (f, s) => {
                let f = match f {
                    Some(f) => f,
                    None => {
                        let of = omega_f.map_or_else(|| self.number_or("noise.omega_F", f64::NAN), Ok)?;
                        self.at("noise.omega_F", crate::spectra::white_force(of, wm))?
                    }
                };
                let s = match s {
                    Some(s) => s,
                    None => {
                        let os = omega_s.map_or_else(|| self.number_or("noise.omega_S", f64::NAN), Ok)?;
                        self.at("noise.omega_S", crate::spectra::white_sensing(os, wm))?
                    }
                };
                self.at("noise.force.numerator", NoiseModel::new(f, s))
            }
        }
    }

    pub fn noise(&self) -> Result<NoiseModel> {
        self.noise_with(None, None)
    }

    pub fn input(&self) -> Result<InputSpec> {
        let kind = self.raw("squeeze.kind").map_or("vacuum", |(_, v)| v);
        let r = self.number_or("squeeze.r", 0.0)?;
        let theta = self.number_or("squeeze.theta", 0.0)?;
        let s = match kind {
            "vacuum" => Ok(InputSpec::Fixed(InputFieldState::Vacuum)),
            "fis" => InputFieldState::fis(r, theta).map(InputSpec::Fixed),
            "fds" => {
                let gf = self.number("squeeze.gamma_f")?.ok_or_else(|| err(0, "fds needs squeeze.gamma_f"))?;
                let d = self.number("squeeze.delta")?.ok_or_else(|| err(0, "fds needs squeeze.delta"))?;
                InputFieldState::fds(r, theta, gf, d).map(InputSpec::Fixed)
            }
            "fds-auto" => Ok(InputSpec::Autotuned {
                r,
                band: self.pair("squeeze.band")?,
            }),
            other => {
                return Err(err(
                    self.raw("squeeze.kind").unwrap().0,
                    format!("squeeze.kind must be vacuum, fis, fds or fds-auto, got '{other}'"),
                ))
            }
        };
        self.at("squeeze.r", s)
    }

    pub fn modes(&self) -> Result<usize> {
        let n = self.count("basis.N")?.unwrap_or(128);
        if n == 0 {
            return Err(err(self.raw("basis.N").unwrap().0, "basis.N must be positive"));
        }
        Ok(n)
    }

    /// Window duration, `None` for the automatic rule.
    pub fn tau(&self) -> Result<Option<f64>> {
        match self.raw("basis.tau") {
            None | Some((_, "auto")) => Ok(None),
            Some(_) => self.number("basis.tau"),
        }
    }

    pub fn engine(&self) -> Result<Engine> {
        let q = QuadratureSettings {
            omega_max: self.number("quad.omega_max")?,
            points_per_decade: self.count("quad.points_per_decade")?.unwrap_or(64),
            refinements: Vec::new(),
        };
        match self.raw("quad.engine").map_or("exact", |(_, v)| v) {
            "exact" => Ok(Engine::Exact),
            "quadrature" => Ok(Engine::Quadrature(q)),
            other => Err(err(
                self.raw("quad.engine").unwrap().0,
                format!("quad.engine must be exact or quadrature, got '{other}'"),
            )),
        }
    }

    pub fn sweep_settings(&self) -> Result<SweepSettings> {
        Ok(SweepSettings {
            plant: self.plant()?,
            input: self.input()?,
            modes: self.modes()?,
            tau: self.tau()?,
            engine: self.engine()?,
            tol: PptTolerances::default(),
        })
    }

    /// Transition search along the `Ω_S` ray at the configured `Ω_F`, or a `β_S`
    /// ray when the sensing spectrum is given by coefficients.
    pub fn sweep_spec(&self) -> Result<SweepSpec> {
        let settings = self.sweep_settings()?;
        let sensing_coefficients = self.contains("noise.sensing.numerator");
        let (ray, default_bracket) = if sensing_coefficients {
            (Ray::SensingScale { noise: self.noise()? }, (1e-3, 1e3))
        } else {
            let of = self.number("noise.omega_F")?.ok_or_else(|| err(0, "transition search needs noise.omega_F"))?;
            if self.contains("noise.force.numerator") {
                return Err(err(
                    self.raw("noise.force.numerator").unwrap().0,
                    "an omega_S ray needs white noises; give sensing coefficients for a beta_S ray",
                ));
            }
            (Ray::SensingCorner { omega_f: of }, (of / 10.0, of * 10.0))
        };
        Ok(SweepSpec {
            plant: settings.plant,
            input: settings.input,
            ray,
            bracket: self.pair("sweep.bracket")?.unwrap_or(default_bracket),
            modes: settings.modes,
            tau: settings.tau,
            engine: settings.engine,
            tol: settings.tol,
            check_doubled: self.flag("sweep.check_doubled")?,
        })
    }

    pub fn sweep_list(&self, key: &str) -> Result<Vec<f64>> {
        self.list(key)?.ok_or_else(|| err(0, format!("missing {key}")))
    }

    /// `(lo, hi, points)` of the spectra grid.
    pub fn spectra_grid(&self) -> Result<(f64, f64, usize)> {
        let lo = self.number_or("sweep.omega_min", 1e-1)?;
        let hi = self.number_or("sweep.omega_max", 1e4)?;
        let n = self.count("sweep.points")?.unwrap_or(200);
        if !(lo > 0.0 && hi > lo && hi.is_finite() && n >= 2) {
            return Err(err(0, "spectra grid needs 0 < omega_min < omega_max and points ≥ 2"));
        }
        Ok((lo, hi, n))
    }
}
