//! Tabular output of verdicts, boundaries and spectra.

use std::io::Write;

use crate::boundary::{BoundaryPoint, SweepPoint};
use crate::covariance::TemporalModeBasis;
use crate::entanglement::EntanglementVerdict;
use crate::error::Result;
use crate::plant::PlantParams;
use crate::spectra::{displacement_referred_terms, NoiseModel, SqlReference};
use crate::squeeze::{squeezed_quantum_noise_spectrum, InputFieldState};

/// Column names of the verdict table, in order.
pub const CSV_HEADER: &str = "run_id,omega_m,gamma_m,omega_q,eta,squeeze_kind,r,theta,gamma_f,delta,omega_F,omega_S,N,tau,nu_min,log_negativity,schur_indicator,entangled,status";

/// Column names of the spectra table.
pub const SPECTRA_HEADER: &str = "omega,squeeze_kind,force_over_sql,sensing_over_sql,quantum_vacuum_over_sql,quantum_input_over_sql";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Records,
}

/// One row of the verdict table.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub run_id: String,
    pub plant: PlantParams,
    pub input: Option<InputFieldState>,
    pub omega_f: Option<f64>,
    pub omega_s: Option<f64>,
    pub basis: Option<TemporalModeBasis>,
    pub verdict: Option<EntanglementVerdict>,
    /// `ok`, `indeterminate`, `boundary`, or `error: …`.
    pub status: String,
}

impl Record {
    pub fn from_verdict(
        run_id: impl Into<String>,
        plant: &PlantParams,
        input: &InputFieldState,
        noise: &NoiseModel,
        basis: &TemporalModeBasis,
        verdict: &EntanglementVerdict,
    ) -> Self {
        Record {
            run_id: run_id.into(),
            plant: *plant,
            input: Some(*input),
            omega_f: noise.omega_f,
            omega_s: noise.omega_s,
            basis: Some(*basis),
            verdict: Some(*verdict),
            status: verdict.status().to_string(),
        }
    }

    /// Row for a located boundary: `omega_S` holds `Ω_S*`, the verdict columns are empty.
    pub fn from_boundary(run_id: impl Into<String>, plant: &PlantParams, b: &BoundaryPoint) -> Self {
        let mut p = *plant;
        p.omega_q = b.omega_q;
        Record {
            run_id: run_id.into(),
            plant: p,
            input: Some(b.input),
            omega_f: b.omega_f,
            omega_s: b.omega_s,
            basis: Some(b.basis),
            verdict: None,
            status: "boundary".into(),
        }
    }

    pub fn from_sweep(run_id: impl Into<String>, plant: &PlantParams, input: Option<InputFieldState>, pt: &SweepPoint) -> Self {
        let (verdict, status) = match &pt.outcome {
            Ok(v) => (Some(*v), v.status().to_string()),
            Err(e) => (None, format!("error: {e}")),
        };
        Record {
            run_id: run_id.into(),
            plant: *plant,
            input,
            omega_f: Some(pt.omega_f),
            omega_s: Some(pt.omega_s),
            basis: pt.basis,
            verdict,
            status,
        }
    }

    fn fields(&self) -> Vec<(&'static str, String)> {
        let num = |x: Option<f64>| x.map_or_else(String::new, fmt_num);
        let s = self.input.as_ref();
        let v = self.verdict.as_ref();
        vec![
            ("run_id", self.run_id.clone()),
            ("omega_m", fmt_num(self.plant.omega_m)),
            ("gamma_m", fmt_num(self.plant.gamma_m)),
            ("omega_q", fmt_num(self.plant.omega_q)),
            ("eta", fmt_num(self.plant.eta)),
            ("squeeze_kind", s.map_or("", |s| s.kind()).to_string()),
            ("r", num(s.map(|s| s.r()))),
            ("theta", num(s.map(|s| s.theta()))),
            ("gamma_f", num(s.and_then(|s| matches!(s, InputFieldState::Fds { .. }).then(|| s.gamma_f())))),
            ("delta", num(s.and_then(|s| matches!(s, InputFieldState::Fds { .. }).then(|| s.delta())))),
            ("omega_F", num(self.omega_f)),
            ("omega_S", num(self.omega_s)),
            ("N", self.basis.map_or_else(String::new, |b| b.n.to_string())),
            ("tau", num(self.basis.map(|b| b.tau))),
            ("nu_min", num(v.map(|v| v.nu_min))),
            ("log_negativity", num(v.map(|v| v.log_negativity))),
            ("schur_indicator", num(v.map(|v| v.schur_indicator))),
            ("entangled", v.map_or_else(String::new, |v| v.entangled.to_string())),
            ("status", self.status.clone()),
        ]
    }
}

/// Shortest round-tripping representation; `inf` for infinity.
fn fmt_num(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:?}")
    }
}

fn csv_cell(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Write records as CSV with [`CSV_HEADER`], or as `key = value` blocks.
pub fn write_records<W: Write>(out: &mut W, records: &[Record], format: Format) -> Result<()> {
    match format {
        Format::Csv => {
            writeln!(out, "{CSV_HEADER}")?;
            for r in records {
                let cells: Vec<String> = r.fields().iter().map(|(_, v)| csv_cell(v)).collect();
                writeln!(out, "{}", cells.join(","))?;
            }
        }
        Format::Records => {
            for (i, r) in records.iter().enumerate() {
                if i > 0 {
                    writeln!(out)?;
                }
                writeln!(out, "[record]")?;
                for (k, v) in r.fields() {
                    writeln!(out, "{k} = {v}")?;
                }
                if let Some(v) = &r.verdict {
                    let d = &v.diagnostics;
                    writeln!(out, "schur_band = {}", fmt_num(d.schur_band))?;
                    writeln!(out, "vv_condition = {}", fmt_num(d.vv_condition))?;
                    writeln!(out, "min_symplectic = {}", fmt_num(d.min_symplectic))?;
                }
            }
        }
    }
    Ok(())
}

/// One frequency of the SQL-referred spectra table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectraRow {
    pub omega: f64,
    pub force: f64,
    pub sensing: f64,
    pub quantum_vacuum: f64,
    pub quantum_input: f64,
}

/// Displacement-referred spectra over the SQL on a log grid.
///
/// Quantum noise of the phase quadrature is referred to displacement by `Ω_q²/ω_m`.
pub fn spectra_table(
    p: &PlantParams,
    noise: &NoiseModel,
    input: &InputFieldState,
    grid: &[f64],
) -> Result<Vec<SpectraRow>> {
    let sql = SqlReference {
        omega_m: p.omega_m,
        ..SqlReference::default()
    };
    let g2 = p.coupling().powi(2);
    grid.iter()
        .map(|&w| {
            let (force, sensing) = displacement_referred_terms(noise, &sql, w)?;
            let refer = |s: f64| s / g2 * sql.displacement_scale() / sql.sql(w);
            Ok(SpectraRow {
                omega: w,
                force,
                sensing,
                quantum_vacuum: refer(squeezed_quantum_noise_spectrum(p, &InputFieldState::Vacuum, w)?),
                quantum_input: refer(squeezed_quantum_noise_spectrum(p, input, w)?),
            })
        })
        .collect()
}

pub fn write_spectra<W: Write>(out: &mut W, kind: &str, rows: &[SpectraRow]) -> Result<()> {
    writeln!(out, "{SPECTRA_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{kind},{},{},{},{}",
            fmt_num(r.omega),
            fmt_num(r.force),
            fmt_num(r.sensing),
            fmt_num(r.quantum_vacuum),
            fmt_num(r.quantum_input)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::verdict_at;
    use crate::covariance::Engine;
    use crate::entanglement::PptTolerances;

    fn sample() -> Record {
        let p = PlantParams::lossless(1.0, 0.1, 2.0).unwrap();
        let noise = NoiseModel::white(1.0, f64::INFINITY, 1.0).unwrap();
        let basis = TemporalModeBasis::new(4, 0.25).unwrap();
        let s = InputFieldState::Vacuum;
        let v = verdict_at(&p, &noise, &s, &basis, &Engine::Exact, &PptTolerances::default()).unwrap();
        Record::from_verdict("r0", &p, &s, &noise, &basis, &v)
    }

    #[test]
    fn csv_header_and_row_shape() {
        let mut buf = Vec::new();
        write_records(&mut buf, &[sample()], Format::Csv).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "run_id,omega_m,gamma_m,omega_q,eta,squeeze_kind,r,theta,gamma_f,delta,omega_F,omega_S,N,tau,nu_min,log_negativity,schur_indicator,entangled,status"
        );
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 19);
        assert_eq!(row[0], "r0");
        assert_eq!(row[5], "vacuum");
        assert_eq!(row[11], "inf");
        assert_eq!(row[12], "4");
        assert_eq!(row[17], "true");
        assert_eq!(row[18], "ok");
        let nu: f64 = row[14].parse().unwrap();
        assert!(nu < 1.0);
    }

    #[test]
    fn records_format_has_one_block_per_record() {
        let mut buf = Vec::new();
        write_records(&mut buf, &[sample(), sample()], Format::Records).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.matches("[record]").count(), 2);
        assert!(text.contains("squeeze_kind = vacuum"));
    }

    #[test]
    fn cells_with_commas_are_quoted() {
        assert_eq!(csv_cell("error: a, b"), "\"error: a, b\"");
        assert_eq!(csv_cell("ok"), "ok");
    }

    #[test]
    fn vacuum_quantum_noise_touches_sql_at_interaction_strength() {
        // Free-mass limit: (Ω_q²/Ω² + Ω²/Ω_q²)/2, minimal and equal to 1 at Ω = Ω_q.
        let p = PlantParams::lossless(1.0, 1e-6, 100.0).unwrap();
        let noise = NoiseModel::white(10.0, 1000.0, 1.0).unwrap();
        let rows = spectra_table(&p, &noise, &InputFieldState::Vacuum, &[50.0, 100.0, 200.0]).unwrap();
        assert!((rows[1].quantum_vacuum - 1.0).abs() < 1e-3);
        for r in [rows[0], rows[2]] {
            let x = r.omega / 100.0;
            let want = (1.0 / (x * x) + x * x) / 2.0;
            assert!((r.quantum_vacuum / want - 1.0).abs() < 1e-3);
        }
        assert!((rows[1].force - 0.01).abs() < 1e-12);
    }
}
