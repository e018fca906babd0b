use std::f64::consts::TAU;
use std::fmt::Write as _;

use crate::beltrami::RationalSpherePoint;
use crate::melnikov::MelnikovProfile;
use crate::solver::StepDiagnostic;
use crate::stability::EnvelopeReport;
use crate::topology::VortexLine;

/// Scientific notation with 17 significant digits; parses back to the same double.
pub fn real17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Comma-separated table with a header row.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        CsvTable { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width");
        self.rows.push(row);
    }

    pub fn push_reals(&mut self, row: &[f64]) {
        self.push(row.iter().map(|&x| real17(x)).collect());
    }

    pub fn to_text(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for row in &self.rows {
            let _ = writeln!(s, "{}", row.join(","));
        }
        s
    }

    /// Column `name` parsed as doubles.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let c = self.header.iter().position(|h| h == name)?;
        self.rows.iter().map(|r| r[c].parse().ok()).collect()
    }
}

/// Parses text produced by [`CsvTable::to_text`]; `None` on ragged rows.
pub fn parse_table(text: &str) -> Option<CsvTable> {
    let mut lines = text.lines();
    let header: Vec<String> = lines.next()?.split(',').map(str::to_string).collect();
    let mut rows = Vec::new();
    for line in lines {
        let row: Vec<String> = line.split(',').map(str::to_string).collect();
        if row.len() != header.len() {
            return None;
        }
        rows.push(row);
    }
    Some(CsvTable { header, rows })
}

pub fn points_table(points: &[RationalSpherePoint]) -> CsvTable {
    let mut t = CsvTable::new(&["k1", "k2", "k3", "N"]);
    for p in points {
        t.push(vec![p.k[0].to_string(), p.k[1].to_string(), p.k[2].to_string(), p.n.to_string()]);
    }
    t
}

pub fn diagnostics_table(steps: &[StepDiagnostic<f64>]) -> CsvTable {
    let mut t = CsvTable::new(&["t", "l2", "h1", "divergence", "dt"]);
    for d in steps {
        t.push_reals(&[d.t, d.l2, d.h1, d.divergence, d.dt]);
    }
    t
}

/// Rows `(t, m, h_m, Q_m, envelope, c_star)`; the envelope is the fitted
/// bound on `√h_m` at that row.
pub fn envelope_table(report: &EnvelopeReport<f64>) -> CsvTable {
    let mut t = CsvTable::new(&["t", "m", "h_m", "Q_m", "envelope", "c_star"]);
    let c = report.c_star;
    let g = c * (c * report.w_norm).exp();
    for row in &report.rows {
        t.push(vec![real17(row.t), row.m.to_string(), real17(row.h), real17(row.q), real17(g * row.base), real17(c)]);
    }
    t
}

/// Line points on the torus and on the universal cover.
pub fn line_table(line: &VortexLine) -> CsvTable {
    let mut t = CsvTable::new(&["tau", "x1", "x2", "x3", "X1", "X2", "X3"]);
    for (tau, p) in line.taus.iter().zip(&line.points) {
        let w = p.map(|x| x.rem_euclid(TAU));
        t.push_reals(&[*tau, w[0], w[1], w[2], p[0], p[1], p[2]]);
    }
    t
}

pub fn melnikov_table(profile: &MelnikovProfile) -> CsvTable {
    let mut t = CsvTable::new(&["xi", "numeric", "closed_form", "abs_difference"]);
    for ((xi, m), c) in profile.xi.iter().zip(&profile.numeric).zip(&profile.closed_form) {
        t.push_reals(&[*xi, *m, *c, (m - c).abs()]);
    }
    t
}
