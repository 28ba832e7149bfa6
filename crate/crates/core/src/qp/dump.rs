//! Plain-text matrix dump of a [`QpProblem`], for offline debugging.
//!
//! ```text
//! qp <d> <m_eq> <m_ineq>
//! P        (d lines of d numbers)
//! r        (1 line)
//! Aeq      (m_eq lines)
//! beq      (1 line)
//! Aineq    (m_ineq lines)
//! bineq    (1 line)
//! ```
//!
//! Numbers use Rust's shortest round-trip representation, so reading a dump
//! back reproduces the problem bit for bit.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use super::{QpError, QpProblem};

pub fn write_problem(problem: &QpProblem) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "qp {} {} {}", problem.dim(), problem.n_eq(), problem.n_ineq());
    let matrix = |out: &mut String, name: &str, m: &DMatrix<f64>| {
        let _ = writeln!(out, "{name}");
        for i in 0..m.nrows() {
            let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
    };
    let vector = |out: &mut String, name: &str, v: &DVector<f64>| {
        let _ = writeln!(out, "{name}");
        let row: Vec<String> = v.iter().map(|v| format!("{v:?}")).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    };
    matrix(&mut out, "P", &problem.p);
    vector(&mut out, "r", &problem.r);
    matrix(&mut out, "Aeq", &problem.aeq);
    vector(&mut out, "beq", &problem.beq);
    matrix(&mut out, "Aineq", &problem.aineq);
    vector(&mut out, "bineq", &problem.bineq);
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, &'a str), QpError> {
        self.inner
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or(QpError::Dump { line: 0, message: "unexpected end of dump".into() })
    }

    fn header(&mut self, name: &str) -> Result<(), QpError> {
        let (line, text) = self.next()?;
        if text.trim() != name {
            return Err(QpError::Dump { line, message: format!("expected `{name}`, found `{text}`") });
        }
        Ok(())
    }

    fn numbers(&mut self, count: usize) -> Result<Vec<f64>, QpError> {
        let (line, text) = self.next()?;
        let values: Vec<f64> = text
            .split_whitespace()
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| QpError::Dump { line, message: e.to_string() })?;
        if values.len() != count {
            return Err(QpError::Dump { line, message: format!("expected {count} numbers, found {}", values.len()) });
        }
        Ok(values)
    }

    fn matrix(&mut self, name: &str, rows: usize, cols: usize) -> Result<DMatrix<f64>, QpError> {
        self.header(name)?;
        let mut m = DMatrix::zeros(rows, cols);
        for i in 0..rows {
            let values = self.numbers(cols)?;
            for (j, v) in values.into_iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        Ok(m)
    }

    fn vector(&mut self, name: &str, len: usize) -> Result<DVector<f64>, QpError> {
        self.header(name)?;
        Ok(DVector::from_vec(self.numbers(len)?))
    }
}

pub fn read_problem(text: &str) -> Result<QpProblem, QpError> {
    let mut lines = Lines { inner: text.lines().enumerate() };
    let (line, head) = lines.next()?;
    let dims: Vec<usize> = head
        .strip_prefix("qp ")
        .ok_or(QpError::Dump { line, message: "missing `qp` header".into() })?
        .split_whitespace()
        .map(|s| s.parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| QpError::Dump { line, message: e.to_string() })?;
    let [d, meq, mineq] = dims[..] else {
        return Err(QpError::Dump { line, message: "header needs three dimensions".into() });
    };
    let p = lines.matrix("P", d, d)?;
    let r = lines.vector("r", d)?;
    let aeq = lines.matrix("Aeq", meq, d)?;
    let beq = lines.vector("beq", meq)?;
    let aineq = lines.matrix("Aineq", mineq, d)?;
    let bineq = lines.vector("bineq", mineq)?;
    Ok(QpProblem { p, r, aeq, beq, aineq, bineq, constant: 0.0 })
}
