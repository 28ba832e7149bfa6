//! Linearized contact wrench cones, as rows `A w + b ≥ 0` over the local wrench.
//!
//! Plane wrench layout is `(τx, τy, τz, fx, fy, fz)` about the contact frame
//! origin, point force layout is `(fx, fy, fz)`; both in the surface frame.
//! The plane cone is the rectangle-with-Coulomb-pyramid construction:
//! normal bounds, friction pyramid, CoP box and eight torsional rows.

use nalgebra::{DMatrix, DVector};

use super::{Contact, ContactError, ContactKind, ContactSpec};
use crate::retarget::ConstraintLabel;

pub const CONE_ROWS_PLANE: usize = 18;
pub const CONE_ROWS_POINT: usize = 6;

/// Inequality rows over a contact wrench with one label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeRows {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub labels: Vec<ConstraintLabel>,
}

impl ConeRows {
    /// Row values `A w + b`.
    pub fn evaluate(&self, wrench: &[f64]) -> DVector<f64> {
        &self.a * DVector::from_column_slice(wrench) + &self.b
    }
}

/// Cone rows for `spec` with the normal-force floor `min_normal`.
pub fn contact_rows(spec: &ContactSpec, min_normal: f64) -> ConeRows {
    let mu = spec.friction;
    let mut rows: Vec<(Vec<f64>, f64, ConstraintLabel)> = Vec::with_capacity(CONE_ROWS_PLANE);
    match spec.kind {
        ContactKind::Point => {
            // (fx, fy, fz)
            rows.push((vec![0.0, 0.0, 1.0], -min_normal, ConstraintLabel::NormalMin));
            rows.push((vec![0.0, 0.0, -1.0], spec.max_normal, ConstraintLabel::NormalMax));
            for s in [1.0, -1.0] {
                rows.push((vec![-s, 0.0, mu], 0.0, ConstraintLabel::Friction));
            }
            for s in [1.0, -1.0] {
                rows.push((vec![0.0, -s, mu], 0.0, ConstraintLabel::Friction));
            }
        }
        ContactKind::Plane => {
            let (lx, ly) = (spec.half_length_x, spec.half_length_y);
            // (τx, τy, τz, fx, fy, fz)
            rows.push((vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0], -min_normal, ConstraintLabel::NormalMin));
            rows.push((vec![0.0, 0.0, 0.0, 0.0, 0.0, -1.0], spec.max_normal, ConstraintLabel::NormalMax));
            for s in [1.0, -1.0] {
                rows.push((vec![0.0, 0.0, 0.0, -s, 0.0, mu], 0.0, ConstraintLabel::Friction));
            }
            for s in [1.0, -1.0] {
                rows.push((vec![0.0, 0.0, 0.0, 0.0, -s, mu], 0.0, ConstraintLabel::Friction));
            }
            // |τx| ≤ ly fz, |τy| ≤ lx fz
            for s in [1.0, -1.0] {
                rows.push((vec![-s, 0.0, 0.0, 0.0, 0.0, ly], 0.0, ConstraintLabel::Cop));
            }
            for s in [1.0, -1.0] {
                rows.push((vec![0.0, -s, 0.0, 0.0, 0.0, lx], 0.0, ConstraintLabel::Cop));
            }
            // τz ≤ μ(lx+ly)fz − |ly fx + μτx| − |lx fy + μτy|
            // τz ≥ −μ(lx+ly)fz + |ly fx − μτx| + |lx fy − μτy|
            let m = mu * (lx + ly);
            for s1 in [1.0, -1.0] {
                for s2 in [1.0, -1.0] {
                    rows.push((
                        vec![-s1 * mu, -s2 * mu, -1.0, -s1 * ly, -s2 * lx, m],
                        0.0,
                        ConstraintLabel::Yaw,
                    ));
                }
            }
            for s1 in [1.0, -1.0] {
                for s2 in [1.0, -1.0] {
                    rows.push((
                        vec![s1 * mu, s2 * mu, 1.0, -s1 * ly, -s2 * lx, m],
                        0.0,
                        ConstraintLabel::Yaw,
                    ));
                }
            }
        }
    }
    let dim = spec.wrench_dim();
    let mut a = DMatrix::zeros(rows.len(), dim);
    let mut b = DVector::zeros(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    for (i, (coeffs, offset, label)) in rows.into_iter().enumerate() {
        for (k, c) in coeffs.into_iter().enumerate() {
            a[(i, k)] = c;
        }
        b[i] = offset;
        labels.push(label);
    }
    ConeRows { a, b, labels }
}

/// Rows over the increment `Δλ_i`: `A Δλ_i + (A λ_i + b) ≥ 0`.
pub fn build_contact_inequalities(contact: &Contact, current: &[f64]) -> Result<ConeRows, ContactError> {
    if !contact.is_active() {
        return Err(ContactError::Disabled(contact.name.clone()));
    }
    let rows = contact_rows(&contact.spec, contact.effective_min_normal());
    let b = rows.evaluate(current);
    Ok(ConeRows { a: rows.a, b, labels: rows.labels })
}
