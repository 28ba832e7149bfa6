use nalgebra::{DMatrix, DVector};

use super::{QpError, QpProblem, QpSolution, QpStatus};

/// Slack below which an inequality counts as violated, per unit row norm.
const VIOLATION_TOL: f64 = 1e-11;
const DEPENDENCE_TOL: f64 = 1e-10;

/// Goldfarb–Idnani dual active-set solver.
///
/// Keeps `J = L⁻ᵀ Q` and the upper-triangular `R` of the active normals
/// `Jᵀ N = [R; 0]`, updated with Givens rotations on every add/drop.
/// Scratch storage is reused between solves on the same instance.
#[derive(Debug, Default, Clone)]
pub struct ActiveSetSolver {
    j: DMatrix<f64>,
    r: DMatrix<f64>,
    d: DVector<f64>,
    z: DVector<f64>,
    rv: DVector<f64>,
}

/// Active constraint ids: equalities are `0..m_eq`, inequality `i` is `m_eq + i`.
struct Active {
    ids: Vec<usize>,
    u: Vec<f64>,
}

impl ActiveSetSolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn solve(&mut self, qp: &QpProblem, max_iterations: usize) -> Result<QpSolution, QpError> {
        qp.validate()?;
        let n = qp.dim();
        let meq = qp.n_eq();
        let mineq = qp.n_ineq();

        let chol = qp.p.clone().cholesky().ok_or(QpError::NotPositiveDefinite)?;
        let l = chol.l();
        // J = L⁻ᵀ
        let lt = l.transpose();
        self.j = lt
            .solve_upper_triangular(&DMatrix::identity(n, n))
            .ok_or(QpError::NotPositiveDefinite)?;
        self.r = DMatrix::zeros(n, n);
        self.d = DVector::zeros(n);
        self.z = DVector::zeros(n);
        self.rv = DVector::zeros(n);
        let mut r_norm = 1.0_f64;

        let mut x = -chol.solve(&qp.r);
        let mut active = Active { ids: Vec::with_capacity(n), u: Vec::with_capacity(n + 1) };
        let mut iterations = 0;

        let normal = |id: usize| -> DVector<f64> {
            if id < meq {
                qp.aeq.row(id).transpose()
            } else {
                qp.aineq.row(id - meq).transpose()
            }
        };
        let offset = |id: usize| if id < meq { qp.beq[id] } else { qp.bineq[id - meq] };
        let row_norms: Vec<f64> = (0..mineq).map(|i| qp.aineq.row(i).norm()).collect();

        // Equalities: always take the full step, never drop.
        for k in 0..meq {
            let np = normal(k);
            self.compute_direction(&np, active.ids.len());
            let s = np.dot(&x) + offset(k);
            let zn = self.z.dot(&np);
            let t = if self.z.norm_squared() > f64::EPSILON * f64::EPSILON && zn.abs() > 0.0 {
                -s / zn
            } else {
                0.0
            };
            x.axpy(t, &self.z, 1.0);
            let iq = active.ids.len();
            for i in 0..iq {
                active.u[i] -= t * self.rv[i];
            }
            active.u.push(t);
            active.ids.push(k);
            if !self.add_constraint(iq, &mut r_norm) {
                // Linearly dependent on the rows already active.
                active.ids.pop();
                active.u.pop();
                let residual = np.dot(&x) + offset(k);
                if residual.abs() > 1e-9 * (1.0 + offset(k).abs() + np.norm() * x.norm()) {
                    return Ok(self.finish(qp, x, &active, QpStatus::Infeasible, iterations));
                }
            }
            iterations += 1;
        }

        let mut excluded = vec![false; mineq];
        let status = 'outer: loop {
            // Pick the most violated inactive inequality (scaled by row norm).
            let mut is_active = vec![false; mineq];
            for &id in &active.ids {
                if id >= meq {
                    is_active[id - meq] = true;
                }
            }
            let mut chosen: Option<(usize, f64)> = None;
            for i in 0..mineq {
                if is_active[i] || excluded[i] {
                    continue;
                }
                let s = qp.aineq.row(i).dot(&x.transpose()) + qp.bineq[i];
                let scaled = if row_norms[i] > 0.0 { s / row_norms[i] } else { s };
                if scaled < -VIOLATION_TOL && chosen.is_none_or(|(_, best)| scaled < best) {
                    chosen = Some((i, scaled));
                }
            }
            let Some((ip, _)) = chosen else {
                break QpStatus::Optimal;
            };
            let id = meq + ip;
            let np = normal(id);
            if row_norms[ip] == 0.0 {
                break QpStatus::Infeasible;
            }
            let saved_x = x.clone();
            let saved_ids = active.ids.clone();
            let saved_u = active.u.clone();
            let saved_j = self.j.clone();
            let saved_r = self.r.clone();
            let saved_norm = r_norm;

            // Multiplier of the candidate sits at position iq.
            active.u.push(0.0);
            loop {
                iterations += 1;
                if iterations > max_iterations {
                    active.u.pop();
                    break 'outer QpStatus::IterationLimit;
                }
                let iq = active.ids.len();
                self.compute_direction(&np, iq);
                let s = np.dot(&x) + offset(id);

                // Dual step bound: largest t keeping active inequality multipliers ≥ 0.
                let mut t1 = f64::INFINITY;
                let mut drop: Option<usize> = None;
                for k in 0..iq {
                    if active.ids[k] < meq {
                        continue;
                    }
                    if self.rv[k] > 0.0 {
                        let ratio = active.u[k] / self.rv[k];
                        if ratio < t1 {
                            t1 = ratio;
                            drop = Some(k);
                        }
                    }
                }
                let zn = self.z.dot(&np);
                let t2 = if self.z.norm_squared() > f64::EPSILON * f64::EPSILON * np.norm_squared() && zn > 0.0 {
                    -s / zn
                } else {
                    f64::INFINITY
                };
                let t = t1.min(t2);
                if !t.is_finite() {
                    active.u.pop();
                    break 'outer QpStatus::Infeasible;
                }

                if t2.is_infinite() {
                    // Pure dual step: shift multipliers, drop the blocking constraint.
                    for k in 0..iq {
                        active.u[k] -= t * self.rv[k];
                    }
                    active.u[iq] += t;
                    self.delete_constraint(&mut active, drop.expect("finite t1 has a blocking index"));
                    continue;
                }

                x.axpy(t, &self.z, 1.0);
                for k in 0..iq {
                    active.u[k] -= t * self.rv[k];
                }
                active.u[iq] += t;

                if t2 <= t1 {
                    active.ids.push(id);
                    if !self.add_constraint(iq, &mut r_norm) {
                        // Degenerate: restore and skip this row for the rest of the solve.
                        x = saved_x;
                        active.ids = saved_ids;
                        active.u = saved_u;
                        self.j = saved_j;
                        self.r = saved_r;
                        r_norm = saved_norm;
                        excluded[ip] = true;
                    }
                    continue 'outer;
                }
                self.delete_constraint(&mut active, drop.expect("partial step has a blocking index"));
            }
        };

        let mut status = status;
        if status == QpStatus::Optimal && excluded.iter().any(|&e| e) {
            // An excluded row that is still violated means the active rows cannot accommodate it.
            let worst = (0..mineq)
                .filter(|&i| excluded[i])
                .map(|i| (qp.aineq.row(i).dot(&x.transpose()) + qp.bineq[i]) / row_norms[i].max(1e-300))
                .fold(f64::INFINITY, f64::min);
            if worst < -1e-9 {
                status = QpStatus::Infeasible;
            }
        }
        Ok(self.finish(qp, x, &active, status, iterations))
    }

    fn finish(&self, qp: &QpProblem, x: DVector<f64>, active: &Active, status: QpStatus, iterations: usize) -> QpSolution {
        let meq = qp.n_eq();
        let mut eq_multipliers = DVector::zeros(meq);
        let mut ineq_multipliers = DVector::zeros(qp.n_ineq());
        let mut act = Vec::new();
        for (k, &id) in active.ids.iter().enumerate() {
            if id < meq {
                eq_multipliers[id] = active.u[k];
            } else {
                ineq_multipliers[id - meq] = active.u[k];
                act.push(id - meq);
            }
        }
        act.sort_unstable();
        QpSolution { x, status, active: act, eq_multipliers, ineq_multipliers, iterations }
    }

    /// `d = Jᵀ n`, primal direction `z = J₂ d₂`, dual direction `r = R⁻¹ d₁`.
    fn compute_direction(&mut self, np: &DVector<f64>, iq: usize) {
        let n = np.len();
        self.d.gemv_tr(1.0, &self.j, np, 0.0);
        self.z.fill(0.0);
        for k in iq..n {
            self.z.axpy(self.d[k], &self.j.column(k), 1.0);
        }
        for i in (0..iq).rev() {
            let mut sum = self.d[i];
            for k in i + 1..iq {
                sum -= self.r[(i, k)] * self.rv[k];
            }
            self.rv[i] = sum / self.r[(i, i)];
        }
    }

    /// Rotate `d` so only its first `iq + 1` entries are nonzero and append it as column `iq` of `R`.
    fn add_constraint(&mut self, iq: usize, r_norm: &mut f64) -> bool {
        let n = self.d.len();
        let d_norm = self.d.norm();
        for jj in (iq + 1..n).rev() {
            let mut cc = self.d[jj - 1];
            let mut ss = self.d[jj];
            let h = cc.hypot(ss);
            if h == 0.0 {
                continue;
            }
            self.d[jj] = 0.0;
            ss /= h;
            cc /= h;
            if cc < 0.0 {
                cc = -cc;
                ss = -ss;
                self.d[jj - 1] = -h;
            } else {
                self.d[jj - 1] = h;
            }
            let xny = ss / (1.0 + cc);
            for k in 0..n {
                let t1 = self.j[(k, jj - 1)];
                let t2 = self.j[(k, jj)];
                let a = t1 * cc + t2 * ss;
                self.j[(k, jj - 1)] = a;
                self.j[(k, jj)] = xny * (t1 + a) - t2;
            }
        }
        if iq >= n {
            return false;
        }
        for i in 0..=iq {
            self.r[(i, iq)] = self.d[i];
        }
        let diag = self.d[iq].abs();
        // Relative test catches rows parallel to the active set up to rounding.
        if diag <= f64::EPSILON * *r_norm || diag <= DEPENDENCE_TOL * d_norm {
            for i in 0..=iq {
                self.r[(i, iq)] = 0.0;
            }
            return false;
        }
        *r_norm = r_norm.max(diag);
        true
    }

    /// Remove active position `pos` (candidate multiplier at `u[iq]` shifts down with it).
    fn delete_constraint(&mut self, active: &mut Active, pos: usize) {
        let n = self.j.nrows();
        let iq = active.ids.len();
        active.ids.remove(pos);
        active.u.remove(pos);
        for c in pos..iq - 1 {
            for i in 0..n {
                self.r[(i, c)] = self.r[(i, c + 1)];
            }
        }
        for i in 0..n {
            self.r[(i, iq - 1)] = 0.0;
        }
        let iq = iq - 1;
        // Restore triangularity of R with rotations acting on rows jj, jj+1.
        for jj in pos..iq {
            let mut cc = self.r[(jj, jj)];
            let mut ss = self.r[(jj + 1, jj)];
            let h = cc.hypot(ss);
            if h == 0.0 {
                continue;
            }
            cc /= h;
            ss /= h;
            self.r[(jj + 1, jj)] = 0.0;
            if cc < 0.0 {
                self.r[(jj, jj)] = -h;
                cc = -cc;
                ss = -ss;
            } else {
                self.r[(jj, jj)] = h;
            }
            let xny = ss / (1.0 + cc);
            for k in jj + 1..iq {
                let t1 = self.r[(jj, k)];
                let t2 = self.r[(jj + 1, k)];
                let a = t1 * cc + t2 * ss;
                self.r[(jj, k)] = a;
                self.r[(jj + 1, k)] = xny * (t1 + a) - t2;
            }
            for k in 0..n {
                let t1 = self.j[(k, jj)];
                let t2 = self.j[(k, jj + 1)];
                let a = t1 * cc + t2 * ss;
                self.j[(k, jj)] = a;
                self.j[(k, jj + 1)] = xny * (a + t1) - t2;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qp::{kkt_residuals, solve_qp};
    use approx::assert_relative_eq;

    #[test]
    fn unconstrained_minimum_norm() {
        let qp = QpProblem::unconstrained(DMatrix::identity(4, 4), DVector::zeros(4));
        let sol = solve_qp(&qp, 100).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_eq!(sol.x, DVector::zeros(4));
    }

    #[test]
    fn clipped_scalar() {
        // min (x−2)² s.t. x ≤ 1  ⇔  ½·2x² − 4x, row −x + 1 ≥ 0.
        let mut qp = QpProblem::unconstrained(DMatrix::from_element(1, 1, 2.0), DVector::from_element(1, -4.0));
        qp.push_inequalities(&DMatrix::from_element(1, 1, -1.0), &DVector::from_element(1, 1.0));
        let sol = solve_qp(&qp, 100).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_relative_eq!(sol.x[0], 1.0, epsilon = 1e-14);
        assert_eq!(sol.active, vec![0]);
        assert_relative_eq!(sol.ineq_multipliers[0], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn equality_and_inequality() {
        // min x² + y² s.t. x + y = 2, x ≥ 1.5
        let mut qp = QpProblem::unconstrained(DMatrix::identity(2, 2) * 2.0, DVector::zeros(2));
        qp.push_equalities(&DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), &DVector::from_element(1, -2.0));
        qp.push_inequalities(&DMatrix::from_row_slice(1, 2, &[1.0, 0.0]), &DVector::from_element(1, -1.5));
        let sol = solve_qp(&qp, 100).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_relative_eq!(sol.x, DVector::from_vec(vec![1.5, 0.5]), epsilon = 1e-12);
        assert!(kkt_residuals(&qp, &sol).certifies(&qp));
    }

    #[test]
    fn inconsistent_bounds_are_infeasible() {
        let mut qp = QpProblem::unconstrained(DMatrix::identity(1, 1), DVector::zeros(1));
        // x ≥ 1 and x ≤ 0
        qp.push_inequalities(&DMatrix::from_column_slice(2, 1, &[1.0, -1.0]), &DVector::from_vec(vec![-1.0, 0.0]));
        assert_eq!(solve_qp(&qp, 100).unwrap().status, QpStatus::Infeasible);
    }

    #[test]
    fn redundant_consistent_equalities_are_tolerated() {
        let mut qp = QpProblem::unconstrained(DMatrix::identity(2, 2), DVector::from_vec(vec![-1.0, -1.0]));
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 2.0, 0.0]);
        qp.push_equalities(&a, &DVector::from_vec(vec![-0.5, -1.0]));
        let sol = solve_qp(&qp, 100).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_relative_eq!(sol.x, DVector::from_vec(vec![0.5, 1.0]), epsilon = 1e-12);
        // Inconsistent copy is detected.
        let mut bad = QpProblem::unconstrained(DMatrix::identity(2, 2), DVector::zeros(2));
        bad.push_equalities(&a, &DVector::from_vec(vec![-0.5, 0.0]));
        assert_eq!(solve_qp(&bad, 100).unwrap().status, QpStatus::Infeasible);
    }

    #[test]
    fn iteration_limit_is_reported() {
        let mut qp = QpProblem::unconstrained(DMatrix::identity(3, 3), DVector::from_vec(vec![-5.0, -5.0, -5.0]));
        qp.push_inequalities(&(-DMatrix::identity(3, 3)), &DVector::from_vec(vec![1.0, 1.0, 1.0]));
        assert_eq!(solve_qp(&qp, 1).unwrap().status, QpStatus::IterationLimit);
        assert_eq!(solve_qp(&qp, 100).unwrap().status, QpStatus::Optimal);
    }

    #[test]
    fn not_positive_definite_is_an_error() {
        let qp = QpProblem::unconstrained(-DMatrix::identity(2, 2), DVector::zeros(2));
        assert_eq!(solve_qp(&qp, 10).unwrap_err(), QpError::NotPositiveDefinite);
    }

    #[test]
    fn repeated_cold_solves_are_bitwise_identical() {
        let mut qp = QpProblem::unconstrained(
            DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]),
            DVector::from_vec(vec![-1.0, 2.0, -3.0]),
        );
        qp.push_inequalities(
            &DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 1.0, -1.0, 0.5, 0.0]),
            &DVector::from_vec(vec![-2.0, 0.3]),
        );
        let mut solver = ActiveSetSolver::new();
        let a = solver.solve(&qp, 100).unwrap();
        let b = solver.solve(&qp, 100).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.x.as_slice(), solve_qp(&qp, 100).unwrap().x.as_slice());
    }
}
