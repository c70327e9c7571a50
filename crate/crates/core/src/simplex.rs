//! Dense two-phase primal simplex over rows `Ax {=, ≤} b`, `x ≥ 0`,
//! `b ≥ 0`.
//!
//! Phase 1 minimizes the sum of artificial variables seeded on equality
//! rows (inequality rows start feasible through their slacks), then drives
//! any zero-level artificials out of the basis, deleting rows that turn out
//! redundant. Phase 2 minimizes the caller's objective from the feasible
//! basis. Bland's smallest-index rule is used throughout, so cycling is
//! impossible in exact arithmetic; a pivot budget guards against numerical
//! stalling and surfaces the recent pivot history when hit.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Relation {
    Eq,
    Le,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpRow {
    pub coeffs: Vec<f64>,
    pub rel: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    /// Entries smaller than this in magnitude are unusable as pivots.
    pub pivot_tol: f64,
    /// Residual infeasibility above this after phase 1 means "infeasible".
    pub feas_tol: f64,
    /// 0 means "choose from the problem size".
    pub max_pivots: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            pivot_tol: 1e-10,
            feas_tol: 1e-9,
            max_pivots: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimplexOutcome {
    Optimal {
        /// Structural variable values.
        x: Vec<f64>,
        objective: f64,
        pivots: usize,
    },
    Infeasible {
        /// Minimal attainable sum of equality violations.
        infeasibility: f64,
    },
}

struct Tableau {
    /// Rows over structural + slack + artificial columns.
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    basis: Vec<usize>,
    /// Column index where artificials begin.
    art_start: usize,
    /// Total column count; kept explicitly because redundant rows are
    /// dropped and the tableau may end up with no rows at all.
    n_cols: usize,
    opts: SimplexOptions,
    pivots: usize,
    max_pivots: usize,
    /// Recent `(pivot_number, entering, leaving)` triples.
    log: Vec<(usize, usize, usize)>,
}

impl Tableau {
    fn n_cols(&self) -> usize {
        self.n_cols
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let piv = self.a[row][col];
        let inv = 1.0 / piv;
        for v in self.a[row].iter_mut() {
            *v *= inv;
        }
        self.b[row] *= inv;
        for r in 0..self.a.len() {
            if r == row {
                continue;
            }
            let factor = self.a[r][col];
            if factor == 0.0 {
                continue;
            }
            for c in 0..self.a[r].len() {
                self.a[r][c] -= factor * self.a[row][c];
            }
            self.a[r][col] = 0.0;
            self.b[r] -= factor * self.b[row];
            if self.b[r] < 0.0 && self.b[r] > -self.opts.feas_tol {
                self.b[r] = 0.0;
            }
        }
        self.log.push((self.pivots, col, self.basis[row]));
        if self.log.len() > 64 {
            self.log.remove(0);
        }
        self.basis[row] = col;
        self.pivots += 1;
    }

    /// Reduced costs for `cost` under the current basis.
    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        for (r, &bv) in self.basis.iter().enumerate() {
            let cb = cost[bv];
            if cb == 0.0 {
                continue;
            }
            for c in 0..d.len() {
                d[c] -= cb * self.a[r][c];
            }
        }
        d
    }

    /// Runs simplex iterations for `cost` over columns where `allowed` holds.
    /// Returns an error only on numerical breakdown.
    fn minimize(&mut self, cost: &[f64], allowed: &dyn Fn(usize) -> bool) -> Result<()> {
        loop {
            if self.pivots > self.max_pivots {
                return Err(Error::DegeneratePivot {
                    message: format!("pivot budget {} exhausted", self.max_pivots),
                    log: std::mem::take(&mut self.log),
                });
            }
            let d = self.reduced_costs(cost);
            // Bland: smallest eligible column index.
            let entering = (0..self.n_cols())
                .find(|c| allowed(*c) && d[*c] < -self.opts.pivot_tol);
            let Some(col) = entering else {
                return Ok(());
            };
            // Ratio test; ties resolved to the smallest basic variable.
            let mut best: Option<(f64, usize, usize)> = None;
            for r in 0..self.a.len() {
                let arc = self.a[r][col];
                if arc <= self.opts.pivot_tol {
                    continue;
                }
                let ratio = self.b[r].max(0.0) / arc;
                let better = match best {
                    None => true,
                    Some((bratio, bvar, _)) => {
                        ratio < bratio - 1e-12
                            || (ratio < bratio + 1e-12 && self.basis[r] < bvar)
                    }
                };
                if better {
                    best = Some((ratio, self.basis[r], r));
                }
            }
            let Some((_, _, row)) = best else {
                return Err(Error::Assertion(format!(
                    "unbounded descent direction on column {col} in a program bounded by construction"
                )));
            };
            self.pivot(row, col);
        }
    }

    fn objective_value(&self, cost: &[f64]) -> f64 {
        self.basis
            .iter()
            .enumerate()
            .map(|(r, &bv)| cost[bv] * self.b[r])
            .sum()
    }
}

/// Solves `min cᵀx` subject to the given rows and `x ≥ 0`.
///
/// Every `rhs` must be nonnegative and every coefficient finite; rows and
/// objective must agree on the variable count.
pub fn solve(objective: &[f64], rows: &[LpRow], opts: SimplexOptions) -> Result<SimplexOutcome> {
    let n = objective.len();
    assert!(
        objective.iter().all(|c| c.is_finite()),
        "objective coefficients must be finite"
    );
    for row in rows {
        assert_eq!(row.coeffs.len(), n, "row width must match the objective");
        assert!(
            row.coeffs.iter().all(|c| c.is_finite()),
            "row coefficients must be finite"
        );
        assert!(
            row.rhs.is_finite() && row.rhs >= 0.0,
            "right-hand sides must be finite and nonnegative"
        );
    }

    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.rel == Relation::Le).count();
    let n_art = m - n_slack;
    let art_start = n + n_slack;
    let n_cols = n + n_slack + n_art;

    let mut a = Vec::with_capacity(m);
    let mut b = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut slack_at = n;
    let mut art_at = art_start;
    for row in rows {
        let mut full = vec![0.0; n_cols];
        full[..n].copy_from_slice(&row.coeffs);
        match row.rel {
            Relation::Le => {
                full[slack_at] = 1.0;
                basis.push(slack_at);
                slack_at += 1;
            }
            Relation::Eq => {
                full[art_at] = 1.0;
                basis.push(art_at);
                art_at += 1;
            }
        }
        a.push(full);
        b.push(row.rhs);
    }

    let max_pivots = if opts.max_pivots > 0 {
        opts.max_pivots
    } else {
        200 + 40 * (m + n)
    };
    let mut t = Tableau {
        a,
        b,
        basis,
        art_start,
        opts,
        pivots: 0,
        max_pivots,
        log: Vec::new(),
    };

    if n_art > 0 {
        let mut phase1 = vec![0.0; n_cols];
        for c in art_start..n_cols {
            phase1[c] = 1.0;
        }
        t.minimize(&phase1, &|_| true)?;
        let infeasibility = t.objective_value(&phase1);
        if infeasibility > t.opts.feas_tol {
            return Ok(SimplexOutcome::Infeasible { infeasibility });
        }
        drive_out_artificials(&mut t)?;
    }

    let mut phase2 = vec![0.0; t.n_cols()];
    phase2[..n].copy_from_slice(objective);
    let art_start = t.art_start;
    t.minimize(&phase2, &|c| c < art_start)?;

    let mut x = vec![0.0; n];
    for (r, &bv) in t.basis.iter().enumerate() {
        if bv < n {
            x[bv] = t.b[r].max(0.0);
        }
    }
    let objective_value = objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(SimplexOutcome::Optimal {
        x,
        objective: objective_value,
        pivots: t.pivots,
    })
}

/// Replaces zero-level basic artificials with structural or slack columns,
/// deleting rows that no remaining column can serve (they were redundant).
fn drive_out_artificials(t: &mut Tableau) -> Result<()> {
    let mut r = 0;
    while r < t.a.len() {
        if t.basis[r] < t.art_start {
            r += 1;
            continue;
        }
        if t.b[r] > t.opts.feas_tol {
            return Err(Error::Assertion(format!(
                "artificial variable still at level {} after a feasible phase 1",
                t.b[r]
            )));
        }
        let col = (0..t.art_start).find(|c| t.a[r][*c].abs() > t.opts.pivot_tol);
        match col {
            Some(c) => t.pivot(r, c),
            None => {
                t.a.remove(r);
                t.b.remove(r);
                t.basis.remove(r);
                continue;
            }
        }
        r += 1;
    }
    Ok(())
}
