//! Dense two-phase primal simplex for small linear programs.
//!
//! Solves
//!
//! ```text
//! minimize c·x  subject to  A_eq x = b_eq,  A_ub x <= b_ub,  lb <= x <= ub
//! ```
//!
//! Variables are shifted (or mirrored, or split when free) onto `[0, u]`, and
//! upper bounds are handled implicitly by the bounded-variable ratio test, so
//! boxes do not add rows. Entering columns follow Dantzig's rule; after a run
//! of degenerate pivots the solver switches to Bland's rule for the rest of
//! the phase, which rules out cycling. Ties are broken by lowest index, so the
//! pivot path depends only on the input.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-11;
const OPTIMALITY_TOL: f64 = 1e-9;
const FEASIBILITY_TOL: f64 = 1e-8;
const DEGENERATE_BUDGET: usize = 50;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub c: Vec<f64>,
    pub a_eq: Vec<Vec<f64>>,
    pub b_eq: Vec<f64>,
    pub a_ub: Vec<Vec<f64>>,
    pub b_ub: Vec<f64>,
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
}

impl LinearProgram {
    /// An objective over `n` variables in `[0, +inf)` with no constraints yet.
    pub fn new(c: Vec<f64>) -> Self {
        let n = c.len();
        Self {
            c,
            lb: vec![0.0; n],
            ub: vec![f64::INFINITY; n],
            ..Self::default()
        }
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn add_ub(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.a_ub.push(row);
        self.b_ub.push(rhs);
        self
    }

    pub fn add_eq(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.a_eq.push(row);
        self.b_eq.push(rhs);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.c.len();
        if self.lb.len() != n || self.ub.len() != n {
            return Err(Error::domain(format!(
                "bounds have lengths {}/{} for {n} variables",
                self.lb.len(),
                self.ub.len()
            )));
        }
        if self.a_eq.len() != self.b_eq.len() || self.a_ub.len() != self.b_ub.len() {
            return Err(Error::domain("constraint matrix and right-hand side row counts differ"));
        }
        for (i, row) in self.a_eq.iter().chain(&self.a_ub).enumerate() {
            if row.len() != n {
                return Err(Error::domain(format!("constraint row {i} has {} entries, expected {n}", row.len())));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::domain(format!("constraint row {i} has a non-finite entry")));
            }
        }
        if self.c.iter().chain(&self.b_eq).chain(&self.b_ub).any(|v| !v.is_finite()) {
            return Err(Error::domain("objective and right-hand sides must be finite"));
        }
        for j in 0..n {
            let (l, u) = (self.lb[j], self.ub[j]);
            if l.is_nan() || u.is_nan() || l == f64::INFINITY || u == f64::NEG_INFINITY || l > u {
                return Err(Error::domain(format!("invalid bounds [{l}, {u}] on variable {j}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal point; meaningful only when optimal.
    pub x: Vec<f64>,
    pub objective: f64,
    /// Objective sensitivity to each `b_eq` entry (optimal only).
    pub duals_eq: Vec<f64>,
    /// Objective sensitivity to each `b_ub` entry, always `<= 0` (optimal only).
    pub duals_ub: Vec<f64>,
    /// Simplex iterations over both phases, bound flips included.
    pub iterations: usize,
}

/// Image of one original variable in the internal non-negative variables.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// x = offset + y
    Shift { col: usize, offset: f64 },
    /// x = offset − y
    Mirror { col: usize, offset: f64 },
    /// x = y⁺ − y⁻
    Split { pos: usize, neg: usize },
}

struct Tableau {
    m: usize,
    n: usize,
    /// B⁻¹A, row-major.
    t: Vec<f64>,
    /// Normalized constraint matrix, kept to refresh basic values.
    a: Vec<f64>,
    rhs: Vec<f64>,
    upper: Vec<f64>,
    at_upper: Vec<bool>,
    barred: Vec<bool>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    beta: Vec<f64>,
    /// Column holding B⁻¹'s k-th column, i.e. the initial identity column of row k.
    identity_col: Vec<usize>,
    iterations: usize,
}

enum PhaseOutcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.n + j]
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        if self.at_upper[j] {
            self.upper[j]
        } else {
            0.0
        }
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.t[i * self.n..(i + 1) * self.n];
                for (dj, &tij) in d.iter_mut().zip(row) {
                    *dj -= cb * tij;
                }
            }
        }
        for i in 0..self.m {
            d[self.basis[i]] = 0.0;
        }
        d
    }

    /// Recomputes basic values as B⁻¹(rhs − Σ A_j·u_j over nonbasic columns at upper).
    fn refresh_beta(&mut self) {
        let mut b = self.rhs.clone();
        for j in 0..self.n {
            if !self.is_basic[j] && self.at_upper[j] && self.upper[j] != 0.0 {
                for (k, bk) in b.iter_mut().enumerate() {
                    *bk -= self.a[k * self.n + j] * self.upper[j];
                }
            }
        }
        for i in 0..self.m {
            let mut v = 0.0;
            for (k, bk) in b.iter().enumerate() {
                v += self.at(i, self.identity_col[k]) * bk;
            }
            self.beta[i] = v;
        }
    }

    fn pivot(&mut self, r: usize, q: usize, d: &mut [f64]) {
        let n = self.n;
        let inv = 1.0 / self.t[r * n + q];
        for v in &mut self.t[r * n..(r + 1) * n] {
            *v *= inv;
        }
        let (before, rest) = self.t.split_at_mut(r * n);
        let (prow, after) = rest.split_at_mut(n);
        for row in before.chunks_exact_mut(n).chain(after.chunks_exact_mut(n)) {
            let f = row[q];
            if f != 0.0 {
                for (x, &p) in row.iter_mut().zip(prow.iter()) {
                    *x -= f * p;
                }
                row[q] = 0.0;
            }
        }
        let f = d[q];
        if f != 0.0 {
            for (x, &p) in d.iter_mut().zip(prow.iter()) {
                *x -= f * p;
            }
            d[q] = 0.0;
        }
    }

    fn run_phase(&mut self, cost: &[f64], opt_tol: f64, max_iter: usize) -> Result<PhaseOutcome> {
        let mut d = self.reduced_costs(cost);
        let mut bland = false;
        let mut degenerate = 0usize;
        let mut col = vec![0.0; self.m];
        loop {
            // entering column
            let mut q = usize::MAX;
            let mut best = 0.0;
            for j in 0..self.n {
                if self.is_basic[j] || self.barred[j] {
                    continue;
                }
                let gain = if self.at_upper[j] { d[j] } else { -d[j] };
                if gain > opt_tol {
                    if bland {
                        q = j;
                        break;
                    }
                    if gain > best {
                        best = gain;
                        q = j;
                    }
                }
            }
            if q == usize::MAX {
                return Ok(PhaseOutcome::Optimal);
            }
            if self.iterations >= max_iter {
                return Err(Error::Solver(format!("simplex iteration limit ({max_iter}) reached")));
            }
            self.iterations += 1;

            let dir = if self.at_upper[q] { -1.0 } else { 1.0 };
            for (i, c) in col.iter_mut().enumerate() {
                *c = self.at(i, q);
            }

            // ratio test
            let mut theta = self.upper[q];
            let mut leave: Option<(usize, bool)> = None;
            let mut leave_mag = 0.0;
            for i in 0..self.m {
                let delta = dir * col[i];
                let bvar = self.basis[i];
                let (limit, to_upper) = if delta > PIVOT_TOL {
                    ((self.beta[i]).max(0.0) / delta, false)
                } else if delta < -PIVOT_TOL && self.upper[bvar].is_finite() {
                    ((self.upper[bvar] - self.beta[i]).max(0.0) / -delta, true)
                } else {
                    continue;
                };
                let tol = 1e-12 * (1.0 + limit);
                let better = if limit < theta - tol {
                    true
                } else if let Some((li, _)) = leave {
                    // tie between rows
                    (limit - theta).abs() <= tol
                        && if bland {
                            bvar < self.basis[li]
                        } else {
                            delta.abs() > leave_mag
                        }
                } else {
                    // ties with the entering bound flip keep the flip
                    false
                };
                if better {
                    theta = limit;
                    leave = Some((i, to_upper));
                    leave_mag = delta.abs();
                }
            }
            if theta.is_infinite() {
                return Ok(PhaseOutcome::Unbounded);
            }

            if theta <= 1e-12 {
                degenerate += 1;
                if degenerate > DEGENERATE_BUDGET {
                    bland = true;
                }
            } else {
                degenerate = 0;
            }

            for i in 0..self.m {
                self.beta[i] -= theta * dir * col[i];
            }
            match leave {
                None => {
                    // bound flip
                    self.at_upper[q] = !self.at_upper[q];
                }
                Some((r, to_upper)) => {
                    let entering_value = self.nonbasic_value(q) + dir * theta;
                    let out = self.basis[r];
                    self.is_basic[out] = false;
                    self.at_upper[out] = to_upper;
                    self.is_basic[q] = true;
                    self.at_upper[q] = false;
                    self.basis[r] = q;
                    self.beta[r] = entering_value;
                    self.pivot(r, q, &mut d);
                }
            }
        }
    }
}

/// Solves a linear program with the two-phase bounded primal simplex.
pub fn solve_lp(p: &LinearProgram) -> Result<LpSolution> {
    p.validate()?;
    let n_orig = p.c.len();

    // variable substitution
    let mut maps = Vec::with_capacity(n_orig);
    let mut ny = 0usize;
    let mut y_upper = Vec::new();
    for j in 0..n_orig {
        let (l, u) = (p.lb[j], p.ub[j]);
        if l.is_finite() {
            maps.push(VarMap::Shift { col: ny, offset: l });
            y_upper.push(u - l);
            ny += 1;
        } else if u.is_finite() {
            maps.push(VarMap::Mirror { col: ny, offset: u });
            y_upper.push(f64::INFINITY);
            ny += 1;
        } else {
            maps.push(VarMap::Split { pos: ny, neg: ny + 1 });
            y_upper.extend([f64::INFINITY, f64::INFINITY]);
            ny += 2;
        }
    }

    let m_ub = p.a_ub.len();
    let m_eq = p.a_eq.len();
    let m = m_ub + m_eq;

    // rows in internal variables, before normalization
    let mut rows = vec![vec![0.0; ny]; m];
    let mut rhs = vec![0.0; m];
    for (k, (row, &b)) in p.a_ub.iter().zip(&p.b_ub).chain(p.a_eq.iter().zip(&p.b_eq)).enumerate() {
        let mut r = b;
        for (j, &a) in row.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            match maps[j] {
                VarMap::Shift { col, offset } => {
                    rows[k][col] += a;
                    r -= a * offset;
                }
                VarMap::Mirror { col, offset } => {
                    rows[k][col] -= a;
                    r -= a * offset;
                }
                VarMap::Split { pos, neg } => {
                    rows[k][pos] += a;
                    rows[k][neg] -= a;
                }
            }
        }
        rhs[k] = r;
    }
    let sign: Vec<f64> = rhs.iter().map(|&r| if r < 0.0 { -1.0 } else { 1.0 }).collect();
    let needs_artificial: Vec<bool> = (0..m).map(|k| k >= m_ub || sign[k] < 0.0).collect();
    let n_art = needs_artificial.iter().filter(|&&b| b).count();
    let n = ny + m_ub + n_art;

    let mut a = vec![0.0; m * n];
    let mut upper = y_upper;
    upper.extend(std::iter::repeat_n(f64::INFINITY, m_ub + n_art));
    let mut identity_col = vec![0usize; m];
    let mut art_col = ny + m_ub;
    let mut phase1_cost = vec![0.0; n];
    for k in 0..m {
        let s = sign[k];
        for j in 0..ny {
            a[k * n + j] = s * rows[k][j];
        }
        if k < m_ub {
            a[k * n + ny + k] = s;
        }
        if needs_artificial[k] {
            a[k * n + art_col] = 1.0;
            identity_col[k] = art_col;
            phase1_cost[art_col] = 1.0;
            art_col += 1;
        } else {
            identity_col[k] = ny + k;
        }
        rhs[k] *= s;
    }

    let mut is_basic = vec![false; n];
    for &c in &identity_col {
        is_basic[c] = true;
    }
    let mut barred = vec![false; n];
    let mut tab = Tableau {
        m,
        n,
        t: a.clone(),
        a,
        rhs: rhs.clone(),
        upper,
        at_upper: vec![false; n],
        barred: barred.clone(),
        basis: identity_col.clone(),
        is_basic,
        beta: rhs.clone(),
        identity_col,
        iterations: 0,
    };
    let max_iter = 200 * (m + n + 10);
    let b_scale = 1.0 + rhs.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));

    if n_art > 0 {
        match tab.run_phase(&phase1_cost, OPTIMALITY_TOL, max_iter)? {
            PhaseOutcome::Optimal => {}
            PhaseOutcome::Unbounded => return Err(Error::Solver("phase one reported an unbounded ray".into())),
        }
        tab.refresh_beta();
        let infeasibility: f64 = (0..m)
            .filter(|&i| phase1_cost[tab.basis[i]] > 0.0)
            .map(|i| tab.beta[i].max(0.0))
            .sum();
        if infeasibility > FEASIBILITY_TOL * b_scale {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                x: vec![f64::NAN; n_orig],
                objective: f64::NAN,
                duals_eq: Vec::new(),
                duals_ub: Vec::new(),
                iterations: tab.iterations,
            });
        }
        // artificials are pinned at zero from now on
        for j in ny + m_ub..n {
            tab.upper[j] = 0.0;
            tab.at_upper[j] = false;
            barred[j] = true;
        }
        tab.barred = barred;
    }

    let mut cost = vec![0.0; n];
    for (j, map) in maps.iter().enumerate() {
        match *map {
            VarMap::Shift { col, .. } => cost[col] += p.c[j],
            VarMap::Mirror { col, .. } => cost[col] -= p.c[j],
            VarMap::Split { pos, neg } => {
                cost[pos] += p.c[j];
                cost[neg] -= p.c[j];
            }
        }
    }
    let c_scale = p.c.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let opt_tol = OPTIMALITY_TOL * if c_scale > 0.0 { c_scale } else { 1.0 };
    let outcome = tab.run_phase(&cost, opt_tol, max_iter)?;
    if let PhaseOutcome::Unbounded = outcome {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            x: vec![f64::NAN; n_orig],
            objective: f64::NEG_INFINITY,
            duals_eq: Vec::new(),
            duals_ub: Vec::new(),
            iterations: tab.iterations,
        });
    }
    tab.refresh_beta();

    let mut y = vec![0.0; n];
    for j in 0..n {
        if !tab.is_basic[j] {
            y[j] = tab.nonbasic_value(j);
        }
    }
    for i in 0..m {
        let upper = tab.upper[tab.basis[i]];
        y[tab.basis[i]] = tab.beta[i].max(0.0).min(upper);
    }
    let x: Vec<f64> = maps
        .iter()
        .enumerate()
        .map(|(j, map)| {
            let v = match *map {
                VarMap::Shift { col, offset } => offset + y[col],
                VarMap::Mirror { col, offset } => offset - y[col],
                VarMap::Split { pos, neg } => y[pos] - y[neg],
            };
            v.clamp(p.lb[j], p.ub[j])
        })
        .collect();
    let objective = p.c.iter().zip(&x).map(|(c, x)| c * x).sum();

    // π_k = −d(identity column k); undo the row normalization
    let d = tab.reduced_costs(&cost);
    let duals: Vec<f64> = (0..m).map(|k| -d[tab.identity_col[k]] * sign[k]).collect();

    Ok(LpSolution {
        status: LpStatus::Optimal,
        x,
        objective,
        duals_ub: duals[..m_ub].to_vec(),
        duals_eq: duals[m_ub..].to_vec(),
        iterations: tab.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lower_bound_is_optimal() {
        let mut p = LinearProgram::new(vec![1.0]);
        p.lb[0] = 3.0;
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.x[0] - 3.0).abs() < 1e-12 && (s.objective - 3.0).abs() < 1e-12);
    }

    #[test]
    fn simplex_face_returns_a_vertex() {
        let mut p = LinearProgram::new(vec![-1.0, -1.0]);
        p.add_ub(vec![1.0, 1.0], 1.0);
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective + 1.0).abs() < 1e-12);
        let is_vertex = |x: &[f64]| {
            ((x[0] - 1.0).abs() < 1e-12 && x[1].abs() < 1e-12) || (x[0].abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12)
        };
        assert!(is_vertex(&s.x), "{:?}", s.x);
        assert!((s.duals_ub[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let mut p = LinearProgram::new(vec![0.0]);
        p.add_ub(vec![1.0], -1.0);
        assert_eq!(solve_lp(&p).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_ray_is_detected() {
        let mut p = LinearProgram::new(vec![-1.0, 0.0]);
        p.add_ub(vec![1.0, -1.0], 1.0);
        assert_eq!(solve_lp(&p).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn free_and_mirrored_variables() {
        // min x0 - x1, x0 free with x0 >= x1 - 2, x1 <= 4 (no lower bound)
        let mut p = LinearProgram::new(vec![1.0, -1.0]);
        p.lb = vec![f64::NEG_INFINITY, f64::NEG_INFINITY];
        p.ub = vec![f64::INFINITY, 4.0];
        p.add_ub(vec![-1.0, 1.0], 2.0);
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective + 2.0).abs() < 1e-12, "{s:?}");
    }

    #[test]
    fn equality_constraints_and_duals() {
        // min 2x + 3y  s.t. x + y = 4, x <= 3
        let mut p = LinearProgram::new(vec![2.0, 3.0]);
        p.ub = vec![3.0, f64::INFINITY];
        p.add_eq(vec![1.0, 1.0], 4.0);
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.x[0] - 3.0).abs() < 1e-12 && (s.x[1] - 1.0).abs() < 1e-12);
        assert!((s.objective - 9.0).abs() < 1e-12);
        assert!((s.duals_eq[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn boxed_variables_flip_without_rows() {
        let mut p = LinearProgram::new(vec![-1.0, -2.0, 1.0]);
        p.lb = vec![-1.0, 0.0, 2.0];
        p.ub = vec![1.0, 3.0, 5.0];
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.x, vec![1.0, 3.0, 2.0]);
    }

    #[test]
    fn dimension_mismatch_is_a_domain_error() {
        let mut p = LinearProgram::new(vec![1.0, 1.0]);
        p.add_ub(vec![1.0], 1.0);
        assert!(matches!(solve_lp(&p), Err(Error::Domain(_))));
        let mut p = LinearProgram::new(vec![1.0]);
        p.lb[0] = 2.0;
        p.ub[0] = 1.0;
        assert!(solve_lp(&p).is_err());
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Beale's classic cycling example under Dantzig's rule.
        let mut p = LinearProgram::new(vec![-0.75, 150.0, -0.02, 6.0]);
        p.add_ub(vec![0.25, -60.0, -0.04, 9.0], 0.0);
        p.add_ub(vec![0.5, -90.0, -0.02, 3.0], 0.0);
        p.add_ub(vec![0.0, 0.0, 1.0, 0.0], 1.0);
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective + 0.05).abs() < 1e-9, "{}", s.objective);
    }
}
