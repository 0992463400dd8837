//! Test oracles shared by the integration and acceptance suites.
#![allow(dead_code, clippy::needless_range_loop)]

use microclimate::lp::{LinearProgram, LpStatus};
use rand::Rng;

/// Random small LP with integer data: at most 6 variables and 10 constraint rows.
pub fn random_lp<R: Rng>(rng: &mut R) -> LinearProgram {
    let n = rng.random_range(1..=6usize);
    let m_eq = rng.random_range(0..=2usize.min(n));
    let m_ub = rng.random_range(0..=(10 - m_eq));
    let coef = |rng: &mut R| rng.random_range(-5i32..=5) as f64;
    let mut p = LinearProgram::new((0..n).map(|_| coef(rng)).collect());
    for _ in 0..m_ub {
        let row = (0..n).map(|_| coef(rng)).collect();
        let rhs = rng.random_range(-4i32..=12) as f64;
        p.add_ub(row, rhs);
    }
    for _ in 0..m_eq {
        let row = (0..n).map(|_| coef(rng)).collect();
        let rhs = rng.random_range(-6i32..=6) as f64;
        p.add_eq(row, rhs);
    }
    for j in 0..n {
        let (lb, ub) = match rng.random_range(0..6) {
            0 => (0.0, f64::INFINITY),
            1 => (f64::NEG_INFINITY, f64::INFINITY),
            2 => (f64::NEG_INFINITY, rng.random_range(-3i32..=5) as f64),
            3 => {
                let l = rng.random_range(-4i32..=2) as f64;
                (l, l + rng.random_range(0i32..=6) as f64)
            }
            4 => (rng.random_range(-4i32..=4) as f64, f64::INFINITY),
            _ => (0.0, rng.random_range(1i32..=8) as f64),
        };
        p.lb[j] = lb;
        p.ub[j] = ub;
    }
    p
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// A face `a·x = b` that can be made active.
struct Face {
    a: Vec<f64>,
    b: f64,
    /// Variable whose bound this is, if any.
    var: Option<usize>,
}

/// Minimum of `c·x` over `{A_eq x = b_eq, A_ub x <= b_ub, lb <= x <= ub}` by
/// enumerating every basic solution. Infinite bounds must have been replaced
/// by finite ones, so the region is a polytope. Returns `None` if empty.
fn enumerate_vertices(c: &[f64], a_eq: &[Vec<f64>], b_eq: &[f64], a_ub: &[Vec<f64>], b_ub: &[f64], lb: &[f64], ub: &[f64]) -> Option<f64> {
    let n = c.len();
    let unit = |j: usize, s: f64| {
        let mut e = vec![0.0; n];
        e[j] = s;
        e
    };
    let mut faces = Vec::new();
    for (row, &b) in a_ub.iter().zip(b_ub) {
        faces.push(Face { a: row.clone(), b, var: None });
    }
    for j in 0..n {
        faces.push(Face { a: unit(j, 1.0), b: lb[j], var: Some(j) });
        if ub[j] > lb[j] {
            faces.push(Face { a: unit(j, 1.0), b: ub[j], var: Some(j) });
        }
    }
    if a_eq.len() > n {
        return None;
    }
    let k = n - a_eq.len();
    let scale = 1.0 + b_ub.iter().chain(b_eq).chain(lb).chain(ub).fold(0.0f64, |m, v| m.max(v.abs()));
    let feasible = |x: &[f64]| {
        let tol = 1e-9 * scale;
        a_eq.iter().zip(b_eq).all(|(r, &b)| (dot(r, x) - b).abs() <= tol)
            && a_ub.iter().zip(b_ub).all(|(r, &b)| dot(r, x) <= b + tol)
            && (0..n).all(|j| x[j] >= lb[j] - tol && x[j] <= ub[j] + tol)
    };

    let mut best: Option<f64> = None;
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    fn recurse(
        start: usize,
        k: usize,
        chosen: &mut Vec<usize>,
        faces: &[Face],
        visit: &mut dyn FnMut(&[usize]),
    ) {
        if chosen.len() == k {
            visit(chosen);
            return;
        }
        for i in start..faces.len() {
            if let Some(v) = faces[i].var {
                if chosen.iter().any(|&c| faces[c].var == Some(v)) {
                    continue;
                }
            }
            chosen.push(i);
            recurse(i + 1, k, chosen, faces, visit);
            chosen.pop();
        }
    }
    let mut visit = |set: &[usize]| {
        let mut rows: Vec<Vec<f64>> = a_eq.to_vec();
        let mut rhs: Vec<f64> = b_eq.to_vec();
        for &i in set {
            rows.push(faces[i].a.clone());
            rhs.push(faces[i].b);
        }
        if let Some(x) = solve_square(rows, rhs) {
            if feasible(&x) {
                let v = dot(c, &x);
                best = Some(best.map_or(v, |b: f64| b.min(v)));
            }
        }
    };
    recurse(0, k, &mut chosen, &faces, &mut visit);
    best
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Status and optimal value by brute-force vertex enumeration.
pub fn vertex_oracle(p: &LinearProgram) -> (LpStatus, f64) {
    const BOX: f64 = 1e6;
    let n = p.c.len();
    let lb: Vec<f64> = p.lb.iter().map(|&l| if l.is_finite() { l } else { -BOX }).collect();
    let ub: Vec<f64> = p.ub.iter().map(|&u| if u.is_finite() { u } else { BOX }).collect();
    let Some(value) = enumerate_vertices(&p.c, &p.a_eq, &p.b_eq, &p.a_ub, &p.b_ub, &lb, &ub) else {
        return (LpStatus::Infeasible, f64::NAN);
    };
    // improving recession direction inside the unit box?
    let ray_lb: Vec<f64> = (0..n).map(|j| if p.lb[j].is_finite() { 0.0 } else { -1.0 }).collect();
    let ray_ub: Vec<f64> = (0..n).map(|j| if p.ub[j].is_finite() { 0.0 } else { 1.0 }).collect();
    let zeros_eq = vec![0.0; p.b_eq.len()];
    let zeros_ub = vec![0.0; p.b_ub.len()];
    let ray = enumerate_vertices(&p.c, &p.a_eq, &zeros_eq, &p.a_ub, &zeros_ub, &ray_lb, &ray_ub).unwrap_or(0.0);
    if ray < -1e-9 {
        (LpStatus::Unbounded, f64::NEG_INFINITY)
    } else {
        (LpStatus::Optimal, value)
    }
}

/// Largest constraint or bound violation of `x`, relative to `1 + ||b||`.
pub fn lp_violation(p: &LinearProgram, x: &[f64]) -> f64 {
    let scale = 1.0 + p.b_eq.iter().chain(&p.b_ub).fold(0.0f64, |m, v| m.max(v.abs()));
    let mut worst = 0.0f64;
    for (r, &b) in p.a_eq.iter().zip(&p.b_eq) {
        worst = worst.max((dot(r, x) - b).abs());
    }
    for (r, &b) in p.a_ub.iter().zip(&p.b_ub) {
        worst = worst.max(dot(r, x) - b);
    }
    for j in 0..x.len() {
        worst = worst.max(p.lb[j] - x[j]).max(x[j] - p.ub[j]);
    }
    worst / scale
}

/// Random plant and constant inputs whose slowest time constant is under a day.
#[derive(Debug, Clone)]
pub struct PlantDraw {
    pub params: microclimate::model::RoomParams,
    pub w: f64,
    pub q: f64,
    pub t_out: f64,
    pub n_oc: f64,
    pub t0: f64,
}

pub fn plant_draw<R: Rng>(rng: &mut R) -> PlantDraw {
    let params = microclimate::model::RoomParams {
        u: rng.random_range(30.0..100.0),
        u_star: rng.random_range(150.0..400.0),
        mc_star: rng.random_range(0.5e6..3e6),
        volume: rng.random_range(100.0..600.0),
        ..Default::default()
    }
    .with_infiltration_per_hour(rng.random_range(0.1..1.0));
    PlantDraw {
        w: rng.random_range(-5000.0..5000.0),
        q: rng.random_range(0.05..0.5),
        t_out: rng.random_range(-25.0..35.0),
        n_oc: rng.random_range(0.0..30.0),
        t0: rng.random_range(10.0..30.0),
        params,
    }
}

/// Equilibrium (T, CO₂ ppm) by bisection on the air heat balance, with the
/// air mass taken straight from the ideal gas law.
pub fn steady_oracle(d: &PlantDraw, c: &microclimate::model::ComfortSpec) -> (f64, f64) {
    let p = &d.params;
    let mass = |t: f64| p.p_atm * p.volume / (p.r_gas * (t + 273.15));
    let balance = |t: f64| {
        p.u * (d.t_out - t) + p.w_oc * d.n_oc + d.w + p.c_p * d.q * (p.t_in - t)
            + p.c_p * mass(t) * p.infiltration * (d.t_out - t)
    };
    let (mut lo, mut hi) = (-200.0, 400.0);
    assert!(balance(lo) > 0.0 && balance(hi) < 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if balance(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    let co2 = c.nu_env + d.n_oc * c.q_co2 / (d.q + mass(t) * p.infiltration);
    (t, co2 * 1e6)
}
