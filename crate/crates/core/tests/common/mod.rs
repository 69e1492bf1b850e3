#![allow(dead_code)]

use std::path::PathBuf;

use rand::Rng;
use sugeno::capacity::SubsetMask;
use sugeno::lp::LinearProgram;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

/// Random bounded LP with `n` variables and `rows` inequality rows. Bounds
/// are drawn from a small integer grid so degenerate vertices are common.
/// Most rows are built to hold at an integer point inside the bounds, so
/// most programs are feasible.
pub fn random_lp<R: Rng>(rng: &mut R, n: usize, rows: usize) -> LinearProgram {
    let mut lp = LinearProgram::new();
    let mut anchor = Vec::with_capacity(n);
    let vars: Vec<_> = (0..n)
        .map(|i| {
            let lo = rng.gen_range(-3..=1);
            let hi = lo + rng.gen_range(0..=4);
            anchor.push(f64::from(rng.gen_range(lo..=hi)));
            lp.add_var(format!("x{i}"), f64::from(lo), f64::from(hi)).unwrap()
        })
        .collect();
    for &v in &vars {
        lp.add_objective(v, f64::from(rng.gen_range(-5..=5)));
    }
    for _ in 0..rows {
        let mut coeffs = Vec::new();
        for &v in &vars {
            if rng.gen_bool(0.7) {
                coeffs.push((v, f64::from(rng.gen_range(-4..=4))));
            }
        }
        let at_anchor: f64 = coeffs.iter().map(|&(v, a): &(sugeno::lp::VarId, f64)| a * anchor[v.0]).sum();
        let le = rng.gen_bool(0.5);
        let rhs = if rng.gen_bool(0.85) {
            let gap = f64::from(rng.gen_range(0..=3));
            if le { at_anchor + gap } else { at_anchor - gap }
        } else {
            f64::from(rng.gen_range(-6..=6))
        };
        if le {
            lp.add_le(coeffs, rhs);
        } else {
            lp.add_ge(coeffs, rhs);
        }
    }
    lp
}

/// Solves `a x = b` for square `a` by Gaussian elimination with partial
/// pivoting; `None` when singular.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-9 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..n {
                        a[r][c] -= f * a[col][c];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Minimum objective over all vertices of the polytope, found by making
/// every `n`-subset of the constraints (rows and bounds) tight. `None` means
/// infeasible.
pub fn vertex_enumeration(lp: &LinearProgram) -> Option<f64> {
    let n = lp.num_vars();
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for c in lp.constraints() {
        let mut a = vec![0.0; n];
        for &(v, w) in &c.coeffs {
            a[v.0] += w;
        }
        planes.push((a, c.rhs));
    }
    for (i, v) in lp.vars().iter().enumerate() {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        planes.push((e.clone(), v.upper));
        e[i] = -1.0;
        planes.push((e, -v.lower));
    }
    if n == 0 {
        return planes.iter().all(|(_, b)| *b >= -1e-9).then_some(0.0);
    }
    assert!(planes.len() <= 32);
    let costs = lp.cost_vector();
    let mut best: Option<f64> = None;
    for pick in SubsetMask::full(planes.len()).subsets_of_size(n) {
        let idx: Vec<usize> = pick.indices().collect();
        let a = idx.iter().map(|&i| planes[i].0.clone()).collect();
        let b = idx.iter().map(|&i| planes[i].1).collect();
        let Some(x) = solve_square(a, b) else { continue };
        let feasible = planes
            .iter()
            .all(|(a, b)| a.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() <= b + 1e-7);
        if feasible {
            let obj: f64 = costs.iter().zip(&x).map(|(c, v)| c * v).sum();
            best = Some(best.map_or(obj, |o: f64| o.min(obj)));
        }
    }
    best
}
