// Independent reference computations shared by the integration tests and
// the acceptance harness. Nothing here calls into the code under test
// except to read parameters.
#![allow(dead_code)]

use co2cal::models::Network;

/// exp(-gamma * |a - b|^2), computed without the library kernel.
pub fn rbf_matrix(points: &[[f64; 6]], gamma: f64) -> Vec<Vec<f64>> {
    points
        .iter()
        .map(|a| {
            points
                .iter()
                .map(|b| {
                    let d2: f64 = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum();
                    (-gamma * d2).exp()
                })
                .collect()
        })
        .collect()
}

/// ε-SVR dual objective in difference form:
/// ½ βᵀKβ + ε Σ|β| − yᵀβ.
pub fn dual_objective(k: &[Vec<f64>], y: &[f64], epsilon: f64, beta: &[f64]) -> f64 {
    let n = beta.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += beta[i] * k[i][j] * beta[j];
        }
    }
    let l1: f64 = beta.iter().map(|b| b.abs()).sum();
    let lin: f64 = y.iter().zip(beta).map(|(a, b)| a * b).sum();
    0.5 * quad + epsilon * l1 - lin
}

/// Gaussian elimination with partial pivoting. `None` when singular.
pub fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
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

/// Exact minimum of the ε-SVR dual for tiny N by enumerating every face.
///
/// Each coefficient is pinned at −C, 0 or C, or free with a fixed sign. On a
/// face the objective is a quadratic with the sum constraint, so the face
/// minimiser comes from one KKT solve; it is kept only if it lies inside the
/// face. The true optimum lies on some face, so the smallest kept value is
/// the optimum. Cost is 5^N solves.
pub fn brute_force_dual(k: &[Vec<f64>], y: &[f64], c: f64, epsilon: f64) -> (f64, Vec<f64>) {
    let n = y.len();
    assert!(n <= 7, "brute force is exponential");
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut code = vec![0u8; n];
    let total = 5usize.pow(n as u32);
    for mut idx in 0..total {
        for slot in code.iter_mut() {
            *slot = (idx % 5) as u8;
            idx /= 5;
        }
        // 0: at 0, 1: at +C, 2: at -C, 3: free positive, 4: free negative
        let mut beta = vec![0.0; n];
        let mut free = Vec::new();
        for i in 0..n {
            match code[i] {
                1 => beta[i] = c,
                2 => beta[i] = -c,
                3 | 4 => free.push(i),
                _ => {}
            }
        }
        let fixed_sum: f64 = beta.iter().sum();
        if free.is_empty() {
            if fixed_sum.abs() > 1e-12 {
                continue;
            }
        } else {
            let m = free.len();
            let mut a = vec![vec![0.0; m + 1]; m + 1];
            let mut rhs = vec![0.0; m + 1];
            for (r, &i) in free.iter().enumerate() {
                let sign = if code[i] == 3 { 1.0 } else { -1.0 };
                for (cc, &j) in free.iter().enumerate() {
                    a[r][cc] = k[i][j];
                }
                a[r][m] = 1.0;
                let pinned: f64 = (0..n).map(|j| k[i][j] * beta[j]).sum();
                rhs[r] = y[i] - epsilon * sign - pinned;
            }
            for cc in 0..m {
                a[m][cc] = 1.0;
            }
            rhs[m] = -fixed_sum;
            let Some(sol) = solve_linear(a, rhs) else {
                continue;
            };
            let mut inside = true;
            for (r, &i) in free.iter().enumerate() {
                let v = sol[r];
                let ok = if code[i] == 3 { v >= 0.0 && v <= c } else { v <= 0.0 && v >= -c };
                inside &= ok;
                beta[i] = v;
            }
            if !inside {
                continue;
            }
        }
        let f = dual_objective(k, y, epsilon, &beta);
        if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
            best = Some((f, beta));
        }
    }
    best.expect("beta = 0 is always feasible")
}

/// Central finite differences of the batch loss w.r.t. every parameter.
pub fn numeric_gradient(net: &Network, xs: &[f64], ys: &[f64], h: f64) -> Vec<f64> {
    let mut probe = net.clone();
    (0..net.params().len())
        .map(|p| {
            let orig = net.params()[p];
            probe.params_mut()[p] = orig + h;
            let up = probe.loss_and_gradient(xs, ys).0;
            probe.params_mut()[p] = orig - h;
            let down = probe.loss_and_gradient(xs, ys).0;
            probe.params_mut()[p] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// ‖a − b‖ / max(‖a‖, ‖b‖).
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}
