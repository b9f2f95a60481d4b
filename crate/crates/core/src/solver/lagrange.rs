use crate::problems::{Bilp, Sense};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagrangeOptions {
    pub max_iter: usize,
    /// Stop when the best bound improved by less than `rel_tol` over this many iterations.
    pub window: usize,
    pub rel_tol: f64,
    /// Initial step, scaled per row by the cost magnitude over the squared row norm.
    pub step0: f64,
}

impl Default for LagrangeOptions {
    fn default() -> Self {
        LagrangeOptions { max_iter: 5000, window: 50, rel_tol: 1e-6, step0: 1.0 }
    }
}

/// Outcome of the subgradient method.
#[derive(Debug, Clone, PartialEq)]
pub struct LpState {
    /// Averaged subproblem solutions, a relaxed point in `[lower, upper]`.
    pub x: Vec<f64>,
    /// Multipliers of the dualized rows (each written as `a·x <= b`).
    pub lambda: Vec<f64>,
    /// Step length used in the last iteration.
    pub step: f64,
    pub iterations: usize,
    /// Best Lagrangian value seen, a lower bound on the binary optimum.
    pub dual_bound: f64,
    /// Best-so-far bound after each iteration.
    pub history: Vec<f64>,
}

struct Dualized {
    coefs: Vec<(usize, f64)>,
    rhs: f64,
    norm2: f64,
}

/// Rows `Σ x = 1` over binaries that no other such row touches.
fn one_hot_groups(p: &Bilp) -> (Vec<Vec<usize>>, Vec<bool>) {
    let n = p.num_vars();
    let mut owner = vec![usize::MAX; n];
    let mut candidate = vec![false; p.rows.len()];
    let mut clash = vec![false; n];
    for (r, row) in p.rows.iter().enumerate() {
        let ok = row.sense == Sense::Eq
            && row.rhs == 1.0
            && !row.coefs.is_empty()
            && row.coefs.iter().all(|&(j, a)| a == 1.0 && p.binary[j]);
        if ok {
            candidate[r] = true;
            for &(j, _) in &row.coefs {
                if owner[j] != usize::MAX {
                    clash[j] = true;
                }
                owner[j] = r;
            }
        }
    }
    let mut groups = Vec::new();
    let mut explicit = vec![false; p.rows.len()];
    for (r, row) in p.rows.iter().enumerate() {
        if candidate[r] && row.coefs.iter().all(|&(j, _)| !clash[j]) {
            explicit[r] = true;
            let mut g: Vec<usize> = row.coefs.iter().map(|&(j, _)| j).collect();
            g.sort_unstable();
            g.dedup();
            if g.len() != row.coefs.len() {
                explicit[r] = false;
                continue;
            }
            groups.push(g);
        }
    }
    (groups, explicit)
}

/// Lagrangian relaxation solved by projected subgradient ascent.
///
/// One-hot rows stay explicit and are minimized per group in closed form;
/// every other row is dualized. Steps follow `step0 / sqrt(r)`.
pub fn solve_lp(p: &Bilp, opts: &LagrangeOptions) -> LpState {
    let n = p.num_vars();
    let (groups, explicit) = one_hot_groups(p);
    let mut in_group = vec![false; n];
    for g in &groups {
        for &j in g {
            in_group[j] = true;
        }
    }
    let mut rows = Vec::new();
    for (r, row) in p.rows.iter().enumerate() {
        if explicit[r] {
            continue;
        }
        let signs: &[f64] = match row.sense {
            Sense::Le => &[1.0],
            Sense::Ge => &[-1.0],
            Sense::Eq => &[1.0, -1.0],
        };
        for &s in signs {
            let coefs: Vec<(usize, f64)> = row.coefs.iter().map(|&(j, a)| (j, s * a)).collect();
            let norm2 = coefs.iter().map(|&(_, a)| a * a).sum::<f64>().max(1e-12);
            rows.push(Dualized { coefs, rhs: s * row.rhs, norm2 });
        }
    }

    let mut state = LpState {
        x: p.lower.clone(),
        lambda: vec![0.0; rows.len()],
        step: opts.step0,
        iterations: 0,
        dual_bound: f64::NEG_INFINITY,
        history: Vec::new(),
    };
    if p.cost.iter().all(|&c| c == 0.0) {
        state.dual_bound = p.constant;
        state.history.push(p.constant);
        return state;
    }
    let scale = p.cost.iter().fold(1.0f64, |m, c| m.max(c.abs()));
    let mut reduced = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut avg = vec![0.0; n];
    for r in 1..=opts.max_iter {
        reduced.copy_from_slice(&p.cost);
        for (row, &lam) in rows.iter().zip(&state.lambda) {
            if lam != 0.0 {
                for &(j, a) in &row.coefs {
                    reduced[j] += lam * a;
                }
            }
        }
        let mut value = p.constant - rows.iter().zip(&state.lambda).map(|(row, lam)| lam * row.rhs).sum::<f64>();
        for j in (0..n).filter(|&j| !in_group[j]) {
            x[j] = if reduced[j] < 0.0 { p.upper[j] } else { p.lower[j] };
            value += reduced[j] * x[j];
        }
        for g in &groups {
            let forced = g.iter().copied().find(|&j| p.lower[j] >= 1.0);
            let pick = forced.or_else(|| {
                g.iter()
                    .copied()
                    .filter(|&j| p.upper[j] > 0.0)
                    .fold(None, |best: Option<usize>, j| match best {
                        Some(b) if reduced[b] <= reduced[j] => Some(b),
                        _ => Some(j),
                    })
            });
            for &j in g {
                x[j] = 0.0;
            }
            match pick {
                Some(j) => {
                    x[j] = 1.0;
                    value += reduced[j];
                }
                None => value = f64::INFINITY,
            }
        }
        if value.is_nan() {
            value = f64::NEG_INFINITY;
        }
        state.dual_bound = state.dual_bound.max(value);
        state.history.push(state.dual_bound);
        state.iterations = r;
        for (a, &v) in avg.iter_mut().zip(&x) {
            *a += (v - *a) / r as f64;
        }
        if value == f64::INFINITY {
            break;
        }
        let h = state.history.len();
        if h > opts.window {
            let old = state.history[h - 1 - opts.window];
            if state.dual_bound - old <= opts.rel_tol * state.dual_bound.abs().max(1.0) {
                break;
            }
        }
        state.step = opts.step0 / (r as f64).sqrt();
        for (row, lam) in rows.iter().zip(state.lambda.iter_mut()) {
            let g = row.coefs.iter().map(|&(j, a)| a * x[j]).sum::<f64>() - row.rhs;
            *lam = (*lam + state.step * scale * g / row.norm2).max(0.0);
        }
    }
    state.x = avg;
    state
}
