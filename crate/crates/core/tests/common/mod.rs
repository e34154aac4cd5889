//! Independent oracles and random instance generators shared by the
//! integration tests. Nothing here calls into the solver paths it checks.

#![allow(dead_code)]

use aircomp::numerics::{ComplexMatrix, RealMatrix};
use aircomp::waterfill::ModeSet;
use num_complex::Complex64;
use rand::Rng;

/// Relaxed MSE written out term by term.
pub fn brute_objective(deltas: &[f64], lambdas: &[f64], leverages: &[f64], limit: usize, phi_sq: &[f64]) -> f64 {
    let mut total = 0.0;
    for j in 0..deltas.len() {
        let dr = deltas[j] * leverages[j];
        if j < limit {
            total += dr / (1.0 + deltas[j] * lambdas[j] * phi_sq[j]);
        } else {
            total += dr;
        }
    }
    total
}

/// Brute-force minimiser of the relaxed MSE on the power simplex.
///
/// Power fractions `w_j = delta_j p_j / P0` are searched on a grid with
/// `grid` steps per unit, then refined by pairwise exchanges: for every pair
/// of modes the transfer that zeroes the directional derivative is found by
/// bisection. The objective is convex and separable in `w`, so exchanges
/// converge to the global minimum.
pub struct WaterfillOracle {
    pub objective: f64,
    pub phi_sq: Vec<f64>,
}

pub fn waterfill_oracle(modes: &ModeSet, grid: usize) -> WaterfillOracle {
    let deltas = modes.deltas();
    let lambdas = modes.lambdas();
    let leverages = modes.leverages();
    let limit = modes.active_limit();
    let p0 = modes.budget();
    let vars: Vec<usize> = (0..limit).filter(|&j| deltas[j] > 0.0).collect();
    let to_phi = |w: &[f64]| {
        let mut phi = vec![0.0; lambdas.len()];
        for (slot, &j) in vars.iter().enumerate() {
            phi[j] = w[slot] * p0 / deltas[j];
        }
        phi
    };
    let eval = |w: &[f64]| brute_objective(deltas, lambdas, leverages, limit, &to_phi(w));

    // term j as a function of its own power fraction
    let term_slope = |slot: usize, w: f64| {
        let j = vars[slot];
        let a = lambdas[j] * p0;
        let dr = deltas[j] * leverages[j];
        -dr * a / (1.0 + a * w).powi(2)
    };

    let d = vars.len();
    let mut best_w = vec![0.0; d];
    let mut best = f64::INFINITY;
    let mut counts = vec![0usize; d];
    enumerate_simplex(d, 0, grid, &mut counts, &mut |c| {
        let w: Vec<f64> = c.iter().map(|&k| k as f64 / grid as f64).collect();
        let v = eval(&w);
        if v < best {
            best = v;
            best_w = w;
        }
    });

    for _ in 0..400 {
        let mut moved = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                if i == j {
                    continue;
                }
                // move t from j to i, t in [-w_i, w_j]
                let (mut lo, mut hi) = (-best_w[i], best_w[j]);
                let slope = |t: f64| term_slope(i, best_w[i] + t) - term_slope(j, best_w[j] - t);
                if slope(lo) >= 0.0 {
                    hi = lo;
                } else if slope(hi) <= 0.0 {
                    lo = hi;
                } else {
                    for _ in 0..200 {
                        let mid = 0.5 * (lo + hi);
                        if slope(mid) > 0.0 {
                            hi = mid;
                        } else {
                            lo = mid;
                        }
                    }
                }
                let t = 0.5 * (lo + hi);
                best_w[i] += t;
                best_w[j] -= t;
                moved = moved.max(t.abs());
            }
        }
        if moved < 1e-15 {
            break;
        }
    }
    let phi_sq = to_phi(&best_w);
    WaterfillOracle {
        objective: brute_objective(deltas, lambdas, leverages, limit, &phi_sq),
        phi_sq,
    }
}

fn enumerate_simplex(d: usize, idx: usize, left: usize, counts: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    if d == 0 {
        return;
    }
    if idx == d - 1 {
        counts[idx] = left;
        f(counts);
        return;
    }
    for k in 0..=left {
        counts[idx] = k;
        enumerate_simplex(d, idx + 1, left - k, counts, f);
    }
}

/// Theorem-style closed form with every mode up to `limit` active.
pub fn all_active_closed_form(deltas: &[f64], lambdas: &[f64], leverages: &[f64], p0: f64, limit: usize) -> Vec<f64> {
    let num = p0 + (0..limit).map(|l| 1.0 / lambdas[l]).sum::<f64>();
    let den: f64 = (0..limit).map(|l| (deltas[l] * leverages[l] / lambdas[l]).sqrt()).sum();
    (0..limit)
        .map(|j| {
            let dl = deltas[j] * lambdas[j];
            ((dl * leverages[j]).sqrt() * num / den - 1.0) / dl
        })
        .collect()
}

fn sorted_desc(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Random mode set with up to `max_modes` modes on each side.
pub fn random_mode_set(rng: &mut impl Rng, max_modes: usize) -> ModeSet {
    let data_modes = rng.gen_range(1..=max_modes);
    let tx_modes = rng.gen_range(1..=max_modes);
    let rank = rng.gen_range(1..=tx_modes);
    let deltas = sorted_desc((0..data_modes).map(|_| rng.gen_range(0.05..5.0)).collect());
    let mut lambdas = sorted_desc((0..tx_modes).map(|_| 10f64.powf(rng.gen_range(-2.0..2.0))).collect());
    for l in lambdas.iter_mut().skip(rank) {
        *l = 0.0;
    }
    let leverages = (0..data_modes).map(|_| rng.gen_range(0.0..2.0)).collect();
    let budget = 10f64.powf(rng.gen_range(-1.5..1.5));
    ModeSet::new(deltas, lambdas, leverages, budget, rank).expect("generated mode set is valid")
}

pub fn random_complex(rows: usize, cols: usize, rng: &mut impl Rng) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

pub fn random_spd(size: usize, rng: &mut impl Rng) -> RealMatrix {
    let g = RealMatrix::from_fn(size, size, |_, _| rng.gen_range(-1.0..1.0));
    &g * g.transpose() + RealMatrix::identity(size, size).scale(0.2)
}

pub fn random_hpd(size: usize, rng: &mut impl Rng) -> ComplexMatrix {
    let g = random_complex(size, size, rng);
    &g * g.adjoint() + ComplexMatrix::identity(size, size).scale(0.2)
}

/// Random block-diagonal precoder with `K` blocks of `m x n`.
pub fn random_block_precoder(m: usize, n: usize, k: usize, rng: &mut impl Rng) -> ComplexMatrix {
    let mut a = ComplexMatrix::zeros(m * k, n * k);
    for node in 0..k {
        let block = random_complex(m, n, rng);
        a.view_mut((node * m, node * n), (m, n)).copy_from(&block);
    }
    a
}

/// `Tr[A K A^H]` computed entrywise.
pub fn power_of(a: &ComplexMatrix, k: &RealMatrix) -> f64 {
    let mut total = 0.0;
    for row in 0..a.nrows() {
        for i in 0..a.ncols() {
            for j in 0..a.ncols() {
                total += (a[(row, i)] * a[(row, j)].conj()).re * k[(i, j)];
            }
        }
    }
    total
}
