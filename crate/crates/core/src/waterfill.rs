//! Power allocation over the joint eigenmodes of the data covariance and the
//! noise-whitened channel Gram matrix.
//!
//! Mode `j` carries data variance `delta_j`, channel gain `lambda_j` and
//! leverage `R_j` (how much of eigenvector `j` survives the summation `Q`).
//! The relaxed MSE is
//!
//! ```text
//! f(p) = sum_{j<L} delta_j R_j / (1 + delta_j lambda_j p_j) + sum_{j>=L} delta_j R_j
//! ```
//!
//! minimised subject to `sum_j delta_j p_j = P0`, with `p_j = |phi_j|^2`.
//! Stationarity gives `p_j = (sqrt(delta_j lambda_j R_j / mu) - 1)^+ / (delta_j lambda_j)`.

use crate::error::{Error, Result};

/// Inputs of the allocation problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSet {
    deltas: Vec<f64>,
    lambdas: Vec<f64>,
    leverages: Vec<f64>,
    budget: f64,
    active_limit: usize,
}

/// Optimal `|phi_j|^2` and the Lagrange multiplier that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub phi_sq: Vec<f64>,
    pub multiplier: f64,
    pub active_set: Vec<usize>,
}

const ORDER_TOL: f64 = 1e-12;

impl ModeSet {
    /// `deltas` and `leverages` have one entry per data mode (`nK`), `lambdas`
    /// one per transmit mode (`mK`). Only the first `active_limit` modes (at
    /// most `min(nK, mK)`) can carry power.
    pub fn new(
        deltas: Vec<f64>,
        lambdas: Vec<f64>,
        leverages: Vec<f64>,
        budget: f64,
        active_limit: usize,
    ) -> Result<Self> {
        if leverages.len() != deltas.len() {
            return Err(Error::DimensionMismatch {
                context: "mode set leverages",
                expected: deltas.len().to_string(),
                found: leverages.len().to_string(),
            });
        }
        if !(budget > 0.0 && budget.is_finite()) {
            return Err(Error::Validation(format!(
                "power budget must be positive, got {budget}"
            )));
        }
        let all = deltas.iter().chain(&lambdas).chain(&leverages);
        if all.clone().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Validation(
                "mode parameters must be finite and non-negative".into(),
            ));
        }
        for (name, v) in [("deltas", &deltas), ("lambdas", &lambdas)] {
            let scale = v.first().copied().unwrap_or(0.0).max(1.0);
            if v.windows(2).any(|w| w[1] > w[0] + ORDER_TOL * scale) {
                return Err(Error::Validation(format!("{name} must be non-increasing")));
            }
        }
        let rank = active_limit.min(lambdas.len());
        let lambda_scale = lambdas.first().copied().unwrap_or(0.0);
        if lambdas[rank..].iter().any(|&l| l > 1e-10 * lambda_scale.max(1.0)) {
            return Err(Error::Validation(format!(
                "lambdas beyond the first {rank} modes must be zero"
            )));
        }
        // Phi is rectangular diagonal: no more than min(nK, mK) modes exist
        let active_limit = rank.min(deltas.len());
        Ok(Self {
            deltas,
            lambdas,
            leverages,
            budget,
            active_limit,
        })
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn leverages(&self) -> &[f64] {
        &self.leverages
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn active_limit(&self) -> usize {
        self.active_limit
    }

    /// `delta_j * lambda_j * R_j`, the gain of mode `j` in the stationarity condition.
    pub fn gain(&self, j: usize) -> f64 {
        self.deltas[j] * self.lambdas[j] * self.leverages[j]
    }

    /// Modes that can receive power at all.
    pub fn usable_modes(&self) -> Vec<usize> {
        (0..self.active_limit).filter(|&j| self.gain(j) > 0.0).collect()
    }

    /// Transmit power `sum_j delta_j p_j` of an allocation.
    pub fn power(&self, phi_sq: &[f64]) -> f64 {
        phi_sq.iter().zip(&self.deltas).map(|(p, d)| p * d).sum()
    }

    /// Water level `1/sqrt(mu)` that spends the whole budget on `set`.
    fn inverse_sqrt_multiplier(&self, set: &[usize]) -> f64 {
        let num = self.budget + set.iter().map(|&j| 1.0 / self.lambdas[j]).sum::<f64>();
        let den: f64 = set
            .iter()
            .map(|&j| (self.deltas[j] * self.leverages[j] / self.lambdas[j]).sqrt())
            .sum();
        num / den
    }

    fn candidate(&self, j: usize, inv_sqrt_mu: f64) -> f64 {
        let dl = self.deltas[j] * self.lambdas[j];
        ((dl * self.leverages[j]).sqrt() * inv_sqrt_mu - 1.0) / dl
    }
}

/// Minimise the relaxed MSE over `|phi_j|^2` under the total power budget.
///
/// The all-active closed form is tried first. When some modes come out
/// negative they are all dropped at once and the water level recomputed on
/// the survivors; the set only shrinks, so at most one round per mode runs.
pub fn solve(modes: &ModeSet) -> Result<Allocation> {
    let mut active = modes.usable_modes();
    if active.is_empty() {
        return Err(Error::NoUsableMode);
    }

    let cap = active.len();
    for _ in 0..cap {
        let level = modes.inverse_sqrt_multiplier(&active);
        let survivors: Vec<usize> = active
            .iter()
            .copied()
            .filter(|&j| modes.candidate(j, level) >= 0.0)
            .collect();
        if survivors.len() == active.len() {
            let mut phi_sq = vec![0.0; modes.lambdas.len()];
            for &j in &active {
                phi_sq[j] = modes.candidate(j, level);
            }
            active.retain(|&j| phi_sq[j] > 0.0);
            return Ok(Allocation {
                phi_sq,
                multiplier: 1.0 / (level * level),
                active_set: active,
            });
        }
        // the strongest mode always survives: its candidate is non-negative
        // whenever any candidate in the set is
        debug_assert!(!survivors.is_empty());
        active = survivors;
    }
    unreachable!("active set shrinks every round and the strongest mode always survives")
}

/// Relaxed MSE of an allocation (see module docs).
pub fn objective(modes: &ModeSet, phi_sq: &[f64]) -> Result<f64> {
    if phi_sq.len() != modes.lambdas.len() {
        return Err(Error::DimensionMismatch {
            context: "waterfill objective",
            expected: modes.lambdas.len().to_string(),
            found: phi_sq.len().to_string(),
        });
    }
    if phi_sq.iter().any(|&p| p.is_nan() || p < 0.0) {
        return Err(Error::Validation("allocations must be non-negative".into()));
    }
    let limit = modes.active_limit;
    let driven: f64 = (0..limit)
        .map(|j| {
            let dr = modes.deltas[j] * modes.leverages[j];
            dr / (1.0 + modes.deltas[j] * modes.lambdas[j] * phi_sq[j])
        })
        .sum();
    let idle: f64 = (limit..modes.deltas.len())
        .map(|j| modes.deltas[j] * modes.leverages[j])
        .sum();
    Ok(driven + idle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn modes(d: &[f64], l: &[f64], r: &[f64], p0: f64) -> ModeSet {
        ModeSet::new(d.to_vec(), l.to_vec(), r.to_vec(), p0, l.len()).unwrap()
    }

    #[test]
    fn single_mode_takes_whole_budget() {
        let ms = modes(&[1.0], &[1.0], &[1.0], 10.0);
        let a = solve(&ms).unwrap();
        assert_relative_eq!(a.phi_sq[0], 10.0, max_relative = 1e-14);
        assert_eq!(a.active_set, vec![0]);
    }

    #[test]
    fn two_modes_all_active() {
        let ms = modes(&[2.0, 1.0], &[1.0, 1.0], &[1.0, 1.0], 3.0);
        let a = solve(&ms).unwrap();
        assert!((a.phi_sq[0] - 0.96447).abs() < 1e-5);
        assert!((a.phi_sq[1] - 1.07107).abs() < 1e-5);
        assert_relative_eq!(ms.power(&a.phi_sq), 3.0, max_relative = 1e-12);
        assert_eq!(a.active_set, vec![0, 1]);
    }

    #[test]
    fn weak_mode_is_dropped() {
        let ms = modes(&[1.0, 1.0], &[10.0, 0.1], &[1.0, 1.0], 0.1);
        // all-active level puts mode 2 below zero
        let level = ms.inverse_sqrt_multiplier(&[0, 1]);
        assert!(ms.candidate(1, level) < 0.0);
        let a = solve(&ms).unwrap();
        assert_relative_eq!(a.phi_sq[0], 0.1, max_relative = 1e-12);
        assert_eq!(a.phi_sq[1], 0.0);
        assert_eq!(a.active_set, vec![0]);
    }

    #[test]
    fn zero_gain_modes_never_get_power() {
        let ms = ModeSet::new(vec![3.0, 2.0, 1.0], vec![2.0, 1.0, 0.0], vec![1.0, 0.0, 1.0], 5.0, 3).unwrap();
        let a = solve(&ms).unwrap();
        assert_eq!(a.phi_sq[1], 0.0);
        assert_eq!(a.phi_sq[2], 0.0);
        assert_relative_eq!(ms.power(&a.phi_sq), 5.0, max_relative = 1e-12);
    }

    #[test]
    fn no_usable_mode() {
        let ms = ModeSet::new(vec![1.0, 1.0], vec![0.0, 0.0], vec![1.0, 1.0], 1.0, 2).unwrap();
        assert_eq!(solve(&ms), Err(Error::NoUsableMode));
    }

    #[test]
    fn mode_set_validation() {
        assert!(ModeSet::new(vec![1.0, 2.0], vec![1.0], vec![1.0, 1.0], 1.0, 1).is_err());
        assert!(ModeSet::new(vec![1.0], vec![1.0], vec![1.0, 1.0], 1.0, 1).is_err());
        assert!(ModeSet::new(vec![1.0], vec![1.0], vec![1.0], 0.0, 1).is_err());
        // fewer data modes than channel modes
        let ms = ModeSet::new(vec![1.0], vec![1.0, 0.5], vec![1.0], 1.0, 2).unwrap();
        assert_eq!(ms.active_limit(), 1);
        // lambda beyond the receive rank must vanish
        assert!(ModeSet::new(vec![1.0, 1.0], vec![1.0, 0.5], vec![1.0, 1.0], 1.0, 1).is_err());
    }

    #[test]
    fn objective_examples() {
        let ms = ModeSet::new(vec![3.0, 2.0, 1.0], vec![1.0, 0.5], vec![0.5, 1.0, 2.0], 1.0, 2).unwrap();
        assert_relative_eq!(objective(&ms, &[0.0, 0.0]).unwrap(), 1.5 + 2.0 + 2.0);
        let single = modes(&[1.0], &[1.0], &[1.0], 10.0);
        assert_relative_eq!(objective(&single, &[10.0]).unwrap(), 1.0 / 11.0);
        let far = objective(&ms, &[1e12, 1e12]).unwrap();
        assert!((far - 2.0).abs() < 1e-9);
        assert!(objective(&ms, &[-1.0, 0.0]).is_err());
        assert!(objective(&ms, &[0.0]).is_err());
    }

    #[test]
    fn stationarity_holds_on_active_modes() {
        let ms = modes(&[4.0, 3.0, 2.0, 1.0], &[5.0, 2.0, 1.0, 0.2], &[0.7, 2.0, 1.1, 0.4], 2.0);
        let a = solve(&ms).unwrap();
        for &j in &a.active_set {
            let dl = ms.deltas[j] * ms.lambdas[j];
            let expected = ((ms.gain(j) / a.multiplier).sqrt() - 1.0) / dl;
            assert_relative_eq!(a.phi_sq[j], expected, max_relative = 1e-8);
            // equal water level: gain / (1 + dl p)^2 = mu
            let level = ms.gain(j) / (1.0 + dl * a.phi_sq[j]).powi(2);
            assert_relative_eq!(level, a.multiplier, max_relative = 1e-7);
        }
        for j in 0..4 {
            if !a.active_set.contains(&j) {
                assert!(ms.gain(j) <= a.multiplier * (1.0 + 1e-12));
            }
        }
    }
}
