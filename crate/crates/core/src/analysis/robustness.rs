//! Persistence of the orbit structure under small perturbations of both
//! payoff matrices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::stability::{classify_stability, Classification, OrbitId};
use crate::error::{Error, Result};
use crate::game::{shapley_family, GamePair, Mat3, SIGMA};
use crate::induced::gamma_orbit;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub interior: bool,
    pub gamma_closure: Option<f64>,
    pub genuine_gamma: bool,
    pub shapley: Option<Classification>,
    pub anti_shapley: Option<Classification>,
    pub error: Option<String>,
}

impl Snapshot {
    pub fn of(game: &GamePair) -> Self {
        let e = game.equilibrium.flat();
        let interior = e.iter().all(|&x| x > 0.0);
        let (gamma_closure, genuine_gamma, mut error) = match gamma_orbit(game) {
            Ok(g) => (Some(g.closure_residual), g.genuine.is_some(), None),
            Err(e) => (None, false, Some(e.to_string())),
        };
        let mut class = |id| match classify_stability(game, id) {
            Ok(r) => Some(r.classification),
            Err(e) => {
                error.get_or_insert(e.to_string());
                None
            }
        };
        let shapley = class(OrbitId::Shapley);
        let anti_shapley = class(OrbitId::AntiShapley);
        Snapshot { interior, gamma_closure, genuine_gamma, shapley, anti_shapley, error }
    }

    pub fn gamma_closes(&self) -> bool {
        self.gamma_closure.is_some_and(|c| c <= 1e-9)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Trial {
    pub index: usize,
    pub snapshot: Snapshot,
    /// equilibrium interior, closing hexagonal orbit and unchanged
    /// classifications (and genuine orbit when the base game has one)
    pub persists: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RobustnessReport {
    pub beta: f64,
    pub perturb_norm: f64,
    pub seed: u64,
    pub baseline: Snapshot,
    pub trials: Vec<Trial>,
    pub interior_fraction: f64,
    pub gamma_fraction: f64,
    pub genuine_fraction: f64,
    pub persistence_fraction: f64,
}

pub fn random_perturbation<R: Rng + ?Sized>(rng: &mut R, norm: f64) -> (Mat3, Mat3) {
    let mut m = || -> Mat3 { std::array::from_fn(|_| std::array::from_fn(|_| rng.random_range(-norm..=norm))) };
    (m(), m())
}

fn trial_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

pub fn robustness_sweep(beta: f64, n_trials: usize, perturb_norm: f64, seed: u64) -> Result<RobustnessReport> {
    if (beta - SIGMA).abs() < 1e-9 {
        return Err(Error::Precondition("the zero-sum parameter is excluded".into()));
    }
    let base = shapley_family(beta)?;
    let baseline = Snapshot::of(&base);
    let trials: Vec<Trial> = (0..n_trials)
        .into_par_iter()
        .map(|index| {
            let (da, db) = random_perturbation(&mut trial_rng(seed, index), perturb_norm);
            let snapshot = match base.perturbed(da, db) {
                Ok(g) => Snapshot::of(&g),
                Err(e) => Snapshot {
                    interior: false,
                    gamma_closure: None,
                    genuine_gamma: false,
                    shapley: None,
                    anti_shapley: None,
                    error: Some(e.to_string()),
                },
            };
            let persists = snapshot.interior
                && snapshot.gamma_closes()
                && snapshot.shapley == baseline.shapley
                && snapshot.anti_shapley == baseline.anti_shapley
                && snapshot.genuine_gamma == baseline.genuine_gamma;
            Trial { index, snapshot, persists }
        })
        .collect();
    let frac = |f: &dyn Fn(&Trial) -> bool| trials.iter().filter(|t| f(t)).count() as f64 / n_trials.max(1) as f64;
    Ok(RobustnessReport {
        beta,
        perturb_norm,
        seed,
        interior_fraction: frac(&|t| t.snapshot.interior),
        gamma_fraction: frac(&|t| t.snapshot.gamma_closes()),
        genuine_fraction: frac(&|t| t.snapshot.genuine_gamma),
        persistence_fraction: frac(&|t| t.persists),
        baseline,
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_perturbation_changes_nothing() {
        let rep = robustness_sweep(0.3, 4, 0.0, 7).unwrap();
        assert_eq!(rep.persistence_fraction, 1.0);
        for t in &rep.trials {
            assert_eq!(t.snapshot.shapley, rep.baseline.shapley);
        }
    }

    #[test]
    fn sweep_is_reproducible() {
        let a = robustness_sweep(0.3, 6, 1e-3, 11).unwrap();
        let b = robustness_sweep(0.3, 6, 1e-3, 11).unwrap();
        let ca: Vec<_> = a.trials.iter().map(|t| t.snapshot.clone()).collect();
        let cb: Vec<_> = b.trials.iter().map(|t| t.snapshot.clone()).collect();
        assert_eq!(ca, cb);
    }

    #[test]
    fn shapley_persists_attracting() {
        let rep = robustness_sweep(0.3, 20, 1e-3, 1).unwrap();
        assert_eq!(rep.baseline.shapley, Some(Classification::Attracting));
        assert!(rep.trials.iter().all(|t| t.snapshot.shapley == Some(Classification::Attracting)));
    }
}
