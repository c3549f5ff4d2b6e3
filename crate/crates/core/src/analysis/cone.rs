//! Radial return along rays through E inside the cone over the hexagonal
//! boundary orbit.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{self, Limits};
use crate::game::{GamePair, JointState};
use crate::induced::ray_point;

/// f(r) = κ r / (1 + a r), with r the fraction of the way from E to the
/// boundary point of the ray.
#[derive(Debug, Clone, Serialize)]
pub struct RadialMap {
    pub kappa: f64,
    pub a: f64,
    pub legs: usize,
    pub samples: Vec<(f64, f64)>,
    pub fit_residual: f64,
}

impl RadialMap {
    pub fn apply(&self, r: f64) -> f64 {
        self.kappa * r / (1.0 + self.a * r)
    }

    /// Closed form of the n-fold composition.
    pub fn iterate(&self, r: f64, n: u32) -> f64 {
        let kn = self.kappa.powi(n as i32);
        let geo = if (self.kappa - 1.0).abs() < 1e-14 { n as f64 } else { (kn - 1.0) / (self.kappa - 1.0) };
        kn * r / (1.0 + self.a * r * geo)
    }

    pub fn derivative_at_zero(&self) -> f64 {
        self.kappa
    }

    /// Second fixed point (κ-1)/a when E repels and it lies inside the simplex.
    pub fn attracting_radius(&self) -> Option<f64> {
        if self.kappa > 1.0 + 1e-12 && self.a > 0.0 {
            let r = (self.kappa - 1.0) / self.a;
            (r <= 1.0 + 1e-12).then_some(r)
        } else {
            None
        }
    }
}

fn direction(game: &GamePair, s: &JointState) -> [f64; 6] {
    let e = game.equilibrium.flat();
    let p = s.flat();
    std::array::from_fn(|k| p[k] - e[k])
}

/// Constrained image of E + r(seed - E) after `legs` legs, as a multiple of
/// (seed - E).
pub fn radial_image(game: &GamePair, seed: &JointState, r: f64, legs: usize) -> Result<f64> {
    let mut s = ray_point(game, seed, r);
    for _ in 0..legs {
        s = flow::constrained_step(game, &s)?.end;
    }
    let d0 = direction(game, seed);
    let d1 = direction(game, &s);
    let n0: f64 = d0.iter().map(|x| x.abs()).sum();
    let f = d1.iter().zip(&d0).map(|(a, b)| a * b).sum::<f64>() / d0.iter().map(|x| x * x).sum::<f64>();
    let off: f64 = d1.iter().zip(&d0).map(|(a, b)| (a - f * b).abs()).sum();
    if off > 1e-9 * n0.max(1.0) {
        return Err(Error::ModelViolation(format!("image left the ray by {off:e}")));
    }
    Ok(f)
}

const SAMPLE_RADII: [f64; 8] = [0.05, 0.1, 0.2, 0.35, 0.5, 0.65, 0.8, 1.0];

pub fn radial_map_at(game: &GamePair, seed: &JointState, legs: usize) -> Result<RadialMap> {
    let mut samples = Vec::with_capacity(SAMPLE_RADII.len());
    for &r in &SAMPLE_RADII {
        samples.push((r, radial_image(game, seed, r, legs)?));
    }
    if samples.windows(2).any(|w| w[1].1 <= w[0].1) {
        return Err(Error::ModelViolation("radial map is not increasing".into()));
    }
    // 1/f = (1/κ)(1/r) + a/κ through the two outer samples
    let (r0, f0) = samples[0];
    let (r1, f1) = *samples.last().unwrap();
    let slope = (1.0 / f1 - 1.0 / f0) / (1.0 / r1 - 1.0 / r0);
    let icpt = 1.0 / f0 - slope / r0;
    let kappa = 1.0 / slope;
    let a = icpt * kappa;
    let mut map = RadialMap { kappa, a, legs, samples, fit_residual: 0.0 };
    map.fit_residual = map.samples.iter().map(|(r, f)| (map.apply(*r) - f).abs() / f).fold(0.0, f64::max);
    if map.fit_residual > 1e-8 {
        return Err(Error::ModelViolation(format!("Möbius fit residual {:e}", map.fit_residual)));
    }
    Ok(map)
}

/// Radial map over one circuit of the hexagonal orbit.
pub fn radial_map(game: &GamePair) -> Result<RadialMap> {
    radial_map_at(game, &flow::hexagon_seed(game)?, 6)
}

#[derive(Debug, Clone, Serialize)]
pub struct MoebiusConeReport {
    pub map: RadialMap,
    pub e_attracting: bool,
    pub second_fixed_point: Option<f64>,
    /// Radius reached by iterating the simulated circuit map to convergence.
    pub simulated_fixed_point: Option<f64>,
    /// max relative error of the closed-form n-fold composition vs simulation
    pub composition_error: f64,
}

/// Fit on one ray and compare compositions with direct simulation of
/// `circuits` circuits.
pub fn moebius_cone_map(game: &GamePair, circuits: u32) -> Result<MoebiusConeReport> {
    let seed = flow::hexagon_seed(game)?;
    let map = radial_map_at(game, &seed, 6)?;
    let mut composition_error = 0.0f64;
    for &r0 in &[0.1, 0.5, 0.9] {
        let mut s = ray_point(game, &seed, r0);
        for n in 1..=circuits {
            for _ in 0..6 {
                s = flow::constrained_step(game, &s)?.end;
            }
            let d = direction(game, &s);
            let d0 = direction(game, &seed);
            let f = d.iter().zip(&d0).map(|(a, b)| a * b).sum::<f64>() / d0.iter().map(|x| x * x).sum::<f64>();
            let want = map.iterate(r0, n);
            composition_error = composition_error.max((f - want).abs() / want);
            if f < 1e-6 {
                break;
            }
        }
    }
    let second = map.attracting_radius();
    let simulated = match second {
        Some(_) => {
            let mut r = 0.5;
            for _ in 0..2000 {
                let next = radial_image(game, &seed, r, 6)?;
                if (next - r).abs() < 1e-15 {
                    r = next;
                    break;
                }
                r = next;
            }
            Some(r)
        }
        None => None,
    };
    Ok(MoebiusConeReport {
        e_attracting: map.kappa < 1.0,
        second_fixed_point: second,
        simulated_fixed_point: simulated,
        composition_error,
        map,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConeLift {
    pub map: RadialMap,
    /// the orbit started inside the cone was absorbed at E
    pub reaches_e: bool,
    pub time_to_e: Option<f64>,
    pub t_star: Option<f64>,
    /// sum-distance after one circuit from the lifted point
    pub closure: Option<f64>,
    pub lifted: Option<JointState>,
}

/// Radial factor of the skew product over an induced periodic point `x`
/// of period `legs`.
pub fn cone_lift(game: &GamePair, x: &JointState, legs: usize) -> Result<ConeLift> {
    let map = radial_map_at(game, x, legs)?;
    let mut out = ConeLift { map: map.clone(), reaches_e: false, time_to_e: None, t_star: None, closure: None, lifted: None };
    if map.kappa < 1.0 {
        let start = ray_point(game, x, 0.5);
        let lim = Limits { max_events: 200_000, max_time_t: f64::INFINITY, stop_radius_at_e: 1e-9 };
        let traj = flow::simulate_constrained(game, &start, &lim)?;
        out.reaches_e = traj.terminated_at_e;
        out.time_to_e = traj.final_state().map(|s| s.time_t);
    } else if let Some(t) = map.attracting_radius() {
        let start = ray_point(game, x, t);
        let mut s = start;
        for _ in 0..legs {
            s = flow::constrained_step(game, &s)?.end;
        }
        out.t_star = Some(t);
        out.closure = Some(s.sum_distance(&start));
        out.lifted = Some(start);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{shapley_family, SIGMA};

    #[test]
    fn e_attracts_below_sigma() {
        let g = shapley_family(0.3).unwrap();
        let m = radial_map(&g).unwrap();
        assert!(m.kappa < 1.0 && m.attracting_radius().is_none());
        let lift = cone_lift(&g, &flow::hexagon_seed(&g).unwrap(), 6).unwrap();
        assert!(lift.reaches_e);
        assert!(lift.time_to_e.unwrap().is_finite());
    }

    #[test]
    fn second_fixed_point_above_sigma() {
        let g = shapley_family(0.8).unwrap();
        let rep = moebius_cone_map(&g, 20).unwrap();
        assert!(!rep.e_attracting);
        let (fit, sim) = (rep.second_fixed_point.unwrap(), rep.simulated_fixed_point.unwrap());
        assert!((fit - sim).abs() < 1e-8, "{fit} vs {sim}");
        assert!(rep.composition_error < 1e-8);
        let lift = cone_lift(&g, &flow::hexagon_seed(&g).unwrap(), 6).unwrap();
        assert!(lift.closure.unwrap() < 1e-8);
    }

    #[test]
    fn neutral_at_sigma() {
        let g = shapley_family(SIGMA).unwrap();
        let m = radial_map(&g).unwrap();
        assert!((m.kappa - 1.0).abs() < 1e-6, "{}", m.kappa);
    }

    #[test]
    fn composition_matches_simulation_below_sigma() {
        let g = shapley_family(0.4).unwrap();
        let rep = moebius_cone_map(&g, 10).unwrap();
        assert!(rep.e_attracting && rep.composition_error < 1e-8);
    }
}
