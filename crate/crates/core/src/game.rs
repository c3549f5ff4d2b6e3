//! Payoff matrices, simplex geometry and landmark points.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

/// Golden-ratio conjugate; the family parameter at which the game is
/// equivalent to a zero-sum game.
pub const SIGMA: f64 = 0.618_033_988_749_894_8;

/// Relative tolerance used when classifying ties between payoffs.
pub const TIE_TOL: f64 = 1e-10;

const NEG_CLAMP: f64 = 1e-12;

pub const BARYCENTER: Vec3 = [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];

pub fn vertex(i: usize) -> Vec3 {
    let mut v = [0.0; 3];
    v[i] = 1.0;
    v
}

pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// (1-u) a + u b
pub fn lerp(a: Vec3, b: Vec3, u: f64) -> Vec3 {
    [
        (1.0 - u) * a[0] + u * b[0],
        (1.0 - u) * a[1] + u * b[1],
        (1.0 - u) * a[2] + u * b[2],
    ]
}

pub fn l1(a: Vec3) -> f64 {
    a[0].abs() + a[1].abs() + a[2].abs()
}

/// Probability vector over three pure strategies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplexPoint {
    pub coords: Vec3,
}

impl SimplexPoint {
    /// Validates, clamps tiny negatives and renormalizes.
    pub fn new(coords: Vec3) -> Result<Self> {
        if coords.iter().any(|c| !c.is_finite() || *c < -NEG_CLAMP) {
            return Err(Error::Domain(format!("not a probability vector: {coords:?}")));
        }
        let sum: f64 = coords.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("coordinates sum to {sum}")));
        }
        Ok(Self::clamped(coords))
    }

    /// Clamp negatives to zero and renormalize without validation.
    pub fn clamped(coords: Vec3) -> Self {
        let c = coords.map(|x| x.max(0.0));
        let s: f64 = c.iter().sum();
        Self { coords: c.map(|x| x / s) }
    }

    pub fn vertex(i: usize) -> Self {
        Self { coords: vertex(i) }
    }

    pub fn barycenter() -> Self {
        Self { coords: BARYCENTER }
    }
}

/// A point of the product of the two simplices together with both clocks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointState {
    pub pa: SimplexPoint,
    pub pb: SimplexPoint,
    pub time_t: f64,
    pub time_s: f64,
}

impl JointState {
    pub fn new(pa: Vec3, pb: Vec3) -> Result<Self> {
        Ok(Self {
            pa: SimplexPoint::new(pa)?,
            pb: SimplexPoint::new(pb)?,
            time_t: 0.0,
            time_s: 1.0,
        })
    }

    pub fn from_parts(pa: Vec3, pb: Vec3, time_t: f64) -> Self {
        Self {
            pa: SimplexPoint::clamped(pa),
            pb: SimplexPoint::clamped(pb),
            time_t,
            time_s: time_t.exp(),
        }
    }

    pub fn a(&self) -> Vec3 {
        self.pa.coords
    }

    pub fn b(&self) -> Vec3 {
        self.pb.coords
    }

    /// Six coordinates (pA, pB).
    pub fn flat(&self) -> [f64; 6] {
        let (a, b) = (self.a(), self.b());
        [a[0], a[1], a[2], b[0], b[1], b[2]]
    }

    /// Sum-distance over all six coordinates.
    pub fn sum_distance(&self, other: &JointState) -> f64 {
        l1(sub(self.a(), other.a())) + l1(sub(self.b(), other.b()))
    }
}

/// The two payoff matrices; row player A, column player B.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GamePair {
    pub a: Mat3,
    pub b: Mat3,
    pub beta: Option<f64>,
    pub equilibrium: JointState,
}

/// Game configuration file contents.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GameConfig {
    Family { family_beta: f64 },
    Matrices {
        #[serde(rename = "A")]
        a: Mat3,
        #[serde(rename = "B")]
        b: Mat3,
    },
}

impl GameConfig {
    pub fn build(&self) -> Result<GamePair> {
        match self {
            GameConfig::Family { family_beta } => shapley_family(*family_beta),
            GameConfig::Matrices { a, b } => GamePair::from_matrices(*a, *b),
        }
    }
}

pub fn shapley_family(beta: f64) -> Result<GamePair> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Domain(format!("beta must lie in (0,1), got {beta}")));
    }
    let a = [[1.0, 0.0, beta], [beta, 1.0, 0.0], [0.0, beta, 1.0]];
    let b = [[-beta, 1.0, 0.0], [0.0, -beta, 1.0], [1.0, 0.0, -beta]];
    Ok(GamePair {
        a,
        b,
        beta: Some(beta),
        equilibrium: JointState::from_parts(BARYCENTER, BARYCENTER, 0.0),
    })
}

impl GamePair {
    pub fn from_matrices(a: Mat3, b: Mat3) -> Result<Self> {
        let mut g = GamePair {
            a,
            b,
            beta: None,
            equilibrium: JointState::from_parts(BARYCENTER, BARYCENTER, 0.0),
        };
        g.equilibrium = nash_equilibrium(&g)?;
        Ok(g)
    }

    /// Adds perturbations to both matrices and recomputes the equilibrium.
    pub fn perturbed(&self, da: Mat3, db: Mat3) -> Result<Self> {
        let mut a = self.a;
        let mut b = self.b;
        for i in 0..3 {
            for j in 0..3 {
                a[i][j] += da[i][j];
                b[i][j] += db[i][j];
            }
        }
        Self::from_matrices(a, b)
    }

    /// vA = A pB
    pub fn payoff_a(&self, pb: Vec3) -> Vec3 {
        let a = &self.a;
        [dot(a[0], pb), dot(a[1], pb), dot(a[2], pb)]
    }

    /// vB = pA B
    pub fn payoff_b(&self, pa: Vec3) -> Vec3 {
        let b = &self.b;
        [
            pa[0] * b[0][0] + pa[1] * b[1][0] + pa[2] * b[2][0],
            pa[0] * b[0][1] + pa[1] * b[1][1] + pa[2] * b[2][1],
            pa[0] * b[0][2] + pa[1] * b[1][2] + pa[2] * b[2][2],
        ]
    }

    pub fn ea(&self) -> Vec3 {
        self.equilibrium.a()
    }

    pub fn eb(&self) -> Vec3 {
        self.equilibrium.b()
    }

    /// Coefficients c with c . pB = (A pB)_i - (A pB)_j.
    pub fn gap_a(&self, i: usize, j: usize) -> Vec3 {
        sub(self.a[i], self.a[j])
    }

    /// Coefficients c with c . pA = (pA B)_i - (pA B)_j.
    pub fn gap_b(&self, i: usize, j: usize) -> Vec3 {
        [
            self.b[0][i] - self.b[0][j],
            self.b[1][i] - self.b[1][j],
            self.b[2][i] - self.b[2][j],
        ]
    }
}

/// Uniformly distributed interior state (independent flat Dirichlet draws).
pub fn random_interior<R: rand::Rng + ?Sized>(rng: &mut R) -> JointState {
    let mut draw = || {
        let e: Vec3 = [0, 1, 2].map(|_| -(1.0 - rng.random::<f64>()).ln());
        let s: f64 = e.iter().sum();
        e.map(|v| v / s)
    };
    let a = draw();
    let b = draw();
    JointState::from_parts(a, b, 0.0)
}

pub fn payoff_vectors(game: &GamePair, state: &JointState) -> (Vec3, Vec3) {
    (game.payoff_a(state.b()), game.payoff_b(state.a()))
}

/// Indices within `tol * max(1, |max|)` of the maximum, ascending.
pub fn best_response_set(v: Vec3, tol: f64) -> Vec<usize> {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let thr = tol * m.abs().max(1.0);
    (0..3).filter(|&i| v[i] >= m - thr).collect()
}

fn solve_indifference(rows: Mat3) -> Result<Vec3> {
    // rows r: (r0 - r1) . p = 0, (r1 - r2) . p = 0, sum p = 1
    let m = Matrix3::new(
        rows[0][0] - rows[1][0],
        rows[0][1] - rows[1][1],
        rows[0][2] - rows[1][2],
        rows[1][0] - rows[2][0],
        rows[1][1] - rows[2][1],
        rows[1][2] - rows[2][2],
        1.0,
        1.0,
        1.0,
    );
    let rhs = Vector3::new(0.0, 0.0, 1.0);
    let p = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NoInteriorEquilibrium("singular indifference system".into()))?;
    if p.iter().any(|x| !x.is_finite() || *x <= 0.0) {
        return Err(Error::NoInteriorEquilibrium(format!("solution {p:?} not interior")));
    }
    Ok([p[0], p[1], p[2]])
}

pub fn nash_equilibrium(game: &GamePair) -> Result<JointState> {
    let pb = solve_indifference(game.a)?;
    let bt = [
        [game.b[0][0], game.b[1][0], game.b[2][0]],
        [game.b[0][1], game.b[1][1], game.b[2][1]],
        [game.b[0][2], game.b[1][2], game.b[2][2]],
    ];
    let pa = solve_indifference(bt)?;
    Ok(JointState::from_parts(pa, pb, 0.0))
}

/// Index of an unordered pair {0,1}, {0,2}, {1,2}.
pub fn pair_index(i: usize, j: usize) -> usize {
    match (i.min(j), i.max(j)) {
        (0, 1) => 0,
        (0, 2) => 1,
        (1, 2) => 2,
        _ => panic!("invalid pair ({i},{j})"),
    }
}

pub const PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

/// Intersection of the line {c . p = 0} with the simplex edge that omits
/// vertex `missing`, if it exists.
pub fn line_edge_point(c: Vec3, missing: usize) -> Option<Vec3> {
    let (a, b) = match missing {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let den = c[a] - c[b];
    if den.abs() < 1e-15 {
        return None;
    }
    let s = c[a] / den;
    if !(-1e-12..=1.0 + 1e-12).contains(&s) {
        return None;
    }
    let s = s.clamp(0.0, 1.0);
    Some(lerp(vertex(a), vertex(b), s))
}

/// Both boundary points of an indifference line, as (missing vertex, point).
pub fn line_endpoints(c: Vec3) -> Result<[(usize, Vec3); 2]> {
    let mut found: Vec<(usize, Vec3)> = Vec::new();
    for m in 0..3 {
        if let Some(p) = line_edge_point(c, m) {
            if found.iter().all(|(_, q)| l1(sub(*q, p)) > 1e-12) {
                found.push((m, p));
            }
        }
    }
    if found.len() != 2 {
        return Err(Error::DegenerateLine(format!("{} boundary points for {c:?}", found.len())));
    }
    Ok([found[0], found[1]])
}

/// Boundary points of the indifference lines. `r_a[k]` / `q_a[k]` are the
/// two ends of the line in the A-simplex where B is indifferent between the
/// pair `PAIRS[k]`; the R end is the one visited by the hexagonal orbit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Landmarks {
    pub r_a: [Vec3; 3],
    pub q_a: [Vec3; 3],
    pub r_b: [Vec3; 3],
    pub q_b: [Vec3; 3],
    /// Turning points of the genuine hexagonal orbit, when it exists.
    pub f_a: Option<[Vec3; 3]>,
    pub f_b: Option<[Vec3; 3]>,
    pub sigma: f64,
    pub tau_estimate: Option<f64>,
}

impl Landmarks {
    pub fn r_a(&self, i: usize, j: usize) -> Vec3 {
        self.r_a[pair_index(i, j)]
    }
    pub fn r_b(&self, i: usize, j: usize) -> Vec3 {
        self.r_b[pair_index(i, j)]
    }
    pub fn q_a(&self, i: usize, j: usize) -> Vec3 {
        self.q_a[pair_index(i, j)]
    }
    pub fn q_b(&self, i: usize, j: usize) -> Vec3 {
        self.q_b[pair_index(i, j)]
    }
}

pub fn landmarks(game: &GamePair) -> Result<Landmarks> {
    let mut ends_a = [[(0usize, [0.0; 3]); 2]; 3];
    let mut ends_b = [[(0usize, [0.0; 3]); 2]; 3];
    for (k, &(i, j)) in PAIRS.iter().enumerate() {
        ends_a[k] = line_endpoints(game.gap_b(i, j))?;
        ends_b[k] = line_endpoints(game.gap_a(i, j))?;
    }
    let verts = crate::flow::hexagon_vertices(game)?;
    let pick = |ends: &[(usize, Vec3); 2], hits: &[Vec3]| -> (Vec3, Vec3) {
        let d0 = hits.iter().map(|h| l1(sub(*h, ends[0].1))).fold(f64::INFINITY, f64::min);
        let d1 = hits.iter().map(|h| l1(sub(*h, ends[1].1))).fold(f64::INFINITY, f64::min);
        if d0 <= d1 {
            (ends[0].1, ends[1].1)
        } else {
            (ends[1].1, ends[0].1)
        }
    };
    let hits_a: Vec<Vec3> = verts.iter().map(|s| s.a()).collect();
    let hits_b: Vec<Vec3> = verts.iter().map(|s| s.b()).collect();
    let mut lm = Landmarks {
        r_a: [[0.0; 3]; 3],
        q_a: [[0.0; 3]; 3],
        r_b: [[0.0; 3]; 3],
        q_b: [[0.0; 3]; 3],
        f_a: None,
        f_b: None,
        sigma: SIGMA,
        tau_estimate: None,
    };
    for k in 0..3 {
        (lm.r_a[k], lm.q_a[k]) = pick(&ends_a[k], &hits_a);
        (lm.r_b[k], lm.q_b[k]) = pick(&ends_b[k], &hits_b);
    }
    Ok(lm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn family_entries_at_half() {
        let g = shapley_family(0.5).unwrap();
        assert_eq!(g.a[0], [1.0, 0.0, 0.5]);
        assert_eq!(g.b[0], [-0.5, 1.0, 0.0]);
        assert!(shapley_family(0.0).is_err());
        assert!(shapley_family(1.0).is_err());
    }

    #[test]
    fn zero_sum_rescaling_at_sigma() {
        let g = shapley_family(SIGMA).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((g.a[i][j] + SIGMA * (g.b[i][j] - 1.0)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn payoff_examples() {
        let g = shapley_family(0.5).unwrap();
        let s = JointState::new(BARYCENTER, [1.0, 0.0, 0.0]).unwrap();
        assert_eq!(payoff_vectors(&g, &s).0, [1.0, 0.5, 0.0]);
        let g = shapley_family(0.3).unwrap();
        let va = g.payoff_a([0.5, 0.5, 0.0]);
        // hand product: rows (1,0,.3), (.3,1,0), (0,.3,1)
        let want = [0.5, 0.65, 0.15];
        for k in 0..3 {
            assert!((va[k] - want[k]).abs() < 1e-15);
        }
        let va = g.payoff_a(BARYCENTER);
        assert!((va[0] - va[1]).abs() < 1e-15 && (va[1] - va[2]).abs() < 1e-15);
    }

    #[test]
    fn best_response_examples() {
        assert_eq!(best_response_set([1.0, 0.5, 0.0], 1e-10), vec![0]);
        assert_eq!(best_response_set([0.7, 0.7, 0.1], 1e-10), vec![0, 1]);
        assert_eq!(best_response_set([-2.5, -2.5, -2.5], 1e-10), vec![0, 1, 2]);
    }

    #[test]
    fn perturbed_equilibrium() {
        let g = shapley_family(0.3).unwrap();
        let same = g.perturbed([[0.0; 3]; 3], [[0.0; 3]; 3]).unwrap();
        assert!(same.equilibrium.sum_distance(&g.equilibrium) < 1e-14);
        let mut da = [[0.0; 3]; 3];
        da[0][0] = 1e-3;
        let p = g.perturbed(da, [[0.0; 3]; 3]).unwrap();
        // oracle: A pB has equal components
        let v = p.payoff_a(p.eb());
        assert!((v[0] - v[1]).abs() < 1e-13 && (v[1] - v[2]).abs() < 1e-13);
        for k in 0..3 {
            assert!((p.eb()[k] - 1.0 / 3.0).abs() < 1e-2);
        }
    }

    #[test]
    fn landmark_examples() {
        let beta = 0.5;
        let g = shapley_family(beta).unwrap();
        let lm = landmarks(&g).unwrap();
        let r13 = lm.r_b(0, 2);
        let want = [(1.0 - beta) / (2.0 - beta), 0.0, 1.0 / (2.0 - beta)];
        assert!(l1(sub(r13, want)) < 1e-14, "{r13:?}");
        for &b in &[0.2, 0.5, 0.8] {
            let g = shapley_family(b).unwrap();
            let lm = landmarks(&g).unwrap();
            let q13 = lm.q_b(0, 2);
            let want = [b / (b + 1.0), 1.0 / (b + 1.0), 0.0];
            assert!(l1(sub(q13, want)) < 1e-14);
            // R^A_12 sits on the side joining vertices 1 and 3
            assert!(lm.r_a(0, 1)[1].abs() < 1e-15);
            for k in 0..3 {
                // straddle: E lies strictly between R and Q
                let (r, q) = (lm.r_a[k], lm.q_a[k]);
                let e = BARYCENTER;
                let t = l1(sub(e, r)) / l1(sub(q, r));
                assert!(l1(sub(lerp(r, q, t), e)) < 1e-12 && t > 0.0 && t < 1.0);
            }
        }
    }

    proptest! {
        #[test]
        fn argmax_invariance(v in prop::array::uniform3(-5.0f64..5.0), c in -3.0f64..3.0, s in 0.1f64..10.0) {
            let base = best_response_set(v, 0.0);
            prop_assert_eq!(best_response_set(v.map(|x| x + c), 0.0).len() >= 1, true);
            let shifted = best_response_set(v.map(|x| (x + c) * s), 1e-12);
            prop_assert_eq!(base, shifted);
        }

        #[test]
        fn family_equilibrium_is_barycenter(beta in 0.001f64..0.999) {
            let g = shapley_family(beta).unwrap();
            let e = nash_equilibrium(&g).unwrap();
            for k in 0..3 {
                prop_assert!((e.a()[k] - 1.0 / 3.0).abs() < 1e-12);
                prop_assert!((e.b()[k] - 1.0 / 3.0).abs() < 1e-12);
            }
        }

        #[test]
        fn landmark_residuals(beta in 0.01f64..0.99) {
            let g = shapley_family(beta).unwrap();
            let lm = landmarks(&g).unwrap();
            for (k, &(i, j)) in PAIRS.iter().enumerate() {
                for p in [lm.r_a[k], lm.q_a[k]] {
                    prop_assert!(dot(g.gap_b(i, j), p).abs() < 1e-12);
                }
                for p in [lm.r_b[k], lm.q_b[k]] {
                    prop_assert!(dot(g.gap_a(i, j), p).abs() < 1e-12);
                }
            }
        }
    }
}
