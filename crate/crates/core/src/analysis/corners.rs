//! Corners of the quadrangles cut on the three transversal sections by the
//! cones through the first four event points of each stage.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow;
use crate::game::{dot, shapley_family, GamePair, JointState, Vec3, BARYCENTER};
use crate::induced::boundary_scale;
use crate::jitter::{JitterModel, PhaseCorrection, QuadrantLinearMap};

pub const TABLE_NAMES: [&str; 4] = ["V0R0", "V1R0", "V1R1", "V2R1"];

/// Closed forms divided by ε, rows in `TABLE_NAMES` order. The branch
/// switches at β = 1/2, where both branches agree.
pub fn predicted(beta: f64) -> Option<[[f64; 4]; 4]> {
    if !(beta > 0.0 && beta < 1.0) {
        return None;
    }
    let b = beta;
    let lo = b < 0.5;
    let v0r0 = [
        2.0 / 3.0 * (2.0 + b) / (1.0 + b + b * b),
        2.0 / ((2.0 - b) * (1.0 + b)),
        2.0 / 3.0 * (2.0 + b) / (b * (1.0 + b + b * b)),
        2.0 / (2.0 - b),
    ];
    let v1r0 = [
        2.0 * (2.0 - b) / ((1.0 + b) * (2.0 + b)),
        if lo {
            2.0 / 3.0 * (4.0 - 4.0 * b + b * b) / (1.0 + b.powi(3) + b + b.powi(4))
        } else {
            2.0 / 3.0 * (2.0 - b) / (1.0 + b.powi(3))
        },
        2.0 * (2.0 - b) / (b * (1.0 + b) * (2.0 + b)),
        if lo {
            2.0 / 3.0 * (4.0 - 4.0 * b + b * b) / (1.0 + b.powi(3))
        } else {
            2.0 / 3.0 * (2.0 - b) / (1.0 - b + b * b)
        },
    ];
    let v1r1 = [
        2.0 / (2.0 + b),
        // printed without its ε factor in the source table
        if lo {
            2.0 / 3.0 * (2.0 - 3.0 * b + b * b) / (1.0 + b.powi(3))
        } else {
            2.0 / 3.0 * (1.0 - b) / (1.0 - b + b * b)
        },
        2.0 * (1.0 - b) / (2.0 + b),
        if lo {
            2.0 / 3.0 * (2.0 - 3.0 * b + b * b) / (b * (1.0 - b + b * b))
        } else {
            2.0 / 3.0 * (1.0 - b * b) / (b * (1.0 - b + b * b))
        },
    ];
    let q = 1.0 + 3.0 * b + 3.0 * b * b + 2.0 * b.powi(3);
    let v2r1 = [
        2.0 / 3.0 * (4.0 - 3.0 * b * b - b.powi(3)) / q,
        2.0 * (2.0 - b - b * b) / ((1.0 + 2.0 * b) * (2.0 - b) * b),
        2.0 / 3.0 * (11.0 + 21.0 * b + 15.0 * b * b + 7.0 * b.powi(3)) / (q * (2.0 + b)),
        2.0 * (2.0 - b - b * b) / ((1.0 + 2.0 * b) * (1.0 + b) * (2.0 - b)),
    ];
    Some([v0r0, v1r0, v1r1, v2r1])
}

/// Third V2R1 corner as obtained by carrying the construction through
/// exactly; differs from the printed table entry.
pub fn v2r1_third_exact(beta: f64) -> f64 {
    let b = beta;
    2.0 * (b + 2.0).powi(2) / (3.0 * (2.0 * b + 1.0) * (b * b + b + 1.0))
}

#[derive(Debug, Clone, Serialize)]
pub struct CornerTable {
    pub beta: f64,
    pub epsilon: f64,
    pub predicted: [[f64; 4]; 4],
    pub measured: [[f64; 4]; 4],
    pub rel_error: [[f64; 4]; 4],
    /// the stage left the expected four pure pairs
    pub flagged: [[bool; 4]; 4],
}

impl CornerTable {
    pub fn max_rel_error(&self) -> f64 {
        self.rel_error.iter().flatten().cloned().fold(0.0, f64::max)
    }
}

fn join(a: Vec3, b: Vec3) -> [f64; 6] {
    [a[0], a[1], a[2], b[0], b[1], b[2]]
}

/// Point where the segment from `apex` through `p` meets {f = 0}, then
/// projected through E; returns sum-distance to `origin`.
fn corner_distance(game: &GamePair, apex: [f64; 6], p: &JointState, f: impl Fn(&[f64; 6]) -> f64, origin: [f64; 6]) -> Result<f64> {
    let q = p.flat();
    let (ft, fq) = (f(&apex), f(&q));
    if (fq - ft).abs() < 1e-300 {
        return Err(Error::DegenerateLine("cone line parallel to section".into()));
    }
    let l = -ft / (fq - ft);
    let x: [f64; 6] = std::array::from_fn(|k| apex[k] + l * (q[k] - apex[k]));
    // the cut may lie outside the simplex, so project the raw vector
    let e = game.equilibrium.flat();
    let d: [f64; 6] = std::array::from_fn(|k| x[k] - e[k]);
    let lam = boundary_scale(e, d).ok_or_else(|| Error::DegenerateLine("cut point at E".into()))?;
    Ok((0..6).map(|k| (e[k] + lam * d[k] - origin[k]).abs()).sum())
}

fn four_events(game: &GamePair, seed: JointState, expect: [(usize, usize); 4]) -> Result<(Vec<JointState>, bool)> {
    let mut s = seed;
    let mut pts = Vec::with_capacity(4);
    let mut ok = true;
    for e in expect {
        let leg = flow::step(game, &s)?;
        ok &= flow::pure_pair(&leg) == Some(e);
        s = leg.end;
        pts.push(s);
    }
    Ok((pts, ok))
}

/// Corner sum-distances divided by ε, measured by simulation.
pub fn measured_corners(beta: f64, eps: f64) -> Result<([[f64; 4]; 4], [bool; 4])> {
    let g = shapley_family(beta)?;
    let b = beta;
    let e = BARYCENTER;
    // first stage: A at its equilibrium point, B just past R^B_13
    let seed0 = JointState::from_parts(e, [(1.0 - b - eps) / (2.0 - b), 0.0, (1.0 + eps) / (2.0 - b)], 0.0);
    let (p0, ok0) = four_events(&g, seed0, [(2, 0), (0, 0), (0, 1), (2, 1)])?;
    let ta0 = [1.0 / (b + 2.0), 0.0, (b + 1.0) / (b + 2.0)];
    let tb0 = [b / (b + 1.0), 1.0 / (b + 1.0), 0.0];
    let apex0 = join(ta0, tb0);
    let o0 = join(e, [(1.0 - b) / (2.0 - b), 0.0, 1.0 / (2.0 - b)]);
    let o1 = join(ta0, e);
    let gb12 = g.gap_b(1, 2);
    let ga12 = g.gap_a(1, 2);
    let gb02 = g.gap_b(0, 2);
    let v0 = |x: &[f64; 6]| dot([x[0], x[1], x[2]], gb12);
    let v1 = |x: &[f64; 6]| dot([x[3], x[4], x[5]], ga12);
    let v2 = |x: &[f64; 6]| dot([x[0], x[1], x[2]], gb02);
    let mut m = [[0.0; 4]; 4];
    for k in 0..4 {
        m[0][k] = corner_distance(&g, apex0, &p0[k], v0, o0)? / eps;
        m[1][k] = corner_distance(&g, apex0, &p0[k], v1, o1)? / eps;
    }
    // second stage: B at its equilibrium point, A just past R^A_12 side
    let seed1 = JointState::from_parts([(1.0 - eps) / (2.0 + b), 0.0, (1.0 + b + eps) / (2.0 + b)], e, 0.0);
    let (p1, ok1) = four_events(&g, seed1, [(0, 0), (0, 1), (1, 1), (1, 0)])?;
    let ta1 = [b / (1.0 + 2.0 * b), (1.0 + b) / (1.0 + 2.0 * b), 0.0];
    let tb1 = [1.0 / (2.0 - b), (1.0 - b) / (2.0 - b), 0.0];
    let apex1 = join(ta1, tb1);
    let o2 = join(e, tb1);
    let mut d1 = [0.0; 4];
    let mut d2 = [0.0; 4];
    for k in 0..4 {
        d1[k] = corner_distance(&g, apex1, &p1[k], v1, o1)? / eps;
        d2[k] = corner_distance(&g, apex1, &p1[k], v2, o2)? / eps;
    }
    // event k lands on half-line (k+1) in the first stage; the second
    // stage enters its sections at a rotated half-line
    m[2] = [d1[3], d1[0], d1[1], d1[2]];
    m[3] = [d2[1], d2[2], d2[3], d2[0]];
    Ok((m, [ok0, ok0, ok1, ok1]))
}

/// Relative error below which an entry counts as exact (round-off only).
pub const EXACT_TOL: f64 = 1e-9;

/// Per entry: the error at the smaller ε is roughly the error at the
/// larger one scaled by the ε ratio, or both are round-off.
pub fn first_order(coarse: &CornerTable, fine: &CornerTable) -> [[bool; 4]; 4] {
    let q = fine.epsilon / coarse.epsilon;
    std::array::from_fn(|t| {
        std::array::from_fn(|k| {
            let (a, b) = (coarse.rel_error[t][k], fine.rel_error[t][k]);
            (a <= EXACT_TOL && b <= EXACT_TOL) || (b / a - q).abs() <= 0.3 * q
        })
    })
}

pub fn verify_corner_tables(beta: f64, eps: f64) -> Result<CornerTable> {
    if !(eps > 0.0 && eps <= 1e-3) {
        return Err(Error::Precondition("epsilon must lie in (0, 1e-3]".into()));
    }
    let predicted = predicted(beta).ok_or_else(|| Error::Domain(format!("beta {beta} outside (0,1)")))?;
    let (measured, ok) = measured_corners(beta, eps)?;
    let mut rel_error = [[0.0; 4]; 4];
    let mut flagged = [[false; 4]; 4];
    for t in 0..4 {
        for k in 0..4 {
            rel_error[t][k] = (measured[t][k] - predicted[t][k]).abs() / predicted[t][k];
            flagged[t][k] = !ok[t];
        }
    }
    Ok(CornerTable { beta, epsilon: eps, predicted, measured, rel_error, flagged })
}

/// Jitter model whose axis maps are the measured quadrangles:
/// A₀ = V0R0, A₁ = V1R0, A₂ = V1R1, A₃ = V2R1 (V2 identified with V0
/// through the cyclic symmetry).
pub fn game_jitter_model(beta: f64) -> Result<JitterModel> {
    let (m, ok) = measured_corners(beta, 1e-6)?;
    if ok.iter().any(|o| !o) {
        return Err(Error::ModelViolation("corner construction left the four-pair regime".into()));
    }
    let q = |row: [f64; 4]| QuadrantLinearMap::new(row);
    let model = JitterModel {
        a0: q(m[0])?,
        a1: q(m[1])?,
        a2: Some(q(m[2])?),
        a3: Some(q(m[3])?),
        phase: PhaseCorrection::Zero,
        lambda: 0.8,
        mu: 3.5,
        n0: 20,
    };
    model.validate()?;
    Ok(model)
}
