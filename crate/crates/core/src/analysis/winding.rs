//! Circulation around one leg of the jitter set.
//!
//! Near the leg where A is torn between strategies 1, 3 and B between 1, 2
//! the flow only uses four pure target pairs. In the frame
//! z = T + x e_a + y e_b + l (X - T), with T the end of the leg on the
//! boundary and X its other end, the normalized point (x, y)/l moves by
//! translation, so orbits stay on invariant quadrangles, and 1/l grows by a
//! fixed amount per circuit for each quadrangle. Writing r = rho l for the
//! radius at the A-switch half-line, one circuit maps r to r/(1 + a r).

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{self, Player};
use crate::game::{line_edge_point, GamePair, JointState};

type Vec6 = [f64; 6];

/// Pure pairs allowed near the leg.
const LEG_PAIRS: [(usize, usize); 4] = [(2, 0), (0, 0), (0, 1), (2, 1)];

#[derive(Debug, Clone, Serialize)]
pub struct LegFrame {
    pub apex: Vec6,
    pub far_end: Vec6,
    pub e_a: Vec6,
    pub e_b: Vec6,
    /// corner distances of the invariant quadrangle on the half-lines
    /// +x, -x, +y, -y, normalized so that +x is 1
    pub corners: [f64; 4],
    /// growth of 1/l per circuit on the unit quadrangle
    pub a: f64,
}

fn join(a: [f64; 3], b: [f64; 3]) -> Vec6 {
    [a[0], a[1], a[2], b[0], b[1], b[2]]
}

impl LegFrame {
    pub fn new(game: &GamePair) -> Result<Self> {
        let missing = |what: &str| Error::DegenerateLine(format!("{what} misses its edge"));
        let ta = line_edge_point(game.gap_b(0, 1), 1).ok_or_else(|| missing("B's 1-2 line"))?;
        let tb = line_edge_point(game.gap_a(0, 2), 2).ok_or_else(|| missing("A's 1-3 line"))?;
        let xb = line_edge_point(game.gap_a(0, 2), 1).ok_or_else(|| missing("A's 1-3 line"))?;
        let mut f = LegFrame {
            apex: join(ta, tb),
            far_end: join(game.ea(), xb),
            e_a: [-1.0, 0.0, 1.0, 0.0, 0.0, 0.0],
            e_b: [0.0, 0.0, 0.0, -1.0, 1.0, 0.0],
            corners: [1.0; 4],
            a: f64::NAN,
        };
        f.calibrate(game)?;
        Ok(f)
    }

    fn v(&self) -> Vec6 {
        std::array::from_fn(|k| self.far_end[k] - self.apex[k])
    }

    pub fn point(&self, x: f64, y: f64, l: f64) -> JointState {
        let v = self.v();
        let z: Vec6 = std::array::from_fn(|k| self.apex[k] + x * self.e_a[k] + y * self.e_b[k] + l * v[k]);
        JointState::from_parts([z[0], z[1], z[2]], [z[3], z[4], z[5]], 0.0)
    }

    /// (x, y, l) by least squares; exact for points of the frame.
    pub fn coords(&self, s: &JointState) -> [f64; 3] {
        let p = s.flat();
        let cols = [self.e_a, self.e_b, self.v()];
        let d: Vec6 = std::array::from_fn(|k| p[k] - self.apex[k]);
        let g = Matrix3::from_fn(|i, j| (0..6).map(|k| cols[i][k] * cols[j][k]).sum());
        let rhs = Vector3::from_fn(|i, _| (0..6).map(|k| cols[i][k] * d[k]).sum());
        let c = g.lu().solve(&rhs).expect("frame vectors independent");
        [c[0], c[1], c[2]]
    }

    /// Normalized quadrangle radius of (x, y)/l.
    pub fn rho(&self, s: &JointState) -> f64 {
        let [x, y, l] = self.coords(s);
        let cx = if x >= 0.0 { self.corners[0] } else { self.corners[1] };
        let cy = if y >= 0.0 { self.corners[2] } else { self.corners[3] };
        (x.abs() / cx + y.abs() / cy) / l
    }

    /// One circuit at a small radius gives the quadrangle and a.
    fn calibrate(&mut self, game: &GamePair) -> Result<()> {
        let (xi, l0) = (1e-3, 0.8);
        let mut s = self.point(xi * l0, 0.0, l0);
        let mut seen = [f64::NAN; 4];
        for _ in 0..4 {
            let leg = leg_in_regime(game, &s)?;
            s = leg.end;
            let [x, y, l] = self.coords(&s);
            let (x, y) = (x / (l * xi), y / (l * xi));
            let k = if y.abs() < x.abs() {
                if x > 0.0 { 0 } else { 1 }
            } else if y > 0.0 {
                2
            } else {
                3
            };
            seen[k] = x.abs().max(y.abs());
        }
        if seen.iter().any(|c| c.is_nan()) {
            return Err(Error::ModelViolation("circuit missed a half-line".into()));
        }
        if (seen[0] - 1.0).abs() > 1e-6 {
            return Err(Error::ModelViolation(format!("quadrangle does not close: {}", seen[0])));
        }
        self.corners = [1.0, seen[1], seen[2], seen[3]];
        let l1 = self.coords(&s)[2];
        self.a = (1.0 / l1 - 1.0 / l0) / xi;
        Ok(())
    }
}

fn leg_in_regime(game: &GamePair, s: &JointState) -> Result<flow::TrajectoryLeg> {
    let leg = flow::step(game, s)?;
    match flow::pure_pair(&leg) {
        Some(p) if LEG_PAIRS.contains(&p) => Ok(leg),
        other => Err(Error::ModelViolation(format!("left the four-pair regime at {other:?}"))),
    }
}

/// Radii at successive crossings of the A-switch half-line, starting on it
/// at depth `l0` with radius `r0`.
pub fn circuit_radii(game: &GamePair, frame: &LegFrame, r0: f64, l0: f64, circuits: usize) -> Result<Vec<f64>> {
    let mut s = frame.point(r0, 0.0, l0);
    let mut out = vec![r0];
    let mut legs = 0;
    while out.len() <= circuits {
        let leg = leg_in_regime(game, &s)?;
        s = leg.end;
        legs += 1;
        if legs > 8 * circuits + 8 {
            return Err(Error::ModelViolation("circuit longer than four legs".into()));
        }
        let [x, y, _] = frame.coords(&s);
        if leg.firing.player == Player::A && x > 0.0 {
            debug_assert!(y.abs() <= 1e-9 * x.max(1e-300) + 1e-15);
            out.push(x);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct MoebiusCheck {
    pub r0: f64,
    pub a: f64,
    pub radii: Vec<f64>,
    pub max_rel_error: f64,
}

/// Fit a from the first circuit and compare r_n with r0/(1 + n a r0).
pub fn moebius_law(game: &GamePair, r0: f64, l0: f64, circuits: usize) -> Result<MoebiusCheck> {
    let frame = LegFrame::new(game)?;
    let radii = circuit_radii(game, &frame, r0, l0, circuits)?;
    let a = (r0 / radii[1] - 1.0) / r0;
    let max_rel_error = radii
        .iter()
        .enumerate()
        .map(|(n, r)| {
            let want = r0 / (1.0 + n as f64 * a * r0);
            (r - want).abs() / want
        })
        .fold(0.0, f64::max);
    Ok(MoebiusCheck { r0, a, radii, max_rel_error })
}

#[derive(Debug, Clone, Serialize)]
pub struct WindingModel {
    pub a: f64,
    pub c0: f64,
    /// mean offset of measured counts from the continuous prediction
    pub b0: f64,
    pub b_residuals: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct WindingRow {
    pub r: f64,
    pub predicted: i64,
    pub measured: i64,
}

#[derive(Debug, Clone, Serialize)]
pub struct WindingReport {
    pub model: WindingModel,
    pub l0: f64,
    pub l1: f64,
    pub rows: Vec<WindingRow>,
}

impl WindingReport {
    pub fn max_deviation(&self) -> i64 {
        self.rows.iter().map(|r| (r.measured - r.predicted).abs()).max().unwrap_or(0)
    }
}

/// Half-line crossings between the sections l = l0 and l = l1 < l0.
pub fn count_windings(game: &GamePair, frame: &LegFrame, r: f64, l0: f64, l1: f64) -> Result<i64> {
    let mut s = frame.point(r, 0.0, l0);
    let mut n = 0;
    loop {
        let leg = leg_in_regime(game, &s)?;
        s = leg.end;
        let [x, _, l] = frame.coords(&s);
        if l <= l1 {
            return Ok(n);
        }
        if leg.firing.player == Player::A && x > 0.0 {
            n += 1;
        }
    }
}

/// Windings from the section at depth l0 to the one at l1 for each radius,
/// against floor((1 - c0)/(a c0 r)).
pub fn verify_winding(game: &GamePair, radii: &[f64], l0: f64, l1: f64) -> Result<WindingReport> {
    if !(0.0 < l1 && l1 < l0 && l0 < 1.0) {
        return Err(Error::Precondition("need 0 < l1 < l0 < 1".into()));
    }
    let frame = LegFrame::new(game)?;
    let a = frame.a;
    let c0 = l1 / l0;
    let mut rows = Vec::with_capacity(radii.len());
    let mut offsets = Vec::with_capacity(radii.len());
    for &r in radii {
        let cont = (1.0 - c0) / (a * c0 * r);
        let measured = count_windings(game, &frame, r, l0, l1)?;
        offsets.push(measured as f64 - cont);
        rows.push(WindingRow { r, predicted: cont.floor() as i64, measured });
    }
    let mut sorted: Vec<&WindingRow> = rows.iter().collect();
    sorted.sort_by(|p, q| q.r.total_cmp(&p.r));
    if sorted.windows(2).any(|w| w[1].measured < w[0].measured) {
        return Err(Error::ModelViolation("winding count not monotone in 1/r".into()));
    }
    let b0 = offsets.iter().sum::<f64>() / offsets.len().max(1) as f64;
    let b_residuals = offsets.iter().map(|o| o - b0).collect();
    Ok(WindingReport { model: WindingModel { a, c0, b0, b_residuals }, l0, l1, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::shapley_family;

    #[test]
    fn frame_reproduces_points() {
        let g = shapley_family(0.5).unwrap();
        let f = LegFrame::new(&g).unwrap();
        let c = f.coords(&f.point(0.01, -0.02, 0.7));
        assert!((c[0] - 0.01).abs() < 1e-14 && (c[1] + 0.02).abs() < 1e-14 && (c[2] - 0.7).abs() < 1e-14);
        assert!(f.a > 0.0);
    }

    #[test]
    fn quadrangle_is_invariant() {
        let g = shapley_family(0.5).unwrap();
        let f = LegFrame::new(&g).unwrap();
        let mut s = f.point(1e-3 * 0.85, 0.0, 0.85);
        let rho0 = f.rho(&s);
        for _ in 0..12 {
            s = flow::step(&g, &s).unwrap().end;
            assert!((f.rho(&s) - rho0).abs() < 1e-10 * rho0, "{} {} {:?} {:?}", f.rho(&s), rho0, f.coords(&s), f.corners);
        }
    }

    #[test]
    fn moebius_law_holds() {
        let g = shapley_family(0.5).unwrap();
        let m = moebius_law(&g, 1e-3, 0.85, 50).unwrap();
        assert!(m.max_rel_error <= 1e-8, "{}", m.max_rel_error);
        assert!((m.a - LegFrame::new(&g).unwrap().a).abs() < 1e-4 * m.a);
    }

    #[test]
    fn winding_scales_with_inverse_radius() {
        let g = shapley_family(0.5).unwrap();
        let rep = verify_winding(&g, &[1e-2, 1e-3], 0.85, 0.6).unwrap();
        assert!(rep.max_deviation() <= 2);
        let (n2, n3) = (rep.rows[0].measured as f64, rep.rows[1].measured as f64);
        assert!((n3 - 10.0 * n2).abs() <= 12.0, "{n2} {n3}");
    }
}
