//! Induced flow on the boundary (projection through E), the hexagonal
//! orbit, Poincaré sections and first-return maps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{self, Label, Player, TrajectoryLeg};
use crate::game::{l1, sub, GamePair, JointState, Vec3};

pub type Vec6 = [f64; 6];

fn split(v: Vec6) -> (Vec3, Vec3) {
    ([v[0], v[1], v[2]], [v[3], v[4], v[5]])
}

fn join(a: Vec3, b: Vec3) -> Vec6 {
    [a[0], a[1], a[2], b[0], b[1], b[2]]
}

fn dot6(a: Vec6, b: Vec6) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Point of the boundary of the product simplex, other than E.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub state: JointState,
}

/// Scale factor taking E + d to the boundary along the ray.
pub fn boundary_scale(e: Vec6, d: Vec6) -> Option<f64> {
    let mut lam = f64::INFINITY;
    for k in 0..6 {
        if d[k] < 0.0 {
            lam = lam.min(-e[k] / d[k]);
        }
    }
    lam.is_finite().then_some(lam)
}

pub fn project_to_boundary(state: &JointState, equilibrium: &JointState) -> Result<BoundaryPoint> {
    if state.sum_distance(equilibrium) <= 1e-12 {
        return Err(Error::Precondition("cannot project the equilibrium".into()));
    }
    let e = equilibrium.flat();
    let p = state.flat();
    let d: Vec6 = std::array::from_fn(|k| p[k] - e[k]);
    let lam = boundary_scale(e, d).ok_or_else(|| Error::Precondition("degenerate ray".into()))?;
    let q: Vec6 = std::array::from_fn(|k| e[k] + lam * d[k]);
    let (a, b) = split(q);
    Ok(BoundaryPoint { state: JointState::from_parts(a, b, state.time_t) })
}

/// One event of the induced flow; also returns the unprojected leg.
pub fn induced_step(game: &GamePair, b: &BoundaryPoint) -> Result<(BoundaryPoint, TrajectoryLeg)> {
    let leg = flow::step(game, &b.state)?;
    Ok((project_to_boundary(&leg.end, &game.equilibrium)?, leg))
}

/// Cyclic relabelling k -> k+1 of both players' strategies, a symmetry of
/// the family.
pub fn cyclic_shift(p: Vec3) -> Vec3 {
    [p[2], p[0], p[1]]
}

pub fn cyclic_unshift(p: Vec3) -> Vec3 {
    [p[1], p[2], p[0]]
}

/// The hexagonal boundary orbit and, above the zero-sum parameter, the
/// genuine periodic orbit on the jitter set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GammaOrbit {
    pub vertices: Vec<JointState>,
    pub labels: Vec<(Label, Label)>,
    pub closure_residual: f64,
    /// Turning points of the genuine orbit, one per leg.
    pub genuine: Option<Vec<JointState>>,
    /// Radial position of the genuine orbit on the ray through the first vertex.
    pub genuine_radius: Option<f64>,
}

pub fn gamma_orbit(game: &GamePair) -> Result<GammaOrbit> {
    let seed = flow::hexagon_seed(game)?;
    let mut s = seed;
    let mut vertices = Vec::with_capacity(6);
    let mut labels = Vec::with_capacity(6);
    for _ in 0..6 {
        vertices.push(s);
        let leg = flow::constrained_induced_step(game, &s)?;
        labels.push(leg.targets.labels());
        s = leg.end;
    }
    let closure_residual = s.sum_distance(&seed);
    if closure_residual > 1e-9 {
        return Err(Error::Closure(closure_residual));
    }
    let cone = crate::analysis::cone::radial_map(game)?;
    let (genuine, genuine_radius) = match cone.attracting_radius() {
        Some(r) => {
            let start = ray_point(game, &seed, r);
            let mut s = start;
            let mut pts = Vec::with_capacity(6);
            for _ in 0..6 {
                pts.push(s);
                s = flow::constrained_step(game, &s)?.end;
            }
            (Some(pts), Some(r))
        }
        None => (None, None),
    };
    Ok(GammaOrbit { vertices, labels, closure_residual, genuine, genuine_radius })
}

/// E + r (b - E).
pub fn ray_point(game: &GamePair, b: &JointState, r: f64) -> JointState {
    let e = game.equilibrium.flat();
    let p = b.flat();
    let q: Vec6 = std::array::from_fn(|k| e[k] + r * (p[k] - e[k]));
    let (a, bb) = split(q);
    JointState::from_parts(a, bb, 0.0)
}

/// Oriented direction of the indifference line {c . p = 0} in a simplex,
/// scaled to unit sum-norm with the sign making `dot(dir, hint) > 0`.
pub fn line_direction(c: Vec3, hint: Vec3) -> Vec3 {
    // c x (1,1,1)
    let d = [c[1] - c[2], c[2] - c[0], c[0] - c[1]];
    let n = l1(d);
    let s = if crate::game::dot(d, hint) >= 0.0 { 1.0 } else { -1.0 };
    d.map(|x| s * x / n)
}

/// Two-dimensional chart on a section: the A-part of a point moves along
/// `axis_a` from the origin and the B-part along `axis_b`. Half-lines are
/// numbered clockwise: (1) = +x, (2) = -y, (3) = -x, (4) = +y, with x the
/// A-offset and y the B-offset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Chart {
    pub origin: Vec6,
    pub axis_a: Vec3,
    pub axis_b: Vec3,
}

impl Chart {
    pub fn coords(&self, s: &JointState) -> [f64; 2] {
        let (oa, ob) = split(self.origin);
        let da = sub(s.a(), oa);
        let db = sub(s.b(), ob);
        let sx = if crate::game::dot(da, self.axis_a) >= 0.0 { 1.0 } else { -1.0 };
        let sy = if crate::game::dot(db, self.axis_b) >= 0.0 { 1.0 } else { -1.0 };
        [sx * l1(da), sy * l1(db)]
    }

    pub fn point(&self, xy: [f64; 2]) -> JointState {
        let (oa, ob) = split(self.origin);
        JointState::from_parts(
            crate::game::add(oa, crate::game::scale(self.axis_a, xy[0])),
            crate::game::add(ob, crate::game::scale(self.axis_b, xy[1])),
            0.0,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SectionKind {
    GlobalS,
    V0xB31,
    A12xV1,
    V2xB12,
    TransversalAtGamma,
}

/// A switching event that marks half-line (1): `player` moves from `from`
/// to `to` while the opponent plays `other`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HalfLineOne {
    pub player: Player,
    pub from: usize,
    pub to: usize,
    pub other: usize,
}

/// A section of the induced flow. Hyperplane sections are cones through E:
/// f(z) = normal . (z - E) = 0, restricted to the boundary face where
/// coordinate `boundary_coord` vanishes and to a ball of `radius` around
/// the chart origin.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SectionSpec {
    pub kind: SectionKind,
    pub normal: Vec6,
    pub boundary_coord: Option<usize>,
    /// +1 counts crossings with f increasing, -1 decreasing, 0 both.
    pub orientation: i8,
    pub chart: Option<Chart>,
    pub radius: f64,
    pub half_line_one: Option<HalfLineOne>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transit {
    pub events_between: usize,
    pub winding: i64,
    pub itinerary_slice: Vec<(Label, Label)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionHit {
    pub point: BoundaryPoint,
    pub section_coords: [f64; 2],
    /// Piece index for the global section, 0 otherwise.
    pub piece: usize,
    pub transit: Transit,
}

fn pa_normal(c: Vec3) -> Vec6 {
    join(c, [0.0; 3])
}

fn pb_normal(c: Vec3) -> Vec6 {
    join([0.0; 3], c)
}

impl SectionSpec {
    /// Union of the four pieces U3 x Z^A_13, U3 x Z^A_23, U1 x Z^A_12, U1 x Z^A_31.
    pub fn global_s() -> Self {
        Self {
            kind: SectionKind::GlobalS,
            normal: [0.0; 6],
            boundary_coord: None,
            orientation: 0,
            chart: None,
            radius: f64::INFINITY,
            half_line_one: None,
        }
    }

    /// B indifferent between 2 and 3, B on the side joining 1 and 3;
    /// origin (E^A, R^B_13).
    pub fn v0_b31(game: &GamePair) -> Result<Self> {
        let seed = flow::hexagon_seed(game)?;
        let c = game.gap_b(1, 2);
        Ok(Self {
            kind: SectionKind::V0xB31,
            normal: pa_normal(c),
            boundary_coord: Some(4),
            orientation: 0,
            chart: Some(Chart {
                origin: seed.flat(),
                axis_a: line_direction(c, [0.0, 0.0, 1.0]),
                axis_b: [-0.5, 0.0, 0.5],
            }),
            radius: 0.05,
            half_line_one: Some(HalfLineOne { player: Player::A, from: 2, to: 0, other: 0 }),
        })
    }

    /// A on the side joining 1 and 3, A indifferent between 2 and 3;
    /// origin (R^A_12, E^B).
    pub fn a12_v1(game: &GamePair) -> Result<Self> {
        let v = flow::hexagon_vertices(game)?;
        let c = game.gap_a(1, 2);
        Ok(Self {
            kind: SectionKind::A12xV1,
            normal: pb_normal(c),
            boundary_coord: Some(1),
            orientation: 0,
            chart: Some(Chart {
                origin: v[1].flat(),
                axis_a: [-0.5, 0.0, 0.5],
                axis_b: line_direction(c, [-1.0, 0.5, 0.5]),
            }),
            radius: 0.05,
            half_line_one: Some(HalfLineOne { player: Player::A, from: 1, to: 0, other: 0 }),
        })
    }

    /// B indifferent between 1 and 3, B on the side joining 1 and 2;
    /// origin (E^A, R^B_12).
    pub fn v2_b12(game: &GamePair) -> Result<Self> {
        let v = flow::hexagon_vertices(game)?;
        let c = game.gap_b(0, 2);
        Ok(Self {
            kind: SectionKind::V2xB12,
            normal: pa_normal(c),
            boundary_coord: Some(5),
            orientation: 0,
            chart: Some(Chart {
                origin: v[2].flat(),
                axis_a: line_direction(c, [1.0, -0.5, -0.5]),
                axis_b: [0.5, -0.5, 0.0],
            }),
            radius: 0.05,
            half_line_one: Some(HalfLineOne { player: Player::A, from: 0, to: 1, other: 1 }),
        })
    }

    /// Transversal disc through the hexagonal orbit at its first vertex.
    pub fn transversal_at_gamma(game: &GamePair) -> Result<Self> {
        let mut s = Self::v0_b31(game)?;
        s.kind = SectionKind::TransversalAtGamma;
        Ok(s)
    }

    fn f(&self, game: &GamePair, z: Vec6) -> f64 {
        let e = game.equilibrium.flat();
        dot6(self.normal, std::array::from_fn(|k| z[k] - e[k]))
    }
}

/// Global-section piece crossed by a leg's terminal event, if any.
fn global_piece(leg: &TrajectoryLeg) -> Option<usize> {
    let f = leg.firing;
    if f.player != Player::A {
        return None;
    }
    let other = match leg.targets.ib {
        Label::Pure(j) => j,
        Label::Mixed(_) => return None,
    };
    let pair = (f.from.min(f.to), f.from.max(f.to));
    match (other, pair) {
        (2, (0, 2)) => Some(0),
        (2, (1, 2)) => Some(1),
        (0, (0, 1)) => Some(2),
        (0, (0, 2)) => Some(3),
        _ => None,
    }
}

fn global_coords(game: &GamePair, s: &JointState, piece: usize) -> [f64; 2] {
    let (i, j) = [(0, 2), (1, 2), (0, 1), (0, 2)][piece];
    let dir = line_direction(game.gap_a(i, j), [1.0, 0.0, -1.0]);
    let da = sub(s.a(), game.ea());
    let db = sub(s.b(), game.eb());
    let w = crate::game::dot(db, dir);
    if w.abs() < 1e-300 {
        return [f64::NAN, f64::NAN];
    }
    [da[0] / w, da[1] / w]
}

fn half_line_sign(h: &HalfLineOne, leg: &TrajectoryLeg) -> i64 {
    let other = match h.player {
        Player::A => leg.targets.ib,
        Player::B => leg.targets.ia,
    };
    if leg.firing.player != h.player || other != Label::Pure(h.other) {
        return 0;
    }
    if (leg.firing.from, leg.firing.to) == (h.from, h.to) {
        1
    } else if (leg.firing.from, leg.firing.to) == (h.to, h.from) {
        -1
    } else {
        0
    }
}

/// Advance the induced flow from `b` and record `count` section crossings.
pub fn first_return(
    game: &GamePair,
    section: &SectionSpec,
    b: &BoundaryPoint,
    count: usize,
    max_events: usize,
) -> Result<Vec<SectionHit>> {
    let mut hits = Vec::with_capacity(count);
    let mut cur = *b;
    let mut transit = Transit { events_between: 0, winding: 0, itinerary_slice: Vec::new() };
    let mut events = 0usize;
    while hits.len() < count {
        if events >= max_events {
            return Err(Error::OrbitNotFound(format!(
                "only {} section crossings within {max_events} events",
                hits.len()
            )));
        }
        let leg = flow::step(game, &cur.state)?;
        events += 1;
        transit.events_between += 1;
        transit.itinerary_slice.push(leg.targets.labels());
        if let Some(h) = &section.half_line_one {
            transit.winding += half_line_sign(h, &leg);
        }
        if section.kind == SectionKind::GlobalS {
            if let Some(piece) = global_piece(&leg) {
                let p = project_to_boundary(&leg.end, &game.equilibrium)?;
                hits.push(SectionHit {
                    point: p,
                    section_coords: global_coords(game, &p.state, piece),
                    piece,
                    transit: std::mem::replace(
                        &mut transit,
                        Transit { events_between: 0, winding: 0, itinerary_slice: Vec::new() },
                    ),
                });
            }
        } else if let Some(p) = hyperplane_crossing(game, section, &leg)? {
            let coords = section.chart.map(|c| c.coords(&p.state)).unwrap_or([f64::NAN; 2]);
            hits.push(SectionHit {
                point: p,
                section_coords: coords,
                piece: 0,
                transit: std::mem::replace(
                    &mut transit,
                    Transit { events_between: 0, winding: 0, itinerary_slice: Vec::new() },
                ),
            });
        }
        cur = project_to_boundary(&leg.end, &game.equilibrium)?;
    }
    Ok(hits)
}

/// Crossing of a hyperplane section inside a straight leg (closed form),
/// projected to the boundary and filtered by piece and radius.
pub fn hyperplane_crossing(
    game: &GamePair,
    section: &SectionSpec,
    leg: &TrajectoryLeg,
) -> Result<Option<BoundaryPoint>> {
    let z0 = leg.start.flat();
    let z1 = leg.end.flat();
    let f0 = section.f(game, z0);
    let f1 = section.f(game, z1);
    let rising = f0 < 0.0 && f1 >= 0.0;
    let falling = f0 > 0.0 && f1 <= 0.0;
    let ok = match section.orientation {
        1 => rising,
        -1 => falling,
        _ => rising || falling,
    };
    if !ok {
        return Ok(None);
    }
    let s = f0 / (f0 - f1);
    let z: Vec6 = std::array::from_fn(|k| (1.0 - s) * z0[k] + s * z1[k]);
    let (a, b) = split(z);
    let st = JointState::from_parts(a, b, leg.start.time_t + s * leg.duration_t);
    let p = project_to_boundary(&st, &game.equilibrium)?;
    if let Some(k) = section.boundary_coord {
        if p.state.flat()[k] > 1e-9 {
            return Ok(None);
        }
    }
    if let Some(c) = &section.chart {
        let xy = c.coords(&p.state);
        if xy[0].abs() + xy[1].abs() > section.radius {
            return Ok(None);
        }
    }
    Ok(Some(p))
}

/// Image of a chart point of one section on the next section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntrySample {
    pub from_coords: [f64; 2],
    pub to_coords: [f64; 2],
    pub events: usize,
    pub winding: i64,
    /// True if the orbit used a strategy outside the leg's two-by-two block.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryMaps {
    pub epsilon: f64,
    pub r0: Vec<EntrySample>,
    pub r1: Vec<EntrySample>,
}

/// First entry from `from` to `to` starting at chart point `xy`.
pub fn entry_map(
    game: &GamePair,
    from: &SectionSpec,
    to: &SectionSpec,
    xy: [f64; 2],
    max_events: usize,
) -> Result<EntrySample> {
    let chart = from.chart.ok_or_else(|| Error::Precondition("section has no chart".into()))?;
    let start = project_to_boundary(&chart.point(xy), &game.equilibrium)?;
    let hits = first_return(game, to, &start, 1, max_events)?;
    let h = &hits[0];
    let allowed = block_labels(from.kind);
    let flagged = h.transit.itinerary_slice.iter().any(|l| !allowed.contains(l));
    Ok(EntrySample {
        from_coords: xy,
        to_coords: h.section_coords,
        events: h.transit.events_between,
        winding: h.transit.winding,
        flagged,
    })
}

fn block_labels(kind: SectionKind) -> Vec<(Label, Label)> {
    // strategies in play along the leg starting at the section
    let (a, b): (&[usize], &[usize]) = match kind {
        SectionKind::V0xB31 | SectionKind::TransversalAtGamma => (&[0, 2], &[0, 1]),
        SectionKind::A12xV1 => (&[0, 1], &[0, 1]),
        SectionKind::V2xB12 => (&[0, 1], &[1, 2]),
        SectionKind::GlobalS => (&[0, 1, 2], &[0, 1, 2]),
    };
    let mut out = Vec::new();
    for &i in a {
        for &j in b {
            out.push((Label::Pure(i), Label::Pure(j)));
        }
    }
    out
}

/// Sample the first-entry maps V0 -> V1 and V1 -> V2 at the four axis
/// points of sum-norm `epsilon`.
pub fn leg_entry_maps(game: &GamePair, epsilon: f64) -> Result<EntryMaps> {
    let s0 = SectionSpec::v0_b31(game)?;
    let s1 = SectionSpec::a12_v1(game)?;
    let s2 = SectionSpec::v2_b12(game)?;
    let pts = [[epsilon, 0.0], [0.0, -epsilon], [-epsilon, 0.0], [0.0, epsilon]];
    let budget = (400.0 / epsilon) as usize + 1000;
    let r0 = pts.iter().map(|&p| entry_map(game, &s0, &s1, p, budget)).collect::<Result<_>>()?;
    let r1 = pts.iter().map(|&p| entry_map(game, &s1, &s2, p, budget)).collect::<Result<_>>()?;
    Ok(EntryMaps { epsilon, r0, r1 })
}

/// Carry a point of the third section back to the first one through the
/// cyclic symmetry of the family.
pub fn identify_v2_with_v0(s: &JointState) -> JointState {
    JointState::from_parts(cyclic_unshift(s.a()), cyclic_unshift(s.b()), s.time_t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{random_interior, shapley_family, BARYCENTER};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_coordinate_ray() {
        let g = shapley_family(0.4).unwrap();
        let d = 0.01;
        let s = JointState::from_parts(BARYCENTER, [1.0 / 3.0 + d, 1.0 / 3.0, 1.0 / 3.0 - d], 0.0);
        let p = project_to_boundary(&s, &g.equilibrium).unwrap();
        assert!(p.state.b()[2].abs() < 1e-15);
        assert!((p.state.b()[0] - 2.0 / 3.0).abs() < 1e-12);
        let again = project_to_boundary(&p.state, &g.equilibrium).unwrap();
        assert!(again.state.sum_distance(&p.state) < 1e-14);
        assert!(project_to_boundary(&g.equilibrium, &g.equilibrium).is_err());
    }

    #[test]
    fn gamma_closes_for_all_parameters() {
        for k in 1..10 {
            let beta = k as f64 / 10.0;
            let g = shapley_family(beta).unwrap();
            let o = gamma_orbit(&g).unwrap();
            assert!(o.closure_residual < 1e-9);
            let names: Vec<String> = o.labels.iter().map(|(a, b)| format!("{a}{b}")).collect();
            let want = ["1̄1̄", "1̄2̄", "2̄2̄", "2̄3̄", "3̄3̄", "3̄1̄"];
            let off = want.iter().position(|w| *w == names[0]).unwrap();
            for n in 0..6 {
                assert_eq!(names[n], want[(off + n) % 6]);
            }
            assert_eq!(o.genuine.is_some(), beta > crate::game::SIGMA);
        }
    }

    #[test]
    fn genuine_orbit_lies_on_j() {
        let g = shapley_family(0.8).unwrap();
        let o = gamma_orbit(&g).unwrap();
        let pts = o.genuine.unwrap();
        for p in &pts {
            let t = flow::constrained_target(&g, p).unwrap();
            assert!(flow::jitter_residual(&g, p, &t) < 1e-9);
        }
    }

    #[test]
    fn hexagon_is_fixed_by_entry_maps() {
        let g = shapley_family(0.5).unwrap();
        let s0 = SectionSpec::v0_b31(&g).unwrap();
        let origin = s0.chart.unwrap();
        let v = flow::hexagon_vertices(&g).unwrap();
        assert!(l1(sub(origin.point([0.0, 0.0]).b(), v[0].b())) < 1e-15);
        // the third vertex is the cyclic image of the first
        let back = identify_v2_with_v0(&v[2]);
        assert!(back.sum_distance(&v[0]) < 1e-14);
    }

    #[test]
    fn shapley_return_on_global_section() {
        let g = shapley_family(0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = random_interior(&mut rng);
        let t = flow::simulate(&g, &s, &flow::Limits { max_events: 300, ..Default::default() }).unwrap();
        let b = project_to_boundary(&t.final_state().unwrap(), &g.equilibrium).unwrap();
        let hits = first_return(&g, &SectionSpec::global_s(), &b, 6, 1000).unwrap();
        // the Shapley cycle crosses two pieces per circuit and returns to a fixed chart point
        let same: Vec<_> = hits.iter().filter(|h| h.piece == hits[0].piece).collect();
        assert!(same.len() >= 2);
        let (p, q) = (same[0].section_coords, same[1].section_coords);
        assert!((p[0] - q[0]).abs() + (p[1] - q[1]).abs() < 1e-6);
    }

    #[test]
    fn entry_map_lands_on_next_quadrangle() {
        let beta = 0.5;
        let eps = 1e-4;
        let g = shapley_family(beta).unwrap();
        let s0 = SectionSpec::v0_b31(&g).unwrap();
        let s1 = SectionSpec::a12_v1(&g).unwrap();
        let c1 = (2.0 / 3.0) * (2.0 + beta) / (1.0 + beta + beta * beta) * eps;
        let smp = entry_map(&g, &s0, &s1, [c1, 0.0], 10_000_000).unwrap();
        assert!(!smp.flagged);
        let v1r0 = crate::analysis::corners::predicted(beta).expect("branch")[1];
        let q = crate::jitter::QuadrantLinearMap::new(v1r0.map(|x| x * eps)).unwrap();
        let r = q.normalized_radius(smp.to_coords);
        assert!((r - 1.0).abs() < 50.0 * eps, "normalized radius {r}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn projection_commutes_with_flow(seed in 0u64..100_000, beta in 0.05f64..0.95) {
            let g = shapley_family(beta).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_interior(&mut rng);
            let leg = flow::step(&g, &p).unwrap();
            let direct = project_to_boundary(&leg.end, &g.equilibrium).unwrap();
            let b = project_to_boundary(&p, &g.equilibrium).unwrap();
            let (ind, _) = induced_step(&g, &b).unwrap();
            prop_assert!(direct.state.sum_distance(&ind.state) <= 1e-9);
            prop_assert_eq!(flow::pure_targets(&g, &p), flow::pure_targets(&g, &b.state));
        }
    }

    #[test]
    fn generic_orbits_cross_global_section() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for k in 0..200 {
            let beta = 0.1 + 0.8 * (k as f64 / 200.0);
            let g = shapley_family(beta).unwrap();
            let p = random_interior(&mut rng);
            let b = project_to_boundary(&p, &g.equilibrium).unwrap();
            // a full circuit has at most a handful of events away from J
            let hits = first_return(&g, &SectionSpec::global_s(), &b, 1, 2000);
            assert!(hits.is_ok(), "beta {beta}: {hits:?}");
        }
    }
}
