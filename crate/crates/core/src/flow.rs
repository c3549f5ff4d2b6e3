//! Event-driven integration of the best-response flow.
//!
//! Along a leg both players head in straight lines to their targets,
//! p(u) = (1-u) p + u T. Payoffs are linear in the opponent's position,
//! so every indifference condition is linear in u and events are solved
//! in closed form; elapsed time is t = -ln(1-u).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{
    best_response_set, lerp, line_edge_point, sub, vertex, GamePair, JointState, Vec3, PAIRS,
};

/// Ties inside the integrator are much tighter than the classification
/// tolerance: event points are exact roots.
const FLOW_TIE: f64 = 1e-12;
const DERIV_TIE: f64 = 1e-12;
const MIN_U: f64 = 1e-15;
/// Distance to E below which a state counts as the equilibrium itself.
pub const AT_E: f64 = 1e-10;

/// A pure strategy k, or the mixed set omitting k (target on the edge
/// opposite vertex k). Indices are zero-based; display is one-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Pure(usize),
    Mixed(usize),
}

impl Label {
    pub fn is_pure(&self) -> bool {
        matches!(self, Label::Pure(_))
    }

    pub fn index(&self) -> usize {
        match self {
            Label::Pure(i) | Label::Mixed(i) => *i,
        }
    }

    /// Strategies in the support of the target.
    pub fn support(&self) -> Vec<usize> {
        match *self {
            Label::Pure(i) => vec![i],
            Label::Mixed(k) => (0..3).filter(|&i| i != k).collect(),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Pure(i) => write!(f, "{}", i + 1),
            Label::Mixed(i) => write!(f, "{}\u{304}", i + 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetPair {
    pub ia: Label,
    pub ib: Label,
    pub target_a: Vec3,
    pub target_b: Vec3,
}

impl TargetPair {
    pub fn pure(ia: usize, ib: usize) -> Self {
        Self {
            ia: Label::Pure(ia),
            ib: Label::Pure(ib),
            target_a: vertex(ia),
            target_b: vertex(ib),
        }
    }

    pub fn labels(&self) -> (Label, Label) {
        (self.ia, self.ib)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Player {
    A,
    B,
}

/// Which indifference fired: `player` becomes indifferent between its
/// current strategy `from` and the newcomer `to`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Firing {
    pub player: Player,
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HitEvent {
    pub u: f64,
    pub firing: Firing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLeg {
    pub start: JointState,
    pub end: JointState,
    pub targets: TargetPair,
    pub duration_t: f64,
    pub duration_u: f64,
    pub firing: Firing,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub legs: Vec<TrajectoryLeg>,
    pub terminated_at_e: bool,
}

impl Trajectory {
    pub fn final_state(&self) -> Option<JointState> {
        self.legs.last().map(|l| l.end)
    }

    pub fn labels(&self) -> Vec<(Label, Label)> {
        self.legs.iter().map(|l| l.targets.labels()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    pub max_events: usize,
    pub max_time_t: f64,
    pub stop_radius_at_e: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Self { max_events: 10_000, max_time_t: f64::INFINITY, stop_radius_at_e: 1e-9 }
    }
}

/// Pick among tied maximisers the one whose payoff grows fastest.
fn directed_choice(v: Vec3, dv: Vec3) -> usize {
    let set = best_response_set(v, FLOW_TIE);
    if set.len() == 1 {
        return set[0];
    }
    let dmax = set.iter().map(|&i| dv[i]).fold(f64::NEG_INFINITY, f64::max);
    let thr = DERIV_TIE * dmax.abs().max(1.0);
    *set.iter().find(|&&i| dv[i] >= dmax - thr).unwrap()
}

/// Strict best responses on the outgoing side of the state.
pub fn pure_targets(game: &GamePair, state: &JointState) -> TargetPair {
    let (pa, pb) = (state.a(), state.b());
    let va = game.payoff_a(pb);
    let vb = game.payoff_b(pa);
    for ia in 0..3 {
        for ib in 0..3 {
            let da = sub(game.payoff_a(vertex(ib)), va);
            let db = sub(game.payoff_b(vertex(ia)), vb);
            if directed_choice(va, da) == ia && directed_choice(vb, db) == ib {
                return TargetPair::pure(ia, ib);
            }
        }
    }
    // no consistent outgoing pair: fall back to plain argmax
    TargetPair::pure(best_response_set(va, 0.0)[0], best_response_set(vb, 0.0)[0])
}

fn first_root(v0: Vec3, v1: Vec3, support: &[usize]) -> Option<(f64, usize, usize)> {
    let rep = support[0];
    let dv = sub(v1, v0);
    let scale = v0.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let mut best: Option<(f64, usize, usize)> = None;
    for k in (0..3).filter(|k| !support.contains(k)) {
        let g0 = v0[k] - v0[rep];
        let g1 = dv[k] - dv[rep];
        if g1 > 0.0 && g0 <= FLOW_TIE * scale {
            let u = (-g0 / g1).max(0.0);
            if u > MIN_U && best.is_none_or(|b| u < b.0) {
                best = Some((u, rep, k));
            }
        }
    }
    best
}

/// Smallest u in (0,1) at which an inactive indifference becomes active.
pub fn hitting_event(game: &GamePair, state: &JointState, targets: &TargetPair) -> Result<HitEvent> {
    let (pa, pb) = (state.a(), state.b());
    let ra = first_root(
        game.payoff_a(pb),
        game.payoff_a(targets.target_b),
        &targets.ia.support(),
    );
    let rb = first_root(
        game.payoff_b(pa),
        game.payoff_b(targets.target_a),
        &targets.ib.support(),
    );
    let ev = match (ra, rb) {
        (Some(a), Some(b)) if b.0 < a.0 => (b, Player::B),
        (Some(a), _) => (a, Player::A),
        (None, Some(b)) => (b, Player::B),
        (None, None) => {
            return Err(Error::Integration(format!(
                "no switching event ahead of {:?} toward {:?}",
                state.flat(),
                targets
            )))
        }
    };
    let ((u, from, to), player) = ev;
    if u >= 1.0 {
        return Err(Error::Integration(format!("target vertex reached at u = {u}")));
    }
    Ok(HitEvent { u, firing: Firing { player, from, to } })
}

fn advance(state: &JointState, targets: &TargetPair, ev: HitEvent) -> TrajectoryLeg {
    let u = ev.u;
    let dt = -(-u).ln_1p();
    let end = JointState::from_parts(
        lerp(state.a(), targets.target_a, u),
        lerp(state.b(), targets.target_b, u),
        state.time_t + dt,
    );
    TrajectoryLeg {
        start: *state,
        end,
        targets: *targets,
        duration_t: dt,
        duration_u: u,
        firing: ev.firing,
    }
}

pub fn distance_to_e(game: &GamePair, state: &JointState) -> f64 {
    state.sum_distance(&game.equilibrium)
}

/// One leg of the unconstrained flow.
pub fn step(game: &GamePair, state: &JointState) -> Result<TrajectoryLeg> {
    if distance_to_e(game, state) <= AT_E {
        return Err(Error::AbsorbedAtEquilibrium);
    }
    let targets = pure_targets(game, state);
    let ev = hitting_event(game, state, &targets)?;
    Ok(advance(state, &targets, ev))
}

pub fn simulate(game: &GamePair, initial: &JointState, limits: &Limits) -> Result<Trajectory> {
    run(game, initial, limits, |g, s| step(g, s))
}

fn run<F>(game: &GamePair, initial: &JointState, limits: &Limits, mut stepper: F) -> Result<Trajectory>
where
    F: FnMut(&GamePair, &JointState) -> Result<TrajectoryLeg>,
{
    let mut traj = Trajectory::default();
    let mut state = *initial;
    let stop = limits.stop_radius_at_e.max(AT_E);
    while traj.legs.len() < limits.max_events && state.time_t < limits.max_time_t {
        if distance_to_e(game, &state) <= stop {
            traj.terminated_at_e = true;
            break;
        }
        let leg = stepper(game, &state)?;
        state = leg.end;
        traj.legs.push(leg);
    }
    if !traj.terminated_at_e && distance_to_e(game, &state) <= stop {
        traj.terminated_at_e = true;
    }
    Ok(traj)
}

/// Tied pair of a player (two strategies sharing the maximum), or all
/// three at the equilibrium point of the opponent.
fn tied(v: Vec3, tol: f64) -> Vec<usize> {
    best_response_set(v, tol)
}

/// Mixed target of one player on the edge spanned by `own` lying on the
/// opponent's indifference line for `opp`.
fn edge_target(gap: Vec3, own: (usize, usize)) -> Option<Vec3> {
    let missing = 3 - own.0 - own.1;
    line_edge_point(gap, missing)
}

/// Cone-targets for a state on a double-indifference set.
pub fn constrained_target(game: &GamePair, state: &JointState) -> Result<TargetPair> {
    const TOL: f64 = 1e-9;
    let ta = tied(game.payoff_a(state.b()), TOL);
    let tb = tied(game.payoff_b(state.a()), TOL);
    let (pa_pair, pb_pair) = match (ta.len(), tb.len()) {
        (2, 2) => ((ta[0], ta[1]), (tb[0], tb[1])),
        (3, 2) => {
            let q = (tb[0], tb[1]);
            (choose_pair_a(game, q)?, q)
        }
        (2, 3) => {
            let p = (ta[0], ta[1]);
            (p, choose_pair_b(game, p)?)
        }
        (3, 3) => return Err(Error::AbsorbedAtEquilibrium),
        _ => {
            return Err(Error::Precondition(format!(
                "state {:?} is not on a double-indifference set",
                state.flat()
            )))
        }
    };
    build_mixed(game, pa_pair, pb_pair)
        .ok_or_else(|| Error::Precondition("cone-target outside the simplex".into()))
}

fn build_mixed(game: &GamePair, pa_pair: (usize, usize), pb_pair: (usize, usize)) -> Option<TargetPair> {
    let target_a = edge_target(game.gap_b(pb_pair.0, pb_pair.1), pa_pair)?;
    let target_b = edge_target(game.gap_a(pa_pair.0, pa_pair.1), pb_pair)?;
    Some(TargetPair {
        ia: Label::Mixed(3 - pa_pair.0 - pa_pair.1),
        ib: Label::Mixed(3 - pb_pair.0 - pb_pair.1),
        target_a,
        target_b,
    })
}

/// A is indifferent between all three strategies; pick the pair that
/// stays on top once B leaves its equilibrium point.
fn choose_pair_a(game: &GamePair, pb_pair: (usize, usize)) -> Result<(usize, usize)> {
    let mut best: Option<((usize, usize), f64)> = None;
    for &p in PAIRS.iter() {
        if let Some(t) = build_mixed(game, p, pb_pair) {
            let v = game.payoff_a(t.target_b);
            let s = 3 - p.0 - p.1;
            let margin = v[p.0] - v[s];
            if margin > 1e-12 && best.is_none_or(|b| margin > b.1) {
                best = Some((p, margin));
            }
        }
    }
    best.map(|b| b.0)
        .ok_or_else(|| Error::Integration("no admissible pair leaving a triple tie".into()))
}

fn choose_pair_b(game: &GamePair, pa_pair: (usize, usize)) -> Result<(usize, usize)> {
    let mut best: Option<((usize, usize), f64)> = None;
    for &q in PAIRS.iter() {
        if let Some(t) = build_mixed(game, pa_pair, q) {
            let v = game.payoff_b(t.target_a);
            let s = 3 - q.0 - q.1;
            let margin = v[q.0] - v[s];
            if margin > 1e-12 && best.is_none_or(|b| margin > b.1) {
                best = Some((q, margin));
            }
        }
    }
    best.map(|b| b.0)
        .ok_or_else(|| Error::Integration("no admissible pair leaving a triple tie".into()))
}

/// One leg of the flow confined to the jitter set.
pub fn constrained_step(game: &GamePair, state: &JointState) -> Result<TrajectoryLeg> {
    if distance_to_e(game, state) <= AT_E {
        return Err(Error::AbsorbedAtEquilibrium);
    }
    let targets = constrained_target(game, state)?;
    let ev = hitting_event(game, state, &targets)?;
    let mut leg = advance(state, &targets, ev);
    // the player that fired sits exactly at its equilibrium point
    match ev.firing.player {
        Player::A => {
            leg.end.pb = game.equilibrium.pb;
        }
        Player::B => {
            leg.end.pa = game.equilibrium.pa;
        }
    }
    Ok(leg)
}

pub fn simulate_constrained(game: &GamePair, initial: &JointState, limits: &Limits) -> Result<Trajectory> {
    run(game, initial, limits, |g, s| constrained_step(g, s))
}

/// Constrained leg followed by projection through E onto the boundary.
pub fn constrained_induced_step(game: &GamePair, state: &JointState) -> Result<TrajectoryLeg> {
    let mut leg = constrained_step(game, state)?;
    let t = leg.end.time_t;
    let p = crate::induced::project_to_boundary(&leg.end, &game.equilibrium)?;
    leg.end = JointState::from_parts(p.state.a(), p.state.b(), t);
    Ok(leg)
}

/// Start of the hexagonal boundary orbit: A at its equilibrium point, B at
/// the end of A's 1-3 indifference line on the side omitting strategy 2.
pub fn hexagon_seed(game: &GamePair) -> Result<JointState> {
    let r = line_edge_point(game.gap_a(0, 2), 1)
        .ok_or_else(|| Error::DegenerateLine("A's 1-3 line misses the side [1,3]".into()))?;
    Ok(JointState::from_parts(game.ea(), r, 0.0))
}

/// The six vertices of the hexagonal orbit of the induced flow.
pub fn hexagon_vertices(game: &GamePair) -> Result<Vec<JointState>> {
    let seed = hexagon_seed(game)?;
    let mut s = seed;
    let mut out = Vec::with_capacity(6);
    for _ in 0..6 {
        out.push(s);
        s = constrained_induced_step(game, &s)?.end;
    }
    let res = s.sum_distance(&seed);
    if res > 1e-9 {
        return Err(Error::Closure(res));
    }
    Ok(out)
}

/// Residuals of the two indifference conditions that define the current
/// double-indifference set (zero on J).
pub fn jitter_residual(game: &GamePair, state: &JointState, targets: &TargetPair) -> f64 {
    let sa = targets.ia.support();
    let sb = targets.ib.support();
    let va = game.payoff_a(state.b());
    let vb = game.payoff_b(state.a());
    let ra = if sa.len() == 2 { (va[sa[0]] - va[sa[1]]).abs() } else { 0.0 };
    let rb = if sb.len() == 2 { (vb[sb[0]] - vb[sb[1]]).abs() } else { 0.0 };
    ra.max(rb)
}

/// Value of the firing indifference at the end of a leg.
pub fn firing_residual(game: &GamePair, leg: &TrajectoryLeg) -> f64 {
    let f = leg.firing;
    let v = match f.player {
        Player::A => game.payoff_a(leg.end.b()),
        Player::B => game.payoff_b(leg.end.a()),
    };
    (v[f.from] - v[f.to]).abs()
}

pub fn is_on_simplex(p: Vec3) -> bool {
    p.iter().all(|&x| x >= -1e-12) && (p.iter().sum::<f64>() - 1.0).abs() <= 1e-12
}

/// Zero-based pure-strategy pair of a leg, if both labels are pure.
pub fn pure_pair(leg: &TrajectoryLeg) -> Option<(usize, usize)> {
    match (leg.targets.ia, leg.targets.ib) {
        (Label::Pure(i), Label::Pure(j)) => Some((i, j)),
        _ => None,
    }
}
