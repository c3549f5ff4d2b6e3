//! Planar jitter-map model: diamond polar coordinates, axis-preserving
//! piecewise linear maps and solvers for orbits with prescribed winding.
//!
//! Angles are kept internally in quarter turns (a in [0,4)), so the
//! rotation by 2π/r becomes a shift by 4/r and no transcendental
//! function is needed. Orientation is clockwise: +x, -y, -x, +y.

pub mod real;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use real::{Big, Real};

pub type Pt<T> = [T; 2];

fn norm1<T: Real>(z: &Pt<T>) -> T {
    z[0].abs() + z[1].abs()
}

fn is_zero<T: Real>(z: &Pt<T>) -> bool {
    norm1(z) <= T::zero()
}

/// Angle in quarter turns, in [0,4). z must be nonzero.
fn angle<T: Real>(z: &Pt<T>) -> T {
    let r = norm1(z);
    let (x, y) = (z[0].clone(), z[1].clone());
    let zero = T::zero();
    if x > zero && y <= zero {
        -y / r
    } else if x <= zero && y < zero {
        T::one() + (-x) / r
    } else if x < zero && y >= zero {
        T::from_i64(2) + y / r
    } else {
        T::from_i64(3) + x / r
    }
}

fn wrap4<T: Real>(a: T) -> T {
    let four = T::from_i64(4);
    let w = a.clone() - four.clone() * (a / four.clone()).floor();
    if w >= four || w < T::zero() {
        T::zero()
    } else {
        w
    }
}

fn split_angle<T: Real>(a: &T) -> (usize, T) {
    let q = a.floor();
    let m = (q.to_f64() as i64).rem_euclid(4) as usize;
    (m, a.clone() - q)
}

fn from_angle<T: Real>(r: T, a: &T) -> Pt<T> {
    let (m, s) = split_angle(a);
    let u = r.clone() * (T::one() - s.clone());
    let v = r * s;
    match m {
        0 => [u, -v],
        1 => [-v, -u],
        2 => [-u, v],
        _ => [v, u],
    }
}

/// Sum-norm radius and clockwise diamond angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadPolar {
    pub r: f64,
    pub phi: f64,
}

impl QuadPolar {
    pub fn from_xy(z: [f64; 2]) -> Result<Self> {
        if is_zero(&z) {
            return Err(Error::Domain("angle undefined at the origin".into()));
        }
        Ok(Self { r: norm1(&z), phi: angle(&z) * std::f64::consts::FRAC_PI_2 })
    }

    pub fn to_xy(&self) -> [f64; 2] {
        from_angle(self.r, &wrap4(self.phi / std::f64::consts::FRAC_PI_2))
    }
}

/// Diamond rotation by `t` radians, clockwise.
pub fn quad_rotate(z: [f64; 2], t: f64) -> Result<[f64; 2]> {
    if is_zero(&z) {
        return Err(Error::Domain("rotation of the origin".into()));
    }
    Ok(rotate_quarters(&z, t / std::f64::consts::FRAC_PI_2))
}

fn rotate_quarters<T: Real>(z: &Pt<T>, t: T) -> Pt<T> {
    from_angle(norm1(z), &wrap4(angle(z) + t))
}

/// Linear on each quadrant, preserving the four half-axes.
/// `scales[m]` is the image length of the unit point on half-axis m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct QuadrantLinearMap {
    scales: [f64; 4],
}

impl TryFrom<[f64; 4]> for QuadrantLinearMap {
    type Error = Error;
    fn try_from(s: [f64; 4]) -> Result<Self> {
        Self::new(s)
    }
}

impl From<QuadrantLinearMap> for [f64; 4] {
    fn from(q: QuadrantLinearMap) -> Self {
        q.scales
    }
}

impl QuadrantLinearMap {
    pub fn new(scales: [f64; 4]) -> Result<Self> {
        if scales.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::Domain(format!("axis scales must be positive, got {scales:?}")));
        }
        Ok(Self { scales })
    }

    pub fn identity() -> Self {
        Self { scales: [1.0; 4] }
    }

    pub fn scales(&self) -> [f64; 4] {
        self.scales
    }

    pub fn apply<T: Real>(&self, z: &Pt<T>) -> Pt<T> {
        let sx = if z[0] >= T::zero() { self.scales[0] } else { self.scales[2] };
        let sy = if z[1] <= T::zero() { self.scales[1] } else { self.scales[3] };
        [z[0].clone() * T::from_f64(sx), z[1].clone() * T::from_f64(sy)]
    }

    pub fn inverse(&self) -> Self {
        Self { scales: self.scales.map(|s| 1.0 / s) }
    }

    /// A⁻¹z, dividing in the working precision.
    pub fn apply_inverse<T: Real>(&self, z: &Pt<T>) -> Pt<T> {
        let sx = if z[0] >= T::zero() { self.scales[0] } else { self.scales[2] };
        let sy = if z[1] <= T::zero() { self.scales[1] } else { self.scales[3] };
        [z[0].clone() / T::from_f64(sx), z[1].clone() / T::from_f64(sy)]
    }

    /// self ∘ other
    pub fn compose(&self, other: &Self) -> Self {
        Self { scales: std::array::from_fn(|m| self.scales[m] * other.scales[m]) }
    }

    /// other⁻¹ ∘ self
    pub fn div(&self, other: &Self) -> Self {
        Self { scales: std::array::from_fn(|m| self.scales[m] / other.scales[m]) }
    }

    /// ‖A(z)‖/‖z‖ at angle a (quarter turns).
    pub fn ratio<T: Real>(&self, a: &T) -> T {
        let (m, s) = split_angle(a);
        (T::one() - s.clone()) * T::from_f64(self.scales[m]) + s * T::from_f64(self.scales[(m + 1) % 4])
    }

    /// Angle of A(z) given the angle of z (quarter turns).
    pub fn psi<T: Real>(&self, a: &T) -> T {
        let (m, s) = split_angle(a);
        let rho = self.ratio(a);
        T::from_i64(m as i64) + s * T::from_f64(self.scales[(m + 1) % 4]) / rho
    }

    /// ‖A⁻¹ z‖: equals 1 exactly on the quadrangle with corners at the scales.
    pub fn normalized_radius(&self, z: [f64; 2]) -> f64 {
        norm1(&self.apply_inverse(&z))
    }

    pub fn ratio_range(&self) -> (f64, f64) {
        let lo = self.scales.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.scales.iter().cloned().fold(0.0, f64::max);
        (lo, hi)
    }
}

/// Bounded correction B(w) added to the winding angle 2π/‖w‖, in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhaseCorrection {
    #[default]
    Zero,
    /// B(w) = coef·‖w‖
    Linear { coef: f64 },
}

impl PhaseCorrection {
    fn quarters<T: Real>(&self, r: &T) -> T {
        match self {
            PhaseCorrection::Zero => T::zero(),
            PhaseCorrection::Linear { coef } => T::from_f64(*coef) * r.clone() * T::from_i64(2) / T::pi(),
        }
    }
}

/// F = A₁ ∘ R_θ ∘ A₀⁻¹, or with two stages
/// F = (A₃ ∘ R_θ ∘ A₂⁻¹) ∘ (A₁ ∘ R_θ ∘ A₀⁻¹).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JitterModel {
    pub a0: QuadrantLinearMap,
    pub a1: QuadrantLinearMap,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a2: Option<QuadrantLinearMap>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a3: Option<QuadrantLinearMap>,
    #[serde(default)]
    pub phase: PhaseCorrection,
    pub lambda: f64,
    pub mu: f64,
    pub n0: usize,
}

impl JitterModel {
    pub fn identity() -> Self {
        Self {
            a0: QuadrantLinearMap::identity(),
            a1: QuadrantLinearMap::identity(),
            a2: None,
            a3: None,
            phase: PhaseCorrection::Zero,
            lambda: 1.0,
            mu: 1.0,
            n0: 1,
        }
    }

    pub fn single(a0: QuadrantLinearMap, a1: QuadrantLinearMap, lambda: f64, mu: f64, n0: usize) -> Result<Self> {
        let m = Self { a0, a1, a2: None, a3: None, phase: PhaseCorrection::Zero, lambda, mu, n0 };
        m.validate()?;
        Ok(m)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s).map_err(|e| Error::Domain(format!("model file: {e}")))?;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.a2.is_some() != self.a3.is_some() {
            return Err(Error::Domain("a2 and a3 must be given together".into()));
        }
        if !(self.lambda > 0.0 && self.lambda <= self.mu) {
            return Err(Error::Domain("need 0 < lambda <= mu".into()));
        }
        let (lo, hi) = self.radius_ratio_range();
        if self.lambda < lo - 1e-12 || self.mu > hi + 1e-12 {
            return Err(Error::ModelViolation(format!(
                "(lambda, mu) = ({}, {}) not inside attainable ratios [{lo}, {hi}]",
                self.lambda, self.mu
            )));
        }
        Ok(())
    }

    fn pre(&self) -> Vec<QuadrantLinearMap> {
        match self.a2 {
            Some(a2) => vec![self.a0, a2],
            None => vec![self.a0],
        }
    }

    fn post(&self) -> Vec<QuadrantLinearMap> {
        match self.a3 {
            Some(a3) => vec![self.a1, a3],
            None => vec![self.a1],
        }
    }

    /// Stage maps in normalized coordinates w = A₀⁻¹z.
    pub fn stage_maps(&self) -> Vec<QuadrantLinearMap> {
        let pre = self.pre();
        let post = self.post();
        (0..pre.len()).map(|s| post[s].div(&pre[(s + 1) % pre.len()])).collect()
    }

    /// Interval of ‖A₀⁻¹F(z)‖/‖A₀⁻¹z‖ reachable by choice of angles.
    pub fn radius_ratio_range(&self) -> (f64, f64) {
        self.stage_maps().iter().fold((1.0, 1.0), |(lo, hi), m| {
            let (a, b) = m.ratio_range();
            (lo * a, hi * b)
        })
    }

    pub fn stages(&self) -> usize {
        self.pre().len()
    }

    /// ‖A₀⁻¹z‖, the radius that defines the annuli.
    pub fn radius<T: Real>(&self, z: &Pt<T>) -> T {
        norm1(&self.a0.apply_inverse(z))
    }

    pub fn to_normalized<T: Real>(&self, z: &Pt<T>) -> Pt<T> {
        self.a0.apply_inverse(z)
    }

    pub fn from_normalized<T: Real>(&self, w: &Pt<T>) -> Pt<T> {
        self.a0.apply(w)
    }
}

pub fn jitter_map(model: &JitterModel, z: [f64; 2]) -> Result<[f64; 2]> {
    jitter_map_t(model, &z)
}

pub fn jitter_map_t<T: Real>(model: &JitterModel, z: &Pt<T>) -> Result<Pt<T>> {
    if is_zero(z) {
        return Err(Error::Domain("jitter map undefined at the origin".into()));
    }
    let (pre, post) = (model.pre(), model.post());
    let mut cur = z.clone();
    for s in 0..pre.len() {
        let w = pre[s].apply_inverse(&cur);
        let r = norm1(&w);
        let theta = T::from_i64(4) / r.clone() + model.phase.quarters(&r);
        cur = post[s].apply(&rotate_quarters(&w, theta));
    }
    Ok(cur)
}

pub fn iterate_t<T: Real>(model: &JitterModel, z: &Pt<T>, n: usize) -> Result<Pt<T>> {
    let mut cur = z.clone();
    for _ in 0..n {
        cur = jitter_map_t(model, &cur)?;
    }
    Ok(cur)
}

fn dist<T: Real>(a: &Pt<T>, b: &Pt<T>) -> T {
    (a[0].clone() - b[0].clone()).abs() + (a[1].clone() - b[1].clone()).abs()
}

/// Even annulus index k with 1/(k+2) ≤ r ≤ 1/k; boundary ties go down.
fn annulus_of(r: f64) -> usize {
    let x = 1.0 / (2.0 * r);
    let f = x.floor();
    let k = 2 * f as usize;
    if f == x && k >= 2 {
        k - 2
    } else {
        k
    }
}

fn annulus_of_t<T: Real>(r: &T) -> usize {
    let x = T::one() / (T::from_i64(2) * r.clone());
    let f = x.floor();
    let k = 2 * f.to_f64() as usize;
    if f == x && k >= 2 {
        k - 2
    } else {
        k
    }
}

pub fn annulus_itinerary<T: Real>(model: &JitterModel, z: &Pt<T>, m: usize) -> Result<Vec<usize>> {
    let mut cur = z.clone();
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        if is_zero(&cur) {
            return Err(Error::Domain(format!("iterate {i} reached the origin")));
        }
        out.push(annulus_of_t(&model.radius(&cur)));
        if i + 1 < m {
            cur = jitter_map_t(model, &cur)?;
        }
    }
    Ok(out)
}

pub fn sensitivity_estimate(model: &JitterModel, z: [f64; 2], delta: f64, m: usize) -> Result<f64> {
    let mut a = z;
    let mut b = [z[0] + delta, z[1]];
    let mut worst = 1.0f64;
    for _ in 0..m {
        a = jitter_map(model, a)?;
        b = jitter_map(model, b)?;
        worst = worst.max(dist(&a, &b) / delta);
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// chain solver

#[derive(Debug, Clone, Copy)]
enum Branch {
    Slope,
    /// ratio constant on this quadrant; angle stays at its seed
    Flat,
}

fn pick_branch(map: &QuadrantLinearMap, q: f64) -> Option<(Branch, f64)> {
    let s = map.scales;
    let mut best: Option<(Branch, f64, f64)> = None;
    for m in 0..4 {
        let (a, b) = (s[m], s[(m + 1) % 4]);
        if (b - a).abs() < 1e-12 {
            if (q - a).abs() < 1e-9 && best.is_none() {
                best = Some((Branch::Flat, m as f64, -1.0));
            }
            continue;
        }
        let t = (q - a) / (b - a);
        if (0.0..=1.0).contains(&t) {
            let margin = t.min(1.0 - t);
            if best.as_ref().is_none_or(|x| margin > x.2) {
                best = Some((Branch::Slope, m as f64 + t, margin));
            }
        }
    }
    best.map(|(br, a, _)| (br, a))
}

/// Stage map scales post/pre formed in the working precision, so the
/// solver and the map agree to the last digit.
struct ExactStage<T> {
    s: [T; 4],
}

impl<T: Real> ExactStage<T> {
    fn of(model: &JitterModel) -> Vec<Self> {
        let (pre, post) = (model.pre(), model.post());
        (0..pre.len())
            .map(|k| {
                let (a, b) = (post[k].scales, pre[(k + 1) % pre.len()].scales);
                Self { s: std::array::from_fn(|m| T::from_f64(a[m]) / T::from_f64(b[m])) }
            })
            .collect()
    }

    fn ratio(&self, a: &T) -> T {
        let (m, t) = split_angle(a);
        (T::one() - t.clone()) * self.s[m].clone() + t * self.s[(m + 1) % 4].clone()
    }

    /// Unwrapped: psi(a + 4) = psi(a) + 4.
    fn psi(&self, a: &T) -> T {
        let q = a.floor();
        let m = (q.to_f64() as i64).rem_euclid(4) as usize;
        let t = a.clone() - q.clone();
        let rho = self.ratio(a);
        q + t * self.s[(m + 1) % 4].clone() / rho
    }

    fn solve_on(&self, quarter: i64, q: &T) -> Option<T> {
        let m = quarter.rem_euclid(4) as usize;
        let (a, b) = (self.s[m].clone(), self.s[(m + 1) % 4].clone());
        let d = b - a.clone();
        if d.abs() <= T::zero() {
            return None;
        }
        let t = (q.clone() - a) / d;
        (t >= T::zero() && t <= T::one()).then(|| T::from_i64(quarter) + t)
    }

    /// Angle with ratio q, staying on the current quadrant when possible and
    /// otherwise moving to the nearest one that attains q. Angles are not
    /// reduced mod 4, so crossing the positive x axis keeps the winding
    /// continuous.
    fn invert(&self, br: Branch, q: &T, seed: &T) -> Option<T> {
        if let Branch::Flat = br {
            return Some(seed.clone());
        }
        let base = seed.floor().to_f64() as i64;
        [0, 1, -1, 2].iter().find_map(|d| self.solve_on(base + d, q))
    }
}

#[derive(Debug, Clone)]
enum ChainMode<T> {
    Periodic,
    /// first angle fixed, last post-rotation angle free
    Open(T),
}

struct ChainSolution<T> {
    r: Vec<T>,
    phi: Vec<T>,
}

/// Solves r_i = 4/(χ_i − φ_i − b(r_i) + 4 m_i), χ_i = ρ⁻¹(r_{i+1}/r_i),
/// φ_{i+1} = ψ(χ_i) by Picard iteration over the post-rotation angles χ.
fn solve_chain<T: Real>(
    model: &JitterModel,
    stage_of: &[usize],
    windings: &[u64],
    mode: ChainMode<T>,
    tol: f64,
) -> Result<ChainSolution<T>> {
    let maps = model.stage_maps();
    let exact = ExactStage::<T>::of(model);
    let len = stage_of.len();
    let periodic = matches!(mode, ChainMode::Periodic);
    let links = if periodic { len } else { len - 1 };
    let mut branches = Vec::with_capacity(len);
    let mut chi: Vec<T> = Vec::with_capacity(len);
    for i in 0..len {
        let map = &maps[stage_of[i]];
        if i < links {
            let q = windings[i] as f64 / windings[(i + 1) % len] as f64;
            let (br, a) = pick_branch(map, q)
                .ok_or_else(|| Error::Solver(format!("ratio {q:.4} unreachable at step {i}")))?;
            branches.push(Some(br));
            chi.push(T::from_f64(a));
        } else {
            branches.push(None);
            chi.push(T::from_f64(0.5));
        }
    }
    let four = T::from_i64(4);
    let tol_t = T::from_f64(tol);
    let mut r: Vec<T> = windings.iter().map(|m| T::one() / T::from_i64(*m as i64)).collect();
    let mut phi: Vec<T> = vec![T::zero(); len];
    for _iter in 0..3000 {
        for i in 0..len {
            phi[i] = if i == 0 {
                match &mode {
                    ChainMode::Periodic => exact[stage_of[len - 1]].psi(&chi[len - 1]),
                    ChainMode::Open(p0) => p0.clone(),
                }
            } else {
                exact[stage_of[i - 1]].psi(&chi[i - 1])
            };
            let d = chi[i].clone() - phi[i].clone() + four.clone() * T::from_i64(windings[i] as i64)
                - model.phase.quarters(&r[i]);
            if d <= T::zero() {
                return Err(Error::Solver("nonpositive winding".into()));
            }
            r[i] = four.clone() / d;
        }
        let mut change = T::zero();
        for i in 0..links {
            let q = r[(i + 1) % len].clone() / r[i].clone();
            let br = branches[i].expect("linked step");
            let next = exact[stage_of[i]]
                .invert(br, &q, &chi[i])
                .ok_or_else(|| Error::Solver(format!("angle left its quadrant at step {i}")))?;
            change = T::max_of(change, (next.clone() - chi[i].clone()).abs());
            chi[i] = next;
        }
        if change <= tol_t {
            // refresh radii against the final angles
            for i in 0..len {
                if i > 0 || periodic {
                    let j = if i == 0 { len - 1 } else { i - 1 };
                    phi[i] = exact[stage_of[j]].psi(&chi[j]);
                }
                let d = chi[i].clone() - phi[i].clone() + four.clone() * T::from_i64(windings[i] as i64)
                    - model.phase.quarters(&r[i]);
                r[i] = four.clone() / d;
            }
            return Ok(ChainSolution { r, phi });
        }
    }
    Err(Error::Solver("angle iteration did not settle".into()))
}

/// Rotation counts for each stage step of an F-level radius schedule.
fn stage_windings(model: &JitterModel, outer: &[u64], periodic: bool) -> Result<(Vec<usize>, Vec<u64>)> {
    let maps = model.stage_maps();
    let stages = maps.len();
    let mut stage_of = Vec::new();
    let mut wind = Vec::new();
    let n = outer.len();
    let links = if periodic { n } else { n.saturating_sub(1) };
    for i in 0..n {
        stage_of.push(0);
        wind.push(outer[i]);
        if stages == 2 && i < links {
            let q_total = outer[i] as f64 / outer[(i + 1) % n] as f64;
            let (lo0, hi0) = maps[0].ratio_range();
            let (lo1, hi1) = maps[1].ratio_range();
            let lo = lo0.max(q_total / hi1);
            let hi = hi0.min(q_total / lo1);
            if lo > hi {
                return Err(Error::Solver(format!("ratio {q_total:.4} unreachable by two stages")));
            }
            let mid = (lo * hi).sqrt();
            let m = ((outer[i] as f64) / mid).round().max(1.0) as u64;
            stage_of.push(1);
            wind.push(m);
        }
    }
    Ok((stage_of, wind))
}

fn solver_tol<T: Real>() -> f64 {
    if T::one() + T::from_f64(1e-30) > T::one() {
        1e-140
    } else {
        1e-15
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AnnulusFixedPoint {
    pub k: usize,
    pub point: Option<[f64; 2]>,
    pub radius: Option<f64>,
    pub residual: Option<f64>,
    pub diagnostic: Option<String>,
}

/// One fixed point of F per annulus index k (radius in (1/(k+2), 1/k)).
pub fn find_fixed_points(model: &JitterModel, k_lo: usize, k_hi: usize) -> Result<Vec<AnnulusFixedPoint>> {
    if k_lo < model.n0 || k_lo > k_hi {
        return Err(Error::Precondition(format!("need N0 = {} <= k_lo <= k_hi", model.n0)));
    }
    if !(model.lambda <= 1.0 && 1.0 <= model.mu) {
        return Err(Error::Precondition("unit ratio outside (lambda, mu)".into()));
    }
    Ok((k_lo..=k_hi)
        .map(|k| match periodic_in::<f64>(model, &[k as u64 + 1]) {
            Ok((pts, radii, residual)) => AnnulusFixedPoint {
                k,
                point: Some(pts[0]),
                radius: Some(radii[0]),
                residual: Some(residual),
                diagnostic: None,
            },
            Err(e) => AnnulusFixedPoint { k, point: None, radius: None, residual: None, diagnostic: Some(e.to_string()) },
        })
        .collect())
}

const FIXED_TOL: f64 = 1e-9;
const PERIODIC_TOL: f64 = 1e-8;

/// Solve, rebuild and verify a periodic orbit with prescribed F-level windings.
fn periodic_in<T: Real>(model: &JitterModel, outer: &[u64]) -> Result<(Vec<[f64; 2]>, Vec<f64>, f64)> {
    let (pts, radii, residual) = periodic_points::<T>(model, outer)?;
    let bound = if outer.len() == 1 { FIXED_TOL } else { PERIODIC_TOL };
    if !(residual <= bound) {
        return Err(Error::Solver(format!("orbit residual {residual:e} above {bound:e}")));
    }
    Ok((pts.iter().map(|p| [p[0].to_f64(), p[1].to_f64()]).collect(), radii, residual))
}

fn periodic_points<T: Real>(model: &JitterModel, outer: &[u64]) -> Result<(Vec<Pt<T>>, Vec<f64>, f64)> {
    let (stage_of, wind) = stage_windings(model, outer, true)?;
    let sol = solve_chain::<T>(model, &stage_of, &wind, ChainMode::Periodic, solver_tol::<T>())?;
    let step = model.stages();
    let pts: Vec<Pt<T>> = (0..outer.len())
        .map(|i| model.from_normalized(&from_angle(sol.r[i * step].clone(), &sol.phi[i * step])))
        .collect();
    let mut residual = 0.0f64;
    for i in 0..pts.len() {
        let img = jitter_map_t(model, &pts[i])?;
        residual = residual.max(dist(&img, &pts[(i + 1) % pts.len()]).to_f64());
    }
    let back = iterate_t(model, &pts[0], pts.len())?;
    residual = residual.max(dist(&back, &pts[0]).to_f64());
    let radii = (0..outer.len()).map(|i| sol.r[i * step].to_f64()).collect();
    Ok((pts, radii, residual))
}

#[derive(Debug, Clone, Serialize)]
pub struct PeriodicOrbit {
    pub period: usize,
    pub points: Vec<[f64; 2]>,
    pub radii: Vec<f64>,
    /// even annulus index of each radius
    pub annuli: Vec<usize>,
    /// full turns of the rotation at each point
    pub windings: Vec<u64>,
    /// realized r_{i+1}/r_i along the orbit
    pub ratios: Vec<f64>,
    pub residual: f64,
}

/// Period-n orbit whose successive radius ratios follow `a_seed` up to the
/// integer winding grid; starting winding grows on failure.
pub fn find_periodic_orbit(model: &JitterModel, n: usize, a_seed: &[f64]) -> Result<PeriodicOrbit> {
    if n == 0 || a_seed.len() != n {
        return Err(Error::Precondition("need n ratios".into()));
    }
    let prod: f64 = a_seed.iter().product();
    if (prod - 1.0).abs() > 1e-9 {
        return Err(Error::Precondition(format!("ratio product {prod} is not 1")));
    }
    if a_seed.iter().any(|a| *a < model.lambda - 1e-12 || *a > model.mu + 1e-12) {
        return Err(Error::Precondition("ratio outside (lambda, mu)".into()));
    }
    let mut last = Error::OrbitNotFound("no start tried".into());
    let mut base = model.n0.max(1) as f64;
    for _ in 0..5 {
        let mut outer = Vec::with_capacity(n);
        let mut m = base + 1.0;
        for a in a_seed {
            outer.push(m.round() as u64);
            m /= a;
        }
        match periodic_in::<Big>(model, &outer) {
            Ok((points, radii, residual)) => {
                let ratios = (0..n).map(|i| radii[(i + 1) % n] / radii[i]).collect();
                let annuli = radii.iter().map(|r| annulus_of(*r)).collect();
                return Ok(PeriodicOrbit { period: n, points, radii, annuli, windings: outer, ratios, residual });
            }
            Err(e) => last = e,
        }
        base *= 2.0;
    }
    Err(last)
}

#[derive(Debug, Clone, Serialize)]
pub struct Realization {
    pub z: [f64; 2],
    pub radii: Vec<f64>,
    /// δ_i with 1/(k_i+1+δ_i) < r_i < 1/(k_i+δ_i)
    pub deltas: Vec<f64>,
    /// even-annulus itinerary of the high-precision orbit
    pub realized: Vec<usize>,
    #[serde(skip)]
    pub exact: [Big; 2],
}

/// Point whose first m iterates visit the annuli k_0, .., k_{m-1}.
pub fn realize_itinerary(model: &JitterModel, ks: &[usize]) -> Result<Realization> {
    if ks.is_empty() {
        return Err(Error::Precondition("empty itinerary".into()));
    }
    if let Some(k) = ks.iter().find(|k| **k < model.n0) {
        return Err(Error::Precondition(format!("annulus {k} below N0 = {}", model.n0)));
    }
    for w in ks.windows(2) {
        // radii scale like 1/k, so the radius ratio is k_i/k_{i+1}
        let t = w[0] as f64 / w[1] as f64;
        if t < model.lambda - 1e-12 || t > model.mu + 1e-12 {
            return Err(Error::Precondition(format!("step {} -> {} outside (lambda, mu)", w[0], w[1])));
        }
    }
    let outer: Vec<u64> = ks.iter().map(|k| *k as u64 + 1).collect();
    let (stage_of, wind) = stage_windings(model, &outer, false)?;
    let len = model.stages() * (ks.len() - 1) + 1;
    let sol = solve_chain::<Big>(model, &stage_of[..len], &wind[..len], ChainMode::Open(Big::zero()), solver_tol::<Big>())?;
    let step = model.stages();
    let exact = model.from_normalized(&from_angle(sol.r[0].clone(), &sol.phi[0]));
    let mut radii = Vec::with_capacity(ks.len());
    let mut cur = exact.clone();
    for (i, k) in ks.iter().enumerate() {
        let r = model.radius(&cur);
        let expect = sol.r[i * step].to_f64();
        let rf = r.to_f64();
        if (rf - expect).abs() > 1e-9 * expect {
            return Err(Error::Solver(format!("iterate {i} radius {rf} differs from solved {expect}")));
        }
        let inv = 1.0 / rf;
        if !(inv > *k as f64 && inv < *k as f64 + 2.0) {
            return Err(Error::Solver(format!("iterate {i} left annulus {k}")));
        }
        radii.push(rf);
        if i + 1 < ks.len() {
            cur = jitter_map_t(model, &cur)?;
        }
    }
    let deltas = radii.iter().zip(ks).map(|(r, k)| (1.0 / r - *k as f64) / 2.0).collect();
    let realized = annulus_itinerary(model, &exact, ks.len())?;
    Ok(Realization { z: [exact[0].to_f64(), exact[1].to_f64()], radii, deltas, realized, exact })
}

/// Fraction of starts in Ann_{N0} whose annulus itineraries split from a
/// neighbour `delta` away within m iterates.
pub fn divergence_fraction<R: rand::Rng>(model: &JitterModel, samples: usize, delta: f64, m: usize, rng: &mut R) -> Result<f64> {
    let k = model.n0 as f64;
    let mut split = 0usize;
    for _ in 0..samples {
        let inv = rng.random_range(k + 0.05..k + 1.95);
        let a: f64 = rng.random_range(0.0..4.0);
        let z = model.from_normalized(&from_angle(1.0 / inv, &a));
        let z2 = [z[0] + delta, z[1]];
        if annulus_itinerary(model, &z, m)? != annulus_itinerary(model, &z2, m)? {
            split += 1;
        }
    }
    Ok(split as f64 / samples as f64)
}

/// Random itinerary that stays in Ann_k, N0 ≤ k ≤ N0 + 2·span, with every
/// step ratio k_i/k_{i+1} inside [lambda, mu].
pub fn random_admissible_itinerary<R: rand::Rng>(model: &JitterModel, m: usize, span: usize, rng: &mut R) -> Vec<usize> {
    let n0 = model.n0 + model.n0 % 2;
    let mut k = n0 + 2 * rng.random_range(0..=span);
    let mut out = Vec::with_capacity(m);
    for _ in 0..m {
        out.push(k);
        let next: Vec<usize> = (0..=span)
            .map(|j| n0 + 2 * j)
            .filter(|n| {
                let t = k as f64 / *n as f64;
                t >= model.lambda && t <= model.mu
            })
            .collect();
        k = next[rng.random_range(0..next.len())];
    }
    out
}

/// Iterates realized exactly per sample. Splits show up within a handful of
/// steps, and a split inside the window is a split within m.
const REALIZE_WINDOW: usize = 30;

/// Fraction of orbits on the invariant set whose annulus itinerary differs
/// from that of a neighbour `delta` away within m iterates. Base points
/// come from realizing random admissible itineraries in extended
/// precision; only the first `min(m, 30)` iterates are compared, which can
/// undercount but never overcount.
pub fn invariant_divergence_fraction<R: rand::Rng>(
    model: &JitterModel,
    samples: usize,
    delta: f64,
    m: usize,
    rng: &mut R,
) -> Result<f64> {
    use rayon::prelude::*;
    let window = m.min(REALIZE_WINDOW);
    let plans: Vec<Vec<usize>> = (0..samples).map(|_| random_admissible_itinerary(model, m, 10, rng)).collect();
    let split: Vec<bool> = plans
        .par_iter()
        .map(|ks| -> Result<bool> {
            let real = realize_itinerary(model, &ks[..window])?;
            let moved = [real.exact[0].clone() + Big::from_f64(delta), real.exact[1].clone()];
            Ok(annulus_itinerary(model, &moved, window)? != real.realized)
        })
        .collect::<Result<_>>()?;
    Ok(split.iter().filter(|s| **s).count() as f64 / samples.max(1) as f64)
}

/// Even annulus index of a normalized radius.
pub fn annulus_index(r: f64) -> usize {
    annulus_of(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use std::f64::consts::PI;

    fn shear() -> JitterModel {
        let a1 = QuadrantLinearMap::new([0.6, 1.5, 0.6, 1.5]).unwrap();
        JitterModel::single(QuadrantLinearMap::identity(), a1, 0.6, 1.5, 8).unwrap()
    }

    #[test]
    fn rotation_examples() {
        let h = quad_rotate([1.0, 0.0], PI).unwrap();
        assert!((h[0] + 1.0).abs() < 1e-15 && h[1].abs() < 1e-15);
        let q = quad_rotate([1.0, 0.0], PI / 2.0).unwrap();
        assert!(q[0].abs() < 1e-15 && (q[1] + 1.0).abs() < 1e-15);
        assert!(quad_rotate([0.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn identity_full_and_half_turns() {
        let m = JitterModel::identity();
        for k in 1..20 {
            let z = [1.0 / k as f64, 0.0];
            let f = jitter_map(&m, z).unwrap();
            assert!(dist(&f, &z) < 1e-12);
            let z = [2.0 / (2 * k + 1) as f64, 0.0];
            let f = jitter_map(&m, z).unwrap();
            assert!((f[0] + z[0]).abs() < 1e-12 && f[1].abs() < 1e-12);
        }
    }

    #[test]
    fn identity_fixed_points_on_unit_fractions() {
        let fps = find_fixed_points(&JitterModel::identity(), 5, 12).unwrap();
        for fp in fps {
            let p = fp.point.unwrap();
            assert!((p[0] - 1.0 / (fp.k as f64 + 1.0)).abs() < 1e-14);
            assert_eq!(p[1], 0.0);
            assert_eq!(annulus_index(fp.radius.unwrap()) / 2, fp.k / 2);
        }
    }

    #[test]
    fn shear_fixed_points_accumulate() {
        let fps = find_fixed_points(&shear(), 10, 30).unwrap();
        let mut last = f64::INFINITY;
        for fp in &fps {
            let r = fp.radius.expect("every annulus has one");
            assert!(fp.residual.unwrap() <= 1e-9);
            assert!(r < last && r > 1.0 / (fp.k as f64 + 2.0) && r < 1.0 / fp.k as f64);
            last = r;
        }
    }

    #[test]
    fn period_one_matches_fixed_point() {
        let m = shear();
        let orb = find_periodic_orbit(&m, 1, &[1.0]).unwrap();
        let k = orb.windings[0] as usize - 1;
        let fp = &find_fixed_points(&m, k, k).unwrap()[0];
        assert!(dist(&orb.points[0], &fp.point.unwrap()) < 1e-12);
    }

    #[test]
    fn period_three_on_shear() {
        let orb = find_periodic_orbit(&shear(), 3, &[1.2, 1.2, 1.0 / 1.44]).unwrap();
        assert!(orb.residual <= 1e-8);
        // radius ratios follow the winding grid r_i ≈ 1/(k_i+1)
        for i in 0..3 {
            let j = (i + 1) % 3;
            let grid = orb.windings[i] as f64 / orb.windings[j] as f64;
            assert!((orb.ratios[i] / grid - 1.0).abs() < 2.0 / orb.windings[i] as f64);
            assert_eq!(orb.annuli[i], annulus_of(orb.radii[i]));
        }
        let p: f64 = orb.ratios.iter().product();
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn alternating_itinerary_round_trips() {
        let m = shear();
        let ks: Vec<usize> = (0..20).map(|i| if i % 2 == 0 { 20 } else { 22 }).collect();
        let real = realize_itinerary(&m, &ks).unwrap();
        assert_eq!(real.realized, ks);
        assert!(real.deltas.iter().all(|d| *d > 0.0 && *d < 1.0));
        // the f64 image of the point cannot follow 20 expanding steps
        assert!(annulus_itinerary(&m, &real.z, 2).unwrap()[..2] == ks[..2]);
    }

    #[test]
    fn inadmissible_itinerary_rejected() {
        let m = shear();
        assert!(matches!(realize_itinerary(&m, &[20, 40]), Err(Error::Precondition(_))));
        assert!(matches!(realize_itinerary(&m, &[4, 4]), Err(Error::Precondition(_))));
    }

    #[test]
    fn fixed_point_itinerary_is_constant() {
        let m = shear();
        let fp = &find_fixed_points(&m, 20, 20).unwrap()[0];
        let k = annulus_index(fp.radius.unwrap());
        assert_eq!(annulus_itinerary(&m, &fp.point.unwrap(), 3).unwrap(), vec![k; 3]);
    }

    #[test]
    fn sensitivity_matches_radial_derivative() {
        // identity model: a radial nudge δ turns the angle back by 4δ/r²
        // quarter turns, which moves a vertex point 2r per quarter turn
        // against the δ it gained along the axis
        let m = JitterModel::identity();
        let r = 1.0 / 7.0;
        let delta = 1e-10;
        let f = sensitivity_estimate(&m, [r, 0.0], delta, 1).unwrap();
        let predicted = 8.0 / r - 1.0;
        assert!((f - predicted).abs() / predicted < 1e-3, "{f} vs {predicted}");
    }

    #[test]
    fn model_json_round_trip() {
        let m = shear();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(JitterModel::from_json(&s).unwrap(), m);
        assert!(JitterModel::from_json(r#"{"a0":[1,1,1,-1],"a1":[1,1,1,1],"lambda":1,"mu":1,"n0":1}"#).is_err());
    }

    #[test]
    fn divergence_in_shear_model() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let f = divergence_fraction(&shear(), 50, 1e-12, 50, &mut rng).unwrap();
        assert!(f >= 0.9, "{f}");
    }

    proptest! {
        #[test]
        fn polar_round_trip(x in -5.0f64..5.0, y in -5.0f64..5.0) {
            prop_assume!(x.abs() + y.abs() > 1e-6);
            let p = QuadPolar::from_xy([x, y]).unwrap();
            prop_assert!(p.phi >= 0.0 && p.phi < 2.0 * PI);
            let b = p.to_xy();
            prop_assert!((b[0] - x).abs() + (b[1] - y).abs() <= 1e-12 * (1.0 + p.r));
        }

        #[test]
        fn rotation_group_law(x in -3.0f64..3.0, y in -3.0f64..3.0, s in -10.0f64..10.0, t in -10.0f64..10.0) {
            prop_assume!(x.abs() + y.abs() > 1e-3);
            let z = [x, y];
            let a = quad_rotate(quad_rotate(z, s).unwrap(), t).unwrap();
            let b = quad_rotate(z, s + t).unwrap();
            let r = x.abs() + y.abs();
            prop_assert!((a[0].abs() + a[1].abs() - r).abs() <= 1e-14 * r.max(1.0));
            prop_assert!(dist(&a, &b) <= 1e-12 * r.max(1.0));
            prop_assert!(dist(&quad_rotate(z, 0.0).unwrap(), &z) <= 1e-15 * r.max(1.0));
        }

        #[test]
        fn quadrant_map_keeps_arclength_fraction(
            s in prop::array::uniform4(0.2f64..5.0), x in -2.0f64..2.0, y in -2.0f64..2.0
        ) {
            prop_assume!(x.abs() + y.abs() > 1e-6);
            let q = QuadrantLinearMap::new(s).unwrap();
            let z = [x, y];
            let a = angle(&z);
            let img = q.apply(&z);
            // the image angle and radius follow psi and ratio
            prop_assert!((angle(&img) - q.psi(&a)).abs() < 1e-12 || (angle(&img) - q.psi(&a)).abs() > 4.0 - 1e-12);
            prop_assert!((norm1(&img) - norm1(&z) * q.ratio(&a)).abs() < 1e-12 * norm1(&img).max(1.0));
            // relative position along a quadrangle edge is preserved after normalizing
            let back = q.inverse().apply(&img);
            prop_assert!(dist(&back, &z) < 1e-12);
            prop_assert!((q.normalized_radius(img) - norm1(&z)).abs() < 1e-12);
        }
    }
}
