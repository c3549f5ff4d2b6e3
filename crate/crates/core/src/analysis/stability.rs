//! Linear stability of the periodic orbits of the induced flow.
//!
//! Along a cycle of pure target pairs every leg acts linearly on the
//! displacement d = p - E up to a positive factor, so one circuit is a
//! projective map of the directions. The orbit is an eigendirection and
//! the return map on a section has the remaining eigenvalues divided by
//! the radial one.

use nalgebra::{Complex, Matrix4, SMatrix, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow;
use crate::game::{shapley_family, vertex, GamePair, JointState, SIGMA};
use crate::induced::boundary_scale;

type Vec6 = [f64; 6];
type Mat6 = SMatrix<f64, 6, 6>;
type Mat64 = SMatrix<f64, 6, 4>;

pub const SHAPLEY: [(usize, usize); 6] = [(0, 1), (1, 1), (1, 2), (2, 2), (2, 0), (0, 0)];
pub const ANTI_SHAPLEY: [(usize, usize); 6] = [(0, 2), (0, 1), (2, 1), (2, 0), (1, 0), (1, 2)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrbitId {
    Shapley,
    AntiShapley,
    Gamma,
}

impl OrbitId {
    pub fn cycle(&self) -> Option<[(usize, usize); 6]> {
        match self {
            OrbitId::Shapley => Some(SHAPLEY),
            OrbitId::AntiShapley => Some(ANTI_SHAPLEY),
            OrbitId::Gamma => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Attracting,
    Saddle,
    Repelling,
    Jitter,
}

impl Classification {
    fn from_moduli(m: [f64; 2]) -> Self {
        match (m[0] < 1.0, m[1] < 1.0) {
            (true, true) => Classification::Attracting,
            (false, false) => Classification::Repelling,
            _ => Classification::Saddle,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub orbit_id: OrbitId,
    pub beta: Option<f64>,
    /// (re, im) of the return-map eigenvalues
    pub eigenvalues: Option<[(f64, f64); 2]>,
    pub moduli: Option<[f64; 2]>,
    /// same from the exact cycle matrix
    pub analytic_moduli: Option<[f64; 2]>,
    /// eigenvalue of the (unnormalized) cycle matrix along the orbit
    pub radial_factor: Option<f64>,
    pub jacobian: Option<[[f64; 2]; 2]>,
    /// relative gap between the step-h and step-h/2 Jacobians
    pub richardson_gap: Option<f64>,
    /// boundary point of the orbit on the section
    pub fixed_point: Option<JointState>,
    pub classification: Classification,
}

fn functional(game: &GamePair, from: (usize, usize), to: (usize, usize)) -> Vec6 {
    let mut g = [0.0; 6];
    if to.0 != from.0 {
        let v = game.gap_a(to.0, from.0);
        g[3..].copy_from_slice(&v);
    } else {
        let v = game.gap_b(to.1, from.1);
        g[..3].copy_from_slice(&v);
    }
    g
}

fn target(pair: (usize, usize)) -> Vec6 {
    let (a, b) = (vertex(pair.0), vertex(pair.1));
    [a[0], a[1], a[2], b[0], b[1], b[2]]
}

fn dot6(a: &Vec6, b: &Vec6) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Projective action of one circuit on displacements from E.
pub fn cycle_matrix(game: &GamePair, cycle: &[(usize, usize)]) -> Mat6 {
    let e = game.equilibrium.flat();
    let n = cycle.len();
    let mut m = Mat6::identity();
    for k in 0..n {
        let g = functional(game, cycle[k], cycle[(k + 1) % n]);
        let t = target(cycle[k]);
        let gt = dot6(&g, &t);
        let mut l = Mat6::identity() * -gt;
        for i in 0..6 {
            for j in 0..6 {
                l[(i, j)] += (t[i] - e[i]) * g[j];
            }
        }
        m = l * m;
    }
    m
}

fn diff_basis() -> Mat64 {
    let mut d = Mat64::zeros();
    for p in 0..2 {
        d[(3 * p, 2 * p)] = 1.0;
        d[(3 * p + 1, 2 * p)] = -1.0;
        d[(3 * p + 1, 2 * p + 1)] = 1.0;
        d[(3 * p + 2, 2 * p + 1)] = -1.0;
    }
    d
}

struct Spectrum {
    radial: f64,
    direction: Vec6,
    section: [Complex<f64>; 2],
}

fn spectrum(game: &GamePair, cycle: &[(usize, usize)]) -> Result<Spectrum> {
    let m = cycle_matrix(game, cycle);
    let d = diff_basis();
    let dt = d.transpose();
    let x: Matrix4<f64> = (dt * d).try_inverse().expect("basis") * dt * m * d;
    let mut ev: Vec<Complex<f64>> = x.complex_eigenvalues().iter().cloned().collect();
    ev.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    // the leg matrices annihilate one direction
    ev.remove(0);
    let scale = ev.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let pos = ev
        .iter()
        .enumerate()
        .filter(|(_, z)| z.im.abs() <= 1e-9 * scale && z.re > 0.0)
        .max_by(|a, b| a.1.re.total_cmp(&b.1.re))
        .map(|(i, z)| (i, z.re))
        .ok_or_else(|| Error::OrbitNotFound("no positive real radial eigenvalue".into()))?;
    let radial = pos.1;
    ev.remove(pos.0);
    let svd = (x - Matrix4::identity() * radial).svd(false, true);
    let vt = svd.v_t.expect("requested");
    let (imin, _) = svd.singular_values.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    let v: Vector4<f64> = vt.row(imin).transpose();
    let dv = d * v;
    let direction = std::array::from_fn(|k| dv[k]);
    Ok(Spectrum { radial, direction, section: [ev[0] / radial, ev[1] / radial] })
}

/// Return-map eigenvalues from the cycle matrix, without simulation.
pub fn analytic_eigenvalues(game: &GamePair, orbit: OrbitId) -> Result<[Complex<f64>; 2]> {
    let cycle = orbit.cycle().ok_or_else(|| Error::Precondition("no linear cycle for this orbit".into()))?;
    Ok(spectrum(game, &cycle)?.section)
}

fn orthonormal_complement(rows: &[Vec6], want: usize) -> Vec<Vec6> {
    let mut basis: Vec<Vec6> = Vec::new();
    let push = |v: Vec6, basis: &mut Vec<Vec6>| -> bool {
        let mut w = v;
        for b in basis.iter() {
            let c = dot6(&w, b);
            for k in 0..6 {
                w[k] -= c * b[k];
            }
        }
        let n = dot6(&w, &w).sqrt();
        if n > 1e-10 {
            basis.push(w.map(|x| x / n));
            true
        } else {
            false
        }
    };
    for r in rows {
        push(*r, &mut basis);
    }
    let start = basis.len();
    for k in 0..6 {
        let mut e = [0.0; 6];
        e[k] = 1.0;
        push(e, &mut basis);
        if basis.len() - start == want {
            break;
        }
    }
    basis.split_off(start)
}

/// Gnomonic chart on the section through the orbit direction.
struct SectionChart<'g> {
    game: &'g GamePair,
    cycle: [(usize, usize); 6],
    e: Vec6,
    d0: Vec6,
    axes: [Vec6; 2],
}

impl<'g> SectionChart<'g> {
    fn new(game: &'g GamePair, cycle: [(usize, usize); 6], d0: Vec6) -> Self {
        let g = functional(game, cycle[5], cycle[0]);
        let rows = [[1.0, 1.0, 1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 1.0, 1.0, 1.0], g, d0];
        let c = orthonormal_complement(&rows, 2);
        Self { game, cycle, e: game.equilibrium.flat(), d0, axes: [c[0], c[1]] }
    }

    fn point(&self, xy: [f64; 2]) -> Result<JointState> {
        let d: Vec6 = std::array::from_fn(|k| self.d0[k] + xy[0] * self.axes[0][k] + xy[1] * self.axes[1][k]);
        let lam = boundary_scale(self.e, d).ok_or_else(|| Error::Precondition("degenerate section ray".into()))?;
        let q: Vec6 = std::array::from_fn(|k| self.e[k] + lam * d[k]);
        Ok(JointState::from_parts([q[0], q[1], q[2]], [q[3], q[4], q[5]], 0.0))
    }

    fn coords(&self, s: &JointState) -> [f64; 2] {
        let p = s.flat();
        let d: Vec6 = std::array::from_fn(|k| p[k] - self.e[k]);
        let c = dot6(&d, &self.d0) / dot6(&self.d0, &self.d0);
        [dot6(&d, &self.axes[0]) / c, dot6(&d, &self.axes[1]) / c]
    }

    /// One circuit of the flow from the section back to it.
    fn ret(&self, xy: [f64; 2]) -> Result<[f64; 2]> {
        let mut s = self.point(xy)?;
        for want in self.cycle {
            let leg = flow::step(self.game, &s)?;
            if flow::pure_pair(&leg) != Some(want) {
                return Err(Error::NotCyclic);
            }
            s = leg.end;
        }
        Ok(self.coords(&s))
    }

    fn jacobian(&self, at: [f64; 2], h: f64) -> Result<[[f64; 2]; 2]> {
        let mut j = [[0.0; 2]; 2];
        for c in 0..2 {
            let (mut p, mut m) = (at, at);
            p[c] += h;
            m[c] -= h;
            let (fp, fm) = (self.ret(p)?, self.ret(m)?);
            for r in 0..2 {
                j[r][c] = (fp[r] - fm[r]) / (2.0 * h);
            }
        }
        Ok(j)
    }
}

fn eig2(j: [[f64; 2]; 2]) -> [Complex<f64>; 2] {
    let tr = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let disc = tr * tr / 4.0 - det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        [Complex::new(tr / 2.0 + s, 0.0), Complex::new(tr / 2.0 - s, 0.0)]
    } else {
        let s = (-disc).sqrt();
        [Complex::new(tr / 2.0, s), Complex::new(tr / 2.0, -s)]
    }
}

pub const FD_STEP: f64 = 1e-6;
pub const RICHARDSON_TOL: f64 = 1e-4;

/// Orientation of the eigendirection so that it points into the cone of
/// the cycle's first leg.
fn oriented(game: &GamePair, cycle: &[(usize, usize); 6], d: Vec6) -> Result<Vec6> {
    let e = game.equilibrium.flat();
    for s in [1.0, -1.0] {
        let dd = d.map(|x| s * x);
        if let Some(lam) = boundary_scale(e, dd) {
            let q: Vec6 = std::array::from_fn(|k| e[k] + 0.5 * lam * dd[k]);
            let st = JointState::from_parts([q[0], q[1], q[2]], [q[3], q[4], q[5]], 0.0);
            let t = flow::pure_targets(game, &st);
            if (t.ia, t.ib) == (flow::Label::Pure(cycle[0].0), flow::Label::Pure(cycle[0].1)) {
                return Ok(dd);
            }
        }
    }
    Err(Error::OrbitNotFound("eigendirection outside the cycle's cone".into()))
}

pub fn classify_stability(game: &GamePair, orbit: OrbitId) -> Result<StabilityReport> {
    let Some(cycle) = orbit.cycle() else {
        // the return map is not differentiable on the jitter set
        crate::induced::gamma_orbit(game)?;
        return Ok(StabilityReport {
            orbit_id: orbit,
            beta: game.beta,
            eigenvalues: None,
            moduli: None,
            analytic_moduli: None,
            radial_factor: None,
            jacobian: None,
            richardson_gap: None,
            fixed_point: None,
            classification: Classification::Jitter,
        });
    };
    on_section(game, orbit, cycle)
}

/// Linearise on the section entered by the last leg of `cycle`.
fn on_section(game: &GamePair, orbit: OrbitId, cycle: [(usize, usize); 6]) -> Result<StabilityReport> {
    let sp = spectrum(game, &cycle)?;
    let d0 = oriented(game, &cycle, sp.direction)?;
    let chart = SectionChart::new(game, cycle, d0);
    let mut at = [0.0, 0.0];
    // Newton polish of the section fixed point
    for _ in 0..3 {
        let f = chart.ret(at)?;
        let r = [f[0] - at[0], f[1] - at[1]];
        if r[0].hypot(r[1]) < 1e-14 {
            break;
        }
        let j = chart.jacobian(at, FD_STEP)?;
        let a = [[j[0][0] - 1.0, j[0][1]], [j[1][0], j[1][1] - 1.0]];
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        if det.abs() < 1e-14 {
            break;
        }
        at[0] -= (a[1][1] * r[0] - a[0][1] * r[1]) / det;
        at[1] -= (-a[1][0] * r[0] + a[0][0] * r[1]) / det;
    }
    let jh = chart.jacobian(at, FD_STEP)?;
    let jh2 = chart.jacobian(at, FD_STEP / 2.0)?;
    let norm = jh.iter().flatten().map(|x| x.abs()).fold(0.0, f64::max).max(1e-300);
    let gap = jh.iter().flatten().zip(jh2.iter().flatten()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / norm;
    if gap > RICHARDSON_TOL {
        return Err(Error::Solver(format!("finite differences inconsistent, gap {gap:e}")));
    }
    let j: [[f64; 2]; 2] = std::array::from_fn(|r| std::array::from_fn(|c| (4.0 * jh2[r][c] - jh[r][c]) / 3.0));
    let ev = eig2(j);
    let moduli = [ev[0].norm(), ev[1].norm()];
    Ok(StabilityReport {
        orbit_id: orbit,
        beta: game.beta,
        eigenvalues: Some([(ev[0].re, ev[0].im), (ev[1].re, ev[1].im)]),
        moduli: Some(moduli),
        analytic_moduli: Some([sp.section[0].norm(), sp.section[1].norm()]),
        radial_factor: Some(sp.radial),
        jacobian: Some(j),
        richardson_gap: Some(gap),
        fixed_point: Some(chart.point(at)?),
        classification: Classification::from_moduli(moduli),
    })
}

/// Largest return-map modulus of the anti-Shapley orbit from the cycle
/// matrix.
pub fn anti_shapley_modulus(beta: f64) -> Result<f64> {
    let g = shapley_family(beta)?;
    let sp = spectrum(&g, &ANTI_SHAPLEY)?;
    Ok(sp.section[0].norm().max(sp.section[1].norm()))
}

/// Same by finite differences, with the cycle rotated by `shift` legs so
/// that another switching surface serves as section.
pub fn anti_shapley_modulus_fd(beta: f64, shift: usize) -> Result<f64> {
    let g = shapley_family(beta)?;
    let mut cycle = ANTI_SHAPLEY;
    cycle.rotate_left(shift % 6);
    let m = on_section(&g, OrbitId::AntiShapley, cycle)?.moduli.expect("linear cycle");
    Ok(m[0].max(m[1]))
}

#[derive(Debug, Clone, Serialize)]
pub struct TauEstimate {
    pub tau: f64,
    pub bracket: (f64, f64),
    pub modulus_at_tau: f64,
    /// sign changes of (modulus - 1) on a sample of the search interval
    pub crossings: usize,
    /// τ̂ by finite differences on a second section
    pub tau_other_section: f64,
}

fn bisect(modulus: impl Fn(f64) -> Result<f64>, tol: f64) -> Result<(f64, f64)> {
    let f = |b: f64| modulus(b).map(|m| m - 1.0);
    let (mut lo, mut hi) = (SIGMA + 0.01, 0.99);
    let (flo, fhi) = (f(lo)?, f(hi)?);
    if flo.signum() == fhi.signum() {
        return Err(Error::Solver("no crossing of unit modulus".into()));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if f(mid)?.signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo, hi))
}

/// Parameter where the anti-Shapley orbit turns from saddle to attracting.
pub fn estimate_tau() -> Result<TauEstimate> {
    let (lo, hi) = bisect(anti_shapley_modulus, 1e-6)?;
    let tau = 0.5 * (lo + hi);
    let (lo2, hi2) = bisect(|b| anti_shapley_modulus_fd(b, 2), 1e-6)?;
    let n = 40;
    let samples: Vec<f64> = (0..=n)
        .map(|k| SIGMA + 0.01 + (0.99 - SIGMA - 0.01) * k as f64 / n as f64)
        .map(|b| anti_shapley_modulus(b).map(|m| m - 1.0))
        .collect::<Result<_>>()?;
    let crossings = samples.windows(2).filter(|w| w[0].signum() != w[1].signum()).count();
    Ok(TauEstimate {
        tau,
        bracket: (lo, hi),
        modulus_at_tau: anti_shapley_modulus(tau)?,
        crossings,
        tau_other_section: 0.5 * (lo2 + hi2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapley_attracting_at_low_beta() {
        let g = shapley_family(0.3).unwrap();
        let r = classify_stability(&g, OrbitId::Shapley).unwrap();
        assert_eq!(r.classification, Classification::Attracting);
        let (m, a) = (r.moduli.unwrap(), r.analytic_moduli.unwrap());
        let (mut m, mut a) = (m.to_vec(), a.to_vec());
        m.sort_by(f64::total_cmp);
        a.sort_by(f64::total_cmp);
        for k in 0..2 {
            assert!((m[k] - a[k]).abs() < 1e-6 * a[1], "{m:?} {a:?}");
        }
    }

    #[test]
    fn anti_shapley_table() {
        for (beta, want) in [(0.7, Classification::Saddle), (0.95, Classification::Attracting)] {
            let g = shapley_family(beta).unwrap();
            let r = classify_stability(&g, OrbitId::AntiShapley).unwrap();
            assert_eq!(r.classification, want, "{beta}");
            assert!(r.richardson_gap.unwrap() <= RICHARDSON_TOL);
        }
    }

    #[test]
    fn gamma_is_jitter() {
        let g = shapley_family(0.5).unwrap();
        let r = classify_stability(&g, OrbitId::Gamma).unwrap();
        assert_eq!(r.classification, Classification::Jitter);
        assert!(r.eigenvalues.is_none());
    }

    #[test]
    fn fixed_point_follows_cycle() {
        let g = shapley_family(0.3).unwrap();
        let r = classify_stability(&g, OrbitId::Shapley).unwrap();
        let mut s = r.fixed_point.unwrap();
        let start = s;
        for want in SHAPLEY {
            let leg = flow::step(&g, &s).unwrap();
            assert_eq!(flow::pure_pair(&leg), Some(want));
            s = leg.end;
        }
        let back = crate::induced::project_to_boundary(&s, &g.equilibrium).unwrap().state;
        assert!(back.sum_distance(&start) < 1e-9);
    }

    #[test]
    fn tau_near_printed_value() {
        let t = estimate_tau().unwrap();
        assert!((t.tau - 0.915).abs() <= 0.005, "{}", t.tau);
        assert!(t.bracket.1 - t.bracket.0 <= 1e-4);
        assert!((t.modulus_at_tau - 1.0).abs() < 1e-3);
        assert_eq!(t.crossings, 1);
        assert!((t.tau - t.tau_other_section).abs() < 1e-3);
    }
}
