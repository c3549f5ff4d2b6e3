use anyhow::{bail, Context, Result};
use clap::{Args, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use shapley_core::analysis::{self, corners, stability::OrbitId};
use shapley_core::coding::{detect_cycle, dither_code, extract_itinerary};
use shapley_core::flow::{self, Limits};
use shapley_core::game::{self, random_interior, shapley_family};
use shapley_core::induced::{self, first_return, project_to_boundary, SectionSpec};
use shapley_core::jitter::{self, JitterModel};
use shapley_core::verify::{self, CRITERIA};
use shapley_core::{GamePair, JointState};

use crate::output::{f, Table};
use crate::{Global, StartKind};

const DEFAULT_BETA: f64 = 0.5;

fn start_state(game: &GamePair, kind: StartKind, point: Option<&str>, seed: u64) -> Result<JointState> {
    if let Some(p) = point {
        let parts: Vec<&str> = p.split(';').collect();
        anyhow::ensure!(parts.len() == 2, "--point wants 'a0,a1,a2;b0,b1,b2'");
        let vec3 = |s: &str| -> Result<[f64; 3]> {
            let v: Vec<f64> = s.split(',').map(|x| x.trim().parse()).collect::<Result<_, _>>()?;
            v.try_into().map_err(|_| anyhow::anyhow!("three coordinates per player"))
        };
        return Ok(JointState::new(vec3(parts[0])?, vec3(parts[1])?)?);
    }
    Ok(match kind {
        StartKind::Random => random_interior(&mut ChaCha8Rng::seed_from_u64(seed)),
        StartKind::Hexagon => flow::hexagon_seed(game)?,
    })
}

// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = StartKind::Random)]
    start: StartKind,
    /// explicit start 'a0,a1,a2;b0,b1,b2'
    #[arg(long)]
    point: Option<String>,
    #[arg(long, default_value_t = 100_000)]
    events: usize,
    #[arg(long, default_value_t = f64::INFINITY)]
    max_time: f64,
    /// stop once the sum-distance to E falls below this
    #[arg(long, default_value_t = 1e-3)]
    stop_radius: f64,
    /// follow the mixed-label dynamics on the jitter set (starts on the hexagon)
    #[arg(long = "constrained-J")]
    constrained_j: bool,
}

#[derive(Serialize)]
struct SimulateReport<'a> {
    game: &'a GamePair,
    start: JointState,
    limits: Limits,
    events: usize,
    terminated_at_e: bool,
    final_distance_to_e: f64,
    trajectory: &'a flow::Trajectory,
}

pub fn simulate(g: &Global, a: &SimulateArgs) -> Result<bool> {
    let game = g.game(DEFAULT_BETA)?;
    let kind = if a.constrained_j && a.point.is_none() { StartKind::Hexagon } else { a.start };
    let start = start_state(&game, kind, a.point.as_deref(), g.seed)?;
    let limits = Limits { max_events: a.events, max_time_t: a.max_time, stop_radius_at_e: a.stop_radius };
    let traj = if a.constrained_j {
        flow::simulate_constrained(&game, &start, &limits)?
    } else {
        flow::simulate(&game, &start, &limits)?
    };
    let last = traj.final_state().unwrap_or(start);
    let mut t = Table::new(&[
        "event", "time_t", "duration_u", "a0", "a1", "a2", "b0", "b1", "b2", "target_a", "target_b", "player", "from",
        "to",
    ]);
    for (n, leg) in traj.legs.iter().enumerate() {
        let (la, lb) = leg.targets.labels();
        let e = leg.end.flat();
        let mut row = vec![n.to_string(), f(leg.end.time_t), f(leg.duration_u)];
        row.extend(e.iter().map(|x| f(*x)));
        row.extend([la.to_string(), lb.to_string(), format!("{:?}", leg.firing.player)]);
        row.extend([(leg.firing.from + 1).to_string(), (leg.firing.to + 1).to_string()]);
        t.push(row);
    }
    let report = SimulateReport {
        game: &game,
        start,
        limits,
        events: traj.legs.len(),
        terminated_at_e: traj.terminated_at_e,
        final_distance_to_e: flow::distance_to_e(&game, &last),
        trajectory: &traj,
    };
    g.sink().emit_both("trajectory", &report, &t)?;
    Ok(true)
}

// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct CodeArgs {
    #[arg(long, value_enum, default_value_t = StartKind::Random)]
    start: StartKind,
    #[arg(long)]
    point: Option<String>,
    #[arg(long, default_value_t = 2000)]
    events: usize,
    /// repeats required before a cycle is reported
    #[arg(long, default_value_t = 3)]
    repeats: usize,
}

pub fn code(g: &Global, a: &CodeArgs) -> Result<bool> {
    let game = g.game(DEFAULT_BETA)?;
    let start = start_state(&game, a.start, a.point.as_deref(), g.seed)?;
    let traj = flow::simulate(&game, &start, &Limits { max_events: a.events, ..Default::default() })?;
    let itin = extract_itinerary(&traj);
    let (code, code_error) = match dither_code(&itin) {
        Ok(c) => (Some(c), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let cycle = detect_cycle(&itin, a.repeats).map(|(offset, period)| {
        let pairs: Vec<String> =
            itin.entries[offset..offset + period].iter().map(|s| format!("({},{})", s.i, s.j)).collect();
        json!({ "offset": offset, "period": period, "play": pairs })
    });
    let mut t = Table::new(&["n", "t", "i", "j"]);
    for (n, s) in itin.entries.iter().enumerate() {
        t.push(vec![n.to_string(), f(s.t), s.i.to_string(), s.j.to_string()]);
    }
    let report = json!({
        "events": traj.legs.len(),
        "terminated_at_e": traj.terminated_at_e,
        "code": code.as_ref().map(|c| c.as_string()),
        "decisive_times": code.as_ref().map(|c| c.decisive_times.clone()),
        "code_error": code_error,
        "cycle": cycle,
        "itinerary": itin,
    });
    g.sink().emit("code", &report, Some(&t))?;
    Ok(true)
}

// ---------------------------------------------------------------------------

pub fn induced(g: &Global) -> Result<bool> {
    let game = g.game(DEFAULT_BETA)?;
    let gamma = induced::gamma_orbit(&game)?;
    let marks = game::landmarks(&game)?;
    let mut t = Table::new(&["orbit", "index", "a0", "a1", "a2", "b0", "b1", "b2"]);
    let mut add = |name: &str, pts: &[JointState]| {
        for (k, p) in pts.iter().enumerate() {
            let mut row = vec![name.to_string(), k.to_string()];
            row.extend(p.flat().iter().map(|x| f(*x)));
            t.push(row);
        }
    };
    add("hexagon", &gamma.vertices);
    if let Some(gen) = &gamma.genuine {
        add("genuine", gen);
    }
    g.sink().emit("induced", &json!({ "gamma": gamma, "landmarks": marks }), Some(&t))?;
    Ok(true)
}

// ---------------------------------------------------------------------------

#[derive(Clone, Copy, ValueEnum)]
pub enum SectionChoice {
    GlobalS,
    V0B31,
    A12V1,
    V2B12,
    Transversal,
}

#[derive(Args)]
pub struct SectionArgs {
    #[arg(long, value_enum, default_value_t = SectionChoice::GlobalS)]
    kind: SectionChoice,
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long, default_value_t = 1_000_000)]
    max_events: usize,
    #[arg(long, value_enum, default_value_t = StartKind::Random)]
    start: StartKind,
    #[arg(long)]
    point: Option<String>,
}

pub fn section(g: &Global, a: &SectionArgs) -> Result<bool> {
    let game = g.game(DEFAULT_BETA)?;
    let spec = match a.kind {
        SectionChoice::GlobalS => SectionSpec::global_s(),
        SectionChoice::V0B31 => SectionSpec::v0_b31(&game)?,
        SectionChoice::A12V1 => SectionSpec::a12_v1(&game)?,
        SectionChoice::V2B12 => SectionSpec::v2_b12(&game)?,
        SectionChoice::Transversal => SectionSpec::transversal_at_gamma(&game)?,
    };
    let start = start_state(&game, a.start, a.point.as_deref(), g.seed)?;
    let b = project_to_boundary(&start, &game.equilibrium)?;
    let hits = first_return(&game, &spec, &b, a.count, a.max_events)?;
    let mut t = Table::new(&["hit_index", "chart_x", "chart_y", "winding", "events_between"]);
    for (k, h) in hits.iter().enumerate() {
        t.push(vec![
            k.to_string(),
            f(h.section_coords[0]),
            f(h.section_coords[1]),
            h.transit.winding.to_string(),
            h.transit.events_between.to_string(),
        ]);
    }
    g.sink().emit("section", &json!({ "section": spec, "hits": hits }), Some(&t))?;
    Ok(true)
}

// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct JitterArgs {
    /// model file (JSON); otherwise built from the corner tables at --beta
    #[arg(long, global = true)]
    model: Option<std::path::PathBuf>,
    #[command(subcommand)]
    action: JitterAction,
}

#[derive(Subcommand)]
enum JitterAction {
    /// One fixed point per annulus index in an inclusive range 'lo..hi'
    FixedPoints {
        #[arg(long, default_value = "20..29")]
        k: String,
    },
    /// Periodic orbit with prescribed successive radius ratios
    Periodic {
        #[arg(long, default_value_t = 3)]
        n: usize,
        /// comma-separated ratios with product 1; default 0.9,...,0.9,0.9^(1-n)
        #[arg(long)]
        ratios: Option<String>,
    },
    /// Point whose iterates visit a prescribed annulus sequence
    Realize {
        #[arg(long)]
        seq: String,
    },
    /// Fraction of invariant-set orbits that split from a close neighbour
    Divergence {
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 1e-12)]
        delta: f64,
        #[arg(long, default_value_t = 50)]
        iterates: usize,
    },
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    s.split(',').map(|x| x.trim().parse::<T>().with_context(|| format!("bad list entry '{x}'"))).collect()
}

fn parse_range(s: &str) -> Result<(usize, usize)> {
    let (lo, hi) = s.split_once("..").context("range wants 'lo..hi'")?;
    Ok((lo.trim().parse()?, hi.trim().trim_start_matches('=').parse()?))
}

pub fn jitter(g: &Global, a: &JitterArgs) -> Result<bool> {
    let model = match &a.model {
        Some(p) => JitterModel::from_json(&std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?,
        None => corners::game_jitter_model(g.family_beta(DEFAULT_BETA)?)?,
    };
    let sink = g.sink();
    match &a.action {
        JitterAction::FixedPoints { k } => {
            let (lo, hi) = parse_range(k)?;
            let pts = jitter::find_fixed_points(&model, lo, hi)?;
            let mut t = Table::new(&["k", "x", "y", "radius", "residual", "note"]);
            let opt = |v: Option<f64>| v.map(f).unwrap_or_default();
            for p in &pts {
                t.push(vec![
                    p.k.to_string(),
                    opt(p.point.map(|z| z[0])),
                    opt(p.point.map(|z| z[1])),
                    opt(p.radius),
                    opt(p.residual),
                    p.diagnostic.clone().unwrap_or_default(),
                ]);
            }
            sink.emit("fixed_points", &json!({ "model": model, "points": pts }), Some(&t))?;
            Ok(pts.iter().all(|p| p.residual.is_some()))
        }
        JitterAction::Periodic { n, ratios } => {
            let seed = match ratios {
                Some(s) => parse_list::<f64>(s)?,
                None => {
                    let mut v = vec![0.9; n.saturating_sub(1)];
                    v.push(0.9f64.powi(1 - *n as i32));
                    v
                }
            };
            let orbit = jitter::find_periodic_orbit(&model, *n, &seed)?;
            let mut t = Table::new(&["index", "x", "y", "radius", "annulus", "ratio"]);
            for i in 0..orbit.period {
                t.push(vec![
                    i.to_string(),
                    f(orbit.points[i][0]),
                    f(orbit.points[i][1]),
                    f(orbit.radii[i]),
                    orbit.annuli[i].to_string(),
                    f(orbit.ratios[i]),
                ]);
            }
            sink.emit("periodic", &json!({ "requested_ratios": seed, "orbit": orbit }), Some(&t))?;
            Ok(true)
        }
        JitterAction::Realize { seq } => {
            let ks = parse_list::<usize>(seq)?;
            let r = jitter::realize_itinerary(&model, &ks)?;
            let ok = r.realized == ks;
            let mut t = Table::new(&["index", "requested", "realized", "radius", "delta"]);
            for i in 0..ks.len() {
                t.push(vec![
                    i.to_string(),
                    ks[i].to_string(),
                    r.realized[i].to_string(),
                    f(r.radii[i]),
                    f(r.deltas[i]),
                ]);
            }
            sink.emit("realize", &json!({ "requested": ks, "verified": ok, "realization": r }), Some(&t))?;
            Ok(ok)
        }
        JitterAction::Divergence { samples, delta, iterates } => {
            let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
            let frac = jitter::invariant_divergence_fraction(&model, *samples, *delta, *iterates, &mut rng)?;
            let report = json!({ "samples": samples, "delta": delta, "iterates": iterates, "split_fraction": frac });
            sink.emit("divergence", &report, None)?;
            Ok(true)
        }
    }
}

// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct VerifyArgs {
    /// criterion name or number; all when omitted
    #[arg(long)]
    only: Option<String>,
}

#[derive(Serialize)]
struct CriterionView<'a> {
    id: u8,
    name: &'a str,
    passed: bool,
    budget_seconds: f64,
    detail: &'a Value,
}

fn corner_table_report(beta: f64) -> Result<(bool, Value, Table)> {
    let coarse = corners::verify_corner_tables(beta, 1e-4)?;
    let fine = corners::verify_corner_tables(beta, 5e-5)?;
    let order = corners::first_order(&coarse, &fine);
    let mut t = Table::new(&["beta", "entry_id", "predicted", "measured", "rel_error"]);
    let mut ok = true;
    for (i, name) in corners::TABLE_NAMES.iter().enumerate() {
        for k in 0..4 {
            ok &= coarse.rel_error[i][k] <= 10.0 * coarse.epsilon && order[i][k];
            t.push(vec![
                f(beta),
                format!("{name}[{}]", k + 1),
                f(coarse.predicted[i][k]),
                f(coarse.measured[i][k]),
                f(coarse.rel_error[i][k]),
            ]);
        }
    }
    Ok((ok, json!({ "coarse": coarse, "fine": fine, "error_halves": order }), t))
}

fn ratio_table_report() -> Result<(bool, Value, Table)> {
    let rep = analysis::ratio_claims(50);
    let mut t = Table::new(&["beta", "entry_id", "value"]);
    for &b in &rep.grid {
        let r = analysis::ratios::ratio_tables(b)?;
        for (s, set) in r.iter().enumerate() {
            for (k, v) in set.iter().enumerate() {
                t.push(vec![f(b), format!("set{}[{}]", s + 1, k + 1), f(*v)]);
            }
        }
    }
    Ok((rep.all_hold(), serde_json::to_value(&rep)?, t))
}

pub fn verify(g: &Global, a: &VerifyArgs) -> Result<bool> {
    let sink = g.sink();
    let ids: Vec<u8> = match &a.only {
        Some(s) => vec![verify::criterion_id(s).with_context(|| format!("unknown criterion '{s}'"))?],
        None => CRITERIA.iter().map(|c| c.0).collect(),
    };
    if let ([4], Some(beta)) = (ids.as_slice(), g.beta) {
        let (ok, report, t) = corner_table_report(beta)?;
        eprintln!("{} corner-tables at beta {beta}", if ok { "PASS" } else { "FAIL" });
        sink.emit("corner_tables", &json!({ "passed": ok, "tables": report }), Some(&t))?;
        return Ok(ok);
    }
    if ids == [8] {
        let (ok, report, t) = ratio_table_report()?;
        eprintln!("{} ratios", if ok { "PASS" } else { "FAIL" });
        sink.emit("ratios", &json!({ "passed": ok, "report": report }), Some(&t))?;
        return Ok(ok);
    }
    if g.beta.is_some() || g.game.is_some() {
        bail!("--beta applies to --only corner-tables; the other criteria fix their own games");
    }
    let results: Vec<_> = ids.iter().map(|&id| verify::run_criterion(id, g.seed)).collect();
    let mut t = Table::new(&["id", "name", "passed", "seconds", "budget_seconds"]);
    for r in &results {
        eprintln!("{} {:>2} {} ({:.2}s)", if r.passed { "PASS" } else { "FAIL" }, r.id, r.name, r.seconds);
        t.push(vec![r.id.to_string(), r.name.to_string(), r.passed.to_string(), f(r.seconds), f(r.budget_seconds)]);
    }
    // timings go to stderr and the CSV only, so the JSON report is reproducible
    let views: Vec<CriterionView> = results
        .iter()
        .map(|r| CriterionView { id: r.id, name: r.name, passed: r.passed, budget_seconds: r.budget_seconds, detail: &r.detail })
        .collect();
    let all = results.iter().all(|r| r.passed);
    sink.emit("verify", &json!({ "seed": g.seed, "all_passed": all, "criteria": views }), Some(&t))?;
    Ok(all)
}

// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct SweepArgs {
    #[arg(long, default_value_t = 0.05)]
    from: f64,
    #[arg(long, default_value_t = 0.95)]
    to: f64,
    #[arg(long, default_value_t = 19)]
    steps: usize,
}

fn classification(game: &GamePair, id: OrbitId) -> Value {
    match analysis::classify_stability(game, id) {
        Ok(r) => json!({ "class": r.classification, "moduli": r.moduli }),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

pub fn sweep(g: &Global, a: &SweepArgs) -> Result<bool> {
    anyhow::ensure!(g.game.is_none() && g.beta.is_none(), "sweep takes its grid from --from/--to/--steps");
    anyhow::ensure!(a.steps >= 1 && a.from > 0.0 && a.to < 1.0 && a.from <= a.to, "need 0 < from <= to < 1");
    let grid: Vec<f64> = (0..a.steps)
        .map(|i| if a.steps == 1 { a.from } else { a.from + (a.to - a.from) * i as f64 / (a.steps - 1) as f64 })
        .collect();
    let sink = g.sink();
    let rows: Vec<Value> = grid
        .par_iter()
        .enumerate()
        .map(|(i, &beta)| -> Result<Value> {
            let row = match shapley_family(beta) {
                Ok(game) => {
                    let radial = analysis::radial_map(&game);
                    let gamma = induced::gamma_orbit(&game);
                    json!({
                        "beta": beta,
                        "shapley": classification(&game, OrbitId::Shapley),
                        "anti_shapley": classification(&game, OrbitId::AntiShapley),
                        "kappa": radial.as_ref().ok().map(|m| m.kappa),
                        "moebius_a": radial.as_ref().ok().map(|m| m.a),
                        "gamma_closure": gamma.as_ref().ok().map(|o| o.closure_residual),
                        "genuine_radius": gamma.as_ref().ok().and_then(|o| o.genuine_radius),
                    })
                }
                Err(e) => json!({ "beta": beta, "error": e.to_string() }),
            };
            sink.trial("sweep", &format!("beta_{i:04}"), &row)?;
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let mut t = Table::new(&["beta", "shapley", "anti_shapley", "kappa", "moebius_a", "gamma_closure"]);
    let cell = |v: &Value| match v {
        Value::Number(n) => n.as_f64().map(f).unwrap_or_default(),
        Value::String(s) => s.clone(),
        _ => String::new(),
    };
    for r in &rows {
        let class = |k: &str| r[k].get("class").map(cell).unwrap_or_else(|| "error".into());
        t.push(vec![cell(&r["beta"]), class("shapley"), class("anti_shapley"), cell(&r["kappa"]), cell(&r["moebius_a"]), cell(&r["gamma_closure"])]);
    }
    sink.emit("sweep", &json!({ "grid": grid, "rows": rows }), Some(&t))?;
    Ok(true)
}

// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct PerturbArgs {
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// entrywise bound on the perturbation of each matrix
    #[arg(long, default_value_t = 1e-3)]
    norm: f64,
}

pub fn perturb(g: &Global, a: &PerturbArgs) -> Result<bool> {
    let beta = g.family_beta(0.3)?;
    let rep = analysis::robustness_sweep(beta, a.trials, a.norm, g.seed)?;
    let sink = g.sink();
    for t in &rep.trials {
        sink.trial("perturb", &format!("trial_{:04}", t.index), t)?;
    }
    let mut t = Table::new(&["trial", "interior", "gamma_closure", "genuine_gamma", "shapley", "anti_shapley", "persists"]);
    let class = |c: Option<analysis::Classification>| c.map(|c| format!("{c:?}").to_lowercase()).unwrap_or_default();
    for tr in &rep.trials {
        let s = &tr.snapshot;
        t.push(vec![
            tr.index.to_string(),
            s.interior.to_string(),
            s.gamma_closure.map(f).unwrap_or_default(),
            s.genuine_gamma.to_string(),
            class(s.shapley),
            class(s.anti_shapley),
            tr.persists.to_string(),
        ]);
    }
    sink.emit("perturb", &rep, Some(&t))?;
    Ok(true)
}
