//! Ratios of corresponding corners between consecutive quadrangles, which
//! bound how much one stage can stretch the radius.

use serde::Serialize;

use crate::error::{Error, Result};

pub fn ratio_tables(beta: f64) -> Result<[[f64; 4]; 2]> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Domain(format!("beta {beta} outside (0,1)")));
    }
    let b = beta;
    let s1 = [
        (2.0 - b) / (b + 1.0),
        (2.0 - b) / (1.0 - b * b),
        (2.0 - b) / ((b + 1.0) * b * (1.0 - b)),
        (2.0 - b) * b / (1.0 - b * b),
    ];
    let c = 2.0 - b - b * b;
    let s2 = [
        c / (1.0 + 2.0 * b),
        c * (1.0 + b) / ((1.0 + 2.0 * b) * b),
        b * (11.0 + 21.0 * b + 15.0 * b * b + 7.0 * b.powi(3)) / ((2.0 + b).powi(2) * (1.0 + 2.0 * b)),
        c / ((1.0 + 2.0 * b) * (1.0 + b)),
    ];
    Ok([s1, s2])
}

#[derive(Debug, Clone, Serialize)]
pub struct Claim {
    pub name: &'static str,
    pub holds: bool,
    /// grid point with the worst margin and the value there
    pub worst_beta: f64,
    pub worst_value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RatioReport {
    pub grid: Vec<f64>,
    pub claims: Vec<Claim>,
    /// smallest and largest ratio over the grid for each set
    pub extremes: [(f64, f64); 2],
}

impl RatioReport {
    pub fn all_hold(&self) -> bool {
        self.claims.iter().all(|c| c.holds)
    }
}

type Pick = fn(&[[f64; 4]; 2]) -> f64;

/// Evaluate the stated inequalities on β_k = (k - 1/2)/n, k = 1..n.
pub fn ratio_claims(n: usize) -> RatioReport {
    let grid: Vec<f64> = (1..=n).map(|k| (k as f64 - 0.5) / n as f64).collect();
    // (name, range, value, lower bound?, bound)
    let specs: [(&'static str, (f64, f64), Pick, bool, f64); 6] = [
        ("set1 third >= 3.5", (0.0, 1.0), |t| t[0][2], true, 3.5),
        ("set1 fourth <= 1 on (0,1/2)", (0.0, 0.5), |t| t[0][3], false, 1.0),
        ("set1 first <= 1 on (1/2,1)", (0.5, 1.0), |t| t[0][0], false, 1.0),
        ("set2 max(second,third) >= 1.2", (0.0, 1.0), |t| t[1][1].max(t[1][2]), true, 1.2),
        ("set2 first < 0.8 on (0,0.35)", (0.0, 0.35), |t| t[1][0], false, 0.8),
        ("set2 last < 0.8 on (0.35,1)", (0.35, 1.0), |t| t[1][3], false, 0.8),
    ];
    let tables: Vec<[[f64; 4]; 2]> = grid.iter().map(|&b| ratio_tables(b).expect("grid inside (0,1)")).collect();
    let mut claims = Vec::new();
    for (name, (lo, hi), pick, lower, bound) in specs {
        let mut holds = true;
        let (mut worst_beta, mut worst_value, mut worst_margin) = (f64::NAN, f64::NAN, f64::INFINITY);
        for (b, t) in grid.iter().zip(&tables) {
            if *b <= lo || *b >= hi {
                continue;
            }
            let v = pick(t);
            let margin = if lower { v - bound } else { bound - v };
            let ok = if lower { v >= bound } else if bound == 1.0 { v <= bound } else { v < bound };
            holds &= ok;
            if margin < worst_margin {
                (worst_beta, worst_value, worst_margin) = (*b, v, margin);
            }
        }
        claims.push(Claim { name, holds, worst_beta, worst_value });
    }
    let mut extremes = [(f64::INFINITY, f64::NEG_INFINITY); 2];
    for t in &tables {
        for s in 0..2 {
            for v in t[s] {
                extremes[s].0 = extremes[s].0.min(v);
                extremes[s].1 = extremes[s].1.max(v);
            }
        }
    }
    RatioReport { grid, claims, extremes }
}
