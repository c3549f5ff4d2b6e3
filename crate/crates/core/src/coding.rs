//! Symbolic dynamics of play: itineraries, dithering flags and cycles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{Label, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub t: f64,
    pub i: Label,
    pub j: Label,
}

/// Event sequence (t_n, i_n, j_n) with t_0 = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Itinerary {
    pub entries: Vec<Step>,
}

impl Itinerary {
    pub fn new(entries: Vec<Step>) -> Result<Self> {
        if let Some(first) = entries.first() {
            if first.t != 0.0 {
                return Err(Error::Precondition("itinerary must start at t = 0".into()));
            }
        }
        for w in entries.windows(2) {
            if w[1].t <= w[0].t {
                return Err(Error::Precondition("itinerary times must increase".into()));
            }
            if (w[0].i, w[0].j) == (w[1].i, w[1].j) {
                return Err(Error::Precondition("consecutive entries repeat a label pair".into()));
            }
        }
        Ok(Self { entries })
    }

    /// Pure labels given one-based, with unit time spacing.
    pub fn from_pairs(pairs: &[(usize, usize)]) -> Result<Self> {
        let entries = pairs
            .iter()
            .enumerate()
            .map(|(n, &(i, j))| Step { t: n as f64, i: Label::Pure(i - 1), j: Label::Pure(j - 1) })
            .collect();
        Self::new(entries)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labels(&self) -> Vec<(Label, Label)> {
        self.entries.iter().map(|s| (s.i, s.j)).collect()
    }

    fn pure_indices(&self) -> Result<Vec<(usize, usize)>> {
        self.entries
            .iter()
            .map(|s| match (s.i, s.j) {
                (Label::Pure(i), Label::Pure(j)) => Ok((i, j)),
                _ => Err(Error::MixedLabels),
            })
            .collect()
    }

    /// Drop the first `n` entries and restart the clock.
    pub fn shifted(&self, n: usize) -> Self {
        let rest = &self.entries[n.min(self.entries.len())..];
        let t0 = rest.first().map(|s| s.t).unwrap_or(0.0);
        Self { entries: rest.iter().map(|s| Step { t: s.t - t0, ..*s }).collect() }
    }
}

pub fn extract_itinerary(traj: &Trajectory) -> Itinerary {
    let t0 = traj.legs.first().map(|l| l.start.time_t).unwrap_or(0.0);
    Itinerary {
        entries: traj
            .legs
            .iter()
            .map(|l| Step { t: l.start.time_t - t0, i: l.targets.ia, j: l.targets.ib })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Flag {
    D,
    I,
}

/// Flags R_k for k >= 3 (flags[0] is R_3) and the decisive indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DitherCode {
    pub flags: Vec<Flag>,
    pub decisive_times: Vec<usize>,
}

impl DitherCode {
    pub fn as_string(&self) -> String {
        self.flags.iter().map(|f| if *f == Flag::D { 'D' } else { 'I' }).collect()
    }

    pub fn from_flags(flags: Vec<Flag>) -> Self {
        let decisive_times =
            flags.iter().enumerate().filter(|(_, f)| **f == Flag::D).map(|(k, _)| k + 3).collect();
        Self { flags, decisive_times }
    }
}

/// Which symbol sits third in A's window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum WindowRule {
    /// {i_{k-3}, i_{k-2}, i_{k-1}, i_k}
    #[default]
    PerPlayer,
    /// {i_{k-3}, i_{k-2}, j_{k-1}, i_k}, the variant as printed
    Literal,
}

fn full(a: usize, b: usize, c: usize, d: usize) -> bool {
    let mut seen = [false; 3];
    for x in [a, b, c, d] {
        seen[x] = true;
    }
    seen.iter().all(|s| *s)
}

fn indecisive_at(p: &[(usize, usize)], k: usize, rule: WindowRule) -> bool {
    let third = match rule {
        WindowRule::PerPlayer => p[k - 1].0,
        WindowRule::Literal => p[k - 1].1,
    };
    !full(p[k - 3].0, p[k - 2].0, third, p[k].0) && !full(p[k - 3].1, p[k - 2].1, p[k - 1].1, p[k].1)
}

pub fn dither_code(itin: &Itinerary) -> Result<DitherCode> {
    dither_code_with(itin, WindowRule::PerPlayer)
}

pub fn dither_code_with(itin: &Itinerary, rule: WindowRule) -> Result<DitherCode> {
    let p = itin.pure_indices()?;
    if p.len() < 4 {
        return Err(Error::Precondition("itinerary needs at least 4 entries".into()));
    }
    let flags = (3..p.len())
        .map(|k| if indecisive_at(&p, k, rule) { Flag::I } else { Flag::D })
        .collect();
    Ok(DitherCode::from_flags(flags))
}

fn is_cyclic(labels: &[(Label, Label)], n: usize) -> bool {
    n > 0 && labels.len() >= n && (0..labels.len() - n).all(|k| labels[k] == labels[k + n])
}

/// Decisive steps among k = 0..n-1 of one period.
pub fn essential_period(itin: &Itinerary, n: usize) -> Result<usize> {
    let labels = itin.labels();
    if !is_cyclic(&labels, n) {
        return Err(Error::NotCyclic);
    }
    let p = itin.pure_indices()?;
    Ok((0..n).filter(|&k| k < 3 || !indecisive_at(&p, k, WindowRule::PerPlayer)).count())
}

/// Smallest period n (then earliest offset) repeated `min_repeats` times.
pub fn detect_cycle(itin: &Itinerary, min_repeats: usize) -> Option<(usize, usize)> {
    let labels = itin.labels();
    let len = labels.len();
    let min_repeats = min_repeats.max(2);
    for n in 1..=len / min_repeats {
        let need = (min_repeats - 1) * n;
        let mut run = 0usize;
        for k in 0..len - n {
            if labels[k] == labels[k + n] {
                run += 1;
                if run >= need {
                    return Some((k + 1 - run, n));
                }
            } else {
                run = 0;
            }
        }
    }
    None
}

/// Gaps N_{s+1} - N_s and N_{2s+2} - N_{2s}.
pub fn decisive_gaps(code: &DitherCode) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = &code.decisive_times;
    if n.len() < 3 {
        return Err(Error::Precondition("need at least 3 decisive times".into()));
    }
    let gaps = n.windows(2).map(|w| w[1] - w[0]).collect();
    let even = n.iter().step_by(2).collect::<Vec<_>>().windows(2).map(|w| w[1] - w[0]).collect();
    Ok((gaps, even))
}

/// Compare even-indexed gaps against a prescribed dithering schedule:
/// returns the largest |N_{2s+2} - N_{2s} - target_s|.
pub fn schedule_deviation(code: &DitherCode, targets: &[usize]) -> Result<usize> {
    let (_, even) = decisive_gaps(code)?;
    Ok(even.iter().zip(targets).map(|(g, t)| g.abs_diff(*t)).max().unwrap_or(0))
}

pub const SHAPLEY_CYCLE: [(usize, usize); 6] = [(1, 2), (2, 2), (2, 3), (3, 3), (3, 1), (1, 1)];
pub const ANTI_SHAPLEY_CYCLE: [(usize, usize); 6] = [(1, 3), (1, 2), (3, 2), (3, 1), (2, 1), (2, 3)];

/// True when `labels` (one-based pairs) is a rotation of `cycle`.
pub fn is_rotation_of(labels: &[(usize, usize)], cycle: &[(usize, usize)]) -> bool {
    if labels.len() != cycle.len() {
        return false;
    }
    (0..cycle.len()).any(|o| (0..cycle.len()).all(|k| labels[k] == cycle[(o + k) % cycle.len()]))
}

/// One-based pure pairs of an itinerary slice (None if any label is mixed).
pub fn one_based(labels: &[(Label, Label)]) -> Option<Vec<(usize, usize)>> {
    labels
        .iter()
        .map(|(a, b)| match (a, b) {
            (Label::Pure(i), Label::Pure(j)) => Some((i + 1, j + 1)),
            _ => None,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SEVEN: [(usize, usize); 7] = [(1, 2), (2, 2), (2, 3), (3, 3), (3, 2), (3, 1), (1, 1)];

    fn repeat(c: &[(usize, usize)], times: usize) -> Vec<(usize, usize)> {
        c.iter().cycle().take(c.len() * times).cloned().collect()
    }

    #[test]
    fn shapley_cycle_never_dithers() {
        let it = Itinerary::from_pairs(&repeat(&SHAPLEY_CYCLE, 4)).unwrap();
        let code = dither_code(&it).unwrap();
        assert!(code.flags.iter().all(|f| *f == Flag::D));
        assert_eq!(essential_period(&it, 6).unwrap(), 6);
    }

    #[test]
    fn seven_cycle_dithers_at_fifth_step() {
        let it = Itinerary::from_pairs(&SEVEN).unwrap();
        let code = dither_code(&it).unwrap();
        // flags start at k = 3; the fifth step is k = 4
        assert_eq!(code.as_string(), "DIDD");
        assert_eq!(essential_period(&it, 7).unwrap(), 6);
        let lit = dither_code_with(&it, WindowRule::Literal).unwrap();
        assert_eq!(lit.flags[1], Flag::I);
    }

    #[test]
    fn twelve_period_counts_verbatim() {
        let it = Itinerary::from_pairs(&repeat(&SHAPLEY_CYCLE, 2)).unwrap();
        assert_eq!(essential_period(&it, 12).unwrap(), 12);
        assert!(matches!(essential_period(&it, 5), Err(Error::NotCyclic)));
    }

    #[test]
    fn repeated_pair_rejected() {
        assert!(Itinerary::from_pairs(&[(1, 2), (1, 2), (2, 2)]).is_err());
    }

    #[test]
    fn cycles_detected() {
        let mut seq = vec![(1, 1), (1, 3), (2, 3)];
        seq.extend(repeat(&SHAPLEY_CYCLE, 3));
        let it = Itinerary::from_pairs(&seq).unwrap();
        let (off, n) = detect_cycle(&it, 3).unwrap();
        assert_eq!(n, 6);
        assert!(off <= 3);
        let it = Itinerary::from_pairs(&repeat(&ANTI_SHAPLEY_CYCLE, 3)).unwrap();
        assert_eq!(detect_cycle(&it, 2), Some((0, 6)));
        let it = Itinerary::from_pairs(&[(1, 2), (2, 2), (2, 3), (3, 3), (3, 2)]).unwrap();
        assert_eq!(detect_cycle(&it, 2), None);
    }

    #[test]
    fn gap_examples() {
        let code = DitherCode::from_flags(vec![Flag::D; 5]);
        assert_eq!(decisive_gaps(&code).unwrap().0, vec![1; 4]);
        let s = "DIIIDIIID";
        let code = DitherCode::from_flags(s.chars().map(|c| if c == 'D' { Flag::D } else { Flag::I }).collect());
        assert_eq!(code.decisive_times, vec![3, 7, 11]);
        let (g, e) = decisive_gaps(&code).unwrap();
        assert_eq!(g, vec![4, 4]);
        assert_eq!(e, vec![8]);
        assert_eq!(schedule_deviation(&code, &[8]).unwrap(), 0);
    }

    #[test]
    fn mixed_labels_rejected() {
        let it = Itinerary {
            entries: (0..5)
                .map(|n| Step { t: n as f64, i: Label::Mixed(n % 3), j: Label::Mixed((n + 1) % 3) })
                .collect(),
        };
        assert!(matches!(dither_code(&it), Err(Error::MixedLabels)));
    }

    fn pure_walk() -> impl Strategy<Value = Vec<(usize, usize)>> {
        // each step changes exactly one player's label
        prop::collection::vec((any::<bool>(), 1usize..3), 6..60).prop_map(|moves| {
            let mut cur = (1usize, 1usize);
            let mut out = vec![cur];
            for (who, d) in moves {
                if who {
                    cur.0 = (cur.0 - 1 + d) % 3 + 1;
                } else {
                    cur.1 = (cur.1 - 1 + d) % 3 + 1;
                }
                out.push(cur);
            }
            out
        })
    }

    proptest! {
        #[test]
        fn shift_equivariance(p in pure_walk()) {
            let it = Itinerary::from_pairs(&p).unwrap();
            let full = dither_code(&it).unwrap();
            let sh = dither_code(&it.shifted(1)).unwrap();
            // R_{k+1} of the original equals R_k of the shifted sequence
            prop_assert_eq!(&full.flags[1..], &sh.flags[..]);
        }

        #[test]
        fn code_ignores_times(p in pure_walk(), stretch in 0.1f64..10.0) {
            let it = Itinerary::from_pairs(&p).unwrap();
            let mut it2 = it.clone();
            for (n, s) in it2.entries.iter_mut().enumerate() {
                s.t = (n as f64).powf(1.5) * stretch;
            }
            prop_assert_eq!(dither_code(&it).unwrap(), dither_code(&it2).unwrap());
        }

        #[test]
        fn essential_period_bounded(p in pure_walk()) {
            let n = p.len();
            let mut twice = p.clone();
            twice.extend(p.iter().cloned());
            if let Ok(it) = Itinerary::from_pairs(&twice) {
                let e = essential_period(&it, n).unwrap();
                let code = dither_code(&Itinerary::from_pairs(&p).unwrap()).unwrap();
                let has_i = code.flags.iter().any(|f| *f == Flag::I);
                prop_assert!(e <= n);
                prop_assert_eq!(e == n, !has_i);
            }
        }
    }
}
