//! Reliability and robustness metrics over control sequences.
//!
//! Two readings are fixed here. The mean absolute percentage error is the
//! plain mean of `|PE|`, with no extra factor of 100 on top of the one
//! already inside `PE`. Decision-making reliability divides by the number of
//! peer runs, so its values live on the grid `100 * m / |peers|`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Common word positions at which runs are monitored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlSequence {
    levels: Vec<u64>,
}

impl ControlSequence {
    pub fn new(levels: Vec<u64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::domain("control sequence is empty"));
        }
        if levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("control levels must be strictly increasing"));
        }
        Ok(ControlSequence { levels })
    }

    /// Nominal positions `lo, lo + step, ...` up to and including `hi`.
    pub fn range(lo: u64, hi: u64, step: u64) -> Result<Self> {
        if step == 0 || lo == 0 || lo > hi {
            return Err(Error::domain(format!("invalid control range {lo}:{hi}:{step}")));
        }
        Self::new((lo..=hi).step_by(step as usize).collect())
    }

    pub fn levels(&self) -> &[u64] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

/// Actual (Ac) and estimated (EAc) accuracy of one run by word position.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CurvePair {
    pub actual: BTreeMap<u64, f64>,
    pub estimated: BTreeMap<u64, f64>,
}

impl CurvePair {
    pub fn from_points(points: impl IntoIterator<Item = (u64, f64, f64)>) -> Self {
        let mut pair = CurvePair::default();
        for (x, ac, eac) in points {
            pair.actual.insert(x, ac);
            pair.estimated.insert(x, eac);
        }
        pair
    }

    fn at(&self, i: u64) -> Result<(f64, f64)> {
        match (self.actual.get(&i), self.estimated.get(&i)) {
            (Some(&a), Some(&e)) => Ok((a, e)),
            _ => Err(Error::domain(format!("curve pair is not defined at word position {i}"))),
        }
    }
}

/// Percentage error `100 * (EAc - Ac) / Ac` at word position `i`.
pub fn pe(pair: &CurvePair, i: u64) -> Result<f64> {
    let (actual, estimated) = pair.at(i)?;
    if actual == 0.0 {
        return Err(Error::domain(format!("actual accuracy is zero at {i}")));
    }
    Ok(100.0 * (estimated - actual) / actual)
}

/// Mean of `|PE|` over the control sequence.
pub fn mape(pair: &CurvePair, s: &ControlSequence) -> Result<f64> {
    let mut sum = 0.0;
    for &i in s.levels() {
        sum += pe(pair, i)?.abs();
    }
    Ok(sum / s.len() as f64)
}

/// 1 when the estimates of the two runs keep the order of their actual
/// curves at `i` (ties count as kept), 0 otherwise.
pub fn re(e: &CurvePair, f: &CurvePair, i: u64) -> Result<u8> {
    let (ae, ee) = e.at(i)?;
    let (af, ef) = f.at(i)?;
    Ok(u8::from((ae - af) * (ee - ef) >= 0.0))
}

fn agreements(e: &CurvePair, f: &CurvePair, s: &ControlSequence) -> Result<usize> {
    let mut n = 0;
    for &i in s.levels() {
        n += re(e, f, i)? as usize;
    }
    Ok(n)
}

/// Reliability estimation ratio: percentage of control levels where
/// [`re`] holds.
pub fn rer(e: &CurvePair, f: &CurvePair, s: &ControlSequence) -> Result<f64> {
    Ok(100.0 * agreements(e, f, s)? as f64 / s.len() as f64)
}

/// Decision-making reliability of `run` against `peers`: the percentage of
/// peers with a perfect [`rer`].
pub fn dmr(run: &CurvePair, peers: &[&CurvePair], s: &ControlSequence) -> Result<f64> {
    if peers.is_empty() {
        return Err(Error::domain("decision-making reliability needs at least one peer"));
    }
    let mut perfect = 0usize;
    for peer in peers {
        if agreements(run, peer, s)? == s.len() {
            perfect += 1;
        }
    }
    Ok(100.0 * perfect as f64 / peers.len() as f64)
}

/// [`dmr`] from precomputed ratios of a run against each of its peers.
pub fn dmr_from_rers(rers: &[f64]) -> Result<f64> {
    if rers.is_empty() {
        return Err(Error::domain("decision-making reliability needs at least one peer"));
    }
    let perfect = rers.iter().filter(|&&r| r == 100.0).count();
    Ok(100.0 * perfect as f64 / rers.len() as f64)
}

/// Length of the longest contiguous stretch that is entirely non-increasing
/// or entirely non-decreasing. Equal neighbours extend both kinds.
pub fn longest_monotone_run(values: &[f64]) -> usize {
    if values.is_empty() {
        return 0;
    }
    let (mut up, mut down, mut best) = (1usize, 1usize, 1usize);
    for w in values.windows(2) {
        up = if w[1] >= w[0] { up + 1 } else { 1 };
        down = if w[1] <= w[0] { down + 1 } else { 1 };
        best = best.max(up).max(down);
    }
    best
}

/// Robustness rate: share of the backbone over `[wlevel, clevel]` covered by
/// its longest monotone stretch, in percent.
pub fn rr(backbone: &[f64]) -> Result<f64> {
    if backbone.is_empty() {
        return Err(Error::domain("robustness rate needs a non-empty backbone"));
    }
    Ok(100.0 * longest_monotone_run(backbone) as f64 / backbone.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seq(levels: &[u64]) -> ControlSequence {
        ControlSequence::new(levels.to_vec()).unwrap()
    }

    fn pair(points: &[(u64, f64, f64)]) -> CurvePair {
        CurvePair::from_points(points.iter().copied())
    }

    #[test]
    fn control_sequence_validation() {
        assert!(ControlSequence::new(vec![]).is_err());
        assert!(ControlSequence::new(vec![3, 3]).is_err());
        let r = ControlSequence::range(300_000, 700_000, 100_000).unwrap();
        assert_eq!(r.levels(), &[300_000, 400_000, 500_000, 600_000, 700_000]);
        assert!(ControlSequence::range(10, 5, 1).is_err());
    }

    #[test]
    fn pe_examples() {
        let p = pair(&[(300_000, 94.61, 94.54), (1, 50.0, 51.0), (2, 80.0, 80.0), (3, 0.0, 1.0)]);
        assert!((pe(&p, 300_000).unwrap() - (-0.073988)).abs() < 1e-6);
        assert!((pe(&p, 1).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(pe(&p, 2).unwrap(), 0.0);
        assert!(pe(&p, 3).is_err());
        assert!(pe(&p, 4).is_err());
    }

    #[test]
    fn mape_of_constant_offset_near_100() {
        let p = pair(&[(1, 99.9, 100.0), (2, 99.95, 100.05), (3, 99.99, 100.09)]);
        let m = mape(&p, &seq(&[1, 2, 3])).unwrap();
        assert!((m - 0.1).abs() < 1e-3, "{m}");
    }

    #[test]
    fn re_examples() {
        let e = pair(&[(1, 95.0, 94.0), (2, 95.0, 94.0)]);
        let f = pair(&[(1, 93.0, 92.0), (2, 93.0, 96.0)]);
        assert_eq!(re(&e, &f, 1).unwrap(), 1);
        assert_eq!(re(&e, &f, 2).unwrap(), 0);
        let tie = pair(&[(1, 93.0, 94.0)]);
        assert_eq!(re(&e, &tie, 1).unwrap(), 1);
    }

    #[test]
    fn rer_examples() {
        let s = seq(&[1, 2, 3, 4, 5]);
        let e = pair(&[
            (1, 2.0, 2.0),
            (2, 2.0, 2.0),
            (3, 2.0, 2.0),
            (4, 2.0, 2.0),
            (5, 2.0, 2.0),
        ]);
        let f = pair(&[
            (1, 1.0, 1.0),
            (2, 1.0, 1.0),
            (3, 1.0, 1.0),
            (4, 1.0, 1.0),
            (5, 1.0, 1.0),
        ]);
        assert_eq!(rer(&e, &f, &s).unwrap(), 100.0);
        let mut g = f.clone();
        g.estimated.insert(3, 3.0);
        assert_eq!(rer(&e, &g, &s).unwrap(), 80.0);
    }

    #[test]
    fn dmr_grid_values() {
        let five_of_seven = [100.0, 100.0, 80.0, 100.0, 100.0, 60.0, 100.0];
        let six_of_seven = [100.0, 100.0, 100.0, 100.0, 100.0, 80.0, 100.0];
        assert_eq!(format!("{:.2}", dmr_from_rers(&five_of_seven).unwrap()), "71.43");
        assert_eq!(format!("{:.2}", dmr_from_rers(&six_of_seven).unwrap()), "85.71");
        assert_eq!(dmr_from_rers(&[100.0; 3]).unwrap(), 100.0);
        assert!(dmr_from_rers(&[]).is_err());

        let s = seq(&[1]);
        let e = pair(&[(1, 2.0, 2.0)]);
        assert!(dmr(&e, &[], &s).is_err());
        let lo = pair(&[(1, 1.0, 1.0)]);
        let flip = pair(&[(1, 1.0, 3.0)]);
        assert_eq!(dmr(&e, &[&lo, &flip], &s).unwrap(), 50.0);
    }

    #[test]
    fn rr_examples() {
        assert_eq!(rr(&[99.9, 99.5, 99.1, 98.0]).unwrap(), 100.0);
        assert_eq!(rr(&[99.5, 99.4, 99.3, 99.35, 99.30]).unwrap(), 60.0);
        assert_eq!(rr(&[97.0]).unwrap(), 100.0);
        assert_eq!(rr(&[1.0, 1.0, 2.0, 2.0, 1.0]).unwrap(), 80.0);
        assert!(rr(&[]).is_err());
    }

    fn curve_pairs(n: usize) -> impl Strategy<Value = (CurvePair, CurvePair)> {
        let vals = prop::collection::vec((90.0f64..100.0, 90.0f64..100.0), n);
        (vals.clone(), vals).prop_map(|(a, b)| {
            let mk = |v: Vec<(f64, f64)>| {
                CurvePair::from_points(v.into_iter().enumerate().map(|(i, (ac, eac))| (i as u64 + 1, ac, eac)))
            };
            (mk(a), mk(b))
        })
    }

    proptest! {
        #[test]
        fn pe_sign_tracks_overshoot(ac in 1.0f64..100.0, eac in 1.0f64..100.0) {
            let p = pair(&[(1, ac, eac)]);
            let v = pe(&p, 1).unwrap();
            prop_assert_eq!(v > 0.0, eac > ac);
        }

        #[test]
        fn mape_ignores_order_and_is_zero_on_exact_estimates((e, _) in curve_pairs(6)) {
            let s = seq(&[1, 2, 3, 4, 5, 6]);
            let m = mape(&e, &s).unwrap();
            prop_assert!(m >= 0.0);
            let mut rev = e.clone();
            let acts: Vec<f64> = e.actual.values().rev().copied().collect();
            let ests: Vec<f64> = e.estimated.values().rev().copied().collect();
            for (k, (a, x)) in acts.into_iter().zip(ests).enumerate() {
                rev.actual.insert(k as u64 + 1, a);
                rev.estimated.insert(k as u64 + 1, x);
            }
            prop_assert!((mape(&rev, &s).unwrap() - m).abs() < 1e-12);
            let exact = CurvePair { actual: e.actual.clone(), estimated: e.actual.clone() };
            prop_assert_eq!(mape(&exact, &s).unwrap(), 0.0);
        }

        #[test]
        fn re_is_symmetric_and_scale_free((e, f) in curve_pairs(5), k in 0.01f64..10.0) {
            let s = seq(&[1, 2, 3, 4, 5]);
            for &i in s.levels() {
                prop_assert_eq!(re(&e, &f, i).unwrap(), re(&f, &e, i).unwrap());
            }
            prop_assert_eq!(rer(&e, &f, &s).unwrap(), rer(&f, &e, &s).unwrap());
            let scale = |p: &CurvePair| CurvePair {
                actual: p.actual.iter().map(|(x, v)| (*x, v * k)).collect(),
                estimated: p.estimated.iter().map(|(x, v)| (*x, v * k)).collect(),
            };
            let (es, fs) = (scale(&e), scale(&f));
            for &i in s.levels() {
                prop_assert_eq!(re(&e, &f, i).unwrap(), re(&es, &fs, i).unwrap());
            }
        }

        #[test]
        fn rer_matches_recount((e, f) in curve_pairs(7)) {
            let s = seq(&[1, 2, 3, 4, 5, 6, 7]);
            let mut hits = 0;
            for i in 1..=7u64 {
                let d_act = e.actual[&i] - f.actual[&i];
                let d_est = e.estimated[&i] - f.estimated[&i];
                if (d_act >= 0.0 && d_est >= 0.0) || (d_act <= 0.0 && d_est <= 0.0) {
                    hits += 1;
                }
            }
            prop_assert_eq!(rer(&e, &f, &s).unwrap(), 100.0 * hits as f64 / 7.0);
        }
    }
}
