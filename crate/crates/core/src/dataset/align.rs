//! Cross-season alignment by GPS proximity.

use super::traverse::{AlignedCorpus, Traverse};
use crate::error::{Error, Result};

const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Great-circle distance in meters.
pub fn haversine_m(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * a.sqrt().min(1.0).asin()
}

/// Greedy monotone matching.
///
/// The shortest traverse is the reference. Each of its frames is matched, in
/// order, to the nearest frame of every other traverse whose index is past
/// that traverse's previous match. A reference frame is dropped when any of
/// its matches is farther than `align_tol_m`; dropped frames do not advance
/// the match pointers. Output traverses keep their input order and are
/// re-indexed from 0.
pub fn align(traverses: &[Traverse], align_tol_m: f64) -> Result<AlignedCorpus> {
    if traverses.len() < 2 {
        return Err(Error::data("alignment needs at least two traverses"));
    }
    if let Some(t) = traverses.iter().find(|t| t.is_empty()) {
        return Err(Error::data(format!("traverse {} is empty", t.source_id)));
    }
    if !(align_tol_m >= 0.0) {
        return Err(Error::config("align_tol_m must be non-negative"));
    }
    let reference = (0..traverses.len())
        .min_by_key(|&i| traverses[i].len())
        .expect("non-empty");

    // next[u] = first index of traverse u still available for matching
    let mut next = vec![0usize; traverses.len()];
    let mut kept: Vec<Vec<usize>> = vec![Vec::new(); traverses.len()];
    let mut matched = vec![0usize; traverses.len()];

    'frames: for (k, rf) in traverses[reference].frames.iter().enumerate() {
        for (u, t) in traverses.iter().enumerate() {
            if u == reference {
                matched[u] = k;
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for (j, f) in t.frames.iter().enumerate().skip(next[u]) {
                let d = haversine_m(rf.lat, rf.lon, f.lat, f.lon);
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((j, d));
                }
            }
            match best {
                Some((j, d)) if d <= align_tol_m => matched[u] = j,
                Some(_) => {
                    log::debug!("reference frame {k}: no match within {align_tol_m} m in {}", t.source_id);
                    continue 'frames;
                }
                None => break 'frames,
            }
        }
        for u in 0..traverses.len() {
            kept[u].push(matched[u]);
            if u != reference {
                next[u] = matched[u] + 1;
            }
        }
    }

    if kept[reference].is_empty() {
        return Err(Error::data(format!(
            "no frames align within {align_tol_m} m across all traverses"
        )));
    }
    let out = traverses
        .iter()
        .zip(kept)
        .map(|(t, idx)| {
            let mut sel = Traverse {
                season: t.season.clone(),
                source_id: t.source_id.clone(),
                frames: idx.into_iter().map(|j| t.frames[j].clone()).collect(),
            };
            sel.reindex();
            sel
        })
        .collect();
    AlignedCorpus::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::traverse::Frame;
    use crate::image::Image;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn track(season: &str, pts: &[(f64, f64)]) -> Traverse {
        let frames = pts
            .iter()
            .enumerate()
            .map(|(i, &(lat, lon))| Frame {
                index: i,
                timestamp: i as i64,
                lat,
                lon,
                speed: 50.0,
                image: Image::zeros(1, 1, 1),
                image_path: Default::default(),
            })
            .collect();
        Traverse::new(season, season, frames).unwrap()
    }

    fn route(n: usize, rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
        let mut lat = 63.4;
        let mut lon = 10.4;
        (0..n)
            .map(|_| {
                lat += rng.random_range(0.0001..0.0003);
                lon += rng.random_range(-0.0001..0.0002);
                (lat, lon)
            })
            .collect()
    }

    /// Minimum total distance over monotone matchings of every frame of `a`
    /// into `b` (|a| <= |b|), by dynamic programming.
    fn optimal_monotone_cost(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
        let (n, m) = (a.len(), b.len());
        let mut dp = vec![vec![f64::INFINITY; m + 1]; n + 1];
        dp[0].iter_mut().for_each(|v| *v = 0.0);
        for i in 1..=n {
            for j in 1..=m {
                let take = dp[i - 1][j - 1] + haversine_m(a[i - 1].0, a[i - 1].1, b[j - 1].0, b[j - 1].1);
                dp[i][j] = dp[i][j - 1].min(take);
            }
        }
        dp[n][m]
    }

    #[test]
    fn haversine_one_degree_latitude() {
        let d = haversine_m(0.0, 0.0, 1.0, 0.0);
        assert!((d - 111_195.0).abs() < 10.0, "{d}");
    }

    #[test]
    fn identical_tracks_align_identically() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = route(50, &mut rng);
        let c = align(&[track("a", &pts), track("b", &pts)], 1.0).unwrap();
        assert_eq!(c.len(), 50);
        assert_eq!(c.max_alignment_error_m(), 0.0);
        assert_eq!(c.traverses()[1].frames.iter().map(|f| f.timestamp).collect::<Vec<_>>(), (0..50).collect::<Vec<i64>>());
    }

    #[test]
    fn decimated_track_matches_exact_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in [30, 120, 200] {
            let full = route(n, &mut rng);
            let decimated: Vec<_> = full.iter().enumerate().filter(|(i, _)| i % 10 != 9).map(|(_, p)| *p).collect();
            let c = align(&[track("full", &full), track("dec", &decimated)], 5.0).unwrap();
            assert_eq!(c.len(), decimated.len());
            assert_eq!(c.max_alignment_error_m(), 0.0);
            assert_eq!(optimal_monotone_cost(&decimated, &full), 0.0);
        }
    }

    #[test]
    fn greedy_cost_equals_brute_force_optimum_on_jittered_tracks() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let full = route(150, &mut rng);
        let sub: Vec<_> = full
            .iter()
            .enumerate()
            .filter(|(i, _)| i % 7 != 3)
            .map(|(_, &(la, lo))| (la + rng.random_range(-2e-6..2e-6), lo))
            .collect();
        let c = align(&[track("sub", &sub), track("full", &full)], 50.0).unwrap();
        assert_eq!(c.len(), sub.len());
        let greedy: f64 = (0..c.len())
            .map(|i| {
                let (a, b) = (&c.traverses()[0].frames[i], &c.traverses()[1].frames[i]);
                haversine_m(a.lat, a.lon, b.lat, b.lon)
            })
            .sum();
        let opt = optimal_monotone_cost(&sub, &full);
        assert!((greedy - opt).abs() < 1e-6, "greedy {greedy} vs optimum {opt}");
        assert!(c.max_alignment_error_m() <= 50.0);
    }

    #[test]
    fn far_offset_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = route(20, &mut rng);
        let b: Vec<_> = a.iter().map(|&(la, lo)| (la + 1.0, lo)).collect();
        assert!(align(&[track("a", &a), track("b", &b)], 100.0).is_err());
    }

    #[test]
    fn needs_two_traverses() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = route(5, &mut rng);
        assert!(align(&[track("a", &a)], 1.0).is_err());
    }
}
