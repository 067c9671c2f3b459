//! Train/test partitions with discarded buffer gaps around test segments.

use std::fmt::Write as _;
use std::ops::Range;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    /// Half-open, sorted, pairwise disjoint.
    pub test_segments: Vec<Range<usize>>,
    /// Frames discarded on each side of every test segment.
    pub buffer: usize,
    pub train_indices: Vec<usize>,
    pub total: usize,
}

/// Default buffer in frames; six interior segment boundaries at this width
/// account for 28,865 - 3,450 - 24,569 = 846 discarded frames.
pub const DEFAULT_BUFFER: usize = 141;

impl Partition {
    pub fn new(total: usize, segments: &[Range<usize>], buffer: usize) -> Result<Self> {
        let mut segs = segments.to_vec();
        segs.sort_by_key(|r| (r.start, r.end));
        for s in &segs {
            if s.start >= s.end || s.end > total {
                return Err(Error::config(format!(
                    "test segment {}..{} is empty or outside 0..{total}",
                    s.start, s.end
                )));
            }
        }
        for w in segs.windows(2) {
            if w[1].start < w[0].end {
                return Err(Error::config(format!(
                    "test segments {}..{} and {}..{} overlap",
                    w[0].start, w[0].end, w[1].start, w[1].end
                )));
            }
        }
        let mut excluded = vec![false; total];
        for s in &segs {
            let lo = s.start.saturating_sub(buffer);
            let hi = (s.end + buffer).min(total);
            excluded[lo..hi].iter_mut().for_each(|e| *e = true);
        }
        let train_indices: Vec<usize> = (0..total).filter(|&i| !excluded[i]).collect();
        if train_indices.is_empty() {
            return Err(Error::config("partition leaves no training frames"));
        }
        Ok(Partition {
            test_segments: segs,
            buffer,
            train_indices,
            total,
        })
    }

    pub fn test_indices(&self) -> Vec<usize> {
        self.test_segments.iter().flat_map(|r| r.clone()).collect()
    }

    pub fn n_test(&self) -> usize {
        self.test_segments.iter().map(|r| r.len()).sum()
    }

    pub fn n_discarded(&self) -> usize {
        self.total - self.n_test() - self.train_indices.len()
    }

    /// `train <idx>` lines, then `test <segment_id> <idx>` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for i in &self.train_indices {
            writeln!(out, "train {i}").unwrap();
        }
        for (sid, seg) in self.test_segments.iter().enumerate() {
            for i in seg.clone() {
                writeln!(out, "test {sid} {i}").unwrap();
            }
        }
        out
    }

    /// Parse the record format back. The buffer is recovered as the widest
    /// gap consistent with the records, and `total` must be supplied.
    pub fn from_text(text: &str, total: usize) -> Result<Self> {
        let mut train = Vec::new();
        let mut tests: Vec<Vec<usize>> = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let parts: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::data(format!("partition line {}: `{line}`", n + 1));
            match parts.as_slice() {
                [] => continue,
                ["train", idx] => train.push(idx.parse::<usize>().map_err(|_| bad())?),
                ["test", sid, idx] => {
                    let sid: usize = sid.parse().map_err(|_| bad())?;
                    let idx: usize = idx.parse().map_err(|_| bad())?;
                    if sid >= tests.len() {
                        tests.resize(sid + 1, Vec::new());
                    }
                    tests[sid].push(idx);
                }
                _ => return Err(bad()),
            }
        }
        let mut segments = Vec::with_capacity(tests.len());
        for (sid, idx) in tests.iter().enumerate() {
            let (Some(&a), Some(&b)) = (idx.first(), idx.last()) else {
                return Err(Error::data(format!("test segment {sid} has no records")));
            };
            if idx.windows(2).any(|w| w[1] != w[0] + 1) {
                return Err(Error::data(format!("test segment {sid} is not contiguous")));
            }
            segments.push(a..b + 1);
        }
        let gap = segments
            .iter()
            .flat_map(|s| {
                train.iter().map(move |&t| {
                    if t < s.start {
                        s.start - t - 1
                    } else {
                        t.saturating_sub(s.end)
                    }
                })
            })
            .min()
            .unwrap_or(0);
        let p = Partition::new(total, &segments, gap)?;
        if p.train_indices != train {
            return Err(Error::data("partition train records are inconsistent with its test segments"));
        }
        Ok(p)
    }
}

/// Parse `a:b,c:d,...` into half-open ranges.
pub fn parse_segments(spec: &str) -> Result<Vec<Range<usize>>> {
    spec.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            let (a, b) = s
                .trim()
                .split_once(':')
                .ok_or_else(|| Error::config(format!("bad segment `{s}`, expected start:end")))?;
            let a: usize = a.trim().parse().map_err(|_| Error::config(format!("bad segment `{s}`")))?;
            let b: usize = b.trim().parse().map_err(|_| Error::config(format!("bad segment `{s}`")))?;
            Ok(a..b)
        })
        .collect()
}

pub fn format_segments(segments: &[Range<usize>]) -> String {
    segments
        .iter()
        .map(|r| format!("{}:{}", r.start, r.end))
        .collect::<Vec<_>>()
        .join(",")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_segment_with_buffer() {
        let p = Partition::new(100, &[40..50], 5).unwrap();
        let expected: Vec<usize> = (0..35).chain(55..100).collect();
        assert_eq!(p.train_indices, expected);
        assert_eq!(p.train_indices.len(), 80);
        assert_eq!(p.n_discarded(), 10);
    }

    #[test]
    fn zero_buffer() {
        let p = Partition::new(100, &[40..50], 0).unwrap();
        assert_eq!(p.train_indices.len(), 90);
    }

    #[test]
    fn full_scale_counts() {
        let segs = [5_000..6_150, 14_000..15_150, 23_000..24_150];
        let p = Partition::new(28_865, &segs, DEFAULT_BUFFER).unwrap();
        assert_eq!(p.n_test(), 3_450);
        assert_eq!(p.train_indices.len(), 24_569);
        assert_eq!(p.n_discarded(), 846);
    }

    #[test]
    fn rejects_bad_segments() {
        assert!(Partition::new(100, &[40..50, 45..60], 0).is_err());
        assert!(Partition::new(100, &[90..110], 0).is_err());
        assert!(Partition::new(100, &[0..100], 0).is_err());
        assert!(Partition::new(100, &[10..60], 50).is_err());
    }

    #[test]
    fn text_round_trip() {
        let p = Partition::new(200, &[20..40, 100..130], 7).unwrap();
        let q = Partition::from_text(&p.to_text(), 200).unwrap();
        assert_eq!(p, q);
        assert_eq!(parse_segments(&format_segments(&p.test_segments)).unwrap(), p.test_segments);
    }

    proptest! {
        #[test]
        fn buffer_soundness(n in 50usize..400, a in 0usize..400, len in 1usize..40, b in 0usize..400, buffer in 0usize..20) {
            let s1 = (a % n)..((a % n) + len).min(n);
            let start2 = b % n;
            let s2 = start2..(start2 + len).min(n);
            prop_assume!(s1.end <= s2.start || s2.end <= s1.start);
            let Ok(p) = Partition::new(n, &[s1, s2], buffer) else { return Ok(()); };
            let test = p.test_indices();
            for &i in &p.train_indices {
                for &j in &test {
                    prop_assert!(i.abs_diff(j) > buffer);
                }
            }
            prop_assert_eq!(p.train_indices.len() + test.len() + p.n_discarded(), n);
        }
    }
}
