use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Coincidence histogram of t_b − t_a with integer-picosecond bins centred
/// on multiples of the bin width: bin k covers (k·w − w/2, k·w + w/2), with
/// boundary ties rounded away from τ = 0 so the layout is mirror-symmetric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width_ps: i64,
    /// Bins run from −half_bins to +half_bins.
    pub half_bins: i64,
    pub counts: Vec<u64>,
    pub channel_pair: (u8, u8),
    pub total_duration_ps: f64,
    pub singles: (u64, u64),
    /// Set when an input stream had to be sorted.
    pub sorted_input: bool,
}

impl Histogram {
    pub fn bin_edges_ps(&self) -> Vec<f64> {
        let w = self.bin_width_ps as f64;
        (-self.half_bins..=self.half_bins + 1).map(|k| (k as f64 - 0.5) * w).collect()
    }

    pub fn tau_centers_ps(&self) -> impl Iterator<Item = i64> + '_ {
        (-self.half_bins..=self.half_bins).map(move |k| k * self.bin_width_ps)
    }

    pub fn count_at(&self, k: i64) -> u64 {
        self.counts[(k + self.half_bins) as usize]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn span_ps(&self) -> i64 {
        self.half_bins * self.bin_width_ps
    }

    /// Sum of counts in bins whose centre lies in [lo, hi).
    pub fn window_sum(&self, lo: f64, hi: f64) -> u64 {
        self.tau_centers_ps().zip(&self.counts).filter(|(t, _)| (*t as f64) >= lo && (*t as f64) < hi).map(|(_, c)| c).sum()
    }

    /// Copy with every count multiplied by `factor`.
    pub fn scaled(&self, factor: u64) -> Self {
        let mut h = self.clone();
        h.counts.iter_mut().for_each(|c| *c *= factor);
        h.singles = (h.singles.0 * factor, h.singles.1 * factor);
        h
    }

    /// Writes "tau_ps,counts".
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["tau_ps", "counts"])?;
        for (t, c) in self.tau_centers_ps().zip(&self.counts) {
            wr.write_record([t.to_string(), c.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Parses a "tau_ps,counts" file back into (τ, count) pairs.
pub fn read_histogram_csv<R: std::io::Read>(r: R) -> Result<Vec<(i64, u64)>> {
    let mut rd = csv::Reader::from_reader(r);
    let h = rd.headers()?.clone();
    if h.len() != 2 || &h[0] != "tau_ps" || &h[1] != "counts" {
        return Err(Error::Ingest { offset: 0, message: "expected header \"tau_ps,counts\"".into() });
    }
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let offset = rec.position().map(|p| p.byte()).unwrap_or(0);
        let bad = || Error::Ingest { offset, message: "bad histogram row".into() };
        out.push((rec[0].parse().map_err(|_| bad())?, rec[1].parse().map_err(|_| bad())?));
    }
    Ok(out)
}

#[inline]
fn bin_index(tau: i64, w: i64) -> i64 {
    let k = (2 * tau.unsigned_abs() as i128 + w as i128) / (2 * w as i128);
    if tau < 0 {
        -(k as i64)
    } else {
        k as i64
    }
}

fn ensure_sorted(v: &[i64]) -> (std::borrow::Cow<'_, [i64]>, bool) {
    if v.windows(2).all(|w| w[0] <= w[1]) {
        (std::borrow::Cow::Borrowed(v), false)
    } else {
        log::warn!("unsorted time-tag stream sorted before correlation");
        let mut s = v.to_vec();
        s.sort_unstable();
        (std::borrow::Cow::Owned(s), true)
    }
}

/// Cross-correlation histogram of two timestamp streams.
///
/// Two-pointer sweep over the sorted streams, parallel over chunks of
/// `tags_a` with an associative merge of bin counts. Bins span
/// ±⌊span/bin_width⌋·bin_width.
pub fn build_correlation(
    tags_a: &[i64],
    tags_b: &[i64],
    bin_width_ps: i64,
    span_ps: i64,
    channel_pair: (u8, u8),
    total_duration_ps: f64,
) -> Result<Histogram> {
    if bin_width_ps <= 0 {
        return Err(Error::domain("bin width must be > 0"));
    }
    if span_ps < 0 {
        return Err(Error::domain("span must be >= 0"));
    }
    let (a, sa) = ensure_sorted(tags_a);
    let (b, sb) = ensure_sorted(tags_b);
    let half = span_ps / bin_width_ps;
    let nbins = (2 * half + 1) as usize;
    // Anything with |τ| beyond this cannot fall in an edge bin.
    let reach = half * bin_width_ps + bin_width_ps / 2 + 1;

    let counts = a
        .par_chunks(16_384)
        .fold(
            || vec![0u64; nbins],
            |mut acc, chunk| {
                let mut lo = b.partition_point(|&x| x < chunk[0].saturating_sub(reach));
                for &ta in chunk {
                    while lo < b.len() && b[lo] < ta.saturating_sub(reach) {
                        lo += 1;
                    }
                    let mut j = lo;
                    while j < b.len() && b[j] <= ta.saturating_add(reach) {
                        let k = bin_index(b[j] - ta, bin_width_ps);
                        if k.abs() <= half {
                            acc[(k + half) as usize] += 1;
                        }
                        j += 1;
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; nbins],
            |mut x, y| {
                x.iter_mut().zip(y).for_each(|(p, q)| *p += q);
                x
            },
        );
    Ok(Histogram {
        bin_width_ps,
        half_bins: half,
        counts,
        channel_pair,
        total_duration_ps,
        singles: (a.len() as u64, b.len() as u64),
        sorted_input: sa || sb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_single_tags_hit_zero_bin() {
        let h = build_correlation(&[1000], &[1000], 10, 100, (0, 1), 1.0).unwrap();
        assert_eq!(h.count_at(0), 1);
        assert_eq!(h.total(), 1);
        assert_eq!(h.counts.len(), 21);
        assert_eq!(h.bin_edges_ps().len(), h.counts.len() + 1);
    }

    #[test]
    fn tie_rounding_is_away_from_zero() {
        assert_eq!(bin_index(5, 10), 1);
        assert_eq!(bin_index(-5, 10), -1);
        assert_eq!(bin_index(4, 10), 0);
        assert_eq!(bin_index(-4, 10), 0);
        assert_eq!(bin_index(14, 10), 1);
        assert_eq!(bin_index(15, 10), 2);
    }

    #[test]
    fn unsorted_input_is_sorted_and_flagged() {
        let h = build_correlation(&[30, 10], &[10, 30], 1, 50, (0, 1), 1.0).unwrap();
        assert!(h.sorted_input);
        assert_eq!(h.count_at(0), 2);
        assert_eq!(h.count_at(20), 1);
        assert_eq!(h.count_at(-20), 1);
    }

    #[test]
    fn bad_bin_width() {
        assert!(build_correlation(&[], &[], 0, 10, (0, 1), 1.0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let h = build_correlation(&[0, 7, 50], &[3, 9, 44], 4, 20, (0, 1), 1.0).unwrap();
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        let rows = read_histogram_csv(buf.as_slice()).unwrap();
        assert_eq!(rows.len(), h.counts.len());
        for ((t, c), (t2, c2)) in rows.iter().zip(h.tau_centers_ps().zip(h.counts.iter())) {
            assert_eq!((*t, *c), (t2, *c2));
        }
    }

    fn brute(a: &[i64], b: &[i64], w: i64, span: i64) -> Vec<u64> {
        let half = span / w;
        let mut c = vec![0u64; (2 * half + 1) as usize];
        for &x in a {
            for &y in b {
                let k = bin_index(y - x, w);
                if k.abs() <= half {
                    c[(k + half) as usize] += 1;
                }
            }
        }
        c
    }

    proptest! {
        #[test]
        fn matches_brute_force(mut a in proptest::collection::vec(0i64..100_000, 0..300),
                               mut b in proptest::collection::vec(0i64..100_000, 0..300),
                               w in 1i64..500, span in 0i64..20_000) {
            a.sort(); b.sort();
            let h = build_correlation(&a, &b, w, span, (0, 1), 1.0).unwrap();
            prop_assert_eq!(h.counts, brute(&a, &b, w, span));
        }

        #[test]
        fn swapping_streams_mirrors(mut a in proptest::collection::vec(0i64..50_000, 0..300),
                                    mut b in proptest::collection::vec(0i64..50_000, 0..300),
                                    w in 1i64..300, span in 0i64..10_000) {
            a.sort(); b.sort();
            let ab = build_correlation(&a, &b, w, span, (0, 1), 1.0).unwrap();
            let ba = build_correlation(&b, &a, w, span, (1, 0), 1.0).unwrap();
            let mut rev = ba.counts.clone();
            rev.reverse();
            prop_assert_eq!(ab.counts, rev);
        }
    }
}
