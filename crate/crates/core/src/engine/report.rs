use std::collections::BTreeMap;
use std::fmt::Write;

use csv::{ReaderBuilder, Trim};

use super::EngineError;
use crate::placement::Placement;
use crate::routing::TrafficMatrix;

/// Served bytes by how they were served. `local + remote + origin == total`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ByteCounts {
    pub total: u64,
    pub local: u64,
    pub remote: u64,
    pub origin: u64,
}

impl ByteCounts {
    /// Bytes served by a replica (local or remote) over all bytes.
    pub fn hit_ratio(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            (self.local + self.remote) as f64 / self.total as f64
        }
    }

    pub fn origin_fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.origin as f64 / self.total as f64
        }
    }

    pub fn merge(&mut self, other: &ByteCounts) {
        self.total += other.total;
        self.local += other.local;
        self.remote += other.remote;
        self.origin += other.origin;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalStats {
    pub day: usize,
    pub start: f64,
    pub mlu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DayStats {
    pub day: usize,
    pub p99_mlu: f64,
    pub mean_mlu: f64,
    pub max_mlu: f64,
    pub bytes: ByteCounts,
}

/// Everything one scheme run produces.
#[derive(Debug, Clone, Default)]
pub struct MluReport {
    pub scheme: String,
    pub intervals: Vec<IntervalStats>,
    pub days: Vec<DayStats>,
    /// Planned store used on each day (empty for schemes without one).
    pub placements: Vec<Placement>,
    /// Per-interval traffic matrices, when recording was requested.
    pub matrices: Vec<TrafficMatrix>,
    /// Text of the first program solved, when capture was requested.
    pub lp_text: Option<String>,
}

impl MluReport {
    pub fn bytes(&self) -> ByteCounts {
        let mut b = ByteCounts::default();
        for d in &self.days {
            b.merge(&d.bytes);
        }
        b
    }

    pub fn hit_ratio(&self) -> f64 {
        self.bytes().hit_ratio()
    }

    pub fn origin_fraction(&self) -> f64 {
        self.bytes().origin_fraction()
    }

    pub fn mean_mlu(&self) -> f64 {
        mean(self.intervals.iter().map(|i| i.mlu))
    }

    /// Mean of the daily p99 MLU, skipping the warm-up day when there is
    /// more than one day.
    pub fn mean_daily_p99(&self) -> f64 {
        let skip = usize::from(self.days.len() > 1);
        mean(self.days.iter().skip(skip).map(|d| d.p99_mlu))
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Nearest-rank percentile (`q` in (0, 1]); zero for an empty slice.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

pub(crate) fn day_stats(day: usize, mlus: &[f64], bytes: ByteCounts) -> DayStats {
    DayStats {
        day,
        p99_mlu: percentile(mlus, 0.99),
        mean_mlu: mean(mlus.iter().copied()),
        max_mlu: mlus.iter().copied().fold(0.0, f64::max),
        bytes,
    }
}

/// `scheme,day,interval_start_s,mlu`
pub fn write_interval_csv(reports: &[MluReport]) -> String {
    let mut out = String::from("scheme,day,interval_start_s,mlu\n");
    for r in reports {
        for i in &r.intervals {
            let _ = writeln!(out, "{},{},{},{}", r.scheme, i.day, i.start, i.mlu);
        }
    }
    out
}

/// `scheme,day,p99_mlu,mean_mlu,hit_ratio,origin_fraction`
pub fn write_summary_csv(reports: &[MluReport]) -> String {
    let mut out = String::from("scheme,day,p99_mlu,mean_mlu,hit_ratio,origin_fraction\n");
    for r in reports {
        for d in &r.days {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.scheme,
                d.day,
                d.p99_mlu,
                d.mean_mlu,
                d.bytes.hit_ratio(),
                d.bytes.origin_fraction()
            );
        }
    }
    out
}

/// Per-(scheme, day) MLU statistics recomputed from an interval CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct MluSummaryRow {
    pub scheme: String,
    pub day: usize,
    pub intervals: usize,
    pub p99_mlu: f64,
    pub mean_mlu: f64,
    pub max_mlu: f64,
}

/// Parses `scheme,day,interval_start_s,mlu` rows and summarizes them per
/// scheme and day, schemes in first-seen order.
pub fn summarize_interval_csv(text: &str) -> Result<Vec<MluSummaryRow>, EngineError> {
    let mut rdr = ReaderBuilder::new().trim(Trim::All).from_reader(text.as_bytes());
    let mut order: Vec<String> = Vec::new();
    let mut series: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for (k, rec) in rdr.records().enumerate() {
        let row = k as u64 + 2;
        let rec = rec.map_err(|e| EngineError::Report { row, message: e.to_string() })?;
        if rec.len() != 4 {
            return Err(EngineError::Report { row, message: format!("expected 4 fields, found {}", rec.len()) });
        }
        let bad = |what: &str| EngineError::Report { row, message: format!("invalid {what}") };
        let day: usize = rec[1].parse().map_err(|_| bad("day"))?;
        rec[2].parse::<f64>().map_err(|_| bad("interval_start_s"))?;
        let mlu: f64 = rec[3].parse().map_err(|_| bad("mlu"))?;
        if !(mlu >= 0.0 && mlu.is_finite()) {
            return Err(bad("mlu"));
        }
        let idx = match order.iter().position(|s| s == &rec[0]) {
            Some(i) => i,
            None => {
                order.push(rec[0].to_string());
                order.len() - 1
            }
        };
        series.entry((idx, day)).or_default().push(mlu);
    }
    Ok(series
        .into_iter()
        .map(|((idx, day), v)| {
            let s = day_stats(day, &v, ByteCounts::default());
            MluSummaryRow {
                scheme: order[idx].clone(),
                day,
                intervals: v.len(),
                p99_mlu: s.p99_mlu,
                mean_mlu: s.mean_mlu,
                max_mlu: s.max_mlu,
            }
        })
        .collect())
}

/// `scheme,day,intervals,p99_mlu,mean_mlu,max_mlu`
pub fn write_mlu_summary(rows: &[MluSummaryRow]) -> String {
    let mut out = String::from("scheme,day,intervals,p99_mlu,mean_mlu,max_mlu\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{},{}", r.scheme, r.day, r.intervals, r.p99_mlu, r.mean_mlu, r.max_mlu);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile(&v, 0.99), 99.0);
        assert_eq!(percentile(&v, 1.0), 100.0);
        assert_eq!(percentile(&[3.0, 1.0, 2.0], 0.99), 3.0);
        assert_eq!(percentile(&[5.0], 0.5), 5.0);
        assert_eq!(percentile(&[], 0.99), 0.0);
        let w: Vec<f64> = (0..288).map(|i| (i * 7 % 288) as f64).collect();
        // ceil(0.99 * 288) = 286 -> 286th smallest is 285.
        assert_eq!(percentile(&w, 0.99), 285.0);
    }

    #[test]
    fn byte_ratios_sum_to_one() {
        let b = ByteCounts { total: 10, local: 3, remote: 4, origin: 3 };
        assert_eq!(b.hit_ratio() + b.origin_fraction(), 1.0);
        assert_eq!(ByteCounts::default().hit_ratio(), 0.0);
    }

    #[test]
    fn csv_round_trip_through_summary() {
        let r = MluReport {
            scheme: "lru".into(),
            intervals: vec![
                IntervalStats { day: 0, start: 0.0, mlu: 0.5 },
                IntervalStats { day: 0, start: 300.0, mlu: 0.25 },
                IntervalStats { day: 1, start: 86400.0, mlu: 0.125 },
            ],
            days: vec![
                day_stats(0, &[0.5, 0.25], ByteCounts { total: 4, local: 1, remote: 1, origin: 2 }),
                day_stats(1, &[0.125], ByteCounts::default()),
            ],
            ..Default::default()
        };
        let csv = write_interval_csv(&[r.clone()]);
        assert_eq!(csv, "scheme,day,interval_start_s,mlu\nlru,0,0,0.5\nlru,0,300,0.25\nlru,1,86400,0.125\n");
        let rows = summarize_interval_csv(&csv).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!((rows[0].p99_mlu, rows[0].mean_mlu, rows[0].max_mlu), (0.5, 0.375, 0.5));
        assert_eq!(rows[1].intervals, 1);
        let summary = write_summary_csv(&[r.clone()]);
        assert_eq!(summary.lines().nth(1), Some("lru,0,0.5,0.375,0.5,0.5"));
        assert_eq!(r.mean_daily_p99(), 0.125);
    }

    #[test]
    fn malformed_interval_csv() {
        assert!(summarize_interval_csv("scheme,day,interval_start_s,mlu\na,x,0,1\n").is_err());
        assert!(summarize_interval_csv("scheme,day,interval_start_s,mlu\na,0,0,-1\n").is_err());
        assert!(summarize_interval_csv("scheme,day,interval_start_s,mlu\na,0,0\n").is_err());
    }
}
