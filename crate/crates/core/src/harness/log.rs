//! Per-step trajectory records, CSV output, and derived summary statistics.
//!
//! Summaries are computed from the values exactly as they appear in the CSV
//! (9 significant digits), so recomputing them from a written file
//! reproduces the printed summary bit for bit.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct StepRecord {
    pub t: usize,
    pub y: Vec<f64>,
    pub u_enc: Vec<f64>,
    pub u_base: Vec<f64>,
    pub err_inf: f64,
    pub latency_ms: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TrajectoryLog {
    pub rows: Vec<StepRecord>,
    /// Steps flagged by the error-blowup detector.
    pub anomalies: Vec<usize>,
}

/// 9 significant digits, the CSV number format.
fn csv_num(v: f64) -> String {
    format!("{v:.8e}")
}

fn csv_round(v: f64) -> f64 {
    csv_num(v).parse().unwrap()
}

impl TrajectoryLog {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn max_err(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| csv_round(r.err_inf))
            .fold(0.0, f64::max)
    }

    pub fn mean_err(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows.iter().map(|r| csv_round(r.err_inf)).sum::<f64>() / self.rows.len() as f64
    }

    pub fn mean_latency_ms(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows
            .iter()
            .map(|r| csv_round(r.latency_ms))
            .sum::<f64>()
            / self.rows.len() as f64
    }

    pub fn median_latency_ms(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        let mut lat: Vec<f64> = self.rows.iter().map(|r| csv_round(r.latency_ms)).collect();
        lat.sort_by(f64::total_cmp);
        let mid = lat.len() / 2;
        if lat.len() % 2 == 1 {
            lat[mid]
        } else {
            (lat[mid - 1] + lat[mid]) / 2.0
        }
    }

    pub fn to_csv(&self) -> String {
        let (l, m) = self
            .rows
            .first()
            .map(|r| (r.y.len(), r.u_enc.len()))
            .unwrap_or((0, 0));
        let mut out = String::from("t");
        for i in 0..l {
            out.push_str(&format!(",y_{i}"));
        }
        for i in 0..m {
            out.push_str(&format!(",u_enc_{i}"));
        }
        for i in 0..m {
            out.push_str(&format!(",u_base_{i}"));
        }
        out.push_str(",err_inf,latency_ms\n");
        for r in &self.rows {
            out.push_str(&r.t.to_string());
            for v in r.y.iter().chain(&r.u_enc).chain(&r.u_base) {
                out.push(',');
                out.push_str(&csv_num(*v));
            }
            out.push(',');
            out.push_str(&csv_num(r.err_inf));
            out.push(',');
            out.push_str(&csv_num(r.latency_ms));
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(Error::from)
    }

    pub fn summary(&self) -> String {
        format!(
            "steps: {}\nmax error: {}\nmean error: {}\nmean latency ms: {}\nmedian latency ms: {}\nanomaly flags: {}\n",
            self.rows.len(),
            csv_num(self.max_err()),
            csv_num(self.mean_err()),
            csv_num(self.mean_latency_ms()),
            csv_num(self.median_latency_ms()),
            self.anomalies.len(),
        )
    }

    /// Flags a step whose error exceeds 100x the running median; tiny errors
    /// below the sensor resolution never flag.
    pub fn push_with_anomaly_check(&mut self, row: StepRecord, err_floor: f64) {
        if row.t >= 10 {
            let mut errs: Vec<f64> = self.rows.iter().map(|r| r.err_inf).collect();
            errs.sort_by(f64::total_cmp);
            let median = errs[errs.len() / 2];
            if median > 0.0 && row.err_inf > 100.0 * median && row.err_inf > err_floor {
                self.anomalies.push(row.t);
            }
        }
        self.rows.push(row);
    }
}

/// Per-step infinity-norm differences between the plant inputs of two
/// independently-run closed loops; returns (max, mean).
pub fn performance_error(enc: &TrajectoryLog, base: &TrajectoryLog) -> Result<(f64, f64)> {
    if enc.len() != base.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} vs {} steps",
            enc.len(),
            base.len()
        )));
    }
    if enc.is_empty() {
        return Ok((0.0, 0.0));
    }
    let diffs: Vec<f64> = enc
        .rows
        .iter()
        .zip(&base.rows)
        .map(|(a, b)| {
            a.u_enc
                .iter()
                .zip(&b.u_enc)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let max = diffs.iter().cloned().fold(0.0, f64::max);
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    Ok((max, mean))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: usize, err: f64) -> StepRecord {
        StepRecord {
            t,
            y: vec![0.1, 0.2],
            u_enc: vec![0.3, 0.4],
            u_base: vec![0.3, 0.4],
            err_inf: err,
            latency_ms: 1.5,
        }
    }

    #[test]
    fn summary_matches_recomputation_from_csv() {
        let mut log = TrajectoryLog::default();
        for t in 0..50 {
            log.push_with_anomaly_check(row(t, 0.001 * (t as f64 + 1.0) / 7.0), 1e-4);
        }
        let csv = log.to_csv();
        let mut errs = Vec::new();
        for line in csv.lines().skip(1) {
            let fields: Vec<&str> = line.split(',').collect();
            errs.push(fields[fields.len() - 2].parse::<f64>().unwrap());
        }
        let max = errs.iter().cloned().fold(0.0, f64::max);
        let mean = errs.iter().sum::<f64>() / errs.len() as f64;
        assert_eq!(max, log.max_err());
        assert_eq!(mean, log.mean_err());
    }

    #[test]
    fn empty_log_is_typed_but_empty() {
        let log = TrajectoryLog::default();
        assert!(log.is_empty());
        assert_eq!(log.max_err(), 0.0);
        assert_eq!(log.to_csv(), "t,err_inf,latency_ms\n");
    }

    #[test]
    fn performance_error_end_to_end() {
        let mut a = TrajectoryLog::default();
        let mut b = TrajectoryLog::default();
        for t in 0..10 {
            a.rows.push(row(t, 0.0));
            b.rows.push(row(t, 0.0));
        }
        assert_eq!(performance_error(&a, &b).unwrap(), (0.0, 0.0));
        b.rows[3].u_enc = vec![0.5, 0.4];
        let (max, mean) = performance_error(&a, &b).unwrap();
        assert!((max - 0.2).abs() < 1e-12);
        assert!((mean - 0.02).abs() < 1e-12);
        b.rows.pop();
        assert!(performance_error(&a, &b).is_err());
    }

    #[test]
    fn anomaly_flagging() {
        let mut log = TrajectoryLog::default();
        for t in 0..20 {
            log.push_with_anomaly_check(row(t, 1e-3), 1e-4);
        }
        assert!(log.anomalies.is_empty());
        log.push_with_anomaly_check(row(20, 0.5), 1e-4);
        assert_eq!(log.anomalies, vec![20]);
        // below the floor: never flagged even when the ratio is huge
        let mut quiet = TrajectoryLog::default();
        for t in 0..20 {
            quiet.push_with_anomaly_check(row(t, 1e-12), 1e-4);
        }
        quiet.push_with_anomaly_check(row(20, 5e-10), 1e-4);
        assert!(quiet.anomalies.is_empty());
    }
}
