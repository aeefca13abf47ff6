//! Mean and 95% confidence interval per scheme and sweep point.

use std::collections::BTreeMap;
use std::io::Write;

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::Result;
use crate::sim::{ResultRow, Scheme};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub samples: usize,
    pub mean: Option<f64>,
    /// Half width of the two-sided 95% Student-t interval; needs two samples.
    pub half_width: Option<f64>,
}

impl Estimate {
    /// Values are sorted first so the result does not depend on row order.
    pub fn from_values(mut values: Vec<f64>) -> Self {
        values.sort_by(f64::total_cmp);
        let n = values.len();
        if n == 0 {
            return Estimate {
                samples: 0,
                mean: None,
                half_width: None,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let half_width = (n >= 2).then(|| {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
                .expect("positive degrees of freedom")
                .inverse_cdf(0.975);
            t * (var / n as f64).sqrt()
        });
        Estimate {
            samples: n,
            mean: Some(mean),
            half_width,
        }
    }

    pub fn lower(&self) -> Option<f64> {
        Some(self.mean? - self.half_width?)
    }

    pub fn upper(&self) -> Option<f64> {
        Some(self.mean? + self.half_width?)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub scheme: Scheme,
    pub arrivals_mean: usize,
    pub replications: usize,
    pub goodput: Estimate,
    pub det_prob: Estimate,
    pub step1_ms: Estimate,
    pub final_ms: Estimate,
    pub false_positives: Estimate,
}

/// Groups rows by `(scheme, N)`, sorted by scheme then `N`.
pub fn summarize(rows: &[ResultRow]) -> Vec<Summary> {
    let mut groups: BTreeMap<(Scheme, usize), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.scheme, r.arrivals_mean)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((scheme, n), rows)| {
            let col =
                |f: fn(&ResultRow) -> Option<f64>| Estimate::from_values(rows.iter().filter_map(|r| f(r)).collect());
            Summary {
                scheme,
                arrivals_mean: n,
                replications: rows.len(),
                goodput: col(|r| r.goodput),
                det_prob: col(|r| r.det_prob),
                step1_ms: col(|r| r.mean_step1_ms),
                final_ms: col(|r| r.mean_final_ms),
                false_positives: col(|r| Some(r.false_positives)),
            }
        })
        .collect()
}

pub fn find(summaries: &[Summary], scheme: Scheme, n: usize) -> Option<&Summary> {
    summaries.iter().find(|s| s.scheme == scheme && s.arrivals_mean == n)
}

/// CSV with `<metric>_mean` and `<metric>_ci` columns; absent values are empty.
pub fn write_summary<W: Write>(out: W, summaries: &[Summary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "scheme",
        "N",
        "replications",
        "goodput_mean",
        "goodput_ci",
        "det_prob_mean",
        "det_prob_ci",
        "step1_ms_mean",
        "step1_ms_ci",
        "final_ms_mean",
        "final_ms_ci",
        "false_positives_mean",
        "false_positives_ci",
    ])?;
    let f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for s in summaries {
        let mut rec = vec![
            s.scheme.to_string(),
            s.arrivals_mean.to_string(),
            s.replications.to_string(),
        ];
        for e in [&s.goodput, &s.det_prob, &s.step1_ms, &s.final_ms, &s.false_positives] {
            rec.push(f(e.mean));
            rec.push(f(e.half_width));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Human-readable table in percent and milliseconds.
pub fn format_table(summaries: &[Summary]) -> String {
    let pct = |e: &Estimate| match (e.mean, e.half_width) {
        (Some(m), Some(h)) => format!("{:6.2} ± {:5.2}", 100.0 * m, 100.0 * h),
        (Some(m), None) => format!("{:6.2}        ", 100.0 * m),
        _ => "      -        ".to_string(),
    };
    let ms = |e: &Estimate| match (e.mean, e.half_width) {
        (Some(m), Some(h)) => format!("{m:7.2} ± {h:5.2}"),
        (Some(m), None) => format!("{m:7.2}        "),
        _ => "       -        ".to_string(),
    };
    let mut out = format!(
        "{:<10} {:>5} {:>5}  {:<15} {:<15} {:<16} {:<16}\n",
        "scheme", "N", "reps", "goodput %", "detection %", "step1 ms", "final ms"
    );
    for s in summaries {
        out.push_str(&format!(
            "{:<10} {:>5} {:>5}  {} {} {} {}\n",
            s.scheme.as_str(),
            s.arrivals_mean,
            s.replications,
            pct(&s.goodput),
            pct(&s.det_prob),
            ms(&s.step1_ms),
            ms(&s.final_ms)
        ));
    }
    out
}
