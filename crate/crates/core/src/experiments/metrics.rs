use std::io::Write;

use crate::error::Result;

/// One measurement: the x column holds a gradient step, an iteration, a
/// dataset size, or an interpolation coefficient depending on the
/// experiment, and the metric column names what was measured.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub experiment: String,
    pub method: String,
    pub seed: u64,
    pub x: f64,
    pub metric: String,
    pub value: f64,
}

impl MetricsRecord {
    pub fn new(
        experiment: impl Into<String>,
        method: impl Into<String>,
        seed: u64,
        x: f64,
        metric: impl Into<String>,
        value: f64,
    ) -> Self {
        Self {
            experiment: experiment.into(),
            method: method.into(),
            seed,
            x,
            metric: metric.into(),
            value,
        }
    }
}

/// Writes rows in their given order; reruns with the same configuration
/// produce byte-identical output.
pub fn write_metrics_csv<W: Write>(mut w: W, rows: &[MetricsRecord]) -> Result<()> {
    writeln!(w, "experiment,method,seed,x,metric,value")?;
    for row in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            row.experiment, row.method, row.seed, row.x, row.metric, row.value
        )?;
    }
    Ok(())
}

/// Mean and population standard deviation.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Pointwise mean of aligned (x, y) curves. The curves must share their
/// x grid, which holds for histories recorded at one evaluation cadence.
pub fn mean_curve(curves: &[Vec<(f64, f64)>]) -> Vec<(f64, f64)> {
    let Some(first) = curves.first() else {
        return Vec::new();
    };
    let mut out = Vec::with_capacity(first.len());
    for i in 0..first.len() {
        let x = first[i].0;
        let mut sum = 0.0;
        let mut count = 0.0;
        for curve in curves {
            if let Some(&(cx, cy)) = curve.get(i) {
                debug_assert_eq!(cx, x, "curves share an x grid");
                sum += cy;
                count += 1.0;
            }
        }
        out.push((x, sum / count));
    }
    out
}
