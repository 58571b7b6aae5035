use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{patch, Checkpoint, PatchError};

/// `0, step, 2·step, …, 1`. `step` must divide 1 into a whole number of
/// parts; values are computed as `i / n` so that `0.15` prints as `0.15`.
pub fn default_alphas(step: f64) -> Result<Vec<f64>, PatchError> {
    let parts = (1.0 / step).round();
    if !(step > 0.0 && step <= 1.0) || ((parts * step) - 1.0).abs() > 1e-9 {
        return Err(PatchError::AlphaOutOfRange(step));
    }
    let n = parts as usize;
    Ok((0..=n).map(|i| i as f64 / n as f64).collect())
}

/// One evaluated point of the curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn alphas(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for r in &self.rows {
            if out.last() != Some(&r.alpha) {
                out.push(r.alpha);
            }
        }
        out
    }

    /// `(alpha, value)` pairs of one metric.
    pub fn series(&self, metric: &str) -> Vec<(f64, f64)> {
        self.rows.iter().filter(|r| r.metric == metric).map(|r| (r.alpha, r.value)).collect()
    }

    pub fn value(&self, alpha: f64, metric: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.alpha == alpha && r.metric == metric).map(|r| r.value)
    }
}

/// Patches at every α and evaluates the result. `alphas` must be strictly
/// increasing within `[0, 1]`, and `evaluate` must return the same metric
/// names each time. With `parallel`, α values are evaluated concurrently;
/// rows keep α order either way.
pub fn sweep<E>(pt: &Checkpoint, ft: &Checkpoint, alphas: &[f64], parallel: bool, evaluate: E) -> Result<SweepResult, PatchError>
where
    E: Fn(f64, &Checkpoint) -> Result<Vec<(String, f64)>, PatchError> + Sync,
{
    if let Some(&bad) = alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(PatchError::AlphaOutOfRange(bad));
    }
    if alphas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(PatchError::Eval("alphas must be strictly increasing".to_string()));
    }
    super::check_compatible(pt, ft)?;
    let point = |&alpha: &f64| -> Result<Vec<SweepRow>, PatchError> {
        let model = patch(pt, ft, alpha)?;
        let metrics = evaluate(alpha, &model)?;
        log::debug!("alpha {alpha}: {metrics:?}");
        Ok(metrics
            .into_iter()
            .map(|(metric, value)| SweepRow { alpha, metric, value })
            .collect())
    };
    let points: Vec<Vec<SweepRow>> = if parallel {
        alphas.par_iter().map(point).collect::<Result<_, _>>()?
    } else {
        alphas.iter().map(point).collect::<Result<_, _>>()?
    };
    if let Some(first) = points.first() {
        let names: Vec<&str> = first.iter().map(|r| r.metric.as_str()).collect();
        for p in &points[1..] {
            if p.iter().map(|r| r.metric.as_str()).ne(names.iter().copied()) {
                return Err(PatchError::Eval(format!("metric set changed at alpha {}", p.first().map_or(f64::NAN, |r| r.alpha))));
            }
        }
    }
    Ok(SweepResult {
        rows: points.into_iter().flatten().collect(),
    })
}

/// Writes `alpha,metric,value`.
pub fn write_sweep_csv(result: &SweepResult, path: &Path) -> Result<(), PatchError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| PatchError::Eval(format!("{}: {e}", path.display())))?;
    for row in &result.rows {
        w.serialize(row).map_err(|e| PatchError::Eval(e.to_string()))?;
    }
    w.flush().map_err(|e| PatchError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patcher::Tensor;

    fn scalar(v: f32) -> Checkpoint {
        let mut c = Checkpoint::new();
        c.insert("w", Tensor::new(vec![1], vec![v]).unwrap());
        c
    }

    fn read(c: &Checkpoint) -> Vec<(String, f64)> {
        vec![("w".to_string(), c.get("w").unwrap().data[0] as f64)]
    }

    #[test]
    fn default_grid() {
        let a = default_alphas(0.05).unwrap();
        assert_eq!(a.len(), 21);
        assert_eq!(a[3], 0.15);
        assert_eq!((a[0], a[20]), (0.0, 1.0));
        assert!(default_alphas(0.3).is_err());
    }

    #[test]
    fn endpoints_match_direct_evaluation() {
        let (pt, ft) = (scalar(2.0), scalar(-1.0));
        let r = sweep(&pt, &ft, &[0.0, 1.0], false, |_, c| Ok(read(c))).unwrap();
        assert_eq!(r.value(0.0, "w"), Some(read(&pt)[0].1));
        assert_eq!(r.value(1.0, "w"), Some(read(&ft)[0].1));
    }

    #[test]
    fn parallel_matches_sequential_and_csv() {
        let (pt, ft) = (scalar(1.0), scalar(0.0));
        let alphas = default_alphas(0.05).unwrap();
        let a = sweep(&pt, &ft, &alphas, false, |_, c| Ok(read(c))).unwrap();
        let b = sweep(&pt, &ft, &alphas, true, |_, c| Ok(read(c))).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.series("w").len(), 21);
        let dir = tempfile::TempDir::new().unwrap();
        let path = dir.path().join("curve.csv");
        write_sweep_csv(&a, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("alpha,metric,value\n0.0,w,1.0\n0.05,w,0.949999988079071\n"), "{text}");
    }

    #[test]
    fn bad_grids() {
        let c = scalar(1.0);
        assert!(sweep(&c, &c, &[0.5, 0.2], false, |_, c| Ok(read(c))).is_err());
        assert!(matches!(sweep(&c, &c, &[1.5], false, |_, c| Ok(read(c))), Err(PatchError::AlphaOutOfRange(_))));
    }
}
