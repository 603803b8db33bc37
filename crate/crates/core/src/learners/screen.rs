use serde::{Deserialize, Serialize};

use super::Frame;
use crate::error::{Error, Result};
use crate::stats::{correlation_p_value, is_constant, pearson};

/// Univariate correlation screen settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScreenSpec {
    /// Keep a column when its correlation-test p-value is below this.
    pub alpha: f64,
    /// Lower bound on the number of kept (non-constant) columns.
    pub min_keep: usize,
}

impl Default for ScreenSpec {
    fn default() -> Self {
        ScreenSpec { alpha: 0.10, min_keep: 2 }
    }
}

impl ScreenSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("screen alpha {} not in (0, 1)", self.alpha)));
        }
        if self.min_keep < 1 {
            return Err(Error::Config("screen min_keep must be at least 1".into()));
        }
        Ok(())
    }
}

/// Column mask from Pearson correlation tests against `y`.
///
/// A column is kept when its two-sided p-value is below `alpha`. Constant
/// columns are never kept. When fewer than `min_keep` columns pass, the
/// `min_keep` non-constant columns with the largest `|r|` are kept instead
/// (ties go to the lower column index).
pub fn screen_correlation(x: &Frame, y: &[f64], alpha: f64, min_keep: usize) -> Result<Vec<bool>> {
    if x.ncols() == 0 {
        return Err(Error::Dimension("screening needs at least one column".into()));
    }
    if x.nrows() != y.len() {
        return Err(Error::Dimension("screening rows differ from response length".into()));
    }
    if is_constant(y) {
        return Err(Error::Data("response is constant; correlations are undefined".into()));
    }
    let n = y.len();
    let stats: Vec<Option<(f64, f64)>> = (0..x.ncols())
        .map(|j| {
            let col = x.column(j);
            if is_constant(&col) {
                return None;
            }
            pearson(&col, y).map(|r| (r, correlation_p_value(r, n)))
        })
        .collect();

    let mut mask: Vec<bool> = stats.iter().map(|s| matches!(s, Some((_, p)) if *p < alpha)).collect();
    let kept = mask.iter().filter(|&&k| k).count();
    if kept < min_keep {
        let mut ranked: Vec<(usize, f64)> =
            stats.iter().enumerate().filter_map(|(j, s)| s.map(|(r, _)| (j, r.abs()))).collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        mask = vec![false; x.ncols()];
        for (j, _) in ranked.into_iter().take(min_keep) {
            mask[j] = true;
        }
    }
    Ok(mask)
}
