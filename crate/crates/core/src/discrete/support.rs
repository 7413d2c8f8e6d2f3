use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;
use crate::tables::{observed_over_expected, ContingencyTable, ExpectedCounts};

const LOWER_FLOOR: f64 = 1e-4;
const UPPER_STRETCH: f64 = 1.2;

/// Spacing of a support grid.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SupportScale {
    #[default]
    Log,
    Linear,
}

/// `K` grid points over `[max(1e-4, min O/E), 1.2 · max O/E]`, plus the value 1
/// when the grid misses it (so the result has `K` or `K + 1` points).
pub fn make_support<T: Real>(
    table: &ContingencyTable,
    e: &ExpectedCounts<T>,
    k: usize,
    scale: SupportScale,
) -> Result<Vec<T>> {
    e.check_shape(table)?;
    if k < 2 {
        return Err(Error::InvalidArgument(format!("support needs at least 2 points, got {k}")));
    }
    let ratios = observed_over_expected(table, e);
    let min = ratios.iter().copied().fold(T::infinity(), T::min);
    let max = ratios.iter().copied().fold(T::neg_infinity(), T::max);
    let lo = min.max(T::lit(LOWER_FLOOR));
    let hi = max * T::lit(UPPER_STRETCH);
    if min == max || !(hi > lo) {
        return Err(Error::InvalidArgument(format!(
            "observed-to-expected ratios span a degenerate range [{min}, {max}]"
        )));
    }
    let last = T::from_usize(k - 1).unwrap();
    let mut grid: Vec<T> = match scale {
        SupportScale::Log => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..k).map(|i| (a + (b - a) * T::from_usize(i).unwrap() / last).exp()).collect()
        }
        SupportScale::Linear => (0..k).map(|i| lo + (hi - lo) * T::from_usize(i).unwrap() / last).collect(),
    };
    // pin the endpoints against rounding in exp/ln
    grid[0] = lo;
    grid[k - 1] = hi;
    if let Err(pos) = grid.binary_search_by(|v| v.partial_cmp(&T::one()).unwrap()) {
        grid.insert(pos, T::one());
    }
    Ok(grid)
}
