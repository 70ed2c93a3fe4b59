use crate::error::{Error, Result};

fn check(members: &[Vec<f64>], universe: &[Vec<f64>]) -> Result<usize> {
    let width = members.first().ok_or(Error::EmptyExplanation)?.len();
    if let Some(bad) = members.iter().chain(universe).find(|p| p.len() != width) {
        return Err(Error::DimensionMismatch {
            expected: width,
            actual: bad.len(),
            context: "measure vectors",
        });
    }
    Ok(width)
}

/// Mean normalized measure value over members and measures.
pub fn nipf(members: &[Vec<f64>]) -> Result<f64> {
    let width = check(members, &[])?;
    let total: f64 = members.iter().flatten().sum();
    Ok(total / (members.len() * width) as f64)
}

/// For every measure, the distance from each of the universe's top-k values
/// to the nearest member value on that measure, summed and divided by
/// `k·|Φ|`.
pub fn nigd(members: &[Vec<f64>], universe: &[Vec<f64>], k: usize) -> Result<f64> {
    let width = check(members, universe)?;
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    let mut total = 0.0;
    for m in 0..width {
        let mut column: Vec<f64> = universe.iter().map(|p| p[m]).collect();
        column.sort_by(|a, b| b.total_cmp(a));
        for reference in column.into_iter().take(k) {
            total += members
                .iter()
                .map(|p| (p[m] - reference).abs())
                .fold(f64::INFINITY, f64::min);
        }
    }
    Ok(total / (k * width) as f64)
}

/// Per measure, the best member value over the best universe value.
pub fn nms(members: &[Vec<f64>], universe: &[Vec<f64>]) -> Result<Vec<f64>> {
    let width = check(members, universe)?;
    (0..width)
        .map(|m| {
            let best =
                |set: &[Vec<f64>]| set.iter().map(|p| p[m]).fold(f64::NEG_INFINITY, f64::max);
            let global = best(universe).max(best(members));
            if global <= 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "measure {m} has no positive value"
                )));
            }
            Ok(best(members) / global)
        })
        .collect()
}
