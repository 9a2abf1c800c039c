use crate::error::{Error, Result};

/// `sqrt(Σ(y − ŷ)² / Σy²)`.
pub fn relative_error(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    if actual.len() != predicted.len() {
        return Err(Error::ShapeError(format!(
            "{} actual values vs {} predictions",
            actual.len(),
            predicted.len()
        )));
    }
    let denom: f64 = actual.iter().map(|y| y * y).sum();
    if denom == 0.0 {
        return Err(Error::UndefinedError);
    }
    let num: f64 = actual
        .iter()
        .zip(predicted)
        .map(|(y, p)| (y - p).powi(2))
        .sum();
    Ok((num / denom).sqrt())
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// 1 when the forecast moves away from the anchor in the same direction as
/// the actual value (a flat actual and a flat forecast agree).
pub fn directional_accuracy(anchor: f64, actual: f64, predicted: f64) -> u8 {
    u8::from(sign(actual - anchor) == sign(predicted - anchor))
}

/// Column means of a windows × horizon 0/1 matrix.
pub fn mda(per_window: &[Vec<u8>]) -> Result<Vec<f64>> {
    let first = per_window.first().ok_or(Error::EmptyPlan)?;
    let h = first.len();
    if per_window.iter().any(|r| r.len() != h) {
        return Err(Error::ShapeError(
            "ragged directional-accuracy matrix".into(),
        ));
    }
    let n = per_window.len() as f64;
    Ok((0..h)
        .map(|q| per_window.iter().map(|r| r[q] as f64).sum::<f64>() / n)
        .collect())
}

/// Interval coverage across windows.
#[derive(Debug, Clone, PartialEq)]
pub struct Coverage {
    /// Fraction of windows whose closed interval contains the actual, per horizon.
    pub probability: Vec<f64>,
    /// `upper − lower`, windows × horizon.
    pub ranges: Vec<Vec<f64>>,
}

impl Coverage {
    /// Median interval width per horizon.
    pub fn median_ranges(&self) -> Vec<f64> {
        let h = self.probability.len();
        (0..h)
            .map(|q| median(&self.ranges.iter().map(|r| r[q]).collect::<Vec<_>>()))
            .collect()
    }
}

pub fn coverage(
    actuals: &[Vec<f64>],
    lowers: &[Vec<f64>],
    uppers: &[Vec<f64>],
) -> Result<Coverage> {
    let first = actuals.first().ok_or(Error::EmptyPlan)?;
    let h = first.len();
    if lowers.len() != actuals.len() || uppers.len() != actuals.len() {
        return Err(Error::ShapeError(
            "interval arrays not aligned with actuals".into(),
        ));
    }
    let mut hits = vec![0usize; h];
    let mut ranges = Vec::with_capacity(actuals.len());
    for ((a, lo), up) in actuals.iter().zip(lowers).zip(uppers) {
        if a.len() != h || lo.len() != h || up.len() != h {
            return Err(Error::ShapeError(
                "interval arrays not aligned with actuals".into(),
            ));
        }
        let mut row = Vec::with_capacity(h);
        for q in 0..h {
            if lo[q] > up[q] {
                return Err(Error::InvalidInterval {
                    lower: lo[q],
                    upper: up[q],
                });
            }
            if lo[q] <= a[q] && a[q] <= up[q] {
                hits[q] += 1;
            }
            row.push(up[q] - lo[q]);
        }
        ranges.push(row);
    }
    let n = actuals.len() as f64;
    Ok(Coverage {
        probability: hits.into_iter().map(|c| c as f64 / n).collect(),
        ranges,
    })
}

/// Median with the midpoint rule for even counts; NaN for empty input.
pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}
