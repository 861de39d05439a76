//! Width and vertex measurements on sampled 1-D profiles.

use crate::{QoctError, Result};

/// Walks from `start` in direction `step` until the profile leaves the
/// feature (`inside` turns false) and linearly interpolates the `level`
/// crossing.
fn crossing(
    z: &[f64],
    v: &[f64],
    start: usize,
    step: isize,
    level: f64,
    inside: impl Fn(f64) -> bool,
) -> Result<f64> {
    let mut i = start;
    loop {
        let next = i as isize + step;
        if next < 0 || next as usize >= v.len() {
            return Err(QoctError::Edge);
        }
        let j = next as usize;
        if !inside(v[j]) {
            let t = (level - v[i]) / (v[j] - v[i]);
            return Ok(z[i] + t * (z[j] - z[i]));
        }
        i = j;
    }
}

/// Full width at half depth of the global minimum of a dip that falls from
/// `baseline`. The minimum must lie below `threshold`.
pub fn dip_width(z: &[f64], v: &[f64], baseline: f64, threshold: f64) -> Result<f64> {
    check_lengths(z, v)?;
    let (imin, &min) = v
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    if min >= threshold {
        return Err(QoctError::NoFeature(format!(
            "minimum {min} is not below {threshold}"
        )));
    }
    let half = 0.5 * (baseline + min);
    let left = crossing(z, v, imin, -1, half, |x| x < half)?;
    let right = crossing(z, v, imin, 1, half, |x| x < half)?;
    Ok(right - left)
}

/// Full width at half maximum of the global maximum of a non-negative peak.
pub fn peak_width(z: &[f64], v: &[f64]) -> Result<f64> {
    check_lengths(z, v)?;
    let (imax, &max) = v
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || max - min <= 1e-9 * max {
        return Err(QoctError::NoFeature("profile is flat".into()));
    }
    let half = 0.5 * max;
    let left = crossing(z, v, imax, -1, half, |x| x > half)?;
    let right = crossing(z, v, imax, 1, half, |x| x > half)?;
    Ok(right - left)
}

/// Offset (in samples, within ±0.5 for a true local extremum) of the vertex
/// of the parabola through three equally spaced points.
pub fn parabolic_offset(before: f64, center: f64, after: f64) -> f64 {
    let curvature = before - 2.0 * center + after;
    if curvature == 0.0 {
        return 0.0;
    }
    (0.5 * (before - after) / curvature).clamp(-0.5, 0.5)
}

fn check_lengths(z: &[f64], v: &[f64]) -> Result<()> {
    if z.len() != v.len() || v.len() < 3 {
        return Err(QoctError::InvalidInput(format!(
            "profile needs ≥ 3 matching samples (z: {}, values: {})",
            z.len(),
            v.len()
        )));
    }
    Ok(())
}
