//! Exact low-dimensional fits: least-squares lines and tightest valid
//! linear envelopes.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares `y ≈ intercept + slope·x`.
pub fn least_squares(points: &[(f64, f64)]) -> Result<LineFit> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return Err(Error::Degenerate("a line fit needs at least two points".into()));
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Degenerate("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(LineFit { slope, intercept, r2 })
}

/// A valid upper envelope `y ≤ c + slope·x` of a point set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Envelope {
    pub c: f64,
    pub slope: f64,
    /// `c + slope·xᵢ − yᵢ` per point, all nonnegative.
    pub margins: Vec<f64>,
    /// Largest margin: the objective that was minimized.
    pub max_margin: f64,
}

/// Among envelopes `y ≤ c + s·x` valid at every point, with `s ∈ [lo, hi]`
/// and `c ≥ c_min`, finds one minimizing the largest margin. The objective
/// is convex and piecewise linear in `s`, so an optimum sits at an interval
/// end or at a crossing of two of the lines `s ↦ yᵢ − s·xᵢ` (or of one line
/// with `c_min`); every candidate is evaluated. Ties go to the larger slope.
pub fn tightest_envelope(points: &[(f64, f64)], lo: f64, hi: f64, c_min: Option<f64>) -> Result<Envelope> {
    if points.is_empty() {
        return Err(Error::Degenerate("no points to fit".into()));
    }
    if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return Err(Error::Degenerate("non-finite point in fit".into()));
    }
    if !(lo <= hi) {
        return Err(Error::Degenerate(format!("empty slope range [{lo}, {hi}]")));
    }
    let line = |i: usize, s: f64| points[i].1 - s * points[i].0;
    let mut candidates = vec![lo, hi];
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let dx = points[i].0 - points[j].0;
            if dx != 0.0 {
                candidates.push((points[i].1 - points[j].1) / dx);
            }
        }
        if let Some(cm) = c_min {
            if points[i].0 != 0.0 {
                candidates.push((points[i].1 - cm) / points[i].0);
            }
        }
    }
    let objective = |s: f64| {
        let top = (0..points.len()).map(|i| line(i, s)).fold(f64::NEG_INFINITY, f64::max);
        let c = c_min.map_or(top, |cm| top.max(cm));
        let bottom = (0..points.len()).map(|i| line(i, s)).fold(f64::INFINITY, f64::min);
        (c, c - bottom)
    };
    let mut best: Option<(f64, f64, f64)> = None;
    for s in candidates.into_iter().filter(|s| s.is_finite() && *s >= lo && *s <= hi) {
        let (c, obj) = objective(s);
        let better = match best {
            None => true,
            Some((_, bs, bo)) => obj < bo - 1e-12 * bo.abs().max(1e-300) || (obj <= bo + 1e-12 * bo.abs() && s > bs),
        };
        if better {
            best = Some((c, s, obj));
        }
    }
    let (c, slope, max_margin) = best.expect("interval ends are candidates");
    let margins = points.iter().map(|p| c + slope * p.0 - p.1).collect();
    Ok(Envelope { c, slope, margins, max_margin })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn least_squares_recovers_an_exact_line() {
        let pts: Vec<(f64, f64)> = (0..6).map(|i| (i as f64, 2.0 - 0.5 * i as f64)).collect();
        let f = least_squares(&pts).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-14 && (f.intercept - 2.0).abs() < 1e-14);
        assert!((f.r2 - 1.0).abs() < 1e-14);
        assert!(least_squares(&[(1.0, 1.0), (1.0, 2.0)]).is_err());
    }

    #[test]
    fn envelope_of_collinear_points_is_the_line() {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| (-(i as f64), 0.3 - 0.4 * i as f64)).collect();
        let e = tightest_envelope(&pts, 0.0, 1.0, None).unwrap();
        assert!((e.slope - 0.4).abs() < 1e-12 && (e.c - 0.3).abs() < 1e-12);
        assert!(e.max_margin < 1e-12);
    }

    #[test]
    fn slope_is_clamped_to_its_range() {
        let pts = [(-1.0, -3.0), (-2.0, -6.0)];
        let e = tightest_envelope(&pts, 0.0, 1.0, None).unwrap();
        assert_eq!(e.slope, 1.0);
        assert!(e.margins.iter().all(|&m| m >= 0.0));
    }

    #[test]
    fn intercept_floor_is_respected() {
        let pts = [(-1.0, -3.0), (-2.0, -4.0)];
        let e = tightest_envelope(&pts, 0.0, 1.0, Some(0.0)).unwrap();
        assert!(e.c >= 0.0);
        assert!(e.margins.iter().all(|&m| m >= -1e-15));
    }

    proptest! {
        #[test]
        fn envelope_is_valid_and_no_grid_slope_is_tighter(
            pts in prop::collection::vec((-5.0f64..0.0, -5.0f64..1.0), 1..12),
            floor in prop::option::of(-1.0f64..1.0),
        ) {
            let e = tightest_envelope(&pts, 0.0, 1.0, floor).unwrap();
            prop_assert!(e.margins.iter().all(|&m| m >= -1e-12));
            if let Some(f) = floor {
                prop_assert!(e.c >= f);
            }
            for k in 0..=100 {
                let s = k as f64 / 100.0;
                let top = pts.iter().map(|p| p.1 - s * p.0).fold(f64::NEG_INFINITY, f64::max);
                let c = floor.map_or(top, |f| top.max(f));
                let worst = pts.iter().map(|p| c + s * p.0 - p.1).fold(0.0, f64::max);
                prop_assert!(e.max_margin <= worst + 1e-9);
            }
        }
    }
}
