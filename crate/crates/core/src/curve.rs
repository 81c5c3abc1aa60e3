//! Concave piecewise-linear map from data-center power input to compute rate.

use serde::{Deserialize, Serialize};
use thiserror::Error;

const CONTINUITY_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurveError {
    #[error("a processing curve needs at least two breakpoints")]
    TooFewBreakpoints,
    #[error("first breakpoint must be (0, 0), got ({0}, {1})")]
    NonzeroOrigin(f64, f64),
    #[error("breakpoint {0}: power must strictly increase")]
    NonIncreasingPower(usize),
    #[error("segment {0}: slope must be positive")]
    NonPositiveSlope(usize),
    #[error("segment {0}: slope must be strictly below the previous segment's (concavity)")]
    NotConcave(usize),
    #[error("segment {0}: domain does not start where the previous one ends")]
    Gap(usize),
    #[error("segment {0}: discontinuous at its left breakpoint")]
    Discontinuous(usize),
    #[error("value {0} is not finite")]
    NotFinite(f64),
    #[error("interval length must be positive, got {0}")]
    BadInterval(f64),
    #[error("power {power} kW outside curve domain [{lo}, {hi}] kW")]
    PowerOutOfDomain { power: f64, lo: f64, hi: f64 },
    #[error("work {work} exceeds the curve maximum {max} (shortfall {shortfall})")]
    InfeasibleWork { work: f64, max: f64, shortfall: f64 },
}

/// One linear piece `rate = slope·power + intercept` on `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub slope: f64,
    pub intercept: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Segment {
    fn rate(&self, power: f64) -> f64 {
        self.slope * power + self.intercept
    }
}

/// Validated concave processing curve. Domains are half-open `[lo, hi)` with
/// the last one closed, slopes strictly decrease and `F(0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessingCurve {
    segments: Vec<Segment>,
}

impl ProcessingCurve {
    /// Builds a curve from `K + 1` `(power_kw, gflops)` points starting at
    /// the origin.
    pub fn from_breakpoints(points: &[(f64, f64)]) -> Result<Self, CurveError> {
        if points.len() < 2 {
            return Err(CurveError::TooFewBreakpoints);
        }
        for &(p, w) in points {
            for v in [p, w] {
                if !v.is_finite() {
                    return Err(CurveError::NotFinite(v));
                }
            }
        }
        let segments = points
            .windows(2)
            .enumerate()
            .map(|(k, pair)| {
                let ((p0, w0), (p1, w1)) = (pair[0], pair[1]);
                if p1 <= p0 {
                    return Err(CurveError::NonIncreasingPower(k + 1));
                }
                let slope = (w1 - w0) / (p1 - p0);
                Ok(Segment {
                    slope,
                    intercept: w0 - slope * p0,
                    lo: p0,
                    hi: p1,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        if points[0] != (0.0, 0.0) {
            return Err(CurveError::NonzeroOrigin(points[0].0, points[0].1));
        }
        Self::from_segments(segments)
    }

    pub fn from_segments(segments: Vec<Segment>) -> Result<Self, CurveError> {
        let Some(first) = segments.first() else {
            return Err(CurveError::TooFewBreakpoints);
        };
        if first.lo != 0.0 || first.intercept.abs() > CONTINUITY_TOL {
            return Err(CurveError::NonzeroOrigin(first.lo, first.intercept));
        }
        for (k, s) in segments.iter().enumerate() {
            for v in [s.slope, s.intercept, s.lo, s.hi] {
                if !v.is_finite() {
                    return Err(CurveError::NotFinite(v));
                }
            }
            if s.hi <= s.lo {
                return Err(CurveError::NonIncreasingPower(k + 1));
            }
            if s.slope <= 0.0 {
                return Err(CurveError::NonPositiveSlope(k));
            }
            if k > 0 {
                let prev = &segments[k - 1];
                if s.lo != prev.hi {
                    return Err(CurveError::Gap(k));
                }
                if s.slope >= prev.slope {
                    return Err(CurveError::NotConcave(k));
                }
                let left = prev.rate(s.lo);
                let right = s.rate(s.lo);
                if (left - right).abs() > CONTINUITY_TOL * (1.0 + left.abs()) {
                    return Err(CurveError::Discontinuous(k));
                }
            }
        }
        Ok(Self { segments })
    }

    /// `F(p) = p` on `[0, max_kw]`.
    pub fn identity(max_kw: f64) -> Self {
        Self::from_breakpoints(&[(0.0, 0.0), (max_kw, max_kw)]).expect("identity curve is valid")
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn num_segments(&self) -> usize {
        self.segments.len()
    }

    pub fn max_power(&self) -> f64 {
        self.segments.last().map(|s| s.hi).unwrap_or(0.0)
    }

    pub fn breakpoints(&self) -> Vec<(f64, f64)> {
        let mut pts = vec![(0.0, 0.0)];
        pts.extend(self.segments.iter().map(|s| (s.hi, s.rate(s.hi))));
        pts
    }

    /// Same shape with both power and rate axes multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self, CurveError> {
        let pts: Vec<(f64, f64)> = self
            .breakpoints()
            .into_iter()
            .map(|(p, w)| (p * factor, w * factor))
            .collect();
        Self::from_breakpoints(&pts)
    }

    fn segment_for(&self, power: f64) -> Result<(&Segment, f64), CurveError> {
        let hi = self.max_power();
        let slack = CONTINUITY_TOL * (1.0 + hi);
        if !power.is_finite() || power < -slack || power > hi + slack {
            return Err(CurveError::PowerOutOfDomain { power, lo: 0.0, hi });
        }
        let p = power.clamp(0.0, hi);
        let seg = self
            .segments
            .iter()
            .find(|s| p < s.hi)
            .unwrap_or_else(|| self.segments.last().expect("nonempty"));
        Ok((seg, p))
    }

    /// Compute rate `F(p)` in GFLOPS.
    pub fn rate(&self, power: f64) -> Result<f64, CurveError> {
        let (seg, p) = self.segment_for(power)?;
        Ok(seg.rate(p))
    }

    /// Work processed in one interval: `F(p)·dt`.
    pub fn compute_work(&self, power: f64, dt: f64) -> Result<f64, CurveError> {
        check_dt(dt)?;
        Ok(self.rate(power)? * dt)
    }

    pub fn max_work(&self, dt: f64) -> f64 {
        self.segments
            .last()
            .map(|s| s.rate(s.hi) * dt)
            .unwrap_or(0.0)
    }

    /// Smallest power that processes `work` in an interval of `dt` hours.
    pub fn min_power_for_work(&self, work: f64, dt: f64) -> Result<f64, CurveError> {
        check_dt(dt)?;
        if !work.is_finite() {
            return Err(CurveError::NotFinite(work));
        }
        let max = self.max_work(dt);
        if work > max * (1.0 + 1e-12) + 1e-12 {
            return Err(CurveError::InfeasibleWork {
                work,
                max,
                shortfall: work - max,
            });
        }
        let rate = (work / dt).max(0.0);
        for s in &self.segments {
            if rate <= s.rate(s.hi) {
                return Ok(((rate - s.intercept) / s.slope).clamp(s.lo, s.hi));
            }
        }
        Ok(self.max_power())
    }

    /// `(slope, intercept)` pairs whose pointwise minimum equals `F` on the
    /// domain; `w ≤ slope·p + intercept` for all rows is the hypograph.
    pub fn hypograph_rows(&self) -> Vec<(f64, f64)> {
        self.segments
            .iter()
            .map(|s| (s.slope, s.intercept))
            .collect()
    }
}

fn check_dt(dt: f64) -> Result<(), CurveError> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(CurveError::BadInterval(dt))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_segment() -> ProcessingCurve {
        // (2, 0) on [0, 50), (1, 50) on [50, 100].
        ProcessingCurve::from_breakpoints(&[(0.0, 0.0), (50.0, 100.0), (100.0, 150.0)]).unwrap()
    }

    #[test]
    fn identity_curve_work() {
        let c = ProcessingCurve::identity(100.0);
        assert_eq!(c.compute_work(50.0, 1.0).unwrap(), 50.0);
        assert_eq!(c.min_power_for_work(50.0, 1.0).unwrap(), 50.0);
        assert_eq!(c.hypograph_rows(), vec![(1.0, 0.0)]);
    }

    #[test]
    fn two_segment_evaluation_and_inverse() {
        let c = two_segment();
        assert_eq!(c.hypograph_rows(), vec![(2.0, 0.0), (1.0, 50.0)]);
        assert_eq!(c.compute_work(75.0, 1.0).unwrap(), 125.0);
        assert_eq!(c.min_power_for_work(125.0, 1.0).unwrap(), 75.0);
        assert_eq!(c.compute_work(0.0, 1.0).unwrap(), 0.0);
        assert_eq!(c.min_power_for_work(0.0, 1.0).unwrap(), 0.0);
        // Breakpoint belongs to the right-hand segment; continuity makes it moot.
        assert_eq!(c.compute_work(50.0, 0.25).unwrap(), 25.0);
    }

    #[test]
    fn hypograph_minimum_matches_curve_on_samples() {
        let c = two_segment();
        for p in [0.0, 25.0, 50.0, 75.0, 100.0] {
            let min = c
                .hypograph_rows()
                .iter()
                .map(|(a, b)| a * p + b)
                .fold(f64::INFINITY, f64::min);
            assert_eq!(min, c.rate(p).unwrap(), "p = {p}");
        }
        let k3 = ProcessingCurve::from_breakpoints(&[
            (0.0, 0.0),
            (10.0, 30.0),
            (30.0, 70.0),
            (60.0, 100.0),
        ])
        .unwrap();
        assert_eq!(k3.hypograph_rows().len(), 3);
        // Hand values: F = 3p on [0,10), 2p+10 on [10,30), p+40 on [30,60].
        let expected = [
            (0.0, 0.0),
            (5.0, 15.0),
            (10.0, 30.0),
            (20.0, 50.0),
            (30.0, 70.0),
            (45.0, 85.0),
            (60.0, 100.0),
        ];
        for (p, f) in expected {
            let min = k3
                .hypograph_rows()
                .iter()
                .map(|(a, b)| a * p + b)
                .fold(f64::INFINITY, f64::min);
            assert_eq!(min, f);
            assert_eq!(k3.rate(p).unwrap(), f);
        }
    }

    #[test]
    fn domain_and_capacity_errors() {
        let c = two_segment();
        assert!(matches!(
            c.compute_work(120.0, 1.0),
            Err(CurveError::PowerOutOfDomain { hi, .. }) if hi == 100.0
        ));
        match c.min_power_for_work(160.0, 1.0) {
            Err(CurveError::InfeasibleWork { shortfall, .. }) => assert_eq!(shortfall, 10.0),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            c.compute_work(10.0, 0.0),
            Err(CurveError::BadInterval(_))
        ));
    }

    #[test]
    fn construction_rejects_bad_shapes() {
        assert_eq!(
            ProcessingCurve::from_breakpoints(&[(0.0, 5.0), (10.0, 10.0)]),
            Err(CurveError::NonzeroOrigin(0.0, 5.0))
        );
        assert_eq!(
            ProcessingCurve::from_breakpoints(&[(0.0, 0.0), (10.0, 10.0), (20.0, 30.0)]),
            Err(CurveError::NotConcave(1))
        );
        assert_eq!(
            ProcessingCurve::from_breakpoints(&[(0.0, 0.0), (10.0, 10.0), (20.0, 10.0)]),
            Err(CurveError::NonPositiveSlope(1))
        );
        assert_eq!(
            ProcessingCurve::from_breakpoints(&[(0.0, 0.0), (10.0, 10.0), (10.0, 12.0)]),
            Err(CurveError::NonIncreasingPower(2))
        );
        let gap = vec![
            Segment {
                slope: 2.0,
                intercept: 0.0,
                lo: 0.0,
                hi: 10.0,
            },
            Segment {
                slope: 1.0,
                intercept: 10.0,
                lo: 11.0,
                hi: 20.0,
            },
        ];
        assert_eq!(ProcessingCurve::from_segments(gap), Err(CurveError::Gap(1)));
        let jump = vec![
            Segment {
                slope: 2.0,
                intercept: 0.0,
                lo: 0.0,
                hi: 10.0,
            },
            Segment {
                slope: 1.0,
                intercept: 11.0,
                lo: 10.0,
                hi: 20.0,
            },
        ];
        assert_eq!(
            ProcessingCurve::from_segments(jump),
            Err(CurveError::Discontinuous(1))
        );
    }

    fn arb_curve() -> impl Strategy<Value = ProcessingCurve> {
        (
            1usize..5,
            prop::collection::vec((1.0f64..50.0, 0.05f64..0.95), 5),
            0.5f64..5.0,
        )
            .prop_map(|(k, pieces, first_slope)| {
                let mut pts = vec![(0.0, 0.0)];
                let mut slope = first_slope;
                for &(width, shrink) in pieces.iter().take(k) {
                    let (p, w) = *pts.last().unwrap();
                    pts.push((p + width, w + slope * width));
                    slope *= shrink;
                }
                ProcessingCurve::from_breakpoints(&pts).unwrap()
            })
    }

    proptest! {
        #[test]
        fn concavity(c in arb_curve(), u1 in 0.0f64..1.0, u2 in 0.0f64..1.0, theta in 0.0f64..1.0) {
            let (p1, p2) = (u1 * c.max_power(), u2 * c.max_power());
            let mid = c.rate(theta * p1 + (1.0 - theta) * p2).unwrap();
            let chord = theta * c.rate(p1).unwrap() + (1.0 - theta) * c.rate(p2).unwrap();
            prop_assert!(mid >= chord - 1e-9);
        }

        #[test]
        fn inverse_round_trip(c in arb_curve(), u in 0.0f64..=1.0, dt in 0.05f64..2.0) {
            let p = u * c.max_power();
            let w = c.compute_work(p, dt).unwrap();
            let back = c.min_power_for_work(w, dt).unwrap();
            prop_assert!((back - p).abs() <= 1e-9 * (1.0 + p));
            let w2 = c.compute_work(back, dt).unwrap();
            prop_assert!((w2 - w).abs() <= 1e-9 * (1.0 + w));
        }

        #[test]
        fn hypograph_exactness(c in arb_curve(), u in 0.0f64..=1.0) {
            let p = u * c.max_power();
            let min = c.hypograph_rows().iter().map(|(a, b)| a * p + b).fold(f64::INFINITY, f64::min);
            let f = c.compute_work(p, 1.0).unwrap();
            prop_assert!((min - f).abs() <= 1e-9 * (1.0 + f));
        }
    }
}
