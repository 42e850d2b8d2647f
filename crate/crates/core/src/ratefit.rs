//! Rate estimation from an examined prefix: sub-interval binning, a
//! least-squares exponential fit, and the fit-accuracy gate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poisson::RateModel;
use crate::types::Topic;

pub const MAX_ITERATIONS: usize = 200;
/// Cosine between the residual and every Jacobian column at convergence.
pub const GRADIENT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinPoint {
    /// Midpoint rank of the sub-interval.
    pub x: f64,
    /// Relevant documents in the sub-interval.
    pub y: usize,
    /// Ranks covered by the sub-interval.
    pub width: usize,
}

impl BinPoint {
    /// Observed per-rank density `y / width`.
    pub fn density(&self) -> f64 {
        self.y as f64 / self.width as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedCounts {
    pub points: Vec<BinPoint>,
    pub interval_width: usize,
}

impl BinnedCounts {
    pub fn total(&self) -> usize {
        self.points.iter().map(|p| p.y).sum()
    }
}

/// Partitions ranks `1..=examined_end` into `⌈examined_end / width⌉`
/// contiguous sub-intervals; the last one may be short.
pub fn bin_prefix(topic: &Topic, examined_end: usize, interval_width: usize) -> Result<BinnedCounts> {
    if examined_end == 0 || examined_end > topic.len() {
        return Err(Error::RankOutOfRange {
            rank: examined_end,
            len: topic.len(),
        });
    }
    if interval_width == 0 {
        return Err(Error::Domain("interval width must be at least 1".into()));
    }
    if examined_end < interval_width && examined_end < 2 {
        return Err(Error::InsufficientData(format!(
            "{examined_end} examined documents cannot be split into sub-intervals"
        )));
    }
    let points = (1..=examined_end)
        .step_by(interval_width)
        .map(|lo| {
            let hi = (lo + interval_width - 1).min(examined_end);
            BinPoint {
                x: (lo + hi) as f64 / 2.0,
                y: topic.rel(hi) - topic.rel(lo - 1),
                width: hi - lo + 1,
            }
        })
        .collect();
    Ok(BinnedCounts { points, interval_width })
}

/// Outcome of a least-squares fit, for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitSummary {
    pub model: RateModel,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub iterations: usize,
}

/// Fits `λ(x) = d·e^{kx}` to the per-rank densities of `binned`.
pub fn fit_exponential(binned: &BinnedCounts) -> Result<RateModel> {
    fit_exponential_detailed(binned).map(|s| s.model)
}

/// Damped Gauss–Newton (Levenberg–Marquardt) on `(ln d, k)`, with `x`
/// centred for conditioning and a log-linear regression as the start point.
pub fn fit_exponential_detailed(binned: &BinnedCounts) -> Result<FitSummary> {
    let pts = &binned.points;
    if pts.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "exponential fit needs at least 2 points, got {}",
            pts.len()
        )));
    }
    if pts.iter().all(|p| p.y == 0) {
        return Err(Error::NoSignal);
    }

    let m = pts.len() as f64;
    let centre = pts.iter().map(|p| p.x).sum::<f64>() / m;
    let xs: Vec<f64> = pts.iter().map(|p| p.x - centre).collect();
    let ys: Vec<f64> = pts.iter().map(BinPoint::density).collect();

    let (mut a, mut k) = log_linear_start(pts, &xs);
    let mut cost = half_sse(a, k, &xs, &ys);
    let initial_cost = cost;
    let mut damping = 1e-3;
    let mut iterations = 0;

    let converged = loop {
        if iterations >= MAX_ITERATIONS {
            break false;
        }
        iterations += 1;

        // Jacobian columns: ∂f/∂a = f, ∂f/∂k = f·x.
        let (mut a00, mut a01, mut a11, mut g0, mut g1, mut rr) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for (&x, &y) in xs.iter().zip(&ys) {
            let f = (a + k * x).exp();
            let r = f - y;
            let j1 = f * x;
            a00 += f * f;
            a01 += f * j1;
            a11 += j1 * j1;
            g0 += f * r;
            g1 += j1 * r;
            rr += r * r;
        }
        let rnorm = rr.sqrt();
        if rnorm == 0.0 {
            break true;
        }
        let cos0 = g0.abs() / (a00.sqrt() * rnorm);
        let cos1 = if a11 > 0.0 {
            g1.abs() / (a11.sqrt() * rnorm)
        } else {
            0.0
        };
        if cos0.max(cos1) <= GRADIENT_TOLERANCE {
            break true;
        }

        // Inner loop: raise damping until the step reduces the cost.
        loop {
            let b00 = a00 * (1.0 + damping);
            let b11 = a11 * (1.0 + damping);
            let det = b00 * b11 - a01 * a01;
            let stalled = damping > 1e16;
            if stalled || !det.is_finite() || det <= 0.0 {
                if stalled {
                    // No representable descent step left: numerically stationary.
                    return finish(a, k, centre, initial_cost, cost, iterations);
                }
                damping *= 10.0;
                continue;
            }
            let da = (-g0 * b11 + g1 * a01) / det;
            let dk = (-g1 * b00 + g0 * a01) / det;
            let (na, nk) = (a + da, k + dk);
            let trial = half_sse(na, nk, &xs, &ys);
            if trial.is_finite() && trial < cost {
                let tiny = da.abs() <= 1e-15 * (1.0 + a.abs()) && dk.abs() <= 1e-15 * (1e-9 + k.abs());
                a = na;
                k = nk;
                cost = trial;
                damping = (damping / 10.0).max(1e-12);
                if tiny {
                    return finish(a, k, centre, initial_cost, cost, iterations);
                }
                break;
            }
            damping *= 10.0;
        }
    };

    if !converged {
        return Err(Error::FitFailure { iterations });
    }
    finish(a, k, centre, initial_cost, cost, iterations)
}

fn finish(a: f64, k: f64, centre: f64, initial_cost: f64, final_cost: f64, iterations: usize) -> Result<FitSummary> {
    // d·e^{kx} = e^{a + k(x − c)}  ⇒  d = e^{a − k·c}
    let model = RateModel::new((a - k * centre).exp(), k).map_err(|_| Error::FitFailure { iterations })?;
    Ok(FitSummary {
        model,
        initial_cost,
        final_cost,
        iterations,
    })
}

fn half_sse(a: f64, k: f64, xs: &[f64], ys: &[f64]) -> f64 {
    0.5 * xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let r = (a + k * x).exp() - y;
            r * r
        })
        .sum::<f64>()
}

/// Ordinary least squares of `ln max(y/w, 0.5/w)` against centred `x`.
fn log_linear_start(pts: &[BinPoint], xs: &[f64]) -> (f64, f64) {
    let zs: Vec<f64> = pts
        .iter()
        .map(|p| (p.y as f64).max(0.5).ln() - (p.width as f64).ln())
        .collect();
    let m = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / m;
    let mean_z = zs.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x).powi(2)).sum();
    let sxz: f64 = xs.iter().zip(&zs).map(|(x, z)| (x - mean_x) * (z - mean_z)).sum();
    let k = if sxx > 0.0 { sxz / sxx } else { 0.0 };
    (mean_z - k * mean_x, k)
}

/// Model-predicted relevant count over ranks `1..=examined_end`, as a
/// discrete sum of `λ(i)`. Overflow yields `+∞`.
pub fn predicted_relevant(model: &RateModel, examined_end: usize) -> f64 {
    (1..=examined_end)
        .map(|i| model.d() * (model.k() * i as f64).exp())
        .sum()
}

/// The fit is rejected when `rel < delta · predicted`.
pub fn gate_accepts(rel: usize, predicted: f64, delta: f64) -> bool {
    rel as f64 >= delta * predicted
}

/// Fit-accuracy gate on the examined prefix `1..=examined_end`.
pub fn delta_gate(model: &RateModel, topic: &Topic, examined_end: usize, delta: f64) -> bool {
    let end = examined_end.min(topic.len());
    gate_accepts(topic.rel(end), predicted_relevant(model, end), delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn exact_points(d: f64, k: f64, xs: &[f64]) -> BinnedCounts {
        // Encode densities as y/width with a large width so y is integral.
        BinnedCounts {
            points: xs.iter().map(|&x| BinPoint { x, y: 0, width: 1 }).collect(),
            interval_width: 1,
        }
        .with_densities(|x| d * (k * x).exp())
    }

    impl BinnedCounts {
        // Test helper: points whose density is an arbitrary real.
        fn with_densities(mut self, f: impl Fn(f64) -> f64) -> Self {
            const SCALE: usize = 1 << 40;
            for p in &mut self.points {
                p.width = SCALE;
                p.y = (f(p.x) * SCALE as f64).round() as usize;
            }
            self
        }
    }

    #[test]
    fn bin_examples() {
        let t = Topic::from_relevant_ranks("t", 6, &[1, 2, 3]).unwrap();
        let b = bin_prefix(&t, 6, 3).unwrap();
        let got: Vec<_> = b.points.iter().map(|p| (p.x, p.y)).collect();
        assert_eq!(got, vec![(2.0, 3), (5.0, 0)]);

        let t = Topic::from_flags("t", &[false; 12]).unwrap();
        let b = bin_prefix(&t, 10, 4).unwrap();
        let xs: Vec<_> = b.points.iter().map(|p| p.x).collect();
        assert_eq!(xs, vec![2.5, 6.5, 9.5]);
        assert_eq!(b.points[2].width, 2);

        let t = Topic::from_flags("t", &[true; 100]).unwrap();
        let b = bin_prefix(&t, 100, 10).unwrap();
        assert_eq!(b.points.len(), 10);
        assert!(b.points.iter().all(|p| p.y == 10));
    }

    #[test]
    fn bin_insufficient_data() {
        let t = Topic::from_flags("t", &[true; 10]).unwrap();
        assert!(matches!(bin_prefix(&t, 1, 5), Err(Error::InsufficientData(_))));
        assert!(bin_prefix(&t, 11, 5).is_err());
    }

    #[test]
    fn fit_recovers_noiseless_exponential() {
        let xs: Vec<f64> = (1..=60).map(|i| i as f64 * 5.0).collect();
        let b = exact_points(0.5, -0.01, &xs);
        let m = fit_exponential(&b).unwrap();
        assert_relative_eq!(m.d(), 0.5, max_relative = 1e-6);
        assert_relative_eq!(m.k(), -0.01, max_relative = 1e-6);
    }

    #[test]
    fn fit_recovers_unit_width_rate() {
        // widths 1 with densities 0.5·e^{-0.01x} at integer x
        let t_like: Vec<f64> = (1..=300).map(|i| i as f64).collect();
        let b = exact_points(0.5, -0.01, &t_like);
        let m = fit_exponential(&b).unwrap();
        for p in &b.points {
            assert_relative_eq!(m.lambda_at(p.x).unwrap(), p.density(), max_relative = 1e-6);
        }
    }

    #[test]
    fn fit_constant_density_matches_grid_search() {
        let t = Topic::from_flags("t", &(0..200).map(|i| i % 4 == 0).collect::<Vec<_>>()).unwrap();
        let b = bin_prefix(&t, 200, 20).unwrap();
        let m = fit_exponential(&b).unwrap();
        assert!(m.k().abs() < 1e-9);
        assert_relative_eq!(m.d(), 0.25, max_relative = 1e-9);

        // brute grid around the optimum never beats the fit
        let cost = |d: f64, k: f64| -> f64 {
            b.points
                .iter()
                .map(|p| (p.density() - d * (k * p.x).exp()).powi(2))
                .sum()
        };
        let best = cost(m.d(), m.k());
        for i in -20..=20 {
            for j in -20..=20 {
                let d = 0.25 + i as f64 * 0.005;
                let k = j as f64 * 1e-4;
                assert!(cost(d, k) >= best - 1e-15);
            }
        }
    }

    #[test]
    fn fit_errors() {
        let single = BinnedCounts {
            points: vec![BinPoint { x: 1.0, y: 1, width: 1 }],
            interval_width: 1,
        };
        assert!(matches!(fit_exponential(&single), Err(Error::InsufficientData(_))));
        let t = Topic::from_flags("t", &[false; 20]).unwrap();
        let b = bin_prefix(&t, 20, 5).unwrap();
        assert_eq!(fit_exponential(&b), Err(Error::NoSignal));
    }

    #[test]
    fn delta_gate_examples() {
        let flat = RateModel::new(1.0, 0.0).unwrap();
        let t70 = Topic::from_relevant_ranks("t", 100, &(1..=70).collect::<Vec<_>>()).unwrap();
        assert!(delta_gate(&flat, &t70, 100, 0.7));
        let t69 = Topic::from_relevant_ranks("t", 100, &(1..=69).collect::<Vec<_>>()).unwrap();
        assert!(!delta_gate(&flat, &t69, 100, 0.7));
        // λ(i) underflows to zero for every i ≥ 1
        let vanishing = RateModel::new(1.0, -1000.0).unwrap();
        let none = Topic::from_flags("t", &[false; 100]).unwrap();
        assert_eq!(predicted_relevant(&vanishing, 100), 0.0);
        assert!(delta_gate(&vanishing, &none, 100, 0.7));
        assert!(gate_accepts(70, 100.0, 0.7));
        assert!(!gate_accepts(69, 100.0, 0.7));
    }

    proptest::proptest! {
        #[test]
        fn binning_conserves_counts(flags in proptest::collection::vec(proptest::bool::ANY, 2..300), w in 1usize..40, frac in 0.0f64..1.0) {
            let t = Topic::from_flags("p", &flags).unwrap();
            let end = ((frac * t.len() as f64) as usize).clamp(2, t.len());
            let b = bin_prefix(&t, end, w).unwrap();
            proptest::prop_assert_eq!(b.total(), t.rel(end));
            proptest::prop_assert!(b.points.windows(2).all(|p| p[0].x < p[1].x));
            proptest::prop_assert_eq!(b.points.iter().map(|p| p.width).sum::<usize>(), end);
        }

        #[test]
        fn fit_never_worse_than_start(flags in proptest::collection::vec(proptest::bool::weighted(0.3), 40..400), w in 2usize..30) {
            let t = Topic::from_flags("p", &flags).unwrap();
            let b = bin_prefix(&t, t.len(), w).unwrap();
            if let Ok(s) = fit_exponential_detailed(&b) {
                proptest::prop_assert!(s.final_cost <= s.initial_cost);
            }
        }

        #[test]
        fn gate_monotone_in_rel(rel in 0usize..500, extra in 0usize..50, predicted in 0.0f64..600.0, delta in 0.01f64..1.0) {
            if gate_accepts(rel, predicted, delta) {
                proptest::prop_assert!(gate_accepts(rel + extra, predicted, delta));
            }
        }
    }
}
