//! Numerical checks of the effective generator of one second-order step,
//! `log S(t) = tL + t³Φ₃ + t⁵Φ₅ + …`, on systems small enough for dense
//! `4^N × 4^N` logarithms.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{alpha_comm_q, AlphaCommSeries};
use crate::error::{Error, Result};
use crate::linalg::{expm, matrix_log, spectral_norm, spectral_radius, ComplexMatrix};
use crate::model::{model_liouvillian, LindbladModel};
use crate::propagate::signed_step_matrix;

pub const GENERATOR_SITE_CAP: usize = 4;
pub const TRUNCATION_SITE_CAP: usize = 3;
/// Largest spectral radius of `S(t) − I` accepted before taking the log.
pub const BRANCH_GUARD: f64 = 0.5;
/// Step used to read off the linear coefficient.
pub const BASE_STEP: f64 = 1e-3;
/// The Φ₃ residual must shrink at least this much when `t_ref` halves.
pub const MIN_RESIDUAL_SHRINK: f64 = 8.0;

fn check_sites(model: &LindbladModel, cap: usize) -> Result<()> {
    if model.n_sites() > cap {
        return Err(Error::TooLarge {
            what: "dense effective generator",
            n: model.n_sites(),
            cap,
        });
    }
    Ok(())
}

fn log_of_step(model: &LindbladModel, t: f64) -> Result<ComplexMatrix> {
    let s = signed_step_matrix(model, t)?;
    let shifted = &s - &ComplexMatrix::identity(s.rows());
    let rho = spectral_radius(&shifted)?;
    if rho > BRANCH_GUARD {
        return Err(Error::Guard(format!(
            "spectral radius of S(t) - I is {rho:.3} > {BRANCH_GUARD} at t = {t}; use a smaller t"
        )));
    }
    matrix_log(&s)
}

/// `log S(t)` for one second-order step of size `t`.
pub fn effective_generator(model: &LindbladModel, t: f64) -> Result<ComplexMatrix> {
    check_sites(model, GENERATOR_SITE_CAP)?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::OutOfRange {
            name: "t",
            value: t,
            reason: "must be positive and finite",
        });
    }
    log_of_step(model, t)
}

/// `D(t) = (log S(t) − tL)/t³`.
fn cubic_quotient(model: &LindbladModel, liouvillian: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    let g = effective_generator(model, t)?;
    Ok((&g - &liouvillian.scale_real(t)).scale_real(t.powi(-3)))
}

fn phi3_from(d_full: &ComplexMatrix, d_half: &ComplexMatrix) -> ComplexMatrix {
    (&d_half.scale_real(4.0) - d_full).scale_real(1.0 / 3.0)
}

/// `Φ₃ ≈ (4D(t/2) − D(t))/3`, accurate to `O(t⁴)`.
pub fn extract_phi3(model: &LindbladModel, t_ref: f64) -> Result<ComplexMatrix> {
    let l = model_liouvillian(model)?;
    let d1 = cubic_quotient(model, &l, t_ref)?;
    let d2 = cubic_quotient(model, &l, t_ref / 2.0)?;
    Ok(phi3_from(&d1, &d2))
}

/// Effective-generator coefficients read off at one reference step.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveGeneratorSeries {
    pub t_ref: f64,
    /// Linear coefficient, which should equal the Liouvillian.
    pub base: ComplexMatrix,
    /// Odd grades 3 and 5.
    pub phi: BTreeMap<usize, ComplexMatrix>,
    /// `‖Φ₃(t_ref) − Φ₃(t_ref/2)‖` for the two-point estimate.
    pub residual_norm: f64,
    /// Same residual one halving further down.
    pub residual_norm_half: f64,
    /// `‖Φ₂‖ / ‖Φ₃‖` from the even part of `log S(±t_ref)`.
    pub phi2_relative: f64,
}

impl EffectiveGeneratorSeries {
    pub fn residual_shrink(&self) -> f64 {
        self.residual_norm / self.residual_norm_half
    }

    pub fn phi3(&self) -> &ComplexMatrix {
        &self.phi[&3]
    }
}

/// Relative size of the `t²` coefficient of `log S(t)`.
///
/// The even part `(log S(t) + log S(−t))/2` contains only `t², t⁴, …`; two
/// levels of elimination in `t²` isolate the `t²` coefficient.
pub fn phi2_diagnostic(model: &LindbladModel, t_ref: f64, phi3_norm: f64) -> Result<f64> {
    check_sites(model, GENERATOR_SITE_CAP)?;
    let even = |t: f64| -> Result<ComplexMatrix> {
        let gp = log_of_step(model, t)?;
        let gm = log_of_step(model, -t)?;
        Ok((&gp + &gm).scale_real(0.5 / (t * t)))
    };
    let e1 = even(t_ref)?;
    let e2 = even(t_ref / 2.0)?;
    let c2 = (&e2.scale_real(4.0) - &e1).scale_real(1.0 / 3.0);
    let n = spectral_norm(&c2);
    Ok(if phi3_norm > 0.0 { n / phi3_norm } else { n })
}

/// Extracts `L`, `Φ₃`, `Φ₅` and the convergence diagnostics at `t_ref`.
pub fn effective_generator_series(model: &LindbladModel, t_ref: f64) -> Result<EffectiveGeneratorSeries> {
    check_sites(model, GENERATOR_SITE_CAP)?;
    let l = model_liouvillian(model)?;
    let ts = [t_ref, t_ref / 2.0, t_ref / 4.0, t_ref / 8.0];
    let d: Vec<ComplexMatrix> = ts
        .par_iter()
        .map(|&t| cubic_quotient(model, &l, t))
        .collect::<Result<_>>()?;
    let p0 = phi3_from(&d[0], &d[1]);
    let p1 = phi3_from(&d[1], &d[2]);
    let p2 = phi3_from(&d[2], &d[3]);
    let residual_norm = spectral_norm(&(&p0 - &p1));
    let residual_norm_half = spectral_norm(&(&p1 - &p2));
    if residual_norm > 0.0 && residual_norm_half * MIN_RESIDUAL_SHRINK > residual_norm {
        // Both residuals can sit at roundoff on (near-)commuting models.
        let floor = 1e-9 * spectral_norm(&l).max(1.0);
        if residual_norm > floor {
            return Err(Error::NoConvergence {
                what: "phi3 extraction residual does not shrink under halving",
                iterations: 3,
            });
        }
    }
    // D(t) = Φ₃ + t²Φ₅ + O(t⁴)
    let h = ts[1];
    let phi5 = (&d[1] - &d[2]).scale_real(1.0 / (h * h - ts[2] * ts[2]));
    // Three-point estimate that also removes the t⁴ term.
    let phi3 = (&(&d[3].scale_real(64.0) - &d[2].scale_real(20.0)) + &d[1]).scale_real(1.0 / 45.0);
    let g_base = effective_generator(model, BASE_STEP)?;
    let base = &(&g_base.scale_real(1.0 / BASE_STEP) - &phi3.scale_real(BASE_STEP * BASE_STEP))
        - &phi5.scale_real(BASE_STEP.powi(4));
    let phi2_relative = phi2_diagnostic(model, t_ref, spectral_norm(&phi3))?;
    let mut phi = BTreeMap::new();
    phi.insert(3, phi3);
    phi.insert(5, phi5);
    Ok(EffectiveGeneratorSeries {
        t_ref,
        base,
        phi,
        residual_norm,
        residual_norm_half,
        phi2_relative,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationPoint {
    pub t: f64,
    /// `‖exp(tL + t³Φ₃) − S(t)‖₂`.
    pub distance: f64,
    /// `e·α_comm,3(t)` when the tail bound applies.
    pub certified_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BchReport {
    pub q0: usize,
    pub t_ref: f64,
    pub points: Vec<TruncationPoint>,
    /// Log-log slope of distance against `t`.
    pub slope: f64,
    pub phi3_norm: f64,
    pub alpha3_over_9: f64,
    pub phi2_relative: f64,
    pub residual_shrink: f64,
    /// Distance under the certified bound at every point where one exists.
    pub bound_holds: bool,
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidState("slope fit needs at least two paired points".into()));
    }
    if xs.iter().chain(ys).any(|v| v.is_nan() || *v <= 0.0) {
        return Err(Error::InvalidState("slope fit needs positive data".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidState("slope fit needs distinct x values".into()));
    }
    Ok(sxy / sxx)
}

/// Compares `exp(tL + t³Φ₃)` with `S(t)` over `t_grid`.
///
/// `Φ₃` is extracted once at `t_ref`. The distance should scale as `t⁵` and
/// sit below `e·α_comm,3(t)` wherever that bound is certified.
pub fn verify_bch_truncation(
    model: &LindbladModel,
    q0: usize,
    t_grid: &[f64],
    t_ref: f64,
) -> Result<BchReport> {
    if q0 != 3 {
        return Err(Error::OutOfRange {
            name: "q0",
            value: q0 as f64,
            reason: "only third-order truncation is implemented",
        });
    }
    check_sites(model, TRUNCATION_SITE_CAP)?;
    if t_grid.len() < 2 {
        return Err(Error::InvalidState("t grid needs at least two points".into()));
    }
    let series = effective_generator_series(model, t_ref)?;
    let l = model_liouvillian(model)?;
    let alpha = AlphaCommSeries::new(model, q0)?;
    let phi3 = series.phi3();
    let points: Vec<TruncationPoint> = t_grid
        .par_iter()
        .map(|&t| {
            let s = signed_step_matrix(model, t)?;
            let gen = &l.scale_real(t) + &phi3.scale_real(t.powi(3));
            let distance = spectral_norm(&(&expm(&gen, 1.0)? - &s));
            let certified_bound = alpha
                .evaluate(t)
                .total()
                .map(|v| std::f64::consts::E * v);
            Ok(TruncationPoint {
                t,
                distance,
                certified_bound,
            })
        })
        .collect::<Result<_>>()?;
    let slope = if points.iter().all(|p| p.distance > 0.0) {
        let xs: Vec<f64> = points.iter().map(|p| p.t).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.distance).collect();
        loglog_slope(&xs, &ys)?
    } else {
        f64::NAN
    };
    let bound_holds = points
        .iter()
        .all(|p| p.certified_bound.is_none_or(|b| p.distance <= b));
    Ok(BchReport {
        q0,
        t_ref,
        slope,
        phi3_norm: spectral_norm(phi3),
        alpha3_over_9: alpha_comm_q(model, 3)? / 9.0,
        phi2_relative: series.phi2_relative,
        residual_shrink: series.residual_shrink(),
        bound_holds,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_tfim;

    #[test]
    fn base_matches_liouvillian() {
        let m = build_tfim(2, 1.0, 0.5, 0.3).unwrap();
        let s = effective_generator_series(&m, 0.1).unwrap();
        let l = model_liouvillian(&m).unwrap();
        let rel = spectral_norm(&(&s.base - &l)) / spectral_norm(&l);
        assert!(rel < 1e-8, "{rel}");
        assert!(s.phi2_relative < 1e-6, "{}", s.phi2_relative);
        assert!(s.residual_shrink() >= MIN_RESIDUAL_SHRINK);
    }

    #[test]
    fn guard_trips_on_large_steps() {
        let m = build_tfim(2, 1.0, 0.5, 0.3).unwrap();
        assert!(matches!(effective_generator(&m, 5.0), Err(Error::Guard(_))));
        assert!(effective_generator(&m, 0.0).is_err());
    }

    #[test]
    fn slope_fit() {
        let xs = [1.0, 2.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powi(5)).collect();
        assert!((loglog_slope(&xs, &ys).unwrap() - 5.0).abs() < 1e-12);
        assert!(loglog_slope(&[1.0], &[1.0]).is_err());
    }
}
