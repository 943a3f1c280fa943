//! Generic Laplace-integral functional `-log ∫ exp(-n·S(w)) ψ(w) dw` on a
//! low-dimensional box, by tensor-product midpoint quadrature in log space.

use crate::error::{Error, Result};
use crate::numeric::LogSumExp;

/// Largest box dimension accepted by [`laplace_functional`].
pub const MAX_BOX_DIM: usize = 3;

/// Midpoint-quadrature value of `-log ∫ exp(-scale·s_fn(w)) weight(w) dw`.
///
/// `bounds` gives the box, `grid` the number of midpoints per axis. `s_fn`
/// must be nonnegative on the box and `weight` nonnegative; points with zero
/// weight contribute nothing. Errors when the whole integrand vanishes.
pub fn laplace_functional<S, P>(
    s_fn: S,
    weight: P,
    bounds: &[(f64, f64)],
    scale: f64,
    grid: usize,
) -> Result<f64>
where
    S: Fn(&[f64]) -> f64,
    P: Fn(&[f64]) -> f64,
{
    if bounds.is_empty() || bounds.len() > MAX_BOX_DIM {
        return Err(Error::invalid(format!(
            "box dimension must be 1..={MAX_BOX_DIM}, got {}",
            bounds.len()
        )));
    }
    if grid == 0 {
        return Err(Error::invalid("grid must have at least one point per axis"));
    }
    if scale.is_nan() || scale < 0.0 {
        return Err(Error::invalid("scale must be nonnegative"));
    }
    let mut log_volume_element = 0.0;
    let mut steps = Vec::with_capacity(bounds.len());
    for &(lo, hi) in bounds {
        if hi.is_nan() || lo.is_nan() || hi <= lo {
            return Err(Error::invalid(format!("degenerate box axis [{lo}, {hi}]")));
        }
        let h = (hi - lo) / grid as f64;
        log_volume_element += h.ln();
        steps.push(h);
    }

    let dim = bounds.len();
    let mut idx = vec![0usize; dim];
    let mut point = vec![0.0f64; dim];
    let mut lse = LogSumExp::new();
    loop {
        for (d, &i) in idx.iter().enumerate() {
            point[d] = bounds[d].0 + (i as f64 + 0.5) * steps[d];
        }
        let w = weight(&point);
        if !w.is_finite() || w < 0.0 {
            return Err(Error::invalid(format!(
                "weight function returned {w} at {point:?}"
            )));
        }
        if w > 0.0 {
            let s = s_fn(&point);
            if !s.is_finite() || s < -1e-12 {
                return Err(Error::invalid(format!(
                    "S function must be nonnegative on the box; got {s} at {point:?}"
                )));
            }
            lse.add(-scale * s + w.ln());
        }
        // odometer increment, last axis fastest
        let mut d = dim;
        loop {
            if d == 0 {
                let log_integral = lse.value();
                if log_integral == f64::NEG_INFINITY {
                    return Err(Error::numerical(
                        "Laplace functional integrand vanishes on the whole box",
                    ));
                }
                return Ok(-(log_integral + log_volume_element));
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < grid {
                break;
            }
            idx[d] = 0;
        }
    }
}
