//! Campanato seminorms of top-cell fields over discrete balls.

use crate::cochain::{CellField, DecError};
use crate::complex::Complex;

const TIE_TOL: f64 = 1e-9;

/// Largest radius whose ball around `center` stays inside the box.
pub fn max_admissible_radius(cx: &Complex, center: &[f64]) -> f64 {
    (0..cx.dim())
        .map(|i| {
            let lo = cx.origin()[i];
            let hi = lo + cx.extent(i);
            (center[i] - lo).min(hi - center[i])
        })
        .fold(f64::INFINITY, f64::min)
}

/// Top cells whose centers lie within `radius` of `center` (ties
/// included), in row-major order of their offset from the center.
pub fn ball_cells(cx: &Complex, center: &[f64], radius: f64) -> Result<Vec<usize>, DecError> {
    ball_cells_within(cx, center, radius, radius)
}

fn ball_cells_within(cx: &Complex, center: &[f64], radius: f64, select: f64) -> Result<Vec<usize>, DecError> {
    let n = cx.dim();
    let max_radius = max_admissible_radius(cx, center);
    if radius > max_radius * (1.0 + TIE_TOL) || !(radius >= 0.0) {
        return Err(DecError::BallEscapes { radius, max_radius });
    }
    let h = cx.spacing();
    let o = cx.origin();
    // Center in lattice units, and the cell index ranges per axis.
    let mut lo = vec![0i64; n];
    let mut hi = vec![0i64; n];
    for i in 0..n {
        let t = (center[i] - o[i]) / h[i] - 0.5;
        let reach = select / h[i];
        lo[i] = ((t - reach).floor() as i64 - 1).max(0);
        hi[i] = ((t + reach).ceil() as i64 + 1).min(cx.dims()[i] as i64 - 1);
    }
    let r2 = select * select * (1.0 + TIE_TOL);
    let mut out = Vec::new();
    let mut pos = lo.clone();
    if (0..n).any(|i| lo[i] > hi[i]) {
        return Ok(out);
    }
    loop {
        let mut dist2 = 0.0;
        for i in 0..n {
            let dx = o[i] + (pos[i] as f64 + 0.5) * h[i] - center[i];
            dist2 += dx * dx;
        }
        if dist2 <= r2 {
            out.push(cx.cell_index(n, (1u32 << n) - 1, &pos).expect("cell in range"));
        }
        let mut axis = n;
        loop {
            if axis == 0 {
                return Ok(out);
            }
            axis -= 1;
            if pos[axis] < hi[axis] {
                pos[axis] += 1;
                break;
            }
            pos[axis] = lo[axis];
        }
    }
}

/// Subsamples per axis used to estimate the covered fraction of cells cut
/// by the sphere.
const SUBSAMPLES: usize = 6;

/// Top cells meeting the ball, each with the fraction of its volume inside,
/// in row-major order.
pub fn ball_weights(cx: &Complex, center: &[f64], radius: f64) -> Result<Vec<(usize, f64)>, DecError> {
    let n = cx.dim();
    let h = cx.spacing();
    let half_diag = 0.5 * h.iter().map(|v| v * v).sum::<f64>().sqrt();
    let outer = ball_cells_within(cx, center, radius, radius + half_diag)?;
    let mut out = Vec::with_capacity(outer.len());
    let mut pos = vec![0i64; n];
    let mut x = vec![0.0; n];
    let total = SUBSAMPLES.pow(n as u32);
    let r2 = radius * radius;
    for c in outer {
        cx.cell_of(n, c, &mut pos);
        cx.center_of((1u32 << n) - 1, &pos, &mut x);
        let d = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if d + half_diag <= radius {
            out.push((c, 1.0));
            continue;
        }
        let mut inside = 0usize;
        for s in 0..total {
            let mut k = s;
            let mut dist2 = 0.0;
            for i in 0..n {
                let sub = (k % SUBSAMPLES) as f64;
                k /= SUBSAMPLES;
                let xi = x[i] + h[i] * ((sub + 0.5) / SUBSAMPLES as f64 - 0.5);
                dist2 += (xi - center[i]).powi(2);
            }
            if dist2 <= r2 {
                inside += 1;
            }
        }
        if inside > 0 {
            out.push((c, inside as f64 / total as f64));
        }
    }
    Ok(out)
}

/// Component-wise weighted mean. Differences are taken from the first
/// cell so that constant fields reproduce their value exactly.
pub fn ball_mean(field: &CellField, weights: &[(usize, f64)]) -> Vec<f64> {
    let mut mean = vec![0.0; field.ncomp];
    let Some(&(first, _)) = weights.first() else {
        return mean;
    };
    let wsum: f64 = weights.iter().map(|w| w.1).sum();
    for (k, m) in mean.iter_mut().enumerate() {
        let base = field.get(first, k);
        let acc: f64 = weights.iter().map(|&(c, w)| w * (field.get(c, k) - base)).sum();
        *m = base + acc / wsum;
    }
    mean
}

/// Integral over the ball of |f - mean_ball f|^2, with boundary cells
/// weighted by their covered fraction.
pub fn campanato_seminorm(cx: &Complex, field: &CellField, center: &[f64], radius: f64) -> Result<f64, DecError> {
    let weights = ball_weights(cx, center, radius)?;
    if weights.len() < 2 {
        return Err(DecError::BallTooSmall { radius, cells: weights.len() });
    }
    let mean = ball_mean(field, &weights);
    let mut acc = 0.0;
    for &(c, w) in &weights {
        for (k, m) in mean.iter().enumerate() {
            let dv = field.get(c, k) - m;
            acc += w * dv * dv;
        }
    }
    Ok(acc * cx.cell_volume())
}

/// Integral of |f|^2 over the ball.
pub fn ball_l2_squared(cx: &Complex, field: &CellField, center: &[f64], radius: f64) -> Result<f64, DecError> {
    let weights = ball_weights(cx, center, radius)?;
    let mut acc = 0.0;
    for &(c, w) in &weights {
        acc += w * field.cell(c).iter().map(|v| v * v).sum::<f64>();
    }
    Ok(acc * cx.cell_volume())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::ComplexBuilder;

    #[test]
    fn constant_field_has_zero_seminorm() {
        let cx = ComplexBuilder::new(&[8, 8]).spacing(0.125).build().unwrap();
        let f = CellField::from_fn(&cx, |_| 3.5);
        assert_eq!(campanato_seminorm(&cx, &f, &[0.5, 0.5], 0.3).unwrap(), 0.0);
    }

    #[test]
    fn escaping_ball_reports_max_radius() {
        let cx = ComplexBuilder::new(&[8, 8]).spacing(0.125).build().unwrap();
        let f = CellField::from_fn(&cx, |x| x[0]);
        match campanato_seminorm(&cx, &f, &[0.25, 0.5], 0.4) {
            Err(DecError::BallEscapes { max_radius, .. }) => assert_eq!(max_radius, 0.25),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ties_are_included() {
        let cx = ComplexBuilder::new(&[4, 4]).build().unwrap();
        // Center on a vertex: the four adjacent cell centers sit at distance sqrt(1/2).
        let cells = ball_cells(&cx, &[2.0, 2.0], 0.5f64.sqrt()).unwrap();
        assert_eq!(cells.len(), 4);
    }
}
