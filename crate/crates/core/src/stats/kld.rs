use crate::error::{Error, Result};
use crate::stats::UniformGrid;

/// `D(p‖q)` by the trapezoid rule on a shared grid.
///
/// `q` is clamped below at 1e-12 and nodes where `p < 1e-15` are dropped.
pub fn kld(p: &[f64], q: &[f64], grid: &UniformGrid) -> Result<f64> {
    if p.len() != grid.n || q.len() != grid.n {
        return Err(Error::InvalidInput(format!(
            "densities of length {} and {} do not match a {}-node grid",
            p.len(),
            q.len(),
            grid.n
        )));
    }
    if p.iter().chain(q).any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidInput("densities must be finite and non-negative".into()));
    }
    let f: Vec<f64> = p
        .iter()
        .zip(q)
        .map(|(&pi, &qi)| if pi < 1e-15 { 0.0 } else { pi * (pi / qi.max(1e-12)).ln() })
        .collect();
    Ok(grid.trapezoid(&f))
}
