//! The Gaussian profile `Gamma_a` and the regular part `W` of the whole-space
//! fundamental solution `F(x,t) = e^{-t} delta(x) + W(x,t)`.
//!
//! `W` is defined through its transform, `W^(k,t) = e^{-t}(e^{J^(k) t} - 1)`,
//! evaluated here on the grid torus. Its mass is `1 - e^{-t}` exactly (zero
//! mode), it is nonnegative up to transform rounding dust, and for large
//! times it approaches `Gamma_q` with diffusivity `q` of the kernel.

use crate::conv::{ConvolutionPlan, Padding};
use crate::error::{Error, Result};
use crate::grid::{Field2D, Grid2D};
use crate::kernel::DiscreteKernel;

/// `Gamma_a(x, t) = e^{-|x|^2/(4 a t)} / (4 pi a t)`, the fundamental
/// solution of the local heat equation with diffusivity `a`.
#[derive(Clone, Copy, Debug)]
pub struct GaussianProfile {
    pub a: f64,
}

impl GaussianProfile {
    pub fn new(a: f64) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::Parameter(format!("diffusivity must be positive, got {a}")));
        }
        Ok(Self { a })
    }

    #[inline]
    pub fn eval(&self, x: f64, y: f64, t: f64) -> f64 {
        let s = 4.0 * self.a * t;
        (-(x * x + y * y) / s).exp() / (std::f64::consts::PI * s)
    }

    pub fn field(&self, grid: Grid2D, t: f64) -> Result<Field2D> {
        if !(t > 0.0) {
            return Err(Error::Parameter(format!("time must be positive, got {t}")));
        }
        Ok(Field2D::from_fn(grid, |x, y| self.eval(x, y, t)))
    }
}

/// Checked pointwise evaluation of `Gamma_a`.
pub fn gaussian_profile(a: f64, x: f64, y: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Parameter(format!("time must be positive, got {t}")));
    }
    Ok(GaussianProfile::new(a)?.eval(x, y, t))
}

/// Regular part of the fundamental solution at one time.
#[derive(Clone, Debug)]
pub struct RegularPart {
    pub field: Field2D,
    pub t: f64,
    /// Most negative value before clipping (rounding dust; should stay above
    /// `-1e-14 * max`).
    pub pre_clip_min: f64,
    /// Discrete mass `sum W h^2` after clipping (zero mode gives `1 - e^{-t}`).
    pub mass: f64,
}

/// Inverse-transform `e^{-t}(e^{J^ t} - 1)` modewise on the torus; negative
/// rounding dust is clipped to zero.
pub fn regular_part(plan: &ConvolutionPlan, t: f64) -> Result<RegularPart> {
    if !(t > 0.0) {
        return Err(Error::Parameter(format!("time must be positive, got {t}")));
    }
    if plan.padding() != Padding::Wrap {
        return Err(Error::PlanMismatch("regular_part needs a wrap-policy plan".into()));
    }
    // e^{-t}(e^{jt} - 1) = e^{(j-1)t} - e^{-t}, stable for all j <= 1
    let mut field = plan.field_from_symbol(|j| ((j - 1.0) * t).exp() - (-t).exp())?;
    let pre_clip_min = field.min();
    let n = field.grid().n();
    crate::exec::for_each_row_mut(field.as_mut_slice(), n, |_iy, row| {
        for v in row.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
    });
    let mass = field.sum() * field.grid().cell_area();
    Ok(RegularPart { field, t, pre_clip_min, mass })
}

/// One row of the `W`-estimate report: the normalized suprema that the decay
/// estimates bound by constants.
#[derive(Clone, Copy, Debug)]
pub struct WEstimateRow {
    pub t: f64,
    /// |mass(W) - (1 - e^{-t})|
    pub mass_defect: f64,
    /// t^{3/2} * sup |W - Gamma_q|
    pub gaussian_gap_scaled: f64,
    /// sup (1 + |x|^4) |W| / t
    pub pointwise_scaled: f64,
    /// integral |W| (equals the mass; bounded by 1)
    pub l1: f64,
    /// t^2 * sup |grad W - grad Gamma_q|  (first differences for grad W)
    pub grad_gaussian_gap_scaled: f64,
    /// sup (1 + |x|^5) |grad W| / t
    pub grad_pointwise_scaled: f64,
    /// t^{1/2} * integral |grad W|
    pub grad_l1_scaled: f64,
}

#[derive(Clone, Debug)]
pub struct WEstimateReport {
    pub rows: Vec<WEstimateRow>,
}

/// Evaluate the normalized `W`-estimates over a time sweep. Derivatives are
/// probed at first order only (centered differences); higher orders add
/// noise without new coverage.
pub fn w_estimate_report(
    plan: &ConvolutionPlan,
    kernel: &DiscreteKernel,
    times: &[f64],
) -> Result<WEstimateReport> {
    let grid = plan.grid();
    let q = kernel.q();
    let gamma = GaussianProfile::new(q)?;
    let mut rows = Vec::with_capacity(times.len());
    for &t in times {
        if !(1.0..=1e3).contains(&t) {
            return Err(Error::Parameter(format!("report times must lie in [1, 1e3], got {t}")));
        }
        let w = regular_part(plan, t)?;
        let wf = &w.field;
        let n = grid.n();
        let h = grid.h();
        let mut sup_gap = 0.0f64;
        let mut sup_pointwise = 0.0f64;
        let mut grad_gap = 0.0f64;
        let mut grad_pointwise = 0.0f64;
        let mut grad_l1 = 0.0f64;
        for iy in 1..n - 1 {
            let y = grid.coord(iy);
            for ix in 1..n - 1 {
                let x = grid.coord(ix);
                let wv = wf.at(ix, iy);
                let r2 = x * x + y * y;
                sup_gap = sup_gap.max((wv - gamma.eval(x, y, t)).abs());
                sup_pointwise = sup_pointwise.max((1.0 + r2 * r2) * wv.abs() / t);
                let wx = (wf.at(ix + 1, iy) - wf.at(ix - 1, iy)) / (2.0 * h);
                let wy = (wf.at(ix, iy + 1) - wf.at(ix, iy - 1)) / (2.0 * h);
                let s = 4.0 * q * t;
                let g = gamma.eval(x, y, t);
                let gx = -2.0 * x / s * g;
                let gy = -2.0 * y / s * g;
                let gnorm = ((wx - gx).powi(2) + (wy - gy).powi(2)).sqrt();
                grad_gap = grad_gap.max(gnorm);
                let wgrad = (wx * wx + wy * wy).sqrt();
                let r = r2.sqrt();
                grad_pointwise = grad_pointwise.max((1.0 + r2 * r2 * r) * wgrad / t);
                grad_l1 += wgrad * h * h;
            }
        }
        rows.push(WEstimateRow {
            t,
            mass_defect: (w.mass - (1.0 - (-t).exp())).abs(),
            gaussian_gap_scaled: t.powf(1.5) * sup_gap,
            pointwise_scaled: sup_pointwise,
            l1: w.mass,
            grad_gaussian_gap_scaled: t * t * grad_gap,
            grad_pointwise_scaled: grad_pointwise,
            grad_l1_scaled: t.sqrt() * grad_l1,
        });
    }
    Ok(WEstimateReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conv::ConvolutionPlan;
    use crate::evolution::{whole_space_exact, InitialData};
    use crate::kernel::{build_kernel, KernelSpec};
    use crate::operator::apply_l;

    fn setup() -> (Grid2D, DiscreteKernel, ConvolutionPlan) {
        let grid = Grid2D::new(256, 12.0).unwrap(); // h = 3/32
        let kernel = build_kernel(&KernelSpec::new(1.0, 3, grid.h()).unwrap()).unwrap();
        let plan = ConvolutionPlan::new(&grid, &kernel, Padding::Wrap).unwrap();
        (grid, kernel, plan)
    }

    #[test]
    fn gaussian_center_value_mass_and_self_similarity() {
        let a = 0.05;
        let t = 2.0;
        let g = GaussianProfile::new(a).unwrap();
        assert!((g.eval(0.0, 0.0, t) - 1.0 / (4.0 * std::f64::consts::PI * a * t)).abs() < 1e-15);
        // discrete mass over a grid covering 8 sqrt(a t)
        let grid = Grid2D::new(256, 8.0 * (a * t as f64).sqrt().max(1.0)).unwrap();
        let field = g.field(grid, t).unwrap();
        let mass = field.sum() * grid.cell_area();
        assert!((mass - 1.0).abs() <= 1e-8, "gaussian mass {mass}");
        // Gamma(x, t) = t^{-1} Gamma(x t^{-1/2}, 1)
        for (x, y) in [(0.3, -0.7), (1.1, 0.4)] {
            let lhs = g.eval(x, y, t);
            let rhs = g.eval(x / t.sqrt(), y / t.sqrt(), 1.0) / t;
            assert!((lhs - rhs).abs() <= 1e-15 * lhs.abs().max(1e-300));
        }
        assert!(gaussian_profile(a, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn w_mass_and_nonnegativity() {
        let (_grid, _kernel, plan) = setup();
        for t in [0.5, 1.0, 5.0] {
            let w = regular_part(&plan, t).unwrap();
            let expected = 1.0 - (-t).exp();
            assert!(
                (w.mass - expected).abs() <= 1e-10,
                "t = {t}: mass {} vs {expected}",
                w.mass
            );
            let max = w.field.max();
            assert!(w.pre_clip_min >= -1e-14 * max, "dust {} at t = {t}", w.pre_clip_min);
            assert!(w.field.min() >= 0.0);
        }
        assert!(regular_part(&plan, 0.0).is_err());
    }

    #[test]
    fn representation_identity_matches_exact_semigroup() {
        let (grid, _kernel, plan) = setup();
        let u0 = InitialData::Gaussian { center: [1.0, 0.5], sigma: 1.0, amplitude: 1.0 }
            .sample(grid, None)
            .unwrap();
        for t in [0.7, 3.0] {
            let w = regular_part(&plan, t).unwrap();
            let conv = plan.convolve_fields(&w.field, &u0).unwrap();
            let mut lhs = conv;
            let decay = (-t).exp();
            for (v, &u) in lhs.as_mut_slice().iter_mut().zip(u0.as_slice()) {
                *v += decay * u;
            }
            let exact = whole_space_exact(&u0, &plan, t).unwrap();
            let err = lhs.sup_distance(&exact);
            assert!(err <= 1e-10 * u0.sup_norm(), "t = {t}: representation error {err}");
        }
    }

    #[test]
    fn w_solves_forced_equation_to_first_order() {
        // d/dt W - L W = e^{-t} J with W(0) = 0; difference quotients converge
        // at first order in the quotient step.
        let (grid, kernel, plan) = setup();
        let t = 2.0;
        let wt = regular_part(&plan, t).unwrap().field;
        let lw = apply_l(&wt, &kernel, &plan, None).unwrap();
        let h2 = grid.cell_area();
        let mut forcing = Field2D::zeros(grid);
        let n = grid.n();
        for (zx, zy, w) in kernel.offsets() {
            let ix = zx.rem_euclid(n as isize) as usize;
            let iy = zy.rem_euclid(n as isize) as usize;
            forcing.set(ix, iy, w * (-t).exp());
        }
        let _ = h2;
        let mut errs = Vec::new();
        for delta in [0.1, 0.05] {
            let wtd = regular_part(&plan, t + delta).unwrap().field;
            let mut resid = 0.0f64;
            for iy in 0..n {
                for ix in 0..n {
                    let dq = (wtd.at(ix, iy) - wt.at(ix, iy)) / delta;
                    let rhs = lw.at(ix, iy) + forcing.at(ix, iy);
                    resid = resid.max((dq - rhs).abs());
                }
            }
            errs.push(resid);
        }
        let ratio = errs[0] / errs[1];
        assert!((1.6..=2.4).contains(&ratio), "ratio {ratio}, errs {errs:?}");
    }

    #[test]
    fn estimate_report_is_finite_and_mass_tight() {
        let (_grid, kernel, plan) = setup();
        let report = w_estimate_report(&plan, &kernel, &[1.0, 4.0]).unwrap();
        for row in &report.rows {
            assert!(row.mass_defect <= 1e-10);
            assert!(row.l1 <= 1.0 + 1e-12);
            assert!(row.gaussian_gap_scaled.is_finite());
            assert!(row.pointwise_scaled.is_finite());
            assert!(row.grad_gaussian_gap_scaled.is_finite());
        }
        assert!(w_estimate_report(&plan, &kernel, &[0.5]).is_err());
    }
}
