//! The nonlocal operator `L g = J*g - g` and its consistency with `q Laplace`.

use num_complex::Complex;

use crate::conv::ConvolutionPlan;
use crate::domain::DomainMask;
use crate::error::{Error, Result};
use crate::exec;
use crate::fft::{next_smooth, Fft2d};
use crate::grid::{Field2D, Grid2D};
use crate::kernel::{build_kernel, DiscreteKernel, KernelSpec};

/// `L f = J*f - f` everywhere; with a mask the result is zeroed on hole
/// cells (the evolution never updates the hole).
pub fn apply_l(
    f: &Field2D,
    kernel: &DiscreteKernel,
    plan: &ConvolutionPlan,
    mask: Option<&DomainMask>,
) -> Result<Field2D> {
    let mut out = crate::conv::convolve(f, kernel, plan)?;
    let n = f.grid().n();
    let src = f.as_slice();
    exec::for_each_row_mut(out.as_mut_slice(), n, |iy, row| {
        let frow = &src[iy * n..(iy + 1) * n];
        for (v, &fv) in row.iter_mut().zip(frow) {
            *v -= fv;
        }
    });
    if let Some(mask) = mask {
        mask.apply(&mut out);
    }
    Ok(out)
}

/// `J*f` at every physical cell with `f` given in closed form: the grid is
/// extended by the stencil radius and `f` evaluated analytically on the
/// margin, so the result has no boundary truncation anywhere on the grid.
pub fn convolve_analytic<F>(grid: &Grid2D, kernel: &DiscreteKernel, f: F) -> Result<Field2D>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let h = grid.h();
    if (kernel.h() - h).abs() > 1e-12 * h {
        return Err(Error::PlanMismatch("kernel/grid spacing mismatch".into()));
    }
    let n = grid.n();
    let rc = kernel.radius_cells();
    let m = n + 2 * rc;
    let padded = next_smooth(m + 2 * rc);
    let fft = Fft2d::new(padded);

    let coord = |i: usize| -> f64 { -grid.half_width() + (i as f64 - rc as f64 + 0.5) * h };
    let mut buf = vec![Complex::new(0.0, 0.0); padded * padded];
    exec::for_each_row_mut(&mut buf[..m * padded], padded, |iy, row| {
        let y = coord(iy);
        for (ix, v) in row[..m].iter_mut().enumerate() {
            *v = Complex::new(f(coord(ix), y), 0.0);
        }
    });
    fft.forward(&mut buf);

    let mut hat = vec![Complex::new(0.0, 0.0); padded * padded];
    for (zx, zy, w) in kernel.offsets() {
        let ix = zx.rem_euclid(padded as isize) as usize;
        let iy = zy.rem_euclid(padded as isize) as usize;
        hat[iy * padded + ix] = Complex::new(w, 0.0);
    }
    fft.forward(&mut hat);
    let scale = h * h / (padded * padded) as f64;
    exec::for_each_row_mut(&mut buf, padded, |r, row| {
        let hrow = &hat[r * padded..(r + 1) * padded];
        for (v, m) in row.iter_mut().zip(hrow) {
            *v *= m * scale;
        }
    });
    fft.inverse(&mut buf);

    let mut out = Field2D::zeros(*grid);
    exec::for_each_row_mut(out.as_mut_slice(), n, |iy, row| {
        let src = &buf[(iy + rc) * padded + rc..(iy + rc) * padded + rc + n];
        for (dst, v) in row.iter_mut().zip(src) {
            *dst = v.re;
        }
    });
    Ok(out)
}

/// `L f = J*f - f` with analytic margin handling, sampled on the grid.
pub fn apply_l_analytic<F>(grid: &Grid2D, kernel: &DiscreteKernel, f: F) -> Result<Field2D>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let mut out = convolve_analytic(grid, kernel, &f)?;
    let n = grid.n();
    exec::for_each_row_mut(out.as_mut_slice(), n, |iy, row| {
        let y = grid.coord(iy);
        for (ix, v) in row.iter_mut().enumerate() {
            *v -= f(grid.coord(ix), y);
        }
    });
    Ok(out)
}

/// `L f` at arbitrary points by direct stencil summation with analytic `f`.
pub fn apply_l_at_points<F>(
    kernel: &DiscreteKernel,
    f: F,
    points: &[(f64, f64)],
) -> Vec<f64>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let h = kernel.h();
    let h2 = h * h;
    let offsets: Vec<(f64, f64, f64)> = kernel
        .offsets()
        .map(|(zx, zy, w)| (zx as f64 * h, zy as f64 * h, w))
        .collect();
    let vals = exec::row_map(points.len(), |i| {
        let (x, y) = points[i];
        let mut acc = 0.0;
        for &(dx, dy, w) in &offsets {
            acc += w * f(x - dx, y - dy);
        }
        acc * h2 - f(x, y)
    });
    vals
}

/// Sup-norm defect of the rescaled operator against `q Laplace`:
/// `sup_x | lambda (J_lambda * f - f)(x) - q (Laplace f)(x) |`
/// where `J_lambda(x) = lambda J(lambda^{1/2} x)` is the base kernel shrunk to
/// support radius `d / sqrt(lambda)`. `f` and its Laplacian are supplied in
/// closed form; the convolution margin is handled analytically, so the sup
/// runs over every grid cell.
pub fn scaled_operator_defect<F, G>(
    grid: &Grid2D,
    kernel: &DiscreteKernel,
    lambda: f64,
    f: F,
    laplacian_f: G,
) -> Result<f64>
where
    F: Fn(f64, f64) -> f64 + Sync,
    G: Fn(f64, f64) -> f64 + Sync,
{
    if !(lambda > 1.0) {
        return Err(Error::Parameter(format!("lambda must exceed 1, got {lambda}")));
    }
    let scaled = build_kernel(&KernelSpec {
        d: kernel.support_radius() / lambda.sqrt(),
        exponent: kernel.exponent(),
        grid_h: grid.h(),
    })?;
    let q = kernel.q();
    let conv = convolve_analytic(grid, &scaled, &f)?;
    let n = grid.n();
    let data = conv.as_slice();
    let defect = exec::max_rows(n, |iy| {
        let y = grid.coord(iy);
        let row = &data[iy * n..(iy + 1) * n];
        let mut worst = 0.0f64;
        for (ix, &jf) in row.iter().enumerate() {
            let x = grid.coord(ix);
            let v = lambda * (jf - f(x, y)) - q * laplacian_f(x, y);
            worst = worst.max(v.abs());
        }
        worst
    });
    Ok(defect)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conv::Padding;
    use crate::kernel::KernelSpec;

    fn kernel_for(grid: &Grid2D, d: f64) -> DiscreteKernel {
        build_kernel(&KernelSpec::new(d, 3, grid.h()).unwrap()).unwrap()
    }

    #[test]
    fn constant_annihilated_on_torus() {
        let grid = Grid2D::new(64, 4.0).unwrap();
        let kernel = kernel_for(&grid, 1.0);
        let plan = ConvolutionPlan::new(&grid, &kernel, Padding::Wrap).unwrap();
        let f = Field2D::from_fn(grid, |_, _| 3.25);
        let lf = apply_l(&f, &kernel, &plan, None).unwrap();
        assert!(lf.sup_norm() <= 1e-12);
    }

    #[test]
    fn mask_zeroes_hole_cells_and_wrap_sum_vanishes() {
        let grid = Grid2D::new(256, 16.0).unwrap();
        let kernel = kernel_for(&grid, 1.0);
        let plan = ConvolutionPlan::new(&grid, &kernel, Padding::Wrap).unwrap();
        let hole = crate::domain::HoleShape::disk([0.0, 0.0], 2.5);
        let mask = crate::domain::build_domain(&grid, &hole).unwrap();
        let f = Field2D::from_fn(grid, |x, y| (-(x * x + y * y) / 8.0).exp());
        let lf = apply_l(&f, &kernel, &plan, Some(&mask)).unwrap();
        let n = grid.n();
        for iy in 0..n {
            for ix in 0..n {
                if mask.is_hole(ix, iy) {
                    assert_eq!(lf.at(ix, iy), 0.0);
                }
            }
        }
        // without mask, sum L f = 0 on the torus (unit kernel mass)
        let lf_free = apply_l(&f, &kernel, &plan, None).unwrap();
        assert!(lf_free.sum().abs() <= 1e-10 * f.sum());
    }

    #[test]
    fn gaussian_defect_shrinks_sixteenfold_when_support_halves() {
        // Taylor expansion: L f - q Lap f is a fourth-moment error, so
        // halving d cuts it by ~2^4.
        let grid = Grid2D::new(512, 16.0).unwrap(); // h = 1/16
        let sigma2 = 16.0;
        let f = move |x: f64, y: f64| (-(x * x + y * y) / (2.0 * sigma2)).exp();
        let lap = move |x: f64, y: f64| {
            let r2 = x * x + y * y;
            ((r2 / sigma2 - 2.0) / sigma2) * (-(r2) / (2.0 * sigma2)).exp()
        };
        let mut defects = Vec::new();
        for d in [1.0, 0.5] {
            let kernel = kernel_for(&grid, d);
            let q = kernel.q();
            let conv = convolve_analytic(&grid, &kernel, f).unwrap();
            let n = grid.n();
            let mut worst = 0.0f64;
            for iy in 0..n {
                let y = grid.coord(iy);
                for ix in 0..n {
                    let x = grid.coord(ix);
                    let v = conv.at(ix, iy) - f(x, y) - q * lap(x, y);
                    worst = worst.max(v.abs());
                }
            }
            defects.push(worst);
        }
        let ratio = defects[0] / defects[1];
        assert!((14.0..=18.5).contains(&ratio), "defect ratio {ratio}, defects {defects:?}");
    }

    #[test]
    fn spike_case_matches_stencil() {
        let grid = Grid2D::new(64, 4.0).unwrap();
        let kernel = kernel_for(&grid, 1.0);
        let plan = ConvolutionPlan::new(&grid, &kernel, Padding::Zero).unwrap();
        let mut f = Field2D::zeros(grid);
        f.set(32, 32, 1.0);
        let lf = apply_l(&f, &kernel, &plan, None).unwrap();
        let expected_center = kernel.weight(0, 0) * grid.cell_area() - 1.0;
        assert!((lf.at(32, 32) - expected_center).abs() < 1e-13);
        let expected_off = kernel.weight(1, 0) * grid.cell_area();
        assert!((lf.at(33, 32) - expected_off).abs() < 1e-13);
    }

    #[test]
    fn scaled_defect_decreases_in_lambda() {
        let grid = Grid2D::new(1024, 6.0).unwrap(); // h = 3/256
        let kernel = kernel_for(&grid, 1.0);
        let f = |x: f64, y: f64| (-(x * x + y * y) / 2.0).exp();
        let lap = |x: f64, y: f64| {
            let r2 = x * x + y * y;
            (r2 - 2.0) * (-(r2) / 2.0).exp()
        };
        let defects: Vec<f64> = [4.0, 16.0, 64.0]
            .iter()
            .map(|&l| scaled_operator_defect(&grid, &kernel, l, f, lap).unwrap())
            .collect();
        assert!(
            defects[0] > defects[1] && defects[1] > defects[2],
            "defects not decreasing: {defects:?}"
        );
    }

    #[test]
    fn scaled_defect_annihilates_affine() {
        let grid = Grid2D::new(256, 4.0).unwrap();
        let kernel = kernel_for(&grid, 1.0);
        let f = |x: f64, y: f64| 0.7 * x - 1.3 * y + 2.0;
        let zero = |_: f64, _: f64| 0.0;
        let defect = scaled_operator_defect(&grid, &kernel, 4.0, f, zero).unwrap();
        assert!(defect <= 1e-10, "affine defect {defect}");
    }

    #[test]
    fn scaled_quadratic_matches_second_moment_identity() {
        let grid = Grid2D::new(256, 4.0).unwrap();
        let kernel = kernel_for(&grid, 1.0);
        let lambda = 4.0;
        let f = |x: f64, y: f64| x * x + y * y;
        // lambda (J_lambda * f - f) = 4 q_lambda exactly; against q Lap f = 4q
        // the defect is pure quadrature error
        let lap = |_: f64, _: f64| 4.0;
        let defect = scaled_operator_defect(&grid, &kernel, lambda, f, lap).unwrap();
        assert!(defect <= 1e-6, "quadratic defect {defect}");
    }

    #[test]
    fn lambda_at_most_one_rejected() {
        let grid = Grid2D::new(256, 4.0).unwrap();
        let kernel = kernel_for(&grid, 1.0);
        let f = |_: f64, _: f64| 0.0;
        assert!(scaled_operator_defect(&grid, &kernel, 1.0, f, f).is_err());
    }

    #[test]
    fn analytic_points_agree_with_grid_evaluation() {
        let grid = Grid2D::new(64, 4.0).unwrap();
        let kernel = kernel_for(&grid, 1.0);
        let f = |x: f64, y: f64| (0.3 * x).sin() + 0.1 * y * y;
        let lf = apply_l_analytic(&grid, &kernel, f).unwrap();
        let pts = [(grid.coord(10), grid.coord(20)), (grid.coord(40), grid.coord(5))];
        let direct = apply_l_at_points(&kernel, f, &pts);
        assert!((lf.at(10, 20) - direct[0]).abs() < 1e-12);
        assert!((lf.at(40, 5) - direct[1]).abs() < 1e-12);
    }
}
