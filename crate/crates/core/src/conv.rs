//! Discrete convolution `J*f` with `h^2` quadrature, the core of the nonlocal
//! operator. Fast path is spectral; `convolve_direct` is the independent
//! summation oracle the fast path is tested against.
//!
//! Zero padding gives linear-convolution semantics (the exterior problem:
//! fields decay, and wrapping would teleport mass across the box); wrap gives
//! the torus semantics used by the whole-space spectral oracles.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::exec;
use crate::fft::{next_smooth, Fft2d};
use crate::grid::{Field2D, Grid2D};
use crate::kernel::DiscreteKernel;

/// Padding policy of a convolution plan.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Padding {
    /// Linear convolution: sources outside the grid are zero.
    Zero,
    /// Periodic convolution on the grid torus.
    Wrap,
}

/// Precomputed transform data for one (grid, kernel, padding) combination.
///
/// Holds the kernel transform scaled by `h^2 / N^2`, so a convolution is
/// forward transform, pointwise multiply, inverse transform.
pub struct ConvolutionPlan {
    grid: Grid2D,
    kernel_fp: u64,
    radius_cells: usize,
    padding: Padding,
    padded: usize,
    fft: Fft2d,
    kernel_hat: Vec<Complex<f64>>,
}

impl ConvolutionPlan {
    pub fn new(grid: &Grid2D, kernel: &DiscreteKernel, padding: Padding) -> Result<Self> {
        let h = grid.h();
        if (kernel.h() - h).abs() > 1e-12 * h {
            return Err(Error::PlanMismatch(format!(
                "kernel sampled at h = {} but grid has h = {}",
                kernel.h(),
                h
            )));
        }
        let n = grid.n();
        let rc = kernel.radius_cells();
        let padded = match padding {
            Padding::Zero => next_smooth(n + 2 * rc),
            Padding::Wrap => {
                if 2 * rc + 1 > n {
                    return Err(Error::PlanMismatch(format!(
                        "kernel stencil ({} cells) does not fit the {}-cell torus",
                        2 * rc + 1,
                        n
                    )));
                }
                n
            }
        };
        let fft = Fft2d::new(padded);
        let mut kernel_hat = vec![Complex::new(0.0, 0.0); padded * padded];
        for (zx, zy, w) in kernel.offsets() {
            let ix = zx.rem_euclid(padded as isize) as usize;
            let iy = zy.rem_euclid(padded as isize) as usize;
            kernel_hat[iy * padded + ix] = Complex::new(w, 0.0);
        }
        fft.forward(&mut kernel_hat);
        let scale = h * h / (padded * padded) as f64;
        for v in kernel_hat.iter_mut() {
            *v *= scale;
        }
        Ok(Self {
            grid: *grid,
            kernel_fp: kernel.fingerprint(),
            radius_cells: rc,
            padding,
            padded,
            fft,
            kernel_hat,
        })
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    pub fn padding(&self) -> Padding {
        self.padding
    }

    pub fn padded_size(&self) -> usize {
        self.padded
    }

    /// Stencil half-width of the kernel this plan was built for.
    pub fn radius_cells(&self) -> usize {
        self.radius_cells
    }

    fn check_field(&self, f: &Field2D) -> Result<()> {
        if f.grid() != self.grid {
            return Err(Error::PlanMismatch("field grid differs from plan grid".into()));
        }
        Ok(())
    }

    fn check_kernel(&self, kernel: &DiscreteKernel) -> Result<()> {
        if kernel.fingerprint() != self.kernel_fp {
            return Err(Error::PlanMismatch("kernel differs from the one the plan was built for".into()));
        }
        Ok(())
    }

    fn load(&self, f: &Field2D) -> Vec<Complex<f64>> {
        let n = self.grid.n();
        let padded = self.padded;
        let mut buf = vec![Complex::new(0.0, 0.0); padded * padded];
        let data = f.as_slice();
        exec::for_each_row_mut(&mut buf[..n * padded], padded, |iy, row| {
            let src = &data[iy * n..(iy + 1) * n];
            for (dst, &v) in row[..n].iter_mut().zip(src) {
                *dst = Complex::new(v, 0.0);
            }
        });
        buf
    }

    fn extract(&self, buf: &[Complex<f64>]) -> Field2D {
        let n = self.grid.n();
        let padded = self.padded;
        let mut out = Field2D::zeros(self.grid);
        exec::for_each_row_mut(out.as_mut_slice(), n, |iy, row| {
            let src = &buf[iy * padded..iy * padded + n];
            for (dst, v) in row.iter_mut().zip(src) {
                *dst = v.re;
            }
        });
        out
    }

    fn multiply_kernel_hat(&self, buf: &mut [Complex<f64>]) {
        let padded = self.padded;
        let hat = &self.kernel_hat;
        exec::for_each_row_mut(buf, padded, |r, row| {
            let hrow = &hat[r * padded..(r + 1) * padded];
            for (v, m) in row.iter_mut().zip(hrow) {
                *v *= m;
            }
        });
    }

    /// `J*f` with `h^2` quadrature under this plan's padding policy.
    pub fn convolve_field(&self, f: &Field2D) -> Result<Field2D> {
        self.check_field(f)?;
        let mut buf = self.load(f);
        self.fft.forward(&mut buf);
        self.multiply_kernel_hat(&mut buf);
        self.fft.inverse(&mut buf);
        Ok(self.extract(&buf))
    }

    /// Apply `map` to the torus symbol J^(k) of the kernel, modewise, to the
    /// transform of `f`: returns `IDFT[ map(J^) . DFT(f) ]`. Wrap plans only.
    pub fn spectral_map<F>(&self, f: &Field2D, map: F) -> Result<Field2D>
    where
        F: Fn(f64) -> f64 + Sync,
    {
        if self.padding != Padding::Wrap {
            return Err(Error::PlanMismatch("spectral_map needs a wrap-policy plan".into()));
        }
        self.check_field(f)?;
        let padded = self.padded;
        let mut buf = self.load(f);
        self.fft.forward(&mut buf);
        let hat = &self.kernel_hat;
        // kernel_hat = J^ / N^2 (J^ = h^2 DFT[w] is the unit-normalized
        // symbol, J^(0) = 1); recover J^ itself
        let sym_scale = (padded * padded) as f64;
        let inv_scale = 1.0 / (padded * padded) as f64;
        exec::for_each_row_mut(&mut buf, padded, |r, row| {
            let hrow = &hat[r * padded..(r + 1) * padded];
            for (v, m) in row.iter_mut().zip(hrow) {
                let j_hat = m.re * sym_scale;
                *v *= map(j_hat) * inv_scale;
            }
        });
        self.fft.inverse(&mut buf);
        Ok(self.extract(&buf))
    }

    /// Build the real-space field whose torus transform is `spectrum(J^(k))`,
    /// i.e. `(1/h^2) IDFT[spectrum]`. Wrap plans only.
    pub fn field_from_symbol<F>(&self, spectrum: F) -> Result<Field2D>
    where
        F: Fn(f64) -> f64 + Sync,
    {
        if self.padding != Padding::Wrap {
            return Err(Error::PlanMismatch("field_from_symbol needs a wrap-policy plan".into()));
        }
        let padded = self.padded;
        let h2 = self.grid.h() * self.grid.h();
        let sym_scale = (padded * padded) as f64;
        let mut buf = vec![Complex::new(0.0, 0.0); padded * padded];
        let hat = &self.kernel_hat;
        exec::for_each_row_mut(&mut buf, padded, |r, row| {
            let hrow = &hat[r * padded..(r + 1) * padded];
            for (v, m) in row.iter_mut().zip(hrow) {
                let j_hat = m.re * sym_scale;
                *v = Complex::new(spectrum(j_hat) / ((padded * padded) as f64 * h2), 0.0);
            }
        });
        self.fft.inverse(&mut buf);
        Ok(self.extract(&buf))
    }

    /// Circular convolution of two grid fields with `h^2` quadrature,
    /// `(a * b)(x) = sum_z a(z) b(x - z) h^2`. Wrap plans only.
    pub fn convolve_fields(&self, a: &Field2D, b: &Field2D) -> Result<Field2D> {
        if self.padding != Padding::Wrap {
            return Err(Error::PlanMismatch("convolve_fields needs a wrap-policy plan".into()));
        }
        self.check_field(a)?;
        self.check_field(b)?;
        let padded = self.padded;
        let mut fa = self.load(a);
        self.fft.forward(&mut fa);
        let mut fb = self.load(b);
        self.fft.forward(&mut fb);
        let scale = self.grid.h() * self.grid.h() / (padded * padded) as f64;
        exec::for_each_row_mut(&mut fa, padded, |r, row| {
            let other = &fb[r * padded..(r + 1) * padded];
            for (v, m) in row.iter_mut().zip(other) {
                *v *= m * scale;
            }
        });
        self.fft.inverse(&mut fa);
        Ok(self.extract(&fa))
    }

    /// Unit-normalized torus symbol values (transposed spectral layout).
    pub fn symbol(&self) -> Result<Vec<f64>> {
        if self.padding != Padding::Wrap {
            return Err(Error::PlanMismatch("symbol needs a wrap-policy plan".into()));
        }
        let scale = (self.padded * self.padded) as f64;
        Ok(self.kernel_hat.iter().map(|c| c.re * scale).collect())
    }
}

/// `J*f` through a prebuilt plan (validates the kernel matches the plan).
pub fn convolve(f: &Field2D, kernel: &DiscreteKernel, plan: &ConvolutionPlan) -> Result<Field2D> {
    plan.check_kernel(kernel)?;
    plan.convolve_field(f)
}

/// Reference semantics for [`convolve`]: direct nested summation, same
/// quadrature. Cost guard: grids up to 256 cells per side.
pub fn convolve_direct(f: &Field2D, kernel: &DiscreteKernel, padding: Padding) -> Result<Field2D> {
    let grid = f.grid();
    let n = grid.n();
    if n > 256 {
        return Err(Error::OracleTooLarge { n, max: 256 });
    }
    if (kernel.h() - grid.h()).abs() > 1e-12 * grid.h() {
        return Err(Error::PlanMismatch("kernel/grid spacing mismatch".into()));
    }
    let h2 = grid.cell_area();
    let rc = kernel.radius_cells() as isize;
    let mut out = Field2D::zeros(grid);
    let src = f.as_slice();
    exec::for_each_row_mut(out.as_mut_slice(), n, |iy, row| {
        for (ix, dst) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for zy in -rc..=rc {
                let sy = iy as isize - zy;
                let sy = match padding {
                    Padding::Zero => {
                        if sy < 0 || sy >= n as isize {
                            continue;
                        }
                        sy as usize
                    }
                    Padding::Wrap => sy.rem_euclid(n as isize) as usize,
                };
                for zx in -rc..=rc {
                    let w = kernel.weight(zx, zy);
                    if w == 0.0 {
                        continue;
                    }
                    let sx = ix as isize - zx;
                    let sx = match padding {
                        Padding::Zero => {
                            if sx < 0 || sx >= n as isize {
                                continue;
                            }
                            sx as usize
                        }
                        Padding::Wrap => sx.rem_euclid(n as isize) as usize,
                    };
                    acc += w * src[sy * n + sx];
                }
            }
            *dst = acc * h2;
        }
    });
    Ok(out)
}
