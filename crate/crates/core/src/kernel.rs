//! Radially symmetric convolution kernels of the polynomial-bump family
//!
//!   J(z) = c_k (1 - |z|^2/d^2)^k   for |z| < d,   J = 0 otherwise,
//!
//! with k >= 2 so J is C^2 across the support boundary, c_k = (k+1)/(pi d^2)
//! so the continuum mass is one, and diffusivity
//!
//!   q = (1/4) * integral |z|^2 J(z) dz = d^2 / (4(k + 2)).
//!
//! Discretely the bump is sampled at cell centers and renormalized so the
//! discrete mass `sum w(z) h^2` is one; the discrete diffusivity is the
//! matching lattice moment `(1/4) sum w(z) |z|^2 h^2`.

use crate::error::{Error, Result};

/// Parameters of a polynomial-bump kernel to be sampled on a lattice.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelSpec {
    /// Support radius (length units).
    pub d: f64,
    /// Bump exponent `k >= 2` (smoothness class selector).
    pub exponent: u32,
    /// Lattice spacing the kernel will be sampled on.
    pub grid_h: f64,
}

impl KernelSpec {
    pub fn new(d: f64, exponent: u32, grid_h: f64) -> Result<Self> {
        let spec = Self { d, exponent, grid_h };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d > 0.0) || !self.d.is_finite() {
            return Err(Error::KernelSpec(format!("support radius must be positive, got {}", self.d)));
        }
        if self.exponent < 2 {
            return Err(Error::KernelSpec(format!(
                "bump exponent must be >= 2 for C^2 smoothness, got {}",
                self.exponent
            )));
        }
        if !(self.grid_h > 0.0) || !self.grid_h.is_finite() {
            return Err(Error::KernelSpec(format!("grid spacing must be positive, got {}", self.grid_h)));
        }
        let ratio = self.d / self.grid_h;
        if ratio < 8.0 {
            return Err(Error::KernelUnderResolved { d: self.d, h: self.grid_h, ratio });
        }
        Ok(())
    }

    /// Closed-form continuum diffusivity `d^2 / (4(k+2))`.
    pub fn continuum_diffusivity(&self) -> f64 {
        self.d * self.d / (4.0 * (self.exponent as f64 + 2.0))
    }

    /// Kernel density at a point (continuum formula, before discretization).
    pub fn density(&self, x: f64, y: f64) -> f64 {
        let r2 = (x * x + y * y) / (self.d * self.d);
        if r2 < 1.0 {
            let c = (self.exponent as f64 + 1.0) / (std::f64::consts::PI * self.d * self.d);
            c * (1.0 - r2).powi(self.exponent as i32)
        } else {
            0.0
        }
    }
}

/// Cell-center sampled kernel with unit discrete mass.
///
/// `weights` are densities on offsets `z = (zx, zy) h`, `|z| < d`, stored
/// row-major over `(-rc..=rc)^2`; the quadrature weight `h^2` is applied by
/// the convolution operators, so `sum weights * h^2 == 1`.
#[derive(Clone, Debug)]
pub struct DiscreteKernel {
    d: f64,
    exponent: u32,
    h: f64,
    radius_cells: usize,
    weights: Vec<f64>,
    total: f64,
    q: f64,
}

/// Sample the bump at cell centers and renormalize to unit discrete mass.
pub fn build_kernel(spec: &KernelSpec) -> Result<DiscreteKernel> {
    spec.validate()?;
    let h = spec.grid_h;
    let rc = (spec.d / h).ceil() as usize;
    let side = 2 * rc + 1;
    let mut weights = vec![0.0f64; side * side];
    let mut raw_sum = 0.0;
    for dy in 0..side {
        let zy = (dy as f64 - rc as f64) * h;
        for dx in 0..side {
            let zx = (dx as f64 - rc as f64) * h;
            let w = spec.density(zx, zy);
            weights[dy * side + dx] = w;
            raw_sum += w;
        }
    }
    if raw_sum <= 0.0 {
        return Err(Error::KernelSpec("kernel sampled to zero mass".into()));
    }
    let scale = 1.0 / (raw_sum * h * h);
    let mut total = 0.0;
    let mut second_moment = 0.0;
    for dy in 0..side {
        let zy = (dy as f64 - rc as f64) * h;
        for dx in 0..side {
            let zx = (dx as f64 - rc as f64) * h;
            let w = weights[dy * side + dx] * scale;
            weights[dy * side + dx] = w;
            total += w * h * h;
            second_moment += w * (zx * zx + zy * zy) * h * h;
        }
    }
    Ok(DiscreteKernel {
        d: spec.d,
        exponent: spec.exponent,
        h,
        radius_cells: rc,
        weights,
        total,
        q: 0.25 * second_moment,
    })
}

/// Discrete diffusivity `(1/4) sum w(z) |z|^2 h^2`.
pub fn kernel_diffusivity(kernel: &DiscreteKernel) -> f64 {
    kernel.q
}

impl DiscreteKernel {
    pub fn support_radius(&self) -> f64 {
        self.d
    }

    pub fn exponent(&self) -> u32 {
        self.exponent
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Stencil half-width in cells.
    pub fn radius_cells(&self) -> usize {
        self.radius_cells
    }

    /// Discrete mass `sum w h^2` (one after normalization).
    pub fn total(&self) -> f64 {
        self.total
    }

    /// Discrete diffusivity.
    pub fn q(&self) -> f64 {
        self.q
    }

    /// Density at lattice offset `(zx, zy)` in cells; zero outside the stencil.
    #[inline]
    pub fn weight(&self, zx: isize, zy: isize) -> f64 {
        let rc = self.radius_cells as isize;
        if zx.abs() > rc || zy.abs() > rc {
            return 0.0;
        }
        let side = 2 * self.radius_cells + 1;
        self.weights[(zy + rc) as usize * side + (zx + rc) as usize]
    }

    /// Iterate `(zx, zy, density)` over nonzero stencil entries.
    pub fn offsets(&self) -> impl Iterator<Item = (isize, isize, f64)> + '_ {
        let rc = self.radius_cells as isize;
        let side = 2 * self.radius_cells + 1;
        self.weights.iter().enumerate().filter_map(move |(idx, &w)| {
            if w == 0.0 {
                return None;
            }
            let zy = (idx / side) as isize - rc;
            let zx = (idx % side) as isize - rc;
            Some((zx, zy, w))
        })
    }

    /// Stable identity for plan caching.
    pub fn fingerprint(&self) -> u64 {
        let mut acc = 0xcbf29ce484222325u64;
        let mut mix = |v: u64| {
            acc ^= v;
            acc = acc.wrapping_mul(0x100000001b3);
        };
        mix(self.d.to_bits());
        mix(self.exponent as u64);
        mix(self.h.to_bits());
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_mass_after_normalization() {
        let k = build_kernel(&KernelSpec::new(1.0, 3, 1.0 / 16.0).unwrap()).unwrap();
        assert!((k.total() - 1.0).abs() <= 1e-14);
    }

    #[test]
    fn zero_outside_support_positive_inside() {
        let k = build_kernel(&KernelSpec::new(1.0, 3, 1.0 / 16.0).unwrap()).unwrap();
        let h = k.h();
        for (zx, zy, w) in k.offsets() {
            let r = ((zx as f64 * h).powi(2) + (zy as f64 * h).powi(2)).sqrt();
            assert!(r < k.support_radius());
            assert!(w > 0.0);
        }
        // offsets at |z| >= d carry exactly zero weight
        let rc = k.radius_cells() as isize;
        assert_eq!(k.weight(rc, rc), 0.0);
        assert_eq!(k.weight(rc + 5, 0), 0.0);
    }

    #[test]
    fn central_symmetry_exact() {
        let k = build_kernel(&KernelSpec::new(1.0, 2, 1.0 / 16.0).unwrap()).unwrap();
        let rc = k.radius_cells() as isize;
        for zy in -rc..=rc {
            for zx in -rc..=rc {
                assert_eq!(k.weight(zx, zy), k.weight(-zx, -zy));
            }
        }
    }

    /// Independent oracle for the diffusivity: 1-D radial quadrature of
    /// (1/4) * int |z|^2 J = (2 pi / 4) * int_0^d r^3 c_k (1 - r^2/d^2)^k dr
    /// by composite Simpson, checked against the closed form d^2/(4(k+2)).
    fn radial_quadrature_q(d: f64, k: u32) -> f64 {
        let c = (k as f64 + 1.0) / (std::f64::consts::PI * d * d);
        let f = |r: f64| r * r * r * c * (1.0 - r * r / (d * d)).powi(k as i32);
        let n = 20_000;
        let h = d / n as f64;
        let mut acc = f(0.0) + f(d);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(i as f64 * h);
        }
        (2.0 * std::f64::consts::PI / 4.0) * acc * h / 3.0
    }

    #[test]
    fn diffusivity_matches_radial_oracle() {
        for (d, k, expect) in [(1.0, 3u32, 0.05), (1.0, 2u32, 0.0625)] {
            let oracle = radial_quadrature_q(d, k);
            assert!((oracle - expect).abs() <= 1e-12, "oracle {oracle} vs closed form {expect}");
            let kernel = build_kernel(&KernelSpec::new(d, k, 1.0 / 64.0).unwrap()).unwrap();
            assert!(
                (kernel_diffusivity(&kernel) - oracle).abs() <= 1e-6,
                "discrete q = {} vs oracle {oracle}",
                kernel_diffusivity(&kernel)
            );
        }
    }

    #[test]
    fn diffusivity_scales_by_four_when_support_doubles() {
        let q1 = build_kernel(&KernelSpec::new(1.0, 3, 1.0 / 64.0).unwrap()).unwrap().q();
        let q2 = build_kernel(&KernelSpec::new(2.0, 3, 1.0 / 64.0).unwrap()).unwrap().q();
        assert!((q2 / q1 - 4.0).abs() <= 1e-6);
    }

    #[test]
    fn diffusivity_error_decreases_monotonically_under_refinement() {
        let exact = 0.05;
        let errs: Vec<f64> = [16.0, 32.0, 64.0]
            .iter()
            .map(|m| {
                let k = build_kernel(&KernelSpec::new(1.0, 3, 1.0 / m).unwrap()).unwrap();
                (k.q() - exact).abs()
            })
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "errors {errs:?}");
    }

    #[test]
    fn under_resolved_support_rejected() {
        let err = KernelSpec::new(1.0, 3, 0.25);
        assert!(matches!(err, Err(Error::KernelUnderResolved { .. })));
    }
}
