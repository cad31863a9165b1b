//! Sub- and super-solution barriers for the stationary problem, and the
//! evolutionary super-solution used for near-field decay rates.
//!
//! The sub-solution is `V_-(x) = log(|x|^2 + k0) - R0` with `k0` found by a
//! doubling-then-bisection search so that `-L V_- <= 0` holds cellwise, and
//! `R0` the smallest shift making `V_- <= 0` on the hole.
//!
//! Super-solutions follow the annular induction: outside radius `D` the
//! barrier equals a growth profile `g(|x|)` (`log(|x| - r0)` or
//! `(log|x|)^nu`); inside, it is constant on annuli of width `d/2` down to
//! `B_{2 r0}`, each constant chosen from the previous one through the minimal
//! stencil mass `Jbar` transferred between consecutive annuli. The far-field
//! inequality is certified cellwise first (with the diffusivity factor `q`
//! in the right-hand side: `-L g ~ -q Laplace g`, so the target has to carry
//! `q`), which fixes the number of annuli.

use crate::domain::DomainMask;
use crate::error::{Error, Result};
use crate::exec;
use crate::grid::{Field2D, Grid2D};
use crate::kernel::DiscreteKernel;
use crate::operator::apply_l_analytic;

/// Logarithmic sub-solution `V_-(x) = log(|x|^2 + k0) - R0`.
#[derive(Clone, Debug)]
pub struct SubSolution {
    pub field: Field2D,
    pub k0: f64,
    pub shift: f64,
    /// max over grid cells of `-L V_-` (certified `<= tol`)
    pub neg_l_max: f64,
    /// tolerance used by the search, `1e-13 * scale`
    pub tol: f64,
}

impl SubSolution {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        (x * x + y * y + self.k0).ln() - self.shift
    }
}

fn max_neg_l_subsolution(grid: &Grid2D, kernel: &DiscreteKernel, k0: f64) -> Result<f64> {
    let lf = apply_l_analytic(grid, kernel, move |x, y| (x * x + y * y + k0).ln())?;
    let n = grid.n();
    let data = lf.as_slice();
    Ok(exec::max_rows(n, |iy| {
        data[iy * n..(iy + 1) * n].iter().fold(f64::NEG_INFINITY, |a, &v| a.max(-v))
    }))
}

/// Search `k0` (doubling, then bisection refine) so `-L V_- <= tol` at every
/// grid cell, then pick the smallest `R0` with `V_- <= 0` on hole cells.
pub fn build_subsolution(
    grid: &Grid2D,
    mask: &DomainMask,
    kernel: &DiscreteKernel,
) -> Result<SubSolution> {
    let hw = grid.half_width();
    let scale = (2.0 * hw * hw + 1.0).ln();
    let tol = 1e-13 * scale;
    let mut k0 = 0.25;
    let mut last_fail: Option<f64> = None;
    loop {
        if k0 > 1e6 {
            return Err(Error::SearchFailed(
                "no k0 <= 1e6 makes -L V_- nonpositive; kernel under-resolved".into(),
            ));
        }
        if max_neg_l_subsolution(grid, kernel, k0)? <= tol {
            break;
        }
        last_fail = Some(k0);
        k0 *= 2.0;
    }
    if let Some(mut lo) = last_fail {
        let mut hi = k0;
        while hi - lo > 0.05 * hi {
            let mid = 0.5 * (lo + hi);
            if max_neg_l_subsolution(grid, kernel, mid)? <= tol {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        k0 = hi;
    }
    let neg_l_max = max_neg_l_subsolution(grid, kernel, k0)?;

    let n = grid.n();
    let mut shift = f64::NEG_INFINITY;
    for iy in 0..n {
        let y = grid.coord(iy);
        for ix in 0..n {
            if mask.is_hole(ix, iy) {
                let x = grid.coord(ix);
                shift = shift.max((x * x + y * y + k0).ln());
            }
        }
    }
    if !shift.is_finite() {
        return Err(Error::Hole("hole rasterized to zero cells".into()));
    }
    let field = Field2D::from_fn(*grid, |x, y| (x * x + y * y + k0).ln() - shift);
    Ok(SubSolution { field, k0, shift, neg_l_max, tol })
}

/// Outer growth family of an annular super-solution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OuterGrowth {
    /// `log(|x| - r0)` outside `D`; satisfies `-L V >= kappa / |x|^3`.
    LogShifted,
    /// `(log|x|)^nu` outside `D`; satisfies
    /// `-L V >= kappa / (|x|^2 (log|x|)^{2-nu})`.
    LogPower { nu: f64 },
}

/// Locally bounded super-solution built by the annular induction.
#[derive(Clone, Debug)]
pub struct SuperBarrier {
    pub growth: OuterGrowth,
    /// barrier sampled on the grid, including the `gamma` offset
    pub field: Field2D,
    pub r0: f64,
    pub gamma: f64,
    /// `|a_{k+1}|`; any `gamma >= gamma0` keeps the barrier nonnegative
    pub gamma0: f64,
    /// outer radius `D = 2 r0 + k d/2`
    pub big_d: f64,
    /// number of annuli `k`
    pub annuli: usize,
    /// plateau values `a_1 = 0 > a_2 > ... > a_{k+1}`
    pub levels: Vec<f64>,
    /// minimal stencil mass moved from annulus j to annulus j+1
    pub jbar: Vec<f64>,
    /// interior floor: `-L v >= c0` on `2 r0 <= |x| <= D + d`
    pub c0: f64,
    /// certified constant of the stated inequality over exterior cells
    pub kappa: f64,
    grid: Grid2D,
}

impl SuperBarrier {
    fn profile_raw(&self, r: f64) -> f64 {
        if r >= self.big_d {
            match self.growth {
                OuterGrowth::LogShifted => (r - self.r0).ln(),
                OuterGrowth::LogPower { nu } => r.ln().powf(nu),
            }
        } else if r < 2.0 * self.r0 {
            self.levels[self.annuli]
        } else {
            // annulus j: D - j d/2 <= r < D - (j-1) d/2
            let d_half = (self.big_d - 2.0 * self.r0) / self.annuli as f64;
            let j = ((self.big_d - r) / d_half).floor() as usize + 1;
            let j = j.clamp(1, self.annuli);
            self.levels[j - 1]
        }
    }

    /// Barrier value (gamma included) at an arbitrary point.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.profile_raw((x * x + y * y).sqrt()) + self.gamma
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    /// Shift to a larger offset; the super-solution property is unaffected
    /// since the operator annihilates constants.
    pub fn raise_gamma(&mut self, gamma: f64) -> Result<()> {
        if gamma < self.gamma0 {
            return Err(Error::Parameter(format!(
                "gamma = {gamma} below gamma0 = {}",
                self.gamma0
            )));
        }
        let delta = gamma - self.gamma;
        for v in self.field.as_mut_slice() {
            *v += delta;
        }
        self.gamma = gamma;
        Ok(())
    }
}

struct AnnularSetup {
    r0: f64,
    growth: OuterGrowth,
}

impl AnnularSetup {
    fn g(&self, r: f64) -> f64 {
        match self.growth {
            OuterGrowth::LogShifted => (r - self.r0).ln(),
            OuterGrowth::LogPower { nu } => r.ln().powf(nu),
        }
    }

    /// Clamped version of `g` that is finite everywhere (the clamp only
    /// affects points the certified region never reads through the kernel).
    fn g_clamped(&self, r: f64, floor: f64) -> f64 {
        match self.growth {
            OuterGrowth::LogShifted => (r - self.r0).max(floor).ln(),
            OuterGrowth::LogPower { nu } => r.max(1.0 + floor).ln().powf(nu),
        }
    }

    /// Far-field target `rho(r)` of the certified inequality.
    fn rhs(&self, r: f64, q: f64) -> f64 {
        match self.growth {
            OuterGrowth::LogShifted => {
                q * self.r0 * r / (2.0 * (r - self.r0).powi(4))
            }
            OuterGrowth::LogPower { nu } => {
                q * nu * (1.0 - nu) / (2.0 * r * r * r.ln().powf(2.0 - nu))
            }
        }
    }
}

fn build_annular(
    grid: &Grid2D,
    mask: &DomainMask,
    kernel: &DiscreteKernel,
    r0: f64,
    gamma: Option<f64>,
    growth: OuterGrowth,
) -> Result<SuperBarrier> {
    let d = kernel.support_radius();
    let q = kernel.q();
    let h = grid.h();
    if !(r0 > 0.0 && r0 < d / 4.0) {
        return Err(Error::Parameter(format!(
            "need 0 < r0 < d/4 = {}, got {r0}",
            d / 4.0
        )));
    }
    if let OuterGrowth::LogPower { nu } = growth {
        if !(nu > 0.0 && nu < 1.0) {
            return Err(Error::Parameter(format!("need 0 < nu < 1, got {nu}")));
        }
    }
    // B_{2 r0} must be inside the hole (cell-center check)
    let n = grid.n();
    for iy in 0..n {
        let y = grid.coord(iy);
        for ix in 0..n {
            let x = grid.coord(ix);
            if (x * x + y * y).sqrt() < 2.0 * r0 && !mask.is_hole(ix, iy) {
                return Err(Error::Hole(format!(
                    "B_{{2 r0}} with r0 = {r0} is not inside the hole"
                )));
            }
        }
    }

    // smallest k keeping the outer profile's argument away from the clamp and
    // the profile nonnegative where the induction's boundary bounds drop it
    let k_min_positivity = match growth {
        // log(|x| - r0) >= 0 for |x| >= D - d
        OuterGrowth::LogShifted => (2.0 * (1.0 + d - r0) / d).ceil() as usize,
        // sources stay at radius >= D - 2d >= 1.5
        OuterGrowth::LogPower { .. } => ((1.5 + 2.0 * d - 2.0 * r0) * 2.0 / d).ceil() as usize,
    };
    let k_min = k_min_positivity.max(2);

    // far-field certificate: -L g >= rhs cellwise on |x| >= D - d
    let setup_probe = AnnularSetup { r0, growth };
    let floor = 0.25 * h;
    let neg_l_g = {
        let s = &setup_probe;
        apply_l_analytic(grid, kernel, move |x, y| {
            s.g_clamped((x * x + y * y).sqrt(), floor)
        })?
    };
    let mut chosen_k = None;
    'scan: for k in k_min..=64 {
        let big_d = 2.0 * r0 + k as f64 * d / 2.0;
        if big_d + d > 0.9 * grid.half_width() {
            break;
        }
        for iy in 0..n {
            let y = grid.coord(iy);
            for ix in 0..n {
                let x = grid.coord(ix);
                let r = (x * x + y * y).sqrt();
                if r >= big_d - d && -neg_l_g.at(ix, iy) < setup_probe.rhs(r, q) {
                    continue 'scan;
                }
            }
        }
        chosen_k = Some(k);
        break;
    }
    let k = chosen_k.ok_or_else(|| {
        Error::SearchFailed("no annulus count k <= 64 certifies the far-field inequality".into())
    })?;
    let big_d = 2.0 * r0 + k as f64 * d / 2.0;
    let setup = AnnularSetup { r0, growth };

    // interior floor c0 = min of the far-field target on [D, D+d]
    let c0 = match growth {
        OuterGrowth::LogShifted => q * r0 * big_d / (2.0 * (big_d + d - r0).powi(4)),
        OuterGrowth::LogPower { .. } => setup.rhs(big_d + d, q),
    };

    // minimal stencil mass from annulus j into annulus j+1
    let d_half = d / 2.0;
    let annulus_of = |r: f64| -> Option<usize> {
        if r >= big_d || r < 2.0 * r0 {
            return None;
        }
        let j = ((big_d - r) / d_half).floor() as usize + 1;
        Some(j.min(k))
    };
    let h2 = h * h;
    let rc = kernel.radius_cells() as isize;
    let mut jbar = vec![f64::INFINITY; k + 1]; // jbar[j], j = 1..k
    for iy in 0..n {
        let y = grid.coord(iy);
        for ix in 0..n {
            let x = grid.coord(ix);
            let r = (x * x + y * y).sqrt();
            let Some(j) = annulus_of(r) else { continue };
            let mut into_next = 0.0;
            for zy in -rc..=rc {
                for zx in -rc..=rc {
                    let w = kernel.weight(zx, zy);
                    if w == 0.0 {
                        continue;
                    }
                    let sx = x - zx as f64 * h;
                    let sy = y - zy as f64 * h;
                    let sr = (sx * sx + sy * sy).sqrt();
                    let in_next = if j == k {
                        sr < 2.0 * r0
                    } else {
                        annulus_of(sr) == Some(j + 1)
                    };
                    if in_next {
                        into_next += w * h2;
                    }
                }
            }
            jbar[j] = jbar[j].min(into_next);
        }
    }
    for j in 1..=k {
        if !(jbar[j] > 0.0 && jbar[j].is_finite()) {
            return Err(Error::SearchFailed(format!(
                "annulus {j} transfers no stencil mass to annulus {}; under-resolved",
                j + 1
            )));
        }
    }

    // the induction: a_1 = 0, |a_{j+1}| = (c0 + |a_j| + boundary) / Jbar^{j+1}
    let mut levels = vec![0.0f64; k + 1];
    let b1 = setup.g(big_d + d);
    levels[1] = -(c0 + b1) / jbar[1];
    if k >= 2 {
        let b2 = setup.g(big_d + d_half);
        levels[2] = -(c0 + levels[1].abs() + b2) / jbar[2];
    }
    for j in 3..=k {
        levels[j] = -(c0 + levels[j - 1].abs()) / jbar[j];
    }
    for j in 1..=k {
        if !(levels[j] < levels[j - 1]) {
            return Err(Error::SearchFailed(format!(
                "plateau sequence not strictly decreasing at {j}"
            )));
        }
    }
    let gamma0 = levels[k].abs();
    let gamma = gamma.unwrap_or(gamma0);
    if gamma < gamma0 {
        return Err(Error::Parameter(format!(
            "gamma = {gamma} below gamma0 = {gamma0}"
        )));
    }

    let mut barrier = SuperBarrier {
        growth,
        field: Field2D::zeros(*grid),
        r0,
        gamma,
        gamma0,
        big_d,
        annuli: k,
        levels,
        jbar: jbar[1..].to_vec(),
        c0,
        kappa: 0.0,
        grid: *grid,
    };

    // cellwise verification of the constructed profile
    let profile = {
        let b = &barrier;
        apply_l_analytic(grid, kernel, move |x, y| b.profile_raw((x * x + y * y).sqrt()))?
    };
    let level_scale = barrier.levels[k].abs().max(1.0);
    let slack = 1e-9 * (c0 + level_scale);
    let mut kappa = f64::INFINITY;
    for iy in 0..n {
        let y = grid.coord(iy);
        for ix in 0..n {
            let x = grid.coord(ix);
            let r = (x * x + y * y).sqrt();
            let neg_l = -profile.at(ix, iy);
            if r >= 2.0 * r0 && r <= big_d + d {
                if neg_l < c0 - slack {
                    return Err(Error::SearchFailed(format!(
                        "interior floor violated at ({x}, {y}): -Lv = {neg_l} < c0 = {c0}"
                    )));
                }
            } else if r > big_d + d && neg_l < setup.rhs(r, q) - slack {
                return Err(Error::SearchFailed(format!(
                    "far-field inequality violated at ({x}, {y}): -Lv = {neg_l}"
                )));
            }
            if !mask.is_hole(ix, iy) {
                let weight = match growth {
                    OuterGrowth::LogShifted => r * r * r,
                    OuterGrowth::LogPower { nu } => r * r * r.ln().powf(2.0 - nu),
                };
                kappa = kappa.min(neg_l * weight);
            }
        }
    }
    if !(kappa > 0.0) {
        return Err(Error::SearchFailed(format!(
            "certified kappa must be positive, got {kappa}"
        )));
    }
    barrier.kappa = kappa;
    barrier.field = Field2D::from_fn(*grid, |x, y| barrier.profile_raw((x * x + y * y).sqrt()) + gamma);
    Ok(barrier)
}

/// Super-solution growing like `log(|x| - r0)`, with
/// `-L V >= kappa / |x|^3` certified cellwise on exterior cells.
pub fn build_supersolution(
    grid: &Grid2D,
    mask: &DomainMask,
    kernel: &DiscreteKernel,
    r0: f64,
    gamma: Option<f64>,
) -> Result<SuperBarrier> {
    build_annular(grid, mask, kernel, r0, gamma, OuterGrowth::LogShifted)
}

/// Super-solution growing like `(log|x|)^nu`, `0 < nu < 1`, with
/// `-L V >= kappa / (|x|^2 (log|x|)^{2-nu})` certified cellwise.
pub fn build_log_power_supersolution(
    grid: &Grid2D,
    mask: &DomainMask,
    kernel: &DiscreteKernel,
    nu: f64,
    gamma: Option<f64>,
) -> Result<SuperBarrier> {
    let r0 = (kernel.support_radius() / 8.0).min(0.5);
    build_annular(grid, mask, kernel, r0, gamma, OuterGrowth::LogPower { nu })
}

/// Result of checking the evolutionary super-solution inequality
/// on the band `4 r0^2 <= |x|^2 <= 2 a t`.
#[derive(Clone, Debug)]
pub struct EvolutionBarrierCheck {
    pub a: f64,
    pub gamma_exp: f64,
    pub b: f64,
    pub t_start: f64,
    pub sample_times: Vec<f64>,
    /// min over band points and times of
    /// `(dV/dt - LV) / [ (1/10)(q/a - 1) Gamma_a (V_+ + b) / (t log^gamma t) ]`
    pub min_ratio: f64,
    /// location and time of the minimum
    pub worst: (f64, f64, f64),
}

fn gamma_a(a: f64, x: f64, y: f64, t: f64) -> f64 {
    let s = 4.0 * a * t;
    (-(x * x + y * y) / s).exp() / (std::f64::consts::PI * s)
}

/// Evaluate the inequality ratio for `V(x,t) = Gamma_a (V_+ + b) / log^g t`
/// at the given `b`, `T`, and sample times (all `>= T`).
pub fn evolution_supersolution_check(
    sup: &SuperBarrier,
    kernel: &DiscreteKernel,
    a: f64,
    gamma_exp: f64,
    b: f64,
    t_start: f64,
    sample_times: &[f64],
) -> Result<EvolutionBarrierCheck> {
    let q = kernel.q();
    if !(a > 0.0 && a < q) {
        return Err(Error::Parameter(format!("need 0 < a < q = {q}, got a = {a}")));
    }
    if gamma_exp < 2.0 {
        return Err(Error::Parameter(format!("need gamma >= 2, got {gamma_exp}")));
    }
    if sample_times.is_empty() || sample_times.iter().any(|&t| t < t_start || t <= 1.0) {
        return Err(Error::Parameter("need nonempty sample times, all >= T > 1".into()));
    }
    let h = kernel.h();
    let r0 = sup.r0;
    let offsets: Vec<(f64, f64, f64)> = kernel
        .offsets()
        .map(|(zx, zy, w)| (zx as f64 * h, zy as f64 * h, w))
        .collect();
    let mut min_ratio = f64::INFINITY;
    let mut worst = (0.0, 0.0, 0.0);
    for &t in sample_times {
        let band_max_r2 = 2.0 * a * t;
        let band_min_r2 = 4.0 * r0 * r0;
        let imax = (band_max_r2.sqrt() / h).ceil() as isize + 1;
        let log_t = t.ln();
        let log_pow = log_t.powf(gamma_exp);
        let v_at = |x: f64, y: f64| -> f64 { gamma_a(a, x, y, t) * (sup.eval(x, y) + b) / log_pow };
        let ratio_at = |x: f64, y: f64| -> f64 {
            let r2 = x * x + y * y;
            let mut acc = 0.0;
            for &(dx, dy, w) in &offsets {
                acc += w * v_at(x - dx, y - dy);
            }
            let lv = acc * h * h - v_at(x, y);
            let g = gamma_a(a, x, y, t);
            let vplusb = sup.eval(x, y) + b;
            let dt_gamma = (r2 / (4.0 * a * t) - 1.0) * g / t;
            let dv_dt =
                dt_gamma * vplusb / log_pow - gamma_exp * g * vplusb / (t * log_pow * log_t);
            let denom = 0.1 * (q / a - 1.0) * g * vplusb / (t * log_pow);
            (dv_dt - lv) / denom
        };
        let row_minima = exec::row_map((2 * imax + 1) as usize, |row| {
            let y = (row as isize - imax) as f64 * h + 0.5 * h;
            let mut row_min = f64::INFINITY;
            for ix in -imax..=imax {
                let x = (ix as f64 + 0.5) * h;
                let r2 = x * x + y * y;
                if r2 < band_min_r2 || r2 > band_max_r2 {
                    continue;
                }
                row_min = row_min.min(ratio_at(x, y));
            }
            row_min
        });
        for (row, &rm) in row_minima.iter().enumerate() {
            if rm < min_ratio {
                min_ratio = rm;
                let y = (row as isize - imax) as f64 * h + 0.5 * h;
                // rescan the winning row for the x location
                let mut wx = 0.0;
                let mut best = f64::INFINITY;
                for ix in -imax..=imax {
                    let x = (ix as f64 + 0.5) * h;
                    let r2 = x * x + y * y;
                    if r2 < band_min_r2 || r2 > band_max_r2 {
                        continue;
                    }
                    let v = ratio_at(x, y);
                    if v < best {
                        best = v;
                        wx = x;
                    }
                }
                worst = (wx, y, t);
            }
        }
    }
    Ok(EvolutionBarrierCheck {
        a,
        gamma_exp,
        b,
        t_start,
        sample_times: sample_times.to_vec(),
        min_ratio,
        worst,
    })
}

/// Doubling search for `(b, T)` making the inequality ratio at least one,
/// sampling at `T`, `2T`, `4T`.
pub fn find_evolution_supersolution_params(
    sup: &SuperBarrier,
    kernel: &DiscreteKernel,
    a: f64,
    gamma_exp: f64,
) -> Result<EvolutionBarrierCheck> {
    let mut best: Option<EvolutionBarrierCheck> = None;
    for t_start in [64.0, 256.0, 1024.0, 4096.0] {
        let samples = [t_start, 2.0 * t_start, 4.0 * t_start];
        let mut b = 1.0f64;
        while b <= (1u64 << 40) as f64 {
            let check =
                evolution_supersolution_check(sup, kernel, a, gamma_exp, b, t_start, &samples)?;
            if check.min_ratio >= 1.0 {
                return Ok(check);
            }
            let better = best.as_ref().map_or(true, |old| check.min_ratio > old.min_ratio);
            if better {
                best = Some(check);
            }
            b *= 2.0;
        }
    }
    let best = best.expect("at least one (b, T) was tested");
    Err(Error::SearchFailed(format!(
        "no (b, T) reached ratio 1; best ratio {} at b = {}, T = {}, worst cell {:?}",
        best.min_ratio, best.b, best.t_start, best.worst
    )))
}
