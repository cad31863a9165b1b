//! The stationary profile: `L phi = 0` outside the hole, `phi = 0` inside,
//! `phi - log|x|` bounded.
//!
//! The construction mirrors the truncated problems: on an increasing ladder
//! of radii `R`, `phi` is pinned to `V_-/2` on the frame `R <= |x| < R + d`
//! and to zero on the hole, and the interior is iterated with `phi <- J*phi`.
//! Started at `V_-/2` (a certified discrete sub-solution) the iteration is
//! cellwise nondecreasing and squeezed below the super-solution, which gives
//! a built-in correctness signal; rung solutions are themselves nondecreasing
//! in the ladder radius when each rung warm-starts from the previous one.
//!
//! Jacobi mixing is slow on large rungs, so a conjugate-gradient solver for
//! the same fixed point (`I - J*` restricted to the iterated cells is
//! symmetric positive definite) is provided for production grids. The two
//! paths agree to solver tolerance; the monotone path is the one the
//! ordering assertions run on.

use crate::barrier::{SubSolution, SuperBarrier};
use crate::conv::ConvolutionPlan;
use crate::domain::DomainMask;
use crate::error::{Error, Result};
use crate::exec;
use crate::grid::{Field2D, Grid2D};
use crate::kernel::DiscreteKernel;

/// Per-rung convergence record of the monotone ladder.
#[derive(Clone, Debug)]
pub struct RungReport {
    pub radius: f64,
    pub iterations: usize,
    pub final_update: f64,
    /// oscillation of `phi - log|x|` over the outer test annulus restricted
    /// to this rung's iterated cells (None when the annulus is outside)
    pub osc: Option<f64>,
    /// most negative cellwise increment seen across iteration checkpoints
    pub min_iteration_gap: f64,
    /// most negative cellwise gap to the previous rung's solution
    pub min_ladder_gap: f64,
}

/// Solved stationary profile with its certificates.
#[derive(Clone, Debug)]
pub struct StationaryProfile {
    pub phi: Field2D,
    /// sup |J*phi - phi| over the final rung's iterated cells
    pub residual: f64,
    /// oscillation of `phi - log|x|` on `{hw/3 <= |x| <= hw/2}`
    pub growth_defect: f64,
    pub rungs: Vec<RungReport>,
    /// min over all cells of `phi - V_-/2`
    pub sandwich_lower_gap: f64,
    /// min over all cells of `V_+ - phi`
    pub sandwich_upper_gap: f64,
    /// sup over exterior cells of `|phi - log|x||`
    pub sup_phi_minus_log: f64,
    pub ladder: Vec<f64>,
}

impl StationaryProfile {
    /// Conserved pairing `int u0 phi` for a given initial datum.
    pub fn m_star(&self, u0: &Field2D) -> f64 {
        assert_eq!(u0.grid(), self.phi.grid());
        let n = u0.grid().n();
        let h2 = u0.grid().cell_area();
        let phi = self.phi.as_slice();
        let u = u0.as_slice();
        exec::sum_rows(n, |iy| {
            let up = &u[iy * n..(iy + 1) * n];
            let pp = &phi[iy * n..(iy + 1) * n];
            up.iter().zip(pp).map(|(&a, &b)| a * b).sum::<f64>()
        }) * h2
    }
}

#[derive(Clone, Debug)]
pub struct StationaryConfig {
    /// stop a rung when the sup update (= fixed-point residual) drops below
    pub tol: f64,
    /// rung radii, increasing; frames have width d
    pub ladder: Vec<f64>,
    pub max_iters: usize,
    /// monotonicity checkpoint interval (iterations)
    pub check_every: usize,
}

impl StationaryConfig {
    pub fn defaults_for(grid: &Grid2D) -> Self {
        let hw = grid.half_width();
        Self {
            tol: 1e-8,
            ladder: vec![hw / 4.0, hw / 2.0, 3.0 * hw / 4.0],
            max_iters: 2_000_000,
            check_every: 50,
        }
    }
}

fn radius_field(grid: &Grid2D) -> Vec<f64> {
    let n = grid.n();
    let mut r = vec![0.0; n * n];
    for iy in 0..n {
        let y = grid.coord(iy);
        for ix in 0..n {
            let x = grid.coord(ix);
            r[iy * n + ix] = (x * x + y * y).sqrt();
        }
    }
    r
}

/// Oscillation (max - min) of `phi - log|x|` over annulus cells with
/// `r_lo <= |x| <= r_hi` restricted by an optional radius cap.
fn log_growth_oscillation(
    phi: &Field2D,
    radii: &[f64],
    r_lo: f64,
    r_hi: f64,
    cap: Option<f64>,
) -> Option<f64> {
    let n = phi.grid().n();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for iy in 0..n {
        for ix in 0..n {
            let r = radii[iy * n + ix];
            if r < r_lo || r > r_hi {
                continue;
            }
            if let Some(cap) = cap {
                if r >= cap {
                    continue;
                }
            }
            let v = phi.at(ix, iy) - r.ln();
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if hi >= lo {
        Some(hi - lo)
    } else {
        None
    }
}

/// Recompute every certificate of a profile field (residual, growth defect,
/// sandwich gaps, `sup|phi - log|x||`). Used both by the solvers and to
/// re-certify cached fields.
pub fn certify_profile(
    phi: Field2D,
    mask: &DomainMask,
    kernel: &DiscreteKernel,
    plan: &ConvolutionPlan,
    sub: &SubSolution,
    sup: &SuperBarrier,
    rungs: Vec<RungReport>,
    ladder: Vec<f64>,
) -> Result<StationaryProfile> {
    let radii = radius_field(&phi.grid());
    finish_profile(phi, mask, kernel, plan, sub, sup, &radii, rungs, ladder)
}

fn finish_profile(
    mut phi: Field2D,
    mask: &DomainMask,
    kernel: &DiscreteKernel,
    plan: &ConvolutionPlan,
    sub: &SubSolution,
    sup: &SuperBarrier,
    radii: &[f64],
    rungs: Vec<RungReport>,
    ladder: Vec<f64>,
) -> Result<StationaryProfile> {
    let grid = phi.grid();
    let n = grid.n();
    let hw = grid.half_width();
    let r_final = *ladder.last().unwrap();

    let jphi = crate::conv::convolve(&phi, kernel, plan)?;
    let mut residual = 0.0f64;
    for iy in 0..n {
        for ix in 0..n {
            let idx = iy * n + ix;
            if radii[idx] < r_final && !mask.is_hole(ix, iy) {
                residual = residual.max((jphi.at(ix, iy) - phi.at(ix, iy)).abs());
            }
        }
    }

    let growth_defect = log_growth_oscillation(&phi, radii, hw / 3.0, hw / 2.0, None)
        .ok_or_else(|| Error::Grid("outer test annulus holds no cells".into()))?;

    let mut lower = f64::INFINITY;
    let mut upper = f64::INFINITY;
    let mut sup_log = 0.0f64;
    for iy in 0..n {
        for ix in 0..n {
            let idx = iy * n + ix;
            let v = phi.at(ix, iy);
            lower = lower.min(v - 0.5 * sub.field.at(ix, iy));
            upper = upper.min(sup.field.at(ix, iy) - v);
            if !mask.is_hole(ix, iy) {
                sup_log = sup_log.max((v - radii[idx].ln()).abs());
            }
        }
    }

    // hole cells are exactly zero by construction; make it explicit
    mask.apply(&mut phi);

    Ok(StationaryProfile {
        phi,
        residual,
        growth_defect,
        rungs,
        sandwich_lower_gap: lower,
        sandwich_upper_gap: upper,
        sup_phi_minus_log: sup_log,
        ladder,
    })
}

/// Monotone ladder solve: `phi <- J*phi` on each rung, warm-starting the
/// next rung, with cellwise monotonicity checked at every checkpoint.
pub fn solve_stationary_monotone(
    mask: &DomainMask,
    kernel: &DiscreteKernel,
    plan: &ConvolutionPlan,
    sub: &SubSolution,
    sup: &SuperBarrier,
    cfg: &StationaryConfig,
) -> Result<StationaryProfile> {
    let grid = mask.grid();
    let n = grid.n();
    let hw = grid.half_width();
    validate_ladder(&cfg.ladder, kernel, hw)?;
    let radii = radius_field(&grid);
    let scale = sup.gamma.abs().max(1.0);

    // gamma must be large enough for the sandwich to be possible at all
    let mut sandwich_floor = f64::INFINITY;
    for i in 0..n * n {
        sandwich_floor = sandwich_floor.min(sup.field.as_slice()[i] - 0.5 * sub.field.as_slice()[i]);
    }
    if sandwich_floor < 0.0 {
        return Err(Error::Parameter(format!(
            "super-solution offset too small: min(V_+ - V_-/2) = {sandwich_floor}; raise gamma"
        )));
    }

    let mut phi = Field2D::zeros(grid);
    for iy in 0..n {
        for ix in 0..n {
            let v = if mask.is_hole(ix, iy) { 0.0 } else { 0.5 * sub.field.at(ix, iy) };
            phi.set(ix, iy, v);
        }
    }

    let mut rungs = Vec::new();
    let mut prev_rung: Option<(Field2D, f64)> = None;
    for &radius in &cfg.ladder {
        let hole_flags = mask.flags();
        let iterated: Vec<bool> = (0..n * n)
            .map(|idx| radii[idx] < radius && !hole_flags[idx])
            .collect();
        let mut snapshot = phi.clone();
        let mut min_iter_gap = f64::INFINITY;
        let mut iterations = 0usize;
        let mut update;
        loop {
            let jphi = crate::conv::convolve(&phi, kernel, plan)?;
            let jdata = jphi.as_slice();
            let flags = &iterated;
            let updates = {
                let pdata = phi.as_slice();
                exec::row_map(n, |iy| {
                    let mut worst = 0.0f64;
                    let row = iy * n;
                    for ix in 0..n {
                        let idx = row + ix;
                        if flags[idx] {
                            worst = worst.max((jdata[idx] - pdata[idx]).abs());
                        }
                    }
                    worst
                })
            };
            update = updates.iter().fold(0.0f64, |a, &b| a.max(b));
            {
                let pdata = phi.as_mut_slice();
                exec::for_each_row_mut(pdata, n, |iy, row| {
                    let base = iy * n;
                    for (ix, v) in row.iter_mut().enumerate() {
                        if flags[base + ix] {
                            *v = jdata[base + ix];
                        }
                    }
                });
            }
            iterations += 1;
            if iterations % cfg.check_every == 0 {
                let mut gap = f64::INFINITY;
                for idx in 0..n * n {
                    if iterated[idx] {
                        gap = gap.min(phi.as_slice()[idx] - snapshot.as_slice()[idx]);
                    }
                }
                min_iter_gap = min_iter_gap.min(gap);
                if gap < -1e-9 * scale {
                    return Err(Error::NoConvergence(format!(
                        "iteration lost monotonicity at rung {radius}: gap {gap}"
                    )));
                }
                snapshot = phi.clone();
            }
            if update < cfg.tol {
                break;
            }
            if iterations >= cfg.max_iters {
                return Err(Error::NoConvergence(format!(
                    "rung {radius}: update {update} above tol {} after {} iterations",
                    cfg.tol, iterations
                )));
            }
        }
        let mut min_ladder_gap = f64::INFINITY;
        if let Some((prev_phi, prev_radius)) = &prev_rung {
            for idx in 0..n * n {
                if radii[idx] < *prev_radius && !hole_flags[idx] {
                    min_ladder_gap =
                        min_ladder_gap.min(phi.as_slice()[idx] - prev_phi.as_slice()[idx]);
                }
            }
            if min_ladder_gap < -1e-9 * scale {
                return Err(Error::NoConvergence(format!(
                    "ladder lost monotonicity at rung {radius}: gap {min_ladder_gap}"
                )));
            }
        }
        rungs.push(RungReport {
            radius,
            iterations,
            final_update: update,
            osc: log_growth_oscillation(&phi, &radii, hw / 3.0, hw / 2.0, Some(radius)),
            min_iteration_gap: min_iter_gap,
            min_ladder_gap,
        });
        prev_rung = Some((phi.clone(), radius));
    }

    finish_profile(phi, mask, kernel, plan, sub, sup, &radii, rungs, cfg.ladder.clone())
}

fn validate_ladder(ladder: &[f64], kernel: &DiscreteKernel, hw: f64) -> Result<()> {
    if ladder.is_empty() {
        return Err(Error::Parameter("ladder must not be empty".into()));
    }
    for w in ladder.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Parameter("ladder radii must increase".into()));
        }
    }
    let last = *ladder.last().unwrap();
    if last + kernel.support_radius() > hw {
        return Err(Error::Parameter(format!(
            "largest rung {last} plus frame width exceeds the box ({hw})"
        )));
    }
    Ok(())
}

fn chunked_dot(a: &[f64], b: &[f64]) -> f64 {
    const CHUNK: usize = 8192;
    let chunks = a.len().div_ceil(CHUNK);
    exec::sum_rows(chunks, |c| {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(a.len());
        a[lo..hi].iter().zip(&b[lo..hi]).map(|(&x, &y)| x * y).sum::<f64>()
    })
}

/// Conjugate-gradient solve of the largest-rung fixed point; same contract
/// as the monotone path minus the ordering reports.
pub fn solve_stationary_cg(
    mask: &DomainMask,
    kernel: &DiscreteKernel,
    plan: &ConvolutionPlan,
    sub: &SubSolution,
    sup: &SuperBarrier,
    cfg: &StationaryConfig,
) -> Result<StationaryProfile> {
    let grid = mask.grid();
    let n = grid.n();
    let hw = grid.half_width();
    validate_ladder(&cfg.ladder, kernel, hw)?;
    let radius = *cfg.ladder.last().unwrap();
    let d = kernel.support_radius();
    let radii = radius_field(&grid);
    let hole_flags = mask.flags();

    let free: Vec<usize> = (0..n * n)
        .filter(|&idx| radii[idx] < radius && !hole_flags[idx])
        .collect();
    let m = free.len();

    // frame field: V_-/2 on [radius, radius + d), zero on hole and beyond
    let mut frame = Field2D::zeros(grid);
    for iy in 0..n {
        for ix in 0..n {
            let idx = iy * n + ix;
            if radii[idx] >= radius && radii[idx] < radius + d && !hole_flags[idx] {
                frame.set(ix, iy, 0.5 * sub.field.at(ix, iy));
            }
        }
    }
    let jframe = crate::conv::convolve(&frame, kernel, plan)?;
    let bvec: Vec<f64> = free.iter().map(|&idx| jframe.as_slice()[idx]).collect();

    let mut scratch = Field2D::zeros(grid);
    let mut apply_a = |v: &[f64]| -> Result<Vec<f64>> {
        for s in scratch.as_mut_slice().iter_mut() {
            *s = 0.0;
        }
        for (i, &idx) in free.iter().enumerate() {
            scratch.as_mut_slice()[idx] = v[i];
        }
        let jv = crate::conv::convolve(&scratch, kernel, plan)?;
        Ok(free.iter().enumerate().map(|(i, &idx)| v[i] - jv.as_slice()[idx]).collect())
    };

    let mut x: Vec<f64> = free.iter().map(|&idx| 0.5 * sub.field.as_slice()[idx]).collect();
    let ax = apply_a(&x)?;
    let mut r: Vec<f64> = bvec.iter().zip(&ax).map(|(&b, &a)| b - a).collect();
    let mut p = r.clone();
    let mut rs = chunked_dot(&r, &r);
    let sup_r = |r: &[f64]| r.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let mut iterations = 0usize;
    while sup_r(&r) >= cfg.tol {
        if iterations >= cfg.max_iters {
            return Err(Error::NoConvergence(format!(
                "cg: residual {} above tol {} after {} iterations",
                sup_r(&r),
                cfg.tol,
                iterations
            )));
        }
        let ap = apply_a(&p)?;
        let denom = chunked_dot(&p, &ap);
        if denom <= 0.0 {
            return Err(Error::NoConvergence("cg: operator lost positive definiteness".into()));
        }
        let alpha = rs / denom;
        for i in 0..m {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rs_new = chunked_dot(&r, &r);
        let beta = rs_new / rs;
        rs = rs_new;
        for i in 0..m {
            p[i] = r[i] + beta * p[i];
        }
        iterations += 1;
    }

    // same field convention as the monotone path: V_-/2 everywhere outside
    // the rung, zero on the hole, solved values inside
    let mut phi = Field2D::zeros(grid);
    for iy in 0..n {
        for ix in 0..n {
            let idx = iy * n + ix;
            let v = if hole_flags[idx] { 0.0 } else { 0.5 * sub.field.at(ix, iy) };
            phi.set(ix, iy, v);
        }
    }
    for (i, &idx) in free.iter().enumerate() {
        phi.as_mut_slice()[idx] = x[i];
    }
    let final_update = sup_r(&r);
    let rungs = vec![RungReport {
        radius,
        iterations,
        final_update,
        osc: log_growth_oscillation(&phi, &radii, hw / 3.0, hw / 2.0, Some(radius)),
        min_iteration_gap: f64::NAN,
        min_ladder_gap: f64::NAN,
    }];
    finish_profile(phi, mask, kernel, plan, sub, sup, &radii, rungs, vec![radius])
}

/// Offset making the sandwich `V_-/2 <= V_+ + gamma` hold on the whole grid.
pub fn sandwich_gamma(sub: &SubSolution, sup: &SuperBarrier) -> f64 {
    let mut need = sup.gamma0;
    let raw_offset = sup.gamma;
    for (s, v) in sub.field.as_slice().iter().zip(sup.field.as_slice()) {
        need = need.max(0.5 * s - (v - raw_offset) + 1.0);
    }
    need
}

/// Report of the bounded-solution probe: with zero frame data the iteration
/// must collapse to zero from any bounded start.
#[derive(Clone, Debug)]
pub struct UniquenessProbe {
    pub radius: f64,
    /// per initialization: (final sup norm, iterations used)
    pub outcomes: Vec<(f64, usize)>,
}

impl UniquenessProbe {
    pub fn max_final_sup(&self) -> f64 {
        self.outcomes.iter().fold(0.0f64, |a, &(s, _)| a.max(s))
    }
}

fn splitmix(state: &mut u64) -> f64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z = z ^ (z >> 31);
    (z >> 11) as f64 / (1u64 << 53) as f64
}

/// Iterate the masked map with zero frame data from several bounded nonzero
/// starts; the limit is the zero field (the only bounded solution).
pub fn uniqueness_probe(
    mask: &DomainMask,
    kernel: &DiscreteKernel,
    plan: &ConvolutionPlan,
    radius: f64,
    tol: f64,
    max_iters: usize,
) -> Result<UniquenessProbe> {
    let grid = mask.grid();
    let n = grid.n();
    let radii = radius_field(&grid);
    let hole_flags = mask.flags();
    let iterated: Vec<bool> = (0..n * n)
        .map(|idx| radii[idx] < radius && !hole_flags[idx])
        .collect();

    let mut inits: Vec<Field2D> = Vec::new();
    inits.push(Field2D::from_fn(grid, |_, _| 1.0));
    let mut seed = 0x5eed_cafe_f00du64;
    let mut random = Field2D::zeros(grid);
    for v in random.as_mut_slice() {
        *v = splitmix(&mut seed);
    }
    inits.push(random);
    inits.push(Field2D::from_fn(grid, |x, y| {
        let r = (x * x + y * y).sqrt();
        if r < radius {
            (std::f64::consts::PI * r / (2.0 * radius)).cos().powi(2)
        } else {
            0.0
        }
    }));

    let mut outcomes = Vec::new();
    for init in inits {
        let mut phi = Field2D::zeros(grid);
        for idx in 0..n * n {
            if iterated[idx] {
                phi.as_mut_slice()[idx] = init.as_slice()[idx];
            }
        }
        let mut iters = 0usize;
        let mut sup = phi.sup_norm();
        while sup > tol && iters < max_iters {
            let jphi = crate::conv::convolve(&phi, kernel, plan)?;
            let jdata = jphi.as_slice();
            let flags = &iterated;
            exec::for_each_row_mut(phi.as_mut_slice(), n, |iy, row| {
                let base = iy * n;
                for (ix, v) in row.iter_mut().enumerate() {
                    *v = if flags[base + ix] { jdata[base + ix] } else { 0.0 };
                }
            });
            iters += 1;
            if iters % 16 == 0 || iters == max_iters {
                sup = phi.sup_norm();
            }
        }
        outcomes.push((phi.sup_norm(), iters));
    }
    Ok(UniquenessProbe { radius, outcomes })
}

/// Empirical constants of the gradient decay: `sup |x| |grad phi|` over
/// `r_lo <= |x| <= r_hi` (centered differences, one-sided next to the hole
/// or box edge), and `sup |x| |phi(y) - phi(x)|` over kernel-neighbor pairs.
#[derive(Clone, Copy, Debug)]
pub struct GradientReport {
    pub c_gradient: f64,
    pub c_difference: f64,
}

pub fn gradient_bound_report(
    phi: &Field2D,
    mask: &DomainMask,
    kernel: &DiscreteKernel,
    r_lo: f64,
    r_hi: f64,
) -> GradientReport {
    let grid = phi.grid();
    let n = grid.n();
    let h = grid.h();
    let ok = |ix: isize, iy: isize| -> bool {
        ix >= 0
            && iy >= 0
            && ix < n as isize
            && iy < n as isize
            && !mask.is_hole(ix as usize, iy as usize)
    };
    let mut c_grad = 0.0f64;
    for iy in 0..n {
        let y = grid.coord(iy);
        for ix in 0..n {
            if mask.is_hole(ix, iy) {
                continue;
            }
            let x = grid.coord(ix);
            let r = (x * x + y * y).sqrt();
            if r < r_lo || r > r_hi {
                continue;
            }
            let (i, j) = (ix as isize, iy as isize);
            let dx = if ok(i + 1, j) && ok(i - 1, j) {
                (phi.at(ix + 1, iy) - phi.at(ix - 1, iy)) / (2.0 * h)
            } else if ok(i + 1, j) {
                (phi.at(ix + 1, iy) - phi.at(ix, iy)) / h
            } else if ok(i - 1, j) {
                (phi.at(ix, iy) - phi.at(ix - 1, iy)) / h
            } else {
                0.0
            };
            let dy = if ok(i, j + 1) && ok(i, j - 1) {
                (phi.at(ix, iy + 1) - phi.at(ix, iy - 1)) / (2.0 * h)
            } else if ok(i, j + 1) {
                (phi.at(ix, iy + 1) - phi.at(ix, iy)) / h
            } else if ok(i, j - 1) {
                (phi.at(ix, iy) - phi.at(ix, iy - 1)) / h
            } else {
                0.0
            };
            c_grad = c_grad.max(r * (dx * dx + dy * dy).sqrt());
        }
    }

    let rc = kernel.radius_cells() as isize;
    let mut c_diff = 0.0f64;
    let stride = 4usize;
    for iy in (0..n).step_by(stride) {
        let y = grid.coord(iy);
        for ix in (0..n).step_by(stride) {
            if mask.is_hole(ix, iy) {
                continue;
            }
            let x = grid.coord(ix);
            let r = (x * x + y * y).sqrt();
            if r < r_lo || r > r_hi {
                continue;
            }
            for zy in -rc..=rc {
                for zx in -rc..=rc {
                    if kernel.weight(zx, zy) == 0.0 {
                        continue;
                    }
                    let (jx, jy) = (ix as isize - zx, iy as isize - zy);
                    if !ok(jx, jy) {
                        continue;
                    }
                    let diff = (phi.at(jx as usize, jy as usize) - phi.at(ix, iy)).abs();
                    c_diff = c_diff.max(r * diff);
                }
            }
        }
    }
    GradientReport { c_gradient: c_grad, c_difference: c_diff }
}
