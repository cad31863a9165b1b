//! Functionals of the solution and the scaled errors that turn the long-time
//! statements into measurable trends.
//!
//! All functionals are midpoint-rule sums `sum u(x) w(x) h^2` evaluated in a
//! fixed row order, so diagnostic output is reproducible bit-for-bit. Scaled
//! asymptotic errors follow the statements they probe:
//!
//! - outer: `t log t * sup_{|x| >= delta sqrt t} |u - 2 M* Gamma_q / log t|`
//! - inner: `t (log t)^2 * sup_{|x|^2 <= 2 a t} |u - 4 M* phi W_t / (log t)^2| / log|x|`
//! - intermediate rings `|x|^2 = t h(t)`: average of `t log t u`, approaching
//!   `(1 - alpha) M* / (2 pi q)` when `log h(t) / log t -> -alpha`.

use crate::domain::DomainMask;
use crate::error::{Error, Result};
use crate::exec;
use crate::fundamental::GaussianProfile;
use crate::grid::Field2D;

fn weighted_integral<W>(u: &Field2D, w: W) -> f64
where
    W: Fn(f64, f64, f64) -> f64 + Sync,
{
    let grid = u.grid();
    let n = grid.n();
    let h2 = grid.cell_area();
    let data = u.as_slice();
    exec::sum_rows(n, |iy| {
        let y = grid.coord(iy);
        let row = &data[iy * n..(iy + 1) * n];
        let mut acc = 0.0;
        for (ix, &v) in row.iter().enumerate() {
            acc += w(grid.coord(ix), y, v);
        }
        acc
    }) * h2
}

/// Total mass `int u`.
pub fn mass(u: &Field2D) -> f64 {
    weighted_integral(u, |_, _, v| v)
}

/// Logarithmic momentum `int u log|x|`; the integrand is evaluated only
/// where `u > 0` (u vanishes near the origin, where the log is singular).
pub fn log_momentum(u: &Field2D) -> f64 {
    weighted_integral(u, |x, y, v| {
        if v > 0.0 {
            v * 0.5 * (x * x + y * y).ln()
        } else {
            0.0
        }
    })
}

/// Conserved pairing `int u phi` with the stationary profile.
pub fn phi_momentum(u: &Field2D, phi: &Field2D) -> Result<f64> {
    if u.grid() != phi.grid() {
        return Err(Error::PlanMismatch("phi sampled on a different grid".into()));
    }
    let n = u.grid().n();
    let h2 = u.grid().cell_area();
    let a = u.as_slice();
    let b = phi.as_slice();
    Ok(exec::sum_rows(n, |iy| {
        let ra = &a[iy * n..(iy + 1) * n];
        let rb = &b[iy * n..(iy + 1) * n];
        ra.iter().zip(rb).map(|(&x, &y)| x * y).sum::<f64>()
    }) * h2)
}

/// Radial momentum `int u |x|^p`, `p` in {1, 2}.
pub fn radial_momentum(u: &Field2D, p: u32) -> Result<f64> {
    match p {
        1 => Ok(weighted_integral(u, |x, y, v| v * (x * x + y * y).sqrt())),
        2 => Ok(weighted_integral(u, |x, y, v| v * (x * x + y * y))),
        _ => Err(Error::Parameter(format!("radial momentum order must be 1 or 2, got {p}"))),
    }
}

/// `int u` over the cells selected by a predicate on cell centers.
pub fn region_integral<P>(u: &Field2D, pred: P) -> f64
where
    P: Fn(f64, f64) -> bool + Sync,
{
    weighted_integral(u, |x, y, v| if pred(x, y) { v } else { 0.0 })
}

/// Mass fraction in the outermost strip of the given width in cells; the
/// domain-truncation sentinel.
pub fn edge_strip_mass_fraction(u: &Field2D, width_cells: usize) -> f64 {
    let n = u.grid().n();
    let w = width_cells.min(n / 2);
    let total = mass(u);
    if total <= 0.0 {
        return 0.0;
    }
    let strip = weighted_integral(u, |_, _, v| v)
        - {
            // interior block sum
            let data = u.as_slice();
            let h2 = u.grid().cell_area();
            exec::sum_rows(n - 2 * w, |r| {
                let iy = r + w;
                data[iy * n + w..(iy + 1) * n - w].iter().sum::<f64>()
            }) * h2
        };
    strip / total
}

/// Outer scaled error
/// `t log t * sup { |u - 2 M* Gamma_q(.,t)/log t| : |x| >= delta sqrt t }`.
pub fn outer_error(u: &Field2D, t: f64, m_star: f64, q: f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::Parameter(format!("delta must be positive, got {delta}")));
    }
    if t <= std::f64::consts::E {
        return Err(Error::Parameter(format!("outer error needs t > e, got {t}")));
    }
    let grid = u.grid();
    let r_min = delta * t.sqrt();
    if r_min > grid.half_width() {
        return Err(Error::Parameter(format!(
            "annulus |x| >= {r_min} is outside the box (half width {})",
            grid.half_width()
        )));
    }
    let log_t = t.ln();
    let gamma = GaussianProfile::new(q)?;
    let n = grid.n();
    let data = u.as_slice();
    let sup = exec::max_rows(n, |iy| {
        let y = grid.coord(iy);
        let row = &data[iy * n..(iy + 1) * n];
        let mut worst = 0.0f64;
        for (ix, &v) in row.iter().enumerate() {
            let x = grid.coord(ix);
            if x * x + y * y >= r_min * r_min {
                let model = 2.0 * m_star * gamma.eval(x, y, t) / log_t;
                worst = worst.max((v - model).abs());
            }
        }
        worst
    });
    Ok(t * log_t * sup)
}

/// Inner scaled error
/// `t (log t)^2 * sup { |u - 4 M* phi W_t/(log t)^2| / log|x| :
///   x exterior, |x|^2 <= 2 a t }`.
pub fn inner_error(
    u: &Field2D,
    mask: &DomainMask,
    t: f64,
    phi: &Field2D,
    w_t: &Field2D,
    m_star: f64,
    a: f64,
) -> Result<f64> {
    if t <= std::f64::consts::E {
        return Err(Error::Parameter(format!("inner error needs t > e, got {t}")));
    }
    if u.grid() != phi.grid() || u.grid() != w_t.grid() {
        return Err(Error::PlanMismatch("fields on different grids".into()));
    }
    let grid = u.grid();
    let log_t = t.ln();
    let log_t2 = log_t * log_t;
    let band_r2 = 2.0 * a * t;
    let n = grid.n();
    let udata = u.as_slice();
    let pdata = phi.as_slice();
    let wdata = w_t.as_slice();
    let flags = mask.flags();
    let sup = exec::max_rows(n, |iy| {
        let y = grid.coord(iy);
        let mut worst = 0.0f64;
        for ix in 0..n {
            let idx = iy * n + ix;
            if flags[idx] {
                continue;
            }
            let x = grid.coord(ix);
            let r2 = x * x + y * y;
            if r2 > band_r2 {
                continue;
            }
            let model = 4.0 * m_star * pdata[idx] * wdata[idx] / log_t2;
            // exterior cells satisfy |x| > 2, so the log stays above log 2
            let logr = 0.5 * r2.ln();
            worst = worst.max((udata[idx] - model).abs() / logr);
        }
        worst
    });
    Ok(t * log_t2 * sup)
}

/// Ring average of `t log t u` over the 2-cell-thick annulus
/// `||x|^2 - t h_t| <= 2 h sqrt(t h_t)`; trends toward
/// `(1 - alpha) M*/(2 pi q)`.
pub fn intermediate_scale_probe(u: &Field2D, t: f64, h_t: f64, min_r2: f64) -> Result<f64> {
    let grid = u.grid();
    let target_r2 = t * h_t;
    if target_r2 < min_r2 {
        return Err(Error::Parameter(format!(
            "ring |x|^2 = {target_r2} is inside the excluded region ({min_r2})"
        )));
    }
    let half_band = 2.0 * grid.h() * target_r2.sqrt();
    if (target_r2 + half_band).sqrt() > grid.half_width() {
        return Err(Error::Parameter("ring extends outside the box".into()));
    }
    let n = grid.n();
    let data = u.as_slice();
    let sums = exec::row_map(n, |iy| {
        let y = grid.coord(iy);
        let row = &data[iy * n..(iy + 1) * n];
        let mut acc = 0.0;
        for (ix, &v) in row.iter().enumerate() {
            let x = grid.coord(ix);
            if ((x * x + y * y) - target_r2).abs() <= half_band {
                acc += v;
            }
        }
        acc
    });
    let counts = exec::row_map(n, |iy| {
        let y = grid.coord(iy);
        let mut c = 0.0;
        for ix in 0..n {
            let x = grid.coord(ix);
            if ((x * x + y * y) - target_r2).abs() <= half_band {
                c += 1.0;
            }
        }
        c
    });
    let total: f64 = sums.iter().sum();
    let count: f64 = counts.iter().sum();
    if count == 0.0 {
        return Err(Error::Parameter("ring holds no cells".into()));
    }
    Ok(t * t.ln() * total / count)
}

/// Models for the logarithmic rate fits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RateModel {
    /// `value = C / log t`
    OverLog,
    /// `value = C / (t log t)`
    OverTLog,
    /// `value = C + C' / log t`
    ConstPlusOverLog,
}

/// Least squares in the transformed variable; returns coefficients and the
/// relative root-mean-square residual.
pub fn fit_log_rate(times: &[f64], values: &[f64], model: RateModel) -> Result<(Vec<f64>, f64)> {
    if times.len() != values.len() || times.len() < 8 {
        return Err(Error::Parameter(format!(
            "need at least 8 samples, got {}",
            times.len()
        )));
    }
    let (tmin, tmax) = times
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &t| (lo.min(t), hi.max(t)));
    if tmax / tmin < 10.0f64.powf(1.5) {
        return Err(Error::Parameter(format!(
            "samples span {:.2} decades, need 1.5",
            (tmax / tmin).log10()
        )));
    }
    let rms = |v: &[f64]| (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt();
    match model {
        RateModel::OverLog | RateModel::OverTLog => {
            let xs: Vec<f64> = times
                .iter()
                .map(|&t| match model {
                    RateModel::OverLog => 1.0 / t.ln(),
                    _ => 1.0 / (t * t.ln()),
                })
                .collect();
            let sxx: f64 = xs.iter().map(|x| x * x).sum();
            if sxx == 0.0 {
                return Err(Error::Parameter("degenerate design matrix".into()));
            }
            let sxv: f64 = xs.iter().zip(values).map(|(&x, &v)| x * v).sum();
            let c = sxv / sxx;
            let resid: Vec<f64> = xs.iter().zip(values).map(|(&x, &v)| v - c * x).collect();
            Ok((vec![c], rms(&resid) / rms(values).max(1e-300)))
        }
        RateModel::ConstPlusOverLog => {
            let xs: Vec<f64> = times.iter().map(|&t| 1.0 / t.ln()).collect();
            let m = times.len() as f64;
            let sx: f64 = xs.iter().sum();
            let sxx: f64 = xs.iter().map(|x| x * x).sum();
            let sv: f64 = values.iter().sum();
            let sxv: f64 = xs.iter().zip(values).map(|(&x, &v)| x * v).sum();
            let det = m * sxx - sx * sx;
            if det.abs() < 1e-14 * (m * sxx).abs().max(1e-300) {
                return Err(Error::Parameter("degenerate design matrix".into()));
            }
            let c0 = (sv * sxx - sx * sxv) / det;
            let c1 = (m * sxv - sx * sv) / det;
            let resid: Vec<f64> =
                xs.iter().zip(values).map(|(&x, &v)| v - c0 - c1 * x).collect();
            Ok((vec![c0, c1], rms(&resid) / rms(values).max(1e-300)))
        }
    }
}

/// One observation of the diagnostic series; field order matches the CSV
/// column order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagnosticRow {
    pub t: f64,
    pub m: f64,
    pub m_log: f64,
    pub m_phi: f64,
    pub m1: f64,
    pub m2: f64,
    pub sup_u: f64,
    /// outer scaled error at delta = 0.5 (0 when t <= e)
    pub outer_err_d50: f64,
    /// inner scaled error with a = q/2 (0 when t <= e)
    pub inner_err: f64,
    /// intermediate ring probe, h(t) = 1/log t (0 while the ring is invalid)
    pub probe_alpha0: f64,
    /// intermediate ring probe, h(t) = t^{-1/2} (0 while the ring is invalid)
    pub probe_alpha50: f64,
    /// mass fraction in the outermost kernel-width strip
    pub edge_mass: f64,
}

/// Time-ordered diagnostic rows; entries must be finite and times strictly
/// increasing.
#[derive(Clone, Debug, Default)]
pub struct DiagnosticSeries {
    rows: Vec<DiagnosticRow>,
}

impl DiagnosticSeries {
    pub fn new() -> Self {
        Self { rows: Vec::new() }
    }

    pub fn push(&mut self, row: DiagnosticRow) -> Result<()> {
        let finite = [
            row.t, row.m, row.m_log, row.m_phi, row.m1, row.m2, row.sup_u, row.outer_err_d50,
            row.inner_err, row.probe_alpha0, row.probe_alpha50, row.edge_mass,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite(format!("diagnostic row at t = {}", row.t)));
        }
        if let Some(last) = self.rows.last() {
            if row.t <= last.t {
                return Err(Error::Parameter(format!(
                    "diagnostic times must increase: {} after {}",
                    row.t, last.t
                )));
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn rows(&self) -> &[DiagnosticRow] {
        &self.rows
    }

    /// Rows with `t` inside `[t_lo, t_hi]`.
    pub fn window(&self, t_lo: f64, t_hi: f64) -> Vec<DiagnosticRow> {
        self.rows.iter().copied().filter(|r| r.t >= t_lo && r.t <= t_hi).collect()
    }
}

/// Per-time rescaled-mass data: `log t * M(t)` against twice the logarithmic
/// momentum, plus the triangle-inequality bound on `|M_log - M*|`.
#[derive(Clone, Debug)]
pub struct RescaledMassRow {
    pub t: f64,
    pub scaled_mass: f64,
    pub twice_m_log: f64,
    pub gap: f64,
    /// `|M_log - M*|` against `sup|phi - log|x|| * M(t)`
    pub m_log_error: f64,
    pub m_log_bound: f64,
}

#[derive(Clone, Debug)]
pub struct RescaledMassReport {
    pub rows: Vec<RescaledMassRow>,
    /// `|log t M - 2 M_log|` decreasing across the window endpoints
    pub gap_decreasing: bool,
    /// `|M_log - M*|` decreasing across the window endpoints
    pub m_log_error_decreasing: bool,
    /// triangle bound holds at every observation
    pub bound_holds: bool,
}

/// Evaluate the rescaled-mass limit data over a window of observations.
pub fn rescaled_mass_report(
    window: &[DiagnosticRow],
    m_star: f64,
    sup_phi_minus_log: f64,
) -> Result<RescaledMassReport> {
    if window.len() < 2 {
        return Err(Error::Parameter("need at least two observations".into()));
    }
    let mut rows = Vec::with_capacity(window.len());
    let mut bound_holds = true;
    for r in window {
        if r.t <= 1.0 {
            return Err(Error::Parameter("rescaled mass needs t > 1".into()));
        }
        let scaled = r.t.ln() * r.m;
        let err = (r.m_log - m_star).abs();
        let bound = sup_phi_minus_log * r.m + 1e-12 * m_star.abs();
        if err > bound {
            bound_holds = false;
        }
        rows.push(RescaledMassRow {
            t: r.t,
            scaled_mass: scaled,
            twice_m_log: 2.0 * r.m_log,
            gap: (scaled - 2.0 * r.m_log).abs(),
            m_log_error: err,
            m_log_bound: bound,
        });
    }
    let gap_decreasing = rows.last().unwrap().gap < rows.first().unwrap().gap;
    let m_log_error_decreasing =
        rows.last().unwrap().m_log_error < rows.first().unwrap().m_log_error;
    Ok(RescaledMassReport { rows, gap_decreasing, m_log_error_decreasing, bound_holds })
}

/// Per-time momenta growth data: `M2 log t / t` and `M1 log t / sqrt t`.
#[derive(Clone, Debug)]
pub struct MomentaGrowthReport {
    pub t: Vec<f64>,
    pub m2_normalized: Vec<f64>,
    pub m1_normalized: Vec<f64>,
    /// no growth trend: last <= 1.25 x first over the window
    pub m2_bounded: bool,
    pub m1_bounded: bool,
}

pub fn momenta_growth_report(window: &[DiagnosticRow]) -> Result<MomentaGrowthReport> {
    if window.len() < 2 {
        return Err(Error::Parameter("need at least two observations".into()));
    }
    let mut t = Vec::new();
    let mut m2n = Vec::new();
    let mut m1n = Vec::new();
    for r in window {
        if r.t <= 1.0 {
            return Err(Error::Parameter("momenta report needs t > 1".into()));
        }
        t.push(r.t);
        m2n.push(r.m2 * r.t.ln() / r.t);
        m1n.push(r.m1 * r.t.ln() / r.t.sqrt());
    }
    let bounded = |v: &[f64]| v.last().unwrap() <= &(1.25 * v.first().unwrap());
    Ok(MomentaGrowthReport {
        m2_bounded: bounded(&m2n),
        m1_bounded: bounded(&m1n),
        t,
        m2_normalized: m2n,
        m1_normalized: m1n,
    })
}
