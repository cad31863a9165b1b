//! Time stepping for `u_t = J*u - u` outside the hole, `u = 0` inside.
//!
//! Default scheme is the exponential one,
//!
//!   u <- e^{-dt} u + (1 - e^{-dt}) J*u,
//!
//! a convex combination of nonnegative fields, hence positivity preserving
//! for any `dt > 0` and exact for the relaxation part. Forward Euler
//! (`u <- u + dt (J*u - u)`) is kept as the textbook alternative and needs
//! `dt <= 1` for positivity. The Dirichlet hole is enforced by post-step
//! masking. On the torus without a hole the exact-in-time propagator
//! multiplies each discrete mode by `e^{(J^(k) - 1) t}` and serves as the
//! oracle for the scheme.

use crate::conv::{ConvolutionPlan, Padding};
use crate::domain::DomainMask;
use crate::error::{Error, Result};
use crate::exec;
use crate::grid::{Field2D, Grid2D};
use crate::kernel::DiscreteKernel;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    Exponential,
    ForwardEuler,
}

/// Closed-form nonnegative initial data; sampling masks the hole so the
/// Dirichlet condition holds at t = 0.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialData {
    /// `amplitude * exp(-|x - center|^2 / (2 sigma^2))`
    Gaussian { center: [f64; 2], sigma: f64, amplitude: f64 },
    /// `amplitude * exp(-(|x| - radius)^2 / (2 width^2))`
    Annular { radius: f64, width: f64, amplitude: f64 },
    /// `amplitude * cos^2(pi |x - center| / (2 radius))` on `|x - center| < radius`
    CosineBump { center: [f64; 2], radius: f64, amplitude: f64 },
}

impl InitialData {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            InitialData::Gaussian { sigma, amplitude, .. } => *sigma > 0.0 && *amplitude >= 0.0,
            InitialData::Annular { radius, width, amplitude } => {
                *radius > 0.0 && *width > 0.0 && *amplitude >= 0.0
            }
            InitialData::CosineBump { radius, amplitude, .. } => *radius > 0.0 && *amplitude >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Parameter(format!("invalid initial data {self:?}")))
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match *self {
            InitialData::Gaussian { center, sigma, amplitude } => {
                let dx = x - center[0];
                let dy = y - center[1];
                amplitude * (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp()
            }
            InitialData::Annular { radius, width, amplitude } => {
                let r = (x * x + y * y).sqrt();
                amplitude * (-(r - radius) * (r - radius) / (2.0 * width * width)).exp()
            }
            InitialData::CosineBump { center, radius, amplitude } => {
                let dx = x - center[0];
                let dy = y - center[1];
                let r = (dx * dx + dy * dy).sqrt();
                if r < radius {
                    let c = (std::f64::consts::PI * r / (2.0 * radius)).cos();
                    amplitude * c * c
                } else {
                    0.0
                }
            }
        }
    }

    /// Sample at cell centers; zero on hole cells when a mask is given.
    pub fn sample(&self, grid: Grid2D, mask: Option<&DomainMask>) -> Result<Field2D> {
        self.validate()?;
        let mut u = Field2D::from_fn(grid, |x, y| self.eval(x, y));
        if let Some(mask) = mask {
            mask.apply(&mut u);
        }
        Ok(u)
    }
}

/// Field, current time, step count, and the initial sup bound the solution
/// must stay under.
#[derive(Clone, Debug)]
pub struct SimulationState {
    pub u: Field2D,
    pub t: f64,
    pub steps: u64,
    pub sup_u0: f64,
}

impl SimulationState {
    pub fn new(u0: Field2D) -> Result<Self> {
        if u0.has_non_finite() {
            return Err(Error::NonFinite("initial data".into()));
        }
        if u0.min() < 0.0 {
            return Err(Error::Parameter("initial data must be nonnegative".into()));
        }
        let sup_u0 = u0.sup_norm();
        Ok(Self { u: u0, t: 0.0, steps: 0, sup_u0 })
    }
}

/// Immutable per-run context: kernel, plan, optional hole, scheme, step size.
pub struct EvolutionContext<'a> {
    pub kernel: &'a DiscreteKernel,
    pub plan: &'a ConvolutionPlan,
    pub mask: Option<&'a DomainMask>,
    pub scheme: Scheme,
    pub dt: f64,
}

impl<'a> EvolutionContext<'a> {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Parameter(format!("dt must be positive, got {}", self.dt)));
        }
        if self.scheme == Scheme::ForwardEuler && self.dt > 1.0 {
            return Err(Error::Parameter(format!(
                "forward Euler loses positivity for dt > 1, got {}",
                self.dt
            )));
        }
        Ok(())
    }
}

/// One time step; re-establishes nonnegativity (clamping rounding dust) and
/// the hole condition.
pub fn step(state: &mut SimulationState, ctx: &EvolutionContext) -> Result<()> {
    ctx.validate()?;
    let ju = crate::conv::convolve(&state.u, ctx.kernel, ctx.plan)?;
    let (a, b) = match ctx.scheme {
        Scheme::Exponential => {
            let e = (-ctx.dt).exp();
            (e, 1.0 - e)
        }
        Scheme::ForwardEuler => (1.0 - ctx.dt, ctx.dt),
    };
    let n = state.u.grid().n();
    let jdata = ju.as_slice();
    exec::for_each_row_mut(state.u.as_mut_slice(), n, |iy, row| {
        let jrow = &jdata[iy * n..(iy + 1) * n];
        for (v, &jv) in row.iter_mut().zip(jrow) {
            let next = a * *v + b * jv;
            // clamp negative rounding dust; NaN must pass through to the
            // non-finite sentinel rather than be swallowed by max()
            *v = if next < 0.0 { 0.0 } else { next };
        }
    });
    if let Some(mask) = ctx.mask {
        mask.apply(&mut state.u);
    }
    state.steps += 1;
    state.t += ctx.dt;
    Ok(())
}

fn check_invariants(state: &SimulationState, ctx: &EvolutionContext) -> Result<()> {
    if state.u.has_non_finite() {
        return Err(Error::NonFinite(format!(
            "field at t = {} (step {})",
            state.t, state.steps
        )));
    }
    if state.u.min() < 0.0 {
        return Err(Error::Parameter(format!("negative value at t = {}", state.t)));
    }
    let sup = state.u.sup_norm();
    if sup > state.sup_u0 * (1.0 + 1e-12) {
        return Err(Error::Parameter(format!(
            "sup bound violated: {sup} > {} at t = {}",
            state.sup_u0, state.t
        )));
    }
    if let Some(mask) = ctx.mask {
        let n = state.u.grid().n();
        for iy in 0..n {
            for ix in 0..n {
                if mask.is_hole(ix, iy) && state.u.at(ix, iy) != 0.0 {
                    return Err(Error::Parameter(format!(
                        "hole cell ({ix}, {iy}) nonzero at t = {}",
                        state.t
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Step to `t_end`, invoking `observer` at each observation time (snapped to
/// the step lattice). State invariants are re-checked at every observation;
/// non-finite values abort.
pub fn run<F>(
    state: &mut SimulationState,
    ctx: &EvolutionContext,
    t_end: f64,
    observation_times: &[f64],
    mut observer: F,
) -> Result<()>
where
    F: FnMut(&SimulationState) -> Result<()>,
{
    ctx.validate()?;
    if t_end < state.t - 1e-12 {
        return Err(Error::Parameter(format!("t_end {t_end} earlier than state time {}", state.t)));
    }
    for w in observation_times.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Parameter("observation times must be strictly increasing".into()));
        }
    }
    if let Some(&last) = observation_times.last() {
        if last > t_end + 0.5 * ctx.dt {
            return Err(Error::Parameter(format!(
                "observation time {last} exceeds t_end {t_end}"
            )));
        }
    }
    let t0 = state.t;
    let total = (((t_end - t0) / ctx.dt).round()).max(0.0) as u64;
    let obs_steps: Vec<u64> = observation_times
        .iter()
        .map(|&t| (((t - t0) / ctx.dt).round().max(0.0) as u64).min(total))
        .collect();
    let mut next_obs = 0usize;
    while next_obs < obs_steps.len() && obs_steps[next_obs] == 0 {
        check_invariants(state, ctx)?;
        observer(state)?;
        next_obs += 1;
    }
    for s in 1..=total {
        step(state, ctx)?;
        let mut observed = false;
        while next_obs < obs_steps.len() && obs_steps[next_obs] == s {
            if !observed {
                check_invariants(state, ctx)?;
                observed = true;
            }
            observer(state)?;
            next_obs += 1;
        }
    }
    Ok(())
}

/// Exact-in-time solution of the whole-space problem on the torus: every
/// discrete mode is multiplied by `e^{(J^(k)-1) t}`. Oracle for [`run`]
/// without a mask under wrap padding.
pub fn whole_space_exact(u0: &Field2D, plan: &ConvolutionPlan, t: f64) -> Result<Field2D> {
    if t < 0.0 {
        return Err(Error::Parameter(format!("time must be nonnegative, got {t}")));
    }
    if plan.padding() != Padding::Wrap {
        return Err(Error::PlanMismatch("whole_space_exact needs a wrap-policy plan".into()));
    }
    plan.spectral_map(u0, |j| ((j - 1.0) * t).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{build_kernel, KernelSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(n: usize, hw: f64, padding: Padding) -> (Grid2D, DiscreteKernel, ConvolutionPlan) {
        let grid = Grid2D::new(n, hw).unwrap();
        let kernel = build_kernel(&KernelSpec::new(1.0, 3, grid.h()).unwrap()).unwrap();
        let plan = ConvolutionPlan::new(&grid, &kernel, padding).unwrap();
        (grid, kernel, plan)
    }

    #[test]
    fn zero_field_stays_zero() {
        let (grid, kernel, plan) = setup(64, 4.0, Padding::Zero);
        let mut state = SimulationState::new(Field2D::zeros(grid)).unwrap();
        let ctx = EvolutionContext { kernel: &kernel, plan: &plan, mask: None, scheme: Scheme::Exponential, dt: 0.1 };
        step(&mut state, &ctx).unwrap();
        assert_eq!(state.u.sup_norm(), 0.0);
    }

    #[test]
    fn positivity_preserved_exactly() {
        let (grid, kernel, plan) = setup(64, 4.0, Padding::Zero);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut u0 = Field2D::zeros(grid);
        for v in u0.as_mut_slice() {
            *v = rng.gen_range(0.0..1.0);
        }
        let mut state = SimulationState::new(u0).unwrap();
        let ctx = EvolutionContext { kernel: &kernel, plan: &plan, mask: None, scheme: Scheme::Exponential, dt: 0.5 };
        for _ in 0..5 {
            step(&mut state, &ctx).unwrap();
        }
        assert!(state.u.min() >= 0.0);
        assert!(state.u.sup_norm() <= state.sup_u0 * (1.0 + 1e-12));
    }

    #[test]
    fn torus_mass_conserved_per_step() {
        let (grid, kernel, plan) = setup(128, 8.0, Padding::Wrap);
        let u0 = InitialData::Gaussian { center: [1.0, -0.5], sigma: 1.0, amplitude: 1.0 }
            .sample(grid, None)
            .unwrap();
        let m0 = u0.sum() * grid.cell_area();
        let mut state = SimulationState::new(u0).unwrap();
        let ctx = EvolutionContext { kernel: &kernel, plan: &plan, mask: None, scheme: Scheme::Exponential, dt: 0.25 };
        step(&mut state, &ctx).unwrap();
        let m1 = state.u.sum() * grid.cell_area();
        assert!((m1 - m0).abs() <= 1e-12 * m0, "mass drift {}", (m1 - m0) / m0);
    }

    #[test]
    fn run_to_zero_returns_initial_state() {
        let (grid, kernel, plan) = setup(64, 4.0, Padding::Zero);
        let u0 = InitialData::CosineBump { center: [0.0, 0.0], radius: 2.0, amplitude: 1.0 }
            .sample(grid, None)
            .unwrap();
        let copy = u0.clone();
        let mut state = SimulationState::new(u0).unwrap();
        let ctx = EvolutionContext { kernel: &kernel, plan: &plan, mask: None, scheme: Scheme::Exponential, dt: 0.1 };
        let mut called = 0;
        run(&mut state, &ctx, 0.0, &[0.0], |s| {
            called += 1;
            assert_eq!(s.t, 0.0);
            Ok(())
        })
        .unwrap();
        assert_eq!(called, 1);
        assert_eq!(state.u, copy);
        assert_eq!(state.steps, 0);
    }

    #[test]
    fn mass_nonincreasing_with_hole() {
        let grid = Grid2D::new(256, 16.0).unwrap();
        let kernel = build_kernel(&KernelSpec::new(1.0, 3, grid.h()).unwrap()).unwrap();
        let plan = ConvolutionPlan::new(&grid, &kernel, Padding::Zero).unwrap();
        let hole = crate::domain::HoleShape::disk([0.0, 0.0], 2.5);
        let mask = crate::domain::build_domain(&grid, &hole).unwrap();
        let u0 = InitialData::Gaussian { center: [5.0, 0.0], sigma: 1.0, amplitude: 1.0 }
            .sample(grid, Some(&mask))
            .unwrap();
        let mut state = SimulationState::new(u0).unwrap();
        let ctx = EvolutionContext { kernel: &kernel, plan: &plan, mask: Some(&mask), scheme: Scheme::Exponential, dt: 0.1 };
        let mut masses = Vec::new();
        run(&mut state, &ctx, 20.0, &[0.0, 2.0, 5.0, 10.0, 20.0], |s| {
            masses.push(s.u.sum() * grid.cell_area());
            Ok(())
        })
        .unwrap();
        for w in masses.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "masses {masses:?}");
        }
        // support has met the hole neighborhood by t = 20, so mass strictly drops
        assert!(*masses.last().unwrap() < masses[0] * 0.999);
    }

    #[test]
    fn ordered_data_stay_ordered() {
        let (grid, kernel, plan) = setup(64, 4.0, Padding::Zero);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ctx = EvolutionContext { kernel: &kernel, plan: &plan, mask: None, scheme: Scheme::Exponential, dt: 0.2 };
        for _case in 0..20 {
            let mut lo = Field2D::zeros(grid);
            let mut hi = Field2D::zeros(grid);
            for i in 0..lo.as_slice().len() {
                let a = rng.gen_range(0.0..1.0);
                let b = a + rng.gen_range(0.0..1.0);
                lo.as_mut_slice()[i] = a;
                hi.as_mut_slice()[i] = b;
            }
            let mut slo = SimulationState::new(lo).unwrap();
            let mut shi = SimulationState::new(hi).unwrap();
            for _ in 0..3 {
                step(&mut slo, &ctx).unwrap();
                step(&mut shi, &ctx).unwrap();
            }
            let tol = 1e-12 * shi.sup_u0;
            for (a, b) in slo.u.as_slice().iter().zip(shi.u.as_slice()) {
                assert!(a <= &(b + tol));
            }
        }
    }

    #[test]
    fn exact_propagator_identity_and_mass() {
        let (grid, _kernel, plan) = setup(128, 8.0, Padding::Wrap);
        let u0 = InitialData::Gaussian { center: [0.0, 0.0], sigma: 1.5, amplitude: 1.0 }
            .sample(grid, None)
            .unwrap();
        let at0 = whole_space_exact(&u0, &plan, 0.0).unwrap();
        assert!(at0.sup_distance(&u0) <= 1e-12);
        let at3 = whole_space_exact(&u0, &plan, 3.0).unwrap();
        assert!((at3.sum() - u0.sum()).abs() <= 1e-11 * u0.sum());
        assert!(whole_space_exact(&u0, &plan, -1.0).is_err());
    }

    #[test]
    fn exponential_scheme_is_first_order_against_exact() {
        let (grid, kernel, plan) = setup(128, 8.0, Padding::Wrap);
        let u0 = InitialData::Gaussian { center: [0.0, 0.0], sigma: 2.0, amplitude: 1.0 }
            .sample(grid, None)
            .unwrap();
        let exact = whole_space_exact(&u0, &plan, 1.0).unwrap();
        let mut errs = Vec::new();
        for dt in [0.02, 0.01] {
            let mut state = SimulationState::new(u0.clone()).unwrap();
            let ctx = EvolutionContext { kernel: &kernel, plan: &plan, mask: None, scheme: Scheme::Exponential, dt };
            run(&mut state, &ctx, 1.0, &[], |_| Ok(())).unwrap();
            errs.push(state.u.sup_distance(&exact));
        }
        let ratio = errs[0] / errs[1];
        assert!((1.7..=2.3).contains(&ratio), "ratio {ratio}, errs {errs:?}");
    }

    #[test]
    fn forward_euler_large_dt_rejected_and_small_dt_positive() {
        let (grid, kernel, plan) = setup(64, 4.0, Padding::Zero);
        let u0 = InitialData::CosineBump { center: [0.0, 0.0], radius: 1.5, amplitude: 1.0 }
            .sample(grid, None)
            .unwrap();
        let mut state = SimulationState::new(u0).unwrap();
        let bad = EvolutionContext { kernel: &kernel, plan: &plan, mask: None, scheme: Scheme::ForwardEuler, dt: 1.5 };
        assert!(step(&mut state, &bad).is_err());
        let good = EvolutionContext { kernel: &kernel, plan: &plan, mask: None, scheme: Scheme::ForwardEuler, dt: 0.5 };
        step(&mut state, &good).unwrap();
        assert!(state.u.min() >= 0.0);
    }

    #[test]
    fn non_finite_field_aborts_run() {
        let (grid, kernel, plan) = setup(64, 4.0, Padding::Zero);
        let mut u0 = Field2D::zeros(grid);
        u0.set(10, 10, 1.0);
        let mut state = SimulationState::new(u0).unwrap();
        state.u.set(5, 5, f64::NAN);
        let ctx = EvolutionContext { kernel: &kernel, plan: &plan, mask: None, scheme: Scheme::Exponential, dt: 0.1 };
        let res = run(&mut state, &ctx, 1.0, &[1.0], |_| Ok(()));
        assert!(matches!(res, Err(Error::NonFinite(_))));
    }
}
