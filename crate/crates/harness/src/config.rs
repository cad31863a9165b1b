//! Experiment configuration: TOML with strict key checking (misspelled keys
//! are rejected, never silently defaulted) and defaults matching the
//! reference configuration documented in the README.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use nldiff_core::domain::Disk;
use nldiff_core::evolution::{InitialData, Scheme};
use nldiff_core::{
    build_domain, build_kernel, ConvolutionPlan, DiscreteKernel, DomainMask, Field2D, Grid2D,
    HoleShape, KernelSpec, Padding,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config serialize error: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("config constraint violated: {0}")]
    Constraint(String),
    #[error(transparent)]
    Core(#[from] nldiff_core::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelConfig {
    pub support_radius: f64,
    pub exponent: u32,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self { support_radius: 1.0, exponent: 3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum HoleConfig {
    Disk { center: [f64; 2], radius: f64 },
    DiskUnion { disks: Vec<DiskConfig> },
    Rect { min: [f64; 2], max: [f64; 2] },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiskConfig {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Default for HoleConfig {
    fn default() -> Self {
        HoleConfig::Disk { center: [0.0, 0.0], radius: 2.5 }
    }
}

impl HoleConfig {
    pub fn to_shape(&self) -> HoleShape {
        match self {
            HoleConfig::Disk { center, radius } => {
                HoleShape::Disk(Disk { center: *center, radius: *radius })
            }
            HoleConfig::DiskUnion { disks } => HoleShape::DiskUnion(
                disks.iter().map(|d| Disk { center: d.center, radius: d.radius }).collect(),
            ),
            HoleConfig::Rect { min, max } => HoleShape::Rect { min: *min, max: *max },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub cells: usize,
    pub half_width: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { cells: 1024, half_width: 64.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum InitialConfig {
    Gaussian { center: [f64; 2], sigma: f64, amplitude: f64 },
    Annular { radius: f64, width: f64, amplitude: f64 },
    CosineBump { center: [f64; 2], radius: f64, amplitude: f64 },
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig::Gaussian { center: [8.0, 0.0], sigma: 2.0, amplitude: 1.0 }
    }
}

impl InitialConfig {
    pub fn to_initial_data(&self) -> InitialData {
        match *self {
            InitialConfig::Gaussian { center, sigma, amplitude } => {
                InitialData::Gaussian { center, sigma, amplitude }
            }
            InitialConfig::Annular { radius, width, amplitude } => {
                InitialData::Annular { radius, width, amplitude }
            }
            InitialConfig::CosineBump { center, radius, amplitude } => {
                InitialData::CosineBump { center, radius, amplitude }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    Exponential,
    ForwardEuler,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchemeConfig {
    pub kind: SchemeKind,
    pub dt: f64,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self { kind: SchemeKind::Exponential, dt: 0.05 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub t_end: f64,
    /// first observation time; subsequent ones grow geometrically
    pub observe_t0: f64,
    pub observe_ratio: f64,
    pub checkpoint_times: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        // ratio 2^{1/4} lands observations exactly on t = 160 and t = 640
        Self {
            t_end: 640.0,
            observe_t0: 0.625,
            observe_ratio: std::f64::consts::SQRT_2.sqrt(),
            checkpoint_times: Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StationarySolverKind {
    /// frame-pinned Jacobi ladder; monotone, used for ordering assertions
    Monotone,
    /// conjugate gradients on the largest rung; same fixed point, fast
    Cg,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StationaryConfigSection {
    pub tol: f64,
    pub solver: StationarySolverKind,
    /// rung radii as fractions of the half width
    pub ladder_fractions: Vec<f64>,
    pub max_iters: usize,
    /// inner radius of the super-solution plateau region (must be < d/4)
    pub r0: f64,
}

impl Default for StationaryConfigSection {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            solver: StationarySolverKind::Cg,
            ladder_fractions: vec![0.25, 0.5, 0.75],
            max_iters: 2_000_000,
            r0: 0.125,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceConfig {
    /// cap on the relative drift of the conserved pairing int u phi
    pub mphi_drift_cap: f64,
    /// abort threshold for the edge-strip mass fraction
    pub edge_mass_cap: f64,
    /// delta of the outer scaled error
    pub outer_delta: f64,
    /// the inner band uses a = fraction * q
    pub inner_a_fraction: f64,
    /// [t_lo, t_hi] window for trend assertions
    pub trend_window: [f64; 2],
    /// cells probed by the pointwise inner corollary (snapped to centers)
    pub probe_points: Vec<[f64; 2]>,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            mphi_drift_cap: 1e-3,
            edge_mass_cap: 1e-6,
            outer_delta: 0.5,
            inner_a_fraction: 0.5,
            trend_window: [64.0, 640.0],
            probe_points: vec![[4.0, 0.0], [0.0, -4.5]],
        }
    }
}

/// Full experiment description; the zero-config default is the reference
/// configuration.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub kernel: KernelConfig,
    pub hole: HoleConfig,
    pub grid: GridConfig,
    pub initial: InitialConfig,
    pub scheme: SchemeConfig,
    pub run: RunConfig,
    pub stationary: StationaryConfigSection,
    pub tolerances: ToleranceConfig,
}

/// Parse and validate; rejects unknown keys with line information and any
/// constraint violation the core modules detect.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let cfg: ExperimentConfig = toml::from_str(text)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn serialize_config(cfg: &ExperimentConfig) -> Result<String, ConfigError> {
    Ok(toml::to_string_pretty(cfg)?)
}

/// Domain objects built from a validated config.
pub struct BuiltExperiment {
    pub grid: Grid2D,
    pub kernel: DiscreteKernel,
    pub mask: DomainMask,
    pub u0: Field2D,
    pub scheme: Scheme,
    pub plan_zero: ConvolutionPlan,
    pub plan_wrap: ConvolutionPlan,
    pub ladder: Vec<f64>,
    pub observation_times: Vec<f64>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.hole.to_shape().validate()?;
        if !(self.scheme.dt > 0.0) {
            return Err(ConfigError::Constraint(format!(
                "dt must be positive, got {}",
                self.scheme.dt
            )));
        }
        if self.scheme.kind == SchemeKind::ForwardEuler && self.scheme.dt > 1.0 {
            return Err(ConfigError::Constraint(
                "forward Euler needs dt <= 1 for positivity".into(),
            ));
        }
        if !(self.run.observe_ratio > 1.0) {
            return Err(ConfigError::Constraint("observe_ratio must exceed 1".into()));
        }
        if !(self.run.t_end >= 0.0) {
            return Err(ConfigError::Constraint("t_end must be nonnegative".into()));
        }
        if self.stationary.ladder_fractions.is_empty()
            || self
                .stationary
                .ladder_fractions
                .windows(2)
                .any(|w| w[1] <= w[0])
            || self.stationary.ladder_fractions.iter().any(|&f| !(0.0 < f && f < 1.0))
        {
            return Err(ConfigError::Constraint(
                "ladder_fractions must be increasing and inside (0, 1)".into(),
            ));
        }
        if !(self.tolerances.inner_a_fraction > 0.0 && self.tolerances.inner_a_fraction < 1.0) {
            return Err(ConfigError::Constraint("inner_a_fraction must lie in (0, 1)".into()));
        }
        let grid = Grid2D::new(self.grid.cells, self.grid.half_width)?;
        KernelSpec::new(self.kernel.support_radius, self.kernel.exponent, grid.h())?;
        self.initial.to_initial_data().validate()?;
        Ok(())
    }

    /// Observation schedule: `t0 * ratio^k` snapped to the step lattice,
    /// deduplicated, capped at `t_end`, with `t = 0` always included.
    pub fn observation_times(&self) -> Vec<f64> {
        let dt = self.scheme.dt;
        let mut steps = vec![0u64];
        let total = (self.run.t_end / dt).round() as u64;
        let mut t = self.run.observe_t0;
        while t <= self.run.t_end * (1.0 + 1e-12) {
            let s = ((t / dt).round() as u64).min(total);
            if s > *steps.last().unwrap() {
                steps.push(s);
            }
            t *= self.run.observe_ratio;
        }
        steps.into_iter().map(|s| s as f64 * dt).collect()
    }

    pub fn build(&self) -> Result<BuiltExperiment, ConfigError> {
        self.validate()?;
        let grid = Grid2D::new(self.grid.cells, self.grid.half_width)?;
        let kernel = build_kernel(&KernelSpec::new(
            self.kernel.support_radius,
            self.kernel.exponent,
            grid.h(),
        )?)?;
        let mask = build_domain(&grid, &self.hole.to_shape())?;
        let u0 = self.initial.to_initial_data().sample(grid, Some(&mask))?;
        let plan_zero = ConvolutionPlan::new(&grid, &kernel, Padding::Zero)?;
        let plan_wrap = ConvolutionPlan::new(&grid, &kernel, Padding::Wrap)?;
        let ladder: Vec<f64> = self
            .stationary
            .ladder_fractions
            .iter()
            .map(|f| f * grid.half_width())
            .collect();
        let scheme = match self.scheme.kind {
            SchemeKind::Exponential => Scheme::Exponential,
            SchemeKind::ForwardEuler => Scheme::ForwardEuler,
        };
        Ok(BuiltExperiment {
            grid,
            kernel,
            mask,
            u0,
            scheme,
            plan_zero,
            plan_wrap,
            ladder,
            observation_times: self.observation_times(),
        })
    }

    /// Stable identity of everything the stationary profile depends on.
    pub fn stationary_cache_key(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        let descr = format!(
            "{:?}|{:?}|{:?}|{:?}",
            self.kernel, self.hole, self.grid, self.stationary
        );
        hasher.update(descr.as_bytes());
        let digest = hasher.finalize();
        digest.iter().take(12).map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_documented_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.grid.cells, 1024);
        assert_eq!(cfg.scheme.dt, 0.05);
        assert_eq!(cfg.run.t_end, 640.0);
        assert_eq!(cfg.tolerances.mphi_drift_cap, 1e-3);
    }

    #[test]
    fn round_trip_is_lossless() {
        let mut cfg = ExperimentConfig::default();
        cfg.grid.cells = 256;
        cfg.grid.half_width = 16.0;
        cfg.run.observe_ratio = 1.25;
        let text = serialize_config(&cfg).unwrap();
        let back = parse_config(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn unknown_key_rejected_with_line_info() {
        let err = parse_config("[grid]\ncells = 256\nhalf_width = 16.0\nuknown_cells = 3\n")
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("uknown_cells"), "message: {msg}");
        assert!(msg.contains("line"), "message should carry line info: {msg}");
    }

    #[test]
    fn undersized_hole_rejected_with_inclusion_message() {
        let err = parse_config("[hole]\nkind = \"disk\"\ncenter = [0.0, 0.0]\nradius = 1.5\n")
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("radius 2"), "message: {msg}");
    }

    #[test]
    fn observation_times_hit_window_endpoints() {
        let cfg = ExperimentConfig::default();
        let times = cfg.observation_times();
        assert_eq!(times[0], 0.0);
        assert!(times.iter().any(|&t| (t - 160.0).abs() < 1e-9));
        assert!((times.last().unwrap() - 640.0).abs() < 1e-9);
        for w in times.windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn cache_key_tracks_stationary_inputs_only() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.run.t_end = 320.0;
        assert_eq!(a.stationary_cache_key(), b.stationary_cache_key());
        b.stationary.tol = 1e-9;
        assert_ne!(a.stationary_cache_key(), b.stationary_cache_key());
    }
}
