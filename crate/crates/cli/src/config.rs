//! Run configuration: one TOML file, every section optional, unknown keys rejected.

use std::fmt;
use std::path::Path;

use recomb_core::diagnostics::{InitialProfile, LimitStudyConfig};
use recomb_core::phase_space::{Model, PhaseGrid, ProfileKind};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Simulate,
    LinearDecay,
    CoercivityCheck,
    LimitStudy,
    ProfileCheck,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::LinearDecay => "linear-decay",
            Experiment::CoercivityCheck => "coercivity-check",
            Experiment::LimitStudy => "limit-study",
            Experiment::ProfileCheck => "profile-check",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub dim: usize,
    pub nx: usize,
    pub nv: usize,
    pub vmax: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            dim: 1,
            nx: 32,
            nv: 32,
            vmax: 8.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfilesConfig {
    pub chi1: ProfileKind,
    pub chi2: ProfileKind,
}

impl Default for ProfilesConfig {
    fn default() -> Self {
        Self {
            chi1: ProfileKind::Gaussian { sigma: 1.0 },
            chi2: ProfileKind::Gaussian { sigma: 1.3 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Perturbation {
    /// amplitude·cos(2π·mode·x)·(χ₁, −χ₂)
    Cosine,
    /// Band-limited random field with zero mass difference, drawn from the seed.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicsConfig {
    /// Equilibrium level; nonlinear runs start from the local equilibrium
    /// with density rho_inf + amplitude·cos(2π·mode·x).
    pub rho_inf: f64,
    pub amplitude: f64,
    pub mode: usize,
    pub eps: f64,
    /// Assert the maximum-principle bracket during nonlinear runs.
    pub envelope: bool,
    pub gamma1: f64,
    pub gamma2: f64,
    pub perturbation: Perturbation,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self {
            rho_inf: 1.0,
            amplitude: 0.05,
            mode: 1,
            eps: 1.0,
            envelope: false,
            gamma1: 0.1,
            gamma2: 0.1,
            perturbation: Perturbation::Cosine,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsConfig {
    /// Defaults to 0.4·eps·dx/vmax.
    pub dt: Option<f64>,
    pub t_final: f64,
    /// δ of the modified entropy.
    pub delta: f64,
    /// δ of the H¹-type functional.
    pub delta_h1: f64,
    pub record_every: usize,
    /// Trailing fraction of the records used for rate fits.
    pub fit_window: f64,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self {
            dt: None,
            t_final: 10.0,
            delta: 0.1,
            delta_h1: 0.1,
            record_every: 10,
            fit_window: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LimitConfig {
    pub eps_list: Vec<f64>,
    pub t_final: f64,
    pub records: usize,
    pub dt_coefficient: f64,
    pub macro_refine: usize,
    pub macro_dt: f64,
    /// Start from the local equilibrium; false adds an initial reaction layer.
    pub well_prepared: bool,
    /// Amplitude of the initial density perturbation.
    pub amplitude: f64,
}

impl Default for LimitConfig {
    fn default() -> Self {
        let d = LimitStudyConfig::default();
        Self {
            eps_list: d.eps_list,
            t_final: d.t_final,
            records: d.records,
            dt_coefficient: d.dt_coefficient,
            macro_refine: d.macro_refine,
            macro_dt: d.macro_dt,
            well_prepared: d.initial.well_prepared,
            amplitude: d.initial.amplitude,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoercivityConfig {
    pub n_samples: usize,
    pub tolerance: f64,
    pub scan_time: f64,
    pub dense_spectrum: bool,
}

impl Default for CoercivityConfig {
    fn default() -> Self {
        Self {
            n_samples: 100,
            tolerance: 1e-8,
            scan_time: 2.0,
            dense_spectrum: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: String,
    pub formats: Vec<Format>,
    pub seed: u64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: "out".into(),
            formats: vec![Format::Csv, Format::Json],
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub experiment: Option<Experiment>,
    pub grid: GridConfig,
    pub profiles: ProfilesConfig,
    pub physics: PhysicsConfig,
    pub numerics: NumericsConfig,
    pub limit: LimitConfig,
    pub coercivity: CoercivityConfig,
    pub output: OutputConfig,
}

/// Aggregated configuration problems, one message per offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<String>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, e) in self.0.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "error: {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigErrors> {
        toml::from_str(text).map_err(|e| ConfigErrors(vec![format!("schema: {}", e.message().trim())]))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigErrors> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigErrors(vec![format!("cannot read {}: {e}", path.display())]))?;
        Self::from_toml(&text)
    }

    /// Checks every field and materializes defaults that depend on other
    /// fields. `experiment` selects the run when the file does not name one.
    pub fn resolve(mut self, experiment: Option<Experiment>, seed: Option<u64>) -> Result<Self, ConfigErrors> {
        let mut errors = Vec::new();
        match (self.experiment, experiment) {
            (Some(a), Some(b)) if a != b => errors.push(format!(
                "experiment: the file names `{a}` but the command runs `{b}`"
            )),
            (None, Some(b)) => self.experiment = Some(b),
            _ => {}
        }
        if let Some(seed) = seed {
            self.output.seed = seed;
        }

        let g = &self.grid;
        if g.dim != 1 {
            errors.push(format!("grid.dim: only dim = 1 is implemented (got {})", g.dim));
        }
        if g.nx % 2 != 0 {
            errors.push(format!("grid.nx: nx must be even (got {})", g.nx));
        }
        if g.nx < 4 {
            errors.push(format!("grid.nx: nx must be at least 4 (got {})", g.nx));
        }
        if g.nv < 4 {
            errors.push(format!("grid.nv: nv must be at least 4 (got {})", g.nv));
        }
        if !(g.vmax.is_finite() && g.vmax > 0.0) {
            errors.push(format!("grid.vmax: must be positive (got {})", g.vmax));
        }
        let grid_ok = errors.iter().all(|e| !e.starts_with("grid."));
        if grid_ok {
            match PhaseGrid::new(g.nx, g.nv, g.vmax) {
                Ok(grid) => {
                    if let Err(e) = Model::new(grid, &self.profiles.chi1, &self.profiles.chi2) {
                        errors.push(format!("profiles: {e}"));
                    }
                }
                Err(e) => errors.push(format!("grid: {e}")),
            }
        }

        let p = &self.physics;
        if !(p.rho_inf.is_finite() && p.rho_inf > 0.0) {
            errors.push(format!("physics.rho_inf: must be positive (got {})", p.rho_inf));
        }
        if !(p.eps > 0.0 && p.eps <= 1.0) {
            errors.push(format!("physics.eps: must lie in (0, 1] (got {})", p.eps));
        }
        // the linearized flow is scale free, so only the nonlinear runs need a positive density
        let linear = self.experiment == Some(Experiment::LinearDecay);
        if !p.amplitude.is_finite() || (!linear && p.amplitude.abs() >= p.rho_inf) {
            errors.push(format!(
                "physics.amplitude: |amplitude| must be below rho_inf so the initial density stays positive (got {})",
                p.amplitude
            ));
        }
        if p.mode == 0 || 2 * p.mode >= g.nx.max(1) {
            errors.push(format!("physics.mode: must lie in 1..nx/2 (got {})", p.mode));
        }
        if !(p.gamma1 > 0.0 && p.gamma2 > 0.0) {
            errors.push("physics.gamma1/gamma2: envelope widths must be positive".into());
        }
        if p.gamma1 >= p.rho_inf {
            errors.push(format!(
                "physics.gamma1: the maximum-principle envelope requires 0 < gamma1 < rho_inf (got gamma1 = {}, rho_inf = {})",
                p.gamma1, p.rho_inf
            ));
        }
        if p.envelope && (p.amplitude.abs() > p.gamma1 || p.amplitude.abs() > p.gamma2) {
            errors.push(format!(
                "physics.amplitude: initial data leave the envelope (|amplitude| = {} exceeds gamma1 or gamma2)",
                p.amplitude.abs()
            ));
        }

        let n = &self.numerics;
        if let Some(dt) = n.dt {
            if !(dt.is_finite() && dt > 0.0) {
                errors.push(format!("numerics.dt: must be positive (got {dt})"));
            }
        }
        if !(n.t_final.is_finite() && n.t_final > 0.0) {
            errors.push(format!("numerics.t_final: must be positive (got {})", n.t_final));
        }
        if !(0.0..1.0).contains(&n.delta) {
            errors.push(format!("numerics.delta: must lie in [0, 1) (got {})", n.delta));
        }
        if !(0.0..2.0).contains(&n.delta_h1) {
            errors.push(format!(
                "numerics.delta_h1: the H1 form is positive only for 0 <= delta_h1 < 2 (got {})",
                n.delta_h1
            ));
        }
        if n.record_every == 0 {
            errors.push("numerics.record_every: must be at least 1".into());
        }
        if !(n.fit_window > 0.0 && n.fit_window <= 1.0) {
            errors.push(format!("numerics.fit_window: must lie in (0, 1] (got {})", n.fit_window));
        }

        if let Err(e) = self.limit_study_config().validate() {
            errors.push(format!("limit: {e}"));
        }
        if self.coercivity.n_samples < 2 {
            errors.push("coercivity.n_samples: must be at least 2".into());
        }
        if !(self.coercivity.tolerance >= 0.0) {
            errors.push("coercivity.tolerance: must be nonnegative".into());
        }
        if !(self.coercivity.scan_time > 0.0) {
            errors.push("coercivity.scan_time: must be positive".into());
        }
        if self.output.formats.is_empty() {
            errors.push("output.formats: at least one of \"csv\", \"json\" is required".into());
        }

        if !errors.is_empty() {
            return Err(ConfigErrors(errors));
        }
        if self.numerics.dt.is_none() {
            self.numerics.dt = Some(0.4 * self.physics.eps * (1.0 / self.grid.nx as f64) / self.grid.vmax);
        }
        Ok(self)
    }

    pub fn experiment(&self) -> Experiment {
        self.experiment.expect("resolved config names its experiment")
    }

    pub fn dt(&self) -> f64 {
        self.numerics.dt.expect("resolved config has dt")
    }

    pub fn model(&self) -> Model {
        let grid = PhaseGrid::new(self.grid.nx, self.grid.nv, self.grid.vmax).expect("validated grid");
        Model::new(grid, &self.profiles.chi1, &self.profiles.chi2).expect("validated profiles")
    }

    pub fn limit_study_config(&self) -> LimitStudyConfig {
        let l = &self.limit;
        LimitStudyConfig {
            eps_list: l.eps_list.clone(),
            t_final: l.t_final,
            records: l.records,
            dt_coefficient: l.dt_coefficient,
            macro_refine: l.macro_refine,
            macro_dt: l.macro_dt,
            initial: InitialProfile {
                rho_inf: self.physics.rho_inf,
                amplitude: l.amplitude,
                mode: self.physics.mode,
                well_prepared: l.well_prepared,
            },
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
