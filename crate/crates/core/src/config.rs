//! Run and sweep configuration read from TOML.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Grid;
use crate::model::ModelParams;
use crate::spectral::Domain;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    /// `rectangle2d` or `slab1d`.
    pub kind: String,
    #[serde(rename = "Lx")]
    pub lx: f64,
    #[serde(rename = "Ly", default, skip_serializing_if = "Option::is_none")]
    pub ly: Option<f64>,
}

impl Default for DomainConfig {
    fn default() -> Self {
        Self { kind: "rectangle2d".into(), lx: PI, ly: Some(PI) }
    }
}

impl DomainConfig {
    pub fn domain(&self) -> Result<Domain> {
        match self.kind.as_str() {
            "rectangle2d" | "rectangle" => {
                let ly = self.ly.ok_or_else(|| Error::Config("rectangle domain needs Ly".into()))?;
                Domain::rectangle(self.lx, ly)
            }
            "slab1d" | "slab" => Domain::slab(self.lx),
            other => Err(Error::Config(format!("unknown domain kind {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    #[serde(default)]
    pub ny: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { nx: 64, ny: 64 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(rename = "T")]
    pub t_final: f64,
    pub dt: f64,
    pub output_stride: usize,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self { t_final: 0.5, dt: 0.0025, output_stride: 4 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// `rho = 1`, `u = 0`, `d = (0, 0, 1)`.
    Equilibrium,
    /// Smooth density, vortical plus potential velocity, tilted director.
    Mixed,
    /// `rho = 1 + amplitude eps Phi_{1,0}`, `u = 0`, constant director.
    Acoustic,
    /// Seeded random band-limited data.
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitConfig {
    pub profile: Profile,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

impl Default for InitConfig {
    fn default() -> Self {
        Self { profile: Profile::Mixed, amplitude: 1.0, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub epsilons: Vec<f64>,
    #[serde(default = "default_modes")]
    pub modes: usize,
    /// Run the refinement check at twice the resolution for the smallest epsilon.
    #[serde(default = "yes")]
    pub refinement: bool,
}

fn default_modes() -> usize {
    32
}

fn yes() -> bool {
    true
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { epsilons: vec![0.2, 0.1, 0.05, 0.025], modes: default_modes(), refinement: true }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub domain: DomainConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub params: ModelParams,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub init: InitConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.domain.domain()?, self.grid.nx, self.grid.ny)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.grid()?;
        let t = &self.time;
        if !(t.t_final > 0.0 && t.t_final.is_finite()) {
            return Err(Error::Config(format!("T must be positive, got {}", t.t_final)));
        }
        if !(t.dt > 0.0 && t.dt <= t.t_final) {
            return Err(Error::Config(format!("dt must lie in (0, T], got {}", t.dt)));
        }
        if t.output_stride == 0 {
            return Err(Error::Config("output_stride must be at least 1".into()));
        }
        if !self.init.amplitude.is_finite() {
            return Err(Error::Config("init amplitude must be finite".into()));
        }
        if let Some(s) = &self.sweep {
            if s.epsilons.is_empty() {
                return Err(Error::Config("sweep needs at least one epsilon".into()));
            }
            if let Some(e) = s.epsilons.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
                return Err(Error::Config(format!("sweep epsilon {e} outside (0, 1)")));
            }
            if s.epsilons.windows(2).any(|w| !(w[1] < w[0])) {
                return Err(Error::Config("sweep epsilons must be strictly decreasing".into()));
            }
            if s.modes == 0 {
                return Err(Error::Config("sweep needs at least one mode".into()));
            }
        }
        Ok(())
    }

    /// Copy with a different Mach parameter.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        let mut c = self.clone();
        c.params.epsilon = epsilon;
        c.validate()?;
        Ok(c)
    }

    pub fn steps(&self) -> usize {
        (self.time.t_final / self.time.dt).round().max(1.0) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
[domain]
kind = "rectangle2d"
Lx = 3.141592653589793
Ly = 3.141592653589793

[grid]
nx = 32
ny = 32

[params]
gamma = 2.0
epsilon = 0.1
mu = 1.0
lambda = 0.5
theta = 1.0
sigma0 = 0.2

[time]
T = 0.1
dt = 0.005
output_stride = 2

[init]
profile = "mixed"
amplitude = 0.5
seed = 7

[output]
dir = "runs/a"
"#;

    #[test]
    fn parses_and_round_trips() {
        let c = RunConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(c.grid.nx, 32);
        assert_eq!(c.init.profile, Profile::Mixed);
        assert_eq!(c.steps(), 20);
        let back = RunConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RunConfig::from_toml(&SAMPLE.replace("gamma = 2.0", "gamma = 1.2")).is_err());
        assert!(RunConfig::from_toml(&SAMPLE.replace("nx = 32", "nx = 2")).is_err());
        assert!(RunConfig::from_toml(&SAMPLE.replace("rectangle2d", "torus")).is_err());
        assert!(RunConfig::from_toml(&SAMPLE.replace("dt = 0.005", "dt = 0.0")).is_err());
        assert!(RunConfig::from_toml(&SAMPLE.replace("seed = 7", "seed = 7\ncolour = 1")).is_err());
        let sweep = format!("{SAMPLE}\n[sweep]\nepsilons = [0.1, 0.2]\n");
        assert!(RunConfig::from_toml(&sweep).is_err());
    }

    #[test]
    fn defaults_are_valid() {
        let c = RunConfig::from_toml("").unwrap();
        assert_eq!(c.grid.nx, 64);
        assert_eq!(c.steps(), 200);
        let s = RunConfig { sweep: Some(SweepSection::default()), ..Default::default() };
        s.validate().unwrap();
    }
}
