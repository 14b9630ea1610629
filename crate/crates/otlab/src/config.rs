//! Flat JSON experiment configuration.
//!
//! Every field except `experiment` is optional in the input. [`ExperimentConfig::resolved`]
//! fills the defaults of the named experiment, so the manifest always holds
//! the complete parameter set, and rejects fields the experiment does not use.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Identity,
    Dumbbell,
    Notch,
    SmoothedNotch,
    OpennessSweep,
    PltSquare,
    CornerObstruction,
    Barrier,
    RegularityFit,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::Identity,
        Experiment::Dumbbell,
        Experiment::Notch,
        Experiment::SmoothedNotch,
        Experiment::OpennessSweep,
        Experiment::PltSquare,
        Experiment::CornerObstruction,
        Experiment::Barrier,
        Experiment::RegularityFit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Identity => "identity",
            Experiment::Dumbbell => "dumbbell",
            Experiment::Notch => "notch",
            Experiment::SmoothedNotch => "smoothed-notch",
            Experiment::OpennessSweep => "openness-sweep",
            Experiment::PltSquare => "plt-square",
            Experiment::CornerObstruction => "corner-obstruction",
            Experiment::Barrier => "barrier",
            Experiment::RegularityFit => "regularity-fit",
        }
    }

    /// Parameters the experiment reads, besides `seed` and `output_dir`.
    fn parameters(self) -> &'static [Param] {
        use Param::*;
        match self {
            Experiment::Identity => &[Sites, Tol, Samples],
            Experiment::Dumbbell => &[Eps, Sites, Tol],
            Experiment::Notch => &[Eps, Sites, Tol, Delta],
            Experiment::SmoothedNotch => &[Eps, Alpha, SmoothingRadius, Sites, Tol, Delta, Samples],
            Experiment::OpennessSweep => &[Eps, Sites, Tol, Delta, Perturbation],
            Experiment::PltSquare => &[A, Grid, Tol],
            Experiment::CornerObstruction => &[A, Grids, Tol],
            Experiment::Barrier => &[Eps, Samples],
            Experiment::RegularityFit => &[Alpha, Grid],
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Param {
    Eps,
    Alpha,
    SmoothingRadius,
    Sites,
    Grid,
    Grids,
    A,
    Tol,
    Delta,
    Samples,
    Perturbation,
    Seed,
}

impl Param {
    const ALL: [Param; 12] = [
        Param::Eps,
        Param::Alpha,
        Param::SmoothingRadius,
        Param::Sites,
        Param::Grid,
        Param::Grids,
        Param::A,
        Param::Tol,
        Param::Delta,
        Param::Samples,
        Param::Perturbation,
        Param::Seed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Param::Eps => "eps",
            Param::Alpha => "alpha",
            Param::SmoothingRadius => "smoothing_radius",
            Param::Sites => "sites",
            Param::Grid => "grid",
            Param::Grids => "grids",
            Param::A => "a",
            Param::Tol => "tol",
            Param::Delta => "delta",
            Param::Samples => "samples",
            Param::Perturbation => "perturbation",
            Param::Seed => "seed",
        }
    }

    pub fn parse(s: &str) -> Result<Param, CliError> {
        Param::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| CliError::param(format!("unknown parameter `{s}`")))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<Experiment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothing_radius: Option<f64>,
    /// Requested number of target sites `N`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sites: Option<usize>,
    /// Nodes per side `n` of the PLT grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grids: Option<Vec<usize>>,
    /// Source density `1 + a x1 x2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    /// Probe offset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Relative size of the density perturbation in the openness sweep.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

pub const DEFAULT_SEED: u64 = 7;

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::param(format!("`{name}` must be positive and finite, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        ExperimentConfig {
            experiment: Some(experiment),
            ..Default::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::param(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    pub fn experiment(&self) -> Result<Experiment, CliError> {
        self.experiment.ok_or_else(|| CliError::param("config has no `experiment`"))
    }

    fn is_set(&self, p: Param) -> bool {
        match p {
            Param::Eps => self.eps.is_some(),
            Param::Alpha => self.alpha.is_some(),
            Param::SmoothingRadius => self.smoothing_radius.is_some(),
            Param::Sites => self.sites.is_some(),
            Param::Grid => self.grid.is_some(),
            Param::Grids => self.grids.is_some(),
            Param::A => self.a.is_some(),
            Param::Tol => self.tol.is_some(),
            Param::Delta => self.delta.is_some(),
            Param::Samples => self.samples.is_some(),
            Param::Perturbation => self.perturbation.is_some(),
            Param::Seed => self.seed.is_some(),
        }
    }

    /// Sets one numeric parameter, as used by sweeps.
    pub fn set(&mut self, p: Param, value: f64) -> Result<(), CliError> {
        let count = |v: f64| -> Result<usize, CliError> {
            if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as usize)
            } else {
                Err(CliError::param(format!("`{}` needs a non-negative integer, got {v}", p.name())))
            }
        };
        match p {
            Param::Eps => self.eps = Some(value),
            Param::Alpha => self.alpha = Some(value),
            Param::SmoothingRadius => self.smoothing_radius = Some(value),
            Param::Sites => self.sites = Some(count(value)?),
            Param::Grid => self.grid = Some(count(value)?),
            Param::Grids => return Err(CliError::param("`grids` is a list and cannot be swept")),
            Param::A => self.a = Some(value),
            Param::Tol => self.tol = Some(value),
            Param::Delta => self.delta = Some(value),
            Param::Samples => self.samples = Some(count(value)?),
            Param::Perturbation => self.perturbation = Some(value),
            Param::Seed => self.seed = Some(count(value)? as u64),
        }
        Ok(())
    }

    /// Copy with every default of the experiment filled in and the
    /// parameters range-checked.
    pub fn resolved(&self) -> Result<Self, CliError> {
        let e = self.experiment()?;
        let used = e.parameters();
        if let Some(p) = Param::ALL.into_iter().find(|&p| p != Param::Seed && self.is_set(p) && !used.contains(&p)) {
            return Err(CliError::param(format!("parameter `{}` is not used by experiment `{e}`", p.name())));
        }
        let mut c = self.clone();
        c.seed.get_or_insert(DEFAULT_SEED);
        c.output_dir.get_or_insert_with(|| PathBuf::from("otlab-out").join(e.name()));
        let sdot_tol = 1e-6;
        let plt_tol = 1e-10;
        match e {
            Experiment::Identity => {
                c.sites.get_or_insert(2500);
                c.tol.get_or_insert(sdot_tol);
                c.samples.get_or_insert(10_000);
            }
            Experiment::Dumbbell => {
                c.eps.get_or_insert(0.05);
                c.sites.get_or_insert(2000);
                c.tol.get_or_insert(sdot_tol);
            }
            Experiment::Notch => {
                c.eps.get_or_insert(0.2);
                c.sites.get_or_insert(5000);
                c.tol.get_or_insert(sdot_tol);
                c.delta.get_or_insert(0.02);
            }
            Experiment::SmoothedNotch => {
                let eps = *c.eps.get_or_insert(0.01);
                c.alpha.get_or_insert(0.5);
                c.smoothing_radius.get_or_insert(0.4 * eps);
                c.sites.get_or_insert(5000);
                c.tol.get_or_insert(sdot_tol);
                c.delta.get_or_insert(0.02);
                c.samples.get_or_insert(2000);
            }
            Experiment::OpennessSweep => {
                c.eps.get_or_insert(0.2);
                c.sites.get_or_insert(5000);
                c.tol.get_or_insert(sdot_tol);
                c.delta.get_or_insert(0.02);
                c.perturbation.get_or_insert(0.02);
            }
            Experiment::PltSquare => {
                c.a.get_or_insert(1.0);
                c.grid.get_or_insert(129);
                c.tol.get_or_insert(plt_tol);
            }
            Experiment::CornerObstruction => {
                c.a.get_or_insert(1.0);
                c.grids.get_or_insert_with(|| vec![65, 129, 257]);
                c.tol.get_or_insert(plt_tol);
            }
            Experiment::Barrier => {
                c.eps.get_or_insert(0.2);
                c.samples.get_or_insert(100);
            }
            Experiment::RegularityFit => {
                c.alpha.get_or_insert(0.5);
                c.grid.get_or_insert(257);
            }
        }
        for (name, v) in [("eps", c.eps), ("tol", c.tol), ("delta", c.delta), ("smoothing_radius", c.smoothing_radius)] {
            if let Some(v) = v {
                positive(name, v)?;
            }
        }
        if let Some(a) = c.alpha {
            if !(a > 0.0 && a < 1.0) {
                return Err(CliError::param(format!("`alpha` must lie in (0, 1), got {a}")));
            }
        }
        if let Some(p) = c.perturbation {
            if !(p > 0.0 && p < 0.5) {
                return Err(CliError::param(format!("`perturbation` must lie in (0, 0.5), got {p}")));
            }
        }
        if let Some(a) = c.a {
            // 1 + a x1 x2 must stay positive on the unit square.
            if !(a > -1.0 && a.is_finite()) {
                return Err(CliError::param(format!("`a` must exceed -1, got {a}")));
            }
        }
        if c.sites == Some(0) || c.samples == Some(0) {
            return Err(CliError::param("`sites` and `samples` must be positive"));
        }
        if matches!(&c.grids, Some(g) if g.is_empty()) {
            return Err(CliError::param("`grids` must not be empty"));
        }
        Ok(c)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("otlab-out"))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for e in Experiment::ALL {
            let json = format!("{{\"experiment\": \"{}\"}}", e.name());
            assert_eq!(ExperimentConfig::from_json(&json).unwrap().experiment, Some(e));
        }
    }

    #[test]
    fn defaults_are_materialized() {
        let c = ExperimentConfig::from_json(r#"{"experiment": "notch"}"#).unwrap().resolved().unwrap();
        assert_eq!((c.eps, c.sites, c.delta, c.seed), (Some(0.2), Some(5000), Some(0.02), Some(7)));
        let text = c.to_json();
        assert!(text.contains("\"output_dir\""));
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), c);
        assert_eq!(c.resolved().unwrap(), c);
    }

    #[test]
    fn rejects_bad_input() {
        for bad in [
            r#"{"experiment": "nothing"}"#,
            r#"{"experiment": "notch", "colour": 1}"#,
            r#"{"experiment": "notch", "grid": 65}"#,
            r#"{"experiment": "notch", "eps": -1}"#,
            r#"{"experiment": "smoothed-notch", "alpha": 1.5}"#,
            r#"{"eps": 0.1}"#,
        ] {
            let r = ExperimentConfig::from_json(bad).and_then(|c| c.resolved());
            assert!(matches!(r, Err(CliError::Parameter(_))), "{bad}");
        }
    }

    #[test]
    fn sweep_setter() {
        let mut c = ExperimentConfig::new(Experiment::Dumbbell);
        c.set(Param::parse("eps").unwrap(), 0.1).unwrap();
        c.set(Param::Sites, 100.0).unwrap();
        assert_eq!((c.eps, c.sites), (Some(0.1), Some(100)));
        assert!(c.set(Param::Sites, 2.5).is_err());
        assert!(Param::parse("zeta").is_err());
    }
}
