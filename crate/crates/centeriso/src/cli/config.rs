//! Run configuration: the JSON schema, tolerance profiles, flag overrides
//! and resolution into compiled systems and potentials.
//!
//! Precedence, highest first: command-line flags, values in the config
//! file, built-in defaults.  The global `seed` determines every per-check
//! seed, so a run is reproducible from the resolved config alone.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::equilibrium::{ConditionalOptions, EntropyOptions, GibbsOptions, SamplerOptions};
use crate::error::{Error, Result};
use crate::leaf::{LeafOptions, Quadrature, SeedDensity, SpanningOptions};
use crate::potentials::liouville::LiouvilleFile;
use crate::potentials::{liouville_frequencies, LiouvilleData, PotentialKind, PotentialSpec};
use crate::torus::{Guards, LeafKind, SystemConfig, SystemSpec, TorusPoint, TrigPolynomial};

/// Named tolerance sets.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ToleranceProfile {
    /// Tolerances halved.
    Strict,
    #[default]
    Default,
    /// Tolerances doubled and Monte Carlo budgets divided by ten.
    Fast,
}

impl ToleranceProfile {
    fn factor(self) -> f64 {
        match self {
            ToleranceProfile::Strict => 0.5,
            ToleranceProfile::Default => 1.0,
            ToleranceProfile::Fast => 2.0,
        }
    }
}

/// Pass/fail thresholds of the checks (values for the default profile).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Largest difference between two pressure estimators.
    pub pressure_agreement: f64,
    /// Leaf-growth pressure against `expected_pressure`.
    pub leaf_growth_accuracy: f64,
    pub quasi_invariance: f64,
    pub holonomy: f64,
    /// `|m(f⁻¹U)/m(U) − 1|`.
    pub invariance: f64,
    /// `|P − P′|`.
    pub pressure_gap: f64,
    /// `|κ̂|` of the Gibbs ratio ladder.
    pub gibbs_rate: f64,
    /// `|h + ∫φ − P|` relative to `max(|P|, h)`.
    pub entropy_relative: f64,
    pub conditional: f64,
    /// `|C_n|` at the last lag.
    pub correlation: f64,
    pub histogram: f64,
    pub livsic: f64,
    pub cocycle: f64,
    /// Spread of the final pressure-trace increments of a leaf measure.
    pub trace_spread: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            pressure_agreement: 0.1,
            leaf_growth_accuracy: 1e-2,
            quasi_invariance: 1e-2,
            holonomy: 1e-2,
            invariance: 3e-2,
            pressure_gap: 1e-2,
            gibbs_rate: 0.05,
            entropy_relative: 0.05,
            conditional: 0.05,
            correlation: 0.05,
            histogram: 0.02,
            livsic: 1e-8,
            cocycle: 1e-10,
            trace_spread: 1e-2,
        }
    }
}

impl Tolerances {
    fn scaled(&self, f: f64) -> Self {
        Self {
            pressure_agreement: self.pressure_agreement * f,
            leaf_growth_accuracy: self.leaf_growth_accuracy * f,
            quasi_invariance: self.quasi_invariance * f,
            holonomy: self.holonomy * f,
            invariance: self.invariance * f,
            pressure_gap: self.pressure_gap * f,
            gibbs_rate: self.gibbs_rate * f,
            entropy_relative: self.entropy_relative * f,
            conditional: self.conditional * f,
            correlation: self.correlation * f,
            histogram: self.histogram * f,
            livsic: self.livsic * f,
            cocycle: self.cocycle * f,
            trace_spread: self.trace_spread * f,
        }
    }
}

/// Leaf-measure parameters (also used for the leaf-growth pressure).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LeafSection {
    pub half_width: f64,
    pub depth: usize,
    pub n_atoms: usize,
    pub kind: LeafKind,
    pub quadrature: Quadrature,
    pub cesaro: bool,
    pub seed_density: SeedDensity,
}

impl Default for LeafSection {
    fn default() -> Self {
        let o = LeafOptions::default();
        Self {
            half_width: 0.1,
            depth: 30,
            n_atoms: 4000,
            kind: o.kind,
            quadrature: o.quadrature,
            cesaro: o.cesaro,
            seed_density: o.seed,
        }
    }
}

impl LeafSection {
    pub fn options(&self) -> LeafOptions {
        LeafOptions {
            kind: self.kind,
            quadrature: self.quadrature,
            cesaro: self.cesaro,
            seed: self.seed_density.clone(),
            ..LeafOptions::default()
        }
    }
}

/// Parameters of the quasi-invariance and holonomy checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifySection {
    /// Window half width on `W^u(fx)`.
    pub quasi_invariance_half_width: f64,
    /// Depth ladder; the residual must decrease along it and end below tolerance.
    pub quasi_invariance_depths: Vec<usize>,
    pub quasi_invariance_atoms: usize,
    pub holonomy_distance: f64,
    pub holonomy_half_width: f64,
    pub holonomy_depth: usize,
    pub holonomy_atoms: usize,
    pub invariance_sets: usize,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            quasi_invariance_half_width: 0.1,
            quasi_invariance_depths: vec![10, 15, 20, 25],
            quasi_invariance_atoms: 20_000,
            holonomy_distance: 0.05,
            holonomy_half_width: 0.1,
            holonomy_depth: 25,
            holonomy_atoms: 4000,
            invariance_sets: 20,
        }
    }
}

/// Correlation observables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorrelationSection {
    /// Observable `g` on `T^{2+c}`; `None` means `cos 2πx₁`.
    pub g: Option<TrigPolynomial>,
    /// Observable `h`; `None` means `g`.
    pub h: Option<TrigPolynomial>,
    pub n_max: usize,
    pub samples: usize,
}

impl Default for CorrelationSection {
    fn default() -> Self {
        Self {
            g: None,
            h: None,
            n_max: 20,
            samples: 1_000_000,
        }
    }
}

/// Sampling and histogram parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleSection {
    /// Points written by the `sample` command.
    pub count: usize,
    /// Samples of the Lebesgue histogram check.
    pub histogram_samples: usize,
    pub histogram_bins: usize,
    /// Whether the equilibrium state is expected to be Lebesgue (enables
    /// the histogram check).
    pub lebesgue_oracle: bool,
}

impl Default for SampleSection {
    fn default() -> Self {
        Self {
            count: 10_000,
            histogram_samples: 1_000_000,
            histogram_bins: 20,
            lebesgue_oracle: false,
        }
    }
}

/// Periodic-orbit sums.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LivsicSection {
    pub max_period: u32,
    /// Constant the potential is tested against (default: its Lebesgue mean).
    pub candidate: Option<f64>,
}

impl Default for LivsicSection {
    fn default() -> Self {
        Self {
            max_period: 8,
            candidate: None,
        }
    }
}

/// The coboundary-series diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AppendixSection {
    pub cocycle_points: usize,
    pub max_period: u32,
}

impl Default for AppendixSection {
    fn default() -> Self {
        Self {
            cocycle_points: 10_000,
            max_period: 8,
        }
    }
}

/// The full configuration file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub name: String,
    pub system: SystemConfig,
    #[serde(default = "PotentialKind::zero")]
    pub potential: PotentialKind,
    #[serde(default)]
    pub guards: Guards,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub tolerance_profile: ToleranceProfile,
    /// Thresholds before profile scaling.
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output_dir: Option<String>,
    /// Base point of the leaf and Gibbs computations (default: a fixed generic point).
    #[serde(default)]
    pub anchor: Option<Vec<f64>>,
    /// Known pressure, checked against the leaf-growth estimate.
    #[serde(default)]
    pub expected_pressure: Option<f64>,
    /// Added to the computed pressure before the checks that use it; nonzero
    /// only in deliberately broken configurations.
    #[serde(default)]
    pub pressure_offset: f64,
    #[serde(default)]
    pub leaf: LeafSection,
    /// Covering-number pressure; `None` picks defaults per center dimension.
    #[serde(default)]
    pub spanning: Option<SpanningOptions>,
    #[serde(default)]
    pub sampler: SamplerOptions,
    #[serde(default)]
    pub gibbs: GibbsOptions,
    #[serde(default)]
    pub entropy: EntropyOptions,
    #[serde(default)]
    pub conditional: ConditionalOptions,
    #[serde(default)]
    pub correlation: CorrelationSection,
    #[serde(default)]
    pub sample: SampleSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub livsic: LivsicSection,
    #[serde(default)]
    pub appendix: AppendixSection,
}

/// Command-line values that override the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub tolerance_profile: Option<ToleranceProfile>,
    pub output_dir: Option<PathBuf>,
}

/// A configuration with everything compiled and the profile applied.
#[derive(Clone, Debug)]
pub struct Resolved {
    /// The configuration as it was run (overrides and derived seeds applied).
    pub config: RunConfig,
    pub system: SystemSpec,
    pub potential: PotentialSpec,
    pub anchor: TorusPoint,
    /// Tolerances after profile scaling.
    pub tolerances: Tolerances,
    pub output_dir: PathBuf,
    /// SHA-256 of the canonical JSON of the resolved configuration.
    pub input_hash: String,
}

const DEFAULT_ANCHOR: [f64; 4] = [0.31, 0.47, 0.2, 0.6];

impl RunConfig {
    /// Reads a configuration file.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::InvalidInput(format!("cannot read config '{}': {e}", path.display()))
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("config: {e}")))
    }

    /// Applies overrides and the profile, loads frequency files (relative to
    /// `base_dir`), and compiles the system and potential.
    pub fn resolve(mut self, overrides: &Overrides, base_dir: Option<&Path>) -> Result<Resolved> {
        if let Some(s) = overrides.seed {
            self.seed = s;
        }
        if let Some(t) = overrides.threads {
            self.threads = Some(t);
        }
        if let Some(p) = overrides.tolerance_profile {
            self.tolerance_profile = p;
        }
        if let Some(o) = &overrides.output_dir {
            self.output_dir = Some(o.display().to_string());
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidInput("threads must be at least 1".into()));
        }
        self.load_frequency_data(base_dir)?;
        self.derive_seeds();
        if self.tolerance_profile == ToleranceProfile::Fast {
            self.gibbs.samples /= 10;
            self.entropy.samples_per_ball /= 10;
            self.entropy.integral_samples /= 10;
            self.conditional.samples /= 10;
            self.correlation.samples /= 10;
            self.sample.histogram_samples /= 10;
        }
        let system = SystemSpec::with_guards(self.system.clone(), self.guards.clone())?;
        let potential = PotentialSpec::new(self.potential.clone(), &system)?;
        let c = system.center_dim();
        let anchor = match &self.anchor {
            Some(a) => {
                if a.len() != system.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: system.dim(),
                        found: a.len(),
                    });
                }
                TorusPoint::new(a)?
            }
            None => TorusPoint::new(&DEFAULT_ANCHOR[..2 + c])?,
        };
        self.validate()?;
        let tolerances = self.tolerances.scaled(self.tolerance_profile.factor());
        let output_dir = PathBuf::from(self.output_dir.clone().unwrap_or_else(|| {
            let name = if self.name.is_empty() {
                "run"
            } else {
                &self.name
            };
            format!("out/{name}")
        }));
        let input_hash = content_hash(&self)?;
        Ok(Resolved {
            config: self,
            system,
            potential,
            anchor,
            tolerances,
            output_dir,
            input_hash,
        })
    }

    fn load_frequency_data(&mut self, base_dir: Option<&Path>) -> Result<()> {
        let PotentialKind::AppendixD {
            n_trunc,
            liouville,
            liouville_file,
            ..
        } = &mut self.potential
        else {
            return Ok(());
        };
        if liouville.is_none() {
            let data = match liouville_file.take() {
                Some(f) => {
                    let path = base_dir.map_or_else(|| PathBuf::from(&f), |d| d.join(&f));
                    let text = std::fs::read_to_string(&path).map_err(|e| {
                        Error::InvalidInput(format!(
                            "cannot read frequency file '{}': {e}",
                            path.display()
                        ))
                    })?;
                    let file: LiouvilleFile = serde_json::from_str(&text)
                        .map_err(|e| Error::InvalidInput(format!("frequency file: {e}")))?;
                    LiouvilleData::from_file(&file)?
                }
                None => liouville_frequencies(*n_trunc)?,
            };
            *liouville = Some(data);
        }
        // Frequencies of the system default to the frequency data.
        if self.system.frequencies.is_empty() {
            let alpha = liouville.as_ref().expect("loaded above").alpha_f64();
            self.system.frequencies = alpha.to_vec();
            self.system.center_dim = 2;
        }
        Ok(())
    }

    fn derive_seeds(&mut self) {
        let s = self.seed;
        self.sampler.seed = s;
        self.gibbs.seed = s.wrapping_add(1);
        self.entropy.seed = s.wrapping_add(2);
        self.conditional.seed = s.wrapping_add(3);
    }

    fn validate(&self) -> Result<()> {
        let l = &self.leaf;
        if !(l.half_width > 0.0 && l.half_width < 0.5) {
            return Err(Error::InvalidInput(format!(
                "leaf.half_width = {} must lie in (0, 0.5)",
                l.half_width
            )));
        }
        if l.depth == 0 || l.n_atoms < 2 {
            return Err(Error::InvalidInput(
                "leaf.depth must be ≥ 1 and leaf.n_atoms ≥ 2".into(),
            ));
        }
        if self.verify.quasi_invariance_depths.is_empty() {
            return Err(Error::InvalidInput(
                "verify.quasi_invariance_depths must not be empty".into(),
            ));
        }
        if self.correlation.samples < 2 || self.sample.histogram_bins < 2 {
            return Err(Error::InvalidInput(
                "correlation.samples must be ≥ 2 and sample.histogram_bins ≥ 2".into(),
            ));
        }
        Ok(())
    }
}

/// SHA-256 (hex) of the canonical JSON serialization of a configuration.
pub fn content_hash(config: &RunConfig) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    let mut h = Sha256::new();
    h.update(format!("config {}\0", bytes.len()).as_bytes());
    h.update(&bytes);
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

impl Resolved {
    /// Spanning options: from the file, else per center dimension.
    pub fn spanning(&self) -> SpanningOptions {
        self.config
            .spanning
            .clone()
            .unwrap_or_else(|| SpanningOptions::for_center_dim(self.system.center_dim()))
    }

    /// Correlation observables with defaults filled in.
    pub fn observables(&self) -> (TrigPolynomial, TrigPolynomial) {
        let d = self.system.dim();
        let mut mode = vec![0; d];
        mode[0] = 1;
        let g = self
            .config
            .correlation
            .g
            .clone()
            .unwrap_or_else(|| TrigPolynomial::cosine(mode, 1.0));
        let h = self
            .config
            .correlation
            .h
            .clone()
            .unwrap_or_else(|| g.clone());
        (g, h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"system": {"base": [[2, 1], [1, 1]]}}"#;

    #[test]
    fn defaults_and_overrides() {
        let c = RunConfig::from_json(MINIMAL).unwrap();
        let r = c.clone().resolve(&Overrides::default(), None).unwrap();
        assert_eq!(r.anchor.dim(), 2);
        assert_eq!(r.tolerances, Tolerances::default());
        let o = Overrides {
            seed: Some(9),
            tolerance_profile: Some(ToleranceProfile::Strict),
            ..Overrides::default()
        };
        let r2 = c.resolve(&o, None).unwrap();
        assert_eq!(r2.config.gibbs.seed, 10);
        assert!((r2.tolerances.gibbs_rate - 0.025).abs() < 1e-15);
        assert_ne!(r.input_hash, r2.input_hash);
    }

    #[test]
    fn hash_is_stable_and_errors_are_actionable() {
        let a = RunConfig::from_json(MINIMAL)
            .unwrap()
            .resolve(&Overrides::default(), None)
            .unwrap();
        let b = RunConfig::from_json(MINIMAL)
            .unwrap()
            .resolve(&Overrides::default(), None)
            .unwrap();
        assert_eq!(a.input_hash, b.input_hash);
        assert_eq!(a.input_hash.len(), 64);
        let e = RunConfig::from_json(r#"{"system": {"base": [[1, 0], [0, 1]]}}"#)
            .unwrap()
            .resolve(&Overrides::default(), None);
        assert!(
            matches!(e, Err(Error::InvalidInput(m)) if m.contains("hyperbolic") || m.contains("determinant"))
        );
        assert!(
            RunConfig::from_json(r#"{"system": {"base": [[2, 1], [1, 1]]}, "bogus": 1}"#).is_err()
        );
        let e = RunConfig::from_json(r#"{"system": {"base": [[2, 1], [1, 1]]}, "anchor": [0.1]}"#)
            .unwrap()
            .resolve(&Overrides::default(), None);
        assert!(matches!(e, Err(Error::DimensionMismatch { .. })));
    }
}
