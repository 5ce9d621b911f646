//! Experiment configuration: a TOML file with global keys and one section
//! for the selected experiment kind. Every field has a default, so an empty
//! file (or no file) runs the default experiment; unknown keys are errors.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Cantor,
    Regularity,
    Porosity,
    ConformalCheck,
    CartanCheck,
    Localization,
    Damping,
    FupScan,
    Constants,
    DistortScan,
}

impl Kind {
    pub fn name(&self) -> &'static str {
        match self {
            Kind::Cantor => "cantor",
            Kind::Regularity => "regularity",
            Kind::Porosity => "porosity",
            Kind::ConformalCheck => "conformal-check",
            Kind::CartanCheck => "cartan-check",
            Kind::Localization => "localization",
            Kind::Damping => "damping",
            Kind::FupScan => "fup-scan",
            Kind::Constants => "constants",
            Kind::DistortScan => "distort-scan",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Precision {
    #[default]
    Double,
    Extended,
}

/// Mid-third Cantor set in one dimension by default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SetParams {
    pub base: u32,
    pub alphabet: Vec<u32>,
    pub depth: u32,
    pub dimension: usize,
    pub extent: [f64; 2],
}

impl Default for SetParams {
    fn default() -> Self {
        Self {
            base: 3,
            alphabet: vec![0, 2],
            depth: 4,
            dimension: 1,
            extent: [0.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CantorParams {
    pub set: SetParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegularityParams {
    pub set: SetParams,
    /// Defaults to log|alphabet| / log base.
    pub delta: Option<f64>,
    /// Defaults to the set resolution.
    pub alpha0: Option<f64>,
    pub alpha1: f64,
    pub c_r: f64,
}

impl Default for RegularityParams {
    fn default() -> Self {
        Self {
            set: SetParams {
                depth: 6,
                ..SetParams::default()
            },
            delta: None,
            alpha0: None,
            alpha1: 1.0,
            c_r: 8.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PorosityParams {
    pub set: SetParams,
    pub scale: usize,
    /// Defaults to every admissible depth.
    pub depths: Option<Vec<u32>>,
}

impl Default for PorosityParams {
    fn default() -> Self {
        Self {
            set: SetParams {
                depth: 6,
                ..SetParams::default()
            },
            scale: 3,
            depths: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConformalParams {
    pub qs: Vec<f64>,
    /// Relative deviation allowed is `tolerance_factor · q`.
    pub tolerance_factor: f64,
}

impl Default for ConformalParams {
    fn default() -> Self {
        Self {
            qs: vec![0.3, 0.2, 0.1],
            tolerance_factor: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CartanParams {
    pub configurations: u64,
    pub hs: Vec<f64>,
    pub min_masses: usize,
    pub max_masses: usize,
    pub probe_grid: usize,
}

impl Default for CartanParams {
    fn default() -> Self {
        Self {
            configurations: 50,
            hs: vec![0.1, 0.01],
            min_masses: 5,
            max_masses: 24,
            probe_grid: 96,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalizationParams {
    pub samples: u64,
    pub qs: Vec<f64>,
    pub lambda: f64,
    pub band: f64,
    pub half_width: usize,
    pub points_per_unit: usize,
    pub placement_seed: u64,
    /// Also run on the 2× refined grid and compare envelopes.
    pub refine_check: bool,
    pub refine_tolerance: f64,
}

impl Default for LocalizationParams {
    fn default() -> Self {
        Self {
            samples: 20,
            qs: vec![0.1, 0.05, 0.025],
            lambda: 0.25,
            band: 1.0,
            half_width: 32,
            points_per_unit: 8,
            placement_seed: 0,
            refine_check: true,
            refine_tolerance: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DampingCliParams {
    /// The frequency set Y.
    pub set: SetParams,
    pub c1: f64,
    pub iota: f64,
    /// Regularity exponent of Y; defaults to log|alphabet| / log base.
    pub delta1: Option<f64>,
    /// Regularity constant of Y; measured on the set when absent.
    pub c_r: Option<f64>,
    pub leakage_tol: f64,
    /// Points per unit frequency in the emitted |ψ̂| profile.
    pub plot_density: usize,
}

impl Default for DampingCliParams {
    fn default() -> Self {
        Self {
            set: SetParams {
                depth: 6,
                extent: [-729.0, 729.0],
                ..SetParams::default()
            },
            c1: 0.2,
            iota: 1e-2,
            delta1: None,
            c_r: None,
            leakage_tol: 1e-6,
            plot_density: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Cantor1d,
    Rotated,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FupScanParams {
    pub family: Family,
    pub base: u32,
    pub alphabet: Vec<u32>,
    pub angle_deg: f64,
    /// Used by the full family only.
    pub dimension: usize,
    pub k_min: u32,
    pub k_max: u32,
    pub oversampling: usize,
    pub freq_refine: usize,
    /// The run's check requires β̂ ≥ min_beta.
    pub min_beta: f64,
}

impl Default for FupScanParams {
    fn default() -> Self {
        Self {
            family: Family::Cantor1d,
            base: 3,
            alphabet: vec![0, 2],
            angle_deg: 30.0,
            dimension: 1,
            k_min: 1,
            k_max: 4,
            oversampling: 4,
            freq_refine: 1,
            min_beta: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiffeoFamily {
    Shear,
    RadialBump,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistortParams {
    pub family: Family,
    pub base: u32,
    pub alphabet: Vec<u32>,
    pub angle_deg: f64,
    pub k: u32,
    pub diffeo: DiffeoFamily,
    /// Amplitudes a of the map family; 0 is the identity.
    pub amplitudes: Vec<f64>,
    pub bump_radius: f64,
    pub oversampling: usize,
    /// Defaults to the smallest value meeting the phase-resolution rule.
    pub freq_refine: Option<usize>,
    /// The run's check requires distorted/straight within [1/factor, factor].
    pub max_ratio: f64,
}

impl Default for DistortParams {
    fn default() -> Self {
        Self {
            family: Family::Cantor1d,
            base: 3,
            alphabet: vec![0, 2],
            angle_deg: 30.0,
            k: 3,
            diffeo: DiffeoFamily::Shear,
            amplitudes: vec![0.0, 0.02, 0.04, 0.08],
            bump_radius: 1.0,
            oversampling: 4,
            freq_refine: None,
            max_ratio: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstantsParams {
    pub d: u32,
    pub delta: f64,
    pub delta1: f64,
    pub c_r: f64,
    pub eps0: f64,
    pub iota: f64,
    pub m: u32,
    pub c1: Option<f64>,
    pub alpha: Option<f64>,
    pub q_star: f64,
    pub cartan_c: f64,
}

impl Default for ConstantsParams {
    fn default() -> Self {
        let d = fuplab::constants::ChainInputs::default();
        Self {
            d: d.d,
            delta: d.delta,
            delta1: d.delta1,
            c_r: d.c_r,
            eps0: d.eps0,
            iota: d.iota,
            m: d.m,
            c1: d.c1,
            alpha: d.alpha,
            q_star: d.q_star,
            cartan_c: d.cartan_c,
        }
    }
}

/// The parsed file. Only the section of the selected kind may be present.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub kind: Option<Kind>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub precision: Option<Precision>,
    pub cantor: Option<CantorParams>,
    pub regularity: Option<RegularityParams>,
    pub porosity: Option<PorosityParams>,
    pub conformal_check: Option<ConformalParams>,
    pub cartan_check: Option<CartanParams>,
    pub localization: Option<LocalizationParams>,
    pub damping: Option<DampingCliParams>,
    pub fup_scan: Option<FupScanParams>,
    pub constants: Option<ConstantsParams>,
    pub distort_scan: Option<DistortParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case")]
pub enum Params {
    Cantor(CantorParams),
    Regularity(RegularityParams),
    Porosity(PorosityParams),
    ConformalCheck(ConformalParams),
    CartanCheck(CartanParams),
    Localization(LocalizationParams),
    Damping(DampingCliParams),
    FupScan(FupScanParams),
    Constants(ConstantsParams),
    DistortScan(DistortParams),
}

/// Fully resolved configuration, echoed in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolved {
    pub seed: u64,
    pub out: PathBuf,
    pub threads: usize,
    pub precision: Precision,
    pub experiment: Params,
}

/// Command-line values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub precision: Option<Precision>,
    /// Output root used when neither the flag nor the file sets `out`.
    pub out_root: Option<PathBuf>,
}

pub fn load(path: Option<&Path>) -> Result<FileConfig, String> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

pub fn resolve(kind: Kind, file: FileConfig, over: Overrides) -> Result<Resolved, String> {
    if let Some(k) = file.kind {
        if k != kind {
            return Err(format!("config is for '{}' but '{}' was requested", k.name(), kind.name()));
        }
    }
    let sections = [
        (Kind::Cantor, file.cantor.is_some()),
        (Kind::Regularity, file.regularity.is_some()),
        (Kind::Porosity, file.porosity.is_some()),
        (Kind::ConformalCheck, file.conformal_check.is_some()),
        (Kind::CartanCheck, file.cartan_check.is_some()),
        (Kind::Localization, file.localization.is_some()),
        (Kind::Damping, file.damping.is_some()),
        (Kind::FupScan, file.fup_scan.is_some()),
        (Kind::Constants, file.constants.is_some()),
        (Kind::DistortScan, file.distort_scan.is_some()),
    ];
    if let Some((other, _)) = sections.iter().find(|(k, present)| *present && *k != kind) {
        return Err(format!("section [{}] does not apply to '{}'", other.name(), kind.name()));
    }
    let experiment = match kind {
        Kind::Cantor => Params::Cantor(file.cantor.unwrap_or_default()),
        Kind::Regularity => Params::Regularity(file.regularity.unwrap_or_default()),
        Kind::Porosity => Params::Porosity(file.porosity.unwrap_or_default()),
        Kind::ConformalCheck => Params::ConformalCheck(file.conformal_check.unwrap_or_default()),
        Kind::CartanCheck => Params::CartanCheck(file.cartan_check.unwrap_or_default()),
        Kind::Localization => Params::Localization(file.localization.unwrap_or_default()),
        Kind::Damping => Params::Damping(file.damping.unwrap_or_default()),
        Kind::FupScan => Params::FupScan(file.fup_scan.unwrap_or_default()),
        Kind::Constants => Params::Constants(file.constants.unwrap_or_default()),
        Kind::DistortScan => Params::DistortScan(file.distort_scan.unwrap_or_default()),
    };
    let threads = over.threads.or(file.threads).unwrap_or(1);
    if threads == 0 {
        return Err("threads must be at least 1".into());
    }
    let out = over
        .out
        .or(file.out)
        .unwrap_or_else(|| over.out_root.unwrap_or_else(|| PathBuf::from("fuplab-out")).join(kind.name()));
    Ok(Resolved {
        seed: over.seed.or(file.seed).unwrap_or(0),
        out,
        threads,
        precision: over.precision.or(file.precision).unwrap_or_default(),
        experiment,
    })
}
