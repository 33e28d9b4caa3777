//! Config-driven experiments. A JSON config selects one experiment kind; a run
//! produces CSV rows (one per measured quantity), tolerance-gate verdicts and a
//! JSON summary that echoes the resolved config.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::hamiltonian::{pauli_sum, random_traceless, tfim_bond, tfim_three_site, ChainHamiltonian, LocalTerm};
use crate::mera::{self, MeraNetwork, MeraShape, MeraVarianceConfig, TensorKind};
use crate::moments::{haar_moment_check, mps_eta};
use crate::mps::{self, extensive_placements, Mps, MpsShape, MpsVarianceConfig, TermLayout};
use crate::optimize::{minimize, MeraObjective, MpsObjective, OptimizerConfig, OptimizerTrace};
use crate::riemann::global_unitary_variance;
use crate::spectra::{eigenvalues, eta_nonary_series, spectrum_report, Family, Flavor, Mover};
use crate::stats::{linear_fit, VarianceReport};
use crate::tensor::{ipow, RngSeed};

/// Variances this small count as an identically vanishing gradient.
const ZERO_VARIANCE: f64 = 1e-24;
/// Largest Hilbert space diagonalized for reference ground energies.
const MAX_EXACT_SITES: usize = 14;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Gates {
    /// Monte Carlo estimate vs closed form: allowed deviation in batched stderr.
    pub k_stderr: f64,
    /// Relative floor added to the stderr allowance.
    pub rel: f64,
    /// Relative tolerance for scaling ratios.
    pub ratio_rel: f64,
    /// Absolute tolerance for deterministic spectra.
    pub abs: f64,
    /// Relative tolerance for series approximations.
    pub series_rel: f64,
    /// Largest allowed |mean|/stderr of any gradient entry.
    pub mean_z: f64,
    /// Relative tolerance for the fitted log-variance slope.
    pub slope_rel: f64,
    /// Judge moment checks by the count of 4-stderr exceedances instead of the
    /// largest single deviation.
    pub multiplicity_aware: bool,
}

impl Default for Gates {
    fn default() -> Self {
        Self {
            k_stderr: 4.0,
            rel: 0.0,
            ratio_rel: 0.25,
            abs: 1e-9,
            series_rel: 0.02,
            mean_z: 5.0,
            slope_rel: 0.05,
            multiplicity_aware: false,
        }
    }
}

/// Local Hamiltonian term description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum HamiltonianSpec {
    /// Weighted Pauli words, e.g. `[[1.0, "ZZ"]]`.
    Pauli { terms: Vec<(f64, String)> },
    /// Transverse-field Ising term on two sites (open chains) or three sites
    /// (periodic MERA windows).
    Tfim {
        g: f64,
        #[serde(default = "two")]
        support: usize,
    },
    RandomTraceless { support: usize, seed: u64 },
}

fn two() -> usize {
    2
}

impl HamiltonianSpec {
    pub fn build(&self, site_dim: usize) -> Result<LocalTerm> {
        let qubit = || {
            if site_dim == 2 {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!(
                    "{self:?} needs site dimension 2, found {site_dim}"
                )))
            }
        };
        match self {
            Self::Pauli { terms } => {
                qubit()?;
                pauli_sum(terms)
            }
            Self::Tfim { g, support } => {
                qubit()?;
                match support {
                    2 => Ok(tfim_bond(*g)),
                    3 => Ok(tfim_three_site(*g)),
                    s => Err(Error::InvalidConfig(format!("tfim support {s} (2 or 3)"))),
                }
            }
            Self::RandomTraceless { support, seed } => random_traceless(*support, site_dim, RngSeed::new(*seed)),
        }
    }

    fn pauli(word: &str) -> Self {
        Self::Pauli {
            terms: vec![(1.0, word.to_string())],
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeingartenParams {
    #[serde(default = "default_dims")]
    pub dims: Vec<usize>,
    #[serde(default = "default_moment_samples")]
    pub samples: usize,
}

fn default_dims() -> Vec<usize> {
    vec![2, 3, 4]
}

fn default_moment_samples() -> usize {
    100_000
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectraParams {
    pub family: Family,
    #[serde(default = "default_flavor")]
    pub flavor: Flavor,
    pub chi: usize,
    /// A single mover channel; the layer average when absent.
    #[serde(default)]
    pub mover: Option<Mover>,
}

fn default_flavor() -> Flavor {
    Flavor::Mera
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MpsPreset {
    /// Z on site i only.
    #[serde(rename = "theorem2")]
    ZSingleSite,
    /// Z on every site.
    #[serde(rename = "theorem3")]
    ZEverySite,
    /// Z⊗Z on sites (i, i+1) only.
    #[serde(rename = "theorem4")]
    ZzSingleBond,
    /// Z⊗Z on every bond.
    #[serde(rename = "theorem4-extensive")]
    ZzEveryBond,
}

impl MpsPreset {
    fn term(self) -> HamiltonianSpec {
        match self {
            Self::ZSingleSite | Self::ZEverySite => HamiltonianSpec::pauli("Z"),
            Self::ZzSingleBond | Self::ZzEveryBond => HamiltonianSpec::pauli("ZZ"),
        }
    }

    fn extensive(self) -> bool {
        matches!(self, Self::ZEverySite | Self::ZzEveryBond)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Sites {
    One(usize),
    Many(Vec<usize>),
}

impl Sites {
    pub fn to_vec(&self) -> Vec<usize> {
        match self {
            Self::One(s) => vec![*s],
            Self::Many(v) => v.clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MpsVarianceParams {
    #[serde(default)]
    pub preset: Option<MpsPreset>,
    #[serde(rename = "L")]
    pub length: usize,
    pub d: usize,
    pub m: usize,
    /// First site of the term (single-term layouts).
    #[serde(default)]
    pub i: Option<usize>,
    /// Gradient sites.
    pub j: Sites,
    #[serde(default)]
    pub hamiltonian: Option<HamiltonianSpec>,
    #[serde(default)]
    pub extensive: Option<bool>,
    pub samples: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeraVarianceParams {
    pub family: Family,
    #[serde(default = "default_flavor")]
    pub flavor: Flavor,
    pub chi: usize,
    #[serde(rename = "T")]
    pub layers: usize,
    #[serde(rename = "Tprime")]
    pub lattice_exp: usize,
    /// Measured layers.
    pub tau: Vec<usize>,
    /// Tensor kind whose gradients are measured; disentanglers when the network has them.
    #[serde(default)]
    pub target: Option<TensorKind>,
    /// Single tensor index per layer; layer average when absent.
    #[serde(default)]
    pub tensor: Option<usize>,
    /// Defaults to Z on every window site.
    #[serde(default)]
    pub hamiltonian: Option<HamiltonianSpec>,
    pub samples: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlobalVarianceParams {
    #[serde(rename = "L")]
    pub length: usize,
    pub d: usize,
    /// Padded with identities up to L sites; Z⊗Z by default.
    #[serde(default)]
    pub hamiltonian: Option<HamiltonianSpec>,
    pub samples: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum Ansatz {
    /// Open chain with the term on every bond.
    Mps {
        #[serde(rename = "L")]
        length: usize,
        #[serde(default = "two")]
        d: usize,
        m: usize,
    },
    /// Periodic chain with the term on every window.
    Mera {
        family: Family,
        #[serde(default = "default_flavor")]
        flavor: Flavor,
        chi: usize,
        #[serde(rename = "T")]
        layers: usize,
        #[serde(rename = "Tprime")]
        lattice_exp: usize,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeParams {
    pub ansatz: Ansatz,
    /// Transverse-field Ising at g = 1 by default.
    #[serde(default)]
    pub hamiltonian: Option<HamiltonianSpec>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub target_relative_error: Option<f64>,
    #[serde(default)]
    pub min_gap_closed: Option<f64>,
    #[serde(default)]
    pub min_decreasing_fraction: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormStatsParams {
    #[serde(rename = "L")]
    pub length: usize,
    pub d: usize,
    pub m: usize,
    pub samples: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    Weingarten(WeingartenParams),
    ChannelSpectra(SpectraParams),
    MpsVariance(MpsVarianceParams),
    MeraVariance(MeraVarianceParams),
    GlobalVariance(GlobalVarianceParams),
    Optimize(OptimizeParams),
    NormStats(NormStatsParams),
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Weingarten(_) => "weingarten",
            Self::ChannelSpectra(_) => "channel-spectra",
            Self::MpsVariance(_) => "mps-variance",
            Self::MeraVariance(_) => "mera-variance",
            Self::GlobalVariance(_) => "global-variance",
            Self::Optimize(_) => "optimize",
            Self::NormStats(_) => "norm-stats",
        }
    }

    fn samples_mut(&mut self) -> Option<&mut usize> {
        match self {
            Self::Weingarten(p) => Some(&mut p.samples),
            Self::MpsVariance(p) => Some(&mut p.samples),
            Self::MeraVariance(p) => Some(&mut p.samples),
            Self::GlobalVariance(p) => Some(&mut p.samples),
            Self::NormStats(p) => Some(&mut p.samples),
            Self::ChannelSpectra(_) | Self::Optimize(_) => None,
        }
    }
}

/// An experiment plus the settings shared by every kind.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: Option<u64>,
    /// Output file stem; the kind when absent.
    pub name: Option<String>,
    /// Output directory.
    pub output: Option<PathBuf>,
    pub gates: Gates,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment, seed: u64) -> Self {
        Self {
            experiment,
            seed: Some(seed),
            name: None,
            output: None,
            gates: Gates::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        Self::from_value(value)
    }

    pub fn from_value(value: Value) -> Result<Self> {
        let invalid = |e: serde_json::Error| Error::InvalidConfig(e.to_string());
        let Value::Object(mut map) = value else {
            return Err(Error::InvalidConfig("config must be a JSON object".into()));
        };
        let mut take = |key: &str| map.remove(key).filter(|v| !v.is_null());
        let seed = take("seed").map(serde_json::from_value).transpose().map_err(invalid)?;
        let name = take("name").map(serde_json::from_value).transpose().map_err(invalid)?;
        let output = take("output").map(serde_json::from_value).transpose().map_err(invalid)?;
        let gates = take("gates")
            .map(serde_json::from_value)
            .transpose()
            .map_err(invalid)?
            .unwrap_or_default();
        let experiment = serde_json::from_value(Value::Object(map)).map_err(invalid)?;
        Ok(Self {
            experiment,
            seed,
            name,
            output,
            gates,
        })
    }

    pub fn to_value(&self) -> Value {
        let mut map = match serde_json::to_value(&self.experiment) {
            Ok(Value::Object(map)) => map,
            _ => Map::new(),
        };
        let common: [(&str, Value); 4] = [
            ("seed", self.seed.into()),
            ("name", self.name.clone().into()),
            ("output", self.output.as_ref().map(|p| p.display().to_string()).into()),
            ("gates", serde_json::to_value(&self.gates).unwrap_or(Value::Null)),
        ];
        for (key, value) in common {
            if !value.is_null() {
                map.insert(key.to_string(), value);
            }
        }
        Value::Object(map)
    }

    pub fn set_samples(&mut self, samples: usize) -> Result<()> {
        let kind = self.experiment.kind();
        match self.experiment.samples_mut() {
            Some(s) => {
                *s = samples;
                Ok(())
            }
            None => Err(Error::InvalidConfig(format!("{kind} takes no sample count"))),
        }
    }

    pub fn stem(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.experiment.kind().to_string())
    }

    fn seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::InvalidConfig("missing seed (set it in the config or pass --seed)".into()))
    }
}

/// One CSV row.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Row {
    pub experiment: String,
    pub family: String,
    pub flavor: String,
    #[serde(rename = "chi|m")]
    pub chi_or_m: Option<usize>,
    pub d: Option<usize>,
    #[serde(rename = "L")]
    pub length: Option<usize>,
    #[serde(rename = "T")]
    pub layers: Option<usize>,
    #[serde(rename = "tau|j")]
    pub tau_or_j: Option<usize>,
    pub i: Option<usize>,
    pub quantity: String,
    pub estimate: f64,
    pub stderr: Option<f64>,
    pub prediction: Option<f64>,
    pub ratio: Option<f64>,
    pub samples: Option<usize>,
    pub seed: u64,
}

impl Row {
    fn quantity(&self, quantity: &str, estimate: f64) -> Self {
        Self {
            quantity: quantity.to_string(),
            estimate,
            stderr: None,
            prediction: None,
            ratio: None,
            ..self.clone()
        }
    }

    fn predicted(mut self, prediction: Option<f64>) -> Self {
        self.prediction = prediction;
        self.ratio = prediction.filter(|p| *p != 0.0).map(|p| self.estimate / p);
        self
    }

    fn report(&self, r: &VarianceReport) -> Self {
        Self {
            stderr: Some(r.stderr),
            samples: Some(r.samples),
            ..self.quantity(&r.quantity, r.estimate).predicted(r.prediction)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GateResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Outcome {
    pub config: Value,
    pub passed: bool,
    pub gates: Vec<GateResult>,
    pub rows: Vec<Row>,
    /// Kind-specific detail (optimizer traces, raw reports).
    pub details: Value,
}

impl Outcome {
    pub fn csv(&self) -> Result<Vec<u8>> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            writer.serialize(row)?;
        }
        writer.into_inner().map_err(|e| Error::Io(e.into_error()))
    }

    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir` and returns both paths.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir)?;
        let csv_path = dir.join(format!("{stem}.csv"));
        let json_path = dir.join(format!("{stem}.json"));
        fs::write(&csv_path, self.csv()?)?;
        fs::write(&json_path, self.summary_json()?)?;
        Ok((csv_path, json_path))
    }
}

struct Collector {
    gates: Vec<GateResult>,
    rows: Vec<Row>,
}

impl Collector {
    fn new() -> Self {
        Self {
            gates: Vec::new(),
            rows: Vec::new(),
        }
    }

    fn gate(&mut self, name: String, passed: bool, detail: String) {
        self.gates.push(GateResult { name, passed, detail });
    }

    fn agreement(&mut self, name: String, r: &VarianceReport, k: f64, rel: f64, abs: f64) {
        let detail = format!(
            "estimate {:.6e} ± {:.2e}, prediction {:.6e}",
            r.estimate,
            r.stderr,
            r.prediction.unwrap_or(f64::NAN)
        );
        self.gate(name, r.agrees(k, rel, abs), detail);
    }

    fn relative(&mut self, name: String, estimate: f64, prediction: f64, tol: f64) {
        let deviation = (estimate / prediction - 1.0).abs();
        self.gate(
            name,
            deviation <= tol,
            format!("estimate {estimate:.6e}, prediction {prediction:.6e}, relative deviation {deviation:.3} (tolerance {tol})"),
        );
    }

    fn mean_zero(&mut self, name: String, r: &VarianceReport, limit: f64) {
        if let Some(z) = r.gradient_mean_max_z {
            self.gate(name, z <= limit, format!("max |mean|/stderr {z:.3} (limit {limit})"));
        }
    }
}

/// Runs an experiment. Validation failures surface as errors; tolerance-gate
/// failures are recorded in the outcome.
pub fn run(config: &ExperimentConfig) -> Result<Outcome> {
    let seed = config.seed()?;
    let gates = &config.gates;
    let mut out = Collector::new();
    let details = match &config.experiment {
        Experiment::Weingarten(p) => run_weingarten(p, seed, gates, &mut out)?,
        Experiment::ChannelSpectra(p) => run_spectra(p, seed, gates, &mut out)?,
        Experiment::MpsVariance(p) => run_mps_variance(p, seed, gates, &mut out)?,
        Experiment::MeraVariance(p) => run_mera_variance(p, seed, gates, &mut out)?,
        Experiment::GlobalVariance(p) => run_global_variance(p, seed, gates, &mut out)?,
        Experiment::Optimize(p) => run_optimize(p, seed, &mut out)?,
        Experiment::NormStats(p) => run_norm_stats(p, seed, gates, &mut out)?,
    };
    let mut echo = config.clone();
    echo.seed = Some(seed);
    Ok(Outcome {
        config: echo.to_value(),
        passed: out.gates.iter().all(|g| g.passed),
        gates: out.gates,
        rows: out.rows,
        details,
    })
}

fn run_weingarten(p: &WeingartenParams, seed: u64, gates: &Gates, out: &mut Collector) -> Result<Value> {
    let mut checks = Vec::new();
    for &n in &p.dims {
        let check = haar_moment_check(n, p.samples, seed)?;
        let base = Row {
            experiment: "weingarten".into(),
            d: Some(n),
            samples: Some(p.samples),
            seed,
            ..Row::default()
        };
        for (label, cmp) in [("first", &check.first), ("second", &check.second)] {
            out.rows.push(base.quantity(&format!("{label}_moment_max_z"), cmp.max_z));
            out.rows
                .push(base.quantity(&format!("{label}_moment_max_abs_deviation"), cmp.max_abs_deviation));
            out.rows.push(
                base.quantity(&format!("{label}_moment_beyond_4_stderr"), cmp.beyond_four_stderr as f64)
                    .predicted(Some(cmp.expected_beyond_four)),
            );
            let name = format!("N={n} {label} moment");
            if gates.multiplicity_aware {
                let expected = cmp.expected_beyond_four;
                let limit = expected + 4.0 * expected.sqrt() + 1.0;
                out.gate(
                    name,
                    (cmp.beyond_four_stderr as f64) <= limit,
                    format!(
                        "{} of {} entries beyond 4 stderr, {expected:.1} expected (limit {limit:.1})",
                        cmp.beyond_four_stderr, cmp.entries
                    ),
                );
            } else {
                out.gate(
                    name,
                    cmp.max_z <= gates.k_stderr,
                    format!("max |z| {:.3} over {} entries (limit {})", cmp.max_z, cmp.entries, gates.k_stderr),
                );
            }
        }
        checks.push(check);
    }
    Ok(serde_json::to_value(checks)?)
}

fn family_name(family: Family) -> String {
    serde_json::to_value(family)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

fn flavor_name(flavor: Flavor) -> String {
    match flavor {
        Flavor::Mera => "mera".into(),
        Flavor::Ttns => "ttns".into(),
    }
}

fn run_spectra(p: &SpectraParams, seed: u64, gates: &Gates, out: &mut Collector) -> Result<Value> {
    let base = Row {
        experiment: "channel-spectra".into(),
        family: family_name(p.family),
        flavor: flavor_name(p.flavor),
        chi_or_m: Some(p.chi),
        seed,
        ..Row::default()
    };
    let report = spectrum_report(p.family, p.flavor, p.mover, p.chi)?;
    for row in &report {
        out.rows.push(Row {
            i: Some(row.index),
            ..base.quantity("eigenvalue", row.eigenvalue).predicted(row.prediction)
        });
        if let Some(pred) = row.prediction {
            let dev = (row.eigenvalue - pred).abs();
            out.gate(
                format!("eigenvalue {}", row.index),
                dev <= gates.abs,
                format!("{:.12} vs {pred:.12} (|Δ| {dev:.2e})", row.eigenvalue),
            );
        }
    }
    if (p.family, p.flavor, p.mover) == (Family::Nonary2d, Flavor::Mera, None) && report.len() > 1 {
        let eta = report[1].eigenvalue;
        let series = eta_nonary_series(p.chi);
        out.rows.push(Row {
            i: Some(2),
            ..base.quantity("eta_vs_series", eta).predicted(Some(series))
        });
        out.relative("second eigenvalue vs series".into(), eta, series, gates.series_rel);
    }
    let complex = eigenvalues(&crate::spectra::channel_matrix(p.family, p.flavor, p.mover, p.chi)?);
    let largest_imag = complex.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    Ok(serde_json::json!({ "spectrum": report, "largest_imaginary_part": largest_imag }))
}

fn resolve_mps_term(p: &MpsVarianceParams) -> Result<(LocalTerm, TermLayout)> {
    let spec = match (&p.hamiltonian, p.preset) {
        (Some(h), _) => h.clone(),
        (None, Some(preset)) => preset.term(),
        (None, None) => return Err(Error::InvalidConfig("mps-variance needs a preset or a hamiltonian".into())),
    };
    let extensive = p
        .extensive
        .or(p.preset.map(MpsPreset::extensive))
        .unwrap_or(false);
    let layout = if extensive {
        TermLayout::Extensive
    } else {
        let first_site = p
            .i
            .ok_or_else(|| Error::InvalidConfig("single-term layouts need the term site i".into()))?;
        TermLayout::Single { first_site }
    };
    Ok((spec.build(p.d)?, layout))
}

fn run_mps_variance(p: &MpsVarianceParams, seed: u64, gates: &Gates, out: &mut Collector) -> Result<Value> {
    let (term, layout) = resolve_mps_term(p)?;
    let first_site = match layout {
        TermLayout::Single { first_site } => Some(first_site),
        TermLayout::Extensive => None,
    };
    let cfg = MpsVarianceConfig {
        length: p.length,
        phys_dim: p.d,
        bond_dim: p.m,
        term,
        layout,
        samples: p.samples,
        seed,
    };
    let sites = p.j.to_vec();
    if sites.is_empty() {
        return Err(Error::InvalidConfig("no gradient sites".into()));
    }
    let reports = mps::mc_gradient_variance_sites(&cfg, &sites)?;
    let base = Row {
        experiment: "mps-variance".into(),
        family: "mps".into(),
        chi_or_m: Some(p.m),
        d: Some(p.d),
        length: Some(p.length),
        i: first_site,
        seed,
        ..Row::default()
    };
    let mut decay = Vec::new();
    for (&site, r) in sites.iter().zip(&reports) {
        let row = Row {
            tau_or_j: Some(site),
            ..base.clone()
        };
        out.rows.push(row.report(r));
        out.rows.push(Row {
            stderr: r.extras.get("diagonal_stderr").copied(),
            samples: Some(r.samples),
            ..row
                .quantity("diagonal", r.extras["diagonal"])
                .predicted(r.extras.get("diagonal_prediction").copied())
        });
        if let Some(z) = r.gradient_mean_max_z {
            out.rows.push(row.quantity("mean_grad_max_z", z));
        }
        if r.prediction.is_some() {
            out.agreement(format!("j={site} variance"), r, gates.k_stderr, gates.rel, ZERO_VARIANCE);
        }
        out.mean_zero(format!("j={site} mean gradient"), r, gates.mean_z);
        if let (Some(i), Some(_)) = (first_site, r.prediction) {
            if site >= i && r.estimate > 0.0 {
                decay.push(((site - i) as f64, r.estimate.ln()));
            }
        }
    }
    if decay.len() >= 2 {
        let (xs, ys): (Vec<f64>, Vec<f64>) = decay.into_iter().unzip();
        let (slope, _) = linear_fit(&xs, &ys);
        let predicted = mps_eta(p.m, p.d).ln();
        out.rows.push(base.quantity("log_variance_slope", slope).predicted(Some(predicted)));
        out.relative("log-variance slope".into(), slope, predicted, gates.slope_rel);
    }
    Ok(serde_json::to_value(reports)?)
}

fn default_window_term(window: usize) -> HamiltonianSpec {
    HamiltonianSpec::pauli(&"Z".repeat(window))
}

fn run_mera_variance(p: &MeraVarianceParams, seed: u64, gates: &Gates, out: &mut Collector) -> Result<Value> {
    let shape = MeraShape::new(p.family, p.flavor, p.chi, p.layers, p.lattice_exp)?;
    let spec = p.hamiltonian.clone().unwrap_or_else(|| default_window_term(shape.window()));
    let term = spec.build(p.chi)?;
    let term = if term.support() < shape.window() {
        term.padded(shape.window())?
    } else {
        term
    };
    let kind = p.target.unwrap_or(if shape.has_disentanglers() {
        TensorKind::Disentangler
    } else {
        TensorKind::Isometry
    });
    let result = mera::mc_gradient_variance(&MeraVarianceConfig {
        shape,
        term,
        kind,
        measured: p.tau.clone(),
        tensor: p.tensor,
        samples: p.samples,
        seed,
    })?;
    let base = Row {
        experiment: "mera-variance".into(),
        family: family_name(p.family),
        flavor: flavor_name(p.flavor),
        chi_or_m: Some(p.chi),
        length: Some(shape.length()),
        layers: Some(p.layers),
        i: p.tensor,
        seed,
        ..Row::default()
    };
    for (&tau, r) in p.tau.iter().zip(&result.layers) {
        let row = Row {
            tau_or_j: Some(tau),
            ..base.clone()
        };
        out.rows.push(row.report(r));
        let mut diagonal = r.clone();
        diagonal.quantity = "diagonal".into();
        diagonal.estimate = r.extras["diagonal"];
        diagonal.stderr = r.extras["diagonal_stderr"];
        diagonal.prediction = r.extras.get("diagonal_exact").copied();
        out.rows.push(row.report(&diagonal));
        if diagonal.prediction.is_some() {
            out.agreement(format!("tau={tau} diagonal"), &diagonal, gates.k_stderr, gates.rel, 0.0);
        }
        if let Some(&leading) = r.extras.get("diagonal_leading") {
            out.rows.push(Row {
                stderr: Some(diagonal.stderr),
                samples: Some(r.samples),
                ..row.quantity("diagonal_leading", diagonal.estimate).predicted(Some(leading))
            });
        }
        if let Some(z) = r.gradient_mean_max_z {
            out.rows.push(row.quantity("mean_grad_max_z", z));
        }
        out.mean_zero(format!("tau={tau} mean gradient"), r, gates.mean_z);
    }
    for r in &result.ratios {
        let upper = r.extras["layer"] as usize;
        out.rows.push(
            Row {
                tau_or_j: Some(upper),
                ..base.clone()
            }
            .report(r),
        );
        if let Some(pred) = r.prediction {
            out.relative(format!("layer ratio {upper}/{}", upper - 1), r.estimate, pred, gates.ratio_rel);
        }
    }
    Ok(serde_json::to_value(result)?)
}

fn run_global_variance(p: &GlobalVarianceParams, seed: u64, gates: &Gates, out: &mut Collector) -> Result<Value> {
    if p.length == 0 || p.d < 2 || ipow(p.d, p.length) > 1 << 12 {
        return Err(Error::InvalidDimension(format!("L={} d={}", p.length, p.d)));
    }
    let spec = p.hamiltonian.clone().unwrap_or_else(|| HamiltonianSpec::pauli("ZZ"));
    let term = spec.build(p.d)?.padded(p.length)?;
    let report = global_unitary_variance(term.matrix(), p.samples, seed)?;
    let row = Row {
        experiment: "global-variance".into(),
        family: "global".into(),
        d: Some(p.d),
        length: Some(p.length),
        seed,
        ..Row::default()
    };
    out.rows.push(row.report(&report));
    out.agreement("variance".into(), &report, gates.k_stderr, gates.rel, 0.0);
    out.mean_zero("mean gradient".into(), &report, gates.mean_z);
    Ok(serde_json::to_value(report)?)
}

fn run_optimize(p: &OptimizeParams, seed: u64, out: &mut Collector) -> Result<Value> {
    let (start, trace, exact, base) = match &p.ansatz {
        Ansatz::Mps { length, d, m } => {
            let term = p
                .hamiltonian
                .clone()
                .unwrap_or(HamiltonianSpec::Tfim { g: 1.0, support: 2 })
                .build(*d)?;
            let shape = MpsShape::new(*length, *d, *m)?;
            let start = Mps::random_seeded(*length, *d, *m, RngSeed::new(seed))?;
            let objective = MpsObjective::new(shape, extensive_placements(*length, &term));
            let (_, trace) = minimize(&objective, start.unitaries().to_vec(), &p.optimizer)?;
            let exact = (ipow(*d, *length) <= 1 << MAX_EXACT_SITES)
                .then(|| ChainHamiltonian::open_uniform(*length, &term).ground_energy())
                .transpose()?;
            let base = Row {
                family: "mps".into(),
                chi_or_m: Some(*m),
                d: Some(*d),
                length: Some(*length),
                ..Row::default()
            };
            (start.unitaries().len(), trace, exact, base)
        }
        Ansatz::Mera {
            family,
            flavor,
            chi,
            layers,
            lattice_exp,
        } => {
            let shape = MeraShape::new(*family, *flavor, *chi, *layers, *lattice_exp)?;
            let spec = p.hamiltonian.clone().unwrap_or(HamiltonianSpec::Tfim {
                g: 1.0,
                support: shape.window(),
            });
            let term = spec.build(*chi)?;
            let term = if term.support() < shape.window() {
                term.padded(shape.window())?
            } else {
                term
            };
            let net = MeraNetwork::random_seeded(shape, RngSeed::new(seed));
            let start = net.unitaries();
            let exact = (ipow(*chi, shape.length()) <= 1 << MAX_EXACT_SITES)
                .then(|| net.hamiltonian(&term).ground_energy())
                .transpose()?;
            let objective = MeraObjective::new(net, term);
            let (_, trace) = minimize(&objective, start.clone(), &p.optimizer)?;
            let base = Row {
                family: family_name(*family),
                flavor: flavor_name(*flavor),
                chi_or_m: Some(*chi),
                length: Some(shape.length()),
                layers: Some(*layers),
                ..Row::default()
            };
            (start.len(), trace, exact, base)
        }
    };
    let base = Row {
        experiment: "optimize".into(),
        seed,
        ..base
    };
    record_trace(p, &trace, exact, &base, out);
    Ok(serde_json::json!({ "tensor_count": start, "trace": trace, "exact_ground_energy": exact }))
}

fn record_trace(p: &OptimizeParams, trace: &OptimizerTrace, exact: Option<f64>, base: &Row, out: &mut Collector) {
    let (initial, last) = (trace.initial_energy(), trace.final_energy());
    let iterations = trace.iterations.len() - 1;
    out.rows.push(base.quantity("initial_energy", initial).predicted(exact));
    out.rows.push(base.quantity("final_energy", last).predicted(exact));
    out.rows.push(base.quantity("iterations", iterations as f64));
    out.rows.push(base.quantity("decreasing_fraction", trace.decreasing_fraction()));
    let final_gradient = trace.iterations.last().map_or(f64::NAN, |r| r.gradient_norm);
    out.rows.push(base.quantity("final_gradient_norm", final_gradient));
    if let Some(e0) = exact {
        let rel = (last - e0).abs() / e0.abs();
        let closed = (initial - last) / (initial - e0);
        out.rows.push(base.quantity("relative_error", rel));
        out.rows.push(base.quantity("gap_closed", closed));
        if let Some(target) = p.target_relative_error {
            out.gate(
                "relative energy error".into(),
                rel <= target && iterations <= p.optimizer.max_iterations,
                format!("{rel:.3e} after {iterations} iterations (target {target:e})"),
            );
        }
        if let Some(min) = p.min_gap_closed {
            out.gate("gap closed".into(), closed >= min, format!("{closed:.4} (minimum {min})"));
        }
    } else if p.target_relative_error.is_some() || p.min_gap_closed.is_some() {
        out.gate(
            "reference energy".into(),
            false,
            "chain too long for exact diagonalization".into(),
        );
    }
    if let Some(min) = p.min_decreasing_fraction {
        let fraction = trace.decreasing_fraction();
        out.gate(
            "monotone decrease".into(),
            fraction >= min,
            format!("{fraction:.4} of steps lowered the energy (minimum {min})"),
        );
    }
}

fn run_norm_stats(p: &NormStatsParams, seed: u64, gates: &Gates, out: &mut Collector) -> Result<Value> {
    let report = mps::norm_statistics(p.length, p.d, p.m, p.samples, seed)?;
    let row = Row {
        experiment: "norm-stats".into(),
        family: "mps".into(),
        chi_or_m: Some(p.m),
        d: Some(p.d),
        length: Some(p.length),
        seed,
        ..Row::default()
    };
    out.rows.push(row.report(&report));
    out.rows.push(Row {
        stderr: report.extras.get("norm_mean_stderr").copied(),
        samples: Some(report.samples),
        ..row.quantity("norm_mean", report.extras["norm_mean"]).predicted(Some(1.0))
    });
    out.agreement("norm variance".into(), &report, gates.k_stderr, gates.rel, 0.0);
    Ok(serde_json::to_value(report)?)
}

/// Config used by a CLI subcommand when no `--config` is given.
pub fn default_experiment(subcommand: &str) -> Option<Experiment> {
    let experiment = match subcommand {
        "spectra" => Experiment::ChannelSpectra(SpectraParams {
            family: Family::Binary1d,
            flavor: Flavor::Mera,
            chi: 2,
            mover: None,
        }),
        "checks" => Experiment::Weingarten(WeingartenParams {
            dims: default_dims(),
            samples: default_moment_samples(),
        }),
        "variance" => Experiment::MpsVariance(MpsVarianceParams {
            preset: Some(MpsPreset::ZSingleSite),
            length: 12,
            d: 2,
            m: 2,
            i: Some(4),
            j: Sites::Many(vec![3, 4, 5, 6, 7, 8]),
            hamiltonian: None,
            extensive: None,
            samples: 10_000,
        }),
        "optimize" => Experiment::Optimize(OptimizeParams {
            ansatz: Ansatz::Mps { length: 8, d: 2, m: 4 },
            hamiltonian: None,
            optimizer: OptimizerConfig::default(),
            target_relative_error: Some(1e-3),
            min_gap_closed: None,
            min_decreasing_fraction: None,
        }),
        "norm-stats" => Experiment::NormStats(NormStatsParams {
            length: 10,
            d: 2,
            m: 2,
            samples: 10_000,
        }),
        _ => return None,
    };
    Some(experiment)
}

/// Experiment kinds each CLI subcommand accepts.
pub fn accepts(subcommand: &str, experiment: &Experiment) -> bool {
    matches!(
        (subcommand, experiment),
        ("spectra", Experiment::ChannelSpectra(_))
            | ("checks", Experiment::Weingarten(_))
            | (
                "variance",
                Experiment::MpsVariance(_) | Experiment::MeraVariance(_) | Experiment::GlobalVariance(_)
            )
            | ("optimize", Experiment::Optimize(_))
            | ("norm-stats", Experiment::NormStats(_))
    )
}
