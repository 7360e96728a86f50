//! Experiment configuration: TOML file, `--set` overrides, defaults.

use std::path::{Path, PathBuf};

use grushin_core::exponents::parse_rational;
use grushin_core::solver::SolveConfig;
use grushin_core::{
    GridSpec, GrushinDims, ProblemParams, Profile, PropagatorKind, RationalParams, Scheme, TimeGrid,
};
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::failure::Failure;

/// Experiments that read a config; `export` does not.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Exponents,
    KernelCheck,
    DecayFit,
    Solve,
    Picard,
    Compare,
    PhaseScan,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Exponents => "exponents",
            Kind::KernelCheck => "kernel-check",
            Kind::DecayFit => "decay-fit",
            Kind::Solve => "solve",
            Kind::Picard => "picard",
            Kind::Compare => "compare",
            Kind::PhaseScan => "phase-scan",
        }
    }
}

/// A number given either as a TOML number or as text such as `"7/3"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Number(f64),
    Text(String),
}

impl Scalar {
    fn exact(&self, name: &str) -> Result<Option<Ratio<i128>>, Failure> {
        let text = match self {
            Scalar::Number(v) => format!("{v}"),
            Scalar::Text(t) => t.clone(),
        };
        match parse_rational(&text) {
            Ok(r) => Ok(Some(r)),
            Err(_) if matches!(self, Scalar::Number(_)) => Ok(None),
            Err(e) => Err(Failure::config(format!("params.{name}: {e}"))),
        }
    }

    fn value(&self, name: &str) -> Result<f64, Failure> {
        match self {
            Scalar::Number(v) => Ok(*v),
            Scalar::Text(_) => {
                let r = self.exact(name)?.expect("text parses or fails");
                Ok(*r.numer() as f64 / *r.denom() as f64)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub gamma: Scalar,
    pub p1: Scalar,
    pub p2: Scalar,
    pub coeff1: Scalar,
    pub coeff2: Scalar,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        Self {
            gamma: Scalar::Number(0.5),
            p1: Scalar::Number(3.0),
            p2: Scalar::Number(2.0),
            coeff1: Scalar::Number(1.0),
            coeff2: Scalar::Number(1.0),
        }
    }
}

impl ParamsConfig {
    fn fields(&self) -> [(&'static str, &Scalar); 5] {
        [
            ("gamma", &self.gamma),
            ("p1", &self.p1),
            ("p2", &self.p2),
            ("coeff1", &self.coeff1),
            ("coeff2", &self.coeff2),
        ]
    }

    pub fn resolve(&self) -> Result<ProblemParams, Failure> {
        let v = self
            .fields()
            .map(|(name, s)| s.value(name))
            .into_iter()
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ProblemParams::new(v[0], v[1], v[2], v[3], v[4])?)
    }

    /// Exact copy when every value has a finite decimal or fractional form.
    pub fn exact(&self) -> Result<Option<RationalParams>, Failure> {
        let mut r = Vec::with_capacity(5);
        for (name, s) in self.fields() {
            match s.exact(name)? {
                Some(x) => r.push(x),
                None => return Ok(None),
            }
        }
        Ok(Some(RationalParams::new(r[0], r[1], r[2], r[3], r[4])?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    pub scheme: Scheme,
    pub propagator: PropagatorKind,
    pub blowup_threshold: f64,
    pub checkpoint_stride: usize,
    pub norm_q: f64,
    /// Recompute the Duhamel right-hand side on the stored trajectory.
    pub residual_check: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            scheme: Scheme::default(),
            propagator: PropagatorKind::default(),
            blowup_threshold: 1e6,
            checkpoint_stride: 1,
            norm_q: 2.0,
            residual_check: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExponentSettings {
    /// Lebesgue exponent for `α₁`, `α₂`, `β`.
    pub q: Option<f64>,
    pub data_nonneg: bool,
}

impl Default for ExponentSettings {
    fn default() -> Self {
        Self {
            q: None,
            data_nonneg: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelCheckSettings {
    pub t: f64,
    /// Box half-widths; unset sides scale with `t`.
    pub x_half: Option<f64>,
    pub y_half: Option<f64>,
    pub nx: usize,
    pub ny: usize,
    pub nodes: usize,
    pub pairs: usize,
    pub sample_half_width: f64,
}

impl Default for KernelCheckSettings {
    fn default() -> Self {
        Self {
            t: 0.5,
            x_half: None,
            y_half: None,
            nx: 257,
            ny: 257,
            nodes: 256,
            pairs: 100,
            sample_half_width: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecayFitSettings {
    pub p: f64,
    #[serde(with = "grushin_core::floats")]
    pub q: f64,
    pub times: Vec<f64>,
}

impl Default for DecayFitSettings {
    fn default() -> Self {
        Self {
            p: 1.0,
            q: f64::INFINITY,
            times: (0..9).map(|i| 0.2 * 5f64.powf(i as f64 / 8.0)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PicardSettings {
    /// Horizon; unset searches the contraction window up to `time`.
    pub final_time: Option<f64>,
    pub iterations: usize,
    pub ball_multiple: Option<f64>,
}

impl Default for PicardSettings {
    fn default() -> Self {
        Self {
            final_time: None,
            iterations: 8,
            ball_multiple: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompareMode {
    /// `u0 = lower_scale·profile` against `v0 = profile`.
    Ordering,
    /// Nonpositive sources against the free evolution.
    Domination,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareSettings {
    pub mode: CompareMode,
    pub lower_scale: f64,
    /// `(p₁, p₂)` of the lower problem; defaults to the upper exponents.
    pub lower_exponents: Option<[f64; 2]>,
    pub state_range: Option<f64>,
    pub final_time: Option<f64>,
}

impl Default for CompareSettings {
    fn default() -> Self {
        Self {
            mode: CompareMode::Ordering,
            lower_scale: 0.5,
            lower_exponents: None,
            state_range: None,
            final_time: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Axis {
    pub fn values(&self, name: &str) -> Result<Vec<f64>, Failure> {
        if self.count == 0 || !(self.lo > 1.0) || !(self.hi >= self.lo) || !self.hi.is_finite() {
            return Err(Failure::config(format!(
                "phase_scan.{name}: need 1 < lo <= hi and count >= 1"
            )));
        }
        if self.count == 1 {
            return Ok(vec![self.lo]);
        }
        let step = (self.hi - self.lo) / (self.count - 1) as f64;
        Ok((0..self.count).map(|i| self.lo + step * i as f64).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhaseScanSettings {
    pub p1: Axis,
    pub p2: Axis,
    pub overlay_samples: usize,
}

impl Default for PhaseScanSettings {
    fn default() -> Self {
        Self {
            p1: Axis { lo: 1.5, hi: 4.0, count: 6 },
            p2: Axis { lo: 1.5, hi: 4.0, count: 6 },
            overlay_samples: 101,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Op {
    Eq,
    Approx,
    Lt,
    Le,
    Gt,
    Ge,
    Between,
}

/// A check on the summary, addressed by JSON pointer (`/results/p1_star`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Assertion {
    pub path: String,
    pub op: Op,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
}

fn default_seed() -> u64 {
    7
}

fn default_grid() -> GridSpec {
    GridSpec::new(8.0, 8.0, 129, 128).expect("valid default grid")
}

fn default_time() -> TimeGrid {
    TimeGrid::new(1.0 / 256.0, 512).expect("valid default time grid")
}

fn default_profile() -> Profile {
    Profile::Gaussian {
        amplitude: 0.1,
        center: [0.0, 0.0],
        widths: [1.0, 1.0],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub kind: Option<String>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub dims: GrushinDims,
    #[serde(default)]
    pub params: ParamsConfig,
    #[serde(default = "default_grid")]
    pub grid: GridSpec,
    #[serde(default = "default_time")]
    pub time: TimeGrid,
    #[serde(default = "default_profile")]
    pub profile: Profile,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub exponents: ExponentSettings,
    #[serde(default)]
    pub kernel_check: KernelCheckSettings,
    #[serde(default)]
    pub decay_fit: DecayFitSettings,
    #[serde(default)]
    pub picard: PicardSettings,
    #[serde(default)]
    pub compare: CompareSettings,
    #[serde(default)]
    pub phase_scan: PhaseScanSettings,
    #[serde(default, rename = "assert")]
    pub assertions: Vec<Assertion>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: None,
            output_dir: None,
            seed: default_seed(),
            dims: GrushinDims::default(),
            params: ParamsConfig::default(),
            grid: default_grid(),
            time: default_time(),
            profile: default_profile(),
            solver: SolverSettings::default(),
            exponents: ExponentSettings::default(),
            kernel_check: KernelCheckSettings::default(),
            decay_fit: DecayFitSettings::default(),
            picard: PicardSettings::default(),
            compare: CompareSettings::default(),
            phase_scan: PhaseScanSettings::default(),
            assertions: Vec::new(),
        }
    }
}

impl ExperimentConfig {
    pub fn output_dir(&self) -> &Path {
        self.output_dir.as_deref().expect("resolved during load")
    }

    pub fn solve_config(&self) -> Result<SolveConfig, Failure> {
        let s = &self.solver;
        let mut c = SolveConfig::new(self.grid, self.time, self.params.resolve()?);
        c.scheme = s.scheme;
        c.propagator = s.propagator;
        c.blowup_threshold = s.blowup_threshold;
        c.checkpoint_stride = s.checkpoint_stride;
        c.norm_q = s.norm_q;
        c.validate()?;
        Ok(c)
    }
}

/// Splits `a.b.c=value`; the value is read as TOML, falling back to a string.
fn parse_override(item: &str) -> Result<(Vec<String>, toml::Value), Failure> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| Failure::config(format!("override `{item}` is not key=value")))?;
    let path: Vec<String> = key.trim().split('.').map(str::to_owned).collect();
    if path.iter().any(String::is_empty) {
        return Err(Failure::config(format!("override key `{key}` is malformed")));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_owned()));
    Ok((path, value))
}

fn apply_override(table: &mut toml::Table, path: &[String], value: toml::Value) -> Result<(), Failure> {
    let (last, parents) = path.split_last().expect("nonempty path");
    let mut node = table;
    for key in parents {
        let entry = node
            .entry(key.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| Failure::config(format!("`{key}` in `{}` is not a table", path.join("."))))?;
    }
    node.insert(last.clone(), value);
    Ok(())
}

/// Overlays `user` on `base` table by table; arrays and a profile that names
/// its `kind` replace the default outright.
fn merge(base: &mut toml::Table, user: toml::Table) {
    for (key, value) in user {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(u)) if !(key == "profile" && u.contains_key("kind")) => {
                merge(b, u)
            }
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

pub fn load(
    kind: Kind,
    file: Option<&Path>,
    overrides: &[String],
    out: Option<&Path>,
) -> Result<ExperimentConfig, Failure> {
    let mut table = match file {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::io(format!("cannot read {}: {e}", path.display())))?;
            toml::from_str::<toml::Table>(&text)
                .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?
        }
        None => toml::Table::new(),
    };
    for item in overrides {
        let (path, value) = parse_override(item)?;
        apply_override(&mut table, &path, value)?;
    }
    let mut resolved = toml::Table::try_from(ExperimentConfig::default()).expect("defaults serialize");
    merge(&mut resolved, table);
    let mut cfg: ExperimentConfig = toml::Value::Table(resolved)
        .try_into()
        .map_err(|e: toml::de::Error| Failure::config(e.message().to_owned()))?;
    match &cfg.kind {
        Some(k) if k != kind.name() => {
            return Err(Failure::config(format!(
                "config is for `{k}`, not `{}`",
                kind.name()
            )))
        }
        _ => cfg.kind = Some(kind.name().to_owned()),
    }
    if let Some(dir) = out {
        cfg.output_dir = Some(dir.to_path_buf());
    } else if cfg.output_dir.is_none() {
        cfg.output_dir = Some(PathBuf::from("runs").join(kind.name()));
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_parse_as_toml_or_text() {
        let (p, v) = parse_override("params.p2=7/3").unwrap();
        assert_eq!(p, ["params", "p2"]);
        assert_eq!(v, toml::Value::String("7/3".into()));
        let (_, v) = parse_override("grid.nx = 65").unwrap();
        assert_eq!(v, toml::Value::Integer(65));
        let (_, v) = parse_override("phase_scan.p1={lo=2.0, hi=3.0, count=2}").unwrap();
        assert!(v.is_table());
        assert!(parse_override("novalue").is_err());
    }

    #[test]
    fn exact_params_follow_the_written_decimals() {
        let mut p = ParamsConfig {
            p2: Scalar::Text("7/3".into()),
            ..ParamsConfig::default()
        };
        let exact = p.exact().unwrap().unwrap();
        assert_eq!(*exact.p2.numer(), 7);
        assert_eq!(*exact.gamma.denom(), 2);
        p.gamma = Scalar::Text("x".into());
        assert!(p.exact().is_err());
    }

    #[test]
    fn kind_mismatch_is_rejected() {
        let err = load(Kind::Solve, None, &["kind=\"exponents\"".into()], None).unwrap_err();
        assert_eq!(err.kind, "invalid_config");
        let ok = load(Kind::Solve, None, &[], None).unwrap();
        assert_eq!(ok.output_dir(), Path::new("runs/solve"));
        assert!(load(Kind::Solve, None, &["grid.nx=4".into()], None).is_err());
        assert!(load(Kind::Solve, None, &["gird.nx=40".into()], None).is_err());
    }
}
