//! Flat `key = value` run configuration and the kernel-spec config section.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::error::{config_err, Result};
use crate::kernel::{Coefficient, HorizonField, KernelSpec, ProfileFamily, RadialProfile};
use crate::solve::Method;

/// Largest matching order accepted from the command line.
pub const MAX_SPLIT_ORDER: u32 = 8;

/// Parses `key = value` lines. Blank lines and `#` comments are skipped.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| config_err(format!("line {}: expected key = value", lineno + 1)))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| config_err(format!("invalid value '{v}' for {key}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(config_err(format!("invalid value '{v}' for {key}"))),
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_num(key, s.trim()))
        .collect()
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    InverseS,
    ConicalInverseS,
    Regularized,
    PolynomialTruncated,
}

impl std::str::FromStr for ProfileKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "inverses" => Ok(Self::InverseS),
            "conicalinverses" | "conical" => Ok(Self::ConicalInverseS),
            "regularized" => Ok(Self::Regularized),
            "polynomialtruncated" | "polynomial" => Ok(Self::PolynomialTruncated),
            _ => Err(config_err(format!("unknown profile '{s}'"))),
        }
    }
}

impl std::fmt::Display for ProfileKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::InverseS => "InverseS",
            Self::ConicalInverseS => "ConicalInverseS",
            Self::Regularized => "Regularized",
            Self::PolynomialTruncated => "PolynomialTruncated",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HorizonKind {
    Constant,
    Bump,
}

impl std::str::FromStr for HorizonKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "constant" => Ok(Self::Constant),
            "bump" | "gaussianbump" | "gaussian" => Ok(Self::Bump),
            _ => Err(config_err(format!("unknown horizon kind '{s}'"))),
        }
    }
}

impl std::fmt::Display for HorizonKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Constant => "constant",
            Self::Bump => "bump",
        })
    }
}

/// Right-hand side of the `solve` command.
#[derive(Debug, Clone, PartialEq)]
pub enum RhsChoice {
    Manufactured,
    Constant(f64),
    /// One value per line (or the last column of a CSV row).
    File(PathBuf),
}

impl std::str::FromStr for RhsChoice {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "manufactured" {
            Ok(Self::Manufactured)
        } else if s == "constant" {
            Ok(Self::Constant(1.0))
        } else if let Some(v) = s.strip_prefix("constant:") {
            Ok(Self::Constant(parse_num("rhs", v)?))
        } else if let Some(p) = s.strip_prefix("file:") {
            Ok(Self::File(PathBuf::from(p)))
        } else {
            Err(config_err(format!(
                "rhs must be manufactured, constant[:value] or file:<path>, got '{s}'"
            )))
        }
    }
}

impl std::fmt::Display for RhsChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Manufactured => f.write_str("manufactured"),
            Self::Constant(v) => write!(f, "constant:{v}"),
            Self::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

/// Every tunable of a CLI run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dimension: usize,
    pub n: usize,
    pub delta0: f64,
    pub horizon_kind: HorizonKind,
    pub profile: ProfileKind,
    pub regularity_k: u32,
    pub split_k: u32,
    pub coefficient: f64,
    pub epsilon: f64,
    pub leaf_size: usize,
    pub tol: f64,
    pub max_iter: Option<usize>,
    pub method: Method,
    pub seed: u64,
    pub sweep: Vec<usize>,
    pub regularities: Vec<i32>,
    pub rhs: RhsChoice,
    /// Record wall-clock columns; off gives byte-identical output across runs.
    pub timing: bool,
    pub output_path: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dimension: 1,
            n: 256,
            delta0: 0.25,
            horizon_kind: HorizonKind::Constant,
            profile: ProfileKind::InverseS,
            regularity_k: 0,
            split_k: 0,
            coefficient: 1.0,
            epsilon: 1e-8,
            leaf_size: crate::compress::DEFAULT_LEAF_SIZE,
            tol: 1e-10,
            max_iter: None,
            method: Method::Auto,
            seed: 0,
            sweep: Vec::new(),
            regularities: vec![-1, 0, 1, 2, 3],
            rhs: RhsChoice::Manufactured,
            timing: true,
            output_path: None,
        }
    }
}

impl RunConfig {
    /// Overrides fields from `key = value` pairs; unknown keys are an error.
    pub fn apply_pairs(&mut self, pairs: &BTreeMap<String, String>) -> Result<()> {
        for (k, v) in pairs {
            let v = v.as_str();
            match k.as_str() {
                "dimension" => self.dimension = parse_num(k, v)?,
                "n" => self.n = parse_num(k, v)?,
                "delta0" => self.delta0 = parse_num(k, v)?,
                "horizon_kind" => self.horizon_kind = v.parse()?,
                "profile" => self.profile = v.parse()?,
                "regularity_k" => self.regularity_k = parse_num(k, v)?,
                "split_K" => self.split_k = parse_num(k, v)?,
                "coefficient" => self.coefficient = parse_num(k, v)?,
                "epsilon" => self.epsilon = parse_num(k, v)?,
                "leaf_size" => self.leaf_size = parse_num(k, v)?,
                "tol" => self.tol = parse_num(k, v)?,
                "max_iter" => self.max_iter = Some(parse_num(k, v)?),
                "method" => self.method = v.parse()?,
                "seed" => self.seed = parse_num(k, v)?,
                "sweep" => self.sweep = parse_list(k, v)?,
                "regularities" => self.regularities = parse_list(k, v)?,
                "rhs" => self.rhs = v.parse()?,
                "timing" => self.timing = parse_bool(k, v)?,
                "output_path" => self.output_path = Some(PathBuf::from(v)),
                _ => return Err(config_err(format!("unknown config key '{k}'"))),
            }
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_pairs(&parse_key_values(text)?)?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dimension) {
            return Err(config_err(format!("dimension must be 1, 2 or 3, got {}", self.dimension)));
        }
        for &n in std::iter::once(&self.n).chain(&self.sweep) {
            if n < 2 || !n.is_power_of_two() {
                return Err(config_err(format!("n must be a power of 2, got {n}")));
            }
        }
        if !(self.delta0 > 0.0 && self.delta0.is_finite()) {
            return Err(config_err(format!("delta0 must be positive, got {}", self.delta0)));
        }
        if self.split_k > MAX_SPLIT_ORDER || self.regularity_k > MAX_SPLIT_ORDER {
            return Err(config_err(format!("matching order above {MAX_SPLIT_ORDER} is not supported")));
        }
        if !(self.epsilon > 0.0) {
            return Err(config_err("epsilon must be positive"));
        }
        if !(self.tol > 0.0) {
            return Err(config_err("tol must be positive"));
        }
        if !(self.coefficient > 0.0 && self.coefficient.is_finite()) {
            return Err(config_err("coefficient must be positive"));
        }
        if self.leaf_size == 0 {
            return Err(config_err("leaf_size must be positive"));
        }
        if self.regularities.iter().any(|&k| k < -1 || k > MAX_SPLIT_ORDER as i32) {
            return Err(config_err("regularities must lie in -1..=8"));
        }
        Ok(())
    }

    pub fn horizon(&self) -> HorizonField {
        match self.horizon_kind {
            HorizonKind::Constant => HorizonField::Constant(self.delta0),
            HorizonKind::Bump => HorizonField::GaussianBump(self.delta0),
        }
    }

    pub fn radial_profile(&self) -> Result<RadialProfile> {
        RadialProfile::new(match self.profile {
            ProfileKind::InverseS => ProfileFamily::InverseS,
            ProfileKind::ConicalInverseS => ProfileFamily::ConicalInverseS,
            ProfileKind::Regularized => ProfileFamily::Regularized(self.regularity_k),
            ProfileKind::PolynomialTruncated => ProfileFamily::PolynomialTruncated(self.split_k),
        })
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec> {
        KernelSpec::new(self.dimension, self.radial_profile()?, self.horizon())?
            .with_coefficient(Coefficient::Constant(self.coefficient))
    }

    /// The polynomial-truncated kernel `p^{2K}` used by `apply`, `bench` and `solve`.
    pub fn truncated_spec(&self) -> Result<KernelSpec> {
        KernelSpec::new(
            self.dimension,
            RadialProfile::polynomial_truncated(self.split_k)?,
            self.horizon(),
        )?
        .with_coefficient(Coefficient::Constant(self.coefficient))
    }

    /// Single-line `key=value` rendering, used as the CSV comment line.
    pub fn to_line(&self) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "dimension={} n={} delta0={} horizon_kind={} profile={} regularity_k={} split_K={} \
             coefficient={} epsilon={} leaf_size={} tol={} method={} seed={} sweep={} \
             regularities={} rhs={} timing={}",
            self.dimension,
            self.n,
            self.delta0,
            self.horizon_kind,
            self.profile,
            self.regularity_k,
            self.split_k,
            self.coefficient,
            self.epsilon,
            self.leaf_size,
            self.tol,
            self.method,
            self.seed,
            join(&self.sweep),
            join(&self.regularities),
            self.rhs,
            self.timing,
        );
        if let Some(m) = self.max_iter {
            let _ = write!(s, " max_iter={m}");
        }
        s
    }
}

/// Writes the kernel section of a config file.
pub fn kernel_spec_to_config(spec: &KernelSpec) -> Result<String> {
    let (profile, regularity_k, split_k) = match spec.profile.family() {
        ProfileFamily::InverseS => (ProfileKind::InverseS, 0, 0),
        ProfileFamily::ConicalInverseS => (ProfileKind::ConicalInverseS, 0, 0),
        ProfileFamily::Regularized(k) => (ProfileKind::Regularized, k, 0),
        ProfileFamily::PolynomialTruncated(k) => (ProfileKind::PolynomialTruncated, 0, k),
    };
    if spec.profile.scale() != 1.0 {
        return Err(config_err("only unit normalization constants are serializable"));
    }
    let coefficient = match &spec.coefficient {
        Coefficient::Constant(c) => *c,
        Coefficient::Field(_) => return Err(config_err("coefficient fields are not serializable")),
    };
    let (kind, delta0) = match spec.horizon {
        HorizonField::Constant(d) => (HorizonKind::Constant, d),
        HorizonField::GaussianBump(d) => (HorizonKind::Bump, d),
    };
    Ok(format!(
        "dimension = {}\nprofile = {profile}\nregularity_k = {regularity_k}\nsplit_K = {split_k}\n\
         horizon_kind = {kind}\ndelta0 = {delta0}\ncoefficient = {coefficient}\n",
        spec.dimension
    ))
}

pub fn kernel_spec_from_config(text: &str) -> Result<KernelSpec> {
    let pairs = parse_key_values(text)?;
    const KEYS: [&str; 7] = [
        "dimension",
        "profile",
        "regularity_k",
        "split_K",
        "horizon_kind",
        "delta0",
        "coefficient",
    ];
    if let Some(k) = pairs.keys().find(|k| !KEYS.contains(&k.as_str())) {
        return Err(config_err(format!("unknown kernel key '{k}'")));
    }
    let mut c = RunConfig::default();
    c.apply_pairs(&pairs)?;
    c.kernel_spec()
}
