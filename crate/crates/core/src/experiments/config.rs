//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # comment
//! experiment = custom
//! seed = 7
//! objective = logistic
//! n = 10
//! density = 0.4
//! k_max = 500
//!
//! [method.dnc_fast]
//! kind = dnc
//! alpha = 1/L
//! ```
//!
//! Top-level keys come before the first section. A section `[method.X]`
//! declares one method labelled `X`; its `kind` defaults to `X` when `X` is a
//! method name. Step values accept a number, `a/L` or `1/(aL)`.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{LabError, Result};
use crate::solvers::{Momentum, EPS_TARGETS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Fig1Left,
    Fig1Right,
    HardNedic,
    HardUnboundedDnc,
    HardUnboundedDng,
    Diverge1b,
    DivergeCubic,
    Verify,
    Custom,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 9] = [
        ExperimentKind::Fig1Left,
        ExperimentKind::Fig1Right,
        ExperimentKind::HardNedic,
        ExperimentKind::HardUnboundedDnc,
        ExperimentKind::HardUnboundedDng,
        ExperimentKind::Diverge1b,
        ExperimentKind::DivergeCubic,
        ExperimentKind::Verify,
        ExperimentKind::Custom,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Fig1Left => "fig1_left",
            ExperimentKind::Fig1Right => "fig1_right",
            ExperimentKind::HardNedic => "hard_nedic",
            ExperimentKind::HardUnboundedDnc => "hard_unbounded_dnc",
            ExperimentKind::HardUnboundedDng => "hard_unbounded_dng",
            ExperimentKind::Diverge1b => "diverge_1b",
            ExperimentKind::DivergeCubic => "diverge_cubic",
            ExperimentKind::Verify => "verify",
            ExperimentKind::Custom => "custom",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        // `hard_unbounded` alone means the D-NC variant.
        if s == "hard_unbounded" {
            return Ok(ExperimentKind::HardUnboundedDnc);
        }
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown experiment `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodKind {
    Dng,
    Dnc,
    Dsg,
    Centralized,
}

impl FromStr for MethodKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "dng" => Ok(MethodKind::Dng),
            "dnc" => Ok(MethodKind::Dnc),
            "dsg" => Ok(MethodKind::Dsg),
            "centralized" => Ok(MethodKind::Centralized),
            other => Err(format!("unknown method `{other}` (expected dng, dnc, dsg or centralized)")),
        }
    }
}

/// A step parameter, possibly relative to the objective's `L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepValue {
    Abs(f64),
    /// `factor / L`.
    OverL(f64),
}

impl StepValue {
    pub fn resolve(&self, l: Option<f64>) -> std::result::Result<f64, String> {
        match *self {
            StepValue::Abs(v) => Ok(v),
            StepValue::OverL(f) => l
                .map(|l| f / l)
                .ok_or_else(|| "step given relative to L, but the objective declares no L".to_string()),
        }
    }
}

impl FromStr for StepValue {
    type Err = String;

    fn from_str(raw: &str) -> std::result::Result<Self, String> {
        let s: String = raw.chars().filter(|c| !c.is_whitespace()).collect();
        let bad = || format!("`{raw}` is not a number, `a/L` or `1/(aL)`");
        let v = if let Some(inner) = s.strip_prefix("1/(").and_then(|r| r.strip_suffix("L)")) {
            let a: f64 = if inner.is_empty() { 1.0 } else { inner.parse().map_err(|_| bad())? };
            StepValue::OverL(1.0 / a)
        } else if let Some(num) = s.strip_suffix("/L") {
            StepValue::OverL(num.parse().map_err(|_| bad())?)
        } else {
            StepValue::Abs(s.parse().map_err(|_| bad())?)
        };
        let inner = match v {
            StepValue::Abs(x) | StepValue::OverL(x) => x,
        };
        if !(inner.is_finite() && inner > 0.0) {
            return Err(format!("`{raw}` must be positive"));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSpec {
    pub label: String,
    pub kind: MethodKind,
    pub c: Option<StepValue>,
    pub tau: Option<f64>,
    pub alpha: Option<StepValue>,
    /// Safeguard parameter; applied to the weights when present.
    pub eta: Option<f64>,
    pub momentum: Momentum,
    pub k_max: Option<usize>,
    pub keep_every: usize,
}

impl MethodSpec {
    pub fn new(label: &str, kind: MethodKind) -> Self {
        Self {
            label: label.to_string(),
            kind,
            c: None,
            tau: None,
            alpha: None,
            eta: None,
            momentum: Momentum::Nesterov,
            k_max: None,
            keep_every: 1,
        }
    }

    pub fn with_c(mut self, c: StepValue) -> Self {
        self.c = Some(c);
        self
    }

    pub fn with_alpha(mut self, alpha: StepValue) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = Some(tau);
        self
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = Some(eta);
        self
    }

    pub fn with_k_max(mut self, k: usize) -> Self {
        self.k_max = Some(k);
        self
    }
}

/// Deliberate defects injected into `verify` to show that its checks bite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tamper {
    HalveCCons,
    FixedMomentum(f64),
}

impl FromStr for Tamper {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "halve_c_cons" => Ok(Tamper::HalveCCons),
            "fixed_momentum" => Ok(Tamper::FixedMomentum(0.5)),
            other => match other.strip_prefix("fixed_momentum:") {
                Some(v) => v.parse().map(Tamper::FixedMomentum).map_err(|_| format!("bad momentum `{v}`")),
                None => Err(format!("unknown tamper `{other}` (expected halve_c_cons or fixed_momentum[:b])")),
            },
        }
    }
}

/// Network source for custom experiments.
#[derive(Debug, Clone, PartialEq)]
pub enum NetworkSpec {
    Geometric,
    Complete,
    Path,
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub n: Option<usize>,
    pub density: Option<f64>,
    pub network: NetworkSpec,
    /// Placement budget of the geometric generator.
    pub retries: Option<usize>,
    pub objective: Option<String>,
    pub theta: Option<f64>,
    pub thetas: Vec<f64>,
    pub b0: Option<f64>,
    pub k_max: Option<usize>,
    pub targets: Vec<f64>,
    pub x0: Option<Vec<f64>>,
    pub taus: Vec<f64>,
    /// Outer iteration of interest for the unbounded-gradient instances.
    pub k: Option<usize>,
    /// Gap level `M` for the unbounded-gradient instances.
    pub m: Option<f64>,
    pub long: bool,
    pub tamper: Option<Tamper>,
    pub out: Option<PathBuf>,
    pub methods: Vec<MethodSpec>,
}

impl ExperimentConfig {
    /// Defaults for `experiment`; every other field is unset.
    pub fn new(experiment: ExperimentKind, seed: u64) -> Self {
        Self {
            experiment,
            seed,
            n: None,
            density: None,
            network: NetworkSpec::Geometric,
            retries: None,
            objective: None,
            theta: None,
            thetas: Vec::new(),
            b0: None,
            k_max: None,
            targets: EPS_TARGETS.to_vec(),
            x0: None,
            taus: Vec::new(),
            k: None,
            m: None,
            long: false,
            tamper: None,
            out: None,
            methods: Vec::new(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut top: BTreeMap<String, (usize, String)> = BTreeMap::new();
        let mut sections: Vec<(String, usize, BTreeMap<String, (usize, String)>)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(head) = line.strip_prefix('[') {
                let name = head
                    .strip_suffix(']')
                    .and_then(|h| h.trim().strip_prefix("method."))
                    .ok_or_else(|| LabError::Parse {
                        line: line_no,
                        message: format!("expected `[method.NAME]`, found `{line}`"),
                    })?;
                if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                    return Err(LabError::Parse {
                        line: line_no,
                        message: format!("method label `{name}` must be alphanumeric, `_` or `-`"),
                    });
                }
                if sections.iter().any(|s| s.0 == name) {
                    return Err(LabError::Parse { line: line_no, message: format!("duplicate method `{name}`") });
                }
                sections.push((name.to_string(), line_no, BTreeMap::new()));
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| LabError::Parse {
                line: line_no,
                message: format!("expected `key = value`, found `{line}`"),
            })?;
            let (key, value) = (key.trim().to_string(), value.trim().to_string());
            let table = match sections.last_mut() {
                Some(s) => &mut s.2,
                None => &mut top,
            };
            if table.insert(key.clone(), (line_no, value)).is_some() {
                return Err(LabError::Parse { line: line_no, message: format!("duplicate key `{key}`") });
            }
        }

        let experiment: ExperimentKind = take_required(&mut top, "experiment")?;
        let seed: u64 = take_required(&mut top, "seed")?;
        let mut cfg = ExperimentConfig::new(experiment, seed);
        cfg.n = take(&mut top, "n")?;
        cfg.density = take(&mut top, "density")?;
        if let Some((_, v)) = top.remove("network") {
            cfg.network = match v.as_str() {
                "geometric" => NetworkSpec::Geometric,
                "complete" => NetworkSpec::Complete,
                "path" => NetworkSpec::Path,
                other => NetworkSpec::File(PathBuf::from(other)),
            };
        }
        cfg.retries = take(&mut top, "retries")?;
        cfg.objective = take(&mut top, "objective")?;
        cfg.theta = take(&mut top, "theta")?;
        if let Some(v) = take_list(&mut top, "thetas")? {
            cfg.thetas = v;
        }
        cfg.b0 = take(&mut top, "b0")?;
        cfg.k_max = take(&mut top, "k_max")?;
        if let Some(v) = take_list(&mut top, "targets")? {
            cfg.targets = v;
        }
        cfg.x0 = take_list(&mut top, "x0")?;
        if let Some(v) = take_list(&mut top, "taus")? {
            cfg.taus = v;
        }
        cfg.k = take(&mut top, "k")?;
        cfg.m = take(&mut top, "m")?;
        cfg.long = take(&mut top, "long")?.unwrap_or(false);
        cfg.tamper = take(&mut top, "tamper")?;
        cfg.out = take::<String>(&mut top, "out")?.map(PathBuf::from);
        if let Some((key, (line, _))) = top.into_iter().next() {
            return Err(config_err(&key, format!("unknown key (line {line})")));
        }

        for (label, _line, mut table) in sections {
            let kind: MethodKind = match take::<String>(&mut table, "kind")? {
                Some(k) => k.parse().map_err(|m| config_err(&format!("method.{label}.kind"), m))?,
                None => label
                    .parse()
                    .map_err(|_| config_err(&format!("method.{label}.kind"), "missing, and the label is not a method name"))?,
            };
            let mut spec = MethodSpec::new(&label, kind);
            let scoped = |key: &str| format!("method.{label}.{key}");
            spec.c = take(&mut table, "c").map_err(|e| rescope(e, &scoped("c")))?;
            spec.tau = take(&mut table, "tau").map_err(|e| rescope(e, &scoped("tau")))?;
            spec.alpha = take(&mut table, "alpha").map_err(|e| rescope(e, &scoped("alpha")))?;
            spec.eta = take(&mut table, "eta").map_err(|e| rescope(e, &scoped("eta")))?;
            spec.k_max = take(&mut table, "k_max").map_err(|e| rescope(e, &scoped("k_max")))?;
            spec.keep_every = take(&mut table, "keep_every")
                .map_err(|e| rescope(e, &scoped("keep_every")))?
                .unwrap_or(1);
            if let Some(m) = take::<String>(&mut table, "momentum")? {
                spec.momentum = match m.as_str() {
                    "nesterov" => Momentum::Nesterov,
                    v => Momentum::Fixed(
                        v.parse()
                            .map_err(|_| config_err(&scoped("momentum"), format!("`{v}` is neither `nesterov` nor a number")))?,
                    ),
                };
            }
            if let Some((key, (line, _))) = table.into_iter().next() {
                return Err(config_err(&scoped(&key), format!("unknown key (line {line})")));
            }
            cfg.methods.push(spec);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks that every method carries the parameters its kind needs.
    pub fn validate(&self) -> Result<()> {
        for m in &self.methods {
            let need = |present: bool, key: &str| {
                if present {
                    Ok(())
                } else {
                    Err(config_err(&format!("method.{}.{key}", m.label), "required for this method kind"))
                }
            };
            match m.kind {
                MethodKind::Dng => need(m.c.is_some(), "c")?,
                MethodKind::Dnc => need(m.alpha.is_some(), "alpha")?,
                MethodKind::Dsg => {
                    need(m.c.is_some(), "c")?;
                    need(m.tau.is_some(), "tau")?;
                }
                MethodKind::Centralized => need(m.c.is_some() || m.alpha.is_some(), "c")?,
            }
            if let Some(eta) = m.eta {
                if !(eta > 0.0 && eta < 1.0) {
                    return Err(config_err(&format!("method.{}.eta", m.label), format!("{eta} not in (0, 1)")));
                }
            }
            if m.keep_every == 0 {
                return Err(config_err(&format!("method.{}.keep_every", m.label), "must be at least 1"));
            }
        }
        if let Some(d) = self.density {
            if !(d > 0.0 && d <= 1.0) {
                return Err(config_err("density", format!("{d} not in (0, 1]")));
            }
        }
        if self.targets.iter().any(|t| !(*t > 0.0)) {
            return Err(config_err("targets", "targets must be positive"));
        }
        Ok(())
    }
}

fn config_err(key: &str, message: impl Into<String>) -> LabError {
    LabError::Config { key: key.to_string(), message: message.into() }
}

fn rescope(e: LabError, key: &str) -> LabError {
    match e {
        LabError::Config { message, .. } => config_err(key, message),
        other => other,
    }
}

fn take<T: FromStr>(table: &mut BTreeMap<String, (usize, String)>, key: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match table.remove(key) {
        None => Ok(None),
        Some((line, v)) => v
            .parse()
            .map(Some)
            .map_err(|e| config_err(key, format!("line {line}: cannot parse `{v}`: {e}"))),
    }
}

fn take_required<T: FromStr>(table: &mut BTreeMap<String, (usize, String)>, key: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    take(table, key)?.ok_or_else(|| config_err(key, "required key is missing"))
}

fn take_list(table: &mut BTreeMap<String, (usize, String)>, key: &str) -> Result<Option<Vec<f64>>> {
    match table.remove(key) {
        None => Ok(None),
        Some((line, v)) => v
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(Some)
            .map_err(|e| config_err(key, format!("line {line}: cannot parse `{v}`: {e}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_values() {
        assert_eq!("0.5/L".parse::<StepValue>().unwrap(), StepValue::OverL(0.5));
        assert_eq!("1/(2L)".parse::<StepValue>().unwrap(), StepValue::OverL(0.5));
        assert_eq!("1/L".parse::<StepValue>().unwrap(), StepValue::OverL(1.0));
        assert_eq!("0.25".parse::<StepValue>().unwrap(), StepValue::Abs(0.25));
        assert!("-1".parse::<StepValue>().is_err());
        assert!("x/L".parse::<StepValue>().is_err());
    }

    #[test]
    fn parses_sections() {
        let cfg = ExperimentConfig::parse(
            "experiment = custom\nseed = 3\nobjective = logistic # inline\n\n[method.dng]\nc = 1\neta = 0.1\n[method.fast]\nkind = dnc\nalpha = 1/L\n",
        )
        .unwrap();
        assert_eq!(cfg.methods.len(), 2);
        assert_eq!(cfg.methods[1].kind, MethodKind::Dnc);
        assert_eq!(cfg.methods[1].alpha, Some(StepValue::OverL(1.0)));
    }

    #[test]
    fn errors_name_the_key() {
        let e = ExperimentConfig::parse("experiment = custom\nseed = 1\nfoo = 2\n").unwrap_err();
        assert!(matches!(e, LabError::Config { ref key, .. } if key == "foo"));
        let e = ExperimentConfig::parse("experiment = custom\n").unwrap_err();
        assert!(matches!(e, LabError::Config { ref key, .. } if key == "seed"));
        let e = ExperimentConfig::parse("experiment = custom\nseed = 1\n[method.newton]\nc = 1\n").unwrap_err();
        assert!(matches!(e, LabError::Config { ref key, .. } if key == "method.newton.kind"));
        let e = ExperimentConfig::parse("experiment = custom\nseed = 1\n[method.dsg]\nc = 1\n").unwrap_err();
        assert!(matches!(e, LabError::Config { ref key, .. } if key == "method.dsg.tau"));
    }
}
