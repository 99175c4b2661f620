//! Experiment configuration: flat `key = value` sections, validated in full
//! before anything runs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ini::Ini;
use linfid_core::forward::Manufactured;
use linfid_core::functional::RegularisationParams;
use linfid_core::Interval;
use serde::Serialize;
use thiserror::Error;

pub const DEFAULT_LADDER: [f64; 5] = [4.0, 8.0, 16.0, 32.0, 64.0];
pub const DEFAULT_TOL: (f64, f64) = (1e-4, 1e-7);
pub const DEFAULT_MAX_ITER: usize = 2000;
pub const DEFAULT_RESOLUTION: usize = 33;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(String),
    #[error("unknown section [{0}]")]
    UnknownSection(String),
    #[error("unknown key `{key}` in [{section}]")]
    UnknownKey { section: String, key: String },
    #[error("duplicate key `{0}`")]
    Duplicate(String),
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: String, reason: String },
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        reason: reason.into(),
    }
}

const SCHEMA: &[(&str, &[&str])] = &[
    ("domain", &["n", "extents", "resolution"]),
    ("operators", &["F.name", "F.params", "K.name", "K.params"]),
    ("measurement", &["kind", "spec", "kappa"]),
    ("regularisation", &["alpha", "beta", "gamma", "p_ladder"]),
    ("optimizer", &["tol_schedule", "max_iter"]),
    ("data", &["mode", "u0.name", "seed", "path", "boundary"]),
    ("output", &["dir"]),
];

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum SourceSpec {
    Laplacian,
    LinearDivergence { a: Vec<f64>, b: Vec<f64>, c: f64 },
    LinearNondivergence { a: Vec<f64>, b: Vec<f64>, c: f64 },
    FullyNonlinearEps { eps: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ObservationSpec {
    ObsIdentity,
    ObsFlux { b: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementKind {
    Points,
    Line,
    Subdomain,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasurementSpec {
    pub kind: MeasurementKind,
    /// Points, segment endpoints, or per-axis `(lo, hi)` pairs.
    pub spec: Vec<Vec<f64>>,
    pub kappa: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DataSpec {
    Manufactured {
        u0: String,
        seed: u64,
    },
    External {
        path: PathBuf,
        boundary: String,
        seed: u64,
    },
}

impl DataSpec {
    pub fn seed(&self) -> u64 {
        match self {
            DataSpec::Manufactured { seed, .. } | DataSpec::External { seed, .. } => *seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Config {
    pub n: usize,
    pub extents: Vec<Interval>,
    pub resolution: Vec<usize>,
    pub source: SourceSpec,
    pub observation: ObservationSpec,
    pub measurement: MeasurementSpec,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub p_ladder: Vec<f64>,
    pub tol_schedule: Vec<f64>,
    pub max_iter: usize,
    pub data: DataSpec,
    pub output_dir: PathBuf,
}

fn numbers(key: &str, raw: &str) -> Result<Vec<f64>, ConfigError> {
    raw.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| invalid(key, format!("`{t}` is not a finite number")))
        })
        .collect()
}

fn groups(key: &str, raw: &str) -> Result<Vec<Vec<f64>>, ConfigError> {
    raw.split(';')
        .map(str::trim)
        .filter(|g| !g.is_empty())
        .map(|g| numbers(key, g))
        .collect()
}

fn number(key: &str, raw: &str) -> Result<f64, ConfigError> {
    match numbers(key, raw)?.as_slice() {
        [v] => Ok(*v),
        _ => Err(invalid(key, "expected one number")),
    }
}

fn integer<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T, ConfigError> {
    raw.trim().parse().map_err(|_| {
        invalid(
            key,
            format!("`{}` is not a non-negative integer", raw.trim()),
        )
    })
}

/// `name=v v v; name=v` parameter lists.
fn named_params(key: &str, raw: &str) -> Result<BTreeMap<String, Vec<f64>>, ConfigError> {
    let mut out = BTreeMap::new();
    for part in raw.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (name, vals) = part
            .split_once('=')
            .ok_or_else(|| invalid(key, format!("`{part}` is not name=values")))?;
        if out
            .insert(name.trim().to_string(), numbers(key, vals)?)
            .is_some()
        {
            return Err(invalid(
                key,
                format!("parameter `{}` repeated", name.trim()),
            ));
        }
    }
    Ok(out)
}

fn take(
    params: &mut BTreeMap<String, Vec<f64>>,
    key: &str,
    name: &str,
    len: usize,
    default: Option<Vec<f64>>,
) -> Result<Vec<f64>, ConfigError> {
    match params.remove(name) {
        Some(v) if v.len() == len => Ok(v),
        Some(v) => Err(invalid(
            key,
            format!("`{name}` needs {len} values, got {}", v.len()),
        )),
        None => default.ok_or_else(|| invalid(key, format!("missing parameter `{name}`"))),
    }
}

fn no_leftovers(params: BTreeMap<String, Vec<f64>>, key: &str) -> Result<(), ConfigError> {
    match params.keys().next() {
        Some(k) => Err(invalid(key, format!("unknown parameter `{k}`"))),
        None => Ok(()),
    }
}

fn parse_source(name: &str, raw: &str, n: usize) -> Result<SourceSpec, ConfigError> {
    let key = "F.params";
    let mut p = named_params(key, raw)?;
    let identity: Vec<f64> = (0..n * n)
        .map(|k| if k % (n + 1) == 0 { 1.0 } else { 0.0 })
        .collect();
    let spec = match name {
        "laplacian" => SourceSpec::Laplacian,
        "linear_divergence" | "linear_nondivergence" => {
            let a = take(&mut p, key, "A", n * n, Some(identity))?;
            let b = take(&mut p, key, "b", n, Some(vec![0.0; n]))?;
            let c = take(&mut p, key, "c", 1, Some(vec![0.0]))?[0];
            if name == "linear_divergence" {
                SourceSpec::LinearDivergence { a, b, c }
            } else {
                SourceSpec::LinearNondivergence { a, b, c }
            }
        }
        "fully_nonlinear_eps" => SourceSpec::FullyNonlinearEps {
            eps: take(&mut p, key, "eps", 1, None)?[0],
        },
        other => return Err(invalid("F.name", format!("unknown operator `{other}`"))),
    };
    no_leftovers(p, key)?;
    Ok(spec)
}

fn parse_observation(name: &str, raw: &str, n: usize) -> Result<ObservationSpec, ConfigError> {
    let key = "K.params";
    let mut p = named_params(key, raw)?;
    let spec = match name {
        "obs_identity" => ObservationSpec::ObsIdentity,
        "obs_flux" => ObservationSpec::ObsFlux {
            b: take(&mut p, key, "b", n, None)?,
        },
        other => return Err(invalid("K.name", format!("unknown operator `{other}`"))),
    };
    no_leftovers(p, key)?;
    Ok(spec)
}

/// Raw section/key view with schema checks applied.
struct Raw(BTreeMap<(String, String), String>);

impl Raw {
    fn from_ini(ini: &Ini) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (section, props) in ini.iter() {
            let Some(section) = section else {
                if let Some((k, _)) = props.iter().next() {
                    return Err(ConfigError::UnknownKey {
                        section: "<none>".into(),
                        key: k.into(),
                    });
                }
                continue;
            };
            let allowed = SCHEMA
                .iter()
                .find(|(s, _)| *s == section)
                .ok_or_else(|| ConfigError::UnknownSection(section.to_string()))?
                .1;
            for (k, v) in props.iter() {
                if !allowed.contains(&k) {
                    return Err(ConfigError::UnknownKey {
                        section: section.into(),
                        key: k.into(),
                    });
                }
                if map
                    .insert((section.to_string(), k.to_string()), v.trim().to_string())
                    .is_some()
                {
                    return Err(ConfigError::Duplicate(k.to_string()));
                }
            }
        }
        Ok(Raw(map))
    }

    fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.0
            .get(&(section.to_string(), key.to_string()))
            .map(String::as_str)
            .filter(|v| !v.is_empty())
    }

    fn require(&self, section: &str, key: &str) -> Result<&str, ConfigError> {
        self.get(section, key)
            .ok_or_else(|| ConfigError::Missing(key.to_string()))
    }
}

impl Config {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
        let mut cfg = Self::parse(&text, stem)?;
        if let DataSpec::External { path: p, .. } = &mut cfg.data {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    /// Parses configuration text; `stem` names the default output directory.
    pub fn parse(text: &str, stem: &str) -> Result<Self, ConfigError> {
        let ini = Ini::load_from_str(text).map_err(|e| ConfigError::Io(e.to_string()))?;
        let raw = Raw::from_ini(&ini)?;

        let n: usize = raw
            .get("domain", "n")
            .map(|v| integer("n", v))
            .transpose()?
            .unwrap_or(2);
        if !(1..=2).contains(&n) {
            return Err(invalid("n", "dimension must be 1 or 2"));
        }
        let extents = match raw.get("domain", "extents") {
            Some(v) => {
                let e = numbers("extents", v)?;
                if e.len() != 2 * n {
                    return Err(invalid("extents", format!("expected {} numbers", 2 * n)));
                }
                e.chunks(2).map(|c| Interval::new(c[0], c[1])).collect()
            }
            None => vec![Interval::new(0.0, 1.0); n],
        };
        let resolution = match raw.get("domain", "resolution") {
            Some(v) => {
                let r: Vec<usize> = v
                    .split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|t| !t.is_empty())
                    .map(|t| integer("resolution", t))
                    .collect::<Result<_, _>>()?;
                match r.len() {
                    1 => vec![r[0]; n],
                    l if l == n => r,
                    _ => return Err(invalid("resolution", format!("expected 1 or {n} values"))),
                }
            }
            None => vec![DEFAULT_RESOLUTION; n],
        };

        let source = parse_source(
            raw.require("operators", "F.name")?,
            raw.get("operators", "F.params").unwrap_or(""),
            n,
        )?;
        let observation = parse_observation(
            raw.require("operators", "K.name")?,
            raw.get("operators", "K.params").unwrap_or(""),
            n,
        )?;

        let mode = raw.get("data", "mode").unwrap_or("manufactured");
        let seed: u64 = raw
            .get("data", "seed")
            .map(|v| integer("seed", v))
            .transpose()?
            .unwrap_or(0);
        let data = match mode {
            "manufactured" => {
                if raw.get("data", "path").is_some() {
                    return Err(invalid("path", "only used in external mode"));
                }
                let u0 = raw
                    .get("data", "u0.name")
                    .unwrap_or("sin_product")
                    .to_string();
                if Manufactured::from_name(&u0).is_none() {
                    return Err(invalid(
                        "u0.name",
                        format!("unknown manufactured solution `{u0}`"),
                    ));
                }
                DataSpec::Manufactured { u0, seed }
            }
            "external" => {
                let path = PathBuf::from(raw.require("data", "path")?);
                let boundary = raw.get("data", "boundary").unwrap_or("zero").to_string();
                if Manufactured::from_name(&boundary).is_none() {
                    return Err(invalid(
                        "boundary",
                        format!("unknown manufactured solution `{boundary}`"),
                    ));
                }
                if raw.get("data", "u0.name").is_some() {
                    return Err(invalid("u0.name", "no exact solution in external mode"));
                }
                DataSpec::External {
                    path,
                    boundary,
                    seed,
                }
            }
            other => {
                return Err(invalid(
                    "mode",
                    format!("`{other}` is not manufactured or external"),
                ))
            }
        };

        let kind = match raw.require("measurement", "kind")? {
            "points" => MeasurementKind::Points,
            "line" => MeasurementKind::Line,
            "subdomain" => MeasurementKind::Subdomain,
            other => {
                return Err(invalid(
                    "kind",
                    format!("`{other}` is not points, line or subdomain"),
                ))
            }
        };
        let spec = match (&data, raw.get("measurement", "spec")) {
            (DataSpec::External { .. }, Some(_)) => {
                return Err(invalid(
                    "spec",
                    "external measurements carry their own locations",
                ))
            }
            (DataSpec::External { .. }, None) => Vec::new(),
            (_, Some(v)) => groups("spec", v)?,
            (_, None) => return Err(ConfigError::Missing("spec".into())),
        };
        if matches!(data, DataSpec::External { .. }) && kind != MeasurementKind::Points {
            return Err(invalid("kind", "external measurements are points"));
        }
        let expected_kappa = match kind {
            MeasurementKind::Points => 0,
            MeasurementKind::Line => 1,
            MeasurementKind::Subdomain => n,
        };
        let kappa = match raw.get("measurement", "kappa") {
            Some(v) => {
                let k: usize = integer("kappa", v)?;
                if k != expected_kappa {
                    return Err(invalid(
                        "kappa",
                        format!("{kind:?} carriers have dimension {expected_kappa}"),
                    ));
                }
                k
            }
            None => expected_kappa,
        };
        let arity = match kind {
            MeasurementKind::Subdomain => 2,
            _ => n,
        };
        if let Some(g) = spec.iter().find(|g| g.len() != arity) {
            return Err(invalid(
                "spec",
                format!("group {g:?} should have {arity} numbers"),
            ));
        }
        match kind {
            MeasurementKind::Line if spec.len() != 2 => {
                return Err(invalid("spec", "a line needs two endpoints"))
            }
            MeasurementKind::Subdomain if spec.len() != n => {
                return Err(invalid("spec", format!("a subdomain needs {n} intervals")))
            }
            MeasurementKind::Points
                if spec.is_empty() && matches!(data, DataSpec::Manufactured { .. }) =>
            {
                return Err(invalid("spec", "no points"))
            }
            _ => {}
        }
        let measurement = MeasurementSpec { kind, spec, kappa };

        let alpha = number("alpha", raw.require("regularisation", "alpha")?)?;
        let beta = number("beta", raw.require("regularisation", "beta")?)?;
        let gamma = raw
            .get("regularisation", "gamma")
            .map(|v| number("gamma", v))
            .transpose()?
            .unwrap_or(0.0);
        let p_ladder = match raw.get("regularisation", "p_ladder") {
            Some(v) => numbers("p_ladder", v)?,
            None => DEFAULT_LADDER.to_vec(),
        };
        RegularisationParams::new(alpha, beta, gamma, p_ladder.clone(), n).map_err(
            |e| match e {
                linfid_core::Error::Param { name, reason } => invalid(name, reason),
                other => invalid("regularisation", other.to_string()),
            },
        )?;

        let tol_schedule = match raw.get("optimizer", "tol_schedule") {
            None => linfid_core::optimizer::geometric_schedule(
                DEFAULT_TOL.0,
                DEFAULT_TOL.1,
                p_ladder.len(),
            ),
            Some(v) => {
                let t = numbers("tol_schedule", v)?;
                if t.iter().any(|&x| !(x > 0.0)) {
                    return Err(invalid("tol_schedule", "tolerances must be positive"));
                }
                match t.len() {
                    1 => vec![t[0]; p_ladder.len()],
                    l if l == p_ladder.len() => t,
                    2 => linfid_core::optimizer::geometric_schedule(t[0], t[1], p_ladder.len()),
                    _ => {
                        return Err(invalid(
                            "tol_schedule",
                            format!("give 1, 2 (endpoints) or {} values", p_ladder.len()),
                        ))
                    }
                }
            }
        };
        let max_iter = raw
            .get("optimizer", "max_iter")
            .map(|v| integer("max_iter", v))
            .transpose()?
            .unwrap_or(DEFAULT_MAX_ITER);
        if max_iter == 0 {
            return Err(invalid("max_iter", "must be positive"));
        }
        let output_dir = raw
            .get("output", "dir")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("runs").join(stem));

        Ok(Config {
            n,
            extents,
            resolution,
            source,
            observation,
            measurement,
            alpha,
            beta,
            gamma,
            p_ladder,
            tol_schedule,
            max_iter,
            data,
            output_dir,
        })
    }

    pub fn params(&self) -> RegularisationParams {
        RegularisationParams::new(
            self.alpha,
            self.beta,
            self.gamma,
            self.p_ladder.clone(),
            self.n,
        )
        .expect("validated at parse time")
    }

    /// The effective configuration, every default filled, in the input format.
    pub fn to_ini(&self) -> String {
        let join = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:?}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let groups = |g: &[Vec<f64>]| g.iter().map(|v| join(v)).collect::<Vec<_>>().join("; ");
        let mut s = String::new();
        let ext: Vec<f64> = self.extents.iter().flat_map(|i| [i.lo, i.hi]).collect();
        let res: Vec<String> = self.resolution.iter().map(|r| r.to_string()).collect();
        let _ = writeln!(
            s,
            "[domain]\nn = {}\nextents = {}\nresolution = {}\n",
            self.n,
            join(&ext),
            res.join(" ")
        );
        let (fname, fparams) = match &self.source {
            SourceSpec::Laplacian => ("laplacian", String::new()),
            SourceSpec::LinearDivergence { a, b, c } => (
                "linear_divergence",
                format!("A={}; b={}; c={c:?}", join(a), join(b)),
            ),
            SourceSpec::LinearNondivergence { a, b, c } => (
                "linear_nondivergence",
                format!("A={}; b={}; c={c:?}", join(a), join(b)),
            ),
            SourceSpec::FullyNonlinearEps { eps } => {
                ("fully_nonlinear_eps", format!("eps={eps:?}"))
            }
        };
        let (kname, kparams) = match &self.observation {
            ObservationSpec::ObsIdentity => ("obs_identity", String::new()),
            ObservationSpec::ObsFlux { b } => ("obs_flux", format!("b={}", join(b))),
        };
        let _ = writeln!(
            s,
            "[operators]\nF.name = {fname}\nF.params = {fparams}\nK.name = {kname}\nK.params = {kparams}\n"
        );
        let kind = match self.measurement.kind {
            MeasurementKind::Points => "points",
            MeasurementKind::Line => "line",
            MeasurementKind::Subdomain => "subdomain",
        };
        let _ = write!(s, "[measurement]\nkind = {kind}\n");
        if !self.measurement.spec.is_empty() {
            let _ = writeln!(s, "spec = {}", groups(&self.measurement.spec));
        }
        let _ = writeln!(s, "kappa = {}\n", self.measurement.kappa);
        let _ = writeln!(
            s,
            "[regularisation]\nalpha = {:?}\nbeta = {:?}\ngamma = {:?}\np_ladder = {}\n",
            self.alpha,
            self.beta,
            self.gamma,
            join(&self.p_ladder)
        );
        let _ = writeln!(
            s,
            "[optimizer]\ntol_schedule = {}\nmax_iter = {}\n",
            join(&self.tol_schedule),
            self.max_iter
        );
        match &self.data {
            DataSpec::Manufactured { u0, seed } => {
                let _ = writeln!(
                    s,
                    "[data]\nmode = manufactured\nu0.name = {u0}\nseed = {seed}\n"
                );
            }
            DataSpec::External {
                path,
                boundary,
                seed,
            } => {
                let _ = writeln!(
                    s,
                    "[data]\nmode = external\npath = {}\nboundary = {boundary}\nseed = {seed}\n",
                    path.display()
                );
            }
        }
        let _ = writeln!(s, "[output]\ndir = {}", self.output_dir.display());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "
[operators]
F.name = laplacian
K.name = obs_identity
[measurement]
kind = points
spec = 0.5 0.5
[regularisation]
alpha = 0.01
beta = 1e-6
";

    #[test]
    fn minimal_config_gets_defaults() {
        let c = Config::parse(MINIMAL, "mini").unwrap();
        assert_eq!(c.n, 2);
        assert_eq!(c.resolution, vec![33, 33]);
        assert_eq!(c.p_ladder, DEFAULT_LADDER.to_vec());
        assert_eq!(c.tol_schedule.len(), 5);
        assert!((c.tol_schedule[0] - 1e-4).abs() < 1e-18);
        assert!((c.tol_schedule[4] - 1e-7).abs() < 1e-20);
        assert_eq!(c.gamma, 0.0);
        assert_eq!(c.output_dir, PathBuf::from("runs/mini"));
        assert_eq!(c.measurement.kappa, 0);
        assert_eq!(
            c.data,
            DataSpec::Manufactured {
                u0: "sin_product".into(),
                seed: 0
            }
        );
        // the echo parses back to the same configuration
        assert_eq!(Config::parse(&c.to_ini(), "other").unwrap(), c);
    }

    #[test]
    fn missing_beta_is_named() {
        let text = MINIMAL.replace("beta = 1e-6\n", "");
        let err = Config::parse(&text, "x").unwrap_err();
        assert_eq!(err, ConfigError::Missing("beta".into()));
        assert!(err.to_string().contains("beta"));
    }

    #[test]
    fn ladder_must_increase() {
        let text = format!("{MINIMAL}p_ladder = 8 4\n");
        let err = Config::parse(&text, "x").unwrap_err();
        assert!(err.to_string().contains("ladder not increasing"), "{err}");
    }

    #[test]
    fn nonpositive_alpha_rejected() {
        for a in ["0", "-1"] {
            let text = MINIMAL.replace("alpha = 0.01", &format!("alpha = {a}"));
            let err = Config::parse(&text, "x").unwrap_err();
            assert!(err.to_string().contains("alpha"), "{err}");
        }
    }

    #[test]
    fn unknown_keys_and_sections_rejected() {
        let err = Config::parse(&format!("{MINIMAL}lambda = 3\n"), "x").unwrap_err();
        assert_eq!(
            err,
            ConfigError::UnknownKey {
                section: "regularisation".into(),
                key: "lambda".into()
            }
        );
        let err = Config::parse(&format!("{MINIMAL}[solver]\nfoo = 1\n"), "x").unwrap_err();
        assert_eq!(err, ConfigError::UnknownSection("solver".into()));
    }

    #[test]
    fn operator_parameters() {
        let text = MINIMAL
            .replace(
                "F.name = laplacian",
                "F.name = fully_nonlinear_eps\nF.params = eps=0.25",
            )
            .replace(
                "K.name = obs_identity",
                "K.name = obs_flux\nK.params = b=0.5 -1",
            );
        let c = Config::parse(&text, "x").unwrap();
        assert_eq!(c.source, SourceSpec::FullyNonlinearEps { eps: 0.25 });
        assert_eq!(
            c.observation,
            ObservationSpec::ObsFlux { b: vec![0.5, -1.0] }
        );
        let bad = text.replace("b=0.5 -1", "b=0.5");
        assert!(Config::parse(&bad, "x").is_err());
        let unknown = text.replace("eps=0.25", "eps=0.25; delta=1");
        assert!(Config::parse(&unknown, "x")
            .unwrap_err()
            .to_string()
            .contains("delta"));
    }

    #[test]
    fn measurement_shapes() {
        let line = MINIMAL.replace(
            "kind = points\nspec = 0.5 0.5",
            "kind = line\nspec = 0.1 0.5; 0.9 0.5",
        );
        assert_eq!(Config::parse(&line, "x").unwrap().measurement.kappa, 1);
        let sub = MINIMAL.replace(
            "kind = points\nspec = 0.5 0.5",
            "kind = subdomain\nspec = 0.2 0.8; 0.2 0.8\nkappa = 2",
        );
        assert_eq!(Config::parse(&sub, "x").unwrap().measurement.kappa, 2);
        let wrong = sub.replace("kappa = 2", "kappa = 1");
        assert!(Config::parse(&wrong, "x")
            .unwrap_err()
            .to_string()
            .contains("kappa"));
    }

    #[test]
    fn tolerance_forms() {
        let explicit = format!("{MINIMAL}[optimizer]\ntol_schedule = 1e-3 1e-3 1e-4 1e-5 1e-6\n");
        assert_eq!(Config::parse(&explicit, "x").unwrap().tol_schedule[2], 1e-4);
        let wrong = format!("{MINIMAL}[optimizer]\ntol_schedule = 1e-3 1e-3 1e-4\n");
        assert!(Config::parse(&wrong, "x").is_err());
    }
}
