//! Run configuration read from a flat `key = value` file.
//!
//! Blank lines and `#` comments are ignored. Every key may appear once and
//! unknown keys are rejected. Defaults depend on `problem`, so the whole file
//! is read before any value is interpreted.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use bfdarcy::assembly::{
    BrinkmanBoundary, DarcyBoundary, Permeability, PhysicalParams, PressureConstraint, ProblemData,
    DEFAULT_PENALTY,
};
use bfdarcy::elements::Mat2;
use bfdarcy::mesh::{BoundaryTag, Pattern, Region};
use bfdarcy::solver::NewtonOptions;
use bfdarcy::study::{refinement_sequence, MIN_LEVELS};
use bfdarcy::verification::example2_params;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("line {line}: bad value for `{key}`: {msg}")]
    Value {
        line: usize,
        key: String,
        msg: String,
    },
    #[error("{0}")]
    Invalid(String),
}

/// Keys accepted besides `bc.<TAG>`.
pub const KEYS: &[&str] = &[
    "problem",
    "mu",
    "F",
    "p",
    "K_B",
    "K_D",
    "nx",
    "ny_B",
    "ny_D",
    "pattern",
    "mesh",
    "tol",
    "max_iter",
    "initial_velocity",
    "constraint",
    "penalty",
    "levels",
    "start_nx",
    "F_list",
    "K_D_list",
    "nx_list",
    "f_B",
    "f_D",
    "g_D",
    "csv",
    "vtk",
    "quiet",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Example1,
    Example2,
    Custom,
}

impl ProblemKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProblemKind::Example1 => "example1",
            ProblemKind::Example2 => "example2",
            ProblemKind::Custom => "custom",
        }
    }
}

/// Constant data of a custom problem.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundarySpec {
    Velocity([f64; 2]),
    Traction([f64; 2]),
    Flux([f64; 2]),
    Pressure(f64),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CustomData {
    pub f_brinkman: [f64; 2],
    pub f_darcy: [f64; 2],
    pub g_darcy: f64,
    pub bc: BTreeMap<BoundaryTag, BoundarySpec>,
}

impl CustomData {
    pub fn problem_data(&self) -> ProblemData {
        let mut data = ProblemData::homogeneous();
        let (fb, fd, g) = (self.f_brinkman, self.f_darcy, self.g_darcy);
        data.f_brinkman = Arc::new(move |_| fb);
        data.f_darcy = Arc::new(move |_| fd);
        data.g_darcy = Arc::new(move |_| g);
        for (&tag, spec) in &self.bc {
            match *spec {
                BoundarySpec::Velocity(v) => {
                    data.brinkman_bc
                        .insert(tag, BrinkmanBoundary::Velocity(Arc::new(move |_| v)));
                }
                BoundarySpec::Traction(t) => {
                    data.brinkman_bc
                        .insert(tag, BrinkmanBoundary::Traction(Arc::new(move |_| t)));
                }
                BoundarySpec::Flux(v) => {
                    data.darcy_bc
                        .insert(tag, DarcyBoundary::NormalFlux(Arc::new(move |_| v)));
                }
                BoundarySpec::Pressure(p) => {
                    data.darcy_bc
                        .insert(tag, DarcyBoundary::Pressure(Arc::new(move |_| p)));
                }
            }
        }
        data
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub params: PhysicalParams,
    pub nx: usize,
    /// Vertical cells of each region; `None` gives square cells.
    pub ny: Option<(usize, usize)>,
    pub pattern: Pattern,
    pub mesh: Option<PathBuf>,
    pub newton: NewtonOptions,
    pub levels: usize,
    pub start_nx: usize,
    pub f_list: Vec<f64>,
    pub k_darcy_list: Vec<f64>,
    pub nx_list: Vec<usize>,
    pub custom: CustomData,
    /// File name of the CSV written into the output directory.
    pub csv: Option<String>,
    pub vtk: bool,
    pub quiet: bool,
}

struct Entry {
    line: usize,
    value: String,
}

struct Entries(BTreeMap<String, Entry>);

impl Entries {
    fn err(&self, key: &str, msg: impl Into<String>) -> ConfigError {
        let line = self.0.get(key).map_or(0, |e| e.line);
        ConfigError::Value {
            line,
            key: key.to_string(),
            msg: msg.into(),
        }
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(|e| e.value.as_str())
    }

    fn numbers(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        let Some(v) = self.raw(key) else {
            return Ok(None);
        };
        let items: Vec<&str> = v
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        items
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| self.err(key, format!("`{s}` is not a number")))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    fn float(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.numbers(key)? {
            None => Ok(None),
            Some(v) if v.len() == 1 => Ok(Some(v[0])),
            Some(_) => Err(self.err(key, "expected one number")),
        }
    }

    fn pair(&self, key: &str) -> Result<Option<[f64; 2]>, ConfigError> {
        match self.numbers(key)? {
            None => Ok(None),
            Some(v) if v.len() == 2 => Ok(Some([v[0], v[1]])),
            Some(_) => Err(self.err(key, "expected two numbers")),
        }
    }

    fn count(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        self.raw(key)
            .map(|v| {
                v.parse::<usize>()
                    .map_err(|_| self.err(key, format!("`{v}` is not a non-negative integer")))
            })
            .transpose()
    }

    fn counts(&self, key: &str) -> Result<Option<Vec<usize>>, ConfigError> {
        let Some(v) = self.raw(key) else {
            return Ok(None);
        };
        v.split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<usize>()
                    .map_err(|_| self.err(key, format!("`{s}` is not a non-negative integer")))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    fn flag(&self, key: &str) -> Result<Option<bool>, ConfigError> {
        self.raw(key)
            .map(|v| match v {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => Err(self.err(key, format!("`{v}` is not true or false"))),
            })
            .transpose()
    }

    /// A scalar `k` (meaning `k I`) or the four entries `k11 k12 k21 k22`.
    fn tensor(&self, key: &str) -> Result<Option<Mat2>, ConfigError> {
        match self.numbers(key)? {
            None => Ok(None),
            Some(v) if v.len() == 1 => Ok(Some([[v[0], 0.0], [0.0, v[0]]])),
            Some(v) if v.len() == 4 => Ok(Some([[v[0], v[1]], [v[2], v[3]]])),
            Some(_) => Err(self.err(key, "expected 1 or 4 numbers")),
        }
    }
}

fn tokenize(text: &str) -> Result<Entries, ConfigError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError::Syntax {
                line,
                msg: format!("expected `key = value`, found `{content}`"),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(ConfigError::Syntax {
                line,
                msg: "missing key".into(),
            });
        }
        let known = KEYS.contains(&key)
            || key
                .strip_prefix("bc.")
                .is_some_and(|t| t.parse::<BoundaryTag>().is_ok());
        if !known {
            return Err(ConfigError::UnknownKey {
                line,
                key: key.to_string(),
            });
        }
        if map.contains_key(key) {
            return Err(ConfigError::Duplicate {
                line,
                key: key.to_string(),
            });
        }
        map.insert(
            key.to_string(),
            Entry {
                line,
                value: value.to_string(),
            },
        );
    }
    Ok(Entries(map))
}

fn boundary_spec(e: &Entries, key: &str, tag: BoundaryTag) -> Result<BoundarySpec, ConfigError> {
    let value = e.raw(key).unwrap_or_default();
    let mut words = value.split_whitespace();
    let kind = words.next().unwrap_or("");
    let nums = words
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| e.err(key, format!("`{s}` is not a number")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let region = tag
        .region()
        .ok_or_else(|| e.err(key, "the interface takes no boundary condition"))?;
    let vector = |nums: &[f64]| match nums {
        [a, b] => Ok([*a, *b]),
        _ => Err(e.err(key, format!("`{kind}` needs two numbers"))),
    };
    let spec = match (kind, region) {
        ("velocity", Region::Brinkman) => BoundarySpec::Velocity(vector(&nums)?),
        ("traction", Region::Brinkman) => BoundarySpec::Traction(vector(&nums)?),
        ("flux", Region::Darcy) => BoundarySpec::Flux(vector(&nums)?),
        ("pressure", Region::Darcy) => match nums[..] {
            [p] => BoundarySpec::Pressure(p),
            _ => return Err(e.err(key, "`pressure` needs one number")),
        },
        ("velocity" | "traction", Region::Darcy) | ("flux" | "pressure", Region::Brinkman) => {
            return Err(e.err(key, format!("`{kind}` does not apply to {tag}")))
        }
        _ => return Err(e.err(key, format!("unknown condition `{kind}`"))),
    };
    Ok(spec)
}

impl RunConfig {
    /// Defaults of the manufactured problem.
    pub fn default_for(problem: ProblemKind) -> RunConfig {
        let params = match problem {
            ProblemKind::Example2 => example2_params(10.0),
            _ => PhysicalParams::new(1.0, 10.0, 3.0, 1.0, 1e-1),
        };
        let k_darcy = params.k_darcy.at([0.0, 0.0])[0][0];
        RunConfig {
            problem,
            f_list: vec![params.forchheimer],
            k_darcy_list: vec![k_darcy],
            params,
            nx: 8,
            ny: None,
            pattern: Pattern::RightDiagonal,
            mesh: None,
            newton: NewtonOptions::default(),
            levels: 5,
            start_nx: 4,
            nx_list: refinement_sequence(4, 5),
            custom: CustomData::default(),
            csv: None,
            vtk: false,
            quiet: false,
        }
    }

    pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        let e = tokenize(text)?;
        let problem = match e.raw("problem") {
            None | Some("example1") => ProblemKind::Example1,
            Some("example2") => ProblemKind::Example2,
            Some("custom") => ProblemKind::Custom,
            Some(other) => {
                return Err(e.err(
                    "problem",
                    format!("`{other}` is not example1, example2 or custom"),
                ))
            }
        };
        let mut c = RunConfig::default_for(problem);

        if let Some(v) = e.float("mu")? {
            c.params.mu = v;
        }
        if let Some(v) = e.float("F")? {
            c.params.forchheimer = v;
        }
        if let Some(v) = e.float("p")? {
            c.params.exponent = v;
        }
        if let Some(k) = e.tensor("K_B")? {
            c.params.k_brinkman = Permeability::Uniform(k);
        }
        if let Some(k) = e.tensor("K_D")? {
            c.params.k_darcy = Permeability::Uniform(k);
        }
        c.params
            .validate_scalars()
            .map_err(|err| ConfigError::Invalid(err.to_string()))?;

        if let Some(v) = e.count("nx")? {
            c.nx = v;
        }
        c.ny = match (e.count("ny_B")?, e.count("ny_D")?) {
            (None, None) => None,
            (Some(b), Some(d)) => Some((b, d)),
            _ => {
                return Err(ConfigError::Invalid(
                    "ny_B and ny_D must be given together".into(),
                ))
            }
        };
        if let Some(v) = e.raw("pattern") {
            c.pattern = v.parse().map_err(|m: String| e.err("pattern", m))?;
        }
        c.mesh = e.raw("mesh").map(PathBuf::from);

        if let Some(v) = e.float("tol")? {
            if !(v > 0.0) {
                return Err(e.err("tol", "must be positive"));
            }
            c.newton.tol = v;
        }
        if let Some(v) = e.count("max_iter")? {
            if v == 0 {
                return Err(e.err("max_iter", "must be positive"));
            }
            c.newton.max_iter = v;
        }
        if let Some(v) = e.pair("initial_velocity")? {
            c.newton.initial_velocity = v;
        }
        let penalty = e.float("penalty")?;
        c.newton.assembly.constraint = match e.raw("constraint") {
            None | Some("exact") => {
                if penalty.is_some() {
                    return Err(e.err("penalty", "only used with `constraint = penalty`"));
                }
                PressureConstraint::Exact
            }
            Some("penalty") => {
                let w = penalty.unwrap_or(DEFAULT_PENALTY);
                if !(w > 0.0) {
                    return Err(e.err("penalty", "must be positive"));
                }
                PressureConstraint::Penalty(w)
            }
            Some(other) => {
                return Err(e.err("constraint", format!("`{other}` is not exact or penalty")))
            }
        };

        if let Some(v) = e.count("levels")? {
            c.levels = v;
        }
        if let Some(v) = e.count("start_nx")? {
            c.start_nx = v;
        }
        c.nx_list = refinement_sequence(c.start_nx, c.levels);
        if let Some(v) = e.numbers("F_list")? {
            c.f_list = v;
        } else {
            c.f_list = vec![c.params.forchheimer];
        }
        if let Some(v) = e.numbers("K_D_list")? {
            c.k_darcy_list = v;
        } else {
            c.k_darcy_list = vec![c.params.k_darcy.at([0.0, 0.0])[0][0]];
        }
        if let Some(v) = e.counts("nx_list")? {
            c.nx_list = v;
        }

        let custom_keys = ["f_B", "f_D", "g_D"];
        let has_custom = custom_keys.iter().any(|k| e.raw(k).is_some())
            || e.0.keys().any(|k| k.starts_with("bc."));
        if has_custom && problem != ProblemKind::Custom {
            return Err(ConfigError::Invalid(
                "source and boundary keys need `problem = custom`".into(),
            ));
        }
        if let Some(v) = e.pair("f_B")? {
            c.custom.f_brinkman = v;
        }
        if let Some(v) = e.pair("f_D")? {
            c.custom.f_darcy = v;
        }
        if let Some(v) = e.float("g_D")? {
            c.custom.g_darcy = v;
        }
        for key in e.0.keys().filter(|k| k.starts_with("bc.")) {
            let tag: BoundaryTag = key["bc.".len()..].parse().expect("checked by tokenize");
            c.custom.bc.insert(tag, boundary_spec(&e, key, tag)?);
        }

        c.csv = e.raw("csv").map(str::to_string);
        if let Some(v) = e.flag("vtk")? {
            c.vtk = v;
        }
        if let Some(v) = e.flag("quiet")? {
            c.quiet = v;
        }
        Ok(c)
    }

    /// Overrides `levels`; the sweep levels follow unless they were listed explicitly.
    pub fn set_levels(&mut self, levels: usize) {
        if self.nx_list == refinement_sequence(self.start_nx, self.levels) {
            self.nx_list = refinement_sequence(self.start_nx, levels);
        }
        self.levels = levels;
    }

    /// Checks needed before a refinement study.
    pub fn check_levels(&self) -> Result<(), ConfigError> {
        if self.levels < MIN_LEVELS {
            return Err(ConfigError::Invalid(format!(
                "need ≥ {MIN_LEVELS} levels (got {})",
                self.levels
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_problem() {
        let c = RunConfig::parse("problem = example2\n").unwrap();
        assert_eq!(c.params.exponent, 4.0);
        assert_eq!(c.params.k_darcy.at([0.0, 0.0])[0][0], 1e-3);
        let c = RunConfig::parse("# nothing\n\n").unwrap();
        assert_eq!(c.problem, ProblemKind::Example1);
        assert_eq!(c.params.exponent, 3.0);
    }

    #[test]
    fn values_and_comments() {
        let text =
            "F = 100 # drag\nK_D = 0.1 0 0 0.2\nF_list = 1, 10, 100\nnx_list = 4 8\nvtk = true\n";
        let c = RunConfig::parse(text).unwrap();
        assert_eq!(c.params.forchheimer, 100.0);
        assert_eq!(c.params.k_darcy.at([0.0, 0.0]), [[0.1, 0.0], [0.0, 0.2]]);
        assert_eq!(c.f_list, vec![1.0, 10.0, 100.0]);
        assert_eq!(c.nx_list, vec![4, 8]);
        assert!(c.vtk);
    }

    #[test]
    fn unknown_and_duplicate_keys() {
        assert_eq!(
            RunConfig::parse("mu = 1\nviscosity = 2\n").unwrap_err(),
            ConfigError::UnknownKey {
                line: 2,
                key: "viscosity".into()
            }
        );
        assert!(matches!(
            RunConfig::parse("mu = 1\nmu = 2\n"),
            Err(ConfigError::Duplicate { line: 2, .. })
        ));
        assert!(matches!(
            RunConfig::parse("bc.GB_UP = velocity 0 0"),
            Err(ConfigError::UnknownKey { .. })
        ));
        assert!(matches!(
            RunConfig::parse("just words"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
    }

    #[test]
    fn parameter_ranges() {
        let err = RunConfig::parse("p = 5\n").unwrap_err();
        assert!(
            err.to_string().contains("exponent out of range [3,4]"),
            "{err}"
        );
        assert!(RunConfig::parse("mu = 0").is_err());
        assert!(RunConfig::parse("F = -1").is_err());
        assert!(RunConfig::parse("tol = 0").is_err());
        assert!(RunConfig::parse("K_B = 1 2").is_err());
        let err = RunConfig::parse("levels = 2")
            .unwrap()
            .check_levels()
            .unwrap_err();
        assert!(err.to_string().contains("need ≥ 3 levels"));
    }

    #[test]
    fn custom_boundary_conditions() {
        let text =
            "problem = custom\nbc.GB_TOP = traction 0 -1\nbc.GD_BOTTOM = pressure 0\nf_B = 0 1\n";
        let c = RunConfig::parse(text).unwrap();
        assert_eq!(
            c.custom.bc[&BoundaryTag::BrinkmanTop],
            BoundarySpec::Traction([0.0, -1.0])
        );
        assert_eq!(
            c.custom.bc[&BoundaryTag::DarcyBottom],
            BoundarySpec::Pressure(0.0)
        );
        assert!(RunConfig::parse("problem = custom\nbc.GB_TOP = pressure 0").is_err());
        assert!(RunConfig::parse("problem = custom\nbc.SIGMA = flux 0 0").is_err());
        assert!(RunConfig::parse("bc.GB_TOP = velocity 0 0").is_err());
    }

    #[test]
    fn penalty_mode() {
        let c = RunConfig::parse("constraint = penalty\npenalty = 1e6").unwrap();
        assert_eq!(
            c.newton.assembly.constraint,
            PressureConstraint::Penalty(1e6)
        );
        assert!(RunConfig::parse("penalty = 1e6").is_err());
    }
}
