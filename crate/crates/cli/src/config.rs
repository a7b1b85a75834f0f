//! Run configuration: `key = value` files merged with command-line overrides,
//! validated in one place before any computation starts.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use curlrec::mesh::{Mesh, Point};
use curlrec::problems::ProblemKind;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Solve,
    Estimate,
    Reconstruct,
    StudyH,
    StudyP,
    Adapt,
    Verify,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Solve,
        Command::Estimate,
        Command::Reconstruct,
        Command::StudyH,
        Command::StudyP,
        Command::Adapt,
        Command::Verify,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Estimate => "estimate",
            Command::Reconstruct => "reconstruct",
            Command::StudyH => "study-h",
            Command::StudyP => "study-p",
            Command::Adapt => "adapt",
            Command::Verify => "verify",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Command::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| format!("unknown command `{s}`"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MeshSource {
    File(PathBuf),
    Square(usize),
    LShape(usize),
}

impl fmt::Display for MeshSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeshSource::File(p) => write!(f, "file:{}", p.display()),
            MeshSource::Square(n) => write!(f, "square:{n}"),
            MeshSource::LShape(n) => write!(f, "lshape:{n}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EtaStar {
    Auto,
    Value(f64),
}

impl fmt::Display for EtaStar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EtaStar::Auto => f.write_str("auto"),
            EtaStar::Value(v) => write!(f, "{v}"),
        }
    }
}

/// Half-plane selecting cells by their centroid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Region {
    pub axis: usize,
    pub below: bool,
    pub threshold: f64,
}

impl Region {
    pub fn contains(&self, x: Point) -> bool {
        if self.below {
            x[self.axis] < self.threshold
        } else {
            x[self.axis] > self.threshold
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let axis = if self.axis == 0 { 'x' } else { 'y' };
        let op = if self.below { '<' } else { '>' };
        write!(f, "{axis}{op}{}", self.threshold)
    }
}

/// Piecewise constant coefficient: a default value overridden on half-planes,
/// written `1.0` or `1.0, x<0.5:2.0, y>0:3.0` (later regions win).
#[derive(Clone, Debug, PartialEq)]
pub struct Coefficient {
    pub default: f64,
    pub regions: Vec<(Region, f64)>,
}

impl Coefficient {
    pub fn constant(value: f64) -> Self {
        Coefficient { default: value, regions: Vec::new() }
    }

    pub fn is_constant(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn at(&self, x: Point) -> f64 {
        self.regions.iter().rev().find(|(r, _)| r.contains(x)).map_or(self.default, |(_, v)| *v)
    }

    pub fn per_cell(&self, mesh: &Mesh) -> Vec<f64> {
        (0..mesh.num_cells()).map(|k| self.at(mesh.geometry(k).centroid)).collect()
    }

    fn values(&self) -> impl Iterator<Item = f64> + '_ {
        std::iter::once(self.default).chain(self.regions.iter().map(|(_, v)| *v))
    }
}

impl fmt::Display for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.default)?;
        for (r, v) in &self.regions {
            write!(f, ",{r}:{v}")?;
        }
        Ok(())
    }
}

impl FromStr for Coefficient {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split(',').map(str::trim);
        let default = parse_f64(parts.next().unwrap_or(""))?;
        let regions = parts
            .map(|part| {
                let (region, value) =
                    part.split_once(':').ok_or_else(|| format!("expected `region:value`, got `{part}`"))?;
                let region = region.trim();
                let mut chars = region.chars();
                let axis = match chars.next() {
                    Some('x') => 0,
                    Some('y') => 1,
                    _ => return Err(format!("region `{region}` must start with x or y")),
                };
                let below = match chars.next() {
                    Some('<') => true,
                    Some('>') => false,
                    _ => return Err(format!("region `{region}` needs `<` or `>`")),
                };
                let threshold = parse_f64(chars.as_str())?;
                Ok((Region { axis, below, threshold }, parse_f64(value.trim())?))
            })
            .collect::<Result<_, _>>()?;
        Ok(Coefficient { default, regions })
    }
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

/// Keys accepted in configuration files, in echo order.
pub const KEYS: [&str; 17] = [
    "command",
    "mesh",
    "square",
    "lshape",
    "problem",
    "p",
    "q",
    "omega",
    "eps",
    "nu",
    "eta_star",
    "levels",
    "theta",
    "p_max",
    "seed",
    "out",
    "flip_orientation",
];

const MESH_KEYS: [&str; 3] = ["mesh", "square", "lshape"];

pub const MAX_STUDY_DEGREE: usize = 5;
const MAX_DEGREE: usize = 8;
const MAX_LEVELS: usize = 12;

/// Raw `key -> value` settings with the origin of each value for messages.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, (String, Origin)>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Origin {
    File(usize),
    Flag,
}

impl Settings {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |message: String| CliError::ConfigLine { line, message };
            let (key, value) =
                content.split_once('=').ok_or_else(|| err(format!("expected `key = value`, got `{content}`")))?;
            let key = key.trim().replace('-', "_");
            if !KEYS.contains(&key.as_str()) {
                return Err(err(format!("unknown key `{key}`")));
            }
            if values.contains_key(&key) {
                return Err(err(format!("duplicate key `{key}`")));
            }
            values.insert(key, (value.trim().to_string(), Origin::File(line)));
        }
        Ok(Settings { values })
    }

    /// Sets a value from the command line; a mesh flag replaces every mesh
    /// key coming from a file.
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        assert!(KEYS.contains(&key), "unknown key {key}");
        if MESH_KEYS.contains(&key) {
            self.values.retain(|k, (_, origin)| !(MESH_KEYS.contains(&k.as_str()) && *origin != Origin::Flag));
        }
        self.values.insert(key.to_string(), (value.into(), Origin::Flag));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|(v, _)| v.as_str())
    }

    fn parse_key<T: FromStr>(&self, key: &'static str) -> Result<Option<T>, CliError>
    where
        T::Err: fmt::Display,
    {
        self.values
            .get(key)
            .map(|(v, origin)| {
                v.parse::<T>().map_err(|e| {
                    let message = format!("{key}: {e}");
                    match origin {
                        Origin::File(line) => CliError::ConfigLine { line: *line, message },
                        Origin::Flag => CliError::Config { key: key.to_string(), message: e.to_string() },
                    }
                })
            })
            .transpose()
    }

    fn invalid(&self, key: &str, message: impl Into<String>) -> CliError {
        let message = message.into();
        match self.values.get(key) {
            Some((_, Origin::File(line))) => CliError::ConfigLine { line: *line, message: format!("{key}: {message}") },
            _ => CliError::Config { key: key.to_string(), message },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub mesh: MeshSource,
    pub problem: ProblemKind,
    pub p: usize,
    /// Reconstruction degree; `None` means `p + 2`.
    pub q: Option<usize>,
    pub omega: f64,
    pub eps: Coefficient,
    pub nu: Coefficient,
    pub eta_star: EtaStar,
    levels: Option<usize>,
    pub theta: f64,
    p_max: Option<usize>,
    pub seed: u64,
    pub out: PathBuf,
    /// Debug switch: flips edge orientations inside the integration-by-parts oracle.
    pub flip_orientation: bool,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        RunConfig {
            command,
            mesh: MeshSource::Square(2),
            problem: ProblemKind::Trigonometric,
            p: 1,
            q: None,
            omega: 1.0,
            eps: Coefficient::constant(1.0),
            nu: Coefficient::constant(1.0),
            eta_star: EtaStar::Auto,
            levels: None,
            theta: 0.5,
            p_max: None,
            seed: 0,
            out: PathBuf::from("out"),
            flip_orientation: false,
        }
    }

    /// Builds and validates a configuration; `command` overrides the file key.
    pub fn from_settings(command: Option<Command>, s: &Settings) -> Result<Self, CliError> {
        let command = match command {
            Some(c) => c,
            None => s
                .parse_key::<Command>("command")?
                .ok_or_else(|| CliError::Config { key: "command".into(), message: "no command given".into() })?,
        };
        let mut cfg = RunConfig::new(command);
        let meshes: Vec<&str> = MESH_KEYS.into_iter().filter(|k| s.get(k).is_some()).collect();
        if meshes.len() > 1 {
            return Err(s.invalid(meshes[1], format!("conflicts with `{}`", meshes[0])));
        }
        if let Some(path) = s.get("mesh") {
            cfg.mesh = MeshSource::File(PathBuf::from(path));
        }
        if let Some(n) = s.parse_key("square")? {
            cfg.mesh = MeshSource::Square(n);
        }
        if let Some(n) = s.parse_key("lshape")? {
            cfg.mesh = MeshSource::LShape(n);
        }
        if let Some(v) = s.parse_key("problem")? {
            cfg.problem = v;
        }
        if let Some(v) = s.parse_key("p")? {
            cfg.p = v;
        }
        cfg.q = s.parse_key("q")?;
        if let Some(v) = s.parse_key("omega")? {
            cfg.omega = v;
        }
        if let Some(v) = s.parse_key("eps")? {
            cfg.eps = v;
        }
        if let Some(v) = s.parse_key("nu")? {
            cfg.nu = v;
        }
        if let Some(v) = s.get("eta_star") {
            cfg.eta_star = if v == "auto" { EtaStar::Auto } else { EtaStar::Value(s.parse_key("eta_star")?.unwrap()) };
        }
        cfg.levels = s.parse_key("levels")?;
        if let Some(v) = s.parse_key("theta")? {
            cfg.theta = v;
        }
        cfg.p_max = s.parse_key("p_max")?;
        if let Some(v) = s.parse_key("seed")? {
            cfg.seed = v;
        }
        if let Some(v) = s.get("out") {
            cfg.out = PathBuf::from(v);
        }
        if let Some(v) = s.parse_key("flip_orientation")? {
            cfg.flip_orientation = v;
        }
        cfg.validate().map_err(|(key, message)| s.invalid(key, message))?;
        Ok(cfg)
    }

    /// Checks every value; returns the offending key and a message.
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        match self.mesh {
            MeshSource::Square(0) => return Err(("square", "resolution must be positive".into())),
            MeshSource::LShape(0) => return Err(("lshape", "resolution must be positive".into())),
            _ => {}
        }
        if matches!(self.mesh, MeshSource::LShape(_)) && self.problem == ProblemKind::Polynomial {
            return Err(("problem", "the polynomial solution has nonzero tangential trace on the L-shape".into()));
        }
        if self.p == 0 || self.p > MAX_DEGREE {
            return Err(("p", format!("degree must be in 1..={MAX_DEGREE}, got {}", self.p)));
        }
        let top = if matches!(self.command, Command::StudyP | Command::Verify) { self.p_max() } else { self.p };
        if let Some(q) = self.q {
            if q < top + 1 {
                return Err(("q", format!("reconstruction degree {q} must be at least {}", top + 1)));
            }
        }
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(("omega", format!("must be positive, got {}", self.omega)));
        }
        for (key, c) in [("eps", &self.eps), ("nu", &self.nu)] {
            if let Some(v) = c.values().find(|v| *v <= 0.0) {
                return Err((key, format!("must be positive, got {v}")));
            }
            if !c.is_constant() && self.problem != ProblemKind::LShape {
                return Err((key, format!("regions need a problem without exact solution, not `{}`", self.problem)));
            }
        }
        if let EtaStar::Value(v) = self.eta_star {
            if v <= 0.0 {
                return Err(("eta_star", format!("must be positive, got {v}")));
            }
        }
        if let Some(l) = self.levels {
            if l == 0 || l > MAX_LEVELS {
                return Err(("levels", format!("must be in 1..={MAX_LEVELS}, got {l}")));
            }
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(("theta", format!("marking fraction must lie in (0, 1], got {}", self.theta)));
        }
        if let Some(pm) = self.p_max {
            if pm == 0 || pm > MAX_STUDY_DEGREE {
                return Err(("p_max", format!("must be in 1..={MAX_STUDY_DEGREE}, got {pm}")));
            }
        }
        Ok(())
    }

    /// Number of levels (h-study), iterations (adapt) or refinement levels
    /// (verify); defaults depend on the command.
    pub fn levels(&self) -> usize {
        self.levels.unwrap_or(match self.command {
            Command::Adapt => 8,
            Command::Verify => 3,
            _ => 4,
        })
    }

    pub fn set_levels(&mut self, levels: usize) {
        self.levels = Some(levels);
    }

    /// Highest degree of p-studies and of the verification suite.
    pub fn p_max(&self) -> usize {
        self.p_max.unwrap_or(if self.command == Command::Verify { 3 } else { 4 })
    }

    pub fn set_p_max(&mut self, p_max: usize) {
        self.p_max = Some(p_max);
    }

    /// Reconstruction degree used for dG degree `p`.
    pub fn q_for(&self, p: usize) -> usize {
        self.q.unwrap_or(curlrec::reconstruct::default_degree(p))
    }

    /// Deterministic one-line echo of every setting that affects results.
    pub fn echo(&self) -> String {
        let q = self.q.map_or("auto".to_string(), |q| q.to_string());
        format!(
            "command={} mesh={} problem={} p={} q={q} omega={} eps={} nu={} eta_star={} levels={} theta={} p_max={} seed={}{}",
            self.command,
            self.mesh,
            self.problem,
            self.p,
            self.omega,
            self.eps,
            self.nu,
            self.eta_star,
            self.levels(),
            self.theta,
            self.p_max(),
            self.seed,
            if self.flip_orientation { " flip_orientation=true" } else { "" }
        )
    }
}
