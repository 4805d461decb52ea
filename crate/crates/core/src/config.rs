//! Scenario files: one `key = value` per line, `#` starts a comment.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::auxiliary::InvariantConstants;
use crate::error::{Error, Result};
use crate::force::ForceProfile;
use crate::grid::GridSpec;
use crate::io::fmt17;

#[derive(Debug, Clone, PartialEq)]
pub enum ForceSpec {
    Expression(String),
    Table(PathBuf),
}

impl ForceSpec {
    pub fn resolve(&self) -> Result<ForceProfile> {
        match self {
            ForceSpec::Expression(src) => ForceProfile::parse(src),
            ForceSpec::Table(path) => ForceProfile::load_table(path),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchSelection {
    Linear,
    Quadratic,
    Both,
}

impl BranchSelection {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(BranchSelection::Linear),
            "quadratic" => Ok(BranchSelection::Quadratic),
            "both" => Ok(BranchSelection::Both),
            other => Err(Error::Config(format!(
                "branch must be linear, quadratic or both, got {other:?}"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BranchSelection::Linear => "linear",
            BranchSelection::Quadratic => "quadratic",
            BranchSelection::Both => "both",
        }
    }

    pub fn has_linear(self) -> bool {
        self != BranchSelection::Quadratic
    }

    pub fn has_quadratic(self) -> bool {
        self != BranchSelection::Linear
    }
}

/// Trajectory sample spacing used when `samples` is not given.
pub const DEFAULT_SAMPLE_STEP: f64 = 0.005;

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub mass: f64,
    pub force: ForceSpec,
    pub branch: BranchSelection,
    /// `D₀, E₀, F₀, A₀, B₀, C₀` of the quadratic invariant.
    pub quadratic: InvariantConstants,
    /// `A₀, B₀, C₀` of the linear invariant.
    pub linear: [f64; 3],
    pub grid: GridSpec,
    pub dt: f64,
    pub t_final: f64,
    pub samples: usize,
    pub snapshots: Vec<f64>,
    pub n_max: usize,
    /// Centre, mean momentum and width of the Gaussian test packet.
    pub packet: [f64; 3],
    /// Eigenvalue used for the linear-invariant eigenstate check.
    pub lambda: f64,
    pub out: PathBuf,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            name: "scenario".into(),
            mass: 1.0,
            force: ForceSpec::Expression("0".into()),
            branch: BranchSelection::Both,
            quadratic: InvariantConstants::default(),
            linear: [1.0, 0.0, 0.0],
            grid: GridSpec::default(),
            dt: 1e-3,
            t_final: 10.0,
            samples: default_samples(10.0),
            snapshots: (0..=10).map(f64::from).collect(),
            n_max: 2,
            packet: [0.5, 0.3, 1.0],
            lambda: 0.7,
            out: PathBuf::from("out"),
        }
    }
}

fn default_samples(t_final: f64) -> usize {
    (t_final / DEFAULT_SAMPLE_STEP).round() as usize + 1
}

const KEYS: &[&str] = &[
    "name",
    "mass",
    "force",
    "force_table",
    "branch",
    "d0",
    "e0",
    "f0",
    "a0",
    "b0",
    "c0",
    "linear_a0",
    "linear_b0",
    "linear_c0",
    "grid_extent",
    "grid_points",
    "dt",
    "t_final",
    "samples",
    "snapshots",
    "n_max",
    "packet_q0",
    "packet_p0",
    "packet_width",
    "lambda",
    "out",
];

fn line_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("line {line}: {msg}"))
}

fn number(line: usize, key: &str, v: &str) -> Result<f64> {
    let x: f64 = v
        .parse()
        .map_err(|_| line_err(line, format!("{key} expects a number, got {v:?}")))?;
    if !x.is_finite() {
        return Err(line_err(line, format!("{key} must be finite")));
    }
    Ok(x)
}

fn count(line: usize, key: &str, v: &str) -> Result<usize> {
    v.parse().map_err(|_| {
        line_err(
            line,
            format!("{key} expects a nonnegative integer, got {v:?}"),
        )
    })
}

impl ScenarioConfig {
    /// Parses config text. Keys not present keep their defaults; a missing
    /// `samples` follows `t_final`, and missing `snapshots` are the integer
    /// times in `[0, t_final]`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ScenarioConfig::default();
        let mut seen: Vec<&str> = Vec::new();
        let (mut extent, mut points) = (cfg.grid.extent, cfg.grid.points);
        let (mut samples, mut snapshots) = (None, None);
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| line_err(line, format!("expected key = value, got {body:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            let Some(&key) = KEYS.iter().find(|k| **k == key) else {
                return Err(line_err(line, format!("unknown key {key:?}")));
            };
            if seen.contains(&key) {
                return Err(line_err(line, format!("duplicate key {key:?}")));
            }
            if (key == "force" && seen.contains(&"force_table"))
                || (key == "force_table" && seen.contains(&"force"))
            {
                return Err(line_err(
                    line,
                    "force and force_table are mutually exclusive",
                ));
            }
            seen.push(key);
            match key {
                "name" => cfg.name = value.to_string(),
                "mass" => cfg.mass = number(line, key, value)?,
                "force" => {
                    ForceProfile::parse(value)
                        .map_err(|e| line_err(line, format!("force: {e}")))?;
                    cfg.force = ForceSpec::Expression(value.to_string());
                }
                "force_table" => cfg.force = ForceSpec::Table(PathBuf::from(value)),
                "branch" => {
                    cfg.branch = BranchSelection::parse(value).map_err(|e| line_err(line, e))?
                }
                "d0" => cfg.quadratic.d0 = number(line, key, value)?,
                "e0" => cfg.quadratic.e0 = number(line, key, value)?,
                "f0" => cfg.quadratic.f0 = number(line, key, value)?,
                "a0" => cfg.quadratic.a0 = number(line, key, value)?,
                "b0" => cfg.quadratic.b0 = number(line, key, value)?,
                "c0" => cfg.quadratic.c0 = number(line, key, value)?,
                "linear_a0" => cfg.linear[0] = number(line, key, value)?,
                "linear_b0" => cfg.linear[1] = number(line, key, value)?,
                "linear_c0" => cfg.linear[2] = number(line, key, value)?,
                "grid_extent" => extent = number(line, key, value)?,
                "grid_points" => points = count(line, key, value)?,
                "dt" => cfg.dt = number(line, key, value)?,
                "t_final" => cfg.t_final = number(line, key, value)?,
                "samples" => samples = Some(count(line, key, value)?),
                "snapshots" => {
                    let list = value
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(|s| number(line, key, s))
                        .collect::<Result<Vec<_>>>()?;
                    snapshots = Some(list);
                }
                "n_max" => cfg.n_max = count(line, key, value)?,
                "packet_q0" => cfg.packet[0] = number(line, key, value)?,
                "packet_p0" => cfg.packet[1] = number(line, key, value)?,
                "packet_width" => cfg.packet[2] = number(line, key, value)?,
                "lambda" => cfg.lambda = number(line, key, value)?,
                "out" => cfg.out = PathBuf::from(value),
                _ => unreachable!("key list and match arms agree"),
            }
        }
        cfg.grid = GridSpec::new(extent, points)?;
        cfg.samples = samples.unwrap_or_else(|| default_samples(cfg.t_final));
        cfg.snapshots = snapshots.unwrap_or_else(|| {
            (0..=cfg.t_final.floor() as usize)
                .map(|k| k as f64)
                .collect()
        });
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; a relative `force_table` is taken relative to the file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        if let ForceSpec::Table(table) = &cfg.force {
            if table.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                cfg.force = ForceSpec::Table(base.join(table));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0) {
            return Err(Error::InvalidMass(self.mass));
        }
        if !(self.dt > 0.0) || !(self.t_final > 0.0) {
            return Err(Error::Config("dt and t_final must be positive".into()));
        }
        if self.samples < 9 {
            return Err(Error::Config("samples must be at least 9".into()));
        }
        if !(self.packet[2] > 0.0) {
            return Err(Error::Config("packet_width must be positive".into()));
        }
        if self.branch.has_linear() && self.linear[0] == 0.0 && self.linear[1] == 0.0 {
            return Err(Error::Config(
                "linear invariant needs linear_a0 or linear_b0 nonzero".into(),
            ));
        }
        if let Some(t) = self
            .snapshots
            .iter()
            .find(|t| **t < 0.0 || **t > self.t_final)
        {
            return Err(Error::Config(format!("snapshot {t} outside [0, t_final]")));
        }
        if self.snapshots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config(
                "snapshots must be strictly increasing".into(),
            ));
        }
        Ok(())
    }

    /// Canonical text: every key in a fixed order, floats with 17 significant digits.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("name", self.name.clone());
        put("mass", fmt17(self.mass));
        match &self.force {
            ForceSpec::Expression(src) => put("force", src.clone()),
            ForceSpec::Table(path) => put("force_table", path.display().to_string()),
        }
        put("branch", self.branch.name().into());
        let q = &self.quadratic;
        for (k, v) in [
            ("d0", q.d0),
            ("e0", q.e0),
            ("f0", q.f0),
            ("a0", q.a0),
            ("b0", q.b0),
            ("c0", q.c0),
        ] {
            put(k, fmt17(v));
        }
        for (k, v) in ["linear_a0", "linear_b0", "linear_c0"]
            .iter()
            .zip(self.linear)
        {
            put(k, fmt17(v));
        }
        put("grid_extent", fmt17(self.grid.extent));
        put("grid_points", self.grid.points.to_string());
        put("dt", fmt17(self.dt));
        put("t_final", fmt17(self.t_final));
        put("samples", self.samples.to_string());
        put(
            "snapshots",
            self.snapshots
                .iter()
                .map(|t| fmt17(*t))
                .collect::<Vec<_>>()
                .join(", "),
        );
        put("n_max", self.n_max.to_string());
        put("packet_q0", fmt17(self.packet[0]));
        put("packet_p0", fmt17(self.packet[1]));
        put("packet_width", fmt17(self.packet[2]));
        put("lambda", fmt17(self.lambda));
        put("out", self.out.display().to_string());
        out
    }

    /// `serialize(parse(text))`.
    pub fn normalize(text: &str) -> Result<String> {
        Ok(Self::parse(text)?.serialize())
    }

    pub fn linear_constants(&self) -> InvariantConstants {
        InvariantConstants::linear(self.linear[0], self.linear[1], self.linear[2])
    }
}
