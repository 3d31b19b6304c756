//! Run configuration: defaults, `key=value` files and command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::CliError;

/// Largest supported base dimension; `4n + 4` chart coordinates must fit the
/// jet dimension limit.
pub const MAX_N: usize = 3;

/// Environment variable that redirects report files into another directory.
pub const OUTPUT_DIR_ENV: &str = "CMAP_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Psk,
    Vphs,
    Rigid,
    Twist,
    Cmap,
    Einstein,
    Heisenberg,
    Isometry,
}

impl Suite {
    pub const ALL: [Suite; 8] = [
        Suite::Psk,
        Suite::Vphs,
        Suite::Rigid,
        Suite::Twist,
        Suite::Cmap,
        Suite::Einstein,
        Suite::Heisenberg,
        Suite::Isometry,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Psk => "psk",
            Suite::Vphs => "vphs",
            Suite::Rigid => "rigid",
            Suite::Twist => "twist",
            Suite::Cmap => "cmap",
            Suite::Einstein => "einstein",
            Suite::Heisenberg => "heisenberg",
            Suite::Isometry => "isometry",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parses a comma-separated suite list; `all` expands to every suite.
pub fn parse_suites(list: &str) -> Result<Vec<Suite>, CliError> {
    let mut out = Vec::new();
    for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if item == "all" {
            out.extend(Suite::ALL);
            continue;
        }
        let suite = Suite::ALL
            .into_iter()
            .find(|s| s.name() == item)
            .ok_or_else(|| CliError::Config(format!("unknown suite `{item}`")))?;
        out.push(suite);
    }
    if out.is_empty() {
        return Err(CliError::Config("no suites selected".into()));
    }
    out.sort();
    out.dedup();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

impl FromStr for Format {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(CliError::Config(format!("unknown format `{other}` (expected json or csv)"))),
        }
    }
}

/// Validated run configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub n: usize,
    pub k: u32,
    pub suites: Vec<Suite>,
    pub points: usize,
    pub seed: u64,
    pub tol_structural: f64,
    pub tol_fd: f64,
    #[serde(skip)]
    pub output: Option<PathBuf>,
    #[serde(skip)]
    pub format: Format,
}

/// Unvalidated settings as strings, merged from a file and then from flags.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    pub n: Option<String>,
    pub k: Option<String>,
    pub suites: Option<String>,
    pub points: Option<String>,
    pub seed: Option<String>,
    pub tol_structural: Option<String>,
    pub tol_fd: Option<String>,
    pub output: Option<String>,
    pub format: Option<String>,
}

impl RawConfig {
    /// Reads `key = value` lines. Blank lines and lines starting with `#` are
    /// skipped; keys may use `-` or `_`.
    pub fn parse_file_contents(text: &str) -> Result<Self, CliError> {
        let mut raw = RawConfig::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("config line {}: expected key=value", lineno + 1)))?;
            let value = Some(value.trim().to_string());
            match key.trim().replace('-', "_").as_str() {
                "n" => raw.n = value,
                "k" => raw.k = value,
                "suites" => raw.suites = value,
                "points" => raw.points = value,
                "seed" => raw.seed = value,
                "tol_structural" => raw.tol_structural = value,
                "tol_fd" => raw.tol_fd = value,
                "output" => raw.output = value,
                "format" => raw.format = value,
                other => return Err(CliError::Config(format!("config line {}: unknown key `{other}`", lineno + 1))),
            }
        }
        Ok(raw)
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config file {}: {e}", path.display())))?;
        Self::parse_file_contents(&text)
    }

    /// Fields set in `other` win.
    pub fn overlay(self, other: RawConfig) -> RawConfig {
        RawConfig {
            n: other.n.or(self.n),
            k: other.k.or(self.k),
            suites: other.suites.or(self.suites),
            points: other.points.or(self.points),
            seed: other.seed.or(self.seed),
            tol_structural: other.tol_structural.or(self.tol_structural),
            tol_fd: other.tol_fd.or(self.tol_fd),
            output: other.output.or(self.output),
            format: other.format.or(self.format),
        }
    }

    pub fn validate(self) -> Result<RunConfig, CliError> {
        let n = parse_dimension(self.n.as_deref().unwrap_or("1"))?;
        let k = parse_deformation(self.k.as_deref().unwrap_or("0"))?;
        let suites = parse_suites(self.suites.as_deref().unwrap_or("all"))?;
        let points = parse_field::<usize>("points", self.points.as_deref().unwrap_or("50"))?;
        if points == 0 {
            return Err(CliError::Config("points must be at least 1".into()));
        }
        let seed = parse_field::<u64>("seed", self.seed.as_deref().unwrap_or("0"))?;
        let tol_structural = parse_tolerance("tol_structural", self.tol_structural.as_deref().unwrap_or("1e-9"))?;
        let tol_fd = parse_tolerance("tol_fd", self.tol_fd.as_deref().unwrap_or("1e-6"))?;
        let format = self.format.as_deref().unwrap_or("json").parse()?;
        let output = self.output.map(PathBuf::from);
        Ok(RunConfig { n, k, suites, points, seed, tol_structural, tol_fd, output, format })
    }
}

fn parse_field<T: FromStr>(name: &str, value: &str) -> Result<T, CliError> {
    value.trim().parse().map_err(|_| CliError::Config(format!("{name}: cannot parse `{value}`")))
}

pub fn parse_dimension(value: &str) -> Result<usize, CliError> {
    let n: usize = value
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("n must be a non-negative integer, got `{value}`")))?;
    if n > MAX_N {
        return Err(CliError::Config(format!("n = {n} exceeds the supported maximum {MAX_N} (4n+4 ≤ 16 coordinates)")));
    }
    Ok(n)
}

/// The deformation parameter must be a non-negative integer: the circle
/// quotient that produces the twisted space is only defined for integral `k`.
pub fn parse_deformation(value: &str) -> Result<u32, CliError> {
    let value = value.trim();
    if let Ok(k) = value.parse::<u32>() {
        return Ok(k);
    }
    let reason = match value.parse::<f64>() {
        Ok(x) if x < 0.0 => "it must be non-negative",
        Ok(_) => "the twist requires k to be an integer (integrality constraint); rational k is not supported",
        Err(_) => "not a number",
    };
    Err(CliError::Config(format!("invalid k = `{value}`: {reason}")))
}

fn parse_tolerance(name: &str, value: &str) -> Result<f64, CliError> {
    let tol: f64 = parse_field(name, value)?;
    if !(tol.is_finite() && tol > 0.0) {
        return Err(CliError::Config(format!("{name} must be a positive finite number")));
    }
    Ok(tol)
}

impl RunConfig {
    /// Where the report goes, with the output-directory override applied.
    /// `None` means standard output.
    pub fn resolved_output(&self, dir_override: Option<&Path>) -> Option<PathBuf> {
        match (dir_override, &self.output) {
            (None, out) => out.clone(),
            (Some(dir), Some(out)) => Some(dir.join(out.file_name().unwrap_or(out.as_os_str()))),
            (Some(dir), None) => Some(dir.join(format!("cmap-report.{}", self.format.extension()))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let cfg = RawConfig::default().validate().unwrap();
        assert_eq!((cfg.n, cfg.k, cfg.points, cfg.seed), (1, 0, 50, 0));
        assert_eq!(cfg.suites, Suite::ALL.to_vec());
        assert_eq!((cfg.tol_structural, cfg.tol_fd), (1e-9, 1e-6));
        assert_eq!(cfg.format, Format::Json);
    }

    #[test]
    fn rational_deformation_is_rejected() {
        let err = parse_deformation("0.5").unwrap_err().to_string();
        assert!(err.contains("integer"), "{err}");
        assert!(parse_deformation("-1").is_err());
        assert_eq!(parse_deformation("3").unwrap(), 3);
    }

    #[test]
    fn dimension_guard() {
        assert!(parse_dimension("4").is_err());
        assert_eq!(parse_dimension("3").unwrap(), 3);
    }

    #[test]
    fn file_then_flags() {
        let file = RawConfig::parse_file_contents("# run\nn = 2\nk=1\ntol-fd = 1e-5\nsuites = psk, vphs\n").unwrap();
        let flags = RawConfig { k: Some("2".into()), ..Default::default() };
        let cfg = file.overlay(flags).validate().unwrap();
        assert_eq!((cfg.n, cfg.k, cfg.tol_fd), (2, 2, 1e-5));
        assert_eq!(cfg.suites, vec![Suite::Psk, Suite::Vphs]);
        assert!(RawConfig::parse_file_contents("bogus = 1").is_err());
        assert!(RawConfig::parse_file_contents("n 1").is_err());
    }

    #[test]
    fn suites_expand_and_dedup() {
        assert_eq!(parse_suites("cmap,all").unwrap().len(), 8);
        assert_eq!(parse_suites("einstein,psk,psk").unwrap(), vec![Suite::Psk, Suite::Einstein]);
        assert!(parse_suites("nope").is_err());
    }

    #[test]
    fn output_override() {
        let mut cfg = RawConfig::default().validate().unwrap();
        assert_eq!(cfg.resolved_output(None), None);
        assert_eq!(cfg.resolved_output(Some(Path::new("/tmp/x"))), Some(PathBuf::from("/tmp/x/cmap-report.json")));
        cfg.output = Some(PathBuf::from("out/r.json"));
        assert_eq!(cfg.resolved_output(Some(Path::new("/d"))), Some(PathBuf::from("/d/r.json")));
    }
}
