//! Flat dotted key-value experiment configuration.
//!
//! The format is one `section.key=value` pair per line, `#` comments, blank
//! lines ignored. Every key has a default, so an empty file (or no `--config`
//! flag at all) is a valid configuration. Serialization writes every key in
//! sorted order with round-trip-exact float formatting, so
//! `parse(serialize(c)) == c` holds for any configuration.

use std::fmt::Write as _;

/// Spatial grid selection. `n_points = 0` lets each experiment pick the
/// window it needs for its data family (1024 length units for the decay
/// profile, 64 for the relaxation bumps).
#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub h: f64,
    pub n_points: usize,
    pub offset: f64,
}

/// Hyperbolic pair selection: either a builtin name or explicit matrices.
/// Matrices are row-major with `;` between rows and `,` within a row; they
/// are only consulted when `builtin` is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub builtin: String,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub n2: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Linear,
    Log,
}

/// Sample-time selection for the decay run. `samples = 0` uses the built-in
/// geometric schedule (ratio 1.1 from t = 0.01).
#[derive(Debug, Clone, PartialEq)]
pub struct TimesConfig {
    pub t_end: f64,
    pub samples: usize,
    pub spacing: Spacing,
}

/// Relaxation sweep and table parameters. The sweep varies `eps` at fixed
/// `grid.h`; the table varies `h_list` at fixed `table_eps`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationConfig {
    pub eps: Vec<f64>,
    pub kappa: f64,
    pub s: f64,
    pub s_prime: f64,
    pub t_end: f64,
    pub table_eps: f64,
    pub h_list: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub directory: String,
    pub prefix: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub grid: GridConfig,
    pub system: SystemConfig,
    pub times: TimesConfig,
    pub relaxation: RelaxationConfig,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig { h: 0.0625, n_points: 0, offset: 0.0 },
            system: SystemConfig {
                builtin: "euler".to_string(),
                a: Vec::new(),
                b: Vec::new(),
                n2: 1,
            },
            times: TimesConfig { t_end: 200.0, samples: 0, spacing: Spacing::Log },
            relaxation: RelaxationConfig {
                eps: vec![0.25, 0.125, 0.0625, 0.03125, 0.015625],
                kappa: 0.5,
                s: 2.25,
                s_prime: 3.0,
                t_end: 5.0,
                table_eps: 0.03125,
                h_list: vec![0.0625, 0.03125, 0.015625],
            },
            output: OutputConfig { directory: ".".to_string(), prefix: String::new() },
        }
    }
}

fn format_float(v: f64) -> String {
    // `{:?}` prints the shortest decimal that parses back to the same f64.
    format!("{v:?}")
}

fn format_list(vs: &[f64]) -> String {
    vs.iter().map(|&v| format_float(v)).collect::<Vec<_>>().join(",")
}

fn format_matrix(m: &[Vec<f64>]) -> String {
    m.iter().map(|row| format_list(row)).collect::<Vec<_>>().join(";")
}

fn parse_float(key: &str, raw: &str) -> Result<f64, String> {
    raw.trim()
        .parse::<f64>()
        .map_err(|_| format!("config key '{key}': invalid number '{}'", raw.trim()))
}

fn parse_usize(key: &str, raw: &str) -> Result<usize, String> {
    raw.trim()
        .parse::<usize>()
        .map_err(|_| format!("config key '{key}': invalid count '{}'", raw.trim()))
}

fn parse_list(key: &str, raw: &str) -> Result<Vec<f64>, String> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok(Vec::new());
    }
    raw.split(',').map(|part| parse_float(key, part)).collect()
}

fn parse_matrix(key: &str, raw: &str) -> Result<Vec<Vec<f64>>, String> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok(Vec::new());
    }
    raw.split(';').map(|row| parse_list(key, row)).collect()
}

impl ExperimentConfig {
    /// Serializes every key, one per line, in sorted key order.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let mut push = |key: &str, value: String| {
            let _ = writeln!(out, "{key}={value}");
        };
        push("grid.h", format_float(self.grid.h));
        push("grid.n_points", self.grid.n_points.to_string());
        push("grid.offset", format_float(self.grid.offset));
        push("output.directory", self.output.directory.clone());
        push("output.prefix", self.output.prefix.clone());
        push("relaxation.eps", format_list(&self.relaxation.eps));
        push("relaxation.h_list", format_list(&self.relaxation.h_list));
        push("relaxation.kappa", format_float(self.relaxation.kappa));
        push("relaxation.s", format_float(self.relaxation.s));
        push("relaxation.s_prime", format_float(self.relaxation.s_prime));
        push("relaxation.t_end", format_float(self.relaxation.t_end));
        push("relaxation.table_eps", format_float(self.relaxation.table_eps));
        push("system.a", format_matrix(&self.system.a));
        push("system.b", format_matrix(&self.system.b));
        push("system.builtin", self.system.builtin.clone());
        push("system.n2", self.system.n2.to_string());
        push("times.samples", self.times.samples.to_string());
        push(
            "times.spacing",
            match self.times.spacing {
                Spacing::Linear => "linear".to_string(),
                Spacing::Log => "log".to_string(),
            },
        );
        push("times.t_end", format_float(self.times.t_end));
        out
    }

    /// Parses a configuration, starting from defaults; later lines override
    /// earlier ones. Errors name the offending key.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut cfg = Self::default();
        for (line_no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(format!(
                    "config line {}: expected 'section.key=value', got '{line}'",
                    line_no + 1
                ));
            };
            let key = key.trim();
            match key {
                "grid.h" => cfg.grid.h = parse_float(key, value)?,
                "grid.n_points" => cfg.grid.n_points = parse_usize(key, value)?,
                "grid.offset" => cfg.grid.offset = parse_float(key, value)?,
                "output.directory" => cfg.output.directory = value.trim().to_string(),
                "output.prefix" => cfg.output.prefix = value.trim().to_string(),
                "relaxation.eps" => cfg.relaxation.eps = parse_list(key, value)?,
                "relaxation.h_list" => cfg.relaxation.h_list = parse_list(key, value)?,
                "relaxation.kappa" => cfg.relaxation.kappa = parse_float(key, value)?,
                "relaxation.s" => cfg.relaxation.s = parse_float(key, value)?,
                "relaxation.s_prime" => cfg.relaxation.s_prime = parse_float(key, value)?,
                "relaxation.t_end" => cfg.relaxation.t_end = parse_float(key, value)?,
                "relaxation.table_eps" => cfg.relaxation.table_eps = parse_float(key, value)?,
                "system.a" => cfg.system.a = parse_matrix(key, value)?,
                "system.b" => cfg.system.b = parse_matrix(key, value)?,
                "system.builtin" => cfg.system.builtin = value.trim().to_string(),
                "system.n2" => cfg.system.n2 = parse_usize(key, value)?,
                "times.samples" => cfg.times.samples = parse_usize(key, value)?,
                "times.t_end" => cfg.times.t_end = parse_float(key, value)?,
                "times.spacing" => {
                    cfg.times.spacing = match value.trim() {
                        "linear" => Spacing::Linear,
                        "log" => Spacing::Log,
                        other => {
                            return Err(format!(
                                "config key 'times.spacing': expected 'linear' or 'log', got '{other}'"
                            ))
                        }
                    }
                }
                other => return Err(format!("unknown config key '{other}'")),
            }
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let cfg = ExperimentConfig::default();
        let text = cfg.serialize();
        assert_eq!(ExperimentConfig::parse(&text).unwrap(), cfg);
    }

    #[test]
    fn custom_round_trips() {
        let mut cfg = ExperimentConfig::default();
        cfg.grid.h = 0.017;
        cfg.grid.n_points = 384;
        cfg.grid.offset = -0.31;
        cfg.system.builtin.clear();
        cfg.system.a = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        cfg.system.b = vec![vec![0.0, 0.0], vec![0.0, 2.5]];
        cfg.system.n2 = 1;
        cfg.times.t_end = 73.25;
        cfg.times.samples = 41;
        cfg.times.spacing = Spacing::Linear;
        cfg.relaxation.eps = vec![0.3, 0.17, 0.09, 0.041];
        cfg.relaxation.t_end = 2.125;
        cfg.output.directory = "runs/a".to_string();
        cfg.output.prefix = "x_".to_string();
        let text = cfg.serialize();
        assert_eq!(ExperimentConfig::parse(&text).unwrap(), cfg);
    }

    #[test]
    fn parse_errors_name_the_key() {
        let err = ExperimentConfig::parse("grid.h=abc").unwrap_err();
        assert!(err.contains("grid.h"), "{err}");
        let err = ExperimentConfig::parse("grid.depth=4").unwrap_err();
        assert!(err.contains("grid.depth"), "{err}");
        let err = ExperimentConfig::parse("times.spacing=cubic").unwrap_err();
        assert!(err.contains("times.spacing"), "{err}");
        let err = ExperimentConfig::parse("no equals sign here").unwrap_err();
        assert!(err.contains("line 1"), "{err}");
    }

    #[test]
    fn comments_blanks_and_overrides() {
        let text = "# comment\n\ngrid.h=0.5\ngrid.h=0.25\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.grid.h, 0.25);
    }
}
