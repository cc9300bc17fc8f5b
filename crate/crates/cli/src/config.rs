//! Flat `key = value` protocol configuration.
//!
//! Lines starting with `#` are comments. Every key has a default, so an
//! empty file is a valid configuration. [`ProtocolConfig::to_text`] writes
//! every key and parses back to an equal value.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use gaussify::distill::Kernel;
use gaussify::gaussian::tmss_fock;
use gaussify::io::load_state;
use gaussify::prep::{example_state, prepared_family, ExampleState};
use gaussify::FockOperator;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateKind {
    Vacuum,
    Example1,
    Example2,
    Example3,
    Prepared,
    Tmss,
    File,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Parameter varied by `sweep`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Epsilon,
    Eta,
    Lambda,
    Theta,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Epsilon => "epsilon",
            Axis::Eta => "eta",
            Axis::Lambda => "lambda",
            Axis::Theta => "theta",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub cutoff: usize,
    pub steps: usize,
    pub eta: f64,
    pub kernel: Kernel,
    pub p_min: f64,
    pub state: StateKind,
    pub epsilon: f64,
    pub lambda: f64,
    pub theta: f64,
    pub path: Option<PathBuf>,
    pub measure_negativity: bool,
    pub measure_entropy: bool,
    pub measure_squeezing: bool,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub sweep_axis: Option<Axis>,
    pub sweep_min: f64,
    pub sweep_max: f64,
    pub sweep_count: usize,
    pub wigner_mode: usize,
    pub wigner_steps: Vec<usize>,
    pub wigner_half_width: f64,
    pub wigner_points: usize,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            cutoff: 12,
            steps: 8,
            eta: 1.0,
            kernel: Kernel::Direct,
            p_min: gaussify::distill::P_MIN,
            state: StateKind::Example1,
            epsilon: 0.5,
            lambda: 0.4,
            theta: 1.0,
            path: None,
            measure_negativity: true,
            measure_entropy: true,
            measure_squeezing: true,
            out: None,
            format: Format::Csv,
            sweep_axis: None,
            sweep_min: 0.05,
            sweep_max: 0.95,
            sweep_count: 19,
            wigner_mode: 0,
            wigner_steps: vec![0, 1, 2],
            wigner_half_width: 6.0,
            wigner_points: 201,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("cannot parse `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(CliError::Config(format!(
            "`{key}` expects true or false, got `{value}`"
        ))),
    }
}

fn parse_enum<T: for<'de> Deserialize<'de>>(key: &str, value: &str) -> Result<T, CliError> {
    serde_json::from_value(serde_json::Value::String(value.to_string()))
        .map_err(|_| CliError::Config(format!("unknown value `{value}` for `{key}`")))
}

fn enum_name<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        _ => unreachable!("unit enum variants serialize to strings"),
    }
}

fn optional_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

impl ProtocolConfig {
    /// Apply one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let v = value.trim();
        match key.trim() {
            "cutoff" => self.cutoff = parse(key, v)?,
            "steps" => self.steps = parse(key, v)?,
            "eta" => self.eta = parse(key, v)?,
            "kernel" => self.kernel = parse_enum(key, v)?,
            "p_min" => self.p_min = parse(key, v)?,
            "state" => self.state = parse_enum(key, v)?,
            "epsilon" => self.epsilon = parse(key, v)?,
            "lambda" => self.lambda = parse(key, v)?,
            "theta" => self.theta = parse(key, v)?,
            "path" => self.path = optional_path(v),
            "measure.negativity" => self.measure_negativity = parse_bool(key, v)?,
            "measure.entropy" => self.measure_entropy = parse_bool(key, v)?,
            "measure.squeezing" => self.measure_squeezing = parse_bool(key, v)?,
            "out" => self.out = optional_path(v),
            "format" => self.format = parse_enum(key, v)?,
            "sweep.axis" => {
                self.sweep_axis = if v.is_empty() { None } else { Some(parse_enum(key, v)?) };
            }
            "sweep.min" => self.sweep_min = parse(key, v)?,
            "sweep.max" => self.sweep_max = parse(key, v)?,
            "sweep.count" => self.sweep_count = parse(key, v)?,
            "wigner.mode" => self.wigner_mode = parse(key, v)?,
            "wigner.steps" => {
                self.wigner_steps = v.split(',').map(|s| parse(key, s.trim())).collect::<Result<_, _>>()?;
            }
            "wigner.half_width" => self.wigner_half_width = parse(key, v)?,
            "wigner.points" => self.wigner_points = parse(key, v)?,
            other => return Err(CliError::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Apply a `key=value` override as given on the command line.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), CliError> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override `{pair}` is not key=value")))?;
        self.set(k, v)
    }

    pub fn from_text(text: &str) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", n + 1)))?;
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let steps: Vec<String> = self.wigner_steps.iter().map(|s| s.to_string()).collect();
        let mut s = String::new();
        let mut line = |k: &str, v: String| writeln!(s, "{k} = {v}").unwrap();
        line("cutoff", self.cutoff.to_string());
        line("steps", self.steps.to_string());
        line("eta", self.eta.to_string());
        line("kernel", enum_name(&self.kernel));
        line("p_min", self.p_min.to_string());
        line("state", enum_name(&self.state));
        line("epsilon", self.epsilon.to_string());
        line("lambda", self.lambda.to_string());
        line("theta", self.theta.to_string());
        line("path", path(&self.path));
        line("measure.negativity", self.measure_negativity.to_string());
        line("measure.entropy", self.measure_entropy.to_string());
        line("measure.squeezing", self.measure_squeezing.to_string());
        line("out", path(&self.out));
        line("format", enum_name(&self.format));
        line(
            "sweep.axis",
            self.sweep_axis.map(|a| a.name().to_string()).unwrap_or_default(),
        );
        line("sweep.min", self.sweep_min.to_string());
        line("sweep.max", self.sweep_max.to_string());
        line("sweep.count", self.sweep_count.to_string());
        line("wigner.mode", self.wigner_mode.to_string());
        line("wigner.steps", steps.join(","));
        line("wigner.half_width", self.wigner_half_width.to_string());
        line("wigner.points", self.wigner_points.to_string());
        s
    }

    /// Domain checks shared by every command. State parameters are checked
    /// when the state is built.
    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |m: String| Err(CliError::Config(m));
        if !(1..=40).contains(&self.cutoff) {
            return fail(format!("cutoff {} outside [1, 40]", self.cutoff));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return fail(format!("eta {} outside [0, 1]", self.eta));
        }
        if !(self.p_min >= 0.0 && self.p_min < 1.0) {
            return fail(format!("p_min {} outside [0, 1)", self.p_min));
        }
        if self.state == StateKind::File && self.path.is_none() {
            return fail("state = file needs `path`".into());
        }
        Ok(())
    }

    pub fn validate_sweep(&self) -> Result<Axis, CliError> {
        let axis = self
            .sweep_axis
            .ok_or_else(|| CliError::Config("sweep needs `sweep.axis`".into()))?;
        let finite = self.sweep_min.is_finite() && self.sweep_max.is_finite();
        if self.sweep_count == 0 || !finite || self.sweep_min > self.sweep_max {
            return Err(CliError::Config(format!(
                "empty sweep range [{}, {}] with {} samples",
                self.sweep_min, self.sweep_max, self.sweep_count
            )));
        }
        Ok(axis)
    }

    /// Evenly spaced sweep values, endpoints included.
    pub fn sweep_values(&self) -> Vec<f64> {
        let n = self.sweep_count;
        if n == 1 {
            return vec![self.sweep_min];
        }
        (0..n)
            .map(|i| self.sweep_min + (self.sweep_max - self.sweep_min) * i as f64 / (n - 1) as f64)
            .collect()
    }

    pub fn with_axis(&self, axis: Axis, value: f64) -> Self {
        let mut c = self.clone();
        match axis {
            Axis::Epsilon => c.epsilon = value,
            Axis::Eta => c.eta = value,
            Axis::Lambda => c.lambda = value,
            Axis::Theta => c.theta = value,
        }
        c
    }

    /// The normalized two-mode input state.
    pub fn initial_state(&self) -> Result<FockOperator, CliError> {
        let c = self.cutoff;
        let rho = match self.state {
            StateKind::Vacuum => FockOperator::projector(2, c, &[0, 0])?,
            StateKind::Example1 => example_state(ExampleState::Example1(self.epsilon), c)?,
            StateKind::Example2 => example_state(ExampleState::Example2(self.epsilon), c)?,
            StateKind::Example3 => example_state(ExampleState::Example3(self.epsilon), c)?,
            StateKind::Prepared => prepared_family(self.lambda, self.theta, c)?,
            StateKind::Tmss => tmss_fock(self.lambda, c)?.normalized()?,
            StateKind::File => {
                let path = self.path.as_ref().expect("validated");
                let op = load_state(path)?;
                if op.modes() != 2 {
                    return Err(CliError::Config(format!(
                        "{} holds a {}-mode state, expected 2",
                        path.display(),
                        op.modes()
                    )));
                }
                op.with_cutoff(c).normalized()?
            }
        };
        Ok(rho)
    }
}
