use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use crate::error::CliError;

pub const SEED_ENV: &str = "WEAKMEAS_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    ErrorRate,
    LossRate,
    Correction,
    Fisher,
    Majority,
    Optimize,
    Simulate,
    Figure,
}

impl Mode {
    fn parse(s: &str) -> Option<Self> {
        <Self as ValueEnum>::from_str(s, false).ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Lin,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sweep {
    pub name: String,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    pub scale: Scale,
}

impl Sweep {
    /// `name:start:stop:points:lin|log`
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let bad = |m: &str| CliError::config("sweep", format!("{m} in {text:?}"));
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 5 {
            return Err(bad("expected name:start:stop:points:lin|log"));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("bad number"));
        let scale = match parts[4].trim() {
            "lin" => Scale::Lin,
            "log" => Scale::Log,
            _ => return Err(bad("scale must be lin or log")),
        };
        let sweep = Sweep {
            name: parts[0].trim().to_string(),
            start: num(parts[1])?,
            stop: num(parts[2])?,
            points: parts[3]
                .trim()
                .parse()
                .map_err(|_| bad("bad point count"))?,
            scale,
        };
        sweep.validate()?;
        Ok(sweep)
    }

    fn from_json(v: &Value) -> Result<Self, CliError> {
        if let Some(s) = v.as_str() {
            return Self::parse(s);
        }
        let get = |k: &str| {
            v.get(k)
                .ok_or_else(|| CliError::config("sweep", format!("missing `{k}`")))
        };
        let num = |k: &str| -> Result<f64, CliError> {
            get(k)?
                .as_f64()
                .ok_or_else(|| CliError::config("sweep", format!("`{k}` must be a number")))
        };
        let scale = match get("scale")?.as_str() {
            Some("lin") => Scale::Lin,
            Some("log") => Scale::Log,
            _ => return Err(CliError::config("sweep", "scale must be lin or log")),
        };
        let sweep = Sweep {
            name: get("name")?
                .as_str()
                .ok_or_else(|| CliError::config("sweep", "`name` must be a string"))?
                .to_string(),
            start: num("start")?,
            stop: num("stop")?,
            points: get("points")?
                .as_u64()
                .ok_or_else(|| CliError::config("sweep", "`points` must be an integer"))?
                as usize,
            scale,
        };
        sweep.validate()?;
        Ok(sweep)
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.points < 2 {
            return Err(CliError::config("sweep", "needs at least 2 points"));
        }
        if !self.start.is_finite() || !self.stop.is_finite() {
            return Err(CliError::config("sweep", "bounds must be finite"));
        }
        if self.scale == Scale::Log && (self.start <= 0.0 || self.stop <= 0.0) {
            return Err(CliError::config(
                "sweep",
                "log sweep bounds must be positive",
            ));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let m = (self.points - 1) as f64;
        (0..self.points)
            .map(|i| {
                let t = i as f64 / m;
                match self.scale {
                    Scale::Lin => self.start + t * (self.stop - self.start),
                    Scale::Log => (self.start.ln() + t * (self.stop.ln() - self.start.ln())).exp(),
                }
            })
            .collect()
    }
}

/// Parameter names accepted on the command line and in config files.
pub const PARAM_KEYS: &[&str] = &[
    "n", "k", "phi", "aw_re", "aw_im", "q", "q01", "q10", "p_s", "trials", "seed", "obs", "psi_i",
    "pointer", "id",
];

#[derive(Parser, Debug)]
#[command(
    name = "weakmeas",
    version,
    about = "Entanglement-assisted weak measurement calculator"
)]
struct Args {
    mode: Mode,
    /// JSON config file; command-line values override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    format: Option<Format>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Emit the protocol circuit instead of the result table (simulate mode).
    #[arg(long)]
    dump_circuit: bool,
    /// `name:start:stop:points:lin|log`
    #[arg(long)]
    sweep: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    phi: Option<String>,
    #[arg(long = "aw_re", visible_alias = "aw-re")]
    aw_re: Option<String>,
    #[arg(long = "aw_im", visible_alias = "aw-im")]
    aw_im: Option<String>,
    /// Sets both flip probabilities.
    #[arg(long)]
    q: Option<String>,
    #[arg(long)]
    q01: Option<String>,
    #[arg(long)]
    q10: Option<String>,
    #[arg(long = "p_s", visible_alias = "p-s")]
    p_s: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// sx, sy or sz
    #[arg(long)]
    obs: Option<String>,
    /// zero, one, plus, minus, plus_i, minus_i or bloch:THETA:PHI
    #[arg(long = "psi_i", visible_alias = "psi-i")]
    psi_i: Option<String>,
    /// Initial pointer state, same names as psi_i.
    #[arg(long)]
    pointer: Option<String>,
    /// Figure number (4 to 10).
    #[arg(long)]
    id: Option<String>,
}

impl Args {
    fn params(&self) -> BTreeMap<String, String> {
        let pairs = [
            ("n", &self.n),
            ("k", &self.k),
            ("phi", &self.phi),
            ("aw_re", &self.aw_re),
            ("aw_im", &self.aw_im),
            ("q", &self.q),
            ("q01", &self.q01),
            ("q10", &self.q10),
            ("p_s", &self.p_s),
            ("trials", &self.trials),
            ("seed", &self.seed),
            ("obs", &self.obs),
            ("psi_i", &self.psi_i),
            ("pointer", &self.pointer),
            ("id", &self.id),
        ];
        pairs
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
            .collect()
    }
}

/// Fully resolved experiment: defaults, then the config file, then the
/// command line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub mode: Mode,
    /// Raw values; numeric keys may hold comma-separated lists.
    pub params: BTreeMap<String, String>,
    pub sweep: Option<Sweep>,
    pub format: Format,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    pub dump_circuit: bool,
}

impl ExperimentConfig {
    pub fn new(mode: Mode) -> Self {
        Self {
            mode,
            params: BTreeMap::new(),
            sweep: None,
            format: Format::Csv,
            out: None,
            dump_circuit: false,
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }

    pub fn with_sweep(mut self, sweep: Sweep) -> Self {
        self.sweep = Some(sweep);
        self
    }

    /// Parse a full argument vector (program name first). `env_seed` is the
    /// value of the seed environment variable, if any.
    pub fn from_args<I, T>(args: I, env_seed: Option<String>) -> Result<Self, CliError>
    where
        I: IntoIterator<Item = T>,
        T: Into<OsString> + Clone,
    {
        let args = Args::try_parse_from(args).map_err(CliError::Usage)?;
        let mut cfg = match &args.config {
            Some(path) => Self::from_file(path, args.mode)?,
            None => Self::new(args.mode),
        };
        if let Some(s) = env_seed {
            cfg.params.entry("seed".into()).or_insert(s);
        }
        cfg.params.extend(args.params());
        if let Some(s) = &args.sweep {
            cfg.sweep = Some(Sweep::parse(s)?);
        }
        if let Some(f) = args.format {
            cfg.format = f;
        }
        if args.out.is_some() {
            cfg.out = args.out;
        }
        cfg.dump_circuit |= args.dump_circuit;
        cfg.check_keys()?;
        Ok(cfg)
    }

    fn from_file(path: &Path, mode: Mode) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config("config", format!("{}: {e}", path.display())))?;
        let doc: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::config("config", format!("{}: {e}", path.display())))?;
        Self::from_json(&doc, mode)
    }

    /// Config document: an object of parameter values plus optional
    /// `mode`, `sweep`, `format`, `out` and `dump_circuit`.
    pub fn from_json(doc: &Value, mode: Mode) -> Result<Self, CliError> {
        let obj = doc
            .as_object()
            .ok_or_else(|| CliError::config("config", "top level must be an object"))?;
        if let Some(m) = obj.get("mode") {
            let named = m.as_str().and_then(Mode::parse);
            if named != Some(mode) {
                return Err(CliError::config(
                    "mode",
                    format!("config file is for mode {m}, command line asks for {mode:?}"),
                ));
            }
        }
        let mut cfg = Self::new(mode);
        for (key, v) in obj {
            match key.as_str() {
                "mode" => {}
                "sweep" => cfg.sweep = Some(Sweep::from_json(v)?),
                "format" => {
                    cfg.format = match v.as_str() {
                        Some("csv") => Format::Csv,
                        Some("json") => Format::Json,
                        _ => return Err(CliError::config("format", "must be csv or json")),
                    }
                }
                "out" => {
                    cfg.out =
                        Some(PathBuf::from(v.as_str().ok_or_else(|| {
                            CliError::config("out", "must be a path string")
                        })?))
                }
                "dump_circuit" => {
                    cfg.dump_circuit = v
                        .as_bool()
                        .ok_or_else(|| CliError::config("dump_circuit", "must be a boolean"))?
                }
                _ => {
                    cfg.params.insert(key.clone(), json_scalar_list(key, v)?);
                }
            }
        }
        cfg.check_keys()?;
        Ok(cfg)
    }

    fn check_keys(&self) -> Result<(), CliError> {
        for key in self.params.keys() {
            if !PARAM_KEYS.contains(&key.as_str()) {
                return Err(CliError::config(key, "unknown parameter"));
            }
        }
        Ok(())
    }

    /// Compact JSON of everything that determines the output.
    pub fn echo(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

fn json_scalar_list(key: &str, v: &Value) -> Result<String, CliError> {
    let scalar = |x: &Value| -> Result<String, CliError> {
        match x {
            Value::Number(n) => Ok(n.to_string()),
            Value::String(s) => Ok(s.clone()),
            _ => Err(CliError::config(key, "values must be numbers or strings")),
        }
    };
    match v {
        Value::Array(items) => Ok(items
            .iter()
            .map(scalar)
            .collect::<Result<Vec<_>, _>>()?
            .join(",")),
        other => scalar(other),
    }
}
