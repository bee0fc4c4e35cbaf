//! Line-oriented `section.key = value` configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use qinsch::{PhysParams, PicardSettings, ScalarField, TorusGrid, VectorField};

use crate::init;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// 1-based line number, 0 when no single line is responsible.
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "{}", self.message)
        } else {
            write!(f, "line {}: {}", self.line, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhiPreset {
    Spinodal,
    SingleMode,
    TanhStripe,
    TwoMode,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UPreset {
    Zero,
    TaylorGreen,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub dim: usize,
    pub n: usize,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitConfig {
    pub phi_preset: PhiPreset,
    pub u_preset: UPreset,
    /// Mean of φ for `spinodal` and the value for `constant`.
    pub phi_mean: f64,
    pub noise_amp: f64,
    pub seed: u64,
    /// Wavenumber and amplitude for `single-mode`.
    pub mode: f64,
    pub amplitude: f64,
    /// Interface width for `tanh-stripe`.
    pub width: f64,
    pub u_amp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Diagnostics row every `every` steps.
    pub every: usize,
    /// Checkpoint every `checkpoint_every` steps; 0 writes only the final state.
    pub checkpoint_every: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub grid: GridConfig,
    pub params: PhysParams,
    pub dt: f64,
    pub t_end: f64,
    pub picard: PicardSettings,
    pub init: InitConfig,
    pub output: OutputConfig,
    /// Margin of the φ-bound diagnostic.
    pub theta: f64,
}

impl Default for Config {
    fn default() -> Self {
        parse_config("").expect("defaults are valid")
    }
}

impl Config {
    pub fn torus(&self) -> TorusGrid {
        TorusGrid::new(vec![self.grid.n; self.grid.dim], self.grid.length).expect("validated")
    }

    pub fn initial_phi(&self, grid: &TorusGrid) -> ScalarField {
        let i = &self.init;
        match i.phi_preset {
            PhiPreset::Spinodal => init::spinodal(grid, i.phi_mean, i.noise_amp, i.seed),
            PhiPreset::SingleMode => init::single_mode(grid, i.mode, i.amplitude),
            PhiPreset::TanhStripe => init::tanh_stripe(grid, i.width),
            PhiPreset::TwoMode => init::two_mode(grid),
            PhiPreset::Constant => ScalarField::constant(grid, i.phi_mean),
        }
    }

    pub fn initial_u(&self, grid: &TorusGrid) -> VectorField {
        match self.init.u_preset {
            UPreset::Zero => VectorField::zeros(grid),
            UPreset::TaylorGreen => init::taylor_green(grid, self.init.u_amp),
        }
    }
}

const KEYS: &[&str] = &[
    "grid.dim",
    "grid.n",
    "grid.length",
    "params.epsilon",
    "params.alpha",
    "params.nu",
    "params.kappa",
    "params.s",
    "params.delta",
    "time.dt",
    "time.t_end",
    "picard.tol",
    "picard.max_iter",
    "picard.dt_backoff",
    "picard.max_backoffs",
    "init.phi_preset",
    "init.u_preset",
    "init.phi_mean",
    "init.noise_amp",
    "init.seed",
    "init.mode",
    "init.amplitude",
    "init.width",
    "init.u_amp",
    "output.dir",
    "output.every",
    "output.checkpoint_every",
    "diagnostics.theta",
];

struct Entries(BTreeMap<String, (usize, String)>);

impl Entries {
    fn line(&self, key: &str) -> usize {
        self.0.get(key).map_or(0, |e| e.0)
    }

    fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError> {
        match self.0.get(key) {
            None => Ok(default),
            Some((line, raw)) => raw
                .parse()
                .map_err(|_| err(*line, format!("cannot parse {key} = {raw:?}"))),
        }
    }

    fn positive(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        let v: f64 = self.get(key, default)?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(err(self.line(key), format!("{key} must be positive, got {v}")));
        }
        Ok(v)
    }
}

pub fn parse_config(text: &str) -> Result<Config, ConfigError> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| err(line, format!("expected `section.key = value`, got {body:?}")))?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(err(line, format!("unknown key {key:?}")));
        }
        if let Some((first, _)) = map.get(key) {
            return Err(err(line, format!("{key} already set on line {first}")));
        }
        map.insert(key.to_string(), (line, value.trim().to_string()));
    }
    let e = Entries(map);

    let grid = GridConfig {
        dim: e.get("grid.dim", 2)?,
        n: e.get("grid.n", 64)?,
        length: e.get("grid.length", 2.0 * std::f64::consts::PI)?,
    };
    if grid.dim != 2 && grid.dim != 3 {
        return Err(err(e.line("grid.dim"), format!("grid.dim must be 2 or 3, got {}", grid.dim)));
    }
    if grid.n < 8 || !grid.n.is_power_of_two() {
        return Err(err(
            e.line("grid.n"),
            format!("grid.n must be a power of two >= 8, got {}", grid.n),
        ));
    }
    if let Err(g) = TorusGrid::new(vec![grid.n; grid.dim], grid.length) {
        return Err(err(e.line("grid.length"), g.to_string()));
    }

    let params = match (e.0.get("params.epsilon"), e.0.get("params.alpha")) {
        (Some((l1, _)), Some((l2, _))) => {
            return Err(err(
                *l1.max(l2),
                format!(
                    "params.epsilon (line {l1}) and params.alpha (line {l2}) are mutually exclusive"
                ),
            ))
        }
        (_, Some((line, _))) => PhysParams::from_alpha(e.get("params.alpha", 0.0)?)
            .map_err(|m| err(*line, m.to_string()))?,
        (eps, None) => PhysParams::from_epsilon(e.get("params.epsilon", -0.5)?)
            .map_err(|m| err(eps.map_or(0, |x| x.0), m.to_string()))?,
    };
    let params = params
        .with_nu(e.get("params.nu", PhysParams::DEFAULT_NU)?)
        .map_err(|m| err(e.line("params.nu"), m.to_string()))?
        .with_kappa(e.get("params.kappa", PhysParams::DEFAULT_KAPPA)?)
        .map_err(|m| err(e.line("params.kappa"), m.to_string()))?
        .with_s(e.get("params.s", PhysParams::DEFAULT_S)?)
        .map_err(|m| err(e.line("params.s"), m.to_string()))?
        .with_delta(e.get("params.delta", PhysParams::DEFAULT_DELTA)?)
        .map_err(|m| err(e.line("params.delta"), m.to_string()))?;

    let dt = e.positive("time.dt", 1e-3)?;
    let t_end: f64 = e.get("time.t_end", 0.2)?;
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(err(e.line("time.t_end"), "time.t_end must be non-negative"));
    }

    let picard = PicardSettings {
        tol: e.positive("picard.tol", 1e-10)?,
        max_iter: e.get("picard.max_iter", 200)?,
        dt_backoff: e.get("picard.dt_backoff", 0.5)?,
        max_backoffs: e.get("picard.max_backoffs", 10)?,
    };
    if let Err(m) = picard.validate() {
        let line = ["picard.max_iter", "picard.dt_backoff"]
            .iter()
            .map(|k| e.line(k))
            .find(|&l| l > 0)
            .unwrap_or(0);
        return Err(err(line, m.to_string()));
    }

    let phi_preset = match e.get("init.phi_preset", "spinodal".to_string())?.as_str() {
        "spinodal" => PhiPreset::Spinodal,
        "single-mode" => PhiPreset::SingleMode,
        "tanh-stripe" => PhiPreset::TanhStripe,
        "two-mode" => PhiPreset::TwoMode,
        "constant" => PhiPreset::Constant,
        other => return Err(err(e.line("init.phi_preset"), format!("unknown phi preset {other:?}"))),
    };
    let u_preset = match e.get("init.u_preset", "zero".to_string())?.as_str() {
        "zero" => UPreset::Zero,
        "taylor-green" => UPreset::TaylorGreen,
        other => return Err(err(e.line("init.u_preset"), format!("unknown velocity preset {other:?}"))),
    };
    let noise_amp: f64 = e.get("init.noise_amp", 0.01)?;
    if !(noise_amp >= 0.0 && noise_amp.is_finite()) {
        return Err(err(e.line("init.noise_amp"), "init.noise_amp must be non-negative"));
    }
    let seed = match e.0.get("init.seed") {
        Some(_) => e.get("init.seed", 0u64)?,
        None if e.0.contains_key("init.noise_amp") && noise_amp > 0.0 => {
            return Err(err(
                e.line("init.noise_amp"),
                "init.seed is required when init.noise_amp > 0",
            ))
        }
        None => init::DEFAULT_SEED,
    };
    let init = InitConfig {
        phi_preset,
        u_preset,
        phi_mean: e.get("init.phi_mean", 0.0)?,
        noise_amp,
        seed,
        mode: e.get("init.mode", 1.0)?,
        amplitude: e.get("init.amplitude", 0.1)?,
        width: e.positive("init.width", 0.3)?,
        u_amp: e.get("init.u_amp", 0.1)?,
    };

    let output = OutputConfig {
        dir: PathBuf::from(e.get("output.dir", "out".to_string())?),
        every: e.get("output.every", 1usize)?.max(1),
        checkpoint_every: e.get("output.checkpoint_every", 0)?,
    };
    let theta = e.positive("diagnostics.theta", 0.5)?;

    Ok(Config {
        grid,
        params,
        dt,
        t_end,
        picard,
        init,
        output,
        theta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsilon_derives_alpha_and_zeta() {
        let c = parse_config("params.epsilon = -0.5").unwrap();
        assert!((c.params.alpha() - 1.0 / 3.0).abs() < 1e-15);
        assert!((c.params.zeta() - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn empty_file_gives_defaults() {
        let c = parse_config("").unwrap();
        assert_eq!((c.grid.dim, c.grid.n), (2, 64));
        assert_eq!(c.params.s(), 1.6);
        assert_eq!(c.params.delta(), 1e-6);
        assert_eq!(c.params.kappa(), 1.0);
        assert_eq!(c.params.nu(), 1.0);
        assert_eq!(c.init.seed, init::DEFAULT_SEED);
    }

    #[test]
    fn epsilon_alpha_conflict_names_both_lines() {
        let e = parse_config("params.epsilon = -0.5\nparams.alpha = 0.1").unwrap_err();
        assert_eq!(e.line, 2);
        assert!(e.message.contains("line 1") && e.message.contains("line 2"), "{e}");
    }

    #[test]
    fn errors_name_the_offending_line() {
        let e = parse_config("# comment\n\ngrid.n = 64\nfoo.bar = 1").unwrap_err();
        assert_eq!(e.line, 4);
        let e = parse_config("params.nu = -1").unwrap_err();
        assert_eq!(e.line, 1);
        let e = parse_config("grid.dim = 2\ngrid.n = 12").unwrap_err();
        assert_eq!(e.line, 2);
        let e = parse_config("time.dt = 1e-3\ninit.noise_amp = 0.05").unwrap_err();
        assert_eq!(e.line, 2);
        assert!(parse_config("init.noise_amp = 0.05\ninit.seed = 3").is_ok());
        let e = parse_config("grid.n = 64\ngrid.n = 32").unwrap_err();
        assert_eq!(e.line, 2);
    }

    #[test]
    fn alpha_alone_is_accepted() {
        let c = parse_config("params.alpha = 0.2 # comment").unwrap();
        assert!((c.params.epsilon() + 2.0 * 0.2 / 1.2).abs() < 1e-15);
    }
}
