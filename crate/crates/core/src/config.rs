//! `key = value` experiment configuration shared by every subcommand.
//!
//! Keys are case-insensitive; `#` starts a comment. Later assignments win,
//! so command-line overrides are applied after the file.

use std::path::Path;
use std::str::FromStr;

use crate::cells::Activation;
use crate::data::SyntheticConfig;
use crate::error::{Error, Result};
use crate::training::TrainConfig;

/// Settings for the stability sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct StabilitySettings {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub windows: Vec<usize>,
    /// Scalar recurrent weight `u`.
    pub u: f64,
    pub activation: Activation,
}

impl Default for StabilitySettings {
    fn default() -> Self {
        Self {
            alphas: vec![0.0, 0.5, 1.0],
            betas: vec![0.0, 0.5, 1.0],
            windows: vec![4, 8, 12],
            u: 0.5,
            activation: Activation::Relu,
        }
    }
}

/// Every tunable of the toolkit in one flat namespace.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub data: SyntheticConfig,
    pub train: TrainConfig,
    pub stability: StabilitySettings,
    /// Window lengths for `sweep-T`.
    pub sweep_windows: Vec<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data: SyntheticConfig::default(),
            train: TrainConfig::default(),
            stability: StabilitySettings::default(),
            sweep_windows: vec![5, 10, 20],
        }
    }
}

/// All accepted keys, lower-case.
pub const KEYS: &[&str] = &[
    "seed",
    "data_seed",
    "n_nodes",
    "n_frames",
    "shape",
    "rotation_rate",
    "deformation_amplitude",
    "deformation_frequency",
    "noise_std",
    "k_neighbors",
    "family",
    "k",
    "p",
    "t_w",
    "stride",
    "epochs",
    "lr",
    "lr_decay",
    "adam_beta1",
    "adam_beta2",
    "adam_epsilon",
    "split",
    "activation",
    "propagation",
    "lambda_reg",
    "init_scale",
    "graph_source",
    "stability_alpha",
    "stability_beta",
    "stability_t",
    "stability_u",
    "stability_activation",
    "sweep_t",
];

fn value<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::config(format!("invalid value `{v}` for `{key}`")))
}

fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    let items: Vec<T> = v
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| value(key, s))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::config(format!("`{key}` needs at least one value")));
    }
    Ok(items)
}

impl ExperimentConfig {
    /// Applies one assignment.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let key = key.trim().to_ascii_lowercase();
        let v = v.trim();
        let (d, t, s) = (&mut self.data, &mut self.train, &mut self.stability);
        match key.as_str() {
            "seed" => {
                let seed = value(&key, v)?;
                d.seed = seed;
                t.seed = seed;
            }
            "data_seed" => d.seed = value(&key, v)?,
            "n_nodes" => d.n_nodes = value(&key, v)?,
            "n_frames" => d.n_frames = value(&key, v)?,
            "shape" => d.base_shape = v.parse()?,
            "rotation_rate" => d.rotation_rate = value(&key, v)?,
            "deformation_amplitude" => d.deformation_amplitude = value(&key, v)?,
            "deformation_frequency" => d.deformation_frequency = value(&key, v)?,
            "noise_std" => d.noise_std = value(&key, v)?,
            "k_neighbors" => {
                let k = value(&key, v)?;
                d.k_neighbors = k;
                t.k_neighbors = k;
            }
            "family" => t.family = v.parse()?,
            "k" => t.order = value(&key, v)?,
            "p" => t.hidden = value(&key, v)?,
            "t_w" => t.window = value(&key, v)?,
            "stride" => {
                t.stride = if v.eq_ignore_ascii_case("auto") {
                    None
                } else {
                    Some(value(&key, v)?)
                }
            }
            "epochs" => t.epochs = value(&key, v)?,
            "lr" => t.lr = value(&key, v)?,
            "lr_decay" => t.lr_decay = value(&key, v)?,
            "adam_beta1" => t.adam_beta1 = value(&key, v)?,
            "adam_beta2" => t.adam_beta2 = value(&key, v)?,
            "adam_epsilon" => t.adam_epsilon = value(&key, v)?,
            "split" => t.split = value(&key, v)?,
            "activation" => t.activation = v.parse()?,
            "propagation" => t.propagation = v.parse()?,
            "lambda_reg" => t.lambda_reg = value(&key, v)?,
            "init_scale" => t.init_scale = value(&key, v)?,
            "graph_source" => t.graph_source = v.parse()?,
            "stability_alpha" => s.alphas = list(&key, v)?,
            "stability_beta" => s.betas = list(&key, v)?,
            "stability_t" => s.windows = list(&key, v)?,
            "stability_u" => s.u = value(&key, v)?,
            "stability_activation" => s.activation = v.parse()?,
            "sweep_t" => self.sweep_windows = list(&key, v)?,
            _ => {
                return Err(Error::config(format!(
                    "unknown config key `{key}` (valid: {})",
                    KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Applies every assignment in `key = value` text.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (line, key, v) in parse_assignments(text)? {
            self.set(&key, &v).map_err(|e| match e {
                Error::Config(m) => Error::parse(line, m),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(text)?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    /// Applies `key=value` overrides, e.g. from the command line.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for o in overrides {
            let (k, v) = split_override(o.as_ref())?;
            self.set(k, v)?;
        }
        Ok(())
    }
}

/// Splits `key=value`.
pub fn split_override(s: &str) -> Result<(&str, &str)> {
    s.split_once('=')
        .filter(|(k, _)| !k.trim().is_empty())
        .ok_or_else(|| Error::config(format!("override `{s}` is not of the form key=value")))
}

/// `(line, key, value)` for each non-blank, non-comment line.
pub fn parse_assignments(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(i + 1, format!("expected `key = value`, got `{line}`")))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::parse(i + 1, "missing key"));
        }
        out.push((i + 1, k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cells::ConvFamily;

    #[test]
    fn parses_file_with_comments_and_case() {
        let c = ExperimentConfig::from_text(
            "# experiment\nfamily = first_order\nK = 4\n  P=2  # hidden\nT_w = 7\n\nseed = 9\nsweep_T = 3, 6\n",
        )
        .unwrap();
        assert_eq!(c.train.family, ConvFamily::FirstOrder);
        assert_eq!((c.train.order, c.train.hidden, c.train.window), (4, 2, 7));
        assert_eq!((c.train.seed, c.data.seed), (9, 9));
        assert_eq!(c.sweep_windows, vec![3, 6]);
    }

    #[test]
    fn overrides_win() {
        let mut c = ExperimentConfig::from_text("epochs = 3\n").unwrap();
        c.apply_overrides(&["epochs=5", "stride=1"]).unwrap();
        assert_eq!(c.train.epochs, 5);
        assert_eq!(c.train.stride, Some(1));
        c.apply_overrides(&["stride=auto"]).unwrap();
        assert_eq!(c.train.stride, None);
    }

    #[test]
    fn errors_name_the_problem() {
        let e = ExperimentConfig::from_text("epochs = 1\nbogus = 2\n").unwrap_err();
        assert!(e.to_string().contains("bogus"), "{e}");
        assert!(matches!(e, Error::Parse { line: 2, .. }));
        let e = ExperimentConfig::from_text("shape = blob\n").unwrap_err();
        assert!(e.to_string().contains("ring, grid, cylinder"), "{e}");
        assert!(ExperimentConfig::from_text("epochs\n").is_err());
        assert!(ExperimentConfig::default()
            .apply_overrides(&["noequals"])
            .is_err());
        assert!(ExperimentConfig::default()
            .apply_overrides(&["sweep_t="])
            .is_err());
        assert_eq!(
            ExperimentConfig::from_text("").unwrap(),
            ExperimentConfig::default()
        );
    }
}
