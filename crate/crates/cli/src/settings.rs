//! Resolved run settings. Layers apply in order: built-in defaults, the
//! `--config` JSON file, `VSG_*` environment variables, then flags.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use vsg_core::eval::EvalConfig;
use vsg_core::resampler::ResamplerDims;
use vsg_core::synth::NoiseSpec;
use vsg_core::tokens::{TokenGridSpec, DEFAULT_TAU_EFF, DEFAULT_WINDOW_SECONDS};
use vsg_core::tracker::TrackerConfig;
use vsg_core::MaskVideo;

use crate::CliError;

pub const ENV_PREFIX: &str = "VSG_";

const SECTIONS: [&str; 6] = ["tracker", "noise", "grid", "tokens", "eval", "resampler"];

/// Patch layout of the token grid; frame size, length and fps come from the
/// mask video being tokenized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSettings {
    pub frames_per_token: usize,
    pub patch_merge: usize,
    pub patch_px: usize,
}

impl Default for GridSettings {
    fn default() -> Self {
        GridSettings {
            frames_per_token: 2,
            patch_merge: 2,
            patch_px: 2,
        }
    }
}

impl GridSettings {
    pub fn for_video(&self, video: &MaskVideo) -> TokenGridSpec {
        TokenGridSpec {
            frames_per_token: self.frames_per_token,
            patch_merge: self.patch_merge,
            patch_px: self.patch_px,
            width: video.width,
            height: video.height,
            n_frames: video.n_frames,
            fps: video.fps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenSettings {
    pub tau_eff: f64,
    pub window_seconds: f64,
}

impl Default for TokenSettings {
    fn default() -> Self {
        TokenSettings {
            tau_eff: DEFAULT_TAU_EFF,
            window_seconds: DEFAULT_WINDOW_SECONDS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    /// Required by every stochastic verb.
    pub seed: Option<u64>,
    pub tracker: TrackerConfig,
    pub noise: NoiseSpec,
    pub grid: GridSettings,
    pub tokens: TokenSettings,
    pub eval: EvalConfig,
    /// The check verb runs at desk scale, not at the 2048-wide defaults.
    pub resampler: ResamplerDims,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            seed: None,
            tracker: TrackerConfig::default(),
            noise: NoiseSpec::default(),
            grid: GridSettings::default(),
            tokens: TokenSettings::default(),
            eval: EvalConfig::default(),
            resampler: ResamplerDims {
                depth: 2,
                n_queries: 4,
                d_latent: 8,
                d_in: 8,
                d_out: 8,
                d_hidden: 8,
            },
        }
    }
}

impl Settings {
    pub fn require_seed(&self, verb: &str) -> Result<u64, CliError> {
        self.seed
            .ok_or_else(|| CliError::Config(format!("{verb} is stochastic and needs a seed (--seed, VSG_SEED or config)")))
    }
}

/// Accumulates layers as a JSON tree so every layer can address any field.
pub struct SettingsBuilder {
    tree: Value,
}

impl SettingsBuilder {
    pub fn new() -> Self {
        SettingsBuilder {
            tree: serde_json::to_value(Settings::default()).expect("defaults serialize"),
        }
    }

    pub fn file(mut self, text: &str) -> Result<Self, CliError> {
        let layer: Value = serde_json::from_str(text).map_err(|e| CliError::Core(e.into()))?;
        if !layer.is_object() {
            return Err(CliError::Config("config file must hold a JSON object".into()));
        }
        merge(&mut self.tree, layer);
        Ok(self)
    }

    /// `VSG_SEED`, `VSG_TRACKER_MIN_AREA`, `VSG_EVAL_TEMPORAL_IOU_THRESH`, ...
    pub fn env(mut self, vars: impl IntoIterator<Item = (String, String)>) -> Result<Self, CliError> {
        let mut vars: Vec<_> = vars
            .into_iter()
            .filter_map(|(k, v)| k.strip_prefix(ENV_PREFIX).map(|rest| (rest.to_ascii_lowercase(), v)))
            .collect();
        vars.sort();
        for (key, raw) in vars {
            let path = match SECTIONS.iter().find(|s| key.starts_with(&format!("{s}_"))) {
                Some(section) => vec![section.to_string(), key[section.len() + 1..].to_string()],
                None => vec![key],
            };
            self.set_path(&path, parse_scalar(&raw))?;
        }
        Ok(self)
    }

    /// `section.field=value` from `--set`.
    pub fn assignment(mut self, text: &str) -> Result<Self, CliError> {
        let (key, raw) = text
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("expected key=value, got {text:?}")))?;
        let path: Vec<String> = key.trim().split('.').map(str::to_string).collect();
        self.set_path(&path, parse_scalar(raw.trim()))?;
        Ok(self)
    }

    pub fn value(mut self, path: &[&str], value: Value) -> Result<Self, CliError> {
        let path: Vec<String> = path.iter().map(|s| s.to_string()).collect();
        self.set_path(&path, value)?;
        Ok(self)
    }

    fn set_path(&mut self, path: &[String], value: Value) -> Result<(), CliError> {
        let unknown = || CliError::Config(format!("unknown setting {:?}", path.join(".")));
        let (last, parents) = path.split_last().ok_or_else(unknown)?;
        let mut node = &mut self.tree;
        for p in parents {
            node = node.get_mut(p.as_str()).filter(|n| n.is_object()).ok_or_else(unknown)?;
        }
        let slot = node.get_mut(last.as_str()).ok_or_else(unknown)?;
        if slot.is_object() {
            return Err(CliError::Config(format!("{:?} is a section, not a value", path.join("."))));
        }
        *slot = value;
        Ok(())
    }

    pub fn build(self) -> Result<Settings, CliError> {
        let settings: Settings =
            serde_json::from_value(self.tree).map_err(|e| CliError::Config(format!("invalid settings: {e}")))?;
        settings.tracker.validate().map_err(|e| CliError::Config(e.to_string()))?;
        settings.noise.validate().map_err(|e| CliError::Config(e.to_string()))?;
        settings.eval.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(settings)
    }
}

fn parse_scalar(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

fn merge(base: &mut Value, layer: Value) {
    match (base, layer) {
        (Value::Object(b), Value::Object(l)) => {
            for (k, v) in l {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_beat_env_beat_file() {
        let s = SettingsBuilder::new()
            .file(r#"{"tracker": {"min_area": 5, "morph_radius": 2}, "seed": 1}"#)
            .unwrap()
            .env([
                ("VSG_TRACKER_MIN_AREA".to_string(), "7".to_string()),
                ("VSG_SEED".to_string(), "2".to_string()),
                ("OTHER".to_string(), "x".to_string()),
            ])
            .unwrap()
            .assignment("tracker.min_area=9")
            .unwrap()
            .build()
            .unwrap();
        assert_eq!(s.tracker.min_area, 9);
        assert_eq!(s.tracker.morph_radius, 2);
        assert_eq!(s.seed, Some(2));
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        let err = SettingsBuilder::new().assignment("tracker.nope=1").err().unwrap();
        assert!(matches!(err, CliError::Config(_)));
        let err = SettingsBuilder::new()
            .env([("VSG_BOGUS".to_string(), "1".to_string())])
            .err()
            .unwrap();
        assert!(matches!(err, CliError::Config(_)));
        assert!(SettingsBuilder::new().file(r#"{"extra": 1}"#).unwrap().build().is_err());
    }

    #[test]
    fn string_values_reach_enums() {
        let s = SettingsBuilder::new()
            .env([("VSG_EVAL_OBJECT_MODE".to_string(), "lenient".to_string())])
            .unwrap()
            .build()
            .unwrap();
        assert_eq!(s.eval.object_mode, vsg_core::eval::ObjectMode::Lenient);
    }
}
