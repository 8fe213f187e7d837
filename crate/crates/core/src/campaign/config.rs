use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CampaignError;
use crate::mutator::FuzzConfig;
use crate::sampler::{GenConfig, Mode};

/// Where the objects under test come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum GeneratorConfig {
    /// Objects drawn from a corpus file (`%%OBJ%%`-separated). Without a
    /// path, the bundled synthetic corpus is used.
    Baseline {
        #[serde(default)]
        corpus: Option<PathBuf>,
    },
    Model {
        mode: Mode,
        checkpoint: PathBuf,
        #[serde(default = "default_t_fuzz")]
        t_fuzz: f64,
        #[serde(default = "default_p_t")]
        p_t: f64,
        #[serde(default = "default_max_len")]
        max_len: usize,
    },
}

fn default_t_fuzz() -> f64 {
    GenConfig::default().t_fuzz
}

fn default_p_t() -> f64 {
    GenConfig::default().p_t
}

fn default_max_len() -> usize {
    GenConfig::default().max_len
}

fn default_hosts() -> Vec<u8> {
    vec![1, 2, 3]
}

fn default_n_objects() -> usize {
    500
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    /// Display name; derived from the generator when absent.
    #[serde(default)]
    pub name: Option<String>,
    pub generator: GeneratorConfig,
    /// When set, every object is replaced by `variants` fuzzed copies.
    #[serde(default)]
    pub post_mutation: Option<FuzzConfig>,
    #[serde(default = "default_hosts")]
    pub hosts: Vec<u8>,
    #[serde(default = "default_n_objects")]
    pub n_objects: usize,
    #[serde(default)]
    pub rng_seed: u64,
}

impl CampaignConfig {
    pub fn new(generator: GeneratorConfig) -> Self {
        CampaignConfig {
            name: None,
            generator,
            post_mutation: None,
            hosts: default_hosts(),
            n_objects: default_n_objects(),
            rng_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), CampaignError> {
        let bad = |m: String| Err(CampaignError::Config(m));
        if self.n_objects == 0 {
            return bad("n_objects must be at least 1".into());
        }
        if self.hosts.is_empty() {
            return bad("at least one host must be selected".into());
        }
        if let Some(h) = self.hosts.iter().find(|&&h| !(1..=3).contains(&h)) {
            return bad(format!("unknown host {h}; bundled hosts are 1, 2 and 3"));
        }
        let mut sorted = self.hosts.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.hosts.len() {
            return bad("duplicate host in selection".into());
        }
        if let Some(f) = &self.post_mutation {
            f.validate().map_err(|e| CampaignError::Config(e.to_string()))?;
        }
        if let GeneratorConfig::Model { t_fuzz, p_t, max_len, .. } = &self.generator {
            if !(0.0..=1.0).contains(t_fuzz) || !(0.0..=1.0).contains(p_t) || *max_len < 16 {
                return bad("model generator needs t_fuzz, p_t in [0, 1] and max_len >= 16".into());
            }
        }
        Ok(())
    }

    pub fn display_name(&self) -> String {
        if let Some(n) = &self.name {
            return n.clone();
        }
        let base = match &self.generator {
            GeneratorConfig::Baseline { .. } => "baseline".to_string(),
            GeneratorConfig::Model { mode, .. } => mode.to_string(),
        };
        match self.post_mutation {
            Some(_) => format!("{base}+random"),
            None => base,
        }
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.generator {
            GeneratorConfig::Baseline { corpus: Some(p) } => fix(p),
            GeneratorConfig::Model { checkpoint, .. } => fix(checkpoint),
            GeneratorConfig::Baseline { corpus: None } => {}
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CampaignList {
    campaign: Vec<CampaignConfig>,
}

/// Parse a campaign file: either one campaign at top level or a list of
/// `[[campaign]]` tables. Relative paths resolve against `base_dir`.
pub fn parse_campaigns(text: &str, base_dir: &Path) -> Result<Vec<CampaignConfig>, CampaignError> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| CampaignError::Config(e.to_string()))?;
    let mut configs = if table.contains_key("campaign") {
        CampaignList::deserialize(table).map_err(|e| CampaignError::Config(e.to_string()))?.campaign
    } else {
        vec![CampaignConfig::deserialize(table).map_err(|e| CampaignError::Config(e.to_string()))?]
    };
    if configs.is_empty() {
        return Err(CampaignError::Config("no campaigns defined".into()));
    }
    for c in &mut configs {
        c.resolve_paths(base_dir);
        c.validate()?;
    }
    Ok(configs)
}

pub fn load_campaigns(path: &Path) -> Result<Vec<CampaignConfig>, CampaignError> {
    let text = std::fs::read_to_string(path)?;
    parse_campaigns(&text, path.parent().unwrap_or(Path::new(".")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_campaign() {
        let text = r#"
            n_objects = 20
            rng_seed = 4
            hosts = [1, 3]
            [generator]
            kind = "model"
            mode = "samplespace"
            checkpoint = "ckpt/epoch25.bin"
            [post_mutation]
            fuzz_factor = 50
        "#;
        let c = parse_campaigns(text, Path::new("/exp")).unwrap();
        assert_eq!(c.len(), 1);
        let c = &c[0];
        assert_eq!(c.display_name(), "samplespace+random");
        assert_eq!(c.post_mutation.unwrap().variants, 10);
        match &c.generator {
            GeneratorConfig::Model { checkpoint, t_fuzz, .. } => {
                assert_eq!(checkpoint, Path::new("/exp/ckpt/epoch25.bin"));
                assert_eq!(*t_fuzz, 0.9);
            }
            g => panic!("{g:?}"),
        }
    }

    #[test]
    fn campaign_list() {
        let text = r#"
            [[campaign]]
            name = "base"
            generator = { kind = "baseline" }
            [[campaign]]
            generator = { kind = "baseline", corpus = "/abs/objects.txt" }
            n_objects = 3
        "#;
        let c = parse_campaigns(text, Path::new("/x")).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].display_name(), "base");
        assert_eq!(c[1].generator, GeneratorConfig::Baseline { corpus: Some("/abs/objects.txt".into()) });
        assert_eq!(c[0].hosts, vec![1, 2, 3]);
    }

    #[test]
    fn rejects_bad_configs() {
        let base = "generator = { kind = \"baseline\" }\n";
        for extra in ["n_objects = 0", "hosts = [4]", "hosts = []", "hosts = [1, 1]", "colour = 3", "post_mutation = { fuzz_factor = 0.5 }"] {
            let text = format!("{base}{extra}\n");
            assert!(parse_campaigns(&text, Path::new(".")).is_err(), "{extra}");
        }
        assert!(parse_campaigns("campaign = []", Path::new(".")).is_err());
        assert!(parse_campaigns("generator = { kind = \"oracle\" }", Path::new(".")).is_err());
    }
}
