use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use docsift::chunking::ChunkingConfig;
use docsift::corpus::SplitConfig;
use docsift::phonetics::DEFAULT_CODE_LENGTH;
use docsift::retrieval::{Analyzer, PvHyperParams, DEFAULT_TOP_K, DEFAULT_WEIGHT};
use docsift::tokenization::DEFAULT_DEFINITION_KEYWORDS;
use serde::{Deserialize, Serialize};

use crate::failure::Failure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub split: SplitConfig,
    pub definition_keywords: BTreeSet<String>,
    /// One phrase per line; phrases found in the document become definition
    /// tokens.
    pub lexicon_path: Option<PathBuf>,
    pub dependency_provider: ProviderConfig,
    pub tokenize: TokenizeStages,
    pub soundex: SoundexConfig,
    pub ranking: RankingConfig,
    pub chunking: ChunkingConfig,
    pub qa: QaConfig,
    pub paths: ArtifactPaths,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            split: SplitConfig::default(),
            definition_keywords: DEFAULT_DEFINITION_KEYWORDS.iter().map(|s| s.to_string()).collect(),
            lexicon_path: None,
            dependency_provider: ProviderConfig::default(),
            tokenize: TokenizeStages::default(),
            soundex: SoundexConfig::default(),
            ranking: RankingConfig::default(),
            chunking: ChunkingConfig::default(),
            qa: QaConfig::default(),
            paths: ArtifactPaths::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProviderConfig {
    Heuristic {
        /// Directory with verbs.txt, determiners.txt, ... overriding the
        /// built-in word lists.
        #[serde(default)]
        lexicon_dir: Option<PathBuf>,
    },
    Conllu {
        path: PathBuf,
    },
    Remote {
        endpoint: String,
        #[serde(default = "default_timeout")]
        timeout_secs: u64,
    },
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig::Heuristic { lexicon_dir: None }
    }
}

fn default_timeout() -> u64 {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TokenizeStages {
    pub definitions: bool,
    pub dependency: bool,
}

impl Default for TokenizeStages {
    fn default() -> Self {
        Self {
            definitions: true,
            dependency: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SoundexConfig {
    pub enabled: bool,
    pub length: usize,
}

impl Default for SoundexConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            length: DEFAULT_CODE_LENGTH,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankingConfig {
    pub weight: f64,
    pub top_k: usize,
    pub stopwords_path: Option<PathBuf>,
    pub pv: PvHyperParams,
}

impl Default for RankingConfig {
    fn default() -> Self {
        Self {
            weight: DEFAULT_WEIGHT,
            top_k: DEFAULT_TOP_K,
            stopwords_path: None,
            pv: PvHyperParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QaConfig {
    pub endpoint: String,
    pub timeout_secs: u64,
    pub max_in_flight: usize,
    /// Send each ranked paragraph as its own context instead of joining them.
    pub per_paragraph: bool,
}

impl Default for QaConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://127.0.0.1:8765/".into(),
            timeout_secs: 30,
            max_in_flight: 4,
            per_paragraph: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArtifactPaths {
    pub store: PathBuf,
    pub tokenized_store: PathBuf,
    pub registry: PathBuf,
    pub warnings: PathBuf,
    pub index: PathBuf,
    pub predictions: PathBuf,
    pub report: PathBuf,
}

impl Default for ArtifactPaths {
    fn default() -> Self {
        Self {
            store: "store.json".into(),
            tokenized_store: "tokenized.json".into(),
            registry: "registry.json".into(),
            warnings: "warnings.jsonl".into(),
            index: "index.json".into(),
            predictions: "predictions.json".into(),
            report: "report.json".into(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let config = match path {
            None => Self::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Failure::config("config", format!("cannot read {}: {e}", p.display())))?;
                toml::from_str(&text).map_err(|e| Failure::config("config", format!("{}: {e}", p.display())))?
            }
        };
        config.validate()?;
        Ok(config)
    }

    /// Checks values and that every configured input path exists.
    pub fn validate(&self) -> Result<(), Failure> {
        let bad = |msg: String| Err(Failure::config("config", msg));
        self.split
            .validate()
            .map_err(|e| Failure::config("config", e.to_string()))?;
        if !(0.0..=1.0).contains(&self.ranking.weight) {
            return bad(format!("ranking.weight {} outside [0, 1]", self.ranking.weight));
        }
        if self.ranking.top_k == 0 {
            return bad("ranking.top_k must be positive".into());
        }
        if self.soundex.length < 4 {
            return bad("soundex.length must be at least 4".into());
        }
        if self.qa.max_in_flight == 0 {
            return bad("qa.max_in_flight must be positive".into());
        }
        self.chunking
            .validate()
            .map_err(|e| Failure::config("config", format!("chunking: {e}")))?;
        let mut required: Vec<&Path> = Vec::new();
        required.extend(self.lexicon_path.as_deref());
        required.extend(self.ranking.stopwords_path.as_deref());
        match &self.dependency_provider {
            ProviderConfig::Heuristic { lexicon_dir } => required.extend(lexicon_dir.as_deref()),
            ProviderConfig::Conllu { path } => required.push(path),
            ProviderConfig::Remote { .. } => {}
        }
        for p in required {
            if !p.exists() {
                return bad(format!("configured path {} does not exist", p.display()));
            }
        }
        Ok(())
    }

    pub fn analyzer(&self) -> Result<Analyzer, Failure> {
        let length = self.soundex.enabled.then_some(self.soundex.length);
        match &self.ranking.stopwords_path {
            Some(p) => Analyzer::from_stopword_file(p, length)
                .map_err(|e| Failure::config("config", format!("stopwords {}: {e}", p.display()))),
            None => {
                let a = Analyzer::default();
                Ok(match length {
                    Some(l) => a.with_soundex(l),
                    None => a,
                })
            }
        }
    }
}
