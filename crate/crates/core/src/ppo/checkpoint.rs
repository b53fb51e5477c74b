//! Self-contained training checkpoints.
//!
//! A checkpoint carries everything evaluation needs: network shape and
//! parameters, normalizer statistics, both configs, the alpha subset, and
//! the seeds. Serialization is plain JSON with a fixed field order and no
//! timestamps or absolute paths, so identical runs produce identical bytes.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::ppo::{CurvePoint, ObsNormalizer, ParamLayout, PolicyParams, PpoConfig, TrainOutcome};
use crate::selection::SelectionReport;

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub code_version: String,
    pub obs_dim: usize,
    pub n_actions: usize,
    pub hidden: Vec<usize>,
    pub alpha_names: Vec<String>,
    pub ppo: PpoConfig,
    pub env: EnvConfig,
    pub normalizer: ObsNormalizer,
    pub params: Vec<f64>,
    pub env_steps: u64,
    pub diverged_at: Option<u64>,
    pub curve: Vec<CurvePoint>,
    pub selection: Option<SelectionReport>,
    pub corpus_hash: Option<String>,
}

impl Checkpoint {
    pub fn from_outcome(
        outcome: &TrainOutcome,
        ppo: PpoConfig,
        env: EnvConfig,
        alpha_names: Vec<String>,
        selection: Option<SelectionReport>,
        corpus_hash: Option<String>,
    ) -> Checkpoint {
        let layout = &outcome.params.layout;
        Checkpoint {
            format_version: 1,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            obs_dim: layout.obs_dim,
            n_actions: layout.n_actions,
            hidden: layout.hidden.clone(),
            alpha_names,
            ppo,
            env,
            normalizer: outcome.normalizer.clone(),
            params: outcome.params.params.clone(),
            env_steps: outcome.env_steps,
            diverged_at: outcome.diverged_at,
            curve: outcome.curve.clone(),
            selection,
            corpus_hash,
        }
    }

    /// Rebuilds the policy; errors when the stored parameter vector does
    /// not match the declared architecture.
    pub fn policy(&self) -> Result<PolicyParams> {
        let layout = ParamLayout::new(self.obs_dim, self.n_actions, &self.hidden);
        if layout.total != self.params.len() {
            return Err(Error::Invalid(format!(
                "checkpoint declares {} parameters but carries {}",
                layout.total,
                self.params.len()
            )));
        }
        if self.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("checkpoint parameters are not finite".into()));
        }
        Ok(PolicyParams {
            layout,
            params: self.params.clone(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Checkpoint> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Checkpoint::from_json(&text)
    }

    /// Content hash of the serialized form, for reproducibility reports.
    pub fn sha256(&self) -> Result<String> {
        let json = self.to_json()?;
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        Ok(format!("{:x}", hasher.finalize()))
    }
}
