//! Pluggable text-embedding providers with mean pooling and caching.
//!
//! Providers are fixed feature extractors: same text, same vector. A
//! provider may return per-token hidden states (pooled here) or vectors it
//! already pooled itself. All vectors are quantized through 32-bit floats
//! before they are returned or cached, so cached and freshly computed
//! results are bit-identical; downstream numerics run in 64-bit.

pub mod cache;
pub mod providers;

pub use cache::EmbeddingCache;
pub use providers::{
    FileCacheProvider, HashProvider, RemoteConfig, RemoteProvider, StructuralMockProvider,
    STRUCTURAL_DIM,
};

use crate::codegen::CodeText;
use crate::{Error, Result};
use sha2::{Digest, Sha256};

/// Per-token last-layer hidden states: T rows of D finite reals.
#[derive(Clone, PartialEq, Debug)]
pub struct TokenHiddenStates {
    rows: Vec<Vec<f64>>,
}

impl TokenHiddenStates {
    /// Validates T >= 1, uniform row width, and finite entries.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::InvalidInput("token state matrix is empty".into()))?;
        let width = first.len();
        for (t, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(Error::InvalidInput(format!(
                    "token row {t} has width {} but row 0 has width {width}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "token row {t} has a non-finite entry"
                )));
            }
        }
        Ok(TokenHiddenStates { rows })
    }

    /// Token count T.
    pub fn token_count(&self) -> usize {
        self.rows.len()
    }

    /// Hidden dimension D.
    pub fn dim(&self) -> usize {
        self.rows[0].len()
    }
}

/// A pooled, fixed-length embedding.
#[derive(Clone, PartialEq, Debug)]
pub struct EmbeddingVector {
    /// The vector entries (64-bit carriers of 32-bit values).
    pub values: Vec<f64>,
    /// Identifier of the provider configuration that produced it.
    pub provider_id: String,
}

impl EmbeddingVector {
    /// Vector length.
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// What a provider hands back for one batch of texts.
#[derive(Debug)]
pub enum ProviderBatch {
    /// Per-text token states, to be mean-pooled here.
    TokenStates(Vec<TokenHiddenStates>),
    /// Per-text vectors the provider already pooled.
    Pooled(Vec<Vec<f64>>),
}

/// A deterministic batch text-embedding source.
pub trait EmbeddingProvider: Send + Sync {
    /// Stable identifier covering the provider and its configuration.
    fn provider_id(&self) -> String;

    /// Declared output dimension.
    fn dim(&self) -> usize;

    /// Embeds a batch, one output per input text, in input order.
    fn embed_texts(&self, texts: &[&str]) -> Result<ProviderBatch>;
}

/// Token-wise mean pooling: output[d] = (1/T) sum_t h[t][d], computed in
/// 64-bit. Emptiness is excluded by the [`TokenHiddenStates`] constructor.
pub fn mean_pool(h: &TokenHiddenStates) -> Vec<f64> {
    let t = h.rows.len() as f64;
    let mut pooled = vec![0.0; h.dim()];
    for row in &h.rows {
        for (acc, v) in pooled.iter_mut().zip(row) {
            *acc += v;
        }
    }
    for acc in &mut pooled {
        *acc /= t;
    }
    pooled
}

/// Content-address of a code text: lowercase hex SHA-256 of its UTF-8 bytes.
pub fn cache_key(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    let mut key = String::with_capacity(64);
    for byte in digest {
        key.push_str(&format!("{byte:02x}"));
    }
    key
}

/// Embeds a batch of code texts, consulting and filling `cache` when one is
/// attached. Outputs are in input order, quantized through f32.
pub fn embed_batch(
    provider: &dyn EmbeddingProvider,
    texts: &[CodeText],
    cache: Option<&EmbeddingCache>,
) -> Result<Vec<EmbeddingVector>> {
    if texts.is_empty() {
        return Err(Error::InvalidInput(
            "embed_batch needs at least one text".into(),
        ));
    }
    let provider_id = provider.provider_id();
    let dim = provider.dim();
    let keys: Vec<String> = texts.iter().map(|t| cache_key(&t.text)).collect();

    let mut results: Vec<Option<Vec<f64>>> = vec![None; texts.len()];
    if let Some(cache) = cache {
        for (i, key) in keys.iter().enumerate() {
            if let Some(values) = cache.get(key, &provider_id) {
                if values.len() != dim {
                    return Err(Error::Provider(format!(
                        "cache holds a {}-dim vector for key {key} but provider '{provider_id}' declares dim {dim}",
                        values.len()
                    )));
                }
                results[i] = Some(values);
            }
        }
    }

    let missing: Vec<usize> = (0..texts.len()).filter(|&i| results[i].is_none()).collect();
    if !missing.is_empty() {
        let missing_texts: Vec<&str> = missing.iter().map(|&i| texts[i].text.as_str()).collect();
        let batch = provider.embed_texts(&missing_texts).map_err(|e| match e {
            // Remap provider-local indices onto the caller's batch.
            Error::Transport { indices, message } => Error::Transport {
                indices: indices.into_iter().map(|j| missing[j]).collect(),
                message,
            },
            other => other,
        })?;
        let pooled: Vec<Vec<f64>> = match batch {
            ProviderBatch::Pooled(vectors) => vectors,
            ProviderBatch::TokenStates(states) => states.iter().map(mean_pool).collect(),
        };
        if pooled.len() != missing.len() {
            return Err(Error::Provider(format!(
                "provider '{provider_id}' returned {} vectors for {} inputs",
                pooled.len(),
                missing.len()
            )));
        }
        for (&slot, values) in missing.iter().zip(pooled) {
            if values.len() != dim {
                return Err(Error::Provider(format!(
                    "provider '{provider_id}' declares dim {dim} but returned a {}-dim vector",
                    values.len()
                )));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Provider(format!(
                    "provider '{provider_id}' returned a non-finite value"
                )));
            }
            let quantized: Vec<f64> = values.iter().map(|&v| v as f32 as f64).collect();
            if let Some(cache) = cache {
                cache.put(&keys[slot], &provider_id, &quantized)?;
            }
            results[slot] = Some(quantized);
        }
    }

    Ok(results
        .into_iter()
        .map(|values| EmbeddingVector {
            values: values.expect("every slot filled"),
            provider_id: provider_id.clone(),
        })
        .collect())
}
