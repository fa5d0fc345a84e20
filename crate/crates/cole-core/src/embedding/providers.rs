//! Embedding provider implementations.
//!
//! Two mocks bracket the signal question: the hash provider is a null
//! control whose vectors carry no architectural information, and the
//! structural mock recovers the genotype from emitted cell code, so its
//! vectors carry exactly the information a perfect reader would extract.
//! The file-cache provider serves vectors precomputed offline by a real
//! language model, and the remote provider fetches them over HTTP.

use super::{cache_key, EmbeddingProvider, ProviderBatch};
use crate::nb201::{path_encode, CellGenotype, OpKind, EDGES, PATH_BITS};
use crate::rng::{derive_seed, sample_normal};
use crate::{Error, Result};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;
use std::time::Duration;

/// Null control: vectors are a pseudo-random function of (seed, text
/// digest) and carry no information about architecture quality.
pub struct HashProvider {
    seed: u64,
    dim: usize,
}

impl HashProvider {
    /// A provider drawing `dim` standard normal coordinates per text.
    pub fn new(seed: u64, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput(
                "hash provider dim must be positive".into(),
            ));
        }
        Ok(HashProvider { seed, dim })
    }
}

impl EmbeddingProvider for HashProvider {
    fn provider_id(&self) -> String {
        format!("hash:seed={}:dim={}", self.seed, self.dim)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_texts(&self, texts: &[&str]) -> Result<ProviderBatch> {
        let vectors = texts
            .iter()
            .map(|text| {
                let seed = derive_seed(&[
                    b"hash-provider",
                    &self.seed.to_le_bytes(),
                    cache_key(text).as_bytes(),
                ]);
                let mut rng = ChaCha20Rng::from_seed(seed);
                (0..self.dim).map(|_| sample_normal(&mut rng)).collect()
            })
            .collect();
        Ok(ProviderBatch::Pooled(vectors))
    }
}

/// Output dimension of [`StructuralMockProvider`]: the path encoding plus a
/// per-edge operation one-hot block.
pub const STRUCTURAL_DIM: usize = PATH_BITS + EDGES.len() * 5;

/// Perfect-reader mock: parses the genotype back out of emitted cell code
/// and encodes it losslessly, with optional additive noise.
pub struct StructuralMockProvider {
    noise: f64,
    seed: u64,
}

impl StructuralMockProvider {
    /// `noise` is the standard deviation of seeded per-coordinate jitter;
    /// zero keeps the encoding exact and injective.
    pub fn new(noise: f64, seed: u64) -> Result<Self> {
        if !noise.is_finite() || noise < 0.0 {
            return Err(Error::InvalidInput(format!(
                "structural mock noise must be finite and non-negative, got {noise}"
            )));
        }
        Ok(StructuralMockProvider { noise, seed })
    }
}

impl EmbeddingProvider for StructuralMockProvider {
    fn provider_id(&self) -> String {
        format!("structural-mock:seed={}:noise={}", self.seed, self.noise)
    }

    fn dim(&self) -> usize {
        STRUCTURAL_DIM
    }

    fn embed_texts(&self, texts: &[&str]) -> Result<ProviderBatch> {
        let vectors = texts
            .iter()
            .map(|text| {
                let genotype = recover_genotype(text)?;
                let mut values = Vec::with_capacity(STRUCTURAL_DIM);
                values.extend(path_encode(&genotype).bits().iter().map(|&b| b as f64));
                for (_, op) in genotype.edges() {
                    for k in 0..5 {
                        values.push(if op.index() == k { 1.0 } else { 0.0 });
                    }
                }
                if self.noise > 0.0 {
                    let seed = derive_seed(&[
                        b"structural-mock-noise",
                        &self.seed.to_le_bytes(),
                        cache_key(text).as_bytes(),
                    ]);
                    let mut rng = ChaCha20Rng::from_seed(seed);
                    for v in &mut values {
                        *v += self.noise * sample_normal(&mut rng);
                    }
                }
                Ok(values)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ProviderBatch::Pooled(vectors))
    }
}

/// Reads the genotype back out of an emitted cell. Works on any verbosity
/// mode and tolerates prepended context blocks; the cell class is the last
/// `class Cell` in the text.
fn recover_genotype(text: &str) -> Result<CellGenotype> {
    let bad = |reason: String| {
        Error::Provider(format!(
            "text is not a recognizable cell emission: {reason}"
        ))
    };
    let start = text
        .rfind("class Cell(nn.Module):")
        .ok_or_else(|| bad("no `class Cell(nn.Module):` block".into()))?;
    let body = &text[start..];

    // Module fields from __init__, one per non-degenerate edge.
    let mut module_ops: [Option<OpKind>; 6] = [None; 6];
    for (slot, &(src, dst)) in EDGES.iter().enumerate() {
        let marker = format!("self.op_{src}_{dst} = ");
        if let Some(pos) = body.find(&marker) {
            let expr = body[pos + marker.len()..].lines().next().unwrap_or("");
            let op = if expr.contains("AvgPool2d(") {
                OpKind::AvgPool3x3
            } else if expr.contains("kernel_size=1") {
                OpKind::NorConv1x1
            } else if expr.contains("kernel_size=3") {
                OpKind::NorConv3x3
            } else {
                return Err(bad(format!("unrecognized module expression `{expr}`")));
            };
            module_ops[slot] = Some(op);
        }
    }

    let forward_pos = body
        .find("def forward(self, x):")
        .ok_or_else(|| bad("no forward method".into()))?;
    let forward = &body[forward_pos..];

    let mut ops = [OpKind::Zeroize; 6];
    let mut used = [false; 6];
    for dst in 1..=3usize {
        let marker = format!("node_{dst} = ");
        let pos = forward
            .find(&marker)
            .ok_or_else(|| bad(format!("no assignment for node_{dst}")))?;
        let rhs = forward[pos + marker.len()..]
            .lines()
            .next()
            .unwrap_or("")
            .trim();
        if rhs == "torch.zeros_like(node_0)" {
            continue;
        }
        for term in rhs.split(" + ") {
            let slot_of = |src: usize| EDGES.iter().position(|&e| e == (src, dst));
            if let Some(src) = (0..dst).find(|&s| term == format!("node_{s}")) {
                let slot = slot_of(src).expect("(src, dst) with src < dst <= 3 is an edge");
                if module_ops[slot].is_some() {
                    return Err(bad(format!(
                        "edge ({src}, {dst}) is both a module field and a bare skip term"
                    )));
                }
                ops[slot] = OpKind::SkipConnect;
                used[slot] = true;
            } else if let Some(src) =
                (0..dst).find(|&s| term == format!("self.op_{s}_{dst}(node_{s})"))
            {
                let slot = slot_of(src).expect("(src, dst) with src < dst <= 3 is an edge");
                let op = module_ops[slot]
                    .ok_or_else(|| bad(format!("term `{term}` has no matching module field")))?;
                ops[slot] = op;
                used[slot] = true;
            } else {
                return Err(bad(format!("unrecognized forward term `{term}`")));
            }
        }
    }

    for (slot, &(src, dst)) in EDGES.iter().enumerate() {
        if module_ops[slot].is_some() && !used[slot] {
            return Err(bad(format!(
                "field self.op_{src}_{dst} is declared but never applied"
            )));
        }
    }
    Ok(CellGenotype::new(ops))
}

#[derive(Deserialize)]
struct StoredRecord {
    key: String,
    provider: String,
    dim: usize,
    vec: Vec<f32>,
}

/// Serves vectors precomputed offline and stored in the cache file format.
/// Every requested text must be present; this provider never computes.
pub struct FileCacheProvider {
    provider_id: String,
    dim: usize,
    vectors: HashMap<String, Vec<f32>>,
}

impl FileCacheProvider {
    /// Loads a cache file. All records must share one provider id and one
    /// dimension; duplicate keys resolve last-writer-wins.
    pub fn open(path: &Path) -> Result<Self> {
        let content = std::fs::read_to_string(path)?;
        let mut provider_id: Option<String> = None;
        let mut dim: Option<usize> = None;
        let mut vectors = HashMap::new();
        for (lineno, line) in content.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: StoredRecord = serde_json::from_str(line).map_err(|e| {
                Error::InvalidInput(format!(
                    "bad cache record at {}:{}: {e}",
                    path.display(),
                    lineno + 1
                ))
            })?;
            if record.vec.len() != record.dim {
                return Err(Error::InvalidInput(format!(
                    "cache record at {}:{} declares dim {} but holds {} values",
                    path.display(),
                    lineno + 1,
                    record.dim,
                    record.vec.len()
                )));
            }
            match &provider_id {
                None => {
                    provider_id = Some(record.provider.clone());
                    dim = Some(record.dim);
                }
                Some(id) => {
                    if *id != record.provider {
                        return Err(Error::InvalidInput(format!(
                            "cache file mixes providers '{id}' and '{}' at {}:{}",
                            record.provider,
                            path.display(),
                            lineno + 1
                        )));
                    }
                    if dim != Some(record.dim) {
                        return Err(Error::InvalidInput(format!(
                            "cache file mixes dims {} and {} at {}:{}",
                            dim.unwrap(),
                            record.dim,
                            path.display(),
                            lineno + 1
                        )));
                    }
                }
            }
            vectors.insert(record.key, record.vec);
        }
        match (provider_id, dim) {
            (Some(provider_id), Some(dim)) => Ok(FileCacheProvider {
                provider_id,
                dim,
                vectors,
            }),
            _ => Err(Error::InvalidInput(format!(
                "cache file {} holds no records",
                path.display()
            ))),
        }
    }
}

impl EmbeddingProvider for FileCacheProvider {
    fn provider_id(&self) -> String {
        self.provider_id.clone()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_texts(&self, texts: &[&str]) -> Result<ProviderBatch> {
        let mut vectors = Vec::with_capacity(texts.len());
        let mut absent = Vec::new();
        for (i, text) in texts.iter().enumerate() {
            match self.vectors.get(&cache_key(text)) {
                Some(v) => vectors.push(v.iter().map(|&x| x as f64).collect()),
                None => absent.push(i),
            }
        }
        if !absent.is_empty() {
            return Err(Error::Provider(format!(
                "file cache '{}' has no vectors for {} of {} texts (first missing batch index {})",
                self.provider_id,
                absent.len(),
                texts.len(),
                absent[0]
            )));
        }
        Ok(ProviderBatch::Pooled(vectors))
    }
}

/// Configuration for [`RemoteProvider`].
#[derive(Clone, Debug)]
pub struct RemoteConfig {
    /// Service base URL; requests go to `{url}/v1/embed`.
    pub url: String,
    /// Bearer token, attached as an Authorization header when present.
    pub token: Option<String>,
    /// Declared output dimension; responses disagreeing are a hard error.
    pub dim: usize,
    /// Texts per request.
    pub batch_size: usize,
    /// Concurrent request cap.
    pub max_in_flight: usize,
    /// Retries after the first attempt of each request.
    pub retries: usize,
    /// First retry delay; doubles per retry.
    pub backoff: Duration,
}

impl RemoteConfig {
    /// Defaults: batches of 16, 4 requests in flight, 3 retries with
    /// exponential backoff from 100ms.
    pub fn new(url: impl Into<String>, dim: usize) -> Self {
        RemoteConfig {
            url: url.into(),
            token: None,
            dim,
            batch_size: 16,
            max_in_flight: 4,
            retries: 3,
            backoff: Duration::from_millis(100),
        }
    }

    /// Reads `COLE_EMBED_URL` (required) and `COLE_EMBED_TOKEN` (optional).
    pub fn from_env(dim: usize) -> Result<Self> {
        let url = std::env::var("COLE_EMBED_URL")
            .map_err(|_| Error::InvalidInput("COLE_EMBED_URL is not set".into()))?;
        let mut config = RemoteConfig::new(url, dim);
        config.token = std::env::var("COLE_EMBED_TOKEN").ok();
        Ok(config)
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    inputs: &'a [&'a str],
    pooling: &'static str,
}

#[derive(Deserialize)]
struct EmbedResponse {
    dim: usize,
    embeddings: Vec<Vec<f64>>,
}

/// HTTP client for a pooled-embedding service.
pub struct RemoteProvider {
    config: RemoteConfig,
    client: reqwest::blocking::Client,
}

enum ChunkError {
    /// Connection trouble or a retryable status; carries a description.
    Retryable(String),
    /// A response that retrying cannot fix.
    Fatal(Error),
}

impl RemoteProvider {
    /// Builds the client; fails on an unusable TLS or config state.
    pub fn new(config: RemoteConfig) -> Result<Self> {
        if config.dim == 0 || config.batch_size == 0 || config.max_in_flight == 0 {
            return Err(Error::InvalidInput(
                "remote provider dim, batch_size, and max_in_flight must be positive".into(),
            ));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| Error::Provider(format!("cannot build HTTP client: {e}")))?;
        Ok(RemoteProvider { config, client })
    }

    fn post_chunk(&self, inputs: &[&str]) -> std::result::Result<Vec<Vec<f64>>, ChunkError> {
        let request = EmbedRequest {
            inputs,
            pooling: "mean",
        };
        let url = format!("{}/v1/embed", self.config.url.trim_end_matches('/'));
        let mut builder = self.client.post(&url).json(&request);
        if let Some(token) = &self.config.token {
            builder = builder.bearer_auth(token);
        }
        let response = builder
            .send()
            .map_err(|e| ChunkError::Retryable(format!("request failed: {e}")))?;
        let status = response.status();
        if status.is_server_error() {
            return Err(ChunkError::Retryable(format!("server returned {status}")));
        }
        if !status.is_success() {
            // Client errors (auth, bad request) will not improve on retry.
            return Err(ChunkError::Fatal(Error::Transport {
                indices: Vec::new(),
                message: format!("server returned {status}"),
            }));
        }
        let parsed: EmbedResponse = response
            .json()
            .map_err(|e| ChunkError::Retryable(format!("bad response body: {e}")))?;
        if parsed.dim != self.config.dim {
            return Err(ChunkError::Fatal(Error::Provider(format!(
                "remote service reports dim {} but the provider is configured for {}",
                parsed.dim, self.config.dim
            ))));
        }
        if parsed.embeddings.len() != inputs.len() {
            return Err(ChunkError::Fatal(Error::Provider(format!(
                "remote service returned {} embeddings for {} inputs",
                parsed.embeddings.len(),
                inputs.len()
            ))));
        }
        Ok(parsed.embeddings)
    }

    fn fetch_chunk(&self, inputs: &[&str]) -> std::result::Result<Vec<Vec<f64>>, ChunkError> {
        let mut delay = self.config.backoff;
        let mut last = String::new();
        for attempt in 0..=self.config.retries {
            match self.post_chunk(inputs) {
                Ok(vectors) => return Ok(vectors),
                Err(ChunkError::Fatal(e)) => return Err(ChunkError::Fatal(e)),
                Err(ChunkError::Retryable(message)) => {
                    last = message;
                    if attempt < self.config.retries {
                        std::thread::sleep(delay);
                        delay *= 2;
                    }
                }
            }
        }
        Err(ChunkError::Retryable(format!(
            "{last} (after {} attempts)",
            self.config.retries + 1
        )))
    }
}

impl EmbeddingProvider for RemoteProvider {
    fn provider_id(&self) -> String {
        format!("remote:{}", self.config.url)
    }

    fn dim(&self) -> usize {
        self.config.dim
    }

    fn embed_texts(&self, texts: &[&str]) -> Result<ProviderBatch> {
        // Chunk bounds in the provider-local index space; the caller remaps
        // failure indices onto its own batch.
        let chunks: Vec<(usize, &[&str])> = texts
            .chunks(self.config.batch_size)
            .enumerate()
            .map(|(c, chunk)| (c * self.config.batch_size, chunk))
            .collect();
        let mut results: Vec<Option<Vec<Vec<f64>>>> = (0..chunks.len()).map(|_| None).collect();
        let mut failed_indices = Vec::new();
        let mut failure_message = String::new();
        let mut fatal: Option<Error> = None;

        for wave in chunks.chunks(self.config.max_in_flight) {
            let outcomes: Vec<std::result::Result<Vec<Vec<f64>>, ChunkError>> =
                std::thread::scope(|scope| {
                    let handles: Vec<_> = wave
                        .iter()
                        .map(|(_, inputs)| scope.spawn(move || self.fetch_chunk(inputs)))
                        .collect();
                    handles
                        .into_iter()
                        .map(|h| h.join().expect("fetch thread panicked"))
                        .collect()
                });
            for ((offset, inputs), outcome) in wave.iter().zip(outcomes) {
                let chunk_index = offset / self.config.batch_size;
                match outcome {
                    Ok(vectors) => results[chunk_index] = Some(vectors),
                    Err(ChunkError::Retryable(message)) => {
                        failed_indices.extend(*offset..offset + inputs.len());
                        failure_message = message;
                    }
                    Err(ChunkError::Fatal(e)) => {
                        if fatal.is_none() {
                            fatal = Some(match e {
                                Error::Transport { message, .. } => Error::Transport {
                                    indices: (*offset..offset + inputs.len()).collect(),
                                    message,
                                },
                                other => other,
                            });
                        }
                    }
                }
            }
        }

        if let Some(e) = fatal {
            return Err(e);
        }
        if !failed_indices.is_empty() {
            return Err(Error::Transport {
                indices: failed_indices,
                message: failure_message,
            });
        }
        Ok(ProviderBatch::Pooled(
            results
                .into_iter()
                .flat_map(|r| r.expect("chunk filled"))
                .collect(),
        ))
    }
}
