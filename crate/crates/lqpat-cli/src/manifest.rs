//! Run manifests: a JSON sidecar recording what produced each set of CSVs.

use std::fs;
use std::path::Path;

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

use lqpat::descriptors::DescriptorSpec;

#[derive(Serialize)]
struct DescriptorInfo {
    kind: String,
    threshold: u8,
    normalize: bool,
}

/// Everything needed to reproduce a run: the exact command line, descriptor
/// configuration, seed, and a content hash of the feature store involved.
#[derive(Serialize)]
pub struct RunManifest {
    tool: &'static str,
    version: &'static str,
    command: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    descriptor: Option<DescriptorInfo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    dataset_digest: String,
    created_utc: String,
    outputs: Vec<String>,
}

impl RunManifest {
    pub fn new() -> Self {
        Self {
            tool: "lqpat",
            version: env!("CARGO_PKG_VERSION"),
            command: std::env::args().collect(),
            descriptor: None,
            seed: None,
            dataset_digest: String::new(),
            created_utc: chrono::Utc::now().to_rfc3339(),
            outputs: Vec::new(),
        }
    }

    pub fn descriptor(mut self, spec: &DescriptorSpec) -> Self {
        self.descriptor = Some(DescriptorInfo {
            kind: spec.kind.name().to_string(),
            threshold: spec.threshold,
            normalize: spec.normalize,
        });
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    /// Records the SHA-256 of the feature store this run read or wrote.
    pub fn digest_of(mut self, path: &Path) -> anyhow::Result<Self> {
        let bytes = fs::read(path)
            .with_context(|| format!("hashing {} for the manifest", path.display()))?;
        let mut hasher = Sha256::new();
        hasher.update(&bytes);
        let hex: String = hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        self.dataset_digest = format!("sha256:{hex}");
        Ok(self)
    }

    pub fn outputs(mut self, outputs: &[String]) -> Self {
        self.outputs = outputs.to_vec();
        self
    }

    pub fn write_prefixed(self, prefix: &str) -> anyhow::Result<()> {
        self.write(Path::new(&format!("{prefix}.manifest.json")))
    }

    pub fn write_next_to(self, out: &Path) -> anyhow::Result<()> {
        let mut path = out.as_os_str().to_owned();
        path.push(".manifest.json");
        self.write(Path::new(&path))
    }

    fn write(self, path: &Path) -> anyhow::Result<()> {
        let json = serde_json::to_string_pretty(&self)?;
        fs::write(path, json + "\n")
            .with_context(|| format!("writing manifest {}", path.display()))?;
        Ok(())
    }
}
