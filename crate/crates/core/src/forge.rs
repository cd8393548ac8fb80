//! Deterministic generation of the experiment corpora.
//!
//! Every byte produced here is a pure function of the [`CorpusSpec`]: random
//! plaintexts come from a ChaCha20 stream addressed by sample index, and each
//! (sample, layer) key/IV pair is a domain-separated SHA-256 of the master
//! seed. Output is therefore independent of how many threads do the work.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{RngCore, SeedableRng, TryRngCore};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cipher::{
    encrypt_in_place, Aes, BlockKey, CipherMode, InitVector, KeySize, Origin, Sample, BLOCK_LEN,
};
use crate::error::{Error, Result};

pub const DEFAULT_COUNT: usize = 10_000;
pub const PAPER_COUNT: usize = 1_000_000;
pub const DEFAULT_LENGTH: usize = 512;
pub const CORPUS_FORMAT_VERSION: u32 = 1;

/// Number of encryption layers in the triple-encrypted sets.
pub const LAYERS: usize = 3;

/// Where layer-0 random bytes come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntropySource {
    /// ChaCha20 stream keyed by the master seed; reproducible.
    #[default]
    Seeded,
    /// The operating system CSPRNG; not reproducible.
    OsEntropy,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub count: usize,
    pub length: usize,
    pub mode: CipherMode,
    #[serde(with = "hex_seed")]
    pub master_seed: [u8; 32],
    pub key_size: KeySize,
    #[serde(default)]
    pub entropy: EntropySource,
}

mod hex_seed {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(seed: &[u8; 32], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(seed))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; 32], D::Error> {
        let text = String::deserialize(d)?;
        let bytes = hex::decode(&text).map_err(serde::de::Error::custom)?;
        bytes
            .try_into()
            .map_err(|_| serde::de::Error::custom("master seed must be 32 bytes"))
    }
}

impl CorpusSpec {
    pub fn new(count: usize, mode: CipherMode, master_seed: [u8; 32]) -> Self {
        CorpusSpec {
            count,
            length: DEFAULT_LENGTH,
            mode,
            master_seed,
            key_size: KeySize::Aes128,
            entropy: EntropySource::Seeded,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::invalid("corpus count must be at least 1"));
        }
        if self.length == 0 || !self.length.is_multiple_of(BLOCK_LEN) {
            return Err(Error::invalid(format!(
                "sample length must be a positive multiple of {BLOCK_LEN}, got {}",
                self.length
            )));
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON form of the spec.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("spec serializes");
        hex::encode(Sha256::digest(&json))
    }
}

/// Expands a `u64` into a 32-byte master seed (for CLI `--seed` values).
pub fn seed_from_u64(seed: u64) -> [u8; 32] {
    derive(b"layerlab/seed", &seed.to_be_bytes(), &[])
}

/// Derives a child seed from `parent` under a label, e.g. per repetition.
pub fn child_seed(parent: &[u8; 32], label: &str, index: u64) -> [u8; 32] {
    derive(b"layerlab/child", parent, &[label.as_bytes(), &index.to_be_bytes()].concat())
}

/// Domain-separated SHA-256: `len(tag) || tag || len(a) || a || b`.
fn derive(tag: &[u8], a: &[u8], b: &[u8]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update([tag.len() as u8]);
    h.update(tag);
    h.update((a.len() as u32).to_be_bytes());
    h.update(a);
    h.update(b);
    h.finalize().into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SetName {
    R0,
    Z0,
    R1,
    R3,
    Z1,
    Z3,
}

impl SetName {
    pub const ALL: [SetName; 6] = [
        SetName::R0,
        SetName::Z0,
        SetName::R1,
        SetName::R3,
        SetName::Z1,
        SetName::Z3,
    ];

    pub fn layer(self) -> u8 {
        match self {
            SetName::R0 | SetName::Z0 => 0,
            SetName::R1 | SetName::Z1 => 1,
            SetName::R3 | SetName::Z3 => 3,
        }
    }

    pub fn origin(self) -> Origin {
        match self {
            SetName::R0 | SetName::R1 | SetName::R3 => Origin::Random,
            SetName::Z0 | SetName::Z1 | SetName::Z3 => Origin::Zeros,
        }
    }
}

impl fmt::Display for SetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for SetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SetName::ALL
            .into_iter()
            .find(|n| n.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown corpus set {s:?}")))
    }
}

#[derive(Debug, Clone)]
pub struct CorpusSet {
    pub name: SetName,
    pub samples: Vec<Sample>,
    pub spec: CorpusSpec,
}

impl CorpusSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn payloads(&self) -> impl Iterator<Item = &[u8]> {
        self.samples.iter().map(|s| s.bytes.as_slice())
    }
}

/// Key material for one sample and one layer (1-based, as in `key_i^j`).
pub fn derive_material(spec: &CorpusSpec, index: usize, layer: usize) -> (InitVector, BlockKey) {
    let mut input = Vec::with_capacity(9);
    input.extend_from_slice(&(index as u64).to_be_bytes());
    input.push(layer as u8);

    let key_bytes = derive(b"layerlab/key", &spec.master_seed, &input);
    let iv_bytes = derive(b"layerlab/iv", &spec.master_seed, &input);

    let key = BlockKey::from_slice(&key_bytes[..spec.key_size.byte_len()]).expect("valid key length");
    let iv = InitVector::from_slice(&iv_bytes[..16]).expect("16-byte iv");
    (iv, key)
}

/// All `(iv_i^j, key_i^j)` pairs for a corpus, `j` in `1..=3`.
#[derive(Debug, Clone)]
pub struct KeySchedule {
    materials: Vec<[(InitVector, BlockKey); LAYERS]>,
}

impl KeySchedule {
    pub fn get(&self, index: usize, layer: usize) -> &(InitVector, BlockKey) {
        assert!((1..=LAYERS).contains(&layer), "layers are numbered 1..=3");
        &self.materials[index][layer - 1]
    }

    pub fn layers(&self, index: usize) -> &[(InitVector, BlockKey); LAYERS] {
        &self.materials[index]
    }

    pub fn len(&self) -> usize {
        self.materials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.materials.is_empty()
    }

    /// Number of keys that occur more than once across all (i, j).
    pub fn duplicate_keys(&self) -> usize {
        let mut keys: Vec<&[u8]> = self
            .materials
            .iter()
            .flat_map(|m| m.iter().map(|(_, k)| k.as_bytes()))
            .collect();
        let total = keys.len();
        keys.sort_unstable();
        keys.dedup();
        total - keys.len()
    }
}

pub fn derive_schedule(spec: &CorpusSpec) -> Result<KeySchedule> {
    spec.validate()?;
    let materials = (0..spec.count)
        .into_par_iter()
        .map(|i| std::array::from_fn(|j| derive_material(spec, i, j + 1)))
        .collect();
    Ok(KeySchedule { materials })
}

fn plaintext_stream_seed(spec: &CorpusSpec) -> [u8; 32] {
    derive(b"layerlab/plaintext", &spec.master_seed, &[])
}

pub fn gen_random_plaintexts(spec: &CorpusSpec) -> Result<CorpusSet> {
    spec.validate()?;
    let samples = match spec.entropy {
        EntropySource::Seeded => {
            let seed = plaintext_stream_seed(spec);
            (0..spec.count)
                .into_par_iter()
                .map(|i| {
                    let mut rng = ChaCha20Rng::from_seed(seed);
                    rng.set_stream(i as u64);
                    let mut bytes = vec![0u8; spec.length];
                    rng.fill_bytes(&mut bytes);
                    Sample::plaintext(bytes, Origin::Random)
                })
                .collect()
        }
        EntropySource::OsEntropy => {
            let mut os = rand::rngs::OsRng;
            let mut samples = Vec::with_capacity(spec.count);
            for _ in 0..spec.count {
                let mut bytes = vec![0u8; spec.length];
                os.try_fill_bytes(&mut bytes)
                    .map_err(|e| Error::InvalidState(format!("OS entropy unavailable: {e}")))?;
                samples.push(Sample::plaintext(bytes, Origin::Random));
            }
            samples
        }
    };
    Ok(CorpusSet {
        name: SetName::R0,
        samples,
        spec: spec.clone(),
    })
}

pub fn gen_zero_plaintexts(spec: &CorpusSpec) -> Result<CorpusSet> {
    spec.validate()?;
    let samples = vec![Sample::plaintext(vec![0u8; spec.length], Origin::Zeros); spec.count];
    Ok(CorpusSet {
        name: SetName::Z0,
        samples,
        spec: spec.clone(),
    })
}

/// The four ciphertext sets of one mode.
#[derive(Debug, Clone)]
pub struct Corpora {
    pub r1: CorpusSet,
    pub r3: CorpusSet,
    pub z1: CorpusSet,
    pub z3: CorpusSet,
}

impl Corpora {
    pub fn get(&self, name: SetName) -> Option<&CorpusSet> {
        match name {
            SetName::R1 => Some(&self.r1),
            SetName::R3 => Some(&self.r3),
            SetName::Z1 => Some(&self.z1),
            SetName::Z3 => Some(&self.z3),
            _ => None,
        }
    }
}

struct Chain {
    single: Sample,
    triple: Sample,
}

fn chain(plain: &Sample, spec: &CorpusSpec, index: usize, ciphers: &[(InitVector, Aes)]) -> Result<Chain> {
    let mut bytes = plain.bytes.clone();
    let (iv1, aes1) = &ciphers[0];
    encrypt_in_place(&mut bytes, iv1, aes1, spec.mode)?;
    let single = Sample {
        bytes: bytes.clone(),
        layer: 1,
        origin: plain.origin,
    };
    for (iv, aes) in &ciphers[1..] {
        encrypt_in_place(&mut bytes, iv, aes, spec.mode)?;
    }
    let triple = Sample {
        bytes,
        layer: LAYERS as u8,
        origin: plain.origin,
    };
    debug_assert_eq!(single.len(), spec.length, "sample {index} changed length");
    Ok(Chain { single, triple })
}

/// Builds R1, R3, Z1, Z3. The random and zero sample at index i share the
/// same three (iv, key) pairs.
pub fn build_corpora(spec: &CorpusSpec) -> Result<Corpora> {
    let randoms = gen_random_plaintexts(spec)?;
    let zero = Sample::plaintext(vec![0u8; spec.length], Origin::Zeros);

    let chains: Vec<(Chain, Chain)> = randoms
        .samples
        .par_iter()
        .enumerate()
        .map(|(i, r0)| {
            let ciphers: Vec<(InitVector, Aes)> = (1..=LAYERS)
                .map(|j| {
                    let (iv, key) = derive_material(spec, i, j);
                    (iv, Aes::new(&key))
                })
                .collect();
            Ok((chain(r0, spec, i, &ciphers)?, chain(&zero, spec, i, &ciphers)?))
        })
        .collect::<Result<_>>()?;

    let mut r1 = Vec::with_capacity(spec.count);
    let mut r3 = Vec::with_capacity(spec.count);
    let mut z1 = Vec::with_capacity(spec.count);
    let mut z3 = Vec::with_capacity(spec.count);
    for (r, z) in chains {
        r1.push(r.single);
        r3.push(r.triple);
        z1.push(z.single);
        z3.push(z.triple);
    }
    let set = |name, samples| CorpusSet {
        name,
        samples,
        spec: spec.clone(),
    };
    Ok(Corpora {
        r1: set(SetName::R1, r1),
        r3: set(SetName::R3, r3),
        z1: set(SetName::Z1, z1),
        z3: set(SetName::Z3, z3),
    })
}

/// Sidecar written next to every `<name>.bin` corpus file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusMeta {
    pub name: SetName,
    pub count: usize,
    pub length: usize,
    pub mode: CipherMode,
    pub key_bits: u32,
    pub master_seed_hex: String,
    pub layer: u8,
    pub origin: Origin,
    pub format_version: u32,
    pub spec_digest: String,
}

impl CorpusMeta {
    pub fn for_set(set: &CorpusSet) -> Self {
        CorpusMeta {
            name: set.name,
            count: set.len(),
            length: set.spec.length,
            mode: set.spec.mode,
            key_bits: set.spec.key_size.bits(),
            master_seed_hex: hex::encode(set.spec.master_seed),
            layer: set.name.layer(),
            origin: set.name.origin(),
            format_version: CORPUS_FORMAT_VERSION,
            spec_digest: set.spec.digest(),
        }
    }
}

pub fn sidecar_path(bin: &Path) -> PathBuf {
    bin.with_extension("json")
}

/// Writes `<dir>/<name>.bin` (count × length raw bytes) and its JSON sidecar.
pub fn write_corpus(set: &CorpusSet, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let bin = dir.join(format!("{}.bin", set.name));
    let mut bytes = Vec::with_capacity(set.len() * set.spec.length);
    for s in &set.samples {
        bytes.extend_from_slice(&s.bytes);
    }
    fs::write(&bin, bytes).map_err(|e| Error::io(&bin, e))?;
    let meta = serde_json::to_vec_pretty(&CorpusMeta::for_set(set))?;
    let side = sidecar_path(&bin);
    fs::write(&side, meta).map_err(|e| Error::io(&side, e))?;
    Ok(bin)
}

/// Reads a corpus file and its sidecar back.
pub fn read_corpus(bin: &Path) -> Result<(CorpusMeta, Vec<Sample>)> {
    let side = sidecar_path(bin);
    let meta: CorpusMeta =
        serde_json::from_slice(&fs::read(&side).map_err(|e| Error::io(&side, e))?)?;
    if meta.format_version != CORPUS_FORMAT_VERSION {
        return Err(Error::invalid(format!(
            "unsupported corpus format version {}",
            meta.format_version
        )));
    }
    let bytes = fs::read(bin).map_err(|e| Error::io(bin, e))?;
    if meta.length == 0 || bytes.len() != meta.count * meta.length {
        return Err(Error::invalid(format!(
            "{} holds {} bytes, sidecar promises {} x {}",
            bin.display(),
            bytes.len(),
            meta.count,
            meta.length
        )));
    }
    let samples = bytes
        .chunks_exact(meta.length)
        .map(|c| Sample {
            bytes: c.to_vec(),
            layer: meta.layer,
            origin: meta.origin,
        })
        .collect();
    Ok((meta, samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cipher::encrypt_layers;

    fn spec(count: usize, mode: CipherMode) -> CorpusSpec {
        CorpusSpec::new(count, mode, seed_from_u64(42))
    }

    #[test]
    fn random_plaintexts_are_distinct_and_reproducible() {
        let s = spec(3, CipherMode::Ctr);
        let a = gen_random_plaintexts(&s).unwrap();
        let b = gen_random_plaintexts(&s).unwrap();
        assert_eq!(a.len(), 3);
        assert!(a.samples.iter().all(|x| x.len() == 512 && x.layer == 0));
        assert_ne!(a.samples[0], a.samples[1]);
        assert_ne!(a.samples[1], a.samples[2]);
        assert_eq!(a.samples, b.samples);
    }

    #[test]
    fn os_entropy_differs_between_runs() {
        let mut s = spec(2, CipherMode::Ctr);
        s.entropy = EntropySource::OsEntropy;
        let a = gen_random_plaintexts(&s).unwrap();
        let b = gen_random_plaintexts(&s).unwrap();
        assert_ne!(a.samples, b.samples);
    }

    #[test]
    fn zero_plaintexts_are_null_bytes() {
        let z = gen_zero_plaintexts(&spec(4, CipherMode::Ecb)).unwrap();
        assert!(z.samples.iter().all(|s| s.bytes.iter().all(|&b| b == 0)));
        assert!(z.samples.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut s = spec(0, CipherMode::Ctr);
        assert!(s.validate().is_err());
        s.count = 1;
        s.length = 500;
        assert!(gen_random_plaintexts(&s).is_err());
    }

    #[test]
    fn schedule_layers_differ() {
        let s = spec(1, CipherMode::Cbc);
        let sched = derive_schedule(&s).unwrap();
        assert_ne!(sched.get(0, 1), sched.get(0, 2));
        assert_ne!(sched.get(0, 2), sched.get(0, 3));
        let again = derive_schedule(&s).unwrap();
        assert_eq!(sched.layers(0), again.layers(0));
    }

    #[test]
    fn no_duplicate_keys_in_ten_thousand() {
        let mut s = spec(3334, CipherMode::Ctr);
        s.key_size = KeySize::Aes256;
        let sched = derive_schedule(&s).unwrap();
        assert!(sched.len() * LAYERS >= 10_000);
        assert_eq!(sched.duplicate_keys(), 0);
        assert!(matches!(sched.get(0, 1).1, BlockKey::Aes256(_)));
    }

    #[test]
    fn corpora_follow_the_layer_equations() {
        for mode in CipherMode::ALL {
            let s = spec(5, mode);
            let c = build_corpora(&s).unwrap();
            let sched = derive_schedule(&s).unwrap();
            let r0 = gen_random_plaintexts(&s).unwrap();
            assert!(c.r1.samples.iter().all(|x| x.layer == 1));
            assert!(c.r3.samples.iter().all(|x| x.layer == 3));
            for i in 0..5 {
                let m = sched.layers(i);
                assert_eq!(encrypt_layers(&r0.samples[i], &m[..1], mode).unwrap(), c.r1.samples[i]);
                assert_eq!(encrypt_layers(&c.r1.samples[i], &m[1..], mode).unwrap(), c.r3.samples[i]);
                let z0 = Sample::plaintext(vec![0; 512], Origin::Zeros);
                assert_eq!(encrypt_layers(&z0, &m[..1], mode).unwrap(), c.z1.samples[i]);
                assert_eq!(encrypt_layers(&z0, &m[..], mode).unwrap(), c.z3.samples[i]);
            }
        }
    }

    #[test]
    fn ecb_zero_corpus_repeats_one_block() {
        let c = build_corpora(&spec(3, CipherMode::Ecb)).unwrap();
        for s in c.z1.samples.iter().chain(&c.z3.samples) {
            let first = &s.bytes[..16];
            assert!(s.bytes.chunks_exact(16).all(|b| b == first));
        }
    }

    #[test]
    fn independent_of_thread_count() {
        let s = spec(64, CipherMode::Cbc);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| build_corpora(&s).unwrap());
        let b = four.install(|| build_corpora(&s).unwrap());
        assert_eq!(a.r3.samples, b.r3.samples);
        assert_eq!(a.z1.samples, b.z1.samples);
    }

    #[test]
    fn corpus_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let c = build_corpora(&spec(4, CipherMode::Ctr)).unwrap();
        let path = write_corpus(&c.r3, dir.path()).unwrap();
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 4 * 512);
        let (meta, samples) = read_corpus(&path).unwrap();
        assert_eq!(meta.name, SetName::R3);
        assert_eq!(meta.layer, 3);
        assert_eq!(meta.key_bits, 128);
        assert_eq!(samples, c.r3.samples);
    }
}
