//! Object generation from a trained model: greedy (`NoSample`), full
//! sampling (`Sample`), sampling only after whitespace (`SampleSpace`), and
//! sampling with fuzzing of high-confidence characters (`SampleFuzz`).
//!
//! Two RNG streams are derived from the seed: one for character draws and
//! one for the fuzzing coin. `SampleFuzz` draws from both at every step, so
//! with the fuzz branch disabled it emits exactly what `Sample` emits for
//! the same seed.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::charlm::{ModelError, ModelParams, RecurrentState};
use crate::pdfcore::is_whitespace;
use crate::rng::{derive_seed, seeded, Rng};

const FUZZ_STREAM: u64 = 0xf022_c011;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    NoSample,
    Sample,
    SampleSpace,
    SampleFuzz,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::NoSample, Mode::Sample, Mode::SampleSpace, Mode::SampleFuzz];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::NoSample => "nosample",
            Mode::Sample => "sample",
            Mode::SampleSpace => "samplespace",
            Mode::SampleFuzz => "samplefuzz",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown generation mode `{s}` (expected nosample, sample, samplespace or samplefuzz)"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub mode: Mode,
    pub prefix: Vec<u8>,
    pub stop_suffix: Vec<u8>,
    pub max_len: usize,
    pub t_fuzz: f64,
    pub p_t: f64,
    pub rng_seed: u64,
    pub max_restarts: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            mode: Mode::Sample,
            prefix: b"obj ".to_vec(),
            stop_suffix: b"endobj".to_vec(),
            max_len: 1500,
            t_fuzz: 0.9,
            p_t: 0.9,
            rng_seed: 0,
            max_restarts: 64,
        }
    }
}

impl GenConfig {
    pub fn with_mode(mode: Mode, rng_seed: u64) -> Self {
        GenConfig { mode, rng_seed, ..GenConfig::default() }
    }

    fn validate(&self) -> Result<(), GenError> {
        if self.prefix.is_empty() || self.stop_suffix.is_empty() {
            return Err(GenError::InvalidConfig("prefix and stop suffix must be non-empty".into()));
        }
        if self.max_len <= self.prefix.len() {
            return Err(GenError::InvalidConfig("max_len must exceed the prefix length".into()));
        }
        if !(0.0..=1.0).contains(&self.t_fuzz) || !(0.0..=1.0).contains(&self.p_t) {
            return Err(GenError::InvalidConfig("t_fuzz and p_t must lie in [0, 1]".into()));
        }
        if self.max_restarts == 0 {
            return Err(GenError::InvalidConfig("max_restarts must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedObject {
    #[serde(with = "latin1")]
    pub text: Vec<u8>,
    pub mode: Mode,
    /// Number of times the sequence exceeded `max_len` and was reset.
    pub restarts: usize,
    /// Indices into `text` where `SampleFuzz` substituted a character.
    pub fuzzed_positions: Vec<usize>,
}

/// Bytes as a string of code points 0-255.
mod latin1 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(&bytes.iter().map(|&b| b as char).collect::<String>())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        s.chars()
            .map(|c| u8::try_from(u32::from(c)).map_err(|_| serde::de::Error::custom("character above U+00FF")))
            .collect()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GenError {
    #[error("generation did not emit the stop suffix within {restarts} restarts")]
    NonTermination { restarts: usize },
    #[error("invalid generation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in p.iter().enumerate() {
        if x > p[best] {
            best = i;
        }
    }
    best
}

fn argmin(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in p.iter().enumerate() {
        if x < p[best] {
            best = i;
        }
    }
    best
}

/// Inverse-CDF draw.
fn sample_index(p: &[f64], rng: &mut Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &x) in p.iter().enumerate() {
        acc += x;
        if u < acc {
            return i;
        }
    }
    // Rounding left `u` above the total mass; take the last non-zero entry.
    p.iter().rposition(|&x| x > 0.0).unwrap_or(p.len() - 1)
}

/// Generate one object under `config.mode`.
pub fn generate(params: &ModelParams, config: &GenConfig) -> Result<GeneratedObject, GenError> {
    config.validate()?;
    let prefix = params.vocab.encode(&config.prefix)?;
    params.vocab.encode(&config.stop_suffix)?;

    let mut char_rng = seeded(config.rng_seed);
    let mut fuzz_rng = seeded(derive_seed(config.rng_seed, FUZZ_STREAM));
    let mut restarts = 0;
    'restart: loop {
        let mut text = config.prefix.clone();
        let mut fuzzed_positions = Vec::new();
        let mut state = RecurrentState::zeros(params);
        for &c in &prefix {
            params.step(&mut state, c);
        }
        loop {
            let dist = params.distribution(&state);
            let next = match config.mode {
                Mode::NoSample => argmax(&dist),
                Mode::Sample => sample_index(&dist, &mut char_rng),
                Mode::SampleSpace => {
                    if text.last().copied().is_some_and(is_whitespace) {
                        sample_index(&dist, &mut char_rng)
                    } else {
                        argmax(&dist)
                    }
                }
                Mode::SampleFuzz => {
                    let c = sample_index(&dist, &mut char_rng);
                    let p_fuzz: f64 = fuzz_rng.gen();
                    if p_fuzz > config.t_fuzz && dist[c] > config.p_t {
                        fuzzed_positions.push(text.len());
                        argmin(&dist)
                    } else {
                        c
                    }
                }
            };
            text.push(params.vocab.char_at(next));
            if text.len() > config.max_len {
                restarts += 1;
                if restarts > config.max_restarts {
                    return Err(GenError::NonTermination { restarts: config.max_restarts });
                }
                continue 'restart;
            }
            if text.ends_with(&config.stop_suffix) {
                return Ok(GeneratedObject { text, mode: config.mode, restarts, fuzzed_positions });
            }
            params.step(&mut state, next);
        }
    }
}

/// `generate` restricted to `SampleFuzz`; other modes are rejected.
pub fn sample_fuzz(params: &ModelParams, config: &GenConfig) -> Result<GeneratedObject, GenError> {
    if config.mode != Mode::SampleFuzz {
        return Err(GenError::InvalidConfig(format!("sample_fuzz called with mode {}", config.mode)));
    }
    generate(params, config)
}

/// Seed used for object `index` of a batch generated with `master_seed`.
pub fn object_seed(master_seed: u64, index: u64) -> u64 {
    derive_seed(master_seed, index)
}

/// Generate `n` objects with per-object seeds derived from
/// `base.rng_seed`. With `unique`, duplicates are discarded and further
/// seeds tried, up to `10 * n` attempts in total.
pub fn generate_batch(
    params: &ModelParams,
    base: &GenConfig,
    n: usize,
    unique: bool,
) -> Vec<(u64, Result<GeneratedObject, GenError>)> {
    let mut out = Vec::with_capacity(n);
    let mut seen = HashSet::new();
    let attempts = if unique { n.saturating_mul(10) } else { n };
    for index in 0..attempts as u64 {
        if out.len() == n {
            break;
        }
        let seed = object_seed(base.rng_seed, index);
        let result = generate(params, &GenConfig { rng_seed: seed, ..base.clone() });
        if unique {
            if let Ok(obj) = &result {
                if !seen.insert(obj.text.clone()) {
                    continue;
                }
            }
        }
        out.push((seed, result));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charlm::{ModelShape, Vocab};

    /// A model whose next-character distribution depends only on the
    /// current input character, via the output bias and a 1-unit cell that
    /// copies the input.
    fn scripted(transitions: &[(u8, u8, f64)]) -> ModelParams {
        let vocab = Vocab::from_text(b"obj endobj 1");
        let v = vocab.len();
        let mut p = ModelParams::zeros(vocab, ModelShape { hidden_size: v, num_layers: 1 });
        let h = v;
        let l = &mut p.weights.layers[0];
        for j in 0..v {
            // Input gate and output gate fully open, forget gate shut,
            // candidate = +1 on unit j only.
            l.wx.row_mut(j)[j] = 30.0;
            l.wx.row_mut(j)[2 * h + j] = 30.0;
            l.wx.row_mut(j)[3 * h + j] = 30.0;
        }
        for k in 0..h {
            l.b.data[h + k] = -30.0;
            l.b.data[k] -= 15.0;
            l.b.data[2 * h + k] -= 15.0;
        }
        for &(from, to, strength) in transitions {
            let f = p.vocab.index_of(from).unwrap();
            let t = p.vocab.index_of(to).unwrap();
            p.weights.out_w.row_mut(f)[t] = strength;
        }
        p
    }

    fn obj_model() -> ModelParams {
        // After "obj " emit "1endobj".
        scripted(&[
            (b' ', b'1', 40.0),
            (b'1', b'e', 40.0),
            (b'o', b'b', 40.0),
            (b'b', b'j', 40.0),
            (b'e', b'n', 40.0),
            (b'n', b'd', 40.0),
            (b'd', b'o', 40.0),
        ])
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("SampleFuzz".parse::<Mode>().unwrap(), Mode::SampleFuzz);
        assert!("beam".parse::<Mode>().is_err());
    }

    #[test]
    fn argmin_argmax_ties_take_lowest_index() {
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
        assert_eq!(argmin(&[0.3, 0.1, 0.1, 0.5]), 1);
    }

    #[test]
    fn nosample_is_deterministic_and_seed_free() {
        let p = scripted(&[]);
        let a = generate(&p, &GenConfig { max_len: 40, max_restarts: 2, ..GenConfig::with_mode(Mode::NoSample, 1) });
        let b = generate(&p, &GenConfig { max_len: 40, max_restarts: 2, ..GenConfig::with_mode(Mode::NoSample, 2) });
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }

    #[test]
    fn non_termination_is_reported() {
        let p = scripted(&[]);
        let cfg = GenConfig { max_len: 10, max_restarts: 3, ..GenConfig::with_mode(Mode::NoSample, 0) };
        assert!(matches!(generate(&p, &cfg), Err(GenError::NonTermination { restarts: 3 })));
    }

    #[test]
    fn invalid_config() {
        let p = scripted(&[]);
        let cfg = GenConfig { max_len: 4, ..GenConfig::default() };
        assert!(matches!(generate(&p, &cfg), Err(GenError::InvalidConfig(_))));
        let cfg = GenConfig { prefix: b"obj Z".to_vec(), ..GenConfig::default() };
        assert!(matches!(generate(&p, &cfg), Err(GenError::Model(ModelError::UnknownChar(b'Z')))));
        let cfg = GenConfig::with_mode(Mode::Sample, 0);
        assert!(sample_fuzz(&p, &cfg).is_err());
    }

    #[test]
    fn scripted_model_terminates_in_every_mode() {
        let p = obj_model();
        for mode in Mode::ALL {
            let g = generate(&p, &GenConfig { p_t: 1.0, ..GenConfig::with_mode(mode, 5) }).unwrap();
            assert_eq!(g.text, b"obj 1endobj", "{mode}");
            assert_eq!(g.restarts, 0);
            assert!(g.fuzzed_positions.is_empty());
        }
    }

    #[test]
    fn fuzzing_substitutes_least_likely_character() {
        let p = obj_model();
        let cfg = GenConfig { t_fuzz: 0.0, p_t: 0.5, max_len: 30, max_restarts: 1000, ..GenConfig::with_mode(Mode::SampleFuzz, 3) };
        // With t_fuzz = 0 nearly every confident step is fuzzed, so this model
        // never reaches "endobj".
        assert!(matches!(generate(&p, &cfg), Err(GenError::NonTermination { .. })));

        let cfg = GenConfig { t_fuzz: 0.8, p_t: 0.5, max_len: 200, max_restarts: 10_000, ..GenConfig::with_mode(Mode::SampleFuzz, 11) };
        let g = generate(&p, &cfg).unwrap();
        assert!(g.text.starts_with(b"obj ") && g.text.ends_with(b"endobj"));
        let mut state = RecurrentState::zeros(&p);
        let encoded = p.vocab.encode(&g.text).unwrap();
        for (i, &c) in encoded.iter().enumerate() {
            if g.fuzzed_positions.contains(&i) {
                let dist = p.distribution(&state);
                assert_eq!(c, argmin(&dist));
            }
            p.step(&mut state, c);
        }
    }

    #[test]
    fn latin1_json_round_trip() {
        let g = GeneratedObject { text: vec![b'o', 0xE9, 0], mode: Mode::Sample, restarts: 0, fuzzed_positions: vec![] };
        let s = serde_json::to_string(&g).unwrap();
        let back: GeneratedObject = serde_json::from_str(&s).unwrap();
        assert_eq!(back, g);
    }
}
