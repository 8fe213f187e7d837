//! Blind byte-replacement fuzzing.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::{derive_seed, seeded};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FuzzConfig {
    /// Average input length per replaced byte.
    #[serde(default = "default_fuzz_factor")]
    pub fuzz_factor: f64,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default = "default_variants")]
    pub variants: usize,
}

fn default_fuzz_factor() -> f64 {
    100.0
}

fn default_variants() -> usize {
    10
}

impl Default for FuzzConfig {
    fn default() -> Self {
        FuzzConfig { fuzz_factor: default_fuzz_factor(), rng_seed: 0, variants: default_variants() }
    }
}

impl FuzzConfig {
    pub fn validate(&self) -> Result<(), FuzzError> {
        if !(self.fuzz_factor.is_finite() && self.fuzz_factor >= 1.0) {
            return Err(FuzzError::InvalidFactor(self.fuzz_factor));
        }
        if self.variants == 0 {
            return Err(FuzzError::NoVariants);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FuzzError {
    #[error("cannot fuzz empty input")]
    EmptyInput,
    #[error("fuzz factor must be finite and at least 1, got {0}")]
    InvalidFactor(f64),
    #[error("variant count must be positive")]
    NoVariants,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FuzzOutcome {
    pub data: Vec<u8>,
    /// Positions that received a fresh random byte (possibly equal to the old one).
    pub replaced: Vec<usize>,
}

/// Like [`random_fuzz`], also reporting which positions were drawn.
pub fn random_fuzz_detailed(data: &[u8], config: &FuzzConfig) -> Result<FuzzOutcome, FuzzError> {
    if data.is_empty() {
        return Err(FuzzError::EmptyInput);
    }
    config.validate()?;
    let p = 1.0 / config.fuzz_factor;
    let mut rng = seeded(config.rng_seed);
    let mut out = data.to_vec();
    let mut replaced = Vec::new();
    for (i, b) in out.iter_mut().enumerate() {
        if rng.gen::<f64>() < p {
            *b = rng.gen();
            replaced.push(i);
        }
    }
    Ok(FuzzOutcome { data: out, replaced })
}

/// Replace each byte independently with probability `1 / fuzz_factor`.
pub fn random_fuzz(data: &[u8], config: &FuzzConfig) -> Result<Vec<u8>, FuzzError> {
    random_fuzz_detailed(data, config).map(|o| o.data)
}

/// `config.variants` fuzzed copies of every object, source-major. Variant
/// `v` of source `i` uses seed `derive(seed, i * variants + v)`.
pub fn make_variants<T: AsRef<[u8]>>(objects: &[T], config: &FuzzConfig) -> Result<Vec<Vec<u8>>, FuzzError> {
    if objects.is_empty() {
        return Err(FuzzError::EmptyInput);
    }
    config.validate()?;
    let mut out = Vec::with_capacity(objects.len() * config.variants);
    for (i, obj) in objects.iter().enumerate() {
        for v in 0..config.variants {
            let seed = derive_seed(config.rng_seed, (i * config.variants + v) as u64);
            out.push(random_fuzz(obj.as_ref(), &FuzzConfig { rng_seed: seed, ..*config })?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn errors() {
        assert_eq!(random_fuzz(b"", &FuzzConfig::default()), Err(FuzzError::EmptyInput));
        let bad = FuzzConfig { fuzz_factor: 0.5, ..FuzzConfig::default() };
        assert!(matches!(random_fuzz(b"x", &bad), Err(FuzzError::InvalidFactor(_))));
        let inf = FuzzConfig { fuzz_factor: f64::INFINITY, ..FuzzConfig::default() };
        assert!(random_fuzz(b"x", &inf).is_err());
        let none: [&[u8]; 0] = [];
        assert_eq!(make_variants(&none, &FuzzConfig::default()), Err(FuzzError::EmptyInput));
        assert!(make_variants(&[b"x"], &FuzzConfig { variants: 0, ..FuzzConfig::default() }).is_err());
    }

    #[test]
    fn factor_one_draws_every_position() {
        let o = random_fuzz_detailed(&[7u8; 50], &FuzzConfig { fuzz_factor: 1.0, ..FuzzConfig::default() }).unwrap();
        assert_eq!(o.replaced, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn factor_equal_to_length_draws_one_on_average() {
        let data = [b'a'; 100];
        let trials = 10_000;
        let total: usize = (0..trials)
            .map(|s| {
                let cfg = FuzzConfig { fuzz_factor: 100.0, rng_seed: s, variants: 1 };
                random_fuzz_detailed(&data, &cfg).unwrap().replaced.len()
            })
            .sum();
        let mean = total as f64 / trials as f64;
        assert!((0.9..=1.1).contains(&mean), "{mean}");
    }

    #[test]
    fn huge_factor_leaves_input_alone() {
        let data = b"1 0 obj << /Type /Page >> endobj";
        let same = (0..1000)
            .filter(|&s| {
                let cfg = FuzzConfig { fuzz_factor: 1e9, rng_seed: s, variants: 1 };
                random_fuzz(data, &cfg).unwrap() == data
            })
            .count();
        assert!(same >= 990);
    }

    #[test]
    fn variants_are_source_major_and_deterministic() {
        let objs = [b"obj 1 endobj".to_vec(), b"obj (abc) endobj".to_vec()];
        let cfg = FuzzConfig { fuzz_factor: 3.0, rng_seed: 9, variants: 4 };
        let a = make_variants(&objs, &cfg).unwrap();
        assert_eq!(a, make_variants(&objs, &cfg).unwrap());
        assert_eq!(a.len(), 8);
        assert!(a[..4].iter().all(|v| v.len() == objs[0].len()));
        assert!(a[4..].iter().all(|v| v.len() == objs[1].len()));
        let v5 = random_fuzz(&objs[1], &FuzzConfig { rng_seed: derive_seed(9, 5), ..cfg }).unwrap();
        assert_eq!(a[5], v5);
    }

    proptest! {
        #[test]
        fn length_is_preserved(data in proptest::collection::vec(any::<u8>(), 1..400), factor in 1.0f64..500.0, seed: u64) {
            let cfg = FuzzConfig { fuzz_factor: factor, rng_seed: seed, variants: 1 };
            let o = random_fuzz_detailed(&data, &cfg).unwrap();
            prop_assert_eq!(o.data.len(), data.len());
            for (i, (a, b)) in data.iter().zip(&o.data).enumerate() {
                if a != b {
                    prop_assert!(o.replaced.contains(&i));
                }
            }
        }
    }
}
