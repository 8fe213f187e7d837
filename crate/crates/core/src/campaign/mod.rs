//! End-to-end experiments: produce objects, optionally fuzz them, append
//! each to the selected hosts, and score the results with the reference
//! parser.

mod config;
mod report;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};

use rand::seq::index::sample;
use serde::Serialize;

pub use config::{load_campaigns, parse_campaigns, CampaignConfig, GeneratorConfig};
pub use report::{format_matrix, render_table, report, summary_json};

use crate::assembler::{append_object, make_hosts, AssembleError, HostFile};
use crate::charlm::{load_checkpoint, ModelError, ModelParams};
use crate::corpus::{default_corpus, read_object_file, ObjectRecord};
use crate::mutator::{make_variants, FuzzConfig};
use crate::pdfcore::{coverage_union, parse_host, parse_object, CoverageSet};
use crate::rng::{derive_seed, seeded};
use crate::sampler::{generate_batch, GenConfig, Mode};

const OBJECT_STREAM: u64 = 1;
const MUTATION_STREAM: u64 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CampaignError {
    #[error("campaign config: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One object under test, before host assembly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestObject {
    pub id: String,
    pub body: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestRecord {
    pub test_id: usize,
    pub object_id: String,
    pub host: String,
    pub passed: bool,
    pub error_code: Option<String>,
    pub coverage_size: usize,
    #[serde(skip)]
    pub coverage: CoverageSet,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Crash {
    pub test_id: usize,
    pub object_id: String,
    pub host: String,
    pub diagnostic: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignResult {
    pub name: String,
    pub records: Vec<TestRecord>,
    pub pass_rate: f64,
    pub coverage: CoverageSet,
    pub crashes: Vec<Crash>,
    /// Objects the generator gave up on (no `endobj` within the restart budget).
    pub generation_failures: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HostSummary {
    pub tests: usize,
    pub passes: usize,
    pub pass_rate: f64,
    pub coverage: usize,
}

impl CampaignResult {
    pub fn tests(&self) -> usize {
        self.records.len()
    }

    pub fn passes(&self) -> usize {
        self.records.iter().filter(|r| r.passed).count()
    }

    /// Union of the stored per-test coverage sets.
    pub fn recomputed_coverage(&self) -> CoverageSet {
        coverage_union(self.records.iter().map(|r| &r.coverage))
    }

    pub fn per_host(&self) -> BTreeMap<String, HostSummary> {
        let mut groups: BTreeMap<String, Vec<&TestRecord>> = BTreeMap::new();
        for r in &self.records {
            groups.entry(r.host.clone()).or_default().push(r);
        }
        groups
            .into_iter()
            .map(|(host, rs)| {
                let passes = rs.iter().filter(|r| r.passed).count();
                let coverage = coverage_union(rs.iter().map(|r| &r.coverage)).len();
                (host, HostSummary { tests: rs.len(), passes, pass_rate: passes as f64 / rs.len() as f64, coverage })
            })
            .collect()
    }
}

/// Where a campaign's objects come from, with any files already loaded.
#[derive(Debug, Clone, Copy)]
pub enum ObjectSource<'a> {
    Baseline(&'a [ObjectRecord]),
    Model { params: &'a ModelParams, gen: &'a GenConfig },
}

/// Pick `n` corpus objects (without replacement while the corpus lasts).
pub fn baseline_objects(corpus: &[ObjectRecord], n: usize, seed: u64) -> Vec<TestObject> {
    let mut rng = seeded(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n && !corpus.is_empty() {
        let take = (n - out.len()).min(corpus.len());
        for i in sample(&mut rng, corpus.len(), take) {
            out.push(TestObject { id: format!("obj{:05}", out.len()), body: corpus[i].body.clone() });
        }
    }
    out
}

/// Generate `n` objects; returns them with the number of generation failures.
pub fn model_objects(params: &ModelParams, gen: &GenConfig, n: usize, seed: u64) -> (Vec<TestObject>, usize) {
    let base = GenConfig { rng_seed: seed, ..gen.clone() };
    let mut objects = Vec::with_capacity(n);
    let mut failures = 0;
    for (i, (_, result)) in generate_batch(params, &base, n, false).into_iter().enumerate() {
        match result {
            Ok(g) => objects.push(TestObject { id: format!("obj{i:05}"), body: g.text }),
            Err(_) => failures += 1,
        }
    }
    (objects, failures)
}

/// Replace each object by its fuzzed variants, source-major.
pub fn mutate_objects(objects: &[TestObject], fuzz: &FuzzConfig) -> Vec<TestObject> {
    if objects.is_empty() {
        return Vec::new();
    }
    let bodies: Vec<&[u8]> = objects.iter().map(|o| o.body.as_slice()).collect();
    let variants = make_variants(&bodies, fuzz).expect("validated fuzz config on non-empty input");
    variants
        .into_iter()
        .enumerate()
        .map(|(k, body)| {
            let src = &objects[k / fuzz.variants];
            TestObject { id: format!("{}.v{:02}", src.id, k % fuzz.variants), body }
        })
        .collect()
}

#[derive(Debug)]
struct Verdict {
    passed: bool,
    error_code: Option<String>,
    coverage: CoverageSet,
}

/// Assemble `body` into `host` and run the oracle on the result. The test
/// passes when the host structure parses and the appended object passes
/// the strict parse.
fn evaluate(host: &HostFile, body: &[u8]) -> Verdict {
    let fail = |code: &str, coverage| Verdict { passed: false, error_code: Some(code.to_string()), coverage };
    let file = match append_object(host, body) {
        Ok(f) => f,
        // Nothing to assemble; the bytes still reach the object parser.
        Err(AssembleError::ObjectBodyUnusable(_)) => {
            return fail("object-body-unusable", parse_object(body, true).coverage);
        }
        Err(AssembleError::HostMalformed(_)) => return fail("host-malformed", CoverageSet::new()),
    };
    let structure = match parse_host(&file) {
        Ok(s) => s,
        Err(_) => return fail("host-malformed", parse_object(body, true).coverage),
    };
    let target = structure.resolve(host.last_object_id()).filter(|o| o.offset >= host.bytes.len());
    match target {
        Some(obj) => match obj.outcome.failure() {
            None => Verdict { passed: true, error_code: None, coverage: structure.coverage },
            Some(f) => fail(f.code.as_str(), structure.coverage),
        },
        None => fail("host-malformed", structure.coverage),
    }
}

fn panic_message(payload: &(dyn std::any::Any + Send)) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "non-string panic payload".to_string()
    }
}

/// Score every object against every host. Tests are numbered object-major
/// and evaluated in parallel; records come back sorted by test id.
pub fn evaluate_objects(name: &str, objects: &[TestObject], hosts: &[&HostFile], generation_failures: usize) -> CampaignResult {
    let jobs: Vec<(usize, &TestObject, &HostFile)> = objects
        .iter()
        .flat_map(|o| hosts.iter().map(move |h| (o, *h)))
        .enumerate()
        .map(|(i, (o, h))| (i, o, h))
        .collect();
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(jobs.len().max(1));
    let chunk = jobs.len().div_ceil(threads).max(1);

    let mut outcomes: Vec<(TestRecord, Option<Crash>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter()
                        .map(|&(test_id, obj, host)| {
                            let verdict = catch_unwind(AssertUnwindSafe(|| evaluate(host, &obj.body)));
                            let (verdict, crash) = match verdict {
                                Ok(v) => (v, None),
                                Err(p) => {
                                    let crash = Crash {
                                        test_id,
                                        object_id: obj.id.clone(),
                                        host: host.name.clone(),
                                        diagnostic: panic_message(p.as_ref()),
                                    };
                                    let v = Verdict { passed: false, error_code: Some("crash".into()), coverage: CoverageSet::new() };
                                    (v, Some(crash))
                                }
                            };
                            let record = TestRecord {
                                test_id,
                                object_id: obj.id.clone(),
                                host: host.name.clone(),
                                passed: verdict.passed,
                                error_code: verdict.error_code,
                                coverage_size: verdict.coverage.len(),
                                coverage: verdict.coverage,
                            };
                            (record, crash)
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("evaluation thread")).collect()
    });
    outcomes.sort_by_key(|(r, _)| r.test_id);

    let (records, crashes): (Vec<TestRecord>, Vec<Option<Crash>>) = outcomes.into_iter().unzip();
    let crashes: Vec<Crash> = crashes.into_iter().flatten().collect();
    let coverage = coverage_union(records.iter().map(|r| &r.coverage));
    let passes = records.iter().filter(|r| r.passed).count();
    let pass_rate = if records.is_empty() { 0.0 } else { passes as f64 / records.len() as f64 };
    CampaignResult { name: name.to_string(), records, pass_rate, coverage, crashes, generation_failures }
}

/// Run a campaign whose inputs are already in memory.
pub fn run_campaign_with(config: &CampaignConfig, source: ObjectSource<'_>) -> Result<CampaignResult, CampaignError> {
    config.validate()?;
    let object_seed = derive_seed(config.rng_seed, OBJECT_STREAM);
    let (mut objects, failures) = match source {
        ObjectSource::Baseline(corpus) => {
            if corpus.is_empty() {
                return Err(CampaignError::Config("baseline corpus is empty".into()));
            }
            (baseline_objects(corpus, config.n_objects, object_seed), 0)
        }
        ObjectSource::Model { params, gen } => model_objects(params, gen, config.n_objects, object_seed),
    };
    if let Some(fuzz) = &config.post_mutation {
        let seeded_fuzz = FuzzConfig { rng_seed: derive_seed(config.rng_seed ^ fuzz.rng_seed, MUTATION_STREAM), ..*fuzz };
        objects = mutate_objects(&objects, &seeded_fuzz);
    }
    let all = make_hosts();
    let hosts: Vec<&HostFile> = config.hosts.iter().map(|&h| &all[usize::from(h) - 1]).collect();
    Ok(evaluate_objects(&config.display_name(), &objects, &hosts, failures))
}

/// Load whatever the config references and run it.
pub fn run_campaign(config: &CampaignConfig) -> Result<CampaignResult, CampaignError> {
    config.validate()?;
    match &config.generator {
        GeneratorConfig::Baseline { corpus } => {
            let records = match corpus {
                Some(path) => read_object_file(&std::fs::read(path)?, &path.display().to_string()),
                None => default_corpus(),
            };
            run_campaign_with(config, ObjectSource::Baseline(&records))
        }
        GeneratorConfig::Model { mode, checkpoint, t_fuzz, p_t, max_len } => {
            let ckpt = load_checkpoint(checkpoint)?;
            let gen = GenConfig { mode: *mode, t_fuzz: *t_fuzz, p_t: *p_t, max_len: *max_len, ..GenConfig::default() };
            run_campaign_with(config, ObjectSource::Model { params: &ckpt.params, gen: &gen })
        }
    }
}

/// Model generation settings for `mode` with defaults otherwise.
pub fn model_generator(mode: Mode, checkpoint: impl Into<std::path::PathBuf>) -> GeneratorConfig {
    let d = GenConfig::default();
    GeneratorConfig::Model { mode, checkpoint: checkpoint.into(), t_fuzz: d.t_fuzz, p_t: d.p_t, max_len: d.max_len }
}

/// `cell[r][c] = |coverage(r) \ coverage(c)|`.
pub fn overlap_matrix(results: &[CampaignResult]) -> Vec<Vec<usize>> {
    results
        .iter()
        .map(|r| results.iter().map(|c| r.coverage.difference_count(&c.coverage)).collect())
        .collect()
}
