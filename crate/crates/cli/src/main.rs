use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use learnfuzz_core::assembler::{append_object, make_hosts, HostFile};
use learnfuzz_core::campaign::{load_campaigns, report, run_campaign};
use learnfuzz_core::charlm::{load_checkpoint, save_checkpoint, train_with_progress, ModelShape, Optimizer, TrainConfig};
use learnfuzz_core::corpus::{
    build_windows, extract_dir, filter_by_length, read_object_file, synthetic_objects, write_object_file,
};
use learnfuzz_core::mutator::{random_fuzz, FuzzConfig};
use learnfuzz_core::pdfcore::{parse_host, parse_object, CoverageSet};
use learnfuzz_core::rng::derive_seed;
use learnfuzz_core::sampler::{generate_batch, GenConfig, Mode};

#[derive(Parser)]
#[command(name = "learnfuzz", version, about = "Grammar-learning fuzzer for PDF objects")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract non-stream objects from every file under a directory.
    Extract(ExtractArgs),
    /// Train the character model and write checkpoints.
    Train(TrainArgs),
    /// Generate objects from a checkpoint.
    Generate(GenerateArgs),
    /// Write randomly fuzzed variants of every file in a directory.
    Fuzz(FuzzArgs),
    /// Run the reference parser on a PDF file or a single object.
    Check(CheckArgs),
    /// Append each object to a host by incremental update.
    Assemble(AssembleArgs),
    /// Run the campaigns described in a TOML file and write reports.
    Campaign(CampaignArgs),
    /// Write the bundled synthetic training corpus.
    Synth(SynthArgs),
    /// Write the three bundled host PDFs.
    Hosts(HostsArgs),
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    min_len: Option<usize>,
    #[arg(long)]
    max_len: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Training window length.
    #[arg(long, default_value_t = 64)]
    d: usize,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [10, 20, 30, 40, 50])]
    checkpoint_epochs: Vec<usize>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, default_value_t = 1)]
    batch_size: usize,
    /// sgd or adam.
    #[arg(long, default_value = "adam")]
    optimizer: Optimizer,
    /// One layer of 32 units instead of two of 128.
    #[arg(long)]
    tiny: bool,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long, default_value = "sample")]
    mode: Mode,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.9)]
    tfuzz: f64,
    #[arg(long, default_value_t = 0.9)]
    pt: f64,
    #[arg(long, default_value_t = 1500)]
    maxlen: usize,
    /// Discard duplicate objects and keep generating.
    #[arg(long)]
    unique: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FuzzArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 10)]
    variants: usize,
    #[arg(long, default_value_t = 100.0)]
    fuzz_factor: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Reject trailing garbage after `endobj`.
    #[arg(long)]
    strict: bool,
    #[arg(long)]
    coverage_out: Option<PathBuf>,
}

#[derive(Args)]
struct AssembleArgs {
    /// Host PDF path, or host1/host2/host3 for a bundled host.
    #[arg(long)]
    host: String,
    #[arg(long)]
    objects: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CampaignArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 5000)]
    n: usize,
    #[arg(long, default_value_t = learnfuzz_core::corpus::synthetic::DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct HostsArgs {
    #[arg(long)]
    out: PathBuf,
}

const MANIFEST: &str = "manifest.json";

/// Regular files in `dir`, sorted, skipping manifests and dotfiles.
fn input_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        if path.is_file() && name != MANIFEST && !name.starts_with('.') {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        bail!("no input files in {}", dir.display());
    }
    Ok(files)
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "input".into())
}

fn extract(a: ExtractArgs) -> Result<()> {
    let objects = filter_by_length(extract_dir(&a.input)?, a.min_len, a.max_len);
    fs::write(&a.out, write_object_file(&objects)).with_context(|| format!("writing {}", a.out.display()))?;
    println!("extracted {} objects", objects.len());
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let data = fs::read(&a.corpus).with_context(|| format!("reading {}", a.corpus.display()))?;
    let objects = read_object_file(&data, &a.corpus.display().to_string());
    let trainset = build_windows(&objects, a.d)?;
    let defaults = TrainConfig::default();
    let config = TrainConfig {
        epochs: a.epochs,
        window_size: a.d,
        batch_size: a.batch_size,
        learning_rate: a.lr.unwrap_or(defaults.learning_rate),
        rng_seed: a.seed,
        checkpoint_epochs: a.checkpoint_epochs.into_iter().collect::<BTreeSet<_>>(),
        shape: if a.tiny { ModelShape::TINY } else { ModelShape::FULL },
        optimizer: a.optimizer,
        ..defaults
    };
    fs::create_dir_all(&a.out)?;
    eprintln!("{} objects, {} windows of {}", objects.len(), trainset.len(), a.d);
    let checkpoints = train_with_progress(&trainset, &config, |r| {
        eprintln!("epoch {:>3}  loss {:.4}  lr {}", r.epoch, r.training_loss, r.learning_rate);
    })?;
    for c in &checkpoints {
        let path = a.out.join(format!("epoch{}.bin", c.epoch));
        save_checkpoint(c, &path)?;
        println!("{}", path.display());
    }
    Ok(())
}

#[derive(Serialize)]
struct ManifestEntry {
    file: Option<String>,
    mode: Mode,
    seed: u64,
    restarts: Option<usize>,
    fuzzed_positions: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn generate(a: GenerateArgs) -> Result<()> {
    let ckpt = load_checkpoint(&a.ckpt).with_context(|| format!("loading {}", a.ckpt.display()))?;
    let base = GenConfig { mode: a.mode, rng_seed: a.seed, t_fuzz: a.tfuzz, p_t: a.pt, max_len: a.maxlen, ..GenConfig::default() };
    fs::create_dir_all(&a.out)?;
    let mut manifest = Vec::new();
    let mut written = 0;
    for (seed, result) in generate_batch(&ckpt.params, &base, a.n, a.unique) {
        match result {
            Ok(g) => {
                let name = format!("obj{written:05}.txt");
                fs::write(a.out.join(&name), &g.text)?;
                written += 1;
                manifest.push(ManifestEntry {
                    file: Some(name),
                    mode: g.mode,
                    seed,
                    restarts: Some(g.restarts),
                    fuzzed_positions: g.fuzzed_positions,
                    error: None,
                });
            }
            Err(e) => manifest.push(ManifestEntry {
                file: None,
                mode: a.mode,
                seed,
                restarts: None,
                fuzzed_positions: vec![],
                error: Some(e.to_string()),
            }),
        }
    }
    fs::write(a.out.join(MANIFEST), serde_json::to_string_pretty(&manifest)? + "\n")?;
    println!("generated {written} objects ({} failures)", manifest.len() - written);
    Ok(())
}

fn fuzz(a: FuzzArgs) -> Result<()> {
    let files = input_files(&a.input)?;
    let config = FuzzConfig { fuzz_factor: a.fuzz_factor, rng_seed: a.seed, variants: a.variants };
    config.validate()?;
    fs::create_dir_all(&a.out)?;
    for (i, path) in files.iter().enumerate() {
        let data = fs::read(path)?;
        let ext = path.extension().map(|e| format!(".{}", e.to_string_lossy())).unwrap_or_default();
        for v in 0..a.variants {
            let seed = derive_seed(a.seed, (i * a.variants + v) as u64);
            let out = random_fuzz(&data, &FuzzConfig { rng_seed: seed, ..config })
                .with_context(|| format!("fuzzing {}", path.display()))?;
            fs::write(a.out.join(format!("{}.v{v:02}{ext}", stem(path))), out)?;
        }
    }
    println!("wrote {} variants", files.len() * a.variants);
    Ok(())
}

/// Returns whether the input passed.
fn check(a: CheckArgs) -> Result<bool> {
    let data = fs::read(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let (passed, coverage): (bool, CoverageSet) = if data.starts_with(b"%PDF") {
        match parse_host(&data) {
            Ok(s) => {
                let mut ok = true;
                for o in s.bodies.iter().flat_map(|b| &b.objects) {
                    if let Some(f) = o.outcome.failure() {
                        ok = false;
                        println!("{} (object {} {})", f.log_line(), o.id, o.generation);
                    }
                }
                (ok, s.coverage)
            }
            Err(e) => {
                println!("PARSE-ERROR: {e}");
                (false, CoverageSet::new())
            }
        }
    } else {
        let outcome = parse_object(&data, a.strict);
        if let Some(f) = outcome.failure() {
            println!("{}", f.log_line());
        }
        (outcome.passed(), outcome.coverage)
    };
    println!("{}", if passed { "PASS" } else { "FAIL" });
    println!("coverage: {} points", coverage.len());
    if let Some(path) = a.coverage_out {
        fs::write(&path, serde_json::to_string_pretty(&coverage)? + "\n")?;
    }
    Ok(passed)
}

fn load_host(host: &str) -> Result<HostFile> {
    let path = Path::new(host);
    if path.exists() {
        let bytes = fs::read(path)?;
        return HostFile::parse(stem(path), bytes).with_context(|| format!("parsing host {host}"));
    }
    make_hosts()
        .into_iter()
        .find(|h| h.name == host)
        .with_context(|| format!("host {host} is neither a file nor one of host1, host2, host3"))
}

fn assemble(a: AssembleArgs) -> Result<()> {
    let host = load_host(&a.host)?;
    let files = input_files(&a.objects)?;
    fs::create_dir_all(&a.out)?;
    let mut skipped = 0;
    for path in &files {
        let body = fs::read(path)?;
        match append_object(&host, &body) {
            Ok(pdf) => fs::write(a.out.join(format!("{}_{}.pdf", host.name, stem(path))), pdf)?,
            Err(e) => {
                eprintln!("{}: {e}", path.display());
                skipped += 1;
            }
        }
    }
    println!("assembled {} files ({skipped} skipped)", files.len() - skipped);
    Ok(())
}

/// Returns the number of oracle crashes.
fn campaign(a: CampaignArgs) -> Result<usize> {
    let configs = load_campaigns(&a.config)?;
    let mut results = Vec::with_capacity(configs.len());
    for c in &configs {
        let r = run_campaign(c).with_context(|| format!("campaign {}", c.display_name()))?;
        eprintln!("{}: {} tests, pass rate {:.4}, coverage {}", r.name, r.tests(), r.pass_rate, r.coverage.len());
        results.push(r);
    }
    report(&results, &a.out)?;
    Ok(results.iter().map(|r| r.crashes.len()).sum())
}

fn synth(a: SynthArgs) -> Result<()> {
    fs::write(&a.out, write_object_file(&synthetic_objects(a.n, a.seed)))?;
    Ok(())
}

fn hosts(a: HostsArgs) -> Result<()> {
    fs::create_dir_all(&a.out)?;
    for h in make_hosts() {
        fs::write(a.out.join(format!("{}.pdf", h.name)), &h.bytes)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Extract(a) => extract(a)?,
        Command::Train(a) => train(a)?,
        Command::Generate(a) => generate(a)?,
        Command::Fuzz(a) => fuzz(a)?,
        Command::Check(a) => return Ok(if check(a)? { ExitCode::SUCCESS } else { ExitCode::from(1) }),
        Command::Assemble(a) => assemble(a)?,
        Command::Campaign(a) => {
            let crashes = campaign(a)?;
            if crashes > 0 {
                eprintln!("{crashes} oracle crashes; see crashes.log");
                return Ok(ExitCode::from(2));
            }
        }
        Command::Synth(a) => synth(a)?,
        Command::Hosts(a) => hosts(a)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
