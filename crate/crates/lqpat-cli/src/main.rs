//! `lqpat` — descriptor extraction and evaluation runs over labeled image
//! trees, with reproducible seeded experiments and CSV outputs.

mod manifest;

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use lqpat::dataset;
use lqpat::descriptors::{self, DescriptorKind, DescriptorSpec};
use lqpat::evaluation::{self, Averaging, CrossValConfig};

use manifest::RunManifest;

#[derive(Parser)]
#[command(
    name = "lqpat",
    version,
    about = "Local quadruple pattern descriptor toolkit",
    after_help = "LQPAT_THREADS caps the worker-thread count (0 or unset = auto). \
                  Thread count never changes any output."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract descriptor features from a labeled image tree into a CSV store.
    Extract {
        /// Dataset root laid out as <root>/<class>/<images>.
        #[arg(long)]
        dataset: PathBuf,
        /// Descriptor name: lqpat, lbp or cslbp.
        #[arg(long)]
        descriptor: String,
        /// Comparison threshold for lbp/cslbp (ignored by lqpat).
        #[arg(long, default_value_t = 0)]
        threshold: u8,
        /// Keep raw histogram counts instead of L1-normalized bins.
        #[arg(long)]
        no_normalize: bool,
        /// Output feature CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Retrieval evaluation: ARP/ARR curves and ANMRR from a feature store.
    Retrieve {
        #[arg(long)]
        features: PathBuf,
        /// Largest number of retrieved images per query.
        #[arg(long)]
        top: usize,
        /// Output prefix; writes <P>.arp.csv, <P>.arr.csv, <P>.summary.csv.
        #[arg(long = "out-prefix")]
        out_prefix: String,
        /// Average over queries instead of per class then over classes.
        #[arg(long)]
        micro_average: bool,
    },
    /// Recognition evaluation: leave-one-out rate, optional CMC, optional
    /// seeded cross-validation.
    Recognize {
        #[arg(long)]
        features: PathBuf,
        /// Also write a CMC curve up to this rank.
        #[arg(long, value_name = "MAXRANK")]
        cmc: Option<usize>,
        /// Run probe/gallery cross-validation instead of leave-one-out only.
        #[arg(long)]
        cv: bool,
        /// Fraction of images drawn as probes per fold (with --cv).
        #[arg(long = "probe-fraction")]
        probe_fraction: Option<f64>,
        /// Number of folds (with --cv).
        #[arg(long, default_value_t = 10)]
        folds: u32,
        /// RNG seed; required with --cv so runs are reproducible.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "out-prefix")]
        out_prefix: String,
    },
    /// Per-image feature-image entropy (mean over the descriptor's planes).
    Entropy {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        descriptor: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(raw) = std::env::var("LQPAT_THREADS") {
        let n: usize = raw
            .trim()
            .parse()
            .with_context(|| format!("LQPAT_THREADS must be a non-negative integer, got {raw:?}"))?;
        if n > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .context("failed to configure worker threads")?;
        }
    }
    Ok(())
}

fn parse_descriptor(name: &str, threshold: u8, no_normalize: bool) -> anyhow::Result<DescriptorSpec> {
    let kind: DescriptorKind = name.parse().map_err(|e| anyhow::anyhow!("{e}"))?;
    let mut spec = DescriptorSpec::new(kind).with_threshold(threshold);
    if no_normalize {
        spec = spec.raw_counts();
    }
    Ok(spec)
}

fn run() -> anyhow::Result<()> {
    configure_threads()?;
    let cli = Cli::parse();
    match cli.command {
        Command::Extract {
            dataset,
            descriptor,
            threshold,
            no_normalize,
            out,
        } => cmd_extract(&dataset, &descriptor, threshold, no_normalize, &out),
        Command::Retrieve {
            features,
            top,
            out_prefix,
            micro_average,
        } => cmd_retrieve(&features, top, &out_prefix, micro_average),
        Command::Recognize {
            features,
            cmc,
            cv,
            probe_fraction,
            folds,
            seed,
            out_prefix,
        } => cmd_recognize(&features, cmc, cv, probe_fraction, folds, seed, &out_prefix),
        Command::Entropy {
            dataset,
            descriptor,
            out,
        } => cmd_entropy(&dataset, &descriptor, &out),
    }
}

fn scan_with_warnings(root: &Path) -> anyhow::Result<dataset::ScanOutcome> {
    let outcome = dataset::scan(root)?;
    for (path, reason) in &outcome.skipped {
        eprintln!("warning: skipped {}: {reason}", path.display());
    }
    Ok(outcome)
}

fn cmd_extract(
    root: &Path,
    descriptor: &str,
    threshold: u8,
    no_normalize: bool,
    out: &Path,
) -> anyhow::Result<()> {
    let spec = parse_descriptor(descriptor, threshold, no_normalize)?;
    let scan = scan_with_warnings(root)?;
    let extracted = dataset::extract_all(&scan.dataset, &spec)?;
    for (id, reason) in &extracted.skipped {
        eprintln!("warning: excluded {id}: {reason}");
    }
    dataset::save_features_path(&extracted.dataset, out)?;

    let records = extracted.dataset.len();
    let mean_comparisons = extracted.comparisons as f64 / records as f64;
    println!("records: {records}");
    println!("classes: {}", extracted.dataset.class_count());
    println!(
        "mean comparisons per image: {}",
        evaluation::format_sig(mean_comparisons, 9)
    );

    RunManifest::new()
        .descriptor(&spec)
        .digest_of(out)?
        .outputs(&[out.display().to_string()])
        .write_next_to(out)?;
    Ok(())
}

fn cmd_retrieve(
    features: &Path,
    top: usize,
    out_prefix: &str,
    micro_average: bool,
) -> anyhow::Result<()> {
    let ds = dataset::load_features_path(features)?;
    let averaging = if micro_average {
        Averaging::PerQuery
    } else {
        Averaging::PerClass
    };
    let report = evaluation::retrieval_report(&ds, top, averaging)?;
    for id in &report.excluded_singletons {
        eprintln!("warning: {id}: class has a single image, skipped as query");
    }
    report.validate()?;

    let arp_path = format!("{out_prefix}.arp.csv");
    let arr_path = format!("{out_prefix}.arr.csv");
    let summary_path = format!("{out_prefix}.summary.csv");
    report.arp.write_csv(File::create(&arp_path)?)?;
    report.arr.write_csv(File::create(&arr_path)?)?;
    evaluation::write_summary(&[("anmrr", report.anmrr)], File::create(&summary_path)?)?;

    println!("queries: {}", report.rows.len());
    println!("anmrr: {}", evaluation::format_sig(report.anmrr, 9));

    RunManifest::new()
        .digest_of(features)?
        .outputs(&[arp_path, arr_path, summary_path])
        .write_prefixed(out_prefix)?;
    Ok(())
}

fn cmd_recognize(
    features: &Path,
    cmc: Option<usize>,
    cv: bool,
    probe_fraction: Option<f64>,
    folds: u32,
    seed: Option<u64>,
    out_prefix: &str,
) -> anyhow::Result<()> {
    let ds = dataset::load_features_path(features)?;
    let mut outputs = Vec::new();
    let mut summary: Vec<(&str, f64)> = Vec::new();

    let report = evaluation::recognition_report(&ds, cmc)?;
    report.validate()?;
    summary.push(("recognition_rate", report.rate));
    println!(
        "recognition rate: {}",
        evaluation::format_sig(report.rate, 9)
    );
    if let Some(curve) = &report.cmc {
        let cmc_path = format!("{out_prefix}.cmc.csv");
        curve.write_csv(File::create(&cmc_path)?)?;
        outputs.push(cmc_path);
    }

    let mut manifest = RunManifest::new().digest_of(features)?;
    if cv {
        let Some(seed) = seed else {
            bail!("--cv requires an explicit --seed so runs are reproducible");
        };
        let Some(probe_fraction) = probe_fraction else {
            bail!("--cv requires --probe-fraction");
        };
        let cfg = CrossValConfig {
            probe_fraction,
            folds,
            seed,
        };
        let cv_report = evaluation::cross_validate(&ds, &cfg)?;
        let cv_path = format!("{out_prefix}.cv.csv");
        cv_report.write_csv(File::create(&cv_path)?)?;
        outputs.push(cv_path);
        summary.push(("cv_mean_recognition_rate", cv_report.mean_rate));
        println!(
            "cv mean recognition rate: {}",
            evaluation::format_sig(cv_report.mean_rate, 9)
        );
        manifest = manifest.seed(seed);
    }

    let summary_path = format!("{out_prefix}.summary.csv");
    evaluation::write_summary(&summary, File::create(&summary_path)?)?;
    outputs.push(summary_path);

    manifest.outputs(&outputs).write_prefixed(out_prefix)?;
    Ok(())
}

fn cmd_entropy(root: &Path, descriptor: &str, out: &Path) -> anyhow::Result<()> {
    let spec = parse_descriptor(descriptor, 0, false)?;
    let scan = scan_with_warnings(root)?;

    let mut rows: Vec<(String, String, f64)> = Vec::new();
    for record in scan.dataset.records() {
        match descriptors::feature_images(&record.payload, &spec) {
            Ok(set) => {
                let bits = evaluation::feature_entropy(&set);
                if !(0.0..=8.0).contains(&bits) {
                    bail!("entropy {bits} for {} outside [0,8]", record.id);
                }
                rows.push((record.id.clone(), record.label.clone(), bits));
            }
            Err(e) => eprintln!("warning: excluded {}: {e}", record.id),
        }
    }
    if rows.is_empty() {
        bail!("no image was large enough for {descriptor}");
    }
    let mean = rows.iter().map(|r| r.2).sum::<f64>() / rows.len() as f64;

    let mut file = File::create(out)?;
    writeln!(file, "id,label,entropy")?;
    for (id, label, bits) in &rows {
        writeln!(
            file,
            "{},{},{}",
            csv_field(id),
            csv_field(label),
            evaluation::format_sig(*bits, 9)
        )?;
    }
    writeln!(file, "__mean__,,{}", evaluation::format_sig(mean, 9))?;

    println!("images: {}", rows.len());
    println!("mean entropy: {}", evaluation::format_sig(mean, 9));

    RunManifest::new()
        .descriptor(&spec)
        .digest_of(out)?
        .outputs(&[out.display().to_string()])
        .write_next_to(out)?;
    Ok(())
}

/// Quotes a CSV field when it contains separators or quotes.
fn csv_field(raw: &str) -> String {
    if raw.contains([',', '"', '\n']) {
        format!("\"{}\"", raw.replace('"', "\"\""))
    } else {
        raw.to_string()
    }
}
