//! Retrieval metrics (precision/recall, ARP, ARR, ANMRR), recognition
//! metrics (leave-one-out rate, CMC, seeded probe/gallery cross-validation)
//! and the feature-image entropy diagnostic.
//!
//! Every image is queried against all the others; per-query work runs in
//! parallel and aggregation is a fixed-order reduction over query index, so
//! results are bit-stable across thread counts.

use std::collections::HashMap;
use std::io::Write;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;

use crate::dataset::LabeledDataset;
use crate::descriptors::{FeatureImageSet, FeatureVector};
use crate::error::{Error, Result};
use crate::image_core::GrayImage;
use crate::similarity::{chi_square, RankedRetrieval};

/// Formats `value` with `digits` significant digits in plain decimal.
pub fn format_sig(value: f64, digits: u32) -> String {
    if value == 0.0 {
        return "0".to_string();
    }
    if !value.is_finite() {
        return value.to_string();
    }
    let exponent = value.abs().log10().floor() as i32;
    let decimals = (digits as i32 - 1 - exponent).max(0) as usize;
    format!("{value:.decimals$}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    Arp,
    Arr,
}

/// Retrieval curve: metric value per number of retrieved images.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalCurve {
    pub kind: CurveKind,
    /// (n retrieved, value in [0,1]) for n = 1..=n_max.
    pub points: Vec<(usize, f64)>,
}

impl RetrievalCurve {
    pub fn validate(&self) -> Result<()> {
        for &(n, v) in &self.points {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Argument(format!(
                    "curve value {v} at n={n} outside [0,1]"
                )));
            }
        }
        if self.kind == CurveKind::Arr {
            for pair in self.points.windows(2) {
                if pair[1].1 < pair[0].1 {
                    return Err(Error::Argument(format!(
                        "recall curve decreases between n={} and n={}",
                        pair[0].0, pair[1].0
                    )));
                }
            }
        }
        Ok(())
    }

    /// CSV with header `n,arp` or `n,arr`; values carry 9 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        self.validate()?;
        let name = match self.kind {
            CurveKind::Arp => "arp",
            CurveKind::Arr => "arr",
        };
        writeln!(w, "n,{name}")?;
        for &(n, v) in &self.points {
            writeln!(w, "{n},{}", format_sig(v, 9))?;
        }
        Ok(())
    }
}

/// Cumulative match curve: identification rate per allowed rank.
#[derive(Debug, Clone, PartialEq)]
pub struct CmcCurve {
    pub points: Vec<(usize, f64)>,
}

impl CmcCurve {
    pub fn validate(&self) -> Result<()> {
        let mut prev = 0.0;
        for &(rank, v) in &self.points {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Argument(format!(
                    "cmc value {v} at rank {rank} outside [0,1]"
                )));
            }
            if v < prev {
                return Err(Error::Argument(format!(
                    "cmc decreases at rank {rank}"
                )));
            }
            prev = v;
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        self.validate()?;
        writeln!(w, "rank,cmc")?;
        for &(rank, v) in &self.points {
            writeln!(w, "{rank},{}", format_sig(v, 9))?;
        }
        Ok(())
    }
}

/// Writes `metric,value` rows with 9 significant digits.
pub fn write_summary<W: Write>(rows: &[(&str, f64)], mut w: W) -> Result<()> {
    writeln!(w, "metric,value")?;
    for (name, value) in rows {
        writeln!(w, "{name},{}", format_sig(*value, 9))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Per-query ranking statistics shared by every metric.

struct QueryStat {
    /// 1-based ranks of the same-class gallery entries, ascending.
    gt_ranks: Vec<usize>,
    /// Relevant count within the top n, for n = 1..=n_max.
    prefix_relevant: Vec<usize>,
    /// Rank of the first same-class entry, if any.
    first_match: Option<usize>,
}

fn query_stats(ds: &LabeledDataset<FeatureVector>, n_max: usize) -> Result<Vec<QueryStat>> {
    let n = ds.len();
    if n < 2 {
        return Err(Error::Argument(
            "dataset needs at least 2 records".into(),
        ));
    }
    let records = ds.records();
    (0..n)
        .into_par_iter()
        .map(|q| -> Result<QueryStat> {
            let probe = &records[q].payload;
            let mut ranked: Vec<(usize, f64)> = Vec::with_capacity(n - 1);
            for (idx, record) in records.iter().enumerate() {
                if idx != q {
                    ranked.push((idx, chi_square(probe, &record.payload)?));
                }
            }
            // Stable sort keeps dataset order among equal distances.
            ranked.sort_by(|a, b| a.1.total_cmp(&b.1));
            let query_class = &records[q].label;
            let mut gt_ranks = Vec::new();
            let mut prefix_relevant = vec![0usize; n_max.min(n - 1)];
            let mut relevant = 0usize;
            for (pos, (idx, _)) in ranked.iter().enumerate() {
                let rank = pos + 1;
                if &records[*idx].label == query_class {
                    relevant += 1;
                    gt_ranks.push(rank);
                }
                if rank <= prefix_relevant.len() {
                    prefix_relevant[rank - 1] = relevant;
                }
            }
            Ok(QueryStat {
                first_match: gt_ranks.first().copied(),
                gt_ranks,
                prefix_relevant,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Retrieval metrics.

/// Precision and recall after retrieving the top `n` of a ranked gallery.
/// `labels` maps every dataset id (including the query) to its class; recall
/// is counted against the query's class size minus one.
pub fn precision_recall_at(
    ranked: &RankedRetrieval,
    labels: &HashMap<String, String>,
    query_class: &str,
    n: usize,
) -> Result<(f64, f64)> {
    let gallery_size = ranked.entries.len();
    if n < 1 || n > gallery_size {
        return Err(Error::Argument(format!(
            "cutoff {n} outside 1..={gallery_size}"
        )));
    }
    let class_size = labels.values().filter(|c| c.as_str() == query_class).count();
    if class_size < 2 {
        return Err(Error::Argument(format!(
            "class {query_class:?} has no other members to retrieve"
        )));
    }
    let relevant_total = class_size - 1;
    let relevant_in_top = ranked.entries[..n]
        .iter()
        .filter(|e| labels.get(&e.id).map(String::as_str) == Some(query_class))
        .count();
    Ok((
        relevant_in_top as f64 / n as f64,
        relevant_in_top as f64 / relevant_total as f64,
    ))
}

/// How per-query precision/recall rows are folded into ARP/ARR.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Averaging {
    /// Average per class, then over classes.
    PerClass,
    /// Plain mean over all queries.
    PerQuery,
}

/// Per-query retrieval row.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryRow {
    pub id: String,
    pub class: String,
    /// Precision at n = 1..=n_max.
    pub precision: Vec<f64>,
    /// Recall at n = 1..=n_max.
    pub recall: Vec<f64>,
    pub nmrr: f64,
}

/// Retrieval evaluation: per-query rows plus the aggregated curves.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub rows: Vec<QueryRow>,
    pub arp: RetrievalCurve,
    pub arr: RetrievalCurve,
    pub anmrr: f64,
    pub averaging: Averaging,
    /// Ids whose class has a single member; they are skipped as queries.
    pub excluded_singletons: Vec<String>,
}

fn mean(values: impl Iterator<Item = f64>, count: usize) -> f64 {
    values.sum::<f64>() / count as f64
}

fn aggregate_curves(
    rows: &[QueryRow],
    n_max: usize,
    averaging: Averaging,
) -> (RetrievalCurve, RetrievalCurve) {
    let fold = |select: &dyn Fn(&QueryRow, usize) -> f64, n: usize| -> f64 {
        match averaging {
            Averaging::PerQuery => mean(rows.iter().map(|r| select(r, n)), rows.len()),
            Averaging::PerClass => {
                // Rows arrive grouped by dataset order, not class; group here.
                let mut by_class: std::collections::BTreeMap<&str, Vec<f64>> =
                    std::collections::BTreeMap::new();
                for row in rows {
                    by_class.entry(&row.class).or_default().push(select(row, n));
                }
                let class_count = by_class.len();
                mean(
                    by_class
                        .values()
                        .map(|vals| mean(vals.iter().copied(), vals.len())),
                    class_count,
                )
            }
        }
    };
    let arp_points = (1..=n_max)
        .map(|n| (n, fold(&|r, n| r.precision[n - 1], n)))
        .collect();
    let arr_points = (1..=n_max)
        .map(|n| (n, fold(&|r, n| r.recall[n - 1], n)))
        .collect();
    (
        RetrievalCurve {
            kind: CurveKind::Arp,
            points: arp_points,
        },
        RetrievalCurve {
            kind: CurveKind::Arr,
            points: arr_points,
        },
    )
}

/// Runs the full retrieval evaluation: every image queries all others,
/// per-class (or per-query) curves are averaged, and ANMRR is the mean of
/// the per-query NMRR values.
pub fn retrieval_report(
    ds: &LabeledDataset<FeatureVector>,
    n_max: usize,
    averaging: Averaging,
) -> Result<EvaluationReport> {
    let n = ds.len();
    if n < 2 {
        return Err(Error::Argument("dataset needs at least 2 records".into()));
    }
    if n_max < 1 || n_max > n - 1 {
        return Err(Error::Argument(format!(
            "cutoff {n_max} exceeds the smallest usable gallery ({})",
            n - 1
        )));
    }
    let stats = query_stats(ds, n_max)?;

    let mut excluded_singletons = Vec::new();
    let mut eligible: Vec<(usize, &QueryStat)> = Vec::new();
    for (idx, stat) in stats.iter().enumerate() {
        let record = &ds.records()[idx];
        if ds.class_size(&record.label) < 2 {
            excluded_singletons.push(record.id.clone());
        } else {
            eligible.push((idx, stat));
        }
    }
    if eligible.is_empty() {
        return Err(Error::Argument(
            "every class has a single image; no retrieval queries possible".into(),
        ));
    }

    let gtm = eligible
        .iter()
        .map(|(_, s)| s.gt_ranks.len())
        .max()
        .unwrap_or(0);
    let rows: Vec<QueryRow> = eligible
        .iter()
        .map(|&(idx, stat)| {
            let record = &ds.records()[idx];
            let relevant_total = (ds.class_size(&record.label) - 1) as f64;
            let precision: Vec<f64> = (1..=n_max)
                .map(|n| stat.prefix_relevant[n - 1] as f64 / n as f64)
                .collect();
            let recall: Vec<f64> = (1..=n_max)
                .map(|n| stat.prefix_relevant[n - 1] as f64 / relevant_total)
                .collect();
            Ok(QueryRow {
                id: record.id.clone(),
                class: record.label.clone(),
                precision,
                recall,
                nmrr: nmrr(&stat.gt_ranks, gtm)?,
            })
        })
        .collect::<Result<_>>()?;

    let (arp, arr) = aggregate_curves(&rows, n_max, averaging);
    let anmrr = mean(rows.iter().map(|r| r.nmrr), rows.len());
    let report = EvaluationReport {
        rows,
        arp,
        arr,
        anmrr,
        averaging,
        excluded_singletons,
    };
    report.validate()?;
    Ok(report)
}

impl EvaluationReport {
    /// Checks curve ranges, recall monotonicity, and that the stored
    /// aggregates match a recomputation from the per-query rows to 1e-12.
    pub fn validate(&self) -> Result<()> {
        self.arp.validate()?;
        self.arr.validate()?;
        let n_max = self.arp.points.len();
        let (arp, arr) = aggregate_curves(&self.rows, n_max, self.averaging);
        for (stored, recomputed) in self
            .arp
            .points
            .iter()
            .chain(&self.arr.points)
            .zip(arp.points.iter().chain(&arr.points))
        {
            if (stored.1 - recomputed.1).abs() > 1e-12 {
                return Err(Error::Argument(format!(
                    "aggregate at n={} drifted from its rows: {} vs {}",
                    stored.0, stored.1, recomputed.1
                )));
            }
        }
        let anmrr = mean(self.rows.iter().map(|r| r.nmrr), self.rows.len());
        if (anmrr - self.anmrr).abs() > 1e-12 {
            return Err(Error::Argument(
                "anmrr drifted from its per-query rows".into(),
            ));
        }
        if !(0.0..=1.0 + 1e-12).contains(&self.anmrr) {
            return Err(Error::Argument(format!("anmrr {} outside [0,1]", self.anmrr)));
        }
        Ok(())
    }
}

/// ARP and ARR curves with the per-class averaging of the evaluation
/// protocol.
pub fn arp_arr(
    ds: &LabeledDataset<FeatureVector>,
    n_max: usize,
) -> Result<(RetrievalCurve, RetrievalCurve)> {
    let report = retrieval_report(ds, n_max, Averaging::PerClass)?;
    Ok((report.arp, report.arr))
}

/// Normalized modified retrieval rank for one query.
///
/// `gt_ranks` holds the 1-based ranks of the query's relevant images; `gtm`
/// is the largest ground-truth count over all queries. Ranks beyond
/// `K = min(4*NG, 2*GTM)` are penalized to `1.25*K`; the result is
/// `(AVR - 0.5 - NG/2) / (1.25*K - 0.5 - 0.5*NG)`, which is 0 for perfect
/// retrieval and 1 when nothing relevant lands within `K`.
pub fn nmrr(gt_ranks: &[usize], gtm: usize) -> Result<f64> {
    let ng = gt_ranks.len();
    if ng == 0 || gtm == 0 {
        return Err(Error::Argument(
            "nmrr needs at least one ground-truth image".into(),
        ));
    }
    let k = (4 * ng).min(2 * gtm);
    let penalty = 1.25 * k as f64;
    let avr = gt_ranks
        .iter()
        .map(|&r| if r <= k { r as f64 } else { penalty })
        .sum::<f64>()
        / ng as f64;
    let mrr = avr - 0.5 - ng as f64 / 2.0;
    let denom = penalty - 0.5 - 0.5 * ng as f64;
    Ok(mrr / denom)
}

/// Mean NMRR over all queries with at least one relevant image.
pub fn anmrr(ds: &LabeledDataset<FeatureVector>) -> Result<f64> {
    Ok(retrieval_report(ds, 1, Averaging::PerClass)?.anmrr)
}

// ---------------------------------------------------------------------------
// Recognition metrics.

/// Leave-one-out recognition: every probe plus its rank and match outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct RecognitionReport {
    /// Percentage of probes whose rank-1 gallery image shares their class.
    pub rate: f64,
    pub matched: usize,
    pub probes: usize,
    pub cmc: Option<CmcCurve>,
}

impl RecognitionReport {
    pub fn validate(&self) -> Result<()> {
        if let Some(cmc) = &self.cmc {
            cmc.validate()?;
            let rank1 = cmc.points.first().map(|p| p.1).unwrap_or(0.0);
            if (rank1 - self.rate / 100.0).abs() > 1e-12 {
                return Err(Error::Argument(format!(
                    "cmc rank-1 {rank1} disagrees with recognition rate {}",
                    self.rate
                )));
            }
        }
        Ok(())
    }
}

/// Leave-one-out recognition rate as a percentage.
pub fn recognition_rate(ds: &LabeledDataset<FeatureVector>) -> Result<f64> {
    Ok(recognition_report(ds, None)?.rate)
}

/// Leave-one-out recognition with an optional CMC up to `max_rank`.
pub fn recognition_report(
    ds: &LabeledDataset<FeatureVector>,
    max_rank: Option<usize>,
) -> Result<RecognitionReport> {
    let n = ds.len();
    if n < 2 {
        return Err(Error::Argument("dataset needs at least 2 records".into()));
    }
    if let Some(r) = max_rank {
        if r < 1 || r > n - 1 {
            return Err(Error::Argument(format!(
                "max rank {r} outside 1..={}",
                n - 1
            )));
        }
    }
    let stats = query_stats(ds, 0)?;
    let matched = stats.iter().filter(|s| s.first_match == Some(1)).count();
    let rate = matched as f64 / n as f64 * 100.0;
    let cmc = max_rank.map(|max_rank| CmcCurve {
        points: (1..=max_rank)
            .map(|rank| {
                let hits = stats
                    .iter()
                    .filter(|s| s.first_match.is_some_and(|m| m <= rank))
                    .count();
                (rank, hits as f64 / n as f64)
            })
            .collect(),
    });
    let report = RecognitionReport {
        rate,
        matched,
        probes: n,
        cmc,
    };
    report.validate()?;
    Ok(report)
}

/// Cumulative match curve up to `max_rank`.
pub fn cmc(ds: &LabeledDataset<FeatureVector>, max_rank: usize) -> Result<CmcCurve> {
    Ok(recognition_report(ds, Some(max_rank))?.cmc.unwrap())
}

// ---------------------------------------------------------------------------
// Cross-validation.

/// Seeded probe/gallery split configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossValConfig {
    /// Fraction of the dataset drawn as probes each fold, in (0, 1).
    pub probe_fraction: f64,
    pub folds: u32,
    pub seed: u64,
}

/// One fold's sampled probes and its recognition rate.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    /// Record indices drawn as probes, ascending.
    pub probes: Vec<usize>,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossValReport {
    pub config: CrossValConfig,
    pub folds: Vec<FoldResult>,
    /// Mean of the fold rates.
    pub mean_rate: f64,
}

impl CrossValReport {
    /// CSV with header `probe_fraction,fold,recognition_rate`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "probe_fraction,fold,recognition_rate")?;
        for (k, fold) in self.folds.iter().enumerate() {
            writeln!(
                w,
                "{},{},{}",
                format_sig(self.config.probe_fraction, 9),
                k + 1,
                format_sig(fold.rate, 9)
            )?;
        }
        Ok(())
    }
}

/// Unbiased draw from `0..bound` using rejection sampling on 64-bit words.
fn uniform_below(rng: &mut ChaCha8Rng, bound: u64) -> u64 {
    debug_assert!(bound > 0);
    let zone = ((1u128 << 64) / u128::from(bound)) * u128::from(bound);
    loop {
        let v = rng.next_u64();
        if u128::from(v) < zone {
            return v % bound;
        }
    }
}

/// Fisher-Yates shuffle driven by the fold RNG.
fn shuffled_indices(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = uniform_below(rng, (i + 1) as u64) as usize;
        order.swap(i, j);
    }
    order
}

/// Repeated random probe/gallery recognition.
///
/// Each fold draws `round(probe_fraction * N)` probes (at least one) with a
/// ChaCha8-seeded Fisher-Yates shuffle; the remaining images form the
/// gallery. A fold whose gallery would be empty is resampled, and the run
/// aborts after 100 rejected attempts. The same seed always reproduces the
/// same folds.
pub fn cross_validate(
    ds: &LabeledDataset<FeatureVector>,
    cfg: &CrossValConfig,
) -> Result<CrossValReport> {
    let n = ds.len();
    if n < 2 {
        return Err(Error::Argument("dataset needs at least 2 records".into()));
    }
    if !(cfg.probe_fraction > 0.0 && cfg.probe_fraction < 1.0) {
        return Err(Error::Argument(format!(
            "probe fraction {} outside (0,1)",
            cfg.probe_fraction
        )));
    }
    if cfg.folds == 0 {
        return Err(Error::Argument("fold count must be positive".into()));
    }
    let probe_count = ((cfg.probe_fraction * n as f64).round() as usize).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let records = ds.records();

    let mut folds = Vec::with_capacity(cfg.folds as usize);
    for _ in 0..cfg.folds {
        let mut attempts = 0;
        let probes = loop {
            let order = shuffled_indices(&mut rng, n);
            if probe_count < n {
                let mut chosen = order[..probe_count].to_vec();
                chosen.sort_unstable();
                break chosen;
            }
            attempts += 1;
            if attempts >= 100 {
                return Err(Error::Argument(format!(
                    "probe fraction {} leaves an empty gallery; gave up after 100 attempts",
                    cfg.probe_fraction
                )));
            }
        };
        let mut is_probe = vec![false; n];
        for &p in &probes {
            is_probe[p] = true;
        }
        let gallery: Vec<usize> = (0..n).filter(|&i| !is_probe[i]).collect();

        let outcomes: Vec<bool> = probes
            .par_iter()
            .map(|&p| -> Result<bool> {
                let probe = &records[p].payload;
                let mut best: Option<(usize, f64)> = None;
                for &g in &gallery {
                    let d = chi_square(probe, &records[g].payload)?;
                    // strict less-than keeps the earliest gallery entry on ties
                    if best.is_none_or(|(_, bd)| d < bd) {
                        best = Some((g, d));
                    }
                }
                let (winner, _) = best.expect("gallery is non-empty");
                Ok(records[winner].label == records[p].label)
            })
            .collect::<Result<_>>()?;
        let matched = outcomes.iter().filter(|&&m| m).count();
        let rate = matched as f64 / probes.len() as f64 * 100.0;
        folds.push(FoldResult { probes, rate });
    }
    let mean_rate = mean(folds.iter().map(|f| f.rate), folds.len());
    Ok(CrossValReport {
        config: *cfg,
        folds,
        mean_rate,
    })
}

// ---------------------------------------------------------------------------
// Entropy diagnostic.

/// Shannon entropy in bits of one code raster's empirical distribution.
pub fn image_entropy(img: &GrayImage) -> f64 {
    let mut counts = [0u64; 256];
    for &code in img.data() {
        counts[code as usize] += 1;
    }
    let total = img.data().len() as f64;
    let sum: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            p * p.log2()
        })
        .sum();
    -sum
}

/// Mean entropy over a descriptor's feature images.
pub fn feature_entropy(set: &FeatureImageSet) -> f64 {
    if set.images.is_empty() {
        return 0.0;
    }
    mean(set.images.iter().map(image_entropy), set.images.len())
}
