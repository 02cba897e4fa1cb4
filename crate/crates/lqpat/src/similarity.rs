//! Chi-square histogram distance and nearest-neighbor ranking.

use crate::descriptors::FeatureVector;
use crate::error::{Error, Result};

/// Chi-square distance between two non-negative histograms:
/// `0.5 * sum (x_i - y_i)^2 / (x_i + y_i)`, with empty bins (both zero)
/// contributing nothing.
pub fn chi_square(x: &FeatureVector, y: &FeatureVector) -> Result<f64> {
    chi_square_bins(x.bins(), y.bins())
}

/// Slice-level form of [`chi_square`].
pub fn chi_square_bins(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!(
            "bin count mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let mut sum = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        let denom = a + b;
        if denom > 0.0 {
            let diff = a - b;
            sum += diff * diff / denom;
        }
    }
    Ok(0.5 * sum)
}

/// One gallery entry after ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedEntry {
    pub id: String,
    pub distance: f64,
    /// 1-based position; rank 1 is the closest gallery entry.
    pub rank: usize,
}

/// A gallery sorted by ascending distance to one probe.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedRetrieval {
    pub query_id: String,
    pub entries: Vec<RankedEntry>,
}

/// Sorts gallery indices by ascending chi-square distance to the probe.
/// The sort is stable, so ties keep their gallery order.
pub fn rank_indices(probe: &FeatureVector, gallery: &[&FeatureVector]) -> Result<Vec<(usize, f64)>> {
    if gallery.is_empty() {
        return Err(Error::Argument("gallery is empty".into()));
    }
    let mut order: Vec<(usize, f64)> = gallery
        .iter()
        .enumerate()
        .map(|(idx, features)| Ok((idx, chi_square(probe, features)?)))
        .collect::<Result<_>>()?;
    order.sort_by(|a, b| a.1.total_cmp(&b.1));
    Ok(order)
}

/// Ranks a labeled gallery against a probe, assigning 1-based ranks.
pub fn rank_gallery(
    query_id: &str,
    probe: &FeatureVector,
    gallery: &[(&str, &FeatureVector)],
) -> Result<RankedRetrieval> {
    let features: Vec<&FeatureVector> = gallery.iter().map(|(_, f)| *f).collect();
    let order = rank_indices(probe, &features)?;
    let entries = order
        .into_iter()
        .enumerate()
        .map(|(pos, (idx, distance))| RankedEntry {
            id: gallery[idx].0.to_string(),
            distance,
            rank: pos + 1,
        })
        .collect();
    Ok(RankedRetrieval {
        query_id: query_id.to_string(),
        entries,
    })
}

/// 1NN classification: the label of the rank-1 gallery entry.
pub fn classify_1nn<'a>(
    probe: &FeatureVector,
    gallery: &[(&str, &'a str, &FeatureVector)],
) -> Result<&'a str> {
    let features: Vec<&FeatureVector> = gallery.iter().map(|(_, _, f)| *f).collect();
    let order = rank_indices(probe, &features)?;
    Ok(gallery[order[0].0].1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(bins: &[f64]) -> FeatureVector {
        FeatureVector::new(bins.to_vec(), false).unwrap()
    }

    #[test]
    fn chi_square_hand_values() {
        let x = fv(&[1.0, 0.0]);
        let y = fv(&[0.0, 1.0]);
        assert_eq!(chi_square(&x, &y).unwrap(), 1.0);

        let x = fv(&[2.0, 0.0, 1.0]);
        let y = fv(&[0.0, 2.0, 1.0]);
        assert_eq!(chi_square(&x, &y).unwrap(), 2.0);
    }

    #[test]
    fn chi_square_identity() {
        let x = fv(&[0.25, 0.5, 0.0, 0.25]);
        assert_eq!(chi_square(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn chi_square_length_mismatch() {
        let x = fv(&[1.0]);
        let y = fv(&[1.0, 0.0]);
        assert!(matches!(chi_square(&x, &y), Err(Error::Dimension(_))));
    }

    #[test]
    fn rank_gallery_orders_by_hand_distances() {
        // Probe (0,2,1): distances to the three entries are 2, 0.5 and 1.
        let probe = fv(&[0.0, 2.0, 1.0]);
        let g1 = fv(&[2.0, 0.0, 1.0]);
        let g2 = fv(&[0.0, 2.0, 0.0]);
        let g3 = fv(&[1.0, 2.0, 0.0]);
        let ranked = rank_gallery(
            "q",
            &probe,
            &[("g1", &g1), ("g2", &g2), ("g3", &g3)],
        )
        .unwrap();
        let ids: Vec<&str> = ranked.entries.iter().map(|e| e.id.as_str()).collect();
        assert_eq!(ids, ["g2", "g3", "g1"]);
        let dists: Vec<f64> = ranked.entries.iter().map(|e| e.distance).collect();
        assert_eq!(dists, [0.5, 1.0, 2.0]);
        let ranks: Vec<usize> = ranked.entries.iter().map(|e| e.rank).collect();
        assert_eq!(ranks, [1, 2, 3]);
    }

    #[test]
    fn rank_gallery_probe_copy_wins() {
        let probe = fv(&[3.0, 1.0]);
        let other = fv(&[1.0, 3.0]);
        let ranked =
            rank_gallery("q", &probe, &[("far", &other), ("same", &probe)]).unwrap();
        assert_eq!(ranked.entries[0].id, "same");
        assert_eq!(ranked.entries[0].distance, 0.0);
    }

    #[test]
    fn rank_gallery_single_entry() {
        let probe = fv(&[1.0, 0.0]);
        let other = fv(&[0.0, 1.0]);
        let ranked = rank_gallery("q", &probe, &[("only", &other)]).unwrap();
        assert_eq!(ranked.entries.len(), 1);
        assert_eq!(ranked.entries[0].rank, 1);
    }

    #[test]
    fn empty_gallery_rejected() {
        let probe = fv(&[1.0]);
        assert!(matches!(
            rank_indices(&probe, &[]),
            Err(Error::Argument(_))
        ));
        assert!(matches!(classify_1nn(&probe, &[]), Err(Error::Argument(_))));
    }

    #[test]
    fn classify_1nn_examples() {
        let probe = fv(&[1.0, 1.0]);
        let same = fv(&[1.0, 1.0]);
        let off = fv(&[2.0, 0.0]);
        assert_eq!(
            classify_1nn(&probe, &[("a", "dog", &off), ("b", "cat", &same)]).unwrap(),
            "cat"
        );
        assert_eq!(classify_1nn(&probe, &[("a", "solo", &off)]).unwrap(), "solo");
        // Equidistant entries: the earlier gallery entry wins.
        let left = fv(&[1.0, 0.0]);
        let right = fv(&[0.0, 1.0]);
        let mid = fv(&[0.5, 0.5]);
        assert_eq!(
            classify_1nn(&mid, &[("a", "first", &left), ("b", "second", &right)]).unwrap(),
            "first"
        );
    }
}
