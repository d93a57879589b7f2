//! Detection and tracking evaluation against simulator ground truth.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;
use thiserror::Error;

use crate::detection::{iou, DetectionSet};
use crate::simulator::GroundTruth;
use crate::tracker::{hungarian, CostMatrix, TrackedBox};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("ground truth contains no boxes")]
    NoGroundTruth,
    #[error("no tracks to evaluate")]
    NoTracks,
}

/// IoU thresholds 0.50, 0.55, …, 0.95.
pub fn coco_thresholds() -> Vec<f64> {
    (0..10).map(|k| (50 + 5 * k) as f64 / 100.0).collect()
}

/// Area under the all-point interpolated precision/recall curve.
///
/// Detections are ranked by descending score over the whole sequence (ties
/// keep input order) and greedily matched to the highest-IoU unmatched GT box
/// at their timestamp.
pub fn average_precision(dets: &DetectionSet, gt: &GroundTruth, iou_thresh: f64) -> Result<f64, MetricsError> {
    let total = gt.box_count();
    if total == 0 {
        return Err(MetricsError::NoGroundTruth);
    }
    let mut ranked: Vec<(u64, usize)> = dets
        .iter()
        .flat_map(|(&t, list)| (0..list.len()).map(move |i| (t, i)))
        .collect();
    ranked.sort_by(|a, b| dets[&b.0][b.1].score.total_cmp(&dets[&a.0][a.1].score));

    let mut used: HashMap<u64, Vec<bool>> = HashMap::new();
    let mut tp = 0usize;
    let mut curve = Vec::with_capacity(ranked.len());
    for (k, &(t, i)) in ranked.iter().enumerate() {
        let det = &dets[&t][i].bbox;
        let boxes = gt.frames.get(&t).map(Vec::as_slice).unwrap_or(&[]);
        let flags = used.entry(t).or_insert_with(|| vec![false; boxes.len()]);
        let mut best: Option<(usize, f64)> = None;
        for (j, g) in boxes.iter().enumerate() {
            if flags[j] {
                continue;
            }
            let v = iou(det, &g.bbox);
            if v >= iou_thresh && best.is_none_or(|(_, bv)| v > bv) {
                best = Some((j, v));
            }
        }
        if let Some((j, _)) = best {
            flags[j] = true;
            tp += 1;
        }
        curve.push((tp as f64 / total as f64, tp as f64 / (k + 1) as f64));
    }

    // precision envelope from the right, then sum over recall steps
    let mut ap = 0.0;
    let mut envelope = 0.0f64;
    let mut prev_recall = curve.last().map_or(0.0, |c| c.0);
    for &(recall, precision) in curve.iter().rev() {
        ap += (prev_recall - recall) * envelope;
        envelope = envelope.max(precision);
        prev_recall = recall;
    }
    ap += prev_recall * envelope;
    Ok(ap)
}

/// AP at each COCO threshold and their mean.
pub fn mean_average_precision(dets: &DetectionSet, gt: &GroundTruth) -> Result<(Vec<(f64, f64)>, f64), MetricsError> {
    let per: Vec<(f64, f64)> = coco_thresholds()
        .into_iter()
        .map(|th| average_precision(dets, gt, th).map(|ap| (th, ap)))
        .collect::<Result<_, _>>()?;
    let mean = per.iter().map(|p| p.1).sum::<f64>() / per.len() as f64;
    Ok((per, mean))
}

/// Mean over track ids of the span between first and last appearance, in
/// seconds.
pub fn avg_tracklet_time(tracks: &[TrackedBox]) -> Result<f64, MetricsError> {
    let mut spans: BTreeMap<u64, (u64, u64)> = BTreeMap::new();
    for r in tracks {
        let s = spans.entry(r.id).or_insert((r.t, r.t));
        s.0 = s.0.min(r.t);
        s.1 = s.1.max(r.t);
    }
    if spans.is_empty() {
        return Err(MetricsError::NoTracks);
    }
    let total: u64 = spans.values().map(|(a, b)| b - a).sum();
    Ok(total as f64 / 1e6 / spans.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MotaResult {
    pub mota: f64,
    pub id_switches: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub matches: usize,
    pub gt_boxes: usize,
}

/// Cost discount that makes a GT agent keep its previous track on IoU ties.
const KEEP_ID_BONUS: f64 = 1e-9;

/// CLEAR-style accounting with per-timestamp optimal matching at
/// `IoU ≥ iou_match`.
pub fn mota(tracks: &[TrackedBox], gt: &GroundTruth, iou_match: f64) -> Result<MotaResult, MetricsError> {
    let gt_boxes = gt.box_count();
    if gt_boxes == 0 {
        return Err(MetricsError::NoGroundTruth);
    }
    let mut by_t: BTreeMap<u64, Vec<&TrackedBox>> = BTreeMap::new();
    for r in tracks {
        by_t.entry(r.t).or_default().push(r);
    }
    for rows in by_t.values_mut() {
        rows.sort_by(|a, b| {
            let key = |r: &TrackedBox| [r.bbox.x1, r.bbox.y1, r.bbox.x2, r.bbox.y2];
            a.id.cmp(&b.id).then_with(|| {
                key(a).iter().zip(key(b)).map(|(p, q)| p.total_cmp(&q)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
            })
        });
    }
    let mut times: Vec<u64> = gt.frames.keys().chain(by_t.keys()).copied().collect();
    times.sort_unstable();
    times.dedup();

    let mut last_match: HashMap<u32, u64> = HashMap::new();
    let (mut fp, mut matches, mut id_switches) = (0, 0, 0);
    for t in times {
        let hyp = by_t.get(&t).map(Vec::as_slice).unwrap_or(&[]);
        let mut truth: Vec<_> = gt.frames.get(&t).map(|v| v.iter().collect()).unwrap_or_default();
        truth.sort_by_key(|g| g.agent_id);
        let overlap: Vec<Vec<f64>> = truth
            .iter()
            .map(|g| hyp.iter().map(|h| iou(&g.bbox, &h.bbox)).collect())
            .collect();
        let cost = CostMatrix::from_fn(truth.len(), hyp.len(), |i, j| {
            let v = overlap[i][j];
            if v < iou_match {
                return 1.0;
            }
            let keep = last_match.get(&truth[i].agent_id) == Some(&hyp[j].id);
            1.0 - v - if keep { KEEP_ID_BONUS } else { 0.0 }
        });
        let mut matched = 0;
        for (i, j) in hungarian(&cost) {
            if overlap[i][j] < iou_match {
                continue;
            }
            matched += 1;
            let agent = truth[i].agent_id;
            if let Some(prev) = last_match.insert(agent, hyp[j].id) {
                if prev != hyp[j].id {
                    id_switches += 1;
                }
            }
        }
        matches += matched;
        fp += hyp.len() - matched;
    }
    let fn_ = gt_boxes - matches;
    let mota = 1.0 - (fp + fn_ + id_switches) as f64 / gt_boxes as f64;
    Ok(MotaResult {
        mota,
        id_switches,
        fp,
        fn_,
        matches,
        gt_boxes,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    /// Keyed by threshold formatted with two decimals; present when
    /// detections were supplied.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub ap_per_threshold: BTreeMap<String, f64>,
    pub map_coco: Option<f64>,
    /// `None` when there are no tracks.
    pub avg_tracklet_s: Option<f64>,
    pub track_count: usize,
    #[serde(flatten)]
    pub mota: MotaResult,
}

pub fn evaluate(tracks: &[TrackedBox], gt: &GroundTruth, dets: Option<&DetectionSet>) -> Result<EvalReport, MetricsError> {
    let mota = mota(tracks, gt, 0.5)?;
    let (ap_per_threshold, map_coco) = match dets {
        Some(d) => {
            let (per, mean) = mean_average_precision(d, gt)?;
            (per.into_iter().map(|(th, ap)| (format!("{th:.2}"), ap)).collect(), Some(mean))
        }
        None => (BTreeMap::new(), None),
    };
    let avg_tracklet_s = avg_tracklet_time(tracks).ok();
    let mut ids: Vec<u64> = tracks.iter().map(|r| r.id).collect();
    ids.sort_unstable();
    ids.dedup();
    Ok(EvalReport {
        ap_per_threshold,
        map_coco,
        avg_tracklet_s,
        track_count: ids.len(),
        mota,
    })
}

impl EvalReport {
    /// Two-column text table, one metric per row.
    pub fn table(&self, label: &str) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"));
        let rows = [
            ("mAP .5:.05:.95", opt(self.map_coco)),
            ("Avg. tracklet time [s]", opt(self.avg_tracklet_s)),
            ("MOTA", format!("{:.3}", self.mota.mota)),
            ("ID switches", self.mota.id_switches.to_string()),
            ("FP / FN", format!("{} / {}", self.mota.fp, self.mota.fn_)),
            ("Tracks", self.track_count.to_string()),
        ];
        let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
        let mut out = format!("{:width$}  {label}\n", "");
        for (name, value) in rows {
            out.push_str(&format!("{name:width$}  {value}\n"));
        }
        out
    }
}
