//! Observability-driven scan sampling.
//!
//! Every scan point is scored, in the vehicle frame, for how much it
//! constrains each pose degree of freedom: six signed rotation scores
//! `±a²·(x × n)·axis` and three translation scores `a²·|n·axis|`, where `a`
//! is the planarity scalar. The nine lists are sorted descending and walked
//! from the head, keeping a candidate only while its nearest model point is
//! within the outlier radius, until `s` samples per list are accepted.

use nalgebra::Vector3;
use rayon::prelude::*;
use thiserror::Error;

use crate::features::FeaturedCloud;
use crate::geometry::Point3;
use crate::imls::ModelMap;

/// Matching falls back to the prediction when fewer samples than this pass
/// the outlier gate; it keeps the solver comfortably over-determined.
pub const MIN_TOTAL_SAMPLES: usize = 100;

/// Nine descending-order index lists over a scan's points.
#[derive(Debug, Clone)]
pub struct ScoreLists {
    pub lists: [Vec<u32>; 9],
}

/// A matching sample: scan point plus its own normal, both in the frame the
/// scan is currently posed in.
#[derive(Debug, Clone, Copy)]
pub struct Sample {
    pub position: Point3,
    pub normal: Vector3<f64>,
}

/// Samples drawn for one scan; the same point may appear several times when
/// it leads several lists.
#[derive(Debug, Clone, Default)]
pub struct SampleSet {
    pub samples: Vec<Sample>,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Error)]
#[error("only {accepted} samples passed the outlier gate (need {required})")]
pub struct InsufficientSamples {
    pub accepted: usize,
    pub required: usize,
}

/// Builds the nine score lists for a vehicle-frame scan with features.
///
/// Points with unusable normals score −∞ everywhere and sink to the tails.
/// Ties break by ascending point index so the ordering is reproducible.
pub fn build_score_lists(scan: &FeaturedCloud) -> ScoreLists {
    let n = scan.len();
    let mut scores: [Vec<f64>; 9] = std::array::from_fn(|_| vec![0.0; n]);
    for i in 0..n {
        if !scan.usable[i] {
            for list in &mut scores {
                list[i] = f64::NEG_INFINITY;
            }
            continue;
        }
        let a2 = scan.planarity[i] * scan.planarity[i];
        let lever = scan.points[i].cross(&scan.normals[i]) * a2;
        scores[0][i] = lever.x;
        scores[1][i] = -lever.x;
        scores[2][i] = lever.y;
        scores[3][i] = -lever.y;
        scores[4][i] = lever.z;
        scores[5][i] = -lever.z;
        scores[6][i] = a2 * scan.normals[i].x.abs();
        scores[7][i] = a2 * scan.normals[i].y.abs();
        scores[8][i] = a2 * scan.normals[i].z.abs();
    }

    let lists: Vec<Vec<u32>> = scores
        .par_iter()
        .map(|score| {
            let mut order: Vec<u32> = (0..n as u32).collect();
            order.sort_unstable_by(|&a, &b| {
                score[b as usize]
                    .total_cmp(&score[a as usize])
                    .then(a.cmp(&b))
            });
            order
        })
        .collect();
    ScoreLists {
        lists: lists.try_into().expect("nine lists"),
    }
}

/// Walks each list head-first, accepting candidates whose nearest model point
/// is within `radius`, until `per_list` are accepted or the list runs out.
/// `positions` and `normals` must be posed where matching will start (the
/// predicted pose) and indexed like the scan behind `lists`.
pub fn draw_samples(
    lists: &ScoreLists,
    positions: &[Point3],
    normals: &[Vector3<f64>],
    model: &ModelMap,
    per_list: usize,
    radius: f64,
) -> Result<SampleSet, InsufficientSamples> {
    assert_eq!(positions.len(), normals.len());
    let accepted_per_list: Vec<Vec<Sample>> = lists
        .lists
        .par_iter()
        .map(|list| {
            let mut accepted = Vec::with_capacity(per_list);
            for &index in list {
                if accepted.len() == per_list {
                    break;
                }
                let position = positions[index as usize];
                match model.nearest_distance(&position) {
                    Some(d) if d <= radius => accepted.push(Sample {
                        position,
                        normal: normals[index as usize],
                    }),
                    _ => {}
                }
            }
            accepted
        })
        .collect();

    let samples: Vec<Sample> = accepted_per_list.into_iter().flatten().collect();
    if samples.len() < MIN_TOTAL_SAMPLES.min(9 * per_list) {
        return Err(InsufficientSamples {
            accepted: samples.len(),
            required: MIN_TOTAL_SAMPLES.min(9 * per_list),
        });
    }
    Ok(SampleSet { samples })
}

/// Baseline sampler: a random permutation walked through the same outlier
/// gate, up to `count` accepted samples.
pub fn draw_random_samples(
    positions: &[Point3],
    normals: &[Vector3<f64>],
    model: &ModelMap,
    count: usize,
    radius: f64,
    rng: &mut impl rand::Rng,
) -> Result<SampleSet, InsufficientSamples> {
    use rand::seq::SliceRandom;
    let mut order: Vec<u32> = (0..positions.len() as u32).collect();
    order.shuffle(rng);
    let mut samples = Vec::with_capacity(count);
    for &index in &order {
        if samples.len() == count {
            break;
        }
        let position = positions[index as usize];
        if let Some(d) = model.nearest_distance(&position) {
            if d <= radius {
                samples.push(Sample {
                    position,
                    normal: normals[index as usize],
                });
            }
        }
    }
    let required = MIN_TOTAL_SAMPLES.min(count);
    if samples.len() < required {
        return Err(InsufficientSamples {
            accepted: samples.len(),
            required,
        });
    }
    Ok(SampleSet { samples })
}

/// Uses every gated point once.
pub fn draw_all_samples(
    positions: &[Point3],
    normals: &[Vector3<f64>],
    model: &ModelMap,
    radius: f64,
) -> Result<SampleSet, InsufficientSamples> {
    let samples: Vec<Sample> = positions
        .iter()
        .zip(normals)
        .filter(|(p, _)| matches!(model.nearest_distance(p), Some(d) if d <= radius))
        .map(|(p, n)| Sample {
            position: *p,
            normal: *n,
        })
        .collect();
    if samples.len() < MIN_TOTAL_SAMPLES {
        return Err(InsufficientSamples {
            accepted: samples.len(),
            required: MIN_TOTAL_SAMPLES,
        });
    }
    Ok(SampleSet { samples })
}
