//! Nearest-neighbour JPDA: joint association probabilities by exhaustive
//! event enumeration, followed by a one-to-one MAP hard assignment.
//!
//! Tracks and measurements are first split into independent clusters (the
//! connected components of the gating graph). Marginals factor exactly across
//! clusters, so each cluster is enumerated on its own.

use super::kalman::{innovation, measurement_likelihood, KalmanTrack};
use super::TrackingError;
use crate::detection::GroundMeasurement;

/// Upper bound on tracks per cluster and gated measurements per track.
pub const MAX_ENUMERATION: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssociationParams {
    /// Squared Mahalanobis gate (chi-square, 2 dof).
    pub gate_threshold: f64,
    pub detection_prob: f64,
    /// Clutter density per square meter.
    pub clutter_density: f64,
    /// Mahalanobis distance above which a hard assignment is dropped.
    pub unassign_distance: f64,
}

impl Default for AssociationParams {
    fn default() -> Self {
        let gate = 9.21;
        Self {
            gate_threshold: gate,
            detection_prob: 0.9,
            clutter_density: 1e-4,
            unassign_distance: f64::sqrt(gate),
        }
    }
}

impl AssociationParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.gate_threshold > 0.0) {
            return Err("gate_threshold must be positive".into());
        }
        if !(self.detection_prob > 0.0 && self.detection_prob <= 1.0) {
            return Err("detection_prob must lie in (0, 1]".into());
        }
        if !(self.clutter_density >= 0.0) {
            return Err("clutter_density must be non-negative".into());
        }
        if !(self.unassign_distance > 0.0) {
            return Err("unassign_distance must be positive".into());
        }
        Ok(())
    }
}

/// Marginal association probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginals {
    /// `beta[t][j]`: probability that measurement `j` originated from track `t`.
    pub beta: Vec<Vec<f64>>,
    /// Probability that track `t` was not detected.
    pub miss: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Association {
    /// Measurement index assigned to each track, if any.
    pub assignments: Vec<Option<usize>>,
    /// Measurements not assigned to any track, ascending.
    pub leftovers: Vec<usize>,
    pub marginals: Marginals,
}

struct Pair {
    likelihood: f64,
    distance2: f64,
}

/// Gated pair table: `table[t][j]` is `Some` when the pair passes the gate.
fn gate_pairs(
    tracks: &[KalmanTrack],
    measurements: &[GroundMeasurement],
    params: &AssociationParams,
) -> Result<Vec<Vec<Option<Pair>>>, TrackingError> {
    tracks
        .iter()
        .map(|t| {
            measurements
                .iter()
                .map(|z| {
                    let inn = innovation(t, z)?;
                    let d2 = (inn.residual.transpose() * inn.inverse * inn.residual)[0];
                    Ok((d2 <= params.gate_threshold).then(|| Pair {
                        likelihood: measurement_likelihood(&inn),
                        distance2: d2,
                    }))
                })
                .collect()
        })
        .collect()
}

/// Connected components of the gating graph, as (tracks, measurements).
fn clusters(table: &[Vec<Option<Pair>>], n_meas: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    let n_tracks = table.len();
    // Union-find over tracks followed by measurements.
    let mut parent: Vec<usize> = (0..n_tracks + n_meas).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for (t, row) in table.iter().enumerate() {
        for (j, pair) in row.iter().enumerate() {
            if pair.is_some() {
                let (a, b) = (find(&mut parent, t), find(&mut parent, n_tracks + j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, (Vec<usize>, Vec<usize>)> = Default::default();
    for t in 0..n_tracks {
        let root = find(&mut parent, t);
        groups.entry(root).or_default().0.push(t);
    }
    for j in 0..n_meas {
        let root = find(&mut parent, n_tracks + j);
        groups.entry(root).or_default().1.push(j);
    }
    groups.into_values().filter(|(ts, _)| !ts.is_empty()).collect()
}

/// JPDA marginals for every track/measurement pair.
///
/// A joint event assigns each measurement to at most one track and each track
/// at most one measurement. Its weight is
/// `prod_assigned(P_D * N(z; Hx, S) / lambda) * prod_missed(1 - P_D)`, which is
/// the usual `lambda^clutter * prod(P_D * N) * prod(1 - P_D)` divided by the
/// event-independent constant `lambda^m`.
pub fn jpda_marginals(
    tracks: &[KalmanTrack],
    measurements: &[GroundMeasurement],
    params: &AssociationParams,
) -> Result<Marginals, TrackingError> {
    let table = gate_pairs(tracks, measurements, params)?;
    marginals_from_table(&table, measurements.len(), params)
}

fn marginals_from_table(
    table: &[Vec<Option<Pair>>],
    n_meas: usize,
    params: &AssociationParams,
) -> Result<Marginals, TrackingError> {
    let n_tracks = table.len();
    let mut beta = vec![vec![0.0; n_meas]; n_tracks];
    let mut miss = vec![1.0; n_tracks];

    for row in table {
        let gated = row.iter().filter(|p| p.is_some()).count();
        if gated > MAX_ENUMERATION {
            return Err(TrackingError::EnumerationOverflow(format!(
                "{gated} measurements inside one track gate (limit {MAX_ENUMERATION})"
            )));
        }
    }

    let p_d = params.detection_prob;
    let lambda = params.clutter_density;
    for (cluster_tracks, cluster_meas) in clusters(table, n_meas) {
        if cluster_meas.is_empty() {
            continue;
        }
        if cluster_tracks.len() > MAX_ENUMERATION {
            return Err(TrackingError::EnumerationOverflow(format!(
                "{} interacting tracks in one cluster (limit {MAX_ENUMERATION})",
                cluster_tracks.len()
            )));
        }
        // Per-track options inside the cluster: (local measurement slot, weight).
        let options: Vec<Vec<(usize, f64)>> = cluster_tracks
            .iter()
            .map(|&t| {
                cluster_meas
                    .iter()
                    .enumerate()
                    .filter_map(|(slot, &j)| {
                        table[t][j].as_ref().map(|pair| {
                            let w = if lambda > 0.0 {
                                p_d * pair.likelihood / lambda
                            } else {
                                p_d * pair.likelihood
                            };
                            (slot, w)
                        })
                    })
                    .collect()
            })
            .collect();

        let k = cluster_tracks.len();
        let mut acc_assoc = vec![vec![0.0; cluster_meas.len()]; k];
        let mut acc_miss = vec![0.0; k];
        let mut total = 0.0;
        let mut choice: Vec<Option<usize>> = vec![None; k];
        let mut used = vec![false; cluster_meas.len()];
        enumerate_events(
            0,
            1.0,
            &options,
            1.0 - p_d,
            lambda == 0.0,
            &mut choice,
            &mut used,
            &mut |w, choice| {
                total += w;
                for (local, c) in choice.iter().enumerate() {
                    match c {
                        Some(slot) => acc_assoc[local][*slot] += w,
                        None => acc_miss[local] += w,
                    }
                }
            },
        );
        if !(total > 0.0) || !total.is_finite() {
            return Err(TrackingError::NumericalFailure(
                "joint association events have zero total weight".into(),
            ));
        }
        for (local, &t) in cluster_tracks.iter().enumerate() {
            miss[t] = acc_miss[local] / total;
            for (slot, &j) in cluster_meas.iter().enumerate() {
                beta[t][j] = acc_assoc[local][slot] / total;
            }
        }
    }
    Ok(Marginals { beta, miss })
}

/// Depth-first walk over feasible joint events. With zero clutter density,
/// every measurement of the cluster must be claimed by some track.
#[allow(clippy::too_many_arguments)]
fn enumerate_events(
    depth: usize,
    weight: f64,
    options: &[Vec<(usize, f64)>],
    miss_weight: f64,
    no_clutter: bool,
    choice: &mut Vec<Option<usize>>,
    used: &mut Vec<bool>,
    visit: &mut dyn FnMut(f64, &[Option<usize>]),
) {
    if depth == options.len() {
        if no_clutter && used.iter().any(|u| !u) {
            return;
        }
        visit(weight, choice);
        return;
    }
    if miss_weight > 0.0 {
        choice[depth] = None;
        enumerate_events(
            depth + 1,
            weight * miss_weight,
            options,
            miss_weight,
            no_clutter,
            choice,
            used,
            visit,
        );
    }
    for &(slot, w) in &options[depth] {
        if used[slot] {
            continue;
        }
        used[slot] = true;
        choice[depth] = Some(slot);
        enumerate_events(
            depth + 1,
            weight * w,
            options,
            miss_weight,
            no_clutter,
            choice,
            used,
            visit,
        );
        used[slot] = false;
    }
    choice[depth] = None;
}

/// Greedy MAP assignment on the marginals: the largest remaining `beta`
/// wins, ties broken by lower track index then lower measurement index.
pub fn hard_assign(marginals: &Marginals, n_meas: usize) -> Vec<Option<usize>> {
    let n_tracks = marginals.beta.len();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (t, row) in marginals.beta.iter().enumerate() {
        for (j, &b) in row.iter().enumerate() {
            if b > 0.0 {
                pairs.push((b, t, j));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut out = vec![None; n_tracks];
    let mut taken = vec![false; n_meas];
    for (_, t, j) in pairs {
        if out[t].is_none() && !taken[j] {
            out[t] = Some(j);
            taken[j] = true;
        }
    }
    out
}

pub fn nnjpda_associate(
    tracks: &[KalmanTrack],
    measurements: &[GroundMeasurement],
    params: &AssociationParams,
) -> Result<Association, TrackingError> {
    let table = gate_pairs(tracks, measurements, params)?;
    let marginals = marginals_from_table(&table, measurements.len(), params)?;
    let mut assignments = hard_assign(&marginals, measurements.len());
    let limit = params.unassign_distance * params.unassign_distance;
    for (t, a) in assignments.iter_mut().enumerate() {
        if let Some(j) = *a {
            let d2 = table[t][j].as_ref().map_or(f64::INFINITY, |p| p.distance2);
            if d2 > limit {
                *a = None;
            }
        }
    }
    let mut taken = vec![false; measurements.len()];
    for j in assignments.iter().flatten() {
        taken[*j] = true;
    }
    let leftovers = (0..measurements.len()).filter(|j| !taken[*j]).collect();
    Ok(Association {
        assignments,
        leftovers,
        marginals,
    })
}
