//! Fixation graphs: one node per fixation, directed temporal edges between
//! consecutive fixations, bidirectional spatial edges between nearby ones.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::{EventKind, GazeEvent};
use crate::trial::SaLabel;

pub const NODE_FEATURES: usize = 7;
pub const EDGE_FEATURES: usize = 3;
pub const GRAPH_FORMAT_VERSION: u32 = 1;

/// Floating-point slack on the on-mannequin extent test.
const EXTENT_SLACK: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("cannot build a graph without fixations")]
    EmptyFixationList,
    #[error("event {0} is a {1}, not a fixation")]
    NotAFixation(usize, EventKind),
    #[error("fixations are not sorted by onset at index {0}")]
    Unsorted(usize),
    #[error("invalid graph config: {0}")]
    InvalidConfig(String),
    #[error("malformed graph: {0}")]
    Malformed(String),
}

/// Which node's virtual-content flag the third edge feature carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EndpointFlag {
    Destination,
    Source,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphConfig {
    /// Meters; 2-D distance under which non-consecutive fixations connect.
    pub spatial_threshold: f64,
    /// Meters; edge weight decay length.
    pub sigma: f64,
    /// Height of the mannequin plane (z) in the marker frame, meters.
    pub plane_height: f64,
    /// Half-width of the on-mannequin square around the marker, meters.
    pub mannequin_extent: f64,
    pub virtual_offboard_point: [f64; 2],
    pub other_offboard_point: [f64; 2],
    pub endpoint_flag: EndpointFlag,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            spatial_threshold: 0.065,
            sigma: 2.0,
            plane_height: 0.0,
            mannequin_extent: 1.0,
            virtual_offboard_point: [0.0, 2.0],
            other_offboard_point: [2.0, 2.0],
            endpoint_flag: EndpointFlag::Destination,
        }
    }
}

impl GraphConfig {
    pub fn validate(&self) -> Result<(), GraphError> {
        if !(self.spatial_threshold > 0.0) {
            return Err(GraphError::InvalidConfig("spatial_threshold must be positive".into()));
        }
        if !(self.sigma > 0.0) {
            return Err(GraphError::InvalidConfig("sigma must be positive".into()));
        }
        if !(self.mannequin_extent > 0.0) {
            return Err(GraphError::InvalidConfig("mannequin_extent must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub src: usize,
    pub dst: usize,
    /// [onset difference s, 2-D distance m, endpoint on virtual 0/1].
    pub features: [f64; EDGE_FEATURES],
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    /// [azimuth rad, elevation rad, eye x/y/z m, duration s, on virtual 0/1].
    pub features: [f64; NODE_FEATURES],
    /// Fixation onset, seconds. Defines the canonical node order.
    pub onset: f64,
    /// Projection on the mannequin plane, meters.
    pub point: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixationGraph {
    #[serde(default = "format_version")]
    pub version: u32,
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
    pub label: SaLabel,
}

fn format_version() -> u32 {
    GRAPH_FORMAT_VERSION
}

/// `exp(-d / sigma)`.
pub fn edge_weight(distance: f64, sigma: f64) -> f64 {
    (-distance / sigma).exp()
}

/// Project a fixation onto the mannequin plane. Fixations whose gaze ray
/// misses the on-mannequin square map to the fixed off-board points.
pub fn project_fixation(fix: &GazeEvent, cfg: &GraphConfig) -> Result<[f64; 2], GraphError> {
    if fix.kind != EventKind::Fixation {
        return Err(GraphError::NotAFixation(0, fix.kind));
    }
    let offboard = if fix.on_virtual == Some(true) { cfg.virtual_offboard_point } else { cfg.other_offboard_point };
    let Some(dir) = fix.centroid_vector() else {
        return Ok(offboard);
    };
    let origin = fix.mean_eye_center;
    if dir.z.abs() < 1e-12 {
        return Ok(offboard);
    }
    let t = (cfg.plane_height - origin.z) / dir.z;
    if !(t > 0.0) {
        return Ok(offboard);
    }
    let hit = origin + dir * t;
    let limit = cfg.mannequin_extent + EXTENT_SLACK;
    if hit.x.abs() <= limit && hit.y.abs() <= limit {
        Ok([hit.x, hit.y])
    } else {
        Ok(offboard)
    }
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Build the graph of a window's fixations (time-sorted).
pub fn build_graph(fixations: &[GazeEvent], label: SaLabel, cfg: &GraphConfig) -> Result<FixationGraph, GraphError> {
    cfg.validate()?;
    if fixations.is_empty() {
        return Err(GraphError::EmptyFixationList);
    }
    let mut nodes = Vec::with_capacity(fixations.len());
    for (i, f) in fixations.iter().enumerate() {
        if f.kind != EventKind::Fixation {
            return Err(GraphError::NotAFixation(i, f.kind));
        }
        if i > 0 && f.t_start < fixations[i - 1].t_start {
            return Err(GraphError::Unsorted(i));
        }
        let (az, el) = f.centroid_dir.unwrap_or((0.0, 0.0));
        let c = f.mean_eye_center;
        let on_virtual = f.on_virtual == Some(true);
        nodes.push(GraphNode {
            features: [az, el, c.x, c.y, c.z, f.duration, on_virtual as u8 as f64],
            onset: f.t_start,
            point: project_fixation(f, cfg)?,
        });
    }

    let n = nodes.len();
    let mut pairs: Vec<(usize, usize)> = (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect();
    for i in 0..n {
        for j in i + 2..n {
            if distance(nodes[i].point, nodes[j].point) < cfg.spatial_threshold {
                pairs.push((i, j));
                pairs.push((j, i));
            }
        }
    }
    pairs.sort_unstable();

    let edges = pairs
        .into_iter()
        .map(|(src, dst)| {
            let d = distance(nodes[src].point, nodes[dst].point);
            let flag_node = match cfg.endpoint_flag {
                EndpointFlag::Destination => dst,
                EndpointFlag::Source => src,
            };
            GraphEdge {
                src,
                dst,
                features: [nodes[dst].onset - nodes[src].onset, d, nodes[flag_node].features[6]],
                weight: edge_weight(d, cfg.sigma),
            }
        })
        .collect();

    Ok(FixationGraph { version: GRAPH_FORMAT_VERSION, nodes, edges, label })
}

impl FixationGraph {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Check structural invariants.
    pub fn validate(&self) -> Result<(), GraphError> {
        if self.nodes.is_empty() {
            return Err(GraphError::Malformed("graph has no nodes".into()));
        }
        let n = self.nodes.len();
        let mut seen = std::collections::HashSet::new();
        for e in &self.edges {
            if e.src >= n || e.dst >= n {
                return Err(GraphError::Malformed(format!("edge {}->{} out of range", e.src, e.dst)));
            }
            if e.src == e.dst {
                return Err(GraphError::Malformed(format!("self-loop on node {}", e.src)));
            }
            if !seen.insert((e.src, e.dst)) {
                return Err(GraphError::Malformed(format!("duplicate edge {}->{}", e.src, e.dst)));
            }
            if !(e.weight > 0.0 && e.weight <= 1.0) {
                return Err(GraphError::Malformed(format!("edge weight {} outside (0, 1]", e.weight)));
            }
        }
        let all_finite = self.nodes.iter().all(|v| v.features.iter().all(|x| x.is_finite()))
            && self.edges.iter().all(|e| e.features.iter().all(|x| x.is_finite()));
        if !all_finite {
            return Err(GraphError::Malformed("non-finite feature".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graph serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        let g: FixationGraph = serde_json::from_str(text).map_err(|e| GraphError::Malformed(e.to_string()))?;
        if g.version != GRAPH_FORMAT_VERSION {
            return Err(GraphError::Malformed(format!("unsupported version {}", g.version)));
        }
        g.validate()?;
        Ok(g)
    }

    /// Relabel nodes: node `i` of `self` becomes node `perm[i]`.
    /// Edges are listed in the permuted order of their original positions.
    pub fn relabel(&self, perm: &[usize]) -> FixationGraph {
        assert_eq!(perm.len(), self.nodes.len(), "permutation length");
        let mut nodes = self.nodes.clone();
        for (i, node) in self.nodes.iter().enumerate() {
            nodes[perm[i]] = node.clone();
        }
        let edges = self.edges.iter().map(|e| GraphEdge { src: perm[e.src], dst: perm[e.dst], ..e.clone() }).collect();
        FixationGraph { version: self.version, nodes, edges, label: self.label }
    }

    /// Canonical form: nodes ordered by onset (then features, then current
    /// index), edges ordered by (src, dst).
    pub fn canonicalize(&self) -> FixationGraph {
        let mut order: Vec<usize> = (0..self.nodes.len()).collect();
        order.sort_by(|&a, &b| {
            let (na, nb) = (&self.nodes[a], &self.nodes[b]);
            na.onset
                .total_cmp(&nb.onset)
                .then_with(|| {
                    na.features
                        .iter()
                        .zip(&nb.features)
                        .map(|(x, y)| x.total_cmp(y))
                        .find(|o| *o != Ordering::Equal)
                        .unwrap_or(Ordering::Equal)
                })
                .then(a.cmp(&b))
        });
        let mut perm = vec![0; order.len()];
        for (new, &old) in order.iter().enumerate() {
            perm[old] = new;
        }
        let mut g = self.relabel(&perm);
        g.edges.sort_by_key(|e| (e.src, e.dst));
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::direction_to_spherical;
    use nalgebra::Vector3;

    fn fixation(t: f64, eye: Vector3<f64>, dir: Vector3<f64>, on_virtual: bool) -> GazeEvent {
        GazeEvent {
            kind: EventKind::Fixation,
            t_start: t,
            t_end: t + 0.3,
            duration: 0.3,
            first_sample: 0,
            last_sample: 0,
            mean_eye_center: eye,
            centroid_dir: Some(direction_to_spherical(&dir)),
            on_virtual: Some(on_virtual),
            amplitude: None,
            mean_velocity: None,
            peak_velocity: None,
            path_length: None,
        }
    }

    /// Fixation whose gaze ray from (0,0,1) hits the floor plane at (x, y).
    fn at(t: f64, x: f64, y: f64) -> GazeEvent {
        let eye = Vector3::new(0.0, 0.0, 1.0);
        fixation(t, eye, Vector3::new(x, y, 0.0) - eye, false)
    }

    fn cfg() -> GraphConfig {
        GraphConfig::default()
    }

    #[test]
    fn vertical_ray_hits_origin() {
        let f = fixation(0.0, Vector3::new(0.0, 0.0, 1.0), -Vector3::z(), false);
        let p = project_fixation(&f, &cfg()).unwrap();
        assert!(p[0].abs() < 1e-12 && p[1].abs() < 1e-12);
    }

    #[test]
    fn diagonal_ray_hits_extent_boundary() {
        let f = fixation(0.0, Vector3::new(0.0, 0.0, 1.0), Vector3::new(1.0, 0.0, -1.0).normalize(), false);
        let p = project_fixation(&f, &cfg()).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-12 && p[1].abs() < 1e-12);
    }

    #[test]
    fn upward_rays_go_offboard() {
        let eye = Vector3::new(0.0, 0.0, 1.0);
        let up = Vector3::new(0.0, 0.3, 1.0).normalize();
        assert_eq!(project_fixation(&fixation(0.0, eye, up, true), &cfg()).unwrap(), [0.0, 2.0]);
        assert_eq!(project_fixation(&fixation(0.0, eye, up, false), &cfg()).unwrap(), [2.0, 2.0]);
        let flat = Vector3::new(1.0, 0.0, 0.0);
        assert_eq!(project_fixation(&fixation(0.0, eye, flat, false), &cfg()).unwrap(), [2.0, 2.0]);
        // hits the plane, but far outside the mannequin
        let far = Vector3::new(5.0, 0.0, -1.0).normalize();
        assert_eq!(project_fixation(&fixation(0.0, eye, far, true), &cfg()).unwrap(), [0.0, 2.0]);
    }

    #[test]
    fn weights_closed_form() {
        assert_eq!(edge_weight(0.0, 2.0), 1.0);
        assert!((edge_weight(2.0, 2.0) - 0.36787944).abs() < 1e-8);
        assert!((edge_weight(0.065, 2.0) - (-0.0325f64).exp()).abs() < 1e-15);
        assert!((edge_weight(0.065, 2.0) - 0.96802245).abs() < 1e-8);
    }

    #[test]
    fn single_fixation_graph() {
        let g = build_graph(&[at(0.0, 0.1, 0.1)], SaLabel::Good, &cfg()).unwrap();
        assert_eq!((g.num_nodes(), g.num_edges()), (1, 0));
        g.validate().unwrap();
    }

    #[test]
    fn coincident_fixations_get_spatial_pair() {
        let fixes: Vec<_> = (0..3).map(|i| at(i as f64, 0.2, -0.1)).collect();
        let g = build_graph(&fixes, SaLabel::Poor, &cfg()).unwrap();
        let pairs: Vec<_> = g.edges.iter().map(|e| (e.src, e.dst)).collect();
        assert_eq!(pairs, [(0, 1), (0, 2), (1, 2), (2, 0)]);
        assert!(g.edges.iter().all(|e| (e.weight - 1.0).abs() < 1e-12));
        let back = g.edges.iter().find(|e| (e.src, e.dst) == (2, 0)).unwrap();
        assert_eq!(back.features[0], -2.0);
    }

    #[test]
    fn distant_consecutive_pair_is_temporal_only() {
        let g = build_graph(&[at(0.0, 0.0, 0.0), at(1.0, 0.1, 0.0)], SaLabel::Good, &cfg()).unwrap();
        assert_eq!(g.num_edges(), 1);
        let e = &g.edges[0];
        assert_eq!((e.src, e.dst), (0, 1));
        assert!((e.features[1] - 0.1).abs() < 1e-9);
        assert!((e.weight - (-0.05f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn endpoint_flag_follows_config() {
        let eye = Vector3::new(0.0, 0.0, 1.0);
        let fixes = [fixation(0.0, eye, -Vector3::z(), false), fixation(1.0, eye, -Vector3::z(), true)];
        let g = build_graph(&fixes, SaLabel::Good, &cfg()).unwrap();
        assert_eq!(g.edges[0].features[2], 1.0);
        let src = GraphConfig { endpoint_flag: EndpointFlag::Source, ..cfg() };
        let g = build_graph(&fixes, SaLabel::Good, &src).unwrap();
        assert_eq!(g.edges[0].features[2], 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(build_graph(&[], SaLabel::Good, &cfg()), Err(GraphError::EmptyFixationList));
        let mut s = at(0.0, 0.0, 0.0);
        s.kind = EventKind::Saccade;
        assert!(matches!(build_graph(&[s], SaLabel::Good, &cfg()), Err(GraphError::NotAFixation(0, _))));
    }

    #[test]
    fn json_round_trip_and_validation() {
        let fixes: Vec<_> = (0..4).map(|i| at(i as f64, 0.01 * i as f64, 0.0)).collect();
        let g = build_graph(&fixes, SaLabel::Poor, &cfg()).unwrap();
        let back = FixationGraph::from_json(&g.to_json()).unwrap();
        assert_eq!(back, g);
        let mut bad = g.clone();
        bad.edges.push(bad.edges[0].clone());
        assert!(FixationGraph::from_json(&bad.to_json()).is_err());
    }

    #[test]
    fn canonical_form_undoes_relabeling() {
        let fixes: Vec<_> = (0..5).map(|i| at(i as f64, 0.02 * (i % 2) as f64, 0.0)).collect();
        let g = build_graph(&fixes, SaLabel::Good, &cfg()).unwrap();
        let shuffled = g.relabel(&[3, 0, 4, 1, 2]);
        assert_ne!(shuffled, g);
        assert_eq!(shuffled.canonicalize(), g);
    }
}
