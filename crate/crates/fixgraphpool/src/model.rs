use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use sagaze_core::graph::{EDGE_FEATURES, NODE_FEATURES};
use sagaze_core::{FixationGraph, SaLabel};
use sagaze_nn::layers::{gcn_layer, grouped_softmax_var, groups_by_key, Activation, GcnEdge, Linear};
use sagaze_nn::{ParamStore, Tape, Tensor, Var};

use crate::config::ModelConfig;
use crate::pool::plan_contraction;
use crate::scaler::GraphScaler;
use crate::FgpError;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy)]
pub struct LayerParams {
    pub gcn: Linear,
    pub scorer: Linear,
}

/// Handles of every learnable tensor in the store.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub node_proj: Linear,
    pub edge_proj: Linear,
    pub layers: Vec<LayerParams>,
    pub mlp_hidden: Linear,
    pub mlp_out: Linear,
}

impl ModelParams {
    fn init(cfg: &ModelConfig, store: &mut ParamStore, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = cfg.hidden_dim;
        let node_proj = Linear::new(store, "node_proj", NODE_FEATURES, h, &mut rng);
        let edge_proj = Linear::new(store, "edge_proj", EDGE_FEATURES, h, &mut rng);
        let layers = (0..cfg.num_layers)
            .map(|l| LayerParams {
                gcn: Linear::new(store, &format!("layer{l}.gcn"), h, h, &mut rng),
                scorer: Linear::new(store, &format!("layer{l}.score"), 3 * h, 1, &mut rng),
            })
            .collect();
        let mlp_hidden = Linear::new(store, "mlp.hidden", cfg.num_layers * h, cfg.mlp_hidden, &mut rng);
        let mlp_out = Linear::new(store, "mlp.out", cfg.mlp_hidden, cfg.classes, &mut rng);
        Self { node_proj, edge_proj, layers, mlp_hidden, mlp_out }
    }
}

/// A canonicalized, standardized graph ready for the forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedGraph {
    pub nodes: Tensor,
    pub edge_features: Tensor,
    pub edges: Vec<(usize, usize)>,
    pub weights: Vec<f64>,
    pub label: SaLabel,
}

/// Per-layer record of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTrace {
    pub nodes_in: usize,
    pub edges_in: Vec<(usize, usize)>,
    pub scores: Vec<f64>,
    pub contracted: Vec<usize>,
    pub merge_map: Vec<usize>,
    pub nodes_out: usize,
    /// Node features after message passing, before pooling.
    pub hidden: Tensor,
    pub readout: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Bound {
    w: Var,
    b: Var,
}

fn bind(tape: &mut Tape, store: &ParamStore, lin: &Linear) -> Bound {
    Bound { w: tape.param(store, lin.weight), b: tape.param(store, lin.bias) }
}

fn affine(tape: &mut Tape, x: Var, p: &Bound) -> Var {
    let y = tape.matmul(x, p.w);
    tape.add_row(y, p.b)
}

struct BoundModel {
    node_proj: Bound,
    edge_proj: Bound,
    layers: Vec<(Bound, Bound)>,
    mlp_hidden: Bound,
    mlp_out: Bound,
}

#[derive(Debug, Clone)]
pub struct FixGraphPool {
    pub config: ModelConfig,
    pub params: ModelParams,
    pub store: ParamStore,
    pub scaler: GraphScaler,
}

#[derive(Serialize, Deserialize)]
struct ModelCheckpoint {
    version: u32,
    config: ModelConfig,
    scaler: GraphScaler,
    params: serde_json::Value,
}

impl FixGraphPool {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, FgpError> {
        config.validate()?;
        let mut store = ParamStore::new();
        let params = ModelParams::init(&config, &mut store, seed);
        Ok(Self { config, params, store, scaler: GraphScaler::default() })
    }

    pub fn prepare(&self, graph: &FixationGraph) -> Result<PreparedGraph, FgpError> {
        if graph.nodes.is_empty() {
            return Err(FgpError::EmptyGraph);
        }
        let g = graph.canonicalize();
        let rows: Vec<[f64; NODE_FEATURES]> = g.nodes.iter().map(|n| self.scaler.node(&n.features)).collect();
        let erows: Vec<[f64; EDGE_FEATURES]> = g.edges.iter().map(|e| self.scaler.edge(&e.features)).collect();
        Ok(PreparedGraph {
            nodes: Tensor::from_rows(&rows, NODE_FEATURES)?,
            edge_features: Tensor::from_rows(&erows, EDGE_FEATURES)?,
            edges: g.edges.iter().map(|e| (e.src, e.dst)).collect(),
            weights: g.edges.iter().map(|e| e.weight).collect(),
            label: g.label,
        })
    }

    fn bind(&self, tape: &mut Tape, store: &ParamStore) -> BoundModel {
        let p = &self.params;
        BoundModel {
            node_proj: bind(tape, store, &p.node_proj),
            edge_proj: bind(tape, store, &p.edge_proj),
            layers: p.layers.iter().map(|l| (bind(tape, store, &l.gcn), bind(tape, store, &l.scorer))).collect(),
            mlp_hidden: bind(tape, store, &p.mlp_hidden),
            mlp_out: bind(tape, store, &p.mlp_out),
        }
    }

    /// Fused graph representation (1 x num_layers*hidden) and layer traces.
    fn represent(
        &self,
        tape: &mut Tape,
        m: &BoundModel,
        g: &PreparedGraph,
    ) -> Result<(Var, Vec<LayerTrace>), FgpError> {
        if g.nodes.rows() == 0 {
            return Err(FgpError::EmptyGraph);
        }
        let x = tape.constant(g.nodes.clone());
        let mut h = affine(tape, x, &m.node_proj);
        let mut he = if g.edges.is_empty() {
            None
        } else {
            let ex = tape.constant(g.edge_features.clone());
            Some(affine(tape, ex, &m.edge_proj))
        };
        let mut edges = g.edges.clone();
        let mut weights = g.weights.clone();
        let mut readouts = Vec::with_capacity(m.layers.len());
        let mut traces = Vec::with_capacity(m.layers.len());

        for (gcn, scorer) in &m.layers {
            let n = tape.value(h).rows();
            let gcn_edges: Vec<GcnEdge> =
                edges.iter().zip(&weights).map(|(&(src, dst), &weight)| GcnEdge { src, dst, weight }).collect();
            h = gcn_layer(tape, h, &gcn_edges, gcn.w, gcn.b, Activation::Relu)?;
            let hidden = tape.value(h).clone();
            let mut trace = LayerTrace {
                nodes_in: n,
                edges_in: edges.clone(),
                scores: Vec::new(),
                contracted: Vec::new(),
                merge_map: (0..n).collect(),
                nodes_out: n,
                hidden,
                readout: Vec::new(),
            };

            if let Some(he_var) = he {
                let srcs: Vec<usize> = edges.iter().map(|e| e.0).collect();
                let dsts: Vec<usize> = edges.iter().map(|e| e.1).collect();
                let hs = tape.gather_rows(h, &srcs);
                let hd = tape.gather_rows(h, &dsts);
                let cat = tape.concat_cols(&[hs, he_var, hd]);
                let raw = affine(tape, cat, scorer);
                let soft = grouped_softmax_var(tape, raw, groups_by_key(&srcs))?;
                let s = tape.add_scalar(soft, self.config.score_constant);
                let scores = tape.value(s).data().to_vec();
                let plan = plan_contraction(n, &edges, &weights, &scores);

                let one = tape.constant(Tensor::scalar(1.0));
                let s_aug = tape.concat_rows(&[s, one]);
                let scale_idx: Vec<usize> = plan.node_scale.iter().map(|k| k.unwrap_or(edges.len())).collect();
                let k = tape.gather_rows(s_aug, &scale_idx);
                let mut parts = vec![tape.scale_rows(h, k)];
                let mut targets = plan.merge_map.clone();
                if !plan.edge_terms.is_empty() {
                    let sel: Vec<usize> = plan.edge_terms.iter().map(|t| t.0).collect();
                    let hsel = tape.gather_rows(he_var, &sel);
                    let ssel = tape.gather_rows(s, &sel);
                    parts.push(tape.scale_rows(hsel, ssel));
                    targets.extend(plan.edge_terms.iter().map(|t| t.1));
                }
                let stacked = tape.concat_rows(&parts);
                h = tape.scatter_rows(stacked, &targets, plan.num_nodes);

                he = if plan.edges.is_empty() {
                    None
                } else {
                    let flat: Vec<usize> = plan.edge_members.iter().flatten().copied().collect();
                    let gid: Vec<usize> = plan
                        .edge_members
                        .iter()
                        .enumerate()
                        .flat_map(|(i, ks)| std::iter::repeat_n(i, ks.len()))
                        .collect();
                    let picked = tape.gather_rows(he_var, &flat);
                    Some(tape.scatter_rows(picked, &gid, plan.edges.len()))
                };
                edges = plan.edges.iter().map(|e| (e.src, e.dst)).collect();
                weights = plan.edges.iter().map(|e| e.weight).collect();
                trace.scores = scores;
                trace.contracted = plan.contracted;
                trace.merge_map = plan.merge_map;
                trace.nodes_out = plan.num_nodes;
            }

            let r = tape.mean_rows(h);
            trace.readout = tape.value(r).data().to_vec();
            readouts.push(r);
            traces.push(trace);
        }
        Ok((tape.concat_cols(&readouts), traces))
    }

    /// Record logits (B x 2) of a batch using parameter values from `store`.
    pub fn logits_on(&self, tape: &mut Tape, store: &ParamStore, graphs: &[&PreparedGraph]) -> Result<Var, FgpError> {
        if graphs.is_empty() {
            return Err(FgpError::EmptyFold);
        }
        let m = self.bind(tape, store);
        let mut reps = Vec::with_capacity(graphs.len());
        for g in graphs {
            reps.push(self.represent(tape, &m, g)?.0);
        }
        let z = tape.concat_rows(&reps);
        let hid = affine(tape, z, &m.mlp_hidden);
        let hid = tape.relu(hid);
        Ok(affine(tape, hid, &m.mlp_out))
    }

    /// Mean softmax cross-entropy of a batch.
    pub fn loss_on(&self, tape: &mut Tape, store: &ParamStore, graphs: &[&PreparedGraph]) -> Result<Var, FgpError> {
        let logits = self.logits_on(tape, store, graphs)?;
        let targets: Vec<usize> = graphs.iter().map(|g| g.label.class_index()).collect();
        Ok(tape.softmax_cross_entropy(logits, &targets))
    }

    pub fn logits(&self, graph: &FixationGraph) -> Result<[f64; 2], FgpError> {
        let g = self.prepare(graph)?;
        let mut tape = Tape::new();
        let l = self.logits_on(&mut tape, &self.store, &[&g])?;
        let v = tape.value(l).data();
        Ok([v[0], v[1]])
    }

    pub fn predict(&self, graph: &FixationGraph) -> Result<SaLabel, FgpError> {
        let [good, poor] = self.logits(graph)?;
        Ok(if poor > good { SaLabel::Poor } else { SaLabel::Good })
    }

    /// Forward pass of one graph with per-layer pooling details.
    pub fn trace(&self, graph: &FixationGraph) -> Result<Vec<LayerTrace>, FgpError> {
        let g = self.prepare(graph)?;
        let mut tape = Tape::new();
        let m = self.bind(&mut tape, &self.store);
        Ok(self.represent(&mut tape, &m, &g)?.1)
    }

    pub fn to_checkpoint(&self) -> String {
        let ck = ModelCheckpoint {
            version: MODEL_FORMAT_VERSION,
            config: self.config.clone(),
            scaler: self.scaler.clone(),
            params: serde_json::from_str(&self.store.to_json()).expect("valid json"),
        };
        serde_json::to_string(&ck).expect("checkpoint serializes")
    }

    pub fn from_checkpoint(text: &str) -> Result<Self, FgpError> {
        let ck: ModelCheckpoint = serde_json::from_str(text).map_err(|e| FgpError::Checkpoint(e.to_string()))?;
        if ck.version != MODEL_FORMAT_VERSION {
            return Err(FgpError::Checkpoint(format!("unsupported model version {}", ck.version)));
        }
        let mut model = FixGraphPool::new(ck.config, 0)?;
        let stored = ParamStore::from_json(&ck.params.to_string())?;
        model.store.load_values(&stored)?;
        model.scaler = ck.scaler;
        Ok(model)
    }
}
