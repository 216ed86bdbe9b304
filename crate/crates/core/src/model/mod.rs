//! The forecasting model.
//!
//! A learned adjacency over sensor nodes (softmax of a rectified product of
//! two node-embedding matrices) couples the graph; recurrent cells aggregate
//! their pre-gate input over that adjacency next to an identity branch; and
//! one of two topologies connects five such cells:
//!
//! * chain: cells a..e in sequence, each consuming the previous hidden
//!   sequence, head reading the last cell's stack;
//! * structured: cells a and b read the embedded input in parallel, a gated
//!   fusion of their final states initializes cells c, d, e, and the head
//!   reads all three stacks.
//!
//! Four [`Variant`]s toggle the input embedding and the topology
//! independently, which is what the ablation sweep compares.

mod checkpoint;
mod forward;
mod gradcheck;

pub use checkpoint::{Checkpoint, ParamTensor, CHECKPOINT_FORMAT_VERSION};
pub use forward::{
    adaptive_adjacency, conn_branch, embed_step, gcn_gru_step, mount, MountedBranch, MountedCell,
    MountedModel,
};
pub use gradcheck::{check_model_gradients, relative_error, GroupReport, DEFAULT_CHECK_EPSILON};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{seeded_stream, STREAM_INIT};
use crate::tensor::Tensor;

/// Model shape configuration, fixed per dataset and checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    /// Historical steps per input window.
    pub input_steps: usize,
    /// Forecast steps per target window.
    pub output_steps: usize,
    /// Sensor nodes in the graph.
    pub num_nodes: usize,
    /// Channels per node in the input.
    pub input_channels: usize,
    /// Channels per node in the forecast.
    pub output_channels: usize,
    /// Width of the two node embeddings whose product forms the adjacency.
    pub adjacency_dim: usize,
    /// Per-step feature width after the input projection.
    pub embed_dim: usize,
    /// Hidden width of every recurrent cell.
    pub hidden_dim: usize,
}

impl ModelDims {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("input_steps", self.input_steps),
            ("output_steps", self.output_steps),
            ("num_nodes", self.num_nodes),
            ("input_channels", self.input_channels),
            ("output_channels", self.output_channels),
            ("adjacency_dim", self.adjacency_dim),
            ("embed_dim", self.embed_dim),
            ("hidden_dim", self.hidden_dim),
        ];
        for (name, value) in fields {
            if value == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }
}

/// Wiring variant. The embedding axis controls whether learned per-node and
/// per-step vectors are added to the projected input; the structure axis
/// controls chain versus fused topology.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    /// Chained cells, projection-only input.
    #[serde(rename = "simple")]
    Simple,
    /// Chained cells with the full input embedding.
    #[serde(rename = "w_st_emb")]
    EmbeddingOnly,
    /// Fused topology, projection-only input.
    #[serde(rename = "w_struct")]
    StructureOnly,
    /// Fused topology with the full input embedding.
    #[serde(rename = "sgru")]
    Sgru,
}

pub const CELL_NAMES: [&str; 5] = ["a", "b", "c", "d", "e"];
pub const CONN_BRANCH_NAMES: [&str; 3] = ["c", "d", "e"];

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Simple,
        Variant::EmbeddingOnly,
        Variant::StructureOnly,
        Variant::Sgru,
    ];

    pub fn uses_embedding(self) -> bool {
        matches!(self, Variant::EmbeddingOnly | Variant::Sgru)
    }

    pub fn uses_structure(self) -> bool {
        matches!(self, Variant::StructureOnly | Variant::Sgru)
    }

    pub fn label(self) -> &'static str {
        match self {
            Variant::Simple => "simple",
            Variant::EmbeddingOnly => "w_st_emb",
            Variant::StructureOnly => "w_struct",
            Variant::Sgru => "sgru",
        }
    }

    pub fn from_label(label: &str) -> Result<Self> {
        match label {
            "simple" => Ok(Variant::Simple),
            "w_st_emb" => Ok(Variant::EmbeddingOnly),
            "w_struct" => Ok(Variant::StructureOnly),
            "sgru" => Ok(Variant::Sgru),
            other => Err(Error::Config(format!(
                "unknown variant '{other}' (expected simple, w_st_emb, w_struct, or sgru)"
            ))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Two trainable node-embedding matrices whose rectified product, row
/// softmaxed, is the adjacency.
#[derive(Debug, Clone)]
pub struct AdjacencyParams {
    pub source_embed: Tensor,
    pub target_embed: Tensor,
}

/// Input projection plus optional additive per-node and per-step vectors.
#[derive(Debug, Clone)]
pub struct EmbeddingParams {
    pub channel_weight: Tensor,
    pub channel_bias: Tensor,
    /// Per-node additive vector, present only in embedding variants.
    pub node_embed: Option<Tensor>,
    /// Per-step additive vectors, stored as embed_dim rows by input_steps
    /// columns; present only in embedding variants.
    pub step_embed: Option<Tensor>,
}

/// One recurrent cell. The graph branch aggregates over the adjacency, the
/// skip branch passes the same projection through unchanged, and the merged
/// pair drives the update and reset gates.
#[derive(Debug, Clone)]
pub struct CellParams {
    /// Width of the per-step input this cell consumes.
    pub input_width: usize,
    pub graph_weight: Tensor,
    pub graph_bias: Tensor,
    pub skip_weight: Tensor,
    pub skip_bias: Tensor,
    pub merge_weight: Tensor,
    /// Per-node bias, num_nodes by hidden_dim.
    pub merge_bias: Tensor,
    pub update_weight: Tensor,
    pub update_bias: Tensor,
    pub reset_weight: Tensor,
    pub reset_bias: Tensor,
    pub candidate_weight: Tensor,
    pub candidate_bias: Tensor,
}

/// One gated fusion branch: sigmoid gate from the first input, linear value
/// from the second, multiplied.
#[derive(Debug, Clone)]
pub struct ConnBranch {
    pub gate_weight: Tensor,
    pub gate_bias: Tensor,
    pub value_weight: Tensor,
    pub value_bias: Tensor,
}

/// The three fusion branches that initialize cells c, d, e.
#[derive(Debug, Clone)]
pub struct ConnParams {
    pub branches: [ConnBranch; 3],
}

/// Per-node readout over the flattened hidden stacks.
#[derive(Debug, Clone)]
pub struct HeadParams {
    pub weight: Tensor,
    pub bias: Tensor,
}

/// Complete parameter set for one model instance.
#[derive(Debug, Clone)]
pub struct SgruParams {
    pub variant: Variant,
    pub dims: ModelDims,
    pub adjacency: AdjacencyParams,
    pub embedding: EmbeddingParams,
    pub cells: [CellParams; 5],
    /// Present only for structured variants.
    pub conn: Option<ConnParams>,
    pub head: HeadParams,
}

fn xavier_uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data: Vec<f64> = (0..rows * cols)
        .map(|_| rng.random_range(-bound..=bound))
        .collect();
    Tensor::trainable(vec![rows, cols], data).expect("positive dims")
}

fn uniform_embed(rng: &mut ChaCha8Rng, shape: Vec<usize>, bound: f64) -> Tensor {
    let numel: usize = shape.iter().product();
    let data: Vec<f64> = (0..numel).map(|_| rng.random_range(-bound..=bound)).collect();
    Tensor::trainable(shape, data).expect("positive dims")
}

fn zero_param(shape: Vec<usize>) -> Tensor {
    let numel: usize = shape.iter().product();
    Tensor::trainable(shape, vec![0.0; numel]).expect("positive dims")
}

impl CellParams {
    fn init(rng: &mut ChaCha8Rng, input_width: usize, nodes: usize, hidden: usize) -> Self {
        CellParams {
            input_width,
            graph_weight: xavier_uniform(rng, input_width, hidden),
            graph_bias: zero_param(vec![hidden]),
            skip_weight: xavier_uniform(rng, input_width, hidden),
            skip_bias: zero_param(vec![hidden]),
            merge_weight: xavier_uniform(rng, 4 * hidden, hidden),
            merge_bias: zero_param(vec![nodes, hidden]),
            update_weight: xavier_uniform(rng, hidden, hidden),
            update_bias: zero_param(vec![hidden]),
            reset_weight: xavier_uniform(rng, hidden, hidden),
            reset_bias: zero_param(vec![hidden]),
            candidate_weight: xavier_uniform(rng, input_width + hidden, hidden),
            candidate_bias: zero_param(vec![hidden]),
        }
    }

    fn visit<'a>(&'a self, prefix: &str, f: &mut impl FnMut(String, &'a Tensor)) {
        f(format!("{prefix}.graph_weight"), &self.graph_weight);
        f(format!("{prefix}.graph_bias"), &self.graph_bias);
        f(format!("{prefix}.skip_weight"), &self.skip_weight);
        f(format!("{prefix}.skip_bias"), &self.skip_bias);
        f(format!("{prefix}.merge_weight"), &self.merge_weight);
        f(format!("{prefix}.merge_bias"), &self.merge_bias);
        f(format!("{prefix}.update_weight"), &self.update_weight);
        f(format!("{prefix}.update_bias"), &self.update_bias);
        f(format!("{prefix}.reset_weight"), &self.reset_weight);
        f(format!("{prefix}.reset_bias"), &self.reset_bias);
        f(format!("{prefix}.candidate_weight"), &self.candidate_weight);
        f(format!("{prefix}.candidate_bias"), &self.candidate_bias);
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, f: &mut impl FnMut(String, &'a mut Tensor)) {
        f(format!("{prefix}.graph_weight"), &mut self.graph_weight);
        f(format!("{prefix}.graph_bias"), &mut self.graph_bias);
        f(format!("{prefix}.skip_weight"), &mut self.skip_weight);
        f(format!("{prefix}.skip_bias"), &mut self.skip_bias);
        f(format!("{prefix}.merge_weight"), &mut self.merge_weight);
        f(format!("{prefix}.merge_bias"), &mut self.merge_bias);
        f(format!("{prefix}.update_weight"), &mut self.update_weight);
        f(format!("{prefix}.update_bias"), &mut self.update_bias);
        f(format!("{prefix}.reset_weight"), &mut self.reset_weight);
        f(format!("{prefix}.reset_bias"), &mut self.reset_bias);
        f(format!("{prefix}.candidate_weight"), &mut self.candidate_weight);
        f(format!("{prefix}.candidate_bias"), &mut self.candidate_bias);
    }
}

impl SgruParams {
    /// Width of the per-step input consumed by each cell under this variant.
    pub fn cell_input_width(variant: Variant, dims: &ModelDims, cell_index: usize) -> usize {
        if variant.uses_structure() || cell_index == 0 {
            dims.embed_dim
        } else {
            dims.hidden_dim
        }
    }

    /// Row count of the head weight under this variant.
    pub fn head_input_width(variant: Variant, dims: &ModelDims) -> usize {
        let stacks = if variant.uses_structure() { 3 } else { 1 };
        stacks * dims.hidden_dim * dims.input_steps
    }

    /// Fresh parameters drawn from the initialization stream of `seed`.
    pub fn init_seeded(variant: Variant, dims: ModelDims, seed: u64) -> Result<Self> {
        let mut rng = seeded_stream(seed, STREAM_INIT);
        Self::init(variant, dims, &mut rng)
    }

    /// Fresh parameters drawn from `rng`, in leaf registration order:
    /// adjacency, embedding, cells a..e, fusion branches, head.
    pub fn init(variant: Variant, dims: ModelDims, rng: &mut ChaCha8Rng) -> Result<Self> {
        dims.validate()?;
        let embed_bound = 1.0 / (dims.embed_dim as f64).sqrt();
        let adjacency = AdjacencyParams {
            source_embed: uniform_embed(
                rng,
                vec![dims.num_nodes, dims.adjacency_dim],
                embed_bound,
            ),
            target_embed: uniform_embed(
                rng,
                vec![dims.num_nodes, dims.adjacency_dim],
                embed_bound,
            ),
        };
        let embedding = EmbeddingParams {
            channel_weight: xavier_uniform(rng, dims.input_channels, dims.embed_dim),
            channel_bias: zero_param(vec![dims.embed_dim]),
            node_embed: variant.uses_embedding().then(|| {
                uniform_embed(rng, vec![dims.num_nodes, dims.embed_dim], embed_bound)
            }),
            step_embed: variant.uses_embedding().then(|| {
                uniform_embed(rng, vec![dims.embed_dim, dims.input_steps], embed_bound)
            }),
        };
        let cells = std::array::from_fn(|i| {
            CellParams::init(
                rng,
                Self::cell_input_width(variant, &dims, i),
                dims.num_nodes,
                dims.hidden_dim,
            )
        });
        let conn = variant.uses_structure().then(|| ConnParams {
            branches: std::array::from_fn(|_| ConnBranch {
                gate_weight: xavier_uniform(rng, dims.hidden_dim, dims.hidden_dim),
                gate_bias: zero_param(vec![dims.hidden_dim]),
                value_weight: xavier_uniform(rng, dims.hidden_dim, dims.hidden_dim),
                value_bias: zero_param(vec![dims.hidden_dim]),
            }),
        });
        let head_rows = Self::head_input_width(variant, &dims);
        let head_cols = dims.output_steps * dims.output_channels;
        let head = HeadParams {
            weight: xavier_uniform(rng, head_rows, head_cols),
            bias: zero_param(vec![head_cols]),
        };
        Ok(SgruParams {
            variant,
            dims,
            adjacency,
            embedding,
            cells,
            conn,
            head,
        })
    }

    /// All-zero parameter skeleton with the right shapes; used when loading
    /// a checkpoint.
    pub fn zeroed(variant: Variant, dims: ModelDims) -> Result<Self> {
        let mut params = Self::init_seeded(variant, dims, 0)?;
        params.visit_leaves_mut(&mut |_, tensor| {
            tensor.data_mut().fill(0.0);
        });
        Ok(params)
    }

    /// Visits every trainable leaf in the fixed registration order.
    pub fn visit_leaves<'a>(&'a self, f: &mut impl FnMut(String, &'a Tensor)) {
        f("adjacency.source_embed".into(), &self.adjacency.source_embed);
        f("adjacency.target_embed".into(), &self.adjacency.target_embed);
        f("embedding.channel_weight".into(), &self.embedding.channel_weight);
        f("embedding.channel_bias".into(), &self.embedding.channel_bias);
        if let Some(t) = &self.embedding.node_embed {
            f("embedding.node_embed".into(), t);
        }
        if let Some(t) = &self.embedding.step_embed {
            f("embedding.step_embed".into(), t);
        }
        for (cell, name) in self.cells.iter().zip(CELL_NAMES) {
            cell.visit(&format!("cell.{name}"), f);
        }
        if let Some(conn) = &self.conn {
            for (branch, name) in conn.branches.iter().zip(CONN_BRANCH_NAMES) {
                f(format!("conn.{name}.gate_weight"), &branch.gate_weight);
                f(format!("conn.{name}.gate_bias"), &branch.gate_bias);
                f(format!("conn.{name}.value_weight"), &branch.value_weight);
                f(format!("conn.{name}.value_bias"), &branch.value_bias);
            }
        }
        f("head.weight".into(), &self.head.weight);
        f("head.bias".into(), &self.head.bias);
    }

    /// Mutable counterpart of [`Self::visit_leaves`], same order.
    pub fn visit_leaves_mut<'a>(&'a mut self, f: &mut impl FnMut(String, &'a mut Tensor)) {
        f("adjacency.source_embed".into(), &mut self.adjacency.source_embed);
        f("adjacency.target_embed".into(), &mut self.adjacency.target_embed);
        f(
            "embedding.channel_weight".into(),
            &mut self.embedding.channel_weight,
        );
        f("embedding.channel_bias".into(), &mut self.embedding.channel_bias);
        if let Some(t) = &mut self.embedding.node_embed {
            f("embedding.node_embed".into(), t);
        }
        if let Some(t) = &mut self.embedding.step_embed {
            f("embedding.step_embed".into(), t);
        }
        for (cell, name) in self.cells.iter_mut().zip(CELL_NAMES) {
            cell.visit_mut(&format!("cell.{name}"), f);
        }
        if let Some(conn) = &mut self.conn {
            for (branch, name) in conn.branches.iter_mut().zip(CONN_BRANCH_NAMES) {
                f(format!("conn.{name}.gate_weight"), &mut branch.gate_weight);
                f(format!("conn.{name}.gate_bias"), &mut branch.gate_bias);
                f(format!("conn.{name}.value_weight"), &mut branch.value_weight);
                f(format!("conn.{name}.value_bias"), &mut branch.value_bias);
            }
        }
        f("head.weight".into(), &mut self.head.weight);
        f("head.bias".into(), &mut self.head.bias);
    }

    pub fn leaves(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        self.visit_leaves(&mut |name, tensor| out.push((name, tensor)));
        out
    }

    pub fn leaves_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out = Vec::new();
        self.visit_leaves_mut(&mut |name, tensor| out.push((name, tensor)));
        out
    }

    /// Total element count over all leaves.
    pub fn parameter_count(&self) -> usize {
        let mut total = 0;
        self.visit_leaves(&mut |_, tensor| total += tensor.numel());
        total
    }

    pub fn zero_grads(&mut self) {
        self.visit_leaves_mut(&mut |_, tensor| tensor.zero_grad());
    }

    pub fn clear_grads(&mut self) {
        self.visit_leaves_mut(&mut |_, tensor| tensor.clear_grad());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims() -> ModelDims {
        ModelDims {
            input_steps: 3,
            output_steps: 2,
            num_nodes: 4,
            input_channels: 1,
            output_channels: 1,
            adjacency_dim: 2,
            embed_dim: 3,
            hidden_dim: 5,
        }
    }

    #[test]
    fn variant_labels_roundtrip() {
        for v in Variant::ALL {
            assert_eq!(Variant::from_label(v.label()).unwrap(), v);
        }
        assert!(Variant::from_label("bogus").is_err());
        assert_eq!(
            serde_json::to_string(&Variant::EmbeddingOnly).unwrap(),
            "\"w_st_emb\""
        );
    }

    #[test]
    fn adjacency_param_count_example() {
        // Two node-embedding matrices of 10 by 2 hold 40 values.
        let params = SgruParams::init_seeded(
            Variant::Simple,
            ModelDims {
                num_nodes: 10,
                adjacency_dim: 2,
                ..dims()
            },
            1,
        )
        .unwrap();
        let count = params.adjacency.source_embed.numel() + params.adjacency.target_embed.numel();
        assert_eq!(count, 40);
    }

    #[test]
    fn cell_param_count_example() {
        // One node, one hidden unit, one input channel:
        // 1+1+1+1+4+1+1+1+1+1+2+1 = 16.
        let mut rng = seeded_stream(1, STREAM_INIT);
        let cell = CellParams::init(&mut rng, 1, 1, 1);
        let mut count = 0;
        cell.visit("cell.a", &mut |_, t| count += t.numel());
        assert_eq!(count, 16);
    }

    #[test]
    fn embedding_variants_differ_by_embed_tables() {
        let d = dims();
        let with = SgruParams::init_seeded(Variant::Sgru, d, 1).unwrap();
        let without = SgruParams::init_seeded(Variant::StructureOnly, d, 1).unwrap();
        let expected_extra = d.num_nodes * d.embed_dim + d.embed_dim * d.input_steps;
        assert_eq!(
            with.parameter_count(),
            without.parameter_count() + expected_extra
        );
        assert!(with.parameter_count() > without.parameter_count());
    }

    #[test]
    fn leaves_and_leaves_mut_agree_on_order() {
        for v in Variant::ALL {
            let mut params = SgruParams::init_seeded(v, dims(), 3).unwrap();
            let names: Vec<String> = params.leaves().into_iter().map(|(n, _)| n).collect();
            let names_mut: Vec<String> =
                params.leaves_mut().into_iter().map(|(n, _)| n).collect();
            assert_eq!(names, names_mut);
            let mut sorted = names.clone();
            sorted.sort();
            sorted.dedup();
            assert_eq!(sorted.len(), names.len(), "duplicate leaf name in {v}");
        }
    }

    #[test]
    fn chain_cells_widen_after_first() {
        let params = SgruParams::init_seeded(Variant::Simple, dims(), 1).unwrap();
        assert_eq!(params.cells[0].input_width, dims().embed_dim);
        for cell in &params.cells[1..] {
            assert_eq!(cell.input_width, dims().hidden_dim);
        }
        let structured = SgruParams::init_seeded(Variant::Sgru, dims(), 1).unwrap();
        for cell in &structured.cells {
            assert_eq!(cell.input_width, dims().embed_dim);
        }
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let a = SgruParams::init_seeded(Variant::Sgru, dims(), 7).unwrap();
        let b = SgruParams::init_seeded(Variant::Sgru, dims(), 7).unwrap();
        for ((_, ta), (_, tb)) in a.leaves().iter().zip(b.leaves().iter()) {
            assert_eq!(ta.data(), tb.data());
        }
        let c = SgruParams::init_seeded(Variant::Sgru, dims(), 8).unwrap();
        let differs = a
            .leaves()
            .iter()
            .zip(c.leaves().iter())
            .any(|((_, ta), (_, tc))| ta.data() != tc.data());
        assert!(differs);
    }

    #[test]
    fn weights_are_trainable_and_biases_zero() {
        let params = SgruParams::init_seeded(Variant::Sgru, dims(), 1).unwrap();
        for (name, tensor) in params.leaves() {
            assert!(tensor.requires_grad(), "{name} must be trainable");
            if name.ends_with("_bias") || name.ends_with(".bias") {
                assert!(tensor.data().iter().all(|&v| v == 0.0), "{name} not zero");
            }
        }
    }

    #[test]
    fn xavier_bound_respected() {
        let d = dims();
        let params = SgruParams::init_seeded(Variant::Sgru, d, 1).unwrap();
        let bound = (6.0 / (4.0 * d.hidden_dim as f64 + d.hidden_dim as f64)).sqrt();
        for cell in &params.cells {
            assert!(cell
                .merge_weight
                .data()
                .iter()
                .all(|v| v.abs() <= bound + 1e-12));
        }
    }

    #[test]
    fn dims_validation_rejects_zero() {
        let mut d = dims();
        d.hidden_dim = 0;
        assert!(d.validate().is_err());
        assert!(SgruParams::init_seeded(Variant::Simple, d, 1).is_err());
    }
}
