//! Tape-side forward pass.
//!
//! Parameters are mounted onto a fresh tape once per forward/backward pair;
//! the mounted handles keep the same registration order as
//! `SgruParams::visit_leaves`, so gradients harvested from
//! [`MountedModel::leaves`] line up with the parameter list by index.

use crate::error::{Error, Result};
use crate::model::{SgruParams, Variant};
use crate::tensor::{Tape, Tensor, Var};

pub struct MountedCell {
    pub input_width: usize,
    pub graph_weight: Var,
    pub graph_bias: Var,
    pub skip_weight: Var,
    pub skip_bias: Var,
    pub merge_weight: Var,
    pub merge_bias: Var,
    pub update_weight: Var,
    pub update_bias: Var,
    pub reset_weight: Var,
    pub reset_bias: Var,
    pub candidate_weight: Var,
    pub candidate_bias: Var,
}

pub struct MountedBranch {
    pub gate_weight: Var,
    pub gate_bias: Var,
    pub value_weight: Var,
    pub value_bias: Var,
}

/// Parameters registered on one tape, ready to run forward passes.
pub struct MountedModel {
    pub variant: Variant,
    pub input_steps: usize,
    pub output_steps: usize,
    pub num_nodes: usize,
    pub input_channels: usize,
    pub output_channels: usize,
    pub hidden_dim: usize,
    tape: Tape,
    source_embed: Var,
    target_embed: Var,
    channel_weight: Var,
    channel_bias: Var,
    node_embed: Option<Var>,
    step_embed: Option<Var>,
    cells: Vec<MountedCell>,
    conn: Option<Vec<MountedBranch>>,
    head_weight: Var,
    head_bias: Var,
    leaves: Vec<(String, Var)>,
}

/// Learned adjacency: row softmax of the rectified product of the two node
/// embeddings.
pub fn adaptive_adjacency(source_embed: &Var, target_embed: &Var) -> Result<Var> {
    source_embed
        .matmul(&target_embed.transpose()?)?
        .relu()
        .softmax_rows()
}

/// One embedded input step: channel projection plus optional additive node
/// and step vectors. `step_row` is the current step's vector as `[1, width]`.
pub fn embed_step(
    x_t: &Var,
    channel_weight: &Var,
    channel_bias: &Var,
    node_embed: Option<&Var>,
    step_row: Option<&Var>,
) -> Result<Var> {
    let mut out = x_t.matmul(channel_weight)?.add(channel_bias)?;
    if let Some(nodes) = node_embed {
        out = out.add(nodes)?;
    }
    if let Some(step) = step_row {
        out = out.add(step)?;
    }
    Ok(out)
}

/// One recurrent step. The pre-gate signal concatenates a graph-aggregated
/// branch with an identity branch before the shared merge projection; the
/// gates then blend the previous state with a tanh candidate.
pub fn gcn_gru_step(x_t: &Var, h_prev: &Var, adjacency: &Var, cell: &MountedCell) -> Result<Var> {
    let graph_in = x_t.matmul(&cell.graph_weight)?.add(&cell.graph_bias)?;
    let left = adjacency.matmul(&graph_in.concat_last(h_prev)?)?;
    let skip_in = x_t.matmul(&cell.skip_weight)?.add(&cell.skip_bias)?;
    let right = skip_in.concat_last(h_prev)?;
    let merged = left
        .concat_last(&right)?
        .matmul(&cell.merge_weight)?
        .add(&cell.merge_bias)?;
    let update = merged
        .matmul(&cell.update_weight)?
        .add(&cell.update_bias)?
        .sigmoid();
    let reset = merged
        .matmul(&cell.reset_weight)?
        .add(&cell.reset_bias)?
        .sigmoid();
    let candidate = x_t
        .concat_last(&reset.hadamard(h_prev)?)?
        .matmul(&cell.candidate_weight)?
        .add(&cell.candidate_bias)?
        .tanh();
    // h = (1 - z) * candidate + z * h_prev: a convex blend, so the state
    // stays inside [-1, 1] once it enters that box.
    update
        .affine(-1.0, 1.0)
        .hadamard(&candidate)?
        .add(&update.hadamard(h_prev)?)
}

/// One fusion branch: sigmoid gate from `h_a`, linear value from `h_b`.
pub fn conn_branch(h_a: &Var, h_b: &Var, branch: &MountedBranch) -> Result<Var> {
    let gate = h_a
        .matmul(&branch.gate_weight)?
        .add(&branch.gate_bias)?
        .sigmoid();
    let value = h_b.matmul(&branch.value_weight)?.add(&branch.value_bias)?;
    gate.hadamard(&value)
}

fn ensure_finite(var: &Var, stage: &str) -> Result<()> {
    if var.is_finite() {
        Ok(())
    } else {
        Err(Error::Numeric {
            stage: stage.into(),
            message: "non-finite value".into(),
        })
    }
}

/// Registers every leaf of `params` on `tape`.
pub fn mount(tape: &Tape, params: &SgruParams) -> MountedModel {
    let mut leaves: Vec<(String, Var)> = Vec::new();
    params.visit_leaves(&mut |name, tensor| {
        leaves.push((name, tape.leaf(tensor)));
    });
    let mut by_name = leaves.iter().cloned().collect::<std::collections::HashMap<_, _>>();
    let mut take = |name: String| -> Var {
        by_name
            .remove(&name)
            .unwrap_or_else(|| panic!("leaf {name} not mounted"))
    };
    let cells = crate::model::CELL_NAMES
        .iter()
        .zip(&params.cells)
        .map(|(name, cell)| MountedCell {
            input_width: cell.input_width,
            graph_weight: take(format!("cell.{name}.graph_weight")),
            graph_bias: take(format!("cell.{name}.graph_bias")),
            skip_weight: take(format!("cell.{name}.skip_weight")),
            skip_bias: take(format!("cell.{name}.skip_bias")),
            merge_weight: take(format!("cell.{name}.merge_weight")),
            merge_bias: take(format!("cell.{name}.merge_bias")),
            update_weight: take(format!("cell.{name}.update_weight")),
            update_bias: take(format!("cell.{name}.update_bias")),
            reset_weight: take(format!("cell.{name}.reset_weight")),
            reset_bias: take(format!("cell.{name}.reset_bias")),
            candidate_weight: take(format!("cell.{name}.candidate_weight")),
            candidate_bias: take(format!("cell.{name}.candidate_bias")),
        })
        .collect();
    let conn = params.conn.as_ref().map(|_| {
        crate::model::CONN_BRANCH_NAMES
            .iter()
            .map(|name| MountedBranch {
                gate_weight: take(format!("conn.{name}.gate_weight")),
                gate_bias: take(format!("conn.{name}.gate_bias")),
                value_weight: take(format!("conn.{name}.value_weight")),
                value_bias: take(format!("conn.{name}.value_bias")),
            })
            .collect()
    });
    MountedModel {
        variant: params.variant,
        input_steps: params.dims.input_steps,
        output_steps: params.dims.output_steps,
        num_nodes: params.dims.num_nodes,
        input_channels: params.dims.input_channels,
        output_channels: params.dims.output_channels,
        hidden_dim: params.dims.hidden_dim,
        tape: tape.clone(),
        source_embed: take("adjacency.source_embed".into()),
        target_embed: take("adjacency.target_embed".into()),
        channel_weight: take("embedding.channel_weight".into()),
        channel_bias: take("embedding.channel_bias".into()),
        node_embed: params
            .embedding
            .node_embed
            .as_ref()
            .map(|_| take("embedding.node_embed".into())),
        step_embed: params
            .embedding
            .step_embed
            .as_ref()
            .map(|_| take("embedding.step_embed".into())),
        cells,
        conn,
        head_weight: take("head.weight".into()),
        head_bias: take("head.bias".into()),
        leaves,
    }
}

impl MountedModel {
    /// Mounted leaves, in the same order as `SgruParams::visit_leaves`.
    pub fn leaves(&self) -> &[(String, Var)] {
        &self.leaves
    }

    pub fn adjacency(&self) -> Result<Var> {
        adaptive_adjacency(&self.source_embed, &self.target_embed)
    }

    /// Embeds a `[input_steps, num_nodes, input_channels]` window into one
    /// `[num_nodes, embed_dim]` tensor per step.
    pub fn embed_sequence(&self, input: &Tensor) -> Result<Vec<Var>> {
        let expected = vec![self.input_steps, self.num_nodes, self.input_channels];
        if input.shape() != expected.as_slice() {
            return Err(Error::ShapeMismatch {
                op: "embed_sequence",
                lhs: input.shape().to_vec(),
                rhs: expected,
            });
        }
        let step_cols = match &self.step_embed {
            Some(table) => Some(table.transpose()?),
            None => None,
        };
        let step_len = self.num_nodes * self.input_channels;
        let mut out = Vec::with_capacity(self.input_steps);
        for t in 0..self.input_steps {
            let x_t = self.tape.constant(
                vec![self.num_nodes, self.input_channels],
                input.data()[t * step_len..(t + 1) * step_len].to_vec(),
            )?;
            let step_row = match &step_cols {
                Some(cols) => Some(cols.row(t)?),
                None => None,
            };
            let embedded = embed_step(
                &x_t,
                &self.channel_weight,
                &self.channel_bias,
                self.node_embed.as_ref(),
                step_row.as_ref(),
            )?;
            ensure_finite(&embedded, "embedding")?;
            out.push(embedded);
        }
        Ok(out)
    }

    fn run_cell(
        &self,
        cell_index: usize,
        inputs: &[Var],
        h0: &Var,
        adjacency: &Var,
    ) -> Result<Vec<Var>> {
        let stage = format!("cell_{}", crate::model::CELL_NAMES[cell_index]);
        let cell = &self.cells[cell_index];
        let mut h = h0.clone();
        let mut seq = Vec::with_capacity(inputs.len());
        for x_t in inputs {
            h = gcn_gru_step(x_t, &h, adjacency, cell)?;
            ensure_finite(&h, &stage)?;
            seq.push(h.clone());
        }
        Ok(seq)
    }

    fn zero_hidden(&self) -> Result<Var> {
        self.tape.constant(
            vec![self.num_nodes, self.hidden_dim],
            vec![0.0; self.num_nodes * self.hidden_dim],
        )
    }

    /// Concatenates per-step rows into the head input and applies the head.
    fn apply_head(&self, step_rows: Vec<Var>) -> Result<Var> {
        let mut rows = step_rows[0].clone();
        for step in &step_rows[1..] {
            rows = rows.concat_last(step)?;
        }
        let out = rows.matmul(&self.head_weight)?.add(&self.head_bias)?;
        ensure_finite(&out, "head")?;
        out.reshape(&[self.num_nodes, self.output_steps, self.output_channels])?
            .swap_leading_axes()
    }

    /// Full forward pass, returning a
    /// `[output_steps, num_nodes, output_channels]` tensor on the tape.
    pub fn forward(&self, input: &Tensor) -> Result<Var> {
        let adjacency = self.adjacency()?;
        let embedded = self.embed_sequence(input)?;
        let zero = self.zero_hidden()?;
        if self.variant.uses_structure() {
            let seq_a = self.run_cell(0, &embedded, &zero, &adjacency)?;
            let seq_b = self.run_cell(1, &embedded, &zero, &adjacency)?;
            let h_a = seq_a.last().expect("at least one step");
            let h_b = seq_b.last().expect("at least one step");
            let branches = self.conn.as_ref().expect("structured variant has conn");
            let mut branch_seqs = Vec::with_capacity(3);
            for (i, branch) in branches.iter().enumerate() {
                let h0 = conn_branch(h_a, h_b, branch)?;
                ensure_finite(&h0, "conn")?;
                branch_seqs.push(self.run_cell(2 + i, &embedded, &h0, &adjacency)?);
            }
            let step_rows: Vec<Var> = (0..self.input_steps)
                .map(|t| {
                    branch_seqs[0][t]
                        .concat_last(&branch_seqs[1][t])?
                        .concat_last(&branch_seqs[2][t])
                })
                .collect::<Result<_>>()?;
            self.apply_head(step_rows)
        } else {
            let mut seq = embedded;
            for cell_index in 0..self.cells.len() {
                seq = self.run_cell(cell_index, &seq, &zero, &adjacency)?;
            }
            self.apply_head(seq)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelDims, SgruParams};

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

    fn window(dims: &ModelDims, scale: f64) -> Tensor {
        let numel = dims.input_steps * dims.num_nodes * dims.input_channels;
        let data: Vec<f64> = (0..numel)
            .map(|i| scale * ((i as f64 * 0.37).sin() + 0.2))
            .collect();
        Tensor::new(
            vec![dims.input_steps, dims.num_nodes, dims.input_channels],
            data,
        )
        .unwrap()
    }

    #[test]
    fn adjacency_of_zero_embeddings_is_uniform() {
        // Rectified zero products leave uniform softmax rows.
        let tape = Tape::new();
        let e = tape.constant(vec![3, 2], vec![0.0; 6]).unwrap();
        let a = adaptive_adjacency(&e, &e).unwrap();
        assert_eq!(a.shape(), vec![3, 3]);
        for v in a.data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn adjacency_two_node_example() {
        // Product is [[1, 0], [0, 0]]; row softmax gives
        // [e/(e+1), 1/(e+1)] and [1/2, 1/2].
        let tape = Tape::new();
        let e1 = tape.constant(vec![2, 1], vec![1.0, 0.0]).unwrap();
        let e2 = tape.constant(vec![2, 1], vec![1.0, 0.0]).unwrap();
        let a = adaptive_adjacency(&e1, &e2).unwrap();
        let d = a.data();
        assert!((d[0] - 0.73106).abs() < 1e-5);
        assert!((d[1] - 0.26894).abs() < 1e-5);
        assert!((d[2] - 0.5).abs() < 1e-12);
        assert!((d[3] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn adjacency_rows_sum_to_one_for_random_params() {
        for seed in 0..20u64 {
            let params = SgruParams::init_seeded(Variant::Sgru, dims(), seed).unwrap();
            let tape = Tape::new();
            let model = mount(&tape, &params);
            let a = model.adjacency().unwrap();
            let d = a.data();
            let n = dims().num_nodes;
            for r in 0..n {
                let sum: f64 = d[r * n..(r + 1) * n].iter().sum();
                assert!((sum - 1.0).abs() < 1e-9);
                assert!(d[r * n..(r + 1) * n].iter().all(|&v| v >= 0.0));
            }
        }
    }

    #[test]
    fn embed_scalar_example() {
        // One node, one channel, identity-free case: 2*3 + 1 + 0.5 + 0.25.
        let tape = Tape::new();
        let x = tape.constant(vec![1, 1], vec![2.0]).unwrap();
        let w = tape.constant(vec![1, 1], vec![3.0]).unwrap();
        let b = tape.constant(vec![1], vec![1.0]).unwrap();
        let node = tape.constant(vec![1, 1], vec![0.5]).unwrap();
        let step = tape.constant(vec![1, 1], vec![0.25]).unwrap();
        let out = embed_step(&x, &w, &b, Some(&node), Some(&step)).unwrap();
        assert_eq!(out.data(), vec![7.75]);
    }

    #[test]
    fn embed_identity_projection_passes_input_through() {
        let tape = Tape::new();
        let x = tape
            .constant(vec![2, 2], vec![1.0, -2.0, 3.0, 0.5])
            .unwrap();
        let w = tape
            .constant(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0])
            .unwrap();
        let b = tape.constant(vec![2], vec![0.0, 0.0]).unwrap();
        let out = embed_step(&x, &w, &b, None, None).unwrap();
        assert_eq!(out.data(), x.data());
    }

    #[test]
    fn embed_sequence_shape_contract() {
        let d = ModelDims {
            input_steps: 12,
            num_nodes: 4,
            input_channels: 1,
            embed_dim: 8,
            ..dims()
        };
        let params = SgruParams::init_seeded(Variant::Sgru, d, 1).unwrap();
        let tape = Tape::new();
        let model = mount(&tape, &params);
        let steps = model.embed_sequence(&window(&d, 1.0)).unwrap();
        assert_eq!(steps.len(), 12);
        for s in &steps {
            assert_eq!(s.shape(), vec![4, 8]);
        }
    }

    fn scalar_cell(tape: &Tape) -> MountedCell {
        let w = |v: f64, shape: Vec<usize>| {
            let numel: usize = shape.iter().product();
            tape.constant(shape, vec![v; numel]).unwrap()
        };
        MountedCell {
            input_width: 1,
            graph_weight: w(1.0, vec![1, 1]),
            graph_bias: w(0.0, vec![1]),
            skip_weight: w(1.0, vec![1, 1]),
            skip_bias: w(0.0, vec![1]),
            merge_weight: w(1.0, vec![4, 1]),
            merge_bias: w(0.0, vec![1, 1]),
            update_weight: w(1.0, vec![1, 1]),
            update_bias: w(0.0, vec![1]),
            reset_weight: w(1.0, vec![1, 1]),
            reset_bias: w(0.0, vec![1]),
            candidate_weight: w(1.0, vec![2, 1]),
            candidate_bias: w(0.0, vec![1]),
        }
    }

    #[test]
    fn cell_scalar_trace() {
        // Independent scalar walk of the same arithmetic: with every weight
        // one, every bias zero, x=1, h=0, adjacency [[1]]:
        //   graph branch = skip branch = 1, so left = [1, 0], right = [1, 0];
        //   merged = 1 + 0 + 1 + 0 = 2; z = r = sigmoid(2);
        //   candidate = tanh(1 + r*0) = tanh(1); h' = (1 - z) * tanh(1).
        let sigmoid = |v: f64| 1.0 / (1.0 + (-v).exp());
        let z = sigmoid(2.0);
        let expected = (1.0 - z) * 1.0f64.tanh();

        let tape = Tape::new();
        let cell = scalar_cell(&tape);
        let x = tape.constant(vec![1, 1], vec![1.0]).unwrap();
        let h = tape.constant(vec![1, 1], vec![0.0]).unwrap();
        let a = tape.constant(vec![1, 1], vec![1.0]).unwrap();
        let out = gcn_gru_step(&x, &h, &a, &cell).unwrap();
        assert!((out.data()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn cell_saturated_update_gate_keeps_state() {
        // Update bias +50 saturates z to 1, so the state passes through.
        let tape = Tape::new();
        let mut cell = scalar_cell(&tape);
        cell.update_weight = tape.constant(vec![1, 1], vec![0.0]).unwrap();
        cell.update_bias = tape.constant(vec![1], vec![50.0]).unwrap();
        let x = tape.constant(vec![1, 1], vec![1.0]).unwrap();
        let h = tape.constant(vec![1, 1], vec![0.37]).unwrap();
        let a = tape.constant(vec![1, 1], vec![1.0]).unwrap();
        let out = gcn_gru_step(&x, &h, &a, &cell).unwrap();
        assert!((out.data()[0] - 0.37).abs() < 1e-12);
    }

    #[test]
    fn cell_identity_adjacency_makes_branches_equal() {
        // With A = I and shared branch weights, the merged halves coincide,
        // checked here through a 2-node run against a hand-built copy.
        let d = ModelDims {
            num_nodes: 2,
            embed_dim: 2,
            hidden_dim: 2,
            ..dims()
        };
        let params = SgruParams::init_seeded(Variant::Sgru, d, 5).unwrap();
        let tape = Tape::new();
        let model = mount(&tape, &params);
        let cell = &model.cells[0];
        let x = tape
            .constant(vec![2, 2], vec![0.3, -0.2, 0.8, 0.1])
            .unwrap();
        let h = tape.constant(vec![2, 2], vec![0.0; 4]).unwrap();
        let identity = tape
            .constant(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0])
            .unwrap();
        let graph_in = x
            .matmul(&cell.graph_weight)
            .unwrap()
            .add(&cell.graph_bias)
            .unwrap();
        let left = identity
            .matmul(&graph_in.concat_last(&h).unwrap())
            .unwrap();
        let skip_in = x
            .matmul(&cell.graph_weight)
            .unwrap()
            .add(&cell.graph_bias)
            .unwrap();
        let right = skip_in.concat_last(&h).unwrap();
        assert_eq!(left.data(), right.data());
    }

    #[test]
    fn conn_scalar_example() {
        // Gate sigmoid(0) = 0.5; value 2*3 + 1 = 7; fused 3.5.
        let tape = Tape::new();
        let branch = MountedBranch {
            gate_weight: tape.constant(vec![1, 1], vec![1.0]).unwrap(),
            gate_bias: tape.constant(vec![1], vec![0.0]).unwrap(),
            value_weight: tape.constant(vec![1, 1], vec![3.0]).unwrap(),
            value_bias: tape.constant(vec![1], vec![1.0]).unwrap(),
        };
        let h_a = tape.constant(vec![1, 1], vec![0.0]).unwrap();
        let h_b = tape.constant(vec![1, 1], vec![2.0]).unwrap();
        let out = conn_branch(&h_a, &h_b, &branch).unwrap();
        assert!((out.data()[0] - 3.5).abs() < 1e-15);
    }

    #[test]
    fn conn_saturated_gate_passes_value() {
        let tape = Tape::new();
        let branch = MountedBranch {
            gate_weight: tape.constant(vec![1, 1], vec![0.0]).unwrap(),
            gate_bias: tape.constant(vec![1], vec![50.0]).unwrap(),
            value_weight: tape.constant(vec![1, 1], vec![1.0]).unwrap(),
            value_bias: tape.constant(vec![1], vec![0.0]).unwrap(),
        };
        let h_a = tape.constant(vec![1, 1], vec![-3.0]).unwrap();
        let h_b = tape.constant(vec![1, 1], vec![1.75]).unwrap();
        let out = conn_branch(&h_a, &h_b, &branch).unwrap();
        assert!((out.data()[0] - 1.75).abs() < 1e-12);
    }

    #[test]
    fn forward_shape_contract_all_variants() {
        let d = dims();
        let x = window(&d, 1.0);
        for v in Variant::ALL {
            let params = SgruParams::init_seeded(v, d, 2).unwrap();
            let tape = Tape::new();
            let model = mount(&tape, &params);
            let out = model.forward(&x).unwrap();
            assert_eq!(
                out.shape(),
                vec![d.output_steps, d.num_nodes, d.output_channels],
                "variant {v}"
            );
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let d = dims();
        let x = window(&d, 1.0);
        let params = SgruParams::init_seeded(Variant::Sgru, d, 9).unwrap();
        let run = || {
            let tape = Tape::new();
            mount(&tape, &params).forward(&x).unwrap().data()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn forward_rejects_wrong_input_shape() {
        let d = dims();
        let params = SgruParams::init_seeded(Variant::Sgru, d, 2).unwrap();
        let tape = Tape::new();
        let model = mount(&tape, &params);
        let bad = Tensor::zeros(vec![d.input_steps + 1, d.num_nodes, d.input_channels]).unwrap();
        assert!(matches!(
            model.forward(&bad),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn forward_names_first_non_finite_stage() {
        let d = dims();
        let mut params = SgruParams::init_seeded(Variant::Sgru, d, 2).unwrap();
        params.embedding.channel_weight.data_mut()[0] = f64::NAN;
        let tape = Tape::new();
        let model = mount(&tape, &params);
        match model.forward(&window(&d, 1.0)) {
            Err(Error::Numeric { stage, .. }) => assert_eq!(stage, "embedding"),
            other => panic!("expected numeric error, got {other:?}"),
        }
    }

    #[test]
    fn structure_matches_full_variant_with_zero_embedding_tables() {
        // Zeroed additive tables make the embedding a pure projection, which
        // is exactly what the structure-only variant computes.
        let d = dims();
        let mut full = SgruParams::init_seeded(Variant::Sgru, d, 11).unwrap();
        if let Some(t) = full.embedding.node_embed.as_mut() {
            t.data_mut().fill(0.0);
        }
        if let Some(t) = full.embedding.step_embed.as_mut() {
            t.data_mut().fill(0.0);
        }
        let mut stripped = SgruParams::init_seeded(Variant::StructureOnly, d, 11).unwrap();
        let shared: std::collections::HashMap<String, Vec<f64>> = full
            .leaves()
            .into_iter()
            .map(|(n, t)| (n, t.data().to_vec()))
            .collect();
        for (name, tensor) in stripped.leaves_mut() {
            tensor
                .data_mut()
                .copy_from_slice(&shared[&name]);
        }
        let x = window(&d, 1.0);
        let tape_a = Tape::new();
        let out_full = mount(&tape_a, &full).forward(&x).unwrap().data();
        let tape_b = Tape::new();
        let out_stripped = mount(&tape_b, &stripped).forward(&x).unwrap().data();
        assert_eq!(out_full, out_stripped);
    }

    #[test]
    fn hidden_state_stays_in_unit_box() {
        // The update gate blends convexly, so states entering [-1, 1] stay.
        use rand::Rng;
        let d = dims();
        for seed in 0..25u64 {
            let params = SgruParams::init_seeded(Variant::Sgru, d, seed).unwrap();
            let tape = Tape::new();
            let model = mount(&tape, &params);
            let adjacency = model.adjacency().unwrap();
            let mut rng = crate::rng::seeded_stream(seed, 99);
            let h0_data: Vec<f64> = (0..d.num_nodes * d.hidden_dim)
                .map(|_| rng.random_range(-1.0..=1.0))
                .collect();
            let mut h = tape
                .constant(vec![d.num_nodes, d.hidden_dim], h0_data)
                .unwrap();
            for t in 0..6 {
                let x_data: Vec<f64> = (0..d.num_nodes * d.embed_dim)
                    .map(|_| rng.random_range(-3.0..=3.0))
                    .collect();
                let x = tape
                    .constant(vec![d.num_nodes, d.embed_dim], x_data)
                    .unwrap();
                h = gcn_gru_step(&x, &h, &adjacency, &model.cells[0]).unwrap();
                assert!(
                    h.data().iter().all(|v| v.abs() <= 1.0),
                    "state left the unit box at seed {seed}, step {t}"
                );
            }
        }
    }

    #[test]
    fn adjacency_embeddings_receive_gradient() {
        let d = dims();
        let x = window(&d, 1.0);
        let mut live_seeds = 0;
        for seed in 0..5u64 {
            let params = SgruParams::init_seeded(Variant::Sgru, d, seed).unwrap();
            // Skip seeds where rectification kills the whole product.
            let tape_probe = Tape::new();
            let probe = mount(&tape_probe, &params);
            let pre_relu = probe
                .source_embed
                .matmul(&probe.target_embed.transpose().unwrap())
                .unwrap()
                .relu();
            if pre_relu.data().iter().all(|&v| v == 0.0) {
                continue;
            }
            live_seeds += 1;
            let tape = Tape::new();
            let model = mount(&tape, &params);
            let out = model.forward(&x).unwrap();
            out.sum_all().backward().unwrap();
            let g1 = model.leaves()[0].1.grad().unwrap();
            let g2 = model.leaves()[1].1.grad().unwrap();
            assert!(g1.iter().any(|&v| v != 0.0), "seed {seed}: source grad zero");
            assert!(g2.iter().any(|&v| v != 0.0), "seed {seed}: target grad zero");
        }
        assert!(live_seeds >= 3, "too many dead-rectifier seeds");
    }
}
