//! Replayable random expression graphs for differentiation checks.
//!
//! A plan is generated from one RNG stream and evaluated from another, so the
//! same structure can be replayed with perturbed leaf values for finite
//! differences. Only smooth operations are drawn; kinked ones (relu, abs)
//! would poison the comparison at their crossing points.

use rand::Rng;
use sgru_core::rng::{seeded_stream, STREAM_INIT, STREAM_NOISE};
use sgru_core::tensor::{Tape, Tensor, Var};

pub enum PlanNode {
    /// References `leaf_shapes[leaf]`.
    Leaf { leaf: usize },
    Sigmoid { of: usize },
    Tanh { of: usize },
    Softmax { of: usize },
    Affine { of: usize, scale: f64, shift: f64 },
    Add { lhs: usize, rhs: usize },
    Sub { lhs: usize, rhs: usize },
    Hadamard { lhs: usize, rhs: usize },
    /// `tanh(nodes[lhs] x leaf)` with a square `[cols, cols]` leaf; the tanh
    /// keeps magnitudes inside the unit box so finite differences stay tame.
    MatmulSquare { lhs: usize, leaf: usize },
}

pub struct GraphPlan {
    pub leaf_shapes: Vec<(usize, usize)>,
    pub nodes: Vec<PlanNode>,
}

impl GraphPlan {
    /// Structure drawn from `STREAM_INIT`; values drawn later from
    /// `STREAM_NOISE`, so structure and data vary independently.
    pub fn generate(seed: u64) -> Self {
        let mut rng = seeded_stream(seed, STREAM_INIT);
        let rows = rng.random_range(2..=4);
        let cols = rng.random_range(2..=4);
        let mut leaf_shapes = Vec::new();
        let mut nodes = Vec::new();
        for _ in 0..rng.random_range(2..=3) {
            leaf_shapes.push((rows, cols));
            nodes.push(PlanNode::Leaf {
                leaf: leaf_shapes.len() - 1,
            });
        }
        for _ in 0..rng.random_range(4..=7) {
            let pick = |rng: &mut rand_chacha::ChaCha8Rng, len: usize| rng.random_range(0..len);
            let node = match rng.random_range(0..8) {
                0 => PlanNode::Add {
                    lhs: pick(&mut rng, nodes.len()),
                    rhs: pick(&mut rng, nodes.len()),
                },
                1 => PlanNode::Sub {
                    lhs: pick(&mut rng, nodes.len()),
                    rhs: pick(&mut rng, nodes.len()),
                },
                2 => PlanNode::Hadamard {
                    lhs: pick(&mut rng, nodes.len()),
                    rhs: pick(&mut rng, nodes.len()),
                },
                3 => PlanNode::Sigmoid {
                    of: pick(&mut rng, nodes.len()),
                },
                4 => PlanNode::Tanh {
                    of: pick(&mut rng, nodes.len()),
                },
                5 => PlanNode::Softmax {
                    of: pick(&mut rng, nodes.len()),
                },
                6 => PlanNode::Affine {
                    of: pick(&mut rng, nodes.len()),
                    scale: rng.random_range(-1.2..1.2),
                    shift: rng.random_range(-0.5..0.5),
                },
                _ => {
                    leaf_shapes.push((cols, cols));
                    PlanNode::MatmulSquare {
                        lhs: pick(&mut rng, nodes.len()),
                        leaf: leaf_shapes.len() - 1,
                    }
                }
            };
            nodes.push(node);
        }
        GraphPlan { leaf_shapes, nodes }
    }

    pub fn random_leaf_values(&self, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = seeded_stream(seed, STREAM_NOISE);
        self.leaf_shapes
            .iter()
            .map(|&(r, c)| (0..r * c).map(|_| rng.random_range(-0.8..0.8)).collect())
            .collect()
    }

    /// Builds the graph on a fresh tape. The objective is
    /// `sum(tanh(last node))`. Returns the objective and, when `with_grads`,
    /// the gradient of every leaf in declaration order.
    pub fn evaluate(&self, leaf_values: &[Vec<f64>], with_grads: bool) -> (f64, Vec<Vec<f64>>) {
        assert_eq!(leaf_values.len(), self.leaf_shapes.len());
        let tape = Tape::new();
        let mut leaves: Vec<Var> = Vec::new();
        let mut vars: Vec<Var> = Vec::new();
        let leaf_var = |tape: &Tape, leaves: &mut Vec<Var>, idx: usize| -> Var {
            let (r, c) = self.leaf_shapes[idx];
            let tensor = Tensor::trainable(vec![r, c], leaf_values[idx].clone()).unwrap();
            let var = tape.leaf(&tensor);
            leaves.push(var.clone());
            var
        };
        for node in &self.nodes {
            let var = match *node {
                PlanNode::Leaf { leaf } => leaf_var(&tape, &mut leaves, leaf),
                PlanNode::Sigmoid { of } => vars[of].sigmoid(),
                PlanNode::Tanh { of } => vars[of].tanh(),
                PlanNode::Softmax { of } => vars[of].softmax_rows().unwrap(),
                PlanNode::Affine { of, scale, shift } => vars[of].affine(scale, shift),
                PlanNode::Add { lhs, rhs } => vars[lhs].add(&vars[rhs]).unwrap(),
                PlanNode::Sub { lhs, rhs } => vars[lhs].sub(&vars[rhs]).unwrap(),
                PlanNode::Hadamard { lhs, rhs } => vars[lhs].hadamard(&vars[rhs]).unwrap(),
                PlanNode::MatmulSquare { lhs, leaf } => {
                    let square = leaf_var(&tape, &mut leaves, leaf);
                    vars[lhs].matmul(&square).unwrap().tanh()
                }
            };
            vars.push(var);
        }
        let objective = vars.last().unwrap().tanh().sum_all();
        let value = objective.data()[0];
        if !with_grads {
            return (value, Vec::new());
        }
        objective.backward().unwrap();
        let grads = leaves
            .iter()
            .map(|leaf| leaf.grad().expect("leaf gradient"))
            .collect();
        (value, grads)
    }

    /// Worst relative error between tape gradients and central differences
    /// over every leaf element.
    pub fn worst_fd_error(&self, leaf_values: &[Vec<f64>], epsilon: f64) -> f64 {
        let (_, grads) = self.evaluate(leaf_values, true);
        let mut worst: f64 = 0.0;
        let mut work: Vec<Vec<f64>> = leaf_values.to_vec();
        for (li, grad) in grads.iter().enumerate() {
            for (ei, &analytic) in grad.iter().enumerate() {
                let base = work[li][ei];
                work[li][ei] = base + epsilon;
                let (plus, _) = self.evaluate(&work, false);
                work[li][ei] = base - epsilon;
                let (minus, _) = self.evaluate(&work, false);
                work[li][ei] = base;
                let numeric = (plus - minus) / (2.0 * epsilon);
                worst = worst.max(sgru_core::model::relative_error(analytic, numeric));
            }
        }
        worst
    }
}
