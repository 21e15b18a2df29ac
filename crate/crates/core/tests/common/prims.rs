//! Randomized single-primitive objectives for central-difference checking.

use entail_core::autodiff::{grad_check, GradCheckReport, ParamGroup, ParameterSet, Tape, TapeObjective, Tensor, Var, DEFAULT_STEP};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Prim {
    Matmul,
    Tanh,
    Sigmoid,
    Add,
    AddColumn,
    Mul,
    Scale,
    BroadcastCols,
    ConcatRows,
    ConcatCols,
    Transpose,
    Sum,
    Softmax,
    CrossEntropy,
    EmbedRow,
}

impl Prim {
    pub const ALL: [Prim; 15] = [
        Prim::Matmul,
        Prim::Tanh,
        Prim::Sigmoid,
        Prim::Add,
        Prim::AddColumn,
        Prim::Mul,
        Prim::Scale,
        Prim::BroadcastCols,
        Prim::ConcatRows,
        Prim::ConcatCols,
        Prim::Transpose,
        Prim::Sum,
        Prim::Softmax,
        Prim::CrossEntropy,
        Prim::EmbedRow,
    ];
}

fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor<f64> {
    Tensor::from_fn(rows, cols, |_, _| rng.gen_range(-1.5..1.5))
}

/// Checks `sum(C ⊙ op(A, B))` for a random constant `C`, so every output entry carries
/// its own weight. `rows`, `cols` ∈ 1..=5.
pub fn check(prim: Prim, rows: usize, cols: usize, seed: u64) -> GradCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ParameterSet::new();
    let inner = rng.gen_range(1..=4);
    let a = params.insert("a", ParamGroup::Model, random(&mut rng, rows, cols));
    let b_shape = match prim {
        Prim::Matmul => (cols, inner),
        Prim::AddColumn => (rows, 1),
        Prim::ConcatRows => (inner, cols),
        Prim::ConcatCols => (rows, inner),
        _ => (rows, cols),
    };
    let b = params.insert("b", ParamGroup::Model, random(&mut rng, b_shape.0, b_shape.1));
    let mask: Vec<bool> = {
        let mut m: Vec<bool> = (0..cols).map(|_| rng.gen_bool(0.7)).collect();
        m[rng.gen_range(0..cols)] = true;
        m
    };
    let label = rng.gen_range(0..rows.max(cols));
    let row = rng.gen_range(0..rows);
    let weights_seed = rng.gen();
    let scale = rng.gen_range(-2.0..2.0);
    let repeat = rng.gen_range(1..=4);

    let objective = TapeObjective(move |tape: &mut Tape<f64>, p: &ParameterSet<f64>| {
        let (av, bv) = (tape.param(p, a), tape.param(p, b));
        let out: Var = match prim {
            Prim::Matmul => tape.matmul(av, bv)?,
            Prim::Tanh => tape.tanh(av)?,
            Prim::Sigmoid => tape.sigmoid(av)?,
            Prim::Add | Prim::AddColumn => tape.add(av, bv)?,
            Prim::Mul => tape.mul(av, bv)?,
            Prim::Scale => tape.scale(av, scale),
            Prim::BroadcastCols => {
                let first = tape.sum(av);
                let column = tape.concat_rows(first, first)?;
                tape.broadcast_cols(column, repeat)?
            }
            Prim::ConcatRows => tape.concat_rows(av, bv)?,
            Prim::ConcatCols => tape.concat_cols(&[av, bv, av])?,
            Prim::Transpose => tape.transpose(av),
            Prim::Sum => tape.sum(av),
            Prim::Softmax => {
                // Reduce A to one row of scores first.
                let ones = tape.constant(Tensor::filled(1, rows, 1.0));
                let scores = tape.matmul(ones, av)?;
                tape.softmax_masked(scores, &mask)?
            }
            Prim::CrossEntropy => {
                let flat = if rows >= cols {
                    let ones = tape.constant(Tensor::filled(cols, 1, 1.0));
                    tape.matmul(av, ones)?
                } else {
                    let ones = tape.constant(Tensor::filled(1, rows, 1.0));
                    tape.matmul(ones, av)?
                };
                return tape.cross_entropy(flat, label);
            }
            Prim::EmbedRow => tape.embed_row(p, a, row),
        };
        let (r, c) = tape.shape(out);
        let weights = tape.constant(random(&mut ChaCha8Rng::seed_from_u64(weights_seed), r, c));
        let weighted = tape.mul(out, weights)?;
        Ok(tape.sum(weighted))
    });
    grad_check(&objective, &params, DEFAULT_STEP).expect("objective evaluates")
}

/// Deterministic case list: every primitive at `per_prim` random shapes.
pub fn cases(per_prim: usize, seed: u64) -> Vec<(Prim, usize, usize, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Prim::ALL
        .iter()
        .flat_map(|&p| (0..per_prim).map(move |i| (p, i)))
        .map(|(p, _)| (p, rng.gen_range(1..=5), rng.gen_range(1..=5), rng.gen()))
        .collect()
}
