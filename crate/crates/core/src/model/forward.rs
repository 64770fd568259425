//! BiLSTM encoder, structured self-attention and the linear classifier.
//!
//! Every forward pass is recorded on a [`Tape`]; inference simply never
//! calls `backward`, so training and inference share one code path.

use crate::error::{Error, Result};
use crate::ingest::EmbeddedSequence;
use crate::model::{LstmWeights, ModelConfig, ModelParams, ParamSet};
use crate::numcore::{Scalar, Tape, Tensor2, Var};

/// Pre-softmax score assigned to padded positions.
pub const MASK_VALUE: f64 = -1e9;

/// Configuration plus parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T: Scalar = f64> {
    pub config: ModelConfig,
    pub params: ModelParams<T>,
}

impl<T: Scalar> Model<T> {
    pub fn new(config: ModelConfig, params: ModelParams<T>) -> Result<Self> {
        config.validate()?;
        params.check_shapes(&config)?;
        Ok(Self { config, params })
    }

    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        let params = crate::model::init_params(&config, seed)?;
        Ok(Self { config, params })
    }

    fn check_input(&self, x: &EmbeddedSequence<T>) -> Result<()> {
        let expected = (self.config.seq_len, self.config.input_dim);
        if x.matrix.shape() != expected {
            return Err(Error::shape("model input", x.matrix.shape(), expected));
        }
        Ok(())
    }

    pub fn forward(&self, x: &EmbeddedSequence<T>) -> Result<ForwardOutput<T>> {
        classify_forward(x, self)
    }
}

/// Values produced by one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput<T: Scalar = f64> {
    /// L × 2u BiLSTM states.
    pub h: Tensor2<T>,
    /// r × L attention; rows sum to one.
    pub a: Tensor2<T>,
    /// r × 2u attended states.
    pub m: Tensor2<T>,
    /// 1 × (r·2u), `m` flattened row-major.
    pub content: Tensor2<T>,
    /// 1 × C unnormalized class scores.
    pub logits: Tensor2<T>,
}

impl<T: Scalar> ForwardOutput<T> {
    pub fn probabilities(&self) -> Tensor2<T> {
        self.logits.softmax_rows()
    }

    /// Index of the highest logit; the lowest index wins ties.
    pub fn predicted_class(&self) -> usize {
        argmax(self.logits.data())
    }
}

pub(crate) fn argmax<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// The flattened attended states, 1 × (r·2u).
pub fn extract_content_embedding<T: Scalar>(output: &ForwardOutput<T>) -> Tensor2<T> {
    output.content.clone()
}

/// Tape handles of a recorded forward pass.
#[derive(Debug)]
pub struct ForwardGraph<T: Scalar = f64> {
    pub tape: Tape<T>,
    pub params: ParamSet<Var>,
    pub h: Var,
    pub a: Var,
    pub m: Var,
    pub content: Var,
    pub logits: Var,
}

impl<T: Scalar> ForwardGraph<T> {
    pub fn output(&self) -> ForwardOutput<T> {
        ForwardOutput {
            h: self.tape.value(self.h).clone(),
            a: self.tape.value(self.a).clone(),
            m: self.tape.value(self.m).clone(),
            content: self.tape.value(self.content).clone(),
            logits: self.tape.value(self.logits).clone(),
        }
    }

    /// Gradients of the last backward pass, one per parameter.
    pub fn param_grads(&self) -> ModelParams<T> {
        self.params.map(|_, &v| self.tape.grad(v))
    }
}

/// Records the full classifier on a fresh tape with parameters as leaves.
pub fn record_forward<T: Scalar>(
    x: &EmbeddedSequence<T>,
    model: &Model<T>,
) -> Result<ForwardGraph<T>> {
    model.check_input(x)?;
    let mut tape = Tape::new();
    let params = model.params.map(|_, t| tape.leaf(t.clone()));
    let h = bilstm_on_tape(&mut tape, &x.matrix, &params)?;
    let (a, m) = attention_on_tape(&mut tape, h, x.valid_len, &params)?;
    let content = tape.flatten(m);
    let scores = tape.matmul(content, params.classifier_w)?;
    let logits = tape.add(scores, params.classifier_b)?;
    Ok(ForwardGraph {
        tape,
        params,
        h,
        a,
        m,
        content,
        logits,
    })
}

pub fn classify_forward<T: Scalar>(
    x: &EmbeddedSequence<T>,
    model: &Model<T>,
) -> Result<ForwardOutput<T>> {
    Ok(record_forward(x, model)?.output())
}

/// L × 2u hidden states for an input sequence.
pub fn bilstm_forward<T: Scalar>(x: &EmbeddedSequence<T>, model: &Model<T>) -> Result<Tensor2<T>> {
    model.check_input(x)?;
    let mut tape = Tape::new();
    let params = model.params.map(|_, t| tape.constant(t.clone()));
    let h = bilstm_on_tape(&mut tape, &x.matrix, &params)?;
    Ok(tape.value(h).clone())
}

/// Attention weights `A` (r × L) and attended states `M` (r × 2u) for given
/// BiLSTM outputs, with positions at or after `valid_len` masked out.
pub fn attention_forward<T: Scalar>(
    h: &Tensor2<T>,
    valid_len: usize,
    params: &ModelParams<T>,
) -> Result<(Tensor2<T>, Tensor2<T>)> {
    let mut tape = Tape::new();
    let vars = params.map(|_, t| tape.constant(t.clone()));
    let h = tape.constant(h.clone());
    let (a, m) = attention_on_tape(&mut tape, h, valid_len, &vars)?;
    Ok((tape.value(a).clone(), tape.value(m).clone()))
}

/// One LSTM step on plain tensors: returns `(h_t, c_t)`.
pub fn lstm_cell<T: Scalar>(
    x_t: &Tensor2<T>,
    h_prev: &Tensor2<T>,
    c_prev: &Tensor2<T>,
    weights: &LstmWeights<Tensor2<T>>,
) -> Result<(Tensor2<T>, Tensor2<T>)> {
    let mut tape = Tape::new();
    let w = LstmWeights {
        input_w: tape.constant(weights.input_w.clone()),
        input_b: tape.constant(weights.input_b.clone()),
        forget_w: tape.constant(weights.forget_w.clone()),
        forget_b: tape.constant(weights.forget_b.clone()),
        cell_w: tape.constant(weights.cell_w.clone()),
        cell_b: tape.constant(weights.cell_b.clone()),
        output_w: tape.constant(weights.output_w.clone()),
        output_b: tape.constant(weights.output_b.clone()),
    };
    let x = tape.constant(x_t.clone());
    let h = tape.constant(h_prev.clone());
    let c = tape.constant(c_prev.clone());
    let (h, c) = lstm_step(&mut tape, x, h, c, &w)?;
    Ok((tape.value(h).clone(), tape.value(c).clone()))
}

fn lstm_step<T: Scalar>(
    tape: &mut Tape<T>,
    x: Var,
    h_prev: Var,
    c_prev: Var,
    w: &LstmWeights<Var>,
) -> Result<(Var, Var)> {
    let z = tape.concat_cols(x, h_prev)?;
    let gate = |tape: &mut Tape<T>, weight: Var, bias: Var| -> Result<Var> {
        let pre = tape.matmul(z, weight)?;
        tape.add(pre, bias)
    };
    let i = gate(tape, w.input_w, w.input_b)?;
    let i = tape.sigmoid(i);
    let f = gate(tape, w.forget_w, w.forget_b)?;
    let f = tape.sigmoid(f);
    let g = gate(tape, w.cell_w, w.cell_b)?;
    let g = tape.tanh(g);
    let o = gate(tape, w.output_w, w.output_b)?;
    let o = tape.sigmoid(o);

    let keep = tape.hadamard(f, c_prev)?;
    let write = tape.hadamard(i, g)?;
    let c = tape.add(keep, write)?;
    let squashed = tape.tanh(c);
    let h = tape.hadamard(o, squashed)?;
    Ok((h, c))
}

fn lstm_direction<T: Scalar>(
    tape: &mut Tape<T>,
    inputs: &[Var],
    w: &LstmWeights<Var>,
    hidden: usize,
    reverse: bool,
) -> Result<Vec<Var>> {
    let mut h = tape.constant(Tensor2::zeros(1, hidden));
    let mut c = tape.constant(Tensor2::zeros(1, hidden));
    let mut states = vec![h; inputs.len()];
    let order: Box<dyn Iterator<Item = usize>> = if reverse {
        Box::new((0..inputs.len()).rev())
    } else {
        Box::new(0..inputs.len())
    };
    for t in order {
        (h, c) = lstm_step(tape, inputs[t], h, c, w)?;
        states[t] = h;
    }
    Ok(states)
}

fn bilstm_on_tape<T: Scalar>(
    tape: &mut Tape<T>,
    x: &Tensor2<T>,
    params: &ParamSet<Var>,
) -> Result<Var> {
    let hidden = tape.value(params.forward.input_w).cols();
    let gate_rows = tape.value(params.forward.input_w).rows();
    if x.cols() + hidden != gate_rows {
        return Err(Error::shape(
            "bilstm input",
            x.shape(),
            (x.rows(), gate_rows - hidden),
        ));
    }
    let inputs = (0..x.rows())
        .map(|t| Ok(tape.constant(x.row_tensor(t)?)))
        .collect::<Result<Vec<Var>>>()?;
    let fwd = lstm_direction(tape, &inputs, &params.forward, hidden, false)?;
    let bwd = lstm_direction(tape, &inputs, &params.backward, hidden, true)?;
    let fwd = tape.stack_rows(&fwd)?;
    let bwd = tape.stack_rows(&bwd)?;
    tape.concat_cols(fwd, bwd)
}

fn attention_on_tape<T: Scalar>(
    tape: &mut Tape<T>,
    h: Var,
    valid_len: usize,
    params: &ParamSet<Var>,
) -> Result<(Var, Var)> {
    let len = tape.value(h).rows();
    if valid_len > len {
        return Err(Error::Contract(format!(
            "valid_len {valid_len} exceeds sequence length {len}"
        )));
    }
    if valid_len == 0 {
        return Err(Error::Contract("attention over an empty sequence".into()));
    }
    let ht = tape.transpose(h);
    let hidden = tape.matmul(params.ws1, ht)?;
    let hidden = tape.tanh(hidden);
    let mut scores = tape.matmul(params.ws2, hidden)?;
    if valid_len < len {
        let hops = tape.value(scores).rows();
        let mut mask = Tensor2::zeros(hops, len);
        for r in 0..hops {
            for c in valid_len..len {
                mask.set(r, c, T::of(MASK_VALUE));
            }
        }
        let mask = tape.constant(mask);
        scores = tape.add(scores, mask)?;
    }
    let a = tape.softmax_rows(scores);
    let m = tape.matmul(a, h)?;
    Ok((a, m))
}

/// Cross-entropy loss and parameter gradients for one labelled sample.
pub fn loss_and_grads<T: Scalar>(
    x: &EmbeddedSequence<T>,
    label: usize,
    model: &Model<T>,
) -> Result<(T, Tensor2<T>, ModelParams<T>)> {
    let mut graph = record_forward(x, model)?;
    let loss = graph.tape.cross_entropy(graph.logits, label)?;
    graph.tape.backward(loss)?;
    let value = graph.tape.value(loss).get(0, 0);
    let logits = graph.tape.value(graph.logits).clone();
    Ok((value, logits, graph.param_grads()))
}
