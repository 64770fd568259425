use crate::error::Result;
use crate::numcore::{Scalar, Tape, Tensor2, Var};

/// Records `-log softmax(logits)[label]` on `tape` as a 1×1 node.
pub fn cross_entropy_loss<T: Scalar>(tape: &mut Tape<T>, logits: Var, label: usize) -> Result<Var> {
    tape.cross_entropy(logits, label)
}

/// Value-only cross-entropy for a 1×C logits row.
pub fn cross_entropy<T: Scalar>(logits: &Tensor2<T>, label: usize) -> Result<T> {
    let mut tape = Tape::new();
    let z = tape.constant(logits.clone());
    let loss = cross_entropy_loss(&mut tape, z, label)?;
    Ok(tape.value(loss).get(0, 0))
}
