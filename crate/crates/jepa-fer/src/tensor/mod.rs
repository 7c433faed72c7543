//! Dense tensors with reverse-mode automatic differentiation.
//!
//! Every tensor produced by a differentiable operation carries a record of
//! that operation (its inputs and a backward closure). [`backward`] walks
//! the records of a scalar loss in reverse topological order — the [`Tape`]
//! — and accumulates gradients into every reachable tensor that has
//! `requires_grad` set. Tensors without `requires_grad` never receive a
//! gradient, which is how the stop-gradient contract for frozen parameters
//! is enforced structurally rather than by convention.
//!
//! Values are `f32` by default; the same code runs in `f64` for the
//! finite-difference gradient-check oracles.

mod gradcheck;
mod ops;
mod optim;

pub use gradcheck::{gradcheck, gradcheck_report, GradCheckReport, PrimitiveCheck};
pub use optim::{clear_grads, AdamW, AdamWConfig};

use crate::error::{Error, Result};
use std::collections::HashSet;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock, RwLockReadGuard};

/// Scalar types the tensor core is generic over.
pub trait Element:
    num_traits::Float + Send + Sync + fmt::Debug + fmt::Display + 'static
{
    fn from_f64(v: f64) -> Self;
    fn into_f64(self) -> f64;
    fn from_f32(v: f32) -> Self;
    fn into_f32(self) -> f32;
}

impl Element for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn into_f64(self) -> f64 {
        self as f64
    }
    fn from_f32(v: f32) -> Self {
        v
    }
    fn into_f32(self) -> f32 {
        self
    }
}

impl Element for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn into_f64(self) -> f64 {
        self
    }
    fn from_f32(v: f32) -> Self {
        v as f64
    }
    fn into_f32(self) -> f32 {
        self as f32
    }
}

static NEXT_ID: AtomicU64 = AtomicU64::new(0);

/// Context handed to an operation's backward closure.
pub(crate) struct BackwardCtx<'a, E: Element> {
    /// Gradient of the operation's output.
    pub grad: &'a [E],
    /// Forward output values (for ops like softmax that reuse them).
    pub out: &'a [E],
    /// The operation's input tensors, in recording order.
    pub parents: &'a [Tensor<E>],
}

type BackwardFn<E> = Box<dyn Fn(&BackwardCtx<'_, E>) + Send + Sync>;

/// One recorded primitive operation: inputs, output identity (the owning
/// tensor), and the closure that propagates the output gradient.
pub(crate) struct Node<E: Element> {
    pub op: &'static str,
    pub parents: Vec<Tensor<E>>,
    backward: BackwardFn<E>,
}

struct Inner<E: Element> {
    id: u64,
    shape: Vec<usize>,
    values: RwLock<Vec<E>>,
    requires_grad: bool,
    grad: Mutex<Option<Vec<E>>>,
    node: Option<Node<E>>,
}

/// An n-dimensional array of scalars plus its differentiation record.
///
/// Cloning is cheap (shared handle). Values are immutable while a graph
/// that references them is alive; only the optimizer and the EMA update
/// write them in place, between steps, from the single training thread.
pub struct Tensor<E: Element = f32>(Arc<Inner<E>>);

impl<E: Element> Clone for Tensor<E> {
    fn clone(&self) -> Self {
        Tensor(Arc::clone(&self.0))
    }
}

impl<E: Element> fmt::Debug for Tensor<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("id", &self.0.id)
            .field("shape", &self.0.shape)
            .field("requires_grad", &self.0.requires_grad)
            .field("op", &self.0.node.as_ref().map(|n| n.op))
            .finish()
    }
}

impl<E: Element> Tensor<E> {
    fn make(
        shape: Vec<usize>,
        values: Vec<E>,
        requires_grad: bool,
        node: Option<Node<E>>,
    ) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), values.len());
        Tensor(Arc::new(Inner {
            id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
            shape,
            values: RwLock::new(values),
            requires_grad,
            grad: Mutex::new(None),
            node,
        }))
    }

    /// A constant leaf (no gradient will ever be accumulated).
    pub fn new(shape: &[usize], values: Vec<E>) -> Result<Self> {
        if shape.iter().product::<usize>() != values.len() {
            return Err(Error::Dimension {
                op: "new",
                lhs: shape.to_vec(),
                rhs: vec![values.len()],
            });
        }
        Ok(Self::make(shape.to_vec(), values, false, None))
    }

    /// A trainable leaf: participates in backward and optimizer steps.
    pub fn param(shape: &[usize], values: Vec<E>) -> Result<Self> {
        if shape.iter().product::<usize>() != values.len() {
            return Err(Error::Dimension {
                op: "param",
                lhs: shape.to_vec(),
                rhs: vec![values.len()],
            });
        }
        Ok(Self::make(shape.to_vec(), values, true, None))
    }

    pub fn scalar(v: E) -> Self {
        Self::make(vec![], vec![v], false, None)
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self::make(shape.to_vec(), vec![E::zero(); n], false, None)
    }

    pub(crate) fn from_op(
        shape: Vec<usize>,
        values: Vec<E>,
        op: &'static str,
        parents: Vec<Tensor<E>>,
        backward: BackwardFn<E>,
    ) -> Self {
        let requires_grad = parents.iter().any(|p| p.requires_grad());
        let node = if requires_grad {
            Some(Node {
                op,
                parents,
                backward,
            })
        } else {
            None
        };
        Self::make(shape, values, requires_grad, node)
    }

    pub fn id(&self) -> u64 {
        self.0.id
    }

    pub fn shape(&self) -> &[usize] {
        &self.0.shape
    }

    pub fn numel(&self) -> usize {
        self.0.shape.iter().product()
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    /// Whether this tensor was produced by a recorded operation.
    pub fn on_tape(&self) -> bool {
        self.0.node.is_some()
    }

    pub(crate) fn node(&self) -> Option<&Node<E>> {
        self.0.node.as_ref()
    }

    /// Read access to the stored values.
    pub fn values(&self) -> RwLockReadGuard<'_, Vec<E>> {
        self.0.values.read().expect("tensor value lock poisoned")
    }

    pub fn to_vec(&self) -> Vec<E> {
        self.values().clone()
    }

    /// The single stored value of a scalar (or one-element) tensor.
    pub fn item(&self) -> E {
        let v = self.values();
        debug_assert_eq!(v.len(), 1, "item() on tensor with {} elements", v.len());
        v[0]
    }

    /// Overwrite stored values in place. Only the optimizer and EMA update
    /// use this, between training steps.
    pub fn set_values(&self, new: &[E]) -> Result<()> {
        let mut v = self.0.values.write().expect("tensor value lock poisoned");
        if v.len() != new.len() {
            return Err(Error::Dimension {
                op: "set_values",
                lhs: self.0.shape.clone(),
                rhs: vec![new.len()],
            });
        }
        v.copy_from_slice(new);
        Ok(())
    }

    /// Snapshot of the accumulated gradient, if any.
    pub fn grad(&self) -> Option<Vec<E>> {
        self.0.grad.lock().expect("grad lock poisoned").clone()
    }

    pub fn clear_grad(&self) {
        *self.0.grad.lock().expect("grad lock poisoned") = None;
    }

    /// Add `g` into the gradient accumulator. No-op unless `requires_grad`.
    pub(crate) fn accumulate_grad(&self, g: &[E]) {
        if !self.0.requires_grad {
            return;
        }
        debug_assert_eq!(g.len(), self.numel());
        let mut slot = self.0.grad.lock().expect("grad lock poisoned");
        match slot.as_mut() {
            Some(acc) => {
                for (a, &b) in acc.iter_mut().zip(g) {
                    *a = *a + b;
                }
            }
            None => *slot = Some(g.to_vec()),
        }
    }

    /// A constant copy sharing no graph history with `self`.
    pub fn detach(&self) -> Tensor<E> {
        Self::make(self.0.shape.clone(), self.to_vec(), false, None)
    }

    /// Convert element type (used by the f64 gradient-check oracles).
    pub fn cast<T: Element>(&self) -> Tensor<T> {
        let vals = self
            .values()
            .iter()
            .map(|&v| T::from_f64(Element::into_f64(v)))
            .collect();
        Tensor::<T>::make(self.0.shape.clone(), vals, false, None)
    }
}

/// The recorded operations reachable from one output, in topological order:
/// every operation appears after all producers of its inputs.
pub struct Tape<E: Element> {
    nodes: Vec<Tensor<E>>,
}

impl<E: Element> Tape<E> {
    /// Collect the recorded operations beneath `root` (post-order DFS,
    /// deduplicated), so producers precede consumers.
    pub fn trace(root: &Tensor<E>) -> Tape<E> {
        enum Frame<E: Element> {
            Enter(Tensor<E>),
            Exit(Tensor<E>),
        }
        let mut order = Vec::new();
        let mut visited = HashSet::new();
        let mut stack = vec![Frame::Enter(root.clone())];
        while let Some(frame) = stack.pop() {
            match frame {
                Frame::Enter(t) => {
                    if !visited.insert(t.id()) {
                        continue;
                    }
                    if let Some(node) = t.node() {
                        stack.push(Frame::Exit(t.clone()));
                        for p in &node.parents {
                            stack.push(Frame::Enter(p.clone()));
                        }
                    }
                }
                Frame::Exit(t) => order.push(t),
            }
        }
        Tape { nodes: order }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Output tensors of the recorded operations, producers first.
    pub fn outputs(&self) -> &[Tensor<E>] {
        &self.nodes
    }
}

/// Reverse-mode sweep from a scalar loss.
///
/// Seeds the loss gradient with 1, then visits each recorded operation on
/// the tape exactly once, consumers before producers, accumulating into
/// every `requires_grad` tensor. Accumulation across reuse is additive.
pub fn backward<E: Element>(loss: &Tensor<E>) -> Result<()> {
    if loss.numel() != 1 {
        return Err(Error::usage(format!(
            "backward requires a scalar loss, got shape {:?}",
            loss.shape()
        )));
    }
    if loss.node().is_none() {
        return Err(Error::usage(
            "backward on a detached tensor: no operations recorded",
        ));
    }
    let tape = Tape::trace(loss);
    loss.0
        .grad
        .lock()
        .expect("grad lock poisoned")
        .get_or_insert_with(|| vec![E::zero(); 1])[0] = E::one();
    for t in tape.nodes.iter().rev() {
        let g = t.0.grad.lock().expect("grad lock poisoned").clone();
        let Some(g) = g else { continue };
        let out = t.values();
        let node = t.node().expect("tape holds only op outputs");
        let ctx = BackwardCtx {
            grad: &g,
            out: &out,
            parents: &node.parents,
        };
        (node.backward)(&ctx);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_value_mismatch_rejected() {
        assert!(Tensor::<f32>::new(&[2, 2], vec![1.0; 3]).is_err());
    }

    #[test]
    fn sum_backward_is_ones() {
        let x = Tensor::<f32>::param(&[3], vec![1.0, 2.0, 3.0]).unwrap();
        let loss = x.sum();
        backward(&loss).unwrap();
        assert_eq!(x.grad().unwrap(), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn reuse_accumulates_additively() {
        let x = Tensor::<f32>::param(&[2], vec![1.0, 2.0]).unwrap();
        let y = x.scale(3.0);
        let loss = y.sum().add(&y.sum()).unwrap();
        backward(&loss).unwrap();
        assert_eq!(x.grad().unwrap(), vec![6.0, 6.0]);
    }

    #[test]
    fn no_requires_grad_means_no_grad() {
        let x = Tensor::<f32>::new(&[2], vec![1.0, 2.0]).unwrap();
        let w = Tensor::<f32>::param(&[2], vec![3.0, 4.0]).unwrap();
        let loss = x.mul(&w).unwrap().sum();
        backward(&loss).unwrap();
        assert!(x.grad().is_none());
        assert_eq!(w.grad().unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn backward_on_detached_is_usage_error() {
        let x = Tensor::<f32>::param(&[2], vec![1.0, 2.0]).unwrap();
        let y = x.scale(2.0).detach();
        let err = backward(&y.sum()).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
        let leaf = Tensor::<f32>::scalar(1.0);
        assert!(backward(&leaf).is_err());
    }

    #[test]
    fn tape_is_topologically_ordered() {
        let x = Tensor::<f32>::param(&[2], vec![1.0, 2.0]).unwrap();
        let a = x.scale(2.0);
        let b = x.scale(3.0);
        let c = a.add(&b).unwrap();
        let loss = c.sum();
        let tape = Tape::trace(&loss);
        assert_eq!(tape.len(), 4);
        // Every node appears after all of its parents.
        for (i, t) in tape.outputs().iter().enumerate() {
            for p in &t.node().unwrap().parents {
                if p.on_tape() {
                    let pos = tape
                        .outputs()
                        .iter()
                        .position(|q| q.id() == p.id())
                        .expect("parent on tape");
                    assert!(pos < i, "parent after child in tape");
                }
            }
        }
    }

    #[test]
    fn backward_deterministic_bitwise() {
        let run = || {
            let x = Tensor::<f32>::param(&[4], vec![0.1, -0.7, 2.3, 0.004]).unwrap();
            let y = x.gelu().mul(&x.scale(0.5)).unwrap();
            let loss = y.softmax(0).unwrap().sum();
            backward(&loss).unwrap();
            x.grad().unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a, b, "identical graphs must give bit-identical grads");
    }
}
