//! Reverse-mode gradient tape.
//!
//! Every forward op stores its output as a node and pushes a backward closure.
//! [`Tape::backward`] replays the closures in reverse, propagating node
//! gradients and accumulating parameter gradients. A tape is single-use.

use ndarray::Array2;

use super::params::{Grads, ParamId, ParamStore};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(pub(crate) usize);

pub(crate) type BackwardFn = Box<dyn FnOnce(&mut BackwardCtx<'_>)>;

pub struct Tape<'p> {
    pub(crate) params: &'p ParamStore,
    values: Vec<Array2<f64>>,
    ops: Vec<BackwardFn>,
    consumed: bool,
}

pub(crate) struct BackwardCtx<'a> {
    pub params: &'a ParamStore,
    pub values: &'a [Array2<f64>],
    node_grads: Vec<Option<Array2<f64>>>,
    pub param_grads: Grads,
}

impl BackwardCtx<'_> {
    /// Takes the upstream gradient of `node`, if anything downstream used it.
    pub fn take(&mut self, node: NodeId) -> Option<Array2<f64>> {
        self.node_grads[node.0].take()
    }

    pub fn value(&self, node: NodeId) -> &Array2<f64> {
        &self.values[node.0]
    }

    pub fn accumulate(&mut self, node: NodeId, g: Array2<f64>) {
        match &mut self.node_grads[node.0] {
            Some(existing) => *existing += &g,
            slot => *slot = Some(g),
        }
    }

    pub fn accumulate_param(&mut self, id: ParamId, g: &Array2<f64>) {
        self.param_grads.add(id, g);
    }
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Self {
            params,
            values: Vec::new(),
            ops: Vec::new(),
            consumed: false,
        }
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    /// Records a constant input.
    pub fn input(&mut self, value: Array2<f64>) -> NodeId {
        self.values.push(value);
        NodeId(self.values.len() - 1)
    }

    pub fn value(&self, node: NodeId) -> &Array2<f64> {
        &self.values[node.0]
    }

    pub(crate) fn record(&mut self, value: Array2<f64>, backward: BackwardFn) -> NodeId {
        let id = self.input(value);
        self.ops.push(backward);
        id
    }

    /// Exact gradients of the scalar `loss` w.r.t. every parameter.
    pub fn backward(&mut self, loss: NodeId) -> Result<Grads> {
        if self.consumed {
            return Err(Error::TapeConsumed);
        }
        if self.values[loss.0].len() != 1 {
            return Err(Error::Shape(format!(
                "loss must be scalar, got {:?}",
                self.values[loss.0].dim()
            )));
        }
        self.consumed = true;
        let mut ctx = BackwardCtx {
            params: self.params,
            values: &self.values,
            node_grads: vec![None; self.values.len()],
            param_grads: self.params.zero_grads(),
        };
        ctx.node_grads[loss.0] = Some(Array2::ones((1, 1)));
        for op in self.ops.drain(..).rev() {
            op(&mut ctx);
        }
        Ok(ctx.param_grads)
    }

    /// Scalar sum of every entry of the given parameters.
    pub fn sum_params(&mut self, ids: &[ParamId]) -> NodeId {
        let total: f64 = ids.iter().map(|&id| self.params.get(id).sum()).sum();
        let ids = ids.to_vec();
        let out = NodeId(self.values.len());
        self.record(
            Array2::from_elem((1, 1), total),
            Box::new(move |ctx| {
                let Some(g) = ctx.take(out) else { return };
                let g = g[[0, 0]];
                for id in ids {
                    let ones = Array2::from_elem(ctx.params.get(id).dim(), g);
                    ctx.accumulate_param(id, &ones);
                }
            }),
        )
    }

    /// Next node id; ops use it to refer to their own output inside closures.
    pub(crate) fn next_id(&self) -> NodeId {
        NodeId(self.values.len())
    }
}
