use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::graph::{Graph, Mat, NodeId};
use crate::nn::tensor::Tensor;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    #[default]
    Tanh,
}

impl Activation {
    pub fn apply(self, g: &mut Graph, x: NodeId) -> NodeId {
        match self {
            Activation::Identity => x,
            Activation::Relu => g.relu(x),
            Activation::Tanh => g.tanh(x),
        }
    }

    pub fn tag(self) -> u32 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
            Activation::Tanh => 2,
        }
    }

    pub fn from_tag(tag: u32) -> Option<Self> {
        Some(match tag {
            0 => Activation::Identity,
            1 => Activation::Relu,
            2 => Activation::Tanh,
            _ => return None,
        })
    }
}

/// `act(x·W + b)` on a tape.
pub fn dense(
    g: &mut Graph,
    x: NodeId,
    w: NodeId,
    b: NodeId,
    act: Activation,
) -> Result<NodeId> {
    let xw = g.matmul(x, w)?;
    let z = g.add_row(xw, b)?;
    Ok(act.apply(g, z))
}

/// Eager dense layer: `input [B×I]`, `weights [I×O]`, `bias [O]`.
pub fn dense_forward(
    input: &Tensor,
    weights: &Tensor,
    bias: &Tensor,
    act: Activation,
) -> Result<Tensor> {
    let (_, i) = input.rows_cols();
    let (wi, wo) = weights.rows_cols();
    if input.shape().len() != 2 || weights.shape().len() != 2 || i != wi {
        return Err(Error::dim("dense_forward", input.shape(), weights.shape()));
    }
    if bias.len() != wo {
        return Err(Error::dim("dense_forward bias", weights.shape(), bias.shape()));
    }
    let mut g = Graph::new();
    let x = g.constant(Mat::from_tensor(input));
    let w = g.constant(Mat::from_tensor(weights));
    let b = g.constant(Mat::new(1, wo, bias.data().to_vec()));
    let out = dense(&mut g, x, w, b, act)?;
    let v = g.value(out);
    Tensor::new(vec![v.rows, v.cols], v.data.clone())
}
