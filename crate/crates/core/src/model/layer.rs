use crate::error::{Error, Result};
use crate::graph::{spmm, Graph};
use crate::matrix::{matmul, matmul_nt, matmul_tn, DenseMatrix};
use crate::nn::Activation;

/// Output of one layer together with the pre-activation it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerOutput {
    pub pre_activation: DenseMatrix,
    pub output: DenseMatrix,
}

/// What the lazy-update trainers need from a layer `X^k = f(X^{k-1}; E^k)`.
///
/// Every method touches only the layer's immediate inputs and outputs, so
/// costs stay single-hop.
pub trait GraphLayer {
    fn forward(&self, graph: &Graph, x_prev: &DenseMatrix) -> Result<LayerOutput>;

    /// `Σ_{i,p} α_ip ∂X^k_ip/∂E^k` with `α` held constant.
    fn param_grad(
        &self,
        graph: &Graph,
        alpha: &DenseMatrix,
        x_prev: &DenseMatrix,
        pre_act: &DenseMatrix,
    ) -> Result<DenseMatrix>;

    /// `Σ_{i,q} α_iq ∂X^k_iq/∂X^{k-1}_jp` with `α` held constant.
    fn input_grad(
        &self,
        graph: &Graph,
        alpha: &DenseMatrix,
        pre_act: &DenseMatrix,
    ) -> Result<DenseMatrix>;
}

/// `X^k = σ(Ā X^{k-1} W^k)`
#[derive(Debug, Clone, Copy)]
pub struct ClassicalLayer<'a> {
    pub weight: &'a DenseMatrix,
    pub activation: Activation,
}

impl ClassicalLayer<'_> {
    fn check_alpha(&self, alpha: &DenseMatrix, pre_act: &DenseMatrix, op: &'static str) -> Result<()> {
        if alpha.shape() != pre_act.shape() || alpha.cols() != self.weight.cols() {
            return Err(Error::shape(
                op,
                format!(
                    "alpha {:?}, pre-activation {:?}, weight {:?}",
                    alpha.shape(),
                    pre_act.shape(),
                    self.weight.shape()
                ),
            ));
        }
        Ok(())
    }

    /// `α ⊙ σ'(Z)`
    fn gated(&self, alpha: &DenseMatrix, pre_act: &DenseMatrix) -> Result<DenseMatrix> {
        let act = self.activation;
        let mut out = alpha.clone();
        for (o, &z) in out.as_mut_slice().iter_mut().zip(pre_act.as_slice()) {
            *o *= act.derivative(z);
        }
        Ok(out)
    }

    /// Parameter gradient from an already aggregated input `Ā X^{k-1}`,
    /// summed over `rows` only and multiplied by `scale`. Pre-activations are
    /// recomputed for those rows from the current weight.
    pub fn param_grad_rows(
        &self,
        aggregated: &DenseMatrix,
        alpha: &DenseMatrix,
        rows: &[usize],
        scale: f64,
    ) -> Result<DenseMatrix> {
        if aggregated.cols() != self.weight.rows() || alpha.cols() != self.weight.cols() {
            return Err(Error::shape(
                "param_grad_rows",
                format!(
                    "aggregated {:?}, alpha {:?}, weight {:?}",
                    aggregated.shape(),
                    alpha.shape(),
                    self.weight.shape()
                ),
            ));
        }
        let agg_rows = aggregated.select_rows(rows);
        let pre = matmul(&agg_rows, self.weight)?;
        let mut gated = self.gated(&alpha.select_rows(rows), &pre)?;
        if scale != 1.0 {
            gated.scale(scale);
        }
        matmul_tn(&agg_rows, &gated)
    }
}

impl GraphLayer for ClassicalLayer<'_> {
    fn forward(&self, graph: &Graph, x_prev: &DenseMatrix) -> Result<LayerOutput> {
        if x_prev.cols() != self.weight.rows() {
            return Err(Error::shape(
                "layer_forward",
                format!("input {:?} vs weight {:?}", x_prev.shape(), self.weight.shape()),
            ));
        }
        let aggregated = spmm(graph.adjacency(), x_prev)?;
        let pre_activation = matmul(&aggregated, self.weight)?;
        let act = self.activation;
        let output = pre_activation.map(|z| act.apply(z));
        Ok(LayerOutput {
            pre_activation,
            output,
        })
    }

    fn param_grad(
        &self,
        graph: &Graph,
        alpha: &DenseMatrix,
        x_prev: &DenseMatrix,
        pre_act: &DenseMatrix,
    ) -> Result<DenseMatrix> {
        self.check_alpha(alpha, pre_act, "layer_param_grad")?;
        if x_prev.cols() != self.weight.rows() || x_prev.rows() != alpha.rows() {
            return Err(Error::shape(
                "layer_param_grad",
                format!("input {:?} vs weight {:?}", x_prev.shape(), self.weight.shape()),
            ));
        }
        let aggregated = spmm(graph.adjacency(), x_prev)?;
        matmul_tn(&aggregated, &self.gated(alpha, pre_act)?)
    }

    /// `Ā^T (α ⊙ σ'(Z)) W^T`; Ā is symmetric, so one spmm with Ā suffices.
    fn input_grad(
        &self,
        graph: &Graph,
        alpha: &DenseMatrix,
        pre_act: &DenseMatrix,
    ) -> Result<DenseMatrix> {
        self.check_alpha(alpha, pre_act, "alpha_backstep")?;
        let projected = matmul_nt(&self.gated(alpha, pre_act)?, self.weight)?;
        spmm(graph.adjacency(), &projected)
    }
}
