//! One-shot L2-norm pruning of the ShuffleNet final convolution.

use crate::arch::{shufflenet, Architecture, ShuffleConfig};
use crate::error::{Error, Result};
use crate::graph::BnSpec;
use crate::model::{head_names, ModelGraph};
use crate::tensor::Tensor;

/// `sqrt(Σ w²)` over each output filter, accumulated in `f64`.
pub fn filter_l2_norms(weight: &Tensor) -> Vec<f64> {
    let oc = weight.batch();
    let per = weight.len().checked_div(oc).unwrap_or(0);
    (0..oc)
        .map(|o| {
            weight.data()[o * per..(o + 1) * per]
                .iter()
                .map(|&v| v as f64 * v as f64)
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

/// Indices of the `k` smallest norms in increasing index order. Equal norms
/// give way to the lower index first.
pub fn select_prune_set(norms: &[f64], k: usize) -> Result<Vec<usize>> {
    if k >= norms.len() {
        return Err(Error::invalid(
            "select_prune_set",
            format!("cannot prune {k} of {} filters", norms.len()),
        ));
    }
    let mut order: Vec<usize> = (0..norms.len()).collect();
    order.sort_by(|&a, &b| norms[a].total_cmp(&norms[b]).then(a.cmp(&b)));
    let mut chosen = order[..k].to_vec();
    chosen.sort_unstable();
    Ok(chosen)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PruneReport {
    pub pruned: Vec<usize>,
    /// Norms of every original filter, ascending.
    pub sorted_norms: Vec<f64>,
    pub total_before: usize,
    pub total_after: usize,
    pub final_conv_before: usize,
    pub final_conv_after: usize,
}

impl PruneReport {
    pub fn pruned_count(&self) -> usize {
        self.pruned.len()
    }

    /// Plain-text table: pruned filters, final conv parameters, total parameters.
    pub fn to_table(&self) -> String {
        let mut s = format!(
            "{:<8} {:>14} {:>17} {:>13}\n",
            "model", "pruned filters", "final conv params", "total params"
        );
        s.push_str(&format!(
            "{:<8} {:>14} {:>17} {:>13}\n",
            "before", 0, self.final_conv_before, self.total_before
        ));
        s.push_str(&format!(
            "{:<8} {:>14} {:>17} {:>13}\n",
            "after",
            self.pruned.len(),
            self.final_conv_after,
            self.total_after
        ));
        s
    }
}

fn keep_rows(t: &Tensor, keep: &[usize]) -> Tensor {
    let [_, c, h, w] = t.dims();
    let per = c * h * w;
    let mut data = Vec::with_capacity(keep.len() * per);
    for &i in keep {
        data.extend_from_slice(&t.data()[i * per..(i + 1) * per]);
    }
    Tensor::new([keep.len(), c, h, w], data).expect("row count")
}

fn keep_columns(t: &Tensor, keep: &[usize]) -> Tensor {
    let [out, inp, _, _] = t.dims();
    let mut data = Vec::with_capacity(out * keep.len());
    for o in 0..out {
        data.extend(keep.iter().map(|&i| t.data()[o * inp + i]));
    }
    Tensor::new([out, keep.len(), 1, 1], data).expect("column count")
}

/// Removes the `k` lowest-norm filters of the final convolution together with
/// the matching batch-norm entries and head columns. Every other tensor is
/// shared with the input model.
pub fn prune_final_conv(model: &ModelGraph, k: usize) -> Result<(ModelGraph, PruneReport)> {
    let Architecture::ShuffleNet(cfg) = model.arch() else {
        return Err(Error::invalid(
            "prune_final_conv",
            format!("`{}` has no prunable final convolution", model.arch()),
        ));
    };
    let w = model.weights();
    let conv = w.get(shufflenet::FINAL_CONV_WEIGHT)?;
    let norms = filter_l2_norms(conv);
    let pruned = select_prune_set(&norms, k)?;
    let keep: Vec<usize> = (0..norms.len()).filter(|i| pruned.binary_search(i).is_err()).collect();

    let new_arch = Architecture::ShuffleNet(ShuffleConfig::new(cfg.final_filters - k)?);
    let graph = new_arch.build_graph_at(model.input_size())?;

    let bn = BnSpec {
        prefix: shufflenet::FINAL_BN_PREFIX.to_string(),
        channels: norms.len(),
        eps: 0.0,
    };
    let (head_w, _) = head_names();
    let mut updates = vec![(shufflenet::FINAL_CONV_WEIGHT.to_string(), keep_rows(conv, &keep))];
    for name in [bn.gamma(), bn.beta(), bn.running_mean(), bn.running_var()] {
        let t = keep_rows(w.get(&name)?, &keep);
        updates.push((name, t));
    }
    updates.push((head_w.to_string(), keep_columns(w.get(head_w)?, &keep)));
    let store = if k == 0 { w.clone() } else { w.with_replaced(updates) };
    let pruned_model = ModelGraph::bind(new_arch, graph.into(), store)?;

    let mut sorted_norms = norms.clone();
    sorted_norms.sort_by(f64::total_cmp);
    let report = PruneReport {
        pruned,
        sorted_norms,
        total_before: model.param_count(),
        total_after: pruned_model.param_count(),
        final_conv_before: shufflenet::final_conv_params(cfg.final_filters),
        final_conv_after: shufflenet::final_conv_params(cfg.final_filters - k),
    };
    Ok((pruned_model, report))
}
