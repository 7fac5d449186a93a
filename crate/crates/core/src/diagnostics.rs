//! Interference diagnostics: singular modulation ratios and truncation studies.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::linalg::{dot, reconstruct, svd, ComponentRange, Matrix, SvdFactors, RANK_TOL};
use crate::train::{BlockModel, LayerId, LayerWeight};
use crate::{Error, Result};

/// Per-direction singular modulation ratios `|uᵢᵀ ΔW vᵢ| / σᵢ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmrReport {
    /// One value per singular direction above the rank tolerance, descending σ.
    pub values: Vec<f64>,
    /// Mean per contiguous group; group 0 holds the largest singular values.
    pub group_means: Vec<f64>,
    pub n_groups: usize,
    /// Directions dropped because `σᵢ ≤ RANK_TOL·σ₀`.
    pub excluded: usize,
}

impl SmrReport {
    /// Attaches group means over `n_groups` contiguous groups.
    pub fn grouped(mut self, n_groups: usize) -> Result<Self> {
        self.group_means = group_smr(&self.values, n_groups)?;
        self.n_groups = n_groups;
        Ok(self)
    }
}

/// SMR of `delta_w` against the spectrum of `w0`.
pub fn smr(w0: &Matrix, delta_w: &Matrix) -> Result<SmrReport> {
    if w0.shape() != delta_w.shape() {
        return Err(Error::DimensionMismatch {
            op: "smr",
            left_rows: w0.rows(),
            left_cols: w0.cols(),
            right_rows: delta_w.rows(),
            right_cols: delta_w.cols(),
        });
    }
    smr_with_factors(&svd(w0)?, delta_w)
}

/// SMR against precomputed factors of the base weight.
pub fn smr_with_factors(f: &SvdFactors, delta_w: &Matrix) -> Result<SmrReport> {
    if (f.u.rows(), f.vt.cols()) != delta_w.shape() {
        return Err(Error::DimensionMismatch {
            op: "smr",
            left_rows: f.u.rows(),
            left_cols: f.vt.cols(),
            right_rows: delta_w.rows(),
            right_cols: delta_w.cols(),
        });
    }
    let s0 = f.sigma.first().copied().unwrap_or(0.0);
    if s0 == 0.0 {
        return Err(Error::NoSpectrum);
    }
    let cutoff = s0 * RANK_TOL;
    let kept = f.sigma.iter().take_while(|&&s| s > cutoff).count();
    let m = delta_w.rows();
    let mut values = Vec::with_capacity(kept);
    let mut dv = alloc::vec![0.0; m];
    for i in 0..kept {
        let v = f.vt.row(i);
        for (r, out) in dv.iter_mut().enumerate() {
            *out = dot(delta_w.row(r), v);
        }
        let proj: f64 = (0..m).map(|r| f.u[(r, i)] * dv[r]).sum();
        values.push(libm::fabs(proj) / f.sigma[i]);
    }
    Ok(SmrReport { values, group_means: Vec::new(), n_groups: 0, excluded: f.k() - kept })
}

/// Means over `n_groups` contiguous groups of equal size; the last group absorbs
/// any remainder.
pub fn group_smr(values: &[f64], n_groups: usize) -> Result<Vec<f64>> {
    if n_groups == 0 || n_groups > values.len() {
        return Err(Error::InvalidGroups { groups: n_groups, len: values.len() });
    }
    let size = values.len() / n_groups;
    Ok((0..n_groups)
        .map(|g| {
            let end = if g + 1 == n_groups { values.len() } else { (g + 1) * size };
            let slice = &values[g * size..end];
            slice.iter().sum::<f64>() / slice.len() as f64
        })
        .collect())
}

/// Metric after removing each component group from a set of layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationStudy {
    pub ranges: Vec<ComponentRange>,
    pub labels: Vec<String>,
    pub metric_before: f64,
    pub metric_after: Vec<f64>,
}

fn plain_weight(model: &mut BlockModel, id: LayerId) -> Result<&mut Matrix> {
    let layer = model.layer_mut(id).ok_or_else(|| Error::NotPlain(format!("{id} (missing)")))?;
    match &mut layer.weight {
        LayerWeight::Frozen(w) | LayerWeight::Trainable { w, .. } => Ok(w),
        LayerWeight::Adapter(_) => Err(Error::NotPlain(format!("{id}"))),
    }
}

/// For each range, replaces every selected layer's weight `W` by
/// `W − reconstruct(svd(W), range)`, evaluates, and restores the original
/// weights bit for bit (also when `eval` fails).
pub fn truncation_study<F>(
    model: &mut BlockModel,
    select: impl Fn(LayerId) -> bool,
    ranges: &[ComponentRange],
    mut eval: F,
) -> Result<TruncationStudy>
where
    F: FnMut(&BlockModel) -> Result<f64>,
{
    let ids: Vec<LayerId> = model.layer_ids().into_iter().filter(|&id| select(id)).collect();
    let mut originals = Vec::with_capacity(ids.len());
    let mut spectra = Vec::with_capacity(ids.len());
    for &id in &ids {
        let w = plain_weight(model, id)?.clone();
        let f = svd(&w)?;
        for r in ranges {
            r.validate(f.k()).map_err(|_| {
                Error::InvalidConfig(format!("range {}:{} invalid for layer {id} with {} components", r.start, r.end, f.k()))
            })?;
        }
        originals.push(w);
        spectra.push(f);
    }
    let metric_before = eval(model)?;
    let mut metric_after = Vec::with_capacity(ranges.len());
    for &range in ranges {
        let mut outcome = Ok(());
        for ((&id, w), f) in ids.iter().zip(&originals).zip(&spectra) {
            match reconstruct(f, range).and_then(|part| w.sub(&part)) {
                Ok(truncated) => *plain_weight(model, id)? = truncated,
                Err(e) => {
                    outcome = Err(e);
                    break;
                }
            }
        }
        let metric = outcome.and_then(|_| eval(model));
        for (&id, w) in ids.iter().zip(&originals) {
            *plain_weight(model, id)? = w.clone();
        }
        metric_after.push(metric?);
    }
    Ok(TruncationStudy {
        ranges: ranges.to_vec(),
        labels: ranges.iter().map(|r| format!("{}:{}", r.start, r.end)).collect(),
        metric_before,
        metric_after,
    })
}
