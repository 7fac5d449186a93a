//! Low-rank adapters over a frozen base weight.
//!
//! Every adapter keeps `W = W_res + s·B₀A₀` at construction, where `(B₀, A₀)`
//! is the initial factor pair and `s` the adapter scale (1 by default). The
//! three initialisations differ only in which factors they start from:
//!
//! | kind  | `B₀`                    | `A₀`                    |
//! |-------|-------------------------|-------------------------|
//! | SoMA  | `U[:, -r:] √Σ[-r:]`     | `√Σ[-r:] Vᵀ[-r:, :]`    |
//! | PiSSA | `U[:, :r] √Σ[:r]`       | `√Σ[:r] Vᵀ[:r, :]`      |
//! | LoRA  | `0`                     | Kaiming-uniform         |
//!
//! `W_res` is always formed by explicit subtraction `W − s·B₀A₀`, never by
//! summing the complementary singular components.

use alloc::string::ToString;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{svd, ComponentRange, Matrix, SvdFactors, RANK_TOL};
use crate::{Error, Result};

/// Which adapter initialisation a layer uses. `None` means the weight itself is trained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdapterKind {
    Soma,
    Pissa,
    Lora,
    None,
}

impl AdapterKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Soma => "soma",
            Self::Pissa => "pissa",
            Self::Lora => "lora",
            Self::None => "none",
        }
    }
}

impl fmt::Display for AdapterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AdapterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "soma" => Ok(Self::Soma),
            "pissa" => Ok(Self::Pissa),
            "lora" => Ok(Self::Lora),
            "none" | "fft" | "full" => Ok(Self::None),
            other => Err(Error::InvalidConfig(alloc::format!("unknown adapter kind `{other}`"))),
        }
    }
}

/// Frozen residual plus trainable low-rank factors: `y = W_res·x + s·B(A·x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearAdapter {
    w_res: Matrix,
    b: Matrix,
    a: Matrix,
    b0: Matrix,
    a0: Matrix,
    kind: AdapterKind,
    scale: f64,
    dead_components: usize,
}

/// A dense weight with the adapter folded in.
#[derive(Debug, Clone, PartialEq)]
pub struct MergedLinear {
    pub w: Matrix,
}

fn check_rank(w: &Matrix, r: usize) -> Result<()> {
    let max = w.rows().min(w.cols());
    if r == 0 || r > max {
        return Err(Error::InvalidRank { rank: r, max });
    }
    Ok(())
}

/// `(U[:, range]·√Σ, √Σ·Vᵀ[range, :])`.
fn split_factors(f: &SvdFactors, range: ComponentRange) -> (Matrix, Matrix) {
    let (m, n) = (f.u.rows(), f.vt.cols());
    let r = range.len();
    let roots: Vec<f64> = f.sigma[range.start..range.end].iter().map(|s| libm::sqrt(*s)).collect();
    let b = Matrix::from_fn(m, r, |i, j| f.u[(i, range.start + j)] * roots[j]);
    let a = Matrix::from_fn(r, n, |i, j| roots[i] * f.vt[(range.start + i, j)]);
    (b, a)
}

fn from_spectrum(w: &Matrix, r: usize, kind: AdapterKind, scale: f64) -> Result<LinearAdapter> {
    check_rank(w, r)?;
    let f = svd(w)?;
    let k = f.k();
    let range = match kind {
        AdapterKind::Soma => ComponentRange::bottom(r, k),
        _ => ComponentRange::top(r),
    };
    let cutoff = f.sigma[0] * RANK_TOL;
    let dead_components = f.sigma[range.start..range.end].iter().filter(|&&s| s <= cutoff).count();
    let (b, a) = split_factors(&f, range);
    let w_res = w.sub(&b.matmul(&a)?.scale(scale))?;
    Ok(LinearAdapter { w_res, b0: b.clone(), a0: a.clone(), b, a, kind, scale, dead_components })
}

/// Minor-component adapter: trains the `r` smallest singular directions of `w`.
pub fn soma_init(w: &Matrix, r: usize) -> Result<LinearAdapter> {
    from_spectrum(w, r, AdapterKind::Soma, 1.0)
}

/// Principal-component adapter: trains the `r` largest singular directions of `w`.
pub fn pissa_init(w: &Matrix, r: usize) -> Result<LinearAdapter> {
    from_spectrum(w, r, AdapterKind::Pissa, 1.0)
}

/// Classic LoRA: `B = 0`, `A ~ U(−√(6/n), √(6/n))` with `n` the input width.
pub fn lora_init(w: &Matrix, r: usize, seed: u64) -> Result<LinearAdapter> {
    lora_with_scale(w, r, seed, 1.0)
}

fn lora_with_scale(w: &Matrix, r: usize, seed: u64, scale: f64) -> Result<LinearAdapter> {
    check_rank(w, r)?;
    let (m, n) = w.shape();
    let bound = libm::sqrt(6.0 / n as f64);
    let mut rng = crate::rng::stream(seed, 0x10_7a);
    let a = Matrix::from_fn(r, n, |_, _| rng.random_range(-bound..=bound));
    let b = Matrix::zeros(m, r);
    Ok(LinearAdapter {
        w_res: w.clone(),
        b0: b.clone(),
        a0: a.clone(),
        b,
        a,
        kind: AdapterKind::Lora,
        scale,
        dead_components: 0,
    })
}

impl LinearAdapter {
    /// Dispatches on `kind` with an explicit adapter scale. `AdapterKind::None` is rejected.
    pub fn new(kind: AdapterKind, w: &Matrix, r: usize, seed: u64, scale: f64) -> Result<Self> {
        if !scale.is_finite() {
            return Err(Error::InvalidConfig("adapter scale must be finite".to_string()));
        }
        match kind {
            AdapterKind::Soma | AdapterKind::Pissa => from_spectrum(w, r, kind, scale),
            AdapterKind::Lora => lora_with_scale(w, r, seed, scale),
            AdapterKind::None => Err(Error::InvalidConfig("kind `none` has no adapter".to_string())),
        }
    }

    /// Reassembles an adapter from stored tensors, checking every shape.
    pub fn from_parts(
        kind: AdapterKind,
        scale: f64,
        w_res: Matrix,
        b: Matrix,
        a: Matrix,
        b0: Matrix,
        a0: Matrix,
    ) -> Result<Self> {
        let (m, n) = w_res.shape();
        let r = b.cols();
        let mismatch = |op, x: &Matrix, y: (usize, usize)| Error::DimensionMismatch {
            op,
            left_rows: x.rows(),
            left_cols: x.cols(),
            right_rows: y.0,
            right_cols: y.1,
        };
        if b.shape() != (m, r) {
            return Err(mismatch("adapter b", &b, (m, r)));
        }
        if a.shape() != (r, n) {
            return Err(mismatch("adapter a", &a, (r, n)));
        }
        if b0.shape() != b.shape() {
            return Err(mismatch("adapter b0", &b0, b.shape()));
        }
        if a0.shape() != a.shape() {
            return Err(mismatch("adapter a0", &a0, a.shape()));
        }
        check_rank(&w_res, r)?;
        Ok(Self { w_res, b, a, b0, a0, kind, scale, dead_components: 0 })
    }

    pub fn kind(&self) -> AdapterKind {
        self.kind
    }

    pub fn rank(&self) -> usize {
        self.b.cols()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `(m, n)` of the adapted weight.
    pub fn shape(&self) -> (usize, usize) {
        self.w_res.shape()
    }

    /// Initial components with zero singular value (trainable but dead at init).
    pub fn dead_components(&self) -> usize {
        self.dead_components
    }

    pub fn w_res(&self) -> &Matrix {
        &self.w_res
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b0(&self) -> &Matrix {
        &self.b0
    }

    pub fn a0(&self) -> &Matrix {
        &self.a0
    }

    pub fn b_mut(&mut self) -> &mut Matrix {
        &mut self.b
    }

    pub fn a_mut(&mut self) -> &mut Matrix {
        &mut self.a
    }

    /// `(B, A, B₀, A₀)` with the trainable pair mutable.
    pub(crate) fn factors_mut(&mut self) -> (&mut Matrix, &mut Matrix, &Matrix, &Matrix) {
        (&mut self.b, &mut self.a, &self.b0, &self.a0)
    }

    /// `W_res·x + s·B(A·x)`; `B·A` is never materialised.
    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        let mut y = self.w_res.matmul(x)?;
        let low = self.b.matmul(&self.a.matmul(x)?)?;
        y.as_mut_slice().iter_mut().zip(low.as_slice()).for_each(|(o, l)| *o += self.scale * l);
        Ok(y)
    }

    /// `W′ = W_res + s·B·A`.
    pub fn merge(&self) -> MergedLinear {
        let ba = self.b.matmul(&self.a).expect("adapter factors are shape-checked");
        let mut w = self.w_res.clone();
        w.as_mut_slice().iter_mut().zip(ba.as_slice()).for_each(|(o, v)| *o += self.scale * v);
        MergedLinear { w }
    }

    /// `ΔW = s·(B·A − B₀·A₀)`, the change relative to the base weight.
    pub fn delta(&self) -> Matrix {
        let now = self.b.matmul(&self.a).expect("adapter factors are shape-checked");
        let init = self.b0.matmul(&self.a0).expect("adapter factors are shape-checked");
        let mut d = now.sub(&init).expect("same shape");
        if self.scale != 1.0 {
            d = d.scale(self.scale);
        }
        d
    }

    /// Parameters in the trainable factors, `r·(m + n)`.
    pub fn trainable_params(&self) -> usize {
        let (m, n) = self.shape();
        self.rank() * (m + n)
    }
}

/// Free-function form of [`LinearAdapter::forward`].
pub fn adapter_forward(ad: &LinearAdapter, x: &Matrix) -> Result<Matrix> {
    ad.forward(x)
}

pub fn merge(ad: &LinearAdapter) -> MergedLinear {
    ad.merge()
}

pub fn delta(ad: &LinearAdapter) -> Matrix {
    ad.delta()
}

/// Trainable adapter parameters for a set of `(m, n)` weights at rank `r`: `Σ r·(m + n)`.
pub fn count_trainable(shapes: &[(usize, usize)], r: usize) -> usize {
    shapes.iter().map(|&(m, n)| r * (m + n)).sum()
}
