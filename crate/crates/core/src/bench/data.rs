//! Synthetic multi-domain classification data.
//!
//! Class prototypes are drawn once per master seed. Each domain perturbs
//! prototype-conditioned samples with its own [`DomainSpec`]: rotations in
//! random coordinate planes, a global scale, an additive style offset and
//! Gaussian noise.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::{Error, Result};

/// Distribution from which per-domain shifts are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftConfig {
    /// Rotation angles are uniform on `[-max_rotation, max_rotation]`.
    pub max_rotation: f64,
    /// Number of disjoint coordinate planes rotated (capped at `d_in / 2`).
    pub rotation_planes: usize,
    pub scale_min: f64,
    pub scale_max: f64,
    /// Standard deviation of each style-offset coordinate.
    pub style_std: f64,
    pub noise_std: f64,
}

impl Default for ShiftConfig {
    /// Strong shifts: the family used for fine-tuning source and target domains.
    fn default() -> Self {
        Self {
            max_rotation: 1.0,
            rotation_planes: 16,
            scale_min: 0.7,
            scale_max: 1.4,
            style_std: 1.0,
            noise_std: 0.3,
        }
    }
}

impl ShiftConfig {
    /// Mild shifts, used for the pretraining domains.
    pub fn mild() -> Self {
        Self {
            max_rotation: 0.25,
            rotation_planes: 8,
            scale_min: 0.9,
            scale_max: 1.1,
            style_std: 0.3,
            noise_std: 0.3,
        }
    }

    /// No shift at all.
    pub fn identity() -> Self {
        Self { max_rotation: 0.0, rotation_planes: 0, scale_min: 1.0, scale_max: 1.0, style_std: 0.0, noise_std: 0.0 }
    }
}

/// Shape of the class structure shared by all domains of one master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassConfig {
    pub n_classes: usize,
    pub d_in: usize,
    /// Standard deviation of prototype coordinates.
    pub prototype_std: f64,
    /// Within-class standard deviation around a prototype.
    pub class_spread: f64,
}

/// One domain's transform `x ↦ s·R·x + style + noise`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub domain_id: u32,
    /// Angle applied in every rotation plane (radians).
    pub rotation: f64,
    pub planes: Vec<(usize, usize)>,
    pub scale: f64,
    pub style_shift: Vec<f64>,
    pub noise_std: f64,
}

impl DomainSpec {
    /// The identity transform on `d_in` features.
    pub fn identity(domain_id: u32, d_in: usize) -> Self {
        Self { domain_id, rotation: 0.0, planes: Vec::new(), scale: 1.0, style_shift: alloc::vec![0.0; d_in], noise_std: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0) || !(self.noise_std >= 0.0) {
            return Err(Error::InvalidConfig(alloc::format!("domain {}: scale must be > 0 and noise ≥ 0", self.domain_id)));
        }
        Ok(())
    }

    /// Draws a spec for `domain_id` from `shift`, deterministically in `master_seed`.
    pub fn draw(domain_id: u32, d_in: usize, shift: &ShiftConfig, master_seed: u64) -> Result<Self> {
        let planes_wanted = shift.rotation_planes.min(d_in / 2);
        if shift.rotation_planes > 0 && shift.max_rotation != 0.0 && d_in < 2 {
            return Err(Error::InvalidConfig("rotations need d_in ≥ 2".into()));
        }
        let mut rng = crate::rng::stream(master_seed, 0x1000_0000 + u64::from(domain_id));
        let mut coords: Vec<usize> = (0..d_in).collect();
        coords.shuffle(&mut rng);
        let planes = coords.chunks_exact(2).take(planes_wanted).map(|p| (p[0], p[1])).collect();
        let rotation = if shift.max_rotation > 0.0 { rng.random_range(-shift.max_rotation..=shift.max_rotation) } else { 0.0 };
        let scale = if shift.scale_max > shift.scale_min {
            rng.random_range(shift.scale_min..=shift.scale_max)
        } else {
            shift.scale_min
        };
        let style_shift = (0..d_in)
            .map(|_| shift.style_std * Distribution::<f64>::sample(&StandardNormal, &mut rng))
            .collect();
        let spec = Self { domain_id, rotation, planes, scale, style_shift, noise_std: shift.noise_std };
        spec.validate()?;
        Ok(spec)
    }

    /// Applies the transform (without noise) to one sample in place.
    fn transform(&self, x: &mut [f64]) {
        let (c, s) = (libm::cos(self.rotation), libm::sin(self.rotation));
        for &(i, j) in &self.planes {
            let (a, b) = (x[i], x[j]);
            x[i] = c * a - s * b;
            x[j] = s * a + c * b;
        }
        for (v, shift) in x.iter_mut().zip(&self.style_shift) {
            *v = self.scale * *v + shift;
        }
    }
}

/// Labelled samples as columns of `features`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskDataset {
    /// `d_in × N`.
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub domains: Vec<u32>,
}

impl TaskDataset {
    pub fn new(features: Matrix, labels: Vec<usize>, domains: Vec<u32>) -> Result<Self> {
        if labels.len() != features.cols() || domains.len() != features.cols() {
            return Err(Error::BadLength { rows: features.rows(), cols: features.cols(), len: labels.len() });
        }
        Ok(Self { features, labels, domains })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            features: self.features.select_cols(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            domains: idx.iter().map(|&i| self.domains[i]).collect(),
        }
    }

    /// Column-wise concatenation.
    pub fn concat(parts: &[&TaskDataset]) -> Result<Self> {
        let d = parts.first().ok_or(Error::EmptyData)?.features.rows();
        let n: usize = parts.iter().map(|p| p.len()).sum();
        let mut features = Matrix::zeros(d, n);
        let mut labels = Vec::with_capacity(n);
        let mut domains = Vec::with_capacity(n);
        let mut offset = 0;
        for p in parts {
            if p.features.rows() != d {
                return Err(Error::DimensionMismatch {
                    op: "dataset concat",
                    left_rows: d,
                    left_cols: offset,
                    right_rows: p.features.rows(),
                    right_cols: p.len(),
                });
            }
            for r in 0..d {
                for c in 0..p.len() {
                    features[(r, offset + c)] = p.features[(r, c)];
                }
            }
            labels.extend_from_slice(&p.labels);
            domains.extend_from_slice(&p.domains);
            offset += p.len();
        }
        Ok(Self { features, labels, domains })
    }

    /// Splits each class into a leading `train` part and a trailing evaluation
    /// part of `round(count · eval_fraction)` samples.
    pub fn split(&self, eval_fraction: f64) -> (Self, Self) {
        let classes = self.labels.iter().copied().max().map_or(0, |m| m + 1);
        let mut train = Vec::new();
        let mut eval = Vec::new();
        for c in 0..classes {
            let members: Vec<usize> = (0..self.len()).filter(|&i| self.labels[i] == c).collect();
            let n_eval = libm::round(members.len() as f64 * eval_fraction) as usize;
            let cut = members.len() - n_eval.min(members.len());
            train.extend_from_slice(&members[..cut]);
            eval.extend_from_slice(&members[cut..]);
        }
        (self.subset(&train), self.subset(&eval))
    }
}

/// Class prototypes (`d_in × n_classes`) for a master seed.
pub fn prototypes(classes: &ClassConfig, master_seed: u64) -> Matrix {
    let mut rng = crate::rng::stream(master_seed, 0x5eed);
    Matrix::from_fn(classes.d_in, classes.n_classes, |_, _| {
        classes.prototype_std * Distribution::<f64>::sample(&StandardNormal, &mut rng)
    })
}

/// `n_per_class` samples of every class under `spec`, drawn from `seed`.
pub fn sample_domain(
    spec: &DomainSpec,
    protos: &Matrix,
    class_spread: f64,
    n_per_class: usize,
    seed: u64,
) -> Result<TaskDataset> {
    spec.validate()?;
    let (d, classes) = protos.shape();
    if spec.style_shift.len() != d {
        return Err(Error::BadLength { rows: d, cols: 1, len: spec.style_shift.len() });
    }
    let n = classes * n_per_class;
    let mut rng = crate::rng::stream(seed, 0x2000_0000);
    let mut features = Matrix::zeros(d, n);
    let mut labels = Vec::with_capacity(n);
    let mut x = alloc::vec![0.0; d];
    for c in 0..classes {
        for k in 0..n_per_class {
            for (r, v) in x.iter_mut().enumerate() {
                let e: f64 = StandardNormal.sample(&mut rng);
                *v = protos[(r, c)] + class_spread * e;
            }
            spec.transform(&mut x);
            let col = c * n_per_class + k;
            for (r, v) in x.iter().enumerate() {
                let e: f64 = StandardNormal.sample(&mut rng);
                features[(r, col)] = v + spec.noise_std * e;
            }
            labels.push(c);
        }
    }
    TaskDataset::new(features, labels, alloc::vec![spec.domain_id; n])
}

/// Generator settings for [`gen_domains_with`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainGenConfig {
    pub classes: ClassConfig,
    pub n_domains: usize,
    pub first_domain_id: u32,
    pub n_per_class: usize,
    pub shift: ShiftConfig,
}

/// Default class structure for `n_classes` in `d_in` dimensions.
pub fn default_classes(n_classes: usize, d_in: usize) -> ClassConfig {
    ClassConfig { n_classes, d_in, prototype_std: 1.0, class_spread: 0.8 }
}

/// Domains `0..n_domains` under the default (strong) shift family.
pub fn gen_domains(
    n_domains: usize,
    n_classes: usize,
    d_in: usize,
    n_per_class: usize,
    master_seed: u64,
) -> Result<Vec<TaskDataset>> {
    let cfg = DomainGenConfig {
        classes: default_classes(n_classes, d_in),
        n_domains,
        first_domain_id: 0,
        n_per_class,
        shift: ShiftConfig::default(),
    };
    Ok(gen_domains_with(&cfg, master_seed)?.into_iter().map(|(_, d)| d).collect())
}

/// Domains `first_domain_id..first_domain_id + n_domains` with their specs.
pub fn gen_domains_with(cfg: &DomainGenConfig, master_seed: u64) -> Result<Vec<(DomainSpec, TaskDataset)>> {
    if cfg.n_domains == 0 || cfg.classes.n_classes == 0 || cfg.classes.d_in == 0 || cfg.n_per_class == 0 {
        return Err(Error::InvalidConfig("domain, class, feature and sample counts must be ≥ 1".into()));
    }
    let protos = prototypes(&cfg.classes, master_seed);
    (0..cfg.n_domains)
        .map(|i| {
            let id = cfg.first_domain_id + i as u32;
            let spec = DomainSpec::draw(id, cfg.classes.d_in, &cfg.shift, master_seed)?;
            let seed = crate::rng::stream(master_seed, 0x3000_0000 + u64::from(id)).next_u64();
            let data = sample_domain(&spec, &protos, cfg.classes.class_spread, cfg.n_per_class, seed)?;
            Ok((spec, data))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_domains_with_equal_seeds_coincide() {
        let classes = default_classes(3, 4);
        let protos = prototypes(&classes, 5);
        let a = sample_domain(&DomainSpec::identity(0, 4), &protos, 0.8, 6, 42).unwrap();
        let b = sample_domain(&DomainSpec::identity(1, 4), &protos, 0.8, 6, 42).unwrap();
        assert_eq!(a.features, b.features);
        assert_eq!(a.labels, b.labels);
        assert_eq!(b.domains, alloc::vec![1; 18]);
    }

    #[test]
    fn same_master_seed_is_bit_identical() {
        let a = gen_domains(3, 4, 6, 5, 11).unwrap();
        let b = gen_domains(3, 4, 6, 5, 11).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, gen_domains(3, 4, 6, 5, 12).unwrap());
        assert_eq!(a[2].domains[0], 2);
    }

    #[test]
    fn rotation_needs_two_features() {
        assert!(matches!(gen_domains(1, 2, 1, 3, 0), Err(Error::InvalidConfig(_))));
        let cfg = DomainGenConfig {
            classes: default_classes(2, 1),
            n_domains: 1,
            first_domain_id: 0,
            n_per_class: 3,
            shift: ShiftConfig { max_rotation: 0.0, ..ShiftConfig::default() },
        };
        assert!(gen_domains_with(&cfg, 0).is_ok());
    }

    #[test]
    fn rotation_preserves_norm_before_scaling() {
        let mut spec = DomainSpec::draw(3, 6, &ShiftConfig::default(), 1).unwrap();
        spec.scale = 1.0;
        spec.style_shift = alloc::vec![0.0; 6];
        let mut x = [1.0, -2.0, 0.5, 3.0, 0.0, 1.5];
        let before: f64 = x.iter().map(|v| v * v).sum();
        spec.transform(&mut x);
        let after: f64 = x.iter().map(|v| v * v).sum();
        assert!((before - after).abs() < 1e-12);
    }

    #[test]
    fn split_is_stratified_and_disjoint() {
        let d = &gen_domains(1, 3, 4, 10, 0).unwrap()[0];
        let (train, eval) = d.split(0.3);
        assert_eq!(train.len(), 21);
        assert_eq!(eval.len(), 9);
        for c in 0..3 {
            assert_eq!(eval.labels.iter().filter(|&&l| l == c).count(), 3);
        }
        let whole = TaskDataset::concat(&[&train, &eval]).unwrap();
        assert_eq!(whole.len(), d.len());
    }

    #[test]
    fn invalid_spec_rejected() {
        let mut spec = DomainSpec::identity(0, 2);
        spec.scale = 0.0;
        assert!(spec.validate().is_err());
        spec.scale = 1.0;
        spec.noise_std = -1.0;
        assert!(spec.validate().is_err());
    }
}
