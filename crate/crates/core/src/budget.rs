//! Storage accounting for raw and compressed soft labels.
//!
//! Sizes are bytes unless a name says otherwise. `GiB`/`MiB` use 1024-based
//! divisors throughout; with that convention the raw label size for
//! IPC 10, 1000 classes and 300 epochs is exactly 5.588 GiB to three places.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIB: f64 = 1024.0 * 1024.0;
pub const GIB: f64 = 1024.0 * 1024.0 * 1024.0;

/// Largest codebook the level-set walk will emit.
pub const MAX_LEVEL_SET_CODES: u64 = 1 << 32;

/// Inputs shared by every storage formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetSpec {
    /// Images per class.
    pub ipc: u64,
    pub num_classes: u64,
    pub epochs: u64,
    /// Augmented views cached per epoch.
    pub aug_per_epoch: u64,
    pub latent_dim: u64,
    pub code_dim: u64,
    pub num_codes: u64,
    /// Bytes per stored label scalar (half precision).
    pub label_bytes: u64,
    /// Bytes per codec parameter (single precision).
    pub param_bytes: u64,
}

impl BudgetSpec {
    pub fn new(ipc: u64, num_classes: u64, epochs: u64) -> Self {
        Self {
            ipc,
            num_classes,
            epochs,
            aug_per_epoch: 1,
            latent_dim: 0,
            code_dim: 0,
            num_codes: 0,
            label_bytes: 2,
            param_bytes: 4,
        }
    }

    pub fn with_vq(mut self, latent_dim: u64, code_dim: u64, num_codes: u64) -> Self {
        self.latent_dim = latent_dim;
        self.code_dim = code_dim;
        self.num_codes = num_codes;
        self
    }

    /// Number of cached label rows: `ipc * C * epochs * aug_per_epoch`.
    pub fn rows(&self) -> Result<u128> {
        self.check_base()?;
        Ok(self.ipc as u128
            * self.num_classes as u128
            * self.epochs as u128
            * self.aug_per_epoch as u128)
    }

    fn check_base(&self) -> Result<()> {
        if self.ipc == 0
            || self.num_classes == 0
            || self.epochs == 0
            || self.aug_per_epoch == 0
            || self.label_bytes == 0
            || self.param_bytes == 0
        {
            return Err(Error::param(format!("budget fields must be positive: {self:?}")));
        }
        Ok(())
    }

    fn check_vq(&self) -> Result<()> {
        self.check_base()?;
        if self.latent_dim == 0 || self.code_dim == 0 || self.num_codes == 0 {
            return Err(Error::param("latent_dim, code_dim and num_codes must be positive"));
        }
        if !self.latent_dim.is_multiple_of(self.code_dim) {
            return Err(Error::param(format!(
                "latent dim {} is not divisible by code dim {}",
                self.latent_dim, self.code_dim
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageComponent {
    pub name: String,
    pub bytes: f64,
}

/// Raw versus compressed size for one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageReport {
    pub method: String,
    pub raw_bytes: f64,
    pub compressed_bytes: f64,
    pub ratio: f64,
    pub components: Vec<StorageComponent>,
    /// False when a fractional bit width had to be rounded up.
    pub exact: bool,
    /// Payload bytes once each label row is padded to a byte boundary, for
    /// formats that pad.
    pub padded_bytes: Option<f64>,
}

impl StorageReport {
    fn build(method: &str, raw_bytes: f64, components: Vec<(&str, f64)>, exact: bool) -> Self {
        let compressed_bytes = components.iter().map(|(_, b)| b).sum::<f64>();
        Self {
            method: method.to_string(),
            raw_bytes,
            compressed_bytes,
            ratio: raw_bytes / compressed_bytes,
            components: components
                .into_iter()
                .map(|(name, bytes)| StorageComponent {
                    name: name.to_string(),
                    bytes,
                })
                .collect(),
            exact,
            padded_bytes: None,
        }
    }

    pub fn raw_gib(&self) -> f64 {
        self.raw_bytes / GIB
    }

    pub fn compressed_gib(&self) -> f64 {
        self.compressed_bytes / GIB
    }

    pub fn compressed_mib(&self) -> f64 {
        self.compressed_bytes / MIB
    }

    pub fn component(&self, name: &str) -> Option<f64> {
        self.components.iter().find(|c| c.name == name).map(|c| c.bytes)
    }
}

/// Uncompressed labels: `rows * C * label_bytes`.
pub fn raw_label_bytes(spec: &BudgetSpec) -> Result<u128> {
    let total = spec
        .rows()?
        .checked_mul(spec.num_classes as u128)
        .and_then(|v| v.checked_mul(spec.label_bytes as u128))
        .ok_or_else(|| Error::param("raw label size overflows u128"))?;
    Ok(total)
}

/// `log2(values)` for the bit-width formulas, and whether it is integral.
fn log2_exact(values: u64) -> (f64, bool) {
    if values.is_power_of_two() {
        (values.trailing_zeros() as f64, true)
    } else {
        ((values as f64).log2().ceil(), false)
    }
}

/// Indices, decoder and codebook of the autoencoder codec.
///
/// Batch data is `rows * (d_h / d_c) * log2(k) / 8`; a non-power-of-two `k`
/// is charged `ceil(log2 k)` bits and the report is marked inexact.
pub fn vq_bytes(spec: &BudgetSpec) -> Result<StorageReport> {
    spec.check_vq()?;
    let rows = spec.rows()?;
    let m = (spec.latent_dim / spec.code_dim) as u128;
    let (bits, exact) = log2_exact(spec.num_codes);
    let bits = bits as u128;
    let batch = (rows * m * bits) as f64 / 8.0;
    let decoder = (spec.num_classes as u128 * spec.latent_dim as u128 * spec.param_bytes as u128) as f64;
    let codebook = (spec.num_codes as u128 * spec.code_dim as u128 * spec.param_bytes as u128) as f64;
    let raw = raw_label_bytes(spec)? as f64;
    let mut report = StorageReport::build(
        "vqae",
        raw,
        vec![("batch", batch), ("decoder", decoder), ("codebook", codebook)],
        exact,
    );
    let padded_rows = rows * (m * bits).div_ceil(8);
    report.padded_bytes = Some(padded_rows as f64 + decoder + codebook);
    Ok(report)
}

/// Raw bytes over autoencoder bytes. A single code stores no index bits and
/// is rejected.
pub fn compression_ratio(spec: &BudgetSpec) -> Result<f64> {
    if spec.num_codes == 1 {
        return Err(Error::param("a one-entry codebook has no index cost; ratio undefined"));
    }
    Ok(vq_bytes(spec)?.ratio)
}

/// Per-label cost class `d_c / log2 k`, which the ratio approaches as the
/// number of epochs grows.
pub fn asymptotic_ratio_class(code_dim: u64, num_codes: u64) -> Result<f64> {
    if num_codes < 2 {
        return Err(Error::param("need at least two codes"));
    }
    let log2k = if num_codes.is_power_of_two() {
        num_codes.trailing_zeros() as f64
    } else {
        (num_codes as f64).log2()
    };
    Ok(code_dim as f64 / log2k)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelSet {
    /// `(k, d_c)` pairs.
    pub points: Vec<(u64, u64)>,
    /// True when the walk stopped early because `k` would exceed
    /// [`MAX_LEVEL_SET_CODES`].
    pub truncated: bool,
}

/// Doubles `d_c` and squares `k` `steps` times, keeping `d_c / log2 k` fixed.
pub fn level_set(code_dim: u64, num_codes: u64, steps: usize) -> Result<LevelSet> {
    if num_codes < 2 || code_dim == 0 {
        return Err(Error::param("level sets need k >= 2 and d_c >= 1"));
    }
    let mut points = vec![(num_codes, code_dim)];
    let (mut k, mut d_c) = (num_codes, code_dim);
    for _ in 0..steps {
        let next_k = k.checked_mul(k).filter(|&v| v <= MAX_LEVEL_SET_CODES);
        let next_d = d_c.checked_mul(2);
        match (next_k, next_d) {
            (Some(nk), Some(nd)) => {
                k = nk;
                d_c = nd;
                points.push((k, d_c));
            }
            _ => {
                log::warn!(
                    "level set from (k={num_codes}, d_c={code_dim}) truncated after {} points",
                    points.len()
                );
                return Ok(LevelSet {
                    points,
                    truncated: true,
                });
            }
        }
    }
    Ok(LevelSet {
        points,
        truncated: false,
    })
}

/// Top-k values at label precision plus `log2(C) / 8` bytes per kept index.
pub fn topk_bytes(spec: &BudgetSpec, k_top: u64) -> Result<StorageReport> {
    spec.check_base()?;
    if k_top == 0 || k_top > spec.num_classes {
        return Err(Error::param(format!(
            "k_top = {k_top} must be in 1..={}",
            spec.num_classes
        )));
    }
    let rows = spec.rows()? as f64;
    let values = rows * (spec.label_bytes * k_top) as f64;
    let indices = rows * (spec.num_classes as f64).log2() / 8.0 * k_top as f64;
    Ok(StorageReport::build(
        "topk",
        raw_label_bytes(spec)? as f64,
        vec![("values", values), ("indices", indices)],
        spec.num_classes.is_power_of_two(),
    ))
}

/// Projections and component vectors, both at label precision.
pub fn pca_bytes(spec: &BudgetSpec, k_pc: u64) -> Result<StorageReport> {
    spec.check_base()?;
    if k_pc == 0 || k_pc > spec.num_classes {
        return Err(Error::param(format!(
            "k_pc = {k_pc} must be in 1..={}",
            spec.num_classes
        )));
    }
    let rows = spec.rows()?;
    let projections = (rows * (spec.label_bytes * k_pc) as u128) as f64;
    let vectors = (k_pc * spec.num_classes * spec.label_bytes) as f64;
    Ok(StorageReport::build(
        "pca",
        raw_label_bytes(spec)? as f64,
        vec![("projections", projections), ("components", vectors)],
        true,
    ))
}

/// Largest top-k width whose storage fits in `max_bytes`.
pub fn topk_within(spec: &BudgetSpec, max_bytes: f64) -> Option<u64> {
    largest_within(spec.num_classes, max_bytes, |k| topk_bytes(spec, k))
}

/// Largest PCA rank whose storage fits in `max_bytes`.
pub fn pca_within(spec: &BudgetSpec, max_bytes: f64) -> Option<u64> {
    largest_within(spec.num_classes, max_bytes, |k| pca_bytes(spec, k))
}

// storage grows with the parameter, so stop at the first setting over budget
fn largest_within(limit: u64, max_bytes: f64, size: impl Fn(u64) -> Result<StorageReport>) -> Option<u64> {
    (1..=limit)
        .take_while(|&k| size(k).map(|r| r.compressed_bytes <= max_bytes).unwrap_or(false))
        .last()
}

/// `bits` per probability entry plus `2^bits` levels at label precision.
pub fn quant_bytes(spec: &BudgetSpec, bits: u32) -> Result<StorageReport> {
    spec.check_base()?;
    if !(1..=8).contains(&bits) {
        return Err(Error::param(format!("bits must be in 1..=8, got {bits}")));
    }
    let entries = spec.rows()? * spec.num_classes as u128;
    let indices = (entries * bits as u128) as f64 / 8.0;
    let levels = ((1u64 << bits) * spec.label_bytes) as f64;
    Ok(StorageReport::build(
        "quant",
        raw_label_bytes(spec)? as f64,
        vec![("indices", indices), ("levels", levels)],
        true,
    ))
}

/// Full-vocabulary half-precision logits for `tokens` positions.
pub fn llm_raw_bytes(tokens: u64, vocab: u64) -> u128 {
    tokens as u128 * vocab as u128 * 2
}

/// Full-vocabulary logits against an archive of `archive_bytes`.
pub fn llm_report(tokens: u64, vocab: u64, archive_bytes: f64) -> Result<StorageReport> {
    if tokens == 0 || vocab == 0 {
        return Err(Error::param("tokens and vocab must be positive"));
    }
    if !(archive_bytes > 0.0 && archive_bytes.is_finite()) {
        return Err(Error::param("archive size must be positive"));
    }
    Ok(StorageReport::build(
        "llm",
        llm_raw_bytes(tokens, vocab) as f64,
        vec![("archive", archive_bytes)],
        true,
    ))
}

/// An autoencoder shape and the ratio it achieves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VqSetting {
    pub latent_dim: u64,
    pub code_dim: u64,
    pub num_codes: u64,
    pub ratio: f64,
}

/// Searches `k` in powers of two up to 4096 and `d_h` in `[C/2, 2C]` with
/// every divisor as `d_c`. Prefers the largest `d_h` whose ratio reaches
/// the target, then the smallest overshoot, then the smaller `k`.
pub fn solve_hyperparams(target_ratio: f64, spec: &BudgetSpec) -> Result<VqSetting> {
    spec.check_base()?;
    if !(target_ratio.is_finite() && target_ratio > 0.0) {
        return Err(Error::param(format!("target ratio must be positive, got {target_ratio}")));
    }
    let c = spec.num_classes;
    let mut feasible = Vec::new();
    for d_h in c.div_ceil(2).max(1)..=2 * c {
        for d_c in (1..=d_h).filter(|d| d_h % d == 0) {
            for bits in 1..=12u32 {
                let ratio = vq_bytes(&spec.with_vq(d_h, d_c, 1 << bits))?.ratio;
                if ratio >= target_ratio {
                    feasible.push(VqSetting {
                        latent_dim: d_h,
                        code_dim: d_c,
                        num_codes: 1 << bits,
                        ratio,
                    });
                }
            }
        }
    }
    let by_slack = |a: &VqSetting, b: &VqSetting| {
        a.ratio
            .total_cmp(&b.ratio)
            .then(a.num_codes.cmp(&b.num_codes))
    };
    // widest latent among near matches; otherwise the closest overshoot
    let band = target_ratio * (1.0 + SOLVER_BAND);
    feasible
        .iter()
        .filter(|s| s.ratio <= band)
        .min_by(|a, b| b.latent_dim.cmp(&a.latent_dim).then(by_slack(a, b)))
        .or_else(|| feasible.iter().min_by(|a, b| by_slack(a, b)))
        .copied()
        .ok_or_else(|| Error::Infeasible(format!("no setting reaches a {target_ratio}x ratio")))
}

/// Relative overshoot still counted as matching the target.
pub const SOLVER_BAND: f64 = 0.05;

/// `(rate, d_h, d_c, k)` used for the ImageNet-scale storage tables.
pub const TARGET_RATE_SETTINGS: [(u32, u64, u64, u64); 6] = [
    (10, 795, 5, 1024),
    (20, 990, 15, 2048),
    (30, 1000, 20, 1024),
    (40, 1000, 25, 512),
    (100, 1000, 50, 128),
    (200, 1000, 100, 64),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSizeRow {
    pub ipc: u64,
    pub label_gib: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressedSizeRow {
    pub rate: u32,
    pub ipc: u64,
    pub latent_dim: u64,
    pub code_dim: u64,
    pub num_codes: u64,
    pub compressed_gib: f64,
    pub ratio: f64,
}

/// Uncompressed label sizes for each IPC.
pub fn label_size_table(ipcs: &[u64], classes: u64, epochs: u64) -> Result<Vec<LabelSizeRow>> {
    ipcs.iter()
        .map(|&ipc| {
            let bytes = raw_label_bytes(&BudgetSpec::new(ipc, classes, epochs))?;
            Ok(LabelSizeRow {
                ipc,
                label_gib: bytes as f64 / GIB,
            })
        })
        .collect()
}

/// Compressed sizes for every [`TARGET_RATE_SETTINGS`] entry and IPC.
pub fn compressed_size_table(
    ipcs: &[u64],
    classes: u64,
    epochs: u64,
) -> Result<Vec<CompressedSizeRow>> {
    let mut rows = Vec::new();
    for &(rate, d_h, d_c, k) in &TARGET_RATE_SETTINGS {
        for &ipc in ipcs {
            let report = vq_bytes(&BudgetSpec::new(ipc, classes, epochs).with_vq(d_h, d_c, k))?;
            rows.push(CompressedSizeRow {
                rate,
                ipc,
                latent_dim: d_h,
                code_dim: d_c,
                num_codes: k,
                compressed_gib: report.compressed_gib(),
                ratio: report.ratio,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn imagenet(ipc: u64) -> BudgetSpec {
        BudgetSpec::new(ipc, 1000, 300)
    }

    fn round3(x: f64) -> f64 {
        (x * 1000.0).round() / 1000.0
    }

    #[test]
    fn raw_sizes() {
        assert_eq!(raw_label_bytes(&imagenet(10)).unwrap(), 6_000_000_000);
        assert_eq!(round3(raw_label_bytes(&imagenet(10)).unwrap() as f64 / GIB), 5.588);
        assert_eq!(round3(raw_label_bytes(&imagenet(100)).unwrap() as f64 / GIB), 55.879);
        assert_eq!(raw_label_bytes(&BudgetSpec::new(1, 1, 1)).unwrap(), 2);
    }

    #[test]
    fn augmentations_scale_rows() {
        let mut spec = BudgetSpec::new(1, 10, 3);
        spec.aug_per_epoch = 4;
        assert_eq!(spec.rows().unwrap(), 120);
        assert_eq!(raw_label_bytes(&spec).unwrap(), 2400);
    }

    #[test]
    fn vq_sizes() {
        let r = vq_bytes(&imagenet(10).with_vq(795, 5, 1024)).unwrap();
        assert_eq!(round3(r.compressed_gib()), 0.558);
        let r = vq_bytes(&imagenet(10).with_vq(990, 15, 2048)).unwrap();
        assert_eq!(round3(r.compressed_gib()), 0.257);
    }

    #[test]
    fn single_row_batch_term() {
        // one label: 159 segments of 10 bits
        let r = vq_bytes(&BudgetSpec::new(1, 1, 1).with_vq(795, 5, 1024)).unwrap();
        assert_eq!(r.component("batch"), Some(1590.0 / 8.0));
        assert_eq!(r.component("decoder"), Some(795.0 * 4.0));
        assert_eq!(r.component("codebook"), Some(1024.0 * 5.0 * 4.0));
        assert_eq!(r.padded_bytes, Some(199.0 + 795.0 * 4.0 + 1024.0 * 20.0));
    }

    #[test]
    fn non_power_of_two_codes_round_up() {
        let r = vq_bytes(&BudgetSpec::new(1, 1, 8).with_vq(4, 2, 1000)).unwrap();
        assert!(!r.exact);
        assert_eq!(r.component("batch"), Some(8.0 * 2.0 * 10.0 / 8.0));
    }

    #[test]
    fn ratio_needs_two_codes() {
        assert!(compression_ratio(&imagenet(10).with_vq(1000, 25, 1)).is_err());
        let ratio = compression_ratio(&imagenet(10).with_vq(795, 5, 1024)).unwrap();
        assert!((ratio - 10.0).abs() < 0.05);
    }

    #[test]
    fn invalid_specs() {
        assert!(vq_bytes(&imagenet(10).with_vq(796, 5, 1024)).is_err());
        assert!(vq_bytes(&imagenet(10)).is_err());
        assert!(raw_label_bytes(&BudgetSpec::new(0, 1000, 300)).is_err());
        assert!(topk_bytes(&imagenet(10), 1001).is_err());
        assert!(pca_bytes(&imagenet(10), 0).is_err());
        assert!(quant_bytes(&imagenet(10), 9).is_err());
    }

    #[test]
    fn ratio_classes() {
        assert_eq!(asymptotic_ratio_class(5, 2).unwrap(), 5.0);
        assert_eq!(asymptotic_ratio_class(40, 256).unwrap(), 5.0);
        assert!((asymptotic_ratio_class(25, 512).unwrap() - 25.0 / 9.0).abs() < 1e-15);
        assert_eq!(asymptotic_ratio_class(7, 2).unwrap(), 7.0);
        assert!(asymptotic_ratio_class(7, 1).is_err());
    }

    #[test]
    fn level_set_walk() {
        let set = level_set(5, 2, 3).unwrap();
        assert_eq!(set.points, vec![(2, 5), (4, 10), (16, 20), (256, 40)]);
        assert!(!set.truncated);
    }

    #[test]
    fn level_set_truncates_large_codebooks() {
        let set = level_set(5, 2, 10).unwrap();
        // 2, 4, 16, 256, 65536, 2^32; the next square overflows the cap
        assert_eq!(set.points.len(), 6);
        assert_eq!(set.points.last(), Some(&(1 << 32, 160)));
        assert!(set.truncated);
    }

    #[test]
    fn baseline_ratios() {
        let q2 = quant_bytes(&imagenet(10), 2).unwrap().ratio;
        let q3 = quant_bytes(&imagenet(10), 3).unwrap().ratio;
        assert!((q2 - 8.0).abs() < 1e-6);
        assert!((q3 - 16.0 / 3.0).abs() < 1e-6);
        let t = topk_bytes(&imagenet(10), 15).unwrap().ratio;
        assert!((38.0..=44.0).contains(&t));
    }

    #[test]
    fn llm_accounting() {
        assert_eq!(llm_raw_bytes(1, 1), 2);
        let gib = llm_raw_bytes(1_200_000, 50_257) as f64 / GIB;
        assert!((gib - 112.3).abs() < 0.1);
    }

    #[test]
    fn solver_hits_ten_x() {
        let s = solve_hyperparams(10.0, &imagenet(10)).unwrap();
        assert!(s.ratio >= 10.0 && s.ratio <= 10.5, "{s:?}");
        assert_eq!(s.latent_dim % s.code_dim, 0);
        let published = compression_ratio(&imagenet(10).with_vq(795, 5, 1024)).unwrap();
        assert!((10.0..=10.5).contains(&published));
    }

    #[test]
    fn solver_trivial_and_infeasible() {
        assert!(solve_hyperparams(1.0, &imagenet(10)).unwrap().ratio >= 1.0);
        assert!(matches!(
            solve_hyperparams(1e9, &imagenet(10)),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn matched_budget_picks_the_widest_fitting_setting() {
        let spec = BudgetSpec::new(40, 100, 30);
        let one = topk_bytes(&spec, 1).unwrap().compressed_bytes;
        let two = topk_bytes(&spec, 2).unwrap().compressed_bytes;
        assert_eq!(topk_within(&spec, one), Some(1));
        assert_eq!(topk_within(&spec, (one + two) / 2.0), Some(1));
        assert_eq!(topk_within(&spec, two), Some(2));
        assert_eq!(topk_within(&spec, one - 1.0), None);
        assert_eq!(pca_within(&spec, f64::INFINITY), Some(100));
    }
}
