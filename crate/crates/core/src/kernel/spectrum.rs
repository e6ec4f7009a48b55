use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;

/// k-gram counts of a byte sequence, sorted by gram.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparseSpectrum {
    k: usize,
    entries: Vec<(Vec<u8>, u32)>,
}

impl SparseSpectrum {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn entries(&self) -> &[(Vec<u8>, u32)] {
        &self.entries
    }

    pub fn total(&self) -> u64 {
        self.entries.iter().map(|(_, c)| *c as u64).sum()
    }

    /// Self inner product.
    pub fn self_dot(&self) -> f64 {
        self.entries.iter().map(|(_, c)| (*c as f64) * (*c as f64)).sum()
    }

    /// Build from unsorted (gram, count) pairs; merges duplicates and drops
    /// zero counts.
    pub fn from_counts(k: usize, mut pairs: Vec<(Vec<u8>, u32)>) -> Result<Self> {
        if k == 0 {
            return Err(Error::param("k", "gram length must be at least 1"));
        }
        if let Some((g, _)) = pairs.iter().find(|(g, _)| g.len() != k) {
            return Err(Error::GramMismatch(k, g.len()));
        }
        pairs.sort_by(|a, b| a.0.cmp(&b.0));
        let mut entries: Vec<(Vec<u8>, u32)> = Vec::with_capacity(pairs.len());
        for (g, c) in pairs {
            match entries.last_mut() {
                Some((last, lc)) if *last == g => *lc += c,
                _ => entries.push((g, c)),
            }
        }
        entries.retain(|(_, c)| *c > 0);
        Ok(Self { k, entries })
    }
}

/// Counts of every contiguous k-gram of `bytes`.
pub fn extract_spectrum(bytes: &[u8], k: usize) -> Result<SparseSpectrum> {
    if k == 0 {
        return Err(Error::param("k", "gram length must be at least 1"));
    }
    if bytes.len() < k {
        return Err(Error::SequenceTooShort { len: bytes.len(), k });
    }
    let mut grams: Vec<&[u8]> = bytes.windows(k).collect();
    grams.sort_unstable();
    let mut entries: Vec<(Vec<u8>, u32)> = Vec::new();
    for g in grams {
        match entries.last_mut() {
            Some((last, c)) if last.as_slice() == g => *c += 1,
            _ => entries.push((g.to_vec(), 1)),
        }
    }
    Ok(SparseSpectrum { k, entries })
}

/// Inner product of two spectra by a linear merge of the sorted entries.
pub fn spectrum_dot(a: &SparseSpectrum, b: &SparseSpectrum) -> Result<f64> {
    if a.k != b.k {
        return Err(Error::GramMismatch(a.k, b.k));
    }
    let (mut i, mut j) = (0, 0);
    let mut acc = 0.0;
    while i < a.entries.len() && j < b.entries.len() {
        match a.entries[i].0.cmp(&b.entries[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += a.entries[i].1 as f64 * b.entries[j].1 as f64;
                i += 1;
                j += 1;
            }
        }
    }
    Ok(acc)
}

/// `k(x,y) / sqrt(k(x,x) k(y,y))`.
pub fn normalize_dot(kxy: f64, kxx: f64, kyy: f64) -> Result<f64> {
    if !(kxx > 0.0 && kyy > 0.0) {
        return Err(Error::param("self kernel", "must be positive (empty spectrum?)"));
    }
    Ok(kxy / (kxx * kyy).sqrt())
}

/// RBF kernel on the squared distance induced by the inner products.
pub fn rbf_from_dots(kxy: f64, kxx: f64, kyy: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::param("sigma", format!("{sigma} must be positive")));
    }
    let d2 = (kxx - 2.0 * kxy + kyy).max(0.0);
    Ok((-d2 / (2.0 * sigma * sigma)).exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub k: usize,
    pub sigma: Option<f64>,
    pub normalize: bool,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            k: 3,
            sigma: None,
            normalize: true,
        }
    }
}

impl KernelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::param("k", "gram length must be at least 1"));
        }
        if let Some(s) = self.sigma {
            if !(s > 0.0) {
                return Err(Error::param("sigma", format!("{s} must be positive")));
            }
        }
        Ok(())
    }
}

/// Dense symmetric kernel matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelMatrix {
    n: usize,
    values: Vec<f64>,
}

impl KernelMatrix {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: values.len(),
            });
        }
        Ok(Self { n, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Distance between items `i` and `j` in the kernel's feature space.
    pub fn feature_distance(&self, i: usize, j: usize) -> f64 {
        (self.get(i, i) + self.get(j, j) - 2.0 * self.get(i, j)).max(0.0).sqrt()
    }
}

/// Kernel matrix of byte sequences under `cfg`. Rows are computed
/// independently and assembled in row order, so the result does not depend
/// on the execution strategy.
pub fn kernel_matrix(seqs: &[Vec<u8>], cfg: &KernelConfig, exec: Execution) -> Result<KernelMatrix> {
    cfg.validate()?;
    let spectra: Vec<SparseSpectrum> = seqs
        .iter()
        .map(|s| extract_spectrum(s, cfg.k))
        .collect::<Result<_>>()?;
    let selfs: Vec<f64> = spectra.iter().map(SparseSpectrum::self_dot).collect();
    let n = spectra.len();
    let rows: Vec<Result<Vec<f64>>> = exec.map(n, |i| {
        (0..n)
            .map(|j| {
                let (a, b) = if i <= j { (i, j) } else { (j, i) };
                let mut kab = spectrum_dot(&spectra[a], &spectra[b])?;
                let (mut kaa, mut kbb) = (selfs[a], selfs[b]);
                if cfg.normalize {
                    kab = normalize_dot(kab, kaa, kbb)?;
                    kaa = 1.0;
                    kbb = 1.0;
                }
                match cfg.sigma {
                    Some(s) => rbf_from_dots(kab, kaa, kbb, s),
                    None => Ok(kab),
                }
            })
            .collect()
    });
    let mut values = Vec::with_capacity(n * n);
    for row in rows {
        values.extend(row?);
    }
    KernelMatrix::new(n, values)
}
