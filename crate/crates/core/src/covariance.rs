//! Sample and model covariance matrices of stacked snapshots.

use std::io::{self, Read, Write};

use num_complex::Complex;
use thiserror::Error;

use crate::geometry::{steering_for_points, GeometryError, SensingNode};
use crate::scalar::{czero, symmetrize, CMatrix, Real};
use crate::synth::{SampleBatch, TargetSource};

#[derive(Debug, Error)]
pub enum CovarianceError {
    #[error("sample batch is empty")]
    EmptyBatch,
    #[error("realized channel matrix is {found:?}, expected {expected:?}")]
    ChannelShape {
        found: (usize, usize),
        expected: (usize, usize),
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("malformed covariance dump: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovarianceKind {
    Scm,
    BlockDiagScm,
    Analytic,
    IsrReconstructed,
}

/// Hermitian `(N_R L) x (N_R L)` covariance with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix<T: Real> {
    matrix: CMatrix<T>,
    kind: CovarianceKind,
    loading: T,
}

impl<T: Real> CovarianceMatrix<T> {
    /// Wraps `matrix`, symmetrizing it to exact Hermitian form.
    pub fn new(mut matrix: CMatrix<T>, kind: CovarianceKind) -> Self {
        assert!(matrix.is_square(), "covariance must be square");
        symmetrize(&mut matrix);
        Self {
            matrix,
            kind,
            loading: T::zero(),
        }
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix<T> {
        self.matrix
    }

    pub fn kind(&self) -> CovarianceKind {
        self.kind
    }

    /// Total diagonal loading applied so far.
    pub fn loading(&self) -> T {
        self.loading
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Adds `delta * I` and records it.
    pub fn with_loading(mut self, delta: T) -> Self {
        for i in 0..self.dim() {
            self.matrix[(i, i)].re += delta;
        }
        self.loading += delta;
        self
    }

    pub fn trace(&self) -> T {
        (0..self.dim()).fold(T::zero(), |acc, i| acc + self.matrix[(i, i)].re)
    }

    pub fn eigenvalues(&self) -> Vec<T> {
        let mut ev: Vec<T> = self.matrix.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
        ev
    }

    pub fn min_eigenvalue(&self) -> T {
        self.eigenvalues()[0]
    }

    pub fn max_hermitian_defect(&self) -> T {
        hermitian_defect(&self.matrix)
    }

    /// Minimum eigenvalue at least `-1e-8 * trace / dim`.
    pub fn is_psd(&self) -> bool {
        let slack = T::lit(1e-8) * self.trace().abs() / T::from_usize_lossy(self.dim().max(1));
        self.min_eigenvalue() >= -slack
    }
}

pub fn hermitian_defect<T: Real>(m: &CMatrix<T>) -> T {
    let mut worst = T::zero();
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            worst = worst.max(crate::scalar::cabs(m[(r, c)] - m[(c, r)].conj()));
        }
    }
    worst
}

/// Lower-triangular accumulation of `(1/N_s) Σ_n y[rows] y[rows]ᴴ`, mirrored.
fn outer_average<T: Real>(batch: &SampleBatch<T>, rows: std::ops::Range<usize>) -> CMatrix<T> {
    let dim = rows.len();
    let mut acc = CMatrix::from_element(dim, dim, czero());
    for n in 0..batch.num_samples() {
        let y = &batch.snapshot(n)[rows.clone()];
        for c in 0..dim {
            let yc = y[c].conj();
            for r in c..dim {
                acc[(r, c)] += y[r] * yc;
            }
        }
    }
    let inv = T::one() / T::from_usize_lossy(batch.num_samples());
    for c in 0..dim {
        for r in c..dim {
            let v = acc[(r, c)].scale(inv);
            acc[(r, c)] = v;
            acc[(c, r)] = v.conj();
        }
    }
    acc
}

/// Conventional sample covariance `(1/N_s) Σ y(n) y(n)ᴴ`.
pub fn scm<T: Real>(batch: &SampleBatch<T>) -> Result<CovarianceMatrix<T>, CovarianceError> {
    if batch.num_samples() == 0 {
        return Err(CovarianceError::EmptyBatch);
    }
    Ok(CovarianceMatrix {
        matrix: outer_average(batch, 0..batch.dim()),
        kind: CovarianceKind::Scm,
        loading: T::zero(),
    })
}

/// Per-node sample covariances on the diagonal, cross-node blocks zero.
pub fn block_diag_scm<T: Real>(batch: &SampleBatch<T>) -> Result<CovarianceMatrix<T>, CovarianceError> {
    if batch.num_samples() == 0 {
        return Err(CovarianceError::EmptyBatch);
    }
    let nr = batch.num_antennas();
    let mut m = CMatrix::from_element(batch.dim(), batch.dim(), czero());
    for l in 0..batch.num_nodes() {
        let block = outer_average(batch, batch.node_range(l));
        m.view_mut((l * nr, l * nr), (nr, nr)).copy_from(&block);
    }
    Ok(CovarianceMatrix {
        matrix: m,
        kind: CovarianceKind::BlockDiagScm,
        loading: T::zero(),
    })
}

/// Per-node sample covariance `R̂_SCM,l`.
pub fn node_scm<T: Real>(batch: &SampleBatch<T>, node: usize) -> Result<CMatrix<T>, CovarianceError> {
    if batch.num_samples() == 0 {
        return Err(CovarianceError::EmptyBatch);
    }
    Ok(outer_average(batch, batch.node_range(node)))
}

/// Model covariance `Σ_k A_k Λ_k A_kᴴ + σ_v² I`.
///
/// Without `realized_channels` the ensemble form `Λ_k = N_R diag(σ²_{1,k}..σ²_{L,k})`
/// is used; with an `L x K` matrix of channel draws the conditional form
/// `Λ_k = N_R α_k α_kᴴ` is used instead.
pub fn analytic_covariance<T: Real>(
    nodes: &[SensingNode<T>],
    targets: &[TargetSource<T>],
    noise_power: T,
    realized_channels: Option<&CMatrix<T>>,
) -> Result<CovarianceMatrix<T>, CovarianceError> {
    let positions: Vec<_> = targets.iter().map(|t| t.position).collect();
    let steering = steering_for_points(nodes, &positions)?;
    let l_count = nodes.len();
    let nr = steering.num_antennas();
    let dim = l_count * nr;
    if let Some(ch) = realized_channels {
        if ch.shape() != (l_count, targets.len()) {
            return Err(CovarianceError::ChannelShape {
                found: ch.shape(),
                expected: (l_count, targets.len()),
            });
        }
    }
    let gain = T::from_usize_lossy(nr);
    let mut m = CMatrix::from_element(dim, dim, czero());
    for (k, target) in targets.iter().enumerate() {
        for l in 0..l_count {
            for j in 0..l_count {
                let coeff: Complex<T> = match realized_channels {
                    Some(ch) => ch[(l, k)] * ch[(j, k)].conj() * gain,
                    None if l == j => Complex::new(target.channel_variances[l] * gain, T::zero()),
                    None => continue,
                };
                let (al, aj) = (steering.vector(k, l), steering.vector(k, j));
                for (q, aq) in aj.iter().enumerate() {
                    let w = coeff * aq.conj();
                    for (p, ap) in al.iter().enumerate() {
                        m[(l * nr + p, j * nr + q)] += w * ap;
                    }
                }
            }
        }
    }
    Ok(CovarianceMatrix::new(m, CovarianceKind::Analytic).with_loading(noise_power))
}

/// Writes `dim` as little-endian `u64` followed by the row-major entries as
/// `(re, im)` little-endian `f64` pairs.
pub fn write_binary<T: Real, W: Write>(cov: &CovarianceMatrix<T>, mut w: W) -> io::Result<()> {
    let dim = cov.dim();
    w.write_all(&(dim as u64).to_le_bytes())?;
    for r in 0..dim {
        for c in 0..dim {
            let v = cov.matrix[(r, c)];
            w.write_all(&v.re.as_f64().to_le_bytes())?;
            w.write_all(&v.im.as_f64().to_le_bytes())?;
        }
    }
    w.flush()
}

pub fn read_binary<R: Read>(mut r: R) -> Result<CMatrix<f64>, CovarianceError> {
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    let dim = usize::try_from(u64::from_le_bytes(word))
        .map_err(|_| CovarianceError::Format("dimension overflows usize".into()))?;
    let mut m = CMatrix::zeros(dim, dim);
    for row in 0..dim {
        for col in 0..dim {
            r.read_exact(&mut word)?;
            let re = f64::from_le_bytes(word);
            r.read_exact(&mut word)?;
            let im = f64::from_le_bytes(word);
            m[(row, col)] = Complex::new(re, im);
        }
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(CovarianceError::Format(format!("{} trailing bytes", rest.len())));
    }
    Ok(m)
}
