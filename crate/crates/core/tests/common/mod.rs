//! Independent reference implementations used by the integration tests.
//!
//! Everything here is written directly from the formulas with explicit
//! inverses and dense products, sharing no code path with the library's
//! factorized implementations.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use passloc::geometry::{build_steering_set, Point, SearchGrid, SensingNode, SteeringSet};
use passloc::synth::{SampleBatch, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type CM = DMatrix<Complex64>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cgauss(rng: &mut impl Rng) -> Complex64 {
    let u: f64 = rng.random::<f64>().max(1e-300);
    let v: f64 = rng.random();
    let r = (-u.ln()).sqrt();
    Complex64::from_polar(r, 2.0 * std::f64::consts::PI * v)
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> CM {
    CM::from_fn(rows, cols, |_, _| cgauss(rng))
}

/// `B Bᴴ + shift I` with `B` of the given rank.
pub fn random_hpd(dim: usize, rank: usize, shift: f64, rng: &mut impl Rng) -> CM {
    let b = random_matrix(dim, rank, rng);
    &b * b.adjoint() + CM::identity(dim, dim) * Complex64::new(shift, 0.0)
}

pub fn inv(m: &CM) -> CM {
    m.clone().try_inverse().expect("invertible")
}

pub fn rel(a: &CM, b: &CM) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

/// Dense `N_R L x L` steering matrix for grid point `i`.
pub fn steering_block(set: &SteeringSet<f64>, i: usize) -> CM {
    let (l_count, nr) = (set.num_nodes(), set.num_antennas());
    let mut a = CM::zeros(nr * l_count, l_count);
    for l in 0..l_count {
        for (m, v) in set.vector(i, l).iter().enumerate() {
            a[(l * nr + m, l)] = *v;
        }
    }
    a
}

/// Steering entry written out from the element phase formula.
pub fn steering_entry(node: &SensingNode<f64>, p: &Point<f64>, m: usize) -> Complex64 {
    let k = (node.position - p) / (node.position - p).norm();
    let phase = 2.0 * std::f64::consts::PI * node.spacing_over_wavelength * m as f64 * k.dot(&node.axis);
    Complex64::from_polar(1.0 / (node.num_antennas as f64).sqrt(), phase)
}

pub fn block_diag_scm(y: &CM, l_count: usize, nr: usize) -> CM {
    let full = y * y.adjoint() / Complex64::new(y.ncols() as f64, 0.0);
    let mut out = CM::zeros(full.nrows(), full.ncols());
    for l in 0..l_count {
        let r = l * nr..(l + 1) * nr;
        out.view_mut((r.start, r.start), (nr, nr))
            .copy_from(&full.view((r.start, r.start), (nr, nr)));
    }
    out
}

/// One literal pass of the cyclic update starting from `r`.
pub struct OracleCycle {
    pub x: Vec<CM>,
    pub lambda: Vec<CM>,
    pub r_next: CM,
    pub spectrum: Vec<f64>,
}

pub fn oracle_cycle(y: &CM, set: &SteeringSet<f64>, r: &CM, sigma2: f64) -> OracleCycle {
    let r_inv = inv(r);
    let ns = y.ncols();
    let nr = set.num_antennas();
    let mut x = Vec::new();
    let mut lambda = Vec::new();
    let mut r_next = CM::identity(r.nrows(), r.ncols()) * Complex64::new(sigma2, 0.0);
    let mut spectrum = Vec::new();
    for i in 0..set.num_points() {
        let a = steering_block(set, i);
        let xi = inv(&(a.adjoint() * &r_inv * &a)) * a.adjoint() * &r_inv * y;
        let li = &xi * xi.adjoint() / Complex64::new(ns as f64, 0.0);
        r_next += &a * &li * a.adjoint();
        spectrum.push(li.trace().re / nr as f64);
        x.push(xi);
        lambda.push(li);
    }
    OracleCycle {
        x,
        lambda,
        r_next,
        spectrum,
    }
}

/// `(Aᴴ R_IN⁻¹ A)⁻¹ Aᴴ R_IN⁻¹ y` with the interference-plus-noise covariance.
pub fn wls_interference_form(a: &CM, r_in: &CM, y: &CM) -> CM {
    let w = inv(r_in);
    inv(&(a.adjoint() * &w * a)) * a.adjoint() * &w * y
}

/// Beam-space value `1 / det(Aᴴ Π A)` where `Π` projects onto the
/// eigenvectors beyond the `signal_dim` largest, obtained from the real
/// symmetric embedding `[[Re, -Im], [Im, Re]]` of the covariance.
pub fn bs_oracle(cov: &CM, a: &CM, signal_dim: usize) -> f64 {
    let n = cov.nrows();
    let real = DMatrix::<f64>::from_fn(2 * n, 2 * n, |r, c| {
        let (rb, cb) = (r / n, c / n);
        let v = cov[(r % n, c % n)];
        match (rb, cb) {
            (0, 0) | (1, 1) => v.re,
            (0, 1) => -v.im,
            _ => v.im,
        }
    });
    let eig = real.symmetric_eigen();
    let mut order: Vec<usize> = (0..2 * n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    // Each complex eigenvalue appears twice in the embedding.
    let noise = &order[..2 * (n - signal_dim)];
    let mut p = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for &j in noise {
        let v = eig.eigenvectors.column(j);
        p += &v * v.transpose();
    }
    let proj = CM::from_fn(n, n, |r, c| Complex64::new(p[(r, c)], p[(r + n, c)]));
    let g = a.adjoint() * proj * a;
    1.0 / g.determinant().re
}

pub fn batch_from(y: CM, l_count: usize, nr: usize) -> SampleBatch<f64> {
    SampleBatch::new(y, l_count, nr).unwrap()
}

/// Two nodes on a short line, used for small exact checks.
pub fn small_line(nr: usize, grid_points: usize) -> (Vec<SensingNode<f64>>, SearchGrid<f64>, SteeringSet<f64>) {
    let nodes = vec![
        SensingNode::new(Point::new(1.0, 0.0, 2.0), Point::new(1.0, 0.0, 0.5), nr, 0.5).unwrap(),
        SensingNode::new(Point::new(6.0, 0.0, 2.0), Point::new(1.0, 0.0, -0.5), nr, 0.5).unwrap(),
    ];
    let grid = SearchGrid::line(
        Point::new(2.0, 0.0, 0.0),
        Point::new(2.0 + (grid_points - 1) as f64, 0.0, 0.0),
        1.0,
    )
    .unwrap();
    let set = build_steering_set(&nodes, &grid).unwrap();
    (nodes, grid, set)
}

pub fn scenario_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

pub fn bundled(name: &str) -> Scenario<f64> {
    passloc::harness::load_scenario(&scenario_dir().join(format!("{name}.toml")))
        .unwrap()
        .scenario
}

pub fn to_vec(v: &DVector<Complex64>) -> Vec<Complex64> {
    v.iter().copied().collect()
}
