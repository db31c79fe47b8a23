//! Array geometry: direction vectors, ULA steering vectors and the per-grid-point
//! block-diagonal steering matrices used by every estimator.
//!
//! Positions are 3-vectors in meters. Targets and grid points usually live on
//! the `z = 0` plane while sensing nodes carry their antenna height in `z`.

use nalgebra::Vector3;
use num_complex::Complex;
use thiserror::Error;

use crate::scalar::{CMatrix, Real};

pub type Point<T> = Vector3<T>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate geometry: point {point:?} coincides with sensing node position")]
    Coincident { point: [f64; 3] },
    #[error("degenerate geometry: grid point {index} coincides with sensing node {node}")]
    GridPointOnNode { index: usize, node: usize },
    #[error("sensing node {node} has {found} antennas, expected {expected} (all nodes must share the array size)")]
    MixedArraySize {
        node: usize,
        found: usize,
        expected: usize,
    },
    #[error("invalid sensing node: {0}")]
    InvalidNode(String),
    #[error("invalid search grid: {0}")]
    InvalidGrid(String),
}

fn to_f64_array<T: Real>(p: &Point<T>) -> [f64; 3] {
    [p.x.as_f64(), p.y.as_f64(), p.z.as_f64()]
}

/// A receiver equipped with a uniform linear array.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingNode<T: Real> {
    pub position: Point<T>,
    /// Unit vector along which the array elements are laid out.
    pub axis: Point<T>,
    pub num_antennas: usize,
    /// Element spacing in wavelengths.
    pub spacing_over_wavelength: T,
}

impl<T: Real> SensingNode<T> {
    /// Builds a node, normalizing `axis` to unit length.
    pub fn new(
        position: Point<T>,
        axis: Point<T>,
        num_antennas: usize,
        spacing_over_wavelength: T,
    ) -> Result<Self, GeometryError> {
        let norm = axis.norm();
        if !(norm > T::zero()) || !norm.is_finite() {
            return Err(GeometryError::InvalidNode(
                "array axis must be a finite nonzero vector".into(),
            ));
        }
        let node = Self {
            position,
            axis: axis / norm,
            num_antennas,
            spacing_over_wavelength,
        };
        node.validate()?;
        Ok(node)
    }

    /// Half-wavelength ULA along the x axis.
    pub fn with_defaults(position: Point<T>, num_antennas: usize) -> Result<Self, GeometryError> {
        Self::new(position, Point::x(), num_antennas, T::lit(0.5))
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.num_antennas == 0 {
            return Err(GeometryError::InvalidNode("num_antennas must be at least 1".into()));
        }
        if !(self.spacing_over_wavelength > T::zero()) || !self.spacing_over_wavelength.is_finite() {
            return Err(GeometryError::InvalidNode(
                "spacing_over_wavelength must be positive".into(),
            ));
        }
        if !self.position.iter().all(|c| c.is_finite()) {
            return Err(GeometryError::InvalidNode("position must be finite".into()));
        }
        let unit_err = (self.axis.norm() - T::one()).abs();
        if !(unit_err <= T::lit(1e-12).max(T::default_epsilon() * T::lit(8.0))) {
            return Err(GeometryError::InvalidNode("array axis must have unit norm".into()));
        }
        Ok(())
    }
}

/// How a [`SearchGrid`] was generated. Determines adjacency for peak search.
#[derive(Debug, Clone, PartialEq)]
pub enum GridDescriptor<T: Real> {
    /// Points `start + k * step * dir` along the segment `start -> end`.
    Line {
        start: Point<T>,
        end: Point<T>,
        step: T,
    },
    /// Axis-aligned rectangle on the plane `z`, x varying fastest.
    Rect {
        x_range: (T, T),
        y_range: (T, T),
        step: T,
        z: T,
    },
    /// User-supplied points; adjacency is index order.
    Explicit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchGrid<T: Real> {
    points: Vec<Point<T>>,
    descriptor: GridDescriptor<T>,
    /// Columns per row for `Rect` grids.
    nx: usize,
}

fn steps_between<T: Real>(length: T, step: T) -> Result<usize, GeometryError> {
    if !(step > T::zero()) || !step.is_finite() {
        return Err(GeometryError::InvalidGrid("step must be positive".into()));
    }
    if !(length >= T::zero()) || !length.is_finite() {
        return Err(GeometryError::InvalidGrid("grid extent must be finite and ordered".into()));
    }
    let n = (length / step).round();
    n.to_usize()
        .ok_or_else(|| GeometryError::InvalidGrid("grid too large".into()))
}

impl<T: Real> SearchGrid<T> {
    pub fn line(start: Point<T>, end: Point<T>, step: T) -> Result<Self, GeometryError> {
        let span = end - start;
        let length = span.norm();
        let n = steps_between(length, step)?;
        let dir = if length > T::zero() { span / length } else { Point::zeros() };
        let points = (0..=n)
            .map(|k| start + dir * (T::from_usize_lossy(k) * step))
            .collect();
        Ok(Self {
            points,
            descriptor: GridDescriptor::Line { start, end, step },
            nx: n + 1,
        })
    }

    pub fn rect(x_range: (T, T), y_range: (T, T), step: T, z: T) -> Result<Self, GeometryError> {
        let nx = steps_between(x_range.1 - x_range.0, step)? + 1;
        let ny = steps_between(y_range.1 - y_range.0, step)? + 1;
        let mut points = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            for ix in 0..nx {
                points.push(Point::new(
                    x_range.0 + T::from_usize_lossy(ix) * step,
                    y_range.0 + T::from_usize_lossy(iy) * step,
                    z,
                ));
            }
        }
        Ok(Self {
            points,
            descriptor: GridDescriptor::Rect {
                x_range,
                y_range,
                step,
                z,
            },
            nx,
        })
    }

    /// Grid from an explicit list of pairwise distinct points.
    pub fn from_points(points: Vec<Point<T>>) -> Result<Self, GeometryError> {
        if points.is_empty() {
            return Err(GeometryError::InvalidGrid("grid must contain at least one point".into()));
        }
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                if points[i] == points[j] {
                    return Err(GeometryError::InvalidGrid(format!(
                        "grid points {i} and {j} coincide"
                    )));
                }
            }
        }
        let nx = points.len();
        Ok(Self {
            points,
            descriptor: GridDescriptor::Explicit,
            nx,
        })
    }

    pub fn points(&self) -> &[Point<T>] {
        &self.points
    }

    pub fn descriptor(&self) -> &GridDescriptor<T> {
        &self.descriptor
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Spacing between adjacent points. For explicit grids this is the
    /// smallest pairwise distance.
    pub fn step(&self) -> T {
        match &self.descriptor {
            GridDescriptor::Line { step, .. } | GridDescriptor::Rect { step, .. } => *step,
            GridDescriptor::Explicit => {
                let mut best = T::max_value().unwrap_or_else(|| T::lit(f64::MAX));
                for i in 0..self.points.len() {
                    for j in (i + 1)..self.points.len() {
                        best = best.min((self.points[i] - self.points[j]).norm());
                    }
                }
                best
            }
        }
    }

    /// Indices adjacent to `i`: two neighbours on a line, four on a rectangle.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        let n = self.points.len();
        let mut out = Vec::with_capacity(4);
        match self.descriptor {
            GridDescriptor::Rect { .. } => {
                let (ix, iy) = (i % self.nx, i / self.nx);
                let ny = n / self.nx;
                if ix > 0 {
                    out.push(i - 1);
                }
                if ix + 1 < self.nx {
                    out.push(i + 1);
                }
                if iy > 0 {
                    out.push(i - self.nx);
                }
                if iy + 1 < ny {
                    out.push(i + self.nx);
                }
            }
            _ => {
                if i > 0 {
                    out.push(i - 1);
                }
                if i + 1 < n {
                    out.push(i + 1);
                }
            }
        }
        out
    }

    /// Index of the grid point closest to `p` (lowest index on ties).
    pub fn nearest_index(&self, p: &Point<T>) -> usize {
        let mut best = 0;
        let mut best_d = (self.points[0] - p).norm_squared();
        for (i, q) in self.points.iter().enumerate().skip(1) {
            let d = (q - p).norm_squared();
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }

    /// Rectangle dimensions `(nx, ny)` when the grid is a `Rect`.
    pub fn rect_shape(&self) -> Option<(usize, usize)> {
        match self.descriptor {
            GridDescriptor::Rect { .. } => Some((self.nx, self.points.len() / self.nx)),
            _ => None,
        }
    }
}

/// Unit vector pointing from `point` towards `node_position`.
pub fn direction_vector<T: Real>(
    node_position: &Point<T>,
    point: &Point<T>,
) -> Result<Point<T>, GeometryError> {
    let d = node_position - point;
    let norm = d.norm();
    if !(norm > T::zero()) {
        return Err(GeometryError::Coincident {
            point: to_f64_array(point),
        });
    }
    Ok(d / norm)
}

/// Unit-norm ULA response of `node` towards `point`.
///
/// Entry `m` is `exp(j 2π (d/λ) m kᵀe) / √N_R`.
pub fn steering_vector<T: Real>(
    node: &SensingNode<T>,
    point: &Point<T>,
) -> Result<Vec<Complex<T>>, GeometryError> {
    let mut out = vec![Complex::new(T::zero(), T::zero()); node.num_antennas];
    fill_steering(node, point, &mut out)?;
    Ok(out)
}

fn fill_steering<T: Real>(
    node: &SensingNode<T>,
    point: &Point<T>,
    out: &mut [Complex<T>],
) -> Result<(), GeometryError> {
    let k = direction_vector(&node.position, point)?;
    let increment = T::two_pi() * node.spacing_over_wavelength * k.dot(&node.axis);
    let scale = T::one() / T::from_usize_lossy(node.num_antennas).sqrt();
    for (m, slot) in out.iter_mut().enumerate() {
        *slot = crate::scalar::polar(scale, increment * T::from_usize_lossy(m));
    }
    Ok(())
}

/// Per-grid-point steering vectors for every node.
///
/// Logically each grid point `i` owns the `(N_R L) x L` block-diagonal matrix
/// `A_i` whose `l`-th diagonal block is `a_l(p_i)`; only the blocks are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringSet<T: Real> {
    num_points: usize,
    num_nodes: usize,
    num_antennas: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> SteeringSet<T> {
    pub fn num_points(&self) -> usize {
        self.num_points
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_antennas(&self) -> usize {
        self.num_antennas
    }

    /// Length of a stacked snapshot, `N_R * L`.
    pub fn dim(&self) -> usize {
        self.num_antennas * self.num_nodes
    }

    /// `a_l(p_i)`.
    #[inline]
    pub fn vector(&self, point: usize, node: usize) -> &[Complex<T>] {
        let start = (point * self.num_nodes + node) * self.num_antennas;
        &self.data[start..start + self.num_antennas]
    }

    /// Dense `A_i`, mostly for tests and diagnostics.
    pub fn block_matrix(&self, point: usize) -> CMatrix<T> {
        let mut a = CMatrix::zeros(self.dim(), self.num_nodes);
        for l in 0..self.num_nodes {
            for (m, v) in self.vector(point, l).iter().enumerate() {
                a[(l * self.num_antennas + m, l)] = *v;
            }
        }
        a
    }

    /// Same set with point `i` of the result taken from point `order[i]` of `self`.
    pub fn reordered(&self, order: &[usize]) -> Self {
        let stride = self.num_nodes * self.num_antennas;
        let mut data = Vec::with_capacity(order.len() * stride);
        for &i in order {
            data.extend_from_slice(&self.data[i * stride..(i + 1) * stride]);
        }
        Self {
            num_points: order.len(),
            num_nodes: self.num_nodes,
            num_antennas: self.num_antennas,
            data,
        }
    }
}

/// Checks that all nodes are valid and share one array size.
pub fn common_array_size<T: Real>(nodes: &[SensingNode<T>]) -> Result<usize, GeometryError> {
    let first = nodes
        .first()
        .ok_or_else(|| GeometryError::InvalidNode("at least one sensing node is required".into()))?;
    for (l, node) in nodes.iter().enumerate() {
        node.validate()?;
        if node.num_antennas != first.num_antennas {
            return Err(GeometryError::MixedArraySize {
                node: l,
                found: node.num_antennas,
                expected: first.num_antennas,
            });
        }
    }
    Ok(first.num_antennas)
}

/// Steering set for an arbitrary list of positions (grid points or targets).
pub fn steering_for_points<T: Real>(
    nodes: &[SensingNode<T>],
    points: &[Point<T>],
) -> Result<SteeringSet<T>, GeometryError> {
    let num_antennas = common_array_size(nodes)?;
    let num_nodes = nodes.len();
    let mut data = vec![Complex::new(T::zero(), T::zero()); points.len() * num_nodes * num_antennas];
    for (i, p) in points.iter().enumerate() {
        for (l, node) in nodes.iter().enumerate() {
            let start = (i * num_nodes + l) * num_antennas;
            fill_steering(node, p, &mut data[start..start + num_antennas])
                .map_err(|_| GeometryError::GridPointOnNode { index: i, node: l })?;
        }
    }
    Ok(SteeringSet {
        num_points: points.len(),
        num_nodes,
        num_antennas,
        data,
    })
}

pub fn build_steering_set<T: Real>(
    nodes: &[SensingNode<T>],
    grid: &SearchGrid<T>,
) -> Result<SteeringSet<T>, GeometryError> {
    steering_for_points(nodes, grid.points())
}
