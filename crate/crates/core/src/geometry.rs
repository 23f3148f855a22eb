//! Radiator geometry and RIS grid construction.
//!
//! Every radiator is a z-directed thin wire. RIS elements lie in the x-y plane
//! through the grid center, so neighboring elements are side by side rather
//! than stacked along their axes.

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub type Point3 = Vector3<f64>;

/// A cylindrical thin-wire dipole oriented along the global z axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Radiator {
    pub position: Point3,
    pub half_length: f64,
    pub wire_radius: f64,
}

impl Radiator {
    pub fn new(position: Point3, half_length: f64, wire_radius: f64) -> Result<Self> {
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(Error::validation(
                "half_length",
                format!("must be positive, got {half_length}"),
            ));
        }
        if !(wire_radius.is_finite() && wire_radius > 0.0) {
            return Err(Error::validation(
                "wire_radius",
                format!("must be positive, got {wire_radius}"),
            ));
        }
        if wire_radius >= half_length {
            return Err(Error::validation(
                "wire_radius",
                format!("thin-wire model needs radius < half length ({wire_radius} >= {half_length})"),
            ));
        }
        if !position.iter().all(|c| c.is_finite()) {
            return Err(Error::validation("position", "non-finite coordinate"));
        }
        Ok(Self {
            position,
            half_length,
            wire_radius,
        })
    }

    /// Same wire moved to another position.
    pub fn moved_to(&self, position: Point3) -> Self {
        Self { position, ..*self }
    }
}

/// Regular `n1 x n2` grid of element centers in a plane of constant z.
#[derive(Debug, Clone, PartialEq)]
pub struct RisGrid {
    pub n1: usize,
    pub n2: usize,
    pub spacing: f64,
    pub center: Point3,
    pub element_positions: Vec<Point3>,
}

impl RisGrid {
    pub fn len(&self) -> usize {
        self.element_positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.element_positions.is_empty()
    }

    /// Grid coordinates `(i, j)` of the element at row-major index `n`.
    pub fn grid_index(&self, n: usize) -> (usize, usize) {
        (n / self.n2, n % self.n2)
    }

    /// Radiators at every element position, all sharing one wire template.
    pub fn radiators(&self, half_length: f64, wire_radius: f64) -> Result<Vec<Radiator>> {
        self.element_positions
            .iter()
            .map(|p| Radiator::new(*p, half_length, wire_radius))
            .collect()
    }

    /// Whether `point` falls inside the box spanned by the grid and the wire
    /// extent `half_length` above and below the grid plane.
    pub fn bounding_box_contains(&self, point: &Point3, half_length: f64) -> bool {
        let half1 = 0.5 * (self.n1 as f64 - 1.0) * self.spacing;
        let half2 = 0.5 * (self.n2 as f64 - 1.0) * self.spacing;
        let rel = point - self.center;
        rel.x.abs() <= half1 && rel.y.abs() <= half2 && rel.z.abs() <= half_length
    }
}

/// Row-major grid: element `(i, j)` sits at
/// `center + ((i - (n1-1)/2) d, (j - (n2-1)/2) d, 0)`.
pub fn build_ris_grid(n1: usize, n2: usize, spacing: f64, center: Point3) -> Result<RisGrid> {
    if n1 == 0 || n2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "grid dimensions must be at least 1, got {n1}x{n2}"
        )));
    }
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "grid spacing must be positive, got {spacing}"
        )));
    }
    let off1 = 0.5 * (n1 as f64 - 1.0);
    let off2 = 0.5 * (n2 as f64 - 1.0);
    let element_positions = (0..n1)
        .flat_map(|i| (0..n2).map(move |j| (i, j)))
        .map(|(i, j)| {
            center
                + Vector3::new(
                    (i as f64 - off1) * spacing,
                    (j as f64 - off2) * spacing,
                    0.0,
                )
        })
        .collect();
    Ok(RisGrid {
        n1,
        n2,
        spacing,
        center,
        element_positions,
    })
}
