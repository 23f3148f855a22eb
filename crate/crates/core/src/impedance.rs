//! Self and mutual impedances of parallel z-directed thin-wire dipoles with
//! sinusoidal current distributions, evaluated by 2-D quadrature over the two
//! wire axes.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};
use crate::geometry::{Radiator, RisGrid};
use crate::quadrature::{integrate_2d, QuadratureSpec};

/// `|sin(k0 h)|` below this is treated as a resonance of the current
/// normalization.
pub const RESONANCE_GUARD: f64 = 1e-9;

/// Distance between a point at offset `xi` on one wire and a point at offset
/// `z` on the other, for wires with horizontal separation `rho1` and axial
/// center offset `rho2`.
pub fn kernel_distance(xi: f64, z: f64, rho1: f64, rho2: f64) -> Result<f64> {
    let u = z - xi + rho2;
    let r = (rho1 * rho1 + u * u).sqrt();
    if r == 0.0 {
        return Err(Error::DegenerateGeometry(format!(
            "zero source-observation distance at xi={xi}, z={z} (overlapping wire segments)"
        )));
    }
    Ok(r)
}

/// Separation parameters `(rho1, rho2)` for a pair, self branch included.
fn separation(p: &Radiator, q: &Radiator) -> Result<(f64, f64)> {
    if p == q {
        return Ok((p.wire_radius, 0.0));
    }
    let delta = p.position - q.position;
    let rho1 = delta.x.hypot(delta.y);
    let rho2 = delta.z;
    if rho1 == 0.0 && rho2.abs() <= p.half_length + q.half_length {
        return Err(Error::DegenerateGeometry(format!(
            "collinear wires overlap (axial offset {rho2} m, combined half lengths {} m)",
            p.half_length + q.half_length
        )));
    }
    Ok((rho1, rho2))
}

/// Impedance `Z_qp` between radiators `p` and `q` in ohms. When `p == q` the
/// self branch is used, with the wire radius standing in for the separation.
pub fn mutual_impedance(
    p: &Radiator,
    q: &Radiator,
    constants: &PhysicalConstants,
    quad: &QuadratureSpec,
) -> Result<Complex64> {
    let (rho1, rho2) = separation(p, q)?;
    pair_impedance(p.half_length, q.half_length, rho1, rho2, constants, quad)
}

pub fn self_impedance(
    radiator: &Radiator,
    constants: &PhysicalConstants,
    quad: &QuadratureSpec,
) -> Result<Complex64> {
    mutual_impedance(radiator, radiator, constants, quad)
}

/// The double integral for wires of half lengths `hp`, `hq` with separation
/// parameters `rho1` (horizontal) and `rho2` (axial offset).
pub fn pair_impedance(
    hp: f64,
    hq: f64,
    rho1: f64,
    rho2: f64,
    constants: &PhysicalConstants,
    quad: &QuadratureSpec,
) -> Result<Complex64> {
    let k0 = constants.wavenumber;
    let sp = (k0 * hp).sin();
    let sq = (k0 * hq).sin();
    if sp.abs() < RESONANCE_GUARD || sq.abs() < RESONANCE_GUARD {
        return Err(Error::InvalidGeometry(format!(
            "sin(k0 h) vanishes for half lengths {hp} m / {hq} m at k0 = {k0} rad/m"
        )));
    }
    if rho1 == 0.0 && rho2.abs() <= hp + hq {
        return Err(Error::DegenerateGeometry(format!(
            "collinear wires overlap (axial offset {rho2} m)"
        )));
    }

    let k0sq = k0 * k0;
    let norm = 1.0 / (sp * sq);
    let j = Complex64::i();
    let integrand = |xi: f64, z: f64| -> Complex64 {
        let u = z - xi + rho2;
        let u2 = u * u;
        let r2 = rho1 * rho1 + u2;
        let r = r2.sqrt();
        let inv_r = 1.0 / r;
        let inv_r2 = inv_r * inv_r;
        let current = (k0 * (hp - xi.abs())).sin() * (k0 * (hq - z.abs())).sin() * norm;
        let bracket = Complex64::new(
            k0sq - (k0sq * u2 + 1.0) * inv_r2 + 3.0 * u2 * inv_r2 * inv_r2,
            -k0 * inv_r + 3.0 * k0 * u2 * inv_r2 * inv_r,
        );
        let phase = Complex64::from_polar(1.0, -k0 * r);
        phase * bracket * (current * inv_r)
    };

    let estimate = integrate_2d(integrand, &[-hp, 0.0, hp], &[-hq, 0.0, hq], quad)?;
    let prefactor = j * constants.eta0 / (4.0 * std::f64::consts::PI * k0);
    Ok(prefactor * estimate.value)
}

/// Self (diagonal) and mutual (zero-diagonal) parts of the impedance matrix
/// among `elements`. Each unordered pair is integrated once and mirrored.
pub fn impedance_matrix(
    elements: &[Radiator],
    constants: &PhysicalConstants,
    quad: &QuadratureSpec,
) -> Result<(DVector<Complex64>, DMatrix<Complex64>)> {
    let n = elements.len();
    if n == 0 {
        return Err(Error::InvalidArgument("impedance matrix needs at least one element".into()));
    }
    let self_part: Vec<Complex64> = elements
        .par_iter()
        .enumerate()
        .map(|(p, e)| self_impedance(e, constants, quad).map_err(|err| pair_error(p, p, err)))
        .collect::<Result<_>>()?;

    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|p| (p + 1..n).map(move |q| (p, q)))
        .collect();
    let values: Vec<Complex64> = pairs
        .par_iter()
        .map(|&(p, q)| {
            mutual_impedance(&elements[p], &elements[q], constants, quad)
                .map_err(|err| pair_error(p, q, err))
        })
        .collect::<Result<_>>()?;

    let mut mutual = DMatrix::zeros(n, n);
    for (&(p, q), &z) in pairs.iter().zip(&values) {
        mutual[(p, q)] = z;
        mutual[(q, p)] = z;
    }
    Ok((DVector::from_vec(self_part), mutual))
}

/// Same result as [`impedance_matrix`] for the elements of a regular grid that
/// share one wire template, but integrates once per distinct grid offset
/// `(|di|, |dj|)` instead of once per pair.
pub fn grid_impedance_matrix(
    grid: &RisGrid,
    half_length: f64,
    wire_radius: f64,
    constants: &PhysicalConstants,
    quad: &QuadratureSpec,
) -> Result<(DVector<Complex64>, DMatrix<Complex64>)> {
    let elements = grid.radiators(half_length, wire_radius)?;
    let n = elements.len();
    let zself = self_impedance(&elements[0], constants, quad).map_err(|e| pair_error(0, 0, e))?;

    // One representative element pair per distinct offset.
    let mut offsets: Vec<(usize, usize)> = Vec::new();
    let mut representative: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
    for p in 0..n {
        let (pi, pj) = grid.grid_index(p);
        for q in p + 1..n {
            let (qi, qj) = grid.grid_index(q);
            let key = (pi.abs_diff(qi), pj.abs_diff(qj));
            representative.entry(key).or_insert_with(|| {
                offsets.push(key);
                (p, q)
            });
        }
    }
    let values: Vec<Complex64> = offsets
        .par_iter()
        .map(|key| {
            let (p, q) = representative[key];
            mutual_impedance(&elements[p], &elements[q], constants, quad)
                .map_err(|err| pair_error(p, q, err))
        })
        .collect::<Result<_>>()?;
    let cache: HashMap<(usize, usize), Complex64> = offsets.into_iter().zip(values).collect();

    let mut mutual = DMatrix::zeros(n, n);
    for p in 0..n {
        let (pi, pj) = grid.grid_index(p);
        for q in p + 1..n {
            let (qi, qj) = grid.grid_index(q);
            let z = cache[&(pi.abs_diff(qi), pj.abs_diff(qj))];
            mutual[(p, q)] = z;
            mutual[(q, p)] = z;
        }
    }
    Ok((DVector::from_element(n, zself), mutual))
}

/// Impedances between one antenna and each element, entry `n` being
/// `Z(element_n, antenna)`.
pub fn coupling_vector(
    antenna: &Radiator,
    elements: &[Radiator],
    constants: &PhysicalConstants,
    quad: &QuadratureSpec,
) -> Result<DVector<Complex64>> {
    let values: Vec<Complex64> = elements
        .par_iter()
        .enumerate()
        .map(|(n, e)| {
            if e.position == antenna.position {
                return Err(Error::DegenerateGeometry(format!(
                    "antenna collocated with element {n}"
                )));
            }
            mutual_impedance(e, antenna, constants, quad)
                .map_err(|err| err.context(format!("coupling to element {n}")))
        })
        .collect::<Result<_>>()?;
    Ok(DVector::from_vec(values))
}

fn pair_error(p: usize, q: usize, err: Error) -> Error {
    Error::Pair {
        p,
        q,
        source: Box::new(err),
    }
}

/// Impedance vectors and matrices of the full Tx-RIS-Rx link.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpedanceSet {
    /// Transmitter to RIS, one entry per element.
    pub z_st: DVector<Complex64>,
    /// RIS to receiver, one entry per element.
    pub z_rs: DVector<Complex64>,
    /// Diagonal of the self-impedance matrix.
    pub z_ss_self: DVector<Complex64>,
    /// Element-to-element impedances with a zero diagonal.
    pub z_ss_mutual: DMatrix<Complex64>,
}

impl ImpedanceSet {
    pub fn len(&self) -> usize {
        self.z_st.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z_st.is_empty()
    }

    /// `Z_SS = Z_self + Z_mutual`.
    pub fn z_ss(&self) -> DMatrix<Complex64> {
        let mut total = self.z_ss_mutual.clone();
        total.set_diagonal(&self.z_ss_self);
        total
    }

    /// Copy with the mutual part scaled by `factor` (zero gives the
    /// coupling-unaware model).
    pub fn with_mutual_scaled(&self, factor: f64) -> Self {
        Self {
            z_ss_mutual: self.z_ss_mutual.map(|z| z * factor),
            ..self.clone()
        }
    }
}
