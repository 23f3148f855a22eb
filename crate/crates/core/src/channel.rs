//! End-to-end impedance channel, the per-configuration model matrix `B`, its
//! real block form `D`, random RIS load sequences and noisy observations.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::impedance::ImpedanceSet;
use crate::linalg::{ComplexSystem, RCOND_THRESHOLD};
use crate::rng::{substream, LOADS_STREAM};
use crate::scenario::Scenario;

/// Tunable loads, one row per transmission and one column per element.
#[derive(Debug, Clone, PartialEq)]
pub struct RisLoadSequence {
    pub loads: DMatrix<Complex64>,
    pub generation_seed: u64,
}

impl RisLoadSequence {
    pub fn num_transmissions(&self) -> usize {
        self.loads.nrows()
    }

    pub fn num_elements(&self) -> usize {
        self.loads.ncols()
    }

    /// Diagonal of `Z_RIS,g`.
    pub fn configuration(&self, g: usize) -> DVector<Complex64> {
        self.loads.row(g).transpose()
    }
}

/// Draws `R + j omega L` loads with R and L i.i.d. uniform over their ranges,
/// row by row, R before L for each element.
pub fn sample_loads_with<R: Rng + ?Sized>(
    num_transmissions: usize,
    num_elements: usize,
    resistance: (f64, f64),
    inductance: (f64, f64),
    omega: f64,
    rng: &mut R,
) -> Result<DMatrix<Complex64>> {
    if num_transmissions == 0 || num_elements == 0 {
        return Err(Error::InvalidArgument(format!(
            "load sequence needs G >= 1 and N >= 1, got G={num_transmissions}, N={num_elements}"
        )));
    }
    let r_dist = Uniform::new_inclusive(resistance.0, resistance.1)
        .map_err(|e| Error::InvalidArgument(format!("resistance range {resistance:?}: {e}")))?;
    let l_dist = Uniform::new_inclusive(inductance.0, inductance.1)
        .map_err(|e| Error::InvalidArgument(format!("inductance range {inductance:?}: {e}")))?;
    if inductance.0 <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "inductance range must be positive, got {inductance:?}"
        )));
    }
    let mut loads = DMatrix::zeros(num_transmissions, num_elements);
    for g in 0..num_transmissions {
        for n in 0..num_elements {
            let r = r_dist.sample(rng);
            let l = l_dist.sample(rng);
            loads[(g, n)] = Complex64::new(r, omega * l);
        }
    }
    Ok(loads)
}

/// The scenario's load sequence, drawn from its dedicated `"loads"` substream.
pub fn sample_loads(scenario: &Scenario) -> Result<RisLoadSequence> {
    let mut rng = substream(scenario.rng_seed, LOADS_STREAM);
    let loads = sample_loads_with(
        scenario.num_transmissions,
        scenario.num_elements(),
        scenario.load_resistance_range,
        scenario.load_inductance_range,
        scenario.constants.omega(),
        &mut rng,
    )?;
    Ok(RisLoadSequence {
        loads,
        generation_seed: scenario.rng_seed,
    })
}

fn loaded_system(
    z_ss: &DMatrix<Complex64>,
    loads: &DVector<Complex64>,
) -> Result<ComplexSystem> {
    let mut a = z_ss.clone();
    for (i, z) in loads.iter().enumerate() {
        a[(i, i)] += z;
    }
    ComplexSystem::new(a)
}

/// `h = z_RS^T (Z_SS + Z_RIS)^-1 z_ST` through one LU solve.
pub fn e2e_channel(
    z_rs: &DVector<Complex64>,
    z_ss_total: &DMatrix<Complex64>,
    z_ris: &DVector<Complex64>,
    z_st: &DVector<Complex64>,
) -> Result<Complex64> {
    let system = loaded_system(z_ss_total, z_ris)?;
    let y = system.solve(z_st);
    Ok(z_rs.dot(&y))
}

/// Complex `G x N` model matrix with the worst conditioning seen among its
/// per-configuration systems.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelMatrix {
    pub b: DMatrix<Complex64>,
    pub min_rcond: f64,
}

/// Row `g` is `z_RS^T (Z_self + Z_mutual + Z_RIS,g)^-1`. `Z_SS` is complex
/// symmetric, so the row is the solution of the untransposed system with
/// right-hand side `z_RS`. Passing `None` for the mutual part gives the
/// coupling-unaware model.
pub fn build_b(
    z_rs: &DVector<Complex64>,
    z_ss_self: &DVector<Complex64>,
    z_ss_mutual: Option<&DMatrix<Complex64>>,
    loads: &RisLoadSequence,
) -> Result<ModelMatrix> {
    let n = z_rs.len();
    if z_ss_self.len() != n || loads.num_elements() != n {
        return Err(Error::InvalidArgument(format!(
            "dimension mismatch: z_RS has {n} entries, self part {}, loads {}",
            z_ss_self.len(),
            loads.num_elements()
        )));
    }
    let Some(mutual) = z_ss_mutual else {
        return diagonal_b(z_rs, z_ss_self, loads);
    };
    let mut z_ss = mutual.clone();
    z_ss.set_diagonal(z_ss_self);

    let rows: Vec<(DVector<Complex64>, f64)> = (0..loads.num_transmissions())
        .into_par_iter()
        .map(|g| {
            let system = loaded_system(&z_ss, &loads.configuration(g)).map_err(|e| match e {
                Error::SingularModel { rcond, .. } => Error::SingularModel { row: Some(g), rcond },
                other => other,
            })?;
            Ok((system.solve(z_rs), system.rcond()))
        })
        .collect::<Result<_>>()?;

    let mut b = DMatrix::zeros(rows.len(), n);
    let mut min_rcond = f64::INFINITY;
    for (g, (row, rcond)) in rows.iter().enumerate() {
        b.set_row(g, &row.transpose());
        min_rcond = min_rcond.min(*rcond);
    }
    Ok(ModelMatrix { b, min_rcond })
}

/// Without mutual coupling every system is diagonal.
fn diagonal_b(
    z_rs: &DVector<Complex64>,
    z_ss_self: &DVector<Complex64>,
    loads: &RisLoadSequence,
) -> Result<ModelMatrix> {
    let n = z_rs.len();
    let g_count = loads.num_transmissions();
    let mut b = DMatrix::zeros(g_count, n);
    let mut min_rcond = f64::INFINITY;
    for g in 0..g_count {
        let diag = z_ss_self + loads.configuration(g);
        let (lo, hi) = diag
            .iter()
            .map(|z| z.norm())
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
        let rcond = if hi > 0.0 && hi.is_finite() { lo / hi } else { 0.0 };
        if !(rcond >= RCOND_THRESHOLD) {
            return Err(Error::SingularModel { row: Some(g), rcond });
        }
        for i in 0..n {
            b[(g, i)] = z_rs[i] / diag[i];
        }
        min_rcond = min_rcond.min(rcond);
    }
    Ok(ModelMatrix { b, min_rcond })
}

/// `B` for either the full impedance set or its coupling-unaware version.
pub fn model_matrix(
    set: &ImpedanceSet,
    loads: &RisLoadSequence,
    include_mutual: bool,
) -> Result<ModelMatrix> {
    build_b(
        &set.z_rs,
        &set.z_ss_self,
        include_mutual.then_some(&set.z_ss_mutual),
        loads,
    )
}

/// Real `2G x 2N` block form `[[Re B, -Im B], [Im B, Re B]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealifiedModel {
    pub d: DMatrix<f64>,
    pub includes_mutual_coupling: bool,
}

impl RealifiedModel {
    /// Recovers `B` from the top block row.
    pub fn complex_matrix(&self) -> DMatrix<Complex64> {
        let g = self.d.nrows() / 2;
        let n = self.d.ncols() / 2;
        DMatrix::from_fn(g, n, |i, j| Complex64::new(self.d[(i, j)], -self.d[(i, j + n)]))
    }

    /// Largest deviation of the bottom block row from the structure implied by
    /// the top one.
    pub fn block_structure_error(&self) -> f64 {
        let g = self.d.nrows() / 2;
        let n = self.d.ncols() / 2;
        let mut worst = 0.0f64;
        for i in 0..g {
            for j in 0..n {
                worst = worst.max((self.d[(i + g, j)] + self.d[(i, j + n)]).abs());
                worst = worst.max((self.d[(i + g, j + n)] - self.d[(i, j)]).abs());
            }
        }
        worst
    }
}

pub fn realify(b: &DMatrix<Complex64>, includes_mutual_coupling: bool) -> RealifiedModel {
    let (g, n) = b.shape();
    let mut d = DMatrix::zeros(2 * g, 2 * n);
    for i in 0..g {
        for j in 0..n {
            let v = b[(i, j)];
            d[(i, j)] = v.re;
            d[(i, j + n)] = -v.im;
            d[(i + g, j)] = v.im;
            d[(i + g, j + n)] = v.re;
        }
    }
    RealifiedModel {
        d,
        includes_mutual_coupling,
    }
}

/// `[Re v; Im v]`.
pub fn realify_vec(v: &DVector<Complex64>) -> DVector<f64> {
    let n = v.len();
    DVector::from_fn(2 * n, |i, _| if i < n { v[i].re } else { v[i - n].im })
}

pub fn complexify_vec(x: &DVector<f64>) -> DVector<Complex64> {
    let n = x.len() / 2;
    DVector::from_fn(n, |i, _| Complex64::new(x[i], x[i + n]))
}

/// Real stacked form `[Re z_ST; Im z_ST]` of a channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelVector(pub DVector<f64>);

impl ChannelVector {
    pub fn from_complex(z: &DVector<Complex64>) -> Self {
        Self(realify_vec(z))
    }

    pub fn to_complex(&self) -> DVector<Complex64> {
        complexify_vec(&self.0)
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }
}

/// `r = sqrt(P_T) D x + w` with `w ~ N(0, sigma2/2 I)`. `sigma2 = None`
/// suppresses the noise.
pub fn generate_observations<R: Rng + ?Sized>(
    model: &RealifiedModel,
    x: &ChannelVector,
    p_t: f64,
    sigma2: Option<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    if !(p_t.is_finite() && p_t > 0.0) {
        return Err(Error::InvalidArgument(format!("transmit power must be positive, got {p_t}")));
    }
    let mut r = &model.d * &x.0 * p_t.sqrt();
    if let Some(sigma2) = sigma2 {
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::InvalidArgument(format!("noise variance must be positive, got {sigma2}")));
        }
        let normal = Normal::new(0.0, (0.5 * sigma2).sqrt())
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        for v in r.iter_mut() {
            *v += normal.sample(rng);
        }
    }
    Ok(r)
}
