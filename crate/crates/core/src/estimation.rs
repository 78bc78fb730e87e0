//! Parameter-linear regression `phi * s = y` over load conditions, its
//! pseudoinverse solution and the rank/nullspace identifiability check.
//!
//! Each load condition contributes one row per valve. For the row of valve
//! `v`, a supply pipe column holds `2 f(q_e, 1)` when the pipe lies on the
//! path from alpha to the valve, the valve's own column holds
//! `f(q_v, u_v)`, and every other entry is zero. The right-hand side is the
//! measured `p_alpha - p_beta`.

use std::fmt;

use nalgebra::{DMatrix, DVector, RowDVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hydraulics::{dim, kernel, FlowVector, NetworkModel};
use crate::scalar::{lit, to_f64, tolerance, Real};
use crate::scenario::LoadCondition;
use crate::topology::{BoundaryPath, EdgeKind, NetworkTopology};

/// Relative singular value cutoff used when none is given.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;
/// Nullspace coefficients below this magnitude are not reported as part of
/// an unidentifiable combination.
pub const NULLSPACE_COEFF_THRESHOLD: f64 = 1e-4;

/// Identity of one regression column, numbered the conventional way: valves
/// `1..=n_valves`, then supply pipes, then return pipes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ColumnLabel {
    pub kind: EdgeKind,
    /// Zero-based index within its kind.
    pub index: usize,
    /// One-based edge number across the whole network.
    pub edge: usize,
}

impl ColumnLabel {
    pub fn supply_pipe(index: usize, n_valves: usize) -> Self {
        Self {
            kind: EdgeKind::SupplyPipe,
            index,
            edge: n_valves + index + 1,
        }
    }

    pub fn valve(index: usize) -> Self {
        Self {
            kind: EdgeKind::BoundaryValve,
            index,
            edge: index + 1,
        }
    }

    pub fn return_pipe(index: usize, n_valves: usize, n_pipes: usize) -> Self {
        Self {
            kind: EdgeKind::ReturnPipe,
            index,
            edge: n_valves + n_pipes + index + 1,
        }
    }
}

impl fmt::Display for ColumnLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            EdgeKind::SupplyPipe => "pipe",
            EdgeKind::ReturnPipe => "return pipe",
            EdgeKind::BoundaryValve => "valve",
        };
        write!(f, "{kind} {}", self.edge)
    }
}

/// Column labels in regression order: supply pipes, then valves.
pub fn column_map(net: &NetworkTopology) -> Vec<ColumnLabel> {
    let nb = net.n_valves();
    (0..net.n_pipes())
        .map(|i| ColumnLabel::supply_pipe(i, nb))
        .chain((0..nb).map(ColumnLabel::valve))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionSystem<T: Real> {
    pub phi: DMatrix<T>,
    pub y: DVector<T>,
    pub column_map: Vec<ColumnLabel>,
}

impl<T: Real> RegressionSystem<T> {
    pub fn from_parts(phi: DMatrix<T>, y: DVector<T>, column_map: Vec<ColumnLabel>) -> Result<Self> {
        dim("observation vector", phi.nrows(), y.len())?;
        dim("column map", phi.ncols(), column_map.len())?;
        Ok(Self { phi, y, column_map })
    }

    /// Unlabelled system, columns named as if they were valves.
    pub fn unlabelled(phi: DMatrix<T>, y: DVector<T>) -> Result<Self> {
        let labels = (0..phi.ncols()).map(ColumnLabel::valve).collect();
        Self::from_parts(phi, y, labels)
    }

    pub fn n_params(&self) -> usize {
        self.phi.ncols()
    }

    pub fn n_rows(&self) -> usize {
        self.phi.nrows()
    }
}

/// One regression row for the path through `path.valve`.
pub fn regressor_row<T: Real>(path: &BoundaryPath, flows: &FlowVector<T>, u_v: T) -> RowDVector<T> {
    let n_pipes = flows.supply.len();
    let mut row = RowDVector::zeros(n_pipes + flows.boundary.len());
    let two = lit::<T>(2.0);
    for &e in &path.supply_edges {
        row[e] = two * kernel(flows.supply[e], T::one());
    }
    row[n_pipes + path.valve] = kernel(flows.boundary[path.valve], u_v);
    row
}

pub fn build_system<T: Real>(
    net: &NetworkTopology,
    conditions: &[LoadCondition<T>],
) -> Result<RegressionSystem<T>> {
    let model = NetworkModel::new(net)?;
    build_system_with_model(&model, conditions)
}

pub fn build_system_with_model<T: Real>(
    model: &NetworkModel<T>,
    conditions: &[LoadCondition<T>],
) -> Result<RegressionSystem<T>> {
    if conditions.is_empty() {
        return Err(Error::EmptySystem);
    }
    let nb = model.n_valves();
    let ns = model.n_pipes() + nb;
    let mut phi = DMatrix::zeros(conditions.len() * nb, ns);
    let mut y = DVector::zeros(conditions.len() * nb);
    for (t, lc) in conditions.iter().enumerate() {
        dim("valve settings", nb, lc.valve_settings.len())?;
        let flows = model.solve_flows(&lc.boundary_flows)?;
        let dp = lc.differential_pressure();
        for path in model.paths() {
            let r = t * nb + path.valve;
            phi.set_row(r, &regressor_row(path, &flows, lc.valve_settings[path.valve]));
            y[r] = dp;
        }
    }
    Ok(RegressionSystem {
        phi,
        y,
        column_map: column_map(model.topology()),
    })
}

/// Singular value decomposition with a full right basis, even when the
/// system has fewer rows than columns.
struct Decomposition<T: Real> {
    /// Left vectors, one per entry of `sigma`.
    u: DMatrix<T>,
    /// Right singular vectors as columns, one per parameter. Columns past
    /// `sigma.len()` belong to implicit zero singular values.
    v: DMatrix<T>,
    sigma: DVector<T>,
    cutoff: T,
}

impl<T: Real> Decomposition<T> {
    fn new(phi: &DMatrix<T>, tol: T) -> Result<Self> {
        let (m, n) = phi.shape();
        if m == 0 || n == 0 {
            return Err(Error::EmptySystem);
        }
        let svd = T::svd(phi).ok_or(Error::Decomposition)?;
        let sigma_max = svd.sigma.iter().fold(T::zero(), |a, &b| a.max(b));
        Ok(Self {
            u: svd.u,
            v: svd.v,
            sigma: svd.sigma,
            cutoff: tol * sigma_max,
        })
    }

    fn kept(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.sigma.len()).filter(move |&i| self.sigma[i] > self.cutoff)
    }

    fn rank(&self) -> usize {
        self.kept().count()
    }

    fn condition_number(&self) -> T {
        let max = self.sigma.iter().fold(T::zero(), |a, &b| a.max(b));
        let min = self.sigma.iter().fold(max, |a, &b| a.min(b));
        if min > T::zero() && self.sigma.len() == self.v.ncols() {
            max / min
        } else {
            lit(f64::INFINITY)
        }
    }

    fn solve(&self, y: &DVector<T>) -> DVector<T> {
        let mut x = DVector::zeros(self.v.nrows());
        for i in self.kept() {
            let coeff = self.u.column(i).dot(y) / self.sigma[i];
            x.axpy(coeff, &self.v.column(i), T::one());
        }
        x
    }

    fn nullspace(&self) -> Vec<DVector<T>> {
        (0..self.v.ncols())
            .filter(|&i| i >= self.sigma.len() || self.sigma[i] <= self.cutoff)
            .map(|i| self.v.column(i).into_owned())
            .collect()
    }

    /// Descending, padded with zeros to one value per parameter.
    fn sorted_sigma(&self) -> Vec<T> {
        let mut s: Vec<T> = self.sigma.iter().copied().collect();
        s.resize(self.v.ncols(), T::zero());
        s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
        s
    }
}

fn check_tol<T: Real>(tol: T) -> Result<T> {
    if tol > T::zero() {
        Ok(tol)
    } else {
        Err(Error::NonPositive {
            name: "rank tolerance",
            value: to_f64(tol),
        })
    }
}

/// Default rank tolerance, widened for single precision.
pub fn default_rank_tol<T: Real>() -> T {
    tolerance(DEFAULT_RANK_TOL)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult<T: Real> {
    /// Minimum-norm least-squares estimate in column order. Entries are not
    /// constrained to be positive.
    pub s_hat: DVector<T>,
    pub residual_norm: T,
    pub rank: usize,
    pub condition_number: T,
    /// Descending.
    pub singular_values: Vec<T>,
    pub nullspace_basis: Vec<DVector<T>>,
    pub column_map: Vec<ColumnLabel>,
}

impl<T: Real> EstimationResult<T> {
    pub fn is_full_rank(&self) -> bool {
        self.nullspace_basis.is_empty()
    }

    /// Nullspace directions over the columns they involve; empty when the
    /// estimate is unique.
    pub fn unidentifiable(&self) -> Vec<ParameterCombination> {
        combinations(&self.nullspace_basis, &self.column_map)
    }

    pub fn to_report(&self) -> EstimationReport {
        EstimationReport {
            s_hat: self.s_hat.iter().map(|&x| to_f64(x)).collect(),
            column_map: self.column_map.iter().map(ToString::to_string).collect(),
            edges: self.column_map.iter().map(|c| c.edge).collect(),
            rank: self.rank,
            condition_number: Some(to_f64(self.condition_number)).filter(|c| c.is_finite()),
            residual_norm: to_f64(self.residual_norm),
            singular_values: self.singular_values.iter().map(|&x| to_f64(x)).collect(),
            nullspace_dim: self.nullspace_basis.len(),
            unidentifiable: self.unidentifiable().iter().map(ToString::to_string).collect(),
        }
    }
}

/// Serialized form of an [`EstimationResult`]. An infinite condition number
/// is written as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    pub s_hat: Vec<f64>,
    pub column_map: Vec<String>,
    /// Edge number of each column.
    pub edges: Vec<usize>,
    pub rank: usize,
    pub condition_number: Option<f64>,
    pub residual_norm: f64,
    pub singular_values: Vec<f64>,
    pub nullspace_dim: usize,
    pub unidentifiable: Vec<String>,
}

/// Pseudoinverse solution with singular values below `tol * sigma_max`
/// treated as zero.
pub fn estimate<T: Real>(sys: &RegressionSystem<T>, tol: T) -> Result<EstimationResult<T>> {
    let tol = check_tol(tol)?;
    let dec = Decomposition::new(&sys.phi, tol)?;
    let s_hat = dec.solve(&sys.y);
    let residual_norm = (&sys.phi * &s_hat - &sys.y).norm();
    Ok(EstimationResult {
        residual_norm,
        rank: dec.rank(),
        condition_number: dec.condition_number(),
        singular_values: dec.sorted_sigma(),
        nullspace_basis: dec.nullspace(),
        column_map: sys.column_map.clone(),
        s_hat,
    })
}

/// A nullspace direction expressed over the columns it involves.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterCombination {
    pub terms: Vec<(ColumnLabel, f64)>,
}

impl fmt::Display for ParameterCombination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (label, c)) in self.terms.iter().enumerate() {
            let sign = if *c < 0.0 { "-" } else { "+" };
            if i == 0 {
                if *c < 0.0 {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            write!(f, "{:.4}*[{label}]", c.abs())?;
        }
        Ok(())
    }
}

fn combinations<T: Real>(basis: &[DVector<T>], labels: &[ColumnLabel]) -> Vec<ParameterCombination> {
    basis
        .iter()
        .map(|lambda| ParameterCombination {
            terms: lambda
                .iter()
                .enumerate()
                .filter(|(_, &c)| to_f64(c).abs() > NULLSPACE_COEFF_THRESHOLD)
                .map(|(j, &c)| (labels[j], to_f64(c)))
                .collect(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentifiabilityReport<T: Real> {
    pub rank: usize,
    pub n_params: usize,
    pub condition_number: T,
    pub singular_values: Vec<T>,
    pub nullspace_basis: Vec<DVector<T>>,
    pub unidentifiable: Vec<ParameterCombination>,
}

impl<T: Real> IdentifiabilityReport<T> {
    pub fn is_identifiable(&self) -> bool {
        self.rank == self.n_params
    }

    pub fn nullspace_dim(&self) -> usize {
        self.nullspace_basis.len()
    }
}

/// Numerical rank and nullspace of the regressor. The parameters are
/// uniquely determined by the data exactly when the nullspace is empty.
pub fn identifiability<T: Real>(sys: &RegressionSystem<T>, tol: T) -> Result<IdentifiabilityReport<T>> {
    let tol = check_tol(tol)?;
    let dec = Decomposition::new(&sys.phi, tol)?;
    let nullspace_basis = dec.nullspace();
    let unidentifiable = combinations(&nullspace_basis, &sys.column_map);
    Ok(IdentifiabilityReport {
        rank: dec.rank(),
        n_params: sys.n_params(),
        condition_number: dec.condition_number(),
        singular_values: dec.sorted_sigma(),
        nullspace_basis,
        unidentifiable,
    })
}
