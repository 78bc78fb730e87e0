//! Steady-state hydraulics: pressure-drop kernel, flow solve, nodal
//! pressures and valve inversion.
//!
//! Every edge obeys `p_from - p_to = f(q, u) * s` with the kernel
//! `f(q, u) = q|q| / u^2`. Pipes always have `u = 1`. Return flows are the
//! negated supply flows and are never stored.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Dyn, LU};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, tolerance, Real};
use crate::scenario::LoadCondition;
use crate::topology::{incidence_matrix, BoundaryPath, NetworkTopology};

/// Relative residual allowed on the mass balance after a flow solve.
pub const FLOW_RESIDUAL_TOL: f64 = 1e-10;
/// Relative disagreement allowed between the `p_beta` values implied by
/// different valve paths.
pub const PRESSURE_CONSISTENCY_TOL: f64 = 1e-8;
/// Slack on `u <= 1` when inverting a valve at exactly the binding pressure.
const BINDING_SLACK: f64 = 1e-12;

#[inline]
pub(crate) fn kernel<T: Real>(q: T, u: T) -> T {
    q * q.abs() / (u * u)
}

/// Pressure-drop kernel `q|q| / u^2`.
pub fn f_eval<T: Real>(q: T, u: T) -> Result<T> {
    if !(u > T::zero() && u <= T::one()) {
        return Err(Error::ControlOutOfRange(to_f64(u)));
    }
    Ok(kernel(q, u))
}

fn positive<T: Real>(name: &'static str, value: T) -> Result<T> {
    if value > T::zero() {
        Ok(value)
    } else {
        Err(Error::NonPositive {
            name,
            value: to_f64(value),
        })
    }
}

/// Darcy-Weisbach resistance `2 f_d rho L / (pi^2 D^5)`, so that the
/// pressure drop is `q|q| * s`.
pub fn pipe_resistance_from_physical<T: Real>(
    friction_factor: T,
    density: T,
    length: T,
    diameter: T,
) -> Result<T> {
    let f_d = positive("friction factor", friction_factor)?;
    let rho = positive("density", density)?;
    let l = positive("length", length)?;
    let d = positive("diameter", diameter)?;
    let pi: T = lit(PI);
    Ok(lit::<T>(2.0) * f_d * rho * l / (pi * pi * d.powi(5)))
}

/// Linear valve resistance `1 / k^2`.
pub fn valve_resistance_from_k<T: Real>(k: T) -> Result<T> {
    let k = positive("valve coefficient", k)?;
    Ok(T::one() / (k * k))
}

/// Flows through the supply pipes and boundary valves. Return-pipe flows
/// are `-supply`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowVector<T: Real> {
    pub supply: DVector<T>,
    pub boundary: DVector<T>,
}

/// Valve settings, each in `(0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlVector<T: Real>(DVector<T>);

impl<T: Real> ControlVector<T> {
    pub fn new(values: DVector<T>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|&&u| !(u > T::zero() && u <= T::one())) {
            return Err(Error::ControlOutOfRange(to_f64(*bad)));
        }
        Ok(Self(values))
    }

    pub fn fully_open(n: usize) -> Self {
        Self(DVector::from_element(n, T::one()))
    }

    pub fn values(&self) -> &DVector<T> {
        &self.0
    }

    pub fn into_inner(self) -> DVector<T> {
        self.0
    }
}

/// Edge resistances. `supply` and `valves` are the estimation parameters;
/// `return_pipes`, when present, lets the simulator use return resistances
/// that differ from their supply counterparts.
#[derive(Debug, Clone, PartialEq)]
pub struct ResistanceVector<T: Real> {
    pub supply: DVector<T>,
    pub valves: DVector<T>,
    pub return_pipes: Option<DVector<T>>,
}

impl<T: Real> ResistanceVector<T> {
    pub fn new(supply: DVector<T>, valves: DVector<T>) -> Result<Self> {
        let out = Self {
            supply,
            valves,
            return_pipes: None,
        };
        out.check_positive()?;
        Ok(out)
    }

    pub fn with_return(mut self, return_pipes: DVector<T>) -> Result<Self> {
        if return_pipes.len() != self.supply.len() {
            return Err(Error::Dimension {
                what: "return pipe resistances",
                expected: self.supply.len(),
                actual: return_pipes.len(),
            });
        }
        self.return_pipes = Some(return_pipes);
        self.check_positive()?;
        Ok(self)
    }

    fn check_positive(&self) -> Result<()> {
        let all = self
            .supply
            .iter()
            .chain(self.valves.iter())
            .chain(self.return_pipes.iter().flat_map(|r| r.iter()));
        for &s in all {
            positive("resistance", s)?;
        }
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        self.supply.len() + self.valves.len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.return_pipes
            .as_ref()
            .map_or(true, |r| *r == self.supply)
    }

    /// Resistance of the return pipe mirroring supply pipe `i`.
    pub fn return_pipe(&self, i: usize) -> T {
        self.return_pipes
            .as_ref()
            .map_or(self.supply[i], |r| r[i])
    }

    /// `s_supply + s_return` per pipe, the quantity every path equation sees.
    pub fn round_trip(&self) -> DVector<T> {
        match &self.return_pipes {
            Some(r) => &self.supply + r,
            None => &self.supply * lit::<T>(2.0),
        }
    }

    /// The symmetric model reproducing the same path equations: each pipe
    /// pair is replaced by its average.
    pub fn symmetric_equivalent(&self) -> Self {
        Self {
            supply: self.round_trip() * lit::<T>(0.5),
            valves: self.valves.clone(),
            return_pipes: None,
        }
    }

    /// Stacked `[supply; valves]`, the layout of the regression columns.
    pub fn parameter_vector(&self) -> DVector<T> {
        let mut out = DVector::zeros(self.n_params());
        out.rows_mut(0, self.supply.len()).copy_from(&self.supply);
        out.rows_mut(self.supply.len(), self.valves.len())
            .copy_from(&self.valves);
        out
    }

    fn check_dims(&self, net: &NetworkTopology) -> Result<()> {
        dim("supply resistances", net.n_pipes(), self.supply.len())?;
        dim("valve resistances", net.n_valves(), self.valves.len())
    }
}

/// On-disk resistance description; `return` omitted means symmetric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResistanceFile {
    pub supply: Vec<f64>,
    #[serde(default, rename = "return", skip_serializing_if = "Option::is_none")]
    pub return_pipes: Option<Vec<f64>>,
    pub valves: Vec<f64>,
}

impl ResistanceFile {
    pub fn to_resistances<T: Real>(&self) -> Result<ResistanceVector<T>> {
        let conv = |v: &[f64]| DVector::from_iterator(v.len(), v.iter().map(|&x| lit::<T>(x)));
        let s = ResistanceVector::new(conv(&self.supply), conv(&self.valves))?;
        match &self.return_pipes {
            Some(r) => s.with_return(conv(r)),
            None => Ok(s),
        }
    }

    pub fn from_resistances<T: Real>(s: &ResistanceVector<T>) -> Self {
        let conv = |v: &DVector<T>| v.iter().map(|&x| to_f64(x)).collect::<Vec<_>>();
        Self {
            supply: conv(&s.supply),
            return_pipes: s.return_pipes.as_ref().map(conv),
            valves: conv(&s.valves),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PressureState<T: Real> {
    pub p_alpha: T,
    pub p_beta: T,
    /// Indexed by supply node id.
    pub supply_nodal: DVector<T>,
    /// Indexed by the mirrored node id.
    pub return_nodal: DVector<T>,
}

pub(crate) fn dim(what: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Dimension {
            what,
            expected,
            actual,
        })
    }
}

/// A validated network with its incidence factorization, boundary paths and
/// a parent-before-child edge order precomputed.
#[derive(Debug, Clone)]
pub struct NetworkModel<T: Real> {
    topology: NetworkTopology,
    incidence: DMatrix<T>,
    lu: LU<T, Dyn, Dyn>,
    paths: Vec<BoundaryPath>,
    edge_order: Vec<usize>,
}

impl<T: Real> NetworkModel<T> {
    pub fn new(net: &NetworkTopology) -> Result<Self> {
        let incidence = incidence_matrix(net)?.to_real::<T>();
        let paths = net.boundary_paths()?;
        let lu = incidence.clone().lu();
        if !lu.is_invertible() {
            return Err(Error::SingularIncidence);
        }
        // Breadth-first edge order from alpha: every edge after its parent.
        let mut edge_order = Vec::with_capacity(net.n_pipes());
        let mut frontier = vec![net.alpha()];
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for (j, e) in net.supply_edges().iter().enumerate() {
                if frontier.contains(&e.from) {
                    edge_order.push(j);
                    next.push(e.to);
                }
            }
            frontier = next;
        }
        Ok(Self {
            topology: net.clone(),
            incidence,
            lu,
            paths,
            edge_order,
        })
    }

    pub fn topology(&self) -> &NetworkTopology {
        &self.topology
    }

    pub fn paths(&self) -> &[BoundaryPath] {
        &self.paths
    }

    pub fn incidence(&self) -> &DMatrix<T> {
        &self.incidence
    }

    pub fn n_pipes(&self) -> usize {
        self.topology.n_pipes()
    }

    pub fn n_valves(&self) -> usize {
        self.topology.n_valves()
    }

    /// Right-hand side `[boundary; 0]` of the mass balance.
    fn balance_rhs(&self, boundary: &DVector<T>) -> DVector<T> {
        let mut rhs = DVector::zeros(self.n_pipes());
        rhs.rows_mut(0, boundary.len()).copy_from(boundary);
        rhs
    }

    pub fn solve_flows(&self, boundary: &DVector<T>) -> Result<FlowVector<T>> {
        dim("boundary flows", self.n_valves(), boundary.len())?;
        let rhs = self.balance_rhs(boundary);
        let supply = self.lu.solve(&rhs).ok_or(Error::SingularIncidence)?;
        let residual = (&self.incidence * &supply - &rhs).amax();
        let scale = boundary.amax().max(T::one());
        let tol = tolerance::<T>(FLOW_RESIDUAL_TOL) * scale;
        if residual > tol {
            return Err(Error::FlowResidual {
                residual: to_f64(residual),
                tolerance: to_f64(tol),
            });
        }
        Ok(FlowVector {
            supply,
            boundary: boundary.clone(),
        })
    }

    fn check_flows(&self, flows: &FlowVector<T>) -> Result<()> {
        dim("supply flows", self.n_pipes(), flows.supply.len())?;
        dim("boundary flows", self.n_valves(), flows.boundary.len())
    }

    /// `sum over path pipes of f(q_e, 1) * (s_supply + s_return)`.
    fn path_pipe_drop(&self, v: usize, s: &ResistanceVector<T>, flows: &FlowVector<T>) -> T {
        self.paths[v]
            .supply_edges
            .iter()
            .fold(T::zero(), |acc, &e| {
                acc + kernel(flows.supply[e], T::one()) * (s.supply[e] + s.return_pipe(e))
            })
    }

    pub fn nodal_pressures(
        &self,
        s: &ResistanceVector<T>,
        flows: &FlowVector<T>,
        u: &ControlVector<T>,
        p_alpha: T,
    ) -> Result<PressureState<T>> {
        s.check_dims(&self.topology)?;
        self.check_flows(flows)?;
        dim("valve settings", self.n_valves(), u.values().len())?;
        let edges = self.topology.supply_edges();
        let n = self.topology.n_nodes();

        let mut supply_nodal = DVector::from_element(n, p_alpha);
        for &j in &self.edge_order {
            let e = edges[j];
            supply_nodal[e.to.0] = supply_nodal[e.from.0] - kernel(flows.supply[j], T::one()) * s.supply[j];
        }

        let implied: Vec<T> = (0..self.n_valves())
            .map(|v| {
                let node = self.topology.boundary_valves()[v].0;
                let after_valve =
                    supply_nodal[node] - kernel(flows.boundary[v], u.values()[v]) * s.valves[v];
                let back_to_beta = self.paths[v].supply_edges.iter().fold(T::zero(), |acc, &e| {
                    acc + kernel(flows.supply[e], T::one()) * s.return_pipe(e)
                });
                after_valve - back_to_beta
            })
            .collect();
        let reference = implied[0];
        let scale = implied
            .iter()
            .map(|&pb| (p_alpha - pb).abs())
            .fold(p_alpha.abs(), |a, b| a.max(b));
        let tol = tolerance::<T>(PRESSURE_CONSISTENCY_TOL) * scale;
        for (v, &pb) in implied.iter().enumerate() {
            if (pb - reference).abs() > tol {
                return Err(Error::InconsistentPressures {
                    valve: v,
                    implied: to_f64(pb),
                    reference: to_f64(reference),
                });
            }
        }

        let p_beta = reference;
        // Return flows run towards beta, so pressure rises away from it.
        let mut return_nodal = DVector::from_element(n, p_beta);
        for &j in &self.edge_order {
            let e = edges[j];
            return_nodal[e.to.0] = return_nodal[e.from.0] + kernel(flows.supply[j], T::one()) * s.return_pipe(j);
        }
        Ok(PressureState {
            p_alpha,
            p_beta,
            supply_nodal,
            return_nodal,
        })
    }

    pub fn min_required_dp(&self, s: &ResistanceVector<T>, flows: &FlowVector<T>) -> Result<T> {
        s.check_dims(&self.topology)?;
        self.check_flows(flows)?;
        Ok((0..self.n_valves())
            .map(|v| {
                kernel(flows.boundary[v], T::one()) * s.valves[v] + self.path_pipe_drop(v, s, flows)
            })
            .fold(T::zero(), |a, b| a.max(b)))
    }

    pub fn required_valve_positions(
        &self,
        s: &ResistanceVector<T>,
        flows: &FlowVector<T>,
        dp: T,
    ) -> Result<ControlVector<T>> {
        s.check_dims(&self.topology)?;
        self.check_flows(flows)?;
        let mut u = DVector::zeros(self.n_valves());
        for v in 0..self.n_valves() {
            let q = flows.boundary[v];
            if !(q > T::zero()) {
                return Err(Error::NonPositiveBoundaryFlow {
                    valve: v,
                    value: to_f64(q),
                });
            }
            let available = dp - self.path_pipe_drop(v, s, flows);
            let setting = if available > T::zero() {
                q * (s.valves[v] / available).sqrt()
            } else {
                T::max_value().unwrap_or_else(|| lit(f64::MAX))
            };
            if setting > T::one() + tolerance::<T>(BINDING_SLACK) {
                return Err(Error::InfeasibleDifferentialPressure {
                    dp: to_f64(dp),
                    valve: v,
                    setting: to_f64(setting),
                    required: to_f64(self.min_required_dp(s, flows)?),
                });
            }
            u[v] = setting.min(T::one());
        }
        ControlVector::new(u)
    }

    /// Noise-free load condition for the given boundary flows and
    /// differential pressure `p_alpha - p_beta`.
    pub fn simulate(
        &self,
        s: &ResistanceVector<T>,
        boundary: &DVector<T>,
        dp: T,
        p_alpha: T,
    ) -> Result<LoadCondition<T>> {
        for (v, &q) in boundary.iter().enumerate() {
            if !(q > T::zero()) {
                return Err(Error::NonPositiveBoundaryFlow {
                    valve: v,
                    value: to_f64(q),
                });
            }
        }
        let flows = self.solve_flows(boundary)?;
        let u = self.required_valve_positions(s, &flows, dp)?;
        Ok(LoadCondition {
            index: 0,
            boundary_flows: boundary.clone(),
            valve_settings: u.into_inner(),
            p_alpha,
            p_beta: p_alpha - dp,
        })
    }

    /// Residual of every alpha-to-beta path equation for a load condition,
    /// using the full supply/return resistances.
    pub fn path_residuals(
        &self,
        s: &ResistanceVector<T>,
        lc: &LoadCondition<T>,
    ) -> Result<DVector<T>> {
        s.check_dims(&self.topology)?;
        dim("valve settings", self.n_valves(), lc.valve_settings.len())?;
        let flows = self.solve_flows(&lc.boundary_flows)?;
        let dp = lc.p_alpha - lc.p_beta;
        Ok(DVector::from_iterator(
            self.n_valves(),
            (0..self.n_valves()).map(|v| {
                dp - self.path_pipe_drop(v, s, &flows)
                    - kernel(flows.boundary[v], lc.valve_settings[v]) * s.valves[v]
            }),
        ))
    }
}

pub fn solve_supply_flows<T: Real>(
    net: &NetworkTopology,
    boundary: &DVector<T>,
) -> Result<FlowVector<T>> {
    NetworkModel::new(net)?.solve_flows(boundary)
}

pub fn nodal_pressures<T: Real>(
    net: &NetworkTopology,
    s: &ResistanceVector<T>,
    flows: &FlowVector<T>,
    u: &ControlVector<T>,
    p_alpha: T,
) -> Result<PressureState<T>> {
    NetworkModel::new(net)?.nodal_pressures(s, flows, u, p_alpha)
}

/// Smallest `p_alpha - p_beta` at which every valve can deliver its flow;
/// the binding valve is then fully open.
pub fn min_required_dp<T: Real>(
    net: &NetworkTopology,
    s: &ResistanceVector<T>,
    flows: &FlowVector<T>,
) -> Result<T> {
    NetworkModel::new(net)?.min_required_dp(s, flows)
}

/// Valve settings that make every path equation hold at differential
/// pressure `dp`.
pub fn required_valve_positions<T: Real>(
    net: &NetworkTopology,
    s: &ResistanceVector<T>,
    flows: &FlowVector<T>,
    dp: T,
) -> Result<ControlVector<T>> {
    NetworkModel::new(net)?.required_valve_positions(s, flows, dp)
}

pub fn simulate<T: Real>(
    net: &NetworkTopology,
    s: &ResistanceVector<T>,
    boundary: &DVector<T>,
    dp: T,
    p_alpha: T,
) -> Result<LoadCondition<T>> {
    NetworkModel::new(net)?.simulate(s, boundary, dp, p_alpha)
}
