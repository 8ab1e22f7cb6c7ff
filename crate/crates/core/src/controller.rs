//! Local measurement model and the decentralized control law
//! `u_i = -k1 g_i^+ eta_i`.
//!
//! Agent `i` never sees neighbor states. It measures the transported relative
//! state `y_ij = F_j x_j - F_i x_i` on each incident edge and pulls it back
//! to its own stalk as `d_ij = -F_i^T y_ij`; the disagreement is the sum of
//! these pullbacks.

use nalgebra::{DMatrix, DVector};

use crate::dynamics::pseudoinverse;
use crate::error::{Error, Result};
use crate::harmonic::TrackingProblem;
use crate::scalar::Real;
use crate::sheaf::CellularSheaf;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerGains<T: Real> {
    k1: T,
}

impl<T: Real> ControllerGains<T> {
    pub fn new(k1: T) -> Result<Self> {
        if k1 > T::zero() && k1.is_finite_value() {
            Ok(Self { k1 })
        } else {
            Err(Error::InvalidParameter(format!(
                "k1 must be positive, got {k1}"
            )))
        }
    }

    pub fn k1(&self) -> T {
        self.k1
    }
}

/// What vertex `observer` measures about `neighbor` on their shared edge.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeMeasurement<T: Real> {
    pub edge: usize,
    pub observer: usize,
    pub neighbor: usize,
    /// `y = F_neighbor x_neighbor - F_observer x_observer`, in the edge stalk.
    pub y: DVector<T>,
    pub range: T,
    /// `y / range`; `None` when the range is zero.
    pub bearing: Option<DVector<T>>,
}

/// Measures the edge between `observer` and `neighbor` from the observer's side.
pub fn measure_edge<T: Real>(
    sheaf: &CellularSheaf<T>,
    observer: usize,
    neighbor: usize,
    x_observer: &DVector<T>,
    x_neighbor: &DVector<T>,
) -> Result<EdgeMeasurement<T>> {
    let edge = sheaf
        .graph()
        .edge_index(observer, neighbor)
        .ok_or(Error::UnknownEdge(observer, neighbor))?;
    let f_o = sheaf.restriction(observer, neighbor)?;
    let f_n = sheaf.restriction(neighbor, observer)?;
    for (f, x, what) in [
        (f_o, x_observer, "observer state"),
        (f_n, x_neighbor, "neighbor state"),
    ] {
        if x.len() != f.ncols() {
            return Err(Error::DimensionMismatch {
                context: what.into(),
                expected: f.ncols(),
                actual: x.len(),
            });
        }
    }
    let y = f_n * x_neighbor - f_o * x_observer;
    let range = y.norm();
    let bearing = (range > T::zero()).then(|| &y / range);
    Ok(EdgeMeasurement {
        edge,
        observer,
        neighbor,
        y,
        range,
        bearing,
    })
}

/// A neighbor's contribution `d_ij` expressed in the observer's stalk.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborPullback<T: Real> {
    pub neighbor: usize,
    pub d: DVector<T>,
}

impl<T: Real> EdgeMeasurement<T> {
    /// `d_ij = -F_i^T (y_ij + sigma s_e)`, with `sigma = +1` when the observer is
    /// the lower endpoint. `shift` is the formation shift on this edge, if any.
    pub fn pullback(
        &self,
        sheaf: &CellularSheaf<T>,
        shift: Option<&DVector<T>>,
    ) -> Result<NeighborPullback<T>> {
        let f_o = sheaf.restriction(self.observer, self.neighbor)?;
        let mut r = -&self.y;
        if let Some(s) = shift {
            if self.observer < self.neighbor {
                r -= s;
            } else {
                r += s;
            }
        }
        Ok(NeighborPullback {
            neighbor: self.neighbor,
            d: f_o.tr_mul(&r),
        })
    }

    /// `d_ji = F_j^T y_ij`, the same edge seen from the other side (unshifted).
    pub fn reverse_pullback(&self, sheaf: &CellularSheaf<T>) -> Result<NeighborPullback<T>> {
        let f_n = sheaf.restriction(self.neighbor, self.observer)?;
        Ok(NeighborPullback {
            neighbor: self.observer,
            d: f_n.tr_mul(&self.y),
        })
    }
}

/// `eta_i = sum_{j in N_i} d_ij`. The pullbacks must cover exactly the neighbors of `i`.
pub fn local_disagreement<T: Real>(
    sheaf: &CellularSheaf<T>,
    i: usize,
    own_state: &DVector<T>,
    pullbacks: &[NeighborPullback<T>],
) -> Result<DVector<T>> {
    sheaf.graph().check_vertex(i)?;
    let n = sheaf.vertex_dim(i);
    if own_state.len() != n {
        return Err(Error::DimensionMismatch {
            context: format!("state of vertex {i}"),
            expected: n,
            actual: own_state.len(),
        });
    }
    let neighbors = sheaf.graph().neighbors(i);
    let mut seen = vec![false; neighbors.len()];
    let mut eta = DVector::zeros(n);
    for pb in pullbacks {
        let slot =
            neighbors
                .binary_search(&pb.neighbor)
                .map_err(|_| Error::UnexpectedMeasurement {
                    vertex: i,
                    neighbor: pb.neighbor,
                })?;
        if seen[slot] {
            return Err(Error::UnexpectedMeasurement {
                vertex: i,
                neighbor: pb.neighbor,
            });
        }
        if pb.d.len() != n {
            return Err(Error::DimensionMismatch {
                context: format!("pullback from {} at vertex {i}", pb.neighbor),
                expected: n,
                actual: pb.d.len(),
            });
        }
        seen[slot] = true;
        eta += &pb.d;
    }
    if let Some(slot) = seen.iter().position(|s| !s) {
        return Err(Error::MissingMeasurement {
            vertex: i,
            neighbor: neighbors[slot],
        });
    }
    Ok(eta)
}

/// `u_i = -k1 g_i^+ eta_i`.
pub fn control_input<T: Real>(
    eta: &DVector<T>,
    g: &DMatrix<T>,
    gains: &ControllerGains<T>,
) -> Result<DVector<T>> {
    if eta.len() != g.nrows() {
        return Err(Error::DimensionMismatch {
            context: "disagreement vs. control effectiveness rows".into(),
            expected: g.nrows(),
            actual: eta.len(),
        });
    }
    Ok(pseudoinverse(g)? * eta * (-gains.k1))
}

/// Per-agent disagreement computed from edge measurements only, in agent order.
///
/// `q` and `p` are the stacked agent and target cochains; each agent's
/// disagreement uses only its own pullbacks.
pub fn decentralized_disagreement<T: Real>(
    problem: &TrackingProblem<T>,
    q: &DVector<T>,
    p: &DVector<T>,
) -> Result<Vec<DVector<T>>> {
    let x = problem.stack(q, p)?;
    let sheaf = problem.sheaf();
    let edge_layout = sheaf.edge_layout();
    let shift = problem.shift();
    problem
        .agents()
        .members()
        .iter()
        .map(|&i| {
            let xi = x.block(i).into_owned();
            let pullbacks = sheaf
                .graph()
                .neighbors(i)
                .iter()
                .map(|&j| {
                    let m = measure_edge(sheaf, i, j, &xi, &x.block(j).into_owned())?;
                    let s = shift.map(|s| {
                        s.rows(edge_layout.offset(m.edge), edge_layout.size(m.edge))
                            .into_owned()
                    });
                    m.pullback(sheaf, s.as_ref())
                })
                .collect::<Result<Vec<_>>>()?;
            local_disagreement(sheaf, i, &xi, &pullbacks)
        })
        .collect()
}

/// Stacked decentralized controls: `u_i = -k1 g_i^+ eta_i` for every agent.
pub fn decentralized_control<T: Real>(
    problem: &TrackingProblem<T>,
    q: &DVector<T>,
    p: &DVector<T>,
    g: &[DMatrix<T>],
    gains: &ControllerGains<T>,
) -> Result<Vec<DVector<T>>> {
    let eta = decentralized_disagreement(problem, q, p)?;
    check_blocks(problem, g)?;
    eta.iter()
        .zip(g)
        .map(|(e, gi)| control_input(e, gi, gains))
        .collect()
}

fn check_blocks<T: Real>(problem: &TrackingProblem<T>, g: &[DMatrix<T>]) -> Result<()> {
    if g.len() != problem.agents().len() {
        return Err(Error::DimensionMismatch {
            context: "number of control effectiveness blocks".into(),
            expected: problem.agents().len(),
            actual: g.len(),
        });
    }
    Ok(())
}

/// Ensemble form `u = k1 blkdiag(g_i^+) H e` with `e = q* - q`.
pub fn ensemble_control<T: Real>(
    problem: &TrackingProblem<T>,
    q: &DVector<T>,
    p: &DVector<T>,
    g: &[DMatrix<T>],
    gains: &ControllerGains<T>,
) -> Result<DVector<T>> {
    check_blocks(problem, g)?;
    let e = problem.tracking_error(q, p)?;
    let he = problem.h() * e;
    let layout = problem.agent_layout();
    let pinvs = g.iter().map(pseudoinverse).collect::<Result<Vec<_>>>()?;
    let total: usize = pinvs.iter().map(|m| m.nrows()).sum();
    let mut u = DVector::zeros(total);
    let mut row = 0;
    for (a, pinv) in pinvs.iter().enumerate() {
        let blk = pinv * he.rows(layout.offset(a), layout.size(a)) * gains.k1;
        u.rows_mut(row, blk.len()).copy_from(&blk);
        row += blk.len();
    }
    Ok(u)
}
