//! Exact discrete optimal transport by successive shortest augmenting paths.
//!
//! Sources carry `supply[i]`, sinks `demand[j]`, the arcs are complete with
//! cost `cost[i * m + j]`. Each phase runs a dense Dijkstra on the residual
//! graph with reduced costs and pushes the largest feasible amount along the
//! shortest path, so the number of phases is bounded by the number of
//! saturation events. The final node potentials are an optimal dual pair.

use alloc::vec;
use alloc::vec::Vec;

const MASS_EPS: f64 = 1e-15;

/// Coupling between two atomic measures, listed by positive entries.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TransportPlan {
    /// `(source atom, target atom, mass)`.
    pub entries: Vec<(usize, usize, f64)>,
    pub cost: f64,
}

impl TransportPlan {
    pub fn source_marginal(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for &(i, _, w) in &self.entries {
            out[i] += w;
        }
        out
    }

    pub fn target_marginal(&self, m: usize) -> Vec<f64> {
        let mut out = vec![0.0; m];
        for &(_, j, w) in &self.entries {
            out[j] += w;
        }
        out
    }
}

/// Optimal plan with the dual pair `(u, v)`, `u_i + v_j ≤ c_ij`.
#[derive(Clone, Debug)]
pub struct TransportSolution {
    pub plan: TransportPlan,
    pub source_potential: Vec<f64>,
    pub target_potential: Vec<f64>,
}

impl TransportSolution {
    pub fn dual_value(&self, supply: &[f64], demand: &[f64]) -> f64 {
        let a: f64 = supply.iter().zip(&self.source_potential).map(|(w, u)| w * u).sum();
        let b: f64 = demand.iter().zip(&self.target_potential).map(|(w, v)| w * v).sum();
        a + b
    }
}

/// Solve `min Σ c_ij γ_ij` over couplings of `supply` and `demand`.
///
/// Both vectors should carry (nearly) equal total mass; the solver moves
/// `min(Σ supply, Σ demand)`.
pub fn solve_transport(supply: &[f64], demand: &[f64], cost: &[f64]) -> TransportSolution {
    let n = supply.len();
    let m = demand.len();
    assert_eq!(cost.len(), n * m, "cost matrix must be n x m");
    if n == 0 || m == 0 {
        return TransportSolution {
            plan: TransportPlan::default(),
            source_potential: vec![0.0; n],
            target_potential: vec![0.0; m],
        };
    }
    let c = |i: usize, j: usize| cost[i * m + j];

    let mut rem_supply: Vec<f64> = supply.to_vec();
    let mut rem_demand: Vec<f64> = demand.to_vec();
    let mut flow = vec![0.0f64; n * m];
    // potentials: sources 0..n, sinks n..n+m
    let mut pot = vec![0.0f64; n + m];
    for j in 0..m {
        pot[n + j] = (0..n).map(|i| c(i, j)).fold(f64::INFINITY, f64::min);
    }

    let total = supply.iter().sum::<f64>().min(demand.iter().sum::<f64>());
    let mut moved = 0.0f64;
    let mut dist = vec![f64::INFINITY; n + m];
    let mut prev = vec![usize::MAX; n + m];
    let mut done = vec![false; n + m];

    while total - moved > MASS_EPS * total.max(1.0) {
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        prev.iter_mut().for_each(|p| *p = usize::MAX);
        done.iter_mut().for_each(|d| *d = false);
        for i in 0..n {
            if rem_supply[i] > MASS_EPS {
                dist[i] = 0.0;
            }
        }
        let mut target = usize::MAX;
        loop {
            let mut v = usize::MAX;
            let mut best = f64::INFINITY;
            for (u, &d) in dist.iter().enumerate() {
                if !done[u] && d < best {
                    best = d;
                    v = u;
                }
            }
            if v == usize::MAX {
                break;
            }
            done[v] = true;
            if v >= n && rem_demand[v - n] > MASS_EPS {
                target = v;
                break;
            }
            if v < n {
                let i = v;
                for j in 0..m {
                    let w = n + j;
                    if done[w] {
                        continue;
                    }
                    let rc = (c(i, j) + pot[i] - pot[w]).max(0.0);
                    let nd = dist[i] + rc;
                    if nd < dist[w] {
                        dist[w] = nd;
                        prev[w] = i;
                    }
                }
            } else {
                let j = v - n;
                for i in 0..n {
                    if done[i] || flow[i * m + j] <= MASS_EPS {
                        continue;
                    }
                    let rc = (pot[v] - c(i, j) - pot[i]).max(0.0);
                    let nd = dist[v] + rc;
                    if nd < dist[i] {
                        dist[i] = nd;
                        prev[i] = v;
                    }
                }
            }
        }
        if target == usize::MAX {
            break;
        }
        let dt = dist[target];
        for u in 0..n + m {
            pot[u] += dist[u].min(dt);
        }

        // bottleneck along the path
        let mut delta = rem_demand[target - n];
        let mut v = target;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if u >= n {
                // backward arc sink u -> source v
                delta = delta.min(flow[v * m + (u - n)]);
            }
            v = u;
        }
        delta = delta.min(rem_supply[v]);
        let root = v;

        let mut v = target;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if u < n {
                flow[u * m + (v - n)] += delta;
            } else {
                let f = &mut flow[v * m + (u - n)];
                *f -= delta;
                if *f < MASS_EPS {
                    *f = 0.0;
                }
            }
            v = u;
        }
        rem_supply[root] -= delta;
        rem_demand[target - n] -= delta;
        moved += delta;
        if delta <= 0.0 {
            // degenerate numerical state; nothing more can move
            break;
        }
    }

    let mut entries = Vec::new();
    let mut total_cost = 0.0;
    for i in 0..n {
        for j in 0..m {
            let f = flow[i * m + j];
            if f > 0.0 {
                entries.push((i, j, f));
                total_cost += f * c(i, j);
            }
        }
    }
    TransportSolution {
        plan: TransportPlan { entries, cost: total_cost },
        source_potential: pot[..n].iter().map(|p| -p).collect(),
        target_potential: pot[n..].to_vec(),
    }
}
