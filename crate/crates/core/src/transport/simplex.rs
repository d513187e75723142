//! Primal network simplex for the transportation problem.
//!
//! The basis is a spanning tree of the bipartite graph rows ∪ columns with
//! `m + n − 1` cells. Potentials are read off the tree, entering cells are
//! chosen by block pricing on reduced costs and the leaving cell is the
//! first blocking cell on the pivot cycle.

use super::CostMatrix;
use crate::error::{Error, Result};

pub(crate) struct SimplexSolution {
    pub cells: Vec<(usize, usize, f64)>,
    pub row_potential: Vec<f64>,
    pub col_potential: Vec<f64>,
    pub pivots: usize,
}

struct Tree {
    parent: Vec<usize>,
    parent_cell: Vec<usize>,
    depth: Vec<usize>,
}

const NO_PARENT: usize = usize::MAX;

/// Solves `min Σ c_ij π_ij` over couplings of `supply` (rows) and `demand`
/// (columns). Both vectors must be strictly positive and balanced; callers
/// strip zero-mass atoms first.
pub(crate) fn solve<C: CostMatrix + ?Sized>(
    cost: &C,
    rows: &[usize],
    cols: &[usize],
    supply: &[f64],
    demand: &[f64],
) -> Result<SimplexSolution> {
    let m = supply.len();
    let n = demand.len();
    let c = |a: usize, b: usize| cost.cost(rows[a], cols[b]);
    let cmax = rows
        .iter()
        .flat_map(|&i| cols.iter().map(move |&j| (i, j)))
        .map(|(i, j)| cost.cost(i, j))
        .fold(0.0, f64::max);
    let eps = 1e-12 * (1.0 + cmax);

    let (mut basis, mut flow) = northwest_corner(supply, demand);
    let nodes = m + n;
    let mut u = vec![0.0; m];
    let mut v = vec![0.0; n];
    let mut adjacency: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nodes];
    let mut tree = Tree {
        parent: vec![NO_PARENT; nodes],
        parent_cell: vec![NO_PARENT; nodes],
        depth: vec![0; nodes],
    };
    let total_cells = m * n;
    let block = ((total_cells as f64).sqrt() as usize).max(16).min(total_cells);
    let mut cursor = 0usize;
    let max_pivots = 50 * (nodes * nodes) + 10_000;
    let mut pivots = 0usize;
    let mut queue = Vec::with_capacity(nodes);

    loop {
        // tree and potentials
        for list in adjacency.iter_mut() {
            list.clear();
        }
        for (k, &(i, j)) in basis.iter().enumerate() {
            adjacency[i].push((m + j, k));
            adjacency[m + j].push((i, k));
        }
        tree.parent.fill(NO_PARENT);
        tree.parent[0] = 0;
        tree.depth[0] = 0;
        u[0] = 0.0;
        queue.clear();
        queue.push(0);
        let mut head = 0;
        while head < queue.len() {
            let a = queue[head];
            head += 1;
            for &(b, k) in &adjacency[a] {
                if tree.parent[b] != NO_PARENT {
                    continue;
                }
                tree.parent[b] = a;
                tree.parent_cell[b] = k;
                tree.depth[b] = tree.depth[a] + 1;
                let (i, j) = basis[k];
                if b >= m {
                    v[b - m] = c(i, j) - u[i];
                } else {
                    u[b] = c(i, j) - v[j];
                }
                queue.push(b);
            }
        }
        if queue.len() != nodes {
            return Err(Error::Infeasible("simplex basis is not a spanning tree".into()));
        }

        // block pricing
        let mut entering = None;
        let mut best = -eps;
        let mut scanned = 0;
        while scanned < total_cells {
            let end = (scanned + block).min(total_cells);
            for _ in scanned..end {
                let (i, j) = (cursor / n, cursor % n);
                let reduced = c(i, j) - u[i] - v[j];
                if reduced < best {
                    best = reduced;
                    entering = Some((i, j));
                }
                cursor += 1;
                if cursor == total_cells {
                    cursor = 0;
                }
            }
            scanned = end;
            if entering.is_some() {
                break;
            }
        }
        let Some((ei, ej)) = entering else {
            break;
        };

        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::Infeasible(format!(
                "network simplex exceeded {max_pivots} pivots"
            )));
        }

        // pivot cycle: entering cell, column side up to the apex, then row side
        let mut path_col = Vec::new();
        let mut path_row = Vec::new();
        let (mut a, mut b) = (m + ej, ei);
        while tree.depth[a] > tree.depth[b] {
            path_col.push(tree.parent_cell[a]);
            a = tree.parent[a];
        }
        while tree.depth[b] > tree.depth[a] {
            path_row.push(tree.parent_cell[b]);
            b = tree.parent[b];
        }
        while a != b {
            path_col.push(tree.parent_cell[a]);
            a = tree.parent[a];
            path_row.push(tree.parent_cell[b]);
            b = tree.parent[b];
        }
        let cycle: Vec<usize> = path_col
            .iter()
            .copied()
            .chain(path_row.iter().rev().copied())
            .collect();
        // positions 0, 2, 4, … on `cycle` lose mass
        let mut theta = f64::INFINITY;
        let mut leaving = 0;
        for (pos, &k) in cycle.iter().enumerate().step_by(2) {
            if flow[k] < theta {
                theta = flow[k];
                leaving = pos;
            }
        }
        for (pos, &k) in cycle.iter().enumerate() {
            if pos % 2 == 0 {
                flow[k] = (flow[k] - theta).max(0.0);
            } else {
                flow[k] += theta;
            }
        }
        let slot = cycle[leaving];
        basis[slot] = (ei, ej);
        flow[slot] = theta;
    }

    let cells = basis
        .iter()
        .zip(&flow)
        .filter(|(_, &f)| f > 0.0)
        .map(|(&(i, j), &f)| (i, j, f))
        .collect();
    Ok(SimplexSolution {
        cells,
        row_potential: u,
        col_potential: v,
        pivots,
    })
}

/// Initial basis with exactly `m + n − 1` cells.
fn northwest_corner(supply: &[f64], demand: &[f64]) -> (Vec<(usize, usize)>, Vec<f64>) {
    let (m, n) = (supply.len(), demand.len());
    let mut a = supply.to_vec();
    let mut b = demand.to_vec();
    let mut basis = Vec::with_capacity(m + n - 1);
    let mut flow = Vec::with_capacity(m + n - 1);
    let (mut i, mut j) = (0, 0);
    loop {
        let x = a[i].min(b[j]).max(0.0);
        basis.push((i, j));
        if i == m - 1 && j == n - 1 {
            // absorb rounding drift into the last cell
            flow.push(a[i].max(b[j]).max(0.0));
            break;
        }
        flow.push(x);
        a[i] -= x;
        b[j] -= x;
        if j == n - 1 || (i < m - 1 && a[i] <= b[j]) {
            i += 1;
        } else {
            j += 1;
        }
    }
    (basis, flow)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::DenseCost;

    #[test]
    fn northwest_corner_has_tree_size() {
        let (basis, flow) = northwest_corner(&[0.5, 0.5], &[0.25, 0.25, 0.5]);
        assert_eq!(basis.len(), 4);
        assert!((flow.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn solves_small_assignment() {
        // optimal: 0→1, 1→0 at cost 1 + 1
        let cost = DenseCost::new(2, 2, vec![5.0, 1.0, 1.0, 5.0]).unwrap();
        let sol = solve(&cost, &[0, 1], &[0, 1], &[0.5, 0.5], &[0.5, 0.5]).unwrap();
        let total: f64 = sol.cells.iter().map(|&(i, j, f)| f * cost.cost(i, j)).sum();
        assert!((total - 1.0).abs() < 1e-14);
    }
}
