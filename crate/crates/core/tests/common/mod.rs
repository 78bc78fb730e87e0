//! Reference implementations used as oracles by the integration tests. They
//! deliberately avoid the library's own graph and linear algebra routines.
#![allow(dead_code)]

use dhpe::nalgebra::{DMatrix, DVector};
use dhpe::topology::NetworkFile;
use dhpe::{NetworkTopology, ResistanceVector};
use rand::seq::SliceRandom;
use rand::Rng;

/// A random tree grown by recursive partition of its leaves: every internal
/// node gets at least two children. Node labels, edge order and valve order
/// are shuffled; alpha stays 0 and feeds the root through a trunk pipe.
pub fn random_tree<R: Rng>(rng: &mut R, max_leaves: usize, internal_valve_prob: f64) -> NetworkFile {
    let leaves = rng.gen_range(1..=max_leaves.max(1));
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut is_leaf = vec![false, false];
    // (node, number of leaves below it)
    let mut stack = vec![(1usize, leaves)];
    while let Some((node, n)) = stack.pop() {
        if n == 1 {
            is_leaf[node] = true;
            continue;
        }
        let k = rng.gen_range(2..=n.min(4));
        // random composition of n into k positive parts
        let mut cuts: Vec<usize> = (1..n).collect();
        cuts.shuffle(rng);
        let mut cuts: Vec<usize> = cuts.into_iter().take(k - 1).collect();
        cuts.sort_unstable();
        let mut prev = 0;
        for c in cuts.into_iter().chain(std::iter::once(n)) {
            let child = is_leaf.len();
            is_leaf.push(false);
            edges.push((node, child));
            stack.push((child, c - prev));
            prev = c;
        }
    }
    edges.insert(0, (0, 1));

    let n = is_leaf.len();
    let mut relabel: Vec<usize> = (1..n).collect();
    relabel.shuffle(rng);
    let map = |i: usize| if i == 0 { 0 } else { relabel[i - 1] };

    let mut supply_edges: Vec<[usize; 2]> = edges.iter().map(|&(a, b)| [map(a), map(b)]).collect();
    supply_edges.shuffle(rng);
    let mut valves: Vec<usize> = (1..n)
        .filter(|&i| is_leaf[i] || rng.gen_bool(internal_valve_prob))
        .map(map)
        .collect();
    valves.shuffle(rng);
    NetworkFile {
        description: None,
        alpha: 0,
        supply_edges,
        boundary_valves: valves,
    }
}

pub fn network(file: &NetworkFile) -> NetworkTopology {
    dhpe::mirror_return(&NetworkTopology::from(file))
}

/// `parent[node] = (edge index, parent node)`.
pub fn parents(file: &NetworkFile) -> Vec<Option<(usize, usize)>> {
    let n = file.supply_edges.len() + 1;
    let mut p = vec![None; n];
    for (j, e) in file.supply_edges.iter().enumerate() {
        p[e[1]] = Some((j, e[0]));
    }
    p
}

/// Supply edges from alpha down to `node`, found by walking parents upward.
pub fn path_to(file: &NetworkFile, node: usize) -> Vec<usize> {
    let p = parents(file);
    let mut out = Vec::new();
    let mut cur = node;
    while let Some((e, up)) = p[cur] {
        out.push(e);
        cur = up;
    }
    out.reverse();
    out
}

/// Flow through every supply edge: the total boundary flow of valves at or
/// below the edge's downstream node.
pub fn subtree_flows(file: &NetworkFile, boundary: &[f64]) -> Vec<f64> {
    let mut q = vec![0.0; file.supply_edges.len()];
    for (v, &node) in file.boundary_valves.iter().enumerate() {
        for e in path_to(file, node) {
            q[e] += boundary[v];
        }
    }
    q
}

pub fn kernel(q: f64, u: f64) -> f64 {
    q * q.abs() / (u * u)
}

/// `phi^T phi x = phi^T y` by Gaussian elimination with partial pivoting.
pub fn normal_equations(phi: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let n = phi[0].len();
    let mut a = vec![vec![0.0; n + 1]; n];
    for (row, &yi) in phi.iter().zip(y) {
        for i in 0..n {
            for j in 0..n {
                a[i][j] += row[i] * row[j];
            }
            a[i][n] += row[i] * yi;
        }
    }
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..=n {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (a[i][n] - s) / a[i][i];
    }
    x
}

pub fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn random_resistances<R: Rng>(rng: &mut R, net: &NetworkTopology) -> ResistanceVector {
    let supply = DVector::from_fn(net.n_pipes(), |_, _| rng.gen_range(0.05..1.0));
    let valves = DVector::from_fn(net.n_valves(), |_, _| rng.gen_range(0.05..1.0));
    ResistanceVector::new(supply, valves).unwrap()
}

pub fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |a, x| a.max(x.abs()))
}
