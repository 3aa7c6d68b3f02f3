use super::DirectedGraph;
use crate::{Error, Result};

/// Whether `z` d-separates every node of `x` from every node of `y`.
///
/// Reachability over (node, direction) pairs: a trail may pass a non-collider
/// only if the middle node is outside `z`, and a collider only if the middle
/// node is in `z` or has a descendant in `z`.
pub fn d_separated<G: DirectedGraph + ?Sized>(
    g: &G,
    x: &[usize],
    y: &[usize],
    z: &[usize],
) -> Result<bool> {
    let n = g.node_count();
    let mut in_x = vec![false; n];
    let mut in_y = vec![false; n];
    let mut in_z = vec![false; n];
    for (set, flags) in [(x, &mut in_x), (y, &mut in_y), (z, &mut in_z)] {
        for &v in set {
            if v >= n {
                return Err(Error::InvalidInput(format!("node {v} out of range")));
            }
            flags[v] = true;
        }
    }
    if (0..n).any(|v| (in_x[v] as u8 + in_y[v] as u8 + in_z[v] as u8) > 1) {
        return Err(Error::InvalidInput("X, Y and Z must be disjoint".into()));
    }

    // Z together with its ancestors: colliders here are open.
    let mut anc_z = in_z.clone();
    let mut stack: Vec<usize> = z.to_vec();
    while let Some(v) = stack.pop() {
        for p in g.parents_of(v) {
            if !anc_z[p] {
                anc_z[p] = true;
                stack.push(p);
            }
        }
    }

    const UP: usize = 0; // arrived from a child
    const DOWN: usize = 1; // arrived from a parent
    let mut visited = vec![[false; 2]; n];
    let mut queue: Vec<(usize, usize)> = x.iter().map(|&v| (v, UP)).collect();
    while let Some((v, dir)) = queue.pop() {
        if visited[v][dir] {
            continue;
        }
        visited[v][dir] = true;
        if !in_z[v] && in_y[v] {
            return Ok(false);
        }
        if dir == UP && !in_z[v] {
            queue.extend(g.parents_of(v).into_iter().map(|p| (p, UP)));
            queue.extend(g.children_of(v).into_iter().map(|c| (c, DOWN)));
        } else if dir == DOWN {
            if !in_z[v] {
                queue.extend(g.children_of(v).into_iter().map(|c| (c, DOWN)));
            }
            if anc_z[v] {
                queue.extend(g.parents_of(v).into_iter().map(|p| (p, UP)));
            }
        }
    }
    Ok(true)
}
