//! A minimal scalar reverse-mode tape used as an independent oracle for the
//! caching loss. Every node stores its value and the local partial
//! derivatives with respect to its inputs.

use std::cell::RefCell;

/// Value plus `(parent, local derivative)` pairs.
type Node = (f64, Vec<(usize, f64)>);

#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

#[derive(Clone, Copy)]
pub struct Var {
    pub idx: usize,
    pub value: f64,
}

impl Tape {
    fn push(&self, value: f64, parents: Vec<(usize, f64)>) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push((value, parents));
        Var {
            idx: nodes.len() - 1,
            value,
        }
    }

    pub fn leaf(&self, value: f64) -> Var {
        self.push(value, Vec::new())
    }

    /// Same value, no gradient path.
    pub fn stop(&self, x: Var) -> Var {
        self.leaf(x.value)
    }

    pub fn add(&self, a: Var, b: Var) -> Var {
        self.push(a.value + b.value, vec![(a.idx, 1.0), (b.idx, 1.0)])
    }

    pub fn sub(&self, a: Var, b: Var) -> Var {
        self.push(a.value - b.value, vec![(a.idx, 1.0), (b.idx, -1.0)])
    }

    pub fn mul(&self, a: Var, b: Var) -> Var {
        self.push(a.value * b.value, vec![(a.idx, b.value), (b.idx, a.value)])
    }

    pub fn scale(&self, a: Var, w: f64) -> Var {
        self.push(a.value * w, vec![(a.idx, w)])
    }

    /// `sum_i w_i x_i` for constant weights.
    pub fn weighted_sum(&self, terms: &[(Var, f64)]) -> Var {
        let value = terms.iter().map(|(v, w)| v.value * w).sum();
        self.push(value, terms.iter().map(|(v, w)| (v.idx, *w)).collect())
    }

    pub fn sum(&self, terms: &[Var]) -> Var {
        let value = terms.iter().map(|v| v.value).sum();
        self.push(value, terms.iter().map(|v| (v.idx, 1.0)).collect())
    }

    /// Gradient of `root` with respect to every node.
    pub fn gradient(&self, root: Var) -> Vec<f64> {
        let nodes = self.nodes.borrow();
        let mut adj = vec![0.0; nodes.len()];
        adj[root.idx] = 1.0;
        for i in (0..=root.idx).rev() {
            let g = adj[i];
            if g == 0.0 {
                continue;
            }
            for &(p, d) in &nodes[i].1 {
                adj[p] += g * d;
            }
        }
        adj
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule_and_stop() {
        let t = Tape::default();
        let x = t.leaf(3.0);
        let y = t.leaf(2.0);
        let xy = t.mul(x, y);
        let sx = t.stop(x);
        let z = t.add(xy, t.mul(sx, sx));
        let g = t.gradient(z);
        assert_eq!(z.value, 15.0);
        assert_eq!(g[x.idx], 2.0);
        assert_eq!(g[y.idx], 3.0);
    }
}
