//! Tabular, stateless Q-learning: one action value per (slot, level).

use rand::Rng;

use crate::error::{ensure_positive, ensure_unit_interval, Result};

/// Action-value table of one device, `slots x levels`, slot-major.
///
/// A max-tree over the cells (each node holds the best value below it and
/// how many leaves attain it) gives O(log n) updates and greedy selection.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    slots: usize,
    levels: usize,
    values: Vec<f64>,
    /// Heap layout; leaves start at `tree.len() / 2`.
    tree: Vec<Node>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Node {
    max: f64,
    count: u32,
}

const EMPTY: Node = Node {
    max: f64::NEG_INFINITY,
    count: 0,
};

impl Node {
    fn merge(a: Node, b: Node) -> Node {
        if a.max > b.max {
            a
        } else if b.max > a.max {
            b
        } else {
            Node {
                max: a.max,
                count: a.count + b.count,
            }
        }
    }
}

impl QTable {
    /// Builds a table from explicit values (slot-major).
    ///
    /// # Panics
    /// If `values.len() != slots * levels`, the table is empty, or a value
    /// is NaN.
    pub fn from_values(slots: usize, levels: usize, values: Vec<f64>) -> Self {
        assert!(slots > 0 && levels > 0, "empty Q-table");
        assert_eq!(values.len(), slots * levels, "Q-table shape mismatch");
        assert!(values.iter().all(|v| !v.is_nan()), "NaN in Q-table");
        let width = values.len().next_power_of_two();
        let mut tree = vec![EMPTY; 2 * width];
        for (leaf, &v) in tree[width..].iter_mut().zip(&values) {
            *leaf = Node { max: v, count: 1 };
        }
        for i in (1..width).rev() {
            tree[i] = Node::merge(tree[2 * i], tree[2 * i + 1]);
        }
        QTable {
            slots,
            levels,
            values,
            tree,
        }
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, slot: usize, level: usize) -> f64 {
        self.values[self.index(slot, level)]
    }

    pub fn max_value(&self) -> f64 {
        self.tree[1].max
    }

    /// All (slot, level) cells attaining the maximum, in index order.
    pub fn argmax(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.tree[1].count as usize);
        self.collect_max(1, &mut out);
        out.into_iter()
            .map(|i| (i / self.levels, i % self.levels))
            .collect()
    }

    /// Greedy choice; ties are broken uniformly at random. The generator is
    /// only consulted when there is more than one maximizer.
    pub fn select<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, usize) {
        let root = self.tree[1];
        let idx = if root.count == 1 {
            let mut node = 1;
            while node < self.width() {
                node = if self.tree[2 * node].max == root.max {
                    2 * node
                } else {
                    2 * node + 1
                };
            }
            node - self.width()
        } else {
            let mut ties = Vec::with_capacity(root.count as usize);
            self.collect_max(1, &mut ties);
            ties[rng.random_range(0..ties.len())]
        };
        (idx / self.levels, idx % self.levels)
    }

    /// Applies the learning-rate update to one cell and returns its new value.
    pub fn update(&mut self, slot: usize, level: usize, reward: f64, alpha: f64) -> Result<f64> {
        let idx = self.index(slot, level);
        let new = update_q(self.values[idx], reward, alpha)?;
        self.values[idx] = new;
        let mut node = self.width() + idx;
        self.tree[node].max = new;
        while node > 1 {
            node /= 2;
            self.tree[node] = Node::merge(self.tree[2 * node], self.tree[2 * node + 1]);
        }
        Ok(new)
    }

    fn width(&self) -> usize {
        self.tree.len() / 2
    }

    fn index(&self, slot: usize, level: usize) -> usize {
        assert!(slot < self.slots && level < self.levels);
        slot * self.levels + level
    }

    fn collect_max(&self, node: usize, out: &mut Vec<usize>) {
        if self.tree[node].max != self.tree[1].max || self.tree[node].count == 0 {
            return;
        }
        if node >= self.width() {
            out.push(node - self.width());
        } else {
            self.collect_max(2 * node, out);
            self.collect_max(2 * node + 1, out);
        }
    }
}

/// Table of i.i.d. `U[-1, 1)` draws.
pub fn init_qtable<R: Rng + ?Sized>(
    k_slots: usize,
    p_levels: usize,
    rng: &mut R,
) -> Result<QTable> {
    ensure_positive("n_slots", k_slots as f64)?;
    ensure_positive("n_power_levels", p_levels as f64)?;
    let values = (0..k_slots * p_levels)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    Ok(QTable::from_values(k_slots, p_levels, values))
}

pub fn select_action<R: Rng + ?Sized>(q_table: &QTable, rng: &mut R) -> (usize, usize) {
    q_table.select(rng)
}

/// `q + alpha (reward - q)`.
pub fn update_q(q_old: f64, reward: f64, alpha: f64) -> Result<f64> {
    ensure_unit_interval("learning_rate", alpha)?;
    Ok(q_old + alpha * (reward - q_old))
}
