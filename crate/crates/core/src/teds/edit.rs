//! Ordered tree edit distance (Zhang–Shasha keyroot dynamic program).

use super::tree::OrderedTree;

/// Per-operation costs of an edit script.
pub trait CostModel<L> {
    fn insert(&self, node: &L) -> f64;
    fn delete(&self, node: &L) -> f64;
    fn rename(&self, from: &L, to: &L) -> f64;
}

/// Unit insert/delete; renaming is free only between identical labels
/// (same tag and, for cells, same colspan and rowspan).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EditCosts {
    pub insert_cost: f64,
    pub delete_cost: f64,
    pub rename_cost: f64,
}

impl Default for EditCosts {
    fn default() -> Self {
        EditCosts {
            insert_cost: 1.0,
            delete_cost: 1.0,
            rename_cost: 1.0,
        }
    }
}

impl<L: PartialEq> CostModel<L> for EditCosts {
    fn insert(&self, _: &L) -> f64 {
        self.insert_cost
    }

    fn delete(&self, _: &L) -> f64 {
        self.delete_cost
    }

    fn rename(&self, from: &L, to: &L) -> f64 {
        if from == to {
            0.0
        } else {
            self.rename_cost
        }
    }
}

/// Postorder view of a tree: labels, leftmost-leaf descendants and keyroots.
struct Flattened<'t, L> {
    labels: Vec<&'t L>,
    leftmost: Vec<usize>,
    keyroots: Vec<usize>,
}

impl<'t, L> Flattened<'t, L> {
    fn new(tree: &'t OrderedTree<L>) -> Self {
        let order = tree.postorder();
        let mut position = vec![0; tree.len()];
        for (pos, &node) in order.iter().enumerate() {
            position[node] = pos;
        }
        let mut leftmost = vec![0; order.len()];
        for (pos, &node) in order.iter().enumerate() {
            leftmost[pos] = match tree.children(node).first() {
                // children precede their parent in postorder
                Some(&first) => leftmost[position[first]],
                None => pos,
            };
        }
        // a keyroot is the highest node for its leftmost leaf
        let mut highest = vec![None; order.len()];
        for pos in 0..order.len() {
            highest[leftmost[pos]] = Some(pos);
        }
        let mut keyroots: Vec<usize> = highest.into_iter().flatten().collect();
        keyroots.sort_unstable();
        Flattened {
            labels: order.iter().map(|&n| tree.label(n)).collect(),
            leftmost,
            keyroots,
        }
    }
}

/// Minimal total cost of inserts, deletes and renames turning `a` into `b`.
pub fn tree_edit_distance<L, C: CostModel<L>>(a: &OrderedTree<L>, b: &OrderedTree<L>, costs: &C) -> f64 {
    let fa = Flattened::new(a);
    let fb = Flattened::new(b);
    let (n, m) = (fa.labels.len(), fb.labels.len());
    let mut tree_dist = vec![0.0; n * m];
    let mut forest = vec![0.0; (n + 1) * (m + 1)];

    for &i in &fa.keyroots {
        for &j in &fb.keyroots {
            let li = fa.leftmost[i];
            let lj = fb.leftmost[j];
            let rows = i - li + 2;
            let cols = j - lj + 2;
            let fd = |x: usize, y: usize| x * cols + y;

            forest[fd(0, 0)] = 0.0;
            for x in 1..rows {
                forest[fd(x, 0)] = forest[fd(x - 1, 0)] + costs.delete(fa.labels[li + x - 1]);
            }
            for y in 1..cols {
                forest[fd(0, y)] = forest[fd(0, y - 1)] + costs.insert(fb.labels[lj + y - 1]);
            }
            for x in 1..rows {
                let ia = li + x - 1;
                for y in 1..cols {
                    let jb = lj + y - 1;
                    let del = forest[fd(x - 1, y)] + costs.delete(fa.labels[ia]);
                    let ins = forest[fd(x, y - 1)] + costs.insert(fb.labels[jb]);
                    if fa.leftmost[ia] == li && fb.leftmost[jb] == lj {
                        let ren = forest[fd(x - 1, y - 1)] + costs.rename(fa.labels[ia], fb.labels[jb]);
                        let d = del.min(ins).min(ren);
                        forest[fd(x, y)] = d;
                        tree_dist[ia * m + jb] = d;
                    } else {
                        let p = fa.leftmost[ia] - li;
                        let q = fb.leftmost[jb] - lj;
                        let sub = forest[fd(p, q)] + tree_dist[ia * m + jb];
                        forest[fd(x, y)] = del.min(ins).min(sub);
                    }
                }
            }
        }
    }
    tree_dist[(n - 1) * m + (m - 1)]
}
