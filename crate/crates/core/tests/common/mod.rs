//! Independent reference implementations shared by the integration suites.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tsr_core::teds::OrderedTree;

/// Random ordered tree with `n` nodes over labels `'a'..'a'+alphabet`.
pub fn random_tree(rng: &mut ChaCha8Rng, n: usize, alphabet: u8) -> OrderedTree<char> {
    let label = |rng: &mut ChaCha8Rng| (b'a' + rng.gen_range(0..alphabet)) as char;
    let mut t = OrderedTree::new(label(rng));
    for k in 1..n {
        let parent = rng.gen_range(0..k);
        let l = label(rng);
        t.add_child(parent, l);
    }
    t
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

struct Flat {
    labels: Vec<char>,
    /// `anc[i][j]`: node `i` is a proper ancestor of node `j` (preorder ids).
    anc: Vec<Vec<bool>>,
}

fn flatten(t: &OrderedTree<char>) -> Flat {
    let order = t.preorder();
    let mut pos = vec![0; t.len()];
    for (p, &id) in order.iter().enumerate() {
        pos[id] = p;
    }
    let n = order.len();
    let mut anc = vec![vec![false; n]; n];
    for &id in &order {
        let mut cur = t.parent(id);
        while let Some(a) = cur {
            anc[pos[a]][pos[id]] = true;
            cur = t.parent(a);
        }
    }
    Flat {
        labels: order.iter().map(|&id| *t.label(id)).collect(),
        anc,
    }
}

/// Unit-cost tree edit distance as the cheapest valid mapping, found by
/// exhaustive search: a mapping must preserve preorder and ancestry, and
/// costs one per unmapped node plus one per relabelled pair.
pub fn brute_force_ted(a: &OrderedTree<char>, b: &OrderedTree<char>) -> usize {
    let (fa, fb) = (flatten(a), flatten(b));
    let mut best = fa.labels.len() + fb.labels.len();
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let mut used = vec![false; fb.labels.len()];
    search(&fa, &fb, 0, &mut pairs, &mut used, 0, &mut best);
    best
}

fn search(
    fa: &Flat,
    fb: &Flat,
    i: usize,
    pairs: &mut Vec<(usize, usize)>,
    used: &mut [bool],
    renames: usize,
    best: &mut usize,
) {
    let (na, nb) = (fa.labels.len(), fb.labels.len());
    // Remaining nodes of `a` can add at most that many pairs.
    let optimistic = (na + nb).saturating_sub(2 * (pairs.len() + (na - i))) + renames;
    if optimistic >= *best {
        return;
    }
    if i == na {
        *best = (*best).min(na + nb - 2 * pairs.len() + renames);
        return;
    }
    search(fa, fb, i + 1, pairs, used, renames, best);
    for j in 0..nb {
        if used[j] {
            continue;
        }
        let consistent = pairs
            .iter()
            .all(|&(pi, pj)| (pi < i) == (pj < j) && fa.anc[pi][i] == fb.anc[pj][j]);
        if !consistent {
            continue;
        }
        used[j] = true;
        pairs.push((i, j));
        let cost = renames + usize::from(fa.labels[i] != fb.labels[j]);
        search(fa, fb, i + 1, pairs, used, cost, best);
        pairs.pop();
        used[j] = false;
    }
}

/// COCO 101-point interpolated AP, written directly from its definition:
/// at each recall level `r`, the best precision achieved at any recall `>= r`.
pub fn reference_ap(tps: &[bool], n_gt: usize) -> f64 {
    let mut points = Vec::new();
    let mut tp = 0usize;
    for (k, &hit) in tps.iter().enumerate() {
        tp += usize::from(hit);
        points.push((tp as f64 / n_gt as f64, tp as f64 / (k + 1) as f64));
    }
    let mut sum = 0.0;
    for step in 0..=100 {
        let r = step as f64 / 100.0;
        let p = points
            .iter()
            .filter(|(rec, _)| *rec >= r)
            .map(|(_, prec)| *prec)
            .fold(0.0, f64::max);
        sum += p;
    }
    sum / 101.0
}
