mod common;

use proptest::prelude::*;
use tsr_core::teds::{parse_table_html, teds, tree_edit_distance, EditCosts, Tag};

use common::{brute_force_ted, random_tree, seeded};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn dp_matches_exhaustive_search(seed in any::<u64>(), na in 1usize..=8, nb in 1usize..=8) {
        let mut rng = seeded(seed);
        let a = random_tree(&mut rng, na, 3);
        let b = random_tree(&mut rng, nb, 3);
        let dp = tree_edit_distance(&a, &b, &EditCosts::default());
        prop_assert_eq!(dp, brute_force_ted(&a, &b) as f64);
    }

    #[test]
    fn distance_is_symmetric_and_bounded(seed in any::<u64>(), na in 1usize..=20, nb in 1usize..=20) {
        let mut rng = seeded(seed);
        let a = random_tree(&mut rng, na, 4);
        let b = random_tree(&mut rng, nb, 4);
        let c = EditCosts::default();
        let d = tree_edit_distance(&a, &b, &c);
        prop_assert_eq!(d, tree_edit_distance(&b, &a, &c));
        prop_assert!(d <= (na + nb) as f64);
        prop_assert!(d >= (na as f64 - nb as f64).abs());
        prop_assert_eq!(tree_edit_distance(&a, &a, &c), 0.0);
    }

    #[test]
    fn triangle_inequality(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let [a, b, c] = [12, 9, 15].map(|n| random_tree(&mut rng, n, 3));
        let k = EditCosts::default();
        prop_assert!(tree_edit_distance(&a, &c, &k) <= tree_edit_distance(&a, &b, &k) + tree_edit_distance(&b, &c, &k));
    }
}

fn random_table_html(seed: u64) -> String {
    use rand::Rng;
    let mut rng = seeded(seed);
    let mut s = String::from("<table>");
    if rng.gen_bool(0.5) {
        s.push_str("<thead><tr><td></td><td colspan=\"2\"></td></tr></thead>");
    }
    s.push_str("<tbody>");
    for _ in 0..rng.gen_range(1..5) {
        s.push_str("<tr>");
        for _ in 0..rng.gen_range(1..4) {
            s.push_str("<td></td>");
        }
        s.push_str("</tr>");
    }
    s.push_str("</tbody></table>");
    s
}

#[test]
fn teds_bounds_symmetry_identity() {
    for seed in 0..60 {
        let a = parse_table_html(&random_table_html(seed)).unwrap();
        let b = parse_table_html(&random_table_html(seed + 1000)).unwrap();
        let s = teds(&a, &b);
        assert!((0.0..=1.0).contains(&s));
        assert_eq!(s, teds(&b, &a));
        assert_eq!(teds(&a, &a), 1.0);
    }
}

#[test]
fn deleting_a_cell_strictly_lowers_similarity() {
    for seed in 0..60 {
        let a = parse_table_html(&random_table_html(seed)).unwrap();
        let tds: Vec<usize> = (0..a.len()).filter(|&i| a.label(i).tag == Tag::Td).collect();
        for &td in &tds {
            let b = a.without_subtree(td);
            assert!(teds(&a, &b) < 1.0, "seed {seed}, td {td}");
        }
    }
}
