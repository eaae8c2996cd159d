mod support;

use num_bigint::BigUint;
use rand::Rng;

use bs_core::graphs::{
    enumerate_phenotypes, forest_label, graph_phenotype, phenotype, rooted_ball,
    rooted_isomorphic, unimodular_forest_label, validate, Direction, Label, MnGraph,
};
use bs_core::words::Params;
use support::{bfs_ball_oracle, permuted_copy, random_valid_graph, test_rng};

fn p23() -> Params {
    Params::new(2, 3).unwrap()
}

#[test]
fn transfer_closure_under_random_growth() {
    // Growing a valid graph only through forest-label extensions keeps it
    // valid: 10^4 random growth sequences.
    let params = [p23(), Params::new(4, 2).unwrap(), Params::new(2, 2).unwrap()];
    let mut rng = test_rng(31);
    for i in 0..10_000 {
        let p = &params[i % params.len()];
        let g = random_valid_graph(p, &mut rng, 12);
        let report = validate(p, &g);
        assert!(report.is_valid(), "sequence {i}: {report:?}");
        assert!(report.connected);
    }
}

#[test]
fn phenotype_constant_along_fuzzed_graphs() {
    let p = p23();
    let mut rng = test_rng(32);
    for _ in 0..300 {
        let g = random_valid_graph(&p, &mut rng, 15);
        let ph = graph_phenotype(&p, &g).expect("fuzzed graphs are connected and constant");
        for label in g.labels() {
            assert_eq!(phenotype(&p, label), ph);
        }
    }
}

#[test]
fn phenotype_invariant_along_single_edges() {
    // For every valid positive edge N -> M, the phenotypes agree.
    let params = [p23(), Params::new(4, 2).unwrap(), Params::new(6, 4).unwrap()];
    let mut rng = test_rng(33);
    for i in 0..3_000 {
        let p = &params[i % params.len()];
        let n = match rng.random_range(0..5) {
            0 => Label::Inf,
            _ => Label::Fin(BigUint::from(rng.random_range(1u64..=200))),
        };
        let m = forest_label(p, &n, Direction::Outgoing);
        assert_eq!(
            n.transfer_count(p.n()),
            m.transfer_count(p.m()),
            "forest edge violates the Transfer Equation"
        );
        assert_eq!(phenotype(p, &n), phenotype(p, &m), "N = {n}, M = {m}");
        let back = forest_label(p, &n, Direction::Incoming);
        assert_eq!(phenotype(p, &n), phenotype(p, &back));
    }
}

#[test]
fn unimodular_forest_label_closed_form() {
    // For |m| = |n| the outgoing forest label depends on N only through its
    // phenotype and matches N n / (N ∧ n).
    for n_param in [2i64, 3, 4, 6, -2] {
        let p = Params::new(n_param.abs(), n_param).unwrap();
        for n in 1u64..=60 {
            let label = Label::fin(n);
            let product_formula = unimodular_forest_label(&p, &label);
            let closed_form = match label.transfer_count(p.n()) {
                Label::Fin(c) => Label::Fin(c * BigUint::from(p.abs_n())),
                Label::Inf => Label::Inf,
            };
            assert_eq!(product_formula, closed_form);
            assert_eq!(forest_label(&p, &label, Direction::Outgoing), closed_form);
            let same_phenotype = unimodular_forest_label(&p, &phenotype(&p, &label));
            assert_eq!(product_formula, same_phenotype);
        }
    }
}

#[test]
fn rooted_ball_matches_bfs_oracle() {
    let p = p23();
    let mut rng = test_rng(34);
    for _ in 0..200 {
        let g = random_valid_graph(&p, &mut rng, 20);
        let center = rng.random_range(0..g.vertex_count());
        for radius in 0..4 {
            let ball = rooted_ball(&g, center, radius);
            let oracle = bfs_ball_oracle(&g, center, radius);
            assert!(
                rooted_isomorphic(&ball, &oracle).unwrap(),
                "ball mismatch at radius {radius}"
            );
        }
    }
}

#[test]
fn isomorphism_invariant_under_index_permutation() {
    let p = p23();
    let mut rng = test_rng(35);
    for _ in 0..200 {
        let g = random_valid_graph(&p, &mut rng, 15);
        let h = permuted_copy(&g, &mut rng);
        assert!(rooted_isomorphic(&g, &h).unwrap());
        assert!(rooted_isomorphic(&h, &g).unwrap());
    }
}

#[test]
fn isomorphism_is_an_equivalence_on_corpus() {
    let p = p23();
    let mut rng = test_rng(36);
    let corpus: Vec<MnGraph> = (0..12).map(|_| random_valid_graph(&p, &mut rng, 10)).collect();
    for g in &corpus {
        assert!(rooted_isomorphic(g, g).unwrap());
    }
    for a in &corpus {
        for b in &corpus {
            assert_eq!(
                rooted_isomorphic(a, b).unwrap(),
                rooted_isomorphic(b, a).unwrap()
            );
        }
    }
    // Transitivity over the sampled corpus.
    for a in &corpus {
        for b in &corpus {
            if !rooted_isomorphic(a, b).unwrap() {
                continue;
            }
            for c in &corpus {
                if rooted_isomorphic(b, c).unwrap() {
                    assert!(rooted_isomorphic(a, c).unwrap());
                }
            }
        }
    }
}

#[test]
fn phenotype_enumeration_monotone_and_known_values() {
    let p = p23();
    let mut previous = enumerate_phenotypes(&p, 1);
    assert!(previous.contains(&Label::Inf));
    for bound in 2..=60 {
        let current = enumerate_phenotypes(&p, bound);
        assert!(previous.is_subset(&current), "bound {bound}");
        previous = current;
    }
    // BS(2,2): every power of two shows up as its own phenotype.
    let p22 = Params::new(2, 2).unwrap();
    let set = enumerate_phenotypes(&p22, 16);
    for expected in [1u64, 4, 8, 16] {
        assert!(set.contains(&Label::fin(expected)));
    }
    assert!(!set.contains(&Label::fin(2)));
}

#[test]
fn serialization_round_trips_fuzzed_graphs() {
    let p = p23();
    let mut rng = test_rng(37);
    for _ in 0..100 {
        let g = random_valid_graph(&p, &mut rng, 12);
        let text = g.to_text(&p);
        let (p2, g2) = MnGraph::from_text(&text).unwrap();
        assert_eq!(p, p2);
        assert_eq!(g, g2);
        assert_eq!(g2.to_text(&p2), text);
    }
}
