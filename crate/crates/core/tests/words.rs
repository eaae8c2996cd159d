mod support;

use proptest::prelude::*;

use bs_core::words::{
    height, invert, multiply, reduce, spell, subwords, Letter, Params, Word,
};
use support::{naive_reduce, nf_tuple, random_word, test_rng, words_of_length};

fn all_params() -> Vec<Params> {
    [(2, 3), (4, 2), (2, 2), (-2, 3), (3, -3)]
        .into_iter()
        .map(|(m, n)| Params::new(m, n).unwrap())
        .collect()
}

#[test]
fn oracle_equivalence_exhaustive_short_words() {
    for p in all_params() {
        for len in 0..=6 {
            for w in words_of_length(len) {
                assert_eq!(
                    nf_tuple(&reduce(&p, &w)),
                    naive_reduce(&p, &w),
                    "params ({},{}), word {w}",
                    p.m(),
                    p.n()
                );
            }
        }
    }
}

#[test]
fn oracle_equivalence_random_long_words() {
    let mut rng = test_rng(0x5eed);
    for p in all_params() {
        for _ in 0..800 {
            let w = random_word(&mut rng, 40);
            assert_eq!(
                nf_tuple(&reduce(&p, &w)),
                naive_reduce(&p, &w),
                "params ({},{}), word {w}",
                p.m(),
                p.n()
            );
        }
    }
}

#[test]
fn uniqueness_matches_oracle_triviality() {
    // reduce(u) == reduce(v) iff the oracle reduces u v^-1 to the empty
    // word: exhaustive on short pairs, randomized beyond.
    let p = Params::new(2, 3).unwrap();
    let short: Vec<Word> = (0..=3).flat_map(words_of_length).collect();
    for u in &short {
        for v in &short {
            let same = reduce(&p, u) == reduce(&p, v);
            let oracle = naive_reduce(&p, &u.concat(&v.inverse()));
            let trivial = oracle.0 == 0.into() && oracle.1.is_empty();
            assert_eq!(same, trivial, "u = {u}, v = {v}");
        }
    }
    let mut rng = test_rng(0xab);
    for _ in 0..500 {
        let u = random_word(&mut rng, 8);
        let v = random_word(&mut rng, 8);
        let same = reduce(&p, &u) == reduce(&p, &v);
        let oracle = naive_reduce(&p, &u.concat(&v.inverse()));
        let trivial = oracle.0 == 0.into() && oracle.1.is_empty();
        assert_eq!(same, trivial, "u = {u}, v = {v}");
    }
}

#[test]
fn subwords_of_a_trivial_word_depend_on_its_spelling() {
    let w: Word = "tbbTBBB".parse().unwrap();
    let expected = ["", "t", "tb", "tbb", "tbbT", "tbbTB", "tbbTBB", "tbbTBBB"];
    let subs = subwords(&w);
    assert_eq!(subs.len(), expected.len());
    for (sub, text) in subs.iter().zip(expected) {
        assert_eq!(sub, &text.parse::<Word>().unwrap());
    }
}

fn letter_strategy() -> impl Strategy<Value = Letter> {
    prop_oneof![
        Just(Letter::B),
        Just(Letter::BInv),
        Just(Letter::T),
        Just(Letter::TInv),
    ]
}

fn word_strategy(max_len: usize) -> impl Strategy<Value = Word> {
    prop::collection::vec(letter_strategy(), 0..max_len).prop_map(Word::new)
}

fn params_strategy() -> impl Strategy<Value = Params> {
    prop_oneof![
        Just(Params::new(2, 3).unwrap()),
        Just(Params::new(4, 2).unwrap()),
        Just(Params::new(2, 2).unwrap()),
        Just(Params::new(-2, 3).unwrap()),
        Just(Params::new(3, -3).unwrap()),
    ]
}

proptest! {
    #[test]
    fn reduce_is_a_homomorphism(p in params_strategy(), u in word_strategy(30), v in word_strategy(30)) {
        let product = reduce(&p, &u.concat(&v));
        let composed = multiply(&p, &reduce(&p, &u), &reduce(&p, &v));
        prop_assert_eq!(product, composed);
    }

    #[test]
    fn reduce_fixes_spelled_forms(p in params_strategy(), w in word_strategy(30)) {
        let nf = reduce(&p, &w);
        prop_assert_eq!(reduce(&p, &spell(&nf)), nf);
    }

    #[test]
    fn inverse_cancels(p in params_strategy(), w in word_strategy(30)) {
        let nf = reduce(&p, &w);
        let inv = invert(&p, &nf);
        prop_assert!(multiply(&p, &nf, &inv).is_identity());
        prop_assert!(multiply(&p, &inv, &nf).is_identity());
        prop_assert_eq!(height(&inv), height(&nf));
    }

    #[test]
    fn height_subadditive(p in params_strategy(), u in word_strategy(25), v in word_strategy(25)) {
        let a = reduce(&p, &u);
        let b = reduce(&p, &v);
        let ab = multiply(&p, &a, &b);
        prop_assert!(height(&ab) <= height(&a) + height(&b));
    }

    #[test]
    fn subwords_are_all_prefixes(w in word_strategy(30)) {
        let subs = subwords(&w);
        prop_assert_eq!(subs.len(), w.len() + 1);
        for (i, sub) in subs.iter().enumerate() {
            prop_assert_eq!(sub.letters(), &w.letters()[..i]);
        }
    }

    #[test]
    fn parse_display_round_trip(w in word_strategy(30)) {
        let shown = w.to_string();
        let back: Word = shown.parse().unwrap();
        prop_assert_eq!(back, w);
    }
}
