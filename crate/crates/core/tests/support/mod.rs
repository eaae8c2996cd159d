//! Shared test oracles and fuzz generators. Everything here is written
//! independently of the library's own algorithms: the reducer is a global
//! fixpoint rewriter over a token list, the ball oracle is a from-scratch
//! BFS, and the valuation oracle solves the Transfer Equation case by case.

// Each test binary uses its own subset of these helpers.
#![allow(dead_code)]

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{Signed, Zero};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use bs_core::graphs::{forest_label, validate, Direction, Label, MnGraph};
use bs_core::words::{Letter, NormalForm, Params, TSign, Word};

/// A normal form flattened to plain data for cross-implementation
/// comparison: `(leading, [(sign, exponent)])`.
pub type NfTuple = (BigInt, Vec<(i8, BigInt)>);

pub fn nf_tuple(nf: &NormalForm) -> NfTuple {
    (
        nf.leading().clone(),
        nf.blocks()
            .iter()
            .map(|b| {
                let sign = match b.sign {
                    TSign::Pos => 1,
                    TSign::Neg => -1,
                };
                (sign, b.exp.clone())
            })
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    B(BigInt),
    T(i8),
}

/// Naive reducer: exhaustive pinch elimination by divisibility, then
/// repeated left-to-right exponent normalization sweeps, all over a flat
/// token list.
pub fn naive_reduce(p: &Params, w: &Word) -> NfTuple {
    let mut tokens: Vec<Token> = w
        .letters()
        .iter()
        .map(|l| match l {
            Letter::B => Token::B(BigInt::from(1)),
            Letter::BInv => Token::B(BigInt::from(-1)),
            Letter::T => Token::T(1),
            Letter::TInv => Token::T(-1),
        })
        .collect();

    // Pinch fixpoint: replace any t^e b^(divisible) t^-e factor.
    loop {
        merge_b_runs(&mut tokens);
        if !eliminate_one_pinch(p, &mut tokens) {
            break;
        }
    }

    // Exponent normalization fixpoint.
    loop {
        merge_b_runs(&mut tokens);
        if !normalize_one_exponent(p, &mut tokens) {
            break;
        }
    }

    // Read off the canonical shape.
    let mut iter = tokens.into_iter().peekable();
    let leading = match iter.peek() {
        Some(Token::B(_)) => {
            let Some(Token::B(v)) = iter.next() else {
                unreachable!()
            };
            v
        }
        _ => BigInt::zero(),
    };
    let mut blocks = Vec::new();
    while let Some(token) = iter.next() {
        let Token::T(sign) = token else {
            panic!("oracle produced adjacent b-runs");
        };
        let exp = match iter.peek() {
            Some(Token::B(_)) => {
                let Some(Token::B(v)) = iter.next() else {
                    unreachable!()
                };
                v
            }
            _ => BigInt::zero(),
        };
        blocks.push((sign, exp));
    }
    (leading, blocks)
}

fn merge_b_runs(tokens: &mut Vec<Token>) {
    let mut out: Vec<Token> = Vec::with_capacity(tokens.len());
    for token in tokens.drain(..) {
        match (out.last_mut(), token) {
            (Some(Token::B(acc)), Token::B(v)) => *acc += v,
            (_, token) => out.push(token),
        }
    }
    out.retain(|t| !matches!(t, Token::B(v) if v.is_zero()));
    *tokens = out;
}

fn eliminate_one_pinch(p: &Params, tokens: &mut Vec<Token>) -> bool {
    for i in 0..tokens.len() {
        let Token::T(e) = tokens[i] else { continue };
        // t^e t^-e with nothing between
        if let Some(Token::T(f)) = tokens.get(i + 1) {
            if *f == -e {
                tokens.drain(i..i + 2);
                return true;
            }
        }
        if let (Some(Token::B(j)), Some(Token::T(f))) = (tokens.get(i + 1), tokens.get(i + 2)) {
            if *f == -e {
                let (divisor, factor) = if e == 1 {
                    (p.m(), p.n())
                } else {
                    (p.n(), p.m())
                };
                if (j % BigInt::from(divisor)).is_zero() {
                    let replacement = (j / BigInt::from(divisor)) * BigInt::from(factor);
                    tokens.splice(i..i + 3, [Token::B(replacement)]);
                    return true;
                }
            }
        }
    }
    false
}

fn normalize_one_exponent(p: &Params, tokens: &mut Vec<Token>) -> bool {
    for i in 0..tokens.len() {
        let Token::T(e) = tokens[i] else { continue };
        let (modulus, divisor, factor) = if e == 1 {
            (p.abs_m(), p.m(), p.n())
        } else {
            (p.abs_n(), p.n(), p.m())
        };
        let exp = match tokens.get(i + 1) {
            Some(Token::B(v)) => v.clone(),
            _ => BigInt::zero(),
        };
        let modulus_big = BigInt::from(modulus);
        if !exp.is_negative() && exp < modulus_big {
            continue;
        }
        let s = exp.mod_floor(&modulus_big);
        let carry = (&exp - &s) / BigInt::from(divisor) * BigInt::from(factor);
        if matches!(tokens.get(i + 1), Some(Token::B(_))) {
            tokens[i + 1] = Token::B(s);
        } else {
            tokens.insert(i + 1, Token::B(s));
        }
        tokens.insert(i, Token::B(carry));
        return true;
    }
    false
}

/// All words of length exactly `len` over the four letters.
pub fn words_of_length(len: usize) -> Vec<Word> {
    let mut out = vec![Word::empty()];
    for _ in 0..len {
        let mut next = Vec::with_capacity(out.len() * 4);
        for w in &out {
            for &l in &Letter::ALL {
                let mut v = w.letters().to_vec();
                v.push(l);
                next.push(Word::new(v));
            }
        }
        out = next;
    }
    out
}

pub fn random_word(rng: &mut ChaCha8Rng, max_len: usize) -> Word {
    let len = rng.random_range(0..=max_len);
    (0..len)
        .map(|_| Letter::ALL[rng.random_range(0..4)])
        .collect()
}

pub fn test_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent rooted-ball oracle: BFS over an adjacency list built from
/// scratch, then an induced subgraph in (distance, id) order.
pub fn bfs_ball_oracle(g: &MnGraph, center: usize, radius: u32) -> MnGraph {
    let n = g.vertex_count();
    let mut adj = vec![Vec::new(); n];
    for &(s, t) in g.edges() {
        adj[s].push(t);
        adj[t].push(s);
    }
    let mut dist = vec![u32::MAX; n];
    dist[center] = 0;
    let mut frontier = vec![center];
    while let Some(v) = frontier.pop() {
        for &w in &adj[v] {
            if dist[w] > dist[v] + 1 {
                dist[w] = dist[v] + 1;
                frontier.push(w);
            }
        }
        frontier.sort_by_key(|&v| std::cmp::Reverse(dist[v]));
    }
    let mut kept: Vec<usize> = (0..n).filter(|&v| dist[v] <= radius).collect();
    kept.sort_by_key(|&v| (dist[v], v));
    let mut index = vec![usize::MAX; n];
    let mut ball = MnGraph::new();
    for &v in &kept {
        index[v] = ball.add_vertex(g.label(v).clone());
    }
    for &(s, t) in g.edges() {
        if index[s] != usize::MAX && index[t] != usize::MAX {
            ball.add_edge(index[s], index[t]);
        }
    }
    ball.set_root(index[center]);
    ball
}

/// Grows a random valid connected `(m,n)`-graph by transfer-respecting
/// extensions: mostly fresh forest-labeled vertices, occasionally an edge
/// between existing compatible vertices.
pub fn random_valid_graph(p: &Params, rng: &mut ChaCha8Rng, growth_steps: usize) -> MnGraph {
    let start = match rng.random_range(0..4) {
        0 => Label::Inf,
        _ => Label::Fin(BigUint::from(rng.random_range(1u64..=30))),
    };
    let mut g = MnGraph::single_vertex(start);
    for _ in 0..growth_steps {
        let v = rng.random_range(0..g.vertex_count());
        let direction = if rng.random_bool(0.5) {
            Direction::Outgoing
        } else {
            Direction::Incoming
        };
        let (cap, used) = match direction {
            Direction::Outgoing => (g.label(v).meet(p.n()), g.out_degree(v) as u64),
            Direction::Incoming => (g.label(v).meet(p.m()), g.in_degree(v) as u64),
        };
        if used >= cap {
            continue;
        }
        let fresh_label = forest_label(p, g.label(v), direction);
        // Occasionally close a cycle through an existing compatible vertex.
        let reuse = if rng.random_bool(0.25) {
            (0..g.vertex_count()).find(|&w| {
                let (w_cap, w_used, compatible) = match direction {
                    Direction::Outgoing => (
                        g.label(w).meet(p.m()),
                        g.in_degree(w) as u64,
                        g.label(v).transfer_count(p.n()) == g.label(w).transfer_count(p.m()),
                    ),
                    Direction::Incoming => (
                        g.label(w).meet(p.n()),
                        g.out_degree(w) as u64,
                        g.label(w).transfer_count(p.n()) == g.label(v).transfer_count(p.m()),
                    ),
                };
                compatible && w_used < w_cap
            })
        } else {
            None
        };
        let target = reuse.unwrap_or_else(|| g.add_vertex(fresh_label));
        match direction {
            Direction::Outgoing => g.add_edge(v, target),
            Direction::Incoming => g.add_edge(target, v),
        };
    }
    g.set_root(rng.random_range(0..g.vertex_count()));
    debug_assert!(validate(p, &g).is_valid());
    g
}

/// Relabels vertex indices by a random permutation, preserving the rooted
/// labeled structure.
pub fn permuted_copy(g: &MnGraph, rng: &mut ChaCha8Rng) -> MnGraph {
    let n = g.vertex_count();
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        perm.swap(i, j);
    }
    // perm[old] = new
    let mut out = MnGraph::new();
    let mut labels = vec![None; n];
    for v in 0..n {
        labels[perm[v]] = Some(g.label(v).clone());
    }
    for label in labels.into_iter().flatten() {
        out.add_vertex(label);
    }
    let mut edges: Vec<(usize, usize)> = g.edges().iter().map(|&(s, t)| (perm[s], perm[t])).collect();
    // Shuffle edge order too.
    for i in (1..edges.len()).rev() {
        let j = rng.random_range(0..=i);
        edges.swap(i, j);
    }
    for (s, t) in edges {
        out.add_edge(s, t);
    }
    if let Some(r) = g.root() {
        out.set_root(perm[r]);
    }
    out
}

/// Solves the Transfer Equation `v - min(v, v_q(n)) = v' - min(v', v_q(m))`
/// step by step (and its mirror for `t^-1`), the way the recursion proof
/// does; `None` when a step's hypotheses fail and the value is not pinned.
pub fn valuation_recursion_oracle(
    vm: u64,
    vn: u64,
    start: u64,
    letters: &[Letter],
) -> Option<Vec<u64>> {
    let mut v = start;
    let mut out = vec![start];
    for &letter in letters {
        match letter {
            Letter::T => {
                if v <= vn {
                    return None;
                }
                v = v - vn + vm;
            }
            Letter::TInv => {
                if v <= vm {
                    return None;
                }
                v = v - vm + vn;
            }
            Letter::B | Letter::BInv => {}
        }
        out.push(v);
    }
    Some(out)
}

/// A random reduced normal form with the given number of t-blocks, spelled
/// out as a word. Signs are drawn first; the exponent between two opposite
/// signs is kept nonzero so no pinch can occur.
pub fn random_reduced_word(p: &Params, rng: &mut ChaCha8Rng, t_blocks: usize) -> Word {
    use bs_core::words::{height, reduce, spell};
    loop {
        let signs: Vec<i8> = (0..t_blocks)
            .map(|_| if rng.random_bool(0.5) { 1 } else { -1 })
            .collect();
        let mut letters = Vec::new();
        push_power(&mut letters, rng.random_range(-3i64..=3));
        for (i, &sign) in signs.iter().enumerate() {
            letters.push(if sign == 1 { Letter::T } else { Letter::TInv });
            let modulus = if sign == 1 { p.abs_m() } else { p.abs_n() };
            let lo = match signs.get(i + 1) {
                Some(&next) if next == -sign => 1,
                _ => 0,
            };
            let exp = rng.random_range(lo..modulus);
            push_power(&mut letters, exp as i64);
        }
        let w = Word::new(letters);
        let nf = reduce(p, &w);
        if height(&nf) == t_blocks {
            return spell(&nf);
        }
    }
}

fn push_power(letters: &mut Vec<Letter>, exp: i64) {
    let letter = if exp < 0 { Letter::BInv } else { Letter::B };
    for _ in 0..exp.unsigned_abs() {
        letters.push(letter);
    }
}

/// Uniform single letters, truncated at the first index where `h^- > h^+`
/// would hold: the longest admissible prefix.
pub fn admissible_letter_trace(rng: &mut ChaCha8Rng, len: usize) -> Vec<Letter> {
    let mut out = Vec::with_capacity(len);
    let mut z = 0i64;
    for _ in 0..len {
        let letter = Letter::ALL[rng.random_range(0..4)];
        match letter {
            Letter::T => z += 1,
            Letter::TInv => {
                if z == 0 {
                    break;
                }
                z -= 1;
            }
            _ => {}
        }
        out.push(letter);
    }
    out
}
