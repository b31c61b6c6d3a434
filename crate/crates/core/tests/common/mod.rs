#![allow(dead_code)]

use std::path::PathBuf;

use cgap::ground::{ground, GroundProgram};
use cgap::text::parse_program;
use cgap::{Program, SocialNetwork};

pub fn program_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("programs").join(format!("{name}.cgap"))
}

pub fn load(name: &str) -> (Program, GroundProgram) {
    let src = std::fs::read_to_string(program_path(name)).unwrap();
    let p = parse_program(&src).unwrap_or_else(|e| panic!("{name}: {e}"));
    let gp = ground(&p, &SocialNetwork::new()).unwrap();
    (p, gp)
}

pub fn parse(src: &str) -> (Program, GroundProgram) {
    let p = parse_program(src).unwrap();
    let gp = ground(&p, &SocialNetwork::new()).unwrap();
    (p, gp)
}

pub fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9
}

/// Shape knobs for `random_program`.
#[derive(Debug, Clone, Copy)]
pub struct RandomShape {
    pub max_vertices: usize,
    /// Allow rules that carry one product's decision into the other's
    /// utility, which breaks independence.
    pub cross: bool,
}

fn tenth(rng: &mut impl rand::Rng, lo: u32, hi: u32) -> f64 {
    rng.gen_range(lo..=hi) as f64 / 10.0
}

/// A seeded two-product program over vertices 1..=n with one-decimal
/// constants. Decision predicates only occur in rule bodies.
pub fn random_program(seed: u64, shape: RandomShape) -> String {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=shape.max_vertices);
    let prods = ["a", "b"];
    let mut out = String::new();
    for v in 1..=n {
        out += &format!("node({v}):1 <- .\n");
    }
    // Averaging around a cycle only converges in the limit, so programs
    // with an average rule get an acyclic edge relation.
    let kinds: Vec<u32> = prods.iter().map(|_| rng.gen_range(0..5)).collect();
    let acyclic = kinds.contains(&1);
    for u in 1..=n {
        for v in 1..=n {
            if u != v && (!acyclic || u < v) && rng.gen_bool(0.35) {
                out += &format!("e({u},{v}):1 <- .\n");
            }
        }
    }
    for v in 1..=n {
        for p in prods {
            if rng.gen_bool(0.5) {
                out += &format!("{p}^U({v}):{} <- .\n", tenth(&mut rng, 1, 10));
            }
        }
    }
    for (k, p) in prods.iter().enumerate() {
        let q = prods[1 - k];
        let src = if shape.cross && rng.gen_bool(0.5) { q } else { p };
        match kinds[k] {
            0 => out += &format!("{p}^U(V):M <- e(U,V):1, {src}^D(U):M .\n"),
            1 => out += &format!("{p}^U(V): avg{{ M | e(U,V):1, {src}^D(U):M }} .\n"),
            2 => out += &format!("{p}^U(V): max{{ M | e(U,V):1, {src}^D(U):M }} .\n"),
            3 => out += &format!("{p}^U(V): max{{ M | e(U,V):1, {src}^D(U):M }} if sum >= 0.5 .\n"),
            _ => out += &format!("{p}^U(V):{} <- e(U,V):1, {src}^D(U):{} .\n", tenth(&mut rng, 1, 10), tenth(&mut rng, 1, 9)),
        }
        if rng.gen_bool(0.4) {
            let v = rng.gen_range(1..=n);
            out += &format!("{p}^U({v}):{} <- {src}^D({v}):{} .\n", tenth(&mut rng, 1, 10), tenth(&mut rng, 1, 9));
        }
    }
    out += "a^D(X), b^D(X) <~ a^U(X), b^U(X) .\n";
    out
}
