use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashSet;

use super::HarnessError;
use crate::model::{Fact, Program, Value};
use crate::parser::{parse_facts, parse_program, Delta};
use crate::store::FactSet;

const PATH_RULES: &str = "D(Y,Z) :- B(a,Y,Z).\nD(Y,Z) :- D(X,Z1), B(X,Y,Z2), Z = Z1 + Z2.\n";

/// A program, its explicit facts and a representative update.
#[derive(Clone, Debug)]
pub struct Instance {
    pub program: Program,
    pub facts: FactSet,
    pub delta: Delta,
}

/// Rooted DAG for single-source path enumeration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SspeSpec {
    pub nodes: usize,
    pub edges: usize,
    pub seed: u64,
    /// Edge lengths are drawn uniformly from `1..=max_length`.
    pub max_length: i64,
    /// Edges deleted by the representative update.
    pub deletions: usize,
}

impl Default for SspeSpec {
    fn default() -> Self {
        SspeSpec { nodes: 1000, edges: 10_000, seed: 0, max_length: 1, deletions: 100 }
    }
}

/// Shape of a random stratified program with negation and built-ins.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RandomSpec {
    pub seed: u64,
    pub rules: usize,
    /// Predicates that head no rule.
    pub base_predicates: usize,
    /// Predicates defined by rules.
    pub derived_predicates: usize,
    pub max_arity: usize,
    pub facts: usize,
    /// Number of distinct constants.
    pub domain: usize,
    pub negation: bool,
    pub builtins: bool,
    /// Allow rules whose body mentions predicates of the head's own layer.
    pub recursion: bool,
}

impl Default for RandomSpec {
    fn default() -> Self {
        RandomSpec {
            seed: 0,
            rules: 6,
            base_predicates: 3,
            derived_predicates: 3,
            max_arity: 2,
            facts: 60,
            domain: 6,
            negation: true,
            builtins: true,
            recursion: true,
        }
    }
}

impl RandomSpec {
    /// The fuzz corpus member for `seed`: 1 to 6 rules over 10 to 200 facts,
    /// with the constant domain growing with the fact count.
    pub fn fuzz(seed: u64) -> RandomSpec {
        let facts = 10 + (seed.wrapping_mul(37) % 191) as usize;
        RandomSpec { seed, rules: 1 + (seed % 6) as usize, facts, domain: 3 + facts / 20, ..RandomSpec::default() }
    }
}

/// A generator with its size parameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BenchmarkSpec {
    /// `S(Y1,Y2) :- R(X,Y1), R(X,Y2)` over `R(ai,b), R(ai,ci)`.
    SelfJoin { n: usize },
    /// Path lengths from `a` over the star-and-bipartite graph.
    PathEnumeration { n: usize },
    /// Four-node reachability with a cycle-free alternative derivation.
    Reachability,
    Sspe(SspeSpec),
    Random(RandomSpec),
}

impl BenchmarkSpec {
    /// Generator id as used on the command line.
    pub fn id(&self) -> &'static str {
        match self {
            BenchmarkSpec::SelfJoin { .. } => "ex1",
            BenchmarkSpec::PathEnumeration { .. } => "ex2",
            BenchmarkSpec::Reachability => "ex3",
            BenchmarkSpec::Sspe(_) => "sspe",
            BenchmarkSpec::Random(_) => "random",
        }
    }

    pub fn generate(&self) -> Result<Instance, HarnessError> {
        Ok(match self {
            BenchmarkSpec::SelfJoin { n } => {
                let (program, facts) = gen_self_join(*n);
                let deletions = (1..=*n).map(|i| fact("R", [sym(&format!("a{i}")), sym(&format!("c{i}"))]));
                Instance { program, facts, delta: Delta::new(deletions, []) }
            }
            BenchmarkSpec::PathEnumeration { n } => {
                let (program, facts) = gen_path_enumeration(*n);
                let delta = Delta::new([fact("B", [sym("a"), sym("b1"), Value::Int(1)])], []);
                Instance { program, facts, delta }
            }
            BenchmarkSpec::Reachability => {
                let (program, facts) = gen_reachability();
                Instance { program, facts, delta: Delta::new([fact("A", [sym("a")])], []) }
            }
            BenchmarkSpec::Sspe(spec) => {
                let (program, facts) = gen_sspe(spec)?;
                let delta = random_delete(&facts, spec.deletions.min(facts.len()), spec.seed ^ 0x5eed)?;
                Instance { program, facts, delta }
            }
            BenchmarkSpec::Random(spec) => {
                let (program, facts) = gen_random(spec)?;
                let delta = random_update(&facts, spec.domain, spec.seed ^ 0x5eed);
                Instance { program, facts, delta }
            }
        })
    }
}

fn sym(name: &str) -> Value {
    Value::sym(name)
}

fn fact<const N: usize>(pred: &str, args: [Value; N]) -> Fact {
    Fact::new(pred, args)
}

/// `E = {R(ai,b), R(ai,ci) | 1 ≤ i ≤ n}` under a self-join rule.
pub fn gen_self_join(n: usize) -> (Program, FactSet) {
    let program = parse_program("S(Y1,Y2) :- R(X,Y1), R(X,Y2).").expect("fixed program parses");
    let mut facts = FactSet::new();
    for i in 1..=n {
        let a = sym(&format!("a{i}"));
        facts.insert(&fact("R", [a, sym("b")]));
        facts.insert(&fact("R", [a, sym(&format!("c{i}"))]));
    }
    (program, facts)
}

/// `E = {B(a,b1,1), B(a,ci,1), B(bi,dj,1) | 1 ≤ i,j ≤ n}` under the path-length rules.
pub fn gen_path_enumeration(n: usize) -> (Program, FactSet) {
    let program = parse_program(PATH_RULES).expect("fixed program parses");
    let mut facts = FactSet::new();
    let one = Value::Int(1);
    facts.insert(&fact("B", [sym("a"), sym("b1"), one]));
    for i in 1..=n {
        facts.insert(&fact("B", [sym("a"), sym(&format!("c{i}")), one]));
    }
    for i in 1..=n {
        for j in 1..=n {
            facts.insert(&fact("B", [sym(&format!("b{i}")), sym(&format!("d{j}")), one]));
        }
    }
    (program, facts)
}

/// `A(Y) :- A(X), B(X,Y)` over `A(a), A(b), A(d)` and the edges `a→c, b→c, c→d, d→e`.
pub fn gen_reachability() -> (Program, FactSet) {
    let program = parse_program("A(Y) :- A(X), B(X,Y).").expect("fixed program parses");
    let facts = parse_facts("A(a). A(b). A(d). B(a,c). B(b,c). B(c,d). B(d,e).")
        .expect("fixed facts parse")
        .iter()
        .collect();
    (program, facts)
}

fn node(i: usize) -> Value {
    if i == 0 {
        sym("a")
    } else {
        sym(&format!("n{i}"))
    }
}

/// Path lengths from `a` over a random DAG.
///
/// Node `i > 0` first gets an edge from a uniformly chosen node `j < i`, so every
/// node is reachable from `a`; the remaining edges are distinct forward pairs
/// sampled uniformly.
pub fn gen_sspe(spec: &SspeSpec) -> Result<(Program, FactSet), HarnessError> {
    let n = spec.nodes;
    let pairs = n * n.saturating_sub(1) / 2;
    let infeasible = HarnessError::InfeasibleGraph { nodes: n, edges: spec.edges };
    if n == 0 || spec.edges + 1 < n || spec.edges > pairs || spec.max_length < 1 {
        return Err(infeasible);
    }
    let program = parse_program(PATH_RULES).expect("fixed program parses");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut used: FxHashSet<(usize, usize)> = FxHashSet::default();
    let mut edges = Vec::with_capacity(spec.edges);
    for j in 1..n {
        let i = rng.random_range(0..j);
        used.insert((i, j));
        edges.push((i, j));
    }
    let extra = spec.edges - edges.len();
    if extra * 2 > pairs - edges.len() {
        let free: Vec<(usize, usize)> =
            (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).filter(|p| !used.contains(p)).collect();
        let mut picked = sample(&mut rng, free.len(), extra).into_vec();
        picked.sort_unstable();
        edges.extend(picked.into_iter().map(|k| free[k]));
    } else {
        while edges.len() < spec.edges {
            let (x, y) = (rng.random_range(0..n), rng.random_range(0..n));
            if x == y {
                continue;
            }
            let p = (x.min(y), x.max(y));
            if used.insert(p) {
                edges.push(p);
            }
        }
    }
    let mut facts = FactSet::new();
    for (i, j) in edges {
        let len = if spec.max_length == 1 { 1 } else { rng.random_range(1..=spec.max_length) };
        facts.insert(&fact("B", [node(i), node(j), Value::Int(len)]));
    }
    Ok((program, facts))
}

/// A uniform `k`-subset of `explicit` as deletions.
pub fn random_delete(explicit: &FactSet, k: usize, seed: u64) -> Result<Delta, HarnessError> {
    if k > explicit.len() {
        return Err(HarnessError::TooManyDeletions { k, available: explicit.len() });
    }
    let all = explicit.to_sorted_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = sample(&mut rng, all.len(), k).into_vec();
    picked.sort_unstable();
    Ok(Delta::new(picked.into_iter().map(|i| all[i].clone()), []))
}

fn constant(rng: &mut ChaCha8Rng, domain: usize) -> Value {
    let k = rng.random_range(0..domain.max(1));
    if k % 3 == 2 {
        sym(&format!("c{k}"))
    } else {
        Value::Int(k as i64)
    }
}

/// Deletes up to a fifth of `explicit` and inserts up to a tenth as many new
/// facts over the predicates already present.
pub fn random_update(explicit: &FactSet, domain: usize, seed: u64) -> Delta {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.random_range(0..=explicit.len() / 5);
    let deletions = random_delete(explicit, k, rng.random()).expect("k is within bounds").deletions;
    let mut preds: Vec<_> = explicit.predicates().filter(|p| explicit.relation_len(*p) > 0).collect();
    preds.sort();
    let mut insertions = indexmap::IndexSet::new();
    if !preds.is_empty() {
        let m = rng.random_range(0..=explicit.len() / 10);
        for _ in 0..m {
            let p = preds[rng.random_range(0..preds.len())];
            let arity = explicit.arity(p).unwrap_or(0);
            let f = Fact { pred: p, args: (0..arity).map(|_| constant(&mut rng, domain)).collect() };
            if !explicit.contains(&f) {
                insertions.insert(f);
            }
        }
    }
    Delta { deletions, insertions }
}

struct Vocabulary {
    base: Vec<(String, usize)>,
    derived: Vec<(String, usize, u32)>,
}

const VARS: [&str; 4] = ["X", "Y", "Z", "W"];

/// Program and fact text of a random stratified program.
///
/// Derived predicates are placed in layers; a body may use lower layers freely,
/// its own layer only positively and only with `recursion`, and negation and
/// built-ins only in bodies drawing on strictly lower layers. Hence every
/// generated program is safe and stratifiable, and built-ins can never feed a
/// recursive cycle.
pub fn random_program_text(spec: &RandomSpec) -> (String, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let arity = |rng: &mut ChaCha8Rng| rng.random_range(1..=spec.max_arity.max(1));
    let mut vocab = Vocabulary { base: Vec::new(), derived: Vec::new() };
    for i in 0..spec.base_predicates.max(1) {
        let a = arity(&mut rng);
        vocab.base.push((format!("E{i}"), a));
    }
    let mut layer = 1;
    for i in 0..spec.derived_predicates {
        if i > 0 && (!spec.recursion || rng.random_bool(0.5)) {
            layer += 1;
        }
        let a = arity(&mut rng);
        vocab.derived.push((format!("P{i}"), a, layer));
    }

    let mut program = String::new();
    let rules = if vocab.derived.is_empty() { 0 } else { spec.rules };
    for r in 0..rules {
        let h = if r < vocab.derived.len() { r } else { rng.random_range(0..vocab.derived.len()) };
        let (head, head_arity, head_layer) = vocab.derived[h].clone();
        let lower: Vec<(String, usize)> = vocab
            .base
            .iter()
            .cloned()
            .chain(vocab.derived.iter().filter(|d| d.2 < head_layer).map(|d| (d.0.clone(), d.1)))
            .collect();
        let same: Vec<(String, usize)> =
            vocab.derived.iter().filter(|d| d.2 == head_layer).map(|d| (d.0.clone(), d.1)).collect();

        let mut body = Vec::new();
        let mut bound: Vec<&str> = Vec::new();
        let mut uses_same = false;
        let atoms = rng.random_range(1..=3);
        for k in 0..atoms {
            let (pred, a) = if k > 0 && spec.recursion && rng.random_bool(0.4) {
                uses_same = true;
                same[rng.random_range(0..same.len())].clone()
            } else {
                lower[rng.random_range(0..lower.len())].clone()
            };
            let args: Vec<String> = (0..a)
                .map(|_| {
                    if rng.random_bool(0.85) {
                        let v = VARS[rng.random_range(0..VARS.len())];
                        if !bound.contains(&v) {
                            bound.push(v);
                        }
                        v.to_string()
                    } else {
                        constant(&mut rng, spec.domain).to_string()
                    }
                })
                .collect();
            body.push(format!("{pred}({})", args.join(",")));
        }
        let mut head_vars: Vec<String> = bound.iter().map(|v| v.to_string()).collect();
        if spec.builtins && !uses_same && !bound.is_empty() && rng.random_bool(0.3) {
            let x = bound[rng.random_range(0..bound.len())];
            let op = if rng.random_bool(0.5) { "+" } else { "-" };
            let y = if rng.random_bool(0.5) {
                bound[rng.random_range(0..bound.len())].to_string()
            } else {
                rng.random_range(1..3).to_string()
            };
            body.push(format!("V = {x} {op} {y}"));
            head_vars.push("V".to_string());
        }
        if spec.negation && !uses_same && rng.random_bool(0.4) {
            let (pred, a) = lower[rng.random_range(0..lower.len())].clone();
            let args: Vec<String> = (0..a)
                .map(|_| {
                    if !bound.is_empty() && rng.random_bool(0.8) {
                        bound[rng.random_range(0..bound.len())].to_string()
                    } else {
                        constant(&mut rng, spec.domain).to_string()
                    }
                })
                .collect();
            body.push(format!("not {pred}({})", args.join(",")));
        }
        let head_args: Vec<String> = (0..head_arity)
            .map(|_| {
                if !head_vars.is_empty() && rng.random_bool(0.9) {
                    head_vars[rng.random_range(0..head_vars.len())].clone()
                } else {
                    constant(&mut rng, spec.domain).to_string()
                }
            })
            .collect();
        writeln!(program, "{head}({}) :- {}.", head_args.join(","), body.join(", ")).unwrap();
    }

    let mut facts = String::new();
    for _ in 0..spec.facts {
        let (pred, a) = if !vocab.derived.is_empty() && rng.random_bool(0.1) {
            let d = &vocab.derived[rng.random_range(0..vocab.derived.len())];
            (d.0.clone(), d.1)
        } else {
            vocab.base[rng.random_range(0..vocab.base.len())].clone()
        };
        let args: Vec<String> = (0..a).map(|_| constant(&mut rng, spec.domain).to_string()).collect();
        writeln!(facts, "{pred}({}).", args.join(",")).unwrap();
    }
    (program, facts)
}

pub fn gen_random(spec: &RandomSpec) -> Result<(Program, FactSet), HarnessError> {
    let (program, facts) = random_program_text(spec);
    let program = parse_program(&program)?;
    let facts = parse_facts(&facts)?.iter().collect();
    Ok((program, facts))
}
