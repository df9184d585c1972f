//! Regular-language specifications (Tomita 1–7, PARITY, repetition
//! languages), the Dyck-style depth-bounded languages D_n, membership
//! predicates, and balanced labeled-dataset generation for the training
//! experiments.
//!
//! Every recognizer is either a total DFA over {0, 1} or the memoized
//! recursive-descent parser for D_n = (0 · D_{n−1} · 1)*, D_0 = {ε}.
//! Dataset sampling is exact: positives are drawn uniformly among accepted
//! strings of a length via path-counting dynamic programming (or weighted
//! derivations for D_n), negatives half by rejection sampling and half by
//! single-bit near-miss perturbation of positives.

use std::collections::{HashMap, HashSet};

use crate::numerics::RngStream;
use crate::{Error, Result};

/// Total deterministic finite automaton over the binary alphabet.
#[derive(Clone, Debug)]
pub struct Dfa {
    pub start: usize,
    pub accept: Vec<bool>,
    /// delta[s] = [next on '0', next on '1'].
    pub delta: Vec<[usize; 2]>,
}

impl Dfa {
    fn new(start: usize, accept: Vec<bool>, delta: Vec<[usize; 2]>) -> Dfa {
        debug_assert_eq!(accept.len(), delta.len());
        Dfa { start, accept, delta }
    }

    pub fn n_states(&self) -> usize {
        self.accept.len()
    }

    /// Run on validated bits (0/1 bytes).
    fn run(&self, bits: &[u8]) -> bool {
        let mut s = self.start;
        for &b in bits {
            s = self.delta[s][b as usize];
        }
        self.accept[s]
    }

    /// Same automaton with accepting set flipped.
    fn complement(&self) -> Dfa {
        Dfa {
            start: self.start,
            accept: self.accept.iter().map(|a| !a).collect(),
            delta: self.delta.clone(),
        }
    }
}

/// How a language decides membership.
#[derive(Clone, Debug)]
pub enum Recognizer {
    Dfa(Dfa),
    /// The depth-n language D_n = (0 · D_{n−1} · 1)*.
    DnParser { n: usize },
}

/// A named language with its recognizer and the defining description.
#[derive(Clone, Debug)]
pub struct LanguageSpec {
    pub name: String,
    pub definition: String,
    pub recognizer: Recognizer,
}

fn tomita1() -> Dfa {
    // 1*: state 1 is the dead state.
    Dfa::new(0, vec![true, false], vec![[1, 0], [1, 1]])
}

fn tomita2() -> Dfa {
    // (10)*: 0 = even position (accept), 1 = saw leading '1', 2 = dead.
    Dfa::new(0, vec![true, false, false], vec![[2, 1], [0, 2], [2, 2]])
}

fn tomita3() -> Dfa {
    // Standard 5-state machine for "an odd number of consecutive 1's is
    // always followed by an even number of 0's" (violations trap):
    //   0: neutral (no pending odd 1-run)        accept
    //   1: trailing 1-run is odd                 accept
    //   2: pending odd 1-run, odd 0-run so far   reject
    //   3: pending odd 1-run, even 0-run so far  accept
    //   4: trap (violation seen)                 reject
    Dfa::new(
        0,
        vec![true, true, false, true, false],
        vec![[0, 1], [2, 0], [3, 4], [2, 1], [4, 4]],
    )
}

fn tomita4() -> Dfa {
    // No "000": count trailing zeros 0/1/2, state 3 = trap.
    Dfa::new(
        0,
        vec![true, true, true, false],
        vec![[1, 0], [2, 0], [3, 0], [3, 3]],
    )
}

fn tomita5() -> Dfa {
    // (parity of #0, parity of #1): state = 2*p0 + p1, accept (0,0).
    Dfa::new(
        0,
        vec![true, false, false, false],
        vec![[2, 1], [3, 0], [0, 3], [1, 2]],
    )
}

fn tomita6() -> Dfa {
    // (#1 − #0) mod 3 == 0; state = residue.
    Dfa::new(0, vec![true, false, false], vec![[2, 1], [0, 2], [1, 0]])
}

fn tomita7() -> Dfa {
    // 0*1*0*1*: phases 0..3, state 4 = trap.
    Dfa::new(
        0,
        vec![true, true, true, true, false],
        vec![[0, 1], [2, 1], [2, 3], [4, 3], [4, 4]],
    )
}

fn parity_dfa() -> Dfa {
    // Odd number of 1's accepted.
    Dfa::new(0, vec![false, true], vec![[0, 1], [1, 0]])
}

fn rep00() -> Dfa {
    // (00)*.
    Dfa::new(0, vec![true, false, false], vec![[1, 2], [0, 2], [2, 2]])
}

fn rep0101() -> Dfa {
    // (0101)*.
    Dfa::new(
        0,
        vec![true, false, false, false, false],
        vec![[1, 4], [4, 2], [3, 4], [4, 0], [4, 4]],
    )
}

fn rep00_11() -> Dfa {
    // (00)*(11)*: 0 = even 0s before any 1 (accept), 1 = odd 0s,
    // 2 = odd 1s, 3 = even (≥2) 1s (accept), 4 = trap.
    Dfa::new(
        0,
        vec![true, false, false, true, false],
        vec![[1, 2], [0, 4], [4, 3], [4, 2], [4, 4]],
    )
}

/// Look up a named language. Names: `tomita1`..`tomita7`, `parity`,
/// `d2`, `d3`, `d4`, `rep00`, `rep0101`, `rep00_11`.
pub fn language_spec(name: &str) -> Result<LanguageSpec> {
    let (definition, recognizer): (&str, Recognizer) = match name {
        "tomita1" => ("1*", Recognizer::Dfa(tomita1())),
        "tomita2" => ("(10)*", Recognizer::Dfa(tomita2())),
        "tomita3" => (
            "an odd number of consecutive 1's is always followed by an even number of 0's",
            Recognizer::Dfa(tomita3()),
        ),
        "tomita4" => (
            "strings that do not contain three consecutive 0's",
            Recognizer::Dfa(tomita4()),
        ),
        "tomita5" => (
            "even number of 0's and even number of 1's",
            Recognizer::Dfa(tomita5()),
        ),
        "tomita6" => (
            "the difference between the number of 1's and the number of 0's is divisible by 3",
            Recognizer::Dfa(tomita6()),
        ),
        "tomita7" => ("0*1*0*1*", Recognizer::Dfa(tomita7())),
        "parity" => (
            "strings whose number of 1's is odd (w_1 + … + w_j ≡ 1 mod 2)",
            Recognizer::Dfa(parity_dfa()),
        ),
        "d2" => ("D_2: (0 w 1)* with w ∈ D_1, D_0 = {ε}", Recognizer::DnParser { n: 2 }),
        "d3" => ("D_3: (0 w 1)* with w ∈ D_2", Recognizer::DnParser { n: 3 }),
        "d4" => ("D_4: (0 w 1)* with w ∈ D_3", Recognizer::DnParser { n: 4 }),
        "rep00" => ("(00)*", Recognizer::Dfa(rep00())),
        "rep0101" => ("(0101)*", Recognizer::Dfa(rep0101())),
        "rep00_11" => ("(00)*(11)*", Recognizer::Dfa(rep00_11())),
        _ => return Err(Error::invalid(format!("unknown language {name:?}"))),
    };
    Ok(LanguageSpec {
        name: name.to_string(),
        definition: definition.to_string(),
        recognizer,
    })
}

/// The exactly-one-1 language D_{L1} as a DFA (companion for the
/// concept-class acceptor; not part of the Table-regular names).
pub fn dl1_spec() -> LanguageSpec {
    let dfa = Dfa::new(
        0,
        vec![false, true, false],
        vec![[0, 1], [1, 2], [2, 2]],
    );
    LanguageSpec {
        name: "dl1".to_string(),
        definition: "strings containing exactly one 1".to_string(),
        recognizer: Recognizer::Dfa(dfa),
    }
}

/// Strings containing `pattern` as a contiguous substring, as a KMP-style
/// DFA (companion for the substring concept acceptor).
pub fn substring_spec(pattern: &str) -> Result<LanguageSpec> {
    let pat = validate_bits(pattern)?;
    if pat.is_empty() {
        return Err(Error::invalid("substring pattern must be nonempty"));
    }
    let k = pat.len();
    // States 0..k: longest matched prefix; state k absorbs.
    let mut delta = vec![[0usize; 2]; k + 1];
    for s in 0..=k {
        for b in 0..2u8 {
            delta[s][b as usize] = if s == k {
                k
            } else if pat[s] == b {
                s + 1
            } else {
                // Longest prefix of `pat` that is a suffix of matched[0..s]+b.
                let mut cand = s.min(k - 1);
                loop {
                    // Try prefix length `cand`: need pat[..cand] == tail.
                    let mut tail: Vec<u8> = pat[..s].to_vec();
                    tail.push(b);
                    let t = &tail[tail.len() - cand..];
                    if &pat[..cand] == t {
                        break cand;
                    }
                    cand -= 1;
                }
            };
        }
    }
    let mut accept = vec![false; k + 1];
    accept[k] = true;
    Ok(LanguageSpec {
        name: format!("substring({pattern})"),
        definition: format!("strings containing {pattern} as a substring"),
        recognizer: Recognizer::Dfa(Dfa::new(0, accept, delta)),
    })
}

fn validate_bits(bits: &str) -> Result<Vec<u8>> {
    bits.chars()
        .enumerate()
        .map(|(i, c)| match c {
            '0' => Ok(0u8),
            '1' => Ok(1u8),
            _ => Err(Error::invalid(format!(
                "non-binary character {c:?} at position {i}"
            ))),
        })
        .collect()
}

/// Memoized recursive-descent parse of D_n: the set of end positions
/// reachable from `start` by consuming a member of D_n. Memoization makes
/// the descent exact for every split of nested items while still consuming
/// monotonically (every recursion advances the position).
struct DnParse<'a> {
    s: &'a [u8],
    memo: HashMap<(usize, usize), Vec<usize>>,
}

impl<'a> DnParse<'a> {
    fn ends(&mut self, n: usize, start: usize) -> Vec<usize> {
        if let Some(e) = self.memo.get(&(n, start)) {
            return e.clone();
        }
        let mut reach = vec![start];
        if n > 0 {
            let mut seen: HashSet<usize> = reach.iter().copied().collect();
            let mut queue = vec![start];
            while let Some(pos) = queue.pop() {
                // One more (0 · D_{n−1} · 1) item starting at `pos`.
                if pos < self.s.len() && self.s[pos] == 0 {
                    for inner_end in self.ends(n - 1, pos + 1) {
                        if inner_end < self.s.len() && self.s[inner_end] == 1 {
                            let e = inner_end + 1;
                            if seen.insert(e) {
                                reach.push(e);
                                queue.push(e);
                            }
                        }
                    }
                }
            }
        }
        reach.sort_unstable();
        self.memo.insert((n, start), reach.clone());
        reach
    }
}

/// Membership of validated bits in D_n.
fn dn_member(n: usize, bits: &[u8]) -> bool {
    let mut p = DnParse { s: bits, memo: HashMap::new() };
    p.ends(n, 0).contains(&bits.len())
}

/// Does `bits` belong to the language? Errors on non-binary characters;
/// the empty string is a valid query (Tomita 1/2, D_n and the repetition
/// languages accept it; the others follow their recognizers).
pub fn membership(spec: &LanguageSpec, bits: &str) -> Result<bool> {
    let b = validate_bits(bits)?;
    Ok(match &spec.recognizer {
        Recognizer::Dfa(dfa) => dfa.run(&b),
        Recognizer::DnParser { n } => dn_member(*n, &b),
    })
}

/// A train/test split of labeled binary strings.
#[derive(Clone, Debug)]
pub struct LabeledDataset {
    pub name: String,
    pub train: Vec<(String, u8)>,
    pub test: Vec<(String, u8)>,
    pub len_range: (usize, usize),
    pub seed: u64,
    /// Fraction of positives actually achieved (train, test); 0.5 outside
    /// the exhausted-class fallback regime.
    pub positive_fraction: (f64, f64),
    /// True when a class ran out of distinct strings and the generator fell
    /// back to exhaustive enumeration for it.
    pub fallback: bool,
}

impl LabeledDataset {
    /// One string per line, `bits,label`, preceded by a header comment.
    pub fn serialize(&self) -> String {
        let mut out = format!(
            "# language={} seed={} range=[{},{}] train={} test={}\n",
            self.name,
            self.seed,
            self.len_range.0,
            self.len_range.1,
            self.train.len(),
            self.test.len()
        );
        out.push_str("# split=train\n");
        for (bits, label) in &self.train {
            out.push_str(bits);
            out.push(',');
            out.push_str(&label.to_string());
            out.push('\n');
        }
        out.push_str("# split=test\n");
        for (bits, label) in &self.test {
            out.push_str(bits);
            out.push(',');
            out.push_str(&label.to_string());
            out.push('\n');
        }
        out
    }
}

/// Exact per-length class counts and uniform samplers for one recognizer.
enum Counter {
    Dfa { dfa: Dfa, counts: Vec<Vec<f64>> },
    Dn { n: usize, counts: Vec<Vec<f64>> },
}

impl Counter {
    fn for_positives(spec: &LanguageSpec, max_len: usize) -> Counter {
        match &spec.recognizer {
            Recognizer::Dfa(dfa) => Counter::dfa(dfa.clone(), max_len),
            Recognizer::DnParser { n } => Counter::dn(*n, max_len),
        }
    }

    fn for_negatives(spec: &LanguageSpec, max_len: usize) -> Option<Counter> {
        match &spec.recognizer {
            Recognizer::Dfa(dfa) => Some(Counter::dfa(dfa.complement(), max_len)),
            // D_n negatives go through rejection sampling only.
            Recognizer::DnParser { .. } => None,
        }
    }

    fn dfa(dfa: Dfa, max_len: usize) -> Counter {
        // counts[t][s] = number of length-t suffixes from state s that land
        // in an accepting state.
        let ns = dfa.n_states();
        let mut counts = vec![vec![0.0f64; ns]; max_len + 1];
        for s in 0..ns {
            counts[0][s] = if dfa.accept[s] { 1.0 } else { 0.0 };
        }
        for t in 1..=max_len {
            for s in 0..ns {
                counts[t][s] = counts[t - 1][dfa.delta[s][0]] + counts[t - 1][dfa.delta[s][1]];
            }
        }
        Counter::Dfa { dfa, counts }
    }

    fn dn(n: usize, max_len: usize) -> Counter {
        // counts[k][len] for k = 0..n.
        let mut counts = vec![vec![0.0f64; max_len + 1]; n + 1];
        counts[0][0] = 1.0;
        for k in 1..=n {
            counts[k][0] = 1.0;
            for len in 1..=max_len {
                let mut total = 0.0;
                if len >= 2 {
                    for inner in 0..=len - 2 {
                        total += counts[k - 1][inner] * counts[k][len - 2 - inner];
                    }
                }
                counts[k][len] = total;
            }
        }
        Counter::Dn { n, counts }
    }

    /// Number of class members of exactly this length.
    fn count(&self, len: usize) -> f64 {
        match self {
            Counter::Dfa { dfa, counts } => counts[len][dfa.start],
            Counter::Dn { n, counts } => counts[*n][len],
        }
    }

    /// Uniform member of the class at `len` (caller guarantees count > 0).
    fn sample(&self, len: usize, rng: &mut RngStream) -> String {
        match self {
            Counter::Dfa { dfa, counts } => {
                let mut s = dfa.start;
                let mut out = String::with_capacity(len);
                for t in (1..=len).rev() {
                    let w0 = counts[t - 1][dfa.delta[s][0]];
                    let w1 = counts[t - 1][dfa.delta[s][1]];
                    let pick1 = rng.next_f64() * (w0 + w1) > w0;
                    out.push(if pick1 { '1' } else { '0' });
                    s = dfa.delta[s][if pick1 { 1 } else { 0 }];
                }
                out
            }
            Counter::Dn { n, counts } => {
                let mut out = String::with_capacity(len);
                sample_dn_into(*n, len, counts, rng, &mut out);
                out
            }
        }
    }

    /// All class members of exactly this length (fallback regime only, so
    /// totals are small by construction).
    fn enumerate(&self, len: usize) -> Vec<String> {
        match self {
            Counter::Dfa { dfa, counts } => {
                let mut acc = Vec::new();
                let mut prefix = String::new();
                enumerate_dfa(dfa, counts, len, dfa.start, &mut prefix, &mut acc);
                acc
            }
            Counter::Dn { n, counts } => {
                let mut acc = Vec::new();
                enumerate_dn(*n, len, counts, &mut acc);
                acc
            }
        }
    }
}

fn sample_dn_into(n: usize, len: usize, counts: &[Vec<f64>], rng: &mut RngStream, out: &mut String) {
    if len == 0 {
        return;
    }
    // Split off the first item (0 · inner · 1) · rest.
    let total = counts[n][len];
    let mut u = rng.next_f64() * total;
    let mut inner = 0;
    while inner <= len - 2 {
        let w = counts[n - 1][inner] * counts[n][len - 2 - inner];
        if u <= w || inner == len - 2 {
            break;
        }
        u -= w;
        inner += 1;
    }
    out.push('0');
    sample_dn_into(n - 1, inner, counts, rng, out);
    out.push('1');
    sample_dn_into(n, len - 2 - inner, counts, rng, out);
}

fn enumerate_dfa(
    dfa: &Dfa,
    counts: &[Vec<f64>],
    remaining: usize,
    state: usize,
    prefix: &mut String,
    acc: &mut Vec<String>,
) {
    if remaining == 0 {
        if dfa.accept[state] {
            acc.push(prefix.clone());
        }
        return;
    }
    for b in 0..2usize {
        let next = dfa.delta[state][b];
        if counts[remaining - 1][next] > 0.0 {
            prefix.push(if b == 1 { '1' } else { '0' });
            enumerate_dfa(dfa, counts, remaining - 1, next, prefix, acc);
            prefix.pop();
        }
    }
}

fn enumerate_dn(n: usize, len: usize, counts: &[Vec<f64>], acc: &mut Vec<String>) {
    fn rec(n: usize, len: usize, counts: &[Vec<f64>], prefix: &mut String, acc: &mut Vec<String>) {
        if len == 0 {
            acc.push(prefix.clone());
            return;
        }
        for inner in 0..=len - 2 {
            if counts[n - 1][inner] > 0.0 && counts[n][len - 2 - inner] > 0.0 {
                let inner_strings = {
                    let mut tmp = Vec::new();
                    let mut p = String::new();
                    rec(n - 1, inner, counts, &mut p, &mut tmp);
                    tmp
                };
                for w in inner_strings {
                    prefix.push('0');
                    prefix.push_str(&w);
                    prefix.push('1');
                    let mark = prefix.len();
                    rec(n, len - 2 - inner, counts, prefix, acc);
                    prefix.truncate(mark - 2 - w.len());
                }
            }
        }
    }
    if n == 0 {
        if len == 0 {
            acc.push(String::new());
        }
        return;
    }
    let mut prefix = String::new();
    rec(n, len, counts, &mut prefix, acc);
}

/// Generate a labeled train/test dataset.
///
/// Lengths are uniform over the lengths in `len_range` at which the class is
/// nonempty; strings are uniform within (class, length); labels are verified
/// by [`membership`]. Negatives are half rejection-sampled, half single-bit
/// near-miss perturbations of sampled positives. When a class has fewer
/// distinct strings than requested the generator switches to exhaustive
/// enumeration for it, takes everything, fills with the other class, and
/// reports the achieved balance; if the *total* population in range cannot
/// cover the request, it errors naming the shortfall.
pub fn generate_dataset(
    spec: &LanguageSpec,
    n_train: usize,
    n_test: usize,
    len_range: (usize, usize),
    rng: &mut RngStream,
) -> Result<LabeledDataset> {
    let (lmin, lmax) = len_range;
    if n_train == 0 || n_test == 0 {
        return Err(Error::invalid("dataset needs n_train, n_test >= 1"));
    }
    if lmin < 1 || lmin > lmax {
        return Err(Error::invalid(format!(
            "invalid length range [{lmin}, {lmax}] (empty strings are excluded)"
        )));
    }
    let total = n_train + n_test;
    let pos_counter = Counter::for_positives(spec, lmax);
    let neg_counter = Counter::for_negatives(spec, lmax);

    let count_neg = |len: usize| -> f64 {
        match &neg_counter {
            Some(c) => c.count(len),
            None => (len as f64).exp2() - pos_counter.count(len),
        }
    };

    let pos_lengths: Vec<usize> = (lmin..=lmax).filter(|&l| pos_counter.count(l) > 0.0).collect();
    let neg_lengths: Vec<usize> = (lmin..=lmax).filter(|&l| count_neg(l) > 0.0).collect();

    let cap = 4.0 * total as f64;
    let pos_avail: f64 = pos_lengths.iter().map(|&l| pos_counter.count(l)).sum::<f64>().min(cap);
    let neg_avail: f64 = neg_lengths.iter().map(|&l| count_neg(l)).sum::<f64>().min(cap);
    if pos_avail + neg_avail < total as f64 {
        return Err(Error::invalid(format!(
            "language {} has only {} distinct strings in [{lmin}, {lmax}] but {total} were requested",
            spec.name,
            pos_avail + neg_avail
        )));
    }

    let want_pos_total = (total + 1) / 2;
    let take_pos = (want_pos_total as f64).min(pos_avail) as usize;
    let take_neg = total - take_pos; // neg_avail covers this or the total check failed
    if (take_neg as f64) > neg_avail {
        return Err(Error::invalid(format!(
            "language {} has only {neg_avail} negatives in [{lmin}, {lmax}] but {take_neg} are needed",
            spec.name
        )));
    }

    let fallback = (take_pos as f64) >= pos_avail && pos_avail < want_pos_total as f64;

    // --- positives ---
    let mut pos_rng = rng.split("positives")?;
    let mut seen_pos: HashSet<String> = HashSet::new();
    let mut positives: Vec<String> = Vec::with_capacity(take_pos);
    if fallback {
        for &l in &pos_lengths {
            for s in pos_counter.enumerate(l) {
                if seen_pos.insert(s.clone()) {
                    positives.push(s);
                }
            }
        }
        positives.truncate(take_pos);
    } else {
        let mut stall = 0usize;
        while positives.len() < take_pos {
            let l = pos_lengths[pos_rng.next_below(pos_lengths.len() as u64) as usize];
            let s = pos_counter.sample(l, &mut pos_rng);
            if seen_pos.insert(s.clone()) {
                positives.push(s);
                stall = 0;
            } else {
                stall += 1;
                if stall > 50_000 {
                    return Err(Error::numeric(format!(
                        "positive sampling for {} stalled at {}/{take_pos} distinct strings",
                        spec.name,
                        positives.len()
                    )));
                }
            }
        }
    }

    // --- negatives: half rejection, half near-miss ---
    let mut neg_rng = rng.split("negatives")?;
    let mut seen_neg: HashSet<String> = HashSet::new();
    let mut negatives: Vec<String> = Vec::with_capacity(take_neg);
    let near_miss_target = take_neg / 2;
    let mut stall = 0usize;
    while negatives.len() < take_neg {
        let use_near_miss = negatives.len() < near_miss_target && !positives.is_empty();
        let candidate = if use_near_miss {
            // Flip one bit of a random positive; keep if it left the language.
            let p = &positives[neg_rng.next_below(positives.len() as u64) as usize];
            let mut bytes: Vec<char> = p.chars().collect();
            let i = neg_rng.next_below(bytes.len() as u64) as usize;
            bytes[i] = if bytes[i] == '0' { '1' } else { '0' };
            bytes.into_iter().collect::<String>()
        } else if neg_lengths.is_empty() {
            return Err(Error::invalid(format!(
                "language {} has no negatives in [{lmin}, {lmax}]",
                spec.name
            )));
        } else {
            let l = neg_lengths[neg_rng.next_below(neg_lengths.len() as u64) as usize];
            match &neg_counter {
                Some(c) => c.sample(l, &mut neg_rng),
                None => (0..l)
                    .map(|_| if neg_rng.next_below(2) == 1 { '1' } else { '0' })
                    .collect(),
            }
        };
        let ok = candidate.len() >= lmin
            && candidate.len() <= lmax
            && !membership(spec, &candidate)?
            && !seen_neg.contains(&candidate);
        if ok {
            seen_neg.insert(candidate.clone());
            negatives.push(candidate);
            stall = 0;
        } else {
            stall += 1;
            if stall > 200_000 {
                return Err(Error::numeric(format!(
                    "negative sampling for {} stalled at {}/{take_neg} distinct strings",
                    spec.name,
                    negatives.len()
                )));
            }
        }
    }

    // --- split proportionally and shuffle ---
    let mut split_rng = rng.split("split")?;
    split_rng.shuffle(&mut positives);
    split_rng.shuffle(&mut negatives);
    let pos_train = ((positives.len() as f64) * (n_train as f64) / (total as f64)).round() as usize;
    let pos_train = pos_train.min(positives.len()).min(n_train);
    let neg_train = n_train - pos_train;
    if neg_train > negatives.len() {
        return Err(Error::numeric(format!(
            "internal split shortfall for {}: need {neg_train} train negatives, have {}",
            spec.name,
            negatives.len()
        )));
    }

    let mut train: Vec<(String, u8)> = Vec::with_capacity(n_train);
    let mut test: Vec<(String, u8)> = Vec::with_capacity(n_test);
    for (i, s) in positives.into_iter().enumerate() {
        if i < pos_train {
            train.push((s, 1));
        } else {
            test.push((s, 1));
        }
    }
    for (i, s) in negatives.into_iter().enumerate() {
        if i < neg_train {
            train.push((s, 0));
        } else if test.len() < n_test {
            test.push((s, 0));
        }
    }
    if train.len() != n_train || test.len() != n_test {
        return Err(Error::numeric(format!(
            "internal split mismatch for {}: got {}/{} train/test, wanted {n_train}/{n_test}",
            spec.name,
            train.len(),
            test.len()
        )));
    }
    split_rng.shuffle(&mut train);
    split_rng.shuffle(&mut test);

    let frac = |v: &[(String, u8)]| {
        v.iter().filter(|(_, y)| *y == 1).count() as f64 / v.len() as f64
    };
    Ok(LabeledDataset {
        name: spec.name.clone(),
        positive_fraction: (frac(&train), frac(&test)),
        train,
        test,
        len_range,
        seed: rng.root_seed(),
        fallback,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spot_checks_from_the_definitions() {
        let t1 = language_spec("tomita1").unwrap();
        assert!(membership(&t1, "111").unwrap());
        assert!(!membership(&t1, "101").unwrap());
        let t5 = language_spec("tomita5").unwrap();
        assert!(membership(&t5, "0011").unwrap());
        assert!(!membership(&t5, "01").unwrap());
        let t6 = language_spec("tomita6").unwrap();
        assert!(membership(&t6, "10").unwrap());
        let p = language_spec("parity").unwrap();
        assert!(membership(&p, "1").unwrap());
        assert!(!membership(&p, "11").unwrap());
        let d2 = language_spec("d2").unwrap();
        assert!(membership(&d2, "").unwrap());
        assert!(membership(&d2, "0011").unwrap());
        assert!(membership(&d2, "0101").unwrap());
        assert!(!membership(&d2, "0110").unwrap());
    }

    #[test]
    fn non_binary_input_is_an_error() {
        let t1 = language_spec("tomita1").unwrap();
        assert!(membership(&t1, "10x").is_err());
    }
}
