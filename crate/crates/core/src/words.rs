//! Random words with exact symbol frequencies and large shifted Hamming
//! distances, and the block word `W` that drives the weak-mixing twist.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::fmt::Write as _;

use crate::error::{AbcError, Result};
use crate::report::fmt_f64;

const DIGITS: &[u8; 36] = b"0123456789abcdefghijklmnopqrstuvwxyz";

/// A word over `{0, ..., s-1}`, `s <= 36`, rendered in base-36 digits.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Word(pub Vec<u8>);

impl Word {
    pub fn parse(s: &str) -> Result<Self> {
        s.trim()
            .bytes()
            .map(|c| match c {
                b'0'..=b'9' => Ok(c - b'0'),
                b'a'..=b'z' => Ok(c - b'a' + 10),
                b'A'..=b'Z' => Ok(c - b'A' + 10),
                _ => Err(AbcError::Parse(format!("bad base-36 digit {:?}", c as char))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of occurrences of each symbol below `s`.
    pub fn counts(&self, s: u32) -> Vec<usize> {
        let mut c = vec![0; s as usize];
        for &x in &self.0 {
            c[x as usize] += 1;
        }
        c
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &x in &self.0 {
            f.write_char(DIGITS[x as usize] as char)?;
        }
        Ok(())
    }
}

/// Hamming distance between `w` and the shift `sh^t(w2)` on their overlap
/// `{0, ..., k - t - 1}`: the fraction of `i` with `w[i] != w2[i + t]`.
pub fn hamming_shift(w: &[u8], w2: &[u8], t: usize) -> f64 {
    assert_eq!(w.len(), w2.len(), "words must have equal length");
    let k = w.len();
    assert!(t < k, "shift {t} leaves no overlap for length {k}");
    let len = k - t;
    let mism = w[..len].iter().zip(&w2[t..]).filter(|(a, b)| a != b).count();
    mism as f64 / len as f64
}

/// Minimum pairwise distance required for alphabet `s` and tolerance `eps`.
pub fn separation_threshold(s: u32, eps: f64) -> f64 {
    1.0 - 1.0 / f64::from(s) - eps * f64::from(s)
}

/// Largest shift checked: all `t < (1 - eps) k`.
pub fn shift_limit(k: usize, eps: f64) -> usize {
    let lim = (1.0 - eps) * k as f64;
    let mut t = lim.ceil() as usize;
    while t > 0 && t as f64 >= lim {
        t -= 1;
    }
    // `t` is now the largest integer strictly below the limit
    (t + 1).min(k)
}

fn check_params(s: u32, k: usize) -> Result<()> {
    if !(2..=36).contains(&s) {
        return Err(AbcError::Invalid(format!("alphabet size {s} must lie in 2..=36")));
    }
    if k == 0 || !k.is_multiple_of(s as usize) {
        return Err(AbcError::Invalid(format!("word length {k} must be a positive multiple of {s}")));
    }
    Ok(())
}

/// Uniform i.i.d. word repaired to exact frequencies `k/s`: surplus symbols
/// at random positions are removed, and the holes are filled with the
/// missing symbols in random order.
pub fn sample_balanced<R: Rng>(s: u32, k: usize, rng: &mut R) -> Vec<u8> {
    let mut w: Vec<u8> = (0..k).map(|_| rng.random_range(0..s) as u8).collect();
    let target = k / s as usize;
    let mut positions: Vec<Vec<usize>> = vec![Vec::new(); s as usize];
    for (i, &x) in w.iter().enumerate() {
        positions[x as usize].push(i);
    }
    let mut holes = Vec::new();
    let mut fill = Vec::new();
    for (sym, pos) in positions.iter_mut().enumerate() {
        if pos.len() > target {
            pos.shuffle(rng);
            holes.extend_from_slice(&pos[target..]);
        } else {
            fill.extend(std::iter::repeat_n(sym as u8, target - pos.len()));
        }
    }
    fill.shuffle(rng);
    holes.sort_unstable();
    for (h, f) in holes.into_iter().zip(fill) {
        w[h] = f;
    }
    w
}

/// `N` words of length `k` with exact frequencies; separation not enforced.
pub fn sample_uniform_words(s: u32, k: usize, count: usize, seed: u64) -> Result<Vec<Word>> {
    check_params(s, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count).map(|_| Word(sample_balanced(s, k, &mut rng))).collect())
}

/// Bit-sliced word: mismatches of shifted words are computed 64 at a time.
struct Packed {
    planes: Vec<Vec<u64>>,
}

impl Packed {
    fn new(w: &[u8], nplanes: usize) -> Self {
        let words = w.len().div_ceil(64) + 1;
        let mut planes = vec![vec![0u64; words]; nplanes];
        for (i, &x) in w.iter().enumerate() {
            for (b, plane) in planes.iter_mut().enumerate() {
                if (x >> b) & 1 == 1 {
                    plane[i / 64] |= 1 << (i % 64);
                }
            }
        }
        Self { planes }
    }

    #[inline]
    fn window(plane: &[u64], start: usize) -> u64 {
        let (j, r) = (start / 64, start % 64);
        if r == 0 {
            plane[j]
        } else {
            (plane[j] >> r) | (plane[j + 1] << (64 - r))
        }
    }

    /// Mismatches between `self[0..len]` and `other[t..t+len]`.
    fn mismatches(&self, other: &Packed, t: usize, len: usize) -> usize {
        let mut total = 0;
        let mut i = 0;
        while i < len {
            let mut diff = 0u64;
            for (a, b) in self.planes.iter().zip(&other.planes) {
                diff |= Self::window(a, i) ^ Self::window(b, i + t);
            }
            let n = (len - i).min(64);
            if n < 64 {
                diff &= (1u64 << n) - 1;
            }
            total += diff.count_ones() as usize;
            i += 64;
        }
        total
    }
}

/// First constraint violated by a family of words.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub i: usize,
    pub j: usize,
    pub shift: usize,
    pub distance: f64,
}

/// Checks exact frequencies and `d(w_i, sh^t w_j) >= 1 - 1/s - eps s` for all
/// `t < (1 - eps) k` (with `t >= 1` when `i == j`). Returns every word index
/// that takes part in a violation, plus the first violation found.
pub fn find_violations(words: &[Word], s: u32, eps: f64) -> (Vec<usize>, Option<Violation>) {
    let k = words.first().map_or(0, |w| w.len());
    let thr = separation_threshold(s, eps);
    let lim = shift_limit(k, eps);
    let nplanes = (32 - (s - 1).leading_zeros()) as usize;
    let packed: Vec<Packed> = words.iter().map(|w| Packed::new(&w.0, nplanes.max(1))).collect();
    let mut bad = vec![false; words.len()];
    let mut first = None;
    let target = k / s as usize;
    for (i, w) in words.iter().enumerate() {
        if w.len() != k || w.counts(s).iter().any(|&c| c != target) {
            bad[i] = true;
            first.get_or_insert(Violation { i, j: i, shift: 0, distance: f64::NAN });
        }
    }
    for i in 0..words.len() {
        for j in 0..words.len() {
            let t0 = usize::from(i == j);
            for t in t0..lim {
                let len = k - t;
                let m = packed[i].mismatches(&packed[j], t, len);
                let d = m as f64 / len as f64;
                if d < thr {
                    bad[j] = true;
                    first.get_or_insert(Violation { i, j, shift: t, distance: d });
                    break;
                }
            }
        }
    }
    let idx = bad.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect();
    (idx, first)
}

pub fn verify_selection(words: &[Word], s: u32, eps: f64) -> Result<()> {
    match find_violations(words, s, eps).1 {
        None => Ok(()),
        Some(v) => Err(AbcError::Invalid(format!(
            "d(w{}, sh^{} w{}) = {} below {}",
            v.i,
            v.shift,
            v.j,
            fmt_f64(v.distance),
            fmt_f64(separation_threshold(s, eps))
        ))),
    }
}

/// Words from one run of the selection procedure.
#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub s: u32,
    pub k: usize,
    pub eps: f64,
    pub seed: u64,
    pub words: Vec<Word>,
    pub rounds: u32,
    /// Whether the separation check passed.
    pub verified: bool,
}

impl Selection {
    /// Header `s k N eps seed`, then one word per line.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {} {} {}\n", self.s, self.k, self.words.len(), fmt_f64(self.eps), self.seed);
        for w in &self.words {
            let _ = writeln!(out, "{w}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        let head = lines.next().ok_or_else(|| AbcError::Parse("empty selection file".into()))?;
        let f: Vec<&str> = head.split_whitespace().collect();
        if f.len() != 5 {
            return Err(AbcError::Parse(format!("bad selection header {head:?}")));
        }
        let bad = |x: &str| AbcError::Parse(format!("bad header field {x:?}"));
        let s: u32 = f[0].parse().map_err(|_| bad(f[0]))?;
        let k: usize = f[1].parse().map_err(|_| bad(f[1]))?;
        let n: usize = f[2].parse().map_err(|_| bad(f[2]))?;
        let eps: f64 = f[3].parse().map_err(|_| bad(f[3]))?;
        let seed: u64 = f[4].parse().map_err(|_| bad(f[4]))?;
        let words = lines.map(Word::parse).collect::<Result<Vec<_>>>()?;
        if words.len() != n || words.iter().any(|w| w.len() != k || w.0.iter().any(|&x| u32::from(x) >= s)) {
            return Err(AbcError::Parse("selection body does not match its header".into()));
        }
        let verified = verify_selection(&words, s, eps).is_ok();
        Ok(Self { s, k, eps, seed, words, rounds: 0, verified })
    }
}

/// Draws `count` balanced words and resamples the ones involved in
/// violations, for at most `retry_budget` rounds.
pub fn sample_selection(s: u32, k: usize, count: usize, eps: f64, seed: u64, retry_budget: u32) -> Result<Selection> {
    check_params(s, k)?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(AbcError::Invalid(format!("eps = {eps} must lie in (0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut words: Vec<Word> = (0..count).map(|_| Word(sample_balanced(s, k, &mut rng))).collect();
    let mut last = None;
    for round in 1..=retry_budget.max(1) {
        let (bad, first) = find_violations(&words, s, eps);
        if bad.is_empty() {
            return Ok(Selection { s, k, eps, seed, words, rounds: round, verified: true });
        }
        last = first;
        for i in bad {
            words[i] = Word(sample_balanced(s, k, &mut rng));
        }
    }
    let reason = match last {
        Some(v) => format!("d(w{}, sh^{} w{}) = {}", v.i, v.shift, v.j, fmt_f64(v.distance)),
        None => "unknown".into(),
    };
    Err(AbcError::Selection { rounds: retry_budget, reason })
}

/// `W = w_bar w_tilde` with `w_bar` the concatenation and `w_tilde = w_bar + 1 mod s`.
pub fn assemble_w(words: &[Word], s: u32) -> Word {
    let bar: Vec<u8> = words.iter().flat_map(|w| w.0.iter().copied()).collect();
    let tilde = bar.iter().map(|&x| ((u32::from(x) + 1) % s) as u8);
    Word(bar.iter().copied().chain(tilde).collect())
}
