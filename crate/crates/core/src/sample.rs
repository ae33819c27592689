//! Seeded samplers for impartial culture (uniform votes) and impartial
//! scores culture (uniform scoring profiles).
//!
//! # Generator
//!
//! [`RngStream`] is xoshiro256++ whose 256-bit state is the first four
//! outputs of SplitMix64 started at `splitmix64(seed) ^ stream_id`. The
//! pair `(seed, stream_id)` fixes the sequence on every platform; see the
//! `stream_test_vectors` test for pinned outputs.

use num_bigint::BigUint;
use num_traits::Zero;
use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_xoshiro::{SplitMix64, Xoshiro256PlusPlus};
use serde::{Deserialize, Serialize};

use crate::count::{composition_shape, CompositionTable};
use crate::error::{Error, Result};
use crate::voting::{Preference, Profile, Rule, RuleKind, ScoringProfile};

#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: Xoshiro256PlusPlus,
}

fn splitmix_once(x: u64) -> u64 {
    SplitMix64::seed_from_u64(x).next_u64()
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut sm = SplitMix64::seed_from_u64(splitmix_once(seed) ^ stream_id);
        let mut state = [0u8; 32];
        for chunk in state.chunks_exact_mut(8) {
            chunk.copy_from_slice(&sm.next_u64().to_le_bytes());
        }
        Self {
            seed,
            stream_id,
            inner: Xoshiro256PlusPlus::from_seed(state),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform integer in `[0, bound)` by rejection on the smallest covering
    /// bit width.
    pub fn below(&mut self, bound: &BigUint) -> BigUint {
        assert!(!bound.is_zero(), "empty range");
        let bits = bound.bits();
        let bytes = bits.div_ceil(8) as usize;
        let spare = (bytes as u64 * 8 - bits) as u32;
        let mut buf = vec![0u8; bytes];
        loop {
            self.fill_bytes(&mut buf);
            // little-endian: the top byte is last
            if let Some(last) = buf.last_mut() {
                *last &= 0xffu8 >> spare;
            }
            let v = BigUint::from_bytes_le(&buf);
            if &v < bound {
                return v;
            }
        }
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// A child stream; a pure function of the parent's identity and the index,
/// independent of how far the parent has been consumed.
pub fn spawn_stream(parent: &RngStream, child_index: u64) -> RngStream {
    let id = splitmix_once(parent.stream_id ^ splitmix_once(child_index.wrapping_add(1)));
    RngStream::new(parent.seed, id)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Culture {
    Ic,
    Isc,
}

impl Culture {
    pub fn name(&self) -> &'static str {
        match self {
            Culture::Ic => "ic",
            Culture::Isc => "isc",
        }
    }

    pub fn parse(s: &str) -> Option<Culture> {
        match s.to_ascii_lowercase().as_str() {
            "ic" => Some(Culture::Ic),
            "isc" => Some(Culture::Isc),
            _ => None,
        }
    }
}

/// One uniformly random linear order.
pub fn sample_preference(m: usize, rng: &mut RngStream) -> Preference {
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(rng);
    Preference::new(order).expect("shuffled identity")
}

/// `n` independent uniform votes.
pub fn sample_ic(n: usize, m: usize, rng: &mut RngStream) -> Profile {
    let votes = (0..n).map(|_| sample_preference(m, rng)).collect();
    Profile::new(m, votes).expect("votes share m")
}

/// Uniform sampler over `S^n([m])` for the approval family. The DP table is
/// built once and reused for every draw.
#[derive(Clone, Debug)]
pub struct IscSampler {
    rule: Rule,
    n: usize,
    table: CompositionTable,
    negate: bool,
}

impl IscSampler {
    pub fn new(rule: &Rule, n: usize) -> Result<Self> {
        if !rule.supports_isc() {
            return Err(Error::Unsupported(format!(
                "ISC sampling for {}",
                rule.name()
            )));
        }
        let (parts, cap, total) = composition_shape(rule, n)?;
        Ok(Self {
            rule: *rule,
            n,
            table: CompositionTable::new(parts, cap, total),
            negate: matches!(rule.kind(), RuleKind::Veto),
        })
    }

    /// Size of the support.
    pub fn support(&self) -> &BigUint {
        self.table.count()
    }

    pub fn sample(&self, rng: &mut RngStream) -> ScoringProfile {
        let t = &self.table;
        let mut rest = t.total();
        let mut scores = Vec::with_capacity(t.parts());
        for j in 0..t.parts() {
            let mut r = rng.below(t.ways(j, rest));
            let mut chosen = None;
            for v in 0..=t.cap().min(rest) {
                let w = t.ways(j + 1, rest - v);
                if &r < w {
                    chosen = Some(v);
                    break;
                }
                r -= w;
            }
            let v = chosen.expect("weights sum to the row total");
            scores.push(v as i64);
            rest -= v;
        }
        if self.negate {
            scores.iter_mut().for_each(|s| *s = -*s);
        }
        ScoringProfile::new_unchecked(self.rule, self.n, scores)
    }
}

/// One uniform draw from `S^n([m])`.
pub fn sample_isc(rule: &Rule, n: usize, rng: &mut RngStream) -> Result<ScoringProfile> {
    Ok(IscSampler::new(rule, n)?.sample(rng))
}

/// Upper-tail p-value of Pearson's chi-square statistic against the uniform
/// distribution over `observed.len()` cells.
pub fn chi_square_uniform_p(observed: &[u64]) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let cells = observed.len();
    if cells < 2 {
        return 1.0;
    }
    let total: u64 = observed.iter().sum();
    let expected = total as f64 / cells as f64;
    let stat: f64 = observed
        .iter()
        .map(|&o| (o as f64 - expected).powi(2) / expected)
        .sum();
    let dist = ChiSquared::new((cells - 1) as f64).expect("positive degrees of freedom");
    1.0 - dist.cdf(stat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    // Cross-checked against a from-scratch SplitMix64 + xoshiro256++.
    #[test]
    fn stream_test_vectors() {
        let mut s = RngStream::new(0, 0);
        let got: Vec<u64> = (0..3).map(|_| s.next_u64()).collect();
        let mut s = RngStream::new(42, 7);
        let got2: Vec<u64> = (0..3).map(|_| s.next_u64()).collect();
        assert_eq!(got, VECTOR_0_0);
        assert_eq!(got2, VECTOR_42_7);
    }

    const VECTOR_0_0: [u64; 3] = [
        9579327875526494010,
        14425024493257680155,
        12536166511277982743,
    ];
    const VECTOR_42_7: [u64; 3] = [
        3409545882473857721,
        11773385008288523278,
        15640253386848488616,
    ];

    #[test]
    fn streams_are_pure_and_distinct() {
        let s = RngStream::new(9, 0);
        let a: Vec<u64> = {
            let mut c = spawn_stream(&s, 0);
            (0..4).map(|_| c.next_u64()).collect()
        };
        let b: Vec<u64> = {
            let mut c = spawn_stream(&s, 1);
            (0..4).map(|_| c.next_u64()).collect()
        };
        let again: Vec<u64> = {
            let mut c = spawn_stream(&s, 0);
            (0..4).map(|_| c.next_u64()).collect()
        };
        assert_ne!(a, b);
        assert_eq!(a, again);
        let mut used = s.clone();
        used.next_u64();
        assert_eq!(spawn_stream(&used, 0).next_u64(), a[0]);
    }

    #[test]
    fn below_stays_in_range() {
        let mut s = RngStream::new(1, 1);
        let bound = BigUint::from(5u32);
        let mut seen = [0u32; 5];
        for _ in 0..1000 {
            let v = s.below(&bound);
            seen[usize::try_from(v).unwrap()] += 1;
        }
        assert!(seen.iter().all(|&c| c > 150));
    }

    #[test]
    fn single_candidate_ic() {
        let mut s = RngStream::new(3, 0);
        let p = sample_ic(3, 1, &mut s);
        assert_eq!(p.n(), 3);
        assert!(p.votes().iter().all(|v| v.order() == [0]));
    }

    #[test]
    fn ic_is_deterministic() {
        let a = sample_ic(5, 4, &mut RngStream::new(11, 2));
        let b = sample_ic(5, 4, &mut RngStream::new(11, 2));
        assert_eq!(a, b);
    }

    #[test]
    fn veto_single_vote_is_fair() {
        let sampler = IscSampler::new(&Rule::veto(2), 1).unwrap();
        let mut s = RngStream::new(5, 0);
        let mut counts = BTreeMap::new();
        for _ in 0..2000 {
            *counts
                .entry(sampler.sample(&mut s).scores().to_vec())
                .or_insert(0u64) += 1;
        }
        assert_eq!(
            counts.keys().cloned().collect::<Vec<_>>(),
            vec![vec![-1, 0], vec![0, -1]]
        );
        assert!(chi_square_uniform_p(&counts.values().copied().collect::<Vec<_>>()) > 0.01);
    }

    #[test]
    fn borda_isc_is_rejected() {
        assert!(matches!(
            sample_isc(&Rule::borda(3), 2, &mut RngStream::new(0, 0)),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn chi_square_sanity() {
        assert!(chi_square_uniform_p(&[100, 100, 100]) > 0.99);
        assert!(chi_square_uniform_p(&[300, 0, 0]) < 1e-10);
    }
}
