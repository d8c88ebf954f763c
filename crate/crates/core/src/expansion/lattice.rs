use alloc::vec::Vec;
use core::fmt;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbm::HurstParam;

/// Two exponents closer than this are the same element.
pub const MERGE_TOL: f64 = 1e-12;

/// `p + q / H`, carried as the exact integer pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeExponent {
    pub p: i64,
    pub q: i64,
    pub value: f64,
}

impl LatticeExponent {
    pub fn new(p: i64, q: i64, hurst: HurstParam) -> Self {
        LatticeExponent { p, q, value: p as f64 + q as f64 / hurst.value() }
    }

    fn add(self, other: Self, hurst: HurstParam) -> Self {
        LatticeExponent::new(self.p + other.p, self.q + other.q, hurst)
    }

    /// Preferred representative among pairs of equal value.
    fn canonical_key(&self) -> (i64, i64) {
        (self.q, self.p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LatticeKind {
    /// `N + N/H`
    L1,
    /// `{kappa - 1 : kappa in L1 \ {0}}`
    L2,
    /// `{kappa - 2 : kappa in L1 \ {0, 1, 1/H}}`
    L2Prime,
    /// Finite sums of elements of `L2`.
    L3,
    /// Finite sums of elements of `L2'`.
    L3Prime,
    /// `L3 + L3'`
    L4,
}

impl LatticeKind {
    pub const ALL: [LatticeKind; 6] = [
        LatticeKind::L1,
        LatticeKind::L2,
        LatticeKind::L2Prime,
        LatticeKind::L3,
        LatticeKind::L3Prime,
        LatticeKind::L4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LatticeKind::L1 => "L1",
            LatticeKind::L2 => "L2",
            LatticeKind::L2Prime => "L2'",
            LatticeKind::L3 => "L3",
            LatticeKind::L3Prime => "L3'",
            LatticeKind::L4 => "L4",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        LatticeKind::ALL
            .iter()
            .copied()
            .find(|k| k.name().eq_ignore_ascii_case(s) || k.name().replace('\'', "p").eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for LatticeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentLattice {
    pub kind: LatticeKind,
    pub hurst: HurstParam,
    pub cutoff: f64,
    pub elements: Vec<LatticeExponent>,
}

impl ExponentLattice {
    pub fn values(&self) -> Vec<f64> {
        self.elements.iter().map(|e| e.value).collect()
    }

    /// Element with the given value, if any.
    pub fn find(&self, value: f64) -> Option<LatticeExponent> {
        self.elements.iter().copied().find(|e| (e.value - value).abs() < MERGE_TOL)
    }

    pub fn require(&self, value: f64) -> Result<LatticeExponent> {
        self.find(value).ok_or(Error::NotInLattice(value))
    }

    pub fn contains_pair(&self, p: i64, q: i64) -> bool {
        self.find(LatticeExponent::new(p, q, self.hurst).value).is_some()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

/// Sorts by value and merges elements within `MERGE_TOL`, keeping the
/// canonical pair.
fn normalize(mut v: Vec<LatticeExponent>) -> Vec<LatticeExponent> {
    v.sort_by(|a, b| a.value.total_cmp(&b.value).then(a.canonical_key().cmp(&b.canonical_key())));
    let mut out: Vec<LatticeExponent> = Vec::with_capacity(v.len());
    for e in v {
        match out.last_mut() {
            Some(last) if (e.value - last.value).abs() < MERGE_TOL => {
                if e.canonical_key() < last.canonical_key() {
                    *last = e;
                }
            }
            _ => out.push(e),
        }
    }
    out
}

fn first_lattice(hurst: HurstParam, cutoff: f64) -> Vec<LatticeExponent> {
    let mut v = Vec::new();
    if cutoff < 0.0 {
        return v;
    }
    let qmax = (cutoff * hurst.value()).floor() as i64 + 1;
    for q in 0..=qmax {
        for p in 0..=(cutoff.floor() as i64 + 1) {
            let e = LatticeExponent::new(p, q, hurst);
            if e.value <= cutoff + MERGE_TOL {
                v.push(e);
            }
        }
    }
    normalize(v)
}

fn shifted(hurst: HurstParam, cutoff: f64, shift: i64, excluded: &[f64]) -> Vec<LatticeExponent> {
    let base = first_lattice(hurst, cutoff + shift as f64);
    normalize(
        base.into_iter()
            .filter(|e| !excluded.iter().any(|x| (e.value - x).abs() < MERGE_TOL))
            .map(|e| LatticeExponent::new(e.p - shift, e.q, hurst))
            .filter(|e| e.value <= cutoff + MERGE_TOL)
            .collect(),
    )
}

/// Minkowski closure: all finite non-empty sums of generators up to `cutoff`.
fn closure(gens: &[LatticeExponent], hurst: HurstParam, cutoff: f64) -> Vec<LatticeExponent> {
    let mut set = normalize(gens.to_vec());
    loop {
        let mut grown = set.clone();
        for s in &set {
            for g in gens {
                let e = s.add(*g, hurst);
                if e.value <= cutoff + MERGE_TOL {
                    grown.push(e);
                }
            }
        }
        let grown = normalize(grown);
        if grown.len() == set.len() {
            return set;
        }
        set = grown;
    }
}

pub fn build_lattice(kind: LatticeKind, hurst: HurstParam, cutoff: f64) -> Result<ExponentLattice> {
    if !(cutoff >= 0.0) || !cutoff.is_finite() {
        return Err(Error::invalid("lattice cutoff must be a finite non-negative number"));
    }
    let h = hurst.value();
    let elements = match kind {
        LatticeKind::L1 => first_lattice(hurst, cutoff),
        LatticeKind::L2 => shifted(hurst, cutoff, 1, &[0.0]),
        LatticeKind::L2Prime => shifted(hurst, cutoff, 2, &[0.0, 1.0, 1.0 / h]),
        LatticeKind::L3 => closure(&shifted(hurst, cutoff, 1, &[0.0]), hurst, cutoff),
        LatticeKind::L3Prime => closure(&shifted(hurst, cutoff, 2, &[0.0, 1.0, 1.0 / h]), hurst, cutoff),
        LatticeKind::L4 => {
            let a = build_lattice(LatticeKind::L3, hurst, cutoff)?.elements;
            let b = build_lattice(LatticeKind::L3Prime, hurst, cutoff)?.elements;
            let mut v = Vec::new();
            for x in &a {
                for y in &b {
                    let e = x.add(*y, hurst);
                    if e.value <= cutoff + MERGE_TOL {
                        v.push(e);
                    }
                }
            }
            normalize(v)
        }
    };
    Ok(ExponentLattice { kind, hurst, cutoff, elements })
}
