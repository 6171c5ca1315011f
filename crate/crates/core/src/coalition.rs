//! Feature coalitions: the set of features held at the explained instance.

use std::fmt;

use crate::error::{Error, Result};

/// Largest feature count stored as a bit mask.
pub const MASK_LIMIT: usize = 64;

/// A subset of `{0, …, d-1}`.
///
/// Stored as a 64-bit mask when `d <= 64` and as a strictly increasing index
/// list otherwise. The representation is chosen by `d` alone, so two equal
/// sets over the same `d` always compare and hash equal.
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum Coalition {
    Mask { bits: u64, d: usize },
    List { indices: Vec<usize>, d: usize },
}

impl Coalition {
    pub fn empty(d: usize) -> Self {
        if d <= MASK_LIMIT {
            Coalition::Mask { bits: 0, d }
        } else {
            Coalition::List {
                indices: Vec::new(),
                d,
            }
        }
    }

    pub fn full(d: usize) -> Self {
        if d <= MASK_LIMIT {
            Coalition::Mask {
                bits: full_mask(d),
                d,
            }
        } else {
            Coalition::List {
                indices: (0..d).collect(),
                d,
            }
        }
    }

    pub fn from_mask(bits: u64, d: usize) -> Result<Self> {
        if d > MASK_LIMIT {
            return Err(Error::InvalidInput(format!(
                "mask form needs d <= {MASK_LIMIT}, got {d}"
            )));
        }
        if bits & !full_mask(d) != 0 {
            return Err(Error::InvalidInput(format!(
                "mask {bits:#x} has members outside 0..{d}"
            )));
        }
        Ok(Coalition::Mask { bits, d })
    }

    /// Builds a coalition from arbitrary indices; duplicates are merged.
    pub fn from_indices(indices: &[usize], d: usize) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= d) {
            return Err(Error::InvalidInput(format!(
                "feature index {bad} out of range for d = {d}"
            )));
        }
        if d <= MASK_LIMIT {
            let bits = indices.iter().fold(0u64, |acc, &i| acc | (1u64 << i));
            Ok(Coalition::Mask { bits, d })
        } else {
            let mut indices = indices.to_vec();
            indices.sort_unstable();
            indices.dedup();
            Ok(Coalition::List { indices, d })
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Coalition::Mask { d, .. } | Coalition::List { d, .. } => *d,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Coalition::Mask { bits, .. } => bits.count_ones() as usize,
            Coalition::List { indices, .. } => indices.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_full(&self) -> bool {
        self.len() == self.dim()
    }

    pub fn contains(&self, i: usize) -> bool {
        match self {
            Coalition::Mask { bits, d } => i < *d && bits & (1u64 << i) != 0,
            Coalition::List { indices, .. } => indices.binary_search(&i).is_ok(),
        }
    }

    /// Returns `self ∪ {i}`.
    pub fn with(&self, i: usize) -> Self {
        debug_assert!(i < self.dim());
        match self {
            Coalition::Mask { bits, d } => Coalition::Mask {
                bits: bits | (1u64 << i),
                d: *d,
            },
            Coalition::List { indices, d } => {
                let mut indices = indices.clone();
                if let Err(pos) = indices.binary_search(&i) {
                    indices.insert(pos, i);
                }
                Coalition::List { indices, d: *d }
            }
        }
    }

    /// Members in increasing order.
    pub fn to_list(&self) -> Vec<usize> {
        match self {
            Coalition::Mask { bits, d } => (0..*d).filter(|&i| bits & (1u64 << i) != 0).collect(),
            Coalition::List { indices, .. } => indices.clone(),
        }
    }

    /// The mask form, if `d <= 64`.
    pub fn to_mask(&self) -> Option<u64> {
        match self {
            Coalition::Mask { bits, .. } => Some(*bits),
            Coalition::List { indices, d } if *d <= MASK_LIMIT => {
                Some(indices.iter().fold(0, |acc, &i| acc | (1u64 << i)))
            }
            Coalition::List { .. } => None,
        }
    }

    /// `fixed[i]` is true for members.
    pub fn indicator(&self) -> Vec<bool> {
        let mut out = vec![false; self.dim()];
        for i in self.to_list() {
            out[i] = true;
        }
        out
    }

    /// Stable identifier used to address the coalition's random stream.
    ///
    /// The mask value for `d <= 64`; an FNV fold of the member list beyond.
    pub fn rank(&self) -> u64 {
        match self {
            Coalition::Mask { bits, .. } => *bits,
            Coalition::List { indices, d } => {
                let mut hash = 0xcbf29ce484222325u64 ^ (*d as u64);
                for &i in indices {
                    for b in (i as u64).to_le_bytes() {
                        hash ^= u64::from(b);
                        hash = hash.wrapping_mul(0x100000001b3);
                    }
                    hash = hash.rotate_left(5);
                }
                hash
            }
        }
    }
}

impl fmt::Debug for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.to_list().iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}/{}", self.dim())
    }
}

pub(crate) fn full_mask(d: usize) -> u64 {
    if d >= 64 {
        u64::MAX
    } else {
        (1u64 << d) - 1
    }
}
