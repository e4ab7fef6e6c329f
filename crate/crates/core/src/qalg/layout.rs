use serde::{Deserialize, Serialize};

use crate::error::{Result, VslqError};

/// Default truncation of the readout resonator.
pub const DEFAULT_RESONATOR_DIM: usize = 6;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subsystem {
    pub label: String,
    pub dim: usize,
}

/// Which VSLQ copy an operator refers to. `Solo` is the single-copy layout,
/// whose labels carry no suffix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Copy {
    Solo,
    A,
    B,
}

impl Copy {
    pub fn suffix(self) -> &'static str {
        match self {
            Copy::Solo => "",
            Copy::A => "A",
            Copy::B => "B",
        }
    }

    pub fn label(self, base: &str) -> String {
        format!("{base}{}", self.suffix())
    }
}

/// Primary transmon of a VSLQ copy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    L,
    R,
}

impl Side {
    pub fn primary(self) -> &'static str {
        match self {
            Side::L => "l",
            Side::R => "r",
        }
    }

    pub fn shadow(self) -> &'static str {
        match self {
            Side::L => "Sl",
            Side::R => "Sr",
        }
    }

    pub fn other(self) -> Side {
        match self {
            Side::L => Side::R,
            Side::R => Side::L,
        }
    }
}

/// Ordered list of subsystems. The first subsystem is the most significant
/// digit of a basis index (standard Kronecker ordering).
///
/// Canonical orderings: one copy is `[l, r, Sl, Sr]`; two copies are
/// `[lA, rA, SlA, SrA, lB, rB, SlB, SrB]`; a readout resonator `R` is always
/// appended last.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemLayout {
    subsystems: Vec<Subsystem>,
}

impl SystemLayout {
    pub fn new<S: Into<String>>(subsystems: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        let subsystems: Vec<Subsystem> =
            subsystems.into_iter().map(|(label, dim)| Subsystem { label: label.into(), dim }).collect();
        if subsystems.is_empty() {
            return Err(VslqError::InvalidLayout("layout has no subsystems".into()));
        }
        for (i, s) in subsystems.iter().enumerate() {
            if s.dim == 0 {
                return Err(VslqError::InvalidDimension(format!("subsystem `{}` has dimension 0", s.label)));
            }
            if subsystems[..i].iter().any(|p| p.label == s.label) {
                return Err(VslqError::InvalidLayout(format!("duplicate label `{}`", s.label)));
            }
        }
        Ok(Self { subsystems })
    }

    fn copy_block(copy: Copy, shadow_dim: usize) -> Vec<(String, usize)> {
        vec![
            (copy.label("l"), 3),
            (copy.label("r"), 3),
            (copy.label("Sl"), shadow_dim),
            (copy.label("Sr"), shadow_dim),
        ]
    }

    /// `[l:3, r:3, Sl:s, Sr:s]`.
    pub fn single_vslq(shadow_dim: usize) -> Result<Self> {
        Self::new(Self::copy_block(Copy::Solo, shadow_dim))
    }

    /// `[lA, rA, SlA, SrA, lB, rB, SlB, SrB]`.
    pub fn two_copy(shadow_dim: usize) -> Result<Self> {
        let mut subs = Self::copy_block(Copy::A, shadow_dim);
        subs.extend(Self::copy_block(Copy::B, shadow_dim));
        Self::new(subs)
    }

    /// Just the two primary transmons `[l:3, r:3]`.
    pub fn bare_pair() -> Self {
        Self::new([("l", 3), ("r", 3)]).expect("static layout")
    }

    pub fn with_resonator(&self, dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(VslqError::InvalidDimension(format!("resonator dimension {dim} < 2")));
        }
        let mut subs: Vec<(String, usize)> = self.subsystems.iter().map(|s| (s.label.clone(), s.dim)).collect();
        subs.push(("R".into(), dim));
        Self::new(subs)
    }

    pub fn subsystems(&self) -> &[Subsystem] {
        &self.subsystems
    }

    pub fn dims(&self) -> Vec<usize> {
        self.subsystems.iter().map(|s| s.dim).collect()
    }

    pub fn dim(&self) -> usize {
        self.subsystems.iter().map(|s| s.dim).product()
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.subsystems
            .iter()
            .position(|s| s.label == label)
            .ok_or_else(|| VslqError::UnknownLabel(label.to_string()))
    }

    pub fn contains(&self, label: &str) -> bool {
        self.subsystems.iter().any(|s| s.label == label)
    }

    pub fn local_dim(&self, label: &str) -> Result<usize> {
        Ok(self.subsystems[self.index_of(label)?].dim)
    }

    /// Stride of each subsystem digit in a global basis index.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.subsystems.len()];
        for k in (0..self.subsystems.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.subsystems[k + 1].dim;
        }
        strides
    }

    /// Copies present in this layout.
    pub fn copies(&self) -> Vec<Copy> {
        [Copy::Solo, Copy::A, Copy::B].into_iter().filter(|c| self.contains(&c.label("l"))).collect()
    }

    pub fn has_resonator(&self) -> bool {
        self.contains("R")
    }

    pub fn require_copy(&self, copy: Copy) -> Result<()> {
        for base in ["l", "r"] {
            let label = copy.label(base);
            if self.local_dim(&label)? != 3 {
                return Err(VslqError::InvalidLayout(format!("`{label}` must have dimension 3")));
            }
        }
        Ok(())
    }

    pub fn require_shadows(&self, copy: Copy) -> Result<()> {
        for base in ["Sl", "Sr"] {
            self.index_of(&copy.label(base))?;
        }
        Ok(())
    }

    pub fn require_two_copies(&self) -> Result<()> {
        self.require_copy(Copy::A)?;
        self.require_copy(Copy::B)
    }
}
