//! Removing intensity samples from a pattern, and refilling diffraction
//! patterns from their centro-symmetric partners.
//!
//! Masks compose by intersection: a sample missing in the input stays missing.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::field::centro_partner;
use crate::pattern::{MeasuredPattern, PatternKind};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskMode {
    Random,
    CentralSquare,
}

impl MaskMode {
    pub fn name(self) -> &'static str {
        match self {
            MaskMode::Random => "random",
            MaskMode::CentralSquare => "central",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskSpec {
    pub mode: MaskMode,
    pub fraction: f64,
    pub seed: u64,
}

impl MaskSpec {
    pub fn apply(&self, pattern: &MeasuredPattern) -> Result<MeasuredPattern> {
        match self.mode {
            MaskMode::Random => apply_random_mask(pattern, self.fraction, self.seed),
            MaskMode::CentralSquare => apply_central_mask(pattern, self.fraction),
        }
    }
}

fn check_fraction(f: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&f) {
        return Err(Error::Domain(format!("missing fraction {f} outside [0, 1]")));
    }
    Ok(())
}

/// Boolean mask (true = measured) with exactly `round(f·len)` entries cleared,
/// chosen uniformly without replacement by a partial Fisher–Yates shuffle of
/// the flat indices.
pub fn random_mask(len: usize, f: f64, seed: u64) -> Result<Vec<bool>> {
    check_fraction(f)?;
    let missing = (f * len as f64).round() as usize;
    let mut indices: Vec<u32> = (0..len as u32).collect();
    let mut gen = rng::generator(seed, rng::MASK_STREAM);
    let (chosen, _) = indices.partial_shuffle(&mut gen, missing);
    let mut mask = vec![true; len];
    for &i in chosen.iter() {
        mask[i as usize] = false;
    }
    Ok(mask)
}

/// Marks `round(f·N²)` uniformly chosen samples as unmeasured.
pub fn apply_random_mask(pattern: &MeasuredPattern, f: f64, seed: u64) -> Result<MeasuredPattern> {
    let n = pattern.side();
    let mask = random_mask(n * n, f, seed)?;
    pattern.intersect_mask(&mask)
}

/// Side of the central block removed for a target fraction on an `n` grid.
pub fn central_block_side(n: usize, f: f64) -> usize {
    ((n as f64 * f.sqrt()).round() as usize).min(n)
}

/// Mask with a `s×s` block around the DC sample cleared, in DC-at-corner
/// storage. The block spans centered offsets `[−⌊s/2⌋, s − ⌊s/2⌋)`.
pub fn central_mask(n: usize, f: f64) -> Result<Vec<bool>> {
    check_fraction(f)?;
    let s = central_block_side(n, f);
    let mut mask = vec![true; n * n];
    let lo = -((s / 2) as i64);
    for du in lo..lo + s as i64 {
        let u = du.rem_euclid(n as i64) as usize;
        for dv in lo..lo + s as i64 {
            let v = dv.rem_euclid(n as i64) as usize;
            mask[u * n + v] = false;
        }
    }
    Ok(mask)
}

/// Removes a square block of side `round(N·√f)` centered on DC. The realized
/// fraction is `pattern.missing_fraction()` of the result.
pub fn apply_central_mask(pattern: &MeasuredPattern, f: f64) -> Result<MeasuredPattern> {
    let mask = central_mask(pattern.side(), f)?;
    pattern.intersect_mask(&mask)
}

/// Fills every unmeasured sample whose centro-symmetric partner is measured
/// with the partner's amplitude. Self-partnered samples (DC and the Nyquist
/// lines) cannot be refilled.
pub fn symmetrize(pattern: &MeasuredPattern) -> Result<MeasuredPattern> {
    if pattern.kind() != PatternKind::Diffraction {
        return Err(Error::Kind {
            expected: PatternKind::Diffraction.name(),
            found: pattern.kind().name(),
        });
    }
    let n = pattern.side();
    let mut amplitude = pattern.amplitude().to_vec();
    let mut mask = pattern.mask().to_vec();
    for u in 0..n {
        for v in 0..n {
            let i = u * n + v;
            if pattern.mask()[i] {
                continue;
            }
            let (pu, pv) = centro_partner(u, v, n)?;
            let j = pu * n + pv;
            if pattern.mask()[j] {
                amplitude[i] = pattern.amplitude()[j];
                mask[i] = true;
            }
        }
    }
    Ok(MeasuredPattern::from_parts_unchecked(
        amplitude,
        mask,
        *pattern.geometry(),
        pattern.kind(),
    ))
}
