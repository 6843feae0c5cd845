//! Square complex and real grids, the 2D discrete Fourier transform pair and
//! index geometry.
//!
//! All grids are stored row-major with the zero-frequency sample at index
//! `(0, 0)`. Centering is an explicit operation ([`shift_dc_to_center`]) and
//! is only used for display and file output.
//!
//! Transform convention: the forward transform is unnormalized,
//! `F(u,v) = Σ f(x,y)·exp(−2πi(ux+vy)/N)`, and the inverse carries `1/N²`.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// An `N×N` grid of complex amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    n: usize,
    data: Vec<Complex64>,
}

impl ComplexField {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    /// Builds a field from row-major samples. Rejects non-square lengths,
    /// `N < 2` and non-finite entries.
    pub fn from_vec(n: usize, data: Vec<Complex64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::Dimension(format!("grid side {n} is below 2")));
        }
        if data.len() != n * n {
            return Err(Error::Dimension(format!(
                "{} samples cannot form a {n}x{n} grid",
                data.len()
            )));
        }
        if data.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Domain("non-finite field sample".into()));
        }
        Ok(Self { n, data })
    }

    pub(crate) fn from_vec_unchecked(n: usize, data: Vec<Complex64>) -> Self {
        debug_assert_eq!(data.len(), n * n);
        Self { n, data }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for u in 0..n {
            for v in 0..n {
                data.push(f(u, v));
            }
        }
        Self { n, data }
    }

    pub fn from_real(image: &RealImage) -> Self {
        Self {
            n: image.side(),
            data: image
                .as_slice()
                .iter()
                .map(|&x| Complex64::new(x, 0.0))
                .collect(),
        }
    }

    pub fn side(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    pub fn get(&self, u: usize, v: usize) -> Complex64 {
        self.data[u * self.n + v]
    }

    pub fn set(&mut self, u: usize, v: usize, value: Complex64) {
        self.data[u * self.n + v] = value;
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|&c| f(c)).collect(),
        }
    }

    /// Element-wise magnitudes as a real image.
    pub fn magnitude(&self) -> RealImage {
        RealImage {
            side: self.n,
            data: self.data.iter().map(|c| c.norm()).collect(),
        }
    }

    /// Real parts, clamped at zero.
    pub fn real_part_clamped(&self) -> RealImage {
        RealImage {
            side: self.n,
            data: self.data.iter().map(|c| c.re.max(0.0)).collect(),
        }
    }
}

/// An `N×N` grid of non-negative reals (object distributions, intensities).
#[derive(Debug, Clone, PartialEq)]
pub struct RealImage {
    side: usize,
    data: Vec<f64>,
}

impl RealImage {
    pub fn zeros(side: usize) -> Self {
        Self {
            side,
            data: vec![0.0; side * side],
        }
    }

    pub fn new(side: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != side * side {
            return Err(Error::Dimension(format!(
                "{} samples cannot form a {side}x{side} image",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|x| !x.is_finite() || **x < 0.0) {
            return Err(Error::Domain(format!(
                "image samples must be finite and non-negative, found {bad}"
            )));
        }
        Ok(Self { side, data })
    }

    pub(crate) fn new_unchecked(side: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), side * side);
        Self { side, data }
    }

    pub fn from_fn(side: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(side * side);
        for r in 0..side {
            for c in 0..side {
                data.push(f(r, c));
            }
        }
        Self::new(side, data)
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.side + c]
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    /// Root-mean-square amplitude over all samples.
    pub fn rms(&self) -> f64 {
        let sum: f64 = self.data.iter().map(|x| x * x).sum();
        (sum / self.data.len() as f64).sqrt()
    }

    /// Copies the centered `side×side` block.
    pub fn crop_center(&self, side: usize) -> Result<RealImage> {
        if side > self.side || (self.side - side) % 2 != 0 {
            return Err(Error::Dimension(format!(
                "cannot crop a centered {side}x{side} block from {0}x{0}",
                self.side
            )));
        }
        let off = (self.side - side) / 2;
        let mut data = Vec::with_capacity(side * side);
        for r in 0..side {
            let start = (r + off) * self.side + off;
            data.extend_from_slice(&self.data[start..start + side]);
        }
        Ok(RealImage { side, data })
    }
}

/// Sampling geometry of a detector-plane grid and the object it came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridGeometry {
    /// Detector-plane samples per side.
    pub n: usize,
    /// Object samples per side.
    pub n0: usize,
    pub physical: Option<PhysicalGeometry>,
}

/// Lengths in metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalGeometry {
    pub pixel_size: f64,
    pub wavelength: f64,
    pub distance: f64,
}

impl GridGeometry {
    pub fn new(n: usize, n0: usize) -> Result<Self> {
        if n0 == 0 || n0 > n {
            return Err(Error::Dimension(format!(
                "object side {n0} does not fit a {n}-sample grid"
            )));
        }
        Ok(Self {
            n,
            n0,
            physical: None,
        })
    }

    /// Geometry for 2D coherent diffraction imaging; requires `σ > √2`.
    pub fn cdi(n: usize, n0: usize) -> Result<Self> {
        let g = Self::new(n, n0)?;
        if !crate::metrics::oversampling_ok(g.sigma(), 2)? {
            return Err(Error::Domain(format!(
                "oversampling ratio {} does not exceed sqrt(2)",
                g.sigma()
            )));
        }
        Ok(g)
    }

    pub fn with_physical(mut self, physical: PhysicalGeometry) -> Result<Self> {
        if !(physical.pixel_size > 0.0 && physical.wavelength > 0.0 && physical.distance > 0.0)
        {
            return Err(Error::Domain("physical lengths must be positive".into()));
        }
        self.physical = Some(physical);
        Ok(self)
    }

    /// Linear oversampling ratio `N / N₀`.
    pub fn sigma(&self) -> f64 {
        self.n as f64 / self.n0 as f64
    }

    /// Detector side `S = N·Δ`.
    pub fn detector_side(&self) -> Option<f64> {
        self.physical.map(|p| self.n as f64 * p.pixel_size)
    }

    /// Extent of the reconstructed area `S₀ = λz/Δ`.
    pub fn far_field_extent(&self) -> Option<f64> {
        self.physical
            .map(|p| p.wavelength * p.distance / p.pixel_size)
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plans(n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft_forward(n), p.plan_fft_inverse(n))
    })
}

/// Reusable plan and scratch space for in-place transforms of one grid size.
pub(crate) struct Fft2 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    panel: Vec<Complex64>,
}

/// Columns gathered per batch of column transforms.
const PANEL: usize = 8;

impl Fft2 {
    pub(crate) fn new(n: usize) -> Self {
        let (fwd, inv) = plans(n);
        let len = fwd
            .get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len());
        Self {
            n,
            fwd,
            inv,
            scratch: vec![Complex64::new(0.0, 0.0); len],
            panel: vec![Complex64::new(0.0, 0.0); n * PANEL],
        }
    }

    /// Row transforms in place, then column transforms on contiguous panels
    /// of gathered columns.
    fn run(&mut self, data: &mut [Complex64], inverse: bool) {
        let n = self.n;
        let fft = if inverse { &self.inv } else { &self.fwd };
        fft.process_with_scratch(data, &mut self.scratch);
        for c0 in (0..n).step_by(PANEL) {
            let w = PANEL.min(n - c0);
            let panel = &mut self.panel[..w * n];
            for (r, row) in data.chunks_exact(n).enumerate() {
                for (k, v) in row[c0..c0 + w].iter().enumerate() {
                    panel[k * n + r] = *v;
                }
            }
            fft.process_with_scratch(panel, &mut self.scratch);
            for (r, row) in data.chunks_exact_mut(n).enumerate() {
                for (k, v) in row[c0..c0 + w].iter_mut().enumerate() {
                    *v = panel[k * n + r];
                }
            }
        }
    }

    pub(crate) fn forward(&mut self, data: &mut [Complex64]) {
        self.run(data, false);
    }

    /// Inverse transform including the `1/N²` factor.
    pub(crate) fn inverse(&mut self, data: &mut [Complex64]) {
        self.run(data, true);
        let scale = 1.0 / (self.n * self.n) as f64;
        data.iter_mut().for_each(|c| *c *= scale);
    }
}

fn check_square(field: &ComplexField) -> Result<()> {
    if field.n < 2 || field.data.len() != field.n * field.n {
        return Err(Error::Dimension(format!(
            "expected a square grid, got {} samples for side {}",
            field.data.len(),
            field.n
        )));
    }
    Ok(())
}

/// Unnormalized forward 2D DFT.
pub fn dft2(field: &ComplexField) -> Result<ComplexField> {
    check_square(field)?;
    let mut data = field.data.clone();
    Fft2::new(field.n).forward(&mut data);
    Ok(ComplexField { n: field.n, data })
}

/// Inverse 2D DFT with the `1/N²` factor.
pub fn idft2(field: &ComplexField) -> Result<ComplexField> {
    check_square(field)?;
    let mut data = field.data.clone();
    Fft2::new(field.n).inverse(&mut data);
    Ok(ComplexField { n: field.n, data })
}

fn cyclic_shift(field: &ComplexField) -> Result<ComplexField> {
    let n = field.n;
    if n % 2 != 0 {
        return Err(Error::UnsupportedSize(n));
    }
    let h = n / 2;
    Ok(ComplexField::from_fn(n, |u, v| {
        field.get((u + h) % n, (v + h) % n)
    }))
}

/// Moves the zero-frequency sample from `(0,0)` to `(N/2, N/2)`.
pub fn shift_dc_to_center(field: &ComplexField) -> Result<ComplexField> {
    cyclic_shift(field)
}

/// Inverse of [`shift_dc_to_center`]. On even grids the half-size cyclic
/// shift is its own inverse.
pub fn shift_dc_to_corner(field: &ComplexField) -> Result<ComplexField> {
    cyclic_shift(field)
}

/// Index of the centro-symmetric partner `((N−u) mod N, (N−v) mod N)`.
pub fn centro_partner(u: usize, v: usize, n: usize) -> Result<(usize, usize)> {
    if u >= n || v >= n {
        return Err(Error::Index { u, v, n });
    }
    Ok(((n - u) % n, (n - v) % n))
}

/// Total energy `Σ|f|²`.
pub fn energy(field: &ComplexField) -> f64 {
    field.data.iter().map(|c| c.norm_sqr()).sum()
}

/// Signed frequency of DC-at-corner index `k` on an `n`-point axis, in
/// `[−n/2, n/2)`.
pub fn signed_frequency(k: usize, n: usize) -> f64 {
    if 2 * k < n {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_field(n: usize, seed: u64) -> ComplexField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ComplexField::from_fn(n, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    fn brute_dft(f: &ComplexField, sign: f64) -> ComplexField {
        let n = f.side();
        ComplexField::from_fn(n, |u, v| {
            let mut acc = Complex64::new(0.0, 0.0);
            for x in 0..n {
                for y in 0..n {
                    let ph = sign * 2.0 * PI * ((u * x + v * y) % n) as f64 / n as f64;
                    acc += f.get(x, y) * Complex64::from_polar(1.0, ph);
                }
            }
            acc
        })
    }

    fn rel_err(a: &ComplexField, b: &ComplexField) -> f64 {
        let diff: f64 = a
            .as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(x, y)| (x - y).norm_sqr())
            .sum();
        (diff / energy(b).max(1e-300)).sqrt()
    }

    #[test]
    fn dft_of_constant_is_dc_only() {
        let f = ComplexField::from_fn(2, |_, _| Complex64::new(1.0, 0.0));
        let spec = dft2(&f).unwrap();
        let expected = [4.0, 0.0, 0.0, 0.0];
        for (c, e) in spec.as_slice().iter().zip(expected) {
            assert!((c - Complex64::new(e, 0.0)).norm() < 1e-14);
        }
        let back = idft2(&spec).unwrap();
        assert!(back.as_slice().iter().all(|c| (c - 1.0).norm() < 1e-14));
    }

    #[test]
    fn dft_of_impulse_is_flat() {
        let mut f = ComplexField::zeros(4);
        f.set(0, 0, Complex64::new(1.0, 0.0));
        let spec = dft2(&f).unwrap();
        assert!(spec.as_slice().iter().all(|c| (c - 1.0).norm() < 1e-14));
    }

    #[test]
    fn dft_matches_direct_sum() {
        let f = random_field(8, 3);
        assert!(rel_err(&dft2(&f).unwrap(), &brute_dft(&f, -1.0)) < 1e-10);
        let inv = brute_dft(&f, 1.0).map(|c| c / 64.0);
        assert!(rel_err(&idft2(&f).unwrap(), &inv) < 1e-10);
    }

    #[test]
    fn round_trip_identity() {
        let f = random_field(16, 5);
        assert!(rel_err(&idft2(&dft2(&f).unwrap()).unwrap(), &f) < 1e-12);
    }

    #[test]
    fn non_square_rejected() {
        assert!(ComplexField::from_vec(3, vec![Complex64::new(0.0, 0.0); 8]).is_err());
        let broken = ComplexField { n: 3, data: vec![Complex64::new(0.0, 0.0); 8] };
        assert!(matches!(dft2(&broken), Err(Error::Dimension(_))));
        assert!(matches!(idft2(&broken), Err(Error::Dimension(_))));
    }

    #[test]
    fn shifts() {
        let mut f = ComplexField::zeros(4);
        f.set(0, 0, Complex64::new(1.0, 0.0));
        let c = shift_dc_to_center(&f).unwrap();
        assert_eq!(c.get(2, 2), Complex64::new(1.0, 0.0));
        assert_eq!(shift_dc_to_center(&c).unwrap(), f);
        let r = random_field(8, 1);
        assert_eq!(shift_dc_to_corner(&shift_dc_to_center(&r).unwrap()).unwrap(), r);
        let odd = ComplexField::zeros(5);
        assert!(matches!(shift_dc_to_center(&odd), Err(Error::UnsupportedSize(5))));
    }

    #[test]
    fn signed_frequencies() {
        let even: Vec<f64> = (0..4).map(|k| signed_frequency(k, 4)).collect();
        assert_eq!(even, [0.0, 1.0, -2.0, -1.0]);
        let odd: Vec<f64> = (0..5).map(|k| signed_frequency(k, 5)).collect();
        assert_eq!(odd, [0.0, 1.0, 2.0, -2.0, -1.0]);
    }

    #[test]
    fn partners() {
        assert_eq!(centro_partner(0, 0, 8).unwrap(), (0, 0));
        assert_eq!(centro_partner(1, 2, 8).unwrap(), (7, 6));
        assert!(matches!(centro_partner(8, 0, 8), Err(Error::Index { .. })));

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let real = ComplexField::from_fn(8, |_, _| Complex64::new(rng.gen::<f64>(), 0.0));
        let spec = dft2(&real).unwrap();
        for u in 0..8 {
            for v in 0..8 {
                let (pu, pv) = centro_partner(u, v, 8).unwrap();
                assert!((spec.get(u, v) - spec.get(pu, pv).conj()).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn energy_and_parseval() {
        let ones = ComplexField::from_fn(4, |_, _| Complex64::new(1.0, 0.0));
        assert_eq!(energy(&ones), 16.0);
        assert_eq!(energy(&ComplexField::zeros(4)), 0.0);
        let f = random_field(8, 9);
        let ratio = energy(&dft2(&f).unwrap()) / (64.0 * energy(&f));
        assert!((ratio - 1.0).abs() < 1e-10);
    }

    #[test]
    fn geometry_rejects_low_oversampling() {
        assert!(GridGeometry::cdi(512, 128).is_ok());
        assert!(GridGeometry::cdi(128, 128).is_err());
        assert!(GridGeometry::new(128, 128).is_ok());
        assert!(GridGeometry::new(64, 128).is_err());
    }
}
