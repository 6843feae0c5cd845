//! Reconstruction error metrics and the oversampling / missing-fraction
//! feasibility algebra.

use std::fmt;

use crate::error::{Error, Result};
use crate::field::{ComplexField, GridGeometry, RealImage};
use crate::pattern::MeasuredPattern;

/// Object-domain mismatch `(1/N₀)·√(Σ|o − o₀|²)` over equal-size crops.
pub fn error_rms(reconstruction: &RealImage, original: &RealImage) -> Result<f64> {
    if reconstruction.side() != original.side() {
        return Err(Error::Dimension(format!(
            "reconstruction is {0}x{0}, original is {1}x{1}",
            reconstruction.side(),
            original.side()
        )));
    }
    let sum: f64 = reconstruction
        .as_slice()
        .iter()
        .zip(original.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum.sqrt() / original.side() as f64)
}

/// Detector-domain residual `{N⁻²·Σ(|G|−|F|)² / Σ|F|²}^½`, both sums over
/// measured samples. `retrieved` holds `|G_k|` on the full grid.
pub fn error_fienup(retrieved: &[f64], measured: &MeasuredPattern) -> Result<f64> {
    if retrieved.len() != measured.amplitude().len() {
        return Err(Error::Dimension("retrieved amplitudes do not match pattern".into()));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for ((g, f), &m) in retrieved.iter().zip(measured.amplitude()).zip(measured.mask()) {
        if m {
            num += (g - f) * (g - f);
            den += f * f;
        }
    }
    if den == 0.0 {
        return Err(Error::Undefined("no measured signal to normalize the detector error"));
    }
    let n = measured.side() as f64;
    Ok((num / (n * n) / den).sqrt())
}

/// Object-constraint residual `{Σ_out|g|² / Σ_in|g|²}^½` for a support
/// indicator over the grid.
pub fn error_support(estimate: &ComplexField, support: &[bool]) -> Result<f64> {
    if support.len() != estimate.as_slice().len() {
        return Err(Error::Dimension("support does not match estimate".into()));
    }
    let (mut inside, mut outside) = (0.0, 0.0);
    for (c, &s) in estimate.as_slice().iter().zip(support) {
        if s {
            inside += c.norm_sqr();
        } else {
            outside += c.norm_sqr();
        }
    }
    if inside == 0.0 {
        return Err(Error::Undefined("no energy inside the support"));
    }
    Ok((outside / inside).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Modality {
    Cdi,
    Holography,
}

impl Modality {
    pub fn name(self) -> &'static str {
        match self {
            Modality::Cdi => "cdi",
            Modality::Holography => "holography",
        }
    }
}

fn check_dimension(dimension: u32) -> Result<()> {
    if !(1..=3).contains(&dimension) {
        return Err(Error::Domain(format!("dimension {dimension} not in 1..=3")));
    }
    Ok(())
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::Domain(format!("oversampling ratio {sigma} must be positive")));
    }
    Ok(())
}

/// Oversampling condition for real objects: `σ > 2` (1D), `σ > √2` (2D),
/// `σ > 2^⅓` (3D), i.e. `σ^d > 2`.
pub fn oversampling_ok(sigma: f64, dimension: u32) -> Result<bool> {
    check_sigma(sigma)?;
    check_dimension(dimension)?;
    let threshold = match dimension {
        1 => 2.0,
        2 => 2f64.sqrt(),
        _ => 2f64.cbrt(),
    };
    Ok(sigma > threshold)
}

/// Raw bound on the missing fraction for a real object: `1 − 2/σ^d` for
/// CDI (half the equations survive conjugate symmetry), `1 − 1/σ^d` for
/// holography. May be negative.
fn raw_bound(sigma: f64, modality: Modality, dimension: u32) -> f64 {
    let cells = sigma.powi(dimension as i32);
    match modality {
        Modality::Cdi => 1.0 - 2.0 / cells,
        Modality::Holography => 1.0 - 1.0 / cells,
    }
}

/// Largest admissible missing fraction (exclusive); 0 when `σ` is too small
/// for any sample to be missing.
pub fn max_missing_fraction(sigma: f64, modality: Modality, dimension: u32) -> Result<f64> {
    check_sigma(sigma)?;
    check_dimension(dimension)?;
    Ok(raw_bound(sigma, modality, dimension).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityReport {
    pub sigma: f64,
    pub dimension: u32,
    pub modality: Modality,
    pub f_max: f64,
    pub f_actual: f64,
    pub feasible: bool,
}

impl FeasibilityReport {
    pub fn new(sigma: f64, modality: Modality, dimension: u32, f_actual: f64) -> Result<Self> {
        let f_max = max_missing_fraction(sigma, modality, dimension)?;
        let positive = raw_bound(sigma, modality, dimension) > 0.0;
        Ok(Self {
            sigma,
            dimension,
            modality,
            f_max,
            f_actual,
            feasible: positive && f_actual < f_max,
        })
    }

    pub const CSV_HEADER: &'static str = "sigma,dimension,modality,f_max,f_actual,feasible";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.sigma,
            self.dimension,
            self.modality.name(),
            self.f_max,
            self.f_actual,
            self.feasible
        )
    }
}

impl fmt::Display for FeasibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "modality={} dimension={} sigma={} f_max={} f_actual={} feasible={}",
            self.modality.name(),
            self.dimension,
            self.sigma,
            self.f_max,
            self.f_actual,
            self.feasible
        )
    }
}

/// Result of [`geometry_oversampling`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryOversampling {
    /// `S₀ = λz/Δ`.
    pub extent: f64,
    /// `σ = S₀/O`.
    pub sigma: f64,
    /// Relative mismatch against `N/N₀` exceeds 1e-9.
    pub grid_mismatch: bool,
}

/// Oversampling ratio from physical geometry and the object extent `O`.
pub fn geometry_oversampling(geometry: &GridGeometry, object_extent: f64) -> Result<GeometryOversampling> {
    let p = geometry
        .physical
        .ok_or_else(|| Error::Domain("geometry has no physical lengths".into()))?;
    if !(object_extent > 0.0) {
        return Err(Error::Domain("object extent must be positive".into()));
    }
    let extent = p.wavelength * p.distance / p.pixel_size;
    let sigma = extent / object_extent;
    let grid = geometry.sigma();
    Ok(GeometryOversampling {
        extent,
        sigma,
        grid_mismatch: ((sigma - grid) / grid).abs() > 1e-9,
    })
}

/// Per-iteration error values of one reconstruction run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub eq9: f64,
    pub eq8: Option<f64>,
    pub eq10: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ErrorTrace {
    rows: Vec<TraceRow>,
}

impl ErrorTrace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends the next row; iteration indices start at 1 and increase by one.
    pub fn push(&mut self, eq9: f64, eq8: Option<f64>, eq10: f64) {
        let iteration = self.rows.len() + 1;
        self.rows.push(TraceRow {
            iteration,
            eq9,
            eq8,
            eq10,
        });
    }

    pub fn rows(&self) -> &[TraceRow] {
        &self.rows
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// CSV with columns `iteration,eq9,eq8,eq10`; the eq8 column is omitted
    /// when no row carries it.
    pub fn to_csv(&self) -> String {
        let with_eq8 = self.rows.iter().any(|r| r.eq8.is_some());
        let mut out = String::from(if with_eq8 {
            "iteration,eq9,eq8,eq10\n"
        } else {
            "iteration,eq9,eq10\n"
        });
        for r in &self.rows {
            if with_eq8 {
                let e8 = r.eq8.map(|v| format!("{v:e}")).unwrap_or_default();
                out.push_str(&format!("{},{:e},{},{:e}\n", r.iteration, r.eq9, e8, r.eq10));
            } else {
                out.push_str(&format!("{},{:e},{:e}\n", r.iteration, r.eq9, r.eq10));
            }
        }
        out
    }
}
