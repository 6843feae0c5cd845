use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use phasefill::cdi::{align_to_reference, aligned_object_error, retrieve, HioConfig, SelectionMetric, SupportSpec};
use phasefill::config::ExperimentConfig;
use phasefill::degrade::{apply_central_mask, apply_random_mask, central_block_side, symmetrize};
use phasefill::error::{Error, Result};
use phasefill::field::{GridGeometry, PhysicalGeometry, RealImage};
use phasefill::forward::{embed_object, make_exit_wave, simulate_diffraction, simulate_hologram, PropagationParams};
use phasefill::holo::{reconstruct_hologram, AbsorptionConstraint, HoloConfig};
use phasefill::io::{self, Sidecar};
use phasefill::metrics::{error_fienup, error_rms, oversampling_ok, FeasibilityReport, Modality};
use phasefill::MeasuredPattern;

#[derive(Parser)]
#[command(name = "phasefill", version, about = "Phase retrieval from diffraction patterns and holograms with missing samples")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn fraction(s: &str) -> std::result::Result<f64, String> {
    let f: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if (0.0..=1.0).contains(&f) {
        Ok(f)
    } else {
        Err(format!("missing fraction {f} outside [0, 1]"))
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MaskArg {
    Random,
    Central,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModalityArg {
    Cdi,
    Holography,
}

#[derive(Clone, Copy, ValueEnum)]
enum AbsorptionArg {
    /// Zero negative real absorption, keep the imaginary part.
    Complex,
    /// Real, non-negative absorption.
    Real,
}

#[derive(Clone, Copy, ValueEnum)]
enum SelectionArg {
    Eq8,
    Eq9,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the far-field diffraction amplitude of a PGM object.
    SimulateDp {
        object: PathBuf,
        #[arg(long)]
        sigma: f64,
        /// Weight the far field by the square pixel aperture.
        #[arg(long)]
        envelope: bool,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value = "pattern.f64")]
        name: String,
    },
    /// Simulate an in-line hologram of a PGM absorption object.
    SimulateHolo {
        object: PathBuf,
        #[arg(long)]
        sigma: f64,
        #[arg(long, default_value_t = 532e-9)]
        wavelength: f64,
        #[arg(long, default_value_t = 20e-3)]
        distance: f64,
        #[arg(long, default_value_t = 2e-3 / 512.0)]
        pixel_size: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value = "hologram.f64")]
        name: String,
    },
    /// Remove samples from a pattern and write the mask.
    Degrade {
        pattern: PathBuf,
        #[arg(long, value_enum)]
        mode: MaskArg,
        #[arg(long, value_parser = fraction)]
        f: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value = "degraded.f64")]
        name: String,
    },
    /// Refill missing diffraction samples from their centro-symmetric partners.
    Symmetrize {
        pattern: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value = "symmetrized.f64")]
        name: String,
    },
    /// Iterative reconstruction of a diffraction pattern.
    ReconstructCdi {
        pattern: PathBuf,
        /// Support side; defaults to the object side recorded with the pattern.
        #[arg(long)]
        support: Option<usize>,
        /// Ground-truth object, enables eq8 traces and selection.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long, default_value_t = 0.9)]
        beta: f64,
        #[arg(long, default_value_t = 2000)]
        iterations: usize,
        #[arg(long, default_value_t = 100)]
        restarts: usize,
        #[arg(long, default_value_t = 10)]
        keep_best: usize,
        /// Defaults to eq8 with --truth, eq9 otherwise.
        #[arg(long, value_enum)]
        selection: Option<SelectionArg>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        er_interval: usize,
        #[arg(long, default_value_t = 0)]
        er_start: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Iterative reconstruction of an in-line hologram.
    ReconstructHolo {
        hologram: PathBuf,
        #[arg(long)]
        support: Option<usize>,
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long, default_value_t = 500)]
        iterations: usize,
        #[arg(long, default_value_t = 20)]
        smoothing_interval: usize,
        #[arg(long, value_enum, default_value = "complex")]
        absorption: AbsorptionArg,
        /// Geometry overrides; default to the values recorded with the hologram.
        #[arg(long)]
        wavelength: Option<f64>,
        #[arg(long)]
        distance: Option<f64>,
        #[arg(long)]
        pixel_size: Option<f64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Error metrics between two images, and optionally against a pattern.
    Metrics {
        reconstruction: PathBuf,
        original: PathBuf,
        /// Measured pattern and recovered pattern for eq9.
        #[arg(long, requires = "recovered")]
        pattern: Option<PathBuf>,
        #[arg(long)]
        recovered: Option<PathBuf>,
    },
    /// Largest admissible missing fraction for an oversampling ratio.
    Bounds {
        #[arg(long, value_enum)]
        modality: ModalityArg,
        #[arg(long)]
        sigma: f64,
        #[arg(long, default_value_t = 2)]
        dimension: u32,
        #[arg(long, value_parser = fraction, default_value_t = 0.0)]
        f: f64,
        #[arg(long)]
        csv: bool,
    },
    /// Run an experiment sweep from a config file.
    Sweep {
        config: PathBuf,
        /// Overrides the output directory in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
}

/// Provenance context for one invocation.
struct Run {
    command: String,
    hash: String,
}

impl Run {
    fn sidecar(&self, seed: Option<u64>) -> Sidecar {
        Sidecar::provenance(&self.command, &self.hash, seed)
    }
}

fn grid_side(n0: usize, sigma: f64) -> Result<usize> {
    let n = (sigma * n0 as f64).round();
    if (n - sigma * n0 as f64).abs() > 1e-9 * n.max(1.0) {
        return Err(Error::Config(format!(
            "sigma {sigma} times object side {n0} is not an integer"
        )));
    }
    Ok(n as usize)
}

fn warn_oversampling(sigma: f64) -> Result<()> {
    if !oversampling_ok(sigma, 2)? {
        eprintln!("warning: oversampling condition violated (sigma = {sigma} does not exceed sqrt(2))");
    }
    Ok(())
}

fn pattern_sidecar(run: &Run, p: &MeasuredPattern, seed: Option<u64>) -> Sidecar {
    let mut s = run.sidecar(seed);
    let g = p.geometry();
    s.set("kind", p.kind().name());
    s.set("n", g.n);
    s.set("object_side", g.n0);
    if let Some(ph) = g.physical {
        s.set("wavelength", ph.wavelength);
        s.set("distance", ph.distance);
        s.set("pixel_size", ph.pixel_size);
    }
    s.set("missing_fraction", p.missing_fraction());
    s
}

fn write_pattern(run: &Run, path: &Path, p: &MeasuredPattern, seed: Option<u64>) -> Result<()> {
    io::write_pattern(path, p)?;
    pattern_sidecar(run, p, seed).write_for(path)
}

fn meta_value<T: std::str::FromStr>(meta: Option<&Sidecar>, key: &str) -> Option<T> {
    meta.and_then(|m| m.get(key)).and_then(|v| v.parse().ok())
}

/// Reads a pattern, taking geometry from its sidecar unless overridden.
fn read_pattern(path: &Path, support: Option<usize>) -> Result<MeasuredPattern> {
    let file = io::Pr2d::read(path)?;
    let meta = Sidecar::read_for(path).ok();
    let n = file.header.n;
    let n0 = support
        .or_else(|| meta_value(meta.as_ref(), "object_side"))
        .ok_or_else(|| Error::Config(format!(
            "{}: object side unknown, pass --support",
            path.display()
        )))?;
    let mut geometry = GridGeometry::new(n, n0)?;
    if let (Some(w), Some(d), Some(px)) = (
        meta_value(meta.as_ref(), "wavelength"),
        meta_value(meta.as_ref(), "distance"),
        meta_value(meta.as_ref(), "pixel_size"),
    ) {
        geometry = geometry.with_physical(PhysicalGeometry {
            pixel_size: px,
            wavelength: w,
            distance: d,
        })?;
    }
    io::pr2d_to_pattern(&file, geometry)
}

/// PGM in `[0, 1]`, multiplied by the `scale` recorded in its sidecar when
/// one exists.
fn read_image(path: &Path) -> Result<RealImage> {
    let image = io::read_pgm(path)?;
    if !Sidecar::path_for(path).exists() {
        return Ok(image);
    }
    let scale = match Sidecar::read_for(path)?.get("scale") {
        Some(v) => v.parse::<f64>().map_err(|_| Error::Format(format!("bad scale {v:?} in sidecar")))?,
        None => 1.0,
    };
    if scale == 1.0 {
        return Ok(image);
    }
    RealImage::new(image.side(), image.as_slice().iter().map(|v| v * scale).collect())
}

fn write_image(run: &Run, path: &Path, image: &RealImage, seed: Option<u64>) -> Result<()> {
    let (bytes, scale) = io::encode_pgm16(image);
    let mut s = run.sidecar(seed);
    s.set("scale", format!("{scale:e}"));
    io::write_with_sidecar(path, &bytes, &s)
}

fn execute(command: Command, run: &Run) -> Result<()> {
    match command {
        Command::SimulateDp { object, sigma, envelope, out, name } => {
            warn_oversampling(sigma)?;
            let obj = read_image(&object)?;
            let n = grid_side(obj.side(), sigma)?;
            let (padded, geometry) = embed_object(&obj, n)?;
            let pattern = simulate_diffraction(&padded, geometry, envelope)?;
            std::fs::create_dir_all(&out)?;
            write_pattern(run, &out.join(&name), &pattern, None)?;
            let preview = io::encode_log_preview(&pattern.intensity());
            io::write_with_sidecar(&out.join(format!("{name}.preview.pgm")), &preview, &run.sidecar(None))?;
            println!("wrote {} ({n}x{n}, sigma {sigma})", out.join(&name).display());
        }
        Command::SimulateHolo { object, sigma, wavelength, distance, pixel_size, out, name } => {
            warn_oversampling(sigma)?;
            let obj = read_image(&object)?;
            let n = grid_side(obj.side(), sigma)?;
            let (padded, _) = embed_object(&obj, n)?;
            let params = PropagationParams::new(wavelength, distance, pixel_size * n as f64, n)?;
            let hologram = simulate_hologram(&make_exit_wave(&padded)?, &params, obj.side())?;
            std::fs::create_dir_all(&out)?;
            write_pattern(run, &out.join(&name), &hologram, None)?;
            println!("wrote {} ({n}x{n})", out.join(&name).display());
        }
        Command::Degrade { pattern, mode, f, seed, out, name } => {
            let p = read_pattern(&pattern, None)?;
            let (degraded, mode_name) = match mode {
                MaskArg::Random => (apply_random_mask(&p, f, seed)?, "random"),
                MaskArg::Central => (apply_central_mask(&p, f)?, "central"),
            };
            std::fs::create_dir_all(&out)?;
            write_pattern(run, &out.join(&name), &degraded, Some(seed))?;
            let n = degraded.side();
            let mut s = run.sidecar(Some(seed));
            s.set("n", n);
            s.set("f_target", f);
            s.set("f_realized", degraded.missing_fraction());
            s.set("mode", mode_name);
            if let MaskArg::Central = mode {
                s.set("block_side", central_block_side(n, f));
            }
            io::write_with_sidecar(&out.join("mask.pbm"), &io::encode_pbm(degraded.mask(), n)?, &s)?;
            println!("missing fraction {} ({} of {} samples)", degraded.missing_fraction(), degraded.missing_count(), n * n);
        }
        Command::Symmetrize { pattern, out, name } => {
            let p = read_pattern(&pattern, None)?;
            let filled = symmetrize(&p)?;
            std::fs::create_dir_all(&out)?;
            write_pattern(run, &out.join(&name), &filled, None)?;
            io::write_with_sidecar(
                &out.join("mask.pbm"),
                &io::encode_pbm(filled.mask(), filled.side())?,
                &run.sidecar(None),
            )?;
            println!("missing fraction {} -> {}", p.missing_fraction(), filled.missing_fraction());
        }
        Command::ReconstructCdi {
            pattern, support, truth, beta, iterations, restarts, keep_best, selection, seed,
            er_interval, er_start, out,
        } => {
            let p = read_pattern(&pattern, support)?;
            let n0 = p.geometry().n0;
            let truth = truth.map(|t| read_image(&t)).transpose()?;
            let selection = match selection {
                Some(SelectionArg::Eq8) => SelectionMetric::GroundTruth,
                Some(SelectionArg::Eq9) => SelectionMetric::Detector,
                None if truth.is_some() => SelectionMetric::GroundTruth,
                None => SelectionMetric::Detector,
            };
            let config = HioConfig { beta, iterations, restarts, keep_best, selection, seed, er_interval, er_start };
            let result = retrieve(&p, &SupportSpec::new(n0), &config, truth.as_ref())?;
            std::fs::create_dir_all(&out)?;
            write_image(run, &out.join("object.pgm"), &result.object.crop_center(n0)?, Some(seed))?;
            write_pattern(run, &out.join("recovered.f64"), &result.recovered_pattern, Some(seed))?;
            let best = result.selected[0];
            io::write_with_sidecar(
                &out.join("trace.csv"),
                result.traces[best].to_csv().as_bytes(),
                &run.sidecar(Some(seed)),
            )?;
            let last = result.traces[best].last().expect("at least one iteration");
            println!("best restart {best}: eq9 {:e} eq10 {:e}", last.eq9, last.eq10);
            if let Some(e) = result.eq8 {
                println!("eq8 {e:e}");
            }
        }
        Command::ReconstructHolo {
            hologram, support, truth, iterations, smoothing_interval, absorption, wavelength,
            distance, pixel_size, out,
        } => {
            let h = read_pattern(&hologram, support)?;
            let n = h.side();
            let recorded = h.geometry().physical;
            let pick = |v: Option<f64>, r: Option<f64>, what: &str| {
                v.or(r).ok_or_else(|| Error::Config(format!("{what} unknown, pass --{what}")))
            };
            let params = PropagationParams::new(
                pick(wavelength, recorded.map(|g| g.wavelength), "wavelength")?,
                pick(distance, recorded.map(|g| g.distance), "distance")?,
                pick(pixel_size, recorded.map(|g| g.pixel_size), "pixel-size")? * n as f64,
                n,
            )?;
            let config = HoloConfig {
                iterations,
                smoothing_interval,
                support: SupportSpec::new(h.geometry().n0),
                params,
                constraint: match absorption {
                    AbsorptionArg::Complex => AbsorptionConstraint::KeepImaginary,
                    AbsorptionArg::Real => AbsorptionConstraint::Real,
                },
                seed: 0,
            };
            let truth = truth.map(|t| read_image(&t)).transpose()?;
            let result = reconstruct_hologram(&h, &config, truth.as_ref())?;
            std::fs::create_dir_all(&out)?;
            write_image(run, &out.join("object.pgm"), &result.object.crop_center(h.geometry().n0)?, None)?;
            write_pattern(run, &out.join("recovered.f64"), &result.recovered_pattern, None)?;
            io::write_with_sidecar(&out.join("trace.csv"), result.traces[0].to_csv().as_bytes(), &run.sidecar(None))?;
            let last = result.traces[0].last().expect("at least one iteration");
            println!("eq9 {:e} eq10 {:e}", last.eq9, last.eq10);
            if let Some(e) = result.eq8 {
                println!("eq8 {e:e}");
            }
        }
        Command::Metrics { reconstruction, original, pattern, recovered } => {
            let a = read_image(&reconstruction)?;
            let b = read_image(&original)?;
            // Reconstructions are defined up to a shift and the twin.
            let eq8 = if a.side() == b.side() {
                error_rms(&align_to_reference(&a, &b)?, &b)?
            } else {
                aligned_object_error(&a, &b)?
            };
            println!("eq8 {eq8:e}");
            if let (Some(p), Some(r)) = (pattern, recovered) {
                let measured = read_pattern(&p, None)?;
                let retrieved = read_pattern(&r, Some(measured.geometry().n0))?;
                if retrieved.missing_count() != 0 {
                    return Err(Error::Domain("recovered pattern has missing samples".into()));
                }
                println!("eq9 {:e}", error_fienup(retrieved.amplitude(), &measured)?);
            }
        }
        Command::Bounds { modality, sigma, dimension, f, csv } => {
            let modality = match modality {
                ModalityArg::Cdi => Modality::Cdi,
                ModalityArg::Holography => Modality::Holography,
            };
            let report = FeasibilityReport::new(sigma, modality, dimension, f)?;
            if csv {
                println!("{}", FeasibilityReport::CSV_HEADER);
                println!("{}", report.csv_row());
            } else {
                println!("f_max {}", report.f_max);
                println!("{report}");
            }
        }
        Command::Sweep { config, out, workers } => {
            let text = std::fs::read_to_string(&config)?;
            let mut cfg = ExperimentConfig::parse(&text)?;
            if let Some(o) = out {
                cfg.output = o;
            }
            let result = phasefill::sweep::run_sweep(&cfg, workers)?;
            let written = phasefill::sweep::write_outputs(&cfg, &result, &cfg.output, &run.command)?;
            print!("{}", result.results_csv(&cfg.fractions));
            eprintln!("wrote {} files under {}", written.len(), cfg.output.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let command = args.join(" ");
    let hash = io::sha256_hex(command.as_bytes());
    match execute(cli.command, &Run { command, hash }) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 1 } else { 2 })
        }
    }
}
