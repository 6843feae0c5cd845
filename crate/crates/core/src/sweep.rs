//! Deterministic experiment sweeps over missing fractions and seeds.
//!
//! Each `(f, seed)` cell is independent and reproducible from the config
//! alone. Cells run on a bounded rayon pool; output files are assembled
//! afterwards in config order, so their bytes do not depend on the worker
//! count.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::cdi::{inverse_transform_baseline, retrieve, RestartSummary, SupportSpec};
use crate::config::{ExperimentConfig, ObjectSource, Scenario};
use crate::degrade::{apply_central_mask, apply_random_mask, symmetrize};
use crate::error::{Error, Result};
use crate::field::RealImage;
use crate::forward::{embed_object, far_field, make_exit_wave, simulate_diffraction, simulate_hologram};
use crate::holo::{absorption, initial_transmission, reconstruct_hologram};
use crate::io::{encode_pgm16, write_with_sidecar, Sidecar};
use crate::metrics::{error_rms, ErrorTrace};
use crate::objects::stick_figure;
use crate::pattern::MeasuredPattern;

/// Outcome of one `(f, seed)` cell.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub fraction: f64,
    pub seed: u64,
    pub realized_fraction: f64,
    /// Object error of the single non-iterative reconstruction.
    pub baseline_eq8: f64,
    pub iterative_eq8: f64,
    /// Cropped `N₀×N₀` reconstructions.
    pub baseline: RealImage,
    pub reconstruction: RealImage,
    pub restarts: Vec<RestartSummary>,
    pub selected: Vec<usize>,
    pub traces: Vec<ErrorTrace>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    /// Row-major over `fractions × seeds`, in config order.
    pub cells: Vec<CellResult>,
    pub rho: f64,
}

pub fn load_object(config: &ExperimentConfig) -> Result<RealImage> {
    let object = match &config.object {
        ObjectSource::Synthetic => stick_figure(config.object_side),
        ObjectSource::File(p) => crate::io::read_pgm(p)?,
    };
    if object.side() != config.object_side {
        return Err(Error::Config(format!(
            "object is {0}x{0}, config declares object_side {1}",
            object.side(),
            config.object_side
        )));
    }
    Ok(object)
}

fn degrade(config: &ExperimentConfig, pattern: &MeasuredPattern, f: f64, seed: u64) -> Result<MeasuredPattern> {
    match config.scenario {
        Scenario::CdiRandom | Scenario::HoloRandom => apply_random_mask(pattern, f, seed),
        Scenario::CdiCentral => apply_central_mask(pattern, f),
        Scenario::CdiSymmetrized => symmetrize(&apply_random_mask(pattern, f, seed)?),
    }
}

/// Runs a single cell. Restarts inside the cell use the current rayon pool.
pub fn run_cell(config: &ExperimentConfig, object: &RealImage, f: f64, seed: u64) -> Result<CellResult> {
    let n = config.grid_side()?;
    let n0 = config.object_side;
    if config.scenario.is_holographic() {
        let holo = config.holo.holo(n, n0, seed)?;
        let (padded, _) = embed_object(object, n)?;
        let exit = make_exit_wave(&padded)?;
        let measured = degrade(config, &simulate_hologram(&exit, &holo.params, n0)?, f, seed)?;
        let baseline = absorption(&initial_transmission(&measured, &holo.params)?).crop_center(n0)?;
        let result = reconstruct_hologram(&measured, &holo, Some(object))?;
        return Ok(CellResult {
            fraction: f,
            seed,
            realized_fraction: measured.missing_fraction(),
            baseline_eq8: error_rms(&baseline, object)?,
            iterative_eq8: result.eq8.expect("ground truth supplied"),
            baseline,
            reconstruction: result.object.crop_center(n0)?,
            restarts: result.restarts,
            selected: result.selected,
            traces: result.traces,
        });
    }

    let (padded, geometry) = embed_object(object, n)?;
    let full = simulate_diffraction(&padded, geometry, config.envelope)?;
    let measured = degrade(config, &full, f, seed)?;
    let baseline = inverse_transform_baseline(&far_field(&padded, config.envelope)?, measured.mask())?
        .crop_center(n0)?;
    let result = retrieve(&measured, &SupportSpec::new(n0), &config.cdi.hio(seed), Some(object))?;
    Ok(CellResult {
        fraction: f,
        seed,
        realized_fraction: measured.missing_fraction(),
        baseline_eq8: error_rms(&baseline, object)?,
        iterative_eq8: result.eq8.expect("ground truth supplied"),
        baseline,
        reconstruction: result.object.crop_center(n0)?,
        restarts: result.restarts,
        selected: result.selected,
        traces: result.traces,
    })
}

/// Runs every cell on a pool of `workers` threads.
pub fn run_sweep(config: &ExperimentConfig, workers: usize) -> Result<SweepResult> {
    config.validate()?;
    if workers == 0 {
        return Err(Error::Config("worker count must be at least 1".into()));
    }
    let object = load_object(config)?;
    let jobs: Vec<(f64, u64)> = config
        .fractions
        .iter()
        .flat_map(|&f| config.seeds.iter().map(move |&s| (f, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let cells = pool.install(|| {
        jobs.par_iter()
            .map(|&(f, s)| run_cell(config, &object, f, s))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(SweepResult { cells, rho: object.rms() })
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    sum / count as f64
}

impl SweepResult {
    fn by_fraction<'a>(&'a self, fractions: &'a [f64]) -> impl Iterator<Item = (f64, Vec<&'a CellResult>)> + 'a {
        fractions.iter().map(move |&f| {
            (f, self.cells.iter().filter(|c| c.fraction == f).collect())
        })
    }

    /// Two-row table, methods by missing fraction; each entry is the mean
    /// over seeds.
    pub fn results_csv(&self, fractions: &[f64]) -> String {
        let mut s = String::from("method");
        for f in fractions {
            write!(s, ",f={f}").expect("write to string");
        }
        s.push('\n');
        if fractions.is_empty() {
            return s;
        }
        for (label, pick) in [
            ("inverse-ft", (|c: &CellResult| c.baseline_eq8) as fn(&CellResult) -> f64),
            ("iterative", |c: &CellResult| c.iterative_eq8),
        ] {
            s.push_str(label);
            for (_, cells) in self.by_fraction(fractions) {
                write!(s, ",{:e}", mean(cells.iter().map(|c| pick(c)))).expect("write to string");
            }
            s.push('\n');
        }
        s
    }

    pub fn cells_csv(&self) -> String {
        let mut s = String::from("f,seed,f_realized,inverse_ft_eq8,iterative_eq8,directory\n");
        for c in &self.cells {
            writeln!(
                s,
                "{},{},{:e},{:e},{:e},{}",
                c.fraction,
                c.seed,
                c.realized_fraction,
                c.baseline_eq8,
                c.iterative_eq8,
                cell_dir_name(c.fraction, c.seed)
            )
            .expect("write to string");
        }
        s
    }

    /// Every restart of every cell, for metric-ranking studies.
    pub fn restarts_csv(&self) -> String {
        let mut s = String::from("f,seed,restart,eq8,eq9,eq10,selected\n");
        for c in &self.cells {
            for r in &c.restarts {
                let eq8 = r.eq8.map(|v| format!("{v:e}")).unwrap_or_default();
                writeln!(
                    s,
                    "{},{},{},{},{:e},{:e},{}",
                    c.fraction,
                    c.seed,
                    r.index,
                    eq8,
                    r.eq9,
                    r.eq10,
                    u8::from(c.selected.contains(&r.index))
                )
                .expect("write to string");
            }
        }
        s
    }

    /// Tiles the cropped reconstructions: one column per fraction, two rows
    /// (baseline, iterative) per seed, separated by one-pixel gaps.
    pub fn image_grid(&self, fractions: &[f64], seeds: &[u64]) -> Option<RealImage> {
        let n0 = self.cells.first()?.reconstruction.side();
        let cols = fractions.len();
        let rows = 2 * seeds.len();
        let side = (n0 + 1) * cols.max(rows) - 1;
        let mut data = vec![0.0; side * side];
        for (ci, &f) in fractions.iter().enumerate() {
            for (si, &seed) in seeds.iter().enumerate() {
                let cell = self.cells.iter().find(|c| c.fraction == f && c.seed == seed)?;
                for (k, img) in [&cell.baseline, &cell.reconstruction].into_iter().enumerate() {
                    let (r0, c0) = ((2 * si + k) * (n0 + 1), ci * (n0 + 1));
                    for r in 0..n0 {
                        for c in 0..n0 {
                            data[(r0 + r) * side + c0 + c] = img.get(r, c);
                        }
                    }
                }
            }
        }
        RealImage::new(side, data).ok()
    }
}

pub fn cell_dir_name(f: f64, seed: u64) -> String {
    format!("f{f}_seed{seed}")
}

/// Writes all sweep outputs below `out`. Returns the paths written, in order.
pub fn write_outputs(
    config: &ExperimentConfig,
    result: &SweepResult,
    out: &Path,
    command: &str,
) -> Result<Vec<PathBuf>> {
    let hash = config.hash();
    let seed = (config.seeds.len() == 1).then(|| config.seeds[0]);
    let prov = |seed: Option<u64>| {
        let mut s = Sidecar::provenance(command, &hash, seed);
        s.set("scenario", config.scenario.name());
        s
    };
    let mut written = Vec::new();
    fs::create_dir_all(out)?;
    let mut put = |path: PathBuf, bytes: &[u8], sidecar: &Sidecar| -> Result<()> {
        write_with_sidecar(&path, bytes, sidecar)?;
        written.push(path);
        Ok(())
    };

    put(out.join("config.txt"), config.serialize().as_bytes(), &prov(seed))?;
    put(out.join("results.csv"), result.results_csv(&config.fractions).as_bytes(), &prov(seed))?;
    put(out.join("cells.csv"), result.cells_csv().as_bytes(), &prov(seed))?;
    put(out.join("restarts.csv"), result.restarts_csv().as_bytes(), &prov(seed))?;
    if let Some(grid) = result.image_grid(&config.fractions, &config.seeds) {
        let (bytes, scale) = encode_pgm16(&grid);
        let mut s = prov(seed);
        s.set("scale", format!("{scale:e}"));
        put(out.join("grid.pgm"), &bytes, &s)?;
    }
    for cell in &result.cells {
        let dir = out.join("cells").join(cell_dir_name(cell.fraction, cell.seed));
        fs::create_dir_all(&dir)?;
        let mut s = prov(Some(cell.seed));
        s.set("f", cell.fraction);
        for (k, trace) in cell.traces.iter().enumerate() {
            put(dir.join(format!("trace_{k:03}.csv")), trace.to_csv().as_bytes(), &s)?;
        }
        let (bytes, scale) = encode_pgm16(&cell.reconstruction);
        let mut s = s.clone();
        s.set("scale", format!("{scale:e}"));
        put(dir.join("object.pgm"), &bytes, &s)?;
    }
    Ok(written)
}
