//! Image + seeds in, binary mask out.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::curvature::{effective_edges, CurvatureParams, DEFAULT_BETA, DEFAULT_EXPONENT};
use crate::energy::{add_seeds, build_energy, seed_penalty, AttractionMode, QpbEnergy, SolveParams, DEFAULT_LAMBDA};
use crate::error::{Error, Result};
use crate::lattice::{save_mask_png, GrayImage, Mask, SeedLabel, SeedMask};
use crate::qpbo::{minimize, quantize, FillPolicy, SolverOptions, DEFAULT_MAX_ROUNDS, DEFAULT_SCALE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentationParams {
    pub p: f64,
    pub beta: f64,
    pub lambda: f64,
    pub mode: AttractionMode,
    /// `None` picks the smallest safe penalty automatically.
    pub seed_penalty: Option<f64>,
    pub probing: bool,
    pub fallback: FillPolicy,
    pub max_rounds: usize,
    pub scale: i64,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        SegmentationParams {
            p: DEFAULT_EXPONENT,
            beta: DEFAULT_BETA,
            lambda: DEFAULT_LAMBDA,
            mode: AttractionMode::default(),
            seed_penalty: None,
            probing: true,
            fallback: FillPolicy::default(),
            max_rounds: DEFAULT_MAX_ROUNDS,
            scale: DEFAULT_SCALE,
        }
    }
}

impl SegmentationParams {
    pub fn curvature(&self) -> CurvatureParams {
        CurvatureParams {
            p: self.p,
            beta: self.beta,
        }
    }

    pub fn solve(&self) -> SolveParams {
        SolveParams {
            lambda: self.lambda,
            mode: self.mode,
            seed_penalty: self.seed_penalty,
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            probing: self.probing,
            max_rounds: self.max_rounds,
            fallback: self.fallback,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.curvature().validate()?;
        self.solve().validate()?;
        if !(1..=1_000_000_000_000).contains(&self.scale) {
            return Err(Error::InvalidParameter(format!(
                "scale must be in [1, 1e12], got {}",
                self.scale
            )));
        }
        Ok(())
    }

    /// Single-line `key=value` rendering.
    pub fn to_kv(&self) -> String {
        let k = match self.seed_penalty {
            Some(k) => k.to_string(),
            None => "auto".to_string(),
        };
        format!(
            "p={} beta={} lambda={} mode={} seed_penalty={} probing={} fallback={} max_rounds={} scale={}",
            self.p, self.beta, self.lambda, self.mode, k, self.probing, self.fallback, self.max_rounds, self.scale
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentationReport {
    /// Assembled energy (curvature, attraction and seed terms) of the mask.
    pub energy: f64,
    pub lower_bound: f64,
    /// Variables left unlabeled by roof duality and probing, before the
    /// fallback filled them in.
    pub unlabeled_count: usize,
    pub fallback_used: bool,
    pub probes_run: usize,
    pub seed_penalty: f64,
    pub runtime_ms: f64,
}

#[derive(Debug, Clone)]
pub struct SegmentationResult {
    pub mask: Mask,
    pub report: SegmentationReport,
    pub params: SegmentationParams,
}

impl SegmentationResult {
    /// Single-line `key=value` rendering of report and parameters.
    pub fn summary(&self) -> String {
        let r = &self.report;
        format!(
            "energy={} lower_bound={} unlabeled_count={} fallback_used={} probes_run={} runtime_ms={:.3} {}",
            r.energy,
            r.lower_bound,
            r.unlabeled_count,
            r.fallback_used,
            r.probes_run,
            r.runtime_ms,
            self.params.to_kv()
        )
    }
}

/// Seeded energy for `image`, plus the seed penalty that was used.
pub fn assemble_energy(
    image: &GrayImage,
    seeds: &SeedMask,
    params: &SegmentationParams,
) -> Result<(QpbEnergy, f64)> {
    params.validate()?;
    seeds.check_dims(image.width(), image.height())?;
    if seeds.count(SeedLabel::Foreground) == 0 || seeds.count(SeedLabel::Background) == 0 {
        return Err(Error::MissingSeedClass);
    }
    let edges = effective_edges(image, &params.curvature());
    let energy = build_energy(&edges, image.lattice().len(), params.lambda, params.mode)?;
    let k = params.seed_penalty.unwrap_or_else(|| seed_penalty(&energy));
    Ok((add_seeds(&energy, seeds, k)?, k))
}

pub fn segment(
    image: &GrayImage,
    seeds: &SeedMask,
    params: &SegmentationParams,
) -> Result<SegmentationResult> {
    let start = Instant::now();
    let (energy, k) = assemble_energy(image, seeds, params)?;
    let int = quantize(&energy, params.scale)?;
    let solve = minimize(&int, &params.solver_options());

    for (i, (&x, &seed)) in solve.completed.iter().zip(seeds.labels()).enumerate() {
        let violated = match seed {
            SeedLabel::Foreground => !x,
            SeedLabel::Background => x,
            SeedLabel::None => false,
        };
        if violated {
            return Err(Error::Internal(format!(
                "seed at pixel {i} violated by the solution"
            )));
        }
    }

    let mask = Mask::from_fn(image.width(), image.height(), |row, col| {
        solve.completed[row * image.width() + col]
    });
    let report = SegmentationReport {
        energy: energy.evaluate_bits(&solve.completed),
        lower_bound: solve.lower_bound_x2 as f64 / (2.0 * params.scale as f64),
        unlabeled_count: solve.unlabeled_count(),
        fallback_used: solve.unlabeled_count() > 0,
        probes_run: solve.probes_run,
        seed_penalty: k,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    Ok(SegmentationResult {
        mask,
        report,
        params: *params,
    })
}

/// Text record written next to the mask by [`save_result`]. Holds no timing,
/// so identical inputs give identical files.
pub fn report_text(r: &SegmentationResult) -> String {
    let mut s = String::new();
    let rep = &r.report;
    let _ = writeln!(s, "energy {}", rep.energy);
    let _ = writeln!(s, "lower_bound {}", rep.lower_bound);
    let _ = writeln!(s, "unlabeled_count {}", rep.unlabeled_count);
    let _ = writeln!(s, "fallback_used {}", rep.fallback_used);
    let _ = writeln!(s, "probes_run {}", rep.probes_run);
    let _ = writeln!(s, "seed_penalty {}", rep.seed_penalty);
    let _ = writeln!(s, "params {}", r.params.to_kv());
    s
}

/// Writes the mask to `path` (8-bit PNG, 0/255) and the report to the same
/// path with a `.txt` extension. Returns the report path.
pub fn save_result(r: &SegmentationResult, path: impl AsRef<Path>) -> Result<std::path::PathBuf> {
    let path = path.as_ref();
    save_mask_png(&r.mask, path)?;
    let report = path.with_extension("txt");
    std::fs::write(&report, report_text(r)).map_err(|source| Error::Write {
        path: report.clone(),
        source,
    })?;
    Ok(report)
}
