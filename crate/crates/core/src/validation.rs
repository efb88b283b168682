//! Self-checks of the simulator: screen statistics against the Kolmogorov
//! structure-function law, and vacuum propagation against analytic modes.

use rayon::prelude::*;

use crate::ao::CorrectionKind;
use crate::error::{Error, Result};
use crate::experiment::{run_sweep_detailed, LinkConfig, StreamId};
use crate::grid::GridSpec;
use crate::modes::{inner_product, lg_mode, ModeIndex};
use crate::propagation::fresnel_propagate;
use crate::turbulence::{
    kolmogorov_structure, screen_structure, separation_lags, summarize_structure, PhaseScreen,
    ScreenSynth,
};

/// Measured versus theoretical structure function at one separation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructureCheck {
    pub separation: f64,
    pub measured: f64,
    pub std_error: f64,
    pub theory: f64,
}

impl StructureCheck {
    pub fn ratio(&self) -> f64 {
        self.measured / self.theory
    }
}

/// Generates `count` screens on independent streams of `seed`.
pub fn screen_ensemble(
    grid: &GridSpec,
    r0: f64,
    orders: u32,
    count: usize,
    seed: u64,
) -> Vec<PhaseScreen> {
    let synth = ScreenSynth::new(grid);
    (0..count)
        .into_par_iter()
        .map(|i| synth.generate(r0, orders, &mut StreamId::new(seed, i as u64).rng()))
        .collect()
}

/// Ensemble structure function of freshly generated screens. Screens are
/// reduced as they are drawn, so memory does not grow with `count`.
pub fn screen_statistics(
    grid: &GridSpec,
    r0: f64,
    orders: u32,
    count: usize,
    seed: u64,
    separations: &[f64],
) -> Result<Vec<StructureCheck>> {
    if count == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let lags = separation_lags(grid, separations)?;
    let synth = ScreenSynth::new(grid);
    let per_screen: Vec<Vec<(f64, f64)>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let s = synth.generate(r0, orders, &mut StreamId::new(seed, i as u64).rng());
            screen_structure(&s, &lags)
        })
        .collect();
    Ok(summarize_structure(grid, &lags, &per_screen)
        .into_iter()
        .map(|p| StructureCheck {
            separation: p.separation,
            measured: p.value,
            std_error: p.std_error,
            theory: kolmogorov_structure(p.separation, r0),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct VacuumReport {
    /// `(l, |⟨propagated, analytic⟩|²)` for `LG_{0,l}`.
    pub mode_overlaps: Vec<(i32, f64)>,
    /// `(l0, scenario, C, N, R)` of a turbulence-free end-to-end run.
    pub end_to_end: Vec<(i32, CorrectionKind, f64, f64, f64)>,
}

/// Propagates `LG_{0,l}` for `l` in `ls` through vacuum and runs the full
/// pipeline with `Cn² = 0`.
pub fn vacuum_suite(cfg: &LinkConfig, ls: &[i32]) -> Result<VacuumReport> {
    let grid = cfg.grid()?;
    let mut mode_overlaps = Vec::new();
    for &l in ls {
        let m = ModeIndex::oam(l);
        let f = lg_mode(&grid, m, cfg.w0, cfg.wavelength, 0.0)?;
        let out = fresnel_propagate(&f, cfg.path_length)?;
        let analytic = lg_mode(&grid, m, cfg.w0, cfg.wavelength, cfg.path_length)?;
        mode_overlaps.push((l, inner_product(&out, &analytic)?.norm_sqr()));
    }
    let free = LinkConfig {
        cn2_list: vec![0.0],
        realizations: 2,
        bootstrap_resamples: 0,
        ..cfg.clone()
    };
    let end_to_end = run_sweep_detailed(&free, false)?
        .rows
        .into_iter()
        .map(|r| (r.l0, r.scenario, r.concurrence, r.trace, r.qber))
        .collect();
    Ok(VacuumReport {
        mode_overlaps,
        end_to_end,
    })
}
