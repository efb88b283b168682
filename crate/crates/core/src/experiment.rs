//! Monte-Carlo orchestration: link configuration, the per-realization
//! pipeline, parameter sweeps and CSV output.
//!
//! # Seeding
//!
//! Every realization draws its screens from ChaCha8 seeded with
//! `master_seed` on stream `(cn2_index << 40) | (group << 32) | realization`.
//! With paired screens (the default) `group` is 0, so every `l0` and AO
//! scenario of one `(cn2, realization)` sees the same atmosphere; otherwise
//! `group = 1 + scenario index`. Bootstrap resampling for cell
//! `(cn2_index, l0, scenario)` uses seed `master_seed ^ BOOTSTRAP_SALT` on a
//! cell-specific stream range. Any cell can therefore be rerun in isolation.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::ao::{correction, correction_mask, CorrectionKind};
use crate::error::{Error, Result};
use crate::grid::{make_grid, GridSpec};
use crate::modes::{apply_aperture, gaussian_beacon, lg_mode, ComplexField, ModeIndex};
use crate::propagation::{ChannelRealization, ScreenPlacement, SplitStep};
use crate::quantum::{
    accumulate_density_matrix, compute_amplitudes, concurrence, qber, RealizationAmplitudes,
    ReceiverBasis,
};
use crate::stats::{bloch_decomposition, bootstrap_error, concurrence_error};
use crate::turbulence::{fried_parameter, ScreenSynth, TurbulenceParams};

const BOOTSTRAP_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Full-scale weakest and strongest turbulence (m^-2/3).
pub const CN2_MIN: f64 = 1.4e-15;
pub const CN2_MAX: f64 = 1.5e-13;

/// `count` values spaced evenly in `log(Cn²)` between the endpoints.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..count)
                .map(|i| {
                    if i == 0 {
                        lo
                    } else if i == count - 1 {
                        hi
                    } else {
                        (a + (b - a) * i as f64 / (count - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// Grid 256², 8 Cn² values, 200 realizations, `l0 ∈ {1, 3, 5}`.
    Desk,
    /// Grid 512², 19 Cn² values, 1000 realizations, `l0 = 1..5`.
    Full,
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "full" => Ok(Profile::Full),
            other => Err(Error::Parse(format!("unknown profile `{other}`"))),
        }
    }
}

/// Full description of the simulated link and sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkConfig {
    pub wavelength: f64,
    pub path_length: f64,
    pub w0: f64,
    pub beacon_waist_factor: f64,
    pub aperture: f64,
    pub grid_n: usize,
    pub grid_width: f64,
    pub n_screens: usize,
    pub subharmonic_orders: u32,
    pub cn2_list: Vec<f64>,
    pub l0_list: Vec<i32>,
    pub scenarios: Vec<CorrectionKind>,
    pub realizations: usize,
    pub master_seed: u64,
    pub placement: ScreenPlacement,
    pub paired_screens: bool,
    pub edge_absorber: bool,
    pub bootstrap_resamples: usize,
}

impl Default for LinkConfig {
    fn default() -> Self {
        LinkConfig::profile(Profile::Full)
    }
}

impl LinkConfig {
    pub fn profile(profile: Profile) -> Self {
        let base = LinkConfig {
            wavelength: 1064e-9,
            path_length: 500.0,
            w0: 0.03,
            beacon_waist_factor: 2.45,
            aperture: 0.2,
            grid_n: 512,
            grid_width: 0.4,
            n_screens: 4,
            subharmonic_orders: 7,
            cn2_list: log_spaced(CN2_MIN, CN2_MAX, 19),
            l0_list: vec![1, 2, 3, 4, 5],
            scenarios: CorrectionKind::ALL.to_vec(),
            realizations: 1000,
            master_seed: 0,
            placement: ScreenPlacement::Symmetric,
            paired_screens: true,
            edge_absorber: false,
            bootstrap_resamples: 500,
        };
        match profile {
            Profile::Full => base,
            Profile::Desk => LinkConfig {
                grid_n: 256,
                cn2_list: log_spaced(CN2_MIN, CN2_MAX, 8),
                l0_list: vec![1, 3, 5],
                realizations: 200,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("wavelength", self.wavelength),
            ("path_length", self.path_length),
            ("w0", self.w0),
            ("beacon_waist_factor", self.beacon_waist_factor),
            ("aperture", self.aperture),
            ("grid_width", self.grid_width),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.n_screens == 0 {
            return Err(Error::Config("n_screens must be >= 1".into()));
        }
        if self.cn2_list.iter().any(|&c| !(c >= 0.0)) {
            return Err(Error::Config("cn2 values must be >= 0".into()));
        }
        if self.cn2_list.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Config("cn2_list must be sorted ascending".into()));
        }
        if self.l0_list.is_empty() || self.l0_list.contains(&0) {
            return Err(Error::Config("l0_list must be non-empty and exclude 0".into()));
        }
        if self.scenarios.is_empty() {
            return Err(Error::Config("scenarios must be non-empty".into()));
        }
        if self.realizations < 2 {
            return Err(Error::Config("realizations must be >= 2".into()));
        }
        make_grid(self.grid_n, self.grid_width)?;
        Ok(())
    }

    pub fn grid(&self) -> Result<GridSpec> {
        make_grid(self.grid_n, self.grid_width)
    }

    pub fn beacon_waist(&self) -> f64 {
        self.beacon_waist_factor * self.w0
    }

    pub fn turbulence(&self, cn2: f64) -> TurbulenceParams {
        TurbulenceParams {
            cn2,
            path_length: self.path_length,
            wavelength: self.wavelength,
            n_screens: self.n_screens,
            subharmonic_orders: self.subharmonic_orders,
        }
    }

    /// `w0 / r0`, zero without turbulence.
    pub fn w0_over_r0(&self, cn2: f64) -> f64 {
        match fried_parameter(cn2, self.wavelength, self.path_length) {
            Ok(r0) => self.w0 / r0,
            Err(_) => 0.0,
        }
    }

    /// Reads `key = value` lines on top of `self`. Blank lines and `#`
    /// comments are ignored; unknown keys are rejected.
    pub fn apply_text(mut self, text: &str) -> Result<Self> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(self)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        LinkConfig::default().apply_text(&text)
    }

    /// Sets one field from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Parse(format!("bad value `{v}` for `{key}`")))
        }
        fn list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
            v.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| num(key, s))
                .collect()
        }
        match key {
            "wavelength" => self.wavelength = num(key, value)?,
            "path_length" | "L" => self.path_length = num(key, value)?,
            "w0" => self.w0 = num(key, value)?,
            "beacon_waist_factor" => self.beacon_waist_factor = num(key, value)?,
            "aperture" => self.aperture = num(key, value)?,
            "grid_n" => self.grid_n = num(key, value)?,
            "grid_width" => self.grid_width = num(key, value)?,
            "n_screens" => self.n_screens = num(key, value)?,
            "subharmonic_orders" => self.subharmonic_orders = num(key, value)?,
            "cn2_list" => self.cn2_list = list(key, value)?,
            "l0_list" => self.l0_list = list(key, value)?,
            "scenarios" => self.scenarios = list(key, value)?,
            "realizations" => self.realizations = num(key, value)?,
            "master_seed" => self.master_seed = num(key, value)?,
            "placement" => {
                self.placement = match value {
                    "symmetric" => ScreenPlacement::Symmetric,
                    "end" => ScreenPlacement::End,
                    other => return Err(Error::Parse(format!("unknown placement `{other}`"))),
                }
            }
            "paired_screens" => self.paired_screens = num(key, value)?,
            "edge_absorber" => self.edge_absorber = num(key, value)?,
            "bootstrap_resamples" => self.bootstrap_resamples = num(key, value)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }
}

/// Identifies an independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamId {
    pub seed: u64,
    pub stream: u64,
}

impl StreamId {
    pub fn new(seed: u64, stream: u64) -> Self {
        StreamId { seed, stream }
    }

    /// Stream of realization `realization` at sweep position `cn2_index`.
    pub fn realization(seed: u64, cn2_index: usize, group: u64, realization: usize) -> Self {
        StreamId {
            seed,
            stream: ((cn2_index as u64) << 40) | (group << 32) | realization as u64,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Everything about the link that does not depend on the realization:
/// grid, split-step kernels, transmitted fields and receiver bases.
#[derive(Debug, Clone)]
pub struct Link {
    pub config: LinkConfig,
    pub grid: GridSpec,
    split_step: SplitStep,
    screens: ScreenSynth,
    beacon: ComplexField,
    inputs: Vec<(i32, ComplexField, ComplexField, ReceiverBasis)>,
}

impl Link {
    pub fn new(config: &LinkConfig) -> Result<Self> {
        config.validate()?;
        let grid = config.grid()?;
        let slab = config.path_length / config.n_screens as f64;
        let split_step = SplitStep::new(&grid, config.wavelength, slab, config.placement)
            .with_edge_absorber(config.edge_absorber);
        let screens = ScreenSynth::new(&grid);
        let beacon = gaussian_beacon(&grid, config.beacon_waist(), config.wavelength)?;
        let mut inputs = Vec::new();
        for &l0 in &config.l0_list {
            let l0 = l0.abs();
            let minus = lg_mode(&grid, ModeIndex::oam(-l0), config.w0, config.wavelength, 0.0)?;
            let plus = lg_mode(&grid, ModeIndex::oam(l0), config.w0, config.wavelength, 0.0)?;
            let basis =
                ReceiverBasis::new(&grid, l0, config.w0, config.wavelength, config.path_length)?;
            inputs.push((l0, minus, plus, basis));
        }
        Ok(Link {
            config: config.clone(),
            grid,
            split_step,
            screens,
            beacon,
            inputs,
        })
    }

    /// Draws the screens of one realization.
    pub fn channel(&self, cn2: f64, id: StreamId) -> Result<ChannelRealization> {
        let params = self.config.turbulence(cn2);
        let mut rng = id.rng();
        let screens = (0..self.config.n_screens)
            .map(|slab| self.screens.phase_screen(&params, slab, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(ChannelRealization::new(screens, self.config.path_length)?
            .with_placement(self.config.placement))
    }

    fn receive(&self, f: &ComplexField, ch: &ChannelRealization) -> Result<ComplexField> {
        let out = self.split_step.run(f.clone(), ch)?;
        Ok(apply_aperture(out, self.config.aperture))
    }

    /// Amplitudes for every configured `l0` (outer) and scenario (inner)
    /// over one channel realization.
    pub fn amplitudes(
        &self,
        ch: &ChannelRealization,
        scenarios: &[CorrectionKind],
    ) -> Result<Vec<Vec<RealizationAmplitudes>>> {
        let beacon_rx = self.receive(&self.beacon, ch)?;
        let masks = scenarios
            .iter()
            .map(|&k| correction(k, &beacon_rx).map(|c| correction_mask(&c)))
            .collect::<Result<Vec<_>>>()?;
        self.inputs
            .iter()
            .map(|(_, minus, plus, basis)| {
                let psi_minus = self.receive(minus, ch)?;
                let psi_plus = self.receive(plus, ch)?;
                masks
                    .iter()
                    .map(|mask| match mask {
                        None => compute_amplitudes(&psi_minus, &psi_plus, basis),
                        Some(m) => compute_amplitudes(
                            &psi_minus.masked(m),
                            &psi_plus.masked(m),
                            basis,
                        ),
                    })
                    .collect()
            })
            .collect()
    }

    fn l0_position(&self, l0: i32) -> Result<usize> {
        self.inputs
            .iter()
            .position(|(l, ..)| *l == l0.abs())
            .ok_or_else(|| Error::InvalidParameter(format!("l0 = {l0} not in the link's l0_list")))
    }
}

/// One realization of the full pipeline: screens, propagation of
/// `LG_{0,∓l0}` and the beacon, aperture, AO correction, projection.
pub fn run_realization(
    cfg: &LinkConfig,
    cn2: f64,
    l0: i32,
    scenario: CorrectionKind,
    id: StreamId,
) -> Result<RealizationAmplitudes> {
    let cfg = LinkConfig {
        l0_list: vec![l0],
        ..cfg.clone()
    };
    let link = Link::new(&cfg)?;
    run_realization_on(&link, cn2, l0, scenario, id)
}

/// As [`run_realization`], reusing a prepared [`Link`].
pub fn run_realization_on(
    link: &Link,
    cn2: f64,
    l0: i32,
    scenario: CorrectionKind,
    id: StreamId,
) -> Result<RealizationAmplitudes> {
    let pos = link.l0_position(l0)?;
    let ch = link.channel(cn2, id)?;
    Ok(link.amplitudes(&ch, &[scenario])?[pos][0])
}

/// One output line of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResultRow {
    pub cn2: f64,
    pub w0_over_r0: f64,
    pub l0: i32,
    pub scenario: CorrectionKind,
    pub concurrence: f64,
    pub concurrence_err: f64,
    pub trace: f64,
    pub trace_err: f64,
    pub qber: f64,
    pub qber_err: f64,
    pub realizations: usize,
    pub seed: u64,
    /// Bootstrap estimate of the concurrence error, for comparison.
    pub concurrence_err_bootstrap: f64,
    /// `concurrence_err` is a one-sided bound (`C = 0`).
    pub concurrence_err_one_sided: bool,
    /// Eigenvalues skipped in the error propagation.
    pub excluded_eigenvalues: usize,
    /// Aggregation failure; the metrics are NaN when set.
    pub error: Option<String>,
}

impl SweepResultRow {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

/// Result of a sweep: the rows plus, on request, every cell's ensemble.
#[derive(Debug, Clone, Default)]
pub struct SweepOutput {
    pub rows: Vec<SweepResultRow>,
    /// Per-row ensembles in row order (empty unless requested).
    pub ensembles: Vec<Vec<RealizationAmplitudes>>,
}

/// Reduces one cell's ensemble to a result row.
pub fn aggregate_cell(
    cfg: &LinkConfig,
    cn2: f64,
    l0: i32,
    scenario: CorrectionKind,
    ensemble: &[RealizationAmplitudes],
    bootstrap_seed: StreamId,
) -> SweepResultRow {
    let mut row = SweepResultRow {
        cn2,
        w0_over_r0: cfg.w0_over_r0(cn2),
        l0,
        scenario,
        concurrence: f64::NAN,
        concurrence_err: f64::NAN,
        trace: f64::NAN,
        trace_err: f64::NAN,
        qber: f64::NAN,
        qber_err: f64::NAN,
        realizations: ensemble.len(),
        seed: cfg.master_seed,
        concurrence_err_bootstrap: f64::NAN,
        concurrence_err_one_sided: false,
        excluded_eigenvalues: 0,
        error: None,
    };
    let result = (|| -> Result<()> {
        let rho = accumulate_density_matrix(ensemble)?;
        row.concurrence = concurrence(&rho)?;
        row.trace = rho.trace_raw;
        row.qber = qber(ensemble)?;
        let ce = concurrence_error(&bloch_decomposition(ensemble)?)?;
        row.concurrence_err = ce.value;
        row.concurrence_err_one_sided = ce.one_sided;
        row.excluded_eigenvalues = ce.excluded;
        if cfg.bootstrap_resamples > 0 {
            // bootstrap streams are contiguous per cell: seed plus offset
            let bs = bootstrap_error(
                ensemble,
                cfg.bootstrap_resamples,
                bootstrap_seed.seed.wrapping_add(bootstrap_seed.stream),
            )?;
            row.concurrence_err_bootstrap = bs.concurrence;
            row.trace_err = bs.trace;
            row.qber_err = bs.qber;
        }
        Ok(())
    })();
    if let Err(e) = result {
        row.error = Some(e.to_string());
    }
    row
}

/// Runs every `(cn2, l0, scenario)` cell on the current rayon pool.
///
/// Rows are ordered by `cn2`, then `l0`, then scenario, following the
/// configuration lists.
pub fn run_sweep(cfg: &LinkConfig) -> Result<Vec<SweepResultRow>> {
    Ok(run_sweep_detailed(cfg, false)?.rows)
}

/// As [`run_sweep`], optionally keeping the ensembles.
pub fn run_sweep_detailed(cfg: &LinkConfig, keep_ensembles: bool) -> Result<SweepOutput> {
    let link = Link::new(cfg)?;
    let mut out = SweepOutput::default();
    let n_l0 = cfg.l0_list.len();
    let n_sc = cfg.scenarios.len();
    for (ci, &cn2) in cfg.cn2_list.iter().enumerate() {
        // per realization: [l0][scenario]
        let per_realization: Vec<Vec<Vec<RealizationAmplitudes>>> = (0..cfg.realizations)
            .into_par_iter()
            .map(|r| -> Result<Vec<Vec<RealizationAmplitudes>>> {
                if cfg.paired_screens {
                    let ch = link.channel(cn2, StreamId::realization(cfg.master_seed, ci, 0, r))?;
                    link.amplitudes(&ch, &cfg.scenarios)
                } else {
                    let mut by_l0 = vec![Vec::with_capacity(n_sc); n_l0];
                    for (si, &sc) in cfg.scenarios.iter().enumerate() {
                        let id = StreamId::realization(cfg.master_seed, ci, 1 + si as u64, r);
                        let ch = link.channel(cn2, id)?;
                        for (li, amps) in link.amplitudes(&ch, &[sc])?.into_iter().enumerate() {
                            by_l0[li].push(amps[0]);
                        }
                    }
                    Ok(by_l0)
                }
            })
            .collect::<Result<_>>()?;

        for (li, &l0) in cfg.l0_list.iter().enumerate() {
            for (si, &sc) in cfg.scenarios.iter().enumerate() {
                let ensemble: Vec<RealizationAmplitudes> =
                    per_realization.iter().map(|r| r[li][si]).collect();
                let cell = ((ci * n_l0 + li) * n_sc + si) as u64;
                let bs = StreamId::new(cfg.master_seed ^ BOOTSTRAP_SALT, cell << 32);
                out.rows.push(aggregate_cell(cfg, cn2, l0.abs(), sc, &ensemble, bs));
                if keep_ensembles {
                    out.ensembles.push(ensemble);
                }
            }
        }
    }
    Ok(out)
}

/// Runs a sweep on a dedicated pool of `workers` threads.
pub fn run_sweep_with_workers(
    cfg: &LinkConfig,
    workers: usize,
    keep_ensembles: bool,
) -> Result<SweepOutput> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    pool.install(|| run_sweep_detailed(cfg, keep_ensembles))
}

pub const CSV_HEADER: [&str; 12] = [
    "cn2",
    "w0_over_r0",
    "l0",
    "scenario",
    "C",
    "dC",
    "N",
    "dN",
    "R",
    "dR",
    "realizations",
    "seed",
];

fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV text: header, then one line per row in the column order of
/// [`CSV_HEADER`]. Floats carry 17 significant digits.
pub fn csv_string(rows: &[SweepResultRow]) -> String {
    let mut s = CSV_HEADER.join(",");
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            fmt_float(r.cn2),
            fmt_float(r.w0_over_r0),
            r.l0,
            r.scenario,
            fmt_float(r.concurrence),
            fmt_float(r.concurrence_err),
            fmt_float(r.trace),
            fmt_float(r.trace_err),
            fmt_float(r.qber),
            fmt_float(r.qber_err),
            r.realizations,
            r.seed
        );
    }
    s
}

pub fn write_csv<W: Write>(rows: &[SweepResultRow], mut w: W) -> Result<()> {
    w.write_all(csv_string(rows).as_bytes())?;
    Ok(())
}

pub fn emit_csv(rows: &[SweepResultRow], path: &Path) -> Result<()> {
    std::fs::write(path, csv_string(rows))?;
    Ok(())
}

/// Parses a sweep CSV back into rows (diagnostic fields left empty).
pub fn parse_csv<R: BufRead>(reader: R) -> Result<Vec<SweepResultRow>> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("missing header".into()))??;
    if header.trim() != CSV_HEADER.join(",") {
        return Err(Error::Parse(format!("unexpected header `{header}`")));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != CSV_HEADER.len() {
            return Err(Error::Parse(format!(
                "row {}: expected {} columns, got {}",
                i + 1,
                CSV_HEADER.len(),
                cols.len()
            )));
        }
        let f = |j: usize| -> Result<f64> {
            cols[j]
                .parse()
                .map_err(|_| Error::Parse(format!("row {}: bad number `{}`", i + 1, cols[j])))
        };
        let int = |j: usize| -> Result<u64> {
            cols[j]
                .parse()
                .map_err(|_| Error::Parse(format!("row {}: bad integer `{}`", i + 1, cols[j])))
        };
        rows.push(SweepResultRow {
            cn2: f(0)?,
            w0_over_r0: f(1)?,
            l0: cols[2]
                .parse()
                .map_err(|_| Error::Parse(format!("row {}: bad l0", i + 1)))?,
            scenario: cols[3].parse()?,
            concurrence: f(4)?,
            concurrence_err: f(5)?,
            trace: f(6)?,
            trace_err: f(7)?,
            qber: f(8)?,
            qber_err: f(9)?,
            realizations: int(10)? as usize,
            seed: int(11)?,
            concurrence_err_bootstrap: f64::NAN,
            concurrence_err_one_sided: false,
            excluded_eigenvalues: 0,
            error: None,
        });
    }
    Ok(rows)
}
