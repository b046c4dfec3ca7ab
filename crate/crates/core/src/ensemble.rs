//! Batched stepping of many independent paths.
//!
//! A batch of `B` paths is stored as a `B × N` coefficient matrix, so both
//! transforms become matrix products against the sine tables. Samples are
//! partitioned into batches by index alone; the worker count only decides
//! how many batches run at once, never which paths share a batch, so
//! results do not depend on it.

use std::ops::Range;

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, ArrayView1, Axis, Zip};
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::integrator::{fine_ratio, BlowUpInfo, Checkpoints, SchemeConfig, TrajectoryRecord, BLOW_UP_THRESHOLD};
use crate::model::{TamedNonlinearity, TamingKernel};
use crate::noise::{increment_scales, NoiseStream, NormalReader};
use crate::spectral::SpectralBasis;

/// Paths per batch.
pub const BATCH_SIZE: usize = 32;

/// Scheme steps for a batch of paths at one stepsize.
///
/// For even `K` the nodes pair up as `x_i ↔ x_{K+1−i}`, where odd modes are
/// symmetric and even modes antisymmetric. Each transform then splits into
/// two half-size products, and the grid is held folded: column `k < K/2` is
/// node `k+1`, column `K/2 + k` is node `K − k`.
#[derive(Debug, Clone)]
pub struct BatchStepper<'a> {
    basis: &'a SpectralBasis,
    kernel: TamingKernel,
    decay: Vec<f64>,
    tau: f64,
    folded: Option<Folded>,
    grid: Array2<f64>,
    work: Array2<f64>,
    drift: Array2<f64>,
}

#[derive(Debug, Clone)]
struct Folded {
    /// Odd modes on the left half of the nodes, and its transpose.
    odd: Array2<f64>,
    odd_t: Array2<f64>,
    even: Array2<f64>,
    even_t: Array2<f64>,
    /// `B × K/2` scratch for the antisymmetric part.
    half: Array2<f64>,
}

impl Folded {
    fn new(basis: &SpectralBasis, rows: usize) -> Self {
        let h = basis.grid_size() / 2;
        let table = basis.modes_by_node();
        let odd = table.slice(s![..;2, ..h]).to_owned();
        let even = table.slice(s![1..;2, ..h]).to_owned();
        Self {
            odd_t: odd.t().as_standard_layout().into_owned(),
            even_t: even.t().as_standard_layout().into_owned(),
            odd,
            even,
            half: Array2::zeros((rows, h)),
        }
    }
}

impl<'a> BatchStepper<'a> {
    pub fn new(basis: &'a SpectralBasis, tamed: &TamedNonlinearity, tau: f64, rows: usize) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(invalid(format!("stepsize must be positive, got {tau}")));
        }
        let k = basis.grid_size();
        Ok(Self {
            basis,
            kernel: tamed.kernel(tau),
            decay: basis.decay_factors(tau)?,
            tau,
            folded: (k % 2 == 0 && basis.dim() > 1).then(|| Folded::new(basis, rows)),
            grid: Array2::zeros((rows, k)),
            work: Array2::zeros((rows, k)),
            drift: Array2::zeros((rows, basis.dim())),
        })
    }

    /// Nodal values of every row of `states`, in the order described on the type.
    pub fn synthesize(&mut self, states: &Array2<f64>) -> &Array2<f64> {
        match &mut self.folded {
            None => general_mat_mul(1.0, states, self.basis.modes_by_node(), 0.0, &mut self.grid),
            Some(f) => {
                let h = f.half.ncols();
                let (mut left, mut right) = self.grid.view_mut().split_at(Axis(1), h);
                general_mat_mul(1.0, &states.slice(s![.., ..;2]), &f.odd, 0.0, &mut left);
                general_mat_mul(1.0, &states.slice(s![.., 1..;2]), &f.even, 0.0, &mut f.half);
                Zip::from(&mut left)
                    .and(&mut right)
                    .and(&f.half)
                    .for_each(|l, r, &a| {
                        let sym = *l;
                        *l = sym + a;
                        *r = sym - a;
                    });
            }
        }
        &self.grid
    }

    pub fn grid(&self) -> &Array2<f64> {
        &self.grid
    }

    /// One scheme step for all live rows from the last synthesized grid.
    /// Rows that blow up are zeroed and marked dead; returns their indices.
    pub fn step_from_grid(
        &mut self,
        states: &mut Array2<f64>,
        increments: &Array2<f64>,
        alive: &mut [bool],
    ) -> Vec<usize> {
        self.work.assign(&self.grid);
        for mut row in self.work.rows_mut() {
            self.kernel
                .apply_slice(row.as_slice_mut().expect("standard layout"));
        }
        let w = self.basis.quadrature_weight();
        match &mut self.folded {
            None => general_mat_mul(w, &self.work, self.basis.nodes_by_mode(), 0.0, &mut self.drift),
            Some(f) => {
                let h = f.half.ncols();
                let (mut left, right) = self.work.view_mut().split_at(Axis(1), h);
                Zip::from(&mut left)
                    .and(&right)
                    .and(&mut f.half)
                    .for_each(|l, &r, a| {
                        *a = *l - r;
                        *l += r;
                    });
                let mut odd = self.drift.slice_mut(s![.., ..;2]);
                general_mat_mul(w, &left, &f.odd_t, 0.0, &mut odd);
                let mut even = self.drift.slice_mut(s![.., 1..;2]);
                general_mat_mul(w, &f.half, &f.even_t, 0.0, &mut even);
            }
        }
        let tau = self.tau;
        let mut failed = Vec::new();
        for (r, ((mut x, d), w)) in states
            .rows_mut()
            .into_iter()
            .zip(self.drift.rows())
            .zip(increments.rows())
            .enumerate()
        {
            if !alive[r] {
                continue;
            }
            let mut norm2 = 0.0;
            for (((x, d), w), e) in x.iter_mut().zip(d).zip(w).zip(&self.decay) {
                *x = e * (*x + tau * d + w);
                norm2 += *x * *x;
            }
            if !(norm2.is_finite() && norm2 <= BLOW_UP_THRESHOLD * BLOW_UP_THRESHOLD) {
                alive[r] = false;
                x.fill(0.0);
                failed.push(r);
            }
        }
        failed
    }
}

/// Per-row noise readers plus scratch for one batch.
pub(crate) struct BatchNoise {
    readers: Vec<NormalReader>,
    scales: Vec<f64>,
    scratch: Vec<f64>,
    pub(crate) off: bool,
}

impl BatchNoise {
    pub(crate) fn new(streams: &[NoiseStream], scales: Vec<f64>, off: bool) -> Self {
        let dim = scales.len();
        Self {
            readers: streams.iter().map(NoiseStream::reader).collect(),
            scales,
            scratch: vec![0.0; dim],
            off,
        }
    }

    /// Row `r` of `out` ← sum of the scaled fine increments `first..first+count`.
    pub(crate) fn fill(&mut self, out: &mut Array2<f64>, first: u64, count: u64, alive: &[bool]) {
        if self.off {
            return;
        }
        for (r, mut row) in out.rows_mut().into_iter().enumerate() {
            if !alive[r] {
                continue;
            }
            crate::noise::accumulate_increments(
                &mut self.readers[r],
                &self.scales,
                first,
                count,
                &mut self.scratch,
                row.as_slice_mut().expect("standard layout"),
            );
        }
    }
}

/// Consecutive index batches of at most [`BATCH_SIZE`].
pub(crate) fn batches(samples: Range<u64>) -> Vec<Range<u64>> {
    let mut out = Vec::new();
    let mut start = samples.start;
    while start < samples.end {
        let end = (start + BATCH_SIZE as u64).min(samples.end);
        out.push(start..end);
        start = end;
    }
    out
}

/// Runs `f` over the batches on a pool of `workers` threads; output in batch order.
pub(crate) fn par_batches<T, F>(samples: Range<u64>, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(Range<u64>) -> Result<T> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| invalid(format!("cannot build worker pool: {e}")))?;
    pool.install(|| batches(samples).into_par_iter().map(&f).collect())
}

/// Simulates samples `samples` of `cfg` (sample `s` driven by stream
/// `(cfg.seed, s)` on the scheme's own grid) and returns one record per path.
pub fn run_ensemble(
    cfg: &SchemeConfig,
    samples: Range<u64>,
    checkpoints: &Checkpoints,
    workers: usize,
) -> Result<Vec<TrajectoryRecord>> {
    run_ensemble_on_grid(cfg, samples, checkpoints, workers, cfg.steps as u64)
}

/// As [`run_ensemble`], with the noise drawn on a finer grid of `fine_steps`
/// steps and aggregated to the scheme's stepsize.
pub fn run_ensemble_on_grid(
    cfg: &SchemeConfig,
    samples: Range<u64>,
    checkpoints: &Checkpoints,
    workers: usize,
    fine_steps: u64,
) -> Result<Vec<TrajectoryRecord>> {
    let marks = cfg.checkpoint_steps(&checkpoints.times)?;
    let ratio = fine_ratio(cfg.steps, fine_steps)?;
    let dim = cfg.dim();
    let scales = if cfg.noise.is_off() {
        vec![0.0; dim]
    } else {
        increment_scales(&cfg.noise, dim, cfg.tau / ratio as f64)?
    };
    let initial = cfg.initial_state();

    let per_batch = par_batches(samples, workers, |range| {
        let rows = (range.end - range.start) as usize;
        let streams: Vec<NoiseStream> = range
            .clone()
            .map(|s| NoiseStream::new(cfg.seed, s, fine_steps))
            .collect();
        let mut noise = BatchNoise::new(&streams, scales.clone(), cfg.noise.is_off());
        let mut stepper = BatchStepper::new(&cfg.basis, &cfg.tamed, cfg.tau, rows)?;
        let mut states = Array2::zeros((rows, dim));
        for mut row in states.rows_mut() {
            row.assign(&ArrayView1::from(initial.coefficients()));
        }
        let mut increments = Array2::zeros((rows, dim));
        let mut alive = vec![true; rows];
        let mut records: Vec<TrajectoryRecord> = range
            .clone()
            .map(|s| TrajectoryRecord::new(s, checkpoints.keep_states))
            .collect();
        let mut next = marks.iter().peekable();

        for m in 0..=cfg.steps {
            let is_mark = next.peek() == Some(&&m);
            if is_mark || m < cfg.steps {
                stepper.synthesize(&states);
            }
            if is_mark {
                next.next();
                let t = m as f64 * cfg.tau;
                for (r, rec) in records.iter_mut().enumerate() {
                    if alive[r] {
                        let x = states.row(r);
                        let g = stepper.grid().row(r);
                        rec.push(
                            t,
                            x.as_slice().expect("standard layout"),
                            g.as_slice().expect("standard layout"),
                            &checkpoints.observables,
                        );
                    }
                }
            }
            if m == cfg.steps || !alive.iter().any(|&a| a) {
                break;
            }
            noise.fill(&mut increments, m as u64 * ratio, ratio, &alive);
            for r in stepper.step_from_grid(&mut states, &increments, &mut alive) {
                records[r].blow_up = Some(BlowUpInfo {
                    step: m + 1,
                    time: (m + 1) as f64 * cfg.tau,
                });
            }
        }
        Ok(records)
    })?;
    Ok(per_batch.into_iter().flatten().collect())
}
