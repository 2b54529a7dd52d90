//! Detuning sweeps running the rate-equation and master-equation solvers
//! over a common grid.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use quadcool::fock::HilbertDims;
use quadcool::kinetics;
use quadcool::lindblad::{self, SteadySolver};
use quadcool::stats::MechStats;

use crate::config::SweepConfig;

/// Outcome of one rate-solver point: statistics when the solve ran at
/// all, and whether it converged.
type RatePoint = (Option<MechStats>, bool);

/// A master-equation point whose phonon marginal still carries this much
/// weight at the truncation edge is reported as unconverged.
pub const MASTER_TAIL_LIMIT: f64 = 1e-4;

/// Observables of one grid point. Fields are absent exactly when the
/// solver was not requested or did not converge.
#[derive(Debug, Clone, Default)]
pub struct SweepRecord {
    pub delta: f64,
    pub n_ss_rate: Option<f64>,
    pub n_ss_master: Option<f64>,
    pub q_rate: Option<f64>,
    pub q_master: Option<f64>,
    pub f_rate: Option<f64>,
    pub f_master: Option<f64>,
    /// Absent when the solver was not requested.
    pub converged_rate: Option<bool>,
    pub converged_master: Option<bool>,
}

/// Run the sweep. Records come back ordered by detuning ascending, one
/// per grid point, regardless of execution interleaving; per-point
/// failures are recorded in the convergence flags and the sweep
/// continues.
pub fn run_sweep(config: &SweepConfig) -> Vec<SweepRecord> {
    let grid = config.grid();
    let mut records: Vec<SweepRecord> = grid
        .iter()
        .map(|&delta| SweepRecord {
            delta,
            ..SweepRecord::default()
        })
        .collect();

    if config.solvers.rate {
        run_rate_phase(config, &grid, &mut records);
    }
    if config.solvers.master {
        run_master_phase(config, &grid, &mut records);
    }
    records
}

/// Rate-equation phase: points are independent pure computations, so a
/// bounded worker pool pulls indices from a shared counter. Results land
/// in their slots by index, keeping the output deterministic for any
/// concurrency limit.
fn run_rate_phase(config: &SweepConfig, grid: &[f64], records: &mut [SweepRecord]) {
    let workers = config.concurrency_limit.clamp(1, grid.len().max(1));
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<RatePoint>>> = Mutex::new(vec![None; grid.len()]);

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let index = next.fetch_add(1, Ordering::Relaxed);
                if index >= grid.len() {
                    break;
                }
                let point = rate_point(config, grid[index]);
                results.lock().expect("collector poisoned")[index] = Some(point);
            });
        }
    });

    let results = results.into_inner().expect("collector poisoned");
    for (record, slot) in records.iter_mut().zip(results) {
        let (stats, converged) = slot.expect("every index visited");
        record.converged_rate = Some(converged);
        if converged {
            if let Some(stats) = stats {
                record.n_ss_rate = Some(stats.nbar);
                record.q_rate = stats.mandel_q;
                record.f_rate = stats.fluct_f;
            }
        }
    }
}

fn rate_point(config: &SweepConfig, delta: f64) -> RatePoint {
    let params = config.params.with_delta(delta);
    match kinetics::steady_distribution_auto(&params) {
        Ok(dist) => {
            let converged = dist.tail_ok();
            let stats = MechStats::from_distribution(&dist);
            (Some(stats), converged)
        }
        Err(_) => (None, false),
    }
}

/// Master-equation phase: sequential, one factorization cache reused
/// across the grid.
fn run_master_phase(config: &SweepConfig, grid: &[f64], records: &mut [SweepRecord]) {
    let dims = match HilbertDims::new(config.n_photon_states, config.n_phonon_states) {
        Ok(dims) => dims,
        Err(_) => {
            for record in records.iter_mut() {
                record.converged_master = Some(false);
            }
            return;
        }
    };
    let mut solver = match SteadySolver::new(&config.params, &dims, config.cavity_rate_convention)
    {
        Ok(solver) => solver,
        Err(_) => {
            for record in records.iter_mut() {
                record.converged_master = Some(false);
            }
            return;
        }
    };

    for (record, &delta) in records.iter_mut().zip(grid) {
        record.converged_master = Some(false);
        let Ok(rho) = solver.solve_at(delta) else {
            continue;
        };
        let Ok(marginal) = lindblad::phonon_distribution(&rho) else {
            continue;
        };
        let tail = *marginal.probs().last().expect("nonempty marginal");
        if tail >= MASTER_TAIL_LIMIT {
            continue;
        }
        let stats = MechStats::from_distribution(&marginal);
        record.converged_master = Some(true);
        record.n_ss_master = Some(stats.nbar);
        record.q_master = stats.mandel_q;
        record.f_master = stats.fluct_f;
    }
}
