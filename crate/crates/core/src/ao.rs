//! Alternating-optimization driver: bisection for the beam allocation,
//! an ADMM variant for the pattern, and a greedy feasibility repair after
//! every inner solve.
//!
//! One outer round
//!
//! 1. `b  <- bisect(p_d_low)` with the pattern fixed,
//! 2. `X  <- solve_admm | solve_l2box (G(b), b)` with `b` fixed,
//! 3. repair `X` slot by slot to exactly `N_b` illuminations, then restore
//!    any empty rows,
//! 4. refresh `p_d_low` from the repaired pattern for the next round.
//!
//! The reported result is the best iterate by minimum success probability,
//! not the last one: the nonconvex inner solver can regress.

use std::time::Instant;

use nalgebra::DMatrix;

use crate::admm::{default_rho1, solve_admm, AdmmConfig};
use crate::bisection::bisect;
use crate::error::{Error, Result};
use crate::l2box::{solve_l2box, L2BoxConfig};
use crate::metrics::{
    decoding_margin, decoding_success_lower_bound, quadratic_matrix, success_lower_bound,
    uniform_fractional_pattern, BeamAllocation, BeamHoppingPattern, SuccessReport,
};
use crate::scenario::Scenario;

/// Inner pattern solver choice.
#[derive(Debug, Clone)]
pub enum InnerSolver {
    Admm(AdmmConfig),
    L2Box(L2BoxConfig),
}

#[derive(Debug, Clone)]
pub struct AoConfig {
    /// Outer iterations.
    pub n_ao: usize,
    pub solver: InnerSolver,
    /// Recompute repair priorities after each slot edit instead of holding
    /// them fixed per sweep.
    pub refresh_repair: bool,
    /// Bisection iteration budget.
    pub bisection_iters: usize,
}

impl AoConfig {
    pub fn admm() -> Self {
        Self {
            n_ao: 5,
            solver: InnerSolver::Admm(AdmmConfig::default()),
            refresh_repair: false,
            bisection_iters: 100,
        }
    }

    pub fn l2box() -> Self {
        Self {
            n_ao: 5,
            solver: InnerSolver::L2Box(L2BoxConfig::default()),
            refresh_repair: false,
            bisection_iters: 100,
        }
    }
}

/// One outer iteration's trace row.
#[derive(Debug, Clone)]
pub struct AoIteration {
    pub iter: usize,
    pub allocation: Vec<usize>,
    pub min_p_suc: f64,
    pub mean_p_suc: f64,
    pub residual_z1: f64,
    pub residual_z2: f64,
    pub millis: f64,
}

#[derive(Debug, Clone, Default)]
pub struct AoTrace {
    pub iterations: Vec<AoIteration>,
}

pub const AO_TRACE_SCHEMA: &str = "beamhop-ao-trace-v1";

impl AoTrace {
    pub fn to_csv(&self) -> String {
        let mut out = format!("# schema: {AO_TRACE_SCHEMA}\niter,min_psuc,mean_psuc,residual1,residual2,ms\n");
        for it in &self.iterations {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                it.iter, it.min_p_suc, it.mean_p_suc, it.residual_z1, it.residual_z2, it.millis
            ));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct AoResult {
    pub pattern: BeamHoppingPattern,
    /// Bisection allocation of the best iterate.
    pub allocation: BeamAllocation,
    pub report: SuccessReport,
    pub trace: AoTrace,
}

/// Initialization: decoding bound under uniform fractional illumination
/// (independent of the allocation) plus the fractional pattern for the
/// trace.
pub fn initialize(scenario: &Scenario) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let n = scenario.n_cells();
    let n_r = scenario.link.n_r as f64;
    let n_slot = scenario.n_slot as f64;
    let mut p_d = Vec::with_capacity(n);
    for i in 0..n {
        let margin = decoding_margin(scenario, i);
        if margin <= 0.0 {
            return Err(Error::DecodingInfeasible { cell: i });
        }
        let mut interference = 0.0;
        for j in 0..n {
            if j != i {
                interference += scenario.gains[(i, j)]
                    * scenario.cells[j].demand
                    * scenario.cells[j].activation;
            }
        }
        p_d.push((1.0 - interference / (n_slot * n_r * margin)).clamp(0.0, 1.0));
    }
    let x = uniform_fractional_pattern(&vec![1.0; n], scenario.n_slot);
    Ok((x, p_d))
}

fn repair_slot(
    x: &mut DMatrix<f64>,
    t: usize,
    p_suc: &[f64],
    n_b: usize,
) {
    let n_c = x.nrows();
    let col_sum: usize = (0..n_c).map(|i| x[(i, t)] as usize).sum();
    if col_sum < n_b {
        // illuminate the worst-off dark cells
        let mut dark: Vec<usize> = (0..n_c).filter(|&i| x[(i, t)] == 0.0).collect();
        dark.sort_by(|&a, &b| p_suc[a].partial_cmp(&p_suc[b]).unwrap().then(a.cmp(&b)));
        for &i in dark.iter().take(n_b - col_sum) {
            x[(i, t)] = 1.0;
        }
    } else if col_sum > n_b {
        // dim the best-off illuminated cells
        let mut lit: Vec<usize> = (0..n_c).filter(|&i| x[(i, t)] == 1.0).collect();
        lit.sort_by(|&a, &b| p_suc[b].partial_cmp(&p_suc[a]).unwrap().then(a.cmp(&b)));
        for &i in lit.iter().take(col_sum - n_b) {
            x[(i, t)] = 0.0;
        }
    }
}

fn restore_empty_rows(x: &mut DMatrix<f64>, p_suc: &[f64]) {
    let n_c = x.nrows();
    let n_slot = x.ncols();
    let mut row_sums: Vec<usize> =
        (0..n_c).map(|i| (0..n_slot).map(|t| x[(i, t)] as usize).sum()).collect();
    for i in 0..n_c {
        if row_sums[i] > 0 {
            continue;
        }
        // steal from the best-off cell that can spare an illumination
        let donor = (0..n_c)
            .filter(|&j| row_sums[j] >= 2)
            .max_by(|&a, &b| p_suc[a].partial_cmp(&p_suc[b]).unwrap().then(b.cmp(&a)));
        let Some(j) = donor else { continue };
        let t = (0..n_slot).find(|&t| x[(j, t)] == 1.0).expect("donor has illuminations");
        x[(j, t)] = 0.0;
        x[(i, t)] = 1.0;
        row_sums[j] -= 1;
        row_sums[i] += 1;
    }
}

/// Greedy feasibility repair with priorities held fixed for the sweep:
/// every slot ends with exactly `n_b` illuminations, then empty rows are
/// restored by stealing from the best-off cells. The output satisfies
/// binary / per-slot / per-cell feasibility whenever `N_c <= N_slot N_b`.
pub fn repair(x: &BeamHoppingPattern, p_suc: &[f64], n_b: usize) -> BeamHoppingPattern {
    let mut m = x.as_matrix().clone();
    for t in 0..m.ncols() {
        repair_slot(&mut m, t, p_suc, n_b);
    }
    restore_empty_rows(&mut m, p_suc);
    BeamHoppingPattern::from_matrix(m).expect("repair keeps entries binary")
}

/// Repair variant that recomputes the priorities after each slot edit.
pub fn repair_with_refresh(
    x: &BeamHoppingPattern,
    scenario: &Scenario,
    b: &[f64],
    n_b: usize,
) -> Result<BeamHoppingPattern> {
    let mut m = x.as_matrix().clone();
    for t in 0..m.ncols() {
        let report = success_lower_bound(scenario, &m, Some(b))?;
        let p_suc: Vec<f64> = report.cells.iter().map(|c| c.p_suc_low).collect();
        repair_slot(&mut m, t, &p_suc, n_b);
    }
    let report = success_lower_bound(scenario, &m, Some(b))?;
    let p_suc: Vec<f64> = report.cells.iter().map(|c| c.p_suc_low).collect();
    restore_empty_rows(&mut m, &p_suc);
    BeamHoppingPattern::from_matrix(m)
}

/// Runs the alternating optimization and returns the best iterate with the
/// full trace.
pub fn optimize(scenario: &Scenario, config: &AoConfig) -> Result<AoResult> {
    if config.n_ao == 0 {
        return Err(Error::Validation {
            field: "n_ao".into(),
            message: "at least one outer iteration is required".into(),
        });
    }
    let capacity = scenario.n_slot * scenario.n_b;
    if scenario.n_cells() > capacity {
        return Err(Error::Infeasible(format!(
            "{} cells exceed beam-slot capacity {capacity}",
            scenario.n_cells()
        )));
    }
    let demands = scenario.demands();
    let solver = resolve_rho(&config.solver, &demands);
    let (_x0, mut p_d_low) = initialize(scenario)?;

    let mut trace = AoTrace::default();
    let mut best: Option<(f64, BeamHoppingPattern, BeamAllocation, SuccessReport)> = None;

    for k in 1..=config.n_ao {
        let started = Instant::now();
        let bis = bisect(scenario, &p_d_low, config.bisection_iters)?;
        let b = bis.allocation;
        let (_, g) = quadratic_matrix(scenario, &b.counts)?;
        let out = match &solver {
            InnerSolver::Admm(cfg) => solve_admm(&g, &b.counts, scenario.n_slot, scenario.n_b, cfg)?,
            InnerSolver::L2Box(cfg) => solve_l2box(&g, &b.counts, scenario.n_slot, scenario.n_b, cfg)?,
        };

        let bf = b.as_f64();
        let repaired = if config.refresh_repair {
            repair_with_refresh(&out.pattern, scenario, &bf, scenario.n_b)?
        } else {
            let pre = success_lower_bound(scenario, out.pattern.as_matrix(), Some(&bf))?;
            let p_suc: Vec<f64> = pre.cells.iter().map(|c| c.p_suc_low).collect();
            repair(&out.pattern, &p_suc, scenario.n_b)
        };

        let report = success_lower_bound(scenario, repaired.as_matrix(), None)?;
        let last = out.trace.last();
        trace.iterations.push(AoIteration {
            iter: k,
            allocation: b.counts.clone(),
            min_p_suc: report.min_p_suc,
            mean_p_suc: report.mean_p_suc,
            residual_z1: last.map_or(0.0, |l| l.residual_z1),
            residual_z2: last.map_or(0.0, |l| l.residual_z2),
            millis: started.elapsed().as_secs_f64() * 1e3,
        });

        let improved = best.as_ref().is_none_or(|(v, ..)| report.min_p_suc > *v);
        if improved {
            best = Some((report.min_p_suc, repaired.clone(), b, report.clone()));
        }

        // next bisection works from the repaired pattern's bound
        p_d_low = decoding_success_lower_bound(scenario, repaired.as_matrix(), None)?
            .iter()
            .map(|p| p.clamped)
            .collect();
    }

    let (_, pattern, allocation, report) = best.expect("n_ao >= 1 produced an iterate");
    Ok(AoResult { pattern, allocation, report, trace })
}

fn resolve_rho(solver: &InnerSolver, demands: &[f64]) -> InnerSolver {
    match solver {
        InnerSolver::Admm(cfg) => {
            let mut cfg = cfg.clone();
            cfg.rho1_init = Some(cfg.rho1_init.unwrap_or_else(|| default_rho1(demands)));
            InnerSolver::Admm(cfg)
        }
        InnerSolver::L2Box(cfg) => {
            let mut cfg = cfg.clone();
            cfg.rho_init = Some(cfg.rho_init.unwrap_or_else(|| default_rho1(demands)));
            InnerSolver::L2Box(cfg)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate_scenario, GeneratorParams};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scenario(n_cells: usize, n_slot: usize, n_b: usize, seed: u64) -> Scenario {
        generate_scenario(
            &GeneratorParams { n_cells, n_slot, n_b, ..GeneratorParams::default() },
            seed,
        )
        .unwrap()
    }

    #[test]
    fn initialization_matches_general_bound_on_fractional_pattern() {
        let s = scenario(6, 8, 2, 1);
        let (_, p_d) = initialize(&s).unwrap();
        // the closed-form initialization equals the general bound at the
        // uniform fractional pattern, for any allocation
        let b = vec![3.0, 1.0, 4.0, 2.0, 2.0, 4.0];
        let x = uniform_fractional_pattern(&b, 8);
        let bounds = decoding_success_lower_bound(&s, &x, None).unwrap();
        for i in 0..6 {
            assert_relative_eq!(p_d[i], bounds[i].raw, max_relative = 1e-12);
        }
    }

    #[test]
    fn initialization_without_interferers_is_one() {
        use crate::scenario::{Cell, LinkBudget, SatelliteGeometry};
        let cells = vec![Cell { id: 0, lat_deg: 0.0, lon_deg: 0.0, demand: 500.0, activation: 0.01 }];
        let link = LinkBudget {
            g_t_dbi: 0.0,
            f_c_hz: 2.0e9,
            aperture_m: 2.0,
            efficiency: 0.55,
            rho_db: 132.86,
            gamma_th_db: 5.0,
            n_r: 20,
        };
        let s = Scenario::new(cells, SatelliteGeometry::new(0.0, 0.0, 600.0), link, 4, 1).unwrap();
        let (_, p_d) = initialize(&s).unwrap();
        assert_relative_eq!(p_d[0], 1.0);
    }

    #[test]
    fn initialization_symmetric_cells_agree() {
        // two cells mirrored around the nadir see identical geometry
        use crate::scenario::{Cell, LinkBudget, SatelliteGeometry};
        let cells = vec![
            Cell { id: 0, lat_deg: 0.0, lon_deg: -0.2, demand: 800.0, activation: 0.01 },
            Cell { id: 1, lat_deg: 0.0, lon_deg: 0.2, demand: 800.0, activation: 0.01 },
        ];
        let link = LinkBudget {
            g_t_dbi: 0.0,
            f_c_hz: 2.0e9,
            aperture_m: 2.0,
            efficiency: 0.55,
            rho_db: 132.86,
            gamma_th_db: 5.0,
            n_r: 20,
        };
        let s = Scenario::new(cells, SatelliteGeometry::new(0.0, 0.0, 600.0), link, 4, 1).unwrap();
        let (_, p_d) = initialize(&s).unwrap();
        assert_relative_eq!(p_d[0], p_d[1], max_relative = 1e-9);
    }

    #[test]
    fn repair_leaves_feasible_pattern_alone() {
        let x = BeamHoppingPattern::from_rows(&[
            vec![1, 0, 1],
            vec![1, 1, 0],
            vec![0, 1, 1],
        ])
        .unwrap();
        let repaired = repair(&x, &[0.5, 0.6, 0.7], 2);
        assert_eq!(repaired, x);
    }

    #[test]
    fn repair_fills_empty_pattern_toward_worst_cells() {
        let x = BeamHoppingPattern::from_rows(&[vec![0, 0], vec![0, 0], vec![0, 0]]).unwrap();
        // the slot sweep gives both slots to the two worst cells (1, then
        // 0); the row restore then reassigns one of cell 0's slots to the
        // still-empty cell 2
        let repaired = repair(&x, &[0.4, 0.1, 0.9], 2);
        assert_eq!(repaired.to_rows(), vec![vec![0, 1], vec![1, 1], vec![1, 0]]);
        assert!(repaired.feasibility(2).is_feasible());
    }

    #[test]
    fn repair_restores_empty_rows() {
        let x = BeamHoppingPattern::from_rows(&[
            vec![1, 1],
            vec![1, 1],
            vec![0, 0],
        ])
        .unwrap();
        let repaired = repair(&x, &[0.9, 0.2, 0.1], 2);
        let f = repaired.feasibility(2);
        assert!(f.is_feasible(), "row sums {:?}", repaired.row_sums());
        // the donor is the best-off cell with spare illuminations (cell 0)
        assert_eq!(repaired.row_sums(), vec![1, 2, 1]);
    }

    #[test]
    fn repair_fuzz_always_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..300 {
            let n_c: usize = rng.random_range(2..12);
            let n_b = rng.random_range(1..n_c);
            let min_slots = n_c.div_ceil(n_b);
            let n_slot = rng.random_range(min_slots..min_slots + 6);
            let m = DMatrix::from_fn(n_c, n_slot, |_, _| {
                if rng.random_bool(0.4) { 1.0 } else { 0.0 }
            });
            let p_suc: Vec<f64> = (0..n_c).map(|_| rng.random_range(0.0..1.0)).collect();
            let x = BeamHoppingPattern::from_matrix(m).unwrap();
            let repaired = repair(&x, &p_suc, n_b);
            let f = repaired.feasibility(n_b);
            assert!(f.is_feasible(), "cols {:?} rows {:?}", repaired.col_sums(), repaired.row_sums());
            // the sweep fills every slot to capacity exactly
            assert!(repaired.col_sums().iter().all(|&c| c == n_b));
        }
    }

    #[test]
    fn repair_changes_only_what_it_must() {
        let x = BeamHoppingPattern::from_rows(&[
            vec![1, 1, 0],
            vec![1, 0, 0],
            vec![0, 0, 1],
        ])
        .unwrap();
        // slot sums are 2,1,1 with n_b = 2: slots 1 and 2 gain one cell each
        let repaired = repair(&x, &[0.3, 0.5, 0.7], 2);
        let diff: usize = x
            .as_matrix()
            .iter()
            .zip(repaired.as_matrix().iter())
            .filter(|(a, b)| a != b)
            .count();
        assert_eq!(diff, 2);
    }

    #[test]
    fn optimize_single_round_runs_and_is_feasible() {
        let s = scenario(6, 6, 2, 4);
        let mut cfg = AoConfig::admm();
        cfg.n_ao = 1;
        let r = optimize(&s, &cfg).unwrap();
        assert_eq!(r.trace.iterations.len(), 1);
        assert!(r.pattern.feasibility(s.n_b).is_feasible());
        r.allocation.validate(s.n_slot, s.n_b).unwrap();
    }

    #[test]
    fn optimize_best_iterate_at_least_first() {
        let s = scenario(8, 8, 2, 5);
        for cfg in [AoConfig::admm(), AoConfig::l2box()] {
            let mut cfg = cfg;
            cfg.n_ao = 4;
            let r = optimize(&s, &cfg).unwrap();
            let first = r.trace.iterations[0].min_p_suc;
            assert!(
                r.report.min_p_suc >= first - 1e-12,
                "best {} < first {first}",
                r.report.min_p_suc
            );
        }
    }

    #[test]
    fn optimize_deterministic() {
        let s = scenario(6, 6, 2, 6);
        let a = optimize(&s, &AoConfig::l2box()).unwrap();
        let b = optimize(&s, &AoConfig::l2box()).unwrap();
        assert_eq!(a.pattern, b.pattern);
        assert_eq!(a.allocation, b.allocation);
    }

    #[test]
    fn optimize_rejects_overfull_instance() {
        let s = scenario(10, 3, 2, 7);
        assert!(matches!(optimize(&s, &AoConfig::admm()), Err(Error::Infeasible(_))));
    }

    #[test]
    fn refresh_repair_mode_stays_feasible() {
        let s = scenario(6, 6, 2, 8);
        let mut cfg = AoConfig::l2box();
        cfg.refresh_repair = true;
        cfg.n_ao = 2;
        let r = optimize(&s, &cfg).unwrap();
        assert!(r.pattern.feasibility(s.n_b).is_feasible());
    }

    #[test]
    fn trace_csv_schema() {
        let s = scenario(5, 6, 2, 9);
        let mut cfg = AoConfig::admm();
        cfg.n_ao = 2;
        let r = optimize(&s, &cfg).unwrap();
        let csv = r.trace.to_csv();
        assert!(csv.starts_with("# schema: beamhop-ao-trace-v1\n"));
        assert!(csv.lines().nth(1).unwrap().starts_with("iter,min_psuc,mean_psuc"));
        assert_eq!(csv.lines().count(), 4);
    }
}
