//! Cross-validation of the analytic probability model against the
//! Monte-Carlo simulator and the exact enumeration oracle.

use beamhop_core::metrics::{
    collision_avoidance, decoding_success_exact_small, evaluate_pattern, BeamHoppingPattern,
};
use beamhop_core::scenario::{generate_scenario, GeneratorParams, Scenario};
use beamhop_core::simulator::{simulate, McConfig};

fn tiny_scenario(seed: u64, demand: f64, activation: f64) -> Scenario {
    let mut s = generate_scenario(
        &GeneratorParams { n_cells: 4, n_slot: 4, n_b: 2, ..GeneratorParams::default() },
        seed,
    )
    .unwrap();
    for c in &mut s.cells {
        c.demand = demand;
        c.activation = activation;
    }
    s
}

#[test]
fn collision_formula_matches_simulation() {
    // isolated cells (disjoint slots): success is pure collision avoidance
    for (k, &(alpha, demand, b)) in [(0.15, 18.0, 2usize), (0.4, 9.0, 1), (0.05, 25.0, 3)]
        .iter()
        .enumerate()
    {
        let mut s = tiny_scenario(40 + k as u64, demand, alpha);
        s.cells[0].activation = alpha;
        // each cell gets its own slot; the tagged cell may span several
        let mut rows = vec![vec![0u8; 4]; 4];
        for t in 0..b {
            rows[0][t] = 1;
        }
        rows[1][3] = 1;
        rows[2][3] = 1;
        rows[3][3] = 1;
        let x = BeamHoppingPattern::from_rows(&rows).unwrap();
        // fixed seeds: same-cell collisions fail in pairs, so the spread
        // runs slightly above the binomial stderr
        let mc = simulate(&s, &x, &McConfig::new(30_000, 177 + k as u64)).unwrap();
        let cell = &mc.cells[0];
        let analytic = collision_avoidance(alpha, demand, s.link.n_r, b).unwrap();
        let gap = (cell.p_a().unwrap() - analytic).abs();
        assert!(
            gap <= 3.0 * cell.p_a_stderr(),
            "tuple {k}: MC {} vs Eq {} (3s = {})",
            cell.p_a().unwrap(),
            analytic,
            3.0 * cell.p_a_stderr()
        );
    }
}

#[test]
fn exact_oracle_matches_simulation() {
    for seed in 0..4u64 {
        let mut s = tiny_scenario(seed, 15.0, 0.25);
        // raise the threshold so interference genuinely causes failures
        s.link.gamma_th_db = 7.0;
        let x = BeamHoppingPattern::from_rows(&[
            vec![1, 1, 0, 0],
            vec![1, 0, 1, 0],
            vec![0, 1, 0, 1],
            vec![0, 0, 1, 1],
        ])
        .unwrap();
        let mc = simulate(&s, &x, &McConfig::new(30_000, 100 + seed)).unwrap();
        for i in 0..4 {
            let exact = decoding_success_exact_small(&s, &x, i).unwrap();
            let cell = &mc.cells[i];
            let p_d = cell.p_d().unwrap();
            let se = cell.p_d_stderr();
            assert!(
                (p_d - exact).abs() <= 3.0 * se + 1e-9,
                "seed {seed} cell {i}: MC {p_d} vs exact {exact} (3s = {})",
                3.0 * se
            );
        }
    }
}

#[test]
fn markov_bound_holds_empirically() {
    // empirical P_suc must dominate the analytic lower bound
    let s = generate_scenario(
        &GeneratorParams { n_cells: 10, n_slot: 8, n_b: 2, ..GeneratorParams::default() },
        3,
    )
    .unwrap();
    let x = beamhop_core::baselines::round_robin_pattern(&s);
    let report = evaluate_pattern(&s, &x).unwrap();
    let mc = simulate(&s, &x, &McConfig::new(20_000, 9)).unwrap();
    for (cell, counts) in report.cells.iter().zip(&mc.cells) {
        let p_hat = counts.success_rate().unwrap();
        let se = counts.success_stderr();
        assert!(
            p_hat >= cell.p_suc_low - 3.0 * se,
            "cell {}: MC {p_hat} below bound {} (3s = {})",
            cell.cell_id,
            cell.p_suc_low,
            3.0 * se
        );
        let p_d_hat = counts.p_d().unwrap();
        let se_d = counts.p_d_stderr();
        assert!(
            p_d_hat >= cell.p_d_low_raw - 3.0 * se_d,
            "cell {}: MC decoding {p_d_hat} below bound {}",
            cell.cell_id,
            cell.p_d_low_raw
        );
    }
}
