//! Analytic probability model: collision avoidance rate, Markov lower
//! bound on decoding success, success-probability reports, and the
//! quadratic interference matrix used by the pattern solvers.
//!
//! For cell `i` with allocation `b_i` illuminated slots out of `N_slot`,
//!
//! ```text
//! P_a,i(b_i)   = (1 - alpha_i / (N_R b_i))^(N_i - 1)
//! P_d,i^low(X) = 1 - sum_t sum_{j!=i} x_i^t x_j^t g_ij N_j alpha_j
//!                    / (b_i b_j N_R (g_ii/gamma_th - 1/rho))
//! P_suc,i^low  = P_a,i * clamp(P_d,i^low)
//! ```
//!
//! The exact decoding probability (enumeration over the joint binomial
//! interference outcomes) is available for tiny instances as the oracle
//! that the Markov bound is checked against.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scenario::Scenario;

// ---------------------------------------------------------------------------
// Pattern and allocation types
// ---------------------------------------------------------------------------

/// Binary beam-hopping pattern: `N_c x N_slot`, entry `(i, t) = 1` iff
/// cell `i` is illuminated in slot `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamHoppingPattern {
    matrix: DMatrix<f64>,
}

/// Feasibility summary for a pattern against Eqs. (6c)-(6e)-style
/// constraints: binary entries, per-slot column sums at most `n_b`,
/// per-cell row sums at least one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatternFeasibility {
    pub max_col_sum: usize,
    pub min_row_sum: usize,
    pub n_b: usize,
}

impl PatternFeasibility {
    pub fn is_feasible(&self) -> bool {
        self.max_col_sum <= self.n_b && self.min_row_sum >= 1
    }
}

impl BeamHoppingPattern {
    /// Wraps a matrix whose entries are exactly 0 or 1.
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::Validation {
                field: "pattern".into(),
                message: "pattern entries must be exactly 0 or 1".into(),
            });
        }
        Ok(Self { matrix })
    }

    /// Rounds a relaxed matrix to binary; entries of exactly 0.5 round up.
    pub fn from_rounding(matrix: &DMatrix<f64>) -> Self {
        Self { matrix: matrix.map(|v| if v >= 0.5 { 1.0 } else { 0.0 }) }
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows[0].is_empty() || rows.iter().any(|r| r.len() != rows[0].len()) {
            return Err(Error::DimensionMismatch("pattern rows must be non-empty and rectangular".into()));
        }
        let m = DMatrix::from_fn(n, rows[0].len(), |i, t| rows[i][t] as f64);
        Self::from_matrix(m)
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        (0..self.n_cells())
            .map(|i| (0..self.n_slots()).map(|t| self.matrix[(i, t)] as u8).collect())
            .collect()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn n_cells(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_slots(&self) -> usize {
        self.matrix.ncols()
    }

    /// Beam-slot count per cell, `b_i = sum_t x_i^t`.
    pub fn row_sums(&self) -> Vec<usize> {
        (0..self.n_cells())
            .map(|i| (0..self.n_slots()).map(|t| self.matrix[(i, t)] as usize).sum())
            .collect()
    }

    /// Illuminations per slot.
    pub fn col_sums(&self) -> Vec<usize> {
        (0..self.n_slots())
            .map(|t| (0..self.n_cells()).map(|i| self.matrix[(i, t)] as usize).sum())
            .collect()
    }

    pub fn feasibility(&self, n_b: usize) -> PatternFeasibility {
        PatternFeasibility {
            max_col_sum: self.col_sums().into_iter().max().unwrap_or(0),
            min_row_sum: self.row_sums().into_iter().min().unwrap_or(0),
            n_b,
        }
    }
}

/// Integer beam-slot counts per cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BeamAllocation {
    pub counts: Vec<usize>,
}

impl BeamAllocation {
    pub fn new(counts: Vec<usize>) -> Self {
        Self { counts }
    }

    /// Checks `1 <= b_i <= n_slot` and `sum b_i <= n_slot * n_b`.
    pub fn validate(&self, n_slot: usize, n_b: usize) -> Result<()> {
        if let Some((i, &b)) = self.counts.iter().enumerate().find(|(_, &b)| b < 1 || b > n_slot) {
            return Err(Error::Validation {
                field: format!("allocation[{i}]"),
                message: format!("b_i must be in [1, {n_slot}], got {b}"),
            });
        }
        let total: usize = self.counts.iter().sum();
        if total > n_slot * n_b {
            return Err(Error::Infeasible(format!(
                "total allocation {total} exceeds capacity {}",
                n_slot * n_b
            )));
        }
        Ok(())
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.counts.iter().map(|&b| b as f64).collect()
    }
}

// ---------------------------------------------------------------------------
// Probability model
// ---------------------------------------------------------------------------

/// Collision avoidance rate `(1 - alpha/(n_r b))^(n_devices - 1)`.
///
/// `n_devices` may be fractional; a single device (`n_devices <= 1`) never
/// collides with itself.
pub fn collision_avoidance(alpha: f64, n_devices: f64, n_r: usize, b: usize) -> Result<f64> {
    let load = alpha / (n_r as f64 * b as f64);
    if load >= 1.0 {
        return Err(Error::Domain(format!(
            "alpha/(n_r*b) = {load} leaves a non-positive collision-free probability"
        )));
    }
    Ok((1.0 - load).powf(n_devices - 1.0))
}

/// Decoding-feasibility margin `g_ii / gamma_th - 1/rho` for cell `i`;
/// positive iff the cell can decode in the absence of interference.
pub fn decoding_margin(scenario: &Scenario, cell: usize) -> f64 {
    scenario.gains[(cell, cell)] / scenario.link.gamma_th() - 1.0 / scenario.link.rho()
}

/// Markov lower bound on the decoding success probability of one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdBound {
    /// Raw bound value (may be negative when the bound is loose).
    pub raw: f64,
    /// Raw value clamped to [0, 1]; what downstream products use.
    pub clamped: f64,
    /// Set when `g_ii * rho <= gamma_th`: the cell cannot decode even
    /// without interference, and the bound formula is undefined.
    pub infeasible: bool,
}

/// Markov lower bound `P_d,i^low` for every cell.
///
/// `x` may be fractional (the alternating-optimization initializer uses a
/// uniform fractional pattern). `b` overrides the per-cell illumination
/// counts; when `None` the row sums of `x` are used. Cells with a
/// non-positive feasibility margin are flagged rather than silently
/// clamped.
pub fn decoding_success_lower_bound(
    scenario: &Scenario,
    x: &DMatrix<f64>,
    b: Option<&[f64]>,
) -> Result<Vec<PdBound>> {
    let n = scenario.n_cells();
    if x.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "pattern has {} rows for {n} cells",
            x.nrows()
        )));
    }
    let b: Vec<f64> = match b {
        Some(b) => {
            if b.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "allocation has {} entries for {n} cells",
                    b.len()
                )));
            }
            b.to_vec()
        }
        None => (0..n).map(|i| x.row(i).sum()).collect(),
    };
    if let Some((i, _)) = b.iter().enumerate().find(|(_, &bi)| bi.is_nan() || bi <= 0.0) {
        return Err(Error::Validation {
            field: format!("allocation[{i}]"),
            message: "every cell needs at least one illuminated slot".into(),
        });
    }

    // slot-overlap Gram matrix: overlap[(i, j)] = sum_t x_i^t x_j^t
    let overlap = x * x.transpose();
    let n_r = scenario.link.n_r as f64;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let margin = decoding_margin(scenario, i);
        if margin <= 0.0 {
            out.push(PdBound { raw: 0.0, clamped: 0.0, infeasible: true });
            continue;
        }
        let mut interference = 0.0;
        for j in 0..n {
            if j == i || overlap[(i, j)] == 0.0 {
                continue; // never co-illuminated: no interference term
            }
            let cell = &scenario.cells[j];
            interference += overlap[(i, j)] * scenario.gains[(i, j)] * cell.demand
                * cell.activation
                / (b[i] * b[j] * n_r * margin);
        }
        let raw = 1.0 - interference;
        out.push(PdBound { raw, clamped: raw.clamp(0.0, 1.0), infeasible: false });
    }
    Ok(out)
}

/// Enumeration limits for the exact decoding oracle.
const EXACT_MAX_CELLS: usize = 6;
const EXACT_MAX_DEVICES: f64 = 30.0;

fn binomial_pmf(n: u32, q: f64) -> Vec<f64> {
    let mut pmf = vec![0.0; n as usize + 1];
    if q >= 1.0 {
        pmf[n as usize] = 1.0;
        return pmf;
    }
    pmf[0] = (1.0 - q).powi(n as i32);
    for k in 1..=n as usize {
        pmf[k] = pmf[k - 1] * (n as usize - k + 1) as f64 / k as f64 * q / (1.0 - q);
    }
    pmf
}

/// Exact decoding success probability for one cell on a tiny instance,
/// by enumerating the joint outcomes of the per-cell binomial interferer
/// counts on the tagged (slot, resource-block).
///
/// Device counts are rounded to the nearest integer (at least one) the
/// same way the Monte-Carlo simulator rounds them.
pub fn decoding_success_exact_small(
    scenario: &Scenario,
    x: &BeamHoppingPattern,
    cell: usize,
) -> Result<f64> {
    let n = scenario.n_cells();
    if n > EXACT_MAX_CELLS {
        return Err(Error::InstanceTooLarge(format!(
            "exact oracle handles at most {EXACT_MAX_CELLS} cells, got {n}"
        )));
    }
    if let Some(c) = scenario.cells.iter().find(|c| c.demand.round() > EXACT_MAX_DEVICES) {
        return Err(Error::InstanceTooLarge(format!(
            "exact oracle handles at most {EXACT_MAX_DEVICES} devices per cell, cell {} has {}",
            c.id, c.demand
        )));
    }
    let margin = decoding_margin(scenario, cell);
    if margin <= 0.0 {
        return Ok(0.0);
    }
    let b = x.row_sums();
    if b[cell] == 0 {
        return Err(Error::Validation {
            field: format!("pattern row {cell}"),
            message: "tagged cell is never illuminated".into(),
        });
    }
    let n_r = scenario.link.n_r as f64;

    // per-cell pmf of the interferer count on a fixed (slot, rb)
    let pmfs: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let devices = scenario.cells[j].demand.round().max(1.0) as u32;
            let q = if b[j] == 0 { 0.0 } else { scenario.cells[j].activation / (n_r * b[j] as f64) };
            binomial_pmf(devices, q)
        })
        .collect();

    fn enumerate(
        interferers: &[(f64, &[f64])],
        idx: usize,
        interference: f64,
        prob: f64,
        limit: f64,
        acc: &mut f64,
    ) {
        if interference >= limit {
            return; // every continuation only adds interference
        }
        if idx == interferers.len() {
            *acc += prob;
            return;
        }
        let (gain, pmf) = interferers[idx];
        for (k, &p) in pmf.iter().enumerate() {
            if p > 0.0 {
                enumerate(interferers, idx + 1, interference + k as f64 * gain, p * prob, limit, acc);
            }
        }
    }

    let mut total = 0.0;
    let mut slots = 0usize;
    for t in 0..x.n_slots() {
        if x.as_matrix()[(cell, t)] == 0.0 {
            continue;
        }
        slots += 1;
        let mut interferers: Vec<(f64, &[f64])> = (0..n)
            .filter(|&j| j != cell && x.as_matrix()[(j, t)] == 1.0)
            .map(|j| (scenario.gains[(cell, j)], pmfs[j].as_slice()))
            .collect();
        // largest gains first so pruning cuts early
        interferers.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        let mut p_slot = 0.0;
        enumerate(&interferers, 0, 0.0, 1.0, margin, &mut p_slot);
        total += p_slot;
    }
    Ok(total / slots as f64)
}

// ---------------------------------------------------------------------------
// Success report
// ---------------------------------------------------------------------------

/// Per-cell success probabilities (analytic, optionally with Monte-Carlo
/// columns appended).
#[derive(Debug, Clone, PartialEq)]
pub struct CellSuccess {
    pub cell_id: usize,
    pub p_a: f64,
    pub p_d_low_raw: f64,
    pub p_d_low: f64,
    pub p_suc_low: f64,
    pub decoding_infeasible: bool,
    /// Cell has no illuminated slot in the evaluated pattern.
    pub never_illuminated: bool,
    /// Monte-Carlo estimate and standard error, when available.
    pub mc: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuccessReport {
    pub cells: Vec<CellSuccess>,
    pub min_p_suc: f64,
    pub mean_p_suc: f64,
}

pub const REPORT_SCHEMA: &str = "beamhop-report-v1";

impl SuccessReport {
    pub fn from_cells(cells: Vec<CellSuccess>) -> Self {
        let min = cells.iter().map(|c| c.p_suc_low).fold(f64::INFINITY, f64::min);
        let mean = cells.iter().map(|c| c.p_suc_low).sum::<f64>() / cells.len() as f64;
        Self { cells, min_p_suc: min, mean_p_suc: mean }
    }

    /// Sorted per-cell success probabilities (worst first).
    pub fn sorted_p_suc(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.cells.iter().map(|c| c.p_suc_low).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    pub fn to_csv(&self) -> String {
        let mc = self.cells.iter().any(|c| c.mc.is_some());
        let mut out = format!("# schema: {REPORT_SCHEMA}\n");
        out.push_str("cell_id,p_a,p_d_low_raw,p_d_low,p_suc_low");
        if mc {
            out.push_str(",p_suc_mc,mc_stderr");
        }
        out.push('\n');
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{}",
                c.cell_id, c.p_a, c.p_d_low_raw, c.p_d_low, c.p_suc_low
            ));
            if mc {
                match c.mc {
                    Some((p, se)) => out.push_str(&format!(",{p},{se}")),
                    None => out.push_str(",,"),
                }
            }
            out.push('\n');
        }
        out.push_str(&format!("# min_p_suc,{}\n# mean_p_suc,{}\n", self.min_p_suc, self.mean_p_suc));
        out
    }
}

/// Success-probability lower bound report for a pattern.
///
/// `b` defaults to the row sums of `x`; during alternating-optimization
/// intermediate states the bisection allocation may be passed instead.
pub fn success_lower_bound(
    scenario: &Scenario,
    x: &DMatrix<f64>,
    b: Option<&[f64]>,
) -> Result<SuccessReport> {
    let n = scenario.n_cells();
    let b_vec: Vec<f64> = match b {
        Some(b) => b.to_vec(),
        None => (0..n).map(|i| x.row(i).sum()).collect(),
    };
    let bounds = decoding_success_lower_bound(scenario, x, Some(&b_vec))?;
    let n_r = scenario.link.n_r;
    let mut cells = Vec::with_capacity(n);
    for (i, bound) in bounds.iter().enumerate() {
        // integer slot count for the collision formula; fractional
        // allocations only occur in trace-only evaluations
        let b_int = b_vec[i].round().max(1.0) as usize;
        let p_a = collision_avoidance(scenario.cells[i].activation, scenario.cells[i].demand, n_r, b_int)?;
        cells.push(CellSuccess {
            cell_id: i,
            p_a,
            p_d_low_raw: bound.raw,
            p_d_low: bound.clamped,
            p_suc_low: p_a * bound.clamped,
            decoding_infeasible: bound.infeasible,
            never_illuminated: false,
            mc: None,
        });
    }
    Ok(SuccessReport::from_cells(cells))
}

/// Evaluates a concrete binary pattern, tolerating cells that are never
/// illuminated: those are reported with `p_suc_low = 0` and flagged, while
/// the remaining cells are evaluated at their actual row sums.
pub fn evaluate_pattern(scenario: &Scenario, x: &BeamHoppingPattern) -> Result<SuccessReport> {
    let rows = x.row_sums();
    if rows.iter().all(|&r| r >= 1) {
        return success_lower_bound(scenario, x.as_matrix(), None);
    }
    // dark cells contribute no interference (their rows are zero); the
    // clamped allocation below only keeps the bound formula defined
    let clamped: Vec<f64> = rows.iter().map(|&r| r.max(1) as f64).collect();
    let bounds = decoding_success_lower_bound(scenario, x.as_matrix(), Some(&clamped))?;
    let mut cells = Vec::with_capacity(scenario.n_cells());
    for (i, bound) in bounds.iter().enumerate() {
        if rows[i] == 0 {
            cells.push(CellSuccess {
                cell_id: i,
                p_a: 0.0,
                p_d_low_raw: 0.0,
                p_d_low: 0.0,
                p_suc_low: 0.0,
                decoding_infeasible: bound.infeasible,
                never_illuminated: true,
                mc: None,
            });
            continue;
        }
        let p_a = collision_avoidance(
            scenario.cells[i].activation,
            scenario.cells[i].demand,
            scenario.link.n_r,
            rows[i],
        )?;
        cells.push(CellSuccess {
            cell_id: i,
            p_a,
            p_d_low_raw: bound.raw,
            p_d_low: bound.clamped,
            p_suc_low: p_a * bound.clamped,
            decoding_infeasible: bound.infeasible,
            never_illuminated: false,
            mc: None,
        });
    }
    Ok(SuccessReport::from_cells(cells))
}

// ---------------------------------------------------------------------------
// Quadratic interference matrix
// ---------------------------------------------------------------------------

/// Builds the quadratic matrix pair `(G_tilde, G)` for the pattern
/// sub-problem at allocation `b`:
///
/// ```text
/// G_tilde[i][j] = P_a,i(b_i) g_ij N_j alpha_j / (b_i b_j N_R m_i),  i != j
/// G = sym(G_tilde) - (lambda_min - eps) I,   eps = 1e-12 ||sym(G_tilde)||_F
/// ```
///
/// so that `G` is symmetric positive semidefinite with smallest eigenvalue
/// zero up to the eigensolver tolerance.
pub fn quadratic_matrix(scenario: &Scenario, b: &[usize]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = scenario.n_cells();
    if b.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "allocation has {} entries for {n} cells",
            b.len()
        )));
    }
    let n_r = scenario.link.n_r;
    let mut g_tilde = DMatrix::zeros(n, n);
    for i in 0..n {
        let margin = decoding_margin(scenario, i);
        if margin <= 0.0 {
            return Err(Error::DecodingInfeasible { cell: i });
        }
        let p_a = collision_avoidance(scenario.cells[i].activation, scenario.cells[i].demand, n_r, b[i])?;
        for j in 0..n {
            if i == j {
                continue;
            }
            let cell = &scenario.cells[j];
            g_tilde[(i, j)] = p_a * scenario.gains[(i, j)] * cell.demand * cell.activation
                / (b[i] as f64 * b[j] as f64 * n_r as f64 * margin);
        }
    }
    let sym = (&g_tilde + g_tilde.transpose()) * 0.5;
    let eigen = sym.clone().symmetric_eigen();
    let lambda_min = eigen.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let safety = 1e-12 * sym.norm();
    let shift = lambda_min - safety;
    let g = &sym - DMatrix::identity(n, n) * shift;
    Ok((g_tilde, g))
}

/// Uniform fractional pattern `x_i^t = b_i / n_slot` (used for the
/// alternating-optimization initialization and solver warm starts).
pub fn uniform_fractional_pattern(b: &[f64], n_slot: usize) -> DMatrix<f64> {
    DMatrix::from_fn(b.len(), n_slot, |i, _| b[i] / n_slot as f64)
}

/// Uniform fractional pattern with a deterministic slot-breaking
/// perturbation (row means preserved).
///
/// The plain fractional start has identical columns, and every ADMM
/// operator maps identical columns to identical columns, so without a
/// perturbation the iteration can never assign different slots to
/// different cells. A fixed low-discrepancy offset breaks the tie
/// reproducibly.
pub fn perturbed_fractional_pattern(b: &[f64], n_slot: usize, epsilon: f64) -> DMatrix<f64> {
    const PHI: f64 = 0.618_033_988_749_894_9;
    let mut x = DMatrix::from_fn(b.len(), n_slot, |i, t| {
        let noise = ((i + 1) as f64 * PHI + (t + 1) as f64 * PHI * PHI
            + ((i + 1) * (t + 1)) as f64 * PHI * PHI * PHI)
            .fract();
        b[i] / n_slot as f64 + epsilon * (noise - 0.5)
    });
    for i in 0..b.len() {
        let mean = x.row(i).sum() / n_slot as f64 - b[i] / n_slot as f64;
        for t in 0..n_slot {
            x[(i, t)] -= mean;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate_scenario, GeneratorParams};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_scenario(n_cells: usize, n_slot: usize, n_b: usize, seed: u64) -> Scenario {
        generate_scenario(
            &GeneratorParams { n_cells, n_slot, n_b, ..GeneratorParams::default() },
            seed,
        )
        .unwrap()
    }

    fn random_pattern_with_rows(n: usize, n_slot: usize, b: &[usize], seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = DMatrix::zeros(n, n_slot);
        for i in 0..n {
            let mut slots: Vec<usize> = (0..n_slot).collect();
            slots.shuffle(&mut rng);
            for &t in slots.iter().take(b[i]) {
                x[(i, t)] = 1.0;
            }
        }
        x
    }

    #[test]
    fn collision_single_device_never_collides() {
        assert_eq!(collision_avoidance(0.5, 1.0, 4, 2).unwrap(), 1.0);
    }

    #[test]
    fn collision_vanishing_activation() {
        assert_relative_eq!(collision_avoidance(1e-15, 1000.0, 20, 4).unwrap(), 1.0, max_relative = 1e-9);
    }

    #[test]
    fn collision_reference_value() {
        // independent high-precision route: exp((n-1) ln1p(-load))
        let oracle = (999.0 * (-0.01f64 / (20.0 * 4.0)).ln_1p()).exp();
        assert_abs_diff_eq!(oracle, 0.8826, epsilon = 5e-5);
        let got = collision_avoidance(0.01, 1000.0, 20, 4).unwrap();
        assert_abs_diff_eq!(got, oracle, epsilon = 1e-12);
    }

    #[test]
    fn collision_strictly_increases_in_b() {
        let mut prev = 0.0;
        for b in 1..=16 {
            let p = collision_avoidance(0.3, 500.0, 5, b).unwrap();
            assert!(p > prev, "P_a must increase with b");
            prev = p;
        }
    }

    #[test]
    fn collision_domain_error() {
        assert!(collision_avoidance(1.0, 10.0, 1, 1).is_err());
    }

    #[test]
    fn lower_bound_disjoint_slots_is_one() {
        let s = small_scenario(4, 4, 2, 1);
        let x = DMatrix::from_fn(4, 4, |i, t| if i == t { 1.0 } else { 0.0 });
        let bounds = decoding_success_lower_bound(&s, &x, None).unwrap();
        for b in bounds {
            assert_relative_eq!(b.raw, 1.0);
            assert!(!b.infeasible);
        }
    }

    #[test]
    fn lower_bound_two_cell_hand_expansion() {
        let s = small_scenario(2, 2, 1, 2);
        let x = DMatrix::from_element(2, 2, 1.0);
        let bounds = decoding_success_lower_bound(&s, &x, None).unwrap();
        let margin = decoding_margin(&s, 0);
        let expected = 1.0
            - s.gains[(0, 1)] * s.cells[1].demand * s.cells[1].activation
                / (2.0 * s.link.n_r as f64 * margin);
        assert_relative_eq!(bounds[0].raw, expected, max_relative = 1e-12);
    }

    #[test]
    fn exact_oracle_no_interferers_in_slot() {
        let mut s = small_scenario(3, 3, 2, 3);
        for c in &mut s.cells {
            c.demand = 20.0;
            c.activation = 0.3;
        }
        // tagged cell alone in its slot; others share the remaining slots
        let x = BeamHoppingPattern::from_rows(&[
            vec![1, 0, 0],
            vec![0, 1, 1],
            vec![0, 1, 1],
        ])
        .unwrap();
        let p = decoding_success_exact_small(&s, &x, 0).unwrap();
        assert_relative_eq!(p, 1.0);
    }

    #[test]
    fn exact_oracle_binomial_threshold() {
        // Interference threshold sits between k=0 and k=1 interferers, so
        // P_d equals the probability of zero interferers on the tagged RB.
        let mut s = small_scenario(2, 2, 1, 4);
        s.cells[0].demand = 2.0;
        s.cells[1].demand = 2.0;
        s.cells[1].activation = 0.5;
        // threshold high enough that a single interferer breaks decoding
        s.link.gamma_th_db = 8.0;
        // both cells in both slots -> b = [2, 2]
        let x = BeamHoppingPattern::from_rows(&[vec![1, 1], vec![1, 1]]).unwrap();
        let margin = decoding_margin(&s, 0);
        assert!(margin > 0.0 && margin < s.gains[(0, 1)], "threshold must sit below one interferer");
        let q = s.cells[1].activation / (s.link.n_r as f64 * 2.0);
        let expected = (1.0 - q) * (1.0 - q);
        let p = decoding_success_exact_small(&s, &x, 0).unwrap();
        assert_relative_eq!(p, expected, max_relative = 1e-12);
    }

    #[test]
    fn exact_oracle_dominates_markov_bound() {
        for seed in 0..8u64 {
            let mut s = small_scenario(4, 4, 2, 100 + seed);
            for c in &mut s.cells {
                c.demand = 5.0 + (seed as f64 % 3.0) * 7.0;
                c.activation = 0.2;
            }
            let b = vec![2usize; 4];
            let x = random_pattern_with_rows(4, 4, &b, seed);
            let pattern = BeamHoppingPattern::from_matrix(x.clone()).unwrap();
            let bounds = decoding_success_lower_bound(&s, &x, None).unwrap();
            for i in 0..4 {
                let exact = decoding_success_exact_small(&s, &pattern, i).unwrap();
                assert!(
                    exact >= bounds[i].raw - 1e-12,
                    "cell {i} seed {seed}: exact {exact} < bound {}",
                    bounds[i].raw
                );
            }
        }
    }

    #[test]
    fn exact_oracle_size_limits() {
        let s = small_scenario(7, 4, 2, 5);
        let x = BeamHoppingPattern::from_matrix(DMatrix::from_element(7, 4, 1.0)).unwrap();
        assert!(matches!(
            decoding_success_exact_small(&s, &x, 0),
            Err(Error::InstanceTooLarge(_))
        ));
    }

    #[test]
    fn success_report_is_product_of_parts() {
        let s = small_scenario(5, 6, 2, 6);
        let b = vec![2usize, 3, 1, 2, 4];
        let x = random_pattern_with_rows(5, 6, &b, 9);
        let bf: Vec<f64> = b.iter().map(|&v| v as f64).collect();
        let report = success_lower_bound(&s, &x, Some(&bf)).unwrap();
        let bounds = decoding_success_lower_bound(&s, &x, Some(&bf)).unwrap();
        for i in 0..5 {
            let p_a =
                collision_avoidance(s.cells[i].activation, s.cells[i].demand, s.link.n_r, b[i]).unwrap();
            assert_relative_eq!(report.cells[i].p_suc_low, p_a * bounds[i].clamped, max_relative = 1e-14);
        }
        assert!(report.min_p_suc <= report.mean_p_suc);
    }

    #[test]
    fn quadratic_matrix_diagonal_is_zero() {
        let s = small_scenario(6, 8, 2, 7);
        let (g_tilde, g) = quadratic_matrix(&s, &[2, 2, 3, 1, 2, 2]).unwrap();
        for i in 0..6 {
            assert_eq!(g_tilde[(i, i)], 0.0);
        }
        // shifted matrix is PSD with smallest eigenvalue ~ 0
        let eig = g.clone().symmetric_eigen();
        let lmin = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(lmin >= 0.0 && lmin <= 1e-8 * g.norm().max(1.0), "lambda_min = {lmin}");
    }

    #[test]
    fn quadratic_objective_identity() {
        let s = small_scenario(5, 8, 2, 8);
        let b = vec![2usize, 4, 1, 3, 2];
        let x = random_pattern_with_rows(5, 8, &b, 13);
        let bf: Vec<f64> = b.iter().map(|&v| v as f64).collect();
        let (g_tilde, g) = quadratic_matrix(&s, &b).unwrap();

        // sum_i P_a,i p_d_low,i = sum_i P_a,i - sum_t (x^t)' G_tilde x^t
        let bounds = decoding_success_lower_bound(&s, &x, Some(&bf)).unwrap();
        let mut lhs = 0.0;
        let mut pa_sum = 0.0;
        for i in 0..5 {
            let p_a =
                collision_avoidance(s.cells[i].activation, s.cells[i].demand, s.link.n_r, b[i]).unwrap();
            lhs += p_a * bounds[i].raw;
            pa_sum += p_a;
        }
        let mut quad_tilde = 0.0;
        let mut quad_shifted = 0.0;
        for t in 0..8 {
            let col = x.column(t);
            quad_tilde += (col.transpose() * &g_tilde * col)[(0, 0)];
            quad_shifted += (col.transpose() * &g * col)[(0, 0)];
        }
        assert_relative_eq!(lhs, pa_sum - quad_tilde, max_relative = 1e-10);

        // shift consistency: the shifted form differs by shift * sum_i b_i
        let sym = (&g_tilde + g_tilde.transpose()) * 0.5;
        let lmin = sym.clone().symmetric_eigen().eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        let shift = lmin - 1e-12 * sym.norm();
        let total_b: f64 = bf.iter().sum();
        assert_relative_eq!(quad_shifted, quad_tilde - shift * total_b, max_relative = 1e-9);
    }

    #[test]
    fn pattern_validation_and_feasibility() {
        assert!(BeamHoppingPattern::from_matrix(DMatrix::from_element(2, 2, 0.5)).is_err());
        let x = BeamHoppingPattern::from_rows(&[vec![1, 0, 1], vec![1, 0, 0]]).unwrap();
        assert_eq!(x.row_sums(), vec![2, 1]);
        assert_eq!(x.col_sums(), vec![2, 0, 1]);
        let f = x.feasibility(2);
        assert!(f.is_feasible());
        let g = x.feasibility(1);
        assert!(!g.is_feasible());
    }

    #[test]
    fn rounding_ties_go_up() {
        let m = DMatrix::from_row_slice(1, 3, &[0.49, 0.5, 0.51]);
        let p = BeamHoppingPattern::from_rounding(&m);
        assert_eq!(p.to_rows(), vec![vec![0, 1, 1]]);
    }

    #[test]
    fn report_csv_shape() {
        let s = small_scenario(3, 4, 2, 9);
        let x = random_pattern_with_rows(3, 4, &[2, 2, 2], 3);
        let mut report = success_lower_bound(&s, &x, None).unwrap();
        report.cells[0].mc = Some((0.9, 0.01));
        let csv = report.to_csv();
        assert!(csv.starts_with("# schema: beamhop-report-v1\n"));
        assert!(csv.contains("cell_id,p_a,p_d_low_raw,p_d_low,p_suc_low,p_suc_mc,mc_stderr"));
        assert!(csv.contains("# min_p_suc,"));
    }

    #[test]
    fn clamping_preserves_argmin_when_in_range() {
        let s = small_scenario(6, 6, 2, 10);
        let bvec = vec![2usize; 6];
        let x = random_pattern_with_rows(6, 6, &bvec, 17);
        let report = success_lower_bound(&s, &x, None).unwrap();
        let all_in_range = report.cells.iter().all(|c| (0.0..=1.0).contains(&c.p_d_low_raw));
        if all_in_range {
            let argmin_raw = report
                .cells
                .iter()
                .enumerate()
                .min_by(|a, b| {
                    (a.1.p_a * a.1.p_d_low_raw).partial_cmp(&(b.1.p_a * b.1.p_d_low_raw)).unwrap()
                })
                .unwrap()
                .0;
            let argmin_clamped = report
                .cells
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.p_suc_low.partial_cmp(&b.1.p_suc_low).unwrap())
                .unwrap()
                .0;
            assert_eq!(argmin_raw, argmin_clamped);
        }
    }

    #[test]
    fn evaluate_pattern_flags_dark_cells() {
        let s = small_scenario(3, 4, 2, 11);
        let x = BeamHoppingPattern::from_rows(&[
            vec![1, 1, 0, 0],
            vec![0, 0, 0, 0],
            vec![0, 0, 1, 1],
        ])
        .unwrap();
        let report = evaluate_pattern(&s, &x).unwrap();
        assert!(report.cells[1].never_illuminated);
        assert_eq!(report.cells[1].p_suc_low, 0.0);
        assert_eq!(report.min_p_suc, 0.0);
        // lit cells see no interference (no slot shared) and keep p_d = 1
        assert_relative_eq!(report.cells[0].p_d_low, 1.0);
        assert!(!report.cells[0].never_illuminated);
    }

    #[test]
    fn fractional_uniform_pattern_row_sums() {
        let x = uniform_fractional_pattern(&[2.0, 4.0], 8);
        assert_relative_eq!(x.row(0).sum(), 2.0);
        assert_relative_eq!(x.row(1).sum(), 4.0);
    }

    #[test]
    fn perturbed_pattern_keeps_row_sums_and_breaks_columns() {
        let b = [2.0, 4.0, 3.0];
        let x = perturbed_fractional_pattern(&b, 8, 1.0);
        for i in 0..3 {
            assert_relative_eq!(x.row(i).sum(), b[i], epsilon = 1e-12);
        }
        // columns must differ, otherwise the solvers cannot place cells
        // into distinct slots
        assert!((0..8).any(|t| (x[(0, t)] - x[(0, 0)]).abs() > 1e-3));
        assert_eq!(x, perturbed_fractional_pattern(&b, 8, 1.0));
    }
}
