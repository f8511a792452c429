use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::format::Instance;
use super::generate::{generate_instance, InstanceKind};
use crate::coloring::{balance, BalanceReport, ColoringParams};
use crate::verify::{bound_report, brute_force_min_discrepancy, OracleResult, ReportRow};
use crate::zonotope::PreprocessOptions;
use crate::Error;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// The random stream used everywhere a seed is given.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of run `index` under `master`: the `(index + 1)`-th SplitMix64 output.
pub fn run_seed(master: u64, index: u64) -> u64 {
    splitmix64(master.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub kind: InstanceKind,
    pub seed: u64,
    pub instance: Instance,
    pub report: BalanceReport,
    pub oracle: Option<OracleResult>,
    pub row: ReportRow,
}

/// Generate an instance from `seed` and balance it.
///
/// The instance is drawn from `ChaCha8Rng::seed_from_u64(seed)`; the coloring
/// uses seed `splitmix64(seed)`. `m = None` picks the kind's default.
pub fn run_instance(
    kind: InstanceKind,
    d: usize,
    m: Option<usize>,
    n: usize,
    seed: u64,
    params: &ColoringParams,
    oracle_max_n: usize,
) -> Result<RunOutcome, Error> {
    let m = m.unwrap_or_else(|| kind.default_m(d));
    let mut rng = seeded_rng(seed);
    let mut instance = generate_instance(kind, d, m, n, &mut rng)?;
    instance.comments[0].push_str(&format!(" seed={seed}"));
    let (z, fam, _) = instance.problem(PreprocessOptions::default())?;
    let mut report = balance(&z, &fam, params, splitmix64(seed))?;
    report.seed = seed;
    let oracle = if n <= oracle_max_n {
        Some(brute_force_min_discrepancy(&z, &fam)?)
    } else {
        None
    };
    let row = bound_report(kind.name(), &report, oracle.as_ref());
    Ok(RunOutcome {
        kind,
        seed,
        instance,
        report,
        oracle,
        row,
    })
}

/// A sweep over kinds, dimensions and seeds, with `n = d`.
#[derive(Debug, Clone)]
pub struct BenchGrid {
    pub kinds: Vec<InstanceKind>,
    pub dims: Vec<usize>,
    pub seeds: usize,
    pub master_seed: u64,
    /// Generators per dimension for non-cube kinds.
    pub m_factor: usize,
    pub params: ColoringParams,
    /// Compute the exhaustive optimum when `n` is at most this.
    pub oracle_max_n: usize,
}

impl BenchGrid {
    /// `(kind, d, seed)` for every run, in output order.
    pub fn runs(&self) -> Vec<(InstanceKind, usize, u64)> {
        let mut out = Vec::new();
        for &kind in &self.kinds {
            for &d in &self.dims {
                for _ in 0..self.seeds {
                    let idx = out.len() as u64;
                    out.push((kind, d, run_seed(self.master_seed, idx)));
                }
            }
        }
        out
    }
}

/// Execute every run of the grid in parallel; results keep run order.
pub fn bench(grid: &BenchGrid) -> Result<Vec<RunOutcome>, Error> {
    grid.runs()
        .into_par_iter()
        .map(|(kind, d, seed)| {
            let m = if kind.is_cube_like() { d } else { grid.m_factor * d };
            run_instance(kind, d, Some(m), d, seed, &grid.params, grid.oracle_max_n)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_values() {
        // First outputs of SplitMix64 seeded with 0.
        assert_eq!(run_seed(0, 0), 0xE220_A839_7B1D_CDAF);
        assert_eq!(run_seed(0, 1), 0x6E78_9E6A_A1B9_65F4);
        assert_eq!(run_seed(0, 2), 0x06C4_5D18_8009_454F);
    }

    #[test]
    fn grid_accounting_and_order() {
        let grid = BenchGrid {
            kinds: vec![InstanceKind::Cube, InstanceKind::Duplicated],
            dims: vec![2, 4],
            seeds: 3,
            master_seed: 9,
            m_factor: 2,
            params: ColoringParams::default(),
            oracle_max_n: 4,
        };
        let out = bench(&grid).unwrap();
        assert_eq!(out.len(), 2 * 2 * 3);
        let runs = grid.runs();
        for (o, r) in out.iter().zip(&runs) {
            assert_eq!((o.kind, o.report.d, o.seed), (r.0, r.1, r.2));
        }
        for o in out.iter().filter(|o| o.kind == InstanceKind::Duplicated) {
            assert_eq!(o.oracle.as_ref().unwrap().opt, 0.0);
            assert!(o.row.to_csv().ends_with(",0,NA"));
        }
        let again = bench(&grid).unwrap();
        let rows = |v: &[RunOutcome]| v.iter().map(|o| o.row.to_csv()).collect::<Vec<_>>();
        assert_eq!(rows(&out), rows(&again));
    }
}
