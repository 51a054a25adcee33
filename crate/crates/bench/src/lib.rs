//! Fixed-seed fixtures shared by the criterion benches.

use karcher_core::experiment::{generate_ensemble, ExperimentSpec, SpectrumSpec};
use karcher_core::{arithmetic_mean_init, Ensemble, SpdMatrix};

/// Ensemble of `n` matrices of size `p` with uniform(1, 10) spectra, plus
/// its arithmetic-mean starting point.
pub fn uniform_fixture(n: usize, p: usize, seed: u64) -> (Ensemble, SpdMatrix) {
    let spec = ExperimentSpec {
        n,
        p,
        spectrum: SpectrumSpec::uniform(1.0, 10.0),
        scale_first_by: 1.0,
        runs: 1,
        seed,
        solvers: ExperimentSpec::default_solvers(),
    };
    let e = generate_ensemble(&spec, &mut spec.run_rng(0)).expect("valid fixture");
    let x0 = arithmetic_mean_init(&e).expect("valid fixture");
    (e, x0)
}
