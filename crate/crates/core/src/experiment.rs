//! Synthetic ensembles and the convergence-study runner.
//!
//! Each ensemble member is `A_i = U_i S_i U_iᵀ` where `U_i` spans the
//! columns of a matrix with i.i.d. uniform(0, 1) entries and `S_i` is drawn
//! from a [`SpectrumSpec`].
//!
//! Randomness comes from ChaCha8 seeded with `ExperimentSpec::seed`; run `r`
//! uses stream `r` of that generator, so runs are independent of each other
//! and of the order in which they execute.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::{compose, sym_eig};
use crate::error::{KarcherError, Result};
use crate::objective::Ensemble;
use crate::solvers::{arithmetic_mean_init, solve, SolverConfig, SolverKind, Termination};
use crate::spd::SpdMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SpectrumKind {
    /// Independent uniform draws on `[lo, hi]` for every matrix.
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// `10^0, 10^a, ..., 10^{(p-1)a}`.
    Geometric {
        a: f64,
    },
    Explicit {
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSpec {
    pub kind: SpectrumKind,
    /// Defaults to the experiment's `p`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
}

impl SpectrumSpec {
    pub fn uniform(lo: f64, hi: f64) -> Self {
        Self {
            kind: SpectrumKind::Uniform { lo, hi },
            dim: None,
        }
    }

    pub fn geometric(a: f64) -> Self {
        Self {
            kind: SpectrumKind::Geometric { a },
            dim: None,
        }
    }

    pub fn explicit(values: Vec<f64>) -> Self {
        Self {
            kind: SpectrumKind::Explicit { values },
            dim: None,
        }
    }

    fn validate(&self, p: usize) -> Result<()> {
        let bad = |msg: String| Err(KarcherError::InvalidConfig(msg));
        if let Some(dim) = self.dim {
            if dim != p {
                return bad(format!("spectrum.dim = {dim} differs from p = {p}"));
            }
        }
        match &self.kind {
            SpectrumKind::Uniform { lo, hi } => {
                if !(*lo > 0.0 && lo < hi && hi.is_finite()) {
                    return bad(format!(
                        "spectrum.kind.uniform needs 0 < lo < hi, got [{lo}, {hi}]"
                    ));
                }
            }
            SpectrumKind::Geometric { a } => {
                if !(*a > 0.0 && a.is_finite()) {
                    return bad(format!(
                        "spectrum.kind.geometric.a must be positive, got {a}"
                    ));
                }
            }
            SpectrumKind::Explicit { values } => {
                if values.len() != p {
                    return bad(format!(
                        "spectrum.kind.explicit.values has {} entries, expected p = {p}",
                        values.len()
                    ));
                }
                if let Some(v) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
                    return bad(format!(
                        "spectrum.kind.explicit.values contains non-positive {v}"
                    ));
                }
            }
        }
        Ok(())
    }

    /// Diagonal of `S_i`.
    pub fn sample<R: Rng>(&self, p: usize, rng: &mut R) -> Vec<f64> {
        match &self.kind {
            SpectrumKind::Uniform { lo, hi } => {
                (0..p).map(|_| lo + (hi - lo) * rng.gen::<f64>()).collect()
            }
            SpectrumKind::Geometric { a } => (0..p).map(|k| 10f64.powf(k as f64 * a)).collect(),
            SpectrumKind::Explicit { values } => values.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    /// Column name in the report; generated from kind and step size if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub kind: SolverKind,
    #[serde(default)]
    pub config: SolverConfig,
}

impl SolverSpec {
    pub fn new(kind: SolverKind, config: SolverConfig) -> Self {
        Self {
            id: None,
            kind,
            config,
        }
    }

    pub fn label(&self) -> String {
        match (&self.id, self.kind) {
            (Some(id), _) => id.clone(),
            (None, SolverKind::Mm) => "mm".into(),
            (None, kind) => format!("{}_nu_{}", kind.as_str().replace('-', "_"), self.config.nu),
        }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub n: usize,
    pub p: usize,
    pub spectrum: SpectrumSpec,
    /// Factor applied to `A_1` only.
    #[serde(default = "one")]
    pub scale_first_by: f64,
    pub runs: usize,
    pub seed: u64,
    pub solvers: Vec<SolverSpec>,
}

impl ExperimentSpec {
    /// MM, line-search GD for `ν ∈ {1/4, 1/2, 1, 2, 4}` with `c = 1/2`, and
    /// fixed-step GD with `ν = 1`.
    pub fn default_solvers() -> Vec<SolverSpec> {
        let mut out = vec![SolverSpec::new(SolverKind::Mm, SolverConfig::default())];
        for nu in [0.25, 0.5, 1.0, 2.0, 4.0] {
            out.push(SolverSpec::new(
                SolverKind::GdLs,
                SolverConfig::default().with_nu(nu),
            ));
        }
        out.push(SolverSpec::new(
            SolverKind::GdFixed,
            SolverConfig::default(),
        ));
        out
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(KarcherError::InvalidConfig(msg));
        if self.n < 1 {
            return bad("n must be at least 1".into());
        }
        if self.p < 1 {
            return bad("p must be at least 1".into());
        }
        if self.runs < 1 {
            return bad("runs must be at least 1".into());
        }
        if !(self.scale_first_by > 0.0 && self.scale_first_by.is_finite()) {
            return bad(format!(
                "scale_first_by must be positive, got {}",
                self.scale_first_by
            ));
        }
        self.spectrum.validate(self.p)?;
        if self.solvers.is_empty() {
            return bad("solvers must list at least one solver".into());
        }
        let mut seen = std::collections::HashSet::new();
        for (i, s) in self.solvers.iter().enumerate() {
            s.config
                .validate()
                .map_err(|e| KarcherError::InvalidConfig(format!("solvers[{i}].config: {e}")))?;
            let label = s.label();
            if label.is_empty() || label.contains(',') || label.contains('\n') {
                return bad(format!(
                    "solvers[{i}].id '{label}' is not a valid CSV column name"
                ));
            }
            if !seen.insert(label.clone()) {
                return bad(format!("solvers[{i}].id '{label}' is duplicated"));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)
            .map_err(|e| KarcherError::InvalidConfig(format!("experiment spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    /// Generator for run `run`.
    pub fn run_rng(&self, run: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(run as u64);
        rng
    }
}

/// Orthonormal basis of the column space of a `p x p` matrix with uniform(0, 1)
/// entries: the eigenvectors of `M Mᵀ`, i.e. its left singular vectors.
pub fn random_orthogonal<R: Rng>(p: usize, rng: &mut R) -> Array2<f64> {
    let m = Array2::from_shape_simple_fn((p, p), || rng.gen::<f64>());
    let gram = crate::spd::symmetrize(&m.dot(&m.t()));
    sym_eig(&gram)
        .expect("Gram matrix of a finite matrix is symmetric")
        .vectors
}

/// SPD matrix with eigenvalues drawn uniformly from `[lo, hi]` in a random
/// orthonormal basis.
pub fn random_spd<R: Rng>(p: usize, lo: f64, hi: f64, rng: &mut R) -> SpdMatrix {
    let u = random_orthogonal(p, rng);
    let s: Vec<f64> = (0..p).map(|_| lo + (hi - lo) * rng.gen::<f64>()).collect();
    SpdMatrix::new(compose(&u, &s)).expect("positive spectrum")
}

/// Symmetric matrix with entries uniform on `[-scale, scale]`.
pub fn random_symmetric<R: Rng>(p: usize, scale: f64, rng: &mut R) -> Array2<f64> {
    let m = Array2::from_shape_simple_fn((p, p), || scale * (2.0 * rng.gen::<f64>() - 1.0));
    crate::spd::symmetrize(&m)
}

/// Invertible (generally non-symmetric) matrix `U diag(s) Vᵀ` with singular
/// values in `[0.5, 2]`.
pub fn random_invertible<R: Rng>(p: usize, rng: &mut R) -> Array2<f64> {
    let u = random_orthogonal(p, rng);
    let v = random_orthogonal(p, rng);
    let s = Array2::from_diag(&ndarray::Array1::from_shape_simple_fn(p, || {
        0.5 + 1.5 * rng.gen::<f64>()
    }));
    u.dot(&s).dot(&v.t())
}

/// Draws one ensemble for `spec`.
pub fn generate_ensemble<R: Rng>(spec: &ExperimentSpec, rng: &mut R) -> Result<Ensemble> {
    spec.validate()?;
    let p = spec.p;
    let mut mats = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let u = random_orthogonal(p, rng);
        let mut s = spec.spectrum.sample(p, rng);
        if i == 0 {
            s.iter_mut().for_each(|v| *v *= spec.scale_first_by);
        }
        mats.push(SpdMatrix::new(compose(&u, &s))?);
    }
    Ensemble::new(mats)
}

/// One solver's trajectory within one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunTrace {
    pub log_error: Vec<f64>,
    pub grad_norm: Vec<f64>,
    pub objective: Vec<f64>,
    pub termination: Termination,
    pub iters_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub run: usize,
    /// One entry per solver, in spec order. Failures carry the error text.
    pub solvers: Vec<std::result::Result<RunTrace, String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub solver_ids: Vec<String>,
    pub runs: Vec<RunReport>,
    /// `mean_log_error[s][k]`: mean over successful runs of solver `s`'s
    /// log-error at iteration `k`. Shorter traces are padded with their final
    /// value; all columns share one length.
    pub mean_log_error: Vec<Vec<f64>>,
}

impl ExperimentReport {
    pub fn iterations(&self) -> usize {
        self.mean_log_error.first().map_or(0, Vec::len)
    }

    pub fn column(&self, id: &str) -> Option<&[f64]> {
        let s = self.solver_ids.iter().position(|x| x == id)?;
        Some(&self.mean_log_error[s])
    }

    /// Successful traces of solver `s` across runs.
    pub fn traces(&self, s: usize) -> impl Iterator<Item = &RunTrace> + '_ {
        self.runs
            .iter()
            .filter_map(move |r| r.solvers[s].as_ref().ok())
    }

    /// CSV with header `iter,<id_1>,<id_2>,...` and 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter");
        for id in &self.solver_ids {
            out.push(',');
            out.push_str(id);
        }
        out.push('\n');
        for k in 0..self.iterations() {
            write!(out, "{k}").unwrap();
            for col in &self.mean_log_error {
                out.push(',');
                out.push_str(&format_f64(col[k]));
            }
            out.push('\n');
        }
        out
    }
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn format_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

fn run_one(spec: &ExperimentSpec, run: usize) -> RunReport {
    let mut rng = spec.run_rng(run);
    let setup =
        generate_ensemble(spec, &mut rng).and_then(|e| arithmetic_mean_init(&e).map(|x0| (e, x0)));
    let solvers = match setup {
        Ok((e, x0)) => spec
            .solvers
            .iter()
            .map(|s| {
                solve(s.kind, &e, &s.config, &x0)
                    .map(|r| RunTrace {
                        log_error: r.trace.iter().map(|t| t.log_error).collect(),
                        grad_norm: r.trace.iter().map(|t| t.grad_norm).collect(),
                        objective: r.trace.iter().map(|t| t.objective).collect(),
                        termination: r.termination,
                        iters_used: r.iters_used,
                    })
                    .map_err(|err| err.to_string())
            })
            .collect(),
        Err(err) => vec![Err(format!("ensemble generation: {err}")); spec.solvers.len()],
    };
    RunReport { run, solvers }
}

/// Runs every solver on `spec.runs` independent ensembles. Runs execute in
/// parallel; the report does not depend on scheduling.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let runs: Vec<RunReport> = (0..spec.runs)
        .into_par_iter()
        .map(|r| run_one(spec, r))
        .collect();
    let solver_ids: Vec<String> = spec.solvers.iter().map(SolverSpec::label).collect();

    let len = runs
        .iter()
        .flat_map(|r| r.solvers.iter())
        .filter_map(|s| s.as_ref().ok())
        .map(|t| t.log_error.len())
        .max()
        .unwrap_or(0);
    let mean_log_error = (0..solver_ids.len())
        .map(|s| {
            let traces: Vec<&Vec<f64>> = runs
                .iter()
                .filter_map(|r| r.solvers[s].as_ref().ok())
                .map(|t| &t.log_error)
                .collect();
            (0..len)
                .map(|k| {
                    if traces.is_empty() {
                        return f64::NAN;
                    }
                    let sum: f64 = traces
                        .iter()
                        .map(|t| t.get(k).or(t.last()).copied().unwrap_or(f64::NAN))
                        .sum();
                    sum / traces.len() as f64
                })
                .collect()
        })
        .collect();
    Ok(ExperimentReport {
        solver_ids,
        runs,
        mean_log_error,
    })
}

/// Writes `<stem>.csv` and the `<stem>.json` spec sidecar.
pub fn write_report(
    spec: &ExperimentSpec,
    report: &ExperimentReport,
    stem: &Path,
) -> std::io::Result<(PathBuf, PathBuf)> {
    let csv = stem.with_extension("csv");
    let json = stem.with_extension("json");
    if let Some(dir) = csv.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(&csv, report.to_csv())?;
    fs::write(&json, spec.to_json() + "\n")?;
    Ok((csv, json))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spd::frobenius_norm;

    fn spec(n: usize, p: usize, spectrum: SpectrumSpec) -> ExperimentSpec {
        ExperimentSpec {
            n,
            p,
            spectrum,
            scale_first_by: 1.0,
            runs: 1,
            seed: 7,
            solvers: vec![SolverSpec::new(SolverKind::Mm, SolverConfig::default())],
        }
    }

    fn cond(a: &SpdMatrix) -> f64 {
        let e = a.eig().unwrap();
        e.max_value() / e.min_value()
    }

    #[test]
    fn orthogonal_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = random_orthogonal(1, &mut rng);
        assert_eq!(u[[0, 0]].abs(), 1.0);
        for p in [2, 5, 10, 40] {
            let u = random_orthogonal(p, &mut rng);
            let defect = frobenius_norm(&(u.t().dot(&u) - Array2::<f64>::eye(p)));
            assert!(defect < 1e-12, "p = {p}: {defect:e}");
        }
        let a = random_orthogonal(6, &mut ChaCha8Rng::seed_from_u64(3));
        let b = random_orthogonal(6, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
    }

    #[test]
    fn uniform_condition_bound() {
        let s = spec(10, 10, SpectrumSpec::uniform(1.0, 10.0));
        let e = generate_ensemble(&s, &mut s.run_rng(0)).unwrap();
        assert_eq!(e.len(), 10);
        for a in e.matrices() {
            assert!(cond(a) <= 10.0 * (1.0 + 1e-9));
        }
    }

    #[test]
    fn geometric_condition_number() {
        let s = spec(3, 10, SpectrumSpec::geometric(0.3));
        let e = generate_ensemble(&s, &mut s.run_rng(0)).unwrap();
        let expected = 10f64.powf(2.7);
        for a in e.matrices() {
            assert!((cond(a) / expected - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn explicit_one_by_one() {
        let s = spec(1, 1, SpectrumSpec::explicit(vec![2.0]));
        let e = generate_ensemble(&s, &mut s.run_rng(0)).unwrap();
        assert!((e.matrices()[0].as_array()[[0, 0]] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn first_matrix_is_scaled() {
        let mut s = spec(3, 4, SpectrumSpec::explicit(vec![1.0, 2.0, 3.0, 4.0]));
        s.scale_first_by = 1e4;
        let e = generate_ensemble(&s, &mut s.run_rng(0)).unwrap();
        let top = e.matrices()[0].eig().unwrap().max_value();
        assert!((top - 4e4).abs() < 1e-9);
        assert!((e.matrices()[1].eig().unwrap().max_value() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn spec_validation_names_fields() {
        let mut s = spec(2, 3, SpectrumSpec::uniform(10.0, 1.0));
        let err = s.validate().unwrap_err().to_string();
        assert!(err.contains("uniform"), "{err}");
        s.spectrum = SpectrumSpec::explicit(vec![1.0]);
        assert!(s.validate().unwrap_err().to_string().contains("explicit"));
        s.spectrum = SpectrumSpec::geometric(0.5);
        s.runs = 0;
        assert!(s.validate().unwrap_err().to_string().contains("runs"));
        s.runs = 1;
        s.solvers.push(s.solvers[0].clone());
        assert!(s.validate().unwrap_err().to_string().contains("duplicated"));
    }

    #[test]
    fn spec_json_round_trip() {
        let mut s = spec(10, 10, SpectrumSpec::uniform(1.0, 10.0));
        s.solvers = ExperimentSpec::default_solvers();
        let back = ExperimentSpec::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
        let minimal = r#"{"n": 2, "p": 2, "spectrum": {"kind": {"geometric": {"a": 0.5}}},
            "runs": 1, "seed": 0, "solvers": [{"kind": "gd-ls", "config": {"nu": 2.0}}]}"#;
        let m = ExperimentSpec::from_json(minimal).unwrap();
        assert_eq!(m.scale_first_by, 1.0);
        assert_eq!(m.solvers[0].label(), "gd_ls_nu_2");
        assert!(ExperimentSpec::from_json(r#"{"n": 2}"#).is_err());
    }

    #[test]
    fn single_matrix_run_is_short() {
        let mut s = spec(1, 3, SpectrumSpec::uniform(1.0, 10.0));
        s.solvers = ExperimentSpec::default_solvers();
        let report = run_experiment(&s).unwrap();
        assert_eq!(report.iterations(), 1);
        let csv = report.to_csv();
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.starts_with("iter,mm,gd_ls_nu_0.25,"));
    }
}
