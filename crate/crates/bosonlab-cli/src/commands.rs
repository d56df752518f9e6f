use crate::config::RunConfig;
use crate::error::{CliError, EXIT_HYPOTHESIS, EXIT_PASS, EXIT_USAGE, EXIT_VIOLATION};
use crate::rundir::{f, write_csv, write_json};
use bosonlab::agsp::{Pipeline, TILDE_BUDGET};
use bosonlab::bounds::{
    binomial_lemma_check, bh_concentration_check, commutator_identity_check, fit_concentration_with,
    hopping_inequality_check, lambda_bound_check, moment_suite, phi4_concentration_check, sequence_lemma_check,
    tail_curve, tradeoff_check, BhCheckOptions, FitOptions,
};
use bosonlab::entanglement::{area_law_report, eckart_young_check, entanglement_profile, mps_checks, mps_compress};
use bosonlab::fock::{number_op, phi_op, FockSpace, SparseOperator};
use bosonlab::linalg::random_unit_vector;
use bosonlab::models::{build_hamiltonian, Family, ModelSpec};
use bosonlab::report::{CheckReport, Status};
use bosonlab::spectra::{energy, fock_start_vector, ground_state_with, subset_energy_check, SpectralData};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Solve,
    Tail,
    Suite,
    Agsp,
    Entangle,
}

pub const SUITE_CHECKS: &[&str] = &[
    "commutator",
    "lambda",
    "binomial",
    "sequence",
    "hopping",
    "tradeoff",
    "moments",
    "concentration",
    "subset",
    "variational",
];

#[derive(Debug, Default, Serialize)]
pub struct Outcome {
    pub reports: Vec<CheckReport>,
    pub metrics: BTreeMap<String, f64>,
    pub files: Vec<String>,
    #[serde(skip)]
    pub timings: BTreeMap<String, f64>,
}

impl Outcome {
    fn time<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.timings.insert(name.into(), t.elapsed().as_secs_f64());
        out
    }

    pub fn exit_code(&self) -> i32 {
        exit_code_of(&self.reports)
    }
}

pub fn exit_code_of(reports: &[CheckReport]) -> i32 {
    let st: Vec<Status> = reports.iter().map(|r| r.status()).collect();
    if st.contains(&Status::BoundViolation) {
        EXIT_VIOLATION
    } else if st.contains(&Status::HypothesisFailed) {
        EXIT_HYPOTHESIS
    } else {
        EXIT_PASS
    }
}

/// Worst of several exit codes: usage, then violation, then hypothesis.
pub fn combine_exit(codes: impl IntoIterator<Item = i32>) -> i32 {
    let rank = |c: i32| match c {
        EXIT_USAGE => 3,
        EXIT_VIOLATION => 2,
        EXIT_HYPOTHESIS => 1,
        _ => 0,
    };
    codes.into_iter().max_by_key(|&c| rank(c)).unwrap_or(EXIT_PASS)
}

const C16: u128 = 16;

/// Up-front estimate of peak memory, with the step that dominates it.
pub fn estimate_bytes(cmd: Command, cfg: &RunConfig) -> Result<(String, u128), CliError> {
    let space = cfg.space()?;
    let dim = space.cutoffs().iter().map(|&c| c as u128 + 1).product::<u128>();
    let n_terms = cfg.model.build()?.terms.len() as u128;
    let mut steps: Vec<(String, u128)> = Vec::new();
    if dim <= cfg.solver.dense_threshold as u128 {
        steps.push((format!("dense eigendecomposition of dimension {dim}"), 3 * C16 * dim * dim));
    } else {
        let basis = (2 * cfg.solver.n_eigs as u128 + 30).max(48);
        let csr = dim * (2 * n_terms + 1) * 24;
        steps.push((format!("Krylov basis of {basis} vectors at dimension {dim}"), C16 * dim * basis + csr));
    }
    match cmd {
        Command::Entangle => {
            for cut in 1..space.n_sites() {
                let dl = space.stride(cut) as u128;
                let dr = dim / dl;
                let k = dl.min(dr);
                steps.push((format!("dense SVD of the {dl}×{dr} reshape"), C16 * (2 * dl * dr + dl * k + k * dr)));
            }
        }
        Command::Agsp => {
            let t = TILDE_BUDGET as u128;
            steps.push(("dense spectrum of the filtered Hamiltonian".into(), 3 * C16 * t * t));
            steps.push(("ambient Hamiltonian, dense".into(), 2 * C16 * dim * dim.min(4096)));
        }
        Command::Suite => {
            steps.push(("dense hopping check".into(), 3 * C16 * 25 * 25));
        }
        _ => {}
    }
    Ok(steps.into_iter().max_by_key(|s| s.1).unwrap())
}

pub fn memory_guard(cmd: Command, cfg: &RunConfig) -> Result<(), CliError> {
    let (what, needed) = estimate_bytes(cmd, cfg)?;
    let budget = cfg.limits.memory_bytes;
    if needed > budget as u128 {
        return Err(CliError::Memory { what, needed: needed.min(u64::MAX as u128) as u64, budget });
    }
    Ok(())
}

struct Solved {
    spec: ModelSpec,
    space: FockSpace,
    h: SparseOperator,
    sd: SpectralData,
}

fn solve_model(cfg: &RunConfig, out: &mut Outcome) -> Result<Solved, CliError> {
    let spec = cfg.model.build()?;
    let space = cfg.space()?;
    let h = out.time("build", || build_hamiltonian(&spec, &space))?;
    let mut opts = cfg.solve_options();
    if space.dim() > opts.dense_threshold {
        opts.start = Some(fock_start_vector(&space, opts.seed));
    }
    let sd = out.time("solve", || ground_state_with(&h, &opts))?;
    let mut rep = CheckReport::new("solve");
    for (i, &(e, r)) in sd.low_eigs.iter().enumerate() {
        rep.le(format!("residual_{i}"), r, cfg.solver.tol * e.abs().max(1.0), 1e-6, 1e-14);
    }
    rep.info("e0", sd.e0, f64::NAN, &sd.solver_meta.method);
    rep.info("gap", sd.gap, f64::NAN, if sd.degenerate { "degenerate" } else { "" });
    out.metrics.insert("dim".into(), space.dim() as f64);
    out.metrics.insert("e0".into(), sd.e0);
    out.metrics.insert("gap".into(), sd.gap);
    out.reports.push(rep);
    Ok(Solved { spec, space, h, sd })
}

#[derive(Serialize)]
struct SpectrumOut<'a> {
    dim: usize,
    e0: f64,
    gap: f64,
    degenerate: bool,
    low_eigs: &'a [(f64, f64)],
    solver: &'a bosonlab::spectra::SolverMeta,
}

pub fn run(cmd: Command, cfg: &RunConfig, dir: &Path, out: &mut Outcome) -> Result<(), CliError> {
    match cmd {
        Command::Solve => cmd_solve(cfg, dir, out),
        Command::Tail => cmd_tail(cfg, dir, out),
        Command::Suite => cmd_suite(cfg, dir, out),
        Command::Agsp => cmd_agsp(cfg, dir, out),
        Command::Entangle => cmd_entangle(cfg, dir, out),
    }
}

fn cmd_solve(cfg: &RunConfig, dir: &Path, out: &mut Outcome) -> Result<(), CliError> {
    let s = solve_model(cfg, out)?;
    let sd = &s.sd;
    let so = SpectrumOut {
        dim: s.space.dim(),
        e0: sd.e0,
        gap: sd.gap,
        degenerate: sd.degenerate,
        low_eigs: &sd.low_eigs,
        solver: &sd.solver_meta,
    };
    write_json(&dir.join("spectrum.json"), &so)?;
    let rows: Vec<Vec<String>> =
        sd.low_eigs.iter().enumerate().map(|(i, &(e, r))| vec![i.to_string(), f(e), f(r)]).collect();
    write_csv(&dir.join("eigs.csv"), &["index", "energy", "residual"], &rows)?;
    out.files.extend(["spectrum.json".into(), "eigs.csv".into()]);
    Ok(())
}

fn cmd_tail(cfg: &RunConfig, dir: &Path, out: &mut Outcome) -> Result<(), CliError> {
    let s = solve_model(cfg, out)?;
    let site = cfg.tail.site;
    let tail = tail_curve(&s.sd.ground_vector, &s.space, site)?;
    let rows: Vec<Vec<String>> = tail.iter().enumerate().map(|(n, &p)| vec![n.to_string(), f(p)]).collect();
    write_csv(&dir.join("tail.csv"), &["N", "p"], &rows)?;
    out.files.push("tail.csv".into());
    let pts: Vec<(f64, f64)> = tail.iter().enumerate().map(|(n, &p)| (n as f64, p)).collect();
    let opts = FitOptions { floor: cfg.tail.floor, n_min: cfg.tail.n_min, ..Default::default() };
    let mut fit_rep = CheckReport::new("tail_fit");
    match out.time("fit", || fit_concentration_with(&pts, &opts)) {
        Ok(fit) => {
            write_json(&dir.join("fit.json"), &fit)?;
            out.files.push("fit.json".into());
            out.metrics.insert("fit_inv_a".into(), fit.inv_a);
            out.metrics.insert("fit_b".into(), fit.b);
            out.metrics.insert("fit_c".into(), fit.c);
            fit_rep.info("inv_a", fit.inv_a, f64::NAN, format!("residual {:.3e}", fit.residual));
        }
        Err(e) => fit_rep.skip("fit", e.to_string()),
    }
    out.reports.push(fit_rep);
    out.reports.push(concentration(&s)?);
    Ok(())
}

fn concentration(s: &Solved) -> Result<CheckReport, CliError> {
    Ok(match s.spec.family {
        Family::BoseHubbardClass => bh_concentration_check(&s.spec, &s.sd, &s.space, &BhCheckOptions::default())?,
        Family::Phi4Class => phi4_concentration_check(&s.spec, &s.sd, &s.space)?,
        Family::Explicit => CheckReport::hypothesis_failed("concentration", "no bound for explicit models"),
    })
}

fn variational(s: &Solved, seed: u64) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = CheckReport::new("variational");
    let tol = 1e-10 * s.sd.e0.abs().max(1.0);
    let worst = (0..100)
        .map(|_| energy(&s.h, &random_unit_vector(s.space.dim(), &mut rng)))
        .fold(f64::INFINITY, f64::min);
    rep.le("e0_below_random_energy", s.sd.e0, worst, 0.0, tol);
    rep
}

fn subset_chain(s: &Solved) -> Result<CheckReport, CliError> {
    let n = s.space.n_sites();
    let mut rep = CheckReport::new("subset_energy");
    for k in 1..n {
        let x: Vec<usize> = (0..k).collect();
        let xb: Vec<usize> = (0..=k).collect();
        let r = subset_energy_check(&s.spec, &s.space, &x, &xb)?;
        for mut row in r.rows {
            row.name = format!("{}_{k}", row.name);
            rep.rows.push(row);
        }
    }
    Ok(rep)
}

fn suite_check(name: &str, cfg: &RunConfig, s: &Solved) -> Result<CheckReport, CliError> {
    let sc = &cfg.suite;
    Ok(match name {
        "commutator" => commutator_identity_check(sc.max_mn, 1e-9)?,
        "lambda" => lambda_bound_check(sc.lambda_s),
        "binomial" => binomial_lemma_check(sc.binomial_m),
        "sequence" => {
            let x: Vec<f64> = (0..12).map(|m| 0.7f64.powi(m)).collect();
            sequence_lemma_check(&x, 0.25, 20, cfg.solver.seed)?
        }
        "hopping" => {
            let space = FockSpace::uniform(2, 4)?;
            let mut rep = hopping_inequality_check(&space, &[0, 1, 1], 1)?;
            rep.merge(hopping_inequality_check(&space, &[0, 0, 1], 2)?);
            rep
        }
        "tradeoff" => {
            let o = match s.spec.family {
                Family::Phi4Class => phi_op(&s.space, 0)?,
                _ => number_op(&s.space, 0)?,
            };
            tradeoff_check(&s.h, &s.sd, &o)?
        }
        "moments" => moment_suite(&s.spec, &s.sd, &s.space, sc.moment_s)?,
        "concentration" => concentration(s)?,
        "subset" => subset_chain(s)?,
        "variational" => variational(s, cfg.solver.seed),
        other => return Err(CliError::Usage(format!("unknown check `{other}`"))),
    })
}

pub fn expand_checks(names: &[String]) -> Result<Vec<String>, CliError> {
    let mut out = Vec::new();
    for n in names {
        if n == "all" {
            out.extend(SUITE_CHECKS.iter().map(|s| s.to_string()));
        } else if SUITE_CHECKS.contains(&n.as_str()) {
            out.push(n.clone());
        } else {
            return Err(CliError::Usage(format!("unknown check `{n}`; expected one of {} or all", SUITE_CHECKS.join(", "))));
        }
    }
    out.dedup();
    Ok(out)
}

fn cmd_suite(cfg: &RunConfig, dir: &Path, out: &mut Outcome) -> Result<(), CliError> {
    let names = expand_checks(&cfg.suite.checks)?;
    let s = solve_model(cfg, out)?;
    let results: Vec<(String, Result<CheckReport, CliError>, f64)> = names
        .par_iter()
        .map(|n| {
            let t = Instant::now();
            let r = suite_check(n, cfg, &s);
            (n.clone(), r, t.elapsed().as_secs_f64())
        })
        .collect();
    let mut rows = Vec::new();
    for (name, r, secs) in results {
        out.timings.insert(format!("check_{name}"), secs);
        let rep = match r {
            Ok(rep) => rep,
            Err(CliError::Lib(bosonlab::Error::Hypothesis(why))) => CheckReport::hypothesis_failed(&name, why),
            Err(e) => return Err(e),
        };
        rows.push(vec![
            name,
            format!("{:?}", rep.status()),
            rep.asserted().to_string(),
            rep.violations().len().to_string(),
        ]);
        out.reports.push(rep);
    }
    write_csv(&dir.join("suite.csv"), &["check", "status", "asserted", "violations"], &rows)?;
    out.files.push("suite.csv".into());
    Ok(())
}

fn cmd_agsp(cfg: &RunConfig, dir: &Path, out: &mut Outcome) -> Result<(), CliError> {
    let pc = cfg.pipeline()?;
    let p = out.time("pipeline", || Pipeline::run(&pc))?;
    let summary = p.summary()?;
    write_json(&dir.join("pipeline.json"), &summary)?;
    out.files.push("pipeline.json".into());
    out.metrics.insert("total_displacement".into(), summary.total_displacement);
    out.metrics.insert("gap_tilde".into(), summary.cutoff.gap_tilde);
    out.metrics.insert("eps1".into(), summary.cutoff.eps1);
    out.reports.push(p.checks());
    let mut rows = Vec::new();
    let mut certs = Vec::new();
    for &m in &cfg.agsp.degrees {
        let c = out.time(&format!("certificate_m{m}"), || p.agsp_certificate(m, cfg.solver.seed))?;
        rows.push(vec![
            m.to_string(),
            f(c.eps_k),
            f(c.eps_k_power),
            f(c.eps_bound),
            f(c.delta_k),
            f(c.ln_dk_bound),
            c.dk_numeric.map(|d| d.to_string()).unwrap_or_default(),
            c.sr_product.to_string(),
            c.bootstrap.as_ref().map(|b| b.gate_ok.to_string()).unwrap_or_default(),
        ]);
        let mut rep = c.checks.clone();
        rep.check = format!("agsp_m{m}");
        out.reports.push(rep);
        certs.push(c);
    }
    write_csv(
        &dir.join("certificate.csv"),
        &["m", "eps_k", "eps_k_power", "eps_bound", "delta_k", "ln_dk_bound", "dk_numeric", "sr_product", "bootstrap_gate"],
        &rows,
    )?;
    write_json(&dir.join("certificate.json"), &certs)?;
    out.files.extend(["certificate.csv".into(), "certificate.json".into()]);
    Ok(())
}

fn cmd_entangle(cfg: &RunConfig, dir: &Path, out: &mut Outcome) -> Result<(), CliError> {
    let s = solve_model(cfg, out)?;
    let n = s.space.n_sites();
    if n < 2 {
        return Err(CliError::Config("entangle needs at least two sites".into()));
    }
    let psi = &s.sd.ground_vector;
    let profile = out.time("schmidt", || entanglement_profile(psi, &s.space))?;
    let rows: Vec<Vec<String>> = profile
        .iter()
        .map(|sp| vec![sp.cut.to_string(), f(sp.entropy()), f(sp.entropy_bits()), sp.rank.to_string()])
        .collect();
    write_csv(&dir.join("entropy.csv"), &["cut", "entropy_nats", "entropy_bits", "schmidt_rank"], &rows)?;
    let mut rows = Vec::new();
    for d in 1..=cfg.entangle.max_bond {
        let mps = out.time(&format!("mps_D{d}"), || mps_compress(psi, &s.space, d))?;
        let sum: f64 = mps.deltas.iter().sum();
        let worst = mps.reduced_distances.iter().copied().fold(0.0, f64::max);
        rows.push(vec![d.to_string(), f(sum), f(mps.distance), f((2.0 * sum).sqrt()), f(worst), f(mps.error_bound)]);
        out.reports.push(mps_checks(&mps));
    }
    write_csv(
        &dir.join("mps.csv"),
        &["D", "sum_delta", "distance", "sqrt_bound", "max_reduced_trace_distance", "linear_bound"],
        &rows,
    )?;
    let cut = cfg.entangle.cut.unwrap_or(n / 2);
    out.reports.push(eckart_young_check(psi, &s.space, cut, cfg.entangle.ey_rank, cfg.entangle.ey_trials, cfg.solver.seed)?);
    let centre = profile.iter().find(|sp| sp.cut == cut).map(|sp| sp.entropy()).unwrap_or(f64::NAN);
    out.metrics.insert("entropy".into(), centre);
    if s.sd.degenerate || !s.sd.gap.is_finite() {
        let mut rep = CheckReport::new("area_law");
        rep.skip("area_law", "no finite spectral gap");
        out.reports.push(rep);
    } else {
        let ab = s.spec.alpha_bar(cfg.entangle.alpha_bar);
        let (row, rep) = area_law_report(psi, &s.space, cut, s.sd.gap, &s.spec, ab, cfg.entangle.c0)?;
        write_csv(
            &dir.join("area_law.csv"),
            &["cut", "gap", "entropy", "bound", "ratio"],
            &[vec![cut.to_string(), f(row.gap), f(row.entropy), f(row.bound), f(row.ratio)]],
        )?;
        out.files.push("area_law.csv".into());
        out.metrics.insert("area_law_bound".into(), row.bound);
        out.reports.push(rep);
    }
    out.files.extend(["entropy.csv".into(), "mps.csv".into()]);
    Ok(())
}
