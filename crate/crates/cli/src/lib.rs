//! Command-line front end: argument parsing, dispatch, and report emission.

pub mod io;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64 as C;
use overlap_core::acceptance::{run_criteria, ALL, FAST};
use overlap_core::analytic::{frak_n, frak_n_quadrature, h, h_quadrature};
use overlap_core::correlate::{rho, rho4_closed};
use overlap_core::ginibre::{
    estimate_diag_overlap, estimate_rho_hat, mc_conditional_transfer, mc_f_n, sample_ginibre, substream,
    MCAccumulator, MCConfig, Sampler,
};
use overlap_core::linalg::CMat;
use overlap_core::permlat::{shared_index, PartialPermutation, Vertex};
use overlap_core::spectral::{
    build_nmatrix, conditional_f_product, eigen_residuals, exp_spectral, limit_f, solve_eigensystem,
};
use serde::Serialize;
use thiserror::Error;

use crate::io::*;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_VERIFICATION: i32 = 4;

/// Sigma threshold for `--verify`.
pub const VERIFY_SIGMAS: f64 = 5.0;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("json: {0}")]
    Json(String),
    #[error(transparent)]
    Core(#[from] overlap_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
            _ => EXIT_VALIDATION,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "overlap", version, about = "Eigenvector overlap correlations: lattice, kernels, Monte Carlo")]
pub struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Shorthand for `--format json`.
    #[arg(long, global = true)]
    pub json: bool,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ordered index of partial permutations of [ℓ] with its step relation.
    Lattice {
        #[arg(long)]
        ell: usize,
    },
    /// 𝔑, its left/right eigenvectors and exp(𝔑) at a point configuration.
    Nmatrix {
        /// Point JSON (file path or inline).
        #[arg(long)]
        points: String,
    },
    /// Limiting correlation ρ(σ) with its per-term breakdown.
    Rho {
        /// Cycle JSON or text such as "(1,2)(3)".
        #[arg(long)]
        perm: String,
        #[arg(long)]
        points: String,
    },
    /// Closed four-point function from ν = [ν₁, ν₂, ν₃, ν₄].
    Rho4 {
        /// JSON list of four [re, im] pairs (file path or inline).
        #[arg(long)]
        nu: String,
    },
    /// Closed forms of h and 𝔫 against disc quadrature.
    Quadcheck {
        #[arg(long)]
        points: String,
        #[arg(long, default_value_t = 2000)]
        res: usize,
    },
    /// Monte Carlo estimators over the Ginibre ensemble.
    Mc {
        #[command(subcommand)]
        estimator: McCommand,
    },
    /// Run the acceptance criteria.
    Accept {
        /// `fast`, `all`, or a comma list of criterion ids.
        #[arg(long, default_value = "fast")]
        suite: String,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum SamplerArg {
    #[default]
    Hessenberg,
    Dense,
}

#[derive(Debug, Args)]
pub struct McArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long, env = "OVERLAP_THREADS")]
    pub threads: Option<usize>,
    #[arg(long, value_enum, default_value_t = SamplerArg::Hessenberg)]
    pub sampler: SamplerArg,
    /// Exit 4 when the mean is more than 5 standard errors from the target.
    #[arg(long)]
    pub verify: bool,
}

impl McArgs {
    fn config(&self) -> MCConfig {
        let sampler = match self.sampler {
            SamplerArg::Hessenberg => Sampler::Hessenberg,
            SamplerArg::Dense => Sampler::Dense,
        };
        MCConfig::new(self.n, self.samples, self.seed)
            .with_eps(self.eps.unwrap_or(0.0))
            .with_threads(self.threads)
            .with_sampler(sampler)
    }

    fn require_eps(&self) -> Result<f64, CliError> {
        self.eps.ok_or_else(|| CliError::Usage("--eps is required for window estimators".into()))
    }
}

#[derive(Debug, Subcommand)]
pub enum McCommand {
    /// N⁻^{|σ|} F_N(σ) against its N → ∞ limit.
    Fn {
        #[command(flatten)]
        args: McArgs,
        #[arg(long, default_value = "(1)")]
        perm: String,
        #[arg(long)]
        points: String,
    },
    /// F_N(σ) over triangular matrices with a fixed diagonal against the transfer product.
    Transfer {
        #[command(flatten)]
        args: McArgs,
        #[arg(long, default_value = "(1)")]
        perm: String,
        #[arg(long)]
        points: String,
        /// JSON list of [re, im] diagonal entries; defaults to the eigenvalues
        /// of one Ginibre draw of size N.
        #[arg(long)]
        lambdas: Option<String>,
    },
    /// Window estimator of the overlap correlation against ρ(σ).
    RhoHat {
        #[command(flatten)]
        args: McArgs,
        #[arg(long, default_value = "(1)")]
        perm: String,
        #[arg(long)]
        points: String,
    },
    /// Mean diagonal overlap per eigenvalue in a disc window against 1 − |z|².
    OverlapDiag {
        #[command(flatten)]
        args: McArgs,
        /// Window centre as `re,im`.
        #[arg(long, default_value = "0,0")]
        centre: String,
    },
}

/// A report and whether it passed its verification gate.
pub struct Outcome {
    pub text: String,
    pub verified: bool,
}

trait Report: Serialize {
    fn csv(&self) -> Result<String, CliError>;
}

fn render<R: Report>(r: &R, format: Format) -> Result<String, CliError> {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(r).map_err(|e| CliError::Json(e.to_string()))?;
            s.push('\n');
            Ok(s)
        }
        Format::Csv => r.csv(),
    }
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn grid(m: &CMat) -> Vec<Vec<Pair>> {
    m.to_rows().into_iter().map(|row| row.into_iter().map(pair).collect()).collect()
}

impl Report for LatticeReport {
    fn csv(&self) -> Result<String, CliError> {
        let rows: Vec<Vec<String>> = self
            .elements
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let preds: Vec<String> =
                    self.steps.iter().filter(|s| s[1] == i).map(|s| s[0].to_string()).collect();
                vec![i.to_string(), cycle_text(&e.cycles), preds.join(" ")]
            })
            .collect();
        csv_table(&["index", "element", "preds"], &rows)
    }
}

impl Report for NMatrixReport {
    fn csv(&self) -> Result<String, CliError> {
        let mut rows = Vec::new();
        for (name, m) in [("n", &self.n), ("l", &self.l), ("r", &self.r), ("exp", &self.exp)] {
            for (i, row) in m.iter().enumerate() {
                for (j, z) in row.iter().enumerate() {
                    rows.push(vec![name.into(), self.index[i].clone(), self.index[j].clone(), num(z[0]), num(z[1])]);
                }
            }
        }
        csv_table(&["matrix", "row", "col", "re", "im"], &rows)
    }
}

impl Report for RhoReport {
    fn csv(&self) -> Result<String, CliError> {
        let mut rows = vec![vec!["total".into(), self.perm.clone(), num(self.value[0]), num(self.value[1])]];
        rows.extend(self.terms.iter().map(|t| vec!["term".into(), t.perm.clone(), num(t.value[0]), num(t.value[1])]));
        csv_table(&["kind", "perm", "re", "im"], &rows)
    }
}

impl Report for Rho4Report {
    fn csv(&self) -> Result<String, CliError> {
        csv_table(&["re", "im"], &[vec![num(self.value[0]), num(self.value[1])]])
    }
}

impl Report for QuadReport {
    fn csv(&self) -> Result<String, CliError> {
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.kind.clone(),
                    r.sigma.clone(),
                    r.tau.clone(),
                    num(r.closed[0]),
                    num(r.closed[1]),
                    num(r.quadrature[0]),
                    num(r.quadrature[1]),
                    num(r.error),
                ]
            })
            .collect();
        csv_table(&["kind", "sigma", "tau", "closed_re", "closed_im", "quad_re", "quad_im", "error"], &rows)
    }
}

impl Report for McReport {
    fn csv(&self) -> Result<String, CliError> {
        let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
        let row = vec![
            self.estimator.clone(),
            self.n.to_string(),
            self.samples.to_string(),
            self.seed.to_string(),
            opt(self.eps),
            self.perm.clone().unwrap_or_default(),
            num(self.mean[0]),
            num(self.mean[1]),
            num(self.stderr),
            num(self.target[0]),
            num(self.target[1]),
            num(self.sigmas),
        ];
        csv_table(
            &[
                "estimator", "n", "samples", "seed", "eps", "perm", "mean_re", "mean_im", "stderr", "target_re",
                "target_im", "sigmas",
            ],
            &[row],
        )
    }
}

impl Report for AcceptReport {
    fn csv(&self) -> Result<String, CliError> {
        let rows: Vec<Vec<String>> = self
            .criteria
            .iter()
            .map(|c| {
                vec![c.id.to_string(), c.title.clone(), c.passed.to_string(), format!("{:.3}", c.elapsed_s), c.details.join("; ")]
            })
            .collect();
        csv_table(&["id", "title", "passed", "elapsed_s", "details"], &rows)
    }
}

fn cycle_text(cycles: &[Vec<Vertex>]) -> String {
    if cycles.is_empty() {
        return "()".into();
    }
    cycles
        .iter()
        .map(|c| format!("({})", c.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")))
        .collect()
}

fn perm_text(sigma: &PartialPermutation) -> String {
    cycle_text(&sigma.cycles())
}

pub fn cmd_lattice(ell: usize) -> Result<LatticeReport, CliError> {
    let index = shared_index(ell)?;
    let elements = index.elements().iter().map(PermutationJson::from_perm).collect();
    let mut steps = Vec::new();
    for j in 0..index.len() {
        let mut preds = index.preds(j).to_vec();
        preds.sort_unstable();
        steps.extend(preds.into_iter().map(|i| [i, j]));
    }
    Ok(LatticeReport { ell, size: index.len(), elements, steps })
}

pub fn cmd_nmatrix(points: &str) -> Result<NMatrixReport, CliError> {
    let pts = load_points(points)?;
    let index = shared_index(pts.len())?;
    let nm = build_nmatrix(index, &pts)?;
    let es = solve_eigensystem(&nm)?;
    let (rl, rr) = eigen_residuals(&nm, &es);
    Ok(NMatrixReport {
        ell: index.ell(),
        index: index.elements().iter().map(perm_text).collect(),
        n: grid(&nm.entries),
        l: grid(&es.l),
        r: grid(&es.r),
        exp: grid(&exp_spectral(&es)),
        residuals: [rl, rr],
    })
}

pub fn cmd_rho(perm: &str, points: &str) -> Result<RhoReport, CliError> {
    let sigma = parse_perm(perm)?;
    let pts = load_points(points)?;
    let res = rho(&sigma, &pts)?;
    Ok(RhoReport {
        perm: perm_text(&sigma),
        value: pair(res.value),
        terms: res.terms.iter().map(|(p, v)| Term { perm: perm_text(p), value: pair(*v) }).collect(),
    })
}

pub fn cmd_rho4(nu: &str) -> Result<Rho4Report, CliError> {
    let values = load_pairs(nu)?;
    let arr: [C; 4] = values
        .as_slice()
        .try_into()
        .map_err(|_| CliError::Usage(format!("ν needs exactly 4 entries, got {}", values.len())))?;
    Ok(Rho4Report { nu: values.iter().copied().map(pair).collect(), value: pair(rho4_closed(arr)?) })
}

pub fn cmd_quadcheck(points: &str, res: usize) -> Result<QuadReport, CliError> {
    if res == 0 {
        return Err(CliError::Usage("--res must be positive".into()));
    }
    let pts = load_points(points)?;
    let index = shared_index(pts.len())?;
    let mut rows = Vec::new();
    let mut push = |kind: &str, sigma: String, tau: String, closed: C, quad: C| {
        rows.push(QuadRow {
            kind: kind.into(),
            sigma,
            tau,
            closed: pair(closed),
            quadrature: pair(quad),
            error: (closed - quad).norm(),
        });
    };
    let vs: Vec<Vertex> = pts.vertices().collect();
    for &b in &vs {
        for &a in &vs {
            let (z, w) = (pts.z(b), pts.w(a));
            push("h", format!("z{b}"), format!("w{a}"), h(z, w)?, h_quadrature(z, w, res));
        }
    }
    for j in 0..index.len() {
        for &i in index.preds(j) {
            let (s, t) = (index.element(i), index.element(j));
            push("n", perm_text(s), perm_text(t), frak_n(s, t, &pts)?, frak_n_quadrature(s, t, &pts, res)?);
        }
    }
    let max_error = rows.iter().map(|r| r.error).fold(0.0, f64::max);
    Ok(QuadReport { res, max_error, rows })
}

fn mc_report(estimator: &str, args: &McArgs, perm: Option<&PartialPermutation>, acc: &MCAccumulator, target: C) -> McReport {
    McReport {
        estimator: estimator.into(),
        n: args.n,
        samples: args.samples,
        seed: args.seed,
        eps: args.eps,
        perm: perm.map(perm_text),
        mean: pair(acc.mean),
        stderr: acc.stderr(),
        target: pair(target),
        sigmas: acc.sigmas(target),
    }
}

pub fn cmd_mc(cmd: &McCommand) -> Result<McReport, CliError> {
    match cmd {
        McCommand::Fn { args, perm, points } => {
            let sigma = parse_perm(perm)?;
            let pts = load_points(points)?;
            let acc = mc_f_n(&args.config(), &sigma, &pts)?;
            Ok(mc_report("fn", args, Some(&sigma), &acc, limit_f(&sigma, &pts)?))
        }
        McCommand::Transfer { args, perm, points, lambdas } => {
            let sigma = parse_perm(perm)?;
            let pts = load_points(points)?;
            let lams = match lambdas {
                Some(arg) => load_pairs(arg)?,
                None => sample_ginibre(args.n, &mut substream(args.seed, u64::MAX))?.eigenvalues,
            };
            if lams.len() != args.n {
                return Err(CliError::Usage(format!("{} diagonal entries given for N = {}", lams.len(), args.n)));
            }
            if args.threads == Some(0) {
                return Err(CliError::Usage("thread count must be positive".into()));
            }
            let acc = mc_conditional_transfer(&lams, &sigma, &pts, args.samples, args.seed, args.threads)?;
            Ok(mc_report("transfer", args, Some(&sigma), &acc, conditional_f_product(&lams, &sigma, &pts)?))
        }
        McCommand::RhoHat { args, perm, points } => {
            args.require_eps()?;
            let sigma = parse_perm(perm)?;
            let pts = load_points(points)?;
            let acc = estimate_rho_hat(&args.config(), &sigma, &pts)?;
            Ok(mc_report("rho-hat", args, Some(&sigma), &acc, rho(&sigma, &pts)?.value))
        }
        McCommand::OverlapDiag { args, centre } => {
            args.require_eps()?;
            let c = parse_complex(centre)?;
            let acc = estimate_diag_overlap(&args.config(), c)?;
            Ok(mc_report("overlap-diag", args, None, &acc, C::new(1.0 - c.norm_sqr(), 0.0)))
        }
    }
}

fn mc_args(cmd: &McCommand) -> &McArgs {
    match cmd {
        McCommand::Fn { args, .. }
        | McCommand::Transfer { args, .. }
        | McCommand::RhoHat { args, .. }
        | McCommand::OverlapDiag { args, .. } => args,
    }
}

pub fn parse_suite(suite: &str) -> Result<Vec<u8>, CliError> {
    match suite.trim() {
        "fast" => Ok(FAST.to_vec()),
        "all" => Ok(ALL.to_vec()),
        list => list
            .split(',')
            .map(|t| t.trim().parse::<u8>().map_err(|_| CliError::Usage(format!("bad criterion id {t:?}"))))
            .collect(),
    }
}

pub fn cmd_accept(suite: &str) -> Result<AcceptReport, CliError> {
    let ids = parse_suite(suite)?;
    let reports = run_criteria(&ids)?;
    for r in &reports {
        eprintln!("{r}");
    }
    let criteria: Vec<CriterionJson> = reports
        .iter()
        .map(|r| CriterionJson {
            id: r.id,
            title: r.title.into(),
            passed: r.passed,
            details: r.details.clone(),
            elapsed_s: r.elapsed.as_secs_f64(),
        })
        .collect();
    Ok(AcceptReport { passed: criteria.iter().all(|c| c.passed), criteria })
}

/// Runs one command and renders its report.
pub fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    let format = if cli.json { Format::Json } else { cli.format };
    Ok(match &cli.command {
        Command::Lattice { ell } => Outcome { text: render(&cmd_lattice(*ell)?, format)?, verified: true },
        Command::Nmatrix { points } => Outcome { text: render(&cmd_nmatrix(points)?, format)?, verified: true },
        Command::Rho { perm, points } => Outcome { text: render(&cmd_rho(perm, points)?, format)?, verified: true },
        Command::Rho4 { nu } => Outcome { text: render(&cmd_rho4(nu)?, format)?, verified: true },
        Command::Quadcheck { points, res } => {
            Outcome { text: render(&cmd_quadcheck(points, *res)?, format)?, verified: true }
        }
        Command::Mc { estimator } => {
            let report = cmd_mc(estimator)?;
            let verified = !mc_args(estimator).verify || report.sigmas <= VERIFY_SIGMAS;
            Outcome { text: render(&report, format)?, verified }
        }
        Command::Accept { suite } => {
            let report = cmd_accept(suite)?;
            Outcome { verified: report.passed, text: render(&report, format)? }
        }
    })
}

/// Executes, writes the report, and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let outcome = match execute(cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let written = match &cli.output {
        Some(path) => std::fs::write(path, &outcome.text).map_err(|e| format!("{}: {e}", path.display())),
        None => std::io::stdout().write_all(outcome.text.as_bytes()).map_err(|e| e.to_string()),
    };
    if let Err(e) = written {
        eprintln!("error: i/o: {e}");
        return EXIT_VALIDATION;
    }
    if outcome.verified {
        EXIT_OK
    } else {
        eprintln!("verification failed");
        EXIT_VERIFICATION
    }
}
