mod report;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use lqbsde::equilibrium::{write_realization_rows, Equilibrium};
use lqbsde::girsanov::{
    default_scenario, martingale_check, transform_observation, w1_state, write_girsanov_csv,
};
use lqbsde::model::{InformationPattern, Player, ValidatedModel};
use lqbsde::output::write_header;
use lqbsde::riccati::{closed_form_alpha, coupled_residuals, RiccatiSolution};
use lqbsde::scenario::parse_scenario;
use lqbsde::stochastic::{sample_brownian, write_path_rows, BrownianPathBatch};
use lqbsde::verification::{
    checkpoints, estimate_costs, filter_check, information_value, oracle_gap, stationarity_suite,
    Direction,
};

use report::{create, Report};

const EPSILONS: [f64; 5] = [-1.0, -0.5, 0.0, 0.5, 1.0];
const ORACLE_TOL: f64 = 1e-3;
const FILTER_CHECKPOINTS: usize = 10;

#[derive(Parser, Debug)]
#[command(name = "lqbsde", version, about = "LQ games of a backward SDE under asymmetric noise observation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the gain equations and write riccati.csv.
    Riccati(Common),
    /// Reconstruct the equilibrium on sampled paths and estimate both costs.
    Simulate(Common),
    /// Run one verification suite; exits 1 if a tolerance is breached.
    Verify {
        #[arg(long, value_enum)]
        suite: Suite,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    Nash,
    Filter,
    Oracle,
    Girsanov,
    InfoValue,
}

impl Suite {
    fn name(self) -> &'static str {
        match self {
            Suite::Nash => "nash",
            Suite::Filter => "filter",
            Suite::Oracle => "oracle",
            Suite::Girsanov => "girsanov",
            Suite::InfoValue => "info-value",
        }
    }
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Scenario file (`key = value` lines).
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Replace the scenario's information pattern.
    #[arg(long)]
    pattern_override: Option<InformationPattern>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 10_000)]
    paths: usize,
    /// Grid steps; defaults to the scenario's value, then 1024.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Run seeds seed, seed+1, ... into out/seed-<s>/.
    #[arg(long, default_value_t = 1)]
    repeat: u64,
    /// Paths written to realization.csv, paths.csv and girsanov.csv.
    #[arg(long, default_value_t = 16)]
    dump_paths: usize,
}

struct Run<'a> {
    command: &'static str,
    suite: Option<Suite>,
    common: &'a Common,
    seed: u64,
    out: PathBuf,
}

impl Run<'_> {
    fn header(&self, steps: usize) -> Vec<(String, String)> {
        let c = self.common;
        let scenario = c
            .scenario
            .as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_else(|| "builtin".into());
        let mut h = vec![
            ("tool".to_string(), format!("lqbsde {}", env!("CARGO_PKG_VERSION"))),
            ("command".to_string(), self.command.to_string()),
            ("scenario".to_string(), scenario),
        ];
        if let Some(p) = c.pattern_override {
            h.push(("pattern_override".into(), p.name().into()));
        }
        if let Some(s) = self.suite {
            h.push(("suite".into(), s.name().into()));
        }
        h.push(("seed".into(), self.seed.to_string()));
        h.push(("paths".into(), c.paths.to_string()));
        h.push(("steps".into(), steps.to_string()));
        h.push(("out".into(), self.out.display().to_string()));
        h
    }

    fn model(&self) -> Result<ValidatedModel> {
        let path = self
            .common
            .scenario
            .as_ref()
            .context("--scenario is required for this command")?;
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read {}", path.display()))?;
        let mut sc = parse_scenario(&text).with_context(|| format!("in {}", path.display()))?;
        if let Some(p) = self.common.pattern_override {
            sc.pattern = p;
        }
        Ok(sc.build(self.common.steps)?)
    }

    fn batch(&self, model: &ValidatedModel) -> Result<BrownianPathBatch> {
        Ok(sample_brownian(model.grid().clone(), self.seed, self.common.paths)?)
    }

    fn file(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Riccati(c) | Command::Simulate(c) => c,
        Command::Verify { common, .. } => common,
    };
    if let Some(t) = common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: cannot set up {t} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let started = Instant::now();
    match dispatch(&cli.command, common) {
        Ok(failures) => {
            eprintln!("elapsed: {:.3} s", started.elapsed().as_secs_f64());
            if failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                for f in &failures {
                    eprintln!("check failed: {f}");
                }
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: &Command, common: &Common) -> Result<Vec<String>> {
    if common.repeat == 0 {
        bail!("--repeat must be at least 1");
    }
    let (name, suite) = match command {
        Command::Riccati(_) => ("riccati", None),
        Command::Simulate(_) => ("simulate", None),
        Command::Verify { suite, .. } => ("verify", Some(*suite)),
    };
    let mut failures = Vec::new();
    for i in 0..common.repeat {
        let seed = common.seed.wrapping_add(i);
        let out = if common.repeat == 1 {
            common.out.clone()
        } else {
            common.out.join(format!("seed-{seed}"))
        };
        std::fs::create_dir_all(&out)
            .with_context(|| format!("cannot create {}", out.display()))?;
        let run = Run {
            command: name,
            suite,
            common,
            seed,
            out,
        };
        let report = match suite {
            None if name == "riccati" => cmd_riccati(&run)?,
            None => cmd_simulate(&run)?,
            Some(s) => cmd_verify(&run, s)?,
        };
        failures.extend(report);
    }
    Ok(failures)
}

fn cmd_riccati(run: &Run) -> Result<Vec<String>> {
    let model = run.model()?;
    let sol = RiccatiSolution::solve(&model)?;
    let header = run.header(model.grid().steps());
    let mut w = create(&run.file("riccati.csv"))?;
    write_header(&mut w, &header)?;
    sol.write_csv(&model, &mut w)?;
    w.flush()?;

    let mut rep = Report::default();
    rep.text("pattern", model.pattern());
    let (da, db) = sol.decomposition_error();
    rep.real("decomposition_alpha", da);
    rep.real("decomposition_beta", db);
    let cr = coupled_residuals(&model, &sol);
    rep.real("coupled_residual_alpha1", cr.alpha1);
    rep.real("coupled_residual_beta1", cr.beta1);
    rep.real("coupled_residual_alpha2", cr.alpha2);
    rep.real("coupled_residual_beta2", cr.beta2);
    rep.real("ratio_gap", sol.ratio_gap());
    rep.real("alpha_T", sol.alpha.last());
    if let Some(closed) = closed_form_alpha(&model) {
        let gap = sol
            .alpha
            .values()
            .iter()
            .zip(&closed)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        rep.real("closed_form_gap", gap);
    }
    rep.write(&run.file("report.txt"), &header)?;
    Ok(Vec::new())
}

fn cmd_simulate(run: &Run) -> Result<Vec<String>> {
    let model = run.model()?;
    let sol = RiccatiSolution::solve(&model)?;
    let eq = Equilibrium::new(&model, &sol)?;
    let batch = run.batch(&model)?;
    let header = run.header(model.grid().steps());

    let dump = run.common.dump_paths.min(batch.count);
    let mut real_w = create(&run.file("realization.csv"))?;
    let mut path_w = create(&run.file("paths.csv"))?;
    write_header(&mut real_w, &header)?;
    write_header(&mut path_w, &header)?;
    writeln!(
        real_w,
        "path,t,y,ytilde,yhat,ymean,x1,x2,x1tilde,x2tilde,x1hat,z1,z2,u1,u2"
    )?;
    writeln!(path_w, "path,t,w1,w2")?;
    for p in 0..dump {
        let path = batch.path(p);
        let r = eq.reconstruct(&path)?;
        write_realization_rows(&mut real_w, &model, p, &r)?;
        write_path_rows(&mut path_w, model.grid(), p, &path)?;
    }
    real_w.flush()?;
    path_w.flush()?;

    let costs = estimate_costs(&eq, &batch)?;
    let mut rep = Report::default();
    rep.text("pattern", model.pattern());
    rep.estimate("J1", costs.j1);
    rep.estimate("J2", costs.j2);
    rep.text("paths_simulated", costs.paths);
    rep.text("paths_written", dump);
    rep.write(&run.file("report.txt"), &header)?;
    Ok(Vec::new())
}

fn cmd_verify(run: &Run, suite: Suite) -> Result<Vec<String>> {
    let mut rep = Report::default();
    let steps = match suite {
        Suite::Girsanov => verify_girsanov(run, &mut rep)?,
        _ => {
            let model = run.model()?;
            rep.text("pattern", model.pattern());
            match suite {
                Suite::Nash => verify_nash(run, &model, &mut rep)?,
                Suite::Filter => verify_filter(run, &model, &mut rep)?,
                Suite::Oracle => verify_oracle(&model, &mut rep)?,
                Suite::InfoValue => verify_info_value(run, &model, &mut rep)?,
                Suite::Girsanov => unreachable!(),
            }
            model.grid().steps()
        }
    };
    rep.write(&run.file("report.txt"), &run.header(steps))?;
    Ok(rep
        .failures()
        .iter()
        .map(|f| format!("{} (seed {})", f, run.seed))
        .collect())
}

fn verify_nash(run: &Run, model: &ValidatedModel, rep: &mut Report) -> Result<()> {
    let sol = RiccatiSolution::solve(model)?;
    let eq = Equilibrium::new(model, &sol)?;
    let batch = run.batch(model)?;
    let probes: Vec<(Player, Direction)> = Player::BOTH
        .iter()
        .flat_map(|p| Direction::STANDARD.iter().map(move |d| (*p, d.clone())))
        .collect();
    let reports = stationarity_suite(&eq, &batch, &probes, &EPSILONS)?;
    for s in &reports {
        let tag = format!("player{}_{}", s.player.index(), s.direction);
        rep.estimate(&format!("{tag}_theta"), s.theta);
        if let Some(d) = s.derivative {
            rep.estimate(&format!("{tag}_dJ_deps"), d);
        }
        rep.real(format!("{tag}_kappa"), s.kappa);
        for (e, d) in &s.table {
            rep.estimate(&format!("{tag}_dJ({e})"), *d);
        }
        rep.real(format!("{tag}_fit_residual"), s.fit_residual);
        rep.check(format!("{tag}_stationary"), s.passes());
        rep.check(format!("{tag}_quadratic"), s.fit_residual <= 1e-10);
    }
    Ok(())
}

fn verify_filter(run: &Run, model: &ValidatedModel, rep: &mut Report) -> Result<()> {
    let sol = RiccatiSolution::solve(model)?;
    let eq = Equilibrium::new(model, &sol)?;
    if model.pattern() != InformationPattern::SymmetricW2 {
        return Err(lqbsde::Error::PatternMismatch {
            expected: InformationPattern::SymmetricW2,
            found: model.pattern(),
        }
        .into());
    }
    let outer = sample_brownian(model.grid().clone(), run.seed, 1)?.path(0);
    let inner_seed = run.seed.wrapping_add(1);
    let nodes = checkpoints(model, FILTER_CHECKPOINTS);
    let points = filter_check(&eq, &outer, run.common.paths, inner_seed, &nodes)?;
    let mut within = 0;
    let mut worst: f64 = 0.0;
    for p in &points {
        let dev = p.deviation_over_se();
        worst = worst.max(dev);
        if dev <= 3.0 {
            within += 1;
        }
        rep.real(format!("filter_t={}_mean", p.t), p.estimate.mean);
        rep.real(format!("filter_t={}_SE", p.t), p.estimate.se);
        rep.real(format!("filter_t={}_predicted", p.t), p.predicted);
    }
    rep.text("inner_seed", inner_seed);
    rep.real("filter_maxdev_over_SE", worst);
    rep.text("filter_within_3SE", format!("{within}/{}", points.len()));
    rep.check("filter", within + 1 >= points.len());
    Ok(())
}

fn verify_oracle(model: &ValidatedModel, rep: &mut Report) -> Result<()> {
    let sol = RiccatiSolution::solve(model)?;
    let (gap, oracle) = oracle_gap(model, &sol)?;
    rep.real("oracle_gap", gap.max_control());
    rep.real("oracle_gap_u1", gap.control[0]);
    rep.real("oracle_gap_u2", gap.control[1]);
    rep.real("oracle_J1", oracle.j1);
    rep.real("oracle_J2", oracle.j2);
    rep.real("oracle_cost_gap_J1", gap.cost_relative[0]);
    rep.real("oracle_cost_gap_J2", gap.cost_relative[1]);
    rep.check("oracle_controls", gap.max_control() <= ORACLE_TOL);
    rep.check("oracle_costs", gap.max_cost() <= ORACLE_TOL);
    Ok(())
}

fn verify_info_value(run: &Run, model: &ValidatedModel, rep: &mut Report) -> Result<()> {
    let batch = run.batch(model)?;
    let iv = information_value(model, &batch)?;
    rep.estimate("J1_symmetric", iv.j1_symmetric);
    rep.estimate("J1_full", iv.j1_full);
    rep.estimate("J1_difference", iv.difference);
    rep.real("u2_gap", iv.u2_gap);
    rep.check("information_value", iv.passes());
    rep.check("u2_identical", iv.u2_gap <= 1e-12);
    Ok(())
}

fn verify_girsanov(run: &Run, rep: &mut Report) -> Result<usize> {
    let steps = run.common.steps.unwrap_or(lqbsde::scenario::DEFAULT_STEPS);
    let grid = lqbsde::model::TimeGrid::new(1.0, steps)?;
    let batch = sample_brownian(grid, run.seed, run.common.paths)?;
    let scn = default_scenario();
    let m = martingale_check(&scn, &batch, w1_state)?;
    rep.text("x_path", "w1");
    rep.estimate("rho1_T", m.rho1);
    rep.estimate("rho2_T", m.rho2);
    rep.real("reciprocal_error", m.reciprocal_error);
    let tr = transform_observation(&scn);
    let mut roundtrip: f64 = 0.0;
    for z in [[1.0, 0.0], [0.0, 1.0], [0.3, -2.5], [-7.0, 4.0]] {
        let back = tr.unrotate(tr.rotate(z));
        roundtrip = roundtrip.max((back[0] - z[0]).abs()).max((back[1] - z[1]).abs());
    }
    rep.real("rotation_roundtrip", roundtrip);
    rep.check("rho1_mean", m.rho1.within(1.0, 3.0));
    rep.check("rho2_mean", m.rho2.within(1.0, 3.0));
    rep.check("reciprocal", m.reciprocal_error <= 1e-12);
    rep.check("rotation", roundtrip <= 1e-12);

    let header = run.header(steps);
    let mut w = create(&run.file("girsanov.csv"))?;
    write_header(&mut w, &header)?;
    write_girsanov_csv(&mut w, &scn, &batch, run.common.dump_paths, w1_state)?;
    w.flush()?;
    Ok(steps)
}
