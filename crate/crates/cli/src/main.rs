use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use collusionlab::classify::classify;
use collusionlab::count::{
    audit_kapproval_count, count_almost_equal, count_scoring_profiles, plurality_closed_form,
};
use collusionlab::count::{BoundId, BoundSpec};
use collusionlab::error::Error;
use collusionlab::estimate::{
    agreement_harness, estimate_fraction, paper_grid, sweep, verify_bounds, Axis, BoundCase,
    ExperimentConfig, HarnessPoint, Labeling, Mode, Verdict,
};
use collusionlab::oracle::{collusion_oracle, Budget, OracleOptions, OracleStatus};
use collusionlab::sample::{sample_ic, Culture, IscSampler, RngStream};
use collusionlab::voting::{Preference, Rule, RuleKind, ScoringProfile, TieBreakPolicy};

mod output;

use output::{estimate_record, Output, ESTIMATE_HEADER};

#[derive(Parser, Debug)]
#[command(
    name = "collusionlab",
    version,
    about = "Manipulability of positional scoring rules"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Classify one scoring profile, optionally confirming with the oracle.
    Classify(ClassifyArgs),
    /// Decide one scoring profile by exhaustive search.
    Oracle(ClassifyArgs),
    /// Count scoring profiles.
    Count(CountArgs),
    /// Draw profiles from a culture.
    Sample(SampleArgs),
    /// Monte Carlo estimate of the proof fraction.
    Estimate(EstimateArgs),
    /// Estimates along the n or m axis.
    Sweep(SweepArgs),
    /// Check the lower-bound inequalities.
    VerifyBounds(BoundsArgs),
    /// Compare classifiers with the oracle on whole supports.
    Harness(HarnessArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum, serde::Serialize)]
enum RuleArg {
    Plurality,
    Veto,
    Kapproval,
    Borda,
}

#[derive(Clone, Copy, Debug, ValueEnum, serde::Serialize)]
enum TieArg {
    For,
    Against,
    Fixed,
}

#[derive(Clone, Copy, Debug, ValueEnum, serde::Serialize)]
enum CultureArg {
    Ic,
    Isc,
}

#[derive(Clone, Copy, Debug, ValueEnum, serde::Serialize)]
enum LabelingArg {
    Classifier,
    Oracle,
}

#[derive(Clone, Copy, Debug, ValueEnum, serde::Serialize)]
enum AxisArg {
    N,
    M,
}

#[derive(Clone, Copy, Debug, ValueEnum, serde::Serialize)]
enum Preset {
    PaperGrid,
}

#[derive(Args, Debug, Clone, serde::Serialize)]
struct RuleOpts {
    #[arg(long, value_enum)]
    rule: RuleArg,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    m: usize,
}

#[derive(Args, Debug, Clone, serde::Serialize)]
struct TieOpts {
    #[arg(long, value_enum, default_value = "for")]
    tiebreak: TieArg,
    /// Reference order for `--tiebreak fixed`, e.g. `2,0,1`; identity if omitted.
    #[arg(long, value_delimiter = ',')]
    fixed_order: Option<Vec<usize>>,
}

#[derive(Args, Debug, Clone, serde::Serialize)]
struct ClassifyArgs {
    #[command(flatten)]
    rule: RuleOpts,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    c: usize,
    #[command(flatten)]
    tie: TieOpts,
    /// Comma-separated total scores.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    scores: Vec<i64>,
    /// Also run the oracle.
    #[arg(long)]
    oracle: bool,
    #[arg(long, default_value_t = collusionlab::oracle::DEFAULT_BUDGET)]
    oracle_budget: u64,
    /// Exit with status 4 when the oracle budget is exceeded.
    #[arg(long)]
    strict: bool,
}

#[derive(Args, Debug, Clone, serde::Serialize)]
struct CountArgs {
    #[command(flatten)]
    rule: RuleOpts,
    #[arg(long)]
    n: usize,
    /// Compare with the printed k-approval summation.
    #[arg(long)]
    audit: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, serde::Serialize)]
struct RunOpts {
    #[arg(long, env = "COLLUSIONLAB_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long, value_enum, default_value = "isc")]
    culture: CultureArg,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value_t = collusionlab::oracle::DEFAULT_BUDGET)]
    oracle_budget: u64,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    resolve_unknown: bool,
    #[arg(long, value_enum, default_value = "classifier")]
    labeling: LabelingArg,
    /// Exit with status 4 when any profile stays unknown.
    #[arg(long)]
    strict: bool,
}

#[derive(Args, Debug, Clone, serde::Serialize)]
struct SampleArgs {
    #[command(flatten)]
    rule: RuleOpts,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    count: u64,
    #[arg(long, env = "COLLUSIONLAB_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "isc")]
    culture: CultureArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, serde::Serialize)]
struct EstimateArgs {
    #[command(flatten)]
    rule: RuleOpts,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    c: usize,
    #[command(flatten)]
    tie: TieOpts,
    #[command(flatten)]
    run: RunOpts,
}

#[derive(Args, Debug, Clone, serde::Serialize)]
struct SweepArgs {
    #[command(flatten)]
    estimate: EstimateArgs,
    #[arg(long, value_enum)]
    axis: AxisArg,
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<usize>,
}

#[derive(Args, Debug, Clone, serde::Serialize)]
struct BoundsArgs {
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// One bound, e.g. PluralityCP, when no preset is given.
    #[arg(long)]
    bound: Option<String>,
    #[arg(long, default_value_t = 1)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    m: usize,
    #[arg(long, default_value_t = 1)]
    c: usize,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[command(flatten)]
    tie: TieOpts,
    #[arg(long)]
    montecarlo: bool,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long, env = "COLLUSIONLAB_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, serde::Serialize)]
struct HarnessArgs {
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long, value_enum)]
    rule: Option<RuleArg>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    m: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    c: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "for,against")]
    tiebreak: Vec<TieArg>,
    #[arg(long, default_value_t = collusionlab::oracle::DEFAULT_BUDGET)]
    oracle_budget: u64,
    /// JSON discrepancy report; a summary CSV goes next to it.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure with its process exit status.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Unsupported(_)
            | Error::WrongRule { .. }
            | Error::TooLarge { .. }
            | Error::OutOfRegime(_) => 3,
            Error::BudgetExceeded { .. } => 4,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure {
            code: 1,
            message: e.to_string(),
        }
    }
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn build_rule(r: &RuleOpts) -> CliResult<Rule> {
    let kind = match r.rule {
        RuleArg::Plurality => RuleKind::Plurality,
        RuleArg::Veto => RuleKind::Veto,
        RuleArg::Borda => RuleKind::Borda,
        RuleArg::Kapproval => {
            RuleKind::KApproval(r.k.ok_or_else(|| invalid("--rule kapproval needs --k"))?)
        }
    };
    Ok(Rule::new(kind, r.m)?)
}

fn build_tie(t: &TieOpts, m: usize) -> CliResult<TieBreakPolicy> {
    Ok(match t.tiebreak {
        TieArg::For => TieBreakPolicy::ForManipulators,
        TieArg::Against => TieBreakPolicy::AgainstManipulators,
        TieArg::Fixed => match &t.fixed_order {
            None => TieBreakPolicy::fixed_identity(m),
            Some(o) => TieBreakPolicy::FixedOrder(Preference::new(o.clone())?),
        },
    })
}

fn tie_of(arg: TieArg, m: usize) -> TieBreakPolicy {
    match arg {
        TieArg::For => TieBreakPolicy::ForManipulators,
        TieArg::Against => TieBreakPolicy::AgainstManipulators,
        TieArg::Fixed => TieBreakPolicy::fixed_identity(m),
    }
}

fn culture(c: CultureArg) -> Culture {
    match c {
        CultureArg::Ic => Culture::Ic,
        CultureArg::Isc => Culture::Isc,
    }
}

fn print_json(v: &serde_json::Value) {
    println!(
        "{}",
        serde_json::to_string_pretty(v).expect("json values serialize")
    );
}

fn cmd_classify(a: &ClassifyArgs, force_oracle: bool) -> CliResult<()> {
    let rule = build_rule(&a.rule)?;
    let tb = build_tie(&a.tie, rule.m())?;
    let x = ScoringProfile::new(rule, a.n, a.scores.clone())?;
    let mut record = serde_json::Map::new();
    if !force_oracle {
        let cl = classify(&x, a.c, &tb)?;
        record.insert("status".into(), cl.status.name().into());
        record.insert("basis".into(), cl.basis.map(|b| b.label()).into());
        record.insert("complete".into(), cl.complete.into());
    }
    if a.oracle || force_oracle {
        let options = OracleOptions {
            budget: Budget::new(a.oracle_budget)?,
            ..Default::default()
        };
        let v = collusion_oracle(&x, a.c, &tb, &options)?;
        let key = if force_oracle {
            "status"
        } else {
            "oracle_status"
        };
        record.insert(key.into(), format!("{:?}", v.status).into());
        record.insert(
            "witness".into(),
            serde_json::to_value(&v.witness).expect("witness serializes"),
        );
        if v.status == OracleStatus::BudgetExceeded && a.strict {
            print_json(&serde_json::Value::Object(record));
            return Err(Failure {
                code: 4,
                message: format!("oracle needs {} evaluations", v.evaluations),
            });
        }
    }
    print_json(&serde_json::Value::Object(record));
    Ok(())
}

fn cmd_count(a: &CountArgs) -> CliResult<()> {
    let rule = build_rule(&a.rule)?;
    let mut out = Output::open(a.out.as_deref())?;
    if a.audit {
        let k = match rule.kind() {
            RuleKind::Plurality => 1,
            RuleKind::KApproval(k) => k,
            _ => {
                return Err(
                    Error::Unsupported("audit covers plurality and k-approval".into()).into(),
                )
            }
        };
        let row = audit_kapproval_count(a.n, k, rule.m())?;
        let mut w = out.csv();
        w.write_record([
            "rule",
            "n",
            "m",
            "k",
            "authoritative",
            "paper_formula",
            "match",
        ])
        .map_err(output::csv_err)?;
        w.write_record([
            row.rule.clone(),
            row.n.to_string(),
            row.m.to_string(),
            row.k.to_string(),
            row.authoritative.clone(),
            row.paper_formula.clone(),
            row.matches.to_string(),
        ])
        .map_err(output::csv_err)?;
        w.flush()?;
    } else {
        let total = count_scoring_profiles(&rule, a.n)?;
        let mut rec = serde_json::Map::new();
        rec.insert("rule".into(), rule.name().into());
        rec.insert("n".into(), a.n.into());
        rec.insert("m".into(), rule.m().into());
        rec.insert("scoring_profiles".into(), total.to_string().into());
        if matches!(rule.kind(), RuleKind::Plurality | RuleKind::Veto) {
            rec.insert(
                "closed_form".into(),
                plurality_closed_form(a.n, rule.m()).to_string().into(),
            );
            if let Ok(e) = count_almost_equal(&rule, a.n) {
                rec.insert("almost_equal".into(), e.to_string().into());
            }
        }
        out.write_all(
            format!(
                "{}\n",
                serde_json::to_string_pretty(&serde_json::Value::Object(rec)).expect("json")
            )
            .as_bytes(),
        )?;
    }
    out.finish("count", a, None)
}

fn cmd_sample(a: &SampleArgs) -> CliResult<()> {
    let rule = build_rule(&a.rule)?;
    let mut out = Output::open(a.out.as_deref())?;
    let mut rng = RngStream::new(a.seed, 0);
    let mut w = out.csv();
    match culture(a.culture) {
        Culture::Isc => {
            let sampler = IscSampler::new(&rule, a.n)?;
            w.write_record(["index", "scores"])
                .map_err(output::csv_err)?;
            for i in 0..a.count {
                let x = sampler.sample(&mut rng);
                w.write_record([i.to_string(), join(x.scores())])
                    .map_err(output::csv_err)?;
            }
        }
        Culture::Ic => {
            w.write_record(["index", "votes", "scores"])
                .map_err(output::csv_err)?;
            for i in 0..a.count {
                let p = sample_ic(a.n, rule.m(), &mut rng);
                let x = collusionlab::voting::tally(&p, &rule)?;
                let votes: Vec<String> = p.votes().iter().map(|v| format!("{v:?}")).collect();
                w.write_record([i.to_string(), votes.join(" "), join(x.scores())])
                    .map_err(output::csv_err)?;
            }
        }
    }
    w.flush()?;
    drop(w);
    out.finish("sample", a, Some(a.seed))
}

fn join(v: &[i64]) -> String {
    v.iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn experiment(a: &EstimateArgs) -> CliResult<ExperimentConfig> {
    let rule = build_rule(&a.rule)?;
    let tb = build_tie(&a.tie, rule.m())?;
    let mut cfg = ExperimentConfig::new(rule, a.n, a.c, tb, culture(a.run.culture));
    cfg.trials = a.run.trials;
    cfg.seed = a.run.seed;
    cfg.oracle_budget = a.run.oracle_budget;
    cfg.resolve_unknown = a.run.resolve_unknown;
    cfg.threads = a.run.threads;
    cfg.labeling = match a.run.labeling {
        LabelingArg::Classifier => Labeling::Classifier,
        LabelingArg::Oracle => Labeling::Oracle,
    };
    Ok(cfg)
}

fn cmd_estimate(a: &EstimateArgs) -> CliResult<()> {
    let cfg = experiment(a)?;
    let r = estimate_fraction(&cfg)?;
    let mut out = Output::open(a.run.out.as_deref())?;
    let mut w = out.csv();
    w.write_record(ESTIMATE_HEADER).map_err(output::csv_err)?;
    w.write_record(estimate_record(&cfg, &r))
        .map_err(output::csv_err)?;
    w.flush()?;
    drop(w);
    out.finish("estimate", a, Some(cfg.seed))?;
    if a.run.strict && r.unknown_count > 0 {
        return Err(Failure {
            code: 4,
            message: format!("{} profiles left unknown", r.unknown_count),
        });
    }
    Ok(())
}

fn cmd_sweep(a: &SweepArgs) -> CliResult<()> {
    let cfg = experiment(&a.estimate)?;
    let axis = match a.axis {
        AxisArg::N => Axis::N,
        AxisArg::M => Axis::M,
    };
    let rows = sweep(&cfg, axis, &a.values);
    let mut out = Output::open(a.estimate.run.out.as_deref())?;
    let mut w = out.csv();
    w.write_record(ESTIMATE_HEADER).map_err(output::csv_err)?;
    let mut unknown = 0;
    for row in &rows {
        match &row.result {
            Ok(r) => {
                unknown += r.unknown_count;
                w.write_record(estimate_record(&row.config, r))
                    .map_err(output::csv_err)?;
            }
            Err(e) => eprintln!("point {} failed: {e}", output::point_label(&row.config)),
        }
    }
    w.flush()?;
    drop(w);
    out.finish("sweep", a, Some(cfg.seed))?;
    if a.estimate.run.strict && unknown > 0 {
        return Err(Failure {
            code: 4,
            message: format!("{unknown} profiles left unknown"),
        });
    }
    Ok(())
}

fn cmd_verify_bounds(a: &BoundsArgs) -> CliResult<bool> {
    let grid: Vec<BoundCase> = match (a.preset, &a.bound) {
        (Some(Preset::PaperGrid), _) => paper_grid(),
        (None, Some(name)) => {
            let id =
                BoundId::parse(name).ok_or_else(|| invalid(format!("unknown bound {name}")))?;
            let spec = BoundSpec::new(id, a.n, a.m)
                .with_c(a.c)
                .with_k(a.k)
                .with_lambda(a.lambda);
            vec![BoundCase {
                spec,
                mode: if a.montecarlo {
                    Mode::MonteCarlo
                } else {
                    Mode::Exhaustive
                },
                tie_break: build_tie(&a.tie, a.m)?,
                trials: a.trials,
                seed: a.seed,
            }]
        }
        (None, None) => return Err(invalid("give --preset or --bound")),
    };
    let rows = verify_bounds(&grid);
    let mut out = Output::open(a.out.as_deref())?;
    let mut w = out.csv();
    w.write_record(output::BOUND_HEADER)
        .map_err(output::csv_err)?;
    for r in &rows {
        w.write_record(output::bound_record(r))
            .map_err(output::csv_err)?;
    }
    w.flush()?;
    drop(w);
    out.finish("verify-bounds", a, Some(a.seed))?;
    Ok(rows.iter().all(|r| r.verdict != Verdict::Fail))
}

/// The grids behind the acceptance checks on classifier agreement.
fn harness_preset() -> Vec<HarnessPoint> {
    let tbs = [
        TieBreakPolicy::ForManipulators,
        TieBreakPolicy::AgainstManipulators,
    ];
    let mut grid = Vec::new();
    let mut push = |rule: Rule, ns: std::ops::RangeInclusive<usize>, cs: &[usize]| {
        for tb in &tbs {
            for &c in cs {
                for n in ns.clone() {
                    grid.push(HarnessPoint {
                        rule,
                        n,
                        c,
                        tie_break: tb.clone(),
                    });
                }
            }
        }
    };
    for m in 2..=4 {
        push(Rule::plurality(m), 1..=5, &[1, 2, 3]);
    }
    for m in 3..=5 {
        push(Rule::kapproval(2, m).expect("k < m"), 1..=3, &[1]);
    }
    for m in 3..=4 {
        push(Rule::kapproval(2, m).expect("k < m"), 1..=3, &[2]);
        push(Rule::veto(m), 1..=4, &[1, 2]);
        push(Rule::borda(m), 1..=4, &[1]);
    }
    grid
}

fn cmd_harness(a: &HarnessArgs) -> CliResult<()> {
    let grid = match (a.preset, a.rule) {
        (Some(Preset::PaperGrid), _) => harness_preset(),
        (None, Some(r)) => {
            let mut grid = Vec::new();
            for &m in &a.m {
                let rule = build_rule(&RuleOpts { rule: r, k: a.k, m })?;
                for &t in &a.tiebreak {
                    for &c in &a.c {
                        for &n in &a.n {
                            grid.push(HarnessPoint {
                                rule,
                                n,
                                c,
                                tie_break: tie_of(t, m),
                            });
                        }
                    }
                }
            }
            grid
        }
        (None, None) => return Err(invalid("give --preset or --rule")),
    };
    let options = OracleOptions {
        budget: Budget::new(a.oracle_budget)?,
        ..Default::default()
    };
    let report = agreement_harness(&grid, &options);
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    let mut out = Output::open(a.out.as_deref())?;
    out.write_all(json.as_bytes())?;
    out.write_all(b"\n")?;
    let summary_path = a.out.as_ref().map(|p| p.with_extension("summary.csv"));
    if let Some(path) = &summary_path {
        let mut w = csv::Writer::from_path(path).map_err(output::csv_err)?;
        w.write_record(output::HARNESS_HEADER)
            .map_err(output::csv_err)?;
        for (p, s) in &report.points {
            w.write_record(output::harness_record(p, s))
                .map_err(output::csv_err)?;
        }
        w.flush()?;
        out.also(path);
    }
    eprintln!(
        "{} grid points, {} disagreements, {} false-proof rows",
        report.points.len(),
        report.disagreements(),
        report.false_proof()
    );
    out.finish("harness", a, None)
}

fn run(cli: &Cli) -> CliResult<ExitCode> {
    match &cli.command {
        Command::Classify(a) => cmd_classify(a, false)?,
        Command::Oracle(a) => cmd_classify(a, true)?,
        Command::Count(a) => cmd_count(a)?,
        Command::Sample(a) => cmd_sample(a)?,
        Command::Estimate(a) => cmd_estimate(a)?,
        Command::Sweep(a) => cmd_sweep(a)?,
        Command::VerifyBounds(a) => {
            if !cmd_verify_bounds(a)? {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Harness(a) => cmd_harness(a)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
