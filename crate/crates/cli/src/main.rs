use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use moist_pe::io::{default_out_dir, run_to_dir};
use moist_pe::operators::{dense_mass, dense_stiffness, DenseMatrix};
use moist_pe::verify::{eps_sweep, halving_list, manufactured_convergence, SweepConfig, Study, VI_TRIALS};
use moist_pe::{initial_state, load_params, verify_scenario, Error, Model, Scenario, SimParams, Staggering, TemperatureForm};

/// Largest operator dimension `dump-operators` will densify.
const MAX_DENSE_DOFS: usize = 4096;

#[derive(Parser, Debug)]
#[command(name = "moist-pe", version, about = "Moist primitive equations: runs, verification suites and convergence studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Config file (TOML); missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (default: $PEMOIST_OUT_DIR or ./out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Comma-separated, strictly decreasing regularization parameters.
    #[arg(long, global = true, value_delimiter = ',')]
    eps_list: Option<Vec<f64>>,

    #[arg(long, global = true)]
    scenario: Option<String>,

    #[arg(long, global = true)]
    form: Option<FormArg>,

    #[arg(long, global = true)]
    f_plus: Option<Switch>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate a scenario and write diagnostics and snapshots.
    Run,
    /// Run a scenario under every monitor; exit 0 iff nothing is violated.
    Verify,
    /// Convergence in the regularization parameter.
    SweepEps,
    /// Manufactured-solution convergence tables.
    Mms {
        #[arg(long, default_value = "all")]
        study: String,
    },
    /// Write the dense mass and stiffness matrices as CSV.
    DumpOperators,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormArg {
    Theta,
    #[value(name = "T")]
    T,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Switch {
    On,
    Off,
}

enum Failure {
    Usage(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

type CmdResult = Result<ExitCode, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: &Cli) -> CmdResult {
    let params = resolve_params(cli)?;
    let out = cli.out.clone().unwrap_or_else(default_out_dir);
    match &cli.command {
        Command::Run => cmd_run(&params, &out),
        Command::Verify => cmd_verify(&params, &out),
        Command::SweepEps => cmd_sweep(&params, cli.eps_list.as_deref(), &out),
        Command::Mms { study } => cmd_mms(&params, study, &out),
        Command::DumpOperators => cmd_dump_operators(&params, &out),
    }
}

fn resolve_params(cli: &Cli) -> Result<SimParams, Failure> {
    let mut p = match &cli.config {
        Some(path) => load_params(path)?,
        None => SimParams::default(),
    };
    if let Some(s) = cli.seed {
        p.output.seed = s;
    }
    if let Some(t) = cli.threads {
        p.output.threads = t;
    }
    if let Some(s) = &cli.scenario {
        p.output.scenario = s.clone();
    }
    if let Some(f) = cli.form {
        p.scheme.form = match f {
            FormArg::Theta => TemperatureForm::Theta,
            FormArg::T => TemperatureForm::Temperature,
        };
    }
    if let Some(s) = cli.f_plus {
        p.use_f_plus = matches!(s, Switch::On);
    }
    p.validate()?;
    Ok(p)
}

fn scenario_of(p: &SimParams) -> Result<Scenario, Failure> {
    Ok(p.output.scenario.parse::<Scenario>()?)
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Failure::Usage(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

fn cmd_run(p: &SimParams, out: &Path) -> CmdResult {
    let scenario = scenario_of(p)?;
    let model = Model::new(p)?;
    let initial = initial_state(scenario, &model)?;
    let fin = run_to_dir(&model, &initial, scenario.name(), out)?;
    println!("{}: completed {} steps, t = {}, output in {}", scenario.name(), p.steps(), fin.t, out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(p: &SimParams, out: &Path) -> CmdResult {
    let scenario = scenario_of(p)?;
    let model = Model::new(p)?;
    let report = verify_scenario(&model, scenario)?;
    let summary = report.summary();
    write(&out.join("verify.csv"), &report.to_csv())?;
    write(&out.join("verify_summary.txt"), &summary)?;
    if let Some(d) = &report.degiorgi {
        write(&out.join("levels.csv"), &d.to_csv())?;
    }
    print!("{summary}");
    if report.failure.is_some() || !report.violations().is_empty() {
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(p: &SimParams, eps: Option<&[f64]>, out: &Path) -> CmdResult {
    let cfg = SweepConfig {
        model: Model::new(p)?,
        scenario: scenario_of(p)?,
        eps_list: eps.map_or_else(|| halving_list(0.1, 5), <[f64]>::to_vec),
        threads: p.output.threads,
        seed: p.output.seed,
        vi_trials: VI_TRIALS,
    };
    let r = eps_sweep(&cfg)?;
    write(&out.join("sweep.csv"), &r.to_csv())?;
    let mut s = String::new();
    for (m, d) in r.members.iter().zip(r.distances.iter().map(Some).chain(std::iter::once(None))) {
        let _ = write!(s, "epsilon {:.6e}: vi residual {:.3e}", m.epsilon, m.vi_residual);
        if let Some(d) = d {
            let _ = write!(s, ", distance to next {d:.6e}");
        }
        if let Some(e) = &m.error {
            let _ = write!(s, ", run failed: {e}");
        }
        s.push('\n');
    }
    if let Some(spread) = r.moist_spread() {
        let _ = writeln!(s, "moist energy residual spread {spread:.3e}");
    }
    let _ = writeln!(s, "verdict: {}", r.verdict);
    print!("{s}");
    if r.members.iter().any(|m| m.error.is_some()) {
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_mms(p: &SimParams, study: &str, out: &Path) -> CmdResult {
    let studies = if study == "all" {
        vec![Study::Diffusion, Study::Hydrostatic, Study::Advection, Study::Full]
    } else {
        vec![study.parse::<Study>()?]
    };
    for st in studies {
        let t = manufactured_convergence(st, p)?;
        let csv = t.to_csv();
        write(&out.join(format!("mms_{st}.csv")), &csv)?;
        println!("# {st}: observed order {:.3}", t.observed_order());
        print!("{csv}");
    }
    Ok(ExitCode::SUCCESS)
}

fn matrix_csv(m: &DenseMatrix) -> String {
    let mut s = String::new();
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| format!("{:.17e}", m[(r, c)])).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

fn cmd_dump_operators(p: &SimParams, out: &Path) -> CmdResult {
    let model = Model::new(p)?;
    let g = &model.grid;
    let blocks = [
        ("v_x", &model.diff_v, Staggering::XFace),
        ("v_y", &model.diff_v, Staggering::YFace),
        ("T", &model.diff_t, Staggering::Cell),
        ("q", &model.diff_q, Staggering::Cell),
    ];
    for (_, _, stag) in &blocks {
        let n = g.layout(*stag).len();
        if n > MAX_DENSE_DOFS {
            return Err(Failure::Usage(format!("dense dump needs at most {MAX_DENSE_DOFS} unknowns, grid has {n}")));
        }
    }
    for stag in [Staggering::Cell, Staggering::XFace, Staggering::YFace] {
        write(&out.join(format!("mass_{}.csv", stag_name(stag))), &matrix_csv(&dense_mass(g, stag)))?;
    }
    for (name, op, stag) in blocks {
        let k = dense_stiffness(op, g, stag);
        let defect = (&k - k.transpose()).abs().max();
        write(&out.join(format!("stiffness_{name}.csv")), &matrix_csv(&k))?;
        println!("stiffness_{name}: {}x{}, symmetry defect {defect:.3e}", k.nrows(), k.ncols());
    }
    Ok(ExitCode::SUCCESS)
}

fn stag_name(s: Staggering) -> &'static str {
    match s {
        Staggering::Cell => "cell",
        Staggering::XFace => "xface",
        Staggering::YFace => "yface",
        Staggering::HalfLevel => "half",
        Staggering::Surface => "surface",
    }
}
