use std::fs;
use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use zonobal::coloring::balance;
use zonobal::io::{
    bench, format_number, generate_instance, parse_instance, seeded_rng, serialize_instance,
    BenchGrid, Instance, InstanceKind, OutputFormat, RunConfig,
};
use zonobal::lewis::{check_inclusions, lewis_position, lewis_transform, lewis_weights, DEFAULT_MAX_ITER};
use zonobal::verify::{
    bound_report, brute_force_min_discrepancy, polar_identity_check, width_estimate, width_lower_bound,
    CSV_HEADER, ORACLE_MAX_N,
};
use zonobal::zonotope::Zonotope;
use zonobal::{Error, ErrorKind};

#[derive(Parser, Debug)]
#[command(name = "zonobal", version, about = "Balance vectors inside a zonotope")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalOpts {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Initial scale multiplier.
    #[arg(long, global = true, default_value_t = 2.0)]
    c0: f64,
    /// Rejected draws before the multiplier doubles.
    #[arg(long, global = true, default_value_t = 16)]
    retries: usize,
    #[arg(long, global = true)]
    tol_feas: Option<f64>,
    #[arg(long, global = true)]
    tol_lewis: Option<f64>,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value = "text")]
    format: OutputFormat,
    /// Finish by enumeration once at most 8 coordinates are active.
    #[arg(long, global = true)]
    exact_finish: bool,
    /// Pull vectors slightly outside the body back onto its boundary.
    #[arg(long, global = true)]
    rescale: bool,
}

impl GlobalOpts {
    fn config(&self) -> RunConfig {
        let mut cfg = RunConfig {
            seed: self.seed,
            c0: self.c0,
            retries: self.retries,
            out: self.out.clone(),
            format: self.format,
            exact_finish: self.exact_finish,
            rescale: self.rescale,
            ..RunConfig::default()
        };
        if let Some(t) = self.tol_feas {
            cfg.tol_feas = t;
        }
        if let Some(t) = self.tol_lewis {
            cfg.tol_lewis = t;
        }
        cfg
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute signs with small discrepancy.
    Balance {
        /// Instance file; standard input when absent or `-`.
        file: Option<PathBuf>,
        /// Also compute the exhaustive optimum (n <= 22).
        #[arg(long)]
        oracle: bool,
    },
    /// Zonotope norm of a point, or of every vector in the file.
    Norm {
        file: Option<PathBuf>,
        /// Whitespace-separated coordinates.
        #[arg(long, allow_hyphen_values = true)]
        x: Option<String>,
    },
    /// Lewis weights of the generators.
    Lewis { file: Option<PathBuf> },
    /// Exhaustive minimum discrepancy.
    Oracle { file: Option<PathBuf> },
    /// Check the Lewis inclusions and the polar identity on an instance.
    Check {
        file: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Gaussian mean width of the Lewis body.
    Width {
        file: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// Write a random instance.
    Gen {
        kind: InstanceKind,
        #[arg(long)]
        d: usize,
        /// Generators; defaults to d for cube kinds and 4d otherwise.
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        n: usize,
    },
    /// Sweep kinds, dimensions and seeds; one CSV row per run.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "cube,spencer-random,random-zonotope,duplicated")]
        kinds: Vec<InstanceKind>,
        #[arg(long, value_delimiter = ',', default_value = "4,8,16")]
        dims: Vec<usize>,
        /// Runs per (kind, d).
        #[arg(long, default_value_t = 3)]
        seeds: usize,
        #[arg(long, default_value_t = 4)]
        m_factor: usize,
        #[arg(long, default_value_t = 16)]
        oracle_max_n: usize,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }

    fn numerical(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e.kind() {
            ErrorKind::Input => Failure::input(e.to_string()),
            ErrorKind::Numerical => Failure::numerical(e.to_string()),
        }
    }
}

fn read_instance(file: &Option<PathBuf>) -> Result<Instance, Failure> {
    let text = match file {
        Some(p) if p.as_os_str() != "-" => {
            fs::read_to_string(p).map_err(|e| Failure::input(format!("{}: {e}", p.display())))?
        }
        _ => {
            let mut s = String::new();
            io::stdin()
                .read_to_string(&mut s)
                .map_err(|e| Failure::input(format!("stdin: {e}")))?;
            s
        }
    };
    parse_instance(&text).map_err(|e| Failure::from(Error::from(e)))
}

fn emit(cfg: &RunConfig, text: &str) -> Result<(), Failure> {
    match &cfg.out {
        Some(p) => fs::write(p, text).map_err(|e| Failure::input(format!("{}: {e}", p.display()))),
        None => io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::input(format!("stdout: {e}"))),
    }
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|&v| format_number(v)).collect::<Vec<_>>().join(" ")
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = cli.global.config();
    let mut out = String::new();
    match cli.command {
        Command::Balance { file, oracle } => {
            let inst = read_instance(&file)?;
            let (z, fam, _) = inst.problem(cfg.preprocess_options()).map_err(Error::from)?;
            let report = balance(&z, &fam, &cfg.coloring_params(), cfg.seed).map_err(Error::from)?;
            let opt = if oracle {
                if fam.len() > ORACLE_MAX_N {
                    return Err(Failure::input(format!("oracle needs n <= {ORACLE_MAX_N}, got {}", fam.len())));
                }
                Some(brute_force_min_discrepancy(&z, &fam).map_err(Error::from)?)
            } else {
                None
            };
            let row = bound_report(inst.tag("kind").unwrap_or("file"), &report, opt.as_ref());
            match cfg.format {
                OutputFormat::Text => {
                    out.push_str(&format!("config: {}\n", cfg.describe()));
                    out.push_str(&row.to_text());
                    for (i, r) in report.log.iter().enumerate() {
                        out.push_str(&format!(
                            "round {i}: active {} -> {} scale {} multiplier {} attempts {} increment {}{}\n",
                            r.active_before,
                            r.active_after,
                            r.scale_used,
                            r.multiplier,
                            r.attempts,
                            r.increment,
                            if r.exact { " exact" } else { "" }
                        ));
                    }
                    let signs: Vec<String> = report.signs.iter().map(|s| s.to_string()).collect();
                    out.push_str(&format!("signs: {}\n", signs.join(" ")));
                }
                OutputFormat::Csv => {
                    out.push_str(&format!("# config {}\n{CSV_HEADER}\n{}\n", cfg.describe(), row.to_csv()));
                }
            }
        }
        Command::Norm { file, x } => {
            let inst = read_instance(&file)?;
            let z = Zonotope::new(inst.a.clone()).map_err(Error::from)?;
            let points: Vec<Vec<f64>> = match x {
                Some(s) => {
                    let p = s
                        .split_whitespace()
                        .map(|t| t.parse::<f64>().map_err(|_| Failure::input(format!("bad coordinate `{t}`"))))
                        .collect::<Result<Vec<_>, _>>()?;
                    if p.len() != z.dim() {
                        return Err(Failure::input(format!("--x has {} coordinates, expected {}", p.len(), z.dim())));
                    }
                    vec![p]
                }
                None => (0..inst.n()).map(|i| inst.v.row(i).iter().copied().collect()).collect(),
            };
            for p in &points {
                let v = z.norm(p).map_err(Error::from)?;
                out.push_str(&format!("{}\n", format_number(v)));
            }
        }
        Command::Lewis { file } => {
            let inst = read_instance(&file)?;
            let (z, _, _) = inst.problem(cfg.preprocess_options()).map_err(Error::from)?;
            let a = z.generators();
            let w = lewis_weights(a, cfg.tol_lewis, DEFAULT_MAX_ITER).map_err(Error::from)?;
            let pos = lewis_transform(a, &w).map_err(Error::from)?;
            out.push_str(&format!("weights: {}\n", join(&w.weights)));
            out.push_str(&format!("sum: {}\n", format_number(w.weights.iter().sum())));
            out.push_str(&format!("residual: {:e}\n", pos.residual));
            out.push_str(&format!("iterations: {}\n", w.iterations));
        }
        Command::Oracle { file } => {
            let inst = read_instance(&file)?;
            let (z, fam, _) = inst.problem(cfg.preprocess_options()).map_err(Error::from)?;
            let r = brute_force_min_discrepancy(&z, &fam).map_err(Error::from)?;
            let signs: Vec<String> = r.best_signs.iter().map(|s| s.to_string()).collect();
            out.push_str(&format!(
                "opt: {}\nsigns: {}\nevaluations: {}\n",
                format_number(r.opt),
                signs.join(" "),
                r.evaluations
            ));
        }
        Command::Check { file, samples, trials, tol } => {
            let inst = read_instance(&file)?;
            let (z, mut fam, _) = inst.problem(cfg.preprocess_options()).map_err(Error::from)?;
            let mut rng = seeded_rng(cfg.seed);
            let pos = lewis_position(z.generators(), cfg.tol_lewis, DEFAULT_MAX_ITER).map_err(Error::from)?;
            let inc = check_inclusions(&pos, samples, &mut rng);
            fam.ensure_preimages(&z).map_err(Error::from)?;
            let subset: Vec<usize> = (0..fam.len()).collect();
            let gap = polar_identity_check(&z, &fam, &subset, trials, &mut rng).map_err(Error::from)?;
            let ok_inc = inc.passed(tol);
            let ok_polar = gap <= tol * (1.0 + fam.len() as f64);
            out.push_str(&format!(
                "inclusions: max violation {:e} over {} directions: {}\n",
                inc.max_violation,
                inc.samples,
                if ok_inc { "ok" } else { "FAIL" }
            ));
            out.push_str(&format!(
                "polar identity: max gap {gap:e} over {trials} trials: {}\n",
                if ok_polar { "ok" } else { "FAIL" }
            ));
            emit(&cfg, &out)?;
            if !(ok_inc && ok_polar) {
                return Err(Failure::numerical("check failed"));
            }
            return Ok(());
        }
        Command::Width { file, samples } => {
            let inst = read_instance(&file)?;
            let (z, _, _) = inst.problem(cfg.preprocess_options()).map_err(Error::from)?;
            let pos = lewis_position(z.generators(), cfg.tol_lewis, DEFAULT_MAX_ITER).map_err(Error::from)?;
            let mut rng = seeded_rng(cfg.seed);
            let w = width_estimate(&pos, samples, &mut rng).map_err(Error::from)?;
            out.push_str(&format!(
                "mean: {}\nstderr: {}\nsamples: {}\nlower_bound: {}\n",
                w.mean,
                w.stderr,
                w.samples,
                width_lower_bound(&pos)
            ));
        }
        Command::Gen { kind, d, m, n } => {
            let m = m.unwrap_or_else(|| kind.default_m(d));
            let mut rng = seeded_rng(cfg.seed);
            let mut inst = generate_instance(kind, d, m, n, &mut rng).map_err(Error::from)?;
            inst.comments[0].push_str(&format!(" seed={}", cfg.seed));
            out = serialize_instance(&inst);
        }
        Command::Bench { kinds, dims, seeds, m_factor, oracle_max_n } => {
            if oracle_max_n > ORACLE_MAX_N {
                return Err(Failure::input(format!("--oracle-max-n must be at most {ORACLE_MAX_N}")));
            }
            let grid = BenchGrid {
                kinds,
                dims,
                seeds,
                master_seed: cfg.seed,
                m_factor,
                params: cfg.coloring_params(),
                oracle_max_n,
            };
            let runs = bench(&grid).map_err(Failure::from)?;
            out.push_str(&format!("# config {} m_factor={m_factor}\n{CSV_HEADER}\n", cfg.describe()));
            for r in runs {
                out.push_str(&r.row.to_csv());
                out.push('\n');
            }
        }
    }
    emit(&cfg, &out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

