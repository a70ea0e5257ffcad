use clap::{Args, Parser, Subcommand};
use margulis::invariants::Verdict;
use margulis::io::{cmd_certify, cmd_fiber, cmd_lamination, cmd_transition, parse_config, write_outputs, Config};
use margulis::par::Exec;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "margulis", version, about = "Properness certificates and fibrations for affine deformations of Schottky groups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ping-pong, Margulis invariant scan and minimax field, reconciled.
    Certify(Common),
    /// Fibration probes for varpi, and Pi when k_star < 0.
    Fiber(Common),
    /// Section solves and the AdS-to-flat convergence tables.
    Transition(Common),
    /// Tight-pair chords and the domain outline as SVG.
    Lamination(Common),
}

#[derive(Args)]
struct Common {
    /// Config JSON (see docs/schemas.md).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: config `out`, else the current directory).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for the fibration probes.
    #[arg(long)]
    seed: Option<u64>,
    /// Mesh spacing (knob h).
    #[arg(long)]
    h: Option<f64>,
    /// Truncation radius of the domain.
    #[arg(long)]
    radius: Option<f64>,
    /// Word depth of the Margulis invariant scan.
    #[arg(long)]
    depth: Option<usize>,
    /// Sign margin of the verdict.
    #[arg(long)]
    delta: Option<f64>,
    /// Number of fibration probes.
    #[arg(long)]
    probes: Option<usize>,
    /// Any knob, as KEY=JSON (repeatable), e.g. --set t_grid=[0.1,0.05].
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Run the sweeps single-threaded.
    #[arg(long)]
    sequential: bool,
}

impl Common {
    fn load(&self) -> margulis::Result<Config> {
        let mut cfg = parse_config(&self.config)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        let knobs = [
            ("h", self.h.map(|v| v.to_string())),
            ("radius", self.radius.map(|v| v.to_string())),
            ("word_depth", self.depth.map(|v| v.to_string())),
            ("delta", self.delta.map(|v| v.to_string())),
            ("probes", self.probes.map(|v| v.to_string())),
        ];
        for (k, v) in knobs {
            if let Some(v) = v {
                cfg.set(k, &v)?;
            }
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| margulis::Error::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    fn out_dir(&self, cfg: &Config) -> PathBuf {
        self.out.clone().or_else(|| cfg.out.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("."))
    }
}

fn run(cli: &Cli) -> margulis::Result<Verdict> {
    let (Command::Certify(c) | Command::Fiber(c) | Command::Transition(c) | Command::Lamination(c)) = &cli.command;
    let cfg = c.load()?;
    let exec = if c.sequential { Exec::Sequential } else { Exec::default() };
    let (report, drawing) = match &cli.command {
        Command::Certify(_) => (cmd_certify(&cfg, exec)?, None),
        Command::Fiber(_) => (cmd_fiber(&cfg, exec)?, None),
        Command::Transition(_) => (cmd_transition(&cfg, exec)?, None),
        Command::Lamination(_) => {
            let (r, d) = cmd_lamination(&cfg, exec)?;
            (r, Some(d))
        }
    };
    let dir = c.out_dir(&cfg);
    write_outputs(&dir, &report, drawing.as_ref())?;
    let v = &report.verdict.verdict.value;
    eprintln!("verdict: {:?} (k_alpha = {:.6e})", v.status, v.k_alpha);
    if let Some(f) = &report.field {
        eprintln!("k_star = {:.6e}", f.k_star.value);
    }
    for n in &report.notes {
        eprintln!("note: {n}");
    }
    eprintln!("wrote {}", dir.join(format!("{}.json", report.command)).display());
    Ok(report.status())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Verdict::Nonproper) => ExitCode::from(2),
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
