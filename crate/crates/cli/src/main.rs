use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use curlrec_cli::{run, CliError, Command, RunConfig, Settings};

/// Curl-curl dG solver with H(curl) patch reconstruction and a posteriori estimation.
#[derive(Debug, Parser)]
#[command(name = "curlrec", version)]
struct Args {
    /// solve | estimate | reconstruct | study-h | study-p | adapt | verify
    command: Option<Command>,
    /// `key = value` configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Mesh file (`vertices N` / `cells M` format).
    #[arg(long)]
    mesh: Option<String>,
    /// Unit square split into N x N squares.
    #[arg(long, value_name = "N")]
    square: Option<String>,
    /// L-shaped domain with N x N squares per unit block.
    #[arg(long, value_name = "N")]
    lshape: Option<String>,
    /// poly | trig | lshape
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    p: Option<String>,
    /// Reconstruction degree (default p + 2).
    #[arg(long)]
    q: Option<String>,
    #[arg(long)]
    omega: Option<String>,
    /// Constant or `default, x<c:value, ...`.
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    nu: Option<String>,
    /// Penalty parameter or `auto`.
    #[arg(long)]
    eta_star: Option<String>,
    #[arg(long)]
    levels: Option<String>,
    /// Dörfler marking fraction in (0, 1].
    #[arg(long)]
    theta: Option<String>,
    #[arg(long)]
    p_max: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long, value_name = "DIR")]
    out: Option<String>,
    /// Reverse edge orientations in the integration-by-parts oracle (debug).
    #[arg(long, hide = true)]
    flip_orientation: bool,
}

fn config(args: &Args) -> Result<RunConfig, CliError> {
    let mut settings = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.clone(), source })?;
            Settings::parse(&text)?
        }
        None => Settings::default(),
    };
    let flags = [
        ("mesh", &args.mesh),
        ("square", &args.square),
        ("lshape", &args.lshape),
        ("problem", &args.problem),
        ("p", &args.p),
        ("q", &args.q),
        ("omega", &args.omega),
        ("eps", &args.eps),
        ("nu", &args.nu),
        ("eta_star", &args.eta_star),
        ("levels", &args.levels),
        ("theta", &args.theta),
        ("p_max", &args.p_max),
        ("seed", &args.seed),
        ("out", &args.out),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            settings.set(key, v.clone());
        }
    }
    if args.flip_orientation {
        settings.set("flip_orientation", "true");
    }
    RunConfig::from_settings(args.command, &settings)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = config(&args).and_then(|cfg| {
        let out = run(&cfg)?;
        out.write_to(&cfg.out)?;
        Ok(out)
    });
    match result {
        Ok(out) => {
            print!("{}", out.stdout);
            match out.failed {
                Some(names) => {
                    eprintln!("failing oracle: {names}");
                    ExitCode::FAILURE
                }
                None => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
