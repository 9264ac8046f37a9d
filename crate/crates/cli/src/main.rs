use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use ncharm_core::atoms::{h1c_upper_bound, Atom, Scheme};
use ncharm_core::circfun::{lp_c_norm, CircleFun};
use ncharm_core::norms::{
    bmo_c_norm, bmo_r_norm, garsia_norm, linf_c_norm, mobius_orbit_norm, star_c_norm, BmoNorm, GridSpec, MobiusGrid,
    NormSearchGrid,
};
use ncharm_core::squarefun::{h1c_area_norm, h1c_g_norm, ConeConfig};
use ncharm_core::verify::{corpus_generate, lower_bound_with, run_study, CorpusSpec};

mod config;

#[derive(Parser)]
#[command(name = "ncharm", version, about = "Matrix-valued harmonic analysis on the circle")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a verification study described by a TOML file.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Corpus size.
        #[arg(long)]
        count: Option<usize>,
        /// Cone aperture.
        #[arg(long)]
        alpha: Option<f64>,
        /// Angular samples for square-function L¹ norms.
        #[arg(long = "n-t")]
        n_t: Option<usize>,
        /// Skip the refined rerun.
        #[arg(long)]
        no_refine: bool,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Override any setting, e.g. `--set tolerances.identity=1e-8`.
        #[arg(long, value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Evaluate one norm of a function stored as JSON.
    Norm {
        file: PathBuf,
        #[arg(long)]
        norm: String,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 2.0)]
        alpha: f64,
        /// Search grid as `centers=..,levels=..,disk_radii=..,disk_angles=..,r_max=..`.
        #[arg(long)]
        grid: Option<String>,
        /// Dyadic levels for `h1c-upper` and `h1c-lower`; global atoms if absent.
        #[arg(long)]
        levels: Option<u32>,
        #[arg(long = "n-t", default_value_t = 64)]
        n_t: usize,
    },
    /// Generate a corpus from a TOML spec into a directory of JSON files.
    Corpus {
        spec: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
}

const NORMS: [&str; 11] = [
    "lp_c", "linf_c", "bmo_c", "bmo_r", "star_c", "garsia", "mobius-orbit", "h1c-upper", "h1c-lower", "area-h1", "g-h1",
];

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn run(config: &Path, overrides: &config::Overrides) -> Result<bool> {
    let cfg = config::load(config, overrides)?;
    let report = run_study(cfg.study, &cfg.settings).with_context(|| format!("study {}", cfg.study))?;
    let csv = report.to_csv()?;
    write(&cfg.json_path, &report.to_json())?;
    write(&cfg.csv_path, &csv)?;
    print!("{}", report.summary());
    println!("report: {}", cfg.json_path.display());
    println!("rows: {}", cfg.csv_path.display());
    Ok(report.passed())
}

fn load_function(path: &Path) -> Result<CircleFun> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    match CircleFun::from_json(&text) {
        Ok(f) => Ok(f),
        Err(e) => match Atom::from_json(&text) {
            Ok(atom) => Ok(atom.data().clone()),
            Err(_) => Err(e).with_context(|| format!("parsing {}", path.display())),
        },
    }
}

fn print_bmo(b: &BmoNorm) {
    println!("value: {:.15e}", b.value);
    println!("mean: {:.15e}", b.mean_norm);
    println!("star: {:.15e}", b.star.value);
    if b.star.value <= 1e-12 * (1.0 + b.mean_norm) {
        println!("witness: none");
    } else {
        println!("witness: arc center={:.12} radius={:.12}", b.star.witness.center, b.star.witness.radius);
    }
}

struct NormArgs<'a> {
    name: &'a str,
    p: f64,
    alpha: f64,
    grid: Option<&'a str>,
    levels: Option<u32>,
    n_t: usize,
}

fn norm(file: &Path, a: &NormArgs) -> Result<()> {
    if !NORMS.contains(&a.name) {
        bail!("unknown norm `{}`; one of: {}", a.name, NORMS.join(", "));
    }
    let f = load_function(file)?;
    let spec = match a.grid {
        Some(text) => GridSpec::parse(text)?,
        None => GridSpec::default(),
    };
    let grid = NormSearchGrid::from_spec(&spec)?;
    let scheme = a.levels.map_or(Scheme::Global, Scheme::Dyadic);
    let cone = ConeConfig::default();
    println!("norm: {}", a.name);
    match a.name {
        "lp_c" => println!("value: {:.15e}", lp_c_norm(&f, a.p)?),
        "linf_c" => println!("value: {:.15e}", linf_c_norm(&f)?),
        "bmo_c" => print_bmo(&bmo_c_norm(&f, &grid)?),
        "bmo_r" => print_bmo(&bmo_r_norm(&f, &grid)?),
        "star_c" => {
            let s = star_c_norm(&f, &grid)?;
            println!("value: {:.15e}", s.value);
            println!("witness: arc center={:.12} radius={:.12}", s.witness.center, s.witness.radius);
        }
        "garsia" => {
            let s = garsia_norm(&f, &grid)?;
            let z = s.witness.z();
            println!("value: {:.15e}", s.value);
            println!("witness: point z={:.12}{:+.12}i", z.re, z.im);
        }
        "mobius-orbit" => {
            let s = mobius_orbit_norm(&f, &MobiusGrid::default())?;
            let z = s.witness.base.z();
            println!("value: {:.15e}", s.value);
            println!("witness: base z={:.12}{:+.12}i gamma={}", z.re, z.im, s.witness.gamma);
        }
        "h1c-upper" => {
            let (value, decomposition) = h1c_upper_bound(&f, scheme)?;
            println!("value: {value:.15e}");
            println!("atoms: {}", decomposition.atoms().count());
            println!("residual: {:.3e}", decomposition.residual(&f)?);
        }
        "h1c-lower" => {
            let (_, decomposition) = h1c_upper_bound(&f, scheme)?;
            let value = lower_bound_with(&f, &[], &grid, &decomposition.support_arcs())?;
            println!("value: {value:.15e}");
        }
        "area-h1" => println!("value: {:.15e}", h1c_area_norm(&f, a.alpha, a.n_t, &cone)?),
        "g-h1" => println!("value: {:.15e}", h1c_g_norm(&f, a.n_t, &cone)?),
        _ => unreachable!(),
    }
    Ok(())
}

fn corpus(spec_path: &Path, out: &Path) -> Result<()> {
    let text = std::fs::read_to_string(spec_path).with_context(|| format!("reading {}", spec_path.display()))?;
    let spec: CorpusSpec = toml::from_str(&text).with_context(|| format!("parsing {}", spec_path.display()))?;
    let corpus = corpus_generate(&spec)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write(&out.join("manifest.json"), &serde_json::to_string_pretty(&spec)?)?;
    for i in 0..corpus.len() {
        write(&out.join(format!("item-{i:04}.json")), &corpus.item_json(i))?;
    }
    println!("{} items written to {}", corpus.len(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            config,
            seed,
            count,
            alpha,
            n_t,
            no_refine,
            out_dir,
            set,
        } => {
            let overrides = config::Overrides {
                seed,
                count,
                alpha,
                n_t,
                refine: no_refine.then_some(false),
                out_dir,
                set,
            };
            run(&config, &overrides)
        }
        Command::Norm {
            file,
            norm: name,
            p,
            alpha,
            grid,
            levels,
            n_t,
        } => norm(
            &file,
            &NormArgs {
                name: &name,
                p,
                alpha,
                grid: grid.as_deref(),
                levels,
                n_t,
            },
        )
        .map(|()| true),
        Command::Corpus { spec, out } => corpus(&spec, &out).map(|()| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("one or more checks failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
