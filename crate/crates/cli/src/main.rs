use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use emitpic::config::{load_config, AnodeConfig, SimConfig};
use emitpic::driver::{diode_gap, diode_sweep, run_simulation};
use emitpic::mesh::{read_mesh, BoundaryTag, Region};
use emitpic::oracle::{iv_sweep, OracleOptions};

#[derive(Parser)]
#[command(name = "emitpic", version, about = "Space-charge simulation above field-emitting cathodes")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "EMITPIC_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the simulation described by a configuration file.
    Run {
        config: PathBuf,
        /// Omit wall-clock timings so every output is reproducible.
        #[arg(long)]
        deterministic: bool,
        /// Output directory, overriding `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Particle current-voltage sweep of a planar diode against the
    /// semianalytic solution.
    DiodeSweep {
        config: PathBuf,
        /// CSV destination (default: standard output).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Semianalytic current-voltage curve of the configured diode.
    Oracle { config: PathBuf },
    /// Read a mesh file, check it and print a summary.
    CheckMesh { path: PathBuf },
}

fn base_dir(config: &Path) -> PathBuf {
    config.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn load(path: &Path) -> Result<SimConfig> {
    load_config(path).with_context(|| format!("loading {}", path.display()))
}

fn run(config: &Path, deterministic: bool, out: Option<PathBuf>) -> Result<()> {
    let mut cfg = load(config)?;
    cfg.deterministic |= deterministic;
    if let Some(out) = out {
        cfg.output.dir = Some(std::env::current_dir()?.join(out));
    }
    let summary = run_simulation(&cfg, &base_dir(config))?;
    let last = summary.history.last().expect("initial state is recorded");
    println!("steps: {}", last.step);
    println!("time: {:e} s", last.time);
    println!("live superparticles: {}", last.live);
    match summary.final_current {
        Some(i) => println!("emitted current (moving average): {i:e} A"),
        None => println!("emitted current: {:e} A", last.emitted_current),
    }
    match summary.steady_at {
        Some(t) => println!("steady from: {t:e} s"),
        None => println!("steady: no"),
    }
    Ok(())
}

fn sweep(config: &Path, out: Option<PathBuf>) -> Result<()> {
    let cfg = load(config)?;
    let report = diode_sweep(&cfg, &base_dir(config))?;
    report.write_csv(output(out.as_deref())?)?;
    eprintln!("rms relative error: {:.4}", report.rms_error());
    Ok(())
}

fn oracle(config: &Path) -> Result<()> {
    let cfg = load(config)?;
    let gap = diode_gap(&cfg)?;
    let voltages: Vec<f64> = match (&cfg.sweep, cfg.anode) {
        (Some(s), _) => s.voltages.iter().map(|v| v.si).collect(),
        (None, AnodeConfig::Voltage { voltage }) => vec![voltage.si],
        (None, AnodeConfig::Field { .. }) => bail!("oracle needs [sweep] voltages or an anode voltage"),
    };
    let opts = OracleOptions { temperature: cfg.emission.temperature.si, ..OracleOptions::default() };
    let points = iv_sweep(gap, 1.0, &voltages, &cfg.emission.material()?, &opts)?;
    let mut w = output(None)?;
    writeln!(w, "voltage_V,J_A_per_m2,cathode_field_V_per_m,child_langmuir_J_A_per_m2,iterations")?;
    for p in points {
        writeln!(w, "{},{:e},{:e},{:e},{}", p.voltage, p.current_density, p.cathode_field, p.child_langmuir, p.iterations)?;
    }
    Ok(())
}

fn check_mesh(path: &Path) -> Result<()> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mesh = read_mesh(BufReader::new(file))?;
    mesh.check_invariants()?;
    let b = mesh.bounds();
    println!("nodes: {}", mesh.num_nodes());
    println!("cells: {}", mesh.num_cells());
    for region in [Region::Vacuum, Region::Metal] {
        println!("{region:?} cells: {}", mesh.cells_in(region).count());
    }
    println!("volume: {:e} m^3", mesh.total_volume());
    println!("bounds: {:?} .. {:?}", b.min.as_slice(), b.max.as_slice());
    for id in 1..=5 {
        let tag = BoundaryTag::from_id(id).expect("tags 1 to 5 exist");
        println!("{tag}: {} faces, area {:e} m^2", mesh.faces_with_tag(tag).len(), mesh.tag_area(tag));
    }
    println!("euler characteristic: {}", mesh.euler_characteristic());
    Ok(())
}

fn main() -> Result<()> {
    env_logger::init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Run { config, deterministic, out } => run(&config, deterministic, out),
        Command::DiodeSweep { config, out } => sweep(&config, out),
        Command::Oracle { config } => oracle(&config),
        Command::CheckMesh { path } => check_mesh(&path),
    }
}
