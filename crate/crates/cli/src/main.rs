use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use thzreach_core::allocation::{allocation_report, write_allocation_csv, CenterOut, LinkDemand, RateModel};
use thzreach_core::channel::{
    absorption_windows, linear_grid, path_loss_spectrum, spectral_windows, DEFAULT_WINDOW_THRESHOLD_DB,
};
use thzreach_core::experiment::{self, load_scene, load_table, Format, RunConfig, Technique};
use thzreach_core::geometry::{HallwayLayout, SceneDocument};
use thzreach_core::raytracer::write_path_dump;
use thzreach_core::{AbsorptionTable, Scene, SpectralWindow, Vec3};

/// Indoor mm-wave/THz reach simulator.
#[derive(Parser)]
#[command(name = "thzreach", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate every technique, carrier and receiver; write CSV and summary.
    Run(RunArgs),
    /// Path-loss spectrum of one link as `frequency_hz,path_loss_db`.
    Spectrum(SpectrumArgs),
    /// Spectral windows of one link.
    Windows(WindowsArgs),
    /// Center-out sub-window allocation report.
    Allocate(AllocateArgs),
    /// Write the default hallway as a scene document.
    Scene(SceneArgs),
}

#[derive(Args)]
struct Inputs {
    /// Scene document (JSON) with endpoints; default is the E hallway.
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Absorption table (`frequency_hz,k_per_m`); default is synthetic.
    #[arg(long)]
    absorption: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    inputs: Inputs,
    /// Carriers in Hz, comma separated.
    #[arg(long, value_delimiter = ',')]
    frequencies: Option<Vec<f64>>,
    /// Techniques, comma separated (BASELINE, UMMIMO, REFLECTARRAY, HYPERSURFACE, JOINT).
    #[arg(long, value_delimiter = ',')]
    techniques: Option<Vec<Technique>>,
    /// SNR threshold for reach, dB.
    #[arg(long)]
    threshold_db: Option<f64>,
    /// Highest reflection order (0 = LOS only).
    #[arg(long)]
    max_order: Option<usize>,
    /// Directory for results.csv and summary.txt; CSV goes to stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write every traced path as JSON lines.
    #[arg(long)]
    paths: Option<PathBuf>,
}

#[derive(Args)]
struct Link {
    /// Free-space link of this length, m.
    #[arg(long, conflicts_with = "rx")]
    distance: Option<f64>,
    /// Receiver id in the scene.
    #[arg(long)]
    rx: Option<u32>,
}

#[derive(Args)]
struct Band {
    #[arg(long, default_value_t = 0.1e12)]
    f_min: f64,
    #[arg(long, default_value_t = 1.0e12)]
    f_max: f64,
    #[arg(long, default_value_t = 901)]
    points: usize,
}

#[derive(Args)]
struct SpectrumArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[command(flatten)]
    link: Link,
    #[command(flatten)]
    band: Band,
    /// Output file; stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct WindowsArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[command(flatten)]
    link: Link,
    #[command(flatten)]
    band: Band,
    /// Window threshold above the band minimum, dB.
    #[arg(long, default_value_t = DEFAULT_WINDOW_THRESHOLD_DB)]
    threshold_db: f64,
    /// Use the raw loss instead of removing the Friis slope first.
    #[arg(long)]
    raw: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AllocateArgs {
    #[arg(long)]
    absorption: Option<PathBuf>,
    /// Window to partition, Hz.
    #[arg(long)]
    f_lo: f64,
    #[arg(long)]
    f_hi: f64,
    #[arg(long)]
    subwindows: usize,
    /// Link distances in m, comma separated; link ids follow the order.
    #[arg(long, value_delimiter = ',', required = true)]
    distances: Vec<f64>,
    #[arg(long, default_value_t = 10.0)]
    power_dbm: f64,
    #[arg(long, default_value_t = -160.0)]
    noise_psd_dbm_hz: f64,
    /// Tx plus Rx antenna gain, dBi.
    #[arg(long, default_value_t = 60.0)]
    gain_dbi: f64,
    /// Count only the absorption windows inside each sub-window, at this threshold in dB.
    #[arg(long)]
    threshold_db: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SceneArgs {
    #[arg(long, default_value_t = 3.0)]
    corridor_width: f64,
    #[arg(long, default_value_t = 30.0)]
    arm_length: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(a) => run(a),
        Command::Spectrum(a) => spectrum(a),
        Command::Windows(a) => windows(a),
        Command::Allocate(a) => allocate(a),
        Command::Scene(a) => scene(a),
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn table(path: Option<&Path>) -> Result<AbsorptionTable> {
    Ok(match path {
        Some(p) => load_table(p)?,
        None => AbsorptionTable::synthetic(),
    })
}

fn run(a: RunArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default_hallway()?,
    };
    if let Some(p) = &a.inputs.scene {
        let (scene, endpoints, hosts) = load_scene(p)?;
        cfg.scene = scene;
        cfg.endpoints = endpoints;
        cfg.tile_hosts = hosts;
    }
    if let Some(p) = &a.inputs.absorption {
        cfg.table = load_table(p)?;
    }
    if let Some(f) = a.frequencies {
        cfg.frequencies_hz = f;
    }
    if let Some(t) = a.techniques {
        cfg.techniques = t;
    }
    if let Some(t) = a.threshold_db {
        cfg.snr_threshold_db = t;
    }
    if let Some(o) = a.max_order {
        cfg.max_order = o;
    }
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        cfg.output.csv = Some(dir.join("results.csv"));
        cfg.output.summary = Some(dir.join("summary.txt"));
    }
    if let Some(p) = a.paths {
        cfg.output.paths = Some(p);
    }

    let results = experiment::run(&cfg)?;
    let mut csv = output(cfg.output.csv.as_deref())?;
    experiment::emit(&results, Format::Csv, &mut csv)?;
    csv.flush()?;
    match &cfg.output.summary {
        Some(p) => {
            let mut out = output(Some(p))?;
            experiment::emit(&results, Format::Summary, &mut out)?;
            out.flush()?;
        }
        None => experiment::emit(&results, Format::Summary, io::stderr().lock())?,
    }
    if let Some(p) = &cfg.output.paths {
        let mut out = output(Some(p))?;
        write_path_dump(&mut out, &results.path_records())?;
        out.flush()?;
    }
    Ok(())
}

/// Endpoints and scene for a single-link command.
fn link(inputs: &Inputs, link: &Link) -> Result<(Scene, Vec3, Vec3)> {
    if let Some(d) = link.distance {
        if !(d > 0.0) {
            bail!("distance must be positive, got {d}");
        }
        return Ok((Scene::empty(), Vec3::zeros(), Vec3::new(d, 0.0, 0.0)));
    }
    let Some(id) = link.rx else {
        bail!("pass --distance or --rx");
    };
    let (scene, ends) = match &inputs.scene {
        Some(p) => {
            let (s, e, _) = load_scene(p)?;
            (s, e)
        }
        None => HallwayLayout::default().build()?,
    };
    let rx = ends
        .rx
        .iter()
        .find(|r| r.id == id)
        .with_context(|| format!("no receiver with id {id}"))?;
    Ok((scene, ends.tx, rx.position))
}

fn loss_spectrum(inputs: &Inputs, l: &Link, band: &Band) -> Result<Vec<(f64, Option<f64>)>> {
    if band.points < 2 || !(band.f_max > band.f_min) {
        bail!("need f_max > f_min and at least 2 points");
    }
    let table = table(inputs.absorption.as_deref())?;
    let (scene, tx, rx) = link(inputs, l)?;
    Ok(path_loss_spectrum(
        &scene,
        &tx,
        &rx,
        &linear_grid(band.f_min, band.f_max, band.points),
        &table,
    )?)
}

fn spectrum(a: SpectrumArgs) -> Result<()> {
    let spec = loss_spectrum(&a.inputs, &a.link, &a.band)?;
    let mut out = output(a.out.as_deref())?;
    writeln!(out, "frequency_hz,path_loss_db")?;
    for (f, loss) in spec {
        match loss {
            Some(l) => writeln!(out, "{f},{l:.6}")?,
            None => writeln!(out, "{f},")?,
        }
    }
    out.flush()?;
    Ok(())
}

fn windows(a: WindowsArgs) -> Result<()> {
    let spec: Vec<(f64, f64)> = loss_spectrum(&a.inputs, &a.link, &a.band)?
        .into_iter()
        .filter_map(|(f, l)| l.map(|l| (f, l)))
        .collect();
    if spec.is_empty() {
        bail!("link is in outage at every frequency");
    }
    let found = if a.raw {
        spectral_windows(&spec, a.threshold_db)
    } else {
        absorption_windows(&spec, a.threshold_db)
    };
    let mut out = output(a.out.as_deref())?;
    writeln!(out, "f_lo_hz,f_hi_hz,center_hz,bandwidth_hz")?;
    for w in found {
        writeln!(out, "{},{},{},{}", w.f_lo, w.f_hi, w.center(), w.bandwidth())?;
    }
    out.flush()?;
    Ok(())
}

fn allocate(a: AllocateArgs) -> Result<()> {
    let table = table(a.absorption.as_deref())?;
    let window = SpectralWindow::new(a.f_lo, a.f_hi)?;
    let demands = a
        .distances
        .iter()
        .enumerate()
        .map(|(i, &d)| LinkDemand::new(i as u32, d))
        .collect::<Result<Vec<_>, _>>()?;
    let rates = RateModel {
        table: &table,
        noise_psd_dbm_hz: a.noise_psd_dbm_hz,
        antenna_gain_dbi: a.gain_dbi,
        usable_threshold_db: a.threshold_db,
        grid_points: 101,
    };
    let rows = allocation_report(&window, a.subwindows, &demands, a.power_dbm, &CenterOut, &rates)?;
    let mut out = output(a.out.as_deref())?;
    write_allocation_csv(&rows, &mut out)?;
    out.flush()?;
    Ok(())
}

fn scene(a: SceneArgs) -> Result<()> {
    let layout = HallwayLayout {
        corridor_width: a.corridor_width,
        arm_length: a.arm_length,
    };
    let (scene, ends) = layout.build()?;
    let mut doc = SceneDocument::from_scene(&scene, Some(&ends));
    doc.tile_hosts = layout.junction_wall_ids();
    let mut out = output(a.out.as_deref())?;
    doc.write(&mut out)?;
    out.flush()?;
    Ok(())
}
