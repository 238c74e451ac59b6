use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use switchsim::analysis::{afterpulse_calibrate, detect_atoms};
use switchsim::analysis::{
    analyze, headline_report, loss_timing_fraction, photons_per_switch, stats_text, write_events_csv,
    AfterpulseCalibration, Analysis, AnalysisSetup, FalseDetection, HeraldCriterion, PhotonsPerSwitch,
};
use switchsim::analytic::atom_cavity_transmission;
use switchsim::analytic::{
    averaged_atom_spectrum, detuning_grid, empty_cavity_transmission, fit_spectrum, read_spectrum_csv,
    write_spectrum_csv, SpectrumPoint,
};
use switchsim::config::KvConfig;
use switchsim::dynamics::{simulate_pulse_scattering_with, ScatterConfig};
use switchsim::experiment::clicks::ClickRecord;
use switchsim::experiment::{
    generate_calibration, read_clicks, run_experiment, write_clicks, write_truth, CalibrationConfig, ChainConfig,
    DetectorParams, EmulationOptions, ExperimentConfig, Gates, TransitModel,
};
use switchsim::model::{AtomLevel, SystemParams};
use switchsim::seeding::derive_seed;
use switchsim::{Error, Result};

/// Seed stream for the atom-free background run written next to the clicks.
const BACKGROUND_STREAM: u64 = 7;

#[derive(Parser)]
#[command(
    name = "switchsim",
    version,
    about = "Single-atom photon switch: simulation and click analysis"
)]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// `name = value` parameter file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Empty-cavity and atom spectra, or a fit to a measured spectrum.
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// Fit (g, κ_i, h) to this `detuning_mhz,transmission` CSV.
        #[arg(long)]
        fit: Option<PathBuf>,
    },
    /// Single-photon outcome tables from both switch states.
    Scatter {
        #[command(flatten)]
        common: Common,
        /// Lossless, parasitic-free, strongly coupled atom.
        #[arg(long)]
        ideal: bool,
    },
    /// Emulate the experiment and write click streams.
    Generate {
        #[command(flatten)]
        common: Common,
        /// Overrides `n_cycles` from the config.
        #[arg(long)]
        cycles: Option<u64>,
    },
    /// Herald atoms and reduce a click stream.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Click file; defaults to `<out>/clicks.txt`.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Atom-free click file for the false-detection estimate; defaults to
        /// `<out>/background.txt` when present.
        #[arg(long)]
        background: Option<PathBuf>,
        /// Afterpulse calibration written by `calibrate`.
        #[arg(long)]
        calibration: Option<PathBuf>,
        /// Print the headline table.
        #[arg(long)]
        report: bool,
    },
    /// Afterpulse calibration from single pulses sent to each detector.
    Calibrate {
        #[command(flatten)]
        common: Common,
        /// Calibrate from an existing calibration click file instead of
        /// simulating one.
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Spectrum { .. } => "spectrum",
            Command::Scatter { .. } => "scatter",
            Command::Generate { .. } => "generate",
            Command::Analyze { .. } => "analyze",
            Command::Calibrate { .. } => "calibrate",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Spectrum { common, .. }
            | Command::Scatter { common, .. }
            | Command::Generate { common, .. }
            | Command::Analyze { common, .. }
            | Command::Calibrate { common, .. } => common,
        }
    }

    fn needs_wiring(&self) -> bool {
        matches!(
            self,
            Command::Generate { .. } | Command::Analyze { .. } | Command::Calibrate { .. }
        )
    }
}

/// Every key of the parameter file, resolved once so that one file can drive
/// all subcommands.
struct Settings {
    params: SystemParams,
    chain: ChainConfig,
    gates: Gates,
    transits: TransitModel,
    detectors: Option<DetectorParams>,
    emulation: EmulationOptions,
    criterion: HeraldCriterion,
    calibration: CalibrationConfig,
    n_cycles: u64,
    max_dn: usize,
    spectrum_range: (f64, f64),
    spectrum_points: usize,
    spectrum_g_samples: usize,
    scatter_trajectories: usize,
    scatter_pulse: String,
    scatter_g_distributed: bool,
    loss_timing_trajectories: usize,
}

impl Settings {
    fn load(cfg: &mut KvConfig, need_wiring: bool) -> Result<Self> {
        let params = SystemParams::from_config(cfg)?;
        let chain = ChainConfig::from_config(cfg)?;
        let gates = Gates::from_config(cfg)?;
        let transits = TransitModel::from_config(cfg)?;
        let wired = cfg.is_set("left_detectors") || cfg.is_set("right_detectors");
        let detectors = if need_wiring || wired {
            Some(DetectorParams::from_config(cfg)?)
        } else {
            None
        };
        let s = Settings {
            params,
            chain,
            gates,
            transits,
            detectors,
            emulation: EmulationOptions::from_config(cfg)?,
            criterion: HeraldCriterion::from_config(cfg)?,
            calibration: CalibrationConfig::from_config(cfg)?,
            n_cycles: cfg.u64_or("n_cycles", 50_000)?,
            max_dn: cfg.usize_or("antibunching_max_dn", 10)?,
            spectrum_range: (
                cfg.f64_or("spectrum_min_mhz", -150.0)?,
                cfg.f64_or("spectrum_max_mhz", 150.0)?,
            ),
            spectrum_points: cfg.usize_or("spectrum_points", 601)?,
            spectrum_g_samples: cfg.usize_or("spectrum_g_samples", 20_000)?,
            scatter_trajectories: cfg.usize_or("scatter_trajectories", 100_000)?,
            scatter_pulse: cfg.string_or("scatter_pulse", "target")?,
            scatter_g_distributed: cfg.bool_or("scatter_g_distributed", false)?,
            loss_timing_trajectories: cfg.usize_or("loss_timing_trajectories", 20_000)?,
        };
        cfg.finish()?;
        Ok(s)
    }

    fn experiment(&self) -> Result<ExperimentConfig> {
        let cfg = ExperimentConfig {
            params: self.params,
            chain: self.chain,
            gates: self.gates,
            transits: self.transits,
            detectors: self.wiring()?.clone(),
            emulation: self.emulation,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn wiring(&self) -> Result<&DetectorParams> {
        self.detectors
            .as_ref()
            .ok_or_else(|| Error::Configuration("left_detectors and right_detectors must be configured".into()))
    }

    fn setup(&self) -> Result<AnalysisSetup> {
        AnalysisSetup::new(&self.chain, self.gates, self.wiring()?.clone(), self.criterion)
    }

    fn scatter_config(&self) -> Result<ScatterConfig> {
        let mut sc = match self.scatter_pulse.as_str() {
            "target" => ScatterConfig::target_pulse(),
            "control" => ScatterConfig::control_pulse(),
            other => {
                return Err(Error::Configuration(format!(
                    "scatter_pulse must be `target` or `control`, got `{other}`"
                )))
            }
        };
        if self.scatter_g_distributed {
            sc.g_dist = Some(self.transits.g_dist);
        }
        Ok(sc)
    }
}

fn write_manifest(out: &Path, command: &str, seed: u64, cfg: &KvConfig, extra: &[(&str, String)]) -> Result<()> {
    let mut text = format!(
        "# switchsim {} manifest\ncommand = {command}\nseed = {seed}\n",
        env!("CARGO_PKG_VERSION")
    );
    for (k, v) in extra {
        text.push_str(&format!("{k} = {v}\n"));
    }
    text.push_str("# resolved configuration\n");
    text.push_str(&cfg.resolved_text());
    fs::write(out.join(format!("manifest_{command}.txt")), text)?;
    Ok(())
}

fn cmd_spectrum(s: &Settings, seed: u64, out: &Path, fit: Option<&Path>) -> Result<Vec<(&'static str, String)>> {
    if let Some(path) = fit {
        let data = read_spectrum_csv(path)?;
        let result = fit_spectrum(&data, &s.params)?;
        let report = result.report();
        fs::write(out.join("spectrum_fit.txt"), &report)?;
        print!("{report}");
        return Ok(vec![("fit_input", path.display().to_string())]);
    }
    let grid = detuning_grid(s.spectrum_range.0, s.spectrum_range.1, s.spectrum_points)?;
    let p = &s.params;
    let empty: Vec<SpectrumPoint> = grid
        .iter()
        .map(|&d| SpectrumPoint {
            detuning: d,
            transmission: empty_cavity_transmission(d, p.kappa_i, p.kappa_ex, p.h),
        })
        .collect();
    let fixed: Vec<SpectrumPoint> = grid
        .iter()
        .map(|&d| SpectrumPoint {
            detuning: d,
            transmission: atom_cavity_transmission(d, p.g, p),
        })
        .collect();
    let averaged = averaged_atom_spectrum(&grid, &s.transits.g_dist, p, s.spectrum_g_samples, seed)?;
    write_spectrum_csv(&empty, &out.join("spectrum_empty.csv"))?;
    write_spectrum_csv(&fixed, &out.join("spectrum_atom_fixed.csv"))?;
    write_spectrum_csv(&averaged, &out.join("spectrum_atom.csv"))?;
    let t0 = empty_cavity_transmission(0.0, p.kappa_i, p.kappa_ex, p.h);
    println!("empty-cavity T(0) = {t0:.6}");
    Ok(Vec::new())
}

fn cmd_scatter(s: &Settings, seed: u64, out: &Path, ideal: bool) -> Result<Vec<(&'static str, String)>> {
    let params = if ideal { s.params.ideal_limit() } else { s.params };
    let sc = s.scatter_config()?;
    for (i, level) in [AtomLevel::GMinus, AtomLevel::GPlus].into_iter().enumerate() {
        let table = simulate_pulse_scattering_with(
            &params,
            &sc,
            level,
            s.scatter_trajectories,
            derive_seed(seed, 100, i as u64),
        )?;
        table.write_csv(&out.join(format!("outcomes_{}.csv", level.label())))?;
        let fmt = |p: switchsim::stats::Proportion| match (p.value(), p.stderr()) {
            (Some(v), Some(e)) => format!("{v:.4} ± {e:.4}"),
            _ => "undefined".into(),
        };
        println!(
            "initial {}: normalized reflection {}, toggle given reflection {}",
            level.label(),
            fmt(table.normalized_reflection()),
            fmt(table.toggle_given_reflection())
        );
    }
    Ok(vec![("ideal", ideal.to_string())])
}

fn cmd_generate(s: &Settings, seed: u64, out: &Path, cycles: Option<u64>) -> Result<Vec<(&'static str, String)>> {
    let exp = s.experiment()?;
    let n = cycles.unwrap_or(s.n_cycles);
    info!("emulating {n} cycles");
    let output = run_experiment(&exp, n, seed)?;
    let clicks = out.join("clicks.txt");
    write_clicks(&output.clicks, &clicks)?;
    write_truth(&output, &out.join("clicks.truth"))?;
    let mut quiet = exp.clone();
    quiet.transits.arrival_rate = 0.0;
    let bg_seed = derive_seed(seed, BACKGROUND_STREAM, 0);
    let background = run_experiment(&quiet, n, bg_seed)?;
    write_clicks(&background.clicks, &out.join("background.txt"))?;
    println!(
        "{} clicks in {n} cycles ({} background clicks)",
        output.clicks.len(),
        background.clicks.len()
    );
    Ok(vec![
        ("n_cycles_run", n.to_string()),
        ("background_seed", bg_seed.to_string()),
    ])
}

/// Cycles covered by a generated stream: ids run from 0 without gaps.
fn cycles_in(stream: &[ClickRecord]) -> u64 {
    stream.last().map_or(0, |r| r.cycle_id + 1)
}

fn photon_budget(s: &Settings, a: &Analysis, seed: u64) -> Result<Option<PhotonsPerSwitch>> {
    let Some(refl) = a.stats.reflecting.as_ref() else {
        return Ok(None);
    };
    let (Some(nr), Some(ar)) = (refl.normalized_reflection, refl.absolute_reflection) else {
        return Ok(None);
    };
    let table = simulate_pulse_scattering_with(
        &s.params,
        &ScatterConfig::target_pulse(),
        AtomLevel::GMinus,
        s.loss_timing_trajectories,
        derive_seed(seed, 101, 0),
    )?;
    let f = loss_timing_fraction(&table)?;
    match photons_per_switch(nr.value, ar.value, f) {
        Ok(p) => Ok(Some(p)),
        Err(Error::Undefined(msg)) => {
            warn!("{msg}");
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

fn cmd_analyze(
    s: &Settings,
    seed: u64,
    out: &Path,
    input: Option<&Path>,
    background: Option<&Path>,
    calibration: Option<&Path>,
    report: bool,
) -> Result<Vec<(&'static str, String)>> {
    let setup = s.setup()?;
    let input = input.map_or_else(|| out.join("clicks.txt"), Path::to_path_buf);
    let stream = read_clicks(&input)?;
    let n_cycles = cycles_in(&stream);
    let cal = calibration.map(AfterpulseCalibration::read).transpose()?;
    let a = analyze(&setup, &stream, n_cycles, cal.as_ref(), s.max_dn, seed)?;
    info!("{} events in {n_cycles} cycles", a.events.len());

    let bg_path = background.map(Path::to_path_buf).or_else(|| {
        let p = out.join("background.txt");
        p.exists().then_some(p)
    });
    let false_detection = match &bg_path {
        Some(p) => {
            let bg = read_clicks(p)?;
            let per_cycle = setup.chain.n_sequences() as u64;
            Some(FalseDetection {
                false_events: detect_atoms(&setup, &bg).len(),
                false_sequences: cycles_in(&bg) * per_cycle,
                events: a.events.len(),
                sequences: n_cycles * per_cycle,
            })
        }
        None => None,
    };

    write_events_csv(&a.events, &out.join("events.csv"))?;
    if let Some(ab) = &a.antibunching {
        ab.write_csv(&out.join("correlation.csv"))?;
    }
    if let Some(ab) = &a.antibunching_shuffled {
        ab.write_csv(&out.join("correlation_shuffled.csv"))?;
    }
    let mut stats = stats_text(&a, &setup, false_detection.as_ref());
    let per_switch = photon_budget(s, &a, seed)?;
    if let Some(p) = &per_switch {
        stats.push_str(&format!(
            "photons_per_switch.normalized = {:.3}\nphotons_per_switch.absolute = {:.3}\nphotons_per_switch.corrected = {:.3}\n",
            p.normalized, p.absolute, p.corrected
        ));
    }
    fs::write(out.join("stats.txt"), &stats)?;
    if report {
        let table = headline_report(&a, per_switch.as_ref(), false_detection.as_ref());
        fs::write(out.join("report.txt"), &table)?;
        print!("{table}");
    }
    let mut extra = vec![("input", input.display().to_string())];
    if let Some(p) = bg_path {
        extra.push(("background", p.display().to_string()));
    }
    if let Some(p) = calibration {
        extra.push(("calibration", p.display().to_string()));
    }
    Ok(extra)
}

fn cmd_calibrate(s: &Settings, seed: u64, out: &Path, input: Option<&Path>) -> Result<Vec<(&'static str, String)>> {
    let det = s.wiring()?;
    let stream = match input {
        Some(p) => read_clicks(p)?,
        None => {
            let stream = generate_calibration(&s.calibration, det, &s.chain, &s.gates, seed)?;
            write_clicks(&stream, &out.join("calibration_clicks.txt"))?;
            stream
        }
    };
    let window = s.gates.afterpulse_window(&s.chain)?;
    let cal = afterpulse_calibrate(
        &stream,
        &s.calibration,
        det.n_detectors(),
        s.gates.detection_tail,
        window,
    )?;
    cal.write(&out.join("calibration.csv"))?;
    cal.write_histogram(&out.join("afterpulse_histogram.csv"))?;
    println!(
        "afterpulse probability in the target window: left {:.3e}, right {:.3e}",
        cal.group_probability(&det.left_detectors),
        cal.group_probability(&det.right_detectors)
    );
    Ok(match input {
        Some(p) => vec![("input", p.display().to_string())],
        None => Vec::new(),
    })
}

fn run(cli: &Cli) -> Result<()> {
    let common = cli.command.common();
    let mut cfg = match &common.config {
        Some(p) => KvConfig::load(p)?,
        None => KvConfig::default(),
    };
    let settings = Settings::load(&mut cfg, cli.command.needs_wiring())?;
    fs::create_dir_all(&common.out)?;
    let (seed, out) = (common.seed, common.out.as_path());
    let extra = match &cli.command {
        Command::Spectrum { fit, .. } => cmd_spectrum(&settings, seed, out, fit.as_deref())?,
        Command::Scatter { ideal, .. } => cmd_scatter(&settings, seed, out, *ideal)?,
        Command::Generate { cycles, .. } => cmd_generate(&settings, seed, out, *cycles)?,
        Command::Analyze {
            input,
            background,
            calibration,
            report,
            ..
        } => cmd_analyze(
            &settings,
            seed,
            out,
            input.as_deref(),
            background.as_deref(),
            calibration.as_deref(),
            *report,
        )?,
        Command::Calibrate { input, .. } => cmd_calibrate(&settings, seed, out, input.as_deref())?,
    };
    write_manifest(out, cli.command.name(), seed, &cfg, &extra)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global() {
            eprintln!("error: cannot size the worker pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
