//! Command implementations behind the `lanekeep` binary.

pub mod config;

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use thiserror::Error;

pub use config::{ConfigError, RunConfig};

use crate::imaging::pnm::{self, Image, PnmError};
use crate::imaging::RgbFrame;
use crate::lane_detect::{annotate, PolarLine};
use crate::pipeline::{FrameReport, LanePipeline, PipelineError, StageTimes};
use crate::position::PositionEstimate;
use crate::sim::{self, SimError, TelemetryLog, Track, TrackError, TrackSpec, VehiclePose};

pub const DETECT_COLUMNS: [&str; 8] = [
    "frame",
    "rho_l",
    "theta_l",
    "rho_r",
    "theta_r",
    "raw_midpoint",
    "paa",
    "kf",
];
pub const DETECT_CSV: &str = "detections.csv";
pub const MIN_BENCH_FRAMES: usize = 30;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}", path.display())]
    Frame {
        path: PathBuf,
        #[source]
        source: PnmError,
    },
    #[error("{}", path.display())]
    Pipeline {
        path: PathBuf,
        #[source]
        source: PipelineError,
    },
    #[error("{}", path.display())]
    Track {
        path: PathBuf,
        #[source]
        source: TrackError,
    },
    #[error("{}", path.display())]
    Config {
        path: PathBuf,
        #[source]
        source: ConfigError,
    },
    #[error(transparent)]
    Setup(#[from] PipelineError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("bench needs at least {MIN_BENCH_FRAMES} frames, got {0}")]
    BenchFrames(usize),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads a config file over the defaults.
pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.parse().map_err(|source| CliError::Config {
        path: path.to_path_buf(),
        source,
    })
}

/// PPM/PGM files of `dir` in lexicographic order.
pub fn list_frames(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut frames = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        let is_frame = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("ppm") || e.eq_ignore_ascii_case("pgm"));
        if is_frame && path.is_file() {
            frames.push(path);
        }
    }
    frames.sort();
    Ok(frames)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.3}")).unwrap_or_default()
}

fn line_cols(l: Option<PolarLine>) -> (String, String) {
    match l {
        Some(l) => (format!("{:.3}", l.rho), format!("{:.3}", l.theta)),
        None => (String::new(), String::new()),
    }
}

fn detect_row(index: usize, r: &FrameReport) -> String {
    let (rl, tl) = line_cols(r.tracked_left);
    let (rr, tr) = line_cols(r.tracked_right);
    let e = &r.estimate;
    format!(
        "{index},{rl},{tl},{rr},{tr},{},{},{}",
        fmt_opt(e.raw),
        fmt_opt(e.paa),
        fmt_opt(e.kalman)
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectSummary {
    pub frames: usize,
    pub csv: PathBuf,
}

/// Runs the detection chain over a frame directory. Writes one annotated
/// PPM per frame and `detections.csv` into `output_dir`.
pub fn cmd_detect(
    input_dir: &Path,
    output_dir: &Path,
    config: &RunConfig,
) -> Result<DetectSummary, CliError> {
    let frames = list_frames(input_dir)?;
    fs::create_dir_all(output_dir).map_err(io_err(output_dir))?;
    let csv_path = output_dir.join(DETECT_CSV);
    let file = fs::File::create(&csv_path).map_err(io_err(&csv_path))?;
    let mut csv = BufWriter::new(file);
    writeln!(csv, "{}", DETECT_COLUMNS.join(",")).map_err(io_err(&csv_path))?;

    let mut chain = LanePipeline::new(config.pipeline)?;
    let setpoint = config.pipeline.setpoint;
    for (index, path) in frames.iter().enumerate() {
        let frame_err = |source| CliError::Frame {
            path: path.clone(),
            source,
        };
        let image = pnm::read(path).map_err(frame_err)?;
        let (rgb, report) = match image {
            Image::Gray(g) => {
                let r = chain.process_gray(&g);
                (RgbFrame::from_gray(&g), r)
            }
            Image::Rgb(c) => {
                let r = chain.process(&c);
                (c, r)
            }
        };
        let report = report.map_err(|source| CliError::Pipeline {
            path: path.clone(),
            source,
        })?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("frame");
        let out = output_dir.join(format!("{stem}.ppm"));
        let marked = annotate(
            &rgb,
            &report.tracked,
            setpoint.y,
            report.estimate.smoothed,
            setpoint.x,
        );
        pnm::write_ppm(&out, &marked).map_err(|source| CliError::Frame {
            path: out.clone(),
            source,
        })?;
        writeln!(csv, "{}", detect_row(index, &report)).map_err(io_err(&csv_path))?;
    }
    csv.flush().map_err(io_err(&csv_path))?;
    Ok(DetectSummary {
        frames: frames.len(),
        csv: csv_path,
    })
}

pub fn load_track(path: &Path) -> Result<TrackSpec, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.parse().map_err(|source| CliError::Track {
        path: path.to_path_buf(),
        source,
    })
}

/// Closed-loop run over a track file. Optionally writes the telemetry CSV
/// and an annotated PPM per frame.
pub fn cmd_simulate(
    track_file: &Path,
    config: &RunConfig,
    out_csv: Option<&Path>,
    frames_dir: Option<&Path>,
) -> Result<TelemetryLog, CliError> {
    let spec = load_track(track_file)?;
    let track = Track::new(&spec);
    if let Some(dir) = frames_dir {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut dump_error = None;
    let setpoint = config.pipeline.setpoint;
    let log = sim::run_closed_loop_observed(
        &track,
        &config.sim,
        &config.pipeline,
        &config.controller,
        |i, frame, r| {
            let Some(dir) = frames_dir else { return };
            if dump_error.is_some() {
                return;
            }
            let path = dir.join(format!("frame_{i:05}.ppm"));
            let marked = annotate(
                frame,
                &r.tracked,
                setpoint.y,
                r.estimate.smoothed,
                setpoint.x,
            );
            if let Err(source) = pnm::write_ppm(&path, &marked) {
                dump_error = Some(CliError::Frame { path, source });
            }
        },
    )?;
    if let Some(e) = dump_error {
        return Err(e);
    }
    if let Some(path) = out_csv {
        let file = fs::File::create(path).map_err(io_err(path))?;
        let mut w = BufWriter::new(file);
        log.write_csv(&mut w).map_err(io_err(path))?;
        w.flush().map_err(io_err(path))?;
    }
    Ok(log)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub frames: usize,
    pub elapsed: Duration,
    pub stages: StageTimes,
    pub estimates: Vec<PositionEstimate>,
}

impl BenchReport {
    pub fn fps(&self) -> f64 {
        self.frames as f64 / self.elapsed.as_secs_f64().max(1e-12)
    }

    pub fn render(&self) -> String {
        let mut s = format!(
            "frames={} elapsed={:.3}s fps={:.1}\n",
            self.frames,
            self.elapsed.as_secs_f64(),
            self.fps()
        );
        let per = |d: Duration| d.as_secs_f64() * 1e3 / self.frames.max(1) as f64;
        for (name, d) in self.stages.stages() {
            s.push_str(&format!("  {name:<10} {:>8.3} ms/frame\n", per(d)));
        }
        s
    }
}

/// Road the benchmark drives along: straights and both bend directions.
pub fn bench_track() -> TrackSpec {
    "lane_width 0.2\n2 0\n3 0.2\n2 0\n3 -0.2\n2 0\n"
        .parse()
        .expect("built-in track is valid")
}

/// Poses weaving gently along the bench track.
fn bench_poses(track: &Track, n: usize) -> Vec<VehiclePose> {
    let step = track.length() / n as f64;
    (0..n)
        .map(|i| {
            let c = track.point_at(i as f64 * step);
            let offset = 0.02 * (i as f64 / 9.0).sin();
            let (x, y) = c.offset(offset);
            VehiclePose {
                x,
                y,
                heading: c.heading + 0.05 * (i as f64 / 13.0).cos(),
                t: 0.0,
            }
        })
        .collect()
}

/// Renders `n_frames` frames up front, then times only the detection chain.
pub fn cmd_bench(config: &RunConfig, n_frames: usize) -> Result<BenchReport, CliError> {
    if n_frames < MIN_BENCH_FRAMES {
        return Err(CliError::BenchFrames(n_frames));
    }
    config.sim.validate()?;
    let track = Track::new(&bench_track());
    let frames: Vec<RgbFrame> = bench_poses(&track, n_frames)
        .iter()
        .enumerate()
        .map(|(i, pose)| sim::render_scene(pose, &track, &config.sim.camera, i as u64, &config.sim))
        .collect();

    let mut chain = LanePipeline::new(config.pipeline)?;
    let mut stages = StageTimes::default();
    let mut estimates = Vec::with_capacity(n_frames);
    let start = Instant::now();
    for frame in &frames {
        estimates.push(chain.process_timed(frame, &mut stages)?.estimate);
    }
    Ok(BenchReport {
        frames: n_frames,
        elapsed: start.elapsed(),
        stages,
        estimates,
    })
}
