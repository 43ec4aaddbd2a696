mod output;

use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chsh_gauge::angle::parse_angle_list;
use chsh_gauge::engine::{self, Setting};
use chsh_gauge::{analytic, fisher, holonomy};
use chsh_gauge::{
    Builtin, DensityModel, DensitySpec, Error, GameConfig, GameSettings, GammaMap, Policy, Result,
    VERSION,
};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use output::{write_rows, Format, Meta, Sink};

/// Simulator and analysis tools for a gauge-symmetric hidden-angle model
/// of CHSH games.
///
/// Settings are always given in the order θ_A1B1, θ_A1B2, θ_A2B1, θ_A2B2,
/// as decimal radians or multiples of pi such as `3pi/4`.
#[derive(Parser)]
#[command(name = "chsh-gauge", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DensityArgs {
    /// `uniform`, `quantum`, a path to a JSON density spec, or inline JSON.
    #[arg(long, default_value = "quantum")]
    density: String,
    /// Nodes of the Γ⁻¹ table on [-π, π]; must be odd.
    #[arg(long, default_value_t = chsh_gauge::gammamap::DEFAULT_GRID)]
    grid: usize,
    /// Tolerance of the Γ inversion.
    #[arg(long, default_value_t = chsh_gauge::gammamap::DEFAULT_TOL)]
    tol: f64,
}

#[derive(Args)]
struct SettingsArgs {
    /// Four comma-separated angles θ_A1B1,θ_A1B2,θ_A2B1,θ_A2B2.
    #[arg(
        long,
        allow_hyphen_values = true,
        default_value = "pi/4,3pi/4,-pi/4,pi/4"
    )]
    settings: String,
    /// Accept settings that are not realizable by four detector orientations.
    #[arg(long)]
    non_additive: bool,
}

#[derive(Args)]
struct OutputArgs {
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Subcommand)]
enum Command {
    /// Check a density's normalization, parity, positivity and support.
    /// Exit status 0 on pass, 1 on failed checks, 2 on structural errors.
    ValidateDensity {
        #[arg(long, default_value = "quantum")]
        density: String,
        /// Validation tolerance; 1e-8 for builtins and 1e-6 for tables by default.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Tabulate Γ⁻¹ on the grid nodes (CSV `x,ginv` by default).
    GammaTable {
        #[command(flatten)]
        density: DensityArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Monte Carlo game with per-setting estimates and the empirical score.
    Simulate {
        #[command(flatten)]
        density: DensityArgs,
        #[command(flatten)]
        settings: SettingsArgs,
        /// Rounds per setting.
        #[arg(long, default_value_t = 1_000_000)]
        rounds: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// `round-robin` or `random-choice`.
        #[arg(long, default_value = "round-robin")]
        policy: String,
        /// Worker threads; changes wall time only.
        #[arg(long)]
        threads: Option<usize>,
        /// Also write the per-round trace CSV to this path.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Analytic correlation E(θ) on a closed grid over [-π, π] (CSV by default).
    Curve {
        #[command(flatten)]
        density: DensityArgs,
        #[arg(long, default_value_t = 1001)]
        points: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Analytic correlations and score at the given settings.
    Score {
        #[command(flatten)]
        density: DensityArgs,
        #[command(flatten)]
        settings: SettingsArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Maximize the analytic score over additive settings.
    Optimize {
        #[command(flatten)]
        density: DensityArgs,
        #[arg(long, default_value_t = analytic::DEFAULT_STARTS)]
        starts: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Geometric phase δ acquired around the cycle of settings.
    Holonomy {
        #[command(flatten)]
        density: DensityArgs,
        #[command(flatten)]
        settings: SettingsArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Fisher information profile and its average (JSON summary by default,
    /// CSV profile with `--format csv`).
    Fisher {
        #[command(flatten)]
        density: DensityArgs,
        #[arg(long, default_value_t = fisher::DEFAULT_POINTS)]
        points: usize,
        #[arg(long, default_value_t = fisher::DEFAULT_MARGIN)]
        margin: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
}

/// Tolerance of the score maximization.
const OPTIMIZE_TOL: f64 = 1e-9;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::DensityStructure(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

fn load_density(arg: &str) -> Result<DensityModel> {
    if let Ok(b) = arg.parse::<Builtin>() {
        return Ok(DensityModel::builtin(b));
    }
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg).map_err(|e| {
            Error::DensityStructure(format!("cannot read density file {arg:?}: {e}"))
        })?
    };
    DensitySpec::from_json(&text)?.build()
}

fn build_map(args: &DensityArgs) -> Result<GammaMap> {
    GammaMap::build(&load_density(&args.density)?, args.grid, args.tol)
}

fn parse_settings(args: &SettingsArgs) -> Result<GameSettings> {
    let angles = parse_angle_list(&args.settings)?;
    let theta: [f64; 4] = angles.try_into().map_err(|v: Vec<f64>| {
        Error::Settings(format!("expected 4 setting angles, got {}", v.len()))
    })?;
    GameSettings::new(theta, !args.non_additive)
}

fn sink(output: OutputArgs, default: Format) -> Sink {
    Sink {
        out: output.out,
        format: output.format.unwrap_or(default),
    }
}

fn fmt(x: f64) -> String {
    x.to_string()
}

#[derive(Serialize)]
struct SettingRow {
    setting: String,
    theta: f64,
    #[serde(rename = "E")]
    e: f64,
}

fn setting_rows(settings: &GameSettings, e: &[f64; 4]) -> Vec<SettingRow> {
    Setting::ALL
        .iter()
        .map(|&s| SettingRow {
            setting: s.to_string(),
            theta: settings.angle(s),
            e: e[s.index()],
        })
        .collect()
}

fn setting_csv(rows: &[SettingRow]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| vec![r.setting.clone(), fmt(r.theta), fmt(r.e)])
        .collect()
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::ValidateDensity { density, tol } => validate_density(&density, tol),
        Command::GammaTable { density, output } => {
            let map = build_map(&density)?;
            #[derive(Serialize)]
            struct Body {
                x: Vec<f64>,
                ginv: Vec<f64>,
            }
            let body = Body {
                x: map.nodes(),
                ginv: map.ginv_values(),
            };
            let meta = Meta::for_map("gamma-table", &map);
            sink(output, Format::Csv).emit(&meta, &body, |w| map.write_csv(w))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate {
            density,
            settings,
            rounds,
            seed,
            policy,
            threads,
            trace,
            output,
        } => {
            let map = build_map(&density)?;
            let settings = parse_settings(&settings)?;
            let config = GameConfig::new(rounds, seed, policy.parse::<Policy>()?)?;
            simulate(&map, &settings, &config, threads, trace.as_deref(), output)
        }
        Command::Curve {
            density,
            points,
            output,
        } => {
            let map = build_map(&density)?;
            let curve = analytic::sweep(&map, points)?;
            #[derive(Serialize)]
            struct Body<'a> {
                points: usize,
                symmetry_residual: f64,
                theta: &'a [f64],
                #[serde(rename = "E")]
                e: &'a [f64],
            }
            let body = Body {
                points,
                symmetry_residual: curve.symmetry_residual(&map),
                theta: &curve.theta,
                e: &curve.e,
            };
            let meta = Meta::for_map("curve", &map);
            sink(output, Format::Csv).emit(&meta, &body, |w| curve.write_csv(w))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Score {
            density,
            settings,
            output,
        } => {
            let map = build_map(&density)?;
            let settings = parse_settings(&settings)?;
            let rows = setting_rows(&settings, &analytic::correlations(&map, &settings));
            #[derive(Serialize)]
            struct Body {
                settings: Vec<SettingRow>,
                additivity_residual: f64,
                score: f64,
            }
            let body = Body {
                additivity_residual: settings.additivity_residual(),
                score: analytic::score(&map, &settings),
                settings: rows,
            };
            let meta = Meta::for_map("score", &map);
            sink(output, Format::Json).emit(&meta, &body, |w| {
                write_rows(w, &["setting", "theta", "E"], &setting_csv(&body.settings))
            })?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Optimize {
            density,
            starts,
            output,
        } => {
            let map = build_map(&density)?;
            let best = analytic::maximize_score(&map, starts, OPTIMIZE_TOL)?;
            #[derive(Serialize)]
            struct Body {
                starts: usize,
                optimizer_tol: f64,
                score: f64,
                detectors: [f64; 4],
                settings: Vec<SettingRow>,
                iterations: usize,
                evaluations: usize,
            }
            let body = Body {
                starts,
                optimizer_tol: OPTIMIZE_TOL,
                score: best.score,
                detectors: best.detectors,
                settings: setting_rows(
                    &best.settings,
                    &analytic::correlations(&map, &best.settings),
                ),
                iterations: best.iterations,
                evaluations: best.evaluations,
            };
            let meta = Meta::for_map("optimize", &map);
            sink(output, Format::Json).emit(&meta, &body, |w| {
                write_rows(w, &["setting", "theta", "E"], &setting_csv(&body.settings))
            })?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Holonomy {
            density,
            settings,
            output,
        } => {
            let map = build_map(&density)?;
            let settings = parse_settings(&settings)?;
            let h = holonomy::holonomy_delta(&map, &settings);
            #[derive(Serialize)]
            struct Body {
                theta: [f64; 4],
                additivity_residual: f64,
                delta: f64,
                legs: holonomy::HolonomyLegs,
            }
            let body = Body {
                theta: settings.theta,
                additivity_residual: settings.additivity_residual(),
                delta: h.delta,
                legs: h.legs,
            };
            let meta = Meta::for_map("holonomy", &map);
            sink(output, Format::Json).emit(&meta, &body, |w| {
                let l = &body.legs;
                let rows = [
                    ("A1B1", l.a1b1),
                    ("A2B1", l.a2b1),
                    ("A2B2", l.a2b2),
                    ("A1B2", l.a1b2),
                    ("alternating_sum", l.alternating_sum),
                    ("delta", body.delta),
                ]
                .map(|(k, v)| vec![k.to_string(), fmt(v)]);
                write_rows(w, &["quantity", "value"], &rows)
            })?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Fisher {
            density,
            points,
            margin,
            output,
        } => {
            let map = build_map(&density)?;
            let profile = fisher::fisher_profile(&map, points, margin)?;
            let summary = fisher::average_fisher(&map, &profile)?;
            #[derive(Serialize)]
            struct Body {
                points: usize,
                margin: f64,
                #[serde(flatten)]
                summary: fisher::FisherSummary,
            }
            let body = Body {
                points,
                margin,
                summary,
            };
            let meta = Meta::for_map("fisher", &map);
            sink(output, Format::Json).emit(&meta, &body, |w| profile.write_csv(w))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn validate_density(arg: &str, tol: Option<f64>) -> Result<ExitCode> {
    let model = load_density(arg)?;
    let report = model.validate(tol.unwrap_or_else(|| model.default_tol()))?;
    let meta = Meta {
        tool: "chsh-gauge",
        version: VERSION,
        command: "validate-density",
        density: model.name().to_string(),
        grid: model.table().map(|t| t.len()),
        tol: Some(report.tol),
    };
    let sink = Sink {
        out: None,
        format: Format::Json,
    };
    sink.emit(&meta, &report, |_| Ok(()))?;
    if report.passed {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!(
            "density {:?} failed: {}",
            model.name(),
            report.failed_names().join(", ")
        );
        Ok(ExitCode::FAILURE)
    }
}

#[derive(Serialize)]
struct EstimateRow {
    setting: String,
    theta: f64,
    n: u64,
    n_same: u64,
    n_opp: u64,
    estimate: f64,
    std_error: f64,
    mean_a: f64,
    mean_b: f64,
}

#[derive(Serialize)]
struct RunEcho<'a> {
    seed: u64,
    rounds_per_setting: u64,
    policy: Policy,
    settings: &'a [f64; 4],
    enforce_additivity: bool,
}

fn simulate(
    map: &GammaMap,
    settings: &GameSettings,
    config: &GameConfig,
    threads: Option<usize>,
    trace: Option<&Path>,
    output: OutputArgs,
) -> Result<ExitCode> {
    let result = match threads {
        Some(t) => engine::run_game_with_threads(map, settings, config, t)?,
        None => engine::run_game(map, settings, config),
    };
    if let Some(path) = trace {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        engine::write_trace(&mut w, map, settings, config)?;
        w.flush()?;
    }
    let estimates: Vec<EstimateRow> = Setting::ALL
        .iter()
        .map(|&s| {
            let e = result.estimate(s);
            EstimateRow {
                setting: s.to_string(),
                theta: settings.angle(s),
                n: e.n(),
                n_same: e.n_same,
                n_opp: e.n_opp,
                estimate: e.estimate(),
                std_error: e.std_error(),
                mean_a: e.mean_a(),
                mean_b: e.mean_b(),
            }
        })
        .collect();
    #[derive(Serialize)]
    struct Body<'a> {
        config: RunEcho<'a>,
        estimates: Vec<EstimateRow>,
        score: f64,
        score_std_error: f64,
        analytic_score: f64,
    }
    let body = Body {
        config: RunEcho {
            seed: config.seed,
            rounds_per_setting: config.rounds_per_setting,
            policy: config.policy,
            settings: &settings.theta,
            enforce_additivity: settings.enforce_additivity,
        },
        score: result.score,
        score_std_error: estimates
            .iter()
            .map(|r| r.std_error * r.std_error)
            .sum::<f64>()
            .sqrt(),
        analytic_score: analytic::score(map, settings),
        estimates,
    };
    let meta = Meta::for_map("simulate", map);
    sink(output, Format::Json).emit(&meta, &body, |w| {
        let rows: Vec<Vec<String>> = body
            .estimates
            .iter()
            .map(|r| {
                vec![
                    r.setting.clone(),
                    fmt(r.theta),
                    r.n.to_string(),
                    fmt(r.estimate),
                    fmt(r.std_error),
                    fmt(r.mean_a),
                    fmt(r.mean_b),
                ]
            })
            .collect();
        write_rows(
            w,
            &[
                "setting",
                "theta",
                "n",
                "estimate",
                "std_error",
                "mean_a",
                "mean_b",
            ],
            &rows,
        )
    })?;
    Ok(ExitCode::SUCCESS)
}
