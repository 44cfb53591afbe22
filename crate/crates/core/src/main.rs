use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use socioplan::human_augmentation::Condition;
use socioplan::scenario::svg::render_report;
use socioplan::scenario::{
    assess_scenario, compare_assessments, compare_conditions, run_scenario, AssessorKind,
    RunOptions, RunReport, Scenario,
};
use socioplan::scene_graph::{load_scene, LoadOptions, SceneError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "socioplan", version, about = "Human-aware trajectory planning over 3D scene graphs")]
struct Cli {
    /// Reject unknown keys in scene files instead of warning.
    #[arg(long, global = true)]
    strict: bool,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a scene file.
    Validate { scene: PathBuf },
    /// Assess the objects near the straight start-goal segment, per condition.
    Assess {
        scenario: PathBuf,
        #[arg(long)]
        assessor: Option<AssessorKind>,
    },
    /// Plan every condition of a scenario.
    Plan {
        scenario: PathBuf,
        #[arg(long)]
        assessor: Option<AssessorKind>,
        /// Write the report JSON here.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Plan every condition and print the cost (clearance) table.
    Compare {
        scenario: PathBuf,
        #[arg(long)]
        assessor: Option<AssessorKind>,
    },
    /// Draw a report's paths over one condition's costmap.
    Render {
        report: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Condition whose costmap is drawn; defaults to the last one.
        #[arg(long)]
        condition: Option<Condition>,
    },
}

fn load_scenario(path: &Path) -> Result<(Scenario, PathBuf)> {
    let scenario = Scenario::load(path)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((scenario, base))
}

fn options(strict: bool, assessor: Option<AssessorKind>) -> RunOptions {
    RunOptions {
        strict,
        assessor,
        transport: None,
    }
}

fn validate(path: &Path, strict: bool, format: Format) -> Result<ExitCode> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    match load_scene(&bytes, LoadOptions { strict }) {
        Ok(loaded) => {
            match format {
                Format::Json => println!(
                    "{}",
                    json!({
                        "valid": true,
                        "nodes": loaded.graph.nodes.len(),
                        "relations": loaded.graph.relations.len(),
                        "humans": loaded.graph.humans().count(),
                        "warnings": loaded.warnings,
                    })
                ),
                Format::Text => {
                    for w in &loaded.warnings {
                        println!("warning: {w}");
                    }
                    println!(
                        "ok: {} nodes, {} relations",
                        loaded.graph.nodes.len(),
                        loaded.graph.relations.len()
                    );
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Err(err) => {
            let errors: Vec<String> = match &err {
                SceneError::Invalid(violations) => violations.iter().map(|v| v.to_string()).collect(),
                other => vec![other.to_string()],
            };
            match format {
                Format::Json => println!("{}", json!({"valid": false, "errors": errors})),
                Format::Text => {
                    for e in &errors {
                        println!("error: {e}");
                    }
                }
            }
            Ok(ExitCode::FAILURE)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Validate { scene } => return validate(&scene, cli.strict, cli.format),
        Command::Assess { scenario, assessor } => {
            let (s, base) = load_scenario(&scenario)?;
            let report = assess_scenario(&s, &base, &options(cli.strict, assessor))?;
            match cli.format {
                Format::Json => println!("{}", report.to_json()),
                Format::Text => {
                    if report.conditions.len() >= 2 {
                        print!("{}", compare_assessments(&report)?.to_text());
                    } else {
                        for c in &report.conditions {
                            println!("{}", c.label);
                            for (id, cc) in &c.assessment.entries {
                                println!("  {id}: {cc}");
                            }
                        }
                    }
                }
            }
        }
        Command::Plan {
            scenario,
            assessor,
            output,
        } => {
            let (s, base) = load_scenario(&scenario)?;
            let report = run_scenario(&s, &base, &options(cli.strict, assessor))?;
            let json = report.to_json();
            if let Some(out) = &output {
                std::fs::write(out, format!("{json}\n"))
                    .with_context(|| format!("writing {}", out.display()))?;
            }
            match cli.format {
                Format::Json => println!("{json}"),
                Format::Text => print!("{}", report.summary_text()),
            }
        }
        Command::Compare { scenario, assessor } => {
            let (s, base) = load_scenario(&scenario)?;
            let report = run_scenario(&s, &base, &options(cli.strict, assessor))?;
            let table = compare_conditions(&report)?;
            match cli.format {
                Format::Json => println!("{}", table.to_json()),
                Format::Text => print!("{}", table.to_text()),
            }
        }
        Command::Render {
            report,
            output,
            condition,
        } => {
            let text = std::fs::read_to_string(&report)
                .with_context(|| format!("reading {}", report.display()))?;
            let parsed = RunReport::from_json(&text)?;
            if parsed.conditions.is_empty() {
                bail!("{} has no conditions", report.display());
            }
            let svg = render_report(&parsed, condition)?;
            std::fs::write(&output, &svg).with_context(|| format!("writing {}", output.display()))?;
            match cli.format {
                Format::Json => println!(
                    "{}",
                    json!({"written": output.display().to_string(), "paths": parsed.conditions.len()})
                ),
                Format::Text => println!("wrote {}", output.display()),
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
