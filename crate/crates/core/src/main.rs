//! Command-line front end. All parsing and composition logic lives in the
//! library; this binary only does file IO and exit-code mapping.
//! Exit codes: 0 success, 2 configuration or usage error, 3 numerical failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use slab_transport::harness::{
    apply_key, compose_config, convergence_csv, convergence_study, monitors_csv, parse_args,
    preset_config, run_case, solution_csv, CliCommand, ConvergeArgs, HarnessError, RunArgs, USAGE,
};

enum Failure {
    /// Bad command line; prints usage.
    Usage(String),
    Config(String),
    Numerical(String),
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.is_empty() {
        eprintln!("{USAGE}");
        return ExitCode::from(2);
    }
    if args.iter().any(|a| a == "--help" || a == "-h") {
        println!("{USAGE}");
        return ExitCode::SUCCESS;
    }
    match dispatch(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\n{USAGE}");
            ExitCode::from(2)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn dispatch(args: &[String]) -> Result<(), Failure> {
    match parse_args(args).map_err(Failure::Usage)? {
        CliCommand::Run(run) => execute_run(&run),
        CliCommand::Converge(conv) => execute_converge(&conv),
    }
}

fn classify(err: HarnessError) -> Failure {
    match err {
        HarnessError::Config(msg) => Failure::Config(msg),
        other => Failure::Numerical(other.to_string()),
    }
}

fn out_dir(out: &Option<String>) -> Result<Option<PathBuf>, Failure> {
    let Some(dir) = out else { return Ok(None) };
    let path = PathBuf::from(dir);
    fs::create_dir_all(&path)
        .map_err(|e| Failure::Config(format!("cannot create {}: {e}", path.display())))?;
    Ok(Some(path))
}

fn write_file(dir: &Path, name: &str, content: &str) -> Result<(), Failure> {
    let path = dir.join(name);
    fs::write(&path, content)
        .map_err(|e| Failure::Config(format!("cannot write {}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn execute_run(run: &RunArgs) -> Result<(), Failure> {
    let file_text = match &run.config_path {
        Some(path) => Some(
            fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("cannot read {path}: {e}")))?,
        ),
        None => None,
    };
    let config = compose_config(run, file_text.as_deref()).map_err(Failure::Config)?;
    let record = run_case(&config).map_err(classify)?;

    let stem = format!(
        "{}_{}",
        run.case.map_or("run", |kind| kind.name()),
        config.scheme.name()
    );
    let last = record.monitors.last().expect("monitors always has the initial row");
    println!(
        "{stem}: {} steps to t={}, final mass {:.6e}, wall {:.2}s",
        record.total_steps, last.t, last.mass, record.wall_seconds
    );
    if let Some(dir) = out_dir(&run.out)? {
        for snap in &record.snapshots {
            write_file(&dir, &format!("{stem}_t{}.csv", snap.t), &solution_csv(&record.x, snap))?;
        }
        write_file(&dir, &format!("{stem}_monitors.csv"), &monitors_csv(&record.monitors))?;
    }
    Ok(())
}

fn execute_converge(conv: &ConvergeArgs) -> Result<(), Failure> {
    let mut template = preset_config(conv.case);
    template.scheme = conv.scheme;
    for (k, v) in &conv.sets {
        apply_key(&mut template, k, v).map_err(Failure::Config)?;
    }
    template.validate().map_err(Failure::Config)?;
    let study = convergence_study(&template, &conv.meshes, conv.ref_nx).map_err(classify)?;
    print!("{}", convergence_csv(&study));
    println!("least-squares order: {:.4}", study.slope);
    if let Some(dir) = out_dir(&conv.out)? {
        write_file(&dir, &format!("converge_{}.csv", conv.scheme.name()), &convergence_csv(&study))?;
    }
    Ok(())
}
