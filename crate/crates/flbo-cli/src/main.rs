//! `flbo` — Finsler-Laplace-Beltrami operators on triangle meshes.
//!
//! Subcommands cover the full pipeline: operator assembly and export,
//! spectra, heat flow, Chebyshev filtering, pointwise descriptors, and the
//! built-in validation suite. Every run is a pure function of the input
//! files, the configuration, and the seed.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use flbo::FlboError;

#[derive(Parser)]
#[command(
    name = "flbo",
    version,
    about = "Finsler-Laplace-Beltrami operators on triangle meshes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble the directional operator family and export it
    Operator(commands::OperatorArgs),
    /// Solve for the low end of the spectrum and export eigenpairs
    Spectrum(commands::SpectrumArgs),
    /// Evolve a field under the simplified Finsler heat flow
    Heat(commands::HeatArgs),
    /// Apply a Chebyshev filter from a coefficient file to a field
    Filter(commands::FilterArgs),
    /// Export pointwise heat-kernel-signature descriptors
    Descriptor(commands::DescriptorArgs),
    /// Run the built-in validation suite and write its JSON report
    Validate(commands::ValidateArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Operator(args) => commands::operator(&args),
        Command::Spectrum(args) => commands::spectrum(&args),
        Command::Heat(args) => commands::heat(&args),
        Command::Filter(args) => commands::filter(&args),
        Command::Descriptor(args) => commands::descriptor(&args),
        Command::Validate(args) => commands::validate(&args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

/// Exit codes: 0 success, 1 validation failure, 2 input error, 3 missing
/// prerequisite file.
fn exit_code_for(err: &FlboError) -> u8 {
    match err {
        FlboError::Io(io) if io.kind() == std::io::ErrorKind::NotFound => 3,
        _ => 2,
    }
}
