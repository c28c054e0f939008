//! Subcommand implementations. Every command resolves its configuration,
//! recomputes the operators it needs in-process, and writes artifacts
//! atomically under the output directory.

use std::fs;
use std::path::PathBuf;

use clap::Args;
use nalgebra::{DMatrix, DVector};
use serde_json::json;

use flbo::diffusion::simplified_randers_solve;
use flbo::export::{
    atomic_write, descriptor_to_csv, eigenvalues_to_csv, field_to_csv, matrix_to_csv,
    read_coefficients, read_field_csv, write_mass_matrix_market, write_stiffness_matrix_market,
};
use flbo::mesh::{load_mesh, MeshFormat, TriangleMesh};
use flbo::operator::{assemble_family, assemble_flbo, AnisotropyParams, AssembledOperator};
use flbo::spectral::{
    chebyshev_filter, eigensolve_with, estimate_lambda_max, finsler_hks, heat_propagate,
    EigenOptions, FilterSpec, SpectralBasis,
};
use flbo::validate::run_validation_suite;
use flbo::{FlboError, Result};

use crate::config::{CommonArgs, RunConfig};

struct MeshInput {
    mesh: TriangleMesh,
    stem: String,
}

fn load_input_mesh(config: &RunConfig, args: &CommonArgs) -> Result<MeshInput> {
    let path = config.require_mesh()?;
    let format = MeshFormat::from_path(path)?;
    let mesh = load_mesh(path, format)?;
    let mesh = if args.unit_area {
        mesh.normalized_to_unit_area()?
    } else {
        mesh
    };
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "mesh".to_string());
    Ok(MeshInput { mesh, stem })
}

fn prepare_output_dir(config: &RunConfig) -> Result<PathBuf> {
    fs::create_dir_all(&config.output_dir)?;
    Ok(config.output_dir.clone())
}

fn anisotropy(config: &RunConfig) -> Result<AnisotropyParams> {
    AnisotropyParams::new(config.anisotropy_level, config.tau, config.n_angles)
}

fn member_for_theta(
    mesh: &TriangleMesh,
    config: &RunConfig,
    theta_index: usize,
) -> Result<AssembledOperator> {
    let params = anisotropy(config)?;
    let thetas = params.theta_values();
    let theta = *thetas.get(theta_index).ok_or_else(|| {
        FlboError::Config(format!(
            "theta index {theta_index} is out of range for {} directions",
            config.n_angles
        ))
    })?;
    assemble_flbo(mesh, &params, theta)
}

/// Solves for min(n_eigenpairs, n) eigenpairs; returns the basis and the
/// count actually used.
fn solve_basis(
    pair: &flbo::operator::OperatorPair,
    config: &RunConfig,
) -> Result<(SpectralBasis, usize)> {
    let n = pair.n();
    let k = config.n_eigenpairs.min(n);
    let opts = EigenOptions {
        seed: config.seed,
        ..EigenOptions::default()
    };
    let basis = eigensolve_with(pair, k, &opts)?;
    Ok((basis, k))
}

// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct OperatorArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

pub fn operator(args: &OperatorArgs) -> Result<u8> {
    let config = RunConfig::resolve(&args.common)?;
    let input = load_input_mesh(&config, &args.common)?;
    let params = anisotropy(&config)?;
    let family = assemble_family(&input.mesh, &params)?;
    let out = prepare_output_dir(&config)?;
    let s_path = out.join(format!("{}.S.mtx", input.stem));
    write_mass_matrix_market(&s_path, &family.members[0].pair.mass)?;
    println!("wrote {}", s_path.display());
    for (idx, member) in family.members.iter().enumerate() {
        let w_path = out.join(format!("{}_theta{idx}.W.mtx", input.stem));
        write_stiffness_matrix_market(&w_path, &member.pair.stiffness)?;
        println!("wrote {}", w_path.display());
    }
    let report = json!({
        "mesh": config.mesh_path,
        "n_vertices": input.mesh.n_vertices(),
        "n_faces": input.mesh.n_faces(),
        "config": config,
        "assembly": family.report(),
    });
    let report_path = out.join("report.json");
    let pretty = serde_json::to_string_pretty(&report).expect("report serializes");
    atomic_write(&report_path, &format!("{pretty}\n"))?;
    println!("wrote {}", report_path.display());
    Ok(0)
}

// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Which member of the directional family to use
    #[arg(long, default_value_t = 0)]
    pub theta_index: usize,
}

pub fn spectrum(args: &SpectrumArgs) -> Result<u8> {
    let config = RunConfig::resolve(&args.common)?;
    let input = load_input_mesh(&config, &args.common)?;
    let member = member_for_theta(&input.mesh, &config, args.theta_index)?;
    let (basis, k) = solve_basis(&member.pair, &config)?;
    if k < config.n_eigenpairs {
        eprintln!(
            "note: n_eigenpairs clamped from {} to the vertex count {k}",
            config.n_eigenpairs
        );
    }
    let out = prepare_output_dir(&config)?;
    let values_path = out.join(format!("{}.eigenvalues.csv", input.stem));
    atomic_write(&values_path, &eigenvalues_to_csv(basis.eigenvalues()))?;
    println!("wrote {}", values_path.display());
    let vectors_path = out.join(format!("{}.eigenvectors.csv", input.stem));
    atomic_write(&vectors_path, &matrix_to_csv(basis.eigenvectors()))?;
    println!("wrote {}", vectors_path.display());
    println!(
        "lambda_0 = {:.6e}, lambda_max estimate = {:.6e}",
        basis.eigenvalues()[0],
        basis.lambda_max_estimate()
    );
    Ok(0)
}

// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct HeatArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Initial field CSV (vertex,value); default is a unit-mass impulse
    #[arg(long)]
    pub field: Option<PathBuf>,
    /// Vertex carrying the default impulse
    #[arg(long, default_value_t = 0)]
    pub vertex: usize,
    /// Include the particular term sourced by the divergence of the drift
    #[arg(long)]
    pub source: bool,
    /// Which member of the directional family to diffuse with
    #[arg(long, default_value_t = 0)]
    pub theta_index: usize,
}

pub fn heat(args: &HeatArgs) -> Result<u8> {
    let config = RunConfig::resolve(&args.common)?;
    let input = load_input_mesh(&config, &args.common)?;
    let member = member_for_theta(&input.mesh, &config, args.theta_index)?;
    let n = member.pair.n();
    let f0 = match &args.field {
        Some(path) => {
            let field = read_field_csv(path)?;
            if field.len() != n {
                return Err(FlboError::MalformedInput(format!(
                    "initial field has {} values but the mesh has {n} vertices",
                    field.len()
                )));
            }
            field
        }
        None => {
            if args.vertex >= n {
                return Err(FlboError::Config(format!(
                    "vertex {} is out of range (mesh has {n} vertices)",
                    args.vertex
                )));
            }
            let mut impulse = DVector::zeros(n);
            impulse[args.vertex] = 1.0 / member.pair.mass[args.vertex];
            impulse
        }
    };
    let (basis, _) = solve_basis(&member.pair, &config)?;
    let mut snapshots = DMatrix::zeros(n, config.times.len());
    for (col, &t) in config.times.iter().enumerate() {
        let u = if args.source {
            simplified_randers_solve(&input.mesh, &basis, &member.field, &f0, t)?
        } else {
            heat_propagate(&basis, &f0, t)?
        };
        snapshots.set_column(col, &u);
    }
    let out = prepare_output_dir(&config)?;
    let path = out.join(format!("{}.heat.csv", input.stem));
    atomic_write(&path, &descriptor_to_csv(&snapshots, &config.times))?;
    println!("wrote {}", path.display());
    Ok(0)
}

// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct FilterArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Chebyshev coefficient file, one value per line
    #[arg(long)]
    pub coeffs: PathBuf,
    /// Input field CSV (vertex,value)
    #[arg(long)]
    pub field: PathBuf,
    /// Which member of the directional family to filter with
    #[arg(long, default_value_t = 0)]
    pub theta_index: usize,
    /// Sum the filter over all directions with weight π/n_angles
    #[arg(long)]
    pub directional_sum: bool,
}

pub fn filter(args: &FilterArgs) -> Result<u8> {
    let config = RunConfig::resolve(&args.common)?;
    let input = load_input_mesh(&config, &args.common)?;
    let coefficients = read_coefficients(&args.coeffs)?;
    if coefficients.is_empty() {
        return Err(FlboError::Config(format!(
            "{}: coefficient file is empty",
            args.coeffs.display()
        )));
    }
    let f = read_field_csv(&args.field)?;
    if f.len() != input.mesh.n_vertices() {
        return Err(FlboError::MalformedInput(format!(
            "field has {} values but the mesh has {} vertices",
            f.len(),
            input.mesh.n_vertices()
        )));
    }
    let filtered = if args.directional_sum {
        let params = anisotropy(&config)?;
        let family = assemble_family(&input.mesh, &params)?;
        let lambda_max = family
            .members
            .iter()
            .map(|m| estimate_lambda_max(&m.pair, config.seed))
            .fold(0.0f64, f64::max);
        let spec = FilterSpec {
            coefficients,
            lambda_max,
        };
        let mut sum = DVector::zeros(f.len());
        for member in &family.members {
            sum += chebyshev_filter(&member.pair, &spec, &f)?;
        }
        sum * (std::f64::consts::PI / family.members.len() as f64)
    } else {
        let member = member_for_theta(&input.mesh, &config, args.theta_index)?;
        let spec = FilterSpec {
            coefficients,
            lambda_max: estimate_lambda_max(&member.pair, config.seed),
        };
        chebyshev_filter(&member.pair, &spec, &f)?
    };
    let out = prepare_output_dir(&config)?;
    let path = out.join(format!("{}.filtered.csv", input.stem));
    atomic_write(&path, &field_to_csv(&filtered))?;
    println!("wrote {}", path.display());
    Ok(0)
}

// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct DescriptorArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Which member of the directional family to use
    #[arg(long, default_value_t = 0)]
    pub theta_index: usize,
}

pub fn descriptor(args: &DescriptorArgs) -> Result<u8> {
    let config = RunConfig::resolve(&args.common)?;
    let input = load_input_mesh(&config, &args.common)?;
    let member = member_for_theta(&input.mesh, &config, args.theta_index)?;
    let (basis, _) = solve_basis(&member.pair, &config)?;
    let hks = finsler_hks(&basis, &config.times);
    let out = prepare_output_dir(&config)?;
    let path = out.join(format!("{}.descriptor.csv", input.stem));
    atomic_write(&path, &descriptor_to_csv(&hks, &config.times))?;
    println!("wrote {}", path.display());
    Ok(0)
}

// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Fault-injection hook exercising the suite's failure path
    #[arg(long, hide = true)]
    pub inject_w_sign_error: bool,
}

pub fn validate(args: &ValidateArgs) -> Result<u8> {
    let config = RunConfig::resolve(&args.common)?;
    let report = run_validation_suite(config.seed, args.inject_w_sign_error);
    for check in &report.checks {
        println!(
            "{}  {}",
            if check.passed { "pass" } else { "FAIL" },
            check.name
        );
    }
    println!(
        "{} checks in {:.2}s (seed {})",
        report.checks.len(),
        report.runtime_seconds,
        report.seed
    );
    let out = prepare_output_dir(&config)?;
    let path = out.join("validation_report.json");
    let pretty = serde_json::to_string_pretty(&report).expect("report serializes");
    atomic_write(&path, &format!("{pretty}\n"))?;
    println!("wrote {}", path.display());
    if report.all_passed {
        Ok(0)
    } else {
        eprintln!("failed checks: {}", report.failed_names().join(", "));
        Ok(1)
    }
}
