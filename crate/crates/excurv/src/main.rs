//! Command-line front end: pointwise invariant dumps, identity-check
//! suites, surface integrals and energies, machine-readable reports.

use clap::{Parser, Subcommand};
use excurv_core::checks::{self, Tolerances};
use excurv_core::invariants::{self, Basics};
use excurv_core::operators;
use excurv_core::quad::{self, Grid};
use excurv_core::report::Report;
use excurv_core::scenario::{self, GridSpec, Scenario};
use excurv_core::surface::FrameDepth;
use excurv_core::{Error, Frame};

#[derive(Parser)]
#[command(
    name = "excurv",
    version,
    about = "Evaluate extrinsic conformal invariants, operators and singular-Yamabe data \
             of analytically specified hypersurfaces, and verify their identities"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate cataloged invariants/operators at seeded chart points.
    Invariants {
        #[arg(long)]
        scenario: String,
        /// Comma-separated names (see `excurv list invariants`).
        #[arg(long)]
        names: String,
        #[arg(long, default_value_t = 3)]
        points: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Write the JSON report here ("-" for stdout).
        #[arg(long)]
        json: Option<String>,
    },
    /// Run an identity-check suite; exit 0 iff all checks pass.
    Check {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Override the relative tolerance of quadrature-mediated checks.
        #[arg(long)]
        tol_rel: Option<f64>,
        /// Override the absolute tolerance of variation checks.
        #[arg(long)]
        tol_abs: Option<f64>,
        /// Also run checks whose reference is attributed to unpublished work.
        #[arg(long, default_value_t = false)]
        include_unpublished: bool,
        #[arg(long)]
        json: Option<String>,
    },
    /// Integrate a named field over a closed scenario.
    Integrate {
        #[arg(long)]
        scenario: String,
        /// Field name: one, H, lo2, Q4, Q4_intrinsic, V4, V2, V3, sigma4L,
        /// J1, J2, C, Wm, Pf4, W2_intrinsic, or any invariant name.
        #[arg(long)]
        field: String,
        /// Grid override as JSON, e.g.
        /// '{"kind":"sphere_product","n_polar":12,"n_azimuth":24}'.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        json: Option<String>,
    },
    /// Renormalized-volume and bending energies of a closed M⁴ scenario.
    Energy {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        json: Option<String>,
    },
    /// List scenarios, invariants, operators, fields or check suites.
    List {
        /// One of: scenarios, invariants, operators, suites, checks, fields.
        what: String,
    },
}

fn resolve_grid(scenario: &Scenario, grid_arg: &Option<String>) -> Result<Grid, Error> {
    match grid_arg {
        Some(text) => {
            let v: serde_json::Value = serde_json::from_str(text)
                .map_err(|e| Error::schema("", format!("invalid grid JSON: {e}")))?;
            let spec = GridSpec::from_json(&v, "")?;
            Grid::from_spec(&spec, scenario)
        }
        None => Grid::build(scenario),
    }
}

fn field_evaluator(name: &str) -> Option<Box<dyn Fn(&Frame) -> f64 + Sync>> {
    let basics = |g: fn(&Frame, &Basics) -> f64| -> Box<dyn Fn(&Frame) -> f64 + Sync> {
        Box::new(move |fr| {
            let b = Basics::new(fr).expect("basics");
            g(fr, &b)
        })
    };
    Some(match name {
        "one" => Box::new(|_| 1.0),
        "H" => Box::new(|fr| fr.hmean.val()),
        "lo2" => basics(|_, b| b.lo_norm2),
        "sigma4L" => Box::new(|fr| fr.sigma4_shape()),
        "Q4" => basics(|fr, b| operators::q4(fr, b).map(|r| r.value).unwrap_or(f64::NAN)),
        "Q4_intrinsic" => basics(|fr, b| operators::intrinsic_q4(fr, b).unwrap_or(f64::NAN)),
        "Q2" => basics(|fr, b| operators::q2(fr, b, fr.n)),
        "Q3" => basics(|fr, b| operators::q3(fr, b, fr.n).unwrap_or(f64::NAN)),
        "B3" => basics(|fr, b| operators::b3(fr, b).unwrap_or(f64::NAN)),
        "E4" => basics(|fr, b| operators::e4(b, fr.n).unwrap_or(f64::NAN)),
        "V2" | "V3" | "V4" => basics(|fr, b| {
            excurv_core::yamabe::sigma_coeffs(fr, b)
                .ok()
                .and_then(|e| e.vn)
                .unwrap_or(f64::NAN)
        }),
        "Pf4" => basics(|_, b| {
            b.j * b.j - b.p_norm2 + b.w_intr_norm2.unwrap_or(f64::NAN) / 8.0
        }),
        "W2_intrinsic" => basics(|_, b| b.w_intr_norm2.unwrap_or(f64::NAN)),
        other => {
            if invariants::catalog().contains(&other) {
                let name = other.to_string();
                Box::new(move |fr: &Frame| {
                    invariants::evaluate(&name, fr).map(|v| v.value).unwrap_or(f64::NAN)
                })
            } else {
                return None;
            }
        }
    })
}

fn write_json(json: &Option<String>, value: &serde_json::Value) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value).expect("serialize");
    match json.as_deref() {
        None => Ok(()),
        Some("-") => {
            println!("{text}");
            Ok(())
        }
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Error::BadParams(format!("cannot write {path}: {e}"))),
    }
}

fn run() -> Result<i32, (i32, String)> {
    let cli = Cli::parse();
    let data = |e: Error| (3i32, e.to_string());
    match cli.command {
        Command::Invariants {
            scenario,
            names,
            points,
            seed,
            json,
        } => {
            let scen = scenario::resolve(&scenario).map_err(data)?;
            let names: Vec<&str> = names.split(',').map(|s| s.trim()).collect();
            let operator_names = operators::catalog();
            for name in &names {
                if !invariants::catalog().contains(name) && !operator_names.contains(name) {
                    return Err((
                        2,
                        format!(
                            "unknown name \"{name}\"; catalog: {} / operators: {}",
                            invariants::catalog().join(", "),
                            operator_names.join(", ")
                        ),
                    ));
                }
            }
            let pts = scen.sample_points(points, seed);
            let mut rows = Vec::new();
            println!("{:>14} {:>22} point", "name", "value");
            for u in &pts {
                let fr = scen.frame(u, FrameDepth::Full).map_err(data)?;
                let b = Basics::new(&fr).map_err(data)?;
                for name in &names {
                    let value = if invariants::catalog().contains(name) {
                        invariants::evaluate_with(name, &fr, &b).map_err(data)?.value
                    } else {
                        match *name {
                            "Q2" => operators::q2(&fr, &b, fr.n),
                            "Q3" => operators::q3(&fr, &b, fr.n).map_err(data)?,
                            "Q4" => operators::q4(&fr, &b).map_err(data)?.value,
                            "B3" => operators::b3(&fr, &b).map_err(data)?,
                            "E4" => operators::e4(&b, fr.n).map_err(data)?,
                            "P2" | "P3" | "P4" => {
                                // applied to the constant function 1
                                let one =
                                    excurv_core::Jet::constant(fr.n, 4, 1.0);
                                match *name {
                                    "P2" => operators::p2_apply(&fr, &b, &one).map_err(data)?,
                                    "P3" => operators::p3_apply(&fr, &b, &one).map_err(data)?,
                                    _ => operators::p4_apply(&fr, &b, &one).map_err(data)?,
                                }
                            }
                            _ => unreachable!(),
                        }
                    };
                    println!("{:>14} {:>22.15e} {:?}", name, value, u);
                    rows.push(serde_json::json!({
                        "name": name, "value": value, "point": u,
                    }));
                }
            }
            let out = serde_json::json!({
                "tool_version": excurv_core::report::TOOL_VERSION,
                "scenario": scen.name,
                "scenario_hash": format!("{:016x}", scen.hash()),
                "seed": seed,
                "values": rows,
            });
            write_json(&json, &out).map_err(data)?;
            Ok(0)
        }
        Command::Check {
            scenario,
            suite,
            seed,
            tol_rel,
            tol_abs,
            include_unpublished,
            json,
        } => {
            if !checks::suite_names().contains(&suite.as_str()) {
                return Err((
                    2,
                    format!("unknown suite \"{suite}\"; suites: {}", checks::suite_names().join(", ")),
                ));
            }
            let scen = scenario::resolve(&scenario).map_err(data)?;
            let mut tols = Tolerances::default();
            if let Some(t) = tol_rel {
                tols.quadrature = t;
                tols.covariance = t.min(tols.covariance);
            }
            if let Some(t) = tol_abs {
                tols.variation = t;
            }
            let mut records = checks::run_suite(&scen, &suite, seed, tols).map_err(data)?;
            if include_unpublished && scen.n == 4 && scen.closed {
                let grid = Grid::build(&scen).map_err(data)?;
                records.push(
                    checks::j3_total_integral(&scen, &grid, tols.quadrature).map_err(data)?,
                );
            }
            let report = Report::new(&scen, seed, records);
            for r in &report.records {
                let status = if r.skipped {
                    "SKIP"
                } else if r.pass {
                    "PASS"
                } else {
                    "FAIL"
                };
                println!(
                    "[{status}] {:<38} abs {:>10.3e}  rel {:>10.3e}  ({})",
                    r.check_id, r.abs_err, r.rel_err, r.reference
                );
            }
            println!(
                "suite {suite}: {} passed, {} failed, {} skipped",
                report.summary.passed, report.summary.failed, report.summary.skipped
            );
            write_json(&json, &report.to_json()).map_err(data)?;
            Ok(if report.all_pass() { 0 } else { 1 })
        }
        Command::Integrate {
            scenario,
            field,
            grid,
            json,
        } => {
            let scen = scenario::resolve(&scenario).map_err(data)?;
            if !scen.closed {
                return Err((3, format!("scenario {} is not closed", scen.name)));
            }
            let ev = field_evaluator(&field)
                .ok_or_else(|| (2i32, format!("unknown field \"{field}\"")))?;
            let g = resolve_grid(&scen, &grid).map_err(data)?;
            let value =
                quad::integrate(&scen, &g, FrameDepth::Full, |fr| ev(fr)).map_err(data)?;
            // a-posteriori error estimate from a coarsened ladder
            let specs = [
                Grid::refined_spec(&scen.grid, 0.6),
                Grid::refined_spec(&scen.grid, 0.8),
                scen.grid.clone(),
            ];
            let probe =
                quad::convergence_probe(&scen, &specs, FrameDepth::Full, |fr| ev(fr))
                    .map_err(data)?;
            println!("integral of {field} over {} = {value:.15e}", scen.name);
            println!(
                "error estimate {:.3e}{}",
                probe.error_estimate,
                match probe.observed_order {
                    Some(p) => format!(", observed order {p:.1}"),
                    None => String::new(),
                }
            );
            let out = serde_json::json!({
                "tool_version": excurv_core::report::TOOL_VERSION,
                "scenario": scen.name,
                "scenario_hash": format!("{:016x}", scen.hash()),
                "field": field,
                "value": value,
                "error_estimate": probe.error_estimate,
                "ladder": probe.values,
            });
            write_json(&json, &out).map_err(data)?;
            Ok(0)
        }
        Command::Energy { scenario, grid, json } => {
            let scen = scenario::resolve(&scenario).map_err(data)?;
            let g = resolve_grid(&scen, &grid).map_err(data)?;
            let en = excurv_core::yamabe::energies(&scen, &g).map_err(data)?;
            println!("E_M          = {:.12e}", en.e_m);
            println!("E_GR_route1  = {:.12e}", en.e_gr_route1);
            println!("E_GR_route2  = {:.12e}", en.e_gr_route2);
            println!("E_GR_ds      = {:.12e}", en.e_gr_ds);
            println!("E_GR_ch      = {:.12e}", en.e_gr_ch);
            match en.e_g {
                Some(v) => println!("E_G          = {v:.12e}"),
                None => println!("E_G          = (background is neither flat nor round)"),
            }
            println!("int_Q4       = {:.12e}", en.int_q4);
            println!("relation_residual = {:.3e}", en.relation_residual);
            let out = serde_json::json!({
                "tool_version": excurv_core::report::TOOL_VERSION,
                "scenario": scen.name,
                "scenario_hash": format!("{:016x}", scen.hash()),
                "E_M": en.e_m,
                "E_GR_route1": en.e_gr_route1,
                "E_GR_route2": en.e_gr_route2,
                "E_GR_ds": en.e_gr_ds,
                "E_GR_ch": en.e_gr_ch,
                "E_G": en.e_g,
                "int_Q4": en.int_q4,
                "relation_residual": en.relation_residual,
            });
            write_json(&json, &out).map_err(data)?;
            Ok(0)
        }
        Command::List { what } => {
            match what.as_str() {
                "scenarios" => {
                    for s in scenario::catalog() {
                        println!("{s}");
                    }
                }
                "invariants" => {
                    for s in invariants::catalog() {
                        println!("{s}");
                    }
                }
                "operators" => {
                    for s in operators::catalog() {
                        println!("{s}");
                    }
                }
                "suites" => {
                    for s in checks::suite_names() {
                        println!("{s}");
                    }
                }
                "fields" => {
                    for s in [
                        "one", "H", "lo2", "sigma4L", "Q4", "Q4_intrinsic", "Q2", "Q3", "B3",
                        "E4", "V2", "V3", "V4", "Pf4", "W2_intrinsic",
                    ] {
                        println!("{s}");
                    }
                    for s in invariants::catalog() {
                        println!("{s}");
                    }
                }
                "checks" => {
                    println!("structural identities: gauss_curvature, gauss_ricci, gauss_scalar, gauss_weyl,");
                    println!("  codazzi_mainardi, codazzi_trace, codazzi_tracefree, fialkow, fialkow_tracefree, simons");
                    println!("divergence identities: divergence_exchange, divergence_pairing");
                    println!("decompositions: j5_expansion, i5bar_relation, weyl_restriction, dll_pointwise,");
                    println!("  wm_decomposition, jj_difference, j12_linear_combination, c_equals_j_combination,");
                    println!("  j3_j4_j1_relation, q4_decomposition_a, q4_decomposition_b, q4_decomposition_general_at_4,");
                    println!("  b3_s_tensor_form, b3_residue_consistency, b3_divergence_combination");
                    println!("covariance: weight_law_<name>, covariance_S, covariance_D, covariance_P4,");
                    println!("  q4_transformation_law, invariance_fialkow, weight_law_B3");
                    println!("variation: variation_* (numerical t-differentiation)");
                    println!("expansion: volume_coefficient_v1..v4, sigma2_is_half_h, sigma3_gauss_form,");
                    println!("  sigma4_closed_form_dim3, v2_closed_form, v3_closed_form");
                    println!("integrals: energy_q4_relation, gr_route_agreement, chern_gauss_bonnet, hopf_formula,");
                    println!("  j1_flat_integral, j2_flat_integral, c_flat_integral, j_difference_flat,");
                    println!("  energy_relation_flat, energy_relation_sphere, guven_wm_relation, gr_flat_crosscheck,");
                    println!("  willmore_relation, v3_total_integral, p4_self_adjointness, q4_general_reconstruction_n5");
                }
                other => {
                    return Err((2, format!("unknown list target \"{other}\"")));
                }
            }
            Ok(0)
        }
    }
}

fn main() {
    match run() {
        Ok(code) => std::process::exit(code),
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            std::process::exit(code);
        }
    }
}
