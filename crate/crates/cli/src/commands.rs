use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use knockagg::baselines::{
    default_cv_grid, lasso_cv_support, majority_vote, ols_aggregate_select, ols_node_summary, ols_selection_rows,
    vote_counts, vote_selection_rows,
};
use knockagg::coordinator::{
    aggregate_summaries, knockoff_select, selection_csv, selection_rows, ConfidenceSpec, SummarySpec,
};
use knockagg::node::{
    construct_knockoffs, node_statistics, normalize_columns, validate_knockoffs, LambdaGrid, UNIT_NORM_TOLERANCE,
};
use knockagg::rng::{stream_seed, Stream};
use knockagg::simlab::{
    experiment_designs, recovery_csv, replicate_inputs, run_experiment, run_section4_recovery, ConfigFile,
    ExperimentConfig, Method,
};
use knockagg::wire::{decode_summary, try_encode_summary, NodeSummary, WireMode};
use knockagg::{Matrix64, NodeData64};

use crate::io::{format_matrix, format_vector, read_matrix, read_vector, write_atomic};
use crate::specs::{parse_gamma, parse_mode, parse_omega};
use crate::{AggregateArgs, BaselineArgs, BaselineMethod, CliError, ExperimentArgs, NodeArgs, ValidateArgs};

/// Loads a node's data, normalizing the design columns unless they already
/// have unit norm.
fn load_node(design: &Path, response: &Path, node_id: u32, verbose: u8) -> Result<NodeData64, CliError> {
    let x = read_matrix(design)?;
    let y = read_vector(response)?;
    let (n, p) = (x.rows(), x.cols());
    if n < 2 * p {
        return Err(CliError::Validation(format!(
            "{}: knockoffs need n >= 2p rows, got n = {n}, p = {p}",
            design.display()
        )));
    }
    let unit = x.column_norms().iter().all(|c| (c - 1.0).abs() <= UNIT_NORM_TOLERANCE);
    let x = if unit {
        x
    } else {
        if verbose > 0 {
            eprintln!("{}: normalizing columns to unit norm", design.display());
        }
        normalize_columns(&x)?
    };
    Ok(NodeData64::new(x, y, node_id, None)?)
}

fn emit(out: Option<&PathBuf>, text: &str, verbose: u8) -> Result<(), CliError> {
    match out {
        Some(path) => {
            write_atomic(path, text.as_bytes())?;
            if verbose > 0 {
                eprintln!("wrote {}", path.display());
            }
        }
        None => print!("{text}"),
    }
    Ok(())
}

pub fn node(a: &NodeArgs, verbose: u8) -> Result<(), CliError> {
    let mode = parse_mode(&a.mode)?;
    let grid = LambdaGrid::new(a.grid.lambda_points, a.grid.lambda_min_ratio)?;
    let data = load_node(&a.design, &a.response, a.node_id, verbose)?;
    let ko_seed = a
        .knockoff_seed
        .unwrap_or_else(|| stream_seed(a.seed, Stream::Knockoff, &[u64::from(a.node_id)]));
    let ko = construct_knockoffs(data.x(), ko_seed)?;
    let stats = node_statistics(&data, &ko, &grid, a.seed)?;
    let bytes = try_encode_summary(&stats, mode, a.node_id)?;
    write_atomic(&a.out, &bytes)?;
    if verbose > 0 {
        eprintln!(
            "wrote {} ({} bytes, n = {}, p = {})",
            a.out.display(),
            bytes.len(),
            data.n(),
            data.p()
        );
    }
    Ok(())
}

fn read_summary(path: &Path) -> Result<NodeSummary, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode_summary(&bytes).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

pub fn aggregate(a: &AggregateArgs, verbose: u8) -> Result<(), CliError> {
    if !(a.q > 0.0 && a.q < 1.0) {
        return Err(CliError::Validation(format!("--q must lie in (0, 1), got {}", a.q)));
    }
    let gamma = parse_gamma(&a.gamma)?;
    let omega = parse_omega(&a.omega)?;
    let summaries = a.summaries.iter().map(|p| read_summary(p)).collect::<Result<Vec<_>, _>>()?;
    let first = &summaries[0];
    for (s, path) in summaries.iter().zip(&a.summaries) {
        if s.p() != first.p() {
            return Err(CliError::Validation(format!(
                "{} has p = {} but {} has p = {}",
                path.display(),
                s.p(),
                a.summaries[0].display(),
                first.p()
            )));
        }
        if s.mode != first.mode {
            return Err(CliError::Validation(format!(
                "{} uses wire mode {:?} but {} uses {:?}",
                path.display(),
                s.mode,
                a.summaries[0].display(),
                first.mode
            )));
        }
    }
    let agg = aggregate_summaries(&summaries, &gamma)?;
    let sel = knockoff_select(&agg, a.q, &omega)?;
    if verbose > 0 {
        eprintln!(
            "{} of {} features selected from {} nodes",
            sel.num_rejected(),
            first.p(),
            summaries.len()
        );
    }
    emit(a.out.as_ref(), &selection_csv(&selection_rows(&agg, &sel)), verbose)
}

pub fn baseline(a: &BaselineArgs, verbose: u8) -> Result<(), CliError> {
    if a.design.len() != a.response.len() {
        return Err(CliError::Validation(format!(
            "{} designs but {} responses",
            a.design.len(),
            a.response.len()
        )));
    }
    if !(a.q > 0.0 && a.q < 1.0) {
        return Err(CliError::Validation(format!("--q must lie in (0, 1), got {}", a.q)));
    }
    let nodes = a
        .design
        .iter()
        .zip(&a.response)
        .enumerate()
        .map(|(i, (d, r))| load_node(d, r, i as u32, verbose))
        .collect::<Result<Vec<_>, _>>()?;
    let p = nodes[0].p();
    if nodes.iter().any(|n| n.p() != p) {
        return Err(CliError::Validation("designs differ in their number of columns".into()));
    }
    let csv = match a.method {
        BaselineMethod::Ols => {
            let summaries = nodes.iter().map(ols_node_summary).collect::<Result<Vec<_>, _>>()?;
            selection_csv(&ols_selection_rows(&ols_aggregate_select(&summaries, a.q)?))
        }
        BaselineMethod::Vote => {
            let grid = default_cv_grid();
            let supports = nodes
                .iter()
                .enumerate()
                .map(|(i, n)| {
                    lasso_cv_support(n, a.folds, &grid, stream_seed(a.seed, Stream::CrossValidation, &[i as u64]))
                })
                .collect::<Result<Vec<_>, _>>()?;
            selection_csv(&vote_selection_rows(&vote_counts(&supports, p)?, &majority_vote(&supports, p)?))
        }
    };
    emit(a.out.as_ref(), &csv, verbose)
}

pub fn check_knockoffs(a: &ValidateArgs) -> Result<(), CliError> {
    let x = read_matrix(&a.design)?;
    let x = normalize_columns(&x)?;
    let ko = construct_knockoffs(&x, a.seed)?;
    let report = validate_knockoffs(&x, &ko.x_tilde, &ko.s, a.tol)?;
    let s_min = ko.s.iter().cloned().fold(f64::INFINITY, f64::min);
    println!("n = {}, p = {}, min s = {s_min:e}", x.rows(), x.cols());
    println!("max |X~'X~ - X'X|         = {:e}", report.gram_residual);
    println!("max |X'X~ - (X'X - diag s)| = {:e}", report.cross_residual);
    if report.pass {
        println!("pass (tolerance {:e})", a.tol);
        Ok(())
    } else {
        Err(CliError::Runtime(format!("residuals exceed tolerance {:e}", a.tol)))
    }
}

#[derive(Serialize)]
struct NodeEntry {
    node_id: u32,
    design: String,
    response: String,
    knockoff_seed: u64,
    stats_seed: u64,
}

#[derive(Serialize)]
struct ReplicateEntry {
    replicate: usize,
    nodes: Vec<NodeEntry>,
    selection: String,
}

#[derive(Serialize)]
struct PointEntry {
    point: usize,
    q: f64,
    gamma: SummarySpec,
    omega: ConfidenceSpec,
    wire_mode: WireMode,
    lambda_grid: LambdaGrid,
    replicates: Vec<ReplicateEntry>,
}

#[derive(Serialize)]
struct Manifest {
    seed: u64,
    points: Vec<PointEntry>,
}

/// Writes every node's inputs and seeds plus the in-process selection CSV of
/// each replicate, as paths relative to `dir`.
fn dump_replay(cfg: &ExperimentConfig, selections: &[Vec<String>], dir: &Path) -> Result<(), CliError> {
    let mut points = Vec::new();
    for (pi, (pt, sels)) in cfg.points()?.iter().zip(selections).enumerate() {
        if pt.method != Method::Knockagg {
            continue;
        }
        let mut reps = Vec::new();
        let mut design_names: Vec<String> = Vec::new();
        for (rep, sel) in sels.iter().enumerate().take(pt.replicates) {
            let rel = |name: String| format!("point{pi}/{name}");
            if rep == 0 || pt.redraw_design {
                let designs: Vec<Matrix64> = experiment_designs(pt, rep)?;
                design_names = designs
                    .iter()
                    .enumerate()
                    .map(|(i, x)| {
                        let name = if pt.redraw_design {
                            rel(format!("rep{rep}/design{i}.csv"))
                        } else {
                            rel(format!("design{i}.csv"))
                        };
                        write_atomic(&dir.join(&name), format_matrix(x).as_bytes())?;
                        Ok(name)
                    })
                    .collect::<Result<_, CliError>>()?;
            }
            let inputs = replicate_inputs(pt, rep)?;
            let mut nodes = Vec::new();
            for (i, node) in inputs.nodes.iter().enumerate() {
                let response = rel(format!("rep{rep}/response{i}.csv"));
                write_atomic(&dir.join(&response), format_vector(node.data.y()).as_bytes())?;
                nodes.push(NodeEntry {
                    node_id: node.data.node_id(),
                    design: design_names[i].clone(),
                    response,
                    knockoff_seed: node.knockoff_seed,
                    stats_seed: node.stats_seed,
                });
            }
            let selection = rel(format!("rep{rep}/selection.csv"));
            write_atomic(&dir.join(&selection), sel.as_bytes())?;
            reps.push(ReplicateEntry {
                replicate: rep,
                nodes,
                selection,
            });
        }
        points.push(PointEntry {
            point: pi,
            q: pt.q,
            gamma: pt.gamma.clone(),
            omega: pt.omega.clone(),
            wire_mode: pt.wire_mode,
            lambda_grid: pt.lambda_grid,
            replicates: reps,
        });
    }
    let manifest = Manifest { seed: cfg.seed, points };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_atomic(&dir.join("manifest.json"), json.as_bytes())
}

pub fn experiment(a: &ExperimentArgs, verbose: u8) -> Result<(), CliError> {
    if a.list {
        for b in crate::configs::BUNDLED {
            println!("{}{}", b.name, if b.full_scale { " (full scale)" } else { "" });
        }
        return Ok(());
    }
    let config = match (&a.config, &a.bundled) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            crate::configs::parse_config(&text, &path.display().to_string())?
        }
        (None, Some(name)) => crate::configs::bundled(name, a.full_scale)?,
        (None, None) => return Err(CliError::Validation("give a config file or --bundled NAME".into())),
    };
    match config {
        ConfigFile::Fdr(mut cfg) => {
            if let Some(s) = a.seed {
                cfg.seed = s;
            }
            if let Some(r) = a.replicates {
                cfg.replicates = r;
            }
            if a.dump_dir.is_some() {
                cfg.keep_selections = true;
            }
            cfg.validate()?;
            let out = run_experiment(&cfg)?;
            let csv_path = a.out_dir.join("metrics.csv");
            write_atomic(&csv_path, out.to_csv().as_bytes())?;
            for (name, body) in out.plot_data() {
                write_atomic(&a.out_dir.join(name), body.as_bytes())?;
            }
            if let Some(dir) = &a.dump_dir {
                let sels: Vec<Vec<String>> = out.points.iter().map(|p| p.selections.clone()).collect();
                dump_replay(&cfg, &sels, dir)?;
            }
            if verbose > 0 {
                eprintln!("wrote {}", csv_path.display());
            }
            print!("{}", out.summary_text());
        }
        ConfigFile::Recovery(mut cfg) => {
            if let Some(s) = a.seed {
                cfg.seed = s;
            }
            if let Some(r) = a.replicates {
                cfg.replicates = r;
            }
            cfg.validate()?;
            let rows = run_section4_recovery(&cfg)?;
            let csv = recovery_csv(&cfg, &rows);
            let csv_path = a.out_dir.join("recovery.csv");
            write_atomic(&csv_path, csv.as_bytes())?;
            if verbose > 0 {
                eprintln!("wrote {}", csv_path.display());
            }
            for r in &rows {
                println!(
                    "m={:<4} q={:<6} hamming/p={:.4} (sd {:.4})  fdp={:.4}  power={:.4}  bits={}",
                    r.m, r.q, r.hamming_over_p.0, r.hamming_over_p.1, r.fdp, r.power, r.comm_bits
                );
            }
        }
    }
    Ok(())
}
