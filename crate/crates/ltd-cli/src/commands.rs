//! The four subcommands: `detect`, `eval`, `synth`, `bench`.

use std::fs;
use std::path::Path;
use std::time::Instant;

use ltd_core::eval::{evaluate, EvalReport};
use ltd_core::fusion::{fuse, spatial_map, spectral_map, GuidedFilterParams};
use ltd_core::solver::{solve_ltd, solve_ltd_rr, LtdParams, SolverState, Trace};
use ltd_core::tensor::Tensor3;

use crate::config::RunConfig;
use crate::error::Result;
use crate::io;
use crate::synth::synth_dataset;

/// Solve one cube with the given parameters, honoring the rank-reduction
/// switch.
pub fn run_solver(h: &Tensor3, params: &LtdParams) -> Result<(SolverState, Trace)> {
    let out = if params.rank_reduction {
        solve_ltd_rr(h, params)?
    } else {
        solve_ltd(h, params)?
    };
    Ok(out)
}

/// `detect`: read a cube, run the solver, write the three detection maps,
/// the raw fused scores, and the iteration trace.
pub fn cmd_detect(config: &Path, cube: &Path, out_dir: &Path) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let mut h = io::read_cube(cube)?;
    if cfg.params.normalize_input {
        h = io::normalize_cube(&h)?;
    }
    let (state, trace) = run_solver(&h, &cfg.params)?;

    let t1 = spectral_map(&state.e1);
    let t2 = spatial_map(&state.e2);
    let fused = fuse(&t1, &t2, cfg.params.fusion_mode, &GuidedFilterParams::default())?;

    fs::create_dir_all(out_dir)?;
    io::write_pgm16(&out_dir.join("T1.pgm"), &t1)?;
    io::write_pgm16(&out_dir.join("T2.pgm"), &t2)?;
    io::write_pgm16(&out_dir.join("T.pgm"), &fused)?;
    io::write_scores_csv(&out_dir.join("T.csv"), &fused)?;
    io::write_trace_csv(&out_dir.join("trace.csv"), &trace)?;
    Ok(())
}

fn render_report(report: &EvalReport) -> String {
    let s = &report.separability;
    let line = |name: &str, f: &ltd_core::eval::FiveNumberSummary| {
        format!(
            "  {name}: min={:.4} q1={:.4} median={:.4} q3={:.4} max={:.4}\n",
            f.min, f.q1, f.median, f.q3, f.max
        )
    };
    format!(
        "AUC: {:.2}\nseparability of min-max normalized scores\n{}{}",
        report.auc * 100.0,
        line("background", &s.background),
        line("anomaly   ", &s.anomaly),
    )
}

/// `eval`: score a CSV map against a PGM mask; writes `roc.csv` and
/// `report.txt` and prints the AUC percentage.
pub fn cmd_eval(scores: &Path, mask: &Path, out_dir: &Path) -> Result<()> {
    let score = io::read_scores_csv(scores)?;
    let truth = io::read_mask(mask)?;
    let report = evaluate(&score, &truth)?;

    fs::create_dir_all(out_dir)?;
    io::write_roc_csv(&out_dir.join("roc.csv"), &report.roc)?;
    fs::write(out_dir.join("report.txt"), render_report(&report))?;
    println!("AUC: {:.2}", report.auc * 100.0);
    Ok(())
}

/// Arguments of `synth`, mirrored from the CLI surface.
#[derive(Debug, Clone, Copy)]
pub struct SynthArgs {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    pub b: usize,
    pub rank: usize,
    pub anomalies: usize,
    pub sigma: f64,
    pub seed: u64,
}

/// `synth`: write `cube.hsc` and `mask.pgm` for a planted-anomaly dataset.
pub fn cmd_synth(args: &SynthArgs, out_dir: &Path) -> Result<()> {
    let data = synth_dataset(
        args.n1,
        args.n2,
        args.n3,
        args.b,
        args.rank,
        args.anomalies,
        args.sigma,
        args.seed,
    )?;
    fs::create_dir_all(out_dir)?;
    io::write_cube(&out_dir.join("cube.hsc"), &data.cube, io::CubeDtype::F64)?;
    io::write_mask(&out_dir.join("mask.pgm"), &data.truth)?;
    Ok(())
}

/// Parameters used for the benchmark solves; the group-sparsity weight is
/// swept by the caller.
pub fn bench_params(lambda4: f64, rank_reduction: bool) -> LtdParams {
    LtdParams {
        lambda2: 0.3,
        lambda3: 1.0,
        lambda4,
        lambda5: 0.15,
        lambda6: 0.1,
        max_iter: 60,
        rel_tol: 1e-4,
        rank_reduction,
        normalize_input: false,
        ..LtdParams::default()
    }
}

/// `bench`: fixed-width vs rank-adaptive solver on one synthetic cube across
/// a sweep of group-sparsity weights; writes `bench.csv` with wall times,
/// final widths and AUC.
pub fn cmd_bench(out_dir: &Path) -> Result<()> {
    let data = synth_dataset(64, 64, 30, 4, 3, 40, 0.02, 7)?;
    let mut rows = String::from("solver,lambda4,seconds,iterations,final_r,auc_percent\n");
    for &lambda4 in &[0.5, 2.0, 5.0, 10.0] {
        for &adaptive in &[false, true] {
            let params = bench_params(lambda4, adaptive);
            let started = Instant::now();
            let (state, trace) = run_solver(&data.cube, &params)?;
            let seconds = started.elapsed().as_secs_f64();
            let t1 = spectral_map(&state.e1);
            let t2 = spatial_map(&state.e2);
            let fused = fuse(
                &t1,
                &t2,
                params.fusion_mode,
                &GuidedFilterParams::default(),
            )?;
            let report = evaluate(&fused, &data.truth)?;
            let name = if adaptive { "rank-adaptive" } else { "fixed-width" };
            rows.push_str(&format!(
                "{name},{lambda4},{seconds:.3},{},{},{:.2}\n",
                trace.len(),
                state.rank,
                report.auc * 100.0
            ));
            println!(
                "{name} lambda4={lambda4}: {seconds:.2}s, {} iterations, final r {}, AUC {:.2}",
                trace.len(),
                state.rank,
                report.auc * 100.0
            );
        }
    }
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("bench.csv"), rows)?;
    Ok(())
}
