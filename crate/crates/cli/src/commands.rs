use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use serde_json::{json, Value};
use uwdae::bench::{
    convergence_study, make_rlc, make_stokes_like, timereduction_study, Reference, RlcParams,
    StokesLikeParams,
};
use uwdae::io::{
    load_manifest, write_csv, write_json, write_manifest, GridSpec, Manifest, ParameterBox,
};
use uwdae::rbm::{
    estimator_online, greedy_with, lift_solution, reduced_solve, ReducedModel, TrainingSet,
};
use uwdae::solver::{
    estimator_detailed, evaluate_state, l2_norm, DetailedSolution, Discretization,
};
use uwdae::system::{extension_value, homogenize, DaeSystem, ScalarProfile};
use uwdae::temporal::TimeGrid;
use uwdae::Error;

use crate::{
    BenchArgs, BenchKind, ConvergenceArgs, GreedyArgs, RbsolveArgs, ReduceArgs, SolveArgs, Source,
};

/// An error together with the pipeline stage that raised it.
#[derive(Debug)]
pub struct Failure {
    pub stage: &'static str,
    pub source: Error,
}

type CmdResult = Result<(), Failure>;

trait Stage<T> {
    fn stage(self, stage: &'static str) -> Result<T, Failure>;
}

impl<T> Stage<T> for uwdae::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, Failure> {
        self.map_err(|source| Failure { stage, source })
    }
}

fn invalid(stage: &'static str, msg: impl Into<String>) -> Failure {
    Failure {
        stage,
        source: Error::InvalidInput(msg.into()),
    }
}

struct Loaded {
    manifest: Manifest,
    /// As described by the manifest, possibly with initial values.
    original: DaeSystem,
    /// Shifted to zero initial values.
    system: DaeSystem,
}

impl Loaded {
    fn homogenized(&self) -> bool {
        !self.original.is_homogeneous()
    }

    fn intervals(&self, k: Option<usize>) -> Result<usize, Failure> {
        k.or(self.manifest.grid.map(|g| g.k))
            .ok_or_else(|| invalid("grid", "no --K given and the manifest has no grid"))
    }

    fn param_box(&self) -> ParameterBox {
        self.manifest
            .parameters
            .clone()
            .unwrap_or_else(|| ParameterBox {
                lower: vec![-1.0; self.system.param_dim],
                upper: vec![1.0; self.system.param_dim],
            })
    }
}

fn load(path: &Path) -> Result<Loaded, Failure> {
    let (manifest, original) = load_manifest(path).stage("load manifest")?;
    let system = if original.is_homogeneous() {
        original.clone()
    } else {
        log::info!("shifting nonzero initial values into the right-hand side");
        homogenize(&original, &[]).stage("homogenize")?
    };
    Ok(Loaded {
        manifest,
        original,
        system,
    })
}

fn parse_numbers(text: &str, skip_header: bool) -> Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let tokens: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .collect();
        let parsed: Result<Vec<f64>, _> = tokens.iter().map(|t| t.parse::<f64>()).collect();
        match parsed {
            Ok(v) => out.extend(v),
            Err(_) if skip_header && i == 0 => continue,
            Err(e) => return Err(format!("line {}: {e}", i + 1)),
        }
    }
    Ok(out)
}

/// `--mu` as inline numbers or a file; without it the centre of the
/// parameter box, or nothing for parameter-free systems.
fn resolve_mu(
    arg: Option<&str>,
    p: usize,
    bounds: Option<&ParameterBox>,
) -> Result<Vec<f64>, Failure> {
    let mu = match arg {
        Some(s) => match parse_numbers(s, false) {
            Ok(v) if s.lines().count() <= 1 => v,
            _ => {
                let text = fs::read_to_string(s).map_err(|e| Failure {
                    stage: "parameter",
                    source: Error::InvalidInput(format!(
                        "--mu {s:?} is neither a number list nor a readable file: {e}"
                    )),
                })?;
                parse_numbers(&text, true).map_err(|e| invalid("parameter", format!("{s}: {e}")))?
            }
        },
        None if p == 0 => Vec::new(),
        None => match bounds {
            Some(b) => b
                .lower
                .iter()
                .zip(&b.upper)
                .map(|(l, u)| 0.5 * (l + u))
                .collect(),
            None => return Err(invalid("parameter", format!("--mu is required (P = {p})"))),
        },
    };
    if mu.len() != p {
        return Err(Failure {
            stage: "parameter",
            source: Error::ParameterDimensionMismatch {
                expected: p,
                got: mu.len(),
            },
        });
    }
    Ok(mu)
}

fn make_out(dir: &Path) -> CmdResult {
    fs::create_dir_all(dir).map_err(|e| Failure {
        stage: "output",
        source: Error::InvalidInput(format!("{}: {e}", dir.display())),
    })
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Midpoint trajectory (with the initial-value shift restored) and, if the
/// system has an output matrix, the output trajectory.
fn write_trajectory(
    dir: &Path,
    loaded_original: &DaeSystem,
    shifted: bool,
    sol: &DetailedSolution,
) -> CmdResult {
    let mids = sol.grid().midpoints();
    let mut x = evaluate_state(sol, &mids).stage("evaluate")?;
    if shifted {
        for (j, &t) in mids.iter().enumerate() {
            let s = extension_value(loaded_original, &[], &sol.mu, t).stage("evaluate")?;
            let mut col = x.column_mut(j);
            col += s;
        }
    }
    let n = x.nrows();
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=n).map(|i| format!("x{i}")))
        .collect();
    let rows = mids.iter().enumerate().map(|(j, &t)| {
        std::iter::once(t)
            .chain(x.column(j).iter().copied())
            .collect::<Vec<f64>>()
    });
    write_csv(&dir.join("trajectory.csv"), &header, rows).stage("output")?;
    if let Some(c) = &loaded_original.output {
        let y = c * &x;
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain((1..=y.nrows()).map(|i| format!("y{i}")))
            .collect();
        let rows = mids.iter().enumerate().map(|(j, &t)| {
            std::iter::once(t)
                .chain(y.column(j).iter().copied())
                .collect::<Vec<f64>>()
        });
        write_csv(&dir.join("output.csv"), &header, rows).stage("output")?;
    }
    Ok(())
}

fn dims_of(disc: &Discretization) -> Value {
    json!({
        "n": disc.system.n(),
        "K": disc.grid.intervals(),
        "d": disc.kernel.d,
        "dim": disc.dim(),
    })
}

pub fn solve(a: SolveArgs) -> CmdResult {
    let start = Instant::now();
    let l = load(&a.system.manifest)?;
    let k = l.intervals(a.k)?;
    let mu = resolve_mu(
        a.system.mu.as_deref(),
        l.system.param_dim,
        l.manifest.parameters.as_ref(),
    )?;
    let grid = TimeGrid::new(l.system.horizon, k).stage("grid")?;
    let disc = Discretization::new(Arc::new(l.system.clone()), &mu, grid).stage("assembly")?;
    let sol = disc.solve(&mu).stage("solve")?;
    let residual = sol.residual_norm().stage("solve")?;
    let estimator = estimator_detailed(&sol, a.refine).stage("estimator")?;
    let norm = l2_norm(&sol);
    make_out(&a.out)?;
    write_trajectory(&a.out, &l.original, l.homogenized(), &sol)?;
    let wall = ms(start);
    let rel = if norm > 0.0 { estimator / norm } else { 0.0 };
    write_json(
        &a.out.join("summary.json"),
        &json!({
            "command": "solve",
            "dims": dims_of(&disc),
            "residual": residual,
            "estimator": estimator,
            "state_norm": norm,
            "relative_estimator": rel,
            "refine": a.refine,
            "homogenized": l.homogenized(),
            "wall_ms": wall,
        }),
    )
    .stage("output")?;
    println!(
        "dim = {}  residual = {residual:.3e}  estimator = {estimator:.3e}  relative = {rel:.3e}  ({wall:.1} ms)",
        disc.dim()
    );
    Ok(())
}

pub fn convergence(a: ConvergenceArgs) -> CmdResult {
    let start = Instant::now();
    let l = load(&a.system.manifest)?;
    let mu = resolve_mu(
        a.system.mu.as_deref(),
        l.system.param_dim,
        l.manifest.parameters.as_ref(),
    )?;
    let tab = convergence_study(
        &l.system,
        &mu,
        Reference::Refined {
            factor: a.reference_factor,
        },
        &a.k,
        a.refine,
    )
    .stage("convergence")?;
    make_out(&a.out)?;
    let header = ["K", "rel_err", "rel_est"].map(String::from);
    write_csv(
        &a.out.join("convergence.csv"),
        &header,
        tab.rows
            .iter()
            .map(|r| vec![r.k as f64, r.rel_err, r.rel_est]),
    )
    .stage("output")?;
    let wall = ms(start);
    write_json(
        &a.out.join("summary.json"),
        &json!({
            "command": "convergence",
            "dims": { "n": l.system.n(), "K": a.k },
            "residual": Value::Null,
            "estimator": tab.rows.iter().map(|r| r.rel_est).collect::<Vec<_>>(),
            "error": tab.rows.iter().map(|r| r.rel_err).collect::<Vec<_>>(),
            "error_slope": tab.error_slope,
            "estimator_slope": tab.estimator_slope,
            "wall_ms": wall,
        }),
    )
    .stage("output")?;
    println!("K,rel_err,rel_est");
    for r in &tab.rows {
        println!("{},{:.6e},{:.6e}", r.k, r.rel_err, r.rel_est);
    }
    println!(
        "slope error {:.3}  estimator {:.3}",
        tab.error_slope, tab.estimator_slope
    );
    Ok(())
}

pub fn greedy(a: GreedyArgs) -> CmdResult {
    let start = Instant::now();
    let l = load(&a.manifest)?;
    let k = l.intervals(a.k)?;
    let bounds = l.param_box();
    let train = TrainingSet::uniform(&bounds.lower, &bounds.upper, a.train, a.seed)
        .stage("training set")?;
    let mu0 = train
        .params
        .first()
        .cloned()
        .ok_or_else(|| invalid("training set", "--train must be at least 1"))?;
    let q_f = l.system.rhs_terms().len();
    let grid = TimeGrid::new(l.system.horizon, k).stage("grid")?;
    let disc = Discretization::new(Arc::new(l.system.clone()), &mu0, grid).stage("assembly")?;
    let res = greedy_with(&disc, &train, a.eps, a.nmax.unwrap_or(q_f)).stage("greedy")?;
    make_out(&a.out)?;
    res.model.save(&a.out.join("model")).stage("save model")?;
    let header = ["N", "max_train_err"].map(String::from);
    write_csv(
        &a.out.join("history.csv"),
        &header,
        res.history.iter().map(|h| vec![h.n as f64, h.max_error]),
    )
    .stage("output")?;
    let wall = ms(start);
    let mut dims = dims_of(&disc);
    dims["N"] = json!(res.model.basis_size());
    dims["Q_f"] = json!(q_f);
    let last = res.history.last().map(|h| h.max_error);
    write_json(
        &a.out.join("summary.json"),
        &json!({
            "command": "greedy",
            "dims": dims,
            "residual": Value::Null,
            "estimator": last,
            "argmax": res.history.iter().map(|h| h.argmax).collect::<Vec<_>>(),
            "seed": a.seed,
            "wall_ms": wall,
        }),
    )
    .stage("output")?;
    println!(
        "N = {} of Q_f = {q_f}, max training estimator {:.3e} ({wall:.0} ms)",
        res.model.basis_size(),
        last.unwrap_or(f64::NAN)
    );
    Ok(())
}

pub fn reduce(a: ReduceArgs) -> CmdResult {
    let start = Instant::now();
    let l = load(&a.manifest)?;
    let k = l.intervals(a.k)?;
    let ctrl = l
        .system
        .control
        .as_ref()
        .ok_or_else(|| invalid("reduce", "the manifest has no control"))?;
    if ctrl.inputs() != 1 || l.system.param_dim != ctrl.param_len() {
        return Err(invalid(
            "reduce",
            "control reduction needs a single input and no parameters besides the control samples",
        ));
    }
    if let Some(&bad) = a.ku.iter().find(|&&ku| ku == 0 || ku > k) {
        return Err(invalid("reduce", format!("Ku = {bad} outside 1..={k}")));
    }
    let build = |ku: usize| -> uwdae::Result<DaeSystem> {
        let mut s = l.system.clone();
        if let Some(c) = s.control.as_mut() {
            c.intervals = ku;
        }
        s.param_dim = ku + 1;
        Ok(s)
    };
    let tab = timereduction_study(&build, k, &a.ku, a.samples, a.seed).stage("reduce")?;
    make_out(&a.out)?;
    let header = ["Ku", "max_rel_err"].map(String::from);
    write_csv(
        &a.out.join("reduce.csv"),
        &header,
        tab.iter().map(|&(ku, e)| vec![ku as f64, e]),
    )
    .stage("output")?;
    let wall = ms(start);
    write_json(
        &a.out.join("summary.json"),
        &json!({
            "command": "reduce",
            "dims": { "n": l.system.n(), "K": k, "Ku": a.ku },
            "residual": Value::Null,
            "estimator": Value::Null,
            "max_rel_err": tab.iter().map(|t| t.1).collect::<Vec<_>>(),
            "seed": a.seed,
            "wall_ms": wall,
        }),
    )
    .stage("output")?;
    println!("Ku,max_rel_err");
    for (ku, e) in &tab {
        println!("{ku},{e:.6e}");
    }
    Ok(())
}

pub fn rbsolve(a: RbsolveArgs) -> CmdResult {
    let start = Instant::now();
    let model = ReducedModel::load(&a.model).stage("load model")?;
    let mu = resolve_mu(Some(&a.mu), model.dims.param_dim, None)?;
    let x = reduced_solve(&model, &mu).stage("reduced solve")?;
    let delta = estimator_online(&model, &mu, &x).stage("estimator")?;
    let f = model.rhs(&mu).stage("reduced solve")?;
    let residual = (&model.b_n * &x - f).norm();
    let online = ms(start);
    let xs: Vec<f64> = x.iter().copied().collect();
    println!("N = {}", model.basis_size());
    println!(
        "x_N = [{}]",
        xs.iter()
            .map(|v| format!("{v:e}"))
            .collect::<Vec<_>>()
            .join(", ")
    );
    println!("Delta_N = {delta:e}");
    println!("wall_ms = {online:.3}");
    let Some(out) = a.out else {
        if a.manifest.is_some() {
            log::warn!("--manifest without --out: nothing to lift into");
        }
        return Ok(());
    };
    make_out(&out)?;
    if let Some(path) = &a.manifest {
        let l = load(path)?;
        let d = &model.dims;
        if l.system.n() != d.n || (l.system.horizon - d.horizon).abs() > 1e-12 * d.horizon {
            return Err(invalid(
                "lift",
                "manifest does not match the model dimensions",
            ));
        }
        let grid = TimeGrid::new(d.horizon, d.intervals).stage("grid")?;
        let disc = Discretization::with_kernel(
            Arc::new(l.system.clone()),
            &mu,
            grid,
            model.kernel_basis(),
        )
        .stage("assembly")?;
        let sol = lift_solution(&model, &disc, &mu, &x).stage("lift")?;
        write_trajectory(&out, &l.original, l.homogenized(), &sol)?;
    }
    write_json(
        &out.join("summary.json"),
        &json!({
            "command": "rbsolve",
            "dims": model.dims,
            "residual": residual,
            "estimator": delta,
            "x_N": xs,
            "wall_ms": online,
        }),
    )
    .stage("output")?;
    Ok(())
}

pub fn bench(a: BenchArgs) -> CmdResult {
    let path = match a.kind {
        BenchKind::Rlc => {
            let p = RlcParams::default();
            let source = match a.source {
                Source::Smooth => ScalarProfile::smooth_source(p.horizon),
                Source::Square => ScalarProfile::square_source(p.horizon),
            };
            let sys = make_rlc(&p, source).stage("bench")?;
            write_manifest(
                &a.out,
                &sys,
                Some(GridSpec {
                    k: a.k.unwrap_or(256),
                }),
                None,
            )
            .stage("output")?
        }
        BenchKind::Stokes => {
            let ku = a.ku.or(a.k).unwrap_or(75);
            let s = make_stokes_like(&StokesLikeParams {
                cells: a.cells,
                control_intervals: ku,
                ..Default::default()
            })
            .stage("bench")?;
            let p = s.system.param_dim;
            let bounds = ParameterBox {
                lower: vec![-1.0; p],
                upper: vec![1.0; p],
            };
            write_manifest(
                &a.out,
                &s.system,
                Some(GridSpec {
                    k: a.k.unwrap_or(ku),
                }),
                Some(bounds),
            )
            .stage("output")?
        }
    };
    println!("{}", path.display());
    Ok(())
}
