//! mesh -> enrich -> assemble -> solve -> analyze, plus the sweep,
//! linear-dependency scan and convergence benchmark drivers.

use std::fs;
use std::io::BufWriter;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::analysis::{
    analytical_edge_crack, analytical_strain_stress, energy_error, l2_error, sif_error, sif_extract, FieldSolution,
    SifResult,
};
use crate::assembly::{apply_dirichlet, assemble, DofMap, LoadSpec, Material, SymSparseSystem};
use crate::config::{DirichletKind, PreconditionerKind, RunConfig, SweepAxis};
use crate::error::{Error, Result};
use crate::geometry::{classify, CrackSet, EnrichmentMap, Mesh, Point};
use crate::io;
use crate::lindep::{self, ElementType, EliminationRecord, ALL_TYPES};
use crate::partition::{build_strategy, PartitionPlan, Subdomain, SubdomainKind};
use crate::quadrature::QuadratureOrders;
use crate::solver::pcg::IterationRecord;
use crate::solver::spectral::{self, CondEstimate, CondMode, DENSE_THRESHOLD};
use crate::solver::{
    cc_factor, pcg_solve, AsmPreconditioner, IdentityPreconditioner, JacobiPreconditioner, Ordering, PcgOptions, Preconditioner,
    SolveReport, SubsolverSpec,
};

/// Everything up to (and including) the constrained linear system.
pub struct Problem {
    pub config: RunConfig,
    pub mesh: Mesh,
    pub cracks: CrackSet,
    pub map: EnrichmentMap,
    pub material: Material,
    pub dofmap: DofMap,
    pub eliminations: Vec<EliminationRecord>,
    pub system: SymSparseSystem,
    pub t_assemble: f64,
}

impl Problem {
    pub fn num_enriched(&self) -> usize {
        self.dofmap.n - 2 * self.mesh.num_nodes()
    }

    /// Scalar DOFs removed by the linear dependency elimination.
    pub fn num_eliminated(&self) -> usize {
        2 * self.dofmap.eliminated.len()
    }

    /// Position of the first tip, needed by the mode-I reference field.
    fn reference_tip(&self) -> Result<&crate::geometry::Tip> {
        self.cracks
            .tips
            .first()
            .ok_or_else(|| Error::InvalidConfiguration("mode_i loading needs a crack tip".into()))
    }
}

/// Build the mesh, cracks, enrichment and constrained system on the
/// current rayon pool.
pub fn build_problem(cfg: &RunConfig) -> Result<Problem> {
    let t0 = Instant::now();
    let (o, e) = (cfg.origin(), cfg.extent());
    let mesh = Mesh::new(cfg.mesh.nx, cfg.nodes_y(), Point::new(o[0], o[1]), e[0], e[1])?;
    let cracks = if cfg.crack_list().is_empty() { CrackSet::empty() } else { CrackSet::new(cfg.crack_list())? };
    let map = classify(&mesh, &cracks, cfg.enrichment_mode())?;
    let material = cfg.material.material()?;
    let en = &cfg.enrichment;
    let eliminations = if en.eliminate {
        lindep::select_and_eliminate(&mesh, &cracks, &map, en.enr, (en.pair[0], en.pair[1]))?
    } else {
        Vec::new()
    };
    let keys: Vec<_> = eliminations.iter().flat_map(|r| r.keys.iter().cloned()).collect();
    let dofmap = DofMap::build(&map, mesh.num_nodes(), en.enr, &keys)?;
    let lc = cfg.loads();
    let loads = LoadSpec {
        body_force: Point::new(lc.body_force[0], lc.body_force[1]),
        tractions: lc.tractions.iter().map(|t| (t.edge, Point::new(t.t[0], t.t[1]))).collect(),
        pressure: lc.pressure,
    };
    let mut system = assemble(&mesh, &cracks, &map, &material, &dofmap, &loads, &QuadratureOrders::default())?.system;
    match lc.dirichlet {
        DirichletKind::ModeI => {
            let tip = cracks
                .tips
                .first()
                .ok_or_else(|| Error::InvalidConfiguration("mode_i loading needs a crack tip".into()))?;
            apply_dirichlet(&mut system, &mesh, &lc.edges, |x| analytical_edge_crack(x, lc.k1, &material, tip))?;
        }
        DirichletKind::Zero => apply_dirichlet(&mut system, &mesh, &lc.edges, |_| [0.0, 0.0])?,
        DirichletKind::None => {}
    }
    Ok(Problem {
        config: cfg.clone(),
        mesh,
        cracks,
        map,
        material,
        dofmap,
        eliminations,
        system,
        t_assemble: t0.elapsed().as_secs_f64(),
    })
}

/// Build the configured partition of `problem`.
pub fn subdomains(problem: &Problem) -> Result<Vec<Subdomain>> {
    let s = &problem.config.solver;
    let plan = PartitionPlan { strategy: s.strategy, workers: s.workers, delta_reg: s.delta_reg, delta_tip: s.delta_tip };
    build_strategy(&problem.mesh, &problem.map, &problem.dofmap, &problem.system.k, &plan)
}

pub fn build_asm(problem: &Problem) -> Result<AsmPreconditioner> {
    let s = &problem.config.solver;
    let spec = SubsolverSpec { regular: s.regular, tip: s.tip, ordering: s.ordering };
    AsmPreconditioner::build(&problem.system.k, subdomains(problem)?, &spec)
}

/// Preconditioner statistics reported next to the iteration counts.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PrecondStats {
    pub subdomains: usize,
    pub tip_subdomains: usize,
    pub t_setup: f64,
    pub t_factor: f64,
    pub memory_bytes: usize,
    pub max_memory_bytes: usize,
    pub t_tip: f64,
    pub t_reg: f64,
}

pub struct SolveOutcome {
    pub x: Vec<f64>,
    pub report: SolveReport,
    pub stats: PrecondStats,
}

/// Solve the constrained system with the configured preconditioner.
pub fn solve(problem: &Problem) -> Result<SolveOutcome> {
    let s = &problem.config.solver;
    let sys = &problem.system;
    let opts = PcgOptions { rtol: s.rtol, maxiter: s.maxiter };
    let x0 = sys.d.clone();
    let run = |m: &dyn Preconditioner| pcg_solve(&sys.k, &sys.f, &x0, m, &opts);
    match s.preconditioner {
        PreconditionerKind::Asm => {
            let asm = build_asm(problem)?;
            asm.reset_timers();
            let (x, report) = run(&asm)?;
            let (t_tip, t_reg) = asm.phase_seconds();
            let stats = PrecondStats {
                subdomains: asm.subdomains.len(),
                tip_subdomains: asm.num_tip_subdomains(),
                t_setup: asm.setup_seconds,
                t_factor: asm.factor_seconds(),
                memory_bytes: asm.memory_bytes(),
                max_memory_bytes: asm.max_memory_bytes(),
                t_tip,
                t_reg,
            };
            Ok(SolveOutcome { x, report, stats })
        }
        PreconditionerKind::Jacobi => {
            let (x, report) = run(&JacobiPreconditioner::new(&sys.k)?)?;
            Ok(SolveOutcome { x, report, stats: PrecondStats::default() })
        }
        PreconditionerKind::None => {
            let (x, report) = run(&IdentityPreconditioner)?;
            Ok(SolveOutcome { x, report, stats: PrecondStats::default() })
        }
        PreconditionerKind::Direct => {
            let t0 = Instant::now();
            let f = cc_factor(&sys.k, Ordering::NestedDissection)?;
            let t_setup = t0.elapsed().as_secs_f64();
            let t1 = Instant::now();
            let x = f.solve(&sys.f);
            let t_sol = t1.elapsed().as_secs_f64();
            let r = sys.k.mul(&x);
            let num: f64 = r.iter().zip(&sys.f).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let den = crate::sparse::norm2(&sys.f).max(f64::MIN_POSITIVE);
            let res = num / den;
            let report = SolveReport {
                iterations: 0,
                converged: res <= s.rtol,
                history: vec![IterationRecord { iteration: 0, residual: res, precond_residual: res, seconds: t_sol }],
                final_residual: res,
                t_sol,
                t_piter: 0.0,
                t_precond: t_sol,
                alphas: Vec::new(),
                betas: Vec::new(),
            };
            let stats = PrecondStats {
                subdomains: 1,
                t_setup,
                t_factor: f.factor_seconds,
                memory_bytes: f.memory_bytes(),
                max_memory_bytes: f.memory_bytes(),
                ..Default::default()
            };
            Ok(SolveOutcome { x, report, stats })
        }
    }
}

/// One row of the run/sweep summary table.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RunSummary {
    pub name: String,
    pub axis: String,
    pub value: String,
    pub nx: usize,
    pub ny: usize,
    pub enr: usize,
    pub n_dofs: usize,
    pub n_enriched: usize,
    pub n_eliminated: usize,
    pub preconditioner: String,
    pub strategy: String,
    pub workers: usize,
    pub delta_reg: usize,
    pub delta_tip: usize,
    pub regular: String,
    pub tip: String,
    pub ordering: String,
    pub iterations: usize,
    pub converged: bool,
    pub final_residual: f64,
    pub t_assemble: f64,
    pub t_setup: f64,
    pub t_sol: f64,
    pub t_piter: f64,
    pub memory_bytes: usize,
    pub max_memory_bytes: usize,
    pub t_tip: f64,
    pub t_reg: f64,
    pub tip_reg_ratio: f64,
    pub error: String,
}

impl RunSummary {
    fn from_config(cfg: &RunConfig) -> RunSummary {
        let s = &cfg.solver;
        RunSummary {
            name: cfg.name.clone().unwrap_or_default(),
            nx: cfg.mesh.nx,
            ny: cfg.nodes_y(),
            enr: cfg.enrichment.enr,
            preconditioner: format!("{:?}", s.preconditioner).to_lowercase(),
            strategy: s.strategy.to_string(),
            workers: s.workers,
            delta_reg: s.delta_reg,
            delta_tip: s.delta_tip,
            regular: s.regular.to_string(),
            tip: s.tip.to_string(),
            ordering: s.ordering.to_string(),
            ..Default::default()
        }
    }
}

/// Error norms against the analytical mode-I field.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ErrorRow {
    pub nx: usize,
    pub h: f64,
    pub enr: usize,
    pub n_dofs: usize,
    pub l2: f64,
    pub energy: f64,
    pub k1: f64,
    pub sif_error: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SifRow {
    pub tip: usize,
    pub x: f64,
    pub y: f64,
    pub k1: f64,
    pub k2: f64,
    pub r_in: f64,
    pub r_out: f64,
}

impl SifRow {
    fn new(p: Point, s: &SifResult) -> SifRow {
        SifRow { tip: s.tip, x: p.x, y: p.y, k1: s.k1, k2: s.k2, r_in: s.r_in, r_out: s.r_out }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionRow {
    pub operator: String,
    pub n: usize,
    pub mode: String,
    pub sigma_max: f64,
    pub sigma_min: f64,
    pub cond: f64,
}

/// Per-iteration log line, with the preconditioner phase times so far.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LogLine {
    pub iteration: usize,
    pub residual: f64,
    pub precond_residual: f64,
    pub seconds: f64,
}

pub struct RunOutcome {
    pub problem: Problem,
    pub x: Vec<f64>,
    pub report: SolveReport,
    pub summary: RunSummary,
    pub errors: Option<ErrorRow>,
    pub sifs: Vec<SifRow>,
    pub condition: Vec<ConditionRow>,
}

/// Run `f` on a fresh pool sized from the config.
pub fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidConfiguration(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Full pipeline for one configuration.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    with_pool(cfg.solver.threads(), || run_on_current_pool(cfg))?
}

pub fn run_on_current_pool(cfg: &RunConfig) -> Result<RunOutcome> {
    let problem = build_problem(cfg)?;
    let sol = solve(&problem)?;
    let mut summary = RunSummary::from_config(cfg);
    summary.n_dofs = problem.dofmap.n;
    summary.n_enriched = problem.num_enriched();
    summary.n_eliminated = problem.num_eliminated();
    summary.iterations = sol.report.iterations;
    summary.converged = sol.report.converged;
    summary.final_residual = sol.report.final_residual;
    summary.t_assemble = problem.t_assemble;
    summary.t_setup = sol.stats.t_setup;
    summary.t_sol = sol.report.t_sol;
    summary.t_piter = sol.report.t_piter;
    summary.memory_bytes = sol.stats.memory_bytes;
    summary.max_memory_bytes = sol.stats.max_memory_bytes;
    summary.t_tip = sol.stats.t_tip;
    summary.t_reg = sol.stats.t_reg;
    summary.tip_reg_ratio = if sol.stats.t_reg > 0.0 { sol.stats.t_tip / sol.stats.t_reg } else { 0.0 };
    let (errors, sifs) = analyze(&problem, &sol.x)?;
    let condition = if cfg.analysis.condition { condition_rows(&problem)? } else { Vec::new() };
    Ok(RunOutcome { problem, x: sol.x, report: sol.report, summary, errors, sifs, condition })
}

fn analyze(problem: &Problem, x: &[f64]) -> Result<(Option<ErrorRow>, Vec<SifRow>)> {
    let cfg = &problem.config;
    let field = FieldSolution::new(&problem.mesh, &problem.cracks, &problem.map, &problem.dofmap, &problem.material, x)?;
    let h = problem.mesh.h();
    let [ri, ro] = cfg.analysis.sif_radii;
    let mut sifs = Vec::new();
    if cfg.analysis.sif {
        for (t, tip) in problem.cracks.tips.iter().enumerate() {
            let s = sif_extract(&field, &problem.mesh, &problem.cracks, &problem.map, &problem.material, t, ri * h, ro * h)?;
            sifs.push(SifRow::new(tip.position, &s));
        }
    }
    let mut errors = None;
    if cfg.analysis.errors == Some(true) {
        let lc = cfg.loads();
        let tip = problem.reference_tip()?;
        let m = &problem.mesh;
        let u_ref: Vec<[f64; 2]> =
            (0..m.num_nodes()).map(|n| analytical_edge_crack(m.node_coord(n), lc.k1, &problem.material, tip)).collect();
        let (eps_ref, sig_ref): (Vec<_>, Vec<_>) =
            (0..m.num_nodes()).map(|n| analytical_strain_stress(m.node_coord(n), lc.k1, &problem.material, tip)).unzip();
        let eps = field.nodal_strains_with(cfg.analysis.recovery);
        let sig: Vec<[f64; 3]> = eps.iter().map(|&e| problem.material.stress(e)).collect();
        let k1 = match sifs.first() {
            Some(s) => s.k1,
            None => sif_extract(&field, m, &problem.cracks, &problem.map, &problem.material, 0, ri * h, ro * h)?.k1,
        };
        errors = Some(ErrorRow {
            nx: m.nx,
            h,
            enr: cfg.enrichment.enr,
            n_dofs: problem.dofmap.n,
            l2: l2_error(&field.nodal_displacements(), &u_ref)?,
            energy: energy_error(&eps, &sig, &eps_ref, &sig_ref)?,
            k1,
            sif_error: sif_error(k1, lc.k1)?,
        });
    }
    Ok((errors, sifs))
}

/// Condition numbers of K (free DOFs) and of the ASM-preconditioned
/// operator restricted to the free DOFs.
pub fn condition_rows(problem: &Problem) -> Result<Vec<ConditionRow>> {
    let kr = problem.system.reduced_matrix();
    let mode = if kr.n <= DENSE_THRESHOLD { CondMode::Dense } else { CondMode::Lanczos };
    let ck = spectral::spd_condition(&kr)?;
    let mut rows = vec![cond_row("K", kr.n, mode, &ck)];
    if problem.config.solver.preconditioner == PreconditionerKind::Asm {
        let asm = build_asm(problem)?;
        let c = preconditioned_condition(problem, &asm)?;
        rows.push(cond_row(&format!("M^-1 K ({})", problem.config.solver.strategy), kr.n, mode, &c));
    }
    Ok(rows)
}

fn cond_row(op: &str, n: usize, mode: CondMode, c: &CondEstimate) -> ConditionRow {
    ConditionRow {
        operator: op.to_string(),
        n,
        mode: format!("{mode:?}").to_lowercase(),
        sigma_max: c.sigma_max,
        sigma_min: c.sigma_min,
        cond: c.cond,
    }
}

/// cond(M^-1 K) on the free DOFs: dense singular values of the symmetric
/// form when small, PCG Ritz values otherwise.
pub fn preconditioned_condition(problem: &Problem, m: &dyn Preconditioner) -> Result<CondEstimate> {
    let sys = &problem.system;
    let free = sys.free_dofs();
    let n = sys.n();
    let nf = free.len();
    let embed = |x: &[f64]| {
        let mut full = vec![0.0; n];
        for (i, &g) in free.iter().enumerate() {
            full[g] = x[i];
        }
        full
    };
    let extract = |z: &[f64], y: &mut [f64]| {
        for (i, &g) in free.iter().enumerate() {
            y[i] = z[g];
        }
    };
    if nf <= DENSE_THRESHOLD {
        let k_op = |x: &[f64], y: &mut [f64]| extract(&sys.k.mul(&embed(x)), y);
        let m_op = |x: &[f64], y: &mut [f64]| {
            let mut z = vec![0.0; n];
            m.apply(&embed(x), &mut z);
            extract(&z, y);
        };
        return spectral::preconditioned_condition_dense(k_op, m_op, nf);
    }
    // too big for dense: extremal eigenvalues from PCG's Lanczos coefficients
    let b: Vec<f64> = embed(&(0..nf).map(|i| ((i * 7919) % 1000) as f64 / 1000.0 - 0.5).collect::<Vec<_>>());
    let (_, rep) = pcg_solve(&sys.k, &b, &vec![0.0; n], m, &PcgOptions { rtol: 1e-12, maxiter: spectral::LANCZOS_STEPS })?;
    let (lo, hi) = spectral::cg_ritz_values(&rep.alphas, &rep.betas)
        .ok_or_else(|| Error::Unsupported("no PCG iterations for the Ritz estimate".into()))?;
    Ok(CondEstimate { sigma_max: hi, sigma_min: lo, cond: hi / lo, err_max: 0.0, err_min: 0.0 })
}

/// Write the standard artifacts of one run into `dir`.
pub fn write_run_artifacts(out: &RunOutcome, dir: &Path, export_matrix: bool, export_vtk: bool) -> Result<()> {
    fs::create_dir_all(dir)?;
    io::write_csv_file(&dir.join("report.csv"), std::slice::from_ref(&out.summary))?;
    let log: Vec<LogLine> = out
        .report
        .history
        .iter()
        .map(|h| LogLine { iteration: h.iteration, residual: h.residual, precond_residual: h.precond_residual, seconds: h.seconds })
        .collect();
    io::write_jsonl_file(&dir.join("iterations.jsonl"), &log)?;
    if let Some(e) = &out.errors {
        io::write_csv_file(&dir.join("errors.csv"), std::slice::from_ref(e))?;
    }
    if !out.sifs.is_empty() {
        io::write_csv_file(&dir.join("sif.csv"), &out.sifs)?;
    }
    if !out.condition.is_empty() {
        io::write_csv_file(&dir.join("condition.csv"), &out.condition)?;
    }
    let p = &out.problem;
    if export_matrix {
        io::write_matrix_market_file(&dir.join("K.mtx"), &p.system.k)?;
        io::write_vector_csv(BufWriter::new(fs::File::create(dir.join("f.csv"))?), &p.system.f)?;
        io::write_vector_csv(BufWriter::new(fs::File::create(dir.join("x.csv"))?), &out.x)?;
        if p.config.solver.preconditioner == PreconditionerKind::Asm {
            io::write_csv_file(&dir.join("partition.csv"), &partition_rows(p, &subdomains(p)?))?;
        }
    }
    if export_vtk {
        write_vtk(p, &out.x, &dir.join("field.vtk"))?;
    }
    Ok(())
}

fn write_vtk(p: &Problem, x: &[f64], path: &Path) -> Result<()> {
    let field = FieldSolution::new(&p.mesh, &p.cracks, &p.map, &p.dofmap, &p.material, x)?;
    let m = &p.mesh;
    let s = p.config.analysis.vtk_samples;
    let (nx, ny) = if s == 0 { (m.nx, m.ny) } else { (s, s) };
    let vm = field.von_mises_grid(nx, ny);
    let dx = if nx > 1 { m.lx / (nx - 1) as f64 } else { m.lx };
    let dy = if ny > 1 { m.ly / (ny - 1) as f64 } else { m.ly };
    let umag: Vec<f64> = (0..nx * ny)
        .map(|k| {
            let pt = m.origin + Point::new((k % nx) as f64 * dx, (k / nx) as f64 * dy);
            field.displacement(pt).map(|u| u[0].hypot(u[1])).unwrap_or(0.0)
        })
        .collect();
    io::write_vtk_structured_points(
        BufWriter::new(fs::File::create(path)?),
        nx,
        ny,
        [m.origin.x, m.origin.y],
        [dx, dy],
        &[("von_mises", &vm), ("displacement_magnitude", &umag)],
    )
}

/// Subdomain membership of each DOF, one row per (subdomain, DOF).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PartitionRow {
    pub subdomain: usize,
    pub kind: &'static str,
    pub tip: i64,
    pub dof: usize,
    pub node: usize,
    pub core: bool,
}

pub fn partition_rows(p: &Problem, subs: &[Subdomain]) -> Vec<PartitionRow> {
    let mut out = Vec::new();
    for (i, s) in subs.iter().enumerate() {
        let (kind, tip) = match s.kind {
            SubdomainKind::Regular => ("regular", -1),
            SubdomainKind::Tip(t) => ("tip", t as i64),
        };
        for &d in &s.dofs {
            out.push(PartitionRow {
                subdomain: i,
                kind,
                tip,
                dof: d,
                node: p.dofmap.node_of(d),
                core: s.core.binary_search(&d).is_ok(),
            });
        }
    }
    out
}

/// Run one configuration per sweep value. Failures become rows with the
/// `error` column set. A warmup run of the first value is done first and
/// discarded when `warmup` is set.
pub fn sweep(base: &RunConfig, axis: SweepAxis, values: &[String], warmup: bool, scale_overlap: bool) -> Result<Vec<RunSummary>> {
    if warmup {
        if let Some(v) = values.first() {
            if let Ok(c) = base.with_axis(axis, v, scale_overlap) {
                let _ = run(&c);
            }
        }
    }
    let mut rows = Vec::with_capacity(values.len());
    for v in values {
        let mut row = match base.with_axis(axis, v, scale_overlap) {
            Ok(c) => match run(&c) {
                Ok(o) => o.summary,
                Err(e) => RunSummary { error: e.to_string(), ..RunSummary::from_config(&c) },
            },
            Err(e) => RunSummary { error: e.to_string(), ..RunSummary::from_config(base) },
        };
        log::info!("{axis}={v}: {} iterations, converged={}", row.iterations, row.converged);
        row.axis = axis.to_string();
        row.value = v.clone();
        rows.push(row);
    }
    Ok(rows)
}

/// One candidate elimination in the linear-dependency scan.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanRow {
    pub element_type: String,
    pub element: usize,
    pub pair: usize,
    pub i: usize,
    pub j: usize,
    pub node_i: usize,
    pub alpha_i: usize,
    pub node_j: usize,
    pub alpha_j: usize,
    pub min_eig: f64,
    pub good: bool,
}

/// Eigenvalue range per element type.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanSummary {
    pub element_type: String,
    pub element: usize,
    pub full_min_eig: f64,
    pub good: usize,
    pub bad: usize,
    pub min_eig_lo: f64,
    pub min_eig_hi: f64,
}

/// Classify all 120 eliminations of two of the 16 local branch functions,
/// on the element of each type nearest the first tip.
pub fn scan_lindep(cfg: &RunConfig) -> Result<(Vec<ScanRow>, Vec<ScanSummary>)> {
    let (o, e) = (cfg.origin(), cfg.extent());
    let mesh = Mesh::new(cfg.mesh.nx, cfg.nodes_y(), Point::new(o[0], o[1]), e[0], e[1])?;
    let cracks = CrackSet::new(cfg.crack_list())?;
    let map = classify(&mesh, &cracks, cfg.enrichment_mode())?;
    let t = 0;
    let tip = cracks.tips.first().ok_or_else(|| Error::InvalidConfiguration("scan needs a crack tip".into()))?;
    let region = map.tip_region_elements(&mesh, t);
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for ty in ALL_TYPES {
        let Some(el) = region
            .iter()
            .copied()
            .filter(|&el| lindep::element_type(&mesh, &map, el, t) == Some(ty))
            .min_by(|&a, &b| {
                let (da, db) = (mesh.element_center(a).dist(tip.position), mesh.element_center(b).dist(tip.position));
                da.total_cmp(&db).then(a.cmp(&b))
            })
        else {
            log::warn!("no {ty:?} element around tip {t}");
            continue;
        };
        let g = lindep::local_enrichment_gram(&mesh, &cracks, &map, el, t, &QuadratureOrders::default());
        let scans = lindep::scan_eliminations(&g);
        let ty_name = format!("{ty:?}");
        let nodes = mesh.element_nodes(el);
        for (k, s) in scans.iter().enumerate() {
            let (ki, ai) = lindep::local_index(s.i);
            let (kj, aj) = lindep::local_index(s.j);
            rows.push(ScanRow {
                element_type: ty_name.clone(),
                element: el,
                pair: k + 1,
                i: s.i,
                j: s.j,
                node_i: nodes[ki],
                alpha_i: ai + 1,
                node_j: nodes[kj],
                alpha_j: aj + 1,
                min_eig: s.min_eig,
                good: s.good,
            });
        }
        let mins: Vec<f64> = scans.iter().map(|s| s.min_eig).collect();
        summary.push(ScanSummary {
            element_type: ty_name,
            element: el,
            full_min_eig: lindep::normalized_min_eig(&g),
            good: scans.iter().filter(|s| s.good).count(),
            bad: scans.iter().filter(|s| !s.good).count(),
            min_eig_lo: mins.iter().cloned().fold(f64::INFINITY, f64::min),
            min_eig_hi: mins.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        });
    }
    Ok((rows, summary))
}

pub fn is_type(row: &ScanRow, ty: ElementType) -> bool {
    row.element_type == format!("{ty:?}")
}

/// Convergence orders fitted over a mesh sequence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OrderRow {
    pub enr: usize,
    pub l2_order: f64,
    pub energy_order: f64,
    pub sif_order: f64,
}

/// Error norms on each mesh for each enr, and least-squares orders.
pub fn bench_convergence(base: &RunConfig, meshes: &[usize], enrs: &[usize]) -> Result<(Vec<ErrorRow>, Vec<OrderRow>)> {
    let mut rows = Vec::new();
    let mut orders = Vec::new();
    for &enr in enrs {
        let mut block = Vec::new();
        for &n in meshes {
            let mut c = base.with_axis(SweepAxis::Mesh, &n.to_string(), false)?;
            c.enrichment.enr = enr;
            c.analysis.errors = Some(true);
            c.analysis.sif = false;
            let out = run(&c)?;
            if !out.report.converged {
                log::warn!("mesh {n}, enr {enr}: solver did not converge");
            }
            let e = out.errors.ok_or_else(|| Error::InvalidConfiguration("convergence benchmark needs mode_i loading".into()))?;
            log::info!("mesh {n} enr {enr}: L2 {:e} energy {:e} K1 {}", e.l2, e.energy, e.k1);
            block.push(e);
        }
        let h: Vec<f64> = block.iter().map(|r| r.h).collect();
        let col = |f: fn(&ErrorRow) -> f64| -> Result<f64> {
            let v: Vec<f64> = block.iter().map(f).collect();
            crate::analysis::convergence_order(&h, &v)
        };
        orders.push(OrderRow {
            enr,
            l2_order: col(|r| r.l2)?,
            energy_order: col(|r| r.energy)?,
            sif_order: col(|r| r.sif_error)?,
        });
        rows.extend(block);
    }
    Ok((rows, orders))
}
