//! Scenario implementations: each reads its parameters, writes CSV
//! artifacts into the output directory and records checks.

use std::f64::consts::PI;
use std::path::Path;

use cmclab::conformal::{lichnerowicz_sweep, sigma_report, ConformalBackground, DEFAULT_TOL};
use cmclab::flow::{
    ham_monotonicity_check, lapse_residual, run_flow_with, Block, BlockGeometry, Grid, HamTrace, MonitorEvent,
    Schedule,
};
use cmclab::graph::{
    convexity_check, gauss_map_equivariance, graph_geometry, limit_experiment, limit_table, mean_curvature_spread,
    quotient_energy, Definiteness, DomainFilter, ExactGraph, Hyperboloid, LimitConfig, LimitRow,
};
use cmclab::holonomy::{
    bolza_generators, coboundary_cocycle, cohomology_basis, evaluate_word, extend_cocycle, BolzaOctagon, Cocycle,
    HolonomyRep,
};
use cmclab::lorentz::{MinkIsometry, MinkVector};
use cmclab::models::{
    focal_times, ham_closed_form, riccati_integrate, riccati_propagate, ConeModel, KasnerModel, Model, RiccatiState,
    GENUS_TWO_AREA,
};
use cmclab::table::Table;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{Params, Scenario, ScenarioConfig};
use crate::error::CliError;
use crate::summary::{CheckRecord, RunSummary};

type Res<T> = Result<T, CliError>;

struct Out<'a> {
    dir: &'a Path,
    summary: RunSummary,
}

impl Out<'_> {
    fn write(&mut self, name: &str, contents: &str) -> Res<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.summary.artifacts.push(name.to_string());
        Ok(())
    }

    fn check(&mut self, c: CheckRecord) {
        self.summary.push(c);
    }
}

/// Runs one scenario and writes its artifacts plus `summary.csv`.
/// Parameters are validated before anything is written; a numerical
/// failure keeps the artifacts produced so far.
pub fn run_scenario(cfg: &ScenarioConfig, out_dir: &Path) -> Res<RunSummary> {
    let plan = Plan::read(cfg)?;
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let mut out = Out {
        dir: out_dir,
        summary: RunSummary::new(cfg.scenario.name()),
    };
    match plan {
        Plan::Flow(p) => flow(&p, &mut out)?,
        Plan::Lich(p) => lichnerowicz(&p, &mut out)?,
        Plan::Riccati(p) => riccati(&p, &mut out)?,
        Plan::Bolza(p) => bolza(&p, &mut out)?,
        Plan::Limit(p) => limit(&p, &mut out)?,
        Plan::Graph(p) => graph(&p, &mut out)?,
    }
    let csv = out.summary.to_csv();
    out.write("summary.csv", &csv)?;
    Ok(out.summary)
}

enum Plan {
    Flow(FlowPlan),
    Lich(LichPlan),
    Riccati(RiccatiPlan),
    Bolza(BolzaPlan),
    Limit(LimitPlan),
    Graph(GraphPlan),
}

impl Plan {
    fn read(cfg: &ScenarioConfig) -> Res<Self> {
        let mut p = cfg.reader();
        let plan = match cfg.scenario {
            Scenario::ConeFlow | Scenario::KasnerFlow => Plan::Flow(FlowPlan::read(cfg.scenario, &mut p)?),
            Scenario::LichnerowiczSweep => Plan::Lich(LichPlan::read(&mut p)?),
            Scenario::Riccati => Plan::Riccati(RiccatiPlan::read(&mut p)?),
            Scenario::BolzaCheck => Plan::Bolza(BolzaPlan::read(&mut p)?),
            Scenario::LimitExperiment => Plan::Limit(LimitPlan::read(&mut p)?),
            Scenario::GraphCheck => Plan::Graph(GraphPlan::read(&mut p)?),
        };
        p.finish()?;
        Ok(plan)
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn dim_in(p: &mut Params, lo: usize, hi: usize, default: usize) -> Res<usize> {
    let n: usize = p.get("dim", default)?;
    if !(lo..=hi).contains(&n) {
        return Err(config_err(format!("dim must be in {lo}..={hi}, got {n}")));
    }
    Ok(n)
}

fn tau_range(p: &mut Params) -> Res<(f64, f64)> {
    let a: f64 = p.get("tau_start", -10.0)?;
    let b: f64 = p.get("tau_end", -0.1)?;
    if !(a < 0.0 && b < 0.0) {
        return Err(config_err(format!("tau range must be negative, got [{a}, {b}]")));
    }
    if a > b {
        return Err(config_err(format!("tau_start {a} must not exceed tau_end {b}")));
    }
    Ok((a, b))
}

// ---------------------------------------------------------------- flows

struct FlowPlan {
    kasner: bool,
    dim: usize,
    volume: f64,
    circle_length: f64,
    tau: (f64, f64),
    steps: usize,
    schedule: Schedule,
    grid_points: usize,
    ham_tol: f64,
    constraint_tol: f64,
    lapse_tol: f64,
    monotonicity_tol: f64,
    richardson_steps: usize,
}

impl FlowPlan {
    fn read(sc: Scenario, p: &mut Params) -> Res<Self> {
        let kasner = sc == Scenario::KasnerFlow;
        let dim = dim_in(p, 2, 4, 3)?;
        let volume = p.positive("volume", GENUS_TWO_AREA)?;
        let circle_length = if kasner { p.positive("circle_length", 1.0)? } else { 1.0 };
        let tau = tau_range(p)?;
        let steps: usize = p.get("steps", 10_000)?;
        if steps == 0 {
            return Err(config_err("steps must be positive"));
        }
        let schedule = match p.get("schedule", "geometric".to_string())?.as_str() {
            "geometric" => Schedule::Geometric,
            "uniform" => Schedule::Uniform,
            other => return Err(config_err(format!("unknown schedule '{other}'"))),
        };
        let grid_points = if kasner { p.get("grid_points", 0)? } else { 0 };
        if grid_points != 0 && grid_points < 3 {
            return Err(config_err("grid_points must be 0 (homogeneous) or at least 3"));
        }
        Ok(Self {
            kasner,
            dim,
            volume,
            circle_length,
            tau,
            steps,
            schedule,
            grid_points,
            ham_tol: p.positive("ham_tol", if kasner { 1e-6 } else { 1e-8 })?,
            constraint_tol: p.positive("constraint_tol", 1e-8)?,
            lapse_tol: p.positive("lapse_tol", 1e-10)?,
            monotonicity_tol: p.positive("monotonicity_tol", 1e-4)?,
            richardson_steps: p.get("richardson_steps", 40)?,
        })
    }

    fn model(&self) -> Res<Model> {
        Ok(if self.kasner {
            Model::Kasner(KasnerModel::new(self.dim, self.volume, self.circle_length)?)
        } else {
            Model::Cone(ConeModel::new(self.dim, self.volume)?)
        })
    }

    fn geometry(&self, model: &Model) -> Res<BlockGeometry> {
        if self.grid_points == 0 {
            return Ok(model.geometry());
        }
        Ok(BlockGeometry::new(
            vec![Block::hyperbolic(self.dim - 1), Block::flat(1)],
            self.volume,
            Some(Grid {
                block: 1,
                points: self.grid_points,
                length: self.circle_length,
            }),
        )?)
    }

    fn run(&self, model: &Model, steps: usize) -> Res<HamTrace> {
        let s0 = model.slice_at(self.tau.0)?.to_flow_state(self.geometry(model)?)?;
        Ok(run_flow_with(&s0, self.tau.1, steps, self.schedule)?)
    }
}

fn flow(p: &FlowPlan, out: &mut Out) -> Res<()> {
    let model = p.model()?;
    let trace = p.run(&model, p.steps)?;
    out.write("ham_trace.csv", &trace.to_csv())?;

    let ham_err = trace
        .records
        .iter()
        .map(|r| Ok((r.ham / ham_closed_form(&model, r.tau)? - 1.0).abs()))
        .collect::<Res<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    out.check(CheckRecord::at_most("ham_closed_form_rel_err", ham_err, p.ham_tol));
    let h0 = trace.records[0].ham;
    let drift = trace.records.iter().map(|r| (r.ham / h0 - 1.0).abs()).fold(0.0, f64::max);
    if !p.kasner {
        out.check(CheckRecord::at_most("ham_rel_drift", drift, p.ham_tol));
    } else {
        let strict = trace.records.windows(2).all(|w| w[1].ham < w[0].ham);
        out.check(CheckRecord::holds("ham_strictly_decreasing", strict));
    }

    let gauss = trace.max_gauss_residual();
    out.check(CheckRecord::at_most("gauss_residual_max", gauss, p.constraint_tol));
    let codazzi = trace.records.iter().map(|r| r.codazzi_residual).fold(0.0, f64::max);
    out.check(CheckRecord::at_most("codazzi_residual_max", codazzi, p.constraint_tol));

    let (mut treibergs, mut bounds) = (0usize, 0usize);
    for e in &trace.events {
        match e {
            MonitorEvent::Treibergs { .. } => treibergs += 1,
            MonitorEvent::LapseBounds { .. } => bounds += 1,
        }
    }
    out.check(CheckRecord::at_most("treibergs_violations", treibergs as f64, 0.0));
    out.check(CheckRecord::at_most("lapse_bound_violations", bounds as f64, 0.0));
    out.check(CheckRecord::at_most("ricci_proxy_ratio", trace.ricci_proxy_ratio(), 1.0));

    let geo = p.geometry(&model)?;
    let lapse_res = [p.tau.0, p.tau.1]
        .iter()
        .map(|t| Ok(lapse_residual(&model.slice_at(*t)?.to_flow_state(geo.clone())?)))
        .collect::<Res<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    out.check(CheckRecord::at_most("lapse_residual", lapse_res, p.lapse_tol));

    if trace.records.len() >= 3 {
        let mono = ham_monotonicity_check(&trace)?;
        let mut t = Table::new(&["tau", "dham_dtau", "rhs"]);
        for (a, b, c) in &mono.samples {
            t.push(vec![*a, *b, *c]);
        }
        out.write("monotonicity.csv", &t.to_csv())?;
        out.check(CheckRecord::at_most("ham_increases", mono.increases.len() as f64, 0.0));
        out.check(CheckRecord::at_most("monotonicity_identity_rel_err", mono.worst, p.monotonicity_tol));
    }

    // step-halving study of the Gauss residual; it vanishes identically
    // for the two-dimensional product, where nothing is left to measure
    let has_residual = !(p.kasner && p.dim == 2);
    if p.richardson_steps > 0 && has_residual {
        let mut t = Table::new(&["steps", "gauss_residual_max"]);
        let mut errs = Vec::new();
        for k in 0..3 {
            let s = p.richardson_steps << k;
            let e = p.run(&model, s)?.max_gauss_residual();
            t.push(vec![s as f64, e]);
            errs.push(e);
        }
        out.write("richardson.csv", &t.to_csv())?;
        out.check(CheckRecord::near("richardson_ratio", errs[1] / errs[2], 16.0, 4.0));
    }
    Ok(())
}

// ---------------------------------------------------------------- lichnerowicz

struct LichPlan {
    dim: usize,
    volume: f64,
    taus: Vec<f64>,
    sigma_sq: Vec<f64>,
    tol: f64,
    grid: Option<(usize, f64)>,
    umbilic_tol: f64,
}

impl LichPlan {
    fn read(p: &mut Params) -> Res<Self> {
        let dim = dim_in(p, 3, 4, 3)?;
        let volume = p.positive("volume", 1.0)?;
        let taus: Vec<f64> = p.list("taus", &[-0.5, -1.0, -2.0, -4.0])?;
        if taus.is_empty() || taus.iter().any(|t| !(*t < 0.0)) {
            return Err(config_err("taus must be negative"));
        }
        let sigma_sq: Vec<f64> = p.list("sigma_sq", &[0.0, 0.25, 1.0, 4.0, 16.0])?;
        if sigma_sq.iter().any(|s| !(*s >= 0.0)) {
            return Err(config_err("sigma_sq must be non-negative"));
        }
        let grid_points: usize = p.get("grid_points", 0)?;
        let grid_length = p.positive("grid_length", 1.0)?;
        Ok(Self {
            dim,
            volume,
            taus,
            sigma_sq,
            tol: p.positive("tol", DEFAULT_TOL)?,
            grid: (grid_points > 0).then_some((grid_points, grid_length)),
            umbilic_tol: p.positive("umbilic_tol", 1e-12)?,
        })
    }
}

fn lichnerowicz(p: &LichPlan, out: &mut Out) -> Res<()> {
    let mut bg = ConformalBackground::new(p.dim, p.volume)?;
    if let Some((m, len)) = p.grid {
        bg = bg.with_grid(m, len)?;
    }
    let table = lichnerowicz_sweep(&bg, &p.taus, &p.sigma_sq, p.tol)?;
    out.write("lichnerowicz_sweep.csv", &table.to_csv())?;

    let (mut umbilic, mut below_umbilic, mut below_bound) = (0.0f64, 0usize, 0usize);
    for r in &table.rows {
        let (tau, s, u_min, u_max, ham, bound) = (r[0], r[1], r[2], r[3], r[4], r[5]);
        let u0 = bg.umbilic_factor(tau);
        if s == 0.0 {
            umbilic = umbilic.max((u_min - u0).abs().max((u_max - u0).abs()) / u0);
        }
        if u_min < u0 * (1.0 - 1e-12) {
            below_umbilic += 1;
        }
        if ham < bound * (1.0 - 1e-12) {
            below_bound += 1;
        }
    }
    if p.sigma_sq.contains(&0.0) {
        out.check(CheckRecord::at_most("umbilic_factor_rel_err", umbilic, p.umbilic_tol));
    }
    out.check(CheckRecord::at_most("rows_below_umbilic_factor", below_umbilic as f64, 0.0));
    out.check(CheckRecord::at_most("rows_below_nn_volume", below_bound as f64, 0.0));
    let hams = table.column("ham").unwrap_or_default();
    let sigma = sigma_report(&hams, p.dim)?;
    let n = p.dim as f64;
    // Ham >= n^n Vol makes the estimate at most -(n-1)/n (n^n Vol)^(2/n)
    let cap = -(n - 1.0) / n * (n.powf(n) * p.volume).powf(2.0 / n);
    out.check(CheckRecord::at_most("sigma_estimate_minus_cap", sigma - cap, 1e-12 * cap.abs()));
    Ok(())
}

// ---------------------------------------------------------------- riccati

struct RiccatiPlan {
    dim: usize,
    samples: usize,
    seed: u64,
    steps: usize,
    tol: f64,
    semigroup_tol: f64,
}

impl RiccatiPlan {
    fn read(p: &mut Params) -> Res<Self> {
        let plan = Self {
            dim: dim_in(p, 1, 4, 3)?,
            samples: p.get("samples", 20)?,
            seed: p.get("seed", 7)?,
            steps: p.get("steps", 2000)?,
            tol: p.positive("tol", 1e-8)?,
            semigroup_tol: p.positive("semigroup_tol", 1e-10)?,
        };
        if plan.samples == 0 || plan.steps == 0 {
            return Err(config_err("samples and steps must be positive"));
        }
        Ok(plan)
    }
}

/// Random symmetric matrix with eigenvalues in `[-2, -0.2]`.
pub fn random_negative_definite(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let q = a.qr().q();
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |_, _| rng.gen_range(-2.0..-0.2)));
    let k = &q * d * q.transpose();
    (&k + k.transpose()) * 0.5
}

fn riccati(p: &RiccatiPlan, out: &mut Out) -> Res<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut t = Table::new(&["sample", "t", "focal_min", "closed_vs_rk4", "semigroup"]);
    let (mut worst, mut worst_sg) = (0.0f64, 0.0f64);
    for i in 0..p.samples {
        let k0 = random_negative_definite(&mut rng, p.dim);
        let st = RiccatiState::new(k0.clone(), 0.0)?;
        let (lo, _) = st.focal_window();
        // stay clear of the focal time behind us
        let time = rng.gen_range(0.5 * lo..1.0);
        let closed = riccati_propagate(&st, time)?;
        let numeric = riccati_integrate(&k0, time, p.steps);
        let err = (&closed - &numeric).amax() / closed.amax().max(1.0);
        let (t1, t2) = (0.5 * time, 0.5 * time);
        let mid = RiccatiState::new(riccati_propagate(&st, t1)?, t1)?;
        let sg = (riccati_propagate(&mid, t2)? - &closed).amax() / closed.amax().max(1.0);
        let focal = focal_times(&st).into_iter().fold(f64::INFINITY, f64::min);
        t.push(vec![i as f64, time, focal, err, sg]);
        worst = worst.max(err);
        worst_sg = worst_sg.max(sg);
    }
    out.write("riccati.csv", &t.to_csv())?;
    out.check(CheckRecord::at_most("closed_form_vs_rk4", worst, p.tol));
    out.check(CheckRecord::at_most("semigroup_defect", worst_sg, p.semigroup_tol));
    Ok(())
}

// ---------------------------------------------------------------- bolza

struct BolzaPlan {
    area_points: usize,
    words: usize,
    word_length: usize,
    seed: u64,
    tol: f64,
    area_tol: f64,
}

impl BolzaPlan {
    fn read(p: &mut Params) -> Res<Self> {
        let plan = Self {
            area_points: p.get("area_points", 24)?,
            words: p.get("words", 50)?,
            word_length: p.get("word_length", 10)?,
            seed: p.get("seed", 11)?,
            tol: p.positive("tol", 1e-9)?,
            area_tol: p.positive("area_tol", 1e-3)?,
        };
        if plan.area_points == 0 {
            return Err(config_err("area_points must be positive"));
        }
        Ok(plan)
    }
}

fn random_word(rng: &mut impl Rng, len: usize, gens: i32) -> Vec<i32> {
    (0..len)
        .map(|_| {
            let g = rng.gen_range(1..=gens);
            if rng.gen_bool(0.5) {
                g
            } else {
                -g
            }
        })
        .collect()
}

fn bolza(p: &BolzaPlan, out: &mut Out) -> Res<()> {
    let pres = bolza_generators();
    let oct = BolzaOctagon::new();
    let mut t = Table::new(&["generator", "trace", "lorentz_defect"]);
    for (i, g) in pres.generators.iter().enumerate() {
        t.push(vec![(i + 1) as f64, g.entries().trace(), g.defect()]);
    }
    out.write("bolza_generators.csv", &t.to_csv())?;

    out.check(CheckRecord::at_most("relator_residual", pres.relator_residual()?, p.tol));
    out.check(CheckRecord::near("octagon_area", oct.area(p.area_points), 4.0 * PI, p.area_tol));

    // cocycle rule t_{ab} = t_a + f(a) t_b on random words
    let basis = cohomology_basis(&pres)?;
    let coc = basis
        .iter()
        .fold(Cocycle::zero(&pres), |acc, c| add_cocycles(&acc, c));
    let rep = HolonomyRep::new(pres.clone(), coc)?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let gens = pres.generator_count() as i32;
    let mut w = Table::new(&["sample", "length_a", "length_b", "cocycle_rule_err"]);
    let mut worst = 0.0f64;
    for i in 0..p.words {
        let a = random_word(&mut rng, p.word_length, gens);
        let b = random_word(&mut rng, p.word_length, gens);
        let ab: Vec<i32> = a.iter().chain(&b).copied().collect();
        let lhs = extend_cocycle(&rep, &ab)?;
        let (ta, fa, tb) = (extend_cocycle(&rep, &a)?, evaluate_word(&pres, &a)?, extend_cocycle(&rep, &b)?);
        let rhs = ta.add(&fa.apply(&tb)?)?;
        // relative to the size of the terms, which grow exponentially
        let scale = ta.max_abs() + fa.entries().amax() * tb.max_abs();
        let err = lhs.sub(&rhs)?.max_abs() / scale.max(1.0);
        worst = worst.max(err);
        w.push(vec![i as f64, a.len() as f64, b.len() as f64, err]);
    }
    out.write("bolza_words.csv", &w.to_csv())?;
    out.check(CheckRecord::at_most("cocycle_rule", worst, p.tol));
    out.check(CheckRecord::at_most("cocycle_relator_residual", rep.cocycle_residual()?, p.tol));

    let b = MinkVector::new(vec![0.3, -0.2, 0.5])?;
    let cob = HolonomyRep::new(pres.clone(), coboundary_cocycle(&pres, &b)?)?;
    out.check(CheckRecord::at_most("coboundary_relator_residual", cob.cocycle_residual()?, p.tol));

    let hyp = Hyperboloid { dim: 2, s: 1.0 };
    let mut eq = 0.0f64;
    for g in &pres.generators {
        let iso = MinkIsometry::linear(g.clone());
        for x in [[0.1, 0.2], [-0.5, 0.3], [0.0, 0.0]] {
            eq = eq.max(gauss_map_equivariance(&hyp, &iso, &x)?);
        }
    }
    out.check(CheckRecord::at_most("gauss_map_equivariance", eq, p.tol));
    Ok(())
}

fn add_cocycles(a: &Cocycle, b: &Cocycle) -> Cocycle {
    Cocycle {
        generator_translations: a
            .generator_translations
            .iter()
            .zip(&b.generator_translations)
            .map(|(x, y)| x.add(y).expect("same dimension"))
            .collect(),
    }
}

// ---------------------------------------------------------------- limit

struct LimitPlan {
    lambdas: Vec<f64>,
    basis_index: usize,
    amplitude: f64,
    coboundary: Vec<f64>,
    coboundary_tol: f64,
    cfg: LimitConfig,
}

impl LimitPlan {
    fn read(p: &mut Params) -> Res<Self> {
        let lambdas: Vec<f64> = p.list("lambdas", &[1.0, 2.0, 4.0, 8.0])?;
        if lambdas.is_empty() || lambdas.iter().any(|l| !(*l > 0.0)) {
            return Err(config_err("lambdas must be positive"));
        }
        let basis_index: usize = p.get("cocycle_index", 0)?;
        if basis_index >= 6 {
            return Err(config_err("cocycle_index must be below 6 (dimension of the cohomology)"));
        }
        let coboundary: Vec<f64> = p.list("coboundary", &[0.01, 0.005, -0.005])?;
        if coboundary.len() != 3 {
            return Err(config_err("coboundary needs three components"));
        }
        let d = LimitConfig::default();
        let cfg = LimitConfig {
            spacing: p.positive("spacing", d.spacing)?,
            band: p.get("band", d.band)?,
            bump_radius: p.positive("bump_radius", d.bump_radius)?,
            tol: p.positive("tol", d.tol)?,
            max_sweeps: p.get("max_sweeps", d.max_sweeps)?,
            omega: p.positive("omega", d.omega)?,
            quadrature: (p.get("quadrature_angular", d.quadrature.0)?, p.get("quadrature_radial", d.quadrature.1)?),
        };
        if !(cfg.omega < 2.0) {
            return Err(config_err("omega must lie in (0, 2)"));
        }
        Ok(Self {
            lambdas,
            basis_index,
            amplitude: p.positive("amplitude", 0.1)?,
            coboundary,
            coboundary_tol: p.positive("coboundary_tol", 1e-4)?,
            cfg,
        })
    }
}

fn limit(p: &LimitPlan, out: &mut Out) -> Res<()> {
    let pres = bolza_generators();
    let coc = cohomology_basis(&pres)?[p.basis_index].scale(p.amplitude);
    let rows = limit_experiment(&HolonomyRep::new(pres.clone(), coc)?, &p.lambdas, &p.cfg)?;
    out.write("limit.csv", &limit_table(&rows).to_csv())?;
    let b = MinkVector::new(p.coboundary.clone())?;
    let cob_rows = limit_experiment(
        &HolonomyRep::new(pres.clone(), coboundary_cocycle(&pres, &b)?)?,
        &p.lambdas,
        &p.cfg,
    )?;
    out.write("limit_coboundary.csv", &limit_table(&cob_rows).to_csv())?;

    let converged = |r: &[LimitRow]| r.iter().filter(|x| !x.converged).count() as f64;
    out.check(CheckRecord::at_most("unconverged_rows", converged(&rows), 0.0));
    out.check(CheckRecord::at_most("unconverged_coboundary_rows", converged(&cob_rows), 0.0));
    let dev: Vec<f64> = rows.iter().map(|r| (r.ham_ratio - 1.0).abs()).collect();
    let decreasing = dev.windows(2).all(|w| w[1] < w[0]);
    out.check(CheckRecord::holds("deviation_strictly_decreasing", decreasing));
    let last = dev.last().copied().unwrap_or(f64::NAN);
    out.check(CheckRecord::at_most("final_deviation", last, dev[0]));
    let cob = cob_rows.iter().map(|r| (r.ham_ratio - 1.0).abs()).fold(0.0, f64::max);
    out.check(CheckRecord::at_most(
        "coboundary_deviation",
        if cob_rows.iter().all(|r| r.converged) { cob } else { f64::NAN },
        p.coboundary_tol,
    ));
    Ok(())
}

// ---------------------------------------------------------------- graphs

struct GraphPlan {
    dim: usize,
    s: f64,
    half: f64,
    points: Vec<usize>,
    order_tol: f64,
    energy_half: f64,
    energy_points: usize,
    energy_tol: f64,
}

impl GraphPlan {
    fn read(p: &mut Params) -> Res<Self> {
        let plan = Self {
            dim: dim_in(p, 2, 3, 2)?,
            s: p.positive("s", 1.0)?,
            half: p.positive("half", 1.0)?,
            points: p.list("points", &[21, 41, 81])?,
            order_tol: p.positive("order_tol", 0.2)?,
            energy_half: p.positive("energy_half", 6.0)?,
            energy_points: p.get("energy_points", 601)?,
            energy_tol: p.positive("energy_tol", 1e-3)?,
        };
        if plan.points.len() < 2 || plan.points.iter().any(|m| *m < 5) {
            return Err(config_err("points needs at least two grids of 5 or more nodes"));
        }
        if plan.energy_points < 5 {
            return Err(config_err("energy_points must be at least 5"));
        }
        Ok(plan)
    }
}

fn graph(p: &GraphPlan, out: &mut Out) -> Res<()> {
    let hyp = Hyperboloid { dim: p.dim, s: p.s };
    let exact = -(p.dim as f64) / p.s;
    let mut t = Table::new(&["points", "spacing", "h_error"]);
    let mut errs = Vec::new();
    let mut det_err = 0.0f64;
    let mut convex = true;
    for &m in &p.points {
        let f = hyp.sample(p.half, m)?;
        let g = graph_geometry(&f)?;
        let (lo, hi) = mean_curvature_spread(&g);
        let e = (lo - exact).abs().max((hi - exact).abs());
        t.push(vec![m as f64, f.spacing, e]);
        errs.push(e);
        for k in 0..g.len() {
            let w = g.volume_density[k];
            det_err = det_err.max((g.induced_metric(k).determinant() - w * w).abs());
        }
        convex &= convexity_check(&g).class == Definiteness::NegativeDefinite;
        if m == p.points[0] {
            out.write("height_field.csv", &f.to_csv())?;
        }
    }
    out.write("graph_convergence.csv", &t.to_csv())?;
    for (i, w) in errs.windows(2).enumerate() {
        let ratio = (p.points[i + 1] - 1) as f64 / (p.points[i] - 1) as f64;
        let order = (w[0] / w[1]).ln() / ratio.ln();
        out.check(CheckRecord::near(&format!("h_order_{}", i + 1), order, 2.0, p.order_tol));
    }
    out.check(CheckRecord::at_most("volume_element_identity", det_err, 1e-12));
    out.check(CheckRecord::holds("hyperboloid_negative_definite", convex));

    if p.dim == 2 {
        let f = hyp.sample(p.energy_half, p.energy_points)?;
        let q = quotient_energy(&f, &DomainFilter::Octagon(BolzaOctagon::new()))?;
        let chi = -2.0;
        let rhs = 4.0 * PI * chi + q.tau_mean * q.tau_mean * q.volume;
        let mut e = Table::new(&["energy", "volume", "tau_mean", "identity_rhs"]);
        e.push(vec![q.energy, q.volume, q.tau_mean, rhs]);
        out.write("graph_energy.csv", &e.to_csv())?;
        out.check(CheckRecord::near("energy_identity", q.energy - rhs, 0.0, p.energy_tol));
        if p.s == 1.0 {
            out.check(CheckRecord::near("energy_umbilic", q.energy, 8.0 * PI, p.energy_tol));
        }
    }
    Ok(())
}
