use gaussify::distill::{ideal_step, iterate, IterateOptions, Trajectory};
use gaussify::gaussian::{
    b_matrix, covariance_from_fock, es_db, gaussian_log_negativity, predict_limit, pure_convergence_check,
    squeezing_es, squeezing_ets, LimitPrediction,
};
use gaussify::measures::{log_negativity, von_neumann_entropy, wigner_single_mode, WignerGrid, WignerSpec};
use gaussify::FockOperator;
use rayon::prelude::*;

use crate::config::ProtocolConfig;
use crate::error::CliError;
use crate::table::{Cell, Table};

/// A finished command. `unphysical` asks the caller to exit with the
/// unphysical-limit code after writing the table.
#[derive(Debug)]
pub struct Output {
    pub table: Table,
    pub unphysical: bool,
}

pub const SEED_COLUMNS: [&str; 12] = [
    "s1010_re", "s1010_im", "s0101_re", "s0101_im", "s1001_re", "s1001_im", "s2000_re", "s2000_im", "s0200_re",
    "s0200_im", "s1100_re", "s1100_im",
];

pub fn run_columns() -> Vec<&'static str> {
    let mut c = vec![
        "step",
        "success_prob",
        "cumulative_prob",
        "E_N[bits]",
        "S_vN[bits]",
        "E_S[nats]",
        "E_S[2E_S/ln10]",
        "E_TS[nats]",
        "boundary_weight",
    ];
    c.extend(SEED_COLUMNS);
    c.push("limit_E_N[bits]");
    c
}

fn trajectory(cfg: &ProtocolConfig, rho0: &FockOperator, steps: usize) -> Result<Trajectory, CliError> {
    let opts = IterateOptions {
        steps,
        eta: cfg.eta,
        kernel: cfg.kernel,
        p_min: cfg.p_min,
    };
    Ok(iterate(rho0, &opts)?.into_result(cfg.p_min)?)
}

enum Limit {
    Physical(LimitPrediction),
    Unphysical(LimitPrediction),
    /// Singular `B` or vanishing vacuum coefficient.
    None,
}

impl Limit {
    fn log_negativity(&self) -> Result<f64, CliError> {
        Ok(match self {
            Limit::Physical(p) => gaussian_log_negativity(&p.gamma)?,
            _ => f64::NAN,
        })
    }
}

/// Limit of ideal iteration from `rho1`, the once-iterated state.
fn limit_from(rho1: &FockOperator) -> Result<Limit, CliError> {
    let p = rho1.trace().re;
    if !(p > 0.0) {
        return Ok(Limit::None);
    }
    match predict_limit(&rho1.scaled(1.0 / p)) {
        Ok(pred) if pred.physical => Ok(Limit::Physical(pred)),
        Ok(pred) => Ok(Limit::Unphysical(pred)),
        Err(gaussify::Error::SingularB { .. } | gaussify::Error::VanishingVacuum { .. }) => Ok(Limit::None),
        Err(e) => Err(e.into()),
    }
}

/// Limit predicted for each state of a trajectory. With ideal detectors the
/// next state already is the once-iterated one.
fn limits(cfg: &ProtocolConfig, traj: &Trajectory) -> Result<Vec<Limit>, CliError> {
    (0..traj.states.len())
        .map(|i| match traj.states.get(i + 1) {
            Some(next) if cfg.eta == 1.0 => limit_from(next),
            _ => limit_from(&ideal_step(&traj.states[i])?),
        })
        .collect()
}

fn nan_unless(on: bool, f: impl FnOnce() -> Result<f64, CliError>) -> Result<f64, CliError> {
    if on {
        f()
    } else {
        Ok(f64::NAN)
    }
}

pub fn cmd_run(cfg: &ProtocolConfig) -> Result<Output, CliError> {
    cfg.validate()?;
    let rho0 = cfg.initial_state()?;
    let traj = trajectory(cfg, &rho0, cfg.steps)?;
    let limits = limits(cfg, &traj)?;
    let mut table = Table::new(&run_columns());
    let mut unphysical = false;
    for ((rec, rho), limit) in traj.records.iter().zip(&traj.states).zip(&limits) {
        let en = nan_unless(cfg.measure_negativity, || Ok(log_negativity(rho)?))?;
        let s = nan_unless(cfg.measure_entropy, || Ok(von_neumann_entropy(rho)?))?;
        let (es, ets) = if cfg.measure_squeezing {
            let gamma = covariance_from_fock(rho)?;
            (squeezing_es(&gamma), squeezing_ets(&gamma)?)
        } else {
            (f64::NAN, f64::NAN)
        };
        let mut row: Vec<Cell> = vec![
            rec.step.into(),
            rec.probability.into(),
            rec.cumulative.into(),
            en.into(),
            s.into(),
            es.into(),
            es_db(es).into(),
            ets.into(),
            rec.boundary_weight.into(),
        ];
        match &rec.seeds {
            Some(seeds) => {
                for z in seeds.as_array() {
                    row.push(z.re.into());
                    row.push(z.im.into());
                }
            }
            None => row.extend((0..12).map(|_| Cell::Float(f64::NAN))),
        }
        unphysical |= matches!(limit, Limit::Unphysical(_));
        row.push(limit.log_negativity()?.into());
        table.push(row);
    }
    Ok(Output { table, unphysical })
}

pub fn cmd_sweep(cfg: &ProtocolConfig) -> Result<Output, CliError> {
    cfg.validate()?;
    let axis = cfg.validate_sweep()?;
    let columns = [
        axis.name(),
        "step",
        "success_prob",
        "cumulative_prob",
        "E_N_initial[bits]",
        "E_N[bits]",
        "limit_E_N[bits]",
    ];
    // Rows come back in axis order whatever order the points finish in.
    let points: Vec<(Vec<Vec<Cell>>, bool)> = cfg
        .sweep_values()
        .into_par_iter()
        .map(|value| sweep_point(&cfg.with_axis(axis, value), value))
        .collect::<Result<_, _>>()?;
    let mut table = Table::new(&columns);
    let mut unphysical = false;
    for (rows, bad) in points {
        unphysical |= bad;
        for row in rows {
            table.push(row);
        }
    }
    Ok(Output { table, unphysical })
}

fn sweep_point(cfg: &ProtocolConfig, value: f64) -> Result<(Vec<Vec<Cell>>, bool), CliError> {
    cfg.validate()?;
    let rho0 = cfg.initial_state()?;
    let traj = trajectory(cfg, &rho0, cfg.steps)?;
    let limit = match traj.states.get(1) {
        Some(next) if cfg.eta == 1.0 => limit_from(next)?,
        _ => limit_from(&ideal_step(&rho0)?)?,
    };
    let en = |rho: &FockOperator| nan_unless(cfg.measure_negativity, || Ok(log_negativity(rho)?));
    let en0 = en(&rho0)?;
    let en_limit = limit.log_negativity()?;
    let rows = traj
        .records
        .iter()
        .zip(&traj.states)
        .map(|(rec, rho)| {
            Ok(vec![
                value.into(),
                rec.step.into(),
                rec.probability.into(),
                rec.cumulative.into(),
                en0.into(),
                en(rho)?.into(),
                en_limit.into(),
            ])
        })
        .collect::<Result<_, CliError>>()?;
    Ok((rows, matches!(limit, Limit::Unphysical(_))))
}

/// Reduced-state Wigner grids for each requested iterate, in request order.
pub fn wigner_grids(cfg: &ProtocolConfig) -> Result<Vec<(usize, WignerGrid)>, CliError> {
    cfg.validate()?;
    if cfg.wigner_mode > 1 {
        return Err(CliError::Config(format!(
            "wigner.mode {} is not 0 or 1",
            cfg.wigner_mode
        )));
    }
    if cfg.wigner_steps.is_empty() {
        return Err(CliError::Config("wigner.steps is empty".into()));
    }
    let spec = WignerSpec::square(cfg.wigner_half_width, cfg.wigner_points);
    let rho0 = cfg.initial_state()?;
    let max_step = cfg.wigner_steps.iter().copied().max().unwrap_or(0);
    let traj = trajectory(cfg, &rho0, max_step)?;
    cfg.wigner_steps
        .iter()
        .map(|&k| {
            let reduced = traj.states[k].partial_trace(cfg.wigner_mode)?;
            let grid = wigner_single_mode(&reduced, &spec)?;
            let (kq, kp) = grid.excess_kurtosis();
            log::info!(
                "step {k}: integral {:.6}, min {:.3e}, negative region {}, excess kurtosis ({kq:.3e}, {kp:.3e})",
                grid.integral(),
                grid.min(),
                grid.has_negative_region(),
            );
            Ok((k, grid))
        })
        .collect()
}

pub fn cmd_wigner(cfg: &ProtocolConfig) -> Result<Output, CliError> {
    let grids = wigner_grids(cfg)?;
    let mut table = Table::new(&["step", "q", "p", "W"]);
    for (k, grid) in &grids {
        for (q, p, w) in grid.samples() {
            table.push(vec![(*k).into(), q.into(), p.into(), w.into()]);
        }
    }
    Ok(Output {
        table,
        unphysical: false,
    })
}

pub fn predict_columns() -> Vec<String> {
    let mut c = Vec::new();
    for prefix in ["b", "gamma"] {
        for i in 0..4 {
            for j in 0..4 {
                c.push(format!("{prefix}_{i}{j}"));
            }
        }
    }
    c.extend(["det_b", "cond_b", "nu_1", "nu_2"].map(String::from));
    c.extend(
        [
            "limit_E_N[bits]",
            "limit_E_S[nats]",
            "physical",
            "convergent",
            "pure",
            "verdict",
            "residual_1",
            "residual_2",
            "residual_3",
            "pure_norm",
        ]
        .map(String::from),
    );
    c
}

pub fn cmd_predict(cfg: &ProtocolConfig) -> Result<Output, CliError> {
    cfg.validate()?;
    let rho0 = cfg.initial_state()?;
    let rho1 = ideal_step(&rho0)?;
    let limit = limit_from(&rho1)?;
    let pure = pure_convergence_check(&rho0)?;
    let nan16 = || vec![Cell::Float(f64::NAN); 16];
    let flat = |m: &gaussify::nalgebra::DMatrix<f64>| -> Vec<Cell> {
        (0..16).map(|k| Cell::Float(m[(k / 4, k % 4)])).collect()
    };
    let mut row = Vec::new();
    let p = rho1.trace().re;
    match b_matrix(&rho1.scaled(1.0 / p.max(f64::MIN_POSITIVE))) {
        Ok(b) => row.extend(flat(b.matrix())),
        Err(_) => row.extend(nan16()),
    }
    let (verdict, convergent) = match &limit {
        Limit::Physical(pred) | Limit::Unphysical(pred) => {
            row.extend(flat(pred.gamma.matrix()));
            row.push(pred.det.into());
            row.push(pred.condition.into());
            row.extend(pred.symplectic_eigenvalues.iter().map(|&x| Cell::Float(x)));
            match limit {
                Limit::Physical(_) if pure.holds => ("pure-convergent", true),
                Limit::Physical(_) => ("convergent", true),
                _ => ("unphysical", false),
            }
        }
        Limit::None => {
            row.extend(nan16());
            row.extend((0..4).map(|_| Cell::Float(f64::NAN)));
            ("non-convergent", false)
        }
    };
    let limit_es = match &limit {
        Limit::Physical(pred) => squeezing_es(&pred.gamma),
        _ => f64::NAN,
    };
    row.push(limit.log_negativity()?.into());
    row.push(limit_es.into());
    row.push(matches!(limit, Limit::Physical(_)).into());
    row.push(convergent.into());
    row.push(pure.holds.into());
    row.push(verdict.into());
    row.extend(pure.residuals.iter().map(|&r| Cell::Float(r)));
    row.push(pure.norm.into());
    let columns = predict_columns();
    let mut table = Table::new(&columns.iter().map(String::as_str).collect::<Vec<_>>());
    table.push(row);
    Ok(Output {
        table,
        unphysical: matches!(limit, Limit::Unphysical(_)),
    })
}
