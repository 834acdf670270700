use fibertractor::equilibria::{
    binding_distance_curve, find_equilibria, scan_stability_region, tractor_cutoff, CellStatus,
    ScanSettings, TwoBeadSystem,
};
use fibertractor::paraxial::{estimate_coupling, guided_modes, profile_cut, to_scatter_params};
use fibertractor::{
    build_four_port, build_two_port, chain_forces, closed_form_4p, solve_chain, ChainConfig, Error,
    ScatterMatrix, SimpleFourPortParams,
};
use rayon::prelude::*;
use serde_json::json;

use crate::config::{check_axis, distance_range, BeadModel, CouplingOutput, RunConfig};
use crate::output::{Cell, Table};
use crate::CliError;

fn numerical(context: String) -> impl FnOnce(Error) -> CliError {
    move |e| match e {
        Error::Domain(_) => CliError::Validation(format!("{context}: {e}")),
        _ => CliError::Numerical(format!("{context}: {e}")),
    }
}

fn single_force(bead: ScatterMatrix, cfg: &RunConfig, ratio: f64) -> Result<f64, CliError> {
    let modes = cfg.mode_pair_with_ratio(ratio, "force_single.k2_ratios")?;
    let inj = cfg.injection()?;
    let chain = ChainConfig::single(bead, modes).map_err(numerical("force_single".into()))?;
    let fields = solve_chain(&chain, &inj).map_err(numerical("force_single".into()))?;
    Ok(chain_forces(&fields, &modes, &inj).forces[0])
}

pub fn force_single(cfg: &RunConfig) -> Result<Table, CliError> {
    let c = &cfg.force_single;
    check_axis(&c.sweep, "force_single.sweep", 0.0, 1.0)?;
    if c.k2_ratios.is_empty() {
        return Err(CliError::Validation(
            "force_single.k2_ratios: at least one ratio is required".into(),
        ));
    }
    let inj = cfg.injection()?;
    let param = match c.model {
        BeadModel::TwoPort => "t",
        BeadModel::FourPort => "r12",
    };
    let mut table = Table::new(&["k2_ratio", param, "force", "closed_form"]);
    for &ratio in &c.k2_ratios {
        let modes = cfg.mode_pair_with_ratio(ratio, "force_single.k2_ratios")?;
        if c.model == BeadModel::FourPort {
            let threshold = c.t12 * ((modes.k1 - modes.k2) / (modes.k1 + modes.k2)).sqrt();
            table.note(
                &format!("r12_threshold[k2_ratio={ratio}]"),
                json!(threshold),
            );
        }
        for v in c.sweep.values() {
            let params = match c.model {
                BeadModel::TwoPort => {
                    let bead =
                        build_two_port(v, c.phi).map_err(numerical("force_single.sweep".into()))?;
                    let t12 = ((1.0 - v) * (1.0 + v)).max(0.0).sqrt();
                    let p = SimpleFourPortParams::new(t12, 0.0, c.phi)
                        .map_err(numerical("force_single".into()))?;
                    Some((bead, p))
                }
                BeadModel::FourPort => match SimpleFourPortParams::new(c.t12, v, c.phi) {
                    Ok(p) => Some((
                        build_four_port(&p).map_err(numerical("force_single".into()))?,
                        p,
                    )),
                    Err(_) => None,
                },
            };
            match params {
                Some((bead, p)) => {
                    let f = single_force(bead, cfg, ratio)?;
                    let closed = closed_form_4p(&p, inj.a1, inj.a2, &modes)
                        .map_err(numerical("force_single".into()))?
                        / inj.power();
                    table.push(vec![ratio.into(), v.into(), f.into(), closed.into()]);
                }
                // t12² + r12² > 1
                None => table.push(vec![ratio.into(), v.into(), Cell::Empty, Cell::Empty]),
            }
        }
    }
    Ok(table)
}

pub fn force_chain(cfg: &RunConfig) -> Result<Table, CliError> {
    let c = &cfg.force_chain;
    let modes = cfg.mode_pair()?;
    let inj = cfg.injection()?;
    let params = c.bead.params("force_chain.bead")?;
    if c.count == 0 {
        return Err(CliError::Validation(
            "force_chain.count: at least one bead is required".into(),
        ));
    }
    check_axis(&c.spacing, "force_chain.spacing", 0.0, f64::INFINITY)?;
    let mut columns: Vec<String> = vec!["d".into()];
    columns.extend((1..=c.count).map(|j| format!("f{j}")));
    columns.extend(["sum".into(), "flux_balance".into()]);
    let bead = build_four_port(&params).map_err(numerical("force_chain.bead".into()))?;

    let rows: Vec<Vec<Cell>> = c
        .spacing
        .values()
        .par_iter()
        .map(|&d| {
            let chain = ChainConfig::new(vec![bead; c.count], vec![d; c.count - 1], modes)
                .map_err(numerical(format!("force_chain row d={d}")))?;
            let fields =
                solve_chain(&chain, &inj).map_err(numerical(format!("force_chain row d={d}")))?;
            let res = chain_forces(&fields, &modes, &inj);
            let mut row: Vec<Cell> = vec![d.into()];
            row.extend(res.forces.iter().map(|&f| Cell::from(f)));
            row.push(res.sum().into());
            row.push(res.total_flux_balance.into());
            Ok(row)
        })
        .collect::<Result<_, CliError>>()?;
    Ok(Table {
        columns,
        rows,
        notes: Vec::new(),
    })
}

pub fn equilibria(cfg: &RunConfig) -> Result<Table, CliError> {
    let c = &cfg.equilibria;
    let modes = cfg.mode_pair()?;
    let inj = cfg.injection()?;
    let params = c.bead.params("equilibria.bead")?;
    let range = distance_range(&c.range, &modes, "equilibria.range")?;
    if matches!(c.samples, Some(n) if n < 2) {
        return Err(CliError::Validation(
            "equilibria.samples: at least two samples are required".into(),
        ));
    }
    let system =
        TwoBeadSystem::identical(&params, modes, inj).map_err(numerical("equilibria".into()))?;
    let points =
        find_equilibria(&system, range, c.samples).map_err(numerical("equilibria".into()))?;
    let mut table = Table::new(&[
        "d_star",
        "f_common",
        "stable",
        "stable_tractor",
        "df1_dd",
        "df2_dd",
    ]);
    table.note("range", json!([range.start, range.end]));
    for p in points {
        table.push(vec![
            p.d_star.into(),
            p.f_common.into(),
            p.stable.into(),
            p.is_stable_tractor().into(),
            p.df1_dd.into(),
            p.df2_dd.into(),
        ]);
    }
    Ok(table)
}

pub fn binding_curve(cfg: &RunConfig) -> Result<Table, CliError> {
    let c = &cfg.binding_curve;
    let inj = cfg.injection()?;
    check_axis(&c.t, "binding_curve.t", 0.0, 1.0)?;
    if !(c.cutoff_tolerance > 0.0) {
        return Err(CliError::Validation(
            "binding_curve.cutoff_tolerance: must be positive".into(),
        ));
    }
    let mut table = Table::new(&["k2_ratio", "t", "d_star"]);
    let t_values = c.t.values();
    for &ratio in &c.k2_ratios {
        let modes = cfg.mode_pair_with_ratio(ratio, "binding_curve.k2_ratios")?;
        let rows = binding_distance_curve(&t_values, c.phi, modes, inj, None)
            .map_err(numerical(format!("binding_curve k2_ratio={ratio}")))?;
        for row in rows {
            if row.distances.is_empty() {
                table.push(vec![ratio.into(), row.t.into(), Cell::Empty]);
            }
            for d in row.distances {
                table.push(vec![ratio.into(), row.t.into(), d.into()]);
            }
        }
        if c.cutoff {
            let cut = tractor_cutoff(
                c.phi,
                modes,
                inj,
                None,
                (c.t.min, c.t.max),
                c.cutoff_tolerance,
            )
            .map_err(numerical(format!("binding_curve cutoff k2_ratio={ratio}")))?;
            table.note(&format!("cutoff[k2_ratio={ratio}]"), json!(cut));
        }
    }
    Ok(table)
}

pub fn stability_map(cfg: &RunConfig) -> Result<Table, CliError> {
    let c = &cfg.stability_map;
    let modes = cfg.mode_pair()?;
    let inj = cfg.injection()?;
    check_axis(&c.t12, "stability_map.t12", 0.0, 1.0)?;
    check_axis(&c.r12, "stability_map.r12", 0.0, 1.0)?;
    let range = distance_range(&c.range, &modes, "stability_map.range")?;
    let settings = ScanSettings {
        modes,
        injection: inj,
        phi: c.phi,
        range,
        samples: c.samples,
    };
    let map = scan_stability_region(c.t12, c.r12, &settings);
    let contour = map.zero_contour();
    let mut table = Table::new(&["r12", "t12", "status", "min_force", "contour_t12"]);
    table.note("range", json!([range.start, range.end]));
    let n = map.t12.len();
    for (i, cell) in map.cells.iter().enumerate() {
        let (row, col) = (i / n, i % n);
        let (status, min_force) = match cell.status {
            CellStatus::Infeasible => ("infeasible", None),
            CellStatus::NoStable => ("no-stable", None),
            CellStatus::Stable { min_force } => ("stable", Some(min_force)),
            CellStatus::Failed => ("failed", None),
        };
        let crossing = contour
            .iter()
            .find(|p| p.row == row && p.col == col)
            .map(|p| p.t12);
        table.push(vec![
            cell.r12.into(),
            cell.t12.into(),
            status.into(),
            min_force.into(),
            crossing.into(),
        ]);
    }
    Ok(table)
}

pub fn estimate(cfg: &RunConfig) -> Result<Table, CliError> {
    let c = &cfg.estimate_coupling;
    let spec = c.waveguide()?;
    let set = guided_modes(&spec).map_err(numerical("estimate_coupling".into()))?;
    match c.output {
        CouplingOutput::Profile => {
            let bead = c.bead(
                c.profile_diameter,
                &spec,
                "estimate_coupling.profile_diameter",
            )?;
            let input = set
                .index_of(c.profile_mode.0, c.profile_mode.1)
                .ok_or_else(|| {
                    CliError::Validation(
                        "estimate_coupling.profile_mode: not among the retained modes".into(),
                    )
                })?;
            let y = c.profile_y.unwrap_or(bead.center.1);
            let cut = profile_cut(&bead, &spec, &set, input, y, c.profile_samples)
                .map_err(numerical("estimate_coupling.profile".into()))?;
            let mut table = Table::new(&[
                "x",
                "phase",
                "distorted_re",
                "distorted_im",
                "reflected_re",
                "reflected_im",
            ]);
            for s in cut {
                table.push(vec![
                    s.x.into(),
                    s.phase.into(),
                    s.distorted.re.into(),
                    s.distorted.im.into(),
                    s.reflected.re.into(),
                    s.reflected.im.into(),
                ]);
            }
            Ok(table)
        }
        CouplingOutput::Sweep => coupling_sweep(cfg, &spec, &set),
    }
}

fn coupling_sweep(
    cfg: &RunConfig,
    spec: &fibertractor::paraxial::WaveguideSpec,
    set: &fibertractor::paraxial::ModeSet,
) -> Result<Table, CliError> {
    let c = &cfg.estimate_coupling;
    check_axis(
        &c.diameters,
        "estimate_coupling.diameters",
        0.0,
        f64::INFINITY,
    )?;
    c.quadrature
        .validate()
        .map_err(|e| CliError::Validation(format!("estimate_coupling.quadrature: {e}")))?;
    let modes = cfg.mode_pair()?;
    let inj = cfg.injection()?;
    let mut table = Table::new(&[
        "diameter",
        "m_x",
        "m_y",
        "n_x",
        "n_y",
        "t_re",
        "t_im",
        "t_abs",
        "r_re",
        "r_im",
        "r_abs",
        "loss_fraction",
        "model_t",
        "model_t12",
        "model_r12",
        "model_phi",
        "model_status",
        "model_force",
    ]);
    let diameters = c.diameters.values();
    for &d in &diameters {
        c.bead(d, spec, "estimate_coupling.diameters")?;
    }
    let results: Vec<Vec<Vec<Cell>>> = diameters
        .par_iter()
        .map(|&diameter| {
            let ctx = format!("estimate_coupling diameter={diameter}");
            let bead = c.bead(diameter, spec, "estimate_coupling.diameters")?;
            let est = estimate_coupling(&bead, spec, (c.target[0], c.target[1]), &c.quadrature)
                .map_err(numerical(ctx.clone()))?;
            let model: Vec<Cell> = match to_scatter_params(&est, c.renormalize) {
                Ok(rep) => {
                    let force = build_four_port(&rep.params)
                        .map_err(numerical(ctx.clone()))
                        .and_then(|b| {
                            let chain =
                                ChainConfig::single(b, modes).map_err(numerical(ctx.clone()))?;
                            let fields =
                                solve_chain(&chain, &inj).map_err(numerical(ctx.clone()))?;
                            Ok(chain_forces(&fields, &modes, &inj).forces[0])
                        })?;
                    let status = if rep.renormalized {
                        "renormalized"
                    } else {
                        "ok"
                    };
                    vec![
                        rep.raw_loss_fraction.into(),
                        rep.t.into(),
                        rep.params.t12.into(),
                        rep.params.r12.into(),
                        rep.params.phi.into(),
                        status.into(),
                        force.into(),
                    ]
                }
                Err(Error::ModelInvalid { loss }) => vec![
                    loss.into(),
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    "model-invalid".into(),
                    Cell::Empty,
                ],
                Err(e) => return Err(numerical(ctx)(e)),
            };
            let mut rows = Vec::new();
            for (i, mi) in set.modes.iter().enumerate() {
                for (j, mj) in set.modes.iter().enumerate().skip(i) {
                    let (t, r) = (est.t(i, j), est.r(i, j));
                    let mut row: Vec<Cell> = vec![
                        diameter.into(),
                        mi.mx.into(),
                        mi.my.into(),
                        mj.mx.into(),
                        mj.my.into(),
                        t.re.into(),
                        t.im.into(),
                        t.norm().into(),
                        r.re.into(),
                        r.im.into(),
                        r.norm().into(),
                    ];
                    row.extend(model.iter().cloned());
                    rows.push(row);
                }
            }
            Ok(rows)
        })
        .collect::<Result<_, CliError>>()?;
    for rows in results {
        for row in rows {
            table.push(row);
        }
    }
    Ok(table)
}
