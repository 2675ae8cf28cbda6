use rayon::prelude::*;
use wva_core::hypothesis::{critical_point_for_alpha, type1_error, type1_error_half_argument, type2_error, ErrorReport};
use wva_core::loss::solve_stationary;
use wva_core::monte_carlo::{empirical_error, empirical_success, sample_full_process, sample_no_postselection, sample_postselected};
use wva_core::probe::{self, Mode};
use wva_core::success_probability;

use crate::error::{CliError, CliResult};
use crate::scenario::{Axis, GridPoint, Range, Scenario, Sweep};
use crate::table::{Cell, Table};

fn header(scenario: &Scenario, columns: &[&str]) -> Vec<String> {
    let mut h = scenario.axis_columns();
    h.extend(columns.iter().map(|c| c.to_string()));
    h
}

fn prefixed(point: &GridPoint, cells: Vec<Cell>) -> Vec<Cell> {
    let mut row: Vec<Cell> = point.coords.iter().map(|&v| Cell::Num(v)).collect();
    row.extend(cells);
    row
}

/// Evaluates `rows_at` on every grid point in parallel and concatenates the rows in grid order.
fn collect_rows<F>(scenario: &Scenario, rows_at: F) -> CliResult<Vec<Vec<Cell>>>
where
    F: Fn(&GridPoint) -> CliResult<Vec<Vec<Cell>>> + Sync,
{
    let parts: Vec<CliResult<Vec<Vec<Cell>>>> = scenario.grid().par_iter().map(&rows_at).collect();
    let mut rows = Vec::new();
    for part in parts {
        rows.extend(part?);
    }
    Ok(rows)
}

/// Columns `x, f_initial, f_ps, f_nps`; `f_initial` is the density at `g = 0`.
pub fn cmd_density(scenario: &Scenario, x_grid: &Range) -> CliResult<Table> {
    let xs = x_grid.values();
    let mut table = Table::new(header(scenario, &["x", "f_initial", "f_ps", "f_nps"]));
    table.rows = collect_rows(scenario, |point| {
        let setup = point.params.setup()?;
        let initial = setup.with_g(0.0)?;
        let noise = point.params.noise()?;
        xs.iter()
            .map(|&x| {
                Ok(prefixed(
                    point,
                    vec![
                        x.into(),
                        probe::density(&initial, noise, Mode::NoPostselection, x)?.into(),
                        probe::density(&setup, noise, Mode::Postselected, x)?.into(),
                        probe::density(&setup, noise, Mode::NoPostselection, x)?.into(),
                    ],
                ))
            })
            .collect()
    })?;
    Ok(table)
}

/// One row of error probabilities per grid point. `c_roundtrip` recomputes
/// the critical point from the reported significance level.
pub fn cmd_errors(scenario: &Scenario) -> CliResult<Table> {
    let mut table = Table::new(header(
        scenario,
        &["c", "alpha", "p_e1", "p_e2_ps", "p_e2_nps", "beta_ps", "beta_nps", "ratio_e2", "ratio_beta", "c_roundtrip"],
    ));
    table.rows = collect_rows(scenario, |point| {
        let setup = point.params.setup()?;
        let rule = point.params.rule()?;
        let noise = point.params.noise()?;
        let r = ErrorReport::evaluate(&setup, &rule, noise)?;
        let c_roundtrip = if r.alpha > 0.0 && r.alpha < 1.0 {
            critical_point_for_alpha(r.alpha, noise, setup.sigma())?
        } else {
            f64::NAN
        };
        Ok(vec![prefixed(
            point,
            vec![
                rule.c().into(),
                r.alpha.into(),
                r.p_e1.into(),
                r.p_e2_ps.into(),
                r.p_e2_nps.into(),
                r.beta_ps.into(),
                r.beta_nps.into(),
                r.ratio_e2.into(),
                r.ratio_beta.into(),
                c_roundtrip.into(),
            ],
        )])
    })?;
    Ok(table)
}

/// Default contour grid: `|A_w|` in `[0, 5]` against `g` in `[0.1, 5]`.
pub fn default_contour_sweeps() -> Vec<Sweep> {
    vec![
        Sweep {
            axis: Axis::Aw,
            range: Range {
                start: 0.0,
                stop: 5.0,
                steps: 51,
            },
        },
        Sweep {
            axis: Axis::G,
            range: Range {
                start: 0.1,
                stop: 5.0,
                steps: 50,
            },
        },
    ]
}

/// Ratios of the type-2 errors and powers over `|A_w|` and `g` or `c`.
pub fn cmd_contour(scenario: &Scenario) -> CliResult<Table> {
    let mut scenario = scenario.clone();
    if scenario.sweeps.is_empty() {
        scenario.sweeps = default_contour_sweeps();
    }
    let axes: Vec<Axis> = scenario.sweeps.iter().map(|s| s.axis).collect();
    let valid = axes.len() == 2 && axes.contains(&Axis::Aw) && (axes.contains(&Axis::G) || axes.contains(&Axis::C));
    if !valid {
        return Err(CliError::Usage(
            "contour sweeps aw against g or c, e.g. --sweep aw:0:5:51 --sweep g:0.1:5:50".to_string(),
        ));
    }
    let mut table = Table::new(header(&scenario, &["ratio_e2", "ratio_beta"]));
    table.rows = collect_rows(&scenario, |point| {
        let setup = point.params.setup()?;
        let r = ErrorReport::evaluate(&setup, &point.params.rule()?, point.params.noise()?)?;
        Ok(vec![prefixed(point, vec![r.ratio_e2.into(), r.ratio_beta.into()])])
    })?;
    Ok(table)
}

/// Empirical frequencies from the sampler against the closed forms.
///
/// With readout noise a further row checks that the alternative type-1
/// expression is excluded by the same data.
pub fn cmd_montecarlo(scenario: &Scenario) -> CliResult<Table> {
    let n = scenario.samples;
    let seed = scenario.seed;
    let mut table = Table::new(header(
        scenario,
        &["quantity", "analytic", "empirical", "half_width", "pass"],
    ));
    table.rows = collect_rows(scenario, |point| {
        let setup = point.params.setup()?;
        let null = setup.with_g(0.0)?;
        let noise = point.params.noise()?;
        let rule = point.params.rule()?;
        let e1 = type1_error(&rule, noise, setup.sigma());

        let mut rows = Vec::new();
        let mut push = |name: &str, analytic: f64, est: wva_core::monte_carlo::FrequencyEstimate, pass: bool| {
            rows.push(prefixed(
                point,
                vec![name.into(), analytic.into(), est.value.into(), est.half_width.into(), pass.into()],
            ));
        };

        let null_ps = empirical_error(&sample_postselected(&null, noise, n, seed)?, &rule)?;
        push("e1_ps", e1, null_ps, null_ps.agrees_with(e1));
        let null_nps = empirical_error(&sample_no_postselection(&null, noise, n, seed.wrapping_add(1))?, &rule)?;
        push("e1_nps", e1, null_nps, null_nps.agrees_with(e1));

        let e2_ps = type2_error(&setup, &rule, noise, Mode::Postselected)?;
        let est = empirical_error(&sample_postselected(&setup, noise, n, seed.wrapping_add(2))?, &rule)?;
        push("e2_ps", e2_ps, est, est.agrees_with(e2_ps));
        let e2_nps = type2_error(&setup, &rule, noise, Mode::NoPostselection)?;
        let est = empirical_error(&sample_no_postselection(&setup, noise, n, seed.wrapping_add(3))?, &rule)?;
        push("e2_nps", e2_nps, est, est.agrees_with(e2_nps));

        let p_success = success_probability(&setup)?;
        let est = empirical_success(&sample_full_process(&setup, noise, n, seed.wrapping_add(4))?)?;
        push("success_probability", p_success, est, est.agrees_with(p_success));

        if !noise.is_noiseless() {
            let variant = type1_error_half_argument(&rule, noise, setup.sigma());
            push("e1_half_argument_excluded", variant, null_nps, !null_nps.agrees_with(variant));
        }
        Ok(rows)
    })?;
    Ok(table)
}

/// Stationary point of the loss-aware test for the scenario's `g`, `sigma` and `alpha`.
pub fn cmd_stationary(scenario: &Scenario) -> CliResult<Table> {
    let mut table = Table::new(header(
        scenario,
        &[
            "g",
            "sigma",
            "alpha",
            "lambda",
            "p1",
            "p2",
            "c_f",
            "c_fbar",
            "d_lambda",
            "d_p1",
            "d_p2",
            "d_cf",
            "d_cfbar",
            "max_residual",
            "classification",
            "degenerate",
            "converged_starts",
            "overlap_branch_lambda",
            "overlap_branch_implied_alpha",
            "overlap_branch_rejected",
        ],
    ));
    table.rows = collect_rows(scenario, |point| {
        let p = &point.params;
        let noise = p.noise()?;
        let alpha = match p.threshold {
            crate::scenario::Threshold::Alpha(a) => a,
            crate::scenario::Threshold::CriticalPoint(_) => type1_error(&p.rule()?, noise, p.sigma),
        };
        let sol = solve_stationary(p.g, p.sigma, alpha)?;
        let pt = sol.point;
        let res = sol.residuals;
        Ok(vec![prefixed(
            point,
            vec![
                p.g.into(),
                p.sigma.into(),
                alpha.into(),
                pt.lambda.into(),
                pt.p1.into(),
                pt.p2.into(),
                pt.c_f.into(),
                pt.c_fbar.into(),
                res.d_lambda.into(),
                res.d_p1.into(),
                res.d_p2.into(),
                res.d_cf.into(),
                res.d_cfbar.into(),
                sol.max_residual().into(),
                sol.classification.label().into(),
                sol.degenerate.into(),
                Cell::Int(sol.converged_starts as u64),
                sol.lambda_branch.lambda.into(),
                sol.lambda_branch.implied_alpha.into(),
                sol.lambda_branch.rejected.into(),
            ],
        )])
    })?;
    Ok(table)
}
