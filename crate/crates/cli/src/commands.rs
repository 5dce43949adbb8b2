use clap::ValueEnum;
use geosnap::dynamics::{bloch_samples, evolve_unitary};
use geosnap::metrics::{
    amplitude_sweep, closed_fidelity, error_budget, open_fidelity, prepared_schedule,
    robustness_sweep, MetricOptions, SweepGrid,
};
use geosnap::par::try_map_indexed;
use geosnap::pulse::{gate_time, PulseSchedule, Scheme, SnapTarget};
use geosnap::qocf::{correlation_matrix, linear_adjust, rho02_closed_form, AdjustOptions};
use geosnap::system::{mhz, SystemParams};
use serde::Serialize;

use crate::config::{ScenarioConfig, SchemeName, SweepKind};
use crate::output::{num, OutputDir};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
pub enum Figure {
    #[value(name = "fig2a")]
    Fig2a,
    #[value(name = "fig2bc")]
    Fig2bc,
    #[value(name = "fig3a")]
    Fig3a,
    #[value(name = "fig3b")]
    Fig3b,
    #[value(name = "fig4")]
    Fig4,
    #[value(name = "corrC")]
    CorrC,
}

#[derive(Serialize)]
struct Resolved {
    chi_rad_s: f64,
    gamma_decay_per_s: f64,
    gamma_phi_per_s: f64,
    kerr_rad_s: f64,
    chi_prime_rad_s: f64,
    cavity_decay_per_s: f64,
    omega_max_rad_s: f64,
    robustness_omega_rad_s: f64,
    thetas_wrapped: Vec<f64>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    figure: Option<&'a str>,
    files: Vec<String>,
    resolved: Resolved,
    metric_options: MetricOptions,
    adjust_options: AdjustOptions,
    config: &'a ScenarioConfig,
}

pub struct Context {
    pub cfg: ScenarioConfig,
    pub params: SystemParams,
    pub target: SnapTarget,
    pub metrics: MetricOptions,
    pub adjust: AdjustOptions,
}

impl Context {
    pub fn new(cfg: ScenarioConfig) -> Result<Self, CliError> {
        let params = cfg.params();
        params
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        let target = cfg.target()?;
        let metrics = cfg.metric_options();
        let adjust = AdjustOptions {
            mode: metrics.mode,
            unitary: metrics.unitary,
            ..AdjustOptions::default()
        };
        Ok(Self {
            cfg,
            params,
            target,
            metrics,
            adjust,
        })
    }

    fn prepared(
        &self,
        scheme: Scheme,
        omega_max: f64,
        optimized: bool,
    ) -> Result<PulseSchedule, CliError> {
        Ok(prepared_schedule(
            &self.target,
            scheme,
            omega_max,
            optimized,
            &self.params,
            &self.metrics,
        )?)
    }

    pub fn finish(
        &self,
        out: &mut OutputDir,
        command: &str,
        figure: Option<&str>,
    ) -> Result<(), CliError> {
        let p = &self.params;
        let m = Manifest {
            tool: "geosnap",
            version: env!("CARGO_PKG_VERSION"),
            command,
            figure,
            files: out.files().to_vec(),
            resolved: Resolved {
                chi_rad_s: p.chi,
                gamma_decay_per_s: p.gamma_decay,
                gamma_phi_per_s: p.gamma_phi,
                kerr_rad_s: p.kerr,
                chi_prime_rad_s: p.chi_prime,
                cavity_decay_per_s: p.cavity_decay,
                omega_max_rad_s: self.cfg.omega_max(),
                robustness_omega_rad_s: mhz(self.cfg.sweep.robustness_omega_mhz),
                thetas_wrapped: self.target.thetas().to_vec(),
            },
            metric_options: self.metrics,
            adjust_options: self.adjust,
            config: &self.cfg,
        };
        out.manifest(&m)
    }
}

fn grid_rows(g: &SweepGrid) -> Vec<Vec<String>> {
    g.rows()
        .iter()
        .map(|r| r.iter().map(|v| num(*v)).collect())
        .collect()
}

fn trajectory_rows(ctx: &Context, schedule: &PulseSchedule) -> Result<Vec<Vec<String>>, CliError> {
    let d = ctx.target.dim();
    let n = ctx.cfg.run.trajectory_points;
    let times: Vec<f64> = (0..n)
        .map(|k| schedule.duration() * k as f64 / (n - 1) as f64)
        .collect();
    let p = ctx.params.closed().with_n_max(d.max(schedule.levels()));
    let r = evolve_unitary(
        schedule,
        &p,
        ctx.metrics.mode,
        Some(&times),
        &ctx.metrics.unitary,
    )?;
    let mut rows = Vec::with_capacity(d * n);
    for block in 0..d {
        for (t, b) in times.iter().zip(bloch_samples(&r, block)?) {
            rows.push(vec![
                block.to_string(),
                num(*t),
                num(b[0]),
                num(b[1]),
                num(b[2]),
            ]);
        }
    }
    Ok(rows)
}

const TRAJECTORY_HEADER: [&str; 5] = ["block", "t_s", "x", "y", "z"];

pub fn simulate(ctx: &Context, out: &mut OutputDir) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let om = cfg.omega_max();
    let s = ctx.prepared(cfg.scheme(), om, cfg.run.optimize)?;
    let mode = ctx.metrics.mode;
    let closed = closed_fidelity(
        &s,
        &ctx.params.closed(),
        mode,
        &ctx.target,
        &ctx.metrics.unitary,
    )?;
    let mut rows = vec![
        ("scheme", format!("{:?}", cfg.run.scheme).to_lowercase()),
        ("mode", mode.name().to_string()),
        ("optimized", cfg.run.optimize.to_string()),
        ("omega_ratio", num(cfg.run.omega_ratio)),
        ("omega_max_rad_s", num(om)),
        ("gate_time_s", num(s.duration())),
        ("fidelity_closed", num(closed)),
    ];
    if cfg.run.decoherence && !ctx.params.is_closed() {
        let open = open_fidelity(&s, &ctx.params, mode, &ctx.target, &ctx.metrics.lindblad)?;
        rows.push(("fidelity_open", num(open)));
    }
    out.key_values("report.csv", &rows)?;

    let b = error_budget(&ctx.target, &s, &ctx.params, &ctx.metrics)?;
    out.key_values(
        "error_budget.csv",
        &[
            ("baseline_rwa_fidelity", num(b.baseline)),
            ("counterrotating_loss", num(b.counterrotating_loss)),
            ("decoherence_loss", num(b.decoherence_loss)),
            ("higher_order_loss", num(b.higher_order_loss)),
        ],
    )?;
    if cfg.run.trajectory {
        out.table(
            "trajectory.csv",
            &TRAJECTORY_HEADER,
            &trajectory_rows(ctx, &s)?,
        )?;
    }
    Ok(())
}

fn amplitude_figure(
    ctx: &Context,
    out: &mut OutputDir,
    name: &str,
    scheme: Scheme,
) -> Result<(), CliError> {
    let ratios = ctx.cfg.ratios();
    let open = ctx.cfg.run.decoherence && !ctx.params.is_closed();
    let closed_p = ctx.params.closed();
    let m = &ctx.metrics;
    let rows = try_map_indexed(m.exec, ratios.len(), |k| -> Result<Vec<String>, CliError> {
        let om = ratios[k] * ctx.params.chi;
        let mut row = vec![num(ratios[k])];
        let schedules = [
            ctx.prepared(scheme, om, false)?,
            ctx.prepared(scheme, om, true)?,
        ];
        for s in &schedules {
            row.push(num(closed_fidelity(
                s,
                &closed_p,
                m.mode,
                &ctx.target,
                &m.unitary,
            )?));
        }
        if open {
            for s in &schedules {
                row.push(num(open_fidelity(
                    s,
                    &ctx.params,
                    m.mode,
                    &ctx.target,
                    &m.lindblad,
                )?));
            }
        }
        Ok(row)
    })?;
    let mut header = vec!["omega_ratio", "closed_unoptimized", "closed_optimized"];
    if open {
        header.extend(["open_unoptimized", "open_optimized"]);
    }
    out.table(name, &header, &rows)
}

fn correlation_tables(ctx: &Context, out: &mut OutputDir) -> Result<(), CliError> {
    let c = &ctx.cfg.correlation;
    let chi = ctx.params.chi;
    let omega = c.omega_ratio * chi;
    let d = ctx.target.dim();
    let mut rows = Vec::new();
    let mut rho02 = Vec::new();
    for &x in &c.chi_tau {
        let m = correlation_matrix(&ctx.target, omega, chi, x / chi)?;
        for (i, row) in m.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                rows.push(vec![num(x), i.to_string(), j.to_string(), num(*v)]);
            }
        }
        if d >= 3 {
            rho02.push(vec![num(x), num(m[0][2]), num(rho02_closed_form(x))]);
        }
    }
    out.table("correlation.csv", &["chi_tau", "i", "j", "rho"], &rows)?;
    if d >= 3 {
        out.table("rho02.csv", &["chi_tau", "numeric", "closed_form"], &rho02)?;
    }
    Ok(())
}

pub fn figure(ctx: &Context, out: &mut OutputDir, fig: Figure) -> Result<(), CliError> {
    let pd = ctx.cfg.scheme_of(SchemeName::Pd);
    match fig {
        Figure::Fig2a => amplitude_figure(ctx, out, "fig2a.csv", Scheme::OrangeSlice),
        Figure::Fig3a => amplitude_figure(ctx, out, "fig3a.csv", pd),
        Figure::Fig2bc => {
            let om = ctx.cfg.omega_max();
            for (name, opt) in [
                ("fig2bc_unoptimized.csv", false),
                ("fig2bc_optimized.csv", true),
            ] {
                let s = ctx.prepared(Scheme::OrangeSlice, om, opt)?;
                out.table(name, &TRAJECTORY_HEADER, &trajectory_rows(ctx, &s)?)?;
            }
            Ok(())
        }
        Figure::Fig3b => {
            let rows = ctx
                .cfg
                .ratios()
                .iter()
                .map(|&r| -> Result<Vec<String>, CliError> {
                    let om = r * ctx.params.chi;
                    let to = gate_time(Scheme::OrangeSlice, &ctx.target, om)?;
                    let tp = gate_time(pd, &ctx.target, om)?;
                    Ok(vec![num(r), num(to), num(tp), num(tp / to)])
                })
                .collect::<Result<Vec<_>, _>>()?;
            out.table(
                "fig3b.csv",
                &["omega_ratio", "gate_time_oss_s", "gate_time_pd_s", "ratio"],
                &rows,
            )
        }
        Figure::Fig4 => {
            let om = mhz(ctx.cfg.sweep.robustness_omega_mhz);
            let ax = ctx.cfg.error_axis();
            let oss = robustness_sweep(
                &ctx.target,
                Scheme::OrangeSlice,
                false,
                &ax,
                &ax,
                om,
                &ctx.params,
                &ctx.metrics,
            )?;
            let pdg = robustness_sweep(
                &ctx.target,
                pd,
                true,
                &ax,
                &ax,
                om,
                &ctx.params,
                &ctx.metrics,
            )?;
            out.table("fig4_oss.csv", &oss.header(), &grid_rows(&oss))?;
            out.table("fig4_pd_optimized.csv", &pdg.header(), &grid_rows(&pdg))
        }
        Figure::CorrC => correlation_tables(ctx, out),
    }
}

pub fn sweep(ctx: &Context, out: &mut OutputDir) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let g = match cfg.sweep.kind {
        SweepKind::Amplitude => amplitude_sweep(
            &ctx.target,
            cfg.scheme(),
            cfg.run.optimize,
            &cfg.ratios(),
            cfg.run.decoherence,
            &ctx.params,
            &ctx.metrics,
        )?,
        SweepKind::Robustness => {
            let ax = cfg.error_axis();
            let om = mhz(cfg.sweep.robustness_omega_mhz);
            robustness_sweep(
                &ctx.target,
                cfg.scheme(),
                cfg.run.optimize,
                &ax,
                &ax,
                om,
                &ctx.params,
                &ctx.metrics,
            )?
        }
    };
    out.table("sweep.csv", &g.header(), &grid_rows(&g))
}

pub fn optimize(ctx: &Context, out: &mut OutputDir) -> Result<(), CliError> {
    let om = ctx.cfg.omega_max();
    let s = ctx.cfg.scheme().build(&ctx.target, om)?;
    let adj = linear_adjust(&s, &ctx.params.closed(), &ctx.target, om, &ctx.adjust)?;
    let rows: Vec<Vec<String>> = (0..ctx.target.dim())
        .map(|n| {
            vec![
                n.to_string(),
                num(adj.params.omega_eps[n]),
                num(adj.params.delta_eps[n]),
            ]
        })
        .collect();
    out.table(
        "adjustment.csv",
        &["level", "omega_eps_rad_s", "delta_eps_rad_s"],
        &rows,
    )?;
    let trace: Vec<Vec<String>> = adj
        .trace
        .iter()
        .map(|r| {
            vec![
                r.pass.to_string(),
                r.subspace.to_string(),
                r.iteration.to_string(),
                num(r.omega_eps),
                num(r.delta_eps),
                num(r.infidelity),
            ]
        })
        .collect();
    out.table(
        "adjust_trace.csv",
        &[
            "pass",
            "subspace",
            "iteration",
            "omega_eps_rad_s",
            "delta_eps_rad_s",
            "infidelity",
        ],
        &trace,
    )?;
    out.key_values(
        "adjust_summary.csv",
        &[
            ("infidelity_before", num(adj.infidelity_before)),
            ("infidelity_after", num(adj.infidelity_after)),
            ("evaluations", adj.evaluations.to_string()),
        ],
    )
}

pub fn correlate(ctx: &Context, out: &mut OutputDir) -> Result<(), CliError> {
    correlation_tables(ctx, out)
}
