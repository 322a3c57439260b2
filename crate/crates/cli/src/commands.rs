use std::fmt::Write as _;
use std::fs;

use lockin_core::integrator::{lyapunov_v, simulate};
use lockin_core::model::{x_to_y, y_to_x};
use lockin_core::pd_char::pd_table;
use lockin_core::report::{format_num, format_opt, round_sig};
use lockin_core::separatrix::trace_with;
use lockin_core::sweep::{
    compare_csv, compare_pull_out, lock_in_report, sweep_csv, sweep_json, sweep_lock_in,
};
use lockin_core::{
    Error, IntegratorConfig, LockInReport, LoopParams, SweepGrid, TraceConfig, XState, YState,
};
use serde_json::{json, Value};

use crate::opts::{finite, required, resolve, Cli, Command, Flags, Format};
use crate::CliError;

/// Sample counts behind `pd-table`.
const PD_TABLE_SAMPLES: usize = 4096;

const REPORT_CSV_HEADER: &str = "k0,tau1,tau2,omega_l_numeric,omega_l_series1,omega_l_series2,\
omega_l_series1_as_printed,omega_l_series2_as_printed,omega_po,omega_po_gardner,\
y_norm_consistent,y_norm_as_printed";

pub fn run(cli: Cli) -> Result<(), CliError> {
    let flags = resolve(cli.flags)?;
    let format = flags.format.unwrap_or(Format::Json);
    let out = match cli.command {
        Command::Lockin | Command::Pullout | Command::Estimate => {
            report_cmd(cli.command, &flags, format)?
        }
        Command::Separatrix => separatrix_cmd(&flags, format)?,
        Command::Simulate => simulate_cmd(&flags, format)?,
        Command::Sweep => sweep_cmd(&flags, format)?,
        Command::Compare => compare_cmd(&flags, format)?,
        Command::PdTable => pd_table_cmd(format)?,
    };
    emit(&flags, out)
}

fn emit(flags: &Flags, mut text: String) -> Result<(), CliError> {
    if !text.ends_with('\n') {
        text.push('\n');
    }
    match &flags.out {
        Some(path) => fs::write(path, text)
            .map_err(|e| CliError::Compute(format!("--out: cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Parameter errors become usage errors that name the flag.
fn core_error(e: Error) -> CliError {
    match e {
        Error::InvalidParameter { name, reason } => {
            let flag = match name {
                "h_theta" => "--h-theta".to_string(),
                "k0" | "tau1" | "tau2" | "eps" | "h" | "tmax" | "ratios" => format!("--{name}"),
                other => format!("`{other}`"),
            };
            CliError::Usage(format!("{flag}: {reason}"))
        }
        other => CliError::Compute(other.to_string()),
    }
}

fn params(flags: &Flags) -> Result<LoopParams, CliError> {
    let k0 = required(flags.k0, "--k0")?;
    let tau1 = required(flags.tau1, "--tau1")?;
    let tau2 = required(flags.tau2, "--tau2")?;
    LoopParams::new(k0, tau1, tau2).map_err(core_error)
}

/// Validated before any tracing so bad values are reported as usage errors.
fn trace_config(flags: &Flags) -> Result<TraceConfig, CliError> {
    let d = TraceConfig::default();
    let cfg = TraceConfig {
        eps: flags.eps.unwrap_or(d.eps),
        h_theta: flags.h_theta.unwrap_or(d.h_theta),
    };
    if !(cfg.eps > 0.0 && cfg.eps <= 1e-4) {
        return Err(CliError::Usage(format!(
            "--eps: must lie in (0, 1e-4], got {}",
            cfg.eps
        )));
    }
    if !(cfg.h_theta.is_finite() && cfg.h_theta > 0.0) {
        return Err(CliError::Usage(format!(
            "--h-theta: must be positive, got {}",
            cfg.h_theta
        )));
    }
    Ok(cfg)
}

fn metadata(command: &str, extra: Value) -> Value {
    let mut m = json!({
        "tool_version": env!("CARGO_PKG_VERSION"),
        "command": command,
    });
    if let (Value::Object(dst), Value::Object(src)) = (&mut m, extra) {
        dst.extend(src);
    }
    m
}

fn num(x: f64) -> Value {
    json!(round_sig(x))
}

fn to_json(v: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(v).expect("reports serialize")
}

fn command_name(c: Command) -> &'static str {
    match c {
        Command::Lockin => "lockin",
        Command::Pullout => "pullout",
        Command::Separatrix => "separatrix",
        Command::Simulate => "simulate",
        Command::Sweep => "sweep",
        Command::Estimate => "estimate",
        Command::PdTable => "pd-table",
        Command::Compare => "compare",
    }
}

fn report_cmd(command: Command, flags: &Flags, format: Format) -> Result<String, CliError> {
    let p = params(flags)?;
    let cfg = trace_config(flags)?;
    let r = lock_in_report(&p, &cfg).map_err(core_error)?;
    Ok(match format {
        Format::Json => {
            let mut doc = serde_json::to_value(&r).expect("reports serialize");
            doc["metadata"] = metadata(command_name(command), json!({ "trace": cfg }));
            to_json(&doc)
        }
        Format::Csv => format!("{REPORT_CSV_HEADER}\n{}\n", report_csv_row(&r)),
    })
}

fn report_csv_row(r: &LockInReport) -> String {
    [
        format_num(r.params.k0()),
        format_num(r.params.tau1()),
        format_num(r.params.tau2()),
        format_num(r.omega_l_numeric),
        format_num(r.omega_l_series1),
        format_num(r.omega_l_series2),
        format_num(r.omega_l_series1_as_printed),
        format_num(r.omega_l_series2_as_printed),
        format_num(r.omega_po_numeric),
        format_opt(r.omega_po_gardner),
        format_num(r.y_norm_consistent),
        format_num(r.y_norm_as_printed),
    ]
    .join(",")
}

fn separatrix_cmd(flags: &Flags, format: Format) -> Result<String, CliError> {
    let p = params(flags)?;
    let omega = finite(flags.omega.unwrap_or(0.0), "--omega")?;
    let cfg = trace_config(flags)?;
    let curve = trace_with(&p, &cfg).map_err(core_error)?;
    let xs: Vec<f64> = curve.points().map(|s| y_to_x(&p, omega, s).x).collect();
    Ok(match format {
        Format::Json => to_json(&json!({
            "metadata": metadata("separatrix", json!({ "params": p, "omega": omega, "trace": cfg })),
            "y_at_zero": num(curve.y_at_zero),
            "theta": curve.thetas.iter().map(|&t| num(t)).collect::<Vec<_>>(),
            "y": curve.ys.iter().map(|&y| num(y)).collect::<Vec<_>>(),
            "x_at_omega": xs.iter().map(|&x| num(x)).collect::<Vec<_>>(),
        })),
        Format::Csv => {
            let mut out = String::from("theta,y,x_at_omega\n");
            for ((t, y), x) in curve.thetas.iter().zip(&curve.ys).zip(&xs) {
                let _ = writeln!(
                    out,
                    "{},{},{}",
                    format_num(*t),
                    format_num(*y),
                    format_num(*x)
                );
            }
            out
        }
    })
}

fn simulate_cmd(flags: &Flags, format: Format) -> Result<String, CliError> {
    let p = params(flags)?;
    let omega = finite(flags.omega.unwrap_or(0.0), "--omega")?;
    let init = XState::new(
        finite(flags.theta0.unwrap_or(0.0), "--theta0")?,
        finite(flags.x0.unwrap_or(0.0), "--x0")?,
    );
    let mut cfg = IntegratorConfig::for_trajectory(&p, omega, init);
    if let Some(h) = flags.h {
        cfg.h = h;
    }
    if let Some(t) = flags.tmax {
        cfg.t_max = t;
    }
    cfg.validate().map_err(core_error)?;
    let rec = simulate(&p, omega, init, &cfg).map_err(core_error)?;
    let ys: Vec<YState> = rec
        .samples
        .iter()
        .map(|&(_, s)| x_to_y(&p, omega, s))
        .collect();
    Ok(match format {
        Format::Json => {
            let col = |f: &dyn Fn(usize) -> f64| {
                (0..rec.samples.len())
                    .map(|i| num(f(i)))
                    .collect::<Vec<_>>()
            };
            to_json(&json!({
                "metadata": metadata("simulate", json!({
                    "params": p,
                    "omega": omega,
                    "initial": { "theta0": init.theta_delta, "x0": init.x },
                    "integrator": cfg,
                })),
                "slipped": rec.slipped,
                "slip_count": rec.slip_count,
                "converged": rec.converged,
                "converged_to_stable": rec.converged_to_stable(),
                "limit_theta": rec.limit_theta.map(num),
                "max_excursion": num(rec.max_excursion),
                "t": col(&|i| rec.samples[i].0),
                "theta_delta": col(&|i| rec.samples[i].1.theta_delta),
                "x": col(&|i| rec.samples[i].1.x),
                "y": col(&|i| ys[i].y),
                "v": col(&|i| rec.v_series[i]),
            }))
        }
        Format::Csv => {
            let mut out = String::with_capacity(rec.samples.len() * 80);
            out.push_str("t,theta_delta,x,y,v\n");
            for (i, (t, s)) in rec.samples.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    format_num(*t),
                    format_num(s.theta_delta),
                    format_num(s.x),
                    format_num(ys[i].y),
                    format_num(lyapunov_v(&p, omega, *s)),
                );
            }
            out
        }
    })
}

fn grid(flags: &Flags) -> Result<SweepGrid, CliError> {
    let d = SweepGrid::default();
    let g = SweepGrid {
        ratio_values: flags.ratios.clone().unwrap_or(d.ratio_values),
        tau2_values: flags.tau2_values.clone().unwrap_or(d.tau2_values),
        tau1_fixed: flags.tau1.unwrap_or(d.tau1_fixed),
    };
    g.validate().map_err(|e| match e {
        Error::InvalidParameter { name, reason } => {
            let flag = match name {
                "tau2" => "--tau2-values",
                "tau1" => "--tau1",
                "ratios" => "--ratios",
                _ => "--ratios/--tau2-values",
            };
            CliError::Usage(format!("{flag}: {reason}"))
        }
        other => CliError::Compute(other.to_string()),
    })?;
    Ok(g)
}

fn sweep_cmd(flags: &Flags, format: Format) -> Result<String, CliError> {
    let g = grid(flags)?;
    let cfg = trace_config(flags)?;
    let rows = sweep_lock_in(&g, &cfg).map_err(core_error)?;
    Ok(match format {
        Format::Json => sweep_json(&g, &cfg, &rows),
        Format::Csv => sweep_csv(&rows),
    })
}

fn compare_cmd(flags: &Flags, format: Format) -> Result<String, CliError> {
    let g = grid(flags)?;
    let cfg = trace_config(flags)?;
    let rows = compare_pull_out(&g, &cfg).map_err(core_error)?;
    Ok(match format {
        Format::Json => sweep_json(&g, &cfg, &rows),
        Format::Csv => compare_csv(&rows),
    })
}

fn pd_table_cmd(format: Format) -> Result<String, CliError> {
    let rows = pd_table(PD_TABLE_SAMPLES, PD_TABLE_SAMPLES).map_err(core_error)?;
    Ok(match format {
        Format::Json => to_json(&json!({
            "metadata": metadata("pd-table", json!({ "m": PD_TABLE_SAMPLES, "n": PD_TABLE_SAMPLES })),
            "rows": rows.iter().map(|r| json!({
                "waveform_f1": r.waveform_f1,
                "waveform_f2": r.waveform_f2,
                "kd_recovered": num(r.kd_recovered),
                "kd_expected": num(r.kd_expected),
            })).collect::<Vec<_>>(),
        })),
        Format::Csv => {
            let mut out = String::from("waveform_f1,waveform_f2,kd_recovered,kd_expected\n");
            for r in &rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    r.waveform_f1,
                    r.waveform_f2,
                    format_num(r.kd_recovered),
                    format_num(r.kd_expected)
                );
            }
            out
        }
    })
}
