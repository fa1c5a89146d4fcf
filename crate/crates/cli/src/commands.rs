use std::fs;
use std::path::Path;

use serde_json::json;
use ugc_core::archive::{load_model, save_model};
use ugc_core::data::{
    average_runs, parse_measurements, FamilyKind, JointDataset, DEFAULT_ANGLE_BIN_DEG,
};
use ugc_core::joints::{
    builtin_model, fit_family_model, poly_loo_rmse, poly_series, thicknesses, GprConfig,
    HyperChoice, JointFamilyModel, JointModelError, RangePolicy,
};
use ugc_core::mechanics::{design_module, sig6, RingDesignSpec};

use crate::config::{layered, FileConfig};
use crate::error::CliError;
use crate::{BuiltinArgs, DesignArgs, FitArgs, Output, PredictArgs, ValidateArgs};

pub const DEFAULT_POLY_DEGREE: usize = 7;

fn require_file(path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::input(format!("{}: no such file", path.display())))
    }
}

fn require_writable_parent(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => Err(CliError::input(format!(
            "{}: directory {} does not exist",
            path.display(),
            dir.display()
        ))),
        _ => Ok(()),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::computation(format!("{}: {e}", path.display())))
}

fn hyper_choice(name: &str) -> Result<HyperChoice, CliError> {
    match name {
        "tune" => Ok(HyperChoice::Tune),
        "defaults" => Ok(HyperChoice::Defaults),
        other => Err(CliError::input(format!(
            "hyper: expected `tune` or `defaults`, got `{other}`"
        ))),
    }
}

fn model_id(path: &Path, fallback: &str) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map_or_else(|| fallback.to_string(), str::to_string)
}

struct PolyRow {
    thickness_mm: Option<f64>,
    samples: usize,
    loo: Result<f64, JointModelError>,
}

fn poly_rows(ds: &JointDataset, kind: FamilyKind, degree: usize) -> Result<Vec<PolyRow>, CliError> {
    let slices: Vec<Option<f64>> = if kind == FamilyKind::Curve {
        thicknesses(ds, kind).into_iter().map(Some).collect()
    } else {
        vec![None]
    };
    slices
        .into_iter()
        .map(|t| {
            let (theta, force) = poly_series(ds, kind, t)?;
            Ok(PolyRow {
                thickness_mm: t,
                samples: theta.len(),
                loo: poly_loo_rmse(&theta, &force, degree),
            })
        })
        .collect()
}

pub fn fit(a: &FitArgs, file: &FileConfig, out: Output) -> Result<(), CliError> {
    require_file(&a.data)?;
    require_writable_parent(&a.out)?;
    let bin = layered(a.bin, file.angle_bin_deg, DEFAULT_ANGLE_BIN_DEG);
    let degree = layered(a.poly_degree, file.poly_degree, DEFAULT_POLY_DEGREE);
    let hyper = hyper_choice(&layered(
        a.hyper.clone(),
        file.hyper.clone(),
        "tune".to_string(),
    ))?;

    let raw = parse_measurements(&read(&a.data)?)?;
    let ds = average_runs(&raw, bin)?;
    let model = fit_family_model(&ds, a.family, &GprConfig { hyper })?;
    let polys = poly_rows(&ds, a.family, degree)?;
    save_model(&a.out, &model, &model_id(&a.out, a.family.as_str()))?;

    let loo = model
        .loo()
        .expect("fitted models carry a leave-one-out summary");
    let samples = ds.of_kind(a.family).count();
    if out.json {
        let poly: Vec<_> = polys
            .iter()
            .map(|p| {
                json!({
                    "thickness_mm": p.thickness_mm,
                    "samples": p.samples,
                    "degree": degree,
                    "loo_rmse_n": p.loo.as_ref().ok(),
                    "error": p.loo.as_ref().err().map(|e| e.to_string()),
                })
            })
            .collect();
        let doc = json!({
            "family": a.family,
            "archive": a.out.display().to_string(),
            "samples": samples,
            "readings": raw.of_kind(a.family).count(),
            "angle_bin_deg": bin,
            "gpr_loo_rmse_force_n": loo.force_rmse_n,
            "gpr_loo_rmse_return_deg": loo.return_rmse_deg,
            "poly": poly,
        });
        println!(
            "{}",
            serde_json::to_string_pretty(&doc).expect("plain JSON value")
        );
    } else if !out.quiet {
        println!(
            "fitted {} on {samples} averaged points ({} readings, {}° bins) -> {}",
            a.family,
            raw.of_kind(a.family).count(),
            sig6(bin),
            a.out.display()
        );
        println!("  {:<24} {:>8} {:>14}", "model", "points", "LOO RMSE [N]");
        println!(
            "  {:<24} {:>8} {:>14}",
            "gpr",
            samples,
            sig6(loo.force_rmse_n)
        );
        for p in &polys {
            let name = match p.thickness_mm {
                Some(t) => format!("poly deg {degree}, T={} mm", sig6(t)),
                None => format!("poly deg {degree}"),
            };
            let value = match &p.loo {
                Ok(v) => sig6(*v),
                Err(e) => format!("n/a ({e})"),
            };
            println!("  {name:<24} {:>8} {value:>14}", p.samples);
        }
        println!(
            "  return angle LOO RMSE    {} deg",
            sig6(loo.return_rmse_deg)
        );
    }
    Ok(())
}

/// `start:stop:step` into evenly spaced angles, both ends inclusive.
pub fn parse_sweep(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = || {
        CliError::input(format!(
            "sweep `{spec}`: expected START:STOP:STEP with STEP > 0 and STOP >= START"
        ))
    };
    let parts: Vec<f64> = spec
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    let [start, stop, step] = parts[..] else {
        return Err(bad());
    };
    if !(step > 0.0 && stop >= start && start.is_finite() && stop.is_finite()) {
        return Err(bad());
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| start + i as f64 * step).collect())
}

struct Point {
    theta: f64,
    force_n: f64,
    std_n: f64,
    return_deg: Option<f64>,
    extrapolated: bool,
    nonzero_rest_force: bool,
}

fn predict_point(
    m: &JointFamilyModel,
    theta: f64,
    t: Option<f64>,
    policy: RangePolicy,
) -> Result<Point, CliError> {
    let f = m.predict_force_with(theta, t, policy)?;
    let return_deg = match m.predict_return_angle_with(theta, t, policy) {
        Ok(v) => Some(v),
        Err(JointModelError::NoReturnModel) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(Point {
        theta,
        force_n: f.force_n,
        std_n: f.predictive_std(),
        return_deg,
        extrapolated: f.flags.extrapolated,
        nonzero_rest_force: f.flags.nonzero_rest_force,
    })
}

pub fn predict(a: &PredictArgs, file: &FileConfig, out: Output) -> Result<(), CliError> {
    require_file(&a.model)?;
    let angles = match (&a.sweep, a.theta) {
        (Some(s), _) => parse_sweep(s)?,
        (None, Some(theta)) => vec![theta],
        (None, None) => return Err(CliError::input("give --theta or --sweep")),
    };
    let policy = if a.allow_extrapolation || file.allow_extrapolation.unwrap_or(false) {
        RangePolicy::AllowExtrapolation
    } else {
        RangePolicy::Strict
    };
    let model = load_model(&a.model)?;
    let points: Vec<Point> = angles
        .iter()
        .map(|&theta| predict_point(&model, theta, a.thickness, policy))
        .collect::<Result<_, _>>()?;

    if out.json {
        let rows: Vec<_> = points
            .iter()
            .map(|p| {
                json!({
                    "theta_deg": p.theta,
                    "thickness_mm": a.thickness,
                    "force_n": p.force_n,
                    "force_std_n": p.std_n,
                    "return_angle_deg": p.return_deg,
                    "extrapolated": p.extrapolated,
                    "nonzero_rest_force": p.nonzero_rest_force,
                })
            })
            .collect();
        let doc = if a.sweep.is_some() {
            json!(rows)
        } else {
            rows[0].clone()
        };
        println!(
            "{}",
            serde_json::to_string_pretty(&doc).expect("plain JSON value")
        );
    } else if a.sweep.is_some() {
        println!("theta_deg,force_n,force_std_n,return_angle_deg");
        for p in &points {
            let ret = p.return_deg.map(|r| r.to_string()).unwrap_or_default();
            println!("{},{},{},{ret}", p.theta, p.force_n, p.std_n);
        }
    } else {
        let p = &points[0];
        println!("force         {} N ± {} N", sig6(p.force_n), sig6(p.std_n));
        match p.return_deg {
            Some(r) => println!("return angle  {} deg", sig6(r)),
            None => println!("return angle  n/a (model has no return-angle predictor)"),
        }
    }
    if !out.quiet {
        if points.iter().any(|p| p.extrapolated) {
            eprintln!("warning: prediction outside the validated angle window");
        }
        if points.iter().any(|p| p.nonzero_rest_force) {
            eprintln!("warning: model force does not vanish at zero deflection");
        }
    }
    Ok(())
}

fn load_spec(path: &Path) -> Result<RingDesignSpec, CliError> {
    RingDesignSpec::from_json(&read(path)?).map_err(|violations| {
        CliError::input(
            violations
                .iter()
                .map(|v| format!("{}: {v}", path.display()))
                .collect::<Vec<_>>()
                .join("\n"),
        )
    })
}

pub fn design(a: &DesignArgs, out: Output) -> Result<(), CliError> {
    require_file(&a.spec)?;
    require_file(&a.model)?;
    if let Some(p) = &a.out {
        require_writable_parent(p)?;
    }
    let spec = load_spec(&a.spec)?;
    let model = load_model(&a.model)?;
    let report = design_module(&spec, &model)?;
    let json = report.to_json();
    if let Some(p) = &a.out {
        write(p, &json)?;
    }
    if out.json {
        print!("{json}");
    } else if !out.quiet {
        print!("{}", report.summary_table());
    }
    Ok(())
}

pub fn builtin(a: &BuiltinArgs, out: Output) -> Result<(), CliError> {
    require_writable_parent(&a.out)?;
    let model = builtin_model(a.family)?;
    save_model(&a.out, &model, &format!("builtin-{}", a.family))?;
    let gp = model.force_model();
    let epsilon = gp.noise_variance().sqrt();
    if out.json {
        let doc = json!({
            "family": a.family,
            "archive": a.out.display().to_string(),
            "beta": gp.beta(),
            "epsilon": epsilon,
        });
        println!(
            "{}",
            serde_json::to_string_pretty(&doc).expect("plain JSON value")
        );
    } else if !out.quiet {
        let beta: Vec<String> = gp.beta().iter().map(|b| b.to_string()).collect();
        println!(
            "wrote {} ({}, β = [{}], ε = {})",
            a.out.display(),
            a.family,
            beta.join(", "),
            epsilon
        );
    }
    Ok(())
}

pub fn validate(a: &ValidateArgs, out: Output) -> Result<(), CliError> {
    if let Some(path) = &a.data {
        require_file(path)?;
        let ds = parse_measurements(&read(path)?)?;
        let mut counts: Vec<(String, usize)> = Vec::new();
        for kind in FamilyKind::ALL {
            let n = ds.of_kind(kind).count();
            if n == 0 {
                continue;
            }
            let label = match thicknesses(&ds, kind).as_slice() {
                [] => kind.to_string(),
                ts => format!(
                    "{kind} (T = {} mm)",
                    ts.iter().map(|t| sig6(*t)).collect::<Vec<_>>().join(", ")
                ),
            };
            counts.push((label, n));
        }
        if out.json {
            let families: Vec<_> = counts
                .iter()
                .map(|(f, n)| json!({"family": f, "rows": n}))
                .collect();
            let doc =
                json!({"file": path.display().to_string(), "rows": ds.len(), "families": families});
            println!(
                "{}",
                serde_json::to_string_pretty(&doc).expect("plain JSON value")
            );
        } else if !out.quiet {
            println!("{}: {} rows ok", path.display(), ds.len());
            for (label, n) in counts {
                println!("  {label}: {n}");
            }
        }
    }
    if let Some(path) = &a.spec {
        require_file(path)?;
        let spec = load_spec(path)?;
        if out.json {
            let doc = json!({"file": path.display().to_string(), "spec": spec});
            println!(
                "{}",
                serde_json::to_string_pretty(&doc).expect("plain JSON value")
            );
        } else if !out.quiet {
            println!("{}: spec ok", path.display());
        }
    }
    Ok(())
}
