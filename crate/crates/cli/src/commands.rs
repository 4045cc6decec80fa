use std::fs::{self, File};
use std::io::{self, BufWriter, Write};

use anyhow::{bail, Context, Result};
use serde_json::json;

use satflow_core::constraint::{absorb_disturbance, normalize_orientation};
use satflow_core::cover::{augment, default_breakpoints, minimal_cover};
use satflow_core::dynamics::{
    classify_trajectory, simulate as integrate, Classification, ClassifyTolerances, SimError, SimOptions, Trajectory,
};
use satflow_core::spec_file::{InitialSpec, NetworkSpecFile};
use satflow_core::stability::{analyze_network, CertificateOptions};

use crate::{Common, Format};

fn load(common: &Common) -> Result<NetworkSpecFile> {
    let text = fs::read_to_string(&common.spec).with_context(|| format!("reading {}", common.spec.display()))?;
    NetworkSpecFile::from_json(&text).with_context(|| format!("{}", common.spec.display()))
}

fn output(common: &Common) -> Result<Box<dyn Write>> {
    Ok(match &common.out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json(common: &Common, value: &serde_json::Value) -> Result<()> {
    let mut w = output(common)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn report_only(common: &Common, command: &str) -> Result<()> {
    if common.format == Some(Format::Csv) {
        bail!("{command} only produces report documents");
    }
    Ok(())
}

pub fn analyze(common: &Common) -> Result<u8> {
    report_only(common, "analyze")?;
    let spec = load(common)?;
    let system = spec.to_system()?;
    let report = analyze_network(&system, &CertificateOptions::default())?;
    write_json(common, &serde_json::to_value(&report)?)?;
    eprintln!("verdict: {}", report.verdict.label());
    Ok(report.exit_code() as u8)
}

fn summary_line(traj: &Trajectory, class: &Classification) -> String {
    let mut line = format!("classification={}", class.label());
    if let Classification::Consensus { alpha } = class {
        line.push_str(&format!(" alpha={alpha}"));
    }
    if let Some(v) = traj.lyapunov.last() {
        line.push_str(&format!(" final_V={v}"));
    }
    line.push_str(&format!(
        " conservation_residual={:e} max_dV={:e}",
        traj.diagnostics.max_conservation_residual, traj.diagnostics.max_lyapunov_increase
    ));
    line
}

pub fn simulate(common: &Common, sample_interval: f64) -> Result<u8> {
    let spec = load(common)?;
    let system = spec.to_system()?;
    let (state0, seed) = spec.initial_state(common.seed);
    let options = SimOptions {
        horizon: common.horizon,
        step: common.step,
        sample_interval,
        ..SimOptions::default()
    };
    let format = common.format.unwrap_or(Format::Csv);
    let (traj, failure) = match integrate(&system, &state0, &options) {
        Ok(t) => (t, None),
        Err(SimError::Integration(e)) => (*e.partial.clone(), Some(e)),
        Err(e) => return Err(e.into()),
    };
    let class = classify_trajectory(&traj, &ClassifyTolerances::default());
    match format {
        Format::Csv => {
            let mut w = output(common)?;
            traj.write_csv(&mut w, seed)?;
            w.flush()?;
        }
        Format::Report => {
            let doc = json!({
                "schema_version": 1,
                "seed": seed,
                "initial": { "x": state0.x, "xc": state0.xc },
                "classification": class,
                "final_time": traj.times.last(),
                "final_x": traj.x.last(),
                "final_lyapunov": traj.lyapunov.last(),
                "diagnostics": traj.diagnostics,
                "error": failure.as_ref().map(|e| e.to_string()),
            });
            write_json(common, &doc)?;
        }
    }
    if let Some(e) = failure {
        bail!("integration stopped: {e} (partial output written)");
    }
    eprintln!("{}", summary_line(&traj, &class));
    Ok(0)
}

pub fn cover(common: &Common, with_augment: bool, breakpoints: Option<&str>) -> Result<u8> {
    report_only(common, "cover")?;
    let spec = load(common)?;
    let graph = spec.graph()?;
    let cover = minimal_cover(&graph)?;
    let cycles: Vec<&[usize]> = cover.cycles.iter().map(|c| c.edges()).collect();
    let mut doc = json!({
        "schema_version": 1,
        "cycles": cycles,
        "multiplicity": cover.multiplicity,
    });
    if with_augment {
        let Some(net) = spec.network()? else {
            bail!("--augment needs flow bounds on every edge");
        };
        let bps: Vec<Vec<f64>> = match breakpoints {
            Some(text) => serde_json::from_str(text).context("parsing --breakpoints")?,
            None => default_breakpoints(&net, &cover),
        };
        let aug = augment(&net, &cover, &bps)?;
        let aug_cycles: Vec<&[usize]> = aug.cover.cycles.iter().map(|c| c.edges()).collect();
        doc["augmented"] = json!({
            "breakpoints": bps,
            "spec": NetworkSpecFile::from_network(&aug.network),
            "cycles": aug_cycles,
            "mapping": aug.mapping,
        });
    }
    write_json(common, &doc)?;
    Ok(0)
}

pub fn normalize(common: &Common) -> Result<u8> {
    report_only(common, "normalize")?;
    let spec = load(common)?;
    let Some(net) = spec.network()? else {
        bail!("normalize needs flow bounds on every edge");
    };
    let (absorbed, xbar) = absorb_disturbance(&net, &spec.terminals(), &spec.disturbance)?;
    let (normalized, mapping) = normalize_orientation(&absorbed);

    let mut out = NetworkSpecFile::from_network(&normalized);
    out.name = spec.name.as_ref().map(|n| format!("{n} (normalized)"));
    out.hamiltonian = spec.hamiltonian.clone();
    if spec.initial.is_some() || common.seed.is_some() {
        let (state, _) = spec.initial_state(common.seed);
        let shifted: Vec<f64> = state.xc.iter().zip(&xbar).map(|(a, b)| a - b).collect();
        out.initial = Some(InitialSpec::Explicit { x: state.x, xc: Some(mapping.map_controller_state(&shifted)) });
    }
    out.validate()?;
    let doc = json!({
        "schema_version": 1,
        "identity": mapping.is_identity() && xbar.iter().all(|v| *v == 0.0),
        "xbar_c": xbar,
        "spec": out,
        "mapping": mapping,
    });
    write_json(common, &doc)?;
    Ok(0)
}
