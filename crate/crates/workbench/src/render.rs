//! Plain-text tables and CSV for the command line.

use dse_core::firegen;
use dse_core::modkit::{Delta, Presence};
use dse_core::scale::{curve_to_csv, CostEstimate};
use dse_core::units;

use crate::api::{AnalysisResponse, DiffResponse, ScaleResponse, SweepResponse};

/// Left-aligned first column, right-aligned numbers, ` | ` separators.
fn grid(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let parts: Vec<String> = cells
            .iter()
            .enumerate()
            .map(|(i, c)| {
                if i == 0 {
                    format!("{c:<w$}", w = widths[i])
                } else {
                    format!("{c:>w$}", w = widths[i])
                }
            })
            .collect();
        parts.join(" | ").trim_end().to_string() + "\n"
    };
    let mut out = line(headers.to_vec());
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    out.push_str(&rule.join("-+-"));
    out.push('\n');
    for row in rows {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
    }
    out
}

pub fn analysis_table(r: &AnalysisResponse) -> String {
    let rows: Vec<Vec<String>> = r
        .rows
        .iter()
        .map(|row| {
            let act = if row.in_totals {
                row.display.activations.clone()
            } else {
                format!("({})", row.display.activations)
            };
            vec![
                row.name.clone(),
                row.kind.as_str().to_string(),
                row.output.clone(),
                row.display.params.clone(),
                act,
                row.display.flops.clone(),
            ]
        })
        .collect();
    let mut out = format!(
        "{} at batch {} ({} B per value)\n\n",
        r.architecture, r.config.batch, r.config.bytes_per_value
    );
    out.push_str(&grid(
        &[
            "layer",
            "kind",
            "output CxHxW",
            "params",
            "activations",
            "forward FLOPs",
        ],
        &rows,
    ));
    let t = &r.totals;
    out.push_str(&format!(
        "\ntotal | {} | {} | {}\n",
        t.display.params, t.display.activations, t.display.flops
    ));
    out.push_str(&format!(
        "forward + backward per batch: {}\n",
        units::flops(t.train_flops_per_batch)
    ));
    if let Some(ratio) = &t.data_weight_ratio {
        out.push_str(&format!("activations / parameters: {ratio}\n"));
    }
    if r.rows.iter().any(|row| !row.in_totals) {
        out.push_str("(parenthesized activations are not part of the total)\n");
    }
    for (k, v) in &r.annotations {
        out.push_str(&format!("reported, not computed: {k} = {v}\n"));
    }
    out
}

pub fn analysis_csv(r: &AnalysisResponse) -> String {
    let mut out = String::from(
        "layer,kind,channels,height,width,param_bytes,activation_bytes,forward_flops\n",
    );
    for row in &r.rows {
        let s = row.output_shape;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            row.name,
            row.kind.as_str(),
            s.channels,
            s.height,
            s.width,
            row.param_bytes,
            row.activation_bytes,
            row.forward_flops
        ));
    }
    let t = &r.totals;
    out.push_str(&format!(
        "total,,,,,{},{},{}\n",
        t.param_bytes, t.activation_bytes, t.forward_flops
    ));
    out
}

fn delta(d: &Option<Delta>) -> String {
    d.map(|d| d.display()).unwrap_or_else(|| "-".into())
}

fn shape(s: &Option<dse_core::arch::TensorShape>) -> String {
    s.map(|s| format!("{}x{}x{}", s.channels, s.height, s.width))
        .unwrap_or_else(|| "-".into())
}

pub fn diff_table(r: &DiffResponse) -> String {
    let rep = &r.report;
    let rows: Vec<Vec<String>> = rep
        .rows
        .iter()
        .map(|row| {
            let marker = match row.presence {
                Presence::Both if row.changed => "*",
                Presence::Both => "",
                Presence::BaselineOnly => "removed",
                Presence::ModifiedOnly => "added",
            };
            vec![
                row.name.clone(),
                shape(&row.baseline_shape),
                shape(&row.modified_shape),
                delta(&row.activations),
                delta(&row.params),
                delta(&row.flops),
                marker.to_string(),
            ]
        })
        .collect();
    let mods: Vec<String> = r.mods.iter().map(|m| m.to_string()).collect();
    let mut out = format!(
        "{} vs {}{}{} at batch {}\n\n",
        rep.baseline.architecture,
        rep.modified.architecture,
        if mods.is_empty() { "" } else { " with " },
        mods.join(", "),
        rep.baseline.config.batch
    );
    out.push_str(&grid(
        &[
            "layer",
            "baseline",
            "modified",
            "Δactivations",
            "Δparams",
            "Δflops",
            "changed",
        ],
        &rows,
    ));
    let t = &rep.totals;
    let m = &rep.modified.totals;
    out.push_str(&format!(
        "\ntotal | Δactivations {} ({}) | Δparams {} ({}) | Δflops {} ({})\n",
        t.activations.display(),
        units::bytes(m.activation_bytes),
        t.params.display(),
        units::bytes(m.param_bytes),
        t.flops.display(),
        units::flops(m.forward_flops),
    ));
    out.push_str(&format!(
        "classification: {}",
        match rep.classification {
            dse_core::modkit::Classification::Local => "local",
            dse_core::modkit::Classification::Global => "global",
        }
    ));
    match &rep.first_changed {
        Some(l) => out.push_str(&format!(" (first changed layer: {l})\n")),
        None => out.push('\n'),
    }
    for note in &rep.notes {
        out.push_str(&format!("note: {note}\n"));
    }
    out
}

pub fn diff_csv(r: &DiffResponse) -> String {
    let exact = |d: &Option<Delta>| match d {
        Some(Delta::Ratio(x)) => format!("{}/{}", x.numer(), x.denom()),
        Some(Delta::BothZero) => "1/1".into(),
        Some(Delta::FromZero) | None => String::new(),
    };
    let mut out = String::from(
        "layer,presence,baseline_output,modified_output,activations_x,params_x,flops_x,changed\n",
    );
    for row in &r.report.rows {
        let presence = match row.presence {
            Presence::Both => "both",
            Presence::BaselineOnly => "baseline_only",
            Presence::ModifiedOnly => "modified_only",
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            row.name,
            presence,
            shape(&row.baseline_shape),
            shape(&row.modified_shape),
            exact(&row.activations),
            exact(&row.params),
            exact(&row.flops),
            row.changed
        ));
    }
    out
}

pub fn sweep_table(r: &SweepResponse) -> String {
    let rows: Vec<Vec<String>> = r
        .points
        .iter()
        .map(|p| {
            vec![
                p.value.to_string(),
                units::bytes(p.param_bytes),
                units::flops(p.forward_flops),
                units::bytes(p.activation_bytes),
            ]
        })
        .collect();
    let mut out = format!("sweep of {:?} at batch {}\n\n", r.vary, r.batch);
    out.push_str(&grid(
        &["value", "params", "forward FLOPs", "activations"],
        &rows,
    ));
    for p in &r.points {
        for note in &p.notes {
            out.push_str(&format!("note ({}): {note}\n", p.value));
        }
    }
    out
}

pub fn sweep_csv(r: &SweepResponse) -> String {
    firegen::to_csv(&r.points)
}

fn estimate_row(e: &CostEstimate) -> Vec<String> {
    let f = |x: &dse_core::scale::Exact| format!("{:.4}", dse_core::scale::to_f64(x));
    vec![
        e.workers.to_string(),
        f(&e.comm_s),
        f(&e.compute_s),
        f(&e.total_s),
        f(&e.speedup_vs_1),
        e.comp_comm_ratio
            .as_ref()
            .map(f)
            .unwrap_or_else(|| "-".into()),
    ]
}

pub fn scale_table(r: &ScaleResponse) -> String {
    let mut out = format!(
        "{} at batch {}: {} of gradients, {} forward per sample, {} topology\n\n",
        r.architecture,
        r.batch,
        units::bytes(r.param_bytes),
        units::flops(r.forward_flops_per_sample),
        r.cluster.topology
    );
    let headers = [
        "p",
        "comm s",
        "compute s",
        "total s",
        "speedup",
        "comp/comm",
    ];
    match &r.curve {
        Some(curve) => {
            let rows: Vec<Vec<String>> = curve.points.iter().map(estimate_row).collect();
            out.push_str(&grid(&headers, &rows));
            out.push_str(&format!("\nbest speedup at p = {}\n", curve.best_workers));
        }
        None => out.push_str(&grid(&headers, &[estimate_row(&r.iteration)])),
    }
    let mut warnings: Vec<&String> = r.iteration.warnings.iter().collect();
    if let Some(c) = &r.curve {
        warnings.extend(c.points.iter().flat_map(|p| &p.warnings));
    }
    warnings.sort();
    warnings.dedup();
    for w in warnings {
        out.push_str(&format!("warning: {w}\n"));
    }
    if let Some(t) = &r.training {
        let f = |x: &dse_core::scale::Exact| format!("{:.1}", dse_core::scale::to_f64(x));
        out.push_str(&format!(
            "\ntraining: {} iterations per epoch x {} epochs\n  communication {} s ({} s per epoch)\n  computation {} s\n  total {} s\n  operations {}\n",
            t.iterations_per_epoch,
            t.plan.epochs,
            f(&t.total_comm_s),
            f(&t.comm_per_epoch_s),
            f(&t.total_compute_s),
            f(&t.total_s),
            t.total_ops
        ));
    }
    out
}

pub fn scale_csv(r: &ScaleResponse) -> Option<String> {
    r.curve.as_ref().map(curve_to_csv)
}
