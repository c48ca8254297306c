//! Result files: JSON records, plain-text tables, SVG heatmaps, and the
//! consolidated report. All output is a deterministic function of its inputs.

use std::fs;
use std::path::{Path, PathBuf};

use super::suite::{HeatmapResult, LayerCurve, SuiteOutput};
use crate::error::Result;

/// Tabular text for one curve: header plus one row per swept point.
pub fn curve_table(curve: &LayerCurve) -> String {
    let mut out = String::new();
    out.push_str(&format!("# {}\n", curve.metric));
    out.push_str("layer\tvalue\tn\n");
    for (i, v) in curve.values.iter().enumerate() {
        let layer = if curve.includes_embedding {
            if i == 0 {
                "emb".to_string()
            } else {
                (i - 1).to_string()
            }
        } else {
            i.to_string()
        };
        out.push_str(&format!("{layer}\t{v:.6}\t{}\n", curve.samples_per_layer));
    }
    out
}

/// Tabular text for a heatmap: swap-layer rows by intervention-layer columns.
pub fn heatmap_table(h: &HeatmapResult) -> String {
    let mut out = String::new();
    out.push_str(&format!("# layer-swap deltas (n={})\n", h.samples));
    out.push_str("swap\\intervene");
    for a in 0..h.n_layers {
        out.push_str(&format!("\t{a}"));
    }
    out.push('\n');
    for (b, row) in h.deltas.iter().enumerate() {
        out.push_str(&format!("{b}"));
        for v in row {
            out.push_str(&format!("\t{v:.6}"));
        }
        out.push('\n');
    }
    out
}

/// Diverging blue/white/red fill for a delta normalized to [-1, 1].
fn heat_color(t: f64) -> String {
    let t = t.clamp(-1.0, 1.0);
    let lerp = |a: f64, b: f64, x: f64| a + (b - a) * x;
    let (r, g, b) = if t < 0.0 {
        let x = t + 1.0; // 0 at -1, 1 at 0
        (lerp(59.0, 255.0, x), lerp(76.0, 255.0, x), lerp(192.0, 255.0, x))
    } else {
        (lerp(255.0, 180.0, t), lerp(255.0, 4.0, t), lerp(255.0, 38.0, t))
    };
    format!("rgb({},{},{})", r.round() as u8, g.round() as u8, b.round() as u8)
}

/// Render the heatmap as a standalone SVG with axis labels and a color bar.
pub fn heatmap_svg(h: &HeatmapResult, title: &str) -> String {
    let n = h.n_layers;
    let cell = 40usize;
    let margin = 60usize;
    let bar_w = 28usize;
    let width = margin + n * cell + 70 + bar_w;
    let height = margin + n * cell + 50;
    let max_abs = h
        .deltas
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-12);

    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n"
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">{title}</text>\n",
        margin + n * cell / 2
    ));
    for (b, row) in h.deltas.iter().enumerate() {
        for (a, &v) in row.iter().enumerate() {
            let x = margin + a * cell;
            let y = margin + b * cell;
            s.push_str(&format!(
                "<rect x=\"{x}\" y=\"{y}\" width=\"{cell}\" height=\"{cell}\" fill=\"{}\" stroke=\"#888\" stroke-width=\"0.5\"><title>intervene={a} swap={b} delta={v:.6}</title></rect>\n",
                heat_color(v / max_abs)
            ));
        }
    }
    for i in 0..n {
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{i}</text>\n",
            margin + i * cell + cell / 2,
            margin + n * cell + 16
        ));
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{i}</text>\n",
            margin - 8,
            margin + i * cell + cell / 2 + 4
        ));
    }
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">intervention layer</text>\n",
        margin + n * cell / 2,
        margin + n * cell + 38
    ));
    s.push_str(&format!(
        "<text x=\"14\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 {})\">swap layer</text>\n",
        margin + n * cell / 2,
        margin + n * cell / 2
    ));

    // Color bar: +max at the top, -max at the bottom, tick at zero.
    let bar_x = margin + n * cell + 30;
    let bar_h = n * cell;
    let steps = 32usize;
    for i in 0..steps {
        let t = 1.0 - 2.0 * (i as f64 + 0.5) / steps as f64;
        let y = margin + i * bar_h / steps;
        let hgt = bar_h.div_ceil(steps);
        s.push_str(&format!(
            "<rect x=\"{bar_x}\" y=\"{y}\" width=\"{bar_w}\" height=\"{hgt}\" fill=\"{}\"/>\n",
            heat_color(t)
        ));
    }
    for (frac, label) in [(0.0f64, max_abs), (0.5, 0.0), (1.0, -max_abs)] {
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"start\">{label:.4}</text>\n",
            bar_x + bar_w + 4,
            margin as f64 + frac * bar_h as f64 + 4.0
        ));
    }
    s.push_str("</svg>\n");
    s
}

/// Write `<stem>.json`, `<stem>.txt`, and `<stem>.svg` (heatmaps only).
pub fn write_suite_files(out_dir: &Path, stem: &str, output: &SuiteOutput) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    let json_path = out_dir.join(format!("{stem}.json"));
    fs::write(&json_path, serde_json::to_string_pretty(output)?)?;
    written.push(json_path);

    let mut text = format!(
        "suite={} target={} seed={} samples={} checkpoint={} dataset={} config_hash={}\n\n",
        output.manifest.suite,
        output.manifest.target,
        output.manifest.seed,
        output.manifest.samples,
        output.manifest.checkpoint_id,
        output.manifest.dataset_id,
        output.manifest.config_hash,
    );
    for curve in &output.curves {
        text.push_str(&curve_table(curve));
        text.push('\n');
    }
    if let Some(h) = &output.heatmap {
        text.push_str(&heatmap_table(h));
    }
    let txt_path = out_dir.join(format!("{stem}.txt"));
    fs::write(&txt_path, text)?;
    written.push(txt_path);

    if let Some(h) = &output.heatmap {
        let svg_path = out_dir.join(format!("{stem}.svg"));
        let title = format!("{} ({})", output.manifest.suite, output.manifest.target);
        fs::write(&svg_path, heatmap_svg(h, &title))?;
        written.push(svg_path);
    }
    Ok(written)
}

/// Collate every suite JSON in a directory into one Markdown report.
///
/// For first-sentence interchange curves the report also states how the toy
/// model compares with the expectation that the curve starts high and then
/// drops, flagging whether IIA(embedding) - IIA(last layer) >= 0.3.
pub fn consolidate_report(results_dir: &Path) -> Result<String> {
    let mut entries: Vec<PathBuf> = fs::read_dir(results_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    entries.sort();

    let mut out = String::from("# patchlab experiment report\n");
    if entries.is_empty() {
        out.push_str("\nNo suite results found in this directory.\n");
        return Ok(out);
    }
    for path in &entries {
        let text = fs::read_to_string(path)?;
        let Ok(result) = serde_json::from_str::<SuiteOutput>(&text) else {
            continue; // not a suite result
        };
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("suite");
        out.push_str(&format!("\n## {name}\n\n"));
        out.push_str(&format!(
            "- suite: `{}`  target: `{}`\n- checkpoint: `{}`  dataset: `{}`\n- seed: {}  samples: {}  config hash: `{}`  timestamp: {}\n\n",
            result.manifest.suite,
            result.manifest.target,
            result.manifest.checkpoint_id,
            result.manifest.dataset_id,
            result.manifest.seed,
            result.manifest.samples,
            result.manifest.config_hash,
            result.manifest.timestamp,
        ));
        for curve in &result.curves {
            out.push_str("```\n");
            out.push_str(&curve_table(curve));
            out.push_str("```\n");
            if curve.metric == "iia-first-sentence" && curve.includes_embedding {
                out.push_str(&first_sentence_note(curve));
            }
        }
        if let Some(h) = &result.heatmap {
            out.push_str("```\n");
            out.push_str(&heatmap_table(h));
            out.push_str("```\n");
            out.push_str(&format!("Heatmap image: `{name}.svg`\n"));
        }
    }
    Ok(out)
}

fn first_sentence_note(curve: &LayerCurve) -> String {
    let first = curve.values.first().copied().unwrap_or(f64::NAN);
    let last = curve.values.last().copied().unwrap_or(f64::NAN);
    let drop = first - last;
    let flagged = drop >= 0.3;
    format!(
        "\nFirst-sentence interchange, qualitative check (informational): \
         IIA starts at {first:.3} at the embedding hook and ends at {last:.3} \
         at the last layer (drop {drop:.3}). Reference behavior for pretrained \
         models is a curve that starts out high and then dramatically \
         decreases; drop >= 0.3: **{}**. Layer dynamics are model-dependent, \
         so this does not gate anything.\n\n",
        if flagged { "yes" } else { "no" }
    )
}
