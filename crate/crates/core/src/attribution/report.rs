use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::collect::{AttributionEntry, AttributionReport};
use super::error::{io, AttributionError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const COOCCURRENCE_FILE: &str = "cooccurrence.csv";
pub const GALLERY_FILE: &str = "gallery.html";

/// On-disk form of a report plus images the gallery could not find.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub report: AttributionReport,
    #[serde(default)]
    pub missing_images: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct EmitOptions {
    pub html: bool,
    /// Base directory for relative image paths.
    pub image_root: Option<PathBuf>,
}

fn resolve(image: &str, root: Option<&Path>) -> PathBuf {
    match root {
        Some(r) => r.join(image),
        None => PathBuf::from(image),
    }
}

fn missing_images(report: &AttributionReport, root: Option<&Path>) -> Vec<String> {
    let mut out: Vec<String> = report
        .latents
        .values()
        .flatten()
        .filter_map(|e| e.image.as_deref())
        .filter(|img| !resolve(img, root).is_file())
        .map(str::to_string)
        .collect();
    out.sort();
    out.dedup();
    out
}

pub fn manifest_json(manifest: &Manifest) -> String {
    let mut s = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    s.push('\n');
    s
}

pub fn parse_manifest(text: &str) -> std::result::Result<Manifest, serde_json::Error> {
    serde_json::from_str(text)
}

pub fn cooccurrence_csv(report: &AttributionReport) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in &report.cooccurrence {
        w.serialize(row).expect("in-memory csv write");
    }
    w.into_inner().expect("in-memory csv flush")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
        .replace('\'', "&#39;")
}

fn tile(e: &AttributionEntry, root: Option<&Path>, missing: &[String]) -> String {
    let caption = format!("{} #{} · {:.4}", escape(&e.sample_id), e.token_index, e.activation);
    let overlay = e
        .bbox
        .map(|b| {
            format!(
                r#"<div class="bbox" style="left:{:.2}%;top:{:.2}%;width:{:.2}%;height:{:.2}%"></div>"#,
                (b[0] - b[2] / 2.0) * 100.0,
                (b[1] - b[3] / 2.0) * 100.0,
                b[2] * 100.0,
                b[3] * 100.0
            )
        })
        .unwrap_or_default();
    let picture = match e.image.as_deref() {
        Some(img) if !missing.iter().any(|m| m == img) => {
            format!(r#"<img src="{}" alt="">"#, escape(&resolve(img, root).to_string_lossy()))
        }
        Some(img) => format!(r#"<div class="placeholder">missing: {}</div>"#, escape(img)),
        None => r#"<div class="placeholder">no image</div>"#.to_string(),
    };
    format!(r#"<figure><div class="frame">{picture}{overlay}</div><figcaption>{caption}</figcaption></figure>"#)
}

/// Static gallery: one section per latent in index order, each record shown
/// with its box drawn over the referenced image.
pub fn gallery_html(manifest: &Manifest, image_root: Option<&Path>) -> String {
    let r = &manifest.report;
    let mut s = String::new();
    s.push_str("<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>latent gallery</title>\n<style>\n");
    s.push_str("body{font-family:sans-serif;margin:1em}\nsection{margin-bottom:2em}\n.grid{display:flex;flex-wrap:wrap;gap:8px}\n");
    s.push_str("figure{margin:0;width:160px}\n.frame{position:relative;width:160px;height:160px;background:#eee;overflow:hidden}\n");
    s.push_str(".frame img{width:100%;height:100%;object-fit:fill}\n.bbox{position:absolute;border:2px solid #e00;box-sizing:border-box}\n");
    s.push_str(".placeholder{display:flex;align-items:center;justify-content:center;height:100%;color:#888;font-size:11px;text-align:center}\n");
    s.push_str("figcaption{font-size:11px}\n</style></head><body>\n");
    let _ = writeln!(
        s,
        "<h1>Top {} records per latent</h1>\n<p>{} rows, {} of {} latents active</p>",
        r.n, r.rows_seen, r.coverage.active_latents, r.coverage.latents
    );
    for (i, entries) in &r.latents {
        let _ = writeln!(s, r#"<section id="latent-{i}"><h2>latent {i}</h2>"#);
        if entries.is_empty() {
            s.push_str("<p>never active</p>\n");
        } else {
            s.push_str("<div class=\"grid\">\n");
            for e in entries {
                s.push_str(&tile(e, image_root, &manifest.missing_images));
                s.push('\n');
            }
            s.push_str("</div>\n");
        }
        s.push_str("</section>\n");
    }
    s.push_str("</body></html>\n");
    s
}

/// Write the manifest and co-occurrence table, and the gallery when asked.
pub fn emit_report(report: &AttributionReport, out_dir: &Path, opts: &EmitOptions) -> Result<Manifest> {
    fs::create_dir_all(out_dir).map_err(io(out_dir))?;
    let root = opts.image_root.as_deref();
    let manifest = Manifest {
        report: report.clone(),
        missing_images: if opts.html { missing_images(report, root) } else { Vec::new() },
    };
    let write = |name: &str, bytes: &[u8]| {
        let path = out_dir.join(name);
        fs::write(&path, bytes).map_err(io(path))
    };
    write(MANIFEST_FILE, manifest_json(&manifest).as_bytes())?;
    write(COOCCURRENCE_FILE, &cooccurrence_csv(report))?;
    if opts.html {
        write(GALLERY_FILE, gallery_html(&manifest, root).as_bytes())?;
    }
    Ok(manifest)
}

pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(io(path))?;
    parse_manifest(&text).map_err(|e| AttributionError::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}
