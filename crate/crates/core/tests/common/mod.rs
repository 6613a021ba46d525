//! Independent reference implementations used as test oracles. Everything
//! here is written with plain loops and full sorts and shares no code path
//! with the library beyond its public data types.

#![allow(dead_code)]

use strata::sae::{SaeModel, SaeVariant};

pub fn matvec(rows: usize, cols: usize, a: &[f64], x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; rows];
    for r in 0..rows {
        for c in 0..cols {
            out[r] += a[r * cols + c] * x[c];
        }
    }
    out
}

/// Ranks by value descending, then index ascending, via a full stable sort.
fn sorted_desc(values: &[(usize, f64)]) -> Vec<usize> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    v.into_iter().map(|p| p.0).collect()
}

/// Flat parameter vector: w_enc, b_enc, w_dec, b_dec in row-major order.
#[derive(Clone, Debug)]
pub struct FlatSae {
    pub d_in: usize,
    pub d_out: usize,
    pub m: usize,
    pub params: Vec<f64>,
}

impl FlatSae {
    pub fn from_model(model: &SaeModel) -> Self {
        let mut params = Vec::new();
        params.extend(model.w_enc.iter());
        params.extend(model.b_enc.iter());
        params.extend(model.w_dec.iter());
        params.extend(model.b_dec.iter());
        Self {
            d_in: model.input_dim(),
            d_out: model.output_dim(),
            m: model.latent_dim(),
            params,
        }
    }

    fn parts(&self) -> (&[f64], &[f64], &[f64], &[f64]) {
        let (we, rest) = self.params.split_at(self.m * self.d_in);
        let (be, rest) = rest.split_at(self.m);
        let (wd, bd) = rest.split_at(self.d_out * self.m);
        (we, be, wd, bd)
    }
}

pub struct OracleSpec {
    pub variant: SaeVariant,
    pub k: usize,
    pub aux_k: usize,
    pub aux_coeff: f64,
    pub l1_coeff: f64,
    pub prefixes: Vec<usize>,
    pub dead: Vec<bool>,
    pub pre_bias: bool,
}

/// Pre-activations for every row.
fn pre_acts(p: &FlatSae, spec: &OracleSpec, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (we, be, _, bd) = p.parts();
    x.iter()
        .map(|row| {
            let u: Vec<f64> = if spec.pre_bias {
                row.iter().zip(bd).map(|(a, b)| a - b).collect()
            } else {
                row.clone()
            };
            matvec(p.m, p.d_in, we, &u).iter().zip(be).map(|(a, b)| a + b).collect()
        })
        .collect()
}

fn select(spec: &OracleSpec, z: &[Vec<f64>]) -> Vec<Vec<bool>> {
    let m = z[0].len();
    match spec.variant {
        SaeVariant::Relu => z.iter().map(|r| r.iter().map(|&v| v > 0.0).collect()).collect(),
        SaeVariant::TopK | SaeVariant::Matryoshka => z
            .iter()
            .map(|r| {
                let order = sorted_desc(&r.iter().copied().enumerate().collect::<Vec<_>>());
                let mut keep = vec![false; m];
                for &i in &order[..spec.k] {
                    keep[i] = true;
                }
                keep
            })
            .collect(),
        SaeVariant::BatchTopK => {
            let flat: Vec<(usize, f64)> = z.iter().flatten().copied().enumerate().collect();
            let order = sorted_desc(&flat);
            let mut keep = vec![vec![false; m]; z.len()];
            for &f in &order[..spec.k * z.len()] {
                keep[f / m][f % m] = true;
            }
            keep
        }
    }
}

fn reconstruct(p: &FlatSae, codes: &[f64], upto: usize, with_bias: bool) -> Vec<f64> {
    let (_, _, wd, bd) = p.parts();
    (0..p.d_out)
        .map(|r| {
            let mut acc = if with_bias { bd[r] } else { 0.0 };
            for c in 0..upto {
                acc += wd[r * p.m + c] * codes[c];
            }
            acc
        })
        .collect()
}

/// Residual targets `y - x_hat` at the given parameters.
pub fn residuals(p: &FlatSae, spec: &OracleSpec, x: &[Vec<f64>], y: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let z = pre_acts(p, spec, x);
    let keep = select(spec, &z);
    z.iter()
        .zip(&keep)
        .zip(y)
        .map(|((zr, kr), yr)| {
            let codes: Vec<f64> = zr.iter().zip(kr).map(|(&v, &k)| if k { v } else { 0.0 }).collect();
            let xh = reconstruct(p, &codes, p.m, true);
            yr.iter().zip(&xh).map(|(a, b)| a - b).collect()
        })
        .collect()
}

/// Total loss with the auxiliary residual target frozen at `frozen`.
pub fn total_loss(p: &FlatSae, spec: &OracleSpec, x: &[Vec<f64>], y: &[Vec<f64>], frozen: &[Vec<f64>]) -> f64 {
    let b = x.len() as f64;
    let z = pre_acts(p, spec, x);
    let keep = select(spec, &z);
    let prefixes = if spec.prefixes.is_empty() { vec![p.m] } else { spec.prefixes.clone() };
    let w = 1.0 / prefixes.len() as f64;
    let mut loss = 0.0;
    for (row, (zr, kr)) in z.iter().zip(&keep).enumerate() {
        let codes: Vec<f64> = zr.iter().zip(kr).map(|(&v, &k)| if k { v } else { 0.0 }).collect();
        for &pre in &prefixes {
            let xh = reconstruct(p, &codes, pre, true);
            loss += w * xh.iter().zip(&y[row]).map(|(a, t)| (a - t) * (a - t)).sum::<f64>() / b;
        }
        if spec.variant == SaeVariant::Relu {
            loss += spec.l1_coeff * codes.iter().map(|v| v.abs()).sum::<f64>() / b;
        }
        let dead: Vec<(usize, f64)> = (0..p.m).filter(|&i| spec.dead[i]).map(|i| (i, zr[i])).collect();
        let n = spec.aux_k.min(dead.len());
        if n > 0 {
            let order = sorted_desc(&dead);
            let mut aux_codes = vec![0.0; p.m];
            for &i in &order[..n] {
                aux_codes[i] = zr[i];
            }
            let eh = reconstruct(p, &aux_codes, p.m, false);
            loss += spec.aux_coeff * eh.iter().zip(&frozen[row]).map(|(a, t)| (a - t) * (a - t)).sum::<f64>() / b;
        }
    }
    loss
}

/// Central differences of `f` at every coordinate.
pub fn central_differences(params: &[f64], eps: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..params.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + eps;
            let up = f(&p);
            p[i] = orig - eps;
            let down = f(&p);
            p[i] = orig;
            (up - down) / (2.0 * eps)
        })
        .collect()
}

/// Largest relative disagreement, with a floor on the denominator.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Detection metrics oracle.

#[derive(Clone, Debug)]
pub struct OracleDet {
    pub image: usize,
    pub class: usize,
    pub bbox: [f64; 4],
    pub score: f64,
}

#[derive(Clone, Debug)]
pub struct OracleGt {
    pub image: usize,
    pub class: usize,
    pub bbox: [f64; 4],
}

pub fn oracle_iou(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let iw = (a[2].min(b[2]) - a[0].max(b[0])).max(0.0);
    let ih = (a[3].min(b[3]) - a[1].max(b[1])).max(0.0);
    let inter = iw * ih;
    let area = |r: &[f64; 4]| (r[2] - r[0]) * (r[3] - r[1]);
    let union = area(a) + area(b) - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Per-detection TP flags from greedy matching within each image, plus the
/// order in which detections enter the global PR sweep.
fn oracle_matches(dets: &[OracleDet], gts: &[OracleGt], class: usize, thr: f64, per_image_cap: Option<usize>) -> (Vec<(f64, bool)>, usize) {
    let n_gt = gts.iter().filter(|g| g.class == class).count();
    let images: std::collections::BTreeSet<usize> = dets.iter().map(|d| d.image).chain(gts.iter().map(|g| g.image)).collect();
    let mut scored = Vec::new();
    for img in images {
        let mut ds: Vec<&OracleDet> = dets.iter().filter(|d| d.image == img && d.class == class).collect();
        ds.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap());
        if let Some(cap) = per_image_cap {
            ds.truncate(cap);
        }
        let gs: Vec<&OracleGt> = gts.iter().filter(|g| g.image == img && g.class == class).collect();
        let mut used = vec![false; gs.len()];
        for d in ds {
            let mut best: Option<(usize, f64)> = None;
            for (gi, g) in gs.iter().enumerate() {
                if used[gi] {
                    continue;
                }
                let v = oracle_iou(&d.bbox, &g.bbox);
                if v >= thr && best.is_none_or(|(_, bv)| v > bv) {
                    best = Some((gi, v));
                }
            }
            if let Some((gi, _)) = best {
                used[gi] = true;
            }
            scored.push((d.score, best.is_some()));
        }
    }
    (scored, n_gt)
}

/// 101-point interpolated AP: for every recall level, the best precision
/// among all operating points reaching that recall.
pub fn oracle_ap(dets: &[OracleDet], gts: &[OracleGt], class: usize, thr: f64) -> Option<f64> {
    let (mut scored, n_gt) = oracle_matches(dets, gts, class, thr, None);
    if n_gt == 0 {
        return None;
    }
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut points = Vec::new();
    let (mut tp, mut fp) = (0.0, 0.0);
    for (_, hit) in &scored {
        if *hit {
            tp += 1.0;
        } else {
            fp += 1.0;
        }
        points.push((tp / n_gt as f64, tp / (tp + fp)));
    }
    let mut sum = 0.0;
    for i in 0..=100 {
        let r = i as f64 / 100.0;
        let best = points.iter().filter(|(rc, _)| *rc >= r).map(|(_, p)| *p).fold(0.0, f64::max);
        sum += best;
    }
    Some(sum / 101.0)
}

pub fn oracle_recall(dets: &[OracleDet], gts: &[OracleGt], class: usize, thr: f64, max_dets: usize) -> Option<f64> {
    let (scored, n_gt) = oracle_matches(dets, gts, class, thr, Some(max_dets));
    if n_gt == 0 {
        return None;
    }
    Some(scored.iter().filter(|s| s.1).count() as f64 / n_gt as f64)
}

/// (AP, AP50, AR) averaged over classes with ground truth, then thresholds.
pub fn oracle_metrics(dets: &[OracleDet], gts: &[OracleGt], n_classes: usize, max_dets: usize) -> (f64, f64, f64) {
    let thresholds: Vec<f64> = (0..10).map(|i| 0.5 + 0.05 * i as f64).collect();
    let mean = |v: Vec<f64>| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    let per_thr = |t: f64, f: &dyn Fn(usize, f64) -> Option<f64>| mean((0..n_classes).filter_map(|c| f(c, t)).collect());
    let ap = mean(thresholds.iter().map(|&t| per_thr(t, &|c, t| oracle_ap(dets, gts, c, t))).collect());
    let ap50 = per_thr(0.5, &|c, t| oracle_ap(dets, gts, c, t));
    let ar = mean(thresholds.iter().map(|&t| per_thr(t, &|c, t| oracle_recall(dets, gts, c, t, max_dets))).collect());
    (ap, ap50, ar)
}

/// Random detection instance: up to 20 images, up to 50 boxes per image
/// split between ground truth and detections. Detections are mostly jittered
/// copies of ground-truth boxes so that every IoU threshold matters.
pub fn random_instance(rng: &mut impl rand::Rng) -> (Vec<OracleDet>, Vec<OracleGt>, usize) {
    let n_classes = rng.random_range(1..=4);
    let n_images = rng.random_range(1..=20);
    let mut dets = Vec::new();
    let mut gts = Vec::new();
    for image in 0..n_images {
        let n_gt = rng.random_range(0..=15);
        let n_det = rng.random_range(0..=(50 - n_gt).min(35));
        let mut local = Vec::new();
        for _ in 0..n_gt {
            let x = rng.random_range(0.0..80.0);
            let y = rng.random_range(0.0..80.0);
            let w = rng.random_range(2.0..20.0);
            let h = rng.random_range(2.0..20.0);
            let g = OracleGt {
                image,
                class: rng.random_range(0..n_classes),
                bbox: [x, y, x + w, y + h],
            };
            local.push(g.clone());
            gts.push(g);
        }
        for _ in 0..n_det {
            let (class, bbox) = if !local.is_empty() && rng.random_bool(0.7) {
                let g = &local[rng.random_range(0..local.len())];
                let w = g.bbox[2] - g.bbox[0];
                let h = g.bbox[3] - g.bbox[1];
                let j = rng.random_range(0.0..0.3);
                let dx = rng.random_range(-j..=j) * w;
                let dy = rng.random_range(-j..=j) * h;
                let class = if rng.random_bool(0.85) { g.class } else { rng.random_range(0..n_classes) };
                (class, [g.bbox[0] + dx, g.bbox[1] + dy, g.bbox[2] + dx, g.bbox[3] + dy])
            } else {
                let x = rng.random_range(0.0..80.0);
                let y = rng.random_range(0.0..80.0);
                (rng.random_range(0..n_classes), [x, y, x + rng.random_range(2.0..20.0), y + rng.random_range(2.0..20.0)])
            };
            dets.push(OracleDet {
                image,
                class,
                bbox,
                score: rng.random_range(0.0..1.0),
            });
        }
    }
    if gts.is_empty() {
        gts.push(OracleGt {
            image: 0,
            class: 0,
            bbox: [0.0, 0.0, 10.0, 10.0],
        });
    }
    (dets, gts, n_classes)
}

/// The same instance in library types. Image `i` becomes sample `img{i:02}`
/// so that lexical and numeric image order agree.
pub fn to_library(
    dets: &[OracleDet],
    gts: &[OracleGt],
    n_classes: usize,
) -> (Vec<strata::eval::MappedDetection>, Vec<strata::eval::GroundTruth>, Vec<String>) {
    let classes: Vec<String> = (0..n_classes).map(|c| format!("class{c}")).collect();
    let mapped = dets
        .iter()
        .map(|d| strata::eval::MappedDetection {
            sample_id: format!("img{:02}", d.image),
            bbox: d.bbox,
            text: classes[d.class].clone(),
            class: Some(d.class),
            label: Some(classes[d.class].clone()),
            score: d.score,
            similarity: None,
            provenance: strata::eval::Provenance::Kept,
            confidence_imputed: false,
        })
        .collect();
    let truth = gts
        .iter()
        .map(|g| strata::eval::GroundTruth {
            sample_id: format!("img{:02}", g.image),
            bbox: g.bbox,
            label: classes[g.class].clone(),
        })
        .collect();
    (mapped, truth, classes)
}

/// Mean cross-entropy of a linear probe with flat row-major `w` (`k × d`).
pub fn oracle_cross_entropy(w: &[f64], b: &[f64], x: &[Vec<f64>], y: &[usize]) -> f64 {
    let k = b.len();
    let d = x[0].len();
    let mut total = 0.0;
    for (row, &label) in x.iter().zip(y) {
        let logits: Vec<f64> = (0..k).map(|c| b[c] + (0..d).map(|j| w[c * d + j] * row[j]).sum::<f64>()).collect();
        let z: f64 = logits.iter().map(|l| l.exp()).sum();
        total += -(logits[label].exp() / z).ln();
    }
    total / x.len() as f64
}

/// Mean over rows of the smooth L1 loss summed over four outputs.
pub fn oracle_smooth_l1(w: &[f64], b: &[f64], x: &[Vec<f64>], boxes: &[[f64; 4]], beta: f64) -> f64 {
    let d = x[0].len();
    let mut total = 0.0;
    for (row, target) in x.iter().zip(boxes) {
        for c in 0..4 {
            let out = b[c] + (0..d).map(|j| w[c * d + j] * row[j]).sum::<f64>();
            let u = (out - target[c]).abs();
            total += if u < beta { 0.5 * u * u / beta } else { u - 0.5 * beta };
        }
    }
    total / x.len() as f64
}

/// Brute-force top-n per latent: collect every positive activation, sort by
/// (activation desc, sample asc, token asc), truncate.
pub fn oracle_top_n(rows: &[(String, u32, Vec<f64>)], m: usize, n: usize) -> Vec<Vec<(String, u32, f64)>> {
    let mut all: Vec<Vec<(String, u32, f64)>> = vec![Vec::new(); m];
    for (sample, token, code) in rows {
        for (i, &a) in code.iter().enumerate() {
            if a > 0.0 {
                all[i].push((sample.clone(), *token, a));
            }
        }
    }
    for list in &mut all {
        list.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap().then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
        list.truncate(n);
    }
    all
}

/// Sparse random codes with deliberate ties: activations are drawn from a
/// small grid so equal values across records are common.
pub fn random_codes(rng: &mut impl rand::Rng, rows: usize, m: usize, active: usize) -> Vec<(String, u32, Vec<f64>)> {
    (0..rows)
        .map(|r| {
            let mut code = vec![0.0; m];
            for _ in 0..active {
                code[rng.random_range(0..m)] = rng.random_range(1..50) as f64 / 10.0;
            }
            (format!("img{:05}", r / 4), (r % 4) as u32, code)
        })
        .collect()
}
