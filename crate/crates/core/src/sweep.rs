//! Payload-distortion sweeps comparing optimized plans with the fixed-step
//! baseline.
//!
//! Every cell `(image, bpp, method)` embeds a pseudorandom message derived
//! from the seed, the image position and the payload position, so both
//! methods of a cell carry the same bits. Cells run in parallel; rows come
//! back in grid order.

use std::fmt::{self, Write as _};
use std::io;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::codec::{multi_layer_embed, CodecConfig};
use crate::image::{distortion, GrayImage};
use crate::plan::PlanPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Optimized,
    Traditional,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::Optimized, Method::Traditional];

    pub fn name(self) -> &'static str {
        match self {
            Method::Optimized => "optimized",
            Method::Traditional => "traditional",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "optimized" => Ok(Method::Optimized),
            "traditional" => Ok(Method::Traditional),
            other => Err(format!("unknown method `{other}`")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub bpp: Vec<f64>,
    pub methods: Vec<Method>,
    pub seed: u64,
    /// Codec settings; `policy` applies to the optimized method only.
    pub codec: CodecConfig,
    /// Zero the timing column so the CSV is reproducible byte for byte.
    pub deterministic: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            bpp: vec![0.1, 0.2, 0.4],
            methods: Method::ALL.to_vec(),
            seed: 0,
            codec: CodecConfig::default(),
            deterministic: false,
        }
    }
}

/// One CSV row. `error` is set when the cell failed; its metrics are then
/// meaningless and left at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub image: String,
    pub method: Method,
    pub bpp: f64,
    pub layers: usize,
    pub mse: f64,
    pub psnr_db: f64,
    pub ms: u64,
    pub plan: String,
    /// The optimized encoder kept the fixed-step path.
    pub baseline_path: bool,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }
}

/// A pair of successful cells where the optimized MSE exceeds the baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub image: String,
    pub bpp: f64,
    pub optimized: f64,
    pub traditional: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DominanceReport {
    /// Cells where both methods succeeded.
    pub compared: usize,
    pub violations: Vec<Violation>,
    /// Images with a strict improvement in a cell that used two or more
    /// layers under either method.
    pub strict_multilayer: Vec<String>,
    /// Compared cells where the optimized encoder kept the fixed-step path.
    pub baseline_paths: usize,
}

impl DominanceReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

pub const CSV_HEADER: [&str; 8] = ["image", "method", "bpp", "layers", "mse", "psnr_db", "ms", "plan"];

/// Bits carried at `bpp` by a `width x height` image.
pub fn payload_bits(bpp: f64, width: usize, height: usize) -> usize {
    (bpp * (width * height) as f64).round() as usize
}

fn cell_message(seed: u64, image: usize, bpp: usize, len: usize) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((image as u64) << 32) | bpp as u64);
    (0..len).map(|_| rng.random()).collect()
}

fn run_cell(
    id: &str,
    img: &GrayImage,
    bpp: f64,
    method: Method,
    message: &[bool],
    config: &SweepConfig,
) -> SweepRow {
    let mut row = SweepRow {
        image: id.to_string(),
        method,
        bpp,
        layers: 0,
        mse: 0.0,
        psnr_db: f64::INFINITY,
        ms: 0,
        plan: String::new(),
        baseline_path: false,
        error: None,
    };
    if message.is_empty() {
        return row;
    }
    let codec = CodecConfig {
        policy: match method {
            Method::Optimized => config.codec.policy,
            Method::Traditional => PlanPolicy::Traditional,
        },
        ..config.codec.clone()
    };
    let start = Instant::now();
    let result = multi_layer_embed(img, message, &codec);
    if !config.deterministic {
        row.ms = start.elapsed().as_millis() as u64;
    }
    match result {
        Ok(out) => {
            let d = distortion(img, &out.marked.image).expect("same dimensions");
            row.layers = out.marked.layers;
            row.baseline_path = out.baseline_path;
            row.mse = d.mse();
            row.psnr_db = d.psnr();
            row.plan = out
                .stages
                .iter()
                .map(|r| format!("s{}:{}", r.stage, r.plan.summary()))
                .collect::<Vec<_>>()
                .join(" ; ");
        }
        Err(e) => {
            row.psnr_db = 0.0;
            row.error = Some(e.to_string());
        }
    }
    row
}

/// Runs every `(image, bpp, method)` cell; failures become rows with
/// `error` set.
pub fn run_sweep(images: &[(String, GrayImage)], config: &SweepConfig) -> SweepResult {
    let cells: Vec<(usize, usize, Method)> = (0..images.len())
        .flat_map(|i| {
            (0..config.bpp.len())
                .flat_map(move |b| config.methods.iter().map(move |&m| (i, b, m)))
        })
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(i, b, method)| {
            let (id, img) = &images[i];
            let bpp = config.bpp[b];
            let len = payload_bits(bpp, img.width(), img.height());
            let message = cell_message(config.seed, i, b, len);
            run_cell(id, img, bpp, method, &message, config)
        })
        .collect();
    SweepResult { rows }
}

impl SweepResult {
    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for r in &self.rows {
            let plan = match &r.error {
                Some(e) => format!("error: {e}"),
                None if r.baseline_path => format!("[baseline path] {}", r.plan),
                None => r.plan.clone(),
            };
            w.write_record([
                r.image.clone(),
                r.method.to_string(),
                format!("{}", r.bpp),
                r.layers.to_string(),
                format!("{:.6}", r.mse),
                format_psnr(r.psnr_db),
                r.ms.to_string(),
                plan,
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    fn find(&self, image: &str, bpp: f64, method: Method) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.image == image && r.bpp == bpp && r.method == method)
    }

    /// Compares the two methods cell by cell.
    pub fn dominance(&self) -> DominanceReport {
        let mut report = DominanceReport::default();
        for opt in self.rows.iter().filter(|r| r.method == Method::Optimized) {
            let Some(trad) = self.find(&opt.image, opt.bpp, Method::Traditional) else {
                continue;
            };
            if !opt.succeeded() || !trad.succeeded() {
                continue;
            }
            report.compared += 1;
            report.baseline_paths += usize::from(opt.baseline_path);
            if opt.mse > trad.mse {
                report.violations.push(Violation {
                    image: opt.image.clone(),
                    bpp: opt.bpp,
                    optimized: opt.mse,
                    traditional: trad.mse,
                });
            } else if opt.mse < trad.mse
                && opt.layers.max(trad.layers) >= 2
                && !report.strict_multilayer.contains(&opt.image)
            {
                report.strict_multilayer.push(opt.image.clone());
            }
        }
        report
    }

    /// Minimal SVG line chart: payload on x, MSE on y, one series per
    /// image and method. Failed cells are skipped.
    pub fn to_svg(&self) -> String {
        const W: f64 = 640.0;
        const H: f64 = 400.0;
        const PAD: f64 = 50.0;
        const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
        let ok: Vec<&SweepRow> = self.rows.iter().filter(|r| r.succeeded()).collect();
        let max_x = ok.iter().map(|r| r.bpp).fold(0.0, f64::max).max(1e-9);
        let max_y = ok.iter().map(|r| r.mse).fold(0.0, f64::max).max(1e-9);
        let sx = |x: f64| PAD + x / max_x * (W - 2.0 * PAD);
        let sy = |y: f64| H - PAD - y / max_y * (H - 2.0 * PAD);

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<path d="M{PAD},{PAD} V{} H{}" fill="none" stroke="black"/>"#,
            H - PAD,
            W - PAD
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">payload (bpp), max {max_x}</text>"#,
            W / 2.0,
            H - 15.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="15" y="{}" transform="rotate(-90 15 {})" text-anchor="middle">MSE, max {max_y:.4}</text>"#,
            H / 2.0,
            H / 2.0
        );

        let mut images: Vec<&str> = Vec::new();
        for r in &ok {
            if !images.contains(&r.image.as_str()) {
                images.push(&r.image);
            }
        }
        let mut legend_y = PAD;
        for (i, image) in images.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            for method in Method::ALL {
                let mut pts: Vec<(f64, f64)> = ok
                    .iter()
                    .filter(|r| r.image == *image && r.method == method)
                    .map(|r| (r.bpp, r.mse))
                    .collect();
                if pts.is_empty() {
                    continue;
                }
                pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                let coords: Vec<String> = pts
                    .iter()
                    .map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y)))
                    .collect();
                let dash = match method {
                    Method::Optimized => "",
                    Method::Traditional => r#" stroke-dasharray="5,4""#,
                };
                let _ = writeln!(
                    svg,
                    r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#,
                    coords.join(" ")
                );
                let _ = writeln!(
                    svg,
                    r#"<text x="{}" y="{legend_y}" fill="{color}">{image} {method}</text>"#,
                    W - PAD - 150.0
                );
                legend_y += 14.0;
            }
        }
        svg.push_str("</svg>\n");
        svg
    }
}

fn format_psnr(p: f64) -> String {
    if p.is_infinite() {
        "inf".to_string()
    } else {
        format!("{p:.4}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{generate, ImageClass};

    fn images(n: usize) -> Vec<(String, GrayImage)> {
        [ImageClass::Flat, ImageClass::Natural]
            .into_iter()
            .take(n)
            .map(|c| (c.name().to_string(), generate(c, 64, 64, 1)))
            .collect()
    }

    fn config(bpp: Vec<f64>) -> SweepConfig {
        SweepConfig {
            bpp,
            seed: 7,
            deterministic: true,
            codec: CodecConfig {
                payload_step: 256,
                ..CodecConfig::default()
            },
            ..SweepConfig::default()
        }
    }

    #[test]
    fn zero_payload_is_lossless() {
        let res = run_sweep(&images(1), &config(vec![0.0]));
        assert_eq!(res.rows.len(), 2);
        for r in &res.rows {
            assert!(r.succeeded());
            assert_eq!((r.mse, r.layers), (0.0, 0));
        }
        assert!(res.to_csv_string().contains(",inf,"));
    }

    #[test]
    fn row_count_and_order() {
        let res = run_sweep(&images(2), &config(vec![0.1, 0.2, 0.4]));
        assert_eq!(res.rows.len(), 12);
        let order: Vec<(&str, f64, Method)> = res
            .rows
            .iter()
            .map(|r| (r.image.as_str(), r.bpp, r.method))
            .collect();
        assert_eq!(order[0], ("flat", 0.1, Method::Optimized));
        assert_eq!(order[1], ("flat", 0.1, Method::Traditional));
        assert_eq!(order[11], ("natural", 0.4, Method::Traditional));
    }

    #[test]
    fn csv_is_deterministic() {
        let a = run_sweep(&images(1), &config(vec![0.05, 0.2]));
        let b = run_sweep(&images(1), &config(vec![0.05, 0.2]));
        let csv = a.to_csv_string();
        assert_eq!(csv, b.to_csv_string());
        assert!(csv.starts_with("image,method,bpp,layers,mse,psnr_db,ms,plan\n"));
    }

    #[test]
    fn flat_image_dominance() {
        let res = run_sweep(&images(1), &config(vec![0.1, 0.3]));
        let report = res.dominance();
        assert_eq!(report.compared, 2);
        assert!(report.holds(), "{:?}", report.violations);
    }

    #[test]
    fn failures_are_recorded() {
        let res = run_sweep(&images(1), &config(vec![8.0]));
        assert!(res.rows.iter().all(|r| !r.succeeded()));
        assert!(res.to_csv_string().contains("error: "));
        assert_eq!(res.dominance().compared, 0);
    }

    #[test]
    fn svg_has_one_series_per_image_and_method() {
        let res = run_sweep(&images(2), &config(vec![0.05, 0.1]));
        let svg = res.to_svg();
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 4);
    }

    #[test]
    fn payload_rounding() {
        assert_eq!(payload_bits(0.1, 64, 64), 410);
        assert_eq!(payload_bits(0.0, 64, 64), 0);
    }
}
