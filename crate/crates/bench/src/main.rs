//! `rdh`: embed, extract, verify and payload-distortion sweeps.

mod failure;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;
use serde::Serialize;

use rdh_core::codec::{key_fingerprint, BitStream};
use rdh_core::image::{distortion, load_pgm, save_pgm, GrayImage};
use rdh_core::plan::PlanPolicy;
use rdh_core::sweep::{run_sweep, SweepConfig};
use rdh_core::synthetic::{generate, ImageClass};
use rdh_core::{extract_all, multi_layer_embed, CodecConfig, Embedded};

use failure::{Failure, Kind};

#[derive(Parser, Debug)]
#[command(name = "rdh", version, about = "Reversible data hiding in 8-bit PGM images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug, Clone)]
struct CodecArgs {
    /// Shift bound T.
    #[arg(long = "T", default_value_t = 2)]
    bound: u32,
    /// Number of peak bins.
    #[arg(long = "m", default_value_t = 2)]
    peaks: usize,
    /// Plan search policy: heuristic-g0, exhaustive or traditional.
    #[arg(long, default_value = "heuristic-g0")]
    policy: PlanPolicy,
    #[arg(long, default_value_t = 4096)]
    payload_step: usize,
    #[arg(long, default_value_t = 8)]
    max_layers: usize,
    /// Return the optimized path even when the fixed-step path distorts less.
    #[arg(long)]
    no_baseline_guard: bool,
}

impl CodecArgs {
    fn config(&self, key: u64) -> CodecConfig {
        CodecConfig {
            bound: self.bound,
            peaks: self.peaks,
            payload_step: self.payload_step,
            key,
            max_layers: self.max_layers,
            policy: self.policy,
            baseline_guard: !self.no_baseline_guard,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Hide a message file in a PGM image.
    Embed {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        msg: PathBuf,
        #[arg(long, default_value_t = 0)]
        key: u64,
        /// Metadata file; defaults to `<out>.json`.
        #[arg(long)]
        sidecar: Option<PathBuf>,
        #[command(flatten)]
        codec: CodecArgs,
    },
    /// Recover the original image and the message.
    Extract {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out_img: PathBuf,
        #[arg(long)]
        out_msg: PathBuf,
        #[arg(long, default_value_t = 0)]
        key: u64,
    },
    /// Check that a marked image restores to the original and message.
    Verify {
        #[arg(long)]
        original: PathBuf,
        #[arg(long)]
        marked: PathBuf,
        #[arg(long)]
        msg: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        key: u64,
    },
    /// Compare optimized and fixed-step embedding over a payload grid.
    Sweep {
        /// PGM inputs; the image id is the file stem.
        #[arg(long = "in", num_args = 1..)]
        inputs: Vec<PathBuf>,
        /// Synthetic classes to add: flat, gradient, noise, natural.
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        synthetic: Vec<ImageClass>,
        /// Side of the synthetic images.
        #[arg(long, default_value_t = 128)]
        size: usize,
        #[arg(long, num_args = 1.., required = true)]
        bpp: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        key: u64,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Write 0 in the timing column so the CSV is reproducible.
        #[arg(long)]
        deterministic: bool,
        #[command(flatten)]
        codec: CodecArgs,
    },
    /// Write a synthetic test image.
    Generate {
        #[arg(long)]
        class: ImageClass,
        #[arg(long, default_value_t = 128)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Serialize)]
struct StageMeta {
    stage: usize,
    layer: usize,
    pass: u8,
    message_bits: usize,
    displaced_bits: usize,
    aux_bits: usize,
    site_sse: u64,
    plan: String,
}

#[derive(Serialize)]
struct Sidecar {
    key_fingerprint: String,
    width: usize,
    height: usize,
    message_bits: usize,
    layers: usize,
    shift_bound: u32,
    peaks: usize,
    policy: &'static str,
    baseline_path: bool,
    mse: f64,
    /// Absent when the image is unchanged.
    psnr_db: Option<f64>,
    stages: Vec<StageMeta>,
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::io(&path.display().to_string(), e))
}

fn write(path: &Path, data: impl AsRef<[u8]>) -> Result<(), Failure> {
    fs::write(path, data).map_err(|e| Failure::io(&path.display().to_string(), e))
}

fn sidecar(original: &GrayImage, out: &Embedded, config: &CodecConfig, bits: usize) -> Sidecar {
    let d = distortion(original, &out.marked.image).expect("same dimensions");
    Sidecar {
        key_fingerprint: format!("{:016x}", key_fingerprint(config.key)),
        width: original.width(),
        height: original.height(),
        message_bits: bits,
        layers: out.marked.layers,
        shift_bound: config.bound,
        peaks: config.peaks,
        policy: config.policy.name(),
        baseline_path: out.baseline_path,
        mse: d.mse(),
        psnr_db: d.psnr().is_finite().then(|| d.psnr()),
        stages: out
            .stages
            .iter()
            .map(|r| StageMeta {
                stage: r.stage,
                layer: r.layer(),
                pass: r.pass(),
                message_bits: r.message_bits,
                displaced_bits: r.displaced_bits,
                aux_bits: r.aux_bits,
                site_sse: r.site_sse,
                plan: r.plan.summary(),
            })
            .collect(),
    }
}

fn embed(
    input: &Path,
    out: &Path,
    msg: &Path,
    key: u64,
    sidecar_path: Option<PathBuf>,
    codec: &CodecArgs,
) -> Result<(), Failure> {
    let img = load_pgm(input)?;
    let message = BitStream::from_bytes(&read(msg)?).into_bits();
    let config = codec.config(key);
    let result = multi_layer_embed(&img, &message, &config)?;
    save_pgm(&result.marked.image, out)?;
    let meta = sidecar(&img, &result, &config, message.len());
    let json = serde_json::to_string_pretty(&meta).expect("sidecar serializes");
    let path = sidecar_path.unwrap_or_else(|| {
        let mut p = out.as_os_str().to_owned();
        p.push(".json");
        PathBuf::from(p)
    });
    write(&path, json + "\n")?;
    println!(
        "embedded {} bits in {} layers, mse {:.4}",
        message.len(),
        result.marked.layers,
        meta.mse
    );
    Ok(())
}

fn extract(input: &Path, out_img: &Path, out_msg: &Path, key: u64) -> Result<(), Failure> {
    let marked = load_pgm(input)?;
    let (original, bits) = extract_all(&marked, key)?;
    save_pgm(&original, out_img)?;
    write(out_msg, BitStream::from_bits(bits.clone()).to_bytes())?;
    println!("extracted {} bits", bits.len());
    Ok(())
}

fn verify(original: &Path, marked: &Path, msg: Option<&Path>, key: u64) -> Result<(), Failure> {
    let original = load_pgm(original)?;
    let (restored, bits) = extract_all(&load_pgm(marked)?, key)?;
    if restored != original {
        return Err(Failure::new(Kind::Mismatch, "restored image differs from the original"));
    }
    if let Some(msg) = msg {
        if BitStream::from_bytes(&read(msg)?).into_bits() != bits {
            return Err(Failure::new(Kind::Mismatch, "extracted message differs"));
        }
    }
    println!("ok: image restored bit-exactly, {} message bits", bits.len());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn sweep(
    inputs: &[PathBuf],
    synthetic: &[ImageClass],
    size: usize,
    bpp: Vec<f64>,
    seed: u64,
    key: u64,
    csv: Option<&Path>,
    svg: Option<&Path>,
    deterministic: bool,
    codec: &CodecArgs,
) -> Result<(), Failure> {
    let mut images = Vec::new();
    for path in inputs {
        let id = path
            .file_stem()
            .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
        images.push((id, load_pgm(path)?));
    }
    for &class in synthetic {
        images.push((class.name().to_string(), generate(class, size, size, seed)));
    }
    if images.is_empty() {
        return Err(Failure::new(Kind::Other, "no inputs: pass --in or --synthetic"));
    }
    let config = SweepConfig {
        bpp,
        seed,
        codec: codec.config(key),
        deterministic,
        ..SweepConfig::default()
    };
    info!("sweeping {} images x {} payloads", images.len(), config.bpp.len());
    let result = run_sweep(&images, &config);
    match csv {
        Some(path) => {
            let file = fs::File::create(path).map_err(|e| Failure::io(&path.display().to_string(), e))?;
            result
                .write_csv(file)
                .map_err(|e| Failure::io(&path.display().to_string(), e))?;
        }
        None => print!("{}", result.to_csv_string()),
    }
    if let Some(path) = svg {
        write(path, result.to_svg())?;
    }
    let report = result.dominance();
    eprintln!(
        "dominance: {} cells compared, {} violations, {} kept the fixed-step path, strict multi-layer gains on [{}]",
        report.compared,
        report.violations.len(),
        report.baseline_paths,
        report.strict_multilayer.join(", ")
    );
    for v in &report.violations {
        eprintln!(
            "violation: {} at {} bpp: optimized {:.6} > traditional {:.6}",
            v.image, v.bpp, v.optimized, v.traditional
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Embed {
            input,
            out,
            msg,
            key,
            sidecar,
            codec,
        } => embed(&input, &out, &msg, key, sidecar, &codec),
        Command::Extract {
            input,
            out_img,
            out_msg,
            key,
        } => extract(&input, &out_img, &out_msg, key),
        Command::Verify {
            original,
            marked,
            msg,
            key,
        } => verify(&original, &marked, msg.as_deref(), key),
        Command::Sweep {
            inputs,
            synthetic,
            size,
            bpp,
            seed,
            key,
            csv,
            svg,
            deterministic,
            codec,
        } => sweep(
            &inputs,
            &synthetic,
            size,
            bpp,
            seed,
            key,
            csv.as_deref(),
            svg.as_deref(),
            deterministic,
            &codec,
        ),
        Command::Generate {
            class,
            size,
            seed,
            out,
        } => {
            save_pgm(&generate(class, size, size, seed), &out)?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{f}");
            ExitCode::from(f.kind.code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn upper_case_bound_flag() {
        let cli = Cli::try_parse_from([
            "rdh", "embed", "--in", "a", "--out", "b", "--msg", "c", "--T", "1", "--m", "2",
            "--policy", "exhaustive",
        ])
        .unwrap();
        let Command::Embed { codec, .. } = cli.command else {
            panic!("expected embed");
        };
        assert_eq!((codec.bound, codec.peaks, codec.policy), (1, 2, PlanPolicy::Exhaustive));
        assert!(codec.config(3).baseline_guard);
    }
}
