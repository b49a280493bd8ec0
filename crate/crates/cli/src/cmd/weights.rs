use std::path::PathBuf;

use clap::Args;
use clvr_core::merge::{apply_merge, delta, expand_lora, merge_report, relative_frobenius, KeyMode, LoraAdapter};
use serde_json::json;

use super::num;
use crate::error::CliError;
use crate::io::{read_checkpoint, write_checkpoint};
use crate::{Ctx, Done};

fn key_mode(lenient: bool) -> KeyMode {
    if lenient {
        KeyMode::Lenient
    } else {
        KeyMode::Strict
    }
}

#[derive(Debug, Args)]
pub struct MergeArgs {
    #[arg(long)]
    base: PathBuf,
    /// Delta checkpoint to add; repeatable.
    #[arg(long)]
    delta: Vec<PathBuf>,
    /// Fine-tuned checkpoint whose difference from the base is added; repeatable.
    #[arg(long)]
    ckpt: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Skip tensor names missing on either side instead of failing.
    #[arg(long)]
    lenient: bool,
}

pub fn merge(a: MergeArgs, ctx: &mut Ctx) -> Result<Done, CliError> {
    if a.delta.is_empty() && a.ckpt.is_empty() {
        return Err(CliError::usage("merge needs at least one --delta or --ckpt"));
    }
    let mode = key_mode(a.lenient);
    ctx.inputs.param("lenient", a.lenient);
    let base = read_checkpoint(&a.base, "base", &mut ctx.inputs)?;
    let mut deltas = Vec::new();
    let mut skipped = Vec::new();
    for p in &a.delta {
        deltas.push(read_checkpoint(p, "delta", &mut ctx.inputs)?);
    }
    for p in &a.ckpt {
        let ckpt = read_checkpoint(p, "ckpt", &mut ctx.inputs)?;
        let d = delta(&ckpt, &base, mode)?;
        skipped.extend(d.skipped);
        deltas.push(d.map);
    }
    let fused = apply_merge(&base, &deltas, mode)?;
    skipped.extend(fused.skipped);
    write_checkpoint(&a.out, &fused.map)?;
    let shift = relative_frobenius(&base, &fused.map)?;
    Ok(Done {
        text: format!("tensors {}\ndeltas {}\nskipped {}\nrelative_shift {}", fused.map.len(), deltas.len(), skipped.len(), num(shift)),
        results: json!({ "tensors": fused.map.len(), "deltas": deltas.len(), "skipped": skipped, "relative_shift": shift }),
    })
}

#[derive(Debug, Args)]
pub struct LoraArgs {
    /// Checkpoint holding `{target}.lora_A` and `{target}.lora_B`.
    #[arg(long)]
    adapter: PathBuf,
    #[arg(long)]
    target: String,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    rank: usize,
    /// Check the target's shape against this base.
    #[arg(long)]
    base: Option<PathBuf>,
    /// Write the dense delta here.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn lora_expand(a: LoraArgs, ctx: &mut Ctx) -> Result<Done, CliError> {
    ctx.inputs.param("lora", (&a.target, a.alpha, a.rank));
    let map = read_checkpoint(&a.adapter, "adapter", &mut ctx.inputs)?;
    let base = a.base.as_ref().map(|p| read_checkpoint(p, "base", &mut ctx.inputs)).transpose()?;
    let adapter = LoraAdapter::from_map(&map, &a.target, a.alpha, a.rank)?;
    let expanded = expand_lora(&adapter, base.as_ref())?;
    if let Some(p) = &a.out {
        write_checkpoint(p, &expanded)?;
    }
    let t = expanded.get(&a.target).expect("expansion names its target");
    let norm = t.frobenius();
    let relative = match &base {
        Some(b) => Some(norm / b.get(&a.target).expect("checked by expand_lora").frobenius()),
        None => None,
    };
    let mut text = format!("target {}\nshape {:?}\nfrobenius {}", a.target, t.shape(), num(norm));
    if let Some(r) = relative {
        text.push_str(&format!("\nrelative_to_base {}", num(r)));
    }
    Ok(Done {
        text,
        results: json!({ "target": a.target, "shape": t.shape(), "frobenius": norm, "relative_to_base": relative }),
    })
}

#[derive(Debug, Args)]
pub struct NormArgs {
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    other: PathBuf,
    /// Print one line per tensor as well.
    #[arg(long)]
    per_tensor: bool,
}

pub fn norm(a: NormArgs, ctx: &mut Ctx) -> Result<Done, CliError> {
    let reference = read_checkpoint(&a.reference, "ref", &mut ctx.inputs)?;
    let other = read_checkpoint(&a.other, "other", &mut ctx.inputs)?;
    let rel = relative_frobenius(&reference, &other)?;
    let d = delta(&other, &reference, KeyMode::Strict)?;
    let report = merge_report(&reference, &d.map, KeyMode::Strict)?;
    let mut text = format!("relative_frobenius {}", num(rel));
    if a.per_tensor {
        for (name, n) in &report.per_tensor {
            let r = if n.base_frobenius > 0.0 { n.delta_frobenius / n.base_frobenius } else { f64::INFINITY };
            text.push_str(&format!("\n{name}\t{}\t{}", num(n.delta_frobenius), num(r)));
        }
    }
    Ok(Done { text, results: json!({ "relative_frobenius": rel, "per_tensor": report.per_tensor }) })
}
