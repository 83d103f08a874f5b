use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::args::{Command, Mode, ModelArgs, SlicArgs};
use anyhow::{bail, Context, Result};
use onfire_core::arch::{format_variant_table, group_digits, variant_table, Family};
use onfire_core::image::{load_ppm, save_pgm, save_ppm, RgbImage};
use onfire_core::pipeline::{bench, classify_frame, evaluate, frame_sources, BenchMode, DatasetLayout};
use onfire_core::preprocess::Preprocess;
use onfire_core::prune::prune_final_conv;
use onfire_core::superpixel::{localize_fire, SlicParams};
use onfire_core::synthetic::synthetic_frames;
use onfire_core::train::{curve_csv, extract_features, finetune_head, TrainConfig};
use onfire_core::weights::{load_weights, save_weights};
use onfire_core::{Architecture, ModelGraph};

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Classify {
            inputs,
            model,
            threshold,
            out,
        } => classify(&inputs, &model, threshold, out.as_deref()),
        Command::Localize {
            inputs,
            model,
            threshold,
            slic,
            out,
        } => localize(&inputs, &model, threshold, &slic, &out),
        Command::Eval {
            dataset,
            model,
            threshold,
            out,
        } => eval(&dataset, &model, threshold, out.as_deref()),
        Command::Bench {
            inputs,
            model,
            mode,
            frames,
            warmup,
            slic,
        } => run_bench(&inputs, &model, mode, frames, warmup, &slic),
        Command::Prune { model, filters, out } => prune(&model, filters, out.as_deref()),
        Command::FinetuneHead {
            dataset,
            model,
            lr,
            epochs,
            batch_size,
            out,
            curve,
        } => {
            let cfg = TrainConfig {
                lr,
                epochs,
                batch_size,
                seed: model.seed,
            };
            finetune(&dataset, &model, cfg, &out, curve.as_deref())
        }
        Command::Params { arch, breakdown } => params(arch, breakdown),
        Command::Variants { family } => variants(family),
        Command::Init { arch, seed, out } => {
            let m = ModelGraph::random(arch, seed)?;
            write_weights(&out, &m)?;
            println!("wrote {} ({} parameters) to {}", arch, m.param_count(), out.display());
            Ok(())
        }
    }
}

fn load_model(args: &ModelArgs) -> Result<ModelGraph> {
    match &args.weights {
        Some(path) => {
            let file = load_weights(path).with_context(|| format!("reading weights {}", path.display()))?;
            let arch = match args.arch {
                Some(a) => a,
                None => Architecture::parse(&file.arch)
                    .with_context(|| format!("weights {} name an unknown architecture", path.display()))?,
            };
            ModelGraph::from_file(arch, file).with_context(|| format!("binding weights {}", path.display()))
        }
        None => Ok(ModelGraph::random(
            args.arch.unwrap_or_else(Architecture::shufflenet_onfire),
            args.seed,
        )?),
    }
}

fn write_weights(path: &Path, model: &ModelGraph) -> Result<()> {
    save_weights(path, &model.arch().to_string(), model.weights())
        .with_context(|| format!("writing weights {}", path.display()))
}

fn expand(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        out.extend(frame_sources(p).with_context(|| format!("listing {}", p.display()))?);
    }
    Ok(out)
}

fn read_image(path: &Path) -> Result<RgbImage> {
    load_ppm(path).with_context(|| format!("reading image {}", path.display()))
}

fn slic_params(a: &SlicArgs) -> Result<SlicParams> {
    let p = SlicParams {
        k: a.k,
        compactness: a.compactness,
        iterations: a.iterations,
        ..SlicParams::default()
    };
    p.validate()?;
    Ok(p)
}

fn label(fire: bool) -> &'static str {
    if fire {
        "fire"
    } else {
        "no-fire"
    }
}

fn classify(inputs: &[PathBuf], args: &ModelArgs, threshold: f64, out: Option<&Path>) -> Result<()> {
    let frames = expand(inputs)?;
    let model = load_model(args)?;
    let mut csv = String::from("path,label,probability,logit\n");
    for path in &frames {
        let p = classify_frame(&model, &read_image(path)?, threshold)?;
        println!("{}\t{}\t{:.6}", path.display(), label(p.fire), p.probability);
        writeln!(
            csv,
            "{},{},{:.6},{:.6}",
            path.display(),
            label(p.fire),
            p.probability,
            p.logit
        )?;
    }
    if let Some(out) = out {
        fs::write(out, csv).with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(())
}

fn localize(inputs: &[PathBuf], args: &ModelArgs, threshold: f64, slic: &SlicArgs, out: &Path) -> Result<()> {
    let frames = expand(inputs)?;
    let params = slic_params(slic)?;
    let model = load_model(args)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for path in &frames {
        let img = read_image(path)?;
        let loc = localize_fire(&model, &img, &params, threshold)?;
        let stem = path
            .file_stem()
            .map_or_else(|| "frame".into(), |s| s.to_string_lossy().into_owned());
        let mask = out.join(format!("{stem}_mask.pgm"));
        let overlay = out.join(format!("{stem}_overlay.ppm"));
        save_pgm(&mask, &loc.mask).with_context(|| format!("writing {}", mask.display()))?;
        save_ppm(&overlay, &loc.overlay).with_context(|| format!("writing {}", overlay.display()))?;

        let sizes = loc.map.sizes();
        let mut csv = String::from("superpixel,pixels,probability,label\n");
        for (i, p) in loc.predictions.iter().enumerate() {
            writeln!(csv, "{i},{},{:.6},{}", sizes[i], p.probability, label(p.fire))?;
        }
        let table = out.join(format!("{stem}_superpixels.csv"));
        fs::write(&table, csv).with_context(|| format!("writing {}", table.display()))?;

        let fire_pixels = loc.mask.data.iter().filter(|&&v| v == 255).count();
        println!(
            "{}\t{} of {} superpixels fire\t{} of {} pixels",
            path.display(),
            loc.fire_count(),
            loc.map.count(),
            fire_pixels,
            loc.mask.data.len()
        );
    }
    Ok(())
}

fn eval(root: &Path, args: &ModelArgs, threshold: f64, out: Option<&Path>) -> Result<()> {
    let data = DatasetLayout::open(root).with_context(|| format!("opening dataset {}", root.display()))?;
    let model = load_model(args)?;
    let ev = evaluate(&model, &data, threshold)?;
    println!("{} on {} images at threshold {threshold}", model.arch(), data.len());
    print!("{}", ev.report);
    if let Some(out) = out {
        fs::write(out, ev.report.to_csv()).with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(())
}

fn run_bench(
    inputs: &[PathBuf],
    args: &ModelArgs,
    mode: Mode,
    frames: usize,
    warmup: usize,
    slic: &SlicArgs,
) -> Result<()> {
    let model = load_model(args)?;
    let images = if inputs.is_empty() {
        synthetic_frames(4, model.input_size(), args.seed)
    } else {
        expand(inputs)?.iter().map(|p| read_image(p)).collect::<Result<_>>()?
    };
    let mode = match mode {
        Mode::Fullframe => BenchMode::FullFrame,
        Mode::Superpixel => BenchMode::Superpixel(slic_params(slic)?),
    };
    let r = bench(&model, mode, &images, frames, warmup)?;
    println!(
        "{}\t{}\t{} frames in {:.3} s\t{:.2} fps (batch 1)",
        model.arch(),
        r.mode,
        r.frames,
        r.seconds,
        r.fps
    );
    Ok(())
}

fn prune(args: &ModelArgs, k: usize, out: Option<&Path>) -> Result<()> {
    let model = load_model(args)?;
    if !matches!(model.arch(), Architecture::ShuffleNet(_)) {
        bail!("pruning applies to ShuffleNet models, not {}", model.arch());
    }
    let (pruned, report) = prune_final_conv(&model, k)?;
    println!("{} -> {}", model.arch(), pruned.arch());
    print!("{}", report.to_table());
    if let Some(out) = out {
        write_weights(out, &pruned)?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn finetune(root: &Path, args: &ModelArgs, cfg: TrainConfig, out: &Path, curve: Option<&Path>) -> Result<()> {
    cfg.validate()?;
    let data = DatasetLayout::open(root).with_context(|| format!("opening dataset {}", root.display()))?;
    let model = load_model(args)?;
    let pre = Preprocess {
        size: model.input_size(),
        ..Preprocess::default()
    };
    let mut frames = Vec::with_capacity(data.len());
    for (path, _) in &data.items {
        frames.push(pre.apply(&read_image(path)?)?);
    }
    let labels = data.items.iter().map(|(_, fire)| *fire as u8).collect();
    let features = extract_features(&model, &frames, labels)?;
    let (tuned, stats) = finetune_head(&model, &features, &cfg)?;
    for e in &stats {
        println!("epoch {:>3}\tloss {:.6}\taccuracy {:.4}", e.epoch, e.loss, e.accuracy);
    }
    write_weights(out, &tuned)?;
    if let Some(c) = curve {
        fs::write(c, curve_csv(&stats)).with_context(|| format!("writing {}", c.display()))?;
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn params(arch: Architecture, breakdown: bool) -> Result<()> {
    let g = arch.build_graph()?;
    println!("{}", g.param_count());
    if breakdown {
        println!("{arch}");
        for cell in g.cells() {
            println!("  {:<20} {:>12}", cell.name, group_digits(g.cell_param_count(cell)));
        }
        let in_cells: usize = g.cells().iter().map(|c| g.cell_param_count(c)).sum();
        let rest = g.param_count() - in_cells;
        if rest > 0 {
            println!("  {:<20} {:>12}", "other", group_digits(rest));
        }
        println!("  {:<20} {:>12}", "total", group_digits(g.param_count()));
    }
    Ok(())
}

fn variants(family: Family) -> Result<()> {
    let rows = variant_table(family)?;
    print!("{}", format_variant_table(family, &rows));
    Ok(())
}
