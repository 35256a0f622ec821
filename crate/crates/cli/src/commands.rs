use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use cellanalyzer_core::database::DatabaseTable;
use cellanalyzer_core::eval::{validity, GroundTruthPair};
use cellanalyzer_core::imaging::{
    compose_fluor_input, load_gray, load_mask, pad_to_multiple, render_diff, render_labels, to_8bit, BinaryMask,
};
use cellanalyzer_core::pipeline::{analyze_frame, filter_cells, ChannelInput};
use cellanalyzer_core::thresholding::{apply_threshold, compute_threshold, histogram, ThresholdError};
use cellanalyzer_core::{label_components, mask_from_components};
use log::{error, info, warn};
use rayon::prelude::*;

use crate::args::{Cli, Command, EvaluateArgs, InputArgs};
use crate::config::Settings;
use crate::manifest::{ChannelSpec, FrameSpec, RunManifest};
use crate::{usage, Outcome};

/// Network inputs must be divisible by 2^5.
pub const PAD_MULTIPLE: usize = 32;

pub fn run(cli: &Cli) -> Result<Outcome> {
    let file = match &cli.common.config {
        Some(p) => Settings::load(p)?,
        None => Settings::default(),
    };
    let flags = cli.flag_settings();
    let out = &cli.common.out;
    match &cli.command {
        Command::Preprocess(a) => {
            let m = input_manifest(a)?;
            preprocess(&m, &file.overlay(&m.config).overlay(&flags), out)
        }
        Command::Segment(a) => {
            let m = input_manifest(&a.input)?;
            segment(&m, &file.overlay(&m.config).overlay(&flags), out)
        }
        Command::Evaluate(a) => evaluate(a, &file.overlay(&flags), out),
        Command::Analyze(a) => {
            let m = input_manifest(&a.input)?;
            analyze(&m, &file.overlay(&m.config).overlay(&flags), out)
        }
    }
}

/// Loads `--manifest`, or builds a one-frame manifest (frame 0) from the
/// shorthand flags.
pub fn input_manifest(a: &InputArgs) -> Result<RunManifest> {
    if let Some(p) = &a.manifest {
        return RunManifest::load(p);
    }
    let cell_image = a
        .cell_image
        .clone()
        .ok_or_else(|| usage("either --manifest or --cell-image is required"))?;
    let channels = a.channel.iter().map(|s| parse_channel(s)).collect::<Result<Vec<_>>>()?;
    let m = RunManifest {
        frames: vec![FrameSpec {
            frame_id: 0,
            cell_image,
            cell_mask: a.cell_mask.clone(),
            channels,
        }],
        config: Settings::default(),
    };
    m.validate()?;
    Ok(m)
}

fn parse_channel(spec: &str) -> Result<ChannelSpec> {
    let (name, rest) = spec
        .split_once('=')
        .ok_or_else(|| usage(format!("--channel {spec:?}: expected NAME=IMAGE[,CLUSTER_MASK]")))?;
    let (image, cluster_mask) = match rest.split_once(',') {
        Some((i, c)) => (i, Some(PathBuf::from(c))),
        None => (rest, None),
    };
    Ok(ChannelSpec {
        name: name.to_string(),
        image: PathBuf::from(image),
        cluster_mask,
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

/// Runs `work` on every frame in the configured pool. Results come back in
/// manifest order whatever the worker count.
fn per_frame<T: Send>(
    m: &RunManifest,
    s: &Settings,
    work: impl Fn(&FrameSpec) -> Result<T> + Sync,
) -> Result<Vec<(usize, Result<T>)>> {
    let pool = s.thread_pool()?;
    Ok(pool.install(|| m.frames.par_iter().map(|f| (f.frame_id, work(f))).collect()))
}

/// Logs each failed frame and returns the successes in order.
fn collect<T>(results: Vec<(usize, Result<T>)>) -> (Vec<(usize, T)>, Outcome) {
    let mut ok = Vec::new();
    let mut outcome = Outcome::Success;
    for (id, r) in results {
        match r {
            Ok(v) => ok.push((id, v)),
            Err(e) => {
                error!("frame {id}: {e:#}");
                outcome = Outcome::PartialFailure;
            }
        }
    }
    (ok, outcome)
}

fn warn_if_empty(m: &RunManifest) -> bool {
    if m.frames.is_empty() {
        warn!("manifest has no frames; nothing to do");
    }
    m.frames.is_empty()
}

pub fn preprocess(m: &RunManifest, s: &Settings, out: &Path) -> Result<Outcome> {
    if warn_if_empty(m) {
        return Ok(Outcome::Success);
    }
    let dir = out.join("preprocessed");
    create_dir(&dir)?;
    let results = per_frame(m, s, |f| {
        let cells = pad_to_multiple(&to_8bit(&load_gray(&f.cell_image)?), PAD_MULTIPLE)?.image;
        compose_fluor_input(&cells, &cells)?.save_png(&dir.join(format!("frame_{}_cells.png", f.frame_id)))?;
        for ch in &f.channels {
            let fluor = pad_to_multiple(&to_8bit(&load_gray(&ch.image)?), PAD_MULTIPLE)?.image;
            compose_fluor_input(&cells, &fluor)
                .with_context(|| format!("channel {}", ch.name))?
                .save_png(&dir.join(format!("frame_{}_{}.png", f.frame_id, ch.name)))?;
        }
        Ok(())
    })?;
    Ok(collect(results).1)
}

pub fn segment(m: &RunManifest, s: &Settings, out: &Path) -> Result<Outcome> {
    if warn_if_empty(m) {
        return Ok(Outcome::Success);
    }
    let cfg = s.analysis_config()?;
    let dir = out.join("masks");
    create_dir(&dir)?;
    let results = per_frame(m, s, |f| {
        let img = to_8bit(&load_gray(&f.cell_image)?);
        let mask = match compute_threshold(&histogram(&img)?, s.method().into()) {
            Ok(level) => {
                info!("frame {}: threshold level {level}", f.frame_id);
                apply_threshold(&img, level, s.polarity())
            }
            Err(ThresholdError::DegenerateHistogram) => {
                warn!("frame {}: degenerate histogram, writing a blank mask", f.frame_id);
                BinaryMask::blank(img.width(), img.height())
            }
            Err(e) => return Err(e.into()),
        };
        let mask = if s.post.unwrap_or(false) {
            mask_from_components(&filter_cells(&label_components(&mask), &cfg))
        } else {
            mask
        };
        mask.save_png(&dir.join(format!("frame_{}_cells.png", f.frame_id)))?;
        Ok(())
    })?;
    Ok(collect(results).1)
}

pub fn evaluate(a: &EvaluateArgs, s: &Settings, out: &Path) -> Result<Outcome> {
    let cfg = s.eval_config()?;
    let load = |p: &Path| load_mask(p).map_err(|e| usage(e.to_string()));
    let (pred, gt1, gt2) = (load(&a.pred)?, load(&a.gt1)?, load(&a.gt2)?);
    for (name, m) in [("gt1", &gt1), ("gt2", &gt2)] {
        pred.same_dims(m).map_err(|e| usage(format!("pred vs {name}: {e}")))?;
    }
    let pd = label_components(&pred);
    let pair = GroundTruthPair::new(label_components(&gt1), label_components(&gt2), cfg.iou_threshold())
        .map_err(|e| usage(e.to_string()))?;
    let report = validity(&pd, &pair, &cfg)?;

    create_dir(out)?;
    let path = out.join("report.csv");
    report.write_csv(fs::File::create(&path).with_context(|| format!("cannot write {}", path.display()))?)?;
    if s.render.unwrap_or(false) {
        let dir = out.join("renders");
        create_dir(&dir)?;
        render_labels(&pd, s.seed())?.save_png(&dir.join(format!("frame_{}_labels.png", a.frame_id)))?;
        render_diff(&pred, &gt1)?.save_png(&dir.join(format!("frame_{}_diff.png", a.frame_id)))?;
    }
    println!(
        "{}",
        serde_json::json!({
            "valid": report.valid,
            "avg_l_ex": report.avg_l_ex,
            "d_ex": report.d_ex,
            "l_ex": [report.per_gt[0].l_ex, report.per_gt[1].l_ex],
            "union_size": report.union_size,
        })
    );
    Ok(if report.valid {
        Outcome::Success
    } else {
        Outcome::Invalid
    })
}

pub fn analyze(m: &RunManifest, s: &Settings, out: &Path) -> Result<Outcome> {
    if warn_if_empty(m) {
        return Ok(Outcome::Success);
    }
    let cfg = s.analysis_config()?;
    let renders = out.join("renders");
    create_dir(&renders)?;
    let seed = s.seed();
    let results = per_frame(m, s, |f| {
        let id = f.frame_id;
        let mask_path = f
            .cell_mask
            .as_ref()
            .ok_or_else(|| anyhow!("frame {id}: no cell mask"))?;
        let cluster_paths = f
            .channels
            .iter()
            .map(|ch| {
                ch.cluster_mask
                    .as_ref()
                    .ok_or_else(|| anyhow!("frame {id}: channel {} has no cluster mask", ch.name))
            })
            .collect::<Result<Vec<_>>>()?;
        let cell_mask = load_mask(mask_path)?;
        let images = f
            .channels
            .iter()
            .map(|ch| load_gray(&ch.image))
            .collect::<Result<Vec<_>, _>>()?;
        let clusters = cluster_paths
            .iter()
            .map(|p| load_mask(p))
            .collect::<Result<Vec<_>, _>>()?;
        let inputs: Vec<ChannelInput> = f
            .channels
            .iter()
            .zip(images.iter().zip(&clusters))
            .map(|(ch, (image, clusters))| ChannelInput {
                name: &ch.name,
                image,
                clusters,
            })
            .collect();
        let result = analyze_frame(id, &cell_mask, &inputs, &cfg)?;
        render_labels(&result.kept, seed)?.save_png(&renders.join(format!("frame_{id}_labels.png")))?;
        // Magenta marks cells removed by the filters.
        render_diff(
            &mask_from_components(&result.labelled),
            &mask_from_components(&result.kept),
        )?
        .save_png(&renders.join(format!("frame_{id}_diff.png")))?;
        info!(
            "frame {id}: kept {} of {} cells",
            result.kept.len(),
            result.labelled.len()
        );
        Ok(result.records)
    })?;
    let (ok, outcome) = collect(results);

    let mut table = DatabaseTable::new(m.channel_names());
    for (_, rows) in ok {
        table.extend(rows)?;
    }
    let path = out.join("database.csv");
    table.write_csv(fs::File::create(&path).with_context(|| format!("cannot write {}", path.display()))?)?;
    Ok(outcome)
}
