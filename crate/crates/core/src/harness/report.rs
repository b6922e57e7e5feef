//! CSV and PGM writers for masks and attention heat maps.
//!
//! CSV numbers use nine significant digits, '.' as the decimal separator and LF
//! line endings. Masked mask entries are written as `-inf`.

use std::fs;
use std::path::{Path, PathBuf};

use crate::autodiff::{is_masked, Tensor};
use crate::data::DepSentence;
use crate::error::Result;
use crate::masks::{HeadSpec, MaskBuilder, MaskMatrix};

use super::config::RunConfig;
use super::model::{HeadMap, Model};

/// `x` rounded to nine significant digits, printed without exponent.
pub fn fmt9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{}", if x == 0.0 { 0.0 } else { x });
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?)
}

/// Square matrix with token forms as the header row and first column.
pub fn write_matrix_csv(path: &Path, tokens: &[String], cell: impl Fn(usize, usize) -> String) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec![String::new()];
    header.extend(tokens.iter().cloned());
    w.write_record(&header)?;
    for (i, tok) in tokens.iter().enumerate() {
        let mut row = vec![tok.clone()];
        row.extend((0..tokens.len()).map(|j| cell(i, j)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Binary greyscale PGM, one pixel per cell, 255 for weight 1.
pub fn write_pgm(path: &Path, weights: &Tensor) -> Result<()> {
    let (h, w) = (weights.rows(), weights.cols());
    let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
    bytes.extend(
        weights
            .data()
            .iter()
            .map(|&x| (x.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    fs::write(path, bytes)?;
    Ok(())
}

/// Read a matrix CSV written by [`write_matrix_csv`], dropping the labels.
pub fn read_matrix_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let tokens = r.headers()?.iter().skip(1).map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        rows.push(
            rec.iter()
                .skip(1)
                .map(|s| match s {
                    "-inf" => Ok(f64::NEG_INFINITY),
                    s => s
                        .parse::<f64>()
                        .map_err(|e| crate::Error::Config(format!("{}: bad cell `{s}`: {e}", path.display()))),
                })
                .collect::<Result<Vec<_>>>()?,
        );
    }
    Ok((tokens, rows))
}

/// Write one CSV and one PGM per head of `model` on `sentence`; returns the maps
/// together with the CSV paths.
pub fn emit_heatmap(model: &Model, sentence: &DepSentence, out_dir: &Path) -> Result<Vec<(HeadMap, PathBuf)>> {
    fs::create_dir_all(out_dir)?;
    let maps = model.attention_maps(sentence)?;
    maps.into_iter()
        .map(|m| {
            let csv_path = out_dir.join(format!("{}.csv", m.name));
            write_matrix_csv(&csv_path, &sentence.tokens, |i, j| fmt9(m.weights.get(i, j)))?;
            write_pgm(&out_dir.join(format!("{}.pgm", m.name)), &m.weights)?;
            Ok((m, csv_path))
        })
        .collect()
}

/// Masks of every head for `sentence` under `config`, named like the heat maps.
pub fn masks_for_config(config: &RunConfig, sentence: &DepSentence) -> Result<Vec<(String, HeadSpec, MaskMatrix)>> {
    config.validate()?;
    let schedules = config.encoder_schedules()?;
    let multi = schedules.len() > 1;
    let mut builder = MaskBuilder::new(config.mask_options());
    let mut out = Vec::new();
    for (e, (_, schedule)) in schedules.iter().enumerate() {
        let masks = builder.masks_for_sentence(schedule, sentence.len(), Some(&sentence.heads))?;
        for (h, (mask, spec)) in masks.into_iter().zip(schedule.heads()).enumerate() {
            let prefix = if multi { format!("enc{e}_") } else { String::new() };
            out.push((
                format!("{prefix}head{h}_{}_{}", spec.direction, spec.distance),
                *spec,
                mask,
            ));
        }
    }
    Ok(out)
}

/// Write every head's mask for `sentence` as `<name>.csv`; returns the paths.
pub fn emit_masks(config: &RunConfig, sentence: &DepSentence, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    masks_for_config(config, sentence)?
        .into_iter()
        .map(|(name, _, mask)| {
            let path = out_dir.join(format!("{name}.csv"));
            write_matrix_csv(&path, &sentence.tokens, |i, j| {
                let v = mask.get(i, j);
                if is_masked(v) {
                    "-inf".to_string()
                } else {
                    fmt9(v)
                }
            })?;
            Ok(path)
        })
        .collect()
}
