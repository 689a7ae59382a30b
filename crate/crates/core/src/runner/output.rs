//! Run artifacts. Every file starts with the config hash: CSV files carry
//! `# key=value` comment lines, JSON files a top-level `config_hash` member.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::domain::{DomainSpec, Grid};
use crate::error::{Error, Result};
use crate::field::{Flavor, GraphField};
use crate::monitor::Record;

fn write_header(out: &mut impl Write, pairs: &[(&str, String)]) -> Result<()> {
    for (k, v) in pairs {
        writeln!(out, "# {k}={v}")?;
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, hash: &str, body: &T) -> Result<()> {
    let mut value = serde_json::to_value(body)?;
    let mut wrapped = serde_json::Map::new();
    wrapped.insert("config_hash".into(), hash.into());
    match value.take() {
        serde_json::Value::Object(map) => wrapped.extend(map),
        other => {
            wrapped.insert("data".into(), other);
        }
    }
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, &wrapped)?;
    writeln!(out)?;
    Ok(())
}

pub fn write_series(path: &Path, hash: &str, records: &[Record]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_header(&mut out, &[("config_hash", hash.to_string())])?;
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Header of a snapshot file: enough to rebuild the grid and audit the slice.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMeta {
    pub config_hash: String,
    pub step: usize,
    pub time: f64,
    pub flavor: Flavor,
    pub spec: DomainSpec,
    pub alpha: f64,
    pub c: f64,
    pub phi_min0: f64,
    pub phi_max0: f64,
    pub c_tol: f64,
}

pub fn write_snapshot(path: &Path, meta: &SnapshotMeta, grid: &Grid, field: &GraphField) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let flavor = match meta.flavor {
        Flavor::Physical => "physical",
        Flavor::Rescaled => "rescaled",
    };
    write_header(
        &mut out,
        &[
            ("config_hash", meta.config_hash.clone()),
            ("step", meta.step.to_string()),
            ("time", format!("{:e}", meta.time)),
            ("flavor", flavor.to_string()),
            ("dimension", meta.spec.dimension.to_string()),
            ("radius", format!("{:e}", meta.spec.radius)),
            ("radial_nodes", meta.spec.radial_nodes.to_string()),
            ("angular_nodes", meta.spec.angular_nodes.to_string()),
            ("alpha", format!("{:e}", meta.alpha)),
            ("c", format!("{:e}", meta.c)),
            ("phi_min0", format!("{:e}", meta.phi_min0)),
            ("phi_max0", format!("{:e}", meta.phi_max0)),
            ("c_tol", format!("{:e}", meta.c_tol)),
        ],
    )?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["node", "ring", "sector", "x1", "x2", "phi"])?;
    for (i, (node, phi)) in grid.nodes.iter().zip(&field.phi).enumerate() {
        w.write_record([
            i.to_string(),
            node.ring.to_string(),
            node.sector.to_string(),
            format!("{:e}", node.point.coords[0]),
            format!("{:e}", node.point.coords[1]),
            format!("{phi:e}"),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<(SnapshotMeta, Vec<f64>)> {
    let file = File::open(path)?;
    let mut header = BTreeMap::new();
    let mut body = String::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        match line.strip_prefix('#') {
            Some(rest) => {
                let (k, v) = rest
                    .trim()
                    .split_once('=')
                    .ok_or_else(|| Error::Snapshot(format!("bad header line {line:?}")))?;
                header.insert(k.trim().to_string(), v.trim().to_string());
            }
            None => {
                body.push_str(&line);
                body.push('\n');
            }
        }
    }
    let get = |k: &str| {
        header
            .get(k)
            .cloned()
            .ok_or_else(|| Error::Snapshot(format!("missing header key `{k}`")))
    };
    let num = |k: &str| -> Result<f64> {
        get(k)?
            .parse()
            .map_err(|_| Error::Snapshot(format!("header `{k}` is not a number")))
    };
    let int = |k: &str| -> Result<usize> {
        get(k)?
            .parse()
            .map_err(|_| Error::Snapshot(format!("header `{k}` is not an integer")))
    };
    let flavor = match get("flavor")?.as_str() {
        "physical" => Flavor::Physical,
        "rescaled" => Flavor::Rescaled,
        other => return Err(Error::Snapshot(format!("unknown flavor {other:?}"))),
    };
    let meta = SnapshotMeta {
        config_hash: get("config_hash")?,
        step: int("step")?,
        time: num("time")?,
        flavor,
        spec: DomainSpec {
            dimension: int("dimension")?,
            radius: num("radius")?,
            radial_nodes: int("radial_nodes")?,
            angular_nodes: int("angular_nodes")?,
        },
        alpha: num("alpha")?,
        c: num("c")?,
        phi_min0: num("phi_min0")?,
        phi_max0: num("phi_max0")?,
        c_tol: num("c_tol")?,
    };
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let column = reader
        .headers()?
        .iter()
        .position(|h| h == "phi")
        .ok_or_else(|| Error::Snapshot("no `phi` column".into()))?;
    let mut phi = Vec::new();
    for row in reader.records() {
        let row = row?;
        let value = row
            .get(column)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Snapshot(format!("bad phi value in row {}", phi.len())))?;
        phi.push(value);
    }
    Ok((meta, phi))
}

/// `step_000042.csv`.
pub fn snapshot_name(step: usize) -> String {
    format!("step_{step:06}.csv")
}
