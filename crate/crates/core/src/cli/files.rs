//! CSV formats for datasets, traces and permutation logs, each with an
//! optional `key=value` sidecar carrying the metadata.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::{
    block_len, scale_len, Dataset, Draw, MixtureSpec, Permutation, Trace,
};

/// Tolerance on the weight sum of a row read from a trace file.
pub const FILE_WEIGHT_TOLERANCE: f64 = 1e-9;

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Ordered `key=value` metadata.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Meta {
    entries: Vec<(String, String)>,
}

impl Meta {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets `key`, replacing an earlier value in place.
    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) {
        let key = key.into();
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| *k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key, value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str, path: &Path) -> Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::format(path, format!("cannot parse {key}={v}")))
            })
            .transpose()
    }

    pub fn require<T: std::str::FromStr>(&self, key: &str, path: &Path) -> Result<T> {
        self.parse(key, path)?
            .ok_or_else(|| Error::format(path, format!("missing key '{key}'")))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut meta = Meta::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::format(path, format!("line {}: expected key=value", no + 1))
            })?;
            meta.set(k.trim(), v.trim());
        }
        Ok(meta)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = String::new();
        for (k, v) in &self.entries {
            text.push_str(k);
            text.push('=');
            text.push_str(v);
            text.push('\n');
        }
        write_file(path, text.as_bytes())
    }
}

/// The sidecar belonging to a data file: same stem, `.meta` extension.
pub fn meta_path(path: &Path) -> PathBuf {
    path.with_extension("meta")
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().from_writer(Vec::new())
}

fn finish(path: &Path, w: csv::Writer<Vec<u8>>) -> Result<()> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::format(path, e.to_string()))?;
    write_file(path, &bytes)
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::format(path, e.to_string())
}

/// Writes rows of already formatted cells.
pub fn write_table(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv_writer();
    w.write_record(header).map_err(csv_err(path))?;
    for r in rows {
        w.write_record(r).map_err(csv_err(path))?;
    }
    finish(path, w)
}

/// Reads a CSV file into its header and string rows.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::format(path, format!("{other:?}")),
        })?;
    let header: Vec<String> = r
        .headers()
        .map_err(csv_err(path))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec.map_err(csv_err(path))?.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}

fn parse_f64(path: &Path, row: usize, s: &str) -> Result<f64> {
    let v: f64 = s
        .parse()
        .map_err(|_| Error::format(path, format!("row {row}: '{s}' is not a number")))?;
    if !v.is_finite() {
        return Err(Error::format(path, format!("row {row}: non-finite value '{s}'")));
    }
    Ok(v)
}

fn parse_label(path: &Path, row: usize, s: &str, k: usize) -> Result<usize> {
    match s.parse::<usize>() {
        Ok(v) if (1..=k).contains(&v) => Ok(v - 1),
        _ => Err(Error::format(
            path,
            format!("row {row}: label '{s}' is not in 1..{k}"),
        )),
    }
}

/// Flattened spec written as `;`-separated numbers, for metadata.
pub fn encode_spec(spec: &MixtureSpec) -> String {
    spec.flatten()
        .iter()
        .map(|v| fmt_f64(*v))
        .collect::<Vec<_>>()
        .join(";")
}

pub fn decode_spec(text: &str, k: usize, d: usize, path: &Path) -> Result<MixtureSpec> {
    let flat = text
        .split(';')
        .map(|s| parse_f64(path, 0, s.trim()))
        .collect::<Result<Vec<_>>>()?;
    MixtureSpec::unflatten(&flat, k, d)
}

/// Writes `x_1..x_d[,z_true]` plus the sidecar. Truth labels are one-based.
pub fn write_dataset(path: &Path, data: &Dataset, extra: &Meta) -> Result<()> {
    let d = data.dim();
    let mut header: Vec<String> = (1..=d).map(|i| format!("x_{i}")).collect();
    let truth = data.true_allocation();
    if truth.is_some() {
        header.push("z_true".into());
    }
    let rows: Vec<Vec<String>> = data
        .points()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut r: Vec<String> = p.iter().map(|v| fmt_f64(*v)).collect();
            if let Some(z) = truth {
                r.push((z[i] + 1).to_string());
            }
            r
        })
        .collect();
    write_table(path, &header, &rows)?;

    let mut meta = Meta::new();
    meta.set("n", data.n());
    meta.set("d", d);
    meta.set("has_truth", truth.is_some());
    if let Some(spec) = data.true_spec() {
        meta.set("true_k", spec.k());
        meta.set("true_spec", encode_spec(spec));
    }
    for (k, v) in extra.entries() {
        meta.set(k.clone(), v);
    }
    meta.write(&meta_path(path))
}

/// Reads a dataset; the sidecar is optional and supplies the true spec.
pub fn read_dataset(path: &Path) -> Result<(Dataset, Meta)> {
    let (header, rows) = read_table(path)?;
    let has_truth = header.last().is_some_and(|h| h == "z_true");
    let d = header.len() - usize::from(has_truth);
    let expected: Vec<String> = (1..=d).map(|i| format!("x_{i}")).collect();
    if d == 0 || header[..d] != expected[..] {
        return Err(Error::format(
            path,
            format!("header must be x_1..x_d[,z_true], got {}", header.join(",")),
        ));
    }
    let sidecar = meta_path(path);
    let meta = if sidecar.exists() {
        Meta::read(&sidecar)?
    } else {
        Meta::new()
    };
    let true_spec = match meta.get("true_spec") {
        Some(text) => Some(decode_spec(text, meta.require("true_k", &sidecar)?, d, &sidecar)?),
        None => None,
    };
    let k_true = true_spec.as_ref().map_or(usize::MAX, MixtureSpec::k);
    let mut points = Vec::with_capacity(rows.len());
    let mut truth = has_truth.then(|| Vec::with_capacity(rows.len()));
    for (i, r) in rows.iter().enumerate() {
        points.push(
            r[..d]
                .iter()
                .map(|s| parse_f64(path, i + 1, s))
                .collect::<Result<Vec<_>>>()?,
        );
        if let Some(z) = truth.as_mut() {
            z.push(parse_label(path, i + 1, &r[d], k_true)?);
        }
    }
    if let Some(n) = meta.parse::<usize>("n", &sidecar)? {
        if n != points.len() {
            return Err(Error::format(
                path,
                format!("sidecar says n = {n} but the file has {} rows", points.len()),
            ));
        }
    }
    Ok((Dataset::new(points, truth, true_spec)?, meta))
}

/// Column names of a trace file, type-grouped.
pub fn trace_header(k: usize, d: usize, n: usize, log_post: bool) -> Vec<String> {
    let mut h = vec!["iter".to_string()];
    h.extend((1..=k).map(|c| format!("w_{c}")));
    for c in 1..=k {
        h.extend((1..=d).map(|i| format!("mu_{c}_{i}")));
    }
    for c in 1..=k {
        for i in 1..=d {
            h.extend((1..=i).map(|j| format!("sigma_{c}_{i}_{j}")));
        }
    }
    h.extend((1..=n).map(|i| format!("z_{i}")));
    if log_post {
        h.push("log_post".into());
    }
    h
}

/// Writes a trace and its sidecar (K, d, n, plus `extra`).
pub fn write_trace(path: &Path, trace: &Trace, extra: &Meta) -> Result<()> {
    let (k, d) = (trace.k(), trace.dim());
    let n = trace
        .draws()
        .first()
        .and_then(|dr| dr.allocation.as_ref())
        .map_or(0, Vec::len);
    let log_post = trace.has_log_posterior();
    let (b, s) = (block_len(d), scale_len(d));
    let mut w = csv_writer();
    w.write_record(trace_header(k, d, n, log_post)).map_err(csv_err(path))?;
    let mut row = Vec::new();
    for draw in trace.draws() {
        let flat = draw.spec.flatten();
        row.clear();
        row.push(draw.iter.to_string());
        row.extend((0..k).map(|c| fmt_f64(flat[c * b])));
        for c in 0..k {
            row.extend(flat[c * b + 1..c * b + 1 + d].iter().map(|v| fmt_f64(*v)));
        }
        for c in 0..k {
            row.extend(flat[c * b + 1 + d..c * b + 1 + d + s].iter().map(|v| fmt_f64(*v)));
        }
        if let Some(z) = &draw.allocation {
            row.extend(z.iter().map(|v| (v + 1).to_string()));
        }
        if log_post {
            row.push(fmt_f64(draw.log_posterior.unwrap_or(f64::NAN)));
        }
        w.write_record(&row).map_err(csv_err(path))?;
    }
    finish(path, w)?;

    let mut meta = Meta::new();
    meta.set("K", k);
    meta.set("d", d);
    meta.set("n", n);
    meta.set("draws", trace.len());
    meta.set("log_post", log_post);
    meta.set("dataset_id", trace.dataset_id());
    for (key, v) in extra.entries() {
        meta.set(key.clone(), v);
    }
    meta.write(&meta_path(path))
}

/// Reads a trace; the sidecar is required and must match the header.
pub fn read_trace(path: &Path) -> Result<(Trace, Meta)> {
    let sidecar = meta_path(path);
    let meta = Meta::read(&sidecar)?;
    let k: usize = meta.require("K", &sidecar)?;
    let d: usize = meta.require("d", &sidecar)?;
    let n: usize = meta.parse("n", &sidecar)?.unwrap_or(0);
    let log_post: bool = meta.parse("log_post", &sidecar)?.unwrap_or(false);
    if k == 0 || d == 0 {
        return Err(Error::format(&sidecar, "K and d must be positive"));
    }
    let (header, rows) = read_table(path)?;
    let expected = trace_header(k, d, n, log_post);
    if header != expected {
        return Err(Error::format(
            path,
            format!(
                "header has {} columns, expected {} for K = {k}, d = {d}, n = {n}, log_post = {log_post}",
                header.len(),
                expected.len()
            ),
        ));
    }
    let (b, s) = (block_len(d), scale_len(d));
    let mut draws = Vec::with_capacity(rows.len());
    let mut flat = vec![0.0; k * b];
    for (r, row) in rows.iter().enumerate() {
        let line = r + 1;
        let iter: u64 = row[0]
            .parse()
            .map_err(|_| Error::format(path, format!("row {line}: bad iteration '{}'", row[0])))?;
        let mut col = 1;
        let mut next = || -> Result<f64> {
            col += 1;
            parse_f64(path, line, &row[col - 1])
        };
        for c in 0..k {
            flat[c * b] = next()?;
        }
        for c in 0..k {
            for i in 0..d {
                flat[c * b + 1 + i] = next()?;
            }
        }
        for c in 0..k {
            for t in 0..s {
                flat[c * b + 1 + d + t] = next()?;
            }
        }
        let total: f64 = (0..k).map(|c| flat[c * b]).sum();
        if (total - 1.0).abs() > FILE_WEIGHT_TOLERANCE {
            return Err(Error::format(path, format!("row {line}: weights sum to {total}")));
        }
        let spec = MixtureSpec::unflatten(&flat, k, d)
            .or_else(|_| MixtureSpec::unflatten_normalized(&flat, k, d))
            .map_err(|e| Error::format(path, format!("row {line}: {e}")))?;
        let base = 1 + k * b;
        let allocation = (n > 0)
            .then(|| {
                row[base..base + n]
                    .iter()
                    .map(|v| parse_label(path, line, v, k))
                    .collect::<Result<Vec<_>>>()
            })
            .transpose()?;
        let log_posterior = log_post
            .then(|| parse_f64(path, line, &row[base + n]))
            .transpose()?;
        draws.push(Draw {
            iter,
            spec,
            allocation,
            log_posterior,
        });
    }
    let id = meta.get("dataset_id").unwrap_or("").to_string();
    let trace = Trace::new(draws, id).map_err(|e| Error::format(path, e.to_string()))?;
    Ok((trace, meta))
}

/// Writes `iter, nu_1..nu_K`, one-based.
pub fn write_permutations(path: &Path, trace: &Trace, perms: &[Permutation]) -> Result<()> {
    let k = trace.k();
    let mut header = vec!["iter".to_string()];
    header.extend((1..=k).map(|c| format!("nu_{c}")));
    let rows: Vec<Vec<String>> = trace
        .draws()
        .iter()
        .zip(perms)
        .map(|(d, p)| {
            std::iter::once(d.iter.to_string())
                .chain(p.one_based().iter().map(usize::to_string))
                .collect()
        })
        .collect();
    write_table(path, &header, &rows)
}

/// Reads a permutation log, checking every row is a bijection.
pub fn read_permutations(path: &Path) -> Result<Vec<(u64, Permutation)>> {
    let (header, rows) = read_table(path)?;
    if header.first().map(String::as_str) != Some("iter") {
        return Err(Error::format(path, "first column must be 'iter'"));
    }
    rows.iter()
        .enumerate()
        .map(|(r, row)| {
            let iter = row[0]
                .parse()
                .map_err(|_| Error::format(path, format!("row {}: bad iteration", r + 1)))?;
            let labels = row[1..]
                .iter()
                .map(|v| v.parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::format(path, format!("row {}: bad label", r + 1)))?;
            let p = Permutation::from_one_based(&labels)
                .map_err(|e| Error::format(path, format!("row {}: {e}", r + 1)))?;
            Ok((iter, p))
        })
        .collect()
}
