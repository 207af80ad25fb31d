//! Text model format, version 1:
//!
//! ```text
//! rstkit-crf 1
//! labels B I
//! features hashed-window 16      (optional extractor description)
//! dims <num_labels> <feature_dim>
//! start <num_labels floats>
//! stop <num_labels floats>
//! transition                     (num_labels rows of num_labels floats, row = from)
//! emission                       (num_labels rows of feature_dim floats)
//! ```
//!
//! Floats use Rust's shortest round-trip representation, so reading a
//! written model restores it bit for bit.

use std::io::{BufRead, Write};

use super::{CrfError, CrfModel, CrfParams};

const MAGIC: &str = "rstkit-crf 1";

fn write_row<W: Write>(w: &mut W, prefix: &str, xs: &[f64]) -> std::io::Result<()> {
    w.write_all(prefix.as_bytes())?;
    for (i, x) in xs.iter().enumerate() {
        if i > 0 || !prefix.is_empty() {
            w.write_all(b" ")?;
        }
        write!(w, "{x:?}")?;
    }
    w.write_all(b"\n")
}

pub fn write_model<W: Write>(mut w: W, model: &CrfModel, features: Option<&str>) -> Result<(), CrfError> {
    model.validate()?;
    let p = &model.params;
    writeln!(w, "{MAGIC}")?;
    writeln!(w, "labels {}", model.labels.join(" "))?;
    if let Some(f) = features {
        writeln!(w, "features {f}")?;
    }
    writeln!(w, "dims {} {}", p.num_labels, p.feature_dim)?;
    write_row(&mut w, "start", &p.start)?;
    write_row(&mut w, "stop", &p.stop)?;
    writeln!(w, "transition")?;
    for row in p.transition.chunks(p.num_labels) {
        write_row(&mut w, "", row)?;
    }
    writeln!(w, "emission")?;
    for row in p.emission.chunks(p.feature_dim.max(1)) {
        write_row(&mut w, "", row)?;
    }
    w.flush()?;
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn next(&mut self) -> Result<String, CrfError> {
        self.line += 1;
        match self.inner.next() {
            Some(l) => Ok(l?),
            None => Err(self.err("unexpected end of file")),
        }
    }

    fn err(&self, msg: &str) -> CrfError {
        CrfError::Format { line: self.line, msg: msg.to_string() }
    }

    fn keyed(&mut self, key: &str) -> Result<String, CrfError> {
        let l = self.next()?;
        match l.strip_prefix(key) {
            Some(rest) if rest.is_empty() || rest.starts_with(' ') => Ok(rest.trim().to_string()),
            _ => Err(self.err(&format!("expected `{key}`"))),
        }
    }

    fn floats(&self, s: &str, n: usize) -> Result<Vec<f64>, CrfError> {
        let xs = s
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| self.err(&format!("bad number `{t}`"))))
            .collect::<Result<Vec<_>, _>>()?;
        if xs.len() != n {
            return Err(self.err(&format!("expected {n} numbers, found {}", xs.len())));
        }
        Ok(xs)
    }
}

/// Reads a model and its optional extractor description.
pub fn read_model<R: BufRead>(r: R) -> Result<(CrfModel, Option<String>), CrfError> {
    let mut lines = Lines { inner: r.lines(), line: 0 };
    if lines.next()?.trim() != MAGIC {
        return Err(lines.err("not a rstkit-crf version 1 model"));
    }
    let labels: Vec<String> = lines.keyed("labels")?.split_whitespace().map(String::from).collect();
    let mut l = lines.next()?;
    let mut features = None;
    if let Some(rest) = l.strip_prefix("features ") {
        features = Some(rest.trim().to_string());
        l = lines.next()?;
    }
    let dims: Vec<usize> = l
        .strip_prefix("dims ")
        .ok_or_else(|| lines.err("expected `dims`"))?
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| lines.err("bad dims")))
        .collect::<Result<_, _>>()?;
    let [num_labels, feature_dim] = dims[..] else {
        return Err(lines.err("expected two dims"));
    };
    let mut params = CrfParams::zeros(num_labels, feature_dim);
    let s = lines.keyed("start")?;
    params.start = lines.floats(&s, num_labels)?;
    let s = lines.keyed("stop")?;
    params.stop = lines.floats(&s, num_labels)?;
    lines.keyed("transition")?;
    params.transition.clear();
    for _ in 0..num_labels {
        let row = lines.next()?;
        params.transition.extend(lines.floats(&row, num_labels)?);
    }
    lines.keyed("emission")?;
    params.emission.clear();
    for _ in 0..num_labels {
        let row = lines.next()?;
        params.emission.extend(lines.floats(&row, feature_dim)?);
    }
    let model = CrfModel { labels, params };
    model.validate()?;
    Ok((model, features))
}
