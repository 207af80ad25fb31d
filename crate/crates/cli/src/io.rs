//! Input resolution and corpus loading shared by the subcommands.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rstkit::canonical::read_canonical;
use rstkit::preprocess::{genre_from_file_name, load_rs3_dir, DocMeta};
use rstkit::{DocumentRecord, Language, Split};

use crate::{FilterArgs, Lang, MetaArgs, SplitArg};

pub struct Paths {
    data_dir: Option<PathBuf>,
}

impl Paths {
    pub fn new(data_dir: Option<PathBuf>) -> Paths {
        Paths { data_dir }
    }

    /// An existing input path: as given, or under the data directory.
    pub fn input(&self, path: &Path) -> Result<PathBuf> {
        if path.exists() {
            return Ok(path.to_path_buf());
        }
        if let Some(dir) = self.data_dir.as_ref().filter(|_| path.is_relative()) {
            let joined = dir.join(path);
            if joined.exists() {
                return Ok(joined);
            }
        }
        bail!("{}: no such file or directory", path.display())
    }
}

pub fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| path.display().to_string())?))
}

/// A buffered writer on `path`, or stdout for `-`.
pub fn create(path: &Path) -> Result<Box<dyn Write>> {
    if path == Path::new("-") {
        return Ok(Box::new(BufWriter::new(io::stdout().lock())));
    }
    let f = File::create(path).with_context(|| path.display().to_string())?;
    Ok(Box::new(BufWriter::new(f)))
}

fn language(lang: Lang) -> Language {
    match lang {
        Lang::En => Language::En,
        Lang::Ru => Language::Ru,
        Lang::Other => Language::Other,
    }
}

pub fn split(s: SplitArg) -> Split {
    match s {
        SplitArg::Train => Split::Train,
        SplitArg::Dev => Split::Dev,
        SplitArg::Test => Split::Test,
    }
}

/// Reads a `doc_id<TAB>split` assignment file.
pub fn read_splits(path: &Path) -> Result<BTreeMap<String, Split>> {
    let mut out = BTreeMap::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.with_context(|| path.display().to_string())?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let ctx = || format!("{}:{}", path.display(), i + 1);
        let (id, s) = line.split_once('\t').with_context(|| format!("{}: expected doc_id<TAB>split", ctx()))?;
        let s: Split = s.trim().parse().map_err(anyhow::Error::from).with_context(ctx)?;
        out.insert(id.to_string(), s);
    }
    Ok(out)
}

/// Loads documents from an .rs3 directory or a canonical file.
pub fn load_docs(path: &Path, meta: &MetaArgs) -> Result<Vec<DocumentRecord>> {
    let splits = meta.split_file.as_deref().map(read_splits).transpose()?.unwrap_or_default();
    if path.is_dir() {
        let lang = language(meta.lang);
        let docs = load_rs3_dir(path, |stem| DocMeta {
            genre: genre_from_file_name(stem).unwrap_or_else(|| "unknown".into()),
            language: lang,
            split: splits.get(stem).copied().unwrap_or_default(),
        })?;
        if docs.is_empty() {
            bail!("{}: no .rs3 files", path.display());
        }
        Ok(docs)
    } else {
        let mut docs = load_canonical(path)?;
        for d in &mut docs {
            if let Some(s) = splits.get(d.source_id()) {
                d.split = *s;
            }
        }
        Ok(docs)
    }
}

pub fn load_canonical(path: &Path) -> Result<Vec<DocumentRecord>> {
    let corpus = read_canonical(&path.display().to_string(), open(path)?).with_context(|| path.display().to_string())?;
    Ok(corpus.documents)
}

pub fn apply_filter(docs: Vec<DocumentRecord>, filter: &FilterArgs) -> Result<Vec<DocumentRecord>> {
    let splits: Vec<Split> = filter.splits.iter().map(|s| split(*s)).collect();
    let kept: Vec<DocumentRecord> = docs
        .into_iter()
        .filter(|d| filter.genres.is_empty() || filter.genres.contains(&d.genre))
        .filter(|d| splits.is_empty() || splits.contains(&d.split))
        .collect();
    if kept.is_empty() {
        bail!("no documents left after --genre/--split filtering");
    }
    Ok(kept)
}
