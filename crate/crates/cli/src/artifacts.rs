//! Reading inputs and writing artifacts. Every write goes to a temporary
//! sibling first and is renamed into place.

use std::fs;
use std::path::{Path, PathBuf};

use drf_core::synthdata::{read_samples, write_samples, Dataset, GeneratorConfig, Sample};

use crate::CliError;

pub const SPLITS: [&str; 3] = ["train", "val", "test"];

pub fn read_input(path: &Path) -> Result<String, CliError> {
    if !path.is_file() {
        return Err(CliError::MissingInput(path.to_path_buf()));
    }
    Ok(fs::read_to_string(path)?)
}

pub fn require(path: Option<&PathBuf>, what: &str) -> Result<PathBuf, CliError> {
    match path {
        Some(p) if p.exists() => Ok(p.clone()),
        Some(p) => Err(CliError::MissingInput(p.clone())),
        None => Err(CliError::MissingInput(PathBuf::from(format!("<{what}>")))),
    }
}

pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn prefixed(prefix: &str, pairs: Vec<(String, String)>) -> Vec<(String, String)> {
    pairs.into_iter().map(|(k, v)| (format!("{prefix}{k}"), v)).collect()
}

pub fn split_path(dir: &Path, split: &str) -> PathBuf {
    dir.join(format!("{split}.txt"))
}

pub fn save_dataset(dir: &Path, data: &Dataset) -> Result<(), CliError> {
    for (split, samples) in SPLITS.iter().zip([&data.train, &data.val, &data.test]) {
        let mut extra = data.config.echo();
        extra.push(("split".into(), split.to_string()));
        write_atomic(&split_path(dir, split), &write_samples(samples, &extra))?;
    }
    Ok(())
}

fn header_value<'a>(header: &'a [(String, String)], key: &str) -> Option<&'a str> {
    header.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

/// Rebuilds the generator config from a split header.
fn generator_from_header(header: &[(String, String)]) -> Result<GeneratorConfig, CliError> {
    let mut g = GeneratorConfig::default();
    let get = |key: &str| {
        header_value(header, key).ok_or_else(|| CliError::Usage(format!("dataset header lacks {key}")))
    };
    let num = |key: &str| -> Result<f64, CliError> {
        get(key)?.parse().map_err(|_| CliError::Usage(format!("dataset header: bad {key}")))
    };
    let int = |key: &str| -> Result<u64, CliError> {
        get(key)?.parse().map_err(|_| CliError::Usage(format!("dataset header: bad {key}")))
    };
    g.num_classes = int("num_classes")? as usize;
    g.image_dim = int("image_dim")? as usize;
    g.text_dim = int("text_dim")? as usize;
    g.separation = num("separation")?;
    g.spread = num("spread")?;
    g.offset = num("offset")?;
    g.mismatch_rate = num("mismatch_rate")?;
    g.n_train = int("n_train")? as usize;
    g.n_val = int("n_val")? as usize;
    g.n_test = int("n_test")? as usize;
    g.seed = int("seed")?;
    Ok(g)
}

pub fn load_split(dir: &Path, split: &str) -> Result<(Vec<Sample>, GeneratorConfig), CliError> {
    let (samples, header) = read_samples(&read_input(&split_path(dir, split))?)?;
    Ok((samples, generator_from_header(&header)?))
}

pub fn load_dataset(dir: &Path) -> Result<Dataset, CliError> {
    let (train, config) = load_split(dir, "train")?;
    let (val, _) = load_split(dir, "val")?;
    let (test, _) = load_split(dir, "test")?;
    Ok(Dataset { config, train, val, test })
}

#[cfg(test)]
mod tests {
    use super::*;
    use drf_core::synthdata::generate;

    #[test]
    fn dataset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = GeneratorConfig {
            n_train: 5,
            n_val: 3,
            n_test: 4,
            image_dim: 3,
            text_dim: 2,
            ..GeneratorConfig::default()
        };
        let data = generate(&cfg).unwrap();
        save_dataset(dir.path(), &data).unwrap();
        assert_eq!(load_dataset(dir.path()).unwrap(), data);
    }

    #[test]
    fn atomic_write_leaves_no_temporaries() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("nested").join("a.txt");
        write_atomic(&p, "one").unwrap();
        write_atomic(&p, "two").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "two");
        let names: Vec<_> = fs::read_dir(p.parent().unwrap()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names.len(), 1);
    }

    #[test]
    fn missing_input_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(read_input(&dir.path().join("nope")), Err(CliError::MissingInput(_))));
        assert!(matches!(require(None, "checkpoint"), Err(CliError::MissingInput(_))));
    }
}
