//! Study configuration: a TOML file layered over the study's defaults,
//! then command-line overrides.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use ncharm_core::verify::{Study, StudySettings};
use serde_json::Value;

pub struct RunConfig {
    pub study: Study,
    pub settings: StudySettings,
    pub json_path: PathBuf,
    pub csv_path: PathBuf,
}

/// Scalar overrides from flags; each wins over the file.
#[derive(Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub count: Option<usize>,
    pub alpha: Option<f64>,
    pub n_t: Option<usize>,
    pub refine: Option<bool>,
    pub out_dir: Option<PathBuf>,
    /// `dotted.key=value`, the value parsed as TOML.
    pub set: Vec<String>,
}

fn toml_to_json(v: toml::Value) -> Result<Value> {
    serde_json::to_value(v).context("converting configuration")
}

/// Recursive table merge: `over` wins, tables merge key by key. A corpus
/// table that names a `kind` replaces the default corpus outright, since
/// the parameters of different kinds do not mix.
fn merge(base: &mut Value, over: Value, path: &str) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            let replace = path == "corpus" && o.contains_key("kind");
            if replace {
                *b = o;
                return;
            }
            for (k, v) in o {
                let child = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v, &child),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn set_path(root: &mut Value, dotted: &str, value: Value) -> Result<()> {
    let mut cur = root;
    let parts: Vec<&str> = dotted.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| anyhow!("`{dotted}`: `{}` is not a table", parts[..i].join(".")))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

fn parse_set(assignment: &str) -> Result<(String, Value)> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| anyhow!("--set expects key=value, got `{assignment}`"))?;
    let doc: toml::Table = toml::from_str(&format!("v = {raw}"))
        .or_else(|_| toml::from_str(&format!("v = {:?}", raw)))
        .with_context(|| format!("--set {key}: cannot parse `{raw}`"))?;
    let value = doc.get("v").cloned().ok_or_else(|| anyhow!("--set {key}: empty value"))?;
    Ok((key.trim().to_string(), toml_to_json(value)?))
}

pub fn load(path: &Path, overrides: &Overrides) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut table: toml::Table = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;

    let study: Study = match table.remove("study") {
        Some(toml::Value::String(name)) => name.parse().map_err(|e| anyhow!("{e}"))?,
        Some(_) => bail!("`study` must be a string"),
        None => bail!("missing `study`; one of: {}", study_names()),
    };
    let output = match table.remove("output") {
        Some(toml::Value::Table(t)) => t,
        Some(_) => bail!("`output` must be a table"),
        None => toml::Table::new(),
    };

    let mut settings = serde_json::to_value(study.default_settings())?;
    merge(&mut settings, toml_to_json(toml::Value::Table(table))?, "");
    if let Some(seed) = overrides.seed {
        set_path(&mut settings, "corpus.seed", seed.into())?;
    }
    if let Some(count) = overrides.count {
        set_path(&mut settings, "corpus.count", count.into())?;
    }
    if let Some(alpha) = overrides.alpha {
        set_path(&mut settings, "alpha", alpha.into())?;
    }
    if let Some(n_t) = overrides.n_t {
        set_path(&mut settings, "n_t", n_t.into())?;
    }
    if let Some(refine) = overrides.refine {
        set_path(&mut settings, "refine", refine.into())?;
    }
    for s in &overrides.set {
        let (key, value) = parse_set(s)?;
        set_path(&mut settings, &key, value)?;
    }
    let settings: StudySettings = serde_json::from_value(settings).context("invalid settings")?;
    settings.validate().map_err(|e| anyhow!("invalid settings: {e}"))?;

    let out_dir = match (&overrides.out_dir, output.get("dir")) {
        (Some(d), _) => d.clone(),
        (None, Some(toml::Value::String(d))) => base_dir(path).join(d),
        (None, Some(_)) => bail!("`output.dir` must be a string"),
        (None, None) => base_dir(path),
    };
    let named = |key: &str, default: String| -> Result<PathBuf> {
        match output.get(key) {
            Some(toml::Value::String(p)) => Ok(out_dir.join(p)),
            Some(_) => bail!("`output.{key}` must be a string"),
            None => Ok(out_dir.join(default)),
        }
    };
    Ok(RunConfig {
        study,
        json_path: named("json", format!("{}-report.json", study.name()))?,
        csv_path: named("csv", format!("{}-rows.csv", study.name()))?,
        settings,
    })
}

fn base_dir(config: &Path) -> PathBuf {
    config.parent().map(Path::to_path_buf).unwrap_or_default()
}

pub fn study_names() -> String {
    Study::ALL.iter().map(|s| s.name()).collect::<Vec<_>>().join(", ")
}
