//! Dataset and scenario files.
//!
//! Dataset files are comma-delimited text, one row per
//! `(individual, biomarker, observation)`:
//!
//! ```text
//! # serorecency panel-dataset v1
//! # scenario=realistic model=AR4&VL replicate=0 biomarkers=AR4;VL
//! replicate,id,role,biomarker,j,t,y,tau_truth,beta_truth
//! 0,0,in,AR4,0,0,-1.43,0.61,1.5;-1.38;0.77;3.2;2.1
//! ```
//!
//! `tau_truth` may be empty only for out-of-sample rows; `beta_truth` holds
//! the stacked ground-truth random effects separated by `;` and may be empty.
//! Numbers are written with Rust's shortest round-trip formatting.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Individual, PanelDataset, Role, ScenarioConfig};
use crate::error::{Error, Result};

const DATASET_MAGIC: &str = "# serorecency panel-dataset v1";
const DATASET_COLUMNS: &str = "replicate,id,role,biomarker,j,t,y,tau_truth,beta_truth";
const SCENARIO_MAGIC: &str = "# serorecency scenario-config v1";
pub(crate) const SCHEMA_VERSION: u32 = 1;

fn opt_num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn dataset_to_string(d: &PanelDataset) -> String {
    let mut out = String::new();
    writeln!(out, "{DATASET_MAGIC}").unwrap();
    writeln!(
        out,
        "# scenario={} model={} replicate={} biomarkers={}",
        d.scenario,
        d.model,
        d.replicate,
        d.biomarkers.join(";")
    )
    .unwrap();
    writeln!(out, "{DATASET_COLUMNS}").unwrap();
    for ind in &d.individuals {
        let beta = ind
            .random_effects
            .as_ref()
            .map(|b| b.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";"))
            .unwrap_or_default();
        for (k, label) in d.biomarkers.iter().enumerate() {
            for (j, (t, y)) in ind.times.iter().zip(&ind.measurements[k]).enumerate() {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{}",
                    d.replicate,
                    ind.id,
                    ind.role.code(),
                    label,
                    j,
                    t,
                    y,
                    opt_num(ind.tau),
                    beta
                )
                .unwrap();
            }
        }
    }
    out
}

pub fn write_dataset(path: &Path, d: &PanelDataset) -> Result<()> {
    fs::write(path, dataset_to_string(d)).map_err(|e| Error::io(path, e))
}

pub fn read_dataset(path: &Path) -> Result<PanelDataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text, &path.display().to_string())
}

struct Header {
    scenario: String,
    model: String,
    replicate: u64,
    biomarkers: Vec<String>,
}

fn parse_header(line: &str, src: &str) -> Result<Header> {
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| Error::parse(src, 2, "header", "expected metadata comment line"))?;
    let mut kv: HashMap<&str, &str> = HashMap::new();
    for token in body.split_whitespace() {
        let (k, v) = token
            .split_once('=')
            .ok_or_else(|| Error::parse(src, 2, token, "expected key=value"))?;
        kv.insert(k, v);
    }
    let get = |k: &str| {
        kv.get(k)
            .copied()
            .ok_or_else(|| Error::parse(src, 2, k, "missing metadata key"))
    };
    let replicate = get("replicate")?
        .parse()
        .map_err(|_| Error::parse(src, 2, "replicate", "not an integer"))?;
    let biomarkers: Vec<String> = get("biomarkers")?.split(';').map(str::to_string).collect();
    if biomarkers.is_empty() || biomarkers.iter().any(|b| b.is_empty()) {
        return Err(Error::parse(src, 2, "biomarkers", "empty biomarker label"));
    }
    Ok(Header {
        scenario: get("scenario")?.to_string(),
        model: get("model")?.to_string(),
        replicate,
        biomarkers,
    })
}

pub fn parse_dataset(text: &str, src: &str) -> Result<PanelDataset> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, l)) if l.trim() == DATASET_MAGIC => {}
        _ => return Err(Error::parse(src, 1, "header", format!("expected `{DATASET_MAGIC}`"))),
    }
    let header = match lines.next() {
        Some((_, l)) => parse_header(l, src)?,
        None => return Err(Error::parse(src, 2, "header", "missing metadata line")),
    };
    match lines.next() {
        Some((_, l)) if l.trim() == DATASET_COLUMNS => {}
        _ => return Err(Error::parse(src, 3, "columns", format!("expected `{DATASET_COLUMNS}`"))),
    }

    let n_bio = header.biomarkers.len();
    let mut order: Vec<usize> = Vec::new();
    let mut by_id: HashMap<usize, (Individual, usize)> = HashMap::new();

    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(Error::parse(src, lineno, "row", format!("expected 9 fields, got {}", fields.len())));
        }
        let num = |idx: usize, name: &str| -> Result<f64> {
            let v: f64 = fields[idx]
                .trim()
                .parse()
                .map_err(|_| Error::parse(src, lineno, name, format!("`{}` is not a number", fields[idx])))?;
            if !v.is_finite() {
                return Err(Error::parse(src, lineno, name, "value is not finite"));
            }
            Ok(v)
        };
        let int = |idx: usize, name: &str| -> Result<usize> {
            fields[idx]
                .trim()
                .parse()
                .map_err(|_| Error::parse(src, lineno, name, format!("`{}` is not an integer", fields[idx])))
        };

        let replicate = int(0, "replicate")? as u64;
        if replicate != header.replicate {
            return Err(Error::parse(src, lineno, "replicate", "does not match the header"));
        }
        let id = int(1, "id")?;
        let role = match fields[2].trim() {
            "in" => Role::InSample,
            "out" => Role::OutOfSample,
            other => return Err(Error::parse(src, lineno, "role", format!("unknown role `{other}`"))),
        };
        let k = header
            .biomarkers
            .iter()
            .position(|b| b == fields[3].trim())
            .ok_or_else(|| Error::parse(src, lineno, "biomarker", format!("unknown biomarker `{}`", fields[3])))?;
        let j = int(4, "j")?;
        let t = num(5, "t")?;
        let y = num(6, "y")?;
        let tau = if fields[7].trim().is_empty() {
            if role == Role::InSample {
                return Err(Error::parse(src, lineno, "tau_truth", "in-sample individuals need a known tau"));
            }
            None
        } else {
            Some(num(7, "tau_truth")?)
        };
        let beta = if fields[8].trim().is_empty() {
            None
        } else {
            Some(
                fields[8]
                    .split(';')
                    .map(|v| {
                        v.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::parse(src, lineno, "beta_truth", format!("`{v}` is not a number")))
                    })
                    .collect::<Result<Vec<f64>>>()?,
            )
        };

        let (ind, _) = by_id.entry(id).or_insert_with(|| {
            order.push(id);
            (
                Individual {
                    id,
                    role,
                    tau,
                    times: Vec::new(),
                    measurements: vec![Vec::new(); n_bio],
                    random_effects: beta.clone(),
                },
                lineno,
            )
        });
        if ind.role != role || ind.tau != tau || ind.random_effects != beta {
            return Err(Error::parse(
                src,
                lineno,
                "id",
                format!("individual {id} has inconsistent role, tau or beta across rows"),
            ));
        }
        if j != ind.measurements[k].len() {
            return Err(Error::parse(src, lineno, "j", format!("expected observation index {}", ind.measurements[k].len())));
        }
        if k == 0 {
            if ind.times.last().is_some_and(|&prev| t <= prev) {
                return Err(Error::parse(src, lineno, "t", "times must be strictly increasing"));
            }
            ind.times.push(t);
        } else if ind.times.get(j) != Some(&t) {
            return Err(Error::parse(src, lineno, "t", "time does not match the first biomarker's schedule"));
        }
        ind.measurements[k].push(y);
    }

    let mut individuals = Vec::with_capacity(order.len());
    for id in order {
        let (ind, first_line) = by_id.remove(&id).unwrap();
        if ind.measurements.iter().any(|m| m.len() != ind.times.len()) {
            return Err(Error::parse(
                src,
                first_line,
                "j",
                format!("individual {id} has unequal observation counts across biomarkers"),
            ));
        }
        individuals.push(ind);
    }
    Ok(PanelDataset {
        scenario: header.scenario,
        model: header.model,
        replicate: header.replicate,
        biomarkers: header.biomarkers,
        individuals,
    })
}

#[derive(serde::Serialize, serde::Deserialize)]
struct ScenarioFile {
    schema_version: u32,
    #[serde(flatten)]
    config: ScenarioConfig,
}

pub fn write_scenario(path: &Path, config: &ScenarioConfig) -> Result<()> {
    let body = toml::to_string(&ScenarioFile {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
    })
    .map_err(|e| Error::Config(e.to_string()))?;
    fs::write(path, format!("{SCENARIO_MAGIC}\n{body}")).map_err(|e| Error::io(path, e))
}

pub fn read_scenario(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: ScenarioFile = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(Error::Config(format!(
            "{}: unsupported schema version {}",
            path.display(),
            file.schema_version
        )));
    }
    file.config.validate()?;
    Ok(file.config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalogue::ModelId;
    use crate::simgen::simulate_dataset;

    #[test]
    fn round_trip_is_lossless() {
        let c = ScenarioConfig::realistic(11);
        for model in [ModelId::Ar1, ModelId::Ar4Vl] {
            let d = simulate_dataset(&c, model, 2).unwrap();
            let back = parse_dataset(&dataset_to_string(&d), "mem").unwrap();
            assert_eq!(back, d);
        }
    }

    #[test]
    fn missing_in_sample_tau_is_an_error() {
        let d = simulate_dataset(&ScenarioConfig::realistic(1), ModelId::Ar1, 0).unwrap();
        let text = dataset_to_string(&d);
        let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
        let mut f: Vec<&str> = lines[3].split(',').collect();
        f[7] = "";
        lines[3] = f.join(",");
        match parse_dataset(&lines.join("\n"), "mem") {
            Err(Error::Parse { line, field, .. }) => {
                assert_eq!(line, 4);
                assert_eq!(field, "tau_truth");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_rows_report_context() {
        let d = simulate_dataset(&ScenarioConfig::realistic(1), ModelId::Ar1, 0).unwrap();
        let text = dataset_to_string(&d).replacen(",in,AR1,0,0,", ",in,AR1,0,zero,", 1);
        assert!(matches!(parse_dataset(&text, "mem"), Err(Error::Parse { line: 4, .. })));
        assert!(parse_dataset("garbage", "mem").is_err());
    }

    #[test]
    fn dataset_without_out_of_sample_is_valid() {
        let mut d = simulate_dataset(&ScenarioConfig::realistic(1), ModelId::Ar4, 0).unwrap();
        d.individuals.retain(|i| i.role == Role::InSample);
        let back = parse_dataset(&dataset_to_string(&d), "mem").unwrap();
        assert_eq!(back.out_of_sample().count(), 0);
        assert_eq!(back, d);
    }

    #[test]
    fn unknown_out_of_sample_tau_allowed() {
        let mut d = simulate_dataset(&ScenarioConfig::realistic(1), ModelId::Vl, 0).unwrap();
        for ind in d.individuals.iter_mut().filter(|i| i.role == Role::OutOfSample) {
            ind.tau = None;
            ind.random_effects = None;
        }
        assert_eq!(parse_dataset(&dataset_to_string(&d), "mem").unwrap(), d);
    }

    #[test]
    fn scenario_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("scenario.toml");
        let c = ScenarioConfig::ideal(5);
        write_scenario(&p, &c).unwrap();
        assert!(fs::read_to_string(&p).unwrap().starts_with(SCENARIO_MAGIC));
        assert_eq!(read_scenario(&p).unwrap(), c);
    }
}
