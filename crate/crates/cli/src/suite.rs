//! Declarative evaluation suites.
//!
//! ```toml
//! corpora = ["corpora/baseline", "corpora/dd", "corpora/cedar"]
//! averaging = "macro"
//!
//! [queries]
//! lung = ["tissue:lung", "tissue:blood"]
//! ```
//!
//! Paths are relative to the suite file. `queries` may be omitted, in which
//! case each cohort runs its organ query plus `tissue:blood`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use fairmeta_core::evaluation::{Averaging, QueryPlan};
use fairmeta_core::record::{deserialize_corpus, Cohort, Corpus};
use fairmeta_core::search::parse_query;
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SuiteFile {
    corpora: Vec<PathBuf>,
    #[serde(default)]
    averaging: Option<String>,
    #[serde(default)]
    queries: Option<BTreeMap<String, Vec<String>>>,
}

pub struct Suite {
    pub corpus_paths: Vec<PathBuf>,
    pub averaging: Averaging,
    pub plan: QueryPlan,
}

impl Suite {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading suite {}", path.display()))?;
        let file: SuiteFile = toml::from_str(&text).with_context(|| format!("parsing suite {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let corpus_paths = expand_corpus_paths(&file.corpora.iter().map(|p| base.join(p)).collect::<Vec<_>>())?;
        let averaging = match file.averaging {
            Some(a) => a.parse().map_err(anyhow::Error::msg)?,
            None => Averaging::Macro,
        };
        let plan = match file.queries {
            None => QueryPlan::default(),
            Some(map) => {
                let mut queries = BTreeMap::new();
                for (cohort, list) in map {
                    let cohort: Cohort = cohort
                        .parse()
                        .map_err(|_| anyhow::anyhow!("unknown cohort `{cohort}` in suite queries"))?;
                    let parsed = list
                        .iter()
                        .map(|q| parse_query(q))
                        .collect::<Result<Vec<_>, _>>()?;
                    queries.insert(cohort, parsed);
                }
                QueryPlan::new(queries)
            }
        };
        Ok(Suite {
            corpus_paths,
            averaging,
            plan,
        })
    }
}

fn is_corpus_file(path: &Path) -> bool {
    use std::io::Read;
    let mut head = [0u8; 8];
    fs::File::open(path)
        .and_then(|mut f| f.read_exact(&mut head))
        .is_ok_and(|_| &head == b"#corpus ")
}

/// Files stay as given; directories contribute their corpus files, sorted.
pub fn expand_corpus_paths(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for path in paths {
        if path.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(path)
                .with_context(|| format!("listing {}", path.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file() && is_corpus_file(p))
                .collect();
            found.sort();
            if found.is_empty() {
                bail!("no corpus files in {}", path.display());
            }
            out.extend(found);
        } else if path.is_file() {
            out.push(path.clone());
        } else {
            bail!("{} does not exist", path.display());
        }
    }
    Ok(out)
}

pub fn read_corpus(path: &Path) -> Result<Corpus> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    deserialize_corpus(&text).with_context(|| format!("parsing corpus {}", path.display()))
}
