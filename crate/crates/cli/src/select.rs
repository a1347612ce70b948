//! Choosing which efficiency cells to compute.

use labe_core::distributions::{bivariate_catalog, univariate_catalog, AlternativeFamily};
use labe_core::presets::{self, PresetCell};
use labe_core::slopes::{TestFamily, TestSpec};

use crate::CliError;

/// A `--cell key=value,...` filter over a preset table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CellFilter {
    pub raw: String,
    pub test: Option<String>,
    pub gamma: Option<f64>,
    pub alt: Option<String>,
}

impl CellFilter {
    /// Parses `gamma=1,alt=contam:1,1`. Comma-separated tokens without `=`
    /// belong to the preceding value, so alternative ids keep their commas.
    pub fn parse(s: &str) -> Result<Self, CliError> {
        let mut pairs: Vec<String> = Vec::new();
        for tok in s.split(',') {
            match pairs.last_mut() {
                Some(last) if !tok.contains('=') => {
                    last.push(',');
                    last.push_str(tok);
                }
                _ => pairs.push(tok.to_string()),
            }
        }
        let mut f = CellFilter { raw: s.to_string(), ..Default::default() };
        for p in pairs {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("cell filter '{s}': expected key=value, got '{p}'")))?;
            let v = v.trim();
            match k.trim() {
                "test" => f.test = Some(v.to_string()),
                "gamma" => {
                    f.gamma = Some(v.parse().map_err(|_| CliError::Config(format!("cell filter '{s}': bad gamma '{v}'")))?)
                }
                "alt" | "alternative" => f.alt = Some(v.to_string()),
                other => {
                    return Err(CliError::Config(format!("cell filter '{s}': unknown key '{other}' (use test, gamma, alt)")))
                }
            }
        }
        Ok(f)
    }

    /// Test ids match exactly or as a prefix ending at an underscore, so
    /// `biv_bhep` selects `biv_bhep_simple`.
    pub fn matches(&self, c: &PresetCell) -> bool {
        let id = c.test.id();
        let test_ok = self.test.as_ref().is_none_or(|t| id == *t || id.starts_with(&format!("{t}_")));
        let gamma_ok = self.gamma.is_none_or(|g| (c.gamma() - g).abs() <= 1e-9 * g.abs().max(1.0));
        let alt_ok = self.alt.as_ref().is_none_or(|a| c.alternative == *a);
        test_ok && gamma_ok && alt_ok
    }
}

/// A cell to compute, with its published value when it comes from a preset.
#[derive(Debug, Clone)]
pub struct Planned {
    pub table: Option<u32>,
    pub test: TestFamily,
    pub alternative: String,
    pub published: Option<f64>,
    pub note: Option<&'static str>,
}

/// Cells of table `id`, restricted to those matching any of `filters`
/// (all cells when there are none). Every filter must select something.
pub fn from_table(id: u32, filters: &[CellFilter]) -> Result<Vec<Planned>, CliError> {
    let preset = presets::table(id)?;
    for f in filters {
        if !preset.cells.iter().any(|c| f.matches(c)) {
            return Err(CliError::Config(format!("no cell of table {id} matches '{}'", f.raw)));
        }
    }
    Ok(preset
        .cells
        .into_iter()
        .filter(|c| filters.is_empty() || filters.iter().any(|f| f.matches(c)))
        .map(|c| Planned {
            table: Some(id),
            test: c.test,
            alternative: c.alternative,
            published: Some(c.published),
            note: c.note,
        })
        .collect())
}

/// Cells for an explicit test over a γ list. Without alternatives, every
/// catalogued alternative of the test's null is used.
pub fn from_args(test: &str, gammas: &[f64], alts: &[String]) -> Result<Vec<Planned>, CliError> {
    if gammas.is_empty() {
        return Err(CliError::Config("--gamma is required with --test".into()));
    }
    let mut out = Vec::new();
    for &g in gammas {
        let fam = TestFamily::parse(test, g)?;
        let spec = TestSpec::new(fam)?;
        let ids: Vec<String> = if alts.is_empty() {
            catalog(&spec).iter().map(AlternativeFamily::id).collect()
        } else {
            alts.to_vec()
        };
        for a in ids {
            out.push(Planned { table: None, test: fam, alternative: a, published: None, note: None });
        }
    }
    Ok(out)
}

fn catalog(spec: &TestSpec) -> Vec<AlternativeFamily> {
    if spec.dimension() == 2 {
        bivariate_catalog(spec.null)
    } else {
        univariate_catalog().into_iter().filter(|f| f.null == spec.null).collect()
    }
}

/// Rejects unknown tests, out-of-range γ and mismatched alternatives before
/// any computation starts.
pub fn validate(cells: &[Planned]) -> Result<(), CliError> {
    for c in cells {
        let spec = TestSpec::new(c.test)?;
        let fam = AlternativeFamily::parse(&c.alternative, spec.null)?;
        if fam.null != spec.null {
            return Err(CliError::Config(format!("alternative {} does not apply to {}", c.alternative, c.test.id())));
        }
    }
    Ok(())
}
