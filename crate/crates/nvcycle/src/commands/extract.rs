use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nvcycle_core::analysis::{
    uncertainty_propagation, ExtractionInputs, ExtractionReport, FitResult, FlipSource, Measured,
};
use nvcycle_core::reference;
use serde::{Deserialize, Serialize};

use crate::config::{read_json, Centre};
use crate::error::CliError;
use crate::files::Outputs;

fn default_alpha() -> Measured {
    reference::ALPHA
}

fn default_epsilon() -> Measured {
    reference::EPSILON
}

/// One column of the report. Flip probabilities come either directly or
/// from a pulse-series fit document; lifetimes either directly or from a
/// bi-exponential fit document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CentreSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flips: Option<FlipSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series_fit: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t13_ns: Option<Measured>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t14_ns: Option<Measured>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lifetime_fit: Option<PathBuf>,
    #[serde(default = "default_alpha")]
    pub alpha: Measured,
    #[serde(default = "default_epsilon")]
    pub epsilon: Measured,
}

fn default_draws() -> usize {
    2000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractConfig {
    pub centres: Vec<CentreSpec>,
    #[serde(default = "default_draws")]
    pub draws: usize,
    #[serde(default)]
    pub seed: u64,
}

impl ExtractConfig {
    pub fn reference(centres: &[Centre]) -> Self {
        Self {
            centres: centres
                .iter()
                .map(|c| CentreSpec::from_observables(c.observables()))
                .collect(),
            draws: default_draws(),
            seed: 0,
        }
    }
}

impl CentreSpec {
    pub fn from_observables(o: reference::CentreObservables) -> Self {
        Self {
            name: o.name.to_string(),
            flips: Some(FlipSource::Probabilities { p12: o.p12, p21: o.p21 }),
            series_fit: None,
            t13_ns: Some(o.t13_ns),
            t14_ns: Some(o.t14_ns),
            lifetime_fit: None,
            alpha: reference::ALPHA,
            epsilon: reference::EPSILON,
        }
    }

    /// Resolves fit documents (relative to `base`) into extraction inputs.
    pub fn inputs(&self, base: &Path) -> Result<ExtractionInputs, CliError> {
        let missing = |what: &str| CliError::Usage(format!("centre '{}': {what}", self.name));
        let param = |fit: &FitResult, name: &str| {
            fit.parameter(name)
                .map(|p| Measured::new(p.value, if p.sigma.is_finite() { p.sigma } else { 0.0 }))
                .ok_or_else(|| missing(&format!("fit document lacks parameter {name}")))
        };
        let flips = match (&self.flips, &self.series_fit) {
            (Some(f), None) => *f,
            (None, Some(path)) => {
                let fit: FitResult = read_json(&base.join(path))?;
                FlipSource::Series {
                    p_inf: param(&fit, "P_inf")?,
                    c: param(&fit, "c")?,
                }
            }
            _ => return Err(missing("give exactly one of 'flips' and 'series_fit'")),
        };
        let (t13, t14) = match (self.t13_ns, self.t14_ns, &self.lifetime_fit) {
            (Some(a), Some(b), None) => (a, b),
            (None, None, Some(path)) => {
                let fit: FitResult = read_json(&base.join(path))?;
                (param(&fit, "T13_ns")?, param(&fit, "T14_ns")?)
            }
            _ => return Err(missing("give either both 't13_ns' and 't14_ns' or 'lifetime_fit'")),
        };
        Ok(ExtractionInputs {
            flips,
            t13_ns: t13,
            t14_ns: t14,
            alpha: self.alpha,
            epsilon: self.epsilon,
        })
    }
}

#[derive(Debug, Serialize)]
pub struct CentreReport {
    pub name: String,
    pub inputs: ExtractionInputs,
    pub report: ExtractionReport,
}

/// Rows of the report: label, value, sigma.
fn rows(c: &CentreReport) -> Vec<(&'static str, f64, f64)> {
    let r = &c.report;
    vec![
        ("p12", r.flips.p12, r.sigma_p12),
        ("p21", r.flips.p21, r.sigma_p21),
        ("T13 (ns)", c.inputs.t13_ns.value, c.inputs.t13_ns.sigma),
        ("T14 (ns)", c.inputs.t14_ns.value, c.inputs.t14_ns.sigma),
        ("p35", r.isc.p35, r.sigma_p35),
        ("p45", r.isc.p45, r.sigma_p45),
        ("p51/p52", r.isc.branching_ratio, r.sigma_branching_ratio),
    ]
}

/// Plain-text table with one column per centre.
pub fn render_table(reports: &[CentreReport]) -> String {
    let mut s = String::new();
    let _ = write!(s, "{:<10}", "");
    for r in reports {
        let _ = write!(s, " | {:>18}", r.name);
    }
    s.push('\n');
    s.push_str(&"-".repeat(10 + 21 * reports.len()));
    s.push('\n');
    let table: Vec<_> = reports.iter().map(rows).collect();
    for i in 0..table.first().map_or(0, Vec::len) {
        let _ = write!(s, "{:<10}", table[0][i].0);
        for col in &table {
            let (_, v, e) = col[i];
            let _ = write!(s, " | {:>18}", format!("{v:.3} ± {e:.3}"));
        }
        s.push('\n');
    }
    s
}

/// Runs the extraction with uncertainty propagation for every centre and
/// writes `extract.csv`, `extract.json` and a manifest.
pub fn extract(config: &ExtractConfig, base: &Path, out: &Path) -> Result<Vec<CentreReport>, CliError> {
    if config.centres.is_empty() {
        return Err(CliError::Usage("no centres to extract".into()));
    }
    let reports = config
        .centres
        .iter()
        .map(|c| {
            let inputs = c.inputs(base)?;
            let report = uncertainty_propagation(&inputs, config.draws, config.seed).map_err(|e| match e {
                nvcycle_core::Error::InvalidParameter { .. } => CliError::Model(e),
                other => CliError::Infeasible(other),
            })?;
            for w in &report.warnings {
                eprintln!("warning ({}): {w}", c.name);
            }
            Ok(CentreReport {
                name: c.name.clone(),
                inputs,
                report,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let mut outputs = Outputs::create(out)?;
    let mut csv = csv::Writer::from_writer(Vec::new());
    csv.write_record(["quantity", "centre", "value", "sigma"])
        .expect("in-memory write");
    for r in &reports {
        for (q, v, e) in rows(r) {
            csv.write_record([q, r.name.as_str(), &v.to_string(), &e.to_string()])
                .expect("in-memory write");
        }
    }
    outputs.write("extract.csv", &csv.into_inner().expect("in-memory flush"))?;
    outputs.write("extract.txt", render_table(&reports).as_bytes())?;
    outputs.write_json("extract.json", &reports)?;
    outputs.finish("extract", config)?;
    Ok(reports)
}
