//! Exhaustive sweeps over a lattice of config settings.

use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::outputs::{ManifestEntry, OutputLayout};
use super::train::{run_seed, selection_score, TrainOptions};
use crate::error::{Error, Result};
use crate::pbr::{LAMBDA_GRID, Q_GRID};
use crate::pcm::{InjectionKind, SamplingStrategy};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", content = "values", rename_all = "snake_case")]
pub enum Axis {
    LearningRate(Vec<f64>),
    Q(Vec<usize>),
    LambdaProx(Vec<f64>),
    LambdaDiv(Vec<f64>),
    Injection(Vec<InjectionKind>),
    Sampling(Vec<SamplingStrategy>),
}

impl Axis {
    pub const NAMES: [&'static str; 6] = [
        "lr",
        "q",
        "lambda_prox",
        "lambda_div",
        "injection",
        "sampling",
    ];

    /// The axis with its standard value list.
    pub fn standard(name: &str, cfg: &ExperimentConfig) -> Result<Self> {
        Ok(match name {
            "lr" => Self::LearningRate(cfg.optimizer.lr_grid.clone()),
            "q" => Self::Q(Q_GRID.to_vec()),
            "lambda_prox" => Self::LambdaProx(LAMBDA_GRID.to_vec()),
            "lambda_div" => Self::LambdaDiv(LAMBDA_GRID.to_vec()),
            "injection" => Self::Injection(InjectionKind::ALL.to_vec()),
            "sampling" => Self::Sampling(vec![
                SamplingStrategy::Full,
                SamplingStrategy::Random {
                    fraction: 0.5,
                    seed: 0,
                },
                SamplingStrategy::Supervised {
                    cluster_range: [2, 10],
                    seed: 0,
                },
            ]),
            other => {
                return Err(Error::config(format!(
                    "unknown sweep axis `{other}` (expected one of {})",
                    Self::NAMES.join(", ")
                )))
            }
        })
    }

    /// Axis with explicit comma-separated values, e.g. `q` + `"2,4,8"`.
    pub fn parse(name: &str, values: &str) -> Result<Self> {
        fn list<T: FromStr>(name: &str, values: &str) -> Result<Vec<T>> {
            values
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse()
                        .map_err(|_| Error::config(format!("bad value `{v}` for axis `{name}`")))
                })
                .collect()
        }
        Ok(match name {
            "lr" => Self::LearningRate(list(name, values)?),
            "q" => Self::Q(list(name, values)?),
            "lambda_prox" => Self::LambdaProx(list(name, values)?),
            "lambda_div" => Self::LambdaDiv(list(name, values)?),
            "injection" => Self::Injection(
                values
                    .split(',')
                    .map(|v| v.trim().parse())
                    .collect::<Result<_>>()?,
            ),
            other => {
                return Err(Error::config(format!(
                    "axis `{other}` takes no explicit values"
                )))
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::LearningRate(_) => "lr",
            Self::Q(_) => "q",
            Self::LambdaProx(_) => "lambda_prox",
            Self::LambdaDiv(_) => "lambda_div",
            Self::Injection(_) => "injection",
            Self::Sampling(_) => "sampling",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Self::LearningRate(v) | Self::LambdaProx(v) | Self::LambdaDiv(v) => v.len(),
            Self::Q(v) => v.len(),
            Self::Injection(v) => v.len(),
            Self::Sampling(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn label(&self, i: usize) -> String {
        match self {
            Self::LearningRate(v) | Self::LambdaProx(v) | Self::LambdaDiv(v) => v[i].to_string(),
            Self::Q(v) => v[i].to_string(),
            Self::Injection(v) => v[i].to_string(),
            Self::Sampling(v) => v[i].name().to_string(),
        }
    }

    pub fn apply(&self, cfg: &mut ExperimentConfig, i: usize) -> Result<()> {
        match self {
            Self::LearningRate(v) => cfg.optimizer.learning_rate = v[i],
            Self::Q(v) => pbr_section(cfg, self.name())?.q = v[i],
            Self::LambdaProx(v) => pbr_section(cfg, self.name())?.lambda_prox = v[i],
            Self::LambdaDiv(v) => pbr_section(cfg, self.name())?.lambda_div = v[i],
            Self::Injection(v) => pcm_section(cfg, self.name())?.injection = v[i],
            Self::Sampling(v) => pcm_section(cfg, self.name())?.sampling = v[i].clone(),
        }
        Ok(())
    }
}

fn pbr_section<'a>(
    cfg: &'a mut ExperimentConfig,
    axis: &str,
) -> Result<&'a mut crate::pbr::PbrConfig> {
    let method = cfg.method;
    cfg.pbr
        .as_mut()
        .ok_or_else(|| Error::config(format!("axis `{axis}` needs method pbr, not {method}")))
}

fn pcm_section<'a>(
    cfg: &'a mut ExperimentConfig,
    axis: &str,
) -> Result<&'a mut crate::pcm::PcmConfig> {
    let method = cfg.method;
    cfg.pcm
        .as_mut()
        .ok_or_else(|| Error::config(format!("axis `{axis}` needs a PCM method, not {method}")))
}

/// Cartesian product of axes.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub axes: Vec<Axis>,
}

impl Grid {
    pub fn new(axes: Vec<Axis>) -> Self {
        Self { axes }
    }

    pub fn size(&self) -> usize {
        if self.axes.is_empty() {
            0
        } else {
            self.axes.iter().map(Axis::len).product()
        }
    }

    /// Index tuples in row-major order (last axis fastest).
    pub fn points(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new()];
        for axis in &self.axes {
            out = out
                .into_iter()
                .flat_map(|p| {
                    (0..axis.len()).map(move |i| {
                        let mut q = p.clone();
                        q.push(i);
                        q
                    })
                })
                .collect();
        }
        if self.axes.is_empty() {
            Vec::new()
        } else {
            out
        }
    }

    /// One config per lattice point, each validated.
    pub fn configs(
        &self,
        base: &ExperimentConfig,
    ) -> Result<Vec<(Vec<(String, String)>, ExperimentConfig)>> {
        if self.size() == 0 {
            return Err(Error::config("empty sweep lattice"));
        }
        self.points()
            .into_iter()
            .map(|point| {
                let mut cfg = base.clone();
                let mut settings = Vec::new();
                for (axis, &i) in self.axes.iter().zip(&point) {
                    axis.apply(&mut cfg, i)?;
                    settings.push((axis.name().to_string(), axis.label(i)));
                }
                cfg.validate()?;
                Ok((settings, cfg))
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub settings: Vec<(String, String)>,
    pub fingerprint: String,
    /// Mean dev selection score over folds.
    pub score: f64,
    pub dev_macro_f1: f64,
    pub dev_weighted_f1: f64,
    /// Held-out macro-F1 (test, or dev without a test split).
    pub heldout_macro_f1: f64,
    pub best_epochs: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub seed: u64,
    pub rows: Vec<GridRow>,
    pub best: usize,
    pub best_config: ExperimentConfig,
}

/// Trains every lattice point with `seed` (in parallel) and keeps the one
/// with the highest dev score; ties keep the earlier point.
pub fn grid_search(
    base: &ExperimentConfig,
    grid: &Grid,
    seed: u64,
    opts: &TrainOptions,
) -> Result<GridResult> {
    let configs = grid.configs(base)?;
    let rows = configs
        .par_iter()
        .map(|(settings, cfg)| {
            let run = run_seed(cfg, seed, opts)?;
            let n = run.dev.len() as f64;
            let mean = |f: &dyn Fn(&crate::metrics::RunReport) -> f64| {
                run.dev.iter().map(f).sum::<f64>() / n
            };
            Ok(GridRow {
                settings: settings.clone(),
                fingerprint: cfg.fingerprint(),
                score: mean(&|r| selection_score(r, cfg.selection_metric)),
                dev_macro_f1: mean(&|r| r.macro_f1),
                dev_weighted_f1: mean(&|r| r.weighted_f1),
                heldout_macro_f1: run.report.macro_f1,
                best_epochs: run
                    .states
                    .iter()
                    .map(|s| s.best_epoch.unwrap_or(0))
                    .collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, r) in rows.iter().enumerate() {
        if r.score > rows[best].score {
            best = i;
        }
    }
    Ok(GridResult {
        seed,
        best_config: configs[best].1.clone(),
        rows,
        best,
    })
}

impl GridResult {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        if let Some(first) = self.rows.first() {
            let mut header: Vec<&str> = first.settings.iter().map(|(k, _)| k.as_str()).collect();
            header.extend([
                "score",
                "dev_macro_f1",
                "dev_weighted_f1",
                "heldout_macro_f1",
                "fingerprint",
            ]);
            w.write_record(&header)?;
        }
        for r in &self.rows {
            let mut rec: Vec<String> = r.settings.iter().map(|(_, v)| v.clone()).collect();
            rec.extend([
                r.score.to_string(),
                r.dev_macro_f1.to_string(),
                r.dev_weighted_f1.to_string(),
                r.heldout_macro_f1.to_string(),
                r.fingerprint.clone(),
            ]);
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Comparison table in percent, best row marked with `*`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let Some(first) = self.rows.first() else {
            return out;
        };
        let keys: Vec<&str> = first.settings.iter().map(|(k, _)| k.as_str()).collect();
        let width = |i: usize| {
            self.rows
                .iter()
                .map(|r| r.settings[i].1.len())
                .chain([keys[i].len()])
                .max()
                .unwrap_or(0)
        };
        let widths: Vec<usize> = (0..keys.len()).map(width).collect();
        for (k, w) in keys.iter().zip(&widths) {
            let _ = write!(out, "{k:<w$}  ");
        }
        out.push_str(" dev mF1   dev wF1  held mF1\n");
        for (i, r) in self.rows.iter().enumerate() {
            for ((_, v), w) in r.settings.iter().zip(&widths) {
                let _ = write!(out, "{v:<w$}  ");
            }
            let _ = writeln!(
                out,
                "{:>8.2}  {:>8.2}  {:>8.2}{}",
                100.0 * r.dev_macro_f1,
                100.0 * r.dev_weighted_f1,
                100.0 * r.heldout_macro_f1,
                if i == self.best { " *" } else { "" }
            );
        }
        out
    }

    /// Writes `<stem>.csv` and `<stem>.json` under `reports/`.
    pub fn save(&self, layout: &OutputLayout, stem: &str) -> Result<()> {
        layout.ensure()?;
        let entry = ManifestEntry {
            fingerprint: self.best_config.fingerprint(),
            seed: Some(self.seed),
            epoch: None,
            note: format!("sweep of {} points", self.rows.len()),
        };
        let csv_path = layout.reports.join(format!("{stem}.csv"));
        std::fs::write(&csv_path, self.to_csv()?)?;
        layout.record(&csv_path, entry.clone())?;
        layout.write_json(&layout.reports, &format!("{stem}.json"), self, entry)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::BackboneConfig;
    use crate::harness::config::Method;
    use crate::pbr::PbrConfig;

    fn pbr_cfg() -> ExperimentConfig {
        ExperimentConfig {
            method: Method::Pbr,
            pbr: Some(PbrConfig::default()),
            backbone: BackboneConfig::small(),
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn lattice_sizes() {
        let cfg = pbr_cfg();
        let g = Grid::new(vec![
            Axis::standard("q", &cfg).unwrap(),
            Axis::standard("lambda_prox", &cfg).unwrap(),
            Axis::standard("lambda_div", &cfg).unwrap(),
        ]);
        assert_eq!(g.size(), 54);
        let configs = g.configs(&cfg).unwrap();
        assert_eq!(configs.len(), 54);
        assert_eq!(configs[0].1.pbr.as_ref().unwrap().q, 2);
        assert_eq!(configs[53].1.pbr.as_ref().unwrap().lambda_div, 10.0);
        let fps: std::collections::HashSet<String> =
            configs.iter().map(|(_, c)| c.fingerprint()).collect();
        assert_eq!(fps.len(), 54);
    }

    #[test]
    fn empty_lattice_and_wrong_method() {
        let cfg = pbr_cfg();
        assert!(Grid::default().configs(&cfg).is_err());
        assert!(Grid::new(vec![Axis::Q(vec![])]).configs(&cfg).is_err());
        let base = ExperimentConfig {
            method: Method::Baseline,
            pbr: None,
            ..pbr_cfg()
        };
        assert!(Grid::new(vec![Axis::Q(vec![4])]).configs(&base).is_err());
        assert!(Grid::new(vec![Axis::standard("injection", &base).unwrap()])
            .configs(&base)
            .is_err());
        assert!(Axis::standard("depth", &base).is_err());
    }

    #[test]
    fn explicit_values() {
        assert_eq!(Axis::parse("q", "2, 4").unwrap(), Axis::Q(vec![2, 4]));
        assert_eq!(
            Axis::parse("injection", "film,cln").unwrap(),
            Axis::Injection(vec![InjectionKind::Film, InjectionKind::Cln])
        );
        assert!(Axis::parse("q", "two").is_err());
    }
}
