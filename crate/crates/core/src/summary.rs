//! Posterior summaries computed from stored draws: inclusion probabilities,
//! bridging frequencies, odds ratios, the median model, and CSV/JSON export.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::quantile_sorted;
use crate::runner::{ChainDraws, Manifest};

/// Posterior mean with an equal-tailed 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn from_draws(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Some(Self {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            lo: quantile_sorted(&sorted, 0.025),
            hi: quantile_sorted(&sorted, 0.975),
        })
    }
}

/// Every chain's draws of one quantity, concatenated draw-major.
fn pooled<'a>(chains: &'a [ChainDraws], name: &str) -> Result<(usize, Vec<&'a [f64]>)> {
    let mut width = None;
    let mut rows = Vec::new();
    for c in chains {
        let q = c.require(name)?;
        let w = q.width();
        if *width.get_or_insert(w) != w {
            return Err(Error::InvalidData(format!("{name} has different shapes across chains")));
        }
        rows.extend((0..q.count()).map(|s| q.draw(s)));
    }
    Ok((width.unwrap_or(0), rows))
}

/// Elementwise posterior mean of a stored quantity over all chains.
pub fn posterior_mean(chains: &[ChainDraws], name: &str) -> Result<Vec<f64>> {
    let (w, rows) = pooled(chains, name)?;
    if rows.is_empty() {
        return Err(Error::InvalidData(format!("no draws of {name}")));
    }
    let mut acc = vec![0.0; w];
    for r in &rows {
        for (a, v) in acc.iter_mut().zip(r.iter()) {
            *a += v;
        }
    }
    Ok(acc.into_iter().map(|a| a / rows.len() as f64).collect())
}

/// `(1/S) Σ_s ξ_k^(s)` over every kept draw of every chain.
pub fn compute_pip(chains: &[ChainDraws]) -> Result<Vec<f64>> {
    posterior_mean(chains, "xi")
}

/// Sign of the mean coefficient over draws that include the covariate
/// (0 when it is never included).
pub fn pip_sign(chains: &[ChainDraws]) -> Result<Vec<f64>> {
    let (w, xi) = pooled(chains, "xi")?;
    let (_, eta) = pooled(chains, "eta")?;
    Ok((0..w)
        .map(|k| {
            let (mut sum, mut n) = (0.0, 0usize);
            for (x, e) in xi.iter().zip(&eta) {
                if x[k] == 1.0 {
                    sum += e[k];
                    n += 1;
                }
            }
            if n == 0 {
                0.0
            } else {
                (sum / n as f64).signum()
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupBridging {
    pub group: String,
    pub size: usize,
    pub frequency: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bridging {
    pub frequency: Interval,
    pub by_group: Vec<GroupBridging>,
}

/// Share of bridges per draw, optionally within each group of a partition
/// of the legislators (given as one label per legislator).
pub fn bridging_frequency(chains: &[ChainDraws], groups: Option<&[String]>) -> Result<Bridging> {
    let (ni, rows) = pooled(chains, "zeta")?;
    let per_draw: Vec<f64> = rows.iter().map(|z| z.iter().sum::<f64>() / ni as f64).collect();
    let frequency = Interval::from_draws(&per_draw).ok_or_else(|| Error::InvalidData("no draws of zeta".into()))?;
    let mut by_group = Vec::new();
    if let Some(labels) = groups {
        if labels.len() != ni {
            return Err(Error::InvalidData(format!(
                "{} group labels for {ni} legislators",
                labels.len()
            )));
        }
        let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, g) in labels.iter().enumerate() {
            members.entry(g.as_str()).or_default().push(i);
        }
        for (g, idx) in members {
            let vals: Vec<f64> = rows
                .iter()
                .map(|z| idx.iter().map(|i| z[*i]).sum::<f64>() / idx.len() as f64)
                .collect();
            by_group.push(GroupBridging {
                group: g.to_string(),
                size: idx.len(),
                frequency: Interval::from_draws(&vals).expect("non-empty"),
            });
        }
    }
    Ok(Bridging { frequency, by_group })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OddsRatio {
    pub covariate: String,
    /// Increment in the covariate's original units.
    pub increment: f64,
    /// Averaged over all draws, with excluded draws contributing 1.
    pub unconditional: Interval,
    /// Averaged over draws that include the covariate.
    pub conditional: Option<Interval>,
}

/// Multiplicative change in the odds of being a bridge when covariate `k`
/// grows by `increment`. Centering only shifts columns, so an increment in
/// original units equals the same increment in design units.
pub fn odds_ratio(chains: &[ChainDraws], manifest: &Manifest, covariate: &str, increment: f64) -> Result<OddsRatio> {
    let k = manifest
        .covariate_names
        .iter()
        .position(|c| c == covariate)
        .ok_or_else(|| Error::InvalidData(format!("unknown covariate {covariate}")))?;
    let (_, xi) = pooled(chains, "xi")?;
    let (_, eta) = pooled(chains, "eta")?;
    let factors: Vec<f64> = eta.iter().map(|e| (increment * e[k]).exp()).collect();
    let included: Vec<f64> = factors.iter().zip(&xi).filter(|(_, x)| x[k] == 1.0).map(|(f, _)| *f).collect();
    Ok(OddsRatio {
        covariate: covariate.to_string(),
        increment,
        unconditional: Interval::from_draws(&factors).ok_or_else(|| Error::InvalidData("no draws of eta".into()))?,
        conditional: Interval::from_draws(&included),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pip {
    pub covariate: String,
    pub pip: f64,
    pub sign: f64,
    pub in_median_model: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub n_chains: usize,
    pub n_draws: usize,
    pub pips: Vec<Pip>,
    /// `{k : PIP_k > 0.5}`.
    pub median_model: Vec<String>,
    /// Posterior distribution of the number of included covariates.
    pub model_size: Vec<f64>,
    pub bridging: Bridging,
    pub odds_ratios: Vec<OddsRatio>,
}

/// Builds the report. `increments` maps covariate names to increments in
/// original units; covariates not listed use an increment of 1.
pub fn summarize(
    chains: &[ChainDraws],
    manifest: &Manifest,
    groups: Option<&[String]>,
    increments: &BTreeMap<String, f64>,
) -> Result<SummaryReport> {
    for name in increments.keys() {
        if !manifest.covariate_names.contains(name) {
            return Err(Error::InvalidData(format!("unknown covariate {name}")));
        }
    }
    let names = &manifest.covariate_names;
    let pip = compute_pip(chains)?;
    let sign = pip_sign(chains)?;
    let pips: Vec<Pip> = names
        .iter()
        .enumerate()
        .map(|(k, c)| Pip {
            covariate: c.clone(),
            pip: pip[k],
            sign: sign[k],
            in_median_model: pip[k] > 0.5,
        })
        .collect();
    let (_, sizes) = pooled(chains, "model_size")?;
    let mut model_size = vec![0.0; names.len() + 1];
    for s in &sizes {
        model_size[s[0] as usize] += 1.0 / sizes.len() as f64;
    }
    let odds_ratios = names
        .iter()
        .map(|c| odds_ratio(chains, manifest, c, increments.get(c).copied().unwrap_or(1.0)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SummaryReport {
        n_chains: chains.len(),
        n_draws: sizes.len(),
        median_model: pips.iter().filter(|p| p.in_median_model).map(|p| p.covariate.clone()).collect(),
        pips,
        model_size,
        bridging: bridging_frequency(chains, groups)?,
        odds_ratios,
    })
}

fn csv_writer(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn interval_cells(i: &Interval) -> String {
    format!("{},{},{}", i.mean, i.lo, i.hi)
}

/// Writes `summary.json`, `pips.csv`, `bridging.csv`, `odds_ratios.csv`,
/// `model_size.csv`, `bridging_draws.csv` and `ideal_points.csv` to `dir`.
pub fn export_report(
    report: &SummaryReport,
    chains: &[ChainDraws],
    manifest: &Manifest,
    groups: Option<&[String]>,
    dir: &Path,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json_path = dir.join("summary.json");
    std::fs::write(&json_path, serde_json::to_string_pretty(report)? + "\n").map_err(|e| Error::io(&json_path, e))?;

    let write = |name: &str, body: &dyn Fn(&mut BufWriter<File>) -> std::io::Result<()>| -> Result<()> {
        let path = dir.join(name);
        let mut w = csv_writer(&path)?;
        body(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(&path, e))
    };

    write("pips.csv", &|w| {
        writeln!(w, "covariate,pip,sign,in_median_model")?;
        for p in &report.pips {
            writeln!(w, "{},{},{},{}", p.covariate, p.pip, p.sign, p.in_median_model)?;
        }
        Ok(())
    })?;
    write("bridging.csv", &|w| {
        writeln!(w, "group,size,mean,lo,hi")?;
        writeln!(w, "all,{},{}", manifest.legislator_ids.len(), interval_cells(&report.bridging.frequency))?;
        for g in &report.bridging.by_group {
            writeln!(w, "{},{},{}", g.group, g.size, interval_cells(&g.frequency))?;
        }
        Ok(())
    })?;
    write("odds_ratios.csv", &|w| {
        writeln!(w, "covariate,increment,mean,lo,hi,conditional_mean,conditional_lo,conditional_hi")?;
        for o in &report.odds_ratios {
            let cond = o.conditional.as_ref().map_or(",,".to_string(), interval_cells);
            writeln!(w, "{},{},{},{}", o.covariate, o.increment, interval_cells(&o.unconditional), cond)?;
        }
        Ok(())
    })?;
    write("model_size.csv", &|w| {
        writeln!(w, "size,probability")?;
        for (k, p) in report.model_size.iter().enumerate() {
            writeln!(w, "{k},{p}")?;
        }
        Ok(())
    })?;

    let labels: Option<Vec<(String, Vec<usize>)>> = groups.map(|g| {
        let mut m: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, l) in g.iter().enumerate() {
            m.entry(l.as_str()).or_default().push(i);
        }
        m.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    });
    write("bridging_draws.csv", &|w| {
        writeln!(w, "chain,draw,group,frequency")?;
        for c in chains {
            let z = c.get("zeta").expect("zeta is always stored");
            for s in 0..z.count() {
                let d = z.draw(s);
                writeln!(w, "{},{s},all,{}", c.chain, d.iter().sum::<f64>() / d.len() as f64)?;
                for (g, idx) in labels.iter().flatten() {
                    let f = idx.iter().map(|i| d[*i]).sum::<f64>() / idx.len() as f64;
                    writeln!(w, "{},{s},{g},{f}", c.chain)?;
                }
            }
        }
        Ok(())
    })?;

    let p_bridge = posterior_mean(chains, "zeta")?;
    let b0 = per_element_intervals(chains, "beta0")?;
    let b1 = per_element_intervals(chains, "beta1")?;
    write("ideal_points.csv", &|w| {
        writeln!(w, "legislator_id,p_bridge,beta0_mean,beta0_lo,beta0_hi,beta1_mean,beta1_lo,beta1_hi")?;
        for (i, id) in manifest.legislator_ids.iter().enumerate() {
            let cells = |v: &Option<Vec<Interval>>| v.as_ref().map_or(",,".to_string(), |v| interval_cells(&v[i]));
            writeln!(w, "{id},{},{},{}", p_bridge[i], cells(&b0), cells(&b1))?;
        }
        Ok(())
    })
}

fn per_element_intervals(chains: &[ChainDraws], name: &str) -> Result<Option<Vec<Interval>>> {
    if chains.iter().any(|c| c.get(name).is_none()) {
        return Ok(None);
    }
    let (w, rows) = pooled(chains, name)?;
    Ok(Some(
        (0..w)
            .map(|k| {
                let col: Vec<f64> = rows.iter().map(|r| r[k]).collect();
                Interval::from_draws(&col).expect("non-empty")
            })
            .collect(),
    ))
}
