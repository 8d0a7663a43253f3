//! Executes an [`ExperimentConfig`] and writes its tables.
//!
//! Per point `c{coarse}_f{fine}` (CSV format):
//!
//! * `_stage1.csv`: `index,value,window_coordinate,in_window`
//! * `_stage2.csv`: `index,re,im,residual,assignment` in window coordinates
//!   (`z` in direct mode, `w = 1/(λ − γ)` scale in inverse mode);
//!   `assignment` is `target:<k>`, `unexpected`, `echo` or `real`
//! * `_clusters.csv`: `cluster,target_re,target_im,multiplicity,mean_re,mean_im,loc_lo,loc_hi,members`
//! * `_pollution.csv`: `index,value,verdict,estimate,interval_lo,interval_hi`
//!
//! In JSON format each point is one `<tag>.json` file with the same content.
//! Sweeps with a `[rates]` section also produce `rates.csv` (`coarse,fine,abscissa,cluster_error,galerkin_error`)
//! and `rates_fit.csv` (`quantity,slope,intercept,r_squared,points`), or their JSON forms.
//! `manifest.json` lists every file and marks incomplete runs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use super::config::{ExperimentConfig, OutputFormat, ProblemConfig, RateAxis};
use super::matrix_file::{as_input_error, import_matrices};
use crate::analysis::{distance_to_real_set, distance_to_set, fit_rate, RateFit};
use crate::dissipative::{project_between, two_stage_on, ProjectionQ, TwoStageOptions, TwoStageResult, Verdict};
use crate::error::{Error, Result};
use crate::galerkin::{eigenvalues_of_t, SpectralWindow};
use crate::linalg::{c64, DenseMatrix};
use crate::problems::{assemble, FormMatrices, ProblemSpec, SpaceId};

/// Numbers in text tables carry 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

enum Source {
    Builtin(ProblemSpec),
    Matrices(FormMatrices),
}

impl Source {
    fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        match (&cfg.problem, cfg.problem.builtin()) {
            (_, Some(p)) => Ok(Source::Builtin(p)),
            (ProblemConfig::File { path }, None) => Ok(Source::Matrices(
                import_matrices(path).map_err(|e| as_input_error(path, e))?,
            )),
            _ => unreachable!("every non-file problem is built in"),
        }
    }

    fn assemble(&self, level: usize) -> Result<FormMatrices> {
        match self {
            Source::Builtin(p) => assemble(p, level),
            Source::Matrices(fm) => fm.leading(level, SpaceId::new(fm.space().label.clone(), level)),
        }
    }

    fn project(&self, coarse: &FormMatrices, vectors: &DenseMatrix, fine: &FormMatrices) -> Result<ProjectionQ> {
        match self {
            Source::Builtin(p) => project_between(p, coarse, vectors, fine),
            Source::Matrices(_) => {
                if vectors.cols() == 0 {
                    return Ok(ProjectionQ::zero(fine.dim()));
                }
                let cd = coarse.dim();
                let lifted = DenseMatrix::from_fn(fine.dim(), vectors.cols(), |i, j| {
                    if i < cd {
                        vectors.get(i, j)
                    } else {
                        c64::ZERO
                    }
                })?;
                ProjectionQ::from_coefficients(&lifted, fine)
            }
        }
    }
}

/// One row of the rates table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateRow {
    pub coarse: usize,
    pub fine: usize,
    pub abscissa: f64,
    pub cluster_error: f64,
    pub galerkin_error: f64,
}

/// What a finished run produced.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    pub points: Vec<TwoStageResult>,
    pub rates: Vec<RateRow>,
    pub fits: BTreeMap<String, RateFit>,
}

fn assignments(result: &TwoStageResult) -> Vec<String> {
    let mut out = vec!["real".to_string(); result.stage_two.len()];
    for &i in &result.clusters.echoes {
        out[i] = "echo".into();
    }
    for (k, c) in result.clusters.clusters.iter().enumerate() {
        for &i in &c.members {
            out[i] = if c.target.is_some() {
                format!("target:{k}")
            } else {
                "unexpected".into()
            };
        }
    }
    out
}

fn stage_one_rows(result: &TwoStageResult, window: &SpectralWindow) -> Vec<(f64, f64, bool)> {
    result
        .stage_one
        .iter()
        .map(|&v| (v, window.coordinate(v), window.contains(v)))
        .collect()
}

fn write_file(path: PathBuf, content: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(&path, content).map_err(|e| Error::io(&path, e))?;
    files.push(path);
    Ok(())
}

fn opt_num(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn write_point_csv(dir: &Path, tag: &str, r: &TwoStageResult, window: &SpectralWindow, files: &mut Vec<PathBuf>) -> Result<()> {
    let mut s = String::from("index,value,window_coordinate,in_window\n");
    for (i, (v, w, inside)) in stage_one_rows(r, window).into_iter().enumerate() {
        let _ = writeln!(s, "{i},{},{},{}", fmt_f64(v), fmt_f64(w), inside);
    }
    write_file(dir.join(format!("{tag}_stage1.csv")), &s, files)?;

    let labels = assignments(r);
    let mut s = String::from("index,re,im,residual,assignment\n");
    for (i, z) in r.stage_two.iter().enumerate() {
        let res = opt_num(r.residuals.as_ref().map(|v| v[i]));
        let _ = writeln!(s, "{i},{},{},{res},{}", fmt_f64(z.re), fmt_f64(z.im), labels[i]);
    }
    write_file(dir.join(format!("{tag}_stage2.csv")), &s, files)?;

    let mut s = String::from("cluster,target_re,target_im,multiplicity,mean_re,mean_im,loc_lo,loc_hi,members\n");
    for (k, c) in r.clusters.clusters.iter().enumerate() {
        let members: Vec<String> = c.members.iter().map(|m| m.to_string()).collect();
        let _ = writeln!(
            s,
            "{k},{},{},{},{},{},{},{},{}",
            opt_num(c.target.map(|t| t.re)),
            opt_num(c.target.map(|t| t.im)),
            c.multiplicity,
            opt_num(c.mean.map(|m| m.re)),
            opt_num(c.mean.map(|m| m.im)),
            opt_num(c.localization.map(|i| i.lo)),
            opt_num(c.localization.map(|i| i.hi)),
            members.join(";")
        );
    }
    write_file(dir.join(format!("{tag}_clusters.csv")), &s, files)?;

    let mut s = String::from("index,value,verdict,estimate,interval_lo,interval_hi\n");
    for (i, e) in r.pollution.iter().enumerate() {
        let line = match &e.verdict {
            Verdict::Genuine { estimate, interval } => format!(
                "{i},{},genuine,{},{},{}",
                fmt_f64(e.value),
                fmt_f64(*estimate),
                fmt_f64(interval.lo),
                fmt_f64(interval.hi)
            ),
            Verdict::Polluted => format!("{i},{},polluted,,,", fmt_f64(e.value)),
        };
        s.push_str(&line);
        s.push('\n');
    }
    write_file(dir.join(format!("{tag}_pollution.csv")), &s, files)
}

fn write_point_json(dir: &Path, tag: &str, r: &TwoStageResult, window: &SpectralWindow, files: &mut Vec<PathBuf>) -> Result<()> {
    let labels = assignments(r);
    let stage_one: Vec<_> = stage_one_rows(r, window)
        .into_iter()
        .map(|(v, w, inside)| json!({"value": v, "window_coordinate": w, "in_window": inside}))
        .collect();
    let stage_two: Vec<_> = r
        .stage_two
        .iter()
        .enumerate()
        .map(|(i, z)| {
            json!({
                "re": z.re,
                "im": z.im,
                "residual": r.residuals.as_ref().map(|v| v[i]),
                "assignment": labels[i],
            })
        })
        .collect();
    let doc = json!({
        "coarse": r.coarse_level,
        "fine": r.fine_level,
        "rank": r.rank,
        "stage_one": stage_one,
        "stage_two": stage_two,
        "clusters": r.clusters,
        "pollution": r.pollution,
    });
    let text = serde_json::to_string_pretty(&doc).expect("point serializes");
    write_file(dir.join(format!("{tag}.json")), &text, files)
}

fn write_rates(dir: &Path, format: OutputFormat, rows: &[RateRow], fits: &BTreeMap<String, RateFit>, files: &mut Vec<PathBuf>) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut s = String::from("coarse,fine,abscissa,cluster_error,galerkin_error\n");
            for r in rows {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{}",
                    r.coarse,
                    r.fine,
                    fmt_f64(r.abscissa),
                    fmt_f64(r.cluster_error),
                    fmt_f64(r.galerkin_error)
                );
            }
            write_file(dir.join("rates.csv"), &s, files)?;
            if !fits.is_empty() {
                let mut s = String::from("quantity,slope,intercept,r_squared,points\n");
                for (name, f) in fits {
                    let _ = writeln!(
                        s,
                        "{name},{},{},{},{}",
                        fmt_f64(f.slope),
                        fmt_f64(f.intercept),
                        fmt_f64(f.r_squared),
                        f.levels.len()
                    );
                }
                write_file(dir.join("rates_fit.csv"), &s, files)?;
            }
        }
        OutputFormat::Json => {
            let text = serde_json::to_string_pretty(&json!({"rows": rows, "fits": fits})).expect("rates serialize");
            write_file(dir.join("rates.json"), &text, files)?;
        }
    }
    Ok(())
}

/// Computes the rates table rows of a sweep.
fn rate_row(
    source: &Source,
    cfg: &ExperimentConfig,
    window: &SpectralWindow,
    r: &TwoStageResult,
    rates: &super::config::RatesConfig,
) -> Result<RateRow> {
    let fine = source.assemble(r.fine_level)?;
    let galerkin: Vec<f64> = eigenvalues_of_t(&fine)?.iter().map(|&v| window.coordinate(v)).collect();
    let abscissa = match cfg.rate_axis() {
        RateAxis::Level => r.coarse_level as f64,
        RateAxis::MeshWidth => 1.0 / r.coarse_level as f64,
    };
    Ok(RateRow {
        coarse: r.coarse_level,
        fine: r.fine_level,
        abscissa,
        cluster_error: distance_to_set(c64::new(rates.reference, 1.0), &r.stage_two),
        galerkin_error: distance_to_real_set(rates.galerkin_reference.unwrap_or(rates.reference), &galerkin),
    })
}

/// Fits both error columns when the sweep has enough points.
pub fn fit_rows(rows: &[RateRow]) -> Result<BTreeMap<String, RateFit>> {
    let mut fits = BTreeMap::new();
    if rows.len() < crate::analysis::MIN_FIT_POINTS {
        return Ok(fits);
    }
    let cluster: Vec<(f64, f64)> = rows.iter().map(|r| (r.abscissa, r.cluster_error)).collect();
    let galerkin: Vec<(f64, f64)> = rows.iter().map(|r| (r.abscissa, r.galerkin_error)).collect();
    fits.insert("cluster_error".to_string(), fit_rate(&cluster)?);
    fits.insert("galerkin_error".to_string(), fit_rate(&galerkin)?);
    Ok(fits)
}

fn manifest(cfg: &ExperimentConfig, points: &[serde_json::Value], files: &[PathBuf], error: Option<&Error>) -> String {
    let names: Vec<String> = files
        .iter()
        .map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default())
        .collect();
    let doc = json!({
        "tool": "galerkin",
        "version": env!("CARGO_PKG_VERSION"),
        "status": if error.is_none() { "complete" } else { "incomplete" },
        "error": error.map(|e| e.to_string()),
        "config": cfg,
        "window_coordinates": if cfg.window.gamma.is_some() { "resolvent" } else { "spectral" },
        "points": points,
        "files": names,
    });
    serde_json::to_string_pretty(&doc).expect("manifest serializes")
}

/// Runs every configured point, then writes the manifest. On failure the
/// files written so far stay in place and the manifest is marked incomplete.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let dir = cfg.output.dir.clone();
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut files = Vec::new();
    let mut point_docs = Vec::new();
    let mut points = Vec::new();
    let mut rows = Vec::new();
    let outcome = (|| -> Result<BTreeMap<String, RateFit>> {
        let source = Source::from_config(cfg)?;
        let window = cfg.spectral_window()?;
        let options = TwoStageOptions {
            mode: cfg.stage_two.mode,
            cluster: cfg.cluster_options(),
            residuals: cfg.stage_two.residuals,
            ..TwoStageOptions::default()
        };
        for (coarse_level, fine_level) in cfg.levels.pairs()? {
            let coarse = source.assemble(coarse_level)?;
            let fine = source.assemble(fine_level)?;
            let result = two_stage_on(&coarse, &fine, &window, &options, |c, v, f| source.project(c, v, f))?;
            let tag = format!("c{coarse_level}_f{fine_level}");
            match cfg.output.format {
                OutputFormat::Csv => write_point_csv(&dir, &tag, &result, &window, &mut files)?,
                OutputFormat::Json => write_point_json(&dir, &tag, &result, &window, &mut files)?,
            }
            let genuine = result.pollution.iter().filter(|e| e.verdict.is_genuine()).count();
            point_docs.push(json!({
                "coarse": coarse_level,
                "fine": fine_level,
                "rank": result.rank,
                "note": if result.rank == 0 { Some("rank-0 Q: stage two equals the Galerkin spectrum on the fine level") } else { None },
                "targeted_clusters": result.clusters.targeted().filter(|c| c.multiplicity > 0).count(),
                "unexpected": result.clusters.unexpected().count(),
                "genuine": genuine,
                "polluted": result.pollution.len() - genuine,
                "max_residual": result.residuals.as_ref().map(|v| v.iter().copied().fold(0.0, f64::max)),
            }));
            if let Some(rates) = &cfg.rates {
                rows.push(rate_row(&source, cfg, &window, &result, rates)?);
            }
            points.push(result);
        }
        let fits = fit_rows(&rows)?;
        if cfg.rates.is_some() {
            write_rates(&dir, cfg.output.format, &rows, &fits, &mut files)?;
        }
        Ok(fits)
    })();
    let text = manifest(cfg, &point_docs, &files, outcome.as_ref().err());
    let manifest_path = dir.join("manifest.json");
    fs::write(&manifest_path, text).map_err(|e| Error::io(&manifest_path, e))?;
    let fits = outcome?;
    files.push(manifest_path);
    Ok(RunSummary {
        files,
        points,
        rates: rows,
        fits,
    })
}

/// Reads `rates.csv` back into rows.
pub fn read_rates_csv(path: &Path) -> Result<Vec<RateRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (no, line) in text.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let bad = || Error::Format(format!("{}: bad row {}", path.display(), no + 1));
        if f.len() != 5 {
            return Err(bad());
        }
        rows.push(RateRow {
            coarse: f[0].parse().map_err(|_| bad())?,
            fine: f[1].parse().map_err(|_| bad())?,
            abscissa: f[2].parse().map_err(|_| bad())?,
            cluster_error: f[3].parse().map_err(|_| bad())?,
            galerkin_error: f[4].parse().map_err(|_| bad())?,
        });
    }
    Ok(rows)
}
