//! Delimited-text result files.
//!
//! Every table starts with `# key=value` comment lines recording the tool
//! version, the data source, the seed and the echoed run configuration, then
//! one tab-separated header line and the rows. Numbers carry nine
//! significant digits.

use std::fs;
use std::path::Path;

use faer::Mat;

use super::fmt_num;
use crate::baseline::BenchReport;
use crate::error::{Error, Result};
use crate::schmidt::{OneDDecomposition, SchmidtResult};
use crate::spdc::{CorrelationMatrix, IntensityProfile, Provenance, WavevectorGrid};

/// Provenance recorded in every file's comment block.
#[derive(Debug, Clone, Default)]
pub struct BundleContext {
    /// What produced the data, e.g. `theory` or `reconstruct stack.qstk`.
    pub source: String,
    pub seed: Option<u64>,
    /// Echoed `RunConfig::to_text()`; each line becomes `# config.<line>`.
    pub config: Option<String>,
    /// Number of 2D mode grids to write.
    pub modes_2d: usize,
    /// Extra scalar metrics, e.g. total intensity.
    pub metrics: Vec<(String, f64)>,
    pub diagnostics: Vec<(String, String)>,
}

impl BundleContext {
    fn header(&self, extra: &[(&str, String)]) -> String {
        let mut s = format!("# tool=spdc-schmidt {}\n", env!("CARGO_PKG_VERSION"));
        s += &format!("# source={}\n", self.source);
        s += &format!(
            "# seed={}\n",
            self.seed.map_or("none".to_string(), |v| v.to_string())
        );
        for (k, v) in extra {
            s += &format!("# {k}={v}\n");
        }
        if let Some(cfg) = &self.config {
            for line in cfg.lines().filter(|l| !l.trim().is_empty()) {
                s += &format!("# config.{line}\n");
            }
        }
        s
    }
}

/// A parsed delimited-text file.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub comments: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn comment(&self, key: &str) -> Option<&str> {
        self.comments
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    fn numbers(&self, path: &Path) -> Result<Vec<Vec<f64>>> {
        self.rows
            .iter()
            .enumerate()
            .map(|(r, row)| {
                row.iter()
                    .map(|s| {
                        s.parse::<f64>().map_err(|_| {
                            Error::Data(format!("{}: row {}: bad number '{s}'", path.display(), r + 1))
                        })
                    })
                    .collect()
            })
            .collect()
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_table(path: &Path) -> Result<Table> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut comments = Vec::new();
    let mut header = None;
    let mut rows = Vec::new();
    for line in text.lines() {
        if let Some(c) = line.strip_prefix('#') {
            if let Some((k, v)) = c.trim().split_once('=') {
                comments.push((k.trim().to_string(), v.trim().to_string()));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<String> = line.split('\t').map(str::to_string).collect();
        if header.is_none() {
            header = Some(cells);
        } else {
            rows.push(cells);
        }
    }
    let header =
        header.ok_or_else(|| Error::Data(format!("{}: missing header line", path.display())))?;
    if let Some(r) = rows.iter().position(|r| r.len() != header.len()) {
        return Err(Error::Data(format!(
            "{}: row {} has {} cells, header has {}",
            path.display(),
            r + 1,
            rows[r].len(),
            header.len()
        )));
    }
    Ok(Table {
        comments,
        header,
        rows,
    })
}

fn grid_comments(grid: &WavevectorGrid) -> Vec<(&'static str, String)> {
    vec![
        ("n_points", grid.n_points.to_string()),
        ("pitch_mrad", grid.pitch_mrad.to_string()),
        ("center_index", grid.center_index.to_string()),
    ]
}

fn grid_from(t: &Table, path: &Path) -> Result<WavevectorGrid> {
    let get = |k: &str| {
        t.comment(k)
            .ok_or_else(|| Error::Data(format!("{}: missing '# {k}=' comment", path.display())))
    };
    let n: usize = get("n_points")?
        .parse()
        .map_err(|_| Error::Data(format!("{}: bad n_points", path.display())))?;
    let pitch: f64 = get("pitch_mrad")?
        .parse()
        .map_err(|_| Error::Data(format!("{}: bad pitch_mrad", path.display())))?;
    WavevectorGrid::new(n, pitch)
}

/// Square grid with angle labels on the first row and column.
fn matrix_text(m: &Mat<f64>, grid: &WavevectorGrid) -> String {
    let angles = grid.angles_mrad();
    let mut s = String::from("angle_mrad");
    for a in &angles {
        s += "\t";
        s += &fmt_num(*a);
    }
    s += "\n";
    for (r, a) in angles.iter().enumerate() {
        s += &fmt_num(*a);
        for c in 0..m.ncols() {
            s += "\t";
            s += &fmt_num(m[(r, c)]);
        }
        s += "\n";
    }
    s
}

fn matrix_from(t: &Table, path: &Path) -> Result<Mat<f64>> {
    let nums = t.numbers(path)?;
    let n = nums.len();
    if t.header.len() != n + 1 {
        return Err(Error::Data(format!("{}: matrix is not square", path.display())));
    }
    Ok(Mat::from_fn(n, n, |r, c| nums[r][c + 1]))
}

pub fn write_correlation(path: &Path, corr: &CorrelationMatrix, ctx: &BundleContext) -> Result<()> {
    let mut extra = grid_comments(&corr.grid);
    extra.push(("provenance", corr.provenance.as_str().into()));
    if let Some(q) = corr.quadrature {
        extra.push(("quadrature_nodes", q.nodes.to_string()));
        extra.push(("quadrature_change", fmt_num(q.achieved)));
        extra.push(("imaginary_residual", fmt_num(q.imaginary_residual)));
    }
    write(path, &(ctx.header(&extra) + &matrix_text(&corr.values, &corr.grid)))
}

pub fn read_correlation(path: &Path) -> Result<CorrelationMatrix> {
    let t = read_table(path)?;
    let grid = grid_from(&t, path)?;
    let provenance = match t.comment("provenance") {
        Some("reconstructed") => Provenance::Reconstructed,
        _ => Provenance::Theory,
    };
    CorrelationMatrix::new(matrix_from(&t, path)?, grid, provenance)
}

pub fn write_intensity(path: &Path, profile: &IntensityProfile, ctx: &BundleContext) -> Result<()> {
    let mut extra = grid_comments(&profile.grid);
    extra.push(("total_intensity", fmt_num(profile.total())));
    let mut s = ctx.header(&extra) + "angle_mrad\tintensity\n";
    for (a, v) in profile.grid.angles_mrad().iter().zip(&profile.values) {
        s += &format!("{}\t{}\n", fmt_num(*a), fmt_num(*v));
    }
    write(path, &s)
}

pub fn read_intensity(path: &Path) -> Result<IntensityProfile> {
    let t = read_table(path)?;
    let grid = grid_from(&t, path)?;
    let values = t.numbers(path)?.iter().map(|r| r[1]).collect();
    Ok(IntensityProfile { values, grid })
}

/// `eigenvalues.tsv` and `modes_1d.tsv`.
pub fn write_decomposition(dir: &Path, one_d: &OneDDecomposition, ctx: &BundleContext) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut extra = grid_comments(&one_d.grid);
    extra.push(("clamped_negative", fmt_num(one_d.clamped_negative)));
    extra.push(("clamped_count", one_d.clamped_count.to_string()));
    let head = ctx.header(&extra);

    let mut s = head.clone() + "i\tmu\tmu_normalized\n";
    for (i, (m, mn)) in one_d.mu.iter().zip(one_d.normalized_mu()).enumerate() {
        s += &format!("{i}\t{}\t{}\n", fmt_num(*m), fmt_num(mn));
    }
    write(&dir.join("eigenvalues.tsv"), &s)?;

    let n = one_d.modes.nrows();
    let mut s = head + "angle_mrad";
    for i in 0..one_d.modes.ncols() {
        s += &format!("\tv{i}");
    }
    s += "\n";
    for r in 0..n {
        s += &fmt_num(one_d.grid.angle_mrad(r));
        for c in 0..one_d.modes.ncols() {
            s += "\t";
            s += &fmt_num(one_d.modes[(r, c)]);
        }
        s += "\n";
    }
    write(&dir.join("modes_1d.tsv"), &s)
}

pub fn read_decomposition(dir: &Path) -> Result<OneDDecomposition> {
    let ep = dir.join("eigenvalues.tsv");
    let et = read_table(&ep)?;
    let mu: Vec<f64> = et.numbers(&ep)?.iter().map(|r| r[1]).collect();
    let mp = dir.join("modes_1d.tsv");
    let mt = read_table(&mp)?;
    let grid = grid_from(&mt, &mp)?;
    let nums = mt.numbers(&mp)?;
    let n = nums.len();
    if n != grid.n_points || mt.header.len() != mu.len() + 1 {
        return Err(Error::Data(format!(
            "{}: mode table shape disagrees with {} eigenvalues on {} points",
            mp.display(),
            mu.len(),
            grid.n_points
        )));
    }
    if mu.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
        return Err(Error::Data(format!("{}: eigenvalues must be finite and >= 0", ep.display())));
    }
    let num = |k: &str| et.comment(k).and_then(|v| v.parse::<f64>().ok()).unwrap_or(0.0);
    Ok(OneDDecomposition {
        modes: Mat::from_fn(n, mu.len(), |r, c| nums[r][c + 1]),
        mu,
        grid,
        clamped_negative: num("clamped_negative"),
        clamped_count: num("clamped_count") as usize,
    })
}

/// Full bundle: spectrum, decomposition, selected 2D modes, metrics and
/// diagnostics.
pub fn write_result_bundle(dir: &Path, result: &SchmidtResult, ctx: &BundleContext) -> Result<()> {
    write_decomposition(dir, &result.one_d, ctx)?;
    let grid = result.one_d.grid;
    let head = ctx.header(&grid_comments(&grid));

    let mut s = head.clone() + "k\ti\tj\tlambda\n";
    for (k, (l, (i, j))) in result.lambda.iter().zip(&result.index_pairs).enumerate() {
        s += &format!("{k}\t{i}\t{j}\t{}\n", fmt_num(*l));
    }
    write(&dir.join("spectrum.tsv"), &s)?;

    for k in 0..ctx.modes_2d.min(result.lambda.len()) {
        let (i, j) = result.index_pairs[k];
        let mode = result.mode(k)?;
        let extra = [("mode_k", k.to_string()), ("pair", format!("{i},{j}"))];
        let s = ctx.header(&extra) + &matrix_text(&mode, &grid);
        write(&dir.join(format!("mode_2d_{k}.tsv")), &s)?;
    }

    let mut s = head.clone() + "metric\tvalue\n";
    s += &format!("schmidt_number\t{}\n", fmt_num(result.metrics.schmidt_number));
    s += &format!("schmidt_number_1d\t{}\n", fmt_num(result.metrics.schmidt_number_1d));
    for (k, w) in result.metrics.fwhm_mrad.iter().enumerate() {
        s += &format!("fwhm_mrad_{k}\t{}\n", fmt_num(w.unwrap_or(f64::NAN)));
    }
    for (k, v) in &ctx.metrics {
        s += &format!("{k}\t{}\n", fmt_num(*v));
    }
    write(&dir.join("metrics.tsv"), &s)?;

    let mut s = head + "key\tvalue\n";
    s += &format!("clamped_negative\t{}\n", fmt_num(result.one_d.clamped_negative));
    s += &format!("clamped_count\t{}\n", result.one_d.clamped_count);
    for (k, v) in &ctx.diagnostics {
        s += &format!("{k}\t{v}\n");
    }
    write(&dir.join("diagnostics.tsv"), &s)
}

/// What [`read_result_bundle`] recovers.
#[derive(Debug, Clone)]
pub struct LoadedBundle {
    pub lambda: Vec<f64>,
    pub index_pairs: Vec<(usize, usize)>,
    pub one_d: OneDDecomposition,
    pub metrics: Vec<(String, f64)>,
    pub comments: Vec<(String, String)>,
}

impl LoadedBundle {
    pub fn metric(&self, key: &str) -> Option<f64> {
        self.metrics.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }
}

pub fn read_result_bundle(dir: &Path) -> Result<LoadedBundle> {
    let sp = dir.join("spectrum.tsv");
    let st = read_table(&sp)?;
    let rows = st.numbers(&sp)?;
    let lambda = rows.iter().map(|r| r[3]).collect();
    let index_pairs = rows.iter().map(|r| (r[1] as usize, r[2] as usize)).collect();
    let mp = dir.join("metrics.tsv");
    let mt = read_table(&mp)?;
    let metrics = mt
        .rows
        .iter()
        .map(|r| {
            r[1].parse::<f64>()
                .map(|v| (r[0].clone(), v))
                .map_err(|_| Error::Data(format!("{}: bad value for {}", mp.display(), r[0])))
        })
        .collect::<Result<_>>()?;
    Ok(LoadedBundle {
        lambda,
        index_pairs,
        one_d: read_decomposition(dir)?,
        metrics,
        comments: st.comments,
    })
}

/// `bench_report.txt` (readable) and `bench_report.kv` (key=value).
pub fn write_bench_report(dir: &Path, report: &BenchReport, ctx: &BundleContext) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut kv: Vec<(String, String)> = vec![
        ("n_rows".into(), report.n_rows.to_string()),
        ("n_cols".into(), report.n_cols.to_string()),
        ("n_frames".into(), report.n_frames.to_string()),
        ("runs".into(), report.runs.to_string()),
        ("m_top".into(), report.m_top.to_string()),
    ];
    for (name, secs) in &report.symmetric_phases {
        kv.push((format!("symmetric.{name}_s"), fmt_num(*secs)));
    }
    for (name, secs) in &report.full4d_phases {
        kv.push((format!("full4d.{name}_s"), fmt_num(*secs)));
    }
    kv.push(("symmetric.total_s".into(), fmt_num(report.symmetric_seconds)));
    kv.push(("full4d.total_s".into(), fmt_num(report.full4d_seconds)));
    kv.push(("speedup".into(), fmt_num(report.speedup)));
    if let (Some(io), Some(e2e)) = (report.io_seconds, report.end_to_end_speedup()) {
        kv.push(("io_s".into(), fmt_num(io)));
        kv.push(("speedup_end_to_end".into(), fmt_num(e2e)));
    }
    kv.push(("symmetric.memory_bytes".into(), report.symmetric_bytes.to_string()));
    kv.push(("full4d.memory_bytes".into(), report.full4d_bytes.to_string()));
    kv.push(("spectrum_l1".into(), fmt_num(report.spectrum_l1)));
    kv.push(("subspace_overlap".into(), fmt_num(report.subspace_overlap)));
    kv.push(("aligned_dim".into(), report.aligned_dim.to_string()));
    let join = |v: &[f64]| v.iter().map(|x| fmt_num(*x)).collect::<Vec<_>>().join(",");
    kv.push(("lambda_symmetric".into(), join(&report.lambda_symmetric)));
    kv.push(("lambda_full4d".into(), join(&report.lambda_full4d)));

    let head = ctx.header(&[]);
    let mut s = head.clone();
    for (k, v) in &kv {
        s += &format!("{k}={v}\n");
    }
    write(&dir.join("bench_report.kv"), &s)?;

    let mut t = head;
    t += &format!(
        "Stack: {}x{} pixels, {} frames; medians of {} runs\n\n",
        report.n_rows, report.n_cols, report.n_frames, report.runs
    );
    t += "Symmetric slice method\n";
    for (name, secs) in &report.symmetric_phases {
        t += &format!("  {name:<16}{secs:>12.6} s\n");
    }
    t += &format!("  {:<16}{:>12.6} s\n", "total", report.symmetric_seconds);
    t += "Full 4D method\n";
    for (name, secs) in &report.full4d_phases {
        t += &format!("  {name:<16}{secs:>12.6} s\n");
    }
    t += &format!("  {:<16}{:>12.6} s\n\n", "total", report.full4d_seconds);
    t += &format!("Speedup (compute only): {:.1}x\n", report.speedup);
    if let Some(e2e) = report.end_to_end_speedup() {
        t += &format!("Speedup (with stack I/O): {e2e:.1}x\n");
    }
    t += &format!(
        "Memory estimate: {:.2} MB symmetric, {:.2} MB full 4D\n",
        report.symmetric_bytes as f64 / 1e6,
        report.full4d_bytes as f64 / 1e6
    );
    t += &format!(
        "Top-{} spectrum L1 distance: {:.4}\nSubspace overlap (top {}): {:.4}\n",
        report.m_top, report.spectrum_l1, report.aligned_dim, report.subspace_overlap
    );
    write(&dir.join("bench_report.txt"), &t)
}

/// `key=value` lines, skipping comments.
pub fn read_key_values(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::Data(format!("{}: expected key=value, got '{l}'", path.display())))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schmidt::{diagonalize_1d, tensor_spectrum};

    fn sample_result() -> SchmidtResult {
        let n = 9;
        let grid = WavevectorGrid::new(n, 0.5).unwrap();
        let m = Mat::from_fn(n, n, |i, j| {
            let (x, y) = (i as f64 - 4.0, j as f64 - 4.0);
            (-(x * x + y * y) / 20.0).exp() * (-(x - y).powi(2) / 4.0).exp()
        });
        let corr = CorrelationMatrix::new(m, grid, Provenance::Theory).unwrap();
        tensor_spectrum(&diagonalize_1d(&corr).unwrap(), 10).unwrap()
    }

    #[test]
    fn bundle_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let r = sample_result();
        let ctx = BundleContext {
            source: "test".into(),
            seed: Some(7),
            config: Some("gain=1.5\nn_keep=10\n".into()),
            modes_2d: 3,
            metrics: vec![("total_intensity".into(), 12.5)],
            diagnostics: vec![("note".into(), "x".into())],
        };
        write_result_bundle(dir.path(), &r, &ctx).unwrap();
        let back = read_result_bundle(dir.path()).unwrap();
        assert_eq!(back.lambda.len(), 10);
        assert_eq!(back.index_pairs, r.index_pairs);
        let k = back.metric("schmidt_number").unwrap();
        assert!((k - r.metrics.schmidt_number).abs() <= 5e-9 * k);
        assert_eq!(back.metric("total_intensity"), Some(12.5));
        assert!(back.comments.iter().any(|(k, v)| k == "config.gain" && v == "1.5"));
        assert_eq!(back.one_d.grid, r.one_d.grid);
        for (a, b) in back.one_d.mu.iter().zip(&r.one_d.mu) {
            assert!((a - b).abs() <= 5e-9 * b.abs().max(1e-300));
        }
        let t = read_table(&dir.path().join("mode_2d_2.tsv")).unwrap();
        assert_eq!(t.rows.len(), 9);
        assert_eq!(t.header.len(), 10);
        assert!(!dir.path().join("mode_2d_3.tsv").exists());
    }

    #[test]
    fn correlation_and_intensity_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let grid = WavevectorGrid::new(4, 1.25).unwrap();
        let m = Mat::from_fn(4, 4, |i, j| 1.0 / (1.0 + (i + j) as f64));
        let c = CorrelationMatrix::new(m.clone(), grid, Provenance::Reconstructed).unwrap();
        let p = dir.path().join("g1.tsv");
        write_correlation(&p, &c, &BundleContext::default()).unwrap();
        let back = read_correlation(&p).unwrap();
        assert_eq!(back.grid, grid);
        assert_eq!(back.provenance, Provenance::Reconstructed);
        assert!((&back.values - &m).norm_l2() < 1e-8);

        let prof = IntensityProfile {
            values: vec![0.0, 1.0, 2.0, 1.0],
            grid,
        };
        let p = dir.path().join("i.tsv");
        write_intensity(&p, &prof, &BundleContext::default()).unwrap();
        assert_eq!(read_intensity(&p).unwrap(), prof);
    }

    #[test]
    fn numbers_carry_nine_significant_digits() {
        assert_eq!(fmt_num(1.0 / 3.0), "3.33333333e-1");
        assert_eq!(fmt_num(-12345.678912), "-1.23456789e4");
    }

    #[test]
    fn malformed_tables_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.tsv");
        std::fs::write(&p, "# a=b\nx\ty\n1\n").unwrap();
        assert!(matches!(read_table(&p), Err(Error::Data(_))));
        std::fs::write(&p, "# only comments\n").unwrap();
        assert!(read_table(&p).is_err());
        assert!(matches!(read_table(&dir.path().join("none.tsv")), Err(Error::Io { .. })));
    }
}
