//! Reports and CSV exports.
//!
//! Every file is written to a temporary sibling and renamed into place.
//! Numbers use Rust's shortest round-trip formatting so outputs are
//! byte-identical across runs with the same inputs.

use std::fmt::Display;
use std::io::Write;
use std::path::Path;

use qdsim_core::correlator::{CorrelationHistogram, LongDelayProfile, Normalization};
use qdsim_core::interference::TPIResult;
use qdsim_core::pcfs::PCFSResult;
use qdsim_core::spectroscopy::{LineshapeFit, Spectrum};

use crate::error::{Error, Result};

pub const TOOL: &str = "qdsim";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn write_atomic<T>(path: &Path, write: impl FnOnce(&mut dyn Write) -> Result<T>) -> Result<T> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::file(dir, e))?;
    let value = write(tmp.as_file_mut())?;
    tmp.as_file_mut().flush().map_err(|e| Error::file(path, e))?;
    tmp.persist(path).map_err(|e| Error::file(path, e.error))?;
    Ok(value)
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    write_atomic(path, |w| w.write_all(bytes).map_err(|e| Error::file(path, e)))
}

/// Ordered `key=value` report.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    entries: Vec<(String, String)>,
}

impl Report {
    pub fn new(command: &str, config_hash: &str) -> Self {
        let mut r = Report::default();
        r.set("tool", TOOL);
        r.set("version", VERSION);
        r.set("command", command);
        r.set("config_hash", config_hash);
        r
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl Display) -> &mut Self {
        let key = key.into();
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| *k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key, value)),
        }
        self
    }

    pub fn num(&mut self, key: impl Into<String>, value: f64) -> &mut Self {
        self.set(key, format_args!("{value:e}"))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// Parses text produced by [`Report::render`].
    pub fn parse(text: &str) -> Self {
        let entries = text
            .lines()
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        Report { entries }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_bytes(path, self.render().as_bytes())
    }
}

fn csv_bytes(comments: &[(String, String)], header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for (k, v) in comments {
        out.extend_from_slice(format!("# {k}={v}\n").as_bytes());
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| Error::Usage(e.to_string()))
}

fn e(x: f64) -> String {
    format!("{x:e}")
}

pub fn histogram_csv(h: &CorrelationHistogram) -> Result<Vec<u8>> {
    let (lo, hi) = h.delay_range();
    let norm = match h.normalization {
        Normalization::Raw => "raw",
        Normalization::PoissonLevel => "poisson_level",
    };
    let comments = vec![
        ("bin_width_s".to_string(), e(h.bin_width())),
        ("range_s".to_string(), format!("{}..{}", e(lo), e(hi))),
        ("normalization".to_string(), norm.to_string()),
        ("poisson_level".to_string(), e(h.poisson_level())),
    ];
    let normalized = h.clone().with_normalization(Normalization::PoissonLevel);
    let values = normalized.normalized();
    let errors = normalized.uncertainties();
    let rows = h
        .delays()
        .into_iter()
        .zip(&h.counts)
        .zip(values.iter().zip(&errors))
        .map(|((d, c), (v, u))| vec![e(d), c.to_string(), e(*v), e(*u)]);
    csv_bytes(&comments, &["delay_s", "counts", "normalized", "uncertainty"], rows)
}

pub fn long_delay_csv(p: &LongDelayProfile) -> Result<Vec<u8>> {
    let comments = vec![("coarse_bin_s".to_string(), e(p.bin_width))];
    let rows = p.points().map(|(d, v, u)| vec![e(d), e(v), e(u)]);
    csv_bytes(&comments, &["abs_delay_s", "g2", "uncertainty"], rows)
}

pub fn spectrum_csv(s: &Spectrum) -> Result<Vec<u8>> {
    let rows = s.detuning().iter().zip(s.intensity()).map(|(x, y)| vec![e(*x), e(*y)]);
    csv_bytes(&[], &["detuning_Hz", "intensity"], rows)
}

pub fn add_fit(r: &mut Report, fit: &LineshapeFit) {
    r.num("lorentzian_fwhm_Hz", fit.lorentzian_fwhm)
        .set("lorentzian_fixed", fit.lorentzian_fixed)
        .num("gaussian_fwhm_Hz", fit.gaussian_fwhm)
        .num("total_fwhm_Hz", fit.total_fwhm)
        .num("amplitude", fit.amplitude)
        .num("offset", fit.offset)
        .num("center_Hz", fit.center)
        .num("residual_norm", fit.residual_norm)
        .num("lorentzian_fwhm_err_Hz", fit.uncertainty.lorentzian_fwhm)
        .num("gaussian_fwhm_err_Hz", fit.uncertainty.gaussian_fwhm)
        .num("total_fwhm_err_Hz", fit.uncertainty.total_fwhm)
        .num("amplitude_err", fit.uncertainty.amplitude)
        .num("offset_err", fit.uncertainty.offset)
        .num("center_err_Hz", fit.uncertainty.center)
        .set("resolution_limited", fit.resolution_limited);
}

pub fn add_tpi(r: &mut Report, t: &TPIResult) {
    r.num("mzi_delay_s", t.mzi_delay)
        .num("rep_period_s", t.rep_period)
        .num("visibility", t.visibility.value)
        .num("visibility_err", t.visibility.uncertainty)
        .num("parallel_area", t.visibility.parallel_area)
        .num("orthogonal_area", t.visibility.orthogonal_area)
        .num("window_visibility", t.window_visibility.value)
        .num("window_visibility_err", t.window_visibility.uncertainty)
        .num("window_parallel_counts", t.window_visibility.parallel_area)
        .num("window_orthogonal_counts", t.window_visibility.orthogonal_area);
}

fn flag_text(f: &qdsim_core::pcfs::BinFlags) -> String {
    let mut parts = Vec::new();
    if f.resolution_limited {
        parts.push("resolution_limited");
    }
    if f.misfit {
        parts.push("misfit");
    }
    if f.low_statistics {
        parts.push("low_statistics");
    }
    if parts.is_empty() {
        "ok".to_string()
    } else {
        parts.join("|")
    }
}

pub fn pcfs_linewidth_csv(r: &PCFSResult) -> Result<Vec<u8>> {
    let centers = r.tau_centers();
    let rows = (0..r.linewidth.len()).map(|k| {
        vec![
            e(centers[k]),
            e(r.tau_edges[k]),
            e(r.tau_edges[k + 1]),
            e(r.linewidth[k]),
            e(r.uncertainty[k]),
            e(r.model_free[k]),
            r.spectral.min_pairs[k].to_string(),
            flag_text(&r.flags[k]),
        ]
    });
    let comments = match r.voltage {
        Some(v) => vec![("voltage_V".to_string(), e(v))],
        None => Vec::new(),
    };
    csv_bytes(
        &comments,
        &["tau_s", "tau_lo_s", "tau_hi_s", "linewidth_Hz", "uncertainty_Hz", "model_free_Hz", "min_pairs", "flags"],
        rows,
    )
}

pub fn pcfs_matrix_csv(r: &PCFSResult) -> Result<Vec<u8>> {
    let sc = &r.spectral;
    let names: Vec<String> = sc.tau_centers().iter().map(|t| format!("p_tau_{t:e}_s")).collect();
    let mut header = vec!["zeta_Hz"];
    header.extend(names.iter().map(String::as_str));
    let rows = sc.zeta.iter().enumerate().map(|(i, z)| {
        let mut row = vec![e(*z)];
        row.extend(sc.values.iter().map(|p| e(p[i])));
        row
    });
    let comments = vec![
        ("resolution_Hz".to_string(), e(sc.resolution)),
        ("range_Hz".to_string(), e(sc.range)),
        ("units".to_string(), "p in 1/Hz".to_string()),
    ];
    csv_bytes(&comments, &header, rows)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub voltage: f64,
    pub species: String,
    pub linewidth: f64,
    pub uncertainty: f64,
    pub lorentzian: f64,
    pub gaussian: f64,
    pub intensity: f64,
    pub resolution_limited: bool,
}

pub fn sweep_csv(rows: &[SweepRow]) -> Result<Vec<u8>> {
    let data = rows.iter().map(|r| {
        vec![
            e(r.voltage),
            r.species.clone(),
            e(r.linewidth),
            e(r.uncertainty),
            e(r.lorentzian),
            e(r.gaussian),
            e(r.intensity),
            r.resolution_limited.to_string(),
        ]
    });
    csv_bytes(
        &[],
        &[
            "voltage_V",
            "species",
            "linewidth_Hz",
            "uncertainty_Hz",
            "lorentzian_Hz",
            "gaussian_Hz",
            "intensity_cps",
            "resolution_limited",
        ],
        data,
    )
}
