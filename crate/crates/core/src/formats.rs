//! On-disk formats: binary complex-field dumps with a JSON header line,
//! CSV exports, content hashing, and the pipeline configuration document.
//!
//! Binary layout: one line of JSON metadata terminated by `\n`, then the
//! declared fields concatenated as little-endian f64 pairs `(re, im)`,
//! row-major over `(k, x)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::{Read, Write};
use std::path::Path;

use crate::distorted::DistortedBasis;
use crate::dynamics::{FieldState, RunConfig, Scheme};
use crate::grid::XGrid;
use crate::jost::{CField, JostField, Side};
use crate::potential::PotentialSpec;
use crate::scattering::ScatteringData;
use crate::{Error, Result};

/// Hex SHA-256 of a byte slice.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    format!("{:x}", h.finalize())
}

pub fn file_hash(path: &Path) -> Result<String> {
    let mut f = std::fs::File::open(path)?;
    let mut h = Sha256::new();
    let mut buf = [0u8; 65536];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(format!("{:x}", h.finalize()))
}

fn write_complex_payload(out: &mut impl Write, data: &[Complex64]) -> Result<()> {
    let mut buf = Vec::with_capacity(data.len() * 16);
    for z in data {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

fn read_complex_payload(bytes: &[u8], n: usize) -> Result<Vec<Complex64>> {
    if bytes.len() < 16 * n {
        return Err(Error::Invalid("binary payload truncated".into()));
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let re = f64::from_le_bytes(bytes[16 * i..16 * i + 8].try_into().unwrap());
        let im = f64::from_le_bytes(bytes[16 * i + 8..16 * i + 16].try_into().unwrap());
        out.push(Complex64::new(re, im));
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct FieldHeader {
    kind: String,
    version: u32,
    x_grid: XGrid,
    k: Vec<f64>,
    side: Side,
    derivative_order: usize,
    fields: Vec<String>,
    layout: String,
    dtype: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scattering_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dk: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t: Option<f64>,
}

/// Serialize a Jost field: header line + fields in header order.
pub fn write_jost_field(path: &Path, field: &JostField) -> Result<()> {
    let candidates: [(&str, &Option<CField>); 6] = [
        ("m_plus", &field.m_plus),
        ("m_minus", &field.m_minus),
        ("dk_m_plus", &field.dk_m_plus),
        ("dk_m_minus", &field.dk_m_minus),
        ("d2k_m_plus", &field.d2k_m_plus),
        ("d2k_m_minus", &field.d2k_m_minus),
    ];
    let mut names = Vec::new();
    let mut blocks: Vec<&CField> = Vec::new();
    for (name, f) in candidates {
        if let Some(c) = f.as_ref() {
            names.push(name.to_string());
            blocks.push(c);
        }
    }
    let header = FieldHeader {
        kind: "jost_field".into(),
        version: 1,
        x_grid: field.x_grid,
        k: field.k.clone(),
        side: field.side,
        derivative_order: field.derivative_order,
        fields: names,
        layout: "row_major_k_x".into(),
        dtype: "c128_le".into(),
        scattering_hash: None,
        dk: None,
        t: None,
    };
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for b in blocks {
        write_complex_payload(&mut out, &b.data)?;
    }
    Ok(())
}

pub fn read_jost_field(path: &Path) -> Result<JostField> {
    let bytes = std::fs::read(path)?;
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Invalid("missing header line".into()))?;
    let header: FieldHeader = serde_json::from_slice(&bytes[..nl])?;
    if header.kind != "jost_field" {
        return Err(Error::Invalid(format!("expected jost_field, got {}", header.kind)));
    }
    let n_k = header.k.len();
    let n_x = header.x_grid.n;
    let block = 16 * n_k * n_x;
    let mut offset = nl + 1;
    let mut out = JostField {
        x_grid: header.x_grid,
        k: header.k.clone(),
        side: header.side,
        derivative_order: header.derivative_order,
        m_plus: None,
        m_minus: None,
        dk_m_plus: None,
        dk_m_minus: None,
        d2k_m_plus: None,
        d2k_m_minus: None,
    };
    for name in &header.fields {
        let data = read_complex_payload(&bytes[offset..], n_k * n_x)?;
        offset += block;
        let f = CField { n_k, n_x, data };
        match name.as_str() {
            "m_plus" => out.m_plus = Some(f),
            "m_minus" => out.m_minus = Some(f),
            "dk_m_plus" => out.dk_m_plus = Some(f),
            "dk_m_minus" => out.dk_m_minus = Some(f),
            "d2k_m_plus" => out.d2k_m_plus = Some(f),
            "d2k_m_minus" => out.d2k_m_minus = Some(f),
            other => return Err(Error::Invalid(format!("unknown field {other}"))),
        }
    }
    Ok(out)
}

/// Persist the eigenfunction field of a basis (parts and the Gram factor are
/// rebuilt on load when needed).
pub fn write_basis(path: &Path, basis: &DistortedBasis) -> Result<()> {
    let header = FieldHeader {
        kind: "distorted_basis".into(),
        version: 1,
        x_grid: basis.x_grid,
        k: basis.k_full.clone(),
        side: Side::Both,
        derivative_order: 0,
        fields: vec!["psi".into()],
        layout: "row_major_k_x".into(),
        dtype: "c128_le".into(),
        scattering_hash: basis.provenance.clone(),
        dk: Some(basis.dk),
        t: None,
    };
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    write_complex_payload(&mut out, &basis.psi.data)?;
    Ok(())
}

/// Snapshot of the field at one time.
pub fn write_field_state(path: &Path, state: &FieldState, grid: &XGrid) -> Result<()> {
    let header = FieldHeader {
        kind: "field_state".into(),
        version: 1,
        x_grid: *grid,
        k: Vec::new(),
        side: Side::Both,
        derivative_order: 0,
        fields: vec!["u".into()],
        layout: "row_major_x".into(),
        dtype: "c128_le".into(),
        scattering_hash: None,
        dk: None,
        t: Some(state.t),
    };
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    write_complex_payload(&mut out, &state.u)?;
    Ok(())
}

pub fn read_field_state(path: &Path) -> Result<(FieldState, XGrid)> {
    let bytes = std::fs::read(path)?;
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Invalid("missing header line".into()))?;
    let header: FieldHeader = serde_json::from_slice(&bytes[..nl])?;
    if header.kind != "field_state" {
        return Err(Error::Invalid(format!("expected field_state, got {}", header.kind)));
    }
    let u = read_complex_payload(&bytes[nl + 1..], header.x_grid.n)?;
    Ok((FieldState { t: header.t.unwrap_or(0.0), u }, header.x_grid))
}

/// Canonical bytes of scattering data (hashed for provenance).
pub fn scattering_bytes(sd: &ScatteringData) -> Vec<u8> {
    let mut buf = Vec::new();
    for (i, &k) in sd.k.iter().enumerate() {
        buf.extend_from_slice(&k.to_le_bytes());
        for z in [sd.t[i], sd.r_plus[i], sd.r_minus[i]] {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    buf
}

/// CSV export: `k, Re T, Im T, Re R+, Im R+, Re R-, Im R-, unitarity_defect`.
pub fn scattering_csv(sd: &ScatteringData) -> String {
    let mut out = String::from("k,re_t,im_t,re_r_plus,im_r_plus,re_r_minus,im_r_minus,unitarity_defect\n");
    for i in 0..sd.k.len() {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            sd.k[i],
            sd.t[i].re,
            sd.t[i].im,
            sd.r_plus[i].re,
            sd.r_plus[i].im,
            sd.r_minus[i].re,
            sd.r_minus[i].im,
            sd.unitarity_defect(i),
        ));
    }
    out
}

/// Long-format CSV of a modified profile: `t, k, Re W, Im W, |Z|` with both
/// pair components per row (`k` signed).
pub fn modified_profile_csv(mp: &crate::asymptotics::ModifiedProfile) -> String {
    let mut out = String::from("t,k,re_w,im_w,abs_z\n");
    for (i, &t) in mp.times.iter().enumerate() {
        for (j, &k) in mp.k_pos.iter().enumerate() {
            let (wp, wm) = mp.w[i][j];
            let (zp, zm) = mp.z[i][j];
            out.push_str(&format!("{},{},{},{},{}\n", t, k, wp.re, wp.im, zp.norm()));
            out.push_str(&format!("{},{},{},{},{}\n", t, -k, wm.re, wm.im, zm.norm()));
        }
    }
    out
}

/// Snapshot schedule specification.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SnapshotSpec {
    Explicit(Vec<f64>),
    Geometric { t_lin: f64, dt_lin: f64, ratio: f64 },
}

impl Default for SnapshotSpec {
    fn default() -> Self {
        SnapshotSpec::Geometric { t_lin: 4.0, dt_lin: 0.25, ratio: 1.189207115002721 }
    }
}

fn default_sigma() -> f64 {
    2.0
}

/// Initial data description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DataConfig {
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default)]
    pub center: f64,
    #[serde(default)]
    pub velocity: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { sigma: default_sigma(), center: 0.0, velocity: 0.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScatterStageConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub n_x: usize,
    pub dk: f64,
    pub n_k: usize,
    #[serde(default = "default_oversample")]
    pub oversample: usize,
    #[serde(default = "default_tol_cross")]
    pub tol_cross: f64,
}

fn default_oversample() -> usize {
    2
}

fn default_tol_cross() -> f64 {
    1e-6
}

impl Default for ScatterStageConfig {
    fn default() -> Self {
        Self {
            x_min: -10.0,
            x_max: 10.0,
            n_x: 1 << 14,
            dk: 0.1,
            n_k: 100,
            oversample: default_oversample(),
            tol_cross: default_tol_cross(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BasisStageConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub n_x: usize,
    pub k_max: f64,
    #[serde(default = "default_basis_oversample")]
    pub oversample: usize,
    #[serde(default)]
    pub with_parts: bool,
}

fn default_basis_oversample() -> usize {
    8
}

impl Default for BasisStageConfig {
    fn default() -> Self {
        Self {
            x_min: -600.0,
            x_max: 600.0,
            n_x: 4096,
            k_max: 3.0,
            oversample: default_basis_oversample(),
            with_parts: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunStageConfig {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default = "default_eps0")]
    pub epsilon0: f64,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub snapshots: SnapshotSpec,
    #[serde(default = "crate::formats::default_true")]
    pub nonlinearity: bool,
}

pub(crate) fn default_true() -> bool {
    true
}

fn default_dt() -> f64 {
    5e-3
}

fn default_t_max() -> f64 {
    200.0
}

fn default_scheme() -> Scheme {
    Scheme::FlatStrang
}

fn default_eps0() -> f64 {
    0.1
}

impl Default for RunStageConfig {
    fn default() -> Self {
        Self {
            dt: default_dt(),
            t_max: default_t_max(),
            scheme: default_scheme(),
            epsilon0: default_eps0(),
            data: DataConfig::default(),
            snapshots: SnapshotSpec::default(),
            nonlinearity: true,
        }
    }
}

/// Remainder/bootstrap exponents carried as configuration constants.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AsymptoticsConfig {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_rho")]
    pub rho: f64,
    /// Remainder exponent of the L2-growth bound; recorded, untested.
    #[serde(default = "default_p0")]
    pub p0: f64,
    /// Bootstrap amplitude exponent: eps1 = eps0^this; recorded, untested.
    #[serde(default = "default_eps1_exp")]
    pub epsilon1_exponent: f64,
}

fn default_alpha() -> f64 {
    0.2
}

fn default_rho() -> f64 {
    0.019
}

fn default_p0() -> f64 {
    0.01
}

fn default_eps1_exp() -> f64 {
    2.0 / 3.0
}

impl Default for AsymptoticsConfig {
    fn default() -> Self {
        Self {
            alpha: default_alpha(),
            rho: default_rho(),
            p0: default_p0(),
            epsilon1_exponent: default_eps1_exp(),
        }
    }
}

/// Whole-pipeline configuration document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub potential: serde_json::Value,
    #[serde(default)]
    pub scattering: ScatterStageConfig,
    #[serde(default)]
    pub basis: BasisStageConfig,
    #[serde(default)]
    pub run: RunStageConfig,
    #[serde(default)]
    pub asymptotics: AsymptoticsConfig,
    #[serde(default)]
    pub seed: u64,
}

impl PipelineConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: PipelineConfig = serde_json::from_str(&text)?;
        cfg.potential_spec()?;
        Ok(cfg)
    }

    /// Parse the embedded potential document.
    pub fn potential_spec(&self) -> Result<PotentialSpec> {
        PotentialSpec::from_json(&self.potential.to_string())
    }

    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization")
    }

    pub fn hash(&self) -> String {
        content_hash(self.canonical_json().as_bytes())
    }

    pub fn run_config(&self) -> RunConfig {
        let times = match &self.run.snapshots {
            SnapshotSpec::Explicit(v) => v.clone(),
            SnapshotSpec::Geometric { t_lin, dt_lin, ratio } => {
                crate::dynamics::geometric_snapshots(*t_lin, *dt_lin, self.run.t_max, *ratio)
            }
        };
        // Snap to the step grid.
        let dt = self.run.dt;
        let mut snapped: Vec<f64> = times
            .iter()
            .map(|&t| (t / dt).round() * dt)
            .filter(|&t| t >= 0.0 && t <= self.run.t_max + 1e-12)
            .collect();
        snapped.dedup_by(|a, b| (*a - *b).abs() < 0.5 * dt);
        RunConfig {
            dt,
            t_max: self.run.t_max,
            scheme: self.run.scheme,
            epsilon0: self.run.epsilon0,
            snapshot_times: snapped,
            nonlinearity: self.run.nonlinearity,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::KGrid;
    use crate::jost::{solve_m, SolveOptions};
    use crate::potential::Family;

    #[test]
    fn jost_field_round_trips_through_disk() {
        let spec = PotentialSpec::new(
            Family::GaussianBarrier,
            2.0,
            1.0,
            7.0,
            XGrid::new(-8.0, 8.0, 128).unwrap(),
        )
        .unwrap();
        let kg = KGrid::staggered(0.5, 3).unwrap();
        let f = solve_m(
            &spec,
            &kg,
            &spec.grid,
            Side::Both,
            SolveOptions { derivative_order: 1, oversample: 1 },
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("jost.bin");
        write_jost_field(&path, &f).unwrap();
        let g = read_jost_field(&path).unwrap();
        assert_eq!(f.k, g.k);
        assert_eq!(f.x_grid, g.x_grid);
        assert_eq!(f.m_plus.as_ref().unwrap().data, g.m_plus.as_ref().unwrap().data);
        assert_eq!(f.dk_m_minus.as_ref().unwrap().data, g.dk_m_minus.as_ref().unwrap().data);
    }

    #[test]
    fn field_state_round_trips() {
        let grid = XGrid::new(-5.0, 5.0, 32).unwrap();
        let state = FieldState {
            t: 1.5,
            u: (0..32).map(|i| Complex64::new(i as f64, -0.5 * i as f64)).collect(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.bin");
        write_field_state(&path, &state, &grid).unwrap();
        let (back, g2) = read_field_state(&path).unwrap();
        assert_eq!(back.t, state.t);
        assert_eq!(back.u, state.u);
        assert_eq!(g2, grid);
    }

    #[test]
    fn scattering_csv_has_expected_shape() {
        let sd = ScatteringData {
            k: vec![0.5, 1.5],
            t: vec![Complex64::new(1.0, 0.0); 2],
            r_plus: vec![Complex64::new(0.0, 0.0); 2],
            r_minus: vec![Complex64::new(0.0, 0.0); 2],
            dk_t: None,
            dk_r_plus: None,
            dk_r_minus: None,
            inv_t_mismatch: vec![0.0; 2],
        };
        let csv = scattering_csv(&sd);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("k,re_t,im_t"));
        assert!(lines[1].starts_with("0.5,1,0,0,0,0,0,"));
    }

    #[test]
    fn pipeline_config_defaults_and_hash_stability() {
        let json = r#"{
            "potential": {
                "family": "gaussian_barrier",
                "params": {"amplitude": 2.0, "width": 1.0},
                "gamma": 7.0,
                "grid": {"x_min": -10.0, "x_max": 10.0, "n_x": 1024}
            }
        }"#;
        let cfg: PipelineConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.run.dt, 5e-3);
        assert_eq!(cfg.run.scheme, Scheme::FlatStrang);
        let spec = cfg.potential_spec().unwrap();
        assert_eq!(spec.family, Family::GaussianBarrier);
        let h1 = cfg.hash();
        let h2 = cfg.hash();
        assert_eq!(h1, h2);
        let rc = cfg.run_config();
        assert!(rc.validate().is_ok());
        assert!(rc.snapshot_times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn content_hash_is_stable() {
        assert_eq!(
            content_hash(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
