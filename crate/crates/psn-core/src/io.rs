//! Persistence: binary field snapshots, JSON run configuration, and the
//! sweep table as CSV.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::asymptotics::SweepRecord;
use crate::error::{Error, Result};
use crate::field::{ComplexField2D, PotentialSpec};
use crate::grid::Grid2D;
use crate::minimize::MinimizeConfig;

const MAGIC: &[u8; 4] = b"PSN1";
const VERSION: u32 = 1;

/// Header metadata carried alongside the samples in a PSN1 file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    pub a: f64,
    pub omega: f64,
}

/// Layout: magic "PSN1" | version u32 | n u32 | L f64 | a f64 | omega f64 |
/// 2n^2 f64 row-major interleaved (re, im). All little-endian.
pub fn save_field(path: &Path, u: &ComplexField2D, meta: &FieldMeta) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(path, e);
    w.write_all(MAGIC).map_err(io_err)?;
    w.write_u32::<LittleEndian>(VERSION).map_err(io_err)?;
    w.write_u32::<LittleEndian>(u.grid().n() as u32).map_err(io_err)?;
    w.write_f64::<LittleEndian>(u.grid().half_width()).map_err(io_err)?;
    w.write_f64::<LittleEndian>(meta.a).map_err(io_err)?;
    w.write_f64::<LittleEndian>(meta.omega).map_err(io_err)?;
    for v in u.values().iter() {
        w.write_f64::<LittleEndian>(v.re).map_err(io_err)?;
        w.write_f64::<LittleEndian>(v.im).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn load_field(path: &Path) -> Result<(ComplexField2D, FieldMeta)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let io_err = |e| Error::io(path, e);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io_err)?;
    if &magic != MAGIC {
        return Err(Error::BadMagic);
    }
    let version = r.read_u32::<LittleEndian>().map_err(io_err)?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let n = r.read_u32::<LittleEndian>().map_err(io_err)? as usize;
    let half_width = r.read_f64::<LittleEndian>().map_err(io_err)?;
    let a = r.read_f64::<LittleEndian>().map_err(io_err)?;
    let omega = r.read_f64::<LittleEndian>().map_err(io_err)?;
    let grid = Grid2D::new(n, half_width)?;
    let expected = 2 * n * n * 8;
    let mut payload = Vec::new();
    r.read_to_end(&mut payload).map_err(io_err)?;
    if payload.len() != expected {
        return Err(Error::TruncatedPayload { expected, got: payload.len() });
    }
    let mut values = Array2::<Complex64>::zeros((n, n));
    for (k, v) in values.iter_mut().enumerate() {
        let re = f64::from_le_bytes(payload[16 * k..16 * k + 8].try_into().unwrap());
        let im = f64::from_le_bytes(payload[16 * k + 8..16 * k + 16].try_into().unwrap());
        *v = Complex64::new(re, im);
    }
    Ok((ComplexField2D::new(&grid, values)?, FieldMeta { a, omega }))
}

/// Grid block of a run configuration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub half_width: f64,
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid2D> {
        Grid2D::new(self.n, self.half_width)
    }
}

/// Potential block of a run configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum PotentialConfig {
    Harmonic { lambda: f64, omega: f64 },
    Power { s: f64, coefficient: f64, omega: f64 },
}

impl PotentialConfig {
    pub fn build(&self) -> Result<PotentialSpec> {
        match *self {
            PotentialConfig::Harmonic { lambda, omega } => PotentialSpec::harmonic(lambda, omega),
            PotentialConfig::Power { s, coefficient, omega } => {
                PotentialSpec::power(s, coefficient, omega)
            }
        }
    }
}

/// Mass list for a sweep: explicit values or fractions of the critical mass.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub a_values: Option<Vec<f64>>,
    #[serde(default)]
    pub a_fractions: Option<Vec<f64>>,
    /// Rescaled-frame width factor passed to the blow-up diagnostics.
    #[serde(default = "default_kappa")]
    pub kappa: f64,
}

fn default_kappa() -> f64 {
    1.0
}

impl SweepConfig {
    pub fn masses(&self, a_star: f64) -> Result<Vec<f64>> {
        match (&self.a_values, &self.a_fractions) {
            (Some(v), None) => Ok(v.clone()),
            (None, Some(f)) => {
                if f.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
                    return Err(Error::Config(
                        "a_fractions must lie strictly between 0 and 1".into(),
                    ));
                }
                Ok(f.iter().map(|&x| x * a_star).collect())
            }
            _ => Err(Error::Config("give exactly one of a_values or a_fractions".into())),
        }
    }
}

/// Top-level JSON run configuration shared by the CLI subcommands.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub potential: PotentialConfig,
    #[serde(default)]
    pub solver: MinimizeConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Sweep table columns, pinned for downstream plotting. The runtime field
/// of SweepRecord is intentionally not serialized.
const SWEEP_HEADER: [&str; 10] = [
    "a",
    "e_a",
    "epsilon_a",
    "mu_a",
    "mu_eps2",
    "x_a_1",
    "x_a_2",
    "l2_distance",
    "v_omega_xa",
    "converged",
];

pub fn write_sweep_csv(path: &Path, records: &[SweepRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Config(format!("{e}")))?;
    w.write_record(SWEEP_HEADER).map_err(|e| Error::Config(format!("{e}")))?;
    for r in records {
        let row = [
            fmt(r.a),
            fmt(r.e_a),
            fmt(r.epsilon_a),
            fmt(r.mu_a),
            fmt(r.mu_a * r.epsilon_a * r.epsilon_a),
            fmt(r.x_a.0),
            fmt(r.x_a.1),
            fmt(r.l2_distance),
            fmt(r.v_omega_xa),
            if r.converged { "true".into() } else { "false".into() },
        ];
        w.write_record(&row).map_err(|e| Error::Config(format!("{e}")))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Config(format!("{e}")))?;
    let head = r.headers().map_err(|e| Error::Config(format!("{e}")))?.clone();
    if head.iter().ne(SWEEP_HEADER) {
        return Err(Error::Config(format!("unexpected sweep CSV header {head:?}")));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::Config(format!("{e}")))?;
        let get = |i: usize| -> Result<f64> {
            rec.get(i)
                .ok_or_else(|| Error::Config("short sweep CSV row".into()))?
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("bad float in sweep CSV: {e}")))
        };
        out.push(SweepRecord {
            a: get(0)?,
            e_a: get(1)?,
            epsilon_a: get(2)?,
            mu_a: get(3)?,
            x_a: (get(5)?, get(6)?),
            l2_distance: get(7)?,
            v_omega_xa: get(8)?,
            runtime: 0.0,
            converged: rec.get(9) == Some("true"),
        });
    }
    Ok(out)
}

/// Pretty JSON with a trailing newline, for report files.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Config(format!("serialize: {e}")))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Owned path helper so configs can be round-tripped through serde.
pub fn as_path(p: &str) -> PathBuf {
    PathBuf::from(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::random_smooth_complex;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn field_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.psn1");
        let grid = Grid2D::new(32, 5.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = ComplexField2D::new(&grid, random_smooth_complex(&grid, &mut rng, 3)).unwrap();
        let meta = FieldMeta { a: 2.5, omega: 1.25 };
        save_field(&path, &u, &meta).unwrap();
        let (v, got) = load_field(&path).unwrap();
        assert_eq!(got, meta);
        assert_eq!(v.grid(), u.grid());
        for (a, b) in u.values().iter().zip(v.values().iter()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn field_file_error_cases() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.psn1");
        let grid = Grid2D::new(16, 4.0).unwrap();
        let u = ComplexField2D::new(&grid, Array2::zeros((16, 16))).unwrap();
        save_field(&path, &u, &FieldMeta { a: 1.0, omega: 0.0 }).unwrap();

        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_field(&path), Err(Error::BadMagic)));

        bytes[0] = b'P';
        bytes[4] = 99;
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_field(&path), Err(Error::UnsupportedVersion(99))));

        bytes[4] = 1;
        bytes.truncate(bytes.len() - 8);
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_field(&path), Err(Error::TruncatedPayload { .. })));

        // header advertises a larger grid than the payload provides
        let mut grown = std::fs::read(&path).unwrap();
        grown[8] = 32;
        std::fs::write(&path, &grown).unwrap();
        assert!(matches!(load_field(&path), Err(Error::TruncatedPayload { .. })));
    }

    #[test]
    fn run_config_parses_and_validates() {
        let text = r#"{
            "grid": {"n": 64, "half_width": 8.0},
            "potential": {"kind": "harmonic", "lambda": 2.0, "omega": 1.0},
            "sweep": {"a_fractions": [0.5, 0.9]},
            "seed": 7
        }"#;
        let cfg: RunConfig = serde_json::from_str(text).unwrap();
        assert_eq!(cfg.grid.n, 64);
        let masses = cfg.sweep.as_ref().unwrap().masses(10.0).unwrap();
        assert_eq!(masses, vec![5.0, 9.0]);
        cfg.potential.build().unwrap();

        let bad = r#"{
            "grid": {"n": 64, "half_width": 8.0},
            "potential": {"kind": "harmonic", "lambda": 2.0, "omega": 1.0},
            "unknown_key": 3
        }"#;
        assert!(serde_json::from_str::<RunConfig>(bad).is_err());

        let sweep = SweepConfig { a_values: None, a_fractions: Some(vec![1.5]), kappa: 1.0 };
        assert!(sweep.masses(10.0).is_err());
        let neither = SweepConfig { a_values: None, a_fractions: None, kappa: 1.0 };
        assert!(neither.masses(10.0).is_err());
    }

    #[test]
    fn sweep_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.csv");
        let records = vec![
            SweepRecord {
                a: 5.85,
                e_a: -1.25,
                epsilon_a: 0.21,
                mu_a: -3.5,
                x_a: (0.001, -0.002),
                l2_distance: 0.05,
                v_omega_xa: 1.1e-5,
                runtime: 12.5,
                converged: true,
            },
            SweepRecord {
                a: 11.0,
                e_a: -30.0,
                epsilon_a: 0.04,
                mu_a: -200.0,
                x_a: (0.0, 0.0),
                l2_distance: 0.02,
                v_omega_xa: 2.0e-6,
                runtime: 80.0,
                converged: false,
            },
        ];
        write_sweep_csv(&path, &records).unwrap();
        let first = std::fs::read(&path).unwrap();
        write_sweep_csv(&path, &records).unwrap();
        let second = std::fs::read(&path).unwrap();
        assert_eq!(first, second, "CSV emission must be deterministic");

        let back = read_sweep_csv(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].a, records[0].a);
        assert_eq!(back[0].mu_a, records[0].mu_a);
        assert_eq!(back[1].converged, false);
        assert_eq!(back[0].x_a, records[0].x_a);
        // runtime is not a CSV column
        assert_eq!(back[0].runtime, 0.0);
    }
}
