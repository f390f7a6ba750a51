//! Checkpoint files: raw little-endian `f64` samples with a JSON sidecar
//! describing the grid and the component layout.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{DirectorField, Grid, ScalarField, VectorField};
use crate::trajectory::Snapshot;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub t: f64,
    pub grid: Grid,
    /// Component names in file order; each holds `grid.len()` samples.
    pub components: Vec<String>,
    pub byte_order: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldDump {
    pub header: FieldHeader,
    pub data: Vec<Vec<f64>>,
}

impl FieldDump {
    pub fn from_snapshot(s: &Snapshot) -> Self {
        let mut components = Vec::new();
        let mut data = Vec::new();
        if let Some(r) = &s.rho {
            components.push("rho".to_string());
            data.push(r.data.clone());
        }
        for (name, v) in [("ux", &s.u.x), ("uy", &s.u.y), ("d1", &s.d.c[0]), ("d2", &s.d.c[1]), ("d3", &s.d.c[2])] {
            components.push(name.to_string());
            data.push(v.clone());
        }
        Self { header: FieldHeader { t: s.t, grid: s.u.grid, components, byte_order: "little".into() }, data }
    }

    pub fn to_snapshot(&self) -> Result<Snapshot> {
        let g = self.header.grid;
        let get = |name: &str| -> Option<Vec<f64>> {
            self.header.components.iter().position(|c| c == name).map(|i| self.data[i].clone())
        };
        let need = |name: &str| get(name).ok_or_else(|| Error::InvalidInput(format!("checkpoint lacks component {name}")));
        Ok(Snapshot {
            t: self.header.t,
            rho: get("rho").map(|data| ScalarField { grid: g, data }),
            u: VectorField { grid: g, x: need("ux")?, y: need("uy")? },
            d: DirectorField { grid: g, c: [need("d1")?, need("d2")?, need("d3")?] },
        })
    }

    /// Sidecar path for a binary path: `x.bin` -> `x.json`.
    pub fn sidecar(path: &Path) -> PathBuf {
        path.with_extension("json")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let n = self.header.grid.len();
        if self.data.len() != self.header.components.len() || self.data.iter().any(|c| c.len() != n) {
            return Err(Error::Mismatch("component data does not match the header".into()));
        }
        let mut bytes = Vec::with_capacity(8 * n * self.data.len());
        for c in &self.data {
            for v in c {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        fs::write(path, &bytes).map_err(|e| Error::io(path, e))?;
        let side = Self::sidecar(path);
        let json = serde_json::to_string_pretty(&self.header).map_err(|e| Error::Serde(e.to_string()))?;
        fs::write(&side, json).map_err(|e| Error::io(&side, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let side = Self::sidecar(path);
        let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        let header: FieldHeader = serde_json::from_str(&text).map_err(|e| Error::Serde(e.to_string()))?;
        if header.byte_order != "little" {
            return Err(Error::InvalidInput(format!("unsupported byte order {:?}", header.byte_order)));
        }
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let n = header.grid.len();
        if bytes.len() != 8 * n * header.components.len() {
            return Err(Error::InvalidInput(format!("{} holds {} bytes, expected {}", path.display(), bytes.len(), 8 * n * header.components.len())));
        }
        let values: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect();
        let data = values.chunks(n).map(<[f64]>::to_vec).collect();
        Ok(Self { header, data })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Domain;
    use std::f64::consts::PI;

    #[test]
    fn round_trip_is_bit_exact() {
        let g = Grid::new(Domain::rectangle(PI, 2.0).unwrap(), 10, 12).unwrap();
        let s = Snapshot {
            t: 0.1 + 0.2,
            rho: Some(g.sample(|x, y| 1.0 + 1e-3 * (x * y).sin() + f64::EPSILON)),
            u: VectorField::sample(&g, |x, y| [x.cos() / 3.0, -y.exp() * 1e-300]),
            d: DirectorField::sample(&g, |x, y| [x.sin(), y / 7.0, f64::MIN_POSITIVE]),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.bin");
        FieldDump::from_snapshot(&s).write(&path).unwrap();
        let back = FieldDump::read(&path).unwrap().to_snapshot().unwrap();
        assert_eq!(back.t.to_bits(), s.t.to_bits());
        for (a, b) in back.rho.unwrap().data.iter().zip(&s.rho.as_ref().unwrap().data) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(back.u, s.u);
        assert_eq!(back.d, s.d);
    }

    #[test]
    fn truncated_file_is_rejected() {
        let g = Grid::new(Domain::slab(1.0).unwrap(), 8, 0).unwrap();
        let s = Snapshot { t: 0.0, rho: None, u: VectorField::zeros(g), d: DirectorField::zeros(g) };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.bin");
        FieldDump::from_snapshot(&s).write(&path).unwrap();
        fs::write(&path, [0u8; 5]).unwrap();
        assert!(FieldDump::read(&path).is_err());
    }
}
