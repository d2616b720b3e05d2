//! Binary checkpoints.
//!
//! Layout: the 8-byte magic `ANYSLABC`, the format version (u32 LE), the
//! header length in bytes (u64 LE), a UTF-8 TOML header, then the field
//! values in row-major `(x, v1, v2)` order as f64 LE, followed by the
//! recorder's sup history in the same layout when the header says so.
//! Floating-point header values are stored as hex bit patterns so that a
//! round trip is bit exact.

use std::fs;
use std::path::Path;

use toml::{Table, Value};

use super::config::{parse_config, RunConfig};
use crate::diagnostics::{Carry, FluxProbe, RecorderState, SharpHistory};
use crate::error::{Error, Result};
use crate::fields::{DistributionField, Moments};
use crate::solver::SolverState;

pub const MAGIC: &[u8; 8] = b"ANYSLABC";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: RunConfig,
    pub state: SolverState,
    pub recorder: Option<RecorderState>,
}

fn hex(x: f64) -> Value {
    Value::String(format!("{:#018x}", x.to_bits()))
}

fn unhex(t: &Table, key: &str) -> Result<f64> {
    let s = t
        .get(key)
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Checkpoint(format!("header lacks {key}")))?;
    let bits = u64::from_str_radix(s.trim_start_matches("0x"), 16)
        .map_err(|_| Error::Checkpoint(format!("bad value for {key}: {s:?}")))?;
    Ok(f64::from_bits(bits))
}

fn int(t: &Table, key: &str) -> Result<usize> {
    t.get(key)
        .and_then(Value::as_integer)
        .filter(|&i| i >= 0)
        .map(|i| i as usize)
        .ok_or_else(|| Error::Checkpoint(format!("header lacks {key}")))
}

fn section<'a>(t: &'a Table, key: &str) -> Result<&'a Table> {
    t.get(key)
        .and_then(Value::as_table)
        .ok_or_else(|| Error::Checkpoint(format!("header lacks [{key}]")))
}

pub fn to_bytes(ck: &Checkpoint) -> Vec<u8> {
    let f = &ck.state.field;
    let mut head = Table::new();
    let mut meta = Table::new();
    meta.insert("step".into(), (ck.state.step_index as i64).into());
    meta.insert("time".into(), hex(f.time));
    meta.insert("nx".into(), (f.nx as i64).into());
    meta.insert("nv".into(), (f.nv as i64).into());
    meta.insert("values".into(), (f.values.len() as i64).into());
    meta.insert("history".into(), ck.recorder.is_some().into());
    head.insert("checkpoint".into(), Value::Table(meta));
    if let Some(r) = &ck.recorder {
        let mut c = Table::new();
        let m = &r.initial;
        for (k, v) in [
            ("initial_mass", m.mass),
            ("initial_momentum1", m.momentum1),
            ("initial_momentum2", m.momentum2),
            ("initial_energy", m.energy),
            ("entropy", r.carry.entropy),
            ("momentum_flux", r.carry.flux.momentum_flux),
            ("momentum", r.carry.flux.momentum),
            ("bony", r.carry.bony),
            ("bony_integral", r.carry.bony_integral),
            ("momentum_integral", r.carry.momentum_integral),
            ("momentum_flux_integral", r.carry.momentum_flux_integral),
        ] {
            c.insert(k.into(), hex(v));
        }
        head.insert("recorder".into(), Value::Table(c));
    }
    let config: Table = ck
        .config
        .to_toml()
        .parse()
        .expect("canonical config text is valid TOML");
    head.insert("config".into(), Value::Table(config));
    let text = head.to_string();

    let n_hist = ck.recorder.as_ref().map_or(0, |r| r.history.values.len());
    let mut out = Vec::with_capacity(20 + text.len() + 8 * (f.values.len() + n_hist));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(text.len() as u64).to_le_bytes());
    out.extend_from_slice(text.as_bytes());
    for v in &f.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    if let Some(r) = &ck.recorder {
        for v in &r.history.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn read_f64s(bytes: &[u8], n: usize, what: &str) -> Result<(Vec<f64>, usize)> {
    let need = 8 * n;
    if bytes.len() < need {
        return Err(Error::Checkpoint(format!(
            "truncated payload: {what} needs {need} bytes, {} present",
            bytes.len()
        )));
    }
    let vals = bytes[..need]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok((vals, need))
}

pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < 20 || &bytes[..8] != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "version mismatch: file has {version}, reader supports {VERSION}"
        )));
    }
    let hlen = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let rest = &bytes[20..];
    if rest.len() < hlen {
        return Err(Error::Checkpoint("truncated header".into()));
    }
    let text = std::str::from_utf8(&rest[..hlen])
        .map_err(|_| Error::Checkpoint("header is not UTF-8".into()))?;
    let head: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Checkpoint(format!("bad header: {}", e.message())))?;
    let meta = section(&head, "checkpoint")?;
    let config = parse_config(&section(&head, "config")?.to_string())?;
    let (nx, nv, n) = (int(meta, "nx")?, int(meta, "nv")?, int(meta, "values")?);
    if nx != config.params.nx || nv != config.params.nv || n != nx * nv * nv {
        return Err(Error::Checkpoint(format!(
            "config-grid mismatch: payload {nx}x{nv}x{nv} ({n} values), config {}x{}x{}",
            config.params.nx, config.params.nv, config.params.nv
        )));
    }
    let payload = &rest[hlen..];
    let (values, used) = read_f64s(payload, n, "field")?;
    let has_history = meta.get("history").and_then(Value::as_bool).unwrap_or(false);
    let recorder = if has_history {
        let (hist, used2) = read_f64s(&payload[used..], n, "sup history")?;
        if payload.len() != used + used2 {
            return Err(Error::Checkpoint("trailing bytes after payload".into()));
        }
        let c = section(&head, "recorder")?;
        Some(RecorderState {
            history: SharpHistory {
                nx,
                nv,
                values: hist,
            },
            initial: Moments {
                mass: unhex(c, "initial_mass")?,
                momentum1: unhex(c, "initial_momentum1")?,
                momentum2: unhex(c, "initial_momentum2")?,
                energy: unhex(c, "initial_energy")?,
            },
            carry: Carry {
                entropy: unhex(c, "entropy")?,
                flux: FluxProbe {
                    momentum_flux: unhex(c, "momentum_flux")?,
                    momentum: unhex(c, "momentum")?,
                },
                bony: unhex(c, "bony")?,
                bony_integral: unhex(c, "bony_integral")?,
                momentum_integral: unhex(c, "momentum_integral")?,
                momentum_flux_integral: unhex(c, "momentum_flux_integral")?,
            },
        })
    } else {
        if payload.len() != used {
            return Err(Error::Checkpoint("trailing bytes after payload".into()));
        }
        None
    };
    Ok(Checkpoint {
        config,
        state: SolverState {
            field: DistributionField {
                nx,
                nv,
                values,
                time: unhex(meta, "time")?,
            },
            step_index: int(meta, "step")?,
            picard_residuals: Vec::new(),
        },
        recorder,
    })
}

pub fn write_checkpoint(path: &Path, ck: &Checkpoint) -> Result<()> {
    fs::write(path, to_bytes(ck)).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{make_grid, SimulationParams};
    use crate::presets::Preset;

    fn sample() -> Checkpoint {
        let params = SimulationParams { nx: 3, nv: 8, j: 2.0, ..Default::default() };
        let grid = make_grid(&params).unwrap();
        let mut field = DistributionField::from_fn(&grid, |x, v| 0.1 + x * 0.3 + v[0].abs() / 7.0);
        field.time = 0.1 + 0.2;
        let config = RunConfig::new(params, Preset::by_name("wave").unwrap());
        Checkpoint {
            config,
            state: SolverState {
                field,
                step_index: 30,
                picard_residuals: Vec::new(),
            },
            recorder: None,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ck = sample();
        let back = from_bytes(&to_bytes(&ck)).unwrap();
        assert_eq!(back, ck);
        let bits = |f: &DistributionField| f.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back.state.field), bits(&ck.state.field));
        assert_eq!(back.state.field.time.to_bits(), ck.state.field.time.to_bits());
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let bytes = to_bytes(&sample());
        let err = from_bytes(&bytes[..bytes.len() - 8]).unwrap_err();
        assert!(err.to_string().contains("truncated payload"), "{err}");
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let mut bytes = to_bytes(&sample());
        bytes[8] = 9;
        let err = from_bytes(&bytes).unwrap_err();
        assert!(err.to_string().contains("version mismatch"), "{err}");
    }
}
