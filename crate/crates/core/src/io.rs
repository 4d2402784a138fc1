//! Ensemble file formats.
//!
//! Path CSV: `#` comment lines carrying provenance, then the header
//! `path_id,time,deme_0,...,deme_{d-1},env_mean,env_var` and one row per
//! (path, sample time). Comma separated, `.` decimal point, LF line ends.
//! Floats are written in shortest round-trip form.
//!
//! Binary summary (little endian): magic `SAVG`, `u16` version, `u32 n`,
//! `u64 seed`, `u32 n_paths`, `u32 n_times`, `u32 n_demes`, the `n_times`
//! times as `f64`, then `(mean, variance)` as `f64` pairs for each time and
//! deme in time-major order.

use std::io::{BufRead, BufReader, Read, Write};

use crate::env::EnvironmentLaw;
use crate::path::{Ensemble, EnsembleKind, EventCounts, Path};
use crate::simulate::SpeedLaw;
use crate::stats::EnsembleSummary;
use crate::{Error, Result};

pub const MAGIC: [u8; 4] = *b"SAVG";
pub const BINARY_VERSION: u16 = 1;

/// Provenance written at the top of every artifact.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Provenance {
    pub version: String,
    pub config_sha256: String,
    pub seed: u64,
    /// Additional free-form comment lines (without the leading `# `).
    pub extra: Vec<String>,
}

impl Provenance {
    pub fn new(config_sha256: impl Into<String>, seed: u64) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256: config_sha256.into(),
            seed,
            extra: Vec::new(),
        }
    }

    pub fn header_lines(&self) -> Vec<String> {
        let mut lines = vec![format!(
            "# stochavg {} config_sha256={} seed={}",
            self.version, self.config_sha256, self.seed
        )];
        lines.extend(self.extra.iter().map(|l| format!("# {l}")));
        lines
    }
}

/// How to fill the `env_mean` and `env_var` columns.
#[derive(Debug, Clone, Copy)]
pub enum EnvColumns<'a> {
    /// Mean and variance of the offspring law in force.
    Offspring(&'a EnvironmentLaw),
    /// Current speed, variance zero.
    Speed(&'a SpeedLaw),
    /// Left empty.
    None,
}

fn kind_name(kind: EnsembleKind) -> &'static str {
    match kind {
        EnsembleKind::Brwre => "brwre",
        EnsembleKind::Walker => "walker",
        EnsembleKind::Sde => "sde",
        EnsembleKind::WalkerLimit => "walker-limit",
    }
}

fn parse_kind(s: &str) -> Result<EnsembleKind> {
    Ok(match s {
        "brwre" => EnsembleKind::Brwre,
        "walker" => EnsembleKind::Walker,
        "sde" => EnsembleKind::Sde,
        "walker-limit" => EnsembleKind::WalkerLimit,
        other => return Err(Error::Format(format!("unknown ensemble kind '{other}'"))),
    })
}

/// Writes an ensemble as path CSV.
pub fn write_paths_csv<W: Write>(
    out: W,
    ensemble: &Ensemble,
    provenance: &Provenance,
    env: EnvColumns<'_>,
) -> Result<()> {
    let mut out = out;
    for line in provenance.header_lines() {
        writeln!(out, "{line}")?;
    }
    writeln!(
        out,
        "# kind={} n={} demes={} paths={} scale={}",
        kind_name(ensemble.kind),
        ensemble.n,
        ensemble.demes,
        ensemble.n_paths(),
        ensemble.paths.first().map_or(1.0, |p| p.scale)
    )?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let mut header = vec!["path_id".to_string(), "time".to_string()];
    header.extend((0..ensemble.demes).map(|i| format!("deme_{i}")));
    header.push("env_mean".into());
    header.push("env_var".into());
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(header.len());
    for p in &ensemble.paths {
        for (k, &t) in p.times.iter().enumerate() {
            row.clear();
            row.push(p.path_id.to_string());
            row.push(t.to_string());
            row.extend(p.raw[k].iter().map(|v| (v / p.scale).to_string()));
            let atom = p.env_at(t);
            let (m, v) = match (env, atom) {
                (EnvColumns::Offspring(law), Some(a)) => {
                    let z = law.atom(a);
                    (z.mean().to_string(), z.variance().to_string())
                }
                (EnvColumns::Speed(law), Some(a)) => (law.values()[a].to_string(), "0".to_string()),
                _ => (String::new(), String::new()),
            };
            row.push(m);
            row.push(v);
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Path CSV read back into memory.
#[derive(Debug, Clone, PartialEq)]
pub struct PathTable {
    pub comments: Vec<String>,
    pub ensemble: Ensemble,
}

/// Reads a path CSV produced by [`write_paths_csv`]. Values are the scaled
/// states, so the returned paths have `scale = 1`.
pub fn read_paths_csv<R: Read>(input: R) -> Result<PathTable> {
    let mut reader = BufReader::new(input);
    let mut comments = Vec::new();
    let mut body = String::new();
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        if let Some(c) = line.strip_prefix('#') {
            comments.push(c.trim().to_string());
        } else {
            body.push_str(&line);
            reader.read_to_string(&mut body)?;
            break;
        }
    }
    let meta = comments
        .iter()
        .find(|c| c.starts_with("kind="))
        .ok_or_else(|| Error::Format("missing '# kind=' line".into()))?;
    let field = |key: &str| -> Result<&str> {
        meta.split_whitespace()
            .find_map(|kv| kv.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
            .ok_or_else(|| Error::Format(format!("missing '{key}' in '{meta}'")))
    };
    let kind = parse_kind(field("kind")?)?;
    let n: u32 = field("n")?
        .parse()
        .map_err(|e| Error::Format(format!("n: {e}")))?;
    let seed = comments
        .first()
        .and_then(|c| c.split_whitespace().find_map(|kv| kv.strip_prefix("seed=")))
        .map(str::parse::<u64>)
        .transpose()
        .map_err(|e| Error::Format(format!("seed: {e}")))?
        .unwrap_or(0);

    let mut r = csv::ReaderBuilder::new().from_reader(body.as_bytes());
    let headers = r.headers()?.clone();
    let demes = headers.iter().filter(|h| h.starts_with("deme_")).count();
    if headers.len() != demes + 4 || &headers[0] != "path_id" || &headers[1] != "time" {
        return Err(Error::Format(format!("unexpected header {headers:?}")));
    }
    let parse = |s: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|e| Error::Format(format!("'{s}': {e}")))
    };
    let mut paths: Vec<Path> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let id: u64 = rec[0]
            .parse()
            .map_err(|e| Error::Format(format!("path_id: {e}")))?;
        if paths.last().map(|p| p.path_id) != Some(id) {
            paths.push(Path {
                path_id: id,
                seed,
                scale: 1.0,
                horizon: 0.0,
                times: Vec::new(),
                raw: Vec::new(),
                env_trace: Vec::new(),
                extinction_time: None,
                events: EventCounts::default(),
            });
        }
        let p = paths.last_mut().expect("pushed above");
        let t = parse(&rec[1])?;
        p.times.push(t);
        p.horizon = p.horizon.max(t);
        p.raw.push(
            (0..demes)
                .map(|i| parse(&rec[2 + i]))
                .collect::<Result<_>>()?,
        );
    }
    let grid = paths.first().map(|p| p.times.clone()).unwrap_or_default();
    if paths.iter().any(|p| p.times != grid) {
        return Err(Error::GridMismatch(
            "paths in the file use different grids".into(),
        ));
    }
    Ok(PathTable {
        comments,
        ensemble: Ensemble {
            kind,
            seed,
            n,
            grid,
            demes,
            paths,
            clamp_events: 0,
        },
    })
}

/// Writes `time,deme,mean,var,se,n_paths`.
pub fn write_summary_csv<W: Write>(
    out: W,
    summary: &EnsembleSummary,
    provenance: &Provenance,
) -> Result<()> {
    let mut out = out;
    for line in provenance.header_lines() {
        writeln!(out, "{line}")?;
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(["time", "deme", "mean", "var", "se", "n_paths"])?;
    for c in &summary.cells {
        w.write_record([
            c.time.to_string(),
            c.deme.to_string(),
            c.mean.to_string(),
            c.variance.to_string(),
            c.standard_error.to_string(),
            c.n_paths.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Contents of a binary summary file.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarySummary {
    pub n: u32,
    pub seed: u64,
    pub n_paths: u32,
    pub times: Vec<f64>,
    pub demes: u32,
    /// `(mean, variance)` indexed `[time][deme]`.
    pub moments: Vec<Vec<(f64, f64)>>,
}

impl BinarySummary {
    pub fn from_summary(summary: &EnsembleSummary, n: u32, seed: u64) -> Result<Self> {
        let mut times: Vec<f64> = Vec::new();
        for c in &summary.cells {
            if times.last() != Some(&c.time) {
                times.push(c.time);
            }
        }
        let demes = summary.cells.iter().map(|c| c.deme + 1).max().unwrap_or(0);
        if summary.cells.len() != times.len() * demes {
            return Err(Error::Format(
                "summary cells do not form a time x deme table".into(),
            ));
        }
        let n_paths = summary.cells.first().map_or(0, |c| c.n_paths) as u32;
        let moments = summary
            .cells
            .chunks(demes.max(1))
            .map(|row| row.iter().map(|c| (c.mean, c.variance)).collect())
            .collect();
        Ok(Self {
            n,
            seed,
            n_paths,
            times,
            demes: demes as u32,
            moments,
        })
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(&MAGIC)?;
        out.write_all(&BINARY_VERSION.to_le_bytes())?;
        out.write_all(&self.n.to_le_bytes())?;
        out.write_all(&self.seed.to_le_bytes())?;
        out.write_all(&self.n_paths.to_le_bytes())?;
        out.write_all(&(self.times.len() as u32).to_le_bytes())?;
        out.write_all(&self.demes.to_le_bytes())?;
        for t in &self.times {
            out.write_all(&t.to_le_bytes())?;
        }
        for row in &self.moments {
            for (m, v) in row {
                out.write_all(&m.to_le_bytes())?;
                out.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read<R: Read>(mut input: R) -> Result<Self> {
        fn take<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
            let mut b = [0u8; N];
            r.read_exact(&mut b)
                .map_err(|e| Error::Format(format!("truncated binary summary: {e}")))?;
            Ok(b)
        }
        if take::<4, _>(&mut input)? != MAGIC {
            return Err(Error::Format("bad magic bytes".into()));
        }
        let version = u16::from_le_bytes(take(&mut input)?);
        if version != BINARY_VERSION {
            return Err(Error::Format(format!(
                "unsupported binary summary version {version}"
            )));
        }
        let n = u32::from_le_bytes(take(&mut input)?);
        let seed = u64::from_le_bytes(take(&mut input)?);
        let n_paths = u32::from_le_bytes(take(&mut input)?);
        let n_times = u32::from_le_bytes(take(&mut input)?) as usize;
        let demes = u32::from_le_bytes(take(&mut input)?);
        let times = (0..n_times)
            .map(|_| Ok(f64::from_le_bytes(take(&mut input)?)))
            .collect::<Result<Vec<_>>>()?;
        let moments = (0..n_times)
            .map(|_| {
                (0..demes)
                    .map(|_| {
                        let m = f64::from_le_bytes(take(&mut input)?);
                        let v = f64::from_le_bytes(take(&mut input)?);
                        Ok((m, v))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n,
            seed,
            n_paths,
            times,
            demes,
            moments,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::two_point_environment;
    use crate::lattice::MigrationKernel;
    use crate::limits::walker_limit_sample;
    use crate::path::uniform_grid;
    use crate::simulate::{brwre_ensemble, BrwreOptions, ParticleState};
    use crate::stats::ensemble_summary;
    use proptest::prelude::*;

    #[test]
    fn path_csv_round_trip() {
        let k = MigrationKernel::complete(2, 1.0).unwrap();
        let env = two_point_environment(0.5, 0.3, 10).unwrap();
        let x0 = ParticleState::new(vec![10, 5], 10);
        let grid = uniform_grid(0.5, 0.1);
        let e = brwre_ensemble(&k, &env, &x0, 0.5, &grid, 3, 4, BrwreOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_paths_csv(
            &mut buf,
            &e,
            &Provenance::new("abc", 4),
            EnvColumns::Offspring(&env),
        )
        .unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# stochavg "));
        assert!(!text.contains('\r'));
        assert!(text.contains("path_id,time,deme_0,deme_1,env_mean,env_var\n"));
        assert_eq!(
            text.lines().filter(|l| !l.starts_with('#')).count(),
            1 + 3 * grid.len()
        );
        let back = read_paths_csv(buf.as_slice()).unwrap();
        assert_eq!(back.ensemble.kind, EnsembleKind::Brwre);
        assert_eq!(back.ensemble.seed, 4);
        assert_eq!(back.ensemble.n, 10);
        for (a, b) in e.paths.iter().zip(&back.ensemble.paths) {
            for k in 0..grid.len() {
                assert_eq!(a.state(k), b.state(k));
            }
        }
    }

    #[test]
    fn sde_rows_leave_env_empty() {
        let e = walker_limit_sample(1.0, 1.0, &[0.0, 1.0], 2, 1).unwrap();
        let mut buf = Vec::new();
        write_paths_csv(&mut buf, &e, &Provenance::new("x", 1), EnvColumns::None).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().last().unwrap().ends_with(",,"));
    }

    #[test]
    fn binary_rejects_garbage() {
        assert!(BinarySummary::read(&b"NOPE"[..]).is_err());
        assert!(BinarySummary::read(&b"SAVG\x01"[..]).is_err());
    }

    #[test]
    fn summary_csv_layout() {
        let e = walker_limit_sample(1.0, 1.0, &[0.0, 1.0], 20, 1).unwrap();
        let s = ensemble_summary(&e, &[0.0, 1.0]).unwrap();
        let mut buf = Vec::new();
        write_summary_csv(&mut buf, &s, &Provenance::new("x", 1)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("\ntime,deme,mean,var,se,n_paths\n0,0,0,0,0,20\n"));
    }

    proptest! {
        #[test]
        fn binary_round_trip(n in 0u32..1000, seed in any::<u64>(), paths in 0u32..100_000,
                             rows in proptest::collection::vec(proptest::collection::vec((-1e6..1e6f64, 0.0..1e6f64), 3), 0..5)) {
            let s = BinarySummary {
                n,
                seed,
                n_paths: paths,
                times: (0..rows.len()).map(|k| k as f64 * 0.25).collect(),
                demes: 3,
                moments: rows,
            };
            let mut buf = Vec::new();
            s.write(&mut buf).unwrap();
            prop_assert_eq!(BinarySummary::read(buf.as_slice()).unwrap(), s);
        }
    }
}
