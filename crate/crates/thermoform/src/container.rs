//! Self-describing binary container for dense numeric data.
//!
//! Every artifact the pipeline passes between stages (parameter
//! trajectories, state histories, reduction bases, reduced schedules) is a
//! set of named dense arrays. The container stores them behind a short ASCII
//! header followed by raw little-endian `f64` blocks in column-major order:
//!
//! ```text
//! thermoform-container 1
//! kind state-trajectory
//! array times 511 1
//! array states 2847 511
//! end
//! <raw f64 data, arrays in header order>
//! ```
//!
//! Round trips are bit-exact. Loading validates the header, array sizes
//! against the file length, and rejects non-finite values.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const MAGIC: &str = "thermoform-container 1";

/// A parsed container: its kind tag and named arrays in file order.
#[derive(Debug, Clone)]
pub struct Container {
    pub kind: String,
    arrays: Vec<(String, DMatrix<f64>)>,
}

impl Container {
    pub fn new(kind: &str) -> Self {
        Container {
            kind: kind.to_string(),
            arrays: Vec::new(),
        }
    }

    /// Appends a named matrix. Names must be unique within the container.
    pub fn push(&mut self, name: &str, data: DMatrix<f64>) -> &mut Self {
        assert!(
            self.arrays.iter().all(|(n, _)| n != name),
            "duplicate array '{name}'"
        );
        self.arrays.push((name.to_string(), data));
        self
    }

    /// Appends a slice as a column vector.
    pub fn push_vec(&mut self, name: &str, data: &[f64]) -> &mut Self {
        self.push(name, DMatrix::from_column_slice(data.len(), 1, data))
    }

    pub fn names(&self) -> Vec<&str> {
        self.arrays.iter().map(|(n, _)| n.as_str()).collect()
    }

    /// Removes and returns the named array.
    pub fn take(&mut self, name: &str, path: &str) -> Result<DMatrix<f64>> {
        match self.arrays.iter().position(|(n, _)| n == name) {
            Some(idx) => Ok(self.arrays.remove(idx).1),
            None => Err(Error::MalformedHeader {
                path: path.to_string(),
                reason: format!("missing array '{name}'"),
            }),
        }
    }

    /// Like [`take`](Self::take), additionally checking dimensions.
    pub fn take_sized(
        &mut self,
        name: &str,
        rows: usize,
        cols: usize,
        path: &str,
    ) -> Result<DMatrix<f64>> {
        let m = self.take(name, path)?;
        if m.nrows() != rows || m.ncols() != cols {
            return Err(Error::ShapeMismatch {
                context: format!("array '{name}' in {path}"),
                expected: format!("{rows} x {cols}"),
                found: format!("{} x {}", m.nrows(), m.ncols()),
            });
        }
        Ok(m)
    }

    /// Removes and returns the named array as a flat vector (must be a
    /// single column).
    pub fn take_column(&mut self, name: &str, path: &str) -> Result<Vec<f64>> {
        let m = self.take(name, path)?;
        if m.ncols() != 1 {
            return Err(Error::ShapeMismatch {
                context: format!("array '{name}' in {path}"),
                expected: "single column".into(),
                found: format!("{} x {}", m.nrows(), m.ncols()),
            });
        }
        Ok(m.as_slice().to_vec())
    }

    /// Fails unless the container carries the expected kind tag.
    pub fn expect_kind(&self, kind: &str, path: &str) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::MalformedHeader {
                path: path.to_string(),
                reason: format!("kind '{}' where '{kind}' was expected", self.kind),
            })
        }
    }

    /// Writes the container to `path`, creating parent directories.
    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir)?;
            }
        }
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "{MAGIC}")?;
        writeln!(w, "kind {}", self.kind)?;
        for (name, m) in &self.arrays {
            writeln!(w, "array {} {} {}", name, m.nrows(), m.ncols())?;
        }
        writeln!(w, "end")?;
        for (name, m) in &self.arrays {
            for (idx, v) in m.as_slice().iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        field: name.clone(),
                        step: idx / m.nrows().max(1),
                        node: idx % m.nrows().max(1),
                    });
                }
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a container written by [`save`](Self::save).
    pub fn load(path: &Path) -> Result<Container> {
        let display = path.display().to_string();
        let bad = |reason: String| Error::MalformedHeader {
            path: display.clone(),
            reason,
        };

        let mut r = BufReader::new(File::open(path)?);
        let mut header = String::new();
        // The header is pure ASCII lines; read byte-wise until the `end`
        // marker so no binary payload is consumed.
        loop {
            let mut byte = [0u8; 1];
            r.read_exact(&mut byte)
                .map_err(|_| bad("unterminated header".into()))?;
            header.push(byte[0] as char);
            if header.ends_with("\nend\n") {
                break;
            }
            if header.len() > 1 << 20 {
                return Err(bad("header exceeds 1 MiB".into()));
            }
        }

        let mut lines = header.lines();
        if lines.next() != Some(MAGIC) {
            return Err(bad(format!("bad magic line, expected '{MAGIC}'")));
        }
        let mut kind = None;
        let mut dims: Vec<(String, usize, usize)> = Vec::new();
        for line in lines {
            if line == "end" {
                break;
            }
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some("kind") => {
                    kind = Some(
                        parts
                            .next()
                            .ok_or_else(|| bad("kind line without value".into()))?
                            .to_string(),
                    );
                }
                Some("array") => {
                    let name = parts
                        .next()
                        .ok_or_else(|| bad("array line without name".into()))?;
                    let rows: usize = parts
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| bad(format!("bad row count for '{name}'")))?;
                    let cols: usize = parts
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| bad(format!("bad column count for '{name}'")))?;
                    if dims.iter().any(|(n, _, _)| n == name) {
                        return Err(bad(format!("duplicate array '{name}'")));
                    }
                    dims.push((name.to_string(), rows, cols));
                }
                Some(other) => return Err(bad(format!("unknown header key '{other}'"))),
                None => {}
            }
        }
        let kind = kind.ok_or_else(|| bad("missing kind line".into()))?;

        let mut arrays = Vec::with_capacity(dims.len());
        for (idx, (name, rows, cols)) in dims.into_iter().enumerate() {
            let mut bytes = vec![0u8; rows * cols * 8];
            r.read_exact(&mut bytes).map_err(|_| Error::TruncatedContainer {
                path: display.clone(),
                step: idx,
            })?;
            let mut data = Vec::with_capacity(rows * cols);
            for chunk in bytes.chunks_exact(8) {
                let v = f64::from_le_bytes(chunk.try_into().unwrap());
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        field: name.clone(),
                        step: data.len() / rows.max(1),
                        node: data.len() % rows.max(1),
                    });
                }
                data.push(v);
            }
            arrays.push((name, DMatrix::from_vec(rows, cols, data)));
        }

        // Trailing garbage means the file was not produced by this writer.
        let mut probe = [0u8; 1];
        if r.read(&mut probe)? != 0 {
            return Err(bad("trailing bytes after declared arrays".into()));
        }

        Ok(Container { kind, arrays })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use std::io::{Seek, SeekFrom};

    fn sample() -> Container {
        let mut c = Container::new("state-trajectory");
        c.push(
            "states",
            DMatrix::from_fn(7, 4, |i, j| (i as f64 + 1.0) * 0.1 + j as f64),
        );
        c.push_vec("times", &[0.0, 0.25, 0.5, 1.0 / 3.0]);
        c
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.bin");
        let original = sample();
        original.save(&path).unwrap();

        let mut loaded = Container::load(&path).unwrap();
        loaded.expect_kind("state-trajectory", "run.bin").unwrap();
        assert_eq!(loaded.names(), vec!["states", "times"]);
        let states = loaded.take_sized("states", 7, 4, "run.bin").unwrap();
        let times = loaded.take_column("times", "run.bin").unwrap();

        let mut reference = sample();
        assert_eq!(states, reference.take("states", "x").unwrap());
        assert_eq!(times, vec![0.0, 0.25, 0.5, 1.0 / 3.0]);
        // Bit-exactness, not just approximate equality.
        assert_eq!(times[3].to_bits(), (1.0f64 / 3.0).to_bits());
    }

    #[test]
    fn truncated_payload_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.bin");
        sample().save(&path).unwrap();
        let len = std::fs::metadata(&path).unwrap().len();
        let file = std::fs::OpenOptions::new().write(true).open(&path).unwrap();
        file.set_len(len - 16).unwrap();
        assert!(matches!(
            Container::load(&path),
            Err(Error::TruncatedContainer { .. })
        ));
    }

    #[test]
    fn bad_magic_and_bad_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.bin");
        std::fs::write(&path, b"not-a-container 9\nend\n").unwrap();
        assert!(matches!(
            Container::load(&path),
            Err(Error::MalformedHeader { .. })
        ));

        std::fs::write(
            &path,
            b"thermoform-container 1\nkind x\nbogus 1 2 3\nend\n",
        )
        .unwrap();
        assert!(matches!(
            Container::load(&path),
            Err(Error::MalformedHeader { .. })
        ));
    }

    #[test]
    fn non_finite_values_are_rejected_on_save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nan.bin");

        let mut c = Container::new("x");
        c.push("a", DMatrix::from_element(2, 2, f64::NAN));
        assert!(matches!(c.save(&path), Err(Error::NonFinite { .. })));

        // Craft a file with an infinity in the payload.
        let mut good = Container::new("x");
        good.push("a", DMatrix::from_element(2, 2, 1.0));
        good.save(&path).unwrap();
        let mut f = std::fs::OpenOptions::new().write(true).open(&path).unwrap();
        f.seek(SeekFrom::End(-8)).unwrap();
        f.write_all(&f64::INFINITY.to_le_bytes()).unwrap();
        drop(f);
        assert!(matches!(Container::load(&path), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn wrong_kind_and_missing_arrays_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.bin");
        sample().save(&path).unwrap();
        let mut loaded = Container::load(&path).unwrap();
        assert!(loaded.expect_kind("pod-basis", "run.bin").is_err());
        assert!(loaded.take("missing", "run.bin").is_err());
        assert!(loaded.take_sized("states", 3, 3, "run.bin").is_err());
    }
}
