//! Plain-text weight snapshots.
//!
//! ```text
//! # wingpitch weight snapshot v1
//! tracking critic 6
//! <6 rows of 6 values>
//! tracking actor 6
//! <1 row of 6 values>
//! stabilizing critic 3
//! <3 rows of 3 values>
//! stabilizing actor 3
//! <1 row of 3 values>
//! ```
//!
//! Values are row-major, whitespace separated, written in shortest
//! round-trip decimal form. Lines starting with `#` and blank lines are
//! ignored; sections may appear in any order but all four are required.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::learner::{ActorWeights, CriticWeights};

pub const SNAPSHOT_HEADER: &str = "# wingpitch weight snapshot v1";

#[derive(Clone, Debug, PartialEq)]
pub struct WeightSnapshot {
    pub tracking_critic: CriticWeights,
    pub tracking_actor: ActorWeights,
    pub stabilizing_critic: CriticWeights,
    pub stabilizing_actor: ActorWeights,
}

impl WeightSnapshot {
    pub fn is_finite(&self) -> bool {
        self.tracking_critic.is_finite()
            && self.tracking_actor.is_finite()
            && self.stabilizing_critic.is_finite()
            && self.stabilizing_actor.is_finite()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(SNAPSHOT_HEADER);
        out.push('\n');
        write_matrix(&mut out, "tracking critic", &self.tracking_critic.omega);
        write_row(&mut out, "tracking actor", &self.tracking_actor.omega);
        write_matrix(
            &mut out,
            "stabilizing critic",
            &self.stabilizing_critic.omega,
        );
        write_row(&mut out, "stabilizing actor", &self.stabilizing_actor.omega);
        out
    }

    pub fn from_text(text: &str, path: &Path) -> Result<Self> {
        let parse_err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let mut sections: [Option<Vec<f64>>; 4] = Default::default();
        let mut dims = [0usize; 4];
        while let Some((lineno, header)) = lines.next() {
            let parts: Vec<&str> = header.split_whitespace().collect();
            let [learner, kind, dim] = parts[..] else {
                return Err(parse_err(
                    lineno,
                    format!("expected section header, got `{header}`"),
                ));
            };
            let d: usize = dim
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad dimension `{dim}`")))?;
            let slot = match (learner, kind) {
                ("tracking", "critic") => 0,
                ("tracking", "actor") => 1,
                ("stabilizing", "critic") => 2,
                ("stabilizing", "actor") => 3,
                _ => {
                    return Err(parse_err(
                        lineno,
                        format!("unknown section `{learner} {kind}`"),
                    ))
                }
            };
            if sections[slot].is_some() {
                return Err(parse_err(
                    lineno,
                    format!("duplicate section `{learner} {kind}`"),
                ));
            }
            let rows = if kind == "critic" { d } else { 1 };
            let mut values = Vec::with_capacity(rows * d);
            for _ in 0..rows {
                let (row_line, row) = lines
                    .next()
                    .ok_or_else(|| parse_err(lineno, "unexpected end of file".into()))?;
                let parsed = row
                    .split_whitespace()
                    .map(|tok| {
                        tok.parse::<f64>()
                            .map_err(|_| parse_err(row_line, format!("bad number `{tok}`")))
                    })
                    .collect::<Result<Vec<f64>>>()?;
                if parsed.len() != d {
                    return Err(parse_err(
                        row_line,
                        format!("expected {d} values, got {}", parsed.len()),
                    ));
                }
                values.extend(parsed);
            }
            dims[slot] = d;
            sections[slot] = Some(values);
        }

        let names = [
            "tracking critic",
            "tracking actor",
            "stabilizing critic",
            "stabilizing actor",
        ];
        let mut taken = sections
            .into_iter()
            .zip(names)
            .map(|(s, name)| s.ok_or_else(|| parse_err(0, format!("missing section `{name}`"))));
        let tc = taken.next().unwrap()?;
        let ta = taken.next().unwrap()?;
        let sc = taken.next().unwrap()?;
        let sa = taken.next().unwrap()?;
        Ok(Self {
            tracking_critic: CriticWeights::new(DMatrix::from_row_slice(dims[0], dims[0], &tc))?,
            tracking_actor: ActorWeights::new(DVector::from_vec(ta)),
            stabilizing_critic: CriticWeights::new(DMatrix::from_row_slice(dims[2], dims[2], &sc))?,
            stabilizing_actor: ActorWeights::new(DVector::from_vec(sa)),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|source| Error::Io {
            path: PathBuf::from(path),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: PathBuf::from(path),
            source,
        })?;
        Self::from_text(&text, path)
    }
}

fn write_values<'a>(out: &mut String, values: impl Iterator<Item = &'a f64>) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(' ');
        }
        first = false;
        let _ = write!(out, "{v:?}");
    }
    out.push('\n');
}

fn write_matrix(out: &mut String, name: &str, m: &DMatrix<f64>) {
    let _ = writeln!(out, "{name} {}", m.nrows());
    for row in m.row_iter() {
        write_values(out, row.iter());
    }
}

fn write_row(out: &mut String, name: &str, v: &DVector<f64>) {
    let _ = writeln!(out, "{name} {}", v.len());
    write_values(out, v.iter());
}
