//! Plain-text inputs: measurement-settings files and `key = value` configs.
//!
//! A settings file holds one setting per line, `A <index> <phi> <nu>` or
//! `B <index> <phi> <nu>`, angles in radians. Optional lines `theta <rad>`
//! or `cs <ratio>`, `noise <kind>`, `p <value>` and `w <value>` describe the
//! state. `#` starts a comment.

use std::fmt::Write as _;
use std::path::Path;

use etacrit_core::{MeasurementSetting, NoiseKind, NoiseSpec, SettingsAssignment};

use crate::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SettingsFile {
    pub theta: Option<f64>,
    pub cs: Option<f64>,
    pub noise: Option<NoiseKind>,
    pub p: Option<f64>,
    pub w: Option<f64>,
    pub alice: Vec<MeasurementSetting>,
    pub bob: Vec<MeasurementSetting>,
}

impl SettingsFile {
    pub fn settings(&self) -> SettingsAssignment {
        SettingsAssignment::new(self.alice.clone(), self.bob.clone())
    }
}

fn strip_comment(line: &str) -> &str {
    line.split('#').next().unwrap_or("").trim()
}

fn number(token: &str, line: usize, what: &str) -> Result<f64> {
    let v: f64 = token
        .parse()
        .map_err(|_| Error::format(line, format!("{what} '{token}' is not a number")))?;
    if !v.is_finite() {
        return Err(Error::format(line, format!("{what} must be finite")));
    }
    Ok(v)
}

pub fn parse_settings(text: &str) -> Result<SettingsFile> {
    let mut out = SettingsFile::default();
    let mut alice: Vec<(usize, MeasurementSetting)> = Vec::new();
    let mut bob: Vec<(usize, MeasurementSetting)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let tokens: Vec<&str> = strip_comment(raw).split_whitespace().collect();
        let Some(&key) = tokens.first() else { continue };
        let single = |slot: &mut Option<f64>, name: &str| -> Result<()> {
            if tokens.len() != 2 {
                return Err(Error::format(line, format!("'{name}' takes one value")));
            }
            if slot.is_some() {
                return Err(Error::format(line, format!("duplicate '{name}'")));
            }
            *slot = Some(number(tokens[1], line, name)?);
            Ok(())
        };
        match key {
            "A" | "B" => {
                if tokens.len() != 4 {
                    return Err(Error::format(line, format!("'{key}' expects <index> <phi> <nu>")));
                }
                let index: usize = tokens[1]
                    .parse()
                    .map_err(|_| Error::format(line, format!("bad setting index '{}'", tokens[1])))?;
                let phi = number(tokens[2], line, "phi")?;
                let nu = number(tokens[3], line, "nu")?;
                let list = if key == "A" { &mut alice } else { &mut bob };
                if list.iter().any(|(j, _)| *j == index) {
                    return Err(Error::format(line, format!("duplicate setting {key} {index}")));
                }
                list.push((index, MeasurementSetting::new(phi, nu)));
            }
            "theta" => single(&mut out.theta, "theta")?,
            "cs" => single(&mut out.cs, "cs")?,
            "p" => single(&mut out.p, "p")?,
            "w" => single(&mut out.w, "w")?,
            "noise" => {
                if tokens.len() != 2 {
                    return Err(Error::format(line, "'noise' takes one value"));
                }
                out.noise = Some(tokens[1].parse().map_err(|e| Error::format(line, format!("{e}")))?);
            }
            other => return Err(Error::format(line, format!("unknown key '{other}'"))),
        }
    }
    if out.theta.is_some() && out.cs.is_some() {
        return Err(Error::format(0, "give either theta or cs, not both"));
    }
    out.alice = contiguous(alice, "A")?;
    out.bob = contiguous(bob, "B")?;
    Ok(out)
}

fn contiguous(mut list: Vec<(usize, MeasurementSetting)>, party: &str) -> Result<Vec<MeasurementSetting>> {
    list.sort_by_key(|(i, _)| *i);
    for (expect, (i, _)) in list.iter().enumerate() {
        if *i != expect {
            return Err(Error::format(0, format!("{party} settings must be numbered 0.., missing {expect}")));
        }
    }
    Ok(list.into_iter().map(|(_, s)| s).collect())
}

pub fn read_settings(path: &Path) -> Result<SettingsFile> {
    let text = read(path)?;
    parse_settings(&text).map_err(|e| e.in_file(path))
}

/// Settings file text; parses back to the same angles exactly.
pub fn format_settings(theta: f64, noise: NoiseSpec, s: &SettingsAssignment) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "theta {theta:?}");
    let _ = writeln!(out, "noise {}", noise.kind);
    let _ = writeln!(out, "p {:?}", noise.p);
    let _ = writeln!(out, "w {:?}", noise.w);
    for (party, list) in [("A", &s.alice), ("B", &s.bob)] {
        for (i, m) in list.iter().enumerate() {
            let _ = writeln!(out, "{party} {i} {:?} {:?}", m.phi(), m.nu());
        }
    }
    out
}

/// `key = value` pairs in file order.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = strip_comment(raw);
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::format(i + 1, "expected 'key = value'"));
        };
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(Error::format(i + 1, format!("bad key '{key}'")));
        }
        out.push((key.to_string(), value.to_string()));
    }
    Ok(out)
}

pub fn read_config(path: &Path) -> Result<Vec<(String, String)>> {
    let text = read(path)?;
    parse_config(&text).map_err(|e| e.in_file(path))
}

pub(crate) fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
