//! File emission. CSV numbers carry 12 significant digits; JSON numbers
//! are written unrounded.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::CliError;

pub const CSV_DIGITS: usize = 12;

/// `%.12g`: shortest of fixed and scientific notation, trailing zeros removed.
pub fn fmt_g(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", CSV_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-4..CSV_DIGITS as i32).contains(&exp) {
        let decimals = (CSV_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}"))
    } else {
        let m = trim_zeros(mantissa);
        format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// CSV text with a `#` comment line, a header and numeric rows.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(comment: &str, header: &[&str]) -> Self {
        let mut text = String::new();
        writeln!(text, "# {comment}").unwrap();
        writeln!(text, "{}", header.join(",")).unwrap();
        Csv { text }
    }

    pub fn row(&mut self, cells: &[String]) {
        writeln!(self.text, "{}", cells.join(",")).unwrap();
    }

    pub fn finish(self) -> String {
        self.text
    }
}

/// Files of one command, written only once everything has been computed.
#[derive(Default)]
pub struct Bundle {
    files: Vec<(PathBuf, String)>,
}

impl Bundle {
    pub fn add(&mut self, path: PathBuf, contents: String) {
        self.files.push((path, contents));
    }

    pub fn write(self) -> Result<Vec<PathBuf>, CliError> {
        let mut written = Vec::new();
        for (path, contents) in self.files {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|source| io(dir, source))?;
            }
            fs::write(&path, contents).map_err(|source| io(&path, source))?;
            written.push(path);
        }
        Ok(written)
    }
}

fn io(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn json_line<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("serializable report")
}

pub fn json_pretty<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable report");
    s.push('\n');
    s
}
