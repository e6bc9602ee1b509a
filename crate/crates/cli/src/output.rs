//! JSON and CSV emission. Floats are written with 17 significant digits so
//! every `f64` survives a write/read cycle bit for bit.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter, Serializer};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    command: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

/// Compact JSON with `{:.16e}` floats. Non-finite values become `null`
/// before they reach the formatter.
struct FullPrecision(CompactFormatter);

impl Formatter for FullPrecision {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{}", float(value))
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn open(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

pub fn to_json_string<T: Serialize>(command: &str, body: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = Serializer::with_formatter(&mut buf, FullPrecision(CompactFormatter));
    Envelope { schema_version: SCHEMA_VERSION, command, body }.serialize(&mut ser)?;
    Ok(String::from_utf8(buf)?)
}

pub fn emit_json<T: Serialize>(path: Option<&Path>, command: &str, body: &T) -> Result<()> {
    let mut out = open(path)?;
    writeln!(out, "{}", to_json_string(command, body)?)?;
    out.flush()?;
    Ok(())
}
