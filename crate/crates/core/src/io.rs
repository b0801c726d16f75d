//! JSON formats for channels and codes, and lossless float formatting.

use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter};

use crate::channel::KrausChannel;
use crate::error::{Error, Result};
use crate::linalg::{c, CMat};
use crate::recovery::CodeSpec;

/// 17 significant digits in scientific notation; round-trips any finite
/// double. Non-finite values print as `NaN`, `inf` or `-inf`.
pub fn format_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// JSON formatter that writes every float with [`format_f64`].
pub struct LosslessFormatter<F = CompactFormatter>(pub F);

impl<F: Formatter> Formatter for LosslessFormatter<F> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn end_object_key<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_key(w)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Compact JSON with lossless floats.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, LosslessFormatter(CompactFormatter));
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

/// Indented JSON with lossless floats.
pub fn to_json_string_pretty<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, LosslessFormatter(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

type ComplexRows = Vec<Vec<[f64; 2]>>;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelFile {
    d_in: usize,
    d_out: usize,
    kraus: Vec<ComplexRows>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CodeFile {
    n: usize,
    d: usize,
    #[serde(rename = "d_T")]
    d_t: usize,
    #[serde(rename = "d_C")]
    d_c: usize,
    encoder: ComplexRows,
}

fn rows_to_matrix(rows: &ComplexRows, nrows: usize, ncols: usize, what: &str) -> Result<CMat> {
    if rows.len() != nrows {
        return Err(Error::Shape(format!(
            "{what} has {} rows, expected {nrows}",
            rows.len()
        )));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            return Err(Error::Shape(format!(
                "{what} row {i} has {} entries, expected {ncols}",
                row.len()
            )));
        }
    }
    Ok(CMat::from_fn(nrows, ncols, |i, j| {
        let [re, im] = rows[i][j];
        c(re, im)
    }))
}

fn matrix_to_rows(m: &CMat) -> ComplexRows {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

/// Parses and validates a channel; trace preservation is checked at 1e-9.
pub fn channel_from_json(text: &str) -> Result<KrausChannel> {
    let file: ChannelFile = serde_json::from_str(text)?;
    let kraus = file
        .kraus
        .iter()
        .enumerate()
        .map(|(i, rows)| rows_to_matrix(rows, file.d_out, file.d_in, &format!("Kraus operator {i}")))
        .collect::<Result<Vec<_>>>()?;
    KrausChannel::new(file.d_in, file.d_out, kraus)
}

pub fn channel_to_json(ch: &KrausChannel) -> Result<String> {
    let file = ChannelFile {
        d_in: ch.d_in(),
        d_out: ch.d_out(),
        kraus: ch.kraus().iter().map(matrix_to_rows).collect(),
    };
    to_json_string(&file)
}

pub fn read_channel(path: &Path) -> Result<KrausChannel> {
    channel_from_json(&std::fs::read_to_string(path)?)
}

pub fn code_from_json(text: &str) -> Result<CodeSpec> {
    let file: CodeFile = serde_json::from_str(text)?;
    let rows = file
        .d
        .checked_pow(file.n as u32)
        .and_then(|v| v.checked_mul(file.d_t))
        .ok_or_else(|| Error::Parameter("code dimensions overflow".into()))?;
    let encoder = rows_to_matrix(&file.encoder, rows, file.d_c, "encoder")?;
    CodeSpec::new(file.n, file.d, file.d_t, encoder)
}

pub fn code_to_json(code: &CodeSpec) -> Result<String> {
    let file = CodeFile {
        n: code.n,
        d: code.d,
        d_t: code.d_t,
        d_c: code.d_c,
        encoder: matrix_to_rows(&code.encoder),
    };
    to_json_string(&file)
}
