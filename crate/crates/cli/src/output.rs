//! CSV and JSON writers for series, sweep tables and boundary curves.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use nmgeo::phasediagram::SweepRow;
use num_complex::Complex64 as C64;
use serde_json::{json, Value};

pub const SERIES_HEADER: &str = "t,g,gp,Fz_re,Fz_im,beta_re,beta_im,beta_I_clamped,pole,sx,sy,sz,Nt,D,qfi";
pub const SWEEP_HEADER: &str = "gamma_w,kappa,region,t_first_divergence,N_total,error";
pub const BOUNDARY_HEADER: &str = "gamma_w,green,blue,tangency_kappa,tangency_t";

/// `x` with 17 significant digits, positional for moderate exponents and
/// scientific otherwise. Non-finite values give an empty field.
pub fn fmt17(x: f64) -> String {
    if !x.is_finite() {
        return String::new();
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0.0000000000000000".into() } else { "0.0000000000000000".into() };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if !(-5..17).contains(&exp) {
        return sci;
    }
    let (sign, digits) = match mantissa.strip_prefix('-') {
        Some(m) => ("-", m.replace('.', "")),
        None => ("", mantissa.replace('.', "")),
    };
    let point = exp + 1;
    let body = if point <= 0 {
        format!("0.{}{}", "0".repeat((-point) as usize), digits)
    } else if point as usize >= digits.len() {
        format!("{digits}{}.0", "0".repeat(point as usize - digits.len()))
    } else {
        let (int, frac) = digits.split_at(point as usize);
        format!("{int}.{frac}")
    };
    format!("{sign}{body}")
}

/// One row per time sample; columns a command does not produce stay `None`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SeriesTable {
    pub t: Vec<f64>,
    pub g: Option<Vec<f64>>,
    pub gp: Option<Vec<f64>>,
    pub f_z: Option<Vec<Option<C64>>>,
    pub beta: Option<Vec<C64>>,
    pub beta_i_clamped: Option<Vec<f64>>,
    pub pole: Option<Vec<bool>>,
    pub sx: Option<Vec<f64>>,
    pub sy: Option<Vec<f64>>,
    pub sz: Option<Vec<f64>>,
    pub n_t: Option<Vec<f64>>,
    pub d: Option<Vec<f64>>,
    pub qfi: Option<Vec<f64>>,
}

impl SeriesTable {
    pub fn new(t: Vec<f64>) -> Self {
        Self { t, ..Default::default() }
    }

    /// Column values for row `k`, in header order, `None` when absent.
    fn row(&self, k: usize) -> [Option<f64>; 15] {
        let real = |c: &Option<Vec<f64>>| c.as_ref().map(|v| v[k]);
        let fz = self.f_z.as_ref().and_then(|v| v[k]);
        let beta = self.beta.as_ref().map(|v| v[k]);
        [
            Some(self.t[k]),
            real(&self.g),
            real(&self.gp),
            fz.map(|z| z.re),
            fz.map(|z| z.im),
            beta.map(|b| b.re),
            beta.map(|b| b.im),
            real(&self.beta_i_clamped),
            self.pole.as_ref().map(|p| if p[k] { 1.0 } else { 0.0 }),
            real(&self.sx),
            real(&self.sy),
            real(&self.sz),
            real(&self.n_t),
            real(&self.d),
            real(&self.qfi),
        ]
    }

    fn check_lengths(&self) -> io::Result<()> {
        let n = self.t.len();
        let lens = [
            self.g.as_ref().map(Vec::len),
            self.gp.as_ref().map(Vec::len),
            self.f_z.as_ref().map(Vec::len),
            self.beta.as_ref().map(Vec::len),
            self.beta_i_clamped.as_ref().map(Vec::len),
            self.pole.as_ref().map(Vec::len),
            self.sx.as_ref().map(Vec::len),
            self.sy.as_ref().map(Vec::len),
            self.sz.as_ref().map(Vec::len),
            self.n_t.as_ref().map(Vec::len),
            self.d.as_ref().map(Vec::len),
            self.qfi.as_ref().map(Vec::len),
        ];
        if lens.iter().flatten().any(|&l| l != n) {
            return Err(io::Error::new(io::ErrorKind::InvalidInput, "series columns differ in length"));
        }
        if self.t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(io::Error::new(io::ErrorKind::InvalidInput, "series times must ascend"));
        }
        Ok(())
    }
}

pub fn write_series_csv(table: &SeriesTable, path: &Path) -> io::Result<()> {
    table.check_lengths()?;
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{SERIES_HEADER}")?;
    for k in 0..table.t.len() {
        let row = table.row(k);
        let fields: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(i, v)| match (i, v) {
                (8, Some(p)) => format!("{}", *p as u8),
                (_, Some(x)) => fmt17(*x),
                (_, None) => String::new(),
            })
            .collect();
        writeln!(w, "{}", fields.join(","))?;
    }
    w.flush()
}

pub fn write_series_json(table: &SeriesTable, path: &Path) -> io::Result<()> {
    table.check_lengths()?;
    let names: Vec<&str> = SERIES_HEADER.split(',').collect();
    let mut columns = serde_json::Map::new();
    for (i, name) in names.iter().enumerate() {
        let col: Vec<Option<f64>> = (0..table.t.len()).map(|k| table.row(k)[i]).collect();
        if col.iter().any(Option::is_some) {
            columns.insert((*name).to_string(), json!(col));
        }
    }
    write_json(&Value::Object(columns), path)
}

/// Parses a series CSV back into optional values, one vector per row.
pub fn read_series_csv(path: &Path) -> io::Result<Vec<Vec<Option<f64>>>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(SERIES_HEADER) {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "unexpected series header"));
    }
    lines
        .map(|line| {
            line.split(',')
                .map(|f| {
                    if f.is_empty() {
                        Ok(None)
                    } else {
                        f.parse::<f64>()
                            .map(Some)
                            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{f}: {e}")))
                    }
                })
                .collect()
        })
        .collect()
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{SWEEP_HEADER}")?;
    for r in rows {
        match &r.cell {
            Ok(c) => writeln!(
                w,
                "{},{},{},{},{},",
                r.gamma_w,
                r.kappa,
                c.region.code(),
                c.t_first_divergence.map(fmt17).unwrap_or_default(),
                fmt17(c.n_total)
            )?,
            Err(e) => writeln!(w, "{},{},ERR,,,{}", r.gamma_w, r.kappa, csv_escape(e))?,
        }
    }
    w.flush()
}

pub fn write_sweep_json(rows: &[SweepRow], path: &Path) -> io::Result<()> {
    let items: Vec<Value> = rows
        .iter()
        .map(|r| match &r.cell {
            Ok(c) => json!({
                "gamma_w": r.gamma_w,
                "kappa": r.kappa,
                "region": c.region.code(),
                "t_first_divergence": c.t_first_divergence,
                "N_total": c.n_total,
                "error": null,
            }),
            Err(e) => json!({
                "gamma_w": r.gamma_w,
                "kappa": r.kappa,
                "region": "ERR",
                "t_first_divergence": null,
                "N_total": null,
                "error": e,
            }),
        })
        .collect();
    write_json(&Value::Array(items), path)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryRow {
    pub gamma_w: f64,
    pub green: Option<f64>,
    pub blue: Option<f64>,
    pub tangency_kappa: Option<f64>,
    pub tangency_t: Option<f64>,
}

pub fn write_boundaries_csv(rows: &[BoundaryRow], path: &Path) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{BOUNDARY_HEADER}")?;
    let f = |v: Option<f64>| v.map(fmt17).unwrap_or_default();
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.gamma_w,
            f(r.green),
            f(r.blue),
            f(r.tangency_kappa),
            f(r.tangency_t)
        )?;
    }
    w.flush()
}

pub fn write_boundaries_json(rows: &[BoundaryRow], path: &Path) -> io::Result<()> {
    let items: Vec<Value> = rows
        .iter()
        .map(|r| {
            json!({
                "gamma_w": r.gamma_w,
                "green": r.green,
                "blue": r.blue,
                "tangency_kappa": r.tangency_kappa,
                "tangency_t": r.tangency_t,
            })
        })
        .collect();
    write_json(&Value::Array(items), path)
}

pub fn write_json(value: &Value, path: &Path) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()
}
