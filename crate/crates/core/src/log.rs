//! Uniform-grid closed-loop logs and their CSV form.
//!
//! CSV header: `t,x0..x{n-1},xd0..xd{n-1},s,s_phi,K,u,V`. Every value is
//! written with 17 significant digits so a log survives a round trip
//! bit-for-bit.

use std::fmt::Write as _;

use crate::error::{positive, Error, Result};

/// One grid sample. Time is not stored; it is `k·dt` for row `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub state: Vec<f64>,
    pub desired: Vec<f64>,
    pub s: f64,
    pub s_phi: f64,
    pub k: f64,
    pub u: f64,
    pub v: f64,
}

impl LogRow {
    pub fn new(state: Vec<f64>, desired: Vec<f64>, s: f64, s_phi: f64, k: f64, u: f64) -> Self {
        Self {
            state,
            desired,
            s,
            s_phi,
            k,
            u,
            v: 0.5 * s_phi * s_phi,
        }
    }

    /// `x̃ = x − x_d`.
    pub fn error(&self) -> Vec<f64> {
        self.state
            .iter()
            .zip(&self.desired)
            .map(|(x, d)| x - d)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    dt: f64,
    order_n: usize,
    rows: Vec<LogRow>,
}

impl TrajectoryLog {
    pub fn new(order_n: usize, dt: f64) -> Result<Self> {
        Ok(Self {
            dt: positive("dt", dt)?,
            order_n,
            rows: Vec::new(),
        })
    }

    pub(crate) fn with_capacity(order_n: usize, dt: f64, cap: usize) -> Result<Self> {
        let mut log = Self::new(order_n, dt)?;
        log.rows.reserve(cap);
        Ok(log)
    }

    pub fn push(&mut self, row: LogRow) -> Result<()> {
        crate::error::check_len(self.order_n, row.state.len())?;
        crate::error::check_len(self.order_n, row.desired.len())?;
        self.rows.push(row);
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn order(&self) -> usize {
        self.order_n
    }

    pub fn rows(&self) -> &[LogRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.rows.len().saturating_sub(1))
    }

    pub fn header(&self) -> String {
        let n = self.order_n;
        let mut h = String::from("t");
        for i in 0..n {
            let _ = write!(h, ",x{i}");
        }
        for i in 0..n {
            let _ = write!(h, ",xd{i}");
        }
        h.push_str(",s,s_phi,K,u,V");
        h
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.rows.len() * (self.order_n * 2 + 6) * 24);
        out.push_str(&self.header());
        out.push('\n');
        for (k, row) in self.rows.iter().enumerate() {
            push_num(&mut out, self.time(k));
            for v in row.state.iter().chain(&row.desired) {
                out.push(',');
                push_num(&mut out, *v);
            }
            for v in [row.s, row.s_phi, row.k, row.u, row.v] {
                out.push(',');
                push_num(&mut out, v);
            }
            out.push('\n');
        }
        out
    }

    /// Parses a log written by [`to_csv`](Self::to_csv). At least two rows
    /// are needed to recover `dt`; the grid must be uniform and `V` must
    /// equal `s_phi²/2`.
    pub fn from_csv(data: &[u8]) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(false)
            .from_reader(data);
        let header = rdr.headers().map_err(|e| csv_err(1, e))?.clone();
        let cols: Vec<&str> = header.iter().collect();
        let order_n = parse_header(&cols)?;
        let width = 2 * order_n + 6;

        let mut times = Vec::new();
        let mut rows = Vec::new();
        for (idx, rec) in rdr.records().enumerate() {
            let line = idx + 2;
            let rec = rec.map_err(|e| csv_err(line, e))?;
            if rec.len() != width {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected {width} fields, found {}", rec.len()),
                });
            }
            let mut vals = Vec::with_capacity(width);
            for (col, field) in rec.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                    line,
                    msg: format!("column `{}`: `{field}` is not a number", cols[col]),
                })?;
                vals.push(v);
            }
            times.push(vals[0]);
            let n = order_n;
            let row = LogRow {
                state: vals[1..1 + n].to_vec(),
                desired: vals[1 + n..1 + 2 * n].to_vec(),
                s: vals[1 + 2 * n],
                s_phi: vals[2 + 2 * n],
                k: vals[3 + 2 * n],
                u: vals[4 + 2 * n],
                v: vals[5 + 2 * n],
            };
            let expect_v = 0.5 * row.s_phi * row.s_phi;
            if !(row.v - expect_v)
                .abs()
                .le(&(1e-12 * (1.0 + expect_v.abs())))
            {
                return Err(Error::Parse {
                    line,
                    msg: format!("V = {} does not equal s_phi^2/2 = {expect_v}", row.v),
                });
            }
            rows.push(row);
        }

        if rows.len() < 2 {
            return Err(Error::Parse {
                line: rows.len() + 1,
                msg: "a log needs at least two rows to fix the time step".into(),
            });
        }
        let dt = times[1];
        if !(dt.is_finite() && dt > 0.0) || times[0] != 0.0 {
            return Err(Error::Parse {
                line: 2,
                msg: "time column must start at 0 with a positive step".into(),
            });
        }
        for (k, t) in times.iter().enumerate() {
            let want = k as f64 * dt;
            if (t - want).abs() > 1e-9 * want.abs().max(1.0) {
                return Err(Error::Parse {
                    line: k + 2,
                    msg: format!("non-uniform time grid: t = {t}, expected {want}"),
                });
            }
        }
        Ok(Self { dt, order_n, rows })
    }
}

fn push_num(out: &mut String, v: f64) {
    let _ = write!(out, "{v:.16e}");
}

fn csv_err(line: usize, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(line);
    Error::Parse {
        line,
        msg: format!("malformed CSV: {e}"),
    }
}

fn parse_header(cols: &[&str]) -> Result<usize> {
    let bad = |msg: String| Error::Parse { line: 1, msg };
    if cols.len() < 8 || !(cols.len() - 6).is_multiple_of(2) {
        return Err(bad(format!(
            "unexpected header with {} columns",
            cols.len()
        )));
    }
    let n = (cols.len() - 6) / 2;
    let mut expected = vec!["t".to_string()];
    expected.extend((0..n).map(|i| format!("x{i}")));
    expected.extend((0..n).map(|i| format!("xd{i}")));
    expected.extend(["s", "s_phi", "K", "u", "V"].map(String::from));
    for (got, want) in cols.iter().zip(&expected) {
        if got.trim() != want {
            return Err(bad(format!("header column `{got}` should be `{want}`")));
        }
    }
    Ok(n)
}
