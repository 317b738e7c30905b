//! `history.csv` and `prices.csv`.
//!
//! ```text
//! day,weekday,vehicle,period,alpha,xi_kwh
//! day,period,eur_per_kwh
//! ```
//!
//! `weekday` is 0 (Monday) to 6, `vehicle` and `period` are 1-based and
//! `alpha` is 0 or 1. Rows are written sorted by day, vehicle and period;
//! any order is accepted on input as long as every (day, vehicle, period)
//! cell appears exactly once. Numbers are written in their shortest
//! round-trip form, so save followed by load is lossless.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::fleet::{DayRecord, PriceSeries, Weekday};
use crate::{Error, Result};

pub const HISTORY_HEADER: [&str; 6] = ["day", "weekday", "vehicle", "period", "alpha", "xi_kwh"];
pub const PRICES_HEADER: [&str; 3] = ["day", "period", "eur_per_kwh"];

fn csv_error(label: &str, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => Error::Parse { path: label.to_string(), line, message: format!("{kind:?}") },
    }
}

pub fn write_history(records: &[DayRecord], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| csv_error("history", e);
    w.write_record(HISTORY_HEADER).map_err(io)?;
    for day in records {
        for (v, (alpha, xi)) in day.realized_alpha.iter().zip(&day.realized_xi_kwh).enumerate() {
            for (t, (&a, &x)) in alpha.iter().zip(xi).enumerate() {
                w.write_record([
                    day.date_index.to_string(),
                    day.weekday.index().to_string(),
                    (v + 1).to_string(),
                    (t + 1).to_string(),
                    u8::from(a).to_string(),
                    x.to_string(),
                ])
                .map_err(io)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_prices(records: &[DayRecord], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| csv_error("prices", e);
    w.write_record(PRICES_HEADER).map_err(io)?;
    for day in records {
        for (t, p) in day.prices.eur_per_kwh.iter().enumerate() {
            w.write_record([day.date_index.to_string(), (t + 1).to_string(), p.to_string()]).map_err(io)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_history_csv(records: &[DayRecord], history: impl AsRef<Path>, prices: impl AsRef<Path>) -> Result<()> {
    let mut h = BufWriter::new(File::create(history)?);
    write_history(records, &mut h)?;
    h.flush()?;
    let mut p = BufWriter::new(File::create(prices)?);
    write_prices(records, &mut p)?;
    p.flush()?;
    Ok(())
}

pub fn load_history_csv(history: impl AsRef<Path>, prices: impl AsRef<Path>) -> Result<Vec<DayRecord>> {
    let (h, p) = (history.as_ref(), prices.as_ref());
    read_history(
        File::open(h)?,
        &h.display().to_string(),
        File::open(p)?,
        &p.display().to_string(),
    )
}

struct Rows<R: Read> {
    reader: csv::Reader<R>,
    label: String,
}

impl<R: Read> Rows<R> {
    fn open(input: R, label: &str, header: &[&str]) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let found = reader.headers().map_err(|e| csv_error(label, e))?.clone();
        if found.iter().ne(header.iter().copied()) {
            return Err(Error::Schema(format!(
                "{label}: header is `{}`, expected `{}`",
                found.iter().collect::<Vec<_>>().join(","),
                header.join(",")
            )));
        }
        Ok(Rows { reader, label: label.to_string() })
    }

    fn for_each(&mut self, mut f: impl FnMut(&csv::StringRecord, &Ctx) -> Result<()>) -> Result<()> {
        let mut record = csv::StringRecord::new();
        loop {
            let more = self.reader.read_record(&mut record).map_err(|e| csv_error(&self.label, e))?;
            if !more {
                return Ok(());
            }
            let line = record.position().map_or(0, |p| p.line() as usize);
            f(&record, &Ctx { label: &self.label, line })?;
        }
    }
}

struct Ctx<'a> {
    label: &'a str,
    line: usize,
}

impl Ctx<'_> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse { path: self.label.to_string(), line: self.line, message: message.into() }
    }

    fn field<T: std::str::FromStr>(&self, record: &csv::StringRecord, i: usize, name: &str) -> Result<T> {
        let raw = record.get(i).ok_or_else(|| self.err(format!("missing field `{name}`")))?;
        raw.trim().parse().map_err(|_| self.err(format!("bad {name} `{raw}`")))
    }

    fn index(&self, record: &csv::StringRecord, i: usize, name: &str) -> Result<usize> {
        let v: usize = self.field(record, i, name)?;
        if v == 0 {
            return Err(self.err(format!("{name} indices start at 1")));
        }
        Ok(v - 1)
    }
}

#[derive(Default)]
struct DayCells {
    weekday: Option<Weekday>,
    cells: BTreeMap<(usize, usize), (bool, f64)>,
    prices: BTreeMap<usize, f64>,
}

/// Parses both files and assembles complete days. `*_label` names the
/// inputs in error messages.
pub fn read_history(history: impl Read, history_label: &str, prices: impl Read, prices_label: &str) -> Result<Vec<DayRecord>> {
    let mut days: BTreeMap<i64, DayCells> = BTreeMap::new();
    let mut rows = Rows::open(history, history_label, &HISTORY_HEADER)?;
    rows.for_each(|r, ctx| {
        if r.len() != HISTORY_HEADER.len() {
            return Err(ctx.err(format!("expected {} fields, found {}", HISTORY_HEADER.len(), r.len())));
        }
        let day: i64 = ctx.field(r, 0, "day")?;
        let wd: usize = ctx.field(r, 1, "weekday")?;
        let weekday = Weekday::from_index(wd).ok_or_else(|| ctx.err(format!("weekday {wd} outside 0..=6")))?;
        let v = ctx.index(r, 2, "vehicle")?;
        let t = ctx.index(r, 3, "period")?;
        let alpha = match ctx.field::<u8>(r, 4, "alpha")? {
            0 => false,
            1 => true,
            a => return Err(ctx.err(format!("alpha must be 0 or 1, found {a}"))),
        };
        let xi: f64 = ctx.field(r, 5, "xi_kwh")?;
        if !(xi.is_finite() && xi >= 0.0) {
            return Err(ctx.err(format!("xi_kwh must be finite and nonnegative, found {xi}")));
        }
        if alpha && xi > 0.0 {
            return Err(ctx.err("vehicle consumes energy while marked available"));
        }
        let entry = days.entry(day).or_default();
        match entry.weekday {
            Some(w) if w != weekday => return Err(ctx.err(format!("day {day} listed as weekday {} and {wd}", w.index()))),
            _ => entry.weekday = Some(weekday),
        }
        if entry.cells.insert((v, t), (alpha, xi)).is_some() {
            return Err(ctx.err(format!("duplicate cell day {day} vehicle {} period {}", v + 1, t + 1)));
        }
        Ok(())
    })?;

    let mut rows = Rows::open(prices, prices_label, &PRICES_HEADER)?;
    rows.for_each(|r, ctx| {
        if r.len() != PRICES_HEADER.len() {
            return Err(ctx.err(format!("expected {} fields, found {}", PRICES_HEADER.len(), r.len())));
        }
        let day: i64 = ctx.field(r, 0, "day")?;
        let t = ctx.index(r, 1, "period")?;
        let p: f64 = ctx.field(r, 2, "eur_per_kwh")?;
        if !p.is_finite() {
            return Err(ctx.err("price must be finite"));
        }
        let entry = days.get_mut(&day).ok_or_else(|| ctx.err(format!("price for day {day} which has no history")))?;
        if entry.prices.insert(t, p).is_some() {
            return Err(ctx.err(format!("duplicate price day {day} period {}", t + 1)));
        }
        Ok(())
    })?;

    let n_vehicles = days.values().flat_map(|d| d.cells.keys().map(|k| k.0 + 1)).max().unwrap_or(0);
    let n_periods = days.values().flat_map(|d| d.cells.keys().map(|k| k.1 + 1)).max().unwrap_or(0);
    let mut out = Vec::with_capacity(days.len());
    for (day, cells) in days {
        if cells.cells.len() != n_vehicles * n_periods {
            return Err(Error::Schema(format!(
                "day {day} has {} cells, expected {n_vehicles} vehicles x {n_periods} periods",
                cells.cells.len()
            )));
        }
        if cells.prices.len() != n_periods || cells.prices.keys().last() != Some(&(n_periods - 1)) {
            return Err(Error::Schema(format!("day {day} has {} prices, expected {n_periods}", cells.prices.len())));
        }
        let mut alpha = vec![vec![false; n_periods]; n_vehicles];
        let mut xi = vec![vec![0.0; n_periods]; n_vehicles];
        for ((v, t), (a, x)) in cells.cells {
            alpha[v][t] = a;
            xi[v][t] = x;
        }
        out.push(DayRecord {
            date_index: day,
            weekday: cells.weekday.expect("a day exists only through a history row"),
            realized_alpha: alpha,
            realized_xi_kwh: xi,
            prices: PriceSeries::new(cells.prices.into_values().collect()),
        });
    }
    Ok(out)
}
