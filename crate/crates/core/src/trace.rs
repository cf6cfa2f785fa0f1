//! Per-iteration sampler output and its CSV form.
//!
//! One row per iteration with columns
//! `iteration,k_star,z,components,occupancy,accepted,theta`. List-valued
//! cells are `;`-joined: `z` holds the 1-based label of every network,
//! `components` the occupied labels, `occupancy` and `accepted` one entry per
//! occupied label (`-` when no parameter move was attempted), and `theta`
//! the parameters of the occupied components concatenated in label order.
//! Reals are written with 17 significant digits.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::Theta;

/// Formats a float with 17 significant digits (exact round trip).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentRecord {
    pub label: usize,
    pub theta: Theta,
    pub occupancy: usize,
    /// Outcome of this iteration's parameter move; `None` if none was made.
    pub accepted: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub k_star: usize,
    pub z: Vec<usize>,
    /// Occupied components in increasing label order.
    pub components: Vec<ComponentRecord>,
}

impl TraceRecord {
    pub fn component(&self, label: usize) -> Option<&ComponentRecord> {
        self.components.iter().find(|c| c.label == label)
    }

    pub fn occupied(&self) -> usize {
        self.components.len()
    }
}

fn join<T, F: Fn(&T) -> String>(items: &[T], f: F) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(";")
}

pub const TRACE_HEADER: [&str; 7] = [
    "iteration",
    "k_star",
    "z",
    "components",
    "occupancy",
    "accepted",
    "theta",
];

pub fn write_trace_csv<W: Write>(out: W, trace: &[TraceRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for rec in trace {
        w.write_record(trace_row(rec))?;
    }
    w.flush().map_err(|e| Error::io("<trace csv>", e))?;
    Ok(())
}

fn trace_row(rec: &TraceRecord) -> [String; 7] {
    let thetas: Vec<f64> = rec.components.iter().flat_map(|c| c.theta.iter().copied()).collect();
    [
        rec.iteration.to_string(),
        rec.k_star.to_string(),
        join(&rec.z, |z| z.to_string()),
        join(&rec.components, |c| c.label.to_string()),
        join(&rec.components, |c| c.occupancy.to_string()),
        join(&rec.components, |c| match c.accepted {
            Some(true) => "1".into(),
            Some(false) => "0".into(),
            None => "-".into(),
        }),
        join(&thetas, |t| fmt_f64(*t)),
    ]
}

/// Incremental trace writer for long runs.
pub struct TraceWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(out: W) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(out);
        inner.write_record(TRACE_HEADER)?;
        Ok(TraceWriter { inner })
    }

    pub fn write(&mut self, rec: &TraceRecord) -> Result<()> {
        self.inner.write_record(trace_row(rec))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush().map_err(|e| Error::io("<trace csv>", e))
    }
}

fn split<T, F: Fn(&str) -> Option<T>>(cell: &str, f: F, what: &str, line: usize) -> Result<Vec<T>> {
    if cell.is_empty() {
        return Ok(Vec::new());
    }
    cell.split(';')
        .map(|s| f(s).ok_or_else(|| Error::parse("<trace csv>", line, format!("bad {what} entry `{s}`"))))
        .collect()
}

pub fn read_trace_csv<R: Read>(input: R) -> Result<Vec<TraceRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(TRACE_HEADER.iter().copied()) {
        return Err(Error::parse("<trace csv>", 1, "unexpected trace header"));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let num = |k: usize| -> Result<usize> {
            rec[k]
                .parse()
                .map_err(|_| Error::parse("<trace csv>", line, format!("bad integer `{}`", &rec[k])))
        };
        let labels = split(&rec[3], |s| s.parse().ok(), "component", line)?;
        let occupancy = split(&rec[4], |s| s.parse().ok(), "occupancy", line)?;
        let accepted = split(
            &rec[5],
            |s| match s {
                "1" => Some(Some(true)),
                "0" => Some(Some(false)),
                "-" => Some(None),
                _ => None,
            },
            "accepted",
            line,
        )?;
        let thetas: Vec<f64> = split(&rec[6], |s| s.parse().ok(), "theta", line)?;
        let k = labels.len();
        if occupancy.len() != k || accepted.len() != k || (k > 0 && thetas.len() % k != 0) {
            return Err(Error::parse(
                "<trace csv>",
                line,
                "component columns disagree in length",
            ));
        }
        let d = if k == 0 { 0 } else { thetas.len() / k };
        let components = (0..k)
            .map(|c| ComponentRecord {
                label: labels[c],
                theta: thetas[c * d..(c + 1) * d].to_vec(),
                occupancy: occupancy[c],
                accepted: accepted[c],
            })
            .collect();
        out.push(TraceRecord {
            iteration: num(0)?,
            k_star: num(1)?,
            z: split(&rec[2], |s| s.parse().ok(), "z", line)?,
            components,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record() -> impl Strategy<Value = TraceRecord> {
        (0usize..1000, 1usize..4, prop::collection::vec(1usize..4, 1..8))
            .prop_flat_map(|(it, d, z)| {
                let mut labels = z.clone();
                labels.sort();
                labels.dedup();
                let k = labels.len();
                (
                    Just(it),
                    Just(z),
                    Just(labels),
                    prop::collection::vec(
                        prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), d),
                        k,
                    ),
                    prop::collection::vec(prop::option::of(any::<bool>()), k),
                )
            })
            .prop_map(|(it, z, labels, thetas, acc)| {
                let components = labels
                    .iter()
                    .zip(thetas)
                    .zip(acc)
                    .map(|((&label, theta), accepted)| ComponentRecord {
                        label,
                        theta,
                        occupancy: z.iter().filter(|&&x| x == label).count(),
                        accepted,
                    })
                    .collect();
                TraceRecord {
                    iteration: it,
                    k_star: *labels.last().unwrap(),
                    z,
                    components,
                }
            })
    }

    proptest! {
        #[test]
        fn csv_round_trip(trace in prop::collection::vec(record(), 0..5)) {
            let mut buf = Vec::new();
            write_trace_csv(&mut buf, &trace).unwrap();
            prop_assert_eq!(read_trace_csv(&buf[..]).unwrap(), trace);
        }
    }

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-3.0).parse::<f64>().unwrap(), -3.0);
    }
}
