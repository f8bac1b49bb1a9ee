//! CSV tables and versioned JSON sidecars. Floats are written with 17
//! significant digits so identical runs give identical bytes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::estimates::{DecayReport, MixedNorm};
use crate::field::WaveField;
use crate::scattering::{BoundStateSet, ScatteringData};

pub const SCHEMA_VERSION: u32 = 1;

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.17e}")
}

#[derive(Serialize)]
struct Sidecar<'a, T: Serialize> {
    schema_version: u32,
    kind: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

/// Pretty JSON with `schema_version` and `kind` ahead of the body's fields.
pub fn write_sidecar<T: Serialize>(path: &Path, kind: &str, body: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &Sidecar { schema_version: SCHEMA_VERSION, kind, body })?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn write_table<W: Write>(w: W, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(header)?;
    for r in rows {
        wr.write_record(&r)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_table_file(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    write_table(BufWriter::new(File::create(path)?), header, rows)
}

pub fn write_field_file(path: &Path, field: &WaveField) -> Result<()> {
    field.write_csv(BufWriter::new(File::create(path)?))
}

/// `k,re_s,im_s,abs_s,re_jost0,im_jost0`.
pub fn scattering_rows(scat: &ScatteringData) -> Vec<Vec<String>> {
    scat.k
        .iter()
        .zip(&scat.s_values)
        .zip(&scat.jost_zero)
        .map(|((&k, s), f)| vec![fmt_f64(k), fmt_f64(s.re), fmt_f64(s.im), fmt_f64(s.norm()), fmt_f64(f.re), fmt_f64(f.im)])
        .collect()
}

pub const SCATTERING_HEADER: [&str; 6] = ["k", "re_s", "im_s", "abs_s", "re_jost0", "im_jost0"];

/// `index,kappa,energy`.
pub fn bound_state_rows(bs: &BoundStateSet) -> Vec<Vec<String>> {
    bs.kappas.iter().zip(&bs.energies).enumerate().map(|(j, (&k, &e))| vec![j.to_string(), fmt_f64(k), fmt_f64(e)]).collect()
}

pub const BOUND_STATE_HEADER: [&str; 3] = ["index", "kappa", "energy"];

/// `potential,p,projected,t,norm,sobolev_norm`; the last column is empty
/// without the Sobolev variant.
pub fn decay_rows(reports: &[DecayReport]) -> Vec<Vec<String>> {
    reports
        .iter()
        .flat_map(|r| {
            r.times.iter().zip(&r.norms).enumerate().map(move |(i, (&t, &n))| {
                let sob = r.sobolev.as_ref().map(|s| fmt_f64(s.norms[i])).unwrap_or_default();
                vec![r.potential_id.clone(), fmt_f64(r.p), r.projected.to_string(), fmt_f64(t), fmt_f64(n), sob]
            })
        })
        .collect()
}

pub const DECAY_HEADER: [&str; 6] = ["potential", "p", "projected", "t", "norm", "sobolev_norm"];

/// One mixed norm of a trajectory over `[0, t_end]`.
#[derive(Clone, Debug, Serialize)]
pub struct StrichartzRow {
    pub quantity: String,
    pub inv_p: f64,
    pub inv_r: f64,
    pub t_end: f64,
    pub norm: MixedNorm,
    pub ratio: f64,
}

/// `quantity,inv_p,inv_r,t_end,value,ratio,samples`.
pub fn strichartz_rows(rows: &[StrichartzRow]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            vec![r.quantity.clone(), fmt_f64(r.inv_p), fmt_f64(r.inv_r), fmt_f64(r.t_end), fmt_f64(r.norm.value), fmt_f64(r.ratio), r.norm.samples.to_string()]
        })
        .collect()
}

pub const STRICHARTZ_HEADER: [&str; 7] = ["quantity", "inv_p", "inv_r", "t_end", "value", "ratio", "samples"];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidecar_carries_schema_version_first() {
        #[derive(Serialize)]
        struct Body {
            a: f64,
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.json");
        write_sidecar(&path, "test", &Body { a: 0.5 }).unwrap();
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(v["schema_version"], SCHEMA_VERSION);
        assert_eq!(v["kind"], "test");
        assert_eq!(v["a"], 0.5);
    }

    #[test]
    fn floats_round_trip_exactly() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }
}
