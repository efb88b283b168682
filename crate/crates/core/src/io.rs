//! Plain-text tables for fields, screens and amplitude ensembles.
//!
//! Fields and screens are written row-major, one grid row per line,
//! whitespace separated; complex cells are `re im` pairs.

use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::modes::ComplexField;
use crate::quantum::RealizationAmplitudes;
use crate::turbulence::PhaseScreen;

pub fn write_field_table<W: Write>(f: &ComplexField, w: W) -> Result<()> {
    let mut w = BufWriter::new(w);
    let n = f.grid.n();
    for row in f.values.chunks(n) {
        let line: Vec<String> = row
            .iter()
            .map(|v| format!("{:.16e} {:.16e}", v.re, v.im))
            .collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_screen_table<W: Write>(s: &PhaseScreen, w: W) -> Result<()> {
    let mut w = BufWriter::new(w);
    for row in s.phase.chunks(s.grid.n()) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an `n × n` real table back (as written by [`write_screen_table`]).
pub fn read_real_table<R: BufRead>(r: R) -> Result<Vec<Vec<f64>>> {
    r.lines()
        .map(|line| {
            line?
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad number `{t}`"))))
                .collect()
        })
        .filter(|row: &Result<Vec<f64>>| row.as_ref().map_or(true, |v| !v.is_empty()))
        .collect()
}

pub const AMPLITUDE_HEADER: &str = "realization_index,re_a,im_a,re_b,im_b,re_c,im_c,re_d,im_d";

pub fn write_amplitudes<W: Write>(ensemble: &[RealizationAmplitudes], w: W) -> Result<()> {
    let mut w = BufWriter::new(w);
    writeln!(w, "{AMPLITUDE_HEADER}")?;
    for (i, e) in ensemble.iter().enumerate() {
        write!(w, "{i}")?;
        for v in [e.a, e.b, e.c, e.d] {
            write!(w, ",{:.16e},{:.16e}", v.re, v.im)?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_amplitudes(ensemble: &[RealizationAmplitudes], path: &Path) -> Result<()> {
    write_amplitudes(ensemble, std::fs::File::create(path)?)
}

/// Reads an amplitude CSV; rows are returned in file order.
pub fn read_amplitudes<R: BufRead>(r: R) -> Result<Vec<RealizationAmplitudes>> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("missing header".into()))??;
    if header.trim() != AMPLITUDE_HEADER {
        return Err(Error::Parse(format!("unexpected header `{header}`")));
    }
    let mut out = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<f64> = line
            .split(',')
            .skip(1)
            .map(|t| t.trim().parse().map_err(|_| Error::Parse(format!("bad number `{t}`"))))
            .collect::<Result<_>>()?;
        if cols.len() != 8 {
            return Err(Error::Parse(format!("expected 9 columns in `{line}`")));
        }
        let z = |i: usize| Complex64::new(cols[2 * i], cols[2 * i + 1]);
        out.push(RealizationAmplitudes::new(z(0), z(1), z(2), z(3)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn amplitude_csv_round_trips(raw in proptest::collection::vec(proptest::array::uniform8(-10.0f64..10.0), 0..20)) {
            let ens: Vec<_> = raw.iter().map(|c| RealizationAmplitudes::new(
                Complex64::new(c[0], c[1]), Complex64::new(c[2], c[3]),
                Complex64::new(c[4], c[5]), Complex64::new(c[6], c[7]))).collect();
            let mut buf = Vec::new();
            write_amplitudes(&ens, &mut buf).unwrap();
            let back = read_amplitudes(buf.as_slice()).unwrap();
            prop_assert_eq!(back, ens);
        }
    }

    #[test]
    fn screen_table_shape() {
        let g = make_grid(4, 1.0).unwrap();
        let s = PhaseScreen::from_fn(&g, |x, y| x + 10.0 * y);
        let mut buf = Vec::new();
        write_screen_table(&s, &mut buf).unwrap();
        let t = read_real_table(buf.as_slice()).unwrap();
        assert_eq!(t.len(), 4);
        assert!(t.iter().all(|r| r.len() == 4));
        assert_eq!(t.concat(), s.phase);
    }

    #[test]
    fn field_table_has_pairs() {
        let g = make_grid(4, 1.0).unwrap();
        let f = ComplexField::from_fn(&g, 0.0, 1e-6, Complex64::new);
        let mut buf = Vec::new();
        write_field_table(&f, &mut buf).unwrap();
        let t = read_real_table(buf.as_slice()).unwrap();
        assert_eq!(t.len(), 4);
        assert_eq!(t[1][2], f.values[5].re);
        assert_eq!(t[1][3], f.values[5].im);
    }

    #[test]
    fn bad_amplitude_header_rejected() {
        assert!(read_amplitudes("a,b\n".as_bytes()).is_err());
    }
}
