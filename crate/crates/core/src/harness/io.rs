use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use tempfile::NamedTempFile;

use crate::error::{Error, Result};
use crate::operators::SparseCsr;

use super::experiments::{ExperimentRow, ExperimentTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
    SkewSymmetric,
}

/// Read a coordinate-format, real or integer Matrix Market file. Symmetric
/// and skew-symmetric storage is expanded to the full pattern.
pub fn read_matrix_market(path: &Path) -> Result<SparseCsr> {
    let file = File::open(path)?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let parse_err = |line: usize, message: String| Error::Parse { path: path.to_path_buf(), line: line + 1, message };

    let (lno, header) = match lines.next() {
        Some((i, l)) => (i, l?),
        None => return Err(parse_err(0, "empty file".into())),
    };
    let fields: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if fields.len() != 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(parse_err(lno, "missing `%%MatrixMarket matrix` header".into()));
    }
    if fields[2] != "coordinate" {
        return Err(Error::UnsupportedFormat(format!("{} storage", fields[2])));
    }
    if fields[3] != "real" && fields[3] != "integer" {
        return Err(Error::UnsupportedFormat(format!("{} field", fields[3])));
    }
    let symmetry = match fields[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::SkewSymmetric,
        other => return Err(Error::UnsupportedFormat(format!("{other} symmetry"))),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    let mut entries = 0usize;
    for (i, line) in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let tok: Vec<&str> = t.split_whitespace().collect();
        match size {
            None => {
                let nums: std::result::Result<Vec<usize>, _> = tok.iter().map(|s| s.parse()).collect();
                match nums.as_deref() {
                    Ok([r, c, nnz]) => {
                        size = Some((*r, *c, *nnz));
                        triplets.reserve(*nnz * if symmetry == Symmetry::General { 1 } else { 2 });
                    }
                    _ => return Err(parse_err(i, format!("expected `rows cols nnz`, found `{t}`"))),
                }
            }
            Some((rows, cols, _)) => {
                if tok.len() != 3 {
                    return Err(parse_err(i, format!("expected `row col value`, found `{t}`")));
                }
                let r: usize = tok[0].parse().map_err(|_| parse_err(i, format!("bad row index `{}`", tok[0])))?;
                let c: usize = tok[1].parse().map_err(|_| parse_err(i, format!("bad column index `{}`", tok[1])))?;
                let v: f64 = tok[2].parse().map_err(|_| parse_err(i, format!("bad value `{}`", tok[2])))?;
                if r == 0 || c == 0 || r > rows || c > cols {
                    return Err(parse_err(i, format!("index ({r}, {c}) outside {rows}x{cols}")));
                }
                if !v.is_finite() {
                    return Err(parse_err(i, "value is not finite".into()));
                }
                let (r, c) = (r - 1, c - 1);
                entries += 1;
                triplets.push((r, c, v));
                if r != c {
                    match symmetry {
                        Symmetry::General => {}
                        Symmetry::Symmetric => triplets.push((c, r, v)),
                        Symmetry::SkewSymmetric => triplets.push((c, r, -v)),
                    }
                }
            }
        }
    }
    let (rows, cols, nnz) = size.ok_or_else(|| parse_err(lno, "missing size line".into()))?;
    if entries != nnz {
        return Err(parse_err(lno, format!("header promises {nnz} entries, file has {entries}")));
    }
    SparseCsr::from_triplets(rows, cols, triplets)
}

/// `%.6g`: six significant digits, trailing zeros trimmed.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: String| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    };
    if (-4..6).contains(&exp) {
        trim(format!("{x:.*}", (5 - exp).max(0) as usize))
    } else {
        let m = trim(mantissa.to_string());
        format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

pub const CSV_HEADER: [&str; 8] = ["matrix", "distribution", "k", "theta", "upper_fail", "lower_fail", "trials", "seed"];

/// Write the table sorted by key. The file appears only once complete.
pub fn write_csv(table: &ExperimentTable, path: &Path) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir)?;
    write_csv_to(table, &mut tmp)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn write_csv_to<W: Write>(table: &ExperimentTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in table.sorted().rows() {
        w.write_record([
            r.matrix.clone(),
            r.distribution.tag().to_string(),
            r.k.to_string(),
            format_sig6(r.theta),
            format_sig6(r.upper_fail),
            format_sig6(r.lower_fail),
            r.trials.to_string(),
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<ExperimentTable> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(CSV_HEADER) {
        return Err(Error::Parse { path: path.to_path_buf(), line: 1, message: "unexpected header".into() });
    }
    let mut table = ExperimentTable::default();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| Error::Parse { path: path.to_path_buf(), line: i + 2, message: format!("bad {what}") };
        let num = |j: usize, what: &str| rec[j].parse::<f64>().map_err(|_| bad(what));
        table.push(ExperimentRow {
            matrix: rec[0].to_string(),
            distribution: rec[1].parse().map_err(|_| bad("distribution"))?,
            k: rec[2].parse().map_err(|_| bad("k"))?,
            theta: num(3, "theta")?,
            upper_fail: num(4, "upper_fail")?,
            lower_fail: num(5, "lower_fail")?,
            trials: rec[6].parse().map_err(|_| bad("trials"))?,
            seed: rec[7].parse().map_err(|_| bad("seed"))?,
        });
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probes::Distribution;

    fn mtx(body: &str) -> NamedTempFile {
        let mut f = NamedTempFile::new().unwrap();
        f.write_all(body.as_bytes()).unwrap();
        f
    }

    #[test]
    fn reads_identity() {
        let f = mtx("%%MatrixMarket matrix coordinate real general\n% comment\n2 2 2\n1 1 1.0\n2 2 1.0\n");
        let a = read_matrix_market(f.path()).unwrap();
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.to_dense(), crate::linalg::DenseMatrix::identity(2));
    }

    #[test]
    fn expands_symmetric_storage() {
        let f = mtx("%%MatrixMarket matrix coordinate real symmetric\n3 3 4\n1 1 2\n2 1 -1\n3 2 -1\n3 3 2\n");
        let a = read_matrix_market(f.path()).unwrap();
        assert_eq!(a.nnz(), 6);
        assert!(a.is_symmetric());
        assert_eq!(a.get(0, 1), -1.0);
        let s = mtx("%%MatrixMarket matrix coordinate integer skew-symmetric\n2 2 1\n2 1 3\n");
        let b = read_matrix_market(s.path()).unwrap();
        assert_eq!((b.get(1, 0), b.get(0, 1)), (3.0, -3.0));
    }

    #[test]
    fn rejects_unsupported_and_malformed() {
        for header in ["pattern general", "complex general"] {
            let f = mtx(&format!("%%MatrixMarket matrix coordinate {header}\n1 1 1\n1 1\n"));
            assert!(matches!(read_matrix_market(f.path()), Err(Error::UnsupportedFormat(_))));
        }
        let f = mtx("%%MatrixMarket matrix array real general\n1 1\n1.0\n");
        assert!(matches!(read_matrix_market(f.path()), Err(Error::UnsupportedFormat(_))));
        let f = mtx("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n3 1 1.0\n");
        assert!(matches!(read_matrix_market(f.path()), Err(Error::Parse { line: 4, .. })));
        let f = mtx("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 x\n");
        assert!(matches!(read_matrix_market(f.path()), Err(Error::Parse { line: 3, .. })));
        let f = mtx("not a header\n");
        assert!(matches!(read_matrix_market(f.path()), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn sig6_matches_printf_g() {
        let cases = [
            (0.0033, "0.0033"),
            (8.0, "8"),
            (1.2, "1.2"),
            (2500.0, "2500"),
            (0.12345678, "0.123457"),
            (1e-7, "1e-07"),
            (123456789.0, "1.23457e+08"),
            (999999.5, "1e+06"),
            (0.0001, "0.0001"),
            (0.00001234, "1.234e-05"),
            (-3.5, "-3.5"),
        ];
        for (x, s) in cases {
            assert_eq!(format_sig6(x), s, "{x}");
        }
    }

    fn fixture() -> ExperimentTable {
        let mut t = ExperimentTable::default();
        for (m, d, k, th, u, l) in [
            ("ones", Distribution::RankOneGaussian, 5, 8.0, 0.1201, 0.0033),
            ("laplace", Distribution::RankOneRademacher, 10, 1.2, 0.0865, 0.097),
            ("ones", Distribution::Gaussian, 5, 2.0, 1.0 / 3.0, 0.0),
            ("ones", Distribution::RankOneGaussian, 1, 30.0, 0.0, 0.5),
        ] {
            t.push(ExperimentRow {
                matrix: m.into(),
                distribution: d,
                k,
                theta: th,
                upper_fail: u,
                lower_fail: l,
                trials: 10_000,
                seed: 7,
            });
        }
        t
    }

    #[test]
    fn csv_golden_fixture() {
        let mut buf = Vec::new();
        write_csv_to(&fixture(), &mut buf).unwrap();
        let golden = "matrix,distribution,k,theta,upper_fail,lower_fail,trials,seed\n\
laplace,rank1-rademacher,10,1.2,0.0865,0.097,10000,7\n\
ones,gaussian,5,2,0.333333,0,10000,7\n\
ones,rank1-gaussian,1,30,0,0.5,10000,7\n\
ones,rank1-gaussian,5,8,0.1201,0.0033,10000,7\n";
        assert_eq!(String::from_utf8(buf).unwrap(), golden);
    }

    #[test]
    fn csv_round_trip_and_empty_table() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        write_csv(&ExperimentTable::default(), &p).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), format!("{}\n", CSV_HEADER.join(",")));

        let mut one = ExperimentTable::default();
        one.push(fixture().rows()[0].clone());
        write_csv(&one, &p).unwrap();
        assert_eq!(read_csv(&p).unwrap(), one);
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
