//! CSV files with a leading provenance comment.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use medcorr::model::MediationDataset;

use crate::failure::Failure;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Identifies the run that wrote a file.
#[derive(Clone, Debug)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn line(&self) -> String {
        format!(
            "# medcorr {VERSION} config={} seed={}",
            self.config_hash, self.seed
        )
    }
}

pub fn mediator_name(j: usize) -> String {
    format!("M{:04}", j + 1)
}

fn write_err(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::runtime(format!("cannot write {}: {e}", path.display()))
}

fn read_err(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::validation(format!("cannot read {}: {e}", path.display()))
}

pub fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| write_err(dir, e))
}

/// Writes a header row and string records.
pub fn write_csv<S: AsRef<str>>(
    path: &Path,
    prov: &Provenance,
    header: &[S],
    rows: &[Vec<String>],
) -> Result<(), Failure> {
    let file = File::create(path).map_err(|e| write_err(path, e))?;
    let mut buf = BufWriter::new(file);
    writeln!(buf, "{}", prov.line()).map_err(|e| write_err(path, e))?;
    let mut w = csv::Writer::from_writer(buf);
    w.write_record(header.iter().map(|s| s.as_ref()))
        .map_err(|e| write_err(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| write_err(path, e))?;
    }
    w.flush().map_err(|e| write_err(path, e))
}

/// Writes a plain text file whose first line is the provenance comment.
pub fn write_text(path: &Path, prov: &Provenance, body: &str) -> Result<(), Failure> {
    fs::write(path, format!("{}\n{body}", prov.line())).map_err(|e| write_err(path, e))
}

/// Shortest representation that parses back to the same value.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

/// A CSV file read back as strings.
#[derive(Clone, Debug)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
    path: String,
}

impl Table {
    pub fn read(path: &Path) -> Result<Table, Failure> {
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| read_err(path, e))?;
        let headers = r
            .headers()
            .map_err(|e| read_err(path, e))?
            .iter()
            .map(String::from)
            .collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| read_err(path, e))?;
            rows.push(rec.iter().map(String::from).collect());
        }
        Ok(Table {
            headers,
            rows,
            path: path.display().to_string(),
        })
    }

    pub fn column_index(&self, name: &str) -> Result<usize, Failure> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Failure::validation(format!("{}: missing column {name:?}", self.path)))
    }

    fn parse(&self, row: usize, col: usize) -> Result<f64, Failure> {
        let s = &self.rows[row][col];
        s.parse::<f64>().map_err(|_| {
            Failure::validation(format!(
                "{}: row {}, column {:?}: not a number: {s:?}",
                self.path,
                row + 1,
                self.headers[col]
            ))
        })
    }

    pub fn numeric_column(&self, name: &str) -> Result<Vec<f64>, Failure> {
        let c = self.column_index(name)?;
        (0..self.rows.len()).map(|i| self.parse(i, c)).collect()
    }

    pub fn string_column(&self, name: &str) -> Result<Vec<String>, Failure> {
        let c = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r[c].clone()).collect())
    }

    /// Every cell as a number, row by row.
    pub fn numeric_rows(&self) -> Result<Vec<Vec<f64>>, Failure> {
        (0..self.rows.len())
            .map(|i| (0..self.headers.len()).map(|c| self.parse(i, c)).collect())
            .collect()
    }

    /// The only column of a one-column file.
    pub fn single_column(&self) -> Result<Vec<f64>, Failure> {
        if self.headers.len() != 1 {
            return Err(Failure::validation(format!(
                "{}: expected one column, found {}",
                self.path,
                self.headers.len()
            )));
        }
        self.numeric_column(&self.headers[0].clone())
    }
}

/// Loads `A.csv`, `M.csv`, `Y.csv` and, when present, `C.csv` from `dir`.
pub fn read_dataset(dir: &Path) -> Result<MediationDataset, Failure> {
    let a = Table::read(&dir.join("A.csv"))?.single_column()?;
    let y = Table::read(&dir.join("Y.csv"))?.single_column()?;
    let m = Table::read(&dir.join("M.csv"))?.numeric_rows()?;
    let c_path = dir.join("C.csv");
    let c = if c_path.exists() {
        Some(Table::read(&c_path)?.numeric_rows()?)
    } else {
        None
    };
    if m.len() != a.len() {
        return Err(Failure::validation(format!(
            "M.csv has {} rows but A.csv has {}",
            m.len(),
            a.len()
        )));
    }
    Ok(MediationDataset::from_rows(a, &m, y, c.as_deref())?)
}

pub fn write_dataset(
    dir: &Path,
    data: &MediationDataset,
    prov: &Provenance,
) -> Result<(), Failure> {
    let n = data.n();
    let col = |v: &[f64]| -> Vec<Vec<String>> { v.iter().map(|&x| vec![num(x)]).collect() };
    write_csv(&dir.join("A.csv"), prov, &["A"], &col(data.exposure()))?;
    write_csv(&dir.join("Y.csv"), prov, &["Y"], &col(data.outcome()))?;
    let header: Vec<String> = (0..data.p()).map(mediator_name).collect();
    let rows: Vec<Vec<String>> = (0..n)
        .map(|i| (0..data.p()).map(|j| num(data.mediator(j)[i])).collect())
        .collect();
    write_csv(&dir.join("M.csv"), prov, &header, &rows)?;
    if data.q() > 0 {
        let header: Vec<String> = (0..data.q()).map(|w| format!("C{:03}", w + 1)).collect();
        let rows: Vec<Vec<String>> = (0..n)
            .map(|i| (0..data.q()).map(|w| num(data.covariate(w)[i])).collect())
            .collect();
        write_csv(&dir.join("C.csv"), prov, &header, &rows)?;
    }
    Ok(())
}
