use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use super::Dataset;
use crate::{Error, Result};

/// Reads a comma-separated file with a mandatory header row.
///
/// `nominal_columns` and `label_column` are zero-based CSV column indices.
/// Nominal cells are mapped to dense ids in first-occurrence order; the label
/// column must hold `0` or `1` and is removed from the features.
pub fn load_csv(
    path: impl AsRef<Path>,
    nominal_columns: &[usize],
    label_column: Option<usize>,
) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(std::io::BufReader::new(file), nominal_columns, label_column)
}

pub fn read_csv<R: Read>(
    reader: R,
    nominal_columns: &[usize],
    label_column: Option<usize>,
) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::EmptyInput);
    }
    let width = headers.len();
    for &c in nominal_columns.iter().chain(label_column.iter()) {
        if c >= width {
            return Err(Error::InvalidConfig(format!(
                "column index {c} out of range ({width} columns)"
            )));
        }
    }
    if let Some(l) = label_column {
        if nominal_columns.contains(&l) {
            return Err(Error::InvalidConfig(format!(
                "column {l} cannot be both nominal and the label"
            )));
        }
    }

    let numeric_cols: Vec<usize> = (0..width)
        .filter(|c| !nominal_columns.contains(c) && Some(*c) != label_column)
        .collect();
    let mut nominal_cols: Vec<usize> = nominal_columns.to_vec();
    nominal_cols.sort_unstable();
    nominal_cols.dedup();

    let mut numeric = Vec::new();
    let mut nominal = Vec::new();
    let mut labels = Vec::new();
    let mut levels: Vec<Vec<String>> = vec![Vec::new(); nominal_cols.len()];
    let mut lookup: Vec<HashMap<String, u32>> = vec![HashMap::new(); nominal_cols.len()];
    let mut n = 0;

    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(n + 2, |p| p.line() as usize);
        if record.len() != width {
            return Err(Error::Schema(format!(
                "line {line} has {} fields, expected {width}",
                record.len()
            )));
        }
        for &c in &numeric_cols {
            let cell = &record[c];
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row: line,
                column: headers[c].clone(),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: line,
                    column: headers[c].clone(),
                    value: cell.to_string(),
                });
            }
            numeric.push(v);
        }
        for (k, &c) in nominal_cols.iter().enumerate() {
            let cell = &record[c];
            if cell.is_empty() {
                return Err(Error::Parse {
                    row: line,
                    column: headers[c].clone(),
                    value: String::new(),
                });
            }
            let next = levels[k].len() as u32;
            let id = *lookup[k].entry(cell.to_string()).or_insert_with(|| {
                levels[k].push(cell.to_string());
                next
            });
            nominal.push(id);
        }
        if let Some(c) = label_column {
            let cell = &record[c];
            let label = match cell {
                "0" | "0.0" => 0,
                "1" | "1.0" => 1,
                _ => {
                    return Err(Error::Parse {
                        row: line,
                        column: headers[c].clone(),
                        value: cell.to_string(),
                    })
                }
            };
            labels.push(label);
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyInput);
    }

    let names = numeric_cols
        .iter()
        .chain(nominal_cols.iter())
        .map(|&c| headers[c].clone())
        .collect();
    Dataset::new(
        n,
        numeric_cols.len(),
        numeric,
        nominal_cols.len(),
        nominal,
        label_column.map(|_| labels),
        names,
        levels,
    )
}

pub(super) fn write_csv<W: Write>(data: &Dataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = data.feature_names().to_vec();
    if data.labels().is_some() {
        header.push("label".into());
    }
    wtr.write_record(&header)?;
    let mut fields: Vec<String> = Vec::with_capacity(header.len());
    for (i, row) in data.rows().enumerate() {
        fields.clear();
        // `{}` on f64 prints the shortest representation that parses back exactly.
        fields.extend(row.numeric.iter().map(|v| format!("{v}")));
        fields.extend(
            row.nominal
                .iter()
                .enumerate()
                .map(|(k, &id)| data.levels()[k][id as usize].clone()),
        );
        if let Some(l) = data.labels() {
            fields.push(l[i].to_string());
        }
        wtr.write_record(&fields)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_numeric_file() {
        let d = read_csv("x\n1.0\n2.0\n3.0\n".as_bytes(), &[], None).unwrap();
        assert_eq!(d.n(), 3);
        assert_eq!(d.d_num(), 1);
        assert_eq!(d.d_nom(), 0);
        assert_eq!(d.numeric_column(0), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn nominal_ids_follow_first_occurrence() {
        let d = read_csv("c\na\nb\na\n".as_bytes(), &[0], None).unwrap();
        assert_eq!(d.nominal_column(0), vec![0, 1, 0]);
        assert_eq!(d.levels()[0], vec!["a", "b"]);
    }

    #[test]
    fn bad_numeric_cell_names_row_and_column() {
        let err = read_csv("x,y\n1,2\n3,abc\n".as_bytes(), &[], None).unwrap_err();
        match err {
            Error::Parse { row, column, value } => {
                assert_eq!(row, 3);
                assert_eq!(column, "y");
                assert_eq!(value, "abc");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn empty_inputs_are_rejected() {
        assert!(matches!(
            read_csv("".as_bytes(), &[], None),
            Err(Error::EmptyInput)
        ));
        assert!(matches!(
            read_csv("x,y\n".as_bytes(), &[], None),
            Err(Error::EmptyInput)
        ));
    }

    #[test]
    fn missing_cell_is_rejected() {
        assert!(read_csv("x,y\n1,\n".as_bytes(), &[], None).is_err());
    }

    #[test]
    fn label_column_is_split_off() {
        let d = read_csv("x,label,c\n1.5,0,u\n2.5,1,v\n".as_bytes(), &[2], Some(1)).unwrap();
        assert_eq!(d.d_num(), 1);
        assert_eq!(d.d_nom(), 1);
        assert_eq!(d.labels().unwrap(), &[0, 1]);
        assert_eq!(d.feature_names(), &["x", "c"]);
    }

    #[test]
    fn write_then_read_is_exact() {
        let csv = "a,b,k,label\n0.1,-3e-7,red,0\n1e300,2.5,blue,1\n0.30000000000000004,7,red,0\n";
        let d = read_csv(csv.as_bytes(), &[2], Some(3)).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let back = read_csv(buf.as_slice(), &[2], Some(3)).unwrap();
        assert_eq!(d, back);
    }
}
