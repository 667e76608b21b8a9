use std::fmt::Write as _;
use std::path::Path;

use crate::{DemixError, Mat, Result};

/// Renders a matrix in the plain-text format: a `"<rows> <cols>"` header and
/// one whitespace-separated row per line. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn format_matrix(m: &Mat) -> String {
    let mut out = String::with_capacity(16 * (m.len() + 1));
    let _ = writeln!(out, "{} {}", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{:e}", m[(i, j)]);
        }
        out.push('\n');
    }
    out
}

/// Parses the plain-text matrix format. `origin` only labels error messages.
pub fn parse_matrix(text: &str, origin: &Path) -> Result<Mat> {
    let err = |line: usize, message: String| DemixError::Parse { path: origin.to_path_buf(), line, message };
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l.trim())).filter(|(_, l)| !l.is_empty());
    let (header_line, header) =
        lines.next().ok_or_else(|| err(1, "empty file, expected \"<rows> <cols>\" header".into()))?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    if dims.len() != 2 {
        return Err(err(header_line, format!("malformed header {header:?}, expected \"<rows> <cols>\"")));
    }
    let parse_dim = |tok: &str| {
        tok.parse::<usize>()
            .map_err(|_| err(header_line, format!("malformed header: {tok:?} is not a non-negative integer")))
    };
    let (rows, cols) = (parse_dim(dims[0])?, parse_dim(dims[1])?);
    if cols == 0 {
        // rows of a zero-width matrix are blank lines
        if let Some((line_no, _)) = lines.next() {
            return Err(err(line_no, "values present but header declares 0 columns".into()));
        }
        return Ok(Mat::zeros(rows, 0));
    }
    let mut data = Vec::with_capacity(rows * cols);
    let mut seen_rows = 0;
    let mut last_line = header_line;
    for (line_no, line) in lines {
        last_line = line_no;
        if seen_rows == rows {
            return Err(err(line_no, format!("unexpected extra row, header declares {rows} rows")));
        }
        let before = data.len();
        for tok in line.split_whitespace() {
            let v = tok.parse::<f64>().map_err(|_| err(line_no, format!("non-numeric token {tok:?}")))?;
            data.push(v);
        }
        let found = data.len() - before;
        if found != cols {
            return Err(err(line_no, format!("row has {found} values, header declares {cols} columns")));
        }
        seen_rows += 1;
    }
    if seen_rows != rows {
        return Err(err(last_line, format!("found {seen_rows} rows, header declares {rows}")));
    }
    Ok(Mat::from_row_slice(rows, cols, &data))
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<Mat> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| DemixError::Io { path: path.to_path_buf(), source })?;
    parse_matrix(&text, path)
}

pub fn write_matrix(m: &Mat, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_matrix(m)).map_err(|source| DemixError::Io { path: path.to_path_buf(), source })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Mat> {
        parse_matrix(text, Path::new("test.txt"))
    }

    #[test]
    fn round_trip_small() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.txt");
        let m = Mat::from_row_slice(2, 2, &[1.5, -2.0, 0.0, 3e-7]);
        write_matrix(&m, &path).unwrap();
        assert_eq!(read_matrix(&path).unwrap(), m);
    }

    #[test]
    fn ragged_rows_rejected() {
        match parse("2 3\n1 2\n3 4\n") {
            Err(DemixError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn empty_file_rejected() {
        assert!(matches!(parse(""), Err(DemixError::Parse { line: 1, .. })));
        assert!(matches!(parse("\n  \n"), Err(DemixError::Parse { .. })));
    }

    #[test]
    fn bad_tokens_name_their_line() {
        match parse("2 2\n1 2\n3 x\n") {
            Err(DemixError::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("\"x\""));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(matches!(parse("2\n1 2\n"), Err(DemixError::Parse { line: 1, .. })));
        assert!(matches!(parse("1 1\n1\n2\n"), Err(DemixError::Parse { line: 3, .. })));
        assert!(matches!(parse("3 1\n1\n2\n"), Err(DemixError::Parse { line: 3, .. })));
    }

    #[test]
    fn missing_file_names_path() {
        let e = read_matrix("/nonexistent/dir/Y.txt").unwrap_err();
        assert!(e.to_string().contains("/nonexistent/dir/Y.txt"));
    }

    #[test]
    fn zero_sized() {
        let m = parse("0 3\n").unwrap();
        assert_eq!(m.shape(), (0, 3));
        assert_eq!(parse(&format_matrix(&Mat::zeros(2, 0))).unwrap().shape(), (2, 0));
    }
}
