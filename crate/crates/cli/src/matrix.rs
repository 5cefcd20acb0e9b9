//! Plain-text matrix files: first line `n`, then `n` rows of `n`
//! whitespace-separated reals. Blank lines are ignored.

use stiffode::DenseMatrix;

#[derive(Debug, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct MatrixParseError {
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl Into<String>) -> MatrixParseError {
    MatrixParseError {
        line,
        message: message.into(),
    }
}

pub fn parse_matrix(text: &str) -> Result<DenseMatrix, MatrixParseError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (first, header) = lines.next().ok_or_else(|| err(1, "empty matrix file"))?;
    let n: usize = header
        .parse()
        .map_err(|_| err(first, format!("expected the dimension, got {header:?}")))?;
    if n == 0 {
        return Err(err(first, "dimension must be positive"));
    }
    let mut data = Vec::with_capacity(n * n);
    for r in 0..n {
        let (line, row) = lines
            .next()
            .ok_or_else(|| err(first, format!("expected {n} rows, found {r}")))?;
        let values: Vec<f64> = row
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| err(line, format!("not a finite real: {t:?}")))
            })
            .collect::<Result<_, _>>()?;
        if values.len() != n {
            return Err(err(
                line,
                format!("expected {n} entries, found {}", values.len()),
            ));
        }
        data.extend(values);
    }
    if let Some((line, _)) = lines.next() {
        return Err(err(line, format!("unexpected content after {n} rows")));
    }
    DenseMatrix::new(n, n, data).map_err(|e| err(first, e.to_string()))
}
