//! Matrix Market input and compressed sparse row Hermitian storage.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::vector::{c64, zeros, DenseVector};

/// Relative asymmetry accepted for `general` input before it is averaged
/// into `(A + A*)/2`.
pub const SYMMETRIZE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MatrixMeta {
    /// `%` comment lines following the banner, without the leading `%`.
    pub comments: Vec<String>,
    /// Set when `general` input was averaged into Hermitian form.
    pub symmetrized: bool,
}

/// Hermitian matrix in CSR form over complex scalars.
///
/// Both triangles are stored. Construction verifies exact structural
/// Hermitian symmetry: every stored `(i, j, v)` has a partner `(j, i, conj(v))`.
#[derive(Clone, Debug)]
pub struct SparseHermitianMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<c64>,
    one_norm: f64,
    meta: MatrixMeta,
}

impl SparseHermitianMatrix {
    /// Builds from full-storage triplets. Duplicates are summed and explicit
    /// zeros dropped; the result must be exactly Hermitian.
    pub fn from_triplets<I>(n: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, c64)>,
    {
        let mut rows: Vec<BTreeMap<usize, c64>> = vec![BTreeMap::new(); n];
        for (i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(Error::InvalidArgument(format!("entry ({i}, {j}) outside {n} x {n}")));
            }
            *rows[i].entry(j).or_insert(c64::new(0.0, 0.0)) += v;
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (j, v) in row {
                if v != c64::new(0.0, 0.0) {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        let mut m = Self { n, row_ptr, col_idx, values, one_norm: 0.0, meta: MatrixMeta::default() };
        m.validate()?;
        m.one_norm = m.compute_one_norm();
        Ok(m)
    }

    pub fn from_dense(a: &DenseMatrix) -> Result<Self> {
        let n = a.dim();
        let trip = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| (i, j, a[(i, j)]));
        Self::from_triplets(n, trip.collect::<Vec<_>>())
    }

    pub fn from_real_diagonal(d: &[f64]) -> Self {
        Self::from_triplets(d.len(), d.iter().enumerate().map(|(i, &v)| (i, i, c64::new(v, 0.0))))
            .expect("a real diagonal is Hermitian")
    }

    fn validate(&self) -> Result<()> {
        let n = self.n;
        if self.row_ptr.len() != n + 1 || self.row_ptr.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidArgument("malformed row pointer".into()));
        }
        for i in 0..n {
            let cols = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) || cols.iter().any(|&j| j >= n) {
                return Err(Error::InvalidArgument(format!("row {i} has unsorted or out-of-range columns")));
            }
        }
        for i in 0..n {
            for (j, v) in self.row(i) {
                if !(v.re.is_finite() && v.im.is_finite()) {
                    return Err(Error::NonFinite("matrix entry"));
                }
                match self.get(j, i) {
                    Some(w) if w == v.conj() => {}
                    Some(w) => {
                        return Err(Error::NotHermitian(format!(
                            "a[{i},{j}] = {v} but a[{j},{i}] = {w}"
                        )))
                    }
                    None => {
                        return Err(Error::NotHermitian(format!("a[{i},{j}] = {v} has no partner")))
                    }
                }
            }
        }
        Ok(())
    }

    fn compute_one_norm(&self) -> f64 {
        let mut col = vec![0.0; self.n];
        for (&j, v) in self.col_idx.iter().zip(&self.values) {
            col[j] += v.norm();
        }
        col.into_iter().fold(0.0, f64::max)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `‖A‖₁`, the maximum absolute column sum.
    #[inline]
    pub fn one_norm(&self) -> f64 {
        self.one_norm
    }

    pub fn meta(&self) -> &MatrixMeta {
        &self.meta
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[c64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, c64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> Option<c64> {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].binary_search(&j).ok().map(|k| self.values[r.start + k])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i).map_or(0.0, |v| v.re)).collect()
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|v| v.im == 0.0)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                d[(i, j)] = v;
            }
        }
        d
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: len });
        }
        Ok(())
    }

    /// `out = (A - shift I) v`, without dimension checks.
    pub(crate) fn shifted_matvec_into(&self, shift: f64, v: &[c64], out: &mut [c64]) {
        for i in 0..self.n {
            let mut s = c64::new(0.0, 0.0);
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * v[self.col_idx[k]];
            }
            out[i] = if shift == 0.0 { s } else { s - v[i] * shift };
        }
    }

    pub fn matvec(&self, v: &[c64]) -> Result<DenseVector> {
        self.shifted_matvec(0.0, v)
    }

    /// `(A - shift I) v`
    pub fn shifted_matvec(&self, shift: f64, v: &[c64]) -> Result<DenseVector> {
        self.check_dim(v.len())?;
        let mut out = zeros(self.n);
        self.shifted_matvec_into(shift, v, &mut out);
        Ok(out)
    }

    pub fn with_meta(mut self, meta: MatrixMeta) -> Self {
        self.meta = meta;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Coordinate,
    Array,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Field {
    Real,
    Complex,
    Pattern,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
    Hermitian,
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn parse_banner(line: &str) -> Result<(Format, Field, Symmetry)> {
    let toks: Vec<String> = line.split_whitespace().map(str::to_ascii_lowercase).collect();
    if toks.len() != 5 || toks[0] != "%%matrixmarket" || toks[1] != "matrix" {
        return Err(parse_err(1, "expected '%%MatrixMarket matrix <format> <field> <symmetry>'"));
    }
    let format = match toks[2].as_str() {
        "coordinate" => Format::Coordinate,
        "array" => Format::Array,
        f => return Err(parse_err(1, format!("unsupported format '{f}'"))),
    };
    let field = match toks[3].as_str() {
        "real" | "integer" | "double" => Field::Real,
        "complex" => Field::Complex,
        "pattern" => Field::Pattern,
        f => return Err(parse_err(1, format!("unsupported field '{f}'"))),
    };
    let symmetry = match toks[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "hermitian" => Symmetry::Hermitian,
        s => return Err(parse_err(1, format!("unsupported symmetry '{s}'"))),
    };
    if field == Field::Pattern && format == Format::Array {
        return Err(parse_err(1, "pattern field requires coordinate format"));
    }
    Ok((format, field, symmetry))
}

fn parse_num<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    tok.parse().map_err(|_| parse_err(line, format!("invalid {what} '{tok}'")))
}

fn parse_value(toks: &mut std::str::SplitWhitespace<'_>, field: Field, line: usize) -> Result<c64> {
    Ok(match field {
        Field::Pattern => c64::new(1.0, 0.0),
        Field::Real => c64::new(parse_num(toks.next(), line, "value")?, 0.0),
        Field::Complex => {
            c64::new(parse_num(toks.next(), line, "real part")?, parse_num(toks.next(), line, "imaginary part")?)
        }
    })
}

/// Parses Matrix Market text into a validated Hermitian matrix.
pub fn parse_matrix_market(text: &str) -> Result<SparseHermitianMatrix> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, banner) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let (format, field, symmetry) = parse_banner(banner)?;

    let mut comments = Vec::new();
    let mut body = lines.filter_map(|(no, l)| {
        let t = l.trim();
        if let Some(c) = t.strip_prefix('%') {
            comments.push(c.to_string());
            None
        } else if t.is_empty() {
            None
        } else {
            Some((no, t))
        }
    });

    let (size_line, size) = body.next().ok_or_else(|| parse_err(1, "missing size line"))?;
    let mut toks = size.split_whitespace();
    let rows: usize = parse_num(toks.next(), size_line, "row count")?;
    let cols: usize = parse_num(toks.next(), size_line, "column count")?;
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    let n = rows;

    let mut trip: Vec<(usize, usize, c64)> = Vec::new();
    match format {
        Format::Coordinate => {
            let nnz: usize = parse_num(toks.next(), size_line, "entry count")?;
            trip.reserve(nnz);
            let mut seen = 0;
            for (no, l) in body.by_ref() {
                if seen == nnz {
                    return Err(parse_err(no, "more entries than declared"));
                }
                let mut t = l.split_whitespace();
                let i: usize = parse_num(t.next(), no, "row index")?;
                let j: usize = parse_num(t.next(), no, "column index")?;
                if i == 0 || j == 0 || i > n || j > n {
                    return Err(parse_err(no, format!("index ({i}, {j}) out of range")));
                }
                let v = parse_value(&mut t, field, no)?;
                trip.push((i - 1, j - 1, v));
                seen += 1;
            }
            if seen != nnz {
                return Err(parse_err(size_line, format!("declared {nnz} entries, found {seen}")));
            }
        }
        Format::Array => {
            let positions: Vec<(usize, usize)> = match symmetry {
                Symmetry::General => (0..n).flat_map(|j| (0..n).map(move |i| (i, j))).collect(),
                _ => (0..n).flat_map(|j| (j..n).map(move |i| (i, j))).collect(),
            };
            let mut pos = positions.into_iter();
            for (no, l) in body.by_ref() {
                let mut t = l.split_whitespace();
                let v = parse_value(&mut t, field, no)?;
                let (i, j) = pos.next().ok_or_else(|| parse_err(no, "more entries than n x n"))?;
                trip.push((i, j, v));
            }
            if pos.next().is_some() {
                return Err(parse_err(size_line, "array data ends early"));
            }
        }
    }

    let (full, symmetrized) = match symmetry {
        Symmetry::General => symmetrize(trip)?,
        Symmetry::Symmetric | Symmetry::Hermitian => {
            let conj = symmetry == Symmetry::Hermitian;
            let mut full = Vec::with_capacity(2 * trip.len());
            for (i, j, v) in trip {
                if i == j {
                    if v.im != 0.0 {
                        return Err(Error::NotHermitian(format!("diagonal entry ({}, {}) is not real", i + 1, j + 1)));
                    }
                    full.push((i, j, v));
                } else {
                    if !conj && v.im != 0.0 {
                        return Err(Error::NotHermitian(
                            "complex symmetric matrices are not Hermitian".into(),
                        ));
                    }
                    full.push((i, j, v));
                    full.push((j, i, v.conj()));
                }
            }
            (full, false)
        }
    };

    let m = SparseHermitianMatrix::from_triplets(n, full)?;
    Ok(m.with_meta(MatrixMeta { comments, symmetrized }))
}

/// Averages `general` input into `(A + A*)/2` if the asymmetry is within
/// [`SYMMETRIZE_TOL`] relative to the largest entry.
fn symmetrize(trip: Vec<(usize, usize, c64)>) -> Result<(Vec<(usize, usize, c64)>, bool)> {
    let mut map: BTreeMap<(usize, usize), c64> = BTreeMap::new();
    for (i, j, v) in trip {
        *map.entry((i, j)).or_insert(c64::new(0.0, 0.0)) += v;
    }
    let scale = map.values().map(|v| v.norm()).fold(0.0, f64::max);
    let zero = c64::new(0.0, 0.0);
    let mut worst = 0.0f64;
    for (&(i, j), &v) in &map {
        let w = map.get(&(j, i)).copied().unwrap_or(zero);
        worst = worst.max((v - w.conj()).norm());
    }
    if worst > SYMMETRIZE_TOL * scale {
        return Err(Error::NotHermitian(format!(
            "general matrix asymmetry {:.3e} exceeds {SYMMETRIZE_TOL:e} relative",
            worst / scale.max(f64::MIN_POSITIVE)
        )));
    }
    let mut out = Vec::with_capacity(map.len() * 2);
    let mut changed = false;
    for (&(i, j), &v) in &map {
        let w = map.get(&(j, i)).copied().unwrap_or(zero);
        let avg = (v + w.conj()) * 0.5;
        changed |= avg != v;
        out.push((i, j, avg));
        if !map.contains_key(&(j, i)) {
            out.push((j, i, avg.conj()));
            changed = true;
        }
    }
    Ok((out, changed))
}

pub fn load_matrix_market(path: impl AsRef<Path>) -> Result<SparseHermitianMatrix> {
    let text = fs::read_to_string(path)?;
    parse_matrix_market(&text)
}

/// Writes the lower triangle as `coordinate real symmetric` when all entries
/// are real, `coordinate complex hermitian` otherwise.
pub fn to_matrix_market(a: &SparseHermitianMatrix) -> String {
    let real = a.is_real();
    let mut s = String::new();
    let kind = if real { "real symmetric" } else { "complex hermitian" };
    let _ = writeln!(s, "%%MatrixMarket matrix coordinate {kind}");
    for c in &a.meta().comments {
        let _ = writeln!(s, "%{c}");
    }
    let lower: Vec<(usize, usize, c64)> =
        (0..a.dim()).flat_map(|i| a.row(i).filter(move |&(j, _)| j <= i).map(move |(j, v)| (i, j, v))).collect();
    let _ = writeln!(s, "{} {} {}", a.dim(), a.dim(), lower.len());
    for (i, j, v) in lower {
        if real {
            let _ = writeln!(s, "{} {} {:e}", i + 1, j + 1, v.re);
        } else {
            let _ = writeln!(s, "{} {} {:e} {:e}", i + 1, j + 1, v.re, v.im);
        }
    }
    s
}

pub fn save_matrix_market(path: impl AsRef<Path>, a: &SparseHermitianMatrix) -> Result<()> {
    fs::write(path, to_matrix_market(a))?;
    Ok(())
}
