//! Exact scalar trait, dense vectors and matrices, and the elimination
//! routines (solve, inverse, rank) everything else is built on.

use std::fmt::{self, Debug, Display};
use std::hash::Hash;
use std::ops::{Deref, DerefMut, Index, IndexMut};
use std::str::FromStr;

use num_traits::{Num, Signed, Zero};
use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::NumericError;

/// An exact ordered field.
///
/// Every algorithm in this crate compares values with `==` and relies on
/// `(a + b) - b == a`, so implementors must be exact (rationals over
/// arbitrary-precision or wide fixed integers). Values render with
/// `Display` and parse with `FromStr` as `"p/q"` or `"p"`.
pub trait Scalar:
    Clone + Debug + Display + FromStr + Num + Signed + Ord + Hash + Send + Sync + 'static
{
}

impl<T> Scalar for T where
    T: Clone + Debug + Display + FromStr + Num + Signed + Ord + Hash + Send + Sync + 'static
{
}

/// Parses a scalar from its `"p/q"` or `"p"` rendering.
pub fn parse_scalar<T: Scalar>(text: &str) -> Result<T, NumericError> {
    text.trim()
        .parse::<T>()
        .map_err(|_| NumericError::Parse(text.to_string()))
}

/// Dense column vector of fixed length.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Vector<T> {
    data: Vec<T>,
}

impl<T: Scalar> Vector<T> {
    pub fn zeros(len: usize) -> Self {
        Self { data: vec![T::zero(); len] }
    }

    pub fn filled(len: usize, value: T) -> Self {
        Self { data: vec![value; len] }
    }

    pub fn dot(&self, other: &[T]) -> T {
        debug_assert_eq!(self.len(), other.len());
        self.data
            .iter()
            .zip(other)
            .fold(T::zero(), |acc, (a, b)| acc + a.clone() * b.clone())
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a.clone() + b.clone())
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a.clone() - b.clone())
    }

    pub fn scale(&self, factor: &T) -> Self {
        self.data.iter().map(|a| a.clone() * factor.clone()).collect()
    }

    /// Keeps the first `len` entries.
    pub fn head(&self, len: usize) -> Self {
        self.data[..len].iter().cloned().collect()
    }

    pub fn concat(&self, tail: &[T]) -> Self {
        self.data.iter().chain(tail).cloned().collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Zero::is_zero)
    }

    /// Componentwise `self <= other`.
    pub fn le(&self, other: &[T]) -> bool {
        self.len() == other.len() && self.data.iter().zip(other).all(|(a, b)| a <= b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(&T, &T) -> T) -> Self {
        assert_eq!(self.len(), other.len(), "vector length mismatch");
        self.data.iter().zip(&other.data).map(|(a, b)| f(a, b)).collect()
    }
}

impl<T> Vector<T> {
    pub fn into_vec(self) -> Vec<T> {
        self.data
    }
}

impl<T> From<Vec<T>> for Vector<T> {
    fn from(data: Vec<T>) -> Self {
        Self { data }
    }
}

impl<T> FromIterator<T> for Vector<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        Self { data: iter.into_iter().collect() }
    }
}

impl<T> Deref for Vector<T> {
    type Target = [T];

    fn deref(&self) -> &[T] {
        &self.data
    }
}

// Entry mutation is allowed; the length never changes.
impl<T> DerefMut for Vector<T> {
    fn deref_mut(&mut self) -> &mut [T] {
        &mut self.data
    }
}

impl<T: Display> Debug for Vector<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl<T: Display> Display for Vector<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, v) in self.data.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str(")")
    }
}

impl<T: Display> Serialize for Vector<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.data.len()))?;
        for v in &self.data {
            seq.serialize_element(&v.to_string())?;
        }
        seq.end()
    }
}

impl<'de, T: Scalar> Deserialize<'de> for Vector<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct VectorVisitor<T>(std::marker::PhantomData<T>);

        impl<'de, T: Scalar> Visitor<'de> for VectorVisitor<T> {
            type Value = Vector<T>;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a list of rational strings")
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Self::Value, A::Error> {
                let mut data = Vec::new();
                while let Some(text) = seq.next_element::<ScalarText>()? {
                    data.push(parse_scalar::<T>(&text.0).map_err(de::Error::custom)?);
                }
                Ok(Vector { data })
            }
        }

        deserializer.deserialize_seq(VectorVisitor(std::marker::PhantomData))
    }
}

/// Accepts either a JSON string or a JSON integer where a rational is expected.
struct ScalarText(String);

impl<'de> Deserialize<'de> for ScalarText {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct TextVisitor;

        impl<'de> Visitor<'de> for TextVisitor {
            type Value = ScalarText;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a rational string such as \"11/2\" or an integer")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<ScalarText, E> {
                Ok(ScalarText(v.to_string()))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<ScalarText, E> {
                Ok(ScalarText(v.to_string()))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<ScalarText, E> {
                Ok(ScalarText(v.to_string()))
            }
        }

        deserializer.deserialize_any(TextVisitor)
    }
}

/// Serde adapter for single scalar fields: `#[serde(with = "crate::numeric::scalar_serde")]`.
pub mod scalar_serde {
    use super::*;

    pub fn serialize<T: Display, S: Serializer>(value: &T, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&value.to_string())
    }

    pub fn deserialize<'de, T: Scalar, D: Deserializer<'de>>(d: D) -> Result<T, D::Error> {
        let text = ScalarText::deserialize(d)?;
        parse_scalar(&text.0).map_err(de::Error::custom)
    }
}

/// Serde adapter for `Option<T>` scalar fields.
pub mod opt_scalar_serde {
    use super::*;

    pub fn serialize<T: Display, S: Serializer>(value: &Option<T>, s: S) -> Result<S::Ok, S::Error> {
        match value {
            Some(v) => s.serialize_some(&v.to_string()),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, T: Scalar, D: Deserializer<'de>>(d: D) -> Result<Option<T>, D::Error> {
        let text = Option::<ScalarText>::deserialize(d)?;
        text.map(|t| parse_scalar(&t.0).map_err(de::Error::custom))
            .transpose()
    }
}

/// Dense row-major matrix.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    /// Builds a matrix from rows; a zero-row input needs `cols` to be known,
    /// so use [`Matrix::zeros`] for that case.
    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self, NumericError> {
        let cols = rows.first().map_or(0, Vec::len);
        let n_rows = rows.len();
        let mut data = Vec::with_capacity(n_rows * cols);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != cols {
                return Err(NumericError::RaggedRows { row: i, expected: cols, found: row.len() });
            }
            data.extend(row);
        }
        Ok(Self { rows: n_rows, cols, data })
    }

    pub fn from_row_slices(cols: usize, rows: &[&[T]]) -> Self {
        let mut m = Self::zeros(rows.len(), cols);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), cols);
            m.data[i * cols..(i + 1) * cols].clone_from_slice(row);
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn column(&self, j: usize) -> Vector<T> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        self.rows().map(<[T]>::to_vec).collect()
    }

    pub fn mul_vec(&self, x: &[T]) -> Vector<T> {
        assert_eq!(self.cols, x.len(), "matrix-vector dimension mismatch");
        self.rows()
            .map(|row| row.iter().zip(x).fold(T::zero(), |acc, (a, b)| acc + a.clone() * b.clone()))
            .collect()
    }

    /// `xᵀ M`, i.e. `Mᵀ x`.
    pub fn tr_mul_vec(&self, x: &[T]) -> Vector<T> {
        assert_eq!(self.rows, x.len(), "matrix-vector dimension mismatch");
        let mut out: Vector<T> = Vector::zeros(self.cols);
        for (i, xi) in x.iter().enumerate() {
            if xi.is_zero() {
                continue;
            }
            for (j, a) in self.row(i).iter().enumerate() {
                out[j] = out[j].clone() + a.clone() * xi.clone();
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)].clone();
            }
        }
        t
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let rows: Vec<&[T]> = idx.iter().map(|&i| self.row(i)).collect();
        Self::from_row_slices(self.cols, &rows)
    }

    pub fn select_columns(&self, idx: &[usize]) -> Self {
        let mut m = Self::zeros(self.rows, idx.len());
        for i in 0..self.rows {
            for (k, &j) in idx.iter().enumerate() {
                m[(i, k)] = self[(i, j)].clone();
            }
        }
        m
    }

    /// Horizontal concatenation `(self | other)`.
    pub fn hstack(&self, other: &Self) -> Self {
        assert_eq!(self.rows, other.rows, "hstack row mismatch");
        let cols = self.cols + other.cols;
        let mut m = Self::zeros(self.rows, cols);
        for i in 0..self.rows {
            m.data[i * cols..i * cols + self.cols].clone_from_slice(self.row(i));
            m.data[i * cols + self.cols..(i + 1) * cols].clone_from_slice(other.row(i));
        }
        m
    }

    /// Vertical concatenation.
    pub fn vstack(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.cols, "vstack column mismatch");
        let mut data = self.data.clone();
        data.extend(other.data.iter().cloned());
        Self { rows: self.rows + other.rows, cols: self.cols, data }
    }

    pub fn neg(&self) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| -v.clone()).collect() }
    }

    /// Inverse of a square matrix, `None` when singular.
    pub fn inverse(&self) -> Option<Self> {
        assert_eq!(self.rows, self.cols, "inverse of a non-square matrix");
        let n = self.rows;
        let mut aug = self.hstack(&Self::identity(n));
        let pivots = row_reduce(&mut aug, n);
        if pivots.len() < n {
            return None;
        }
        Some(aug.select_columns(&(n..2 * n).collect::<Vec<_>>()))
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Display> Debug for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            f.write_str("  ")?;
            for j in 0..self.cols {
                write!(f, "{} ", self.data[i * self.cols + j])?;
            }
            f.write_str("\n")?;
        }
        f.write_str("]")
    }
}

impl<T: Display> Serialize for Matrix<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.rows))?;
        for i in 0..self.rows {
            let row: Vec<String> =
                self.data[i * self.cols..(i + 1) * self.cols].iter().map(ToString::to_string).collect();
            seq.serialize_element(&row)?;
        }
        seq.end()
    }
}

impl<'de, T: Scalar> Deserialize<'de> for Matrix<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let rows = Vec::<Vector<T>>::deserialize(deserializer)?;
        Matrix::from_rows(rows.into_iter().map(Vector::into_vec).collect()).map_err(de::Error::custom)
    }
}

/// Gauss-Jordan elimination on the first `pivot_cols` columns, in place.
/// Returns the pivot column of each reduced row, in row order.
fn row_reduce<T: Scalar>(m: &mut Matrix<T>, pivot_cols: usize) -> Vec<usize> {
    let (rows, cols) = (m.rows, m.cols);
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..pivot_cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !m[(i, c)].is_zero()) else {
            continue;
        };
        if p != r {
            for j in 0..cols {
                m.data.swap(p * cols + j, r * cols + j);
            }
        }
        let inv = T::one() / m[(r, c)].clone();
        for j in c..cols {
            m[(r, j)] = m[(r, j)].clone() * inv.clone();
        }
        for i in 0..rows {
            if i == r || m[(i, c)].is_zero() {
                continue;
            }
            let factor = m[(i, c)].clone();
            for j in c..cols {
                let delta = factor.clone() * m[(r, j)].clone();
                m[(i, j)] = m[(i, j)].clone() - delta;
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

/// Solves `a x = b` exactly; `None` when `a` is singular.
pub fn solve_linear_system<T: Scalar>(a: &Matrix<T>, b: &[T]) -> Option<Vector<T>> {
    assert_eq!(a.nrows(), a.ncols(), "solve_linear_system needs a square matrix");
    assert_eq!(a.nrows(), b.len(), "right-hand side length mismatch");
    let n = a.nrows();
    let rhs = Matrix::from_row_slices(1, &b.iter().map(std::slice::from_ref).collect::<Vec<_>>());
    let mut aug = a.hstack(&rhs);
    if row_reduce(&mut aug, n).len() < n {
        return None;
    }
    Some(aug.column(n))
}

pub fn rank<T: Scalar>(m: &Matrix<T>) -> usize {
    let mut work = m.clone();
    let cols = work.ncols();
    row_reduce(&mut work, cols).len()
}

/// Rank of the difference vectors `p_i - p_0`.
pub fn affine_dimension<T: Scalar>(points: &[Vector<T>]) -> Result<usize, NumericError> {
    let (first, rest) = points.split_first().ok_or(NumericError::EmptyInput)?;
    if rest.is_empty() {
        return Ok(0);
    }
    let mut diffs = Matrix::zeros(rest.len(), first.len());
    for (i, p) in rest.iter().enumerate() {
        if p.len() != first.len() {
            return Err(NumericError::DimensionMismatch { expected: first.len(), found: p.len() });
        }
        for j in 0..first.len() {
            diffs[(i, j)] = p[j].clone() - first[j].clone();
        }
    }
    Ok(rank(&diffs))
}

/// Componentwise midpoint `(a + b) / 2`.
pub fn midpoint<T: Scalar>(a: &[T], b: &[T]) -> Vector<T> {
    let two = T::one() + T::one();
    a.iter().zip(b).map(|(x, y)| (x.clone() + y.clone()) / two.clone()).collect()
}

/// Arithmetic mean of a non-empty point list.
pub fn barycenter<T: Scalar>(points: &[Vector<T>]) -> Vector<T> {
    assert!(!points.is_empty(), "barycenter of an empty set");
    let n = points[0].len();
    let mut sum = Vector::zeros(n);
    for p in points {
        sum = sum.add(p);
    }
    let count = (0..points.len()).fold(T::zero(), |acc, _| acc + T::one());
    sum.scale(&(T::one() / count))
}

/// Builds a scalar from a machine integer.
pub fn from_int<T: Scalar>(v: i64) -> T {
    let mut out = T::zero();
    let step = if v < 0 { -T::one() } else { T::one() };
    // Binary expansion keeps this O(log |v|) for wide values.
    let mut mag = v.unsigned_abs();
    let mut power = step;
    while mag > 0 {
        if mag & 1 == 1 {
            out = out + power.clone();
        }
        power = power.clone() + power;
        mag >>= 1;
    }
    out
}
