//! Functions sampled on a uniform truncated grid, extended by constant limits.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};

/// Values on `x_i = x_min + i h`, `i = 0..n`, with `left_limit` used for
/// every `x < x_min` and `right_limit` for every `x > x_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    x_min: f64,
    h: f64,
    values: Vec<f64>,
    left_limit: f64,
    right_limit: f64,
}

/// Monotonicity direction reported by [`GridField::monotonicity`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Monotonicity {
    Constant,
    Nondecreasing,
    Nonincreasing,
    NotMonotone,
}

#[derive(Serialize)]
struct FieldHeader {
    x_min: f64,
    h: f64,
    n: usize,
    left_limit: f64,
    right_limit: f64,
}

impl GridField {
    pub fn new(x_min: f64, h: f64, values: Vec<f64>, left_limit: f64, right_limit: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) || !x_min.is_finite() {
            return Err(Error::Domain(format!("bad grid: x_min = {x_min}, h = {h}")));
        }
        if values.is_empty() {
            return Err(Error::Domain("grid field needs at least one node".into()));
        }
        if values.iter().any(|v| !v.is_finite()) || !left_limit.is_finite() || !right_limit.is_finite() {
            return Err(Error::Domain("grid field values must be finite".into()));
        }
        Ok(Self {
            x_min,
            h,
            values,
            left_limit,
            right_limit,
        })
    }

    pub(crate) fn from_parts_unchecked(x_min: f64, h: f64, values: Vec<f64>, left_limit: f64, right_limit: f64) -> Self {
        Self {
            x_min,
            h,
            values,
            left_limit,
            right_limit,
        }
    }

    pub fn constant(x_min: f64, h: f64, n: usize, value: f64) -> Result<Self> {
        Self::new(x_min, h, vec![value; n], value, value)
    }

    /// Monotone ramp from 0 (left of `x0`) to 1 (right of `x0 + width`).
    ///
    /// With `width = 0` this is a step; a node sitting exactly on `x0` takes 1/2.
    pub fn ramp_profile(x_min: f64, h: f64, n: usize, x0: f64, width: f64) -> Result<Self> {
        if !(width >= 0.0) {
            return Err(Error::Domain(format!("ramp width must be nonnegative, got {width}")));
        }
        let x_max = x_min + (n.max(1) - 1) as f64 * h;
        if x0 < x_min || x0 + width > x_max {
            return Err(Error::Window {
                x_min,
                x_max,
                lo: x0,
                hi: x0 + width,
            });
        }
        let values = (0..n)
            .map(|i| {
                let x = x_min + i as f64 * h;
                if width == 0.0 {
                    if x < x0 {
                        0.0
                    } else if x > x0 {
                        1.0
                    } else {
                        0.5
                    }
                } else {
                    ((x - x0) / width).clamp(0.0, 1.0)
                }
            })
            .collect();
        Self::new(x_min, h, values, 0.0, 1.0)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x(self.values.len() - 1)
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.h
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn left_limit(&self) -> f64 {
        self.left_limit
    }

    pub fn right_limit(&self) -> f64 {
        self.right_limit
    }

    /// Index of the node nearest to `x`, if inside the window.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let pos = ((x - self.x_min) / self.h).round();
        if pos < 0.0 || pos as usize >= self.values.len() {
            None
        } else {
            Some(pos as usize)
        }
    }

    /// Linear interpolation; constant limits outside the window.
    pub fn value_at(&self, x: f64) -> f64 {
        let pos = (x - self.x_min) / self.h;
        let n = self.values.len();
        if pos < 0.0 {
            return self.left_limit;
        }
        if pos > (n - 1) as f64 {
            return self.right_limit;
        }
        let nearest = pos.round();
        if (pos - nearest).abs() <= 1e-9 {
            return self.values[(nearest as usize).min(n - 1)];
        }
        let i = pos.floor() as usize;
        let t = pos - i as f64;
        if i + 1 >= n {
            return self.values[n - 1];
        }
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }

    pub fn same_grid(&self, other: &GridField) -> bool {
        self.values.len() == other.values.len()
            && (self.h - other.h).abs() <= 1e-12 * self.h
            && (self.x_min - other.x_min).abs() <= 1e-9 * self.h
    }

    fn check_grid(&self, other: &GridField) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "(x_min {}, h {}, n {}) vs (x_min {}, h {}, n {})",
                self.x_min,
                self.h,
                self.values.len(),
                other.x_min,
                other.h,
                other.values.len()
            )))
        }
    }

    /// `self <= other + tol` at every node and at both limits.
    pub fn is_ordered_below(&self, other: &GridField, tol: f64) -> Result<bool> {
        self.check_grid(other)?;
        Ok(self.left_limit <= other.left_limit + tol
            && self.right_limit <= other.right_limit + tol
            && self.values.iter().zip(&other.values).all(|(a, b)| *a <= *b + tol))
    }

    /// Largest `self - other` over nodes and limits.
    pub fn max_excess_over(&self, other: &GridField) -> Result<f64> {
        self.check_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .chain([self.left_limit - other.left_limit, self.right_limit - other.right_limit])
            .fold(f64::NEG_INFINITY, f64::max))
    }

    pub fn max_abs_diff(&self, other: &GridField) -> Result<f64> {
        self.check_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Direction of monotonicity including the limits, allowing `tol` of
    /// backwards motion between neighbours.
    pub fn monotonicity(&self, tol: f64) -> Monotonicity {
        let seq = || std::iter::once(self.left_limit).chain(self.values.iter().copied()).chain([self.right_limit]);
        let diffs: Vec<f64> = seq().zip(seq().skip(1)).map(|(a, b)| b - a).collect();
        let up = diffs.iter().all(|d| *d >= -tol);
        let down = diffs.iter().all(|d| *d <= tol);
        match (up, down) {
            (true, true) => Monotonicity::Constant,
            (true, false) => Monotonicity::Nondecreasing,
            (false, true) => Monotonicity::Nonincreasing,
            (false, false) => Monotonicity::NotMonotone,
        }
    }

    pub fn is_nondecreasing(&self, tol: f64) -> bool {
        matches!(self.monotonicity(tol), Monotonicity::Nondecreasing | Monotonicity::Constant)
    }

    pub fn is_nonincreasing(&self, tol: f64) -> bool {
        matches!(self.monotonicity(tol), Monotonicity::Nonincreasing | Monotonicity::Constant)
    }

    /// `x -> u(-x)`: values reversed, limits swapped, window mirrored.
    pub fn reflect(&self) -> GridField {
        let mut values = self.values.clone();
        values.reverse();
        Self::from_parts_unchecked(-self.x_max(), self.h, values, self.right_limit, self.left_limit)
    }

    /// `x -> u(x - k h)`: translate right by `k` cells, filling from the limits.
    pub fn shift_cells(&self, k: isize) -> GridField {
        let n = self.values.len() as isize;
        let values = (0..n)
            .map(|i| {
                let src = i - k;
                if src < 0 {
                    self.left_limit
                } else if src >= n {
                    self.right_limit
                } else {
                    self.values[src as usize]
                }
            })
            .collect();
        Self::from_parts_unchecked(self.x_min, self.h, values, self.left_limit, self.right_limit)
    }

    /// `x -> u(x + c)` by linear interpolation.
    pub fn advanced_by(&self, c: f64) -> GridField {
        let values = (0..self.values.len()).map(|i| self.value_at(self.x(i) + c)).collect();
        Self::from_parts_unchecked(self.x_min, self.h, values, self.left_limit, self.right_limit)
    }

    /// Pointwise maximum, limits included.
    pub fn max_with(&self, other: &GridField) -> Result<GridField> {
        self.check_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a.max(*b)).collect();
        Ok(Self::from_parts_unchecked(
            self.x_min,
            self.h,
            values,
            self.left_limit.max(other.left_limit),
            self.right_limit.max(other.right_limit),
        ))
    }

    /// Pointwise minimum, limits included.
    pub fn min_with(&self, other: &GridField) -> Result<GridField> {
        self.check_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a.min(*b)).collect();
        Ok(Self::from_parts_unchecked(
            self.x_min,
            self.h,
            values,
            self.left_limit.min(other.left_limit),
            self.right_limit.min(other.right_limit),
        ))
    }

    pub fn min_value(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .chain([self.left_limit, self.right_limit])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .chain([self.left_limit, self.right_limit])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// CSV dump: a `# {json}` metadata line, then `x,u` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header = FieldHeader {
            x_min: self.x_min,
            h: self.h,
            n: self.values.len(),
            left_limit: self.left_limit,
            right_limit: self.right_limit,
        };
        writeln!(w, "# {}", serde_json::to_string(&header)?)?;
        writeln!(w, "x,u")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{},{}", self.x(i), v)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(x0: f64, width: f64) -> GridField {
        GridField::ramp_profile(-10.0, 0.25, 81, x0, width).unwrap()
    }

    #[test]
    fn ramp_shapes() {
        let step = ramp(0.0, 0.0);
        assert_eq!(step.value_at(-0.25), 0.0);
        assert_eq!(step.value_at(0.25), 1.0);
        let r = ramp(0.0, 2.0);
        assert_eq!(r.value_at(1.0), 0.5);
        assert!(r.is_nondecreasing(0.0));
        assert_eq!(r.monotonicity(0.0), Monotonicity::Nondecreasing);
        assert_eq!((r.left_limit(), r.right_limit()), (0.0, 1.0));
    }

    #[test]
    fn ramp_outside_window_is_rejected() {
        assert!(matches!(
            GridField::ramp_profile(0.0, 0.1, 11, 0.5, 2.0),
            Err(Error::Window { .. })
        ));
        assert!(GridField::ramp_profile(0.0, 0.1, 11, 0.5, -1.0).is_err());
    }

    #[test]
    fn ordering() {
        let u = ramp(0.0, 2.0);
        assert!(u.is_ordered_below(&u, 0.0).unwrap());
        let zero = GridField::constant(-10.0, 0.25, 81, 0.0).unwrap();
        let one = GridField::constant(-10.0, 0.25, 81, 1.0).unwrap();
        assert!(zero.is_ordered_below(&one, 0.0).unwrap());
        let left = ramp(-1.0, 2.0);
        assert!(u.is_ordered_below(&left, 0.0).unwrap());
        assert!(!left.is_ordered_below(&u, 0.0).unwrap());
        let other = GridField::constant(-10.0, 0.5, 81, 0.0).unwrap();
        assert!(matches!(u.is_ordered_below(&other, 0.0), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn reflection() {
        let step = ramp(0.0, 0.0);
        let r = step.reflect();
        assert_eq!((r.left_limit(), r.right_limit()), (1.0, 0.0));
        assert_eq!(r.monotonicity(0.0), Monotonicity::Nonincreasing);
        assert_eq!(r.value_at(-0.25), 1.0);
        assert_eq!(r.value_at(0.25), 0.0);

        let u = GridField::new(-3.3, 0.1, (0..50).map(|i| (i as f64 * 0.37).sin()).collect(), 0.2, -0.4).unwrap();
        let back = u.reflect().reflect();
        assert_eq!(back.values(), u.values());
        assert_eq!((back.left_limit(), back.right_limit()), (u.left_limit(), u.right_limit()));
        assert!((back.x_min() - u.x_min()).abs() < 1e-12);

        let c = GridField::constant(-1.0, 0.1, 21, 0.3).unwrap().reflect();
        assert!(c.values().iter().all(|v| *v == 0.3));
    }

    #[test]
    fn interpolation_hits_nodes_exactly() {
        let u = GridField::new(-1.0, 0.1, (0..21).map(|i| (i as f64).sqrt()).collect(), 0.0, 5.0).unwrap();
        for i in 0..u.len() {
            assert_eq!(u.value_at(u.x(i)), u.values()[i]);
        }
        assert_eq!(u.value_at(-5.0), 0.0);
        assert_eq!(u.value_at(5.0), 5.0);
    }

    #[test]
    fn shifts() {
        let u = ramp(0.0, 2.0);
        let s = u.shift_cells(4);
        assert_eq!(s.value_at(2.0), u.value_at(1.0));
        let a = u.advanced_by(1.0);
        assert_eq!(a.value_at(0.0), u.value_at(1.0));
    }

    #[test]
    fn csv_dump() {
        let u = ramp(0.0, 2.0);
        let mut buf = Vec::new();
        u.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        let meta: serde_json::Value = serde_json::from_str(lines.next().unwrap().trim_start_matches("# ")).unwrap();
        assert_eq!(meta["h"], 0.25);
        assert_eq!(meta["right_limit"], 1.0);
        assert_eq!(lines.next(), Some("x,u"));
        assert_eq!(lines.count(), 81);
    }
}
