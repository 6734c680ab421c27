//! Associative memory registers.
//!
//! A register is an `n × rows` boolean table. Columns are attributes, rows are
//! the discrete values an attribute can take. Registering a function switches
//! on one cell per defined attribute; the table then holds the relation formed
//! by overlapping every registered function, which includes functions that
//! were never registered explicitly.
//!
//! Each column is stored as a packed bit set so per-column counts and run
//! scans stay cheap at the 64 × 512 end of the sweeps.

use rand::Rng;

use crate::error::{Error, Result};
use crate::function::DiscreteFunction;
use crate::sampling::sample_triangular;

const WORD_BITS: usize = 64;

/// Maximal contiguous run of switched-on cells in one column, inclusive.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ColumnRun {
    pub lo: usize,
    pub hi: usize,
}

impl ColumnRun {
    pub fn len(&self) -> usize {
        self.hi - self.lo + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, value: usize) -> bool {
        (self.lo..=self.hi).contains(&value)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Amr {
    n: usize,
    rows: usize,
    words_per_column: usize,
    cells: Vec<u64>,
    registered: u64,
}

impl Amr {
    /// Creates an empty register with `n` attributes and `rows` values.
    pub fn new(n: usize, rows: usize) -> Result<Self> {
        if n == 0 || rows == 0 {
            return Err(Error::InvalidShape { n, rows });
        }
        let words_per_column = rows.div_ceil(WORD_BITS);
        Ok(Amr {
            n,
            rows,
            words_per_column,
            cells: vec![0; n * words_per_column],
            registered: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of register operations applied so far.
    pub fn registered_count(&self) -> u64 {
        self.registered
    }

    fn column(&self, column: usize) -> &[u64] {
        let start = column * self.words_per_column;
        &self.cells[start..start + self.words_per_column]
    }

    pub fn is_on(&self, column: usize, value: usize) -> bool {
        assert!(column < self.n && value < self.rows);
        self.column(column)[value / WORD_BITS] >> (value % WORD_BITS) & 1 == 1
    }

    fn set(&mut self, column: usize, value: usize) {
        let idx = column * self.words_per_column + value / WORD_BITS;
        self.cells[idx] |= 1 << (value % WORD_BITS);
    }

    /// Number of switched-on cells in a column.
    pub fn column_count(&self, column: usize) -> usize {
        self.column(column)
            .iter()
            .map(|w| w.count_ones() as usize)
            .sum()
    }

    /// Switched-on values of a column in increasing order.
    pub fn column_values(&self, column: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.rows).filter(move |&v| self.is_on(column, v))
    }

    /// Number of switched-on cells in the whole table.
    pub fn count_on(&self) -> usize {
        self.cells.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// True if every cell switched on here is also on in `other`.
    pub fn is_subset_of(&self, other: &Amr) -> bool {
        self.n == other.n
            && self.rows == other.rows
            && self
                .cells
                .iter()
                .zip(&other.cells)
                .all(|(a, b)| a & !b == 0)
    }

    /// Overlaps `f` onto the table: cell `(i, f(i))` is switched on for every
    /// defined attribute. Fails without modifying the table if any value is
    /// out of range.
    pub fn register(&mut self, f: &DiscreteFunction) -> Result<()> {
        f.check(self.n, self.rows)?;
        for (i, v) in f.defined() {
            self.set(i, v);
        }
        self.registered += 1;
        Ok(())
    }

    /// Number of defined cue attributes whose cell is off.
    pub fn misses(&self, cue: &DiscreteFunction) -> Result<usize> {
        cue.check(self.n, self.rows)?;
        Ok(cue.defined().filter(|&(i, v)| !self.is_on(i, v)).count())
    }

    /// Tests inclusion of the cue in the stored relation, allowing up to
    /// `tolerance` defined attributes to miss.
    pub fn recognize(&self, cue: &DiscreteFunction, tolerance: usize) -> Result<bool> {
        Ok(self.misses(cue)? <= tolerance)
    }

    /// The run of on cells around `cue_value` in `column`.
    ///
    /// If the cue cell itself is off (a miss allowed by tolerance) the run is
    /// taken around the nearest on cell, preferring the smaller value on ties.
    pub fn column_run(&self, column: usize, cue_value: usize) -> Result<ColumnRun> {
        let anchor = self.nearest_on(column, cue_value)?;
        let mut lo = anchor;
        while lo > 0 && self.is_on(column, lo - 1) {
            lo -= 1;
        }
        let mut hi = anchor;
        while hi + 1 < self.rows && self.is_on(column, hi + 1) {
            hi += 1;
        }
        Ok(ColumnRun { lo, hi })
    }

    /// Nearest on cell to `value` in `column`, ties toward the smaller value.
    pub fn nearest_on(&self, column: usize, value: usize) -> Result<usize> {
        if column >= self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                got: column + 1,
            });
        }
        if value >= self.rows {
            return Err(Error::ValueOutOfRange {
                attribute: column,
                value,
                rows: self.rows,
            });
        }
        for d in 0..self.rows {
            if d <= value && self.is_on(column, value - d) {
                return Ok(value - d);
            }
            if value + d < self.rows && self.is_on(column, value + d) {
                return Ok(value + d);
            }
        }
        Err(Error::EmptyColumn { column })
    }

    /// Constructive retrieval.
    ///
    /// Returns `None` when the cue is not recognized at `tolerance`. Otherwise
    /// every attribute gets a fresh value: for a defined cue attribute it is
    /// drawn from the triangular distribution over the column run around the
    /// cue (or around the nearest on cell, for a tolerated miss); for an
    /// undefined one it is drawn uniformly from the column's on cells.
    pub fn retrieve<R: Rng + ?Sized>(
        &self,
        cue: &DiscreteFunction,
        tolerance: usize,
        rng: &mut R,
    ) -> Result<Option<DiscreteFunction>> {
        if !self.recognize(cue, tolerance)? {
            return Ok(None);
        }
        let mut values = Vec::with_capacity(self.n);
        for column in 0..self.n {
            let v = match cue.get(column) {
                Some(cue_value) => {
                    let mode = self.nearest_on(column, cue_value)?;
                    let run = self.column_run(column, mode)?;
                    sample_triangular(run.lo, run.hi, mode, rng)
                }
                None => {
                    let count = self.column_count(column);
                    if count == 0 {
                        return Err(Error::EmptyColumn { column });
                    }
                    let k = rng.random_range(0..count);
                    self.column_values(column).nth(k).expect("k < count")
                }
            };
            values.push(v);
        }
        Ok(Some(DiscreteFunction::total(values)))
    }

    /// Sum over columns of `log2(μ_i)`, where `μ_i` is the number of on cells
    /// and empty columns contribute zero.
    pub fn pattern_count_log2(&self) -> f64 {
        (0..self.n)
            .map(|i| self.column_count(i))
            .filter(|&mu| mu > 0)
            .map(|mu| (mu as f64).log2())
            .sum()
    }

    /// Computational entropy: the mean over columns of `log2(μ_i)`.
    pub fn entropy(&self) -> f64 {
        self.pattern_count_log2() / self.n as f64
    }
}
