//! Dense `(t, j, ℓ)` tables over input position, segment start and segment length.

/// A value per candidate segment `y_{j+1:j+ℓ}` emitted by input element `t`.
///
/// `t` is zero-based (row `t` belongs to input element `x_{t+1}`), `j` ranges
/// over `0..=T` and `ℓ` over `0..=L`. Cells with `j + ℓ > T` hold `fill`.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentTable {
    input_len: usize,
    target_len: usize,
    max_seg_len: usize,
    fill: f64,
    data: Vec<f64>,
}

impl SegmentTable {
    pub fn new(input_len: usize, target_len: usize, max_seg_len: usize, fill: f64) -> Self {
        Self {
            input_len,
            target_len,
            max_seg_len,
            fill,
            data: vec![fill; input_len * (target_len + 1) * (max_seg_len + 1)],
        }
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn target_len(&self) -> usize {
        self.target_len
    }

    pub fn max_seg_len(&self) -> usize {
        self.max_seg_len
    }

    /// Longest segment that can start at `j`.
    pub fn max_len_at(&self, j: usize) -> usize {
        self.max_seg_len.min(self.target_len - j)
    }

    #[inline]
    fn offset(&self, t: usize, j: usize, len: usize) -> usize {
        (t * (self.target_len + 1) + j) * (self.max_seg_len + 1) + len
    }

    #[inline]
    pub fn get(&self, t: usize, j: usize, len: usize) -> f64 {
        if t >= self.input_len || j > self.target_len || len > self.max_seg_len || j + len > self.target_len {
            return self.fill;
        }
        self.data[self.offset(t, j, len)]
    }

    #[inline]
    pub fn set(&mut self, t: usize, j: usize, len: usize, v: f64) {
        assert!(
            j + len <= self.target_len && len <= self.max_seg_len && t < self.input_len,
            "cell ({t}, {j}, {len}) outside table"
        );
        let o = self.offset(t, j, len);
        self.data[o] = v;
    }

    /// Entries `ℓ = 0..=max_len_at(j)` of row `(t, j)`.
    pub fn row(&self, t: usize, j: usize) -> &[f64] {
        let o = self.offset(t, j, 0);
        &self.data[o..=o + self.max_len_at(j)]
    }

    /// `[j][ℓ]` view of input row `t`, as used by the non-sequence recursion.
    pub fn input_row(&self, t: usize) -> Vec<Vec<f64>> {
        (0..=self.target_len)
            .map(|j| (0..=self.max_seg_len).map(|l| self.get(t, j, l)).collect())
            .collect()
    }

    pub fn same_shape(&self, other: &SegmentTable) -> bool {
        self.input_len == other.input_len
            && self.target_len == other.target_len
            && self.max_seg_len == other.max_seg_len
    }

    /// Iterates `(t, j, ℓ, value)` over valid cells.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, usize, f64)> + '_ {
        (0..self.input_len).flat_map(move |t| {
            (0..=self.target_len).flat_map(move |j| {
                (0..=self.max_len_at(j)).map(move |l| (t, j, l, self.get(t, j, l)))
            })
        })
    }
}
