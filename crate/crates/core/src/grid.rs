use rayon::prelude::*;

/// Row-major `height × width` container used for per-pixel and per-token maps.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T> Grid<T> {
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), width * height, "grid data length");
        Self {
            width,
            height,
            data,
        }
    }

    /// Evaluates `f(x, y)` for every cell, one rayon task per row.
    ///
    /// Cells are independent, so the result does not depend on the pool size.
    pub fn from_fn_par<F>(width: usize, height: usize, f: F) -> Self
    where
        T: Send,
        F: Fn(usize, usize) -> T + Sync,
    {
        let data = (0..height)
            .into_par_iter()
            .flat_map_iter(|y| {
                let f = &f;
                (0..width).map(move |x| f(x, y))
            })
            .collect();
        Self::from_vec(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.data[y * self.width + x]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.data.iter()
    }

    /// Iterates `(x, y, &value)` in row-major order.
    pub fn indexed(&self) -> impl Iterator<Item = (usize, usize, &T)> {
        let w = self.width;
        self.data
            .iter()
            .enumerate()
            .map(move |(i, v)| (i % w, i / w, v))
    }

    pub fn map<U, F: Fn(&T) -> U>(&self, f: F) -> Grid<U> {
        Grid::from_vec(self.width, self.height, self.data.iter().map(f).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_fill_is_row_major() {
        let g = Grid::from_fn_par(3, 2, |x, y| (x, y));
        assert_eq!(g.as_slice()[4], (1, 1));
        assert_eq!(*g.get(2, 1), (2, 1));
        let idx: Vec<_> = g.indexed().map(|(x, y, _)| (x, y)).collect();
        assert_eq!(idx, g.as_slice().to_vec());
    }
}
