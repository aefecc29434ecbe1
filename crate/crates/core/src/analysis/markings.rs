//! Bright road-marking bands in panoramic intensity images.

use crate::lidarimg::IntensityImage;

#[derive(Debug, Clone, PartialEq)]
pub struct MarkingDetection {
    pub n_rows: usize,
    pub n_cols: usize,
    /// Row-major, `value > threshold`.
    pub mask: Vec<bool>,
    /// Inclusive column ranges where more than half of each column is set.
    pub clusters: Vec<(usize, usize)>,
}

impl MarkingDetection {
    pub fn set_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// Thresholds the image and groups consecutive marking columns. Columns do
/// not wrap around the panorama seam.
pub fn detect_markings(image: &IntensityImage, threshold: f64) -> MarkingDetection {
    let mask: Vec<bool> = image.values.iter().map(|&v| v > threshold).collect();
    let mut clusters = Vec::new();
    let mut start = None;
    for c in 0..image.n_cols {
        let count = (0..image.n_rows).filter(|&r| mask[r * image.n_cols + c]).count();
        let marked = 2 * count > image.n_rows;
        match (marked, start) {
            (true, None) => start = Some(c),
            (false, Some(s)) => {
                clusters.push((s, c - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        clusters.push((s, image.n_cols - 1));
    }
    MarkingDetection {
        n_rows: image.n_rows,
        n_cols: image.n_cols,
        mask,
        clusters,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn banded(n_rows: usize, n_cols: usize, band: std::ops::Range<usize>) -> IntensityImage {
        let values = (0..n_rows * n_cols)
            .map(|i| if band.contains(&(i % n_cols)) { 0.9 } else { 0.2 })
            .collect();
        IntensityImage::new(n_rows, n_cols, values).unwrap()
    }

    #[test]
    fn band_is_one_cluster() {
        let img = banded(32, 100, 40..50);
        let d = detect_markings(&img, 0.5);
        assert_eq!(d.clusters, [(40, 49)]);
        assert_eq!(d.set_count(), 32 * 10);
        for (i, &m) in d.mask.iter().enumerate() {
            assert_eq!(m, (40..50).contains(&(i % 100)));
        }
    }

    #[test]
    fn background_and_high_threshold() {
        let plain = banded(8, 20, 0..0);
        let d = detect_markings(&plain, 0.5);
        assert_eq!(d.set_count(), 0);
        assert!(d.clusters.is_empty());
        assert!(detect_markings(&banded(8, 20, 5..15), 0.95).clusters.is_empty());
    }

    #[test]
    fn half_column_is_not_enough() {
        let mut img = banded(4, 3, 0..0);
        img.values[1] = 0.9;
        img.values[4] = 0.9;
        assert!(detect_markings(&img, 0.5).clusters.is_empty());
        img.values[7] = 0.9;
        assert_eq!(detect_markings(&img, 0.5).clusters, [(1, 1)]);
        let edge = banded(2, 5, 3..5);
        assert_eq!(detect_markings(&edge, 0.5).clusters, [(3, 4)]);
    }
}
