use super::descriptor::{squared_distance, Descriptor};

/// A correspondence between descriptor `index_a` of the first set and
/// `index_b` of the second.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub index_a: usize,
    pub index_b: usize,
    /// Euclidean distance between the two descriptors.
    pub distance: f64,
}

/// Index of the smallest value; ties go to the lower index.
fn argmin(values: impl Iterator<Item = f64>) -> Option<(usize, f64)> {
    values.enumerate().fold(None, |best, (i, v)| match best {
        Some((_, b)) if v >= b => best,
        _ => Some((i, v)),
    })
}

/// Brute-force nearest neighbour matching by L2 distance. With
/// `cross_check`, a pair survives only if each side is the other's nearest.
pub fn match_bruteforce(a: &[Descriptor], b: &[Descriptor], cross_check: bool) -> Vec<Match> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let nb = b.len();
    let dist: Vec<f64> = a
        .iter()
        .flat_map(|da| b.iter().map(move |db| squared_distance(&da.0, &db.0)))
        .collect();
    let best_b: Vec<usize> = (0..a.len())
        .map(|i| argmin(dist[i * nb..(i + 1) * nb].iter().copied()).unwrap().0)
        .collect();
    let best_a: Vec<usize> = if cross_check {
        (0..nb)
            .map(|j| argmin((0..a.len()).map(|i| dist[i * nb + j])).unwrap().0)
            .collect()
    } else {
        Vec::new()
    };
    best_b
        .iter()
        .enumerate()
        .filter(|&(i, &j)| !cross_check || best_a[j] == i)
        .map(|(i, &j)| Match {
            index_a: i,
            index_b: j,
            distance: dist[i * nb + j].sqrt(),
        })
        .collect()
}
