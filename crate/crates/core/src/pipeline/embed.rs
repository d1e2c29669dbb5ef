use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("embedder unavailable: {0}")]
pub struct EmbedderUnavailable(pub String);

pub trait Embedder: Send + Sync {
    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbedderUnavailable>;
}

/// Feature-hashed character n-gram vectors, L2-normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HashingEmbedder {
    pub dim: usize,
    pub seed: u64,
    pub min_n: usize,
    pub max_n: usize,
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self {
            dim: 256,
            seed: 0x5eed,
            min_n: 2,
            max_n: 4,
        }
    }
}

/// FNV-1a over the seed bytes then the gram.
fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in seed.to_le_bytes().iter().chain(bytes) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

impl HashingEmbedder {
    pub fn vector(&self, text: &str) -> Vec<f64> {
        let dim = self.dim.max(1);
        let mut v = vec![0.0; dim];
        let chars: Vec<char> = text.chars().flat_map(char::to_lowercase).collect();
        let mut buf = String::new();
        for n in self.min_n.max(1)..=self.max_n {
            for w in chars.windows(n) {
                buf.clear();
                buf.extend(w);
                let h = fnv1a(self.seed, buf.as_bytes());
                let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
                v[(h % dim as u64) as usize] += sign;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }
}

impl Embedder for HashingEmbedder {
    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbedderUnavailable> {
        Ok(self.vector(text))
    }
}

pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return if na == nb { 0.0 } else { 1.0 };
    }
    (1.0 - dot / (na * nb)).max(0.0)
}

/// Indices of `k` medoids under cosine distance, sorted ascending.
///
/// Greedy build followed by swap passes until no swap lowers the total
/// distance. Ties go to the lower index, so the result depends only on the
/// input vectors.
pub fn k_medoids(points: &[Vec<f64>], k: usize) -> Vec<usize> {
    let n = points.len();
    let k = k.min(n);
    if k == 0 {
        return Vec::new();
    }
    let d: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| cosine_distance(&points[i], &points[j]))
                .collect()
        })
        .collect();
    let cost = |meds: &[usize]| -> f64 {
        (0..n)
            .map(|i| meds.iter().map(|&m| d[i][m]).fold(f64::INFINITY, f64::min))
            .sum()
    };

    let mut medoids: Vec<usize> = Vec::with_capacity(k);
    while medoids.len() < k {
        let best = (0..n)
            .filter(|c| !medoids.contains(c))
            .map(|c| {
                let mut trial = medoids.clone();
                trial.push(c);
                (cost(&trial), c)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .expect("candidates remain while fewer than n medoids");
        medoids.push(best.1);
    }

    let mut current = cost(&medoids);
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for slot in 0..k {
            for c in (0..n).filter(|c| !medoids.contains(c)) {
                let mut trial = medoids.clone();
                trial[slot] = c;
                let t = cost(&trial);
                if t < current - 1e-12 && best.is_none_or(|(b, _, _)| t < b) {
                    best = Some((t, slot, c));
                }
            }
        }
        match best {
            Some((t, slot, c)) => {
                medoids[slot] = c;
                current = t;
            }
            None => break,
        }
    }
    medoids.sort_unstable();
    medoids
}

/// Cluster index of each point: its nearest medoid.
pub fn assign(points: &[Vec<f64>], medoids: &[usize]) -> Vec<usize> {
    points
        .iter()
        .map(|p| {
            medoids
                .iter()
                .enumerate()
                .map(|(ci, &m)| (cosine_distance(p, &points[m]), ci))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                .map_or(0, |(_, ci)| ci)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedding_is_deterministic_and_unit() {
        let e = HashingEmbedder::default();
        let a = e.vector("SELECT count(*) FROM t");
        assert_eq!(a, e.vector("SELECT count(*) FROM t"));
        assert_eq!(a.len(), 256);
        assert!((a.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(cosine_distance(&a, &e.vector("select COUNT(*) from t")) < 1e-9);
        assert!(e.vector("").iter().all(|x| *x == 0.0));
    }

    #[test]
    fn medoids_pick_one_per_blob() {
        let pts = vec![
            vec![1.0, 0.0, 0.0],
            vec![0.95, 0.05, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.05, 0.97, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![0.0, 0.1, 0.99],
        ];
        let m = k_medoids(&pts, 3);
        assert_eq!(m.len(), 3);
        let clusters = assign(&pts, &m);
        assert_eq!(clusters[0], clusters[1]);
        assert_eq!(clusters[2], clusters[3]);
        assert_eq!(clusters[4], clusters[5]);
        assert_eq!(k_medoids(&pts[..1], 3), [0]);
        assert!(k_medoids(&[], 3).is_empty());
    }
}
