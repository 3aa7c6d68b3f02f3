use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Haldane map function: recombination fraction for a distance in cM.
pub fn haldane(distance_cm: f64) -> f64 {
    0.5 * (1.0 - (-2.0 * distance_cm / 100.0).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chromosome {
    pub id: String,
    pub markers: Vec<String>,
    /// Marker positions in cM, strictly increasing.
    pub positions: Vec<f64>,
}

impl Chromosome {
    pub fn len(&self) -> usize {
        self.markers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.markers.is_empty()
    }
}

/// A genome position, identified by chromosome id and cM coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Locus {
    pub chromosome: String,
    pub position: f64,
}

impl Locus {
    pub fn new(chromosome: impl Into<String>, position: f64) -> Self {
        Self {
            chromosome: chromosome.into(),
            position,
        }
    }
}

/// Positions closer than this are the same locus.
pub(crate) const POSITION_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneticMap {
    chromosomes: Vec<Chromosome>,
}

impl GeneticMap {
    pub fn new(chromosomes: Vec<Chromosome>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        let mut ids = std::collections::HashSet::new();
        for chr in &chromosomes {
            if !ids.insert(chr.id.as_str()) {
                return Err(Error::InvalidInput(format!(
                    "duplicate chromosome id {}",
                    chr.id
                )));
            }
            if chr.markers.len() != chr.positions.len() {
                return Err(Error::InvalidInput(format!(
                    "chromosome {}: {} marker names but {} positions",
                    chr.id,
                    chr.markers.len(),
                    chr.positions.len()
                )));
            }
            if chr.markers.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "chromosome {} has no markers",
                    chr.id
                )));
            }
            for (k, &p) in chr.positions.iter().enumerate() {
                if !p.is_finite() || p < 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "chromosome {}: invalid position {p}",
                        chr.id
                    )));
                }
                if k > 0 && p <= chr.positions[k - 1] {
                    return Err(Error::InvalidInput(format!(
                        "chromosome {}: positions must be strictly increasing",
                        chr.id
                    )));
                }
            }
            for name in &chr.markers {
                if !seen.insert(name.as_str()) {
                    return Err(Error::InvalidInput(format!("duplicate marker name {name}")));
                }
            }
        }
        Ok(Self { chromosomes })
    }

    /// `n_chromosomes` chromosomes of `length` cM, each carrying `n_markers`
    /// equally spaced markers from 0 to `length`. Chromosomes are named
    /// "1", "2", ... and markers `D{chr}M{k}`.
    pub fn uniform(n_chromosomes: usize, length: f64, n_markers: usize) -> Result<Self> {
        if n_chromosomes == 0 || n_markers == 0 {
            return Err(Error::InvalidInput("empty map".into()));
        }
        let chromosomes = (1..=n_chromosomes)
            .map(|c| {
                let positions = if n_markers == 1 {
                    vec![0.0]
                } else {
                    (0..n_markers)
                        .map(|k| length * k as f64 / (n_markers - 1) as f64)
                        .collect()
                };
                Chromosome {
                    id: c.to_string(),
                    markers: (1..=n_markers).map(|k| format!("D{c}M{k}")).collect(),
                    positions,
                }
            })
            .collect();
        Self::new(chromosomes)
    }

    pub fn chromosomes(&self) -> &[Chromosome] {
        &self.chromosomes
    }

    pub fn n_markers(&self) -> usize {
        self.chromosomes.iter().map(|c| c.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.chromosomes.is_empty()
    }

    pub fn chromosome_index(&self, id: &str) -> Option<usize> {
        self.chromosomes.iter().position(|c| c.id == id)
    }

    /// Global column offset of each chromosome's first marker.
    pub fn offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.chromosomes
            .iter()
            .map(|c| {
                let o = acc;
                acc += c.len();
                o
            })
            .collect()
    }

    /// Global marker index at `locus`, if a marker sits there.
    pub fn marker_at(&self, locus: &Locus) -> Option<usize> {
        let ci = self.chromosome_index(&locus.chromosome)?;
        let offset = self.offsets()[ci];
        self.chromosomes[ci]
            .positions
            .iter()
            .position(|p| (p - locus.position).abs() < POSITION_TOLERANCE)
            .map(|k| offset + k)
    }

    /// Locus of the global marker index.
    pub fn locus_of(&self, marker: usize) -> Option<Locus> {
        let mut rest = marker;
        for chr in &self.chromosomes {
            if rest < chr.len() {
                return Some(Locus::new(chr.id.clone(), chr.positions[rest]));
            }
            rest -= chr.len();
        }
        None
    }

    /// All marker names in global column order.
    pub fn marker_names(&self) -> impl Iterator<Item = &str> {
        self.chromosomes
            .iter()
            .flat_map(|c| c.markers.iter().map(String::as_str))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn haldane_values() {
        assert_eq!(haldane(0.0), 0.0);
        assert!((haldane(20.0) - 0.164_840).abs() < 1e-6);
        assert!(haldane(1e6) < 0.5 + 1e-12);
    }

    #[test]
    fn uniform_map_layout() {
        let map = GeneticMap::uniform(5, 100.0, 10).unwrap();
        assert_eq!(map.n_markers(), 50);
        let c = &map.chromosomes()[0];
        assert_eq!(c.positions[0], 0.0);
        assert!((c.positions[9] - 100.0).abs() < 1e-12);
        assert_eq!(map.offsets(), vec![0, 10, 20, 30, 40]);
        assert_eq!(map.marker_at(&Locus::new("3", c.positions[4])), Some(24));
        assert_eq!(map.locus_of(24).unwrap().chromosome, "3");
    }

    #[test]
    fn rejects_bad_maps() {
        let bad = Chromosome {
            id: "1".into(),
            markers: vec!["a".into(), "b".into()],
            positions: vec![10.0, 5.0],
        };
        assert!(GeneticMap::new(vec![bad]).is_err());
        let dup = vec![
            Chromosome {
                id: "1".into(),
                markers: vec!["a".into()],
                positions: vec![0.0],
            },
            Chromosome {
                id: "2".into(),
                markers: vec!["a".into()],
                positions: vec![0.0],
            },
        ];
        assert!(GeneticMap::new(dup).is_err());
        assert!(GeneticMap::uniform(0, 100.0, 10).is_err());
    }
}
