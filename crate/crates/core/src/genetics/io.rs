//! Map and cross file formats.
//!
//! Map file: CSV with header `marker,chromosome,position_cM`.
//!
//! Cross file: rotated CSV. The header row names the phenotype columns and
//! then the marker columns; the second and third rows give chromosome and cM
//! position for marker columns and are blank for phenotype columns. Data rows
//! follow, with genotypes coded `A`/`H`/`B` (AA/AB/BB) and `-` for missing.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use super::{Chromosome, F2Cross, GeneticMap, Genotype, GenotypeMatrix};
use crate::{Error, Result};

fn is_missing_phenotype(s: &str) -> bool {
    matches!(s.trim(), "" | "NA" | "-" | "NaN" | "nan")
}

pub fn read_map<R: Read>(reader: R) -> Result<GeneticMap> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::parse("map file", format!("missing column {name}")))
    };
    let (cm, cc, cp) = (col("marker")?, col("chromosome")?, col("position_cM")?);
    let mut order: Vec<String> = Vec::new();
    let mut by_chr: HashMap<String, Vec<(String, f64)>> = HashMap::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let chr = rec[cc].to_string();
        let pos: f64 = rec[cp].parse().map_err(|_| {
            Error::parse(format!("map file row {}", line + 2), format!("bad position {:?}", &rec[cp]))
        })?;
        if !by_chr.contains_key(&chr) {
            order.push(chr.clone());
        }
        by_chr.entry(chr).or_default().push((rec[cm].to_string(), pos));
    }
    let chromosomes = order
        .into_iter()
        .map(|id| {
            let mut markers = by_chr.remove(&id).unwrap();
            markers.sort_by(|a, b| a.1.total_cmp(&b.1));
            Chromosome {
                id,
                markers: markers.iter().map(|m| m.0.clone()).collect(),
                positions: markers.iter().map(|m| m.1).collect(),
            }
        })
        .collect();
    GeneticMap::new(chromosomes)
}

pub fn read_map_file(path: impl AsRef<Path>) -> Result<GeneticMap> {
    read_map(std::fs::File::open(path)?)
}

pub fn write_map<W: Write>(map: &GeneticMap, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["marker", "chromosome", "position_cM"])?;
    for chr in map.chromosomes() {
        for (name, pos) in chr.markers.iter().zip(&chr.positions) {
            w.write_record([name.as_str(), chr.id.as_str(), &pos.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// A cross as loaded from disk.
#[derive(Debug, Clone)]
pub struct LoadedCross {
    pub cross: F2Cross,
    /// Individuals dropped because at least one phenotype was missing.
    pub dropped: usize,
}

pub fn read_cross<R: Read>(reader: R) -> Result<LoadedCross> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = rdr.records();
    let mut next_row = |what: &str| -> Result<csv::StringRecord> {
        records
            .next()
            .ok_or_else(|| Error::parse("cross file", format!("missing {what} row")))?
            .map_err(Error::from)
    };
    let names = next_row("header")?;
    let chroms = next_row("chromosome")?;
    let positions = next_row("position")?;

    let n_pheno = chroms.iter().take_while(|c| c.is_empty()).count();
    if n_pheno == 0 {
        return Err(Error::parse("cross file", "no phenotype columns"));
    }
    if chroms.iter().skip(n_pheno).any(str::is_empty) {
        return Err(Error::parse(
            "cross file",
            "phenotype columns must precede all marker columns",
        ));
    }
    let trait_names: Vec<String> = names.iter().take(n_pheno).map(String::from).collect();

    // Group marker columns by chromosome, sorted by position within each.
    let mut chr_order: Vec<String> = Vec::new();
    let mut by_chr: HashMap<String, Vec<(usize, f64)>> = HashMap::new();
    for col in n_pheno..names.len() {
        let pos: f64 = positions[col].parse().map_err(|_| {
            Error::parse("cross file", format!("bad position for marker {}", &names[col]))
        })?;
        let chr = chroms[col].to_string();
        if !by_chr.contains_key(&chr) {
            chr_order.push(chr.clone());
        }
        by_chr.entry(chr).or_default().push((col, pos));
    }
    let mut column_order = Vec::new();
    let chromosomes: Vec<Chromosome> = chr_order
        .into_iter()
        .map(|id| {
            let mut cols = by_chr.remove(&id).unwrap();
            cols.sort_by(|a, b| a.1.total_cmp(&b.1));
            column_order.extend(cols.iter().map(|c| c.0));
            Chromosome {
                id,
                markers: cols.iter().map(|c| names[c.0].to_string()).collect(),
                positions: cols.iter().map(|c| c.1).collect(),
            }
        })
        .collect();
    let map = GeneticMap::new(chromosomes)?;

    let mut phenotypes = vec![Vec::new(); n_pheno];
    let mut genotypes = Vec::new();
    let mut dropped = 0;
    for (line, rec) in records.enumerate() {
        let rec = rec?;
        let row_no = line + 4;
        if rec.len() != names.len() {
            return Err(Error::parse(
                format!("cross file row {row_no}"),
                format!("expected {} fields, found {}", names.len(), rec.len()),
            ));
        }
        if (0..n_pheno).any(|t| is_missing_phenotype(&rec[t])) {
            dropped += 1;
            continue;
        }
        for (t, col) in phenotypes.iter_mut().enumerate() {
            let v: f64 = rec[t].parse().map_err(|_| {
                Error::parse(format!("cross file row {row_no}"), format!("bad phenotype {:?}", &rec[t]))
            })?;
            col.push(v);
        }
        for &c in &column_order {
            let g = Genotype::from_code(&rec[c]).ok_or_else(|| {
                Error::parse(format!("cross file row {row_no}"), format!("bad genotype code {:?}", &rec[c]))
            })?;
            genotypes.push(g);
        }
    }
    if dropped > 0 {
        log::info!("dropped {dropped} individuals with missing phenotypes");
    }
    let n = phenotypes[0].len();
    if n == 0 {
        return Err(Error::InvalidInput("cross has no complete individuals".into()));
    }
    let genotypes = GenotypeMatrix::new(n, map.n_markers(), genotypes)?;
    Ok(LoadedCross {
        cross: F2Cross::new(map, genotypes, phenotypes, trait_names)?,
        dropped,
    })
}

pub fn read_cross_file(path: impl AsRef<Path>) -> Result<LoadedCross> {
    read_cross(std::fs::File::open(path)?)
}

pub fn write_cross<W: Write>(cross: &F2Cross, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let t = cross.n_traits();
    let map = cross.map();
    let mut header: Vec<String> = cross.trait_names().to_vec();
    header.extend(map.marker_names().map(String::from));
    w.write_record(&header)?;
    let mut chrom_row = vec![String::new(); t];
    let mut pos_row = vec![String::new(); t];
    for chr in map.chromosomes() {
        for p in &chr.positions {
            chrom_row.push(chr.id.clone());
            pos_row.push(p.to_string());
        }
    }
    w.write_record(&chrom_row)?;
    w.write_record(&pos_row)?;
    let g = cross.genotypes();
    for i in 0..cross.n_individuals() {
        let mut row: Vec<String> = (0..t).map(|k| cross.phenotype(k)[i].to_string()).collect();
        row.extend(g.row(i).iter().map(|x| match x {
            Some(g) => g.code().to_string(),
            None => "-".to_string(),
        }));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Replace the cross's marker positions with those of `map`, matching
/// markers by name. Both must contain exactly the same marker set.
pub fn apply_map(cross: &F2Cross, map: GeneticMap) -> Result<F2Cross> {
    let old: HashMap<&str, usize> = cross
        .map()
        .marker_names()
        .enumerate()
        .map(|(i, n)| (n, i))
        .collect();
    if old.len() != map.n_markers() {
        return Err(Error::InvalidInput(format!(
            "map has {} markers, cross has {}",
            map.n_markers(),
            old.len()
        )));
    }
    let columns: Vec<usize> = map
        .marker_names()
        .map(|n| {
            old.get(n)
                .copied()
                .ok_or_else(|| Error::InvalidInput(format!("marker {n} not in cross")))
        })
        .collect::<Result<_>>()?;
    let g = cross.genotypes();
    let data = (0..g.n_individuals())
        .flat_map(|i| columns.iter().map(move |&c| g.get(i, c)))
        .collect();
    let genotypes = GenotypeMatrix::new(g.n_individuals(), columns.len(), data)?;
    F2Cross::new(
        map,
        genotypes,
        cross.phenotypes().to_vec(),
        cross.trait_names().to_vec(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const CROSS: &str = "\
y1,y2,m1,m2,m3
,,1,1,2
,,0,10.5,0
1.5,2,A,H,B
NA,3,A,A,A
-0.25,1e-3,B,-,H
";

    #[test]
    fn reads_rotated_cross() {
        let loaded = read_cross(CROSS.as_bytes()).unwrap();
        assert_eq!(loaded.dropped, 1);
        let c = loaded.cross;
        assert_eq!(c.trait_names(), ["y1", "y2"]);
        assert_eq!(c.n_individuals(), 2);
        assert_eq!(c.phenotype(1), [2.0, 1e-3]);
        assert_eq!(c.map().chromosomes().len(), 2);
        assert_eq!(c.genotypes().get(1, 1), None);
        assert_eq!(c.genotypes().get(1, 2), Some(Genotype::AB));
    }

    #[test]
    fn write_then_read_preserves_cross() {
        let c = read_cross(CROSS.as_bytes()).unwrap().cross;
        let mut buf = Vec::new();
        write_cross(&c, &mut buf).unwrap();
        let back = read_cross(buf.as_slice()).unwrap().cross;
        assert_eq!(back.map(), c.map());
        assert_eq!(back.genotypes(), c.genotypes());
        assert_eq!(back.phenotypes(), c.phenotypes());
    }

    #[test]
    fn map_file_round_trip_and_apply() {
        let c = read_cross(CROSS.as_bytes()).unwrap().cross;
        let text = "marker,chromosome,position_cM\nm3,2,5\nm2,1,20\nm1,1,1\n";
        let map = read_map(text.as_bytes()).unwrap();
        assert_eq!(map.chromosomes()[0].markers, ["m3"]);
        let moved = apply_map(&c, map.clone()).unwrap();
        assert_eq!(moved.genotypes().get(0, 0), Some(Genotype::BB));
        assert_eq!(moved.map().chromosomes()[1].positions, [1.0, 20.0]);
        let mut buf = Vec::new();
        write_map(&map, &mut buf).unwrap();
        assert_eq!(read_map(buf.as_slice()).unwrap(), map);
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(read_cross("y,m\n,1\n,0\n1,Q\n".as_bytes()).is_err());
        assert!(read_cross("m,y\n1,\n0,\nA,1\n".as_bytes()).is_err());
        assert!(read_cross("y,m\n,1\n".as_bytes()).is_err());
        assert!(read_map("marker,chromosome\nm,1\n".as_bytes()).is_err());
    }
}
