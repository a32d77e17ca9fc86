//! Tab-separated on-disk artifacts: vocabularies, triples and split manifests.

use std::io::{BufRead, Write};
use std::str::FromStr;

use super::discretize::{Discretizer, RegionLookup};
use super::region::RegionModel;
use super::split::{Split, SplitLabel};
use super::time::TimeScheme;
use super::triples::Triple;
use super::vocab::{ContentKey, Interner, Pattern, Vocab};
use crate::{Error, Result};

/// `kind<TAB>key<TAB>id`, grouped by kind in id order.
pub fn write_vocab<W: Write>(mut w: W, vocab: &Vocab) -> Result<()> {
    for (id, k) in vocab.users.keys().iter().enumerate() {
        writeln!(w, "user\t{k}\t{id}")?;
    }
    for (id, k) in vocab.pois.keys().iter().enumerate() {
        writeln!(w, "poi\t{k}\t{id}")?;
    }
    for (id, k) in vocab.relations.keys().iter().enumerate() {
        writeln!(w, "relation\t{k}\t{id}")?;
    }
    for (id, k) in vocab.content.keys().iter().enumerate() {
        writeln!(w, "content\t{k}\t{id}")?;
    }
    Ok(())
}

pub fn read_vocab<R: BufRead>(r: R) -> Result<Vocab> {
    let mut users = Vec::new();
    let mut pois = Vec::new();
    let mut relations = Vec::new();
    let mut content = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let bad = || Error::Format(format!("vocab line {}: {line:?}", n + 1));
        let mut cols = line.split('\t');
        let (kind, key, id) = match (cols.next(), cols.next(), cols.next(), cols.next()) {
            (Some(a), Some(b), Some(c), None) => (a, b, c),
            _ => return Err(bad()),
        };
        let id: usize = id.parse().map_err(|_| bad())?;
        let expect = match kind {
            "user" => push(&mut users, key.to_string()),
            "poi" => push(&mut pois, key.to_string()),
            "relation" => push(&mut relations, Pattern::from_str(key)?),
            "content" => push(&mut content, ContentKey::from_str(key)?),
            _ => return Err(bad()),
        };
        if expect != id {
            return Err(bad());
        }
    }
    Ok(Vocab {
        users: Interner::from_keys(users)?,
        pois: Interner::from_keys(pois)?,
        relations: Interner::from_keys(relations)?,
        content: Interner::from_keys(content)?,
    })
}

fn push<T>(v: &mut Vec<T>, x: T) -> usize {
    v.push(x);
    v.len() - 1
}

/// `head<TAB>relation<TAB>tail` per line.
pub fn write_triples<W: Write>(mut w: W, triples: &[Triple]) -> Result<()> {
    for t in triples {
        writeln!(w, "{}\t{}\t{}", t.head, t.relation, t.tail)?;
    }
    Ok(())
}

pub fn read_triples<R: BufRead>(r: R) -> Result<Vec<Triple>> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let ids: Vec<u32> = line
            .split('\t')
            .map(|s| s.parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Format(format!("triples line {}: {line:?}", n + 1)))?;
        match ids[..] {
            [h, r, t] => out.push(Triple::new(h, r, t)),
            _ => return Err(Error::Format(format!("triples line {}: {line:?}", n + 1))),
        }
    }
    Ok(out)
}

/// `record-index<TAB>label` per input record.
pub fn write_split_manifest<W: Write>(mut w: W, split: &Split) -> Result<()> {
    for (i, l) in split.labels.iter().enumerate() {
        writeln!(w, "{i}\t{l}")?;
    }
    Ok(())
}

pub fn read_split_manifest<R: BufRead>(r: R) -> Result<Split> {
    let mut labels = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let (idx, label) = line
            .split_once('\t')
            .ok_or_else(|| Error::Format(format!("split line {line:?}")))?;
        if idx.parse::<usize>().ok() != Some(labels.len()) {
            return Err(Error::Format(format!("split line {line:?} out of order")));
        }
        labels.push(SplitLabel::from_str(label)?);
    }
    Ok(Split { labels })
}

/// Fitted discretizer as tagged lines: `time`, `utc_offset_secs`, one
/// `centroid<TAB>lat<TAB>lon` per region, and for region-file setups the
/// `region_name` and `region_key<TAB>key<TAB>id` table. Floats are written in
/// shortest round-trip form, so reading gives back the same bits.
pub fn write_discretizer<W: Write>(mut w: W, disc: &Discretizer) -> Result<()> {
    writeln!(w, "time\t{}", disc.time_scheme())?;
    writeln!(w, "utc_offset_secs\t{}", disc.utc_offset_secs())?;
    for [lat, lon] in disc.region_model().centroids() {
        writeln!(w, "centroid\t{lat}\t{lon}")?;
    }
    if let Some(lookup) = disc.lookup() {
        for name in lookup.names() {
            writeln!(w, "region_name\t{name}")?;
        }
        for (key, id) in lookup.entries() {
            writeln!(w, "region_key\t{key}\t{id}")?;
        }
    }
    Ok(())
}

pub fn read_discretizer<R: BufRead>(r: R) -> Result<Discretizer> {
    let mut time = None;
    let mut offset = None;
    let mut centroids = Vec::new();
    let mut names = Vec::new();
    let mut entries = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let bad = || Error::Format(format!("discretizer line {}: {line:?}", n + 1));
        let cols: Vec<&str> = line.split('\t').collect();
        match cols[..] {
            ["time", scheme] => time = Some(TimeScheme::from_str(scheme)?),
            ["utc_offset_secs", secs] => offset = Some(secs.parse::<i32>().map_err(|_| bad())?),
            ["centroid", lat, lon] => centroids.push([
                lat.parse::<f64>().map_err(|_| bad())?,
                lon.parse::<f64>().map_err(|_| bad())?,
            ]),
            ["region_name", name] => names.push(name.to_string()),
            ["region_key", key, id] => {
                entries.push((key.to_string(), id.parse::<u32>().map_err(|_| bad())?))
            }
            _ => return Err(bad()),
        }
    }
    let missing = |what: &str| Error::Format(format!("discretizer has no {what} line"));
    if centroids.is_empty() {
        return Err(missing("centroid"));
    }
    let lookup = (!names.is_empty()).then(|| RegionLookup::from_parts(names, entries));
    Ok(Discretizer::new(
        time.ok_or_else(|| missing("time"))?,
        offset.ok_or_else(|| missing("utc_offset_secs"))?,
        RegionModel::from_centroids(centroids),
        lookup,
    ))
}
