//! Binary model file.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! "STA1"
//! u32 × 8   variant (0 transE, 1 transH, 2 transR), d, m, #users, #POIs,
//!           #relations, #content patterns, epochs completed
//! f32 rows  users, POIs, relation vectors, then per relation the d×m
//!           projection (transR) or the d-dim normal (transH); then the same
//!           relation blocks for content patterns
//! vocab     users, POIs, relations ("slot:region"), content patterns
//!           ("word:region"); each string is a u32 byte length plus UTF-8
//! u8        1 if a discretizer follows, else 0
//!   u32 time scheme, i32 UTC offset, u32 #centroids, f64 × 2 per centroid,
//!   u8 region-table flag; if set: u32 #names + strings, u32 #entries +
//!   (string key, u32 region) pairs
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::embedding::{to_f32_towards_zero, ModelParams, RelationSet, Variant};
use crate::ingest::{Discretizer, Interner, RegionLookup, RegionModel, TimeScheme, Vocab};
use crate::linalg::Matrix;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"STA1";

/// Everything needed to serve recommendations from a trained run.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub params: ModelParams,
    pub vocab: Vocab,
    pub discretizer: Option<Discretizer>,
    pub epochs_done: u32,
}

impl Model {
    pub fn new(
        params: ModelParams,
        vocab: Vocab,
        discretizer: Option<Discretizer>,
        epochs_done: u32,
    ) -> Result<Self> {
        let sizes = params.sizes();
        let check = |what: &str, vocab: usize, params: usize| {
            if vocab == params {
                Ok(())
            } else {
                Err(Error::ModelFile(format!(
                    "{what} vocabulary has {vocab} entries but the parameters have {params} rows"
                )))
            }
        };
        check("user", vocab.users.len(), sizes.users)?;
        check("POI", vocab.pois.len(), sizes.pois)?;
        check("relation", vocab.relations.len(), sizes.relations)?;
        check("content", vocab.content.len(), sizes.content)?;
        Ok(Model {
            params,
            vocab,
            discretizer,
            epochs_done,
        })
    }
}

pub fn write_model_file(path: &Path, model: &Model) -> Result<()> {
    let file = File::create(path).map_err(|source| Error::File {
        path: path.display().to_string(),
        source,
    })?;
    let mut w = BufWriter::new(file);
    write_model(&mut w, model)?;
    w.flush()?;
    Ok(())
}

pub fn read_model_file(path: &Path) -> Result<Model> {
    let file = File::open(path).map_err(|source| Error::File {
        path: path.display().to_string(),
        source,
    })?;
    read_model(BufReader::new(file))
}

pub fn write_model<W: Write>(mut w: W, model: &Model) -> Result<()> {
    let p = &model.params;
    let sizes = p.sizes();
    w.write_all(MAGIC)?;
    for x in [
        p.variant().code(),
        p.dim() as u32,
        p.rel_dim() as u32,
        sizes.users as u32,
        sizes.pois as u32,
        sizes.relations as u32,
        sizes.content as u32,
        model.epochs_done,
    ] {
        w.write_all(&x.to_le_bytes())?;
    }
    write_floats(&mut w, p.users.as_slice())?;
    write_floats(&mut w, p.pois.as_slice())?;
    for rs in [&p.visits, &p.content] {
        write_floats(&mut w, rs.vectors.as_slice())?;
        match p.variant() {
            Variant::TransR => {
                for m in &rs.projections {
                    write_floats(&mut w, m.as_slice())?;
                }
            }
            Variant::TransH => write_floats(&mut w, rs.normals.as_slice())?,
            Variant::TransE => {}
        }
    }
    let v = &model.vocab;
    write_strings(&mut w, v.users.keys().iter().map(String::as_str))?;
    write_strings(&mut w, v.pois.keys().iter().map(String::as_str))?;
    let relations: Vec<String> = v.relations.keys().iter().map(ToString::to_string).collect();
    write_strings(&mut w, relations.iter().map(String::as_str))?;
    let content: Vec<String> = v.content.keys().iter().map(ToString::to_string).collect();
    write_strings(&mut w, content.iter().map(String::as_str))?;

    match &model.discretizer {
        None => w.write_all(&[0])?,
        Some(d) => {
            w.write_all(&[1])?;
            w.write_all(&d.time_scheme().code().to_le_bytes())?;
            w.write_all(&d.utc_offset_secs().to_le_bytes())?;
            let centroids = d.region_model().centroids();
            w.write_all(&(centroids.len() as u32).to_le_bytes())?;
            for c in centroids {
                w.write_all(&c[0].to_le_bytes())?;
                w.write_all(&c[1].to_le_bytes())?;
            }
            match d.lookup() {
                None => w.write_all(&[0])?,
                Some(l) => {
                    w.write_all(&[1])?;
                    write_strings(&mut w, l.names().iter().map(String::as_str))?;
                    let entries = l.entries();
                    w.write_all(&(entries.len() as u32).to_le_bytes())?;
                    for (key, region) in entries {
                        write_string(&mut w, key)?;
                        w.write_all(&region.to_le_bytes())?;
                    }
                }
            }
        }
    }
    Ok(())
}

fn write_floats<W: Write>(w: &mut W, xs: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(xs.len() * 4);
    for &x in xs {
        buf.extend_from_slice(&to_f32_towards_zero(x).to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn write_string<W: Write>(w: &mut W, s: &str) -> Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn write_strings<'a, W: Write>(
    w: &mut W,
    items: impl ExactSizeIterator<Item = &'a str>,
) -> Result<()> {
    w.write_all(&(items.len() as u32).to_le_bytes())?;
    for s in items {
        write_string(w, s)?;
    }
    Ok(())
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner.read_exact(&mut buf).map_err(truncated)?;
        Ok(buf)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes::<1>()?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }

    fn i32(&mut self) -> Result<i32> {
        Ok(i32::from_le_bytes(self.bytes()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Matrix> {
        let n = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::ModelFile("table size overflows".into()))?;
        let mut buf = Vec::new();
        (&mut self.inner).take(n as u64).read_to_end(&mut buf)?;
        if buf.len() != n {
            return Err(truncated(std::io::ErrorKind::UnexpectedEof.into()));
        }
        let data = buf
            .chunks_exact(4)
            .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
            .collect();
        Ok(Matrix::from_vec(rows, cols, data))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let mut buf = Vec::new();
        (&mut self.inner).take(len as u64).read_to_end(&mut buf)?;
        if buf.len() != len {
            return Err(truncated(std::io::ErrorKind::UnexpectedEof.into()));
        }
        String::from_utf8(buf).map_err(|_| Error::ModelFile("vocabulary entry is not UTF-8".into()))
    }

    fn strings(&mut self) -> Result<Vec<String>> {
        let n = self.u32()?;
        (0..n).map(|_| self.string()).collect()
    }

    fn relation_set(
        &mut self,
        variant: Variant,
        n: usize,
        d: usize,
        m: usize,
    ) -> Result<RelationSet> {
        let vectors = self.matrix(n, m)?;
        let (projections, normals) = match variant {
            Variant::TransR => (
                (0..n).map(|_| self.matrix(d, m)).collect::<Result<_>>()?,
                Matrix::zeros(0, d),
            ),
            Variant::TransH => (Vec::new(), self.matrix(n, d)?),
            Variant::TransE => (Vec::new(), Matrix::zeros(0, d)),
        };
        Ok(RelationSet {
            vectors,
            projections,
            normals,
        })
    }
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::ModelFile("unexpected end of file".into())
    } else {
        Error::Io(e)
    }
}

fn interner<K, F>(keys: Vec<String>, what: &str, parse: F) -> Result<Interner<K>>
where
    K: Clone + Eq + std::hash::Hash,
    F: Fn(&str) -> Result<K>,
{
    let keys = keys.iter().map(|k| parse(k)).collect::<Result<Vec<K>>>()?;
    Interner::from_keys(keys).map_err(|_| Error::ModelFile(format!("duplicate {what} key")))
}

pub fn read_model<R: Read>(inner: R) -> Result<Model> {
    let mut r = Reader { inner };
    if &r.bytes::<4>()? != MAGIC {
        return Err(Error::ModelFile("bad magic; not a model file".into()));
    }
    let variant_code = r.u32()?;
    let variant = Variant::from_code(variant_code)
        .ok_or_else(|| Error::ModelFile(format!("unknown variant code {variant_code}")))?;
    let mut header = [0usize; 6];
    for h in &mut header {
        *h = r.u32()? as usize;
    }
    let [d, m, users, pois, relations, content] = header;
    let epochs_done = r.u32()?;
    let user_emb = r.matrix(users, d)?;
    let poi_emb = r.matrix(pois, d)?;
    let visits = r.relation_set(variant, relations, d, m)?;
    let content_set = r.relation_set(variant, content, d, m)?;
    let params = ModelParams::from_parts(variant, user_emb, poi_emb, visits, content_set)
        .map_err(|e| Error::ModelFile(e.to_string()))?;

    let vocab = Vocab {
        users: interner(r.strings()?, "user", |s| Ok(s.to_string()))?,
        pois: interner(r.strings()?, "POI", |s| Ok(s.to_string()))?,
        relations: interner(r.strings()?, "relation", |s| s.parse())?,
        content: interner(r.strings()?, "content", |s| s.parse())?,
    };

    let discretizer = match r.u8()? {
        0 => None,
        1 => {
            let code = r.u32()?;
            let time = TimeScheme::from_code(code)
                .ok_or_else(|| Error::ModelFile(format!("unknown time scheme code {code}")))?;
            let offset = r.i32()?;
            let n = r.u32()?;
            let centroids = (0..n)
                .map(|_| Ok([r.f64()?, r.f64()?]))
                .collect::<Result<Vec<_>>>()?;
            let lookup = match r.u8()? {
                0 => None,
                1 => {
                    let names = r.strings()?;
                    let n = r.u32()?;
                    let entries = (0..n)
                        .map(|_| Ok((r.string()?, r.u32()?)))
                        .collect::<Result<Vec<_>>>()?;
                    Some(RegionLookup::from_parts(names, entries))
                }
                f => return Err(Error::ModelFile(format!("bad region-table flag {f}"))),
            };
            Some(Discretizer::new(
                time,
                offset,
                RegionModel::from_centroids(centroids),
                lookup,
            ))
        }
        f => return Err(Error::ModelFile(format!("bad discretizer flag {f}"))),
    };
    let mut trailing = [0u8; 1];
    if r.inner.read(&mut trailing)? != 0 {
        return Err(Error::ModelFile("trailing bytes after model".into()));
    }
    Model::new(params, vocab, discretizer, epochs_done)
}
