//! Binary model file. All integers and reals are little-endian; reals are
//! stored as their IEEE-754 bit patterns so a round trip is exact. The
//! layout is documented in `docs/model-format.md`.

use std::path::Path;

use super::{Hyperparameters, LanguageModelSet, PacoModel, RateVector, Stencil, StencilRates};
use crate::corpus::{IdMap, Vocabulary};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"PACOMDL\0";
pub const FORMAT_VERSION: u32 = 1;
const TRAILER: &[u8; 4] = b"END\0";

const TAG_DENSE: u8 = 0;
const TAG_SPARSE: u8 = 1;

#[derive(Default)]
pub(crate) struct Encoder {
    pub buf: Vec<u8>,
}

impl Encoder {
    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub fn f64(&mut self, v: f64) {
        self.u64(v.to_bits());
    }
    pub fn bytes(&mut self, b: &[u8]) {
        self.u64(b.len() as u64);
        self.buf.extend_from_slice(b);
    }
    pub fn str(&mut self, s: &str) {
        self.bytes(s.as_bytes());
    }
    pub fn f64s(&mut self, v: &[f64]) {
        v.iter().for_each(|&x| self.f64(x));
    }
    pub fn u32s(&mut self, v: &[u32]) {
        v.iter().for_each(|&x| self.u32(x));
    }
}

pub(crate) struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Decoder { buf, pos: 0 }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Format(format!(
                "truncated file: wanted {n} bytes at offset {}",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }
    pub fn len(&mut self) -> Result<usize> {
        let n = self.u64()? as usize;
        if n > self.buf.len() - self.pos {
            return Err(Error::Format(format!(
                "length {n} at offset {} exceeds file size",
                self.pos
            )));
        }
        Ok(n)
    }
    pub fn bytes(&mut self) -> Result<&'a [u8]> {
        let n = self.len()?;
        self.take(n)
    }
    pub fn string(&mut self) -> Result<String> {
        String::from_utf8(self.bytes()?.to_vec())
            .map_err(|_| Error::Format("invalid UTF-8 string".into()))
    }
    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
    pub fn u32s(&mut self, n: usize) -> Result<Vec<u32>> {
        (0..n).map(|_| self.u32()).collect()
    }
    pub fn finished(&self) -> bool {
        self.pos == self.buf.len()
    }
}

fn encode_rates(e: &mut Encoder, r: &RateVector) {
    match r {
        RateVector::Dense(v) => {
            e.u8(TAG_DENSE);
            e.f64s(v);
        }
        RateVector::Sparse {
            default, entries, ..
        } => {
            e.u8(TAG_SPARSE);
            e.f64(*default);
            e.u32(entries.len() as u32);
            for &(x, v) in entries {
                e.u32(x);
                e.f64(v);
            }
        }
    }
}

fn decode_rates(d: &mut Decoder, len: usize) -> Result<RateVector> {
    match d.u8()? {
        TAG_DENSE => Ok(RateVector::Dense(d.f64s(len)?)),
        TAG_SPARSE => {
            let default = d.f64()?;
            let nnz = d.u32()? as usize;
            if nnz > len {
                return Err(Error::Format("sparse rate vector larger than vocabulary".into()));
            }
            let mut entries = Vec::with_capacity(nnz);
            for _ in 0..nnz {
                let x = d.u32()?;
                if x as usize >= len {
                    return Err(Error::Format("word index out of range".into()));
                }
                entries.push((x, d.f64()?));
            }
            Ok(RateVector::Sparse {
                len: len as u32,
                default,
                entries,
            })
        }
        t => Err(Error::Format(format!("unknown rate vector tag {t}"))),
    }
}

fn encode_ids(e: &mut Encoder, ids: &[String]) {
    ids.iter().for_each(|s| e.str(s));
}

fn decode_ids(d: &mut Decoder, n: usize) -> Result<Vec<String>> {
    (0..n).map(|_| d.string()).collect()
}

pub(crate) fn encode_model(e: &mut Encoder, m: &PacoModel) {
    let (n, mm, w) = (m.n_users(), m.n_items(), m.vocab_size());
    e.buf.extend_from_slice(MAGIC);
    e.u32(FORMAT_VERSION);
    e.u32(n as u32);
    e.u32(mm as u32);
    e.u32(w as u32);
    e.u32(m.stencils.len() as u32);
    e.u32(m.rates.stencils.len() as u32);

    encode_ids(e, m.vocabulary.words());
    encode_ids(e, m.users.ids());
    encode_ids(e, m.items.ids());

    let hyper = serde_json::to_vec(&m.hyper).expect("hyperparameters serialise");
    e.bytes(&hyper);

    e.f64(m.global_mean);
    e.f64(m.rating_scale);
    e.f64(m.noise_variance);
    e.f64(m.rating_bounds.0);
    e.f64(m.rating_bounds.1);

    for s in &m.stencils {
        e.u32(s.k_users as u32);
        e.u32(s.k_items as u32);
        e.f64(s.block_variance);
        e.f64s(&s.means);
        e.u32s(&s.user_clusters);
        e.u32s(&s.item_clusters);
    }

    encode_rates(e, &m.rates.background);
    for r in &m.rates.items {
        encode_rates(e, r);
    }
    for s in &m.rates.stencils {
        for r in s.blocks.iter().chain(&s.user_clusters).chain(&s.item_clusters) {
            encode_rates(e, r);
        }
    }
    e.buf.extend_from_slice(TRAILER);
}

pub(crate) fn decode_model(d: &mut Decoder) -> Result<PacoModel> {
    if d.take(MAGIC.len()).ok() != Some(&MAGIC[..]) {
        return Err(Error::Format("bad format: not a PACO model file".into()));
    }
    let version = d.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "model format version {version} unsupported (expected {FORMAT_VERSION})"
        )));
    }
    let n = d.u32()? as usize;
    let m = d.u32()? as usize;
    let w = d.u32()? as usize;
    let n_stencils = d.u32()? as usize;
    let n_text = d.u32()? as usize;

    let vocabulary = Vocabulary::from_words(decode_ids(d, w)?);
    let users = IdMap::from(decode_ids(d, n)?);
    let items = IdMap::from(decode_ids(d, m)?);

    let hyper: Hyperparameters = serde_json::from_slice(d.bytes()?)
        .map_err(|e| Error::Format(format!("hyperparameters: {e}")))?;

    let global_mean = d.f64()?;
    let rating_scale = d.f64()?;
    let noise_variance = d.f64()?;
    let rating_bounds = (d.f64()?, d.f64()?);

    let mut stencils = Vec::with_capacity(n_stencils);
    for _ in 0..n_stencils {
        let k_users = d.u32()? as usize;
        let k_items = d.u32()? as usize;
        let block_variance = d.f64()?;
        let means = d.f64s(k_users * k_items)?;
        let user_clusters = d.u32s(n)?;
        let item_clusters = d.u32s(m)?;
        stencils.push(
            Stencil::new(k_users, k_items, means, user_clusters, item_clusters, block_variance)
                .map_err(|e| Error::Format(format!("stencil: {e}")))?,
        );
    }

    let background = decode_rates(d, w)?;
    let items_lm = (0..m).map(|_| decode_rates(d, w)).collect::<Result<_>>()?;
    let mut text = Vec::with_capacity(n_text);
    for st in stencils.iter().take(n_text) {
        let blocks = (0..st.k_users * st.k_items)
            .map(|_| decode_rates(d, w))
            .collect::<Result<_>>()?;
        let user_clusters = (0..st.k_users).map(|_| decode_rates(d, w)).collect::<Result<_>>()?;
        let item_clusters = (0..st.k_items).map(|_| decode_rates(d, w)).collect::<Result<_>>()?;
        text.push(StencilRates {
            blocks,
            user_clusters,
            item_clusters,
        });
    }
    if d.take(TRAILER.len())? != TRAILER {
        return Err(Error::Format("missing end marker".into()));
    }

    let model = PacoModel {
        hyper,
        stencils,
        rates: LanguageModelSet {
            vocab_size: w,
            background,
            items: items_lm,
            stencils: text,
        },
        global_mean,
        rating_scale,
        noise_variance,
        rating_bounds,
        users,
        items,
        vocabulary,
    };
    model
        .validate()
        .map_err(|e| Error::Format(format!("inconsistent model: {e}")))?;
    Ok(model)
}

impl PacoModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut e = Encoder::default();
        encode_model(&mut e, self);
        e.buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut d = Decoder::new(bytes);
        let m = decode_model(&mut d)?;
        if !d.finished() {
            return Err(Error::Format("trailing bytes after model".into()));
        }
        Ok(m)
    }
}

pub fn write_model(path: &Path, model: &PacoModel) -> Result<()> {
    crate::config::write_atomic(path, &model.to_bytes())
}

pub fn read_model(path: &Path) -> Result<PacoModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    PacoModel::from_bytes(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}
