//! Binary checkpoint files (magic `CSKC`).
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic "CSKC" | version u16 | entry_count u32
//! entry: name_len u16 | name utf8 | kind u8
//!   kind 0 (network): head u8 [tanh: out u32 | lo f32*out | hi f32*out]
//!                     dim_count u16 | dims u32* | param_count u32 | params f32*
//!                     has_optimizer u8 [step u64 | lr f32 | beta1 f32 | beta2 f32 | eps f32 | m f32* | v f32*]
//!   kind 1 (scalars): count u32 | values f32*
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Adam, Head, Mlp};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"CSKC";
pub const CHECKPOINT_VERSION: u16 = 1;

/// One named item stored in a checkpoint.
#[derive(Debug, Clone)]
pub enum Entry {
    Network { net: Mlp, optimizer: Option<Adam> },
    Scalars(Vec<f64>),
}

/// An ordered collection of named networks and scalar vectors.
#[derive(Debug, Clone, Default)]
pub struct Checkpoint {
    entries: Vec<(String, Entry)>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_network(&mut self, name: &str, net: &Mlp, optimizer: Option<&Adam>) {
        self.entries.push((
            name.to_string(),
            Entry::Network {
                net: net.clone(),
                optimizer: optimizer.cloned(),
            },
        ));
    }

    pub fn push_scalars(&mut self, name: &str, values: &[f64]) {
        self.entries
            .push((name.to_string(), Entry::Scalars(values.to_vec())));
    }

    pub fn entries(&self) -> &[(String, Entry)] {
        &self.entries
    }

    fn get(&self, name: &str) -> Result<&Entry> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, e)| e)
            .ok_or_else(|| Error::Format(format!("checkpoint has no entry named {name:?}")))
    }

    pub fn network(&self, name: &str) -> Result<(Mlp, Option<Adam>)> {
        match self.get(name)? {
            Entry::Network { net, optimizer } => Ok((net.clone(), optimizer.clone())),
            Entry::Scalars(_) => Err(Error::Format(format!("entry {name:?} is not a network"))),
        }
    }

    pub fn scalars(&self, name: &str) -> Result<Vec<f64>> {
        match self.get(name)? {
            Entry::Scalars(v) => Ok(v.clone()),
            Entry::Network { .. } => Err(Error::Format(format!(
                "entry {name:?} is not a scalar list"
            ))),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        Self::read_from(&mut r)
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        put_u16(w, CHECKPOINT_VERSION)?;
        put_u32(w, self.entries.len() as u32)?;
        for (name, entry) in &self.entries {
            let bytes = name.as_bytes();
            put_u16(w, bytes.len() as u16)?;
            w.write_all(bytes)?;
            match entry {
                Entry::Network { net, optimizer } => {
                    w.write_all(&[0])?;
                    match net.head() {
                        Head::Identity => w.write_all(&[0])?,
                        Head::Tanh { lo, hi } => {
                            w.write_all(&[1])?;
                            put_u32(w, lo.len() as u32)?;
                            put_f32s(w, lo)?;
                            put_f32s(w, hi)?;
                        }
                        Head::Gaussian => w.write_all(&[2])?,
                    }
                    put_u16(w, net.dims().len() as u16)?;
                    for &d in net.dims() {
                        put_u32(w, d as u32)?;
                    }
                    put_u32(w, net.num_params() as u32)?;
                    put_f32s(w, net.params())?;
                    match optimizer {
                        None => w.write_all(&[0])?,
                        Some(opt) => {
                            w.write_all(&[1])?;
                            w.write_all(&opt.step_count().to_le_bytes())?;
                            put_f32s(w, &[opt.lr, opt.beta1, opt.beta2, opt.eps])?;
                            let (m, v) = opt.moments();
                            put_f32s(w, m)?;
                            put_f32s(w, v)?;
                        }
                    }
                }
                Entry::Scalars(values) => {
                    w.write_all(&[1])?;
                    put_u32(w, values.len() as u32)?;
                    put_f32s(w, values)?;
                }
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Format("bad checkpoint magic".into()));
        }
        let version = get_u16(r)?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let count = get_u32(r)? as usize;
        let mut entries = Vec::with_capacity(count);
        for _ in 0..count {
            let len = get_u16(r)? as usize;
            let mut name = vec![0u8; len];
            r.read_exact(&mut name)?;
            let name = String::from_utf8(name)
                .map_err(|_| Error::Format("entry name is not utf-8".into()))?;
            let entry = match get_u8(r)? {
                0 => {
                    let head = match get_u8(r)? {
                        0 => Head::Identity,
                        1 => {
                            let n = get_u32(r)? as usize;
                            let lo = get_f32s(r, n)?;
                            let hi = get_f32s(r, n)?;
                            Head::Tanh { lo, hi }
                        }
                        2 => Head::Gaussian,
                        t => return Err(Error::Format(format!("unknown head tag {t}"))),
                    };
                    let n_dims = get_u16(r)? as usize;
                    let dims = (0..n_dims)
                        .map(|_| get_u32(r).map(|d| d as usize))
                        .collect::<Result<Vec<_>>>()?;
                    let n_params = get_u32(r)? as usize;
                    let params = get_f32s(r, n_params)?;
                    let net = Mlp::from_parts(dims, params, head)?;
                    let optimizer = match get_u8(r)? {
                        0 => None,
                        1 => {
                            let mut step = [0u8; 8];
                            r.read_exact(&mut step)?;
                            let h = get_f32s(r, 4)?;
                            let m = get_f32s(r, n_params)?;
                            let v = get_f32s(r, n_params)?;
                            Some(Adam::from_parts(
                                h[0],
                                (h[1], h[2]),
                                h[3],
                                u64::from_le_bytes(step),
                                m,
                                v,
                            ))
                        }
                        t => return Err(Error::Format(format!("bad optimizer flag {t}"))),
                    };
                    Entry::Network { net, optimizer }
                }
                1 => {
                    let n = get_u32(r)? as usize;
                    Entry::Scalars(get_f32s(r, n)?)
                }
                k => return Err(Error::Format(format!("unknown entry kind {k}"))),
            };
            entries.push((name, entry));
        }
        Ok(Self { entries })
    }
}

pub(crate) fn put_u16<W: Write>(w: &mut W, v: u16) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn put_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn put_f32s<W: Write>(w: &mut W, values: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(values.len() * 4);
    for &v in values {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub(crate) fn get_u8<R: Read>(r: &mut R) -> Result<u8> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b)?;
    Ok(b[0])
}

pub(crate) fn get_u16<R: Read>(r: &mut R) -> Result<u16> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)?;
    Ok(u16::from_le_bytes(b))
}

pub(crate) fn get_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn get_f32s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 4];
    r.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_preserves_f32_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = Mlp::new(
            3,
            &[5],
            2,
            Head::Tanh {
                lo: vec![-1.0, 0.0],
                hi: vec![1.0, 0.5],
            },
            &mut rng,
        )
        .unwrap();
        let mut opt = Adam::new(net.num_params(), 1e-4);
        let mut p = net.params().to_vec();
        let g = vec![0.1; p.len()];
        opt.step(&mut p, &g).unwrap();

        let mut ck = Checkpoint::new();
        ck.push_network("actor", &net, Some(&opt));
        ck.push_scalars("log_temp", &[-1.5, 3.25]);
        let mut bytes = Vec::new();
        ck.write_to(&mut bytes).unwrap();
        assert_eq!(&bytes[..4], b"CSKC");

        let back = Checkpoint::read_from(&mut bytes.as_slice()).unwrap();
        let (net2, opt2) = back.network("actor").unwrap();
        assert_eq!(net2.dims(), net.dims());
        for (a, b) in net2.params().iter().zip(net.params()) {
            assert_eq!(*a, *b as f32 as f64);
        }
        assert_eq!(opt2.unwrap().step_count(), 1);
        assert_eq!(back.scalars("log_temp").unwrap(), vec![-1.5, 3.25]);
        assert!(back.network("missing").is_err());
    }

    #[test]
    fn rejects_bad_magic() {
        let bytes = b"XXXX\x01\x00\x00\x00\x00\x00".to_vec();
        assert!(matches!(
            Checkpoint::read_from(&mut bytes.as_slice()),
            Err(Error::Format(_))
        ));
    }
}
